// Non-metric MDS from comparisons alone: the identity kernel turns the
// learned metric into the Gram matrix of the embedded points.
//
// Run with `cargo run --example gnmds`.

use mkpoe::embedding::factorize_default;
use mkpoe::eval::{coordinate_distance, gauc};
use mkpoe::solver::{train_gnmds, Hyperparams};
use mkpoe::Comparison;

pub fn run() -> mkpoe::Result<()> {
    // ten points on a line: nearer in index means more similar
    let n: usize = 10;
    let mut comps = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for l in 0..n {
                let (dij, dil) = (i.abs_diff(j), i.abs_diff(l));
                if i != j && i != l && dij < dil {
                    comps.push(Comparison::new(i, j, i, l));
                }
            }
        }
    }
    let hp = Hyperparams {
        beta: 100.0,
        ..Default::default()
    };
    let (w, trace) = train_gnmds(n, &comps, &hp)?;
    let coords = factorize_default(&w)?.embed_train(&[mkpoe::KernelMatrix::identity(n)])?;
    println!(
        "{} comparisons, objective {:.3} -> {:.3}, {} dimensions",
        comps.len(),
        trace.initial_objective(),
        trace.best_objective(),
        coords.ncols()
    );
    println!("training GAUC {:.3}", gauc(coordinate_distance(&coords), &comps)?);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run().unwrap();
}
