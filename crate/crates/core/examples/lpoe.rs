// Learn a linear projection of raw features (no kernel) from comparisons.
//
// Run with `cargo run --example lpoe`.

use mkpoe::solver::{feature_distance, train_lpoe, Hyperparams};
use mkpoe::{Comparison, FeatureTable};

pub fn run() -> mkpoe::Result<()> {
    // only the first feature is relevant; the second is large and misleading
    let rows: Vec<Vec<f64>> = (0..8)
        .map(|i| vec![i as f64 * 0.5, ((i * 5) % 8) as f64 * 3.0])
        .collect();
    let f = FeatureTable::from_rows(&rows)?;
    let mut comps = Vec::new();
    for i in 0..8usize {
        for j in 0..8usize {
            for l in 0..8usize {
                if i != j && i != l && i.abs_diff(j) < i.abs_diff(l) {
                    comps.push(Comparison::new(i, j, i, l));
                }
            }
        }
    }
    let hp = Hyperparams {
        beta: 100.0,
        max_iter: 400,
        step0: 0.01,
        ..Default::default()
    };
    let (w, _) = train_lpoe(&f, &comps, &hp)?;
    let m = w.dense(0);
    println!("learned metric:\n{m:.4}");
    let ok = comps
        .iter()
        .filter(|c| feature_distance(&w, &f, c.i, c.j) < feature_distance(&w, &f, c.k, c.l))
        .count();
    println!("{ok}/{} comparisons satisfied", comps.len());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run().unwrap();
}
