// Exact embedding of a consistent comparison set: four corners of a square,
// every side shorter than every diagonal.
//
// Run with `cargo run --example oracle`.

use mkpoe::embedding::row_distance;
use mkpoe::eval::{coordinate_distance, gauc};
use mkpoe::oracle::{classical_mds_gram, constant_shift_embed, naive_total_order};
use mkpoe::Comparison;

pub fn run() -> mkpoe::Result<()> {
    let sides = [(0, 1), (1, 2), (2, 3), (0, 3)];
    let diagonals = [(0, 2), (1, 3)];
    let comps: Vec<Comparison> = sides
        .iter()
        .flat_map(|&(i, j)| diagonals.iter().map(move |&(k, l)| Comparison::new(i, j, k, l)))
        .collect();

    let delta = naive_total_order(&comps, 4)?;
    let a = classical_mds_gram(&delta);
    let embedding = constant_shift_embed(&a)?;
    println!("shift = {:.4}", embedding.shift);
    for i in 0..4 {
        for j in (i + 1)..4 {
            println!(
                "  d({i},{j}): target {}  embedded {:.4}",
                delta.get(i, j),
                row_distance(&embedding.coords, i, j)
            );
        }
    }
    println!("GAUC {}", gauc(coordinate_distance(&embedding.coords), &comps)?);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run().unwrap();
}
