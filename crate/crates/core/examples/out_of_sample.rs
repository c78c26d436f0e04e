// Train on part of the items, save the model, and map unseen items through
// their kernel evaluations against the training set.
//
// Run with `cargo run --example out_of_sample`.

use mkpoe::embedding::factorize_default;
use mkpoe::eval::{coordinate_distance, filter_test_comparisons, gauc, restrict_comparisons, SplitSpec};
use mkpoe::solver::{train, Hyperparams};
use mkpoe::synth::{generate_comparisons, generate_informative_kernel, Taxonomy};
use mkpoe::EmbeddingModel;

pub fn run() -> mkpoe::Result<()> {
    let tax = Taxonomy::default_tree();
    let labels = tax.items(4);
    let n = labels.len();
    let comps = generate_comparisons(&tax, &labels, 3, 600);
    let kernel = generate_informative_kernel(&tax, &labels, 0.8, 4)?;
    let split = SplitSpec::random(n, 0.25, 2, 5)?;

    let hp = Hyperparams {
        beta: 100.0,
        max_iter: 200,
        step0: 0.01,
        ..Default::default()
    };
    let local = restrict_comparisons(&comps, &split.train);
    let (w, _) = train(&[kernel.submatrix(&split.train)?], &local, &hp)?;
    let mut model = factorize_default(&w)?;
    model.provenance.items = Some(split.train.clone());

    let path = std::env::temp_dir().join(format!("mkpoe-model-{}.txt", std::process::id()));
    model.save(&path)?;
    let model = EmbeddingModel::load(&path)?;
    let _ = std::fs::remove_file(&path);

    // one column per item, rows indexed by training items
    let all: Vec<usize> = (0..n).collect();
    let coords = model.embed_columns(&[kernel.cross(&split.train, &all)?])?;
    let held_out = filter_test_comparisons(&comps, &split.train, &split.test);
    println!(
        "{}-dimensional model over {} training items; held-out GAUC {:.3} on {} comparisons",
        model.dim(),
        model.n,
        gauc(coordinate_distance(&coords), &held_out)?,
        held_out.len()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run().unwrap();
}
