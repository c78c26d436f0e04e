// Pick the trade-off parameter by item-level cross-validation.
//
// Run with `cargo run --release --example cross_validation`.

use mkpoe::eval::cross_validate_beta;
use mkpoe::solver::{Hyperparams, Mode};
use mkpoe::synth::{generate_comparisons, generate_informative_kernel, generate_noise_kernel, Taxonomy};

pub fn run() -> mkpoe::Result<()> {
    let tax = Taxonomy::default_tree();
    let labels = tax.items(4);
    let comps = generate_comparisons(&tax, &labels, 8, 600);
    let kernels = vec![
        generate_informative_kernel(&tax, &labels, 1.0, 1)?,
        generate_noise_kernel(labels.len(), 2),
    ];
    let hp = Hyperparams {
        max_iter: 150,
        step0: 0.01,
        mode: Mode::Diagonal,
        seed: 3,
        ..Default::default()
    };
    let report = cross_validate_beta(&kernels, &comps, &[0.1, 10.0, 1000.0], 3, &hp)?;
    print!("{}", report.to_text());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run().unwrap();
}
