// Multiple kernel learning on a synthetic taxonomy: two informative kernels
// and three random distractors. Compares single kernels, their unweighted
// sum, and the jointly learned per-kernel metrics.
//
// Run with `cargo run --release --example taxonomy_mkpoe`.

use mkpoe::eval::{fit_and_score, SplitSpec};
use mkpoe::kernel::sum_kernel;
use mkpoe::solver::{Hyperparams, Mode};
use mkpoe::synth::{generate_comparisons, generate_informative_kernel, generate_noise_kernel, Taxonomy};

pub fn run() -> mkpoe::Result<()> {
    let per_class = std::env::var("PER_CLASS").ok().and_then(|v| v.parse().ok()).unwrap_or(8);
    let tax = Taxonomy::default_tree();
    let labels = tax.items(per_class);
    let n = labels.len();
    let comps = generate_comparisons(&tax, &labels, 1, 150 * n / 10);

    let mut kernels = vec![
        generate_informative_kernel(&tax, &labels, 1.0, 11)?,
        generate_informative_kernel(&tax, &labels, 1.0, 12)?,
    ];
    for s in 0..3 {
        kernels.push(generate_noise_kernel(n, 100 + s));
    }
    let split = SplitSpec::random(n, 0.2, 5, 7)?;
    let hp = Hyperparams {
        beta: 100.0,
        max_iter: 300,
        step0: 0.01,
        mode: Mode::Diagonal,
        ..Default::default()
    };
    println!("{n} items, {} comparisons", comps.len());

    for (p, k) in kernels.iter().enumerate() {
        let r = fit_and_score(std::slice::from_ref(k), &comps, &split.train, &split.test, &hp)?;
        println!("kernel {p} alone: {:.3}", r.accuracy);
    }
    let sum = sum_kernel(&kernels)?;
    let r = fit_and_score(&[sum], &comps, &split.train, &split.test, &hp)?;
    println!("unweighted sum:  {:.3}", r.accuracy);

    let r = fit_and_score(&kernels, &comps, &split.train, &split.test, &hp)?;
    println!("joint metrics:   {:.3}", r.accuracy);
    let mass: Vec<f64> = (0..kernels.len()).map(|p| r.metrics.trace(p)).collect();
    let total: f64 = mass.iter().sum();
    for (p, m) in mass.iter().enumerate() {
        println!("  weight share of kernel {p}: {:.4}", m / total);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run().unwrap();
}
