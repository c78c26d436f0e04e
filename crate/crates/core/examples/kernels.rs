// Build base kernels from a feature table, check them, and round-trip one
// through the kernel file format.
//
// Run with `cargo run --example kernels`.

use mkpoe::kernel::{chi2_rbf_kernel, cosine_kernel, linear_kernel, rbf_kernel, sum_kernel};
use mkpoe::{FeatureTable, KernelMatrix};

pub fn run() -> mkpoe::Result<()> {
    // three tiny colour histograms
    let f = FeatureTable::from_rows(&[
        vec![0.7, 0.2, 0.1],
        vec![0.6, 0.3, 0.1],
        vec![0.1, 0.1, 0.8],
    ])?;
    let kernels = vec![
        linear_kernel(&f),
        rbf_kernel(&f, 2.0)?,
        chi2_rbf_kernel(&f, 1.0)?,
        cosine_kernel(&f)?,
    ];
    for (name, k) in ["linear", "rbf", "chi2-rbf", "cosine"].iter().zip(&kernels) {
        println!("{name:>8}: K(0,1)={:.3} K(0,2)={:.3}  [{}]", k.get(0, 1), k.get(0, 2), k.validate());
    }
    let sum = sum_kernel(&kernels)?;

    let dir = std::env::temp_dir().join(format!("mkpoe-kernels-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| mkpoe::Error::io(&dir, e))?;
    let path = dir.join("sum.txt");
    sum.write(&path)?;
    assert_eq!(KernelMatrix::read(&path)?, sum);
    println!("sum kernel written to {} and read back unchanged", path.display());
    let _ = std::fs::remove_dir_all(&dir);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run().unwrap();
}
