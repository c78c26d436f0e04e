//! Kernel matrices: construction from feature tables, validation, and
//! combination.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{symmetry_residual, SortedEigen};

/// Relative asymmetry allowed in a kernel matrix.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Smallest eigenvalue allowed, relative to the largest absolute eigenvalue.
pub const PSD_TOL: f64 = 1e-8;

/// Item features, one row per item.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    data: DMatrix<f64>,
}

impl FeatureTable {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            // column-major storage
            let (r, c) = (pos % data.nrows(), pos / data.nrows());
            return Err(Error::InvalidFeatures(format!(
                "non-finite value at row {r}, column {c}"
            )));
        }
        Ok(FeatureTable { data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().position(|row| row.len() != d) {
            return Err(Error::InvalidFeatures(format!(
                "row {r} has {} columns, expected {d}",
                rows[r].len()
            )));
        }
        Self::new(DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]))
    }

    pub fn n_items(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.data.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn row(&self, i: usize) -> DVector<f64> {
        self.data.row(i).transpose()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.data.iter().all(|&x| x >= 0.0)
    }

    /// Plain-text table: one item per line, values separated by commas,
    /// tabs or spaces; `#` lines are comments.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row = line
                .split(|ch: char| ch == ',' || ch.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|_| Error::parse(path, lineno + 1, format!("bad number {s:?}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            if let Some(first) = rows.first() {
                let first: &Vec<f64> = first;
                if first.len() != row.len() {
                    return Err(Error::parse(
                        path,
                        lineno + 1,
                        format!("expected {} columns, found {}", first.len(), row.len()),
                    ));
                }
            }
            rows.push(row);
        }
        Self::from_rows(&rows)
    }
}

/// Symmetric positive semidefinite similarity matrix over `n` items.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    m: DMatrix<f64>,
}

impl KernelMatrix {
    /// Wrap `m` after checking symmetry and positive semidefiniteness.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidKernel(format!(
                "matrix is {}x{}, not square",
                m.nrows(),
                m.ncols()
            )));
        }
        let report = validate(&m);
        if !report.passed() {
            return Err(Error::InvalidKernel(report.to_string()));
        }
        Ok(KernelMatrix { m })
    }

    /// Wrap a matrix that is symmetric PSD by construction.
    pub(crate) fn trusted(m: DMatrix<f64>) -> Self {
        debug_assert!(m.is_square());
        KernelMatrix { m }
    }

    pub fn identity(n: usize) -> Self {
        KernelMatrix::trusted(DMatrix::identity(n, n))
    }

    pub fn n(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    /// Column `i`, i.e. the similarities of item `i` to every item.
    pub fn column(&self, i: usize) -> Result<DVector<f64>> {
        if i >= self.n() {
            return Err(Error::OutOfRange {
                index: i,
                len: self.n(),
            });
        }
        Ok(self.m.column(i).into_owned())
    }

    /// Principal submatrix over `items` (in the given order).
    pub fn submatrix(&self, items: &[usize]) -> Result<KernelMatrix> {
        self.check_items(items)?;
        Ok(KernelMatrix::trusted(DMatrix::from_fn(
            items.len(),
            items.len(),
            |a, b| self.m[(items[a], items[b])],
        )))
    }

    /// Rectangular block `K[rows, cols]`; column `c` holds the kernel
    /// evaluations of item `cols[c]` against every item in `rows`.
    pub fn cross(&self, rows: &[usize], cols: &[usize]) -> Result<DMatrix<f64>> {
        self.check_items(rows)?;
        self.check_items(cols)?;
        Ok(DMatrix::from_fn(rows.len(), cols.len(), |r, c| {
            self.m[(rows[r], cols[c])]
        }))
    }

    fn check_items(&self, items: &[usize]) -> Result<()> {
        match items.iter().find(|&&i| i >= self.n()) {
            Some(&index) => Err(Error::OutOfRange {
                index,
                len: self.n(),
            }),
            None => Ok(()),
        }
    }

    pub fn validate(&self) -> ValidationReport {
        validate(&self.m)
    }

    /// Text form: `n` on the first line, then `n` rows of 17-significant-digit values.
    pub fn to_text(&self) -> String {
        format_matrix_block(&self.m, true)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m = parse_square_matrix(&text, path)?;
        KernelMatrix::new(m).map_err(|e| Error::parse(path, 1, e.to_string()))
    }
}

/// Write a matrix as whitespace-separated rows of `{:.16e}` values,
/// optionally preceded by a line holding the row count.
pub(crate) fn format_matrix_block(m: &DMatrix<f64>, with_header: bool) -> String {
    let mut s = String::new();
    if with_header {
        let _ = writeln!(s, "{}", m.nrows());
    }
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| fmt_f64(m[(r, c)])).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

/// Decimal rendering with 17 significant digits; parses back bit-identically.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_square_matrix(text: &str, path: &Path) -> Result<DMatrix<f64>> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty kernel file"))?;
    let n: usize = header
        .trim()
        .parse()
        .map_err(|_| Error::parse(path, hline + 1, format!("bad size header {:?}", header.trim())))?;
    let mut m = DMatrix::zeros(n, n);
    for r in 0..n {
        let (lineno, line) = lines
            .next()
            .ok_or_else(|| Error::parse(path, hline + 2 + r, format!("expected {n} rows, found {r}")))?;
        let vals: Vec<&str> = line.split_whitespace().collect();
        if vals.len() != n {
            return Err(Error::parse(
                path,
                lineno + 1,
                format!("expected {n} values, found {}", vals.len()),
            ));
        }
        for (c, v) in vals.iter().enumerate() {
            m[(r, c)] = v
                .parse()
                .map_err(|_| Error::parse(path, lineno + 1, format!("bad number {v:?}")))?;
        }
    }
    if let Some((lineno, _)) = lines.next() {
        return Err(Error::parse(path, lineno + 1, "trailing data after matrix"));
    }
    Ok(m)
}

/// Symmetry and definiteness diagnostics for a square matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationReport {
    pub symmetry_residual: f64,
    pub min_eigenvalue: f64,
    pub max_abs_eigenvalue: f64,
    pub symmetric: bool,
    pub psd: bool,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.symmetric && self.psd
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "symmetry_residual={:e} min_eigenvalue={:e} status={}",
            self.symmetry_residual,
            self.min_eigenvalue,
            if self.passed() { "pass" } else { "fail" }
        )
    }
}

/// Check a square matrix against the kernel invariants.
pub fn validate(m: &DMatrix<f64>) -> ValidationReport {
    assert!(m.is_square(), "validate expects a square matrix");
    let residual = symmetry_residual(m);
    let (min_eig, max_abs) = match SortedEigen::new(m) {
        Some(e) => (e.min(), e.max_abs()),
        None => (f64::NAN, f64::NAN),
    };
    let min_for_check = if m.nrows() == 0 { 0.0 } else { min_eig };
    ValidationReport {
        symmetry_residual: residual,
        min_eigenvalue: min_eig,
        max_abs_eigenvalue: max_abs,
        symmetric: residual <= SYMMETRY_TOL,
        psd: min_for_check >= -PSD_TOL * max_abs,
    }
}

/// `K_ij = ⟨x_i, x_j⟩`.
pub fn linear_kernel(f: &FeatureTable) -> KernelMatrix {
    let x = f.matrix();
    KernelMatrix::trusted(x * x.transpose())
}

fn squared_distance(x: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    x.row(i)
        .iter()
        .zip(x.row(j).iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

fn pairwise_kernel(n: usize, mut entry: impl FnMut(usize, usize) -> f64) -> KernelMatrix {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = entry(i, i);
        for j in (i + 1)..n {
            let v = entry(i, j);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    KernelMatrix::trusted(m)
}

/// Gaussian kernel `exp(−γ‖x_i − x_j‖²)`.
pub fn rbf_kernel(f: &FeatureTable, gamma: f64) -> Result<KernelMatrix> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    let x = f.matrix();
    Ok(pairwise_kernel(f.n_items(), |i, j| {
        if i == j {
            1.0
        } else {
            (-gamma * squared_distance(x, i, j)).exp()
        }
    }))
}

/// Radial basis function over the χ² distance between histograms:
/// `exp(−σ Σ_t (x_t − y_t)² / (x_t + y_t))`, with `0/0` terms taken as 0.
pub fn chi2_rbf_kernel(f: &FeatureTable, sigma: f64) -> Result<KernelMatrix> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    if let Some(pos) = f.matrix().iter().position(|&v| v < 0.0) {
        let n = f.n_items().max(1);
        return Err(Error::InvalidFeatures(format!(
            "negative histogram entry at row {}, column {}",
            pos % n,
            pos / n
        )));
    }
    let x = f.matrix();
    Ok(pairwise_kernel(f.n_items(), |i, j| {
        if i == j {
            return 1.0;
        }
        let chi2: f64 = x
            .row(i)
            .iter()
            .zip(x.row(j).iter())
            .map(|(&a, &b)| if a + b > 0.0 { (a - b) * (a - b) / (a + b) } else { 0.0 })
            .sum();
        (-sigma * chi2).exp()
    }))
}

/// Cosine similarity between rows.
pub fn cosine_kernel(f: &FeatureTable) -> Result<KernelMatrix> {
    let x = f.matrix();
    let norms: Vec<f64> = (0..f.n_items()).map(|i| x.row(i).norm()).collect();
    if let Some(r) = norms.iter().position(|&nrm| nrm == 0.0) {
        return Err(Error::InvalidFeatures(format!("row {r} has zero norm")));
    }
    Ok(pairwise_kernel(f.n_items(), |i, j| {
        if i == j {
            1.0
        } else {
            x.row(i).dot(&x.row(j)) / (norms[i] * norms[j])
        }
    }))
}

/// Unweighted sum of base kernels.
pub fn sum_kernel(kernels: &[KernelMatrix]) -> Result<KernelMatrix> {
    let first = kernels
        .first()
        .ok_or_else(|| Error::InvalidParameter("sum of zero kernels".into()))?;
    let mut acc = first.m.clone();
    for (p, k) in kernels.iter().enumerate().skip(1) {
        if k.n() != first.n() {
            return Err(Error::DimensionMismatch(format!(
                "kernel {p} has {} items, kernel 0 has {}",
                k.n(),
                first.n()
            )));
        }
        acc += &k.m;
    }
    Ok(KernelMatrix::trusted(acc))
}

/// Column `i` of `k`.
pub fn kernel_column(k: &KernelMatrix, i: usize) -> Result<DVector<f64>> {
    k.column(i)
}

/// Check that every kernel in a list covers the same `n` items.
pub fn common_size(kernels: &[KernelMatrix]) -> Result<usize> {
    let n = kernels
        .first()
        .ok_or_else(|| Error::InvalidParameter("at least one kernel is required".into()))?
        .n();
    for (p, k) in kernels.iter().enumerate() {
        if k.n() != n {
            return Err(Error::DimensionMismatch(format!(
                "kernel {p} has {} items, kernel 0 has {n}",
                k.n()
            )));
        }
    }
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn table(rows: &[&[f64]]) -> FeatureTable {
        FeatureTable::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn random_table(n: usize, d: usize, seed: u64) -> FeatureTable {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        FeatureTable::new(DMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0))).unwrap()
    }

    #[test]
    fn linear_small_cases() {
        let k = linear_kernel(&table(&[&[1.0, 0.0], &[0.0, 1.0]]));
        assert_eq!(k.matrix(), &DMatrix::identity(2, 2));
        let k = linear_kernel(&table(&[&[1.0, 1.0], &[2.0, 2.0]]));
        assert_eq!(k.matrix(), &DMatrix::from_row_slice(2, 2, &[2.0, 4.0, 4.0, 8.0]));
    }

    #[test]
    fn linear_matches_triple_loop() {
        let f = random_table(5, 3, 1);
        let k = linear_kernel(&f);
        let x = f.matrix();
        for i in 0..5 {
            for j in 0..5 {
                let mut s = 0.0;
                for t in 0..3 {
                    s += x[(i, t)] * x[(j, t)];
                }
                assert!((k.get(i, j) - s).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn non_finite_features_rejected() {
        assert!(FeatureTable::new(DMatrix::from_row_slice(1, 2, &[1.0, f64::INFINITY])).is_err());
        assert!(FeatureTable::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn rbf_cases() {
        let k = rbf_kernel(&table(&[&[0.0], &[1.0]]), 1.0).unwrap();
        assert_eq!(k.get(0, 0), 1.0);
        assert!((k.get(0, 1) - (-1.0f64).exp()).abs() < 1e-15);
        assert!((k.get(0, 1) - 0.367879).abs() < 1e-6);
        assert!(rbf_kernel(&table(&[&[0.0]]), 0.0).is_err());
        assert!(rbf_kernel(&table(&[&[0.0]]), -1.0).is_err());
        let k = rbf_kernel(&random_table(20, 4, 2), 0.7).unwrap();
        assert!(k.validate().passed());
        assert!(k.matrix().iter().all(|&v| v > 0.0 && v <= 1.0));
    }

    #[test]
    fn chi2_cases() {
        let k = chi2_rbf_kernel(&table(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 0.0]]), 1.0).unwrap();
        assert!((k.get(0, 1) - (-2.0f64).exp()).abs() < 1e-15);
        assert_eq!(k.get(0, 2), 1.0);
        assert!(chi2_rbf_kernel(&table(&[&[0.5, 0.5]]), 256.0).is_ok());
        assert!(chi2_rbf_kernel(&table(&[&[-0.5, 0.5]]), 1.0).is_err());
        assert!(chi2_rbf_kernel(&table(&[&[0.5, 0.5]]), 0.0).is_err());
    }

    #[test]
    fn cosine_cases() {
        let k = cosine_kernel(&table(&[&[1.0, 0.0], &[0.0, 2.0], &[3.0, 0.0]])).unwrap();
        assert_eq!(k.get(0, 1), 0.0);
        assert!((k.get(0, 2) - 1.0).abs() < 1e-15);
        let err = cosine_kernel(&table(&[&[1.0, 0.0], &[0.0, 0.0]])).unwrap_err();
        assert!(err.to_string().contains("row 1"));

        // normalise-then-dot oracle
        let f = random_table(6, 4, 3);
        let k = cosine_kernel(&f).unwrap();
        let x = f.matrix();
        let rows: Vec<Vec<f64>> = (0..6)
            .map(|i| {
                let nrm = x.row(i).norm();
                x.row(i).iter().map(|v| v / nrm).collect()
            })
            .collect();
        let oracle = linear_kernel(&FeatureTable::from_rows(&rows).unwrap());
        assert!((k.matrix() - oracle.matrix()).amax() < 1e-12);
    }

    #[test]
    fn sum_cases() {
        let k = linear_kernel(&random_table(4, 3, 4));
        let zero = KernelMatrix::trusted(DMatrix::zeros(4, 4));
        assert_eq!(sum_kernel(&[k.clone(), zero]).unwrap(), k);
        let i2 = sum_kernel(&[KernelMatrix::identity(3), KernelMatrix::identity(3)]).unwrap();
        assert_eq!(i2.matrix(), &(DMatrix::identity(3, 3) * 2.0));
        assert!(matches!(
            sum_kernel(&[KernelMatrix::identity(3), KernelMatrix::identity(2)]),
            Err(Error::DimensionMismatch(_))
        ));
        let a = rbf_kernel(&random_table(8, 2, 5), 1.0).unwrap();
        let b = linear_kernel(&random_table(8, 2, 6));
        assert!(sum_kernel(&[a, b]).unwrap().validate().passed());
    }

    #[test]
    fn validate_cases() {
        let r = validate(&DMatrix::identity(3, 3));
        assert!(r.passed());
        assert!((r.min_eigenvalue - 1.0).abs() < 1e-14);
        let r = validate(&DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        assert!(!r.passed());
        assert!((r.min_eigenvalue + 1.0).abs() < 1e-14);
        let r = validate(&DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]));
        assert!(!r.symmetric);
        assert!(KernelMatrix::new(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).is_err());
    }

    #[test]
    fn column_access() {
        let k = KernelMatrix::identity(4);
        let c = kernel_column(&k, 2).unwrap();
        assert_eq!(c, DVector::from_vec(vec![0.0, 0.0, 1.0, 0.0]));
        assert!(matches!(kernel_column(&k, 4), Err(Error::OutOfRange { .. })));

        let k = rbf_kernel(&random_table(5, 2, 7), 0.3).unwrap();
        let mut e = DVector::zeros(5);
        e[3] = 1.0;
        assert_eq!(k.column(3).unwrap(), k.matrix() * e);
        assert_eq!(k.column(3).unwrap(), k.matrix().row(3).transpose());
    }

    #[test]
    fn submatrix_and_cross() {
        let k = rbf_kernel(&random_table(5, 2, 8), 0.3).unwrap();
        let s = k.submatrix(&[4, 1]).unwrap();
        assert_eq!(s.get(0, 1), k.get(4, 1));
        let c = k.cross(&[0, 2], &[3]).unwrap();
        assert_eq!(c[(1, 0)], k.get(2, 3));
        assert!(k.submatrix(&[5]).is_err());
    }

    #[test]
    fn text_round_trip_is_bit_exact() {
        let k = rbf_kernel(&random_table(6, 3, 9), 0.37).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.txt");
        k.write(&path).unwrap();
        let back = KernelMatrix::read(&path).unwrap();
        assert_eq!(back, k);
        fs::write(&path, "2\n1 0\n").unwrap();
        assert!(matches!(KernelMatrix::read(&path), Err(Error::Parse { line: 3, .. })));
    }
}
