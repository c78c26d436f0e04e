//! Factorised embedding models.
//!
//! A learned metric `Wᵖ = Vᵖ Λᵖ Vᵖᵀ` becomes a projection
//! `Nᵖ = (Λᵖ)^{1/2} Vᵖᵀ`; an item with kernel columns `kᵖ` maps to the
//! concatenation of `Nᵖ kᵖ` over all kernels. Squared Euclidean distances in
//! that space equal the learned distances.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernel::{common_size, fmt_f64, KernelMatrix};
use crate::linalg::SortedEigen;
use crate::solver::{Hyperparams, MetricSet, Mode};

pub const MODEL_VERSION: u32 = 1;
const MAGIC: &str = "mkpoe-model";

/// Default eigenvalue floor, relative to each kernel's largest eigenvalue.
pub const RELATIVE_EIG_FLOOR: f64 = 1e-10;

/// Retained spectrum of one kernel's metric.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelProjection {
    /// Retained eigenvalues, descending, all positive.
    pub eigenvalues: DVector<f64>,
    /// `n × d` eigenvectors matching `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
    /// `d × n` projection `Λ^{1/2} Vᵀ`.
    projection: DMatrix<f64>,
}

impl KernelProjection {
    fn new(eigenvalues: DVector<f64>, eigenvectors: DMatrix<f64>) -> Self {
        let mut projection = eigenvectors.transpose();
        for (r, &lam) in eigenvalues.iter().enumerate() {
            projection.row_mut(r).scale_mut(lam.sqrt());
        }
        KernelProjection {
            eigenvalues,
            eigenvectors,
            projection,
        }
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn projection(&self) -> &DMatrix<f64> {
        &self.projection
    }

    /// `Nᵀ N = V Λ Vᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.projection.transpose() * &self.projection
    }
}

/// Where a model came from.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Provenance {
    pub hyperparams: Option<Hyperparams>,
    /// One label per kernel (usually the kernel file name).
    pub kernels: Vec<String>,
    /// Global indices of the training items, when trained on a subset.
    pub items: Option<Vec<usize>>,
}

/// Per-kernel projections into a shared Euclidean space.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    pub mode: Mode,
    /// Number of training items (length of every kernel column).
    pub n: usize,
    pub kernels: Vec<KernelProjection>,
    pub provenance: Provenance,
}

impl EmbeddingModel {
    /// Total output dimension `Σ dᵖ`.
    pub fn dim(&self) -> usize {
        self.kernels.iter().map(KernelProjection::dim).sum()
    }

    pub fn n_kernels(&self) -> usize {
        self.kernels.len()
    }

    /// Map one item given its kernel evaluations against the training items.
    pub fn embed_oos(&self, kcols: &[DVector<f64>]) -> Result<DVector<f64>> {
        if kcols.len() != self.kernels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} kernel columns for a {}-kernel model",
                kcols.len(),
                self.kernels.len()
            )));
        }
        let mut out = DVector::zeros(self.dim());
        let mut offset = 0;
        for (p, (proj, col)) in self.kernels.iter().zip(kcols).enumerate() {
            if col.len() != self.n {
                return Err(Error::DimensionMismatch(format!(
                    "kernel {p} column has length {}, expected {}",
                    col.len(),
                    self.n
                )));
            }
            let y = &proj.projection * col;
            out.rows_mut(offset, proj.dim()).copy_from(&y);
            offset += proj.dim();
        }
        Ok(out)
    }

    /// Map several items at once. `cross[p]` is `n × n_new`, one column per item.
    pub fn embed_columns(&self, cross: &[DMatrix<f64>]) -> Result<DMatrix<f64>> {
        let count = cross.first().map_or(0, DMatrix::ncols);
        if let Some(p) = cross.iter().position(|c| c.ncols() != count) {
            return Err(Error::DimensionMismatch(format!(
                "kernel {p} block has {} columns, kernel 0 has {count}",
                cross[p].ncols()
            )));
        }
        let mut out = DMatrix::zeros(count, self.dim());
        for item in 0..count {
            let cols: Vec<DVector<f64>> = cross.iter().map(|c| c.column(item).into_owned()).collect();
            let row = self.embed_oos(&cols)?;
            out.row_mut(item).copy_from(&row.transpose());
        }
        Ok(out)
    }

    /// Coordinates of the training items (one row each).
    pub fn embed_train(&self, kernels: &[KernelMatrix]) -> Result<DMatrix<f64>> {
        let n = common_size(kernels)?;
        if n != self.n || kernels.len() != self.kernels.len() {
            return Err(Error::DimensionMismatch(format!(
                "model expects {} kernels over {} items, got {} over {n}",
                self.kernels.len(),
                self.n,
                kernels.len()
            )));
        }
        let blocks: Vec<DMatrix<f64>> = kernels.iter().map(|k| k.matrix().clone()).collect();
        self.embed_columns(&blocks)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{MAGIC} {MODEL_VERSION}");
        let _ = writeln!(s, "mode {}", self.mode);
        let _ = writeln!(s, "m {}", self.kernels.len());
        let _ = writeln!(s, "n {}", self.n);
        let dims: Vec<String> = self.kernels.iter().map(|k| k.dim().to_string()).collect();
        let _ = writeln!(s, "dims {}", dims.join(" "));
        match &self.provenance.hyperparams {
            Some(hp) => {
                let cfg: Vec<String> = hp.to_config().lines().map(str::to_string).collect();
                let _ = writeln!(s, "hyperparams {}", cfg.join(" "));
            }
            None => s.push_str("hyperparams -\n"),
        }
        let _ = writeln!(s, "kernel_names {}", self.provenance.kernels.len());
        for name in &self.provenance.kernels {
            let _ = writeln!(s, "{name}");
        }
        match &self.provenance.items {
            Some(items) => {
                let list: Vec<String> = items.iter().map(usize::to_string).collect();
                let _ = writeln!(s, "items {} {}", items.len(), list.join(" "));
            }
            None => s.push_str("items -\n"),
        }
        for (p, k) in self.kernels.iter().enumerate() {
            let _ = writeln!(s, "kernel {p}");
            let vals: Vec<String> = k.eigenvalues.iter().map(|&x| fmt_f64(x)).collect();
            let _ = writeln!(s, "{}", vals.join(" "));
            for r in 0..self.n {
                let row: Vec<String> = (0..k.dim()).map(|c| fmt_f64(k.eigenvectors[(r, c)])).collect();
                let _ = writeln!(s, "{}", row.join(" "));
            }
        }
        s.push_str("end\n");
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut r = LineReader::new(text, path);

        let header = r.next_line()?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some(MAGIC) {
            return Err(r.error("not an embedding model file"));
        }
        let version: u32 = r.parse_field(parts.next(), "version")?;
        if version != MODEL_VERSION {
            return Err(r.error(format!("unsupported model version {version} (expected {MODEL_VERSION})")));
        }
        let mode: Mode = r.keyed("mode")?.parse().map_err(|e: Error| r.error(e.to_string()))?;
        let m: usize = r.keyed_parse("m")?;
        let n: usize = r.keyed_parse("n")?;
        let dims: Vec<usize> = r
            .keyed("dims")?
            .split_whitespace()
            .map(|t| r.parse_field(Some(t), "dimension"))
            .collect::<Result<_>>()?;
        if dims.len() != m {
            return Err(r.error(format!("{} dimensions listed for {m} kernels", dims.len())));
        }
        let hp_field = r.keyed("hyperparams")?;
        let hyperparams = if hp_field == "-" {
            None
        } else {
            let cfg = hp_field.split_whitespace().collect::<Vec<_>>().join("\n");
            Some(
                Hyperparams::default()
                    .parse_config(&cfg, path)
                    .map_err(|e| r.error(e.to_string()))?,
            )
        };
        let name_count: usize = r.keyed_parse("kernel_names")?;
        let mut names = Vec::with_capacity(name_count);
        for _ in 0..name_count {
            names.push(r.next_line()?.to_string());
        }
        let items_field = r.keyed("items")?;
        let items = if items_field == "-" {
            None
        } else {
            let mut toks = items_field.split_whitespace();
            let count: usize = r.parse_field(toks.next(), "item count")?;
            let list: Vec<usize> = toks.map(|t| r.parse_field(Some(t), "item index")).collect::<Result<_>>()?;
            if list.len() != count || count != n {
                return Err(r.error(format!("expected {n} training items, found {}", list.len())));
            }
            Some(list)
        };

        let mut kernels = Vec::with_capacity(m);
        for (p, &d) in dims.iter().enumerate() {
            let idx: usize = r.keyed_parse("kernel")?;
            if idx != p {
                return Err(r.error(format!("expected kernel block {p}, found {idx}")));
            }
            let lambda = r.floats(d)?;
            let mut v = DMatrix::zeros(n, d);
            for row in 0..n {
                let vals = r.floats(d)?;
                for (c, x) in vals.into_iter().enumerate() {
                    v[(row, c)] = x;
                }
            }
            kernels.push(KernelProjection::new(DVector::from_vec(lambda), v));
        }
        if r.next_line()? != "end" {
            return Err(r.error("expected end marker"));
        }
        Ok(EmbeddingModel {
            mode,
            n,
            kernels,
            provenance: Provenance {
                hyperparams,
                kernels: names,
                items,
            },
        })
    }
}

struct LineReader<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
    path: &'a Path,
}

impl<'a> LineReader<'a> {
    fn new(text: &'a str, path: &'a Path) -> Self {
        LineReader {
            lines: text.lines().enumerate(),
            line: 0,
            path,
        }
    }

    fn error(&self, msg: impl Into<String>) -> Error {
        Error::parse(self.path, self.line, msg)
    }

    fn next_line(&mut self) -> Result<&'a str> {
        match self.lines.next() {
            Some((i, l)) => {
                self.line = i + 1;
                Ok(l.trim_end())
            }
            None => {
                self.line += 1;
                Err(self.error("unexpected end of file"))
            }
        }
    }

    fn keyed(&mut self, key: &str) -> Result<&'a str> {
        let line = self.next_line()?;
        match line.split_once(' ') {
            Some((k, rest)) if k == key => Ok(rest.trim()),
            _ if line == key => Ok(""),
            _ => Err(self.error(format!("expected `{key}` line"))),
        }
    }

    fn keyed_parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.keyed(key)?;
        self.parse_field(Some(v), key)
    }

    fn parse_field<T: std::str::FromStr>(&self, tok: Option<&str>, what: &str) -> Result<T> {
        tok.and_then(|t| t.parse().ok())
            .ok_or_else(|| self.error(format!("invalid {what}")))
    }

    fn floats(&mut self, count: usize) -> Result<Vec<f64>> {
        let line = self.next_line()?;
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| self.parse_field(Some(t), "number"))
            .collect::<Result<_>>()?;
        if vals.len() != count {
            return Err(self.error(format!("expected {count} values, found {}", vals.len())));
        }
        Ok(vals)
    }
}

/// Decompose each learned metric and keep eigenvalues above `eig_floor`.
pub fn factorize(w: &MetricSet, eig_floor: f64) -> Result<EmbeddingModel> {
    factorize_with(w, |_| eig_floor)
}

/// [`factorize`] with a per-kernel floor of `1e-10 · λ_max`.
pub fn factorize_default(w: &MetricSet) -> Result<EmbeddingModel> {
    factorize_with(w, |lmax| RELATIVE_EIG_FLOOR * lmax.max(0.0))
}

fn factorize_with(w: &MetricSet, floor: impl Fn(f64) -> f64) -> Result<EmbeddingModel> {
    let n = w.dim();
    let kernels = match w {
        MetricSet::Full(ws) => ws
            .iter()
            .enumerate()
            .map(|(p, wp)| {
                let eig = SortedEigen::new(wp).ok_or(Error::Eigen(p))?;
                let lmax = eig.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let cut = floor(lmax);
                let keep: Vec<usize> = (0..n).filter(|&i| eig.values[i] > cut).collect();
                let values = DVector::from_iterator(keep.len(), keep.iter().map(|&i| eig.values[i]));
                let mut vectors = DMatrix::zeros(n, keep.len());
                for (dst, &src) in keep.iter().enumerate() {
                    vectors.set_column(dst, &eig.vectors.column(src));
                }
                Ok(KernelProjection::new(values, vectors))
            })
            .collect::<Result<Vec<_>>>()?,
        MetricSet::Diagonal(ws) => ws
            .iter()
            .map(|wp| {
                let lmax = wp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let cut = floor(lmax);
                let mut keep: Vec<usize> = (0..n).filter(|&i| wp[i] > cut).collect();
                // stable sort keeps index order among equal weights
                keep.sort_by(|&a, &b| wp[b].total_cmp(&wp[a]));
                let values = DVector::from_iterator(keep.len(), keep.iter().map(|&i| wp[i]));
                let mut vectors = DMatrix::zeros(n, keep.len());
                for (dst, &src) in keep.iter().enumerate() {
                    vectors[(src, dst)] = 1.0;
                }
                KernelProjection::new(values, vectors)
            })
            .collect(),
    };
    Ok(EmbeddingModel {
        mode: w.mode(),
        n,
        kernels,
        provenance: Provenance::default(),
    })
}

/// Squared Euclidean distance between rows `i` and `j` of a coordinate matrix.
pub fn row_distance(coords: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    coords
        .row(i)
        .iter()
        .zip(coords.row(j).iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

/// Coordinates file: one item per row, whitespace-separated values.
pub fn format_coordinates(coords: &DMatrix<f64>) -> String {
    crate::kernel::format_matrix_block(coords, false)
}

pub fn write_coordinates(path: impl AsRef<Path>, coords: &DMatrix<f64>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_coordinates(coords)).map_err(|e| Error::io(path, e))
}

pub fn read_coordinates(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let row = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<f64>().map_err(|_| Error::parse(path, lineno + 1, format!("bad number {t:?}"))))
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
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
    let d = rows.first().map_or(0, Vec::len);
    Ok(DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]))
}

/// Out-of-sample kernel evaluations: one new item per line, each line its
/// kernel values against the `n` training items. Returned as `n × count`,
/// ready for [`EmbeddingModel::embed_columns`].
pub fn read_kernel_columns(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    Ok(read_coordinates(path)?.transpose())
}

pub fn write_kernel_columns(path: impl AsRef<Path>, cross: &DMatrix<f64>) -> Result<()> {
    write_coordinates(path, &cross.transpose())
}
