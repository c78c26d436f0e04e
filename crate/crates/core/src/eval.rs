//! Scoring embeddings against comparisons, and the held-out / cross-validated
//! experimental protocol.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::comparison::Comparison;
use crate::embedding::{factorize_default, row_distance, EmbeddingModel};
use crate::error::{Error, Result};
use crate::graph::prune_direct_contradictions;
use crate::kernel::{common_size, fmt_f64, KernelMatrix};
use crate::solver::{train, Hyperparams, MetricSet, TraceLog};

/// Fraction of comparisons with `d(i,j) < d(k,l)` strictly; ties count as
/// failures.
pub fn gauc(dist: impl Fn(usize, usize) -> f64, comparisons: &[Comparison]) -> Result<f64> {
    if comparisons.is_empty() {
        return Err(Error::EmptyComparisons("cannot score an empty comparison set"));
    }
    let satisfied = comparisons
        .iter()
        .filter(|c| dist(c.i, c.j) < dist(c.k, c.l))
        .count();
    Ok(satisfied as f64 / comparisons.len() as f64)
}

/// Mean unit-margin hinge loss `max(0, 1 + d(i,j) − d(k,l))`.
pub fn hinge_loss(dist: impl Fn(usize, usize) -> f64, comparisons: &[Comparison]) -> Result<f64> {
    if comparisons.is_empty() {
        return Err(Error::EmptyComparisons("cannot score an empty comparison set"));
    }
    let total: f64 = comparisons
        .iter()
        .map(|c| (1.0 + dist(c.i, c.j) - dist(c.k, c.l)).max(0.0))
        .sum();
    Ok(total / comparisons.len() as f64)
}

/// Squared distances between rows of a coordinate matrix.
pub fn coordinate_distance(coords: &DMatrix<f64>) -> impl Fn(usize, usize) -> f64 + '_ {
    move |i, j| row_distance(coords, i, j)
}

/// Squared distance in a kernel's own feature space, `K_ii + K_jj − 2K_ij`.
pub fn kernel_distance(k: &KernelMatrix) -> impl Fn(usize, usize) -> f64 + '_ {
    move |i, j| k.get(i, i) + k.get(j, j) - 2.0 * k.get(i, j)
}

/// Keep query-shaped comparisons `(q, a, q, b)` whose shared query `q` is in
/// `test` and whose other two items are in `train`, then drop direct
/// contradictions among the survivors.
pub fn filter_test_comparisons(comparisons: &[Comparison], train: &[usize], test: &[usize]) -> Vec<Comparison> {
    let train: HashSet<usize> = train.iter().copied().collect();
    let test: HashSet<usize> = test.iter().copied().collect();
    let kept: Vec<Comparison> = comparisons
        .iter()
        .filter(|c| {
            let Ok((near, far)) = c.pairs() else {
                return false;
            };
            let Some(q) = near.shared_item(&far) else {
                return false;
            };
            let other = |p: crate::comparison::Pair| if p.a == q { p.b } else { p.a };
            test.contains(&q) && train.contains(&other(near)) && train.contains(&other(far))
        })
        .copied()
        .collect();
    prune_direct_contradictions(&kept)
}

/// Comparisons lying entirely inside `items`, re-indexed to positions in `items`.
pub fn restrict_comparisons(comparisons: &[Comparison], items: &[usize]) -> Vec<Comparison> {
    let max = items.iter().copied().max().map_or(0, |m| m + 1);
    let mut local = vec![usize::MAX; max];
    for (pos, &item) in items.iter().enumerate() {
        local[item] = pos;
    }
    let lookup = |x: usize| local.get(x).copied().filter(|&v| v != usize::MAX);
    comparisons
        .iter()
        .filter(|c| c.indices().iter().all(|&x| lookup(x).is_some()))
        .map(|c| c.map_indices(|x| lookup(x).expect("checked above")))
        .collect()
}

/// A train/test partition of `0..n` plus the cross-validation setup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitSpec {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub folds: usize,
    pub seed: u64,
}

impl SplitSpec {
    /// Random split with `round(test_fraction · n)` test items; both index
    /// lists come back sorted.
    pub fn random(n: usize, test_fraction: f64, folds: usize, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&test_fraction) {
            return Err(Error::InvalidParameter(format!(
                "test fraction must be in [0, 1), got {test_fraction}"
            )));
        }
        let mut items: Vec<usize> = (0..n).collect();
        items.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_test = (test_fraction * n as f64).round() as usize;
        let mut test = items[..n_test].to_vec();
        let mut train = items[n_test..].to_vec();
        test.sort_unstable();
        train.sort_unstable();
        let spec = SplitSpec { train, test, folds, seed };
        spec.validate(n)?;
        Ok(spec)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::InvalidParameter("fold count must be at least 2".into()));
        }
        let mut seen = vec![false; n];
        for &i in self.train.iter().chain(&self.test) {
            if i >= n {
                return Err(Error::OutOfRange { index: i, len: n });
            }
            if seen[i] {
                return Err(Error::InvalidParameter(format!("item {i} appears twice in the split")));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidParameter("split does not cover every item".into()));
        }
        Ok(())
    }
}

/// Outcome of training on one item subset and scoring held-out queries.
#[derive(Debug, Clone)]
pub struct HoldoutResult {
    /// GAUC on the filtered held-out comparisons.
    pub accuracy: f64,
    pub hinge: f64,
    pub train_comparisons: usize,
    pub test_comparisons: usize,
    pub metrics: MetricSet,
    pub trace: TraceLog,
    pub model: EmbeddingModel,
    /// Coordinates of every item (row = global index).
    pub coords: DMatrix<f64>,
}

/// Train on the comparisons inside `train_items`, embed all items through
/// the learned projections, and score comparisons whose query is in
/// `test_items` and whose references are in `train_items`.
pub fn fit_and_score(
    kernels: &[KernelMatrix],
    comparisons: &[Comparison],
    train_items: &[usize],
    test_items: &[usize],
    hp: &Hyperparams,
) -> Result<HoldoutResult> {
    let n = common_size(kernels)?;
    let train_c = restrict_comparisons(comparisons, train_items);
    let test_c = filter_test_comparisons(comparisons, train_items, test_items);
    if test_c.is_empty() {
        return Err(Error::EmptyComparisons("no held-out comparisons after filtering"));
    }
    let sub: Vec<KernelMatrix> = kernels
        .iter()
        .map(|k| k.submatrix(train_items))
        .collect::<Result<_>>()?;
    let (metrics, trace) = train(&sub, &train_c, hp)?;
    let mut model = factorize_default(&metrics)?;
    model.provenance.hyperparams = Some(*hp);
    model.provenance.items = Some(train_items.to_vec());
    let all: Vec<usize> = (0..n).collect();
    let cross: Vec<DMatrix<f64>> = kernels
        .iter()
        .map(|k| k.cross(train_items, &all))
        .collect::<Result<_>>()?;
    let coords = model.embed_columns(&cross)?;
    let (accuracy, hinge) = {
        let dist = coordinate_distance(&coords);
        (gauc(&dist, &test_c)?, hinge_loss(&dist, &test_c)?)
    };
    Ok(HoldoutResult {
        accuracy,
        hinge,
        train_comparisons: train_c.len(),
        test_comparisons: test_c.len(),
        metrics,
        trace,
        model,
        coords,
    })
}

/// Validation scores for one grid value.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaScore {
    pub beta: f64,
    /// Per-fold validation GAUC; `None` where the fold was skipped or training failed.
    pub folds: Vec<Option<f64>>,
    pub mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub best_beta: f64,
    pub scores: Vec<BetaScore>,
    /// Folds with an empty validation or training set.
    pub skipped_folds: Vec<usize>,
}

impl CvReport {
    /// `key=value` summary followed by a `beta,mean_gauc` table.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "best_beta={}", self.best_beta);
        let _ = writeln!(s, "grid_size={}", self.scores.len());
        let _ = writeln!(s, "skipped_folds={}", self.skipped_folds.len());
        s.push_str("beta,mean_gauc\n");
        for b in &self.scores {
            let mean = b.mean.map_or_else(|| "nan".to_string(), fmt_f64);
            let _ = writeln!(s, "{},{}", b.beta, mean);
        }
        s
    }
}

/// Assign items `0..n` to `folds` groups after a seeded shuffle.
pub fn item_folds(n: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut items: Vec<usize> = (0..n).collect();
    items.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = vec![Vec::new(); folds];
    for (pos, item) in items.into_iter().enumerate() {
        out[pos % folds].push(item);
    }
    for f in &mut out {
        f.sort_unstable();
    }
    out
}

/// Pick `beta` from `grid` by item-level k-fold cross-validation.
///
/// For each fold, train on comparisons among the remaining items and score
/// the fold's query comparisons. The grid value with the highest mean
/// validation GAUC wins; ties go to the smaller value. Fold assignment is
/// seeded by `hp.seed`.
pub fn cross_validate_beta(
    kernels: &[KernelMatrix],
    comparisons: &[Comparison],
    grid: &[f64],
    folds: usize,
    hp: &Hyperparams,
) -> Result<CvReport> {
    let n = common_size(kernels)?;
    if folds < 2 {
        return Err(Error::InvalidParameter("cross-validation needs at least 2 folds".into()));
    }
    let mut grid: Vec<f64> = grid.to_vec();
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty beta grid".into()));
    }
    if let Some(b) = grid.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
        return Err(Error::InvalidParameter(format!("grid value {b} is not positive")));
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let groups = item_folds(n, folds, hp.seed);
    let mut skipped = Vec::new();
    let mut prepared = Vec::new();
    for (f, val) in groups.iter().enumerate() {
        let val_set: HashSet<usize> = val.iter().copied().collect();
        let tr: Vec<usize> = (0..n).filter(|i| !val_set.contains(i)).collect();
        let val_c = filter_test_comparisons(comparisons, &tr, val);
        let train_c = restrict_comparisons(comparisons, &tr);
        if val_c.is_empty() || train_c.is_empty() {
            log::warn!("fold {f}: no usable comparisons, skipped");
            skipped.push(f);
            continue;
        }
        prepared.push((f, tr, val.clone()));
    }
    if prepared.is_empty() {
        return Err(Error::EmptyComparisons("every cross-validation fold is empty"));
    }

    let mut scores = Vec::with_capacity(grid.len());
    for &beta in &grid {
        let hp_b = hp.with_beta(beta);
        let mut fold_scores = vec![None; folds];
        for (f, tr, val) in &prepared {
            match fit_and_score(kernels, comparisons, tr, val, &hp_b) {
                Ok(res) => fold_scores[*f] = Some(res.accuracy),
                Err(e @ Error::Diverged { .. }) => log::warn!("beta {beta}, fold {f}: {e}"),
                Err(e) => return Err(e),
            }
        }
        let got: Vec<f64> = fold_scores.iter().flatten().copied().collect();
        let mean = (got.len() == prepared.len()).then(|| got.iter().sum::<f64>() / got.len() as f64);
        scores.push(BetaScore {
            beta,
            folds: fold_scores,
            mean,
        });
    }

    let mut best: Option<(f64, f64)> = None;
    for s in &scores {
        if let Some(m) = s.mean {
            if best.is_none_or(|(_, bm)| m > bm) {
                best = Some((s.beta, m));
            }
        }
    }
    let (best_beta, _) = best.ok_or_else(|| Error::InvalidParameter("training failed for every beta in the grid".into()))?;
    Ok(CvReport {
        best_beta,
        scores,
        skipped_folds: skipped,
    })
}

/// Item index list: whitespace-separated non-negative integers.
pub fn parse_items(text: &str, path: &Path) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        for tok in line.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
            out.push(
                tok.parse()
                    .map_err(|_| Error::parse(path, lineno + 1, format!("bad item index {tok:?}")))?,
            );
        }
    }
    Ok(out)
}

pub fn read_items(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_items(&text, path)
}

/// One index per line.
pub fn write_items(path: impl AsRef<Path>, items: &[usize]) -> Result<()> {
    let path = path.as_ref();
    let text: String = items.iter().map(|i| format!("{i}\n")).collect();
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// `key=value` evaluation report.
pub fn format_report(comparisons: usize, gauc: f64, hinge: f64) -> String {
    format!("comparisons={comparisons}\ngauc={}\nhinge={}\n", fmt_f64(gauc), fmt_f64(hinge))
}
