//! Projected subgradient solver for partial order embedding.
//!
//! For kernels `K¹..Kᵐ` and comparisons `C`, the solver minimises
//!
//! ```text
//! f(W) = Σ_p tr(Wᵖ Kᵖ) + β/|C| Σ_{(i,j,k,l)∈C} max(0, 1 + d(i,j) − d(k,l))
//! d(i,j) = Σ_p (Kᵖ_i − Kᵖ_j)ᵀ Wᵖ (Kᵖ_i − Kᵖ_j)
//! ```
//!
//! over PSD matrices `Wᵖ` (full mode) or non-negative diagonal `Wᵖ`
//! (diagonal mode). One kernel gives the single-kernel program, `K = I`
//! gives generalized non-metric MDS, and raw features with an identity
//! regulariser give the linear program.
//!
//! Each step moves along `Gᵖ = Rᵖ + β/|C| · Φᵖᵀ S Φᵖ`, where `S` collects
//! `E_ij − E_kl` over the margin-violating comparisons, and then projects
//! back onto the feasible set.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::comparison::{check_range, validate_all, Comparison};
use crate::error::{Error, Result};
use crate::kernel::{common_size, FeatureTable, KernelMatrix};
use crate::linalg::SortedEigen;

/// Window, in iterations, over which the relative objective change is measured.
pub const STOP_WINDOW: usize = 10;
/// Training aborts once the objective exceeds this multiple of its initial value.
pub const DIVERGENCE_FACTOR: f64 = 10.0;

/// Full PSD matrices or non-negative diagonals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Full,
    Diagonal,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Mode::Full),
            "diag" | "diagonal" => Ok(Mode::Diagonal),
            other => Err(Error::InvalidParameter(format!(
                "unknown mode {other:?} (expected full or diag)"
            ))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Full => "full",
            Mode::Diagonal => "diag",
        })
    }
}

/// Training parameters. The margin is fixed at 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparams {
    /// Weight of the hinge loss against the trace regulariser.
    pub beta: f64,
    pub max_iter: usize,
    /// Initial step size; step `t` uses `step0 / (1 + t)`.
    pub step0: f64,
    /// Relative objective change that counts as converged.
    pub tol: f64,
    pub mode: Mode,
    /// Seed for any randomised stage (fold assignment in cross-validation).
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            beta: 1.0,
            max_iter: 2000,
            step0: 1.0,
            tol: 1e-6,
            mode: Mode::Full,
            seed: 0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be > 0, got {}", self.beta)));
        }
        if !(self.step0 > 0.0 && self.step0.is_finite()) {
            return Err(Error::InvalidParameter(format!("step0 must be > 0, got {}", self.step0)));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::InvalidParameter(format!("tol must be >= 0, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be positive".into()));
        }
        Ok(())
    }

    pub fn with_beta(self, beta: f64) -> Self {
        Hyperparams { beta, ..self }
    }

    /// Apply one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::InvalidParameter(format!("{key}: invalid {what} {value:?}"));
        match key {
            "beta" => self.beta = value.parse().map_err(|_| bad("number"))?,
            "max_iter" => self.max_iter = value.parse().map_err(|_| bad("integer"))?,
            "step0" => self.step0 = value.parse().map_err(|_| bad("number"))?,
            "tol" => self.tol = value.parse().map_err(|_| bad("number"))?,
            "mode" => self.mode = value.parse()?,
            "seed" => self.seed = value.parse().map_err(|_| bad("integer"))?,
            _ => return Err(Error::InvalidParameter(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Parse `key=value` lines on top of `self`. Blank and `#` lines are skipped.
    pub fn parse_config(mut self, text: &str, path: &Path) -> Result<Self> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(path, lineno + 1, "expected key=value"))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::parse(path, lineno + 1, e.to_string()))?;
        }
        Ok(self)
    }

    pub fn read_config(self, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.parse_config(&text, path)
    }

    pub fn to_config(&self) -> String {
        format!(
            "beta={}\nmax_iter={}\nstep0={}\ntol={}\nmode={}\nseed={}\n",
            self.beta, self.max_iter, self.step0, self.tol, self.mode, self.seed
        )
    }
}

/// One learned matrix per kernel.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricSet {
    Full(Vec<DMatrix<f64>>),
    Diagonal(Vec<DVector<f64>>),
}

impl MetricSet {
    /// `(1/m)·I` per kernel, or all-`1/m` diagonals.
    pub fn initial(mode: Mode, m: usize, dim: usize) -> Self {
        let scale = 1.0 / m as f64;
        match mode {
            Mode::Full => MetricSet::Full(vec![DMatrix::identity(dim, dim) * scale; m]),
            Mode::Diagonal => MetricSet::Diagonal(vec![DVector::from_element(dim, scale); m]),
        }
    }

    pub fn mode(&self) -> Mode {
        match self {
            MetricSet::Full(_) => Mode::Full,
            MetricSet::Diagonal(_) => Mode::Diagonal,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            MetricSet::Full(ws) => ws.len(),
            MetricSet::Diagonal(ws) => ws.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Side length of each matrix.
    pub fn dim(&self) -> usize {
        match self {
            MetricSet::Full(ws) => ws.first().map_or(0, |w| w.nrows()),
            MetricSet::Diagonal(ws) => ws.first().map_or(0, |w| w.len()),
        }
    }

    /// Matrix `p` as a dense matrix.
    pub fn dense(&self, p: usize) -> DMatrix<f64> {
        match self {
            MetricSet::Full(ws) => ws[p].clone(),
            MetricSet::Diagonal(ws) => DMatrix::from_diagonal(&ws[p]),
        }
    }

    /// Trace of matrix `p` (its total weight).
    pub fn trace(&self, p: usize) -> f64 {
        match self {
            MetricSet::Full(ws) => ws[p].trace(),
            MetricSet::Diagonal(ws) => ws[p].sum(),
        }
    }

    /// Does every matrix satisfy its feasibility constraint?
    pub fn is_feasible(&self) -> bool {
        match self {
            MetricSet::Full(ws) => ws.iter().all(|w| {
                crate::linalg::symmetry_residual(w) <= 1e-10
                    && SortedEigen::new(w).is_some_and(|e| e.min() >= -1e-8 * e.max_abs().max(f64::MIN_POSITIVE))
            }),
            MetricSet::Diagonal(ws) => ws.iter().all(|w| w.iter().all(|&x| x >= 0.0)),
        }
    }

    fn axpy(&mut self, alpha: f64, other: &MetricSet) {
        match (self, other) {
            (MetricSet::Full(a), MetricSet::Full(b)) => {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y * alpha;
                }
            }
            (MetricSet::Diagonal(a), MetricSet::Diagonal(b)) => {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y * alpha;
                }
            }
            _ => unreachable!("metric mode mismatch"),
        }
    }

    pub fn norm(&self) -> f64 {
        match self {
            MetricSet::Full(ws) => crate::linalg::frobenius_norm(ws),
            MetricSet::Diagonal(ws) => ws.iter().map(|w| w.norm_squared()).sum::<f64>().sqrt(),
        }
    }

    fn project(&mut self) -> Result<()> {
        match self {
            MetricSet::Full(ws) => {
                for (p, w) in ws.iter_mut().enumerate() {
                    *w = psd_project(w).map_err(|_| Error::Eigen(p))?;
                }
            }
            MetricSet::Diagonal(ws) => {
                for w in ws.iter_mut() {
                    *w = diag_project(w);
                }
            }
        }
        Ok(())
    }
}

/// Nearest PSD matrix in Frobenius norm: symmetrise, then clamp negative
/// eigenvalues to zero.
pub fn psd_project(w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !w.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "cannot project a {}x{} matrix",
            w.nrows(),
            w.ncols()
        )));
    }
    if w.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("matrix has non-finite entries".into()));
    }
    let eig = SortedEigen::new(w).ok_or(Error::Eigen(0))?;
    if eig.min() >= 0.0 {
        return Ok(crate::linalg::symmetrize(w));
    }
    Ok(eig.reconstruct_with(|lam| lam.max(0.0)))
}

/// Clamp each diagonal weight at zero.
pub fn diag_project(w: &DVector<f64>) -> DVector<f64> {
    w.map(|x| x.max(0.0))
}

/// One iteration's telemetry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub objective: f64,
    /// Comparisons with a positive hinge term.
    pub violations: usize,
    /// Step size applied after this evaluation.
    pub step: f64,
    /// Comparisons scanned to form the subgradient.
    pub scanned: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxIter,
    Converged,
}

/// Optimisation history.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceLog {
    pub entries: Vec<TraceEntry>,
    pub best_iteration: usize,
    pub stop: StopReason,
}

impl TraceLog {
    pub fn initial_objective(&self) -> f64 {
        self.entries.first().map_or(f64::NAN, |e| e.objective)
    }

    pub fn best_objective(&self) -> f64 {
        self.entries[self.best_iteration].objective
    }

    /// Comma-separated `iteration,objective,violations,step`.
    pub fn to_text(&self) -> String {
        let mut s = String::from("iteration,objective,violations,step\n");
        for e in &self.entries {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                e.iteration,
                crate::kernel::fmt_f64(e.objective),
                e.violations,
                crate::kernel::fmt_f64(e.step)
            );
        }
        s
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// One view of the data: row `i` of `phi` is item `i`'s representation,
/// `reg` is the regulariser matrix (the kernel itself, or `I` for raw features).
struct View {
    /// `Φᵀ`, so each item is a contiguous column.
    phi_t: DMatrix<f64>,
    phi: DMatrix<f64>,
    reg: DMatrix<f64>,
}

impl View {
    fn kernel(k: &KernelMatrix) -> Self {
        View {
            phi_t: k.matrix().transpose(),
            phi: k.matrix().clone(),
            reg: k.matrix().clone(),
        }
    }

    fn features(f: &FeatureTable) -> Self {
        let d = f.n_features();
        View {
            phi_t: f.matrix().transpose(),
            phi: f.matrix().clone(),
            reg: DMatrix::identity(d, d),
        }
    }

    fn dim(&self) -> usize {
        self.phi.ncols()
    }
}

/// Objective value, violation count and subgradient at one point.
struct Evaluation {
    objective: f64,
    violations: usize,
    gradient: MetricSet,
}

struct Problem {
    views: Vec<View>,
    constraints: Vec<Comparison>,
    beta: f64,
}

impl Problem {
    fn new(views: Vec<View>, comparisons: &[Comparison], beta: f64) -> Result<Self> {
        if comparisons.is_empty() {
            return Err(Error::EmptyComparisons("training needs at least one comparison"));
        }
        validate_all(comparisons)?;
        let n = views[0].phi.nrows();
        check_range(comparisons, n)?;
        Ok(Problem {
            views,
            constraints: comparisons.to_vec(),
            beta,
        })
    }

    fn check_metric(&self, w: &MetricSet) -> Result<()> {
        if w.len() != self.views.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} metrics for {} kernels",
                w.len(),
                self.views.len()
            )));
        }
        let ok = match w {
            MetricSet::Full(ws) => ws
                .iter()
                .zip(&self.views)
                .all(|(w, v)| w.nrows() == v.dim() && w.ncols() == v.dim()),
            MetricSet::Diagonal(ws) => ws.iter().zip(&self.views).all(|(w, v)| w.len() == v.dim()),
        };
        if !ok {
            return Err(Error::DimensionMismatch("metric size does not match kernel size".into()));
        }
        Ok(())
    }

    fn regularizer(&self, w: &MetricSet) -> f64 {
        match w {
            MetricSet::Full(ws) => ws
                .iter()
                .zip(&self.views)
                .map(|(w, v)| w.component_mul(&v.reg).sum())
                .sum(),
            MetricSet::Diagonal(ws) => ws
                .iter()
                .zip(&self.views)
                .map(|(w, v)| w.dot(&v.reg.diagonal()))
                .sum(),
        }
    }

    /// Per-comparison hinge arguments `1 + d(i,j) − d(k,l)`.
    fn margins(&self, w: &MetricSet) -> Vec<f64> {
        match w {
            MetricSet::Full(ws) => {
                // G = Φ W Φᵀ; d(i,j) = G_ii + G_jj − G_ij − G_ji
                let grams: Vec<DMatrix<f64>> = ws
                    .iter()
                    .zip(&self.views)
                    .map(|(w, v)| &v.phi * w * &v.phi_t)
                    .collect();
                let dist = |a: usize, b: usize| -> f64 {
                    grams
                        .iter()
                        .map(|g| g[(a, a)] + g[(b, b)] - g[(a, b)] - g[(b, a)])
                        .sum()
                };
                self.constraints
                    .iter()
                    .map(|c| 1.0 + dist(c.i, c.j) - dist(c.k, c.l))
                    .collect()
            }
            MetricSet::Diagonal(ws) => {
                let dist = |a: usize, b: usize| -> f64 {
                    ws.iter()
                        .zip(&self.views)
                        .map(|(w, v)| {
                            let (xa, xb) = (v.phi_t.column(a), v.phi_t.column(b));
                            w.iter()
                                .zip(xa.iter().zip(xb.iter()))
                                .map(|(wt, (p, q))| wt * (p - q) * (p - q))
                                .sum::<f64>()
                        })
                        .sum()
                };
                self.constraints
                    .iter()
                    .map(|c| 1.0 + dist(c.i, c.j) - dist(c.k, c.l))
                    .collect()
            }
        }
    }

    fn evaluate(&self, w: &MetricSet, with_gradient: bool) -> Evaluation {
        let margins = self.margins(w);
        let scale = self.beta / self.constraints.len() as f64;
        let loss: f64 = margins.iter().map(|&x| x.max(0.0)).sum();
        let objective = self.regularizer(w) + scale * loss;
        // exact zeros sit on the kink and contribute nothing
        let violated: Vec<&Comparison> = self
            .constraints
            .iter()
            .zip(&margins)
            .filter(|(_, &x)| x > 0.0)
            .map(|(c, _)| c)
            .collect();
        let violations = violated.len();
        if !with_gradient {
            return Evaluation {
                objective,
                violations,
                gradient: MetricSet::Diagonal(Vec::new()),
            };
        }
        let gradient = match w {
            MetricSet::Full(_) => {
                let n = self.views[0].phi.nrows();
                let mut s = DMatrix::<f64>::zeros(n, n);
                for c in &violated {
                    add_e(&mut s, c.i, c.j, 1.0);
                    add_e(&mut s, c.k, c.l, -1.0);
                }
                MetricSet::Full(
                    self.views
                        .iter()
                        .map(|v| {
                            let mut g = &v.phi_t * &s * &v.phi;
                            g *= scale;
                            g += &v.reg;
                            g
                        })
                        .collect(),
                )
            }
            MetricSet::Diagonal(_) => MetricSet::Diagonal(
                self.views
                    .iter()
                    .map(|v| {
                        let d = v.dim();
                        let mut acc = DVector::<f64>::zeros(d);
                        for c in &violated {
                            let (xi, xj) = (v.phi_t.column(c.i), v.phi_t.column(c.j));
                            let (xk, xl) = (v.phi_t.column(c.k), v.phi_t.column(c.l));
                            for t in 0..d {
                                let a = xi[t] - xj[t];
                                let b = xk[t] - xl[t];
                                acc[t] += a * a - b * b;
                            }
                        }
                        acc * scale + v.reg.diagonal()
                    })
                    .collect(),
            ),
        };
        Evaluation {
            objective,
            violations,
            gradient,
        }
    }

    fn solve(&self, hp: &Hyperparams) -> Result<(MetricSet, TraceLog)> {
        hp.validate()?;
        let dim = self.views[0].dim();
        let mut w = MetricSet::initial(hp.mode, self.views.len(), dim);
        let mut entries: Vec<TraceEntry> = Vec::with_capacity(hp.max_iter.min(100_000));
        let mut best = w.clone();
        let mut best_iteration = 0;
        let mut initial = f64::NAN;
        let mut stop = StopReason::MaxIter;

        for t in 0..hp.max_iter {
            let eval = self.evaluate(&w, true);
            let step = hp.step0 / (1.0 + t as f64);
            if t == 0 {
                initial = eval.objective;
            }
            entries.push(TraceEntry {
                iteration: t,
                objective: eval.objective,
                violations: eval.violations,
                step,
                scanned: self.constraints.len(),
            });
            if !eval.objective.is_finite() || eval.objective > DIVERGENCE_FACTOR * initial.abs().max(f64::MIN_POSITIVE) {
                return Err(Error::Diverged {
                    iteration: t,
                    objective: eval.objective,
                    trace: Box::new(TraceLog {
                        entries,
                        best_iteration,
                        stop: StopReason::MaxIter,
                    }),
                });
            }
            if eval.objective < entries[best_iteration].objective {
                best_iteration = t;
                best = w.clone();
            }
            if t >= STOP_WINDOW {
                let past = entries[t - STOP_WINDOW].objective;
                let change = (eval.objective - past).abs();
                if change <= hp.tol * past.abs() {
                    stop = StopReason::Converged;
                    break;
                }
            }
            if t + 1 == hp.max_iter {
                break;
            }
            w.axpy(-step, &eval.gradient);
            w.project()?;
        }
        Ok((
            best,
            TraceLog {
                entries,
                best_iteration,
                stop,
            },
        ))
    }
}

/// `S += sign · E_ab` with `E_ab = (e_a − e_b)(e_a − e_b)ᵀ`.
fn add_e(s: &mut DMatrix<f64>, a: usize, b: usize, sign: f64) {
    s[(a, a)] += sign;
    s[(b, b)] += sign;
    s[(a, b)] -= sign;
    s[(b, a)] -= sign;
}

fn kernel_views(kernels: &[KernelMatrix]) -> Result<Vec<View>> {
    common_size(kernels)?;
    Ok(kernels.iter().map(View::kernel).collect())
}

/// Learned squared distance between items `i` and `j`:
/// `Σ_p (Kᵖ_i − Kᵖ_j)ᵀ Wᵖ (Kᵖ_i − Kᵖ_j)`.
pub fn pair_distance(w: &MetricSet, kernels: &[KernelMatrix], i: usize, j: usize) -> Result<f64> {
    let n = common_size(kernels)?;
    if w.len() != kernels.len() || w.dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} metrics of size {} for {} kernels of size {n}",
            w.len(),
            w.dim(),
            kernels.len()
        )));
    }
    for idx in [i, j] {
        if idx >= n {
            return Err(Error::OutOfRange { index: idx, len: n });
        }
    }
    if i == j {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (p, k) in kernels.iter().enumerate() {
        let diff = k.matrix().column(i) - k.matrix().column(j);
        total += match w {
            MetricSet::Full(ws) => (diff.transpose() * &ws[p] * &diff)[(0, 0)],
            MetricSet::Diagonal(ws) => ws[p].iter().zip(diff.iter()).map(|(a, d)| a * d * d).sum(),
        };
    }
    Ok(total.max(0.0))
}

/// Regularised hinge objective at `w`.
pub fn objective(w: &MetricSet, kernels: &[KernelMatrix], comparisons: &[Comparison], beta: f64) -> Result<f64> {
    let problem = Problem::new(kernel_views(kernels)?, comparisons, beta)?;
    problem.check_metric(w)?;
    Ok(problem.evaluate(w, false).objective)
}

/// Subgradient of the objective, shaped like `w` (diagonal mode returns
/// only the diagonal).
pub fn subgradient(
    w: &MetricSet,
    kernels: &[KernelMatrix],
    comparisons: &[Comparison],
    beta: f64,
) -> Result<MetricSet> {
    let problem = Problem::new(kernel_views(kernels)?, comparisons, beta)?;
    problem.check_metric(w)?;
    Ok(problem.evaluate(w, true).gradient)
}

/// Multiple-kernel training: one metric per kernel.
pub fn train(kernels: &[KernelMatrix], comparisons: &[Comparison], hp: &Hyperparams) -> Result<(MetricSet, TraceLog)> {
    hp.validate()?;
    Problem::new(kernel_views(kernels)?, comparisons, hp.beta)?.solve(hp)
}

/// Single-kernel training.
pub fn train_kpoe(kernel: &KernelMatrix, comparisons: &[Comparison], hp: &Hyperparams) -> Result<(MetricSet, TraceLog)> {
    train(std::slice::from_ref(kernel), comparisons, hp)
}

/// Non-metric MDS: the single-kernel program with `K = I`, so `W` is the
/// Gram matrix of the embedded points.
pub fn train_gnmds(n: usize, comparisons: &[Comparison], hp: &Hyperparams) -> Result<(MetricSet, TraceLog)> {
    train_kpoe(&KernelMatrix::identity(n), comparisons, hp)
}

/// Linear embedding: a `D×D` metric over raw features with trace regulariser.
pub fn train_lpoe(features: &FeatureTable, comparisons: &[Comparison], hp: &Hyperparams) -> Result<(MetricSet, TraceLog)> {
    hp.validate()?;
    Problem::new(vec![View::features(features)], comparisons, hp.beta)?.solve(hp)
}

/// Squared distance `(x_i − x_j)ᵀ W (x_i − x_j)` under a linear metric.
pub fn feature_distance(w: &MetricSet, features: &FeatureTable, i: usize, j: usize) -> f64 {
    let diff = features.row(i) - features.row(j);
    match w {
        MetricSet::Full(ws) => (diff.transpose() * &ws[0] * &diff)[(0, 0)],
        MetricSet::Diagonal(ws) => ws[0].iter().zip(diff.iter()).map(|(a, d)| a * d * d).sum(),
    }
}
