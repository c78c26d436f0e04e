//! Synthetic taxonomy datasets.
//!
//! Items carry leaf labels of a class tree. Comparisons `(a, b, a, c)` say
//! that `a` is closer to `b` than to `c` whenever the lowest common ancestor
//! of `a` and `b` lies strictly below that of `a` and `c`. Informative
//! kernels plant the same tree in feature space; noise kernels are random
//! rank-3 kernels.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::comparison::Comparison;
use crate::error::{Error, Result};
use crate::graph::PairGraph;
use crate::kernel::{linear_kernel, rbf_kernel, FeatureTable, KernelMatrix};

/// Dimension of the planted feature space.
pub const FEATURE_DIM: usize = 16;

/// Rooted class tree; items are labelled with leaves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    names: Vec<String>,
    parent: Vec<Option<usize>>,
    depth: Vec<usize>,
    /// Node ids of the leaves, in file order. A class label indexes this list.
    leaves: Vec<usize>,
}

const DEFAULT_TAXONOMY: &str = "\
object
  food
    fruit
      lemon
      pear
      orange
    vegetable
      pepper
      tomato
  manufactured
    clothing
      sneaker
      hat
    toy
      rubber-duck
      teddy-bear
      toy-car
";

impl Taxonomy {
    /// Ten classes under a three-level hierarchy.
    pub fn default_tree() -> Self {
        Self::parse(DEFAULT_TAXONOMY, Path::new("<builtin>")).expect("builtin taxonomy parses")
    }

    /// Indented plain-text tree: one node per line, children indented deeper
    /// than their parent. Exactly one root.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut names = Vec::new();
        let mut parent = Vec::new();
        let mut depth = Vec::new();
        let mut stack: Vec<(usize, usize)> = Vec::new(); // (indent, node)
        for (lineno, raw) in text.lines().enumerate() {
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let indent = raw.len() - raw.trim_start().len();
            while stack.last().is_some_and(|&(ind, _)| ind >= indent) {
                stack.pop();
            }
            let id = names.len();
            let par = stack.last().map(|&(_, node)| node);
            if par.is_none() && id > 0 {
                return Err(Error::parse(path, lineno + 1, "taxonomy has more than one root"));
            }
            names.push(trimmed.to_string());
            parent.push(par);
            depth.push(par.map_or(0, |p| depth[p] + 1));
            stack.push((indent, id));
        }
        if names.is_empty() {
            return Err(Error::parse(path, 1, "empty taxonomy"));
        }
        let has_child: HashSet<usize> = parent.iter().flatten().copied().collect();
        let leaves = (0..names.len()).filter(|i| !has_child.contains(i)).collect();
        Ok(Taxonomy {
            names,
            parent,
            depth,
            leaves,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn n_classes(&self) -> usize {
        self.leaves.len()
    }

    pub fn class_name(&self, class: usize) -> &str {
        &self.names[self.leaves[class]]
    }

    fn path_to_root(&self, mut node: usize) -> Vec<usize> {
        let mut out = vec![node];
        while let Some(p) = self.parent[node] {
            out.push(p);
            node = p;
        }
        out
    }

    fn lca_node(&self, a: usize, b: usize) -> usize {
        let ancestors: HashSet<usize> = self.path_to_root(a).into_iter().collect();
        self.path_to_root(b)
            .into_iter()
            .find(|n| ancestors.contains(n))
            .expect("single-rooted tree")
    }

    /// Depth of the lowest common ancestor of two classes (root = 0).
    pub fn lca_depth(&self, class_a: usize, class_b: usize) -> usize {
        self.depth[self.lca_node(self.leaves[class_a], self.leaves[class_b])]
    }

    /// Labels for `per_class` items of every class, grouped by class.
    pub fn items(&self, per_class: usize) -> Vec<usize> {
        (0..self.n_classes())
            .flat_map(|c| std::iter::repeat_n(c, per_class))
            .collect()
    }

    fn lca_table(&self) -> Vec<Vec<usize>> {
        let k = self.n_classes();
        (0..k)
            .map(|a| (0..k).map(|b| self.lca_depth(a, b)).collect())
            .collect()
    }
}

/// Does item `a` sit strictly closer (in the tree) to `b` than to `c`?
fn valid_triple(table: &[Vec<usize>], labels: &[usize], a: usize, b: usize, c: usize) -> bool {
    // both lcas lie on a's root path, so "strict descendant" is "strictly deeper"
    table[labels[a]][labels[b]] > table[labels[a]][labels[c]]
}

fn any_valid_triple(table: &[Vec<usize>], labels: &[usize]) -> bool {
    let k = table.len();
    let mut count = vec![0usize; k];
    for &l in labels {
        count[l] += 1;
    }
    (0..k).any(|ca| {
        (0..k).any(|cb| {
            let need_a = if cb == ca { 2 } else { 1 };
            count[ca] >= need_a
                && count[cb] > 0
                && (0..k).any(|cc| count[cc] > 0 && cc != ca && table[ca][cb] > table[ca][cc])
        })
    })
}

/// Draw `budget` valid triples uniformly (with replacement) and return the
/// deduplicated comparisons, without redundancy removal. The set is acyclic.
pub fn generate_raw_comparisons(
    taxonomy: &Taxonomy,
    labels: &[usize],
    seed: u64,
    budget: usize,
) -> Vec<Comparison> {
    let n = labels.len();
    let table = taxonomy.lca_table();
    if budget == 0 {
        return Vec::new();
    }
    if n < 3 || !any_valid_triple(&table, labels) {
        log::warn!("taxonomy admits no comparisons for these items");
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut accepted = 0;
    let max_attempts = budget.saturating_mul(10_000).max(1_000_000);
    let mut attempts = 0;
    while accepted < budget && attempts < max_attempts {
        attempts += 1;
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        let c = rng.random_range(0..n);
        if a == b || a == c || b == c || !valid_triple(&table, labels, a, b, c) {
            continue;
        }
        accepted += 1;
        let cmp = Comparison::new(a, b, a, c);
        if seen.insert(cmp.canonical()) {
            out.push(cmp);
        }
    }
    out
}

/// Taxonomy comparisons with redundant (transitively implied) edges removed.
pub fn generate_comparisons(
    taxonomy: &Taxonomy,
    labels: &[usize],
    seed: u64,
    budget: usize,
) -> Vec<Comparison> {
    let raw = generate_raw_comparisons(taxonomy, labels, seed, budget);
    PairGraph::from_comparisons(&raw)
        .and_then(|g| g.transitive_reduction())
        .expect("taxonomy comparisons are valid and acyclic")
        .comparisons()
}

fn gaussian_vector(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

/// Features with the tree planted: every non-root node draws a Gaussian
/// offset whose scale halves per level, a class centroid sums the offsets
/// on its root path, and items add isotropic jitter with standard deviation
/// `noise_level`.
pub fn generate_features(taxonomy: &Taxonomy, labels: &[usize], noise_level: f64, seed: u64) -> Result<FeatureTable> {
    if !(noise_level >= 0.0 && noise_level.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise level must be >= 0, got {noise_level}")));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= taxonomy.n_classes()) {
        return Err(Error::OutOfRange {
            index: bad,
            len: taxonomy.n_classes(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offsets: Vec<DVector<f64>> = (0..taxonomy.names.len())
        .map(|node| {
            let depth = taxonomy.depth[node];
            if depth == 0 {
                DVector::zeros(FEATURE_DIM)
            } else {
                gaussian_vector(&mut rng, FEATURE_DIM, 0.5f64.powi(depth as i32 - 1))
            }
        })
        .collect();
    let centroids: Vec<DVector<f64>> = taxonomy
        .leaves
        .iter()
        .map(|&leaf| {
            taxonomy
                .path_to_root(leaf)
                .iter()
                .fold(DVector::zeros(FEATURE_DIM), |acc, &node| acc + &offsets[node])
        })
        .collect();
    let rows: Vec<Vec<f64>> = labels
        .iter()
        .map(|&l| {
            let x = &centroids[l] + gaussian_vector(&mut rng, FEATURE_DIM, noise_level);
            x.iter().copied().collect()
        })
        .collect();
    FeatureTable::from_rows(&rows)
}

/// RBF kernel over [`generate_features`], with bandwidth set to the inverse
/// mean squared distance between items.
pub fn generate_informative_kernel(
    taxonomy: &Taxonomy,
    labels: &[usize],
    noise_level: f64,
    seed: u64,
) -> Result<KernelMatrix> {
    let f = generate_features(taxonomy, labels, noise_level, seed)?;
    let x = f.matrix();
    let n = f.n_items();
    let mut total = 0.0;
    let mut count = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            total += (x.row(i) - x.row(j)).norm_squared();
            count += 1;
        }
    }
    let mean = if count > 0 { total / count as f64 } else { 0.0 };
    let gamma = if mean > 0.0 { 1.0 / mean } else { 1.0 };
    rbf_kernel(&f, gamma)
}

/// Linear kernel over `n` points drawn uniformly from the unit sphere in ℝ³.
pub fn generate_noise_kernel(n: usize, seed: u64) -> KernelMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DMatrix::zeros(n, 3);
    for i in 0..n {
        let v = loop {
            let v = gaussian_vector(&mut rng, 3, 1.0);
            let norm = v.norm();
            if norm > 1e-12 {
                break v / norm;
            }
        };
        x.row_mut(i).copy_from(&v.transpose());
    }
    linear_kernel(&FeatureTable::new(x).expect("unit vectors are finite"))
}

/// Replace a seeded `fraction` of the comparisons by their reversals.
/// Returns the noisy set and the positions that were flipped.
pub fn reverse_fraction(comparisons: &[Comparison], fraction: f64, seed: u64) -> (Vec<Comparison>, Vec<usize>) {
    let count = ((fraction.clamp(0.0, 1.0)) * comparisons.len() as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut flipped = index::sample(&mut rng, comparisons.len(), count).into_vec();
    flipped.sort_unstable();
    let mut out = comparisons.to_vec();
    for &i in &flipped {
        out[i] = out[i].reversed();
    }
    (out, flipped)
}

/// Append reversed copies of `count` distinct comparisons, creating that
/// many direct contradictions. The combined list is shuffled.
pub fn plant_contradictions(comparisons: &[Comparison], count: usize, seed: u64) -> Vec<Comparison> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = count.min(comparisons.len());
    let picks = index::sample(&mut rng, comparisons.len(), count);
    let mut out = comparisons.to_vec();
    out.extend(picks.iter().map(|i| comparisons[i].reversed()));
    out.shuffle(&mut rng);
    out
}
