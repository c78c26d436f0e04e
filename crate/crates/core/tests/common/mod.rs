//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use mkpoe::comparison::{Comparison, Pair};
use mkpoe::graph::PairGraph;
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// eigenvalues and the matrix whose columns are the eigenvectors.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        if off.sqrt() <= 1e-15 * m.norm().max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| m[(i, i)]).collect(), v)
}

/// Nearest PSD matrix in Frobenius norm: clamp negative eigenvalues.
pub fn nearest_psd(a: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (a + a.transpose()) * 0.5;
    let (vals, vecs) = jacobi_eigen(&sym);
    let n = a.nrows();
    let mut out = DMatrix::zeros(n, n);
    for (k, &l) in vals.iter().enumerate() {
        if l > 0.0 {
            let col = vecs.column(k);
            out += col * col.transpose() * l;
        }
    }
    out
}

pub fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    (&a + a.transpose()) * 0.5
}

pub fn random_psd(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, rank, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose()
}

/// Reachability by Floyd–Warshall; `r[u][v]` iff a path of length ≥ 1 exists.
pub fn reachability(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<bool>> {
    let mut r = vec![vec![false; n]; n];
    for &(u, v) in edges {
        r[u][v] = true;
    }
    for k in 0..n {
        for i in 0..n {
            if r[i][k] {
                for j in 0..n {
                    if r[k][j] {
                        r[i][j] = true;
                    }
                }
            }
        }
    }
    r
}

pub fn brute_acyclic(n: usize, edges: &[(usize, usize)]) -> bool {
    let r = reachability(n, edges);
    (0..n).all(|v| !r[v][v])
}

/// Vertex `v` of an abstract digraph is the pair `(0, v+1)`.
pub fn vertex_pair(v: usize) -> Pair {
    Pair::new(0, v + 1).unwrap()
}

pub fn pair_vertex(p: Pair) -> usize {
    assert_eq!(p.a, 0);
    p.b - 1
}

pub fn edges_to_comparisons(edges: &[(usize, usize)]) -> Vec<Comparison> {
    edges.iter().map(|&(u, v)| Comparison::new(0, u + 1, 0, v + 1)).collect()
}

/// Digraph with every vertex present (isolated vertices get no edges, so
/// only edge endpoints are represented in the pair graph).
pub fn graph_from_edges(edges: &[(usize, usize)]) -> PairGraph {
    PairGraph::from_comparisons(&edges_to_comparisons(edges)).unwrap()
}

pub fn graph_edges(g: &PairGraph) -> Vec<(usize, usize)> {
    let mut e: Vec<(usize, usize)> = g.edges().map(|(a, b)| (pair_vertex(a), pair_vertex(b))).collect();
    e.sort_unstable();
    e
}

/// `count` distinct comparisons over `n` items, all consistent with one
/// random total order of the pairs, hence acyclic.
pub fn random_acyclic_comparisons(rng: &mut ChaCha8Rng, n: usize, count: usize) -> Vec<Comparison> {
    let mut pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| ((a + 1)..n).map(move |b| (a, b))).collect();
    pairs.shuffle(rng);
    let m = pairs.len();
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    while out.len() < count {
        let x = rng.random_range(0..m);
        let y = rng.random_range(0..m);
        if x == y {
            continue;
        }
        let (lo, hi) = (x.min(y), x.max(y));
        if seen.insert((lo, hi)) {
            let (p, q) = (pairs[lo], pairs[hi]);
            // randomise the orientation of each pair
            let (i, j) = if rng.random::<bool>() { p } else { (p.1, p.0) };
            let (k, l) = if rng.random::<bool>() { q } else { (q.1, q.0) };
            out.push(Comparison::new(i, j, k, l));
        }
    }
    out
}

/// All triads `(i, j, i, l)` over points `0..n` on a line with
/// `|i − j| < |i − l|`.
pub fn chain_comparisons(n: usize) -> Vec<Comparison> {
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for l in 0..n {
                if i != j && i != l && i.abs_diff(j) < i.abs_diff(l) {
                    out.push(Comparison::new(i, j, i, l));
                }
            }
        }
    }
    out
}

/// Hinge arguments `1 + d(i,j) − d(k,l)` computed directly from the
/// definition, for kink detection.
pub fn margins(w: &mkpoe::MetricSet, kernels: &[mkpoe::KernelMatrix], comps: &[Comparison]) -> Vec<f64> {
    let d = |a: usize, b: usize| -> f64 {
        let mut total = 0.0;
        for (p, k) in kernels.iter().enumerate() {
            let diff = k.matrix().column(a) - k.matrix().column(b);
            let wp = w.dense(p);
            total += (diff.transpose() * wp * &diff)[(0, 0)];
        }
        total
    };
    comps.iter().map(|c| 1.0 + d(c.i, c.j) - d(c.k, c.l)).collect()
}
