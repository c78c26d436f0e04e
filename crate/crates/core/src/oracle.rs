//! Exact embedding of any consistent comparison set.
//!
//! Pairs are assigned integer dissimilarities along a topological order of
//! the pair graph, the dissimilarity matrix is double-centred, and the
//! spectrum is shifted by its minimum eigenvalue. The shift adds the same
//! constant to every squared distance, so every comparison stays satisfied.

use nalgebra::DMatrix;

use crate::comparison::{check_range, Comparison, Pair};
use crate::error::{Error, Result};
use crate::graph::PairGraph;
use crate::linalg::{symmetrize, SortedEigen};

/// Symmetric, non-negative, zero-diagonal dissimilarities.
#[derive(Debug, Clone, PartialEq)]
pub struct DissimilarityMatrix(DMatrix<f64>);

impl DissimilarityMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        if !m.is_square() {
            return Err(Error::DimensionMismatch("dissimilarity matrix must be square".into()));
        }
        for i in 0..n {
            if m[(i, i)] != 0.0 {
                return Err(Error::InvalidParameter(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                if m[(i, j)] != m[(j, i)] || !(m[(i, j)] >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "entry ({i},{j}) breaks symmetry or non-negativity"
                    )));
                }
            }
        }
        Ok(DissimilarityMatrix(m))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }
}

/// Total-order dissimilarities: sources of the pair graph get 1, every other
/// pair gets one more than its largest predecessor. Pairs that no comparison
/// mentions also get 1.
pub fn naive_total_order(comparisons: &[Comparison], n: usize) -> Result<DissimilarityMatrix> {
    check_range(comparisons, n)?;
    let graph = PairGraph::from_comparisons(comparisons)?;
    let order = graph.topological_order()?;
    let mut delta = DMatrix::from_element(n, n, 1.0);
    for i in 0..n {
        delta[(i, i)] = 0.0;
    }
    for pair in order {
        let value = graph
            .predecessors(pair)
            .into_iter()
            .map(|p: Pair| delta[(p.a, p.b)] + 1.0)
            .fold(1.0, f64::max);
        delta[(pair.a, pair.b)] = value;
        delta[(pair.b, pair.a)] = value;
    }
    Ok(DissimilarityMatrix(delta))
}

/// `A = −½ H Δ H` with the centering matrix `H = I − (1/n)𝟙𝟙ᵀ`.
pub fn classical_mds_gram(delta: &DissimilarityMatrix) -> DMatrix<f64> {
    let n = delta.n();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let h = DMatrix::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64);
    symmetrize(&(&h * delta.matrix() * &h * -0.5))
}

/// Points from a constant-shift embedding.
#[derive(Debug, Clone)]
pub struct ShiftEmbedding {
    /// `n × (n−1)` coordinates, one item per row.
    pub coords: DMatrix<f64>,
    /// Smallest eigenvalue of `A`, subtracted from its spectrum.
    pub shift: f64,
}

/// Embed the rows of `Â = A − λ_min(A)·I` as the columns of `Λ̂^{1/2}Vᵀ`.
///
/// The eigendirection of `λ_min` has eigenvalue exactly zero after the shift
/// and is dropped, leaving `n − 1` coordinates.
pub fn constant_shift_embed(a: &DMatrix<f64>) -> Result<ShiftEmbedding> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch("Gram matrix must be square".into()));
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(ShiftEmbedding {
            coords: DMatrix::zeros(0, 0),
            shift: 0.0,
        });
    }
    let eig = SortedEigen::new(a).ok_or(Error::Eigen(0))?;
    let shift = eig.values[n - 1];
    let dims = n - 1;
    let mut coords = DMatrix::zeros(n, dims);
    for d in 0..dims {
        let scale = (eig.values[d] - shift).max(0.0).sqrt();
        for i in 0..n {
            coords[(i, d)] = scale * eig.vectors[(i, d)];
        }
    }
    Ok(ShiftEmbedding { coords, shift })
}

/// Embed `n` items so that every comparison in the acyclic set holds strictly.
pub fn oracle_embed(comparisons: &[Comparison], n: usize) -> Result<DMatrix<f64>> {
    let delta = naive_total_order(comparisons, n)?;
    let a = classical_mds_gram(&delta);
    Ok(constant_shift_embed(&a)?.coords)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::row_distance;

    fn c(i: usize, j: usize, k: usize, l: usize) -> Comparison {
        Comparison::new(i, j, k, l)
    }

    #[test]
    fn single_comparison_order() {
        let d = naive_total_order(&[c(0, 1, 2, 3)], 4).unwrap();
        assert_eq!(d.get(0, 1), 1.0);
        assert_eq!(d.get(2, 3), 2.0);
        assert_eq!(d.get(3, 2), 2.0);
        for (i, j) in [(0, 2), (0, 3), (1, 2), (1, 3)] {
            assert_eq!(d.get(i, j), 1.0);
        }
        assert_eq!(d.get(2, 2), 0.0);
    }

    #[test]
    fn empty_and_chain() {
        let d = naive_total_order(&[], 3).unwrap();
        assert_eq!(d.matrix(), &(DMatrix::from_element(3, 3, 1.0) - DMatrix::identity(3, 3)));
        let d = naive_total_order(&[c(0, 1, 2, 3), c(2, 3, 4, 5)], 6).unwrap();
        assert_eq!((d.get(0, 1), d.get(2, 3), d.get(4, 5)), (1.0, 2.0, 3.0));
    }

    #[test]
    fn longest_predecessor_wins() {
        // (4,5) has predecessors at levels 1 and 2
        let d = naive_total_order(&[c(0, 1, 2, 3), c(2, 3, 4, 5), c(0, 2, 4, 5)], 6).unwrap();
        assert_eq!(d.get(4, 5), 3.0);
    }

    #[test]
    fn cyclic_rejected() {
        let err = naive_total_order(&[c(0, 1, 2, 3), c(2, 3, 0, 1)], 4).unwrap_err();
        assert!(matches!(err, Error::Cyclic(ref w) if w.len() == 2));
        assert!(matches!(naive_total_order(&[c(0, 1, 2, 9)], 4), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn gram_closed_forms() {
        let zero = DissimilarityMatrix::new(DMatrix::zeros(3, 3)).unwrap();
        assert_eq!(classical_mds_gram(&zero), DMatrix::zeros(3, 3));
        let two = DissimilarityMatrix::new(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        let a = classical_mds_gram(&two);
        let expect = DMatrix::from_row_slice(2, 2, &[0.25, -0.25, -0.25, 0.25]);
        assert!((a - expect).norm() < 1e-15);
    }

    #[test]
    fn two_point_shift_embedding() {
        let a = DMatrix::from_row_slice(2, 2, &[0.25, -0.25, -0.25, 0.25]);
        let e = constant_shift_embed(&a).unwrap();
        assert_eq!(e.coords.shape(), (2, 1));
        assert!(e.shift.abs() < 1e-15);
        assert!((row_distance(&e.coords, 0, 1) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_dissimilarities() {
        assert!(DissimilarityMatrix::new(DMatrix::identity(2, 2)).is_err());
        assert!(DissimilarityMatrix::new(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, 0.0])).is_err());
        assert!(DissimilarityMatrix::new(DMatrix::from_row_slice(2, 2, &[0.0, -1.0, -1.0, 0.0])).is_err());
    }

    #[test]
    fn square_fixture_satisfied() {
        // corners 0-1-2-3 in cyclic order; each side shorter than each diagonal
        let sides = [(0, 1), (1, 2), (2, 3), (0, 3)];
        let diags = [(0, 2), (1, 3)];
        let mut comps = Vec::new();
        for &(i, j) in &sides {
            for &(k, l) in &diags {
                comps.push(c(i, j, k, l));
            }
        }
        assert_eq!(comps.len(), 8);
        let x = oracle_embed(&comps, 4).unwrap();
        assert_eq!(x.ncols(), 3);
        for cmp in &comps {
            assert!(row_distance(&x, cmp.i, cmp.j) < row_distance(&x, cmp.k, cmp.l));
        }
    }
}
