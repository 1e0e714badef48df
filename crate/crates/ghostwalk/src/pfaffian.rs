//! Pairwise annihilation weights, antisymmetric matrices, and Pfaffians.
//!
//! For sources `x_I ≺ x_J` the pairwise annihilation weight over a target
//! set is
//!
//! ```text
//! A_IJ = 2 * sum over a ≺ b of W(x_I -> b) W(x_J -> a)
//!          + sum over c      of W(x_I -> c) W(x_J -> c)
//! ```
//!
//! twice the weight of strictly crossing endpoint pairs plus a diagonal
//! correction for ghosts finishing at the same vertex. The Pfaffian of the
//! antisymmetric matrix `A` is the total weight of the pairwise-coalescence
//! event (every consecutive source pair merged), which equals complete
//! annihilation after parity reclassification.

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::rat::Rat;
use crate::spacetime::{SpacetimeGraph, TargetOrder, VertexId};

/// An exact antisymmetric matrix: `A[i][j] = -A[j][i]`, zero diagonal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AntisymmetricMatrix {
    entries: Vec<Vec<Rat>>,
}

// mirrored (i, j)/(j, i) accesses read clearest with indices
#[allow(clippy::needless_range_loop)]
impl AntisymmetricMatrix {
    /// Validates antisymmetry and the zero diagonal.
    pub fn new(entries: Vec<Vec<Rat>>) -> Result<Self> {
        let n = entries.len();
        for row in &entries {
            if row.len() != n {
                return Err(Error::invalid("antisymmetric matrix must be square"));
            }
        }
        for i in 0..n {
            if !entries[i][i].is_zero() {
                return Err(Error::invalid("antisymmetric matrix needs a zero diagonal"));
            }
            for j in (i + 1)..n {
                if entries[i][j] != -&entries[j][i] {
                    return Err(Error::invalid(format!(
                        "antisymmetry violated at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(AntisymmetricMatrix { entries })
    }

    /// Builds from the strict upper triangle, antisymmetrizing.
    pub fn from_upper(n: usize, mut upper: impl FnMut(usize, usize) -> Rat) -> Self {
        let mut entries = vec![vec![Rat::zero(); n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let w = upper(i, j);
                entries[j][i] = -&w;
                entries[i][j] = w;
            }
        }
        AntisymmetricMatrix { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, i: usize, j: usize) -> &Rat {
        &self.entries[i][j]
    }

    pub fn rows(&self) -> &[Vec<Rat>] {
        &self.entries
    }

    /// Row-major dump with a dimension header, entries as `"p/q"`.
    pub fn to_json(&self) -> Value {
        json!({
            "rows": self.dim(),
            "cols": self.dim(),
            "entries": self.entries.iter().flatten().map(Rat::to_string).collect::<Vec<_>>(),
        })
    }
}

/// Pfaffian by recursive expansion along the first row: the signed sum
/// over perfect matchings of the entry products.
pub fn pfaffian(matrix: &AntisymmetricMatrix) -> Result<Rat> {
    let n = matrix.dim();
    if !n.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "Pfaffian needs an even dimension, got {n}"
        )));
    }
    let active: Vec<usize> = (0..n).collect();
    Ok(pf_rec(matrix, &active))
}

fn pf_rec(matrix: &AntisymmetricMatrix, active: &[usize]) -> Rat {
    if active.is_empty() {
        return Rat::one();
    }
    let first = active[0];
    let mut total = Rat::zero();
    for (r, &partner) in active.iter().enumerate().skip(1) {
        let entry = matrix.get(first, partner);
        if entry.is_zero() {
            continue;
        }
        let rest: Vec<usize> = active[1..]
            .iter()
            .copied()
            .filter(|&i| i != partner)
            .collect();
        let term = entry * pf_rec(matrix, &rest);
        if r % 2 == 1 {
            total += &term;
        } else {
            total -= &term;
        }
    }
    total
}

/// The pairwise annihilation weight `A_IJ` of two sources over the given
/// target set.
pub fn pairwise_weight(
    graph: &SpacetimeGraph,
    x_i: VertexId,
    x_j: VertexId,
    targets: &TargetOrder,
) -> Result<Rat> {
    let from_i = graph.weights_from(x_i)?;
    let from_j = graph.weights_from(x_j)?;
    let tv = targets.vertices();

    let mut crossing = Rat::zero();
    for (ra, &a) in tv.iter().enumerate() {
        if from_j[a.index()].is_zero() {
            continue;
        }
        for &b in &tv[ra + 1..] {
            crossing += &(&from_i[b.index()] * &from_j[a.index()]);
        }
    }
    let mut diagonal = Rat::zero();
    for &c in tv {
        diagonal += &(&from_i[c.index()] * &from_j[c.index()]);
    }
    Ok(Rat::from_int(2) * crossing + diagonal)
}

/// The antisymmetric matrix of pairwise weights for sources in increasing
/// order.
pub fn build_antisymmetric(
    graph: &SpacetimeGraph,
    sources: &[VertexId],
    targets: &TargetOrder,
) -> Result<AntisymmetricMatrix> {
    let n = sources.len();
    let mut upper = vec![vec![Rat::zero(); n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            upper[i][j] = pairwise_weight(graph, sources[i], sources[j], targets)?;
        }
    }
    Ok(AntisymmetricMatrix::from_upper(n, |i, j| {
        upper[i][j].clone()
    }))
}

/// Total weight of the pairwise-coalescence event: `Pf(A)` for the
/// antisymmetric matrix of pairwise weights. Requires an even source
/// count.
pub fn pairwise_coalescence_weight(
    graph: &SpacetimeGraph,
    sources: &[VertexId],
    targets: &TargetOrder,
) -> Result<Rat> {
    if !sources.len().is_multiple_of(2) {
        return Err(Error::invalid(
            "pairwise coalescence needs an even source count",
        ));
    }
    pfaffian(&build_antisymmetric(graph, sources, targets)?)
}
