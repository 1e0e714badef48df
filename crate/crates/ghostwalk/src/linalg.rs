//! Exact linear algebra over the rationals: determinants and linear-system
//! solving with inconsistency certificates.

// elimination reads and writes several rows at matching column indices;
// indexed loops are the clear form here
#![allow(clippy::needless_range_loop)]

use crate::error::{Error, Result};
use crate::rat::Rat;

/// Exact determinant by Gaussian elimination with row swaps.
pub fn determinant(matrix: &[Vec<Rat>]) -> Result<Rat> {
    let n = matrix.len();
    for row in matrix {
        if row.len() != n {
            return Err(Error::invalid("determinant of a non-square matrix"));
        }
    }
    if n == 0 {
        return Ok(Rat::one());
    }
    let mut m: Vec<Vec<Rat>> = matrix.to_vec();
    let mut det = Rat::one();
    for col in 0..n {
        let pivot_row = match (col..n).find(|&r| !m[r][col].is_zero()) {
            Some(r) => r,
            None => return Ok(Rat::zero()),
        };
        if pivot_row != col {
            m.swap(pivot_row, col);
            det = -det;
        }
        let pivot = m[col][col].clone();
        det *= &pivot;
        for r in (col + 1)..n {
            if m[r][col].is_zero() {
                continue;
            }
            let factor = &m[r][col] / &pivot;
            for c in col..n {
                let delta = &factor * &m[col][c];
                m[r][c] -= &delta;
            }
        }
    }
    Ok(det)
}

/// Outcome of exact elimination on `A x = b`.
#[derive(Clone, Debug)]
pub enum SolveOutcome {
    /// One particular solution (free variables set to zero) and the
    /// dimension of the solution space.
    Consistent { solution: Vec<Rat>, nullity: usize },
    /// Row multipliers `lambda` with `lambda^T A = 0` and `lambda^T b != 0`.
    Inconsistent { certificate: Vec<Rat> },
}

/// Solves `A x = b` over the rationals by Gauss-Jordan elimination,
/// tracking row operations so that an inconsistent system yields a
/// certificate of inconsistency.
pub fn solve(a: &[Vec<Rat>], b: &[Rat]) -> Result<SolveOutcome> {
    let rows = a.len();
    if b.len() != rows {
        return Err(Error::invalid("right-hand side length mismatch"));
    }
    let cols = if rows == 0 { 0 } else { a[0].len() };
    for row in a {
        if row.len() != cols {
            return Err(Error::invalid("ragged coefficient matrix"));
        }
    }

    let mut m: Vec<Vec<Rat>> = a.to_vec();
    let mut rhs: Vec<Rat> = b.to_vec();
    // transform[r] holds the multipliers expressing current row r as a
    // combination of the original rows
    let mut transform: Vec<Vec<Rat>> = (0..rows)
        .map(|r| {
            (0..rows)
                .map(|c| if c == r { Rat::one() } else { Rat::zero() })
                .collect()
        })
        .collect();

    let mut pivot_cols: Vec<usize> = Vec::new();
    let mut rank = 0usize;
    for col in 0..cols {
        let pivot_row = match (rank..rows).find(|&r| !m[r][col].is_zero()) {
            Some(r) => r,
            None => continue,
        };
        m.swap(pivot_row, rank);
        rhs.swap(pivot_row, rank);
        transform.swap(pivot_row, rank);

        let pivot = m[rank][col].clone();
        for c in 0..cols {
            m[rank][c] = &m[rank][c] / &pivot;
        }
        rhs[rank] = &rhs[rank] / &pivot;
        for c in 0..rows {
            transform[rank][c] = &transform[rank][c] / &pivot;
        }

        for r in 0..rows {
            if r == rank || m[r][col].is_zero() {
                continue;
            }
            let factor = m[r][col].clone();
            for c in 0..cols {
                let delta = &factor * &m[rank][c];
                m[r][c] -= &delta;
            }
            let delta = &factor * &rhs[rank];
            rhs[r] -= &delta;
            for c in 0..rows {
                let delta = &factor * &transform[rank][c];
                transform[r][c] -= &delta;
            }
        }
        pivot_cols.push(col);
        rank += 1;
        if rank == rows {
            break;
        }
    }

    // a zero row with nonzero rhs certifies inconsistency
    for r in rank..rows {
        if !rhs[r].is_zero() {
            return Ok(SolveOutcome::Inconsistent {
                certificate: transform[r].clone(),
            });
        }
    }

    let mut solution = vec![Rat::zero(); cols];
    for (r, &col) in pivot_cols.iter().enumerate() {
        solution[col] = rhs[r].clone();
    }
    Ok(SolveOutcome::Consistent {
        solution,
        nullity: cols - rank,
    })
}

/// Checks `lambda^T A = 0` and `lambda^T b != 0` by direct substitution.
pub fn certificate_is_valid(a: &[Vec<Rat>], b: &[Rat], lambda: &[Rat]) -> bool {
    if lambda.len() != a.len() || b.len() != a.len() {
        return false;
    }
    let cols = a.first().map_or(0, Vec::len);
    for c in 0..cols {
        let dot: Rat = lambda.iter().zip(a).map(|(l, row)| l * &row[c]).sum();
        if !dot.is_zero() {
            return false;
        }
    }
    let dot: Rat = lambda.iter().zip(b).map(|(l, bi)| l * bi).sum();
    !dot.is_zero()
}

/// Checks `A x = b` by direct substitution.
pub fn solution_is_valid(a: &[Vec<Rat>], b: &[Rat], x: &[Rat]) -> bool {
    if b.len() != a.len() {
        return false;
    }
    a.iter().zip(b).all(|(row, bi)| {
        if row.len() != x.len() {
            return false;
        }
        let dot: Rat = row.iter().zip(x).map(|(aij, xj)| aij * xj).sum();
        dot == *bi
    })
}
