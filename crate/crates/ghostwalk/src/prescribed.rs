//! Can prescribed annihilation be written as a rational combination of
//! non-colliding transition products?
//!
//! For `n` walkers, fix the adjacent pair that must annihilate and a list
//! of final-position tuples `(a, y_1, ..., y_(n-2), b)`. Each tuple yields
//! one linear equation over the `n!` unknown coefficients `c_pi`: the
//! products `prod_i W(x_i -> z_pi(i))` on the left, the exact prescribed
//! annihilation weight from the brute-force oracle on the right. Solving
//! over the rationals decides the question for all candidate coefficient
//! vectors at once; [`three_walker_experiment`] runs the three-walker instance
//! whose four tuples make the system provably inconsistent while every
//! three of them stay consistent.

use itertools::Itertools;
use serde_json::{json, Value};

use crate::dynamics::{self, run_annihilation, Evolution};
use crate::error::{Error, Result};
use crate::instance::LatticeInstance;
use crate::linalg;
use crate::rat::Rat;

/// Outcome of exact elimination: a particular solution with the nullspace
/// dimension, or multipliers proving `0 = nonzero`.
pub type SolveResult = linalg::SolveOutcome;

/// The exact linear system of one prescribed-annihilation experiment.
pub struct LinearSystem {
    pub starts: Vec<i64>,
    /// 1-based index of the annihilating pair (walkers `pair`, `pair+1`).
    pub pair: usize,
    pub horizon: u32,
    /// One final-position tuple `(a, y_1, ..., y_(n-2), b)` per row.
    pub tuples: Vec<Vec<i64>>,
    /// Column order: permutations of `0..n` in lexicographic order.
    pub permutations: Vec<Vec<usize>>,
    pub matrix: Vec<Vec<Rat>>,
    pub rhs: Vec<Rat>,
}

impl LinearSystem {
    pub fn rows(&self) -> usize {
        self.tuples.len()
    }

    pub fn cols(&self) -> usize {
        self.permutations.len()
    }

    /// The subsystem with row `drop` removed.
    pub fn without_row(&self, drop: usize) -> LinearSystem {
        let keep_rows = |rows: &[Vec<Rat>]| {
            rows.iter()
                .enumerate()
                .filter(|&(r, _)| r != drop)
                .map(|(_, row)| row.clone())
                .collect()
        };
        LinearSystem {
            starts: self.starts.clone(),
            pair: self.pair,
            horizon: self.horizon,
            tuples: self
                .tuples
                .iter()
                .enumerate()
                .filter(|&(r, _)| r != drop)
                .map(|(_, t)| t.clone())
                .collect(),
            permutations: self.permutations.clone(),
            matrix: keep_rows(&self.matrix),
            rhs: self
                .rhs
                .iter()
                .enumerate()
                .filter(|&(r, _)| r != drop)
                .map(|(_, w)| w.clone())
                .collect(),
        }
    }
}

/// One row of transition products: `prod_i W(x_i -> z_perm(i))` for every
/// permutation, with positions outside the padded interval unreachable.
fn product_row(instance: &LatticeInstance, permutations: &[Vec<usize>], tuple: &[i64]) -> Vec<Rat> {
    let weight = |actor: usize, z: i64| -> Rat {
        match instance.final_vertex(z) {
            Ok(v) => instance.transition_weight(actor, v).clone(),
            Err(_) => Rat::zero(),
        }
    };
    permutations
        .iter()
        .map(|perm| {
            let mut product = Rat::one();
            for (i, &slot) in perm.iter().enumerate() {
                product *= &weight(i, tuple[slot]);
            }
            product
        })
        .collect()
}

/// Builds the system: matrix entries from the path generating function of
/// the padded lattice, right-hand sides from the enumeration oracle.
/// Tuples must satisfy `a < y_1 < ... < b`.
pub fn build_system(
    starts: &[i64],
    pair: usize,
    horizon: u32,
    tuples: &[Vec<i64>],
    cap_bits: u32,
) -> Result<LinearSystem> {
    let n = starts.len();
    for tuple in tuples {
        if tuple.len() != n {
            return Err(Error::invalid(format!(
                "tuples must list {n} final positions"
            )));
        }
        for w in tuple.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::invalid(
                    "tuple positions must satisfy a < y_1 < ... < b",
                ));
            }
        }
    }
    let instance = LatticeInstance::new(starts, horizon)?;
    let permutations: Vec<Vec<usize>> = (0..n).permutations(n).collect();

    let mut matrix = Vec::with_capacity(tuples.len());
    let mut rhs = Vec::with_capacity(tuples.len());
    for tuple in tuples {
        matrix.push(product_row(&instance, &permutations, tuple));
        let (a, b) = (tuple[0], tuple[n - 1]);
        rhs.push(dynamics::prescribed_annihilation_weight(
            starts,
            pair,
            a,
            &tuple[1..n - 1],
            b,
            horizon,
            cap_bits,
        )?);
    }
    Ok(LinearSystem {
        starts: starts.to_vec(),
        pair,
        horizon,
        tuples: tuples.to_vec(),
        permutations,
        matrix,
        rhs,
    })
}

/// The system over *all* outcomes in which the named pair's annihilation
/// is the only collision, with no ordering constraint on the final
/// positions. Rows are keyed by `(a, y_1, ..., y_(n-2), b)` with `a <= b`
/// the sorted ghost endpoints and the survivor positions sorted among
/// themselves.
pub fn sole_pair_system(
    starts: &[i64],
    pair: usize,
    horizon: u32,
    cap_bits: u32,
) -> Result<LinearSystem> {
    let n = starts.len();
    if pair == 0 || pair >= n {
        return Err(Error::invalid("pair index names adjacent walkers 1..n-1"));
    }
    let bits = n as u32 * horizon;
    if bits > cap_bits || bits >= 63 {
        return Err(Error::CapExceeded {
            what: "evolution enumeration",
            cap: cap_bits as u64,
        });
    }
    let actors = (pair - 1, pair);
    let mut counts: std::collections::BTreeMap<Vec<i64>, u64> = Default::default();
    for index in 0..(1u64 << bits) {
        let evolution = Evolution::from_index(n, horizon, index);
        let outcome = run_annihilation(starts, &evolution)?;
        if outcome.k() != 1 || outcome.collisions[0].actors != actors {
            continue;
        }
        let (f1, f2) = outcome.ghost_pairs[0];
        let mut tuple = Vec::with_capacity(n);
        tuple.push(f1.min(f2));
        let mut survivors: Vec<i64> = outcome.survivors.iter().map(|&(_, p)| p).collect();
        survivors.sort_unstable();
        tuple.extend(survivors);
        tuple.push(f1.max(f2));
        *counts.entry(tuple).or_insert(0) += 1;
    }

    let instance = LatticeInstance::new(starts, horizon)?;
    let permutations: Vec<Vec<usize>> = (0..n).permutations(n).collect();
    let step_mass = Rat::new(1, 2).pow(bits as i32);
    let mut tuples = Vec::with_capacity(counts.len());
    let mut matrix = Vec::with_capacity(counts.len());
    let mut rhs = Vec::with_capacity(counts.len());
    for (tuple, count) in counts {
        matrix.push(product_row(&instance, &permutations, &tuple));
        rhs.push(Rat::from_int(count as i64) * &step_mass);
        tuples.push(tuple);
    }
    Ok(LinearSystem {
        starts: starts.to_vec(),
        pair,
        horizon,
        tuples,
        permutations,
        matrix,
        rhs,
    })
}

/// Exact elimination over the rationals.
pub fn solve_exact(system: &LinearSystem) -> Result<SolveResult> {
    if system.rows() == 0 {
        // no constraints: the whole coefficient space solves the system
        return Ok(SolveResult::Consistent {
            solution: vec![Rat::zero(); system.cols()],
            nullity: system.cols(),
        });
    }
    linalg::solve(&system.matrix, &system.rhs)
}

/// Checks a solve result by direct substitution.
pub fn verify(system: &LinearSystem, result: &SolveResult) -> bool {
    match result {
        SolveResult::Consistent { solution, .. } => {
            linalg::solution_is_valid(&system.matrix, &system.rhs, solution)
        }
        SolveResult::Inconsistent { certificate } => {
            linalg::certificate_is_valid(&system.matrix, &system.rhs, certificate)
        }
    }
}

/// All distinct tuples `(a, y_1, ..., b)` with `a < y_1 < ... < b` that
/// carry nonzero prescribed-annihilation weight, by exhaustive
/// enumeration.
pub fn enumerate_prescribed_tuples(
    starts: &[i64],
    pair: usize,
    horizon: u32,
    cap_bits: u32,
) -> Result<Vec<Vec<i64>>> {
    let n = starts.len();
    if pair == 0 || pair >= n {
        return Err(Error::invalid("pair index names adjacent walkers 1..n-1"));
    }
    let bits = n as u32 * horizon;
    if bits > cap_bits || bits >= 63 {
        return Err(Error::CapExceeded {
            what: "evolution enumeration",
            cap: cap_bits as u64,
        });
    }
    let actors = (pair - 1, pair);
    let mut tuples = Vec::new();
    for index in 0..(1u64 << bits) {
        let evolution = Evolution::from_index(n, horizon, index);
        let outcome = run_annihilation(starts, &evolution)?;
        if outcome.k() != 1 || outcome.collisions[0].actors != actors {
            continue;
        }
        let (f1, f2) = outcome.ghost_pairs[0];
        let (a, b) = (f1.min(f2), f1.max(f2));
        let mut tuple = Vec::with_capacity(n);
        tuple.push(a);
        let mut survivors: Vec<i64> = outcome.survivors.iter().map(|&(_, p)| p).collect();
        survivors.sort_unstable();
        tuple.extend(survivors);
        tuple.push(b);
        if tuple.windows(2).all(|w| w[0] < w[1]) && !tuples.contains(&tuple) {
            tuples.push(tuple);
        }
    }
    tuples.sort();
    Ok(tuples)
}

fn result_json(r: &SolveResult) -> Value {
    match r {
        SolveResult::Consistent { solution, nullity } => json!({
            "result": "consistent",
            "solution": solution.iter().map(Rat::to_string).collect::<Vec<_>>(),
            "nullity": nullity,
        }),
        SolveResult::Inconsistent { certificate } => json!({
            "result": "inconsistent",
            "certificate": certificate.iter().map(Rat::to_string).collect::<Vec<_>>(),
        }),
    }
}

/// The three-walker experiment: starts `(0, 2, 4)`, annihilating pair
/// `(1, 2)`, horizon 4, and the four tuples the strict ordering admits.
///
/// One might hope this 4x6 system is already inconsistent, with every
/// three-row subsystem consistent. Exact elimination shows that cannot
/// happen: the four rows have full row rank (the only row with nonzero
/// entries in the columns pairing the third walker with position `a = 0`
/// is the fourth, since `W(4 -> -2) = 0`, and the remaining 3x3 leading
/// minor is nonsingular), so *every* right-hand side is attainable. The
/// report therefore also carries two systems that do witness the
/// substantive conclusion that no universal rational coefficients exist:
/// the horizon-4 system over all sole-pair-annihilation outcomes (no
/// ordering constraint) is inconsistent, and the ordering-constrained
/// system becomes inconsistent at horizon 5.
#[derive(Debug)]
pub struct ExperimentReport {
    pub tuples: Vec<Vec<i64>>,
    pub enumerated_tuples: Vec<Vec<i64>>,
    /// The strict-ordering tuples found by enumeration are exactly the
    /// four the system is built on.
    pub tuple_enumeration_matches: bool,
    pub full_result: SolveResult,
    pub full_result_verified: bool,
    /// Per dropped row: whether the remaining three rows are consistent
    /// and the result checks by substitution.
    pub subsets_consistent: Vec<bool>,
    pub subsets_verified: Vec<bool>,
    /// Whether the four-tuple system is inconsistent with every three-row
    /// subsystem consistent (provably impossible, see the type docs).
    pub four_tuple_minimality_holds: bool,
    /// Horizon-4 system over all sole-pair outcomes (ordering dropped).
    pub unrestricted_rows: usize,
    pub unrestricted_result: SolveResult,
    pub unrestricted_verified: bool,
    /// Ordering-constrained system at the next horizon.
    pub extended_horizon: u32,
    pub extended_rows: usize,
    pub extended_result: SolveResult,
    pub extended_verified: bool,
    /// The substantive no-universal-coefficients conclusion, demonstrated
    /// by the two supplementary systems.
    pub substantive_inconsistency_holds: bool,
}

impl ExperimentReport {
    pub fn to_json(&self) -> Value {
        let mut unrestricted = result_json(&self.unrestricted_result);
        unrestricted["rows"] = json!(self.unrestricted_rows);
        unrestricted["verified"] = json!(self.unrestricted_verified);
        let mut extended = result_json(&self.extended_result);
        extended["rows"] = json!(self.extended_rows);
        extended["horizon"] = json!(self.extended_horizon);
        extended["verified"] = json!(self.extended_verified);
        json!({
            "system": {"rows": self.tuples.len(), "cols": 6},
            "tuples": self.tuples,
            "tuple_enumeration_matches": self.tuple_enumeration_matches,
            "full": result_json(&self.full_result),
            "full_verified": self.full_result_verified,
            "subset_results": (0..self.tuples.len()).map(|drop| json!({
                "dropped": drop,
                "result": if self.subsets_consistent[drop] { "consistent" } else { "inconsistent" },
                "verified": self.subsets_verified[drop],
            })).collect::<Vec<_>>(),
            "inconsistent": matches!(self.full_result, SolveResult::Inconsistent { .. }),
            "minimal": self.subsets_consistent.iter().all(|&c| c),
            "four_tuple_minimality_holds": self.four_tuple_minimality_holds,
            "unrestricted": unrestricted,
            "extended": extended,
            "substantive_inconsistency_holds": self.substantive_inconsistency_holds,
        })
    }
}

/// Runs the full experiment: the four-tuple 4x6 system, its 3-row
/// subsystems, the tuple enumeration check, and the two supplementary
/// inconsistency demonstrations (see [`ExperimentReport`]).
pub fn three_walker_experiment() -> Result<ExperimentReport> {
    let starts = [0i64, 2, 4];
    let pair = 1usize;
    let horizon = 4u32;
    let tuples: Vec<Vec<i64>> = vec![
        vec![-2, 0, 2],
        vec![-2, 0, 4],
        vec![-2, 2, 4],
        vec![0, 2, 4],
    ];

    let enumerated =
        enumerate_prescribed_tuples(&starts, pair, horizon, dynamics::DEFAULT_BIT_CAP)?;
    let tuple_enumeration_matches = enumerated == tuples;

    let system = build_system(&starts, pair, horizon, &tuples, dynamics::DEFAULT_BIT_CAP)?;
    let full_result = solve_exact(&system)?;
    let full_result_verified = verify(&system, &full_result);

    let mut subsets_consistent = Vec::with_capacity(tuples.len());
    let mut subsets_verified = Vec::with_capacity(tuples.len());
    for drop in 0..tuples.len() {
        let sub = system.without_row(drop);
        let result = solve_exact(&sub)?;
        subsets_consistent.push(matches!(result, SolveResult::Consistent { .. }));
        subsets_verified.push(verify(&sub, &result));
    }

    let four_tuple_minimality_holds = tuple_enumeration_matches
        && matches!(full_result, SolveResult::Inconsistent { .. })
        && full_result_verified
        && subsets_consistent.iter().all(|&c| c)
        && subsets_verified.iter().all(|&v| v);

    let unrestricted = sole_pair_system(&starts, pair, horizon, dynamics::DEFAULT_BIT_CAP)?;
    let unrestricted_result = solve_exact(&unrestricted)?;
    let unrestricted_verified = verify(&unrestricted, &unrestricted_result);

    let extended_horizon = horizon + 1;
    let extended_tuples =
        enumerate_prescribed_tuples(&starts, pair, extended_horizon, dynamics::DEFAULT_BIT_CAP)?;
    let extended = build_system(
        &starts,
        pair,
        extended_horizon,
        &extended_tuples,
        dynamics::DEFAULT_BIT_CAP,
    )?;
    let extended_result = solve_exact(&extended)?;
    let extended_verified = verify(&extended, &extended_result);

    let substantive_inconsistency_holds =
        matches!(unrestricted_result, SolveResult::Inconsistent { .. })
            && unrestricted_verified
            && matches!(extended_result, SolveResult::Inconsistent { .. })
            && extended_verified;

    Ok(ExperimentReport {
        tuples,
        enumerated_tuples: enumerated,
        tuple_enumeration_matches,
        full_result,
        full_result_verified,
        subsets_consistent,
        subsets_verified,
        four_tuple_minimality_holds,
        unrestricted_rows: unrestricted.rows(),
        unrestricted_result,
        unrestricted_verified,
        extended_horizon,
        extended_rows: extended.rows(),
        extended_result,
        extended_verified,
        substantive_inconsistency_holds,
    })
}
