//! Final states, the ghost matrix, and the annihilation weight.
//!
//! A final state of `n` walkers records `k` collisions, the `s = n - 2k`
//! survivor positions in increasing target order, and `k` ordered ghost
//! pairs `(a_j, b_j)`. The annihilation weight of a state is
//!
//! ```text
//! Z = (1/k!) * sum over candidate bijections pi of
//!       formal_sign(pi) * sgn(pi) * prod_I W(x_I -> position(pi(I)))
//! ```
//!
//! where a bijection from actors to roles is a *candidate* when the two
//! actors sent to each ghost pair are ordered consistently with the pair's
//! sign, and the formal sign contributes `-1` for every pair whose first
//! slot is taken by the higher-indexed actor. For `k = 0` this is exactly
//! the determinant of plain transition weights, i.e. the classical
//! non-colliding determinant. A single-collision state can be evaluated
//! independently by Laplace expansion along the two ghost columns
//! ([`annihilation_weight_laplace`]), which the test suites use as a
//! cross-check.

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::linalg;
use crate::rat::Rat;
use crate::spacetime::{SpacetimeGraph, TargetOrder, VertexId};

/// Largest `n` for which direct summation over candidate bijections is
/// attempted.
pub const MAX_DIRECT_N: usize = 8;

/// Which of the two slots of a ghost pair a role denotes. The first slot
/// carries the pair's `a` position, the second its `b` position.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum GhostSlot {
    First,
    Second,
}

/// A final role: survivor slot `l` or one slot of ghost pair `j`.
/// Both indices are 0-based.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Role {
    Survivor(usize),
    Ghost { pair: usize, slot: GhostSlot },
}

impl Role {
    /// Canonical column rank: survivor slots first, then ghost slots
    /// `(0, First), (0, Second), (1, First), ...`.
    pub fn rank(self, survivor_count: usize) -> usize {
        match self {
            Role::Survivor(l) => l,
            Role::Ghost { pair, slot } => {
                survivor_count + 2 * pair + if slot == GhostSlot::Second { 1 } else { 0 }
            }
        }
    }

    /// All roles of a state shape in canonical rank order.
    pub fn all(survivor_count: usize, pair_count: usize) -> Vec<Role> {
        let mut roles = Vec::with_capacity(survivor_count + 2 * pair_count);
        for l in 0..survivor_count {
            roles.push(Role::Survivor(l));
        }
        for j in 0..pair_count {
            roles.push(Role::Ghost {
                pair: j,
                slot: GhostSlot::First,
            });
            roles.push(Role::Ghost {
                pair: j,
                slot: GhostSlot::Second,
            });
        }
        roles
    }
}

/// A final state: survivor positions in strictly increasing target order
/// plus an ordered list of ordered ghost pairs.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct FinalState {
    pub survivors: Vec<VertexId>,
    pub ghost_pairs: Vec<(VertexId, VertexId)>,
}

impl FinalState {
    pub fn new(survivors: Vec<VertexId>, ghost_pairs: Vec<(VertexId, VertexId)>) -> FinalState {
        FinalState {
            survivors,
            ghost_pairs,
        }
    }

    /// Collision count `k`.
    pub fn k(&self) -> usize {
        self.ghost_pairs.len()
    }

    pub fn survivor_count(&self) -> usize {
        self.survivors.len()
    }

    /// Total entity count `n = s + 2k`.
    pub fn n(&self) -> usize {
        self.survivors.len() + 2 * self.ghost_pairs.len()
    }

    /// Checks the state against a target order: survivors strictly
    /// increasing, every position a known target.
    pub fn validate(&self, targets: &TargetOrder) -> Result<()> {
        let mut prev: Option<usize> = None;
        for &y in &self.survivors {
            let r = targets.rank(y)?;
            if let Some(p) = prev {
                if r <= p {
                    return Err(Error::invalid("survivors not strictly increasing"));
                }
            }
            prev = Some(r);
        }
        for &(a, b) in &self.ghost_pairs {
            targets.rank(a)?;
            targets.rank(b)?;
        }
        Ok(())
    }

    /// Position filled by a role of this state.
    pub fn role_position(&self, role: Role) -> VertexId {
        match role {
            Role::Survivor(l) => self.survivors[l],
            Role::Ghost { pair, slot } => {
                let (a, b) = self.ghost_pairs[pair];
                if slot == GhostSlot::First {
                    a
                } else {
                    b
                }
            }
        }
    }

    /// Sign of ghost pair `j`: `+1` when `a_j` does not come after `b_j`
    /// in the target order (ties count as `+1`), `-1` otherwise.
    pub fn ghost_sign(&self, j: usize, targets: &TargetOrder) -> Result<i8> {
        let (a, b) = self.ghost_pairs[j];
        Ok(if targets.rank(a)? <= targets.rank(b)? {
            1
        } else {
            -1
        })
    }

    /// Product of the ghost signs.
    pub fn sign(&self, targets: &TargetOrder) -> Result<i8> {
        let mut s = 1i8;
        for j in 0..self.k() {
            s *= self.ghost_sign(j, targets)?;
        }
        Ok(s)
    }

    pub fn to_json(&self, graph: &SpacetimeGraph) -> Value {
        json!({
            "k": self.k(),
            "survivors": self.survivors.iter().map(|&v| graph.label(v)).collect::<Vec<_>>(),
            "ghost_pairs": self.ghost_pairs.iter()
                .map(|&(a, b)| vec![graph.label(a), graph.label(b)])
                .collect::<Vec<_>>(),
        })
    }

    pub fn from_json(graph: &SpacetimeGraph, value: &Value) -> Result<FinalState> {
        let lookup = |label: &Value| -> Result<VertexId> {
            let s = label
                .as_str()
                .ok_or_else(|| Error::Parse("vertex id must be a string".into()))?;
            graph
                .vertex(s)
                .ok_or_else(|| Error::Parse(format!("unknown vertex id {s:?}")))
        };
        let survivors = value["survivors"]
            .as_array()
            .ok_or_else(|| Error::Parse("final state needs \"survivors\"".into()))?
            .iter()
            .map(lookup)
            .collect::<Result<Vec<_>>>()?;
        let ghost_pairs = value["ghost_pairs"]
            .as_array()
            .ok_or_else(|| Error::Parse("final state needs \"ghost_pairs\"".into()))?
            .iter()
            .map(|pair| {
                let arr = pair
                    .as_array()
                    .filter(|a| a.len() == 2)
                    .ok_or_else(|| Error::Parse("ghost pair must be a 2-element array".into()))?;
                Ok((lookup(&arr[0])?, lookup(&arr[1])?))
            })
            .collect::<Result<Vec<_>>>()?;
        let state = FinalState::new(survivors, ghost_pairs);
        if let Some(k) = value.get("k").and_then(Value::as_u64) {
            if k as usize != state.k() {
                return Err(Error::Parse(format!(
                    "state says k={k} but lists {} ghost pairs",
                    state.k()
                )));
            }
        }
        Ok(state)
    }
}

/// The signs `(eps_1, ..., eps_k)` of a state's ghost pairs.
pub fn ghost_signs(state: &FinalState, targets: &TargetOrder) -> Result<Vec<i8>> {
    (0..state.k())
        .map(|j| state.ghost_sign(j, targets))
        .collect()
}

/// Sign of the permutation sending actor `i` to `assignment[i]`, computed
/// from inversions of the canonical role ranks.
pub fn permutation_sign(assignment: &[Role], survivor_count: usize) -> i8 {
    let ranks: Vec<usize> = assignment.iter().map(|r| r.rank(survivor_count)).collect();
    let mut inversions = 0usize;
    for i in 0..ranks.len() {
        for j in (i + 1)..ranks.len() {
            if ranks[i] > ranks[j] {
                inversions += 1;
            }
        }
    }
    if inversions.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// Sign contributed by the ghost-column variable relations: `-1` for every
/// pair whose first slot is taken by the higher-indexed actor.
pub fn formal_sign(assignment: &[Role], pair_count: usize) -> i8 {
    let mut sign = 1i8;
    for j in 0..pair_count {
        let first = assignment
            .iter()
            .position(|&r| {
                r == Role::Ghost {
                    pair: j,
                    slot: GhostSlot::First,
                }
            })
            .expect("pair slot assigned");
        let second = assignment
            .iter()
            .position(|&r| {
                r == Role::Ghost {
                    pair: j,
                    slot: GhostSlot::Second,
                }
            })
            .expect("pair slot assigned");
        if first > second {
            sign = -sign;
        }
    }
    sign
}

/// Whether an actor-to-role assignment is a candidate for the given ghost
/// signs: each pair with `eps = +1` has its first slot on the
/// higher-indexed actor, each pair with `eps = -1` on the lower-indexed.
pub fn is_candidate(assignment: &[Role], epsilons: &[i8]) -> bool {
    for (j, &eps) in epsilons.iter().enumerate() {
        let first = assignment.iter().position(|&r| {
            r == Role::Ghost {
                pair: j,
                slot: GhostSlot::First,
            }
        });
        let second = assignment.iter().position(|&r| {
            r == Role::Ghost {
                pair: j,
                slot: GhostSlot::Second,
            }
        });
        let (first, second) = match (first, second) {
            (Some(f), Some(s)) => (f, s),
            _ => return false,
        };
        let ok = if eps >= 0 {
            first > second
        } else {
            first < second
        };
        if !ok {
            return false;
        }
    }
    true
}

fn check_direct_n(n: usize) -> Result<()> {
    if n > MAX_DIRECT_N {
        return Err(Error::invalid(format!(
            "direct candidate summation is limited to n <= {MAX_DIRECT_N}, got n = {n}"
        )));
    }
    Ok(())
}

/// All candidate bijections from actors `0..n` to the roles of `state`,
/// as assignment vectors indexed by actor.
pub fn candidate_bijections(
    state: &FinalState,
    targets: &TargetOrder,
    n: usize,
) -> Result<Vec<Vec<Role>>> {
    if state.n() != n {
        return Err(Error::invalid(format!(
            "state has {} roles but n = {n}",
            state.n()
        )));
    }
    check_direct_n(n)?;
    let epsilons = ghost_signs(state, targets)?;
    let roles = Role::all(state.survivor_count(), state.k());
    Ok(permutations_of(&roles)
        .into_iter()
        .filter(|assignment| is_candidate(assignment, &epsilons))
        .collect())
}

/// All permutations of `items`, in lexicographic index order.
fn permutations_of(items: &[Role]) -> Vec<Vec<Role>> {
    use itertools::Itertools;
    (0..items.len())
        .permutations(items.len())
        .map(|idx| idx.into_iter().map(|i| items[i]).collect())
        .collect()
}

/// The `n x n` ghost matrix of a state: rows indexed by actors, columns by
/// roles in canonical order. Each entry keeps the plain transition weight
/// and the role tag of its column; the ghost-column variable relations are
/// carried by the sign bookkeeping in [`annihilation_weight`] instead of a
/// symbolic representation.
pub struct GhostMatrix {
    columns: Vec<Role>,
    base: Vec<Vec<Rat>>,
    epsilons: Vec<i8>,
    survivor_count: usize,
}

impl GhostMatrix {
    pub fn n(&self) -> usize {
        self.base.len()
    }

    pub fn survivor_count(&self) -> usize {
        self.survivor_count
    }

    pub fn pair_count(&self) -> usize {
        self.epsilons.len()
    }

    pub fn columns(&self) -> &[Role] {
        &self.columns
    }

    pub fn epsilons(&self) -> &[i8] {
        &self.epsilons
    }

    /// Base weight and role tag of entry `(actor, column)`.
    pub fn entry(&self, actor: usize, column: usize) -> (&Rat, Role) {
        (&self.base[actor][column], self.columns[column])
    }

    /// Row-major dump with a dimension header, weights as `"p/q"`.
    pub fn to_json(&self) -> Value {
        json!({
            "rows": self.n(),
            "cols": self.n(),
            "entries": self.base.iter().flatten().map(Rat::to_string).collect::<Vec<_>>(),
        })
    }
}

/// Builds the ghost matrix for `state` with entry `(I, f)` equal to
/// `W(x_I -> position(f))`.
pub fn build_matrix(
    graph: &SpacetimeGraph,
    sources: &[VertexId],
    state: &FinalState,
    targets: &TargetOrder,
) -> Result<GhostMatrix> {
    let weights: Vec<Vec<Rat>> = sources
        .iter()
        .map(|&x| graph.weights_from(x))
        .collect::<Result<_>>()?;
    build_matrix_with(
        |actor, y| weights[actor][y.index()].clone(),
        sources.len(),
        state,
        targets,
    )
}

/// Builds the ghost matrix from a transition-weight lookup, letting
/// callers reuse cached dynamic-programming tables.
pub fn build_matrix_with(
    weight: impl Fn(usize, VertexId) -> Rat,
    n: usize,
    state: &FinalState,
    targets: &TargetOrder,
) -> Result<GhostMatrix> {
    if state.n() != n {
        return Err(Error::invalid(format!(
            "state needs {} actors but {n} sources given",
            state.n()
        )));
    }
    state.validate(targets)?;
    let columns = Role::all(state.survivor_count(), state.k());
    let base = (0..n)
        .map(|actor| {
            columns
                .iter()
                .map(|&role| weight(actor, state.role_position(role)))
                .collect()
        })
        .collect();
    Ok(GhostMatrix {
        columns,
        base,
        epsilons: ghost_signs(state, targets)?,
        survivor_count: state.survivor_count(),
    })
}

/// The annihilation weight `Z` of the state the matrix was built for:
/// `(1/k!)` times the candidate-filtered, sign-bookkept Leibniz sum. For
/// `k = 0` this is exactly `det` of the plain weight matrix.
pub fn annihilation_weight(matrix: &GhostMatrix) -> Result<Rat> {
    let n = matrix.n();
    check_direct_n(n)?;
    let roles = matrix.columns.clone();
    let mut total = Rat::zero();
    for assignment in permutations_of(&roles) {
        if !is_candidate(&assignment, &matrix.epsilons) {
            continue;
        }
        let sign = permutation_sign(&assignment, matrix.survivor_count)
            * formal_sign(&assignment, matrix.pair_count());
        let mut term = Rat::one();
        for (actor, role) in assignment.iter().enumerate() {
            term *= &matrix.base[actor][role.rank(matrix.survivor_count)];
        }
        if sign < 0 {
            total -= &term;
        } else {
            total += &term;
        }
    }
    let mut k_factorial = Rat::one();
    for i in 2..=matrix.pair_count() {
        k_factorial *= &Rat::from_int(i as i64);
    }
    Ok(total / k_factorial)
}

/// Independent evaluation of a single-collision state by Laplace expansion
/// along the two ghost columns:
///
/// ```text
/// Z = sum over I < J of (-1)^(I+J+1)
///       * W(x_I -> max(a, b)) * W(x_J -> min(a, b))
///       * det( survivor minor on the remaining rows )
/// ```
///
/// with max/min taken in the target order (`a = b` allowed).
pub fn annihilation_weight_laplace(
    graph: &SpacetimeGraph,
    sources: &[VertexId],
    state: &FinalState,
    targets: &TargetOrder,
) -> Result<Rat> {
    if state.k() != 1 {
        return Err(Error::invalid(format!(
            "Laplace cross-check needs exactly one ghost pair, state has {}",
            state.k()
        )));
    }
    if state.n() != sources.len() {
        return Err(Error::invalid("source count does not match state"));
    }
    state.validate(targets)?;

    let (a, b) = state.ghost_pairs[0];
    let (lo, hi) = if targets.rank(a)? <= targets.rank(b)? {
        (a, b)
    } else {
        (b, a)
    };

    let weights: Vec<Vec<Rat>> = sources
        .iter()
        .map(|&x| graph.weights_from(x))
        .collect::<Result<_>>()?;

    let n = sources.len();
    let mut total = Rat::zero();
    for i in 0..n {
        for j in (i + 1)..n {
            // 1-based row indices I = i+1, J = j+1 give (-1)^(I+J+1),
            // which has the parity of i + j + 1
            let sign_negative = (i + j + 1) % 2 == 1;
            let minor: Vec<Vec<Rat>> = (0..n)
                .filter(|&r| r != i && r != j)
                .map(|r| {
                    state
                        .survivors
                        .iter()
                        .map(|&y| weights[r][y.index()].clone())
                        .collect()
                })
                .collect();
            let term =
                &weights[i][hi.index()] * &weights[j][lo.index()] * linalg::determinant(&minor)?;
            if sign_negative {
                total -= &term;
            } else {
                total += &term;
            }
        }
    }
    Ok(total)
}
