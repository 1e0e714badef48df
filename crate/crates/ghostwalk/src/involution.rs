//! Executable proof machinery: castings, attribution, rehearsal, segment
//! swap, and the global sign-reversing involution.
//!
//! A *casting* is actor-based data: a candidate bijection from actors to
//! roles plus one non-interacting path per actor. A *performance* is
//! role-based data: the collisions that occurred, the survivor paths, and
//! each ghost pair's ordered pair of ghost paths. Rehearsal scans a
//! casting's crossings in temporal order and either reconstructs the
//! performance it encodes or fails at the first spurious crossing;
//! attribution glues a performance back into a casting by the swap
//! principle (the actor starting further left continues to the ghost
//! ending further right). Failed castings cancel in pairs under segment
//! swap at the first spurious crossing; the fixed points are exactly the
//! successful castings, and [`audit_involution`] checks the whole story
//! against the determinant value on concrete instances.

use std::collections::BTreeMap;

use itertools::Itertools;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::ghostdet::{
    self, annihilation_weight, build_matrix, formal_sign, ghost_signs, is_candidate,
    permutation_sign, FinalState, GhostSlot, Role,
};
use crate::rat::Rat;
use crate::spacetime::{Path, SpacetimeGraph, TargetOrder, VertexId};

/// Everything the proof machinery needs about one instance: the graph, the
/// ordered sources, the final state under audit, and the target order.
pub struct StateContext<'a> {
    pub graph: &'a SpacetimeGraph,
    pub sources: &'a [VertexId],
    pub state: &'a FinalState,
    pub targets: &'a TargetOrder,
    epsilons: Vec<i8>,
}

impl<'a> StateContext<'a> {
    pub fn new(
        graph: &'a SpacetimeGraph,
        sources: &'a [VertexId],
        state: &'a FinalState,
        targets: &'a TargetOrder,
    ) -> Result<Self> {
        if sources.len() != state.n() {
            return Err(Error::invalid(format!(
                "state needs {} actors but {} sources given",
                state.n(),
                sources.len()
            )));
        }
        state.validate(targets)?;
        Ok(StateContext {
            graph,
            sources,
            state,
            targets,
            epsilons: ghost_signs(state, targets)?,
        })
    }

    pub fn n(&self) -> usize {
        self.sources.len()
    }

    pub fn pair_count(&self) -> usize {
        self.state.k()
    }

    pub fn epsilons(&self) -> &[i8] {
        &self.epsilons
    }

    fn k_factorial(&self) -> Rat {
        let mut f = Rat::one();
        for i in 2..=self.pair_count() {
            f *= &Rat::from_int(i as i64);
        }
        f
    }
}

/// Actor-based record: a bijection from actors to roles and one path per
/// actor from its source to its role's position.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Casting {
    /// Role of each actor.
    pub roles: Vec<Role>,
    /// Path of each actor, from its source to its role's position.
    pub paths: Vec<Path>,
}

impl Casting {
    /// Product of the actors' path weights (no numbering factor).
    pub fn path_product(&self, graph: &SpacetimeGraph) -> Rat {
        self.paths.iter().map(|p| p.weight(graph)).product()
    }

    /// Casting weight: the path product divided by k!.
    pub fn weight(&self, ctx: &StateContext) -> Rat {
        self.path_product(ctx.graph) / ctx.k_factorial()
    }

    pub fn permutation_sign(&self, ctx: &StateContext) -> i8 {
        permutation_sign(&self.roles, ctx.state.survivor_count())
    }

    pub fn formal_sign(&self, ctx: &StateContext) -> i8 {
        formal_sign(&self.roles, ctx.pair_count())
    }

    pub fn is_candidate(&self, ctx: &StateContext) -> bool {
        is_candidate(&self.roles, ctx.epsilons())
    }

    /// Checks shape: roles form a bijection onto the state's role set and
    /// every path runs from its actor's source to its role's position
    /// along graph edges.
    pub fn validate(&self, ctx: &StateContext) -> Result<()> {
        let n = ctx.n();
        if self.roles.len() != n || self.paths.len() != n {
            return Err(Error::invalid("casting size mismatch"));
        }
        let mut sorted: Vec<Role> = self.roles.clone();
        sorted.sort();
        if sorted != Role::all(ctx.state.survivor_count(), ctx.pair_count()) {
            return Err(Error::invalid("casting roles are not a bijection"));
        }
        for (actor, path) in self.paths.iter().enumerate() {
            if path.start() != ctx.sources[actor] {
                return Err(Error::invalid(format!(
                    "actor {actor} path starts off-source"
                )));
            }
            if path.end() != ctx.state.role_position(self.roles[actor]) {
                return Err(Error::invalid(format!("actor {actor} path ends off-role")));
            }
            for pair in path.vertices().windows(2) {
                if ctx.graph.edge_weight(pair[0], pair[1]).is_none() {
                    return Err(Error::invalid(format!(
                        "actor {actor} path leaves the graph"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One collision of a performance: where it happened, which actors were
/// destroyed, which ghost pair it created, and the two incoming path
/// prefixes.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CollisionRecord {
    pub vertex: VertexId,
    /// Destroyed actors, lower index first.
    pub actors: (usize, usize),
    /// Ghost pair index filled by this collision.
    pub pair: usize,
    /// Incoming prefixes, in actor order, each ending at `vertex`.
    pub incoming: (Path, Path),
}

/// Role-based record of an evolution: collisions in temporal order,
/// survivor paths by actor, and each pair's ordered ghost paths (first to
/// the pair's `a` position, second to its `b` position).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Performance {
    pub collisions: Vec<CollisionRecord>,
    pub survivor_paths: BTreeMap<usize, Path>,
    pub ghost_paths: Vec<(Path, Path)>,
}

impl Performance {
    /// Performance weight: diagram edges times ghost paths, divided by k!.
    pub fn weight(&self, ctx: &StateContext) -> Rat {
        let mut w = Rat::one();
        for record in &self.collisions {
            w *= &record.incoming.0.weight(ctx.graph);
            w *= &record.incoming.1.weight(ctx.graph);
        }
        for path in self.survivor_paths.values() {
            w *= &path.weight(ctx.graph);
        }
        for (g1, g2) in &self.ghost_paths {
            w *= &g1.weight(ctx.graph);
            w *= &g2.weight(ctx.graph);
        }
        w / ctx.k_factorial()
    }
}

/// Result of rehearsing a candidate casting.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum RehearsalResult {
    Success(Performance),
    /// First spurious crossing: the offending actors and the vertex.
    Failure {
        actors: (usize, usize),
        vertex: VertexId,
    },
}

/// Earliest first crossing among the given actors' paths: for each pair
/// the first shared vertex, pairs compared by the vertex's time (longest
/// path depth) with the lexicographically minimal actor pair breaking
/// ties. Returns `(lower actor, higher actor, vertex)`.
pub fn first_crossing(
    graph: &SpacetimeGraph,
    paths: &[(usize, &Path)],
) -> Option<(usize, usize, VertexId)> {
    let mut best: Option<(u32, usize, usize, VertexId)> = None;
    for (a, &(i, p)) in paths.iter().enumerate() {
        for &(j, q) in &paths[a + 1..] {
            let (lo, hi, p, q) = if i < j { (i, j, p, q) } else { (j, i, q, p) };
            if let Some(v) = p.first_shared_vertex(q) {
                let key = (graph.level(v), lo, hi, v);
                if best.is_none_or(|b| (b.0, b.1, b.2) > (key.0, key.1, key.2)) {
                    best = Some(key);
                }
            }
        }
    }
    best.map(|(_, i, j, v)| (i, j, v))
}

/// Outcome of the temporal crossing scan shared by rehearsal and the
/// involution.
enum Scan {
    Clean(Vec<CollisionRecord>),
    Spurious {
        actors: (usize, usize),
        vertex: VertexId,
    },
}

/// Scans crossings among active paths in temporal order. A crossing of
/// actors destined for the two slots of one ghost pair is a valid
/// annihilation (both deactivate); anything else stops the scan.
fn scan_crossings(ctx: &StateContext, casting: &Casting) -> Result<Scan> {
    let n = ctx.n();
    let mut active = vec![true; n];
    let mut collisions = Vec::new();
    loop {
        let active_paths: Vec<(usize, &Path)> = (0..n)
            .filter(|&i| active[i])
            .map(|i| (i, &casting.paths[i]))
            .collect();
        let Some((i, j, v)) = first_crossing(ctx.graph, &active_paths) else {
            // crossings must exist while any active actor still heads for
            // a ghost slot; stalling here means the instance violates the
            // structural properties the scan relies on
            if let Some(actor) =
                (0..n).find(|&i| active[i] && matches!(casting.roles[i], Role::Ghost { .. }))
            {
                return Err(Error::Planarity(format!(
                    "crossing scan stalled with actor {actor} still assigned to a ghost slot"
                )));
            }
            return Ok(Scan::Clean(collisions));
        };
        let pair = match (casting.roles[i], casting.roles[j]) {
            (Role::Ghost { pair: p1, slot: s1 }, Role::Ghost { pair: p2, slot: s2 })
                if p1 == p2 && s1 != s2 =>
            {
                p1
            }
            _ => {
                return Ok(Scan::Spurious {
                    actors: (i, j),
                    vertex: v,
                })
            }
        };
        let (pre_i, _) = casting.paths[i].split_at_vertex(v).expect("v on path i");
        let (pre_j, _) = casting.paths[j].split_at_vertex(v).expect("v on path j");
        collisions.push(CollisionRecord {
            vertex: v,
            actors: (i, j),
            pair,
            incoming: (pre_i, pre_j),
        });
        active[i] = false;
        active[j] = false;
    }
}

/// Rehearses a candidate casting: processes its crossings in temporal
/// order, returning the reconstructed performance on success or the first
/// spurious crossing on failure.
pub fn rehearse(ctx: &StateContext, casting: &Casting) -> Result<RehearsalResult> {
    casting.validate(ctx)?;
    if !casting.is_candidate(ctx) {
        return Err(Error::invalid("rehearsal needs a candidate casting"));
    }
    match scan_crossings(ctx, casting)? {
        Scan::Spurious { actors, vertex } => Ok(RehearsalResult::Failure { actors, vertex }),
        Scan::Clean(collisions) => {
            let mut ghost_paths: Vec<(Option<Path>, Option<Path>)> =
                vec![(None, None); ctx.pair_count()];
            for record in &collisions {
                for actor in [record.actors.0, record.actors.1] {
                    let Role::Ghost { pair, slot } = casting.roles[actor] else {
                        unreachable!("valid collisions involve ghost roles");
                    };
                    let (_, suffix) = casting.paths[actor]
                        .split_at_vertex(record.vertex)
                        .expect("collision vertex on path");
                    match slot {
                        GhostSlot::First => ghost_paths[pair].0 = Some(suffix),
                        GhostSlot::Second => ghost_paths[pair].1 = Some(suffix),
                    }
                }
            }
            let ghost_paths = ghost_paths
                .into_iter()
                .map(|(g1, g2)| {
                    (
                        g1.expect("first slot filled on success"),
                        g2.expect("second slot filled on success"),
                    )
                })
                .collect();
            let survivor_paths = casting
                .roles
                .iter()
                .enumerate()
                .filter(|(_, role)| matches!(role, Role::Survivor(_)))
                .map(|(actor, _)| (actor, casting.paths[actor].clone()))
                .collect();
            Ok(RehearsalResult::Success(Performance {
                collisions,
                survivor_paths,
                ghost_paths,
            }))
        }
    }
}

/// Glues a performance into a casting by the swap principle: at the
/// collision filling pair `j`, the later actor takes the pair's first
/// slot when `eps_j = +1` (ghosts ordered left-to-right) and the earlier
/// actor takes it when `eps_j = -1`.
pub fn attribute(ctx: &StateContext, performance: &Performance) -> Result<Casting> {
    let n = ctx.n();
    let k = ctx.pair_count();
    if performance.ghost_paths.len() != k {
        return Err(Error::invalid(format!(
            "performance needs {k} ghost path pairs"
        )));
    }
    if performance.collisions.len() != k {
        return Err(Error::invalid(format!("performance needs {k} collisions")));
    }

    let placeholder = Path::new(vec![VertexId(0)]);
    let mut roles: Vec<Option<Role>> = vec![None; n];
    let mut paths: Vec<Path> = vec![placeholder; n];
    let mut pair_seen = vec![false; k];

    for record in &performance.collisions {
        let (lo, hi) = record.actors;
        if lo >= hi || hi >= n {
            return Err(Error::invalid("collision actors out of order"));
        }
        if std::mem::replace(&mut pair_seen[record.pair], true) {
            return Err(Error::invalid(format!("pair {} filled twice", record.pair)));
        }
        if record.incoming.0.end() != record.vertex || record.incoming.1.end() != record.vertex {
            return Err(Error::invalid(
                "incoming prefixes must end at the collision vertex",
            ));
        }
        if record.incoming.0.start() != ctx.sources[lo]
            || record.incoming.1.start() != ctx.sources[hi]
        {
            return Err(Error::invalid(
                "incoming prefixes must start at the actors' sources",
            ));
        }
        let (g1, g2) = &performance.ghost_paths[record.pair];
        if g1.start() != record.vertex || g2.start() != record.vertex {
            return Err(Error::invalid(
                "ghost paths must start at the collision vertex",
            ));
        }
        let (a, b) = ctx.state.ghost_pairs[record.pair];
        if g1.end() != a || g2.end() != b {
            return Err(Error::invalid(
                "ghost paths must end at the pair's positions",
            ));
        }

        // swap principle: the left-starting actor continues to the ghost
        // that ends further right
        let (to_first, to_second) = if ctx.epsilons[record.pair] >= 0 {
            (hi, lo)
        } else {
            (lo, hi)
        };
        roles[to_first] = Some(Role::Ghost {
            pair: record.pair,
            slot: GhostSlot::First,
        });
        roles[to_second] = Some(Role::Ghost {
            pair: record.pair,
            slot: GhostSlot::Second,
        });
        let incoming_of = |actor: usize| {
            if actor == lo {
                &record.incoming.0
            } else {
                &record.incoming.1
            }
        };
        paths[to_first] = incoming_of(to_first).join(g1);
        paths[to_second] = incoming_of(to_second).join(g2);
    }

    for (&actor, path) in &performance.survivor_paths {
        if actor >= n || roles[actor].is_some() {
            return Err(Error::invalid(
                "survivor actor already destroyed or out of range",
            ));
        }
        if path.start() != ctx.sources[actor] {
            return Err(Error::invalid("survivor path starts off-source"));
        }
        let slot = ctx
            .state
            .survivors
            .iter()
            .position(|&y| y == path.end())
            .ok_or_else(|| Error::invalid("survivor path ends at a non-survivor position"))?;
        roles[actor] = Some(Role::Survivor(slot));
        paths[actor] = path.clone();
    }

    let roles = roles
        .into_iter()
        .collect::<Option<Vec<Role>>>()
        .ok_or_else(|| Error::invalid("some actor has no role"))?;
    let casting = Casting { roles, paths };
    casting.validate(ctx)?;
    Ok(casting)
}

/// Exchanges the suffixes of actors `i` and `j` at shared vertex `v` and
/// swaps their roles. An involution that preserves the path product and
/// reverses the permutation sign.
pub fn segment_swap(casting: &Casting, i: usize, j: usize, v: VertexId) -> Result<Casting> {
    if i == j || i >= casting.paths.len() || j >= casting.paths.len() {
        return Err(Error::invalid("segment swap needs two distinct actors"));
    }
    let (pre_i, suf_i) = casting.paths[i]
        .split_at_vertex(v)
        .ok_or_else(|| Error::invalid(format!("actor {i} path does not pass through {v:?}")))?;
    let (pre_j, suf_j) = casting.paths[j]
        .split_at_vertex(v)
        .ok_or_else(|| Error::invalid(format!("actor {j} path does not pass through {v:?}")))?;
    let mut out = casting.clone();
    out.paths[i] = pre_i.join(&suf_j);
    out.paths[j] = pre_j.join(&suf_i);
    out.roles.swap(i, j);
    Ok(out)
}

/// The global involution: a successful casting is returned unchanged (a
/// fixed point); a failed casting is segment-swapped at its first spurious
/// crossing, yielding its cancellation partner.
pub fn global_involution(ctx: &StateContext, casting: &Casting) -> Result<Casting> {
    casting.validate(ctx)?;
    if !casting.is_candidate(ctx) {
        return Err(Error::invalid("the involution acts on candidate castings"));
    }
    match scan_crossings(ctx, casting)? {
        Scan::Clean(_) => Ok(casting.clone()),
        Scan::Spurious {
            actors: (i, j),
            vertex,
        } => segment_swap(casting, i, j, vertex),
    }
}

/// All candidate castings of the state: every candidate bijection combined
/// with every family of per-actor paths. Capped at `cap` castings (the
/// same cap guards the per-endpoint path enumerations).
pub fn enumerate_candidate_castings(ctx: &StateContext, cap: usize) -> Result<Vec<Casting>> {
    let bijections = ghostdet::candidate_bijections(ctx.state, ctx.targets, ctx.n())?;
    let mut castings = Vec::new();
    for roles in bijections {
        let per_actor: Vec<Vec<Path>> = roles
            .iter()
            .enumerate()
            .map(|(actor, &role)| {
                ctx.graph
                    .enumerate_paths(ctx.sources[actor], ctx.state.role_position(role), cap)
            })
            .collect::<Result<_>>()?;
        if per_actor.iter().any(Vec::is_empty) {
            continue;
        }
        for family in per_actor
            .iter()
            .map(|ps| ps.iter())
            .multi_cartesian_product()
        {
            if castings.len() >= cap {
                return Err(Error::CapExceeded {
                    what: "casting enumeration",
                    cap: cap as u64,
                });
            }
            castings.push(Casting {
                roles: roles.clone(),
                paths: family.into_iter().cloned().collect(),
            });
        }
    }
    Ok(castings)
}

/// One audit failure.
#[derive(Clone, Debug)]
pub struct AuditViolation {
    pub kind: &'static str,
    pub detail: String,
}

/// Result of the six-part involution audit over all candidate castings of
/// one state.
#[derive(Clone, Debug)]
pub struct AuditReport {
    pub checked: usize,
    pub fixed_points: usize,
    pub paired: usize,
    pub violations: Vec<AuditViolation>,
    /// Sum over candidates of formal sign x permutation sign x path
    /// product; equals k! times the determinant weight when the audit
    /// passes.
    pub cancellation_sum: Rat,
    pub formula_weight: Rat,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "checked": self.checked,
            "fixed_points": self.fixed_points,
            "paired": self.paired,
            "cancellation_sum": self.cancellation_sum.to_string(),
            "formula_weight": self.formula_weight.to_string(),
            "violations": self.violations.iter().map(|v| json!({
                "kind": v.kind,
                "detail": v.detail,
            })).collect::<Vec<_>>(),
        })
    }
}

/// Audits the involution machinery on one state:
///
/// 1. the involution is self-inverse;
/// 2. non-fixed castings pair with equal path product and opposite sign;
/// 3. fixed points are exactly the rehearsal successes;
/// 4. every fixed point satisfies the sign identity
///    `sgn(pi) = (-1)^(#{j : eps_j = +1})`;
/// 5. the signed cancellation sum equals k! times the determinant weight;
/// 6. attribution and rehearsal invert each other on successes.
pub fn audit_involution(ctx: &StateContext, cap: usize) -> Result<AuditReport> {
    let castings = enumerate_candidate_castings(ctx, cap)?;
    let formula_weight = annihilation_weight(&build_matrix(
        ctx.graph,
        ctx.sources,
        ctx.state,
        ctx.targets,
    )?)?;
    let mut report = AuditReport {
        checked: castings.len(),
        fixed_points: 0,
        paired: 0,
        violations: Vec::new(),
        cancellation_sum: Rat::zero(),
        formula_weight,
    };
    let expected_fixed_sign = if ctx.epsilons().iter().filter(|&&e| e > 0).count() % 2 == 0 {
        1
    } else {
        -1
    };

    for casting in &castings {
        let sign = casting.formal_sign(ctx) * casting.permutation_sign(ctx);
        let product = casting.path_product(ctx.graph);
        if sign < 0 {
            report.cancellation_sum -= &product;
        } else {
            report.cancellation_sum += &product;
        }

        let image = match global_involution(ctx, casting) {
            Ok(image) => image,
            Err(Error::Planarity(detail)) => {
                report.violations.push(AuditViolation {
                    kind: "crossings_exist",
                    detail,
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        let rehearsal = match rehearse(ctx, casting) {
            Ok(r) => r,
            Err(Error::Planarity(detail)) => {
                report.violations.push(AuditViolation {
                    kind: "crossings_exist",
                    detail,
                });
                continue;
            }
            Err(e) => return Err(e),
        };

        if image == *casting {
            report.fixed_points += 1;
            let performance = match rehearsal {
                RehearsalResult::Success(p) => p,
                RehearsalResult::Failure { actors, .. } => {
                    report.violations.push(AuditViolation {
                        kind: "fixed_point_characterization",
                        detail: format!("fixed point fails rehearsal at actors {actors:?}"),
                    });
                    continue;
                }
            };
            if casting.permutation_sign(ctx) != expected_fixed_sign {
                report.violations.push(AuditViolation {
                    kind: "sign_identity",
                    detail: format!(
                        "fixed point with sgn {} expected {expected_fixed_sign}",
                        casting.permutation_sign(ctx)
                    ),
                });
            }
            match attribute(ctx, &performance) {
                Ok(back) if back == *casting => match rehearse(ctx, &back) {
                    Ok(RehearsalResult::Success(p2)) if p2 == performance => {}
                    _ => report.violations.push(AuditViolation {
                        kind: "bijection",
                        detail: "rehearsal of the attributed casting does not reproduce \
                                     the performance"
                            .into(),
                    }),
                },
                Ok(_) => report.violations.push(AuditViolation {
                    kind: "bijection",
                    detail: "attribution of the rehearsed performance differs from the casting"
                        .into(),
                }),
                Err(e) => report.violations.push(AuditViolation {
                    kind: "bijection",
                    detail: format!("attribution failed: {e}"),
                }),
            }
        } else {
            report.paired += 1;
            if !matches!(rehearsal, RehearsalResult::Failure { .. }) {
                report.violations.push(AuditViolation {
                    kind: "fixed_point_characterization",
                    detail: "moved casting passed rehearsal".into(),
                });
            }
            if !image.is_candidate(ctx) {
                report.violations.push(AuditViolation {
                    kind: "involution",
                    detail: "swap partner is not a candidate".into(),
                });
            }
            if image.path_product(ctx.graph) != product {
                report.violations.push(AuditViolation {
                    kind: "weight_preservation",
                    detail: "swap changed the path product".into(),
                });
            }
            if image.permutation_sign(ctx) != -casting.permutation_sign(ctx) {
                report.violations.push(AuditViolation {
                    kind: "sign_reversal",
                    detail: "swap did not flip the permutation sign".into(),
                });
            }
            match global_involution(ctx, &image) {
                Ok(back) if back == *casting => {}
                Ok(_) => report.violations.push(AuditViolation {
                    kind: "involution",
                    detail: "applying the involution twice moved the casting".into(),
                }),
                Err(e) => report.violations.push(AuditViolation {
                    kind: "involution",
                    detail: format!("second application failed: {e}"),
                }),
            }
        }
    }

    if !report.paired.is_multiple_of(2) {
        report.violations.push(AuditViolation {
            kind: "involution",
            detail: "odd number of paired castings".into(),
        });
    }
    let expected_sum = &report.formula_weight * ctx.k_factorial();
    if report.cancellation_sum != expected_sum {
        report.violations.push(AuditViolation {
            kind: "cancellation_sum",
            detail: format!(
                "signed sum {} but k! x weight = {}",
                report.cancellation_sum, expected_sum
            ),
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spacetime::{build_lattice_graph, LatticeGraph};

    struct Fixture {
        lattice: LatticeGraph,
        sources: Vec<VertexId>,
        targets: TargetOrder,
        state: FinalState,
    }

    impl Fixture {
        fn new(starts: &[i64], t: u32, survivors: &[i64], pairs: &[(i64, i64)]) -> Fixture {
            let min = starts[0] - t as i64;
            let max = starts[starts.len() - 1] + t as i64;
            let lattice = build_lattice_graph(min, max, t, Rat::new(1, 2)).unwrap();
            let sources = starts
                .iter()
                .map(|&p| lattice.vertex_at(p, 0).unwrap())
                .collect();
            let parity = (starts[0] + t as i64).rem_euclid(2);
            let targets = TargetOrder::new(
                (min..=max)
                    .filter(|p| p.rem_euclid(2) == parity)
                    .map(|p| lattice.vertex_at(p, t).unwrap())
                    .collect(),
            )
            .unwrap();
            let state = FinalState::new(
                survivors
                    .iter()
                    .map(|&p| lattice.vertex_at(p, t).unwrap())
                    .collect(),
                pairs
                    .iter()
                    .map(|&(a, b)| {
                        (
                            lattice.vertex_at(a, t).unwrap(),
                            lattice.vertex_at(b, t).unwrap(),
                        )
                    })
                    .collect(),
            );
            Fixture {
                lattice,
                sources,
                targets,
                state,
            }
        }

        fn ctx(&self) -> StateContext<'_> {
            StateContext::new(
                self.lattice.graph(),
                &self.sources,
                &self.state,
                &self.targets,
            )
            .unwrap()
        }

        /// The path through the given (position, time) points.
        fn path(&self, points: &[(i64, u32)]) -> Path {
            Path::new(
                points
                    .iter()
                    .map(|&(p, t)| self.lattice.vertex_at(p, t).unwrap())
                    .collect(),
            )
        }
    }

    fn ghost_role(pair: usize, slot: GhostSlot) -> Role {
        Role::Ghost { pair, slot }
    }

    #[test]
    fn first_crossing_selection() {
        let fix = Fixture::new(&[0, 2], 2, &[], &[(0, 2)]);
        let disjoint_a = fix.path(&[(0, 0), (-1, 1), (-2, 2)]);
        let disjoint_b = fix.path(&[(2, 0), (3, 1), (4, 2)]);
        assert_eq!(
            first_crossing(fix.lattice.graph(), &[(0, &disjoint_a), (1, &disjoint_b)]),
            None
        );

        let meet_a = fix.path(&[(0, 0), (1, 1), (0, 2)]);
        let meet_b = fix.path(&[(2, 0), (1, 1), (2, 2)]);
        let shared = fix.lattice.vertex_at(1, 1).unwrap();
        assert_eq!(
            first_crossing(fix.lattice.graph(), &[(0, &meet_a), (1, &meet_b)]),
            Some((0, 1, shared))
        );
    }

    #[test]
    fn first_crossing_earliest_pair_wins() {
        // pairs (0,1) cross at time 1, (1,2) and (0,2) at time 2
        let fix = Fixture::new(&[0, 2, 4], 2, &[0], &[(2, 2)]);
        let p0 = fix.path(&[(0, 0), (1, 1), (2, 2)]);
        let p1 = fix.path(&[(2, 0), (1, 1), (2, 2)]);
        let p2 = fix.path(&[(4, 0), (3, 1), (2, 2)]);
        let got = first_crossing(fix.lattice.graph(), &[(0, &p0), (1, &p1), (2, &p2)]);
        assert_eq!(got, Some((0, 1, fix.lattice.vertex_at(1, 1).unwrap())));
    }

    #[test]
    fn rehearse_success_reconstructs_performance() {
        // actors 0 and 1 meet at (1,1) and fill the pair; actor 2 survives
        let fix = Fixture::new(&[0, 2, 4], 2, &[4], &[(2, 2)]);
        let ctx = fix.ctx();
        let casting = Casting {
            roles: vec![
                ghost_role(0, GhostSlot::Second),
                ghost_role(0, GhostSlot::First),
                Role::Survivor(0),
            ],
            paths: vec![
                fix.path(&[(0, 0), (1, 1), (2, 2)]),
                fix.path(&[(2, 0), (1, 1), (2, 2)]),
                fix.path(&[(4, 0), (5, 1), (4, 2)]),
            ],
        };
        assert!(casting.is_candidate(&ctx));
        let RehearsalResult::Success(perf) = rehearse(&ctx, &casting).unwrap() else {
            panic!("expected success");
        };
        assert_eq!(perf.collisions.len(), 1);
        assert_eq!(perf.collisions[0].actors, (0, 1));
        assert_eq!(
            perf.collisions[0].vertex,
            fix.lattice.vertex_at(1, 1).unwrap()
        );
        assert_eq!(perf.survivor_paths.len(), 1);
        // both compositions invert
        let back = attribute(&ctx, &perf).unwrap();
        assert_eq!(back, casting);
        // weights agree between the two descriptions
        assert_eq!(perf.weight(&ctx), casting.weight(&ctx));
    }

    #[test]
    fn rehearse_failure_at_spurious_crossing() {
        // actors 0 and 2 hold the ghost pair, but the first crossing is
        // between 0 and the survivor 1
        let fix = Fixture::new(&[0, 2, 4], 2, &[0], &[(2, 2)]);
        let ctx = fix.ctx();
        let casting = Casting {
            roles: vec![
                ghost_role(0, GhostSlot::Second),
                Role::Survivor(0),
                ghost_role(0, GhostSlot::First),
            ],
            paths: vec![
                fix.path(&[(0, 0), (1, 1), (2, 2)]),
                fix.path(&[(2, 0), (1, 1), (0, 2)]),
                fix.path(&[(4, 0), (3, 1), (2, 2)]),
            ],
        };
        assert!(casting.is_candidate(&ctx));
        let result = rehearse(&ctx, &casting).unwrap();
        assert_eq!(
            result,
            RehearsalResult::Failure {
                actors: (0, 1),
                vertex: fix.lattice.vertex_at(1, 1).unwrap(),
            }
        );
    }

    #[test]
    fn rehearse_k0_noncrossing() {
        let fix = Fixture::new(&[0, 2], 1, &[-1, 3], &[]);
        let ctx = fix.ctx();
        let casting = Casting {
            roles: vec![Role::Survivor(0), Role::Survivor(1)],
            paths: vec![fix.path(&[(0, 0), (-1, 1)]), fix.path(&[(2, 0), (3, 1)])],
        };
        let RehearsalResult::Success(perf) = rehearse(&ctx, &casting).unwrap() else {
            panic!("expected success");
        };
        assert!(perf.collisions.is_empty());
        assert_eq!(attribute(&ctx, &perf).unwrap(), casting);
    }

    #[test]
    fn rehearse_rejects_non_candidate() {
        let fix = Fixture::new(&[0, 2], 2, &[], &[(0, 2)]);
        let ctx = fix.ctx();
        // eps = +1 but the first slot sits on the lower actor
        let casting = Casting {
            roles: vec![
                ghost_role(0, GhostSlot::First),
                ghost_role(0, GhostSlot::Second),
            ],
            paths: vec![
                fix.path(&[(0, 0), (1, 1), (0, 2)]),
                fix.path(&[(2, 0), (1, 1), (2, 2)]),
            ],
        };
        assert!(rehearse(&ctx, &casting).is_err());
    }

    #[test]
    fn attribution_follows_swap_principle() {
        // collision of actors 1 and 2 at (3,1); ghosts to a=2 and b=4:
        // the later actor takes the first slot when a comes before b
        let fix = Fixture::new(&[0, 2, 4, 6], 2, &[0, 6], &[(2, 4)]);
        let ctx = fix.ctx();
        let v = fix.lattice.vertex_at(3, 1).unwrap();
        let perf = Performance {
            collisions: vec![CollisionRecord {
                vertex: v,
                actors: (1, 2),
                pair: 0,
                incoming: (fix.path(&[(2, 0), (3, 1)]), fix.path(&[(4, 0), (3, 1)])),
            }],
            survivor_paths: [
                (0, fix.path(&[(0, 0), (-1, 1), (0, 2)])),
                (3, fix.path(&[(6, 0), (7, 1), (6, 2)])),
            ]
            .into_iter()
            .collect(),
            ghost_paths: vec![(fix.path(&[(3, 1), (2, 2)]), fix.path(&[(3, 1), (4, 2)]))],
        };
        let casting = attribute(&ctx, &perf).unwrap();
        assert_eq!(casting.roles[2], ghost_role(0, GhostSlot::First));
        assert_eq!(casting.roles[1], ghost_role(0, GhostSlot::Second));
        assert_eq!(casting.roles[0], Role::Survivor(0));
        assert_eq!(casting.roles[3], Role::Survivor(1));
        assert!(casting.is_candidate(&ctx));
        // rehearsal inverts attribution
        let RehearsalResult::Success(back) = rehearse(&ctx, &casting).unwrap() else {
            panic!("expected success");
        };
        assert_eq!(back, perf);
    }

    #[test]
    fn attribution_reversed_pair_sends_lower_actor_first() {
        // eps = -1: position a sits right of b, the lower actor takes the
        // first slot
        let fix = Fixture::new(&[0, 2], 2, &[], &[(2, 0)]);
        let ctx = fix.ctx();
        let v = fix.lattice.vertex_at(1, 1).unwrap();
        let perf = Performance {
            collisions: vec![CollisionRecord {
                vertex: v,
                actors: (0, 1),
                pair: 0,
                incoming: (fix.path(&[(0, 0), (1, 1)]), fix.path(&[(2, 0), (1, 1)])),
            }],
            survivor_paths: BTreeMap::new(),
            ghost_paths: vec![(fix.path(&[(1, 1), (2, 2)]), fix.path(&[(1, 1), (0, 2)]))],
        };
        let casting = attribute(&ctx, &perf).unwrap();
        assert_eq!(casting.roles[0], ghost_role(0, GhostSlot::First));
        assert_eq!(casting.roles[1], ghost_role(0, GhostSlot::Second));
        assert!(casting.is_candidate(&ctx));
    }

    #[test]
    fn segment_swap_properties() {
        let fix = Fixture::new(&[0, 2], 2, &[0, 2], &[]);
        let ctx = fix.ctx();
        let casting = Casting {
            roles: vec![Role::Survivor(1), Role::Survivor(0)],
            paths: vec![
                fix.path(&[(0, 0), (1, 1), (2, 2)]),
                fix.path(&[(2, 0), (1, 1), (0, 2)]),
            ],
        };
        let v = fix.lattice.vertex_at(1, 1).unwrap();
        let swapped = segment_swap(&casting, 0, 1, v).unwrap();
        // suffixes exchanged, destinations swapped
        assert_eq!(swapped.roles, vec![Role::Survivor(0), Role::Survivor(1)]);
        assert_eq!(swapped.paths[0], fix.path(&[(0, 0), (1, 1), (0, 2)]));
        // involution
        assert_eq!(segment_swap(&swapped, 0, 1, v).unwrap(), casting);
        // weight preserved, sign reversed
        assert_eq!(
            swapped.path_product(ctx.graph),
            casting.path_product(ctx.graph)
        );
        assert_eq!(
            swapped.permutation_sign(&ctx),
            -casting.permutation_sign(&ctx)
        );
        // not through a shared vertex: error
        assert!(segment_swap(&casting, 0, 1, fix.lattice.vertex_at(3, 1).unwrap()).is_err());
    }

    #[test]
    fn global_involution_fixed_point_and_pairing() {
        let fix = Fixture::new(&[0, 2, 4], 2, &[0], &[(2, 2)]);
        let ctx = fix.ctx();
        let successful = Casting {
            roles: vec![
                Role::Survivor(0),
                ghost_role(0, GhostSlot::Second),
                ghost_role(0, GhostSlot::First),
            ],
            paths: vec![
                fix.path(&[(0, 0), (-1, 1), (0, 2)]),
                fix.path(&[(2, 0), (3, 1), (2, 2)]),
                fix.path(&[(4, 0), (3, 1), (2, 2)]),
            ],
        };
        assert_eq!(global_involution(&ctx, &successful).unwrap(), successful);

        let failed = Casting {
            roles: vec![
                ghost_role(0, GhostSlot::Second),
                Role::Survivor(0),
                ghost_role(0, GhostSlot::First),
            ],
            paths: vec![
                fix.path(&[(0, 0), (1, 1), (2, 2)]),
                fix.path(&[(2, 0), (1, 1), (0, 2)]),
                fix.path(&[(4, 0), (3, 1), (2, 2)]),
            ],
        };
        let partner = global_involution(&ctx, &failed).unwrap();
        assert_ne!(partner, failed);
        assert_eq!(global_involution(&ctx, &partner).unwrap(), failed);
        assert_eq!(
            partner.path_product(ctx.graph),
            failed.path_product(ctx.graph)
        );
        assert_eq!(
            partner.permutation_sign(&ctx),
            -failed.permutation_sign(&ctx)
        );
        assert!(partner.is_candidate(&ctx));
    }

    #[test]
    fn enumerate_castings_unreachable_state_is_empty() {
        let lattice = build_lattice_graph(-12, 6, 2, Rat::new(1, 2)).unwrap();
        let sources = vec![
            lattice.vertex_at(0, 0).unwrap(),
            lattice.vertex_at(2, 0).unwrap(),
        ];
        let targets = TargetOrder::new(
            (-12i64..=6)
                .filter(|p| p % 2 == 0)
                .map(|p| lattice.vertex_at(p, 2).unwrap())
                .collect(),
        )
        .unwrap();
        let state = FinalState::new(
            vec![],
            vec![(
                lattice.vertex_at(-10, 2).unwrap(),
                lattice.vertex_at(2, 2).unwrap(),
            )],
        );
        let ctx = StateContext::new(lattice.graph(), &sources, &state, &targets).unwrap();
        assert!(enumerate_candidate_castings(&ctx, 10_000)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn enumerate_castings_counts_and_cross_check() {
        // n=1: every path to the single survivor position
        let fix = Fixture::new(&[0], 2, &[0], &[]);
        let ctx = fix.ctx();
        let castings = enumerate_candidate_castings(&ctx, 10_000).unwrap();
        assert_eq!(castings.len(), 2);

        // n=2, k=1: signed casting sum equals the determinant weight
        let fix = Fixture::new(&[0, 2], 2, &[], &[(0, 2)]);
        let ctx = fix.ctx();
        let castings = enumerate_candidate_castings(&ctx, 10_000).unwrap();
        let mut sum = Rat::zero();
        for c in &castings {
            let sign = c.formal_sign(&ctx) * c.permutation_sign(&ctx);
            let w = c.path_product(ctx.graph);
            if sign < 0 {
                sum -= &w;
            } else {
                sum += &w;
            }
        }
        let z = annihilation_weight(
            &build_matrix(ctx.graph, ctx.sources, ctx.state, ctx.targets).unwrap(),
        )
        .unwrap();
        assert_eq!(sum, z);
    }

    #[test]
    fn casting_cap_enforced() {
        let fix = Fixture::new(&[0, 2], 3, &[-1, 3], &[]);
        let ctx = fix.ctx();
        assert!(matches!(
            enumerate_candidate_castings(&ctx, 3),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn audit_small_instances() {
        // n=2, k=1 over several pair states and horizons
        for t in [2u32, 3] {
            let parity = t as i64 % 2;
            let lo = parity;
            for (a, b) in [(lo, lo + 2), (lo + 2, lo), (lo, lo)] {
                let fix = Fixture::new(&[0, 2], t, &[], &[(a, b)]);
                let ctx = fix.ctx();
                let report = audit_involution(&ctx, 1_000_000).unwrap();
                assert!(
                    report.passed(),
                    "t={t} pair ({a},{b}): {:?}",
                    report.violations
                );
                assert_eq!(report.fixed_points + report.paired, report.checked);
            }
        }

        // n=2, k=0: classical cancellation
        let fix = Fixture::new(&[0, 2], 2, &[0, 2], &[]);
        let report = audit_involution(&fix.ctx(), 1_000_000).unwrap();
        assert!(report.passed(), "{:?}", report.violations);
        assert!(report.paired > 0);

        // n=3, k=1: one survivor
        let fix = Fixture::new(&[0, 2, 4], 2, &[4], &[(0, 2)]);
        let report = audit_involution(&fix.ctx(), 1_000_000).unwrap();
        assert!(report.passed(), "{:?}", report.violations);
        assert!(report.fixed_points > 0);
    }

    #[test]
    fn audit_two_ghost_pairs() {
        // both pairs annihilate: exercises the multi-collision scan, the
        // pair-label bookkeeping, and the 1/k! division
        for pairs in [
            vec![(2i64, 2i64), (4, 4)],
            vec![(4, 4), (2, 2)],
            vec![(0, 2), (4, 6)],
            vec![(2, 0), (6, 4)],
        ] {
            let fix = Fixture::new(&[0, 2, 4, 6], 2, &[], &pairs);
            let ctx = fix.ctx();
            let report = audit_involution(&ctx, 1_000_000).unwrap();
            assert!(report.passed(), "pairs {pairs:?}: {:?}", report.violations);
            assert_eq!(report.fixed_points + report.paired, report.checked);
        }
    }

    /// Three sources funneling through one vertex, then fanning out to
    /// the two ghost positions and the survivor position.
    fn star_instance() -> (SpacetimeGraph, Vec<VertexId>, TargetOrder, FinalState) {
        let graph = SpacetimeGraph::build(
            vec![
                "a".into(),
                "b".into(),
                "c".into(),
                "v".into(),
                "g1".into(),
                "y".into(),
                "g2".into(),
            ],
            vec![
                ("a".into(), "v".into(), Rat::new(1, 2)),
                ("b".into(), "v".into(), Rat::new(1, 3)),
                ("c".into(), "v".into(), Rat::new(1, 5)),
                ("v".into(), "g1".into(), Rat::new(1, 7)),
                ("v".into(), "y".into(), Rat::new(1, 11)),
                ("v".into(), "g2".into(), Rat::new(1, 13)),
            ],
        )
        .unwrap();
        let sources = vec![
            graph.vertex("a").unwrap(),
            graph.vertex("b").unwrap(),
            graph.vertex("c").unwrap(),
        ];
        let targets = TargetOrder::new(vec![
            graph.vertex("g1").unwrap(),
            graph.vertex("y").unwrap(),
            graph.vertex("g2").unwrap(),
        ])
        .unwrap();
        let state = FinalState::new(
            vec![graph.vertex("y").unwrap()],
            vec![(graph.vertex("g1").unwrap(), graph.vertex("g2").unwrap())],
        );
        (graph, sources, targets, state)
    }

    #[test]
    fn high_arity_vertex_processes_consecutive_pair() {
        // all three casting paths pass through v; the scan annihilates the
        // lowest actor pair there and the odd actor walks on through
        let (graph, sources, targets, state) = star_instance();
        let ctx = StateContext::new(&graph, &sources, &state, &targets).unwrap();
        let v = graph.vertex("v").unwrap();
        let path = |from: &str, to: &str| {
            Path::new(vec![
                graph.vertex(from).unwrap(),
                v,
                graph.vertex(to).unwrap(),
            ])
        };

        let casting = Casting {
            roles: vec![
                ghost_role(0, GhostSlot::Second),
                ghost_role(0, GhostSlot::First),
                Role::Survivor(0),
            ],
            paths: vec![path("a", "g2"), path("b", "g1"), path("c", "y")],
        };
        let RehearsalResult::Success(perf) = rehearse(&ctx, &casting).unwrap() else {
            panic!("expected success");
        };
        assert_eq!(perf.collisions.len(), 1);
        assert_eq!(perf.collisions[0].actors, (0, 1));
        assert_eq!(perf.collisions[0].vertex, v);
        // the survivor's path runs through the collision vertex untouched
        assert!(perf.survivor_paths[&2].contains(v));
        assert_eq!(attribute(&ctx, &perf).unwrap(), casting);
        assert_eq!(perf.weight(&ctx), casting.weight(&ctx));

        // survivor role on the lowest actor: its crossing with actor 1 at
        // v is spurious, and the swap partner is the remaining candidate
        let failed = Casting {
            roles: vec![
                Role::Survivor(0),
                ghost_role(0, GhostSlot::Second),
                ghost_role(0, GhostSlot::First),
            ],
            paths: vec![path("a", "y"), path("b", "g2"), path("c", "g1")],
        };
        assert!(failed.is_candidate(&ctx));
        let result = rehearse(&ctx, &failed).unwrap();
        assert_eq!(
            result,
            RehearsalResult::Failure {
                actors: (0, 1),
                vertex: v
            }
        );
        let partner = global_involution(&ctx, &failed).unwrap();
        assert!(partner.is_candidate(&ctx));
        assert_eq!(global_involution(&ctx, &partner).unwrap(), failed);

        // whole-state audit: one fixed point, one cancelling pair
        let report = audit_involution(&ctx, 10_000).unwrap();
        assert!(report.passed(), "{:?}", report.violations);
        assert_eq!(report.checked, 3);
        assert_eq!(report.fixed_points, 1);
        assert_eq!(report.paired, 2);
    }

    #[test]
    fn audit_pure_cancellation_on_funnel_graph() {
        // every source-to-target path runs through m, so every
        // non-colliding assignment crosses: the survivor-only weight is
        // zero and all castings cancel in pairs
        let graph = SpacetimeGraph::build(
            vec![
                "x1".into(),
                "x2".into(),
                "m".into(),
                "y1".into(),
                "y2".into(),
            ],
            vec![
                ("x1".into(), "m".into(), Rat::new(1, 2)),
                ("x2".into(), "m".into(), Rat::new(1, 3)),
                ("m".into(), "y1".into(), Rat::new(1, 5)),
                ("m".into(), "y2".into(), Rat::new(1, 7)),
            ],
        )
        .unwrap();
        let sources = vec![graph.vertex("x1").unwrap(), graph.vertex("x2").unwrap()];
        let targets = TargetOrder::new(vec![
            graph.vertex("y1").unwrap(),
            graph.vertex("y2").unwrap(),
        ])
        .unwrap();
        let state = FinalState::new(
            vec![graph.vertex("y1").unwrap(), graph.vertex("y2").unwrap()],
            vec![],
        );
        let ctx = StateContext::new(&graph, &sources, &state, &targets).unwrap();
        let report = audit_involution(&ctx, 10_000).unwrap();
        assert!(report.passed(), "{:?}", report.violations);
        assert_eq!(report.fixed_points, 0);
        assert_eq!(report.paired, 2);
        assert_eq!(report.formula_weight, Rat::zero());
        assert_eq!(report.cancellation_sum, Rat::zero());
    }
}
