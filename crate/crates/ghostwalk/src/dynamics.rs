//! Brute-force enumeration oracles.
//!
//! Everything here works by enumerating all `2^(n*t)` elementary
//! evolutions (one ±1 step stream per walker) and simulating the
//! interaction rules exactly:
//!
//! * annihilation: co-located active walkers annihilate in consecutive
//!   actor-index pairs, and the destroyed actors' remaining step streams
//!   continue as the ghost pair's trajectories;
//! * coalescence: co-located entities merge repeatedly into one heir that
//!   carries the sum of the incoming multiplicities and walks the
//!   lowest-index constituent's stream.
//!
//! The oracles produce exact rational probabilities, which the formula
//! modules are tested against with zero tolerance.
//!
//! A note on ghost-pair orientation: a collision's two ghosts are
//! anonymous, so the labeled final state splits each unordered outcome
//! evenly across the two within-pair orientations. Listing each pair in
//! actor-stream order (lower actor's final first) realizes exactly that
//! split, because the step streams of the two destroyed actors range over
//! all combinations symmetrically. [`annihilation_distribution`] therefore
//! matches labeled states on ordered pairs.

use std::collections::BTreeMap;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::ghostdet::FinalState;
use crate::instance::LatticeInstance;
use crate::rat::Rat;
use crate::spacetime::SpacetimeGraph;

/// Default cap on `n * t`, the number of step bits an exhaustive
/// enumeration ranges over.
pub const DEFAULT_BIT_CAP: u32 = 24;

/// One elementary evolution: a ±1 step stream per walker.
#[derive(Clone, Debug)]
pub struct Evolution {
    steps: Vec<Vec<i8>>,
}

impl Evolution {
    pub fn new(steps: Vec<Vec<i8>>) -> Result<Evolution> {
        let t = steps.first().map_or(0, Vec::len);
        for stream in &steps {
            if stream.len() != t {
                return Err(Error::invalid("step streams must share a length"));
            }
            if stream.iter().any(|&s| s != 1 && s != -1) {
                return Err(Error::invalid("steps must be +1 or -1"));
            }
        }
        Ok(Evolution { steps })
    }

    /// Decodes evolution `index` of the `2^(n*t)` product space: bit
    /// `i * t + u` set means walker `i` steps +1 at time `u + 1`.
    pub fn from_index(n: usize, t: u32, index: u64) -> Evolution {
        let steps = (0..n)
            .map(|i| {
                (0..t)
                    .map(|u| {
                        if index >> (i as u32 * t + u) & 1 == 1 {
                            1
                        } else {
                            -1
                        }
                    })
                    .collect()
            })
            .collect();
        Evolution { steps }
    }

    pub fn walker_count(&self) -> usize {
        self.steps.len()
    }

    pub fn len(&self) -> u32 {
        self.steps.first().map_or(0, Vec::len) as u32
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn step(&self, walker: usize, time_index: u32) -> i8 {
        self.steps[walker][time_index as usize]
    }

    /// Displacement of `walker`'s stream over times `from..t` (0-based
    /// step indices).
    fn remaining_displacement(&self, walker: usize, from: u32) -> i64 {
        self.steps[walker][from as usize..]
            .iter()
            .map(|&s| s as i64)
            .sum()
    }
}

/// A collision: two actors annihilating at a site and time.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CollisionEvent {
    pub time: u32,
    pub site: i64,
    /// Actor indices, lower first.
    pub actors: (usize, usize),
}

/// Result of simulating annihilation dynamics on one evolution.
///
/// `ghost_pairs[p]` holds the final positions of the pair born at
/// `collisions[p]`, in actor-stream order: the destroyed lower actor's
/// stream endpoint first.
#[derive(Clone, Debug)]
pub struct AnnihilationOutcome {
    pub collisions: Vec<CollisionEvent>,
    /// Active walkers at the final time as (actor, position), in actor
    /// order.
    pub survivors: Vec<(usize, i64)>,
    pub ghost_pairs: Vec<(i64, i64)>,
}

impl AnnihilationOutcome {
    pub fn k(&self) -> usize {
        self.collisions.len()
    }
}

fn check_starts(starts: &[i64]) -> Result<()> {
    if starts.is_empty() {
        return Err(Error::invalid("at least one walker required"));
    }
    for pair in starts.windows(2) {
        if pair[0] >= pair[1] {
            return Err(Error::invalid(
                "start positions must be strictly increasing",
            ));
        }
    }
    if starts.iter().any(|p| (p - starts[0]).rem_euclid(2) != 0) {
        return Err(Error::invalid("start positions must share a parity"));
    }
    Ok(())
}

/// Simulates annihilation dynamics: at every time step all active walkers
/// move, then walkers sharing a site are sorted by actor index and
/// consecutive pairs annihilate (an odd walker out stays active). The
/// destroyed actors' remaining step streams continue as the ghost pair's
/// trajectories.
pub fn run_annihilation(starts: &[i64], evolution: &Evolution) -> Result<AnnihilationOutcome> {
    check_starts(starts)?;
    let n = starts.len();
    if evolution.walker_count() != n {
        return Err(Error::invalid("evolution walker count mismatch"));
    }
    let t = evolution.len();

    let mut position: Vec<i64> = starts.to_vec();
    let mut active: Vec<bool> = vec![true; n];
    let mut collisions = Vec::new();
    let mut ghost_pairs = Vec::new();

    for u in 0..t {
        for i in 0..n {
            if active[i] {
                position[i] += evolution.step(i, u) as i64;
            }
        }
        // group co-located active walkers; sites are processed
        // independently, actors within a site in index order
        let mut by_site: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
        for i in 0..n {
            if active[i] {
                by_site.entry(position[i]).or_default().push(i);
            }
        }
        for (site, actors) in by_site {
            let mut it = actors.into_iter();
            while let (Some(lo), Some(hi)) = (it.next(), it.next()) {
                active[lo] = false;
                active[hi] = false;
                collisions.push(CollisionEvent {
                    time: u + 1,
                    site,
                    actors: (lo, hi),
                });
                ghost_pairs.push((
                    site + evolution.remaining_displacement(lo, u + 1),
                    site + evolution.remaining_displacement(hi, u + 1),
                ));
            }
        }
    }

    let survivors = (0..n)
        .filter(|&i| active[i])
        .map(|i| (i, position[i]))
        .collect();
    Ok(AnnihilationOutcome {
        collisions,
        survivors,
        ghost_pairs,
    })
}

/// Exact final-state distribution: a map from labeled final states to
/// probabilities.
#[derive(Clone, Debug, Default)]
pub struct DistributionTable {
    entries: BTreeMap<StateKey, Rat>,
}

/// Ordering key: collision count, then survivors, then ghost pairs.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct StateKey {
    k: usize,
    survivors: Vec<u32>,
    ghost_pairs: Vec<(u32, u32)>,
}

impl StateKey {
    fn of(state: &FinalState) -> StateKey {
        StateKey {
            k: state.k(),
            survivors: state.survivors.iter().map(|v| v.0).collect(),
            ghost_pairs: state.ghost_pairs.iter().map(|&(a, b)| (a.0, b.0)).collect(),
        }
    }

    fn state(&self) -> FinalState {
        use crate::spacetime::VertexId;
        FinalState::new(
            self.survivors.iter().map(|&v| VertexId(v)).collect(),
            self.ghost_pairs
                .iter()
                .map(|&(a, b)| (VertexId(a), VertexId(b)))
                .collect(),
        )
    }
}

impl DistributionTable {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn probability(&self, state: &FinalState) -> Rat {
        self.entries
            .get(&StateKey::of(state))
            .cloned()
            .unwrap_or_else(Rat::zero)
    }

    pub fn add(&mut self, state: &FinalState, p: Rat) {
        let slot = self
            .entries
            .entry(StateKey::of(state))
            .or_insert_with(Rat::zero);
        *slot += p;
    }

    /// Exact, order-independent merge of partial tables.
    pub fn merge(&mut self, other: DistributionTable) {
        for (key, p) in other.entries {
            let slot = self.entries.entry(key).or_insert_with(Rat::zero);
            *slot += p;
        }
    }

    pub fn total(&self) -> Rat {
        self.entries.values().sum()
    }

    /// States in canonical order (k, then survivors, then ghost pairs).
    pub fn iter(&self) -> impl Iterator<Item = (FinalState, &Rat)> {
        self.entries.iter().map(|(key, p)| (key.state(), p))
    }

    /// Canonically sorted list of `{state, weight}` records.
    pub fn to_json(&self, graph: &SpacetimeGraph) -> Value {
        Value::Array(
            self.iter()
                .map(|(state, p)| {
                    json!({
                        "state": state.to_json(graph),
                        "weight": p.to_string(),
                    })
                })
                .collect(),
        )
    }
}

fn check_bit_cap(n: usize, t: u32, cap_bits: u32) -> Result<u32> {
    let bits = n as u32 * t;
    if bits > cap_bits || bits >= 63 {
        return Err(Error::CapExceeded {
            what: "evolution enumeration",
            cap: cap_bits as u64,
        });
    }
    Ok(bits)
}

/// Enumerates all evolutions of the instance and tallies labeled final
/// states. Each outcome with `k` physical ghost pairs contributes
/// `(1/2)^(n*t) / k!` per matching labeling of the pairs by `1..k`, pairs
/// matched in actor-stream order.
pub fn annihilation_distribution(
    instance: &LatticeInstance,
    cap_bits: u32,
) -> Result<DistributionTable> {
    let n = instance.n();
    let t = instance.horizon();
    let bits = check_bit_cap(n, t, cap_bits)?;

    // tally (evolution, labeling) incidences as integers, scale once at
    // the end: probability = count * (1/2)^(n*t) / k!
    let mut counts: BTreeMap<StateKey, u64> = BTreeMap::new();
    for index in 0..(1u64 << bits) {
        let evolution = Evolution::from_index(n, t, index);
        let outcome = run_annihilation(instance.starts(), &evolution)?;
        let survivor_positions: Vec<i64> = outcome.survivors.iter().map(|&(_, p)| p).collect();
        for_each_labeling(&outcome.ghost_pairs, &mut |ordering| {
            let state = instance
                .state_from_positions(&survivor_positions, ordering)
                .expect("outcome positions lie in the padded interval");
            *counts.entry(StateKey::of(&state)).or_insert(0) += 1;
        });
    }

    let step_mass = Rat::new(1, 2).pow(bits as i32);
    let mut table = DistributionTable::default();
    for (key, count) in counts {
        let k = key.k;
        let mut k_factorial = Rat::one();
        for i in 2..=k {
            k_factorial *= &Rat::from_int(i as i64);
        }
        let p = Rat::from_int(count as i64) * &step_mass / k_factorial;
        table.entries.insert(key, p);
    }
    Ok(table)
}

/// Calls `f` with every ordering (labeling by 1..k) of the physical pairs.
fn for_each_labeling(pairs: &[(i64, i64)], f: &mut impl FnMut(&[(i64, i64)])) {
    let k = pairs.len();
    if k <= 1 {
        f(pairs);
        return;
    }
    use itertools::Itertools;
    for perm in (0..k).permutations(k) {
        let ordering: Vec<(i64, i64)> = perm.iter().map(|&i| pairs[i]).collect();
        f(&ordering);
    }
}

/// Convenience: the distribution for walkers at `starts` over `t` steps.
pub fn annihilation_distribution_for(
    starts: &[i64],
    t: u32,
    cap_bits: u32,
) -> Result<(LatticeInstance, DistributionTable)> {
    let instance = LatticeInstance::new(starts, t)?;
    let table = annihilation_distribution(&instance, cap_bits)?;
    Ok((instance, table))
}

/// Which constituent's step stream a coalescence heir continues on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeirStream {
    /// The lowest-index constituent's stream (the model's convention).
    LowestIndex,
    /// The highest-index constituent's stream; the even-multiplicity event
    /// is convention-independent, which the tests spot-check with this.
    HighestIndex,
}

/// A visible entity in the coalescence dynamics.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoalescenceEntity {
    pub position: i64,
    /// Number of original walkers this entity represents.
    pub multiplicity: u32,
}

/// One binary merge step of a coalescence run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MergeEvent {
    pub time: u32,
    pub site: i64,
    /// Incoming multiplicities, lower-index constituent first.
    pub multiplicities: (u32, u32),
}

/// Full trace of a coalescence run: final entities plus every binary
/// merge.
#[derive(Clone, Debug)]
pub struct CoalescenceOutcome {
    pub entities: Vec<CoalescenceEntity>,
    pub merges: Vec<MergeEvent>,
}

impl CoalescenceOutcome {
    pub fn all_multiplicities_even(&self) -> bool {
        self.entities.iter().all(|e| e.multiplicity % 2 == 0)
    }
}

/// Simulates coalescence dynamics with the default heir-stream convention.
pub fn run_coalescence(starts: &[i64], evolution: &Evolution) -> Result<CoalescenceOutcome> {
    run_coalescence_with(starts, evolution, HeirStream::LowestIndex)
}

/// Simulates coalescence dynamics: co-located entities merge pairwise by
/// the consecutive-index rule, repeatedly, until each site holds one
/// entity; the heir's multiplicity is the sum of its constituents'.
/// Ghosts carry multiplicity zero and are dropped.
pub fn run_coalescence_with(
    starts: &[i64],
    evolution: &Evolution,
    convention: HeirStream,
) -> Result<CoalescenceOutcome> {
    check_starts(starts)?;
    let n = starts.len();
    if evolution.walker_count() != n {
        return Err(Error::invalid("evolution walker count mismatch"));
    }
    let t = evolution.len();

    // entity = (lowest constituent index, stream index, position, mult)
    struct Entity {
        index: usize,
        stream: usize,
        position: i64,
        multiplicity: u32,
    }
    let mut entities: Vec<Entity> = (0..n)
        .map(|i| Entity {
            index: i,
            stream: i,
            position: starts[i],
            multiplicity: 1,
        })
        .collect();
    let mut merges = Vec::new();

    for u in 0..t {
        for e in &mut entities {
            e.position += evolution.step(e.stream, u) as i64;
        }
        let mut sites: Vec<i64> = entities.iter().map(|e| e.position).collect();
        sites.sort_unstable();
        sites.dedup();
        for site in sites {
            // merge consecutive index pairs until one entity holds the site
            loop {
                let mut here: Vec<usize> = entities
                    .iter()
                    .enumerate()
                    .filter(|(_, e)| e.position == site)
                    .map(|(slot, _)| slot)
                    .collect();
                if here.len() < 2 {
                    break;
                }
                here.sort_by_key(|&slot| entities[slot].index);
                let mut removed = Vec::new();
                for chunk in here.chunks(2) {
                    if let [lo_slot, hi_slot] = *chunk {
                        let (lo_mult, hi_mult) = (
                            entities[lo_slot].multiplicity,
                            entities[hi_slot].multiplicity,
                        );
                        merges.push(MergeEvent {
                            time: u + 1,
                            site,
                            multiplicities: (lo_mult, hi_mult),
                        });
                        let heir_stream = match convention {
                            HeirStream::LowestIndex => entities[lo_slot].stream,
                            HeirStream::HighestIndex => entities[hi_slot].stream,
                        };
                        entities[lo_slot].multiplicity = lo_mult + hi_mult;
                        entities[lo_slot].stream = heir_stream;
                        removed.push(hi_slot);
                    }
                }
                removed.sort_unstable_by(|a, b| b.cmp(a));
                for slot in removed {
                    entities.remove(slot);
                }
            }
        }
    }

    entities.sort_by_key(|e| e.index);
    Ok(CoalescenceOutcome {
        entities: entities
            .into_iter()
            .map(|e| CoalescenceEntity {
                position: e.position,
                multiplicity: e.multiplicity,
            })
            .collect(),
        merges,
    })
}

/// Probability that every final heir has even multiplicity, i.e. that each
/// consecutive pair of walkers has coalesced by time `t`.
pub fn pairwise_coalescence_probability(starts: &[i64], t: u32, cap_bits: u32) -> Result<Rat> {
    check_starts(starts)?;
    let n = starts.len();
    if !n.is_multiple_of(2) {
        return Err(Error::invalid(
            "pairwise coalescence needs an even walker count",
        ));
    }
    let bits = check_bit_cap(n, t, cap_bits)?;
    let mut hits = 0u64;
    for index in 0..(1u64 << bits) {
        let evolution = Evolution::from_index(n, t, index);
        if run_coalescence(starts, &evolution)?.all_multiplicities_even() {
            hits += 1;
        }
    }
    Ok(Rat::from_int(hits as i64) * Rat::new(1, 2).pow(bits as i32))
}

/// Classification of one merge step after parity reclassification.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MergeClass {
    /// odd + odd: two reclassified particles destroy each other.
    Annihilation,
    /// At least one even-parity entity involved; ghosts pass through.
    NonEvent,
}

/// A coalescence trace relabeled by multiplicity parity.
#[derive(Clone, Debug)]
pub struct ReclassifiedTrace {
    pub events: Vec<(MergeEvent, MergeClass)>,
    /// Whether every final heir has even multiplicity.
    pub all_heirs_even: bool,
    /// Whether the reclassified trace is a complete annihilation: the
    /// annihilation events destroy all original walkers pairwise.
    pub complete_annihilation: bool,
}

/// Relabels a coalescence trace by parity of multiplicity: entities of
/// even multiplicity become ghosts, odd ones remain particles. A merge of
/// two odd entities is an annihilation; every other merge is a non-event.
///
/// The trace is a complete annihilation exactly when every final heir has
/// even multiplicity; both computations are returned side by side.
pub fn parity_reclassify(outcome: &CoalescenceOutcome) -> ReclassifiedTrace {
    let events: Vec<(MergeEvent, MergeClass)> = outcome
        .merges
        .iter()
        .map(|merge| {
            let (m1, m2) = merge.multiplicities;
            let class = if m1 % 2 == 1 && m2 % 2 == 1 {
                MergeClass::Annihilation
            } else {
                MergeClass::NonEvent
            };
            (merge.clone(), class)
        })
        .collect();

    let n: u32 = outcome.entities.iter().map(|e| e.multiplicity).sum();
    let annihilations = events
        .iter()
        .filter(|(_, class)| *class == MergeClass::Annihilation)
        .count() as u32;
    // each odd+odd merge removes two odd-parity entities; complete
    // annihilation means all n original walkers went in pairs
    let complete_annihilation = 2 * annihilations == n;
    let all_heirs_even = outcome.all_multiplicities_even();
    debug_assert_eq!(complete_annihilation, all_heirs_even);

    ReclassifiedTrace {
        events,
        all_heirs_even,
        complete_annihilation,
    }
}

/// Total weight of evolutions in which the adjacent walkers `pair` and
/// `pair + 1` (1-based) annihilate with each other as the only collision,
/// their ghost pair finishes at `{a, b}`, and the remaining walkers finish
/// at `survivor_targets` without ever colliding.
///
/// The target layout must satisfy `a < y_1 < ... < y_(n-2) < b`.
pub fn prescribed_annihilation_weight(
    starts: &[i64],
    pair: usize,
    a: i64,
    survivor_targets: &[i64],
    b: i64,
    t: u32,
    cap_bits: u32,
) -> Result<Rat> {
    check_starts(starts)?;
    let n = starts.len();
    if pair == 0 || pair >= n {
        return Err(Error::invalid(format!(
            "pair index must name adjacent walkers 1..{}",
            n - 1
        )));
    }
    if survivor_targets.len() != n - 2 {
        return Err(Error::invalid(format!(
            "expected {} survivor targets",
            n - 2
        )));
    }
    let mut chain = Vec::with_capacity(n);
    chain.push(a);
    chain.extend_from_slice(survivor_targets);
    chain.push(b);
    for w in chain.windows(2) {
        if w[0] >= w[1] {
            return Err(Error::invalid(
                "prescribed targets must satisfy a < y_1 < ... < b",
            ));
        }
    }

    let bits = check_bit_cap(n, t, cap_bits)?;
    let actors = (pair - 1, pair);
    let mut hits = 0u64;
    for index in 0..(1u64 << bits) {
        let evolution = Evolution::from_index(n, t, index);
        let outcome = run_annihilation(starts, &evolution)?;
        if outcome.k() != 1 || outcome.collisions[0].actors != actors {
            continue;
        }
        let (f1, f2) = outcome.ghost_pairs[0];
        if (f1.min(f2), f1.max(f2)) != (a, b) {
            continue;
        }
        let mut finals: Vec<i64> = outcome.survivors.iter().map(|&(_, p)| p).collect();
        finals.sort_unstable();
        if finals == survivor_targets {
            hits += 1;
        }
    }
    Ok(Rat::from_int(hits as i64) * Rat::new(1, 2).pow(bits as i32))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn evo(streams: &[&[i8]]) -> Evolution {
        Evolution::new(streams.iter().map(|s| s.to_vec()).collect()).unwrap()
    }

    #[test]
    fn run_annihilation_meeting_pair() {
        let out = run_annihilation(&[0, 2], &evo(&[&[1], &[-1]])).unwrap();
        assert_eq!(out.k(), 1);
        assert_eq!(
            out.collisions[0],
            CollisionEvent {
                time: 1,
                site: 1,
                actors: (0, 1)
            }
        );
        // no remaining steps: both ghosts finish at the collision site
        assert_eq!(out.ghost_pairs[0], (1, 1));
        assert!(out.survivors.is_empty());
    }

    #[test]
    fn run_annihilation_diverging_pair() {
        let out = run_annihilation(&[0, 2], &evo(&[&[-1], &[1]])).unwrap();
        assert_eq!(out.k(), 0);
        assert_eq!(out.survivors, vec![(0, -1), (1, 3)]);
    }

    #[test]
    fn run_annihilation_triple_meeting() {
        // all three meet at site 2 at time 1: the first consecutive pair
        // annihilates, the last walker stays active
        let out = run_annihilation(&[1, 3, 1], &evo(&[&[1], &[-1], &[1]])).unwrap_err();
        // starts must be strictly increasing; rebuild properly below
        assert!(matches!(out, Error::InvalidArgument(_)));

        let out = run_annihilation(&[-1, 1, 3], &evo(&[&[1], &[1], &[-1]])).unwrap();
        // positions after the step: 0, 2, 2 -> only walkers 1 and 2 meet
        assert_eq!(out.k(), 1);
        assert_eq!(out.collisions[0].actors, (1, 2));
        assert_eq!(out.survivors, vec![(0, 0)]);
    }

    #[test]
    fn run_annihilation_three_at_one_site() {
        let out = run_annihilation(&[0, 2, 4], &evo(&[&[1, 1], &[-1, 1], &[-1, -1]])).unwrap();
        // time 1: positions 1, 1, 3 -> actors (0,1) annihilate at 1
        // time 2: walker 2 continues to 2
        assert_eq!(out.k(), 1);
        assert_eq!(out.collisions[0].actors, (0, 1));
        assert_eq!(out.survivors, vec![(2, 2)]);
        // ghost streams: actor 0 walks +1 to 2, actor 1 walks +1 to 2
        assert_eq!(out.ghost_pairs[0], (2, 2));
    }

    #[test]
    fn ghost_pair_stream_order() {
        // collision at time 1 site 1; remaining steps differ per stream
        let out = run_annihilation(&[0, 2], &evo(&[&[1, -1], &[-1, 1]])).unwrap();
        assert_eq!(out.ghost_pairs[0], (0, 2));
        let out = run_annihilation(&[0, 2], &evo(&[&[1, 1], &[-1, -1]])).unwrap();
        assert_eq!(out.ghost_pairs[0], (2, 0));
    }

    #[test]
    fn distribution_two_walkers_one_step() {
        let (inst, table) = annihilation_distribution_for(&[0, 2], 1, DEFAULT_BIT_CAP).unwrap();
        assert_eq!(table.len(), 4);
        let collided = inst.state_from_positions(&[], &[(1, 1)]).unwrap();
        assert_eq!(table.probability(&collided), Rat::new(1, 4));
        for survivors in [[-1, 1], [-1, 3], [1, 3]] {
            let state = inst.state_from_positions(&survivors, &[]).unwrap();
            assert_eq!(table.probability(&state), Rat::new(1, 4), "{survivors:?}");
        }
        assert_eq!(table.total(), Rat::one());
    }

    #[test]
    fn distribution_two_walkers_two_steps_orientation_split() {
        // the physical pair {0,2} carries mass 1/8, split evenly across
        // the two labeled orientations
        let (inst, table) = annihilation_distribution_for(&[0, 2], 2, DEFAULT_BIT_CAP).unwrap();
        let oriented = inst.state_from_positions(&[], &[(0, 2)]).unwrap();
        let reversed = inst.state_from_positions(&[], &[(2, 0)]).unwrap();
        let diag0 = inst.state_from_positions(&[], &[(0, 0)]).unwrap();
        let diag2 = inst.state_from_positions(&[], &[(2, 2)]).unwrap();
        assert_eq!(table.probability(&oriented), Rat::new(1, 16));
        assert_eq!(table.probability(&reversed), Rat::new(1, 16));
        assert_eq!(table.probability(&diag0), Rat::new(1, 8));
        assert_eq!(table.probability(&diag2), Rat::new(1, 8));
        assert_eq!(table.total(), Rat::one());
    }

    #[test]
    fn distribution_single_walker_matches_walk_law() {
        let (inst, table) = annihilation_distribution_for(&[0], 3, DEFAULT_BIT_CAP).unwrap();
        assert_eq!(table.total(), Rat::one());
        for (state, p) in table.iter() {
            assert_eq!(state.k(), 0);
            let (positions, _) = inst.positions_of_state(&state);
            let w = inst
                .graph()
                .path_generating_function(
                    inst.sources()[0],
                    inst.final_vertex(positions[0]).unwrap(),
                )
                .unwrap();
            assert_eq!(*p, w);
        }
    }

    #[test]
    fn distribution_totals_one() {
        for (starts, t) in [
            (&[0i64, 2][..], 3u32),
            (&[0, 2, 4][..], 2),
            (&[0, 4][..], 2),
        ] {
            let (_, table) = annihilation_distribution_for(starts, t, DEFAULT_BIT_CAP).unwrap();
            assert_eq!(table.total(), Rat::one(), "starts {starts:?} t {t}");
        }
    }

    #[test]
    fn distribution_merge_is_order_independent() {
        // partition the evolution space, build partial tables, merge in
        // two different orders
        let inst = LatticeInstance::new(&[0, 2], 2).unwrap();
        let bits = 4u32;
        let mut chunks: Vec<DistributionTable> = Vec::new();
        for chunk in 0..4u64 {
            let mut counts = DistributionTable::default();
            for index in (chunk * 4)..((chunk + 1) * 4) {
                let evolution = Evolution::from_index(2, 2, index);
                let outcome = run_annihilation(&[0, 2], &evolution).unwrap();
                let survivors: Vec<i64> = outcome.survivors.iter().map(|&(_, p)| p).collect();
                for_each_labeling(&outcome.ghost_pairs, &mut |ordering| {
                    let state = inst.state_from_positions(&survivors, ordering).unwrap();
                    let mut k_fact = Rat::one();
                    for i in 2..=state.k() {
                        k_fact *= &Rat::from_int(i as i64);
                    }
                    counts.add(&state, Rat::new(1, 2).pow(bits as i32) / k_fact);
                });
            }
            chunks.push(counts);
        }
        let mut forward = DistributionTable::default();
        for c in chunks.clone() {
            forward.merge(c);
        }
        let mut backward = DistributionTable::default();
        for c in chunks.into_iter().rev() {
            backward.merge(c);
        }
        let fwd: Vec<_> = forward.iter().map(|(s, p)| (s, p.clone())).collect();
        let bwd: Vec<_> = backward.iter().map(|(s, p)| (s, p.clone())).collect();
        assert_eq!(fwd, bwd);
        assert_eq!(
            forward.total(),
            annihilation_distribution(&inst, 24).unwrap().total()
        );
    }

    #[test]
    fn bit_cap_enforced() {
        let inst = LatticeInstance::new(&[0, 2], 4).unwrap();
        let err = annihilation_distribution(&inst, 7).unwrap_err();
        assert!(matches!(err, Error::CapExceeded { .. }));
    }

    #[test]
    fn distribution_matches_formula_off_origin() {
        // shifted, odd-parity starts: nothing anchors the lattice at zero
        for (starts, t) in [
            (&[-3i64, 1][..], 2u32),
            (&[-5, -1, 3][..], 2),
            (&[7, 9][..], 3),
        ] {
            let (inst, table) = annihilation_distribution_for(starts, t, DEFAULT_BIT_CAP).unwrap();
            assert_eq!(table.total(), Rat::one());
            for (state, p) in table.iter() {
                assert_eq!(
                    inst.formula_weight(&state).unwrap(),
                    *p,
                    "starts {starts:?} t {t} state {state:?}"
                );
            }
        }
    }

    #[test]
    fn table_export_is_canonically_sorted() {
        let (inst, table) = annihilation_distribution_for(&[0, 2], 1, DEFAULT_BIT_CAP).unwrap();
        let records = table.to_json(inst.graph());
        let records = records.as_array().unwrap();
        assert_eq!(records.len(), 4);
        // collision count ascends; every weight is a p/q string
        let ks: Vec<u64> = records
            .iter()
            .map(|r| r["state"]["k"].as_u64().unwrap())
            .collect();
        assert_eq!(ks, vec![0, 0, 0, 1]);
        for r in records {
            let w: Rat = r["weight"].as_str().unwrap().parse().unwrap();
            assert_eq!(w, Rat::new(1, 4));
        }
    }

    #[test]
    fn coalescence_pair_merges() {
        let out = run_coalescence(&[0, 2], &evo(&[&[1], &[-1]])).unwrap();
        assert_eq!(out.entities.len(), 1);
        assert_eq!(out.entities[0].multiplicity, 2);
        assert_eq!(out.merges.len(), 1);
        assert_eq!(out.merges[0].multiplicities, (1, 1));
    }

    #[test]
    fn coalescence_never_meeting() {
        let out = run_coalescence(&[0, 2], &evo(&[&[-1], &[1]])).unwrap();
        assert_eq!(out.entities.len(), 2);
        assert!(out.entities.iter().all(|e| e.multiplicity == 1));
    }

    #[test]
    fn coalescence_two_pairs() {
        // pairs (0,1) and (2,3) each meet at time 1
        let out = run_coalescence(&[0, 2, 6, 8], &evo(&[&[1], &[-1], &[1], &[-1]])).unwrap();
        assert_eq!(out.entities.len(), 2);
        assert!(out.entities.iter().all(|e| e.multiplicity == 2));
        assert!(out.all_multiplicities_even());
    }

    #[test]
    fn coalescence_triple_merge_counts_multiplicities() {
        // walkers at 0 and 2 merge at time 1 (site 1), heir walks stream 0
        // (+1 to site 2) and merges with walker 2 arriving from 4
        let out = run_coalescence(&[0, 2, 4], &evo(&[&[1, 1], &[-1, 1], &[-1, -1]])).unwrap();
        assert_eq!(out.entities.len(), 1);
        assert_eq!(out.entities[0].multiplicity, 3);
        assert_eq!(out.merges.len(), 2);
        assert_eq!(out.merges[0].multiplicities, (1, 1));
        assert_eq!(out.merges[1].multiplicities, (2, 1));
    }

    #[test]
    fn pairwise_coalescence_examples() {
        assert_eq!(
            pairwise_coalescence_probability(&[0, 2], 1, DEFAULT_BIT_CAP).unwrap(),
            Rat::new(1, 4)
        );
        assert_eq!(
            pairwise_coalescence_probability(&[0, 4], 1, DEFAULT_BIT_CAP).unwrap(),
            Rat::zero()
        );
        assert_eq!(
            pairwise_coalescence_probability(&[0, 2], 2, DEFAULT_BIT_CAP).unwrap(),
            Rat::new(3, 8)
        );
    }

    #[test]
    fn heir_stream_convention_does_not_change_event() {
        for t in 1..=3u32 {
            let starts = [0i64, 2, 4, 6];
            let bits = 4 * t;
            let mut lo_hits = 0u64;
            let mut hi_hits = 0u64;
            for index in 0..(1u64 << bits) {
                let evolution = Evolution::from_index(4, t, index);
                if run_coalescence_with(&starts, &evolution, HeirStream::LowestIndex)
                    .unwrap()
                    .all_multiplicities_even()
                {
                    lo_hits += 1;
                }
                if run_coalescence_with(&starts, &evolution, HeirStream::HighestIndex)
                    .unwrap()
                    .all_multiplicities_even()
                {
                    hi_hits += 1;
                }
            }
            assert_eq!(lo_hits, hi_hits, "t = {t}");
        }
    }

    #[test]
    fn parity_reclassification_table() {
        // odd + odd: a plain pair merge
        let out = run_coalescence(&[0, 2], &evo(&[&[1], &[-1]])).unwrap();
        let trace = parity_reclassify(&out);
        assert_eq!(trace.events[0].1, MergeClass::Annihilation);
        assert!(trace.complete_annihilation);

        // odd + even: a merged pair's heir absorbs a third walker
        let out = run_coalescence(&[0, 2, 4], &evo(&[&[1, 1], &[-1, 1], &[-1, -1]])).unwrap();
        let trace = parity_reclassify(&out);
        assert_eq!(trace.events[0].0.multiplicities, (1, 1));
        assert_eq!(trace.events[0].1, MergeClass::Annihilation);
        assert_eq!(trace.events[1].0.multiplicities, (2, 1));
        assert_eq!(trace.events[1].1, MergeClass::NonEvent);
        assert!(!trace.complete_annihilation);

        // even + even: two merged pairs' heirs meet
        let out = run_coalescence(
            &[0, 2, 4, 6],
            &evo(&[&[1, 1, 1], &[-1, -1, -1], &[1, -1, -1], &[-1, -1, -1]]),
        )
        .unwrap();
        let trace = parity_reclassify(&out);
        assert_eq!(trace.events.len(), 3);
        assert_eq!(trace.events[2].0.multiplicities, (2, 2));
        assert_eq!(trace.events[2].1, MergeClass::NonEvent);
        assert!(trace.complete_annihilation);
        assert!(trace.all_heirs_even);
    }

    #[test]
    fn reclassification_soundness_exhaustive() {
        // complete-annihilation verdict must match the even-multiplicity
        // predicate on every evolution
        for (starts, t) in [(&[0i64, 2][..], 3u32), (&[0, 2, 4, 6][..], 2)] {
            let n = starts.len();
            for index in 0..(1u64 << (n as u32 * t)) {
                let evolution = Evolution::from_index(n, t, index);
                let outcome = run_coalescence(starts, &evolution).unwrap();
                let trace = parity_reclassify(&outcome);
                assert_eq!(trace.complete_annihilation, trace.all_heirs_even);
            }
        }
    }

    #[test]
    fn prescribed_matches_pair_resolved_distribution_for_two_walkers() {
        // with no third walker the constraint is vacuous: the prescribed
        // weight is the total mass of the unordered pair {a, b}
        let (inst, table) = annihilation_distribution_for(&[0, 2], 3, DEFAULT_BIT_CAP).unwrap();
        for (a, b) in [(-1i64, 1i64), (-1, 3), (1, 3), (-3, 5)] {
            let expected = table.probability(&inst.state_from_positions(&[], &[(a, b)]).unwrap())
                + table.probability(&inst.state_from_positions(&[], &[(b, a)]).unwrap());
            let got =
                prescribed_annihilation_weight(&[0, 2], 1, a, &[], b, 3, DEFAULT_BIT_CAP).unwrap();
            assert_eq!(got, expected, "pair ({a},{b})");
        }
    }

    #[test]
    fn prescribed_unreachable_tuple_is_zero() {
        // parity-unreachable positions
        let w =
            prescribed_annihilation_weight(&[0, 2, 4], 1, -3, &[0], 3, 4, DEFAULT_BIT_CAP).unwrap();
        assert_eq!(w, Rat::zero());
    }

    #[test]
    fn prescribed_rejects_malformed_ordering() {
        assert!(
            prescribed_annihilation_weight(&[0, 2, 4], 1, 2, &[0], 4, 4, DEFAULT_BIT_CAP).is_err()
        );
        assert!(
            prescribed_annihilation_weight(&[0, 2, 4], 3, -2, &[0], 2, 4, DEFAULT_BIT_CAP).is_err()
        );
    }
}
