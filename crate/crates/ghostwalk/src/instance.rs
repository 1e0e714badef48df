//! Lattice probability instances.
//!
//! A [`LatticeInstance`] bundles everything a ±1 walk probability
//! computation needs: the padded lattice graph, the source vertices, the
//! final time, and the target order (all same-parity sites at the final
//! time). Padding by the horizon guarantees clipping never affects
//! reachable states, and the same-parity requirement makes order swaps
//! without co-location impossible, so "collision" literally means meeting
//! at a (position, time) vertex.

use crate::error::{Error, Result};
use crate::ghostdet::{self, FinalState, GhostMatrix};
use crate::rat::Rat;
use crate::spacetime::{
    build_lattice_graph, Configuration, LatticeGraph, SpacetimeGraph, TargetOrder, VertexId,
};

pub struct LatticeInstance {
    starts: Vec<i64>,
    horizon: u32,
    lattice: LatticeGraph,
    sources: Vec<VertexId>,
    targets: TargetOrder,
    /// Transition weights from each source to every vertex, computed once.
    weights: Vec<Vec<Rat>>,
}

impl LatticeInstance {
    /// Builds the instance for walkers starting at `starts` (strictly
    /// increasing, all the same parity) over `horizon` time steps, with
    /// step weight 1/2 and the interval padded by the horizon.
    pub fn new(starts: &[i64], horizon: u32) -> Result<Self> {
        if starts.is_empty() {
            return Err(Error::invalid("at least one start position required"));
        }
        for pair in starts.windows(2) {
            if pair[0] >= pair[1] {
                return Err(Error::invalid(
                    "start positions must be strictly increasing",
                ));
            }
        }
        if starts.iter().any(|p| (p - starts[0]).rem_euclid(2) != 0) {
            return Err(Error::invalid(
                "start positions must share a parity; otherwise walkers can swap \
                 order without meeting at a vertex",
            ));
        }
        let min = starts[0] - horizon as i64;
        let max = starts[starts.len() - 1] + horizon as i64;
        let lattice = build_lattice_graph(min, max, horizon, Rat::new(1, 2))?;
        let sources: Vec<VertexId> = starts
            .iter()
            .map(|&p| lattice.vertex_at(p, 0))
            .collect::<Result<_>>()?;
        let parity = (starts[0] + horizon as i64).rem_euclid(2);
        let targets = TargetOrder::new(
            (min..=max)
                .filter(|p| p.rem_euclid(2) == parity)
                .map(|p| lattice.vertex_at(p, horizon))
                .collect::<Result<_>>()?,
        )?;
        let weights = sources
            .iter()
            .map(|&x| lattice.graph().weights_from(x))
            .collect::<Result<_>>()?;
        Ok(LatticeInstance {
            starts: starts.to_vec(),
            horizon,
            lattice,
            sources,
            targets,
            weights,
        })
    }

    pub fn starts(&self) -> &[i64] {
        &self.starts
    }

    pub fn n(&self) -> usize {
        self.starts.len()
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    pub fn lattice(&self) -> &LatticeGraph {
        &self.lattice
    }

    pub fn graph(&self) -> &SpacetimeGraph {
        self.lattice.graph()
    }

    pub fn sources(&self) -> &[VertexId] {
        &self.sources
    }

    /// All same-parity sites at the final time, in increasing position
    /// order.
    pub fn targets(&self) -> &TargetOrder {
        &self.targets
    }

    pub fn configuration(&self) -> Configuration {
        Configuration {
            sources: self.sources.clone(),
            targets: self.targets.clone(),
        }
    }

    /// Vertex of lattice site `p` at the final time.
    pub fn final_vertex(&self, p: i64) -> Result<VertexId> {
        self.lattice.vertex_at(p, self.horizon)
    }

    /// Position of a final-time vertex.
    pub fn final_position(&self, v: VertexId) -> i64 {
        self.lattice.coords(v).0
    }

    /// Cached `W(x_actor -> y)`.
    pub fn transition_weight(&self, actor: usize, y: VertexId) -> &Rat {
        &self.weights[actor][y.index()]
    }

    /// Builds a final state from final-time positions.
    pub fn state_from_positions(
        &self,
        survivors: &[i64],
        ghost_pairs: &[(i64, i64)],
    ) -> Result<FinalState> {
        let state = FinalState::new(
            survivors
                .iter()
                .map(|&p| self.final_vertex(p))
                .collect::<Result<_>>()?,
            ghost_pairs
                .iter()
                .map(|&(a, b)| Ok((self.final_vertex(a)?, self.final_vertex(b)?)))
                .collect::<Result<_>>()?,
        );
        state.validate(&self.targets)?;
        Ok(state)
    }

    /// Final-time positions of a state, for display.
    pub fn positions_of_state(&self, state: &FinalState) -> (Vec<i64>, Vec<(i64, i64)>) {
        (
            state
                .survivors
                .iter()
                .map(|&v| self.final_position(v))
                .collect(),
            state
                .ghost_pairs
                .iter()
                .map(|&(a, b)| (self.final_position(a), self.final_position(b)))
                .collect(),
        )
    }

    pub fn ghost_matrix(&self, state: &FinalState) -> Result<GhostMatrix> {
        ghostdet::build_matrix_with(
            |actor, y| self.transition_weight(actor, y).clone(),
            self.n(),
            state,
            &self.targets,
        )
    }

    /// The formula-side weight of a final state on this instance.
    pub fn formula_weight(&self, state: &FinalState) -> Result<Rat> {
        ghostdet::annihilation_weight(&self.ghost_matrix(state)?)
    }
}
