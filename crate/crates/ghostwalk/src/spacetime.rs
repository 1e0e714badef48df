//! Weighted spacetime DAGs, path enumeration, and structural checkers.
//!
//! A spacetime graph is a finite DAG with exact rational edge weights. Its
//! directed paths model walker trajectories; the acyclic structure induces
//! the time ordering. The module provides:
//!
//! * construction of general DAGs and of the ±1 walk lattice,
//! * the path generating function `W(x -> y)` (sum over all directed paths
//!   of the product of edge weights), computed by dynamic programming,
//! * exhaustive path enumeration with a resource cap, used by the
//!   structural checkers and the proof-machinery audits,
//! * checkers for the crossing property and the consecutive-collision
//!   property of a source/target configuration.

use std::collections::HashMap;
use std::fmt;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::rat::Rat;

/// Default cap on the number of paths a single exhaustive enumeration may
/// produce. Checkers and audits work at desk scale.
pub const DEFAULT_PATH_CAP: usize = 1_000_000;

/// Index of a vertex within its graph.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexId(pub u32);

impl VertexId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Debug for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

/// A finite weighted DAG with a stored topological order.
///
/// Immutable after construction; all queries are pure.
#[derive(Debug)]
pub struct SpacetimeGraph {
    labels: Vec<String>,
    index: HashMap<String, VertexId>,
    out: Vec<Vec<(VertexId, Rat)>>,
    topo: Vec<VertexId>,
    /// Position of each vertex in `topo`.
    topo_pos: Vec<usize>,
    /// Longest-path depth of each vertex; the canonical time coordinate.
    /// On a lattice this equals the literal time of the vertex.
    level: Vec<u32>,
}

impl SpacetimeGraph {
    /// Builds a graph from vertex labels and weighted edges given by label.
    ///
    /// Rejects duplicate labels, unknown endpoints, parallel edges, and
    /// cyclic edge relations.
    pub fn build(vertices: Vec<String>, edges: Vec<(String, String, Rat)>) -> Result<Self> {
        let n = vertices.len();
        let mut index = HashMap::with_capacity(n);
        for (i, label) in vertices.iter().enumerate() {
            if index.insert(label.clone(), VertexId(i as u32)).is_some() {
                return Err(Error::invalid(format!("duplicate vertex label {label:?}")));
            }
        }
        let mut out: Vec<Vec<(VertexId, Rat)>> = vec![Vec::new(); n];
        for (from, to, w) in edges {
            let &u = index
                .get(&from)
                .ok_or_else(|| Error::invalid(format!("unknown edge source {from:?}")))?;
            let &v = index
                .get(&to)
                .ok_or_else(|| Error::invalid(format!("unknown edge target {to:?}")))?;
            if out[u.index()].iter().any(|(t, _)| *t == v) {
                return Err(Error::invalid(format!("parallel edge {from:?} -> {to:?}")));
            }
            out[u.index()].push((v, w));
        }

        // Kahn's algorithm; processing pending vertices in ascending index
        // order makes the stored topological order deterministic.
        let mut in_deg = vec![0usize; n];
        for row in &out {
            for (v, _) in row {
                in_deg[v.index()] += 1;
            }
        }
        let mut pending: Vec<usize> = (0..n).filter(|&i| in_deg[i] == 0).collect();
        pending.sort_unstable_by(|a, b| b.cmp(a)); // min at the end
        let mut topo = Vec::with_capacity(n);
        while let Some(u) = pending.pop() {
            topo.push(VertexId(u as u32));
            let mut released = Vec::new();
            for (v, _) in &out[u] {
                in_deg[v.index()] -= 1;
                if in_deg[v.index()] == 0 {
                    released.push(v.index());
                }
            }
            released.sort_unstable();
            for v in released.into_iter().rev() {
                pending.push(v);
            }
            pending.sort_unstable_by(|a, b| b.cmp(a));
        }
        if topo.len() != n {
            return Err(Error::invalid("edge relation has a cycle"));
        }

        let mut topo_pos = vec![0usize; n];
        for (pos, v) in topo.iter().enumerate() {
            topo_pos[v.index()] = pos;
        }
        let mut level = vec![0u32; n];
        for &u in &topo {
            for (v, _) in &out[u.index()] {
                level[v.index()] = level[v.index()].max(level[u.index()] + 1);
            }
        }

        Ok(SpacetimeGraph {
            labels: vertices,
            index,
            out,
            topo,
            topo_pos,
            level,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.out.iter().map(Vec::len).sum()
    }

    pub fn vertex(&self, label: &str) -> Option<VertexId> {
        self.index.get(label).copied()
    }

    pub fn label(&self, v: VertexId) -> &str {
        &self.labels[v.index()]
    }

    pub fn out_edges(&self, v: VertexId) -> &[(VertexId, Rat)] {
        &self.out[v.index()]
    }

    /// Longest-path depth; the canonical time coordinate of a vertex.
    pub fn level(&self, v: VertexId) -> u32 {
        self.level[v.index()]
    }

    pub fn edge_weight(&self, u: VertexId, v: VertexId) -> Option<&Rat> {
        self.out[u.index()]
            .iter()
            .find(|(t, _)| *t == v)
            .map(|(_, w)| w)
    }

    fn check_vertex(&self, v: VertexId) -> Result<()> {
        if v.index() >= self.labels.len() {
            return Err(Error::invalid(format!("vertex {v:?} not in graph")));
        }
        Ok(())
    }

    /// Path generating functions from `x` to every vertex, by dynamic
    /// programming along the topological order. `W(x -> x) = 1` (the empty
    /// path).
    pub fn weights_from(&self, x: VertexId) -> Result<Vec<Rat>> {
        self.check_vertex(x)?;
        let mut w = vec![Rat::zero(); self.labels.len()];
        w[x.index()] = Rat::one();
        for &u in &self.topo[self.topo_pos[x.index()]..] {
            if w[u.index()].is_zero() {
                continue;
            }
            let wu = w[u.index()].clone();
            for (v, ew) in &self.out[u.index()] {
                w[v.index()] += &(&wu * ew);
            }
        }
        Ok(w)
    }

    /// `W(x -> y)`: the sum over all directed paths from `x` to `y` of the
    /// product of edge weights.
    pub fn path_generating_function(&self, x: VertexId, y: VertexId) -> Result<Rat> {
        self.check_vertex(y)?;
        Ok(self.weights_from(x)?[y.index()].clone())
    }

    /// All distinct directed paths from `x` to `y`, capped at `cap` paths.
    pub fn enumerate_paths(&self, x: VertexId, y: VertexId, cap: usize) -> Result<Vec<Path>> {
        self.check_vertex(x)?;
        self.check_vertex(y)?;

        // prune via reverse reachability from y
        let n = self.labels.len();
        let mut reaches = vec![false; n];
        reaches[y.index()] = true;
        for &u in self.topo.iter().rev() {
            if reaches[u.index()] {
                continue;
            }
            reaches[u.index()] = self.out[u.index()].iter().any(|(v, _)| reaches[v.index()]);
        }
        if !reaches[x.index()] {
            return Ok(Vec::new());
        }

        let mut paths = Vec::new();
        let mut current = vec![x];
        self.dfs_paths(y, cap, &reaches, &mut current, &mut paths)?;
        Ok(paths)
    }

    fn dfs_paths(
        &self,
        y: VertexId,
        cap: usize,
        reaches: &[bool],
        current: &mut Vec<VertexId>,
        paths: &mut Vec<Path>,
    ) -> Result<()> {
        let u = *current.last().expect("non-empty path stack");
        if u == y {
            if paths.len() >= cap {
                return Err(Error::CapExceeded {
                    what: "path enumeration",
                    cap: cap as u64,
                });
            }
            paths.push(Path {
                vertices: current.clone(),
            });
            // y has no outgoing edge back to itself in a DAG; any further
            // exploration below is pruned by `reaches`.
        }
        for (v, _) in &self.out[u.index()] {
            if reaches[v.index()] {
                current.push(*v);
                self.dfs_paths(y, cap, reaches, current, paths)?;
                current.pop();
            }
        }
        Ok(())
    }
}

/// A directed path, stored as its vertex sequence.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Path {
    vertices: Vec<VertexId>,
}

impl Path {
    pub fn new(vertices: Vec<VertexId>) -> Path {
        assert!(!vertices.is_empty(), "a path has at least one vertex");
        Path { vertices }
    }

    pub fn vertices(&self) -> &[VertexId] {
        &self.vertices
    }

    pub fn start(&self) -> VertexId {
        self.vertices[0]
    }

    pub fn end(&self) -> VertexId {
        *self.vertices.last().expect("non-empty")
    }

    pub fn len(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.vertices.contains(&v)
    }

    /// Product of edge weights along the path; 1 for the empty path.
    pub fn weight(&self, graph: &SpacetimeGraph) -> Rat {
        let mut w = Rat::one();
        for pair in self.vertices.windows(2) {
            let ew = graph
                .edge_weight(pair[0], pair[1])
                .expect("path edge exists in graph");
            w *= ew;
        }
        w
    }

    /// Splits at the first occurrence of `v`: the prefix ends at `v`, the
    /// suffix starts at `v`.
    pub fn split_at_vertex(&self, v: VertexId) -> Option<(Path, Path)> {
        let pos = self.vertices.iter().position(|&u| u == v)?;
        Some((
            Path::new(self.vertices[..=pos].to_vec()),
            Path::new(self.vertices[pos..].to_vec()),
        ))
    }

    /// Joins `self` (ending at v) with `suffix` (starting at v).
    pub fn join(&self, suffix: &Path) -> Path {
        assert_eq!(self.end(), suffix.start(), "join point mismatch");
        let mut vertices = self.vertices.clone();
        vertices.extend_from_slice(&suffix.vertices[1..]);
        Path::new(vertices)
    }

    /// First vertex shared with `other`, in path order. Shared vertices of
    /// two DAG paths are linearly ordered along both paths, so "first" is
    /// unambiguous.
    pub fn first_shared_vertex(&self, other: &Path) -> Option<VertexId> {
        self.vertices.iter().copied().find(|v| other.contains(*v))
    }

    pub fn label_string(&self, graph: &SpacetimeGraph) -> String {
        self.vertices
            .iter()
            .map(|&v| graph.label(v))
            .collect::<Vec<_>>()
            .join(" -> ")
    }
}

impl fmt::Debug for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Path{:?}", self.vertices)
    }
}

/// A linearly ordered set of target vertices. The list order is the order
/// `≺` on the target set; it is caller-supplied and independent of the
/// graph structure.
#[derive(Clone)]
pub struct TargetOrder {
    verts: Vec<VertexId>,
    rank: HashMap<VertexId, usize>,
}

impl TargetOrder {
    pub fn new(verts: Vec<VertexId>) -> Result<Self> {
        let mut rank = HashMap::with_capacity(verts.len());
        for (i, &v) in verts.iter().enumerate() {
            if rank.insert(v, i).is_some() {
                return Err(Error::invalid("duplicate target vertex"));
            }
        }
        Ok(TargetOrder { verts, rank })
    }

    pub fn vertices(&self) -> &[VertexId] {
        &self.verts
    }

    pub fn len(&self) -> usize {
        self.verts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.verts.is_empty()
    }

    pub fn rank(&self, v: VertexId) -> Result<usize> {
        self.rank
            .get(&v)
            .copied()
            .ok_or_else(|| Error::invalid(format!("vertex {v:?} is not a target")))
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.rank.contains_key(&v)
    }
}

/// Ordered sources and targets of a walker configuration. The source list
/// order and the target list order are the linear orders `≺`.
#[derive(Clone)]
pub struct Configuration {
    pub sources: Vec<VertexId>,
    pub targets: TargetOrder,
}

impl Configuration {
    pub fn new(sources: Vec<VertexId>, targets: Vec<VertexId>) -> Result<Self> {
        let mut seen = HashMap::new();
        for (i, &s) in sources.iter().enumerate() {
            if seen.insert(s, i).is_some() {
                return Err(Error::invalid("duplicate source vertex"));
            }
        }
        Ok(Configuration {
            sources,
            targets: TargetOrder::new(targets)?,
        })
    }
}

/// One violation of the crossing property: a pair of sources and a pair of
/// swapped targets joined by vertex-disjoint witness paths.
#[derive(Clone, Debug)]
pub struct CrossingViolation {
    pub sources: (VertexId, VertexId),
    pub targets: (VertexId, VertexId),
    pub witness: (Path, Path),
}

/// One violation of the consecutive-collision property: paths from the
/// outer sources meet at `vertex`, but `free_path` from the middle source
/// neither passes through it nor crosses either outer path beforehand.
#[derive(Clone, Debug)]
pub struct ConsecutiveViolation {
    pub sources: (VertexId, VertexId, VertexId),
    pub vertex: VertexId,
    pub outer_witness: (Path, Path),
    pub free_path: Path,
}

/// Result of an exhaustive structural check.
#[derive(Clone, Debug)]
pub struct PropertyReport<V> {
    pub checked: u64,
    pub violations: Vec<V>,
}

impl<V> PropertyReport<V> {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

fn paths_by_target(
    graph: &SpacetimeGraph,
    source: VertexId,
    targets: &TargetOrder,
    cap: usize,
) -> Result<Vec<Vec<Path>>> {
    targets
        .vertices()
        .iter()
        .map(|&y| graph.enumerate_paths(source, y, cap))
        .collect()
}

/// Exhaustively verifies the crossing property of `config`: for sources
/// `x ≺ x'` and targets `y' ≺ y`, every `x -> y` path shares a vertex with
/// every `x' -> y'` path.
pub fn check_crossing_property(
    graph: &SpacetimeGraph,
    config: &Configuration,
    cap: usize,
) -> Result<PropertyReport<CrossingViolation>> {
    let per_source: Vec<Vec<Vec<Path>>> = config
        .sources
        .iter()
        .map(|&x| paths_by_target(graph, x, &config.targets, cap))
        .collect::<Result<_>>()?;

    let mut checked = 0u64;
    let mut violations = Vec::new();
    let tv = config.targets.vertices();
    for (i, &x) in config.sources.iter().enumerate() {
        for (j, &xp) in config.sources.iter().enumerate().skip(i + 1) {
            for (ty_p, &yp) in tv.iter().enumerate() {
                for (ty, &y) in tv.iter().enumerate().skip(ty_p + 1) {
                    // x ≺ x' with swapped targets y' ≺ y:
                    // paths x -> y versus x' -> y'
                    checked += 1;
                    for p in &per_source[i][ty] {
                        for q in &per_source[j][ty_p] {
                            if p.first_shared_vertex(q).is_none() {
                                violations.push(CrossingViolation {
                                    sources: (x, xp),
                                    targets: (yp, y),
                                    witness: (p.clone(), q.clone()),
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(PropertyReport {
        checked,
        violations,
    })
}

/// Exhaustively verifies the consecutive-collision property: for sources
/// `x ≺ x' ≺ x''`, whenever a path from `x` and a path from `x''` meet at a
/// vertex `v`, every path from `x'` passes through `v` or shares a vertex
/// with one of the two meeting paths strictly before `v`.
pub fn check_consecutive_collision_property(
    graph: &SpacetimeGraph,
    config: &Configuration,
    cap: usize,
) -> Result<PropertyReport<ConsecutiveViolation>> {
    let n = config.sources.len();
    let mut checked = 0u64;
    let mut violations = Vec::new();
    if n < 3 {
        return Ok(PropertyReport {
            checked,
            violations,
        });
    }

    let per_source: Vec<Vec<Path>> = config
        .sources
        .iter()
        .map(|&x| {
            paths_by_target(graph, x, &config.targets, cap)
                .map(|by_target| by_target.into_iter().flatten().collect())
        })
        .collect::<Result<_>>()?;

    for i in 0..n {
        for j in (i + 1)..n {
            for l in (j + 1)..n {
                let (x, xp, xpp) = (config.sources[i], config.sources[j], config.sources[l]);
                for p in &per_source[i] {
                    for q in &per_source[l] {
                        // every shared vertex of (p, q) is a meeting
                        for &v in p.vertices().iter().filter(|&&v| q.contains(v)) {
                            let (p_pre, _) = p.split_at_vertex(v).expect("v on p");
                            let (q_pre, _) = q.split_at_vertex(v).expect("v on q");
                            for r in &per_source[j] {
                                checked += 1;
                                let ok = r.contains(v)
                                    || p_pre
                                        .vertices()
                                        .iter()
                                        .take(p_pre.vertices().len() - 1)
                                        .any(|&u| r.contains(u))
                                    || q_pre
                                        .vertices()
                                        .iter()
                                        .take(q_pre.vertices().len() - 1)
                                        .any(|&u| r.contains(u));
                                if !ok {
                                    violations.push(ConsecutiveViolation {
                                        sources: (x, xp, xpp),
                                        vertex: v,
                                        outer_witness: (p.clone(), q.clone()),
                                        free_path: r.clone(),
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(PropertyReport {
        checked,
        violations,
    })
}

/// The ±1 walk lattice: vertices are (position, time) pairs over a finite
/// position interval, edges step (p, t) -> (p ± 1, t + 1) with a uniform
/// weight, clipped at the interval boundary.
pub struct LatticeGraph {
    graph: SpacetimeGraph,
    min: i64,
    max: i64,
    horizon: u32,
}

/// Vertex label of lattice site `p` at time `t`.
pub fn lattice_label(p: i64, t: u32) -> String {
    format!("{p}@{t}")
}

/// Builds the lattice over positions `min..=max` for `horizon` time steps,
/// every edge carrying `step_weight`.
///
/// Callers that care about probabilities must pad the interval by the
/// horizon so that clipping never affects reachable states.
pub fn build_lattice_graph(
    min: i64,
    max: i64,
    horizon: u32,
    step_weight: Rat,
) -> Result<LatticeGraph> {
    if min > max {
        return Err(Error::invalid(format!(
            "empty position interval [{min}, {max}]"
        )));
    }
    let width = (max - min + 1) as usize;
    let mut vertices = Vec::with_capacity(width * (horizon as usize + 1));
    for t in 0..=horizon {
        for p in min..=max {
            vertices.push(lattice_label(p, t));
        }
    }
    let mut edges = Vec::new();
    for t in 0..horizon {
        for p in min..=max {
            for q in [p - 1, p + 1] {
                if q >= min && q <= max {
                    edges.push((
                        lattice_label(p, t),
                        lattice_label(q, t + 1),
                        step_weight.clone(),
                    ));
                }
            }
        }
    }
    let graph = SpacetimeGraph::build(vertices, edges)?;
    Ok(LatticeGraph {
        graph,
        min,
        max,
        horizon,
    })
}

impl LatticeGraph {
    pub fn graph(&self) -> &SpacetimeGraph {
        &self.graph
    }

    pub fn min(&self) -> i64 {
        self.min
    }

    pub fn max(&self) -> i64 {
        self.max
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    pub fn vertex_at(&self, p: i64, t: u32) -> Result<VertexId> {
        if p < self.min || p > self.max || t > self.horizon {
            return Err(Error::invalid(format!(
                "site ({p}, {t}) outside lattice [{}, {}] x [0, {}]",
                self.min, self.max, self.horizon
            )));
        }
        let width = (self.max - self.min + 1) as usize;
        let idx = t as usize * width + (p - self.min) as usize;
        Ok(VertexId(idx as u32))
    }

    pub fn coords(&self, v: VertexId) -> (i64, u32) {
        let width = (self.max - self.min + 1) as usize;
        let t = v.index() / width;
        let p = self.min + (v.index() % width) as i64;
        (p, t as u32)
    }
}

#[derive(Deserialize)]
struct VertexSpec {
    id: String,
}

#[derive(Deserialize)]
struct EdgeSpec {
    from: String,
    to: String,
    w: Rat,
}

#[derive(Deserialize)]
struct LatticeSpec {
    min: i64,
    max: i64,
    horizon: u32,
    step_w: Rat,
}

#[derive(Deserialize)]
struct GraphFile {
    #[serde(default)]
    vertices: Option<Vec<VertexSpec>>,
    #[serde(default)]
    edges: Option<Vec<EdgeSpec>>,
    #[serde(default)]
    lattice: Option<LatticeSpec>,
}

/// A graph loaded from its JSON description: either an explicit vertex and
/// edge list, or the lattice shorthand.
pub enum LoadedGraph {
    General(SpacetimeGraph),
    Lattice(LatticeGraph),
}

impl LoadedGraph {
    pub fn graph(&self) -> &SpacetimeGraph {
        match self {
            LoadedGraph::General(g) => g,
            LoadedGraph::Lattice(l) => l.graph(),
        }
    }
}

/// Parses a graph description:
/// `{"vertices":[{"id":...}],"edges":[{"from":...,"to":...,"w":"p/q"}]}`
/// or `{"lattice":{"min":..,"max":..,"horizon":..,"step_w":"p/q"}}`.
pub fn graph_from_json(text: &str) -> Result<LoadedGraph> {
    let file: GraphFile =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("graph file: {e}")))?;
    match (file.lattice, file.vertices) {
        (Some(lat), None) => Ok(LoadedGraph::Lattice(build_lattice_graph(
            lat.min,
            lat.max,
            lat.horizon,
            lat.step_w,
        )?)),
        (None, Some(vertices)) => {
            let edges = file
                .edges
                .unwrap_or_default()
                .into_iter()
                .map(|e| (e.from, e.to, e.w))
                .collect();
            Ok(LoadedGraph::General(SpacetimeGraph::build(
                vertices.into_iter().map(|v| v.id).collect(),
                edges,
            )?))
        }
        (Some(_), Some(_)) => Err(Error::Parse(
            "graph file has both a lattice shorthand and an explicit vertex list".into(),
        )),
        (None, None) => Err(Error::Parse(
            "graph file needs either \"vertices\"/\"edges\" or \"lattice\"".into(),
        )),
    }
}
