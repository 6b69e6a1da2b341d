//! Time-series causal graphs over system, context and dummy variables.
//!
//! A node is a variable at a lag (`lag = τ` means time `t - τ`). Lagged links
//! `(i, j, τ)` mean `X^i_{t-τ} -> X^j_t` and stand for every time-shifted copy.
//! Contemporaneous links are stored once per unordered pair under `i < j`.

mod dsep;
mod text;

pub use dsep::{d_separated, UnrolledDag, UnrolledNode};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("variable index {var} out of range ({n_vars} variables)")]
    VarOutOfRange { var: usize, n_vars: usize },
    #[error("lag {lag} exceeds the maximum lag {tau_max}")]
    LagOutOfRange { lag: usize, tau_max: usize },
    #[error("{role} variable {var} only exists at lag 0, got lag {lag}")]
    StaticLag { var: usize, role: VariableRole, lag: usize },
    #[error("variable {0} cannot be linked to itself at lag 0")]
    SelfLoop(usize),
    #[error("a lagged link cannot point backwards in time ({i}, {j}, {lag})")]
    BackwardsInTime { i: usize, j: usize, lag: usize },
    #[error("edge {parent} -> {child} at lag {lag} is not allowed: {reason}")]
    ForbiddenEdge { parent: usize, child: usize, lag: usize, reason: &'static str },
    #[error("contemporaneous cycle through variables {0} and {1}")]
    Cycle(usize, usize),
    #[error("{0} nodes cannot appear in a ground truth graph")]
    DummyInGroundTruth(VariableRole),
    #[error("unroll depth {depth} is smaller than the graph's maximum lag {tau_max}")]
    UnrollDepth { depth: usize, tau_max: usize },
    #[error("invalid d-separation query: {0}")]
    Query(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Role of a variable in the joint causal model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariableRole {
    System,
    TemporalContext,
    SpatialContext,
    LatentTemporalContext,
    LatentSpatialContext,
    TimeDummy,
    SpaceDummy,
}

impl VariableRole {
    pub const ALL: [VariableRole; 7] = [
        VariableRole::System,
        VariableRole::TemporalContext,
        VariableRole::SpatialContext,
        VariableRole::LatentTemporalContext,
        VariableRole::LatentSpatialContext,
        VariableRole::TimeDummy,
        VariableRole::SpaceDummy,
    ];

    pub fn is_system(self) -> bool {
        self == VariableRole::System
    }

    /// Observed or latent context.
    pub fn is_context(self) -> bool {
        matches!(
            self,
            VariableRole::TemporalContext
                | VariableRole::SpatialContext
                | VariableRole::LatentTemporalContext
                | VariableRole::LatentSpatialContext
        )
    }

    pub fn is_observed_context(self) -> bool {
        matches!(self, VariableRole::TemporalContext | VariableRole::SpatialContext)
    }

    pub fn is_latent(self) -> bool {
        matches!(self, VariableRole::LatentTemporalContext | VariableRole::LatentSpatialContext)
    }

    pub fn is_dummy(self) -> bool {
        matches!(self, VariableRole::TimeDummy | VariableRole::SpaceDummy)
    }

    /// Temporal context, observed or latent.
    pub fn is_temporal(self) -> bool {
        matches!(self, VariableRole::TemporalContext | VariableRole::LatentTemporalContext)
    }

    /// Spatial context, observed or latent.
    pub fn is_spatial(self) -> bool {
        matches!(self, VariableRole::SpatialContext | VariableRole::LatentSpatialContext)
    }

    /// Variables represented by a single node at lag 0.
    pub fn is_static(self) -> bool {
        self.is_spatial() || self.is_dummy()
    }

    pub fn name(self) -> &'static str {
        match self {
            VariableRole::System => "system",
            VariableRole::TemporalContext => "temporal_context",
            VariableRole::SpatialContext => "spatial_context",
            VariableRole::LatentTemporalContext => "latent_temporal_context",
            VariableRole::LatentSpatialContext => "latent_spatial_context",
            VariableRole::TimeDummy => "time_dummy",
            VariableRole::SpaceDummy => "space_dummy",
        }
    }

    /// Latent counterpart of an observed context, identity otherwise.
    pub fn as_latent(self) -> VariableRole {
        match self {
            VariableRole::TemporalContext => VariableRole::LatentTemporalContext,
            VariableRole::SpatialContext => VariableRole::LatentSpatialContext,
            r => r,
        }
    }

    /// Observed counterpart of a latent context, identity otherwise.
    pub fn as_observed(self) -> VariableRole {
        match self {
            VariableRole::LatentTemporalContext => VariableRole::TemporalContext,
            VariableRole::LatentSpatialContext => VariableRole::SpatialContext,
            r => r,
        }
    }
}

impl fmt::Display for VariableRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for VariableRole {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        VariableRole::ALL
            .iter()
            .copied()
            .find(|r| r.name() == s)
            .ok_or_else(|| format!("unknown role '{s}'"))
    }
}

/// A variable at time `t - lag`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeRef {
    pub var: usize,
    pub lag: usize,
}

impl NodeRef {
    pub fn new(var: usize, lag: usize) -> Self {
        NodeRef { var, lag }
    }
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, -{})", self.var, self.lag)
    }
}

/// Mark of a link read from the first endpoint to the second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EdgeMark {
    Absent,
    TailHead,
    HeadTail,
    CircleCircle,
    Conflict,
}

impl EdgeMark {
    pub fn reversed(self) -> EdgeMark {
        match self {
            EdgeMark::TailHead => EdgeMark::HeadTail,
            EdgeMark::HeadTail => EdgeMark::TailHead,
            m => m,
        }
    }

    pub fn is_present(self) -> bool {
        self != EdgeMark::Absent
    }

    pub fn symbol(self) -> &'static str {
        match self {
            EdgeMark::Absent => "",
            EdgeMark::TailHead => "-->",
            EdgeMark::HeadTail => "<--",
            EdgeMark::CircleCircle => "o-o",
            EdgeMark::Conflict => "x-x",
        }
    }

    pub fn from_symbol(s: &str) -> Option<EdgeMark> {
        match s {
            "-->" => Some(EdgeMark::TailHead),
            "<--" => Some(EdgeMark::HeadTail),
            "o-o" => Some(EdgeMark::CircleCircle),
            "x-x" => Some(EdgeMark::Conflict),
            _ => None,
        }
    }
}

/// Storage key: lagged `(i, j, τ)` as given, contemporaneous with `i < j`.
pub type LinkKey = (usize, usize, usize);

/// Canonical key and whether the requested orientation was flipped.
pub fn canonical_key(i: usize, j: usize, lag: usize) -> (LinkKey, bool) {
    if lag == 0 && i > j {
        ((j, i, 0), true)
    } else {
        ((i, j, lag), false)
    }
}

/// Estimated or derived time-series graph with per-link marks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeSeriesGraph {
    roles: Vec<VariableRole>,
    tau_max: usize,
    marks: BTreeMap<LinkKey, EdgeMark>,
}

impl TimeSeriesGraph {
    pub fn new(roles: Vec<VariableRole>, tau_max: usize) -> Self {
        TimeSeriesGraph { roles, tau_max, marks: BTreeMap::new() }
    }

    pub fn n_vars(&self) -> usize {
        self.roles.len()
    }

    pub fn tau_max(&self) -> usize {
        self.tau_max
    }

    pub fn roles(&self) -> &[VariableRole] {
        &self.roles
    }

    pub fn role(&self, var: usize) -> VariableRole {
        self.roles[var]
    }

    pub fn vars_with(&self, pred: impl Fn(VariableRole) -> bool) -> Vec<usize> {
        (0..self.n_vars()).filter(|&v| pred(self.roles[v])).collect()
    }

    fn check_link(&self, i: usize, j: usize, lag: usize) -> Result<(), GraphError> {
        let n = self.n_vars();
        for v in [i, j] {
            if v >= n {
                return Err(GraphError::VarOutOfRange { var: v, n_vars: n });
            }
        }
        if lag > self.tau_max {
            return Err(GraphError::LagOutOfRange { lag, tau_max: self.tau_max });
        }
        if lag == 0 && i == j {
            return Err(GraphError::SelfLoop(i));
        }
        if lag > 0 {
            for v in [i, j] {
                if self.roles[v].is_static() {
                    return Err(GraphError::StaticLag { var: v, role: self.roles[v], lag });
                }
            }
        }
        Ok(())
    }

    /// Mark of the link between `X^i_{t-τ}` and `X^j_t`; absent when out of range.
    pub fn mark(&self, i: usize, j: usize, lag: usize) -> EdgeMark {
        let (key, flipped) = canonical_key(i, j, lag);
        match self.marks.get(&key) {
            Some(&m) if flipped => m.reversed(),
            Some(&m) => m,
            None => EdgeMark::Absent,
        }
    }

    pub fn set_mark(&mut self, i: usize, j: usize, lag: usize, mark: EdgeMark) -> Result<(), GraphError> {
        self.check_link(i, j, lag)?;
        if lag > 0 && mark == EdgeMark::HeadTail {
            return Err(GraphError::BackwardsInTime { i, j, lag });
        }
        let (key, flipped) = canonical_key(i, j, lag);
        if mark == EdgeMark::Absent {
            self.marks.remove(&key);
        } else {
            self.marks.insert(key, if flipped { mark.reversed() } else { mark });
        }
        Ok(())
    }

    pub fn remove(&mut self, i: usize, j: usize, lag: usize) {
        let (key, _) = canonical_key(i, j, lag);
        self.marks.remove(&key);
    }

    pub fn is_adjacent(&self, i: usize, j: usize, lag: usize) -> bool {
        self.mark(i, j, lag).is_present()
    }

    /// Adjacency between two nodes at arbitrary lags (only the lag difference matters).
    pub fn nodes_adjacent(&self, a: NodeRef, b: NodeRef) -> bool {
        self.node_mark(a, b).is_present()
    }

    /// Mark read from node `a` to node `b`, using stationarity for time shifts.
    pub fn node_mark(&self, a: NodeRef, b: NodeRef) -> EdgeMark {
        let sa = self.roles.get(a.var).is_some_and(|r| r.is_static());
        let sb = self.roles.get(b.var).is_some_and(|r| r.is_static());
        if sa || sb {
            return self.mark(a.var, b.var, 0);
        }
        if a.lag >= b.lag {
            self.mark(a.var, b.var, a.lag - b.lag)
        } else {
            self.mark(b.var, a.var, b.lag - a.lag).reversed()
        }
    }

    /// All present links in canonical storage order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, usize, EdgeMark)> + '_ {
        self.marks.iter().map(|(&(i, j, l), &m)| (i, j, l, m))
    }

    pub fn n_edges(&self) -> usize {
        self.marks.len()
    }

    /// Variables linked to `j` at lag 0, in index order.
    pub fn contemporaneous_neighbors(&self, j: usize) -> Vec<usize> {
        (0..self.n_vars()).filter(|&i| i != j && self.is_adjacent(i, j, 0)).collect()
    }

    /// Lagged nodes `X^i_{t-τ}` (τ ≥ 1) linked into `X^j_t`.
    pub fn lagged_neighbors(&self, j: usize) -> Vec<NodeRef> {
        let mut out = Vec::new();
        for lag in 1..=self.tau_max {
            for i in 0..self.n_vars() {
                if self.is_adjacent(i, j, lag) {
                    out.push(NodeRef::new(i, lag));
                }
            }
        }
        out
    }

    /// Same graph with a different maximum lag; links beyond it are dropped.
    pub fn with_tau_max(&self, tau_max: usize) -> TimeSeriesGraph {
        let marks = self.marks.iter().filter(|(k, _)| k.2 <= tau_max).map(|(k, m)| (*k, *m)).collect();
        TimeSeriesGraph { roles: self.roles.clone(), tau_max, marks }
    }

    /// Induced subgraph over the variables kept by `keep`, renumbered in order.
    pub fn induced(&self, keep: impl Fn(usize, VariableRole) -> bool) -> TimeSeriesGraph {
        let mut map = vec![None; self.n_vars()];
        let mut roles = Vec::new();
        for (v, &r) in self.roles.iter().enumerate() {
            if keep(v, r) {
                map[v] = Some(roles.len());
                roles.push(r);
            }
        }
        let mut out = TimeSeriesGraph::new(roles, self.tau_max);
        for (i, j, l, m) in self.edges() {
            if let (Some(a), Some(b)) = (map[i], map[j]) {
                let (key, flipped) = canonical_key(a, b, l);
                out.marks.insert(key, if flipped { m.reversed() } else { m });
            }
        }
        out
    }
}

/// Fully directed ground truth over system and (observed or latent) context variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruthGraph {
    graph: TimeSeriesGraph,
}

impl GroundTruthGraph {
    pub fn new(roles: Vec<VariableRole>, tau_max: usize) -> Result<Self, GraphError> {
        if let Some(&r) = roles.iter().find(|r| r.is_dummy()) {
            return Err(GraphError::DummyInGroundTruth(r));
        }
        Ok(GroundTruthGraph { graph: TimeSeriesGraph::new(roles, tau_max) })
    }

    /// Add `parent.var` at `t - parent.lag` as a cause of `child` at `t`.
    pub fn add_edge(&mut self, parent: NodeRef, child: usize) -> Result<(), GraphError> {
        let g = &self.graph;
        g.check_link(parent.var, child, parent.lag)?;
        let (rp, rc) = (g.role(parent.var), g.role(child));
        let forbid = |reason| GraphError::ForbiddenEdge { parent: parent.var, child, lag: parent.lag, reason };
        if rp.is_system() && rc.is_context() {
            return Err(forbid("contexts are exogenous to the system"));
        }
        if rp.is_context() && rc.is_context() && rp.is_temporal() != rc.is_temporal() {
            return Err(forbid("links between temporal and spatial contexts are impossible"));
        }
        if parent.lag == 0 && self.reaches_contemporaneously(child, parent.var) {
            return Err(GraphError::Cycle(parent.var, child));
        }
        self.graph.set_mark(parent.var, child, parent.lag, EdgeMark::TailHead)
    }

    fn reaches_contemporaneously(&self, from: usize, to: usize) -> bool {
        let mut stack = vec![from];
        let mut seen = BTreeSet::new();
        while let Some(v) = stack.pop() {
            if v == to {
                return true;
            }
            if seen.insert(v) {
                stack.extend(self.contemporaneous_children(v));
            }
        }
        false
    }

    fn contemporaneous_children(&self, v: usize) -> Vec<usize> {
        (0..self.n_vars()).filter(|&c| c != v && self.graph.mark(v, c, 0) == EdgeMark::TailHead).collect()
    }

    pub fn graph(&self) -> &TimeSeriesGraph {
        &self.graph
    }

    pub fn n_vars(&self) -> usize {
        self.graph.n_vars()
    }

    pub fn tau_max(&self) -> usize {
        self.graph.tau_max()
    }

    pub fn roles(&self) -> &[VariableRole] {
        self.graph.roles()
    }

    pub fn role(&self, v: usize) -> VariableRole {
        self.graph.role(v)
    }

    /// Direct causes of `X^child_t`.
    pub fn parents(&self, child: usize) -> Vec<NodeRef> {
        let mut out = Vec::new();
        for lag in 0..=self.tau_max() {
            for p in 0..self.n_vars() {
                if self.graph.mark(p, child, lag) == EdgeMark::TailHead {
                    out.push(NodeRef::new(p, lag));
                }
            }
        }
        out
    }

    /// Edges as `(parent, child)` pairs.
    pub fn directed_edges(&self) -> Vec<(NodeRef, usize)> {
        self.graph
            .edges()
            .map(|(i, j, l, m)| match m {
                EdgeMark::HeadTail => (NodeRef::new(j, 0), i),
                _ => (NodeRef::new(i, l), j),
            })
            .collect()
    }

    /// Contemporaneous topological order of all variables (ties by index).
    pub fn topological_order(&self) -> Vec<usize> {
        let n = self.n_vars();
        let mut indeg = vec![0usize; n];
        for (p, c) in self.directed_edges() {
            if p.lag == 0 {
                indeg[c] += 1;
            }
        }
        let mut ready: BTreeSet<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = ready.pop_first() {
            order.push(v);
            for c in self.contemporaneous_children(v) {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        order
    }

    /// Copy with contexts relabelled observed (`true`) or latent, in context order.
    pub fn with_observed(&self, observed: &[bool]) -> GroundTruthGraph {
        let mut roles = self.roles().to_vec();
        let mut k = 0;
        for r in roles.iter_mut() {
            if r.is_context() {
                let obs = observed.get(k).copied().unwrap_or(false);
                *r = if obs { r.as_observed() } else { r.as_latent() };
                k += 1;
            }
        }
        let mut graph = self.graph.clone();
        graph.roles = roles;
        GroundTruthGraph { graph }
    }
}

/// Where a variable of an estimated layout comes from in the ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayoutSource {
    Var(usize),
    TimeDummy,
    SpaceDummy,
}

/// Variable layout used for projected and estimated graphs: system variables,
/// observed temporal contexts, observed spatial contexts, then optionally the
/// time and space dummies.
pub fn projected_layout(gt_roles: &[VariableRole], with_dummies: bool) -> Vec<LayoutSource> {
    let mut out = Vec::new();
    let groups: [fn(VariableRole) -> bool; 3] = [
        |r| r == VariableRole::System,
        |r| r == VariableRole::TemporalContext,
        |r| r == VariableRole::SpatialContext,
    ];
    for pick in groups {
        out.extend(gt_roles.iter().enumerate().filter(|(_, &r)| pick(r)).map(|(v, _)| LayoutSource::Var(v)));
    }
    if with_dummies {
        out.push(LayoutSource::TimeDummy);
        out.push(LayoutSource::SpaceDummy);
    }
    out
}

/// Roles of the variables of an estimation layout.
pub fn layout_roles(gt_roles: &[VariableRole], layout: &[LayoutSource]) -> Vec<VariableRole> {
    layout
        .iter()
        .map(|s| match *s {
            LayoutSource::Var(v) => gt_roles[v],
            LayoutSource::TimeDummy => VariableRole::TimeDummy,
            LayoutSource::SpaceDummy => VariableRole::SpaceDummy,
        })
        .collect()
}

fn layout_index(layout: &[LayoutSource], n_gt: usize) -> Vec<Option<usize>> {
    let mut map = vec![None; n_gt];
    for (k, s) in layout.iter().enumerate() {
        if let LayoutSource::Var(v) = *s {
            map[v] = Some(k);
        }
    }
    map
}

/// Replace latent-context edges into the system by edges from the matching dummy.
pub fn dummy_projection(g: &GroundTruthGraph) -> TimeSeriesGraph {
    let layout = projected_layout(g.roles(), true);
    let map = layout_index(&layout, g.n_vars());
    let (d_time, d_space) = (layout.len() - 2, layout.len() - 1);
    let mut out = TimeSeriesGraph::new(layout_roles(g.roles(), &layout), g.tau_max());
    for (p, c) in g.directed_edges() {
        let (rp, rc) = (g.role(p.var), g.role(c));
        if !rc.is_system() {
            continue;
        }
        let (src, lag) = match rp {
            VariableRole::LatentTemporalContext => (d_time, 0),
            VariableRole::LatentSpatialContext => (d_space, 0),
            _ => (map[p.var].expect("observed variable in layout"), p.lag),
        };
        let cj = map[c].expect("system variable in layout");
        out.set_mark(src, cj, lag, EdgeMark::TailHead).expect("projected edge is valid");
    }
    out
}

/// Remove dummy variables and all their links.
pub fn dummy_deletion(g: &TimeSeriesGraph) -> TimeSeriesGraph {
    g.induced(|_, r| !r.is_dummy())
}

/// System and observed-context variables with all edges into the system among them.
pub fn target_graph(g: &GroundTruthGraph) -> TimeSeriesGraph {
    let layout = projected_layout(g.roles(), false);
    let map = layout_index(&layout, g.n_vars());
    let mut out = TimeSeriesGraph::new(layout_roles(g.roles(), &layout), g.tau_max());
    for (p, c) in g.directed_edges() {
        if !g.role(c).is_system() {
            continue;
        }
        if let (Some(a), Some(b)) = (map[p.var], map[c]) {
            out.set_mark(a, b, p.lag, EdgeMark::TailHead).expect("target edge is valid");
        }
    }
    out
}

#[cfg(test)]
mod tests;
