//! D-separation on the time-unrolled ground truth via reachability ("Bayes ball").

use std::collections::VecDeque;

use super::{EdgeMark, GraphError, GroundTruthGraph, NodeRef};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnrolledNode {
    Var(NodeRef),
    TimeDummy,
    SpaceDummy,
}

/// Finite window of the stationary graph: time-varying variables get one copy per
/// lag `0..=depth`, static variables a single node. Optionally adds a time dummy
/// pointing at every temporal-context copy and a space dummy pointing at every
/// spatial context.
#[derive(Debug, Clone)]
pub struct UnrolledDag {
    depth: usize,
    nodes: Vec<UnrolledNode>,
    /// `index[var][lag]`; static variables only have lag 0.
    index: Vec<Vec<usize>>,
    d_time: Option<usize>,
    d_space: Option<usize>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
}

impl UnrolledDag {
    pub fn new(g: &GroundTruthGraph, depth: usize, with_dummies: bool) -> Result<Self, GraphError> {
        if depth < g.tau_max() {
            return Err(GraphError::UnrollDepth { depth, tau_max: g.tau_max() });
        }
        let mut nodes = Vec::new();
        let mut index = Vec::with_capacity(g.n_vars());
        for v in 0..g.n_vars() {
            let copies = if g.role(v).is_static() { 1 } else { depth + 1 };
            let ids = (0..copies)
                .map(|lag| {
                    nodes.push(UnrolledNode::Var(NodeRef::new(v, lag)));
                    nodes.len() - 1
                })
                .collect();
            index.push(ids);
        }
        let (mut d_time, mut d_space) = (None, None);
        if with_dummies {
            nodes.push(UnrolledNode::TimeDummy);
            d_time = Some(nodes.len() - 1);
            nodes.push(UnrolledNode::SpaceDummy);
            d_space = Some(nodes.len() - 1);
        }
        let mut dag = UnrolledDag {
            depth,
            parents: vec![Vec::new(); nodes.len()],
            children: vec![Vec::new(); nodes.len()],
            nodes,
            index,
            d_time,
            d_space,
        };
        for (i, j, lag, mark) in g.graph().edges() {
            let (p, c, lag) = match mark {
                EdgeMark::HeadTail => (j, i, 0),
                _ => (i, j, lag),
            };
            for child_lag in 0..dag.index[c].len() {
                let parent_lag = if g.role(p).is_static() { 0 } else { child_lag + lag };
                if parent_lag < dag.index[p].len() {
                    dag.link(dag.index[p][parent_lag], dag.index[c][child_lag]);
                }
            }
        }
        if with_dummies {
            for v in 0..g.n_vars() {
                let r = g.role(v);
                let d = if r.is_temporal() {
                    d_time
                } else if r.is_spatial() {
                    d_space
                } else {
                    None
                };
                if let Some(d) = d {
                    for k in 0..dag.index[v].len() {
                        dag.link(d, dag.index[v][k]);
                    }
                }
            }
        }
        Ok(dag)
    }

    fn link(&mut self, p: usize, c: usize) {
        self.parents[c].push(p);
        self.children[p].push(c);
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, idx: usize) -> UnrolledNode {
        self.nodes[idx]
    }

    pub fn index(&self, node: UnrolledNode) -> Option<usize> {
        match node {
            UnrolledNode::Var(n) => self.index.get(n.var).and_then(|ids| ids.get(n.lag)).copied(),
            UnrolledNode::TimeDummy => self.d_time,
            UnrolledNode::SpaceDummy => self.d_space,
        }
    }

    /// All unrolled copies of variable `var`.
    pub fn copies(&self, var: usize) -> &[usize] {
        &self.index[var]
    }

    pub fn parents(&self, idx: usize) -> &[usize] {
        &self.parents[idx]
    }

    pub fn children(&self, idx: usize) -> &[usize] {
        &self.children[idx]
    }

    /// Nodes d-connected to any source given `z` (sources themselves included).
    pub fn reachable(&self, sources: &[usize], z: &[usize]) -> Vec<bool> {
        let n = self.len();
        let mut in_z = vec![false; n];
        for &v in z {
            in_z[v] = true;
        }
        // Ancestors of Z, including Z: colliders there are open.
        let mut anc = in_z.clone();
        let mut stack: Vec<usize> = z.to_vec();
        while let Some(v) = stack.pop() {
            for &p in &self.parents[v] {
                if !anc[p] {
                    anc[p] = true;
                    stack.push(p);
                }
            }
        }
        // Direction flag: `true` when arriving from a child (moving up).
        let mut visited = vec![[false; 2]; n];
        let mut reach = vec![false; n];
        let mut queue: VecDeque<(usize, bool)> = sources.iter().map(|&s| (s, true)).collect();
        while let Some((v, up)) = queue.pop_front() {
            if visited[v][up as usize] {
                continue;
            }
            visited[v][up as usize] = true;
            if !in_z[v] {
                reach[v] = true;
            }
            if up {
                if !in_z[v] {
                    queue.extend(self.parents[v].iter().map(|&p| (p, true)));
                    queue.extend(self.children[v].iter().map(|&c| (c, false)));
                }
            } else {
                if !in_z[v] {
                    queue.extend(self.children[v].iter().map(|&c| (c, false)));
                }
                if anc[v] {
                    queue.extend(self.parents[v].iter().map(|&p| (p, true)));
                }
            }
        }
        reach
    }

    pub fn d_separated_idx(&self, x: usize, y: usize, z: &[usize]) -> bool {
        !self.reachable(&[x], z)[y]
    }
}

/// Whether `x` and `y` are d-separated by `z` in `g` unrolled to `unroll_depth` lags.
pub fn d_separated(
    g: &GroundTruthGraph,
    x: NodeRef,
    y: NodeRef,
    z: &[NodeRef],
    unroll_depth: usize,
) -> Result<bool, GraphError> {
    if x == y {
        return Err(GraphError::Query("x and y must differ".into()));
    }
    if z.contains(&x) || z.contains(&y) {
        return Err(GraphError::Query("x and y must not be in the conditioning set".into()));
    }
    let dag = UnrolledDag::new(g, unroll_depth, false)?;
    let lookup = |n: NodeRef| {
        dag.index(UnrolledNode::Var(n))
            .ok_or_else(|| GraphError::Query(format!("node {n} is outside the unrolled window")))
    };
    let zi = z.iter().map(|&n| lookup(n)).collect::<Result<Vec<_>, _>>()?;
    Ok(dag.d_separated_idx(lookup(x)?, lookup(y)?, &zi))
}
