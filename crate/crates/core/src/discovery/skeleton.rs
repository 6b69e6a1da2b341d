use std::collections::BTreeMap;

use itertools::Itertools;
use rayon::prelude::*;

use super::lagged::{assemble_z, run_query};
use super::{DiscoveryConfig, DiscoveryError, SepSet, SepSetStore};
use crate::citests::{CiQuery, CiTest};
use crate::graph::{NodeRef, TimeSeriesGraph, VariableRole};

/// One skeleton search: which links are tested, who may join the
/// contemporaneous conditioning subsets, and the fixed conditioning sets.
#[derive(Debug, Clone)]
pub struct StageSpec {
    pub name: &'static str,
    /// Current adjacencies. Only links named in `tests` can be removed.
    pub graph: TimeSeriesGraph,
    /// Directed tests `(source, target)`: `X^source ⊥ X^target_t`. A
    /// contemporaneous pair listed in both directions is tested both ways.
    pub tests: Vec<(NodeRef, usize)>,
    /// Variables admitted to contemporaneous subsets `S`.
    pub pool: Vec<bool>,
    /// Fixed conditioning set `B(v)` per variable, shifted along with the source.
    pub fixed: Vec<Vec<NodeRef>>,
    /// Nodes added to every conditioning set.
    pub extra: Vec<NodeRef>,
    /// Nodes added to any test whose source or target is the variable.
    pub companions: Vec<Vec<NodeRef>>,
}

impl StageSpec {
    pub fn new(name: &'static str, graph: TimeSeriesGraph) -> Self {
        let n = graph.n_vars();
        StageSpec { name, graph, tests: Vec::new(), pool: vec![false; n], fixed: vec![Vec::new(); n], extra: Vec::new(), companions: vec![Vec::new(); n] }
    }

    fn shifted_fixed(&self, src: NodeRef) -> impl Iterator<Item = NodeRef> + '_ {
        let roles = self.graph.roles();
        self.fixed[src.var].iter().map(move |b| {
            if roles[b.var].is_static() || roles[src.var].is_static() {
                *b
            } else {
                NodeRef::new(b.var, b.lag + src.lag)
            }
        })
    }

    /// Conditioning set for testing `src → target` given subset `s`.
    pub fn conditioning(&self, src: NodeRef, target: usize, s: &[usize]) -> Vec<NodeRef> {
        let y = NodeRef::new(target, 0);
        let parts = s
            .iter()
            .map(|&v| NodeRef::new(v, 0))
            .chain(self.fixed[target].iter().copied())
            .chain(self.shifted_fixed(src))
            .chain(self.extra.iter().copied())
            .chain(self.companions[src.var].iter().copied())
            .chain(self.companions[target].iter().copied());
        assemble_z(src, y, parts)
    }

    fn adjacent(&self, src: NodeRef, target: usize) -> bool {
        self.graph.is_adjacent(src.var, target, src.lag)
    }
}

type Imin = BTreeMap<(NodeRef, usize), f64>;

fn imin_of(imin: &Imin, a: NodeRef, j: usize) -> f64 {
    imin.get(&(a, j)).copied().unwrap_or(f64::INFINITY)
}

/// PC-stable removal of the tested links of `stage`, level by level. At level
/// `p` every still-adjacent test tries the size-`p` subsets of the
/// contemporaneous pool-neighbors of its target (minus the source), taken in
/// lexicographic order after sorting by decreasing minimum statistic, until one
/// separates. Neighbor sets are frozen per level and removals are committed in
/// test order, so results do not depend on scheduling.
pub fn partial_contemp_skeleton(
    ci: &dyn CiTest,
    cfg: &DiscoveryConfig,
    stage: &StageSpec,
    sepsets: &mut SepSetStore,
) -> Result<(TimeSeriesGraph, usize), DiscoveryError> {
    let mut stage = stage.clone();
    let mut imin = Imin::new();
    let mut n_tests = 0;
    let mut p = 0;
    while cfg.allows(p) {
        let neighbors: Vec<Vec<usize>> = (0..stage.graph.n_vars())
            .map(|j| {
                let mut a: Vec<usize> =
                    stage.graph.contemporaneous_neighbors(j).into_iter().filter(|&v| stage.pool[v]).collect();
                a.sort_by(|&u, &v| {
                    imin_of(&imin, NodeRef::new(v, 0), j).total_cmp(&imin_of(&imin, NodeRef::new(u, 0), j)).then(u.cmp(&v))
                });
                a
            })
            .collect();
        let tasks: Vec<(NodeRef, usize, Vec<usize>)> = stage
            .tests
            .iter()
            .filter(|&&(src, j)| stage.adjacent(src, j))
            .map(|&(src, j)| {
                let cand: Vec<usize> = neighbors[j].iter().copied().filter(|&v| !(src.lag == 0 && v == src.var)).collect();
                (src, j, cand)
            })
            .filter(|(_, _, cand)| cand.len() >= p)
            .collect();
        if tasks.is_empty() {
            break;
        }
        let outcomes = tasks
            .par_iter()
            .map(|(src, j, cand)| {
                let (src, j) = (*src, *j);
                let (mut min_stat, mut count, mut removal) = (f64::INFINITY, 0usize, None);
                for s in cand.iter().copied().combinations(p) {
                    let q = CiQuery::new(src, NodeRef::new(j, 0), stage.conditioning(src, j, &s));
                    let (q, stat, pv) = run_query(ci, q)?;
                    count += 1;
                    min_stat = min_stat.min(stat);
                    if pv > cfg.alpha {
                        removal = Some(SepSet { query: q, p_value: pv, stage: stage.name });
                        break;
                    }
                }
                Ok((min_stat, count, removal))
            })
            .collect::<Result<Vec<_>, DiscoveryError>>()?;
        for ((src, j, _), (min_stat, count, removal)) in tasks.into_iter().zip(outcomes) {
            n_tests += count;
            let e = imin.entry((src, j)).or_insert(f64::INFINITY);
            *e = e.min(min_stat);
            if src.lag == 0 {
                // Both directions of a contemporaneous pair share one value.
                let e = imin.entry((NodeRef::new(j, 0), src.var)).or_insert(f64::INFINITY);
                *e = e.min(min_stat);
            }
            if let Some(sep) = removal {
                if stage.adjacent(src, j) {
                    stage.graph.remove(src.var, j, src.lag);
                    sepsets.insert(sep);
                }
            }
        }
        p += 1;
    }
    Ok((stage.graph, n_tests))
}

/// Skeleton search over the links in `tests` with no fixed conditioning sets:
/// contemporaneous subsets come from every neighbor admitted by `pool`.
pub fn partial_skeleton_pc(
    ci: &dyn CiTest,
    cfg: &DiscoveryConfig,
    name: &'static str,
    graph: TimeSeriesGraph,
    tests: Vec<(NodeRef, usize)>,
    pool: impl Fn(usize, VariableRole) -> bool,
    sepsets: &mut SepSetStore,
) -> Result<(TimeSeriesGraph, usize), DiscoveryError> {
    let mut stage = StageSpec::new(name, graph);
    stage.pool = stage.graph.roles().iter().enumerate().map(|(v, &r)| pool(v, r)).collect();
    stage.tests = tests;
    partial_contemp_skeleton(ci, cfg, &stage, sepsets)
}
