use std::collections::{BTreeMap, BTreeSet};

use itertools::Itertools;
use serde::Serialize;

use super::lagged::run_query;
use super::skeleton::StageSpec;
use super::{ColliderRule, DiscoveryConfig, DiscoveryError, SepSetStore};
use crate::citests::{CiQuery, CiTest};
use crate::graph::{EdgeMark, NodeRef, TimeSeriesGraph};

/// Unshielded triple `a *-* X^middle_t o-o X^end_t` with `a` not adjacent to `X^end_t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Triple {
    pub a: NodeRef,
    pub middle: usize,
    pub end: usize,
}

impl Triple {
    fn matches(&self, a: NodeRef, middle: usize, end: usize) -> bool {
        (self.a == a && self.middle == middle && self.end == end)
            || (a.lag == 0 && self.a == NodeRef::new(end, 0) && self.middle == middle && self.end == a.var)
    }
}

#[derive(Debug, Clone)]
pub struct ColliderOutcome {
    pub graph: TimeSeriesGraph,
    pub colliders: Vec<Triple>,
    pub ambiguous: Vec<Triple>,
    pub n_tests: usize,
}

fn is_system(g: &TimeSeriesGraph, v: usize) -> bool {
    g.role(v).is_system()
}

/// Neighbors of `X^k_t` other than `X^end_t` that point into it or share an
/// unoriented system link with it.
fn into_middle(g: &TimeSeriesGraph, k: usize, end: usize) -> Vec<NodeRef> {
    let mut out = g.lagged_neighbors(k);
    for a in g.contemporaneous_neighbors(k) {
        if a != end && matches!(g.mark(a, k, 0), EdgeMark::TailHead | EdgeMark::CircleCircle) {
            out.push(NodeRef::new(a, 0));
        }
    }
    out
}

fn unshielded_triples(g: &TimeSeriesGraph) -> Vec<Triple> {
    let mut out = Vec::new();
    for k in g.vars_with(|r| r.is_system()) {
        for j in g.contemporaneous_neighbors(k) {
            if !is_system(g, j) || g.mark(k, j, 0) != EdgeMark::CircleCircle {
                continue;
            }
            for a in into_middle(g, k, j) {
                let sys_contemp = a.lag == 0 && is_system(g, a.var);
                // (a, k, j) and (j, k, a) are the same triple.
                if sys_contemp && (a.var > j || g.mark(a.var, k, 0) != EdgeMark::CircleCircle) {
                    continue;
                }
                if !g.nodes_adjacent(a, NodeRef::new(j, 0)) {
                    out.push(Triple { a, middle: k, end: j });
                }
            }
        }
    }
    out
}

/// All separating sets of `a` and `X^end_t` among subsets of the pool
/// neighbors of either endpoint, re-tested under the final-stage conditioning.
fn separating_sets(
    ci: &dyn CiTest,
    cfg: &DiscoveryConfig,
    spec: &StageSpec,
    g: &TimeSeriesGraph,
    t: &Triple,
) -> Result<(Vec<CiQuery>, usize), DiscoveryError> {
    let pool_nbrs = |v: usize, other: NodeRef| -> Vec<usize> {
        g.contemporaneous_neighbors(v)
            .into_iter()
            .filter(|&u| spec.pool[u] && !(other.lag == 0 && other.var == u))
            .collect()
    };
    let mut found = Vec::new();
    let mut n = 0;
    let mut seen = BTreeSet::new();
    let mut sides = vec![(t.a, t.end, pool_nbrs(t.end, t.a))];
    if t.a.lag == 0 && is_system(g, t.a.var) {
        sides.push((NodeRef::new(t.end, 0), t.a.var, pool_nbrs(t.a.var, NodeRef::new(t.end, 0))));
    }
    for (src, target, cand) in sides {
        for p in 0..=cand.len() {
            if !cfg.allows(p) {
                break;
            }
            for s in cand.iter().copied().combinations(p) {
                let mut key = s.clone();
                key.sort_unstable();
                if !seen.insert(key) {
                    continue;
                }
                let q = CiQuery::new(src, NodeRef::new(target, 0), spec.conditioning(src, target, &s));
                let (q, _, pv) = run_query(ci, q)?;
                n += 1;
                if pv > cfg.alpha {
                    found.push(q);
                }
            }
        }
    }
    Ok((found, n))
}

/// Propose orientations for unshielded triples and apply them; contradicting
/// proposals for one edge leave a conflict mark. `spec` supplies the pool and
/// fixed sets used by the majority rule's re-tests.
pub fn collider_phase(
    ci: &dyn CiTest,
    cfg: &DiscoveryConfig,
    spec: &StageSpec,
    graph: &TimeSeriesGraph,
    sepsets: &SepSetStore,
) -> Result<ColliderOutcome, DiscoveryError> {
    let mut colliders = Vec::new();
    let mut ambiguous = Vec::new();
    let mut n_tests = 0;
    for t in unshielded_triples(graph) {
        let mid = NodeRef::new(t.middle, 0);
        let end = NodeRef::new(t.end, 0);
        let stored = || sepsets.get(t.a, end).is_none_or(|s| !s.contains(mid));
        let collider = match cfg.collider_rule {
            ColliderRule::Standard => Some(stored()),
            ColliderRule::Majority => {
                let (sets, n) = separating_sets(ci, cfg, spec, graph, &t)?;
                n_tests += n;
                if sets.is_empty() {
                    Some(stored())
                } else {
                    let with = sets.iter().filter(|q| q.z.contains(&mid)).count();
                    match (2 * with).cmp(&sets.len()) {
                        std::cmp::Ordering::Less => Some(true),
                        std::cmp::Ordering::Greater => Some(false),
                        std::cmp::Ordering::Equal => None,
                    }
                }
            }
        };
        match collider {
            Some(true) => colliders.push(t),
            Some(false) => {}
            None => ambiguous.push(t),
        }
    }

    let mut proposals: Proposals = BTreeMap::new();
    for t in &colliders {
        propose(&mut proposals, t.end, t.middle);
        if t.a.lag == 0 && is_system(graph, t.a.var) {
            propose(&mut proposals, t.a.var, t.middle);
        }
    }
    let mut g = graph.clone();
    apply(&mut g, &proposals);
    Ok(ColliderOutcome { graph: g, colliders, ambiguous, n_tests })
}

/// Per unordered pair `(lo, hi)`: proposed `lo → hi` and `hi → lo`.
type Proposals = BTreeMap<(usize, usize), (bool, bool)>;

fn propose(p: &mut Proposals, from: usize, to: usize) {
    let e = p.entry((from.min(to), from.max(to))).or_default();
    if from < to {
        e.0 = true;
    } else {
        e.1 = true;
    }
}

fn apply(g: &mut TimeSeriesGraph, p: &Proposals) -> bool {
    let mut changed = false;
    for (&(lo, hi), &(fwd, back)) in p {
        let mark = match (fwd, back) {
            (true, true) => EdgeMark::Conflict,
            (true, false) => EdgeMark::TailHead,
            (false, true) => EdgeMark::HeadTail,
            (false, false) => continue,
        };
        if g.mark(lo, hi, 0) != mark {
            g.set_mark(lo, hi, 0, mark).expect("contemporaneous system link");
            changed = true;
        }
    }
    changed
}

/// Meek rules R1 to R3 on unoriented contemporaneous system links, applied in
/// synchronous passes until nothing changes. R1 skips ambiguous triples.
pub fn rule_phase(graph: &TimeSeriesGraph, ambiguous: &[Triple]) -> TimeSeriesGraph {
    let mut g = graph.clone();
    let sys = g.vars_with(|r| r.is_system());
    let directed = |g: &TimeSeriesGraph, a: usize, b: usize| g.mark(a, b, 0) == EdgeMark::TailHead;
    let circle = |g: &TimeSeriesGraph, a: usize, b: usize| g.mark(a, b, 0) == EdgeMark::CircleCircle;
    loop {
        let mut proposals: Proposals = BTreeMap::new();
        for (&u, &v) in sys.iter().cartesian_product(&sys) {
            if u == v || !circle(&g, u, v) {
                continue;
            }
            let r1 = g.lagged_neighbors(u).into_iter().chain(
                g.contemporaneous_neighbors(u).into_iter().filter(|&a| a != v && directed(&g, a, u)).map(|a| NodeRef::new(a, 0)),
            )
            .any(|a| !g.nodes_adjacent(a, NodeRef::new(v, 0)) && !ambiguous.iter().any(|t| t.matches(a, u, v)));
            let r2 = || sys.iter().any(|&k| directed(&g, u, k) && directed(&g, k, v));
            let r3 = || {
                let mids: Vec<usize> =
                    sys.iter().copied().filter(|&k| circle(&g, u, k) && directed(&g, k, v)).collect();
                mids.iter().tuple_combinations().any(|(&k, &l)| !g.is_adjacent(k, l, 0))
            };
            if r1 || r2() || r3() {
                propose(&mut proposals, u, v);
            }
        }
        if !apply(&mut g, &proposals) {
            return g;
        }
    }
}
