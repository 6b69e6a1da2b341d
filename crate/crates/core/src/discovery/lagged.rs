use std::collections::BTreeMap;

use itertools::Itertools;
use rayon::prelude::*;

use super::{DiscoveryConfig, DiscoveryError};
use crate::citests::{CiQuery, CiTest};
use crate::graph::NodeRef;

/// Lagged-phase output: the retained lagged parents `B̂⁻(j)` of each target,
/// ordered by decreasing minimum test statistic, and that statistic per link.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LaggedAdjacencies {
    pub parents: BTreeMap<usize, Vec<NodeRef>>,
    pub min_stat: BTreeMap<(NodeRef, usize), f64>,
    pub n_tests: usize,
}

impl LaggedAdjacencies {
    pub fn of(&self, j: usize) -> &[NodeRef] {
        self.parents.get(&j).map_or(&[], |v| v.as_slice())
    }
}

pub(super) fn run_query(ci: &dyn CiTest, q: CiQuery) -> Result<(CiQuery, f64, f64), DiscoveryError> {
    match ci.test(&q) {
        Ok(r) => Ok((q, r.statistic.abs(), r.p_value)),
        Err(source) => Err(DiscoveryError::Ci { query: q, source }),
    }
}

/// Build `Z` from nodes, dropping duplicates and the tested pair.
pub(super) fn assemble_z(x: NodeRef, y: NodeRef, parts: impl IntoIterator<Item = NodeRef>) -> Vec<NodeRef> {
    let mut z: Vec<NodeRef> = Vec::new();
    for n in parts {
        if n != x && n != y && !z.contains(&n) {
            z.push(n);
        }
    }
    z
}

/// PC-stable search for the lagged parents of each target among
/// `drivers(j)` at lags `1..=tau_max`. Candidates are tested given the first
/// `p` others in the current order (at most `pc1_max_combinations` subsets per
/// level) plus `extra(candidate, target)` and are removed at the end of the
/// level. Targets run in parallel and never interact.
pub fn lagged_skeleton(
    ci: &dyn CiTest,
    cfg: &DiscoveryConfig,
    targets: &[usize],
    drivers: impl Fn(usize) -> Vec<usize> + Sync,
    extra: impl Fn(NodeRef, usize) -> Vec<NodeRef> + Sync,
) -> Result<LaggedAdjacencies, DiscoveryError> {
    let per_target: Vec<_> = targets
        .par_iter()
        .map(|&j| {
            let y = NodeRef::new(j, 0);
            let mut vars = drivers(j);
            vars.sort_unstable();
            let mut parents: Vec<NodeRef> =
                vars.iter().flat_map(|&i| (1..=cfg.tau_max).map(move |l| NodeRef::new(i, l))).collect();
            let mut min_stat: BTreeMap<NodeRef, f64> = parents.iter().map(|&p| (p, f64::INFINITY)).collect();
            let mut n_tests = 0;
            let mut p = 0;
            while parents.len() > p && cfg.allows(p) {
                let mut drop = Vec::new();
                for &x in &parents {
                    let fixed = extra(x, j);
                    let others: Vec<NodeRef> = parents.iter().copied().filter(|&o| o != x).collect();
                    for conds in others.into_iter().combinations(p).take(cfg.pc1_max_combinations) {
                        let z = assemble_z(x, y, conds.into_iter().chain(fixed.iter().copied()));
                        let (_, stat, pv) = run_query(ci, CiQuery::new(x, y, z))?;
                        n_tests += 1;
                        let m = min_stat.get_mut(&x).expect("candidate tracked");
                        *m = m.min(stat);
                        if pv > cfg.alpha {
                            drop.push(x);
                            break;
                        }
                    }
                }
                parents.retain(|x| !drop.contains(x));
                parents.sort_by(|a, b| min_stat[b].total_cmp(&min_stat[a]).then(a.var.cmp(&b.var)).then(a.lag.cmp(&b.lag)));
                p += 1;
            }
            Ok((j, parents, min_stat, n_tests))
        })
        .collect::<Result<Vec<_>, DiscoveryError>>()?;

    let mut out = LaggedAdjacencies::default();
    for (j, parents, stats, n) in per_target {
        for (node, s) in stats {
            out.min_stat.insert((node, j), s);
        }
        out.parents.insert(j, parents);
        out.n_tests += n;
    }
    Ok(out)
}
