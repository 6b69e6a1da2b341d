use std::collections::BTreeSet;

use super::{CiError, CiQuery, CiTest, CiTestResult};
use crate::graph::{layout_roles, projected_layout, GroundTruthGraph, LayoutSource, NodeRef, UnrolledDag, UnrolledNode, VariableRole};

/// Exact CI test by d-separation in the unrolled ground truth.
///
/// Queries refer to variables of an estimation layout. A dummy in the
/// conditioning set stands for every context of its kind (observed or latent,
/// every copy in the window): those nodes are added to `z`, and a query whose
/// `x` or `y` is thereby determined is independent. A dummy as `x` or `y` is
/// answered by d-separation of an extra root node that points at every context
/// of its kind.
#[derive(Debug, Clone)]
pub struct OracleCi {
    layout: Vec<LayoutSource>,
    roles: Vec<VariableRole>,
    dag: UnrolledDag,
    max_query_lag: usize,
}

impl OracleCi {
    /// `max_query_lag` bounds the lags that queries may use; the window extends
    /// `4 * max(tau_max, 1)` lags further back.
    pub fn new(gt: &GroundTruthGraph, layout: Vec<LayoutSource>, max_query_lag: usize) -> Result<Self, CiError> {
        for s in &layout {
            if let LayoutSource::Var(v) = *s {
                if v >= gt.n_vars() {
                    return Err(CiError::Query(format!("layout refers to variable {v} of {}", gt.n_vars())));
                }
            }
        }
        let depth = max_query_lag + 4 * gt.tau_max().max(1);
        let dag = UnrolledDag::new(gt, depth, true)?;
        Ok(OracleCi { layout, roles: gt.roles().to_vec(), dag, max_query_lag })
    }

    /// Oracle over the projected layout of `gt` (with or without dummies).
    pub fn projected(gt: &GroundTruthGraph, with_dummies: bool, max_query_lag: usize) -> Result<Self, CiError> {
        Self::new(gt, projected_layout(gt.roles(), with_dummies), max_query_lag)
    }

    pub fn layout(&self) -> &[LayoutSource] {
        &self.layout
    }

    /// Roles of the layout variables, as discovery expects them.
    pub fn layout_roles(&self) -> Vec<VariableRole> {
        layout_roles(&self.roles, &self.layout)
    }

    fn resolve(&self, node: NodeRef) -> Result<(usize, Option<LayoutSource>), CiError> {
        let src = *self
            .layout
            .get(node.var)
            .ok_or_else(|| CiError::Query(format!("variable {} outside the layout", node.var)))?;
        if node.lag > self.max_query_lag {
            return Err(CiError::Query(format!("lag {} beyond {}", node.lag, self.max_query_lag)));
        }
        let un = match src {
            LayoutSource::Var(v) => UnrolledNode::Var(NodeRef::new(v, node.lag)),
            LayoutSource::TimeDummy => UnrolledNode::TimeDummy,
            LayoutSource::SpaceDummy => UnrolledNode::SpaceDummy,
        };
        let idx = self
            .dag
            .index(un)
            .ok_or_else(|| CiError::Query(format!("{node:?} only exists at lag 0")))?;
        let dummy = (!matches!(src, LayoutSource::Var(_))).then_some(src);
        Ok((idx, dummy))
    }

    fn context_copies(&self, temporal: bool) -> impl Iterator<Item = usize> + '_ {
        self.roles
            .iter()
            .enumerate()
            .filter(move |(_, r)| r.is_context() && r.is_temporal() == temporal)
            .flat_map(|(v, _)| self.dag.copies(v).iter().copied())
    }
}

impl CiTest for OracleCi {
    fn test(&self, q: &CiQuery) -> Result<CiTestResult, CiError> {
        q.validate()?;
        let (x, dx) = self.resolve(q.x)?;
        let (y, dy) = self.resolve(q.y)?;
        if dx.is_some() && dy.is_some() {
            return Err(CiError::Query("dummies on both sides".into()));
        }
        let mut z = BTreeSet::new();
        for &node in &q.z {
            let (idx, dummy) = self.resolve(node)?;
            z.insert(idx);
            match dummy {
                Some(LayoutSource::TimeDummy) => z.extend(self.context_copies(true)),
                Some(LayoutSource::SpaceDummy) => z.extend(self.context_copies(false)),
                _ => {}
            }
        }
        let independent = z.contains(&x) || z.contains(&y) || {
            // Dummy nodes are only ever path endpoints; elsewhere they would act as
            // forks joining unrelated contexts.
            for d in [UnrolledNode::TimeDummy, UnrolledNode::SpaceDummy] {
                let idx = self.dag.index(d).expect("window built with dummies");
                if idx != x && idx != y {
                    z.insert(idx);
                }
            }
            let z: Vec<usize> = z.into_iter().collect();
            self.dag.d_separated_idx(x, y, &z)
        };
        Ok(if independent {
            CiTestResult { statistic: 0.0, p_value: 1.0, n_effective: 0, degenerate: false }
        } else {
            CiTestResult { statistic: 1.0, p_value: 0.0, n_effective: 0, degenerate: false }
        })
    }
}
