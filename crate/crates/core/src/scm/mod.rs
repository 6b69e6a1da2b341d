//! Linear structural causal models over system variables with temporal and
//! spatial context drivers, plus simulation of dataset collections.
//!
//! Variable indexing inside a spec: system `0..N`, temporal contexts
//! `N..N+Kt`, spatial contexts `N+Kt..N+Kt+Ks`.

mod data;
mod generate;
pub mod io;
mod simulate;

pub use data::{DatasetCollection, Scales};
pub use generate::{generate_random_model, ModelParams};
pub use simulate::{simulate, simulate_traced, SimulationTrace, DEFAULT_BURN_IN};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphError, GroundTruthGraph, NodeRef, VariableRole};

#[derive(Debug, Error)]
pub enum ScmError {
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("no stable model found after {0} attempts")]
    Generation(usize),
    #[error("simulation diverged: {0}")]
    Simulation(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearTerm {
    pub parent: NodeRef,
    pub coeff: f64,
}

/// Right-hand side of one system variable besides its noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// Coefficient on the variable's own value at lag 1.
    pub autocorrelation: f64,
    pub terms: Vec<LinearTerm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScmSpec {
    pub n_system: usize,
    pub n_temporal_ctx: usize,
    pub n_spatial_ctx: usize,
    pub assignments: Vec<Assignment>,
    pub noise_std: Vec<f64>,
    /// Per context, temporal contexts first.
    pub observed_mask: Vec<bool>,
}

impl ScmSpec {
    pub fn n_contexts(&self) -> usize {
        self.n_temporal_ctx + self.n_spatial_ctx
    }

    pub fn n_vars(&self) -> usize {
        self.n_system + self.n_contexts()
    }

    pub fn role(&self, v: usize) -> VariableRole {
        let (n, kt) = (self.n_system, self.n_temporal_ctx);
        if v < n {
            VariableRole::System
        } else {
            let observed = self.observed_mask.get(v - n).copied().unwrap_or(false);
            let base = if v < n + kt { VariableRole::TemporalContext } else { VariableRole::SpatialContext };
            if observed {
                base
            } else {
                base.as_latent()
            }
        }
    }

    pub fn roles(&self) -> Vec<VariableRole> {
        (0..self.n_vars()).map(|v| self.role(v)).collect()
    }

    /// Largest lag appearing in any assignment (1 if any autocorrelation is nonzero).
    pub fn max_lag(&self) -> usize {
        self.assignments
            .iter()
            .flat_map(|a| {
                let auto = usize::from(a.autocorrelation != 0.0);
                a.terms.iter().map(|t| t.parent.lag).chain(std::iter::once(auto))
            })
            .max()
            .unwrap_or(0)
    }

    pub fn validate(&self) -> Result<(), ScmError> {
        let cfg = |m: String| Err(ScmError::Config(m));
        if self.n_system == 0 {
            return cfg("at least one system variable is required".into());
        }
        if self.assignments.len() != self.n_system || self.noise_std.len() != self.n_system {
            return cfg("one assignment and one noise scale per system variable required".into());
        }
        if self.observed_mask.len() != self.n_contexts() {
            return cfg(format!("observed_mask needs {} entries", self.n_contexts()));
        }
        for (i, a) in self.assignments.iter().enumerate() {
            if !a.autocorrelation.is_finite() || !(self.noise_std[i].is_finite() && self.noise_std[i] >= 0.0) {
                return cfg(format!("non-finite parameters for variable {i}"));
            }
            for (k, t) in a.terms.iter().enumerate() {
                if t.coeff == 0.0 || !t.coeff.is_finite() {
                    return cfg(format!("term {k} of variable {i} needs a finite nonzero coefficient"));
                }
                if t.parent.var >= self.n_vars() {
                    return cfg(format!("term {k} of variable {i} refers to unknown variable {}", t.parent.var));
                }
                if t.parent.var == i && t.parent.lag == 1 && a.autocorrelation != 0.0 {
                    return cfg(format!("variable {i} lists its lag-1 self term twice"));
                }
                if a.terms[..k].iter().any(|o| o.parent == t.parent) {
                    return cfg(format!("duplicate parent {} for variable {i}", t.parent));
                }
            }
        }
        self.ground_truth().map(|_| ())
    }

    /// Causal graph implied by the assignments; contexts are exogenous.
    pub fn ground_truth(&self) -> Result<GroundTruthGraph, ScmError> {
        let mut g = GroundTruthGraph::new(self.roles(), self.max_lag())?;
        for (i, a) in self.assignments.iter().enumerate() {
            if a.autocorrelation != 0.0 {
                g.add_edge(NodeRef::new(i, 1), i)?;
            }
            for t in &a.terms {
                g.add_edge(t.parent, i)?;
            }
        }
        Ok(g)
    }

    /// Contemporaneous evaluation order of the system variables.
    pub fn system_order(&self) -> Result<Vec<usize>, ScmError> {
        let g = self.ground_truth()?;
        Ok(g.topological_order().into_iter().filter(|&v| v < self.n_system).collect())
    }

    /// Spectral radius of the companion matrix of the system block in reduced form.
    pub fn spectral_radius(&self) -> f64 {
        let n = self.n_system;
        let p = self.max_system_lag();
        if p == 0 {
            return 0.0;
        }
        let mut lagged = vec![DMatrix::<f64>::zeros(n, n); p + 1];
        for (i, a) in self.assignments.iter().enumerate() {
            lagged[1][(i, i)] += a.autocorrelation;
            for t in a.terms.iter().filter(|t| t.parent.var < n) {
                lagged[t.parent.lag][(i, t.parent.var)] += t.coeff;
            }
        }
        // The contemporaneous block is nilpotent, so I - A0 is always invertible.
        let inv = (DMatrix::<f64>::identity(n, n) - &lagged[0])
            .try_inverse()
            .expect("contemporaneous structure is acyclic");
        let mut comp = DMatrix::<f64>::zeros(n * p, n * p);
        for k in 1..=p {
            let b = &inv * &lagged[k];
            comp.view_mut((0, (k - 1) * n), (n, n)).copy_from(&b);
        }
        for k in 1..p {
            comp.view_mut((k * n, (k - 1) * n), (n, n)).fill_with_identity();
        }
        comp.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn max_system_lag(&self) -> usize {
        self.assignments
            .iter()
            .flat_map(|a| {
                let auto = usize::from(a.autocorrelation != 0.0);
                a.terms.iter().filter(|t| t.parent.var < self.n_system).map(|t| t.parent.lag).chain([auto])
            })
            .max()
            .unwrap_or(0)
    }
}

/// Two system variables driven by two temporal and two spatial contexts, of which
/// the second of each kind is unobserved:
///
/// ```text
/// X0_t = 0.5 X1_t     + 0.5 Cs0 + 0.5 Cs1 + 0.5 Ct0_{t-1} + 0.5 Ct1_{t-1} + e0
/// X1_t = 0.5 X1_{t-1} + 0.5 Cs0 + 0.5 Cs1 + 0.5 Ct0_{t-1} + 0.5 Ct1_{t-1} + e1
/// ```
pub fn simplified_preset() -> (ScmSpec, GroundTruthGraph) {
    let (ct0, ct1, cs0, cs1) = (2, 3, 4, 5);
    let ctx_terms = [NodeRef::new(cs0, 0), NodeRef::new(cs1, 0), NodeRef::new(ct0, 1), NodeRef::new(ct1, 1)];
    let terms = |extra: Option<NodeRef>| -> Vec<LinearTerm> {
        extra.into_iter().chain(ctx_terms).map(|parent| LinearTerm { parent, coeff: 0.5 }).collect()
    };
    let spec = ScmSpec {
        n_system: 2,
        n_temporal_ctx: 2,
        n_spatial_ctx: 2,
        assignments: vec![
            Assignment { autocorrelation: 0.0, terms: terms(Some(NodeRef::new(1, 0))) },
            Assignment { autocorrelation: 0.5, terms: terms(None) },
        ],
        noise_std: vec![1.0, 1.0],
        observed_mask: vec![true, false, true, false],
    };
    let g = spec.ground_truth().expect("preset is a valid model");
    (spec, g)
}
