use ndarray::{Array2, Array3, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use super::ScmError;
use crate::graph::VariableRole;

/// Factors each stored column was divided by (raw = stored * scale).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scales {
    pub system: Vec<f64>,
    pub temporal: Vec<f64>,
    pub spatial: Vec<f64>,
}

impl Scales {
    pub fn ones(n_system: usize, n_temporal: usize, n_spatial: usize) -> Self {
        Scales { system: vec![1.0; n_system], temporal: vec![1.0; n_temporal], spatial: vec![1.0; n_spatial] }
    }
}

/// M datasets of length T. Temporal contexts are shared by all datasets, spatial
/// contexts are constant within a dataset. Latent contexts are kept so that
/// simulations can be traced; `observed_mask` says which ones discovery may use.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetCollection {
    system: Array3<f64>,
    temporal: Array2<f64>,
    spatial: Array2<f64>,
    observed_mask: Vec<bool>,
    scales: Scales,
}

impl DatasetCollection {
    /// `system` is `M x T x N`, `temporal` is `T x Kt`, `spatial` is `M x Ks`.
    pub fn new(
        system: Array3<f64>,
        temporal: Array2<f64>,
        spatial: Array2<f64>,
        observed_mask: Vec<bool>,
    ) -> Result<Self, ScmError> {
        let (m, t, _) = system.dim();
        if m == 0 || t == 0 {
            return Err(ScmError::Shape("need at least one dataset and one time step".into()));
        }
        if temporal.nrows() != t {
            return Err(ScmError::Shape(format!("temporal contexts have {} rows, expected {t}", temporal.nrows())));
        }
        if spatial.nrows() != m {
            return Err(ScmError::Shape(format!("spatial contexts have {} rows, expected {m}", spatial.nrows())));
        }
        if observed_mask.len() != temporal.ncols() + spatial.ncols() {
            return Err(ScmError::Shape("observed_mask length does not match the context count".into()));
        }
        let scales = Scales::ones(system.dim().2, temporal.ncols(), spatial.ncols());
        Ok(DatasetCollection { system, temporal, spatial, observed_mask, scales })
    }

    /// Assemble from one `T x N` array per dataset.
    pub fn from_datasets(
        datasets: &[Array2<f64>],
        temporal: Array2<f64>,
        spatial: Array2<f64>,
        observed_mask: Vec<bool>,
    ) -> Result<Self, ScmError> {
        let first = datasets.first().ok_or_else(|| ScmError::Shape("no datasets".into()))?;
        let (t, n) = first.dim();
        let mut system = Array3::zeros((datasets.len(), t, n));
        for (m, d) in datasets.iter().enumerate() {
            if d.dim() != (t, n) {
                return Err(ScmError::Shape(format!("dataset {m} has shape {:?}, expected {:?}", d.dim(), (t, n))));
            }
            system.index_axis_mut(Axis(0), m).assign(d);
        }
        Self::new(system, temporal, spatial, observed_mask)
    }

    pub fn with_scales(mut self, scales: Scales) -> Self {
        self.scales = scales;
        self
    }

    pub fn n_datasets(&self) -> usize {
        self.system.dim().0
    }

    pub fn n_times(&self) -> usize {
        self.system.dim().1
    }

    pub fn n_system(&self) -> usize {
        self.system.dim().2
    }

    pub fn n_temporal(&self) -> usize {
        self.temporal.ncols()
    }

    pub fn n_spatial(&self) -> usize {
        self.spatial.ncols()
    }

    pub fn system(&self) -> &Array3<f64> {
        &self.system
    }

    pub fn temporal(&self) -> &Array2<f64> {
        &self.temporal
    }

    pub fn spatial(&self) -> &Array2<f64> {
        &self.spatial
    }

    pub fn observed_mask(&self) -> &[bool] {
        &self.observed_mask
    }

    pub fn scales(&self) -> &Scales {
        &self.scales
    }

    /// Same data with a different observed/latent split of the contexts.
    pub fn with_observed(&self, observed_mask: Vec<bool>) -> Result<Self, ScmError> {
        if observed_mask.len() != self.observed_mask.len() {
            return Err(ScmError::Shape("observed_mask length does not match the context count".into()));
        }
        let mut out = self.clone();
        out.observed_mask = observed_mask;
        Ok(out)
    }

    /// Only the system variables, with every context removed.
    pub fn system_only(&self) -> Self {
        let m = self.n_datasets();
        DatasetCollection {
            system: self.system.clone(),
            temporal: Array2::zeros((self.n_times(), 0)),
            spatial: Array2::zeros((m, 0)),
            observed_mask: Vec::new(),
            scales: Scales { system: self.scales.system.clone(), temporal: vec![], spatial: vec![] },
        }
    }

    /// Roles of `[system, temporal, spatial]` in spec order.
    pub fn roles(&self) -> Vec<VariableRole> {
        let mut out = vec![VariableRole::System; self.n_system()];
        let kt = self.n_temporal();
        for (k, &obs) in self.observed_mask.iter().enumerate() {
            let base = if k < kt { VariableRole::TemporalContext } else { VariableRole::SpatialContext };
            out.push(if obs { base } else { base.as_latent() });
        }
        out
    }

    pub fn system_series(&self, m: usize, var: usize) -> ArrayView1<'_, f64> {
        self.system.slice(ndarray::s![m, .., var])
    }
}
