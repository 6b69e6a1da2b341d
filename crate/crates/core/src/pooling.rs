//! Row-pooling of a dataset collection into one design with dataset-respecting
//! lags and one-hot dummy blocks.
//!
//! Rows are `(m, t)` for every dataset `m` and `t in L..T` where `L` is the
//! largest lag that will ever be requested. Lagged columns are read from the
//! same dataset, so no row mixes datasets.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{NodeRef, VariableRole};
use crate::scm::DatasetCollection;

#[derive(Debug, Error)]
pub enum PoolError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("invalid selector {node}: {reason}")]
    Selection { node: NodeRef, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DummyEmbedding {
    #[default]
    OneHot,
    /// A single column holding the label `1..=levels`.
    Integer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolingOptions {
    /// Rows start at this time index in every dataset.
    pub max_lag: usize,
    pub include_dummies: bool,
    pub embedding: DummyEmbedding,
}

impl PoolingOptions {
    pub fn new(max_lag: usize) -> Self {
        PoolingOptions { max_lag, include_dummies: true, embedding: DummyEmbedding::OneHot }
    }
}

/// Group labels of a categorical dummy, one per pooled row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DummyBlock {
    n_levels: usize,
    labels: Vec<usize>,
}

impl DummyBlock {
    pub fn new(n_levels: usize, labels: Vec<usize>) -> Self {
        debug_assert!(labels.iter().all(|&l| l < n_levels));
        DummyBlock { n_levels, labels }
    }

    pub fn n_levels(&self) -> usize {
        self.n_levels
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// One level (constant) or one row per level (saturating): carries no usable
    /// signal for a CI test.
    pub fn is_degenerate(&self) -> bool {
        self.n_levels <= 1 || self.n_levels >= self.n_rows()
    }

    /// One-hot indicator column of `level`.
    pub fn indicator(&self, level: usize) -> Vec<f64> {
        self.labels.iter().map(|&l| if l == level { 1.0 } else { 0.0 }).collect()
    }

    pub fn one_hot(&self) -> Vec<Vec<f64>> {
        (0..self.n_levels).map(|k| self.indicator(k)).collect()
    }

    pub fn integer_column(&self) -> Vec<f64> {
        self.labels.iter().map(|&l| (l + 1) as f64).collect()
    }
}

/// Dataset label of every pooled row, `rows_per_dataset` rows per dataset.
pub fn build_space_dummy(n_datasets: usize, rows_per_dataset: usize) -> DummyBlock {
    let labels = (0..n_datasets).flat_map(|m| std::iter::repeat_n(m, rows_per_dataset)).collect();
    DummyBlock::new(n_datasets, labels)
}

/// Time label `t - max_lag` of every pooled row; levels are the pooled time indices.
pub fn build_time_dummy(n_datasets: usize, n_times: usize, max_lag: usize) -> DummyBlock {
    let levels = n_times.saturating_sub(max_lag);
    let labels = (0..n_datasets).flat_map(|_| 0..levels).collect();
    DummyBlock::new(levels, labels)
}

#[derive(Debug, Clone)]
enum Series {
    /// Full `M x T` raw series, index `m * T + t`.
    TimeVarying(Vec<f64>),
    /// One value per dataset.
    Static(Vec<f64>),
    Dummy(DummyBlock),
}

#[derive(Debug, Clone)]
pub struct PooledVariable {
    pub role: VariableRole,
    /// Index within its group of the source collection (system, temporal or spatial).
    pub source: usize,
    series: Series,
}

/// A conditioning or test block as seen by CI tests.
#[derive(Debug, Clone, Copy)]
pub enum Block<'a> {
    Dummy(&'a DummyBlock),
    Column,
}

#[derive(Debug, Clone)]
pub struct PooledData {
    vars: Vec<PooledVariable>,
    n_datasets: usize,
    n_times: usize,
    max_lag: usize,
    embedding: DummyEmbedding,
}

/// Pool system variables, observed contexts and (optionally) both dummies in the
/// layout `[system, observed temporal, observed spatial, time dummy, space dummy]`.
pub fn pool_data(dc: &DatasetCollection, opts: &PoolingOptions) -> Result<PooledData, PoolError> {
    let (m, t) = (dc.n_datasets(), dc.n_times());
    if t <= opts.max_lag {
        return Err(PoolError::Shape(format!("T = {t} must exceed the pooling lag {}", opts.max_lag)));
    }
    let mut vars = Vec::new();
    for i in 0..dc.n_system() {
        let s: Vec<f64> = (0..m).flat_map(|d| dc.system_series(d, i).to_vec()).collect();
        vars.push(PooledVariable { role: VariableRole::System, source: i, series: Series::TimeVarying(s) });
    }
    let kt = dc.n_temporal();
    for k in 0..kt {
        if dc.observed_mask()[k] {
            let col = dc.temporal().column(k).to_vec();
            let s: Vec<f64> = (0..m).flat_map(|_| col.iter().copied()).collect();
            vars.push(PooledVariable { role: VariableRole::TemporalContext, source: k, series: Series::TimeVarying(s) });
        }
    }
    for k in 0..dc.n_spatial() {
        if dc.observed_mask()[kt + k] {
            let s = dc.spatial().column(k).to_vec();
            vars.push(PooledVariable { role: VariableRole::SpatialContext, source: k, series: Series::Static(s) });
        }
    }
    if opts.include_dummies {
        let rows = t - opts.max_lag;
        vars.push(PooledVariable {
            role: VariableRole::TimeDummy,
            source: 0,
            series: Series::Dummy(build_time_dummy(m, t, opts.max_lag)),
        });
        vars.push(PooledVariable {
            role: VariableRole::SpaceDummy,
            source: 0,
            series: Series::Dummy(build_space_dummy(m, rows)),
        });
    }
    Ok(PooledData { vars, n_datasets: m, n_times: t, max_lag: opts.max_lag, embedding: opts.embedding })
}

impl PooledData {
    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn variables(&self) -> &[PooledVariable] {
        &self.vars
    }

    pub fn roles(&self) -> Vec<VariableRole> {
        self.vars.iter().map(|v| v.role).collect()
    }

    pub fn n_datasets(&self) -> usize {
        self.n_datasets
    }

    pub fn n_times(&self) -> usize {
        self.n_times
    }

    pub fn max_lag(&self) -> usize {
        self.max_lag
    }

    pub fn rows_per_dataset(&self) -> usize {
        self.n_times - self.max_lag
    }

    pub fn n_rows(&self) -> usize {
        self.n_datasets * self.rows_per_dataset()
    }

    pub fn embedding(&self) -> DummyEmbedding {
        self.embedding
    }

    /// `(dataset, time)` of every row.
    pub fn provenance(&self) -> Vec<(usize, usize)> {
        (0..self.n_datasets).flat_map(|m| (self.max_lag..self.n_times).map(move |t| (m, t))).collect()
    }

    fn check(&self, node: NodeRef) -> Result<&PooledVariable, PoolError> {
        let err = |reason: String| PoolError::Selection { node, reason };
        let v = self.vars.get(node.var).ok_or_else(|| err(format!("only {} variables", self.vars.len())))?;
        if node.lag > self.max_lag {
            return Err(err(format!("lag exceeds the pooling lag {}", self.max_lag)));
        }
        if node.lag > 0 && !matches!(v.series, Series::TimeVarying(_)) {
            return Err(err(format!("{} variables only exist at lag 0", v.role)));
        }
        Ok(v)
    }

    /// How a node enters a CI test: a dummy block (one-hot embedding) or plain columns.
    pub fn block(&self, node: NodeRef) -> Result<Block<'_>, PoolError> {
        let v = self.check(node)?;
        Ok(match (&v.series, self.embedding) {
            (Series::Dummy(d), DummyEmbedding::OneHot) => Block::Dummy(d),
            _ => Block::Column,
        })
    }

    pub fn dummy(&self, var: usize) -> Option<&DummyBlock> {
        match &self.vars.get(var)?.series {
            Series::Dummy(d) => Some(d),
            _ => None,
        }
    }

    /// Single pooled column of a non-block node (dummies use their integer embedding).
    pub fn column(&self, node: NodeRef) -> Result<Vec<f64>, PoolError> {
        let v = self.check(node)?;
        let rows = self.rows_per_dataset();
        Ok(match &v.series {
            Series::TimeVarying(s) => {
                let mut out = Vec::with_capacity(self.n_rows());
                for m in 0..self.n_datasets {
                    let base = m * self.n_times + self.max_lag - node.lag;
                    out.extend_from_slice(&s[base..base + rows]);
                }
                out
            }
            Series::Static(s) => s.iter().flat_map(|&x| std::iter::repeat_n(x, rows)).collect(),
            Series::Dummy(d) => d.integer_column(),
        })
    }

    /// All columns selected by `selectors`, dummy blocks expanded per the embedding.
    pub fn extract(&self, selectors: &[NodeRef]) -> Result<Vec<Vec<f64>>, PoolError> {
        let mut out = Vec::new();
        for &node in selectors {
            match self.block(node)? {
                Block::Dummy(d) => out.extend(d.one_hot()),
                Block::Column => out.push(self.column(node)?),
            }
        }
        Ok(out)
    }

    /// Column labels `role:var:component` matching `extract` of all lag-0 nodes.
    pub fn descriptors(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (k, v) in self.vars.iter().enumerate() {
            match (&v.series, self.embedding) {
                (Series::Dummy(d), DummyEmbedding::OneHot) => {
                    out.extend((0..d.n_levels()).map(|c| format!("{}:{k}:{c}", v.role)));
                }
                _ => out.push(format!("{}:{k}:0", v.role)),
            }
        }
        out
    }

    /// Lag-0 pooled matrix as CSV with provenance columns and a descriptor header.
    pub fn write_csv(&self, path: &Path) -> Result<(), PoolError> {
        let all: Vec<NodeRef> = (0..self.n_vars()).map(|v| NodeRef::new(v, 0)).collect();
        let cols = self.extract(&all)?;
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "m,t,{}", self.descriptors().join(","))?;
        for (r, (m, t)) in self.provenance().into_iter().enumerate() {
            write!(w, "{m},{t}")?;
            for c in &cols {
                write!(w, ",{}", c[r])?;
            }
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }
}
