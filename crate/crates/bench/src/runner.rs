use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use jtscd_core::citests::{OracleCi, ParCorr};
use jtscd_core::discovery::{run_variant, Variant};
use jtscd_core::graph::GroundTruthGraph;
use jtscd_core::metrics::{aggregate, score_against, LinkClass, Metric, ScoreReport, Summary};
use jtscd_core::pooling::{pool_data, PoolingOptions};
use jtscd_core::scm::{generate_random_model, simplified_preset, simulate, ModelParams, ScmSpec};

use crate::config::{Cell, CiKind, ExperimentConfig, ModelSource};

#[derive(Debug, Clone, Serialize)]
pub struct CellResult {
    pub cell: Cell,
    pub variant: Variant,
    pub reports: Vec<ScoreReport>,
    /// `realization: message` for every run that did not produce a score.
    pub failures: Vec<String>,
    #[serde(skip)]
    pub summary: BTreeMap<(LinkClass, Metric), Summary>,
}

impl CellResult {
    pub fn get(&self, class: LinkClass, metric: Metric) -> Option<Summary> {
        self.summary.get(&(class, metric)).copied()
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResults {
    pub config: ExperimentConfig,
    /// Cells in grid order, variants in config order within each cell.
    pub cells: Vec<CellResult>,
}

impl ExperimentResults {
    pub fn failed(&self) -> bool {
        self.cells.iter().any(|c| !c.failures.is_empty())
    }

    pub fn find(&self, t: usize, m: usize, frac: f64, variant: Variant) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.cell.t == t && c.cell.m == m && c.cell.frac == frac && c.variant == variant)
    }
}

fn model(cfg: &ExperimentConfig, cell: &Cell, r: usize) -> Result<(ScmSpec, GroundTruthGraph), String> {
    match cfg.model_source {
        ModelSource::SimplifiedPreset => Ok(simplified_preset()),
        ModelSource::Random => {
            let params = ModelParams { seed: cell.model_seed(cfg.master_seed, r), frac_observed: cell.frac, ..cfg.model.clone() };
            generate_random_model(&params).map_err(|e| e.to_string())
        }
    }
}

/// One realization of one cell: every variant scored against the target graph.
pub fn run_realization(cfg: &ExperimentConfig, cell: &Cell, r: usize) -> Vec<Result<ScoreReport, String>> {
    let fail_all = |e: String| cfg.variants.iter().map(|_| Err(e.clone())).collect();
    let (spec, gt) = match model(cfg, cell, r) {
        Ok(v) => v,
        Err(e) => return fail_all(format!("model: {e}")),
    };
    let tau = cfg.discovery.tau_max;
    let score = |res: Result<jtscd_core::discovery::DiscoveryResult, String>| {
        res.and_then(|d| score_against(&d.graph, &gt, cfg.context_scoring).map_err(|e| e.to_string()))
    };
    match cfg.ci {
        CiKind::Oracle => {
            let o = match OracleCi::projected(&gt, true, 2 * tau) {
                Ok(o) => o,
                Err(e) => return fail_all(format!("oracle: {e}")),
            };
            let roles = o.layout_roles();
            cfg.variants.iter().map(|&v| score(run_variant(v, &o, &roles, &cfg.discovery).map_err(|e| e.to_string()))).collect()
        }
        CiKind::Parcorr => {
            let dc = match simulate(&spec, cell.m, cell.t, cfg.burn_in, cell.data_seed(cfg.master_seed, r)) {
                Ok(dc) => dc,
                Err(e) => return fail_all(format!("simulate: {e}")),
            };
            let pd = match pool_data(&dc, &PoolingOptions::new(2 * tau)) {
                Ok(pd) => pd,
                Err(e) => return fail_all(format!("pool: {e}")),
            };
            let ci = ParCorr::with_options(&pd, cfg.parcorr);
            let roles = pd.roles();
            cfg.variants.iter().map(|&v| score(run_variant(v, &ci, &roles, &cfg.discovery).map_err(|e| e.to_string()))).collect()
        }
    }
}

/// Run every cell and realization in parallel and aggregate per cell and
/// variant. Failed runs are recorded and left out of the aggregates.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResults, String> {
    cfg.validate()?;
    let cells = cfg.cells();
    let jobs: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..cfg.n_realizations).map(move |r| (c, r))).collect();
    let outcomes: Vec<Vec<Result<ScoreReport, String>>> =
        jobs.par_iter().map(|&(c, r)| run_realization(cfg, &cells[c], r)).collect();

    let mut out = Vec::new();
    for (c, cell) in cells.iter().enumerate() {
        for (k, &variant) in cfg.variants.iter().enumerate() {
            let mut reports = Vec::new();
            let mut failures = Vec::new();
            for r in 0..cfg.n_realizations {
                match &outcomes[c * cfg.n_realizations + r][k] {
                    Ok(rep) => reports.push(rep.clone()),
                    Err(e) => failures.push(format!("{r}: {e}")),
                }
            }
            let summary = aggregate(&reports).unwrap_or_default();
            out.push(CellResult { cell: *cell, variant, reports, failures, summary });
        }
    }
    Ok(ExperimentResults { config: cfg.clone(), cells: out })
}
