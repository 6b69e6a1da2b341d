//! On-disk layout of a dataset collection: `dataset_0000.csv`, ... with columns
//! `t, X0.., Ctime0.., Cspace0..` plus `meta.json`.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{DatasetCollection, Scales, ScmError, ScmSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub n_datasets: usize,
    pub n_times: usize,
    pub n_system: usize,
    pub n_temporal_ctx: usize,
    pub n_spatial_ctx: usize,
    pub observed_mask: Vec<bool>,
    #[serde(default)]
    pub spec: Option<ScmSpec>,
    #[serde(default)]
    pub model_seed: Option<u64>,
    #[serde(default)]
    pub data_seed: Option<u64>,
    #[serde(default)]
    pub burn_in: Option<usize>,
    #[serde(default)]
    pub scales: Option<Scales>,
}

impl Sidecar {
    pub fn describe(dc: &DatasetCollection) -> Self {
        Sidecar {
            n_datasets: dc.n_datasets(),
            n_times: dc.n_times(),
            n_system: dc.n_system(),
            n_temporal_ctx: dc.n_temporal(),
            n_spatial_ctx: dc.n_spatial(),
            observed_mask: dc.observed_mask().to_vec(),
            spec: None,
            model_seed: None,
            data_seed: None,
            burn_in: None,
            scales: Some(dc.scales().clone()),
        }
    }
}

pub const META_FILE: &str = "meta.json";

pub fn dataset_file(m: usize) -> String {
    format!("dataset_{m:04}.csv")
}

fn header(n: usize, kt: usize, ks: usize) -> Vec<String> {
    std::iter::once("t".to_string())
        .chain((0..n).map(|i| format!("X{i}")))
        .chain((0..kt).map(|k| format!("Ctime{k}")))
        .chain((0..ks).map(|k| format!("Cspace{k}")))
        .collect()
}

/// Write one CSV per dataset and the JSON sidecar. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn write_collection(dir: &Path, dc: &DatasetCollection, sidecar: &Sidecar) -> Result<(), ScmError> {
    fs::create_dir_all(dir)?;
    let (n, kt, ks) = (dc.n_system(), dc.n_temporal(), dc.n_spatial());
    for m in 0..dc.n_datasets() {
        let mut w = csv::Writer::from_path(dir.join(dataset_file(m)))?;
        w.write_record(header(n, kt, ks))?;
        for t in 0..dc.n_times() {
            let mut row = vec![t.to_string()];
            row.extend((0..n).map(|i| dc.system()[(m, t, i)].to_string()));
            row.extend((0..kt).map(|k| dc.temporal()[(t, k)].to_string()));
            row.extend((0..ks).map(|k| dc.spatial()[(m, k)].to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
    }
    fs::write(dir.join(META_FILE), serde_json::to_string_pretty(sidecar)? + "\n")?;
    Ok(())
}

pub fn read_collection(dir: &Path) -> Result<(DatasetCollection, Sidecar), ScmError> {
    let sidecar: Sidecar = serde_json::from_str(&fs::read_to_string(dir.join(META_FILE))?)?;
    let (m, n, kt, ks) = (sidecar.n_datasets, sidecar.n_system, sidecar.n_temporal_ctx, sidecar.n_spatial_ctx);
    let expected = header(n, kt, ks);
    let mut per_dataset = Vec::with_capacity(m);
    let mut temporal: Option<Array2<f64>> = None;
    let mut spatial = Array2::<f64>::zeros((m, ks));
    for d in 0..m {
        let mut r = csv::Reader::from_path(dir.join(dataset_file(d)))?;
        let got: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if got != expected {
            return Err(ScmError::Shape(format!("dataset {d}: unexpected columns {got:?}")));
        }
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let vals = rec
                .iter()
                .skip(1)
                .map(|s| s.parse::<f64>().map_err(|e| ScmError::Shape(format!("dataset {d}: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(vals);
        }
        let t = rows.len();
        let sys = Array2::from_shape_fn((t, n), |(s, i)| rows[s][i]);
        let tmp = Array2::from_shape_fn((t, kt), |(s, k)| rows[s][n + k]);
        match &temporal {
            None => temporal = Some(tmp),
            Some(first) if first.dim() != tmp.dim() => {
                return Err(ScmError::Shape(format!("dataset {d} has {t} rows, expected {}", first.nrows())))
            }
            Some(first) if first != tmp => {
                return Err(ScmError::Shape(format!("dataset {d}: temporal contexts differ from dataset 0")))
            }
            _ => {}
        }
        for k in 0..ks {
            let col = n + kt + k;
            let v = rows.first().map(|r| r[col]).unwrap_or(0.0);
            if rows.iter().any(|r| r[col] != v) {
                return Err(ScmError::Shape(format!("dataset {d}: spatial context {k} varies over time")));
            }
            spatial[(d, k)] = v;
        }
        per_dataset.push(sys);
    }
    let temporal = temporal.ok_or_else(|| ScmError::Shape("no datasets".into()))?;
    let mut dc = DatasetCollection::from_datasets(&per_dataset, temporal, spatial, sidecar.observed_mask.clone())?;
    if let Some(s) = &sidecar.scales {
        dc = dc.with_scales(s.clone());
    }
    Ok((dc, sidecar))
}
