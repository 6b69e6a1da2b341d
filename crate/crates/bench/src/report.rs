use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use jtscd_core::metrics::{LinkClass, Metric};

use crate::runner::ExperimentResults;
use crate::svg;

/// Classes written to the CSV; the dummy class has no target to score against.
pub const CSV_CLASSES: [LinkClass; 2] = [LinkClass::SystemSystem, LinkClass::ContextSystem];

pub const CSV_HEADER: [&str; 9] = ["variant", "T", "M", "frac_observed", "class", "metric", "mean", "std", "n_realizations"];

fn num(v: Option<f64>) -> String {
    v.map_or_else(|| "NaN".to_string(), |x| format!("{x:.6}"))
}

/// One row per cell, variant, class and metric.
pub fn write_csv(results: &ExperimentResults, path: &Path) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CSV_HEADER)?;
    for c in &results.cells {
        for class in CSV_CLASSES {
            for metric in Metric::ALL {
                let s = c.get(class, metric);
                w.write_record([
                    c.variant.name().to_string(),
                    c.cell.t.to_string(),
                    c.cell.m.to_string(),
                    format!("{:.6}", c.cell.frac),
                    class.name().to_string(),
                    metric.name().to_string(),
                    num(s.map(|s| s.mean)),
                    num(s.map(|s| s.std)),
                    s.map_or(0, |s| s.n).to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

const SUMMARY_METRICS: [(LinkClass, Metric); 4] = [
    (LinkClass::SystemSystem, Metric::Fpr),
    (LinkClass::SystemSystem, Metric::Tpr),
    (LinkClass::ContextSystem, Metric::Tpr),
    (LinkClass::ContextSystem, Metric::Fpr),
];

/// Markdown tables, one per headline metric, with a row per grid cell and a
/// column per variant.
pub fn compare_variants(results: &ExperimentResults) -> String {
    let cfg = &results.config;
    let mut s = String::new();
    let _ = writeln!(s, "# Variant comparison\n");
    let _ = writeln!(
        s,
        "{} realizations per cell, alpha = {}, tau_max = {}, CI test {:?}, master seed {}.\n",
        cfg.n_realizations, cfg.discovery.alpha, cfg.discovery.tau_max, cfg.ci, cfg.master_seed
    );
    for (class, metric) in SUMMARY_METRICS {
        let _ = writeln!(s, "## {class} {metric}\n");
        let mut header = "| T | M | frac_observed |".to_string();
        let mut rule = "|---|---|---|".to_string();
        for v in &cfg.variants {
            let _ = write!(header, " {v} |");
            rule.push_str("---|");
        }
        let _ = writeln!(s, "{header}\n{rule}");
        for cell in cfg.cells() {
            let _ = write!(s, "| {} | {} | {} |", cell.t, cell.m, cell.frac);
            for &v in &cfg.variants {
                let cell_text = results
                    .find(cell.t, cell.m, cell.frac, v)
                    .and_then(|c| c.get(class, metric))
                    .map_or_else(|| "n/a".to_string(), |x| format!("{:.3} ± {:.3}", x.mean, x.std));
                let _ = write!(s, " {cell_text} |");
            }
            let _ = writeln!(s);
        }
        let _ = writeln!(s);
    }
    let failures: Vec<_> = results.cells.iter().filter(|c| !c.failures.is_empty()).collect();
    if !failures.is_empty() {
        let _ = writeln!(s, "## Failures\n");
        for c in failures {
            let _ = writeln!(
                s,
                "- {} T={} M={} frac={}: {} failed runs, first: {}",
                c.variant,
                c.cell.t,
                c.cell.m,
                c.cell.frac,
                c.failures.len(),
                c.failures[0]
            );
        }
    }
    s
}

/// `results.csv`, `summary.md`, one line chart per class and metric, and one
/// heat map per variant when both T and M vary.
pub fn write_outputs(results: &ExperimentResults, dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    write_csv(results, &dir.join("results.csv")).map_err(io::Error::other)?;
    fs::write(dir.join("summary.md"), compare_variants(results))?;
    for class in CSV_CLASSES {
        for metric in Metric::ALL {
            fs::write(dir.join(format!("{class}_{metric}.svg")), svg::metric_chart(results, class, metric))?;
        }
    }
    let cfg = &results.config;
    if cfg.t_values.len() > 1 && cfg.m_values.len() > 1 {
        for &v in &cfg.variants {
            for &frac in &cfg.frac_observed {
                let name = format!("heatmap_{v}_frac{frac}_system_system_fpr.svg");
                fs::write(dir.join(name), svg::fpr_heatmap(results, v, frac))?;
            }
        }
    }
    Ok(())
}
