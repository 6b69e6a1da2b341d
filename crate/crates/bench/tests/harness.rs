use jtscd_bench::{mix, run_experiment, write_outputs, Cell, CiKind, ExperimentConfig};
use jtscd_core::discovery::Variant;
use jtscd_core::metrics::{LinkClass, Metric};

#[test]
fn partial_json_config_fills_defaults() {
    let cfg: ExperimentConfig = serde_json::from_str(r#"{"t_values": [30], "variants": ["pcmci+C"]}"#).unwrap();
    assert_eq!(cfg.t_values, vec![30]);
    assert_eq!(cfg.variants, vec![Variant::PcmciPlusC]);
    assert_eq!(cfg.m_values, vec![10]);
    assert_eq!(cfg.n_realizations, 50);
    assert!(cfg.validate().is_ok());

    for bad in [r#"{"t_values": []}"#, r#"{"frac_observed": [1.5]}"#, r#"{"m_values": [0]}"#, r#"{"n_realizations": 0}"#] {
        let cfg: ExperimentConfig = serde_json::from_str(bad).unwrap();
        assert!(cfg.validate().is_err(), "{bad}");
    }
}

#[test]
fn cells_follow_grid_order() {
    let cfg = ExperimentConfig { t_values: vec![20, 50], m_values: vec![3, 5, 7], frac_observed: vec![0.0, 1.0], ..Default::default() };
    let cells = cfg.cells();
    assert_eq!(cells.len(), 12);
    assert_eq!(cells[0], Cell { t: 20, m: 3, frac: 0.0 });
    assert_eq!(cells[1], Cell { t: 20, m: 3, frac: 1.0 });
    assert_eq!(cells[11], Cell { t: 50, m: 7, frac: 1.0 });
}

#[test]
fn seeds_share_models_across_sizes_only() {
    let a = Cell { t: 20, m: 5, frac: 0.5 };
    let b = Cell { t: 200, m: 10, frac: 0.5 };
    let c = Cell { t: 20, m: 5, frac: 1.0 };
    assert_eq!(a.model_seed(1, 3), b.model_seed(1, 3));
    assert_ne!(a.model_seed(1, 3), c.model_seed(1, 3));
    assert_ne!(a.model_seed(1, 3), a.model_seed(1, 4));
    assert_ne!(a.model_seed(1, 3), a.model_seed(2, 3));
    assert_ne!(a.data_seed(1, 3), b.data_seed(1, 3));
    assert_eq!(mix(&[1, 2]), mix(&[1, 2]));
    assert_ne!(mix(&[1, 2]), mix(&[2, 1]));
}

#[test]
fn oracle_grid_with_observed_contexts_scores_perfectly() {
    let cfg = ExperimentConfig {
        t_values: vec![50],
        m_values: vec![4],
        frac_observed: vec![1.0],
        variants: vec![Variant::JPcmciPlus],
        n_realizations: 8,
        ci: CiKind::Oracle,
        master_seed: 21,
        ..Default::default()
    };
    let r = run_experiment(&cfg).unwrap();
    assert!(!r.failed());
    let c = r.find(50, 4, 1.0, Variant::JPcmciPlus).unwrap();
    assert_eq!(c.reports.len(), 8);
    for class in [LinkClass::SystemSystem, LinkClass::ContextSystem] {
        let tpr = c.get(class, Metric::Tpr).unwrap();
        assert_eq!((tpr.mean, tpr.std), (1.0, 0.0), "{class}");
        assert_eq!(c.get(class, Metric::Fpr).unwrap().mean, 0.0, "{class}");
    }
}

#[test]
fn outputs_have_one_row_per_cell_variant_class_metric() {
    let cfg = ExperimentConfig {
        t_values: vec![30, 60],
        m_values: vec![3, 4],
        variants: vec![Variant::JPcmciPlus, Variant::PcmciPlus],
        n_realizations: 2,
        master_seed: 5,
        ..Default::default()
    };
    let r = run_experiment(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_outputs(&r, dir.path()).unwrap();

    let mut rd = csv::Reader::from_path(dir.path().join("results.csv")).unwrap();
    let header: Vec<String> = rd.headers().unwrap().iter().map(str::to_string).collect();
    assert_eq!(header, ["variant", "T", "M", "frac_observed", "class", "metric", "mean", "std", "n_realizations"]);
    let rows: Vec<csv::StringRecord> = rd.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4 * 2 * 2 * 4);
    for row in &rows {
        assert!(["jpcmci+", "pcmci+"].contains(&&row[0]));
        assert!(["system_system", "context_system"].contains(&&row[4]));
        let mean = &row[6];
        assert!(mean == "NaN" || mean.parse::<f64>().unwrap().is_finite());
        assert_eq!(mean.split('.').nth(1).map_or(6, str::len), 6, "{mean}");
    }
    // pcmci+ never sees contexts, so its context TPR is 0 wherever the class has positives.
    for row in rows.iter().filter(|r| &r[0] == "pcmci+" && &r[4] == "context_system" && &r[5] == "tpr") {
        assert!(&row[6] == "NaN" || &row[6] == "0.000000", "{row:?}");
    }

    let summary = std::fs::read_to_string(dir.path().join("summary.md")).unwrap();
    assert!(summary.contains("| jpcmci+ | pcmci+ |") || summary.contains(" jpcmci+ | pcmci+ |"));
    for name in ["system_system_fpr.svg", "context_system_tpr.svg", "heatmap_jpcmci+_frac0.5_system_system_fpr.svg"] {
        let svg = std::fs::read_to_string(dir.path().join(name)).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"), "{name}");
    }
}
