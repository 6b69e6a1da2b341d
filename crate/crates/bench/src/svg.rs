//! Hand-written SVG: multi-series line charts and a value heat map.

use std::fmt::Write as _;

use jtscd_core::discovery::Variant;
use jtscd_core::metrics::{LinkClass, Metric};

use crate::runner::ExperimentResults;

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

fn open(s: &mut String, w: f64, h: f64, title: &str) {
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title));
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Mean of `class`/`metric` against T (or M when T is fixed), one curve per
/// variant and per value of the remaining grid dimensions.
pub fn metric_chart(results: &ExperimentResults, class: LinkClass, metric: Metric) -> String {
    let cfg = &results.config;
    let by_t = cfg.t_values.len() > 1 || cfg.m_values.len() == 1;
    let xs: Vec<usize> = if by_t { cfg.t_values.clone() } else { cfg.m_values.clone() };
    let others: Vec<(usize, f64)> = if by_t {
        cfg.m_values.iter().flat_map(|&m| cfg.frac_observed.iter().map(move |&f| (m, f))).collect()
    } else {
        cfg.t_values.iter().flat_map(|&t| cfg.frac_observed.iter().map(move |&f| (t, f))).collect()
    };
    let mut s = String::new();
    open(&mut s, W, H, &format!("{class} {metric}"));
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let px = |k: usize| LEFT + if xs.len() > 1 { pw * k as f64 / (xs.len() - 1) as f64 } else { pw / 2.0 };
    let py = |v: f64| TOP + ph * (1.0 - v.clamp(0.0, 1.0));
    let _ = writeln!(s, r#"<g stroke="black" fill="none"><line x1="{LEFT}" y1="{}" x2="{}" y2="{}"/><line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{}"/></g>"#, TOP + ph, LEFT + pw, TOP + ph, TOP + ph);
    for tick in 0..=4 {
        let v = tick as f64 / 4.0;
        let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{y}" x2="{}" y2="{y}" stroke="#ddd"/><text x="{}" y="{}" text-anchor="end">{v:.2}</text>"##, LEFT + pw, LEFT - 6.0, py(v) + 4.0, y = py(v));
    }
    for (k, x) in xs.iter().enumerate() {
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{x}</text>"#, px(k), TOP + ph + 18.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, H - 10.0, if by_t { "T" } else { "M" });
    let mut series = 0;
    for &v in &cfg.variants {
        for &(other, frac) in &others {
            let color = COLORS[series % COLORS.len()];
            let points: Vec<(f64, f64)> = xs
                .iter()
                .enumerate()
                .filter_map(|(k, &x)| {
                    let (t, m) = if by_t { (x, other) } else { (other, x) };
                    results.find(t, m, frac, v).and_then(|c| c.get(class, metric)).map(|sm| (px(k), py(sm.mean)))
                })
                .collect();
            if !points.is_empty() {
                let path: Vec<String> = points.iter().map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
                let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, path.join(" "));
                for (x, y) in &points {
                    let _ = writeln!(s, r#"<circle cx="{x:.1}" cy="{y:.1}" r="3" fill="{color}"/>"#);
                }
            }
            let label = if others.len() > 1 {
                format!("{v} ({}={other}, frac={frac})", if by_t { "M" } else { "T" })
            } else {
                v.to_string()
            };
            let ly = TOP + 16.0 * series as f64;
            let _ = writeln!(s, r#"<rect x="{}" y="{}" width="12" height="3" fill="{color}"/><text x="{}" y="{}">{}</text>"#, W - RIGHT + 12.0, ly + 4.0, W - RIGHT + 30.0, ly + 9.0, escape(&label));
            series += 1;
        }
    }
    s.push_str("</svg>\n");
    s
}

/// System-system FPR of one variant over the T by M grid.
pub fn fpr_heatmap(results: &ExperimentResults, variant: Variant, frac: f64) -> String {
    let cfg = &results.config;
    let (nt, nm) = (cfg.t_values.len(), cfg.m_values.len());
    let cell = 56.0;
    let (w, h) = (LEFT + cell * nt as f64 + 40.0, TOP + cell * nm as f64 + BOTTOM);
    let vals: Vec<Vec<Option<f64>>> = cfg
        .m_values
        .iter()
        .map(|&m| {
            cfg.t_values
                .iter()
                .map(|&t| results.find(t, m, frac, variant).and_then(|c| c.get(LinkClass::SystemSystem, Metric::Fpr)).map(|s| s.mean))
                .collect()
        })
        .collect();
    let vmax = vals.iter().flatten().flatten().copied().fold(0.0f64, f64::max).max(1e-12);
    let mut s = String::new();
    open(&mut s, w, h, &format!("{variant} system_system fpr, frac_observed={frac}"));
    for (r, m) in cfg.m_values.iter().enumerate() {
        let y = TOP + cell * (nm - 1 - r) as f64;
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{m}</text>"#, LEFT - 6.0, y + cell / 2.0 + 4.0);
        for (c, v) in vals[r].iter().enumerate() {
            let x = LEFT + cell * c as f64;
            let (fill, label) = match v {
                Some(v) => {
                    let shade = (255.0 * (1.0 - v / vmax)).round() as u8;
                    (format!("rgb(255,{shade},{shade})"), format!("{v:.3}"))
                }
                None => ("#eee".to_string(), "n/a".to_string()),
            };
            let _ = writeln!(s, r#"<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{fill}" stroke="white"/><text x="{}" y="{}" text-anchor="middle" font-size="10">{label}</text>"#, x + cell / 2.0, y + cell / 2.0 + 4.0);
        }
    }
    for (c, t) in cfg.t_values.iter().enumerate() {
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{t}</text>"#, LEFT + cell * c as f64 + cell / 2.0, TOP + cell * nm as f64 + 18.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">T</text><text x="14" y="{}">M</text>"#, LEFT + cell * nt as f64 / 2.0, h - 10.0, TOP + cell * nm as f64 / 2.0);
    s.push_str("</svg>\n");
    s
}
