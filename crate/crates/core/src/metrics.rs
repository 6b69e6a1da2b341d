//! Scoring of estimated graphs: adjacency TPR/FPR and edgemark precision and
//! recall per link class, plus mean and sample standard deviation over
//! realizations.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{dummy_deletion, target_graph, EdgeMark, GroundTruthGraph, TimeSeriesGraph, VariableRole};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("variable sets differ: estimated {estimated:?}, target {target:?}")]
    VariableMismatch { estimated: Vec<VariableRole>, target: Vec<VariableRole> },
    #[error("nothing to aggregate")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkClass {
    SystemSystem,
    ContextSystem,
    DummySystem,
}

impl LinkClass {
    pub const ALL: [LinkClass; 3] = [LinkClass::SystemSystem, LinkClass::ContextSystem, LinkClass::DummySystem];

    pub fn name(self) -> &'static str {
        match self {
            LinkClass::SystemSystem => "system_system",
            LinkClass::ContextSystem => "context_system",
            LinkClass::DummySystem => "dummy_system",
        }
    }

    /// Class of a link between variables of roles `a` and `b`, if scored.
    pub fn of(a: VariableRole, b: VariableRole) -> Option<LinkClass> {
        let class = |o: VariableRole| {
            if o.is_system() {
                Some(LinkClass::SystemSystem)
            } else if o.is_context() {
                Some(LinkClass::ContextSystem)
            } else if o.is_dummy() {
                Some(LinkClass::DummySystem)
            } else {
                None
            }
        };
        match (a.is_system(), b.is_system()) {
            (true, true) => Some(LinkClass::SystemSystem),
            (true, false) => class(b),
            (false, true) => class(a),
            (false, false) => None,
        }
    }
}

impl fmt::Display for LinkClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Tpr,
    Fpr,
    EdgemarkPrecision,
    EdgemarkRecall,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Tpr, Metric::Fpr, Metric::EdgemarkPrecision, Metric::EdgemarkRecall];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Tpr => "tpr",
            Metric::Fpr => "fpr",
            Metric::EdgemarkPrecision => "edgemark_precision",
            Metric::EdgemarkRecall => "edgemark_recall",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Counts for one link class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassScore {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    /// True links whose estimated mark equals the true one.
    pub marks_correct_on_true: usize,
    /// Estimated links carrying an orientation (conflicts included).
    pub marks_predicted: usize,
    /// Of those, the ones matching the target.
    pub marks_predicted_correct: usize,
}

fn ratio(a: usize, b: usize) -> Option<f64> {
    (b > 0).then(|| a as f64 / b as f64)
}

impl ClassScore {
    pub fn positives(&self) -> usize {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> usize {
        self.fp + self.tn
    }

    pub fn metric(&self, m: Metric) -> Option<f64> {
        match m {
            Metric::Tpr => ratio(self.tp, self.positives()),
            Metric::Fpr => ratio(self.fp, self.negatives()),
            Metric::EdgemarkPrecision => ratio(self.marks_predicted_correct, self.marks_predicted),
            Metric::EdgemarkRecall => ratio(self.marks_correct_on_true, self.positives()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub classes: BTreeMap<LinkClass, ClassScore>,
}

impl ScoreReport {
    pub fn get(&self, c: LinkClass) -> Option<&ClassScore> {
        self.classes.get(&c)
    }

    pub fn metric(&self, c: LinkClass, m: Metric) -> Option<f64> {
        self.get(c).and_then(|s| s.metric(m))
    }
}

/// Slots of the grid: lagged `(i, j, τ)` into a system `j` for τ ≥ 1 where
/// both ends are temporal, and one slot per unordered pair at lag 0.
fn slots(roles: &[VariableRole], tau_max: usize) -> Vec<(usize, usize, usize, LinkClass)> {
    let n = roles.len();
    let mut out = Vec::new();
    for j in (0..n).filter(|&j| roles[j].is_system()) {
        for i in 0..n {
            let Some(class) = LinkClass::of(roles[i], roles[j]) else { continue };
            if i != j && (i < j || !roles[i].is_system()) {
                out.push((i, j, 0, class));
            }
            if !roles[i].is_static() {
                out.extend((1..=tau_max).map(|l| (i, j, l, class)));
            }
        }
    }
    out
}

fn score_slots(est: &TimeSeriesGraph, target: &TimeSeriesGraph, classes: &[LinkClass], extra_positives: usize) -> ScoreReport {
    let tau = est.tau_max().max(target.tau_max());
    let mut report = ScoreReport::default();
    for &c in classes {
        report.classes.insert(c, ClassScore::default());
    }
    for (i, j, l, class) in slots(target.roles(), tau) {
        let Some(s) = report.classes.get_mut(&class) else { continue };
        let (t, e) = (target.mark(i, j, l), est.mark(i, j, l));
        match (t.is_present(), e.is_present()) {
            (true, true) => s.tp += 1,
            (true, false) => s.fn_ += 1,
            (false, true) => s.fp += 1,
            (false, false) => s.tn += 1,
        }
        if t.is_present() && e == t && t != EdgeMark::CircleCircle {
            s.marks_correct_on_true += 1;
        }
        if e.is_present() && e != EdgeMark::CircleCircle {
            s.marks_predicted += 1;
            if e == t {
                s.marks_predicted_correct += 1;
            }
        }
    }
    if extra_positives > 0 {
        if let Some(s) = report.classes.get_mut(&LinkClass::ContextSystem) {
            s.fn_ += extra_positives;
        }
    }
    report
}

/// Score `estimated` against `target`. Dummies are deleted from both before
/// scoring the system and context classes; the dummy class is scored only
/// when both graphs share the same dummy layout.
pub fn score(estimated: &TimeSeriesGraph, target: &TimeSeriesGraph) -> Result<ScoreReport, MetricsError> {
    score_with_extra(estimated, target, 0)
}

fn score_with_extra(estimated: &TimeSeriesGraph, target: &TimeSeriesGraph, extra: usize) -> Result<ScoreReport, MetricsError> {
    let (e, t) = (dummy_deletion(estimated), dummy_deletion(target));
    if e.roles() != t.roles() {
        return Err(MetricsError::VariableMismatch { estimated: e.roles().to_vec(), target: t.roles().to_vec() });
    }
    let mut report = score_slots(&e, &t, &[LinkClass::SystemSystem, LinkClass::ContextSystem], extra);
    let has_dummies = target.roles().iter().any(|r| r.is_dummy());
    if has_dummies && estimated.roles() == target.roles() {
        let d = score_slots(estimated, target, &[LinkClass::DummySystem], 0);
        report.classes.extend(d.classes);
    }
    Ok(report)
}

/// How context-system positives are counted against a ground truth.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextScoring {
    /// Only links from observed contexts.
    #[default]
    ObservedOnly,
    /// Latent-context links count as positives that can never be found, so the
    /// context TPR is capped by the observed share of context links.
    IncludeLatent,
}

/// Score against `target_graph(gt)`.
pub fn score_against(estimated: &TimeSeriesGraph, gt: &GroundTruthGraph, mode: ContextScoring) -> Result<ScoreReport, MetricsError> {
    let extra = match mode {
        ContextScoring::ObservedOnly => 0,
        ContextScoring::IncludeLatent => gt
            .directed_edges()
            .into_iter()
            .filter(|(p, c)| gt.role(p.var).is_latent() && gt.role(*c).is_system())
            .count(),
    };
    score_with_extra(estimated, &target_graph(gt), extra)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    /// Realizations where the metric was defined.
    pub n: usize,
}

/// Mean and sample standard deviation of the defined values; `None` when
/// there are none.
pub fn summarize(values: &[f64]) -> Option<Summary> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Some(Summary { mean, std, n })
}

/// Elementwise mean and sample standard deviation of every metric.
pub fn aggregate(reports: &[ScoreReport]) -> Result<BTreeMap<(LinkClass, Metric), Summary>, MetricsError> {
    if reports.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut out = BTreeMap::new();
    for c in LinkClass::ALL {
        for m in Metric::ALL {
            let vals: Vec<f64> = reports.iter().filter_map(|r| r.metric(c, m)).collect();
            if let Some(s) = summarize(&vals) {
                out.insert((c, m), s);
            }
        }
    }
    Ok(out)
}
