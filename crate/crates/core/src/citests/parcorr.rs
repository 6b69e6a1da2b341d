use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::linalg::{norm, residual_correlation, residualize_dense, residualize_structured};
use super::{CiError, CiQuery, CiTest, CiTestResult};
use crate::pooling::{Block, DummyBlock, PooledData};

/// How p-values of several component pairs become one.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combination {
    /// Smallest p times the number of pairs, capped at 1.
    #[default]
    Bonferroni,
    /// Smallest p, uncorrected.
    MinP,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Residualization {
    /// Group demeaning for one-hot blocks, SVD for the rest.
    #[default]
    Structured,
    /// One SVD of the explicit design.
    Dense,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParCorrOptions {
    pub combination: Combination,
    pub residualization: Residualization,
}

/// One side of a test: plain columns or a one-hot dummy block.
#[derive(Debug, Clone)]
pub enum Side<'a> {
    Columns(Vec<Vec<f64>>),
    Dummy(&'a DummyBlock),
}

impl Side<'_> {
    fn components(&self) -> Vec<Vec<f64>> {
        match self {
            Side::Columns(c) => c.clone(),
            Side::Dummy(d) => d.one_hot(),
        }
    }

    fn len(&self) -> usize {
        match self {
            Side::Columns(c) => c.first().map_or(0, |v| v.len()),
            Side::Dummy(d) => d.n_rows(),
        }
    }
}

fn centered_norm(v: &[f64]) -> f64 {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>().sqrt()
}

fn two_sided_p(r: f64, dof: f64) -> f64 {
    let r = r.clamp(-(1.0 - 1e-15), 1.0 - 1e-15);
    let t = r * (dof / (1.0 - r * r)).sqrt();
    let law = StudentsT::new(0.0, 1.0, dof).expect("positive degrees of freedom");
    (2.0 * law.sf(t.abs())).clamp(0.0, 1.0)
}

/// Component-wise partial correlation of `x` and `y` given regular columns
/// `z_cols` and one-hot blocks `z_dummies`, with an intercept always included.
pub fn partial_correlation(
    x: Side<'_>,
    y: Side<'_>,
    z_cols: &[Vec<f64>],
    z_dummies: &[&DummyBlock],
    opts: ParCorrOptions,
) -> Result<CiTestResult, CiError> {
    if matches!((&x, &y), (Side::Dummy(_), Side::Dummy(_))) {
        return Err(CiError::Query("dummies on both sides".into()));
    }
    let n = x.len();
    if y.len() != n || z_cols.iter().any(|c| c.len() != n) || z_dummies.iter().any(|d| d.n_rows() != n) {
        return Err(CiError::Query("columns of unequal length".into()));
    }
    for side in [&x, &y] {
        if let Side::Dummy(d) = side {
            if d.is_degenerate() {
                return Ok(CiTestResult::independent_degenerate(n));
            }
        }
    }
    let mut dummies = Vec::new();
    for &d in z_dummies {
        if d.n_levels() <= 1 {
            continue; // constant, absorbed by the intercept
        }
        if d.is_degenerate() {
            // One level per row: the design interpolates every target.
            return Ok(CiTestResult::independent_degenerate(n));
        }
        dummies.push(d);
    }

    let xs = x.components();
    let ys = y.components();
    let mut targets = xs.clone();
    targets.extend(ys.iter().cloned());
    let res = match opts.residualization {
        Residualization::Structured => residualize_structured(&targets, z_cols, &dummies),
        Residualization::Dense => residualize_dense(&targets, z_cols, &dummies),
    };
    let dof = n as i64 - res.rank as i64 - 1;
    if dof < 2 {
        return Err(CiError::InsufficientSamples { n, rank: res.rank, dof });
    }

    let live = |raw: &[f64], r: &[f64]| {
        let c = centered_norm(raw);
        c > 0.0 && norm(r) > 1e-10 * c
    };
    let (rx, ry) = res.targets.split_at(xs.len());
    let xi: Vec<&Vec<f64>> = rx.iter().zip(&xs).filter(|(r, raw)| live(raw, r)).map(|(r, _)| r).collect();
    let yi: Vec<&Vec<f64>> = ry.iter().zip(&ys).filter(|(r, raw)| live(raw, r)).map(|(r, _)| r).collect();
    if xi.is_empty() || yi.is_empty() {
        return Ok(CiTestResult::independent_degenerate(n));
    }

    let (mut stat, mut min_p) = (0.0f64, 1.0f64);
    for a in &xi {
        for b in &yi {
            let r = residual_correlation(a, b);
            stat = stat.max(r.abs().min(1.0));
            min_p = min_p.min(two_sided_p(r, dof as f64));
        }
    }
    let pairs = (xi.len() * yi.len()) as f64;
    let p_value = match opts.combination {
        Combination::Bonferroni => (min_p * pairs).min(1.0),
        Combination::MinP => min_p,
    };
    Ok(CiTestResult { statistic: stat, p_value, n_effective: n, degenerate: false })
}

/// Partial-correlation test on a pooled dataset.
#[derive(Debug, Clone, Copy)]
pub struct ParCorr<'a> {
    data: &'a PooledData,
    opts: ParCorrOptions,
}

impl<'a> ParCorr<'a> {
    pub fn new(data: &'a PooledData) -> Self {
        ParCorr { data, opts: ParCorrOptions::default() }
    }

    pub fn with_options(data: &'a PooledData, opts: ParCorrOptions) -> Self {
        ParCorr { data, opts }
    }

    pub fn data(&self) -> &'a PooledData {
        self.data
    }

    fn side(&self, node: crate::graph::NodeRef) -> Result<Side<'a>, CiError> {
        Ok(match self.data.block(node)? {
            Block::Dummy(d) => Side::Dummy(d),
            Block::Column => Side::Columns(vec![self.data.column(node)?]),
        })
    }
}

impl CiTest for ParCorr<'_> {
    fn test(&self, q: &CiQuery) -> Result<CiTestResult, CiError> {
        q.validate()?;
        let x = self.side(q.x)?;
        let y = self.side(q.y)?;
        let mut cols = Vec::new();
        let mut dummies = Vec::new();
        for &node in &q.z {
            match self.data.block(node)? {
                Block::Dummy(d) => dummies.push(d),
                Block::Column => cols.push(self.data.column(node)?),
            }
        }
        partial_correlation(x, y, &cols, &dummies, self.opts)
    }
}
