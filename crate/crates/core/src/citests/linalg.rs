//! Least-squares residualization on `[1, Z, dummy blocks]`.
//!
//! The structured path removes one-hot blocks by group demeaning (within
//! datasets, within time steps, or two-way for a balanced panel) and then
//! regresses on the demeaned regular columns. The dense path builds the whole
//! design explicitly. Both project onto the column space found by an SVD of the
//! thin QR factor, so collinear designs are fine and the reported rank is
//! numerical.

use nalgebra::DMatrix;

use crate::pooling::DummyBlock;

#[derive(Debug, Clone)]
pub struct Residuals {
    /// Numerical rank of the full design, intercept included.
    pub rank: usize,
    pub targets: Vec<Vec<f64>>,
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Project `targets` onto the orthogonal complement of the span of `cols`.
/// Columns are rescaled by `scales` (their raw norms) before the rank decision,
/// so a column that demeaning reduced to round-off does not count.
fn project_out(targets: &mut [Vec<f64>], cols: &[Vec<f64>], scales: &[f64]) -> usize {
    let kept: Vec<usize> = (0..cols.len()).filter(|&k| scales[k] > 0.0).collect();
    if kept.is_empty() || targets.is_empty() && cols.is_empty() {
        return 0;
    }
    let n = cols[0].len();
    let k = kept.len();
    let a = DMatrix::from_fn(n, k, |r, c| cols[kept[c]][r] / scales[kept[c]]);
    // Thin QR first, then an SVD of the small triangular factor.
    let qr = a.qr();
    let q = qr.q();
    let svd = qr.r().svd(true, true);
    let u = q * svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let tol = (n.max(k) as f64) * f64::EPSILON * smax.max(1.0);
    let basis: Vec<usize> = (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > tol).collect();
    for t in targets.iter_mut() {
        for &b in &basis {
            let ub = u.column(b);
            let c: f64 = ub.iter().zip(t.iter()).map(|(x, y)| x * y).sum();
            for (ti, ui) in t.iter_mut().zip(ub.iter()) {
                *ti -= c * ui;
            }
        }
    }
    basis.len()
}

/// Demeaning operator for a set of dummy blocks, if it has a closed form.
enum Demean<'a> {
    Global,
    OneWay(&'a DummyBlock),
    TwoWay(&'a DummyBlock, &'a DummyBlock),
}

impl<'a> Demean<'a> {
    fn plan(dummies: &[&'a DummyBlock]) -> Option<Self> {
        match dummies {
            [] => Some(Demean::Global),
            [d] => Some(Demean::OneWay(d)),
            [a, b] if balanced(a, b) => Some(Demean::TwoWay(a, b)),
            _ => None,
        }
    }

    /// Rank of `[1, one-hot blocks]`.
    fn rank(&self) -> usize {
        match self {
            Demean::Global => 1,
            Demean::OneWay(d) => levels_present(d),
            Demean::TwoWay(a, b) => levels_present(a) + levels_present(b) - 1,
        }
    }

    fn apply(&self, v: &mut [f64]) {
        match self {
            Demean::Global => {
                let mean = v.iter().sum::<f64>() / v.len() as f64;
                v.iter_mut().for_each(|x| *x -= mean);
            }
            Demean::OneWay(d) => {
                let means = group_means(v, d);
                for (x, &l) in v.iter_mut().zip(d.labels()) {
                    *x -= means[l];
                }
            }
            Demean::TwoWay(a, b) => {
                let ma = group_means(v, a);
                let mb = group_means(v, b);
                let grand = v.iter().sum::<f64>() / v.len() as f64;
                for (r, x) in v.iter_mut().enumerate() {
                    *x += grand - ma[a.labels()[r]] - mb[b.labels()[r]];
                }
            }
        }
    }
}

fn levels_present(d: &DummyBlock) -> usize {
    let mut seen = vec![false; d.n_levels()];
    d.labels().iter().for_each(|&l| seen[l] = true);
    seen.iter().filter(|&&s| s).count()
}

fn group_means(v: &[f64], d: &DummyBlock) -> Vec<f64> {
    let mut sum = vec![0.0; d.n_levels()];
    let mut cnt = vec![0usize; d.n_levels()];
    for (x, &l) in v.iter().zip(d.labels()) {
        sum[l] += x;
        cnt[l] += 1;
    }
    sum.iter().zip(&cnt).map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 }).collect()
}

/// Every label pair occurs equally often, so two-way demeaning is an exact projection.
fn balanced(a: &DummyBlock, b: &DummyBlock) -> bool {
    if a.n_rows() != b.n_rows() {
        return false;
    }
    let mut counts = vec![0usize; a.n_levels() * b.n_levels()];
    for (&la, &lb) in a.labels().iter().zip(b.labels()) {
        counts[la * b.n_levels() + lb] += 1;
    }
    counts.windows(2).all(|w| w[0] == w[1])
}

/// Residualize with group demeaning for the dummy blocks; falls back to the dense
/// design when the blocks do not form a balanced panel.
pub fn residualize_structured(targets: &[Vec<f64>], z: &[Vec<f64>], dummies: &[&DummyBlock]) -> Residuals {
    let Some(plan) = Demean::plan(dummies) else {
        return residualize_dense(targets, z, dummies);
    };
    let scales: Vec<f64> = z.iter().map(|c| norm(c)).collect();
    let mut zd: Vec<Vec<f64>> = z.to_vec();
    zd.iter_mut().for_each(|c| plan.apply(c));
    let mut out: Vec<Vec<f64>> = targets.to_vec();
    out.iter_mut().for_each(|t| plan.apply(t));
    let rank = plan.rank() + project_out(&mut out, &zd, &scales);
    Residuals { rank, targets: out }
}

/// Residualize on the explicit design `[1, z, one-hot blocks]`.
pub fn residualize_dense(targets: &[Vec<f64>], z: &[Vec<f64>], dummies: &[&DummyBlock]) -> Residuals {
    let n = targets.first().or(z.first()).map(|c| c.len()).unwrap_or(0);
    let mut design: Vec<Vec<f64>> = vec![vec![1.0; n]];
    design.extend(z.iter().cloned());
    for d in dummies {
        design.extend(d.one_hot());
    }
    let scales: Vec<f64> = design.iter().map(|c| norm(c)).collect();
    let mut out = targets.to_vec();
    let rank = project_out(&mut out, &design, &scales);
    Residuals { rank, targets: out }
}

/// Pearson correlation of two residual vectors (already orthogonal to the intercept).
pub fn residual_correlation(a: &[f64], b: &[f64]) -> f64 {
    let denom = norm(a) * norm(b);
    if denom == 0.0 {
        0.0
    } else {
        dot(a, b) / denom
    }
}
