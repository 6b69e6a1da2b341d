//! Monte-Carlo calibration of the partial-correlation test.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{partial_correlation, CiError, ParCorrOptions, Side};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample Kolmogorov-Smirnov test against U(0, 1), asymptotic p-value with
/// the Stephens small-sample correction.
pub fn ks_uniform(samples: &[f64]) -> KsResult {
    let n = samples.len();
    if n == 0 {
        return KsResult { statistic: 0.0, p_value: 1.0 };
    }
    let mut u = samples.to_vec();
    u.sort_by(f64::total_cmp);
    let nf = n as f64;
    let d = u
        .iter()
        .enumerate()
        .map(|(i, &v)| ((i + 1) as f64 / nf - v).max(v - i as f64 / nf))
        .fold(0.0, f64::max);
    let lambda = (nf.sqrt() + 0.12 + 0.11 / nf.sqrt()) * d;
    KsResult { statistic: d, p_value: kolmogorov_q(lambda) }
}

/// `Q(λ) = 2 Σ (-1)^(k-1) exp(-2 k² λ²)`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// P-values of `trials` tests of `x ⊥ y | z` with `x`, `y` and `n_cond`
/// conditioning columns all i.i.d. standard normal of length `n`. Trial `k`
/// uses seed `seed + k`, so results do not depend on the thread count.
pub fn null_p_values(trials: usize, n: usize, n_cond: usize, seed: u64, opts: ParCorrOptions) -> Result<Vec<f64>, CiError> {
    (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
            let mut draw = || (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect::<Vec<f64>>();
            let x = draw();
            let y = draw();
            let z: Vec<Vec<f64>> = (0..n_cond).map(|_| draw()).collect();
            partial_correlation(Side::Columns(vec![x]), Side::Columns(vec![y]), &z, &[], opts).map(|r| r.p_value)
        })
        .collect()
}

/// Fraction of p-values at or below `alpha`.
pub fn rejection_rate(p_values: &[f64], alpha: f64) -> f64 {
    if p_values.is_empty() {
        return 0.0;
    }
    p_values.iter().filter(|&&p| p <= alpha).count() as f64 / p_values.len() as f64
}
