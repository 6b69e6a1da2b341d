use ndarray::{Array2, Array3, ArrayViewMut, Axis, Dimension};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{DatasetCollection, Scales, ScmError, ScmSpec};

pub const DEFAULT_BURN_IN: usize = 100;

/// Unscaled draws behind a simulation, restricted to the retained window.
#[derive(Debug, Clone)]
pub struct SimulationTrace {
    /// Standard normal innovations, `M x T x N` (multiplied by `noise_std` in the model).
    pub noise: Array3<f64>,
    /// Temporal contexts including the burn-in, `(burn_in + T) x Kt`.
    pub temporal_full: Array2<f64>,
    pub burn_in: usize,
}

pub fn simulate(spec: &ScmSpec, m: usize, t: usize, burn_in: usize, seed: u64) -> Result<DatasetCollection, ScmError> {
    simulate_traced(spec, m, t, burn_in, seed).map(|(dc, _)| dc)
}

/// Simulate `m` datasets of length `t` after discarding `burn_in` steps, then
/// rescale every column to unit sample variance pooled over all datasets.
pub fn simulate_traced(
    spec: &ScmSpec,
    m: usize,
    t: usize,
    burn_in: usize,
    seed: u64,
) -> Result<(DatasetCollection, SimulationTrace), ScmError> {
    spec.validate()?;
    if m == 0 {
        return Err(ScmError::Config("need at least one dataset".into()));
    }
    if t <= spec.max_lag() || t < 2 {
        return Err(ScmError::Config(format!("T = {t} must exceed the model's maximum lag {}", spec.max_lag())));
    }
    let (n, kt, ks) = (spec.n_system, spec.n_temporal_ctx, spec.n_spatial_ctx);
    let total = burn_in + t;
    let order = spec.system_order()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let temporal_full = Array2::from_shape_fn((total, kt), |_| rng.sample::<f64, _>(StandardNormal));
    let mut spatial = Array2::<f64>::zeros((m, ks));
    let mut system = Array3::<f64>::zeros((m, t, n));
    let mut noise = Array3::<f64>::zeros((m, t, n));

    for d in 0..m {
        for k in 0..ks {
            spatial[(d, k)] = rng.sample(StandardNormal);
        }
        let eta = Array2::from_shape_fn((total, n), |_| rng.sample::<f64, _>(StandardNormal));
        let mut x = Array2::<f64>::zeros((total, n));
        for s in 0..total {
            for &i in &order {
                let a = &spec.assignments[i];
                let mut v = if s >= 1 { a.autocorrelation * x[(s - 1, i)] } else { 0.0 };
                for term in &a.terms {
                    let (p, lag) = (term.parent.var, term.parent.lag);
                    let value = if p >= n + kt {
                        spatial[(d, p - n - kt)]
                    } else if s < lag {
                        0.0
                    } else if p >= n {
                        temporal_full[(s - lag, p - n)]
                    } else {
                        x[(s - lag, p)]
                    };
                    v += term.coeff * value;
                }
                v += spec.noise_std[i] * eta[(s, i)];
                if !v.is_finite() {
                    return Err(ScmError::Simulation(format!("dataset {d}, step {s}, variable {i}")));
                }
                x[(s, i)] = v;
            }
        }
        system.index_axis_mut(Axis(0), d).assign(&x.slice(ndarray::s![burn_in.., ..]));
        noise.index_axis_mut(Axis(0), d).assign(&eta.slice(ndarray::s![burn_in.., ..]));
    }

    let mut temporal = temporal_full.slice(ndarray::s![burn_in.., ..]).to_owned();
    let mut scales = Scales::ones(n, kt, ks);
    for i in 0..n {
        scales.system[i] = rescale(system.index_axis_mut(Axis(2), i));
    }
    for k in 0..kt {
        scales.temporal[k] = rescale(temporal.column_mut(k));
    }
    for k in 0..ks {
        scales.spatial[k] = rescale(spatial.column_mut(k));
    }
    let dc = DatasetCollection::new(system, temporal, spatial, spec.observed_mask.clone())?.with_scales(scales);
    Ok((dc, SimulationTrace { noise, temporal_full, burn_in }))
}

/// Divide values by their sample standard deviation (ddof 1); returns the factor.
fn rescale<D: Dimension>(mut values: ArrayViewMut<'_, f64, D>) -> f64 {
    let count = values.len();
    if count < 2 {
        return 1.0;
    }
    let mean = values.sum() / count as f64;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    let sd = (ss / (count - 1) as f64).sqrt();
    if !(sd.is_finite() && sd > 0.0) {
        return 1.0;
    }
    values.mapv_inplace(|v| v / sd);
    sd
}
