use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Assignment, LinearTerm, ScmError, ScmSpec};
use crate::graph::{GroundTruthGraph, NodeRef};

/// Knobs of the random model generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelParams {
    pub n_system: usize,
    pub n_temporal_ctx: usize,
    pub n_spatial_ctx: usize,
    /// Lagged links draw their lag uniformly from `1..=max_lag`.
    pub max_lag: usize,
    /// System parents per system variable besides the autocorrelation term, drawn
    /// from variables earlier in a random causal order (the first one has none).
    pub system_parents: usize,
    /// Share of links that are contemporaneous.
    pub contemp_fraction: f64,
    /// Whether each system variable draws one context parent from {none, C_1..C_K}.
    pub context_parents: bool,
    pub autocorr_range: (f64, f64),
    pub coeff_range: (f64, f64),
    pub frac_observed: f64,
    pub stability_bound: f64,
    pub max_coeff_attempts: usize,
    pub max_structure_attempts: usize,
    pub seed: u64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            n_system: 5,
            n_temporal_ctx: 1,
            n_spatial_ctx: 2,
            max_lag: 2,
            system_parents: 1,
            contemp_fraction: 0.5,
            context_parents: true,
            autocorr_range: (0.3, 0.8),
            coeff_range: (0.5, 0.9),
            frac_observed: 0.5,
            stability_bound: 0.95,
            max_coeff_attempts: 100,
            max_structure_attempts: 10,
            seed: 0,
        }
    }
}

impl ModelParams {
    fn check(&self) -> Result<(), ScmError> {
        let bad = |m: &str| Err(ScmError::Config(m.to_string()));
        if self.n_system == 0 {
            return bad("at least one system variable is required");
        }
        if !(0.0..=1.0).contains(&self.frac_observed) {
            return bad("frac_observed must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.contemp_fraction) {
            return bad("contemp_fraction must lie in [0, 1]");
        }
        for (lo, hi) in [self.autocorr_range, self.coeff_range] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return bad("coefficient ranges must be finite with lo <= hi");
            }
        }
        if self.coeff_range.0 <= 0.0 && self.coeff_range.1 >= 0.0 {
            return bad("coeff_range must exclude zero");
        }
        if self.max_lag == 0 && self.n_temporal_ctx > 0 {
            return bad("temporal contexts need max_lag >= 1");
        }
        if self.max_coeff_attempts == 0 || self.max_structure_attempts == 0 {
            return bad("attempt limits must be positive");
        }
        Ok(())
    }

    pub fn n_contexts(&self) -> usize {
        self.n_temporal_ctx + self.n_spatial_ctx
    }

    /// Number of observed contexts: ceil(frac_observed * K).
    pub fn n_observed(&self) -> usize {
        let k = self.n_contexts() as f64;
        ((self.frac_observed * k) - 1e-9).ceil().max(0.0) as usize
    }
}

/// Parents without coefficients.
struct Structure {
    parents: Vec<Vec<NodeRef>>,
    autocorrelated: bool,
}

fn draw_structure(p: &ModelParams, rng: &mut ChaCha8Rng) -> Structure {
    let n = p.n_system;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let rank: Vec<usize> = {
        let mut r = vec![0; n];
        for (pos, &v) in order.iter().enumerate() {
            r[v] = pos;
        }
        r
    };
    let mut parents: Vec<Vec<NodeRef>> = vec![Vec::new(); n];
    for i in 0..n {
        // System causes come from earlier in the causal order at any lag, so the
        // summary graph is acyclic and feedback loops cannot destabilise the model.
        let mut earlier: Vec<usize> = order[..rank[i]].to_vec();
        earlier.shuffle(rng);
        for &j in earlier.iter().take(p.system_parents) {
            let contemp = p.max_lag == 0 || rng.random::<f64>() < p.contemp_fraction;
            let lag = if contemp { 0 } else { rng.random_range(1..=p.max_lag) };
            parents[i].push(NodeRef::new(j, lag));
        }
        if p.context_parents && p.n_contexts() > 0 {
            let pick = rng.random_range(0..=p.n_contexts());
            if pick > 0 {
                let k = pick - 1;
                let var = n + k;
                let lag = if k < p.n_temporal_ctx && rng.random::<f64>() >= p.contemp_fraction {
                    rng.random_range(1..=p.max_lag)
                } else {
                    0
                };
                parents[i].push(NodeRef::new(var, lag));
            }
        }
    }
    Structure { parents, autocorrelated: p.max_lag > 0 }
}

fn draw_coefficients(p: &ModelParams, s: &Structure, mask: &[bool], rng: &mut ChaCha8Rng) -> ScmSpec {
    let uniform = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| if lo == hi { lo } else { rng.random_range(lo..hi) };
    let assignments = s
        .parents
        .iter()
        .map(|ps| {
            let autocorrelation = if s.autocorrelated { uniform(rng, p.autocorr_range) } else { 0.0 };
            let terms = ps.iter().map(|&parent| LinearTerm { parent, coeff: uniform(rng, p.coeff_range) }).collect();
            Assignment { autocorrelation, terms }
        })
        .collect();
    ScmSpec {
        n_system: p.n_system,
        n_temporal_ctx: p.n_temporal_ctx,
        n_spatial_ctx: p.n_spatial_ctx,
        assignments,
        noise_std: vec![1.0; p.n_system],
        observed_mask: mask.to_vec(),
    }
}

/// Draw a random stable model. Structure, observed set and coefficients all
/// derive from `params.seed`. Coefficients are redrawn until the companion matrix
/// is stable; after `max_coeff_attempts` failures a new structure is drawn.
pub fn generate_random_model(params: &ModelParams) -> Result<(ScmSpec, GroundTruthGraph), ScmError> {
    params.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let k = params.n_contexts();
    let mut ctx: Vec<usize> = (0..k).collect();
    ctx.shuffle(&mut rng);
    let mut mask = vec![false; k];
    for &c in &ctx[..params.n_observed()] {
        mask[c] = true;
    }
    for _ in 0..params.max_structure_attempts {
        let structure = draw_structure(params, &mut rng);
        for _ in 0..params.max_coeff_attempts {
            let spec = draw_coefficients(params, &structure, &mask, &mut rng);
            if spec.spectral_radius() < params.stability_bound {
                let g = spec.ground_truth()?;
                return Ok((spec, g));
            }
        }
    }
    Err(ScmError::Generation(params.max_structure_attempts * params.max_coeff_attempts))
}
