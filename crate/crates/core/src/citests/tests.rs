use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::calibration::{ks_uniform, null_p_values, rejection_rate};
use super::*;
use crate::graph::{d_separated, GroundTruthGraph, LayoutSource, VariableRole};
use crate::pooling::{build_space_dummy, build_time_dummy, pool_data, PoolingOptions};
use crate::scm::{generate_random_model, simplified_preset, simulate, ModelParams};

fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn cols(v: Vec<f64>) -> Side<'static> {
    Side::Columns(vec![v])
}

fn pc(x: Vec<f64>, y: Vec<f64>, z: &[Vec<f64>]) -> CiTestResult {
    partial_correlation(cols(x), cols(y), z, &[], ParCorrOptions::default()).unwrap()
}

/// Plain Pearson correlation, computed independently of the residualization code.
fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn identical_columns_are_perfectly_correlated() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = normals(&mut rng, 100);
    let r = pc(x.clone(), x, &[]);
    assert!((r.statistic - 1.0).abs() < 1e-12);
    assert!(r.p_value < 1e-12);
    assert_eq!(r.n_effective, 100);
}

#[test]
fn unconditional_statistic_is_pearson() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = normals(&mut rng, 50);
    let y: Vec<f64> = x.iter().map(|v| 0.3 * v + rng.sample::<f64, _>(StandardNormal)).collect();
    let r = pc(x.clone(), y.clone(), &[]);
    assert!((r.statistic - pearson(&x, &y).abs()).abs() < 1e-12);
}

#[test]
fn first_order_partial_correlation_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let z = normals(&mut rng, 80);
    let x: Vec<f64> = z.iter().map(|v| v + rng.sample::<f64, _>(StandardNormal)).collect();
    let y: Vec<f64> = z.iter().map(|v| -v + rng.sample::<f64, _>(StandardNormal)).collect();
    let (rxy, rxz, ryz) = (pearson(&x, &y), pearson(&x, &z), pearson(&y, &z));
    let expected = (rxy - rxz * ryz) / ((1.0 - rxz * rxz) * (1.0 - ryz * ryz)).sqrt();
    let r = pc(x, y, &[z]);
    assert!((r.statistic - expected.abs()).abs() < 1e-12);
}

#[test]
fn p_value_matches_tabulated_t_quantile() {
    // With n = 80 and one conditioning column there are 77 degrees of freedom,
    // whose two-sided 5% critical value of |t| is 1.9913.
    let n = 80;
    let r = 1.9913 / (77.0 + 1.9913f64.powi(2)).sqrt();
    // Columns with a prescribed sample partial correlation, by orthogonalization.
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let z = normals(&mut rng, n);
    let center = |v: &mut Vec<f64>| {
        let m = v.iter().sum::<f64>() / n as f64;
        v.iter_mut().for_each(|x| *x -= m);
    };
    let orth = |v: &mut Vec<f64>, u: &[f64]| {
        let c = v.iter().zip(u).map(|(a, b)| a * b).sum::<f64>() / u.iter().map(|b| b * b).sum::<f64>();
        v.iter_mut().zip(u).for_each(|(a, b)| *a -= c * b);
    };
    let mut zc = z.clone();
    center(&mut zc);
    let mut a = normals(&mut rng, n);
    center(&mut a);
    orth(&mut a, &zc);
    let mut b = normals(&mut rng, n);
    center(&mut b);
    orth(&mut b, &zc);
    orth(&mut b, &a);
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let y: Vec<f64> = a.iter().zip(&b).map(|(p, q)| r * p / na + (1.0 - r * r).sqrt() * q / nb).collect();
    let res = pc(a, y, &[z]);
    assert!((res.statistic - r).abs() < 1e-10);
    assert!((res.p_value - 0.05).abs() < 2e-4, "{}", res.p_value);
}

#[test]
fn null_rejection_rate_is_nominal() {
    let p = null_p_values(1000, 100, 0, 7, ParCorrOptions::default()).unwrap();
    let rate = rejection_rate(&p, 0.05);
    assert!((rate - 0.05).abs() <= 0.02, "rate {rate}");
    assert!(ks_uniform(&p).p_value > 0.01);
}

#[test]
fn null_with_conditioning_is_uniform() {
    let p = null_p_values(500, 60, 3, 11, ParCorrOptions::default()).unwrap();
    assert!(ks_uniform(&p).p_value > 0.01);
}

#[test]
fn chain_conditioning_separates() {
    let (mut given_y, mut marginal) = (0, 0);
    let seeds = 40;
    for s in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + s);
        let n = 2000;
        let x = normals(&mut rng, n);
        let y: Vec<f64> = x.iter().map(|v| 0.8 * v + rng.sample::<f64, _>(StandardNormal)).collect();
        let z: Vec<f64> = y.iter().map(|v| 0.8 * v + rng.sample::<f64, _>(StandardNormal)).collect();
        given_y += usize::from(pc(x.clone(), z.clone(), &[y]).p_value <= 0.05);
        marginal += usize::from(pc(x, z, &[]).p_value <= 0.05);
    }
    assert!((given_y as f64) < 0.1 * seeds as f64, "{given_y}");
    assert!((marginal as f64) > 0.95 * seeds as f64, "{marginal}");
}

#[test]
fn ks_detects_non_uniform() {
    let skewed: Vec<f64> = (0..500).map(|i| ((i as f64 + 0.5) / 500.0).powi(2)).collect();
    assert!(ks_uniform(&skewed).p_value < 1e-6);
    let even: Vec<f64> = (0..500).map(|i| (i as f64 + 0.5) / 500.0).collect();
    assert!(ks_uniform(&even).p_value > 0.99);
    // Asymptotic 5% and 1% critical values of sqrt(n) D.
    let at = |lambda: f64| {
        let n = 1_000_000usize;
        let d = lambda / (n as f64).sqrt();
        let s: Vec<f64> = (0..n).map(|i| ((i as f64 + 1.0) / n as f64 - d).clamp(0.0, 1.0)).collect();
        ks_uniform(&s).p_value
    };
    assert!((at(1.3581) - 0.05).abs() < 2e-3);
    assert!((at(1.6276) - 0.01).abs() < 1e-3);
}

#[test]
fn degenerate_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = normals(&mut rng, 30);
    let r = pc(vec![2.0; 30], x.clone(), &[]);
    assert!(r.degenerate && r.p_value == 1.0);
    // x fully explained by z
    let z: Vec<f64> = x.iter().map(|v| 3.0 * v - 1.0).collect();
    let y = normals(&mut rng, 30);
    let r = pc(x.clone(), y.clone(), &[z]);
    assert!(r.degenerate && r.p_value == 1.0);
    // a dummy with a single level is constant, one with a level per row saturates
    let one = build_space_dummy(1, 30);
    let r = partial_correlation(Side::Dummy(&one), cols(x.clone()), &[], &[], ParCorrOptions::default()).unwrap();
    assert!(r.degenerate && r.p_value == 1.0);
    let r = partial_correlation(cols(x.clone()), cols(y.clone()), &[], &[&one], ParCorrOptions::default()).unwrap();
    assert!(!r.degenerate);
    assert!((r.statistic - pc(x.clone(), y.clone(), &[]).statistic).abs() < 1e-12);
    let sat = build_space_dummy(30, 1);
    let r = partial_correlation(cols(x), cols(y), &[], &[&sat], ParCorrOptions::default()).unwrap();
    assert!(r.degenerate && r.p_value == 1.0);
}

#[test]
fn errors() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let z: Vec<Vec<f64>> = (0..3).map(|_| normals(&mut rng, 5)).collect();
    let err = partial_correlation(cols(normals(&mut rng, 5)), cols(normals(&mut rng, 5)), &z, &[], ParCorrOptions::default());
    assert!(matches!(err, Err(CiError::InsufficientSamples { n: 5, rank: 4, dof: 0 })));
    let a = build_space_dummy(2, 5);
    let b = build_time_dummy(2, 5, 0);
    let err = partial_correlation(Side::Dummy(&a), Side::Dummy(&b), &[], &[], ParCorrOptions::default());
    assert!(matches!(err, Err(CiError::Query(_))));
    let err = partial_correlation(cols(vec![0.0; 4]), cols(vec![0.0; 5]), &[], &[], ParCorrOptions::default());
    assert!(matches!(err, Err(CiError::Query(_))));
}

fn preset_pooled(m: usize, t: usize, seed: u64) -> crate::pooling::PooledData {
    let (spec, _) = simplified_preset();
    let dc = simulate(&spec, m, t, 100, seed).unwrap();
    pool_data(&dc, &PoolingOptions::new(2)).unwrap()
}

#[test]
fn pooled_queries_validate() {
    let pd = preset_pooled(3, 20, 1);
    let ci = ParCorr::new(&pd);
    let x = NodeRef::new(0, 0);
    assert!(matches!(ci.test(&CiQuery::new(x, x, vec![])), Err(CiError::Query(_))));
    assert!(matches!(ci.test(&CiQuery::new(x, NodeRef::new(1, 0), vec![x])), Err(CiError::Query(_))));
    // spatial context at lag 1 does not exist
    assert!(matches!(ci.test(&CiQuery::new(x, NodeRef::new(3, 1), vec![])), Err(CiError::Pool(_))));
    // time dummy against space dummy
    assert!(ci.test(&CiQuery::new(NodeRef::new(4, 0), NodeRef::new(5, 0), vec![])).is_err());
}

#[test]
fn structured_and_dense_agree_on_pooled_dummies() {
    let pd = preset_pooled(4, 15, 2);
    let s = ParCorr::new(&pd);
    let d = ParCorr::with_options(&pd, ParCorrOptions { residualization: Residualization::Dense, ..Default::default() });
    let (x0, x1, ct, cs, dt, ds) = (0, 1, 2, 3, 4, 5);
    let n = |v, l| NodeRef::new(v, l);
    let queries = [
        CiQuery::new(n(x0, 0), n(x1, 0), vec![n(ds, 0)]),
        CiQuery::new(n(x0, 0), n(x1, 0), vec![n(dt, 0), n(ds, 0)]),
        CiQuery::new(n(x0, 0), n(x1, 1), vec![n(dt, 0), n(x0, 1), n(ct, 1)]),
        CiQuery::new(n(x0, 0), n(dt, 0), vec![n(x1, 0), n(ct, 1)]),
        CiQuery::new(n(ds, 0), n(x1, 0), vec![n(cs, 0), n(x1, 1)]),
        CiQuery::new(n(x1, 0), n(cs, 0), vec![n(ds, 0)]),
    ];
    for q in &queries {
        let a = s.test(q).unwrap();
        let b = d.test(q).unwrap();
        assert_eq!(a.degenerate, b.degenerate, "{q:?}");
        assert!((a.statistic - b.statistic).abs() < 1e-9, "{q:?}: {a:?} vs {b:?}");
        assert!((a.p_value - b.p_value).abs() < 1e-9, "{q:?}: {a:?} vs {b:?}");
    }
    // The spatial context is a function of the space dummy.
    assert!(s.test(&queries[5]).unwrap().degenerate);
}

#[test]
fn bonferroni_and_min_p() {
    let pd = preset_pooled(5, 12, 3);
    let q = CiQuery::new(NodeRef::new(0, 0), NodeRef::new(5, 0), vec![]);
    let b = ParCorr::new(&pd).test(&q).unwrap();
    let m = ParCorr::with_options(&pd, ParCorrOptions { combination: Combination::MinP, ..Default::default() })
        .test(&q)
        .unwrap();
    assert_eq!(b.statistic, m.statistic);
    assert!((b.p_value - (m.p_value * 5.0).min(1.0)).abs() < 1e-15);
}

#[test]
fn space_dummy_matches_dataset_centering() {
    // Conditioning on the space dummy gives the same partial correlation as
    // centering within datasets; only the degrees of freedom differ.
    let mut agree = 0;
    let trials = 30usize;
    for seed in 0..trials {
        let pd = preset_pooled(6, 40, 100 + seed as u64);
        let rows = pd.rows_per_dataset();
        let center = |v: Vec<f64>| -> Vec<f64> {
            v.chunks(rows)
                .flat_map(|c| {
                    let m = c.iter().sum::<f64>() / c.len() as f64;
                    c.iter().map(move |x| x - m).collect::<Vec<_>>()
                })
                .collect()
        };
        let x = pd.column(NodeRef::new(0, 0)).unwrap();
        let y = pd.column(NodeRef::new(1, 1)).unwrap();
        let with_d = ParCorr::new(&pd).test(&CiQuery::new(NodeRef::new(0, 0), NodeRef::new(1, 1), vec![NodeRef::new(5, 0)])).unwrap();
        let centered = pc(center(x), center(y), &[]);
        assert!((with_d.statistic - centered.statistic).abs() < 1e-10);
        agree += usize::from((with_d.p_value <= 0.05) == (centered.p_value <= 0.05));
    }
    assert_eq!(agree, trials);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn symmetric_and_affine_invariant(
        seed in 0u64..10_000,
        n in 20usize..80,
        kz in 0usize..3,
        a in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0],
        b in -10.0f64..10.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z: Vec<Vec<f64>> = (0..kz).map(|_| normals(&mut rng, n)).collect();
        let x: Vec<f64> = normals(&mut rng, n).iter().zip(z.first().unwrap_or(&vec![0.0; n])).map(|(e, z)| e + 0.5 * z).collect();
        let y: Vec<f64> = normals(&mut rng, n).iter().zip(&x).map(|(e, x)| e + 0.3 * x).collect();
        let base = pc(x.clone(), y.clone(), &z);
        let swapped = pc(y.clone(), x.clone(), &z);
        prop_assert!((base.statistic - swapped.statistic).abs() < 1e-12);
        prop_assert!((base.p_value - swapped.p_value).abs() < 1e-12);
        let affine = |v: &[f64]| v.iter().map(|t| a * t + b).collect::<Vec<f64>>();
        let zs: Vec<Vec<f64>> = z.iter().map(|c| affine(c)).collect();
        for r in [pc(affine(&x), y.clone(), &z), pc(x.clone(), affine(&y), &z), pc(x.clone(), y.clone(), &zs)] {
            prop_assert!((r.statistic - base.statistic).abs() < 1e-10);
            prop_assert!((r.p_value - base.p_value).abs() < 1e-10);
        }
    }
}

// ---- oracle ----

fn latent_confounder() -> GroundTruthGraph {
    use VariableRole::*;
    let mut g = GroundTruthGraph::new(vec![System, System, LatentSpatialContext], 0).unwrap();
    g.add_edge(NodeRef::new(2, 0), 0).unwrap();
    g.add_edge(NodeRef::new(2, 0), 1).unwrap();
    g
}

#[test]
fn oracle_space_dummy_substitution() {
    let g = latent_confounder();
    let o = OracleCi::projected(&g, true, 0).unwrap();
    assert_eq!(o.layout(), &[LayoutSource::Var(0), LayoutSource::Var(1), LayoutSource::TimeDummy, LayoutSource::SpaceDummy]);
    let (x1, x2, dt, ds) = (NodeRef::new(0, 0), NodeRef::new(1, 0), NodeRef::new(2, 0), NodeRef::new(3, 0));
    assert!(o.test(&CiQuery::new(x1, x2, vec![ds])).unwrap().is_independent(0.05));
    let dep = o.test(&CiQuery::new(x1, x2, vec![])).unwrap();
    assert_eq!((dep.p_value, dep.statistic), (0.0, 1.0));
    // the time dummy says nothing about spatial contexts
    assert!(!o.test(&CiQuery::new(x1, x2, vec![dt])).unwrap().is_independent(0.05));
    assert!(!o.test(&CiQuery::new(x1, ds, vec![])).unwrap().is_independent(0.05));
    assert!(o.test(&CiQuery::new(x1, dt, vec![])).unwrap().is_independent(0.05));
    assert!(matches!(o.test(&CiQuery::new(dt, ds, vec![])), Err(CiError::Query(_))));
    assert!(matches!(o.test(&CiQuery::new(x1, x2, vec![NodeRef::new(4, 0)])), Err(CiError::Query(_))));
}

#[test]
fn oracle_preset_time_dummy_is_dependent() {
    let (_, g) = simplified_preset();
    let o = OracleCi::projected(&g, true, 2).unwrap();
    let (x0, x1, ct0, cs0, dt, ds) = (0, 1, 2, 3, 4, 5);
    let n = |v, l| NodeRef::new(v, l);
    assert!(!o.test(&CiQuery::new(n(x0, 0), n(dt, 0), vec![])).unwrap().is_independent(0.5));
    // X1 still reaches D_time through the latent Ct1 given its observed parents
    let pa_x1 = vec![n(x1, 1), n(ct0, 1), n(cs0, 0), n(ds, 0)];
    assert!(!o.test(&CiQuery::new(n(x1, 0), n(dt, 0), pa_x1)).unwrap().is_independent(0.5));
    // an observed context is determined by its dummy
    assert!(o.test(&CiQuery::new(n(ct0, 1), n(x0, 0), vec![n(dt, 0)])).unwrap().is_independent(0.5));
    assert!(o.test(&CiQuery::new(n(x0, 0), n(cs0, 0), vec![n(ds, 0)])).unwrap().is_independent(0.5));
    // X0 and the past of X1 share the latent parents Ct1 and Cs1; both dummies block them
    let z = vec![n(x1, 0), n(ct0, 1), n(cs0, 0), n(dt, 0), n(ds, 0)];
    assert!(o.test(&CiQuery::new(n(x0, 0), n(x1, 1), z.clone())).unwrap().is_independent(0.5));
    for drop in [dt, ds] {
        let partial: Vec<NodeRef> = z.iter().copied().filter(|v| v.var != drop).collect();
        assert!(!o.test(&CiQuery::new(n(x0, 0), n(x1, 1), partial)).unwrap().is_independent(0.5));
    }
}

#[test]
fn oracle_no_latent_dummy_independent_of_parents() {
    for seed in 0..20 {
        let params = ModelParams { n_system: 4, n_temporal_ctx: 1, n_spatial_ctx: 1, max_lag: 2, frac_observed: 1.0, seed, ..Default::default() };
        let (_, g) = generate_random_model(&params).unwrap();
        let o = OracleCi::projected(&g, true, 2).unwrap();
        // all contexts observed, so layout indices equal ground-truth indices
        let (dt, ds) = (g.n_vars(), g.n_vars() + 1);
        for x in 0..4 {
            let pa = g.parents(x);
            for d in [dt, ds] {
                let q = CiQuery::new(NodeRef::new(x, 0), NodeRef::new(d, 0), pa.clone());
                assert!(o.test(&q).unwrap().is_independent(0.5), "seed {seed}, X{x}, dummy {d}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(30))]

    #[test]
    fn oracle_passes_through_without_dummies(seed in 0u64..500, qs in prop::collection::vec((0usize..5, 0usize..3, 0usize..5, 0usize..3, prop::collection::vec((0usize..5, 0usize..3), 0..3)), 10)) {
        let params = ModelParams { n_system: 3, n_temporal_ctx: 1, n_spatial_ctx: 1, max_lag: 2, frac_observed: 1.0, seed, ..Default::default() };
        let (_, g) = generate_random_model(&params).unwrap();
        let o = OracleCi::projected(&g, false, 2).unwrap();
        let fix = |v: usize, l: usize| NodeRef::new(v, if g.role(v).is_static() { 0 } else { l });
        for (xv, xl, yv, yl, zs) in qs {
            let (x, y) = (fix(xv, xl), fix(yv, yl));
            let z: Vec<NodeRef> = zs.iter().map(|&(v, l)| fix(v, l)).filter(|&n| n != x && n != y).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
            if x == y {
                continue;
            }
            let got = o.test(&CiQuery::new(x, y, z.clone())).unwrap().is_independent(0.5);
            let want = d_separated(&g, x, y, &z, 2 + 4 * g.tau_max().max(1)).unwrap();
            prop_assert_eq!(got, want);
        }
    }
}
