use super::*;
use proptest::prelude::*;

use VariableRole::*;

fn n(var: usize, lag: usize) -> NodeRef {
    NodeRef::new(var, lag)
}

fn gt(roles: &[VariableRole], tau_max: usize, edges: &[((usize, usize), usize)]) -> GroundTruthGraph {
    let mut g = GroundTruthGraph::new(roles.to_vec(), tau_max).unwrap();
    for &((p, lag), c) in edges {
        g.add_edge(n(p, lag), c).unwrap();
    }
    g
}

/// Independent path-enumeration d-separation on an explicit unrolled DAG.
struct BruteDag {
    nodes: Vec<NodeRef>,
    edges: Vec<(usize, usize)>,
}

impl BruteDag {
    fn unroll(g: &GroundTruthGraph, depth: usize) -> Self {
        let mut nodes = Vec::new();
        for v in 0..g.n_vars() {
            let max_lag = if g.role(v).is_static() { 0 } else { depth };
            for lag in 0..=max_lag {
                nodes.push(n(v, lag));
            }
        }
        let pos = |x: NodeRef| nodes.iter().position(|&m| m == x);
        let mut edges = Vec::new();
        for (p, c) in g.directed_edges() {
            let child_lags = if g.role(c).is_static() { 0 } else { depth };
            for l in 0..=child_lags {
                let pl = if g.role(p.var).is_static() { 0 } else { l + p.lag };
                if let (Some(a), Some(b)) = (pos(n(p.var, pl)), pos(n(c, l))) {
                    edges.push((a, b));
                }
            }
        }
        BruteDag { nodes, edges }
    }

    fn idx(&self, x: NodeRef) -> usize {
        self.nodes.iter().position(|&m| m == x).unwrap()
    }

    fn descendants_incl(&self, v: usize) -> Vec<usize> {
        let mut out = vec![v];
        let mut i = 0;
        while i < out.len() {
            let cur = out[i];
            for &(a, b) in &self.edges {
                if a == cur && !out.contains(&b) {
                    out.push(b);
                }
            }
            i += 1;
        }
        out
    }

    fn is_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a, b))
    }

    fn separated(&self, x: NodeRef, y: NodeRef, z: &[NodeRef]) -> bool {
        let (xi, yi) = (self.idx(x), self.idx(y));
        let zi: Vec<usize> = z.iter().map(|&m| self.idx(m)).collect();
        let mut path = vec![xi];
        !self.any_open(&mut path, yi, &zi)
    }

    fn any_open(&self, path: &mut Vec<usize>, target: usize, z: &[usize]) -> bool {
        let last = *path.last().unwrap();
        if last == target {
            return self.open(path, z);
        }
        for v in 0..self.nodes.len() {
            if path.contains(&v) || !(self.is_edge(last, v) || self.is_edge(v, last)) {
                continue;
            }
            path.push(v);
            let found = self.any_open(path, target, z);
            path.pop();
            if found {
                return true;
            }
        }
        false
    }

    fn open(&self, path: &[usize], z: &[usize]) -> bool {
        for k in 1..path.len() - 1 {
            let (a, m, b) = (path[k - 1], path[k], path[k + 1]);
            let collider = self.is_edge(a, m) && self.is_edge(b, m);
            if collider {
                if !self.descendants_incl(m).iter().any(|d| z.contains(d)) {
                    return false;
                }
            } else if z.contains(&m) {
                return false;
            }
        }
        true
    }
}

#[test]
fn chain_is_blocked_by_middle() {
    let g = gt(&[System; 3], 0, &[((0, 0), 1), ((1, 0), 2)]);
    assert!(d_separated(&g, n(0, 0), n(2, 0), &[n(1, 0)], 0).unwrap());
    assert!(!d_separated(&g, n(0, 0), n(2, 0), &[], 0).unwrap());
}

#[test]
fn collider_opens_when_conditioned() {
    let g = gt(&[System; 3], 0, &[((0, 0), 1), ((2, 0), 1)]);
    assert!(!d_separated(&g, n(0, 0), n(2, 0), &[n(1, 0)], 0).unwrap());
    assert!(d_separated(&g, n(0, 0), n(2, 0), &[], 0).unwrap());
}

#[test]
fn collider_descendant_opens_path() {
    let g = gt(&[System; 4], 0, &[((0, 0), 1), ((2, 0), 1), ((1, 0), 3)]);
    assert!(!d_separated(&g, n(0, 0), n(2, 0), &[n(3, 0)], 0).unwrap());
}

/// Catchment-style graph: two runoff series driven by weather (temporal context)
/// at different lags, one of them also by a catchment property (spatial context).
fn catchment() -> GroundTruthGraph {
    gt(
        &[System, System, TemporalContext, SpatialContext],
        1,
        &[((0, 1), 0), ((1, 1), 1), ((2, 0), 0), ((2, 1), 1), ((3, 0), 0)],
    )
}

#[test]
fn catchment_confounded_by_weather() {
    let g = catchment();
    let depth = 4;
    let brute = BruteDag::unroll(&g, depth);
    assert!(!d_separated(&g, n(0, 0), n(1, 0), &[], depth).unwrap());
    assert!(!brute.separated(n(0, 0), n(1, 0), &[]));
    let z = [n(2, 0), n(2, 1), n(0, 1), n(1, 1)];
    assert!(d_separated(&g, n(0, 0), n(1, 0), &z, depth).unwrap());
    assert!(brute.separated(n(0, 0), n(1, 0), &z));
    // Weather alone is not enough: the autocorrelated past still connects them.
    let z = [n(2, 0), n(2, 1)];
    assert_eq!(d_separated(&g, n(0, 0), n(1, 0), &z, depth).unwrap(), brute.separated(n(0, 0), n(1, 0), &z));
}

#[test]
fn query_errors() {
    let g = gt(&[System; 2], 2, &[((0, 2), 1)]);
    assert!(matches!(d_separated(&g, n(0, 0), n(1, 0), &[], 1), Err(GraphError::UnrollDepth { .. })));
    assert!(d_separated(&g, n(0, 0), n(0, 0), &[], 2).is_err());
    assert!(d_separated(&g, n(0, 0), n(1, 0), &[n(1, 0)], 2).is_err());
    assert!(d_separated(&g, n(0, 3), n(1, 0), &[], 2).is_err());
}

#[test]
fn mark_storage_is_mirror_consistent() {
    let mut g = TimeSeriesGraph::new(vec![System; 3], 2);
    g.set_mark(2, 0, 0, EdgeMark::TailHead).unwrap();
    assert_eq!(g.mark(2, 0, 0), EdgeMark::TailHead);
    assert_eq!(g.mark(0, 2, 0), EdgeMark::HeadTail);
    assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 2, 0, EdgeMark::HeadTail)]);
    assert!(matches!(g.set_mark(0, 1, 1, EdgeMark::HeadTail), Err(GraphError::BackwardsInTime { .. })));
    assert!(g.set_mark(0, 0, 0, EdgeMark::CircleCircle).is_err());
    assert!(g.set_mark(0, 1, 3, EdgeMark::TailHead).is_err());
    g.set_mark(0, 0, 1, EdgeMark::TailHead).unwrap();
    assert_eq!(g.node_mark(n(0, 3), n(0, 2)), EdgeMark::TailHead);
    assert_eq!(g.node_mark(n(0, 2), n(0, 3)), EdgeMark::HeadTail);
}

#[test]
fn static_roles_have_no_lags() {
    let mut g = TimeSeriesGraph::new(vec![System, SpatialContext, TimeDummy], 2);
    assert!(matches!(g.set_mark(1, 0, 1, EdgeMark::TailHead), Err(GraphError::StaticLag { .. })));
    assert!(matches!(g.set_mark(2, 0, 1, EdgeMark::TailHead), Err(GraphError::StaticLag { .. })));
    g.set_mark(1, 0, 0, EdgeMark::TailHead).unwrap();
    assert_eq!(g.node_mark(n(1, 0), n(0, 2)), EdgeMark::TailHead);
}

#[test]
fn ground_truth_validation() {
    assert!(matches!(
        GroundTruthGraph::new(vec![System, SpaceDummy], 1),
        Err(GraphError::DummyInGroundTruth(SpaceDummy))
    ));
    let mut g = GroundTruthGraph::new(vec![System, System, System, TemporalContext, SpatialContext], 1).unwrap();
    assert!(matches!(g.add_edge(n(0, 0), 3), Err(GraphError::ForbiddenEdge { .. })));
    assert!(matches!(g.add_edge(n(3, 0), 4), Err(GraphError::ForbiddenEdge { .. })));
    g.add_edge(n(0, 0), 1).unwrap();
    g.add_edge(n(1, 0), 2).unwrap();
    assert!(matches!(g.add_edge(n(2, 0), 0), Err(GraphError::Cycle(2, 0))));
    g.add_edge(n(2, 1), 0).unwrap();
    assert_eq!(g.topological_order(), vec![0, 1, 2, 3, 4]);
    assert_eq!(g.parents(0), vec![n(2, 1)]);
}

#[test]
fn projection_of_latent_spatial_confounder() {
    // L_space -> X1, L_space -> X2, X1 -> X2
    let g = gt(&[System, System, LatentSpatialContext], 1, &[((2, 0), 0), ((2, 0), 1), ((0, 0), 1)]);
    let p = dummy_projection(&g);
    assert_eq!(p.roles(), &[System, System, TimeDummy, SpaceDummy]);
    let edges: Vec<_> = p.edges().collect();
    assert_eq!(
        edges,
        vec![(0, 1, 0, EdgeMark::TailHead), (0, 3, 0, EdgeMark::HeadTail), (1, 3, 0, EdgeMark::HeadTail)]
    );
    let d = dummy_deletion(&p);
    assert_eq!(d.roles(), &[System, System]);
    assert_eq!(d.edges().collect::<Vec<_>>(), vec![(0, 1, 0, EdgeMark::TailHead)]);
}

#[test]
fn projection_without_latents_adds_isolated_dummies() {
    let g = gt(&[System, System, TemporalContext], 1, &[((2, 1), 0), ((0, 1), 1)]);
    let p = dummy_projection(&g);
    assert_eq!(p.n_vars(), 5);
    assert!(p.contemporaneous_neighbors(3).is_empty() && p.contemporaneous_neighbors(4).is_empty());
    assert_eq!(dummy_deletion(&p), target_graph(&g));
}

#[test]
fn projection_splits_dummy_kinds() {
    // L_time -> X1 (lag 1), L_space -> X2, observed C -> X1, C -> C'
    let g = gt(
        &[System, System, LatentTemporalContext, LatentSpatialContext, SpatialContext, SpatialContext],
        1,
        &[((2, 1), 0), ((3, 0), 1), ((4, 0), 0), ((4, 0), 5)],
    );
    let p = dummy_projection(&g);
    assert_eq!(p.roles(), &[System, System, SpatialContext, SpatialContext, TimeDummy, SpaceDummy]);
    assert_eq!(p.mark(4, 0, 0), EdgeMark::TailHead);
    assert_eq!(p.mark(5, 1, 0), EdgeMark::TailHead);
    assert!(!p.is_adjacent(4, 1, 0) && !p.is_adjacent(5, 0, 0));
    assert_eq!(p.mark(2, 0, 0), EdgeMark::TailHead);
    assert!(!p.is_adjacent(2, 3, 0));
    let d = dummy_deletion(&p);
    assert_eq!(d.edges().collect::<Vec<_>>(), vec![(0, 2, 0, EdgeMark::HeadTail)]);
}

#[test]
fn target_graph_examples() {
    // C -> X1 -> X2, C -> C'
    let g = gt(&[System, System, SpatialContext, SpatialContext], 0, &[((2, 0), 0), ((0, 0), 1), ((2, 0), 3)]);
    let t = target_graph(&g);
    assert_eq!(
        t.edges().collect::<Vec<_>>(),
        vec![(0, 1, 0, EdgeMark::TailHead), (0, 2, 0, EdgeMark::HeadTail)]
    );
    let only_system = gt(&[System; 3], 1, &[((0, 1), 1), ((1, 0), 2)]);
    assert_eq!(&target_graph(&only_system), only_system.graph());
    let latent = gt(&[System, System, LatentSpatialContext], 0, &[((2, 0), 0), ((2, 0), 1)]);
    let t = target_graph(&latent);
    assert_eq!(t.n_vars(), 2);
    assert_eq!(t.n_edges(), 0);
}

#[test]
fn deletion_is_identity_without_dummies() {
    let g = gt(&[System, System, TemporalContext], 2, &[((2, 2), 0), ((0, 1), 1)]);
    assert_eq!(&dummy_deletion(g.graph()), g.graph());
}

#[test]
fn deletion_preserves_conflicts() {
    let mut g = TimeSeriesGraph::new(vec![System, SpaceDummy, System], 1);
    g.set_mark(0, 2, 0, EdgeMark::Conflict).unwrap();
    g.set_mark(1, 2, 0, EdgeMark::TailHead).unwrap();
    let d = dummy_deletion(&g);
    assert_eq!(d.edges().collect::<Vec<_>>(), vec![(0, 1, 0, EdgeMark::Conflict)]);
}

#[test]
fn text_format_round_trip() {
    let mut g = TimeSeriesGraph::new(vec![System, System, TemporalContext, SpaceDummy], 2);
    g.set_mark(0, 1, 0, EdgeMark::CircleCircle).unwrap();
    g.set_mark(2, 0, 2, EdgeMark::TailHead).unwrap();
    g.set_mark(3, 1, 0, EdgeMark::TailHead).unwrap();
    g.set_mark(1, 1, 1, EdgeMark::Conflict).unwrap();
    let text = g.to_string();
    assert_eq!(
        text,
        "4 2 system system temporal_context space_dummy\n0 1 0 o-o\n1 1 1 x-x\n1 3 0 <--\n2 0 2 -->\n"
    );
    assert_eq!(text.parse::<TimeSeriesGraph>().unwrap(), g);
    assert!("2 1 system\n".parse::<TimeSeriesGraph>().is_err());
    assert!("2 1 system system\n0 1 1 <--\n".parse::<TimeSeriesGraph>().is_err());
    assert!("2 1 system system\n0 1 0 ???\n".parse::<TimeSeriesGraph>().is_err());
}

#[test]
fn unrolled_dummies_point_at_contexts() {
    let g = gt(&[System, LatentTemporalContext, LatentSpatialContext], 1, &[((1, 1), 0), ((2, 0), 0)]);
    let dag = UnrolledDag::new(&g, 2, true).unwrap();
    let dt = dag.index(UnrolledNode::TimeDummy).unwrap();
    let ds = dag.index(UnrolledNode::SpaceDummy).unwrap();
    assert_eq!(dag.children(dt).len(), 3);
    assert_eq!(dag.children(ds).len(), 1);
    let x = dag.index(UnrolledNode::Var(n(0, 0))).unwrap();
    assert!(!dag.d_separated_idx(dt, x, &[]));
    let l1 = dag.index(UnrolledNode::Var(n(1, 1))).unwrap();
    let l_copies: Vec<usize> = dag.copies(1).to_vec();
    assert!(l_copies.contains(&l1));
    assert!(dag.d_separated_idx(dt, x, &l_copies));
}

fn roles_strategy(max_vars: usize) -> impl Strategy<Value = Vec<VariableRole>> {
    prop::collection::vec(
        prop_oneof![
            3 => Just(System),
            1 => Just(TemporalContext),
            1 => Just(SpatialContext),
            1 => Just(LatentTemporalContext),
            1 => Just(LatentSpatialContext),
        ],
        1..=max_vars,
    )
    .prop_map(|mut r| {
        r[0] = System;
        r
    })
}

fn random_gt(roles: Vec<VariableRole>, tau_max: usize, picks: &[(usize, usize, usize)]) -> GroundTruthGraph {
    let nv = roles.len();
    let mut g = GroundTruthGraph::new(roles, tau_max).unwrap();
    for &(p, c, lag) in picks {
        let _ = g.add_edge(n(p % nv, lag % (tau_max + 1)), c % nv);
    }
    g
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn dsep_matches_brute_force_on_dags(
        nv in 2usize..=6,
        picks in prop::collection::vec((0usize..6, 0usize..6), 0..12),
        x in 0usize..6, y in 0usize..6, zmask in 0u32..64,
    ) {
        let g = random_gt(vec![System; nv], 0, &picks.iter().map(|&(a, b)| (a, b, 0)).collect::<Vec<_>>());
        let (x, y) = (x % nv, y % nv);
        prop_assume!(x != y);
        let z: Vec<NodeRef> = (0..nv).filter(|&v| v != x && v != y && zmask & (1 << v) != 0).map(|v| n(v, 0)).collect();
        let brute = BruteDag::unroll(&g, 0);
        let fast = d_separated(&g, n(x, 0), n(y, 0), &z, 0).unwrap();
        prop_assert_eq!(fast, brute.separated(n(x, 0), n(y, 0), &z));
        prop_assert_eq!(fast, d_separated(&g, n(y, 0), n(x, 0), &z, 0).unwrap());
    }

    #[test]
    fn dsep_matches_brute_force_on_unrolled_series(
        tau_max in 1usize..=2,
        picks in prop::collection::vec((0usize..2, 0usize..2, 0usize..3), 0..6),
        x in (0usize..2, 0usize..3), y in (0usize..2, 0usize..3), zmask in 0u32..64,
    ) {
        let g = random_gt(vec![System; 2], tau_max, &picks);
        let depth = 2;
        let (x, y) = (n(x.0, x.1), n(y.0, y.1));
        prop_assume!(x != y);
        let z: Vec<NodeRef> = (0..6)
            .map(|k| n(k / 3, k % 3))
            .enumerate()
            .filter(|&(k, m)| m != x && m != y && zmask & (1 << k) != 0)
            .map(|(_, m)| m)
            .collect();
        let brute = BruteDag::unroll(&g, depth);
        let fast = d_separated(&g, x, y, &z, depth).unwrap();
        prop_assert_eq!(fast, brute.separated(x, y, &z));
        prop_assert_eq!(fast, d_separated(&g, y, x, &z, depth).unwrap());
    }

    #[test]
    fn deletion_of_projection_equals_target(
        roles in roles_strategy(7),
        tau_max in 0usize..=2,
        picks in prop::collection::vec((0usize..7, 0usize..7, 0usize..3), 0..20),
    ) {
        let g = random_gt(roles, tau_max, &picks);
        let p = dummy_projection(&g);
        prop_assert_eq!(dummy_deletion(&p), target_graph(&g));
        // Projection only depends on the latent edge set: re-projecting is stable.
        prop_assert_eq!(dummy_projection(&g), p.clone());
        for (i, j, _, _) in p.edges() {
            prop_assert!(p.role(i).is_system() || p.role(j).is_system());
        }
    }

    #[test]
    fn text_round_trip(
        roles in roles_strategy(6),
        tau_max in 0usize..=3,
        picks in prop::collection::vec((0usize..6, 0usize..6, 0usize..4, 0usize..4), 0..20),
    ) {
        let nv = roles.len();
        let mut g = TimeSeriesGraph::new(roles, tau_max);
        let marks = [EdgeMark::TailHead, EdgeMark::HeadTail, EdgeMark::CircleCircle, EdgeMark::Conflict];
        for (i, j, l, m) in picks {
            let _ = g.set_mark(i % nv, j % nv, l % (tau_max + 1), marks[m]);
        }
        let back: TimeSeriesGraph = g.to_string().parse().unwrap();
        prop_assert_eq!(back, g);
    }
}
