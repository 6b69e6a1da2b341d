use super::lagged::{lagged_skeleton, LaggedAdjacencies};
use super::orient::{collider_phase, rule_phase};
use super::skeleton::{partial_contemp_skeleton, StageSpec};
use super::{DiscoveryConfig, DiscoveryError, DiscoveryResult, SepSetStore, Variant};
use crate::citests::CiTest;
use crate::graph::{EdgeMark, NodeRef, TimeSeriesGraph, VariableRole};

/// Variable indices of an estimation layout by role.
struct Layout {
    roles: Vec<VariableRole>,
    sys: Vec<usize>,
    tctx: Vec<usize>,
    ctx: Vec<usize>,
    dummies: Vec<usize>,
}

impl Layout {
    fn new(roles: &[VariableRole], cfg: &DiscoveryConfig) -> Result<Self, DiscoveryError> {
        cfg.check(roles)?;
        let with = |p: fn(VariableRole) -> bool| (0..roles.len()).filter(|&v| p(roles[v])).collect::<Vec<_>>();
        // Time dummy first, then space dummy.
        let mut dummies = with(|r| r == VariableRole::TimeDummy);
        dummies.extend(with(|r| r == VariableRole::SpaceDummy));
        Ok(Layout {
            roles: roles.to_vec(),
            sys: with(VariableRole::is_system),
            tctx: with(|r| r.is_observed_context() && r.is_temporal()),
            ctx: with(VariableRole::is_observed_context),
            dummies,
        })
    }

    fn is_sys(&self, v: usize) -> bool {
        self.roles[v].is_system()
    }

    fn extra(&self, cfg: &DiscoveryConfig) -> Vec<NodeRef> {
        if cfg.always_condition_dummies {
            self.dummies.iter().map(|&d| NodeRef::new(d, 0)).collect()
        } else {
            Vec::new()
        }
    }

    fn graph(&self, tau_max: usize) -> TimeSeriesGraph {
        TimeSeriesGraph::new(self.roles.clone(), tau_max)
    }

    fn pool(&self, keep: impl Fn(usize) -> bool) -> Vec<bool> {
        (0..self.roles.len()).map(keep).collect()
    }

    fn lagged_phase(&self, ci: &dyn CiTest, cfg: &DiscoveryConfig, contexts: bool, cross: bool) -> Result<LaggedAdjacencies, DiscoveryError> {
        let mut targets = self.sys.clone();
        let mut drivers = self.sys.clone();
        if contexts {
            targets.extend(&self.tctx);
            drivers.extend(&self.tctx);
        }
        // Contexts only drive themselves.
        let drivers_of = |j: usize| if self.is_sys(j) { drivers.clone() } else { vec![j] };
        let extra = self.extra(cfg);
        if !cross {
            return lagged_skeleton(ci, cfg, &targets, drivers_of, |_, _| extra.clone());
        }
        // No lagged node is a function of the space dummy.
        let mut z = extra;
        for &d in &self.dummies {
            if self.roles[d] == VariableRole::SpaceDummy && !z.iter().any(|n| n.var == d) {
                z.push(NodeRef::new(d, 0));
            }
        }
        lagged_skeleton(ci, cfg, &targets, drivers_of, |_, _| z.clone())
    }

    fn all_contemp_system(&self, g: &mut TimeSeriesGraph) {
        for (a, &i) in self.sys.iter().enumerate() {
            for &j in &self.sys[a + 1..] {
                link(g, NodeRef::new(i, 0), j, EdgeMark::CircleCircle);
            }
        }
    }

    fn contemp_system_tests(&self) -> Vec<(NodeRef, usize)> {
        let mut out = Vec::new();
        for &j in &self.sys {
            for &i in &self.sys {
                if i != j {
                    out.push((NodeRef::new(i, 0), j));
                }
            }
        }
        out
    }

    /// Both directions of every `(other, system)` pair at lag 0.
    fn pair_tests(&self, others: &[usize]) -> Vec<(NodeRef, usize)> {
        let mut out = Vec::new();
        for &c in others {
            for &j in &self.sys {
                out.push((NodeRef::new(c, 0), j));
                out.push((NodeRef::new(j, 0), c));
            }
        }
        out
    }
}

fn link(g: &mut TimeSeriesGraph, src: NodeRef, j: usize, mark: EdgeMark) {
    g.set_mark(src.var, j, src.lag, mark).expect("link within the layout");
}

/// Links into the system kept after a stage, by target, in `(lag, var)` order.
fn system_parents(g: &TimeSeriesGraph, lay: &Layout, keep: impl Fn(usize) -> bool) -> Vec<Vec<NodeRef>> {
    let mut out = vec![Vec::new(); lay.roles.len()];
    for &j in &lay.sys {
        for a in g.contemporaneous_neighbors(j) {
            if keep(a) {
                out[j].push(NodeRef::new(a, 0));
            }
        }
        out[j].extend(g.lagged_neighbors(j).into_iter().filter(|a| keep(a.var)));
    }
    out
}

fn finish(
    ci: &dyn CiTest,
    cfg: &DiscoveryConfig,
    last: StageSpec,
    sepsets: SepSetStore,
    lagged: LaggedAdjacencies,
    n_tests: usize,
) -> Result<DiscoveryResult, DiscoveryError> {
    let col = collider_phase(ci, cfg, &last, &last.graph, &sepsets)?;
    let graph = rule_phase(&col.graph, &col.ambiguous);
    Ok(DiscoveryResult { graph, sepsets, lagged, ambiguous: col.ambiguous, n_tests: n_tests + col.n_tests })
}

/// Staged search: lagged parents of system variables and temporal contexts,
/// then context-system links, then dummy-system links, then system links,
/// each stage conditioning on what the previous ones kept.
pub fn j_pcmciplus(ci: &dyn CiTest, roles: &[VariableRole], cfg: &DiscoveryConfig) -> Result<DiscoveryResult, DiscoveryError> {
    let lay = Layout::new(roles, cfg)?;
    let extra = lay.extra(cfg);
    let pc1 = lay.lagged_phase(ci, cfg, true, cfg.context_cross_dummies)?;
    let mut n_tests = pc1.n_tests;
    let mut sepsets = SepSetStore::default();
    let lag_sys = |j: usize| pc1.of(j).iter().copied().filter(|p| lay.is_sys(p.var)).collect::<Vec<_>>();
    let lag_ctx = |j: usize| pc1.of(j).iter().copied().filter(|p| !lay.is_sys(p.var)).collect::<Vec<_>>();

    // Context stage.
    let mut g = lay.graph(cfg.tau_max);
    lay.all_contemp_system(&mut g);
    for &j in &lay.sys {
        for p in pc1.of(j) {
            link(&mut g, *p, j, EdgeMark::TailHead);
        }
        for &c in &lay.ctx {
            link(&mut g, NodeRef::new(c, 0), j, EdgeMark::TailHead);
        }
    }
    let mut st = StageSpec::new("context", g);
    st.tests = lay.pair_tests(&lay.ctx);
    for &j in &lay.sys {
        st.tests.extend(lag_ctx(j).into_iter().map(|p| (p, j)));
    }
    st.pool = lay.pool(|v| lay.is_sys(v) || lay.roles[v].is_observed_context());
    for v in lay.sys.iter().chain(&lay.tctx) {
        st.fixed[*v] = pc1.of(*v).to_vec();
    }
    st.extra = extra.clone();
    if cfg.context_cross_dummies {
        for &c in &lay.ctx {
            let kind = if lay.roles[c].is_temporal() { VariableRole::SpaceDummy } else { VariableRole::TimeDummy };
            st.companions[c] = lay.dummies.iter().filter(|&&d| lay.roles[d] == kind).map(|&d| NodeRef::new(d, 0)).collect();
        }
    }
    let (gc, n) = partial_contemp_skeleton(ci, cfg, &st, &mut sepsets)?;
    n_tests += n;
    let ctx_parents = system_parents(&gc, &lay, |v| lay.roles[v].is_observed_context());

    // Dummy stage.
    let mut base = lay.graph(cfg.tau_max);
    lay.all_contemp_system(&mut base);
    let mut fixed_c = vec![Vec::new(); roles.len()];
    for &j in &lay.sys {
        for p in lag_sys(j).into_iter().chain(ctx_parents[j].iter().copied()) {
            link(&mut base, p, j, EdgeMark::TailHead);
            fixed_c[j].push(p);
        }
    }
    let dummy_parents = if lay.dummies.is_empty() {
        vec![Vec::new(); roles.len()]
    } else {
        let mut g = base.clone();
        for &d in &lay.dummies {
            for &j in &lay.sys {
                link(&mut g, NodeRef::new(d, 0), j, EdgeMark::TailHead);
            }
        }
        let mut st = StageSpec::new("dummy", g);
        st.tests = lay.pair_tests(&lay.dummies);
        st.pool = lay.pool(|v| lay.is_sys(v));
        st.fixed = fixed_c.clone();
        st.extra = extra.clone();
        let (gd, n) = partial_contemp_skeleton(ci, cfg, &st, &mut sepsets)?;
        n_tests += n;
        system_parents(&gd, &lay, |v| lay.roles[v].is_dummy())
    };

    // System stage.
    let mut g = base;
    let mut fixed = fixed_c;
    for &j in &lay.sys {
        for &d in &dummy_parents[j] {
            link(&mut g, d, j, EdgeMark::TailHead);
            fixed[j].push(d);
        }
    }
    let mut st = StageSpec::new("system", g);
    for &j in &lay.sys {
        st.tests.extend(lag_sys(j).into_iter().map(|p| (p, j)));
    }
    st.tests.extend(lay.contemp_system_tests());
    st.pool = lay.pool(|v| lay.is_sys(v));
    st.fixed = fixed;
    st.extra = extra;
    let (gs, n) = partial_contemp_skeleton(ci, cfg, &st, &mut sepsets)?;
    n_tests += n;
    st.graph = gs;
    finish(ci, cfg, st, sepsets, pc1, n_tests)
}

/// One search over system links plus, depending on the variant, observed
/// context links or dummy links, all treated alike.
pub fn run_variant(
    variant: Variant,
    ci: &dyn CiTest,
    roles: &[VariableRole],
    cfg: &DiscoveryConfig,
) -> Result<DiscoveryResult, DiscoveryError> {
    if variant == Variant::JPcmciPlus {
        return j_pcmciplus(ci, roles, cfg);
    }
    let lay = Layout::new(roles, cfg)?;
    let with_ctx = variant.uses_contexts();
    let with_dummies = variant.uses_dummies();
    let pc1 = lay.lagged_phase(ci, cfg, with_ctx, false)?;
    let mut sepsets = SepSetStore::default();

    let mut g = lay.graph(cfg.tau_max);
    lay.all_contemp_system(&mut g);
    let mut st_tests = Vec::new();
    let mut others = Vec::new();
    if with_ctx {
        others.extend(&lay.ctx);
    }
    if with_dummies {
        others.extend(&lay.dummies);
    }
    for &j in &lay.sys {
        for p in pc1.of(j) {
            link(&mut g, *p, j, EdgeMark::TailHead);
            st_tests.push((*p, j));
        }
        for &c in &others {
            link(&mut g, NodeRef::new(c, 0), j, EdgeMark::TailHead);
        }
    }
    let mut st = StageSpec::new("system", g);
    st.tests = lay.pair_tests(&others);
    st.tests.extend(st_tests);
    st.tests.extend(lay.contemp_system_tests());
    st.pool = lay.pool(|v| lay.is_sys(v) || others.contains(&v));
    for v in lay.sys.iter().chain(if with_ctx { &lay.tctx[..] } else { &[] }) {
        st.fixed[*v] = pc1.of(*v).to_vec();
    }
    st.extra = lay.extra(cfg);
    let (gs, n) = partial_contemp_skeleton(ci, cfg, &st, &mut sepsets)?;
    let n_tests = pc1.n_tests + n;
    st.graph = gs;
    finish(ci, cfg, st, sepsets, pc1, n_tests)
}

/// Lag-free staged search over pooled i.i.d. datasets: context links given
/// system and context neighbors, then space-dummy links given system and
/// context neighbors, then system links given any neighbors.
pub fn j_pc(ci: &dyn CiTest, roles: &[VariableRole], cfg: &DiscoveryConfig) -> Result<DiscoveryResult, DiscoveryError> {
    let cfg = DiscoveryConfig { tau_max: 0, ..cfg.clone() };
    let lay = Layout::new(roles, &cfg)?;
    let space: Vec<usize> = lay.dummies.iter().copied().filter(|&d| roles[d] == VariableRole::SpaceDummy).collect();
    let mut sepsets = SepSetStore::default();
    let mut n_tests = 0;

    let mut g = lay.graph(0);
    lay.all_contemp_system(&mut g);
    for &j in &lay.sys {
        for &c in &lay.ctx {
            link(&mut g, NodeRef::new(c, 0), j, EdgeMark::TailHead);
        }
    }
    let mut st = StageSpec::new("context", g);
    st.tests = lay.pair_tests(&lay.ctx);
    st.pool = lay.pool(|v| !roles[v].is_dummy());
    let (gc, n) = partial_contemp_skeleton(ci, &cfg, &st, &mut sepsets)?;
    n_tests += n;

    let mut g = lay.graph(0);
    lay.all_contemp_system(&mut g);
    let ctx_parents = system_parents(&gc, &lay, |v| lay.roles[v].is_observed_context());
    for &j in &lay.sys {
        for &p in &ctx_parents[j] {
            link(&mut g, p, j, EdgeMark::TailHead);
        }
    }
    let base = g.clone();
    for &d in &space {
        for &j in &lay.sys {
            link(&mut g, NodeRef::new(d, 0), j, EdgeMark::TailHead);
        }
    }
    let mut st = StageSpec::new("dummy", g);
    st.tests = lay.pair_tests(&space);
    st.pool = lay.pool(|v| !roles[v].is_dummy());
    let (gd, n) = partial_contemp_skeleton(ci, &cfg, &st, &mut sepsets)?;
    n_tests += n;

    let mut g = base;
    for (j, ps) in system_parents(&gd, &lay, |v| roles[v].is_dummy()).into_iter().enumerate() {
        for p in ps {
            link(&mut g, p, j, EdgeMark::TailHead);
        }
    }
    let mut st = StageSpec::new("system", g);
    st.tests = lay.contemp_system_tests();
    st.pool = lay.pool(|_| true);
    let (gs, n) = partial_contemp_skeleton(ci, &cfg, &st, &mut sepsets)?;
    n_tests += n;
    st.graph = gs;
    finish(ci, &cfg, st, sepsets, LaggedAdjacencies::default(), n_tests)
}
