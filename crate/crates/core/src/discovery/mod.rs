//! Constraint-based discovery on pooled multi-dataset time series: the lagged
//! PC1 phase, staged MCI skeleton searches over context, dummy and system
//! pairs, and the collider and Meek orientation phases.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::citests::{CiError, CiQuery};
use crate::graph::{canonical_key, LinkKey, NodeRef, TimeSeriesGraph, VariableRole};

mod drivers;
mod lagged;
mod orient;
mod skeleton;

pub use drivers::{j_pc, j_pcmciplus, run_variant};
pub use lagged::{lagged_skeleton, LaggedAdjacencies};
pub use orient::{collider_phase, rule_phase, ColliderOutcome, Triple};
pub use skeleton::{partial_contemp_skeleton, partial_skeleton_pc, StageSpec};

#[derive(Debug, Error)]
pub enum DiscoveryError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("CI test failed for {query:?}: {source}")]
    Ci {
        query: CiQuery,
        #[source]
        source: CiError,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColliderRule {
    /// Collider iff the middle node is not in the stored separating set;
    /// contradicting orientations become conflict marks.
    #[default]
    Standard,
    /// Collider iff the middle node is in fewer than half of all separating sets
    /// found by re-testing; exactly half leaves the triple ambiguous.
    Majority,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscoveryConfig {
    pub alpha: f64,
    pub tau_max: usize,
    /// Cap on the size of contemporaneous conditioning subsets.
    pub max_conds_dim: Option<usize>,
    /// Conditioning subsets tried per candidate in the lagged phase.
    pub pc1_max_combinations: usize,
    pub collider_rule: ColliderRule,
    /// Add every dummy of the layout to every conditioning set.
    pub always_condition_dummies: bool,
    /// Condition context-stage tests on the dummy of the other kind (space
    /// dummy for temporal contexts, time dummy for spatial ones), and lagged
    /// tests on the space dummy.
    /// Without these, a latent context that drives a system variable at all
    /// times turns its conditioned past into open colliders.
    pub context_cross_dummies: bool,
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        DiscoveryConfig {
            alpha: 0.05,
            tau_max: 2,
            max_conds_dim: None,
            pc1_max_combinations: 1,
            collider_rule: ColliderRule::Standard,
            always_condition_dummies: false,
            context_cross_dummies: true,
        }
    }
}

impl DiscoveryConfig {
    fn check(&self, roles: &[VariableRole]) -> Result<(), DiscoveryError> {
        let bad = |m: String| Err(DiscoveryError::Config(m));
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha = {} outside [0, 1]", self.alpha));
        }
        if self.pc1_max_combinations == 0 {
            return bad("pc1_max_combinations must be positive".into());
        }
        if let Some(r) = roles.iter().find(|r| r.is_latent()) {
            return bad(format!("estimation layouts cannot contain {r} variables"));
        }
        if !roles.iter().any(|r| r.is_system()) {
            return bad("no system variables".into());
        }
        Ok(())
    }

    fn allows(&self, p: usize) -> bool {
        self.max_conds_dim.is_none_or(|m| p <= m)
    }
}

/// The compared method arms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    /// Staged context, dummy and system search.
    #[serde(rename = "jpcmci+")]
    JPcmciPlus,
    /// System variables only.
    #[serde(rename = "pcmci+")]
    PcmciPlus,
    /// System and observed contexts in one search.
    #[serde(rename = "pcmci+C")]
    PcmciPlusC,
    /// System variables and both dummies in one search.
    #[serde(rename = "pcmci+D")]
    PcmciPlusD,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::JPcmciPlus, Variant::PcmciPlusC, Variant::PcmciPlusD, Variant::PcmciPlus];

    pub fn name(self) -> &'static str {
        match self {
            Variant::JPcmciPlus => "jpcmci+",
            Variant::PcmciPlus => "pcmci+",
            Variant::PcmciPlusC => "pcmci+C",
            Variant::PcmciPlusD => "pcmci+D",
        }
    }

    pub fn uses_contexts(self) -> bool {
        matches!(self, Variant::JPcmciPlus | Variant::PcmciPlusC)
    }

    pub fn uses_dummies(self) -> bool {
        matches!(self, Variant::JPcmciPlus | Variant::PcmciPlusD)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown variant {s:?}; expected one of jpcmci+, pcmci+, pcmci+C, pcmci+D"))
    }
}

/// The test that removed a link.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SepSet {
    pub query: CiQuery,
    pub p_value: f64,
    pub stage: &'static str,
}

impl SepSet {
    pub fn contains(&self, node: NodeRef) -> bool {
        self.query.z.contains(&node)
    }
}

/// Separating sets by unordered node pair, keyed like graph links.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SepSetStore {
    sets: BTreeMap<LinkKey, SepSet>,
}

impl SepSetStore {
    /// Key of the pair `(a, b)`; one node must be at lag 0 unless either is static.
    pub fn key(a: NodeRef, b: NodeRef) -> LinkKey {
        if a.lag >= b.lag {
            canonical_key(a.var, b.var, a.lag - b.lag).0
        } else {
            canonical_key(b.var, a.var, b.lag - a.lag).0
        }
    }

    pub fn get(&self, a: NodeRef, b: NodeRef) -> Option<&SepSet> {
        self.sets.get(&Self::key(a, b))
    }

    pub fn insert(&mut self, s: SepSet) {
        let key = Self::key(s.query.x, s.query.y);
        self.sets.entry(key).or_insert(s);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&LinkKey, &SepSet)> {
        self.sets.iter()
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct DiscoveryResult {
    pub graph: TimeSeriesGraph,
    pub sepsets: SepSetStore,
    /// Lagged-phase output (empty for lag-free runs).
    pub lagged: LaggedAdjacencies,
    pub ambiguous: Vec<Triple>,
    pub n_tests: usize,
}
