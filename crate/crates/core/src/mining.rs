//! Hierarchy-guided unknown mining.
//!
//! Candidates that survive the known-class confidence filter are scored
//! against the learned proxies. A candidate is object-consistent when its
//! nearest proxy (root excluded, which separates nothing) lies in the object
//! subtree. Object-consistent candidates receive a hierarchy-level score
//! `S_hier` — the weight of the level their nearest proxy sits on — and a
//! semantic divergence score `S_div`, a sum of normalized margins between the
//! two closest proxies of each scoring set (the object subtree and every
//! non-root level). The objectness `S_div + beta * S_hier` ranks candidates;
//! the top K become unknown instances.

use alloc::string::String;
use alloc::vec::Vec;

use crate::geometry::{distance_unchecked, LorentzPoint};
use crate::hierarchy::{Hierarchy, NodeId, SubtreeTag};
use crate::proxy::ProxySet;
use crate::scalar::math;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MiningError {
    #[error("level_weights must have one entry per non-root level ({expected}), got {got}")]
    LevelWeightCount { expected: usize, got: usize },
    #[error(
        "divergence_weights must cover the object subtree plus every non-root \
         level ({expected}), got {got}"
    )]
    DivergenceWeightCount { expected: usize, got: usize },
    #[error("scoring set '{0}' holds fewer than 2 proxies")]
    ScoringSetTooSmall(String),
    #[error("hierarchy score requested for a non-object-consistent candidate")]
    NotObjectConsistent,
    #[error("class distribution {index} is malformed: {reason}")]
    MalformedDistribution { index: usize, reason: String },
}

/// Mining hyperparameters for a depth-`L` hierarchy.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct MiningHyper {
    /// `S_hier` weight per level, index = level, length `L - 1` (no root).
    pub level_weights: Vec<f64>,
    /// `S_div` weights for (object subtree, level 0, ..., level L-2).
    pub divergence_weights: Vec<f64>,
    pub beta: f64,
    pub epsilon: f64,
    pub k: usize,
}

impl MiningHyper {
    /// Defaults for a 4-level hierarchy: `alpha = (2, 4, 2)` over levels
    /// 0..2, `w = (2, 3, 3, 0.5)` over (object, l0, l1, l2), `beta = 1`
    /// (COCO-scale taxonomies favor `beta = 4`), `epsilon = 1e-8`, `K = 5`.
    pub fn default_h4() -> Self {
        Self {
            level_weights: alloc::vec![2.0, 4.0, 2.0],
            divergence_weights: alloc::vec![2.0, 3.0, 3.0, 0.5],
            beta: 1.0,
            epsilon: 1e-8,
            k: 5,
        }
    }

    /// Check weight arities and scoring-set sizes against a hierarchy.
    pub fn validate(&self, h: &Hierarchy) -> Result<(), MiningError> {
        let expected = h.depth() - 1;
        if self.level_weights.len() != expected {
            return Err(MiningError::LevelWeightCount {
                expected,
                got: self.level_weights.len(),
            });
        }
        if self.divergence_weights.len() != expected + 1 {
            return Err(MiningError::DivergenceWeightCount {
                expected: expected + 1,
                got: self.divergence_weights.len(),
            });
        }
        for (name, set) in scoring_sets(h) {
            if set.len() < 2 {
                return Err(MiningError::ScoringSetTooSmall(name));
            }
        }
        Ok(())
    }
}

/// Scores attached to one candidate embedding.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MiningScore {
    pub candidate: u64,
    pub object_consistent: bool,
    pub s_hier: f64,
    pub s_div: f64,
    /// `s_div + beta * s_hier`.
    pub objectness: f64,
    /// Globally nearest non-root proxy.
    pub nearest_node: NodeId,
    /// Nearest proxy within each scoring set, ordered (object, l0, l1, ...).
    pub nearest_per_set: Vec<NodeId>,
}

/// The divergence scoring sets: the object subtree, then each non-root level.
/// Ordering matches `MiningHyper::divergence_weights`.
pub(crate) fn scoring_sets(h: &Hierarchy) -> Vec<(String, Vec<NodeId>)> {
    let mut sets = Vec::with_capacity(h.depth());
    sets.push((String::from("object"), h.object_nodes()));
    for level in 0..h.depth() - 1 {
        let mut name = String::from("level_");
        name.push_str(itoa(level).as_str());
        sets.push((name, h.level_nodes(level).expect("level in range").to_vec()));
    }
    sets
}

fn itoa(mut n: usize) -> String {
    if n == 0 {
        return String::from("0");
    }
    let mut digits = Vec::new();
    while n > 0 {
        digits.push(b'0' + (n % 10) as u8);
        n /= 10;
    }
    digits.reverse();
    String::from_utf8(digits).expect("ascii digits")
}

/// Every node except the root, ascending ids. The root is excluded from all
/// mining-side nearest-proxy computations: it provides no discriminative
/// separation.
fn non_root_nodes(h: &Hierarchy) -> Vec<NodeId> {
    (0..h.node_count())
        .map(NodeId)
        .filter(|id| *id != h.root())
        .collect()
}

/// True when the candidate's globally nearest non-root proxy carries the
/// object tag.
pub fn object_consistent(e: &LorentzPoint, ps: &ProxySet, h: &Hierarchy) -> bool {
    let restrict = non_root_nodes(h);
    let (nearest, _) = ps
        .nearest(e, Some(&restrict))
        .expect("a hierarchy always has non-root nodes");
    h.subtree_tag(nearest) == Some(SubtreeTag::Object)
}

/// Level weight of the nearest non-root proxy. Exactly one level indicator
/// fires per candidate. Usage error on non-object-consistent candidates.
pub fn hierarchy_score(
    e: &LorentzPoint,
    ps: &ProxySet,
    h: &Hierarchy,
    mh: &MiningHyper,
) -> Result<f64, MiningError> {
    if !object_consistent(e, ps, h) {
        return Err(MiningError::NotObjectConsistent);
    }
    let restrict = non_root_nodes(h);
    let (nearest, _) = ps.nearest(e, Some(&restrict)).expect("non-root nodes");
    Ok(mh.level_weights[h.node(nearest).level])
}

/// Margin-based semantic divergence: for each scoring set, the gap between
/// the smallest and second-smallest distances, normalized by the population
/// standard deviation of all distances to that set, then combined with the
/// configured weights.
pub fn divergence_score(
    e: &LorentzPoint,
    ps: &ProxySet,
    h: &Hierarchy,
    mh: &MiningHyper,
) -> Result<f64, MiningError> {
    mh.validate(h)?;
    let mut total = 0.0;
    for ((_, set), w) in scoring_sets(h).iter().zip(&mh.divergence_weights) {
        let (d, _) = set_margin(e, ps, set, mh.epsilon);
        total += w * d;
    }
    Ok(total)
}

/// `(D_i, nearest node)`: normalized margin for one scoring set.
fn set_margin(e: &LorentzPoint, ps: &ProxySet, set: &[NodeId], epsilon: f64) -> (f64, NodeId) {
    debug_assert!(set.len() >= 2, "scoring sets are validated at setup");
    let dists: Vec<f64> = set
        .iter()
        .map(|id| distance_unchecked(e, ps.point(*id), ps.curvature()))
        .collect();
    let mut d1 = f64::INFINITY;
    let mut d2 = f64::INFINITY;
    let mut nearest = set[0];
    for (id, d) in set.iter().zip(&dists) {
        if *d < d1 {
            d2 = d1;
            d1 = *d;
            nearest = *id;
        } else if *d < d2 {
            d2 = *d;
        }
    }
    let mean = dists.iter().sum::<f64>() / dists.len() as f64;
    let var = dists.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / dists.len() as f64;
    let sigma = math::sqrt(var);
    ((d2 - d1) / (sigma + epsilon), nearest)
}

/// Full per-candidate scoring. The objectness is computed for every
/// candidate; consistency gates selection, not the score itself.
pub fn score_candidate(
    candidate: u64,
    e: &LorentzPoint,
    ps: &ProxySet,
    h: &Hierarchy,
    mh: &MiningHyper,
) -> MiningScore {
    let restrict = non_root_nodes(h);
    let (nearest_node, _) = ps.nearest(e, Some(&restrict)).expect("non-root nodes");
    let object_consistent = h.subtree_tag(nearest_node) == Some(SubtreeTag::Object);
    let s_hier = mh.level_weights[h.node(nearest_node).level];
    let mut s_div = 0.0;
    let mut nearest_per_set = Vec::new();
    for ((_, set), w) in scoring_sets(h).iter().zip(&mh.divergence_weights) {
        let (d, nearest) = set_margin(e, ps, set, mh.epsilon);
        s_div += w * d;
        nearest_per_set.push(nearest);
    }
    MiningScore {
        candidate,
        object_consistent,
        s_hier,
        s_div,
        objectness: s_div + mh.beta * s_hier,
        nearest_node,
        nearest_per_set,
    }
}

/// Filter to object-consistent candidates, score with the combined
/// objectness, sort descending (ties by ascending candidate id), keep the
/// top K.
pub fn mine_unknowns(
    candidates: &[(u64, LorentzPoint)],
    ps: &ProxySet,
    h: &Hierarchy,
    mh: &MiningHyper,
) -> Result<Vec<MiningScore>, MiningError> {
    mh.validate(h)?;
    let mut scored: Vec<MiningScore> = candidates
        .iter()
        .map(|(id, e)| score_candidate(*id, e, ps, h, mh))
        .filter(|s| s.object_consistent)
        .collect();
    scored.sort_by(|a, b| {
        b.objectness
            .total_cmp(&a.objectness)
            .then(a.candidate.cmp(&b.candidate))
    });
    scored.truncate(mh.k);
    Ok(scored)
}

/// Split candidates by the maximum known-class probability: above the
/// threshold they stay known detections, the rest become mining candidates.
/// Returns `(accepted_known, unknown_candidates)` as indices.
pub fn known_confidence_filter(
    probabilities: &[Vec<f64>],
    threshold: f64,
) -> Result<(Vec<usize>, Vec<usize>), MiningError> {
    let mut known = Vec::new();
    let mut candidates = Vec::new();
    for (i, dist) in probabilities.iter().enumerate() {
        if dist.is_empty() {
            return Err(MiningError::MalformedDistribution {
                index: i,
                reason: String::from("empty"),
            });
        }
        if dist.iter().any(|p| !(0.0..=1.0 + 1e-6).contains(p)) {
            return Err(MiningError::MalformedDistribution {
                index: i,
                reason: String::from("probability outside [0, 1]"),
            });
        }
        let sum: f64 = dist.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(MiningError::MalformedDistribution {
                index: i,
                reason: String::from("does not sum to 1"),
            });
        }
        let max = dist.iter().fold(0.0f64, |a, b| a.max(*b));
        if max > threshold {
            known.push(i);
        } else {
            candidates.push(i);
        }
    }
    Ok((known, candidates))
}
