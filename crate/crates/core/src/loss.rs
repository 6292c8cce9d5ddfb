//! Hierarchical proxy-anchor loss in hyperbolic space.
//!
//! Similarity is the negative geodesic distance. Each labeled embedding is
//! pulled toward its leaf proxy and every ancestor proxy, with a strong
//! scaling `alpha_leaf` at the leaf and a softer `alpha_anc` above, and is
//! pushed away from all remaining proxies (including the ignored subtree and
//! other branches' roots):
//!
//! ```text
//! pull = log(1 + sum_l exp(-a_l (s(x, p_l) - delta)))
//! push = log(1 + sum_{p in P^-} exp(a_{l(p)} (s(x, p) + delta)))
//! ```
//!
//! The batch form keeps the proxy-anchor normalization: pull contributions
//! are accumulated per proxy over its positive samples and divided by the
//! number of proxies with at least one positive; push contributions are
//! accumulated per proxy over its negative samples and divided by the total
//! proxy count.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::{
    distance_unchecked, exp_map_origin, geodesic_distance, Curvature, GeometryError, LorentzPoint,
    TangentVector,
};
use crate::hierarchy::{ClassId, Hierarchy, HierarchyError, NodeId};
use crate::proxy::ProxySet;
use crate::scalar::Scalar;

/// Exponents above this trigger the max-shift (log-sum-exp) evaluation; below
/// it, plain `ln_1p(sum(exp))` is exact and cheaper.
const MAX_SHIFT_THRESHOLD: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LossError {
    #[error("invalid loss hyperparameter: {0}")]
    InvalidHyper(String),
    #[error("batch is empty")]
    EmptyBatch,
    #[error("expected {expected} logit rows of width {width}, got {got}")]
    LogitsShape {
        expected: usize,
        width: usize,
        got: usize,
    },
    #[error("loss curvature {hyper} does not match proxy-set curvature {proxies}")]
    CurvatureMismatch { hyper: f64, proxies: f64 },
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Hyperparameters of the hierarchical proxy-anchor loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossHyper {
    pub alpha_leaf: f64,
    pub alpha_anc: f64,
    pub delta: f64,
    pub lambda: f64,
    pub curvature: Curvature,
}

impl LossHyper {
    pub fn new(
        alpha_leaf: f64,
        alpha_anc: f64,
        delta: f64,
        lambda: f64,
        curvature: Curvature,
    ) -> Result<Self, LossError> {
        if !(alpha_leaf > 0.0 && alpha_leaf.is_finite()) {
            return Err(LossError::InvalidHyper("alpha_leaf must be positive".into()));
        }
        if !(alpha_anc > 0.0 && alpha_anc.is_finite()) {
            return Err(LossError::InvalidHyper("alpha_anc must be positive".into()));
        }
        if alpha_anc >= alpha_leaf {
            return Err(LossError::InvalidHyper(
                "alpha_anc must be smaller than alpha_leaf".into(),
            ));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(LossError::InvalidHyper("delta must be positive".into()));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(LossError::InvalidHyper("lambda must be nonnegative".into()));
        }
        Ok(Self {
            alpha_leaf,
            alpha_anc,
            delta,
            lambda,
            curvature,
        })
    }

    /// `alpha_leaf = 5`, `alpha_anc = 2.5`, `delta = 0.5`, `lambda = 0.5`.
    pub fn defaults(curvature: Curvature) -> Self {
        Self {
            alpha_leaf: 5.0,
            alpha_anc: 2.5,
            delta: 0.5,
            lambda: 0.5,
            curvature,
        }
    }

    /// Scaling for a proxy by its hierarchy level.
    #[inline]
    pub fn alpha_for_level(&self, level: usize) -> f64 {
        if level == 0 {
            self.alpha_leaf
        } else {
            self.alpha_anc
        }
    }
}

/// A Euclidean tangent embedding with its ground-truth leaf class.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledEmbedding {
    pub tangent: TangentVector,
    pub label: ClassId,
}

/// Similarity between two on-manifold points: the negative geodesic distance.
/// Always `<= 0`, and `0` exactly when the points coincide.
pub fn similarity(x: &LorentzPoint, p: &LorentzPoint, c: Curvature) -> Result<f64, GeometryError> {
    Ok(-geodesic_distance(x, p, c)?)
}

/// Per-sample pull/push terms from explicit `(similarity, alpha)` pairs.
///
/// This is the loss formula stripped of proxy-set assembly; it also covers
/// flat (depth-1) configurations that a rooted hierarchy cannot express.
pub fn proxy_anchor_sample_terms(
    positives: &[(f64, f64)],
    negatives: &[(f64, f64)],
    delta: f64,
) -> (f64, f64) {
    let pull_exps: Vec<f64> = positives
        .iter()
        .map(|(s, a)| -(a * (s - delta)))
        .collect();
    let push_exps: Vec<f64> = negatives.iter().map(|(s, a)| a * (s + delta)).collect();
    (log1p_sum_exp(&pull_exps), log1p_sum_exp(&push_exps))
}

/// Per-sample hierarchical proxy-anchor loss over the full proxy universe.
pub fn hyp_loss_sample(
    e: &LabeledEmbedding,
    ps: &ProxySet,
    h: &Hierarchy,
    hp: &LossHyper,
) -> Result<f64, LossError> {
    let universe: Vec<NodeId> = (0..h.node_count()).map(NodeId).collect();
    hyp_loss_sample_restricted(e, ps, h, hp, &universe)
}

/// Per-sample loss with the proxy universe restricted to `universe`
/// (positives and negatives are both intersected with it).
pub fn hyp_loss_sample_restricted(
    e: &LabeledEmbedding,
    ps: &ProxySet,
    h: &Hierarchy,
    hp: &LossHyper,
    universe: &[NodeId],
) -> Result<f64, LossError> {
    check_curvature(hp, ps)?;
    let x = exp_map_origin(&e.tangent, hp.curvature);
    let positives = h.positive_set(e.label)?;
    let mut is_pos = vec![false; h.node_count()];
    for p in &positives {
        is_pos[p.0] = true;
    }
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for id in universe {
        let s = -distance_unchecked(&x, ps.point(*id), hp.curvature);
        let a = hp.alpha_for_level(h.node(*id).level);
        if is_pos[id.0] {
            pos.push((s, a));
        } else {
            neg.push((s, a));
        }
    }
    let (pull, push) = proxy_anchor_sample_terms(&pos, &neg, hp.delta);
    Ok(pull + push)
}

/// Batch-normalized hierarchical proxy-anchor loss over the full universe.
pub fn hyp_loss_batch(
    batch: &[LabeledEmbedding],
    ps: &ProxySet,
    h: &Hierarchy,
    hp: &LossHyper,
) -> Result<f64, LossError> {
    let universe: Vec<NodeId> = (0..h.node_count()).map(NodeId).collect();
    hyp_loss_batch_restricted(batch, ps, h, hp, &universe)
}

/// Batch loss with the proxy universe restricted to `universe`. The pull
/// normalizer counts restricted proxies that are positive for at least one
/// sample; the push normalizer is the restricted universe size.
pub fn hyp_loss_batch_restricted(
    batch: &[LabeledEmbedding],
    ps: &ProxySet,
    h: &Hierarchy,
    hp: &LossHyper,
    universe: &[NodeId],
) -> Result<f64, LossError> {
    if batch.is_empty() {
        return Err(LossError::EmptyBatch);
    }
    check_curvature(hp, ps)?;
    let spec = BatchSpec::build(batch.iter().map(|e| e.label), h, hp, universe)?;
    let dists: Vec<Vec<f64>> = batch
        .iter()
        .map(|e| {
            let x = exp_map_origin(&e.tangent, hp.curvature);
            (0..h.node_count())
                .map(|i| distance_unchecked(&x, ps.point(NodeId(i)), hp.curvature))
                .collect()
        })
        .collect();
    Ok(hyp_batch_k(&dists, &spec))
}

/// Composite objective: `ce_weight * cross-entropy + lambda * batch loss`.
/// Classification stays Euclidean; `logits` has one row of `class_count`
/// scores per batch sample.
pub fn total_loss(
    batch: &[LabeledEmbedding],
    logits: &[Vec<f64>],
    ps: &ProxySet,
    h: &Hierarchy,
    hp: &LossHyper,
    ce_weight: f64,
) -> Result<f64, LossError> {
    if batch.is_empty() {
        return Err(LossError::EmptyBatch);
    }
    if logits.len() != batch.len() || logits.iter().any(|l| l.len() != h.class_count()) {
        return Err(LossError::LogitsShape {
            expected: batch.len(),
            width: h.class_count(),
            got: logits.len(),
        });
    }
    let labels: Vec<ClassId> = batch.iter().map(|e| e.label).collect();
    let ce = cross_entropy_k(logits, &labels);
    let hyp = hyp_loss_batch(batch, ps, h, hp)?;
    Ok(ce_weight * ce + hp.lambda * hyp)
}

fn check_curvature(hp: &LossHyper, ps: &ProxySet) -> Result<(), LossError> {
    if hp.curvature != ps.curvature() {
        return Err(LossError::CurvatureMismatch {
            hyper: hp.curvature.get(),
            proxies: ps.curvature().get(),
        });
    }
    Ok(())
}

/// `log(1 + sum_i exp(e_i))` for `f64` exponents; 0 for an empty list.
pub fn log1p_sum_exp(exponents: &[f64]) -> f64 {
    if exponents.is_empty() {
        0.0
    } else {
        log1p_sum_exp_k(exponents)
    }
}

// ---------------------------------------------------------------------------
// Generic kernels (shared with the reverse-mode tape).
// ---------------------------------------------------------------------------

/// `log(1 + sum_i exp(e_i))`, switching to a max-shifted evaluation once any
/// exponent exceeds [`MAX_SHIFT_THRESHOLD`] so distant negatives cannot
/// overflow early in training.
pub(crate) fn log1p_sum_exp_k<S: Scalar>(exponents: &[S]) -> S {
    debug_assert!(!exponents.is_empty());
    let mut max = exponents[0];
    for e in &exponents[1..] {
        if e.value() > max.value() {
            max = *e;
        }
    }
    if max.value() <= MAX_SHIFT_THRESHOLD {
        let mut sum = exponents[0].exp();
        for e in &exponents[1..] {
            sum = sum + e.exp();
        }
        sum.ln_1p()
    } else {
        // log(1 + sum exp(e)) = m + log(exp(-m) + sum exp(e - m)).
        let mut sum = (-max).exp();
        for e in exponents {
            sum = sum + (*e - max).exp();
        }
        max + sum.ln()
    }
}

/// Mean cross-entropy over leaf classes with a max-shifted log-sum-exp.
pub(crate) fn cross_entropy_k<S: Scalar>(logits: &[Vec<S>], labels: &[ClassId]) -> S {
    debug_assert_eq!(logits.len(), labels.len());
    let mut total: Option<S> = None;
    for (row, label) in logits.iter().zip(labels) {
        let mut max = row[0];
        for l in &row[1..] {
            if l.value() > max.value() {
                max = *l;
            }
        }
        let mut sum = (row[0] - max).exp();
        for l in &row[1..] {
            sum = sum + (*l - max).exp();
        }
        let lse = max + sum.ln();
        let ce = lse - row[label.0];
        total = Some(match total {
            Some(t) => t + ce,
            None => ce,
        });
    }
    total
        .expect("cross entropy of a nonempty batch")
        .mul_f64(1.0 / logits.len() as f64)
}

/// Precomputed structure of a batch loss evaluation: the restricted proxy
/// universe, per-node alphas, and per-sample positive membership.
pub(crate) struct BatchSpec {
    pub universe: Vec<NodeId>,
    pub node_alpha: Vec<f64>,
    pub positive: Vec<Vec<bool>>,
    pub delta: f64,
}

impl BatchSpec {
    pub(crate) fn build(
        labels: impl Iterator<Item = ClassId>,
        h: &Hierarchy,
        hp: &LossHyper,
        universe: &[NodeId],
    ) -> Result<Self, LossError> {
        let node_alpha: Vec<f64> = (0..h.node_count())
            .map(|i| hp.alpha_for_level(h.node(NodeId(i)).level))
            .collect();
        let mut positive = Vec::new();
        for label in labels {
            let mut flags = vec![false; h.node_count()];
            for p in h.positive_set(label)? {
                flags[p.0] = true;
            }
            positive.push(flags);
        }
        let mut universe = universe.to_vec();
        universe.sort_unstable();
        Ok(Self {
            universe,
            node_alpha,
            positive,
            delta: hp.delta,
        })
    }
}

/// Batch-normalized loss from a full `[sample][node]` distance matrix.
///
/// Reduction order is fixed: proxies ascending by id, samples in batch order.
pub(crate) fn hyp_batch_k<S: Scalar>(dists: &[Vec<S>], spec: &BatchSpec) -> S {
    let mut pull_total: Option<S> = None;
    let mut pull_proxies = 0usize;
    let mut push_total: Option<S> = None;
    for id in &spec.universe {
        let alpha = spec.node_alpha[id.0];
        let mut pos_exps: Vec<S> = Vec::new();
        let mut neg_exps: Vec<S> = Vec::new();
        for (i, row) in dists.iter().enumerate() {
            let d = row[id.0];
            if spec.positive[i][id.0] {
                // -alpha * (s - delta) with s = -d.
                pos_exps.push(d.mul_f64(alpha).add_f64(alpha * spec.delta));
            } else {
                // alpha * (s + delta).
                neg_exps.push(d.mul_f64(-alpha).add_f64(alpha * spec.delta));
            }
        }
        if !pos_exps.is_empty() {
            let term = log1p_sum_exp_k(&pos_exps);
            pull_total = Some(match pull_total {
                Some(t) => t + term,
                None => term,
            });
            pull_proxies += 1;
        }
        if !neg_exps.is_empty() {
            let term = log1p_sum_exp_k(&neg_exps);
            push_total = Some(match push_total {
                Some(t) => t + term,
                None => term,
            });
        }
    }
    let proxy_count = spec.universe.len() as f64;
    match (pull_total, push_total) {
        (Some(pull), Some(push)) => {
            pull.mul_f64(1.0 / pull_proxies as f64) + push.mul_f64(1.0 / proxy_count)
        }
        (Some(pull), None) => pull.mul_f64(1.0 / pull_proxies as f64),
        (None, Some(push)) => push.mul_f64(1.0 / proxy_count),
        (None, None) => unreachable!("nonempty batch always has positive proxies"),
    }
}
