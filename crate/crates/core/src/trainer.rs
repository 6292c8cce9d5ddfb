//! Desk-scale training harness: synthetic taxonomic data, an affine encoder
//! with a Euclidean classifier head, Adam, and evaluation probes.
//!
//! Classes are sampled as isotropic Gaussians whose means follow the
//! hierarchy: each level-1 group gets a center, leaf means scatter around
//! their group's center. Held-out unknown classes are synthetic leaves
//! attached under existing ancestors: their generating mean stays within two
//! class standard deviations of the ancestor's child-mean centroid, so they
//! are compatible with the hierarchy without ever being labeled. Background
//! noise is drawn on a shell far outside every class mean.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::autodiff::{self, AutodiffError};
use crate::geometry::{exp_map_origin, Curvature, TangentVector};
use crate::hierarchy::{ClassId, Hierarchy, HierarchyError, NodeId};
use crate::loss::LossHyper;
use crate::mining;
use crate::proxy::{CentroidWeighting, ProxyParams, ProxySet};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("need at least 2 known leaf classes, got {0}")]
    TooFewClasses(usize),
    #[error("invalid synthetic spec: {0}")]
    BadSpec(String),
    #[error("unknown-class ancestor '{0}' is not an internal hierarchy node")]
    BadAncestor(String),
    #[error("invalid train config: {0}")]
    BadConfig(String),
    #[error("non-finite loss at step {step} (ce {ce}, hyp {hyp})")]
    NonFiniteLoss { step: usize, ce: f64, hyp: f64 },
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

/// Affine feature encoder: `z = W^T f + b` with `W` of shape `d x n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    pub weight: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl Encoder {
    pub fn init(feature_dim: usize, embedding_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (feature_dim as f64).sqrt();
        Self {
            weight: (0..feature_dim)
                .map(|_| {
                    (0..embedding_dim)
                        .map(|_| {
                            let g: f64 = StandardNormal.sample(&mut rng);
                            g * scale
                        })
                        .collect()
                })
                .collect(),
            bias: vec![0.0; embedding_dim],
        }
    }

    pub fn encode(&self, features: &[f64]) -> Vec<f64> {
        debug_assert_eq!(features.len(), self.weight.len());
        let mut z = self.bias.clone();
        for (f, row) in features.iter().zip(&self.weight) {
            for (zk, w) in z.iter_mut().zip(row) {
                *zk += f * w;
            }
        }
        z
    }

    pub fn feature_dim(&self) -> usize {
        self.weight.len()
    }

    pub fn embedding_dim(&self) -> usize {
        self.bias.len()
    }
}

/// Euclidean classifier head over embedding tangents.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead {
    pub weight: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl ClassifierHead {
    pub fn init(embedding_dim: usize, classes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (embedding_dim as f64).sqrt();
        Self {
            weight: (0..embedding_dim)
                .map(|_| {
                    (0..classes)
                        .map(|_| {
                            let g: f64 = StandardNormal.sample(&mut rng);
                            g * scale
                        })
                        .collect()
                })
                .collect(),
            bias: vec![0.0; classes],
        }
    }

    pub fn logits(&self, embedding: &[f64]) -> Vec<f64> {
        debug_assert_eq!(embedding.len(), self.weight.len());
        let mut out = self.bias.clone();
        for (z, row) in embedding.iter().zip(&self.weight) {
            for (o, w) in out.iter_mut().zip(row) {
                *o += z * w;
            }
        }
        out
    }
}

/// All trainables plus the centroid weighting used when deriving ancestors.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub encoder: Encoder,
    pub head: ClassifierHead,
    pub proxies: ProxyParams,
    pub weighting: CentroidWeighting,
}

impl ModelParams {
    pub fn new(encoder: Encoder, head: ClassifierHead, proxies: ProxyParams) -> Self {
        Self {
            encoder,
            head,
            proxies,
            weighting: CentroidWeighting::Uniform,
        }
    }

    /// Overwrite all trainables from the flat layout of
    /// [`autodiff::flatten_params`].
    pub fn assign_from_flat(&mut self, flat: &[f64]) {
        let mut pos = 0usize;
        let take = |pos: &mut usize, dst: &mut [f64]| {
            dst.copy_from_slice(&flat[*pos..*pos + dst.len()]);
            *pos += dst.len();
        };
        for row in &mut self.encoder.weight {
            take(&mut pos, row);
        }
        take(&mut pos, &mut self.encoder.bias);
        for row in &mut self.head.weight {
            take(&mut pos, row);
        }
        take(&mut pos, &mut self.head.bias);
        let proxy_len = self.proxies.leaf_count() * self.proxies.dim();
        self.proxies.assign_from_flat(&flat[pos..pos + proxy_len]);
        debug_assert_eq!(pos + proxy_len, flat.len());
    }

    /// Project one feature row onto the manifold via encode + exp map.
    pub fn embed(&self, features: &[f64], c: Curvature) -> crate::geometry::LorentzPoint {
        let z = self.encode_tangent(features);
        exp_map_origin(&z, c)
    }

    pub fn encode_tangent(&self, features: &[f64]) -> TangentVector {
        TangentVector::new(self.encoder.encode(features)).expect("finite encoder output")
    }
}

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

/// A held-out leaf: generated during evaluation, never labeled in training.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct UnknownClassSpec {
    pub name: String,
    /// Name of the existing internal node the class attaches under.
    pub ancestor: String,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct SyntheticSpec {
    pub feature_dim: usize,
    /// Isotropic standard deviation of every class's sample cloud.
    pub class_std: f64,
    /// Spread of level-1 group centers around the origin.
    pub group_spread: f64,
    /// Spread of leaf means around their group center.
    pub leaf_spread: f64,
    pub samples_per_class: usize,
    pub eval_per_class: usize,
    #[cfg_attr(feature = "serde", serde(default))]
    pub unknown_classes: Vec<UnknownClassSpec>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub background_noise: usize,
    /// Radial band for background noise; derived from the class means when
    /// absent.
    #[cfg_attr(feature = "serde", serde(default))]
    pub background_radius: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleLabel {
    Known(ClassId),
    /// Index into [`SyntheticSpec::unknown_classes`].
    Unknown(usize),
    Background,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: u64,
    pub features: Vec<f64>,
    pub label: SampleLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Vec<Sample>,
    pub eval_known: Vec<Sample>,
    pub eval_unknown: Vec<Sample>,
    pub background: Vec<Sample>,
    pub leaf_means: Vec<Vec<f64>>,
    pub unknown_means: Vec<Vec<f64>>,
}

/// Deterministically generate the four splits. Training data never contains
/// unknown-class samples; the eval splits are freshly drawn, so they are
/// disjoint from training with probability one.
pub fn generate_dataset(
    spec: &SyntheticSpec,
    h: &Hierarchy,
    seed: u64,
) -> Result<Dataset, TrainError> {
    if h.class_count() < 2 {
        return Err(TrainError::TooFewClasses(h.class_count()));
    }
    if spec.feature_dim == 0 {
        return Err(TrainError::BadSpec("feature_dim must be positive".into()));
    }
    for (name, v) in [
        ("class_std", spec.class_std),
        ("group_spread", spec.group_spread),
        ("leaf_spread", spec.leaf_spread),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(TrainError::BadSpec(format!("{name} must be positive")));
        }
    }
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let sub_seed = |rng: &mut ChaCha8Rng| -> u64 { rng.random() };
    let mut rng_means = ChaCha8Rng::seed_from_u64(sub_seed(&mut master));
    let mut rng_train = ChaCha8Rng::seed_from_u64(sub_seed(&mut master));
    let mut rng_eval = ChaCha8Rng::seed_from_u64(sub_seed(&mut master));
    let mut rng_unknown = ChaCha8Rng::seed_from_u64(sub_seed(&mut master));
    let mut rng_background = ChaCha8Rng::seed_from_u64(sub_seed(&mut master));

    let gaussian = |rng: &mut ChaCha8Rng, dim: usize, sigma: f64| -> Vec<f64> {
        (0..dim)
            .map(|_| {
                let g: f64 = StandardNormal.sample(rng);
                g * sigma
            })
            .collect()
    };

    // Group centers for every level-1 node, in id order; leaf means scatter
    // around the center of their level-1 ancestor.
    let level1 = h.level_nodes(1.min(h.depth() - 1))?.to_vec();
    let mut group_center: Vec<Option<Vec<f64>>> = vec![None; h.node_count()];
    for id in &level1 {
        group_center[id.0] = Some(gaussian(&mut rng_means, spec.feature_dim, spec.group_spread));
    }
    let mut leaf_means = Vec::with_capacity(h.class_count());
    for class in 0..h.class_count() {
        let anchor = h.ancestor(ClassId(class), 1.min(h.depth() - 1))?;
        let center = group_center[anchor.0]
            .as_ref()
            .expect("every leaf has a level-1 ancestor");
        let jitter = gaussian(&mut rng_means, spec.feature_dim, spec.leaf_spread);
        leaf_means.push(center.iter().zip(&jitter).map(|(c, j)| c + j).collect::<Vec<f64>>());
    }

    // Unknown-class means: ancestor's child-mean centroid plus a perturbation
    // capped at two class standard deviations.
    let mut unknown_means = Vec::with_capacity(spec.unknown_classes.len());
    for u in &spec.unknown_classes {
        let anc = h.node_by_name(&u.ancestor)?;
        if h.node(anc).children.is_empty() {
            return Err(TrainError::BadAncestor(u.ancestor.clone()));
        }
        let centroid = child_mean_centroid(h, anc, &leaf_means);
        let mut offset = gaussian(&mut rng_unknown, spec.feature_dim, 0.75 * spec.class_std);
        let norm: f64 = offset.iter().map(|x| x * x).sum::<f64>().sqrt();
        let cap = 2.0 * spec.class_std;
        if norm > cap {
            for x in &mut offset {
                *x *= cap / norm;
            }
        }
        let mean: Vec<f64> = centroid.iter().zip(&offset).map(|(c, o)| c + o).collect();
        debug_assert!(
            mean.iter()
                .zip(&centroid)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
                <= cap + 1e-12
        );
        unknown_means.push(mean);
    }

    let mut next_id = 0u64;
    let draw = |rng: &mut ChaCha8Rng,
                    mean: &[f64],
                    sigma: f64,
                    label: SampleLabel,
                    next_id: &mut u64| {
        let noise = gaussian(rng, mean.len(), sigma);
        let features = mean.iter().zip(&noise).map(|(m, n)| m + n).collect();
        let id = *next_id;
        *next_id += 1;
        Sample {
            id,
            features,
            label,
        }
    };

    let mut train = Vec::new();
    for class in 0..h.class_count() {
        for _ in 0..spec.samples_per_class {
            train.push(draw(
                &mut rng_train,
                &leaf_means[class],
                spec.class_std,
                SampleLabel::Known(ClassId(class)),
                &mut next_id,
            ));
        }
    }
    let mut eval_known = Vec::new();
    for class in 0..h.class_count() {
        for _ in 0..spec.eval_per_class {
            eval_known.push(draw(
                &mut rng_eval,
                &leaf_means[class],
                spec.class_std,
                SampleLabel::Known(ClassId(class)),
                &mut next_id,
            ));
        }
    }
    let mut eval_unknown = Vec::new();
    for (k, mean) in unknown_means.iter().enumerate() {
        for _ in 0..spec.eval_per_class {
            eval_unknown.push(draw(
                &mut rng_unknown,
                mean,
                spec.class_std,
                SampleLabel::Unknown(k),
                &mut next_id,
            ));
        }
    }

    // Background: uniform radius on a far shell, direction uniform.
    let (lo, hi) = spec.background_radius.unwrap_or_else(|| {
        let max_norm = leaf_means
            .iter()
            .chain(unknown_means.iter())
            .map(|m| m.iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0f64, f64::max);
        let base = max_norm + 3.0 * spec.class_std;
        (3.0 * base, 5.0 * base)
    });
    if !(lo > 0.0 && hi > lo) {
        return Err(TrainError::BadSpec(
            "background_radius must satisfy 0 < lo < hi".into(),
        ));
    }
    let mut background = Vec::new();
    for _ in 0..spec.background_noise {
        let mut dir = gaussian(&mut rng_background, spec.feature_dim, 1.0);
        let norm: f64 = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
        let r = rng_background.random_range(lo..hi);
        for x in &mut dir {
            *x *= r / norm.max(1e-12);
        }
        let id = next_id;
        next_id += 1;
        background.push(Sample {
            id,
            features: dir,
            label: SampleLabel::Background,
        });
    }

    Ok(Dataset {
        train,
        eval_known,
        eval_unknown,
        background,
        leaf_means,
        unknown_means,
    })
}

fn child_mean_centroid(h: &Hierarchy, node: NodeId, leaf_means: &[Vec<f64>]) -> Vec<f64> {
    fn mean_of(h: &Hierarchy, id: NodeId, leaf_means: &[Vec<f64>]) -> Vec<f64> {
        if let Some(class) = h.class_of_leaf(id) {
            return leaf_means[class.0].clone();
        }
        let children = &h.node(id).children;
        let mut acc = mean_of(h, children[0], leaf_means);
        for c in &children[1..] {
            let m = mean_of(h, *c, leaf_means);
            for (a, b) in acc.iter_mut().zip(&m) {
                *a += b;
            }
        }
        for a in &mut acc {
            *a /= children.len() as f64;
        }
        acc
    }
    mean_of(h, node, leaf_means)
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub seed: u64,
    pub steps: usize,
    pub batch_size: usize,
    pub embedding_dim: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub loss: LossHyper,
    pub ce_weight: f64,
    pub eval_every: usize,
    pub proxy_init_scale: f64,
}

impl TrainConfig {
    pub fn defaults(loss: LossHyper) -> Self {
        Self {
            seed: 0,
            steps: 1000,
            batch_size: 32,
            embedding_dim: 16,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            loss,
            ce_weight: 1.0,
            eval_every: 50,
            proxy_init_scale: 0.1,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if self.steps < 1 {
            return Err(TrainError::BadConfig("steps must be >= 1".into()));
        }
        if self.batch_size < 2 {
            return Err(TrainError::BadConfig("batch_size must be >= 2".into()));
        }
        if self.embedding_dim < 2 {
            return Err(TrainError::BadConfig("embedding_dim must be >= 2".into()));
        }
        if self.eval_every == 0 {
            return Err(TrainError::BadConfig("eval_every must be >= 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::BadConfig("learning_rate must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HistoryRow {
    pub step: usize,
    pub ce: f64,
    pub hyp: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: ModelParams,
    pub history: Vec<HistoryRow>,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    lr: f64,
}

impl Adam {
    fn new(len: usize, cfg: &TrainConfig) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.adam_epsilon,
            lr: cfg.learning_rate,
        }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            let m_hat = self.m[i] / b1t;
            let v_hat = self.v[i] / b2t;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Run the training loop: sample batch, encode, project, score, backpropagate,
/// Adam-update encoder + head + leaf proxies, refresh proxies. Fully
/// deterministic for a fixed seed.
pub fn train(
    cfg: &TrainConfig,
    data: &Dataset,
    h: &Hierarchy,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    if data.train.is_empty() {
        return Err(TrainError::BadSpec("training set is empty".into()));
    }
    let d = data.train[0].features.len();

    let encoder = Encoder::init(d, cfg.embedding_dim, cfg.seed ^ 0x517c_c1b7);
    let head = ClassifierHead::init(cfg.embedding_dim, h.class_count(), cfg.seed ^ 0x9e37_79b9);
    let proxies = ProxyParams::init(h, cfg.embedding_dim, cfg.seed ^ 0x6a09_e667, cfg.proxy_init_scale);
    let mut model = ModelParams::new(encoder, head, proxies);

    let mut flat = autodiff::flatten_params(&model);
    let mut adam = Adam::new(flat.len(), cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut history = Vec::new();
    // A proxy snapshot per optimizer step; readers pair generation with step.
    let mut proxy_view = ProxySet::with_weighting(
        &model.proxies,
        h,
        cfg.loss.curvature,
        model.weighting,
    );

    for step in 1..=cfg.steps {
        let mut features = Vec::with_capacity(cfg.batch_size);
        let mut labels = Vec::with_capacity(cfg.batch_size);
        for _ in 0..cfg.batch_size {
            let sample = &data.train[rng.random_range(0..data.train.len())];
            features.push(sample.features.clone());
            match sample.label {
                SampleLabel::Known(class) => labels.push(class),
                _ => unreachable!("training set only holds known classes"),
            }
        }

        let bundle = autodiff::backward(&features, &labels, &model, h, &cfg.loss, cfg.ce_weight)?;
        if !bundle.loss_value.is_finite() {
            return Err(TrainError::NonFiniteLoss {
                step,
                ce: bundle.ce_value,
                hyp: bundle.hyp_value,
            });
        }
        let grads = autodiff::flatten_grads(&bundle);
        adam.step(&mut flat, &grads);
        model.assign_from_flat(&flat);
        proxy_view.refresh(&model.proxies, h);

        if step % cfg.eval_every == 0 || step == cfg.steps {
            history.push(HistoryRow {
                step,
                ce: bundle.ce_value,
                hyp: bundle.hyp_value,
                total: bundle.loss_value,
            });
        }
    }

    Ok(TrainOutcome { model, history })
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    /// Fraction of known eval samples whose nearest leaf proxy is their class.
    pub known_leaf_accuracy: f64,
    /// Argmax-of-logits accuracy of the Euclidean head on known eval samples.
    pub classifier_accuracy: f64,
    /// Per level `l`: fraction whose nearest level-`l` proxy is their true
    /// ancestor at that level.
    pub per_level_accuracy: Vec<f64>,
    /// Fraction of unknown eval samples whose nearest non-root proxy lies in
    /// the object subtree; absent when there are no unknown samples.
    pub unknown_subtree_consistency: Option<f64>,
    /// Mean geodesic distance from each known class's eval embeddings to
    /// every proxy node, `[class][node]`.
    pub distance_matrix: Vec<Vec<f64>>,
    pub class_names: Vec<String>,
    pub node_names: Vec<String>,
    pub eval_known_count: usize,
    pub eval_unknown_count: usize,
}

/// Nearest-proxy probes over the evaluation splits.
pub fn evaluate(model: &ModelParams, data: &Dataset, h: &Hierarchy, c: Curvature) -> EvalReport {
    let ps = ProxySet::with_weighting(&model.proxies, h, c, model.weighting);
    let leaves = h.level_nodes(0).expect("level 0 exists").to_vec();

    let mut leaf_hits = 0usize;
    let mut head_hits = 0usize;
    let mut level_hits = vec![0usize; h.depth()];
    let mut sums = vec![vec![0.0f64; h.node_count()]; h.class_count()];
    let mut counts = vec![0usize; h.class_count()];

    for sample in &data.eval_known {
        let class = match sample.label {
            SampleLabel::Known(class) => class,
            _ => continue,
        };
        let x = model.embed(&sample.features, c);
        let (nearest_leaf, _) = ps.nearest(&x, Some(&leaves)).expect("leaves nonempty");
        if nearest_leaf == h.leaf_of(class).expect("known class") {
            leaf_hits += 1;
        }
        let logits = model.head.logits(model.encoder.encode(&sample.features).as_slice());
        let argmax = logits
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .expect("nonempty logits");
        if argmax == class.0 {
            head_hits += 1;
        }
        for level in 0..h.depth() {
            let nodes = h.level_nodes(level).expect("level in range");
            let (nearest, _) = ps.nearest(&x, Some(nodes)).expect("level nonempty");
            if nearest == h.ancestor(class, level).expect("class known") {
                level_hits[level] += 1;
            }
        }
        for node in 0..h.node_count() {
            sums[class.0][node] +=
                crate::geometry::geodesic_distance(&x, ps.point(NodeId(node)), c)
                    .expect("matching dimensions");
        }
        counts[class.0] += 1;
    }

    let n_known = data.eval_known.len();
    let frac = |hits: usize| {
        if n_known == 0 {
            0.0
        } else {
            hits as f64 / n_known as f64
        }
    };

    let unknown_subtree_consistency = if data.eval_unknown.is_empty() {
        None
    } else {
        let consistent = data
            .eval_unknown
            .iter()
            .filter(|s| mining::object_consistent(&model.embed(&s.features, c), &ps, h))
            .count();
        Some(consistent as f64 / data.eval_unknown.len() as f64)
    };

    let distance_matrix = sums
        .into_iter()
        .zip(&counts)
        .map(|(row, n)| {
            row.into_iter()
                .map(|s| if *n == 0 { f64::NAN } else { s / *n as f64 })
                .collect()
        })
        .collect();

    EvalReport {
        known_leaf_accuracy: frac(leaf_hits),
        classifier_accuracy: frac(head_hits),
        per_level_accuracy: level_hits.iter().map(|hits| frac(*hits)).collect(),
        unknown_subtree_consistency,
        distance_matrix,
        class_names: (0..h.class_count())
            .map(|k| h.node(h.leaf_of(ClassId(k)).expect("class")).name.clone())
            .collect(),
        node_names: h.nodes().map(|n| n.name.clone()).collect(),
        eval_known_count: n_known,
        eval_unknown_count: data.eval_unknown.len(),
    }
}
