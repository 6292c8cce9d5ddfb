//! Learnable leaf proxies and the derived on-manifold points for every
//! taxonomy node.
//!
//! Only leaf proxies are parameters; they live in the origin tangent space so
//! a plain Euclidean optimizer can act on them, and are projected onto the
//! manifold by the exponential map. Ancestor proxies are not optimized
//! directly: each one is the Lorentzian centroid of its children's points and
//! is recomputed on every [`ProxySet::refresh`].

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::geometry::{
    distance_unchecked, exp_map_origin, lorentz_centroid, Curvature, LorentzPoint, TangentVector,
};
use crate::hierarchy::{ClassId, Hierarchy, NodeId};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProxyError {
    #[error("nearest-proxy restriction set is empty")]
    EmptyRestriction,
    #[error("embedding dimension {got} does not match proxy dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// How ancestor centroids weight their children.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CentroidWeighting {
    /// Every child counts once.
    #[default]
    Uniform,
    /// Children count by the number of leaves below them.
    SubtreeSize,
}

/// The trainable proxy parameters: one tangent vector per leaf class.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxyParams {
    dim: usize,
    leaf_tangents: Vec<TangentVector>,
}

impl ProxyParams {
    /// Draw leaf tangents i.i.d. from a zero-mean isotropic Gaussian with
    /// standard deviation `scale`. Deterministic for a fixed seed.
    pub fn init(h: &Hierarchy, dim: usize, seed: u64, scale: f64) -> Self {
        assert!(dim >= 2, "embedding dimension must be at least 2");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let leaf_tangents = (0..h.class_count())
            .map(|_| {
                let coords: Vec<f64> = (0..dim)
                    .map(|_| {
                        let g: f64 = StandardNormal.sample(&mut rng);
                        g * scale
                    })
                    .collect();
                TangentVector::new(coords).expect("gaussian draws are finite")
            })
            .collect();
        Self { dim, leaf_tangents }
    }

    pub fn from_tangents(dim: usize, leaf_tangents: Vec<TangentVector>) -> Self {
        assert!(leaf_tangents.iter().all(|t| t.dim() == dim));
        Self { dim, leaf_tangents }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn leaf_count(&self) -> usize {
        self.leaf_tangents.len()
    }

    pub fn leaf_tangent(&self, class: ClassId) -> &TangentVector {
        &self.leaf_tangents[class.0]
    }

    pub fn leaf_tangents(&self) -> &[TangentVector] {
        &self.leaf_tangents
    }

    pub fn set_leaf_tangent(&mut self, class: ClassId, tangent: TangentVector) {
        assert_eq!(tangent.dim(), self.dim);
        self.leaf_tangents[class.0] = tangent;
    }

    /// Flatten all leaf tangents, class-major, for optimizer updates.
    pub fn flatten(&self) -> Vec<f64> {
        self.leaf_tangents
            .iter()
            .flat_map(|t| t.coords().iter().copied())
            .collect()
    }

    pub fn assign_from_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.leaf_tangents.len() * self.dim);
        for (k, chunk) in flat.chunks_exact(self.dim).enumerate() {
            self.leaf_tangents[k] =
                TangentVector::new(chunk.to_vec()).expect("optimizer produced non-finite tangent");
        }
    }
}

/// On-manifold proxy points for every hierarchy node, derived from
/// [`ProxyParams`]. Snapshots are immutable between refreshes; the generation
/// counter lets readers pair a snapshot with the training step it belongs to.
#[derive(Debug, Clone)]
pub struct ProxySet {
    points: Vec<LorentzPoint>,
    generation: u64,
    curvature: Curvature,
    weighting: CentroidWeighting,
}

impl ProxySet {
    pub fn new(params: &ProxyParams, h: &Hierarchy, c: Curvature) -> Self {
        Self::with_weighting(params, h, c, CentroidWeighting::Uniform)
    }

    pub fn with_weighting(
        params: &ProxyParams,
        h: &Hierarchy,
        c: Curvature,
        weighting: CentroidWeighting,
    ) -> Self {
        Self {
            points: compute_points(params, h, c, weighting),
            generation: 0,
            curvature: c,
            weighting,
        }
    }

    /// Recompute every node point bottom-up and bump the generation counter.
    pub fn refresh(&mut self, params: &ProxyParams, h: &Hierarchy) {
        self.points = compute_points(params, h, self.curvature, self.weighting);
        self.generation += 1;
    }

    #[inline]
    pub fn generation(&self) -> u64 {
        self.generation
    }

    #[inline]
    pub fn curvature(&self) -> Curvature {
        self.curvature
    }

    #[inline]
    pub fn point(&self, id: NodeId) -> &LorentzPoint {
        &self.points[id.0]
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    /// Nearest proxy to `e` by geodesic distance over the restricted node set
    /// (all nodes when `restrict` is `None`). Ties break to the smallest id.
    pub fn nearest(
        &self,
        e: &LorentzPoint,
        restrict: Option<&[NodeId]>,
    ) -> Result<(NodeId, f64), ProxyError> {
        if e.dim() != self.dim() {
            return Err(ProxyError::DimensionMismatch {
                expected: self.dim(),
                got: e.dim(),
            });
        }
        let mut best: Option<(NodeId, f64)> = None;
        let mut consider = |id: NodeId| {
            let d = distance_unchecked(e, &self.points[id.0], self.curvature);
            match best {
                Some((_, bd)) if d >= bd => {}
                _ => best = Some((id, d)),
            }
        };
        match restrict {
            Some(ids) => {
                if ids.is_empty() {
                    return Err(ProxyError::EmptyRestriction);
                }
                // Ascending id order makes the strict `<` tie-break exact.
                let mut sorted: Vec<NodeId> = ids.to_vec();
                sorted.sort_unstable();
                for id in sorted {
                    consider(id);
                }
            }
            None => {
                for i in 0..self.points.len() {
                    consider(NodeId(i));
                }
            }
        }
        best.ok_or(ProxyError::EmptyRestriction)
    }
}

/// Convenience wrapper matching the op-style call sites.
pub fn nearest_proxy(
    e: &LorentzPoint,
    ps: &ProxySet,
    restrict: Option<&[NodeId]>,
) -> Result<(NodeId, f64), ProxyError> {
    ps.nearest(e, restrict)
}

fn compute_points(
    params: &ProxyParams,
    h: &Hierarchy,
    c: Curvature,
    weighting: CentroidWeighting,
) -> Vec<LorentzPoint> {
    assert_eq!(
        params.leaf_count(),
        h.class_count(),
        "proxy parameters must match the hierarchy's class count"
    );
    let mut points: Vec<Option<LorentzPoint>> = alloc::vec![None; h.node_count()];
    // Leaves first, then ascending levels; children are always ready.
    for level in 0..h.depth() {
        for id in h.level_nodes(level).expect("level in range") {
            let node = h.node(*id);
            let point = if node.children.is_empty() {
                let class = h.class_of_leaf(*id).expect("level-0 nodes are classes");
                exp_map_origin(params.leaf_tangent(class), c)
            } else {
                let children: Vec<LorentzPoint> = node
                    .children
                    .iter()
                    .map(|cid| points[cid.0].clone().expect("child computed"))
                    .collect();
                let weights: Vec<f64> = match weighting {
                    CentroidWeighting::Uniform => alloc::vec![1.0; children.len()],
                    CentroidWeighting::SubtreeSize => node
                        .children
                        .iter()
                        .map(|cid| leaf_count_below(h, *cid) as f64)
                        .collect(),
                };
                lorentz_centroid(&children, &weights, c)
                    .expect("centroid of on-manifold children cannot degenerate")
            };
            points[id.0] = Some(point);
        }
    }
    points
        .into_iter()
        .map(|p| p.expect("all computed"))
        .collect()
}

pub(crate) fn leaf_count_below(h: &Hierarchy, id: NodeId) -> usize {
    let node = h.node(id);
    if node.children.is_empty() {
        1
    } else {
        node.children.iter().map(|c| leaf_count_below(h, *c)).sum()
    }
}
