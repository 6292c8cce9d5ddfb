//! Hyperbolic hierarchy embeddings on the Lorentz model.
//!
//! This crate provides the numerical core for learning hierarchy-aware
//! embeddings in hyperbolic space and using them to rank open-set object
//! candidates:
//!
//! - [`geometry`]: Lorentz-model primitives (inner product, exponential and
//!   logarithmic maps at the origin, geodesic distance, closed-form centroid).
//! - [`hierarchy`]: balanced class taxonomies with ancestor and proxy-set
//!   queries.
//! - [`proxy`]: learnable leaf proxies plus derived on-manifold points for
//!   every taxonomy node.
//! - [`loss`]: hierarchical proxy-anchor loss, per-sample and batch-normalized,
//!   and the composite training objective.
//! - [`autodiff`]: a reverse-mode scalar tape with exact gradients of the
//!   composite loss, validated against central finite differences.
//! - [`trainer`]: synthetic taxonomic data, an affine encoder with a Euclidean
//!   classifier head, Adam, and evaluation probes.
//! - [`mining`]: hierarchy-guided unknown mining (object consistency,
//!   hierarchy-level score, semantic divergence, top-K selection).
//! - [`panoptic`]: panoptic quality (PQ/RQ/SQ) over dense label maps with an
//!   open-world report.
//!
//! The crate is `no_std`-compatible (with `alloc`); the default `std` feature
//! switches float math to the platform intrinsics.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod autodiff;
pub mod geometry;
pub mod hierarchy;
pub mod loss;
pub mod mining;
pub mod panoptic;
pub mod proxy;
pub mod scalar;
pub mod trainer;

pub use geometry::{Curvature, GeometryError, LorentzPoint, TangentVector};
pub use hierarchy::{ClassId, Hierarchy, HierarchyError, HierarchySpec, NodeId, SubtreeTag};
pub use loss::{LabeledEmbedding, LossHyper};
pub use proxy::{ProxyParams, ProxySet};
