//! Lorentz-model hyperbolic geometry.
//!
//! Hyperbolic space of curvature `-c` (with `c > 0`) is realized as the upper
//! sheet of the two-sheeted hyperboloid in `R^{n+1}`:
//!
//! ```text
//! L^n = { x : <x,x>_L = -1/c },    <x,y>_L = -x_t*y_t + <x_s, y_s>
//! ```
//!
//! where each point splits into a spatial part `x_s` of length `n` and a
//! positive time coordinate `x_t`. All maps here are anchored at the origin
//! `O = (0, 1/sqrt(c))`; exp/log at arbitrary base points are out of scope.
//!
//! Validation is lazy: constructors from raw data check the manifold
//! invariant, hot-path operations trust their inputs and recheck only in
//! debug builds.

use alloc::vec;
use alloc::vec::Vec;

use crate::scalar::{math, Scalar};

/// Absolute tolerance on the manifold constraint `<x,x>_L = -1/c`.
pub const MANIFOLD_TOL: f64 = 1e-9;

/// Below this value of `t = sqrt(c)*||v||`, `sinh(t)/t` is evaluated by its
/// two-term Taylor expansion `1 + t^2/6` to avoid 0/0.
const SINHC_TAYLOR_CUTOFF: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("curvature must be positive and finite, got {0}")]
    InvalidCurvature(f64),
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("non-finite value in input")]
    NonFinite,
    #[error("point is off the manifold: |<x,x>_L + 1/c| = {deviation:.3e} exceeds tolerance")]
    OffManifold { deviation: f64 },
    #[error("centroid of an empty point set")]
    EmptyCentroid,
    #[error("centroid weights must be nonnegative, finite, and not all zero")]
    InvalidWeights,
    #[error("degenerate centroid aggregate: <m,m>_L = {0:.3e} is not negative")]
    DegenerateCentroid(f64),
}

/// Magnitude of the (negative) manifold curvature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Curvature {
    c: f64,
}

impl Curvature {
    pub fn new(c: f64) -> Result<Self, GeometryError> {
        if c > 0.0 && c.is_finite() {
            Ok(Self { c })
        } else {
            Err(GeometryError::InvalidCurvature(c))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.c
    }

    /// `sqrt(c)`.
    #[inline]
    pub fn sqrt(self) -> f64 {
        math::sqrt(self.c)
    }
}

/// A vector in the tangent space at the hyperboloid origin.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    coords: Vec<f64>,
}

impl TangentVector {
    pub fn new(coords: Vec<f64>) -> Result<Self, GeometryError> {
        if coords.iter().all(|x| x.is_finite()) {
            Ok(Self { coords })
        } else {
            Err(GeometryError::NonFinite)
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            coords: vec![0.0; dim],
        }
    }

    #[inline]
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn norm(&self) -> f64 {
        math::sqrt(self.coords.iter().map(|x| x * x).sum())
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }
}

/// A point on the upper hyperboloid sheet, split into space/time components.
#[derive(Debug, Clone, PartialEq)]
pub struct LorentzPoint {
    space: Vec<f64>,
    time: f64,
}

impl LorentzPoint {
    /// Validating constructor from raw components.
    pub fn from_parts(space: Vec<f64>, time: f64, c: Curvature) -> Result<Self, GeometryError> {
        if !time.is_finite() || !space.iter().all(|x| x.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let p = Self { space, time };
        let deviation = math::abs(p.self_inner() + 1.0 / c.get());
        if deviation > MANIFOLD_TOL {
            return Err(GeometryError::OffManifold { deviation });
        }
        if time <= 0.0 {
            // Lower sheet: same constraint, wrong component.
            return Err(GeometryError::OffManifold { deviation: 2.0 * time });
        }
        Ok(p)
    }

    /// The origin `(0, 1/sqrt(c))`, the apex of the sheet.
    pub fn origin(dim: usize, c: Curvature) -> Self {
        Self {
            space: vec![0.0; dim],
            time: 1.0 / c.sqrt(),
        }
    }

    /// Lift a spatial vector onto the sheet by solving the constraint for the
    /// time coordinate. On-manifold by construction.
    pub fn from_space(space: Vec<f64>, c: Curvature) -> Self {
        let norm_sq: f64 = space.iter().map(|x| x * x).sum();
        Self {
            space,
            time: math::sqrt(1.0 / c.get() + norm_sq),
        }
    }

    #[inline]
    pub fn space(&self) -> &[f64] {
        &self.space
    }

    #[inline]
    pub fn time(&self) -> f64 {
        self.time
    }

    /// Spatial dimension `n` (the ambient dimension is `n + 1`).
    #[inline]
    pub fn dim(&self) -> usize {
        self.space.len()
    }

    fn self_inner(&self) -> f64 {
        -self.time * self.time + self.space.iter().map(|x| x * x).sum::<f64>()
    }

    #[cfg(debug_assertions)]
    pub(crate) fn debug_check(&self, c: Curvature) {
        let dev = math::abs(self.self_inner() + 1.0 / c.get());
        debug_assert!(
            dev <= 1e-6,
            "off-manifold point reached a hot path: deviation {dev:.3e}"
        );
    }

    #[cfg(not(debug_assertions))]
    pub(crate) fn debug_check(&self, _c: Curvature) {}
}

/// Lorentzian inner product of two points.
pub fn lorentz_inner(x: &LorentzPoint, y: &LorentzPoint) -> Result<f64, GeometryError> {
    if x.dim() != y.dim() {
        return Err(GeometryError::DimensionMismatch {
            left: x.dim(),
            right: y.dim(),
        });
    }
    Ok(inner_k(x.space(), x.time(), y.space(), y.time()))
}

/// Lorentzian inner product over raw `(n+1)`-vectors laid out as
/// `[space_0, ..., space_{n-1}, time]`.
pub fn lorentz_inner_raw(x: &[f64], y: &[f64]) -> Result<f64, GeometryError> {
    if x.len() != y.len() || x.is_empty() {
        return Err(GeometryError::DimensionMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let n = x.len() - 1;
    Ok(inner_k(&x[..n], x[n], &y[..n], y[n]))
}

/// Exponential map at the origin: projects a tangent vector onto the sheet.
///
/// `space = sinh(sqrt(c)||v||) / (sqrt(c)||v||) * v`, with the limit value `v`
/// as `||v|| -> 0`; `time` solves the manifold constraint.
pub fn exp_map_origin(v: &TangentVector, c: Curvature) -> LorentzPoint {
    let (space, time) = exp0_k(v.coords(), c.get());
    LorentzPoint { space, time }
}

/// Logarithmic map at the origin: inverse of [`exp_map_origin`].
///
/// The returned tangent has norm equal to the geodesic distance from the
/// origin to `x`.
pub fn log_map_origin(x: &LorentzPoint, c: Curvature) -> Result<TangentVector, GeometryError> {
    let deviation = math::abs(x.self_inner() + 1.0 / c.get());
    if deviation > MANIFOLD_TOL {
        return Err(GeometryError::OffManifold { deviation });
    }
    // Radial distance from the origin: -c<O,x>_L = sqrt(c) * x_time.
    let r = Scalar::acosh_clamped(c.sqrt() * x.time()) / c.sqrt();
    let space_norm = math::sqrt(x.space().iter().map(|s| s * s).sum());
    if space_norm == 0.0 {
        return Ok(TangentVector::zeros(x.dim()));
    }
    let scale = r / space_norm;
    Ok(TangentVector {
        coords: x.space().iter().map(|s| s * scale).collect(),
    })
}

/// Geodesic distance `(1/sqrt(c)) * acosh(-c <x,y>_L)`.
///
/// The `acosh` argument is clamped to `max(1, .)` so that round-off on
/// coincident points cannot produce NaN.
pub fn geodesic_distance(
    x: &LorentzPoint,
    y: &LorentzPoint,
    c: Curvature,
) -> Result<f64, GeometryError> {
    if x.dim() != y.dim() {
        return Err(GeometryError::DimensionMismatch {
            left: x.dim(),
            right: y.dim(),
        });
    }
    x.debug_check(c);
    y.debug_check(c);
    Ok(dist_k(x.space(), x.time(), y.space(), y.time(), c.get()))
}

/// Same-dimension fast path used by proxy search, mining, and evaluation.
pub(crate) fn distance_unchecked(x: &LorentzPoint, y: &LorentzPoint, c: Curvature) -> f64 {
    dist_k(x.space(), x.time(), y.space(), y.time(), c.get())
}

/// Closed-form Lorentzian centroid `mu = m / (sqrt(c) * sqrt(|<m,m>_L|))`
/// of `m = sum_i w_i x_i`.
///
/// `mu` minimizes the weighted squared Lorentzian distance
/// `sum_i w_i * (-2/c - 2<x_i, z>_L)` over on-manifold `z`.
pub fn lorentz_centroid(
    points: &[LorentzPoint],
    weights: &[f64],
    c: Curvature,
) -> Result<LorentzPoint, GeometryError> {
    if points.is_empty() {
        return Err(GeometryError::EmptyCentroid);
    }
    if points.len() != weights.len() {
        return Err(GeometryError::DimensionMismatch {
            left: points.len(),
            right: weights.len(),
        });
    }
    if !weights.iter().all(|w| w.is_finite() && *w >= 0.0) || weights.iter().sum::<f64>() <= 0.0 {
        return Err(GeometryError::InvalidWeights);
    }
    let dim = points[0].dim();
    for p in points {
        if p.dim() != dim {
            return Err(GeometryError::DimensionMismatch {
                left: dim,
                right: p.dim(),
            });
        }
        p.debug_check(c);
    }

    let views: Vec<(&[f64], f64)> = points.iter().map(|p| (p.space(), p.time())).collect();
    let (space, time) =
        centroid_k(&views, weights, c.get()).map_err(GeometryError::DegenerateCentroid)?;
    Ok(LorentzPoint { space, time })
}

/// Weighted squared-Lorentzian-distance objective minimized by the centroid.
pub fn centroid_objective(
    points: &[LorentzPoint],
    weights: &[f64],
    z: &LorentzPoint,
    c: Curvature,
) -> Result<f64, GeometryError> {
    let mut total = 0.0;
    for (p, w) in points.iter().zip(weights) {
        total += w * (-2.0 / c.get() - 2.0 * lorentz_inner(p, z)?);
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// Generic kernels: the single source of truth for both the f64 path above and
// the reverse-mode tape in `autodiff`.
// ---------------------------------------------------------------------------

pub(crate) fn inner_k<S: Scalar>(xs: &[S], xt: S, ys: &[S], yt: S) -> S {
    debug_assert_eq!(xs.len(), ys.len());
    let mut acc = -(xt * yt);
    for (a, b) in xs.iter().zip(ys) {
        acc = acc + *a * *b;
    }
    acc
}

/// Exponential map at the origin; returns `(space, time)`.
pub(crate) fn exp0_k<S: Scalar>(v: &[S], c: f64) -> (Vec<S>, S) {
    let sqrt_c = math::sqrt(c);
    let mut r2 = v[0] * v[0];
    for x in &v[1..] {
        r2 = r2 + *x * *x;
    }
    // factor = sinh(t)/t with t = sqrt(c)*||v||; near zero, 1 + t^2/6.
    // The Taylor branch is written in ||v||^2 so no gradient flows through
    // sqrt at the origin.
    let factor = if sqrt_c * math::sqrt(r2.value()) < SINHC_TAYLOR_CUTOFF {
        r2.mul_f64(c / 6.0).add_f64(1.0)
    } else {
        let t = r2.sqrt().mul_f64(sqrt_c);
        t.sinh() / t
    };
    let space: Vec<S> = v.iter().map(|x| *x * factor).collect();
    let mut s2 = space[0] * space[0];
    for x in &space[1..] {
        s2 = s2 + *x * *x;
    }
    let time = s2.add_f64(1.0 / c).sqrt();
    (space, time)
}

pub(crate) fn dist_k<S: Scalar>(xs: &[S], xt: S, ys: &[S], yt: S, c: f64) -> S {
    let u = inner_k(xs, xt, ys, yt).mul_f64(-c);
    u.acosh_clamped().mul_f64(1.0 / math::sqrt(c))
}

/// Weighted Lorentzian centroid; `Err(q)` reports a non-negative aggregate
/// inner product `q = <m,m>_L` (degenerate input).
pub(crate) fn centroid_k<S: Scalar>(
    points: &[(&[S], S)],
    weights: &[f64],
    c: f64,
) -> Result<(Vec<S>, S), f64> {
    let dim = points[0].0.len();
    let mut m_space: Vec<S> = points[0].0.iter().map(|x| x.mul_f64(weights[0])).collect();
    let mut m_time = points[0].1.mul_f64(weights[0]);
    for ((space, time), w) in points.iter().zip(weights).skip(1) {
        for (acc, x) in m_space.iter_mut().zip(space.iter()) {
            *acc = *acc + x.mul_f64(*w);
        }
        m_time = m_time + time.mul_f64(*w);
    }
    debug_assert_eq!(m_space.len(), dim);
    let q = inner_k(&m_space, m_time, &m_space, m_time);
    if q.value() >= 0.0 {
        return Err(q.value());
    }
    let denom = (-q).sqrt().mul_f64(math::sqrt(c));
    let space = m_space.iter().map(|x| *x / denom).collect();
    let time = m_time / denom;
    Ok((space, time))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(v: f64) -> Curvature {
        Curvature::new(v).unwrap()
    }

    fn tangent(coords: &[f64]) -> TangentVector {
        TangentVector::new(coords.to_vec()).unwrap()
    }

    fn random_tangent(rng: &mut ChaCha8Rng, dim: usize, max_norm: f64) -> TangentVector {
        let coords: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm: f64 = coords.iter().map(|x| x * x).sum::<f64>().sqrt();
        let target = rng.random_range(0.0..max_norm);
        let scale = if norm > 0.0 { target / norm } else { 0.0 };
        tangent(&coords.iter().map(|x| x * scale).collect::<Vec<_>>())
    }

    #[test]
    fn inner_at_origin_is_minus_inv_c() {
        // Eq. 2 forces <x,x>_L = -1/c; at c = 0.1 the origin is (0, sqrt(10)).
        let cv = c(0.1);
        let o = LorentzPoint::origin(2, cv);
        assert!((lorentz_inner(&o, &o).unwrap() + 10.0).abs() < 1e-12);
    }

    #[test]
    fn inner_orthogonal_space_parts() {
        let x = LorentzPoint {
            space: vec![1.0, 0.0],
            time: 2.5,
        };
        let y = LorentzPoint {
            space: vec![0.0, 1.0],
            time: 1.75,
        };
        assert_eq!(lorentz_inner(&x, &y).unwrap(), -2.5 * 1.75);
        assert_eq!(
            lorentz_inner(&x, &y).unwrap(),
            lorentz_inner(&y, &x).unwrap()
        );
    }

    #[test]
    fn inner_raw_layout_and_dim_mismatch() {
        let x = [1.0, 0.0, 2.5];
        let y = [0.0, 1.0, 1.75];
        assert_eq!(lorentz_inner_raw(&x, &y).unwrap(), -2.5 * 1.75);
        assert!(matches!(
            lorentz_inner_raw(&x, &y[..2]),
            Err(GeometryError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn exp_of_zero_is_origin() {
        let cv = c(0.1);
        let p = exp_map_origin(&TangentVector::zeros(3), cv);
        assert_eq!(p.space(), &[0.0, 0.0, 0.0]);
        assert!((p.time() - 10.0_f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn exp_is_radial_isometry() {
        // d(O, exp(v)) = ||v||, an analytic identity of the origin exp map.
        let cv = c(1.0);
        let v = tangent(&[2.0, 0.0]);
        let p = exp_map_origin(&v, cv);
        let o = LorentzPoint::origin(2, cv);
        assert!((geodesic_distance(&o, &p, cv).unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn exp_lands_on_manifold() {
        let cv = c(0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let v = random_tangent(&mut rng, 4, 10.0);
            let p = exp_map_origin(&v, cv);
            let inner = lorentz_inner(&p, &p).unwrap();
            assert!((inner + 10.0).abs() < 1e-9, "constraint violated: {inner}");
        }
    }

    #[test]
    fn log_of_origin_is_zero() {
        let cv = c(0.3);
        let o = LorentzPoint::origin(5, cv);
        assert_eq!(log_map_origin(&o, cv).unwrap().coords(), &[0.0; 5]);
    }

    #[test]
    fn log_rejects_off_manifold() {
        let cv = c(1.0);
        let bogus = LorentzPoint {
            space: vec![1.0, 1.0],
            time: 1.0,
        };
        assert!(matches!(
            log_map_origin(&bogus, cv),
            Err(GeometryError::OffManifold { .. })
        ));
    }

    #[test]
    fn exp_log_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for cval in [0.1, 0.5, 1.0] {
            let cv = c(cval);
            for _ in 0..50 {
                let v = random_tangent(&mut rng, 3, 8.0);
                let back = log_map_origin(&exp_map_origin(&v, cv), cv).unwrap();
                for (a, b) in v.coords().iter().zip(back.coords()) {
                    assert!((a - b).abs() < 1e-8, "roundtrip drift: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn log_norm_equals_distance_from_origin() {
        let cv = c(0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let v = random_tangent(&mut rng, 4, 6.0);
            let p = exp_map_origin(&v, cv);
            let o = LorentzPoint::origin(4, cv);
            let d = geodesic_distance(&o, &p, cv).unwrap();
            assert!((log_map_origin(&p, cv).unwrap().norm() - d).abs() < 1e-9);
        }
    }

    #[test]
    fn distance_zero_at_same_point() {
        let cv = c(0.1);
        let p = exp_map_origin(&tangent(&[0.4, -1.2, 0.3]), cv);
        assert_eq!(geodesic_distance(&p, &p, cv).unwrap(), 0.0);
    }

    #[test]
    fn distance_along_radial_geodesic_is_additive() {
        // exp(u) and exp(t*u/||u||) lie on one geodesic through the origin,
        // so their distance is |  ||u|| - t  |.
        let cv = c(0.37);
        let u = tangent(&[3.0, 4.0]); // ||u|| = 5
        let t = 1.25;
        let dir = tangent(&[3.0 / 5.0 * t, 4.0 / 5.0 * t]);
        let d = geodesic_distance(&exp_map_origin(&u, cv), &exp_map_origin(&dir, cv), cv).unwrap();
        assert!((d - (5.0 - t)).abs() < 1e-9);
    }

    #[test]
    fn distance_regression_oracle() {
        // Frozen from a 40-digit evaluation of the composed closed form
        // sqrt(10) * acosh(cosh^2(1/sqrt(10))) for c = 0.1, u=(1,0), v=(0,1).
        let cv = c(0.1);
        let x = exp_map_origin(&tangent(&[1.0, 0.0]), cv);
        let y = exp_map_origin(&tangent(&[0.0, 1.0]), cv);
        let d = geodesic_distance(&x, &y, cv).unwrap();
        assert!((d - 1.4257941884418082).abs() < 1e-12, "got {d}");
    }

    #[test]
    fn centroid_of_repeated_point_is_that_point() {
        let cv = c(0.1);
        let p = exp_map_origin(&tangent(&[0.7, -0.2]), cv);
        let mu = lorentz_centroid(&[p.clone(), p.clone()], &[1.0, 3.0], cv).unwrap();
        for (a, b) in mu.space().iter().zip(p.space()) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!((mu.time() - p.time()).abs() < 1e-9);
    }

    #[test]
    fn centroid_of_single_point() {
        let cv = c(1.0);
        let p = exp_map_origin(&tangent(&[1.5, 0.5, -0.5]), cv);
        let mu = lorentz_centroid(core::slice::from_ref(&p), &[2.0], cv).unwrap();
        assert!((mu.time() - p.time()).abs() < 1e-12);
    }

    #[test]
    fn centroid_stays_on_manifold() {
        let cv = c(0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..50 {
            let pts: Vec<LorentzPoint> = (0..4)
                .map(|_| exp_map_origin(&random_tangent(&mut rng, 3, 4.0), cv))
                .collect();
            let w: Vec<f64> = (0..4).map(|_| rng.random_range(0.1..2.0)).collect();
            let mu = lorentz_centroid(&pts, &w, cv).unwrap();
            let inner = lorentz_inner(&mu, &mu).unwrap();
            assert!((inner + 1.0 / 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn centroid_beats_random_perturbations() {
        // Perturbation oracle: the closed form must not lose to any nearby
        // on-manifold candidate under the squared-Lorentzian objective.
        let cv = c(0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let pts: Vec<LorentzPoint> = (0..3)
            .map(|_| exp_map_origin(&random_tangent(&mut rng, 3, 3.0), cv))
            .collect();
        let w = vec![1.0; 3];
        let mu = lorentz_centroid(&pts, &w, cv).unwrap();
        let at_mu = centroid_objective(&pts, &w, &mu, cv).unwrap();
        for _ in 0..1000 {
            let eps = rng.random_range(1e-4..0.5);
            let space: Vec<f64> = mu
                .space()
                .iter()
                .map(|x| x + rng.random_range(-eps..eps))
                .collect();
            let z = LorentzPoint::from_space(space, cv);
            let at_z = centroid_objective(&pts, &w, &z, cv).unwrap();
            assert!(at_mu <= at_z + 1e-12, "{at_mu} > {at_z}");
        }
    }

    #[test]
    fn centroid_input_validation() {
        let cv = c(1.0);
        let p = LorentzPoint::origin(2, cv);
        assert!(matches!(
            lorentz_centroid(&[], &[], cv),
            Err(GeometryError::EmptyCentroid)
        ));
        assert!(matches!(
            lorentz_centroid(core::slice::from_ref(&p), &[0.0], cv),
            Err(GeometryError::InvalidWeights)
        ));
        assert!(matches!(
            lorentz_centroid(core::slice::from_ref(&p), &[-1.0], cv),
            Err(GeometryError::InvalidWeights)
        ));
    }

    #[test]
    fn from_parts_validates() {
        let cv = c(0.1);
        let ok = LorentzPoint::from_parts(vec![0.0, 0.0], 10.0_f64.sqrt(), cv);
        assert!(ok.is_ok());
        assert!(matches!(
            LorentzPoint::from_parts(vec![0.0, 0.0], 3.0, cv),
            Err(GeometryError::OffManifold { .. })
        ));
        assert!(matches!(
            LorentzPoint::from_parts(vec![f64::NAN, 0.0], 3.0, cv),
            Err(GeometryError::NonFinite)
        ));
    }

    #[test]
    fn curvature_validation() {
        assert!(Curvature::new(0.0).is_err());
        assert!(Curvature::new(-1.0).is_err());
        assert!(Curvature::new(f64::INFINITY).is_err());
        assert!(Curvature::new(0.1).is_ok());
    }

    proptest! {
        #[test]
        fn prop_manifold_closure_and_isometry(
            coords in prop::collection::vec(-1.0f64..1.0, 2..6),
            scale in 0.0f64..20.0,
            cval in prop::sample::select(vec![0.1, 0.5, 1.0]),
        ) {
            let norm: f64 = coords.iter().map(|x| x * x).sum::<f64>().sqrt();
            let v = if norm > 0.0 {
                tangent(&coords.iter().map(|x| x * scale / norm).collect::<Vec<_>>())
            } else {
                TangentVector::zeros(coords.len())
            };
            let cv = c(cval);
            let p = exp_map_origin(&v, cv);
            let inner = lorentz_inner(&p, &p).unwrap();
            prop_assert!((inner + 1.0 / cval).abs() < 1e-9);
            let o = LorentzPoint::origin(v.dim(), cv);
            let d = geodesic_distance(&o, &p, cv).unwrap();
            prop_assert!((d - v.norm()).abs() < 1e-9);
        }

        #[test]
        fn prop_distance_symmetry_and_triangle(
            a in prop::collection::vec(-2.0f64..2.0, 3),
            b in prop::collection::vec(-2.0f64..2.0, 3),
            zc in prop::collection::vec(-2.0f64..2.0, 3),
        ) {
            let cv = c(0.1);
            let x = exp_map_origin(&tangent(&a), cv);
            let y = exp_map_origin(&tangent(&b), cv);
            let z = exp_map_origin(&tangent(&zc), cv);
            let dxy = geodesic_distance(&x, &y, cv).unwrap();
            let dyx = geodesic_distance(&y, &x, cv).unwrap();
            prop_assert!((dxy - dyx).abs() < 1e-12);
            let dxz = geodesic_distance(&x, &z, cv).unwrap();
            let dyz = geodesic_distance(&y, &z, cv).unwrap();
            prop_assert!(dxz <= dxy + dyz + 1e-9);
        }

        #[test]
        fn prop_euclidean_limit(
            a in prop::collection::vec(-1.0f64..1.0, 3),
            b in prop::collection::vec(-1.0f64..1.0, 3),
            scale in 0.0f64..5.0,
        ) {
            // As c -> 0 the geometry flattens and geodesic distance approaches
            // the Euclidean distance between the tangents.
            let cv = c(1e-6);
            let u = tangent(&a.iter().map(|x| x * scale).collect::<Vec<_>>());
            let v = tangent(&b.iter().map(|x| x * scale).collect::<Vec<_>>());
            let d_hyp = geodesic_distance(&exp_map_origin(&u, cv), &exp_map_origin(&v, cv), cv).unwrap();
            let d_euc: f64 = u.coords().iter().zip(v.coords())
                .map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
            let rel = (d_hyp - d_euc).abs() / d_euc.max(1e-6);
            prop_assert!(rel < 1e-3, "rel err {rel}");
        }
    }
}
