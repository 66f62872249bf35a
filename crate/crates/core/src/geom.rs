//! Riemannian primitives on the unit sphere `S^{n-1}` embedded in `R^n`.
//!
//! Points are unit vectors, tangent vectors live in the orthogonal
//! complement of their base point, and the metric is the ambient dot
//! product restricted to the tangent plane. All maps are closed-form:
//!
//! * distance `d(x, y) = arccos(<x, y>)`,
//! * `exp_x(v) = cos(|v|) x + sin(|v|) v/|v|`,
//! * parallel transport along the connecting geodesic in the
//!   dimension-free form `v - (<v, y> / (1 + <x, y>)) (x + y)`.
//!
//! Operations that would cross the cut locus (log/transport between
//! near-antipodal points) fail with [`CoreError::CutLocus`] instead of
//! returning noise.

use crate::error::{CoreError, Result};

/// Tolerance on `1 + <x, y>` below which a pair counts as antipodal.
pub const ANTIPODAL_TOL: f64 = 1e-8;

const UNIT_DRIFT_TOL: f64 = 1e-6;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// A point on `S^{n-1}`, renormalized to unit length on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SpherePoint {
    coords: Vec<f64>,
}

impl SpherePoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(CoreError::InvalidArgument(format!(
                "sphere points need n >= 2 coordinates, got {}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(CoreError::NonFinite("sphere point coordinates"));
        }
        let r = norm(&coords);
        if r < 1e-14 {
            return Err(CoreError::InvalidArgument(
                "cannot normalize a (near-)zero vector onto the sphere".into(),
            ));
        }
        let mut coords = coords;
        for c in coords.iter_mut() {
            *c /= r;
        }
        Ok(SpherePoint { coords })
    }

    /// The standard basis vector `e_axis` in `R^n`.
    pub fn standard(n: usize, axis: usize) -> Self {
        assert!(n >= 2 && axis < n);
        let mut coords = vec![0.0; n];
        coords[axis] = 1.0;
        SpherePoint { coords }
    }

    /// Renormalizes after internal arithmetic. Drift beyond tolerance is a bug.
    pub(crate) fn renormalized(mut coords: Vec<f64>) -> Self {
        let r = norm(&coords);
        debug_assert!(
            (r - 1.0).abs() < UNIT_DRIFT_TOL || r > 0.5,
            "norm drifted to {r} before renormalization"
        );
        for c in coords.iter_mut() {
            *c /= r;
        }
        SpherePoint { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dot(&self, other: &SpherePoint) -> f64 {
        dot(&self.coords, &other.coords)
    }

    pub fn antipode(&self) -> SpherePoint {
        SpherePoint {
            coords: self.coords.iter().map(|c| -c).collect(),
        }
    }
}

/// A tangent vector at a base point, orthogonal to it.
#[derive(Debug, Clone)]
pub struct TangentVector {
    base: SpherePoint,
    vec: Vec<f64>,
}

impl TangentVector {
    /// Wraps a vector already (numerically) tangent at `base`. The residual
    /// radial component is removed exactly; a large one is an error.
    pub fn new(base: SpherePoint, vec: Vec<f64>) -> Result<Self> {
        if vec.len() != base.dim() {
            return Err(CoreError::DimensionMismatch {
                left: base.dim(),
                right: vec.len(),
            });
        }
        let radial = dot(&vec, base.coords());
        if radial.abs() > 1e-9 * (1.0 + norm(&vec)) {
            return Err(CoreError::InvalidArgument(format!(
                "vector is not tangent at its base point (radial part {radial:.3e})"
            )));
        }
        Ok(Self::projected(base, vec))
    }

    fn projected(base: SpherePoint, mut vec: Vec<f64>) -> Self {
        let radial = dot(&vec, base.coords());
        for (v, b) in vec.iter_mut().zip(base.coords()) {
            *v -= radial * b;
        }
        TangentVector { base, vec }
    }

    pub fn zero(base: SpherePoint) -> Self {
        let n = base.dim();
        TangentVector {
            base,
            vec: vec![0.0; n],
        }
    }

    pub fn base(&self) -> &SpherePoint {
        &self.base
    }

    pub fn components(&self) -> &[f64] {
        &self.vec
    }

    pub fn norm(&self) -> f64 {
        norm(&self.vec)
    }

    pub fn dot(&self, other: &TangentVector) -> f64 {
        dot(&self.vec, &other.vec)
    }

    pub fn scaled(&self, factor: f64) -> TangentVector {
        TangentVector {
            base: self.base.clone(),
            vec: self.vec.iter().map(|v| factor * v).collect(),
        }
    }
}

fn check_same_dim(x: &SpherePoint, y: &SpherePoint) -> Result<()> {
    if x.dim() != y.dim() {
        return Err(CoreError::DimensionMismatch {
            left: x.dim(),
            right: y.dim(),
        });
    }
    Ok(())
}

/// Geodesic distance `arccos(<x, y>)`, in radians; the inner product is
/// clamped to `[-1, 1]` before `arccos`.
pub fn geodesic_distance(x: &SpherePoint, y: &SpherePoint) -> Result<f64> {
    check_same_dim(x, y)?;
    Ok(x.dot(y).clamp(-1.0, 1.0).acos())
}

/// Follows the geodesic from the base of `v` with initial velocity `v` for
/// unit time: `cos(|v|) x + sin(|v|) v/|v|`.
pub fn exp_map(v: &TangentVector) -> SpherePoint {
    let r = v.norm();
    if r < 1e-14 {
        return v.base().clone();
    }
    let (s, c) = r.sin_cos();
    let coords = v
        .base()
        .coords()
        .iter()
        .zip(v.components())
        .map(|(x, w)| c * x + s * w / r)
        .collect();
    SpherePoint::renormalized(coords)
}

/// Inverse of the exponential map: the tangent vector at `x` pointing at
/// `y` with length `d(x, y)`. Fails for (near-)antipodal pairs.
pub fn log_map(x: &SpherePoint, y: &SpherePoint) -> Result<TangentVector> {
    check_same_dim(x, y)?;
    let t = x.dot(y).clamp(-1.0, 1.0);
    let gap = 1.0 + t;
    if gap <= ANTIPODAL_TOL {
        return Err(CoreError::CutLocus { gap });
    }
    let d = t.acos();
    // w = y - t x is y's component orthogonal to x, with |w| = sin(d).
    let w: Vec<f64> = y
        .coords()
        .iter()
        .zip(x.coords())
        .map(|(yi, xi)| yi - t * xi)
        .collect();
    let wn = norm(&w);
    if wn < 1e-14 || d < 1e-14 {
        return Ok(TangentVector::zero(x.clone()));
    }
    let vec = w.iter().map(|wi| d * wi / wn).collect();
    Ok(TangentVector::projected(x.clone(), vec))
}

/// Orthogonal projection of an ambient vector onto the tangent plane at
/// `x`: `w - <w, x> x`.
pub fn tangent_project(x: &SpherePoint, w: &[f64]) -> Result<TangentVector> {
    if w.len() != x.dim() {
        return Err(CoreError::DimensionMismatch {
            left: x.dim(),
            right: w.len(),
        });
    }
    Ok(TangentVector::projected(x.clone(), w.to_vec()))
}

/// Parallel transport of `v` from its base `x` to `y` along the connecting
/// geodesic, in the dimension-free closed form
/// `v - (<v, y> / (1 + <x, y>)) (x + y)`.
///
/// Transport is an isometry of the tangent planes; vectors orthogonal to
/// the plane spanned by `x` and `y` are left untouched.
pub fn parallel_transport(v: &TangentVector, y: &SpherePoint) -> Result<TangentVector> {
    let x = v.base();
    check_same_dim(x, y)?;
    let gap = 1.0 + x.dot(y);
    if gap <= ANTIPODAL_TOL {
        return Err(CoreError::CutLocus { gap });
    }
    let vy = dot(v.components(), y.coords());
    let factor = vy / gap;
    let vec: Vec<f64> = v
        .components()
        .iter()
        .zip(x.coords().iter().zip(y.coords()))
        .map(|(vi, (xi, yi))| vi - factor * (xi + yi))
        .collect();
    let mut out = TangentVector::projected(y.clone(), vec);
    // The closed form amplifies rounding by ~1/gap close to the cut locus;
    // restore the norm exactly (transport is an isometry).
    let r = out.norm();
    if r > 0.0 {
        out = out.scaled(v.norm() / r);
    }
    Ok(out)
}

/// Ratio `d(exp_x(t v), exp_y(t Pi_yx v)) / d(x, y)` for a unit tangent
/// vector `v` at `x` transported to `y`.
///
/// Equals 1 for `t = 0` and identically 1 when `v` is parallel to
/// `log_x y` (the two geodesics share a great circle).
pub fn geodesic_divergence_ratio(
    x: &SpherePoint,
    y: &SpherePoint,
    v: &TangentVector,
    t: f64,
) -> Result<f64> {
    // acos(1 - eps) ~ sqrt(2 eps), so coincident points can report ~1e-8.
    let d0 = geodesic_distance(x, y)?;
    if d0 < 1e-6 {
        return Err(CoreError::ZeroDistance);
    }
    let vy = parallel_transport(v, y)?;
    let px = exp_map(&v.scaled(t));
    let py = exp_map(&vy.scaled(t));
    Ok(geodesic_distance(&px, &py)? / d0)
}

/// Seeded sampling of points and tangents, shared by property tests and
/// the Monte-Carlo check suites.
pub mod sample {
    use super::*;
    use rand::Rng;

    fn standard_normal(rng: &mut impl Rng) -> f64 {
        // Box-Muller.
        let u: f64 = rng.gen_range(1e-12..1.0);
        let v: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        (-2.0 * u.ln()).sqrt() * v.cos()
    }

    /// Uniform point on `S^{n-1}` (normalized Gaussian vector).
    pub fn uniform_point(rng: &mut impl Rng, n: usize) -> SpherePoint {
        loop {
            let coords: Vec<f64> = (0..n).map(|_| standard_normal(rng)).collect();
            if norm(&coords) > 1e-6 {
                return SpherePoint::new(coords).unwrap();
            }
        }
    }

    /// Uniform point with first coordinate > margin (open hemisphere).
    pub fn hemisphere_point(rng: &mut impl Rng, n: usize, margin: f64) -> SpherePoint {
        loop {
            let p = uniform_point(rng, n);
            if p.coords()[0] > margin {
                return p;
            }
        }
    }

    /// Uniform unit tangent vector at `x`.
    pub fn uniform_unit_tangent(rng: &mut impl Rng, x: &SpherePoint) -> TangentVector {
        loop {
            let w: Vec<f64> = (0..x.dim()).map(|_| standard_normal(rng)).collect();
            let t = tangent_project(x, &w).unwrap();
            let r = t.norm();
            if r > 1e-6 {
                return t.scaled(1.0 / r);
            }
        }
    }
}

/// Result of the seeded geodesic-divergence sweep.
#[derive(Debug, Clone)]
pub struct DivergenceReport {
    pub dim: usize,
    pub samples: usize,
    pub seed: u64,
    /// Largest observed `d(exp_x(tv), exp_y(t Pi v)) / d(x, y)`.
    pub max_ratio: f64,
    /// Largest deviation of the ratio from 1 when `v` is parallel to `log_x y`.
    pub parallel_case_max_dev: f64,
}

/// Samples random `(x, y, v, t)` configurations on `S^{n-1}` and records the
/// maximal divergence ratio, together with the parallel-velocity special
/// case in which the ratio must be exactly 1.
pub fn divergence_check(n: usize, samples: usize, seed: u64) -> Result<DivergenceReport> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut max_ratio: f64 = 0.0;
    let mut parallel_dev: f64 = 0.0;
    for k in 0..samples {
        let x = sample::uniform_point(&mut rng, n);
        let y = loop {
            let y = sample::uniform_point(&mut rng, n);
            let d = geodesic_distance(&x, &y)?;
            if d > 1e-3 && 1.0 + x.dot(&y) > 1e-6 {
                break y;
            }
        };
        let t = rng.gen_range(0.0..std::f64::consts::TAU);
        if k % 16 == 0 {
            // Parallel case: both curves run along one great circle.
            let l = log_map(&x, &y)?;
            let v = l.scaled(1.0 / l.norm());
            let r = geodesic_divergence_ratio(&x, &y, &v, t)?;
            parallel_dev = parallel_dev.max((r - 1.0).abs());
            max_ratio = max_ratio.max(r);
        } else {
            let v = sample::uniform_unit_tangent(&mut rng, &x);
            let r = geodesic_divergence_ratio(&x, &y, &v, t)?;
            max_ratio = max_ratio.max(r);
        }
    }
    Ok(DivergenceReport {
        dim: n,
        samples,
        seed,
        max_ratio,
        parallel_case_max_dev: parallel_dev,
    })
}
