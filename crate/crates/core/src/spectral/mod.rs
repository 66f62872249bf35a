//! Zonal-harmonic calculus on `S^{n-1}`.
//!
//! A zonal kernel `K(x, y) = K(<x, y>)` has a decomposition `K = sum_l
//! K_l Z_l` in the zonal harmonics `Z_l(t) = ((2l+n-2)/(n-2))
//! C_l^{(n-2)/2}(t)` (Chebyshev limit `Z_0 = 1`, `Z_l = 2 T_l` at `n = 2`),
//! and convolution acts on coefficient sequences as the elementwise product
//! `(K * f)_l = K_l f_l`. Coefficients here always refer to the `Z_l`
//! expansion of a function of `t = <p, x>`; the squared `L^2` norm of such
//! a function is `sum_l c_l^2 Z_l(1)`.

mod io;
mod quadrature;
pub mod reference;
#[cfg(test)]
mod tests;

pub use io::{read_coeffs, read_coeffs_from, write_coeffs, write_coeffs_to};
pub use quadrature::QuadratureGrid;

use crate::error::{CoreError, Result};

/// Hard cap on truncation degrees; the forward Gegenbauer recursion is
/// exercised and tested only in this range.
pub const MAX_DEGREE: usize = 256;

/// Clamp threshold for spectra of genuinely PSD kernels contaminated by
/// quadrature round-off.
pub const PSD_CLAMP: f64 = -1e-12;

/// Gegenbauer polynomial `C_l^lambda(t)` by the three-term recursion
/// `m C_m = 2(lambda+m-1) t C_{m-1} - (2 lambda + m - 2) C_{m-2}`,
/// `C_0 = 1`, `C_1 = 2 lambda t`.
pub fn gegenbauer_eval(lambda: f64, l: usize, t: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(CoreError::InvalidArgument(format!(
            "Gegenbauer parameter must be positive, got {lambda}; use zonal_harmonic_eval for n = 2"
        )));
    }
    if l == 0 {
        return Ok(1.0);
    }
    let mut prev = 1.0;
    let mut cur = 2.0 * lambda * t;
    for m in 2..=l {
        let mf = m as f64;
        let next = (2.0 * (lambda + mf - 1.0) * t * cur - (2.0 * lambda + mf - 2.0) * prev) / mf;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

fn chebyshev_t(l: usize, t: f64) -> f64 {
    if l == 0 {
        return 1.0;
    }
    let mut prev = 1.0;
    let mut cur = t;
    for _ in 2..=l {
        let next = 2.0 * t * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Zonal harmonic `Z_l(t)`: the reproducing kernel of the degree-`l`
/// harmonic subspace evaluated at inner product `t`.
///
/// For `n >= 3` this is `((2l+n-2)/(n-2)) C_l^{(n-2)/2}(t)`; at `n = 2`
/// the removable limit is `Z_0 = 1`, `Z_l(cos a) = 2 cos(l a)`.
pub fn zonal_harmonic_eval(n: usize, l: usize, t: f64) -> f64 {
    assert!(n >= 2, "sphere dimension parameter must be >= 2");
    if n == 2 {
        if l == 0 {
            1.0
        } else {
            2.0 * chebyshev_t(l, t)
        }
    } else {
        let lambda = (n as f64 - 2.0) / 2.0;
        let scale = (2.0 * l as f64 + n as f64 - 2.0) / (n as f64 - 2.0);
        scale * gegenbauer_eval(lambda, l, t).expect("lambda > 0")
    }
}

/// `Z_l(1)`, the squared `L^2` norm of `Z_l(<p, .>)` and the dimension of
/// the degree-`l` harmonic subspace.
pub fn zonal_norm_sq(n: usize, l: usize) -> f64 {
    assert!(n >= 2);
    if l == 0 {
        return 1.0;
    }
    if n == 2 {
        return 2.0;
    }
    // C_l^lambda(1) = prod_{j=1..l} (2 lambda + j - 1)/j
    let lambda = (n as f64 - 2.0) / 2.0;
    let mut c = 1.0;
    for j in 1..=l {
        c *= (2.0 * lambda + j as f64 - 1.0) / j as f64;
    }
    (2.0 * l as f64 + n as f64 - 2.0) / (n as f64 - 2.0) * c
}

/// Laplace–Beltrami eigenvalue on the degree-`l` harmonics: `-l(n-2+l)`.
pub fn laplacian_eigenvalue(n: usize, l: usize) -> f64 {
    let lf = l as f64;
    -(lf * (n as f64 - 2.0 + lf))
}

/// All `Z_l(t)` for `l = 0..=l_max` in one recursion pass.
pub fn zonal_basis_row(n: usize, l_max: usize, t: f64) -> Vec<f64> {
    assert!(n >= 2);
    let mut out = Vec::with_capacity(l_max + 1);
    if n == 2 {
        let mut prev = 1.0; // T_0
        let mut cur = t; // T_1
        out.push(1.0);
        if l_max >= 1 {
            out.push(2.0 * cur);
        }
        for _ in 2..=l_max {
            let next = 2.0 * t * cur - prev;
            prev = cur;
            cur = next;
            out.push(2.0 * cur);
        }
    } else {
        let nf = n as f64;
        let lambda = (nf - 2.0) / 2.0;
        let mut prev = 1.0; // C_0
        let mut cur = 2.0 * lambda * t; // C_1
        out.push(1.0);
        if l_max >= 1 {
            out.push((2.0 + nf - 2.0) / (nf - 2.0) * cur);
        }
        for m in 2..=l_max {
            let mf = m as f64;
            let next =
                (2.0 * (lambda + mf - 1.0) * t * cur - (2.0 * lambda + mf - 2.0) * prev) / mf;
            prev = cur;
            cur = next;
            out.push((2.0 * mf + nf - 2.0) / (nf - 2.0) * cur);
        }
    }
    out
}

/// All derivatives `Z_l'(t)` for `l = 0..=l_max`, via
/// `Z_l'(t) = (2l+n-2) C_{l-1}^{n/2}(t)` (valid for every `n >= 2`).
pub fn zonal_basis_deriv_row(n: usize, l_max: usize, t: f64) -> Vec<f64> {
    assert!(n >= 2);
    let nf = n as f64;
    let lambda = nf / 2.0;
    let mut out = Vec::with_capacity(l_max + 1);
    out.push(0.0);
    if l_max == 0 {
        return out;
    }
    let mut prev = 1.0; // C_0^{n/2}
    let mut cur = 2.0 * lambda * t; // C_1^{n/2}
    out.push((2.0 + nf - 2.0) * prev);
    if l_max >= 2 {
        out.push((4.0 + nf - 2.0) * cur);
    }
    for m in 2..=l_max.saturating_sub(1) {
        let mf = m as f64;
        let next = (2.0 * (lambda + mf - 1.0) * t * cur - (2.0 * lambda + mf - 2.0) * prev) / mf;
        prev = cur;
        cur = next;
        out.push((2.0 * (mf + 1.0) + nf - 2.0) * cur);
    }
    out
}

/// Truncated spectral identity of a zonal kernel or zonal function: the
/// sphere dimension parameter `n` and coefficients against `Z_0..Z_L`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZonalCoefficients {
    dim: usize,
    coeffs: Vec<f64>,
}

impl ZonalCoefficients {
    pub fn new(dim: usize, coeffs: Vec<f64>) -> Result<Self> {
        if dim < 2 {
            return Err(CoreError::InvalidArgument(format!(
                "sphere dimension parameter must be >= 2, got {dim}"
            )));
        }
        if coeffs.is_empty() {
            return Err(CoreError::InvalidArgument(
                "coefficient sequence must contain at least degree 0".into(),
            ));
        }
        if coeffs.len() > MAX_DEGREE + 1 {
            return Err(CoreError::ParameterRange(format!(
                "truncation degree {} exceeds the supported cap {}",
                coeffs.len() - 1,
                MAX_DEGREE
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(CoreError::NonFinite("zonal coefficients"));
        }
        Ok(ZonalCoefficients { dim, coeffs })
    }

    /// The constant kernel `K = 1` (identity for the energy of uniform states).
    pub fn constant(dim: usize, l_max: usize) -> Self {
        let mut coeffs = vec![0.0; l_max + 1];
        coeffs[0] = 1.0;
        ZonalCoefficients { dim, coeffs }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn l_max(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Coefficient at degree `l` (zero beyond the truncation).
    pub fn coeff(&self, l: usize) -> f64 {
        self.coeffs.get(l).copied().unwrap_or(0.0)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn map(&self, f: impl Fn(usize, f64) -> f64) -> ZonalCoefficients {
        ZonalCoefficients {
            dim: self.dim,
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(l, &c)| f(l, c))
                .collect(),
        }
    }

    /// Whether the sequence qualifies as a probability kernel: nonnegative
    /// spectrum (up to the PSD clamp) and unit mass `c_0 = 1`.
    pub fn is_probability_kernel(&self) -> bool {
        (self.coeffs[0] - 1.0).abs() <= 1e-10 && self.coeffs.iter().all(|&c| c >= PSD_CLAMP)
    }
}

fn project_values(grid: &QuadratureGrid, values: &[f64], l_max: usize) -> Result<ZonalCoefficients> {
    if l_max > MAX_DEGREE {
        return Err(CoreError::ParameterRange(format!(
            "degree {l_max} exceeds the supported cap {MAX_DEGREE}"
        )));
    }
    if grid.len() < l_max + 4 {
        return Err(CoreError::InvalidArgument(format!(
            "quadrature with {} nodes is too small for degree {} (need >= {})",
            grid.len(),
            l_max,
            l_max + 4
        )));
    }
    let n = grid.dim();
    let mut sums = vec![0.0; l_max + 1];
    for ((&t, &w), &v) in grid.nodes().iter().zip(grid.weights()).zip(values) {
        if !v.is_finite() {
            return Err(CoreError::NonFinite("kernel values at quadrature nodes"));
        }
        let row = zonal_basis_row(n, l_max, t);
        for (s, z) in sums.iter_mut().zip(&row) {
            *s += w * v * z;
        }
    }
    for (l, s) in sums.iter_mut().enumerate() {
        *s /= zonal_norm_sq(n, l);
    }
    ZonalCoefficients::new(n, sums)
}

/// Spectral projection of a pointwise kernel: `K_l = (1/Z_l(1)) sum_i w_i
/// K(t_i) Z_l(t_i)`.
pub fn decompose_kernel(
    kernel: impl Fn(f64) -> f64,
    grid: &QuadratureGrid,
    l_max: usize,
) -> Result<ZonalCoefficients> {
    let values: Vec<f64> = grid.nodes().iter().map(|&t| kernel(t)).collect();
    project_values(grid, &values, l_max)
}

/// Pointwise synthesis `sum_l c_l Z_l(t)`.
pub fn reconstruct_kernel(c: &ZonalCoefficients, t: f64) -> f64 {
    let row = zonal_basis_row(c.dim, c.l_max(), t);
    c.coeffs.iter().zip(&row).map(|(a, z)| a * z).sum()
}

/// Pointwise synthesis of the derivative `sum_l c_l Z_l'(t)`.
pub fn reconstruct_kernel_deriv(c: &ZonalCoefficients, t: f64) -> f64 {
    let row = zonal_basis_deriv_row(c.dim, c.l_max(), t);
    c.coeffs.iter().zip(&row).map(|(a, z)| a * z).sum()
}

/// Spectral convolution: elementwise coefficient product, truncated to the
/// shorter sequence.
pub fn convolve(kernel: &ZonalCoefficients, f: &ZonalCoefficients) -> Result<ZonalCoefficients> {
    if kernel.dim != f.dim {
        return Err(CoreError::DimensionMismatch {
            left: kernel.dim,
            right: f.dim,
        });
    }
    let len = kernel.coeffs.len().min(f.coeffs.len());
    let coeffs = (0..len).map(|l| kernel.coeffs[l] * f.coeffs[l]).collect();
    ZonalCoefficients::new(kernel.dim, coeffs)
}

/// Convolution square root: elementwise square root of the spectrum.
/// Small negative round-off (above the PSD clamp) is flushed to zero;
/// anything below it is a genuine PSD violation.
pub fn sqrt_kernel(v: &ZonalCoefficients) -> Result<ZonalCoefficients> {
    let mut coeffs = Vec::with_capacity(v.coeffs.len());
    for (l, &c) in v.coeffs.iter().enumerate() {
        if c < PSD_CLAMP {
            return Err(CoreError::NotPositiveSemidefinite { index: l, value: c });
        }
        coeffs.push(c.max(0.0).sqrt());
    }
    ZonalCoefficients::new(v.dim, coeffs)
}

/// Heat semigroup in coefficient form: `c_l -> exp(-s l (n-2+l)) c_l`.
pub fn heat_semigroup_apply(f: &ZonalCoefficients, s: f64) -> Result<ZonalCoefficients> {
    if !(s >= 0.0) {
        return Err(CoreError::InvalidArgument(format!(
            "heat semigroup time must be >= 0, got {s}"
        )));
    }
    Ok(f.map(|l, c| (s * laplacian_eigenvalue(f.dim, l)).exp() * c))
}

/// Both routes to the Dirichlet energy of the smoothed function
/// `sqrt_kernel(V) * u`.
///
/// The spectral route is `-sum_l lambda_l V_l u_l^2 Z_l(1)`; the quadrature
/// route differentiates the reconstructed smoothed function in the polar
/// angle and integrates `F'(t)^2 (1 - t^2)` on the grid.
pub fn dirichlet_identity_check(
    u: &ZonalCoefficients,
    v: &ZonalCoefficients,
    grid: &QuadratureGrid,
) -> Result<(f64, f64)> {
    if u.dim != v.dim || u.dim != grid.dim() {
        return Err(CoreError::DimensionMismatch {
            left: u.dim,
            right: v.dim.max(grid.dim()),
        });
    }
    let n = u.dim;
    let lhs: f64 = (0..=u.l_max())
        .map(|l| -laplacian_eigenvalue(n, l) * v.coeff(l) * u.coeff(l).powi(2) * zonal_norm_sq(n, l))
        .sum();
    let smoothed = convolve(&sqrt_kernel(v)?, u)?;
    let rhs = grid.integrate(|t| {
        let d = reconstruct_kernel_deriv(&smoothed, t);
        d * d * (1.0 - t * t)
    });
    Ok((lhs, rhs))
}

/// `L^2` distance between `u` and its smoothing `sqrt_kernel(V) * u`,
/// computed in coefficients.
pub fn delta_approx_error(u: &ZonalCoefficients, v: &ZonalCoefficients) -> Result<f64> {
    if u.dim != v.dim {
        return Err(CoreError::DimensionMismatch {
            left: u.dim,
            right: v.dim,
        });
    }
    let s = sqrt_kernel(v)?;
    let total: f64 = (0..=u.l_max())
        .map(|l| {
            let gap = 1.0 - s.coeff(l);
            gap * gap * u.coeff(l).powi(2) * zonal_norm_sq(u.dim, l)
        })
        .sum();
    Ok(total.sqrt())
}

/// Minimum of a reconstructed kernel over a uniform `t`-sample with
/// endpoints included.
pub fn min_reconstruction(c: &ZonalCoefficients, samples: usize) -> f64 {
    let m = samples.max(2);
    let mut min = f64::INFINITY;
    for i in 0..m {
        let t = -1.0 + 2.0 * i as f64 / (m - 1) as f64;
        min = min.min(reconstruct_kernel(c, t));
    }
    min
}

/// Minimum of the reconstructed convolution square root over a uniform
/// `t`-sample (endpoints included). The caller decides pass/fail.
pub fn check_sqrt_positivity(v: &ZonalCoefficients, samples: usize) -> Result<f64> {
    Ok(min_reconstruction(&sqrt_kernel(v)?, samples))
}

/// A zonal function sampled on a quadrature grid, optionally paired with
/// its coefficient identity.
#[derive(Debug, Clone)]
pub struct ZonalFunction {
    grid: QuadratureGrid,
    values: Vec<f64>,
    coeffs: Option<ZonalCoefficients>,
}

impl ZonalFunction {
    pub fn from_fn(grid: QuadratureGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().iter().map(|&t| f(t)).collect();
        ZonalFunction {
            grid,
            values,
            coeffs: None,
        }
    }

    pub fn from_coeffs(grid: QuadratureGrid, coeffs: ZonalCoefficients) -> Result<Self> {
        if grid.dim() != coeffs.dim() {
            return Err(CoreError::DimensionMismatch {
                left: grid.dim(),
                right: coeffs.dim(),
            });
        }
        let values = grid
            .nodes()
            .iter()
            .map(|&t| reconstruct_kernel(&coeffs, t))
            .collect();
        Ok(ZonalFunction {
            grid,
            values,
            coeffs: Some(coeffs),
        })
    }

    pub fn grid(&self) -> &QuadratureGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn coeffs(&self) -> Option<&ZonalCoefficients> {
        self.coeffs.as_ref()
    }

    /// Projects the sampled values onto degrees `0..=l_max` and caches them.
    pub fn decompose(&mut self, l_max: usize) -> Result<&ZonalCoefficients> {
        if self.coeffs.as_ref().map(|c| c.l_max()) != Some(l_max) {
            self.coeffs = Some(project_values(&self.grid, &self.values, l_max)?);
        }
        Ok(self.coeffs.as_ref().unwrap())
    }

    /// Largest gap between the sampled values and the reconstruction of the
    /// cached coefficients, if any.
    pub fn consistency_error(&self) -> Option<f64> {
        self.coeffs.as_ref().map(|c| {
            self.grid
                .nodes()
                .iter()
                .zip(&self.values)
                .map(|(&t, &v)| (v - reconstruct_kernel(c, t)).abs())
                .fold(0.0f64, f64::max)
        })
    }
}

/// Report of [`uniform_approx_error`].
#[derive(Debug, Clone, Copy)]
pub struct UniformApproxReport {
    /// `max_i |u(t_i) - (sqrt_kernel(V) * u)(t_i)|` over the grid nodes.
    pub sup_error: f64,
    /// Whether the reconstructed square root stayed above `-1e-6` on a
    /// dense sample; a failure makes the sup-norm bound unreliable.
    pub sqrt_positivity_ok: bool,
}

/// Sup-norm distance between `u` and its smoothing across the grid.
pub fn uniform_approx_error(
    u: &mut ZonalFunction,
    v: &ZonalCoefficients,
) -> Result<UniformApproxReport> {
    let positivity = check_sqrt_positivity(v, 2048)?;
    let l_max = v.l_max();
    let coeffs = u.decompose(l_max)?.clone();
    let smoothed = convolve(&sqrt_kernel(v)?, &coeffs)?;
    let sup_error = u
        .grid
        .nodes()
        .iter()
        .zip(u.values())
        .map(|(&t, &uv)| (uv - reconstruct_kernel(&smoothed, t)).abs())
        .fold(0.0f64, f64::max);
    Ok(UniformApproxReport {
        sup_error,
        sqrt_positivity_ok: positivity >= -1e-6,
    })
}

/// Admissibility flags for one member of a kernel family.
#[derive(Debug, Clone)]
pub struct EpsAdmissibility {
    pub eps: f64,
    /// All coefficients at or above the PSD clamp.
    pub nonnegative: bool,
    /// `|c_0 - 1| <= 1e-10`.
    pub normalized: bool,
    pub max_coeff: f64,
    /// `max_coeff` within the uniform bound supplied to the check.
    pub bounded: bool,
    /// `sum_{l <= L} l^n c_l` at this truncation.
    pub weighted_tail: f64,
    /// Log-linear fit of `l^n c_l` over the upper half of the degree range
    /// has negative slope (geometric-decay proxy for summability).
    pub tail_decaying: bool,
}

impl EpsAdmissibility {
    pub fn pass(&self) -> bool {
        self.nonnegative && self.normalized && self.bounded && self.tail_decaying
    }
}

/// Family-level admissibility report.
#[derive(Debug, Clone)]
pub struct AdmissibilityReport {
    pub uniform_bound: f64,
    pub per_eps: Vec<EpsAdmissibility>,
    /// Each fixed degree's coefficient approaches 1 monotonically as the
    /// scale decreases through the supplied list.
    pub coeffs_approach_one: bool,
}

impl AdmissibilityReport {
    pub fn all_pass(&self) -> bool {
        self.coeffs_approach_one && self.per_eps.iter().all(|e| e.pass())
    }
}

/// Checks the localization assumptions for a kernel family over a list of
/// scales: nonnegative normalized spectra, a uniform coefficient bound,
/// a decaying weighted tail, and per-degree monotone approach to 1.
pub fn check_admissibility(
    family: impl Fn(f64) -> Result<ZonalCoefficients>,
    eps_list: &[f64],
    l_max: usize,
    uniform_bound: f64,
) -> Result<AdmissibilityReport> {
    if eps_list.is_empty() {
        return Err(CoreError::InvalidArgument("empty scale list".into()));
    }
    let mut order: Vec<f64> = eps_list.to_vec();
    order.sort_by(|a, b| b.partial_cmp(a).unwrap());

    let mut per_eps = Vec::with_capacity(order.len());
    let mut spectra = Vec::with_capacity(order.len());
    for &eps in &order {
        let c = family(eps)?;
        if c.l_max() < l_max {
            return Err(CoreError::InvalidArgument(format!(
                "family produced degree {} below the requested {l_max}",
                c.l_max()
            )));
        }
        let n = c.dim();
        let nonnegative = c.coeffs().iter().all(|&x| x >= PSD_CLAMP);
        let normalized = (c.coeff(0) - 1.0).abs() <= 1e-10;
        let max_coeff = c.coeffs().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let weighted: Vec<f64> = (0..=l_max)
            .map(|l| (l as f64).powi(n as i32) * c.coeff(l))
            .collect();
        let weighted_tail: f64 = weighted.iter().sum();

        // Least-squares slope of ln(l^n c_l) over the upper half of the
        // degree range; underflowed coefficients count as decay.
        let lo = (l_max / 2).max(1);
        let pts: Vec<(f64, f64)> = (lo..=l_max)
            .filter(|&l| weighted[l] > 0.0)
            .map(|l| (l as f64, weighted[l].ln()))
            .collect();
        let tail_decaying = if pts.len() < 3 {
            true // everything underflowed: decayed below representable range
        } else {
            let m = pts.len() as f64;
            let sx: f64 = pts.iter().map(|p| p.0).sum();
            let sy: f64 = pts.iter().map(|p| p.1).sum();
            let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
            let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
            let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
            slope < 0.0
        };

        per_eps.push(EpsAdmissibility {
            eps,
            nonnegative,
            normalized,
            max_coeff,
            bounded: max_coeff <= uniform_bound + 1e-12,
            weighted_tail,
            tail_decaying,
        });
        spectra.push(c);
    }

    let mut coeffs_approach_one = true;
    if spectra.len() >= 2 {
        for l in 0..=l_max {
            let seq: Vec<f64> = spectra.iter().map(|c| c.coeff(l)).collect();
            let monotone = seq.windows(2).all(|w| w[1] >= w[0] - 1e-12);
            let closer = (seq[seq.len() - 1] - 1.0).abs() <= (seq[0] - 1.0).abs() + 1e-12;
            if !(monotone && closer) {
                coeffs_approach_one = false;
                break;
            }
        }
    }

    Ok(AdmissibilityReport {
        uniform_bound,
        per_eps,
        coeffs_approach_one,
    })
}
