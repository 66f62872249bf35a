//! Discretization shared by the PDE solvers.
//!
//! Densities are expanded in a finite family of eigenmodes of the
//! Laplace–Beltrami operator sampled on a polar-angle grid:
//!
//! * `n = 2`: the full Fourier basis `{1, 2 cos(l a), 2 sin(l a)}` on a
//!   uniform angle grid (trapezoid weights are exact for trigonometric
//!   polynomials below the grid size);
//! * `n >= 3`: the zonal harmonics `Z_l(cos a)` on a Gauss–Jacobi grid in
//!   `t = cos a` (zonal kernels preserve zonal symmetry, so zonally
//!   symmetric data stays in this subspace).
//!
//! Every mode carries the degree `l` it belongs to, so zonal kernels act
//! as multipliers `c_j -> K_{l(j)} c_j` in either picture. Squared `L^2`
//! norms of modes equal `Z_l(1)`, making coefficient arithmetic identical
//! across dimensions.

use crate::error::{CoreError, Result};
use crate::spectral::{
    laplacian_eigenvalue, zonal_basis_deriv_row, zonal_basis_row, zonal_norm_sq, QuadratureGrid,
    ZonalCoefficients, MAX_DEGREE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeKind {
    Constant,
    Cos,
    Sin,
    Zonal,
}

#[derive(Debug, Clone)]
pub struct BasisMode {
    /// Harmonic degree: selects the kernel multiplier and the Laplace
    /// eigenvalue for this mode.
    pub degree: usize,
    pub kind: ModeKind,
    /// Squared `L^2(sigma)` norm of the mode.
    pub norm_sq: f64,
    /// Mode values on the grid.
    values: Vec<f64>,
    /// Mode derivatives with respect to the polar angle on the grid.
    derivs: Vec<f64>,
}

impl BasisMode {
    /// Mode value at an arbitrary polar angle.
    pub fn eval(&self, n: usize, theta: f64) -> f64 {
        let lf = self.degree as f64;
        match self.kind {
            ModeKind::Constant => 1.0,
            ModeKind::Cos => 2.0 * (lf * theta).cos(),
            ModeKind::Sin => 2.0 * (lf * theta).sin(),
            ModeKind::Zonal => crate::spectral::zonal_harmonic_eval(n, self.degree, theta.cos()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SphericalBasis {
    n: usize,
    l_max: usize,
    /// Polar angles of the grid nodes.
    thetas: Vec<f64>,
    /// Quadrature weights against the uniform probability measure.
    weights: Vec<f64>,
    modes: Vec<BasisMode>,
}

impl SphericalBasis {
    /// Full Fourier basis on the circle. The grid is enlarged to at least
    /// `3 l_max + 1` points so that the cubic products appearing in the
    /// weak-form transport term are integrated exactly.
    pub fn circle(l_max: usize, min_grid: usize) -> Result<Self> {
        if l_max == 0 || l_max > MAX_DEGREE {
            return Err(CoreError::ParameterRange(format!(
                "degree {l_max} outside supported range 1..={MAX_DEGREE}"
            )));
        }
        let m = min_grid.max(3 * l_max + 1);
        let thetas: Vec<f64> = (0..m)
            .map(|i| std::f64::consts::TAU * i as f64 / m as f64)
            .collect();
        let weights = vec![1.0 / m as f64; m];

        let mut modes = Vec::with_capacity(2 * l_max + 1);
        modes.push(BasisMode {
            degree: 0,
            kind: ModeKind::Constant,
            norm_sq: 1.0,
            values: vec![1.0; m],
            derivs: vec![0.0; m],
        });
        for l in 1..=l_max {
            let lf = l as f64;
            modes.push(BasisMode {
                degree: l,
                kind: ModeKind::Cos,
                norm_sq: 2.0,
                values: thetas.iter().map(|&a| 2.0 * (lf * a).cos()).collect(),
                derivs: thetas.iter().map(|&a| -2.0 * lf * (lf * a).sin()).collect(),
            });
            modes.push(BasisMode {
                degree: l,
                kind: ModeKind::Sin,
                norm_sq: 2.0,
                values: thetas.iter().map(|&a| 2.0 * (lf * a).sin()).collect(),
                derivs: thetas.iter().map(|&a| 2.0 * lf * (lf * a).cos()).collect(),
            });
        }
        Ok(SphericalBasis {
            n: 2,
            l_max,
            thetas,
            weights,
            modes,
        })
    }

    /// Zonal basis for `n >= 3` on a Gauss–Jacobi grid. Gaussian exactness
    /// up to degree `2m - 1` already covers the cubic weak-form products
    /// whenever `m >= 2 l_max + 8`.
    pub fn zonal(n: usize, l_max: usize, grid_size: usize) -> Result<Self> {
        if n < 3 {
            return Err(CoreError::InvalidArgument(
                "zonal basis needs n >= 3; use SphericalBasis::circle for n = 2".into(),
            ));
        }
        if l_max == 0 || l_max > MAX_DEGREE {
            return Err(CoreError::ParameterRange(format!(
                "degree {l_max} outside supported range 1..={MAX_DEGREE}"
            )));
        }
        let m = grid_size.max(2 * l_max + 8);
        let quad = QuadratureGrid::gauss_jacobi(n, m)?;
        let thetas: Vec<f64> = quad.nodes().iter().map(|&t| t.acos()).collect();
        let weights = quad.weights().to_vec();

        let mut values = vec![Vec::with_capacity(m); l_max + 1];
        let mut derivs = vec![Vec::with_capacity(m); l_max + 1];
        for &t in quad.nodes() {
            let row = zonal_basis_row(n, l_max, t);
            let drow = zonal_basis_deriv_row(n, l_max, t);
            let sin_theta = (1.0 - t * t).max(0.0).sqrt();
            for l in 0..=l_max {
                values[l].push(row[l]);
                // d/d(theta) Z_l(cos theta) = -sin(theta) Z_l'(cos theta)
                derivs[l].push(-sin_theta * drow[l]);
            }
        }
        let modes = values
            .into_iter()
            .zip(derivs)
            .enumerate()
            .map(|(l, (values, derivs))| BasisMode {
                degree: l,
                kind: ModeKind::Zonal,
                norm_sq: zonal_norm_sq(n, l),
                values,
                derivs,
            })
            .collect();
        Ok(SphericalBasis {
            n,
            l_max,
            thetas,
            weights,
            modes,
        })
    }

    /// Dispatches on the dimension: full Fourier at `n = 2`, zonal above.
    pub fn for_dimension(n: usize, l_max: usize, grid_size: usize) -> Result<Self> {
        if n == 2 {
            Self::circle(l_max, grid_size)
        } else {
            Self::zonal(n, l_max, grid_size)
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn grid_len(&self) -> usize {
        self.thetas.len()
    }

    pub fn num_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn modes(&self) -> &[BasisMode] {
        &self.modes
    }

    /// Quadrature of grid values against the uniform probability measure.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        values
            .iter()
            .zip(&self.weights)
            .map(|(&v, &w)| v * w)
            .sum()
    }

    /// Projection of grid values onto the mode coefficients.
    pub fn analyze(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.grid_len());
        self.modes
            .iter()
            .map(|mode| {
                let s: f64 = values
                    .iter()
                    .zip(&mode.values)
                    .zip(&self.weights)
                    .map(|((&v, &phi), &w)| w * v * phi)
                    .sum();
                s / mode.norm_sq
            })
            .collect()
    }

    /// Evaluation of a coefficient vector on the grid.
    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.num_modes());
        let mut out = vec![0.0; self.grid_len()];
        for (c, mode) in coeffs.iter().zip(&self.modes) {
            if *c == 0.0 {
                continue;
            }
            for (o, &phi) in out.iter_mut().zip(&mode.values) {
                *o += c * phi;
            }
        }
        out
    }

    /// Evaluation of the polar-angle derivative of a coefficient vector.
    pub fn synthesize_deriv(&self, coeffs: &[f64]) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.num_modes());
        let mut out = vec![0.0; self.grid_len()];
        for (c, mode) in coeffs.iter().zip(&self.modes) {
            if *c == 0.0 {
                continue;
            }
            for (o, &dphi) in out.iter_mut().zip(&mode.derivs) {
                *o += c * dphi;
            }
        }
        out
    }

    /// Evaluates a coefficient vector at an arbitrary polar angle.
    pub fn synthesize_at(&self, coeffs: &[f64], theta: f64) -> f64 {
        coeffs
            .iter()
            .zip(&self.modes)
            .map(|(&c, mode)| c * mode.eval(self.n, theta))
            .sum()
    }

    /// Applies a degree multiplier `c_j -> f(l(j)) c_j`.
    pub fn apply_multiplier(&self, f: impl Fn(usize) -> f64, coeffs: &[f64]) -> Vec<f64> {
        coeffs
            .iter()
            .zip(&self.modes)
            .map(|(&c, mode)| f(mode.degree) * c)
            .collect()
    }

    /// Spectral convolution with a zonal kernel.
    pub fn convolve(&self, kernel: &ZonalCoefficients, coeffs: &[f64]) -> Result<Vec<f64>> {
        if kernel.dim() != self.n {
            return Err(CoreError::DimensionMismatch {
                left: kernel.dim(),
                right: self.n,
            });
        }
        Ok(self.apply_multiplier(|l| kernel.coeff(l), coeffs))
    }

    /// Heat semigroup multiplier `exp(s lambda_l)` (gradient flow of the
    /// entropy).
    pub fn heat_semigroup(&self, coeffs: &[f64], s: f64) -> Result<Vec<f64>> {
        if !(s >= 0.0) {
            return Err(CoreError::InvalidArgument(format!(
                "heat semigroup time must be >= 0, got {s}"
            )));
        }
        Ok(self.apply_multiplier(|l| (s * laplacian_eigenvalue(self.n, l)).exp(), coeffs))
    }

    pub fn l2_norm_sq(&self, coeffs: &[f64]) -> f64 {
        coeffs
            .iter()
            .zip(&self.modes)
            .map(|(&c, mode)| c * c * mode.norm_sq)
            .sum()
    }

    pub fn l2_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.modes)
            .map(|((&x, &y), mode)| (x - y) * (x - y) * mode.norm_sq)
            .sum::<f64>()
            .sqrt()
    }

    /// Weak-form transport right-hand side: given the state on the grid and
    /// the potential's coefficient vector, returns `d(coeffs)/dt` for
    /// `d rho/dt = div(rho grad xi)` via
    /// `dc_j/dt = -(1/|phi_j|^2) sum_i w_i rho_i xi'(a_i) phi_j'(a_i)`.
    ///
    /// The degree-0 mode has zero derivative, so mass is conserved exactly.
    pub fn transport_rhs(&self, state_values: &[f64], potential_coeffs: &[f64]) -> Vec<f64> {
        let xi_deriv = self.synthesize_deriv(potential_coeffs);
        let flux: Vec<f64> = state_values
            .iter()
            .zip(&xi_deriv)
            .zip(&self.weights)
            .map(|((&rho, &dxi), &w)| w * rho * dxi)
            .collect();
        self.modes
            .iter()
            .map(|mode| {
                let s: f64 = flux
                    .iter()
                    .zip(&mode.derivs)
                    .map(|(&f, &dphi)| f * dphi)
                    .sum();
                -s / mode.norm_sq
            })
            .collect()
    }
}
