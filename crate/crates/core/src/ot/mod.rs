//! Exact optimal transport on the circle, the minimizing-movement scheme,
//! and the Wasserstein-side check suites.
//!
//! Conventions: angles live in `[0, 2pi)`; a `Grid` distribution stores
//! the density (with respect to the uniform probability measure) on `m`
//! equal cells, cell `i = [2pi i/m, 2pi (i+1)/m)`, so its sample angle is
//! the midpoint `2pi (i + 1/2)/m`. All distances are geodesic radians.

pub mod checks;
mod jko;
mod quantile;
#[cfg(test)]
mod tests;

pub use jko::{
    jko_step, jko_trajectory, EnergyFunctional, InteractionEnergy, JkoConfig, JkoStep,
    JkoTrajectory,
};

use crate::error::{CoreError, Result};
use crate::spectral::{reconstruct_kernel, ZonalCoefficients};

/// A probability distribution on the circle: sorted weighted atoms or a
/// piecewise-constant density on a uniform grid of cells.
#[derive(Debug, Clone)]
pub enum CircularDistribution {
    /// Sorted `(angle in [0, 2pi), weight)` pairs, weights summing to 1.
    Atoms(Vec<(f64, f64)>),
    /// Cell densities against the uniform probability measure, mean 1.
    Grid(Vec<f64>),
}

impl CircularDistribution {
    pub fn from_atoms(mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(CoreError::InvalidArgument("no atoms supplied".into()));
        }
        let mut total = 0.0;
        for (angle, w) in atoms.iter_mut() {
            if !angle.is_finite() || !w.is_finite() {
                return Err(CoreError::NonFinite("atom list"));
            }
            if *w < 0.0 {
                return Err(CoreError::InvalidArgument("negative atom weight".into()));
            }
            *angle = angle.rem_euclid(std::f64::consts::TAU);
            total += *w;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(CoreError::InvalidArgument(format!(
                "atom weights sum to {total}, expected 1"
            )));
        }
        for (_, w) in atoms.iter_mut() {
            *w /= total;
        }
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        Ok(CircularDistribution::Atoms(atoms))
    }

    pub fn from_grid(mut values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(CoreError::InvalidArgument(
                "grid distributions need at least 2 cells".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::NonFinite("grid density"));
        }
        if values.iter().any(|&v| v < -1e-9) {
            return Err(CoreError::InvalidArgument(
                "grid density has negative cells".into(),
            ));
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        if (mean - 1.0).abs() > 1e-9 {
            return Err(CoreError::InvalidArgument(format!(
                "grid density has mean {mean}, expected 1"
            )));
        }
        for v in values.iter_mut() {
            *v = v.max(0.0) / mean;
        }
        Ok(CircularDistribution::Grid(values))
    }

    /// Samples a positive profile on `m` cells and normalizes it.
    pub fn from_fn(m: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values: Vec<f64> = (0..m)
            .map(|i| f(std::f64::consts::TAU * (i as f64 + 0.5) / m as f64))
            .collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::NonFinite("grid density profile"));
        }
        let mean = values.iter().sum::<f64>() / m as f64;
        if mean <= 0.0 {
            return Err(CoreError::InvalidArgument(
                "profile has nonpositive mass".into(),
            ));
        }
        CircularDistribution::from_grid(values.iter().map(|v| v.max(0.0) / mean).collect())
    }

    /// Cell midpoint angles for a grid of size `m`.
    pub fn grid_angles(m: usize) -> Vec<f64> {
        (0..m)
            .map(|i| std::f64::consts::TAU * (i as f64 + 0.5) / m as f64)
            .collect()
    }

    pub(crate) fn quantiles(&self) -> quantile::QuantileFn {
        match self {
            CircularDistribution::Atoms(atoms) => {
                let turns: Vec<(f64, f64)> = atoms
                    .iter()
                    .map(|&(a, w)| (a / std::f64::consts::TAU, w))
                    .collect();
                quantile::QuantileFn::from_atoms(&turns)
            }
            CircularDistribution::Grid(values) => quantile::QuantileFn::from_grid_cells(values),
        }
    }

    /// Convolution with a zonal kernel on the circle, evaluated on a grid
    /// of `m_out` cells by summing the kernel against the source masses.
    pub fn convolve_on_grid(
        &self,
        kernel: &ZonalCoefficients,
        m_out: usize,
    ) -> Result<CircularDistribution> {
        if kernel.dim() != 2 {
            return Err(CoreError::UnsupportedDimension(kernel.dim()));
        }
        let out_angles = Self::grid_angles(m_out);
        let mut out = vec![0.0; m_out];
        match self {
            CircularDistribution::Atoms(atoms) => {
                for (i, &a) in out_angles.iter().enumerate() {
                    out[i] = atoms
                        .iter()
                        .map(|&(pos, w)| w * reconstruct_kernel(kernel, (a - pos).cos()))
                        .sum();
                }
            }
            CircularDistribution::Grid(values) => {
                let m = values.len();
                if m == m_out {
                    // All pairwise angle differences are multiples of 2pi/m.
                    let table: Vec<f64> = (0..m)
                        .map(|k| {
                            reconstruct_kernel(
                                kernel,
                                (std::f64::consts::TAU * k as f64 / m as f64).cos(),
                            )
                        })
                        .collect();
                    for (i, o) in out.iter_mut().enumerate() {
                        let mut acc = 0.0;
                        for (j, &v) in values.iter().enumerate() {
                            acc += v * table[(i + m - j) % m];
                        }
                        *o = acc / m as f64;
                    }
                } else {
                    let src = Self::grid_angles(m);
                    for (i, &a) in out_angles.iter().enumerate() {
                        out[i] = src
                            .iter()
                            .zip(values)
                            .map(|(&pos, &v)| {
                                v / m as f64 * reconstruct_kernel(kernel, (a - pos).cos())
                            })
                            .sum();
                    }
                }
            }
        }
        let mean = out.iter().sum::<f64>() / m_out as f64;
        if !(mean > 0.0) {
            return Err(CoreError::InvalidArgument(
                "convolved density lost its mass".into(),
            ));
        }
        if out.iter().any(|&v| v < -1e-8) {
            return Err(CoreError::InvalidArgument(
                "convolution with a signed kernel produced a negative density".into(),
            ));
        }
        CircularDistribution::from_grid(out.iter().map(|v| v.max(0.0) / mean).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WassersteinOrder {
    W1,
    W2,
}

/// Exact Wasserstein distance on the circle with geodesic cost, in radians.
pub fn wasserstein_circle(
    mu: &CircularDistribution,
    nu: &CircularDistribution,
    order: WassersteinOrder,
) -> Result<f64> {
    match order {
        WassersteinOrder::W1 => Ok(std::f64::consts::TAU * quantile::w1_circle_turns(mu, nu)),
        WassersteinOrder::W2 => {
            let (_, cost) = quantile::min_quadratic_cost(&mu.quantiles(), &nu.quantiles());
            Ok(std::f64::consts::TAU * cost.max(0.0).sqrt())
        }
    }
}

/// Squared `W_2` (radians^2) together with the Kantorovich displacement
/// field at the cell midpoints of the grid marginal `mu`.
pub(crate) fn w2_squared_with_displacement(
    mu_values: &[f64],
    nu: &CircularDistribution,
) -> (f64, Vec<f64>) {
    let t = quantile::grid_transport(mu_values, &nu.quantiles());
    let tau = std::f64::consts::TAU;
    (
        tau * tau * t.cost_turns_sq,
        t.displacement_at_midpoints
            .iter()
            .map(|d| tau * d)
            .collect(),
    )
}
