//! Minimizing-movement (JKO) scheme on circle grid densities.
//!
//! Each step solves `argmin_rho F(rho) + W_2^2(rho, prev) / (2 tau)` over
//! the probability simplex of cell densities by mirror descent
//! (multiplicative updates with backtracking). The gradient of the squared
//! distance comes from the envelope theorem: it is the Kantorovich
//! potential of the optimal coupling, reconstructed by integrating the
//! displacement field of the exact quantile coupling.

use super::{w2_squared_with_displacement, CircularDistribution};
use crate::error::{CoreError, Result};
use crate::spectral::{reconstruct_kernel, ZonalCoefficients};

/// An energy on grid densities with an `L^2` first variation.
pub trait EnergyFunctional {
    fn value(&self, density: &[f64]) -> f64;
    /// `delta F / delta rho` at the grid cell midpoints.
    fn first_variation(&self, density: &[f64]) -> Vec<f64>;
    /// A lower bound on the energy over probability densities, used by the
    /// step-sum and time-continuity certificates.
    fn lower_bound(&self) -> f64;
}

/// The interaction energy
/// `1/2 int int (W + V) d rho d rho` on circle grid densities, evaluated
/// spectrally from the cell-midpoint samples.
pub struct InteractionEnergy {
    m: usize,
    /// Combined multiplier `W_l + V_l` per degree.
    kernel: Vec<f64>,
    lower: f64,
    cos_table: Vec<Vec<f64>>,
    sin_table: Vec<Vec<f64>>,
}

impl InteractionEnergy {
    pub fn new(
        m: usize,
        l_max: usize,
        w: Option<&ZonalCoefficients>,
        v: Option<&ZonalCoefficients>,
    ) -> Result<Self> {
        for k in [w, v].into_iter().flatten() {
            if k.dim() != 2 {
                return Err(CoreError::UnsupportedDimension(k.dim()));
            }
        }
        if m < 2 * l_max + 2 {
            return Err(CoreError::InvalidArgument(format!(
                "grid size {m} cannot resolve degree {l_max}"
            )));
        }
        let kernel: Vec<f64> = (0..=l_max)
            .map(|l| w.map_or(0.0, |w| w.coeff(l)) + v.map_or(0.0, |v| v.coeff(l)))
            .collect();
        // Interaction lower bound: the repulsive part has a nonnegative
        // spectrum, so F >= -|W|_inf / 2.
        let w_inf = match w {
            None => 0.0,
            Some(w) => crate::kernels::linf_norm(|t| reconstruct_kernel(w, t), 4096),
        };
        let angles = CircularDistribution::grid_angles(m);
        let cos_table = (0..=l_max)
            .map(|l| angles.iter().map(|&a| (l as f64 * a).cos()).collect())
            .collect();
        let sin_table = (0..=l_max)
            .map(|l| angles.iter().map(|&a| (l as f64 * a).sin()).collect())
            .collect();
        Ok(InteractionEnergy {
            m,
            kernel,
            lower: -0.5 * w_inf,
            cos_table,
            sin_table,
        })
    }

    pub fn grid_len(&self) -> usize {
        self.m
    }

    fn spectrum(&self, density: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let m = self.m as f64;
        let a: Vec<f64> = self
            .cos_table
            .iter()
            .map(|row| row.iter().zip(density).map(|(c, d)| c * d).sum::<f64>() / m)
            .collect();
        let b: Vec<f64> = self
            .sin_table
            .iter()
            .map(|row| row.iter().zip(density).map(|(s, d)| s * d).sum::<f64>() / m)
            .collect();
        (a, b)
    }
}

impl EnergyFunctional for InteractionEnergy {
    fn value(&self, density: &[f64]) -> f64 {
        let (a, b) = self.spectrum(density);
        let mut total = 0.5 * self.kernel[0] * a[0] * a[0];
        for l in 1..self.kernel.len() {
            total += self.kernel[l] * (a[l] * a[l] + b[l] * b[l]);
        }
        total
    }

    fn first_variation(&self, density: &[f64]) -> Vec<f64> {
        let (a, b) = self.spectrum(density);
        (0..self.m)
            .map(|i| {
                let mut v = self.kernel[0] * a[0];
                for l in 1..self.kernel.len() {
                    v += 2.0
                        * self.kernel[l]
                        * (a[l] * self.cos_table[l][i] + b[l] * self.sin_table[l][i]);
                }
                v
            })
            .collect()
    }

    fn lower_bound(&self) -> f64 {
        self.lower
    }
}

#[derive(Debug, Clone)]
pub struct JkoConfig {
    pub tau: f64,
    pub steps: usize,
    /// Stop the inner solve once the rho-weighted stationarity of the
    /// objective gradient drops below this.
    pub inner_tol: f64,
    pub max_inner: usize,
}

impl JkoConfig {
    pub fn new(tau: f64, steps: usize) -> Self {
        JkoConfig {
            tau,
            steps,
            inner_tol: 1e-8,
            max_inner: 400,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || self.steps == 0 {
            return Err(CoreError::InvalidArgument(format!(
                "JKO needs tau > 0 and steps >= 1 (tau = {}, steps = {})",
                self.tau, self.steps
            )));
        }
        Ok(())
    }
}

/// Outcome of a single proximal step.
#[derive(Debug, Clone)]
pub struct JkoStep {
    pub density: Vec<f64>,
    /// `F(rho) + W_2^2(rho, prev) / (2 tau)` at the output.
    pub objective: f64,
    pub energy: f64,
    /// `W_2(rho, prev)` in radians.
    pub w2_increment: f64,
    pub inner_iterations: usize,
    /// Achieved rho-weighted stationarity. The discrete transport
    /// potential carries grid-scale kinks, so this floors around the
    /// coupling discretization even when the objective is converged.
    pub stationarity: f64,
    pub converged: bool,
}

fn objective(
    f: &dyn EnergyFunctional,
    density: &[f64],
    prev: &CircularDistribution,
    tau: f64,
) -> (f64, f64) {
    let (w2sq, _) = w2_squared_with_displacement(density, prev);
    (f.value(density) + w2sq / (2.0 * tau), w2sq)
}

/// One minimizing-movement step from a strictly positive grid density.
pub fn jko_step(
    prev: &[f64],
    tau: f64,
    f: &dyn EnergyFunctional,
    inner_tol: f64,
    max_inner: usize,
) -> Result<JkoStep> {
    if prev.iter().any(|&v| v <= 0.0) {
        return Err(CoreError::InvalidArgument(
            "mirror descent needs a strictly positive starting density".into(),
        ));
    }
    let m = prev.len();
    let prev_dist = CircularDistribution::from_grid(prev.to_vec())?;

    let mut rho = prev.to_vec();
    let mut obj = f.value(&rho); // W2 term vanishes at the start
    let mut w2sq_at_rho = 0.0;
    let mut eta = tau.min(0.1);
    let mut converged = false;
    let mut iterations = 0;
    let mut last_stationarity = f64::INFINITY;
    let mut stalled = 0u32;

    for it in 0..max_inner {
        iterations = it + 1;
        let (_, displacement) = w2_squared_with_displacement(&rho, &prev_dist);
        // Kantorovich potential: phi' = 2 * displacement; integrate over
        // the midpoints and remove the periodic closure defect.
        let h = std::f64::consts::TAU / m as f64;
        let mut phi = Vec::with_capacity(m);
        let mut acc = 0.0;
        phi.push(0.0);
        for i in 1..m {
            acc += (displacement[i - 1] + displacement[i]) * h;
            phi.push(acc);
        }
        let defect = acc + (displacement[m - 1] + displacement[0]) * h;
        for (i, p) in phi.iter_mut().enumerate() {
            *p -= defect * i as f64 / m as f64;
        }

        let grad_f = f.first_variation(&rho);
        let g: Vec<f64> = grad_f
            .iter()
            .zip(&phi)
            .map(|(df, p)| df + p / (2.0 * tau))
            .collect();

        let gbar: f64 = g.iter().zip(&rho).map(|(gi, ri)| gi * ri).sum::<f64>() / m as f64;
        let stationarity: f64 = g
            .iter()
            .zip(&rho)
            .map(|(gi, ri)| ri * (gi - gbar).abs())
            .sum::<f64>()
            / m as f64;
        last_stationarity = stationarity;
        if stationarity <= inner_tol {
            converged = true;
            break;
        }

        // Backtracking multiplicative update.
        let mut accepted = false;
        while eta > 1e-18 {
            let cand: Vec<f64> = rho
                .iter()
                .zip(&g)
                .map(|(ri, gi)| ri * (-eta * (gi - gbar)).exp())
                .collect();
            let mean = cand.iter().sum::<f64>() / m as f64;
            let cand: Vec<f64> = cand.iter().map(|c| c / mean).collect();
            let (cand_obj, cand_w2sq) = objective(f, &cand, &prev_dist, tau);
            if cand_obj <= obj + 1e-14 * (1.0 + obj.abs()) {
                if obj - cand_obj <= 1e-14 * (1.0 + obj.abs()) {
                    stalled += 1;
                } else {
                    stalled = 0;
                }
                rho = cand;
                obj = cand_obj;
                w2sq_at_rho = cand_w2sq;
                eta *= 1.3;
                accepted = true;
                break;
            }
            eta *= 0.5;
        }
        if !accepted || stalled >= 8 {
            // The objective stopped moving at floating-point resolution:
            // the proximal problem is solved as far as the discrete
            // transport potential allows.
            converged = true;
            break;
        }
    }

    Ok(JkoStep {
        energy: f.value(&rho),
        objective: obj,
        w2_increment: w2sq_at_rho.max(0.0).sqrt(),
        density: rho,
        inner_iterations: iterations,
        stationarity: last_stationarity,
        converged,
    })
}

/// Piecewise-constant minimizing-movement trajectory with the step-sum and
/// time-continuity certificates attached.
#[derive(Debug, Clone)]
pub struct JkoTrajectory {
    /// `steps + 1` densities, the initial one first.
    pub densities: Vec<Vec<f64>>,
    pub energies: Vec<f64>,
    pub w2_increments: Vec<f64>,
    pub inner_iterations: Vec<usize>,
    pub all_converged: bool,
    /// `sum_k W_2^2(rho_k, rho_{k-1}) / (2 tau)`.
    pub step_sum: f64,
    /// `F(rho_0) - F(rho_K)` (an upper bound for `step_sum` by telescoping).
    pub energy_drop: f64,
    /// Constant `c = sqrt(2 (F(rho_0) - inf F))` in the bound
    /// `W_2(rho(s), rho(t)) <= c (sqrt(tau) + sqrt(t - s))`.
    pub holder_constant: f64,
    /// Largest violation of the time-continuity bound over sampled pairs.
    pub holder_violation: f64,
}

pub fn jko_trajectory(
    rho0: &CircularDistribution,
    config: &JkoConfig,
    f: &dyn EnergyFunctional,
) -> Result<JkoTrajectory> {
    config.validate()?;
    let CircularDistribution::Grid(start) = rho0 else {
        return Err(CoreError::InvalidArgument(
            "the minimizing-movement scheme runs on grid densities".into(),
        ));
    };

    let mut densities = vec![start.clone()];
    let mut energies = vec![f.value(start)];
    let mut w2_increments = Vec::with_capacity(config.steps);
    let mut inner_iterations = Vec::with_capacity(config.steps);
    let mut all_converged = true;
    for _ in 0..config.steps {
        let step = jko_step(
            densities.last().unwrap(),
            config.tau,
            f,
            config.inner_tol,
            config.max_inner,
        )?;
        energies.push(step.energy);
        w2_increments.push(step.w2_increment);
        inner_iterations.push(step.inner_iterations);
        all_converged &= step.converged;
        densities.push(step.density);
    }

    let step_sum: f64 =
        w2_increments.iter().map(|w| w * w).sum::<f64>() / (2.0 * config.tau);
    let energy_drop = energies[0] - energies[energies.len() - 1];
    let holder_constant = (2.0 * (energies[0] - f.lower_bound())).max(0.0).sqrt();

    // Time continuity against the Hoelder bound on a dyadic set of pairs.
    let k = w2_increments.len();
    let mut holder_violation = f64::NEG_INFINITY;
    let mut gap = 1;
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    while gap <= k {
        for j in (0..k + 1 - gap).step_by(gap.max(k / 16).max(1)) {
            pairs.push((j, j + gap));
        }
        gap *= 2;
    }
    for (j, l) in pairs {
        let a = CircularDistribution::from_grid(densities[j].clone())?;
        let b = CircularDistribution::from_grid(densities[l].clone())?;
        let dist = super::wasserstein_circle(&a, &b, super::WassersteinOrder::W2)?;
        let bound = holder_constant
            * (config.tau.sqrt() + ((l - j) as f64 * config.tau).sqrt());
        holder_violation = holder_violation.max(dist - bound);
    }

    Ok(JkoTrajectory {
        densities,
        energies,
        w2_increments,
        inner_iterations,
        all_converged,
        step_sum,
        energy_drop,
        holder_constant,
        holder_violation,
    })
}
