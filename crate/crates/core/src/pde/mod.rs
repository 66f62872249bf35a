//! Pseudospectral method-of-lines solvers for the aggregation equation
//! and its porous-medium diffusion limit.
//!
//! Both equations are transport equations `d rho/dt = div(rho grad xi)`
//! whose potential `xi` is a degree multiplier of the state:
//!
//! * aggregation (localized repulsion at scale eps):
//!   `xi = (W + V_eps) * rho`;
//! * aggregation-diffusion: `xi = W * rho + rho`, since
//!   `div(rho grad rho) = Laplace(rho^2) / 2`.
//!
//! The right-hand side is the Galerkin projection of the weak form
//! (state times potential derivative against mode derivatives), which
//! avoids the polar coordinate singularity and conserves mass exactly.

mod basis;
#[cfg(test)]
mod tests;

pub use basis::{BasisMode, ModeKind, SphericalBasis};

use crate::error::{CoreError, Result};
use crate::spectral::{sqrt_kernel, ZonalCoefficients};
use std::fmt;

/// Probability density in zonal-reduced (or circle Fourier) form.
#[derive(Debug, Clone)]
pub struct DensityState {
    /// Mode coefficients; index 0 is the mass.
    pub coeffs: Vec<f64>,
    /// Grid samples, consistent with `coeffs` through the basis transforms.
    pub values: Vec<f64>,
    pub time: f64,
}

impl DensityState {
    pub fn uniform(basis: &SphericalBasis) -> Self {
        let mut coeffs = vec![0.0; basis.num_modes()];
        coeffs[0] = 1.0;
        DensityState {
            coeffs,
            values: vec![1.0; basis.grid_len()],
            time: 0.0,
        }
    }

    /// Wraps grid samples whose quadrature mass is already 1 (within 1e-10).
    pub fn from_values(basis: &SphericalBasis, values: Vec<f64>, time: f64) -> Result<Self> {
        let coeffs = basis.analyze(&values);
        if (coeffs[0] - 1.0).abs() > 1e-10 {
            return Err(CoreError::InvalidArgument(format!(
                "density mass is {}, expected 1 within 1e-10; normalize first",
                coeffs[0]
            )));
        }
        Ok(DensityState { coeffs, values, time })
    }

    /// Samples a profile of the polar angle and rescales it exactly to
    /// unit mass.
    pub fn normalized_from_fn(basis: &SphericalBasis, f: impl Fn(f64) -> f64) -> Result<Self> {
        let raw: Vec<f64> = basis.thetas().iter().map(|&a| f(a)).collect();
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::NonFinite("density profile"));
        }
        let mass = basis.integrate(&raw);
        if mass <= 0.0 {
            return Err(CoreError::InvalidArgument(
                "density profile has nonpositive mass".into(),
            ));
        }
        let values: Vec<f64> = raw.iter().map(|v| v / mass).collect();
        let mut coeffs = basis.analyze(&values);
        coeffs[0] = 1.0;
        Ok(DensityState { coeffs, values, time: 0.0 })
    }

    pub fn from_coeffs(basis: &SphericalBasis, coeffs: Vec<f64>, time: f64) -> Result<Self> {
        if coeffs.len() != basis.num_modes() {
            return Err(CoreError::DimensionMismatch {
                left: coeffs.len(),
                right: basis.num_modes(),
            });
        }
        let values = basis.synthesize(&coeffs);
        Ok(DensityState { coeffs, values, time })
    }

    pub fn mass(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Interaction energy in its two algebraic forms.
#[derive(Debug, Clone, Copy)]
pub struct EnergyPair {
    /// `1/2 sum_l (W_l + V_l) c_l^2 Z_l(1)` (double-integral form).
    pub double_form: f64,
    /// `1/2 |sqrt(V) * rho|^2 + 1/2 sum_l W_l c_l^2 Z_l(1)` (square-root form).
    pub sqrt_form: f64,
}

/// Free energy of a state for interaction kernel `w` and repulsion `v`,
/// evaluated by both routes.
pub fn energy(
    basis: &SphericalBasis,
    state: &DensityState,
    w: Option<&ZonalCoefficients>,
    v: Option<&ZonalCoefficients>,
) -> Result<EnergyPair> {
    let quad = |kernel: Option<&ZonalCoefficients>| -> f64 {
        match kernel {
            None => 0.0,
            Some(k) => state
                .coeffs
                .iter()
                .zip(basis.modes())
                .map(|(&c, mode)| k.coeff(mode.degree) * c * c * mode.norm_sq)
                .sum(),
        }
    };
    let w_part = 0.5 * quad(w);
    let double_form = w_part + 0.5 * quad(v);
    let sqrt_form = match v {
        None => w_part,
        Some(v) => {
            let s = sqrt_kernel(v)?;
            let smoothed = basis.convolve(&s, &state.coeffs)?;
            w_part + 0.5 * basis.l2_norm_sq(&smoothed)
        }
    };
    Ok(EnergyPair { double_form, sqrt_form })
}

/// Policy for nonpositive grid values in the entropy integrand.
#[derive(Debug, Clone, Copy)]
pub enum NegativePolicy {
    /// Fail with [`CoreError::EntropyUndefined`].
    Error,
    /// Clamp values below the floor and report that clipping happened.
    Clip(f64),
}

/// `int rho log rho d sigma` by grid quadrature. Returns the value and
/// whether clipping was applied.
pub fn entropy(
    basis: &SphericalBasis,
    values: &[f64],
    policy: NegativePolicy,
) -> Result<(f64, bool)> {
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let floor = match policy {
        NegativePolicy::Error => {
            if min <= 0.0 {
                return Err(CoreError::EntropyUndefined { min });
            }
            0.0
        }
        NegativePolicy::Clip(floor) => floor,
    };
    let clipped = min < floor;
    let value = values
        .iter()
        .zip(basis.weights())
        .map(|(&v, &w)| {
            let v = v.max(floor);
            if v == 0.0 {
                0.0
            } else {
                w * v * v.ln()
            }
        })
        .sum();
    Ok((value, clipped))
}

fn potential_multiplier(
    basis: &SphericalBasis,
    w: Option<&ZonalCoefficients>,
    v: Option<&ZonalCoefficients>,
) -> Result<Vec<f64>> {
    for k in [w, v].into_iter().flatten() {
        if k.dim() != basis.dim() {
            return Err(CoreError::DimensionMismatch {
                left: k.dim(),
                right: basis.dim(),
            });
        }
    }
    let mult = |l: usize| -> f64 {
        match v {
            // aggregation: xi = (W + V) * rho
            Some(v) => w.map_or(0.0, |w| w.coeff(l)) + v.coeff(l),
            // diffusion limit: xi = W * rho + rho
            None => w.map_or(0.0, |w| w.coeff(l)) + 1.0,
        }
    };
    Ok((0..=basis.l_max()).map(mult).collect())
}

fn transport_rhs_for(
    basis: &SphericalBasis,
    multiplier: &[f64],
    coeffs: &[f64],
    time: f64,
) -> Result<Vec<f64>> {
    let xi = basis.apply_multiplier(|l| multiplier[l], coeffs);
    let values = basis.synthesize(coeffs);
    let out = basis.transport_rhs(&values, &xi);
    if out.iter().any(|r| !r.is_finite()) {
        return Err(CoreError::Instability {
            time,
            detail: "non-finite flux in the weak-form right-hand side".into(),
        });
    }
    Ok(out)
}

/// Coefficient time-derivative of the aggregation equation with fixed
/// interaction `w` and localized repulsion `v`.
pub fn rhs_aggregation(
    basis: &SphericalBasis,
    state: &DensityState,
    w: Option<&ZonalCoefficients>,
    v: &ZonalCoefficients,
) -> Result<Vec<f64>> {
    let mult = potential_multiplier(basis, w, Some(v))?;
    transport_rhs_for(basis, &mult, &state.coeffs, state.time)
}

/// Coefficient time-derivative of the aggregation-diffusion equation
/// (quadratic porous-medium diffusion).
pub fn rhs_ade(
    basis: &SphericalBasis,
    state: &DensityState,
    w: Option<&ZonalCoefficients>,
) -> Result<Vec<f64>> {
    let mult = potential_multiplier(basis, w, None)?;
    transport_rhs_for(basis, &mult, &state.coeffs, state.time)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Rk4,
    Heun,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::Rk4 => write!(f, "rk4"),
            Scheme::Heun => write!(f, "heun"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub l_max: usize,
    pub grid_size: usize,
    /// Target time step; the solver shrinks it so that samples land
    /// exactly on multiples of the diagnostic interval.
    pub dt: f64,
    pub t_final: f64,
    pub scheme: Scheme,
    /// Record a trajectory sample and an energy row every this many steps.
    pub diagnostics_every: usize,
    /// Clip nonpositive grid values in entropy diagnostics (the solver
    /// itself never clips the state).
    pub clip_negative: bool,
}

impl SolverConfig {
    pub fn new(l_max: usize, dt: f64, t_final: f64) -> Self {
        SolverConfig {
            l_max,
            grid_size: 2 * l_max + 8,
            dt,
            t_final,
            scheme: Scheme::Rk4,
            diagnostics_every: 1,
            clip_negative: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !(self.t_final > 0.0) {
            return Err(CoreError::InvalidArgument(format!(
                "time step and horizon must be positive (dt = {}, T = {})",
                self.dt, self.t_final
            )));
        }
        if self.grid_size < 2 * self.l_max + 8 {
            return Err(CoreError::InvalidArgument(format!(
                "grid size {} below the 2L+8 = {} rule",
                self.grid_size,
                2 * self.l_max + 8
            )));
        }
        if self.diagnostics_every == 0 {
            return Err(CoreError::InvalidArgument(
                "diagnostics_every must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Step bound for the stiffest (degenerate diffusion) term:
    /// `0.25 / (|lambda_L| max(|rho0|_inf, 2))`.
    pub fn suggested_dt(n: usize, l_max: usize, rho0_inf: f64) -> f64 {
        let lam = crate::spectral::laplacian_eigenvalue(n, l_max).abs();
        0.25 / (lam * rho0_inf.max(2.0))
    }
}

/// One row of solver diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct EnergyRow {
    pub time: f64,
    pub f_double: f64,
    pub f_sqrt: f64,
    pub entropy: f64,
    pub mass: f64,
    pub min_density: f64,
    /// `|sqrt(V) * rho|^2` for aggregation runs, `|rho|^2` for diffusion runs.
    pub conv_l2: f64,
}

#[derive(Debug, Clone, Default)]
pub struct EnergyReport {
    pub rows: Vec<EnergyRow>,
    /// Whether any entropy evaluation clipped nonpositive values.
    pub entropy_clipped: bool,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<DensityState>,
    pub report: EnergyReport,
    /// Time step actually used (after stability halvings).
    pub dt_used: f64,
    pub halvings: u32,
}

impl Trajectory {
    pub fn final_state(&self) -> &DensityState {
        self.states.last().expect("trajectory is never empty")
    }
}

/// Solve failure carrying the partial trajectory of the last attempt.
#[derive(Debug)]
pub struct SolveError {
    pub reason: CoreError,
    pub partial: Trajectory,
}

impl fmt::Display for SolveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "solve failed after {} recorded samples: {}",
            self.partial.states.len(),
            self.reason
        )
    }
}

impl std::error::Error for SolveError {}

impl From<SolveError> for CoreError {
    fn from(e: SolveError) -> Self {
        e.reason
    }
}

const MAX_HALVINGS: u32 = 6;
const BLOWUP_LIMIT: f64 = 1e8;

/// Integrates the transport equation selected by `v`:
/// `Some(v)` solves the aggregation equation, `None` the
/// aggregation-diffusion equation.
///
/// On instability the time step is halved (and the diagnostic stride
/// doubled, keeping sample times fixed) up to six times.
pub fn solve(
    basis: &SphericalBasis,
    initial: &DensityState,
    w: Option<&ZonalCoefficients>,
    v: Option<&ZonalCoefficients>,
    config: &SolverConfig,
) -> std::result::Result<Trajectory, SolveError> {
    let fail = |reason: CoreError| SolveError {
        reason,
        partial: Trajectory {
            states: vec![initial.clone()],
            report: EnergyReport::default(),
            dt_used: config.dt,
            halvings: 0,
        },
    };
    if let Err(e) = config.validate() {
        return Err(fail(e));
    }
    let multiplier = match potential_multiplier(basis, w, v) {
        Ok(m) => m,
        Err(e) => return Err(fail(e)),
    };

    // Steps per diagnostic sample at the target dt, then an exact grid.
    let samples = (config.t_final / (config.dt * config.diagnostics_every as f64)).ceil() as usize;
    let samples = samples.max(1);
    let sample_interval = config.t_final / samples as f64;

    let mut per_sample = config.diagnostics_every;
    let mut halvings = 0;
    loop {
        let dt = sample_interval / per_sample as f64;
        match solve_attempt(
            basis, initial, w, v, &multiplier, dt, samples, per_sample, config, halvings,
        ) {
            Ok(traj) => return Ok(traj),
            Err(err) => {
                if halvings >= MAX_HALVINGS {
                    return Err(err);
                }
                halvings += 1;
                per_sample *= 2;
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn solve_attempt(
    basis: &SphericalBasis,
    initial: &DensityState,
    w: Option<&ZonalCoefficients>,
    v: Option<&ZonalCoefficients>,
    multiplier: &[f64],
    dt: f64,
    samples: usize,
    per_sample: usize,
    config: &SolverConfig,
    halvings: u32,
) -> std::result::Result<Trajectory, SolveError> {
    let mut states = Vec::with_capacity(samples + 1);
    let mut report = EnergyReport::default();

    let mut coeffs = initial.coeffs.clone();
    let mut time = initial.time;

    let policy = if config.clip_negative {
        NegativePolicy::Clip(1e-14)
    } else {
        NegativePolicy::Error
    };

    let record = |coeffs: &[f64],
                  time: f64,
                  states: &mut Vec<DensityState>,
                  report: &mut EnergyReport|
     -> Result<()> {
        let state = DensityState::from_coeffs(basis, coeffs.to_vec(), time)?;
        let pair = energy(basis, &state, w, v)?;
        let (ent, clipped) = entropy(basis, &state.values, policy)?;
        report.entropy_clipped |= clipped;
        let conv_l2 = match v {
            Some(v) => {
                let s = sqrt_kernel(v)?;
                basis.l2_norm_sq(&basis.convolve(&s, &state.coeffs)?)
            }
            None => basis.l2_norm_sq(&state.coeffs),
        };
        report.rows.push(EnergyRow {
            time,
            f_double: pair.double_form,
            f_sqrt: pair.sqrt_form,
            entropy: ent,
            mass: state.mass(),
            min_density: state.min_value(),
            conv_l2,
        });
        states.push(state);
        Ok(())
    };

    let wrap = |reason: CoreError, states: Vec<DensityState>, report: EnergyReport| SolveError {
        reason,
        partial: Trajectory {
            states,
            report,
            dt_used: dt,
            halvings,
        },
    };

    if let Err(e) = record(&coeffs, time, &mut states, &mut report) {
        return Err(wrap(e, states, report));
    }

    let rhs = |c: &[f64], t: f64| transport_rhs_for(basis, multiplier, c, t);

    for s in 0..samples {
        for k in 0..per_sample {
            let step_result = (|| -> Result<Vec<f64>> {
                let mut next = coeffs.clone();
                match config.scheme {
                    Scheme::Rk4 => {
                        let k1 = rhs(&coeffs, time)?;
                        let mid1 = axpy(&coeffs, 0.5 * dt, &k1);
                        let k2 = rhs(&mid1, time + 0.5 * dt)?;
                        let mid2 = axpy(&coeffs, 0.5 * dt, &k2);
                        let k3 = rhs(&mid2, time + 0.5 * dt)?;
                        let end = axpy(&coeffs, dt, &k3);
                        let k4 = rhs(&end, time + dt)?;
                        for i in 0..next.len() {
                            next[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                        }
                    }
                    Scheme::Heun => {
                        let k1 = rhs(&coeffs, time)?;
                        let pred = axpy(&coeffs, dt, &k1);
                        let k2 = rhs(&pred, time + dt)?;
                        for i in 0..next.len() {
                            next[i] += 0.5 * dt * (k1[i] + k2[i]);
                        }
                    }
                }
                let sup = next.iter().cloned().fold(0.0f64, |a, b| a.max(b.abs()));
                if !sup.is_finite() || sup > BLOWUP_LIMIT {
                    return Err(CoreError::Instability {
                        time,
                        detail: format!("coefficient norm {sup:.3e} exceeded the blow-up guard"),
                    });
                }
                Ok(next)
            })();
            match step_result {
                Ok(next) => {
                    coeffs = next;
                    time = initial.time + ((s * per_sample + k + 1) as f64) * dt;
                }
                Err(e) => return Err(wrap(e, states, report)),
            }
        }
        // Land exactly on the sample time to keep sweeps aligned.
        time = initial.time + (s + 1) as f64 * (per_sample as f64 * dt);
        if let Err(e) = record(&coeffs, time, &mut states, &mut report) {
            return Err(wrap(e, states, report));
        }
    }

    Ok(Trajectory {
        states,
        report,
        dt_used: dt,
        halvings,
    })
}

fn axpy(base: &[f64], scale: f64, delta: &[f64]) -> Vec<f64> {
    base.iter()
        .zip(delta)
        .map(|(&b, &d)| b + scale * d)
        .collect()
}

/// Commutator residual of the smoothing kernel against a test function on
/// the circle:
/// `int | sqrt(V) * (rho phi') - (sqrt(V) * rho) phi' | d sigma`.
pub fn residual_norm(
    basis: &SphericalBasis,
    state: &DensityState,
    v: &ZonalCoefficients,
    phi_deriv: &dyn Fn(f64) -> f64,
) -> Result<f64> {
    if basis.dim() != 2 {
        return Err(CoreError::UnsupportedDimension(basis.dim()));
    }
    let s = sqrt_kernel(v)?;
    let pd: Vec<f64> = basis.thetas().iter().map(|&a| phi_deriv(a)).collect();
    let weighted: Vec<f64> = state.values.iter().zip(&pd).map(|(&r, &p)| r * p).collect();
    let lhs = basis.synthesize(&basis.convolve(&s, &basis.analyze(&weighted))?);
    let smoothed = basis.synthesize(&basis.convolve(&s, &state.coeffs)?);
    let total = lhs
        .iter()
        .zip(&smoothed)
        .zip(&pd)
        .zip(basis.weights())
        .map(|(((&l, &v), &p), &w)| w * (l - v * p).abs())
        .sum();
    Ok(total)
}

/// Comparison of a smoothed aggregation trajectory against an
/// aggregation-diffusion trajectory at shared sample times.
#[derive(Debug, Clone, Copy)]
pub struct GapStats {
    /// `L^2(0,T; L^2)` norm of `sqrt(V) * rho_ae - rho_ade` (trapezoid in time).
    pub l2_space_time: f64,
    /// Largest per-sample `L^2` gap.
    pub sup_gap: f64,
    /// Time-averaged commutator residual (circle runs only; NaN otherwise).
    pub mean_residual: f64,
}

pub fn compare_to_ade(
    basis: &SphericalBasis,
    ae: &Trajectory,
    ade: &Trajectory,
    v: &ZonalCoefficients,
    phi_deriv: Option<&dyn Fn(f64) -> f64>,
) -> Result<GapStats> {
    if ae.states.len() != ade.states.len() {
        return Err(CoreError::InvalidArgument(format!(
            "trajectories have different sample counts ({} vs {})",
            ae.states.len(),
            ade.states.len()
        )));
    }
    let s = sqrt_kernel(v)?;
    let count = ae.states.len();
    let mut sq = Vec::with_capacity(count);
    let mut residuals = Vec::with_capacity(count);
    let mut sup_gap: f64 = 0.0;
    for (a, d) in ae.states.iter().zip(&ade.states) {
        let smoothed = basis.convolve(&s, &a.coeffs)?;
        let gap = basis.l2_distance(&smoothed, &d.coeffs);
        sup_gap = sup_gap.max(gap);
        sq.push(gap * gap);
        if let Some(pd) = phi_deriv {
            residuals.push(residual_norm(basis, a, v, pd)?);
        }
    }
    let t0 = ae.states.first().map(|s| s.time).unwrap_or(0.0);
    let t1 = ae.final_state().time;
    let h = if count > 1 {
        (t1 - t0) / (count - 1) as f64
    } else {
        0.0
    };
    let trapz = |vals: &[f64]| -> f64 {
        if vals.len() < 2 {
            return 0.0;
        }
        let inner: f64 = vals[1..vals.len() - 1].iter().sum();
        h * (0.5 * vals[0] + inner + 0.5 * vals[vals.len() - 1])
    };
    let mean_residual = if residuals.is_empty() {
        f64::NAN
    } else {
        trapz(&residuals) / (t1 - t0).max(f64::MIN_POSITIVE)
    };
    Ok(GapStats {
        l2_space_time: trapz(&sq).sqrt(),
        sup_gap,
        mean_residual,
    })
}

/// One scale of the kernel-width sweep.
#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub eps: f64,
    pub stats: Option<GapStats>,
    pub halvings: u32,
    /// Set when the aggregation solve at this scale failed.
    pub failed: bool,
}

#[derive(Debug, Clone)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

/// Solves the aggregation equation across a list of scales, solves the
/// diffusion limit once, and reports the space-time gaps between the
/// smoothed aggregation states and the limit trajectory.
pub fn convergence_study(
    basis: &SphericalBasis,
    w: Option<&ZonalCoefficients>,
    family: &dyn Fn(f64) -> Result<ZonalCoefficients>,
    eps_list: &[f64],
    initial: &DensityState,
    config: &SolverConfig,
    phi_deriv: Option<&dyn Fn(f64) -> f64>,
) -> Result<ConvergenceTable> {
    if eps_list.is_empty() {
        return Err(CoreError::InvalidArgument("empty scale list".into()));
    }
    let ade = solve(basis, initial, w, None, config).map_err(CoreError::from)?;
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let v = family(eps)?;
        match solve(basis, initial, w, Some(&v), config) {
            Ok(ae) => rows.push(ConvergenceRow {
                eps,
                stats: Some(compare_to_ade(basis, &ae, &ade, &v, phi_deriv)?),
                halvings: ae.halvings,
                failed: false,
            }),
            Err(err) => rows.push(ConvergenceRow {
                eps,
                stats: None,
                halvings: err.partial.halvings,
                failed: true,
            }),
        }
    }
    Ok(ConvergenceTable { rows })
}
