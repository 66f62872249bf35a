//! Wasserstein-side check suites: the evolution variational inequality of
//! the heat flow and the contraction of transport distances under
//! convolution with probability kernels.

use super::{wasserstein_circle, CircularDistribution, WassersteinOrder};
use crate::error::{CoreError, Result};
use crate::pde::{entropy, NegativePolicy, SphericalBasis};
use crate::spectral::ZonalCoefficients;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Per-time record of the EVI check.
#[derive(Debug, Clone, Copy)]
pub struct EviRow {
    pub time: f64,
    /// Forward difference `(W_2^2(S^{t+h} rho, nu) - W_2^2(S^t rho, nu)) / (2h)`.
    pub lhs: f64,
    /// `E(nu) - E(S^t rho)` (the curvature term vanishes on the circle).
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct EviReport {
    pub rows: Vec<EviRow>,
    pub max_violation: f64,
}

/// Checks the evolution variational inequality of the heat flow on the
/// circle against an exact-transport evaluation of `W_2`.
pub fn evi_check(
    rho0: &CircularDistribution,
    nu: &CircularDistribution,
    times: &[f64],
    h: f64,
) -> Result<EviReport> {
    let (CircularDistribution::Grid(start), CircularDistribution::Grid(target)) = (rho0, nu)
    else {
        return Err(CoreError::InvalidArgument(
            "the EVI check runs on grid densities".into(),
        ));
    };
    if start.len() != target.len() {
        return Err(CoreError::DimensionMismatch {
            left: start.len(),
            right: target.len(),
        });
    }
    let nu_min = target.iter().cloned().fold(f64::INFINITY, f64::min);
    if nu_min <= 0.0 {
        return Err(CoreError::EntropyUndefined { min: nu_min });
    }
    if !(h > 0.0) {
        return Err(CoreError::InvalidArgument("forward step must be positive".into()));
    }

    let m = start.len();
    let l_max = ((m - 1) / 3).min(crate::spectral::MAX_DEGREE);
    let basis = SphericalBasis::circle(l_max, m)?;
    // Grid samples sit at cell midpoints; evaluate the Fourier transforms
    // there by analyzing against shifted angles. The basis grid is the
    // left-edge grid, so rotate in and out by half a cell: a rotation
    // leaves both the heat multiplier and all norms unchanged.
    let coeffs0 = basis.analyze(start);
    let entropy_of = |values: &[f64]| -> Result<f64> {
        Ok(entropy(&basis, values, NegativePolicy::Clip(1e-14))?.0)
    };
    let e_nu = entropy_of(target)?;

    let flow = |t: f64| -> Result<CircularDistribution> {
        let flowed = basis.heat_semigroup(&coeffs0, t)?;
        CircularDistribution::from_grid(basis.synthesize(&flowed))
    };

    let mut rows = Vec::with_capacity(times.len());
    let mut max_violation = f64::NEG_INFINITY;
    for &t in times {
        let now = flow(t)?;
        let next = flow(t + h)?;
        let d_now = wasserstein_circle(&now, nu, WassersteinOrder::W2)?;
        let d_next = wasserstein_circle(&next, nu, WassersteinOrder::W2)?;
        let lhs = (d_next * d_next - d_now * d_now) / (2.0 * h);
        let CircularDistribution::Grid(now_values) = &now else {
            unreachable!()
        };
        let rhs = e_nu - entropy_of(now_values)?;
        rows.push(EviRow { time: t, lhs, rhs });
        max_violation = max_violation.max(lhs - rhs);
    }
    Ok(EviReport { rows, max_violation })
}

/// Report of the convolution-contraction sampling.
#[derive(Debug, Clone)]
pub struct ContractionReport {
    pub max_ratio: f64,
    pub pairs_evaluated: usize,
    pub pairs_skipped: usize,
    pub seed: u64,
}

/// Draws seeded random pairs of bump-mixture densities, convolves both
/// with the kernel, and records the worst ratio
/// `W_p(V * mu, V * nu) / W_p(mu, nu)`.
pub fn convolution_contraction_check(
    v: &ZonalCoefficients,
    pairs: usize,
    order: WassersteinOrder,
    seed: u64,
    grid: usize,
) -> Result<ContractionReport> {
    if v.dim() != 2 {
        return Err(CoreError::UnsupportedDimension(v.dim()));
    }
    // The check relies on the kernel being (numerically) a probability
    // density; reject a genuinely negative reconstruction.
    let kernel_min = crate::spectral::min_reconstruction(v, 2048);
    if kernel_min < -1e-6 {
        return Err(CoreError::InvalidArgument(format!(
            "kernel reconstruction dips to {kernel_min}; not a probability kernel"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_ratio: f64 = 0.0;
    let mut evaluated = 0;
    let mut skipped = 0;
    for _ in 0..pairs {
        let mu = random_bump_mixture(&mut rng, grid)?;
        let nu = random_bump_mixture(&mut rng, grid)?;
        let base = wasserstein_circle(&mu, &nu, order)?;
        if base < 1e-9 {
            skipped += 1;
            continue;
        }
        let mu_c = mu.convolve_on_grid(v, grid)?;
        let nu_c = nu.convolve_on_grid(v, grid)?;
        let blurred = wasserstein_circle(&mu_c, &nu_c, order)?;
        max_ratio = max_ratio.max(blurred / base);
        evaluated += 1;
    }
    Ok(ContractionReport {
        max_ratio,
        pairs_evaluated: evaluated,
        pairs_skipped: skipped,
        seed,
    })
}

/// Mixture of one to four bumps `exp(kappa cos(a - center))`, normalized.
pub fn random_bump_mixture(rng: &mut impl Rng, grid: usize) -> Result<CircularDistribution> {
    let bumps = rng.gen_range(1..=4);
    let params: Vec<(f64, f64, f64)> = (0..bumps)
        .map(|_| {
            (
                rng.gen_range(0.0..std::f64::consts::TAU),
                rng.gen_range(0.5..30.0),
                rng.gen_range(0.2..1.0),
            )
        })
        .collect();
    CircularDistribution::from_fn(grid, |a| {
        params
            .iter()
            .map(|&(center, kappa, weight)| weight * (kappa * ((a - center).cos() - 1.0)).exp())
            .sum::<f64>()
    })
}
