//! Multi-head interacting particle dynamics on the sphere.
//!
//! Tokens are unit vectors driven by
//! `dx_i/dt = P_{T_{x_i}} (1/d) sum_m alpha_m sum_j exp(beta_m <x_i, x_j>) x_j`,
//! the gradient ascent of the pairwise interaction; with a single
//! attractive head the ensemble synchronizes, while a strongly localized
//! repulsive head (`beta = 1/eps`, weight `-alpha_eps`) keeps the cluster
//! spread out. The repulsive weight is normalized so that the mean-field
//! kernel of the head is exactly the exponential repulsion family.

use crate::error::{CoreError, Result};
use crate::geom::{tangent_project, SpherePoint, TangentVector};
use crate::spectral::{reconstruct_kernel, sqrt_kernel, QuadratureGrid, ZonalCoefficients};
use rand::Rng;

/// One self-attention head: weight and inverse temperature.
#[derive(Debug, Clone, Copy)]
pub struct Head {
    pub weight: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Default)]
pub struct HeadConfig {
    pub heads: Vec<Head>,
}

impl HeadConfig {
    pub fn attraction(weight: f64, beta: f64) -> Result<Self> {
        let mut config = HeadConfig::default();
        config.push(Head { weight, beta })?;
        Ok(config)
    }

    pub fn push(&mut self, head: Head) -> Result<()> {
        if !(head.beta > 0.0) {
            return Err(CoreError::InvalidArgument(format!(
                "head inverse temperature must be positive, got {}",
                head.beta
            )));
        }
        self.heads.push(head);
        Ok(())
    }
}

/// Normalization weight `alpha_eps = (int exp(<x0, x>/eps) d sigma)^{-1}`.
pub fn repulsion_normalization(n: usize, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(CoreError::InvalidArgument(format!(
            "repulsion scale must be positive, got {eps}"
        )));
    }
    let grid = QuadratureGrid::gauss_jacobi(n, 96)?;
    // Factor the peak out of the quadrature to dodge overflow at small eps.
    let scaled: f64 = grid.integrate(|t| ((t - 1.0) / eps).exp());
    Ok((-1.0 / eps).exp() / scaled)
}

/// The localized repulsive head at scale `eps`: `beta = 1/eps` with weight
/// `-alpha_eps`, so its mean-field kernel is minus the exponential
/// repulsion family.
pub fn repulsive_head(n: usize, eps: f64) -> Result<Head> {
    Ok(Head {
        weight: -repulsion_normalization(n, eps)?,
        beta: 1.0 / eps,
    })
}

/// A token ensemble: `d` unit vectors in `R^n`.
#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    points: Vec<SpherePoint>,
}

impl ParticleEnsemble {
    pub fn new(points: Vec<SpherePoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(CoreError::InvalidArgument("empty ensemble".into()));
        }
        let n = points[0].dim();
        if let Some(other) = points.iter().map(|p| p.dim()).find(|&d| d != n) {
            return Err(CoreError::DimensionMismatch { left: n, right: other });
        }
        Ok(ParticleEnsemble { points })
    }

    /// Seeded uniform sample on the sphere, optionally confined to the
    /// open hemisphere `x_1 > 0` (the setting of the cited well-posedness
    /// results).
    pub fn random(rng: &mut impl Rng, n: usize, d: usize, hemisphere: bool) -> Result<Self> {
        let points = (0..d)
            .map(|_| {
                if hemisphere {
                    crate::geom::sample::hemisphere_point(rng, n, 0.0)
                } else {
                    crate::geom::sample::uniform_point(rng, n)
                }
            })
            .collect();
        ParticleEnsemble::new(points)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    pub fn points(&self) -> &[SpherePoint] {
        &self.points
    }
}

/// Tangent velocities of the multi-head dynamics.
pub fn multihead_rhs(ensemble: &ParticleEnsemble, heads: &HeadConfig) -> Vec<TangentVector> {
    let d = ensemble.len() as f64;
    let n = ensemble.dim();
    ensemble
        .points()
        .iter()
        .map(|xi| {
            let mut drive = vec![0.0; n];
            for xj in ensemble.points() {
                let t = xi.dot(xj);
                let gain: f64 = heads
                    .heads
                    .iter()
                    .map(|h| h.weight * (h.beta * t).exp())
                    .sum();
                for (dc, &c) in drive.iter_mut().zip(xj.coords()) {
                    *dc += gain * c;
                }
            }
            for dc in drive.iter_mut() {
                *dc /= d;
            }
            tangent_project(xi, &drive).expect("dimensions agree by construction")
        })
        .collect()
}

/// Ensemble statistics: extreme pairwise inner products and the discrete
/// interaction energy `(1/2d^2) sum_ij U(<x_i, x_j>)` per head.
#[derive(Debug, Clone)]
pub struct ClusteringMetrics {
    pub min_pair_inner: f64,
    pub max_pair_inner: f64,
    /// Discrete energy contribution of each head (its kernel is
    /// `-(weight/beta) exp(beta t)`).
    pub energy_per_head: Vec<f64>,
    pub total_energy: f64,
}

pub fn clustering_metrics(
    ensemble: &ParticleEnsemble,
    heads: &HeadConfig,
) -> Result<ClusteringMetrics> {
    if ensemble.len() < 2 {
        return Err(CoreError::InvalidArgument(
            "clustering metrics need at least 2 particles".into(),
        ));
    }
    let d = ensemble.len();
    let mut min_inner = f64::INFINITY;
    let mut max_inner = f64::NEG_INFINITY;
    let mut energy = vec![0.0; heads.heads.len()];
    for (i, xi) in ensemble.points().iter().enumerate() {
        for (j, xj) in ensemble.points().iter().enumerate() {
            let t = xi.dot(xj);
            if i != j {
                min_inner = min_inner.min(t);
                max_inner = max_inner.max(t);
            }
            for (e, h) in energy.iter_mut().zip(&heads.heads) {
                *e += h.weight * -(1.0 / h.beta) * (h.beta * t).exp();
            }
        }
    }
    let scale = 1.0 / (2.0 * (d * d) as f64);
    for e in energy.iter_mut() {
        *e *= scale;
    }
    Ok(ClusteringMetrics {
        min_pair_inner: min_inner,
        max_pair_inner: max_inner,
        total_energy: energy.iter().sum(),
        energy_per_head: energy,
    })
}

/// Kernel-smoothed empirical density: at each evaluation point `y`,
/// `(1/d) sum_j sqrt_kernel(V)(<y, x_j>)`.
#[derive(Debug, Clone)]
pub struct SmoothedDensity {
    pub values: Vec<f64>,
    /// Whether the reconstructed square root stayed above `-1e-6` on a
    /// dense sample; a failure means the values may dip negative.
    pub sqrt_positivity_ok: bool,
}

pub fn smoothed_density(
    ensemble: &ParticleEnsemble,
    v: &ZonalCoefficients,
    eval_points: &[SpherePoint],
) -> Result<SmoothedDensity> {
    if v.dim() != ensemble.dim() {
        return Err(CoreError::DimensionMismatch {
            left: v.dim(),
            right: ensemble.dim(),
        });
    }
    let s = sqrt_kernel(v)?;
    let positivity = crate::spectral::min_reconstruction(&s, 2048);
    let d = ensemble.len() as f64;
    let values = eval_points
        .iter()
        .map(|y| {
            ensemble
                .points()
                .iter()
                .map(|x| reconstruct_kernel(&s, y.dot(x).clamp(-1.0, 1.0)))
                .sum::<f64>()
                / d
        })
        .collect();
    Ok(SmoothedDensity {
        values,
        sqrt_positivity_ok: positivity >= -1e-6,
    })
}

/// Recorded simulation snapshot.
#[derive(Debug, Clone)]
pub struct ParticleSnapshot {
    pub time: f64,
    pub ensemble: ParticleEnsemble,
    pub metrics: ClusteringMetrics,
}

#[derive(Debug, Clone)]
pub struct ParticleTrajectory {
    pub snapshots: Vec<ParticleSnapshot>,
}

impl ParticleTrajectory {
    pub fn final_snapshot(&self) -> &ParticleSnapshot {
        self.snapshots.last().expect("never empty")
    }
}

/// Integrates the multi-head dynamics with classical RK4 on the ambient
/// coordinates, renormalizing onto the sphere after each step when
/// requested. Snapshots are recorded every `record_every` steps.
pub fn simulate(
    initial: &ParticleEnsemble,
    heads: &HeadConfig,
    t_final: f64,
    dt: f64,
    renormalize: bool,
    record_every: usize,
) -> Result<ParticleTrajectory> {
    if !(dt > 0.0) || !(t_final > 0.0) {
        return Err(CoreError::InvalidArgument(format!(
            "time step and horizon must be positive (dt = {dt}, T = {t_final})"
        )));
    }
    let record_every = record_every.max(1);
    let steps = (t_final / dt).ceil() as usize;
    let dt = t_final / steps as f64;
    let n = initial.dim();

    // Flat ambient state for the integrator.
    let mut state: Vec<f64> = initial
        .points()
        .iter()
        .flat_map(|p| p.coords().iter().cloned())
        .collect();

    let ensemble_of = |state: &[f64]| -> Result<ParticleEnsemble> {
        let points = state
            .chunks(n)
            .map(|c| SpherePoint::new(c.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        ParticleEnsemble::new(points)
    };

    let rhs = |state: &[f64], time: f64| -> Result<Vec<f64>> {
        let ensemble = ensemble_of(state)?;
        let velocities = multihead_rhs(&ensemble, heads);
        let mut out = Vec::with_capacity(state.len());
        for v in velocities {
            out.extend_from_slice(v.components());
        }
        if out.iter().any(|x| !x.is_finite()) {
            return Err(CoreError::Instability {
                time,
                detail: "non-finite particle velocity".into(),
            });
        }
        Ok(out)
    };

    let mut snapshots = Vec::new();
    let record = |state: &[f64], time: f64, snapshots: &mut Vec<ParticleSnapshot>| -> Result<()> {
        let ensemble = ensemble_of(state)?;
        let metrics = clustering_metrics(&ensemble, heads)?;
        snapshots.push(ParticleSnapshot {
            time,
            ensemble,
            metrics,
        });
        Ok(())
    };
    if initial.len() >= 2 {
        record(&state, 0.0, &mut snapshots)?;
    }

    for step in 0..steps {
        let time = step as f64 * dt;
        let k1 = rhs(&state, time)?;
        let s2: Vec<f64> = state.iter().zip(&k1).map(|(x, k)| x + 0.5 * dt * k).collect();
        let k2 = rhs(&s2, time)?;
        let s3: Vec<f64> = state.iter().zip(&k2).map(|(x, k)| x + 0.5 * dt * k).collect();
        let k3 = rhs(&s3, time)?;
        let s4: Vec<f64> = state.iter().zip(&k3).map(|(x, k)| x + dt * k).collect();
        let k4 = rhs(&s4, time)?;
        for i in 0..state.len() {
            state[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if renormalize {
            for chunk in state.chunks_mut(n) {
                let r = chunk.iter().map(|c| c * c).sum::<f64>().sqrt();
                if !(r > 0.0) || !r.is_finite() {
                    return Err(CoreError::Instability {
                        time: (step + 1) as f64 * dt,
                        detail: "particle left the sphere".into(),
                    });
                }
                for c in chunk.iter_mut() {
                    *c /= r;
                }
            }
        }
        if initial.len() >= 2 && ((step + 1) % record_every == 0 || step + 1 == steps) {
            record(&state, (step + 1) as f64 * dt, &mut snapshots)?;
        }
    }

    if snapshots.is_empty() {
        // Single-particle runs still report the end state.
        let ensemble = ensemble_of(&state)?;
        snapshots.push(ParticleSnapshot {
            time: t_final,
            ensemble,
            metrics: ClusteringMetrics {
                min_pair_inner: 1.0,
                max_pair_inner: 1.0,
                energy_per_head: vec![0.0; heads.heads.len()],
                total_energy: 0.0,
            },
        });
    }
    Ok(ParticleTrajectory { snapshots })
}
