//! Command dispatch: each run validates its configuration, produces its
//! artifacts deterministically from the seed, and writes a manifest.

use crate::config::{CommandKind, ExperimentConfig};
use crate::error::{CliError, Result};
use crate::outputs::{self, ArtifactSet};
use sphereflow_core::kernels::KernelSpec;
use sphereflow_core::ot::{
    checks, jko_trajectory, CircularDistribution, InteractionEnergy, JkoConfig, WassersteinOrder,
};
use sphereflow_core::particles::{
    repulsive_head, simulate, Head, HeadConfig, ParticleEnsemble,
};
use sphereflow_core::pde::{
    compare_to_ade, solve, DensityState, Scheme, SolverConfig, SphericalBasis, Trajectory,
};
use sphereflow_core::spectral::{check_admissibility, check_sqrt_positivity, ZonalCoefficients};
use std::fmt::Write as _;
use std::path::PathBuf;

/// Initial-profile grammar: `uniform`, `cosine:amp=<a>`,
/// `vonmises:kappa=<k>[:center=<c>]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    Uniform,
    Cosine { amp: f64 },
    VonMises { kappa: f64, center: f64 },
}

impl Profile {
    pub fn eval(&self, theta: f64) -> f64 {
        match *self {
            Profile::Uniform => 1.0,
            Profile::Cosine { amp } => 1.0 + amp * theta.cos(),
            Profile::VonMises { kappa, center } => (kappa * ((theta - center).cos() - 1.0)).exp(),
        }
    }
}

pub fn parse_profile(s: &str) -> Result<Profile> {
    let bad = |m: String| CliError::Validation(m);
    let mut parts = s.trim().split(':');
    let kind = parts.next().unwrap_or("");
    let mut fields = std::collections::BTreeMap::new();
    for p in parts {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| bad(format!("profile field '{p}' is not key=value")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| bad(format!("cannot parse profile field '{p}'")))?;
        fields.insert(k.trim().to_string(), v);
    }
    let profile = match kind {
        "uniform" => Profile::Uniform,
        "cosine" => {
            let amp = fields
                .remove("amp")
                .ok_or_else(|| bad(format!("profile '{s}' is missing 'amp='")))?;
            if amp.abs() >= 1.0 {
                return Err(bad(format!("cosine amplitude {amp} must satisfy |amp| < 1")));
            }
            Profile::Cosine { amp }
        }
        "vonmises" => {
            let kappa = fields
                .remove("kappa")
                .ok_or_else(|| bad(format!("profile '{s}' is missing 'kappa='")))?;
            if kappa <= 0.0 {
                return Err(bad(format!("vonmises kappa {kappa} must be positive")));
            }
            let center = fields.remove("center").unwrap_or(0.0);
            Profile::VonMises { kappa, center }
        }
        other => return Err(bad(format!("unknown profile kind '{other}'"))),
    };
    if let Some(k) = fields.keys().next() {
        return Err(bad(format!("unknown profile field '{k}' in '{s}'")));
    }
    Ok(profile)
}

/// Particle-head grammar: semicolon-separated
/// `attract:beta=<b>[:alpha=<a>]` and `repulse:eps=<e>` items.
pub fn parse_heads(n: usize, s: &str) -> Result<HeadConfig> {
    let mut config = HeadConfig::default();
    for item in s.split(';') {
        let item = item.trim();
        if item.is_empty() {
            continue;
        }
        match KernelSpec::parse(item) {
            Ok(KernelSpec::Attraction { beta, alpha }) => {
                config
                    .push(Head { weight: alpha, beta })
                    .map_err(CliError::from)?;
            }
            _ => {
                // `repulse:eps=<e>` is particle-specific.
                let Some(rest) = item.strip_prefix("repulse:eps=") else {
                    return Err(CliError::Validation(format!(
                        "head '{item}' is neither attract:beta=..[:alpha=..] nor repulse:eps=.."
                    )));
                };
                let eps: f64 = rest.trim().parse().map_err(|_| {
                    CliError::Validation(format!("cannot parse repulse scale '{rest}'"))
                })?;
                config
                    .push(repulsive_head(n, eps).map_err(CliError::from)?)
                    .map_err(CliError::from)?;
            }
        }
    }
    if config.heads.is_empty() {
        return Err(CliError::Validation("head list is empty".into()));
    }
    Ok(config)
}

fn output_root(config: &ExperimentConfig) -> PathBuf {
    if let Some(out) = &config.output {
        return out.clone();
    }
    let base = std::env::var_os("SPHEREFLOW_OUTPUT_ROOT")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("out"));
    base.join(format!("{}-seed{}", config.command.as_str(), config.seed))
}

fn kernel_csv(c: &ZonalCoefficients) -> Result<String> {
    let mut buf = Vec::new();
    sphereflow_core::spectral::write_coeffs_to(&mut buf, c).map_err(CliError::from)?;
    String::from_utf8(buf).map_err(|e| CliError::Numerical(e.to_string()))
}

fn build_kernel(spec: &str, n: usize, l_max: usize) -> Result<Option<ZonalCoefficients>> {
    KernelSpec::parse(spec)
        .map_err(CliError::from)?
        .build(n, l_max)
        .map_err(CliError::from)
}

fn solver_config(config: &ExperimentConfig, rho0_inf: f64) -> SolverConfig {
    let dt = config
        .dt
        .unwrap_or_else(|| SolverConfig::suggested_dt(config.n, config.l_max, rho0_inf));
    let total_steps = (config.t_final / dt).ceil().max(1.0) as usize;
    SolverConfig {
        l_max: config.l_max,
        grid_size: config.grid,
        dt,
        t_final: config.t_final,
        scheme: if config.scheme == "heun" { Scheme::Heun } else { Scheme::Rk4 },
        diagnostics_every: (total_steps / config.samples).max(1),
        clip_negative: true,
    }
}

fn run_pde_solve(
    basis: &SphericalBasis,
    config: &ExperimentConfig,
    w: Option<&ZonalCoefficients>,
    v: Option<&ZonalCoefficients>,
) -> Result<Trajectory> {
    let profile = parse_profile(&config.rho0)?;
    let initial =
        DensityState::normalized_from_fn(basis, |a| profile.eval(a)).map_err(CliError::from)?;
    let solver = solver_config(config, initial.max_value());
    solve(basis, &initial, w, v, &solver)
        .map_err(|e| CliError::Numerical(format!("{e} (after {} halvings)", e.partial.halvings)))
}

fn run_solve(config: &ExperimentConfig, ade: bool) -> Result<PathBuf> {
    let basis = SphericalBasis::for_dimension(config.n, config.l_max, config.grid)
        .map_err(CliError::from)?;
    let w = build_kernel(&config.kernel_w, config.n, config.l_max)?;
    let v = if ade {
        None
    } else {
        let v = build_kernel(&config.kernel_v, config.n, config.l_max)?;
        if v.is_none() {
            return Err(CliError::Validation(
                "solve-ae needs a repulsion kernel; pass --kernel-v or use solve-ade".into(),
            ));
        }
        v
    };
    let traj = run_pde_solve(&basis, config, w.as_ref(), v.as_ref())?;

    let mut artifacts = ArtifactSet::new(output_root(config))?;
    outputs::write_trajectory(&mut artifacts, "", &basis, &traj)?;
    // Kernel tables round-trip through `table:path=` specs.
    if let Some(w) = &w {
        artifacts.write("kernel_w.csv", &kernel_csv(w)?)?;
    }
    if let Some(v) = &v {
        artifacts.write("kernel_v.csv", &kernel_csv(v)?)?;
    }
    if config.plot {
        let energy: Vec<(f64, f64)> = traj.report.rows.iter().map(|r| (r.time, r.f_double)).collect();
        let entropy: Vec<(f64, f64)> = traj.report.rows.iter().map(|r| (r.time, r.entropy)).collect();
        let svg = outputs::line_chart_svg(
            "free energy and entropy",
            &[("F", energy), ("entropy", entropy)],
            false,
        );
        artifacts.write("energy.svg", &svg)?;
    }
    artifacts.finalize_manifest(config.command.as_str(), config.seed, &config.canonical())
}

fn run_sweep(config: &ExperimentConfig) -> Result<PathBuf> {
    if config.n != 2 {
        return Err(CliError::Validation(
            "the kernel-width sweep is a circle experiment (n = 2)".into(),
        ));
    }
    let basis = SphericalBasis::circle(config.l_max, config.grid).map_err(CliError::from)?;
    let w = build_kernel(&config.kernel_w, 2, config.l_max)?;
    let l_max = config.l_max;
    let family: Box<dyn Fn(f64) -> sphereflow_core::Result<ZonalCoefficients> + Sync> =
        match config.family.as_str() {
            "heat" => {
                Box::new(move |eps| sphereflow_core::kernels::heat_kernel_coeffs(2, eps, l_max))
            }
            "exp" => Box::new(move |eps| {
                sphereflow_core::kernels::exponential_kernel_coeffs(2, eps, l_max)
            }),
            other => {
                return Err(CliError::Validation(format!(
                    "unknown kernel family '{other}' (expected heat|exp)"
                )))
            }
        };

    let ade = run_pde_solve(&basis, config, w.as_ref(), None)?;

    // Aggregation solves run concurrently up to the job bound.
    struct Row {
        eps: f64,
        traj: std::result::Result<Trajectory, String>,
    }
    let mut rows: Vec<Row> = Vec::new();
    for wave in config.eps_list.chunks(config.jobs) {
        let mut wave_rows: Vec<Row> = Vec::new();
        std::thread::scope(|scope| {
            let handles: Vec<_> = wave
                .iter()
                .map(|&eps| {
                    let basis = &basis;
                    let w = w.as_ref();
                    let family = &family;
                    scope.spawn(move || {
                        let v = family(eps).map_err(|e| e.to_string())?;
                        let profile = parse_profile(&config.rho0).map_err(|e| e.to_string())?;
                        let initial = DensityState::normalized_from_fn(basis, |a| profile.eval(a))
                            .map_err(|e| e.to_string())?;
                        let solver = solver_config(config, initial.max_value());
                        solve(basis, &initial, w, Some(&v), &solver).map_err(|e| e.to_string())
                    })
                })
                .collect();
            for (&eps, handle) in wave.iter().zip(handles) {
                wave_rows.push(Row {
                    eps,
                    traj: handle.join().expect("sweep worker panicked"),
                });
            }
        });
        rows.extend(wave_rows);
    }

    let phi_deriv = |a: f64| -a.sin();
    let mut artifacts = ArtifactSet::new(output_root(config))?;
    let mut table = String::from("eps,l2_space_time,sup_gap,mean_residual,halvings,failed\n");
    let mut err_points = Vec::new();
    for row in &rows {
        match &row.traj {
            Ok(traj) => {
                let v = family(row.eps).map_err(CliError::from)?;
                let stats = compare_to_ade(&basis, traj, &ade, &v, Some(&phi_deriv))
                    .map_err(CliError::from)?;
                let _ = writeln!(
                    table,
                    "{},{},{},{},{},false",
                    outputs::fmt_f64(row.eps),
                    outputs::fmt_f64(stats.l2_space_time),
                    outputs::fmt_f64(stats.sup_gap),
                    outputs::fmt_f64(stats.mean_residual),
                    traj.halvings
                );
                err_points.push((row.eps, stats.l2_space_time));
                outputs::write_trajectory(
                    &mut artifacts,
                    &format!("eps_{}", row.eps),
                    &basis,
                    traj,
                )?;
            }
            Err(msg) => {
                let _ = writeln!(
                    table,
                    "{},nan,nan,nan,0,true # {msg}",
                    outputs::fmt_f64(row.eps)
                );
            }
        }
    }
    artifacts.write("sweep.csv", &table)?;
    outputs::write_trajectory(&mut artifacts, "ade", &basis, &ade)?;
    if config.plot {
        let svg = outputs::line_chart_svg(
            "space-time gap vs kernel scale (log y)",
            &[("e(eps)", err_points)],
            true,
        );
        artifacts.write("sweep.svg", &svg)?;
    }
    artifacts.finalize_manifest(config.command.as_str(), config.seed, &config.canonical())
}

fn run_jko(config: &ExperimentConfig) -> Result<PathBuf> {
    if config.n != 2 {
        return Err(CliError::Validation(
            "the minimizing-movement scheme runs on the circle (n = 2)".into(),
        ));
    }
    let w = build_kernel(&config.kernel_w, 2, config.l_max)?;
    let v = build_kernel(&config.kernel_v, 2, config.l_max)?;
    let energy = InteractionEnergy::new(config.grid, config.l_max, w.as_ref(), v.as_ref())
        .map_err(CliError::from)?;
    let profile = parse_profile(&config.rho0)?;
    let rho0 = CircularDistribution::from_fn(config.grid, |a| profile.eval(a))
        .map_err(CliError::from)?;
    let jko_config = JkoConfig {
        tau: config.tau,
        steps: config.steps,
        inner_tol: config.inner_tol,
        max_inner: config.max_inner,
    };
    let traj = jko_trajectory(&rho0, &jko_config, &energy).map_err(CliError::from)?;

    let mut artifacts = ArtifactSet::new(output_root(config))?;
    outputs::write_jko(&mut artifacts, &traj, config.tau, config.l_max)?;
    if let Some(w) = &w {
        artifacts.write("kernel_w.csv", &kernel_csv(w)?)?;
    }
    if let Some(v) = &v {
        artifacts.write("kernel_v.csv", &kernel_csv(v)?)?;
    }
    if config.plot {
        let energy_pts: Vec<(f64, f64)> = traj
            .energies
            .iter()
            .enumerate()
            .map(|(k, &e)| (k as f64 * config.tau, e))
            .collect();
        let svg = outputs::line_chart_svg("energy along the scheme", &[("F", energy_pts)], false);
        artifacts.write("jko_energy.svg", &svg)?;
    }
    artifacts.finalize_manifest(config.command.as_str(), config.seed, &config.canonical())
}

fn run_particles(config: &ExperimentConfig) -> Result<PathBuf> {
    let heads = parse_heads(config.n, &config.heads)?;
    let mut rng = seeded_rng(config.seed);
    let ensemble =
        ParticleEnsemble::random(&mut rng, config.n, config.particle_count, config.hemisphere)
            .map_err(CliError::from)?;
    let max_beta = heads
        .heads
        .iter()
        .map(|h| h.beta)
        .fold(1.0f64, f64::max);
    let dt = config.dt.unwrap_or_else(|| (0.02f64).min(0.04 / max_beta));
    let steps = (config.t_final / dt).ceil() as usize;
    let record_every = (steps / config.samples).max(1);
    let traj = simulate(&ensemble, &heads, config.t_final, dt, true, record_every)
        .map_err(CliError::from)?;

    let mut artifacts = ArtifactSet::new(output_root(config))?;
    outputs::write_particles(&mut artifacts, &traj)?;
    if config.plot {
        let min_inner: Vec<(f64, f64)> = traj
            .snapshots
            .iter()
            .map(|s| (s.time, s.metrics.min_pair_inner))
            .collect();
        let energy: Vec<(f64, f64)> = traj
            .snapshots
            .iter()
            .map(|s| (s.time, s.metrics.total_energy))
            .collect();
        let svg = outputs::line_chart_svg(
            "clustering metrics",
            &[("min inner", min_inner), ("energy", energy)],
            false,
        );
        artifacts.write("metrics.svg", &svg)?;
    }
    artifacts.finalize_manifest(config.command.as_str(), config.seed, &config.canonical())
}

fn seeded_rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

struct CheckRecord {
    name: String,
    max_ratio: f64,
    samples: usize,
    seed: u64,
    bound: f64,
    pass: bool,
}

fn run_checks(config: &ExperimentConfig) -> Result<PathBuf> {
    let mut records: Vec<CheckRecord> = Vec::new();
    let suite = config.suite.as_str();

    if suite == "geometry" || suite == "all" {
        for (i, n) in [3usize, 5].into_iter().enumerate() {
            let seed = config.seed.wrapping_add(i as u64);
            let rep = sphereflow_core::geom::divergence_check(n, config.check_samples, seed)
                .map_err(CliError::from)?;
            records.push(CheckRecord {
                name: format!("geodesic-divergence-s{}", n - 1),
                max_ratio: rep.max_ratio,
                samples: rep.samples,
                seed,
                bound: 3.0,
                pass: rep.max_ratio <= 3.0,
            });
            records.push(CheckRecord {
                name: format!("geodesic-divergence-s{}-parallel-case", n - 1),
                max_ratio: rep.parallel_case_max_dev,
                samples: rep.samples / 16,
                seed,
                bound: 1e-9,
                pass: rep.parallel_case_max_dev <= 1e-9,
            });
        }
    }

    if suite == "transport" || suite == "all" {
        let v = sphereflow_core::kernels::heat_kernel_coeffs(2, 0.1, 42)
            .map_err(CliError::from)?;
        for (order, name) in [(WassersteinOrder::W2, "w2"), (WassersteinOrder::W1, "w1")] {
            let rep = checks::convolution_contraction_check(
                &v,
                config.pairs,
                order,
                config.seed,
                config.grid,
            )
            .map_err(CliError::from)?;
            records.push(CheckRecord {
                name: format!("convolution-contraction-{name}"),
                max_ratio: rep.max_ratio,
                samples: rep.pairs_evaluated,
                seed: config.seed,
                bound: 3.0,
                pass: rep.max_ratio <= 3.0,
            });
        }
        let m = config.grid;
        let rho0 = CircularDistribution::from_fn(m, |a| 1.0 + 0.8 * a.cos())
            .map_err(CliError::from)?;
        let nu = CircularDistribution::from_grid(vec![1.0; m]).map_err(CliError::from)?;
        let times: Vec<f64> = (0..=10).map(|k| 0.05 * k as f64).collect();
        let evi = checks::evi_check(&rho0, &nu, &times, 1e-3).map_err(CliError::from)?;
        records.push(CheckRecord {
            name: "heat-flow-evi-violation".into(),
            max_ratio: evi.max_violation,
            samples: times.len(),
            seed: config.seed,
            bound: 1e-3,
            pass: evi.max_violation <= 1e-3,
        });
    }

    if suite == "admissibility" || suite == "all" {
        let eps_list = [0.5, 0.2, 0.1, 0.05];
        let l_max = 64;
        for n in [2usize, 3] {
            for family_name in ["heat", "exp"] {
                let family = |eps: f64| -> sphereflow_core::Result<ZonalCoefficients> {
                    if family_name == "heat" {
                        sphereflow_core::kernels::heat_kernel_coeffs(n, eps, l_max)
                    } else {
                        sphereflow_core::kernels::exponential_kernel_coeffs(n, eps, l_max)
                    }
                };
                let rep = check_admissibility(family, &eps_list, l_max, 1.0)
                    .map_err(CliError::from)?;
                let mut min_sqrt = f64::INFINITY;
                for &eps in &eps_list {
                    min_sqrt = min_sqrt
                        .min(check_sqrt_positivity(&family(eps).unwrap(), 4096)
                            .map_err(CliError::from)?);
                }
                records.push(CheckRecord {
                    name: format!("admissibility-{family_name}-n{n}"),
                    max_ratio: rep
                        .per_eps
                        .iter()
                        .map(|e| e.max_coeff)
                        .fold(0.0f64, f64::max),
                    samples: eps_list.len(),
                    seed: config.seed,
                    bound: 1.0 + 1e-12,
                    pass: rep.all_pass() && min_sqrt >= -1e-6,
                });
            }
        }
    }

    if records.is_empty() {
        return Err(CliError::Validation(format!("suite '{suite}' selected no checks")));
    }

    let json_records: Vec<serde_json::Value> = records
        .iter()
        .map(|r| {
            serde_json::json!({
                "name": r.name,
                "max_ratio": r.max_ratio,
                "samples": r.samples,
                "seed": r.seed,
                "bound": r.bound,
                "pass": r.pass,
            })
        })
        .collect();
    let payload = serde_json::json!({
        "suite": suite,
        "records": json_records,
    });

    let mut artifacts = ArtifactSet::new(output_root(config))?;
    artifacts.write("checks.json", &serde_json::to_string_pretty(&payload).unwrap())?;
    let manifest =
        artifacts.finalize_manifest(config.command.as_str(), config.seed, &config.canonical())?;

    let failures: Vec<&CheckRecord> = records.iter().filter(|r| !r.pass).collect();
    if !failures.is_empty() {
        let names: Vec<&str> = failures.iter().map(|r| r.name.as_str()).collect();
        return Err(CliError::CheckFailed(format!(
            "{} of {} checks failed: {}",
            failures.len(),
            records.len(),
            names.join(", ")
        )));
    }
    Ok(manifest)
}

/// Runs a validated config and returns the manifest path.
pub fn run(config: &ExperimentConfig) -> Result<PathBuf> {
    config.validate()?;
    match config.command {
        CommandKind::SolveAe => run_solve(config, false),
        CommandKind::SolveAde => run_solve(config, true),
        CommandKind::SweepEpsilon => run_sweep(config),
        CommandKind::Jko => run_jko(config),
        CommandKind::Particles => run_particles(config),
        CommandKind::Checks => run_checks(config),
    }
}
