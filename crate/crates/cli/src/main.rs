//! `sphereflow` — experiment runner for the sphere aggregation toolkit.
//!
//! Subcommands solve the aggregation and aggregation-diffusion equations,
//! sweep the repulsion scale against the diffusion limit, run the
//! minimizing-movement scheme, simulate attention-style particle systems,
//! and execute the Monte-Carlo check suites. Outputs are deterministic
//! given the seed; every run writes a `manifest.json` listing its files
//! with content hashes.

// `!(x > 0.0)` deliberately treats NaN as out of range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod outputs;

use clap::{Args, Parser, Subcommand};
use config::{CommandKind, ExperimentConfig};
use error::CliError;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "sphereflow",
    version,
    about = "Spectral aggregation dynamics on spheres: solvers, sweeps, transport schemes, particles, and checks",
    after_help = "Run `sphereflow schema` for the CSV column documentation.\n\
                  The default output root is $SPHEREFLOW_OUTPUT_ROOT (falling back to ./out)."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default, Clone)]
struct CommonArgs {
    /// Configuration file (flat key-value format; flags override it).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default: `$SPHEREFLOW_OUTPUT_ROOT/<command>-seed<seed>`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for every random draw in the run.
    #[arg(long)]
    seed: Option<u64>,
    /// Also render SVG quick-look plots of the emitted tables.
    #[arg(long)]
    plot: bool,
    /// Write the canonical form of the effective config to this path.
    #[arg(long, value_name = "PATH")]
    emit_config: Option<PathBuf>,
    /// Sphere dimension parameter n (the sphere is `S^{n-1}`; default 2).
    #[arg(long)]
    n: Option<usize>,
    /// Spectral truncation degree (default 32).
    #[arg(long = "L")]
    l_max: Option<usize>,
    /// Grid size (default 128; must be at least 2L+8).
    #[arg(long = "M")]
    grid: Option<usize>,
}

#[derive(Args, Default, Clone)]
struct SolveArgs {
    /// Time step (default: stability-based).
    #[arg(long)]
    dt: Option<f64>,
    /// Horizon (default 1.0).
    #[arg(long = "T")]
    t_final: Option<f64>,
    /// Number of recorded diagnostic samples (default 100).
    #[arg(long)]
    samples: Option<usize>,
    /// Fixed interaction kernel spec (default attract:beta=1:alpha=1).
    #[arg(long)]
    kernel_w: Option<String>,
    /// Repulsion kernel spec (default heat:eps=0.1).
    #[arg(long)]
    kernel_v: Option<String>,
    /// Initial profile: `uniform | cosine:amp=<a> | vonmises:kappa=<k>[:center=<c>]`.
    #[arg(long)]
    rho0: Option<String>,
    /// Time integrator: rk4 | heun (default rk4).
    #[arg(long)]
    scheme: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the aggregation equation (fixed interaction + localized repulsion).
    SolveAe {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        solve: SolveArgs,
    },
    /// Solve the aggregation-diffusion equation (quadratic diffusion limit).
    SolveAde {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        solve: SolveArgs,
    },
    /// Sweep the repulsion scale and compare against the diffusion limit.
    SweepEpsilon {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        solve: SolveArgs,
        /// Comma-separated repulsion scales (default `0.2,0.1,0.05,0.025`).
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
        /// Kernel family: heat | exp (default heat).
        #[arg(long)]
        family: Option<String>,
        /// Concurrent solves (default 1).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Run the minimizing-movement (proximal) scheme on the circle.
    Jko {
        #[command(flatten)]
        common: CommonArgs,
        /// Proximal step size (default 1e-3).
        #[arg(long)]
        tau: Option<f64>,
        /// Number of steps (default 100).
        #[arg(long)]
        steps: Option<usize>,
        /// Inner stationarity tolerance (default 1e-7).
        #[arg(long)]
        inner_tol: Option<f64>,
        /// Inner iteration cap (default 600).
        #[arg(long)]
        max_inner: Option<usize>,
        /// Fixed interaction kernel spec.
        #[arg(long)]
        kernel_w: Option<String>,
        /// Repulsion kernel spec.
        #[arg(long)]
        kernel_v: Option<String>,
        /// Initial profile.
        #[arg(long)]
        rho0: Option<String>,
    },
    /// Simulate the multi-head particle dynamics on the sphere.
    Particles {
        #[command(flatten)]
        common: CommonArgs,
        /// Token count (default 32).
        #[arg(long)]
        d: Option<usize>,
        /// Semicolon-separated heads: `attract:beta=<b>[:alpha=<a>] | repulse:eps=<e>`.
        #[arg(long)]
        heads: Option<String>,
        /// Confine the initial sample to the hemisphere x1 > 0 (default true).
        #[arg(long)]
        hemisphere: Option<bool>,
        /// Time step (default: 0.02 capped by the stiffest head).
        #[arg(long)]
        dt: Option<f64>,
        /// Horizon (default 50 when unset in config? default 1.0 otherwise).
        #[arg(long = "T")]
        t_final: Option<f64>,
        /// Number of recorded snapshots (default 100).
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Run a Monte-Carlo check suite; exits 4 if any check fails.
    Checks {
        #[command(flatten)]
        common: CommonArgs,
        /// Suite: geometry | transport | admissibility | all.
        #[arg(long)]
        suite: Option<String>,
        /// Geometry sample count (default 100000).
        #[arg(long)]
        samples: Option<usize>,
        /// Transport pair count (default 100).
        #[arg(long)]
        pairs: Option<usize>,
    },
    /// Print the column documentation of every emitted CSV file.
    Schema,
}

fn load_base(kind: CommandKind, common: &CommonArgs) -> Result<ExperimentConfig, CliError> {
    let mut config = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Validation(format!("cannot read config '{}': {e}", path.display()))
            })?;
            let mut parsed = ExperimentConfig::parse(&text)?;
            parsed.command = kind;
            parsed
        }
        None => ExperimentConfig::defaults(kind),
    };
    if let Some(out) = &common.out {
        config.output = Some(out.clone());
    }
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    config.plot |= common.plot;
    if let Some(n) = common.n {
        config.n = n;
    }
    if let Some(l) = common.l_max {
        config.l_max = l;
    }
    if let Some(m) = common.grid {
        config.grid = m;
    }
    Ok(config)
}

fn apply_solve_args(config: &mut ExperimentConfig, solve: &SolveArgs) {
    if let Some(dt) = solve.dt {
        config.dt = Some(dt);
    }
    if let Some(t) = solve.t_final {
        config.t_final = t;
    }
    if let Some(s) = solve.samples {
        config.samples = s;
    }
    if let Some(w) = &solve.kernel_w {
        config.kernel_w = w.clone();
    }
    if let Some(v) = &solve.kernel_v {
        config.kernel_v = v.clone();
    }
    if let Some(r) = &solve.rho0 {
        config.rho0 = r.clone();
    }
    if let Some(s) = &solve.scheme {
        config.scheme = s.clone();
    }
}

fn build_config(cli: &Command) -> Result<(ExperimentConfig, Option<PathBuf>), CliError> {
    let (config, emit) = match cli {
        Command::SolveAe { common, solve } => {
            let mut c = load_base(CommandKind::SolveAe, common)?;
            apply_solve_args(&mut c, solve);
            (c, common.emit_config.clone())
        }
        Command::SolveAde { common, solve } => {
            let mut c = load_base(CommandKind::SolveAde, common)?;
            apply_solve_args(&mut c, solve);
            (c, common.emit_config.clone())
        }
        Command::SweepEpsilon {
            common,
            solve,
            eps,
            family,
            jobs,
        } => {
            let mut c = load_base(CommandKind::SweepEpsilon, common)?;
            apply_solve_args(&mut c, solve);
            if let Some(eps) = eps {
                c.eps_list = eps.clone();
            }
            if let Some(f) = family {
                c.family = f.clone();
            }
            if let Some(j) = jobs {
                c.jobs = *j;
            }
            (c, common.emit_config.clone())
        }
        Command::Jko {
            common,
            tau,
            steps,
            inner_tol,
            max_inner,
            kernel_w,
            kernel_v,
            rho0,
        } => {
            let mut c = load_base(CommandKind::Jko, common)?;
            if let Some(t) = tau {
                c.tau = *t;
            }
            if let Some(s) = steps {
                c.steps = *s;
            }
            if let Some(t) = inner_tol {
                c.inner_tol = *t;
            }
            if let Some(m) = max_inner {
                c.max_inner = *m;
            }
            if let Some(w) = kernel_w {
                c.kernel_w = w.clone();
            }
            if let Some(v) = kernel_v {
                c.kernel_v = v.clone();
            }
            if let Some(r) = rho0 {
                c.rho0 = r.clone();
            }
            (c, common.emit_config.clone())
        }
        Command::Particles {
            common,
            d,
            heads,
            hemisphere,
            dt,
            t_final,
            samples,
        } => {
            let mut c = load_base(CommandKind::Particles, common)?;
            c.n = common.n.unwrap_or(3.max(c.n));
            if let Some(d) = d {
                c.particle_count = *d;
            }
            if let Some(h) = heads {
                c.heads = h.clone();
            }
            if let Some(h) = hemisphere {
                c.hemisphere = *h;
            }
            if let Some(dt) = dt {
                c.dt = Some(*dt);
            }
            if let Some(t) = t_final {
                c.t_final = *t;
            }
            if let Some(s) = samples {
                c.samples = *s;
            }
            (c, common.emit_config.clone())
        }
        Command::Checks {
            common,
            suite,
            samples,
            pairs,
        } => {
            let mut c = load_base(CommandKind::Checks, common)?;
            if let Some(s) = suite {
                c.suite = s.clone();
            }
            if let Some(s) = samples {
                c.check_samples = *s;
            }
            if let Some(p) = pairs {
                c.pairs = *p;
            }
            (c, common.emit_config.clone())
        }
        Command::Schema => unreachable!("handled before config construction"),
    };
    Ok((config, emit))
}

const SCHEMA: &str = "\
CSV column documentation
========================

trajectory.csv          time,l0,...,lL
    Cosine/zonal coefficient block of the density against the zonal
    harmonics Z_l; the l0 column is the (conserved) mass. When a circle
    run carries sine modes above 1e-13, trajectory_sin.csv holds the
    companion block with header time,s1,...,sL.
trajectory_values.csv   time,theta_0,...,theta_{M-1}
    Grid samples of the density. For circle runs column theta_i sits at
    angle 2*pi*i/M; for zonal runs at the Gauss-Jacobi polar angles in
    node order (ascending t = cos(theta)).
energy.csv              time,F_double,F_sqrt,entropy,mass,min_density,conv_l2
    Free energy in both algebraic forms, entropy, mass, minimum grid
    density, and |sqrt(V)*rho|^2_{L^2} (|rho|^2 for diffusion runs).
sweep.csv               eps,l2_space_time,sup_gap,mean_residual,halvings,failed
    Space-time L^2 gap between the smoothed aggregation state and the
    diffusion-limit solve, its per-sample sup, and the time-averaged
    commutator residual for phi = cos(theta).
jko_trajectory.csv      time,l0,...,lL      (same shape as trajectory.csv)
jko_values.csv          time,theta_0,...    (cell-midpoint densities)
jko_report.csv          step,time,energy,w2_increment,inner_iterations
    Trailing comment lines carry the step-sum and time-continuity
    certificates.
particles.csv           time,particle_index,x1,...,xn
metrics.csv             time,min_inner,max_inner,energy
checks.json             {suite, records: [{name, max_ratio, samples, seed, bound, pass}]}
manifest.json           {command, seed, config, files: [{path, bytes, sha256}]}
";

fn main() -> ExitCode {
    let cli = Cli::parse();
    if matches!(cli.command, Command::Schema) {
        print!("{SCHEMA}");
        return ExitCode::SUCCESS;
    }
    let (config, emit) = match build_config(&cli.command) {
        Ok(pair) => pair,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(e.exit_code());
        }
    };
    if let Some(path) = emit {
        if let Err(e) = std::fs::write(&path, config.canonical()) {
            eprintln!("cannot write config to '{}': {e}", path.display());
            return ExitCode::from(2);
        }
    }
    match commands::run(&config) {
        Ok(manifest) => {
            println!("{}", manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
