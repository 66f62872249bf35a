//! Experiment configuration: a flat key-value format with section headers,
//! a canonical serializer, and strict (unknown keys rejected) parsing.
//!
//! Files look like
//!
//! ```text
//! [experiment]
//! command = sweep-epsilon
//! seed = 7
//! [discretization]
//! n = 2
//! l_max = 32
//! ```
//!
//! Command-line flags override file values field by field.

use crate::error::{CliError, Result};
use std::fmt::Write as _;
use std::path::PathBuf;

#[derive(Debug, Clone, PartialEq, Eq, Copy)]
pub enum CommandKind {
    SolveAe,
    SolveAde,
    SweepEpsilon,
    Jko,
    Particles,
    Checks,
}

impl CommandKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CommandKind::SolveAe => "solve-ae",
            CommandKind::SolveAde => "solve-ade",
            CommandKind::SweepEpsilon => "sweep-epsilon",
            CommandKind::Jko => "jko",
            CommandKind::Particles => "particles",
            CommandKind::Checks => "checks",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "solve-ae" => CommandKind::SolveAe,
            "solve-ade" => CommandKind::SolveAde,
            "sweep-epsilon" => CommandKind::SweepEpsilon,
            "jko" => CommandKind::Jko,
            "particles" => CommandKind::Particles,
            "checks" => CommandKind::Checks,
            other => {
                return Err(CliError::Validation(format!("unknown command '{other}'")));
            }
        })
    }
}

/// Everything a run needs; optional fields fall back to per-command
/// defaults at dispatch time.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: CommandKind,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub jobs: usize,
    pub plot: bool,

    // [discretization]
    pub n: usize,
    pub l_max: usize,
    pub grid: usize,

    // [time]
    pub dt: Option<f64>, // None = stability-based choice
    pub t_final: f64,
    pub samples: usize,
    pub scheme: String,

    // [kernels]
    pub kernel_w: String,
    pub kernel_v: String,
    pub family: String,
    pub eps_list: Vec<f64>,
    pub rho0: String,

    // [jko]
    pub tau: f64,
    pub steps: usize,
    pub inner_tol: f64,
    pub max_inner: usize,

    // [particles]
    pub particle_count: usize,
    pub heads: String,
    pub hemisphere: bool,

    // [checks]
    pub suite: String,
    pub check_samples: usize,
    pub pairs: usize,
}

impl ExperimentConfig {
    pub fn defaults(command: CommandKind) -> Self {
        ExperimentConfig {
            command,
            seed: 0,
            output: None,
            jobs: 1,
            plot: false,
            n: 2,
            l_max: 32,
            grid: 128,
            dt: None,
            t_final: 1.0,
            samples: 100,
            scheme: "rk4".into(),
            kernel_w: "attract:beta=1:alpha=1".into(),
            kernel_v: "heat:eps=0.1".into(),
            family: "heat".into(),
            eps_list: vec![0.2, 0.1, 0.05, 0.025],
            rho0: "cosine:amp=0.5".into(),
            tau: 1e-3,
            steps: 100,
            inner_tol: 1e-7,
            max_inner: 600,
            particle_count: 32,
            heads: "attract:beta=1:alpha=1".into(),
            hemisphere: true,
            suite: "all".into(),
            check_samples: 100_000,
            pairs: 100,
        }
    }

    /// Validates ranges that every command shares.
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| -> Result<()> {
            if !(v > 0.0) || !v.is_finite() {
                return Err(CliError::Validation(format!(
                    "field '{name}' must be positive and finite, got {v}"
                )));
            }
            Ok(())
        };
        if self.n < 2 {
            return Err(CliError::Validation(format!("field 'n' must be >= 2, got {}", self.n)));
        }
        if self.l_max == 0 || self.l_max > 256 {
            return Err(CliError::Validation(format!(
                "field 'l_max' must be in 1..=256, got {}",
                self.l_max
            )));
        }
        if self.grid < 2 * self.l_max + 8 {
            return Err(CliError::Validation(format!(
                "field 'grid' must be at least 2*l_max+8 = {}, got {}",
                2 * self.l_max + 8,
                self.grid
            )));
        }
        if let Some(dt) = self.dt {
            positive("dt", dt)?;
        }
        positive("t_final", self.t_final)?;
        positive("tau", self.tau)?;
        positive("inner_tol", self.inner_tol)?;
        match self.scheme.as_str() {
            "rk4" | "heun" => {}
            other => {
                return Err(CliError::Validation(format!(
                    "unknown scheme '{other}' (expected rk4|heun)"
                )))
            }
        }
        if self.samples == 0 || self.steps == 0 || self.max_inner == 0 {
            return Err(CliError::Validation(
                "fields 'samples', 'steps', and 'max_inner' must be >= 1".into(),
            ));
        }
        if self.command == CommandKind::SweepEpsilon && self.eps_list.is_empty() {
            return Err(CliError::Validation("field 'eps_list' must not be empty".into()));
        }
        for &eps in &self.eps_list {
            positive("eps_list entry", eps)?;
        }
        if self.particle_count < 1 || self.particle_count > 4096 {
            return Err(CliError::Validation(format!(
                "field 'd' must be in 1..=4096, got {}",
                self.particle_count
            )));
        }
        if self.jobs == 0 {
            return Err(CliError::Validation("field 'jobs' must be >= 1".into()));
        }
        // Kernel specs must at least parse.
        for (name, s) in [("w", &self.kernel_w), ("v", &self.kernel_v)] {
            sphereflow_core::kernels::KernelSpec::parse(s).map_err(|e| {
                CliError::Validation(format!("kernel field '{name}' = '{s}': {e}"))
            })?;
        }
        crate::commands::parse_profile(&self.rho0)?;
        crate::commands::parse_heads(self.n, &self.heads)?;
        match self.suite.as_str() {
            "geometry" | "transport" | "admissibility" | "all" => {}
            other => {
                return Err(CliError::Validation(format!(
                    "unknown check suite '{other}' (expected geometry|transport|admissibility|all)"
                )))
            }
        }
        Ok(())
    }

    /// Canonical text form; `parse` of this string reproduces the config
    /// exactly.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[experiment]");
        let _ = writeln!(s, "command = {}", self.command.as_str());
        let _ = writeln!(s, "seed = {}", self.seed);
        if let Some(out) = &self.output {
            let _ = writeln!(s, "output = {}", out.display());
        }
        let _ = writeln!(s, "jobs = {}", self.jobs);
        let _ = writeln!(s, "plot = {}", self.plot);
        let _ = writeln!(s, "[discretization]");
        let _ = writeln!(s, "n = {}", self.n);
        let _ = writeln!(s, "l_max = {}", self.l_max);
        let _ = writeln!(s, "grid = {}", self.grid);
        let _ = writeln!(s, "[time]");
        match self.dt {
            Some(dt) => {
                let _ = writeln!(s, "dt = {dt}");
            }
            None => {
                let _ = writeln!(s, "dt = auto");
            }
        }
        let _ = writeln!(s, "t_final = {}", self.t_final);
        let _ = writeln!(s, "samples = {}", self.samples);
        let _ = writeln!(s, "scheme = {}", self.scheme);
        let _ = writeln!(s, "[kernels]");
        let _ = writeln!(s, "w = {}", self.kernel_w);
        let _ = writeln!(s, "v = {}", self.kernel_v);
        let _ = writeln!(s, "family = {}", self.family);
        let eps: Vec<String> = self.eps_list.iter().map(|e| e.to_string()).collect();
        let _ = writeln!(s, "eps_list = {}", eps.join(","));
        let _ = writeln!(s, "rho0 = {}", self.rho0);
        let _ = writeln!(s, "[jko]");
        let _ = writeln!(s, "tau = {}", self.tau);
        let _ = writeln!(s, "steps = {}", self.steps);
        let _ = writeln!(s, "inner_tol = {}", self.inner_tol);
        let _ = writeln!(s, "max_inner = {}", self.max_inner);
        let _ = writeln!(s, "[particles]");
        let _ = writeln!(s, "d = {}", self.particle_count);
        let _ = writeln!(s, "heads = {}", self.heads);
        let _ = writeln!(s, "hemisphere = {}", self.hemisphere);
        let _ = writeln!(s, "[checks]");
        let _ = writeln!(s, "suite = {}", self.suite);
        let _ = writeln!(s, "samples = {}", self.check_samples);
        let _ = writeln!(s, "pairs = {}", self.pairs);
        s
    }

    /// Strict parse of the canonical format. Unknown sections or keys are
    /// rejected with their line numbers.
    pub fn parse(text: &str) -> Result<Self> {
        let mut command = None;
        let mut config = ExperimentConfig::defaults(CommandKind::Checks);
        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let lineno = idx + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                match section.as_str() {
                    "experiment" | "discretization" | "time" | "kernels" | "jko"
                    | "particles" | "checks" => {}
                    other => {
                        return Err(CliError::Validation(format!(
                            "line {lineno}: unknown section '[{other}]'"
                        )))
                    }
                }
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Validation(format!(
                    "line {lineno}: expected 'key = value', got '{line}'"
                )));
            };
            let key = key.trim();
            let value = value.trim();
            let bad_key = || {
                CliError::Validation(format!(
                    "line {lineno}: unknown key '{key}' in section '[{section}]'"
                ))
            };
            let parse_num = |what: &str| -> Result<f64> {
                value.parse::<f64>().map_err(|_| {
                    CliError::Validation(format!(
                        "line {lineno}: cannot parse {what} value '{value}'"
                    ))
                })
            };
            let parse_usize = |what: &str| -> Result<usize> {
                value.parse::<usize>().map_err(|_| {
                    CliError::Validation(format!(
                        "line {lineno}: cannot parse {what} value '{value}'"
                    ))
                })
            };
            let parse_bool = |what: &str| -> Result<bool> {
                value.parse::<bool>().map_err(|_| {
                    CliError::Validation(format!(
                        "line {lineno}: cannot parse {what} value '{value}' (true/false)"
                    ))
                })
            };
            match (section.as_str(), key) {
                ("experiment", "command") => command = Some(CommandKind::parse(value)?),
                ("experiment", "seed") => config.seed = parse_usize("seed")? as u64,
                ("experiment", "output") => config.output = Some(PathBuf::from(value)),
                ("experiment", "jobs") => config.jobs = parse_usize("jobs")?,
                ("experiment", "plot") => config.plot = parse_bool("plot")?,
                ("discretization", "n") => config.n = parse_usize("n")?,
                ("discretization", "l_max") => config.l_max = parse_usize("l_max")?,
                ("discretization", "grid") => config.grid = parse_usize("grid")?,
                ("time", "dt") => {
                    config.dt = if value == "auto" {
                        None
                    } else {
                        Some(parse_num("dt")?)
                    }
                }
                ("time", "t_final") => config.t_final = parse_num("t_final")?,
                ("time", "samples") => config.samples = parse_usize("samples")?,
                ("time", "scheme") => config.scheme = value.to_string(),
                ("kernels", "w") => config.kernel_w = value.to_string(),
                ("kernels", "v") => config.kernel_v = value.to_string(),
                ("kernels", "family") => config.family = value.to_string(),
                ("kernels", "eps_list") => {
                    config.eps_list = value
                        .split(',')
                        .map(|p| {
                            p.trim().parse::<f64>().map_err(|_| {
                                CliError::Validation(format!(
                                    "line {lineno}: bad eps_list entry '{p}'"
                                ))
                            })
                        })
                        .collect::<Result<Vec<_>>>()?
                }
                ("kernels", "rho0") => config.rho0 = value.to_string(),
                ("jko", "tau") => config.tau = parse_num("tau")?,
                ("jko", "steps") => config.steps = parse_usize("steps")?,
                ("jko", "inner_tol") => config.inner_tol = parse_num("inner_tol")?,
                ("jko", "max_inner") => config.max_inner = parse_usize("max_inner")?,
                ("particles", "d") => config.particle_count = parse_usize("d")?,
                ("particles", "heads") => config.heads = value.to_string(),
                ("particles", "hemisphere") => config.hemisphere = parse_bool("hemisphere")?,
                ("checks", "suite") => config.suite = value.to_string(),
                ("checks", "samples") => config.check_samples = parse_usize("samples")?,
                ("checks", "pairs") => config.pairs = parse_usize("pairs")?,
                _ => return Err(bad_key()),
            }
        }
        let Some(command) = command else {
            return Err(CliError::Validation(
                "config is missing 'command' in [experiment]".into(),
            ));
        };
        config.command = command;
        Ok(config)
    }
}
