//! Artifact writers: CSV tables with pinned schemas, the run manifest,
//! and optional SVG quick-look plots.
//!
//! All floating-point payloads are written with 17 significant digits so
//! identical runs produce byte-identical files.

use crate::error::Result;
use sha2::{Digest, Sha256};
use sphereflow_core::ot::JkoTrajectory;
use sphereflow_core::particles::ParticleTrajectory;
use sphereflow_core::pde::{SphericalBasis, Trajectory};
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// Collects written files for the manifest.
pub struct ArtifactSet {
    root: PathBuf,
    files: Vec<PathBuf>,
}

impl ArtifactSet {
    pub fn new(root: PathBuf) -> Result<Self> {
        fs::create_dir_all(&root).map_err(|e| {
            crate::error::CliError::Validation(format!(
                "output directory '{}' is not writable: {e}",
                root.display()
            ))
        })?;
        Ok(ArtifactSet {
            root,
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, relative: &str, contents: &str) -> Result<PathBuf> {
        let path = self.root.join(relative);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, contents)?;
        self.files.push(PathBuf::from(relative));
        Ok(path)
    }

    /// Writes `manifest.json`: the command, seed, canonical config, and a
    /// sorted list of every artifact with size and content hash. Contains
    /// nothing run-dependent beyond the artifacts themselves, so identical
    /// runs produce identical manifests.
    pub fn finalize_manifest(
        mut self,
        command: &str,
        seed: u64,
        canonical_config: &str,
    ) -> Result<PathBuf> {
        self.files.sort();
        let mut entries = Vec::new();
        for relative in &self.files {
            let path = self.root.join(relative);
            let bytes = fs::read(&path)?;
            let mut hasher = Sha256::new();
            hasher.update(&bytes);
            entries.push(serde_json::json!({
                "path": relative.to_string_lossy(),
                "bytes": bytes.len(),
                "sha256": format!("{:x}", hasher.finalize()),
            }));
        }
        let manifest = serde_json::json!({
            "command": command,
            "seed": seed,
            "config": canonical_config,
            "files": entries,
        });
        let path = self.root.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(&manifest).unwrap())?;
        Ok(path)
    }
}

/// Coefficient trajectory (`time,l0,...,lL`), grid values
/// (`time,theta_0,...`), the energy report, and — when the state carries
/// sine modes — a companion `<stem>_sin.csv`.
pub fn write_trajectory(
    artifacts: &mut ArtifactSet,
    subdir: &str,
    basis: &SphericalBasis,
    traj: &Trajectory,
) -> Result<()> {
    let l_max = basis.l_max();
    let prefix = if subdir.is_empty() {
        String::new()
    } else {
        format!("{subdir}/")
    };

    // Cosine/zonal coefficient block per degree.
    let mut cos_idx = vec![None; l_max + 1];
    let mut sin_idx = vec![None; l_max + 1];
    for (j, mode) in basis.modes().iter().enumerate() {
        use sphereflow_core::pde::ModeKind;
        match mode.kind {
            ModeKind::Constant | ModeKind::Cos | ModeKind::Zonal => {
                cos_idx[mode.degree] = Some(j)
            }
            ModeKind::Sin => sin_idx[mode.degree] = Some(j),
        }
    }

    let mut coeffs_csv = String::from("time");
    for l in 0..=l_max {
        let _ = write!(coeffs_csv, ",l{l}");
    }
    coeffs_csv.push('\n');
    let mut has_sin = false;
    for state in &traj.states {
        let _ = write!(coeffs_csv, "{}", fmt_f64(state.time));
        for idx in &cos_idx {
            let c = idx.map_or(0.0, |j| state.coeffs[j]);
            let _ = write!(coeffs_csv, ",{}", fmt_f64(c));
        }
        coeffs_csv.push('\n');
        has_sin |= sin_idx.iter().flatten().any(|&j| state.coeffs[j].abs() > 1e-13);
    }
    artifacts.write(&format!("{prefix}trajectory.csv"), &coeffs_csv)?;

    if has_sin {
        let mut sin_csv = String::from("time");
        for l in 1..=l_max {
            let _ = write!(sin_csv, ",s{l}");
        }
        sin_csv.push('\n');
        for state in &traj.states {
            let _ = write!(sin_csv, "{}", fmt_f64(state.time));
            for idx in sin_idx.iter().skip(1) {
                let c = idx.map_or(0.0, |j| state.coeffs[j]);
                let _ = write!(sin_csv, ",{}", fmt_f64(c));
            }
            sin_csv.push('\n');
        }
        artifacts.write(&format!("{prefix}trajectory_sin.csv"), &sin_csv)?;
    }

    let mut values_csv = String::from("time");
    for i in 0..basis.grid_len() {
        let _ = write!(values_csv, ",theta_{i}");
    }
    values_csv.push('\n');
    for state in &traj.states {
        let _ = write!(values_csv, "{}", fmt_f64(state.time));
        for v in &state.values {
            let _ = write!(values_csv, ",{}", fmt_f64(*v));
        }
        values_csv.push('\n');
    }
    artifacts.write(&format!("{prefix}trajectory_values.csv"), &values_csv)?;

    let mut energy_csv =
        String::from("time,F_double,F_sqrt,entropy,mass,min_density,conv_l2\n");
    for row in &traj.report.rows {
        let _ = writeln!(
            energy_csv,
            "{},{},{},{},{},{},{}",
            fmt_f64(row.time),
            fmt_f64(row.f_double),
            fmt_f64(row.f_sqrt),
            fmt_f64(row.entropy),
            fmt_f64(row.mass),
            fmt_f64(row.min_density),
            fmt_f64(row.conv_l2)
        );
    }
    artifacts.write(&format!("{prefix}energy.csv"), &energy_csv)?;
    Ok(())
}

/// JKO outputs: per-step report plus a coefficient trajectory in the same
/// shape as the solver trajectories (cosine block from the grid states).
pub fn write_jko(
    artifacts: &mut ArtifactSet,
    traj: &JkoTrajectory,
    tau: f64,
    l_max: usize,
) -> Result<()> {
    let m = traj.densities[0].len();
    let angles = sphereflow_core::ot::CircularDistribution::grid_angles(m);

    let mut coeffs_csv = String::from("time");
    for l in 0..=l_max {
        let _ = write!(coeffs_csv, ",l{l}");
    }
    coeffs_csv.push('\n');
    let mut sin_any = false;
    let mut sin_rows: Vec<Vec<f64>> = Vec::new();
    for (k, density) in traj.densities.iter().enumerate() {
        let _ = write!(coeffs_csv, "{}", fmt_f64(k as f64 * tau));
        let mut sin_row = Vec::with_capacity(l_max);
        for l in 0..=l_max {
            let lf = l as f64;
            let (mut ac, mut as_) = (0.0, 0.0);
            for (&a, &v) in angles.iter().zip(density) {
                ac += v * (lf * a).cos();
                as_ += v * (lf * a).sin();
            }
            ac /= m as f64;
            as_ /= m as f64;
            let _ = write!(coeffs_csv, ",{}", fmt_f64(ac));
            if l >= 1 {
                sin_row.push(as_);
                sin_any |= as_.abs() > 1e-13;
            }
        }
        sin_rows.push(sin_row);
        coeffs_csv.push('\n');
    }
    artifacts.write("jko_trajectory.csv", &coeffs_csv)?;
    if sin_any {
        let mut sin_csv = String::from("time");
        for l in 1..=l_max {
            let _ = write!(sin_csv, ",s{l}");
        }
        sin_csv.push('\n');
        for (k, row) in sin_rows.iter().enumerate() {
            let _ = write!(sin_csv, "{}", fmt_f64(k as f64 * tau));
            for v in row {
                let _ = write!(sin_csv, ",{}", fmt_f64(*v));
            }
            sin_csv.push('\n');
        }
        artifacts.write("jko_trajectory_sin.csv", &sin_csv)?;
    }

    let mut values_csv = String::from("time");
    for i in 0..m {
        let _ = write!(values_csv, ",theta_{i}");
    }
    values_csv.push('\n');
    for (k, density) in traj.densities.iter().enumerate() {
        let _ = write!(values_csv, "{}", fmt_f64(k as f64 * tau));
        for v in density {
            let _ = write!(values_csv, ",{}", fmt_f64(*v));
        }
        values_csv.push('\n');
    }
    artifacts.write("jko_values.csv", &values_csv)?;

    let mut report = String::from("step,time,energy,w2_increment,inner_iterations\n");
    for k in 0..traj.densities.len() {
        let w2 = if k == 0 { 0.0 } else { traj.w2_increments[k - 1] };
        let inner = if k == 0 { 0 } else { traj.inner_iterations[k - 1] };
        let _ = writeln!(
            report,
            "{k},{},{},{},{inner}",
            fmt_f64(k as f64 * tau),
            fmt_f64(traj.energies[k]),
            fmt_f64(w2),
        );
    }
    let _ = writeln!(report, "# step_sum = {}", fmt_f64(traj.step_sum));
    let _ = writeln!(report, "# energy_drop = {}", fmt_f64(traj.energy_drop));
    let _ = writeln!(report, "# holder_constant = {}", fmt_f64(traj.holder_constant));
    let _ = writeln!(report, "# holder_violation = {}", fmt_f64(traj.holder_violation));
    artifacts.write("jko_report.csv", &report)?;
    Ok(())
}

/// Particle outputs: `time,particle_index,x1..xn` snapshots and the
/// metrics series `time,min_inner,max_inner,energy`.
pub fn write_particles(artifacts: &mut ArtifactSet, traj: &ParticleTrajectory) -> Result<()> {
    let n = traj.snapshots[0].ensemble.dim();
    let mut csv = String::from("time,particle_index");
    for i in 1..=n {
        let _ = write!(csv, ",x{i}");
    }
    csv.push('\n');
    for snap in &traj.snapshots {
        for (idx, p) in snap.ensemble.points().iter().enumerate() {
            let _ = write!(csv, "{},{idx}", fmt_f64(snap.time));
            for c in p.coords() {
                let _ = write!(csv, ",{}", fmt_f64(*c));
            }
            csv.push('\n');
        }
    }
    artifacts.write("particles.csv", &csv)?;

    let mut metrics = String::from("time,min_inner,max_inner,energy\n");
    for snap in &traj.snapshots {
        let _ = writeln!(
            metrics,
            "{},{},{},{}",
            fmt_f64(snap.time),
            fmt_f64(snap.metrics.min_pair_inner),
            fmt_f64(snap.metrics.max_pair_inner),
            fmt_f64(snap.metrics.total_energy)
        );
    }
    artifacts.write("metrics.csv", &metrics)?;
    Ok(())
}

/// Minimal SVG line chart of `(x, y)` series (one polyline per series).
pub fn line_chart_svg(
    title: &str,
    series: &[(&str, Vec<(f64, f64)>)],
    log_y: bool,
) -> String {
    let (w, h, ml, mb) = (640.0, 400.0, 60.0, 40.0);
    let all: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|(_, pts)| pts.iter().cloned())
        .map(|(x, y)| (x, if log_y { y.max(1e-300).log10() } else { y }))
        .collect();
    if all.is_empty() {
        return format!("<svg xmlns=\"http://www.w3.org/2000/svg\"><text>{title}: empty</text></svg>");
    }
    let (x0, x1) = all
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (y0, y1) = all
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
    let xs = |x: f64| ml + (x - x0) / (x1 - x0).max(1e-300) * (w - ml - 20.0);
    let ys = |y: f64| h - mb - (y - y0) / (y1 - y0).max(1e-300) * (h - mb - 30.0);
    let palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">{title}</text>\n\
         <line x1=\"{ml}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n\
         <line x1=\"{ml}\" y1=\"30\" x2=\"{ml}\" y2=\"{}\" stroke=\"black\"/>\n",
        w / 2.0,
        h - mb,
        w - 20.0,
        h - mb,
        h - mb
    );
    let range_label = if log_y {
        format!("x: {x0:.4} .. {x1:.4}; y (log10): {y0:.3} .. {y1:.3}")
    } else {
        format!("x: {x0:.4} .. {x1:.4}; y: {y0:.4} .. {y1:.4}")
    };
    let _ = writeln!(
        svg,
        "<text x=\"{ml}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\">{range_label}</text>",
        h - mb + 14.0,
    );
    for (k, (name, pts)) in series.iter().enumerate() {
        let color = palette[k % palette.len()];
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y)| {
                let yy = if log_y { y.max(1e-300).log10() } else { y };
                format!("{:.2},{:.2}", xs(x), ys(yy))
            })
            .collect();
        let _ = write!(
            svg,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n\
             <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" fill=\"{color}\">{name}</text>\n",
            path.join(" "),
            w - 150.0,
            40.0 + 14.0 * k as f64
        );
    }
    svg.push_str("</svg>\n");
    svg
}
