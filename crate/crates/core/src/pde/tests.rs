use super::*;
use crate::kernels::{heat_kernel_coeffs, AttractionKernel};
use approx::{assert_abs_diff_eq, assert_relative_eq};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn benchmark_initial(basis: &SphericalBasis) -> DensityState {
    DensityState::normalized_from_fn(basis, |a| 1.0 + 0.5 * a.cos()).unwrap()
}

fn random_density(basis: &SphericalBasis, rng: &mut impl Rng) -> DensityState {
    let amps: Vec<(f64, f64)> = (1..=3)
        .map(|_| (rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2)))
        .collect();
    DensityState::normalized_from_fn(basis, |a| {
        let mut v = 1.0;
        for (k, (ca, sa)) in amps.iter().enumerate() {
            let kf = (k + 1) as f64;
            v += ca * (kf * a).cos() + sa * (kf * a).sin();
        }
        v.max(0.05)
    })
    .unwrap()
}

#[test]
fn energy_of_uniform_states() {
    let basis = SphericalBasis::circle(8, 0).unwrap();
    let uniform = DensityState::uniform(&basis);

    // Admissible V only: 1/2 * V_0 * 1 = 1/2.
    let v = heat_kernel_coeffs(2, 0.3, 8).unwrap();
    let e = energy(&basis, &uniform, None, Some(&v)).unwrap();
    assert_abs_diff_eq!(e.double_form, 0.5, epsilon = 1e-14);
    assert_abs_diff_eq!(e.sqrt_form, 0.5, epsilon = 1e-14);

    // Constant fixed interaction c: energy c/2.
    let c = 0.37;
    let w = crate::spectral::ZonalCoefficients::new(2, vec![c]).unwrap();
    let e = energy(&basis, &uniform, Some(&w), None).unwrap();
    assert_abs_diff_eq!(e.double_form, c / 2.0, epsilon = 1e-15);
}

#[test]
fn energy_forms_agree_and_match_quadrature_double_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let basis = SphericalBasis::circle(12, 0).unwrap();
    let w = AttractionKernel::new(2, 1.0, 1.0, 12).unwrap().coeffs;
    let v = heat_kernel_coeffs(2, 0.2, 12).unwrap();
    for _ in 0..5 {
        let rho = random_density(&basis, &mut rng);
        let e = energy(&basis, &rho, Some(&w), Some(&v)).unwrap();
        assert_relative_eq!(e.double_form, e.sqrt_form, max_relative = 1e-10);

        // Direct double sum over the periodic grid: (1/2) sum_ij w_i w_j
        // U(cos(a_i - a_j)) rho_i rho_j with U reconstructed pointwise.
        let u = |t: f64| {
            crate::spectral::reconstruct_kernel(&w, t) + crate::spectral::reconstruct_kernel(&v, t)
        };
        let mut double_sum = 0.0;
        for (i, (&ai, &wi)) in basis.thetas().iter().zip(basis.weights()).enumerate() {
            for (j, (&aj, &wj)) in basis.thetas().iter().zip(basis.weights()).enumerate() {
                double_sum +=
                    0.5 * wi * wj * u((ai - aj).cos()) * rho.values[i] * rho.values[j];
                let _ = (i, j);
            }
        }
        assert_relative_eq!(e.double_form, double_sum, max_relative = 1e-8);
    }
}

#[test]
fn energy_sandwich_bounds() {
    // -|W|_inf / 2 <= F <= |W|_inf / 2 + C |rho|^2 with C = max_l V_l.
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let basis = SphericalBasis::circle(12, 0).unwrap();
    let attraction = AttractionKernel::new(2, 1.0, 1.0, 12).unwrap();
    let w = attraction.coeffs.clone();
    let w_inf = crate::kernels::linf_norm(|t| attraction.eval(t), 4096);
    let v = heat_kernel_coeffs(2, 0.2, 12).unwrap();
    let c_bound = v.coeffs().iter().cloned().fold(0.0f64, f64::max);
    for _ in 0..10 {
        let rho = random_density(&basis, &mut rng);
        let e = energy(&basis, &rho, Some(&w), Some(&v)).unwrap().double_form;
        let norm_sq = basis.l2_norm_sq(&rho.coeffs);
        assert!(e >= -0.5 * w_inf - 1e-12, "lower bound violated: {e}");
        assert!(
            e <= 0.5 * w_inf + c_bound * norm_sq + 1e-12,
            "upper bound violated: {e}"
        );
    }
}

#[test]
fn entropy_values_and_monotonicity_under_heat_flow() {
    let basis = SphericalBasis::circle(16, 0).unwrap();
    let uniform = DensityState::uniform(&basis);
    let (e0, clipped) = entropy(&basis, &uniform.values, NegativePolicy::Error).unwrap();
    assert_abs_diff_eq!(e0, 0.0, epsilon = 1e-15);
    assert!(!clipped);

    // Oracle value for 1 + 0.5 cos: high-resolution trapezoid quadrature
    // (spectrally exact for smooth periodic integrands).
    let m = 1 << 20;
    let oracle: f64 = (0..m)
        .map(|i| {
            let a = std::f64::consts::TAU * i as f64 / m as f64;
            let r: f64 = 1.0 + 0.5 * a.cos();
            r * r.ln() / m as f64
        })
        .sum();
    assert_abs_diff_eq!(oracle, 0.06463813202048736, epsilon = 1e-12);

    let bench = benchmark_initial(&basis);
    let (e1, _) = entropy(&basis, &bench.values, NegativePolicy::Error).unwrap();
    assert_abs_diff_eq!(e1, oracle, epsilon = 1e-10);

    // Entropy decreases along the heat semigroup from any start.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..3 {
        let rho = random_density(&basis, &mut rng);
        let mut last = entropy(&basis, &rho.values, NegativePolicy::Error).unwrap().0;
        for &s in &[0.01, 0.05, 0.2, 1.0] {
            let flowed = basis.heat_semigroup(&rho.coeffs, s).unwrap();
            let vals = basis.synthesize(&flowed);
            let e = entropy(&basis, &vals, NegativePolicy::Clip(1e-14)).unwrap().0;
            assert!(e < last + 1e-12, "entropy rose at s={s}");
            last = e;
        }
    }

    let negative = vec![-0.1; basis.grid_len()];
    assert!(matches!(
        entropy(&basis, &negative, NegativePolicy::Error),
        Err(CoreError::EntropyUndefined { .. })
    ));
}

#[test]
fn uniform_state_is_a_fixed_point_of_both_equations() {
    for basis in [
        SphericalBasis::circle(10, 0).unwrap(),
        SphericalBasis::zonal(3, 10, 0).unwrap(),
    ] {
        let n = basis.dim();
        let uniform = DensityState::uniform(&basis);
        let w = AttractionKernel::new(n, 1.0, 1.0, 10).unwrap().coeffs;
        let v = heat_kernel_coeffs(n, 0.1, 10).unwrap();
        let r1 = rhs_aggregation(&basis, &uniform, Some(&w), &v).unwrap();
        let r2 = rhs_ade(&basis, &uniform, Some(&w)).unwrap();
        for (a, b) in r1.iter().zip(&r2) {
            assert_abs_diff_eq!(*a, 0.0, epsilon = 1e-13);
            assert_abs_diff_eq!(*b, 0.0, epsilon = 1e-13);
        }
    }
}

#[test]
fn single_mode_linearization_rate() {
    // rho = 1 + delta * 2cos(a): d(c_1)/dt ~ lambda_1 K_1 c_1 for the
    // aggregation flow with total kernel K.
    let basis = SphericalBasis::circle(8, 0).unwrap();
    let v = heat_kernel_coeffs(2, 0.3, 8).unwrap();
    let delta = 1e-6;
    let mut coeffs = vec![0.0; basis.num_modes()];
    coeffs[0] = 1.0;
    coeffs[1] = delta;
    let state = DensityState::from_coeffs(&basis, coeffs, 0.0).unwrap();
    let rhs = rhs_aggregation(&basis, &state, None, &v).unwrap();
    let expected = crate::spectral::laplacian_eigenvalue(2, 1) * v.coeff(1) * delta;
    assert_relative_eq!(rhs[1], expected, max_relative = 1e-4);
    // Repulsive kernel (positive spectrum): the mode decays.
    assert!(rhs[1] < 0.0);
    // Mass never moves.
    assert_eq!(rhs[0], 0.0);
}

#[test]
fn ade_rhs_is_the_small_eps_limit_of_the_aggregation_rhs() {
    let basis = SphericalBasis::circle(32, 0).unwrap();
    let rho = DensityState::normalized_from_fn(&basis, |a| {
        1.0 + 0.5 * a.cos() + 0.2 * (2.0 * a).cos() + 0.05 * (3.0 * a).sin()
    })
    .unwrap();
    let w = AttractionKernel::new(2, 1.0, 1.0, 32).unwrap().coeffs;
    let limit = rhs_ade(&basis, &rho, Some(&w)).unwrap();
    let v = heat_kernel_coeffs(2, 1e-3, 32).unwrap();
    let approx_rhs = rhs_aggregation(&basis, &rho, Some(&w), &v).unwrap();
    let num = basis.l2_distance(&approx_rhs, &limit);
    let den = basis.l2_norm_sq(&limit).sqrt();
    assert!(num / den <= 2e-2, "relative gap {} too large", num / den);
}

#[test]
fn heun_agrees_with_rk4_at_small_steps() {
    let basis = SphericalBasis::circle(12, 0).unwrap();
    let initial = benchmark_initial(&basis);
    let w = AttractionKernel::new(2, 1.0, 1.0, 12).unwrap().coeffs;
    let v = heat_kernel_coeffs(2, 0.2, 12).unwrap();
    let dt = 0.25 * SolverConfig::suggested_dt(2, 12, 2.0);
    let mut config = SolverConfig {
        diagnostics_every: 50,
        ..SolverConfig::new(12, dt, 0.1)
    };
    let rk4 = solve(&basis, &initial, Some(&w), Some(&v), &config).unwrap();
    config.scheme = Scheme::Heun;
    let heun = solve(&basis, &initial, Some(&w), Some(&v), &config).unwrap();
    let gap = basis.l2_distance(
        &rk4.final_state().coeffs,
        &heun.final_state().coeffs,
    );
    assert!(gap < 1e-8, "scheme disagreement {gap}");
    for row in &heun.report.rows {
        assert!((row.mass - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn limit_energy_decreases_along_the_diffusion_solve() {
    // The diffusion flow dissipates F0 = (1/2) int int W d rho d rho
    //                                  + (1/2) |rho|^2_{L^2}.
    let basis = SphericalBasis::circle(16, 0).unwrap();
    let initial = benchmark_initial(&basis);
    let w = AttractionKernel::new(2, 1.0, 1.0, 16).unwrap().coeffs;
    let config = SolverConfig {
        diagnostics_every: 40,
        ..SolverConfig::new(16, SolverConfig::suggested_dt(2, 16, 2.0), 0.5)
    };
    let traj = solve(&basis, &initial, Some(&w), None, &config).unwrap();
    let mut last = f64::INFINITY;
    for (state, row) in traj.states.iter().zip(&traj.report.rows) {
        let w_part = energy(&basis, state, Some(&w), None).unwrap().double_form;
        let f0 = w_part + 0.5 * row.conv_l2; // conv_l2 = |rho|^2 for ADE runs
        assert!(f0 <= last + 1e-6 * (1.0 + f0.abs()), "limit energy rose at t={}", row.time);
        last = f0;
    }
}

#[test]
fn pure_diffusion_contracts_toward_uniform() {
    let basis = SphericalBasis::circle(16, 0).unwrap();
    let initial = benchmark_initial(&basis);
    let config = SolverConfig {
        diagnostics_every: 25,
        ..SolverConfig::new(16, SolverConfig::suggested_dt(2, 16, 2.0), 0.25)
    };
    let traj = solve(&basis, &initial, None, None, &config).unwrap();
    let mut last = f64::INFINITY;
    for state in &traj.states {
        let mut centered = state.coeffs.clone();
        centered[0] = 0.0;
        let dist = basis.l2_norm_sq(&centered).sqrt();
        assert!(dist < last, "distance to uniform did not decrease");
        last = dist;
    }
}

#[test]
fn uniform_initial_data_stays_uniform() {
    let basis = SphericalBasis::circle(8, 0).unwrap();
    let uniform = DensityState::uniform(&basis);
    let w = AttractionKernel::new(2, 1.0, 1.0, 8).unwrap().coeffs;
    let v = heat_kernel_coeffs(2, 0.1, 8).unwrap();
    let config = SolverConfig {
        diagnostics_every: 10,
        ..SolverConfig::new(8, 1e-3, 0.1)
    };
    let traj = solve(&basis, &uniform, Some(&w), Some(&v), &config).unwrap();
    for state in &traj.states {
        for (i, &c) in state.coeffs.iter().enumerate() {
            let expect = if i == 0 { 1.0 } else { 0.0 };
            assert_abs_diff_eq!(c, expect, epsilon = 1e-12);
        }
    }
}

#[test]
fn aggregation_benchmark_conserves_mass_and_dissipates_energy() {
    let basis = SphericalBasis::circle(32, 0).unwrap();
    let initial = benchmark_initial(&basis);
    let w = AttractionKernel::new(2, 1.0, 1.0, 32).unwrap().coeffs;
    let v = heat_kernel_coeffs(2, 0.1, 32).unwrap();
    let config = SolverConfig {
        grid_size: basis.grid_len(),
        diagnostics_every: 50,
        ..SolverConfig::new(32, SolverConfig::suggested_dt(2, 32, initial.max_value()), 0.25)
    };
    let traj = solve(&basis, &initial, Some(&w), Some(&v), &config).unwrap();

    let initial_conv = traj.report.rows[0].conv_l2;
    let w_inf = std::f64::consts::E;
    let mut last_f = f64::INFINITY;
    for row in &traj.report.rows {
        assert!((row.mass - 1.0).abs() <= 1e-10, "mass drift {}", row.mass);
        assert!(
            row.f_double <= last_f + 1e-6 * (1.0 + row.f_double.abs()),
            "energy increased at t = {}",
            row.time
        );
        last_f = row.f_double;
        assert_relative_eq!(row.f_double, row.f_sqrt, max_relative = 1e-7);
        assert!(
            row.conv_l2 <= initial_conv + 2.0 * w_inf + 1e-9,
            "smoothed L2 bound violated at t = {}",
            row.time
        );
    }
}

#[test]
fn instability_reports_partial_trajectory() {
    let basis = SphericalBasis::circle(8, 0).unwrap();
    let initial = benchmark_initial(&basis);
    // Absurd dt: even with six halvings the run blows up.
    let config = SolverConfig {
        diagnostics_every: 1,
        ..SolverConfig::new(8, 50.0, 200.0)
    };
    let w = AttractionKernel::new(2, 4.0, 5.0, 8).unwrap().coeffs;
    let err = solve(&basis, &initial, Some(&w), None, &config).unwrap_err();
    assert!(matches!(err.reason, CoreError::Instability { .. }));
    assert!(!err.partial.states.is_empty());
    assert_eq!(err.partial.halvings, MAX_HALVINGS);
}

#[test]
fn residual_vanishes_for_constant_test_functions() {
    let basis = SphericalBasis::circle(16, 0).unwrap();
    let rho = benchmark_initial(&basis);
    let v = heat_kernel_coeffs(2, 0.1, 16).unwrap();
    let r = residual_norm(&basis, &rho, &v, &|_| 0.0).unwrap();
    assert_abs_diff_eq!(r, 0.0, epsilon = 1e-15);

    // Near-delta kernel: the commutator collapses (within truncation).
    let near_delta = crate::spectral::ZonalCoefficients::new(2, vec![1.0; 17]).unwrap();
    let r = residual_norm(&basis, &rho, &near_delta, &|a| -a.sin()).unwrap();
    assert!(r <= 1e-12, "near-delta residual {r}");

    let zonal = SphericalBasis::zonal(3, 8, 0).unwrap();
    let rho3 = DensityState::uniform(&zonal);
    let v3 = heat_kernel_coeffs(3, 0.1, 8).unwrap();
    assert!(matches!(
        residual_norm(&zonal, &rho3, &v3, &|a| -a.sin()),
        Err(CoreError::UnsupportedDimension(3))
    ));
}

#[test]
fn residual_decreases_with_kernel_width() {
    let basis = SphericalBasis::circle(24, 0).unwrap();
    let rho = benchmark_initial(&basis);
    let mut last = f64::INFINITY;
    for &eps in &[0.2, 0.1, 0.05, 0.025] {
        let v = heat_kernel_coeffs(2, eps, 24).unwrap();
        let r = residual_norm(&basis, &rho, &v, &|a| -a.sin()).unwrap();
        assert!(r < last, "residual did not decrease at eps = {eps}");
        last = r;
    }
}

#[test]
fn convergence_study_on_uniform_data_reports_zero_gap() {
    let basis = SphericalBasis::circle(12, 0).unwrap();
    let uniform = DensityState::uniform(&basis);
    let w = AttractionKernel::new(2, 1.0, 1.0, 12).unwrap().coeffs;
    let config = SolverConfig {
        diagnostics_every: 20,
        ..SolverConfig::new(12, 1e-3, 0.1)
    };
    let family = |eps: f64| heat_kernel_coeffs(2, eps, 12);
    let table =
        convergence_study(&basis, Some(&w), &family, &[0.2, 0.1], &uniform, &config, None)
            .unwrap();
    for row in &table.rows {
        assert!(!row.failed);
        assert_abs_diff_eq!(row.stats.unwrap().l2_space_time, 0.0, epsilon = 1e-12);
    }
}

#[test]
fn pure_repulsion_gap_shrinks_with_eps() {
    // W = 0: the aggregation flow approaches the quadratic porous-medium
    // equation as the kernel localizes.
    let basis = SphericalBasis::circle(16, 0).unwrap();
    let initial = benchmark_initial(&basis);
    let config = SolverConfig {
        diagnostics_every: 40,
        ..SolverConfig::new(16, SolverConfig::suggested_dt(2, 16, 2.0), 0.25)
    };
    let family = |eps: f64| heat_kernel_coeffs(2, eps, 16);
    let table = convergence_study(
        &basis,
        None,
        &family,
        &[0.2, 0.1, 0.05],
        &initial,
        &config,
        None,
    )
    .unwrap();
    let errs: Vec<f64> = table
        .rows
        .iter()
        .map(|r| r.stats.unwrap().l2_space_time)
        .collect();
    assert!(errs[1] < errs[0] && errs[2] < errs[1], "gaps {errs:?}");
}

#[test]
fn gap_statistic_is_stable_under_refinement() {
    // Doubling the truncation and halving dt moves the benchmark gap by
    // less than 5%.
    let eps = 0.1;
    let run = |l_max: usize, dt_scale: f64| -> f64 {
        let basis = SphericalBasis::circle(l_max, 0).unwrap();
        let initial = benchmark_initial(&basis);
        let w = AttractionKernel::new(2, 1.0, 1.0, l_max).unwrap().coeffs;
        let config = SolverConfig {
            grid_size: basis.grid_len(),
            diagnostics_every: 25,
            ..SolverConfig::new(
                l_max,
                dt_scale * SolverConfig::suggested_dt(2, l_max, 2.0),
                0.25,
            )
        };
        let family = |e: f64| heat_kernel_coeffs(2, e, l_max);
        let table = convergence_study(
            &basis,
            Some(&w),
            &family,
            &[eps],
            &initial,
            &config,
            None,
        )
        .unwrap();
        table.rows[0].stats.unwrap().l2_space_time
    };
    let coarse = run(32, 1.0);
    let fine = run(64, 0.5);
    let rel = (coarse - fine).abs() / fine;
    assert!(rel < 0.05, "refinement moved the gap by {rel:.3}");
}
