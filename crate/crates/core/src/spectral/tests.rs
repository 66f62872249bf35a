use super::*;
use approx::{assert_abs_diff_eq, assert_relative_eq};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn heat_coeffs(n: usize, eps: f64, l_max: usize) -> ZonalCoefficients {
    ZonalCoefficients::new(
        n,
        (0..=l_max)
            .map(|l| (eps * laplacian_eigenvalue(n, l)).exp())
            .collect(),
    )
    .unwrap()
}

/// Random fast-decaying spectrum, suitable as a smooth test function.
fn random_smooth(rng: &mut impl Rng, n: usize, l_max: usize, decay: f64) -> ZonalCoefficients {
    ZonalCoefficients::new(
        n,
        (0..=l_max)
            .map(|l| rng.gen_range(-1.0..1.0) * (-decay * l as f64).exp())
            .collect(),
    )
    .unwrap()
}

#[test]
fn gegenbauer_base_cases_and_recursion() {
    assert_abs_diff_eq!(gegenbauer_eval(0.7, 0, -0.3).unwrap(), 1.0);
    assert_abs_diff_eq!(gegenbauer_eval(0.5, 1, 0.4).unwrap(), 0.4, epsilon = 1e-15);
    // C_2^lambda(t) = 2 lambda (lambda+1) t^2 - lambda; zero at lambda=1, t=0.5.
    assert_abs_diff_eq!(gegenbauer_eval(1.0, 2, 0.5).unwrap(), 0.0, epsilon = 1e-15);
    assert!(gegenbauer_eval(0.0, 2, 0.5).is_err());
}

#[test]
fn zonal_harmonics_at_coincidence_count_subspace_dimensions() {
    for l in 0..10 {
        // n = 3: C_l^{1/2}(1) = 1, so Z_l(1) = 2l + 1.
        assert_relative_eq!(
            zonal_harmonic_eval(3, l, 1.0),
            (2 * l + 1) as f64,
            max_relative = 1e-13
        );
        assert_relative_eq!(zonal_norm_sq(3, l), (2 * l + 1) as f64, max_relative = 1e-13);
        assert_abs_diff_eq!(zonal_harmonic_eval(5, 0, -0.7), 1.0);
    }
    // n = 2 Chebyshev case: Z_3(cos(pi/3)) = 2 cos(pi) = -2.
    let t = (std::f64::consts::PI / 3.0).cos();
    assert_abs_diff_eq!(zonal_harmonic_eval(2, 3, t), -2.0, epsilon = 1e-14);
}

#[test]
fn basis_row_matches_pointwise_evaluation() {
    for n in [2usize, 3, 4, 5] {
        for &t in &[-0.99, -0.4, 0.0, 0.73, 1.0] {
            let row = zonal_basis_row(n, 12, t);
            for (l, &z) in row.iter().enumerate() {
                assert_relative_eq!(z, zonal_harmonic_eval(n, l, t), max_relative = 1e-12);
            }
        }
    }
}

#[test]
fn basis_derivative_matches_finite_differences() {
    let h = 1e-6;
    for n in [2usize, 3, 5] {
        for &t in &[-0.8, -0.1, 0.35, 0.9] {
            let d = zonal_basis_deriv_row(n, 10, t);
            let up = zonal_basis_row(n, 10, t + h);
            let dn = zonal_basis_row(n, 10, t - h);
            for l in 0..=10 {
                let fd = (up[l] - dn[l]) / (2.0 * h);
                assert_abs_diff_eq!(d[l], fd, epsilon = 1e-4 * (1.0 + fd.abs()));
            }
        }
    }
}

#[test]
fn zonal_harmonics_are_orthogonal_under_the_grid() {
    for n in [2usize, 3, 5] {
        let m = 24;
        let q = QuadratureGrid::gauss_jacobi(n, m).unwrap();
        for l in 0..m - 1 {
            for k in 0..m - 1 {
                let val = q.integrate(|t| zonal_harmonic_eval(n, l, t) * zonal_harmonic_eval(n, k, t));
                let expect = if l == k { zonal_norm_sq(n, l) } else { 0.0 };
                assert_abs_diff_eq!(val, expect, epsilon = 1e-10 * (1.0 + expect.abs()));
            }
        }
    }
}

#[test]
fn decomposition_of_constant_and_pure_harmonics() {
    let q = QuadratureGrid::gauss_jacobi(3, 32).unwrap();
    let c = decompose_kernel(|_| 1.0, &q, 8).unwrap();
    assert_abs_diff_eq!(c.coeff(0), 1.0, epsilon = 1e-13);
    for l in 1..=8 {
        assert_abs_diff_eq!(c.coeff(l), 0.0, epsilon = 1e-13);
    }

    let z2 = decompose_kernel(|t| zonal_harmonic_eval(3, 2, t), &q, 8).unwrap();
    for l in 0..=8 {
        let expect = if l == 2 { 1.0 } else { 0.0 };
        assert_abs_diff_eq!(z2.coeff(l), expect, epsilon = 1e-12);
    }
}

#[test]
fn decomposition_of_exponential_on_the_circle_gives_bessel_ratios() {
    // alpha e^{t/eps} at eps = 1: the degree-1 coefficient of the
    // normalized kernel is I_1(1)/I_0(1).
    let q = QuadratureGrid::gauss_jacobi(2, 64).unwrap();
    let c = decompose_kernel(|t| t.exp(), &q, 8).unwrap();
    let ratio = c.coeff(1) / c.coeff(0);
    assert_abs_diff_eq!(ratio, 0.44638996589653454, epsilon = 1e-12);
}

#[test]
fn reconstruction_round_trip_on_a_smooth_kernel() {
    // Ground truth: a degree-80 heat series (fully converged in f64);
    // decompose at L = 48 and compare at the nodes.
    let n = 3;
    let truth = heat_coeffs(n, 0.1, 80);
    let q = QuadratureGrid::gauss_jacobi(n, 104).unwrap();
    let c = decompose_kernel(|t| reconstruct_kernel(&truth, t), &q, 48).unwrap();
    let max_err = q
        .nodes()
        .iter()
        .map(|&t| (reconstruct_kernel(&c, t) - reconstruct_kernel(&truth, t)).abs())
        .fold(0.0f64, f64::max);
    assert!(max_err <= 1e-8, "round trip error {max_err}");

    let cc = ZonalCoefficients::new(2, vec![1.0, 0.0, 0.0]).unwrap();
    assert_abs_diff_eq!(reconstruct_kernel(&cc, 0.3), 1.0);
    // Reconstruction at t = 1 is the weighted sum of subspace dimensions.
    let sum: f64 = (0..=truth.l_max())
        .map(|l| truth.coeff(l) * zonal_norm_sq(n, l))
        .sum();
    assert_relative_eq!(reconstruct_kernel(&truth, 1.0), sum, max_relative = 1e-12);
}

#[test]
fn convolution_is_an_elementwise_multiplier() {
    let kernel = ZonalCoefficients::new(3, vec![1.0, 0.5]).unwrap();
    let f = ZonalCoefficients::new(3, vec![0.0, 2.0]).unwrap();
    let out = convolve(&kernel, &f).unwrap();
    assert_eq!(out.coeffs(), &[0.0, 1.0]);

    // Projection onto constants: only the mean survives.
    let proj = ZonalCoefficients::new(3, vec![1.0]).unwrap();
    let g = ZonalCoefficients::new(3, vec![0.7, 2.0, -1.0]).unwrap();
    let out = convolve(&proj, &g).unwrap();
    assert_eq!(out.coeffs(), &[0.7]);

    let wrong = ZonalCoefficients::new(4, vec![1.0]).unwrap();
    assert!(convolve(&wrong, &g).is_err());
}

#[test]
fn spectral_convolution_agrees_with_direct_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for &n in &[2usize, 3, 5] {
        let l_max = 16;
        let q = QuadratureGrid::gauss_jacobi(n, 2 * l_max + 8).unwrap();
        for _ in 0..4 {
            let kernel = random_smooth(&mut rng, n, l_max, 0.25);
            let f = random_smooth(&mut rng, n, l_max, 0.25);
            let spectral = convolve(&kernel, &f).unwrap();
            let scale = q
                .nodes()
                .iter()
                .map(|&t| reconstruct_kernel(&spectral, t).abs())
                .fold(0.0f64, f64::max)
                .max(1e-12);
            for &t in q.nodes().iter().step_by(5) {
                let direct = reference::direct_convolution_at(
                    n,
                    &|s| reconstruct_kernel(&kernel, s),
                    &|s| reconstruct_kernel(&f, s),
                    t,
                    2 * l_max + 8,
                )
                .unwrap();
                let err = (reconstruct_kernel(&spectral, t) - direct).abs() / scale;
                assert!(err <= 1e-8, "n={n} rel err {err}");
            }
        }
    }
}

#[test]
fn square_root_factorization() {
    let v = ZonalCoefficients::new(3, vec![1.0, 0.25, 0.01]).unwrap();
    let s = sqrt_kernel(&v).unwrap();
    assert_eq!(s.coeffs(), &[1.0, 0.5, 0.1]);

    // Heat kernel: the square root is the half-time kernel.
    let v = heat_coeffs(3, 0.3, 24);
    let s = sqrt_kernel(&v).unwrap();
    let half = heat_coeffs(3, 0.15, 24);
    for l in 0..=24 {
        assert_relative_eq!(s.coeff(l), half.coeff(l), max_relative = 1e-14);
    }

    // Pointwise: sqrt * sqrt reconstructs the kernel.
    let q = QuadratureGrid::gauss_jacobi(3, 64).unwrap();
    let ss = convolve(&s, &s).unwrap();
    for &t in q.nodes() {
        assert_abs_diff_eq!(
            reconstruct_kernel(&ss, t),
            reconstruct_kernel(&v, t),
            epsilon = 1e-8
        );
    }

    let bad = ZonalCoefficients::new(3, vec![1.0, -0.2]).unwrap();
    assert!(matches!(
        sqrt_kernel(&bad),
        Err(CoreError::NotPositiveSemidefinite { index: 1, .. })
    ));
    // Round-off-scale negatives are clamped.
    let noisy = ZonalCoefficients::new(3, vec![1.0, -1e-13]).unwrap();
    assert_eq!(sqrt_kernel(&noisy).unwrap().coeff(1), 0.0);
}

#[test]
fn laplacian_eigenvalues() {
    assert_eq!(laplacian_eigenvalue(3, 0), 0.0);
    // S^2 carries the classical spectrum -l(l+1).
    assert_eq!(laplacian_eigenvalue(3, 2), -6.0);
    assert_eq!(laplacian_eigenvalue(4, 2), -8.0);
    for k in 0..6 {
        assert_eq!(laplacian_eigenvalue(2, k), -((k * k) as f64));
    }
}

#[test]
fn heat_semigroup_multiplier_and_composition() {
    let f = ZonalCoefficients::new(3, vec![1.0, 0.5, -0.3, 0.1]).unwrap();
    let id = heat_semigroup_apply(&f, 0.0).unwrap();
    assert_eq!(id.coeffs(), f.coeffs());

    let s = heat_semigroup_apply(&f, 0.5).unwrap();
    assert_relative_eq!(s.coeff(1), 0.5 * (-1.0f64).exp(), max_relative = 1e-15);
    assert_abs_diff_eq!(s.coeff(0), 1.0);

    let far = heat_semigroup_apply(&f, 1e4).unwrap();
    assert_abs_diff_eq!(far.coeff(0), 1.0);
    for l in 1..=3 {
        assert_abs_diff_eq!(far.coeff(l), 0.0, epsilon = 1e-300);
    }

    // Composition agrees with the combined time to rounding.
    let ab = heat_semigroup_apply(&heat_semigroup_apply(&f, 0.2).unwrap(), 0.7).unwrap();
    let once = heat_semigroup_apply(&f, 0.9).unwrap();
    for l in 0..=3 {
        assert_relative_eq!(ab.coeff(l), once.coeff(l), max_relative = 1e-14);
    }

    assert!(heat_semigroup_apply(&f, -0.1).is_err());
}

#[test]
fn dirichlet_identity_spectral_vs_quadrature() {
    // Constant functions have zero Dirichlet energy.
    let q3 = QuadratureGrid::gauss_jacobi(3, 72).unwrap();
    let u = ZonalCoefficients::new(3, vec![1.0, 0.0]).unwrap();
    let v = heat_coeffs(3, 0.1, 1);
    let (lhs, rhs) = dirichlet_identity_check(&u, &v, &q3).unwrap();
    assert_abs_diff_eq!(lhs, 0.0, epsilon = 1e-14);
    assert_abs_diff_eq!(rhs, 0.0, epsilon = 1e-12);

    // Single degree-1 mode at n = 3 with V_1 = 1:
    // -lambda_1 c_1^2 Z_1(1) = 2 * c_1^2 * 3.
    let c1 = 0.4;
    let u = ZonalCoefficients::new(3, vec![1.0, c1]).unwrap();
    let v = ZonalCoefficients::new(3, vec![1.0, 1.0]).unwrap();
    let (lhs, rhs) = dirichlet_identity_check(&u, &v, &q3).unwrap();
    assert_relative_eq!(lhs, 2.0 * c1 * c1 * 3.0, max_relative = 1e-13);
    assert_relative_eq!(lhs, rhs, max_relative = 1e-10);

    // Random smooth functions, both dimensions.
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for &n in &[2usize, 3] {
        let l_max = 16;
        let q = QuadratureGrid::gauss_jacobi(n, 2 * l_max + 8).unwrap();
        for _ in 0..10 {
            let u = random_smooth(&mut rng, n, l_max, 0.3);
            let v = heat_coeffs(n, 0.05, l_max);
            let (lhs, rhs) = dirichlet_identity_check(&u, &v, &q).unwrap();
            assert!(
                (lhs - rhs).abs() <= 1e-6 * lhs.abs().max(1e-12),
                "n={n}: lhs={lhs}, rhs={rhs}"
            );
        }
    }
}

#[test]
fn delta_approximation_error_in_coefficients() {
    let u = ZonalCoefficients::new(3, vec![1.0, 0.4, -0.2]).unwrap();
    let exact = ZonalCoefficients::new(3, vec![1.0, 1.0, 1.0]).unwrap();
    assert_abs_diff_eq!(delta_approx_error(&u, &exact).unwrap(), 0.0, epsilon = 1e-15);

    let coarse = delta_approx_error(&u, &heat_coeffs(3, 0.1, 2)).unwrap();
    let fine = delta_approx_error(&u, &heat_coeffs(3, 0.01, 2)).unwrap();
    assert!(fine < coarse, "fine {fine} !< coarse {coarse}");

    let mean_only = ZonalCoefficients::new(3, vec![1.0, 0.0, 0.0]).unwrap();
    assert_abs_diff_eq!(
        delta_approx_error(&mean_only, &heat_coeffs(3, 0.5, 2)).unwrap(),
        0.0,
        epsilon = 1e-15
    );
}

#[test]
fn uniform_approximation_error() {
    let n = 3;
    let l_max = 32;
    let grid = QuadratureGrid::gauss_jacobi(n, 2 * l_max + 8).unwrap();

    let mut constant = ZonalFunction::from_fn(grid.clone(), |_| 1.0);
    let v = heat_coeffs(n, 0.1, l_max);
    let rep = uniform_approx_error(&mut constant, &v).unwrap();
    assert!(rep.sqrt_positivity_ok);
    assert_abs_diff_eq!(rep.sup_error, 0.0, epsilon = 1e-12);

    // u(theta) = cos theta: the error shrinks with the kernel width.
    let mut last = f64::INFINITY;
    for &eps in &[0.2, 0.1, 0.05] {
        let mut u = ZonalFunction::from_fn(grid.clone(), |t| t);
        let rep = uniform_approx_error(&mut u, &heat_coeffs(n, eps, l_max)).unwrap();
        assert!(rep.sup_error < last, "not decreasing at eps={eps}");
        last = rep.sup_error;

        // Sup norm dominates the L^2 distance (probability measure).
        let mut u2 = ZonalFunction::from_fn(grid.clone(), |t| t);
        let coeffs = u2.decompose(l_max).unwrap().clone();
        let l2 = delta_approx_error(&coeffs, &heat_coeffs(n, eps, l_max)).unwrap();
        assert!(rep.sup_error + 1e-9 >= l2);
    }
}

#[test]
fn probability_kernel_flag_and_sampled_consistency() {
    assert!(heat_coeffs(3, 0.2, 12).is_probability_kernel());
    assert!(!ZonalCoefficients::new(3, vec![0.9, 0.1]).unwrap().is_probability_kernel());
    assert!(!ZonalCoefficients::new(3, vec![1.0, -0.5]).unwrap().is_probability_kernel());

    // Values and cached coefficients agree after reconstruction.
    let grid = QuadratureGrid::gauss_jacobi(3, 72).unwrap();
    let mut f = ZonalFunction::from_fn(grid, |t| (0.8 * t).exp());
    assert_eq!(f.consistency_error(), None);
    f.decompose(24).unwrap();
    let err = f.consistency_error().unwrap();
    assert!(err <= 1e-8, "sampled/spectral gap {err}");
}

#[test]
fn sqrt_positivity_scan() {
    let heat = heat_coeffs(2, 0.3, 24);
    assert!(check_sqrt_positivity(&heat, 512).unwrap() > 0.0);

    // 1 + 2 cos(theta) dips to -1.
    let v = ZonalCoefficients::new(2, vec![1.0, 1.0]).unwrap();
    assert_abs_diff_eq!(check_sqrt_positivity(&v, 4097).unwrap(), -1.0, epsilon = 1e-6);

    let flat = ZonalCoefficients::new(2, vec![1.0, 0.0, 0.0]).unwrap();
    assert_abs_diff_eq!(check_sqrt_positivity(&flat, 64).unwrap(), 1.0);
}

#[test]
fn admissibility_checker() {
    let l_max = 24;
    let heat = |eps: f64| Ok(heat_coeffs(3, eps, l_max));
    let report = check_admissibility(heat, &[0.5, 0.1, 0.02], l_max, 1.0).unwrap();
    assert!(report.all_pass(), "heat family should pass: {report:?}");

    // The delta itself: constant-one spectrum has a divergent weighted tail.
    let delta = |_eps: f64| ZonalCoefficients::new(3, vec![1.0; l_max + 1]);
    let report = check_admissibility(delta, &[0.5, 0.1], l_max, 1.0).unwrap();
    assert!(!report.per_eps[0].tail_decaying);
    assert!(!report.all_pass());

    // Broken normalization.
    let off = |eps: f64| Ok(heat_coeffs(3, eps, l_max).map(|_, c| 0.9 * c));
    let report = check_admissibility(off, &[0.5, 0.1], l_max, 1.0).unwrap();
    assert!(!report.per_eps[0].normalized);
}
