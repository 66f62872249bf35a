//! Direct-quadrature reference path for the convolution theorem.
//!
//! `(K * f)(x)` is evaluated without any coefficient arithmetic: writing
//! `y = t p + sqrt(1-t^2) w` with `w` orthogonal to the pole `p`, the
//! sphere integral splits into the polar pushforward in `t` and a sphere
//! integral one dimension down in `u = <x_perp, w>/|x_perp|`,
//!
//! ```text
//! (K * f)(cos h) = int int f(t) K(t cos h + u sin h sqrt(1-t^2))
//!                  d mu_{n-1}(u) d mu_n(t).
//! ```
//!
//! This is the oracle the spectral multiplier is tested against; it shares
//! no code with the coefficient route.

use super::QuadratureGrid;
use crate::error::Result;

/// Inner/outer double quadrature for `(K * f)` at polar angle `theta`
/// (so the result is the zonal profile of the convolution at
/// `t = cos(theta)`).
pub fn direct_convolution_at(
    n: usize,
    kernel: &dyn Fn(f64) -> f64,
    f: &dyn Fn(f64) -> f64,
    cos_theta: f64,
    m: usize,
) -> Result<f64> {
    let outer = QuadratureGrid::gauss_jacobi(n, m)?;
    let sin_theta = (1.0 - cos_theta * cos_theta).max(0.0).sqrt();

    // mu_{n-1}: for n = 2 the fiber is S^0 = {-1, +1} with equal mass.
    let inner: Vec<(f64, f64)> = if n == 2 {
        vec![(-1.0, 0.5), (1.0, 0.5)]
    } else {
        let g = QuadratureGrid::gauss_jacobi(n - 1, m)?;
        g.nodes().iter().cloned().zip(g.weights().iter().cloned()).collect()
    };

    let mut total = 0.0;
    for (&t, &wt) in outer.nodes().iter().zip(outer.weights()) {
        let radial = (1.0 - t * t).max(0.0).sqrt();
        let mut fiber = 0.0;
        for &(u, wu) in &inner {
            fiber += wu * kernel(t * cos_theta + u * sin_theta * radial);
        }
        total += wt * f(t) * fiber;
    }
    Ok(total)
}
