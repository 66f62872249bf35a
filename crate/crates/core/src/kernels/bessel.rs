//! Ratios of modified Bessel functions of the first kind.
//!
//! The exponential kernel family needs `I_{nu+l}(x) / I_nu(x)` for all
//! `l <= L` with `x = 1/eps` possibly large, where the functions
//! themselves overflow long before the ratios do. The chain
//! `r_mu = I_mu / I_{mu-1}` satisfies `r_mu = 1 / (2 mu / x + r_{mu+1})`,
//! which is contractive downward; we seed the top of the chain with the
//! continued fraction
//!
//! ```text
//! r_mu = 1 / (2 mu/x + 1 / (2(mu+1)/x + 1 / ...))
//! ```
//!
//! evaluated by the modified Lentz algorithm, and recurse down.

use crate::error::{CoreError, Result};

const LENTZ_TINY: f64 = 1e-300;
const LENTZ_EPS: f64 = 1e-16;
const LENTZ_MAX_ITER: usize = 10_000_000;

/// `I_mu(x) / I_{mu-1}(x)` by modified Lentz on the ratio continued fraction.
fn ratio_continued_fraction(mu: f64, x: f64) -> Result<f64> {
    // f = b_0 + 1/(b_1 + 1/(b_2 + ...)), b_k = 2(mu+k)/x; the ratio is 1/f.
    let b0 = 2.0 * mu / x;
    let mut f = if b0 == 0.0 { LENTZ_TINY } else { b0 };
    let mut c = f;
    let mut d = 0.0;
    for k in 1..LENTZ_MAX_ITER {
        let b = 2.0 * (mu + k as f64) / x;
        d += b;
        if d == 0.0 {
            d = LENTZ_TINY;
        }
        c = b + 1.0 / c;
        if c == 0.0 {
            c = LENTZ_TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < LENTZ_EPS {
            return Ok(1.0 / f);
        }
    }
    Err(CoreError::ParameterRange(format!(
        "Bessel ratio continued fraction did not converge (mu = {mu}, x = {x})"
    )))
}

/// All ratios `I_{nu+l}(x) / I_nu(x)` for `l = 0..=l_max`.
///
/// Positive, strictly decreasing in `l` until they underflow to zero.
pub fn ratio_sequence(nu: f64, x: f64, l_max: usize) -> Result<Vec<f64>> {
    if !(x > 0.0) || !nu.is_finite() || nu < 0.0 {
        return Err(CoreError::InvalidArgument(format!(
            "Bessel ratios need x > 0 and nu >= 0 (got nu = {nu}, x = {x})"
        )));
    }
    if x > 1e6 {
        return Err(CoreError::ParameterRange(format!(
            "argument x = {x} exceeds the supported range 1e6"
        )));
    }
    if l_max == 0 {
        return Ok(vec![1.0]);
    }

    // links[l] = I_{nu+l} / I_{nu+l-1}, l = 1..=l_max
    let mut links = vec![0.0; l_max + 1];
    links[l_max] = ratio_continued_fraction(nu + l_max as f64, x)?;
    for l in (1..l_max).rev() {
        let down = 1.0 / (2.0 * (nu + l as f64) / x + links[l + 1]);
        links[l] = down;
    }

    let mut out = Vec::with_capacity(l_max + 1);
    out.push(1.0);
    let mut acc = 1.0;
    for link in links.iter().skip(1) {
        acc *= link;
        out.push(acc);
    }
    Ok(out)
}
