//! Exact one-dimensional transport machinery on the circle.
//!
//! Positions live in `[0, 1)` turn units. Quantile functions are stored as
//! affine segments over cumulative mass and extended periodically by
//! `Q(s + 1) = Q(s) + 1`. For a convex cost of the lifted displacement the
//! circular transport cost is
//!
//! ```text
//! C(m) = int_0^1 |Q_mu(s) - Q_nu(s + m)|^p ds,
//! ```
//!
//! minimized over the mass shift `m`; `C` is convex in `m`, so a golden
//! section search locates the optimum (`p = 2`), while `p = 1` reduces to
//! a weighted median of the CDF difference. Both the per-shift cost and
//! the `p = 1` integral are evaluated in closed form per segment, so the
//! only approximation anywhere is the termination of the shift search.

/// Piecewise-affine quantile function on `[0, 1)`.
#[derive(Debug, Clone)]
pub(crate) struct QuantileFn {
    /// Segment boundaries in mass: `breaks[0] = 0 < ... < breaks[k] = 1`.
    breaks: Vec<f64>,
    /// Position at the left end of each segment.
    x0: Vec<f64>,
    /// Position slope `dx/ds` of each segment (0 for atoms).
    slope: Vec<f64>,
}

impl QuantileFn {
    /// From sorted atoms `(position in [0,1), weight)`, weights summing to 1.
    pub fn from_atoms(atoms: &[(f64, f64)]) -> Self {
        let mut breaks = vec![0.0];
        let mut x0 = Vec::new();
        let mut slope = Vec::new();
        let mut acc = 0.0;
        for &(x, w) in atoms {
            if w <= 0.0 {
                continue;
            }
            acc += w;
            breaks.push(acc);
            x0.push(x);
            slope.push(0.0);
        }
        *breaks.last_mut().unwrap() = 1.0;
        QuantileFn { breaks, x0, slope }
    }

    /// From cell densities on `m` equal cells, cell `i = [i/m, (i+1)/m)`,
    /// mean normalized to 1.
    pub fn from_grid_cells(values: &[f64]) -> Self {
        let m = values.len();
        let mut breaks = vec![0.0];
        let mut x0 = Vec::new();
        let mut slope = Vec::new();
        let mut acc = 0.0;
        for (i, &v) in values.iter().enumerate() {
            if v <= 0.0 {
                continue;
            }
            let mass = v / m as f64;
            acc += mass;
            breaks.push(acc);
            x0.push(i as f64 / m as f64);
            slope.push(1.0 / v);
        }
        *breaks.last_mut().unwrap() = 1.0;
        QuantileFn { breaks, x0, slope }
    }

    /// Index of the segment containing mass coordinate `s` in `[0, 1)`.
    fn segment_at(&self, s: f64) -> usize {
        let k = self.breaks.partition_point(|&b| b <= s);
        k.clamp(1, self.x0.len()) - 1
    }

    /// `Q(s)` with the periodic lift `Q(s + k) = Q(s) + k`.
    pub fn eval_lifted(&self, s: f64) -> f64 {
        let k = s.floor();
        let fr = (s - k).clamp(0.0, 1.0 - 1e-16);
        let j = self.segment_at(fr);
        k + self.x0[j] + self.slope[j] * (fr - self.breaks[j])
    }

    /// Affine data of the lifted quantile at mass coordinate `s`:
    /// `(value, slope)` such that `Q(s + ds) = value + slope * ds` within
    /// the surrounding segment.
    fn affine_at(&self, s: f64) -> (f64, f64) {
        let k = s.floor();
        let fr = (s - k).clamp(0.0, 1.0 - 1e-16);
        let j = self.segment_at(fr);
        (
            k + self.x0[j] + self.slope[j] * (fr - self.breaks[j]),
            self.slope[j],
        )
    }

    fn breaks(&self) -> &[f64] {
        &self.breaks
    }
}

/// Exact `int_0^1 |Q_mu(s) - Q_nu(s + shift)|^p ds` for `p` in `{1, 2}`.
pub(crate) fn shifted_cost(mu: &QuantileFn, nu: &QuantileFn, shift: f64, p: u32) -> f64 {
    // Merge breakpoints of mu with the pullbacks of nu's breakpoints.
    let mut cuts: Vec<f64> = mu.breaks().to_vec();
    for &b in nu.breaks() {
        // s + shift = b + k  =>  s = b - shift + k
        let base = b - shift;
        let k0 = (0.0 - base).floor();
        for k in [k0, k0 + 1.0, k0 + 2.0] {
            let s = base + k;
            if s > 0.0 && s < 1.0 {
                cuts.push(s);
            }
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);

    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (u0, u1) = (w[0], w[1]);
        let h = u1 - u0;
        if h <= 0.0 {
            continue;
        }
        let sm = 0.5 * (u0 + u1);
        let (qm, dm) = mu.affine_at(sm);
        let (qn, dn) = nu.affine_at(sm + shift);
        // g(tau) = g0 + gamma * tau on tau in [0, h], with tau = s - u0.
        let gamma = dm - dn;
        let g_mid = qm - qn;
        let g0 = g_mid - gamma * (sm - u0);
        total += match p {
            2 => g0 * g0 * h + g0 * gamma * h * h + gamma * gamma * h * h * h / 3.0,
            1 => {
                let g1 = g0 + gamma * h;
                if gamma.abs() < 1e-300 || g0 * g1 >= 0.0 {
                    0.5 * (g0.abs() + g1.abs()) * h
                } else {
                    (g0 * g0 + g1 * g1) / (2.0 * gamma.abs())
                }
            }
            _ => unreachable!("only p = 1, 2 are supported"),
        };
    }
    total
}

/// Minimizes the shifted quadratic cost by golden-section search; the cost
/// is convex in the shift. Returns `(shift, cost)`.
pub(crate) fn min_quadratic_cost(mu: &QuantileFn, nu: &QuantileFn) -> (f64, f64) {
    // C(m) >= (|m| - 1)^2 while the diameter bounds C(m*) <= 1/4, so the
    // minimizer lies in [-1.5, 1.5].
    let (mut a, mut b) = (-1.6f64, 1.6f64);
    let inv_phi = 0.618_033_988_749_894_8;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = shifted_cost(mu, nu, c, 2);
    let mut fd = shifted_cost(mu, nu, d, 2);
    while (b - a) > 1e-12 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = shifted_cost(mu, nu, c, 2);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = shifted_cost(mu, nu, d, 2);
        }
    }
    let shift = 0.5 * (a + b);
    let cost = shifted_cost(mu, nu, shift, 2);
    // Optimality certificate: the cost is convex, so both one-sided
    // perturbations must not improve.
    let eps = 1e-6;
    let left = shifted_cost(mu, nu, shift - eps, 2);
    let right = shifted_cost(mu, nu, shift + eps, 2);
    assert!(
        left + 1e-9 >= cost && right + 1e-9 >= cost,
        "golden search certificate failed: C({shift}) = {cost}, neighbors {left}, {right}"
    );
    (shift, cost)
}

/// One marginal's contribution to the CDF difference: jumps (atoms) and
/// ramps (grid cells), signed.
#[derive(Debug, Clone, Copy)]
enum CdfEvent {
    Jump { x: f64, w: f64 },
    Ramp { x0: f64, x1: f64, w: f64 },
}

fn cdf_events(dist: &super::CircularDistribution, sign: f64) -> Vec<CdfEvent> {
    match dist {
        super::CircularDistribution::Atoms(atoms) => atoms
            .iter()
            .map(|&(angle, w)| CdfEvent::Jump {
                x: angle / std::f64::consts::TAU,
                w: sign * w,
            })
            .collect(),
        super::CircularDistribution::Grid(values) => {
            let m = values.len();
            values
                .iter()
                .enumerate()
                .map(|(i, &v)| CdfEvent::Ramp {
                    x0: i as f64 / m as f64,
                    x1: (i + 1) as f64 / m as f64,
                    w: sign * v / m as f64,
                })
                .collect()
        }
    }
}

/// Exact circular `W_1` in turn units via the CDF-shift formula
/// `min_c int_0^1 |F_mu(x) - F_nu(x) - c| dx`, with `c` the Lebesgue
/// median of the CDF difference.
pub(crate) fn w1_circle_turns(
    mu: &super::CircularDistribution,
    nu: &super::CircularDistribution,
) -> f64 {
    let mut events = cdf_events(mu, 1.0);
    events.extend(cdf_events(nu, -1.0));

    // Position breakpoints.
    let mut xs: Vec<f64> = vec![0.0, 1.0];
    for e in &events {
        match e {
            CdfEvent::Jump { x, .. } => xs.push(*x),
            CdfEvent::Ramp { x0, x1, .. } => {
                xs.push(*x0);
                xs.push(*x1);
            }
        }
    }
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup_by(|a, b| (*a - *b).abs() < 1e-15);

    // H = F_mu - F_nu is affine between breakpoints. Accumulate its value
    // at each breakpoint (right limit) and the slope on each interval.
    let n = xs.len();
    let mut pieces = Vec::with_capacity(n - 1);
    let mut h_at = 0.0;
    for j in 0..n - 1 {
        let (x0, x1) = (xs[j], xs[j + 1]);
        // Apply jumps located at x0.
        for e in &events {
            if let CdfEvent::Jump { x, w } = e {
                if (*x - x0).abs() < 1e-15 {
                    h_at += w;
                }
            }
        }
        // Slope from ramps covering (x0, x1).
        let mid = 0.5 * (x0 + x1);
        let mut slope = 0.0;
        for e in &events {
            if let CdfEvent::Ramp { x0: r0, x1: r1, w } = e {
                if mid > *r0 && mid < *r1 {
                    slope += w / (r1 - r0);
                }
            }
        }
        let len = x1 - x0;
        let h_end = h_at + slope * len;
        pieces.push((len, h_at, h_end));
        h_at = h_end;
    }

    // Lebesgue median of H: G(c) = |{x : H(x) <= c}| = 1/2.
    let measure_below = |c: f64| -> f64 {
        pieces
            .iter()
            .map(|&(len, a, b)| {
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                if hi - lo < 1e-300 {
                    if c >= lo {
                        len
                    } else {
                        0.0
                    }
                } else {
                    len * ((c - lo) / (hi - lo)).clamp(0.0, 1.0)
                }
            })
            .sum()
    };
    let mut lo = pieces
        .iter()
        .map(|p| p.1.min(p.2))
        .fold(f64::INFINITY, f64::min);
    let mut hi = pieces
        .iter()
        .map(|p| p.1.max(p.2))
        .fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let c = 0.5 * (lo + hi);
        if measure_below(c) < 0.5 {
            lo = c;
        } else {
            hi = c;
        }
    }
    let c = 0.5 * (lo + hi);

    // Exact integral of |H - c| piece by piece.
    pieces
        .iter()
        .map(|&(len, a, b)| {
            let (g0, g1) = (a - c, b - c);
            if g0 * g1 >= 0.0 {
                0.5 * (g0.abs() + g1.abs()) * len
            } else {
                let gamma = (g1 - g0) / len;
                (g0 * g0 + g1 * g1) / (2.0 * gamma.abs())
            }
        })
        .sum()
}

/// Optimal quadratic transport of a grid distribution onto an arbitrary
/// one: squared distance (turn^2 units) plus the displacement field at the
/// grid cell midpoints (turn units, lifted sign convention).
pub(crate) struct GridTransport {
    pub cost_turns_sq: f64,
    pub displacement_at_midpoints: Vec<f64>,
}

pub(crate) fn grid_transport(values: &[f64], nu: &QuantileFn) -> GridTransport {
    let mu = QuantileFn::from_grid_cells(values);
    let (shift, cost) = min_quadratic_cost(&mu, nu);
    let m = values.len();
    let mut displacement = Vec::with_capacity(m);
    let mut acc = 0.0;
    for (i, &v) in values.iter().enumerate() {
        let mass = v.max(0.0) / m as f64;
        let s_mid = (acc + 0.5 * mass).min(1.0 - 1e-16);
        acc += mass;
        let x_mid = (i as f64 + 0.5) / m as f64;
        displacement.push(x_mid - nu.eval_lifted(s_mid + shift));
    }
    GridTransport {
        cost_turns_sq: cost,
        displacement_at_midpoints: displacement,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn atom_quantiles_evaluate_and_lift() {
        let q = QuantileFn::from_atoms(&[(0.1, 0.25), (0.6, 0.75)]);
        assert_abs_diff_eq!(q.eval_lifted(0.1), 0.1);
        assert_abs_diff_eq!(q.eval_lifted(0.9), 0.6);
        assert_abs_diff_eq!(q.eval_lifted(1.1), 1.1);
        assert_abs_diff_eq!(q.eval_lifted(-0.5), 0.6 - 1.0);
    }

    #[test]
    fn grid_quantiles_are_piecewise_linear() {
        // Uniform density: Q(s) = s.
        let q = QuantileFn::from_grid_cells(&[1.0, 1.0, 1.0, 1.0]);
        for &s in &[0.0, 0.2, 0.5, 0.9] {
            assert_abs_diff_eq!(q.eval_lifted(s), s, epsilon = 1e-14);
        }
    }

    #[test]
    fn zero_cost_for_identical_marginals() {
        let q = QuantileFn::from_grid_cells(&[0.5, 1.5, 1.2, 0.8]);
        assert_abs_diff_eq!(shifted_cost(&q, &q, 0.0, 2), 0.0, epsilon = 1e-15);
        let (shift, cost) = min_quadratic_cost(&q, &q);
        assert_abs_diff_eq!(cost, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(shift, 0.0, epsilon = 1e-6);
    }

    #[test]
    fn atom_pair_cost_is_the_wrapped_distance() {
        for &(x, y) in &[(0.1, 0.2), (0.05, 0.95), (0.3, 0.85)] {
            let mu = QuantileFn::from_atoms(&[(x, 1.0)]);
            let nu = QuantileFn::from_atoms(&[(y, 1.0)]);
            let (_, cost) = min_quadratic_cost(&mu, &nu);
            let d = (x - y).abs().min(1.0 - (x - y).abs());
            assert_abs_diff_eq!(cost, d * d, epsilon = 1e-10);
        }
    }
}
