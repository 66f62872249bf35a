//! Gauss–Jacobi quadrature for the polar-angle pushforward of the uniform
//! sphere measure.
//!
//! Under `t = <p, x>` the uniform probability measure on `S^{n-1}` pushes
//! forward to `c_n (1 - t^2)^{(n-3)/2} dt` on `[-1, 1]`. Nodes and weights
//! come from the Golub–Welsch eigenvalue method applied to the symmetric
//! Jacobi recurrence with `alpha = beta = (n-3)/2`; weights are rescaled to
//! sum to one, which absorbs the normalization constant.

use crate::error::{CoreError, Result};
use nalgebra::DMatrix;

/// Quadrature representation of the measure `mu_n` on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    dim: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureGrid {
    /// Builds an `m`-point rule for sphere dimension parameter `n >= 2`.
    ///
    /// The rule integrates polynomials up to degree `2m - 1` exactly
    /// against `mu_n`.
    pub fn gauss_jacobi(n: usize, m: usize) -> Result<Self> {
        if n < 2 {
            return Err(CoreError::InvalidArgument(format!(
                "sphere dimension parameter must be >= 2, got {n}"
            )));
        }
        if m < 2 {
            return Err(CoreError::InvalidArgument(format!(
                "quadrature needs at least 2 nodes, got {m}"
            )));
        }
        let a = (n as f64 - 3.0) / 2.0; // alpha = beta

        // Off-diagonal entries of the symmetric Jacobi matrix. The diagonal
        // vanishes because the weight is even. The k = 1 entry needs the
        // cancellation-safe form (the generic one is 0/0 at alpha+beta = -1).
        let mut off = Vec::with_capacity(m - 1);
        for k in 1..m {
            let kf = k as f64;
            let b2 = if k == 1 {
                // 4 (a+1)^2 / ((2a+2)^2 (2a+3))
                1.0 / (2.0 * a + 3.0)
            } else {
                let s = 2.0 * kf + 2.0 * a;
                4.0 * kf * (kf + a).powi(2) * (kf + 2.0 * a) / (s * s * (s + 1.0) * (s - 1.0))
            };
            off.push(b2.sqrt());
        }

        let mut jac = DMatrix::<f64>::zeros(m, m);
        for (k, b) in off.iter().enumerate() {
            jac[(k, k + 1)] = *b;
            jac[(k + 1, k)] = *b;
        }
        let eigen = jac.symmetric_eigen();

        let mut pairs: Vec<(f64, f64)> = (0..m)
            .map(|i| {
                let node = eigen.eigenvalues[i];
                let first = eigen.eigenvectors[(0, i)];
                (node, first * first)
            })
            .collect();
        pairs.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());

        let total: f64 = pairs.iter().map(|p| p.1).sum();
        let nodes = pairs.iter().map(|p| p.0.clamp(-1.0, 1.0)).collect();
        let weights = pairs.iter().map(|p| p.1 / total).collect();
        Ok(QuadratureGrid { dim: n, nodes, weights })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `sum_i w_i f(t_i)`, the quadrature value of `int f d(mu_n)`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(t))
            .sum()
    }

    pub fn integrate_values(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        values
            .iter()
            .zip(&self.weights)
            .map(|(&v, &w)| w * v)
            .sum()
    }
}
