//! Concrete kernel families.
//!
//! All kernels are stored as [`ZonalCoefficients`] normalized so that
//! probability kernels carry `c_0 = 1`. Families:
//!
//! * heat kernel: `c_l = exp(-l (l + n - 2) eps)`;
//! * exponential repulsion `alpha_eps e^{t/eps}`: `c_l =
//!   I_{l+(n-2)/2}(1/eps) / I_{(n-2)/2}(1/eps)` via Bessel ratios;
//! * exponential attraction `W_beta(t) = -(1/beta) e^{beta t}`, decomposed
//!   by quadrature (its spectrum is strictly negative).

pub mod bessel;

use crate::error::{CoreError, Result};
use crate::spectral::{
    decompose_kernel, laplacian_eigenvalue, reconstruct_kernel, zonal_norm_sq, QuadratureGrid,
    ZonalCoefficients,
};
use std::fmt;
use std::path::PathBuf;

/// Heat kernel spectrum `c_l = exp(-l (l + n - 2) eps)`, `c_0 = 1`.
pub fn heat_kernel_coeffs(n: usize, eps: f64, l_max: usize) -> Result<ZonalCoefficients> {
    if !(eps > 0.0) {
        return Err(CoreError::InvalidArgument(format!(
            "heat kernel scale must be positive, got {eps}"
        )));
    }
    ZonalCoefficients::new(
        n,
        (0..=l_max)
            .map(|l| (eps * laplacian_eigenvalue(n, l)).exp())
            .collect(),
    )
}

/// Spectrum of the normalized exponential kernel `alpha_eps e^{t/eps}`:
/// Bessel ratios `I_{l+nu}(1/eps) / I_nu(1/eps)` with `nu = (n-2)/2`.
///
/// Strictly decreasing in `l` and contained in `(0, 1]`; scales with
/// `1/eps > 1e6` are rejected.
pub fn exponential_kernel_coeffs(n: usize, eps: f64, l_max: usize) -> Result<ZonalCoefficients> {
    if !(eps > 0.0) {
        return Err(CoreError::InvalidArgument(format!(
            "exponential kernel scale must be positive, got {eps}"
        )));
    }
    let nu = (n as f64 - 2.0) / 2.0;
    let ratios = bessel::ratio_sequence(nu, 1.0 / eps, l_max)?;
    ZonalCoefficients::new(n, ratios)
}

/// The attraction kernel `W_beta(t) = -(1/beta) e^{beta t}` together with
/// its spectral decomposition (all coefficients negative), scaled by the
/// head weight `alpha`.
#[derive(Debug, Clone)]
pub struct AttractionKernel {
    pub beta: f64,
    pub alpha: f64,
    pub coeffs: ZonalCoefficients,
}

impl AttractionKernel {
    pub fn new(n: usize, beta: f64, alpha: f64, l_max: usize) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(CoreError::InvalidArgument(format!(
                "attraction inverse temperature must be positive, got {beta}"
            )));
        }
        let grid = QuadratureGrid::gauss_jacobi(n, (2 * l_max + 8).max(24))?;
        let coeffs = decompose_kernel(|t| alpha * -(1.0 / beta) * (beta * t).exp(), &grid, l_max)?;
        Ok(AttractionKernel { beta, alpha, coeffs })
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.alpha * -(1.0 / self.beta) * (self.beta * t).exp()
    }
}

/// Max of `|K|` over a dense uniform sample of `[-1, 1]`, endpoints included.
pub fn linf_norm(kernel: impl Fn(f64) -> f64, samples: usize) -> f64 {
    let m = samples.max(2);
    (0..m)
        .map(|i| -1.0 + 2.0 * i as f64 / (m - 1) as f64)
        .map(|t| kernel(t).abs())
        .fold(0.0, f64::max)
}

/// Sup norm of the zonal Laplacian `sum_l lambda_l K_l Z_l(t)` applied
/// spectrally, with a truncation flag.
#[derive(Debug, Clone, Copy)]
pub struct LaplacianLinfReport {
    pub value: f64,
    /// False when the last retained term is not negligible against the
    /// result (`|lambda_L K_L Z_L(1)| > 1e-8 * value`).
    pub truncation_ok: bool,
}

pub fn laplacian_linf(kernel: &ZonalCoefficients, samples: usize) -> LaplacianLinfReport {
    let n = kernel.dim();
    let lap = kernel.map(|l, c| laplacian_eigenvalue(n, l) * c);
    let m = samples.max(2);
    let value = (0..m)
        .map(|i| -1.0 + 2.0 * i as f64 / (m - 1) as f64)
        .map(|t| reconstruct_kernel(&lap, t).abs())
        .fold(0.0, f64::max);
    let l = kernel.l_max();
    let tail = (laplacian_eigenvalue(n, l) * kernel.coeff(l) * zonal_norm_sq(n, l)).abs();
    LaplacianLinfReport {
        value,
        truncation_ok: tail <= 1e-8 * value.max(1e-300),
    }
}

/// Parsed kernel specification string.
///
/// Grammar: `heat:eps=<x>`, `exp:eps=<x>`, `attract:beta=<x>[:alpha=<x>]`,
/// `table:path=<file>`, `none`.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    Heat { eps: f64 },
    Exponential { eps: f64 },
    Attraction { beta: f64, alpha: f64 },
    Table { path: PathBuf },
    None,
}

impl KernelSpec {
    pub fn parse(s: &str) -> Result<Self> {
        let err = |detail: String| CoreError::Parse { line: 0, detail };
        let mut parts = s.trim().split(':');
        let kind = parts.next().unwrap_or("");
        let mut fields = std::collections::BTreeMap::new();
        for p in parts {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| err(format!("kernel field '{p}' is not key=value")))?;
            if fields.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                return Err(err(format!("duplicate kernel field '{k}'")));
            }
        }
        let take_f64 = |fields: &mut std::collections::BTreeMap<String, String>,
                        key: &str|
         -> Result<f64> {
            let raw = fields
                .remove(key)
                .ok_or_else(|| err(format!("kernel spec '{s}' is missing '{key}='")))?;
            raw.parse::<f64>()
                .map_err(|_| err(format!("cannot parse '{key}={raw}' as a number")))
        };
        let spec = match kind {
            "heat" => KernelSpec::Heat {
                eps: take_f64(&mut fields, "eps")?,
            },
            "exp" => KernelSpec::Exponential {
                eps: take_f64(&mut fields, "eps")?,
            },
            "attract" => {
                let beta = take_f64(&mut fields, "beta")?;
                let alpha = if fields.contains_key("alpha") {
                    take_f64(&mut fields, "alpha")?
                } else {
                    1.0
                };
                KernelSpec::Attraction { beta, alpha }
            }
            "table" => {
                let path = fields
                    .remove("path")
                    .ok_or_else(|| err(format!("kernel spec '{s}' is missing 'path='")))?;
                KernelSpec::Table { path: path.into() }
            }
            "none" | "" => KernelSpec::None,
            other => return Err(err(format!("unknown kernel kind '{other}'"))),
        };
        if let Some(k) = fields.keys().next() {
            return Err(err(format!("unknown kernel field '{k}' in '{s}'")));
        }
        Ok(spec)
    }

    /// Builds the coefficient table at the requested dimension and degree.
    /// Table kernels bypass all closed forms and are read as-is.
    pub fn build(&self, n: usize, l_max: usize) -> Result<Option<ZonalCoefficients>> {
        match self {
            KernelSpec::Heat { eps } => Ok(Some(heat_kernel_coeffs(n, *eps, l_max)?)),
            KernelSpec::Exponential { eps } => {
                Ok(Some(exponential_kernel_coeffs(n, *eps, l_max)?))
            }
            KernelSpec::Attraction { beta, alpha } => {
                Ok(Some(AttractionKernel::new(n, *beta, *alpha, l_max)?.coeffs))
            }
            KernelSpec::Table { path } => {
                let c = crate::spectral::read_coeffs(path)?;
                if c.dim() != n {
                    return Err(CoreError::DimensionMismatch {
                        left: c.dim(),
                        right: n,
                    });
                }
                Ok(Some(c))
            }
            KernelSpec::None => Ok(None),
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Heat { eps } => write!(f, "heat:eps={eps}"),
            KernelSpec::Exponential { eps } => write!(f, "exp:eps={eps}"),
            KernelSpec::Attraction { beta, alpha } => {
                write!(f, "attract:beta={beta}:alpha={alpha}")
            }
            KernelSpec::Table { path } => write!(f, "table:path={}", path.display()),
            KernelSpec::None => write!(f, "none"),
        }
    }
}
