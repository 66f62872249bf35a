//! Shared fixtures for the benchmark targets.

use sphereflow_core::kernels::{heat_kernel_coeffs, AttractionKernel};
use sphereflow_core::pde::{DensityState, SphericalBasis};
use sphereflow_core::spectral::ZonalCoefficients;

pub struct CircleFixture {
    pub basis: SphericalBasis,
    pub state: DensityState,
    pub w: ZonalCoefficients,
    pub v: ZonalCoefficients,
}

pub fn circle_fixture(l_max: usize, grid: usize) -> CircleFixture {
    let basis = SphericalBasis::circle(l_max, grid).unwrap();
    let state = DensityState::normalized_from_fn(&basis, |a| 1.0 + 0.5 * a.cos()).unwrap();
    let w = AttractionKernel::new(2, 1.0, 1.0, l_max).unwrap().coeffs;
    let v = heat_kernel_coeffs(2, 0.1, l_max).unwrap();
    CircleFixture { basis, state, w, v }
}
