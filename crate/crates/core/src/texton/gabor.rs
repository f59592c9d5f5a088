//! Gabor kernels and the filter-bank grid.

use num_complex::Complex32;

use crate::{Error, Result};

/// Parameters of one complex Gabor filter.
///
/// The kernel value at `(x, y)` is
/// `exp(-(x'^2 + gamma^2 y'^2) / (2 sigma^2)) * exp(i (2 pi x' / lambda + psi))`
/// with `x' = x cos(theta) + y sin(theta)` and
/// `y' = -x sin(theta) + y cos(theta)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaborParams {
    /// Spatial orientation, radians.
    pub theta: f32,
    /// Standard deviation of the Gaussian envelope.
    pub sigma: f32,
    /// Wavelength of the sinusoid.
    pub lambda: f32,
    /// Phase shift, radians.
    pub psi: f32,
    /// Spatial aspect ratio of the envelope.
    pub gamma: f32,
}

impl GaborParams {
    pub fn validate(&self) -> Result<()> {
        if self.sigma <= 0.0 || self.lambda <= 0.0 || self.gamma <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "sigma, lambda and gamma must be positive (sigma={}, lambda={}, gamma={})",
                self.sigma, self.lambda, self.gamma
            )));
        }
        Ok(())
    }
}

/// Sampled complex Gabor kernel on an odd square grid.
#[derive(Clone, Debug)]
pub struct GaborKernel {
    half_width: usize,
    values: Vec<Complex32>,
}

impl GaborKernel {
    pub fn half_width(&self) -> usize {
        self.half_width
    }

    /// Kernel side length, always odd.
    pub fn side(&self) -> usize {
        2 * self.half_width + 1
    }

    /// Value at signed offsets `(x, y)`, each in `[-half_width, half_width]`.
    pub fn get(&self, x: isize, y: isize) -> Complex32 {
        let h = self.half_width as isize;
        debug_assert!(x.abs() <= h && y.abs() <= h);
        self.values[((y + h) * self.side() as isize + (x + h)) as usize]
    }

    /// Row-major values, y-fastest rows of length `side()`.
    pub fn values(&self) -> &[Complex32] {
        &self.values
    }
}

/// Samples the raw (unnormalized) Gabor formula on a
/// `(2 * half_width + 1)^2` grid.
pub fn gabor_kernel(p: &GaborParams, half_width: usize) -> GaborKernel {
    assert!(half_width >= 1, "half_width must be at least 1");
    let side = 2 * half_width + 1;
    let (sin_t, cos_t) = (p.theta as f64).sin_cos();
    let sigma2 = 2.0 * (p.sigma as f64) * (p.sigma as f64);
    let gamma2 = (p.gamma as f64) * (p.gamma as f64);
    let freq = 2.0 * std::f64::consts::PI / p.lambda as f64;
    let mut values = Vec::with_capacity(side * side);
    let h = half_width as isize;
    for y in -h..=h {
        for x in -h..=h {
            let xr = x as f64 * cos_t + y as f64 * sin_t;
            let yr = -(x as f64) * sin_t + y as f64 * cos_t;
            let env = (-(xr * xr + gamma2 * yr * yr) / sigma2).exp();
            let phase = freq * xr + p.psi as f64;
            values.push(Complex32::new(
                (env * phase.cos()) as f32,
                (env * phase.sin()) as f32,
            ));
        }
    }
    GaborKernel { half_width, values }
}

/// Cartesian parameter grid from which the bank is built.
#[derive(Clone, Debug, PartialEq)]
pub struct GaborGrid {
    /// Orientations in radians.
    pub thetas: Vec<f32>,
    /// Gaussian envelope standard deviations.
    pub sigmas: Vec<f32>,
    /// Sinusoid wavelengths.
    pub lambdas: Vec<f32>,
    /// Shared phase shift.
    pub psi: f32,
    /// Shared aspect ratio.
    pub gamma: f32,
}

impl Default for GaborGrid {
    /// Six orientations, five envelope widths, four wavelengths: 120 filters.
    fn default() -> Self {
        let deg = |d: f32| d.to_radians();
        GaborGrid {
            thetas: vec![deg(0.0), deg(30.0), deg(45.0), deg(60.0), deg(90.0), deg(120.0)],
            sigmas: vec![0.3, 0.6, 0.9, 1.2, 1.5],
            lambdas: vec![0.8, 1.0, 1.2, 1.5],
            psi: 0.0,
            gamma: 0.5,
        }
    }
}

/// A bank of sampled Gabor kernels with their parameters.
#[derive(Clone, Debug)]
pub struct FilterBank {
    filters: Vec<(GaborParams, GaborKernel)>,
}

impl FilterBank {
    pub fn len(&self) -> usize {
        self.filters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filters.is_empty()
    }

    pub fn params(&self, i: usize) -> &GaborParams {
        &self.filters[i].0
    }

    pub fn kernel(&self, i: usize) -> &GaborKernel {
        &self.filters[i].1
    }

    pub fn iter(&self) -> impl Iterator<Item = &(GaborParams, GaborKernel)> {
        self.filters.iter()
    }
}

/// Pixel half-extent used when sampling a kernel of envelope width `sigma`.
pub fn kernel_half_width(sigma: f32) -> usize {
    ((3.0 * sigma as f64).ceil() as usize).max(1)
}

/// Builds the Cartesian product bank `theta x sigma x lambda`; each kernel is
/// sampled with `half_width = max(1, ceil(3 sigma))`.
pub fn build_filter_bank(grid: &GaborGrid) -> Result<FilterBank> {
    if grid.thetas.is_empty() || grid.sigmas.is_empty() || grid.lambdas.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut filters = Vec::with_capacity(grid.thetas.len() * grid.sigmas.len() * grid.lambdas.len());
    for &theta in &grid.thetas {
        for &sigma in &grid.sigmas {
            for &lambda in &grid.lambdas {
                let p = GaborParams {
                    theta,
                    sigma,
                    lambda,
                    psi: grid.psi,
                    gamma: grid.gamma,
                };
                p.validate()?;
                filters.push((p, gabor_kernel(&p, kernel_half_width(sigma))));
            }
        }
    }
    Ok(FilterBank { filters })
}
