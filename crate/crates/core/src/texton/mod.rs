//! Texton features: Gabor filter-bank responses, k-means texton codebooks,
//! per-voxel texton maps and windowed texton histograms.

mod gabor;
mod kmeans;

pub use gabor::{
    build_filter_bank, gabor_kernel, kernel_half_width, FilterBank, GaborGrid, GaborKernel,
    GaborParams,
};
pub use kmeans::{kmeans_fit, KMeansFit, TextonCodebook};

use crate::parallel;
use crate::volume::{Dims, Volume3D};
use crate::{Error, Result};

/// Texton-stage settings shared by training and inference.
#[derive(Clone, Debug, PartialEq)]
pub struct TextonConfig {
    /// Clusters per modality codebook.
    pub k: usize,
    /// Side of the histogram window around each voxel, odd.
    pub window: usize,
    /// Use a cubic `window^3` neighbourhood instead of the in-plane square.
    pub window_3d: bool,
    /// Gabor parameter grid.
    pub grid: GaborGrid,
    /// Upper bound on foreground voxels sampled per modality when fitting
    /// the codebooks.
    pub sample_cap: usize,
    /// k-means iteration cap.
    pub max_iter: usize,
    /// k-means centroid-shift stopping tolerance.
    pub tol: f64,
}

impl Default for TextonConfig {
    fn default() -> Self {
        TextonConfig {
            k: 16,
            window: 5,
            window_3d: false,
            grid: GaborGrid::default(),
            sample_cap: 200_000,
            max_iter: 100,
            tol: 1e-4,
        }
    }
}

impl TextonConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::InvalidParameter("texton k must be at least 1".into()));
        }
        if self.window % 2 == 0 || self.window == 0 {
            return Err(Error::InvalidParameter(format!(
                "texton window must be odd and positive, got {}",
                self.window
            )));
        }
        Ok(())
    }
}

/// Per-voxel filter-response vectors, voxel-major with the filter index
/// fastest.
#[derive(Clone, Debug)]
pub struct ResponseStack {
    dims: Dims,
    n_filters: usize,
    data: Vec<f32>,
}

impl ResponseStack {
    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn n_filters(&self) -> usize {
        self.n_filters
    }

    /// Response vector of the voxel with linear index `i`.
    pub fn response(&self, i: usize) -> &[f32] {
        &self.data[i * self.n_filters..(i + 1) * self.n_filters]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }
}

/// Convolves every axial slice with every kernel of the bank.
///
/// Borders are zero padded; the stored response is the magnitude of the
/// complex filter output.
pub fn convolve_bank(vol: &Volume3D, bank: &FilterBank, threads: usize) -> ResponseStack {
    let dims = vol.dims();
    let nf = bank.len();
    let (nx, ny) = (dims.nx, dims.ny);
    let slice_len = nx * ny * nf;
    let mut data = vec![0.0f32; dims.len() * nf];

    // split per kernel into separate re/im planes for tight inner loops
    let kernels: Vec<(usize, Vec<f32>, Vec<f32>)> = bank
        .iter()
        .map(|(_, k)| {
            let re: Vec<f32> = k.values().iter().map(|c| c.re).collect();
            let im: Vec<f32> = k.values().iter().map(|c| c.im).collect();
            (k.half_width(), re, im)
        })
        .collect();

    parallel::for_each_chunk_mut(&mut data, slice_len, threads, |z, out| {
        let img = &vol.data()[z * nx * ny..(z + 1) * nx * ny];
        for (f, (h, kre, kim)) in kernels.iter().enumerate() {
            let h = *h as isize;
            let side = (2 * h + 1) as usize;
            for y in 0..ny as isize {
                let v_lo = (-h).max(-y);
                let v_hi = h.min(ny as isize - 1 - y);
                for x in 0..nx as isize {
                    let u_lo = (-h).max(-x);
                    let u_hi = h.min(nx as isize - 1 - x);
                    let mut acc_re = 0.0f32;
                    let mut acc_im = 0.0f32;
                    for v in v_lo..=v_hi {
                        let row = ((y + v) as usize) * nx;
                        let krow = ((v + h) as usize) * side;
                        let img_seg = &img[row + (x + u_lo) as usize..=row + (x + u_hi) as usize];
                        let kre_seg = &kre[krow + (u_lo + h) as usize..];
                        let kim_seg = &kim[krow + (u_lo + h) as usize..];
                        for (i, &p) in img_seg.iter().enumerate() {
                            acc_re += p * kre_seg[i];
                            acc_im += p * kim_seg[i];
                        }
                    }
                    out[((y as usize) * nx + x as usize) * nf + f] =
                        (acc_re * acc_re + acc_im * acc_im).sqrt();
                }
            }
        }
    });

    ResponseStack {
        dims,
        n_filters: nf,
        data,
    }
}

/// Per-voxel cluster indices in `[0, k)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TextonMap {
    dims: Dims,
    k: usize,
    data: Vec<u16>,
}

impl TextonMap {
    pub fn new(dims: Dims, k: usize, data: Vec<u16>) -> Result<Self> {
        if data.len() != dims.len() {
            return Err(Error::InvalidVolume(format!(
                "texton data length {} does not match dims {}",
                data.len(),
                dims
            )));
        }
        if let Some(&bad) = data.iter().find(|&&t| t as usize >= k) {
            return Err(Error::InvalidParameter(format!(
                "texton index {bad} out of range for k = {k}"
            )));
        }
        Ok(TextonMap { dims, k, data })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> u16 {
        self.data[self.dims.index(x, y, z)]
    }

    pub fn data(&self) -> &[u16] {
        &self.data
    }
}

/// Labels every voxel with its nearest codebook centroid; ties resolve to
/// the lowest centroid index.
pub fn assign_textons(
    responses: &ResponseStack,
    codebook: &TextonCodebook,
    threads: usize,
) -> Result<TextonMap> {
    if responses.n_filters() != codebook.dim() {
        return Err(Error::ResponseDimMismatch {
            responses: responses.n_filters(),
            codebook: codebook.dim(),
        });
    }
    const CHUNK: usize = 4096;
    let mut data = vec![0u16; responses.dims().len()];
    parallel::for_each_chunk_mut(&mut data, CHUNK, threads, |ci, chunk| {
        let base = ci * CHUNK;
        for (o, out) in chunk.iter_mut().enumerate() {
            *out = codebook.nearest(responses.response(base + o)) as u16;
        }
    });
    TextonMap::new(responses.dims(), codebook.k(), data)
}

/// Normalized histogram of texton labels in the in-plane `window x window`
/// square centred at the voxel, clamped to the volume bounds.
pub fn texton_histogram(
    map: &TextonMap,
    voxel: (usize, usize, usize),
    window: usize,
    k: usize,
) -> Result<Vec<f32>> {
    histogram_impl(map, voxel, window, k, false)
}

/// Cubic-window variant of [`texton_histogram`].
pub fn texton_histogram_3d(
    map: &TextonMap,
    voxel: (usize, usize, usize),
    window: usize,
    k: usize,
) -> Result<Vec<f32>> {
    histogram_impl(map, voxel, window, k, true)
}

fn histogram_impl(
    map: &TextonMap,
    (x, y, z): (usize, usize, usize),
    window: usize,
    k: usize,
    three_d: bool,
) -> Result<Vec<f32>> {
    let dims = map.dims();
    if !dims.contains(x, y, z) {
        return Err(Error::VoxelOutOfBounds {
            x,
            y,
            z,
            nx: dims.nx,
            ny: dims.ny,
            nz: dims.nz,
        });
    }
    let r = window / 2;
    let lo = |c: usize| c.saturating_sub(r);
    let hi = |c: usize, n: usize| (c + r).min(n - 1);
    let (z0, z1) = if three_d {
        (lo(z), hi(z, dims.nz))
    } else {
        (z, z)
    };
    let mut counts = vec![0u32; k];
    for zz in z0..=z1 {
        for yy in lo(y)..=hi(y, dims.ny) {
            for xx in lo(x)..=hi(x, dims.nx) {
                counts[map.get(xx, yy, zz) as usize] += 1;
            }
        }
    }
    let total: u32 = counts.iter().sum();
    Ok(counts.iter().map(|&c| c as f32 / total as f32).collect())
}
