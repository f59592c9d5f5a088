//! Lloyd k-means with k-means++ seeding, used to learn texton codebooks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::parallel;
use crate::volume::Modality;
use crate::{Error, Result};

/// Fitted cluster centres for one modality's filter-response space.
#[derive(Clone, Debug, PartialEq)]
pub struct TextonCodebook {
    k: usize,
    dim: usize,
    modality: Modality,
    centroids: Vec<f32>, // k rows of dim values
}

impl TextonCodebook {
    pub fn new(modality: Modality, k: usize, dim: usize, centroids: Vec<f32>) -> Result<Self> {
        if k < 1 || dim < 1 || centroids.len() != k * dim {
            return Err(Error::InvalidParameter(format!(
                "codebook needs k*dim = {} centroid values, got {}",
                k * dim,
                centroids.len()
            )));
        }
        Ok(TextonCodebook {
            k,
            dim,
            modality,
            centroids,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn centroid(&self, j: usize) -> &[f32] {
        &self.centroids[j * self.dim..(j + 1) * self.dim]
    }

    pub fn centroids(&self) -> &[f32] {
        &self.centroids
    }

    /// Index of the nearest centroid by squared Euclidean distance;
    /// ties resolve to the lowest index.
    pub fn nearest(&self, point: &[f32]) -> usize {
        debug_assert_eq!(point.len(), self.dim);
        let mut best = 0usize;
        let mut best_d = f32::INFINITY;
        for j in 0..self.k {
            let c = self.centroid(j);
            let mut d = 0.0f32;
            for (a, b) in point.iter().zip(c) {
                let t = a - b;
                d += t * t;
            }
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        best
    }

    /// Serializes as magic "TXCB", u32 k, u32 dim, u8 modality, f32 centroids
    /// row-major, little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(13 + self.centroids.len() * 4);
        out.extend_from_slice(b"TXCB");
        out.extend_from_slice(&(self.k as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.push(self.modality.index() as u8);
        for &c in &self.centroids {
            out.extend_from_slice(&c.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let fail = || Error::InvalidParameter("truncated codebook file".into());
        if bytes.len() < 13 {
            return Err(fail());
        }
        let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
        if &magic != b"TXCB" {
            return Err(Error::BadCodebookMagic { found: magic });
        }
        let k = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let modality = Modality::from_index(bytes[12] as usize)
            .ok_or_else(|| Error::InvalidParameter(format!("bad modality tag {}", bytes[12])))?;
        let need = 13 + k * dim * 4;
        if bytes.len() < need {
            return Err(fail());
        }
        let centroids = bytes[13..need]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        TextonCodebook::new(modality, k, dim, centroids)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_bytes(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Result of a k-means fit, including the per-iteration objective so callers
/// can check convergence behaviour.
#[derive(Clone, Debug)]
pub struct KMeansFit {
    pub codebook: TextonCodebook,
    /// Sum of squared point-to-centroid distances after each assignment step.
    pub objective_trace: Vec<f64>,
    pub n_iter: usize,
}

fn dist2(a: &[f32], b: &[f64]) -> f64 {
    let mut d = 0.0;
    for (x, c) in a.iter().zip(b) {
        let t = *x as f64 - c;
        d += t * t;
    }
    d
}

/// Lloyd iterations from k-means++ seeding.
///
/// `points` holds `n` rows of `dim` values. Stops when the largest centroid
/// shift drops below `tol` or after `max_iter` iterations. Deterministic for
/// a fixed seed and independent of `threads`; centroids are accumulated in
/// f64 in point order.
pub fn kmeans_fit(
    points: &[f32],
    dim: usize,
    k: usize,
    modality: Modality,
    seed: u64,
    max_iter: usize,
    tol: f64,
    threads: usize,
) -> Result<KMeansFit> {
    assert!(dim > 0, "dim must be positive");
    assert!(points.len() % dim == 0, "points length must be a multiple of dim");
    let n = points.len() / dim;
    if k < 1 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if n < k {
        return Err(Error::NotEnoughPoints { points: n, k });
    }
    let row = |i: usize| &points[i * dim..(i + 1) * dim];

    // k-means++ seeding
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids: Vec<f64> = Vec::with_capacity(k * dim);
    let first = rng.gen_range(0..n);
    centroids.extend(row(first).iter().map(|&v| v as f64));
    let mut min_d2: Vec<f64> = (0..n).map(|i| dist2(row(i), &centroids[0..dim])).collect();
    let mut chosen = vec![false; n];
    chosen[first] = true;
    for _ in 1..k {
        let total: f64 = min_d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, &d) in min_d2.iter().enumerate() {
                acc += d;
                if acc >= target {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            // all remaining mass is on duplicates; take the first unchosen
            (0..n).find(|&i| !chosen[i]).unwrap_or(0)
        };
        chosen[next] = true;
        let start = centroids.len();
        centroids.extend(row(next).iter().map(|&v| v as f64));
        let c = centroids[start..start + dim].to_vec();
        for (i, d) in min_d2.iter_mut().enumerate() {
            let nd = dist2(row(i), &c);
            if nd < *d {
                *d = nd;
            }
        }
    }

    // Lloyd iterations
    let mut labels = vec![0u32; n];
    let mut point_d2 = vec![0.0f64; n];
    let mut objective_trace = Vec::new();
    let mut n_iter = 0;
    for _ in 0..max_iter {
        n_iter += 1;
        assign(points, dim, &centroids, k, &mut labels, &mut point_d2, threads);
        objective_trace.push(point_d2.iter().sum());

        let mut sums = vec![0.0f64; k * dim];
        let mut counts = vec![0usize; k];
        for i in 0..n {
            let j = labels[i] as usize;
            counts[j] += 1;
            let s = &mut sums[j * dim..(j + 1) * dim];
            for (acc, &v) in s.iter_mut().zip(row(i)) {
                *acc += v as f64;
            }
        }
        let mut shift: f64 = 0.0;
        for j in 0..k {
            if counts[j] == 0 {
                continue; // empty cluster keeps its previous centroid
            }
            let mut d = 0.0;
            for t in 0..dim {
                let new = sums[j * dim + t] / counts[j] as f64;
                let old = centroids[j * dim + t];
                d += (new - old) * (new - old);
                centroids[j * dim + t] = new;
            }
            shift = shift.max(d.sqrt());
        }
        if shift < tol {
            break;
        }
    }

    let codebook = TextonCodebook::new(
        modality,
        k,
        dim,
        centroids.iter().map(|&c| c as f32).collect(),
    )?;
    Ok(KMeansFit {
        codebook,
        objective_trace,
        n_iter,
    })
}

/// Nearest-centroid assignment; writes labels and squared distances.
/// Chunk boundaries are fixed, so output does not depend on `threads`.
fn assign(
    points: &[f32],
    dim: usize,
    centroids: &[f64],
    k: usize,
    labels: &mut [u32],
    point_d2: &mut [f64],
    threads: usize,
) {
    const CHUNK: usize = 4096;
    let n = labels.len();
    let mut fused: Vec<(u32, f64)> = vec![(0, 0.0); n];
    parallel::for_each_chunk_mut(&mut fused, CHUNK, threads, |ci, chunk| {
        let base = ci * CHUNK;
        for (o, out) in chunk.iter_mut().enumerate() {
            let i = base + o;
            let p = &points[i * dim..(i + 1) * dim];
            let mut best = 0u32;
            let mut best_d = f64::INFINITY;
            for j in 0..k {
                let d = dist2(p, &centroids[j * dim..(j + 1) * dim]);
                if d < best_d {
                    best_d = d;
                    best = j as u32;
                }
            }
            *out = (best, best_d);
        }
    });
    for (i, (l, d)) in fused.into_iter().enumerate() {
        labels[i] = l;
        point_d2[i] = d;
    }
}
