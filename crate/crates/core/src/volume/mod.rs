//! Core volumetric types and NIfTI-1 file I/O.
//!
//! Voxel data is stored as a dense `f32` grid in x-fastest linear order
//! (`index = x + nx*(y + ny*z)`), the same order a NIfTI payload uses.

mod nifti;

pub use nifti::{read_nifti, read_nifti_labels, write_nifti, write_nifti_labels};

use crate::{Error, Result};

/// Grid dimensions of a volume.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Dims {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Self {
        Dims { nx, ny, nz }
    }

    /// Total voxel count.
    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Linear index of `(x, y, z)`, x-fastest.
    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        debug_assert!(self.contains(x, y, z));
        x + self.nx * (y + self.ny * z)
    }

    /// Inverse of [`Dims::index`].
    #[inline]
    pub fn coords(&self, index: usize) -> (usize, usize, usize) {
        let x = index % self.nx;
        let y = (index / self.nx) % self.ny;
        let z = index / (self.nx * self.ny);
        (x, y, z)
    }

    #[inline]
    pub fn contains(&self, x: usize, y: usize, z: usize) -> bool {
        x < self.nx && y < self.ny && z < self.nz
    }
}

impl std::fmt::Display for Dims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {})", self.nx, self.ny, self.nz)
    }
}

/// Dense 3D scalar volume with voxel spacing in millimetres.
#[derive(Clone, Debug, PartialEq)]
pub struct Volume3D {
    dims: Dims,
    spacing: (f32, f32, f32),
    data: Vec<f32>,
}

impl Volume3D {
    pub fn new(dims: Dims, spacing: (f32, f32, f32), data: Vec<f32>) -> Result<Self> {
        if dims.len() == 0 {
            return Err(Error::InvalidVolume("all dimensions must be positive".into()));
        }
        if data.len() != dims.len() {
            return Err(Error::InvalidVolume(format!(
                "data length {} does not match dims {} = {} voxels",
                data.len(),
                dims,
                dims.len()
            )));
        }
        if spacing.0 <= 0.0 || spacing.1 <= 0.0 || spacing.2 <= 0.0 {
            return Err(Error::InvalidVolume(format!(
                "spacing components must be positive, got ({}, {}, {})",
                spacing.0, spacing.1, spacing.2
            )));
        }
        Ok(Volume3D { dims, spacing, data })
    }

    pub fn zeros(dims: Dims, spacing: (f32, f32, f32)) -> Self {
        Volume3D::new(dims, spacing, vec![0.0; dims.len()]).expect("zero volume is valid")
    }

    pub fn from_fn(
        dims: Dims,
        spacing: (f32, f32, f32),
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Self {
        let mut data = Vec::with_capacity(dims.len());
        for z in 0..dims.nz {
            for y in 0..dims.ny {
                for x in 0..dims.nx {
                    data.push(f(x, y, z));
                }
            }
        }
        Volume3D::new(dims, spacing, data).expect("from_fn produces matching length")
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> (f32, f32, f32) {
        self.spacing
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f32 {
        self.data[self.dims.index(x, y, z)]
    }

    /// New volume with the same geometry and per-voxel mapped values.
    pub fn map(&self, f: impl Fn(f32) -> f32) -> Volume3D {
        Volume3D {
            dims: self.dims,
            spacing: self.spacing,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Replaces the voxel data, keeping geometry. Lengths must match.
    pub fn with_data(&self, data: Vec<f32>) -> Result<Volume3D> {
        Volume3D::new(self.dims, self.spacing, data)
    }
}

/// MRI protocols used by the pipeline, in feature-column order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Modality {
    Flair,
    T1c,
    T2,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Flair, Modality::T1c, Modality::T2];

    pub fn index(self) -> usize {
        match self {
            Modality::Flair => 0,
            Modality::T1c => 1,
            Modality::T2 => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Modality::Flair => "flair",
            Modality::T1c => "t1c",
            Modality::T2 => "t2",
        }
    }

    pub fn from_index(i: usize) -> Option<Modality> {
        Modality::ALL.get(i).copied()
    }
}

/// Co-registered FLAIR, T1c and T2 volumes sharing one grid.
#[derive(Clone, Debug, PartialEq)]
pub struct MultimodalVolume {
    modalities: [Volume3D; 3],
}

impl MultimodalVolume {
    pub fn dims(&self) -> Dims {
        self.modalities[0].dims()
    }

    pub fn spacing(&self) -> (f32, f32, f32) {
        self.modalities[0].spacing()
    }

    pub fn modality(&self, m: Modality) -> &Volume3D {
        &self.modalities[m.index()]
    }

    pub fn modalities(&self) -> &[Volume3D; 3] {
        &self.modalities
    }

    /// Applies `f` to each modality, preserving order.
    pub fn try_map(&self, mut f: impl FnMut(Modality, &Volume3D) -> Result<Volume3D>) -> Result<MultimodalVolume> {
        let flair = f(Modality::Flair, self.modality(Modality::Flair))?;
        let t1c = f(Modality::T1c, self.modality(Modality::T1c))?;
        let t2 = f(Modality::T2, self.modality(Modality::T2))?;
        stack_modalities(flair, t1c, t2)
    }
}

/// Bundles the three protocols of one case, checking grid agreement.
pub fn stack_modalities(flair: Volume3D, t1c: Volume3D, t2: Volume3D) -> Result<MultimodalVolume> {
    for (name, v) in [("t1c", &t1c), ("t2", &t2)] {
        if v.dims() != flair.dims() {
            return Err(Error::DimensionMismatch(format!(
                "{name} dims {} differ from flair dims {}",
                v.dims(),
                flair.dims()
            )));
        }
        if v.spacing() != flair.spacing() {
            return Err(Error::DimensionMismatch(format!(
                "{name} spacing {:?} differs from flair spacing {:?}",
                v.spacing(),
                flair.spacing()
            )));
        }
    }
    Ok(MultimodalVolume {
        modalities: [flair, t1c, t2],
    })
}

/// Per-voxel BRATS labels: 0 normal, 1 necrosis, 2 oedema, 3 non-enhancing,
/// 4 enhancing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelVolume {
    dims: Dims,
    data: Vec<u8>,
}

impl LabelVolume {
    pub const MAX_LABEL: u8 = 4;

    pub fn new(dims: Dims, data: Vec<u8>) -> Result<Self> {
        if data.len() != dims.len() {
            return Err(Error::InvalidVolume(format!(
                "label data length {} does not match dims {}",
                data.len(),
                dims
            )));
        }
        if let Some(&bad) = data.iter().find(|&&l| l > Self::MAX_LABEL) {
            return Err(Error::LabelOutOfRange(bad as u32));
        }
        Ok(LabelVolume { dims, data })
    }

    pub fn zeros(dims: Dims) -> Self {
        LabelVolume {
            dims,
            data: vec![0; dims.len()],
        }
    }

    /// Converts a scalar volume holding integral values in 0..=4.
    pub fn from_volume(vol: &Volume3D) -> Result<Self> {
        let mut data = Vec::with_capacity(vol.data().len());
        for &v in vol.data() {
            if v.fract() != 0.0 || !(0.0..=Self::MAX_LABEL as f32).contains(&v) {
                return Err(Error::LabelOutOfRange(v as u32));
            }
            data.push(v as u8);
        }
        LabelVolume::new(vol.dims(), data)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> u8 {
        self.data[self.dims.index(x, y, z)]
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, label: u8) {
        assert!(label <= Self::MAX_LABEL);
        let i = self.dims.index(x, y, z);
        self.data[i] = label;
    }

    /// Voxel count per label value.
    pub fn label_counts(&self) -> [usize; crate::NUM_CLASSES] {
        let mut counts = [0usize; crate::NUM_CLASSES];
        for &l in &self.data {
            counts[l as usize] += 1;
        }
        counts
    }
}

/// Per-voxel boolean mask over a volume grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    dims: Dims,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(dims: Dims, data: Vec<bool>) -> Result<Self> {
        if data.len() != dims.len() {
            return Err(Error::InvalidVolume(format!(
                "mask data length {} does not match dims {}",
                data.len(),
                dims
            )));
        }
        Ok(BinaryMask { dims, data })
    }

    pub fn zeros(dims: Dims) -> Self {
        BinaryMask {
            dims,
            data: vec![false; dims.len()],
        }
    }

    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(dims.len());
        for z in 0..dims.nz {
            for y in 0..dims.ny {
                for x in 0..dims.nx {
                    data.push(f(x, y, z));
                }
            }
        }
        BinaryMask { dims, data }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.data[self.dims.index(x, y, z)]
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, value: bool) {
        let i = self.dims.index(x, y, z);
        self.data[i] = value;
    }

    pub fn count_true(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}
