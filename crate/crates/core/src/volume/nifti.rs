//! Minimal NIfTI-1 reader/writer.
//!
//! Deliberately a narrow subset: single-file uncompressed `.nii`,
//! little-endian, 3D, datatypes uint8 / int16 / float32. Orientation
//! matrices are ignored (inputs are assumed co-registered). The writer
//! always emits float32 (or uint8 for label volumes) with `vox_offset`
//! 352 so `read(write(v))` reproduces dims, spacing and data exactly.

use std::fs;
use std::path::Path;

use super::{Dims, LabelVolume, Volume3D};
use crate::{Error, Result};

const HEADER_SIZE: usize = 348;
const VOX_OFFSET: usize = 352;
const MAGIC: [u8; 4] = *b"n+1\0";

const DT_UINT8: i16 = 2;
const DT_INT16: i16 = 4;
const DT_FLOAT32: i16 = 16;

// Byte offsets of the header fields this reader touches.
const OFF_SIZEOF_HDR: usize = 0;
const OFF_DIM: usize = 40;
const OFF_DATATYPE: usize = 70;
const OFF_BITPIX: usize = 72;
const OFF_PIXDIM: usize = 76;
const OFF_VOX_OFFSET: usize = 108;
const OFF_SCL_SLOPE: usize = 112;
const OFF_SCL_INTER: usize = 116;
const OFF_XYZT_UNITS: usize = 123;
const OFF_MAGIC: usize = 344;

fn read_i16(buf: &[u8], off: usize) -> i16 {
    i16::from_le_bytes([buf[off], buf[off + 1]])
}

fn read_i32(buf: &[u8], off: usize) -> i32 {
    i32::from_le_bytes([buf[off], buf[off + 1], buf[off + 2], buf[off + 3]])
}

fn read_f32(buf: &[u8], off: usize) -> f32 {
    f32::from_le_bytes([buf[off], buf[off + 1], buf[off + 2], buf[off + 3]])
}

fn write_i16(buf: &mut [u8], off: usize, v: i16) {
    buf[off..off + 2].copy_from_slice(&v.to_le_bytes());
}

fn write_i32(buf: &mut [u8], off: usize, v: i32) {
    buf[off..off + 4].copy_from_slice(&v.to_le_bytes());
}

fn write_f32(buf: &mut [u8], off: usize, v: f32) {
    buf[off..off + 4].copy_from_slice(&v.to_le_bytes());
}

/// Reads a 3D volume from a single-file NIfTI-1 image.
pub fn read_nifti(path: impl AsRef<Path>) -> Result<Volume3D> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_nifti(&bytes)
}

/// Reads a label volume; voxel values must be integral and in 0..=4.
pub fn read_nifti_labels(path: impl AsRef<Path>) -> Result<LabelVolume> {
    LabelVolume::from_volume(&read_nifti(path)?)
}

pub(crate) fn parse_nifti(bytes: &[u8]) -> Result<Volume3D> {
    if bytes.len() < HEADER_SIZE {
        return Err(Error::InvalidHeader {
            field: "sizeof_hdr",
            detail: format!("file holds {} bytes, header needs {HEADER_SIZE}", bytes.len()),
        });
    }
    let magic: [u8; 4] = bytes[OFF_MAGIC..OFF_MAGIC + 4].try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::BadMagic { found: magic });
    }
    let sizeof_hdr = read_i32(bytes, OFF_SIZEOF_HDR);
    if sizeof_hdr != HEADER_SIZE as i32 {
        return Err(Error::InvalidHeader {
            field: "sizeof_hdr",
            detail: format!("expected 348, found {sizeof_hdr} (big-endian files unsupported)"),
        });
    }
    let ndim = read_i16(bytes, OFF_DIM);
    if ndim != 3 {
        return Err(Error::NotThreeDimensional { ndim });
    }
    let nx = read_i16(bytes, OFF_DIM + 2);
    let ny = read_i16(bytes, OFF_DIM + 4);
    let nz = read_i16(bytes, OFF_DIM + 6);
    if nx <= 0 || ny <= 0 || nz <= 0 {
        return Err(Error::InvalidHeader {
            field: "dim",
            detail: format!("non-positive extent ({nx}, {ny}, {nz})"),
        });
    }
    let dims = Dims::new(nx as usize, ny as usize, nz as usize);

    let datatype = read_i16(bytes, OFF_DATATYPE);
    let voxel_bytes = match datatype {
        DT_UINT8 => 1,
        DT_INT16 => 2,
        DT_FLOAT32 => 4,
        code => return Err(Error::UnsupportedDatatype { code }),
    };

    let sx = read_f32(bytes, OFF_PIXDIM + 4);
    let sy = read_f32(bytes, OFF_PIXDIM + 8);
    let sz = read_f32(bytes, OFF_PIXDIM + 12);
    if !(sx > 0.0 && sy > 0.0 && sz > 0.0) {
        return Err(Error::InvalidHeader {
            field: "pixdim",
            detail: format!("non-positive spacing ({sx}, {sy}, {sz})"),
        });
    }

    let vox_offset = read_f32(bytes, OFF_VOX_OFFSET);
    if !(vox_offset >= VOX_OFFSET as f32 && vox_offset.fract() == 0.0) {
        return Err(Error::InvalidHeader {
            field: "vox_offset",
            detail: format!("expected integral offset >= {VOX_OFFSET}, found {vox_offset}"),
        });
    }
    let offset = vox_offset as usize;

    let expected = dims.len() * voxel_bytes;
    let payload = bytes.get(offset..).unwrap_or(&[]);
    if payload.len() < expected {
        return Err(Error::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }
    let payload = &payload[..expected];

    // scl_slope == 0 means "no scaling" per the NIfTI-1 convention.
    let slope = read_f32(bytes, OFF_SCL_SLOPE);
    let inter = read_f32(bytes, OFF_SCL_INTER);
    let scale = |raw: f32| if slope != 0.0 { raw * slope + inter } else { raw };

    let mut data = Vec::with_capacity(dims.len());
    match datatype {
        DT_UINT8 => data.extend(payload.iter().map(|&b| scale(b as f32))),
        DT_INT16 => data.extend(
            payload
                .chunks_exact(2)
                .map(|c| scale(i16::from_le_bytes([c[0], c[1]]) as f32)),
        ),
        DT_FLOAT32 => data.extend(
            payload
                .chunks_exact(4)
                .map(|c| scale(f32::from_le_bytes([c[0], c[1], c[2], c[3]]))),
        ),
        _ => unreachable!(),
    }
    Volume3D::new(dims, (sx, sy, sz), data)
}

fn build_header(dims: Dims, spacing: (f32, f32, f32), datatype: i16, bitpix: i16) -> Result<Vec<u8>> {
    let check = |n: usize, axis: &'static str| -> Result<i16> {
        i16::try_from(n).map_err(|_| Error::InvalidHeader {
            field: "dim",
            detail: format!("{axis} extent {n} exceeds the NIfTI-1 i16 range"),
        })
    };
    let mut h = vec![0u8; VOX_OFFSET];
    write_i32(&mut h, OFF_SIZEOF_HDR, HEADER_SIZE as i32);
    write_i16(&mut h, OFF_DIM, 3);
    write_i16(&mut h, OFF_DIM + 2, check(dims.nx, "x")?);
    write_i16(&mut h, OFF_DIM + 4, check(dims.ny, "y")?);
    write_i16(&mut h, OFF_DIM + 6, check(dims.nz, "z")?);
    for k in 4..8 {
        write_i16(&mut h, OFF_DIM + 2 * k, 1);
    }
    write_i16(&mut h, OFF_DATATYPE, datatype);
    write_i16(&mut h, OFF_BITPIX, bitpix);
    write_f32(&mut h, OFF_PIXDIM, 1.0);
    write_f32(&mut h, OFF_PIXDIM + 4, spacing.0);
    write_f32(&mut h, OFF_PIXDIM + 8, spacing.1);
    write_f32(&mut h, OFF_PIXDIM + 12, spacing.2);
    write_f32(&mut h, OFF_VOX_OFFSET, VOX_OFFSET as f32);
    write_f32(&mut h, OFF_SCL_SLOPE, 1.0);
    write_f32(&mut h, OFF_SCL_INTER, 0.0);
    h[OFF_XYZT_UNITS] = 2; // millimetres
    h[OFF_MAGIC..OFF_MAGIC + 4].copy_from_slice(&MAGIC);
    Ok(h)
}

/// Writes `tmp` next to `path`, then renames, so failed writes leave no
/// partial output behind.
fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Writes a volume as a float32 single-file NIfTI-1 image.
pub fn write_nifti(vol: &Volume3D, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = build_header(vol.dims(), vol.spacing(), DT_FLOAT32, 32)?;
    bytes.reserve(vol.data().len() * 4);
    for &v in vol.data() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    atomic_write(path, &bytes)
}

/// Writes a label volume as a uint8 single-file NIfTI-1 image.
pub fn write_nifti_labels(
    labels: &LabelVolume,
    spacing: (f32, f32, f32),
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = build_header(labels.dims(), spacing, DT_UINT8, 8)?;
    bytes.extend_from_slice(labels.data());
    atomic_write(path, &bytes)
}
