//! JTFX per-image feature files.
//!
//! Layout (little-endian):
//!
//! ```text
//! "JTFX"  u8 version=1  u8 kind (1 = transform, 2 = bitstream)  u8 components=3
//! 3 × { u16 grid_w, u16 grid_h, u16 channels }
//! payload for Y, then U, then V: [grid_h][grid_w][channels]
//!   kind 1: f32 values, kind 2: u8 values in {0, 1}
//! ```

use std::io::{self, Read, Write};

use thiserror::Error;

use crate::features::{BitFeatureSet, FeatureTensor, FrequencyCubeSet, ImageFeatures};

pub const MAGIC: &[u8; 4] = b"JTFX";
pub const VERSION: u8 = 1;

#[derive(Debug, Error)]
pub enum JtfxError {
    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    UnsupportedVersion(u8),
    #[error("unknown feature kind {0}")]
    UnknownKind(u8),
    #[error("expected 3 components, found {0}")]
    ComponentCount(u8),
    #[error("bit payload contains value {0}")]
    NonBinary(u8),
    #[error("trailing bytes after payload")]
    TrailingData,
    #[error("dimension {0} does not fit in u16")]
    TooLarge(usize),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Transform = 1,
    Bitstream = 2,
}

/// Contents of a JTFX file. Both kinds are held as `f32` tensors, which is
/// what the networks consume.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFile {
    pub kind: FeatureKind,
    pub components: [FeatureTensor<f32>; 3],
}

impl FeatureFile {
    pub fn shapes(&self) -> [[usize; 3]; 3] {
        [self.components[0].shape(), self.components[1].shape(), self.components[2].shape()]
    }
}

impl From<&FrequencyCubeSet> for FeatureFile {
    fn from(c: &FrequencyCubeSet) -> Self {
        FeatureFile { kind: FeatureKind::Transform, components: c.components.clone() }
    }
}

impl From<&BitFeatureSet> for FeatureFile {
    fn from(b: &BitFeatureSet) -> Self {
        let components = b.components.clone().map(|t| FeatureTensor {
            grid_w: t.grid_w,
            grid_h: t.grid_h,
            channels: t.channels,
            data: t.data.iter().map(|&v| v as f32).collect(),
        });
        FeatureFile { kind: FeatureKind::Bitstream, components }
    }
}

impl From<&ImageFeatures> for FeatureFile {
    fn from(f: &ImageFeatures) -> Self {
        match f {
            ImageFeatures::Transform(c) => c.into(),
            ImageFeatures::Bitstream(b) => b.into(),
        }
    }
}

fn dim(v: usize) -> Result<[u8; 2], JtfxError> {
    u16::try_from(v).map(u16::to_le_bytes).map_err(|_| JtfxError::TooLarge(v))
}

pub fn write_features<W: Write>(mut w: W, f: &FeatureFile) -> Result<(), JtfxError> {
    w.write_all(MAGIC)?;
    w.write_all(&[VERSION, f.kind as u8, 3])?;
    for t in &f.components {
        w.write_all(&dim(t.grid_w)?)?;
        w.write_all(&dim(t.grid_h)?)?;
        w.write_all(&dim(t.channels)?)?;
    }
    let mut buf = Vec::new();
    for t in &f.components {
        match f.kind {
            FeatureKind::Transform => t.data.iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes())),
            FeatureKind::Bitstream => {
                for &v in &t.data {
                    if v != 0.0 && v != 1.0 {
                        return Err(JtfxError::NonBinary(v as u8));
                    }
                    buf.push(v as u8);
                }
            }
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_features<R: Read>(mut r: R) -> Result<FeatureFile, JtfxError> {
    let mut head = [0u8; 7];
    r.read_exact(&mut head)?;
    let magic = [head[0], head[1], head[2], head[3]];
    if &magic != MAGIC {
        return Err(JtfxError::BadMagic(magic));
    }
    if head[4] != VERSION {
        return Err(JtfxError::UnsupportedVersion(head[4]));
    }
    let kind = match head[5] {
        1 => FeatureKind::Transform,
        2 => FeatureKind::Bitstream,
        k => return Err(JtfxError::UnknownKind(k)),
    };
    if head[6] != 3 {
        return Err(JtfxError::ComponentCount(head[6]));
    }
    let mut dims = [[0usize; 3]; 3];
    for d in dims.iter_mut() {
        let mut b = [0u8; 6];
        r.read_exact(&mut b)?;
        *d = [
            u16::from_le_bytes([b[0], b[1]]) as usize,
            u16::from_le_bytes([b[2], b[3]]) as usize,
            u16::from_le_bytes([b[4], b[5]]) as usize,
        ];
    }
    let mut tensors = Vec::with_capacity(3);
    for [grid_w, grid_h, channels] in dims {
        let n = grid_w * grid_h * channels;
        let data = match kind {
            FeatureKind::Transform => {
                let mut raw = vec![0u8; n * 4];
                r.read_exact(&mut raw)?;
                raw.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect()
            }
            FeatureKind::Bitstream => {
                let mut raw = vec![0u8; n];
                r.read_exact(&mut raw)?;
                if let Some(&bad) = raw.iter().find(|&&b| b > 1) {
                    return Err(JtfxError::NonBinary(bad));
                }
                raw.into_iter().map(f32::from).collect()
            }
        };
        tensors.push(FeatureTensor { grid_w, grid_h, channels, data });
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(JtfxError::TrailingData);
    }
    let components: [FeatureTensor<f32>; 3] = tensors.try_into().expect("three tensors");
    Ok(FeatureFile { kind, components })
}
