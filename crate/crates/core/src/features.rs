//! Acoustic feature matrices, frame stacking/skipping and the `PCF1` binary
//! feature file.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labelset::LanguageId;
use crate::matrix::Matrix;

pub const FEATURE_MAGIC: &[u8; 4] = b"PCF1";
pub const DEFAULT_FEATURE_DIM: usize = 80;

/// `T × D` single-precision frames, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Frames {
    frames: usize,
    dim: usize,
    data: Vec<f32>,
}

impl Frames {
    pub fn new(frames: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        if frames == 0 || dim == 0 {
            return Err(Error::Shape(format!("empty feature matrix {frames}x{dim}")));
        }
        if data.len() != frames * dim {
            return Err(Error::Shape(format!(
                "{} values for a {frames}x{dim} feature matrix",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Shape("non-finite feature value".into()));
        }
        Ok(Frames { frames, dim, data })
    }

    pub fn len(&self) -> usize {
        self.frames
    }

    pub fn is_empty(&self) -> bool {
        self.frames == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, t: usize) -> &[f32] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_vec(
            self.frames,
            self.dim,
            self.data.iter().map(|&v| f64::from(v)).collect(),
        )
    }
}

/// Frames plus the utterance metadata carried by the manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub frames: Frames,
    pub language: LanguageId,
    pub transcript: String,
    pub utterance_id: String,
}

/// Frame stacking/skipping applied before the encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Frontend {
    pub stack: usize,
    pub skip: usize,
}

impl Default for Frontend {
    fn default() -> Self {
        Frontend { stack: 3, skip: 3 }
    }
}

impl Frontend {
    pub fn apply(&self, frames: &Frames) -> Result<Frames> {
        stack_and_skip(frames, self.stack, self.skip)
    }

    pub fn output_dim(&self, feature_dim: usize) -> usize {
        feature_dim * self.stack
    }
}

/// Concatenates `stack` consecutive frames starting every `skip` frames.
/// Windows running past the end replicate the final frame.
pub fn stack_and_skip(frames: &Frames, stack: usize, skip: usize) -> Result<Frames> {
    if stack == 0 || skip == 0 {
        return Err(Error::Config(format!(
            "stack ({stack}) and skip ({skip}) must be positive"
        )));
    }
    if frames.is_empty() {
        return Err(Error::Shape("cannot stack an empty feature matrix".into()));
    }
    let t_in = frames.len();
    let t_out = t_in.div_ceil(skip);
    let mut data = Vec::with_capacity(t_out * stack * frames.dim);
    for j in 0..t_out {
        for offset in 0..stack {
            let src = (j * skip + offset).min(t_in - 1);
            data.extend_from_slice(frames.row(src));
        }
    }
    Frames::new(t_out, stack * frames.dim, data)
}

pub fn save_features(frames: &Frames, path: &Path) -> Result<()> {
    if frames.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Shape("refusing to save non-finite features".into()));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = |bytes: &[u8]| w.write_all(bytes).map_err(|e| Error::io(path, e));
    write(FEATURE_MAGIC)?;
    write(&u32::try_from(frames.frames).map_err(|_| Error::Shape("too many frames".into()))?.to_le_bytes())?;
    write(&u32::try_from(frames.dim).map_err(|_| Error::Shape("dimension too large".into()))?.to_le_bytes())?;
    for v in &frames.data {
        write(&v.to_le_bytes())?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_features(path: &Path) -> Result<Frames> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    BufReader::new(file)
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    decode_features(&bytes).map_err(|reason| Error::malformed(path, reason))
}

fn decode_features(bytes: &[u8]) -> std::result::Result<Frames, String> {
    if bytes.len() < 12 {
        return Err(format!("truncated header ({} bytes)", bytes.len()));
    }
    if &bytes[..4] != FEATURE_MAGIC {
        return Err("bad magic".into());
    }
    let frames = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let payload = &bytes[12..];
    let expected = frames
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .ok_or("header dimensions overflow")?;
    if payload.len() != expected {
        return Err(format!(
            "header declares {frames}x{dim} values ({expected} bytes) but payload has {} bytes",
            payload.len()
        ));
    }
    let data: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Frames::new(frames, dim, data).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(frames: usize, dim: usize) -> Frames {
        Frames::new(frames, dim, (0..frames * dim).map(|v| v as f32).collect()).unwrap()
    }

    #[test]
    fn stack_six_frames() {
        let f = ramp(6, 2);
        let s = stack_and_skip(&f, 3, 3).unwrap();
        assert_eq!((s.len(), s.dim()), (2, 6));
        assert_eq!(s.row(0), &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(s.row(1), &[6.0, 7.0, 8.0, 9.0, 10.0, 11.0]);
    }

    #[test]
    fn stack_replicates_last_frame() {
        let f = ramp(7, 2);
        let s = stack_and_skip(&f, 3, 3).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.row(2), &[12.0, 13.0, 12.0, 13.0, 12.0, 13.0]);
    }

    #[test]
    fn unit_stack_is_identity() {
        let f = ramp(5, 3);
        assert_eq!(stack_and_skip(&f, 1, 1).unwrap(), f);
        assert!(stack_and_skip(&f, 0, 1).is_err());
        assert!(stack_and_skip(&f, 1, 0).is_err());
    }

    #[test]
    fn rejects_empty_and_non_finite() {
        assert!(Frames::new(0, 3, vec![]).is_err());
        assert!(Frames::new(1, 2, vec![0.0, f32::NAN]).is_err());
    }

    #[test]
    fn file_round_trip_and_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.pcf");
        let f = Frames::new(3, 2, vec![0.5, -1.25, 3.0e-7, 1e9, -0.0, 7.0]).unwrap();
        save_features(&f, &path).unwrap();
        assert_eq!(load_features(&path).unwrap(), f);

        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(load_features(&path), Err(Error::Malformed { .. })));
        std::fs::write(&path, &bytes[..8]).unwrap();
        assert!(matches!(load_features(&path), Err(Error::Malformed { .. })));

        let mut wrong = bytes.clone();
        wrong[8..12].copy_from_slice(&5u32.to_le_bytes());
        std::fs::write(&path, &wrong).unwrap();
        assert!(matches!(load_features(&path), Err(Error::Malformed { .. })));

        let mut nan = bytes;
        nan[12..16].copy_from_slice(&f32::NAN.to_le_bytes());
        std::fs::write(&path, &nan).unwrap();
        assert!(matches!(load_features(&path), Err(Error::Malformed { .. })));
    }
}
