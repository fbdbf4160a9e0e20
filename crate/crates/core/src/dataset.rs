//! Channel datasets and the CHDS binary container.
//!
//! CHDS layout (little-endian):
//!
//! | offset | size | field                          |
//! |--------|------|--------------------------------|
//! | 0      | 4    | magic `b"CHDS"`                |
//! | 4      | 4    | version, u32 = 1               |
//! | 8      | 4    | dim, u32                       |
//! | 12     | 8    | count, u64                     |
//! | 20     | 8    | seed, u64                      |
//! | 28     | 8    | normalization scale, f64       |
//! | 36     | ...  | `count·dim` complex values, f64 real then f64 imaginary, row-major |
//!
//! Provenance metadata lives in an optional JSON sidecar next to the file
//! (`<path>.json`).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub const CHDS_MAGIC: [u8; 4] = *b"CHDS";
pub const CHDS_VERSION: u32 = 1;
pub const CHDS_HEADER_LEN: usize = 36;

/// Seeded collection of complex channel vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDataset {
    dim: usize,
    samples: Vec<Complex64>,
    /// Product of all scalar normalizations applied since generation.
    pub normalization_scale: f64,
    pub seed: u64,
    pub provenance: BTreeMap<String, String>,
}

impl ChannelDataset {
    /// Wraps a row-major `count × dim` buffer.
    pub fn new(dim: usize, samples: Vec<Complex64>, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Structural("dataset dimension must be positive".into()));
        }
        if samples.len() % dim != 0 {
            return Err(Error::Structural(format!(
                "{} values do not form rows of length {dim}",
                samples.len()
            )));
        }
        Ok(Self {
            dim,
            samples,
            normalization_scale: 1.0,
            seed,
            provenance: BTreeMap::new(),
        })
    }

    /// Builds a dataset from a `count × dim` matrix (one sample per row).
    pub fn from_matrix(rows: &DMatrix<Complex64>, seed: u64) -> Result<Self> {
        let mut samples = Vec::with_capacity(rows.len());
        for r in 0..rows.nrows() {
            samples.extend(rows.row(r).iter().copied());
        }
        Self::new(rows.ncols(), samples, seed)
    }

    pub fn with_provenance(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.provenance.insert(key.into(), value.to_string());
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.samples.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[Complex64] {
        &self.samples[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::Chunks<'_, Complex64> {
        self.samples.chunks(self.dim)
    }

    /// Row-major sample buffer.
    pub fn as_slice(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.count(), self.dim, &self.samples)
    }

    /// `(1/count)·Σ‖h_i‖²`.
    pub fn mean_square_norm(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() / self.count() as f64
    }

    /// Multiplies every sample by `factor` and records it in the normalization scale.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for z in &mut out.samples {
            *z *= factor;
        }
        out.normalization_scale *= factor;
        out
    }

    /// Dataset made of the given rows, in order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut samples = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            samples.extend_from_slice(self.sample(i));
        }
        Self {
            dim: self.dim,
            samples,
            normalization_scale: self.normalization_scale,
            seed: self.seed,
            provenance: self.provenance.clone(),
        }
    }

    /// Splits into the first `at` rows and the rest without copying the head.
    pub fn split_rows(mut self, at: usize) -> Result<(Self, Self)> {
        if at > self.count() {
            return Err(Error::Argument(format!("cannot split {} rows at {at}", self.count())));
        }
        let tail = self.samples.split_off(at * self.dim);
        let rest = Self {
            dim: self.dim,
            samples: tail,
            normalization_scale: self.normalization_scale,
            seed: self.seed,
            provenance: self.provenance.clone(),
        };
        self.samples.shrink_to_fit();
        Ok((self, rest))
    }

    /// Serializes header and payload into CHDS bytes.
    pub fn to_chds_bytes(&self) -> Result<Vec<u8>> {
        let dim = u32::try_from(self.dim)
            .map_err(|_| Error::Argument(format!("dimension {} does not fit in u32", self.dim)))?;
        let mut out = Vec::with_capacity(CHDS_HEADER_LEN + self.samples.len() * 16);
        out.extend_from_slice(&CHDS_MAGIC);
        out.extend_from_slice(&CHDS_VERSION.to_le_bytes());
        out.extend_from_slice(&dim.to_le_bytes());
        out.extend_from_slice(&(self.count() as u64).to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&self.normalization_scale.to_le_bytes());
        out.extend_from_slice(&payload_bytes(&self.samples));
        Ok(out)
    }

    pub fn from_chds_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < CHDS_HEADER_LEN {
            return Err(Error::Format(format!("{} bytes is shorter than the header", bytes.len())));
        }
        if bytes[0..4] != CHDS_MAGIC {
            return Err(Error::Format("bad magic, expected `CHDS`".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let version = u32_at(4);
        if version != CHDS_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let dim = u32_at(8) as usize;
        let count = u64_at(12) as usize;
        let seed = u64_at(20);
        let normalization_scale = f64::from_bits(u64_at(28));
        let expected = count
            .checked_mul(dim)
            .and_then(|n| n.checked_mul(16))
            .ok_or_else(|| Error::Format("header sizes overflow".into()))?;
        let payload = &bytes[CHDS_HEADER_LEN..];
        if payload.len() != expected {
            return Err(Error::Format(format!(
                "payload has {} bytes, header implies {expected}",
                payload.len()
            )));
        }
        let samples = parse_payload(payload)?;
        let mut ds = ChannelDataset::new(dim, samples, seed).map_err(|e| Error::Format(e.to_string()))?;
        ds.normalization_scale = normalization_scale;
        Ok(ds)
    }

    /// Writes the CHDS file plus a JSON provenance sidecar (skipped when empty).
    pub fn write_chds(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        w.write_all(&self.to_chds_bytes()?).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))?;
        if !self.provenance.is_empty() {
            let side = sidecar_path(path);
            let text = serde_json::to_string_pretty(&self.provenance)?;
            std::fs::write(&side, text + "\n").map_err(|e| Error::io(&side, e))?;
        }
        Ok(())
    }

    /// Reads a CHDS file and its sidecar, if present.
    pub fn read_chds(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut bytes = Vec::new();
        BufReader::new(file)
            .read_to_end(&mut bytes)
            .map_err(|e| Error::io(path, e))?;
        let mut ds = Self::from_chds_bytes(&bytes)?;
        let side = sidecar_path(path);
        if side.is_file() {
            let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
            ds.provenance = serde_json::from_str(&text)?;
        }
        Ok(ds)
    }
}

/// `<path>.json`
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Interleaved little-endian f64 `(re, im)` pairs.
pub fn payload_bytes(samples: &[Complex64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(samples.len() * 16);
    for z in samples {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

pub fn parse_payload(bytes: &[u8]) -> Result<Vec<Complex64>> {
    if bytes.len() % 16 != 0 {
        return Err(Error::Format(format!(
            "{} bytes is not a whole number of complex f64 values",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[0..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..16].try_into().unwrap()),
            )
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ChannelDataset {
        ChannelDataset::new(
            2,
            vec![
                Complex64::new(1.0, 0.5),
                Complex64::new(-0.25, 2.0),
                Complex64::new(0.0, -1.0),
                Complex64::new(3.0, 0.0),
            ],
            42,
        )
        .unwrap()
    }

    #[test]
    fn header_layout() {
        let bytes = small().to_chds_bytes().unwrap();
        assert_eq!(&bytes[0..4], b"CHDS");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(bytes[12..20].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(bytes[20..28].try_into().unwrap()), 42);
        assert_eq!(f64::from_le_bytes(bytes[28..36].try_into().unwrap()), 1.0);
        assert_eq!(bytes.len(), CHDS_HEADER_LEN + 4 * 16);
        assert_eq!(f64::from_le_bytes(bytes[36..44].try_into().unwrap()), 1.0);
        assert_eq!(f64::from_le_bytes(bytes[44..52].try_into().unwrap()), 0.5);
    }

    #[test]
    fn bytes_round_trip() {
        let ds = small().scaled(0.5);
        let bytes = ds.to_chds_bytes().unwrap();
        let back = ChannelDataset::from_chds_bytes(&bytes).unwrap();
        assert_eq!(back.to_chds_bytes().unwrap(), bytes);
        assert_eq!(back.normalization_scale, 0.5);
    }

    #[test]
    fn rejects_corrupt_files() {
        let mut bytes = small().to_chds_bytes().unwrap();
        assert!(ChannelDataset::from_chds_bytes(&bytes[..bytes.len() - 1]).is_err());
        bytes[4] = 2;
        assert!(matches!(ChannelDataset::from_chds_bytes(&bytes), Err(Error::Format(_))));
        bytes[4] = 1;
        bytes[0] = b'X';
        assert!(matches!(ChannelDataset::from_chds_bytes(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn file_round_trip_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.chds");
        let ds = small().with_provenance("generator", "unit-test");
        ds.write_chds(&path).unwrap();
        assert!(sidecar_path(&path).is_file());
        let back = ChannelDataset::read_chds(&path).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn mean_square_and_select() {
        let ds = small();
        let expect = (1.0 + 0.25 + 0.0625 + 4.0 + 1.0 + 9.0) / 2.0;
        assert!((ds.mean_square_norm() - expect).abs() < 1e-15);
        let sub = ds.select(&[1]);
        assert_eq!(sub.count(), 1);
        assert_eq!(sub.sample(0), ds.sample(1));
        assert!(ChannelDataset::new(3, vec![Complex64::new(0.0, 0.0); 4], 0).is_err());
    }

    #[test]
    fn split_rows_partitions_in_order() {
        let ds = small();
        let (a, b) = ds.clone().split_rows(1).unwrap();
        assert_eq!((a.count(), b.count()), (1, 1));
        assert_eq!(a.sample(0), ds.sample(0));
        assert_eq!(b.sample(0), ds.sample(1));
        assert!(ds.split_rows(3).is_err());
    }
}
