//! Versioned binary container for the emotion and feature layers.
//!
//! Layout: 8-byte magic, little-endian `u32` header length, JSON header,
//! payload. The payload holds one 32-byte record per occupied cell
//! (`i32 row, i32 col, f64 sigma_x, f64 sigma_y, f64 weight`) followed by the
//! feature grid as `f64` values when present. The header carries the SHA-256
//! of the payload.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::emotion::{EmotionGrid, EmotionParams};
use crate::geometry::{Cell, GridGeometry};
use crate::grounding::FeatureGrid;

pub const MAGIC: &[u8; 8] = b"E2MAPARC";
pub const FORMAT_VERSION: u32 = 1;
const RECORD_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ArchiveError {
    #[error("i/o error: {0}")]
    Io(String),
    #[error("payload checksum mismatch (header {expected}, computed {found})")]
    ChecksumMismatch { expected: String, found: String },
    #[error("archive format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("malformed archive: {0}")]
    Malformed(String),
}

impl From<std::io::Error> for ArchiveError {
    fn from(e: std::io::Error) -> Self {
        ArchiveError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchiveHeader {
    pub version: u32,
    pub height: usize,
    pub width: usize,
    pub resolution: f64,
    pub origin: [f64; 2],
    pub valid_threshold: f64,
    pub support_sigmas: Option<f64>,
    pub cells: usize,
    /// Feature dimension; 0 when the archive carries no feature grid.
    pub feature_dim: usize,
    pub payload_len: usize,
    pub sha256: String,
}

/// The map layers stored together on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct MapArchive {
    pub emotion: EmotionGrid,
    pub features: Option<FeatureGrid>,
}

fn digest(payload: &[u8]) -> String {
    hex::encode(Sha256::digest(payload))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        let out: [u8; N] = self.bytes[self.pos..self.pos + N].try_into().expect("length checked");
        self.pos += N;
        out
    }

    fn i32(&mut self) -> i32 {
        i32::from_le_bytes(self.take())
    }

    fn f64(&mut self) -> f64 {
        f64::from_le_bytes(self.take())
    }
}

impl MapArchive {
    pub fn new(emotion: EmotionGrid, features: Option<FeatureGrid>) -> Result<Self, ArchiveError> {
        if let Some(f) = &features {
            if f.geometry() != emotion.geometry() {
                return Err(ArchiveError::Malformed("feature and emotion grids differ in geometry".into()));
            }
        }
        Ok(Self { emotion, features })
    }

    pub fn header(&self) -> ArchiveHeader {
        let payload = self.payload();
        self.header_for(&payload)
    }

    fn header_for(&self, payload: &[u8]) -> ArchiveHeader {
        let g = self.emotion.geometry();
        ArchiveHeader {
            version: FORMAT_VERSION,
            height: g.height,
            width: g.width,
            resolution: g.resolution,
            origin: g.origin,
            valid_threshold: self.emotion.valid_threshold(),
            support_sigmas: self.emotion.support_sigmas(),
            cells: self.emotion.params().len(),
            feature_dim: self.features.as_ref().map_or(0, FeatureGrid::dim),
            payload_len: payload.len(),
            sha256: digest(payload),
        }
    }

    fn payload(&self) -> Vec<u8> {
        let params = self.emotion.params();
        let feature_len = self.features.as_ref().map_or(0, |f| f.raw().len());
        let mut out = Vec::with_capacity(params.len() * RECORD_LEN + feature_len * 8);
        for (cell, p) in params {
            out.extend_from_slice(&cell.row.to_le_bytes());
            out.extend_from_slice(&cell.col.to_le_bytes());
            out.extend_from_slice(&p.sigma_x.to_le_bytes());
            out.extend_from_slice(&p.sigma_y.to_le_bytes());
            out.extend_from_slice(&p.weight.to_le_bytes());
        }
        if let Some(f) = &self.features {
            for v in f.raw() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let payload = self.payload();
        let header = serde_json::to_vec(&self.header_for(&payload)).expect("header serializes");
        let mut out = Vec::with_capacity(12 + header.len() + payload.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ArchiveError> {
        if bytes.len() < 12 || &bytes[..8] != MAGIC {
            return Err(ArchiveError::Malformed("missing archive magic".into()));
        }
        let header_len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        let header_end = 12usize
            .checked_add(header_len)
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| ArchiveError::Malformed("truncated header".into()))?;
        let raw: serde_json::Value =
            serde_json::from_slice(&bytes[12..header_end]).map_err(|e| ArchiveError::Malformed(format!("header: {e}")))?;
        let version = raw.get("version").and_then(serde_json::Value::as_u64).ok_or_else(|| ArchiveError::Malformed("header has no version".into()))?;
        if version != u64::from(FORMAT_VERSION) {
            return Err(ArchiveError::VersionMismatch { found: u32::try_from(version).unwrap_or(u32::MAX), expected: FORMAT_VERSION });
        }
        let header: ArchiveHeader = serde_json::from_value(raw).map_err(|e| ArchiveError::Malformed(format!("header: {e}")))?;

        let payload = &bytes[header_end..];
        let found = digest(payload);
        if found != header.sha256 {
            return Err(ArchiveError::ChecksumMismatch { expected: header.sha256, found });
        }
        let geometry = GridGeometry::new(header.height, header.width, header.resolution, header.origin)
            .map_err(|e| ArchiveError::Malformed(e.to_string()))?;
        let expected_len = header.cells * RECORD_LEN + header.feature_dim * geometry.len() * 8;
        if payload.len() != expected_len || payload.len() != header.payload_len {
            return Err(ArchiveError::Malformed(format!("payload is {} bytes, header implies {expected_len}", payload.len())));
        }

        let mut r = Reader { bytes: payload, pos: 0 };
        let mut params = BTreeMap::new();
        for _ in 0..header.cells {
            let cell = Cell::new(r.i32(), r.i32());
            let p = EmotionParams { sigma_x: r.f64(), sigma_y: r.f64(), weight: r.f64() };
            if params.insert(cell, p).is_some() {
                return Err(ArchiveError::Malformed(format!("duplicate cell {cell}")));
            }
        }
        let emotion = EmotionGrid::from_parts(geometry, params, header.valid_threshold, header.support_sigmas)
            .map_err(|e| ArchiveError::Malformed(e.to_string()))?;
        let features = if header.feature_dim > 0 {
            let data = (0..header.feature_dim * geometry.len()).map(|_| r.f64()).collect();
            Some(FeatureGrid::from_raw(geometry, header.feature_dim, data).map_err(|e| ArchiveError::Malformed(e.to_string()))?)
        } else {
            None
        };
        Ok(Self { emotion, features })
    }

    pub fn save(&self, path: &Path) -> Result<(), ArchiveError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ArchiveError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
