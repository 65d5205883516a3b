//! On-disk array container.
//!
//! Layout: one ASCII header line terminated by `\n`, then the raw payload
//! of 64-bit little-endian floats in row-major order.  The header is
//! space-separated: the magic `DECT1`, a kind tag, the dimensions, and
//! optional `key=value` attributes (currently `y0` for dual sinograms).
//! Pair/dual kinds store two consecutive blocks, so the payload holds
//! `2 * product(dims)` values; single kinds hold `product(dims)`.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::AppError;

pub const MAGIC: &str = "DECT1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrayKind {
    Image,
    ImagePair,
    SinogramDual,
    Mask,
}

impl ArrayKind {
    pub fn tag(self) -> &'static str {
        match self {
            ArrayKind::Image => "image",
            ArrayKind::ImagePair => "image_pair",
            ArrayKind::SinogramDual => "sinogram_dual",
            ArrayKind::Mask => "mask",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "image" => Some(ArrayKind::Image),
            "image_pair" => Some(ArrayKind::ImagePair),
            "sinogram_dual" => Some(ArrayKind::SinogramDual),
            "mask" => Some(ArrayKind::Mask),
            _ => None,
        }
    }

    /// Number of consecutive payload blocks of `product(dims)` values.
    pub fn blocks(self) -> usize {
        match self {
            ArrayKind::Image | ArrayKind::Mask => 1,
            ArrayKind::ImagePair | ArrayKind::SinogramDual => 2,
        }
    }
}

impl fmt::Display for ArrayKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayFile {
    pub kind: ArrayKind,
    /// Logical dimensions (rows first), excluding the block factor.
    pub dims: Vec<usize>,
    /// Unattenuated counts per ray; present only for dual sinograms.
    pub y0: Option<f64>,
    /// `blocks * product(dims)` values, blocks concatenated.
    pub data: Vec<f64>,
}

impl ArrayFile {
    pub fn new(
        kind: ArrayKind,
        dims: Vec<usize>,
        y0: Option<f64>,
        data: Vec<f64>,
    ) -> Result<Self, AppError> {
        let want = kind.blocks() * dims.iter().product::<usize>();
        if data.len() != want {
            return Err(AppError::numeric(format!(
                "array payload length {} does not match {} {:?} (want {})",
                data.len(),
                kind,
                dims,
                want
            )));
        }
        if kind == ArrayKind::SinogramDual && y0.is_none() {
            return Err(AppError::numeric("sinogram_dual requires a y0 attribute"));
        }
        Ok(Self { kind, dims, y0, data })
    }

    /// The two payload blocks of a pair/dual file.
    pub fn split_blocks(&self) -> (&[f64], &[f64]) {
        let n = self.data.len() / 2;
        (&self.data[..n], &self.data[n..])
    }

    fn header(&self) -> String {
        let mut h = format!("{MAGIC} {}", self.kind.tag());
        for d in &self.dims {
            h.push_str(&format!(" {d}"));
        }
        if let Some(y0) = self.y0 {
            // Round-trippable float formatting.
            h.push_str(&format!(" y0={:e}", y0));
        }
        h.push('\n');
        h
    }

    /// Atomic write: temp file in the target directory, then rename.
    pub fn write(&self, path: &Path) -> Result<(), AppError> {
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
        let mut tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or(Path::new(".")))
            .map_err(|e| AppError::io_at(path, e))?;
        tmp.write_all(self.header().as_bytes()).map_err(|e| AppError::io_at(path, e))?;
        let mut bytes = Vec::with_capacity(self.data.len() * 8);
        for &v in &self.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        tmp.write_all(&bytes).map_err(|e| AppError::io_at(path, e))?;
        tmp.persist(path).map_err(|e| AppError::io_at(path, e.error))?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, AppError> {
        let mut file = std::fs::File::open(path).map_err(|e| AppError::io_at(path, e))?;
        let mut raw = Vec::new();
        file.read_to_end(&mut raw).map_err(|e| AppError::io_at(path, e))?;
        let nl = raw
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| AppError::numeric(format!("{}: missing header line", path.display())))?;
        let header = std::str::from_utf8(&raw[..nl])
            .map_err(|_| AppError::numeric(format!("{}: header is not ASCII", path.display())))?;
        let mut tokens = header.split_whitespace();
        if tokens.next() != Some(MAGIC) {
            return Err(AppError::numeric(format!("{}: bad magic", path.display())));
        }
        let kind = tokens
            .next()
            .and_then(ArrayKind::from_tag)
            .ok_or_else(|| AppError::numeric(format!("{}: unknown kind", path.display())))?;
        let mut dims = Vec::new();
        let mut y0 = None;
        for tok in tokens {
            if let Some(val) = tok.strip_prefix("y0=") {
                y0 = Some(val.parse::<f64>().map_err(|_| {
                    AppError::numeric(format!("{}: bad y0 attribute", path.display()))
                })?);
            } else {
                dims.push(tok.parse::<usize>().map_err(|_| {
                    AppError::numeric(format!("{}: bad dimension token `{tok}`", path.display()))
                })?);
            }
        }
        let payload = &raw[nl + 1..];
        if payload.len() % 8 != 0 {
            return Err(AppError::numeric(format!(
                "{}: payload is not a whole number of f64 values",
                path.display()
            )));
        }
        let data: Vec<f64> = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Self::new(kind, dims, y0, data)
    }
}
