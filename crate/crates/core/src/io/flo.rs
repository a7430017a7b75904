//! Middlebury `.flo` container for dense flow fields.
//!
//! Layout (little-endian): `f32` sentinel `202021.25`, `i32` width, `i32`
//! height, then `width * height` interleaved `(u, v)` `f32` pairs in
//! row-major order.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

pub const FLO_MAGIC: f32 = 202021.25;
pub const FLO_HEADER_BYTES: usize = 12;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("bad magic: expected 202021.25, found {found}")]
    BadMagic { found: f32 },
    #[error("truncated stream: expected {expected} vector pairs, found {found}")]
    Truncated { expected: u64, found: u64 },
    #[error("non-finite flow component at pixel ({x}, {y})")]
    NonFinite { x: u32, y: u32 },
    #[error("invalid dimensions {width}x{height}")]
    InvalidDimensions { width: i64, height: i64 },
    #[error("vector count {len} does not match {width}x{height}")]
    ShapeMismatch { width: u32, height: u32, len: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Dense per-pixel displacement field, pixels per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: u32,
    height: u32,
    vectors: Vec<[f32; 2]>,
}

impl FlowField {
    pub fn new(width: u32, height: u32, vectors: Vec<[f32; 2]>) -> Result<Self, FlowError> {
        if vectors.len() as u64 != u64::from(width) * u64::from(height) {
            return Err(FlowError::ShapeMismatch {
                width,
                height,
                len: vectors.len(),
            });
        }
        if let Some(i) = vectors.iter().position(|[u, v]| !u.is_finite() || !v.is_finite()) {
            return Err(FlowError::NonFinite {
                x: (i % width as usize) as u32,
                y: (i / width as usize) as u32,
            });
        }
        Ok(Self { width, height, vectors })
    }

    pub fn zeros(width: u32, height: u32) -> Self {
        Self::uniform(width, height, [0.0, 0.0])
    }

    pub fn uniform(width: u32, height: u32, uv: [f32; 2]) -> Self {
        Self {
            width,
            height,
            vectors: vec![uv; width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn vectors(&self) -> &[[f32; 2]] {
        &self.vectors
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> [f32; 2] {
        self.vectors[y as usize * self.width as usize + x as usize]
    }

    /// Overwrite one vector. Panics on out-of-range coordinates or
    /// non-finite components.
    pub fn set(&mut self, x: u32, y: u32, uv: [f32; 2]) {
        assert!(uv[0].is_finite() && uv[1].is_finite(), "non-finite flow");
        assert!(x < self.width && y < self.height, "pixel out of range");
        self.vectors[y as usize * self.width as usize + x as usize] = uv;
    }

    pub fn row(&self, y: u32) -> &[[f32; 2]] {
        let w = self.width as usize;
        let start = y as usize * w;
        &self.vectors[start..start + w]
    }
}

fn read_exact_or_eof<R: Read>(src: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match src.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

/// Read one flow field. Stops after the declared payload; trailing bytes are
/// left in the stream.
pub fn read_flow<R: Read>(mut src: R) -> Result<FlowField, FlowError> {
    let mut header = [0u8; FLO_HEADER_BYTES];
    let got = read_exact_or_eof(&mut src, &mut header)?;
    if got < 4 {
        return Err(FlowError::Truncated { expected: 0, found: 0 });
    }
    let magic = f32::from_le_bytes(header[0..4].try_into().unwrap());
    if magic.to_bits() != FLO_MAGIC.to_bits() {
        return Err(FlowError::BadMagic { found: magic });
    }
    if got < FLO_HEADER_BYTES {
        return Err(FlowError::Truncated { expected: 0, found: 0 });
    }
    let width = i32::from_le_bytes(header[4..8].try_into().unwrap());
    let height = i32::from_le_bytes(header[8..12].try_into().unwrap());
    if width < 0 || height < 0 {
        return Err(FlowError::InvalidDimensions {
            width: width.into(),
            height: height.into(),
        });
    }
    let (width, height) = (width as u32, height as u32);
    let expected = u64::from(width) * u64::from(height);

    // Read in bounded chunks so a lying header cannot force a huge allocation.
    const CHUNK_PAIRS: u64 = 8192;
    let mut vectors = Vec::with_capacity(expected.min(1 << 20) as usize);
    let mut buf = vec![0u8; (CHUNK_PAIRS * 8) as usize];
    let mut index = 0u64;
    while index < expected {
        let want = (expected - index).min(CHUNK_PAIRS) as usize * 8;
        let n = read_exact_or_eof(&mut src, &mut buf[..want])?;
        for pair in buf[..n - n % 8].chunks_exact(8) {
            let u = f32::from_le_bytes(pair[0..4].try_into().unwrap());
            let v = f32::from_le_bytes(pair[4..8].try_into().unwrap());
            if !u.is_finite() || !v.is_finite() {
                return Err(FlowError::NonFinite {
                    x: (index % u64::from(width)) as u32,
                    y: (index / u64::from(width)) as u32,
                });
            }
            vectors.push([u, v]);
            index += 1;
        }
        if n < want {
            return Err(FlowError::Truncated { expected, found: index });
        }
    }
    Ok(FlowField { width, height, vectors })
}

pub fn write_flow<W: Write>(field: &FlowField, mut sink: W) -> Result<(), FlowError> {
    let mut header = [0u8; FLO_HEADER_BYTES];
    header[0..4].copy_from_slice(&FLO_MAGIC.to_le_bytes());
    header[4..8].copy_from_slice(&(field.width as i32).to_le_bytes());
    header[8..12].copy_from_slice(&(field.height as i32).to_le_bytes());
    sink.write_all(&header)?;
    let mut row = Vec::with_capacity(field.width as usize * 8);
    for y in 0..field.height {
        row.clear();
        for [u, v] in field.row(y) {
            row.extend_from_slice(&u.to_le_bytes());
            row.extend_from_slice(&v.to_le_bytes());
        }
        sink.write_all(&row)?;
    }
    sink.flush()?;
    Ok(())
}

pub fn read_flow_file(path: impl AsRef<Path>) -> Result<FlowField, FlowError> {
    read_flow(BufReader::new(File::open(path)?))
}

pub fn write_flow_file(field: &FlowField, path: impl AsRef<Path>) -> Result<(), FlowError> {
    write_flow(field, BufWriter::new(File::create(path)?))
}

/// Conventional file name for the flow of a given frame.
pub fn flow_file_name(frame: u64) -> String {
    format!("frame_{frame:06}.flo")
}
