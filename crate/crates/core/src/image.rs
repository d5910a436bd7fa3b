//! Gray-level images and 8-bit portable graymap ingestion.

use std::collections::hash_map::DefaultHasher;
use std::fs;
use std::hash::{Hash, Hasher};
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{DicError, Result};

/// Immutable row-major grid of gray levels.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
    id: usize,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(DicError::ZeroDimension);
        }
        if data.len() != width * height {
            return Err(DicError::InvalidImage(format!(
                "expected {} samples, got {}",
                width * height,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(DicError::InvalidImage(format!(
                "non-finite gray level at index {i}"
            )));
        }
        Ok(Self {
            width,
            height,
            data,
            id: 0,
        })
    }

    /// Builds an image by evaluating `f(x, y)` on every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn with_id(mut self, id: usize) -> Self {
        self.id = id;
        self
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn id(&self) -> usize {
        self.id
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn row(&self, y: usize) -> &[f64] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    /// Hash over the exact bit patterns of every sample.
    pub fn checksum(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.width.hash(&mut h);
        self.height.hash(&mut h);
        for v in &self.data {
            v.to_bits().hash(&mut h);
        }
        h.finish()
    }

    /// Encodes as binary 8-bit graymap; gray levels are rounded and clamped to [0, 255].
    pub fn to_pgm_bytes(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.data.iter().map(|v| v.round().clamp(0.0, 255.0) as u8));
        out
    }

    pub fn save_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut file = fs::File::create(path).map_err(|e| DicError::io(path, e))?;
        file.write_all(&self.to_pgm_bytes())
            .map_err(|e| DicError::io(path, e))
    }
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderCursor<'a> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn next_uint(&mut self) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(DicError::Unreadable("malformed graymap header".into()));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| DicError::Unreadable("header value out of range".into()))
    }
}

/// Decodes a binary ("P5") or plain ("P2") 8-bit graymap.
pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.len() < 2 {
        return Err(DicError::Unreadable("file too short".into()));
    }
    let binary = match &bytes[..2] {
        b"P5" => true,
        b"P2" => false,
        _ => return Err(DicError::UnsupportedFormat("not a P5/P2 graymap".into())),
    };
    let mut cur = HeaderCursor { bytes, pos: 2 };
    let width = cur.next_uint()?;
    let height = cur.next_uint()?;
    let maxval = cur.next_uint()?;
    if width == 0 || height == 0 {
        return Err(DicError::ZeroDimension);
    }
    if maxval == 0 || maxval > 255 {
        return Err(DicError::UnsupportedFormat(format!(
            "maxval {maxval}; only 8-bit graymaps are supported"
        )));
    }
    let n = width
        .checked_mul(height)
        .ok_or_else(|| DicError::Unreadable("dimensions overflow".into()))?;
    let data = if binary {
        // exactly one whitespace byte separates the header from the raster
        let start = cur.pos + 1;
        if cur.pos >= bytes.len()
            || !bytes[cur.pos].is_ascii_whitespace()
            || bytes.len() < start + n
        {
            return Err(DicError::Unreadable("truncated raster".into()));
        }
        bytes[start..start + n]
            .iter()
            .map(|&b| f64::from(b))
            .collect()
    } else {
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            let v = cur
                .next_uint()
                .map_err(|_| DicError::Unreadable("truncated raster".into()))?;
            if v > maxval {
                return Err(DicError::Unreadable(format!("sample {v} exceeds maxval")));
            }
            data.push(v as f64);
        }
        data
    };
    GrayImage::new(width, height, data)
}

pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| DicError::io(path, e))?;
    decode_pgm(&bytes)
}

/// Loads every file in `dir` whose name matches the glob `pattern`, ordered
/// lexicographically by file name. Image ids are the positions in that order.
pub fn load_sequence(dir: impl AsRef<Path>, pattern: &str) -> Result<Vec<GrayImage>> {
    let paths = sequence_paths(dir, pattern)?;
    if paths.len() < 2 {
        return Err(DicError::InsufficientImages { found: paths.len() });
    }
    let mut images = Vec::with_capacity(paths.len());
    for (i, p) in paths.iter().enumerate() {
        let img = load_image(p)?.with_id(i);
        if let Some(first) = images.first() {
            let first: &GrayImage = first;
            if first.width() != img.width() || first.height() != img.height() {
                return Err(DicError::DimensionMismatch(
                    first.width(),
                    first.height(),
                    img.width(),
                    img.height(),
                ));
            }
        }
        images.push(img);
    }
    Ok(images)
}

/// Matching file paths in lexicographic file-name order.
pub fn sequence_paths(dir: impl AsRef<Path>, pattern: &str) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let pat = glob::Pattern::new(pattern)
        .map_err(|e| DicError::Parse(format!("bad pattern {pattern:?}: {e}")))?;
    let entries = fs::read_dir(dir).map_err(|e| DicError::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| DicError::io(dir, e))?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        if entry.path().is_file() && pat.matches(name) {
            paths.push(entry.path());
        }
    }
    paths.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(paths)
}
