//! Binary portable graymap (P5) and pixmap (P6) I/O.
//!
//! All raster interchange in this crate goes through P5: skeletons as maxval
//! 255 (0 = background, 255 = skeleton pixel), heatmaps as maxval 65535
//! big-endian with `value = round(65535 * v)`, and confidence maps accepted at
//! either maxval and normalized on load. Overlays are written as P6.
//!
//! The reader accepts untrusted bytes: dimensions are bounded, allocations are
//! checked, and every malformed input maps to [`Error::Graymap`].

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Hard cap on `width * height`, large enough for aerial tiles with margin.
const MAX_PIXELS: u64 = 1 << 28;

/// A decoded P5 graymap with raw samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Graymap {
    pub width: u32,
    pub height: u32,
    pub maxval: u16,
    /// Row-major samples, one per pixel, already widened to u16.
    pub samples: Vec<u16>,
}

impl Graymap {
    pub fn new(width: u32, height: u32, maxval: u16, samples: Vec<u16>) -> Self {
        debug_assert_eq!(samples.len(), width as usize * height as usize);
        Graymap {
            width,
            height,
            maxval,
            samples,
        }
    }

    /// Samples normalized to `[0, 1]`.
    pub fn normalized(&self) -> Vec<f32> {
        let m = self.maxval.max(1) as f32;
        self.samples.iter().map(|&s| s as f32 / m).collect()
    }
}

/// Parse a P5 graymap from raw bytes.
pub fn parse_graymap(bytes: &[u8]) -> Result<Graymap> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.token()?;
    if magic != b"P5" {
        return Err(bad("expected magic 'P5'"));
    }
    let width = cur.number()?;
    let height = cur.number()?;
    let maxval = cur.number()?;
    if width == 0 || height == 0 {
        return Err(bad("zero dimension"));
    }
    if width as u64 * height as u64 > MAX_PIXELS {
        return Err(bad("image too large"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(bad("maxval must be in 1..=65535"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    cur.single_whitespace()?;

    let n = width as usize * height as usize;
    let wide = maxval > 255;
    let expected = if wide { n * 2 } else { n };
    let data = cur.rest();
    if data.len() < expected {
        return Err(bad("truncated raster data"));
    }
    if data.len() > expected {
        return Err(bad("trailing bytes after raster data"));
    }
    let mut samples = Vec::with_capacity(n);
    if wide {
        for chunk in data.chunks_exact(2) {
            samples.push(u16::from_be_bytes([chunk[0], chunk[1]]));
        }
    } else {
        samples.extend(data.iter().map(|&b| b as u16));
    }
    if samples.iter().any(|&s| s > maxval as u16) {
        return Err(bad("sample exceeds maxval"));
    }
    Ok(Graymap {
        width: width as u32,
        height: height as u32,
        maxval: maxval as u16,
        samples,
    })
}

pub fn read_graymap(path: &Path) -> Result<Graymap> {
    let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_graymap(&bytes).map_err(|e| match e {
        Error::Graymap(msg) => Error::Graymap(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Encode a P5 graymap. `maxval > 255` emits big-endian 16-bit samples.
pub fn encode_graymap(width: u32, height: u32, maxval: u16, samples: &[u16]) -> Vec<u8> {
    assert_eq!(samples.len(), width as usize * height as usize);
    let mut out = format!("P5\n{width} {height}\n{maxval}\n").into_bytes();
    if maxval > 255 {
        for &s in samples {
            out.extend_from_slice(&s.to_be_bytes());
        }
    } else {
        out.extend(samples.iter().map(|&s| s as u8));
    }
    out
}

pub fn write_graymap(path: &Path, width: u32, height: u32, maxval: u16, samples: &[u16]) -> Result<()> {
    write_atomic(path, &encode_graymap(width, height, maxval, samples))
}

/// Encode a P6 pixmap from interleaved RGB bytes.
pub fn encode_pixmap(width: u32, height: u32, rgb: &[u8]) -> Vec<u8> {
    assert_eq!(rgb.len(), width as usize * height as usize * 3);
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(rgb);
    out
}

pub fn write_pixmap(path: &Path, width: u32, height: u32, rgb: &[u8]) -> Result<()> {
    write_atomic(path, &encode_pixmap(width, height, rgb))
}

/// Write via a temporary sibling file and rename, so readers never observe a
/// partially written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let tmp = match dir {
        Some(d) => d.join(format!(
            ".{}.tmp",
            path.file_name().and_then(|n| n.to_str()).unwrap_or("out")
        )),
        None => Path::new(&format!(".{}.tmp", path.display())).to_path_buf(),
    };
    fs::write(&tmp, bytes).map_err(|e| Error::io(tmp.display().to_string(), e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path.display().to_string(), e))
}

fn bad(msg: &str) -> Error {
    Error::Graymap(msg.to_string())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws_and_comments(&mut self) -> Result<()> {
        loop {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.pos < self.bytes.len() && self.bytes[self.pos] == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                return Ok(());
            }
        }
    }

    fn token(&mut self) -> Result<&'a [u8]> {
        self.skip_ws_and_comments()?;
        let start = self.pos;
        while self.pos < self.bytes.len()
            && !self.bytes[self.pos].is_ascii_whitespace()
            && self.bytes[self.pos] != b'#'
        {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(bad("unexpected end of header"));
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn number(&mut self) -> Result<u64> {
        let tok = self.token()?;
        if tok.len() > 10 || !tok.iter().all(|b| b.is_ascii_digit()) {
            return Err(bad("malformed header number"));
        }
        let mut v: u64 = 0;
        for &b in tok {
            v = v * 10 + (b - b'0') as u64;
        }
        Ok(v)
    }

    fn single_whitespace(&mut self) -> Result<()> {
        if self.pos >= self.bytes.len() || !self.bytes[self.pos].is_ascii_whitespace() {
            return Err(bad("missing separator before raster data"));
        }
        self.pos += 1;
        Ok(())
    }

    fn rest(&self) -> &'a [u8] {
        &self.bytes[self.pos..]
    }
}

/// Quantize a unit-interval value to a 16-bit sample.
pub fn quantize16(v: f32) -> u16 {
    (f64::from(v.clamp(0.0, 1.0)) * 65535.0).round() as u16
}
