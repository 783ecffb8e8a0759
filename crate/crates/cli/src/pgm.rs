//! Minimal grayscale PGM reading (P2/P5) and writing (P5).

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    /// Row-major, scaled to 0..=255.
    pub pixels: Vec<u8>,
}

struct Tokens<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Tokens<'_> {
    fn next(&mut self) -> Option<&str> {
        loop {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.pos < self.bytes.len() && self.bytes[self.pos] == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
                continue;
            }
            break;
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        (start < self.pos).then(|| std::str::from_utf8(&self.bytes[start..self.pos]).unwrap_or(""))
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| CliError::Malformed(format!("pgm: bad or missing {what}")))
    }
}

pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut t = Tokens { bytes, pos: 0 };
    let magic = t.next().unwrap_or("").to_string();
    if magic != "P5" && magic != "P2" {
        return Err(CliError::Malformed(format!("pgm: unsupported magic {magic:?}")));
    }
    let width = t.number("width")?;
    let height = t.number("height")?;
    let maxval = t.number("maxval")?;
    if width == 0 || height == 0 || maxval == 0 || maxval > 255 {
        return Err(CliError::Malformed(format!("pgm: unsupported header {width}×{height}, maxval {maxval}")));
    }
    let n = width * height;
    let raw: Vec<usize> = if magic == "P5" {
        let start = t.pos + 1;
        let body = bytes
            .get(start..start + n)
            .ok_or_else(|| CliError::Malformed("pgm: truncated pixel data".into()))?;
        body.iter().map(|&b| b as usize).collect()
    } else {
        (0..n).map(|_| t.number("pixel")).collect::<Result<_>>()?
    };
    if let Some(&bad) = raw.iter().find(|&&v| v > maxval) {
        return Err(CliError::Malformed(format!("pgm: pixel {bad} above maxval {maxval}")));
    }
    let pixels = raw.iter().map(|&v| ((v * 255 + maxval / 2) / maxval) as u8).collect();
    Ok(GrayImage { width, height, pixels })
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

/// Maps values linearly so the smallest becomes 0 and the largest 255; a
/// constant input maps to all zeros.
pub fn min_max_gray(values: &[f64], width: usize, height: usize) -> GrayImage {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let pixels = values
        .iter()
        .map(|&v| if span > 0.0 { ((v - lo) / span * 255.0).round() as u8 } else { 0 })
        .collect();
    GrayImage { width, height, pixels }
}
