//! Grayscale intensity grids and binary PGM (P5) I/O.

use std::path::Path;

use crate::error::{Error, Result};
use crate::io::{read_file, write_atomic};

/// Row-major grayscale image with real-valued intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Dimension {
                expected: width * height,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("image intensities must be finite"));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    /// Pixel lookup with replicated borders.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f32 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.get(x, y)
    }
}

/// Central-difference gradients with replicated edge pixels.
pub(crate) fn gradients(img: &GrayImage) -> (Vec<f32>, Vec<f32>) {
    let (w, h) = (img.width(), img.height());
    let mut gx = vec![0.0f32; w * h];
    let mut gy = vec![0.0f32; w * h];
    for y in 0..h {
        let up = y.saturating_sub(1);
        let down = (y + 1).min(h - 1);
        for x in 0..w {
            let left = x.saturating_sub(1);
            let right = (x + 1).min(w - 1);
            gx[y * w + x] = (img.get(right, y) - img.get(left, y)) * 0.5;
            gy[y * w + x] = (img.get(x, down) - img.get(x, up)) * 0.5;
        }
    }
    (gx, gy)
}

fn skip_ws_and_comments(bytes: &[u8], mut pos: usize) -> usize {
    loop {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
        } else {
            return pos;
        }
    }
}

fn header_int(bytes: &[u8], pos: &mut usize, what: &str) -> Result<usize> {
    *pos = skip_ws_and_comments(bytes, *pos);
    let start = *pos;
    while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
        *pos += 1;
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::format(start as u64, format!("invalid PGM {what}")))
}

/// Decodes an 8-bit binary PGM.
pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(Error::format(0, "expected binary PGM magic P5"));
    }
    let mut pos = 2;
    let width = header_int(bytes, &mut pos, "width")?;
    let height = header_int(bytes, &mut pos, "height")?;
    let maxval = header_int(bytes, &mut pos, "maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::format(
            pos as u64,
            format!("unsupported maxval {maxval}, only 8-bit PGM is accepted"),
        ));
    }
    if width == 0 || height == 0 {
        return Err(Error::format(3, "empty image"));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let need = width * height;
    if bytes.len() < pos + need {
        return Err(Error::format(
            bytes.len() as u64,
            format!("truncated raster: need {need} bytes"),
        ));
    }
    let data = bytes[pos..pos + need].iter().map(|&b| b as f32).collect();
    GrayImage::new(width, height, data)
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    decode_pgm(&read_file(path)?).map_err(|e| e.with_path(path))
}

/// Encodes as 8-bit PGM, clamping intensities to `0..=255`.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(img.data.iter().map(|v| v.round().clamp(0.0, 255.0) as u8));
    out
}

pub fn write_pgm(img: &GrayImage, path: &Path) -> Result<()> {
    write_atomic(path, &encode_pgm(img))
}
