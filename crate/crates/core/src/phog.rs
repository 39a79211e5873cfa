//! Pyramid Histogram of Oriented Gradients.
//!
//! Every pixel votes its gradient magnitude into one orientation bin. Votes
//! are accumulated per cell of a spatial pyramid (level `l` has `2^l x 2^l`
//! cells), levels are concatenated coarse to fine, and the whole vector is
//! L1-normalized.

use std::f64::consts::PI;

use crate::descriptor::{GlobalDescriptor, Metric};
use crate::error::{Error, Result};
use crate::image::{gradients, GrayImage};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AngleSpan {
    /// Unsigned orientations, `[0, 180)` degrees.
    Half,
    /// Signed orientations, `[0, 360)` degrees.
    Full,
}

impl AngleSpan {
    pub fn radians(self) -> f64 {
        match self {
            AngleSpan::Half => PI,
            AngleSpan::Full => 2.0 * PI,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhogParams {
    pub bins: usize,
    /// Pyramid levels beyond the whole-image level.
    pub levels: u32,
    pub angle_span: AngleSpan,
}

impl Default for PhogParams {
    /// 60 bins over 360 degrees and two extra levels: 60 * (1 + 4 + 16) = 1260.
    fn default() -> Self {
        Self {
            bins: 60,
            levels: 2,
            angle_span: AngleSpan::Full,
        }
    }
}

impl PhogParams {
    pub fn descriptor_len(&self) -> usize {
        let cells: usize = (0..=self.levels).map(|l| 1usize << (2 * l)).sum();
        self.bins * cells
    }

    fn finest_grid(&self) -> usize {
        1usize << self.levels
    }
}

/// Orientation bin of a gradient, or `None` for a zero gradient.
#[inline]
pub(crate) fn orientation_bin(gx: f64, gy: f64, params: &PhogParams) -> Option<usize> {
    if gx == 0.0 && gy == 0.0 {
        return None;
    }
    let span = params.angle_span.radians();
    let theta = gy.atan2(gx).rem_euclid(span);
    let bin = (theta / span * params.bins as f64) as usize;
    Some(bin.min(params.bins - 1))
}

/// Unrounded PHOG vector in `f64`.
pub fn phog_histogram(img: &GrayImage, params: &PhogParams) -> Result<Vec<f64>> {
    if params.bins == 0 {
        return Err(Error::domain("PHOG needs at least one orientation bin"));
    }
    let grid = params.finest_grid();
    let (w, h) = (img.width(), img.height());
    if w < grid || h < grid {
        return Err(Error::Size {
            width: w,
            height: h,
            min: grid,
        });
    }
    let bins = params.bins;
    let (gx, gy) = gradients(img);

    // Finest-level cell histograms. Cell boundaries floor(c * W / 2^l) nest
    // across levels, so coarser cells are exact sums of their children.
    let col_of: Vec<usize> = (0..w).map(|x| x * grid / w).collect();
    let mut finest = vec![0.0f64; grid * grid * bins];
    for y in 0..h {
        let row = y * grid / h;
        for x in 0..w {
            let i = y * w + x;
            let (dx, dy) = (gx[i] as f64, gy[i] as f64);
            if let Some(b) = orientation_bin(dx, dy, params) {
                let cell = row * grid + col_of[x];
                finest[cell * bins + b] += (dx * dx + dy * dy).sqrt();
            }
        }
    }

    let mut levels: Vec<Vec<f64>> = vec![finest];
    for l in (0..params.levels).rev() {
        let n = 1usize << l;
        let child = levels.last().unwrap();
        let mut hist = vec![0.0f64; n * n * bins];
        for cy in 0..n {
            for cx in 0..n {
                let dst = (cy * n + cx) * bins;
                for (sy, sx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    let src = ((2 * cy + sy) * 2 * n + 2 * cx + sx) * bins;
                    for b in 0..bins {
                        hist[dst + b] += child[src + b];
                    }
                }
            }
        }
        levels.push(hist);
    }

    let mut out: Vec<f64> = Vec::with_capacity(params.descriptor_len());
    for level in levels.iter().rev() {
        out.extend_from_slice(level);
    }
    let total: f64 = out.iter().sum();
    if total > 0.0 {
        out.iter_mut().for_each(|v| *v /= total);
    }
    Ok(out)
}

/// PHOG global descriptor (chi-squared metric).
pub fn compute_phog(img: &GrayImage, params: &PhogParams) -> Result<GlobalDescriptor> {
    let hist = phog_histogram(img, params)?;
    GlobalDescriptor::new(hist.into_iter().map(|v| v as f32).collect(), Metric::ChiSquared)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_length_is_1260() {
        assert_eq!(PhogParams::default().descriptor_len(), 1260);
        let img = GrayImage::from_fn(32, 24, |x, y| ((x * 7 + y * 3) % 11) as f32);
        assert_eq!(compute_phog(&img, &PhogParams::default()).unwrap().dim(), 1260);
    }

    #[test]
    fn constant_image_gives_zero_vector() {
        let img = GrayImage::filled(20, 20, 128.0);
        let d = compute_phog(&img, &PhogParams::default()).unwrap();
        assert!(d.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn too_small_image_rejected() {
        let img = GrayImage::filled(3, 10, 1.0);
        assert!(matches!(
            compute_phog(&img, &PhogParams::default()),
            Err(Error::Size { min: 4, .. })
        ));
    }

    #[test]
    fn sums_to_one() {
        let img = GrayImage::from_fn(40, 30, |x, y| ((x * x + 3 * y) % 17) as f32);
        let d = phog_histogram(&img, &PhogParams::default()).unwrap();
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn half_span_folds_opposite_gradients() {
        let p = PhogParams {
            bins: 8,
            levels: 0,
            angle_span: AngleSpan::Half,
        };
        assert_eq!(orientation_bin(1.0, 0.0, &p), orientation_bin(-1.0, 0.0, &p));
        let full = PhogParams {
            angle_span: AngleSpan::Full,
            ..p
        };
        assert_ne!(
            orientation_bin(1.0, 0.0, &full),
            orientation_bin(-1.0, 0.0, &full)
        );
        assert_eq!(orientation_bin(0.0, 0.0, &full), None);
    }

    #[test]
    fn deterministic() {
        let img = GrayImage::from_fn(33, 17, |x, y| ((x ^ y) % 13) as f32);
        let a = compute_phog(&img, &PhogParams::default()).unwrap();
        let b = compute_phog(&img, &PhogParams::default()).unwrap();
        let bits = |d: &GlobalDescriptor| d.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }
}
