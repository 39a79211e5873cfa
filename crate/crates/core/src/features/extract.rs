use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BinaryDescriptor, FeatureSet, LocalFeature, MAX_FEATURES};
use crate::image::{gradients, GrayImage};

/// Half-width of the 31x31 sampling patch.
pub const PATCH_RADIUS: usize = 15;
/// Keypoints closer than this to any border are dropped.
pub const BORDER: usize = 16;
const PATTERN_SEED: u64 = 42;

#[derive(Debug, Clone, Copy)]
pub struct ExtractParams {
    pub grid: usize,
    pub max_per_cell: usize,
    /// Minimum gradient magnitude for a keypoint.
    pub threshold: f32,
    pub max_features: usize,
}

impl Default for ExtractParams {
    fn default() -> Self {
        Self {
            grid: 16,
            max_per_cell: 1,
            threshold: 8.0,
            max_features: MAX_FEATURES,
        }
    }
}

type Offset = (i8, i8);

/// The 256 comparison pairs, drawn once from a fixed seed.
fn pattern() -> &'static [(Offset, Offset); 256] {
    static PATTERN: OnceLock<[(Offset, Offset); 256]> = OnceLock::new();
    PATTERN.get_or_init(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(PATTERN_SEED);
        let r = PATCH_RADIUS as i8;
        let mut draw = || (rng.gen_range(-r..=r), rng.gen_range(-r..=r));
        let mut out = [((0, 0), (0, 0)); 256];
        for pair in out.iter_mut() {
            let mut p = (draw(), draw());
            while p.0 == p.1 {
                p = (draw(), draw());
            }
            *pair = p;
        }
        out
    })
}

/// Binary descriptor of the patch centered on integer pixel `(x, y)`.
///
/// Returns `None` when the patch would leave the image.
pub fn describe(img: &GrayImage, x: usize, y: usize) -> Option<BinaryDescriptor> {
    if x < PATCH_RADIUS
        || y < PATCH_RADIUS
        || x + PATCH_RADIUS >= img.width()
        || y + PATCH_RADIUS >= img.height()
    {
        return None;
    }
    let mut d = BinaryDescriptor::default();
    for (i, ((ax, ay), (bx, by))) in pattern().iter().enumerate() {
        let a = img.get(
            (x as isize + *ax as isize) as usize,
            (y as isize + *ay as isize) as usize,
        );
        let b = img.get(
            (x as isize + *bx as isize) as usize,
            (y as isize + *by as isize) as usize,
        );
        if a < b {
            d.flip(i);
        }
    }
    Some(d)
}

/// Strongest-gradient keypoints per grid cell, described with the fixed
/// comparison pattern.
pub fn extract_local_features(img: &GrayImage, params: &ExtractParams, image_id: u32) -> FeatureSet {
    let (w, h) = (img.width(), img.height());
    let g = params.grid.max(1);
    if w < g || h < g || w <= 2 * BORDER || h <= 2 * BORDER || params.max_per_cell == 0 {
        return FeatureSet::new(image_id, Vec::new());
    }
    let (gx, gy) = gradients(img);
    let mut picked: Vec<(f32, usize, usize)> = Vec::new();
    for cy in 0..g {
        let (y0, y1) = (cy * h / g, (cy + 1) * h / g);
        for cx in 0..g {
            let (x0, x1) = (cx * w / g, (cx + 1) * w / g);
            let mut cell: Vec<(f32, usize, usize)> = Vec::new();
            for y in y0.max(BORDER)..y1.min(h - BORDER) {
                for x in x0.max(BORDER)..x1.min(w - BORDER) {
                    let i = y * w + x;
                    let m = (gx[i] * gx[i] + gy[i] * gy[i]).sqrt();
                    if m > params.threshold {
                        cell.push((m, x, y));
                    }
                }
            }
            // strongest first, ties broken by raster order
            cell.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.2, a.1).cmp(&(b.2, b.1))));
            picked.extend(cell.into_iter().take(params.max_per_cell));
        }
    }
    if picked.len() > params.max_features {
        picked.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.2, a.1).cmp(&(b.2, b.1))));
        picked.truncate(params.max_features);
    }
    let features = picked
        .into_iter()
        .filter_map(|(_, x, y)| {
            describe(img, x, y).map(|descriptor| LocalFeature {
                x: x as f32,
                y: y as f32,
                descriptor,
            })
        })
        .collect();
    FeatureSet::new(image_id, features)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn textured(w: usize, h: usize, shift: usize) -> GrayImage {
        GrayImage::from_fn(w, h, |x, y| {
            let xs = x as i64 - shift as i64;
            let v = (xs * 7919 + y as i64 * 104729).rem_euclid(251);
            ((v * v) % 256) as f32
        })
    }

    #[test]
    fn constant_image_has_no_features() {
        let img = GrayImage::filled(96, 96, 50.0);
        assert!(extract_local_features(&img, &ExtractParams::default(), 0).is_empty());
    }

    #[test]
    fn at_most_one_per_cell() {
        let img = textured(160, 120, 0);
        let p = ExtractParams {
            grid: 6,
            ..Default::default()
        };
        let fs = extract_local_features(&img, &p, 3);
        assert!(fs.len() <= 36);
        assert!(!fs.is_empty());
        assert_eq!(fs.image_id, 3);
        for f in &fs.features {
            assert!(f.x >= BORDER as f32 && f.x < (160 - BORDER) as f32);
            assert!(f.y >= BORDER as f32 && f.y < (120 - BORDER) as f32);
        }
    }

    #[test]
    fn feature_cap_respected() {
        let img = textured(200, 200, 0);
        let p = ExtractParams {
            grid: 10,
            max_per_cell: 8,
            max_features: 50,
            ..Default::default()
        };
        assert_eq!(extract_local_features(&img, &p, 0).len(), 50);
    }

    #[test]
    fn translation_preserves_descriptors() {
        let a = textured(128, 96, 0);
        let b = textured(128, 96, 5);
        let fs = extract_local_features(&a, &ExtractParams::default(), 0);
        assert!(!fs.is_empty());
        let mut checked = 0;
        for f in &fs.features {
            let (x, y) = (f.x as usize, f.y as usize);
            if let Some(db) = describe(&b, x + 5, y) {
                assert_eq!(f.descriptor.hamming(&db), 0);
                checked += 1;
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn pattern_is_fixed() {
        let p1 = pattern();
        let p2 = pattern();
        assert_eq!(p1, p2);
        assert!(p1.iter().all(|(a, b)| a != b));
    }
}
