//! Deterministic synthetic sequences with controllable continuity and
//! distinctiveness.
//!
//! Each region is a ball around a center. The first visit to a region walks
//! inside the ball; later visits replay that walk with descriptor noise and
//! perturbed local features, which makes them ground-truth revisits.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::descriptor::{DescriptorSet, GlobalDescriptor, Metric};
use crate::error::{Error, Result};
use crate::features::{lfea, BinaryDescriptor, FeatureSet, LocalFeature};
use crate::metrics::GroundTruth;

pub const IMAGE_WIDTH: f32 = 640.0;
pub const IMAGE_HEIGHT: f32 = 480.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub center: Vec<f64>,
    /// Radius of the ball the walk stays inside.
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldSpec {
    pub n_frames: usize,
    pub dim: usize,
    pub regions: Vec<Region>,
    /// Visits as (region index, frame count).
    pub route: Vec<(usize, usize)>,
    /// Expected Euclidean length of one walk step.
    pub step_sigma: f64,
    /// Log-normal spread of the step length; 0 keeps every step near `step_sigma`.
    pub step_log_sigma: f64,
    /// Probability that a frame teleports to a random point of its region.
    pub jump_prob: f64,
    /// Expected Euclidean norm of the noise added to replayed descriptors.
    pub noise_sigma: f64,
    pub features_per_frame: usize,
    pub margin_m: usize,
    pub seed: u64,
}

impl WorldSpec {
    /// Regions with random centers scaled so that the closest pair is
    /// `separation` apart.
    pub fn with_separation(dim: usize, n_regions: usize, separation: f64, spread: f64, seed: u64) -> Vec<Region> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_CE47);
        let mut centers: Vec<Vec<f64>> = (0..n_regions)
            .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        if n_regions > 1 {
            let mut min = f64::INFINITY;
            for i in 0..n_regions {
                for j in 0..i {
                    min = min.min(dist(&centers[i], &centers[j]));
                }
            }
            let s = separation / min;
            centers.iter_mut().for_each(|c| c.iter_mut().for_each(|v| *v *= s));
        } else {
            centers[0].iter_mut().for_each(|v| *v = 0.0);
        }
        centers.into_iter().map(|center| Region { center, spread }).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.regions.is_empty() || self.route.is_empty() {
            return Err(Error::domain("world needs a positive dim, regions and a route"));
        }
        let total: usize = self.route.iter().map(|r| r.1).sum();
        if total != self.n_frames {
            return Err(Error::domain(format!(
                "route covers {total} frames, expected {}",
                self.n_frames
            )));
        }
        for r in &self.regions {
            if r.center.len() != self.dim {
                return Err(Error::domain("region center has the wrong dimension"));
            }
            if !(r.spread > 0.0) {
                return Err(Error::domain("region spread must be positive"));
            }
        }
        if !(self.step_sigma > 0.0 && self.noise_sigma >= 0.0 && self.step_log_sigma >= 0.0) {
            return Err(Error::domain(
                "step_sigma must be positive, noise_sigma and step_log_sigma non-negative",
            ));
        }
        if !(0.0..=1.0).contains(&self.jump_prob) {
            return Err(Error::domain("jump_prob must lie in [0, 1]"));
        }
        let mut first: BTreeMap<usize, usize> = BTreeMap::new();
        for &(r, n) in &self.route {
            if r >= self.regions.len() {
                return Err(Error::domain(format!("route references missing region {r}")));
            }
            if n == 0 {
                return Err(Error::domain("route visits must be non-empty"));
            }
            match first.get(&r) {
                Some(&len) if n > len => {
                    return Err(Error::domain(format!(
                        "revisit of region {r} has {n} frames but its first visit only {len}"
                    )))
                }
                Some(_) => {}
                None => {
                    first.insert(r, n);
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct World {
    pub descriptors: DescriptorSet,
    pub features: Vec<FeatureSet>,
    pub ground_truth: GroundTruth,
    /// Region of every frame.
    pub regions: Vec<u32>,
    /// First-visit frame that a revisit frame replays.
    pub sources: Vec<Option<u32>>,
}

impl World {
    /// Copy with every descriptor shifted to be non-negative, tagged ChiSquared.
    pub fn to_chi_squared(&self) -> Result<World> {
        let min = self
            .descriptors
            .iter()
            .flat_map(|d| d.values().iter().copied())
            .fold(f32::INFINITY, f32::min)
            .min(0.0);
        let mut set = DescriptorSet::new(self.descriptors.dim(), Metric::ChiSquared, "synthetic-chi2")?;
        for d in &self.descriptors {
            let v = d.values().iter().map(|x| x - min).collect();
            set.push(GlobalDescriptor::new(v, Metric::ChiSquared)?)?;
        }
        Ok(World {
            descriptors: set,
            ..self.clone()
        })
    }

    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptors.is_empty()
    }

    /// Writes `descriptors.gdsc`, `features.lfea`, `gt.txt` and `regions.txt`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        crate::gdsc::write_descriptor_set(&self.descriptors, &dir.join("descriptors.gdsc"))?;
        lfea::write_feature_sets(&self.features, &dir.join("features.lfea"))?;
        self.ground_truth.write(&dir.join("gt.txt"))?;
        let mut regions = String::from("# frame region\n");
        for (f, r) in self.regions.iter().enumerate() {
            regions.push_str(&format!("{f} {r}\n"));
        }
        crate::io::write_atomic(&dir.join("regions.txt"), regions.as_bytes())
    }
}

/// Visits regions `0, 1, .., n_regions - 1` in turn for `visit_len` frames
/// each, lap after lap, until `n_frames` are covered. Every lap after the
/// first replays the first one.
pub fn tour_route(n_frames: usize, n_regions: usize, visit_len: usize) -> Vec<(usize, usize)> {
    let mut route = Vec::new();
    let mut left = n_frames;
    let mut k = 0;
    while left > 0 && visit_len > 0 && n_regions > 0 {
        let len = visit_len.min(left);
        route.push((k % n_regions, len));
        left -= len;
        k += 1;
    }
    route
}

/// Knobs for a lap-based tour world, the layout used by the harness presets.
#[derive(Debug, Clone, PartialEq)]
pub struct TourParams {
    pub n_frames: usize,
    pub dim: usize,
    pub n_regions: usize,
    pub visit_len: usize,
    /// Distance between the closest pair of region centers.
    pub separation: f64,
    pub spread: f64,
    pub step_sigma: f64,
    pub step_log_sigma: f64,
    pub jump_prob: f64,
    pub noise_sigma: f64,
    pub features_per_frame: usize,
    pub margin_m: usize,
    pub seed: u64,
}

impl Default for TourParams {
    fn default() -> Self {
        Self {
            n_frames: 2000,
            dim: 16,
            n_regions: 20,
            visit_len: 10,
            separation: 5.0,
            spread: 0.5,
            step_sigma: 0.05,
            step_log_sigma: 1.0,
            jump_prob: 0.0,
            noise_sigma: 0.0125,
            features_per_frame: 16,
            margin_m: 10,
            seed: 0,
        }
    }
}

impl TourParams {
    pub fn spec(&self) -> WorldSpec {
        WorldSpec {
            n_frames: self.n_frames,
            dim: self.dim,
            regions: WorldSpec::with_separation(self.dim, self.n_regions, self.separation, self.spread, self.seed),
            route: tour_route(self.n_frames, self.n_regions, self.visit_len),
            step_sigma: self.step_sigma,
            step_log_sigma: self.step_log_sigma,
            jump_prob: self.jump_prob,
            noise_sigma: self.noise_sigma,
            features_per_frame: self.features_per_frame,
            margin_m: self.margin_m,
            seed: self.seed,
        }
    }

    pub fn generate(&self) -> Result<World> {
        generate_world(&self.spec())
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize, sigma: f64) -> Vec<f64> {
    let s = sigma / (dim as f64).sqrt();
    (0..dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            z * s
        })
        .collect()
}

/// Uniform point in the ball.
fn point_in_ball(rng: &mut ChaCha8Rng, region: &Region) -> Vec<f64> {
    let dim = region.center.len();
    let dir = gaussian(rng, dim, 1.0);
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
    let r = region.spread * rng.gen::<f64>().powf(1.0 / dim as f64);
    region.center.iter().zip(&dir).map(|(c, d)| c + d / norm * r).collect()
}

/// Radial reflection at the ball boundary.
fn reflect_into(pos: &mut [f64], region: &Region) {
    let r = dist(pos, &region.center);
    if r <= region.spread {
        return;
    }
    let mut target = 2.0 * region.spread - r;
    if target < 0.0 {
        target = target.rem_euclid(region.spread);
    }
    let s = target / r;
    for (p, c) in pos.iter_mut().zip(&region.center) {
        *p = c + (*p - c) * s;
    }
}

fn random_features(rng: &mut ChaCha8Rng, image_id: u32, n: usize) -> FeatureSet {
    let features = (0..n)
        .map(|_| LocalFeature {
            x: rng.gen_range(0.0..IMAGE_WIDTH),
            y: rng.gen_range(0.0..IMAGE_HEIGHT),
            descriptor: BinaryDescriptor(rng.gen()),
        })
        .collect();
    FeatureSet::new(image_id, features)
}

fn perturb_features(rng: &mut ChaCha8Rng, source: &FeatureSet, image_id: u32) -> FeatureSet {
    let features = source
        .features
        .iter()
        .map(|f| {
            let mut d = f.descriptor;
            for _ in 0..rng.gen_range(0..=2) {
                d.flip(rng.gen_range(0..256));
            }
            LocalFeature {
                x: (f.x + rng.gen_range(-1.0..=1.0f32)).clamp(0.0, IMAGE_WIDTH - 1e-3),
                y: (f.y + rng.gen_range(-1.0..=1.0f32)).clamp(0.0, IMAGE_HEIGHT - 1e-3),
                descriptor: d,
            }
        })
        .collect();
    FeatureSet::new(image_id, features)
}

pub fn generate_world(spec: &WorldSpec) -> Result<World> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut positions: Vec<Vec<f64>> = Vec::with_capacity(spec.n_frames);
    let mut features = Vec::with_capacity(spec.n_frames);
    let mut regions = Vec::with_capacity(spec.n_frames);
    let mut sources = Vec::with_capacity(spec.n_frames);
    let mut first_visit: BTreeMap<usize, Vec<u32>> = BTreeMap::new();
    // source frame -> every frame showing it so far
    let mut copies: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    let mut gt = GroundTruth::new(spec.margin_m);

    for &(r, n) in &spec.route {
        let region = &spec.regions[r];
        match first_visit.get(&r).cloned() {
            None => {
                let mut pos = region.center.clone();
                let mut visit = Vec::with_capacity(n);
                for _ in 0..n {
                    let frame = positions.len() as u32;
                    if rng.gen::<f64>() < spec.jump_prob {
                        pos = point_in_ball(&mut rng, region);
                    } else if !visit.is_empty() {
                        let scale = if spec.step_log_sigma > 0.0 {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            (spec.step_log_sigma * z - 0.5 * spec.step_log_sigma * spec.step_log_sigma).exp()
                        } else {
                            1.0
                        };
                        let step = gaussian(&mut rng, spec.dim, spec.step_sigma * scale);
                        pos.iter_mut().zip(&step).for_each(|(p, s)| *p += s);
                        reflect_into(&mut pos, region);
                    }
                    positions.push(pos.clone());
                    features.push(random_features(&mut rng, frame, spec.features_per_frame));
                    regions.push(r as u32);
                    sources.push(None);
                    copies.insert(frame, vec![frame]);
                    visit.push(frame);
                }
                first_visit.insert(r, visit);
            }
            Some(visit) => {
                for &src in &visit[..n] {
                    let frame = positions.len() as u32;
                    let noise = gaussian(&mut rng, spec.dim, spec.noise_sigma);
                    let pos: Vec<f64> = positions[src as usize].iter().zip(&noise).map(|(p, e)| p + e).collect();
                    positions.push(if spec.noise_sigma == 0.0 {
                        positions[src as usize].clone()
                    } else {
                        pos
                    });
                    let f = perturb_features(&mut rng, &features[src as usize], frame);
                    features.push(f);
                    regions.push(r as u32);
                    sources.push(Some(src));
                    let seen = copies.get_mut(&src).expect("source registered");
                    for &earlier in seen.iter() {
                        gt.insert(frame, earlier);
                    }
                    seen.push(frame);
                }
            }
        }
    }

    let mut set = DescriptorSet::new(spec.dim, Metric::Euclidean, "synthetic")?;
    for p in positions {
        set.push(GlobalDescriptor::new(p.into_iter().map(|v| v as f32).collect(), Metric::Euclidean)?)?;
    }
    Ok(World {
        descriptors: set,
        features,
        ground_truth: gt,
        regions,
        sources,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(route: Vec<(usize, usize)>, separation: f64, seed: u64) -> WorldSpec {
        let n_frames = route.iter().map(|r| r.1).sum();
        WorldSpec {
            n_frames,
            dim: 16,
            regions: WorldSpec::with_separation(16, 2, separation, 0.5, seed),
            route,
            step_sigma: 0.05,
            step_log_sigma: 0.0,
            jump_prob: 0.0,
            noise_sigma: 0.01,
            features_per_frame: 20,
            margin_m: 10,
            seed,
        }
    }

    #[test]
    fn tour_covers_all_frames() {
        assert_eq!(tour_route(25, 2, 10), vec![(0, 10), (1, 10), (0, 5)]);
        assert_eq!(tour_route(7, 3, 10), vec![(0, 7)]);
    }

    #[test]
    fn no_revisit_means_empty_ground_truth() {
        let w = generate_world(&spec(vec![(0, 50), (1, 50)], 10.0, 1)).unwrap();
        assert!(w.ground_truth.is_empty());
        assert_eq!(w.len(), 100);
    }

    #[test]
    fn zero_noise_revisit_is_bit_equal() {
        let mut s = spec(vec![(0, 30), (1, 10), (0, 30)], 10.0, 2);
        s.noise_sigma = 0.0;
        let w = generate_world(&s).unwrap();
        for k in 0..30 {
            assert_eq!(w.descriptors.get(40 + k).unwrap(), w.descriptors.get(k).unwrap());
            assert_eq!(w.sources[40 + k], Some(k as u32));
            let pos = w.ground_truth.positives(40 + k as u32).unwrap();
            assert_eq!(pos.iter().copied().collect::<Vec<_>>(), vec![k as u32]);
        }
    }

    #[test]
    fn repeated_revisits_link_to_every_earlier_copy() {
        let w = generate_world(&spec(vec![(0, 30), (1, 10), (0, 30), (1, 10), (0, 30)], 10.0, 3)).unwrap();
        let pos: Vec<u32> = w.ground_truth.positives(80 + 5).unwrap().iter().copied().collect();
        assert_eq!(pos, vec![5, 45]);
    }

    #[test]
    fn revisit_features_stay_close() {
        let w = generate_world(&spec(vec![(0, 30), (0, 30)], 10.0, 4)).unwrap();
        for k in 0..30 {
            for (a, b) in w.features[k].features.iter().zip(&w.features[30 + k].features) {
                assert!(a.descriptor.hamming(&b.descriptor) <= 2);
                assert!((a.x - b.x).abs() <= 1.0 && (a.y - b.y).abs() <= 1.0);
            }
        }
    }

    #[test]
    fn separation_dominates_consecutive_steps() {
        for seed in 0..10 {
            let mut s = spec(vec![(0, 100), (1, 100)], 10.0, seed);
            s.jump_prob = 0.2;
            let w = generate_world(&s).unwrap();
            let d = |i: usize, j: usize| {
                w.descriptors.get(i).unwrap().distance(w.descriptors.get(j).unwrap()).unwrap()
            };
            let mut max_step: f64 = 0.0;
            for i in 1..200 {
                if w.regions[i] == w.regions[i - 1] {
                    max_step = max_step.max(d(i, i - 1));
                }
            }
            let mut min_inter = f64::INFINITY;
            for i in 0..100 {
                for j in 100..200 {
                    min_inter = min_inter.min(d(i, j));
                }
            }
            assert!(min_inter > 5.0 * max_step, "seed {seed}: {min_inter} vs {max_step}");
        }
    }

    #[test]
    fn deterministic_and_valid() {
        let s = spec(vec![(0, 40), (1, 20), (0, 20)], 10.0, 9);
        let a = generate_world(&s).unwrap();
        let b = generate_world(&s).unwrap();
        assert_eq!(a.descriptors, b.descriptors);
        assert_eq!(a.features, b.features);
        assert_eq!(a.ground_truth, b.ground_truth);
        let mut bad = s.clone();
        bad.n_frames += 1;
        assert!(generate_world(&bad).is_err());
        let mut bad = s.clone();
        bad.route = vec![(0, 10), (1, 30), (0, 40)];
        assert!(generate_world(&bad).is_err());
        let mut bad = s;
        bad.jump_prob = 1.5;
        assert!(generate_world(&bad).is_err());
    }

    #[test]
    fn chi_squared_variant_is_non_negative() {
        let w = generate_world(&spec(vec![(0, 20), (1, 20)], 10.0, 5)).unwrap();
        let c = w.to_chi_squared().unwrap();
        assert_eq!(c.descriptors.metric(), Metric::ChiSquared);
        assert!(c.descriptors.iter().all(|d| d.values().iter().all(|v| *v >= 0.0)));
    }
}
