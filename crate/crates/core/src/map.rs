//! The two-level topological map: images aggregate into locations, and loop
//! closures are searched only among images of candidate locations.

use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use crate::belief::{BayesFilter, DiffusionKernel, Evolution};
use crate::descriptor::{normalized_location_similarities, update_location_descriptor, GlobalDescriptor, Metric};
use crate::error::{Error, Result};
use crate::features::{geometric_inliers, hamming_match, match_score, FeatureSet, RansacParams, LIKELIHOOD_FLOOR};
use crate::metrics::GroundTruth;

#[derive(Debug, Clone)]
pub struct MapConfig {
    pub t_nn: f64,
    pub t_llc: f64,
    pub t_inliers: usize,
    /// Images this many frames old or younger are never searched (p).
    pub temporal_mask: usize,
    pub margin_m: usize,
    pub t_ci: usize,
    pub ratio: f64,
    pub ransac: RansacParams,
    pub kernel: DiffusionKernel,
    pub evolution: Evolution,
}

impl Default for MapConfig {
    fn default() -> Self {
        Self {
            t_nn: 1.0,
            t_llc: 0.8,
            t_inliers: 16,
            temporal_mask: 20,
            margin_m: 10,
            t_ci: 5,
            ratio: 0.8,
            ransac: RansacParams::default(),
            kernel: DiffusionKernel::default(),
            evolution: Evolution::Fixed,
        }
    }
}

impl MapConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_nn > 0.0 && self.t_nn.is_finite()) {
            return Err(Error::Config(format!("t_nn must be positive, got {}", self.t_nn)));
        }
        if !(0.0..=1.0).contains(&self.t_llc) {
            return Err(Error::Config(format!("t_llc must lie in [0, 1], got {}", self.t_llc)));
        }
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(Error::Config(format!("match ratio must lie in (0, 1), got {}", self.ratio)));
        }
        if self.t_ci < 1 {
            return Err(Error::Config("t_ci must be at least 1".into()));
        }
        if !(self.ransac.threshold_px > 0.0) {
            return Err(Error::Config("RANSAC threshold must be positive".into()));
        }
        Ok(())
    }
}

/// How candidate locations are chosen for each query.
#[derive(Debug, Clone, Default)]
pub enum SearchMode {
    #[default]
    Hierarchical,
    /// Every image older than the temporal mask is searched.
    FlatBruteForce,
    /// Candidates are the locations holding the query's ground-truth matches.
    OracleLocations(Arc<GroundTruth>),
}

#[derive(Debug, Clone)]
pub struct Location {
    pub id: u32,
    pub image_ids: Vec<u32>,
    pub descriptor: GlobalDescriptor,
}

impl Location {
    pub fn len(&self) -> usize {
        self.image_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.image_ids.is_empty()
    }

    pub fn oldest(&self) -> u32 {
        self.image_ids[0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    NewLocation { location: u32 },
    Aggregated { location: u32 },
    LoopClosure { location: u32, image: u32, inliers: usize },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::NewLocation { .. } => "new",
            EventKind::Aggregated { .. } => "aggregated",
            EventKind::LoopClosure { .. } => "loop",
        }
    }

    /// Location the query image was placed in.
    pub fn location(&self) -> u32 {
        match *self {
            EventKind::NewLocation { location }
            | EventKind::Aggregated { location }
            | EventKind::LoopClosure { location, .. } => location,
        }
    }
}

/// Per-stage wall time of one frame, in nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct StageTimes {
    pub candidates: u64,
    pub likelihood: u64,
    pub belief: u64,
    pub verify: u64,
    pub update: u64,
}

impl StageTimes {
    pub const NAMES: [&'static str; 5] = ["candidates", "likelihood", "belief", "verify", "update"];

    pub fn as_array(&self) -> [u64; 5] {
        [self.candidates, self.likelihood, self.belief, self.verify, self.update]
    }

    pub fn total(&self) -> u64 {
        self.as_array().iter().sum()
    }

    /// Time spent looking for a loop closure, excluding map maintenance.
    pub fn search(&self) -> u64 {
        self.candidates + self.likelihood + self.belief + self.verify
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapEvent {
    pub frame: u32,
    #[serde(flatten)]
    pub kind: EventKind,
    pub candidates_proposed: Vec<u32>,
    pub elapsed: StageTimes,
}

impl MapEvent {
    pub fn loop_closure(&self) -> Option<(u32, u32)> {
        match self.kind {
            EventKind::LoopClosure { image, .. } => Some((self.frame, image)),
            _ => None,
        }
    }
}

fn ns(t: Instant) -> u64 {
    t.elapsed().as_nanos() as u64
}

pub struct TopologicalMap {
    config: MapConfig,
    mode: SearchMode,
    metric: Option<(usize, Metric)>,
    locations: Vec<Location>,
    image_location: Vec<u32>,
    features: Vec<FeatureSet>,
    filter: BayesFilter,
    active: Option<usize>,
    active_via_loop: bool,
    events: Vec<MapEvent>,
}

impl TopologicalMap {
    pub fn new(config: MapConfig, mode: SearchMode) -> Result<Self> {
        config.validate()?;
        let filter = BayesFilter::new(config.kernel.clone(), config.evolution);
        Ok(Self {
            config,
            mode,
            metric: None,
            locations: Vec::new(),
            image_location: Vec::new(),
            features: Vec::new(),
            filter,
            active: None,
            active_via_loop: false,
            events: Vec::new(),
        })
    }

    pub fn config(&self) -> &MapConfig {
        &self.config
    }

    pub fn locations(&self) -> &[Location] {
        &self.locations
    }

    pub fn events(&self) -> &[MapEvent] {
        &self.events
    }

    pub fn active(&self) -> Option<u32> {
        self.active.map(|a| a as u32)
    }

    pub fn filter(&self) -> &BayesFilter {
        &self.filter
    }

    pub fn n_frames(&self) -> usize {
        self.features.len()
    }

    pub fn location_of(&self, image: u32) -> Option<u32> {
        self.image_location.get(image as usize).copied()
    }

    fn check(&self, global: &GlobalDescriptor) -> Result<()> {
        if let Some((dim, metric)) = self.metric {
            if global.dim() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: global.dim(),
                });
            }
            if global.metric() != metric {
                return Err(Error::Metric {
                    expected: metric,
                    got: global.metric(),
                });
            }
        }
        Ok(())
    }

    /// Newest image id that is old enough to be searched from `frame`.
    fn search_horizon(&self, frame: usize) -> Option<u32> {
        let p = self.config.temporal_mask;
        (frame > p).then(|| (frame - p - 1) as u32)
    }

    /// Locations whose similarity to the query exceeds `t_llc`.
    ///
    /// Similarities are min-max normalized over all locations, the active one
    /// included. A location is eligible only if it holds an image outside the
    /// temporal mask. The active location is excluded unless it was entered
    /// through a loop closure, in which case it is an older place being
    /// revisited.
    pub fn candidate_locations(&self, global: &GlobalDescriptor) -> Result<Vec<u32>> {
        self.check(global)?;
        let dists = self.location_distances(global)?;
        self.select_candidates(&dists, self.features.len())
    }

    fn location_distances(&self, global: &GlobalDescriptor) -> Result<Vec<f64>> {
        self.locations.iter().map(|l| global.distance(&l.descriptor)).collect()
    }

    fn select_candidates(&self, dists: &[f64], frame: usize) -> Result<Vec<u32>> {
        if dists.is_empty() {
            return Ok(Vec::new());
        }
        let Some(horizon) = self.search_horizon(frame) else {
            return Ok(Vec::new());
        };
        let sims = normalized_location_similarities(dists)?;
        Ok(self
            .locations
            .iter()
            .zip(&sims)
            .filter(|(l, s)| {
                **s > self.config.t_llc
                    && l.oldest() <= horizon
                    && (Some(l.id as usize) != self.active || self.active_via_loop)
            })
            .map(|(l, _)| l.id)
            .collect())
    }

    /// True iff the query is closer than `t_nn` to the location descriptor.
    pub fn should_aggregate(&self, global: &GlobalDescriptor, location: &Location) -> Result<bool> {
        Ok(global.distance(&location.descriptor)? < self.config.t_nn)
    }

    fn searched_images(&self, candidates: &[u32], horizon: u32) -> Vec<u32> {
        let mut out: Vec<u32> = candidates
            .iter()
            .flat_map(|&c| self.locations[c as usize].image_ids.iter().copied())
            .filter(|&i| i <= horizon)
            .collect();
        out.sort_unstable();
        out
    }

    /// Runs one frame of the online cycle and records the event.
    pub fn process_image(&mut self, global: &GlobalDescriptor, features: FeatureSet) -> Result<&MapEvent> {
        self.check(global)?;
        let frame = self.features.len();
        let mut elapsed = StageTimes::default();

        if self.locations.is_empty() {
            let t = Instant::now();
            self.metric = Some((global.dim(), global.metric()));
            self.new_location(global.clone(), frame as u32);
            self.features.push(features);
            elapsed.update = ns(t);
            return Ok(self.push_event(frame, EventKind::NewLocation { location: 0 }, Vec::new(), elapsed));
        }

        // candidates
        let t = Instant::now();
        let horizon = self.search_horizon(frame);
        let mut active_dist = None;
        let candidates = match &self.mode {
            SearchMode::Hierarchical => {
                let dists = self.location_distances(global)?;
                active_dist = self.active.map(|a| dists[a]);
                self.select_candidates(&dists, frame)?
            }
            SearchMode::FlatBruteForce => match horizon {
                Some(h) => {
                    let mut c: Vec<u32> = self.image_location[..=h as usize].to_vec();
                    c.sort_unstable();
                    c.dedup();
                    c
                }
                None => Vec::new(),
            },
            SearchMode::OracleLocations(gt) => match (horizon, gt.positives(frame as u32)) {
                (Some(h), Some(pos)) => {
                    let mut c: Vec<u32> = pos
                        .iter()
                        .filter(|&&r| r <= h)
                        .map(|&r| self.image_location[r as usize])
                        .collect();
                    c.sort_unstable();
                    c.dedup();
                    c
                }
                _ => Vec::new(),
            },
        };
        let searched = match horizon {
            Some(h) => self.searched_images(&candidates, h),
            None => Vec::new(),
        };
        elapsed.candidates = ns(t);

        // likelihood
        let t = Instant::now();
        let likelihoods = if searched.is_empty() {
            None
        } else {
            let mut l = vec![LIKELIHOOD_FLOOR; frame];
            for &img in &searched {
                let s = match_score(&features, &self.features[img as usize], self.config.ratio);
                l[img as usize] = s as f64 + LIKELIHOOD_FLOOR;
            }
            Some(l)
        };
        elapsed.likelihood = ns(t);

        // belief
        let t = Instant::now();
        self.filter.predict();
        self.filter.add_pose();
        if let Some(l) = &likelihoods {
            self.filter.update(l)?;
        }
        elapsed.belief = ns(t);

        // verify
        let t = Instant::now();
        let mut closure = None;
        if !searched.is_empty() {
            let b = self.filter.state().beliefs();
            let mut best = searched[0];
            for &img in &searched[1..] {
                if b[img as usize] > b[best as usize] {
                    best = img;
                }
            }
            let target = &self.features[best as usize];
            let corr = hamming_match(&features, target, self.config.ratio);
            let inliers = geometric_inliers(&features, target, &corr, &self.config.ransac);
            if inliers >= self.config.t_inliers {
                closure = Some((best, inliers));
            }
        }
        elapsed.verify = ns(t);

        // update
        let t = Instant::now();
        let kind = if let Some((image, inliers)) = closure {
            let loc = self.image_location[image as usize] as usize;
            self.aggregate(loc, global, frame as u32)?;
            self.active = Some(loc);
            self.active_via_loop = true;
            EventKind::LoopClosure {
                location: loc as u32,
                image,
                inliers,
            }
        } else {
            let active = self.active.expect("non-empty map has an active location");
            let d = match active_dist {
                Some(d) => d,
                None => global.distance(&self.locations[active].descriptor)?,
            };
            if d < self.config.t_nn {
                self.aggregate(active, global, frame as u32)?;
                EventKind::Aggregated {
                    location: active as u32,
                }
            } else {
                let id = self.new_location(global.clone(), frame as u32);
                EventKind::NewLocation { location: id }
            }
        };
        self.features.push(features);
        elapsed.update = ns(t);
        Ok(self.push_event(frame, kind, candidates, elapsed))
    }

    fn new_location(&mut self, descriptor: GlobalDescriptor, image: u32) -> u32 {
        let id = self.locations.len() as u32;
        self.locations.push(Location {
            id,
            image_ids: vec![image],
            descriptor,
        });
        self.image_location.push(id);
        self.active = Some(id as usize);
        self.active_via_loop = false;
        id
    }

    fn aggregate(&mut self, loc: usize, global: &GlobalDescriptor, image: u32) -> Result<()> {
        let l = &mut self.locations[loc];
        l.descriptor = update_location_descriptor(Some(&l.descriptor), global)?;
        l.image_ids.push(image);
        self.image_location.push(loc as u32);
        Ok(())
    }

    fn push_event(&mut self, frame: usize, kind: EventKind, candidates: Vec<u32>, elapsed: StageTimes) -> &MapEvent {
        self.events.push(MapEvent {
            frame: frame as u32,
            kind,
            candidates_proposed: candidates,
            elapsed,
        });
        self.events.last().unwrap()
    }

    /// Membership lists in location id order.
    pub fn memberships(&self) -> Vec<Vec<u32>> {
        self.locations.iter().map(|l| l.image_ids.clone()).collect()
    }

    pub fn location_sizes(&self) -> Vec<usize> {
        self.locations.iter().map(|l| l.len()).collect()
    }

    pub fn summary(&self) -> MapSummary {
        MapSummary {
            n_frames: self.n_frames(),
            n_locations: self.locations.len(),
            locations: self
                .locations
                .iter()
                .map(|l| LocationSummary {
                    id: l.id,
                    size: l.len(),
                    images: l.image_ids.clone(),
                })
                .collect(),
            events: self.events.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LocationSummary {
    pub id: u32,
    pub size: usize,
    pub images: Vec<u32>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MapSummary {
    pub n_frames: usize,
    pub n_locations: usize,
    pub locations: Vec<LocationSummary>,
    pub events: Vec<MapEvent>,
}

impl MapSummary {
    /// JSON lines: a header, then one line per location, then one per event.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        let header = serde_json::json!({
            "record": "map",
            "n_frames": self.n_frames,
            "n_locations": self.n_locations,
        });
        out.push_str(&header.to_string());
        out.push('\n');
        for l in &self.locations {
            let mut v = serde_json::to_value(l).expect("serializable");
            v["record"] = "location".into();
            out.push_str(&v.to_string());
            out.push('\n');
        }
        for e in &self.events {
            let mut v = serde_json::to_value(e).expect("serializable");
            v["record"] = "event".into();
            out.push_str(&v.to_string());
            out.push('\n');
        }
        out
    }
}

/// Writes the map summary as JSON lines.
pub fn export_map(map: &TopologicalMap, path: &std::path::Path) -> Result<()> {
    crate::io::write_atomic(path, map.summary().to_json_lines().as_bytes())
}
