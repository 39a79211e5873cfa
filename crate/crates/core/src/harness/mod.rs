//! Experiment harness: replay a sequence through the map, score it, sweep
//! parameters, benchmark descriptor extraction and export distance matrices.

pub mod config;
pub mod svg;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::descriptor::DescriptorSet;
use crate::error::{Error, Result};
use crate::features::{extract_local_features, lfea, ExtractParams, FeatureSet};
use crate::gdsc;
use crate::image::{read_pgm, GrayImage};
use crate::io::write_atomic;
use crate::map::{export_map, MapConfig, MapEvent, SearchMode, StageTimes, TopologicalMap};
use crate::metrics::{
    continuity_ratio, count_fplc, distinctiveness_score, score_predictions, timing_report, Evaluation,
    ExperimentReport, GroundTruth,
};
use crate::phog::{compute_phog, PhogParams};
use crate::synthetic::{generate_world, World, WorldSpec};

pub use config::{parse_config_text, read_config_file, Mode, RunConfig};

/// A replayable sequence with its ground truth.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub descriptors: DescriptorSet,
    pub features: Vec<FeatureSet>,
    pub ground_truth: GroundTruth,
    /// Region label per frame, known only for synthetic worlds.
    pub regions: Option<Vec<u32>>,
}

impl Dataset {
    pub fn new(descriptors: DescriptorSet, features: Vec<FeatureSet>, ground_truth: GroundTruth) -> Result<Self> {
        if descriptors.len() != features.len() {
            return Err(Error::Data(format!(
                "{} descriptors but {} feature sets",
                descriptors.len(),
                features.len()
            )));
        }
        if descriptors.is_empty() {
            return Err(Error::Data("empty sequence".into()));
        }
        ground_truth.check_bounds(descriptors.len())?;
        Ok(Self {
            descriptors,
            features,
            ground_truth,
            regions: None,
        })
    }

    pub fn from_world(world: World) -> Self {
        Self {
            descriptors: world.descriptors,
            features: world.features,
            ground_truth: world.ground_truth,
            regions: Some(world.regions),
        }
    }

    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptors.is_empty()
    }

    /// Loads descriptors and features from files, or extracts them from a
    /// directory of PGM images.
    pub fn load(cfg: &RunConfig) -> Result<Self> {
        cfg.validate_inputs()?;
        let gt_path = cfg.gt.as_ref().expect("validated");
        let gt = GroundTruth::read(gt_path, cfg.map.margin_m)?;
        let (descriptors, features) = match (&cfg.descriptors, &cfg.images) {
            (Some(d), _) => {
                let set = gdsc::read_descriptor_set(d)?;
                let features = lfea::read_feature_sets(cfg.features.as_ref().expect("validated"))?;
                (set, features)
            }
            (None, Some(dir)) => extract_directory(dir)?,
            (None, None) => unreachable!("validated"),
        };
        Self::new(descriptors, features, gt)
    }
}

/// PGM files of a directory in lexicographic order.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("pgm")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Config(format!("no .pgm images in {}", dir.display())));
    }
    Ok(paths)
}

/// Native PHOG plus local features for every image of `dir`.
pub fn extract_directory(dir: &Path) -> Result<(DescriptorSet, Vec<FeatureSet>)> {
    let paths = list_images(dir)?;
    let params = PhogParams::default();
    let extract = ExtractParams::default();
    let per_image: Vec<_> = paths
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let img = read_pgm(p)?;
            let d = compute_phog(&img, &params)?;
            Ok((d, extract_local_features(&img, &extract, i as u32)))
        })
        .collect::<Result<_>>()?;
    let mut set = DescriptorSet::new(params.descriptor_len(), crate::Metric::ChiSquared, dir.display().to_string())?;
    let mut features = Vec::with_capacity(per_image.len());
    for (d, f) in per_image {
        set.push(d)?;
        features.push(f);
    }
    Ok((set, features))
}

pub struct RunOutput {
    pub report: ExperimentReport,
    pub evaluation: Evaluation,
    pub map: TopologicalMap,
    /// One CSV row of beliefs per frame, when requested.
    pub beliefs: Option<String>,
}

impl RunOutput {
    pub fn loop_closures(&self) -> Vec<(u32, u32)> {
        self.map.events().iter().filter_map(MapEvent::loop_closure).collect()
    }
}

/// Replays the dataset through a fresh map and scores the result.
pub fn run_dataset(ds: &Dataset, cfg: &MapConfig, mode: Mode, dump_beliefs: bool) -> Result<RunOutput> {
    let search = match mode {
        Mode::Normal => SearchMode::Hierarchical,
        Mode::FlatBruteForce => SearchMode::FlatBruteForce,
        Mode::OracleLocations => SearchMode::OracleLocations(Arc::new(ds.ground_truth.clone())),
    };
    let mut map = TopologicalMap::new(cfg.clone(), search)?;
    let mut beliefs = dump_beliefs.then(|| String::from("frame,beliefs\n"));
    for (i, (d, f)) in ds.descriptors.iter().zip(&ds.features).enumerate() {
        map.process_image(d, f.clone())?;
        if let Some(out) = beliefs.as_mut() {
            let _ = write!(out, "{i}");
            for b in map.filter().state().beliefs() {
                let _ = write!(out, ",{b:e}");
            }
            out.push('\n');
        }
    }
    let n = ds.len();
    let predictions: Vec<(u32, u32)> = map.events().iter().filter_map(MapEvent::loop_closure).collect();
    let evaluation = score_predictions(&predictions, &ds.ground_truth, n)?;
    let fplc = count_fplc(map.events(), &ds.ground_truth, &map.memberships());
    let timing = timing_report(map.events());
    let report = ExperimentReport {
        mode: mode.name().into(),
        t_nn: cfg.t_nn,
        t_llc: cfg.t_llc,
        t_inliers: cfg.t_inliers,
        n_frames: n,
        n_locations: map.locations().len(),
        n_loop_closures: predictions.len(),
        tp: evaluation.tp.len(),
        fp: evaluation.fp.len(),
        precision: evaluation.precision,
        recall: evaluation.recall,
        fplc,
        continuity_ratio: continuity_ratio(&map.location_sizes(), cfg.t_ci)?,
        distinctiveness: distinctiveness_score(fplc),
        total_runtime: timing.total_s(),
        per_stage: timing.stage_s(),
    };
    Ok(RunOutput {
        report,
        evaluation,
        map,
        beliefs,
    })
}

pub fn report_csv(reports: &[&ExperimentReport]) -> String {
    let mut out = String::from(ExperimentReport::HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

pub const EVENTS_HEADER: &str =
    "frame,kind,loc,img,inliers,n_candidates,t_candidates_s,t_likelihood_s,t_belief_s,t_verify_s,t_update_s";

pub fn events_csv(events: &[MapEvent]) -> String {
    use crate::map::EventKind;
    let mut out = String::with_capacity(events.len() * 64);
    out.push_str(EVENTS_HEADER);
    out.push('\n');
    for e in events {
        let (img, inliers) = match e.kind {
            EventKind::LoopClosure { image, inliers, .. } => (image.to_string(), inliers.to_string()),
            _ => (String::new(), String::new()),
        };
        let _ = write!(
            out,
            "{},{},{},{},{},{}",
            e.frame,
            e.kind.name(),
            e.kind.location(),
            img,
            inliers,
            e.candidates_proposed.len()
        );
        for t in e.elapsed.as_array() {
            let _ = write!(out, ",{:.9}", t as f64 * 1e-9);
        }
        out.push('\n');
    }
    out
}

/// Histogram of location sizes, `counts[k]` = locations with `k + 1` images.
pub fn size_histogram(sizes: &[usize]) -> Vec<usize> {
    let max = sizes.iter().copied().max().unwrap_or(0);
    let mut counts = vec![0; max];
    for &s in sizes {
        if s > 0 {
            counts[s - 1] += 1;
        }
    }
    counts
}

/// Writes report, events, map summary, size histogram and optional beliefs.
pub fn write_run_artifacts(dir: &Path, out: &RunOutput) -> Result<()> {
    write_atomic(&dir.join("report.csv"), report_csv(&[&out.report]).as_bytes())?;
    write_atomic(&dir.join("events.csv"), events_csv(out.map.events()).as_bytes())?;
    export_map(&out.map, &dir.join("map.jsonl"))?;
    let hist = size_histogram(&out.map.location_sizes());
    let svg = svg::histogram("Images per location", "images", "locations", &hist, 1);
    write_atomic(&dir.join("location_sizes.svg"), svg.as_bytes())?;
    if let Some(b) = &out.beliefs {
        write_atomic(&dir.join("beliefs.csv"), b.as_bytes())?;
    }
    Ok(())
}

pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    let ds = Dataset::load(cfg)?;
    let out = run_dataset(&ds, &cfg.map_config(cfg.map.t_nn), cfg.mode, cfg.dump_beliefs)?;
    if let Some(dir) = &cfg.out {
        write_run_artifacts(dir, &out)?;
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub t_nn: f64,
    pub result: std::result::Result<ExperimentReport, String>,
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        b = b.num_threads(t);
    }
    b.build().map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// One independent run per `t_nn` value; failures are recorded per point.
pub fn sweep_dataset(ds: &Dataset, cfg: &RunConfig, values: &[f64]) -> Result<Vec<SweepPoint>> {
    if values.len() < 2 {
        return Err(Error::Config("a sweep needs at least two t_nn values".into()));
    }
    let pool = pool(cfg.threads)?;
    Ok(pool.install(|| {
        values
            .par_iter()
            .map(|&t_nn| SweepPoint {
                t_nn,
                result: run_dataset(ds, &cfg.map_config(t_nn), cfg.mode, false)
                    .map(|o| o.report)
                    .map_err(|e| e.to_string()),
            })
            .collect()
    }))
}

pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = format!("{},status\n", ExperimentReport::HEADER);
    let n_cols = ExperimentReport::HEADER.split(',').count();
    for p in points {
        match &p.result {
            Ok(r) => {
                let _ = writeln!(out, "{},ok", r.csv_row());
            }
            Err(e) => {
                let mut cols = vec![String::new(); n_cols];
                cols[1] = p.t_nn.to_string();
                let _ = writeln!(out, "{},\"error: {}\"", cols.join(","), e.replace('"', "'"));
            }
        }
    }
    out
}

pub fn write_sweep_artifacts(dir: &Path, points: &[SweepPoint]) -> Result<()> {
    write_atomic(&dir.join("sweep.csv"), sweep_csv(points).as_bytes())?;
    let ok: Vec<&ExperimentReport> = points.iter().filter_map(|p| p.result.as_ref().ok()).collect();
    let series = |f: &dyn Fn(&ExperimentReport) -> f64| -> Vec<(f64, f64)> {
        ok.iter().map(|r| (r.n_locations as f64, f(r))).collect()
    };
    let plots = [
        ("recall.svg", "Recall at 100% precision", "recall", series(&|r| r.recall.unwrap_or(f64::NAN))),
        ("runtime.svg", "Total runtime", "seconds", series(&|r| r.total_runtime)),
        ("fplc.svg", "False positive location candidates", "FPLC", series(&|r| r.fplc as f64)),
    ];
    for (file, title, y, pts) in plots {
        let s = svg::line_plot(title, "number of locations", y, &[("sweep", pts)]);
        write_atomic(&dir.join(file), s.as_bytes())?;
    }
    Ok(())
}

pub fn sweep(cfg: &RunConfig) -> Result<Vec<SweepPoint>> {
    let ds = Dataset::load(cfg)?;
    let points = sweep_dataset(&ds, cfg, &cfg.sweep_values())?;
    if let Some(dir) = &cfg.out {
        write_sweep_artifacts(dir, &points)?;
    }
    Ok(points)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnobPoint {
    pub knob: f64,
    pub n_locations: usize,
    pub continuity_ratio: f64,
    pub fplc: u64,
    pub recall: Option<f64>,
    pub precision: f64,
}

/// Runs the full pipeline on each world and tabulates the metric response.
pub fn characterize_knobs(worlds: &[(f64, WorldSpec)], cfg: &MapConfig) -> Result<Vec<KnobPoint>> {
    if worlds.len() < 3 {
        return Err(Error::Config("knob characterization needs at least three values".into()));
    }
    worlds
        .par_iter()
        .map(|(knob, spec)| {
            let ds = Dataset::from_world(generate_world(spec)?);
            let r = run_dataset(&ds, cfg, Mode::Normal, false)?.report;
            Ok(KnobPoint {
                knob: *knob,
                n_locations: r.n_locations,
                continuity_ratio: r.continuity_ratio,
                fplc: r.fplc,
                recall: r.recall,
                precision: r.precision,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub enum Extractor {
    Phog(PhogParams),
    /// Descriptors are loaded from a GDSC file; the time reported is loader time.
    FilePassThrough(PathBuf),
}

impl Extractor {
    pub fn from_name(name: &str, file: Option<&Path>) -> Result<Self> {
        match name {
            "phog" => Ok(Extractor::Phog(PhogParams::default())),
            "file" => match file {
                Some(p) if p.exists() => Ok(Extractor::FilePassThrough(p.to_path_buf())),
                Some(p) => Err(Error::Config(format!("{} does not exist", p.display()))),
                None => Err(Error::Config("the file extractor needs a descriptor file".into())),
            },
            other => Err(Error::Config(format!(
                "extractor {other:?} is not available (expected phog or file)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Extractor::Phog(_) => "phog",
            Extractor::FilePassThrough(_) => "file",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub extractor: String,
    pub batch: usize,
    pub mean_per_image_s: f64,
    pub cv: f64,
    pub runs: usize,
}

pub const BENCH_WARMUP: usize = 3;
pub const BENCH_RUNS: usize = 10;

fn mean_cv(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, if mean > 0.0 { var.sqrt() / mean } else { 0.0 })
}

/// Textured 1280x480 test image.
pub fn default_bench_image(seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<(f32, f32, f32)> = (0..6)
        .map(|_| (rng.gen_range(0.005..0.08), rng.gen_range(0.005..0.08), rng.gen_range(0.0..std::f32::consts::TAU)))
        .collect();
    GrayImage::from_fn(1280, 480, |x, y| {
        let v: f32 = waves
            .iter()
            .map(|(a, b, p)| (a * x as f32 + b * y as f32 + p).sin())
            .sum::<f32>();
        (128.0 + 20.0 * v + rng.gen_range(-8.0..8.0)).clamp(0.0, 255.0)
    })
}

/// Per-image extraction time at each batch size: 3 warm-ups, then 10 timed runs.
pub fn bench_descriptors(extractor: &Extractor, images: &[GrayImage], batch_sizes: &[usize]) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    match extractor {
        Extractor::Phog(params) => {
            if images.is_empty() {
                return Err(Error::Config("no images to benchmark".into()));
            }
            for &b in batch_sizes {
                if b == 0 {
                    return Err(Error::Config("batch sizes must be positive".into()));
                }
                let batch: Vec<&GrayImage> = images.iter().cycle().take(b).collect();
                let once = || -> Result<f64> {
                    let t = Instant::now();
                    if b == 1 {
                        compute_phog(batch[0], params)?;
                    } else {
                        batch.par_iter().map(|img| compute_phog(img, params).map(|_| ())).collect::<Result<()>>()?;
                    }
                    Ok(t.elapsed().as_secs_f64() / b as f64)
                };
                for _ in 0..BENCH_WARMUP {
                    once()?;
                }
                let samples = (0..BENCH_RUNS).map(|_| once()).collect::<Result<Vec<_>>>()?;
                let (mean, cv) = mean_cv(&samples);
                rows.push(BenchRow {
                    extractor: extractor.name().into(),
                    batch: b,
                    mean_per_image_s: mean,
                    cv,
                    runs: BENCH_RUNS,
                });
            }
        }
        Extractor::FilePassThrough(path) => {
            let once = || -> Result<(f64, usize)> {
                let t = Instant::now();
                let set = gdsc::read_descriptor_set(path)?;
                Ok((t.elapsed().as_secs_f64() / set.len().max(1) as f64, set.len()))
            };
            for _ in 0..BENCH_WARMUP {
                once()?;
            }
            let samples = (0..BENCH_RUNS).map(|_| once()).collect::<Result<Vec<_>>>()?;
            let times: Vec<f64> = samples.iter().map(|s| s.0).collect();
            let (mean, cv) = mean_cv(&times);
            rows.push(BenchRow {
                extractor: extractor.name().into(),
                batch: samples[0].1,
                mean_per_image_s: mean,
                cv,
                runs: BENCH_RUNS,
            });
        }
    }
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("extractor,batch,mean_per_image_s,cv,runs\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{:.9},{:.4},{}", r.extractor, r.batch, r.mean_per_image_s, r.cv, r.runs);
    }
    out
}

/// Matrices for more descriptors than this need an explicit override.
pub const DISTMAT_LIMIT: usize = 5000;
/// Largest heatmap side in cells.
pub const HEATMAP_CELLS: usize = 256;

/// Row-major N x N distances; the lower triangle mirrors the upper exactly.
pub fn distance_matrix(set: &DescriptorSet) -> Result<Vec<f32>> {
    let n = set.len();
    let d = set.descriptors();
    let rows: Vec<Vec<f32>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i + 1..n)
                .map(|j| d[i].distance(&d[j]).map(|v| v as f32))
                .collect::<Result<Vec<f32>>>()
        })
        .collect::<Result<_>>()?;
    let mut m = vec![0f32; n * n];
    for (i, row) in rows.iter().enumerate() {
        for (k, &v) in row.iter().enumerate() {
            let j = i + 1 + k;
            m[i * n + j] = v;
            m[j * n + i] = v;
        }
    }
    Ok(m)
}

/// Block-average to at most `max_side` cells per side.
pub fn downsample(m: &[f32], n: usize, max_side: usize) -> (Vec<f32>, usize) {
    if n <= max_side {
        return (m.to_vec(), n);
    }
    let side = max_side;
    let mut sum = vec![0f64; side * side];
    let mut cnt = vec![0u32; side * side];
    for i in 0..n {
        let bi = i * side / n;
        for j in 0..n {
            let k = bi * side + j * side / n;
            sum[k] += m[i * n + j] as f64;
            cnt[k] += 1;
        }
    }
    let cells = sum.iter().zip(&cnt).map(|(s, c)| (*s / (*c).max(1) as f64) as f32).collect();
    (cells, side)
}

/// Writes the matrix as little-endian f32 to `path` and a heatmap beside it.
/// Returns the heatmap path.
pub fn export_distance_matrix(set: &DescriptorSet, path: &Path, force: bool) -> Result<PathBuf> {
    let n = set.len();
    if n > DISTMAT_LIMIT && !force {
        let mib = (n as f64 * n as f64 * 4.0) / (1024.0 * 1024.0);
        return Err(Error::Config(format!(
            "{n} descriptors would produce a {n}x{n} matrix of {mib:.0} MiB; refusing above {DISTMAT_LIMIT} without force"
        )));
    }
    let m = distance_matrix(set)?;
    let mut bytes = Vec::with_capacity(m.len() * 4);
    for v in &m {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    write_atomic(path, &bytes)?;
    let (cells, side) = downsample(&m, n, HEATMAP_CELLS);
    let svg_path = path.with_extension("svg");
    let title = format!("Distance matrix ({n} images)");
    write_atomic(&svg_path, svg::heatmap(&title, &cells, side).as_bytes())?;
    Ok(svg_path)
}

/// Peak resident set size of this process, from `/proc/self/status`.
pub fn peak_memory_bytes() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

/// Mean search time (ns) per frame over the last `fraction` of frames.
pub fn tail_search_time(events: &[MapEvent], fraction: f64) -> f64 {
    let start = ((1.0 - fraction) * events.len() as f64) as usize;
    let tail = &events[start.min(events.len())..];
    if tail.is_empty() {
        return 0.0;
    }
    tail.iter().map(|e| e.elapsed.search() as f64).sum::<f64>() / tail.len() as f64
}

/// Total of every stage over the events, in seconds, as read back from an events CSV.
pub fn resum_events_csv(text: &str) -> Result<f64> {
    let mut total = 0.0;
    for (i, line) in text.lines().enumerate().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 6 + StageTimes::NAMES.len() {
            return Err(Error::Data(format!("events line {}: wrong column count", i + 1)));
        }
        for c in &cols[6..] {
            total += c
                .parse::<f64>()
                .map_err(|_| Error::Data(format!("events line {}: bad time {c:?}", i + 1)))?;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptor::{GlobalDescriptor, Metric};

    #[test]
    fn downsample_averages_blocks() {
        let m: Vec<f32> = (0..16).map(|v| v as f32).collect();
        let (c, side) = downsample(&m, 4, 2);
        assert_eq!(side, 2);
        assert_eq!(c, vec![2.5, 4.5, 10.5, 12.5]);
        let (c, side) = downsample(&m, 4, 8);
        assert_eq!((c.len(), side), (16, 4));
    }

    #[test]
    fn distance_matrix_examples() {
        let mut set = DescriptorSet::new(2, Metric::Euclidean, "t").unwrap();
        for _ in 0..3 {
            set.push(GlobalDescriptor::new(vec![1.0, 2.0], Metric::Euclidean).unwrap()).unwrap();
        }
        assert!(distance_matrix(&set).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn size_histogram_counts() {
        assert_eq!(size_histogram(&[1, 3, 3, 2]), vec![1, 1, 2]);
        assert!(size_histogram(&[]).is_empty());
    }

    #[test]
    fn extractor_selection() {
        assert!(matches!(Extractor::from_name("phog", None), Ok(Extractor::Phog(_))));
        assert!(Extractor::from_name("netvlad", None).unwrap_err().is_config());
        assert!(Extractor::from_name("file", None).unwrap_err().is_config());
    }

    #[test]
    fn peak_memory_is_readable() {
        assert!(peak_memory_bytes().unwrap() > 0);
    }
}
