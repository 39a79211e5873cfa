//! Ground truth, precision/recall under the margin criterion, false-positive
//! location candidates and the continuity and distinctiveness measures.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::map::{MapEvent, StageTimes};

/// Query frame to the set of frames it truly revisits.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GroundTruth {
    positives: BTreeMap<u32, BTreeSet<u32>>,
    pub margin_m: usize,
}

impl GroundTruth {
    pub fn new(margin_m: usize) -> Self {
        Self {
            positives: BTreeMap::new(),
            margin_m,
        }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (u32, u32)>, margin_m: usize) -> Self {
        let mut gt = Self::new(margin_m);
        for (q, r) in pairs {
            gt.insert(q, r);
        }
        gt
    }

    pub fn insert(&mut self, query: u32, reference: u32) {
        self.positives.entry(query).or_default().insert(reference);
    }

    pub fn positives(&self, query: u32) -> Option<&BTreeSet<u32>> {
        self.positives.get(&query)
    }

    pub fn queries(&self) -> impl Iterator<Item = u32> + '_ {
        self.positives.keys().copied()
    }

    pub fn n_queries(&self) -> usize {
        self.positives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positives.is_empty()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.positives.iter().flat_map(|(q, rs)| rs.iter().map(move |r| (*q, *r)))
    }

    /// Largest frame index mentioned, if any.
    pub fn max_frame(&self) -> Option<u32> {
        self.pairs().map(|(q, r)| q.max(r)).max()
    }

    pub fn check_bounds(&self, n_frames: usize) -> Result<()> {
        match self.max_frame() {
            Some(f) if f as usize >= n_frames => Err(Error::Data(format!(
                "ground truth references frame {f} but the sequence has {n_frames} frames"
            ))),
            _ => Ok(()),
        }
    }

    /// Parses `q r` lines; `#` starts a comment.
    pub fn parse(text: &str, margin_m: usize) -> Result<Self> {
        let mut gt = Self::new(margin_m);
        let mut offset = 0u64;
        for (lineno, raw) in text.split_inclusive('\n').enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if !line.is_empty() {
                let mut it = line.split_whitespace();
                let parse = |tok: Option<&str>| tok.and_then(|t| t.parse::<u32>().ok());
                match (parse(it.next()), parse(it.next()), it.next()) {
                    (Some(q), Some(r), None) => gt.insert(q, r),
                    _ => {
                        return Err(Error::format(
                            offset,
                            format!("line {}: expected two frame indices, got {line:?}", lineno + 1),
                        ))
                    }
                }
            }
            offset += raw.len() as u64;
        }
        Ok(gt)
    }

    pub fn read(path: &Path, margin_m: usize) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, margin_m).map_err(|e| e.with_path(path))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# query reference\n");
        for (q, r) in self.pairs() {
            let _ = writeln!(out, "{q} {r}");
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, self.to_text().as_bytes())
    }

    /// True iff `r` lies within the margin of a positive of `q`.
    pub fn is_match(&self, q: u32, r: u32) -> bool {
        let m = self.margin_m as i64;
        self.positives(q).is_some_and(|pos| {
            pos.range((r as i64 - m).max(0) as u32..=(r as i64 + m).min(u32::MAX as i64) as u32)
                .next()
                .is_some()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Evaluation {
    pub precision: f64,
    /// None when the ground truth has no positive query.
    pub recall: Option<f64>,
    pub tp: Vec<(u32, u32)>,
    pub fp: Vec<(u32, u32)>,
}

/// Scores predicted `(query, match)` pairs. Precision is 1 when nothing is
/// predicted.
pub fn score_predictions(predictions: &[(u32, u32)], gt: &GroundTruth, n_frames: usize) -> Result<Evaluation> {
    let mut eval = Evaluation::default();
    for &(q, r) in predictions {
        if q as usize >= n_frames || r as usize >= n_frames {
            return Err(Error::Data(format!(
                "prediction ({q}, {r}) outside a sequence of {n_frames} frames"
            )));
        }
        if gt.is_match(q, r) {
            eval.tp.push((q, r));
        } else {
            eval.fp.push((q, r));
        }
    }
    let n_pred = eval.tp.len() + eval.fp.len();
    eval.precision = if n_pred == 0 {
        1.0
    } else {
        eval.tp.len() as f64 / n_pred as f64
    };
    if !gt.is_empty() {
        let hit: BTreeSet<u32> = eval.tp.iter().map(|(q, _)| *q).collect();
        eval.recall = Some(hit.len() as f64 / gt.n_queries() as f64);
    }
    Ok(eval)
}

/// As [`score_predictions`], but an empty ground truth is an error since
/// recall is undefined.
pub fn evaluate_predictions(predictions: &[(u32, u32)], gt: &GroundTruth, n_frames: usize) -> Result<Evaluation> {
    if gt.is_empty() {
        return Err(Error::Data("ground truth has no positive queries; recall is undefined".into()));
    }
    score_predictions(predictions, gt, n_frames)
}

/// Candidate locations, summed over frames, that hold no image within the
/// margin of a true match. Every candidate of a query without ground truth
/// counts. `memberships[l]` must be sorted.
pub fn count_fplc(events: &[MapEvent], gt: &GroundTruth, memberships: &[Vec<u32>]) -> u64 {
    let m = gt.margin_m as i64;
    let mut total = 0u64;
    for e in events {
        let positives = gt.positives(e.frame);
        for &c in &e.candidates_proposed {
            let hit = match (positives, memberships.get(c as usize)) {
                (Some(pos), Some(images)) => pos.iter().any(|&r| {
                    let lo = (r as i64 - m).max(0) as u32;
                    let i = images.partition_point(|&x| x < lo);
                    i < images.len() && (images[i] as i64) <= r as i64 + m
                }),
                _ => false,
            };
            if !hit {
                total += 1;
            }
        }
    }
    total
}

/// Fraction of locations with fewer than `t_ci` images.
pub fn continuity_ratio(location_sizes: &[usize], t_ci: usize) -> Result<f64> {
    if location_sizes.is_empty() {
        return Err(Error::domain("continuity ratio of an empty map"));
    }
    if t_ci < 1 {
        return Err(Error::domain("t_ci must be at least 1"));
    }
    let small = location_sizes.iter().filter(|&&s| s < t_ci).count();
    Ok(small as f64 / location_sizes.len() as f64)
}

pub fn distinctiveness_score(fplc: u64) -> f64 {
    1.0 / (1.0 + fplc as f64)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct TimingReport {
    pub n_frames: usize,
    /// Totals per stage in nanoseconds, ordered as [`StageTimes::NAMES`].
    pub stage_totals_ns: [u64; 5],
    pub total_ns: u64,
    pub mean_frame_s: f64,
    pub max_frame_s: f64,
}

impl TimingReport {
    pub fn total_s(&self) -> f64 {
        self.total_ns as f64 * 1e-9
    }

    pub fn stage_s(&self) -> [f64; 5] {
        self.stage_totals_ns.map(|v| v as f64 * 1e-9)
    }
}

pub fn timing_report(events: &[MapEvent]) -> TimingReport {
    timing_of(events.iter().map(|e| e.elapsed))
}

pub fn timing_of(stages: impl IntoIterator<Item = StageTimes>) -> TimingReport {
    let mut r = TimingReport::default();
    let mut max = 0u64;
    for s in stages {
        for (acc, v) in r.stage_totals_ns.iter_mut().zip(s.as_array()) {
            *acc += v;
        }
        max = max.max(s.total());
        r.n_frames += 1;
    }
    r.total_ns = r.stage_totals_ns.iter().sum();
    if r.n_frames > 0 {
        r.mean_frame_s = r.total_ns as f64 * 1e-9 / r.n_frames as f64;
        r.max_frame_s = max as f64 * 1e-9;
    }
    r
}

/// One row of the run report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub mode: String,
    pub t_nn: f64,
    pub t_llc: f64,
    pub t_inliers: usize,
    pub n_frames: usize,
    pub n_locations: usize,
    pub n_loop_closures: usize,
    pub tp: usize,
    pub fp: usize,
    pub precision: f64,
    pub recall: Option<f64>,
    pub fplc: u64,
    pub continuity_ratio: f64,
    pub distinctiveness: f64,
    pub total_runtime: f64,
    pub per_stage: [f64; 5],
}

impl ExperimentReport {
    pub const HEADER: &'static str = "mode,t_nn,t_llc,t_inliers,n_frames,n_locations,n_loop_closures,tp,fp,\
precision,recall,fplc,continuity_ratio,distinctiveness,total_runtime_s,\
t_candidates_s,t_likelihood_s,t_belief_s,t_verify_s,t_update_s";

    /// Index of the first timing column in [`Self::HEADER`].
    pub const FIRST_TIMING_COLUMN: usize = 14;

    pub fn csv_row(&self) -> String {
        let recall = self.recall.map(|r| r.to_string()).unwrap_or_default();
        let mut row = format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{:.9}",
            self.mode,
            self.t_nn,
            self.t_llc,
            self.t_inliers,
            self.n_frames,
            self.n_locations,
            self.n_loop_closures,
            self.tp,
            self.fp,
            self.precision,
            recall,
            self.fplc,
            self.continuity_ratio,
            self.distinctiveness,
            self.total_runtime,
        );
        for s in self.per_stage {
            let _ = write!(row, ",{s:.9}");
        }
        row
    }
}

/// Pearson correlation; None when either series is constant.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n != ys.len() || n < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with averaged ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    pearson(&ranks(xs), &ranks(ys))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::EventKind;
    use proptest::prelude::*;

    fn event(frame: u32, candidates: Vec<u32>) -> MapEvent {
        MapEvent {
            frame,
            kind: EventKind::Aggregated { location: 0 },
            candidates_proposed: candidates,
            elapsed: StageTimes::default(),
        }
    }

    #[test]
    fn margin_examples() {
        let gt = GroundTruth::from_pairs([(7, 100)], 10);
        let e = evaluate_predictions(&[(7, 105)], &gt, 200).unwrap();
        assert_eq!(e.tp, vec![(7, 105)]);
        let e = evaluate_predictions(&[(7, 111)], &gt, 200).unwrap();
        assert_eq!(e.fp, vec![(7, 111)]);
        assert_eq!(e.precision, 0.0);
        assert_eq!(e.recall, Some(0.0));
        let gt = GroundTruth::from_pairs([(7, 100)], 50);
        let e = evaluate_predictions(&[(7, 140)], &gt, 200).unwrap();
        assert_eq!(e.tp.len(), 1);
    }

    #[test]
    fn evaluation_errors() {
        let gt = GroundTruth::new(10);
        assert!(evaluate_predictions(&[], &gt, 10).is_err());
        let gt = GroundTruth::from_pairs([(1, 0)], 10);
        assert!(matches!(evaluate_predictions(&[(1, 10)], &gt, 10), Err(Error::Data(_))));
        let e = evaluate_predictions(&[], &gt, 10).unwrap();
        assert_eq!(e.precision, 1.0);
        assert_eq!(e.recall, Some(0.0));
    }

    #[test]
    fn recall_is_query_level() {
        let gt = GroundTruth::from_pairs([(50, 1), (50, 30), (60, 2)], 0);
        let e = evaluate_predictions(&[(50, 1), (50, 30)], &gt, 100).unwrap();
        assert_eq!(e.recall, Some(0.5));
    }

    #[test]
    fn gt_text_roundtrip_and_errors() {
        let gt = GroundTruth::parse("# header\n5 1\n  6 2 # trailing\n\n6 3\n", 10).unwrap();
        assert_eq!(gt.n_queries(), 2);
        assert_eq!(GroundTruth::parse(&gt.to_text(), 10).unwrap(), gt);
        match GroundTruth::parse("1 2\n3 x\n", 10) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("{other:?}"),
        }
        assert!(GroundTruth::parse("1 2 3\n", 10).is_err());
        assert!(gt.check_bounds(7).is_ok());
        assert!(gt.check_bounds(6).is_err());
    }

    #[test]
    fn fplc_examples() {
        let gt = GroundTruth::from_pairs([(40, 3)], 2);
        let members = vec![vec![0, 1, 5], vec![2, 9], vec![20, 21]];
        assert_eq!(count_fplc(&[event(40, vec![0, 1])], &gt, &members), 0);
        assert_eq!(count_fplc(&[event(40, vec![0, 1, 2])], &gt, &members), 1);
        assert_eq!(count_fplc(&[event(30, vec![0, 1, 2])], &gt, &members), 3);
        assert_eq!(count_fplc(&[], &gt, &members), 0);
    }

    #[test]
    fn continuity_examples() {
        assert!((continuity_ratio(&[3, 4, 10], 5).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(continuity_ratio(&[], 5).is_err());
        assert_eq!(continuity_ratio(&[1, 2], 1).unwrap(), 0.0);
    }

    #[test]
    fn distinctiveness_examples() {
        assert_eq!(distinctiveness_score(0), 1.0);
        assert!((distinctiveness_score(9) - 0.1).abs() < 1e-15);
        assert!(distinctiveness_score(3) > distinctiveness_score(4));
    }

    #[test]
    fn timing_examples() {
        assert_eq!(timing_report(&[]), TimingReport::default());
        let mut e = event(0, vec![]);
        e.elapsed.candidates = 1_000_000;
        e.elapsed.verify = 2_000_000;
        let r = timing_report(&[e]);
        assert_eq!(r.total_ns, 3_000_000);
        assert!((r.total_s() - 0.003).abs() < 1e-12);
    }

    #[test]
    fn correlations() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((pearson(&x, &[2.0, 4.0, 6.0, 8.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&x, &[8.0, 6.0, 4.0, 2.0]).unwrap() + 1.0).abs() < 1e-12);
        assert!(pearson(&x, &[1.0; 4]).is_none());
        assert!((spearman(&x, &[1.0, 10.0, 100.0, 1000.0]).unwrap() - 1.0).abs() < 1e-12);
    }

    fn predictions() -> impl Strategy<Value = (Vec<(u32, u32)>, Vec<(u32, u32)>)> {
        (
            prop::collection::vec((0u32..200, 0u32..200), 0..40),
            prop::collection::vec((0u32..200, 0u32..200), 1..40),
        )
    }

    proptest! {
        #[test]
        fn margin_monotone((preds, gt_pairs) in predictions(), m in 0usize..30) {
            let small = GroundTruth::from_pairs(gt_pairs.iter().copied(), m);
            let large = GroundTruth::from_pairs(gt_pairs.iter().copied(), m + 5);
            let a = evaluate_predictions(&preds, &small, 200).unwrap();
            let b = evaluate_predictions(&preds, &large, 200).unwrap();
            prop_assert!(b.tp.len() >= a.tp.len());
            prop_assert!(b.recall.unwrap() >= a.recall.unwrap());
        }

        #[test]
        fn zero_margin_is_exact((preds, gt_pairs) in predictions()) {
            let gt = GroundTruth::from_pairs(gt_pairs.iter().copied(), 0);
            let e = evaluate_predictions(&preds, &gt, 200).unwrap();
            for (q, r) in &e.tp {
                prop_assert!(gt_pairs.contains(&(*q, *r)));
            }
            for (q, r) in &e.fp {
                prop_assert!(!gt_pairs.contains(&(*q, *r)));
            }
        }

        #[test]
        fn fplc_ignores_candidate_order(mut cands in prop::collection::vec(0u32..4, 0..8), q in 0u32..50) {
            let gt = GroundTruth::from_pairs([(q, 3), (q, 17)], 2);
            let members = vec![vec![0, 1, 2], vec![3, 4], vec![10, 11, 12], vec![18, 30]];
            let a = count_fplc(&[event(q, cands.clone())], &gt, &members);
            cands.reverse();
            let b = count_fplc(&[event(q, cands)], &gt, &members);
            prop_assert_eq!(a, b);
        }

        #[test]
        fn continuity_t1_is_zero(sizes in prop::collection::vec(1usize..50, 1..30)) {
            prop_assert_eq!(continuity_ratio(&sizes, 1).unwrap(), 0.0);
        }
    }
}
