use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::FeatureSet;
use crate::error::{Error, Result};

/// Additive smoothing applied to match scores before normalization.
pub const LIKELIHOOD_FLOOR: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Correspondence {
    pub query: usize,
    pub target: usize,
    pub distance: u32,
}

/// Nearest and second-nearest neighbour, each packed as `distance << 16 | index`
/// so that updates are branch-free and ties go to the lower index.
#[derive(Clone, Copy)]
struct Best {
    m1: u32,
    m2: u32,
}

impl Best {
    const EMPTY: Best = Best {
        m1: u32::MAX,
        m2: u32::MAX,
    };

    #[inline(always)]
    fn offer(&mut self, packed: u32) {
        let hi = self.m1.max(packed);
        self.m1 = self.m1.min(packed);
        self.m2 = self.m2.min(hi);
    }

    #[inline]
    fn idx(&self) -> usize {
        (self.m1 & 0xFFFF) as usize
    }

    #[inline]
    fn d1(&self) -> u32 {
        self.m1 >> 16
    }

    /// Nearest/second-nearest ratio test; a lone candidate always passes.
    #[inline]
    fn distinct(&self, ratio: f64) -> bool {
        self.m2 == u32::MAX || (self.d1() as f64) < ratio * (self.m2 >> 16) as f64
    }
}

const STACK_FEATURES: usize = 64;

/// Runs `f` on best-match tables for the two sets, on the stack when small.
fn with_tables<R>(query: &FeatureSet, target: &FeatureSet, f: impl FnOnce(&[Best], &[Best]) -> R) -> R {
    let (nq, nt) = (query.features.len(), target.features.len());
    assert!(nq <= 0xFFFF && nt <= 0xFFFF, "feature sets are limited to 65535 entries");
    if nq <= STACK_FEATURES && nt <= STACK_FEATURES {
        let mut rows = [Best::EMPTY; STACK_FEATURES];
        let mut cols = [Best::EMPTY; STACK_FEATURES];
        fill(query, target, &mut rows[..nq], &mut cols[..nt]);
        f(&rows[..nq], &cols[..nt])
    } else {
        let mut rows = vec![Best::EMPTY; nq];
        let mut cols = vec![Best::EMPTY; nt];
        fill(query, target, &mut rows, &mut cols);
        f(&rows, &cols)
    }
}

#[inline]
fn fill(query: &FeatureSet, target: &FeatureSet, rows: &mut [Best], cols: &mut [Best]) {
    for (i, (fq, row)) in query.features.iter().zip(rows.iter_mut()).enumerate() {
        for (j, (ft, col)) in target.features.iter().zip(cols.iter_mut()).enumerate() {
            let d = fq.descriptor.hamming(&ft.descriptor) << 16;
            row.offer(d | j as u32);
            col.offer(d | i as u32);
        }
    }
}

#[inline]
fn accepted<'a>(rows: &'a [Best], cols: &'a [Best], ratio: f64) -> impl Iterator<Item = (usize, &'a Best)> + 'a {
    rows.iter().enumerate().filter(move |(i, r)| {
        let c = &cols[r.idx()];
        c.idx() == *i && r.distinct(ratio) && c.distinct(ratio)
    })
}

/// Mutual nearest neighbours under Hamming distance that pass the ratio test
/// from both sides. The result is sorted by query index.
pub fn hamming_match(query: &FeatureSet, target: &FeatureSet, ratio: f64) -> Vec<Correspondence> {
    if query.is_empty() || target.is_empty() {
        return Vec::new();
    }
    with_tables(query, target, |rows, cols| {
        accepted(rows, cols, ratio)
            .map(|(i, r)| Correspondence {
                query: i,
                target: r.idx(),
                distance: r.d1(),
            })
            .collect()
    })
}

/// Number of ratio-test correspondences between two images.
pub fn match_score(query: &FeatureSet, target: &FeatureSet, ratio: f64) -> usize {
    if query.is_empty() || target.is_empty() {
        return 0;
    }
    with_tables(query, target, |rows, cols| accepted(rows, cols, ratio).count())
}

/// Match-count likelihood of each candidate image, smoothed and normalized
/// to sum to one.
pub fn image_likelihoods(query: &FeatureSet, candidates: &[&FeatureSet], ratio: f64) -> Result<Vec<f64>> {
    if candidates.is_empty() {
        return Err(Error::domain("no candidate images"));
    }
    let raw: Vec<f64> = candidates
        .iter()
        .map(|c| match_score(query, c, ratio) as f64 + LIKELIHOOD_FLOOR)
        .collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|v| v / total).collect())
}

#[derive(Debug, Clone, Copy)]
pub struct RansacParams {
    pub threshold_px: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            threshold_px: 3.0,
            iterations: 500,
            seed: 0,
        }
    }
}

/// 2-D similarity transform `p -> s R p + t`, stored as the complex
/// multiplier `(a, b)` and translation `(tx, ty)`.
#[derive(Debug, Clone, Copy)]
struct Similarity {
    a: f64,
    b: f64,
    tx: f64,
    ty: f64,
}

impl Similarity {
    fn from_pairs(p1: (f64, f64), q1: (f64, f64), p2: (f64, f64), q2: (f64, f64)) -> Option<Self> {
        let (dpx, dpy) = (p2.0 - p1.0, p2.1 - p1.1);
        let (dqx, dqy) = (q2.0 - q1.0, q2.1 - q1.1);
        let den = dpx * dpx + dpy * dpy;
        if den < 1e-12 {
            return None;
        }
        // (dq) / (dp) as complex numbers
        let a = (dqx * dpx + dqy * dpy) / den;
        let b = (dqy * dpx - dqx * dpy) / den;
        let tx = q1.0 - (a * p1.0 - b * p1.1);
        let ty = q1.1 - (b * p1.0 + a * p1.1);
        Some(Self { a, b, tx, ty })
    }

    #[inline]
    fn error_sq(&self, p: (f64, f64), q: (f64, f64)) -> f64 {
        let x = self.a * p.0 - self.b * p.1 + self.tx - q.0;
        let y = self.b * p.0 + self.a * p.1 + self.ty - q.1;
        x * x + y * y
    }
}

/// Largest consensus set of a similarity transform mapping query keypoints
/// onto target keypoints.
///
/// Hypotheses come from pairs of correspondences. Correspondence `i` is
/// paired with every earlier one while the total stays within `iterations`;
/// later ones are paired with `iterations / i` earlier partners drawn from a
/// generator seeded by `(seed, i)`. The hypothesis set for a list is
/// therefore a subset of the set for any extension of that list, which makes
/// the count monotone under appending correspondences.
pub fn geometric_inliers(
    query: &FeatureSet,
    target: &FeatureSet,
    correspondences: &[Correspondence],
    params: &RansacParams,
) -> usize {
    let pts: Vec<((f64, f64), (f64, f64))> = correspondences
        .iter()
        .map(|c| {
            let p = &query.features[c.query];
            let q = &target.features[c.target];
            ((p.x as f64, p.y as f64), (q.x as f64, q.y as f64))
        })
        .collect();
    inliers_of_points(&pts, params)
}

/// Index below which correspondences are paired exhaustively.
fn exhaustive_prefix(iterations: usize) -> usize {
    let mut k = 1;
    while (k + 1) * k / 2 <= iterations {
        k += 1;
    }
    k
}

pub(crate) fn inliers_of_points(pts: &[((f64, f64), (f64, f64))], params: &RansacParams) -> usize {
    let n = pts.len();
    if n < 2 || params.threshold_px <= 0.0 {
        return 0;
    }
    let thr_sq = params.threshold_px * params.threshold_px;
    let count = |i: usize, j: usize| -> usize {
        match Similarity::from_pairs(pts[i].0, pts[i].1, pts[j].0, pts[j].1) {
            Some(h) => pts.iter().filter(|(p, q)| h.error_sq(*p, *q) < thr_sq).count(),
            None => 0,
        }
    };
    let prefix = exhaustive_prefix(params.iterations.max(1));
    let mut best = 0;
    for i in 1..n {
        if i < prefix {
            for j in 0..i {
                best = best.max(count(i, j));
            }
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(
                params.seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
            );
            for _ in 0..(params.iterations / i).max(1) {
                best = best.max(count(i, rng.gen_range(0..i)));
            }
        }
        if best == n {
            break;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::super::{BinaryDescriptor, LocalFeature};
    use super::*;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest};

    fn random_set(rng: &mut ChaCha8Rng, n: usize) -> FeatureSet {
        let features = (0..n)
            .map(|_| LocalFeature {
                x: rng.gen_range(0.0..640.0),
                y: rng.gen_range(0.0..480.0),
                descriptor: BinaryDescriptor([rng.gen(), rng.gen(), rng.gen(), rng.gen()]),
            })
            .collect();
        FeatureSet::new(0, features)
    }

    #[test]
    fn identical_sets_match_identically() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_set(&mut rng, 80);
        let m = hamming_match(&a, &a, 0.8);
        assert_eq!(m.len(), 80);
        for c in &m {
            assert_eq!(c.query, c.target);
            assert_eq!(c.distance, 0);
        }
    }

    #[test]
    fn random_sets_rarely_match() {
        let mut total = 0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_set(&mut rng, 200);
            let b = random_set(&mut rng, 200);
            total += hamming_match(&a, &b, 0.8).len();
        }
        let mean = total as f64 / 100.0;
        assert!(mean < 0.05 * 200.0, "mean correspondences {mean}");
    }

    #[test]
    fn empty_sets_give_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_set(&mut rng, 5);
        assert!(hamming_match(&a, &FeatureSet::default(), 0.8).is_empty());
        assert!(hamming_match(&FeatureSet::default(), &a, 0.8).is_empty());
    }

    fn similarity_points(n: usize, rng: &mut ChaCha8Rng) -> Vec<((f64, f64), (f64, f64))> {
        let (s, th, tx, ty) = (1.3f64, 0.4f64, 12.0, -7.0);
        (0..n)
            .map(|_| {
                let p = (rng.gen_range(0.0..640.0), rng.gen_range(0.0..480.0));
                let q = (
                    s * (th.cos() * p.0 - th.sin() * p.1) + tx,
                    s * (th.sin() * p.0 + th.cos() * p.1) + ty,
                );
                (p, q)
            })
            .collect()
    }

    #[test]
    fn exact_similarity_all_inliers() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts = similarity_points(60, &mut rng);
        assert_eq!(inliers_of_points(&pts, &RansacParams::default()), 60);
        let few = similarity_points(10, &mut rng);
        assert_eq!(inliers_of_points(&few, &RansacParams::default()), 10);
    }

    #[test]
    fn degenerate_inputs() {
        let p = RansacParams::default();
        assert_eq!(inliers_of_points(&[], &p), 0);
        assert_eq!(inliers_of_points(&[((1.0, 1.0), (2.0, 2.0))], &p), 0);
    }

    #[test]
    fn half_outliers_bounded_count() {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let mut pts = similarity_points(50, &mut rng);
            for _ in 0..50 {
                pts.push((
                    (rng.gen_range(0.0..640.0), rng.gen_range(0.0..480.0)),
                    (rng.gen_range(0.0..640.0), rng.gen_range(0.0..480.0)),
                ));
            }
            let params = RansacParams {
                seed,
                ..Default::default()
            };
            let n = inliers_of_points(&pts, &params);
            assert!((50..=55).contains(&n), "seed {seed}: {n}");
        }
    }

    #[test]
    fn likelihood_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let q = random_set(&mut rng, 60);
        let others: Vec<FeatureSet> = (0..4).map(|_| random_set(&mut rng, 60)).collect();
        let single = image_likelihoods(&q, &[&others[0]], 0.8).unwrap();
        assert_eq!(single, vec![1.0]);

        let mut cands: Vec<&FeatureSet> = others.iter().collect();
        cands.insert(2, &q);
        let l = image_likelihoods(&q, &cands, 0.8).unwrap();
        let argmax = (0..l.len()).max_by(|&a, &b| l[a].total_cmp(&l[b])).unwrap();
        assert_eq!(argmax, 2);
        assert!((l.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        let empty = FeatureSet::default();
        let u = image_likelihoods(&empty, &[&others[0], &others[1]], 0.8).unwrap();
        assert_eq!(u, vec![0.5, 0.5]);
        assert!(image_likelihoods(&q, &[], 0.8).is_err());
    }

    proptest! {
        #[test]
        fn matching_symmetric_under_swap(seed in 0u64..500, n in 1usize..40, m in 1usize..40) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_set(&mut rng, n);
            let mut b = random_set(&mut rng, m);
            // plant a few near-copies so that some matches exist
            for k in 0..n.min(m) / 2 {
                b.features[k].descriptor = a.features[k].descriptor;
                b.features[k].descriptor.flip(k);
            }
            let ab: Vec<(usize, usize)> = hamming_match(&a, &b, 0.8).iter().map(|c| (c.query, c.target)).collect();
            let mut ba: Vec<(usize, usize)> = hamming_match(&b, &a, 0.8).iter().map(|c| (c.target, c.query)).collect();
            ba.sort();
            prop_assert_eq!(ab.clone(), ba);
            let mut qs: Vec<usize> = ab.iter().map(|p| p.0).collect();
            let mut ts: Vec<usize> = ab.iter().map(|p| p.1).collect();
            qs.dedup();
            ts.sort();
            ts.dedup();
            prop_assert_eq!(qs.len(), ab.len());
            prop_assert_eq!(ts.len(), ab.len());
        }

        #[test]
        fn inliers_monotone_in_exact_inliers(seed in 0u64..200, n_in in 2usize..40, n_out in 0usize..40) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut pts = similarity_points(n_in + 1, &mut rng);
            let extra = pts.pop().unwrap();
            for _ in 0..n_out {
                pts.push((
                    (rng.gen_range(0.0..640.0), rng.gen_range(0.0..480.0)),
                    (rng.gen_range(0.0..640.0), rng.gen_range(0.0..480.0)),
                ));
            }
            let params = RansacParams { seed, ..Default::default() };
            let before = inliers_of_points(&pts, &params);
            pts.push(extra);
            let after = inliers_of_points(&pts, &params);
            prop_assert!(after >= before, "{} -> {}", before, after);
        }
    }
}
