//! Global image descriptors and the distance functions used to compare them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Additive term in chi-squared denominators; keeps empty bins finite.
pub const CHI_SQUARED_EPS: f64 = 1e-10;

/// Spans narrower than this are treated as degenerate by
/// [`normalized_location_similarities`].
pub const DEGENERATE_SPAN: f64 = 1e-12;

/// Distance function attached to a descriptor family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    /// Histogram descriptors (PHOG).
    ChiSquared,
    /// Learned embeddings.
    Euclidean,
}

impl Metric {
    pub fn distance(self, a: &[f32], b: &[f32]) -> Result<f64> {
        match self {
            Metric::ChiSquared => chi_squared_distance(a, b),
            Metric::Euclidean => euclidean_distance(a, b),
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            Metric::ChiSquared => 0,
            Metric::Euclidean => 1,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Metric::ChiSquared),
            1 => Some(Metric::Euclidean),
            _ => None,
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "chi2" | "chisquared" | "chi-squared" => Ok(Metric::ChiSquared),
            "l2" | "euclidean" => Ok(Metric::Euclidean),
            other => Err(Error::Config(format!("unknown metric '{other}'"))),
        }
    }
}

/// A fixed-length real vector summarizing a whole image, tagged with its metric.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalDescriptor {
    values: Vec<f32>,
    metric: Metric,
}

impl GlobalDescriptor {
    /// Validates that the vector is non-empty, finite, and non-negative for
    /// histogram descriptors.
    pub fn new(values: Vec<f32>, metric: Metric) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("descriptor must be non-empty"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("non-finite value at index {i}")));
        }
        if metric == Metric::ChiSquared {
            if let Some(i) = values.iter().position(|&v| v < 0.0) {
                return Err(Error::domain(format!(
                    "negative histogram entry at index {i}"
                )));
            }
        }
        Ok(Self { values, metric })
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    /// Distance under this descriptor's metric.
    pub fn distance(&self, other: &GlobalDescriptor) -> Result<f64> {
        if self.metric != other.metric {
            return Err(Error::Metric {
                expected: self.metric,
                got: other.metric,
            });
        }
        self.metric.distance(&self.values, &other.values)
    }
}

fn check_lengths(a: &[f32], b: &[f32]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(())
}

/// Half chi-squared distance between two histograms:
/// `0.5 * sum((a - b)^2 / (a + b + eps))`.
pub fn chi_squared_distance(a: &[f32], b: &[f32]) -> Result<f64> {
    check_lengths(a, b)?;
    let mut acc = 0.0f64;
    for (i, (&x, &y)) in a.iter().zip(b).enumerate() {
        if x < 0.0 || y < 0.0 {
            return Err(Error::domain(format!(
                "chi-squared requires non-negative entries (index {i})"
            )));
        }
        let (x, y) = (x as f64, y as f64);
        let d = x - y;
        acc += d * d / (x + y + CHI_SQUARED_EPS);
    }
    Ok(0.5 * acc)
}

pub fn euclidean_distance(a: &[f32], b: &[f32]) -> Result<f64> {
    check_lengths(a, b)?;
    let sum: f64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    Ok(sum.sqrt())
}

/// Min-max normalizes per-location distances into similarities in `[0, 1]`.
///
/// The closest location maps to 1 and the farthest to 0. When every distance
/// is (numerically) equal all similarities are 1.
pub fn normalized_location_similarities(distances: &[f64]) -> Result<Vec<f64>> {
    if distances.is_empty() {
        return Err(Error::domain("no distances to normalize"));
    }
    if let Some(d) = distances.iter().find(|d| !d.is_finite() || **d < 0.0) {
        return Err(Error::domain(format!("invalid distance {d}")));
    }
    let (min, max) = distances
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &d| {
            (lo.min(d), hi.max(d))
        });
    let span = max - min;
    if span < DEGENERATE_SPAN {
        return Ok(vec![1.0; distances.len()]);
    }
    Ok(distances.iter().map(|d| 1.0 - (d - min) / span).collect())
}

/// Folds a new image into a location descriptor: the elementwise midpoint of
/// the current descriptor and the new one, or the new one for an empty location.
pub fn update_location_descriptor(
    current: Option<&GlobalDescriptor>,
    new_image: &GlobalDescriptor,
) -> Result<GlobalDescriptor> {
    let Some(current) = current else {
        return Ok(new_image.clone());
    };
    if current.metric != new_image.metric {
        return Err(Error::Metric {
            expected: current.metric,
            got: new_image.metric,
        });
    }
    check_lengths(&current.values, &new_image.values)?;
    let values = current
        .values
        .iter()
        .zip(&new_image.values)
        .map(|(&c, &n)| ((c as f64 + n as f64) / 2.0) as f32)
        .collect();
    Ok(GlobalDescriptor {
        values,
        metric: current.metric,
    })
}

/// An ordered collection of same-length descriptors, one per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSet {
    dim: usize,
    metric: Metric,
    descriptors: Vec<GlobalDescriptor>,
    pub source_label: String,
}

impl DescriptorSet {
    pub fn new(dim: usize, metric: Metric, source_label: impl Into<String>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::domain("descriptor dimension must be positive"));
        }
        Ok(Self {
            dim,
            metric,
            descriptors: Vec::new(),
            source_label: source_label.into(),
        })
    }

    /// Builds a set from descriptors; every descriptor must share `dim` and `metric`.
    pub fn from_descriptors(
        descriptors: Vec<GlobalDescriptor>,
        source_label: impl Into<String>,
    ) -> Result<Self> {
        let first = descriptors
            .first()
            .ok_or_else(|| Error::domain("cannot infer dimension of an empty set"))?;
        let mut set = Self::new(first.dim(), first.metric(), source_label)?;
        for d in descriptors {
            set.push(d)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, d: GlobalDescriptor) -> Result<()> {
        if d.dim() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: d.dim(),
            });
        }
        if d.metric() != self.metric {
            return Err(Error::Metric {
                expected: self.metric,
                got: d.metric(),
            });
        }
        self.descriptors.push(d);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptors.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&GlobalDescriptor> {
        self.descriptors.get(i)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, GlobalDescriptor> {
        self.descriptors.iter()
    }

    pub fn descriptors(&self) -> &[GlobalDescriptor] {
        &self.descriptors
    }
}

impl<'a> IntoIterator for &'a DescriptorSet {
    type Item = &'a GlobalDescriptor;
    type IntoIter = std::slice::Iter<'a, GlobalDescriptor>;

    fn into_iter(self) -> Self::IntoIter {
        self.descriptors.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gd(v: &[f32], m: Metric) -> GlobalDescriptor {
        GlobalDescriptor::new(v.to_vec(), m).unwrap()
    }

    #[test]
    fn chi_squared_examples() {
        assert_eq!(chi_squared_distance(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
        let d = chi_squared_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((d - 1.0).abs() < 1e-9);
        // 0.5 * (0.04/0.6 + 0.04/1.4)
        let d = chi_squared_distance(&[0.2, 0.8], &[0.4, 0.6]).unwrap();
        assert!((d - 0.047619).abs() < 1e-6, "{d}");
    }

    #[test]
    fn chi_squared_errors() {
        assert!(matches!(
            chi_squared_distance(&[1.0], &[1.0, 2.0]),
            Err(Error::Dimension { .. })
        ));
        assert!(matches!(
            chi_squared_distance(&[-1.0], &[1.0]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn euclidean_examples() {
        assert_eq!(euclidean_distance(&[3.0, 4.0], &[0.0, 0.0]).unwrap(), 5.0);
        assert_eq!(euclidean_distance(&[1.5, -2.0], &[1.5, -2.0]).unwrap(), 0.0);
        assert!(euclidean_distance(&[1.0], &[]).is_err());
    }

    #[test]
    fn euclidean_matches_elementwise_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a: Vec<f32> = (0..128).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f32> = (0..128).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut oracle = 0.0f64;
        for i in 0..128 {
            let d = a[i] as f64 - b[i] as f64;
            oracle += d * d;
        }
        let oracle = oracle.sqrt();
        assert!((euclidean_distance(&a, &b).unwrap() - oracle).abs() < 1e-9);
    }

    #[test]
    fn similarity_examples() {
        assert_eq!(
            normalized_location_similarities(&[2.0, 4.0, 6.0]).unwrap(),
            vec![1.0, 0.5, 0.0]
        );
        assert_eq!(normalized_location_similarities(&[5.0]).unwrap(), vec![1.0]);
        assert!(normalized_location_similarities(&[]).is_err());
    }

    #[test]
    fn similarity_extremes_on_random_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d: Vec<f64> = (0..200).map(|_| rng.gen_range(0.0..50.0)).collect();
        let s = normalized_location_similarities(&d).unwrap();
        let argmin = (0..d.len()).min_by(|&i, &j| d[i].total_cmp(&d[j])).unwrap();
        let argmax = (0..d.len()).max_by(|&i, &j| d[i].total_cmp(&d[j])).unwrap();
        assert_eq!(s[argmin], 1.0);
        assert_eq!(s[argmax], 0.0);
    }

    #[test]
    fn location_update_examples() {
        let cur = gd(&[0.0, 0.0], Metric::Euclidean);
        let new = gd(&[2.0, 4.0], Metric::Euclidean);
        let up = update_location_descriptor(Some(&cur), &new).unwrap();
        assert_eq!(up.values(), &[1.0, 2.0]);
        assert_eq!(update_location_descriptor(None, &new).unwrap(), new);

        let other = gd(&[1.0, 1.0, 1.0], Metric::Euclidean);
        assert!(update_location_descriptor(Some(&cur), &other).is_err());
        let hist = gd(&[1.0, 1.0], Metric::ChiSquared);
        assert!(update_location_descriptor(Some(&cur), &hist).is_err());
    }

    #[test]
    fn location_update_chain_matches_recurrence() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let frames: Vec<Vec<f32>> = (0..25)
            .map(|_| (0..16).map(|_| rng.gen_range(0.0..1.0)).collect())
            .collect();
        let mut loc: Option<GlobalDescriptor> = None;
        for f in &frames {
            let g = gd(f, Metric::ChiSquared);
            loc = Some(update_location_descriptor(loc.as_ref(), &g).unwrap());
        }
        // Oracle: apply the midpoint recurrence directly.
        let mut oracle = frames[0].clone();
        for f in &frames[1..] {
            for (o, v) in oracle.iter_mut().zip(f) {
                *o = ((*o as f64 + *v as f64) / 2.0) as f32;
            }
        }
        for (a, b) in loc.unwrap().values().iter().zip(&oracle) {
            assert!((*a as f64 - *b as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn descriptor_validation() {
        assert!(GlobalDescriptor::new(vec![], Metric::Euclidean).is_err());
        assert!(GlobalDescriptor::new(vec![f32::NAN], Metric::Euclidean).is_err());
        assert!(GlobalDescriptor::new(vec![f32::INFINITY], Metric::Euclidean).is_err());
        assert!(GlobalDescriptor::new(vec![-0.5], Metric::ChiSquared).is_err());
        assert!(GlobalDescriptor::new(vec![-0.5], Metric::Euclidean).is_ok());
    }

    #[test]
    fn set_rejects_mixed_members() {
        let mut set = DescriptorSet::new(2, Metric::Euclidean, "t").unwrap();
        set.push(gd(&[1.0, 2.0], Metric::Euclidean)).unwrap();
        assert!(set.push(gd(&[1.0], Metric::Euclidean)).is_err());
        assert!(set.push(gd(&[1.0, 2.0], Metric::ChiSquared)).is_err());
        assert_eq!(set.len(), 1);
    }

    fn hist(n: usize) -> impl Strategy<Value = Vec<f32>> {
        prop::collection::vec(0.0f32..10.0, n)
    }

    proptest! {
        #[test]
        fn distances_symmetric_and_zero_on_identity(a in hist(12), b in hist(12)) {
            let c1 = chi_squared_distance(&a, &b).unwrap();
            let c2 = chi_squared_distance(&b, &a).unwrap();
            prop_assert!((c1 - c2).abs() <= 1e-12 * c1.max(1.0));
            prop_assert!(chi_squared_distance(&a, &a).unwrap() <= 1e-9);
            prop_assert_eq!(euclidean_distance(&a, &b).unwrap(), euclidean_distance(&b, &a).unwrap());
            prop_assert_eq!(euclidean_distance(&a, &a).unwrap(), 0.0);
        }

        #[test]
        fn euclidean_triangle_inequality(a in hist(6), b in hist(6), c in hist(6)) {
            let ab = euclidean_distance(&a, &b).unwrap();
            let bc = euclidean_distance(&b, &c).unwrap();
            let ac = euclidean_distance(&a, &c).unwrap();
            prop_assert!(ac <= ab + bc + 1e-9);
        }

        #[test]
        fn similarities_scale_invariant(
            d in prop::collection::vec(0.0f64..100.0, 1..40),
            c in 0.01f64..1000.0,
        ) {
            let s1 = normalized_location_similarities(&d).unwrap();
            let scaled: Vec<f64> = d.iter().map(|x| x * c).collect();
            let s2 = normalized_location_similarities(&scaled).unwrap();
            for (x, y) in s1.iter().zip(&s2) {
                prop_assert!((x - y).abs() < 1e-9);
                prop_assert!((0.0..=1.0).contains(x));
            }
        }

        #[test]
        fn location_update_idempotent(v in hist(8)) {
            let g = GlobalDescriptor::new(v, Metric::ChiSquared).unwrap();
            prop_assert_eq!(update_location_descriptor(Some(&g), &g).unwrap(), g);
        }
    }
}
