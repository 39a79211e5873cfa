//! Discrete Bayes filter over previously processed images.
//!
//! The evolution model diffuses 90% of the belief with a reflected Gaussian
//! kernel, spreads the remaining 10% evenly over every pose, and seeds new
//! poses with `1/n`. The legacy model keeps the original behaviour for
//! ablations: mirror padding that skips the edge pose, the remaining energy
//! spread only over poses outside each pose's kernel neighbourhood, and
//! zero-initialized new poses.

use crate::error::{Error, Result};

pub const DEFAULT_RADIUS: usize = 4;
pub const DEFAULT_MASS: f64 = 0.9;
pub const DEFAULT_SIGMA: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionKernel {
    taps: Vec<f64>,
    mass: f64,
}

impl DiffusionKernel {
    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn radius(&self) -> usize {
        self.taps.len() / 2
    }
}

impl Default for DiffusionKernel {
    fn default() -> Self {
        make_diffusion_kernel(DEFAULT_RADIUS, DEFAULT_MASS, DEFAULT_SIGMA).unwrap()
    }
}

/// Sampled Gaussian with `2 * radius + 1` taps, rescaled to sum to `mass`.
pub fn make_diffusion_kernel(radius: usize, mass: f64, sigma: f64) -> Result<DiffusionKernel> {
    if radius < 1 {
        return Err(Error::domain("kernel radius must be at least 1"));
    }
    if !(mass > 0.0 && mass <= 1.0) {
        return Err(Error::domain(format!("kernel mass {mass} outside (0, 1]")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::domain(format!("kernel sigma {sigma} must be positive")));
    }
    let r = radius as f64;
    let raw: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let d = i as f64 - r;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    let mut taps: Vec<f64> = raw.iter().map(|v| v / total * mass).collect();
    // enforce exact symmetry after rounding
    for i in 0..radius {
        let m = 0.5 * (taps[i] + taps[2 * radius - i]);
        taps[i] = m;
        taps[2 * radius - i] = m;
    }
    Ok(DiffusionKernel { taps, mass })
}

/// Probability vector over processed images.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BeliefState {
    beliefs: Vec<f64>,
}

impl BeliefState {
    /// Wraps a probability vector, normalizing it to unit mass.
    pub fn from_beliefs(mut beliefs: Vec<f64>) -> Result<Self> {
        if beliefs.iter().any(|b| !b.is_finite() || *b < 0.0) {
            return Err(Error::domain("beliefs must be finite and non-negative"));
        }
        let total: f64 = beliefs.iter().sum();
        if !beliefs.is_empty() {
            if total <= 0.0 {
                return Err(Error::domain("beliefs have zero mass"));
            }
            beliefs.iter_mut().for_each(|b| *b /= total);
        }
        Ok(Self { beliefs })
    }

    /// All mass on pose `at` of `n`.
    pub fn delta(n: usize, at: usize) -> Result<Self> {
        if at >= n {
            return Err(Error::domain(format!("pose {at} out of range for {n} poses")));
        }
        let mut beliefs = vec![0.0; n];
        beliefs[at] = 1.0;
        Ok(Self { beliefs })
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            beliefs: vec![1.0 / n as f64; n],
        }
    }

    pub fn beliefs(&self) -> &[f64] {
        &self.beliefs
    }

    pub fn n(&self) -> usize {
        self.beliefs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beliefs.is_empty()
    }

    fn normalized(mut beliefs: Vec<f64>) -> Self {
        let total: f64 = beliefs.iter().sum();
        if total > 0.0 {
            beliefs.iter_mut().for_each(|b| *b /= total);
        }
        Self { beliefs }
    }
}

/// Symmetric reflection with the edge repeated: `-k -> k - 1`, `n - 1 + k -> n - k`.
#[inline]
fn reflect(idx: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = idx.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

/// Mirror reflection about the edge pose: `-k -> k`, `n - 1 + k -> n - 1 - k`.
#[inline]
fn mirror(idx: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = idx.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// Evolution step: reflected diffusion plus `(1 - mass) / n` on every pose.
pub fn predict(state: &BeliefState, kernel: &DiffusionKernel) -> Result<BeliefState> {
    let n = state.n();
    if n == 0 {
        return Err(Error::domain("cannot predict an empty belief"));
    }
    let r = kernel.radius() as isize;
    let b = &state.beliefs;
    let mut out = vec![(1.0 - kernel.mass) / n as f64; n];
    for (i, &bi) in b.iter().enumerate() {
        if bi == 0.0 {
            continue;
        }
        let i = i as isize;
        if i >= r && i + r < n as isize {
            for (k, t) in kernel.taps.iter().enumerate() {
                out[(i - r) as usize + k] += bi * t;
            }
        } else {
            for (k, t) in kernel.taps.iter().enumerate() {
                out[reflect(i - r + k as isize, n)] += bi * t;
            }
        }
    }
    Ok(BeliefState::normalized(out))
}

/// Appends a pose seeded with `1/n` and renormalizes; an empty state becomes `[1]`.
pub fn add_pose(state: &BeliefState) -> BeliefState {
    let n = state.n();
    if n == 0 {
        return BeliefState {
            beliefs: vec![1.0],
        };
    }
    let mut beliefs = state.beliefs.clone();
    beliefs.push(1.0 / n as f64);
    BeliefState::normalized(beliefs)
}

/// Posterior proportional to `beliefs * likelihoods`.
pub fn measurement_update(state: &BeliefState, likelihoods: &[f64]) -> Result<BeliefState> {
    if likelihoods.len() != state.n() {
        return Err(Error::Dimension {
            expected: state.n(),
            got: likelihoods.len(),
        });
    }
    if likelihoods.iter().any(|l| !l.is_finite() || *l < 0.0) {
        return Err(Error::domain("likelihoods must be finite and non-negative"));
    }
    let post: Vec<f64> = state
        .beliefs
        .iter()
        .zip(likelihoods)
        .map(|(b, l)| b * l)
        .collect();
    if post.iter().sum::<f64>() <= 0.0 {
        return Err(Error::domain("likelihood has no overlap with the belief"));
    }
    Ok(BeliefState::normalized(post))
}

/// Legacy evolution step, for ablation only.
pub fn predict_legacy(state: &BeliefState, kernel: &DiffusionKernel) -> Result<BeliefState> {
    let n = state.n();
    if n == 0 {
        return Err(Error::domain("cannot predict an empty belief"));
    }
    let r = kernel.radius();
    let rest = 1.0 - kernel.mass;
    let b = &state.beliefs;
    let mut out = vec![0.0; n];
    // Energy that is spread "to all but the neighbours" of pose i is added as
    // a uniform offset minus the share of the excluded neighbours.
    let mut uniform = 0.0;
    for (i, &bi) in b.iter().enumerate() {
        if bi == 0.0 {
            continue;
        }
        for (k, t) in kernel.taps.iter().enumerate() {
            out[mirror(i as isize - r as isize + k as isize, n)] += bi * t;
        }
        let lo = i.saturating_sub(r);
        let hi = (i + r).min(n - 1);
        let excluded = hi - lo; // the neighbourhood minus the pose itself
        let receivers = n - excluded;
        let share = bi * rest / receivers as f64;
        uniform += share;
        for (j, o) in out.iter_mut().enumerate().take(hi + 1).skip(lo) {
            if j != i {
                *o -= share;
            }
        }
    }
    out.iter_mut().for_each(|o| *o = (*o + uniform).max(0.0));
    Ok(BeliefState::normalized(out))
}

/// Legacy pose insertion: new poses start with zero belief.
pub fn add_pose_legacy(state: &BeliefState) -> BeliefState {
    if state.is_empty() {
        return BeliefState {
            beliefs: vec![1.0],
        };
    }
    let mut beliefs = state.beliefs.clone();
    beliefs.push(0.0);
    BeliefState { beliefs }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Evolution {
    #[default]
    Fixed,
    Legacy,
}

/// A belief state bundled with its evolution model.
#[derive(Debug, Clone)]
pub struct BayesFilter {
    state: BeliefState,
    kernel: DiffusionKernel,
    evolution: Evolution,
}

impl BayesFilter {
    pub fn new(kernel: DiffusionKernel, evolution: Evolution) -> Self {
        Self {
            state: BeliefState::default(),
            kernel,
            evolution,
        }
    }

    pub fn state(&self) -> &BeliefState {
        &self.state
    }

    pub fn n(&self) -> usize {
        self.state.n()
    }

    pub fn predict(&mut self) {
        if self.state.is_empty() {
            return;
        }
        let next = match self.evolution {
            Evolution::Fixed => predict(&self.state, &self.kernel),
            Evolution::Legacy => predict_legacy(&self.state, &self.kernel),
        };
        self.state = next.expect("non-empty state");
    }

    pub fn add_pose(&mut self) {
        self.state = match self.evolution {
            Evolution::Fixed => add_pose(&self.state),
            Evolution::Legacy => add_pose_legacy(&self.state),
        };
    }

    /// Applies a measurement; a likelihood with no overlap leaves the state unchanged.
    pub fn update(&mut self, likelihoods: &[f64]) -> Result<bool> {
        match measurement_update(&self.state, likelihoods) {
            Ok(s) => {
                self.state = s;
                Ok(true)
            }
            Err(Error::Domain(_)) => Ok(false),
            Err(e) => Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sum(s: &BeliefState) -> f64 {
        s.beliefs().iter().sum()
    }

    #[test]
    fn kernel_examples() {
        let k = make_diffusion_kernel(4, 0.9, 2.0).unwrap();
        assert_eq!(k.taps().len(), 9);
        assert!((k.taps().iter().sum::<f64>() - 0.9).abs() < 1e-12);
        assert_eq!(k.taps()[0], k.taps()[8]);
        // independent evaluation of the sampled Gaussian
        let g: Vec<f64> = (-4i32..=4)
            .map(|d| (-(d * d) as f64 / 8.0).exp())
            .collect();
        let z: f64 = g.iter().sum();
        for (t, v) in k.taps().iter().zip(&g) {
            assert!((t - 0.9 * v / z).abs() < 1e-12);
        }
    }

    #[test]
    fn kernel_rejects_bad_params() {
        assert!(make_diffusion_kernel(0, 0.9, 2.0).is_err());
        assert!(make_diffusion_kernel(4, 0.0, 2.0).is_err());
        assert!(make_diffusion_kernel(4, 1.5, 2.0).is_err());
        assert!(make_diffusion_kernel(4, 0.9, 0.0).is_err());
    }

    #[test]
    fn reflect_mapping() {
        assert_eq!(reflect(-1, 10), 0);
        assert_eq!(reflect(-3, 10), 2);
        assert_eq!(reflect(10, 10), 9);
        assert_eq!(reflect(12, 10), 7);
        assert_eq!(reflect(-4, 1), 0);
        assert_eq!(reflect(-4, 2), 0);
        assert_eq!(mirror(-1, 10), 1);
        assert_eq!(mirror(10, 10), 8);
    }

    #[test]
    fn predict_examples() {
        let k = DiffusionKernel::default();
        let one = BeliefState::from_beliefs(vec![1.0]).unwrap();
        assert_eq!(predict(&one, &k).unwrap().beliefs(), &[1.0]);

        let u = BeliefState::uniform(37);
        let p = predict(&u, &k).unwrap();
        for b in p.beliefs() {
            assert!((b - 1.0 / 37.0).abs() < 1e-12);
        }
        assert!(predict(&BeliefState::default(), &k).is_err());
    }

    #[test]
    fn delta_diffuses_to_uniform() {
        let k = DiffusionKernel::default();
        let mut s = BeliefState::delta(100, 0).unwrap();
        for _ in 0..200 {
            s = predict(&s, &k).unwrap();
            assert!((sum(&s) - 1.0).abs() < 1e-9);
        }
        let dev = s.beliefs().iter().map(|b| (b - 0.01).abs()).fold(0.0, f64::max);
        assert!(dev < 1e-3, "{dev}");
    }

    #[test]
    fn add_pose_examples() {
        let s = add_pose(&BeliefState::from_beliefs(vec![1.0]).unwrap());
        assert_eq!(s.beliefs(), &[0.5, 0.5]);
        let s = add_pose(&s);
        for b in s.beliefs() {
            assert!((b - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(add_pose(&BeliefState::default()).beliefs(), &[1.0]);
    }

    #[test]
    fn measurement_examples() {
        let s = BeliefState::from_beliefs(vec![0.2, 0.3, 0.5]).unwrap();
        let u = measurement_update(&s, &[0.4, 0.4, 0.4]).unwrap();
        for (a, b) in u.beliefs().iter().zip(s.beliefs()) {
            assert!((a - b).abs() < 1e-12);
        }
        let d = measurement_update(&s, &[0.0, 1.0, 0.0]).unwrap();
        assert_eq!(d.beliefs(), &[0.0, 1.0, 0.0]);
        assert!(measurement_update(&s, &[0.0, 0.0, 0.0]).is_err());
        assert!(measurement_update(&s, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn measurement_matches_elementwise_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let b: Vec<f64> = (0..50).map(|_| rng.gen_range(0.0..1.0)).collect();
        let l: Vec<f64> = (0..50).map(|_| rng.gen_range(0.0..1.0)).collect();
        let s = BeliefState::from_beliefs(b).unwrap();
        let post = measurement_update(&s, &l).unwrap();
        let prod: Vec<f64> = s.beliefs().iter().zip(&l).map(|(x, y)| x * y).collect();
        let z: f64 = prod.iter().sum();
        for (p, q) in post.beliefs().iter().zip(&prod) {
            assert!((p - q / z).abs() < 1e-12);
        }
    }

    #[test]
    fn legacy_zero_inits_and_conserves_mass() {
        let k = DiffusionKernel::default();
        let s = add_pose_legacy(&BeliefState::from_beliefs(vec![1.0]).unwrap());
        assert_eq!(s.beliefs(), &[1.0, 0.0]);
        let mut s = BeliefState::delta(30, 0).unwrap();
        for _ in 0..10 {
            s = predict_legacy(&s, &k).unwrap();
            assert!((sum(&s) - 1.0).abs() < 1e-9);
        }
        // nothing reflects back onto the edge pose itself
        let p = predict_legacy(&BeliefState::delta(30, 1).unwrap(), &k).unwrap();
        assert!(p.beliefs()[0] < p.beliefs()[2]);
    }

    #[test]
    fn filter_skips_disjoint_measurements() {
        let mut f = BayesFilter::new(DiffusionKernel::default(), Evolution::Legacy);
        f.add_pose();
        f.add_pose();
        assert_eq!(f.state().beliefs(), &[1.0, 0.0]);
        assert!(!f.update(&[0.0, 1.0]).unwrap());
        assert!(f.update(&[1.0, 1.0]).unwrap());
        assert!(f.update(&[1.0]).is_err());
    }

    fn belief_vec() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, 1..60).prop_filter("mass", |v| v.iter().sum::<f64>() > 1e-6)
    }

    proptest! {
        #[test]
        fn operations_conserve_mass(b in belief_vec(), seed in 0u64..100) {
            let k = DiffusionKernel::default();
            let s = BeliefState::from_beliefs(b).unwrap();
            prop_assert!((sum(&predict(&s, &k).unwrap()) - 1.0).abs() < 1e-9);
            prop_assert!((sum(&add_pose(&s)) - 1.0).abs() < 1e-12);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let l: Vec<f64> = (0..s.n()).map(|_| rng.gen_range(0.01..1.0)).collect();
            prop_assert!((sum(&measurement_update(&s, &l).unwrap()) - 1.0).abs() < 1e-9);
        }

        #[test]
        fn predict_translation_equivariant(n in 12usize..80, at in 0usize..80) {
            let k = DiffusionKernel::default();
            let r = k.radius();
            prop_assume!(at >= r && at + 1 + r < n);
            let a = predict(&BeliefState::delta(n, at).unwrap(), &k).unwrap();
            let b = predict(&BeliefState::delta(n, at + 1).unwrap(), &k).unwrap();
            for i in 0..n - 1 {
                prop_assert!((a.beliefs()[i] - b.beliefs()[i + 1]).abs() < 1e-12);
            }
        }

        #[test]
        fn no_early_pose_accumulation(b in belief_vec()) {
            let k = DiffusionKernel::default();
            let mut s = BeliefState::from_beliefs(b).unwrap();
            for _ in 0..200 {
                s = predict(&s, &k).unwrap();
            }
            let max = s.beliefs().iter().cloned().fold(f64::MIN, f64::max);
            let min = s.beliefs().iter().cloned().fold(f64::MAX, f64::min);
            prop_assert!(max - min < 1e-3);
        }
    }
}
