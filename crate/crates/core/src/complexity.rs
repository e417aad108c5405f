//! Threshold and hardness analytics: the observation threshold, the
//! gap-dependent observation threshold, partial hardness sums, asymptotic-order
//! sample-complexity predictors, fixed-budget phase constants, and the
//! lower-bound value for parallel atomic instances.
//!
//! The predictors suppress absolute constants; they order instances by
//! difficulty rather than bound round counts.

use alloc::vec::Vec;
use core::fmt;

use crate::math::{exp, ln};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ComplexityError {
    Empty,
    RangeError {
        r: usize,
        len: usize,
    },
    BadValue(&'static str),
    /// The instance violates the lower-bound class constraints.
    InstanceClass(&'static str),
}

impl fmt::Display for ComplexityError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ComplexityError::Empty => write!(f, "empty profile"),
            ComplexityError::RangeError { r, len } => {
                write!(f, "rank {r} out of range for {len} arms")
            }
            ComplexityError::BadValue(what) => write!(f, "bad profile value: {what}"),
            ComplexityError::InstanceClass(what) => {
                write!(f, "instance outside the lower-bound class: {what}")
            }
        }
    }
}

/// Per-arm observability scores and clamped gaps, with the arm order used by
/// the hardness sums: ascending `q * max(gap, eps/2)^2`, ties by index.
#[derive(Debug, Clone, PartialEq)]
pub struct HardnessProfile {
    q: Vec<f64>,
    delta: Vec<f64>,
    clamp: Vec<f64>,
    epsilon: f64,
    order: Vec<usize>,
}

impl HardnessProfile {
    pub fn new(q: Vec<f64>, delta: Vec<f64>, epsilon: f64) -> Result<Self, ComplexityError> {
        if q.is_empty() {
            return Err(ComplexityError::Empty);
        }
        if q.len() != delta.len() {
            return Err(ComplexityError::BadValue("q and delta lengths differ"));
        }
        if q.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(ComplexityError::BadValue("q outside [0, 1]"));
        }
        if delta.iter().any(|v| v.is_nan() || *v < 0.0) {
            return Err(ComplexityError::BadValue("negative gap"));
        }
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(ComplexityError::BadValue("epsilon outside [0, 1]"));
        }
        let clamp: Vec<f64> = delta.iter().map(|&d| d.max(epsilon / 2.0)).collect();
        let key = |i: usize| q[i] * clamp[i] * clamp[i];
        let mut order: Vec<usize> = (0..q.len()).collect();
        order.sort_by(|&i, &j| key(i).partial_cmp(&key(j)).unwrap().then(i.cmp(&j)));
        Ok(HardnessProfile {
            q,
            delta,
            clamp,
            epsilon,
            order,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.q.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    #[inline]
    pub fn q(&self) -> &[f64] {
        &self.q
    }

    #[inline]
    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    #[inline]
    pub fn clamp(&self) -> &[f64] {
        &self.clamp
    }

    #[inline]
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Arm indices in the hardness order.
    #[inline]
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    #[inline]
    fn key(&self, i: usize) -> f64 {
        self.q[i] * self.clamp[i] * self.clamp[i]
    }
}

/// Smallest `tau` such that at most `tau` arms have `q < 1/tau`. Always at
/// most the arm count.
pub fn observation_threshold(q: &[f64]) -> Result<usize, ComplexityError> {
    if q.is_empty() {
        return Err(ComplexityError::Empty);
    }
    for tau in 1..=q.len() {
        let under = q.iter().filter(|&&v| v < 1.0 / tau as f64).count();
        if under <= tau {
            return Ok(tau);
        }
    }
    Ok(q.len())
}

/// Partial hardness sum `H_r = sum of 1/clamp^2` over the first `r` arms in
/// the profile order.
pub fn h_r(profile: &HardnessProfile, r: usize) -> Result<f64, ComplexityError> {
    if r < 1 || r > profile.len() {
        return Err(ComplexityError::RangeError {
            r,
            len: profile.len(),
        });
    }
    Ok(profile
        .order
        .iter()
        .take(r)
        .map(|&i| 1.0 / (profile.clamp[i] * profile.clamp[i]))
        .sum())
}

/// Gap-dependent observation threshold: smallest `tau` with at most `tau`
/// arms whose `q * clamp^2` falls below `1/H_tau`.
pub fn gap_threshold(profile: &HardnessProfile) -> usize {
    let n = profile.len();
    for tau in 1..=n {
        let h_tau = h_r(profile, tau).expect("tau in range");
        let under = (0..n).filter(|&i| profile.key(i) < 1.0 / h_tau).count();
        if under <= tau {
            return tau;
        }
    }
    n
}

/// Asymptotic-order predictor `H_m * ln(|A| H_m / delta)` at the gap threshold;
/// an order-of-growth diagnostic, not a bound.
pub fn predict_sample_complexity(profile: &HardnessProfile, n_actions: usize, delta: f64) -> f64 {
    let m = gap_threshold(profile);
    let h = h_r(profile, m).expect("threshold in range");
    h * ln((n_actions as f64 * h / delta).max(1.0 + 1e-9))
}

/// Phase constants of the fixed-budget analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedBudgetConstants {
    /// `alpha_k` for `k = 1..=N` (index 0 is `alpha_1`).
    pub alpha: Vec<f64>,
    pub h3: f64,
    pub log_bar: f64,
}

/// `1/2 + sum_{i=2..N} 1/i`, the successive-reject normalizer.
pub fn log_bar(n: usize) -> f64 {
    0.5 + (2..=n).map(|i| 1.0 / i as f64).sum::<f64>()
}

/// `alpha_k` piecewise in the observation threshold `m`, and
/// `H_3 = max_k alpha_k^{-1} max(gap^(k), eps)^{-2}` over gaps sorted
/// ascending. Note the fixed-budget clamp uses `eps`, not `eps/2`.
pub fn fixed_budget_constants(
    profile: &HardnessProfile,
    m: usize,
) -> Result<FixedBudgetConstants, ComplexityError> {
    let n = profile.len();
    if m < 1 || m > n {
        return Err(ComplexityError::RangeError { r: m, len: n });
    }
    let tail = |from: usize| -> f64 { (from..=n).map(|i| 1.0 / i as f64).sum() };
    let alpha: Vec<f64> = (1..=n)
        .map(|k| {
            if k > m {
                (1.0 + tail(k + 1)) / m as f64
            } else {
                1.0 / k as f64 + tail(m + 1) / m as f64
            }
        })
        .collect();
    let mut sorted_gaps: Vec<f64> = profile.delta.to_vec();
    sorted_gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let eps = profile.epsilon;
    let h3 = (0..n)
        .map(|k| {
            let g = sorted_gaps[k].max(eps);
            1.0 / (alpha[k] * g * g)
        })
        .fold(0.0f64, f64::max);
    Ok(FixedBudgetConstants {
        alpha,
        h3,
        log_bar: log_bar(n),
    })
}

/// Error-probability expression of the fixed-budget guarantee:
/// `4 I N^2 exp(-(T/2 - N) / (128 log_bar(N) H_3))`.
pub fn fixed_budget_error_bound(
    constants: &FixedBudgetConstants,
    budget: f64,
    i_max: f64,
    n_arms: usize,
) -> f64 {
    let n = n_arms as f64;
    4.0 * i_max * n * n * exp(-(budget / 2.0 - n) / (128.0 * constants.log_bar * constants.h3))
}

/// Lower-bound value for parallel atomic instances:
/// `(H_{m-1} - largest retained term - null-arm term) * ln(1/delta)`,
/// clamped at zero. `p_min`/`p_max` are the extreme conditional reward
/// probabilities of the instance, checked against the class constraints.
pub fn lower_bound_value(
    profile: &HardnessProfile,
    do_index: usize,
    p_min: f64,
    p_max: f64,
    delta: f64,
) -> Result<f64, ComplexityError> {
    if do_index >= profile.len() {
        return Err(ComplexityError::RangeError {
            r: do_index,
            len: profile.len(),
        });
    }
    let eps = profile.epsilon;
    let max_gap = profile.delta.iter().copied().fold(0.0f64, f64::max);
    if p_max + 2.0 * max_gap + 2.0 * eps > 0.9 {
        return Err(ComplexityError::InstanceClass(
            "p_max + 2*gap_max + 2*eps > 0.9",
        ));
    }
    if p_min + profile.delta.iter().copied().fold(f64::INFINITY, f64::min) < 0.1 {
        return Err(ComplexityError::InstanceClass("p_min + gap_min < 0.1"));
    }
    let m = gap_threshold(profile);
    if m <= 1 {
        return Ok(0.0);
    }
    let h_prev = h_r(profile, m - 1)?;
    let biggest_term = profile
        .order
        .iter()
        .take(m - 1)
        .map(|&i| 1.0 / (profile.clamp[i] * profile.clamp[i]))
        .fold(0.0f64, f64::max);
    let null_term = 1.0 / (profile.clamp[do_index] * profile.clamp[do_index]);
    let mass = (h_prev - biggest_term - null_term).max(0.0);
    Ok(mass * ln(1.0 / delta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    #[test]
    fn threshold_parallel_uniform() {
        // n arms at 1/2 plus the null arm at 1 -> m = 2.
        let mut q = vec![0.5; 10];
        q.push(1.0);
        assert_eq!(observation_threshold(&q).unwrap(), 2);
    }

    #[test]
    fn threshold_all_ones_and_brute_case() {
        assert_eq!(observation_threshold(&[1.0, 1.0, 1.0]).unwrap(), 1);
        assert_eq!(
            observation_threshold(&[1.0, 0.05, 0.2, 0.3, 0.5]).unwrap(),
            3
        );
    }

    #[test]
    fn h_r_examples() {
        let p = HardnessProfile::new(vec![0.5, 0.5], vec![0.5, 0.5], 0.0).unwrap();
        assert!((h_r(&p, 2).unwrap() - 8.0).abs() < 1e-12);
        assert!(h_r(&p, 3).is_err());
        // vacuous epsilon: the eps/2 clamp dominates every gap <= 1/2,
        // so each term is 4 and H_r = 4r.
        let p2 = HardnessProfile::new(vec![0.3; 4], vec![0.1, 0.2, 0.3, 0.5], 1.0).unwrap();
        for r in 1..=4 {
            assert!((h_r(&p2, r).unwrap() - 4.0 * r as f64).abs() < 1e-12);
        }
        // non-decreasing in r
        let p3 = HardnessProfile::new(vec![0.4, 0.9, 0.2], vec![0.3, 0.1, 0.6], 0.05).unwrap();
        let mut prev = 0.0;
        for r in 1..=3 {
            let h = h_r(&p3, r).unwrap();
            assert!(h >= prev);
            prev = h;
        }
    }

    #[test]
    fn gap_threshold_reference_instance() {
        // 10 arms at q = 1/5 (two with gap 1/5, the rest 1/2) plus the null
        // arm at q = 1, eps < 1/5: the gap threshold drops to 2.
        let mut q = vec![0.2; 10];
        let mut delta = vec![0.2, 0.2, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5];
        q.push(1.0);
        delta.push(0.5);
        let p = HardnessProfile::new(q.clone(), delta, 0.0).unwrap();
        assert_eq!(observation_threshold(&q).unwrap(), 5);
        assert_eq!(gap_threshold(&p), 2);
    }

    #[test]
    fn gap_threshold_singleton() {
        let p = HardnessProfile::new(vec![1.0], vec![0.3], 0.0).unwrap();
        assert_eq!(gap_threshold(&p), 1);
    }

    fn brute_force_gap_threshold(p: &HardnessProfile) -> usize {
        for tau in 1..=p.len() {
            let h: f64 = {
                let mut keys: Vec<f64> = (0..p.len())
                    .map(|i| (p.q()[i] * p.clamp()[i] * p.clamp()[i], p.clamp()[i]))
                    .map(|(k, _)| k)
                    .collect();
                let mut idx: Vec<usize> = (0..p.len()).collect();
                idx.sort_by(|&a, &b| keys[a].partial_cmp(&keys[b]).unwrap().then(a.cmp(&b)));
                keys = idx
                    .iter()
                    .map(|&i| 1.0 / (p.clamp()[i] * p.clamp()[i]))
                    .collect();
                keys.iter().take(tau).sum()
            };
            let under = (0..p.len())
                .filter(|&i| p.q()[i] * p.clamp()[i] * p.clamp()[i] < 1.0 / h)
                .count();
            if under <= tau {
                return tau;
            }
        }
        p.len()
    }

    #[test]
    fn gap_threshold_matches_brute_force_on_random_profiles() {
        let mut rng = Stream::from_seed(2024);
        for _ in 0..50 {
            let n = 2 + rng.gen_range(10) as usize;
            let mut q: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();
            q[0] = 1.0;
            let delta: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();
            let p = HardnessProfile::new(q, delta, 0.05).unwrap();
            assert_eq!(gap_threshold(&p), brute_force_gap_threshold(&p));
        }
    }

    #[test]
    fn gap_threshold_at_most_twice_threshold() {
        let mut rng = Stream::from_seed(77);
        for trial in 0..300 {
            let n = 2 + rng.gen_range(20) as usize;
            let mut q: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();
            q[0] = 1.0;
            let delta: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();
            let eps = [0.0, 0.05, 0.2][trial % 3];
            let p = HardnessProfile::new(q.clone(), delta, eps).unwrap();
            let m = observation_threshold(&q).unwrap();
            assert!(gap_threshold(&p) <= 2 * m, "trial {trial}");
        }
    }

    #[test]
    fn predictor_singleton() {
        let p = HardnessProfile::new(vec![1.0], vec![0.25], 0.0).unwrap();
        let h1 = 1.0 / (0.25 * 0.25);
        let expected = h1 * ln(h1 / 0.1);
        assert!((predict_sample_complexity(&p, 1, 0.1) - expected).abs() < 1e-9);
    }

    #[test]
    fn lower_bound_stays_below_predictor() {
        // valid instance-class profiles keep the lower bound under the
        // upper-bound predictor
        let mut rng = Stream::from_seed(515);
        let mut tested = 0;
        while tested < 50 {
            let n = 5 + rng.gen_range(8) as usize;
            let mut q: Vec<f64> = (0..n).map(|_| 0.2 + 0.6 * rng.next_f64()).collect();
            q[0] = 1.0;
            let delta: Vec<f64> = (0..n).map(|_| 0.02 + 0.1 * rng.next_f64()).collect();
            let p = HardnessProfile::new(q, delta, 0.0).unwrap();
            let Ok(lb) = lower_bound_value(&p, 0, 0.3, 0.45, 0.1) else {
                continue;
            };
            tested += 1;
            assert!(lb <= predict_sample_complexity(&p, n, 0.1) + 1e-9);
        }
    }

    #[test]
    fn predictor_scaling_law() {
        // Doubling every gap divides H by 4.
        let p1 = HardnessProfile::new(vec![0.5, 0.5, 0.5], vec![0.1, 0.2, 0.3], 0.0).unwrap();
        let p2 = HardnessProfile::new(vec![0.5, 0.5, 0.5], vec![0.2, 0.4, 0.6], 0.0).unwrap();
        let m1 = gap_threshold(&p1);
        let m2 = gap_threshold(&p2);
        assert_eq!(m1, m2);
        let h1 = h_r(&p1, m1).unwrap();
        let h2 = h_r(&p2, m2).unwrap();
        assert!((h1 / h2 - 4.0).abs() < 1e-9);
    }

    #[test]
    fn alpha_constants_hand_cases() {
        // m = N: alpha_k = 1/k.
        let p = HardnessProfile::new(vec![1.0; 4], vec![0.1, 0.2, 0.3, 0.4], 0.0).unwrap();
        let c = fixed_budget_constants(&p, 4).unwrap();
        for (k, a) in c.alpha.iter().enumerate() {
            assert!((a - 1.0 / (k + 1) as f64).abs() < 1e-12);
        }
        // N = 2, m = 1: alpha = (1.5, 1).
        let p2 = HardnessProfile::new(vec![1.0, 0.2], vec![0.3, 0.3], 0.0).unwrap();
        let c2 = fixed_budget_constants(&p2, 1).unwrap();
        assert!((c2.alpha[0] - 1.5).abs() < 1e-12);
        assert!((c2.alpha[1] - 1.0).abs() < 1e-12);
        // alpha_k >= 1/k always.
        for (k, a) in c2.alpha.iter().enumerate() {
            assert!(*a >= 1.0 / (k + 1) as f64 - 1e-12);
        }
    }

    #[test]
    fn lower_bound_trivial_and_log_law() {
        // gap threshold 1 -> clamped zero.
        let p = HardnessProfile::new(vec![1.0], vec![0.2], 0.0).unwrap();
        assert_eq!(lower_bound_value(&p, 0, 0.3, 0.45, 0.1).unwrap(), 0.0);
        // halving delta adds ln 2 per unit mass.
        let q = vec![1.0, 0.1, 0.1, 0.1, 0.1];
        let delta = vec![0.2, 0.05, 0.05, 0.1, 0.2];
        let p2 = HardnessProfile::new(q, delta, 0.0).unwrap();
        let v1 = lower_bound_value(&p2, 0, 0.3, 0.45, 0.1).unwrap();
        let v2 = lower_bound_value(&p2, 0, 0.3, 0.45, 0.05).unwrap();
        let mass = v1 / ln(10.0);
        assert!((v2 - v1 - mass * ln(2.0)).abs() < 1e-9);
    }

    #[test]
    fn lower_bound_rejects_out_of_class() {
        let p = HardnessProfile::new(vec![1.0, 0.5], vec![0.4, 0.4], 0.0).unwrap();
        assert!(matches!(
            lower_bound_value(&p, 0, 0.3, 0.45, 0.1),
            Err(ComplexityError::InstanceClass(_))
        ));
    }

    #[test]
    fn thresholds_invariant_under_permutation() {
        let q = vec![1.0, 0.3, 0.7, 0.1];
        let delta = vec![0.2, 0.4, 0.1, 0.3];
        let p = HardnessProfile::new(q.clone(), delta.clone(), 0.1).unwrap();
        let perm = [2usize, 0, 3, 1];
        let qp: Vec<f64> = perm.iter().map(|&i| q[i]).collect();
        let dp: Vec<f64> = perm.iter().map(|&i| delta[i]).collect();
        let pp = HardnessProfile::new(qp.clone(), dp, 0.1).unwrap();
        assert_eq!(
            observation_threshold(&q).unwrap(),
            observation_threshold(&qp).unwrap()
        );
        assert_eq!(gap_threshold(&p), gap_threshold(&pp));
    }
}
