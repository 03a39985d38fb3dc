//! Iteration-indexed zero-mean gradient errors.
//!
//! The error at iteration `k` is a pure function of `(seed, k)`: each `k` gets
//! its own ChaCha stream, so NAG and RAG runs sharing a seed see the same
//! realizations regardless of the order in which they are requested.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::Vector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseFamily {
    None,
    GaussianIsotropic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaSchedule {
    Constant(f64),
    /// `σ_k = σ₀ / kᵖ`.
    Polynomial { sigma0: f64, p: f64 },
}

impl SigmaSchedule {
    pub fn at(&self, k: usize) -> f64 {
        match *self {
            SigmaSchedule::Constant(s) => s,
            SigmaSchedule::Polynomial { sigma0, p } => sigma0 / (k as f64).powf(p),
        }
    }

    /// Decay exponent `p` (0 for a constant schedule).
    pub fn exponent(&self) -> f64 {
        match *self {
            SigmaSchedule::Constant(_) => 0.0,
            SigmaSchedule::Polynomial { p, .. } => p,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    pub family: NoiseFamily,
    pub schedule: SigmaSchedule,
    pub seed: u64,
    pub dim: usize,
}

impl NoiseModel {
    pub fn none(dim: usize) -> Self {
        Self {
            family: NoiseFamily::None,
            schedule: SigmaSchedule::Constant(0.0),
            seed: 0,
            dim,
        }
    }

    pub fn gaussian(dim: usize, schedule: SigmaSchedule, seed: u64) -> Self {
        Self {
            family: NoiseFamily::GaussianIsotropic,
            schedule,
            seed,
            dim,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn is_none(&self) -> bool {
        self.family == NoiseFamily::None || matches!(self.schedule, SigmaSchedule::Constant(s) if s == 0.0)
    }

    /// Scheduled `σ_k`; zero for the `none` family.
    pub fn sigma(&self, k: usize) -> f64 {
        assert!(k >= 1, "noise is indexed from k = 1");
        match self.family {
            NoiseFamily::None => 0.0,
            NoiseFamily::GaussianIsotropic => self.schedule.at(k),
        }
    }

    /// The error `e_k`. Per-coordinate standard deviation is `σ_k/√dim`.
    pub fn sample_error(&self, k: usize) -> Vector {
        let sigma = self.sigma(k);
        if sigma == 0.0 {
            return Vector::zeros(self.dim);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(k as u64);
        let scale = sigma / (self.dim as f64).sqrt();
        Vector::from_fn(self.dim, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            scale * z
        })
    }
}

/// Whether `Σ s_k t_k σ_k < ∞` for `s_k ∝ k^{−d}`, `t_k ∝ kʳ`, `σ_k ∝ k^{−p}`.
pub fn weighted_sigma_summable(p: f64, d: f64, r: f64) -> bool {
    p + d - r > 1.0
}

/// Whether `Σ s_k² t_k² σ_k² < ∞` under the same power laws.
pub fn weighted_sigma_square_summable(p: f64, d: f64, r: f64) -> bool {
    2.0 * (p + d - r) > 1.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn none_is_zero() {
        let m = NoiseModel::none(3);
        for k in [1, 7, 1000] {
            assert_eq!(m.sample_error(k), Vector::zeros(3));
            assert_eq!(m.sigma(k), 0.0);
        }
    }

    #[test]
    fn sigma_examples() {
        let c = NoiseModel::gaussian(2, SigmaSchedule::Constant(0.5), 1);
        assert_eq!(c.sigma(7), 0.5);
        let p = NoiseModel::gaussian(2, SigmaSchedule::Polynomial { sigma0: 1.0, p: 2.0 }, 1);
        assert!((p.sigma(10) - 0.01).abs() < 1e-18);
    }

    #[test]
    fn empirical_mean_is_small() {
        let dim = 2;
        let n = 100_000;
        let mut mean = Vector::zeros(dim);
        for seed in 0..n {
            mean += NoiseModel::gaussian(dim, SigmaSchedule::Constant(1.0), seed).sample_error(5);
        }
        mean /= n as f64;
        assert!(mean.norm() <= 0.02, "{}", mean.norm());
    }

    #[test]
    fn empirical_second_moment() {
        let dim = 3;
        let n = 100_000;
        let sched = SigmaSchedule::Polynomial { sigma0: 2.0, p: 1.0 };
        let mut acc = 0.0;
        for seed in 0..n {
            acc += NoiseModel::gaussian(dim, sched, seed).sample_error(4).norm_squared();
        }
        let m2 = acc / n as f64;
        assert!((m2 - 0.25).abs() <= 0.01, "{m2}");
    }

    #[test]
    fn classifier_matches_partial_sums() {
        // t_k = k^r, s_k = k^{-d}; compare growth of partial sums over k ≤ 10⁶.
        let cases = [(2.0, 0.0, 0.5), (1.2, 0.0, 0.5), (0.8, 0.0, 0.0), (0.5, 1.0, 0.3), (3.0, 0.0, 1.0)];
        for (p, d, r) in cases {
            let term = |k: f64| k.powf(r - d - p);
            let mut s_half = 0.0;
            let mut s_full = 0.0;
            for k in 1..=1_000_000usize {
                let v = term(k as f64);
                if k <= 500_000 {
                    s_half += v;
                }
                s_full += v;
            }
            let plateau = (s_full - s_half) / s_full;
            let numeric = plateau < 0.05;
            assert_eq!(weighted_sigma_summable(p, d, r), numeric, "p={p} d={d} r={r}");
        }
    }

    proptest! {
        #[test]
        fn order_independent(seed in any::<u64>(), k1 in 1usize..10_000, k2 in 1usize..10_000) {
            let a = NoiseModel::gaussian(4, SigmaSchedule::Constant(1.0), seed);
            let b = NoiseModel::gaussian(4, SigmaSchedule::Constant(1.0), seed);
            let a1 = a.sample_error(k1);
            let a2 = a.sample_error(k2);
            let b2 = b.sample_error(k2);
            let b1 = b.sample_error(k1);
            prop_assert_eq!(a1, b1);
            prop_assert_eq!(a2, b2);
        }

        #[test]
        fn distinct_iterations_differ(seed in any::<u64>(), k in 1usize..10_000) {
            let a = NoiseModel::gaussian(4, SigmaSchedule::Constant(1.0), seed);
            prop_assert_ne!(a.sample_error(k), a.sample_error(k + 1));
        }
    }
}
