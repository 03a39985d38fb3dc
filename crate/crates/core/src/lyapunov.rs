//! Energies, anchor sequences and their one-step recursions, rate slopes,
//! summability statistics and the extended descent lemma.
//!
//! All quantities are computed after the fact from a [`Trace`]. A NAG trace
//! and the RAG trace with `γ_k = α_{k+1}` carry the same `y_k` and `w_k = x_{k+1}`,
//! so every function here accepts either.

use crate::methods::{ravine_velocity, Residual, Trace};
use crate::problems::Problem;
use crate::schedules::TSequence;
use crate::{Error, Result, Vector};

/// `z_k = x_{k−1} + t_k(x_k − x_{k−1})`, `1 ≤ k ≤ K+1`.
pub fn nag_anchor(trace: &Trace, t: &TSequence, k: usize) -> Result<Vector> {
    if k == 0 || k > trace.len() + 1 {
        return Err(Error::IndexOutOfRange {
            k,
            lo: 1,
            hi: trace.len() + 1,
        });
    }
    let prev = trace.x(k - 1)?;
    let cur = trace.x(k)?;
    Ok(prev + (cur - prev) * t.t(k)?)
}

/// Defect of `z_{k+1} − z_k = −s_k t_{k+1}(∇f(y_k) + e_k)`, `1 ≤ k ≤ K`.
pub fn nag_anchor_residual(trace: &Trace, t: &TSequence, k: usize) -> Result<Residual> {
    let rec = trace.record(k)?;
    let z = nag_anchor(trace, t, k)?;
    let z_next = nag_anchor(trace, t, k + 1)?;
    let step = rec.noisy_gradient() * (rec.s * t.t(k + 1)?);
    let norm = (&z_next - &z + &step).norm();
    let scale = z.norm().max(z_next.norm()).max(step.norm());
    Ok(Residual { norm, scale })
}

/// `V_k = s_k t_k² (f(x_k) − min f) + ½ dist(z_k)²`, `1 ≤ k ≤ K`.
pub fn energy_v(trace: &Trace, t: &TSequence, problem: &Problem, k: usize) -> Result<f64> {
    let s = trace.record(k)?.s;
    let tk = t.t(k)?;
    let gap = problem.gap(trace.x(k)?)?;
    let dist = problem.distance_to_solutions(&nag_anchor(trace, t, k)?)?;
    Ok(s * tk * tk * gap + 0.5 * dist * dist)
}

/// `W_k = s_k (f(x_k) − min f) + ½‖x_k − x_{k−1}‖²`, `1 ≤ k ≤ K`.
pub fn energy_w(trace: &Trace, problem: &Problem, k: usize) -> Result<f64> {
    let s = trace.record(k)?.s;
    let x = trace.x(k)?;
    let step = (x - trace.x(k - 1)?).norm();
    Ok(s * problem.gap(x)? + 0.5 * step * step)
}

fn constant_h(trace: &Trace) -> Result<f64> {
    Ok(trace.constant_step().ok_or(Error::NonConstantStep)?.sqrt())
}

/// Ravine anchor `z_k = y_k + h(t_{k+1} − 1)(v_k + h(∇f(y_{k−1}) + e_{k−1}))`, `1 ≤ k ≤ K`.
/// The bracket vanishes at `k = 1` (`w_0 = y_1`).
pub fn ravine_anchor(trace: &Trace, t: &TSequence, k: usize) -> Result<Vector> {
    let h = constant_h(trace)?;
    let u = ravine_velocity(trace, k, h)?;
    Ok(trace.y(k)? + u * (h * (t.t(k + 1)? - 1.0)))
}

/// Ravine anchor and `E_k = h²(t_{k+1} − 1)t_{k+1}(f(y_{k−1}) − min f) + ½ dist(z_k)²`, `2 ≤ k ≤ K`.
pub fn ravine_anchor_and_e(
    trace: &Trace,
    t: &TSequence,
    problem: &Problem,
    k: usize,
) -> Result<(Vector, f64)> {
    if k < 2 || k > trace.len() {
        return Err(Error::IndexOutOfRange {
            k,
            lo: 2,
            hi: trace.len(),
        });
    }
    let h = constant_h(trace)?;
    let z = ravine_anchor(trace, t, k)?;
    let tn = t.t(k + 1)?;
    let dist = problem.distance_to_solutions(&z)?;
    let e = h * h * (tn - 1.0) * tn * problem.gap(trace.y(k - 1)?)? + 0.5 * dist * dist;
    Ok((z, e))
}

/// Defect of `z_{k+1} − z_k = −h² t_{k+1}(∇f(y_k) + e_k)`, `1 ≤ k < K`.
pub fn ravine_anchor_residual(trace: &Trace, t: &TSequence, k: usize) -> Result<Residual> {
    let h = constant_h(trace)?;
    let z = ravine_anchor(trace, t, k)?;
    let z_next = ravine_anchor(trace, t, k + 1)?;
    let step = trace.record(k)?.noisy_gradient() * (h * h * t.t(k + 1)?);
    let norm = (&z_next - &z + &step).norm();
    let scale = z.norm().max(z_next.norm()).max(step.norm());
    Ok(Residual { norm, scale })
}

/// Least-squares slope of `log a_k` against `log k` on `[k_lo, k_hi]`, where
/// `series[k−1] = a_k`. Values below `1e−300` are floored.
pub fn rate_slope(series: &[f64], k_lo: usize, k_hi: usize) -> Result<f64> {
    if k_lo == 0 || k_hi > series.len() {
        return Err(Error::IndexOutOfRange {
            k: k_hi,
            lo: 1,
            hi: series.len(),
        });
    }
    let points: Vec<(f64, f64)> = (k_lo..=k_hi).map(|k| (k as f64, series[k - 1])).collect();
    rate_slope_points(&points)
}

/// As [`rate_slope`] for explicit `(k, a_k)` pairs.
pub fn rate_slope_points(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 10 {
        return Err(Error::WindowTooShort {
            points: points.len(),
        });
    }
    let n = points.len() as f64;
    let logs: Vec<(f64, f64)> = points
        .iter()
        .map(|&(k, a)| (k.ln(), a.max(1e-300).ln()))
        .collect();
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(x, y) in &logs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    Ok(sxy / sxx)
}

/// Default rate window: the last decade `[K/10, K]`.
pub fn default_window(k: usize) -> (usize, usize) {
    ((k / 10).max(1), k)
}

/// Partial sums `S_K = Σ_{k≤K} w_k a_k`.
pub fn weighted_partial_sums(series: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
    if series.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: series.len(),
            got: weights.len(),
        });
    }
    let mut acc = 0.0;
    Ok(series
        .iter()
        .zip(weights)
        .map(|(a, w)| {
            acc += w * a;
            acc
        })
        .collect())
}

/// `(S_{2K} − S_K)/S_{2K}` from partial sums (`sums[k−1] = S_k`); 0 for an all-zero series.
pub fn plateau_statistic(sums: &[f64], k: usize) -> Result<f64> {
    if k == 0 || 2 * k > sums.len() {
        return Err(Error::IndexOutOfRange {
            k: 2 * k,
            lo: 2,
            hi: sums.len(),
        });
    }
    plateau_between(sums, k, 2 * k)
}

/// `(S_{K2} − S_{K1})/S_{K2}`.
pub fn plateau_between(sums: &[f64], k1: usize, k2: usize) -> Result<f64> {
    if k1 == 0 || k1 > k2 || k2 > sums.len() {
        return Err(Error::IndexOutOfRange {
            k: k2,
            lo: k1.max(1),
            hi: sums.len(),
        });
    }
    let (a, b) = (sums[k1 - 1], sums[k2 - 1]);
    Ok(if b == 0.0 { 0.0 } else { (b - a) / b })
}

/// Summability verdict threshold on the plateau statistic.
pub const PLATEAU_THRESHOLD: f64 = 0.05;

/// Right side minus left side of the extended descent lemma
/// `g(y − s∇g(y)) ≤ g(x) + ⟨∇g(y), y−x⟩ − (s/2)‖∇g(y)‖² − (s/2)‖∇g(x)−∇g(y)‖²`.
pub fn descent_margin(problem: &Problem, s: f64, x: &Vector, y: &Vector) -> Result<f64> {
    Ok(descent_terms(problem, s, x, y)?.margin())
}

/// The individual terms of the descent lemma, for scaling the margin.
#[derive(Debug, Clone, Copy)]
pub struct DescentTerms {
    pub gap_x: f64,
    pub inner: f64,
    pub grad_sq: f64,
    pub diff_sq: f64,
    pub gap_step: f64,
}

impl DescentTerms {
    pub fn margin(&self) -> f64 {
        self.gap_x + self.inner - self.grad_sq - self.diff_sq - self.gap_step
    }

    pub fn scale(&self) -> f64 {
        self.gap_x.abs() + self.inner.abs() + self.grad_sq + self.diff_sq + self.gap_step.abs()
    }
}

pub fn descent_terms(problem: &Problem, s: f64, x: &Vector, y: &Vector) -> Result<DescentTerms> {
    let bound = 1.0 / problem.lipschitz();
    if !(s > 0.0 && s <= bound * (1.0 + 1e-12)) {
        return Err(Error::Contract(format!("descent lemma needs 0 < s <= 1/L = {bound}, got {s}")));
    }
    let gx = problem.gradient(x)?;
    let gy = problem.gradient(y)?;
    let stepped = y - &gy * s;
    // f values enter only through differences, so gaps avoid cancellation.
    Ok(DescentTerms {
        gap_x: problem.gap(x)?,
        inner: gy.dot(&(y - x)),
        grad_sq: 0.5 * s * gy.norm_squared(),
        diff_sq: 0.5 * s * (&gx - &gy).norm_squared(),
        gap_step: problem.gap(&stepped)?,
    })
}

/// Per-iteration diagnostics of a trace. Entries that are undefined at a
/// given `k` (such as `E_1`, or `E` under a varying step) are `None`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiagnosticsSeries {
    pub k: Vec<usize>,
    pub v: Vec<Option<f64>>,
    pub w: Vec<Option<f64>>,
    pub e: Vec<Option<f64>>,
    pub gap: Vec<f64>,
    pub grad_norm: Vec<f64>,
    pub step_norm: Vec<f64>,
    /// `Σ t_{k+1}² ‖∇f(y_k)‖²`.
    pub sum_t2_grad2: Vec<f64>,
    /// `Σ s_k t_{k+1} (f(y_k) − min f)`.
    pub sum_st_gap: Vec<f64>,
}

/// Which energies to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnergySelection {
    pub v: bool,
    pub w: bool,
    pub e: bool,
}

impl Default for EnergySelection {
    fn default() -> Self {
        Self {
            v: true,
            w: true,
            e: true,
        }
    }
}

pub fn diagnostics(
    trace: &Trace,
    t: &TSequence,
    problem: &Problem,
    which: EnergySelection,
) -> Result<DiagnosticsSeries> {
    let constant = trace.constant_step().is_some();
    let mut out = DiagnosticsSeries::default();
    let (mut s1, mut s2) = (0.0, 0.0);
    for rec in &trace.records {
        let k = rec.k;
        let tn = t.t(k + 1)?;
        out.k.push(k);
        out.v.push(if which.v { Some(energy_v(trace, t, problem, k)?) } else { None });
        out.w.push(if which.w { Some(energy_w(trace, problem, k)?) } else { None });
        out.e.push(if which.e && constant && k >= 2 {
            Some(ravine_anchor_and_e(trace, t, problem, k)?.1)
        } else {
            None
        });
        out.gap.push(rec.gap);
        out.grad_norm.push(rec.grad_norm);
        out.step_norm.push(rec.step_norm);
        s1 += tn * tn * rec.grad_norm * rec.grad_norm;
        s2 += rec.s * tn * problem.gap(&rec.y)?;
        out.sum_t2_grad2.push(s1);
        out.sum_st_gap.push(s2);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::methods::{run_nag, run_rag, Method, StepBound};
    use crate::noise::{NoiseModel, SigmaSchedule};
    use crate::problems::{logistic_data, low_rank_design, Problem};
    use crate::schedules::Schedule;
    use crate::Matrix;
    use proptest::prelude::*;

    fn v1(x: f64) -> Vector {
        Vector::from_vec(vec![x])
    }

    fn half_square() -> Problem {
        Problem::quadratic(Matrix::identity(1, 1), Vector::zeros(1)).unwrap()
    }

    fn manual_nag(xs: &[f64], s: f64) -> Trace {
        // NAG trace with start xs[0] and x_{k+1} = xs[k]; y/e are irrelevant here
        use crate::methods::Record;
        let records = xs[1..]
            .iter()
            .enumerate()
            .map(|(i, &x)| Record {
                k: i + 1,
                x: None,
                y: v1(x),
                w: v1(x),
                e: v1(0.0),
                s,
                coef: 0.0,
                gap: 0.0,
                grad_norm: 0.0,
                step_norm: 0.0,
            })
            .collect();
        Trace {
            method: Method::Nag,
            config_hash: String::new(),
            seed: 0,
            start: v1(xs[0]),
            records,
        }
    }

    #[test]
    fn anchor_examples() {
        let const2 = TSequence::new(Schedule::constant(0.5).unwrap());
        // x_1 = 0, x_2 = 1: z_2 = x_1 + 2 (x_2 − x_1) = 2
        let tr = manual_nag(&[0.0, 1.0, 1.0], 1.0);
        assert_eq!(nag_anchor(&tr, &const2, 2).unwrap(), v1(2.0));
        // z_1 = x_0 = x_1
        assert_eq!(nag_anchor(&tr, &const2, 1).unwrap(), v1(0.0));
        // x_2 = x_3 gives z_3 = x_3
        assert_eq!(nag_anchor(&tr, &const2, 3).unwrap(), v1(1.0));
        assert!(nag_anchor(&tr, &const2, 5).is_err());
    }

    #[test]
    fn energy_examples() {
        let p = half_square();
        let const2 = TSequence::new(Schedule::constant(0.5).unwrap());
        // x_1 = x_2 = 1, s = 1, t = 2: V_2 = 1·4·0.5 + 0.5
        let tr = manual_nag(&[1.0, 1.0, 1.0], 1.0);
        assert_eq!(energy_v(&tr, &const2, &p, 2).unwrap(), 2.5);
        // x_1 = 0, x_2 = 1, s = 0.5: W_2 = 0.25 + 0.5
        let tr = manual_nag(&[0.0, 1.0, 1.0], 0.5);
        assert_eq!(energy_w(&tr, &p, 2).unwrap(), 0.75);
        let tr = manual_nag(&[0.0, 0.0, 0.0], 0.5);
        assert_eq!(energy_w(&tr, &p, 2).unwrap(), 0.0);
        assert_eq!(energy_v(&tr, &const2, &p, 2).unwrap(), 0.0);
    }

    #[test]
    fn ravine_anchor_reduces_to_y_without_velocity() {
        let p = half_square();
        let sched = Schedule::nesterov_offset(3.0).unwrap();
        let t = TSequence::new(sched);
        let tr = run_rag(&p, v1(2.0), 5, |k| sched.alpha(k + 1), |_| 1.0, &NoiseModel::none(1), StepBound::Enforce)
            .unwrap();
        assert_eq!(ravine_anchor(&tr, &t, 1).unwrap(), v1(2.0));
    }

    #[test]
    fn anchor_residual_sensitivity() {
        let p = Problem::quadratic_from_spectrum(&[1.0, 0.3, 0.01], Some(1), Vector::from_vec(vec![0.5, 0.0, -1.0]))
            .unwrap();
        let sched = Schedule::nesterov_offset(3.0).unwrap();
        let t = TSequence::new(sched);
        let noise = NoiseModel::gaussian(3, SigmaSchedule::Constant(0.1), 2);
        let s = 1.0 / p.lipschitz();
        let tr = run_nag(&p, Vector::from_element(3, 1.0), 200, |k| sched.alpha(k), |_| s, &noise, StepBound::Enforce)
            .unwrap();
        for k in 1..=200 {
            assert!(nag_anchor_residual(&tr, &t, k).unwrap().relative() <= 1e-9);
        }
        // t_k corrupted by +1 in both anchors
        let k = 50;
        let rec = tr.record(k).unwrap();
        let anchor = |j: usize| {
            let prev = tr.x(j - 1).unwrap();
            prev + (tr.x(j).unwrap() - prev) * (t.t(j).unwrap() + 1.0)
        };
        let step = rec.noisy_gradient() * (rec.s * t.t(k + 1).unwrap());
        let corrupted = (anchor(k + 1) - anchor(k) + &step).norm();
        let sg = (rec.noisy_gradient() * rec.s).norm();
        assert!(corrupted > 0.1 * sg && corrupted < 10.0 * sg, "{corrupted} vs {sg}");
    }

    #[test]
    fn rate_slope_examples() {
        let a: Vec<f64> = (1..=1000).map(|k| 1.0 / (k * k) as f64).collect();
        assert!((rate_slope(&a, 10, 1000).unwrap() + 2.0).abs() <= 1e-12);
        let b: Vec<f64> = (1..=1000).map(|k| 5.0 / (k as f64).powf(0.8)).collect();
        assert!((rate_slope(&b, 10, 1000).unwrap() + 0.8).abs() <= 1e-12);
        assert!(matches!(rate_slope(&a, 10, 15), Err(Error::WindowTooShort { points: 6 })));
    }

    #[test]
    fn partial_sum_examples() {
        let n = 20_000;
        let basel: Vec<f64> = (1..=n).map(|k| 1.0 / (k * k) as f64).collect();
        let ones = vec![1.0; n];
        let s = weighted_partial_sums(&basel, &ones).unwrap();
        assert!((s[n - 1] - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-4);
        assert!(plateau_statistic(&s, 10_000).unwrap() <= 1e-4);

        let harmonic: Vec<f64> = (1..=n).map(|k| 1.0 / k as f64).collect();
        let h = weighted_partial_sums(&harmonic, &ones).unwrap();
        let stat = plateau_statistic(&h, 10_000).unwrap();
        let approx = 2f64.ln() / (20_000f64).ln();
        assert!((stat - approx).abs() < 0.01, "{stat} vs {approx}");
        assert!(stat > PLATEAU_THRESHOLD);

        let zeros = weighted_partial_sums(&vec![0.0; 100], &vec![1.0; 100]).unwrap();
        assert!(zeros.iter().all(|&v| v == 0.0));
        assert_eq!(plateau_statistic(&zeros, 50).unwrap(), 0.0);
        assert!(weighted_partial_sums(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn descent_margin_examples() {
        let p = half_square();
        assert_eq!(descent_margin(&p, 1.0, &v1(0.0), &v1(1.0)).unwrap(), 0.0);
        assert_eq!(descent_margin(&p, 1.0, &v1(0.7), &v1(0.7)).unwrap(), 0.0);
        assert!(descent_margin(&p, 2.0, &v1(0.0), &v1(1.0)).is_err());
    }

    fn problem_kinds() -> Vec<Problem> {
        let q = Problem::quadratic_from_spectrum(&[4.0, 1.0, 0.1], Some(7), Vector::from_vec(vec![1.0, -1.0, 0.5]))
            .unwrap();
        let ls = Problem::least_squares(low_rank_design(8, 3, 2, 3), Vector::from_element(8, 0.5)).unwrap();
        let (d, l) = logistic_data(50, 3, 8);
        let lg = Problem::logistic(d, l, 0.05).unwrap();
        vec![q, ls, lg]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn descent_margin_nonnegative(
            x in prop::collection::vec(-3.0f64..3.0, 3),
            y in prop::collection::vec(-3.0f64..3.0, 3),
            half in any::<bool>(),
        ) {
            for p in problem_kinds() {
                let s = if half { 0.5 } else { 1.0 } / p.lipschitz();
                let terms = descent_terms(&p, s, &Vector::from_vec(x.clone()), &Vector::from_vec(y.clone())).unwrap();
                prop_assert!(terms.margin() >= -1e-10 * terms.scale().max(1.0));
            }
        }

        #[test]
        fn energies_nonnegative(seed in 0u64..1000, alpha in 3.0f64..8.0) {
            let p = &problem_kinds()[0];
            let sched = Schedule::nesterov_offset(alpha).unwrap();
            let t = TSequence::new(sched);
            let noise = NoiseModel::gaussian(3, SigmaSchedule::Constant(0.5), seed);
            let s = 1.0 / p.lipschitz();
            let tr = run_rag(p, Vector::from_element(3, 2.0), 40, |k| sched.alpha(k + 1), |_| s, &noise, StepBound::Enforce).unwrap();
            let d = diagnostics(&tr, &t, p, EnergySelection::default()).unwrap();
            for i in 0..d.k.len() {
                prop_assert!(d.v[i].unwrap() >= 0.0);
                prop_assert!(d.w[i].unwrap() >= 0.0);
                if let Some(e) = d.e[i] { prop_assert!(e >= 0.0); }
                prop_assert!(d.gap[i] >= 0.0);
            }
            prop_assert!(d.e[0].is_none());
        }
    }

    #[test]
    fn ravine_recursion_and_constitutive_form_hold() {
        for p in problem_kinds() {
            let sched = Schedule::nesterov_offset(4.0).unwrap();
            let t = TSequence::new(sched);
            let noise = NoiseModel::gaussian(3, SigmaSchedule::Polynomial { sigma0: 0.3, p: 1.0 }, 5);
            let s = 1.0 / p.lipschitz();
            let tr = run_rag(&p, Vector::from_element(3, 1.5), 300, |k| sched.alpha(k + 1), |_| s, &noise, StepBound::Enforce)
                .unwrap();
            for k in 1..300 {
                assert!(ravine_anchor_residual(&tr, &t, k).unwrap().relative() <= 1e-9);
            }
            for r in crate::methods::constitutive_residuals(&tr, &t).unwrap() {
                assert!(r.relative() <= 1e-9, "{r:?}");
            }
        }
    }
}
