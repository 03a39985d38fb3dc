//! Inertial gradient ODEs and their comparison with Ravine iterates.
//!
//! * IGS: `ẍ + γ(t)ẋ + ∇f(x) = 0`.
//! * High resolution: `ÿ + γ(1 + (√s/2)γ)ẏ + √s ∇²f(y)ẏ + (1 + (√s/2)γ)∇f(y) = 0`.
//!
//! Both are integrated with fixed-step classical RK4 on the first-order system.

use crate::methods::{rag_step, Method, RagState, StepBound, Trace};
use crate::noise::NoiseModel;
use crate::problems::Problem;
use crate::{Error, Result, Vector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DampingKind {
    /// `γ(t) = α/t`.
    AlphaOverT(f64),
    Constant(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampingFunction {
    pub kind: DampingKind,
    pub t_min: f64,
}

impl DampingFunction {
    pub fn alpha_over_t(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::Contract(format!("damping alpha must be positive, got {alpha}")));
        }
        Ok(Self {
            kind: DampingKind::AlphaOverT(alpha),
            t_min: 1.0,
        })
    }

    pub fn constant(gamma0: f64) -> Result<Self> {
        if !(gamma0 > 0.0) {
            return Err(Error::Contract(format!("damping must be positive, got {gamma0}")));
        }
        Ok(Self {
            kind: DampingKind::Constant(gamma0),
            t_min: 1.0,
        })
    }

    pub fn with_t_min(mut self, t_min: f64) -> Self {
        self.t_min = t_min;
        self
    }

    pub fn gamma(&self, t: f64) -> f64 {
        match self.kind {
            DampingKind::AlphaOverT(a) => a / t,
            DampingKind::Constant(g) => g,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub tau: Vec<f64>,
    pub positions: Vec<Vector>,
    pub velocities: Vec<Vector>,
    pub method: &'static str,
    pub h_int: f64,
}

impl Trajectory {
    /// Position at `t`, linearly interpolated between grid points.
    pub fn position_at(&self, t: f64) -> Result<Vector> {
        let (t0, t1) = (self.tau[0], *self.tau.last().expect("non-empty grid"));
        let slack = 1e-9 * self.h_int;
        if t < t0 - slack || t > t1 + slack {
            return Err(Error::GridCoverage(format!("time {t} outside [{t0}, {t1}]")));
        }
        let x = ((t - t0) / self.h_int).max(0.0);
        let i = (x.floor() as usize).min(self.tau.len() - 1);
        if i + 1 >= self.tau.len() {
            return Ok(self.positions[i].clone());
        }
        let frac = ((t - self.tau[i]) / self.h_int).clamp(0.0, 1.0);
        if frac == 0.0 {
            return Ok(self.positions[i].clone());
        }
        Ok(&self.positions[i] * (1.0 - frac) + &self.positions[i + 1] * frac)
    }

    /// Trajectory CSV: `tau, y_1..y_d, v_1..v_d`.
    pub fn to_csv(&self) -> String {
        let d = self.positions.first().map_or(0, |p| p.len());
        let mut out = String::from("tau");
        for i in 1..=d {
            out.push_str(&format!(",y_{i}"));
        }
        for i in 1..=d {
            out.push_str(&format!(",v_{i}"));
        }
        out.push('\n');
        for ((t, y), v) in self.tau.iter().zip(&self.positions).zip(&self.velocities) {
            out.push_str(&format!("{t:.16e}"));
            for c in y.iter().chain(v.iter()) {
                out.push_str(&format!(",{c:.16e}"));
            }
            out.push('\n');
        }
        out
    }
}

fn rk4(
    accel: impl Fn(f64, &Vector, &Vector) -> Vector,
    x0: Vector,
    v0: Vector,
    t0: f64,
    h: f64,
    t_end: f64,
    method: &'static str,
) -> Result<Trajectory> {
    if !(h > 0.0) {
        return Err(Error::Contract(format!("integration step must be positive, got {h}")));
    }
    if !(t_end > t0) {
        return Err(Error::Contract(format!("horizon {t_end} must exceed start {t0}")));
    }
    let steps = ((t_end - t0) / h - 1e-9).ceil() as usize;
    let mut tau = Vec::with_capacity(steps + 1);
    let mut positions = Vec::with_capacity(steps + 1);
    let mut velocities = Vec::with_capacity(steps + 1);
    let (mut x, mut v) = (x0, v0);
    tau.push(t0);
    positions.push(x.clone());
    velocities.push(v.clone());
    for i in 0..steps {
        let t = t0 + i as f64 * h;
        let a1 = accel(t, &x, &v);
        let (x2, v2) = (&x + &v * (0.5 * h), &v + &a1 * (0.5 * h));
        let a2 = accel(t + 0.5 * h, &x2, &v2);
        let (x3, v3) = (&x + &v2 * (0.5 * h), &v + &a2 * (0.5 * h));
        let a3 = accel(t + 0.5 * h, &x3, &v3);
        let (x4, v4) = (&x + &v3 * h, &v + &a3 * h);
        let a4 = accel(t + h, &x4, &v4);
        x += (&v + &v2 * 2.0 + &v3 * 2.0 + &v4) * (h / 6.0);
        v += (&a1 + &a2 * 2.0 + &a3 * 2.0 + &a4) * (h / 6.0);
        let size = x.norm().max(v.norm());
        if !(size <= 1e12) {
            return Err(Error::Numeric {
                k: i + 1,
                reason: format!("trajectory blow-up at t = {}", t + h),
            });
        }
        tau.push(t0 + (i + 1) as f64 * h);
        positions.push(x.clone());
        velocities.push(v.clone());
    }
    Ok(Trajectory {
        tau,
        positions,
        velocities,
        method,
        h_int: h,
    })
}

/// Integrate the IGS from `damping.t_min` to `t_end`.
pub fn integrate_igs(
    problem: &Problem,
    damping: &DampingFunction,
    x0: Vector,
    v0: Vector,
    h_int: f64,
    t_end: f64,
) -> Result<Trajectory> {
    check_dims(problem, &x0, &v0)?;
    let accel = |t: f64, x: &Vector, v: &Vector| -(v * damping.gamma(t)) - problem.grad(x);
    rk4(accel, x0, v0, damping.t_min, h_int, t_end, "rk4-igs")
}

/// Integrate the high-resolution ODE from `damping.t_min` to `t_end`.
pub fn integrate_highres(
    problem: &Problem,
    damping: &DampingFunction,
    s: f64,
    y0: Vector,
    v0: Vector,
    h_int: f64,
    t_end: f64,
) -> Result<Trajectory> {
    check_dims(problem, &y0, &v0)?;
    let bound = 1.0 / problem.lipschitz();
    if !(s > 0.0 && s <= bound * (1.0 + 1e-12)) {
        return Err(Error::Contract(format!("need 0 < s <= 1/L = {bound}, got {s}")));
    }
    let h = s.sqrt();
    let accel = |t: f64, y: &Vector, v: &Vector| {
        let g = damping.gamma(t);
        let c = 1.0 + 0.5 * h * g;
        -(v * (g * c)) - problem.hess_vec(y, v) * h - problem.grad(y) * c
    };
    rk4(accel, y0, v0, damping.t_min, h_int, t_end, "rk4-highres")
}

fn check_dims(problem: &Problem, x: &Vector, v: &Vector) -> Result<()> {
    for got in [x.len(), v.len()] {
        if got != problem.dim() {
            return Err(Error::DimensionMismatch {
                expected: problem.dim(),
                got,
            });
        }
    }
    Ok(())
}

/// `γ_k = max(0, 1 − hγ((k+1)h))`.
pub fn discretize_gamma(damping: &DampingFunction, h: f64, k: usize) -> Result<f64> {
    let t = (k as f64 + 1.0) * h;
    if !(h > 0.0) || t < damping.t_min {
        return Err(Error::Contract(format!(
            "discretization needs h > 0 and (k+1)h >= {}, got h={h}, k={k}",
            damping.t_min
        )));
    }
    Ok((1.0 - h * damping.gamma(t)).max(0.0))
}

/// `prox_{sf}(x + (1 − gamma_h)(x − x_prev))`.
pub fn inertial_prox_step(
    problem: &Problem,
    s: f64,
    gamma_h: f64,
    x: &Vector,
    x_prev: &Vector,
) -> Result<Vector> {
    let point = x + (x - x_prev) * (1.0 - gamma_h);
    problem.prox(s, &point)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorProfile {
    pub k: Vec<usize>,
    pub tau: Vec<f64>,
    pub error: Vec<f64>,
    pub sup: f64,
}

/// `‖y_k − Y(τ_k)‖` with `τ_k = (k + c)h`, using each record's own `k`.
pub fn compare_discrete_continuous(
    trace: &Trace,
    trajectory: &Trajectory,
    offset_c: f64,
    h: f64,
) -> Result<ErrorProfile> {
    let mut profile = ErrorProfile {
        k: Vec::with_capacity(trace.len()),
        tau: Vec::with_capacity(trace.len()),
        error: Vec::with_capacity(trace.len()),
        sup: 0.0,
    };
    for rec in &trace.records {
        let tau = (rec.k as f64 + offset_c) * h;
        let err = (&rec.y - trajectory.position_at(tau)?).norm();
        profile.sup = profile.sup.max(err);
        profile.k.push(rec.k);
        profile.tau.push(tau);
        profile.error.push(err);
    }
    Ok(profile)
}

/// Which continuous model to compare against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OdeModel {
    Igs,
    HighRes,
}

/// Integration step aligned with the discrete grid: `h/n` with
/// `n = max(10, ⌈h/0.01⌉)`, so `h_int ≤ min(0.01, h/10)` up to rounding of `n`.
pub fn aligned_step(h: f64) -> f64 {
    let n = ((h / 0.01).ceil() as usize).max(10);
    h / n as f64
}

/// Constant-step RAG with `γ_k` from [`discretize_gamma`], started at the first
/// `k` with `τ_k = (k + c)h ≥ t_min` and run while `τ_k ≤ t_end`. Records carry
/// their true iteration index.
pub fn discrete_ravine(
    problem: &Problem,
    damping: &DampingFunction,
    s: f64,
    y0: Vector,
    offset_c: f64,
    t_end: f64,
) -> Result<Trace> {
    let h = s.sqrt();
    let k0 = first_index(damping.t_min, h, offset_c);
    let noise = NoiseModel::none(problem.dim());
    let mut state = RagState {
        k: k0,
        w_prev: y0.clone(),
        y: y0.clone(),
    };
    let mut records = Vec::new();
    while (state.k as f64 + offset_c) * h <= t_end * (1.0 + 1e-12) {
        let gamma = discretize_gamma(damping, h, state.k)?;
        let (next, mut rec) = rag_step(&state, gamma, s, problem, &noise, StepBound::Enforce)?;
        rec.step_norm = (&next.y - &rec.y).norm();
        records.push(rec);
        state = next;
    }
    Ok(Trace {
        method: Method::Rag,
        config_hash: String::new(),
        seed: 0,
        start: y0,
        records,
    })
}

fn first_index(t_min: f64, h: f64, c: f64) -> usize {
    // smallest k ≥ 1 with (k + c)h ≥ t_min, and (k+1)h ≥ t_min for discretize_gamma
    let mut k = ((t_min / h - c).ceil().max(1.0)) as usize;
    while (k as f64 + c) * h < t_min || (k as f64 + 1.0) * h < t_min {
        k += 1;
    }
    k
}

/// Run the discrete scheme and the chosen ODE from the same start at `τ_{k₀}`
/// with zero velocity, and compare on `[τ_{k₀}, t_end]`.
pub fn ode_compare(
    problem: &Problem,
    damping: &DampingFunction,
    s: f64,
    y0: &Vector,
    t_end: f64,
    offset_c: f64,
    model: OdeModel,
) -> Result<ErrorProfile> {
    let h = s.sqrt();
    let trace = discrete_ravine(problem, damping, s, y0.clone(), offset_c, t_end)?;
    let k0 = trace
        .records
        .first()
        .ok_or_else(|| Error::GridCoverage("no discrete iterate inside the horizon".into()))?
        .k;
    let start = (k0 as f64 + offset_c) * h;
    let shifted = damping.with_t_min(start);
    let last = (trace.records.last().expect("non-empty").k as f64 + offset_c) * h;
    let v0 = Vector::zeros(problem.dim());
    let h_int = aligned_step(h);
    let end = last.max(start + h_int);
    let traj = match model {
        OdeModel::Igs => integrate_igs(problem, &shifted, y0.clone(), v0, h_int, end)?,
        OdeModel::HighRes => integrate_highres(problem, &shifted, s, y0.clone(), v0, h_int, end)?,
    };
    compare_discrete_continuous(&trace, &traj, offset_c, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lyapunov::rate_slope_points;
    use crate::Matrix;

    fn flat(dim: usize) -> Problem {
        Problem::least_squares(Matrix::zeros(1, dim), Vector::zeros(1)).unwrap()
    }

    fn diag(v: &[f64]) -> Problem {
        Problem::quadratic_from_spectrum(v, None, Vector::zeros(v.len())).unwrap()
    }

    #[test]
    fn free_motion_matches_exponential_decay() {
        let p = flat(2);
        let damp = DampingFunction::constant(1.5).unwrap();
        let v0 = Vector::from_vec(vec![1.0, -2.0]);
        let tr = integrate_igs(&p, &damp, Vector::zeros(2), v0.clone(), 0.01, 6.0).unwrap();
        for (t, v) in tr.tau.iter().zip(&tr.velocities) {
            let exact = &v0 * (-1.5 * (t - 1.0)).exp();
            assert!((v - exact).norm() <= 1e-8);
        }
    }

    #[test]
    fn minimizer_is_stationary() {
        let p = Problem::quadratic(
            Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 10.0])),
            Vector::from_vec(vec![1.0, 2.0]),
        )
        .unwrap();
        let xs = p.x_star().unwrap().clone();
        let damp = DampingFunction::alpha_over_t(3.0).unwrap();
        let a = integrate_igs(&p, &damp, xs.clone(), Vector::zeros(2), 0.01, 5.0).unwrap();
        let b = integrate_highres(&p, &damp, 0.05, xs.clone(), Vector::zeros(2), 0.01, 5.0).unwrap();
        for y in a.positions.iter().chain(&b.positions) {
            assert!((y - &xs).norm() <= 1e-14);
        }
    }

    #[test]
    fn igs_rate_slope() {
        let p = diag(&[1.0]);
        let damp = DampingFunction::alpha_over_t(3.0).unwrap();
        let tr = integrate_igs(&p, &damp, Vector::from_vec(vec![1.0]), Vector::zeros(1), 0.01, 100.0).unwrap();
        let pts: Vec<(f64, f64)> = tr
            .tau
            .iter()
            .zip(&tr.positions)
            .filter(|(t, _)| **t >= 10.0)
            .map(|(t, x)| (*t, p.evaluate(x).unwrap()))
            .collect();
        let slope = rate_slope_points(&pts).unwrap();
        assert!(slope <= -1.9, "{slope}");
    }

    #[test]
    fn highres_reduces_to_igs() {
        let p = diag(&[1.0, 0.2, 0.05]);
        let damp = DampingFunction::alpha_over_t(4.0).unwrap();
        let y0 = Vector::from_vec(vec![1.0, -1.0, 2.0]);
        let a = integrate_igs(&p, &damp, y0.clone(), Vector::zeros(3), 0.01, 20.0).unwrap();
        let b = integrate_highres(&p, &damp, 1e-8, y0, Vector::zeros(3), 0.01, 20.0).unwrap();
        let sup = a
            .positions
            .iter()
            .zip(&b.positions)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        assert!(sup <= 1e-4, "{sup}");
    }

    fn sign_changes(tr: &Trajectory, coord: usize, t_max: f64) -> usize {
        let vals: Vec<f64> = tr
            .tau
            .iter()
            .zip(&tr.positions)
            .filter(|(t, _)| **t <= t_max)
            .map(|(_, y)| y[coord])
            .collect();
        vals.windows(2).filter(|w| w[0] * w[1] < 0.0).count()
    }

    #[test]
    fn hessian_damping_suppresses_oscillations() {
        let p = diag(&[1.0, 10.0]);
        let damp = DampingFunction::alpha_over_t(4.0).unwrap();
        let y0 = Vector::from_vec(vec![1.0, 1.0]);
        let a = integrate_igs(&p, &damp, y0.clone(), Vector::zeros(2), 0.01, 50.0).unwrap();
        let b = integrate_highres(&p, &damp, 0.1, y0, Vector::zeros(2), 0.01, 50.0).unwrap();
        let (na, nb) = (sign_changes(&a, 1, 50.0), sign_changes(&b, 1, 50.0));
        assert!(nb < na, "highres {nb} vs igs {na}");
    }

    #[test]
    fn discretize_gamma_examples() {
        let nest = DampingFunction::alpha_over_t(3.0).unwrap();
        for h in [0.1, 0.5, 1.0] {
            for k in 10..20 {
                let g = discretize_gamma(&nest, h, k).unwrap();
                assert!((g - (1.0 - 3.0 / (k as f64 + 1.0))).abs() <= 1e-15);
            }
        }
        let c = DampingFunction::constant(2.0).unwrap();
        assert!((discretize_gamma(&c, 0.1, 20).unwrap() - 0.8).abs() <= 1e-15);
        let big = DampingFunction::constant(20.0).unwrap();
        assert_eq!(discretize_gamma(&big, 0.1, 20).unwrap(), 0.0);
        assert!(discretize_gamma(&c, 0.1, 2).is_err());
    }

    #[test]
    fn inertial_prox_examples() {
        let p = Problem::quadratic(
            Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 3.0])),
            Vector::from_vec(vec![-1.0, 0.5]),
        )
        .unwrap();
        let xs = p.x_star().unwrap().clone();
        let out = inertial_prox_step(&p, 0.3, 0.4, &xs, &xs).unwrap();
        assert!((out - &xs).norm() <= 1e-14);

        let q = diag(&[1.0]);
        let out = inertial_prox_step(&q, 1.0, 1.0, &Vector::from_vec(vec![2.0]), &Vector::from_vec(vec![-7.0])).unwrap();
        assert!((out[0] - 1.0).abs() <= 1e-15);

        let x = Vector::from_vec(vec![0.3, -2.0]);
        let x_prev = Vector::from_vec(vec![1.0, 1.0]);
        let (s, gh) = (0.25, 0.2);
        let next = inertial_prox_step(&p, s, gh, &x, &x_prev).unwrap();
        let lhs = &next + p.gradient(&next).unwrap() * s;
        let rhs = &x + (&x - &x_prev) * (1.0 - gh);
        assert!((lhs - rhs).norm() <= 1e-10);
    }

    #[test]
    fn integrator_is_fourth_order() {
        let p = diag(&[1.0, 4.0]);
        let damp = DampingFunction::alpha_over_t(3.0).unwrap();
        let y0 = Vector::from_vec(vec![1.0, 1.0]);
        let end = 5.0;
        let run = |h: f64| {
            integrate_igs(&p, &damp, y0.clone(), Vector::zeros(2), h, end)
                .unwrap()
                .positions
                .last()
                .unwrap()
                .clone()
        };
        let h = 0.05;
        let reference = run(h / 16.0);
        let e1 = (run(h) - &reference).norm();
        let e2 = (run(h / 2.0) - &reference).norm();
        assert!(e1 / e2 >= 8.0, "{e1} / {e2}");
    }

    #[test]
    fn self_comparison_is_exact() {
        let p = diag(&[1.0, 0.1]);
        let damp = DampingFunction::alpha_over_t(4.0).unwrap();
        let h = 0.1;
        let traj = integrate_igs(&p, &damp, Vector::from_vec(vec![1.0, 1.0]), Vector::zeros(2), aligned_step(h), 10.0)
            .unwrap();
        let records = (9..=99)
            .map(|k| {
                let tau = (k as f64 + 1.0) * h;
                let y = traj.position_at(tau).unwrap();
                crate::methods::Record {
                    k,
                    x: None,
                    y: y.clone(),
                    w: y,
                    e: Vector::zeros(2),
                    s: h * h,
                    coef: 0.0,
                    gap: 0.0,
                    grad_norm: 0.0,
                    step_norm: 0.0,
                }
            })
            .collect();
        let trace = Trace {
            method: Method::Rag,
            config_hash: String::new(),
            seed: 0,
            start: Vector::zeros(2),
            records,
        };
        let prof = compare_discrete_continuous(&trace, &traj, 1.0, h).unwrap();
        assert_eq!(prof.sup, 0.0);
        let outside = compare_discrete_continuous(&trace, &traj, 5.0, h);
        assert!(matches!(outside, Err(Error::GridCoverage(_))));
    }

    #[test]
    fn grid_alignment() {
        for s in [0.1, 0.025, 0.00625, 1.0] {
            let h: f64 = f64::sqrt(s);
            let hi = aligned_step(h);
            assert!(hi <= h / 10.0 + 1e-15);
            let n = (h / hi).round();
            assert!((n * hi - h).abs() <= 1e-14);
        }
    }
}
