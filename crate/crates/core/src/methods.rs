//! NAG and RAG step functions, run drivers and the Nesterov/Ravine transforms.
//!
//! Indexing is 1-based for both methods and shared with the noise model:
//!
//! * NAG: `x_0 = x_1`, `y_k = x_k + α_k(x_k − x_{k−1})`, `x_{k+1} = y_k − s_k(∇f(y_k) + e_k)`.
//! * RAG: `w_0 = y_1`, `w_k = y_k − s_k(∇f(y_k) + e_k)`, `y_{k+1} = w_k + γ_k(w_k − w_{k−1})`.
//!
//! With `γ_k = α_{k+1}` and a common start both produce the same `y_k`, and `w_k = x_{k+1}`.

use log::warn;

use crate::noise::NoiseModel;
use crate::problems::Problem;
use crate::schedules::{Schedule, TSequence};
use crate::{Error, Result, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Nag,
    Rag,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Nag => "nag",
            Method::Rag => "rag",
        }
    }
}

/// Step-size rule `s_k = s₀/k^d` (`d = 0` is a constant step).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRule {
    pub s0: f64,
    pub d: f64,
}

impl StepRule {
    pub fn constant(s: f64) -> Self {
        Self { s0: s, d: 0.0 }
    }

    pub fn poly(s0: f64, d: f64) -> Self {
        Self { s0, d }
    }

    pub fn at(&self, k: usize) -> f64 {
        if self.d == 0.0 {
            self.s0
        } else {
            self.s0 / (k as f64).powf(self.d)
        }
    }

    pub fn is_constant(&self) -> bool {
        self.d == 0.0
    }
}

/// What to do when `s_k > 1/L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepBound {
    #[default]
    Enforce,
    Warn,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NagState {
    pub k: usize,
    pub x_prev: Vector,
    pub x: Vector,
}

impl NagState {
    /// Start at `x_1` with `x_0 = x_1`.
    pub fn new(x1: Vector) -> Self {
        Self {
            k: 1,
            x_prev: x1.clone(),
            x: x1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RagState {
    pub k: usize,
    pub w_prev: Vector,
    pub y: Vector,
}

impl RagState {
    /// Start at `y_1` with `w_0 = y_1`.
    pub fn new(y1: Vector) -> Self {
        Self {
            k: 1,
            w_prev: y1.clone(),
            y: y1,
        }
    }
}

/// One iteration of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub k: usize,
    /// NAG only: `x_k`.
    pub x: Option<Vector>,
    pub y: Vector,
    /// `x_{k+1}` for NAG, `w_k` for RAG.
    pub w: Vector,
    pub e: Vector,
    pub s: f64,
    /// `α_k` for NAG, `γ_k` for RAG.
    pub coef: f64,
    /// `f(x_k) − min f` for NAG, `f(y_k) − min f` for RAG.
    pub gap: f64,
    /// `‖∇f(y_k)‖`.
    pub grad_norm: f64,
    /// `‖x_k − x_{k−1}‖` for NAG, `‖y_k − y_{k−1}‖` for RAG (0 at `k = 1`).
    pub step_norm: f64,
}

impl Record {
    /// The noisy gradient `∇f(y_k) + e_k`, recovered from the stored step.
    pub fn noisy_gradient(&self) -> Vector {
        (&self.y - &self.w) / self.s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub method: Method,
    pub config_hash: String,
    pub seed: u64,
    /// `x_1` for NAG, `y_1` for RAG.
    pub start: Vector,
    pub records: Vec<Record>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Record for iteration `k` (1-based).
    pub fn record(&self, k: usize) -> Result<&Record> {
        if k == 0 || k > self.records.len() {
            return Err(Error::IndexOutOfRange {
                k,
                lo: 1,
                hi: self.records.len(),
            });
        }
        Ok(&self.records[k - 1])
    }

    /// The common step size if it never changes.
    pub fn constant_step(&self) -> Option<f64> {
        let s = self.records.first()?.s;
        self.records.iter().all(|r| r.s == s).then_some(s)
    }

    pub fn ys(&self) -> Vec<Vector> {
        self.records.iter().map(|r| r.y.clone()).collect()
    }

    /// NAG iterates `x_1, …, x_{K+1}`.
    pub fn xs(&self) -> Result<Vec<Vector>> {
        if self.method != Method::Nag {
            return Err(Error::MissingRecord("x records (not a NAG trace)"));
        }
        let mut out = vec![self.start.clone()];
        out.extend(self.records.iter().map(|r| r.w.clone()));
        Ok(out)
    }

    /// `w_k` for `0 ≤ k ≤ K` with `w_0` the start (`x_{k+1}` for NAG).
    pub fn w(&self, k: usize) -> Result<&Vector> {
        match k {
            0 => Ok(&self.start),
            _ => Ok(&self.record(k)?.w),
        }
    }

    /// NAG iterate `x_k` for `0 ≤ k ≤ K+1` with `x_0 = x_1`; for RAG traces
    /// the equivalent sequence `x_{k+1} = w_k`.
    pub fn x(&self, k: usize) -> Result<&Vector> {
        match k {
            0 | 1 => Ok(&self.start),
            _ => self.w(k - 1),
        }
    }

    pub fn y(&self, k: usize) -> Result<&Vector> {
        Ok(&self.record(k)?.y)
    }
}

fn check_step(problem: &Problem, k: usize, coef: f64, s: f64, policy: StepBound) -> Result<()> {
    if !(s > 0.0) {
        return Err(Error::Contract(format!("step size must be positive at k={k}, got {s}")));
    }
    if !(0.0..=1.0).contains(&coef) {
        return Err(Error::Contract(format!(
            "extrapolation coefficient must lie in [0,1] at k={k}, got {coef}"
        )));
    }
    let bound = 1.0 / problem.lipschitz();
    if s > bound * (1.0 + 1e-12) {
        let msg = format!("step s_{k} = {s} exceeds 1/L = {bound} (L = {})", problem.lipschitz());
        match policy {
            StepBound::Enforce => return Err(Error::Contract(msg)),
            StepBound::Warn => warn!("{msg}"),
        }
    }
    Ok(())
}

fn finite_or_fail(k: usize, v: &Vector) -> Result<()> {
    if v.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric {
            k,
            reason: "non-finite iterate".into(),
        })
    }
}

/// One step of (S)NAG.
pub fn nag_step(
    state: &NagState,
    alpha_k: f64,
    s_k: f64,
    problem: &Problem,
    noise: &NoiseModel,
    policy: StepBound,
) -> Result<(NagState, Record)> {
    let k = state.k;
    check_step(problem, k, alpha_k, s_k, policy)?;
    if state.x.len() != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            got: state.x.len(),
        });
    }
    let diff = &state.x - &state.x_prev;
    let y = &state.x + &diff * alpha_k;
    let e = noise.sample_error(k);
    let g = problem.grad(&y);
    let next = &y - (&g + &e) * s_k;
    finite_or_fail(k, &next)?;
    let record = Record {
        k,
        x: Some(state.x.clone()),
        gap: problem.gap_unchecked(&state.x),
        grad_norm: g.norm(),
        step_norm: diff.norm(),
        y,
        w: next.clone(),
        e,
        s: s_k,
        coef: alpha_k,
    };
    let state = NagState {
        k: k + 1,
        x_prev: state.x.clone(),
        x: next,
    };
    Ok((state, record))
}

/// One step of (S)RAG. The record's `step_norm` is left at 0; drivers fill it.
pub fn rag_step(
    state: &RagState,
    gamma_k: f64,
    s_k: f64,
    problem: &Problem,
    noise: &NoiseModel,
    policy: StepBound,
) -> Result<(RagState, Record)> {
    let k = state.k;
    check_step(problem, k, gamma_k, s_k, policy)?;
    if state.y.len() != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            got: state.y.len(),
        });
    }
    let e = noise.sample_error(k);
    let g = problem.grad(&state.y);
    let w = &state.y - (&g + &e) * s_k;
    let y_next = &w + (&w - &state.w_prev) * gamma_k;
    finite_or_fail(k, &y_next)?;
    let record = Record {
        k,
        x: None,
        y: state.y.clone(),
        w: w.clone(),
        e,
        s: s_k,
        coef: gamma_k,
        gap: problem.gap_unchecked(&state.y),
        grad_norm: g.norm(),
        step_norm: 0.0,
    };
    let state = RagState {
        k: k + 1,
        w_prev: w,
        y: y_next,
    };
    Ok((state, record))
}

struct Divergence {
    threshold: Option<f64>,
}

impl Divergence {
    fn new(initial_gap: f64) -> Self {
        Self {
            threshold: (initial_gap > 0.0).then_some(1e12 * initial_gap),
        }
    }

    fn check(&self, k: usize, gap: f64) -> Result<()> {
        if !gap.is_finite() {
            return Err(Error::Numeric {
                k,
                reason: "non-finite objective gap".into(),
            });
        }
        if let Some(t) = self.threshold {
            if gap > t {
                return Err(Error::Numeric {
                    k,
                    reason: format!("divergence: gap {gap:e} exceeds 1e12 x initial gap"),
                });
            }
        }
        Ok(())
    }
}

/// Run `iterations` NAG steps with coefficient `alpha(k)` and step `step(k)`.
#[allow(clippy::too_many_arguments)]
pub fn run_nag(
    problem: &Problem,
    x1: Vector,
    iterations: usize,
    alpha: impl Fn(usize) -> f64,
    step: impl Fn(usize) -> f64,
    noise: &NoiseModel,
    policy: StepBound,
) -> Result<Trace> {
    let start = x1.clone();
    let guard = Divergence::new(problem.gap(&x1)?);
    let mut state = NagState::new(x1);
    let mut records = Vec::with_capacity(iterations);
    for k in 1..=iterations {
        let (next, record) = nag_step(&state, alpha(k), step(k), problem, noise, policy)?;
        guard.check(k, record.gap)?;
        records.push(record);
        state = next;
    }
    Ok(Trace {
        method: Method::Nag,
        config_hash: String::new(),
        seed: noise.seed,
        start,
        records,
    })
}

/// Run `iterations` RAG steps with coefficient `gamma(k)` and step `step(k)`.
#[allow(clippy::too_many_arguments)]
pub fn run_rag(
    problem: &Problem,
    y1: Vector,
    iterations: usize,
    gamma: impl Fn(usize) -> f64,
    step: impl Fn(usize) -> f64,
    noise: &NoiseModel,
    policy: StepBound,
) -> Result<Trace> {
    let start = y1.clone();
    let guard = Divergence::new(problem.gap(&y1)?);
    let mut state = RagState::new(y1);
    let mut records: Vec<Record> = Vec::with_capacity(iterations);
    for k in 1..=iterations {
        let (next, mut record) = rag_step(&state, gamma(k), step(k), problem, noise, policy)?;
        if let Some(prev) = records.last() {
            record.step_norm = (&record.y - &prev.y).norm();
        }
        guard.check(k, record.gap)?;
        records.push(record);
        state = next;
    }
    Ok(Trace {
        method: Method::Rag,
        config_hash: String::new(),
        seed: noise.seed,
        start,
        records,
    })
}

/// Everything needed for a schedule-driven run.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub method: Method,
    pub schedule: Schedule,
    pub noise: NoiseModel,
    pub step: StepRule,
    pub iterations: usize,
    pub x0: Vector,
    pub step_bound: StepBound,
}

/// Drive NAG with `α_k` or RAG with `γ_k = α_{k+1}` from the schedule.
pub fn run(problem: &Problem, spec: &RunSpec) -> Result<Trace> {
    let step = |k| spec.step.at(k);
    let schedule = spec.schedule;
    match spec.method {
        Method::Nag => run_nag(
            problem,
            spec.x0.clone(),
            spec.iterations,
            |k| schedule.alpha(k),
            step,
            &spec.noise,
            spec.step_bound,
        ),
        Method::Rag => run_rag(
            problem,
            spec.x0.clone(),
            spec.iterations,
            |k| schedule.alpha(k + 1),
            step,
            &spec.noise,
            spec.step_bound,
        ),
    }
}

/// The `y` sequence of a NAG trace, to be compared with an RAG run.
pub fn nag_to_ravine(trace: &Trace) -> Result<Vec<Vector>> {
    if trace.method != Method::Nag {
        return Err(Error::MissingRecord("y records of a NAG trace"));
    }
    Ok(trace.ys())
}

/// `x_1 = y_1` followed by `x_{k+1} = w_k` from an RAG trace.
pub fn ravine_to_nag(trace: &Trace) -> Result<Vec<Vector>> {
    if trace.method != Method::Rag {
        return Err(Error::MissingRecord("w records of an RAG trace"));
    }
    let mut out = vec![trace.start.clone()];
    out.extend(trace.records.iter().map(|r| r.w.clone()));
    Ok(out)
}

/// Norm of a vector identity's defect together with the size of its terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    pub norm: f64,
    pub scale: f64,
}

impl Residual {
    pub fn relative(&self) -> f64 {
        if self.scale > 0.0 {
            self.norm / self.scale
        } else {
            self.norm
        }
    }
}

/// `u_k = v_k + h(∇f(y_{k−1}) + e_{k−1}) = (y_k − w_{k−1})/h`, with `u_1 = 0`.
pub fn ravine_velocity(trace: &Trace, k: usize, h: f64) -> Result<Vector> {
    let y = &trace.record(k)?.y;
    Ok((y - trace.w(k - 1)?) / h)
}

/// Defect of the constant-step velocity form
/// `t_{k+1} u_k − (t_k − 1) u_{k−1} = −h (t_k − 1)(∇f(y_{k−1}) + e_{k−1})`, `k ≥ 2`.
pub fn constitutive_residual(trace: &Trace, t: &TSequence, k: usize) -> Result<Residual> {
    let s = trace.constant_step().ok_or(Error::NonConstantStep)?;
    constitutive_residual_with(trace, t, k, s)
}

/// All residuals for `k = 2..=K`.
pub fn constitutive_residuals(trace: &Trace, t: &TSequence) -> Result<Vec<Residual>> {
    let s = trace.constant_step().ok_or(Error::NonConstantStep)?;
    (2..=trace.len())
        .map(|k| constitutive_residual_with(trace, t, k, s))
        .collect()
}

fn constitutive_residual_with(trace: &Trace, t: &TSequence, k: usize, s: f64) -> Result<Residual> {
    if k < 2 || k > trace.len() {
        return Err(Error::IndexOutOfRange {
            k,
            lo: 2,
            hi: trace.len(),
        });
    }
    let h = s.sqrt();
    let (tk, tn) = (t.t(k)?, t.t(k + 1)?);
    let a = ravine_velocity(trace, k, h)? * tn;
    let b = ravine_velocity(trace, k - 1, h)? * (tk - 1.0);
    let c = trace.record(k - 1)?.noisy_gradient() * (h * (tk - 1.0));
    let norm = (&a - &b + &c).norm();
    let scale = a.norm().max(b.norm()).max(c.norm());
    Ok(Residual { norm, scale })
}
