//! Extrapolation coefficients `α_k`, the `t_k` sequence and condition checks.
//!
//! `t_k = 1 + Σ_{i≥k} Π_{j=k}^{i} α_j` is linked to the coefficients by
//! `α_k = (t_k − 1)/t_{k+1}`, i.e. `t_k = 1 + α_k t_{k+1}`.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, RwLock};

use crate::{Error, Result};

/// Maximum number of series terms before giving up.
pub const TERM_BUDGET: usize = 10_000_000;

/// Block length of the numeric `t` cache.
const BLOCK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleKind {
    /// `α_k = 1 − α/k`.
    NesterovOffset { alpha: f64 },
    /// `α_k = k/(k + α)`.
    NesterovRatio { alpha: f64 },
    /// `α_k = 1 − α/kʳ`.
    Power { alpha: f64, r: f64 },
    Constant { alpha: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    kind: ScheduleKind,
    clamp_negative: bool,
    shift: usize,
}

impl Schedule {
    pub fn nesterov_offset(alpha: f64) -> Result<Self> {
        positive("alpha", alpha)?;
        Ok(Self::build(ScheduleKind::NesterovOffset { alpha }))
    }

    pub fn nesterov_ratio(alpha: f64) -> Result<Self> {
        positive("alpha", alpha)?;
        Ok(Self::build(ScheduleKind::NesterovRatio { alpha }))
    }

    pub fn power(alpha: f64, r: f64) -> Result<Self> {
        positive("alpha", alpha)?;
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::Contract(format!("power exponent r must lie in (0,1), got {r}")));
        }
        Ok(Self::build(ScheduleKind::Power { alpha, r }))
    }

    /// Constant coefficient. `α = 1` is accepted so that the divergent
    /// series can be observed; it has no `t` sequence.
    pub fn constant(alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Contract(format!("constant alpha must lie in [0,1], got {alpha}")));
        }
        Ok(Self::build(ScheduleKind::Constant { alpha }))
    }

    fn build(kind: ScheduleKind) -> Self {
        Self {
            kind,
            clamp_negative: true,
            shift: 0,
        }
    }

    /// With clamping off, indexing starts at the first `k` whose raw
    /// coefficient is non-negative: the emitted `α_k` is the raw `α_{k+k₀−1}`.
    pub fn with_clamp(mut self, clamp_negative: bool) -> Self {
        self.clamp_negative = clamp_negative;
        self.shift = if clamp_negative {
            0
        } else {
            self.first_nonnegative() - 1
        };
        self
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn clamp_negative(&self) -> bool {
        self.clamp_negative
    }

    /// Offset added to `k` before evaluating the raw formula.
    pub fn index_shift(&self) -> usize {
        self.shift
    }

    fn raw(&self, j: usize) -> f64 {
        let j = j as f64;
        match self.kind {
            ScheduleKind::NesterovOffset { alpha } => 1.0 - alpha / j,
            ScheduleKind::NesterovRatio { alpha } => j / (j + alpha),
            ScheduleKind::Power { alpha, r } => 1.0 - alpha / j.powf(r),
            ScheduleKind::Constant { alpha } => alpha,
        }
    }

    fn first_nonnegative(&self) -> usize {
        let guess = match self.kind {
            ScheduleKind::NesterovOffset { alpha } => alpha.ceil().max(1.0) as usize,
            ScheduleKind::Power { alpha, r } => alpha.powf(1.0 / r).ceil().max(1.0) as usize,
            _ => 1,
        };
        let mut j = guess;
        while self.raw(j) < 0.0 {
            j += 1;
        }
        while j > 1 && self.raw(j - 1) >= 0.0 {
            j -= 1;
        }
        j
    }

    /// Unclamped coefficient at `k` (after the index shift).
    pub fn raw_alpha(&self, k: usize) -> f64 {
        assert!(k >= 1, "schedules are indexed from k = 1");
        self.raw(k + self.shift)
    }

    /// `α_k`, clamped at 0 when clamping is on.
    pub fn alpha(&self, k: usize) -> f64 {
        self.raw_alpha(k).max(0.0)
    }

    /// `1 − α_k` without cancellation.
    pub fn one_minus_alpha(&self, k: usize) -> f64 {
        if self.raw_alpha(k) <= 0.0 {
            return 1.0;
        }
        let j = (k + self.shift) as f64;
        match self.kind {
            ScheduleKind::NesterovOffset { alpha } => alpha / j,
            ScheduleKind::NesterovRatio { alpha } => alpha / (j + alpha),
            ScheduleKind::Power { alpha, r } => alpha / j.powf(r),
            ScheduleKind::Constant { alpha } => 1.0 - alpha,
        }
    }

    /// Exponent `r` with `t_k` growing like `kʳ`.
    pub fn growth_exponent(&self) -> f64 {
        match self.kind {
            ScheduleKind::NesterovOffset { .. } | ScheduleKind::NesterovRatio { .. } => 1.0,
            ScheduleKind::Power { r, .. } => r,
            ScheduleKind::Constant { .. } => 0.0,
        }
    }

    /// Closed-form `t_k` where one exists.
    pub fn t_closed_form(&self, k: usize) -> Option<f64> {
        assert!(k >= 1, "schedules are indexed from k = 1");
        let j = (k + self.shift) as f64;
        match self.kind {
            ScheduleKind::NesterovOffset { alpha } if alpha > 1.0 => {
                // clamped coefficients are zero, which forces t = 1
                Some(if j >= alpha { (j - 1.0) / (alpha - 1.0) } else { 1.0 })
            }
            ScheduleKind::NesterovRatio { alpha } if alpha > 1.0 => {
                Some((j + alpha - 1.0) / (alpha - 1.0))
            }
            ScheduleKind::Constant { alpha } if alpha < 1.0 => Some(1.0 / (1.0 - alpha)),
            _ => None,
        }
    }

    /// Truncated series for `t_k` with absolute error below `tol`.
    pub fn t_numeric(&self, k: usize, tol: f64) -> Result<f64> {
        Ok(self.series(k, tol, 0.0)?.value)
    }

    /// Series for `t_k`, stopping once half the rigorous tail bound is below
    /// `max(abs_tol, rel_tol·t)`; the midpoint of the enclosure is returned.
    ///
    /// The tail bound uses `P_n (n+1)/(q−1)` with `q = (n+1)(1−α_{n+1}) > 1`,
    /// valid because `j(1−α_j)` is non-decreasing for every kind, plus the
    /// geometric bound for constant schedules.
    pub fn series(&self, k: usize, abs_tol: f64, rel_tol: f64) -> Result<SeriesEvidence> {
        assert!(k >= 1, "schedules are indexed from k = 1");
        if !(abs_tol > 0.0 || rel_tol > 0.0) {
            return Err(Error::Contract("series tolerance must be positive".into()));
        }
        let constant = matches!(self.kind, ScheduleKind::Constant { .. });
        let mut product = 1.0;
        let mut sum = 0.0;
        let mut i = k;
        let mut a = self.alpha(i);
        let mut bound = f64::INFINITY;
        for n in 1..=TERM_BUDGET {
            product *= a;
            sum += product;
            if product == 0.0 {
                return Ok(SeriesEvidence {
                    k,
                    value: 1.0 + sum,
                    terms: n,
                    tail_bound: 0.0,
                });
            }
            let a_next = self.alpha(i + 1);
            let q = (i + 1) as f64 * self.one_minus_alpha(i + 1);
            bound = if q > 1.0 {
                product * (i + 1) as f64 / (q - 1.0)
            } else {
                f64::INFINITY
            };
            if constant && a_next < 1.0 {
                bound = bound.min(product * a_next / (1.0 - a_next));
            }
            if 0.5 * bound <= abs_tol.max(rel_tol * (1.0 + sum)) {
                return Ok(SeriesEvidence {
                    k,
                    value: 1.0 + sum + 0.5 * bound,
                    terms: n,
                    tail_bound: bound,
                });
            }
            i += 1;
            a = a_next;
        }
        Err(Error::NonConvergence {
            terms: TERM_BUDGET,
            tail_bound: bound,
        })
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ScheduleKind::NesterovOffset { alpha } => write!(f, "nesterov_offset({alpha})")?,
            ScheduleKind::NesterovRatio { alpha } => write!(f, "nesterov_ratio({alpha})")?,
            ScheduleKind::Power { alpha, r } => write!(f, "power({alpha}, {r})")?,
            ScheduleKind::Constant { alpha } => write!(f, "constant({alpha})")?,
        }
        if !self.clamp_negative {
            write!(f, " shifted by {}", self.shift)?;
        }
        Ok(())
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Contract(format!("{name} must be positive, got {v}")))
    }
}

/// Outcome of a series evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesEvidence {
    pub k: usize,
    pub value: f64,
    pub terms: usize,
    pub tail_bound: f64,
}

/// `α_k = (t_k − 1)/t_{k+1}`.
pub fn alpha_from_t(t_k: f64, t_k_next: f64) -> f64 {
    (t_k - 1.0) / t_k_next
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TMode {
    Auto,
    Numeric,
}

/// Memoized accessor for `t_k`.
///
/// Closed forms are used when available. Otherwise values are produced in
/// fixed blocks: a series at the block top (relative tolerance) followed by
/// the exact backward recursion `t_j = 1 + α_j t_{j+1}`, which only damps the
/// top error. Blocks are fixed, so a value never depends on query order.
#[derive(Debug, Clone)]
pub struct TSequence {
    schedule: Schedule,
    mode: TMode,
    rel_tol: f64,
    cache: Arc<RwLock<HashMap<usize, Arc<Vec<f64>>>>>,
}

impl TSequence {
    pub fn new(schedule: Schedule) -> Self {
        Self::with_mode(schedule, TMode::Auto, 1e-12)
    }

    /// Always numeric, ignoring closed forms.
    pub fn numeric(schedule: Schedule, rel_tol: f64) -> Self {
        Self::with_mode(schedule, TMode::Numeric, rel_tol)
    }

    fn with_mode(schedule: Schedule, mode: TMode, rel_tol: f64) -> Self {
        Self {
            schedule,
            mode,
            rel_tol,
            cache: Arc::new(RwLock::new(HashMap::new())),
        }
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn t(&self, k: usize) -> Result<f64> {
        assert!(k >= 1, "t is indexed from k = 1");
        if self.mode == TMode::Auto {
            if let Some(t) = self.schedule.t_closed_form(k) {
                return Ok(t);
            }
        }
        let block = (k - 1) / BLOCK;
        let values = self.block(block)?;
        Ok(values[(k - 1) % BLOCK])
    }

    /// `t_k` for `k` in `lo..=hi`.
    pub fn range(&self, lo: usize, hi: usize) -> Result<Vec<f64>> {
        (lo..=hi).map(|k| self.t(k)).collect()
    }

    fn block(&self, block: usize) -> Result<Arc<Vec<f64>>> {
        if let Some(v) = self.cache.read().expect("t cache poisoned").get(&block) {
            return Ok(v.clone());
        }
        let lo = block * BLOCK + 1;
        let top = lo + BLOCK - 1;
        let mut values = vec![0.0; BLOCK];
        values[BLOCK - 1] = self.schedule.series(top, 0.0, self.rel_tol)?.value;
        for j in (lo..top).rev() {
            let idx = j - lo;
            values[idx] = 1.0 + self.schedule.alpha(j) * values[idx + 1];
        }
        let values = Arc::new(values);
        self.cache
            .write()
            .expect("t cache poisoned")
            .entry(block)
            .or_insert_with(|| values.clone());
        Ok(values)
    }
}

/// Evidence for (K0): a closed form, or a series that met its tail bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct K0Evidence {
    pub converges: bool,
    pub closed_form: bool,
    pub k: usize,
    pub terms: usize,
    pub tail_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub schedule: String,
    pub k_min: usize,
    pub k_max: usize,
    pub tol: f64,
    pub k0: K0Evidence,
    /// Largest `k'` such that (K1) holds on `[k_min, k']`.
    pub k1_holds_up_to: Option<usize>,
    /// `max (t_{k+1}² − t_k²)/t_{k+1}` over the range.
    pub k1plus_m: f64,
    /// `sup 1/(1−α_{k+1}) − 1/(1−α_k)` over the range.
    pub special_class_c: f64,
    /// `max t_{k+1} − 1/((1−c)(1−α_k))`; positive values are violations.
    /// `None` when `c ≥ 1`.
    pub bound_check: Option<f64>,
}

impl ConditionReport {
    pub fn k1_holds(&self) -> bool {
        self.k1_holds_up_to == Some(self.k_max)
    }

    pub fn k1plus_holds(&self) -> bool {
        self.k1plus_m < 1.0
    }

    pub fn render_text(&self) -> String {
        let up_to = match self.k1_holds_up_to {
            Some(k) => k.to_string(),
            None => "none".into(),
        };
        let m = if self.k1plus_m >= 1.0 {
            format!("{:.9} (>=1)", self.k1plus_m)
        } else {
            format!("{:.9}", self.k1plus_m)
        };
        let bound = match self.bound_check {
            Some(b) => format!("{b:.3e}"),
            None => "n/a (c >= 1)".into(),
        };
        let rows = [
            ("schedule", self.schedule.clone()),
            ("range", format!("[{}, {}]", self.k_min, self.k_max)),
            ("tol", format!("{:e}", self.tol)),
            (
                "K0",
                if self.k0.closed_form {
                    format!("converges (closed form) at k={}", self.k0.k)
                } else {
                    format!(
                        "converges at k={} ({} terms, tail bound {:.3e})",
                        self.k0.k, self.k0.terms, self.k0.tail_bound
                    )
                },
            ),
            ("K1 holds up to", up_to),
            ("K1 on range", self.k1_holds().to_string()),
            ("K1+ m", m),
            ("special class c", format!("{:.9}", self.special_class_c)),
            ("bound check", bound),
        ];
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        rows.iter()
            .map(|(k, v)| format!("{k:<width$}  {v}\n"))
            .collect()
    }

    pub fn render_json(&self) -> String {
        let opt = |v: Option<String>| v.unwrap_or_else(|| "null".into());
        format!(
            "{{\"schedule\":\"{}\",\"k_min\":{},\"k_max\":{},\"tol\":{:e},\"k0_converges\":{},\"k0_closed_form\":{},\"k0_k\":{},\"k0_terms\":{},\"k0_tail_bound\":{:e},\"k1_holds_up_to\":{},\"k1_holds\":{},\"k1plus_m\":{:e},\"special_class_c\":{:e},\"bound_check\":{}}}",
            self.schedule,
            self.k_min,
            self.k_max,
            self.tol,
            self.k0.converges,
            self.k0.closed_form,
            self.k0.k,
            self.k0.terms,
            self.k0.tail_bound,
            opt(self.k1_holds_up_to.map(|k| k.to_string())),
            self.k1_holds(),
            self.k1plus_m,
            self.special_class_c,
            opt(self.bound_check.map(|b| format!("{b:e}"))),
        )
    }
}

/// Range-certified check of (K0), (K1), (K1+), the special-class inequality
/// and the resulting bound on `t_{k+1}`.
pub fn check_conditions(
    schedule: &Schedule,
    k_min: usize,
    k_max: usize,
    tol: f64,
) -> Result<ConditionReport> {
    if !(1 <= k_min && k_min < k_max) {
        return Err(Error::Contract(format!(
            "need 1 <= k_min < k_max, got [{k_min}, {k_max}]"
        )));
    }
    let k0_at = (k_min..=k_max)
        .find(|&k| schedule.alpha(k) > 0.0)
        .unwrap_or(k_min);
    let k0 = if schedule.t_closed_form(k0_at).is_some() {
        K0Evidence {
            converges: true,
            closed_form: true,
            k: k0_at,
            terms: 0,
            tail_bound: 0.0,
        }
    } else {
        let ev = schedule.series(k0_at, tol, 0.0)?;
        K0Evidence {
            converges: true,
            closed_form: false,
            k: k0_at,
            terms: ev.terms,
            tail_bound: ev.tail_bound,
        }
    };

    let ts = TSequence::new(*schedule);
    let t = ts.range(k_min, k_max + 1)?;
    let at = |k: usize| t[k - k_min];

    let mut k1_holds_up_to = None;
    let mut k1_broken = false;
    let mut m = f64::NEG_INFINITY;
    let mut c = f64::NEG_INFINITY;
    for k in k_min..=k_max {
        let (tk, tn) = (at(k), at(k + 1));
        let ratio = (tn * tn - tk * tk) / tn;
        m = m.max(ratio);
        if !k1_broken {
            if ratio <= 1.0 + tol {
                k1_holds_up_to = Some(k);
            } else {
                k1_broken = true;
            }
        }
        let gap = 1.0 / schedule.one_minus_alpha(k + 1) - 1.0 / schedule.one_minus_alpha(k);
        c = c.max(gap);
    }
    let bound_check = (c < 1.0).then(|| {
        (k_min..=k_max)
            .map(|k| at(k + 1) - 1.0 / ((1.0 - c) * schedule.one_minus_alpha(k)))
            .fold(f64::NEG_INFINITY, f64::max)
    });
    Ok(ConditionReport {
        schedule: schedule.to_string(),
        k_min,
        k_max,
        tol,
        k0,
        k1_holds_up_to,
        k1plus_m: m,
        special_class_c: c,
        bound_check,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn all_kinds() -> Vec<Schedule> {
        vec![
            Schedule::nesterov_offset(3.0).unwrap(),
            Schedule::nesterov_ratio(3.0).unwrap(),
            Schedule::power(1.0, 0.5).unwrap(),
            Schedule::constant(0.5).unwrap(),
        ]
    }

    #[test]
    fn alpha_examples() {
        let s = Schedule::nesterov_offset(3.0).unwrap();
        assert_eq!(s.alpha(6), 0.5);
        assert_eq!(s.alpha(2), 0.0);
        assert_eq!(s.raw_alpha(2), -0.5);
        assert_eq!(Schedule::constant(0.5).unwrap().alpha(100), 0.5);
    }

    #[test]
    fn shifted_indexing_starts_at_first_nonnegative() {
        let s = Schedule::nesterov_offset(3.0).unwrap().with_clamp(false);
        assert_eq!(s.index_shift(), 2);
        assert_eq!(s.alpha(1), 0.0);
        assert_eq!(s.alpha(4), 0.5);
        let s = Schedule::nesterov_offset(3.5).unwrap().with_clamp(false);
        assert_eq!(s.index_shift(), 3);
        assert!(s.raw_alpha(1) > 0.0);
        let ts = TSequence::numeric(s, 1e-7);
        for k in [1, 5, 50] {
            let closed = s.t_closed_form(k).unwrap();
            assert!((ts.t(k).unwrap() - closed).abs() <= 1e-7 * closed);
        }
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(Schedule::nesterov_offset(3.0).unwrap().t_closed_form(5), Some(2.0));
        assert_eq!(Schedule::constant(0.5).unwrap().t_closed_form(17), Some(2.0));
        let p = Schedule::power(1.0, 0.5).unwrap();
        assert_eq!(p.t_closed_form(10), None);
        let ts = TSequence::new(p);
        let ratio = |k: usize| ts.t(k).unwrap() / (k as f64).sqrt();
        let (r1, r2) = (ratio(1_000), ratio(100_000));
        assert!((r2 - 1.0).abs() < (r1 - 1.0).abs());
        assert!((r2 - 1.0).abs() < 0.01, "{r2}");
    }

    #[test]
    fn numeric_examples() {
        let c = Schedule::constant(0.5).unwrap();
        assert!((c.t_numeric(3, 1e-10).unwrap() - 2.0).abs() <= 1e-10);
        let o = Schedule::nesterov_offset(3.0).unwrap();
        assert!((o.t_numeric(5, 1e-8).unwrap() - 2.0).abs() <= 1e-6);
        let one = Schedule::constant(1.0).unwrap();
        assert!(matches!(one.t_numeric(1, 1e-8), Err(Error::NonConvergence { .. })));
    }

    #[test]
    fn alpha_from_t_examples() {
        assert_eq!(alpha_from_t(2.0, 2.0), 0.5);
        assert_eq!(alpha_from_t(1.0, 7.3), 0.0);
    }

    #[test]
    fn round_trip_all_kinds() {
        for s in all_kinds() {
            for k in 3..=200 {
                let tk = s.t_numeric(k, 1e-8 * k as f64).unwrap();
                let tn = s.t_numeric(k + 1, 1e-8 * k as f64).unwrap();
                let a = alpha_from_t(tk, tn);
                assert!((a - s.alpha(k)).abs() <= 1e-6, "{s} k={k}: {a} vs {}", s.alpha(k));
            }
        }
    }

    #[test]
    fn numeric_cache_matches_series() {
        let p = Schedule::power(2.0, 0.75).unwrap();
        let ts = TSequence::new(p);
        for k in [1, 7, 1023, 1024, 1025, 5000] {
            let direct = p.t_numeric(k, 1e-11).unwrap();
            let cached = ts.t(k).unwrap();
            assert!((direct - cached).abs() <= 1e-9 * direct, "k={k}");
        }
    }

    #[test]
    fn cache_is_order_independent_and_thread_safe() {
        let p = Schedule::power(1.0, 0.5).unwrap();
        let forward = TSequence::new(p);
        let backward = TSequence::new(p);
        let a: Vec<f64> = (1..=3000).map(|k| forward.t(k).unwrap()).collect();
        let b: Vec<f64> = (1..=3000).rev().map(|k| backward.t(k).unwrap()).collect();
        let b: Vec<f64> = b.into_iter().rev().collect();
        assert_eq!(a, b);
        let shared = TSequence::new(p);
        let handles: Vec<_> = (0..4)
            .map(|i| {
                let s = shared.clone();
                std::thread::spawn(move || {
                    for k in 1..=3000 {
                        s.t((k * (i + 1)) % 3000 + 1).unwrap();
                    }
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        let c: Vec<f64> = (1..=3000).map(|k| shared.t(k).unwrap()).collect();
        assert_eq!(a, c);
    }

    #[test]
    fn conditions_constant() {
        let r = check_conditions(&Schedule::constant(0.5).unwrap(), 1, 500, 1e-9).unwrap();
        assert_eq!(r.special_class_c, 0.0);
        assert_eq!(r.k1plus_m, 0.0);
        assert!(r.k1_holds());
    }

    #[test]
    fn conditions_offset() {
        let r5 = check_conditions(&Schedule::nesterov_offset(5.0).unwrap(), 2, 10_000, 1e-9).unwrap();
        assert!(r5.k1plus_m <= 0.5 + 1e-9);
        assert!(r5.k1plus_holds());
        let r3 = check_conditions(&Schedule::nesterov_offset(3.0).unwrap(), 2, 10_000, 1e-9).unwrap();
        assert!(r3.k1plus_m < 1.0 && r3.k1plus_m > 1.0 - 1e-3);
        assert!(r3.k1_holds());
        assert!((r3.special_class_c - 1.0 / 3.0).abs() < 1e-9);
        assert!(r3.bound_check.unwrap() <= 1e-9);
        assert!(r3.render_text().contains("K1+ m"));
        assert!(r3.render_json().starts_with('{'));
    }

    #[test]
    fn conditions_fail_for_divergent_series() {
        let s = Schedule::nesterov_offset(1.0).unwrap();
        assert!(matches!(
            check_conditions(&s, 2, 100, 1e-8),
            Err(Error::NonConvergence { .. })
        ));
    }

    #[test]
    fn power_asymptote_of_bound() {
        let (alpha, r) = (1.0, 0.5);
        let s = Schedule::power(alpha, r).unwrap();
        let k = 100_000;
        let rep = check_conditions(&s, k - 1000, k, 1e-9).unwrap();
        let c = rep.special_class_c;
        let t = TSequence::new(s);
        let ratio = t.t(k + 1).unwrap() * (1.0 - c) * (1.0 - s.alpha(k));
        assert!((ratio - 1.0).abs() < 0.05, "{ratio}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn t_at_least_one(alpha in 1.5f64..12.0, r in 0.1f64..0.9, k in 1usize..3000) {
            for s in [
                Schedule::nesterov_offset(alpha).unwrap(),
                Schedule::nesterov_ratio(alpha).unwrap(),
                Schedule::power(alpha, r).unwrap(),
            ] {
                let t = TSequence::new(s).t(k).unwrap();
                prop_assert!(t >= 1.0);
                prop_assert!(s.alpha(k) >= 0.0 && s.alpha(k) < 1.0);
            }
        }

        #[test]
        fn k1_implies_doubling_bound(alpha in 1.5f64..12.0, k_max in 10usize..2000) {
            let s = Schedule::nesterov_offset(alpha).unwrap();
            let rep = check_conditions(&s, 1, k_max, 1e-12).unwrap();
            let t = TSequence::new(s);
            if let Some(up) = rep.k1_holds_up_to {
                for k in 1..=up {
                    prop_assert!(t.t(k + 1).unwrap() <= 2.0 * t.t(k).unwrap() + 1e-12);
                }
            }
        }

        #[test]
        fn special_class_bound(alpha in 0.5f64..8.0, r in 0.2f64..0.9, k_min in 1usize..50) {
            for s in [Schedule::nesterov_offset(alpha + 1.0).unwrap(), Schedule::power(alpha, r).unwrap()] {
                let rep = check_conditions(&s, k_min, k_min + 500, 1e-12).unwrap();
                if rep.special_class_c < 1.0 {
                    prop_assert!(rep.bound_check.unwrap() <= 1e-9 * (k_min as f64 + 500.0));
                }
            }
        }
    }
}
