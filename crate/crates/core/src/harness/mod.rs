//! Experiment orchestration: single runs, Monte Carlo replications, parameter
//! sweeps, condition checks and ODE comparisons driven by a [`RunConfig`].

pub mod config;
pub mod ini;
pub mod output;

use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

pub use config::{parse_config, RunConfig, ScheduleConfig};
pub use ini::IniDoc;

use crate::lyapunov::{default_window, diagnostics, energy_v, rate_slope, DiagnosticsSeries};
use crate::methods::{run, Trace};
use crate::ode::{ode_compare, DampingFunction, ErrorProfile, OdeModel};
use crate::problems::Problem;
use crate::schedules::{check_conditions, ConditionReport, TSequence};
use crate::{Error, Result};
use output::{diagnostics_csv, meta_json, num, trace_jsonl, write_all, TraceHeader};

/// Tolerance used by the `check` report.
pub const CHECK_TOL: f64 = 1e-10;

/// One-line outcome of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub method: &'static str,
    pub schedule: String,
    pub iterations: usize,
    pub final_gap: f64,
    /// Fitted log-log slope of the gap on `window`; `None` if the window is too short.
    pub slope: Option<f64>,
    pub window: (usize, usize),
    pub records: usize,
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let slope = match self.slope {
            Some(s) => format!("{s:.4}"),
            None => "n/a".into(),
        };
        write!(
            f,
            "{} {} K={} final_gap={:.6e} slope={} on [{}, {}] records={}",
            self.method,
            self.schedule,
            self.iterations,
            self.final_gap,
            slope,
            self.window.0,
            self.window.1,
            self.records
        )
    }
}

/// Result of [`execute`]: everything a run produces, in memory.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub problem: Problem,
    pub trace: Trace,
    pub diagnostics: DiagnosticsSeries,
    pub summary: RunSummary,
}

impl RunResult {
    pub fn trace_body(&self, config: &RunConfig) -> String {
        let header = TraceHeader {
            iterations: config.run.iterations,
            record_every: config.run.record_every,
            dense_prefix: config.run.dense_prefix,
        };
        trace_jsonl(&self.trace, &header, |k| config.run.retains(k))
    }

    pub fn diagnostics_body(&self, config: &RunConfig) -> String {
        diagnostics_csv(&self.diagnostics, |k| config.run.retains(k))
    }
}

/// Run a config in memory with its own seed.
pub fn execute(config: &RunConfig) -> Result<RunResult> {
    let problem = config.build_problem()?;
    let spec = config.run_spec(&problem, config.run.seed)?;
    let mut trace = run(&problem, &spec)?;
    trace.config_hash = config.hash();
    trace.seed = config.run.seed;
    let t = TSequence::new(spec.schedule);
    let diag = diagnostics(&trace, &t, &problem, config.diagnostics.energies)?;
    let k = config.run.iterations;
    let window = config.diagnostics.rate_window.unwrap_or_else(|| default_window(k));
    let slope = match rate_slope(&diag.gap, window.0, window.1) {
        Ok(s) => Some(s),
        Err(Error::WindowTooShort { .. }) => None,
        Err(e) => return Err(e),
    };
    let summary = RunSummary {
        method: config.run.method.name(),
        schedule: spec.schedule.to_string(),
        iterations: k,
        final_gap: diag.gap.last().copied().unwrap_or(f64::NAN),
        slope,
        window,
        records: (1..=k).filter(|&i| config.run.retains(i)).count(),
    };
    Ok(RunResult {
        problem,
        trace,
        diagnostics: diag,
        summary,
    })
}

/// Paths written by [`run_experiment`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunFiles {
    pub trace: PathBuf,
    pub diagnostics: PathBuf,
    pub meta: PathBuf,
}

impl RunFiles {
    pub fn new(out_dir: &Path, name: &str) -> Self {
        Self {
            trace: out_dir.join(format!("{name}.trace.jsonl")),
            diagnostics: out_dir.join(format!("{name}.diagnostics.csv")),
            meta: out_dir.join(format!("{name}.meta.json")),
        }
    }
}

/// Run, then write `<name>.trace.jsonl`, `<name>.diagnostics.csv` and the
/// `<name>.meta.json` sidecar into `out_dir`. Nothing is written if the run fails.
pub fn run_experiment(config: &RunConfig, out_dir: &Path, name: &str) -> Result<(RunSummary, RunFiles)> {
    let result = execute(config)?;
    let files = RunFiles::new(out_dir, name);
    let meta = meta_json("run", &config.hash(), &[&files.trace, &files.diagnostics]);
    write_all(&[
        (files.trace.clone(), result.trace_body(config)),
        (files.diagnostics.clone(), result.diagnostics_body(config)),
        (files.meta.clone(), meta),
    ])?;
    Ok((result.summary, files))
}

/// Per-`k` order statistics across replications.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Quantiles {
    pub mean: Vec<f64>,
    pub median: Vec<f64>,
    pub q10: Vec<f64>,
    pub q90: Vec<f64>,
}

impl Quantiles {
    fn from_columns(cols: &[Vec<f64>]) -> Self {
        let mut q = Quantiles::default();
        for col in cols {
            let mut sorted = col.clone();
            sorted.sort_by(f64::total_cmp);
            q.mean.push(sorted.iter().sum::<f64>() / sorted.len() as f64);
            q.median.push(quantile(&sorted, 0.5));
            q.q10.push(quantile(&sorted, 0.1));
            q.q90.push(quantile(&sorted, 0.9));
        }
        q
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct McSummary {
    /// Requested replications.
    pub reps: usize,
    pub base_seed: u64,
    /// Seeds of the replications that failed, with the reason.
    pub failed: Vec<(u64, String)>,
    /// Statistics of `gap` and `grad_norm`; index `k − 1`.
    pub gap: Quantiles,
    pub grad_norm: Quantiles,
    /// Replication average of `V_{k+1} − V_k`; index `k − 1`, length `K − 1`.
    pub drift_mean: Vec<f64>,
    /// Sample standard deviation of the drift over `√R`.
    pub drift_half_width: Vec<f64>,
}

impl McSummary {
    /// Replications that contributed.
    pub fn succeeded(&self) -> usize {
        self.reps - self.failed.len()
    }

    pub fn to_csv(&self, retain: impl Fn(usize) -> bool) -> String {
        let mut out = String::from(
            "k,gap_mean,gap_median,gap_q10,gap_q90,grad_mean,grad_median,grad_q10,grad_q90,v_drift_mean,v_drift_half_width\n",
        );
        for i in 0..self.gap.mean.len() {
            let k = i + 1;
            if !retain(k) {
                continue;
            }
            let (dm, dh) = match (self.drift_mean.get(i), self.drift_half_width.get(i)) {
                (Some(m), Some(h)) => (num(*m), num(*h)),
                _ => (String::new(), String::new()),
            };
            let cells = [
                num(self.gap.mean[i]),
                num(self.gap.median[i]),
                num(self.gap.q10[i]),
                num(self.gap.q90[i]),
                num(self.grad_norm.mean[i]),
                num(self.grad_norm.median[i]),
                num(self.grad_norm.q10[i]),
                num(self.grad_norm.q90[i]),
                dm,
                dh,
            ];
            out.push_str(&format!("{k},{}\n", cells.join(",")));
        }
        out
    }
}

struct Replication {
    gap: Vec<f64>,
    grad_norm: Vec<f64>,
    drift: Vec<f64>,
}

fn replicate(config: &RunConfig, problem: &Problem, seed: u64) -> Result<Replication> {
    let spec = config.run_spec(problem, seed)?;
    let trace = run(problem, &spec)?;
    let t = TSequence::new(spec.schedule);
    let v = (1..=trace.len())
        .map(|k| energy_v(&trace, &t, problem, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(Replication {
        gap: trace.records.iter().map(|r| r.gap).collect(),
        grad_norm: trace.records.iter().map(|r| r.grad_norm).collect(),
        drift: v.windows(2).map(|w| w[1] - w[0]).collect(),
    })
}

/// `reps` independent runs with noise seeds `base_seed + 1 ..= base_seed + reps`,
/// executed in parallel and aggregated in seed order.
pub fn monte_carlo(config: &RunConfig, reps: usize, base_seed: u64) -> Result<McSummary> {
    if reps < 2 {
        return Err(Error::config(format!("monte carlo needs at least 2 replications, got {reps}")));
    }
    let problem = config.build_problem()?;
    let seeds: Vec<u64> = (1..=reps as u64).map(|i| base_seed.wrapping_add(i)).collect();
    let results: Vec<Result<Replication>> = seeds
        .par_iter()
        .map(|&seed| replicate(config, &problem, seed))
        .collect();
    let mut failed = Vec::new();
    let mut ok = Vec::new();
    for (seed, r) in seeds.iter().zip(results) {
        match r {
            Ok(rep) => ok.push(rep),
            Err(e) => failed.push((*seed, e.to_string())),
        }
    }
    if ok.len() < 2 {
        return Err(Error::Numeric {
            k: 0,
            reason: format!("only {} of {reps} replications succeeded", ok.len()),
        });
    }
    let k = config.run.iterations;
    let column = |f: &dyn Fn(&Replication) -> &Vec<f64>, len: usize| -> Vec<Vec<f64>> {
        (0..len).map(|i| ok.iter().map(|r| f(r)[i]).collect()).collect()
    };
    let gap = Quantiles::from_columns(&column(&|r| &r.gap, k));
    let grad_norm = Quantiles::from_columns(&column(&|r| &r.grad_norm, k));
    let n = ok.len() as f64;
    let (mut drift_mean, mut drift_half_width) = (Vec::new(), Vec::new());
    for col in column(&|r| &r.drift, k.saturating_sub(1)) {
        let mean = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0);
        drift_mean.push(mean);
        drift_half_width.push((var / n).sqrt());
    }
    Ok(McSummary {
        reps,
        base_seed,
        failed,
        gap,
        grad_norm,
        drift_mean,
        drift_half_width,
    })
}

/// One sweep row.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: String,
    pub final_gap: f64,
    pub slope: Option<f64>,
    pub k1_holds: bool,
    pub k1plus_m: f64,
    pub special_class_c: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub axis: String,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{},final_gap,slope,k1_holds,k1plus_m,special_class_c\n", self.axis);
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.value,
                num(r.final_gap),
                r.slope.map(num).unwrap_or_default(),
                r.k1_holds,
                num(r.k1plus_m),
                num(r.special_class_c)
            ));
        }
        out
    }
}

/// Keys that hold a single scalar and can be swept.
const SWEEPABLE: &[&str] = &[
    "problem.dim",
    "problem.basis_seed",
    "problem.rows",
    "problem.rank",
    "problem.design_seed",
    "problem.data_seed",
    "problem.ridge",
    "schedule.kind",
    "schedule.alpha",
    "schedule.r",
    "schedule.clamp",
    "noise.family",
    "noise.sigma0",
    "noise.p",
    "noise.seed",
    "stepsize.rule",
    "stepsize.s0",
    "stepsize.d",
    "run.method",
    "run.iterations",
    "run.seed",
    "run.step_bound",
];

/// Run the template once per value of `axis` (`section.key`).
pub fn sweep(template: &IniDoc, base_dir: &Path, axis: &str, values: &[String]) -> Result<SweepTable> {
    if !SWEEPABLE.contains(&axis) {
        return Err(Error::config(format!(
            "invalid sweep axis `{axis}`; expected one of {}",
            SWEEPABLE.join(", ")
        )));
    }
    let (section, key) = axis.split_once('.').expect("sweepable keys are qualified");
    let mut rows = Vec::with_capacity(values.len());
    for value in values {
        let mut doc = template.clone();
        doc.set(section, key, value);
        let config = RunConfig::from_doc(&doc, base_dir)?;
        config.validate()?;
        let result = execute(&config)?;
        let report = check(&config, None)?;
        rows.push(SweepRow {
            value: value.clone(),
            final_gap: result.summary.final_gap,
            slope: result.summary.slope,
            k1_holds: report.k1_holds(),
            k1plus_m: report.k1plus_m,
            special_class_c: report.special_class_c,
        });
    }
    Ok(SweepTable {
        axis: axis.to_string(),
        rows,
    })
}

/// Condition report for the configured schedule on `[1, kmax]` (default: `K`).
pub fn check(config: &RunConfig, kmax: Option<usize>) -> Result<ConditionReport> {
    let k_max = kmax.unwrap_or(config.run.iterations).max(2);
    check_conditions(&config.schedule()?, 1, k_max, CHECK_TOL)
}

/// Sup error of the discrete Ravine scheme against the continuous model, per step size.
pub fn ode_compare_config(
    config: &RunConfig,
    s_values: &[f64],
    offset_c: f64,
    horizon: f64,
    model: OdeModel,
) -> Result<Vec<(f64, ErrorProfile)>> {
    let alpha = match config.schedule {
        ScheduleConfig::NesterovOffset { alpha } => alpha,
        _ => {
            return Err(Error::config(
                "ode-compare needs a nesterov_offset schedule (damping α/t)",
            ))
        }
    };
    let damping = DampingFunction::alpha_over_t(alpha).map_err(|e| Error::config(e.to_string()))?;
    let problem = config.build_problem()?;
    let y0 = config.x0()?;
    let l = problem.lipschitz();
    s_values
        .iter()
        .map(|&s| {
            if !(s > 0.0 && s <= 1.0 / l) {
                return Err(Error::config(format!("s = {s} outside (0, 1/L = {}]", 1.0 / l)));
            }
            Ok((s, ode_compare(&problem, &damping, s, &y0, horizon, offset_c, model)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> RunConfig {
        let c = RunConfig::parse_str(text, Path::new(".")).unwrap();
        c.validate().unwrap();
        c
    }

    #[test]
    fn quantiles_ordered_and_interpolated() {
        let s = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&s, 0.5), 3.0);
        assert!((quantile(&s, 0.1) - 1.4).abs() < 1e-12);
        assert!((quantile(&s, 0.9) - 4.6).abs() < 1e-12);
    }

    #[test]
    fn noiseless_mc_has_zero_spread() {
        let c = cfg("[problem]\ndim = 3\n[run]\niterations = 40\n");
        let mc = monte_carlo(&c, 4, 10).unwrap();
        assert_eq!(mc.succeeded(), 4);
        for i in 0..40 {
            assert_eq!(mc.gap.q10[i], mc.gap.q90[i]);
            assert_eq!(mc.gap.median[i], mc.gap.mean[i]);
        }
        assert!(mc.drift_half_width.iter().all(|h| *h == 0.0));
        assert_eq!(mc.drift_mean.len(), 39);
    }

    #[test]
    fn mc_quantiles_ordered_under_noise() {
        let c = cfg("[problem]\ndim = 3\n[noise]\nfamily = gaussian\nsigma0 = 0.1\n[run]\niterations = 30\n");
        let mc = monte_carlo(&c, 8, 0).unwrap();
        for q in [&mc.gap, &mc.grad_norm] {
            for i in 0..30 {
                assert!(q.q10[i] <= q.median[i] && q.median[i] <= q.q90[i]);
            }
        }
        assert_eq!(mc, monte_carlo(&c, 8, 0).unwrap());
        assert!(monte_carlo(&c, 1, 0).is_err());
    }

    #[test]
    fn sweep_rejects_bad_axis_and_handles_empty() {
        let doc = IniDoc::parse("[problem]\ndim = 3\n[run]\niterations = 20\n").unwrap();
        assert!(matches!(
            sweep(&doc, Path::new("."), "schedule.beta", &[]),
            Err(Error::Config { .. })
        ));
        assert!(sweep(&doc, Path::new("."), "run.x0", &[]).is_err());
        let t = sweep(&doc, Path::new("."), "schedule.alpha", &[]).unwrap();
        assert!(t.rows.is_empty());
        assert_eq!(t.to_csv(), "schedule.alpha,final_gap,slope,k1_holds,k1plus_m,special_class_c\n");
    }

    #[test]
    fn retained_records_counted() {
        let c = cfg("[problem]\ndim = 3\n[run]\niterations = 100\nrecord_every = 10\n");
        let r = execute(&c).unwrap();
        let body = r.trace_body(&c);
        assert_eq!(body.lines().count(), 11);
        assert_eq!(r.summary.records, 10);
        assert_eq!(r.diagnostics_body(&c).lines().count(), 11);
    }
}
