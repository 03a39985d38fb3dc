//! Experiment configuration: `[problem]`, `[schedule]`, `[noise]`, `[stepsize]`,
//! `[run]` and `[diagnostics]` sections. Every key has a documented default
//! except `[problem] dim` and `[run] iterations`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::ini::{Entry, IniDoc};
use crate::lyapunov::EnergySelection;
use crate::methods::{Method, RunSpec, StepBound, StepRule};
use crate::noise::{NoiseModel, SigmaSchedule};
use crate::problems::{gaussian_matrix, logistic_data, low_rank_design, Problem};
use crate::schedules::Schedule;
use crate::{Error, Matrix, Result, Vector};

/// A vector given either as a single value repeated `dim` times or as a list.
#[derive(Debug, Clone, PartialEq)]
pub enum VecSpec {
    Fill(f64),
    List(Vec<f64>),
}

impl VecSpec {
    pub fn resolve(&self, dim: usize, what: &str) -> Result<Vector> {
        match self {
            VecSpec::Fill(v) => Ok(Vector::from_element(dim, *v)),
            VecSpec::List(xs) if xs.len() == dim => Ok(Vector::from_column_slice(xs)),
            VecSpec::List(xs) => Err(Error::config(format!(
                "{what} has {} entries, expected {dim}",
                xs.len()
            ))),
        }
    }

    fn emit(&self) -> String {
        match self {
            VecSpec::Fill(v) => fmt_f(*v),
            VecSpec::List(xs) => join(xs),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Spectrum {
    /// `dim` points `10^a … 10^b`, log-evenly spaced.
    Logspace(f64, f64),
    List(Vec<f64>),
}

impl Spectrum {
    pub fn values(&self, dim: usize) -> Result<Vec<f64>> {
        match self {
            Spectrum::Logspace(a, b) => Ok((0..dim)
                .map(|i| {
                    let frac = if dim == 1 { 0.0 } else { i as f64 / (dim - 1) as f64 };
                    10f64.powf(a + (b - a) * frac)
                })
                .collect()),
            Spectrum::List(v) if v.len() == dim => Ok(v.clone()),
            Spectrum::List(v) => Err(Error::config(format!(
                "spectrum has {} entries, expected {dim}",
                v.len()
            ))),
        }
    }

    fn emit(&self) -> String {
        match self {
            Spectrum::Logspace(a, b) => format!("logspace({}, {})", fmt_f(*a), fmt_f(*b)),
            Spectrum::List(v) => join(v),
        }
    }
}

/// Where a matrix comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum MatrixSource {
    /// Rows separated by `;`, entries by whitespace or commas.
    Inline(Vec<Vec<f64>>),
    /// Whitespace-separated reals, one row per line; relative to the config file.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum QuadraticSource {
    Spectrum {
        spectrum: Spectrum,
        basis_seed: Option<u64>,
    },
    Matrix(MatrixSource),
}

#[derive(Debug, Clone, PartialEq)]
pub enum DesignSource {
    Generated { seed: u64, rank: usize },
    Matrix(MatrixSource),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemConfig {
    Quadratic {
        dim: usize,
        source: QuadraticSource,
        b: VecSpec,
    },
    LeastSquares {
        dim: usize,
        rows: usize,
        design: DesignSource,
        /// `None`: Gaussian targets seeded from the design seed.
        targets: Option<VecSpec>,
    },
    Logistic {
        dim: usize,
        rows: usize,
        data_seed: u64,
        ridge: f64,
    },
}

impl ProblemConfig {
    pub fn dim(&self) -> usize {
        match self {
            ProblemConfig::Quadratic { dim, .. }
            | ProblemConfig::LeastSquares { dim, .. }
            | ProblemConfig::Logistic { dim, .. } => *dim,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleConfig {
    NesterovOffset { alpha: f64 },
    NesterovRatio { alpha: f64 },
    Power { alpha: f64, r: f64 },
    Constant { alpha: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    pub gaussian: bool,
    /// `σ_k = sigma0 / k^p`.
    pub sigma0: f64,
    pub p: f64,
}

/// `s0` either relative to `1/L` or absolute.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    OverL(f64),
    Absolute(f64),
}

impl StepSize {
    pub fn resolve(&self, lipschitz: f64) -> f64 {
        match *self {
            StepSize::OverL(c) => c / lipschitz,
            StepSize::Absolute(s) => s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    pub s0: StepSize,
    /// Decay exponent; `0` is the constant rule.
    pub d: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSection {
    pub method: Method,
    pub iterations: usize,
    pub seed: u64,
    pub record_every: usize,
    /// Iterations `k ≤ dense_prefix` are always retained.
    pub dense_prefix: usize,
    pub step_bound: StepBound,
}

impl RunSection {
    pub fn retains(&self, k: usize) -> bool {
        k <= self.dense_prefix || k.is_multiple_of(self.record_every)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsConfig {
    pub energies: EnergySelection,
    /// Slope window; `None` is the last decade `[K/10, K]`.
    pub rate_window: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub schedule: ScheduleConfig,
    pub clamp: bool,
    pub noise: NoiseConfig,
    pub step: StepConfig,
    pub run: RunSection,
    pub diagnostics: DiagnosticsConfig,
    /// Starting point (`x_1` for NAG, `y_1` for RAG); default all ones.
    pub x0: VecSpec,
    /// Directory that relative file paths are resolved against (not emitted).
    pub base_dir: PathBuf,
}

const KEYS: &[(&str, &[&str])] = &[
    (
        "problem",
        &[
            "kind", "dim", "spectrum", "basis_seed", "matrix", "matrix_file", "b", "rows",
            "rank", "design_seed", "design", "design_file", "targets", "data_seed", "ridge",
        ],
    ),
    ("schedule", &["kind", "alpha", "r", "clamp"]),
    ("noise", &["family", "sigma0", "p", "seed"]),
    ("stepsize", &["rule", "s0", "d"]),
    (
        "run",
        &["method", "iterations", "seed", "record_every", "dense_prefix", "step_bound", "x0"],
    ),
    ("diagnostics", &["energies", "rate_window"]),
];

/// Read and validate a config file; relative paths resolve against its directory.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let config = RunConfig::parse_str(&text, &base)?;
    config.validate()?;
    Ok(config)
}

impl RunConfig {
    /// Parse without the `s0 ≤ 1/L` check (which needs the problem built).
    pub fn parse_str(text: &str, base_dir: &Path) -> Result<Self> {
        Self::from_doc(&IniDoc::parse(text)?, base_dir)
    }

    pub fn from_doc(doc: &IniDoc, base_dir: &Path) -> Result<Self> {
        for sec in &doc.sections {
            let allowed = KEYS
                .iter()
                .find(|(name, _)| *name == sec.name)
                .ok_or_else(|| Error::config_at(sec.line, format!("unknown section [{}]", sec.name)))?
                .1;
            for e in &sec.entries {
                if !allowed.contains(&e.key.as_str()) {
                    return Err(at(e, format!("unknown key `{}` in [{}]", e.key, sec.name)));
                }
            }
        }
        let r = Reader { doc };
        let problem = r.problem()?;
        let (schedule, clamp) = r.schedule()?;
        let (noise, noise_seed) = r.noise()?;
        let step = r.step()?;
        let run = r.run(noise_seed)?;
        let diagnostics = r.diagnostics()?;
        let x0 = r.vec_spec("run", "x0")?.unwrap_or(VecSpec::Fill(1.0));
        if diagnostics.energies.e && step.d != 0.0 {
            let line = doc.get("diagnostics", "energies").map(|e| e.line);
            return Err(Error::Config {
                line,
                msg: "energy E requires a constant step; drop E from energies".into(),
            });
        }
        if let Some((lo, hi)) = diagnostics.rate_window {
            if hi > run.iterations {
                return Err(Error::config(format!(
                    "rate_window {lo},{hi} exceeds iterations {}",
                    run.iterations
                )));
            }
        }
        Ok(RunConfig {
            problem,
            schedule,
            clamp,
            noise,
            step,
            run,
            diagnostics,
            x0,
            base_dir: base_dir.to_path_buf(),
        })
    }

    /// Load-time constraints that need the built problem.
    pub fn validate(&self) -> Result<()> {
        let problem = self.build_problem()?;
        let l = problem.lipschitz();
        let s0 = self.step.s0.resolve(l);
        if !(s0 > 0.0) {
            return Err(Error::config(format!("s0 must be positive, got {s0}")));
        }
        if self.run.step_bound == StepBound::Enforce && s0 > (1.0 + 1e-12) / l {
            return Err(Error::config(format!(
                "s0 = {s0} exceeds the bound 1/L = {} (L = {l})",
                1.0 / l
            )));
        }
        self.schedule()?;
        self.x0()?;
        Ok(())
    }

    /// Canonical text form with every default spelled out.
    pub fn emit(&self) -> String {
        let mut o = String::new();
        o.push_str("[problem]\n");
        match &self.problem {
            ProblemConfig::Quadratic { dim, source, b } => {
                kv(&mut o, "kind", "quadratic");
                kv(&mut o, "dim", dim);
                match source {
                    QuadraticSource::Spectrum { spectrum, basis_seed } => {
                        kv(&mut o, "spectrum", spectrum.emit());
                        if let Some(s) = basis_seed {
                            kv(&mut o, "basis_seed", s);
                        }
                    }
                    QuadraticSource::Matrix(MatrixSource::Inline(rows)) => {
                        kv(&mut o, "matrix", emit_rows(rows))
                    }
                    QuadraticSource::Matrix(MatrixSource::File(p)) => {
                        kv(&mut o, "matrix_file", p.display())
                    }
                }
                kv(&mut o, "b", b.emit());
            }
            ProblemConfig::LeastSquares {
                dim,
                rows,
                design,
                targets,
            } => {
                kv(&mut o, "kind", "least_squares");
                kv(&mut o, "dim", dim);
                kv(&mut o, "rows", rows);
                match design {
                    DesignSource::Generated { seed, rank } => {
                        kv(&mut o, "design_seed", seed);
                        kv(&mut o, "rank", rank);
                    }
                    DesignSource::Matrix(MatrixSource::Inline(r)) => {
                        kv(&mut o, "design", emit_rows(r))
                    }
                    DesignSource::Matrix(MatrixSource::File(p)) => {
                        kv(&mut o, "design_file", p.display())
                    }
                }
                if let Some(t) = targets {
                    kv(&mut o, "targets", t.emit());
                }
            }
            ProblemConfig::Logistic {
                dim,
                rows,
                data_seed,
                ridge,
            } => {
                kv(&mut o, "kind", "logistic");
                kv(&mut o, "dim", dim);
                kv(&mut o, "rows", rows);
                kv(&mut o, "data_seed", data_seed);
                kv(&mut o, "ridge", fmt_f(*ridge));
            }
        }
        o.push_str("\n[schedule]\n");
        let (kind, alpha, r) = match self.schedule {
            ScheduleConfig::NesterovOffset { alpha } => ("nesterov_offset", alpha, None),
            ScheduleConfig::NesterovRatio { alpha } => ("nesterov_ratio", alpha, None),
            ScheduleConfig::Power { alpha, r } => ("power", alpha, Some(r)),
            ScheduleConfig::Constant { alpha } => ("constant", alpha, None),
        };
        kv(&mut o, "kind", kind);
        kv(&mut o, "alpha", fmt_f(alpha));
        if let Some(r) = r {
            kv(&mut o, "r", fmt_f(r));
        }
        kv(&mut o, "clamp", self.clamp);
        o.push_str("\n[noise]\n");
        kv(&mut o, "family", if self.noise.gaussian { "gaussian" } else { "none" });
        kv(&mut o, "sigma0", fmt_f(self.noise.sigma0));
        kv(&mut o, "p", fmt_f(self.noise.p));
        o.push_str("\n[stepsize]\n");
        kv(&mut o, "rule", if self.step.d == 0.0 { "constant" } else { "poly" });
        kv(
            &mut o,
            "s0",
            match self.step.s0 {
                StepSize::OverL(c) => format!("{}/L", fmt_f(c)),
                StepSize::Absolute(s) => fmt_f(s),
            },
        );
        kv(&mut o, "d", fmt_f(self.step.d));
        o.push_str("\n[run]\n");
        kv(&mut o, "method", self.run.method.name());
        kv(&mut o, "iterations", self.run.iterations);
        kv(&mut o, "seed", self.run.seed);
        kv(&mut o, "record_every", self.run.record_every);
        kv(&mut o, "dense_prefix", self.run.dense_prefix);
        kv(
            &mut o,
            "step_bound",
            match self.run.step_bound {
                StepBound::Enforce => "enforce",
                StepBound::Warn => "warn",
            },
        );
        kv(&mut o, "x0", self.x0.emit());
        o.push_str("\n[diagnostics]\n");
        let e = self.diagnostics.energies;
        let names: Vec<&str> = [(e.v, "V"), (e.w, "W"), (e.e, "E")]
            .iter()
            .filter(|(on, _)| *on)
            .map(|(_, n)| *n)
            .collect();
        kv(&mut o, "energies", if names.is_empty() { "none".to_string() } else { names.join(",") });
        kv(
            &mut o,
            "rate_window",
            match self.diagnostics.rate_window {
                None => "auto".to_string(),
                Some((lo, hi)) => format!("{lo},{hi}"),
            },
        );
        o
    }

    /// First 16 hex digits of the SHA-256 of the canonical form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.emit().as_bytes());
        digest.iter().take(8).fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    pub fn build_problem(&self) -> Result<Problem> {
        let built = match &self.problem {
            ProblemConfig::Quadratic { dim, source, b } => {
                let b = b.resolve(*dim, "b")?;
                match source {
                    QuadraticSource::Spectrum { spectrum, basis_seed } => {
                        Problem::quadratic_from_spectrum(&spectrum.values(*dim)?, *basis_seed, b)
                    }
                    QuadraticSource::Matrix(m) => {
                        Problem::quadratic(self.load_matrix(m, *dim, *dim)?, b)
                    }
                }
            }
            ProblemConfig::LeastSquares {
                dim,
                rows,
                design,
                targets,
            } => {
                let (m, seed) = match design {
                    DesignSource::Generated { seed, rank } => {
                        (low_rank_design(*rows, *dim, *rank, *seed), *seed)
                    }
                    DesignSource::Matrix(src) => (self.load_matrix(src, *rows, *dim)?, 0),
                };
                let y = match targets {
                    Some(t) => t.resolve(*rows, "targets")?,
                    None => gaussian_matrix(*rows, 1, seed.wrapping_add(1)).column(0).into_owned(),
                };
                Problem::least_squares(m, y)
            }
            ProblemConfig::Logistic {
                dim,
                rows,
                data_seed,
                ridge,
            } => {
                let (x, labels) = logistic_data(*rows, *dim, *data_seed);
                Problem::logistic(x, labels, *ridge)
            }
        };
        built.map_err(|e| match e {
            Error::Config { .. } => e,
            other => Error::config(format!("invalid problem: {other}")),
        })
    }

    pub fn schedule(&self) -> Result<Schedule> {
        let s = match self.schedule {
            ScheduleConfig::NesterovOffset { alpha } => Schedule::nesterov_offset(alpha),
            ScheduleConfig::NesterovRatio { alpha } => Schedule::nesterov_ratio(alpha),
            ScheduleConfig::Power { alpha, r } => Schedule::power(alpha, r),
            ScheduleConfig::Constant { alpha } => Schedule::constant(alpha),
        }
        .map_err(|e| Error::config(format!("invalid schedule: {e}")))?;
        Ok(s.with_clamp(self.clamp))
    }

    pub fn noise_model(&self, seed: u64) -> NoiseModel {
        let dim = self.problem.dim();
        if !self.noise.gaussian {
            return NoiseModel::none(dim);
        }
        let sched = if self.noise.p == 0.0 {
            SigmaSchedule::Constant(self.noise.sigma0)
        } else {
            SigmaSchedule::Polynomial {
                sigma0: self.noise.sigma0,
                p: self.noise.p,
            }
        };
        NoiseModel::gaussian(dim, sched, seed)
    }

    pub fn step_rule(&self, lipschitz: f64) -> StepRule {
        StepRule::poly(self.step.s0.resolve(lipschitz), self.step.d)
    }

    pub fn x0(&self) -> Result<Vector> {
        self.x0.resolve(self.problem.dim(), "x0")
    }

    /// Run specification for a given noise seed.
    pub fn run_spec(&self, problem: &Problem, seed: u64) -> Result<RunSpec> {
        Ok(RunSpec {
            method: self.run.method,
            schedule: self.schedule()?,
            noise: self.noise_model(seed),
            step: self.step_rule(problem.lipschitz()),
            iterations: self.run.iterations,
            x0: self.x0()?,
            step_bound: self.run.step_bound,
        })
    }

    fn load_matrix(&self, src: &MatrixSource, rows: usize, cols: usize) -> Result<Matrix> {
        let data = match src {
            MatrixSource::Inline(r) => r.clone(),
            MatrixSource::File(p) => {
                let path = self.base_dir.join(p);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
                text.lines()
                    .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
                    .map(|l| parse_reals(l.split_whitespace()))
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|bad| Error::config(format!("{}: not a number: `{bad}`", path.display())))?
            }
        };
        if data.len() != rows || data.iter().any(|r| r.len() != cols) {
            return Err(Error::config(format!("matrix must be {rows}x{cols}")));
        }
        Ok(Matrix::from_fn(rows, cols, |i, j| data[i][j]))
    }
}

struct Reader<'a> {
    doc: &'a IniDoc,
}

impl Reader<'_> {
    fn entry(&self, sec: &str, key: &str) -> Option<&Entry> {
        self.doc.get(sec, key)
    }

    fn f64(&self, sec: &str, key: &str) -> Result<Option<f64>> {
        self.entry(sec, key).map(parse_f64).transpose()
    }

    fn u64(&self, sec: &str, key: &str) -> Result<Option<u64>> {
        self.entry(sec, key)
            .map(|e| {
                e.value
                    .parse::<u64>()
                    .map_err(|_| at(e, format!("`{}` expects a non-negative integer", e.key)))
            })
            .transpose()
    }

    fn usize(&self, sec: &str, key: &str) -> Result<Option<usize>> {
        Ok(self.u64(sec, key)?.map(|v| v as usize))
    }

    fn str(&self, sec: &str, key: &str) -> Option<&str> {
        self.entry(sec, key).map(|e| e.value.as_str())
    }

    fn forbid(&self, sec: &str, keys: &[&str], why: &str) -> Result<()> {
        for k in keys {
            if let Some(e) = self.entry(sec, k) {
                return Err(at(e, format!("`{k}` is not used {why}")));
            }
        }
        Ok(())
    }

    fn problem(&self) -> Result<ProblemConfig> {
        const S: &str = "problem";
        if self.doc.section(S).is_none() {
            return Err(Error::config("missing [problem] section"));
        }
        let dim = self
            .usize(S, "dim")?
            .filter(|d| *d >= 1)
            .ok_or_else(|| Error::config("[problem] needs dim ≥ 1"))?;
        let kind = self.str(S, "kind").unwrap_or("quadratic");
        match kind {
            "quadratic" => {
                self.forbid(
                    S,
                    &["rows", "rank", "design_seed", "design", "design_file", "targets", "data_seed", "ridge"],
                    "by quadratic problems",
                )?;
                let source = match (self.entry(S, "matrix"), self.entry(S, "matrix_file")) {
                    (Some(_), Some(e)) => return Err(at(e, "give either matrix or matrix_file")),
                    (Some(e), None) => {
                        self.forbid(S, &["spectrum", "basis_seed"], "with an explicit matrix")?;
                        QuadraticSource::Matrix(MatrixSource::Inline(parse_rows(e)?))
                    }
                    (None, Some(e)) => {
                        self.forbid(S, &["spectrum", "basis_seed"], "with an explicit matrix")?;
                        QuadraticSource::Matrix(MatrixSource::File(PathBuf::from(&e.value)))
                    }
                    (None, None) => QuadraticSource::Spectrum {
                        spectrum: match self.entry(S, "spectrum") {
                            Some(e) => parse_spectrum(e)?,
                            None => Spectrum::Logspace(0.0, -6.0),
                        },
                        basis_seed: self.u64(S, "basis_seed")?,
                    },
                };
                let b = self.vec_spec(S, "b")?.unwrap_or(VecSpec::Fill(0.0));
                Ok(ProblemConfig::Quadratic { dim, source, b })
            }
            "least_squares" => {
                self.forbid(
                    S,
                    &["spectrum", "basis_seed", "matrix", "matrix_file", "b", "data_seed", "ridge"],
                    "by least_squares problems",
                )?;
                let rows = self.usize(S, "rows")?.unwrap_or(dim);
                let design = match (self.entry(S, "design"), self.entry(S, "design_file")) {
                    (Some(_), Some(e)) => return Err(at(e, "give either design or design_file")),
                    (Some(e), None) => DesignSource::Matrix(MatrixSource::Inline(parse_rows(e)?)),
                    (None, Some(e)) => DesignSource::Matrix(MatrixSource::File(PathBuf::from(&e.value))),
                    (None, None) => {
                        let rank = self.usize(S, "rank")?.unwrap_or(rows.min(dim));
                        if rank == 0 || rank > rows.min(dim) {
                            return Err(Error::config(format!(
                                "rank must be in 1..={}",
                                rows.min(dim)
                            )));
                        }
                        DesignSource::Generated {
                            seed: self.u64(S, "design_seed")?.unwrap_or(0),
                            rank,
                        }
                    }
                };
                if matches!(design, DesignSource::Matrix(_)) {
                    self.forbid(S, &["rank", "design_seed"], "with an explicit design")?;
                }
                Ok(ProblemConfig::LeastSquares {
                    dim,
                    rows,
                    design,
                    targets: self.vec_spec(S, "targets")?,
                })
            }
            "logistic" => {
                self.forbid(
                    S,
                    &["spectrum", "basis_seed", "matrix", "matrix_file", "b", "rank", "design_seed", "design", "design_file", "targets"],
                    "by logistic problems",
                )?;
                let ridge = self.f64(S, "ridge")?.unwrap_or(0.0);
                if ridge < 0.0 {
                    return Err(Error::config("ridge must be non-negative"));
                }
                Ok(ProblemConfig::Logistic {
                    dim,
                    rows: self.usize(S, "rows")?.unwrap_or(4 * dim),
                    data_seed: self.u64(S, "data_seed")?.unwrap_or(0),
                    ridge,
                })
            }
            other => Err(at(
                self.entry(S, "kind").expect("kind given"),
                format!("unknown problem kind `{other}` (quadratic, least_squares, logistic)"),
            )),
        }
    }

    fn vec_spec(&self, sec: &str, key: &str) -> Result<Option<VecSpec>> {
        let Some(e) = self.entry(sec, key) else {
            return Ok(None);
        };
        let spec = match e.value.as_str() {
            "ones" => VecSpec::Fill(1.0),
            "zeros" => VecSpec::Fill(0.0),
            v if v.contains(',') => VecSpec::List(parse_list(e)?),
            _ => VecSpec::Fill(parse_f64(e)?),
        };
        Ok(Some(spec))
    }

    fn schedule(&self) -> Result<(ScheduleConfig, bool)> {
        const S: &str = "schedule";
        let kind = self.str(S, "kind").unwrap_or("nesterov_offset");
        let alpha = self.f64(S, "alpha")?;
        let r = self.f64(S, "r")?;
        if kind != "power" {
            self.forbid(S, &["r"], "by this schedule kind")?;
        }
        let sched = match kind {
            "nesterov_offset" => ScheduleConfig::NesterovOffset {
                alpha: alpha.unwrap_or(3.0),
            },
            "nesterov_ratio" => ScheduleConfig::NesterovRatio {
                alpha: alpha.unwrap_or(3.0),
            },
            "power" => ScheduleConfig::Power {
                alpha: alpha.unwrap_or(1.0),
                r: r.ok_or_else(|| Error::config("power schedule needs r"))?,
            },
            "constant" => ScheduleConfig::Constant {
                alpha: alpha.ok_or_else(|| Error::config("constant schedule needs alpha"))?,
            },
            other => {
                return Err(at(
                    self.entry(S, "kind").expect("kind given"),
                    format!("unknown schedule kind `{other}`"),
                ))
            }
        };
        let clamp = match self.entry(S, "clamp") {
            None => true,
            Some(e) => parse_bool(e)?,
        };
        Ok((sched, clamp))
    }

    fn noise(&self) -> Result<(NoiseConfig, Option<&Entry>)> {
        const S: &str = "noise";
        let gaussian = match self.entry(S, "family") {
            None => false,
            Some(e) => match e.value.as_str() {
                "none" => false,
                "gaussian" => true,
                other => return Err(at(e, format!("unknown noise family `{other}` (none, gaussian)"))),
            },
        };
        let sigma0 = self.f64(S, "sigma0")?.unwrap_or(0.0);
        let p = self.f64(S, "p")?.unwrap_or(0.0);
        if sigma0 < 0.0 || p < 0.0 {
            return Err(Error::config("sigma0 and p must be non-negative"));
        }
        if gaussian && self.entry(S, "sigma0").is_none() {
            return Err(Error::config("gaussian noise needs sigma0"));
        }
        Ok((NoiseConfig { gaussian, sigma0, p }, self.entry(S, "seed")))
    }

    fn step(&self) -> Result<StepConfig> {
        const S: &str = "stepsize";
        let s0 = match self.entry(S, "s0") {
            None => StepSize::OverL(1.0),
            Some(e) => match e.value.strip_suffix("/L") {
                Some(c) => StepSize::OverL(
                    c.trim()
                        .parse()
                        .map_err(|_| at(e, format!("s0 `{}` is not `c/L` or a number", e.value)))?,
                ),
                None => StepSize::Absolute(parse_f64(e)?),
            },
        };
        let d = self.f64(S, "d")?.unwrap_or(0.0);
        match self.entry(S, "rule") {
            None => {}
            Some(e) if e.value == "constant" => {
                if d != 0.0 {
                    return Err(at(e, "rule = constant requires d = 0"));
                }
            }
            Some(e) if e.value == "poly" => {
                if d <= 0.0 {
                    return Err(at(e, "rule = poly requires d > 0"));
                }
            }
            Some(e) => return Err(at(e, format!("unknown step rule `{}` (constant, poly)", e.value))),
        }
        if d < 0.0 {
            return Err(Error::config("d must be non-negative"));
        }
        Ok(StepConfig { s0, d })
    }

    fn run(&self, noise_seed: Option<&Entry>) -> Result<RunSection> {
        const S: &str = "run";
        let method = match self.entry(S, "method") {
            None => Method::Rag,
            Some(e) => match e.value.as_str() {
                "nag" => Method::Nag,
                "rag" => Method::Rag,
                other => return Err(at(e, format!("unknown method `{other}` (nag, rag)"))),
            },
        };
        let iterations = self
            .usize(S, "iterations")?
            .ok_or_else(|| Error::config("[run] needs iterations"))?;
        if iterations == 0 {
            return Err(at(self.entry(S, "iterations").expect("given"), "iterations must be ≥ 1"));
        }
        let seed = match (self.entry(S, "seed"), noise_seed) {
            (Some(_), Some(e)) => {
                return Err(at(e, "seed given in both [run] and [noise]; keep one"))
            }
            (Some(_), None) => self.u64(S, "seed")?.expect("given"),
            (None, Some(e)) => e
                .value
                .parse()
                .map_err(|_| at(e, "`seed` expects a non-negative integer"))?,
            (None, None) => 0,
        };
        let record_every = self.usize(S, "record_every")?.unwrap_or(1);
        if record_every == 0 {
            return Err(at(self.entry(S, "record_every").expect("given"), "record_every must be ≥ 1"));
        }
        let step_bound = match self.entry(S, "step_bound") {
            None => StepBound::Enforce,
            Some(e) => match e.value.as_str() {
                "enforce" => StepBound::Enforce,
                "warn" => StepBound::Warn,
                other => return Err(at(e, format!("unknown step_bound `{other}` (enforce, warn)"))),
            },
        };
        Ok(RunSection {
            method,
            iterations,
            seed,
            record_every,
            dense_prefix: self.usize(S, "dense_prefix")?.unwrap_or(0),
            step_bound,
        })
    }

    fn diagnostics(&self) -> Result<DiagnosticsConfig> {
        const S: &str = "diagnostics";
        let energies = match self.entry(S, "energies") {
            None => EnergySelection::default(),
            Some(e) if e.value == "none" => EnergySelection {
                v: false,
                w: false,
                e: false,
            },
            Some(e) => {
                let mut sel = EnergySelection {
                    v: false,
                    w: false,
                    e: false,
                };
                for name in e.value.split(',').map(str::trim) {
                    match name {
                        "V" => sel.v = true,
                        "W" => sel.w = true,
                        "E" => sel.e = true,
                        other => return Err(at(e, format!("unknown energy `{other}` (V, W, E)"))),
                    }
                }
                sel
            }
        };
        let rate_window = match self.entry(S, "rate_window") {
            None => None,
            Some(e) if e.value == "auto" => None,
            Some(e) => {
                let parts: Vec<&str> = e.value.split(',').map(str::trim).collect();
                let parsed: Option<Vec<usize>> = parts.iter().map(|p| p.parse().ok()).collect();
                match parsed.as_deref() {
                    Some(&[lo, hi]) if lo >= 1 && hi > lo => Some((lo, hi)),
                    _ => return Err(at(e, "rate_window must be `auto` or `lo,hi` with 1 ≤ lo < hi")),
                }
            }
        };
        Ok(DiagnosticsConfig {
            energies,
            rate_window,
        })
    }
}

fn at(e: &Entry, msg: impl Into<String>) -> Error {
    if e.line == 0 {
        Error::config(msg)
    } else {
        Error::config_at(e.line, msg)
    }
}

fn parse_f64(e: &Entry) -> Result<f64> {
    match e.value.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(at(e, format!("`{}` expects a finite number, got `{}`", e.key, e.value))),
    }
}

fn parse_bool(e: &Entry) -> Result<bool> {
    match e.value.as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(at(e, format!("`{}` expects true or false", e.key))),
    }
}

fn parse_reals<'a>(items: impl Iterator<Item = &'a str>) -> std::result::Result<Vec<f64>, String> {
    items
        .filter(|s| !s.is_empty())
        .map(|s| match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(s.to_string()),
        })
        .collect()
}

fn parse_list(e: &Entry) -> Result<Vec<f64>> {
    parse_reals(e.value.split(',').map(str::trim))
        .map_err(|bad| at(e, format!("`{}`: not a number: `{bad}`", e.key)))
}

fn parse_rows(e: &Entry) -> Result<Vec<Vec<f64>>> {
    e.value
        .split(';')
        .map(|row| parse_reals(row.split(|c: char| c == ',' || c.is_whitespace())))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|bad| at(e, format!("`{}`: not a number: `{bad}`", e.key)))
}

fn parse_spectrum(e: &Entry) -> Result<Spectrum> {
    if let Some(inner) = e.value.strip_prefix("logspace(").and_then(|r| r.strip_suffix(')')) {
        let v = parse_reals(inner.split(',').map(str::trim))
            .map_err(|bad| at(e, format!("logspace: not a number: `{bad}`")))?;
        return match v.as_slice() {
            &[a, b] => Ok(Spectrum::Logspace(a, b)),
            _ => Err(at(e, "logspace takes two exponents")),
        };
    }
    let v = parse_list(e)?;
    if v.iter().any(|x| *x <= 0.0) {
        return Err(at(e, "spectrum entries must be positive"));
    }
    Ok(Spectrum::List(v))
}

/// Shortest representation that parses back to the same `f64`.
fn fmt_f(v: f64) -> String {
    format!("{v:?}")
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| fmt_f(*x)).collect::<Vec<_>>().join(", ")
}

fn emit_rows(rows: &[Vec<f64>]) -> String {
    rows.iter()
        .map(|r| r.iter().map(|x| fmt_f(*x)).collect::<Vec<_>>().join(" "))
        .collect::<Vec<_>>()
        .join("; ")
}

fn kv(o: &mut String, key: &str, value: impl std::fmt::Display) {
    let _ = writeln!(o, "{key} = {value}");
}
