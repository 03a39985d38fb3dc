//! Convex differentiable test objectives.
//!
//! Every problem carries exact gradients and Hessian-vector products, a
//! Lipschitz constant for its gradient, the minimum value and a description of
//! its solution set. Quadratic and least-squares problems additionally expose a
//! closed-form proximal map.

use nalgebra::linalg::SymmetricEigen;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Error, Matrix, Result, Vector};

/// Relative tolerance of the power iteration used for Lipschitz constants.
pub const POWER_ITERATION_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub enum ProblemKind {
    /// `½ xᵀAx + bᵀx` with `A` symmetric positive definite.
    Quadratic { a: Matrix, b: Vector },
    /// `½ ‖Mx − y‖²`, possibly with a nontrivial kernel.
    LeastSquares { design: Matrix, targets: Vector },
    /// Mean logistic loss over rows of `data` with labels in {−1, +1}, plus `½ ridge ‖x‖²`.
    Logistic {
        data: Matrix,
        labels: Vector,
        ridge: f64,
    },
}

/// Projector onto the affine solution set `{x : Hx + c = 0}` of a convex
/// quadratic form, `P_S(x) = x − H⁺(Hx + c)`.
#[derive(Debug, Clone)]
struct AffineProjector {
    hessian: Matrix,
    pinv: Matrix,
    linear: Vector,
}

impl AffineProjector {
    fn project(&self, x: &Vector) -> Vector {
        let residual = &self.hessian * x + &self.linear;
        x - &self.pinv * residual
    }
}

#[derive(Debug, Clone)]
pub struct Problem {
    kind: ProblemKind,
    dim: usize,
    lipschitz: f64,
    f_min: f64,
    x_star: Option<Vector>,
    projector: Option<AffineProjector>,
    // Hessian and linear term of the quadratic form (quadratic and least squares).
    hessian: Option<Matrix>,
    linear: Option<Vector>,
}

impl Problem {
    /// Strongly convex quadratic `½ xᵀAx + bᵀx`.
    pub fn quadratic(a: Matrix, b: Vector) -> Result<Self> {
        let dim = a.nrows();
        if a.ncols() != dim {
            return Err(Error::Contract("quadratic matrix must be square".into()));
        }
        check_dim(dim, b.len())?;
        let asym = (&a - a.transpose()).amax();
        if asym > 1e-12 * a.amax().max(1.0) {
            return Err(Error::Contract("quadratic matrix must be symmetric".into()));
        }
        let chol = a.clone().cholesky().ok_or_else(|| {
            Error::Contract(
                "quadratic matrix must be positive definite (use least_squares for non-unique minimizers)"
                    .into(),
            )
        })?;
        let x_star = chol.solve(&(-&b));
        let f_min = 0.5 * b.dot(&x_star);
        let lipschitz = power_iteration(|v| &a * v, dim, POWER_ITERATION_TOL);
        Ok(Self {
            dim,
            lipschitz,
            f_min,
            x_star: Some(x_star),
            projector: None,
            hessian: Some(a.clone()),
            linear: Some(b.clone()),
            kind: ProblemKind::Quadratic { a, b },
        })
    }

    /// Quadratic with prescribed eigenvalues. With a `basis_seed` the
    /// eigenvectors are a seeded random orthogonal basis, otherwise `A` is diagonal.
    pub fn quadratic_from_spectrum(
        eigenvalues: &[f64],
        basis_seed: Option<u64>,
        b: Vector,
    ) -> Result<Self> {
        let dim = eigenvalues.len();
        if dim == 0 {
            return Err(Error::Contract("empty spectrum".into()));
        }
        let diag = Matrix::from_diagonal(&Vector::from_column_slice(eigenvalues));
        let a = match basis_seed {
            None => diag,
            Some(seed) => {
                let q = random_orthogonal(dim, seed);
                let mut a = &q * diag * q.transpose();
                // exact symmetry
                a = (&a + a.transpose()) * 0.5;
                a
            }
        };
        Self::quadratic(a, b)
    }

    /// Least squares `½ ‖Mx − y‖²`. Rank-deficient designs get an exact
    /// projector onto the affine solution set.
    pub fn least_squares(design: Matrix, targets: Vector) -> Result<Self> {
        if design.nrows() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: design.nrows(),
                got: targets.len(),
            });
        }
        let dim = design.ncols();
        let hessian = design.transpose() * &design;
        let linear = -(design.transpose() * &targets);
        let pinv = symmetric_pinv(&hessian);
        let x_star = -(&pinv * &linear);
        let residual = &design * &x_star - &targets;
        let f_min = 0.5 * residual.norm_squared();
        let rank = symmetric_rank(&hessian);
        let lipschitz = power_iteration(|v| &hessian * v, dim, POWER_ITERATION_TOL);
        let projector = (rank < dim).then(|| AffineProjector {
            hessian: hessian.clone(),
            pinv,
            linear: linear.clone(),
        });
        Ok(Self {
            dim,
            lipschitz,
            f_min,
            x_star: Some(x_star),
            projector,
            hessian: Some(hessian),
            linear: Some(linear),
            kind: ProblemKind::LeastSquares { design, targets },
        })
    }

    /// Regularised logistic regression. The minimizer is found by damped Newton.
    pub fn logistic(data: Matrix, labels: Vector, ridge: f64) -> Result<Self> {
        if data.nrows() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: data.nrows(),
                got: labels.len(),
            });
        }
        if ridge < 0.0 {
            return Err(Error::Contract("ridge must be non-negative".into()));
        }
        if labels.iter().any(|&l| l != 1.0 && l != -1.0) {
            return Err(Error::Contract("logistic labels must be ±1".into()));
        }
        let dim = data.ncols();
        let n = data.nrows() as f64;
        let gram = data.transpose() * &data;
        let lipschitz = power_iteration(|v| &gram * v, dim, POWER_ITERATION_TOL) / (4.0 * n) + ridge;
        let mut problem = Self {
            dim,
            lipschitz,
            f_min: 0.0,
            x_star: None,
            projector: None,
            hessian: None,
            linear: None,
            kind: ProblemKind::Logistic {
                data,
                labels,
                ridge,
            },
        };
        let x_star = problem.newton_minimize()?;
        problem.f_min = problem.value(&x_star);
        problem.x_star = Some(x_star);
        Ok(problem)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn f_min(&self) -> f64 {
        self.f_min
    }

    pub fn x_star(&self) -> Option<&Vector> {
        self.x_star.as_ref()
    }

    pub fn kind(&self) -> &ProblemKind {
        &self.kind
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            ProblemKind::Quadratic { .. } => "quadratic",
            ProblemKind::LeastSquares { .. } => "least_squares",
            ProblemKind::Logistic { .. } => "logistic",
        }
    }

    /// Whether the solution set is a single point.
    pub fn has_unique_minimizer(&self) -> bool {
        self.projector.is_none()
    }

    pub fn evaluate(&self, x: &Vector) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        Ok(self.value(x))
    }

    pub fn gradient(&self, x: &Vector) -> Result<Vector> {
        check_dim(self.dim, x.len())?;
        Ok(self.grad(x))
    }

    pub fn hessian_vec(&self, x: &Vector, v: &Vector) -> Result<Vector> {
        check_dim(self.dim, x.len())?;
        check_dim(self.dim, v.len())?;
        Ok(self.hess_vec(x, v))
    }

    /// `argmin_u { f(u) + ‖u − x‖² / (2s) }`, available for quadratic forms.
    pub fn prox(&self, s: f64, x: &Vector) -> Result<Vector> {
        check_dim(self.dim, x.len())?;
        if s <= 0.0 {
            return Err(Error::Contract(format!("prox step must be positive, got {s}")));
        }
        let (h, c) = match (&self.hessian, &self.linear) {
            (Some(h), Some(c)) => (h, c),
            _ => return Err(Error::ProxUnavailable(self.kind_name())),
        };
        let system = Matrix::identity(self.dim, self.dim) + h * s;
        let rhs = x - c * s;
        let chol = system
            .cholesky()
            .ok_or_else(|| Error::Contract("prox system is not positive definite".into()))?;
        Ok(chol.solve(&rhs))
    }

    /// Closest point of the solution set.
    pub fn project(&self, x: &Vector) -> Result<Vector> {
        check_dim(self.dim, x.len())?;
        match (&self.projector, &self.x_star) {
            (Some(p), _) => Ok(p.project(x)),
            (None, Some(xs)) => Ok(xs.clone()),
            (None, None) => Err(Error::NoSolution),
        }
    }

    pub fn distance_to_solutions(&self, x: &Vector) -> Result<f64> {
        Ok((x - self.project(x)?).norm())
    }

    /// `f(x) − min f`, computed without cancellation for quadratic forms.
    pub fn gap(&self, x: &Vector) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        Ok(self.gap_unchecked(x))
    }

    pub(crate) fn gap_unchecked(&self, x: &Vector) -> f64 {
        match (&self.hessian, &self.x_star) {
            (Some(h), Some(xs)) => {
                let d = x - xs;
                (0.5 * d.dot(&(h * &d))).max(0.0)
            }
            _ => self.value(x) - self.f_min,
        }
    }

    pub(crate) fn value(&self, x: &Vector) -> f64 {
        match &self.kind {
            ProblemKind::Quadratic { a, b } => 0.5 * x.dot(&(a * x)) + b.dot(x),
            ProblemKind::LeastSquares { design, targets } => {
                0.5 * (design * x - targets).norm_squared()
            }
            ProblemKind::Logistic {
                data,
                labels,
                ridge,
            } => {
                let margins = (data * x).component_mul(labels);
                let loss: f64 = margins.iter().map(|&m| softplus(-m)).sum();
                loss / data.nrows() as f64 + 0.5 * ridge * x.norm_squared()
            }
        }
    }

    pub(crate) fn grad(&self, x: &Vector) -> Vector {
        match &self.kind {
            ProblemKind::Quadratic { a, b } => a * x + b,
            ProblemKind::LeastSquares { design, targets } => {
                design.transpose() * (design * x - targets)
            }
            ProblemKind::Logistic {
                data,
                labels,
                ridge,
            } => {
                let n = data.nrows() as f64;
                let margins = (data * x).component_mul(labels);
                let weights =
                    Vector::from_iterator(margins.len(), margins.iter().zip(labels.iter()).map(
                        |(&m, &l)| -l * sigmoid(-m) / n,
                    ));
                data.transpose() * weights + x * *ridge
            }
        }
    }

    pub(crate) fn hess_vec(&self, x: &Vector, v: &Vector) -> Vector {
        match &self.kind {
            ProblemKind::Quadratic { a, .. } => a * v,
            ProblemKind::LeastSquares { design, .. } => design.transpose() * (design * v),
            ProblemKind::Logistic {
                data,
                labels,
                ridge,
            } => {
                let n = data.nrows() as f64;
                let margins = (data * x).component_mul(labels);
                let dv = data * v;
                let weighted = Vector::from_iterator(
                    dv.len(),
                    margins
                        .iter()
                        .zip(dv.iter())
                        .map(|(&m, &d)| sigmoid(m) * sigmoid(-m) * d / n),
                );
                data.transpose() * weighted + v * *ridge
            }
        }
    }

    fn newton_minimize(&self) -> Result<Vector> {
        let (data, labels, ridge) = match &self.kind {
            ProblemKind::Logistic {
                data,
                labels,
                ridge,
            } => (data, labels, *ridge),
            _ => unreachable!("newton_minimize is only used for logistic problems"),
        };
        let n = data.nrows() as f64;
        let mut x = Vector::zeros(self.dim);
        for _ in 0..200 {
            let g = self.grad(&x);
            if g.norm() <= 1e-13 {
                break;
            }
            let margins = (data * &x).component_mul(labels);
            let mut hess = Matrix::identity(self.dim, self.dim) * ridge;
            for (i, row) in data.row_iter().enumerate() {
                let w = sigmoid(margins[i]) * sigmoid(-margins[i]) / n;
                hess += row.transpose() * row * w;
            }
            let Some(chol) = hess.cholesky() else { break };
            let dir = -chol.solve(&g);
            let f0 = self.value(&x);
            let slope = g.dot(&dir);
            let mut step = 1.0;
            loop {
                let cand = &x + &dir * step;
                if self.value(&cand) <= f0 + 1e-4 * step * slope || step < 1e-12 {
                    x = cand;
                    break;
                }
                step *= 0.5;
            }
        }
        let residual = self.grad(&x).norm();
        if residual > 1e-10 {
            return Err(Error::Contract(format!(
                "logistic minimizer not found (‖∇f‖ = {residual:e}); data may be separable, add ridge"
            )));
        }
        Ok(x)
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Largest eigenvalue of a symmetric PSD operator by power iteration with a
/// Rayleigh-quotient stopping rule.
pub fn power_iteration(op: impl Fn(&Vector) -> Vector, dim: usize, tol: f64) -> f64 {
    let mut v = Vector::from_fn(dim, |i, _| 1.0 + 0.5 * ((i + 1) as f64).sin());
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..100_000 {
        let w = op(&v);
        let next = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        if (next - lambda).abs() <= tol * next.abs() {
            return next;
        }
        lambda = next;
    }
    lambda
}

fn eigen_cutoff(eig: &SymmetricEigen<f64, nalgebra::Dyn>) -> f64 {
    let top = eig.eigenvalues.amax();
    top * 1e-12 * eig.eigenvalues.len() as f64
}

fn symmetric_rank(h: &Matrix) -> usize {
    let eig = h.clone().symmetric_eigen();
    let cut = eigen_cutoff(&eig);
    eig.eigenvalues.iter().filter(|&&l| l > cut).count()
}

fn symmetric_pinv(h: &Matrix) -> Matrix {
    let eig = h.clone().symmetric_eigen();
    let cut = eigen_cutoff(&eig);
    let inv = eig
        .eigenvalues
        .map(|l| if l > cut { 1.0 / l } else { 0.0 });
    &eig.eigenvectors * Matrix::from_diagonal(&inv) * eig.eigenvectors.transpose()
}

/// Seeded random orthogonal matrix (QR of a Gaussian matrix, sign-fixed).
pub fn random_orthogonal(dim: usize, seed: u64) -> Matrix {
    let g = gaussian_matrix(dim, dim, seed);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Seeded matrix with i.i.d. standard normal entries.
pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
}

/// Gaussian design of the given rank (`rank < cols` gives a nontrivial kernel).
pub fn low_rank_design(rows: usize, cols: usize, rank: usize, seed: u64) -> Matrix {
    if rank >= cols {
        return gaussian_matrix(rows, cols, seed);
    }
    let left = gaussian_matrix(rows, rank, seed);
    let right = gaussian_matrix(rank, cols, seed.wrapping_add(0x9E37_79B9_7F4A_7C15));
    left * right
}

/// Seeded logistic data: Gaussian features, labels drawn from the logistic
/// model of a Gaussian ground-truth weight vector (non-separable with high probability).
pub fn logistic_data(rows: usize, cols: usize, seed: u64) -> (Matrix, Vector) {
    use rand::Rng;
    let data = gaussian_matrix(rows, cols, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let truth = Vector::from_fn(cols, |_, _| StandardNormal.sample(&mut rng));
    let scores = &data * truth;
    let labels = scores.map(|z| {
        if rng.random::<f64>() < sigmoid(z) {
            1.0
        } else {
            -1.0
        }
    });
    (data, labels)
}
