//! Feasible domains and the projection primitives used by every learner.

use nalgebra::{DMatrix, DVector};

use crate::error::{ensure_finite, Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Tolerance of the domain membership test.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum DomainKind {
    Ball { dim: usize, radius: f64 },
    Box { lo: Vector, hi: Vector },
    Simplex { dim: usize },
}

/// A convex feasible set together with its diameter `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    kind: DomainKind,
    diameter: f64,
}

impl Domain {
    pub fn ball(dim: usize, radius: f64) -> Result<Self> {
        if dim == 0 || !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidInput(format!("ball needs dim >= 1 and radius > 0, got dim={dim} radius={radius}")));
        }
        Ok(Self { kind: DomainKind::Ball { dim, radius }, diameter: 2.0 * radius })
    }

    pub fn unit_ball(dim: usize) -> Self {
        Self::ball(dim, 1.0).expect("unit ball is valid for dim >= 1")
    }

    pub fn boxed(lo: Vector, hi: Vector) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::InvalidInput("box bounds must be non-empty and of equal length".into()));
        }
        ensure_finite(lo.as_slice(), "box lower bound")?;
        ensure_finite(hi.as_slice(), "box upper bound")?;
        if lo.iter().zip(hi.iter()).any(|(l, h)| l > h) {
            return Err(Error::InvalidInput("box lower bound exceeds upper bound".into()));
        }
        let diameter = (&hi - &lo).norm();
        if !(diameter > 0.0) {
            return Err(Error::InvalidInput("degenerate box".into()));
        }
        Ok(Self { kind: DomainKind::Box { lo, hi }, diameter })
    }

    pub fn simplex(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidInput(format!("simplex needs dim >= 2, got {dim}")));
        }
        Ok(Self { kind: DomainKind::Simplex { dim }, diameter: std::f64::consts::SQRT_2 })
    }

    pub fn kind(&self) -> &DomainKind {
        &self.kind
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            DomainKind::Ball { dim, .. } | DomainKind::Simplex { dim } => *dim,
            DomainKind::Box { lo, .. } => lo.len(),
        }
    }

    /// Largest Euclidean norm of a feasible point (the `R` in `|<g, x>| <= G R`).
    pub fn max_norm(&self) -> f64 {
        match &self.kind {
            DomainKind::Ball { radius, .. } => *radius,
            DomainKind::Simplex { .. } => 1.0,
            DomainKind::Box { lo, hi } => lo
                .iter()
                .zip(hi.iter())
                .map(|(l, h)| l.abs().max(h.abs()).powi(2))
                .sum::<f64>()
                .sqrt(),
        }
    }

    /// Initial decision: ball center, box midpoint, or the uniform distribution.
    pub fn center(&self) -> Vector {
        match &self.kind {
            DomainKind::Ball { dim, .. } => Vector::zeros(*dim),
            DomainKind::Box { lo, hi } => (lo + hi) * 0.5,
            DomainKind::Simplex { dim } => Vector::from_element(*dim, 1.0 / *dim as f64),
        }
    }

    pub fn contains(&self, x: &Vector) -> bool {
        if x.len() != self.dim() || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match &self.kind {
            DomainKind::Ball { radius, .. } => x.norm() <= radius + MEMBERSHIP_TOL,
            DomainKind::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi.iter()))
                .all(|(v, (l, h))| *v >= l - MEMBERSHIP_TOL && *v <= h + MEMBERSHIP_TOL),
            DomainKind::Simplex { .. } => {
                x.iter().all(|v| *v >= -MEMBERSHIP_TOL) && (x.sum() - 1.0).abs() <= MEMBERSHIP_TOL
            }
        }
    }

    fn check_dim(&self, z: &Vector) -> Result<()> {
        if z.len() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "dimension mismatch: point has {} coordinates, domain has {}",
                z.len(),
                self.dim()
            )));
        }
        ensure_finite(z.as_slice(), "projection input")
    }
}

/// Euclidean projection onto `dom`.
pub fn project_euclidean(z: &Vector, dom: &Domain) -> Result<Vector> {
    dom.check_dim(z)?;
    Ok(match &dom.kind {
        DomainKind::Ball { radius, .. } => {
            let n = z.norm();
            if n <= *radius {
                z.clone()
            } else {
                z * (*radius / n)
            }
        }
        DomainKind::Box { lo, hi } => {
            Vector::from_iterator(z.len(), z.iter().zip(lo.iter().zip(hi.iter())).map(|(v, (l, h))| v.clamp(*l, *h)))
        }
        DomainKind::Simplex { .. } => project_simplex(z),
    })
}

/// Sort-and-threshold projection onto the probability simplex.
pub fn project_simplex(z: &Vector) -> Vector {
    let mut sorted: Vec<f64> = z.iter().copied().collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, v) in sorted.iter().enumerate() {
        cumsum += v;
        let candidate = (cumsum - 1.0) / (k + 1) as f64;
        if v - candidate > 0.0 {
            theta = candidate;
        }
    }
    z.map(|v| (v - theta).max(0.0))
}

/// Symmetric positive semidefinite matrix, used as the `U_t` of the Newton-step learner.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdMatrix {
    entries: Matrix,
}

impl PsdMatrix {
    pub fn new(entries: Matrix) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::InvalidInput("PSD matrix must be square".into()));
        }
        ensure_finite(entries.as_slice(), "PSD matrix")?;
        let asym = (&entries - entries.transpose()).amax();
        if asym > 1e-10 {
            return Err(Error::InvalidInput(format!("matrix not symmetric (max asymmetry {asym:e})")));
        }
        let shifted = &entries + Matrix::identity(entries.nrows(), entries.ncols()) * 1e-12;
        if shifted.cholesky().is_none() {
            return Err(Error::Numerical("matrix is not positive semidefinite (Cholesky failed)".into()));
        }
        Ok(Self { entries })
    }

    pub fn scaled_identity(dim: usize, scale: f64) -> Result<Self> {
        Self::new(Matrix::identity(dim, dim) * scale)
    }

    pub fn entries(&self) -> &Matrix {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Rank-one update `U + c v vᵀ` with `c >= 0`.
    pub fn rank_one_update(&mut self, v: &Vector, c: f64) {
        self.entries += v * v.transpose() * c;
        // keep exact symmetry against rounding
        self.entries = (&self.entries + self.entries.transpose()) * 0.5;
    }

    /// Solves `U x = b` by Cholesky; fails when `U` is not positive definite.
    pub fn solve(&self, b: &Vector) -> Result<Vector> {
        let chol = self
            .entries
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Numerical("matrix is not positive definite (Cholesky failed)".into()))?;
        Ok(chol.solve(b))
    }
}

/// Result of a projection in the `U`-norm, with the KKT multiplier of the ball constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixProjection {
    pub point: Vector,
    pub multiplier: f64,
}

const MATRIX_PROJECTION_TOL: f64 = 1e-10;
const MATRIX_PROJECTION_MAX_ITER: usize = 200;

/// `argmin_{x in dom} (x - z)ᵀ U (x - z)` for a ball domain.
pub fn project_matrix_norm(z: &Vector, u: &PsdMatrix, dom: &Domain) -> Result<Vector> {
    Ok(project_matrix_norm_kkt(z, u, dom)?.point)
}

/// Same as [`project_matrix_norm`], also returning the multiplier `mu` with `(U + mu I) x = U z`.
pub fn project_matrix_norm_kkt(z: &Vector, u: &PsdMatrix, dom: &Domain) -> Result<MatrixProjection> {
    dom.check_dim(z)?;
    let radius = match dom.kind {
        DomainKind::Ball { radius, .. } => radius,
        _ => return Err(Error::InvalidInput("matrix-norm projection supports ball domains only".into())),
    };
    if u.dim() != z.len() {
        return Err(Error::InvalidInput("matrix and point dimensions differ".into()));
    }
    if u.entries.clone().cholesky().is_none() {
        return Err(Error::Numerical("U is not positive definite (Cholesky failed)".into()));
    }
    if z.norm() <= radius {
        return Ok(MatrixProjection { point: z.clone(), multiplier: 0.0 });
    }

    let uz = &u.entries * z;
    let dim = z.len();
    let solve_at = |mu: f64| -> Result<Vector> {
        let shifted = &u.entries + Matrix::identity(dim, dim) * mu;
        shifted
            .cholesky()
            .map(|c| c.solve(&uz))
            .ok_or_else(|| Error::Numerical(format!("Cholesky failed at multiplier {mu:e}")))
    };

    // ||x(mu)|| <= ||Uz|| / mu, so this upper end is feasible.
    let mut lo = 0.0;
    let mut hi = uz.norm() / radius;
    let mut x_hi = solve_at(hi)?;
    for _ in 0..MATRIX_PROJECTION_MAX_ITER {
        if (x_hi.norm() - radius).abs() <= MATRIX_PROJECTION_TOL {
            return Ok(MatrixProjection { point: x_hi, multiplier: hi });
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let x_mid = solve_at(mid)?;
        if x_mid.norm() > radius {
            lo = mid;
        } else {
            hi = mid;
            x_hi = x_mid;
        }
    }
    if (x_hi.norm() - radius).abs() <= MATRIX_PROJECTION_TOL {
        return Ok(MatrixProjection { point: x_hi, multiplier: hi });
    }
    Err(Error::Numerical(format!(
        "matrix-norm projection did not converge in {MATRIX_PROJECTION_MAX_ITER} bisection steps"
    )))
}

const ENTROPY_SUM_TOL: f64 = 1e-12;
const ENTROPY_MAX_EXPANSIONS: usize = 60;
const ENTROPY_MAX_ITER: usize = 400;
/// Floor applied to simplex weights after an entropic step.
pub const WEIGHT_FLOOR: f64 = 1e-300;

/// `argmin_{p in simplex} <g, p> + D_psi(p, p_hat)` for `psi(p) = sum_i p_i ln p_i / eps_i`.
///
/// The minimizer is `p_i = p_hat_i exp(-eps_i (g_i + mu))` with `mu` the normalizing multiplier,
/// found here by a safeguarded Newton iteration on `ln sum_i p_i(mu)`.
pub fn simplex_entropy_step(p_hat: &Vector, g: &Vector, eps: &Vector) -> Result<Vector> {
    let n = p_hat.len();
    if n == 0 || g.len() != n || eps.len() != n {
        return Err(Error::InvalidInput(format!(
            "entropy step dimension mismatch: p_hat={}, g={}, eps={}",
            n,
            g.len(),
            eps.len()
        )));
    }
    ensure_finite(g.as_slice(), "entropy step cost")?;
    if let Some(i) = p_hat.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidInput(format!("p_hat[{i}] must be positive")));
    }
    if let Some(i) = eps.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidInput(format!("eps[{i}] must be positive")));
    }

    let log_p_hat: Vec<f64> = p_hat.iter().map(|v| v.ln()).collect();
    let exps = |mu: f64| -> Vec<f64> { (0..n).map(|i| log_p_hat[i] - eps[i] * (g[i] + mu)).collect() };
    // F(mu) = ln sum_i exp(e_i(mu)), decreasing and convex in mu; F' = -(eps-weighted average).
    let eval = |mu: f64| -> (f64, f64) {
        let e = exps(mu);
        let m = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        let mut ds = 0.0;
        for i in 0..n {
            let w = (e[i] - m).exp();
            s += w;
            ds += eps[i] * w;
        }
        (m + s.ln(), -ds / s)
    };

    let g_max = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let g_min = g.iter().copied().fold(f64::INFINITY, f64::min);
    let p_sum = p_hat.sum();
    let mut lo = -g_max;
    let mut hi = -g_min;
    let mut width = (hi - lo).max(1.0);
    let mut expansions = 0;
    // With sum(p_hat) = 1 the interval [-max g, -min g] brackets the root already.
    while eval(lo).0 < 0.0 || eval(hi).0 > 0.0 {
        if expansions == ENTROPY_MAX_EXPANSIONS {
            return Err(Error::Numerical(format!(
                "entropy step root not bracketed after {ENTROPY_MAX_EXPANSIONS} expansions (sum p_hat = {p_sum})"
            )));
        }
        if eval(lo).0 < 0.0 {
            lo -= width;
        }
        if eval(hi).0 > 0.0 {
            hi += width;
        }
        width *= 2.0;
        expansions += 1;
    }

    let mut mu = lo;
    let mut converged = false;
    for _ in 0..ENTROPY_MAX_ITER {
        let (f, df) = eval(mu);
        if f.abs() <= 0.25 * ENTROPY_SUM_TOL {
            converged = true;
            break;
        }
        if f > 0.0 {
            lo = mu;
        } else {
            hi = mu;
        }
        let newton = if df < 0.0 { mu - f / df } else { f64::NAN };
        mu = if newton.is_finite() && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= f64::EPSILON * (1.0 + mu.abs()) {
            converged = true;
            break;
        }
    }
    let mut p = Vector::from_iterator(n, exps(mu).into_iter().map(f64::exp));
    if !converged && (p.sum() - 1.0).abs() > ENTROPY_SUM_TOL {
        return Err(Error::Numerical("entropy step root finder did not converge".into()));
    }
    let s = p.sum();
    p /= s;
    p.iter_mut().for_each(|v| *v = v.max(WEIGHT_FLOOR));
    Ok(p)
}
