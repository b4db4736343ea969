//! Optimistic base learners (gradient descent for convex and strongly convex losses,
//! online Newton step for exp-concave losses) and the curvature candidate pools.

use crate::error::{ensure_finite, Error, Result};
use crate::geometry::{project_euclidean, project_matrix_norm, Domain, DomainKind, PsdMatrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolMode {
    FixedHorizon(u64),
    Anytime,
}

/// Geometric grid of curvature guesses.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePool {
    pub sc_coeffs: Vec<f64>,
    pub exp_coeffs: Vec<f64>,
    pub n: usize,
    pub mode: PoolMode,
}

impl CandidatePool {
    /// Number of learners: `n` strongly convex, `n` exp-concave, one convex.
    pub fn size(&self) -> usize {
        2 * self.n + 1
    }
}

/// `ceil(log2(t))` for `t >= 1`.
pub fn ceil_log2(t: u64) -> u32 {
    assert!(t >= 1, "ceil_log2 needs t >= 1");
    if t == 1 {
        0
    } else {
        64 - (t - 1).leading_zeros()
    }
}

/// Fixed-horizon pool `{2^k / T : 0 <= k < n}` with `n = ceil(log2 T) + 1`.
pub fn build_pool(horizon: u64) -> Result<CandidatePool> {
    if horizon == 0 {
        return Err(Error::InvalidInput("horizon must be at least 1".into()));
    }
    let n = ceil_log2(horizon) as usize + 1;
    let coeffs: Vec<f64> = (0..n).map(|k| 2f64.powi(k as i32) / horizon as f64).collect();
    Ok(CandidatePool { sc_coeffs: coeffs.clone(), exp_coeffs: coeffs, n, mode: PoolMode::FixedHorizon(horizon) })
}

/// Coefficient `2^-i` of the `i`-th anytime candidate.
pub fn anytime_coefficient(i: u32) -> f64 {
    2f64.powi(-(i as i32))
}

/// First round `s_i = 2^i` at which the `i`-th anytime candidate plays.
pub fn anytime_activation(i: u32) -> u64 {
    1u64 << i
}

/// Number of anytime candidates per curvature group active at round `t`.
pub fn anytime_active_per_group(t: u64) -> usize {
    assert!(t >= 1);
    (63 - t.leading_zeros()) as usize + 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LearnerKind {
    Convex,
    StronglyConvex,
    ExpConcave,
}

/// One optimistic mirror-descent instance.
///
/// Per round it holds the played point `x_t` and the internal point `x̂_t`. `step` consumes the
/// fed gradient of round `t` and the optimism for round `t + 1`, and leaves `x_{t+1}` in `x`.
#[derive(Debug, Clone)]
pub struct BaseLearner {
    kind: LearnerKind,
    coeff: f64,
    gamma: f64,
    grad_bound: f64,
    domain: Domain,
    x: Vector,
    x_hat: Vector,
    round: u64,
    running_vbar: f64,
    last_grad: Vector,
    optimism: Vector,
    u: Option<PsdMatrix>,
    last_eta: f64,
}

impl BaseLearner {
    fn new(kind: LearnerKind, coeff: f64, gamma: f64, grad_bound: f64, domain: &Domain) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidInput(format!("base coefficient gamma must be positive, got {gamma}")));
        }
        if !(coeff >= 0.0) || !coeff.is_finite() {
            return Err(Error::InvalidInput(format!("curvature coefficient must be nonnegative, got {coeff}")));
        }
        let d = domain.dim();
        let u = if kind == LearnerKind::ExpConcave {
            if !matches!(domain.kind(), DomainKind::Ball { .. }) {
                return Err(Error::InvalidInput("the Newton-step learner requires a ball domain".into()));
            }
            Some(PsdMatrix::scaled_identity(d, gamma + 0.5 * coeff * grad_bound * grad_bound)?)
        } else {
            None
        };
        let c = domain.center();
        Ok(Self {
            kind,
            coeff,
            gamma,
            grad_bound,
            domain: domain.clone(),
            x: c.clone(),
            x_hat: c,
            round: 1,
            running_vbar: 0.0,
            last_grad: Vector::zeros(d),
            optimism: Vector::zeros(d),
            u,
            last_eta: f64::NAN,
        })
    }

    pub fn convex(domain: &Domain, gamma: f64) -> Result<Self> {
        Self::new(LearnerKind::Convex, 0.0, gamma, 0.0, domain)
    }

    pub fn strongly_convex(domain: &Domain, lambda: f64, gamma: f64) -> Result<Self> {
        Self::new(LearnerKind::StronglyConvex, lambda, gamma, 0.0, domain)
    }

    pub fn exp_concave(domain: &Domain, alpha: f64, gamma: f64, grad_bound: f64) -> Result<Self> {
        Self::new(LearnerKind::ExpConcave, alpha, gamma, grad_bound, domain)
    }

    pub fn kind(&self) -> LearnerKind {
        self.kind
    }

    pub fn coeff(&self) -> f64 {
        self.coeff
    }

    pub fn grad_bound(&self) -> f64 {
        self.grad_bound
    }

    /// Played point of the current round.
    pub fn point(&self) -> &Vector {
        &self.x
    }

    pub fn internal_point(&self) -> &Vector {
        &self.x_hat
    }

    /// Index of the current round (1 before the first update).
    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn running_vbar(&self) -> f64 {
        self.running_vbar
    }

    pub fn matrix(&self) -> Option<&PsdMatrix> {
        self.u.as_ref()
    }

    /// Step size used by the most recent gradient-descent update.
    pub fn last_eta(&self) -> f64 {
        self.last_eta
    }

    /// Step size the gradient-descent learners use in the current round.
    pub fn current_eta(&self) -> f64 {
        match self.kind {
            LearnerKind::Convex => (self.domain.diameter() / (1.0 + self.running_vbar).sqrt()).min(1.0 / self.gamma),
            LearnerKind::StronglyConvex => 2.0 / (self.gamma + self.coeff * self.round as f64),
            LearnerKind::ExpConcave => f64::NAN,
        }
    }

    /// Consumes the round-`t` fed gradient and the optimism for round `t + 1`.
    pub fn step(&mut self, grad_in: &Vector, optimism_in: &Vector) -> Result<()> {
        let d = self.domain.dim();
        if grad_in.len() != d || optimism_in.len() != d {
            return Err(Error::InvalidInput(format!("base learner expects dimension {d}")));
        }
        ensure_finite(grad_in.as_slice(), "base learner gradient")?;
        ensure_finite(optimism_in.as_slice(), "base learner optimism")?;
        match self.kind {
            LearnerKind::Convex | LearnerKind::StronglyConvex => self.oogd_step(grad_in, optimism_in),
            LearnerKind::ExpConcave => self.oons_step(grad_in, optimism_in),
        }
    }

    fn record_variation(&mut self, grad_in: &Vector) {
        if self.round >= 2 {
            self.running_vbar += (grad_in - &self.last_grad).norm_squared();
        }
        self.last_grad = grad_in.clone();
    }

    fn oogd_step(&mut self, grad_in: &Vector, optimism_in: &Vector) -> Result<()> {
        let eta = self.current_eta();
        self.x_hat = project_euclidean(&(&self.x_hat - grad_in * eta), &self.domain)?;
        self.last_eta = eta;
        self.record_variation(grad_in);
        self.round += 1;
        let next_eta = self.current_eta();
        self.x = project_euclidean(&(&self.x_hat - optimism_in * next_eta), &self.domain)?;
        self.optimism = optimism_in.clone();
        Ok(())
    }

    fn oons_step(&mut self, grad_in: &Vector, optimism_in: &Vector) -> Result<()> {
        let u = self.u.as_mut().expect("Newton-step learner owns a matrix");
        let dir = u.solve(grad_in)?;
        self.x_hat = project_matrix_norm(&(&self.x_hat - dir), u, &self.domain)?;
        u.rank_one_update(grad_in, 0.5 * self.coeff);
        let u = self.u.as_ref().expect("Newton-step learner owns a matrix");
        let dir = u.solve(optimism_in)?;
        self.x = project_matrix_norm(&(&self.x_hat - dir), u, &self.domain)?;
        self.record_variation(grad_in);
        self.round += 1;
        self.optimism = optimism_in.clone();
        Ok(())
    }
}
