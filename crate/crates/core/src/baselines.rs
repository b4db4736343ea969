//! Standalone single-learner baselines.

use crate::base_learners::BaseLearner;
use crate::environments::Environment;
use crate::error::{Error, Result};
use crate::geometry::{project_euclidean, Domain, Vector};

/// Runs one base learner on its own gradients, with the last gradient as optimism.
pub fn run_learner(mut learner: BaseLearner, env: &Environment, rounds: u64) -> Result<Vec<Vector>> {
    if rounds > env.horizon() {
        return Err(Error::InvalidInput("more rounds than the environment provides".into()));
    }
    let mut plays = Vec::with_capacity(rounds as usize);
    for t in 1..=rounds {
        let x = learner.point().clone();
        let g = env.oracle(t).gradient(&x)?;
        learner.step(&g, &g)?;
        plays.push(x);
    }
    Ok(plays)
}

/// Projected online gradient descent with `eta_t = D / (G sqrt(t))`.
#[derive(Debug, Clone)]
pub struct SqrtOgd {
    domain: Domain,
    scale: f64,
    x: Vector,
    round: u64,
}

impl SqrtOgd {
    pub fn new(domain: &Domain, grad_bound: f64) -> Result<Self> {
        if !(grad_bound > 0.0) {
            return Err(Error::InvalidInput("gradient bound must be positive".into()));
        }
        Ok(Self { domain: domain.clone(), scale: domain.diameter() / grad_bound, x: domain.center(), round: 1 })
    }

    pub fn point(&self) -> &Vector {
        &self.x
    }

    pub fn step(&mut self, grad: &Vector) -> Result<()> {
        let eta = self.scale / (self.round as f64).sqrt();
        self.x = project_euclidean(&(&self.x - grad * eta), &self.domain)?;
        self.round += 1;
        Ok(())
    }

    pub fn run(mut self, env: &Environment, rounds: u64) -> Result<Vec<Vector>> {
        let mut plays = Vec::with_capacity(rounds as usize);
        for t in 1..=rounds {
            let x = self.x.clone();
            let g = env.oracle(t).gradient(&x)?;
            self.step(&g)?;
            plays.push(x);
        }
        Ok(plays)
    }
}
