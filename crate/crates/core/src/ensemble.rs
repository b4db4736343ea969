//! Per-round orchestration of the six universal algorithms.

use crate::adaprod::{solve_optimism_fixed_point, FixedPoint, ProdState};
use crate::base_learners::{anytime_activation, anytime_coefficient, build_pool, BaseLearner, CandidatePool, LearnerKind};
use crate::config::{stack_levels, AlgoConfig, Variant};
use crate::error::{ensure_finite, Error, Result};
use crate::geometry::{Domain, DomainKind, Vector};
use crate::losses::{make_surrogate_exp, make_surrogate_sc, Divisor, LossOracle};
use crate::msmwc::{MoM, MoMFeedback, MoMParams, StabilityTerms};

#[derive(Debug, Clone)]
enum Meta {
    Stack(MoM),
    Prod { state: ProdState, optimism: Vec<f64> },
}

/// Everything observable about one round.
#[derive(Debug, Clone)]
pub struct RoundReport {
    pub round: u64,
    /// Played point `x_t`.
    pub play: Vector,
    /// `grad f_t(x_t)`.
    pub grad: Vector,
    /// Gradient queries spent in this round.
    pub queries: u64,
    /// Meta weights `p_t` the play was formed with.
    pub weights: Vector,
    /// Base points `x_{t,i}`.
    pub learner_points: Vec<Vector>,
    /// Stability quantities of the stacked meta learner.
    pub stability: Option<StabilityTerms>,
    pub feedback: Option<MoMFeedback>,
    /// Solve of the optimism for the next round (Prod meta learners).
    pub fixed_point: Option<FixedPoint>,
    pub fixed_point_tol: f64,
}

/// Base learners plus meta learner; one instance per run.
#[derive(Debug, Clone)]
pub struct Ensemble {
    config: AlgoConfig,
    domain: Domain,
    pool: Option<CandidatePool>,
    learners: Vec<BaseLearner>,
    meta: Meta,
    weights: Vector,
    play: Vector,
    round: u64,
    next_anytime: u32,
}

fn mix(points: &[&Vector], weights: &Vector) -> Vector {
    let mut x = Vector::zeros(points[0].len());
    for (p, w) in points.iter().zip(weights.iter()) {
        x.axpy(*w, p, 1.0);
    }
    x
}

impl Ensemble {
    pub fn new(config: AlgoConfig, domain: Domain) -> Result<Self> {
        let variant = config.variant;
        let gamma = config.base_gamma;
        if variant == Variant::GameCorrectPp {
            if !matches!(domain.kind(), DomainKind::Simplex { .. }) {
                return Err(Error::InvalidInput("the game variant plays on a simplex".into()));
            }
        } else if (domain.diameter() - config.d).abs() > 1e-12 * config.d.max(1.0) {
            return Err(Error::InvalidInput(format!(
                "configured diameter {} differs from the domain diameter {}",
                config.d,
                domain.diameter()
            )));
        }

        let (pool, learners) = if variant == Variant::AnytimeBregmanPp {
            let learners = vec![
                BaseLearner::convex(&domain, gamma)?,
                BaseLearner::strongly_convex(&domain, anytime_coefficient(0), gamma)?,
                BaseLearner::exp_concave(&domain, anytime_coefficient(0), gamma, config.g)?,
            ];
            (None, learners)
        } else {
            let horizon = config.horizon.ok_or_else(|| Error::InvalidInput("missing horizon".into()))?;
            let pool = build_pool(horizon)?;
            let mut learners = Vec::with_capacity(pool.size());
            for &lambda in &pool.sc_coeffs {
                learners.push(BaseLearner::strongly_convex(&domain, lambda, gamma)?);
            }
            if variant != Variant::GameCorrectPp {
                for &alpha in &pool.exp_coeffs {
                    learners.push(BaseLearner::exp_concave(&domain, alpha, gamma, config.g)?);
                }
            }
            learners.push(BaseLearner::convex(&domain, gamma)?);
            (Some(pool), learners)
        };

        let n = learners.len();
        let meta = if variant.uses_stack() {
            let params = MoMParams {
                c0: config.c0.expect("stacked variants carry C0"),
                gamma_top: config.gamma_top.expect("stacked variants carry gamma_top"),
                gamma_mid: config.gamma_mid.expect("stacked variants carry gamma_mid"),
                z: config.z.expect("stacked variants carry Z"),
            };
            Meta::Stack(MoM::new(stack_levels(config.horizon.expect("fixed horizon")), n, params)?)
        } else if variant == Variant::AnytimeBregmanPp {
            let mut state = ProdState::anytime();
            for _ in 0..n {
                state.activate(1)?;
            }
            Meta::Prod { state, optimism: vec![0.0; n] }
        } else {
            Meta::Prod { state: ProdState::fixed(n)?, optimism: vec![0.0; n] }
        };

        let weights = match &meta {
            Meta::Stack(m) => m.weights(),
            Meta::Prod { state, optimism } => state.weights(optimism)?,
        };
        let points: Vec<&Vector> = learners.iter().map(|l| l.point()).collect();
        let play = mix(&points, &weights);
        Ok(Self { config, domain, pool, learners, meta, weights, play, round: 1, next_anytime: 1 })
    }

    pub fn config(&self) -> &AlgoConfig {
        &self.config
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn pool(&self) -> Option<&CandidatePool> {
        self.pool.as_ref()
    }

    /// Decision `x_t` of the current round.
    pub fn play(&self) -> &Vector {
        &self.play
    }

    pub fn weights(&self) -> &Vector {
        &self.weights
    }

    pub fn learners(&self) -> &[BaseLearner] {
        &self.learners
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    /// Total clamping events of the stacked meta learner.
    pub fn clamp_events(&self) -> u64 {
        match &self.meta {
            Meta::Stack(m) => m.clamp_events(),
            Meta::Prod { .. } => 0,
        }
    }

    pub fn prod_state(&self) -> Option<&ProdState> {
        match &self.meta {
            Meta::Prod { state, .. } => Some(state),
            Meta::Stack(_) => None,
        }
    }

    pub fn stack(&self) -> Option<&MoM> {
        match &self.meta {
            Meta::Stack(m) => Some(m),
            Meta::Prod { .. } => None,
        }
    }

    /// Gradient queries one round costs.
    pub fn queries_per_round(&self) -> u64 {
        if self.config.variant.uses_all_gradients() {
            self.learners.len() as u64 + 1
        } else {
            1
        }
    }

    /// Plays one round against `oracle`.
    pub fn step(&mut self, oracle: &mut LossOracle) -> Result<RoundReport> {
        if self.config.variant == Variant::GameCorrectPp {
            return Err(Error::InvalidInput("the game variant is driven through step_with_gradient".into()));
        }
        let before = oracle.queries();
        let expected = self.queries_per_round();
        let grad = oracle.gradient(&self.play)?;
        let fed: Vec<Vector> = if self.config.variant.uses_all_gradients() {
            self.learners.iter().map(|l| oracle.gradient(l.point())).collect::<Result<_>>()?
        } else {
            self.surrogate_gradients(&grad)
        };
        let spent = oracle.queries() - before;
        if spent != expected {
            return Err(Error::Contract(format!(
                "{} spent {spent} gradient queries in round {}, expected {expected}",
                self.config.variant, self.round
            )));
        }
        self.advance(grad, fed, spent)
    }

    /// Plays one round given the gradient at the current play (one query by contract).
    pub fn step_with_gradient(&mut self, grad: &Vector) -> Result<RoundReport> {
        if self.config.variant.uses_all_gradients() {
            return Err(Error::Contract(format!("{} needs per-learner gradients", self.config.variant)));
        }
        if grad.len() != self.domain.dim() {
            return Err(Error::InvalidInput("gradient dimension mismatch".into()));
        }
        ensure_finite(grad.as_slice(), "gradient")?;
        let fed = self.surrogate_gradients(grad);
        self.advance(grad.clone(), fed, 1)
    }

    fn surrogate_gradients(&self, grad: &Vector) -> Vec<Vector> {
        let divisor = match self.config.variant {
            Variant::CorrectPp | Variant::GameCorrectPp => Divisor::Two,
            _ => Divisor::Four,
        };
        self.learners
            .iter()
            .map(|l| match l.kind() {
                LearnerKind::Convex => grad.clone(),
                LearnerKind::StronglyConvex => make_surrogate_sc(grad, &self.play, l.coeff(), divisor).gradient(l.point()),
                LearnerKind::ExpConcave => make_surrogate_exp(grad, &self.play, l.coeff(), divisor).gradient(l.point()),
            })
            .collect()
    }

    fn advance(&mut self, grad: Vector, fed: Vec<Vector>, queries: u64) -> Result<RoundReport> {
        let t = self.round;
        let weights_t = self.weights.clone();
        let points: Vec<Vector> = self.learners.iter().map(|l| l.point().clone()).collect();
        let stability = match &self.meta {
            Meta::Stack(m) => Some(m.stability_terms(&points)),
            Meta::Prod { .. } => None,
        };
        for (l, g) in self.learners.iter_mut().zip(fed.iter()) {
            l.step(g, g)?;
        }

        let (gd, big_g) = (self.config.d, self.config.g);
        let mut feedback = None;
        let mut fixed_point = None;
        let mut fixed_point_tol = 0.0;
        match &mut self.meta {
            Meta::Stack(m) => {
                let next: Vec<Vector> = self.learners.iter().map(|l| l.point().clone()).collect();
                feedback = Some(m.round(&points, &next, &grad)?);
                self.weights = m.weights();
            }
            Meta::Prod { state, optimism } => {
                let scale = 2.0 * big_g * gd;
                let losses: Vec<f64> = points.iter().map(|x| grad.dot(x) / scale + 0.5).collect();
                let mixed: f64 = losses.iter().zip(weights_t.iter()).map(|(l, p)| l * p).sum();
                let r: Vec<f64> = losses.iter().map(|l| mixed - l).collect();
                state.update(&r, optimism)?;

                if self.config.variant == Variant::AnytimeBregmanPp {
                    while anytime_activation(self.next_anytime) == t + 1 {
                        let c = anytime_coefficient(self.next_anytime);
                        self.learners.push(BaseLearner::strongly_convex(&self.domain, c, self.config.base_gamma)?);
                        self.learners.push(BaseLearner::exp_concave(&self.domain, c, self.config.base_gamma, big_g)?);
                        state.activate(t + 1)?;
                        state.activate(t + 1)?;
                        self.next_anytime += 1;
                    }
                }

                let next: Vec<&Vector> = self.learners.iter().map(|l| l.point()).collect();
                let convex = self
                    .learners
                    .iter()
                    .position(|l| l.kind() == LearnerKind::Convex)
                    .expect("every ensemble has a convex learner");
                let anchor = grad.dot(next[convex]);
                let n = next.len();
                let optimism_at = |z: f64| -> Vec<f64> {
                    let mut m = vec![0.0; n];
                    m[convex] = (z - anchor) / scale;
                    m
                };
                let horizon = self.config.horizon.unwrap_or(t + 1) as f64;
                fixed_point_tol = scale / horizon;
                let bound = grad.norm() * self.domain.max_norm();
                let state_ref = &*state;
                let fp = solve_optimism_fixed_point(
                    &grad,
                    |z| Ok(mix(&next, &state_ref.weights(&optimism_at(z))?)),
                    bound,
                    fixed_point_tol,
                )?;
                *optimism = optimism_at(fp.z);
                self.weights = state.weights(optimism)?;
                fixed_point = Some(fp);
            }
        }

        let report = RoundReport {
            round: t,
            play: self.play.clone(),
            grad,
            queries,
            weights: weights_t,
            learner_points: points,
            stability,
            feedback,
            fixed_point,
            fixed_point_tol,
        };
        let next: Vec<&Vector> = self.learners.iter().map(|l| l.point()).collect();
        self.play = mix(&next, &self.weights);
        self.round += 1;
        Ok(report)
    }
}
