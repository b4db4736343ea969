//! Multi-scale multiplicative weights with correction, and its two-layer stacking.

use crate::error::{ensure_finite, Error, Result};
use crate::geometry::{simplex_entropy_step, Vector};

/// Largest per-coordinate learning rate accepted by a layer.
pub const MAX_LAYER_EPS: f64 = 1.0 / 32.0;
/// Overshoot beyond `[-1, 1]` that is clamped instead of rejected.
pub const CLAMP_SLACK: f64 = 1e-9;

/// One optimistic entropic layer with fixed per-coordinate learning rates.
#[derive(Debug, Clone, PartialEq)]
pub struct MsMwCLayer {
    p_hat: Vector,
    p: Vector,
    eps: Vector,
    optimism: Vector,
}

impl MsMwCLayer {
    pub fn new(init: Vector, eps: Vector) -> Result<Self> {
        if init.len() != eps.len() || init.is_empty() {
            return Err(Error::InvalidInput("layer weights and learning rates must match in length".into()));
        }
        if let Some(i) = eps.iter().position(|e| !(*e > 0.0) || *e > MAX_LAYER_EPS) {
            return Err(Error::Contract(format!("learning rate eps[{i}] = {} outside (0, 1/32]", eps[i])));
        }
        if init.iter().any(|p| !(*p > 0.0)) || (init.sum() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput("initial weights must be a positive probability vector".into()));
        }
        let n = init.len();
        Ok(Self { p_hat: init.clone(), p: init, eps, optimism: Vector::zeros(n) })
    }

    pub fn dim(&self) -> usize {
        self.p.len()
    }

    /// Current played weights `p_t`.
    pub fn weights(&self) -> &Vector {
        &self.p
    }

    pub fn internal_weights(&self) -> &Vector {
        &self.p_hat
    }

    pub fn eps(&self) -> &Vector {
        &self.eps
    }

    /// Optimism `m_t` the current weights were formed with.
    pub fn optimism(&self) -> &Vector {
        &self.optimism
    }

    /// Consumes `loss = l_t` and the optimism `m_{t+1}`; leaves `p_{t+1}` in the layer.
    pub fn step(&mut self, loss: &Vector, next_optimism: &Vector) -> Result<()> {
        let n = self.dim();
        if loss.len() != n || next_optimism.len() != n {
            return Err(Error::InvalidInput(format!("layer expects vectors of length {n}")));
        }
        ensure_finite(loss.as_slice(), "layer loss")?;
        ensure_finite(next_optimism.as_slice(), "layer optimism")?;
        for (what, vec) in [("loss", loss), ("optimism", next_optimism)] {
            if let Some(i) = vec.iter().position(|x| x.abs() > 1.0) {
                return Err(Error::Contract(format!("{what}[{i}] = {} exceeds 1 in magnitude", vec[i])));
            }
        }
        let bias = Vector::from_iterator(n, (0..n).map(|i| 16.0 * self.eps[i] * (loss[i] - self.optimism[i]).powi(2)));
        self.p_hat = simplex_entropy_step(&self.p_hat, &(loss + bias), &self.eps)?;
        self.p = simplex_entropy_step(&self.p_hat, next_optimism, &self.eps)?;
        self.optimism = next_optimism.clone();
        Ok(())
    }
}

/// Constants of the two-layer stack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoMParams {
    pub c0: f64,
    pub gamma_top: f64,
    pub gamma_mid: f64,
    pub z: f64,
}

/// Per-round stability quantities, all evaluated at round `t` against round `t - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StabilityTerms {
    /// `||p_t - p_{t-1}||_1²`
    pub p_shift: f64,
    /// `||q^Top_t - q^Top_{t-1}||_1²`
    pub top_shift: f64,
    /// `sum_j q^Top_{t,j} ||q^Mid_{t,j} - q^Mid_{t-1,j}||_1²`
    pub mid_shift: f64,
    /// `sum_j q^Top_{t,j} sum_i q^Mid_{t,j,i} ||x_{t,i} - x_{t-1,i}||²`
    pub base_shift: f64,
}

/// Feedback actually fed to the layers in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct MoMFeedback {
    pub mid_loss: Vector,
    pub mid_optimism: Vector,
    pub top_loss: Vector,
    pub top_optimism: Vector,
    pub clamp_events: u64,
}

/// Two-layer stack: a top layer over `M` mid layers, each mid layer over the `N` base learners.
#[derive(Debug, Clone)]
pub struct MoM {
    top: MsMwCLayer,
    mids: Vec<MsMwCLayer>,
    params: MoMParams,
    prev_top: Vector,
    prev_mids: Vec<Vector>,
    prev_points: Option<Vec<Vector>>,
    clamp_events: u64,
}

fn l1_sq(a: &Vector, b: &Vector) -> f64 {
    (a - b).abs().sum().powi(2)
}

fn clamp_unit(v: &mut Vector, what: &str, events: &mut u64) -> Result<()> {
    for (i, x) in v.iter_mut().enumerate() {
        if x.abs() > 1.0 {
            if x.abs() <= 1.0 + CLAMP_SLACK {
                *x = x.clamp(-1.0, 1.0);
                *events += 1;
            } else {
                return Err(Error::Contract(format!(
                    "{what}[{i}] = {x} leaves [-1, 1] after normalization; the normalizer Z is too small"
                )));
            }
        }
    }
    Ok(())
}

impl MoM {
    /// `levels = M` top coordinates with `eps_j = 1/(C0 2^j)`, each mid layer over `n_experts`.
    pub fn new(levels: usize, n_experts: usize, params: MoMParams) -> Result<Self> {
        if levels == 0 || n_experts == 0 {
            return Err(Error::InvalidInput("stack needs at least one level and one expert".into()));
        }
        if !(params.c0 >= 1.0) || !(params.z > 0.0) || params.gamma_top < 0.0 || params.gamma_mid < 0.0 {
            return Err(Error::InvalidInput(format!("invalid stack constants {params:?}")));
        }
        let top_eps = Vector::from_iterator(levels, (1..=levels).map(|j| 1.0 / (params.c0 * 2f64.powi(j as i32))));
        let sq_sum: f64 = top_eps.iter().map(|e| e * e).sum();
        let top_init = top_eps.map(|e| e * e / sq_sum);
        let top = MsMwCLayer::new(top_init, top_eps.clone())?;
        let uniform = Vector::from_element(n_experts, 1.0 / n_experts as f64);
        let mids = top_eps
            .iter()
            .map(|e| MsMwCLayer::new(uniform.clone(), Vector::from_element(n_experts, 2.0 * e)))
            .collect::<Result<Vec<_>>>()?;
        let prev_top = top.weights().clone();
        let prev_mids = mids.iter().map(|m| m.weights().clone()).collect();
        Ok(Self { top, mids, params, prev_top, prev_mids, prev_points: None, clamp_events: 0 })
    }

    pub fn params(&self) -> MoMParams {
        self.params
    }

    pub fn top(&self) -> &MsMwCLayer {
        &self.top
    }

    pub fn mids(&self) -> &[MsMwCLayer] {
        &self.mids
    }

    pub fn clamp_events(&self) -> u64 {
        self.clamp_events
    }

    /// Combined weights `p = sum_j q^Top_j q^Mid_j`.
    pub fn weights(&self) -> Vector {
        let n = self.mids[0].dim();
        let mut p = Vector::zeros(n);
        for (q, mid) in self.top.weights().iter().zip(self.mids.iter()) {
            p.axpy(*q, mid.weights(), 1.0);
        }
        p
    }

    fn previous_weights(&self) -> Vector {
        let mut p = Vector::zeros(self.prev_mids[0].len());
        for (q, mid) in self.prev_top.iter().zip(self.prev_mids.iter()) {
            p.axpy(*q, mid, 1.0);
        }
        p
    }

    /// Stability quantities of the current round given the base points `x_{t,i}`.
    pub fn stability_terms(&self, points: &[Vector]) -> StabilityTerms {
        let q_top = self.top.weights();
        let mut mid_shift = 0.0;
        let mut base_shift = 0.0;
        for (j, mid) in self.mids.iter().enumerate() {
            mid_shift += q_top[j] * l1_sq(mid.weights(), &self.prev_mids[j]);
            if let Some(prev) = &self.prev_points {
                let s: f64 = mid.weights().iter().zip(points.iter().zip(prev.iter())).map(|(q, (x, xp))| q * (x - xp).norm_squared()).sum();
                base_shift += q_top[j] * s;
            }
        }
        StabilityTerms {
            p_shift: l1_sq(&self.weights(), &self.previous_weights()),
            top_shift: l1_sq(q_top, &self.prev_top),
            mid_shift,
            base_shift,
        }
    }

    /// One round: `points = x_{t,i}`, `next_points = x_{t+1,i}`, `grad = grad f_t(x_t)`.
    /// Returns the fed feedback; the new combined weights are available from [`MoM::weights`].
    pub fn round(&mut self, points: &[Vector], next_points: &[Vector], grad: &Vector) -> Result<MoMFeedback> {
        let n = self.mids[0].dim();
        if points.len() != n || next_points.len() != n {
            return Err(Error::InvalidInput(format!("stack expects {n} base points")));
        }
        let MoMParams { gamma_top, gamma_mid, z, .. } = self.params;
        let prev_points = self.prev_points.clone().unwrap_or_else(|| points.to_vec());

        let raw = Vector::from_iterator(n, points.iter().map(|x| grad.dot(x)));
        let corr = Vector::from_iterator(n, points.iter().zip(prev_points.iter()).map(|(x, xp)| gamma_mid * (x - xp).norm_squared()));
        let next_corr =
            Vector::from_iterator(n, next_points.iter().zip(points.iter()).map(|(x, xp)| gamma_mid * (x - xp).norm_squared()));

        let mut events = 0;
        let mut mid_loss = (&raw + &corr) / z;
        let mut mid_optimism = (&raw + &next_corr) / z;
        clamp_unit(&mut mid_loss, "mid loss", &mut events)?;
        clamp_unit(&mut mid_optimism, "mid optimism", &mut events)?;

        let q_mid_t: Vec<Vector> = self.mids.iter().map(|m| m.weights().clone()).collect();
        for mid in self.mids.iter_mut() {
            mid.step(&mid_loss, &mid_optimism)?;
        }

        let levels = self.mids.len();
        let mut top_loss = Vector::zeros(levels);
        let mut top_optimism = Vector::zeros(levels);
        for j in 0..levels {
            let q_t = &q_mid_t[j];
            let q_next = self.mids[j].weights();
            top_loss[j] = (raw.dot(q_t) + gamma_top * l1_sq(q_t, &self.prev_mids[j]) + q_t.dot(&corr)) / z;
            top_optimism[j] = (raw.dot(q_next) + gamma_top * l1_sq(q_next, q_t) + q_next.dot(&next_corr)) / z;
        }
        clamp_unit(&mut top_loss, "top loss", &mut events)?;
        clamp_unit(&mut top_optimism, "top optimism", &mut events)?;
        let q_top_t = self.top.weights().clone();
        self.top.step(&top_loss, &top_optimism)?;

        self.prev_top = q_top_t;
        self.prev_mids = q_mid_t;
        self.prev_points = Some(points.to_vec());
        self.clamp_events += events;
        Ok(MoMFeedback { mid_loss, mid_optimism, top_loss, top_optimism, clamp_events: events })
    }
}
