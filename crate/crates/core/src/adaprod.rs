//! Optimistic Adapt-ML-Prod (fixed horizon and anytime activation) and the scalar
//! fixed-point solver for its self-referential optimism.

use crate::error::{ensure_finite, Error, Result};
use crate::geometry::Vector;

/// Learning-rate cap of the fixed-horizon mode.
pub const FIXED_EPS_CAP: f64 = 1.0 / 8.0;
/// Prior count of the anytime learning rate `sqrt(1 / (5 + sum (r - m)²))`.
pub const ANYTIME_PRIOR: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProdMode {
    Fixed,
    Anytime,
}

/// Potentials are kept as `ln W`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProdState {
    log_w: Vec<f64>,
    eps: Vec<f64>,
    cum_sq: Vec<f64>,
    active_from: Vec<u64>,
    mode: ProdMode,
}

impl ProdState {
    /// Fixed-horizon state over `n` experts: `W_0 = 1/N`, `eps = 1/8`.
    pub fn fixed(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("need at least one expert".into()));
        }
        Ok(Self {
            log_w: vec![-(n as f64).ln(); n],
            eps: vec![FIXED_EPS_CAP; n],
            cum_sq: vec![0.0; n],
            active_from: vec![1; n],
            mode: ProdMode::Fixed,
        })
    }

    /// Empty anytime state; experts join through [`ProdState::activate`].
    pub fn anytime() -> Self {
        Self { log_w: vec![], eps: vec![], cum_sq: vec![], active_from: vec![], mode: ProdMode::Anytime }
    }

    /// Adds an anytime expert with `W = 1` and `eps = 1/sqrt(5)`.
    pub fn activate(&mut self, round: u64) -> Result<usize> {
        if self.mode != ProdMode::Anytime {
            return Err(Error::Contract("experts can only be activated in anytime mode".into()));
        }
        self.log_w.push(0.0);
        self.eps.push((1.0 / ANYTIME_PRIOR).sqrt());
        self.cum_sq.push(0.0);
        self.active_from.push(round);
        Ok(self.log_w.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.log_w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_w.is_empty()
    }

    pub fn mode(&self) -> ProdMode {
        self.mode
    }

    pub fn eps(&self) -> &[f64] {
        &self.eps
    }

    pub fn log_potentials(&self) -> &[f64] {
        &self.log_w
    }

    pub fn cum_sq(&self) -> &[f64] {
        &self.cum_sq
    }

    pub fn active_from(&self) -> &[u64] {
        &self.active_from
    }

    /// `p_i ∝ eps_i exp(eps_i m_i) W_i`, computed in log domain.
    pub fn weights(&self, optimism: &[f64]) -> Result<Vector> {
        let n = self.len();
        if n == 0 {
            return Err(Error::Contract("no active experts".into()));
        }
        if optimism.len() != n {
            return Err(Error::InvalidInput(format!("optimism has length {}, expected {n}", optimism.len())));
        }
        ensure_finite(optimism, "prod optimism")?;
        if n == 1 {
            return Ok(Vector::from_element(1, 1.0));
        }
        let logits: Vec<f64> = (0..n).map(|i| self.eps[i].ln() + self.eps[i] * optimism[i] + self.log_w[i]).collect();
        let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !m.is_finite() {
            return Err(Error::Numerical("all expert weights underflowed".into()));
        }
        let mut p = Vector::from_iterator(n, logits.iter().map(|l| (l - m).exp()));
        let s = p.sum();
        p /= s;
        Ok(p)
    }

    fn next_eps(&self, cum_sq: f64) -> f64 {
        match self.mode {
            ProdMode::Fixed => {
                if cum_sq == 0.0 {
                    FIXED_EPS_CAP
                } else {
                    FIXED_EPS_CAP.min(((self.len() as f64).ln() / cum_sq).sqrt())
                }
            }
            ProdMode::Anytime => (1.0 / (ANYTIME_PRIOR + cum_sq)).sqrt(),
        }
    }

    /// `ln W' = (eps'/eps)(ln W + eps r - eps² (r - m)²)` with `eps'` from the updated squared sums.
    pub fn update(&mut self, r: &[f64], m: &[f64]) -> Result<()> {
        let n = self.len();
        if r.len() != n || m.len() != n {
            return Err(Error::InvalidInput(format!("prod update expects {n} entries")));
        }
        ensure_finite(r, "instantaneous regret")?;
        ensure_finite(m, "prod optimism")?;
        for i in 0..n {
            let dev = (r[i] - m[i]).powi(2);
            self.cum_sq[i] += dev;
            let eps = self.eps[i];
            let eps_next = self.next_eps(self.cum_sq[i]);
            // a single expert under ln N = 0 would zero its rate; its weight is 1 regardless
            if eps_next > 0.0 {
                self.log_w[i] = (eps_next / eps) * (self.log_w[i] + eps * r[i] - eps * eps * dev);
                self.eps[i] = eps_next;
            }
        }
        Ok(())
    }
}

/// Outcome of the scalar fixed-point solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPoint {
    pub z: f64,
    pub residual: f64,
    pub evaluations: usize,
}

pub const FIXED_POINT_MAX_ITER: usize = 200;

/// Finds `z` with `|<g_prev, response(z)> - z| <= tol` on `[-bound, bound]`.
///
/// Uses a bracketed false-position (Illinois) iteration on `phi(z) = <g_prev, response(z)> - z`;
/// without a sign change it falls back to the best point of a 64-point grid refined twice.
pub fn solve_optimism_fixed_point<F>(g_prev: &Vector, mut response: F, bound: f64, tol: f64) -> Result<FixedPoint>
where
    F: FnMut(f64) -> Result<Vector>,
{
    if !(bound >= 0.0) || !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("fixed-point bound {bound} / tolerance {tol} invalid")));
    }
    let mut evaluations = 0;
    let mut phi = |z: f64| -> Result<f64> { Ok(g_prev.dot(&response(z)?) - z) };

    let (mut a, mut b) = (-bound, bound);
    let (mut fa, mut fb) = (phi(a)?, phi(b)?);
    evaluations += 2;
    let mut best = if fa.abs() <= fb.abs() { (a, fa) } else { (b, fb) };
    if best.1.abs() <= tol {
        return Ok(FixedPoint { z: best.0, residual: best.1.abs(), evaluations });
    }
    if fa.signum() != fb.signum() {
        let mut side = 0i8;
        for _ in 0..FIXED_POINT_MAX_ITER {
            let mut c = (a * fb - b * fa) / (fb - fa);
            if !c.is_finite() || c <= a.min(b) || c >= a.max(b) {
                c = 0.5 * (a + b);
            }
            let fc = phi(c)?;
            evaluations += 1;
            if fc.abs() < best.1.abs() {
                best = (c, fc);
            }
            if fc.abs() <= tol {
                break;
            }
            if fc.signum() == fb.signum() {
                b = c;
                fb = fc;
                if side == -1 {
                    fa *= 0.5;
                }
                side = -1;
            } else {
                a = c;
                fa = fc;
                if side == 1 {
                    fb *= 0.5;
                }
                side = 1;
            }
        }
    } else {
        let (mut lo, mut hi) = (-bound, bound);
        for _ in 0..3 {
            let step = (hi - lo) / 63.0;
            for k in 0..64 {
                let z = lo + step * k as f64;
                let f = phi(z)?;
                evaluations += 1;
                if f.abs() < best.1.abs() {
                    best = (z, f);
                }
            }
            lo = (best.0 - step).max(-bound);
            hi = (best.0 + step).min(bound);
        }
    }
    Ok(FixedPoint { z: best.0, residual: best.1.abs(), evaluations })
}
