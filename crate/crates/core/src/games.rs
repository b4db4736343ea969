//! Two-player zero-sum games on simplices and a driver for self-play.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::environments::uniform_in_simplex;
use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::geometry::{Domain, Matrix, Vector, MEMBERSHIP_TOL};

#[derive(Debug, Clone, PartialEq)]
pub enum GameKind {
    /// `f(x, y) = x^T A y`, x minimizes and y maximizes.
    Bilinear { a: Matrix },
    /// `f(x, y) = (lambda/2)||x - cx||² - (lambda/2)||y - cy||² + x^T A y`.
    ScSc { lambda: f64, a: Matrix, cx: Vector, cy: Vector },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameSpec {
    kind: GameKind,
}

impl GameSpec {
    pub fn bilinear(a: Matrix) -> Result<Self> {
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(Error::InvalidInput("empty payoff matrix".into()));
        }
        if a.iter().any(|v| !v.is_finite() || v.abs() > 1.0) {
            return Err(Error::InvalidInput("payoff entries must lie in [-1, 1]".into()));
        }
        Ok(Self { kind: GameKind::Bilinear { a } })
    }

    /// Bilinear game with entries uniform in `[-1, 1]`.
    pub fn random_bilinear(dx: usize, dy: usize, seed: u64) -> Result<Self> {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::bilinear(Matrix::from_fn(dx, dy, |_, _| rng.random_range(-1.0..=1.0)))
    }

    pub fn sc_sc(lambda: f64, a: Matrix, cx: Vector, cy: Vector) -> Result<Self> {
        if !(lambda > 0.0) || cx.len() != a.nrows() || cy.len() != a.ncols() {
            return Err(Error::InvalidInput("sc-sc game needs lambda > 0 and matching dimensions".into()));
        }
        if a.iter().any(|v| !v.is_finite() || v.abs() > 1.0) {
            return Err(Error::InvalidInput("payoff entries must lie in [-1, 1]".into()));
        }
        Ok(Self { kind: GameKind::ScSc { lambda, a, cx, cy } })
    }

    pub fn kind(&self) -> &GameKind {
        &self.kind
    }

    fn matrix(&self) -> &Matrix {
        match &self.kind {
            GameKind::Bilinear { a } | GameKind::ScSc { a, .. } => a,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.matrix().nrows(), self.matrix().ncols())
    }

    /// Bound on both players' gradient norms over the simplices.
    pub fn grad_bound(&self) -> f64 {
        let (dx, dy) = self.dims();
        let base = (dx.max(dy) as f64).sqrt();
        match &self.kind {
            GameKind::Bilinear { .. } => base,
            GameKind::ScSc { lambda, cx, cy, .. } => {
                let reach = 1.0 + cx.norm().max(cy.norm());
                base + lambda * reach
            }
        }
    }

    pub fn value(&self, x: &Vector, y: &Vector) -> f64 {
        let a = self.matrix();
        let bil = x.dot(&(a * y));
        match &self.kind {
            GameKind::Bilinear { .. } => bil,
            GameKind::ScSc { lambda, cx, cy, .. } => 0.5 * lambda * ((x - cx).norm_squared() - (y - cy).norm_squared()) + bil,
        }
    }
}

fn on_simplex(v: &Vector) -> bool {
    v.iter().all(|c| *c >= -MEMBERSHIP_TOL) && (v.sum() - 1.0).abs() <= MEMBERSHIP_TOL
}

/// Gradients of both players, each written as a loss the player minimizes; `g_y = -grad_y f`.
pub fn game_round(spec: &GameSpec, x: &Vector, y: &Vector) -> Result<(Vector, Vector, f64)> {
    let (dx, dy) = spec.dims();
    if x.len() != dx || y.len() != dy {
        return Err(Error::InvalidInput(format!("expected strategies of sizes ({dx}, {dy}), got ({}, {})", x.len(), y.len())));
    }
    if !on_simplex(x) || !on_simplex(y) {
        return Err(Error::InvalidInput("strategies must lie on their simplices".into()));
    }
    let a = spec.matrix();
    let mut gx = a * y;
    let mut gy = -(a.transpose() * x);
    if let GameKind::ScSc { lambda, cx, cy, .. } = &spec.kind {
        gx += (x - cx) * *lambda;
        gy += (y - cy) * *lambda;
    }
    Ok((gx, gy, spec.value(x, y)))
}

/// Who controls the y player.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Opponent {
    /// Both players run their ensembles.
    Honest,
    /// The y player draws uniform points of its simplex.
    UniformRandom { seed: u64 },
}

#[derive(Debug, Clone)]
pub struct GameTrace {
    pub xs: Vec<Vector>,
    pub ys: Vec<Vector>,
    pub values: Vec<f64>,
    pub gx: Vec<Vector>,
    pub gy: Vec<Vector>,
}

/// Plays `rounds` rounds; the y ensemble is ignored against a random opponent.
pub fn play_game(spec: &GameSpec, x_player: &mut Ensemble, y_player: &mut Ensemble, opponent: Opponent, rounds: u64) -> Result<GameTrace> {
    let (dx, dy) = spec.dims();
    if x_player.domain().dim() != dx || y_player.domain().dim() != dy {
        return Err(Error::InvalidInput("player domains do not match the game".into()));
    }
    let mut rng = match opponent {
        Opponent::UniformRandom { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        Opponent::Honest => None,
    };
    let cap = rounds as usize;
    let mut trace = GameTrace {
        xs: Vec::with_capacity(cap),
        ys: Vec::with_capacity(cap),
        values: Vec::with_capacity(cap),
        gx: Vec::with_capacity(cap),
        gy: Vec::with_capacity(cap),
    };
    for _ in 0..rounds {
        let x = x_player.play().clone();
        let y = match rng.as_mut() {
            Some(r) => uniform_in_simplex(r, dy),
            None => y_player.play().clone(),
        };
        let (gx, gy, value) = game_round(spec, &x, &y)?;
        x_player.step_with_gradient(&gx)?;
        if rng.is_none() {
            y_player.step_with_gradient(&gy)?;
        }
        trace.xs.push(x);
        trace.ys.push(y);
        trace.values.push(value);
        trace.gx.push(gx);
        trace.gy.push(gy);
    }
    Ok(trace)
}

/// Prefix regrets `(Reg^x, Reg^y)` after `tau` rounds of a bilinear game.
pub fn bilinear_regrets(spec: &GameSpec, trace: &GameTrace, tau: usize) -> Result<(f64, f64)> {
    let GameKind::Bilinear { a } = spec.kind() else {
        return Err(Error::InvalidInput("closed-form regrets need a bilinear game".into()));
    };
    if tau == 0 || tau > trace.values.len() {
        return Err(Error::InvalidInput(format!("prefix {tau} outside the trace")));
    }
    let (dx, dy) = spec.dims();
    let mut sx = Vector::zeros(dx);
    let mut sy = Vector::zeros(dy);
    let mut total = 0.0;
    for t in 0..tau {
        sx += &trace.xs[t];
        sy += &trace.ys[t];
        total += trace.values[t];
    }
    let best_x = (a * &sy).min();
    let best_y = (a.transpose() * &sx).max();
    Ok((total - best_x, best_y - total))
}

/// Domain shared by the game players.
pub fn player_domain(dim: usize) -> Result<Domain> {
    Domain::simplex(dim)
}
