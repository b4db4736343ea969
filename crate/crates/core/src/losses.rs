//! Per-round loss functions, gradient-query accounting and one-gradient surrogates.

use crate::error::{ensure_finite, Error, Result};
use crate::geometry::Vector;

/// Curvature class of a loss sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Curvature {
    Convex,
    StronglyConvex(f64),
    ExpConcave(f64),
}

/// Closed-form loss families used by the environments.
#[derive(Debug, Clone, PartialEq)]
pub enum LossFn {
    /// `<a, x> + b`
    Linear { a: Vector, b: f64 },
    /// `(lambda/2) ||x - center||² + <tilt, x>`
    Quadratic { lambda: f64, center: Vector, tilt: Vector },
    /// `ln(1 + exp(-y <a, x>))`
    Logistic { a: Vector, y: f64 },
    /// `max(0, 1 - y <a, x>)`
    Hinge { a: Vector, y: f64 },
    /// `max(0, 1 - y <a, x>) + ||x||²/2`
    HingeL2 { a: Vector, y: f64 },
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LossFn {
    pub fn dim(&self) -> usize {
        match self {
            LossFn::Linear { a, .. } | LossFn::Logistic { a, .. } | LossFn::Hinge { a, .. } | LossFn::HingeL2 { a, .. } => a.len(),
            LossFn::Quadratic { center, .. } => center.len(),
        }
    }

    pub fn value(&self, x: &Vector) -> f64 {
        match self {
            LossFn::Linear { a, b } => a.dot(x) + b,
            LossFn::Quadratic { lambda, center, tilt } => 0.5 * lambda * (x - center).norm_squared() + tilt.dot(x),
            LossFn::Logistic { a, y } => softplus(-y * a.dot(x)),
            LossFn::Hinge { a, y } => (1.0 - y * a.dot(x)).max(0.0),
            LossFn::HingeL2 { a, y } => (1.0 - y * a.dot(x)).max(0.0) + 0.5 * x.norm_squared(),
        }
    }

    /// Gradient (a subgradient for the hinge kinks; zero is chosen exactly at the kink).
    pub fn gradient(&self, x: &Vector) -> Vector {
        match self {
            LossFn::Linear { a, .. } => a.clone(),
            LossFn::Quadratic { lambda, center, tilt } => (x - center) * *lambda + tilt,
            LossFn::Logistic { a, y } => a * (-y * sigmoid(-y * a.dot(x))),
            LossFn::Hinge { a, y } => {
                if 1.0 - y * a.dot(x) > 0.0 {
                    a * -*y
                } else {
                    Vector::zeros(a.len())
                }
            }
            LossFn::HingeL2 { a, y } => {
                let mut g = x.clone();
                if 1.0 - y * a.dot(x) > 0.0 {
                    g -= a * *y;
                }
                g
            }
        }
    }

    /// Bregman divergence `f(y) - f(x) - <grad f(x), y - x>`.
    pub fn bregman(&self, y: &Vector, x: &Vector) -> f64 {
        self.value(y) - self.value(x) - self.gradient(x).dot(&(y - x))
    }

    /// `min_{||x|| <= r} f(x)` in closed form.
    pub fn min_over_ball(&self, r: f64) -> f64 {
        match self {
            LossFn::Linear { a, b } => b - r * a.norm(),
            LossFn::Quadratic { lambda, center, tilt } => {
                // minimizer of an isotropic quadratic over a ball is the projected unconstrained one
                let target = center - tilt / *lambda;
                let n = target.norm();
                let x = if n <= r { target } else { target * (r / n) };
                self.value(&x)
            }
            LossFn::Logistic { a, .. } => softplus(-a.norm() * r),
            LossFn::Hinge { a, .. } => (1.0 - a.norm() * r).max(0.0),
            LossFn::HingeL2 { a, .. } => {
                // along the margin direction: max(0, 1 - |a| s) + s²/2 for s in [0, r]
                let na = a.norm();
                if na == 0.0 {
                    return 1.0;
                }
                let kink = 1.0 / na;
                let s = na.min(kink).min(r);
                (1.0 - na * s).max(0.0) + 0.5 * s * s
            }
        }
    }
}

/// A loss together with its declared constants and a gradient-query counter.
#[derive(Debug, Clone)]
pub struct LossOracle {
    f: LossFn,
    curvature: Curvature,
    smoothness: Option<f64>,
    grad_bound: f64,
    queries: u64,
}

impl LossOracle {
    /// `smoothness = None` marks a non-smooth loss.
    pub fn new(f: LossFn, curvature: Curvature, smoothness: Option<f64>, grad_bound: f64) -> Self {
        Self { f, curvature, smoothness, grad_bound, queries: 0 }
    }

    pub fn value(&self, x: &Vector) -> f64 {
        self.f.value(x)
    }

    /// Counted gradient query.
    pub fn gradient(&mut self, x: &Vector) -> Result<Vector> {
        if x.len() != self.f.dim() {
            return Err(Error::InvalidInput(format!("oracle expects dimension {}, got {}", self.f.dim(), x.len())));
        }
        ensure_finite(x.as_slice(), "gradient query point")?;
        self.queries += 1;
        Ok(self.f.gradient(x))
    }

    pub fn queries(&self) -> u64 {
        self.queries
    }

    pub fn function(&self) -> &LossFn {
        &self.f
    }

    pub fn curvature(&self) -> Curvature {
        self.curvature
    }

    pub fn smoothness(&self) -> Option<f64> {
        self.smoothness
    }

    pub fn grad_bound(&self) -> f64 {
        self.grad_bound
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StandardKind {
    Hinge,
    Logistic,
    HingeL2,
}

impl StandardKind {
    pub fn name(&self) -> &'static str {
        match self {
            StandardKind::Hinge => "hinge",
            StandardKind::Logistic => "logistic",
            StandardKind::HingeL2 => "hinge-l2",
        }
    }
}

/// Classification losses on a ball of radius `radius`.
///
/// Constants: hinge has `G = |a|`; logistic has `G = |a|`, `L = |a|²/4` and is
/// `exp(-|a| r)`-exp-concave on the ball; hinge-l2 has `G = |a| + r` and is 1-strongly convex.
pub fn standard_losses(kind: StandardKind, a: Vector, y: f64, radius: f64) -> LossOracle {
    let na = a.norm();
    match kind {
        StandardKind::Hinge => LossOracle::new(LossFn::Hinge { a, y }, Curvature::Convex, None, na),
        StandardKind::Logistic => {
            let alpha = (-na * radius).exp();
            LossOracle::new(LossFn::Logistic { a, y }, Curvature::ExpConcave(alpha), Some(0.25 * na * na), na)
        }
        StandardKind::HingeL2 => LossOracle::new(LossFn::HingeL2 { a, y }, Curvature::StronglyConvex(1.0), None, na + radius),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurrogateKind {
    Sc,
    Exp,
    Cvx,
}

/// Divisor of the curvature term in the surrogates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Divisor {
    Two,
    Four,
}

impl Divisor {
    pub fn value(self) -> f64 {
        match self {
            Divisor::Two => 2.0,
            Divisor::Four => 4.0,
        }
    }
}

/// Linearized loss with a curvature term, built from one gradient at the anchor `x_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateLoss {
    pub anchor_point: Vector,
    pub anchor_gradient: Vector,
    pub coefficient: f64,
    pub kind: SurrogateKind,
    pub divisor: Divisor,
}

pub fn make_surrogate_sc(g_t: &Vector, x_t: &Vector, lambda: f64, divisor: Divisor) -> SurrogateLoss {
    SurrogateLoss { anchor_point: x_t.clone(), anchor_gradient: g_t.clone(), coefficient: lambda, kind: SurrogateKind::Sc, divisor }
}

pub fn make_surrogate_exp(g_t: &Vector, x_t: &Vector, alpha: f64, divisor: Divisor) -> SurrogateLoss {
    SurrogateLoss { anchor_point: x_t.clone(), anchor_gradient: g_t.clone(), coefficient: alpha, kind: SurrogateKind::Exp, divisor }
}

pub fn make_surrogate_cvx(g_t: &Vector, x_t: &Vector) -> SurrogateLoss {
    SurrogateLoss {
        anchor_point: x_t.clone(),
        anchor_gradient: g_t.clone(),
        coefficient: 0.0,
        kind: SurrogateKind::Cvx,
        divisor: Divisor::Four,
    }
}

impl SurrogateLoss {
    pub fn value(&self, x: &Vector) -> f64 {
        let g = &self.anchor_gradient;
        let lin = g.dot(x);
        let c = self.coefficient / self.divisor.value();
        match self.kind {
            SurrogateKind::Sc => lin + c * (x - &self.anchor_point).norm_squared(),
            SurrogateKind::Exp => lin + c * g.dot(&(x - &self.anchor_point)).powi(2),
            SurrogateKind::Cvx => lin,
        }
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        let g = &self.anchor_gradient;
        let c = 2.0 * self.coefficient / self.divisor.value();
        match self.kind {
            SurrogateKind::Sc => g + (x - &self.anchor_point) * c,
            SurrogateKind::Exp => g + g * (c * g.dot(&(x - &self.anchor_point))),
            SurrogateKind::Cvx => g.clone(),
        }
    }
}
