//! Loss-sequence generators: curvature suites, drifting linear losses, datasets and SEA sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{ensure_finite, Error, Result};
use crate::geometry::{Domain, DomainKind, Vector};
use crate::losses::{standard_losses, Curvature, LossFn, LossOracle, StandardKind};

/// Number of domain samples used for sup estimates.
pub const SUP_SAMPLES: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct EnvMeta {
    pub true_class: Curvature,
    pub grad_bound: f64,
    /// `None` for non-smooth sequences.
    pub smoothness: Option<f64>,
    /// Exact `V_T` when the gradient field differences are constant in `x`.
    pub exact_vt: Option<f64>,
}

/// Monte-Carlo estimates of the SEA variance quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeaStats {
    /// Estimate of the cumulative stochastic variance.
    pub sigma_sq: f64,
    pub sigma_sq_stderr: f64,
    /// Estimate of the cumulative adversarial variation of the expected losses.
    pub big_sigma_sq: f64,
    /// Configured per-round variance `E||xi||²`.
    pub per_round_variance: f64,
}

/// A finite, precomputed loss sequence on a fixed domain.
#[derive(Debug, Clone)]
pub struct Environment {
    name: String,
    domain: Domain,
    oracles: Vec<LossOracle>,
    meta: EnvMeta,
    sea: Option<SeaStats>,
    seed: u64,
}

impl Environment {
    pub fn new(name: impl Into<String>, domain: Domain, oracles: Vec<LossOracle>, meta: EnvMeta, seed: u64) -> Result<Self> {
        if oracles.is_empty() {
            return Err(Error::InvalidInput("environment needs at least one round".into()));
        }
        if let Some(t) = oracles.iter().position(|o| o.function().dim() != domain.dim()) {
            return Err(Error::InvalidInput(format!("loss of round {} has the wrong dimension", t + 1)));
        }
        Ok(Self { name: name.into(), domain, oracles, meta, sea: None, seed })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn horizon(&self) -> u64 {
        self.oracles.len() as u64
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn meta(&self) -> &EnvMeta {
        &self.meta
    }

    pub fn sea(&self) -> Option<&SeaStats> {
        self.sea.as_ref()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Fresh oracle for round `t` (1-based) with a zeroed query counter.
    pub fn oracle(&self, t: u64) -> LossOracle {
        assert!(t >= 1 && t <= self.horizon(), "round {t} outside 1..={}", self.horizon());
        self.oracles[(t - 1) as usize].clone()
    }

    pub fn functions(&self) -> impl Iterator<Item = &LossFn> {
        self.oracles.iter().map(|o| o.function())
    }

    /// Smoothness constant used by the conversions; linear sequences get a nominal 1.
    pub fn nominal_smoothness(&self) -> f64 {
        match self.meta.smoothness {
            Some(l) if l > 0.0 => l,
            _ => 1.0,
        }
    }

    /// Ball radius of the enlarged domain used by the small-loss quantity.
    pub fn enlarged_radius(&self) -> f64 {
        self.domain.max_norm() + self.meta.grad_bound / self.nominal_smoothness()
    }
}

fn gaussian(rng: &mut ChaCha8Rng, d: usize) -> Vector {
    Vector::from_iterator(d, (0..d).map(|_| StandardNormal.sample(rng)))
}

fn clip(v: Vector, r: f64) -> Vector {
    let n = v.norm();
    if n > r {
        v * (r / n)
    } else {
        v
    }
}

/// Uniform sample from the ball of radius `r`.
pub fn uniform_in_ball(rng: &mut ChaCha8Rng, d: usize, r: f64) -> Vector {
    let dir = gaussian(rng, d);
    let n = dir.norm();
    let u: f64 = rng.random();
    if n == 0.0 {
        return Vector::zeros(d);
    }
    dir * (r * u.powf(1.0 / d as f64) / n)
}

/// Uniform sample from the probability simplex.
pub fn uniform_in_simplex(rng: &mut ChaCha8Rng, d: usize) -> Vector {
    let e = Vector::from_iterator(d, (0..d).map(|_| -(1.0 - rng.random::<f64>()).ln()));
    let s = e.sum();
    e / s
}

/// Uniform sample from `dom`.
pub fn sample_domain(rng: &mut ChaCha8Rng, dom: &Domain) -> Vector {
    match dom.kind() {
        DomainKind::Ball { dim, radius } => uniform_in_ball(rng, *dim, *radius),
        DomainKind::Box { lo, hi } => Vector::from_iterator(lo.len(), (0..lo.len()).map(|i| rng.random_range(lo[i]..=hi[i]))),
        DomainKind::Simplex { dim } => uniform_in_simplex(rng, *dim),
    }
}

fn check_horizon(t: u64) -> Result<()> {
    if t == 0 {
        return Err(Error::InvalidInput("horizon must be at least 1".into()));
    }
    Ok(())
}

const SC_CENTER_RADIUS: f64 = 3.0;

/// `(lambda/2)||x - c_t||²` on the unit ball; centers drift slowly along a small arc plus
/// standard Gaussian noise, clipped to `||c_t|| <= 3`.
pub fn sc_quadratics(horizon: u64, d: usize, lambda: f64, seed: u64) -> Result<Environment> {
    check_horizon(horizon)?;
    if d == 0 || !(lambda > 0.0) {
        return Err(Error::InvalidInput("need d >= 1 and lambda > 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut oracles = Vec::with_capacity(horizon as usize);
    for t in 0..horizon {
        let theta = std::f64::consts::PI * t as f64 / horizon as f64;
        let mut c = Vector::from_element(d, 0.2);
        c[0] += 0.05 * theta.cos();
        if d > 1 {
            c[1] += 0.05 * theta.sin();
        }
        let c = clip(c + gaussian(&mut rng, d), SC_CENTER_RADIUS);
        let f = LossFn::Quadratic { lambda, center: c, tilt: Vector::zeros(d) };
        oracles.push(LossOracle::new(f, Curvature::StronglyConvex(lambda), Some(lambda), lambda * (1.0 + SC_CENTER_RADIUS)));
    }
    let grad_bound = lambda * (1.0 + SC_CENTER_RADIUS);
    let meta = EnvMeta { true_class: Curvature::StronglyConvex(lambda), grad_bound, smoothness: Some(lambda), exact_vt: None };
    let mut env = Environment::new("sc-quadratic", Domain::unit_ball(d), oracles, meta, seed)?;
    env.meta.exact_vt = Some(exact_variation(&env).expect("same-lambda quadratics have constant gradient differences"));
    Ok(env)
}

/// Logistic losses on the unit ball with features in the unit ball and labels from a noisy linear model.
pub fn logistic_stream(horizon: u64, d: usize, seed: u64) -> Result<Environment> {
    check_horizon(horizon)?;
    if d == 0 {
        return Err(Error::InvalidInput("need d >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = clip(gaussian(&mut rng, d), 1.0) * 3.0;
    let mut oracles = Vec::with_capacity(horizon as usize);
    let mut alpha = f64::INFINITY;
    for _ in 0..horizon {
        let a = uniform_in_ball(&mut rng, d, 1.0);
        let p = 1.0 / (1.0 + (-w.dot(&a)).exp());
        let y = if rng.random::<f64>() < p { 1.0 } else { -1.0 };
        let o = standard_losses(StandardKind::Logistic, a, y, 1.0);
        if let Curvature::ExpConcave(al) = o.curvature() {
            alpha = alpha.min(al);
        }
        oracles.push(o);
    }
    let meta = EnvMeta { true_class: Curvature::ExpConcave(alpha), grad_bound: 1.0, smoothness: Some(0.25), exact_vt: None };
    Environment::new("logistic", Domain::unit_ball(d), oracles, meta, seed)
}

/// Noisy linear losses `<a_t, x>` with `a_t` a clipped Gaussian around a fixed mean.
pub fn linear_stream(horizon: u64, d: usize, seed: u64) -> Result<Environment> {
    check_horizon(horizon)?;
    if d == 0 {
        return Err(Error::InvalidInput("need d >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mean = clip(gaussian(&mut rng, d), 1.0) * 0.3;
    let oracles: Vec<LossOracle> = (0..horizon)
        .map(|_| {
            let a = clip(&mean + gaussian(&mut rng, d) * 0.5, 1.0);
            LossOracle::new(LossFn::Linear { a, b: 0.0 }, Curvature::Convex, Some(0.0), 1.0)
        })
        .collect();
    let meta = EnvMeta { true_class: Curvature::Convex, grad_bound: 1.0, smoothness: Some(0.0), exact_vt: None };
    let mut env = Environment::new("linear", Domain::unit_ball(d), oracles, meta, seed)?;
    env.meta.exact_vt = exact_variation(&env);
    Ok(env)
}

/// Parameters `(a_i, b_i)` of the piecewise-constant linear sequence.
pub fn drifting_linear_params(seed: u64, step: f64) -> Vec<(Vector, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = vec![(Vector::from_column_slice(&[0.2, 0.2]), 0.0)];
    for i in 1..10 {
        let (a, b) = &params[i - 1];
        let eps = gaussian(&mut rng, 2);
        let xi: f64 = StandardNormal.sample(&mut rng);
        params.push((a + eps * step, b + step * xi));
    }
    params
}

/// Ten linear phases on the unit disk; phase `i` is active for `floor(10 (t-1) / T) = i`.
pub fn drifting_linear(horizon: u64, seed: u64) -> Result<Environment> {
    drifting_linear_scaled(horizon, seed, 0.1)
}

/// [`drifting_linear`] with a configurable drift step; `step = 0` gives a constant sequence.
pub fn drifting_linear_scaled(horizon: u64, seed: u64, step: f64) -> Result<Environment> {
    if horizon < 10 {
        return Err(Error::InvalidInput("drifting linear sequence needs T >= 10".into()));
    }
    let params = drifting_linear_params(seed, step);
    let grad_bound = params.iter().map(|(a, _)| a.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let oracles: Vec<LossOracle> = (1..=horizon)
        .map(|t| {
            let i = (10 * (t - 1) / horizon) as usize;
            let (a, b) = params[i].clone();
            LossOracle::new(LossFn::Linear { a, b }, Curvature::Convex, Some(0.0), grad_bound)
        })
        .collect();
    let meta = EnvMeta { true_class: Curvature::Convex, grad_bound, smoothness: Some(0.0), exact_vt: None };
    let mut env = Environment::new("drifting-linear", Domain::unit_ball(2), oracles, meta, seed)?;
    env.meta.exact_vt = exact_variation(&env);
    Ok(env)
}

/// `V_T` when consecutive gradient fields differ by a constant (linear, or quadratics sharing lambda).
pub fn exact_variation(env: &Environment) -> Option<f64> {
    let fs: Vec<&LossFn> = env.functions().collect();
    let mut total = 0.0;
    for w in fs.windows(2) {
        let diff = match (w[0], w[1]) {
            (LossFn::Linear { a: a0, .. }, LossFn::Linear { a: a1, .. }) => a1 - a0,
            (
                LossFn::Quadratic { lambda: l0, center: c0, tilt: t0 },
                LossFn::Quadratic { lambda: l1, center: c1, tilt: t1 },
            ) if l0 == l1 => (t1 - t0) - (c1 - c0) * *l0,
            _ => return None,
        };
        total += diff.norm_squared();
    }
    Some(total)
}

/// Sampled lower estimate of `V_T`: per round, the sup over [`SUP_SAMPLES`] domain points plus `extra` points.
pub fn sampled_variation(env: &Environment, extra: &[Vec<Vector>], seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_5a3b1e5);
    let samples: Vec<Vector> = (0..SUP_SAMPLES).map(|_| sample_domain(&mut rng, env.domain())).collect();
    let fs: Vec<&LossFn> = env.functions().collect();
    let mut total = 0.0;
    for t in 1..fs.len() {
        let mut best: f64 = 0.0;
        let extra_t = extra.get(t).map(|v| v.as_slice()).unwrap_or(&[]);
        let extra_prev = extra.get(t - 1).map(|v| v.as_slice()).unwrap_or(&[]);
        for x in samples.iter().chain(extra_t).chain(extra_prev) {
            best = best.max((fs[t].gradient(x) - fs[t - 1].gradient(x)).norm_squared());
        }
        total += best;
    }
    total
}

/// Parses LIBSVM sparse text (`label idx:val ...`, 1-based indices); labels map to `{-1, +1}`.
pub fn parse_libsvm(text: &str) -> Result<Vec<(Vector, f64)>> {
    let mut rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
    let mut dim = 0;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let label: f64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::InvalidInput(format!("line {}: bad label", lineno + 1)))?;
        let mut feats = Vec::new();
        for tok in parts {
            let (i, v) = tok
                .split_once(':')
                .ok_or_else(|| Error::InvalidInput(format!("line {}: expected index:value, got {tok:?}", lineno + 1)))?;
            let i: usize = i.parse().map_err(|_| Error::InvalidInput(format!("line {}: bad index {i:?}", lineno + 1)))?;
            let v: f64 = v.parse().map_err(|_| Error::InvalidInput(format!("line {}: bad value {v:?}", lineno + 1)))?;
            if i == 0 {
                return Err(Error::InvalidInput(format!("line {}: indices are 1-based", lineno + 1)));
            }
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!("line {}: non-finite feature", lineno + 1)));
            }
            dim = dim.max(i);
            feats.push((i - 1, v));
        }
        rows.push((feats, label));
    }
    if rows.is_empty() {
        return Err(Error::InvalidInput("dataset is empty".into()));
    }
    let mut labels: Vec<f64> = rows.iter().map(|r| r.1).collect();
    labels.sort_by(f64::total_cmp);
    labels.dedup();
    if labels.len() > 2 {
        return Err(Error::InvalidInput(format!("expected a binary dataset, found {} labels", labels.len())));
    }
    let positive = *labels.last().unwrap();
    let two_class = labels.len() == 2;
    Ok(rows
        .into_iter()
        .map(|(feats, label)| {
            let mut a = Vector::zeros(dim.max(1));
            for (i, v) in feats {
                a[i] = v;
            }
            let y = if two_class {
                if label == positive {
                    1.0
                } else {
                    -1.0
                }
            } else if label > 0.0 {
                1.0
            } else {
                -1.0
            };
            (a, y)
        })
        .collect())
}

/// Samples records uniformly with replacement; features are l2-normalized so `||a|| <= 1`.
pub fn dataset_env(records: &[(Vector, f64)], kind: StandardKind, horizon: u64, seed: u64) -> Result<Environment> {
    check_horizon(horizon)?;
    if records.is_empty() {
        return Err(Error::InvalidInput("dataset is empty".into()));
    }
    let d = records[0].0.len();
    for (i, (a, _)) in records.iter().enumerate() {
        if a.len() != d {
            return Err(Error::InvalidInput(format!("record {i} has dimension {} instead of {d}", a.len())));
        }
        ensure_finite(a.as_slice(), "features")?;
    }
    let normalized: Vec<(Vector, f64)> = records
        .iter()
        .map(|(a, y)| {
            let n = a.norm();
            (if n > 0.0 { a / n } else { a.clone() }, *y)
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let oracles: Vec<LossOracle> = (0..horizon)
        .map(|_| {
            let (a, y) = normalized[rng.random_range(0..normalized.len())].clone();
            standard_losses(kind, a, y, 1.0)
        })
        .collect();
    let (true_class, grad_bound, smoothness) = match kind {
        StandardKind::Hinge => (Curvature::Convex, 1.0, None),
        StandardKind::Logistic => {
            let alpha = oracles
                .iter()
                .filter_map(|o| match o.curvature() {
                    Curvature::ExpConcave(a) => Some(a),
                    _ => None,
                })
                .fold(f64::INFINITY, f64::min);
            (Curvature::ExpConcave(alpha), 1.0, Some(0.25))
        }
        StandardKind::HingeL2 => (Curvature::StronglyConvex(1.0), 2.0, None),
    };
    let meta = EnvMeta { true_class, grad_bound, smoothness, exact_vt: None };
    Environment::new(format!("dataset-{}", kind.name()), Domain::unit_ball(d), oracles, meta, seed)
}

/// Expected-loss families for SEA sequences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SeaBase {
    /// `F_t(x) = (lambda/2)||x - c_t||²`, `c_t` on a circle of radius `drift`.
    Quadratic { lambda: f64, drift: f64 },
    /// `F_t(x) = <u_t, x>`, `u_t` of norm 0.5 rotating by a total angle `drift * pi`.
    Linear { drift: f64 },
}

/// `f_t = F_t + <xi_t, x>` with `xi_t` uniform in the ball of radius `noise_sigma`.
pub fn sea_env(base: SeaBase, noise_sigma: f64, horizon: u64, d: usize, seed: u64) -> Result<Environment> {
    check_horizon(horizon)?;
    if !(noise_sigma >= 0.0) || d < 2 {
        return Err(Error::InvalidInput("need noise_sigma >= 0 and d >= 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tn = horizon as f64;
    let mut expected = Vec::with_capacity(horizon as usize);
    let mut oracles = Vec::with_capacity(horizon as usize);
    let mut noise_sq = Vec::with_capacity(horizon as usize);
    for t in 0..horizon {
        let theta = std::f64::consts::PI * t as f64 / tn;
        let xi = uniform_in_ball(&mut rng, d, noise_sigma);
        noise_sq.push(xi.norm_squared());
        let (fbar, f, oracle_meta) = match base {
            SeaBase::Quadratic { lambda, drift } => {
                let mut c = Vector::zeros(d);
                c[0] = drift * theta.cos();
                c[1] = drift * theta.sin();
                let fbar = LossFn::Quadratic { lambda, center: c.clone(), tilt: Vector::zeros(d) };
                let f = LossFn::Quadratic { lambda, center: c, tilt: xi };
                (fbar, f, (Curvature::StronglyConvex(lambda), Some(lambda), lambda * (1.0 + drift) + noise_sigma))
            }
            SeaBase::Linear { drift } => {
                let mut u = Vector::zeros(d);
                u[0] = 0.5 * (drift * theta).cos();
                u[1] = 0.5 * (drift * theta).sin();
                let f = LossFn::Linear { a: &u + xi, b: 0.0 };
                (LossFn::Linear { a: u, b: 0.0 }, f, (Curvature::Convex, Some(0.0), 0.5 + noise_sigma))
            }
        };
        expected.push(fbar);
        oracles.push(LossOracle::new(f, oracle_meta.0, oracle_meta.1, oracle_meta.2));
    }
    let (true_class, smoothness, grad_bound) = match base {
        SeaBase::Quadratic { lambda, drift } => (Curvature::StronglyConvex(lambda), Some(lambda), lambda * (1.0 + drift) + noise_sigma),
        SeaBase::Linear { .. } => (Curvature::Convex, Some(0.0), 0.5 + noise_sigma),
    };

    let domain = Domain::unit_ball(d);
    let mut srng = ChaCha8Rng::seed_from_u64(seed ^ 0x5ea);
    let samples: Vec<Vector> = (0..SUP_SAMPLES).map(|_| sample_domain(&mut srng, &domain)).collect();
    let big_sigma_sq: f64 = expected
        .windows(2)
        .map(|w| samples.iter().map(|x| (w[1].gradient(x) - w[0].gradient(x)).norm_squared()).fold(0.0, f64::max))
        .sum();
    // the perturbation is constant in x, so the per-round sup is its realized squared norm
    let n = noise_sq.len() as f64;
    let sigma_sq: f64 = noise_sq.iter().sum();
    let mean = sigma_sq / n;
    let var = if n > 1.0 { noise_sq.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    let stats = SeaStats {
        sigma_sq,
        sigma_sq_stderr: (var * n).sqrt(),
        big_sigma_sq,
        per_round_variance: noise_sigma * noise_sigma * d as f64 / (d as f64 + 2.0),
    };
    let name = match base {
        SeaBase::Quadratic { .. } => "sea-quadratic",
        SeaBase::Linear { .. } => "sea-linear",
    };
    let meta = EnvMeta { true_class, grad_bound, smoothness, exact_vt: None };
    let mut env = Environment::new(name, domain, oracles, meta, seed)?;
    env.meta.exact_vt = exact_variation(&env);
    env.sea = Some(stats);
    Ok(env)
}
