//! Regret against the best fixed decision, variation quantities and numeric conversion checks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ensemble::{Ensemble, RoundReport};
use crate::environments::{exact_variation, sample_domain, sampled_variation, Environment};
use crate::error::{Error, Result};
use crate::geometry::{project_euclidean, Domain, DomainKind, Vector};
use crate::losses::LossFn;

pub const COMPARATOR_RESTARTS: usize = 8;
pub const COMPARATOR_ITERS: usize = 5000;
const COMPARATOR_STEP_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub round: u64,
    pub play: Vector,
    pub loss_value: f64,
    pub grad_at_play: Vector,
    /// Cumulative gradient queries after this round.
    pub query_count: u64,
    pub vbar_running: f64,
    /// `f_t(x_{t,i})` for every base learner, kept on linear sequences.
    pub expert_losses: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct RunTrace {
    pub records: Vec<RunRecord>,
    /// Full round reports, when requested.
    pub reports: Vec<RoundReport>,
}

impl RunTrace {
    pub fn plays(&self) -> Vec<Vector> {
        self.records.iter().map(|r| r.play.clone()).collect()
    }

    pub fn grads(&self) -> Vec<Vector> {
        self.records.iter().map(|r| r.grad_at_play.clone()).collect()
    }
}

/// Drives `ens` through the first `rounds` rounds of `env`.
pub fn run_ensemble(ens: &mut Ensemble, env: &Environment, rounds: u64, keep_reports: bool) -> Result<RunTrace> {
    if rounds > env.horizon() {
        return Err(Error::InvalidInput(format!("{rounds} rounds requested from an environment of length {}", env.horizon())));
    }
    let linear = env.functions().all(|f| matches!(f, LossFn::Linear { .. }));
    let mut records = Vec::with_capacity(rounds as usize);
    let mut reports = Vec::new();
    let mut queries = 0;
    let mut vbar = 0.0;
    let mut prev_grad: Option<Vector> = None;
    for t in 1..=rounds {
        let mut oracle = env.oracle(t);
        let report = ens.step(&mut oracle)?;
        queries += oracle.queries();
        if let Some(g) = &prev_grad {
            vbar += (&report.grad - g).norm_squared();
        }
        prev_grad = Some(report.grad.clone());
        let f = oracle.function();
        records.push(RunRecord {
            round: t,
            play: report.play.clone(),
            loss_value: f.value(&report.play),
            grad_at_play: report.grad.clone(),
            query_count: queries,
            vbar_running: vbar,
            expert_losses: linear.then(|| report.learner_points.iter().map(|x| f.value(x)).collect()),
        });
        if keep_reports {
            reports.push(report);
        }
    }
    Ok(RunTrace { records, reports })
}

/// Best fixed decision of a loss prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparator {
    pub x_star: Vector,
    /// `sum_t f_t(x_star)`.
    pub value: f64,
    pub closed_form: bool,
    /// `false` when the iterative solver hit its iteration cap.
    pub converged: bool,
}

fn total_value(fs: &[LossFn], x: &Vector) -> f64 {
    fs.iter().map(|f| f.value(x)).sum()
}

fn linear_minimizer(s: &Vector, dom: &Domain) -> Vector {
    match dom.kind() {
        DomainKind::Ball { radius, .. } => {
            let n = s.norm();
            if n == 0.0 {
                dom.center()
            } else {
                s * (-radius / n)
            }
        }
        DomainKind::Box { lo, hi } => Vector::from_iterator(s.len(), (0..s.len()).map(|i| if s[i] > 0.0 { lo[i] } else { hi[i] })),
        DomainKind::Simplex { dim } => {
            let i = s.argmin().0;
            let mut e = Vector::zeros(*dim);
            e[i] = 1.0;
            e
        }
    }
}

/// Minimizer of a sum of linear losses and isotropic quadratics, or `None` for other families.
fn closed_form(fs: &[LossFn], dom: &Domain) -> Result<Option<Vector>> {
    let d = dom.dim();
    let mut lambda_total = 0.0;
    let mut pull = Vector::zeros(d);
    let mut linear = Vector::zeros(d);
    for f in fs {
        match f {
            LossFn::Linear { a, .. } => linear += a,
            LossFn::Quadratic { lambda, center, tilt } => {
                lambda_total += lambda;
                pull.axpy(*lambda, center, 1.0);
                linear += tilt;
            }
            _ => return Ok(None),
        }
    }
    if lambda_total == 0.0 {
        return Ok(Some(linear_minimizer(&linear, dom)));
    }
    Ok(Some(project_euclidean(&((pull - linear) / lambda_total), dom)?))
}

fn smooth_constant(f: &LossFn) -> Option<f64> {
    match f {
        LossFn::Linear { .. } => Some(0.0),
        LossFn::Quadratic { lambda, .. } => Some(*lambda),
        LossFn::Logistic { a, .. } => Some(0.25 * a.norm_squared()),
        LossFn::Hinge { .. } | LossFn::HingeL2 { .. } => None,
    }
}

/// Projected (sub)gradient descent on the average loss from `start`.
fn descend(fs: &[LossFn], dom: &Domain, start: Vector, iters: usize) -> Result<(Vector, f64, bool)> {
    let n = fs.len() as f64;
    let smooth: Option<Vec<f64>> = fs.iter().map(smooth_constant).collect();
    let avg_grad = |x: &Vector| fs.iter().fold(Vector::zeros(x.len()), |acc, f| acc + f.gradient(x)) / n;
    match smooth {
        Some(ls) => {
            let l = (ls.iter().sum::<f64>() / n).max(1e-12);
            let mut x = start;
            for _ in 0..iters {
                let next = project_euclidean(&(&x - avg_grad(&x) / l), dom)?;
                let moved = (&next - &x).norm();
                x = next;
                if moved <= COMPARATOR_STEP_TOL {
                    let v = total_value(fs, &x);
                    return Ok((x, v, true));
                }
            }
            let v = total_value(fs, &x);
            Ok((x, v, false))
        }
        None => {
            // strongly convex part of hinge-l2 averages to 1; plain hinge uses a 1/sqrt(k) schedule
            let strongly = fs.iter().all(|f| matches!(f, LossFn::HingeL2 { .. }));
            let g_scale = fs.iter().map(|f| f.gradient(&start).norm()).fold(1.0, f64::max);
            let radius = dom.diameter();
            let mut x = start;
            let mut best = (x.clone(), total_value(fs, &x));
            for k in 1..=iters {
                let g = avg_grad(&x);
                let eta = if strongly { 1.0 / k as f64 } else { radius / (g_scale * (k as f64).sqrt()) };
                x = project_euclidean(&(&x - g * eta), dom)?;
                let v = total_value(fs, &x);
                if v < best.1 {
                    best = (x.clone(), v);
                }
            }
            Ok((best.0, best.1, false))
        }
    }
}

/// Best fixed decision in hindsight for `fs` on `dom`.
///
/// Linear and isotropic-quadratic sums are solved in closed form. Otherwise projected gradient
/// descent runs from `warm` (if any) and the domain center; with `restarts`, seeded random starts
/// are added when that does not converge.
pub fn offline_comparator(
    fs: &[LossFn],
    dom: &Domain,
    seed: u64,
    warm: Option<&Vector>,
    iters: usize,
    restarts: bool,
) -> Result<Comparator> {
    if fs.is_empty() {
        return Err(Error::InvalidInput("comparator needs at least one loss".into()));
    }
    if let Some(x) = closed_form(fs, dom)? {
        let value = total_value(fs, &x);
        return Ok(Comparator { x_star: x, value, closed_form: true, converged: true });
    }
    let mut starts = vec![dom.center()];
    if let Some(w) = warm {
        starts.insert(0, w.clone());
    }
    let mut best: Option<(Vector, f64, bool)> = None;
    let consider = |cand: (Vector, f64, bool), best: &mut Option<(Vector, f64, bool)>| {
        if best.as_ref().is_none_or(|b| cand.1 < b.1) {
            *best = Some(cand);
        }
    };
    for s in starts {
        let cand = descend(fs, dom, s, iters)?;
        consider(cand, &mut best);
    }
    if restarts && !best.as_ref().expect("at least one start").2 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc0ffee);
        for _ in 0..COMPARATOR_RESTARTS {
            let s = sample_domain(&mut rng, dom);
            let cand = descend(fs, dom, s, iters)?;
            consider(cand, &mut best);
        }
    }
    let (x_star, value, converged) = best.expect("at least one start");
    Ok(Comparator { x_star, value, closed_form: false, converged })
}

/// `k` evenly spaced checkpoints ending exactly at `horizon`.
pub fn checkpoint_grid(horizon: u64, k: u64) -> Vec<u64> {
    let k = k.clamp(1, horizon.max(1));
    let mut out: Vec<u64> = (1..=k).map(|j| (j * horizon).div_ceil(k)).collect();
    out.dedup();
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretPoint {
    pub round: u64,
    pub regret: f64,
    pub cumulative_loss: f64,
    pub comparator: Comparator,
}

/// Prefix regrets at `checkpoints` (sorted, within `1..=plays.len()`).
pub fn compute_regret(plays: &[Vector], fs: &[LossFn], dom: &Domain, checkpoints: &[u64], seed: u64) -> Result<Vec<RegretPoint>> {
    if plays.len() != fs.len() {
        return Err(Error::InvalidInput(format!("{} plays against {} losses", plays.len(), fs.len())));
    }
    let horizon = plays.len() as u64;
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) || checkpoints.iter().any(|&c| c == 0 || c > horizon) {
        return Err(Error::InvalidInput("checkpoints must be increasing within the horizon".into()));
    }
    let mut cumulative = Vec::with_capacity(plays.len());
    let mut acc = 0.0;
    for (x, f) in plays.iter().zip(fs) {
        acc += f.value(x);
        cumulative.push(acc);
    }
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut warm: Option<Vector> = None;
    for &tau in checkpoints {
        let last = tau == horizon;
        let iters = if last { COMPARATOR_ITERS } else { COMPARATOR_ITERS / 5 };
        let comp = offline_comparator(&fs[..tau as usize], dom, seed, warm.as_ref(), iters, last)?;
        warm = Some(comp.x_star.clone());
        let loss = cumulative[tau as usize - 1];
        out.push(RegretPoint { round: tau, regret: loss - comp.value, cumulative_loss: loss, comparator: comp });
    }
    Ok(out)
}

/// Final regret of a play sequence.
pub fn final_regret(plays: &[Vector], fs: &[LossFn], dom: &Domain, seed: u64) -> Result<f64> {
    let t = plays.len() as u64;
    Ok(compute_regret(plays, fs, dom, &[t], seed)?[0].regret)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VariationValue {
    Exact(f64),
    /// Per-round sup over sampled domain points and the trajectory; a lower estimate.
    Sampled(f64),
}

impl VariationValue {
    pub fn value(self) -> f64 {
        match self {
            VariationValue::Exact(v) | VariationValue::Sampled(v) => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariationReport {
    pub vbar_t: f64,
    pub v_t: VariationValue,
    pub f_t: f64,
    /// Gradient variance at the realized trajectory, not the sup over trajectories.
    pub w_t_realized: f64,
}

/// `sum_{t>=2} ||g_t - g_{t-1}||²`.
pub fn empirical_variation(grads: &[Vector]) -> f64 {
    grads.windows(2).map(|w| (&w[1] - &w[0]).norm_squared()).sum()
}

/// `sum_t ||g_t - mean(g)||²`.
pub fn realized_variance(grads: &[Vector]) -> f64 {
    if grads.is_empty() {
        return 0.0;
    }
    let mean = grads.iter().fold(Vector::zeros(grads[0].len()), |a, g| a + g) / grads.len() as f64;
    grads.iter().map(|g| (g - &mean).norm_squared()).sum()
}

/// Variation quantities of a full run on a ball domain.
pub fn track_quantities(trace: &RunTrace, env: &Environment, seed: u64) -> Result<VariationReport> {
    let plays = trace.plays();
    let grads = trace.grads();
    let fs: Vec<LossFn> = env.functions().take(plays.len()).cloned().collect();
    let vbar_t = empirical_variation(&grads);
    let v_t = match exact_variation(env) {
        Some(v) if plays.len() as u64 == env.horizon() => VariationValue::Exact(v),
        _ => {
            let extra: Vec<Vec<Vector>> = plays.iter().map(|x| vec![x.clone()]).collect();
            VariationValue::Sampled(sampled_variation(env, &extra, seed))
        }
    };
    let comp = offline_comparator(&fs, env.domain(), seed, None, COMPARATOR_ITERS, true)?;
    let r_plus = env.enlarged_radius();
    let f_t = comp.value - fs.iter().map(|f| f.min_over_ball(r_plus)).sum::<f64>();
    Ok(VariationReport { vbar_t, v_t, f_t, w_t_realized: realized_variance(&grads) })
}

/// Both sides of a numeric inequality `lhs <= rhs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inequality {
    pub lhs: f64,
    pub rhs: f64,
}

impl Inequality {
    /// Holds up to a relative slack.
    pub fn holds(&self, rel_slack: f64) -> bool {
        self.lhs <= self.rhs + rel_slack * self.rhs.abs().max(1.0)
    }
}

/// `Vbar <= 2 V + 2 L² sum ||x_t - x_{t-1}||²`.
pub fn vbar_conversion_check(grads: &[Vector], plays: &[Vector], v_t: f64, l: f64) -> Inequality {
    let movement: f64 = plays.windows(2).map(|w| (&w[1] - &w[0]).norm_squared()).sum();
    Inequality { lhs: empirical_variation(grads), rhs: 2.0 * v_t + 2.0 * l * l * movement }
}

/// Index of the base learner with the smallest cumulative loss.
pub fn best_expert(reports: &[RoundReport], fs: &[LossFn]) -> usize {
    let n = reports[0].learner_points.len();
    let mut totals = vec![0.0; n];
    for (r, f) in reports.iter().zip(fs) {
        for (i, x) in r.learner_points.iter().enumerate().take(n) {
            totals[i] += f.value(x);
        }
    }
    totals.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap_or(0)
}

/// `Vbar <= 4 V + 16 L sum D_{f_t}(x_{t,i}, x_t) + 4 L² sum ||x_{t,i} - x_{t-1,i}||²` for expert `i`,
/// with the variation term evaluated pointwise at the expert's decisions.
pub fn expert_variation_check(reports: &[RoundReport], fs: &[LossFn], expert: usize, l: f64) -> Inequality {
    let grads: Vec<Vector> = reports.iter().map(|r| r.grad.clone()).collect();
    let mut v_point = 0.0;
    let mut bregman = 0.0;
    let mut movement = 0.0;
    for t in 0..reports.len() {
        let xi = &reports[t].learner_points[expert];
        bregman += fs[t].bregman(xi, &reports[t].play);
        if t > 0 {
            v_point += (fs[t].gradient(xi) - fs[t - 1].gradient(xi)).norm_squared();
            movement += (xi - &reports[t - 1].learner_points[expert]).norm_squared();
        }
    }
    Inequality { lhs: empirical_variation(&grads), rhs: 4.0 * v_point + 16.0 * l * bregman + 4.0 * l * l * movement }
}

/// `Vbar <= 16 L sum (f_t(x_t) - min_{X+} f_t)`.
pub fn small_loss_check(grads: &[Vector], plays: &[Vector], fs: &[LossFn], l: f64, r_plus: f64) -> Inequality {
    let gap: f64 = plays.iter().zip(fs).map(|(x, f)| f.value(x) - f.min_over_ball(r_plus)).sum();
    Inequality { lhs: empirical_variation(grads), rhs: 16.0 * l * gap }
}

/// `Vbar <= 4 W_T` with the realized variance.
pub fn variance_check(grads: &[Vector]) -> Inequality {
    Inequality { lhs: empirical_variation(grads), rhs: 4.0 * realized_variance(grads) }
}

/// Per-round stacked-meta checks: weight shift split and decision shift split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructuralCheck {
    pub weight_split: Inequality,
    pub decision_split: Option<Inequality>,
    pub feedback_bounded: bool,
}

/// Checks one report of a stacked run; `prev_play` is `x_{t-1}`, `d` the domain diameter.
pub fn structural_check(report: &RoundReport, prev_play: Option<&Vector>, d: f64) -> Option<StructuralCheck> {
    let s = report.stability?;
    let weight_split = Inequality { lhs: s.p_shift, rhs: 2.0 * s.top_shift + 2.0 * s.mid_shift };
    let decision_split = prev_play.map(|pp| Inequality {
        lhs: (&report.play - pp).norm_squared(),
        rhs: 4.0 * d * d * (s.top_shift + s.mid_shift) + 2.0 * s.base_shift,
    });
    let feedback_bounded = report.feedback.as_ref().is_none_or(|fb| {
        [&fb.mid_loss, &fb.mid_optimism, &fb.top_loss, &fb.top_optimism].iter().all(|v| v.iter().all(|x| x.abs() <= 1.0))
    });
    Some(StructuralCheck { weight_split, decision_split, feedback_bounded })
}

/// Samples `n` pairs in the enlarged ball and returns the worst ratio `||grad f(x) - grad f(y)|| / (L ||x - y||)`.
pub fn smoothness_ratio(f: &LossFn, l: f64, radius: f64, n: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dom = Domain::ball(f.dim(), radius).expect("positive radius");
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let x = sample_domain(&mut rng, &dom);
        let y = sample_domain(&mut rng, &dom);
        let dist = (&x - &y).norm();
        if dist > 0.0 {
            worst = worst.max((f.gradient(&x) - f.gradient(&y)).norm() / (l * dist));
        }
    }
    worst
}
