//! Executes the (algorithm, environment, seed) matrix and writes the CSV outputs.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use unigrad::baselines::SqrtOgd;
use unigrad::environments::{
    dataset_env, drifting_linear, linear_stream, logistic_stream, parse_libsvm, sc_quadratics, sea_env, Environment, SeaBase,
};
use unigrad::games::{bilinear_regrets, play_game, player_domain, GameSpec, GameTrace, Opponent};
use unigrad::losses::LossFn;
use unigrad::metrics::{checkpoint_grid, compute_regret, run_ensemble, track_quantities, RunRecord, RunTrace};
use unigrad::{configure, Ensemble, Variant, Vector};

use crate::output::{config_sidecar, run_csv, run_file_name, summary_csv, write_file};
use crate::settings::{Algo, EnvKind, OpponentKind, RunConfig};
use crate::CliError;

/// One row of a per-run CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointRow {
    pub round: u64,
    pub regret: f64,
    /// Cumulative loss of the learner.
    pub loss: f64,
    /// Running empirical gradient variation.
    pub vbar: f64,
    /// Cumulative gradient queries.
    pub queries: u64,
}

/// Outcome of one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub algo: String,
    pub env: String,
    pub seed: u64,
    pub rows: Vec<CheckpointRow>,
    pub final_regret: f64,
    pub vbar_t: f64,
    pub v_t: Option<f64>,
    pub f_t: Option<f64>,
    pub w_t: Option<f64>,
    pub total_queries: u64,
    pub wall_ms: u128,
    /// Per-player regrets of game runs.
    pub regret_x: Option<f64>,
    pub regret_y: Option<f64>,
    pub config_lines: Vec<(String, String)>,
}

/// Offset separating the random opponent's stream from the game matrix stream.
const OPPONENT_SEED_OFFSET: u64 = 0x5eed_0000;

/// Builds the loss sequence of `cfg.env` for `seed`.
pub fn build_env(cfg: &RunConfig, seed: u64, records: Option<&[(Vector, f64)]>) -> Result<Environment, CliError> {
    let t = cfg.horizon;
    let env = match cfg.env {
        EnvKind::ScQuadratic => sc_quadratics(t, cfg.dim, cfg.lambda, seed)?,
        EnvKind::Logistic => logistic_stream(t, cfg.dim, seed)?,
        EnvKind::Linear => linear_stream(t, cfg.dim, seed)?,
        EnvKind::DriftingLinear => drifting_linear(t, seed)?,
        EnvKind::Dataset => {
            let records = records.ok_or_else(|| CliError::MissingInput("dataset records".into()))?;
            dataset_env(records, cfg.dataset_kind, t, seed)?
        }
        EnvKind::SeaQuadratic => sea_env(SeaBase::Quadratic { lambda: cfg.lambda, drift: 0.5 }, cfg.sigma, t, cfg.dim, seed)?,
        EnvKind::SeaLinear => sea_env(SeaBase::Linear { drift: 1.0 }, cfg.sigma, t, cfg.dim, seed)?,
        EnvKind::GameBilinear => return Err(CliError::Usage("games have no loss-sequence environment".into())),
    };
    Ok(env)
}

fn base_lines(cfg: &RunConfig, seed: u64) -> Vec<(String, String)> {
    let mut lines = vec![
        ("run.algo".to_string(), cfg.algo.name().to_string()),
        ("run.env".to_string(), cfg.env.name().to_string()),
        ("run.T".to_string(), cfg.horizon.to_string()),
        ("run.seed".to_string(), seed.to_string()),
        ("run.mode".to_string(), cfg.mode.name().to_string()),
        ("run.checkpoints".to_string(), cfg.checkpoints.to_string()),
    ];
    match cfg.env {
        EnvKind::ScQuadratic | EnvKind::Logistic | EnvKind::Linear => lines.push(("run.dim".into(), cfg.dim.to_string())),
        EnvKind::SeaQuadratic | EnvKind::SeaLinear => {
            lines.push(("run.dim".into(), cfg.dim.to_string()));
            lines.push(("run.sigma".into(), format!("{:e}", cfg.sigma)));
        }
        EnvKind::Dataset => {
            let path = cfg.dataset.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
            lines.push(("run.dataset".into(), path));
            lines.push(("run.dataset_kind".into(), cfg.dataset_kind.name().into()));
        }
        EnvKind::GameBilinear => {
            lines.push(("run.game_dim".into(), cfg.game_dim.to_string()));
            let opp = match cfg.opponent {
                OpponentKind::Honest => "honest",
                OpponentKind::Random => "random",
            };
            lines.push(("run.opponent".into(), opp.into()));
        }
        EnvKind::DriftingLinear => {}
    }
    if matches!(cfg.env, EnvKind::ScQuadratic | EnvKind::SeaQuadratic) {
        lines.push(("run.lambda".into(), format!("{:e}", cfg.lambda)));
    }
    lines
}

fn prefixed(lines: Vec<(String, String)>) -> Vec<(String, String)> {
    lines.into_iter().map(|(k, v)| (format!("algo.{k}"), v)).collect()
}

/// Runs one seed without touching the filesystem.
pub fn run_seed(cfg: &RunConfig, seed: u64, records: Option<&[(Vector, f64)]>) -> Result<RunResult, CliError> {
    if cfg.env.is_game() {
        return run_game(cfg, seed);
    }
    let start = Instant::now();
    let env = build_env(cfg, seed, records)?;
    let t = cfg.horizon;
    let mut config_lines = base_lines(cfg, seed);
    let trace = match cfg.algo {
        Algo::Ogd => {
            let g = env.meta().grad_bound;
            config_lines.push(("algo.variant".into(), "ogd".into()));
            config_lines.push(("algo.D".into(), format!("{:.12e}", env.domain().diameter())));
            config_lines.push(("algo.G".into(), format!("{g:.12e}")));
            ogd_trace(&env, g, t)?
        }
        Algo::Unigrad(variant) => {
            let horizon = (variant != Variant::AnytimeBregmanPp).then_some(t);
            let algo = configure(variant, horizon, env.domain().diameter(), env.meta().grad_bound, env.nominal_smoothness(), cfg.mode)?;
            config_lines.extend(prefixed(algo.to_key_values()));
            let mut ens = Ensemble::new(algo, env.domain().clone())?;
            run_ensemble(&mut ens, &env, t, false)?
        }
    };
    let plays = trace.plays();
    let fs: Vec<LossFn> = env.functions().cloned().collect();
    let grid = checkpoint_grid(t, cfg.checkpoints);
    let points = compute_regret(&plays, &fs, env.domain(), &grid, seed)?;
    let rows: Vec<CheckpointRow> = points
        .iter()
        .map(|p| {
            let rec = &trace.records[p.round as usize - 1];
            CheckpointRow { round: p.round, regret: p.regret, loss: p.cumulative_loss, vbar: rec.vbar_running, queries: rec.query_count }
        })
        .collect();
    let quantities = track_quantities(&trace, &env, seed)?;
    let last = trace.records.last().expect("T >= 1");
    Ok(RunResult {
        algo: cfg.algo.name().into(),
        env: cfg.env.name().into(),
        seed,
        final_regret: rows.last().expect("grid ends at T").regret,
        rows,
        vbar_t: quantities.vbar_t,
        v_t: Some(quantities.v_t.value()),
        f_t: Some(quantities.f_t),
        w_t: Some(quantities.w_t_realized),
        total_queries: last.query_count,
        wall_ms: if cfg.timing { start.elapsed().as_millis() } else { 0 },
        regret_x: None,
        regret_y: None,
        config_lines,
    })
}

fn ogd_trace(env: &Environment, g: f64, t: u64) -> Result<RunTrace, CliError> {
    let mut ogd = SqrtOgd::new(env.domain(), g)?;
    let mut records = Vec::with_capacity(t as usize);
    let mut vbar = 0.0;
    let mut prev: Option<Vector> = None;
    for round in 1..=t {
        let mut oracle = env.oracle(round);
        let x = ogd.point().clone();
        let grad = oracle.gradient(&x)?;
        if let Some(p) = &prev {
            vbar += (&grad - p).norm_squared();
        }
        ogd.step(&grad)?;
        records.push(RunRecord {
            round,
            loss_value: oracle.function().value(&x),
            play: x,
            grad_at_play: grad.clone(),
            query_count: round,
            vbar_running: vbar,
            expert_losses: None,
        });
        prev = Some(grad);
    }
    Ok(RunTrace { records, reports: Vec::new() })
}

fn run_game(cfg: &RunConfig, seed: u64) -> Result<RunResult, CliError> {
    let start = Instant::now();
    let t = cfg.horizon;
    let spec = GameSpec::random_bilinear(cfg.game_dim, cfg.game_dim, seed)?;
    let algo = configure(Variant::GameCorrectPp, Some(t), std::f64::consts::SQRT_2, spec.grad_bound(), 1.0, cfg.mode)?;
    let mut config_lines = base_lines(cfg, seed);
    config_lines.extend(prefixed(algo.to_key_values()));
    let domain = player_domain(cfg.game_dim)?;
    let mut x = Ensemble::new(algo.clone(), domain.clone())?;
    let mut y = Ensemble::new(algo, domain)?;
    let (opponent, per_round) = match cfg.opponent {
        OpponentKind::Honest => (Opponent::Honest, 2),
        OpponentKind::Random => (Opponent::UniformRandom { seed: seed.wrapping_add(OPPONENT_SEED_OFFSET) }, 1),
    };
    let trace = play_game(&spec, &mut x, &mut y, opponent, t)?;
    let vbar = empirical_variation_pair(&trace);
    let mut cumulative = Vec::with_capacity(trace.values.len());
    let mut acc = 0.0;
    for v in &trace.values {
        acc += v;
        cumulative.push(acc);
    }
    let mut rows = Vec::new();
    let mut finals = (0.0, 0.0);
    for round in checkpoint_grid(t, cfg.checkpoints) {
        let (rx, ry) = bilinear_regrets(&spec, &trace, round as usize)?;
        finals = (rx, ry);
        let i = round as usize - 1;
        rows.push(CheckpointRow { round, regret: rx + ry, loss: cumulative[i], vbar: vbar[i], queries: per_round * round });
    }
    Ok(RunResult {
        algo: cfg.algo.name().into(),
        env: cfg.env.name().into(),
        seed,
        rows,
        final_regret: finals.0 + finals.1,
        vbar_t: *vbar.last().expect("T >= 1"),
        v_t: None,
        f_t: None,
        w_t: None,
        total_queries: per_round * t,
        wall_ms: if cfg.timing { start.elapsed().as_millis() } else { 0 },
        regret_x: Some(finals.0),
        regret_y: Some(finals.1),
        config_lines,
    })
}

/// Running `sum ||gx_t - gx_{t-1}||² + ||gy_t - gy_{t-1}||²` over both players.
fn empirical_variation_pair(trace: &GameTrace) -> Vec<f64> {
    let mut out = Vec::with_capacity(trace.gx.len());
    let mut acc = 0.0;
    for t in 0..trace.gx.len() {
        if t > 0 {
            acc += (&trace.gx[t] - &trace.gx[t - 1]).norm_squared() + (&trace.gy[t] - &trace.gy[t - 1]).norm_squared();
        }
        out.push(acc);
    }
    out
}

fn load_records(cfg: &RunConfig) -> Result<Option<Vec<(Vector, f64)>>, CliError> {
    let Some(path) = &cfg.dataset else { return Ok(None) };
    if cfg.env != EnvKind::Dataset {
        return Ok(None);
    }
    let text = std::fs::read_to_string(path).map_err(|e| CliError::MissingInput(format!("dataset {}: {e}", path.display())))?;
    Ok(Some(parse_libsvm(&text)?))
}

/// Runs every seed on a worker pool and writes run CSVs, config sidecars and `summary.csv`.
pub fn execute(cfg: &RunConfig) -> Result<Vec<RunResult>, CliError> {
    let records = load_records(cfg)?;
    let n = cfg.seeds.len();
    let workers = std::thread::available_parallelism().map(|w| w.get()).unwrap_or(1).min(n);
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<RunResult, CliError>>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let outcome = run_seed(cfg, cfg.seeds[i], records.as_deref()).and_then(|r| {
                    write_file(&cfg.out, &run_file_name(&r), &run_csv(&r))?;
                    let (name, text) = config_sidecar(&r.config_lines);
                    write_file(&cfg.out, &name, &text)?;
                    Ok(r)
                });
                slots.lock().expect("no worker panicked")[i] = Some(outcome);
            });
        }
    });
    let results = slots
        .into_inner()
        .expect("no worker panicked")
        .into_iter()
        .map(|r| r.expect("every seed ran"))
        .collect::<Result<Vec<_>, _>>()?;
    write_file(&cfg.out, "summary.csv", &summary_csv(&results))?;
    Ok(results)
}
