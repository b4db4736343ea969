//! Run configuration: registered names, seed lists and `key=value` files.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use unigrad::losses::StandardKind;
use unigrad::{ConstantFamily, Variant};

use crate::CliError;

/// Algorithms the runner can execute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algo {
    Unigrad(Variant),
    /// Projected OGD with `eta_t = D / (G sqrt t)`.
    Ogd,
}

impl Algo {
    pub fn name(&self) -> &'static str {
        match self {
            Algo::Unigrad(v) => v.name(),
            Algo::Ogd => "ogd",
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algo {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        if s == "ogd" {
            return Ok(Algo::Ogd);
        }
        s.parse::<Variant>()
            .map(Algo::Unigrad)
            .map_err(|_| CliError::Usage(format!("unknown algorithm '{s}' (known: {}, ogd)", variant_names())))
    }
}

fn variant_names() -> String {
    Variant::ALL.iter().map(|v| v.name()).collect::<Vec<_>>().join(", ")
}

/// Registered environments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvKind {
    ScQuadratic,
    Logistic,
    Linear,
    DriftingLinear,
    Dataset,
    SeaQuadratic,
    SeaLinear,
    GameBilinear,
}

impl EnvKind {
    pub const ALL: [EnvKind; 8] = [
        EnvKind::ScQuadratic,
        EnvKind::Logistic,
        EnvKind::Linear,
        EnvKind::DriftingLinear,
        EnvKind::Dataset,
        EnvKind::SeaQuadratic,
        EnvKind::SeaLinear,
        EnvKind::GameBilinear,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            EnvKind::ScQuadratic => "sc-quadratic",
            EnvKind::Logistic => "logistic",
            EnvKind::Linear => "linear",
            EnvKind::DriftingLinear => "drifting-linear",
            EnvKind::Dataset => "dataset",
            EnvKind::SeaQuadratic => "sea-quadratic",
            EnvKind::SeaLinear => "sea-linear",
            EnvKind::GameBilinear => "game-bilinear",
        }
    }

    pub fn is_game(&self) -> bool {
        *self == EnvKind::GameBilinear
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvKind {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        EnvKind::ALL.iter().copied().find(|e| e.name() == s).ok_or_else(|| {
            let known: Vec<&str> = EnvKind::ALL.iter().map(|e| e.name()).collect();
            CliError::Usage(format!("unknown environment '{s}' (known: {})", known.join(", ")))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpponentKind {
    Honest,
    Random,
}

/// Fully validated configuration of one `run` invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub algo: Algo,
    pub env: EnvKind,
    pub horizon: u64,
    pub seeds: Vec<u64>,
    pub dataset: Option<PathBuf>,
    pub dataset_kind: StandardKind,
    pub mode: ConstantFamily,
    pub out: PathBuf,
    pub checkpoints: u64,
    pub dim: usize,
    /// Curvature of the sc-quadratic and sea-quadratic environments.
    pub lambda: f64,
    /// Noise radius of the SEA environments.
    pub sigma: f64,
    pub game_dim: usize,
    pub opponent: OpponentKind,
    /// When false, `wall_ms` is written as 0 so summaries are byte-reproducible.
    pub timing: bool,
}

/// Keys accepted in config files and as flags.
pub const KEYS: [&str; 15] = [
    "algo",
    "env",
    "T",
    "seeds",
    "dataset",
    "dataset_kind",
    "mode",
    "out",
    "checkpoints",
    "dim",
    "lambda",
    "sigma",
    "game_dim",
    "opponent",
    "timing",
];

/// Raw `key -> value` settings; later layers override earlier ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut s = Settings::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key=value", i + 1)))?;
            s.set(k.trim(), v.trim())?;
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::MissingInput(format!("config file {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        if !KEYS.contains(&key) {
            return Err(CliError::Usage(format!("unknown setting '{key}'")));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn overlay(&mut self, other: &Settings) {
        for (k, v) in &other.values {
            self.values.insert(k.clone(), v.clone());
        }
    }

    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let algo: Algo = self.required("algo")?.parse()?;
        let env: EnvKind = self.required("env")?.parse()?;
        let horizon: u64 = self.number("T", 10_000)?;
        if horizon == 0 {
            return Err(CliError::Usage("T must be at least 1".into()));
        }
        let seeds = parse_seeds(self.get("seeds").unwrap_or("1"))?;
        let dataset = self.get("dataset").map(PathBuf::from);
        if env == EnvKind::Dataset && dataset.is_none() {
            return Err(CliError::MissingInput("the dataset environment needs --dataset <path>".into()));
        }
        let dataset_kind = match self.get("dataset_kind").unwrap_or("logistic") {
            "logistic" => StandardKind::Logistic,
            "hinge" => StandardKind::Hinge,
            "hinge-l2" => StandardKind::HingeL2,
            other => return Err(CliError::Usage(format!("unknown dataset kind '{other}'"))),
        };
        let mode: ConstantFamily = self
            .get("mode")
            .unwrap_or("gv")
            .parse()
            .map_err(|e: unigrad::Error| CliError::Usage(e.to_string()))?;
        let opponent = match self.get("opponent").unwrap_or("honest") {
            "honest" => OpponentKind::Honest,
            "random" => OpponentKind::Random,
            other => return Err(CliError::Usage(format!("unknown opponent '{other}'"))),
        };
        let timing = match self.get("timing").unwrap_or("true") {
            "true" | "on" | "1" => true,
            "false" | "off" | "0" => false,
            other => return Err(CliError::Usage(format!("timing must be true or false, got '{other}'"))),
        };
        let is_game = env.is_game();
        let game_algo = algo == Algo::Unigrad(Variant::GameCorrectPp);
        if is_game != game_algo {
            return Err(CliError::Usage(format!("algorithm '{algo}' cannot run on environment '{env}'")));
        }
        let cfg = RunConfig {
            algo,
            env,
            horizon,
            seeds,
            dataset,
            dataset_kind,
            mode,
            out: PathBuf::from(self.get("out").unwrap_or(".")),
            checkpoints: self.number("checkpoints", 100)?,
            dim: self.number("dim", 2)?,
            lambda: self.number("lambda", 0.5)?,
            sigma: self.number("sigma", 0.3)?,
            game_dim: self.number("game_dim", 3)?,
            opponent,
            timing,
        };
        if cfg.checkpoints == 0 || cfg.dim == 0 || cfg.game_dim == 0 {
            return Err(CliError::Usage("checkpoints, dim and game_dim must be positive".into()));
        }
        if env == EnvKind::DriftingLinear && horizon < 10 {
            return Err(CliError::Usage("drifting-linear needs T >= 10".into()));
        }
        Ok(cfg)
    }

    fn required(&self, key: &str) -> Result<&str, CliError> {
        self.get(key).ok_or_else(|| CliError::Usage(format!("missing required setting '{key}'")))
    }

    fn number<T: FromStr>(&self, key: &str, default: T) -> Result<T, CliError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| CliError::Usage(format!("bad value for {key}: '{v}'"))),
        }
    }
}

/// Parses `1..5` (inclusive), `3`, or comma-separated mixtures such as `1..3,7`.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::Usage(format!("bad seed list '{text}'"));
    let mut seeds = Vec::new();
    for part in text.split(',').map(str::trim) {
        if let Some((a, b)) = part.split_once("..") {
            let a: u64 = a.trim().parse().map_err(|_| bad())?;
            let b: u64 = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
            if a > b {
                return Err(bad());
            }
            seeds.extend(a..=b);
        } else {
            seeds.push(part.parse().map_err(|_| bad())?);
        }
    }
    if seeds.is_empty() {
        return Err(bad());
    }
    let mut seen = std::collections::BTreeSet::new();
    if let Some(dup) = seeds.iter().find(|s| !seen.insert(**s)) {
        return Err(CliError::Usage(format!("seed {dup} listed twice")));
    }
    Ok(seeds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_ranges() {
        assert_eq!(parse_seeds("1..5").unwrap(), vec![1, 2, 3, 4, 5]);
        assert_eq!(parse_seeds("1..=3").unwrap(), vec![1, 2, 3]);
        assert_eq!(parse_seeds("4").unwrap(), vec![4]);
        assert_eq!(parse_seeds("1..2, 9").unwrap(), vec![1, 2, 9]);
        assert!(parse_seeds("5..1").is_err());
        assert!(parse_seeds("a").is_err());
        assert!(parse_seeds("1,1").is_err());
    }

    #[test]
    fn file_then_flags() {
        let mut s = Settings::parse("# comment\nalgo = correct-pp\nenv=linear\nT = 50\n\nseeds=1..2 # trailing\n").unwrap();
        let mut flags = Settings::new();
        flags.set("T", "80").unwrap();
        s.overlay(&flags);
        let cfg = s.resolve().unwrap();
        assert_eq!(cfg.algo, Algo::Unigrad(Variant::CorrectPp));
        assert_eq!(cfg.env, EnvKind::Linear);
        assert_eq!(cfg.horizon, 80);
        assert_eq!(cfg.seeds, vec![1, 2]);
        assert_eq!(cfg.checkpoints, 100);
        assert_eq!(cfg.mode, ConstantFamily::GradientVariation);
    }

    #[test]
    fn rejects_unknown_names() {
        assert!(matches!(Settings::parse("colour=red"), Err(CliError::Usage(_))));
        let mut s = Settings::new();
        s.set("algo", "sgd").unwrap();
        s.set("env", "linear").unwrap();
        assert!(matches!(s.resolve(), Err(CliError::Usage(_))));
        s.set("algo", "bregman").unwrap();
        s.set("env", "moon").unwrap();
        assert!(matches!(s.resolve(), Err(CliError::Usage(_))));
        assert!(matches!(Settings::parse("algo"), Err(CliError::Usage(_))));
    }

    #[test]
    fn game_pairing_is_enforced() {
        let mut s = Settings::new();
        s.set("algo", "bregman-pp").unwrap();
        s.set("env", "game-bilinear").unwrap();
        assert!(s.resolve().is_err());
        s.set("algo", "game-correct-pp").unwrap();
        assert!(s.resolve().is_ok());
        s.set("env", "linear").unwrap();
        assert!(s.resolve().is_err());
    }

    #[test]
    fn dataset_env_needs_a_path() {
        let mut s = Settings::new();
        s.set("algo", "bregman").unwrap();
        s.set("env", "dataset").unwrap();
        assert!(matches!(s.resolve(), Err(CliError::MissingInput(_))));
    }
}
