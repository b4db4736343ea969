//! Algorithm variants and their theoretical constants.

use std::fmt;
use std::str::FromStr;

use crate::base_learners::ceil_log2;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Correct,
    Bregman,
    CorrectPp,
    BregmanPp,
    AnytimeBregmanPp,
    GameCorrectPp,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Correct,
        Variant::Bregman,
        Variant::CorrectPp,
        Variant::BregmanPp,
        Variant::AnytimeBregmanPp,
        Variant::GameCorrectPp,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Variant::Correct => "correct",
            Variant::Bregman => "bregman",
            Variant::CorrectPp => "correct-pp",
            Variant::BregmanPp => "bregman-pp",
            Variant::AnytimeBregmanPp => "anytime-bregman-pp",
            Variant::GameCorrectPp => "game-correct-pp",
        }
    }

    /// Gradient queries per round beyond the single query at the played point.
    pub fn uses_all_gradients(&self) -> bool {
        matches!(self, Variant::Correct | Variant::Bregman)
    }

    pub fn uses_stack(&self) -> bool {
        matches!(self, Variant::Correct | Variant::CorrectPp | Variant::GameCorrectPp)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .iter()
            .copied()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown algorithm '{s}'")))
    }
}

/// Which constant family the stacked variants install.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstantFamily {
    /// Gradient-variation constants.
    GradientVariation,
    /// Small-loss / gradient-variance constants.
    SmallLoss,
    /// Coordinate-wise maximum of the two.
    Union,
}

impl ConstantFamily {
    pub fn name(&self) -> &'static str {
        match self {
            ConstantFamily::GradientVariation => "gv",
            ConstantFamily::SmallLoss => "smallloss",
            ConstantFamily::Union => "union",
        }
    }
}

impl FromStr for ConstantFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gv" => Ok(ConstantFamily::GradientVariation),
            "smallloss" => Ok(ConstantFamily::SmallLoss),
            "union" => Ok(ConstantFamily::Union),
            _ => Err(Error::InvalidInput(format!("unknown mode '{s}'"))),
        }
    }
}

/// Immutable, fully resolved configuration of one algorithm instance.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgoConfig {
    pub variant: Variant,
    pub horizon: Option<u64>,
    pub family: ConstantFamily,
    pub d: f64,
    pub g: f64,
    pub l: f64,
    pub c0: Option<f64>,
    pub gamma_top: Option<f64>,
    pub gamma_mid: Option<f64>,
    pub z: Option<f64>,
    pub c1: Option<f64>,
    pub c10: Option<f64>,
    pub c11: Option<f64>,
    /// Base-learner coefficient required by the analysis.
    pub gamma_bottom: f64,
    /// Base-learner coefficient the learners actually use.
    pub base_gamma: f64,
    pub warnings: Vec<String>,
}

/// `M = ceil(log2 T)`, at least one level.
pub fn stack_levels(horizon: u64) -> usize {
    (ceil_log2(horizon) as usize).max(1)
}

fn normalizer(g: f64, d: f64, gamma_mid: f64, gamma_top: f64) -> f64 {
    (g * d + gamma_mid * d * d).max(1.0 + gamma_mid * d * d + 2.0 * gamma_top)
}

fn max_of(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

struct Stack {
    c0: f64,
    gamma_top: f64,
    gamma_mid: f64,
}

fn small_loss_stack(d: f64, g: f64) -> Stack {
    let gamma_top = max_of(&[256.0 * d * d * g * g, 64.0 * d * d * g.powi(4)]);
    let gamma_mid = max_of(&[128.0 * g * g, 32.0 * g.powi(4)]);
    let c0 = max_of(&[1.0, 8.0 * d, 4.0 * gamma_top, 512.0 * d * d * g * g, 128.0 * d * d * g.powi(4)]);
    Stack { c0, gamma_top, gamma_mid }
}

fn select(family: ConstantFamily, gv: Stack, sl: Stack) -> Stack {
    match family {
        ConstantFamily::GradientVariation => gv,
        ConstantFamily::SmallLoss => sl,
        ConstantFamily::Union => Stack {
            c0: gv.c0.max(sl.c0),
            gamma_top: gv.gamma_top.max(sl.gamma_top),
            gamma_mid: gv.gamma_mid.max(sl.gamma_mid),
        },
    }
}

/// Resolves every constant of `variant` from the domain diameter `D`, gradient bound `G` and
/// smoothness `L`. The game variant always uses `D = sqrt 2` (simplex strategies).
pub fn configure(
    variant: Variant,
    horizon: Option<u64>,
    d: f64,
    g: f64,
    l: f64,
    family: ConstantFamily,
) -> Result<AlgoConfig> {
    for (name, val) in [("D", d), ("G", g), ("L", l)] {
        if !(val > 0.0) || !val.is_finite() {
            return Err(Error::InvalidInput(format!("{name} must be positive and finite, got {val}")));
        }
    }
    let mut warnings = Vec::new();
    let horizon = match (variant, horizon) {
        (Variant::AnytimeBregmanPp, Some(t)) => {
            warnings.push(format!("horizon {t} ignored by the anytime variant"));
            None
        }
        (Variant::AnytimeBregmanPp, None) => None,
        (_, Some(0)) | (_, None) => {
            return Err(Error::InvalidInput(format!("{variant} needs a horizon T >= 1")));
        }
        (_, Some(t)) => Some(t),
    };
    let d = if variant == Variant::GameCorrectPp { std::f64::consts::SQRT_2 } else { d };

    let mut cfg = AlgoConfig {
        variant,
        horizon,
        family,
        d,
        g,
        l,
        c0: None,
        gamma_top: None,
        gamma_mid: None,
        z: None,
        c1: None,
        c10: None,
        c11: None,
        gamma_bottom: 0.0,
        base_gamma: 0.0,
        warnings,
    };

    match variant {
        Variant::Correct => {
            let c1 = 128.0 * (d * d * l * l + g * g);
            let gv = Stack { c0: max_of(&[1.0, 8.0 * d, 4.0 * c1, 4.0 * d * d * c1]), gamma_top: c1, gamma_mid: 2.0 * d * d * c1 };
            let s = select(family, gv, small_loss_stack(d, g));
            let z = normalizer(g, d, s.gamma_mid, s.gamma_top);
            cfg.gamma_bottom = max_of(&[
                4.0 * s.gamma_mid + 128.0 * l * l * g * g,
                4.0 * s.gamma_mid + 8.0 * l * l,
                4.0 * s.gamma_mid + 40.0 * d * l * l + 256.0 * g * g / z,
            ]);
            cfg.c1 = Some(c1);
            cfg.c0 = Some(s.c0);
            cfg.gamma_top = Some(s.gamma_top);
            cfg.gamma_mid = Some(s.gamma_mid);
            cfg.z = Some(z);
        }
        Variant::CorrectPp => {
            let c1 = 128.0 * (d * d * l * l + g * g);
            let c10 = 4.0 * l * l + 32.0 * d * d * g * g * l * l + 8.0 * g.powi(4);
            let c11 = 128.0 * g * g * (1.0 + l * l);
            let gamma_top = max_of(&[2.0 * d * d * c11, 8.0 * d * d * c10, 40.0 * d.powi(3) * l * l + 2.0 * d * d * c1]);
            let gamma_mid = max_of(&[c11, 4.0 * c10, 20.0 * d * l * l + c1]);
            let c0 = max_of(&[
                1.0,
                8.0 * d,
                4.0 * gamma_top,
                4.0 * d * d * c11,
                16.0 * d * d * c10,
                80.0 * d.powi(3) * l * l + 4.0 * d * d * c1,
            ]);
            let s = select(family, Stack { c0, gamma_top, gamma_mid }, small_loss_stack(d, g));
            let z = normalizer(g, d, s.gamma_mid, s.gamma_top);
            cfg.gamma_bottom = max_of(&[512.0 * g * g + 8.0 * s.gamma_mid, 64.0 * g.powi(4) + 4.0 * s.gamma_mid, 256.0 * g * g + 4.0 * s.gamma_mid]);
            cfg.c1 = Some(c1);
            cfg.c10 = Some(c10);
            cfg.c11 = Some(c11);
            cfg.c0 = Some(s.c0);
            cfg.gamma_top = Some(s.gamma_top);
            cfg.gamma_mid = Some(s.gamma_mid);
            cfg.z = Some(z);
        }
        Variant::GameCorrectPp => {
            let sqrt2 = std::f64::consts::SQRT_2;
            let gamma_mid = 128.0 + 128.0 * g * g + 40.0 * sqrt2;
            let gamma_top = 512.0 + 512.0 * g * g + 160.0 * sqrt2;
            // both players share G and the same constants, so Z^x = Z^y
            let z = normalizer(g, d, gamma_mid, gamma_top);
            let c31 = (32.0 + 64.0 * g * g) / z + 32.0 / z + 20.0 * sqrt2;
            let c32 = c31;
            cfg.c0 = Some(max_of(&[1.0, 8.0 * d, 4.0 * gamma_top, 16.0 * c31, 16.0 * c32]));
            cfg.gamma_top = Some(gamma_top);
            cfg.gamma_mid = Some(gamma_mid);
            cfg.z = Some(z);
            cfg.gamma_bottom = max_of(&[256.0 * g * g + 4.0 * gamma_mid, 256.0 + 4.0 * gamma_mid]);
        }
        Variant::Bregman | Variant::BregmanPp | Variant::AnytimeBregmanPp => {
            cfg.gamma_bottom = (l / 2.0).max(1.0);
        }
    }
    cfg.base_gamma = cfg.gamma_bottom;
    Ok(cfg)
}

impl AlgoConfig {
    /// Overrides the coefficient the base learners use, keeping the analysis value on record.
    pub fn with_base_gamma(mut self, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidInput(format!("base gamma must be positive, got {gamma}")));
        }
        self.base_gamma = gamma;
        Ok(self)
    }

    /// `key=value` lines of every resolved constant, in a fixed order.
    pub fn to_key_values(&self) -> Vec<(String, String)> {
        let opt = |x: Option<f64>| x.map(|v| format!("{v:.12e}")).unwrap_or_else(|| "none".into());
        vec![
            ("variant".into(), self.variant.name().into()),
            ("horizon".into(), self.horizon.map(|t| t.to_string()).unwrap_or_else(|| "none".into())),
            ("family".into(), self.family.name().into()),
            ("D".into(), format!("{:.12e}", self.d)),
            ("G".into(), format!("{:.12e}", self.g)),
            ("L".into(), format!("{:.12e}", self.l)),
            ("C0".into(), opt(self.c0)),
            ("gamma_top".into(), opt(self.gamma_top)),
            ("gamma_mid".into(), opt(self.gamma_mid)),
            ("Z".into(), opt(self.z)),
            ("C1".into(), opt(self.c1)),
            ("C10".into(), opt(self.c10)),
            ("C11".into(), opt(self.c11)),
            ("gamma_bottom".into(), format!("{:.12e}", self.gamma_bottom)),
            ("base_gamma".into(), format!("{:.12e}", self.base_gamma)),
        ]
    }
}
