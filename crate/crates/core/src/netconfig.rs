//! Parameter types shared by the analytical and Monte Carlo engines, and the
//! flat JSON document they are read from.
//!
//! Powers are stored linearly. A document may instead give the ratio
//! `p1_over_p2_db`, in which case `p2` is normalized to one.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::specfun::QuadratureSettings;

/// Tier index. Macro is the first tier, pico the second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tier {
    Macro,
    Pico,
}

impl Tier {
    pub const BOTH: [Tier; 2] = [Tier::Macro, Tier::Pico];

    /// 1 for macro, 2 for pico.
    pub fn number(self) -> u8 {
        match self {
            Tier::Macro => 1,
            Tier::Pico => 2,
        }
    }

    pub fn from_number(j: u8) -> Option<Tier> {
        match j {
            1 => Some(Tier::Macro),
            2 => Some(Tier::Pico),
            _ => None,
        }
    }
}

/// Deployment of the two-tier network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    /// Macro-BS density [nodes/m²].
    pub lambda1: f64,
    /// Pico-BS density [nodes/m²].
    pub lambda2: f64,
    /// User density [nodes/m²], only used by the full-simulation mode.
    pub lambda_u: f64,
    /// Macro transmit power (linear).
    pub p1: f64,
    /// Pico transmit power (linear).
    pub p2: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    /// Macro antennas.
    pub n1: usize,
    /// Pico antennas.
    pub n2: usize,
}

impl NetworkConfig {
    /// The reference deployment: N1=10, N2=8, α1=4.5, α2=4.7, P1/P2=15 dB,
    /// λ1=5e-4 and λ2=1e-3 nodes/m².
    pub fn fig2() -> Self {
        let lambda1 = 5e-4;
        let lambda2 = 1e-3;
        NetworkConfig {
            lambda1,
            lambda2,
            lambda_u: default_user_density(lambda1, lambda2),
            p1: db_to_linear(15.0),
            p2: 1.0,
            alpha1: 4.5,
            alpha2: 4.7,
            n1: 10,
            n2: 8,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("lambda_u", self.lambda_u),
            ("p1", self.p1),
            ("p2", self.p2),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(ConfigError::invalid(format!("{name} must be positive")));
            }
        }
        if !(self.alpha1.is_finite() && self.alpha1 > 2.0) {
            return Err(ConfigError::invalid("alpha1 must exceed 2"));
        }
        if !(self.alpha2.is_finite() && self.alpha2 > 2.0) {
            return Err(ConfigError::invalid("alpha2 must exceed 2"));
        }
        if self.n2 < 1 {
            return Err(ConfigError::invalid("n2 must be at least 1"));
        }
        if self.n1 <= self.n2 {
            return Err(ConfigError::invalid("n1 must exceed n2"));
        }
        Ok(())
    }

    pub fn density(&self, tier: Tier) -> f64 {
        match tier {
            Tier::Macro => self.lambda1,
            Tier::Pico => self.lambda2,
        }
    }

    pub fn power(&self, tier: Tier) -> f64 {
        match tier {
            Tier::Macro => self.p1,
            Tier::Pico => self.p2,
        }
    }

    pub fn alpha(&self, tier: Tier) -> f64 {
        match tier {
            Tier::Macro => self.alpha1,
            Tier::Pico => self.alpha2,
        }
    }

    pub fn antennas(&self, tier: Tier) -> usize {
        match tier {
            Tier::Macro => self.n1,
            Tier::Pico => self.n2,
        }
    }
}

/// Design triple of the interference-nulling scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InParams {
    /// Maximum DoF a macro BS spends on nulling.
    pub u_max: usize,
    /// Threshold on the signal-to-individual-interference ratio for macro users.
    pub t1: f64,
    /// Same for pico users.
    pub t2: f64,
}

impl InParams {
    /// The scheme switched off: `U = 0`, `T1 = T2 = 1`.
    pub const NON_IN: InParams = InParams {
        u_max: 0,
        t1: 1.0,
        t2: 1.0,
    };

    pub fn new(u_max: usize, t1: f64, t2: f64, cfg: &NetworkConfig) -> Result<Self, ConfigError> {
        let p = InParams { u_max, t1, t2 };
        p.validate(cfg)?;
        Ok(p)
    }

    pub fn is_non_in(&self) -> bool {
        self.u_max == 0
    }

    pub fn threshold(&self, tier: Tier) -> f64 {
        match tier {
            Tier::Macro => self.t1,
            Tier::Pico => self.t2,
        }
    }

    pub fn validate(&self, cfg: &NetworkConfig) -> Result<(), ConfigError> {
        if self.u_max >= cfg.n1 {
            return Err(ConfigError::invalid("u_max must be < n1"));
        }
        for (name, t) in [("t1", self.t1), ("t2", self.t2)] {
            if !(t.is_finite() && t >= 1.0) {
                return Err(ConfigError::invalid(format!("{name} must be at least 1")));
            }
        }
        if self.u_max > 0 && (self.t1 <= 1.0 || self.t2 <= 1.0) {
            return Err(ConfigError::invalid(
                "t1 and t2 must exceed 1 when u_max > 0",
            ));
        }
        if self.u_max == 0 && (self.t1 != 1.0 || self.t2 != 1.0) {
            return Err(ConfigError::invalid("u_max = 0 requires t1 = t2 = 1"));
        }
        Ok(())
    }
}

impl fmt::Display for InParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "U={} T1={} T2={}", self.u_max, self.t1, self.t2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SimMode {
    /// Scheduled users drawn as independent point processes of densities λ1, λ2.
    #[default]
    Approx,
    /// User process of density λu with one uniformly scheduled user per BS.
    Full,
}

impl FromStr for SimMode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "approx" => Ok(SimMode::Approx),
            "full" => Ok(SimMode::Full),
            other => Err(ConfigError::invalid(format!(
                "mode must be approx or full, got {other}"
            ))),
        }
    }
}

impl fmt::Display for SimMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SimMode::Approx => "approx",
            SimMode::Full => "full",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineSettings {
    pub quadrature: QuadratureSettings,
    pub trials: u64,
    pub seed: u64,
    pub mode: SimMode,
    /// Simulation window radius in units of 1/sqrt(π λ1).
    pub window_factor: f64,
}

impl Default for EngineSettings {
    fn default() -> Self {
        EngineSettings {
            quadrature: QuadratureSettings::default(),
            trials: 10_000,
            seed: 1,
            mode: SimMode::Approx,
            window_factor: 25.0,
        }
    }
}

/// Everything a configuration document describes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfigBundle {
    pub network: NetworkConfig,
    pub params: InParams,
    pub engine: EngineSettings,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    lambda1: Option<f64>,
    lambda2: Option<f64>,
    lambda_u: Option<f64>,
    p1: Option<f64>,
    p2: Option<f64>,
    p1_over_p2_db: Option<f64>,
    alpha1: Option<f64>,
    alpha2: Option<f64>,
    n1: Option<usize>,
    n2: Option<usize>,
    u_max: Option<usize>,
    t1: Option<f64>,
    t2: Option<f64>,
    trials: Option<u64>,
    seed: Option<u64>,
    mode: Option<SimMode>,
    window_factor: Option<f64>,
    rel_tol: Option<f64>,
    abs_tol: Option<f64>,
    max_subdivisions: Option<usize>,
}

fn required<T>(v: Option<T>, key: &str) -> Result<T, ConfigError> {
    v.ok_or_else(|| ConfigError::Malformed(format!("missing key {key}")))
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// λu = 10 (λ1 + λ2): with ten users per BS on average, an empty cell is rare.
pub fn default_user_density(lambda1: f64, lambda2: f64) -> f64 {
    10.0 * (lambda1 + lambda2)
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<ConfigBundle, ConfigError> {
    let raw: RawConfig =
        serde_json::from_str(text).map_err(|e| ConfigError::Malformed(e.to_string()))?;

    let (p1, p2) = match (raw.p1, raw.p2, raw.p1_over_p2_db) {
        (None, None, Some(db)) => (db_to_linear(db), 1.0),
        (Some(p1), Some(p2), None) => (p1, p2),
        (_, _, Some(_)) => {
            return Err(ConfigError::invalid(
                "give either p1_over_p2_db or p1 and p2, not both",
            ))
        }
        _ => {
            return Err(ConfigError::Malformed(
                "missing transmit powers (p1 and p2, or p1_over_p2_db)".into(),
            ))
        }
    };
    let lambda1 = required(raw.lambda1, "lambda1")?;
    let lambda2 = required(raw.lambda2, "lambda2")?;
    let network = NetworkConfig {
        lambda1,
        lambda2,
        lambda_u: raw
            .lambda_u
            .unwrap_or_else(|| default_user_density(lambda1, lambda2)),
        p1,
        p2,
        alpha1: required(raw.alpha1, "alpha1")?,
        alpha2: required(raw.alpha2, "alpha2")?,
        n1: required(raw.n1, "n1")?,
        n2: required(raw.n2, "n2")?,
    };
    network.validate()?;

    let params = InParams {
        u_max: raw.u_max.unwrap_or(0),
        t1: raw.t1.unwrap_or(1.0),
        t2: raw.t2.unwrap_or(1.0),
    };
    params.validate(&network)?;

    let defaults = EngineSettings::default();
    let quadrature = QuadratureSettings {
        rel_tol: raw.rel_tol.unwrap_or(defaults.quadrature.rel_tol),
        abs_tol: raw.abs_tol.unwrap_or(defaults.quadrature.abs_tol),
        max_subdivisions: raw
            .max_subdivisions
            .unwrap_or(defaults.quadrature.max_subdivisions),
    };
    quadrature.validate()?;
    let engine = EngineSettings {
        quadrature,
        trials: raw.trials.unwrap_or(defaults.trials),
        seed: raw.seed.unwrap_or(defaults.seed),
        mode: raw.mode.unwrap_or(defaults.mode),
        window_factor: raw.window_factor.unwrap_or(defaults.window_factor),
    };
    if engine.trials == 0 {
        return Err(ConfigError::invalid("trials must be at least 1"));
    }
    if !(engine.window_factor.is_finite() && engine.window_factor > 0.0) {
        return Err(ConfigError::invalid("window_factor must be positive"));
    }

    Ok(ConfigBundle {
        network,
        params,
        engine,
    })
}

/// Renders a bundle as a document `parse_config` accepts. Powers are written
/// linearly.
pub fn render_config(bundle: &ConfigBundle) -> String {
    let n = &bundle.network;
    let raw = RawConfig {
        lambda1: Some(n.lambda1),
        lambda2: Some(n.lambda2),
        lambda_u: Some(n.lambda_u),
        p1: Some(n.p1),
        p2: Some(n.p2),
        p1_over_p2_db: None,
        alpha1: Some(n.alpha1),
        alpha2: Some(n.alpha2),
        n1: Some(n.n1),
        n2: Some(n.n2),
        u_max: Some(bundle.params.u_max),
        t1: Some(bundle.params.t1),
        t2: Some(bundle.params.t2),
        trials: Some(bundle.engine.trials),
        seed: Some(bundle.engine.seed),
        mode: Some(bundle.engine.mode),
        window_factor: Some(bundle.engine.window_factor),
        rel_tol: Some(bundle.engine.quadrature.rel_tol),
        abs_tol: Some(bundle.engine.quadrature.abs_tol),
        max_subdivisions: Some(bundle.engine.quadrature.max_subdivisions),
    };
    let mut value = serde_json::to_value(&raw).expect("config serializes");
    if let serde_json::Value::Object(map) = &mut value {
        map.retain(|_, v| !v.is_null());
    }
    serde_json::to_string_pretty(&value).expect("config serializes")
}
