//! Flat key-value run configuration (TOML). Every tunable named by the other
//! modules appears here with its default; CLI flags override file values.

use serde::Deserialize;
use thiserror::Error;

use crate::backcast::{FillModel, SimConfig};
use crate::decimal::Money;
use crate::engine::{EngineConfig, NS_PER_DAY};
use crate::sbm::{Coupling, SbParams};
use crate::SbReal;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppConfig {
    // --- engine ---
    #[serde(default = "d_p_max")]
    pub p_max: usize,
    #[serde(default = "d_a_trans")]
    pub a_trans: f64,
    #[serde(default = "d_threshold")]
    pub threshold: f64,
    #[serde(default = "d_one_u32")]
    pub restarts_per_event: u32,
    #[serde(default = "d_max_runs")]
    pub max_runs_per_event: u32,
    #[serde(default = "d_one_f64")]
    pub m_c: f64,
    /// Penalty coefficient; omitted = auto (1 + sum of |w|) per graph.
    #[serde(default)]
    pub m_p: Option<f64>,
    #[serde(default)]
    pub session_open_tod_ns: i64,
    #[serde(default = "d_session_close")]
    pub session_close_tod_ns: i64,
    #[serde(default = "d_unwind_margin")]
    pub unwind_margin_ns: i64,
    /// Omitted = session close minus the unwind margin.
    #[serde(default)]
    pub no_open_cutoff_tod_ns: Option<i64>,
    #[serde(default)]
    pub clamp_lots: bool,
    #[serde(default)]
    pub kill_switch: bool,

    // --- solver ---
    #[serde(default = "d_n_steps")]
    pub n_steps: u32,
    #[serde(default = "d_dt")]
    pub dt: f64,
    #[serde(default = "d_one_f64")]
    pub a0: f64,
    /// Omitted = auto scaling from the mean-square coupling.
    #[serde(default)]
    pub c0: Option<f64>,
    #[serde(default = "d_machine_size")]
    pub machine_size: usize,

    // --- simulator ---
    #[serde(default = "d_commission")]
    pub commission_rate: f64,
    #[serde(default)]
    pub lapse_prob: f64,
    #[serde(default = "d_one_u32")]
    pub seed: u32,
    #[serde(default = "d_days_per_year")]
    pub trading_days_per_year: u32,
    /// Omitted = a_trans x p_max.
    #[serde(default)]
    pub capital: Option<f64>,
    #[serde(default)]
    pub close_margin: f64,
    #[serde(default)]
    pub measure_latency: bool,
}

fn d_p_max() -> usize {
    16
}
fn d_a_trans() -> f64 {
    1_500_000.0
}
fn d_threshold() -> f64 {
    -0.002
}
fn d_one_u32() -> u32 {
    1
}
fn d_max_runs() -> u32 {
    32
}
fn d_one_f64() -> f64 {
    1.0
}
fn d_session_close() -> i64 {
    NS_PER_DAY
}
fn d_unwind_margin() -> i64 {
    300_000_000_000
}
fn d_n_steps() -> u32 {
    50
}
fn d_dt() -> f64 {
    0.65
}
fn d_machine_size() -> usize {
    256
}
fn d_commission() -> f64 {
    0.0005
}
fn d_days_per_year() -> u32 {
    245
}

fn money(v: f64) -> Money {
    Money::from_raw((v * 1e6).round() as i64)
}

impl Default for AppConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config uses pure defaults")
    }
}

impl AppConfig {
    pub fn from_toml(text: &str) -> Result<AppConfig, ConfigError> {
        let cfg: AppConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.p_max == 0 {
            return bad("p_max must be >= 1");
        }
        if self.a_trans <= 0.0 {
            return bad("a_trans must be positive");
        }
        if self.m_c <= 0.0 || self.m_p.is_some_and(|v| v <= 0.0) {
            return bad("m_c and m_p must be positive");
        }
        if !(0.0..1.0).contains(&self.commission_rate) {
            return bad("commission_rate must be in [0,1)");
        }
        if !(0.0..=1.0).contains(&self.lapse_prob) {
            return bad("lapse_prob must be in [0,1]");
        }
        if self.n_steps == 0 || self.dt <= 0.0 || self.a0 <= 0.0 {
            return bad("n_steps, dt and a0 must be positive");
        }
        if self.c0.is_some_and(|v| v <= 0.0) {
            return bad("c0 must be positive when given");
        }
        if self.session_open_tod_ns < 0
            || self.session_close_tod_ns <= self.session_open_tod_ns
            || self.session_close_tod_ns > NS_PER_DAY
            || self.unwind_margin_ns < 0
        {
            return bad("trading window must satisfy 0 <= open < close <= one day");
        }
        if self.trading_days_per_year == 0 {
            return bad("trading_days_per_year must be >= 1");
        }
        if self.capital.is_some_and(|v| v <= 0.0) {
            return bad("capital must be positive when given");
        }
        Ok(())
    }

    pub fn engine_config(&self) -> EngineConfig {
        EngineConfig {
            p_max: self.p_max,
            a_trans: money(self.a_trans),
            threshold: self.threshold,
            restarts_per_event: self.restarts_per_event,
            max_runs_per_event: self.max_runs_per_event,
            m_c: self.m_c,
            m_p: self.m_p,
            session_open_tod_ns: self.session_open_tod_ns,
            session_close_tod_ns: self.session_close_tod_ns,
            no_open_cutoff_tod_ns: self
                .no_open_cutoff_tod_ns
                .unwrap_or(self.session_close_tod_ns - self.unwind_margin_ns),
            unwind_margin_ns: self.unwind_margin_ns,
            clamp_lots: self.clamp_lots,
            kill_switch: self.kill_switch,
        }
    }

    pub fn sb_params(&self) -> SbParams<SbReal> {
        SbParams {
            n_steps: self.n_steps,
            dt: self.dt as SbReal,
            a0: self.a0 as SbReal,
            c0: match self.c0 {
                Some(v) => Coupling::Fixed(v as SbReal),
                None => Coupling::Auto,
            },
            machine_size: self.machine_size,
            ..Default::default()
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            commission_rate: self.commission_rate,
            fill_model: if self.lapse_prob > 0.0 {
                FillModel::LapseProb(self.lapse_prob)
            } else {
                FillModel::AlwaysIntended
            },
            seed: self.seed,
            trading_days_per_year: self.trading_days_per_year,
            capital: self.capital.map(money),
            close_margin: money(self.close_margin),
            measure_latency: self.measure_latency,
        }
    }
}
