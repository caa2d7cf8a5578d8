//! Synthetic market feeds: correlated random-walk mid prices with configurable
//! spreads and scheduled divergence shocks, deterministic per seed.
//!
//! The generator spec is TOML:
//!
//! ```toml
//! session_ns = 18_000_000_000_000
//! quote_interval_ns = 60_000_000_000
//! days = 1
//! tick = 0.1
//!
//! [[stocks]]
//! code = "8355"
//! base = 1000.0
//! volatility = 0.0005   # relative step size
//! spread = 0.002        # relative bid/ask spread
//! block = "banks"       # stocks sharing a block move together
//!
//! [[shocks]]
//! time_ns = 3_600_000_000_000
//! code = "8355"
//! magnitude = -0.01     # relative one-off move
//! ```

use std::io::Write;

use serde::Deserialize;
use thiserror::Error;

use crate::decimal::Price;
use crate::engine::NS_PER_DAY;
use crate::sbm::XorshiftRng;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("spec parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Deserialize)]
pub struct SynthStock {
    pub code: String,
    pub base: f64,
    #[serde(default = "default_min_lot")]
    pub min_lot: u64,
    #[serde(default)]
    pub volatility: f64,
    #[serde(default = "default_spread")]
    pub spread: f64,
    #[serde(default)]
    pub block: String,
}

fn default_min_lot() -> u64 {
    100
}

fn default_spread() -> f64 {
    0.002
}

#[derive(Debug, Clone, Deserialize)]
pub struct SynthShock {
    pub time_ns: i64,
    pub code: String,
    pub magnitude: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct SynthSpec {
    #[serde(default = "default_session_ns")]
    pub session_ns: i64,
    #[serde(default = "default_interval_ns")]
    pub quote_interval_ns: i64,
    #[serde(default = "default_days")]
    pub days: u32,
    #[serde(default = "default_tick")]
    pub tick: f64,
    /// Weight of the shared block factor in each step (rest is idiosyncratic).
    #[serde(default = "default_block_mix")]
    pub block_mix: f64,
    pub stocks: Vec<SynthStock>,
    #[serde(default)]
    pub shocks: Vec<SynthShock>,
}

fn default_session_ns() -> i64 {
    18_000_000_000_000 // 5 hours
}

fn default_interval_ns() -> i64 {
    60_000_000_000
}

fn default_days() -> u32 {
    1
}

fn default_tick() -> f64 {
    0.1
}

fn default_block_mix() -> f64 {
    0.8
}

impl SynthSpec {
    pub fn from_toml(text: &str) -> Result<SynthSpec, SynthError> {
        let spec: SynthSpec = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidSpec(m.to_string()));
        if self.stocks.is_empty() {
            return bad("at least one stock required");
        }
        if self.session_ns <= 0 || self.session_ns > NS_PER_DAY {
            return bad("session_ns must be in (0, one day]");
        }
        if self.quote_interval_ns <= 0 {
            return bad("quote_interval_ns must be positive");
        }
        if self.days == 0 {
            return bad("days must be >= 1");
        }
        if self.tick <= 0.0 {
            return bad("tick must be positive");
        }
        if !(0.0..=1.0).contains(&self.block_mix) {
            return bad("block_mix must be in [0,1]");
        }
        for s in &self.stocks {
            if s.base <= 0.0 || s.volatility < 0.0 || s.spread < 0.0 || s.min_lot == 0 {
                return bad(&format!("bad parameters for stock {}", s.code));
            }
        }
        let codes: std::collections::HashSet<&str> =
            self.stocks.iter().map(|s| s.code.as_str()).collect();
        if codes.len() != self.stocks.len() {
            return bad("duplicate stock codes");
        }
        for sh in &self.shocks {
            if !codes.contains(sh.code.as_str()) {
                return bad(&format!("shock references unknown stock {}", sh.code));
            }
            if sh.time_ns < 0 || sh.time_ns >= self.days as i64 * NS_PER_DAY {
                return bad("shock time outside the simulated range");
            }
        }
        Ok(())
    }

    /// Universe CSV matching the generated feed.
    pub fn write_universe<W: Write>(&self, w: &mut W) -> Result<(), SynthError> {
        writeln!(w, "stock_code,min_lot_shares,base_price")?;
        for s in &self.stocks {
            writeln!(w, "{},{},{}", s.code, s.min_lot, price_of(s.base, self.tick))?;
        }
        Ok(())
    }
}

fn price_of(v: f64, tick: f64) -> Price {
    let raw = Price::from_raw((v * 1e6).round() as i64);
    raw.round_to_tick(Price::from_raw((tick * 1e6).round() as i64))
}

/// Uniform in [-1, 1).
fn signed_unit(rng: &mut XorshiftRng) -> f64 {
    2.0 * rng.next_unit::<f64>() - 1.0
}

/// Generates the feed file. Per quote step every stock moves by
/// volatility x mid x (block_mix x block draw + (1 - block_mix) x own draw);
/// shocks apply a one-off relative move at the first step at or after their time.
/// Each day opens with `O` records carrying the day's base (previous close) and
/// ends with `C` records.
pub fn gen_feed<W: Write>(spec: &SynthSpec, seed: u32, w: &mut W) -> Result<u64, SynthError> {
    spec.validate()?;
    let mut rng = XorshiftRng::from_seed_lossy(seed);
    let n = spec.stocks.len();
    let tick = Price::from_raw((spec.tick * 1e6).round() as i64);
    let mut mids: Vec<f64> = spec.stocks.iter().map(|s| s.base).collect();
    // deterministic block order: first appearance in the stock list
    let mut blocks: Vec<&str> = Vec::new();
    for s in &spec.stocks {
        if !s.block.is_empty() && !blocks.contains(&s.block.as_str()) {
            blocks.push(&s.block);
        }
    }
    let mut shocks: Vec<&SynthShock> = spec.shocks.iter().collect();
    shocks.sort_by_key(|s| s.time_ns);
    let mut shock_at = 0usize;
    let mut n_events = 0u64;
    let mut line = String::new();
    for day in 0..spec.days as i64 {
        let day_base = day * NS_PER_DAY;
        for (i, s) in spec.stocks.iter().enumerate() {
            // session open: the bid field carries the day's base price
            writeln!(w, "{},{},{},0,O", day_base, s.code, price_of(mids[i], spec.tick))?;
            n_events += 1;
        }
        let steps = spec.session_ns / spec.quote_interval_ns;
        for step in 0..steps {
            let t = day_base + step * spec.quote_interval_ns;
            let block_draw: Vec<f64> = blocks.iter().map(|_| signed_unit(&mut rng)).collect();
            for (i, s) in spec.stocks.iter().enumerate() {
                let own = signed_unit(&mut rng);
                let shared = blocks
                    .iter()
                    .position(|b| *b == s.block)
                    .map(|k| block_draw[k])
                    .unwrap_or(0.0);
                let mix = if s.block.is_empty() {
                    own
                } else {
                    spec.block_mix * shared + (1.0 - spec.block_mix) * own
                };
                mids[i] += s.volatility * mids[i] * mix;
                while shock_at < shocks.len()
                    && shocks[shock_at].time_ns <= t
                    && shocks[shock_at].code == s.code
                {
                    mids[i] *= 1.0 + shocks[shock_at].magnitude;
                    shock_at += 1;
                }
                let half = s.spread * mids[i] / 2.0;
                let bid = price_of(mids[i] - half, spec.tick);
                let mut ask = price_of(mids[i] + half, spec.tick);
                if ask <= bid {
                    ask = bid + tick;
                }
                let ts = t + i as i64; // unique, strictly ordered timestamps
                line.clear();
                use std::fmt::Write as _;
                let _ = write!(line, "{ts},{},{bid},{ask},Q", s.code);
                writeln!(w, "{line}")?;
                n_events += 1;
            }
            // shocks whose stock already passed this step fire on the next one;
            // advance past any remaining due shocks for determinism
            while shock_at < shocks.len() && shocks[shock_at].time_ns < t {
                let sh = shocks[shock_at];
                let i = spec.stocks.iter().position(|s| s.code == sh.code).unwrap();
                mids[i] *= 1.0 + sh.magnitude;
                shock_at += 1;
            }
        }
        for s in &spec.stocks {
            writeln!(w, "{},{},0,0,C", day_base + spec.session_ns, s.code)?;
            n_events += 1;
        }
        let _ = n;
    }
    Ok(n_events)
}
