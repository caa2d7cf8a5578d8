//! Deterministic backcast: replay a feed file through the engine and position
//! manager with a synchronous fill model, account P&L exactly, and emit daily
//! cumulative reports.
//!
//! Event order per record: book update, then close checks / forced unwind against
//! the fresh book, then new opens. Under the always-intended fill model every
//! order fills at its limit immediately, so no order is ever outstanding across
//! events; the lapse-probability model exists to exercise the T4/T6 paths.

use std::io::{BufRead, Write};

use serde::Serialize;
use thiserror::Error;

use crate::decimal::Money;
use crate::engine::{Engine, EngineConfig, EngineError, NS_PER_DAY};
use crate::feed::{parse_feed, EventKind, FeedError, Universe};
use crate::marketgraph::SimilarityMatrix;
use crate::positions::{
    ExecutionReport, LedgerRow, Outcome, PosEvent, PositionConfig, PositionError, PositionManager,
    OrderTicket,
};
use crate::sbm::{SbParams, XorshiftRng};
use crate::{Real, SbReal};

/// A lapsed close leg is reordered at most this many times before the replay
/// fills it unconditionally, guaranteeing end-of-day flatness.
const MAX_REISSUES: u32 = 5;

#[derive(Debug, Error)]
pub enum BackcastError {
    #[error(transparent)]
    Feed(#[from] FeedError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Position(#[from] PositionError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("feed timestamps not monotone at {0}")]
    NonMonotonic(i64),
    #[error("need at least 2 daily returns, got {0}")]
    InsufficientData(usize),
    #[error("capital must be positive")]
    BadCapital,
    #[error("round trip is missing a leg fill")]
    IncompleteRoundTrip,
    #[error("open positions survived session close on day {0}")]
    NotFlatAtClose(i64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FillModel {
    AlwaysIntended,
    /// Each order lapses with this probability (close legs are reordered).
    LapseProb(f64),
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub commission_rate: f64,
    pub fill_model: FillModel,
    pub seed: u32,
    pub trading_days_per_year: u32,
    /// Capital base for returns; defaults to a_trans x p_max.
    pub capital: Option<Money>,
    pub close_margin: Money,
    /// Collect per-decision wall-clock latencies (off by default: timing data
    /// would break byte-identical reruns).
    pub measure_latency: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            commission_rate: 0.0005,
            fill_model: FillModel::AlwaysIntended,
            seed: 1,
            trading_days_per_year: 245,
            capital: None,
            close_margin: Money::ZERO,
            measure_latency: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DailyReport {
    pub day: i64,
    pub transaction_amount: Money,
    pub realized_pnl: Money,
    pub opens: u32,
    pub closes: u32,
    pub cum_transaction: Money,
    pub cum_pnl: Money,
}

#[derive(Debug, Clone, Serialize)]
pub struct PerfStats {
    pub n_days: usize,
    pub mean_daily_return: f64,
    pub annualized_return: f64,
    pub risk: f64,
    /// None when the ratio is undefined (zero risk); see the flags.
    pub sharpe: Option<f64>,
    pub zero_risk: bool,
    pub zero_series: bool,
}

#[derive(Debug)]
pub struct BackcastResult {
    pub daily: Vec<DailyReport>,
    pub ledger: Vec<LedgerRow>,
    pub decisions: Vec<crate::engine::DecisionRecord>,
    pub stats: Option<PerfStats>,
    pub capital: Money,
    pub orders_issued: u64,
    pub orders_filled: u64,
    pub events_processed: u64,
    pub transitions: Vec<u8>,
    /// Per-decision-event latencies in nanoseconds; empty unless requested.
    pub latency_ns: Vec<u64>,
}

impl BackcastResult {
    pub fn fill_rate(&self) -> f64 {
        if self.orders_issued == 0 {
            1.0
        } else {
            self.orders_filled as f64 / self.orders_issued as f64
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Fill {
    pub price: crate::decimal::Price,
    pub shares: u64,
}

/// Exact round-trip P&L:
/// (open short sell − close short buy) + (close long sell − open long buy),
/// minus commission on all four transaction amounts.
pub fn pnl_round_trip(
    open_short: Option<Fill>,
    close_short: Option<Fill>,
    open_long: Option<Fill>,
    close_long: Option<Fill>,
    commission_rate: f64,
) -> Result<Money, BackcastError> {
    let (os, cs, ol, cl) = match (open_short, close_short, open_long, close_long) {
        (Some(a), Some(b), Some(c), Some(d)) => (a, b, c, d),
        _ => return Err(BackcastError::IncompleteRoundTrip),
    };
    let amt = |f: Fill| f.price.amount(f.shares);
    let gross = amt(os) - amt(cs) + amt(cl) - amt(ol);
    let turnover = amt(os) + amt(cs) + amt(ol) + amt(cl);
    Ok(gross - turnover.mul_rate(commission_rate))
}

/// Annualization of a daily P&L series against a capital base.
pub fn performance_stats(
    daily_pnl: &[Money],
    capital: Money,
    days_per_year: u32,
) -> Result<PerfStats, BackcastError> {
    if capital.raw() <= 0 {
        return Err(BackcastError::BadCapital);
    }
    let n = daily_pnl.len();
    if n < 2 {
        return Err(BackcastError::InsufficientData(n));
    }
    let cap = capital.to_f64();
    let returns: Vec<f64> = daily_pnl.iter().map(|p| p.to_f64() / cap).collect();
    let mean = returns.iter().sum::<f64>() / n as f64;
    let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let std = var.sqrt();
    let dpy = days_per_year as f64;
    let annualized_return = mean * dpy;
    let risk = std * dpy.sqrt();
    let zero_series = daily_pnl.iter().all(|p| p.raw() == 0);
    let zero_risk = risk == 0.0;
    let sharpe = if zero_risk { None } else { Some(annualized_return / risk) };
    Ok(PerfStats {
        n_days: n,
        mean_daily_return: mean,
        annualized_return,
        risk,
        sharpe,
        zero_risk,
        zero_series,
    })
}

struct DayAcc {
    day: i64,
    txn: Money,
    pnl: Money,
    opens: u32,
    closes: u32,
}

struct Replay<'a> {
    engine: Engine,
    pm: PositionManager,
    fill_rng: XorshiftRng,
    model: FillModel,
    orders: u64,
    fills: u64,
    day: Option<DayAcc>,
    daily: Vec<DailyReport>,
    cum_txn: Money,
    cum_pnl: Money,
    sim_cfg: &'a SimConfig,
}

impl Replay<'_> {
    fn roll_day(&mut self, day: i64) {
        if let Some(acc) = self.day.take() {
            self.cum_txn += acc.txn;
            self.cum_pnl += acc.pnl;
            self.daily.push(DailyReport {
                day: acc.day,
                transaction_amount: acc.txn,
                realized_pnl: acc.pnl,
                opens: acc.opens,
                closes: acc.closes,
                cum_transaction: self.cum_txn,
                cum_pnl: self.cum_pnl,
            });
        }
        self.day = Some(DayAcc { day, txn: Money::ZERO, pnl: Money::ZERO, opens: 0, closes: 0 });
    }

    fn outcome(&mut self, ticket: &OrderTicket, reissues: u32) -> Outcome {
        let lapse = match self.model {
            FillModel::AlwaysIntended => false,
            FillModel::LapseProb(p) => reissues < MAX_REISSUES && self.fill_rng.next_unit::<f64>() < p,
        };
        if lapse {
            Outcome::Lapse
        } else {
            Outcome::Fill(ticket.limit)
        }
    }

    /// Synchronously resolve a batch of orders, following reissue chains.
    fn resolve(&mut self, tickets: Vec<OrderTicket>, ts: i64) -> Result<(), BackcastError> {
        let mut queue: Vec<(OrderTicket, u32)> = tickets.into_iter().map(|t| (t, 0)).collect();
        while let Some((ticket, reissues)) = queue.pop() {
            self.orders += 1;
            let outcome = self.outcome(&ticket, reissues);
            if let Outcome::Fill(price) = outcome {
                self.fills += 1;
                let acc = self.day.as_mut().expect("day accumulator open");
                acc.txn += price.amount(ticket.shares);
            }
            let report = ExecutionReport { order_id: ticket.order_id, outcome, timestamp_ns: ts };
            let events = self.pm.on_execution(&report, self.engine.book())?;
            for ev in events {
                match ev {
                    PosEvent::Opened { .. } => {
                        self.day.as_mut().unwrap().opens += 1;
                    }
                    PosEvent::Reissue { ticket } => queue.push((ticket, reissues + 1)),
                    PosEvent::CloseConfirmed { pair, row } => {
                        let acc = self.day.as_mut().unwrap();
                        acc.pnl += row.realized_pnl;
                        acc.closes += 1;
                        self.engine.on_close_confirmed(pair, ts)?;
                    }
                }
            }
        }
        Ok(())
    }

    fn close_pass(&mut self, ts: i64, force: bool) -> Result<(), BackcastError> {
        for pair in self.pm.opened_pairs() {
            if self.pm.check_close(pair, self.engine.book(), force) {
                let tickets = self.pm.submit_close(pair, self.engine.book(), ts)?;
                self.resolve(tickets, ts)?;
            }
        }
        Ok(())
    }

    fn unwind_start_tod(&self) -> i64 {
        let cfg = self.engine.config();
        cfg.session_close_tod_ns - cfg.unwind_margin_ns
    }
}

pub fn run_backcast<R: BufRead>(
    feed: R,
    universe: Universe,
    sim: SimilarityMatrix<Real>,
    engine_cfg: EngineConfig,
    sb: SbParams<SbReal>,
    sim_cfg: &SimConfig,
) -> Result<BackcastResult, BackcastError> {
    let pos_cfg = PositionConfig {
        commission_rate: sim_cfg.commission_rate,
        close_margin: sim_cfg.close_margin,
    };
    let capital = sim_cfg.capital.unwrap_or_else(|| {
        Money::from_raw(
            engine_cfg
                .a_trans
                .raw()
                .checked_mul(engine_cfg.p_max as i64)
                .expect("capital overflow"),
        )
    });
    let engine = Engine::new(universe, sim, engine_cfg, sb, sim_cfg.seed);
    let mut rp = Replay {
        engine,
        pm: PositionManager::new(pos_cfg),
        fill_rng: XorshiftRng::from_seed_lossy(sim_cfg.seed.wrapping_mul(0x9E37_79B9).wrapping_add(0x1234_5677)),
        model: sim_cfg.fill_model,
        orders: 0,
        fills: 0,
        day: None,
        daily: Vec::new(),
        cum_txn: Money::ZERO,
        cum_pnl: Money::ZERO,
        sim_cfg,
    };
    let mut last_ts = i64::MIN;
    let mut events = 0u64;
    let mut latency_ns: Vec<u64> = Vec::new();
    for line in feed.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ev = parse_feed(&line)?;
        if ev.timestamp_ns < last_ts {
            return Err(BackcastError::NonMonotonic(ev.timestamp_ns));
        }
        last_ts = ev.timestamp_ns;
        events += 1;
        let day = ev.timestamp_ns.div_euclid(NS_PER_DAY);
        if rp.day.as_ref().map(|d| d.day) != Some(day) {
            if let Some(prev) = rp.day.as_ref().map(|d| d.day) {
                if !rp.pm.is_flat() {
                    return Err(BackcastError::NotFlatAtClose(prev));
                }
            }
            rp.roll_day(day);
        }
        let started = rp.sim_cfg.measure_latency.then(std::time::Instant::now);
        let delta = rp.engine.apply(&ev)?;
        match ev.kind {
            EventKind::Quote => {
                if rp.engine.book().is_complete() {
                    let tod = ev.timestamp_ns.rem_euclid(NS_PER_DAY);
                    let force = tod >= rp.unwind_start_tod();
                    rp.close_pass(ev.timestamp_ns, force)?;
                }
                let intents = rp.engine.decide(&ev, delta)?;
                for intent in intents {
                    let ts = intent.timestamp_ns;
                    let tickets = rp.pm.submit_open(&intent)?;
                    rp.resolve(tickets, ts)?;
                }
            }
            EventKind::SessionClose => {
                // final unwind: close everything still opened
                rp.close_pass(ev.timestamp_ns, true)?;
                if !rp.pm.is_flat() {
                    return Err(BackcastError::NotFlatAtClose(day));
                }
            }
            EventKind::SessionOpen => {}
        }
        if let Some(t0) = started {
            latency_ns.push(t0.elapsed().as_nanos() as u64);
        }
    }
    if rp.day.is_some() {
        if !rp.pm.is_flat() {
            return Err(BackcastError::NotFlatAtClose(rp.day.as_ref().unwrap().day));
        }
        rp.roll_day(i64::MAX); // flush the final accumulator
        rp.day = None;
    }
    let daily_pnl: Vec<Money> = rp.daily.iter().map(|d| d.realized_pnl).collect();
    let stats = performance_stats(&daily_pnl, capital, sim_cfg.trading_days_per_year).ok();
    Ok(BackcastResult {
        daily: rp.daily,
        ledger: rp.pm.ledger().to_vec(),
        decisions: rp.engine.drain_log(),
        stats,
        capital,
        orders_issued: rp.orders,
        orders_filled: rp.fills,
        events_processed: events,
        transitions: rp.pm.transition_log().to_vec(),
        latency_ns,
    })
}

pub fn write_daily_csv<W: Write>(w: &mut W, daily: &[DailyReport]) -> std::io::Result<()> {
    writeln!(w, "day,transaction_amount,realized_pnl,opens,closes,cum_transaction,cum_pnl")?;
    for d in daily {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            d.day, d.transaction_amount, d.realized_pnl, d.opens, d.closes, d.cum_transaction, d.cum_pnl
        )?;
    }
    Ok(())
}

pub fn write_decisions_csv<W: Write>(
    w: &mut W,
    decisions: &[crate::engine::DecisionRecord],
) -> std::io::Result<()> {
    writeln!(w, "{}", crate::engine::DecisionRecord::csv_header())?;
    for d in decisions {
        writeln!(w, "{}", d.to_csv())?;
    }
    Ok(())
}

pub fn write_ledger_csv<W: Write, F: Fn(usize) -> String>(
    w: &mut W,
    ledger: &[LedgerRow],
    label: F,
) -> std::io::Result<()> {
    writeln!(w, "{}", LedgerRow::csv_header())?;
    for row in ledger {
        writeln!(w, "{}", row.to_csv(&label))?;
    }
    Ok(())
}

pub fn write_latency_csv<W: Write>(w: &mut W, latency_ns: &[u64]) -> std::io::Result<()> {
    writeln!(w, "event_index,latency_ns")?;
    for (i, l) in latency_ns.iter().enumerate() {
        writeln!(w, "{i},{l}")?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Summary<'a> {
    capital: Money,
    events_processed: u64,
    orders_issued: u64,
    orders_filled: u64,
    fill_rate: f64,
    round_trips: usize,
    cumulative_transaction: Money,
    cumulative_pnl: Money,
    stats: &'a Option<PerfStats>,
}

pub fn write_summary_json<W: Write>(w: &mut W, res: &BackcastResult) -> std::io::Result<()> {
    let s = Summary {
        capital: res.capital,
        events_processed: res.events_processed,
        orders_issued: res.orders_issued,
        orders_filled: res.orders_filled,
        fill_rate: res.fill_rate(),
        round_trips: res.ledger.len(),
        cumulative_transaction: res.daily.last().map(|d| d.cum_transaction).unwrap_or(Money::ZERO),
        cumulative_pnl: res.daily.last().map(|d| d.cum_pnl).unwrap_or(Money::ZERO),
        stats: &res.stats,
    };
    serde_json::to_writer_pretty(&mut *w, &s)?;
    writeln!(w)
}
