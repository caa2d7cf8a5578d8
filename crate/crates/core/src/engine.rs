//! Event-driven decision pipeline: preprocessing, consecutive solver executions,
//! tabu/open-list registration, judgment and order emission.
//!
//! Registration semantics per decision run:
//!   - an ineffective run (no tradable verified cycle) leaves both lists unchanged
//!     and ends the consecutive loop;
//!   - a tradable run registers its pair in the tabu list before judgment;
//!   - judgment rejection (position cap, cutoff, kill switch) leaves the open list
//!     unchanged — the tabu over-registration is cleaned up by the next refresh;
//!   - a confirmed close schedules a tabu refresh: at the start of the next solver
//!     execution the tabu list becomes a copy of the open list.

use thiserror::Error;

use crate::decimal::Money;
use crate::feed::{ApplyDelta, EventKind, FeedEvent, FeedError, PriceBook, StockRef, Universe};
use crate::marketgraph::{build_graph, GraphError, MarketGraph, SimilarityMatrix};
use crate::qubo::{default_penalty_weight, QuboProblem, TabuList};
use crate::sbm::{decode_state, init_state, sb_run, SbError, SbParams, SpinForce, StructuredInteraction, XorshiftRng};
use crate::verify::{decode, evaluate, CyclePath};
use crate::{Real, SbReal};

pub const NS_PER_DAY: i64 = 86_400_000_000_000;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Feed(#[from] FeedError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Solver(#[from] SbError),
    #[error("pair ({0},{1}) is not in the open list")]
    UnknownPair(usize, usize),
}

/// Pair of graph node ids: (short, long).
pub type Pair = (usize, usize);

#[derive(Debug, Clone, Default)]
pub struct OpenList {
    entries: Vec<(Pair, i64)>,
}

impl OpenList {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, pair: Pair) -> bool {
        self.entries.iter().any(|(p, _)| *p == pair)
    }

    pub fn insert(&mut self, pair: Pair, ts: i64) {
        debug_assert!(!self.contains(pair), "duplicate open pair");
        self.entries.push((pair, ts));
    }

    pub fn remove(&mut self, pair: Pair) -> bool {
        let before = self.entries.len();
        self.entries.retain(|(p, _)| *p != pair);
        self.entries.len() != before
    }

    pub fn pairs(&self) -> Vec<Pair> {
        self.entries.iter().map(|(p, _)| *p).collect()
    }

    pub fn to_tabu(&self, n_nodes: usize) -> TabuList {
        let mut t = TabuList::new(n_nodes);
        for ((short, long), _) in &self.entries {
            t.register_pair(*short, *long);
        }
        t
    }
}

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub p_max: usize,
    pub a_trans: Money,
    pub threshold: Real,
    pub restarts_per_event: u32,
    pub max_runs_per_event: u32,
    /// m_c coefficient; m_p is auto-derived per graph unless `m_p` is set.
    pub m_c: Real,
    pub m_p: Option<Real>,
    /// Trading window as time of day, nanoseconds since midnight.
    pub session_open_tod_ns: i64,
    pub session_close_tod_ns: i64,
    /// No new opens at or after this time of day.
    pub no_open_cutoff_tod_ns: i64,
    /// Forced unwind starts this long before session close.
    pub unwind_margin_ns: i64,
    pub clamp_lots: bool,
    pub kill_switch: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        let session_close_tod_ns = NS_PER_DAY;
        let unwind_margin_ns = 300_000_000_000; // 5 minutes
        EngineConfig {
            p_max: 16,
            a_trans: Money::from_units(1_500_000),
            threshold: -0.002,
            restarts_per_event: 1,
            max_runs_per_event: 32,
            m_c: 1.0,
            m_p: None,
            session_open_tod_ns: 0,
            session_close_tod_ns,
            no_open_cutoff_tod_ns: session_close_tod_ns - unwind_margin_ns,
            unwind_margin_ns,
            clamp_lots: false,
            kill_switch: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Sell,
    Buy,
}

impl Side {
    pub fn as_str(&self) -> &'static str {
        match self {
            Side::Sell => "sell",
            Side::Buy => "buy",
        }
    }
}

#[derive(Debug, Clone)]
pub struct OrderLeg {
    pub stock: usize,
    pub side: Side,
    pub lots: u64,
    pub shares: u64,
    pub limit: crate::decimal::Price,
}

/// Simultaneous short/long legs at the bid/ask used in the decision graph.
#[derive(Debug, Clone)]
pub struct OrderIntent {
    pub pair: Pair,
    pub sell: OrderLeg,
    pub buy: OrderLeg,
    pub timestamp_ns: i64,
}

/// L = round(A_trans / (S_min * p_base)), half away from zero; a zero result is
/// clamped to one lot and flagged.
pub fn lot_size(stock: &StockRef, a_trans: Money) -> (u64, bool) {
    let num = a_trans.raw() as i128;
    let den = stock.min_lot_shares as i128 * stock.base_price.raw() as i128;
    let lots = ((2 * num + den) / (2 * den)) as u64;
    if lots == 0 {
        (1, true)
    } else {
        (lots, false)
    }
}

#[derive(Debug, Clone)]
pub struct DecisionRecord {
    pub timestamp_ns: i64,
    pub event: String,
    pub short_code: String,
    pub long_code: String,
    pub path: String,
    pub weight_sum: Option<Real>,
    pub verdict: String,
    pub action: String,
}

impl DecisionRecord {
    pub fn csv_header() -> &'static str {
        "timestamp_ns,event,short_code,long_code,path,weight_sum,verdict,action"
    }

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.timestamp_ns,
            self.event,
            self.short_code,
            self.long_code,
            self.path,
            self.weight_sum.map(|w| format!("{w:.9}")).unwrap_or_default(),
            self.verdict,
            self.action
        )
    }
}

/// Best verified cycle over a batch of solver restarts, plus the lowest raw
/// energy seen. Each restart's decoded assignment is verified individually, the
/// way the hardware pipeline verifies each run.
pub fn search_best_cycle(
    problem: &QuboProblem<Real>,
    params: &SbParams<SbReal>,
    rng: &mut XorshiftRng,
    restarts: u32,
) -> Result<(Option<(CyclePath, Real)>, Real), SbError> {
    let force = StructuredInteraction::<SbReal>::new_preconditioned(problem);
    params.validate(force.n_vars())?;
    let n_nodes = problem.n_nodes();
    let mut best_cycle: Option<(CyclePath, Real)> = None;
    let mut best_energy = Real::INFINITY;
    for _ in 0..restarts {
        let state = init_state(rng, force.n_vars());
        let bits = decode_state(&sb_run(&force, params, state));
        let x = crate::qubo::EdgeVars::from_var_bits(n_nodes, &bits);
        let e = problem.eval_total(&x).expect("dimensions match");
        best_energy = best_energy.min(e);
        if let Ok(path) = decode(&x) {
            // structural validity is not enough: the tabu penalty term must be
            // clear as well, so only zero-penalty assignments compete
            if problem.eval_penalty(&x).expect("dimensions match") != 0.0 {
                continue;
            }
            let w = path.weight_sum(&problem.graph);
            match &best_cycle {
                Some((_, bw)) if *bw <= w => {}
                _ => best_cycle = Some((path, w)),
            }
        }
    }
    Ok((best_cycle, best_energy))
}

pub struct Engine {
    universe: Universe,
    book: PriceBook,
    sim: SimilarityMatrix<Real>,
    cfg: EngineConfig,
    sb: SbParams<SbReal>,
    rng: XorshiftRng,
    tabu: TabuList,
    open: OpenList,
    refresh_pending: bool,
    log: Vec<DecisionRecord>,
}

impl Engine {
    pub fn new(
        universe: Universe,
        sim: SimilarityMatrix<Real>,
        cfg: EngineConfig,
        sb: SbParams<SbReal>,
        seed: u32,
    ) -> Engine {
        let n_nodes = universe.n() + 1;
        let book = PriceBook::new(&universe);
        Engine {
            universe,
            book,
            sim,
            cfg,
            sb,
            rng: XorshiftRng::from_seed_lossy(seed),
            tabu: TabuList::new(n_nodes),
            open: OpenList::default(),
            refresh_pending: false,
            log: Vec::new(),
        }
    }

    pub fn universe(&self) -> &Universe {
        &self.universe
    }

    pub fn book(&self) -> &PriceBook {
        &self.book
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn tabu(&self) -> &TabuList {
        &self.tabu
    }

    pub fn open_list(&self) -> &OpenList {
        &self.open
    }

    pub fn decision_log(&self) -> &[DecisionRecord] {
        &self.log
    }

    pub fn drain_log(&mut self) -> Vec<DecisionRecord> {
        std::mem::take(&mut self.log)
    }

    pub fn set_kill_switch(&mut self, on: bool) {
        self.cfg.kill_switch = on;
    }

    fn tod(ts: i64) -> i64 {
        ts.rem_euclid(NS_PER_DAY)
    }

    fn in_window(&self, ts: i64) -> bool {
        let tod = Self::tod(ts);
        tod >= self.cfg.session_open_tod_ns && tod < self.cfg.session_close_tod_ns
    }

    fn record(
        &mut self,
        ts: i64,
        event: &str,
        cycle: Option<&CyclePath>,
        weight_sum: Option<Real>,
        verdict: &str,
        action: &str,
    ) {
        let (short_code, long_code, path) = match cycle {
            Some(p) => (
                self.universe.code(p.short()).to_string(),
                self.universe.code(p.long()).to_string(),
                p.notation(|v| self.universe.code(v).to_string()),
            ),
            None => (String::new(), String::new(), String::new()),
        };
        self.log.push(DecisionRecord {
            timestamp_ns: ts,
            event: event.to_string(),
            short_code,
            long_code,
            path,
            weight_sum,
            verdict: verdict.to_string(),
            action: action.to_string(),
        });
    }

    /// Book update only; decision-making is a separate phase so callers can run
    /// close checks against the fresh book before any new opens.
    pub fn apply(&mut self, ev: &FeedEvent) -> Result<ApplyDelta, EngineError> {
        Ok(self.book.apply_event(&self.universe, ev)?)
    }

    /// Decision phase for an applied event: gates on event kind, trading window,
    /// quote change and book completeness, then runs the consecutive loop.
    pub fn decide(&mut self, ev: &FeedEvent, delta: ApplyDelta) -> Result<Vec<OrderIntent>, EngineError> {
        if ev.kind != EventKind::Quote {
            return Ok(Vec::new());
        }
        if !self.in_window(ev.timestamp_ns) {
            self.record(ev.timestamp_ns, "feed", None, None, "out-of-window", "ignored");
            return Ok(Vec::new());
        }
        if !delta.changed || !self.book.is_complete() {
            return Ok(Vec::new());
        }
        self.consecutive_loop(ev.timestamp_ns)
    }

    /// Feed entry point: updates the book, then (for in-window quote changes with a
    /// complete book) runs the consecutive decision loop.
    pub fn on_feed(&mut self, ev: &FeedEvent) -> Result<Vec<OrderIntent>, EngineError> {
        let delta = self.apply(ev)?;
        self.decide(ev, delta)
    }

    /// A confirmed close frees its open-list slot and schedules a tabu refresh for
    /// the start of the next solver execution.
    pub fn on_close_confirmed(&mut self, pair: Pair, ts: i64) -> Result<(), EngineError> {
        if !self.open.remove(pair) {
            return Err(EngineError::UnknownPair(pair.0, pair.1));
        }
        self.refresh_pending = true;
        let cycle = CyclePath::new(vec![pair.0, pair.1]);
        self.record(ts, "close_confirm", Some(&cycle), None, "", "refresh_scheduled");
        Ok(())
    }

    fn build_problem(&self, graph: MarketGraph<Real>) -> QuboProblem<Real> {
        let m_p = self.cfg.m_p.unwrap_or_else(|| default_penalty_weight(&graph));
        QuboProblem::new(graph, self.tabu.clone(), self.cfg.m_c, m_p)
    }

    fn make_intent(&self, pair: Pair, ts: i64) -> OrderIntent {
        let short = self.universe.get(pair.0).unwrap();
        let long = self.universe.get(pair.1).unwrap();
        let (lots_s, clamp_s) = lot_size(short, self.cfg.a_trans);
        let (lots_l, clamp_l) = lot_size(long, self.cfg.a_trans);
        if clamp_s || clamp_l {
            log::warn!("lot size clamped to 1 for pair ({},{})", short.code, long.code);
        }
        let qs = self.book.quote(pair.0).unwrap();
        let ql = self.book.quote(pair.1).unwrap();
        OrderIntent {
            pair,
            sell: OrderLeg {
                stock: pair.0,
                side: Side::Sell,
                lots: lots_s,
                shares: lots_s * short.min_lot_shares,
                limit: qs.bid,
            },
            buy: OrderLeg {
                stock: pair.1,
                side: Side::Buy,
                lots: lots_l,
                shares: lots_l * long.min_lot_shares,
                limit: ql.ask,
            },
            timestamp_ns: ts,
        }
    }

    fn consecutive_loop(&mut self, ts: i64) -> Result<Vec<OrderIntent>, EngineError> {
        let graph = build_graph(&self.book, &self.sim)?;
        let mut intents = Vec::new();
        for _run in 0..self.cfg.max_runs_per_event {
            if self.refresh_pending {
                self.tabu = self.open.to_tabu(self.universe.n() + 1);
                self.refresh_pending = false;
                self.record(ts, "refresh", None, None, "", "tabu_copied_from_open_list");
            }
            let problem = self.build_problem(graph.clone());
            let (best, _energy) =
                search_best_cycle(&problem, &self.sb, &mut self.rng, self.cfg.restarts_per_event)?;
            let Some((path, _)) = best else {
                // Event 4: ineffective run, lists unchanged
                self.record(ts, "run", None, None, "invalid", "none");
                break;
            };
            let verdict = evaluate(&path, &graph, &self.tabu, self.cfg.threshold);
            let w = verdict.weight_sum();
            if !verdict.is_tradable() {
                self.record(ts, "run", Some(&path), Some(w), "below-threshold", "none");
                break;
            }
            let pair = path.pair();
            // registration happens regardless of the judgment outcome
            self.tabu.register_pair(pair.0, pair.1);
            let full = self.open.len() >= self.cfg.p_max;
            let rejected = full
                || self.open.contains(pair)
                || self.cfg.kill_switch
                || Self::tod(ts) >= self.cfg.no_open_cutoff_tod_ns;
            if rejected {
                // Event 5: tabu updated, open list untouched
                self.record(ts, "run", Some(&path), Some(w), "tradable", "tabu_only");
                if full {
                    break;
                }
                continue;
            }
            self.open.insert(pair, ts);
            let intent = self.make_intent(pair, ts);
            self.record(ts, "run", Some(&path), Some(w), "tradable", "open");
            intents.push(intent);
        }
        Ok(intents)
    }
}
