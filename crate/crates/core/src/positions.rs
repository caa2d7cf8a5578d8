//! Per-pair position lifecycle.
//!
//! One state machine per pair:
//!   closed --T1(first open-leg report)--> opening
//!   opening --T2(still awaiting the other leg)--> opening
//!   opening --T3(both legs filled as intended)--> opened
//!   opening --T4(any lapse or off-price fill)--> closing
//!   opened  --T5(close decision: profit >= threshold, or forced unwind)--> closing
//!   closing --T6(leg outstanding; reissue on lapse)--> closing
//!   closing --T7(all legs flat)--> closed, close-confirmation emitted
//!
//! Accounting is exact: cash is credited on sells and debited on buys in
//! fixed-point currency; commission accrues per filled leg.

use std::collections::HashMap;

use thiserror::Error;

use crate::decimal::{Money, Price};
use crate::engine::{OrderIntent, Pair, Side};
use crate::feed::PriceBook;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PositionError {
    #[error("report references unknown order {0}")]
    OrphanReport(u64),
    #[error("pair ({0},{1}) already has a live position")]
    AlreadyLive(usize, usize),
    #[error("pair ({0},{1}) has no position in state {2}")]
    WrongState(usize, usize, &'static str),
}

pub type OrderId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PosState {
    Closed,
    Opening,
    Opened,
    Closing,
}

impl PosState {
    pub fn as_str(&self) -> &'static str {
        match self {
            PosState::Closed => "closed",
            PosState::Opening => "opening",
            PosState::Opened => "opened",
            PosState::Closing => "closing",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LegRole {
    OpenShort,
    OpenLong,
    CloseShort,
    CloseLong,
}

#[derive(Debug, Clone)]
pub struct OrderTicket {
    pub order_id: OrderId,
    pub pair: Pair,
    pub role: LegRole,
    pub stock: usize,
    pub side: Side,
    pub shares: u64,
    pub limit: Price,
    pub timestamp_ns: i64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    Fill(Price),
    Lapse,
}

#[derive(Debug, Clone)]
pub struct ExecutionReport {
    pub order_id: OrderId,
    pub outcome: Outcome,
    pub timestamp_ns: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LedgerRow {
    pub pair: Pair,
    pub open_ts: i64,
    pub close_ts: i64,
    /// Net open value: short-leg sell proceeds minus long-leg buy cost.
    pub open_profit_basis: Money,
    pub realized_pnl: Money,
    pub commission: Money,
}

impl LedgerRow {
    pub fn csv_header() -> &'static str {
        "pair,open_ts,close_ts,open_profit_basis,realized_pnl,commission"
    }

    pub fn to_csv<F: Fn(usize) -> String>(&self, label: F) -> String {
        format!(
            "{}/{},{},{},{},{},{}",
            label(self.pair.0),
            label(self.pair.1),
            self.open_ts,
            self.close_ts,
            self.open_profit_basis,
            self.realized_pnl,
            self.commission
        )
    }
}

#[derive(Debug, Clone)]
pub enum PosEvent {
    /// T3: both open legs filled as intended.
    Opened { pair: Pair },
    /// T6 on a lapsed close leg: a fresh order at the current price.
    Reissue { ticket: OrderTicket },
    /// T7: flat; the engine should refresh its tabu list.
    CloseConfirmed { pair: Pair, row: LedgerRow },
}

#[derive(Debug, Clone)]
struct OpenLeg {
    stock: usize,
    side: Side,
    shares: u64,
    intended: Price,
    fill: Option<Price>,
    reported: bool,
    unintended: bool,
}

#[derive(Debug, Clone)]
struct CloseLeg {
    stock: usize,
    side: Side,
    shares: u64,
    done: bool,
}

#[derive(Debug, Clone)]
struct Position {
    pair: Pair,
    state: PosState,
    open_ts: i64,
    short: OpenLeg,
    long: OpenLeg,
    close_legs: Vec<CloseLeg>,
    cash: Money,
    commission: Money,
    open_profit_basis: Money,
}

#[derive(Debug, Clone, Copy)]
pub struct PositionConfig {
    pub commission_rate: f64,
    /// Profit required beyond the commission-adjusted breakeven.
    pub close_margin: Money,
}

impl Default for PositionConfig {
    fn default() -> Self {
        PositionConfig { commission_rate: 0.0005, close_margin: Money::ZERO }
    }
}

#[derive(Debug, Clone, Copy)]
enum OrderRef {
    Open(Pair, LegRole),
    Close(Pair, usize),
}

#[derive(Debug, Default)]
pub struct PositionManager {
    cfg: PositionConfig,
    positions: HashMap<Pair, Position>,
    orders: HashMap<OrderId, OrderRef>,
    next_order: OrderId,
    ledger: Vec<LedgerRow>,
    transitions: Vec<u8>,
}

impl PositionManager {
    pub fn new(cfg: PositionConfig) -> PositionManager {
        PositionManager { cfg, ..Default::default() }
    }

    pub fn state(&self, pair: Pair) -> PosState {
        self.positions.get(&pair).map(|p| p.state).unwrap_or(PosState::Closed)
    }

    pub fn live_pairs(&self) -> Vec<Pair> {
        let mut v: Vec<Pair> = self.positions.keys().copied().collect();
        v.sort_unstable();
        v
    }

    pub fn opened_pairs(&self) -> Vec<Pair> {
        let mut v: Vec<Pair> = self
            .positions
            .values()
            .filter(|p| p.state == PosState::Opened)
            .map(|p| p.pair)
            .collect();
        v.sort_unstable();
        v
    }

    pub fn is_flat(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn ledger(&self) -> &[LedgerRow] {
        &self.ledger
    }

    /// T1..T7 transition numbers in firing order, for coverage checks.
    pub fn transition_log(&self) -> &[u8] {
        &self.transitions
    }

    pub fn n_orders_issued(&self) -> u64 {
        self.next_order
    }

    fn issue(&mut self, r: OrderRef) -> OrderId {
        let id = self.next_order;
        self.next_order += 1;
        self.orders.insert(id, r);
        id
    }

    /// Registers the open orders for a tradable pair; the machine stays in the
    /// closed state until the first execution report arrives (T1).
    pub fn submit_open(&mut self, intent: &OrderIntent) -> Result<Vec<OrderTicket>, PositionError> {
        let pair = intent.pair;
        if self.positions.contains_key(&pair) {
            return Err(PositionError::AlreadyLive(pair.0, pair.1));
        }
        let pos = Position {
            pair,
            state: PosState::Closed,
            open_ts: intent.timestamp_ns,
            short: OpenLeg {
                stock: intent.sell.stock,
                side: Side::Sell,
                shares: intent.sell.shares,
                intended: intent.sell.limit,
                fill: None,
                reported: false,
                unintended: false,
            },
            long: OpenLeg {
                stock: intent.buy.stock,
                side: Side::Buy,
                shares: intent.buy.shares,
                intended: intent.buy.limit,
                fill: None,
                reported: false,
                unintended: false,
            },
            close_legs: Vec::new(),
            cash: Money::ZERO,
            commission: Money::ZERO,
            open_profit_basis: Money::ZERO,
        };
        let mut tickets = Vec::new();
        for (role, leg) in [(LegRole::OpenShort, &pos.short), (LegRole::OpenLong, &pos.long)] {
            let id = self.issue(OrderRef::Open(pair, role));
            tickets.push(OrderTicket {
                order_id: id,
                pair,
                role,
                stock: leg.stock,
                side: leg.side,
                shares: leg.shares,
                limit: leg.intended,
                timestamp_ns: intent.timestamp_ns,
            });
        }
        self.positions.insert(pair, pos);
        Ok(tickets)
    }

    fn book_fill(cash: &mut Money, commission: &mut Money, rate: f64, side: Side, price: Price, shares: u64) {
        let amount = price.amount(shares);
        match side {
            Side::Sell => *cash += amount,
            Side::Buy => *cash -= amount,
        }
        *commission += amount.mul_rate(rate);
    }

    /// Mark-to-market profit of an opened position at the current book:
    /// short leg (open bid − current ask) + long leg (current bid − open ask),
    /// each times shares.
    pub fn mtm_profit(&self, pair: Pair, book: &PriceBook) -> Option<Money> {
        let pos = self.positions.get(&pair)?;
        if pos.state != PosState::Opened {
            return None;
        }
        let qs = book.quote(pos.short.stock)?;
        let ql = book.quote(pos.long.stock)?;
        let open_s = pos.short.fill.unwrap_or(pos.short.intended);
        let open_l = pos.long.fill.unwrap_or(pos.long.intended);
        let short_pnl = open_s.amount(pos.short.shares) - qs.ask.amount(pos.short.shares);
        let long_pnl = ql.bid.amount(pos.long.shares) - open_l.amount(pos.long.shares);
        Some(short_pnl + long_pnl)
    }

    /// Close decision for an opened pair: true when the mark-to-market profit
    /// covers commissions on all four legs plus the configured margin, or when
    /// `force` (end-of-day unwind) is set.
    pub fn check_close(&self, pair: Pair, book: &PriceBook, force: bool) -> bool {
        let Some(pos) = self.positions.get(&pair) else { return false };
        if pos.state != PosState::Opened {
            return false;
        }
        if force {
            return true;
        }
        let Some(profit) = self.mtm_profit(pair, book) else { return false };
        let (Some(qs), Some(ql)) = (book.quote(pos.short.stock), book.quote(pos.long.stock)) else {
            return false;
        };
        let open_s = pos.short.fill.unwrap_or(pos.short.intended);
        let open_l = pos.long.fill.unwrap_or(pos.long.intended);
        let turnover = open_s.amount(pos.short.shares)
            + open_l.amount(pos.long.shares)
            + qs.ask.amount(pos.short.shares)
            + ql.bid.amount(pos.long.shares);
        let threshold = turnover.mul_rate(self.cfg.commission_rate) + self.cfg.close_margin;
        profit >= threshold
    }

    /// T5: issue close orders at the current opposite side — buy back the short
    /// at the ask, sell the long at the bid.
    pub fn submit_close(
        &mut self,
        pair: Pair,
        book: &PriceBook,
        ts: i64,
    ) -> Result<Vec<OrderTicket>, PositionError> {
        let pos = self.positions.get(&pair).filter(|p| p.state == PosState::Opened);
        if pos.is_none() {
            return Err(PositionError::WrongState(pair.0, pair.1, "opened"));
        }
        self.transitions.push(5);
        let pos = self.positions.get_mut(&pair).unwrap();
        pos.state = PosState::Closing;
        let legs = vec![
            CloseLeg { stock: pos.short.stock, side: Side::Buy, shares: pos.short.shares, done: false },
            CloseLeg { stock: pos.long.stock, side: Side::Sell, shares: pos.long.shares, done: false },
        ];
        pos.close_legs = legs;
        self.issue_close_tickets(pair, book, ts)
    }

    fn issue_close_tickets(
        &mut self,
        pair: Pair,
        book: &PriceBook,
        ts: i64,
    ) -> Result<Vec<OrderTicket>, PositionError> {
        let legs: Vec<(usize, CloseLeg)> = {
            let pos = &self.positions[&pair];
            pos.close_legs
                .iter()
                .cloned()
                .enumerate()
                .filter(|(_, l)| !l.done)
                .collect()
        };
        let mut out = Vec::new();
        for (slot, leg) in legs {
            let q = book.quote(leg.stock).expect("book is complete during the session");
            let limit = match leg.side {
                Side::Buy => q.ask,
                Side::Sell => q.bid,
            };
            let id = self.issue(OrderRef::Close(pair, slot));
            out.push(OrderTicket {
                order_id: id,
                pair,
                role: if slot == 0 { LegRole::CloseShort } else { LegRole::CloseLong },
                stock: leg.stock,
                side: leg.side,
                shares: leg.shares,
                limit,
                timestamp_ns: ts,
            });
        }
        Ok(out)
    }

    /// Applies one execution report. The book is consulted only for reissuing
    /// lapsed close legs (T6) and unwinding a broken open (T4).
    pub fn on_execution(
        &mut self,
        report: &ExecutionReport,
        book: &PriceBook,
    ) -> Result<Vec<PosEvent>, PositionError> {
        let r = self
            .orders
            .remove(&report.order_id)
            .ok_or(PositionError::OrphanReport(report.order_id))?;
        match r {
            OrderRef::Open(pair, role) => self.open_leg_report(pair, role, report, book),
            OrderRef::Close(pair, slot) => self.close_leg_report(pair, slot, report, book),
        }
    }

    fn open_leg_report(
        &mut self,
        pair: Pair,
        role: LegRole,
        report: &ExecutionReport,
        book: &PriceBook,
    ) -> Result<Vec<PosEvent>, PositionError> {
        let rate = self.cfg.commission_rate;
        let pos = self.positions.get_mut(&pair).expect("order table is consistent");
        if pos.state == PosState::Closed {
            // T1: the first result starts the opening phase
            pos.state = PosState::Opening;
            self.transitions.push(1);
        }
        let pos = self.positions.get_mut(&pair).unwrap();
        let leg = match role {
            LegRole::OpenShort => &mut pos.short,
            LegRole::OpenLong => &mut pos.long,
            _ => unreachable!(),
        };
        leg.reported = true;
        match report.outcome {
            Outcome::Fill(price) => {
                leg.unintended = price != leg.intended;
                leg.fill = Some(price);
                let (side, shares) = (leg.side, leg.shares);
                Self::book_fill(&mut pos.cash, &mut pos.commission, rate, side, price, shares);
            }
            Outcome::Lapse => {
                leg.unintended = true;
            }
        }
        let both_reported = pos.short.reported && pos.long.reported;
        if !both_reported {
            // T2: waiting for the other leg
            self.transitions.push(2);
            return Ok(vec![]);
        }
        let pos = self.positions.get_mut(&pair).unwrap();
        if !pos.short.unintended && !pos.long.unintended {
            // T3
            pos.state = PosState::Opened;
            pos.open_profit_basis = pos.short.intended.amount(pos.short.shares)
                - pos.long.intended.amount(pos.long.shares);
            self.transitions.push(3);
            return Ok(vec![PosEvent::Opened { pair }]);
        }
        // T4: unwind whatever was actually acquired
        pos.state = PosState::Closing;
        let mut legs = Vec::new();
        for leg in [&pos.short, &pos.long] {
            if leg.fill.is_some() {
                let side = match leg.side {
                    Side::Sell => Side::Buy,
                    Side::Buy => Side::Sell,
                };
                legs.push(CloseLeg { stock: leg.stock, side, shares: leg.shares, done: false });
            }
        }
        pos.close_legs = legs;
        self.transitions.push(4);
        if self.positions[&pair].close_legs.is_empty() {
            return Ok(vec![self.finish_close(pair, report.timestamp_ns)]);
        }
        let tickets = self.issue_close_tickets(pair, book, report.timestamp_ns)?;
        Ok(tickets.into_iter().map(|t| PosEvent::Reissue { ticket: t }).collect())
    }

    fn close_leg_report(
        &mut self,
        pair: Pair,
        slot: usize,
        report: &ExecutionReport,
        book: &PriceBook,
    ) -> Result<Vec<PosEvent>, PositionError> {
        let rate = self.cfg.commission_rate;
        let pos = self.positions.get_mut(&pair).expect("order table is consistent");
        debug_assert_eq!(pos.state, PosState::Closing);
        match report.outcome {
            Outcome::Fill(price) => {
                let leg = &mut pos.close_legs[slot];
                leg.done = true;
                let (side, shares) = (leg.side, leg.shares);
                Self::book_fill(&mut pos.cash, &mut pos.commission, rate, side, price, shares);
            }
            Outcome::Lapse => {
                // T6: reorder the lapsed leg at the now-current price
                self.transitions.push(6);
                let q = book.quote(pos.close_legs[slot].stock).expect("book complete");
                let leg = pos.close_legs[slot].clone();
                let limit = match leg.side {
                    Side::Buy => q.ask,
                    Side::Sell => q.bid,
                };
                let id = self.issue(OrderRef::Close(pair, slot));
                return Ok(vec![PosEvent::Reissue {
                    ticket: OrderTicket {
                        order_id: id,
                        pair,
                        role: if slot == 0 { LegRole::CloseShort } else { LegRole::CloseLong },
                        stock: leg.stock,
                        side: leg.side,
                        shares: leg.shares,
                        limit,
                        timestamp_ns: report.timestamp_ns,
                    },
                }]);
            }
        }
        if self.positions[&pair].close_legs.iter().all(|l| l.done) {
            Ok(vec![self.finish_close(pair, report.timestamp_ns)])
        } else {
            // T6: the other leg is still outstanding
            self.transitions.push(6);
            Ok(vec![])
        }
    }

    fn finish_close(&mut self, pair: Pair, ts: i64) -> PosEvent {
        // T7
        self.transitions.push(7);
        let pos = self.positions.remove(&pair).unwrap();
        let row = LedgerRow {
            pair,
            open_ts: pos.open_ts,
            close_ts: ts,
            open_profit_basis: pos.open_profit_basis,
            realized_pnl: pos.cash - pos.commission,
            commission: pos.commission,
        };
        self.ledger.push(row);
        PosEvent::CloseConfirmed { pair, row }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::OrderLeg;
    use crate::feed::{parse_feed, Universe};

    fn universe() -> Universe {
        Universe::new(vec![
            ("S".into(), 100, Price::from_units(1000)),
            ("L".into(), 100, Price::from_units(1000)),
        ])
        .unwrap()
    }

    fn book_at(u: &Universe, s_bid: i64, s_ask: i64, l_bid: i64, l_ask: i64) -> PriceBook {
        let mut b = PriceBook::new(u);
        b.apply_event(u, &parse_feed(&format!("1,S,{s_bid},{s_ask},Q")).unwrap()).unwrap();
        b.apply_event(u, &parse_feed(&format!("1,L,{l_bid},{l_ask},Q")).unwrap()).unwrap();
        b
    }

    fn intent(sell_limit: i64, buy_limit: i64) -> OrderIntent {
        OrderIntent {
            pair: (1, 2),
            sell: OrderLeg {
                stock: 1,
                side: Side::Sell,
                lots: 1,
                shares: 100,
                limit: Price::from_units(sell_limit),
            },
            buy: OrderLeg {
                stock: 2,
                side: Side::Buy,
                lots: 1,
                shares: 100,
                limit: Price::from_units(buy_limit),
            },
            timestamp_ns: 10,
        }
    }

    fn fill(id: OrderId, price: i64, ts: i64) -> ExecutionReport {
        ExecutionReport { order_id: id, outcome: Outcome::Fill(Price::from_units(price)), timestamp_ns: ts }
    }

    fn lapse(id: OrderId, ts: i64) -> ExecutionReport {
        ExecutionReport { order_id: id, outcome: Outcome::Lapse, timestamp_ns: ts }
    }

    #[test]
    fn intended_round_trip_t1_t2_t3_t5_t6_t7() {
        let u = universe();
        let mut pm = PositionManager::new(PositionConfig { commission_rate: 0.0, close_margin: Money::ZERO });
        let book = book_at(&u, 1010, 1011, 990, 991);
        let tickets = pm.submit_open(&intent(1010, 991)).unwrap();
        assert_eq!(pm.state((1, 2)), PosState::Closed);
        pm.on_execution(&fill(tickets[0].order_id, 1010, 11), &book).unwrap();
        assert_eq!(pm.state((1, 2)), PosState::Opening);
        let evs = pm.on_execution(&fill(tickets[1].order_id, 991, 12), &book).unwrap();
        assert!(matches!(evs[0], PosEvent::Opened { pair: (1, 2) }));
        assert_eq!(pm.state((1, 2)), PosState::Opened);

        // spread reconverges: short buy-back at 1000, long sells at 1000
        let book2 = book_at(&u, 1000, 1000, 1000, 1000);
        assert!(pm.check_close((1, 2), &book2, false));
        let close = pm.submit_close((1, 2), &book2, 20).unwrap();
        assert_eq!(close.len(), 2);
        pm.on_execution(&fill(close[0].order_id, 1000, 21), &book2).unwrap();
        assert_eq!(pm.state((1, 2)), PosState::Closing);
        let evs = pm.on_execution(&fill(close[1].order_id, 1000, 22), &book2).unwrap();
        let PosEvent::CloseConfirmed { row, .. } = &evs[0] else { panic!("expected close") };
        // (1010-1000)*100 + (1000-991)*100 = 1900
        assert_eq!(row.realized_pnl, Money::from_units(1900));
        assert_eq!(row.commission, Money::ZERO);
        assert!(pm.is_flat());
        assert_eq!(pm.transition_log(), &[1, 2, 3, 5, 6, 7]);
    }

    #[test]
    fn commission_accrues_on_every_leg() {
        let u = universe();
        let mut pm = PositionManager::new(PositionConfig { commission_rate: 0.001, close_margin: Money::ZERO });
        let book = book_at(&u, 1010, 1011, 990, 991);
        let t = pm.submit_open(&intent(1010, 991)).unwrap();
        pm.on_execution(&fill(t[0].order_id, 1010, 11), &book).unwrap();
        pm.on_execution(&fill(t[1].order_id, 991, 12), &book).unwrap();
        let book2 = book_at(&u, 1000, 1000, 1000, 1000);
        let close = pm.submit_close((1, 2), &book2, 20).unwrap();
        pm.on_execution(&fill(close[0].order_id, 1000, 21), &book2).unwrap();
        let evs = pm.on_execution(&fill(close[1].order_id, 1000, 22), &book2).unwrap();
        let PosEvent::CloseConfirmed { row, .. } = &evs[0] else { panic!() };
        // turnover = (1010 + 991 + 1000 + 1000) * 100 = 400100; commission 400.1
        assert_eq!(row.commission, Money::from_raw(400_100_000));
        assert_eq!(row.realized_pnl, Money::from_units(1900) - row.commission);
    }

    #[test]
    fn open_lapse_unwinds_only_the_filled_leg_t4() {
        let u = universe();
        let mut pm = PositionManager::new(PositionConfig { commission_rate: 0.0, close_margin: Money::ZERO });
        let book = book_at(&u, 1010, 1011, 990, 991);
        let t = pm.submit_open(&intent(1010, 991)).unwrap();
        pm.on_execution(&fill(t[0].order_id, 1010, 11), &book).unwrap();
        let evs = pm.on_execution(&lapse(t[1].order_id, 12), &book).unwrap();
        assert_eq!(pm.state((1, 2)), PosState::Closing);
        let reissued: Vec<&OrderTicket> = evs
            .iter()
            .filter_map(|e| match e {
                PosEvent::Reissue { ticket } => Some(ticket),
                _ => None,
            })
            .collect();
        assert_eq!(reissued.len(), 1);
        assert_eq!(reissued[0].stock, 1);
        assert_eq!(reissued[0].side, Side::Buy);
        assert_eq!(reissued[0].limit, Price::from_units(1011)); // buy back at current ask
        let evs = pm.on_execution(&fill(reissued[0].order_id, 1011, 13), &book).unwrap();
        let PosEvent::CloseConfirmed { row, .. } = &evs[0] else { panic!() };
        assert_eq!(row.realized_pnl, Money::from_units(-100)); // sold 1010, bought back 1011
        assert!(pm.transition_log().contains(&4));
    }

    #[test]
    fn both_open_legs_lapse_goes_straight_back_to_closed() {
        let u = universe();
        let mut pm = PositionManager::new(PositionConfig::default());
        let book = book_at(&u, 1010, 1011, 990, 991);
        let t = pm.submit_open(&intent(1010, 991)).unwrap();
        pm.on_execution(&lapse(t[0].order_id, 11), &book).unwrap();
        let evs = pm.on_execution(&lapse(t[1].order_id, 12), &book).unwrap();
        let PosEvent::CloseConfirmed { row, .. } = &evs[0] else { panic!() };
        assert_eq!(row.realized_pnl, Money::ZERO);
        assert!(pm.is_flat());
    }

    #[test]
    fn close_leg_lapse_reissues_at_current_price_t6() {
        let u = universe();
        let mut pm = PositionManager::new(PositionConfig { commission_rate: 0.0, close_margin: Money::ZERO });
        let book = book_at(&u, 1010, 1011, 990, 991);
        let t = pm.submit_open(&intent(1010, 991)).unwrap();
        pm.on_execution(&fill(t[0].order_id, 1010, 11), &book).unwrap();
        pm.on_execution(&fill(t[1].order_id, 991, 12), &book).unwrap();
        let book2 = book_at(&u, 1000, 1001, 999, 1000);
        let close = pm.submit_close((1, 2), &book2, 20).unwrap();
        // long-side sell lapses, price moves, reissue picks up the new bid
        let book3 = book_at(&u, 1000, 1001, 998, 999);
        let evs = pm.on_execution(&lapse(close[1].order_id, 21), &book3).unwrap();
        let PosEvent::Reissue { ticket } = &evs[0] else { panic!() };
        assert_eq!(ticket.limit, Price::from_units(998));
        pm.on_execution(&fill(close[0].order_id, 1001, 22), &book3).unwrap();
        let evs = pm.on_execution(&fill(ticket.order_id, 998, 23), &book3).unwrap();
        assert!(matches!(evs[0], PosEvent::CloseConfirmed { .. }));
        assert!(pm.is_flat());
    }

    #[test]
    fn forced_close_ignores_profit() {
        let u = universe();
        let mut pm = PositionManager::new(PositionConfig::default());
        let book = book_at(&u, 1010, 1011, 990, 991);
        let t = pm.submit_open(&intent(1010, 991)).unwrap();
        pm.on_execution(&fill(t[0].order_id, 1010, 11), &book).unwrap();
        pm.on_execution(&fill(t[1].order_id, 991, 12), &book).unwrap();
        // spread unchanged: mark-to-market is a loss (pay both spreads)
        assert!(!pm.check_close((1, 2), &book, false));
        assert!(pm.check_close((1, 2), &book, true));
    }

    #[test]
    fn uptrend_with_narrowing_spread_still_closes() {
        let u = universe();
        let mut pm = PositionManager::new(PositionConfig { commission_rate: 0.0, close_margin: Money::ZERO });
        let book = book_at(&u, 1010, 1011, 990, 991);
        let t = pm.submit_open(&intent(1010, 991)).unwrap();
        pm.on_execution(&fill(t[0].order_id, 1010, 11), &book).unwrap();
        pm.on_execution(&fill(t[1].order_id, 991, 12), &book).unwrap();
        // both prices up, but the long gained more than the short lost
        let book2 = book_at(&u, 1014, 1015, 1010, 1011);
        let mtm = pm.mtm_profit((1, 2), &book2).unwrap();
        // short: (1010-1015)*100 = -500; long: (1010-991)*100 = +1900
        assert_eq!(mtm, Money::from_units(1400));
        assert!(pm.check_close((1, 2), &book2, false));
    }

    #[test]
    fn orphan_and_duplicate_guards() {
        let u = universe();
        let mut pm = PositionManager::new(PositionConfig::default());
        let book = book_at(&u, 1010, 1011, 990, 991);
        assert_eq!(
            pm.on_execution(&fill(99, 1000, 1), &book).unwrap_err(),
            PositionError::OrphanReport(99)
        );
        pm.submit_open(&intent(1010, 991)).unwrap();
        assert_eq!(
            pm.submit_open(&intent(1010, 991)).unwrap_err(),
            PositionError::AlreadyLive(1, 2)
        );
        assert_eq!(
            pm.submit_close((1, 2), &book, 5).unwrap_err(),
            PositionError::WrongState(1, 2, "opened")
        );
    }

    #[test]
    fn report_cannot_be_consumed_twice() {
        let u = universe();
        let mut pm = PositionManager::new(PositionConfig::default());
        let book = book_at(&u, 1010, 1011, 990, 991);
        let t = pm.submit_open(&intent(1010, 991)).unwrap();
        pm.on_execution(&fill(t[0].order_id, 1010, 11), &book).unwrap();
        assert!(matches!(
            pm.on_execution(&fill(t[0].order_id, 1010, 11), &book),
            Err(PositionError::OrphanReport(_))
        ));
    }
}
