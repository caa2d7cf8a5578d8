//! Market-feed parsing and the per-stock price book.
//!
//! Feed files are UTF-8 CSV, one record per line:
//! `timestamp_ns,stock_code,bid,ask,kind` with kind `Q` (quote update),
//! `O` (session open; the bid field carries the day's base price) or
//! `C` (session close). The universe config is CSV
//! `stock_code,min_lot_shares,base_price`.

use std::collections::HashMap;
use std::io::BufRead;

use thiserror::Error;

use crate::decimal::{DecimalError, Price};

#[derive(Debug, Error)]
pub enum FeedError {
    #[error("malformed record: {0}")]
    MalformedRecord(String),
    #[error("unknown stock {0:?}")]
    UnknownStock(String),
    #[error("duplicate stock code {0:?} in universe")]
    DuplicateStock(String),
    #[error("invalid universe entry for {code:?}: {reason}")]
    BadUniverseEntry { code: String, reason: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// One tradable instrument. `index` is the 1-based node id in the market graph
/// (node 0 is the dummy).
#[derive(Debug, Clone)]
pub struct StockRef {
    pub index: usize,
    pub code: String,
    pub min_lot_shares: u64,
    pub base_price: Price,
}

#[derive(Debug, Clone, Default)]
pub struct Universe {
    stocks: Vec<StockRef>,
    by_code: HashMap<String, usize>,
}

impl Universe {
    pub fn new(entries: Vec<(String, u64, Price)>) -> Result<Universe, FeedError> {
        let mut u = Universe::default();
        for (code, min_lot_shares, base_price) in entries {
            u.push(code, min_lot_shares, base_price)?;
        }
        Ok(u)
    }

    fn push(&mut self, code: String, min_lot_shares: u64, base_price: Price) -> Result<(), FeedError> {
        if min_lot_shares == 0 {
            return Err(FeedError::BadUniverseEntry {
                code,
                reason: "min_lot_shares must be >= 1".into(),
            });
        }
        if base_price.raw() <= 0 {
            return Err(FeedError::BadUniverseEntry {
                code,
                reason: "base_price must be > 0".into(),
            });
        }
        if self.by_code.contains_key(&code) {
            return Err(FeedError::DuplicateStock(code));
        }
        let index = self.stocks.len() + 1;
        self.by_code.insert(code.clone(), index);
        self.stocks.push(StockRef { index, code, min_lot_shares, base_price });
        Ok(())
    }

    /// Parse the universe CSV. A header line is skipped if present.
    pub fn from_reader<R: BufRead>(r: R) -> Result<Universe, FeedError> {
        let mut u = Universe::default();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            if lineno == 0 && t.starts_with("stock_code") {
                continue;
            }
            let fields: Vec<&str> = t.split(',').collect();
            if fields.len() != 3 {
                return Err(FeedError::MalformedRecord(line.clone()));
            }
            let min_lot: u64 = fields[1]
                .trim()
                .parse()
                .map_err(|_| FeedError::MalformedRecord(line.clone()))?;
            let base = Price::parse(fields[2]).map_err(|_| FeedError::MalformedRecord(line.clone()))?;
            u.push(fields[0].trim().to_string(), min_lot, base)?;
        }
        Ok(u)
    }

    pub fn n(&self) -> usize {
        self.stocks.len()
    }

    pub fn get(&self, index: usize) -> Option<&StockRef> {
        self.stocks.get(index.checked_sub(1)?)
    }

    pub fn index_of(&self, code: &str) -> Option<usize> {
        self.by_code.get(code).copied()
    }

    pub fn code(&self, index: usize) -> &str {
        &self.stocks[index - 1].code
    }

    pub fn iter(&self) -> impl Iterator<Item = &StockRef> {
        self.stocks.iter()
    }

    /// Drop entries (used by the CLI to exclude zero-lot stocks); reassigns indices.
    pub fn retain<F: FnMut(&StockRef) -> bool>(&mut self, mut f: F) {
        let kept: Vec<StockRef> = self.stocks.drain(..).filter(|s| f(s)).collect();
        self.by_code.clear();
        for (i, mut s) in kept.into_iter().enumerate() {
            s.index = i + 1;
            self.by_code.insert(s.code.clone(), s.index);
            self.stocks.push(s);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Quote,
    SessionOpen,
    SessionClose,
}

#[derive(Debug, Clone)]
pub struct FeedEvent {
    pub timestamp_ns: i64,
    pub code: String,
    pub bid: Price,
    pub ask: Price,
    pub kind: EventKind,
}

/// Parse one feed record. Rejects bad field counts, non-numeric or negative prices.
pub fn parse_feed(line: &str) -> Result<FeedEvent, FeedError> {
    let fields: Vec<&str> = line.trim().split(',').collect();
    if fields.len() != 5 {
        return Err(FeedError::MalformedRecord(line.to_string()));
    }
    let timestamp_ns: i64 = fields[0]
        .trim()
        .parse()
        .map_err(|_| FeedError::MalformedRecord(line.to_string()))?;
    let price = |s: &str| -> Result<Price, DecimalError> { Price::parse(s) };
    let bid = price(fields[2]).map_err(|_| FeedError::MalformedRecord(line.to_string()))?;
    let ask = price(fields[3]).map_err(|_| FeedError::MalformedRecord(line.to_string()))?;
    if bid.is_negative() || ask.is_negative() {
        return Err(FeedError::MalformedRecord(line.to_string()));
    }
    let kind = match fields[4].trim() {
        "Q" => EventKind::Quote,
        "O" => EventKind::SessionOpen,
        "C" => EventKind::SessionClose,
        _ => return Err(FeedError::MalformedRecord(line.to_string())),
    };
    Ok(FeedEvent { timestamp_ns, code: fields[1].trim().to_string(), bid, ask, kind })
}

/// Best bid/ask for one stock, raw and normalized by the day's base price.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quote {
    pub bid: Price,
    pub ask: Price,
    pub norm_bid: f64,
    pub norm_ask: f64,
    /// bid >= ask. Kept in the book; such states are mispricing signals.
    pub crossed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ApplyDelta {
    /// Whether bid or ask actually changed.
    pub changed: bool,
}

/// Latest quote per stock; single writer, snapshots are plain clones.
#[derive(Debug, Clone)]
pub struct PriceBook {
    quotes: Vec<Option<Quote>>,
    base: Vec<Price>,
}

impl PriceBook {
    pub fn new(universe: &Universe) -> PriceBook {
        PriceBook {
            quotes: vec![None; universe.n()],
            base: universe.iter().map(|s| s.base_price).collect(),
        }
    }

    fn make_quote(&self, idx: usize, bid: Price, ask: Price) -> Quote {
        let base = self.base[idx - 1].raw() as f64;
        Quote {
            bid,
            ask,
            norm_bid: bid.raw() as f64 / base,
            norm_ask: ask.raw() as f64 / base,
            crossed: bid >= ask,
        }
    }

    /// Apply one event; returns whether the book changed.
    pub fn apply_event(&mut self, universe: &Universe, ev: &FeedEvent) -> Result<ApplyDelta, FeedError> {
        let idx = universe
            .index_of(&ev.code)
            .ok_or_else(|| FeedError::UnknownStock(ev.code.clone()))?;
        match ev.kind {
            EventKind::Quote => {
                let q = self.make_quote(idx, ev.bid, ev.ask);
                let changed = match &self.quotes[idx - 1] {
                    Some(prev) => prev.bid != q.bid || prev.ask != q.ask,
                    None => true,
                };
                self.quotes[idx - 1] = Some(q);
                Ok(ApplyDelta { changed })
            }
            EventKind::SessionOpen => {
                // The bid field carries the day's base price.
                if ev.bid.raw() > 0 {
                    self.base[idx - 1] = ev.bid;
                    if let Some(q) = self.quotes[idx - 1] {
                        self.quotes[idx - 1] = Some(self.make_quote(idx, q.bid, q.ask));
                    }
                }
                Ok(ApplyDelta { changed: false })
            }
            EventKind::SessionClose => Ok(ApplyDelta { changed: false }),
        }
    }

    pub fn quote(&self, index: usize) -> Option<&Quote> {
        self.quotes.get(index - 1).and_then(|q| q.as_ref())
    }

    pub fn base_price(&self, index: usize) -> Price {
        self.base[index - 1]
    }

    pub fn is_complete(&self) -> bool {
        self.quotes.iter().all(|q| q.is_some())
    }

    pub fn n(&self) -> usize {
        self.quotes.len()
    }

    pub fn snapshot(&self) -> PriceBook {
        self.clone()
    }
}
