//! TAQ-style trade and quote ingestion: parsing, session filtering and
//! same-timestamp compaction.
//!
//! Input CSV header:
//!
//! ```text
//! timestamp,kind,trade_type,price,volume,bid,ask,bid_vol,ask_vol
//! ```
//!
//! `timestamp` is `HH:MM:SS[.fff]`, optionally prefixed by `YYYY-MM-DD ` (or
//! `YYYY-MM-DDT`). `kind` is `trade` or `quote`. Trades fill `trade_type`,
//! `price` and `volume`; quotes fill `bid`, `ask`, `bid_vol` and `ask_vol`.
//! Unused fields are left empty.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};

use chrono::{NaiveDate, NaiveTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, domain_err, Result};
use crate::sim::PricePath;

pub const HEADER: [&str; 9] = [
    "timestamp",
    "kind",
    "trade_type",
    "price",
    "volume",
    "bid",
    "ask",
    "bid_vol",
    "ask_vol",
];

/// Intraday timestamp with an optional trading date.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp {
    pub date: Option<NaiveDate>,
    pub time: NaiveTime,
}

impl Timestamp {
    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        let (date, time) = match s.find([' ', 'T']) {
            Some(i) => (Some(NaiveDate::parse_from_str(&s[..i], "%Y-%m-%d").ok()?), &s[i + 1..]),
            None => (None, s),
        };
        let time = NaiveTime::parse_from_str(time, "%H:%M:%S%.f").ok()?;
        Some(Self { date, time })
    }

    pub fn seconds_of_day(&self) -> f64 {
        self.time.num_seconds_from_midnight() as f64 + self.time.nanosecond() as f64 * 1e-9
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(d) = self.date {
            write!(f, "{} ", d.format("%Y-%m-%d"))?;
        }
        write!(f, "{}", self.time.format("%H:%M:%S%.3f"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Trade,
    Quote,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trade {
    pub trade_type: String,
    pub price: f64,
    pub volume: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quote {
    pub bid: f64,
    pub ask: f64,
    pub bid_vol: f64,
    pub ask_vol: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Event {
    Trade(Trade),
    Quote(Quote),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaqRecord {
    pub timestamp: Timestamp,
    pub event: Event,
}

impl TaqRecord {
    pub fn kind(&self) -> Kind {
        match self.event {
            Event::Trade(_) => Kind::Trade,
            Event::Quote(_) => Kind::Quote,
        }
    }

    pub fn trade(timestamp: Timestamp, trade_type: &str, price: f64, volume: f64) -> Self {
        Self {
            timestamp,
            event: Event::Trade(Trade {
                trade_type: trade_type.to_string(),
                price,
                volume,
            }),
        }
    }

    pub fn quote(timestamp: Timestamp, bid: f64, ask: f64, bid_vol: f64, ask_vol: f64) -> Self {
        Self {
            timestamp,
            event: Event::Quote(Quote {
                bid,
                ask,
                bid_vol,
                ask_vol,
            }),
        }
    }
}

/// Row that failed to parse or validate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reject {
    pub line: u64,
    pub reason: String,
    pub raw: String,
}

#[derive(Debug, Deserialize)]
struct RawRow {
    timestamp: String,
    kind: String,
    #[serde(default)]
    trade_type: String,
    price: Option<f64>,
    volume: Option<f64>,
    bid: Option<f64>,
    ask: Option<f64>,
    bid_vol: Option<f64>,
    ask_vol: Option<f64>,
}

fn row_to_record(row: RawRow) -> std::result::Result<TaqRecord, String> {
    let timestamp = Timestamp::parse(&row.timestamp).ok_or_else(|| format!("bad timestamp '{}'", row.timestamp))?;
    let finite = |v: Option<f64>, name: &str| match v {
        Some(x) if x.is_finite() => Ok(x),
        Some(_) => Err(format!("{name} is not finite")),
        None => Err(format!("missing {name}")),
    };
    match row.kind.trim().to_ascii_lowercase().as_str() {
        "trade" => {
            let price = finite(row.price, "price")?;
            let volume = finite(row.volume, "volume")?;
            if price <= 0.0 || volume <= 0.0 {
                return Err("trade needs price > 0 and volume > 0".into());
            }
            let trade_type = row.trade_type.trim();
            if trade_type.is_empty() {
                return Err("missing trade_type".into());
            }
            Ok(TaqRecord::trade(timestamp, trade_type, price, volume))
        }
        "quote" => {
            let bid = finite(row.bid, "bid")?;
            let ask = finite(row.ask, "ask")?;
            let bid_vol = finite(row.bid_vol, "bid_vol")?;
            let ask_vol = finite(row.ask_vol, "ask_vol")?;
            if bid > ask {
                return Err(format!("crossed quote: bid {bid} > ask {ask}"));
            }
            if bid_vol < 0.0 || ask_vol < 0.0 {
                return Err("negative quote volume".into());
            }
            Ok(TaqRecord::quote(timestamp, bid, ask, bid_vol, ask_vol))
        }
        other => Err(format!("unknown kind '{other}'")),
    }
}

/// Parses every row; bad rows go to the rejects list with their line number.
/// Lines starting with `#` are skipped.
pub fn read_taq<R: Read>(input: R) -> Result<(Vec<TaqRecord>, Vec<Reject>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(input);
    let headers = rdr.headers()?.clone();
    for h in HEADER {
        if !headers.iter().any(|x| x.trim() == h) {
            return Err(config_err(format!("input is missing column '{h}'")));
        }
    }
    let mut records = Vec::new();
    let mut rejects = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let raw = row.iter().collect::<Vec<_>>().join(",");
        let parsed = row
            .deserialize::<RawRow>(Some(&headers))
            .map_err(|e| e.to_string())
            .and_then(row_to_record);
        match parsed {
            Ok(r) => records.push(r),
            Err(reason) => rejects.push(Reject { line, reason, raw }),
        }
    }
    Ok((records, rejects))
}

fn fmt_num(x: f64) -> String {
    x.to_string()
}

pub fn write_taq<W: Write>(records: &[TaqRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in records {
        let ts = r.timestamp.to_string();
        match &r.event {
            Event::Trade(t) => w.write_record([
                ts.as_str(),
                "trade",
                &t.trade_type,
                &fmt_num(t.price),
                &fmt_num(t.volume),
                "",
                "",
                "",
                "",
            ])?,
            Event::Quote(q) => w.write_record([
                ts.as_str(),
                "quote",
                "",
                "",
                "",
                &fmt_num(q.bid),
                &fmt_num(q.ask),
                &fmt_num(q.bid_vol),
                &fmt_num(q.ask_vol),
            ])?,
        }
    }
    w.flush().map_err(|source| crate::Error::Io {
        path: "<taq csv>".into(),
        source,
    })
}

pub fn write_rejects<W: Write>(rejects: &[Reject], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["line", "reason", "raw"])?;
    for r in rejects {
        w.write_record([r.line.to_string().as_str(), &r.reason, &r.raw])?;
    }
    w.flush().map_err(|source| crate::Error::Io {
        path: "<rejects csv>".into(),
        source,
    })
}

/// Session filtering rules.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CleanConfig {
    #[serde(default = "default_open")]
    pub session_start: String,
    #[serde(default = "default_close")]
    pub session_end: String,
    /// Seconds dropped after `session_start`.
    #[serde(default = "default_skip")]
    pub skip_opening_seconds: f64,
    /// Trade types kept; every other trade is dropped.
    #[serde(default = "default_types")]
    pub keep_trade_types: Vec<String>,
    /// `[start, end)` windows removed, e.g. intraday volatility auctions.
    #[serde(default)]
    pub auction_windows: Vec<(String, String)>,
}

fn default_open() -> String {
    "09:00:00".into()
}

fn default_close() -> String {
    "16:50:00".into()
}

fn default_skip() -> f64 {
    60.0
}

fn default_types() -> Vec<String> {
    vec!["AT".into()]
}

impl Default for CleanConfig {
    fn default() -> Self {
        Self {
            session_start: default_open(),
            session_end: default_close(),
            skip_opening_seconds: default_skip(),
            keep_trade_types: default_types(),
            auction_windows: Vec::new(),
        }
    }
}

fn parse_clock(s: &str) -> Result<f64> {
    let t = NaiveTime::parse_from_str(s.trim(), "%H:%M:%S%.f")
        .or_else(|_| NaiveTime::parse_from_str(s.trim(), "%H:%M"))
        .map_err(|_| config_err(format!("bad clock time '{s}'")))?;
    Ok(Timestamp { date: None, time: t }.seconds_of_day())
}

struct Rules {
    open: f64,
    close: f64,
    auctions: Vec<(f64, f64)>,
}

impl CleanConfig {
    fn rules(&self) -> Result<Rules> {
        let start = parse_clock(&self.session_start)?;
        let close = parse_clock(&self.session_end)?;
        if !(self.skip_opening_seconds.is_finite() && self.skip_opening_seconds >= 0.0) {
            return Err(config_err("skip_opening_seconds must be non-negative"));
        }
        let open = start + self.skip_opening_seconds;
        if close <= open {
            return Err(config_err("session end must come after the opening skip"));
        }
        let auctions = self
            .auction_windows
            .iter()
            .map(|(a, b)| {
                let (a, b) = (parse_clock(a)?, parse_clock(b)?);
                if b <= a {
                    return Err(config_err("auction window end must follow its start"));
                }
                Ok((a, b))
            })
            .collect::<Result<_>>()?;
        Ok(Rules { open, close, auctions })
    }

    pub fn validate(&self) -> Result<()> {
        self.rules().map(|_| ())
    }
}

/// Counts of what each stage removed.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub input: usize,
    pub rejected: usize,
    pub outside_session: usize,
    pub opening_skip: usize,
    pub auction: usize,
    /// Dropped trades by type.
    pub trade_type: BTreeMap<String, usize>,
    pub merged_trades: usize,
    pub superseded_quotes: usize,
    pub output: usize,
}

/// Sorts by timestamp (stable) and applies the session rules.
pub fn clean(records: &[TaqRecord], config: &CleanConfig) -> Result<Vec<TaqRecord>> {
    clean_counted(records, config, &mut IngestReport::default())
}

pub fn clean_counted(records: &[TaqRecord], config: &CleanConfig, report: &mut IngestReport) -> Result<Vec<TaqRecord>> {
    let rules = config.rules()?;
    let mut sorted: Vec<&TaqRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.timestamp);
    let start = rules.open - config.skip_opening_seconds;
    let mut out = Vec::with_capacity(records.len());
    for r in sorted {
        let s = r.timestamp.seconds_of_day();
        if s < start || s >= rules.close {
            report.outside_session += 1;
            continue;
        }
        if s < rules.open {
            report.opening_skip += 1;
            continue;
        }
        if rules.auctions.iter().any(|&(a, b)| s >= a && s < b) {
            report.auction += 1;
            continue;
        }
        if let Event::Trade(t) = &r.event {
            if !config.keep_trade_types.iter().any(|k| k == &t.trade_type) {
                *report.trade_type.entry(t.trade_type.clone()).or_default() += 1;
                continue;
            }
        }
        out.push(r.clone());
    }
    Ok(out)
}

/// One quote per timestamp (the last) and one trade per timestamp and trade
/// type (summed volume at the volume-weighted price). Input must be sorted.
pub fn compact(records: &[TaqRecord]) -> Vec<TaqRecord> {
    compact_counted(records, &mut IngestReport::default())
}

pub fn compact_counted(records: &[TaqRecord], report: &mut IngestReport) -> Vec<TaqRecord> {
    let mut out = Vec::with_capacity(records.len());
    let mut i = 0;
    while i < records.len() {
        let ts = records[i].timestamp;
        let mut j = i;
        while j < records.len() && records[j].timestamp == ts {
            j += 1;
        }
        let group = &records[i..j];
        let last_quote = group.iter().rposition(|r| r.kind() == Kind::Quote);
        // slot index -> (type, volume, price * volume)
        let mut trades: Vec<(usize, String, f64, f64)> = Vec::new();
        for (k, r) in group.iter().enumerate() {
            match &r.event {
                Event::Trade(t) => match trades.iter_mut().find(|x| x.1 == t.trade_type) {
                    Some(x) => {
                        x.2 += t.volume;
                        x.3 += t.price * t.volume;
                        report.merged_trades += 1;
                    }
                    None => trades.push((k, t.trade_type.clone(), t.volume, t.price * t.volume)),
                },
                Event::Quote(_) => {
                    if Some(k) != last_quote {
                        report.superseded_quotes += 1;
                    }
                }
            }
        }
        let mut slots: Vec<(usize, TaqRecord)> = trades
            .into_iter()
            .map(|(k, ty, vol, pv)| {
                let price = match &group[k].event {
                    Event::Trade(t) if t.volume == vol => t.price,
                    _ => pv / vol,
                };
                (k, TaqRecord::trade(ts, &ty, price, vol))
            })
            .collect();
        if let Some(k) = last_quote {
            slots.push((k, group[k].clone()));
        }
        slots.sort_by_key(|s| s.0);
        out.extend(slots.into_iter().map(|s| s.1));
        i = j;
    }
    out
}

/// Full pipeline: clean then compact, with counts.
pub fn pipeline(records: &[TaqRecord], config: &CleanConfig) -> Result<(Vec<TaqRecord>, IngestReport)> {
    let mut report = IngestReport {
        input: records.len(),
        ..Default::default()
    };
    let cleaned = clean_counted(records, config, &mut report)?;
    let out = compact_counted(&cleaned, &mut report);
    report.output = out.len();
    Ok((out, report))
}

/// `(ask_vol * bid + bid_vol * ask) / (bid_vol + ask_vol)`.
pub fn micro_price(q: &Quote) -> Result<f64> {
    let total = q.bid_vol + q.ask_vol;
    if total <= 0.0 {
        return Err(domain_err("micro-price needs positive total quote volume"));
    }
    Ok((q.ask_vol * q.bid + q.bid_vol * q.ask) / total)
}

fn day_offsets(records: &[TaqRecord]) -> impl Fn(&Timestamp) -> f64 {
    let first = records.iter().find_map(|r| r.timestamp.date);
    move |ts: &Timestamp| match (first, ts.date) {
        (Some(a), Some(b)) => (b - a).num_days() as f64 * 86_400.0,
        _ => 0.0,
    }
}

/// Log micro-price at each quote, timed in seconds from the first date's
/// midnight. Quotes with zero total volume are skipped.
pub fn micro_price_path(records: &[TaqRecord], book_id: usize) -> PricePath {
    let offset = day_offsets(records);
    let mut path = PricePath::new(book_id);
    for r in records {
        if let Event::Quote(q) = &r.event {
            if let Ok(m) = micro_price(q) {
                if m > 0.0 {
                    path.t.push(offset(&r.timestamp) + r.timestamp.seconds_of_day());
                    path.p.push(m.ln());
                }
            }
        }
    }
    path
}

/// Tick-rule signs of successive trade prices; unchanged prices repeat the
/// previous sign (0 before the first move).
pub fn trade_signs(records: &[TaqRecord]) -> Vec<f64> {
    let prices: Vec<f64> = records
        .iter()
        .filter_map(|r| match &r.event {
            Event::Trade(t) => Some(t.price),
            _ => None,
        })
        .collect();
    tick_rule(&prices)
}

/// Signs of successive differences, carrying the last non-zero sign forward.
pub fn tick_rule(prices: &[f64]) -> Vec<f64> {
    let mut last = 0.0;
    prices
        .windows(2)
        .map(|w| {
            let d = w[1] - w[0];
            if d != 0.0 {
                last = d.signum();
            }
            last
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timestamp_forms() {
        let a = Timestamp::parse("09:30:00.250").unwrap();
        assert_eq!(a.seconds_of_day(), 34_200.25);
        assert_eq!(a.to_string(), "09:30:00.250");
        let b = Timestamp::parse("2019-05-02 16:49:59").unwrap();
        assert_eq!(b.to_string(), "2019-05-02 16:49:59.000");
        assert!(Timestamp::parse("2019-05-02T10:00:00").is_some());
        assert!(Timestamp::parse("25:00:00").is_none());
        assert!(Timestamp::parse("noon").is_none());
    }

    #[test]
    fn micro_price_examples() {
        let q = |bid, ask, bv, av| Quote {
            bid,
            ask,
            bid_vol: bv,
            ask_vol: av,
        };
        assert_eq!(micro_price(&q(10.0, 10.0, 5.0, 2.0)).unwrap(), 10.0);
        assert_eq!(micro_price(&q(10.0, 11.0, 4.0, 4.0)).unwrap(), 10.5);
        assert_eq!(micro_price(&q(10.0, 11.0, 3.0, 1.0)).unwrap(), 10.75);
        assert!(micro_price(&q(10.0, 11.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn tick_rule_carries_sign() {
        assert_eq!(tick_rule(&[1.0, 1.0, 2.0, 2.0, 1.5, 1.5]), vec![0.0, 1.0, 1.0, -1.0, -1.0]);
    }
}
