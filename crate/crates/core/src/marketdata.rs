//! Time-indexed multi-modal market data with strict as-of access.
//!
//! The store is built once by the loaders and is read-only afterwards. All
//! queries go through a [`MarketView`], which optionally carries a
//! simulation clock; a clocked view refuses any query that would reach past
//! the clock's current day.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MarketDataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {message}")]
    MalformedRow {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("{path}: line {line}: date {date} does not follow previous date {previous}")]
    DateRegression {
        path: PathBuf,
        line: u64,
        date: NaiveDate,
        previous: NaiveDate,
    },
    #[error("{path}: line {line}: duplicate bar for {ticker} on {date}")]
    DuplicateBar {
        path: PathBuf,
        line: u64,
        ticker: String,
        date: NaiveDate,
    },
    #[error("{path}: invalid document: {message}")]
    InvalidDocument { path: PathBuf, message: String },
    #[error("unknown ticker {0}")]
    UnknownTicker(String),
    #[error("inverted date range: start {start} is after end {end}")]
    InvertedRange { start: NaiveDate, end: NaiveDate },
    #[error("query reaches {requested}, beyond the simulation day {clock}")]
    BeyondClock {
        requested: NaiveDate,
        clock: NaiveDate,
    },
}

pub type Result<T, E = MarketDataError> = std::result::Result<T, E>;

/// One daily OHLCV bar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bar {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub adj_close: f64,
    pub volume: u64,
}

impl Bar {
    /// Checks the price-range invariants, returning a description of the
    /// first violation.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let prices = [
            ("open", self.open),
            ("high", self.high),
            ("low", self.low),
            ("close", self.close),
            ("adj_close", self.adj_close),
        ];
        for (name, value) in prices {
            if !value.is_finite() || value <= 0.0 {
                return Err(format!("non-positive price {name}={value}"));
            }
        }
        if self.low > self.high {
            return Err(format!("high {} < low {}", self.high, self.low));
        }
        if self.low > self.open.min(self.close) {
            return Err(format!(
                "low {} above min(open, close) {}",
                self.low,
                self.open.min(self.close)
            ));
        }
        if self.high < self.open.max(self.close) {
            return Err(format!(
                "high {} below max(open, close) {}",
                self.high,
                self.open.max(self.close)
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewsItem {
    pub date: NaiveDate,
    pub source: String,
    pub headline: String,
    #[serde(default)]
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentimentPoint {
    pub date: NaiveDate,
    pub count: u64,
    pub normalized_score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InsiderKind {
    Transaction,
    Sentiment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsiderRecord {
    pub date: NaiveDate,
    pub person: String,
    pub kind: InsiderKind,
    /// Signed share count; negative is a sale.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shares: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price: Option<f64>,
    /// Monthly share purchase ratio.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mspr: Option<f64>,
}

/// Controlled vocabulary for fundamentals metric names.
pub const FUNDAMENTAL_METRICS: &[&str] = &[
    "market_cap",
    "shares_outstanding",
    "revenue",
    "net_income",
    "eps",
    "pe_ratio",
    "pb_ratio",
    "ps_ratio",
    "gross_margin",
    "operating_margin",
    "net_margin",
    "roe",
    "roa",
    "current_ratio",
    "quick_ratio",
    "debt_to_equity",
    "revenue_growth",
    "eps_growth",
    "free_cash_flow",
    "dividend_yield",
    "beta",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FundamentalsSnapshot {
    pub as_of: NaiveDate,
    pub metrics: BTreeMap<String, f64>,
}

/// Static company description served by the profile tool.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CompanyProfile {
    pub name: String,
    #[serde(default)]
    pub exchange: String,
    #[serde(default)]
    pub industry: String,
    #[serde(default)]
    pub country: String,
}

/// The per-ticker JSON document holding everything that is not OHLCV.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuxDocument {
    pub ticker: String,
    #[serde(default)]
    pub profile: Option<CompanyProfile>,
    #[serde(default)]
    pub news: Vec<NewsItem>,
    #[serde(default)]
    pub sentiment: Vec<SentimentPoint>,
    #[serde(default)]
    pub insider: Vec<InsiderRecord>,
    #[serde(default)]
    pub fundamentals: Vec<FundamentalsSnapshot>,
}

impl AuxDocument {
    fn validate(&self) -> std::result::Result<(), String> {
        if self.ticker.trim().is_empty() {
            return Err("ticker is empty".into());
        }
        for (i, item) in self.news.iter().enumerate() {
            if item.headline.trim().is_empty() {
                return Err(format!("news[{i}] has an empty headline"));
            }
        }
        for (i, point) in self.sentiment.iter().enumerate() {
            if !(-1.0..=1.0).contains(&point.normalized_score) {
                return Err(format!(
                    "sentiment[{i}] score {} outside [-1, 1]",
                    point.normalized_score
                ));
            }
        }
        for (i, record) in self.insider.iter().enumerate() {
            match record.kind {
                InsiderKind::Transaction if record.shares.is_none() => {
                    return Err(format!("insider[{i}] transaction without shares"));
                }
                InsiderKind::Sentiment if record.mspr.is_none() => {
                    return Err(format!("insider[{i}] sentiment without mspr"));
                }
                _ => {}
            }
        }
        for (i, snap) in self.fundamentals.iter().enumerate() {
            for name in snap.metrics.keys() {
                if !FUNDAMENTAL_METRICS.contains(&name.as_str()) {
                    return Err(format!("fundamentals[{i}] has unknown metric {name}"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct TickerData {
    bars: Vec<Bar>,
    news: Vec<NewsItem>,
    sentiment: Vec<SentimentPoint>,
    insider: Vec<InsiderRecord>,
    fundamentals: Vec<FundamentalsSnapshot>,
    profile: Option<CompanyProfile>,
    has_aux: bool,
}

/// Summary of what a ticker holds, used for ingestion manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickerSummary {
    pub ticker: String,
    pub first_bar: Option<NaiveDate>,
    pub last_bar: Option<NaiveDate>,
    pub bars: usize,
    pub news: usize,
    pub sentiment: usize,
    pub insider: usize,
    pub fundamentals: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MarketDataStore {
    tickers: HashMap<String, TickerData>,
}

#[derive(Debug, Deserialize)]
struct CsvBar {
    date: String,
    open: f64,
    high: f64,
    low: f64,
    close: f64,
    adj_close: f64,
    volume: u64,
}

const OHLCV_HEADER: [&str; 7] = [
    "date",
    "open",
    "high",
    "low",
    "close",
    "adj_close",
    "volume",
];

impl MarketDataStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Loads an OHLCV CSV file for `ticker`, returning the number of bars read.
    pub fn load_ohlcv(&mut self, path: impl AsRef<Path>, ticker: &str) -> Result<usize> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| MarketDataError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.load_ohlcv_reader(file, path, ticker)
    }

    /// Same as [`load_ohlcv`](Self::load_ohlcv) but from any reader; `origin`
    /// only labels error messages.
    pub fn load_ohlcv_reader<R: Read>(
        &mut self,
        reader: R,
        origin: &Path,
        ticker: &str,
    ) -> Result<usize> {
        let malformed = |line: u64, message: String| MarketDataError::MalformedRow {
            path: origin.to_path_buf(),
            line,
            message,
        };
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| malformed(1, e.to_string()))?
            .clone();
        if headers.iter().ne(OHLCV_HEADER.iter().copied()) {
            return Err(malformed(
                1,
                format!("expected header {}", OHLCV_HEADER.join(",")),
            ));
        }

        let mut parsed: Vec<Bar> = Vec::new();
        for (idx, row) in rdr.deserialize::<CsvBar>().enumerate() {
            // header is line 1
            let line = idx as u64 + 2;
            let row = row.map_err(|e| malformed(line, e.to_string()))?;
            let date = NaiveDate::parse_from_str(&row.date, "%Y-%m-%d")
                .map_err(|e| malformed(line, format!("bad date {:?}: {e}", row.date)))?;
            let bar = Bar {
                date,
                open: row.open,
                high: row.high,
                low: row.low,
                close: row.close,
                adj_close: row.adj_close,
                volume: row.volume,
            };
            bar.validate().map_err(|m| malformed(line, m))?;
            if let Some(prev) = parsed.last() {
                if bar.date == prev.date {
                    return Err(MarketDataError::DuplicateBar {
                        path: origin.to_path_buf(),
                        line,
                        ticker: ticker.to_string(),
                        date,
                    });
                }
                if bar.date < prev.date {
                    return Err(MarketDataError::DateRegression {
                        path: origin.to_path_buf(),
                        line,
                        date,
                        previous: prev.date,
                    });
                }
            }
            parsed.push(bar);
        }

        let entry = self.tickers.entry(ticker.to_string()).or_default();
        for (idx, bar) in parsed.iter().enumerate() {
            if entry
                .bars
                .binary_search_by_key(&bar.date, |b| b.date)
                .is_ok()
            {
                return Err(MarketDataError::DuplicateBar {
                    path: origin.to_path_buf(),
                    line: idx as u64 + 2,
                    ticker: ticker.to_string(),
                    date: bar.date,
                });
            }
        }
        let count = parsed.len();
        entry.bars.extend(parsed);
        entry.bars.sort_by_key(|b| b.date);
        Ok(count)
    }

    /// Loads a per-ticker JSON document of news, sentiment, insider and
    /// fundamentals records. Returns the ticker it was filed under.
    pub fn load_aux_json(&mut self, path: impl AsRef<Path>) -> Result<String> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| MarketDataError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let doc: AuxDocument =
            serde_json::from_str(&text).map_err(|e| MarketDataError::InvalidDocument {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
        self.insert_aux(doc, path)
    }

    pub fn insert_aux(&mut self, doc: AuxDocument, origin: &Path) -> Result<String> {
        let invalid = |message: String| MarketDataError::InvalidDocument {
            path: origin.to_path_buf(),
            message,
        };
        doc.validate().map_err(invalid)?;
        let entry = self.tickers.entry(doc.ticker.clone()).or_default();
        if entry.has_aux {
            return Err(invalid(format!(
                "auxiliary data for {} already loaded",
                doc.ticker
            )));
        }
        entry.has_aux = true;
        entry.profile = doc.profile;
        entry.news = doc.news;
        entry.news.sort_by_key(|n| n.date);
        entry.sentiment = doc.sentiment;
        entry.sentiment.sort_by_key(|s| s.date);
        entry.insider = doc.insider;
        entry.insider.sort_by_key(|r| r.date);
        entry.fundamentals = doc.fundamentals;
        entry.fundamentals.sort_by_key(|f| f.as_of);
        Ok(doc.ticker)
    }

    /// Inserts already-validated bars, used by tests and generators.
    pub fn insert_bars(&mut self, ticker: &str, bars: Vec<Bar>) -> Result<usize> {
        let mut csv = String::from("date,open,high,low,close,adj_close,volume\n");
        for b in &bars {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                b.date, b.open, b.high, b.low, b.close, b.adj_close, b.volume
            ));
        }
        self.load_ohlcv_reader(csv.as_bytes(), Path::new("<memory>"), ticker)
    }

    pub fn tickers(&self) -> Vec<String> {
        let mut names: Vec<String> = self.tickers.keys().cloned().collect();
        names.sort();
        names
    }

    pub fn summary(&self) -> Vec<TickerSummary> {
        self.tickers()
            .into_iter()
            .map(|ticker| {
                let data = &self.tickers[&ticker];
                TickerSummary {
                    first_bar: data.bars.first().map(|b| b.date),
                    last_bar: data.bars.last().map(|b| b.date),
                    bars: data.bars.len(),
                    news: data.news.len(),
                    sentiment: data.sentiment.len(),
                    insider: data.insider.len(),
                    fundamentals: data.fundamentals.len(),
                    ticker,
                }
            })
            .collect()
    }

    /// A view with no simulation clock: any as-of date is allowed.
    pub fn unclocked(&self) -> MarketView<'_> {
        MarketView {
            store: self,
            clock: None,
        }
    }

    /// A view whose clock is pinned to `day`; queries past it are rejected.
    pub fn at(&self, day: NaiveDate) -> MarketView<'_> {
        MarketView {
            store: self,
            clock: Some(day),
        }
    }

    /// Trading days for `ticker` in `[start, end]`.
    pub fn trading_days(
        &self,
        ticker: &str,
        start: NaiveDate,
        end: NaiveDate,
    ) -> Result<Vec<NaiveDate>> {
        let data = self.ticker(ticker)?;
        Ok(data
            .bars
            .iter()
            .map(|b| b.date)
            .filter(|d| *d >= start && *d <= end)
            .collect())
    }

    /// Returns a copy of the store in which every record dated after `day`
    /// has been passed through `mutate`. Used to probe for look-ahead.
    pub fn map_future(&self, day: NaiveDate, mut mutate: impl FnMut(&mut Bar)) -> Self {
        let mut out = self.clone();
        for data in out.tickers.values_mut() {
            for bar in data.bars.iter_mut().filter(|b| b.date > day) {
                mutate(bar);
            }
            for item in data.news.iter_mut().filter(|n| n.date > day) {
                item.headline = format!("FUTURE {}", item.headline);
                item.body = "perturbed".into();
            }
            for point in data.sentiment.iter_mut().filter(|p| p.date > day) {
                point.normalized_score = -point.normalized_score;
                point.count += 1000;
            }
            for rec in data.insider.iter_mut().filter(|r| r.date > day) {
                rec.person = format!("FUTURE {}", rec.person);
            }
            for snap in data.fundamentals.iter_mut().filter(|s| s.as_of > day) {
                for v in snap.metrics.values_mut() {
                    *v = *v * 3.0 + 1.0;
                }
            }
        }
        out
    }

    fn ticker(&self, ticker: &str) -> Result<&TickerData> {
        self.tickers
            .get(ticker)
            .ok_or_else(|| MarketDataError::UnknownTicker(ticker.to_string()))
    }
}

/// Read access to a [`MarketDataStore`], optionally guarded by a simulation
/// clock.
#[derive(Debug, Clone, Copy)]
pub struct MarketView<'a> {
    store: &'a MarketDataStore,
    clock: Option<NaiveDate>,
}

fn upto<T>(items: &[T], end: NaiveDate, key: impl Fn(&T) -> NaiveDate) -> &[T] {
    &items[..items.partition_point(|x| key(x) <= end)]
}

fn between<T: Clone>(
    items: &[T],
    start: NaiveDate,
    end: NaiveDate,
    key: impl Fn(&T) -> NaiveDate,
) -> Vec<T> {
    let lo = items.partition_point(|x| key(x) < start);
    let hi = items.partition_point(|x| key(x) <= end);
    items[lo..hi.max(lo)].to_vec()
}

impl<'a> MarketView<'a> {
    pub fn clock(&self) -> Option<NaiveDate> {
        self.clock
    }

    pub fn store(&self) -> &'a MarketDataStore {
        self.store
    }

    fn guard(&self, requested: NaiveDate) -> Result<()> {
        match self.clock {
            Some(clock) if requested > clock => {
                Err(MarketDataError::BeyondClock { requested, clock })
            }
            _ => Ok(()),
        }
    }

    fn range(&self, start: NaiveDate, end: NaiveDate) -> Result<()> {
        if start > end {
            return Err(MarketDataError::InvertedRange { start, end });
        }
        self.guard(end)
    }

    /// Bars dated in `(as_of - lookback_days, as_of]`, ascending.
    pub fn bars_as_of(
        &self,
        ticker: &str,
        as_of: NaiveDate,
        lookback_days: u32,
    ) -> Result<Vec<Bar>> {
        let data = self.store.ticker(ticker)?;
        self.guard(as_of)?;
        let start = as_of - Duration::days(i64::from(lookback_days)) + Duration::days(1);
        Ok(between(&data.bars, start, as_of, |b| b.date))
    }

    /// Every bar dated on or before `as_of`.
    pub fn bars_through(&self, ticker: &str, as_of: NaiveDate) -> Result<&'a [Bar]> {
        let data = self.store.ticker(ticker)?;
        self.guard(as_of)?;
        Ok(upto(&data.bars, as_of, |b| b.date))
    }

    /// The bar dated exactly `day`, if that day traded.
    pub fn bar_on(&self, ticker: &str, day: NaiveDate) -> Result<Option<Bar>> {
        let bars = self.bars_through(ticker, day)?;
        Ok(bars.last().filter(|b| b.date == day).copied())
    }

    pub fn news_between(
        &self,
        ticker: &str,
        start: NaiveDate,
        end: NaiveDate,
    ) -> Result<Vec<NewsItem>> {
        let data = self.store.ticker(ticker)?;
        self.range(start, end)?;
        Ok(between(&data.news, start, end, |n| n.date))
    }

    pub fn sentiment_between(
        &self,
        ticker: &str,
        start: NaiveDate,
        end: NaiveDate,
    ) -> Result<Vec<SentimentPoint>> {
        let data = self.store.ticker(ticker)?;
        self.range(start, end)?;
        Ok(between(&data.sentiment, start, end, |s| s.date))
    }

    pub fn insider_between(
        &self,
        ticker: &str,
        start: NaiveDate,
        end: NaiveDate,
    ) -> Result<Vec<InsiderRecord>> {
        let data = self.store.ticker(ticker)?;
        self.range(start, end)?;
        Ok(between(&data.insider, start, end, |r| r.date))
    }

    pub fn fundamentals_between(
        &self,
        ticker: &str,
        start: NaiveDate,
        end: NaiveDate,
    ) -> Result<Vec<FundamentalsSnapshot>> {
        let data = self.store.ticker(ticker)?;
        self.range(start, end)?;
        Ok(between(&data.fundamentals, start, end, |f| f.as_of))
    }

    /// Most recent fundamentals snapshot on or before `as_of`.
    pub fn latest_fundamentals(
        &self,
        ticker: &str,
        as_of: NaiveDate,
    ) -> Result<Option<FundamentalsSnapshot>> {
        let data = self.store.ticker(ticker)?;
        self.guard(as_of)?;
        Ok(upto(&data.fundamentals, as_of, |f| f.as_of).last().cloned())
    }

    pub fn profile(&self, ticker: &str) -> Result<Option<CompanyProfile>> {
        Ok(self.store.ticker(ticker)?.profile.clone())
    }
}
