//! Daily-stepped single-asset backtester.
//!
//! For each trading day the clock is pinned to that day, the decision
//! source sees only data up to it, the signal executes at that day's close,
//! and equity is marked at the same close.

use std::error::Error as StdError;
use std::fs;
use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::marketdata::{MarketDataError, MarketDataStore, MarketView};
use crate::metrics::MetricsReport;
use crate::strategies::{Baseline, Signal};

pub type SourceError = Box<dyn StdError + Send + Sync>;

#[derive(Debug, Error)]
pub enum BacktestError {
    #[error("invalid backtest config: {0}")]
    InvalidConfig(String),
    #[error("no trading days for {ticker} between {start} and {end}")]
    EmptyRange {
        ticker: String,
        start: NaiveDate,
        end: NaiveDate,
    },
    #[error("price must be positive, got {0}")]
    NonPositivePrice(f64),
    #[error(transparent)]
    MarketData(#[from] MarketDataError),
    #[error("decision source failed on {day}: {source}")]
    Decision {
        day: NaiveDate,
        #[source]
        source: SourceError,
    },
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = BacktestError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    #[default]
    CloseOfDecisionDay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BacktestConfig {
    pub initial_capital: f64,
    pub cost_bps: f64,
    pub allow_short: bool,
    pub execution: Execution,
    pub risk_free_rate: f64,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            initial_capital: 100_000.0,
            cost_bps: 0.0,
            allow_short: true,
            execution: Execution::CloseOfDecisionDay,
            risk_free_rate: 0.0,
        }
    }
}

impl BacktestConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_capital.is_finite() && self.initial_capital > 0.0) {
            return Err(BacktestError::InvalidConfig(format!(
                "initial_capital must be > 0, got {}",
                self.initial_capital
            )));
        }
        if !(self.cost_bps.is_finite() && self.cost_bps >= 0.0) {
            return Err(BacktestError::InvalidConfig(format!(
                "cost_bps must be >= 0, got {}",
                self.cost_bps
            )));
        }
        if !self.risk_free_rate.is_finite() || self.risk_free_rate <= -1.0 {
            return Err(BacktestError::InvalidConfig(format!(
                "risk_free_rate must be > -1, got {}",
                self.risk_free_rate
            )));
        }
        Ok(())
    }

    fn cost_rate(&self) -> f64 {
        self.cost_bps / 10_000.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PortfolioState {
    pub cash: f64,
    /// Signed; negative is short.
    pub position_units: f64,
    pub last_mark: f64,
}

impl PortfolioState {
    pub fn new(capital: f64) -> Self {
        Self {
            cash: capital,
            position_units: 0.0,
            last_mark: 0.0,
        }
    }

    pub fn equity_at(&self, price: f64) -> f64 {
        self.cash + self.position_units * price
    }

    pub fn equity(&self) -> f64 {
        self.equity_at(self.last_mark)
    }

    pub fn is_flat(&self) -> bool {
        self.position_units == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TradeAction {
    OpenLong,
    OpenShort,
    Close,
    Reverse,
}

impl TradeAction {
    pub fn as_str(&self) -> &'static str {
        match self {
            TradeAction::OpenLong => "open_long",
            TradeAction::OpenShort => "open_short",
            TradeAction::Close => "close",
            TradeAction::Reverse => "reverse",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeRecord {
    pub date: NaiveDate,
    pub action: TradeAction,
    /// Signed change in position units.
    pub units: f64,
    pub price: f64,
    pub cost: f64,
}

/// Target position sign implied by a signal from the current position, or
/// `None` when the signal changes nothing.
fn target_sign(current: f64, signal: Signal, allow_short: bool) -> Option<i8> {
    match signal {
        Signal::Hold => None,
        Signal::Buy if current > 0.0 => None,
        Signal::Buy => Some(1),
        Signal::Sell if current < 0.0 => None,
        Signal::Sell if allow_short => Some(-1),
        Signal::Sell if current > 0.0 => Some(0),
        Signal::Sell => None,
    }
}

/// Applies one signal at `price`.
///
/// Buy goes fully long (reversing a short), Sell goes fully short
/// (reversing a long) or, with shorting disabled, closes a long. "Fully"
/// means the whole equity after closing, net of the trade cost, so that
/// `|units| * price * (1 + cost_rate) == equity`.
pub fn apply_signal(
    portfolio: &PortfolioState,
    signal: Signal,
    price: f64,
    date: NaiveDate,
    config: &BacktestConfig,
) -> Result<(PortfolioState, Option<TradeRecord>)> {
    if !(price.is_finite() && price > 0.0) {
        return Err(BacktestError::NonPositivePrice(price));
    }
    let current = portfolio.position_units;
    let mut next = PortfolioState {
        last_mark: price,
        ..*portfolio
    };
    let Some(sign) = target_sign(current, signal, config.allow_short) else {
        return Ok((next, None));
    };
    let rate = config.cost_rate();

    // Close whatever is open first.
    let close_cost = current.abs() * price * rate;
    let equity_flat = portfolio.cash + current * price - close_cost;

    let target = if sign == 0 || equity_flat <= 0.0 {
        0.0
    } else {
        f64::from(sign) * equity_flat / (price * (1.0 + rate))
    };
    let delta = target - current;
    if delta == 0.0 {
        return Ok((next, None));
    }
    let cost = delta.abs() * price * rate;
    next.cash = portfolio.cash - delta * price - cost;
    next.position_units = target;

    let action = match (current == 0.0, target == 0.0) {
        (true, _) if target > 0.0 => TradeAction::OpenLong,
        (true, _) => TradeAction::OpenShort,
        (false, true) => TradeAction::Close,
        (false, false) => TradeAction::Reverse,
    };
    Ok((
        next,
        Some(TradeRecord {
            date,
            action,
            units: delta,
            price,
            cost,
        }),
    ))
}

/// Everything a decision source may look at for one day.
pub struct DecisionContext<'a> {
    pub ticker: &'a str,
    pub day: NaiveDate,
    /// Zero-based index of `day` within the backtest range.
    pub day_index: usize,
    /// View clocked at `day`.
    pub market: MarketView<'a>,
}

pub trait DecisionSource {
    fn name(&self) -> String;
    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Signal, SourceError>;
}

/// Adapts a baseline strategy to a decision source.
pub struct StrategySource {
    pub strategy: Baseline,
}

impl DecisionSource for StrategySource {
    fn name(&self) -> String {
        self.strategy.name().to_string()
    }

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Signal, SourceError> {
        let history = ctx.market.bars_through(ctx.ticker, ctx.day)?;
        Ok(self.strategy.signal(history, ctx.day_index))
    }
}

impl<F> DecisionSource for F
where
    F: FnMut(&DecisionContext<'_>) -> Result<Signal, SourceError>,
{
    fn name(&self) -> String {
        "custom".to_string()
    }

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Signal, SourceError> {
        self(ctx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquityPoint {
    pub date: NaiveDate,
    pub equity: f64,
}

/// Per-day ledger line kept for audits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DayRecord {
    pub date: NaiveDate,
    pub signal: Signal,
    pub close: f64,
    pub cash: f64,
    pub position_units: f64,
    pub equity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub ticker: String,
    pub source: String,
    pub trades: Vec<TradeRecord>,
    pub equity_curve: Vec<EquityPoint>,
    pub days: Vec<DayRecord>,
    /// `None` for single-day runs, where no return is defined.
    pub metrics: Option<MetricsReport>,
}

impl BacktestReport {
    pub fn equity_values(&self) -> Vec<f64> {
        self.equity_curve.iter().map(|p| p.equity).collect()
    }

    pub fn signals(&self) -> Vec<Signal> {
        self.days.iter().map(|d| d.signal).collect()
    }
}

pub fn run_backtest(
    source: &mut dyn DecisionSource,
    ticker: &str,
    start: NaiveDate,
    end: NaiveDate,
    store: &MarketDataStore,
    config: &BacktestConfig,
) -> Result<BacktestReport> {
    config.validate()?;
    if start > end {
        return Err(BacktestError::EmptyRange {
            ticker: ticker.to_string(),
            start,
            end,
        });
    }
    let days = store.trading_days(ticker, start, end)?;
    if days.is_empty() {
        return Err(BacktestError::EmptyRange {
            ticker: ticker.to_string(),
            start,
            end,
        });
    }

    let mut portfolio = PortfolioState::new(config.initial_capital);
    let mut trades = Vec::new();
    let mut curve = Vec::with_capacity(days.len());
    let mut ledger = Vec::with_capacity(days.len());

    for (day_index, &day) in days.iter().enumerate() {
        let market = store.at(day);
        let ctx = DecisionContext {
            ticker,
            day,
            day_index,
            market,
        };
        let signal = source
            .decide(&ctx)
            .map_err(|source| BacktestError::Decision { day, source })?;
        let close = market
            .bar_on(ticker, day)?
            .expect("trading day has a bar")
            .close;
        let (next, trade) = apply_signal(&portfolio, signal, close, day, config)?;
        portfolio = next;
        trades.extend(trade);
        let equity = portfolio.equity_at(close);
        curve.push(EquityPoint { date: day, equity });
        ledger.push(DayRecord {
            date: day,
            signal,
            close,
            cash: portfolio.cash,
            position_units: portfolio.position_units,
            equity,
        });
    }

    let values: Vec<f64> = curve.iter().map(|p| p.equity).collect();
    let metrics = if values.len() >= 2 {
        MetricsReport::compute(&values, config.risk_free_rate).ok()
    } else {
        None
    };

    Ok(BacktestReport {
        ticker: ticker.to_string(),
        source: source.name(),
        trades,
        equity_curve: curve,
        days: ledger,
        metrics,
    })
}

pub const TRADES_HEADER: &str = "date,action,units,price,cost";
pub const EQUITY_HEADER: &str = "date,equity";

pub fn write_trades_csv<W: Write>(mut out: W, trades: &[TradeRecord]) -> std::io::Result<()> {
    writeln!(out, "{TRADES_HEADER}")?;
    for t in trades {
        writeln!(
            out,
            "{},{},{},{},{}",
            t.date,
            t.action.as_str(),
            t.units,
            t.price,
            t.cost
        )?;
    }
    Ok(())
}

pub fn write_equity_csv<W: Write>(mut out: W, curve: &[EquityPoint]) -> std::io::Result<()> {
    writeln!(out, "{EQUITY_HEADER}")?;
    for p in curve {
        writeln!(out, "{},{}", p.date, p.equity)?;
    }
    Ok(())
}

pub fn metrics_json(metrics: Option<&MetricsReport>) -> String {
    let mut s = serde_json::to_string_pretty(&metrics).expect("metrics serialize");
    s.push('\n');
    s
}

/// Writes `trades.csv`, `equity.csv` and `metrics.json` into `dir`.
pub fn export_report(report: &BacktestReport, dir: &Path) -> Result<()> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| BacktestError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let mut trades = Vec::new();
    write_trades_csv(&mut trades, &report.trades).map_err(io(dir))?;
    let mut equity = Vec::new();
    write_equity_csv(&mut equity, &report.equity_curve).map_err(io(dir))?;
    for (name, bytes) in [
        ("trades.csv", trades),
        ("equity.csv", equity),
        (
            "metrics.json",
            metrics_json(report.metrics.as_ref()).into_bytes(),
        ),
    ] {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(io(&path))?;
    }
    Ok(())
}
