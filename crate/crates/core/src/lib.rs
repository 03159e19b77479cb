//! Deterministic market-data, indicator, strategy, backtest and metrics
//! kernels.
//!
//! * [`marketdata`] ingests OHLCV and auxiliary records and serves as-of
//!   queries that can never see past a simulation clock.
//! * [`indicators`] computes technical indicators aligned to bar series.
//! * [`strategies`] holds the five rule-based baselines.
//! * [`backtest`] replays a decision source day by day with full-allocation
//!   accounting.
//! * [`metrics`] evaluates an equity curve.

pub mod backtest;
pub mod indicators;
pub mod marketdata;
pub mod metrics;
pub mod strategies;

pub use backtest::{run_backtest, BacktestConfig, BacktestReport, DecisionContext, DecisionSource};
pub use marketdata::{Bar, MarketDataStore, MarketView};
pub use metrics::MetricsReport;
pub use strategies::{Baseline, Signal};
