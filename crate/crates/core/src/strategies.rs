//! Rule-based baseline strategies.
//!
//! Each strategy looks only at bars dated on or before the decision day and
//! emits one [`Signal`]. Anything that lacks enough history emits `Hold`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::indicators;
use crate::marketdata::Bar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Signal {
    Buy,
    Sell,
    Hold,
}

impl fmt::Display for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Signal::Buy => "BUY",
            Signal::Sell => "SELL",
            Signal::Hold => "HOLD",
        })
    }
}

impl FromStr for Signal {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "BUY" => Ok(Signal::Buy),
            "SELL" => Ok(Signal::Sell),
            "HOLD" => Ok(Signal::Hold),
            other => Err(format!("not a trading action: {other:?}")),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum StrategyError {
    #[error("unknown strategy {0:?} (expected one of buy_and_hold, macd, kdj_rsi, zmr, sma)")]
    UnknownStrategy(String),
    #[error("strategy {strategy} has no parameter {param:?}")]
    UnknownParameter { strategy: String, param: String },
    #[error("invalid parameter {param}={value}: {reason}")]
    InvalidParameter {
        param: String,
        value: f64,
        reason: String,
    },
}

fn invalid(param: &str, value: f64, reason: &str) -> StrategyError {
    StrategyError::InvalidParameter {
        param: param.to_string(),
        value,
        reason: reason.to_string(),
    }
}

fn positive_int(param: &str, value: f64) -> Result<usize, StrategyError> {
    if value.is_finite() && value >= 1.0 && value.fract() == 0.0 {
        Ok(value as usize)
    } else {
        Err(invalid(param, value, "must be a positive integer"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacdConfig {
    pub fast: usize,
    pub slow: usize,
    pub signal: usize,
}

impl Default for MacdConfig {
    fn default() -> Self {
        Self {
            fast: 12,
            slow: 26,
            signal: 9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KdjRsiConfig {
    pub rsi_period: usize,
    pub kdj_period: usize,
    pub k_smooth: usize,
    pub d_smooth: usize,
    pub rsi_buy: f64,
    pub rsi_sell: f64,
    pub j_buy: f64,
    pub j_sell: f64,
}

impl Default for KdjRsiConfig {
    fn default() -> Self {
        Self {
            rsi_period: 14,
            kdj_period: 9,
            k_smooth: 3,
            d_smooth: 3,
            rsi_buy: 30.0,
            rsi_sell: 70.0,
            j_buy: 20.0,
            j_sell: 80.0,
        }
    }
}

/// Rolling z-score mean reversion. `exit_z` marks the band in which the
/// strategy stays neutral after a reversion; the signal itself is `Hold`
/// anywhere strictly inside `(-entry_z, entry_z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZmrConfig {
    pub window: usize,
    pub entry_z: f64,
    pub exit_z: f64,
}

impl Default for ZmrConfig {
    fn default() -> Self {
        Self {
            window: 20,
            entry_z: 2.0,
            exit_z: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmaConfig {
    pub fast: usize,
    pub slow: usize,
}

impl Default for SmaConfig {
    fn default() -> Self {
        Self { fast: 10, slow: 30 }
    }
}

/// Buy on the first tradable day, hold afterwards.
pub fn buy_and_hold(day_index: usize) -> Signal {
    if day_index == 0 {
        Signal::Buy
    } else {
        Signal::Hold
    }
}

/// Strict crossover of `a` over `b` between the last two points.
fn crossover(a: &[Option<f64>], b: &[Option<f64>]) -> Signal {
    let n = a.len();
    if n < 2 {
        return Signal::Hold;
    }
    let (Some(a0), Some(a1), Some(b0), Some(b1)) = (a[n - 2], a[n - 1], b[n - 2], b[n - 1]) else {
        return Signal::Hold;
    };
    if a0 < b0 && a1 > b1 {
        Signal::Buy
    } else if a0 > b0 && a1 < b1 {
        Signal::Sell
    } else {
        Signal::Hold
    }
}

/// Buy when the MACD line crosses above its signal line, sell on the
/// opposite cross.
pub fn macd_strategy(bars: &[Bar], cfg: &MacdConfig) -> Signal {
    match indicators::macd(bars, cfg.fast, cfg.slow, cfg.signal) {
        Ok(m) => crossover(&m.macd.values(), &m.signal.values()),
        Err(_) => Signal::Hold,
    }
}

/// Oversold/overbought rule on already-computed RSI and J values.
pub fn kdj_rsi_rule(rsi: f64, j: f64, cfg: &KdjRsiConfig) -> Signal {
    if rsi < cfg.rsi_buy && j < cfg.j_buy {
        Signal::Buy
    } else if rsi > cfg.rsi_sell && j > cfg.j_sell {
        Signal::Sell
    } else {
        Signal::Hold
    }
}

pub fn kdj_rsi_strategy(bars: &[Bar], cfg: &KdjRsiConfig) -> Signal {
    let Ok(rsi) = indicators::rsi(bars, cfg.rsi_period) else {
        return Signal::Hold;
    };
    let Ok(kdj) = indicators::kdj(bars, cfg.kdj_period, cfg.k_smooth, cfg.d_smooth) else {
        return Signal::Hold;
    };
    match (rsi.last(), kdj.j.last()) {
        (Some(r), Some(j)) => kdj_rsi_rule(r, j, cfg),
        _ => Signal::Hold,
    }
}

pub fn zmr_rule(z: f64, cfg: &ZmrConfig) -> Signal {
    if z <= -cfg.entry_z {
        Signal::Buy
    } else if z >= cfg.entry_z {
        Signal::Sell
    } else {
        Signal::Hold
    }
}

/// Z-score of the last close against the trailing window, using the
/// population standard deviation. `None` when history is short or the
/// window is flat.
pub fn zscore(bars: &[Bar], window: usize) -> Option<f64> {
    if window == 0 || bars.len() < window {
        return None;
    }
    let closes: Vec<f64> = bars[bars.len() - window..]
        .iter()
        .map(|b| b.close)
        .collect();
    let mean = closes.iter().sum::<f64>() / window as f64;
    let var = closes.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / window as f64;
    let sd = var.sqrt();
    (sd > 0.0).then(|| (closes[window - 1] - mean) / sd)
}

pub fn zmr_strategy(bars: &[Bar], cfg: &ZmrConfig) -> Signal {
    zscore(bars, cfg.window).map_or(Signal::Hold, |z| zmr_rule(z, cfg))
}

/// Fast/slow simple moving average crossover.
pub fn sma_strategy(bars: &[Bar], cfg: &SmaConfig) -> Signal {
    let (Ok(fast), Ok(slow)) = (
        indicators::sma(bars, cfg.fast),
        indicators::sma(bars, cfg.slow),
    ) else {
        return Signal::Hold;
    };
    crossover(&fast.values(), &slow.values())
}

/// One of the five baselines with its validated configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Baseline {
    BuyAndHold,
    Macd(MacdConfig),
    KdjRsi(KdjRsiConfig),
    Zmr(ZmrConfig),
    Sma(SmaConfig),
}

pub const STRATEGY_NAMES: &[&str] = &["buy_and_hold", "macd", "kdj_rsi", "zmr", "sma"];

impl Baseline {
    /// Builds a strategy from its name and a parameter map; parameters not
    /// given keep their defaults.
    pub fn from_params(name: &str, params: &BTreeMap<String, f64>) -> Result<Self, StrategyError> {
        let unknown = |param: &str| StrategyError::UnknownParameter {
            strategy: name.to_string(),
            param: param.to_string(),
        };
        let baseline = match name {
            "buy_and_hold" | "buy_hold" => {
                if let Some(k) = params.keys().next() {
                    return Err(unknown(k));
                }
                Baseline::BuyAndHold
            }
            "macd" => {
                let mut cfg = MacdConfig::default();
                for (k, &v) in params {
                    match k.as_str() {
                        "fast" => cfg.fast = positive_int(k, v)?,
                        "slow" => cfg.slow = positive_int(k, v)?,
                        "signal" => cfg.signal = positive_int(k, v)?,
                        _ => return Err(unknown(k)),
                    }
                }
                if cfg.fast >= cfg.slow {
                    return Err(invalid("fast", cfg.fast as f64, "must be below slow"));
                }
                Baseline::Macd(cfg)
            }
            "kdj_rsi" => {
                let mut cfg = KdjRsiConfig::default();
                for (k, &v) in params {
                    match k.as_str() {
                        "rsi_period" => cfg.rsi_period = positive_int(k, v)?,
                        "kdj_period" => cfg.kdj_period = positive_int(k, v)?,
                        "k_smooth" => cfg.k_smooth = positive_int(k, v)?,
                        "d_smooth" => cfg.d_smooth = positive_int(k, v)?,
                        "rsi_buy" => cfg.rsi_buy = v,
                        "rsi_sell" => cfg.rsi_sell = v,
                        "j_buy" => cfg.j_buy = v,
                        "j_sell" => cfg.j_sell = v,
                        _ => return Err(unknown(k)),
                    }
                }
                if cfg.rsi_buy.partial_cmp(&cfg.rsi_sell) != Some(Ordering::Less) {
                    return Err(invalid("rsi_buy", cfg.rsi_buy, "must be below rsi_sell"));
                }
                if cfg.j_buy.partial_cmp(&cfg.j_sell) != Some(Ordering::Less) {
                    return Err(invalid("j_buy", cfg.j_buy, "must be below j_sell"));
                }
                Baseline::KdjRsi(cfg)
            }
            "zmr" => {
                let mut cfg = ZmrConfig::default();
                for (k, &v) in params {
                    match k.as_str() {
                        "window" => cfg.window = positive_int(k, v)?,
                        "entry_z" => cfg.entry_z = v,
                        "exit_z" => cfg.exit_z = v,
                        _ => return Err(unknown(k)),
                    }
                }
                if !(cfg.entry_z.is_finite() && cfg.entry_z > 0.0) {
                    return Err(invalid("entry_z", cfg.entry_z, "must be positive"));
                }
                if !(cfg.exit_z >= 0.0 && cfg.exit_z < cfg.entry_z) {
                    return Err(invalid("exit_z", cfg.exit_z, "must lie in [0, entry_z)"));
                }
                if cfg.window < 2 {
                    return Err(invalid("window", cfg.window as f64, "must be at least 2"));
                }
                Baseline::Zmr(cfg)
            }
            "sma" => {
                let mut cfg = SmaConfig::default();
                for (k, &v) in params {
                    match k.as_str() {
                        "fast" => cfg.fast = positive_int(k, v)?,
                        "slow" => cfg.slow = positive_int(k, v)?,
                        _ => return Err(unknown(k)),
                    }
                }
                if cfg.fast >= cfg.slow {
                    return Err(invalid("fast", cfg.fast as f64, "must be below slow"));
                }
                Baseline::Sma(cfg)
            }
            other => return Err(StrategyError::UnknownStrategy(other.to_string())),
        };
        Ok(baseline)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Baseline::BuyAndHold => "buy_and_hold",
            Baseline::Macd(_) => "macd",
            Baseline::KdjRsi(_) => "kdj_rsi",
            Baseline::Zmr(_) => "zmr",
            Baseline::Sma(_) => "sma",
        }
    }

    /// Signal for the last bar of `history`. `day_index` counts trading
    /// days since the start of the simulation.
    pub fn signal(&self, history: &[Bar], day_index: usize) -> Signal {
        match self {
            Baseline::BuyAndHold => buy_and_hold(day_index),
            Baseline::Macd(cfg) => macd_strategy(history, cfg),
            Baseline::KdjRsi(cfg) => kdj_rsi_strategy(history, cfg),
            Baseline::Zmr(cfg) => zmr_strategy(history, cfg),
            Baseline::Sma(cfg) => sma_strategy(history, cfg),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn bars_from(closes: &[f64]) -> Vec<Bar> {
        let start = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap();
        closes
            .iter()
            .enumerate()
            .map(|(i, &c)| Bar {
                date: start + chrono::Duration::days(i as i64),
                open: c,
                high: c,
                low: c,
                close: c,
                adj_close: c,
                volume: 10,
            })
            .collect()
    }

    #[test]
    fn buy_and_hold_days() {
        assert_eq!(buy_and_hold(0), Signal::Buy);
        assert_eq!(buy_and_hold(5), Signal::Hold);
    }

    #[test]
    fn crossover_requires_strict_sides() {
        let s = |v: &[f64]| v.iter().map(|x| Some(*x)).collect::<Vec<_>>();
        assert_eq!(crossover(&s(&[1.0, 3.0]), &s(&[2.0, 2.0])), Signal::Buy);
        assert_eq!(crossover(&s(&[3.0, 1.0]), &s(&[2.0, 2.0])), Signal::Sell);
        assert_eq!(crossover(&s(&[2.0, 3.0]), &s(&[2.0, 2.0])), Signal::Hold);
        assert_eq!(crossover(&s(&[1.0, 2.0]), &s(&[2.0, 2.0])), Signal::Hold);
        assert_eq!(crossover(&[None, Some(3.0)], &s(&[2.0, 2.0])), Signal::Hold);
    }

    #[test]
    fn constant_prices_never_trade() {
        let bars = bars_from(&[50.0; 60]);
        for t in 1..=bars.len() {
            let h = &bars[..t];
            assert_eq!(macd_strategy(h, &MacdConfig::default()), Signal::Hold);
            assert_eq!(sma_strategy(h, &SmaConfig::default()), Signal::Hold);
            assert_eq!(zmr_strategy(h, &ZmrConfig::default()), Signal::Hold);
        }
    }

    #[test]
    fn sma_cross_up_buys() {
        // falls, then jumps: fast SMA(2) overtakes slow SMA(4) on the last bar
        let bars = bars_from(&[10.0, 9.0, 8.0, 7.0, 6.0, 12.0]);
        let cfg = SmaConfig { fast: 2, slow: 4 };
        assert_eq!(sma_strategy(&bars[..5], &cfg), Signal::Hold);
        assert_eq!(sma_strategy(&bars, &cfg), Signal::Buy);
    }

    #[test]
    fn rule_tables() {
        let cfg = KdjRsiConfig::default();
        assert_eq!(kdj_rsi_rule(25.0, 10.0, &cfg), Signal::Buy);
        assert_eq!(kdj_rsi_rule(25.0, 50.0, &cfg), Signal::Hold);
        assert_eq!(kdj_rsi_rule(75.0, 90.0, &cfg), Signal::Sell);
        let z = ZmrConfig::default();
        assert_eq!(zmr_rule(-2.5, &z), Signal::Buy);
        assert_eq!(zmr_rule(0.3, &z), Signal::Hold);
        assert_eq!(zmr_rule(2.0, &z), Signal::Sell);
    }

    #[test]
    fn short_history_holds() {
        let bars = bars_from(&[1.0, 2.0, 3.0]);
        assert_eq!(
            kdj_rsi_strategy(&bars, &KdjRsiConfig::default()),
            Signal::Hold
        );
        assert_eq!(zmr_strategy(&bars, &ZmrConfig::default()), Signal::Hold);
        assert_eq!(macd_strategy(&[], &MacdConfig::default()), Signal::Hold);
    }

    #[test]
    fn params_parse_and_validate() {
        let p = |pairs: &[(&str, f64)]| pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        assert_eq!(
            Baseline::from_params("macd", &p(&[("fast", 5.0)])).unwrap(),
            Baseline::Macd(MacdConfig {
                fast: 5,
                ..Default::default()
            })
        );
        assert!(matches!(
            Baseline::from_params("macd", &p(&[("fast", 26.0), ("slow", 12.0)])),
            Err(StrategyError::InvalidParameter { .. })
        ));
        assert!(matches!(
            Baseline::from_params("sma", &p(&[("window", 3.0)])),
            Err(StrategyError::UnknownParameter { .. })
        ));
        assert!(matches!(
            Baseline::from_params("momentum", &BTreeMap::new()),
            Err(StrategyError::UnknownStrategy(_))
        ));
        assert!(Baseline::from_params("zmr", &p(&[("exit_z", 3.0)])).is_err());
        assert!(Baseline::from_params("sma", &p(&[("fast", 2.5)])).is_err());
        for name in STRATEGY_NAMES {
            assert_eq!(
                Baseline::from_params(name, &BTreeMap::new())
                    .unwrap()
                    .name(),
                *name
            );
        }
    }

    #[test]
    fn signal_parses_case_insensitively() {
        assert_eq!("buy".parse::<Signal>(), Ok(Signal::Buy));
        assert_eq!(" Hold ".parse::<Signal>(), Ok(Signal::Hold));
        assert!("short".parse::<Signal>().is_err());
    }
}
