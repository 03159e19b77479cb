//! Technical indicator kernels over ascending bar series.
//!
//! Every function returns series aligned one-to-one with the input bars.
//! Points inside an indicator's warm-up window are `None`. Smoothing for
//! RSI, ATR and ADX follows Wilder: seed with the simple mean of the first
//! `period` inputs, then `a_t = a_{t-1} + (x_t - a_{t-1}) / period`.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::Serialize;
use thiserror::Error;

use crate::marketdata::Bar;

#[derive(Debug, Error, PartialEq)]
pub enum IndicatorError {
    #[error("{name} must be >= 1, got {value}")]
    NonPositivePeriod { name: &'static str, value: usize },
    #[error("fast period {fast} must be < slow period {slow}")]
    FastNotBelowSlow { fast: usize, slow: usize },
    #[error("{name} must be finite and >= 0, got {value}")]
    InvalidMultiplier { name: &'static str, value: f64 },
    #[error("unknown indicator {0:?}")]
    UnknownIndicator(String),
    #[error("unknown parameter {param:?} for indicator {indicator}")]
    UnknownParameter { indicator: String, param: String },
}

pub type Result<T, E = IndicatorError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndicatorSeries {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    pub points: Vec<(NaiveDate, Option<f64>)>,
}

impl IndicatorSeries {
    fn new(name: &str, params: &[(&str, f64)], bars: &[Bar], values: Vec<Option<f64>>) -> Self {
        debug_assert_eq!(bars.len(), values.len());
        Self {
            name: name.to_string(),
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            points: bars.iter().map(|b| b.date).zip(values).collect(),
        }
    }

    pub fn values(&self) -> Vec<Option<f64>> {
        self.points.iter().map(|(_, v)| *v).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<f64> {
        self.points.get(index).and_then(|(_, v)| *v)
    }

    pub fn last(&self) -> Option<f64> {
        self.points.last().and_then(|(_, v)| *v)
    }
}

fn check_period(name: &'static str, value: usize) -> Result<()> {
    if value == 0 {
        Err(IndicatorError::NonPositivePeriod { name, value })
    } else {
        Ok(())
    }
}

fn check_multiplier(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(IndicatorError::InvalidMultiplier { name, value })
    }
}

fn closes(bars: &[Bar]) -> Vec<f64> {
    bars.iter().map(|b| b.close).collect()
}

/// Rolling mean over a fixed window, recomputed per window so values never
/// depend on accumulated rounding from earlier points.
fn rolling_mean(xs: &[f64], period: usize) -> Vec<Option<f64>> {
    (0..xs.len())
        .map(|t| {
            (t + 1 >= period).then(|| xs[t + 1 - period..=t].iter().sum::<f64>() / period as f64)
        })
        .collect()
}

/// EMA of an optional-valued input: starts at the first run of `period`
/// consecutive defined inputs, seeded by their simple mean.
fn ema_values(xs: &[Option<f64>], period: usize) -> Vec<Option<f64>> {
    let alpha = 2.0 / (period as f64 + 1.0);
    let mut out = vec![None; xs.len()];
    let Some(first) = xs.iter().position(Option::is_some) else {
        return out;
    };
    let seed_end = first + period - 1;
    if seed_end >= xs.len() {
        return out;
    }
    let seed: f64 = xs[first..=seed_end]
        .iter()
        .map(|x| x.unwrap_or(0.0))
        .sum::<f64>()
        / period as f64;
    out[seed_end] = Some(seed);
    let mut prev = seed;
    for t in seed_end + 1..xs.len() {
        let x = xs[t].unwrap_or(prev);
        prev = alpha * x + (1.0 - alpha) * prev;
        out[t] = Some(prev);
    }
    out
}

/// Wilder smoothing of `xs[start..]`, first defined at `start + period - 1`.
fn wilder(xs: &[f64], start: usize, period: usize) -> Vec<Option<f64>> {
    let mut out = vec![None; xs.len()];
    let seed_end = start + period - 1;
    if seed_end >= xs.len() {
        return out;
    }
    let mut avg = xs[start..=seed_end].iter().sum::<f64>() / period as f64;
    out[seed_end] = Some(avg);
    for t in seed_end + 1..xs.len() {
        avg += (xs[t] - avg) / period as f64;
        out[t] = Some(avg);
    }
    out
}

pub fn sma(bars: &[Bar], period: usize) -> Result<IndicatorSeries> {
    check_period("period", period)?;
    let values = rolling_mean(&closes(bars), period);
    Ok(IndicatorSeries::new(
        "sma",
        &[("period", period as f64)],
        bars,
        values,
    ))
}

pub fn ema(bars: &[Bar], period: usize) -> Result<IndicatorSeries> {
    check_period("period", period)?;
    let xs: Vec<Option<f64>> = bars.iter().map(|b| Some(b.close)).collect();
    let values = ema_values(&xs, period);
    Ok(IndicatorSeries::new(
        "ema",
        &[("period", period as f64)],
        bars,
        values,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Macd {
    pub macd: IndicatorSeries,
    pub signal: IndicatorSeries,
    pub histogram: IndicatorSeries,
}

/// MACD line, its signal line and histogram. The MACD line is defined once
/// the slow EMA is; the signal line `signal - 1` points later.
pub fn macd(bars: &[Bar], fast: usize, slow: usize, signal: usize) -> Result<Macd> {
    check_period("fast", fast)?;
    check_period("slow", slow)?;
    check_period("signal", signal)?;
    if fast >= slow {
        return Err(IndicatorError::FastNotBelowSlow { fast, slow });
    }
    let fast_ema = ema(bars, fast)?.values();
    let slow_ema = ema(bars, slow)?.values();
    let line: Vec<Option<f64>> = fast_ema
        .iter()
        .zip(&slow_ema)
        .map(|(f, s)| Some((*f)? - (*s)?))
        .collect();
    let sig = ema_values(&line, signal);
    let hist: Vec<Option<f64>> = line
        .iter()
        .zip(&sig)
        .map(|(m, s)| Some((*m)? - (*s)?))
        .collect();
    let params = [
        ("fast", fast as f64),
        ("slow", slow as f64),
        ("signal", signal as f64),
    ];
    Ok(Macd {
        macd: IndicatorSeries::new("macd", &params, bars, line),
        signal: IndicatorSeries::new("macd_signal", &params, bars, sig),
        histogram: IndicatorSeries::new("macd_hist", &params, bars, hist),
    })
}

/// Relative strength index. Defined from index `period` (it needs `period`
/// price changes). A window with neither gains nor losses reads 50.
pub fn rsi(bars: &[Bar], period: usize) -> Result<IndicatorSeries> {
    check_period("period", period)?;
    let c = closes(bars);
    let n = c.len();
    let mut gains = vec![0.0; n];
    let mut losses = vec![0.0; n];
    for t in 1..n {
        let change = c[t] - c[t - 1];
        gains[t] = change.max(0.0);
        losses[t] = (-change).max(0.0);
    }
    let avg_gain = wilder(&gains, 1.min(n), period);
    let avg_loss = wilder(&losses, 1.min(n), period);
    let values = avg_gain
        .iter()
        .zip(&avg_loss)
        .map(|(g, l)| {
            let (g, l) = ((*g)?, (*l)?);
            Some(if l == 0.0 {
                if g == 0.0 {
                    50.0
                } else {
                    100.0
                }
            } else {
                100.0 - 100.0 / (1.0 + g / l)
            })
        })
        .collect();
    Ok(IndicatorSeries::new(
        "rsi",
        &[("period", period as f64)],
        bars,
        values,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Kdj {
    pub k: IndicatorSeries,
    pub d: IndicatorSeries,
    pub j: IndicatorSeries,
}

/// Raw stochastic value over the trailing `period` bars; a flat window
/// reads 50.
fn rsv(bars: &[Bar], period: usize) -> Vec<Option<f64>> {
    (0..bars.len())
        .map(|t| {
            if t + 1 < period {
                return None;
            }
            let window = &bars[t + 1 - period..=t];
            let hh = window.iter().map(|b| b.high).fold(f64::MIN, f64::max);
            let ll = window.iter().map(|b| b.low).fold(f64::MAX, f64::min);
            Some(if hh == ll {
                50.0
            } else {
                100.0 * (bars[t].close - ll) / (hh - ll)
            })
        })
        .collect()
}

/// KDJ stochastic oscillator. K and D start from 50 and are updated with
/// weight `1/k_smooth` and `1/d_smooth` respectively; `J = 3K - 2D`.
pub fn kdj(bars: &[Bar], period: usize, k_smooth: usize, d_smooth: usize) -> Result<Kdj> {
    check_period("period", period)?;
    check_period("k_smooth", k_smooth)?;
    check_period("d_smooth", d_smooth)?;
    let raw = rsv(bars, period);
    let (wk, wd) = (1.0 / k_smooth as f64, 1.0 / d_smooth as f64);
    let (mut k_prev, mut d_prev) = (50.0, 50.0);
    let mut k = vec![None; bars.len()];
    let mut d = vec![None; bars.len()];
    let mut j = vec![None; bars.len()];
    for (t, r) in raw.iter().enumerate() {
        let Some(r) = r else { continue };
        k_prev = (1.0 - wk) * k_prev + wk * r;
        d_prev = (1.0 - wd) * d_prev + wd * k_prev;
        k[t] = Some(k_prev);
        d[t] = Some(d_prev);
        j[t] = Some(3.0 * k_prev - 2.0 * d_prev);
    }
    let params = [
        ("period", period as f64),
        ("k_smooth", k_smooth as f64),
        ("d_smooth", d_smooth as f64),
    ];
    Ok(Kdj {
        k: IndicatorSeries::new("kdj_k", &params, bars, k),
        d: IndicatorSeries::new("kdj_d", &params, bars, d),
        j: IndicatorSeries::new("kdj_j", &params, bars, j),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bollinger {
    pub upper: IndicatorSeries,
    pub middle: IndicatorSeries,
    pub lower: IndicatorSeries,
}

/// Bollinger bands using the population standard deviation of the window.
pub fn bollinger(bars: &[Bar], period: usize, width: f64) -> Result<Bollinger> {
    check_period("period", period)?;
    check_multiplier("width", width)?;
    let c = closes(bars);
    let n = c.len();
    let mut upper = vec![None; n];
    let mut middle = vec![None; n];
    let mut lower = vec![None; n];
    for t in (period - 1)..n {
        let window = &c[t + 1 - period..=t];
        let mean = window.iter().sum::<f64>() / period as f64;
        let var = window.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / period as f64;
        let band = width * var.sqrt();
        upper[t] = Some(mean + band);
        middle[t] = Some(mean);
        lower[t] = Some(mean - band);
    }
    let params = [("period", period as f64), ("width", width)];
    Ok(Bollinger {
        upper: IndicatorSeries::new("boll_ub", &params, bars, upper),
        middle: IndicatorSeries::new("boll", &params, bars, middle),
        lower: IndicatorSeries::new("boll_lb", &params, bars, lower),
    })
}

/// True range per bar; the first bar has no previous close and uses its
/// high-low range.
pub fn true_range(bars: &[Bar]) -> Vec<f64> {
    bars.iter()
        .enumerate()
        .map(|(t, b)| {
            let hl = b.high - b.low;
            if t == 0 {
                hl
            } else {
                let pc = bars[t - 1].close;
                hl.max((b.high - pc).abs()).max((b.low - pc).abs())
            }
        })
        .collect()
}

/// Average true range, Wilder-smoothed; defined from index `period - 1`.
pub fn atr(bars: &[Bar], period: usize) -> Result<IndicatorSeries> {
    check_period("period", period)?;
    let values = wilder(&true_range(bars), 0, period);
    Ok(IndicatorSeries::new(
        "atr",
        &[("period", period as f64)],
        bars,
        values,
    ))
}

/// Average directional index.
///
/// Directional movement starts at index 1, so +DI/-DI and DX are defined
/// from index `period`, and ADX (Wilder-smoothed DX) from `2 * period - 1`.
/// DX is 0 when +DI + -DI is 0.
pub fn adx(bars: &[Bar], period: usize) -> Result<IndicatorSeries> {
    check_period("period", period)?;
    let n = bars.len();
    let tr = true_range(bars);
    let mut plus_dm = vec![0.0; n];
    let mut minus_dm = vec![0.0; n];
    for t in 1..n {
        let up = bars[t].high - bars[t - 1].high;
        let down = bars[t - 1].low - bars[t].low;
        if up > down && up > 0.0 {
            plus_dm[t] = up;
        }
        if down > up && down > 0.0 {
            minus_dm[t] = down;
        }
    }
    let start = 1.min(n);
    let s_tr = wilder(&tr, start, period);
    let s_plus = wilder(&plus_dm, start, period);
    let s_minus = wilder(&minus_dm, start, period);
    let mut dx = vec![0.0; n];
    let mut first_dx = None;
    for t in 0..n {
        let (Some(str_), Some(sp), Some(sm)) = (s_tr[t], s_plus[t], s_minus[t]) else {
            continue;
        };
        first_dx.get_or_insert(t);
        let (pdi, mdi) = if str_ > 0.0 {
            (100.0 * sp / str_, 100.0 * sm / str_)
        } else {
            (0.0, 0.0)
        };
        let sum = pdi + mdi;
        dx[t] = if sum > 0.0 {
            100.0 * (pdi - mdi).abs() / sum
        } else {
            0.0
        };
    }
    let values = match first_dx {
        Some(start) => wilder(&dx, start, period),
        None => vec![None; n],
    };
    Ok(IndicatorSeries::new(
        "adx",
        &[("period", period as f64)],
        bars,
        values,
    ))
}

/// Commodity channel index; undefined where the mean absolute deviation of
/// the typical price is zero.
pub fn cci(bars: &[Bar], period: usize) -> Result<IndicatorSeries> {
    check_period("period", period)?;
    let tp: Vec<f64> = bars
        .iter()
        .map(|b| (b.high + b.low + b.close) / 3.0)
        .collect();
    let values = (0..tp.len())
        .map(|t| {
            if t + 1 < period {
                return None;
            }
            let window = &tp[t + 1 - period..=t];
            let mean = window.iter().sum::<f64>() / period as f64;
            let mad = window.iter().map(|x| (x - mean).abs()).sum::<f64>() / period as f64;
            (mad > 0.0).then(|| (tp[t] - mean) / (0.015 * mad))
        })
        .collect();
    Ok(IndicatorSeries::new(
        "cci",
        &[("period", period as f64)],
        bars,
        values,
    ))
}

/// Volume-weighted moving average; undefined for a window with zero volume.
pub fn vwma(bars: &[Bar], period: usize) -> Result<IndicatorSeries> {
    check_period("period", period)?;
    let values = (0..bars.len())
        .map(|t| {
            if t + 1 < period {
                return None;
            }
            let window = &bars[t + 1 - period..=t];
            let vol: f64 = window.iter().map(|b| b.volume as f64).sum();
            let pv: f64 = window.iter().map(|b| b.close * b.volume as f64).sum();
            (vol > 0.0).then(|| pv / vol)
        })
        .collect();
    Ok(IndicatorSeries::new(
        "vwma",
        &[("period", period as f64)],
        bars,
        values,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Supertrend {
    pub value: IndicatorSeries,
    /// +1 in an uptrend (value is the lower band), -1 in a downtrend.
    pub direction: IndicatorSeries,
}

/// Supertrend over ATR bands around the bar midpoint.
///
/// Final bands ratchet: the upper band only moves down (and the lower band
/// only up) unless the previous close broke through it. The first defined
/// bar starts in an uptrend when its close is at or above the midpoint.
pub fn supertrend(bars: &[Bar], period: usize, multiplier: f64) -> Result<Supertrend> {
    check_period("period", period)?;
    check_multiplier("multiplier", multiplier)?;
    let n = bars.len();
    let atr = atr(bars, period)?.values();
    let mut value = vec![None; n];
    let mut direction = vec![None; n];
    let mut state: Option<(f64, f64, f64)> = None;
    for t in 0..n {
        let Some(a) = atr[t] else { continue };
        let b = &bars[t];
        let mid = (b.high + b.low) / 2.0;
        let basic_upper = mid + multiplier * a;
        let basic_lower = mid - multiplier * a;
        let (upper, lower, dir) = match state {
            None => (
                basic_upper,
                basic_lower,
                if b.close >= mid { 1.0 } else { -1.0 },
            ),
            Some((prev_upper, prev_lower, prev_dir)) => {
                let prev_close = bars[t - 1].close;
                let upper = if basic_upper < prev_upper || prev_close > prev_upper {
                    basic_upper
                } else {
                    prev_upper
                };
                let lower = if basic_lower > prev_lower || prev_close < prev_lower {
                    basic_lower
                } else {
                    prev_lower
                };
                let dir = if prev_dir > 0.0 {
                    if b.close < lower {
                        -1.0
                    } else {
                        1.0
                    }
                } else if b.close > upper {
                    1.0
                } else {
                    -1.0
                };
                (upper, lower, dir)
            }
        };
        state = Some((upper, lower, dir));
        value[t] = Some(if dir > 0.0 { lower } else { upper });
        direction[t] = Some(dir);
    }
    let params = [("period", period as f64), ("multiplier", multiplier)];
    Ok(Supertrend {
        value: IndicatorSeries::new("supertrend", &params, bars, value),
        direction: IndicatorSeries::new("supertrend_direction", &params, bars, direction),
    })
}

/// Names accepted by [`compute`], in the order they are documented.
pub const INDICATOR_NAMES: &[&str] = &[
    "sma",
    "ema",
    "macd",
    "rsi",
    "kdj",
    "boll",
    "atr",
    "adx",
    "cci",
    "vwma",
    "supertrend",
];

/// Default parameters per indicator name.
pub fn default_params(name: &str) -> Result<BTreeMap<String, f64>> {
    let pairs: &[(&str, f64)] = match name {
        "sma" | "ema" => &[("period", 10.0)],
        "macd" => &[("fast", 12.0), ("slow", 26.0), ("signal", 9.0)],
        "rsi" | "atr" | "adx" | "cci" | "vwma" => &[("period", 14.0)],
        "kdj" => &[("period", 9.0), ("k_smooth", 3.0), ("d_smooth", 3.0)],
        "boll" => &[("period", 20.0), ("width", 2.0)],
        "supertrend" => &[("period", 10.0), ("multiplier", 3.0)],
        other => return Err(IndicatorError::UnknownIndicator(other.to_string())),
    };
    Ok(pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect())
}

/// Computes an indicator by name with `overrides` applied on top of the
/// defaults. Multi-line indicators return every line.
pub fn compute(
    name: &str,
    bars: &[Bar],
    overrides: &BTreeMap<String, f64>,
) -> Result<Vec<IndicatorSeries>> {
    let mut params = default_params(name)?;
    for (key, value) in overrides {
        if !params.contains_key(key) {
            return Err(IndicatorError::UnknownParameter {
                indicator: name.to_string(),
                param: key.clone(),
            });
        }
        params.insert(key.clone(), *value);
    }
    let int = |key: &str| {
        let v = params[key];
        if v.is_finite() && v >= 0.0 {
            v.round() as usize
        } else {
            0
        }
    };
    Ok(match name {
        "sma" => vec![sma(bars, int("period"))?],
        "ema" => vec![ema(bars, int("period"))?],
        "macd" => {
            let m = macd(bars, int("fast"), int("slow"), int("signal"))?;
            vec![m.macd, m.signal, m.histogram]
        }
        "rsi" => vec![rsi(bars, int("period"))?],
        "kdj" => {
            let k = kdj(bars, int("period"), int("k_smooth"), int("d_smooth"))?;
            vec![k.k, k.d, k.j]
        }
        "boll" => {
            let b = bollinger(bars, int("period"), params["width"])?;
            vec![b.middle, b.upper, b.lower]
        }
        "atr" => vec![atr(bars, int("period"))?],
        "adx" => vec![adx(bars, int("period"))?],
        "cci" => vec![cci(bars, int("period"))?],
        "vwma" => vec![vwma(bars, int("period"))?],
        "supertrend" => {
            let s = supertrend(bars, int("period"), params["multiplier"])?;
            vec![s.value, s.direction]
        }
        other => return Err(IndicatorError::UnknownIndicator(other.to_string())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

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
                volume: 100,
            })
            .collect()
    }

    #[test]
    fn sma_examples() {
        let s = sma(&bars_from(&[2.0, 4.0, 6.0]), 3).unwrap();
        assert_eq!(s.values(), vec![None, None, Some(4.0)]);
        let ramp: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(sma(&bars_from(&ramp), 4).unwrap().get(5), Some(4.5));
        assert!(sma(&bars_from(&[5.0; 6]), 3)
            .unwrap()
            .values()
            .iter()
            .flatten()
            .all(|v| *v == 5.0));
        assert_eq!(
            sma(&bars_from(&[1.0]), 0),
            Err(IndicatorError::NonPositivePeriod {
                name: "period",
                value: 0
            })
        );
    }

    #[test]
    fn ema_examples() {
        let constant = ema(&bars_from(&[7.0; 12]), 4).unwrap();
        assert!(constant
            .values()
            .iter()
            .flatten()
            .all(|v| (*v - 7.0).abs() < 1e-12));
        let closes = [3.0, 1.0, 4.0, 1.0, 5.0];
        let e1 = ema(&bars_from(&closes), 1).unwrap();
        assert_eq!(
            e1.values(),
            closes.iter().map(|c| Some(*c)).collect::<Vec<_>>()
        );
        // seed mean(1,2,3)=2; alpha=0.5 -> 3.0, 4.0
        let e3 = ema(&bars_from(&[1.0, 2.0, 3.0, 4.0, 5.0]), 3).unwrap();
        assert_eq!(
            e3.values(),
            vec![None, None, Some(2.0), Some(3.0), Some(4.0)]
        );
    }

    #[test]
    fn macd_rejects_inverted_periods() {
        let bars = bars_from(&[1.0; 40]);
        assert_eq!(
            macd(&bars, 26, 12, 9).unwrap_err(),
            IndicatorError::FastNotBelowSlow { fast: 26, slow: 12 }
        );
        let m = macd(&bars, 12, 26, 9).unwrap();
        assert!(m.macd.values().iter().flatten().all(|v| v.abs() < 1e-12));
        assert!(m
            .histogram
            .values()
            .iter()
            .flatten()
            .all(|v| v.abs() < 1e-12));
        assert_eq!(m.macd.values().iter().position(Option::is_some), Some(25));
        assert_eq!(m.signal.values().iter().position(Option::is_some), Some(33));
    }

    #[test]
    fn rsi_monotone_extremes() {
        let up: Vec<f64> = (1..=30).map(f64::from).collect();
        let down: Vec<f64> = up.iter().rev().copied().collect();
        let r = rsi(&bars_from(&up), 14).unwrap();
        assert_eq!(r.values().iter().position(Option::is_some), Some(14));
        assert!(r.values().iter().flatten().all(|v| *v == 100.0));
        assert!(rsi(&bars_from(&down), 14)
            .unwrap()
            .values()
            .iter()
            .flatten()
            .all(|v| *v == 0.0));
        assert!(rsi(&bars_from(&[3.0; 20]), 14)
            .unwrap()
            .values()
            .iter()
            .flatten()
            .all(|v| *v == 50.0));
    }

    #[test]
    fn kdj_degenerate_and_pinned_windows() {
        let flat = kdj(&bars_from(&[10.0; 12]), 9, 3, 3).unwrap();
        assert!(flat.k.values().iter().flatten().all(|v| *v == 50.0));
        let up: Vec<f64> = (1..=12).map(f64::from).collect();
        assert_eq!(rsv(&bars_from(&up), 9)[11], Some(100.0));
    }

    #[test]
    fn bollinger_width_zero_collapses() {
        let bars = bars_from(&[1.0, 3.0, 2.0, 5.0, 4.0]);
        let b = bollinger(&bars, 3, 0.0).unwrap();
        assert_eq!(b.upper.values(), b.middle.values());
        assert_eq!(b.lower.values(), b.middle.values());
        let c = bollinger(&bars_from(&[4.0; 5]), 3, 2.0).unwrap();
        assert_eq!(c.upper.get(4), Some(4.0));
        assert_eq!(c.lower.get(4), Some(4.0));
    }

    #[test]
    fn true_range_picks_gap() {
        let mut bars = bars_from(&[10.0, 10.0]);
        bars[1] = Bar {
            open: 14.0,
            high: 15.0,
            low: 14.0,
            close: 14.5,
            adj_close: 14.5,
            ..bars[1]
        };
        assert_eq!(true_range(&bars)[1], 5.0);
        let flat = atr(&bars_from(&[3.0; 20]), 14).unwrap();
        assert!(flat.values().iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn adx_flat_is_zero() {
        let a = adx(&bars_from(&[3.0; 40]), 14).unwrap();
        assert_eq!(a.values().iter().position(Option::is_some), Some(27));
        assert!(a.values().iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn cci_undefined_on_constant() {
        let c = cci(&bars_from(&[3.0; 20]), 14).unwrap();
        assert!(c.values().iter().all(Option::is_none));
        // symmetric window: last TP equals window mean
        let c = cci(&bars_from(&[1.0, 3.0, 2.0]), 3).unwrap();
        assert_eq!(c.get(2), Some(0.0));
    }

    #[test]
    fn vwma_cases() {
        let bars = bars_from(&[1.0, 2.0, 6.0, 3.0]);
        assert_eq!(
            vwma(&bars, 3).unwrap().values(),
            sma(&bars, 3).unwrap().values()
        );
        let mut bars = bars;
        for b in bars.iter_mut() {
            b.volume = 0;
        }
        bars[2].volume = 50;
        assert_eq!(vwma(&bars, 3).unwrap().get(3), Some(6.0));
        bars[2].volume = 0;
        assert_eq!(vwma(&bars, 3).unwrap().get(3), None);
    }

    #[test]
    fn compute_by_name() {
        let bars = bars_from(&(1..=40).map(f64::from).collect::<Vec<_>>());
        for name in INDICATOR_NAMES {
            let out = compute(name, &bars, &BTreeMap::new()).unwrap();
            assert!(out.iter().all(|s| s.len() == bars.len()), "{name}");
        }
        assert!(matches!(
            compute("foo", &bars, &BTreeMap::new()),
            Err(IndicatorError::UnknownIndicator(_))
        ));
        let bad = BTreeMap::from([("window".to_string(), 3.0)]);
        assert!(matches!(
            compute("sma", &bars, &bad),
            Err(IndicatorError::UnknownParameter { .. })
        ));
        let short = BTreeMap::from([("period".to_string(), 3.0)]);
        assert_eq!(compute("sma", &bars, &short).unwrap()[0].get(2), Some(2.0));
    }
}
