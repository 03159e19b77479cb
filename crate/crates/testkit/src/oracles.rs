//! Reference implementations written from the definitions.
//!
//! Recursive smoothers (EMA, Wilder, KDJ) are evaluated through their
//! closed-form weighted sums instead of the recurrence.

#![allow(clippy::needless_range_loop)]

use crate::fixtures::RawBar;

pub type Series = Vec<Option<f64>>;

fn closes(bars: &[RawBar]) -> Vec<f64> {
    bars.iter().map(|b| b.close).collect()
}

/// Closed form of `a_t = (1-w) a_{t-1} + w x_t` started from `seed` at
/// index `seed_at`, evaluated at `t`.
fn weighted_from_seed(xs: &[f64], seed: f64, seed_at: usize, t: usize, w: f64) -> f64 {
    let keep = 1.0 - w;
    let mut total = keep.powi((t - seed_at) as i32) * seed;
    for k in seed_at + 1..=t {
        total += w * keep.powi((t - k) as i32) * xs[k];
    }
    total
}

pub fn sma(bars: &[RawBar], period: usize) -> Series {
    let c = closes(bars);
    (0..c.len())
        .map(|t| {
            if t + 1 < period {
                return None;
            }
            let mut s = 0.0;
            for k in (t + 1 - period)..=t {
                s += c[k];
            }
            Some(s / period as f64)
        })
        .collect()
}

fn ema_of(xs: &[f64], offset: usize, period: usize, len: usize) -> Series {
    let mut out = vec![None; len];
    let seed_at = offset + period - 1;
    if seed_at >= len {
        return out;
    }
    let seed = xs[offset..=seed_at].iter().sum::<f64>() / period as f64;
    let w = 2.0 / (period as f64 + 1.0);
    for t in seed_at..len {
        out[t] = Some(weighted_from_seed(xs, seed, seed_at, t, w));
    }
    out
}

pub fn ema(bars: &[RawBar], period: usize) -> Series {
    ema_of(&closes(bars), 0, period, bars.len())
}

pub fn macd(bars: &[RawBar], fast: usize, slow: usize, signal: usize) -> (Series, Series, Series) {
    let n = bars.len();
    let f = ema(bars, fast);
    let s = ema(bars, slow);
    let line: Series = (0..n).map(|t| Some(f[t]? - s[t]?)).collect();
    let dense: Vec<f64> = line.iter().map(|v| v.unwrap_or(0.0)).collect();
    let sig = if n >= slow {
        ema_of(&dense, slow - 1, signal, n)
    } else {
        vec![None; n]
    };
    let hist = (0..n).map(|t| Some(line[t]? - sig[t]?)).collect();
    (line, sig, hist)
}

/// Wilder average of `xs` whose first input is at `first`, seeded by the
/// mean of `period` inputs.
fn wilder_of(xs: &[f64], first: usize, period: usize) -> Series {
    let n = xs.len();
    let mut out = vec![None; n];
    let seed_at = first + period - 1;
    if seed_at >= n {
        return out;
    }
    let seed = xs[first..=seed_at].iter().sum::<f64>() / period as f64;
    for t in seed_at..n {
        out[t] = Some(weighted_from_seed(
            xs,
            seed,
            seed_at,
            t,
            1.0 / period as f64,
        ));
    }
    out
}

pub fn rsi(bars: &[RawBar], period: usize) -> Series {
    let c = closes(bars);
    let n = c.len();
    let mut up = vec![0.0; n];
    let mut down = vec![0.0; n];
    for t in 1..n {
        let diff = c[t] - c[t - 1];
        if diff > 0.0 {
            up[t] = diff;
        } else {
            down[t] = -diff;
        }
    }
    let g = wilder_of(&up, 1, period);
    let l = wilder_of(&down, 1, period);
    (0..n)
        .map(|t| {
            let (g, l) = (g[t]?, l[t]?);
            Some(if g + l == 0.0 {
                50.0
            } else {
                100.0 * g / (g + l)
            })
        })
        .collect()
}

pub fn kdj(
    bars: &[RawBar],
    period: usize,
    k_smooth: usize,
    d_smooth: usize,
) -> (Series, Series, Series) {
    let n = bars.len();
    let mut rsv = vec![0.0; n];
    for t in (period - 1)..n {
        let w = &bars[t + 1 - period..=t];
        let hh = w.iter().map(|b| b.high).fold(f64::NEG_INFINITY, f64::max);
        let ll = w.iter().map(|b| b.low).fold(f64::INFINITY, f64::min);
        rsv[t] = if hh > ll {
            (bars[t].close - ll) / (hh - ll) * 100.0
        } else {
            50.0
        };
    }
    let start = period - 1;
    let mut k = vec![None; n];
    let mut d = vec![None; n];
    let mut j = vec![None; n];
    // virtual seed of 50 one step before the first RSV
    let wk = 1.0 / k_smooth as f64;
    let wd = 1.0 / d_smooth as f64;
    let mut kv = vec![0.0; n];
    for t in start..n {
        let mut v = (1.0 - wk).powi((t - start + 1) as i32) * 50.0;
        for s in start..=t {
            v += wk * (1.0 - wk).powi((t - s) as i32) * rsv[s];
        }
        kv[t] = v;
    }
    for t in start..n {
        let mut v = (1.0 - wd).powi((t - start + 1) as i32) * 50.0;
        for s in start..=t {
            v += wd * (1.0 - wd).powi((t - s) as i32) * kv[s];
        }
        k[t] = Some(kv[t]);
        d[t] = Some(v);
        j[t] = Some(3.0 * kv[t] - 2.0 * v);
    }
    (k, d, j)
}

/// Population variance via E[x^2] - E[x]^2.
pub fn bollinger(bars: &[RawBar], period: usize, width: f64) -> (Series, Series, Series) {
    let c = closes(bars);
    let n = c.len();
    let mut up = vec![None; n];
    let mut mid = vec![None; n];
    let mut lo = vec![None; n];
    for t in (period - 1)..n {
        let w = &c[t + 1 - period..=t];
        let m = w.iter().sum::<f64>() / period as f64;
        let m2 = w.iter().map(|x| x * x).sum::<f64>() / period as f64;
        let sd = (m2 - m * m).max(0.0).sqrt();
        up[t] = Some(m + width * sd);
        mid[t] = Some(m);
        lo[t] = Some(m - width * sd);
    }
    (up, mid, lo)
}

fn true_ranges(bars: &[RawBar]) -> Vec<f64> {
    let mut tr = Vec::with_capacity(bars.len());
    for t in 0..bars.len() {
        let b = bars[t];
        let mut r = b.high - b.low;
        if t > 0 {
            let pc = bars[t - 1].close;
            r = r.max((b.high - pc).abs()).max((pc - b.low).abs());
        }
        tr.push(r);
    }
    tr
}

pub fn atr(bars: &[RawBar], period: usize) -> Series {
    wilder_of(&true_ranges(bars), 0, period)
}

pub fn adx(bars: &[RawBar], period: usize) -> Series {
    let n = bars.len();
    let tr = true_ranges(bars);
    let mut pdm = vec![0.0; n];
    let mut mdm = vec![0.0; n];
    for t in 1..n {
        let up = bars[t].high - bars[t - 1].high;
        let dn = bars[t - 1].low - bars[t].low;
        pdm[t] = if up > dn && up > 0.0 { up } else { 0.0 };
        mdm[t] = if dn > up && dn > 0.0 { dn } else { 0.0 };
    }
    let atr = wilder_of(&tr, 1, period);
    let p = wilder_of(&pdm, 1, period);
    let m = wilder_of(&mdm, 1, period);
    let mut dx = vec![0.0; n];
    for t in period..n {
        let (a, p, m) = (atr[t].unwrap(), p[t].unwrap(), m[t].unwrap());
        if a <= 0.0 {
            continue;
        }
        let (pdi, mdi) = (p / a * 100.0, m / a * 100.0);
        if pdi + mdi > 0.0 {
            dx[t] = (pdi - mdi).abs() / (pdi + mdi) * 100.0;
        }
    }
    if n <= period {
        return vec![None; n];
    }
    wilder_of(&dx, period, period)
}

pub fn cci(bars: &[RawBar], period: usize) -> Series {
    let tp: Vec<f64> = bars
        .iter()
        .map(|b| (b.high + b.low + b.close) / 3.0)
        .collect();
    (0..tp.len())
        .map(|t| {
            if t + 1 < period {
                return None;
            }
            let w = &tp[t + 1 - period..=t];
            let mean = w.iter().sum::<f64>() / period as f64;
            let md = w.iter().map(|x| (x - mean).abs()).sum::<f64>() / period as f64;
            if md == 0.0 {
                None
            } else {
                Some((tp[t] - mean) / (0.015 * md))
            }
        })
        .collect()
}

pub fn vwma(bars: &[RawBar], period: usize) -> Series {
    (0..bars.len())
        .map(|t| {
            if t + 1 < period {
                return None;
            }
            let (mut num, mut den) = (0.0, 0.0);
            for b in &bars[t + 1 - period..=t] {
                num += b.close * b.volume as f64;
                den += b.volume as f64;
            }
            (den != 0.0).then(|| num / den)
        })
        .collect()
}

/// Returns (value, direction).
pub fn supertrend(bars: &[RawBar], period: usize, mult: f64) -> (Series, Series) {
    let n = bars.len();
    let atr = atr(bars, period);
    let mut value = vec![None; n];
    let mut dir = vec![None; n];
    let mut fu = vec![0.0; n];
    let mut fl = vec![0.0; n];
    let mut trend_up = true;
    for t in 0..n {
        let Some(a) = atr[t] else { continue };
        let hl2 = (bars[t].high + bars[t].low) / 2.0;
        let bu = hl2 + mult * a;
        let bl = hl2 - mult * a;
        let c = bars[t].close;
        if t == period - 1 {
            fu[t] = bu;
            fl[t] = bl;
            trend_up = c >= hl2;
        } else {
            let pc = bars[t - 1].close;
            fu[t] = if bu < fu[t - 1] || pc > fu[t - 1] {
                bu
            } else {
                fu[t - 1]
            };
            fl[t] = if bl > fl[t - 1] || pc < fl[t - 1] {
                bl
            } else {
                fl[t - 1]
            };
            trend_up = if trend_up { c >= fl[t] } else { c > fu[t] };
        }
        value[t] = Some(if trend_up { fl[t] } else { fu[t] });
        dir[t] = Some(if trend_up { 1.0 } else { -1.0 });
    }
    (value, dir)
}

// ---------------------------------------------------------------- metrics

pub fn cumulative_return(v: &[f64]) -> f64 {
    100.0 * (v[v.len() - 1] / v[0] - 1.0)
}

/// Annualized return through the log domain.
pub fn annualized_return(v: &[f64]) -> f64 {
    let years = (v.len() - 1) as f64 / 252.0;
    100.0 * ((v[v.len() - 1].ln() - v[0].ln()) / years).exp_m1()
}

/// (raw, annualized) Sharpe with Welford moments.
pub fn sharpe(v: &[f64], rf_annual: f64) -> (f64, f64) {
    let (mut count, mut mean, mut m2) = (0.0, 0.0, 0.0);
    for w in v.windows(2) {
        let r = (w[1] - w[0]) / w[0];
        count += 1.0;
        let delta = r - mean;
        mean += delta / count;
        m2 += delta * (r - mean);
    }
    let sd = (m2 / (count - 1.0)).sqrt();
    let rf = (rf_annual.ln_1p() / 252.0).exp_m1();
    let raw = (mean - rf) / sd;
    (raw, raw * 252f64.sqrt())
}

/// Quadratic scan over every (peak, later trough) pair.
pub fn max_drawdown(v: &[f64]) -> f64 {
    let mut worst = 0.0;
    for i in 0..v.len() {
        for j in i..v.len() {
            let dd = (v[i] - v[j]) / v[i];
            if dd > worst {
                worst = dd;
            }
        }
    }
    worst * 100.0
}

// --------------------------------------------------------------- signals

/// Signals encoded as +1 (buy), -1 (sell), 0 (hold).
pub fn cross_signals(a: &Series, b: &Series) -> Vec<i8> {
    (0..a.len())
        .map(|t| {
            if t == 0 {
                return 0;
            }
            match (a[t - 1], a[t], b[t - 1], b[t]) {
                (Some(a0), Some(a1), Some(b0), Some(b1)) => {
                    if a0 < b0 && a1 > b1 {
                        1
                    } else if a0 > b0 && a1 < b1 {
                        -1
                    } else {
                        0
                    }
                }
                _ => 0,
            }
        })
        .collect()
}

pub fn macd_signals(bars: &[RawBar], fast: usize, slow: usize, signal: usize) -> Vec<i8> {
    let (line, sig, _) = macd(bars, fast, slow, signal);
    cross_signals(&line, &sig)
}

pub fn sma_signals(bars: &[RawBar], fast: usize, slow: usize) -> Vec<i8> {
    cross_signals(&sma(bars, fast), &sma(bars, slow))
}

#[allow(clippy::too_many_arguments)]
pub fn kdj_rsi_signals(
    bars: &[RawBar],
    rsi_period: usize,
    kdj_period: usize,
    rsi_buy: f64,
    rsi_sell: f64,
    j_buy: f64,
    j_sell: f64,
) -> Vec<i8> {
    let r = rsi(bars, rsi_period);
    let (_, _, j) = kdj(bars, kdj_period, 3, 3);
    (0..bars.len())
        .map(|t| match (r[t], j[t]) {
            (Some(r), Some(j)) if r < rsi_buy && j < j_buy => 1,
            (Some(r), Some(j)) if r > rsi_sell && j > j_sell => -1,
            _ => 0,
        })
        .collect()
}

pub fn zmr_signals(bars: &[RawBar], window: usize, entry: f64) -> Vec<i8> {
    let (_, mid, _) = bollinger(bars, window, 1.0);
    let (up, _, _) = bollinger(bars, window, 1.0);
    (0..bars.len())
        .map(|t| {
            let (Some(m), Some(u)) = (mid[t], up[t]) else {
                return 0;
            };
            let sd = u - m;
            if sd <= 1e-12 {
                return 0;
            }
            let z = (bars[t].close - m) / sd;
            if z <= -entry {
                1
            } else if z >= entry {
                -1
            } else {
                0
            }
        })
        .collect()
}

// ---------------------------------------------------------------- ledger

/// Replays +1/0/-1 signals with full-allocation, close-price execution and
/// proportional costs. Returns the per-day equity.
pub fn replay_equity(
    closes: &[f64],
    signals: &[i8],
    capital: f64,
    cost_bps: f64,
    allow_short: bool,
) -> Vec<f64> {
    let fee = cost_bps / 10_000.0;
    let mut cash = capital;
    let mut units: f64 = 0.0;
    let mut out = Vec::with_capacity(closes.len());
    for (&p, &s) in closes.iter().zip(signals) {
        let side: i8 = if units > 0.0 {
            1
        } else if units < 0.0 {
            -1
        } else {
            0
        };
        let wanted: Option<i8> = match s {
            1 if side <= 0 => Some(1),
            -1 if side >= 0 && allow_short => Some(-1),
            -1 if side > 0 => Some(0),
            _ => None,
        };
        if let Some(w) = wanted {
            // liquidate
            cash += units * p - units.abs() * p * fee;
            units = 0.0;
            if w != 0 && cash > 0.0 {
                let new_units = f64::from(w) * cash / (p * (1.0 + fee));
                cash -= new_units * p + new_units.abs() * p * fee;
                units = new_units;
            }
        }
        out.push(cash + units * p);
    }
    out
}
