use chrono::{Datelike, Duration, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawBar {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: u64,
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` consecutive weekdays starting at (or after) `start`.
pub fn weekdays(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d += Duration::days(1);
    }
    out
}

/// Geometric random walk with plausible intraday ranges. Prices are
/// rounded to cents so the series survives a CSV round trip unchanged.
pub fn random_walk(seed: u64, n: usize, start: NaiveDate) -> Vec<RawBar> {
    let mut rng = rng(seed);
    let step = Normal::new(0.0, 0.018).unwrap();
    let cents = |x: f64| (x * 100.0).round() / 100.0;
    let mut prev_close: f64 = 100.0;
    weekdays(start, n)
        .into_iter()
        .map(|date| {
            let open = cents(prev_close * (1.0 + step.sample(&mut rng) * 0.3)).max(1.0);
            let close = cents(prev_close * step.sample(&mut rng).exp()).max(1.0);
            let high = cents(open.max(close) * (1.0 + rng.random::<f64>() * 0.012));
            let low = cents(open.min(close) * (1.0 - rng.random::<f64>() * 0.012)).max(0.5);
            let volume = rng.random_range(1_000_000..60_000_000);
            prev_close = close;
            RawBar {
                date,
                open,
                high,
                low,
                close,
                volume,
            }
        })
        .collect()
}

/// Strictly trending bars: every high, low and close above (or below, with
/// `up = false`) the previous one.
pub fn trend(n: usize, start: NaiveDate, up: bool) -> Vec<RawBar> {
    weekdays(start, n)
        .into_iter()
        .enumerate()
        .map(|(i, date)| {
            let step = i as f64;
            let mid = if up {
                50.0 + 1.5 * step
            } else {
                500.0 - 1.5 * step
            };
            let close = if up { mid + 0.6 } else { mid - 0.6 };
            RawBar {
                date,
                open: mid,
                high: mid + 1.0,
                low: mid - 1.0,
                close,
                volume: 1_000_000,
            }
        })
        .collect()
}

/// Positive equity curve from a seeded random walk of daily returns.
pub fn random_curve(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = rng(seed);
    let step = Normal::new(0.0005, 0.015).unwrap();
    let mut v = 100_000.0;
    (0..n)
        .map(|i| {
            if i > 0 {
                v *= 1.0 + step.sample(&mut rng);
            }
            v
        })
        .collect()
}

pub fn ohlcv_csv(bars: &[RawBar]) -> String {
    let mut s = String::from("date,open,high,low,close,adj_close,volume\n");
    for b in bars {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            b.date, b.open, b.high, b.low, b.close, b.close, b.volume
        ));
    }
    s
}
