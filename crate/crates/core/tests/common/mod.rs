#![allow(dead_code)]

use chrono::NaiveDate;
use tradecraft_core::marketdata::{Bar, MarketDataStore};
use tradecraft_testkit::fixtures::{random_walk, RawBar};
use tradecraft_testkit::shipped;

pub fn to_bars(raw: &[RawBar]) -> Vec<Bar> {
    raw.iter()
        .map(|r| Bar {
            date: r.date,
            open: r.open,
            high: r.high,
            low: r.low,
            close: r.close,
            adj_close: r.close,
            volume: r.volume,
        })
        .collect()
}

pub fn walk(seed: u64, n: usize) -> (Vec<RawBar>, Vec<Bar>) {
    let raw = random_walk(seed, n, NaiveDate::from_ymd_opt(2023, 1, 2).unwrap());
    let bars = to_bars(&raw);
    (raw, bars)
}

/// The shipped 250-bar fixture, loaded through the CSV reader.
pub fn shipped_store() -> (Vec<RawBar>, MarketDataStore) {
    let raw = random_walk(shipped::SEED, shipped::BARS, shipped::start());
    let mut store = MarketDataStore::new();
    let n = store
        .load_ohlcv(shipped::fixtures_dir().join("AAPL.csv"), shipped::TICKER)
        .unwrap();
    assert_eq!(n, shipped::BARS);
    (raw, store)
}

pub fn assert_close(name: &str, got: &[Option<f64>], want: &[Option<f64>], tol: f64) {
    assert_eq!(got.len(), want.len(), "{name}: length");
    for (i, (g, w)) in got.iter().zip(want).enumerate() {
        match (g, w) {
            (None, None) => {}
            (Some(g), Some(w)) => assert!(
                (g - w).abs() <= tol,
                "{name}[{i}]: got {g}, oracle {w}, diff {}",
                (g - w).abs()
            ),
            _ => panic!("{name}[{i}]: definedness differs: got {g:?}, oracle {w:?}"),
        }
    }
}
