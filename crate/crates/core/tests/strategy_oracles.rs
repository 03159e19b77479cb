mod common;

use std::collections::BTreeMap;

use common::{shipped_store, walk};
use tradecraft_core::backtest::{run_backtest, BacktestConfig, StrategySource};
use tradecraft_core::strategies::{Baseline, Signal};
use tradecraft_testkit::oracles as o;
use tradecraft_testkit::shipped;

fn encode(s: Signal) -> i8 {
    match s {
        Signal::Buy => 1,
        Signal::Sell => -1,
        Signal::Hold => 0,
    }
}

fn signals_over(strategy: &Baseline, bars: &[tradecraft_core::Bar]) -> Vec<i8> {
    (0..bars.len())
        .map(|t| encode(strategy.signal(&bars[..=t], t)))
        .collect()
}

fn baseline(name: &str) -> Baseline {
    Baseline::from_params(name, &BTreeMap::new()).unwrap()
}

#[test]
fn shipped_fixture_signals_match_brute_force() {
    let (raw, store) = shipped_store();
    let bars = store
        .unclocked()
        .bars_through(shipped::TICKER, raw[249].date)
        .unwrap();
    let cases: Vec<(&str, Vec<i8>)> = vec![
        (
            "buy_and_hold",
            (0..raw.len()).map(|t| i8::from(t == 0)).collect(),
        ),
        ("macd", o::macd_signals(&raw, 12, 26, 9)),
        (
            "kdj_rsi",
            o::kdj_rsi_signals(&raw, 14, 9, 30.0, 70.0, 20.0, 80.0),
        ),
        ("zmr", o::zmr_signals(&raw, 20, 2.0)),
        ("sma", o::sma_signals(&raw, 10, 30)),
    ];
    for (name, want) in cases {
        let got = signals_over(&baseline(name), bars);
        assert_eq!(got, want, "{name}");
        if name != "buy_and_hold" {
            assert!(
                got.iter().any(|s| *s != 0),
                "{name} never trades on the fixture"
            );
        }
    }
}

#[test]
fn strategies_are_deterministic_and_causal() {
    for seed in [5, 6] {
        let (_, bars) = walk(seed, 180);
        for name in tradecraft_core::strategies::STRATEGY_NAMES {
            let s = baseline(name);
            let first = signals_over(&s, &bars);
            assert_eq!(first, signals_over(&s, &bars), "{name}");
            // future bars changed wholesale: earlier signals unchanged
            for cut in [40, 90, 150] {
                let mut bent = bars.clone();
                for b in bent.iter_mut().skip(cut + 1) {
                    b.close *= 1.7;
                    b.high *= 1.7;
                    b.open *= 1.7;
                    b.low *= 1.7;
                }
                assert_eq!(
                    &signals_over(&s, &bent)[..=cut],
                    &first[..=cut],
                    "{name} @ {cut}"
                );
            }
        }
    }
}

#[test]
fn macd_backtest_matches_ledger_replay() {
    let (raw, store) = shipped_store();
    let closes: Vec<f64> = raw.iter().map(|b| b.close).collect();
    for (cost_bps, allow_short) in [(0.0, true), (10.0, true), (5.0, false)] {
        let cfg = BacktestConfig {
            cost_bps,
            allow_short,
            ..Default::default()
        };
        let mut src = StrategySource {
            strategy: baseline("macd"),
        };
        let report =
            run_backtest(&mut src, "AAPL", raw[0].date, raw[249].date, &store, &cfg).unwrap();
        let want = o::replay_equity(
            &closes,
            &o::macd_signals(&raw, 12, 26, 9),
            100_000.0,
            cost_bps,
            allow_short,
        );
        let got = report.equity_values();
        assert_eq!(got.len(), want.len());
        for (i, (g, w)) in got.iter().zip(&want).enumerate() {
            assert!(
                (g - w).abs() <= 1e-6,
                "bps {cost_bps} short {allow_short} day {i}: {g} vs {w}"
            );
        }
        assert!(!report.trades.is_empty());
    }
}
