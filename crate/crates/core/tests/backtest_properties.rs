mod common;

use std::collections::BTreeMap;

use common::shipped_store;
use proptest::prelude::*;
use tradecraft_core::backtest::StrategySource;
use tradecraft_core::backtest::{run_backtest, BacktestConfig, DecisionContext, SourceError};
use tradecraft_core::strategies::{Baseline, Signal};

fn scripted(
    signals: Vec<Signal>,
) -> impl FnMut(&DecisionContext<'_>) -> Result<Signal, SourceError> {
    move |ctx| Ok(signals[ctx.day_index])
}

fn signal_strategy() -> impl Strategy<Value = Vec<Signal>> {
    prop::collection::vec(
        prop_oneof![Just(Signal::Buy), Just(Signal::Sell), Just(Signal::Hold)],
        60,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn accounting_identity_and_cost_monotonicity(signals in signal_strategy(), lo in 0.0f64..30.0, extra in 0.0f64..30.0, short in any::<bool>()) {
        let (raw, store) = shipped_store();
        let (start, end) = (raw[100].date, raw[159].date);
        let mut finals = Vec::new();
        for bps in [lo, lo + extra] {
            let cfg = BacktestConfig { cost_bps: bps, allow_short: short, ..Default::default() };
            let r = run_backtest(&mut scripted(signals.clone()), "AAPL", start, end, &store, &cfg).unwrap();
            for d in &r.days {
                prop_assert!((d.equity - (d.cash + d.position_units * d.close)).abs() <= 1e-9 * d.equity.abs().max(1.0));
            }
            for t in &r.trades {
                prop_assert!((t.cost - t.units.abs() * t.price * bps / 10_000.0).abs() <= 1e-9);
                let close = r.days.iter().find(|d| d.date == t.date).unwrap().close;
                prop_assert_eq!(t.price, close);
            }
            prop_assert_eq!(r.equity_curve[0].date, start);
            finals.push(r.equity_curve.last().unwrap().equity);
        }
        prop_assert!(finals[1] <= finals[0] + 1e-6, "{:?}", finals);
    }
}

#[test]
fn replay_is_bit_identical() {
    let (raw, store) = shipped_store();
    for name in tradecraft_core::strategies::STRATEGY_NAMES {
        let run = || {
            let mut src = StrategySource {
                strategy: Baseline::from_params(name, &BTreeMap::new()).unwrap(),
            };
            run_backtest(
                &mut src,
                "AAPL",
                raw[0].date,
                raw[249].date,
                &store,
                &BacktestConfig::default(),
            )
            .unwrap()
        };
        assert_eq!(run(), run(), "{name}");
    }
}

#[test]
fn first_equity_point_is_initial_capital() {
    let (raw, store) = shipped_store();
    let mut src = StrategySource {
        strategy: Baseline::Sma(Default::default()),
    };
    let cfg = BacktestConfig {
        initial_capital: 25_000.0,
        ..Default::default()
    };
    let r = run_backtest(&mut src, "AAPL", raw[10].date, raw[249].date, &store, &cfg).unwrap();
    assert_eq!(r.equity_curve[0].equity, 25_000.0);
    assert_eq!(r.equity_curve.len(), 240);
}
