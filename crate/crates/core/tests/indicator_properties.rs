mod common;

use common::walk;
use proptest::prelude::*;
use tradecraft_core::indicators as ind;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn outputs_align_and_respect_bounds(seed in 0u64..10_000, n in 1usize..120) {
        let (_, bars) = walk(seed, n);
        let rsi = ind::rsi(&bars, 14).unwrap();
        let kdj = ind::kdj(&bars, 9, 3, 3).unwrap();
        let adx = ind::adx(&bars, 14).unwrap();
        let boll = ind::bollinger(&bars, 20, 2.0).unwrap();
        for s in [&rsi, &kdj.k, &kdj.d, &adx, &boll.upper, &boll.middle, &boll.lower] {
            prop_assert_eq!(s.len(), bars.len());
        }
        for v in rsi.values().into_iter().chain(kdj.k.values()).chain(kdj.d.values()).chain(adx.values()).flatten() {
            prop_assert!((0.0..=100.0).contains(&v), "{}", v);
        }
        for t in 0..bars.len() {
            if let (Some(u), Some(m), Some(l)) = (boll.upper.get(t), boll.middle.get(t), boll.lower.get(t)) {
                prop_assert!(u >= m && m >= l);
            }
        }
    }

    #[test]
    fn appending_bars_keeps_earlier_values(seed in 0u64..10_000, cut in 1usize..99) {
        let (_, bars) = walk(seed, 100);
        let head = &bars[..cut];
        let names = ind::INDICATOR_NAMES;
        for name in names {
            let full = ind::compute(name, &bars, &Default::default()).unwrap();
            let part = ind::compute(name, head, &Default::default()).unwrap();
            for (f, p) in full.iter().zip(&part) {
                prop_assert_eq!(&f.values()[..cut], &p.values()[..], "{}", name);
            }
        }
    }

    #[test]
    fn constant_input_fixed_points(c in 1.0f64..500.0, n in 30usize..80) {
        let (_, mut bars) = walk(1, n);
        for b in bars.iter_mut() {
            b.open = c; b.high = c; b.low = c; b.close = c; b.adj_close = c;
        }
        for s in [ind::sma(&bars, 5).unwrap(), ind::ema(&bars, 5).unwrap(), ind::vwma(&bars, 5).unwrap()] {
            for v in s.values().into_iter().flatten() {
                prop_assert!((v - c).abs() <= 1e-9 * c);
            }
        }
        let m = ind::macd(&bars, 3, 6, 4).unwrap();
        for v in m.macd.values().into_iter().flatten() {
            prop_assert!(v.abs() <= 1e-9 * c);
        }
        for v in ind::atr(&bars, 5).unwrap().values().into_iter().flatten() {
            prop_assert_eq!(v, 0.0);
        }
    }
}
