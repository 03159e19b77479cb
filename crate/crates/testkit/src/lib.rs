//! Test support: seeded fixture generators and independent reference
//! implementations.
//!
//! Nothing here depends on `tradecraft-core`. The oracles are written from
//! the textbook definitions, mostly in closed or brute-force form, so that
//! a shared bug between oracle and implementation is unlikely.

pub mod fixtures;
pub mod oracles;
pub mod script;

pub use fixtures::RawBar;

/// Parameters and renderers for the fixtures committed under `fixtures/`.
pub mod shipped {
    use std::path::PathBuf;

    use chrono::NaiveDate;

    use crate::fixtures::RawBar;
    use crate::script;

    pub const SEED: u64 = 42;
    pub const BARS: usize = 250;
    pub const TICKER: &str = "AAPL";
    /// Index of the first scripted agent day within the bar series.
    pub const AGENT_FIRST_INDEX: usize = 200;
    pub const AGENT_DAYS: usize = 5;
    pub const RESEARCH_ROUNDS: usize = 2;
    pub const RISK_ROUNDS: usize = 1;
    /// (trader, fund manager) actions per scripted day: +1 buy, -1 sell, 0 hold.
    pub const ACTIONS: [(i8, i8); AGENT_DAYS] = [(1, 1), (0, 0), (-1, -1), (1, 0), (0, 1)];

    pub fn start() -> NaiveDate {
        NaiveDate::from_ymd_opt(2024, 1, 2).unwrap()
    }

    pub fn fixtures_dir() -> PathBuf {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
    }

    pub fn agent_days(bars: &[RawBar]) -> Vec<NaiveDate> {
        bars[AGENT_FIRST_INDEX..AGENT_FIRST_INDEX + AGENT_DAYS]
            .iter()
            .map(|b| b.date)
            .collect()
    }

    pub fn aux_json(bars: &[RawBar]) -> String {
        let days: Vec<NaiveDate> = bars.iter().map(|b| b.date).collect();
        let mut s =
            serde_json::to_string_pretty(&script::aux_document(TICKER, &days, SEED)).unwrap();
        s.push('\n');
        s
    }

    pub fn script_entries(bars: &[RawBar]) -> Vec<serde_json::Value> {
        agent_days(bars)
            .into_iter()
            .zip(ACTIONS)
            .flat_map(|(day, (trader, manager))| {
                script::full_day(TICKER, day, RESEARCH_ROUNDS, RISK_ROUNDS, trader, manager)
            })
            .collect()
    }

    pub fn script_json(bars: &[RawBar]) -> String {
        let mut s = serde_json::to_string_pretty(&script_entries(bars)).unwrap();
        s.push('\n');
        s
    }
}
