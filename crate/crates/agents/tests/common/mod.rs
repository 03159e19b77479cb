#![allow(dead_code)]

use chrono::NaiveDate;
use serde_json::Value;
use tradecraft_agents::{Desk, PipelineConfig, ScriptedBackend};
use tradecraft_core::MarketDataStore;
use tradecraft_testkit::shipped;

pub fn store() -> MarketDataStore {
    let dir = shipped::fixtures_dir();
    let mut store = MarketDataStore::new();
    store.load_ohlcv(dir.join("AAPL.csv"), "AAPL").unwrap();
    store.load_aux_json(dir.join("AAPL.json")).unwrap();
    store
}

pub fn agent_days(store: &MarketDataStore) -> Vec<NaiveDate> {
    let all = store
        .trading_days("AAPL", NaiveDate::MIN, NaiveDate::MAX)
        .unwrap();
    all[shipped::AGENT_FIRST_INDEX..shipped::AGENT_FIRST_INDEX + shipped::AGENT_DAYS].to_vec()
}

pub fn shipped_backend() -> ScriptedBackend {
    ScriptedBackend::from_path(shipped::fixtures_dir().join("scripted_5day.json")).unwrap()
}

pub fn backend(entries: &[Value]) -> ScriptedBackend {
    ScriptedBackend::from_json(&serde_json::to_string(entries).unwrap(), "inline").unwrap()
}

pub fn config() -> PipelineConfig {
    PipelineConfig {
        research_rounds: shipped::RESEARCH_ROUNDS as u32,
        risk_rounds: shipped::RISK_ROUNDS as u32,
        ..Default::default()
    }
}

pub fn desk() -> Desk {
    Desk::new(config()).unwrap()
}
