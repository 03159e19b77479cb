mod common;

use chrono::NaiveDate;
use common::{backend, store};
use serde_json::{json, Value};
use tradecraft_agents::pipeline::{
    run_analyst, run_fund_manager, run_research_debate, run_risk_debate, run_trader, AgentError,
};
use tradecraft_agents::protocol::{
    new_day_state, Debate, GlobalState, ProtocolError, Report, Role, Slot,
};
use tradecraft_agents::{Desk, PipelineConfig};
use tradecraft_core::Signal;
use tradecraft_testkit::script::{calls, text};

fn day() -> NaiveDate {
    common::agent_days(&store())[0]
}

fn desk(research: u32, risk: u32) -> Desk {
    Desk::new(PipelineConfig {
        research_rounds: research,
        risk_rounds: risk,
        ..Default::default()
    })
    .unwrap()
}

fn with_reports(research: u32, risk: u32) -> GlobalState {
    let mut s = new_day_state("AAPL", day(), research, risk).unwrap();
    for slot in Slot::ALL {
        s.write_report(
            slot,
            Report {
                author_role: slot.owner(),
                body: "notes".into(),
                key_points: vec![],
                tool_trace: vec![],
            },
        )
        .unwrap();
    }
    s
}

fn debate_entries(rounds: usize, verdict: &str) -> Vec<Value> {
    let d = day();
    let mut v = Vec::new();
    for r in 0..rounds {
        v.push(text("BullResearcher", d, r, "bull point"));
        v.push(text("BearResearcher", d, r, "bear point"));
    }
    v.push(text(
        "Facilitator",
        d,
        0,
        &format!("weighed both\nVERDICT: {verdict}"),
    ));
    v
}

#[test]
fn immediate_text_gives_an_empty_tool_trace() {
    let store = store();
    let d = day();
    let b = backend(&[
        text("NewsAnalyst", d, 0, "Nothing to look up."),
        text("NewsAnalyst", d, 1, "Quiet news day.\n- no catalysts"),
    ]);
    let desk = desk(1, 1);
    let mut s = new_day_state("AAPL", d, 1, 1).unwrap();
    run_analyst(&desk, desk.spec(Role::NewsAnalyst), &mut s, &store, &b).unwrap();
    let r = s.news_report.as_ref().unwrap();
    assert!(r.tool_trace.is_empty());
    assert_eq!(r.key_points, vec!["no catalysts"]);
    // second write to the same slot is refused before any request is made
    let e = run_analyst(&desk, desk.spec(Role::NewsAnalyst), &mut s, &store, &b).unwrap_err();
    assert!(
        matches!(e, AgentError::Protocol(ProtocolError::SlotFilled { .. })),
        "{e}"
    );
}

#[test]
fn unknown_tools_and_bad_arguments_abort() {
    let store = store();
    let d = day();
    let desk = desk(1, 1);
    let b = backend(&[calls("NewsAnalyst", d, 0, vec![("get_foo", json!({}))])]);
    let mut s = new_day_state("AAPL", d, 1, 1).unwrap();
    let e = run_analyst(&desk, desk.spec(Role::NewsAnalyst), &mut s, &store, &b).unwrap_err();
    assert!(e.to_string().contains("get_foo"), "{e}");

    let b = backend(&[calls(
        "NewsAnalyst",
        d,
        0,
        vec![("get_finnhub_news", json!({"ticker": "AAPL"}))],
    )]);
    let e = run_analyst(&desk, desk.spec(Role::NewsAnalyst), &mut s, &store, &b).unwrap_err();
    assert!(
        e.to_string()
            .contains("missing required argument \"start_date\""),
        "{e}"
    );

    // registered, but not one of this analyst's tools
    let b = backend(&[calls(
        "NewsAnalyst",
        d,
        0,
        vec![("get_finnhub_company_profile", json!({"ticker": "AAPL"}))],
    )]);
    let e = run_analyst(&desk, desk.spec(Role::NewsAnalyst), &mut s, &store, &b).unwrap_err();
    assert!(matches!(e, AgentError::ToolNotAllowed { .. }), "{e}");
    assert!(s.news_report.is_none());
}

#[test]
fn tool_loop_stops_at_max_steps() {
    let store = store();
    let d = day();
    let call = json!({"ticker": "AAPL", "start_date": "2024-10-01", "end_date": d.to_string()});
    let entries: Vec<Value> = (0..5)
        .map(|i| {
            calls(
                "NewsAnalyst",
                d,
                i,
                vec![("get_finnhub_news", call.clone())],
            )
        })
        .collect();
    let desk = Desk::new(PipelineConfig {
        max_steps: 3,
        ..Default::default()
    })
    .unwrap();
    let mut s = new_day_state("AAPL", d, 1, 1).unwrap();
    let e = run_analyst(
        &desk,
        desk.spec(Role::NewsAnalyst),
        &mut s,
        &store,
        &backend(&entries),
    )
    .unwrap_err();
    assert_eq!(e.to_string(), "NewsAnalyst: no final answer after 3 steps");
}

#[test]
fn research_debate_round_arithmetic() {
    for (rounds, verdict) in [(1, "BULL"), (2, "bear")] {
        let desk = desk(rounds, 1);
        let mut s = with_reports(rounds, 1);
        run_research_debate(
            &desk,
            &mut s,
            &backend(&debate_entries(rounds as usize, verdict)),
        )
        .unwrap();
        let labels: Vec<u32> = s
            .investment_debate
            .utterances
            .iter()
            .map(|u| u.round)
            .collect();
        let want: Vec<u32> = (1..=rounds).flat_map(|r| [r, r]).collect();
        assert_eq!(labels, want);
        assert_eq!(
            s.investment_debate.verdict.as_ref().unwrap().winner,
            verdict.to_lowercase()
        );
    }
}

#[test]
fn stages_are_gated() {
    let desk = desk(1, 1);
    let b = backend(&debate_entries(1, "BULL"));
    let mut empty = new_day_state("AAPL", day(), 1, 1).unwrap();
    let e = run_research_debate(&desk, &mut empty, &b).unwrap_err();
    assert!(e.to_string().contains("market_report is missing"), "{e}");
    let mut s = with_reports(1, 1);
    let e = run_trader(&desk, &mut s, &b).unwrap_err();
    assert!(
        e.to_string()
            .contains("investment_debate.verdict is missing"),
        "{e}"
    );
    let e = run_risk_debate(&desk, &mut s, &b).unwrap_err();
    assert!(e.to_string().contains("trader_decision is missing"), "{e}");
    let e = run_fund_manager(&desk, &mut s, &b).unwrap_err();
    assert!(e.to_string().contains("trader_decision is missing"), "{e}");
}

fn through_trader(trader_entries: Vec<Value>) -> (Desk, GlobalState, Result<(), AgentError>) {
    let desk = desk(1, 1);
    let mut s = with_reports(1, 1);
    let mut entries = debate_entries(1, "BULL");
    entries.extend(trader_entries);
    let b = backend(&entries);
    run_research_debate(&desk, &mut s, &b).unwrap();
    let r = run_trader(&desk, &mut s, &b);
    (desk, s, r)
}

#[test]
fn trader_parse_and_reprompt() {
    let d = day();
    let (_, s, r) = through_trader(vec![text("Trader", d, 0, "plan\nFINAL DECISION: HOLD")]);
    r.unwrap();
    assert_eq!(s.trader_decision.unwrap().action, Signal::Hold);

    let (_, s, r) = through_trader(vec![
        text("Trader", d, 0, "I like it."),
        text("Trader", d, 1, "Sorry.\nFINAL DECISION: BUY"),
    ]);
    r.unwrap();
    assert_eq!(s.trader_decision.unwrap().action, Signal::Buy);

    let (_, s, r) = through_trader(vec![
        text("Trader", d, 0, "I like it."),
        text("Trader", d, 1, "Still no line."),
    ]);
    let e = r.unwrap_err();
    assert!(
        matches!(
            e,
            AgentError::Unparseable {
                role: Role::Trader,
                ..
            }
        ),
        "{e}"
    );
    assert!(s.trader_decision.is_none());
}

#[test]
fn risk_debate_and_fund_manager_override() {
    let d = day();
    let (desk, mut s, r) = through_trader(vec![text("Trader", d, 0, "FINAL DECISION: BUY")]);
    r.unwrap();
    let b = backend(&[
        text("RiskyAnalyst", d, 0, "go"),
        text("SafeAnalyst", d, 0, "careful"),
        text("NeutralAnalyst", d, 0, "balance"),
        text(
            "Facilitator",
            d,
            0,
            "Adjusted: half the conviction.\nVERDICT: neutral",
        ),
        text("FundManager", d, 0, "Too much risk.\nFINAL DECISION: HOLD"),
    ]);
    let e = run_fund_manager(&desk, &mut s, &b).unwrap_err();
    assert!(
        e.to_string().contains("risk_debate.verdict is missing"),
        "{e}"
    );
    run_risk_debate(&desk, &mut s, &b).unwrap();
    let order: Vec<Role> = s.risk_debate.utterances.iter().map(|u| u.role).collect();
    assert_eq!(
        order,
        vec![Role::RiskyAnalyst, Role::SafeAnalyst, Role::NeutralAnalyst]
    );
    assert_eq!(s.risk_debate.verdict.as_ref().unwrap().winner, "neutral");
    assert!(s
        .risk_debate
        .verdict
        .as_ref()
        .unwrap()
        .rationale
        .contains("half the conviction"));
    // the gated call above never reached the backend, so step 0 is still unused
    assert!(run_fund_manager(&desk, &mut s, &b).unwrap());
    assert_eq!(s.final_decision.as_ref().unwrap().action, Signal::Hold);
    assert!(s.fund_manager_override);
    assert!(s.debate(Debate::Risk).verdict.is_some());
}

#[test]
fn exhausted_script_names_the_key() {
    let desk = desk(1, 1);
    let mut s = with_reports(1, 1);
    let b = backend(&[text("BullResearcher", day(), 0, "only me")]);
    let e = run_research_debate(&desk, &mut s, &b).unwrap_err();
    let msg = e.to_string();
    assert!(
        msg.contains(&format!("role=BearResearcher day={} step=0", day())),
        "{msg}"
    );
    assert!(msg.contains("round 1"), "{msg}");
}
