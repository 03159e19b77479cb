//! Builders for scripted chat-backend fixtures and auxiliary data documents.
//!
//! Fixture entries follow the `{role, day, step, response}` layout; a
//! response is either `{"text": ...}` or `{"tool_calls": [{name, arguments}]}`.

use chrono::{Duration, NaiveDate};
use rand::Rng;
use serde_json::{json, Value};

use crate::fixtures::rng;

pub fn text(role: &str, day: NaiveDate, step: usize, body: &str) -> Value {
    json!({"role": role, "day": day.to_string(), "step": step, "response": {"text": body}})
}

pub fn calls(role: &str, day: NaiveDate, step: usize, calls: Vec<(&str, Value)>) -> Value {
    let calls: Vec<Value> = calls
        .into_iter()
        .map(|(name, args)| json!({"name": name, "arguments": args}))
        .collect();
    json!({"role": role, "day": day.to_string(), "step": step, "response": {"tool_calls": calls}})
}

/// The technical analyst's retrieval shape: one price pull, then eight
/// indicator reports in a single turn, then a data summary and the final
/// synthesized report.
pub fn technical_analyst(ticker: &str, day: NaiveDate) -> Vec<Value> {
    let d = day.to_string();
    let indicators = [
        "rsi",
        "adx",
        "boll",
        "macd",
        "vwma",
        "atr",
        "supertrend",
        "cci",
    ];
    vec![
        calls(
            "TechnicalAnalyst",
            day,
            0,
            vec![("get_YFin_data", json!({"symbol": ticker, "curr_date": d}))],
        ),
        calls(
            "TechnicalAnalyst",
            day,
            1,
            indicators
                .iter()
                .map(|i| {
                    (
                        "get_stockstats_indicators_report",
                        json!({"symbol": ticker, "indicator": i, "curr_date": d}),
                    )
                })
                .collect(),
        ),
        text(
            "TechnicalAnalyst",
            day,
            2,
            "Collected prices and eight indicator reports.",
        ),
        text(
            "TechnicalAnalyst",
            day,
            3,
            &format!("Technical view for {ticker} on {d}: momentum mixed, volatility moderate."),
        ),
    ]
}

pub fn news_analyst(ticker: &str, day: NaiveDate) -> Vec<Value> {
    let start = (day - Duration::days(7)).to_string();
    let end = day.to_string();
    vec![
        calls(
            "NewsAnalyst",
            day,
            0,
            vec![
                (
                    "get_EODHD_news",
                    json!({"start_date": start, "end_date": end}),
                ),
                (
                    "get_finnhub_news",
                    json!({"ticker": ticker, "start_date": start, "end_date": end}),
                ),
            ],
        ),
        text("NewsAnalyst", day, 1, "Gathered the week's headlines."),
        text(
            "NewsAnalyst",
            day,
            2,
            &format!("News summary for {ticker}: macro steady, sector news positive."),
        ),
    ]
}

pub fn sentiment_analyst(ticker: &str, day: NaiveDate) -> Vec<Value> {
    let start = (day - Duration::days(7)).to_string();
    let end = day.to_string();
    vec![
        calls(
            "SentimentAnalyst",
            day,
            0,
            vec![
                (
                    "get_reddit_stock_info",
                    json!({"query": ticker, "start_date": start, "end_date": end}),
                ),
                (
                    "get_EODHD_sentiment",
                    json!({"ticker": ticker, "start_date": start, "end_date": end}),
                ),
            ],
        ),
        text("SentimentAnalyst", day, 1, "Sentiment scores collected."),
        text(
            "SentimentAnalyst",
            day,
            2,
            &format!("Sentiment for {ticker} is mildly positive."),
        ),
    ]
}

pub fn fundamentals_analyst(ticker: &str, day: NaiveDate) -> Vec<Value> {
    let end = day.to_string();
    vec![
        calls(
            "FundamentalsAnalyst",
            day,
            0,
            vec![("get_finnhub_company_profile", json!({"ticker": ticker}))],
        ),
        calls(
            "FundamentalsAnalyst",
            day,
            1,
            vec![
                (
                    "get_finnhub_company_financials_history",
                    json!({"ticker": ticker, "freq": "quarterly", "end_date": end}),
                ),
                (
                    "get_finnhub_basic_company_financials",
                    json!({"ticker": ticker}),
                ),
                (
                    "get_finnhub_company_insider_sentiment",
                    json!({"ticker": ticker, "curr_date": end}),
                ),
                (
                    "get_finnhub_company_insider_transactions",
                    json!({"ticker": ticker, "curr_date": end}),
                ),
            ],
        ),
        text(
            "FundamentalsAnalyst",
            day,
            2,
            "Financial statements and insider data collected.",
        ),
        text(
            "FundamentalsAnalyst",
            day,
            3,
            &format!("Fundamentals for {ticker}: profitable, richly valued."),
        ),
    ]
}

pub fn action_word(action: i8) -> &'static str {
    match action {
        1 => "BUY",
        -1 => "SELL",
        _ => "HOLD",
    }
}

/// Every entry needed for one full pipeline day.
pub fn full_day(
    ticker: &str,
    day: NaiveDate,
    research_rounds: usize,
    risk_rounds: usize,
    trader: i8,
    manager: i8,
) -> Vec<Value> {
    let mut out = Vec::new();
    out.extend(technical_analyst(ticker, day));
    out.extend(sentiment_analyst(ticker, day));
    out.extend(news_analyst(ticker, day));
    out.extend(fundamentals_analyst(ticker, day));
    for r in 0..research_rounds {
        out.push(text(
            "BullResearcher",
            day,
            r,
            &format!("Bull case, round {}: growth outweighs valuation.", r + 1),
        ));
        out.push(text(
            "BearResearcher",
            day,
            r,
            &format!("Bear case, round {}: valuation and insider selling.", r + 1),
        ));
    }
    let winner = if trader >= 0 { "BULL" } else { "BEAR" };
    out.push(text(
        "Facilitator",
        day,
        0,
        &format!(
            "The stronger argument was made by the {} side.\nVERDICT: {winner}",
            winner.to_lowercase()
        ),
    ));
    out.push(text(
        "Trader",
        day,
        0,
        &format!(
            "Plan follows the research verdict.\nFINAL DECISION: {}",
            action_word(trader)
        ),
    ));
    for r in 0..risk_rounds {
        out.push(text("RiskyAnalyst", day, r, "Lean in; upside dominates."));
        out.push(text(
            "SafeAnalyst",
            day,
            r,
            "Protect capital; volatility is elevated.",
        ));
        out.push(text(
            "NeutralAnalyst",
            day,
            r,
            "Proceed with a stop-loss in place.",
        ));
    }
    out.push(text(
        "Facilitator",
        day,
        1,
        "Adjusted plan: keep the trade, add a stop-loss 5% below entry.\nVERDICT: NEUTRAL",
    ));
    out.push(text(
        "FundManager",
        day,
        0,
        &format!(
            "Approved after risk review.\nFINAL DECISION: {}",
            action_word(manager)
        ),
    ));
    out
}

/// News, sentiment, insider and fundamentals records spread over `days`.
pub fn aux_document(ticker: &str, days: &[NaiveDate], seed: u64) -> Value {
    let mut rng = rng(seed);
    let mut news = Vec::new();
    let mut sentiment = Vec::new();
    let mut insider = Vec::new();
    let mut fundamentals = Vec::new();
    for (i, day) in days.iter().enumerate() {
        let d = day.to_string();
        if i % 2 == 0 {
            news.push(json!({
                "date": d, "source": "finnhub",
                "headline": format!("{ticker} daily wrap #{i}"),
                "body": format!("Session {i} recap for {ticker}."),
            }));
        }
        if i % 3 == 0 {
            news.push(json!({
                "date": d, "source": "reddit",
                "headline": format!("r/stocks thread on {ticker} #{i}"),
                "body": "Retail chatter.",
            }));
        }
        if i % 5 == 0 {
            news.push(json!({
                "date": d, "source": "eodhd",
                "headline": format!("Macro brief #{i}"),
                "body": "Rates and inflation update.",
            }));
        }
        let score: f64 = (rng.random::<f64>() * 2.0 - 1.0) * 0.9;
        sentiment.push(json!({
            "date": d,
            "count": rng.random_range(5..200),
            "normalized_score": (score * 10_000.0).round() / 10_000.0,
        }));
        if i % 20 == 7 {
            insider.push(json!({
                "date": d, "person": format!("Officer {}", i / 20), "kind": "transaction",
                "shares": -(rng.random_range(1_000..50_000) as i64), "price": 100.0 + (i as f64) / 10.0,
            }));
        }
        if i % 21 == 0 {
            insider.push(json!({
                "date": d, "person": "aggregate", "kind": "sentiment",
                "mspr": ((rng.random::<f64>() * 200.0 - 100.0) * 100.0).round() / 100.0,
            }));
        }
        if i % 63 == 0 {
            fundamentals.push(json!({
                "as_of": d,
                "metrics": {
                    "pe_ratio": 30.0 + (i as f64) / 21.0,
                    "gross_margin": 0.46,
                    "roe": 1.57,
                    "current_ratio": 0.87,
                    "eps": 6.0 + (i as f64) / 100.0,
                }
            }));
        }
    }
    json!({
        "ticker": ticker,
        "profile": {"name": format!("{ticker} Inc."), "exchange": "NASDAQ", "industry": "Technology", "country": "US"},
        "news": news,
        "sentiment": sentiment,
        "insider": insider,
        "fundamentals": fundamentals,
    })
}
