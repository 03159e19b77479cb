//! Data tools the analysts may call.
//!
//! Tool names match the data-vendor style names the agents are prompted
//! with, but every handler reads from the local [`MarketDataStore`] through
//! a view clocked at the decision day. Requested end dates later than that
//! day are clamped to it.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use chrono::{Datelike, Duration, NaiveDate};
use serde_json::{json, Map, Value};
use thiserror::Error;
use tradecraft_core::indicators::{self, INDICATOR_NAMES};
use tradecraft_core::marketdata::{InsiderKind, MarketDataError, MarketDataStore, MarketView};

use crate::llm::ToolDescriptor;

#[derive(Debug, Error)]
pub enum ToolError {
    #[error("unknown tool {0:?}")]
    UnknownTool(String),
    #[error("{tool}: invalid arguments: {message}")]
    BadArguments { tool: String, message: String },
    #[error("{tool}: {source}")]
    Data {
        tool: String,
        #[source]
        source: MarketDataError,
    },
}

/// The ticker-day a tool call executes in.
#[derive(Clone, Copy)]
pub struct ToolContext<'a> {
    pub ticker: &'a str,
    pub day: NaiveDate,
    pub view: MarketView<'a>,
}

impl<'a> ToolContext<'a> {
    pub fn new(store: &'a MarketDataStore, ticker: &'a str, day: NaiveDate) -> Self {
        Self {
            ticker,
            day,
            view: store.at(day),
        }
    }

    fn clamp(&self, d: NaiveDate) -> NaiveDate {
        d.min(self.day)
    }
}

#[derive(Debug, Clone, Copy)]
pub enum ParamKind {
    Text,
    Date,
    Count,
    OneOf(&'static [&'static str]),
}

#[derive(Debug, Clone, Copy)]
pub struct Param {
    pub name: &'static str,
    pub kind: ParamKind,
    pub required: bool,
    pub description: &'static str,
}

const fn req(name: &'static str, kind: ParamKind, description: &'static str) -> Param {
    Param {
        name,
        kind,
        required: true,
        description,
    }
}

const fn opt(name: &'static str, kind: ParamKind, description: &'static str) -> Param {
    Param {
        name,
        kind,
        required: false,
        description,
    }
}

/// Validated arguments of one call.
pub struct Args<'m> {
    map: &'m Map<String, Value>,
}

impl Args<'_> {
    fn text(&self, name: &str) -> Option<&str> {
        self.map.get(name).and_then(Value::as_str)
    }

    fn date(&self, name: &str) -> Option<NaiveDate> {
        self.text(name).and_then(|s| s.parse().ok())
    }

    fn count(&self, name: &str) -> Option<u32> {
        self.map.get(name).and_then(Value::as_u64).map(|v| v as u32)
    }
}

type Handler = fn(&ToolContext<'_>, &Args<'_>) -> Result<String, MarketDataError>;

pub struct Tool {
    pub name: &'static str,
    pub description: &'static str,
    pub params: Vec<Param>,
    handler: Handler,
}

impl Tool {
    pub fn schema(&self) -> Value {
        let mut properties = Map::new();
        for p in &self.params {
            let mut s = match p.kind {
                ParamKind::Text => json!({"type": "string"}),
                ParamKind::Date => json!({"type": "string", "format": "date"}),
                ParamKind::Count => json!({"type": "integer", "minimum": 0}),
                ParamKind::OneOf(values) => json!({"type": "string", "enum": values}),
            };
            s["description"] = Value::from(p.description);
            properties.insert(p.name.to_string(), s);
        }
        let required: Vec<&str> = self
            .params
            .iter()
            .filter(|p| p.required)
            .map(|p| p.name)
            .collect();
        json!({
            "type": "object",
            "properties": properties,
            "required": required,
            "additionalProperties": false,
        })
    }

    pub fn descriptor(&self) -> ToolDescriptor {
        ToolDescriptor {
            name: self.name.to_string(),
            description: self.description.to_string(),
            parameters: self.schema(),
        }
    }

    pub fn validate(&self, arguments: &Map<String, Value>) -> Result<(), String> {
        for key in arguments.keys() {
            if !self.params.iter().any(|p| p.name == key) {
                return Err(format!("unexpected argument {key:?}"));
            }
        }
        for p in &self.params {
            let Some(v) = arguments.get(p.name) else {
                if p.required {
                    return Err(format!("missing required argument {:?}", p.name));
                }
                continue;
            };
            let ok = match p.kind {
                ParamKind::Text => v.as_str().is_some_and(|s| !s.trim().is_empty()),
                ParamKind::Date => v.as_str().is_some_and(|s| s.parse::<NaiveDate>().is_ok()),
                ParamKind::Count => v.as_u64().is_some_and(|n| n <= 3650),
                ParamKind::OneOf(values) => v.as_str().is_some_and(|s| values.contains(&s)),
            };
            if !ok {
                let expected = match p.kind {
                    ParamKind::Text => "a non-empty string".to_string(),
                    ParamKind::Date => "a YYYY-MM-DD date".to_string(),
                    ParamKind::Count => "an integer in 0..=3650".to_string(),
                    ParamKind::OneOf(values) => format!("one of {values:?}"),
                };
                return Err(format!("{:?} must be {expected}, got {v}", p.name));
            }
        }
        Ok(())
    }
}

pub struct ToolRegistry {
    tools: BTreeMap<&'static str, Tool>,
}

impl Default for ToolRegistry {
    fn default() -> Self {
        Self::standard()
    }
}

const FREQS: &[&str] = &["quarterly", "annual"];

impl ToolRegistry {
    pub fn standard() -> Self {
        use ParamKind::*;
        let ticker = req("ticker", Text, "Ticker symbol.");
        let start = req("start_date", Date, "First calendar day, inclusive.");
        let end = req(
            "end_date",
            Date,
            "Last calendar day, inclusive; clamped to the trading day.",
        );
        let curr = req(
            "curr_date",
            Date,
            "Reference day; clamped to the trading day.",
        );
        let tools = vec![
            Tool {
                name: "get_YFin_data",
                description:
                    "Daily OHLCV bars for a symbol over a look-back window ending on curr_date.",
                params: vec![
                    req("symbol", Text, "Ticker symbol."),
                    curr,
                    opt(
                        "look_back_days",
                        Count,
                        "Calendar days to look back (default 30).",
                    ),
                ],
                handler: yfin_data,
            },
            Tool {
                name: "get_stockstats_indicators_report",
                description:
                    "Values of one technical indicator over a look-back window ending on curr_date.",
                params: vec![
                    req("symbol", Text, "Ticker symbol."),
                    req("indicator", OneOf(INDICATOR_NAMES), "Indicator name."),
                    curr,
                    opt(
                        "look_back_days",
                        Count,
                        "Calendar days to report (default 30).",
                    ),
                ],
                handler: indicator_report,
            },
            Tool {
                name: "get_finnhub_news",
                description: "Company news headlines between two dates.",
                params: vec![ticker, start, end],
                handler: |c, a| news(c, a, "finnhub"),
            },
            Tool {
                name: "get_EODHD_news",
                description: "Macro and market news between two dates.",
                params: vec![
                    start,
                    end,
                    opt(
                        "ticker",
                        Text,
                        "Ticker symbol (defaults to the one under analysis).",
                    ),
                ],
                handler: |c, a| news(c, a, "eodhd"),
            },
            Tool {
                name: "get_reddit_stock_info",
                description: "Social media posts about a stock between two dates.",
                params: vec![
                    req("query", Text, "Ticker symbol to search for."),
                    start,
                    end,
                ],
                handler: |c, a| news(c, a, "reddit"),
            },
            Tool {
                name: "get_EODHD_sentiment",
                description: "Daily aggregated sentiment scores between two dates.",
                params: vec![ticker, start, end],
                handler: sentiment,
            },
            Tool {
                name: "get_finnhub_company_profile",
                description: "Company name, exchange, industry and country.",
                params: vec![ticker],
                handler: profile,
            },
            Tool {
                name: "get_finnhub_basic_company_financials",
                description: "Latest reported financial metrics.",
                params: vec![ticker],
                handler: basic_financials,
            },
            Tool {
                name: "get_finnhub_company_financials_history",
                description: "Reported financial metrics over time up to end_date.",
                params: vec![
                    ticker,
                    req("freq", OneOf(FREQS), "Reporting frequency."),
                    end,
                ],
                handler: financials_history,
            },
            Tool {
                name: "get_finnhub_company_insider_sentiment",
                description: "Insider sentiment (MSPR) records over a look-back window.",
                params: vec![
                    ticker,
                    curr,
                    opt(
                        "look_back_days",
                        Count,
                        "Calendar days to look back (default 90).",
                    ),
                ],
                handler: |c, a| insider(c, a, InsiderKind::Sentiment),
            },
            Tool {
                name: "get_finnhub_company_insider_transactions",
                description: "Insider transactions over a look-back window.",
                params: vec![
                    ticker,
                    curr,
                    opt(
                        "look_back_days",
                        Count,
                        "Calendar days to look back (default 90).",
                    ),
                ],
                handler: |c, a| insider(c, a, InsiderKind::Transaction),
            },
        ];
        Self {
            tools: tools.into_iter().map(|t| (t.name, t)).collect(),
        }
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.tools.keys().copied().collect()
    }

    pub fn get(&self, name: &str) -> Option<&Tool> {
        self.tools.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tools.contains_key(name)
    }

    pub fn descriptors(&self, names: &[&str]) -> Result<Vec<ToolDescriptor>, ToolError> {
        names
            .iter()
            .map(|n| {
                self.get(n)
                    .map(Tool::descriptor)
                    .ok_or_else(|| ToolError::UnknownTool(n.to_string()))
            })
            .collect()
    }

    /// Every tool's descriptor as one JSON document.
    pub fn schemas_json(&self) -> String {
        let all: Vec<ToolDescriptor> = self.tools.values().map(Tool::descriptor).collect();
        let mut s = serde_json::to_string_pretty(&all).expect("descriptors serialize");
        s.push('\n');
        s
    }

    /// Validates and runs one call. Data errors come back as the
    /// observation so the model can see them; unknown tools and bad
    /// arguments are hard errors.
    pub fn execute(
        &self,
        ctx: &ToolContext<'_>,
        name: &str,
        arguments: &Map<String, Value>,
    ) -> Result<String, ToolError> {
        let tool = self
            .get(name)
            .ok_or_else(|| ToolError::UnknownTool(name.to_string()))?;
        tool.validate(arguments)
            .map_err(|message| ToolError::BadArguments {
                tool: name.to_string(),
                message,
            })?;
        match (tool.handler)(ctx, &Args { map: arguments }) {
            Ok(obs) => Ok(obs),
            Err(source) => {
                let e = ToolError::Data {
                    tool: name.to_string(),
                    source,
                };
                Ok(format!("ERROR: {e}"))
            }
        }
    }
}

fn window(ctx: &ToolContext<'_>, args: &Args<'_>, default_days: u32) -> (NaiveDate, NaiveDate) {
    let end = ctx.clamp(args.date("curr_date").unwrap_or(ctx.day));
    let days = args.count("look_back_days").unwrap_or(default_days).max(1);
    (end - Duration::days(i64::from(days) - 1), end)
}

fn range(ctx: &ToolContext<'_>, args: &Args<'_>) -> Option<(NaiveDate, NaiveDate)> {
    let end = ctx.clamp(args.date("end_date").unwrap_or(ctx.day));
    let start = args.date("start_date").unwrap_or(end);
    (start <= end).then_some((start, end))
}

fn symbol<'a>(ctx: &ToolContext<'a>, args: &'a Args<'_>, key: &str) -> &'a str {
    args.text(key).unwrap_or(ctx.ticker)
}

fn yfin_data(ctx: &ToolContext<'_>, args: &Args<'_>) -> Result<String, MarketDataError> {
    let sym = symbol(ctx, args, "symbol");
    let (start, end) = window(ctx, args, 30);
    let bars = ctx
        .view
        .bars_as_of(sym, end, (end - start).num_days() as u32 + 1)?;
    let mut out = format!(
        "# {sym} daily bars {start} to {end} ({} rows)\n",
        bars.len()
    );
    out.push_str("date,open,high,low,close,adj_close,volume\n");
    for b in bars {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            b.date, b.open, b.high, b.low, b.close, b.adj_close, b.volume
        );
    }
    Ok(out)
}

fn indicator_report(ctx: &ToolContext<'_>, args: &Args<'_>) -> Result<String, MarketDataError> {
    let sym = symbol(ctx, args, "symbol");
    let name = args.text("indicator").unwrap_or_default();
    let (start, end) = window(ctx, args, 30);
    let history = ctx.view.bars_through(sym, end)?;
    let series = match indicators::compute(name, history, &BTreeMap::new()) {
        Ok(s) => s,
        Err(e) => return Ok(format!("ERROR: {e}")),
    };
    let mut out = format!("# {name} for {sym} from {start} to {end}\n");
    for s in &series {
        let params: Vec<String> = s.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let _ = writeln!(out, "## {} ({})", s.name, params.join(", "));
        for (date, value) in s.points.iter().filter(|(d, _)| *d >= start) {
            match value {
                Some(v) => writeln!(out, "{date}: {v:.4}"),
                None => writeln!(out, "{date}: n/a"),
            }
            .ok();
        }
    }
    Ok(out)
}

fn news(ctx: &ToolContext<'_>, args: &Args<'_>, source: &str) -> Result<String, MarketDataError> {
    let sym = symbol(
        ctx,
        args,
        if source == "reddit" {
            "query"
        } else {
            "ticker"
        },
    );
    let Some((start, end)) = range(ctx, args) else {
        return Ok(format!("# no {source} items: empty date range\n"));
    };
    let items: Vec<_> = ctx
        .view
        .news_between(sym, start, end)?
        .into_iter()
        .filter(|n| n.source.eq_ignore_ascii_case(source))
        .collect();
    let mut out = format!(
        "# {source} items for {sym} from {start} to {end} ({} items)\n",
        items.len()
    );
    for n in items {
        let _ = writeln!(out, "[{}] {}\n{}", n.date, n.headline, n.body);
    }
    Ok(out)
}

fn sentiment(ctx: &ToolContext<'_>, args: &Args<'_>) -> Result<String, MarketDataError> {
    let sym = symbol(ctx, args, "ticker");
    let Some((start, end)) = range(ctx, args) else {
        return Ok("# no sentiment: empty date range\n".to_string());
    };
    let points = ctx.view.sentiment_between(sym, start, end)?;
    let mut out =
        format!("# sentiment for {sym} from {start} to {end}\ndate,count,normalized_score\n");
    for p in &points {
        let _ = writeln!(out, "{},{},{}", p.date, p.count, p.normalized_score);
    }
    if !points.is_empty() {
        let mean = points.iter().map(|p| p.normalized_score).sum::<f64>() / points.len() as f64;
        let _ = writeln!(out, "mean_score: {mean:.4}");
    }
    Ok(out)
}

fn profile(ctx: &ToolContext<'_>, args: &Args<'_>) -> Result<String, MarketDataError> {
    let sym = symbol(ctx, args, "ticker");
    Ok(match ctx.view.profile(sym)? {
        Some(p) => format!(
            "# profile for {sym}\nname: {}\nexchange: {}\nindustry: {}\ncountry: {}\n",
            p.name, p.exchange, p.industry, p.country
        ),
        None => format!("# no profile on file for {sym}\n"),
    })
}

fn basic_financials(ctx: &ToolContext<'_>, args: &Args<'_>) -> Result<String, MarketDataError> {
    let sym = symbol(ctx, args, "ticker");
    Ok(match ctx.view.latest_fundamentals(sym, ctx.day)? {
        Some(f) => {
            let mut out = format!("# latest financials for {sym} as of {}\n", f.as_of);
            for (k, v) in &f.metrics {
                let _ = writeln!(out, "{k}: {v}");
            }
            out
        }
        None => format!("# no financials on file for {sym} through {}\n", ctx.day),
    })
}

fn financials_history(ctx: &ToolContext<'_>, args: &Args<'_>) -> Result<String, MarketDataError> {
    let sym = symbol(ctx, args, "ticker");
    let end = ctx.clamp(args.date("end_date").unwrap_or(ctx.day));
    let freq = args.text("freq").unwrap_or("quarterly");
    let mut snaps = ctx.view.fundamentals_between(sym, NaiveDate::MIN, end)?;
    if freq == "annual" {
        // keep the last snapshot of each calendar year
        let mut by_year = BTreeMap::new();
        for s in snaps {
            by_year.insert(s.as_of.year(), s);
        }
        snaps = by_year.into_values().collect();
    }
    let mut out = format!(
        "# {freq} financials for {sym} through {end} ({} reports)\n",
        snaps.len()
    );
    for s in snaps {
        let metrics: Vec<String> = s.metrics.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let _ = writeln!(out, "{}: {}", s.as_of, metrics.join(", "));
    }
    Ok(out)
}

fn insider(
    ctx: &ToolContext<'_>,
    args: &Args<'_>,
    kind: InsiderKind,
) -> Result<String, MarketDataError> {
    let sym = symbol(ctx, args, "ticker");
    let (start, end) = window(ctx, args, 90);
    let records: Vec<_> = ctx
        .view
        .insider_between(sym, start, end)?
        .into_iter()
        .filter(|r| r.kind == kind)
        .collect();
    let label = match kind {
        InsiderKind::Sentiment => "insider sentiment",
        InsiderKind::Transaction => "insider transactions",
    };
    let mut out = format!(
        "# {label} for {sym} from {start} to {end} ({} records)\n",
        records.len()
    );
    for r in records {
        let mut line = format!("{} {}", r.date, r.person);
        if let Some(s) = r.shares {
            let _ = write!(line, " shares={s}");
        }
        if let Some(p) = r.price {
            let _ = write!(line, " price={p}");
        }
        if let Some(m) = r.mspr {
            let _ = write!(line, " mspr={m}");
        }
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}
