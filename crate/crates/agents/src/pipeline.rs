//! One trading day through the desk: analysts, research debate, trader,
//! risk debate, fund manager.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};
use std::thread;

use chrono::NaiveDate;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tradecraft_core::backtest::{DecisionContext, DecisionSource, SourceError};
use tradecraft_core::{MarketDataStore, Signal};

use crate::llm::{
    self, ChatBackend, ChatMessage, CompletionRequest, CompletionResponse, LlmError, Purpose,
    RequestOrigin, TierConfig, ToolDescriptor,
};
use crate::prompts::{PromptError, PromptSet};
use crate::protocol::{
    Debate, Decision, GlobalState, ProtocolError, Report, Role, Slot, ToolCallRecord,
};
use crate::roster::{default_spec, AgentSpec, SpecError};
use crate::tools::{ToolContext, ToolError, ToolRegistry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub research_rounds: u32,
    pub risk_rounds: u32,
    /// Model turns allowed in one analyst tool loop.
    pub max_steps: u32,
    pub temperature: f64,
    pub concurrent_analysts: bool,
    pub tiers: TierConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            research_rounds: 1,
            risk_rounds: 1,
            max_steps: 12,
            temperature: 0.0,
            concurrent_analysts: true,
            tiers: TierConfig::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("{role} ({context}): {source}")]
    Llm {
        role: Role,
        context: String,
        #[source]
        source: LlmError,
    },
    #[error("{role}: {source}")]
    Tool {
        role: Role,
        #[source]
        source: ToolError,
    },
    #[error("{role}: tool {tool:?} is not available to this role")]
    ToolNotAllowed { role: Role, tool: String },
    #[error("{role}: no final answer after {steps} steps")]
    MaxSteps { role: Role, steps: u32 },
    #[error("{role} ({context}): expected text but the model requested tools")]
    UnexpectedToolCalls { role: Role, context: String },
    #[error("{role}: no line matching {expected:?} after one reprompt")]
    Unparseable { role: Role, expected: &'static str },
    #[error("{0} is not an analyst role")]
    NotAnalyst(Role),
    #[error("no {ticker} bar on {day}")]
    MissingBar { ticker: String, day: NaiveDate },
    #[error("invalid pipeline config: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

type Result<T, E = AgentError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Precondition,
    Analysts,
    ResearchDebate,
    Trader,
    RiskDebate,
    FundManager,
    SessionLog,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Precondition => "precondition",
            Stage::Analysts => "analysts",
            Stage::ResearchDebate => "research_debate",
            Stage::Trader => "trader",
            Stage::RiskDebate => "risk_debate",
            Stage::FundManager => "fund_manager",
            Stage::SessionLog => "session_log",
        }
    }
}

#[derive(Debug, Error)]
#[error("{ticker} {day}: stage {}: {source}", stage.as_str())]
pub struct PipelineError {
    pub ticker: String,
    pub day: NaiveDate,
    pub stage: Stage,
    #[source]
    pub source: Box<AgentError>,
}

/// Everything the stages share: config, roster, tools and prompts.
pub struct Desk {
    pub config: PipelineConfig,
    pub registry: ToolRegistry,
    pub prompts: PromptSet,
    /// Where per-day session logs go; `None` keeps them in memory only.
    pub session_dir: Option<PathBuf>,
    specs: BTreeMap<Role, AgentSpec>,
}

impl Desk {
    pub fn new(config: PipelineConfig) -> Result<Self> {
        if config.max_steps == 0 {
            return Err(AgentError::Config("max_steps must be at least 1".into()));
        }
        if config.research_rounds == 0 || config.risk_rounds == 0 {
            return Err(AgentError::Config(
                "debate rounds must be at least 1".into(),
            ));
        }
        if !(config.temperature.is_finite() && config.temperature >= 0.0) {
            return Err(AgentError::Config(format!(
                "temperature {} must be >= 0",
                config.temperature
            )));
        }
        config
            .tiers
            .validate()
            .map_err(|e| AgentError::Config(e.to_string()))?;
        let registry = ToolRegistry::standard();
        let specs: BTreeMap<Role, AgentSpec> = Role::ALL
            .into_iter()
            .map(|r| (r, default_spec(r, &config.tiers)))
            .collect();
        for spec in specs.values() {
            spec.validate(&registry)?;
        }
        Ok(Self {
            config,
            registry,
            prompts: PromptSet::shipped(),
            session_dir: None,
            specs,
        })
    }

    pub fn with_prompts(mut self, prompts: PromptSet) -> Self {
        self.prompts = prompts;
        self
    }

    pub fn with_session_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.session_dir = Some(dir.into());
        self
    }

    pub fn spec(&self, role: Role) -> &AgentSpec {
        &self.specs[&role]
    }

    #[allow(clippy::too_many_arguments)]
    fn request(
        &self,
        backend: &dyn ChatBackend,
        role: Role,
        day: NaiveDate,
        purpose: Purpose,
        messages: Vec<ChatMessage>,
        tools: Vec<ToolDescriptor>,
        context: &str,
    ) -> Result<CompletionResponse> {
        let request = CompletionRequest {
            origin: RequestOrigin { role, day, purpose },
            tier: self.config.tiers.get(purpose.tier()),
            messages,
            available_tools: tools,
            temperature: self.config.temperature,
        };
        llm::complete(backend, &request).map_err(|source| AgentError::Llm {
            role,
            context: context.to_string(),
            source,
        })
    }

    fn ask_text(
        &self,
        backend: &dyn ChatBackend,
        role: Role,
        day: NaiveDate,
        purpose: Purpose,
        messages: Vec<ChatMessage>,
        context: &str,
    ) -> Result<String> {
        match self.request(backend, role, day, purpose, messages, Vec::new(), context)? {
            CompletionResponse::Text(t) => Ok(t),
            CompletionResponse::ToolCalls(_) => Err(AgentError::UnexpectedToolCalls {
                role,
                context: context.into(),
            }),
        }
    }

    /// Asks once, and once more with a format reminder if `parse` finds
    /// nothing in the first reply.
    #[allow(clippy::too_many_arguments)]
    fn ask_parsed<T>(
        &self,
        backend: &dyn ChatBackend,
        role: Role,
        day: NaiveDate,
        purpose: Purpose,
        mut messages: Vec<ChatMessage>,
        expected: &'static str,
        parse: impl Fn(&str) -> Option<T>,
    ) -> Result<(T, String)> {
        let first = self.ask_text(backend, role, day, purpose, messages.clone(), expected)?;
        if let Some(v) = parse(&first) {
            return Ok((v, first));
        }
        tracing::warn!(%role, %day, expected, "reply lacked the required line; reprompting");
        let vars = BTreeMap::from([("expected", expected.to_string())]);
        messages.push(ChatMessage::assistant(first));
        messages.push(ChatMessage::user(
            self.prompts.render("format_reminder", &vars)?,
        ));
        let second = self.ask_text(backend, role, day, purpose, messages, "reprompt")?;
        match parse(&second) {
            Some(v) => Ok((v, second)),
            None => Err(AgentError::Unparseable { role, expected }),
        }
    }

    fn vars(&self, role: Role, state: &GlobalState) -> BTreeMap<&'static str, String> {
        let spec = self.spec(role);
        let tools = if spec.tools.is_empty() {
            "none".to_string()
        } else {
            spec.tools.join(", ")
        };
        BTreeMap::from([
            ("role", role.as_str().to_string()),
            ("ticker", state.ticker.clone()),
            ("day", state.day.to_string()),
            ("goal", spec.goal.clone()),
            (
                "constraints",
                spec.constraints
                    .iter()
                    .map(|c| format!("- {c}"))
                    .collect::<Vec<_>>()
                    .join("\n"),
            ),
            ("tools", tools),
            ("reports", render_reports(state)),
            (
                "investment_transcript",
                render_transcript(state, Debate::Investment),
            ),
            (
                "investment_verdict",
                render_verdict(state, Debate::Investment),
            ),
            (
                "trader_decision",
                render_decision(state.trader_decision.as_ref()),
            ),
            ("risk_transcript", render_transcript(state, Debate::Risk)),
            ("risk_verdict", render_verdict(state, Debate::Risk)),
        ])
    }
}

fn render_reports(state: &GlobalState) -> String {
    let parts: Vec<String> = Slot::ALL
        .into_iter()
        .filter_map(|s| {
            state
                .report(s)
                .map(|r| format!("### {} ({})\n{}", s.field_name(), r.author_role, r.body))
        })
        .collect();
    if parts.is_empty() {
        "(none yet)".into()
    } else {
        parts.join("\n\n")
    }
}

fn render_transcript(state: &GlobalState, which: Debate) -> String {
    let d = state.debate(which);
    if d.utterances.is_empty() {
        return "(no arguments yet)".into();
    }
    d.utterances
        .iter()
        .map(|u| format!("[round {}] {}: {}", u.round, u.role, u.text))
        .collect::<Vec<_>>()
        .join("\n")
}

fn render_verdict(state: &GlobalState, which: Debate) -> String {
    match &state.debate(which).verdict {
        Some(v) => format!("winner: {}\n{}", v.winner, v.rationale),
        None => "(pending)".into(),
    }
}

fn render_decision(d: Option<&Decision>) -> String {
    match d {
        Some(d) => format!("{} by {}\n{}", d.action, d.author_role, d.rationale),
        None => "(pending)".into(),
    }
}

fn decision_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)FINAL DECISION:\s*\**\s*(BUY|SELL|HOLD)\b").expect("valid regex")
    })
}

fn verdict_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)VERDICT:\s*\**\s*([A-Z]+)\b").expect("valid regex"))
}

/// Action from the last line containing `FINAL DECISION: BUY|SELL|HOLD`.
pub fn parse_final_decision(text: &str) -> Option<Signal> {
    text.lines()
        .rev()
        .find_map(|line| decision_re().captures(line))
        .and_then(|c| c[1].parse().ok())
}

/// Label from the last line containing `VERDICT: <label>` with a label
/// valid for `which`.
pub fn parse_verdict(text: &str, which: Debate) -> Option<String> {
    text.lines().rev().find_map(|line| {
        verdict_re()
            .captures(line)
            .map(|c| c[1].to_ascii_lowercase())
            .filter(|label| which.labels().contains(&label.as_str()))
    })
}

/// Bullet lines of a report body.
pub fn key_points(body: &str) -> Vec<String> {
    body.lines()
        .map(str::trim)
        .filter_map(|l| l.strip_prefix("- ").or_else(|| l.strip_prefix("* ")))
        .map(|l| l.trim().to_string())
        .filter(|l| !l.is_empty())
        .collect()
}

fn render_observations(trace: &[ToolCallRecord]) -> String {
    if trace.is_empty() {
        return "(no tool calls)".into();
    }
    trace
        .iter()
        .map(|r| {
            let args = serde_json::Value::Object(r.arguments.clone());
            format!(
                "### [{}] {} {}\n{}",
                r.step,
                r.tool_name,
                args,
                r.observation.trim_end()
            )
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Runs one analyst's tool loop and synthesis without touching the state,
/// so the four analysts can run side by side.
pub fn analyst_report(
    desk: &Desk,
    spec: &AgentSpec,
    state: &GlobalState,
    store: &MarketDataStore,
    backend: &dyn ChatBackend,
) -> Result<Report> {
    let role = spec.role;
    let slot = role.slot().ok_or(AgentError::NotAnalyst(role))?;
    if state.report(slot).is_some() {
        return Err(ProtocolError::SlotFilled {
            slot: slot.field_name(),
        }
        .into());
    }
    let day = state.day;
    let ctx = ToolContext::new(store, &state.ticker, day);
    let names: Vec<&str> = spec.tools.iter().map(String::as_str).collect();
    let descriptors = desk
        .registry
        .descriptors(&names)
        .map_err(|source| AgentError::Tool { role, source })?;
    let vars = desk.vars(role, state);

    let mut messages = vec![
        ChatMessage::system(desk.prompts.render(role.key(), &vars)?),
        ChatMessage::user(format!(
            "Gather the data you need on {} as of {day}.",
            state.ticker
        )),
    ];
    let mut trace: Vec<ToolCallRecord> = Vec::new();
    let mut summary = None;
    for turn in 0..desk.config.max_steps {
        let context = format!("retrieval step {turn}");
        let response = desk.request(
            backend,
            role,
            day,
            Purpose::Retrieval,
            messages.clone(),
            descriptors.clone(),
            &context,
        )?;
        match response {
            CompletionResponse::Text(t) => {
                summary = Some(t);
                break;
            }
            CompletionResponse::ToolCalls(calls) => {
                for call in calls {
                    if !desk.registry.contains(&call.name) {
                        return Err(AgentError::Tool {
                            role,
                            source: ToolError::UnknownTool(call.name),
                        });
                    }
                    if !spec.tools.contains(&call.name) {
                        return Err(AgentError::ToolNotAllowed {
                            role,
                            tool: call.name,
                        });
                    }
                    let observation = desk
                        .registry
                        .execute(&ctx, &call.name, &call.arguments)
                        .map_err(|source| AgentError::Tool { role, source })?;
                    let record = ToolCallRecord {
                        call_id: call.id,
                        tool_name: call.name,
                        arguments: call.arguments,
                        observation,
                        step: trace.len() as u32,
                    };
                    messages.push(ChatMessage::tool_request(record.clone()));
                    messages.push(ChatMessage::tool_result(record.clone()));
                    trace.push(record);
                }
            }
        }
    }
    let summary = summary.ok_or(AgentError::MaxSteps {
        role,
        steps: desk.config.max_steps,
    })?;

    let mut vars = vars;
    vars.insert("retrieval_summary", summary);
    vars.insert("observations", render_observations(&trace));
    let messages = vec![
        ChatMessage::system(desk.prompts.render("analyst_synthesis", &vars)?),
        ChatMessage::user(format!(
            "Write the {} report for {} on {day}.",
            slot.field_name(),
            state.ticker
        )),
    ];
    let body = desk.ask_text(
        backend,
        role,
        day,
        Purpose::Synthesis,
        messages,
        "synthesis",
    )?;
    Ok(Report {
        author_role: role,
        key_points: key_points(&body),
        body,
        tool_trace: trace,
    })
}

/// Runs one analyst and writes its report into the owning slot.
pub fn run_analyst(
    desk: &Desk,
    spec: &AgentSpec,
    state: &mut GlobalState,
    store: &MarketDataStore,
    backend: &dyn ChatBackend,
) -> Result<()> {
    let report = analyst_report(desk, spec, state, store, backend)?;
    let slot = spec.role.slot().ok_or(AgentError::NotAnalyst(spec.role))?;
    state.write_report(slot, report)?;
    Ok(())
}

/// Fills all four analyst slots. Reports are written in slot order
/// whether the analysts ran concurrently or not.
pub fn run_analysts(
    desk: &Desk,
    state: &mut GlobalState,
    store: &MarketDataStore,
    backend: &dyn ChatBackend,
    concurrent: bool,
) -> Result<()> {
    let snapshot: &GlobalState = state;
    let run = |slot: Slot| analyst_report(desk, desk.spec(slot.owner()), snapshot, store, backend);
    let reports: Vec<Result<Report>> = if concurrent {
        thread::scope(|s| {
            let handles: Vec<_> = Slot::ALL
                .into_iter()
                .map(|slot| s.spawn(move || run(slot)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("analyst thread panicked"))
                .collect()
        })
    } else {
        Slot::ALL.into_iter().map(run).collect()
    };
    let reports = reports.into_iter().collect::<Result<Vec<_>>>()?;
    for (slot, report) in Slot::ALL.into_iter().zip(reports) {
        state.write_report(slot, report)?;
    }
    Ok(())
}

fn run_debate(
    desk: &Desk,
    state: &mut GlobalState,
    backend: &dyn ChatBackend,
    which: Debate,
) -> Result<()> {
    let day = state.day;
    while let Some((round, role)) = state.debate(which).next_speaker() {
        let vars = desk.vars(role, state);
        let messages = vec![
            ChatMessage::system(desk.prompts.render(role.key(), &vars)?),
            ChatMessage::user(format!("Round {round}: give your argument.")),
        ];
        let text = desk.ask_text(
            backend,
            role,
            day,
            Purpose::Argument,
            messages,
            &format!("round {round}"),
        )?;
        state.record_utterance(which, role, &text)?;
    }
    let (template, expected) = match which {
        Debate::Investment => ("research_facilitator", "VERDICT: BULL|BEAR"),
        Debate::Risk => ("risk_facilitator", "VERDICT: RISKY|SAFE|NEUTRAL"),
    };
    let vars = desk.vars(Role::Facilitator, state);
    let messages = vec![
        ChatMessage::system(desk.prompts.render(template, &vars)?),
        ChatMessage::user("Review the transcript and record your verdict.".to_string()),
    ];
    let (label, text) = desk.ask_parsed(
        backend,
        Role::Facilitator,
        day,
        Purpose::Verdict,
        messages,
        expected,
        |t| parse_verdict(t, which),
    )?;
    state.record_verdict(which, &label, &text)?;
    Ok(())
}

/// Bull and bear alternate for the configured rounds, then the facilitator
/// picks the prevailing side.
pub fn run_research_debate(
    desk: &Desk,
    state: &mut GlobalState,
    backend: &dyn ChatBackend,
) -> Result<()> {
    state.require_reports()?;
    run_debate(desk, state, backend, Debate::Investment)
}

pub fn run_trader(desk: &Desk, state: &mut GlobalState, backend: &dyn ChatBackend) -> Result<()> {
    state.require_reports()?;
    state.require_verdict(Debate::Investment)?;
    let vars = desk.vars(Role::Trader, state);
    let messages = vec![
        ChatMessage::system(desk.prompts.render(Role::Trader.key(), &vars)?),
        ChatMessage::user("Decide on the trade.".to_string()),
    ];
    let (action, rationale) = desk.ask_parsed(
        backend,
        Role::Trader,
        state.day,
        Purpose::Decision,
        messages,
        "FINAL DECISION: BUY|SELL|HOLD",
        parse_final_decision,
    )?;
    state.set_trader_decision(Decision {
        action,
        rationale,
        author_role: Role::Trader,
    })?;
    Ok(())
}

/// Risky, safe and neutral analysts speak in that order each round; the
/// facilitator then records the adopted perspective and adjusted plan.
pub fn run_risk_debate(
    desk: &Desk,
    state: &mut GlobalState,
    backend: &dyn ChatBackend,
) -> Result<()> {
    state.require_trader_decision()?;
    run_debate(desk, state, backend, Debate::Risk)
}

/// Returns whether the fund manager overrode the trader's action.
pub fn run_fund_manager(
    desk: &Desk,
    state: &mut GlobalState,
    backend: &dyn ChatBackend,
) -> Result<bool> {
    state.require_trader_decision()?;
    state.require_verdict(Debate::Risk)?;
    let vars = desk.vars(Role::FundManager, state);
    let messages = vec![
        ChatMessage::system(desk.prompts.render(Role::FundManager.key(), &vars)?),
        ChatMessage::user("Give your final decision.".to_string()),
    ];
    let (action, rationale) = desk.ask_parsed(
        backend,
        Role::FundManager,
        state.day,
        Purpose::Decision,
        messages,
        "FINAL DECISION: BUY|SELL|HOLD",
        parse_final_decision,
    )?;
    let overridden = state.set_final_decision(Decision {
        action,
        rationale,
        author_role: Role::FundManager,
    })?;
    if overridden {
        let trader = state.trader_decision.as_ref().map(|d| d.action);
        tracing::info!(ticker = %state.ticker, day = %state.day, ?trader, final_action = %action, "fund manager override");
    }
    Ok(overridden)
}

pub fn session_log_path(dir: &Path, day: NaiveDate) -> PathBuf {
    dir.join(format!("{day}.json"))
}

pub fn write_session_log(dir: &Path, state: &GlobalState) -> Result<PathBuf> {
    let io = |path: &Path, e: std::io::Error| AgentError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let path = session_log_path(dir, state.day);
    std::fs::write(&path, state.to_canonical_json()).map_err(|e| io(&path, e))?;
    Ok(path)
}

/// Runs every stage for one ticker-day and returns the completed state and
/// the fund manager's decision.
pub fn run_pipeline(
    ticker: &str,
    day: NaiveDate,
    desk: &Desk,
    store: &MarketDataStore,
    backend: &dyn ChatBackend,
) -> Result<(GlobalState, Decision), PipelineError> {
    let fail = |stage: Stage| {
        move |source: AgentError| PipelineError {
            ticker: ticker.to_string(),
            day,
            stage,
            source: Box::new(source),
        }
    };
    let has_bar = store.at(day).bar_on(ticker, day).ok().flatten().is_some();
    if !has_bar {
        return Err(fail(Stage::Precondition)(AgentError::MissingBar {
            ticker: ticker.to_string(),
            day,
        }));
    }
    let cfg = &desk.config;
    let mut state = GlobalState::new(ticker, day, cfg.research_rounds, cfg.risk_rounds)
        .map_err(|e| fail(Stage::Precondition)(e.into()))?;
    run_analysts(desk, &mut state, store, backend, cfg.concurrent_analysts)
        .map_err(fail(Stage::Analysts))?;
    run_research_debate(desk, &mut state, backend).map_err(fail(Stage::ResearchDebate))?;
    run_trader(desk, &mut state, backend).map_err(fail(Stage::Trader))?;
    run_risk_debate(desk, &mut state, backend).map_err(fail(Stage::RiskDebate))?;
    run_fund_manager(desk, &mut state, backend).map_err(fail(Stage::FundManager))?;
    if let Some(dir) = &desk.session_dir {
        write_session_log(dir, &state).map_err(fail(Stage::SessionLog))?;
    }
    let decision = state
        .final_decision
        .clone()
        .expect("fund manager stage sets the final decision");
    Ok((state, decision))
}

/// Feeds the agent pipeline into the backtester, one pipeline run per day.
pub struct AgentDecisionSource {
    pub desk: Desk,
    pub backend: Arc<dyn ChatBackend>,
    /// Completed states, in decision order.
    pub states: Vec<GlobalState>,
}

impl AgentDecisionSource {
    pub fn new(desk: Desk, backend: Arc<dyn ChatBackend>) -> Self {
        Self {
            desk,
            backend,
            states: Vec::new(),
        }
    }
}

impl DecisionSource for AgentDecisionSource {
    fn name(&self) -> String {
        "agents".to_string()
    }

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Signal, SourceError> {
        let (state, decision) = run_pipeline(
            ctx.ticker,
            ctx.day,
            &self.desk,
            ctx.market.store(),
            self.backend.as_ref(),
        )?;
        self.states.push(state);
        Ok(decision.action)
    }
}
