//! Per-day communication state shared by every agent.
//!
//! Analysts fill typed report slots, researchers and risk analysts append
//! to debate transcripts, facilitators record verdicts, and the trader and
//! fund manager write decisions. Every mutation checks its preconditions so
//! a stage cannot run before the data it depends on exists.

use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;
use tradecraft_core::Signal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    FundamentalsAnalyst,
    SentimentAnalyst,
    NewsAnalyst,
    TechnicalAnalyst,
    BullResearcher,
    BearResearcher,
    Trader,
    RiskyAnalyst,
    SafeAnalyst,
    NeutralAnalyst,
    Facilitator,
    FundManager,
}

impl Role {
    pub const ALL: [Role; 12] = [
        Role::FundamentalsAnalyst,
        Role::SentimentAnalyst,
        Role::NewsAnalyst,
        Role::TechnicalAnalyst,
        Role::BullResearcher,
        Role::BearResearcher,
        Role::Trader,
        Role::RiskyAnalyst,
        Role::SafeAnalyst,
        Role::NeutralAnalyst,
        Role::Facilitator,
        Role::FundManager,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::FundamentalsAnalyst => "FundamentalsAnalyst",
            Role::SentimentAnalyst => "SentimentAnalyst",
            Role::NewsAnalyst => "NewsAnalyst",
            Role::TechnicalAnalyst => "TechnicalAnalyst",
            Role::BullResearcher => "BullResearcher",
            Role::BearResearcher => "BearResearcher",
            Role::Trader => "Trader",
            Role::RiskyAnalyst => "RiskyAnalyst",
            Role::SafeAnalyst => "SafeAnalyst",
            Role::NeutralAnalyst => "NeutralAnalyst",
            Role::Facilitator => "Facilitator",
            Role::FundManager => "FundManager",
        }
    }

    /// Snake-case key used for prompt template file names.
    pub fn key(self) -> &'static str {
        match self {
            Role::FundamentalsAnalyst => "fundamentals_analyst",
            Role::SentimentAnalyst => "sentiment_analyst",
            Role::NewsAnalyst => "news_analyst",
            Role::TechnicalAnalyst => "technical_analyst",
            Role::BullResearcher => "bull_researcher",
            Role::BearResearcher => "bear_researcher",
            Role::Trader => "trader",
            Role::RiskyAnalyst => "risky_analyst",
            Role::SafeAnalyst => "safe_analyst",
            Role::NeutralAnalyst => "neutral_analyst",
            Role::Facilitator => "facilitator",
            Role::FundManager => "fund_manager",
        }
    }

    /// The report slot this role owns, if it is an analyst.
    pub fn slot(self) -> Option<Slot> {
        Slot::ALL.into_iter().find(|s| s.owner() == self)
    }

    pub fn is_analyst(self) -> bool {
        self.slot().is_some()
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Role::ALL
            .into_iter()
            .find(|r| r.as_str() == s || r.key() == s)
            .ok_or_else(|| format!("unknown role {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    Market,
    Sentiment,
    News,
    Fundamentals,
}

impl Slot {
    /// Fixed order used whenever slots are written or rendered in sequence.
    pub const ALL: [Slot; 4] = [
        Slot::Market,
        Slot::Sentiment,
        Slot::News,
        Slot::Fundamentals,
    ];

    pub fn owner(self) -> Role {
        match self {
            Slot::Market => Role::TechnicalAnalyst,
            Slot::Sentiment => Role::SentimentAnalyst,
            Slot::News => Role::NewsAnalyst,
            Slot::Fundamentals => Role::FundamentalsAnalyst,
        }
    }

    pub fn field_name(self) -> &'static str {
        match self {
            Slot::Market => "market_report",
            Slot::Sentiment => "sentiment_report",
            Slot::News => "news_report",
            Slot::Fundamentals => "fundamentals_report",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Debate {
    Investment,
    Risk,
}

impl Debate {
    pub fn participants(self) -> Vec<Role> {
        match self {
            Debate::Investment => vec![Role::BullResearcher, Role::BearResearcher],
            Debate::Risk => vec![Role::RiskyAnalyst, Role::SafeAnalyst, Role::NeutralAnalyst],
        }
    }

    /// Verdict labels the facilitator may record.
    pub fn labels(self) -> &'static [&'static str] {
        match self {
            Debate::Investment => &["bull", "bear"],
            Debate::Risk => &["risky", "safe", "neutral"],
        }
    }

    pub fn field_name(self) -> &'static str {
        match self {
            Debate::Investment => "investment_debate",
            Debate::Risk => "risk_debate",
        }
    }
}

/// One executed tool call and what it returned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCallRecord {
    pub call_id: String,
    pub tool_name: String,
    pub arguments: Map<String, Value>,
    pub observation: String,
    /// Sequential index of the call within its loop.
    pub step: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub author_role: Role,
    pub body: String,
    pub key_points: Vec<String>,
    pub tool_trace: Vec<ToolCallRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub round: u32,
    pub role: Role,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub winner: String,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebateState {
    pub participants: Vec<Role>,
    pub max_rounds: u32,
    pub utterances: Vec<Utterance>,
    pub verdict: Option<Verdict>,
}

impl DebateState {
    pub fn new(debate: Debate, max_rounds: u32) -> Self {
        Self {
            participants: debate.participants(),
            max_rounds,
            utterances: Vec::new(),
            verdict: None,
        }
    }

    /// Round and speaker expected next, or `None` once every round is done.
    pub fn next_speaker(&self) -> Option<(u32, Role)> {
        let k = self.participants.len();
        let n = self.utterances.len();
        let round = (n / k) as u32 + 1;
        (round <= self.max_rounds).then(|| (round, self.participants[n % k]))
    }

    pub fn rounds_complete(&self) -> bool {
        self.next_speaker().is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub action: Signal,
    pub rationale: String,
    pub author_role: Role,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("debate rounds must be at least 1 (got {field}={value})")]
    ZeroRounds { field: &'static str, value: u32 },
    #[error("{slot} is already filled")]
    SlotFilled { slot: &'static str },
    #[error("{role} cannot write {slot}; it belongs to {owner}")]
    WrongRole {
        role: Role,
        slot: &'static str,
        owner: Role,
    },
    #[error("{field} must not be empty")]
    Empty { field: &'static str },
    #[error("{debate}: {role} spoke out of turn (expected {expected} in round {round})")]
    OutOfTurn {
        debate: &'static str,
        role: Role,
        expected: Role,
        round: u32,
    },
    #[error("{debate} is already concluded")]
    Concluded { debate: &'static str },
    #[error(
        "{debate}: verdict before all {max_rounds} rounds finished ({spoken} utterances so far)"
    )]
    PrematureVerdict {
        debate: &'static str,
        max_rounds: u32,
        spoken: usize,
    },
    #[error("{debate}: verdict label {label:?} is not one of {allowed:?}")]
    BadVerdictLabel {
        debate: &'static str,
        label: String,
        allowed: &'static [&'static str],
    },
    #[error("precondition not met: {missing} is missing")]
    Missing { missing: &'static str },
    #[error("{field} already set")]
    DecisionSet { field: &'static str },
    #[error("inconsistent state: {0}")]
    Inconsistent(String),
    #[error("invalid session log: {0}")]
    Json(String),
}

pub type Result<T, E = ProtocolError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalState {
    pub ticker: String,
    pub day: NaiveDate,
    pub market_report: Option<Report>,
    pub sentiment_report: Option<Report>,
    pub news_report: Option<Report>,
    pub fundamentals_report: Option<Report>,
    pub investment_debate: DebateState,
    pub trader_decision: Option<Decision>,
    pub risk_debate: DebateState,
    pub final_decision: Option<Decision>,
    /// Set when the fund manager's action differs from the trader's.
    pub fund_manager_override: bool,
}

pub fn new_day_state(
    ticker: &str,
    day: NaiveDate,
    debate_rounds: u32,
    risk_rounds: u32,
) -> Result<GlobalState> {
    GlobalState::new(ticker, day, debate_rounds, risk_rounds)
}

impl GlobalState {
    pub fn new(ticker: &str, day: NaiveDate, debate_rounds: u32, risk_rounds: u32) -> Result<Self> {
        for (field, value) in [
            ("debate_rounds", debate_rounds),
            ("risk_rounds", risk_rounds),
        ] {
            if value == 0 {
                return Err(ProtocolError::ZeroRounds { field, value });
            }
        }
        if ticker.trim().is_empty() {
            return Err(ProtocolError::Empty { field: "ticker" });
        }
        Ok(Self {
            ticker: ticker.to_string(),
            day,
            market_report: None,
            sentiment_report: None,
            news_report: None,
            fundamentals_report: None,
            investment_debate: DebateState::new(Debate::Investment, debate_rounds),
            trader_decision: None,
            risk_debate: DebateState::new(Debate::Risk, risk_rounds),
            final_decision: None,
            fund_manager_override: false,
        })
    }

    pub fn report(&self, slot: Slot) -> Option<&Report> {
        match slot {
            Slot::Market => self.market_report.as_ref(),
            Slot::Sentiment => self.sentiment_report.as_ref(),
            Slot::News => self.news_report.as_ref(),
            Slot::Fundamentals => self.fundamentals_report.as_ref(),
        }
    }

    fn report_mut(&mut self, slot: Slot) -> &mut Option<Report> {
        match slot {
            Slot::Market => &mut self.market_report,
            Slot::Sentiment => &mut self.sentiment_report,
            Slot::News => &mut self.news_report,
            Slot::Fundamentals => &mut self.fundamentals_report,
        }
    }

    pub fn debate(&self, which: Debate) -> &DebateState {
        match which {
            Debate::Investment => &self.investment_debate,
            Debate::Risk => &self.risk_debate,
        }
    }

    fn debate_mut(&mut self, which: Debate) -> &mut DebateState {
        match which {
            Debate::Investment => &mut self.investment_debate,
            Debate::Risk => &mut self.risk_debate,
        }
    }

    pub fn write_report(&mut self, slot: Slot, report: Report) -> Result<()> {
        let owner = slot.owner();
        if report.author_role != owner {
            return Err(ProtocolError::WrongRole {
                role: report.author_role,
                slot: slot.field_name(),
                owner,
            });
        }
        if report.body.trim().is_empty() {
            return Err(ProtocolError::Empty {
                field: "report body",
            });
        }
        let target = self.report_mut(slot);
        if target.is_some() {
            return Err(ProtocolError::SlotFilled {
                slot: slot.field_name(),
            });
        }
        *target = Some(report);
        Ok(())
    }

    pub fn record_utterance(&mut self, which: Debate, role: Role, text: &str) -> Result<()> {
        let debate = self.debate_mut(which);
        if debate.verdict.is_some() {
            return Err(ProtocolError::Concluded {
                debate: which.field_name(),
            });
        }
        let Some((round, expected)) = debate.next_speaker() else {
            return Err(ProtocolError::Concluded {
                debate: which.field_name(),
            });
        };
        if role != expected {
            return Err(ProtocolError::OutOfTurn {
                debate: which.field_name(),
                role,
                expected,
                round,
            });
        }
        if text.trim().is_empty() {
            return Err(ProtocolError::Empty { field: "utterance" });
        }
        debate.utterances.push(Utterance {
            round,
            role,
            text: text.to_string(),
        });
        Ok(())
    }

    pub fn record_verdict(&mut self, which: Debate, winner: &str, rationale: &str) -> Result<()> {
        let debate = self.debate_mut(which);
        if debate.verdict.is_some() {
            return Err(ProtocolError::Concluded {
                debate: which.field_name(),
            });
        }
        if !debate.rounds_complete() {
            return Err(ProtocolError::PrematureVerdict {
                debate: which.field_name(),
                max_rounds: debate.max_rounds,
                spoken: debate.utterances.len(),
            });
        }
        let label = winner.trim().to_ascii_lowercase();
        if !which.labels().contains(&label.as_str()) {
            return Err(ProtocolError::BadVerdictLabel {
                debate: which.field_name(),
                label,
                allowed: which.labels(),
            });
        }
        if rationale.trim().is_empty() {
            return Err(ProtocolError::Empty {
                field: "verdict rationale",
            });
        }
        debate.verdict = Some(Verdict {
            winner: label,
            rationale: rationale.to_string(),
        });
        Ok(())
    }

    /// First analyst slot that is still empty, in slot order.
    pub fn missing_report(&self) -> Option<Slot> {
        Slot::ALL.into_iter().find(|s| self.report(*s).is_none())
    }

    pub fn require_reports(&self) -> Result<()> {
        match self.missing_report() {
            Some(slot) => Err(ProtocolError::Missing {
                missing: slot.field_name(),
            }),
            None => Ok(()),
        }
    }

    pub fn require_verdict(&self, which: Debate) -> Result<&Verdict> {
        self.debate(which)
            .verdict
            .as_ref()
            .ok_or(ProtocolError::Missing {
                missing: match which {
                    Debate::Investment => "investment_debate.verdict",
                    Debate::Risk => "risk_debate.verdict",
                },
            })
    }

    pub fn require_trader_decision(&self) -> Result<&Decision> {
        self.trader_decision.as_ref().ok_or(ProtocolError::Missing {
            missing: "trader_decision",
        })
    }

    pub fn set_trader_decision(&mut self, decision: Decision) -> Result<()> {
        self.require_reports()?;
        self.require_verdict(Debate::Investment)?;
        check_decision(&decision, Role::Trader, "trader_decision")?;
        if self.trader_decision.is_some() {
            return Err(ProtocolError::DecisionSet {
                field: "trader_decision",
            });
        }
        self.trader_decision = Some(decision);
        Ok(())
    }

    /// Writes the final decision and returns whether it overrides the
    /// trader's action.
    pub fn set_final_decision(&mut self, decision: Decision) -> Result<bool> {
        let trader_action = self.require_trader_decision()?.action;
        self.require_verdict(Debate::Risk)?;
        check_decision(&decision, Role::FundManager, "final_decision")?;
        if self.final_decision.is_some() {
            return Err(ProtocolError::DecisionSet {
                field: "final_decision",
            });
        }
        let overridden = decision.action != trader_action;
        self.fund_manager_override = overridden;
        self.final_decision = Some(decision);
        Ok(overridden)
    }

    pub fn is_complete(&self) -> bool {
        self.final_decision.is_some()
    }

    /// Checks every invariant, for states that did not come from the
    /// mutators above (e.g. a reloaded session log).
    pub fn validate(&self) -> Result<()> {
        let mut replay = GlobalState::new(
            &self.ticker,
            self.day,
            self.investment_debate.max_rounds,
            self.risk_debate.max_rounds,
        )?;
        for slot in Slot::ALL {
            if let Some(r) = self.report(slot) {
                replay.write_report(slot, r.clone())?;
            }
        }
        for which in [Debate::Investment, Debate::Risk] {
            let d = self.debate(which);
            if d.participants != which.participants() {
                return Err(ProtocolError::Inconsistent(format!(
                    "{} participants {:?}",
                    which.field_name(),
                    d.participants
                )));
            }
            for u in &d.utterances {
                let expected_round = replay.debate(which).next_speaker().map(|(r, _)| r);
                replay.record_utterance(which, u.role, &u.text)?;
                if expected_round != Some(u.round) {
                    return Err(ProtocolError::Inconsistent(format!(
                        "{} utterance by {} labeled round {}",
                        which.field_name(),
                        u.role,
                        u.round
                    )));
                }
            }
            if let Some(v) = &d.verdict {
                replay.record_verdict(which, &v.winner, &v.rationale)?;
            }
            if which == Debate::Investment {
                if let Some(t) = &self.trader_decision {
                    replay.set_trader_decision(t.clone())?;
                }
            }
        }
        if let Some(f) = &self.final_decision {
            replay.set_final_decision(f.clone())?;
        }
        if replay != *self {
            return Err(ProtocolError::Inconsistent(
                "override flag does not match decisions".into(),
            ));
        }
        Ok(())
    }

    /// Stable pretty JSON with a trailing newline. Struct fields serialize in
    /// declaration order and argument maps in key order.
    pub fn to_canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("state serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let state: GlobalState =
            serde_json::from_str(text).map_err(|e| ProtocolError::Json(e.to_string()))?;
        state.validate()?;
        Ok(state)
    }
}

fn check_decision(decision: &Decision, author: Role, field: &'static str) -> Result<()> {
    if decision.author_role != author {
        return Err(ProtocolError::WrongRole {
            role: decision.author_role,
            slot: field,
            owner: author,
        });
    }
    if decision.rationale.trim().is_empty() {
        return Err(ProtocolError::Empty {
            field: "decision rationale",
        });
    }
    Ok(())
}
