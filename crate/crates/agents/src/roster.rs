//! Who does what: one [`AgentSpec`] per role.

use serde::{Deserialize, Serialize};

use crate::llm::{ModelTier, Tier, TierConfig};
use crate::protocol::Role;
use crate::tools::ToolRegistry;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub name: String,
    pub role: Role,
    pub goal: String,
    pub constraints: Vec<String>,
    pub tools: Vec<String>,
    /// Tier for the role's reasoning steps. Analyst tool loops always run
    /// on the quick tier regardless.
    pub tier: ModelTier,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SpecError {
    #[error("{role}: tool {tool:?} is not registered")]
    UnregisteredTool { role: Role, tool: String },
    #[error("{role}: analysts need at least one tool")]
    NoTools { role: Role },
    #[error("{role}: only analysts may hold tools")]
    UnexpectedTools { role: Role },
}

impl AgentSpec {
    pub fn validate(&self, registry: &ToolRegistry) -> Result<(), SpecError> {
        if let Some(t) = self.tools.iter().find(|t| !registry.contains(t)) {
            return Err(SpecError::UnregisteredTool {
                role: self.role,
                tool: t.clone(),
            });
        }
        match (self.role.is_analyst(), self.tools.is_empty()) {
            (true, true) => Err(SpecError::NoTools { role: self.role }),
            (false, false) => Err(SpecError::UnexpectedTools { role: self.role }),
            _ => Ok(()),
        }
    }
}

fn goal_and_tools(
    role: Role,
) -> (
    &'static str,
    &'static [&'static str],
    &'static [&'static str],
) {
    const NO_ADVICE: &str = "Report evidence; leave the trading decision to later stages.";
    const AS_OF: &str = "Use only information dated on or before the trading day.";
    match role {
        Role::TechnicalAnalyst => (
            "Assess price action, trend and momentum with technical indicators.",
            &["get_YFin_data", "get_stockstats_indicators_report"],
            &[
                AS_OF,
                NO_ADVICE,
                "Choose complementary indicators; avoid redundant ones.",
            ],
        ),
        Role::SentimentAnalyst => (
            "Gauge short-term market mood from social media and sentiment scores.",
            &["get_reddit_stock_info", "get_EODHD_sentiment"],
            &[AS_OF, NO_ADVICE],
        ),
        Role::NewsAnalyst => (
            "Summarize company and macroeconomic news that could move the stock.",
            &["get_EODHD_news", "get_finnhub_news"],
            &[AS_OF, NO_ADVICE],
        ),
        Role::FundamentalsAnalyst => (
            "Evaluate financial health, valuation and insider activity.",
            &[
                "get_finnhub_company_profile",
                "get_finnhub_company_financials_history",
                "get_finnhub_basic_company_financials",
                "get_finnhub_company_insider_sentiment",
                "get_finnhub_company_insider_transactions",
            ],
            &[AS_OF, NO_ADVICE],
        ),
        Role::BullResearcher => (
            "Argue the investment case for the stock.",
            &[],
            &[
                "Ground every claim in the analyst reports.",
                "Rebut the bear's latest argument.",
            ],
        ),
        Role::BearResearcher => (
            "Argue the case against investing in the stock.",
            &[],
            &[
                "Ground every claim in the analyst reports.",
                "Rebut the bull's latest argument.",
            ],
        ),
        Role::Trader => (
            "Turn the research into a concrete trading decision.",
            &[],
            &[
                "Positions are all-in long, all-in short, or unchanged.",
                "State one final action.",
            ],
        ),
        Role::RiskyAnalyst => (
            "Champion high-reward opportunities in the trader's plan.",
            &[],
            &["Address the other risk analysts' concerns."],
        ),
        Role::SafeAnalyst => (
            "Protect capital and flag downside risk in the trader's plan.",
            &[],
            &["Address the other risk analysts' arguments."],
        ),
        Role::NeutralAnalyst => (
            "Balance reward and risk in the trader's plan.",
            &[],
            &["Address both the risky and the safe analyst."],
        ),
        Role::Facilitator => (
            "Review a debate and record which perspective prevails.",
            &[],
            &["Judge the arguments, not their length."],
        ),
        Role::FundManager => (
            "Approve, adjust or reject the trade after the risk review.",
            &[],
            &["State one final action."],
        ),
    }
}

pub fn default_spec(role: Role, tiers: &TierConfig) -> AgentSpec {
    let (goal, tools, constraints) = goal_and_tools(role);
    AgentSpec {
        name: role.as_str().to_string(),
        role,
        goal: goal.to_string(),
        constraints: constraints.iter().map(|s| s.to_string()).collect(),
        tools: tools.iter().map(|s| s.to_string()).collect(),
        tier: tiers.get(Tier::Deep),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_roster_is_valid() {
        let reg = ToolRegistry::standard();
        for role in Role::ALL {
            let spec = default_spec(role, &TierConfig::default());
            spec.validate(&reg).unwrap();
            assert_eq!(spec.tier.tier, Tier::Deep);
        }
        let mut bad = default_spec(Role::Trader, &TierConfig::default());
        bad.tools.push("get_YFin_data".into());
        assert_eq!(
            bad.validate(&reg),
            Err(SpecError::UnexpectedTools { role: Role::Trader })
        );
        let mut bad = default_spec(Role::NewsAnalyst, &TierConfig::default());
        bad.tools = vec!["get_foo".into()];
        assert!(matches!(
            bad.validate(&reg),
            Err(SpecError::UnregisteredTool { .. })
        ));
        bad.tools.clear();
        assert_eq!(
            bad.validate(&reg),
            Err(SpecError::NoTools {
                role: Role::NewsAnalyst
            })
        );
    }
}
