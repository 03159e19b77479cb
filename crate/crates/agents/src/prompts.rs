//! Prompt templates.
//!
//! The shipped templates live in `prompts/` and are compiled in. A directory
//! passed to [`PromptSet::with_overrides`] may replace any of them by file
//! name. Placeholders are written `{{name}}`.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

const SHIPPED: &[(&str, &str)] = &[
    (
        "technical_analyst",
        include_str!("../prompts/technical_analyst.txt"),
    ),
    (
        "sentiment_analyst",
        include_str!("../prompts/sentiment_analyst.txt"),
    ),
    ("news_analyst", include_str!("../prompts/news_analyst.txt")),
    (
        "fundamentals_analyst",
        include_str!("../prompts/fundamentals_analyst.txt"),
    ),
    (
        "analyst_synthesis",
        include_str!("../prompts/analyst_synthesis.txt"),
    ),
    (
        "bull_researcher",
        include_str!("../prompts/bull_researcher.txt"),
    ),
    (
        "bear_researcher",
        include_str!("../prompts/bear_researcher.txt"),
    ),
    (
        "research_facilitator",
        include_str!("../prompts/research_facilitator.txt"),
    ),
    ("trader", include_str!("../prompts/trader.txt")),
    (
        "risky_analyst",
        include_str!("../prompts/risky_analyst.txt"),
    ),
    ("safe_analyst", include_str!("../prompts/safe_analyst.txt")),
    (
        "neutral_analyst",
        include_str!("../prompts/neutral_analyst.txt"),
    ),
    (
        "risk_facilitator",
        include_str!("../prompts/risk_facilitator.txt"),
    ),
    ("fund_manager", include_str!("../prompts/fund_manager.txt")),
    (
        "format_reminder",
        include_str!("../prompts/format_reminder.txt"),
    ),
];

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("no prompt template named {0:?}")]
    Unknown(String),
    #[error("template {template}: unknown placeholder {{{{{name}}}}}")]
    Placeholder { template: String, name: String },
    #[error("template {template}: unterminated placeholder")]
    Unterminated { template: String },
    #[error("reading {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone)]
pub struct PromptSet {
    templates: BTreeMap<String, String>,
}

impl Default for PromptSet {
    fn default() -> Self {
        Self::shipped()
    }
}

impl PromptSet {
    pub fn shipped() -> Self {
        Self {
            templates: SHIPPED
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }

    /// Shipped templates, with `<dir>/<name>.txt` taking precedence where it exists.
    pub fn with_overrides(dir: &Path) -> Result<Self, PromptError> {
        let mut set = Self::shipped();
        for (name, text) in set.templates.iter_mut() {
            let path = dir.join(format!("{name}.txt"));
            if path.is_file() {
                *text = std::fs::read_to_string(&path).map_err(|e| PromptError::Io {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })?;
            }
        }
        Ok(set)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }

    pub fn render(&self, name: &str, vars: &BTreeMap<&str, String>) -> Result<String, PromptError> {
        let template = self
            .templates
            .get(name)
            .ok_or_else(|| PromptError::Unknown(name.to_string()))?;
        render(name, template, vars)
    }
}

pub fn render(
    name: &str,
    template: &str,
    vars: &BTreeMap<&str, String>,
) -> Result<String, PromptError> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find("{{") {
        out.push_str(&rest[..open]);
        let after = &rest[open + 2..];
        let close = after.find("}}").ok_or_else(|| PromptError::Unterminated {
            template: name.to_string(),
        })?;
        let key = after[..close].trim();
        let value = vars.get(key).ok_or_else(|| PromptError::Placeholder {
            template: name.to_string(),
            name: key.to_string(),
        })?;
        out.push_str(value);
        rest = &after[close + 2..];
    }
    out.push_str(rest);
    Ok(out)
}
