//! Role-specialized trading agents.
//!
//! A trading day runs through analysts, a bull/bear research debate, a
//! trader, a three-way risk debate and a fund manager. All communication
//! goes through [`protocol::GlobalState`]; model access goes through
//! [`llm::ChatBackend`].

pub mod llm;
pub mod pipeline;
pub mod prompts;
pub mod protocol;
pub mod roster;
pub mod tools;

pub use llm::{
    ChatBackend, HttpBackend, HttpConfig, RecordingBackend, ScriptedBackend, TierConfig,
};
pub use pipeline::{run_pipeline, AgentDecisionSource, Desk, PipelineConfig, PipelineError, Stage};
pub use protocol::{Debate, Decision, GlobalState, Report, Role, Slot};
