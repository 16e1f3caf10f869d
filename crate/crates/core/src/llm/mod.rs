//! User association by a prompted chat model with self-reflection rounds.
//!
//! Each round renders the SINR table into a structured prompt, asks the
//! backend for an assignment in a fixed one-line grammar, and feeds the best
//! assignment so far back into the next prompt.

mod backend;
mod optimize;
mod parse;
mod prompt;

pub use backend::{ChatBackend, HttpBackend, LlmBackendConfig, ScriptedBackend, StubBackend};
pub use optimize::{llm_optimize_ua, write_transcript, LlmLimits, LlmOutcome, TranscriptRecord};
pub use parse::parse_response;
pub use prompt::{build_prompt, format_sinr, PromptBundle};

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LlmError {
    #[error("no ASSIGNMENT line found in the response")]
    NoAssignment,
    #[error("malformed assignment: {0}")]
    Parse(String),
    #[error("invalid assignment: {0}")]
    Validation(String),
    #[error("prompt construction: {0}")]
    Prompt(String),
    #[error("backend request failed: {0}")]
    Transport(String),
    #[error("backend failed after retries: {message}")]
    BackendFailed {
        message: String,
        /// Best valid `(1-based assignment, objective)` reached before the failure.
        best: Option<(Vec<usize>, f64)>,
    },
    #[error("no valid assignment after {rounds} rounds")]
    NoValidAssignment { rounds: usize },
}
