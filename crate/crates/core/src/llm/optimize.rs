use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{build_prompt, parse_response, ChatBackend, LlmError};
use crate::metrics::UAMatrix;
use crate::ua::{ua_objective, RateTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmLimits {
    pub max_rounds: usize,
    /// Consecutive rounds without strict improvement that end the loop.
    pub patience: usize,
}

impl Default for LlmLimits {
    fn default() -> Self {
        LlmLimits { max_rounds: 5, patience: 2 }
    }
}

/// One backend exchange. `attempt` is 0 for the round prompt and 1 for the
/// re-prompt that follows a rejected reply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub round: usize,
    pub attempt: usize,
    pub prompt: String,
    pub response: Option<String>,
    /// 1-based BS per CU when the reply parsed.
    pub assignment: Option<Vec<usize>>,
    pub objective: Option<f64>,
    pub best_objective: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct LlmOutcome {
    pub u: UAMatrix,
    pub rate: f64,
    pub rounds: usize,
    pub transcript: Vec<TranscriptRecord>,
}

/// Prompt, parse and reflect until `max_rounds`, `patience` stalled rounds,
/// or two identical consecutive assignments. The best assignment seen is
/// returned.
pub fn llm_optimize_ua(
    t: &RateTable,
    bandwidth: f64,
    backend: &dyn ChatBackend,
    limits: LlmLimits,
) -> Result<LlmOutcome, LlmError> {
    let (k, n) = (t.k(), t.n());
    let mut transcript = Vec::new();
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut last: Option<Vec<usize>> = None;
    let mut stalled = 0usize;
    let mut rounds = 0usize;

    for round in 1..=limits.max_rounds {
        rounds = round;
        let prior = best.as_ref().map(|(a, v)| (a.as_slice(), *v));
        let base = build_prompt(t, k, n, bandwidth, prior)?;
        let mut prompt = base.clone();
        let mut accepted: Option<(Vec<usize>, f64)> = None;
        for attempt in 0..2 {
            let text = prompt.render();
            let reply = match backend.complete(&prompt) {
                Ok(r) => r,
                Err(e) => {
                    transcript.push(TranscriptRecord {
                        round,
                        attempt,
                        prompt: text,
                        response: None,
                        assignment: None,
                        objective: None,
                        best_objective: best.as_ref().map(|b| b.1),
                        error: Some(e.to_string()),
                    });
                    return Err(LlmError::BackendFailed { message: e.to_string(), best });
                }
            };
            match parse_response(&reply, k, n) {
                Ok(a) => {
                    let u = UAMatrix::from_one_based(k, &a).map_err(|e| LlmError::Validation(e.to_string()))?;
                    let v = ua_objective(&u, t, bandwidth).map_err(|e| LlmError::Validation(e.to_string()))?;
                    let improves = best.as_ref().is_none_or(|(_, bv)| v > *bv + 1e-12 * bv.abs());
                    let best_after = if improves { v } else { best.as_ref().map_or(v, |b| b.1) };
                    transcript.push(TranscriptRecord {
                        round,
                        attempt,
                        prompt: text,
                        response: Some(reply),
                        assignment: Some(a.clone()),
                        objective: Some(v),
                        best_objective: Some(best_after),
                        error: None,
                    });
                    accepted = Some((a, v));
                    break;
                }
                Err(e) => {
                    transcript.push(TranscriptRecord {
                        round,
                        attempt,
                        prompt: text,
                        response: Some(reply),
                        assignment: None,
                        objective: None,
                        best_objective: best.as_ref().map(|b| b.1),
                        error: Some(e.to_string()),
                    });
                    prompt = base.with_correction(&e.to_string());
                }
            }
        }

        match accepted {
            Some((a, v)) => {
                let improves = best.as_ref().is_none_or(|(_, bv)| v > *bv + 1e-12 * bv.abs());
                if improves {
                    best = Some((a.clone(), v));
                    stalled = 0;
                } else {
                    stalled += 1;
                }
                let repeated = last.as_ref() == Some(&a);
                last = Some(a);
                if repeated || stalled >= limits.patience {
                    break;
                }
            }
            None => {
                stalled += 1;
                if best.is_some() && stalled >= limits.patience {
                    break;
                }
            }
        }
    }

    let (a, v) = best.ok_or(LlmError::NoValidAssignment { rounds })?;
    let u = UAMatrix::from_one_based(k, &a).map_err(|e| LlmError::Validation(e.to_string()))?;
    Ok(LlmOutcome { u, rate: v, rounds, transcript })
}

/// One JSON object per line.
pub fn write_transcript(path: &Path, records: &[TranscriptRecord]) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut f, r)?;
        f.write_all(b"\n")?;
    }
    f.flush()
}
