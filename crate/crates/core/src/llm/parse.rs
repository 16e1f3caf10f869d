use std::sync::OnceLock;

use regex::Regex;

use super::LlmError;

fn schema() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"ASSIGNMENT:\s*\[([^\]]*)\]").expect("static regex"))
}

/// Extracts the last `ASSIGNMENT: [b_1, ..., b_N]` line and validates it
/// against `k` BSs and `n` CUs. Indices are 1-based.
pub fn parse_response(text: &str, k: usize, n: usize) -> Result<Vec<usize>, LlmError> {
    let caps = schema().captures_iter(text).last().ok_or(LlmError::NoAssignment)?;
    let body = caps[1].trim();
    let values: Vec<usize> = if body.is_empty() {
        Vec::new()
    } else {
        body.split(',')
            .map(|tok| {
                let tok = tok.trim();
                tok.parse::<usize>().map_err(|_| LlmError::Parse(format!("`{tok}` is not a BS index")))
            })
            .collect::<Result<_, _>>()?
    };
    if values.len() != n {
        return Err(LlmError::Validation(format!("expected {n} entries, got {}", values.len())));
    }
    if let Some(b) = values.iter().find(|&&b| b == 0 || b > k) {
        return Err(LlmError::Validation(format!("BS index {b} outside 1..={k}")));
    }
    let mut load = vec![0usize; k];
    for &b in &values {
        load[b - 1] += 1;
    }
    if let Some(e) = load.iter().position(|&c| c == 0) {
        return Err(LlmError::Validation(format!("BS {} serves no user", e + 1)));
    }
    Ok(values)
}
