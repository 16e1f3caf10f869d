use serde::{Deserialize, Serialize};

use super::LlmError;
use crate::ua::RateTable;

/// The five prompt sections in emission order. `self_enhancement` is only
/// present on reflection rounds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub background: String,
    pub problem_description: String,
    pub task_instructions: String,
    pub self_enhancement: Option<String>,
    pub expected_output_schema: String,
}

pub(crate) const SINR_HEADER: &str = "SINR matrix (linear scale, row k = base station k, column i = user i):";
pub(crate) const PRIOR_ASSIGNMENT: &str = "Previous assignment:";
pub(crate) const PRIOR_OBJECTIVE: &str = "Previous objective value:";

const BACKGROUND: &str = "You are an expert in wireless network optimization. \
A cellular network has {Number_of_BSs} base stations. Each one drives a multi-antenna \
array that senses nearby targets and, with the same transmission, delivers data to \
single-antenna communication users. There are {Number_of_CUs} users, and each must be \
associated with one base station. The beamformers are fixed, so the signal quality of \
every user/base-station pair is already known.";

const PROBLEM: &str = "Decide the user association that maximizes the total data rate.\n\
Rules:\n\
- every user is served by exactly one base station;\n\
- every base station serves at least one user;\n\
- a base station shares its bandwidth B = {Bandwidth} equally among the users it serves, \
so user i served by base station k alone among n_k users gets (B / n_k) * log2(1 + SINR[k][i]).\n\
Objective: the sum of these rates over all users.\n\
{SINR_Header}\n\
{SINR_Matrix}";

const TASK: &str = "Work through the problem step by step before answering:\n\
1. For each user, find the base station with the largest SINR; give priority to the users whose best SINR is largest.\n\
2. Remember that loading many users on one base station divides its bandwidth; weigh that loss against the SINR gain.\n\
3. Make sure no base station is left without a user; if one is, move the user whose move loses the least rate.\n\
4. Compute the total objective of your final association and check that no single user move would raise it.";

const REFLECTION: &str = "{Prior_Assignment_Label} {Prior_Assignment}\n\
{Prior_Objective_Label} {Prior_Objective}\n\
Improve on this solution. Examine moving single users between base stations, keep any \
move that raises the total rate, and report the best association you find. If no move \
helps, report the previous association again.";

const SCHEMA: &str = "Finish your reply with exactly one line of the form\n\
ASSIGNMENT: [b_1, b_2, ..., b_{Number_of_CUs}]\n\
where b_i is the 1-based index (1 to {Number_of_BSs}) of the base station serving user i. \
Use integers only.";

/// Six significant digits in scientific notation.
pub fn format_sinr(x: f64) -> String {
    format!("{x:.5e}")
}

fn render_matrix(t: &RateTable) -> String {
    t.gamma
        .iter()
        .enumerate()
        .map(|(k, row)| {
            let vals: Vec<String> = row.iter().map(|&g| format_sinr(g)).collect();
            format!("BS {}: [{}]", k + 1, vals.join(", "))
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub(crate) fn render_assignment(a: &[usize]) -> String {
    let v: Vec<String> = a.iter().map(|b| b.to_string()).collect();
    format!("[{}]", v.join(", "))
}

fn fill(template: &str, subs: &[(&str, &str)]) -> String {
    let mut s = template.to_string();
    for (key, val) in subs {
        s = s.replace(&format!("{{{key}}}"), val);
    }
    s
}

/// Deterministic prompt for one round. `prior` carries the 1-based
/// assignment and its objective on reflection rounds.
pub fn build_prompt(
    t: &RateTable,
    k: usize,
    n: usize,
    bandwidth: f64,
    prior: Option<(&[usize], f64)>,
) -> Result<PromptBundle, LlmError> {
    if t.k() != k || t.n() != n {
        return Err(LlmError::Prompt(format!("table is {}×{}, expected {k}×{n}", t.k(), t.n())));
    }
    let ks = k.to_string();
    let ns = n.to_string();
    let bw = bandwidth.to_string();
    let matrix = render_matrix(t);
    let subs = [
        ("Number_of_BSs", ks.as_str()),
        ("Number_of_CUs", ns.as_str()),
        ("Bandwidth", bw.as_str()),
        ("SINR_Header", SINR_HEADER),
        ("SINR_Matrix", matrix.as_str()),
    ];
    let self_enhancement = prior.map(|(a, obj)| {
        let pa = render_assignment(a);
        let po = obj.to_string();
        fill(
            REFLECTION,
            &[
                ("Prior_Assignment_Label", PRIOR_ASSIGNMENT),
                ("Prior_Assignment", pa.as_str()),
                ("Prior_Objective_Label", PRIOR_OBJECTIVE),
                ("Prior_Objective", po.as_str()),
            ],
        )
    });
    Ok(PromptBundle {
        background: fill(BACKGROUND, &subs),
        problem_description: fill(PROBLEM, &subs),
        task_instructions: fill(TASK, &subs),
        self_enhancement,
        expected_output_schema: fill(SCHEMA, &subs),
    })
}

impl PromptBundle {
    /// Single message text, sections in emission order.
    pub fn render(&self) -> String {
        let mut parts = vec![
            format!("## Background\n{}", self.background),
            format!("## Problem description\n{}", self.problem_description),
            format!("## Task instructions\n{}", self.task_instructions),
        ];
        if let Some(se) = &self.self_enhancement {
            parts.push(format!("## Self-enhancement\n{se}"));
        }
        parts.push(format!("## Expected output\n{}", self.expected_output_schema));
        parts.join("\n\n")
    }

    /// Adds a correction note after a rejected reply.
    pub fn with_correction(&self, error: &str) -> PromptBundle {
        let note = format!(
            "Your previous reply could not be used ({error}). Answer again and follow the expected output format exactly."
        );
        let mut out = self.clone();
        out.self_enhancement = Some(match &self.self_enhancement {
            Some(se) => format!("{se}\n{note}"),
            None => note,
        });
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t() -> RateTable {
        RateTable::new(vec![vec![1.5, 0.0012345678, 30.0], vec![2.0, 4.0, 1e-7]]).unwrap()
    }

    #[test]
    fn first_round_has_no_reflection() {
        let p = build_prompt(&t(), 2, 3, 1.0, None).unwrap();
        assert!(p.self_enhancement.is_none());
        let r = p.render();
        assert!(!r.contains("Self-enhancement"));
        for key in ["{Number_of_BSs}", "{Number_of_CUs}", "{SINR_Matrix}"] {
            assert!(!r.contains(key));
        }
        assert!(r.contains("BS 1: [1.50000e0, 1.23457e-3, 3.00000e1]"));
        assert!(r.contains("ASSIGNMENT: [b_1, b_2, ..., b_3]"));
    }

    #[test]
    fn sections_in_order() {
        let p = build_prompt(&t(), 2, 3, 1.0, Some((&[1, 2, 1], 3.5))).unwrap();
        let r = p.render();
        let idx: Vec<usize> = [
            "## Background",
            "## Problem description",
            "## Task instructions",
            "## Self-enhancement",
            "## Expected output",
        ]
        .iter()
        .map(|h| r.find(h).unwrap())
        .collect();
        assert!(idx.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn prior_embedded_verbatim() {
        let prior = [3usize, 3, 1];
        let p =
            build_prompt(&RateTable::new(vec![vec![1.0; 3]; 3]).unwrap(), 3, 3, 1.0, Some((&prior, 12.41))).unwrap();
        let se = p.self_enhancement.unwrap();
        assert!(se.contains("[3, 3, 1]"));
        assert!(se.contains("12.41"));
    }

    #[test]
    fn deterministic_and_dim_checked() {
        assert_eq!(build_prompt(&t(), 2, 3, 1.0, None).unwrap(), build_prompt(&t(), 2, 3, 1.0, None).unwrap());
        assert!(build_prompt(&t(), 3, 3, 1.0, None).is_err());
    }
}
