//! Classical user-association solvers on a fixed SINR table.

use serde::{Deserialize, Serialize};

use crate::error::{IsacError, Result};
use crate::metrics::{self, UAMatrix};

/// Largest `K^N` the exhaustive search will enumerate.
pub const BRUTE_FORCE_CAP: f64 = 1e7;

/// `γ_{k,i}` under fixed beamformers, `gamma[k][i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub gamma: Vec<Vec<f64>>,
}

impl RateTable {
    pub fn new(gamma: Vec<Vec<f64>>) -> Result<Self> {
        if gamma.is_empty() || gamma[0].is_empty() {
            return Err(IsacError::Dimension("empty SINR table".into()));
        }
        let n = gamma[0].len();
        if gamma.iter().any(|r| r.len() != n) {
            return Err(IsacError::Dimension("ragged SINR table".into()));
        }
        if gamma.iter().flatten().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(IsacError::Numerical("SINR entries must be finite and non-negative".into()));
        }
        Ok(RateTable { gamma })
    }

    pub fn k(&self) -> usize {
        self.gamma.len()
    }

    pub fn n(&self) -> usize {
        self.gamma[0].len()
    }
}

pub fn ua_objective(u: &UAMatrix, t: &RateTable, bandwidth: f64) -> Result<f64> {
    metrics::sum_rate(u, &t.gamma, bandwidth)
}

/// Objective of a raw assignment over precomputed `log₂(1+γ)`; `None` if a BS is empty.
fn assignment_value(assign: &[usize], log_rate: &[Vec<f64>], load: &mut [usize], acc: &mut [f64]) -> Option<f64> {
    load.iter_mut().for_each(|c| *c = 0);
    acc.iter_mut().for_each(|c| *c = 0.0);
    for (i, &b) in assign.iter().enumerate() {
        load[b] += 1;
        acc[b] += log_rate[b][i];
    }
    if load.contains(&0) {
        return None;
    }
    Some(acc.iter().zip(load.iter()).map(|(s, &c)| s / c as f64).sum())
}

fn log_rates(t: &RateTable) -> Vec<Vec<f64>> {
    t.gamma.iter().map(|r| r.iter().map(|g| (1.0 + g).log2()).collect()).collect()
}

fn check_coverable(t: &RateTable) -> Result<()> {
    if t.n() < t.k() {
        return Err(IsacError::InfeasibleAssociation(format!(
            "{} CUs cannot leave every one of {} BSs non-empty",
            t.n(),
            t.k()
        )));
    }
    Ok(())
}

/// Exhaustive search over all `K^N` assignments in lexicographic order;
/// the first optimum found is kept.
pub fn brute_force_ua(t: &RateTable, bandwidth: f64) -> Result<(UAMatrix, f64)> {
    let (k, n) = (t.k(), t.n());
    check_coverable(t)?;
    let size = (k as f64).powi(n as i32);
    if size > BRUTE_FORCE_CAP {
        return Err(IsacError::SearchTooLarge { size, cap: BRUTE_FORCE_CAP });
    }
    let lr = log_rates(t);
    let mut assign = vec![0usize; n];
    let mut load = vec![0usize; k];
    let mut acc = vec![0.0; k];
    let mut best: Option<(Vec<usize>, f64)> = None;
    loop {
        if let Some(v) = assignment_value(&assign, &lr, &mut load, &mut acc) {
            let better = match &best {
                None => true,
                Some((_, bv)) => v > *bv + 1e-12 * bv.abs().max(1e-300),
            };
            if better {
                best = Some((assign.clone(), v));
            }
        }
        // Odometer increment, last CU fastest.
        let mut pos = n;
        loop {
            if pos == 0 {
                let (a, v) = best.expect("N ≥ K admits a valid assignment");
                return Ok((UAMatrix::from_assignment(k, a)?, v * bandwidth));
            }
            pos -= 1;
            assign[pos] += 1;
            if assign[pos] < k {
                break;
            }
            assign[pos] = 0;
        }
    }
}

/// Moves, for each empty BS, the CU whose transfer from the most-loaded BS
/// costs the least objective.
pub fn repair_empty(assign: &mut [usize], t: &RateTable) {
    let k = t.k();
    let lr = log_rates(t);
    let mut load = vec![0usize; k];
    let mut acc = vec![0.0; k];
    loop {
        let mut counts = vec![0usize; k];
        for &b in assign.iter() {
            counts[b] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else { return };
        let (donor, _) =
            counts.iter().enumerate().fold((0, 0), |(bi, bc), (i, &c)| if c > bc { (i, c) } else { (bi, bc) });
        let mut best: Option<(usize, f64)> = None;
        for i in 0..assign.len() {
            if assign[i] != donor {
                continue;
            }
            assign[i] = empty;
            let v = partial_value(assign, &lr, &mut load, &mut acc);
            assign[i] = donor;
            if best.is_none_or(|(_, bv)| v > bv) {
                best = Some((i, v));
            }
        }
        let (i, _) = best.expect("most-loaded BS serves at least two CUs");
        assign[i] = empty;
    }
}

/// Objective where empty BSs contribute nothing.
fn partial_value(assign: &[usize], lr: &[Vec<f64>], load: &mut [usize], acc: &mut [f64]) -> f64 {
    load.iter_mut().for_each(|c| *c = 0);
    acc.iter_mut().for_each(|c| *c = 0.0);
    for (i, &b) in assign.iter().enumerate() {
        load[b] += 1;
        acc[b] += lr[b][i];
    }
    acc.iter().zip(load.iter()).filter(|(_, &c)| c > 0).map(|(s, &c)| s / c as f64).sum()
}

/// CU-proposing deferred acceptance with quota `⌈N/K⌉`, then empty-BS repair.
pub fn gale_shapley_ua(t: &RateTable) -> Result<UAMatrix> {
    let (k, n) = (t.k(), t.n());
    check_coverable(t)?;
    let quota = n.div_ceil(k);
    let prefs: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut p: Vec<usize> = (0..k).collect();
            p.sort_by(|&a, &b| t.gamma[b][i].total_cmp(&t.gamma[a][i]).then(a.cmp(&b)));
            p
        })
        .collect();
    let mut next = vec![0usize; n];
    let mut held: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut free: Vec<usize> = (0..n).rev().collect();
    while let Some(i) = free.pop() {
        let b = prefs[i][next[i]];
        next[i] += 1;
        held[b].push(i);
        if held[b].len() > quota {
            // BS keeps its highest-SINR CUs; ties keep the lower index.
            let (pos, _) = held[b]
                .iter()
                .enumerate()
                .min_by(|(_, &x), (_, &y)| t.gamma[b][x].total_cmp(&t.gamma[b][y]).then(y.cmp(&x)))
                .expect("non-empty");
            let rejected = held[b].swap_remove(pos);
            free.push(rejected);
        }
    }
    let mut assign = vec![0usize; n];
    for (b, cus) in held.iter().enumerate() {
        for &i in cus {
            assign[i] = b;
        }
    }
    repair_empty(&mut assign, t);
    UAMatrix::from_assignment(k, assign)
}

/// Best strictly improving single-CU transfer, if any: `(cu, to, value)`.
pub fn best_transfer(assign: &[usize], t: &RateTable) -> Option<(usize, usize, f64)> {
    let k = t.k();
    let lr = log_rates(t);
    let mut load = vec![0usize; k];
    let mut acc = vec![0.0; k];
    let current = assignment_value(assign, &lr, &mut load, &mut acc)?;
    let mut trial = assign.to_vec();
    let mut best: Option<(usize, usize, f64)> = None;
    for i in 0..assign.len() {
        let from = assign[i];
        for to in 0..k {
            if to == from {
                continue;
            }
            trial[i] = to;
            if let Some(v) = assignment_value(&trial, &lr, &mut load, &mut acc) {
                let floor = best.map_or(current, |(_, _, bv)| bv);
                if v > floor + 1e-12 * floor.abs().max(1e-300) {
                    best = Some((i, to, v));
                }
            }
        }
        trial[i] = from;
    }
    best
}

/// Best strictly improving exchange of the serving BSs of two CUs, if any:
/// `(cu_a, cu_b, value)`. Loads are unchanged by a swap.
pub fn best_swap(assign: &[usize], t: &RateTable) -> Option<(usize, usize, f64)> {
    let k = t.k();
    let lr = log_rates(t);
    let mut load = vec![0usize; k];
    let mut acc = vec![0.0; k];
    let current = assignment_value(assign, &lr, &mut load, &mut acc)?;
    let mut trial = assign.to_vec();
    let mut best: Option<(usize, usize, f64)> = None;
    for a in 0..assign.len() {
        for b in (a + 1)..assign.len() {
            if assign[a] == assign[b] {
                continue;
            }
            trial.swap(a, b);
            if let Some(v) = assignment_value(&trial, &lr, &mut load, &mut acc) {
                let floor = best.map_or(current, |(_, _, bv)| bv);
                if v > floor + 1e-12 * floor.abs().max(1e-300) {
                    best = Some((a, b, v));
                }
            }
            trial.swap(a, b);
        }
    }
    best
}

/// Utilitarian best-improvement single-CU transfers until none strictly improves.
pub fn coalition_refine(u0: &UAMatrix, t: &RateTable) -> Result<UAMatrix> {
    if u0.k() != t.k() || u0.n() != t.n() {
        return Err(IsacError::Dimension("association does not match the SINR table".into()));
    }
    let mut assign = u0.assignment().to_vec();
    while let Some((i, to, _)) = best_transfer(&assign, t) {
        assign[i] = to;
    }
    UAMatrix::from_assignment(t.k(), assign)
}
