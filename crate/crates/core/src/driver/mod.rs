//! Alternating optimization over user association and beamforming, plus
//! the experiment harness around it.

mod ao;
mod sweep;

pub use ao::{ao_solve, audit, AoResult, BsReport, Timings, UaChoice};
pub use sweep::{seed_for, sweep, CellMean, SweepParam, SweepRow, SweepTable};

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::channel::steering_vector;
use crate::error::{IsacError, Result};
use crate::llm::{llm_optimize_ua, ChatBackend, LlmLimits, StubBackend};
use crate::ua::{brute_force_ua, coalition_refine, gale_shapley_ua, ua_objective, RateTable};
use crate::CMat;

/// `n` equally spaced angles over `[0, π]`, endpoints included.
pub fn angle_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| PI * i as f64 / (n - 1) as f64).collect(),
    }
}

/// `p(θ) = ‖a(θ)ᴴW‖²` per grid angle.
pub fn beampattern(w: &CMat, m: usize, d_over_lambda: f64, grid: &[f64]) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(IsacError::Config("beampattern grid is empty".into()));
    }
    if w.nrows() != m {
        return Err(IsacError::Dimension(format!("W has {} rows, M = {m}", w.nrows())));
    }
    Ok(grid.iter().map(|&th| (steering_vector(th, m, d_over_lambda).adjoint() * w).norm_squared()).collect())
}

/// Indices of local maxima; an endpoint counts when it exceeds its single
/// neighbour.
pub fn local_maxima(p: &[f64]) -> Vec<usize> {
    let n = p.len();
    (0..n)
        .filter(|&i| {
            let left = i == 0 || p[i] >= p[i - 1];
            let right = i + 1 == n || p[i] >= p[i + 1];
            let strict = (i > 0 && p[i] > p[i - 1]) || (i + 1 < n && p[i] > p[i + 1]);
            left && right && strict
        })
        .collect()
}

/// Nearest grid index to `theta`.
pub fn nearest_index(grid: &[f64], theta: f64) -> usize {
    grid.iter().enumerate().min_by(|a, b| (a.1 - theta).abs().total_cmp(&(b.1 - theta).abs())).map_or(0, |(i, _)| i)
}

pub fn write_beampattern_csv(path: &Path, grid: &[f64], per_bs: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["bs", "theta_rad", "gain"])?;
    for (k, g) in per_bs.iter().enumerate() {
        for (th, v) in grid.iter().zip(g) {
            w.write_record([(k + 1).to_string(), th.to_string(), v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace_csv(path: &Path, trace: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["iteration", "sum_rate"])?;
    for (i, v) in trace.iter().enumerate() {
        w.write_record([(i + 1).to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// UA solvers alone on one SINR table.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct UaBenchRow {
    pub table: usize,
    pub k: usize,
    pub n: usize,
    pub solver: String,
    pub objective: f64,
    pub ratio_to_optimum: f64,
    pub runtime_s: f64,
}

/// Random tables with SINR log-uniform over `[10⁻², 10²]`; table `i` uses
/// seed `seed + i`.
pub fn random_rate_table(k: usize, n: usize, seed: u64) -> Result<RateTable> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    RateTable::new((0..k).map(|_| (0..n).map(|_| 10f64.powf(rng.random_range(-2.0..2.0))).collect()).collect())
}

pub fn ua_bench(
    k: usize,
    n: usize,
    tables: usize,
    seed: u64,
    solvers: &[UaChoice],
    backend: Option<&dyn ChatBackend>,
) -> Result<Vec<UaBenchRow>> {
    let mut rows = Vec::new();
    for ti in 0..tables {
        let t = random_rate_table(k, n, seed.wrapping_add(ti as u64))?;
        let (_, opt) = brute_force_ua(&t, 1.0)?;
        for &s in solvers {
            let t0 = Instant::now();
            let v = match s {
                UaChoice::Brute => opt,
                UaChoice::GaleShapley => ua_objective(&gale_shapley_ua(&t)?, &t, 1.0)?,
                UaChoice::Coalition => ua_objective(&coalition_refine(&gale_shapley_ua(&t)?, &t)?, &t, 1.0)?,
                UaChoice::Stub => llm_optimize_ua(&t, 1.0, &StubBackend, LlmLimits::default())?.rate,
                UaChoice::Llm => {
                    let be =
                        backend.ok_or_else(|| IsacError::Config("the llm UA solver needs a chat backend".into()))?;
                    llm_optimize_ua(&t, 1.0, be, LlmLimits::default())?.rate
                }
            };
            rows.push(UaBenchRow {
                table: ti,
                k,
                n,
                solver: s.tag().into(),
                objective: v,
                ratio_to_optimum: if opt > 0.0 { v / opt } else { 1.0 },
                runtime_s: t0.elapsed().as_secs_f64(),
            });
        }
    }
    Ok(rows)
}
