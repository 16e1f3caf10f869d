use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ao::{ao_solve, AoResult, UaChoice};
use crate::channel::draw_channels;
use crate::error::{IsacError, Result};
use crate::llm::ChatBackend;
use crate::scene::{generate_scenario, SystemConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    N,
    M,
    PtDbm,
    EpsilonCrb,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::N => "N",
            SweepParam::M => "M",
            SweepParam::PtDbm => "pt_dbm",
            SweepParam::EpsilonCrb => "epsilon_crb",
        }
    }

    pub fn apply(self, cfg: &mut SystemConfig, v: f64) -> Result<()> {
        let as_count = |v: f64| -> Result<usize> {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(IsacError::Config(format!("{} must be a positive integer, got {v}", self.name())))
            }
        };
        match self {
            SweepParam::N => cfg.n = as_count(v)?,
            SweepParam::M => cfg.m = as_count(v)?,
            SweepParam::PtDbm => cfg.pt_dbm = v,
            SweepParam::EpsilonCrb => cfg.epsilon_crb = v,
        }
        cfg.validate()
    }

    /// Value under which the scenario of every seed is drawn: the most
    /// demanding one for sensing (lowest power, tightest CRB, fewest
    /// antennas), or the largest CU count so smaller counts are prefixes.
    fn generation_value(self, values: &[f64]) -> f64 {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        match self {
            SweepParam::N => max,
            _ => min,
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = IsacError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "N" | "n" => Ok(SweepParam::N),
            "M" | "m" => Ok(SweepParam::M),
            "pt_dbm" | "pt" => Ok(SweepParam::PtDbm),
            "epsilon_crb" | "epsilon" | "eps" => Ok(SweepParam::EpsilonCrb),
            other => Err(IsacError::Config(format!("cannot sweep `{other}` (N|M|pt_dbm|epsilon_crb)"))),
        }
    }
}

/// One `(value, seed, solver)` run.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SweepRow {
    pub param: String,
    pub value: f64,
    pub seed: u64,
    pub solver: String,
    pub sum_rate: f64,
    pub per_cu_rate: f64,
    pub runtime_s: f64,
    pub iterations: usize,
    pub min_snr_margin_db: f64,
    pub max_crb_ratio: f64,
    pub max_power_ratio: f64,
    pub audit_pass: bool,
}

impl SweepRow {
    pub fn from_result(param: SweepParam, value: f64, seed: u64, n: usize, r: &AoResult) -> Self {
        let rep = &r.constraint_report;
        SweepRow {
            param: param.name().into(),
            value,
            seed,
            solver: r.ua_method.tag().into(),
            sum_rate: r.objective(),
            per_cu_rate: r.objective() / n as f64,
            runtime_s: r.timings.total_s,
            iterations: r.iterations,
            min_snr_margin_db: rep.iter().map(|b| b.snr_margin_db()).fold(f64::INFINITY, f64::min),
            max_crb_ratio: rep.iter().map(|b| b.crb / b.epsilon).fold(0.0, f64::max),
            max_power_ratio: rep.iter().map(|b| b.power / b.power_budget).fold(0.0, f64::max),
            audit_pass: r.audit_passes(),
        }
    }
}

/// Mean over seeds of one `(value, solver)` cell.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CellMean {
    pub value: f64,
    pub solver: String,
    pub seeds: usize,
    pub mean_sum_rate: f64,
    pub mean_per_cu_rate: f64,
    pub audit_failures: usize,
}

#[derive(Debug, Clone, Default)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// Means in ascending value order, solvers in first-seen order.
    pub fn means(&self) -> Vec<CellMean> {
        let mut cells: BTreeMap<(u64, usize), Vec<&SweepRow>> = BTreeMap::new();
        let mut solvers: Vec<&str> = Vec::new();
        for r in &self.rows {
            let si = match solvers.iter().position(|s| *s == r.solver) {
                Some(i) => i,
                None => {
                    solvers.push(&r.solver);
                    solvers.len() - 1
                }
            };
            cells.entry((ordered(r.value), si)).or_default().push(r);
        }
        cells
            .into_iter()
            .map(|((_, si), rs)| {
                let c = rs.len() as f64;
                CellMean {
                    value: rs[0].value,
                    solver: solvers[si].into(),
                    seeds: rs.len(),
                    mean_sum_rate: rs.iter().map(|r| r.sum_rate).sum::<f64>() / c,
                    mean_per_cu_rate: rs.iter().map(|r| r.per_cu_rate).sum::<f64>() / c,
                    audit_failures: rs.iter().filter(|r| !r.audit_pass).count(),
                }
            })
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_means_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for r in self.means() {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Total order key for finite floats, used for grouping.
fn ordered(v: f64) -> u64 {
    let b = v.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | (1 << 63)
    }
}

/// Seed `i` of a sweep uses scenario and channel seed `cfg.seed + i`.
pub fn seed_for(cfg: &SystemConfig, i: usize) -> u64 {
    cfg.seed.wrapping_add(i as u64)
}

/// Runs every `(value, seed, solver)` cell in parallel. Each seed keeps one
/// network across all values so comparisons are paired: it is drawn under
/// the most demanding sensing value, which keeps the initial beamformer
/// sensing-feasible throughout, and an `N` sweep keeps the first `N` CUs of
/// the largest network.
pub fn sweep(
    cfg_base: &SystemConfig,
    vary: SweepParam,
    values: &[f64],
    n_seeds: usize,
    solvers: &[UaChoice],
    backend: Option<&dyn ChatBackend>,
) -> Result<SweepTable> {
    if values.is_empty() || solvers.is_empty() || n_seeds == 0 {
        return Err(IsacError::Config("sweep needs at least one value, seed and solver".into()));
    }
    let gen_value = vary.generation_value(values);
    let mut jobs = Vec::new();
    for &v in values {
        for s in 0..n_seeds {
            for &sol in solvers {
                jobs.push((v, s, sol));
            }
        }
    }
    let rows: Vec<Result<SweepRow>> = jobs
        .par_iter()
        .map(|&(v, s, sol)| {
            let t0 = Instant::now();
            let seed = seed_for(cfg_base, s);
            let mut cfg = cfg_base.clone();
            vary.apply(&mut cfg, v)?;
            let mut gen = cfg_base.clone();
            vary.apply(&mut gen, gen_value)?;
            let mut scn = generate_scenario(&gen, seed)?;
            if vary == SweepParam::N {
                scn = scn.first_cus(cfg.n)?;
            }
            let ch = draw_channels(&scn, &cfg, seed);
            let r = ao_solve(&scn, &ch, &cfg, sol, backend)?;
            let mut row = SweepRow::from_result(vary, v, seed, cfg.n, &r);
            row.runtime_s = t0.elapsed().as_secs_f64();
            Ok(row)
        })
        .collect();
    Ok(SweepTable { rows: rows.into_iter().collect::<Result<Vec<_>>>()? })
}
