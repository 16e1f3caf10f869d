use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beamform::{admm_solve, init_beamformer, AdmmResult};
use crate::channel::Channels;
use crate::error::{IsacError, Result};
use crate::llm::{llm_optimize_ua, ChatBackend, LlmLimits, TranscriptRecord};
use crate::metrics::{self, BeamformingSolution, UAMatrix};
use crate::scene::{Scenario, SystemConfig};
use crate::ua::{brute_force_ua, coalition_refine, gale_shapley_ua, ua_objective, RateTable};
use crate::CMat;

/// User-association strategy of the outer loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UaChoice {
    Brute,
    /// Gale-Shapley matching on the first iteration, then frozen.
    GaleShapley,
    Coalition,
    Llm,
    Stub,
}

impl UaChoice {
    pub const ALL: [UaChoice; 5] =
        [UaChoice::Brute, UaChoice::GaleShapley, UaChoice::Coalition, UaChoice::Llm, UaChoice::Stub];

    /// Tag recorded in results.
    pub fn tag(self) -> &'static str {
        match self {
            UaChoice::Brute => "brute",
            UaChoice::GaleShapley => "gale_shapley",
            UaChoice::Coalition => "coalition",
            UaChoice::Llm => "llm",
            UaChoice::Stub => "stub",
        }
    }
}

impl fmt::Display for UaChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for UaChoice {
    type Err = IsacError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "brute" => Ok(UaChoice::Brute),
            "gs" | "gale_shapley" | "gale-shapley" => Ok(UaChoice::GaleShapley),
            "coalition" => Ok(UaChoice::Coalition),
            "llm" => Ok(UaChoice::Llm),
            "stub" => Ok(UaChoice::Stub),
            other => Err(IsacError::Config(format!("unknown UA solver `{other}` (brute|gs|coalition|llm|stub)"))),
        }
    }
}

/// Final sensing and power margins of one BS, recomputed from `W` alone.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BsReport {
    pub bs: usize,
    pub power: f64,
    pub power_budget: f64,
    pub radar_snr: f64,
    pub gamma_t: f64,
    pub crb: f64,
    pub epsilon: f64,
    /// Largest normalized primal residual of the last ADMM round.
    pub residual: f64,
    pub admm_rounds: usize,
    pub admm_converged: bool,
}

impl BsReport {
    pub fn power_ok(&self) -> bool {
        self.power <= self.power_budget * (1.0 + 1e-8)
    }
    pub fn snr_ok(&self) -> bool {
        self.radar_snr >= self.gamma_t
    }
    pub fn crb_ok(&self) -> bool {
        self.crb <= 1.05 * self.epsilon
    }
    pub fn passes(&self) -> bool {
        self.power_ok() && self.snr_ok() && self.crb_ok()
    }
    pub fn snr_margin_db(&self) -> f64 {
        10.0 * (self.radar_snr / self.gamma_t).log10()
    }
}

pub fn audit(
    w: &CMat,
    ch: &Channels,
    scn: &Scenario,
    cfg: &SystemConfig,
    k: usize,
    admm: Option<&AdmmResult>,
) -> BsReport {
    let sigma2_r = cfg.sigma2_r_watt();
    let th = metrics::theta_matrices(&ch.g_est[k], &ch.dg_est[k], scn.alpha_est[k], cfg.l, sigma2_r);
    BsReport {
        bs: k,
        power: w.norm_squared(),
        power_budget: cfg.pt_watt(),
        radar_snr: metrics::radar_snr(&ch.g_det[k], w, cfg.sigma2_t, sigma2_r),
        gamma_t: cfg.gamma_t_lin(),
        crb: metrics::crb_or_inf(&metrics::fim(w, &th)),
        epsilon: cfg.epsilon_crb,
        residual: admm.map_or(0.0, |a| a.max_residual()),
        admm_rounds: admm.map_or(0, |a| a.rounds),
        admm_converged: admm.is_none_or(|a| a.converged),
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct Timings {
    pub ua_s: f64,
    pub beamforming_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone)]
pub struct AoResult {
    pub u_final: UAMatrix,
    pub w_final: BeamformingSolution,
    /// Sum rate after each full outer iteration.
    pub objective_trace: Vec<f64>,
    pub ua_method: UaChoice,
    pub timings: Timings,
    pub constraint_report: Vec<BsReport>,
    pub iterations: usize,
    pub converged: bool,
    /// ADMM histories of the last beamforming phase, one per BS.
    pub admm: Vec<AdmmResult>,
    pub llm_transcript: Vec<TranscriptRecord>,
}

impl AoResult {
    pub fn objective(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(0.0)
    }
    pub fn audit_passes(&self) -> bool {
        self.constraint_report.iter().all(BsReport::passes)
    }
}

fn rate_table(ch: &Channels, w: &BeamformingSolution, cfg: &SystemConfig) -> Result<RateTable> {
    RateTable::new(metrics::sinr_table(&ch.h, w, cfg.sigma2_c_watt()))
}

/// Alternates user association (given `W`) and per-BS beamforming (given
/// `U`). A UA proposal that lowers the current objective is rejected.
pub fn ao_solve(
    scn: &Scenario,
    ch: &Channels,
    cfg: &SystemConfig,
    choice: UaChoice,
    backend: Option<&dyn ChatBackend>,
) -> Result<AoResult> {
    let t0 = Instant::now();
    let bw = cfg.bandwidth;
    let (k, n) = (scn.k(), scn.n());
    if matches!(choice, UaChoice::Llm) && backend.is_none() {
        return Err(IsacError::Config("the llm UA solver needs a chat backend".into()));
    }
    let stub = crate::llm::StubBackend;

    let mut w = BeamformingSolution { w: (0..k).map(|b| init_beamformer(scn, ch, cfg, b)).collect() };
    let mut u: Option<UAMatrix> = None;
    let mut trace: Vec<f64> = Vec::new();
    let mut timings = Timings::default();
    let mut transcript = Vec::new();
    let mut admm: Vec<AdmmResult> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for it in 0..cfg.n_iter_max.max(1) {
        iterations = it + 1;
        // UA phase.
        let tu = Instant::now();
        let table = rate_table(ch, &w, cfg)?;
        let proposal = if k == 1 {
            match &u {
                Some(_) => None,
                None => Some(UAMatrix::from_assignment(1, vec![0; n])?),
            }
        } else {
            match choice {
                UaChoice::Brute => Some(brute_force_ua(&table, bw)?.0),
                UaChoice::GaleShapley => match &u {
                    None => Some(gale_shapley_ua(&table)?),
                    Some(_) => None,
                },
                UaChoice::Coalition => {
                    let start = match &u {
                        None => gale_shapley_ua(&table)?,
                        Some(cur) => cur.clone(),
                    };
                    Some(coalition_refine(&start, &table)?)
                }
                UaChoice::Llm | UaChoice::Stub => {
                    let be: &dyn ChatBackend =
                        if choice == UaChoice::Stub { &stub } else { backend.expect("checked above") };
                    let out = llm_optimize_ua(&table, bw, be, LlmLimits::default())?;
                    transcript.extend(out.transcript);
                    Some(out.u)
                }
            }
        };
        u = match (u.take(), proposal) {
            (None, Some(p)) => Some(p),
            (Some(cur), Some(p)) => {
                let vc = ua_objective(&cur, &table, bw)?;
                let vp = ua_objective(&p, &table, bw)?;
                Some(if vp >= vc { p } else { cur })
            }
            (Some(cur), None) => Some(cur),
            (None, None) => unreachable!("first iteration always proposes"),
        };
        let uc = u.as_ref().expect("set above");
        timings.ua_s += tu.elapsed().as_secs_f64();

        // Beamforming phase, one independent solve per BS.
        let tb = Instant::now();
        let results: Vec<Result<AdmmResult>> =
            (0..k).into_par_iter().map(|b| admm_solve(uc, ch, scn, cfg, b, Some(&w.w[b]))).collect();
        admm = results.into_iter().collect::<Result<Vec<_>>>()?;
        w = BeamformingSolution { w: admm.iter().map(|a| a.w.clone()).collect() };
        timings.beamforming_s += tb.elapsed().as_secs_f64();

        let obj = metrics::sum_rate(uc, &metrics::sinr_table(&ch.h, &w, cfg.sigma2_c_watt()), bw)?;
        let prev = trace.last().copied();
        trace.push(obj);
        if let Some(p) = prev {
            if obj - p < cfg.tol_outer * p.abs().max(1e-300) {
                converged = true;
                break;
            }
        }
    }

    let u_final = u.expect("at least one iteration");
    let constraint_report = (0..k).map(|b| audit(&w.w[b], ch, scn, cfg, b, admm.get(b))).collect();
    timings.total_s = t0.elapsed().as_secs_f64();
    Ok(AoResult {
        u_final,
        w_final: w,
        objective_trace: trace,
        ua_method: choice,
        timings,
        constraint_report,
        iterations,
        converged,
        admm,
        llm_transcript: transcript,
    })
}
