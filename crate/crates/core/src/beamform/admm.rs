//! Per-BS beamforming by block coordinate descent inside an augmented
//! Lagrangian: `(υ, b) → (C, q) → w`, then duals and penalty.
//!
//! Internally everything runs in normalized units: `W̃ = W/√P`,
//! `h̃ = h√(P/σ²_c)` (unit noise), sensing direction `ḡ = g/‖g‖`, and Fisher
//! functionals rescaled so the nuisance blocks share the `|α|²` scale of `q₁`
//! and `q̂₁(W⁰) ≤ 1`. The Schur complement, hence the CRB, transforms by the
//! same positive factor as its threshold, so feasibility is unchanged.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::cq::solve_cq;
use super::fp::{assemble_f, fp_update_b, fp_update_upsilon, weighted_rate};
use super::mm::PenaltyBlock;
use super::qcqp::{solve_w, SnrConstraint, WObjective, WSolveOptions};
use crate::channel::{radar_columns, Channels};
use crate::error::{IsacError, Result};
use crate::metrics::{q_functional, radar_snr, schur, theta_matrices, UAMatrix};
use crate::scene::{Scenario, SystemConfig};
use crate::{CMat, CVec};

/// Communication column `i` is `√(P/(2N))·h_i/‖h_i‖`; the M radar columns
/// alternate between the two targets with `P/(2M)` each.
pub fn init_beamformer(scn: &Scenario, ch: &Channels, cfg: &SystemConfig, k: usize) -> CMat {
    let (m, n) = (cfg.m, scn.n());
    let p = cfg.pt_watt();
    let mut w = CMat::zeros(m, n + m);
    let s = (p / (2.0 * n as f64)).sqrt();
    for (i, h) in ch.h[k].iter().enumerate() {
        let nh = h.norm();
        if nh > 0.0 {
            w.set_column(i, &(h * Complex64::new(s / nh, 0.0)));
        }
    }
    let r = radar_columns(m, cfg.d_over_lambda, scn.det_target[k].angle, scn.est_target[k].angle, p);
    w.columns_mut(n, m).copy_from(&r);
    w
}

/// Solver state, in normalized units.
#[derive(Debug, Clone)]
pub struct AdmmState {
    pub w: CMat,
    pub upsilon: Vec<f64>,
    pub b: Vec<Complex64>,
    pub c_aux: f64,
    pub q1: f64,
    pub q2: Complex64,
    pub q3: f64,
    pub dual: [Complex64; 3],
    pub rho: f64,
    pub iter: usize,
}

impl AdmmState {
    pub fn new(w: CMat, rho0: f64) -> Self {
        AdmmState {
            w,
            upsilon: Vec::new(),
            b: Vec::new(),
            c_aux: 0.0,
            q1: 0.0,
            q2: Complex64::new(0.0, 0.0),
            q3: 0.0,
            dual: [Complex64::new(0.0, 0.0); 3],
            rho: rho0,
            iter: 0,
        }
    }

    pub fn q(&self) -> [Complex64; 3] {
        [Complex64::new(self.q1, 0.0), self.q2, Complex64::new(self.q3, 0.0)]
    }
}

/// `Υ_j ← Υ_j + (Q_j(W) − q_j)/ρ`, then `ρ ← decay·ρ`.
pub fn dual_penalty_update(state: &mut AdmmState, q_of_w: [Complex64; 3], decay: f64) {
    let q = state.q();
    for j in 0..3 {
        state.dual[j] += (q_of_w[j] - q[j]) / state.rho;
    }
    state.rho *= decay;
    state.iter += 1;
}

/// One outer round.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AdmmRecord {
    pub iter: usize,
    /// `Σ ω_i log₂(1+γ_i)` at the accepted iterate.
    pub objective: f64,
    /// Radar SNR over `Γ_t`, in dB.
    pub snr_margin_db: f64,
    pub crb: f64,
    pub power: f64,
    /// `|Q̂_j − q̂_j| / max(1, |q̂_j|)` in normalized units.
    pub residual_q1: f64,
    pub residual_q2: f64,
    pub residual_q3: f64,
    pub rho: f64,
    /// Step length of the accepted move; 0 when reverted.
    pub step: f64,
    pub w_iterations: usize,
    pub w_kkt: f64,
}

#[derive(Debug, Clone)]
pub struct AdmmResult {
    /// Physical units.
    pub w: CMat,
    pub history: Vec<AdmmRecord>,
    pub converged: bool,
    pub rounds: usize,
    pub objective: f64,
    pub state: AdmmState,
}

impl AdmmResult {
    pub fn max_residual(&self) -> f64 {
        self.history.last().map_or(0.0, |r| r.residual_q1.max(r.residual_q2).max(r.residual_q3))
    }
}

pub fn write_history_csv(path: &Path, history: &[AdmmRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in history {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn history_csv_string(history: &[AdmmRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in history {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| IsacError::Io(e.into_error()))?;
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}

/// Normalized data of one BS problem.
struct Problem {
    h: Vec<CVec>,
    omega: Vec<f64>,
    snr: SnrConstraint,
    /// Present when the CRB constraint is active (`ε < ∞`).
    crb: Option<CrbData>,
    pt: f64,
    /// Physical quantities for reporting.
    g_det: CVec,
    thetas_raw: crate::metrics::Thetas,
    sigma2_t: f64,
    sigma2_r: f64,
    gamma_t: f64,
}

struct CrbData {
    theta: [CMat; 3],
    /// Threshold on the normalized Schur complement, `s/ε`, passed to the
    /// projection as `ε̂ = ε/s`.
    eps_hat: f64,
}

impl Problem {
    fn q_hat(&self, w: &CMat) -> [Complex64; 3] {
        match &self.crb {
            Some(c) => [
                Complex64::new(q_functional(&c.theta[0], w).re, 0.0),
                q_functional(&c.theta[1], w),
                Complex64::new(q_functional(&c.theta[2], w).re, 0.0),
            ],
            None => [Complex64::new(0.0, 0.0); 3],
        }
    }

    fn schur_hat(&self, w: &CMat) -> f64 {
        let q = self.q_hat(w);
        schur(q[0].re, q[1], q[2].re).unwrap_or(f64::NEG_INFINITY)
    }

    fn crb_ok(&self, w: &CMat) -> bool {
        self.crb.as_ref().is_none_or(|c| self.schur_hat(w) >= 1.0 / c.eps_hat)
    }

    fn rate(&self, w: &CMat) -> f64 {
        weighted_rate(w, &self.h, &self.omega, 1.0)
    }

    fn physical(&self, w: &CMat) -> CMat {
        w * Complex64::new(self.pt.sqrt(), 0.0)
    }

    fn record(&self, w: &CMat, st: &AdmmState, step: f64, w_iterations: usize, w_kkt: f64) -> AdmmRecord {
        let wp = self.physical(w);
        let snr = radar_snr(&self.g_det, &wp, self.sigma2_t, self.sigma2_r);
        let crb = crate::metrics::crb_or_inf(&crate::metrics::fim(&wp, &self.thetas_raw));
        let (r1, r2, r3) = if self.crb.is_some() {
            let qw = self.q_hat(w);
            let q = st.q();
            let r = |j: usize| (qw[j] - q[j]).norm() / q[j].norm().max(1.0);
            (r(0), r(1), r(2))
        } else {
            (0.0, 0.0, 0.0)
        };
        AdmmRecord {
            iter: st.iter,
            objective: self.rate(w),
            snr_margin_db: 10.0 * (snr / self.gamma_t).log10(),
            crb,
            power: wp.norm_squared(),
            residual_q1: r1,
            residual_q2: r2,
            residual_q3: r3,
            rho: st.rho,
            step,
            w_iterations,
            w_kkt,
        }
    }
}

fn build_problem(u: &UAMatrix, ch: &Channels, scn: &Scenario, cfg: &SystemConfig, k: usize, w0: &CMat) -> Problem {
    let pt = cfg.pt_watt();
    let sc = (pt / cfg.sigma2_c_watt()).sqrt();
    let h: Vec<CVec> = ch.h[k].iter().map(|x| x * Complex64::new(sc, 0.0)).collect();
    let omega = u.weights(k);
    let g_det = ch.g_det[k].clone();
    let gn = g_det.norm();
    let sigma2_r = cfg.sigma2_r_watt();
    let gamma_t = cfg.gamma_t_lin();
    let tau = gamma_t * sigma2_r / (cfg.sigma2_t * gn * gn * pt);
    let snr = SnrConstraint { g: &g_det / Complex64::new(gn, 0.0), tau };
    let alpha = scn.alpha_est[k];
    let thetas_raw = theta_matrices(&ch.g_est[k], &ch.dg_est[k], alpha, cfg.l, sigma2_r);
    let crb = cfg.epsilon_crb.is_finite().then(|| {
        let a = alpha.norm();
        let raw = thetas_raw.t.clone();
        // Nuisance rescaling, then unit power.
        let t = [raw[0].clone(), &raw[1] * Complex64::new(a, 0.0), &raw[2] * Complex64::new(a * a, 0.0)];
        let t: [CMat; 3] = t.map(|m| m * Complex64::new(pt, 0.0));
        let q1 = q_functional(&t[0], w0).re;
        let s = if q1 > 0.0 { cfg.epsilon_crb.min(1.0 / q1) } else { cfg.epsilon_crb };
        CrbData { theta: t.map(|m| m * Complex64::new(s, 0.0)), eps_hat: cfg.epsilon_crb / s }
    });
    Problem { h, omega, snr, crb, pt, g_det, thetas_raw, sigma2_t: cfg.sigma2_t, sigma2_r, gamma_t }
}

#[derive(Debug, Clone, Copy)]
pub struct AdmmOptions {
    pub rho0: f64,
    pub rho_decay: f64,
    pub max_rounds: usize,
    pub tol: f64,
    pub w: WSolveOptions,
    /// Consecutive reverted rounds that end the solve.
    pub max_reverts: usize,
}

impl AdmmOptions {
    pub fn from_config(cfg: &SystemConfig) -> Self {
        AdmmOptions {
            rho0: cfg.rho0,
            rho_decay: cfg.rho_decay,
            max_rounds: cfg.n_iter_max,
            tol: cfg.tol_inner,
            w: WSolveOptions::default(),
            max_reverts: 3,
        }
    }
}

/// Beamformer of BS `k` for a fixed association, starting from `warm` (in
/// physical units) or from [`init_beamformer`].
pub fn admm_solve(
    u: &UAMatrix,
    ch: &Channels,
    scn: &Scenario,
    cfg: &SystemConfig,
    k: usize,
    warm: Option<&CMat>,
) -> Result<AdmmResult> {
    admm_solve_with(u, ch, scn, cfg, k, warm, AdmmOptions::from_config(cfg))
}

pub fn admm_solve_with(
    u: &UAMatrix,
    ch: &Channels,
    scn: &Scenario,
    cfg: &SystemConfig,
    k: usize,
    warm: Option<&CMat>,
    opts: AdmmOptions,
) -> Result<AdmmResult> {
    if k >= scn.k() || u.k() != scn.k() || u.n() != scn.n() {
        return Err(IsacError::Dimension(format!(
            "BS {k} / association {}×{} vs scenario {}×{}",
            u.k(),
            u.n(),
            scn.k(),
            scn.n()
        )));
    }
    let pt = cfg.pt_watt();
    let w_phys = match warm {
        Some(w) => w.clone(),
        None => init_beamformer(scn, ch, cfg, k),
    };
    if w_phys.nrows() != cfg.m || w_phys.ncols() != scn.n() + cfg.m {
        return Err(IsacError::Dimension(format!("warm start is {}×{}", w_phys.nrows(), w_phys.ncols())));
    }
    let mut w = &w_phys / Complex64::new(pt.sqrt(), 0.0);
    // Rounding can leave the start a hair outside the unit ball.
    let n0 = w.norm_squared();
    if n0 > 1.0 {
        w /= Complex64::new(n0.sqrt(), 0.0);
    }
    let pb = build_problem(u, ch, scn, cfg, k, &w);
    if !pb.snr.holds(&w) || !pb.crb_ok(&w) {
        return Err(IsacError::InfeasibleSensing(format!(
            "starting beamformer of BS {k} violates the sensing thresholds"
        )));
    }

    let comm_weight = 1.0 / (pb.rate(&w) * std::f64::consts::LN_2).max(1e-12);
    let mut st = AdmmState::new(w.clone(), opts.rho0);
    let mut w_opts = opts.w;
    let mut history = Vec::with_capacity(opts.max_rounds);
    let mut rate = pb.rate(&w);
    let mut reverts = 0usize;
    let mut converged = false;

    for _ in 0..opts.max_rounds {
        // (υ, b).
        st.upsilon = fp_update_upsilon(&st.w, &pb.h, 1.0);
        st.b = fp_update_b(&st.w, &st.upsilon, &pb.h, &pb.omega, 1.0);
        let fp = assemble_f(&st.upsilon, &st.b, &pb.h, &pb.omega, st.w.ncols(), 1.0);

        // (C, q).
        let qw = pb.q_hat(&st.w);
        let mut blocks = Vec::new();
        if let Some(cd) = &pb.crb {
            let t: Vec<Complex64> = (0..3).map(|j| qw[j] + st.dual[j] * st.rho).collect();
            let cq = solve_cq(t[0].re, t[1], t[2].re, cd.eps_hat)?;
            st.c_aux = cq.c;
            st.q1 = cq.q1;
            st.q2 = cq.q2;
            st.q3 = cq.q3;
            let q = st.q();
            for j in 0..3 {
                let c = -q[j] + st.dual[j] * st.rho;
                blocks.push(PenaltyBlock::new(&cd.theta[j], c, &st.w));
            }
        }

        // w.
        let obj = WObjective::new(&fp, comm_weight, 1.0 / (2.0 * st.rho), blocks);
        let sol = solve_w(&obj, &st.w, 1.0, Some(&pb.snr), w_opts)?;

        // Accept only moves that keep the weighted rate and the CRB.
        let base_crb_ok = pb.crb_ok(&st.w);
        let base_schur = pb.schur_hat(&st.w);
        let mut step = 0.0;
        let mut accepted: Option<(CMat, f64)> = None;
        let dir = &sol.w - &st.w;
        let mut tstep = 1.0;
        for _ in 0..=10 {
            let cand = &st.w + &dir * Complex64::new(tstep, 0.0);
            let r = pb.rate(&cand);
            let crb_ok = if base_crb_ok { pb.crb_ok(&cand) } else { pb.schur_hat(&cand) >= base_schur };
            if r >= rate && crb_ok && pb.snr.holds(&cand) && cand.norm_squared() <= 1.0 + 1e-12 {
                accepted = Some((cand, r));
                step = tstep;
                break;
            }
            tstep *= 0.5;
        }

        let prev = rate;
        match accepted {
            Some((cand, r)) => {
                st.w = cand;
                rate = r;
                reverts = 0;
            }
            None => {
                reverts += 1;
                w_opts.tol = (w_opts.tol * 0.1).max(1e-14);
            }
        }

        let qn = pb.q_hat(&st.w);
        if pb.crb.is_some() {
            dual_penalty_update(&mut st, qn, opts.rho_decay);
        } else {
            st.rho *= opts.rho_decay;
            st.iter += 1;
        }
        history.push(pb.record(&st.w, &st, step, sol.iterations, sol.kkt_residual));

        if reverts >= opts.max_reverts {
            converged = true;
            break;
        }
        if step > 0.0 && st.iter >= 2 && rate - prev <= opts.tol * prev.abs().max(1e-300) {
            converged = true;
            break;
        }
    }

    let rounds = history.len();
    Ok(AdmmResult { w: pb.physical(&st.w), history, converged, rounds, objective: rate, state: st })
}
