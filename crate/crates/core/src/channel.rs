//! ULA responses, path loss and Rician communication channels.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::scene::{Scenario, SystemConfig};
use crate::{CMat, CVec};

/// `a_m(θ) = exp(j2π(d/λ)·m·cosθ)`, `m = 0..M-1`.
pub fn steering_vector(theta: f64, m: usize, d_over_lambda: f64) -> CVec {
    let k = 2.0 * PI * d_over_lambda * theta.cos();
    CVec::from_iterator(m, (0..m).map(|i| Complex64::from_polar(1.0, k * i as f64)))
}

/// `∂a/∂θ`, element `m` equal to `-j2π(d/λ)·m·sinθ·a_m(θ)`.
pub fn steering_derivative(theta: f64, m: usize, d_over_lambda: f64) -> CVec {
    let a = steering_vector(theta, m, d_over_lambda);
    let s = -2.0 * PI * d_over_lambda * theta.sin();
    CVec::from_iterator(m, a.iter().enumerate().map(|(i, &ai)| Complex64::new(0.0, s * i as f64) * ai))
}

/// Amplitude gain `10^(β₀/10)·d^(-ς)`.
pub fn path_loss(d: f64, beta0_db: f64, varsigma: f64) -> f64 {
    10f64.powf(beta0_db / 10.0) * d.powf(-varsigma)
}

/// LoS sensing channel `g = β̃·a(φ)/√M`.
pub fn sensing_channel(cfg: &SystemConfig, dist: f64, angle: f64) -> CVec {
    let beta = path_loss(dist, cfg.beta0_db, cfg.varsigma_t);
    steering_vector(angle, cfg.m, cfg.d_over_lambda) * Complex64::new(beta / (cfg.m as f64).sqrt(), 0.0)
}

/// `∂g/∂φ = β̃·ȧ(φ)/√M`.
pub fn sensing_channel_derivative(cfg: &SystemConfig, dist: f64, angle: f64) -> CVec {
    let beta = path_loss(dist, cfg.beta0_db, cfg.varsigma_t);
    steering_derivative(angle, cfg.m, cfg.d_over_lambda) * Complex64::new(beta / (cfg.m as f64).sqrt(), 0.0)
}

/// The M radar columns of the initial beamformer. Column `j` points at the
/// detection target for even `j` and at the estimation target for odd `j`;
/// each carries `P_t/(2M)`.
pub fn radar_columns(m: usize, d_over_lambda: f64, phi_det: f64, phi_est: f64, pt: f64) -> CMat {
    let scale = (pt / (2.0 * m as f64)).sqrt() / (m as f64).sqrt();
    let a_det = steering_vector(phi_det, m, d_over_lambda) * Complex64::new(scale, 0.0);
    let a_est = steering_vector(phi_est, m, d_over_lambda) * Complex64::new(scale, 0.0);
    CMat::from_fn(m, m, |r, c| if c % 2 == 0 { a_det[r] } else { a_est[r] })
}

/// `h = β√(κ/(κ+1))·a(θ)/√M + β√(1/(κ+1))·c̃`, `c̃ ~ CN(0, I_M)`.
pub fn rician_channel<R: Rng>(beta: f64, kappa: f64, a: &CVec, rng: &mut R) -> CVec {
    let m = a.len();
    let los = beta * (kappa / (kappa + 1.0)).sqrt() / (m as f64).sqrt();
    let nlos = beta * (1.0 / (kappa + 1.0)).sqrt() * std::f64::consts::FRAC_1_SQRT_2;
    CVec::from_iterator(
        m,
        a.iter().map(|&ai| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            ai * los + Complex64::new(re, im) * nlos
        }),
    )
}

/// Every channel of one scenario.
#[derive(Debug, Clone)]
pub struct Channels {
    /// `h[k][i]`: BS `k` to CU `i`.
    pub h: Vec<Vec<CVec>>,
    pub g_det: Vec<CVec>,
    pub g_est: Vec<CVec>,
    pub dg_est: Vec<CVec>,
}

/// Per-link random stream so draws do not depend on generation order.
fn link_rng(rng_stream: u64, k: usize, i: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(rng_stream);
    rng.set_stream(((k as u64) << 32) | (i as u64 + 1));
    rng
}

pub fn draw_channels(scn: &Scenario, cfg: &SystemConfig, rng_stream: u64) -> Channels {
    let kappa = cfg.kappa_lin();
    let h = (0..scn.k())
        .map(|k| {
            (0..scn.n())
                .map(|i| {
                    let beta = path_loss(scn.cu_dist[k][i], cfg.beta0_db, cfg.varsigma_c);
                    let a = steering_vector(scn.cu_angle[k][i], cfg.m, cfg.d_over_lambda);
                    rician_channel(beta, kappa, &a, &mut link_rng(rng_stream, k, i))
                })
                .collect()
        })
        .collect();
    let g_det = scn.det_target.iter().map(|t| sensing_channel(cfg, t.dist, t.angle)).collect();
    let g_est = scn.est_target.iter().map(|t| sensing_channel(cfg, t.dist, t.angle)).collect();
    let dg_est = scn.est_target.iter().map(|t| sensing_channel_derivative(cfg, t.dist, t.angle)).collect();
    Channels { h, g_det, g_est, dg_est }
}
