//! System configuration and random network geometry.
//!
//! All angles are planar bearings folded into `[0, π]`, which is the range
//! the ULA response `exp(j2π(d/λ)m·cosθ)` can distinguish.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::channel;
use crate::error::{IsacError, Result};
use crate::metrics;

/// `10^((x - 30)/10)`: dBm to watts.
pub fn dbm_to_watt(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn lin_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Every tunable of the network, solver and experiment harness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    /// Bandwidth in the rate expression; rates are per unit bandwidth when 1.
    #[serde(rename = "B")]
    pub bandwidth: f64,
    pub beta0_db: f64,
    pub varsigma_c: f64,
    pub varsigma_t: f64,
    pub kappa_db: f64,
    pub sigma2_c_dbm: f64,
    pub sigma2_r_dbm: f64,
    /// RCS variance of every target.
    pub sigma2_t: f64,
    pub pt_dbm: f64,
    pub gamma_t_db: f64,
    pub epsilon_crb: f64,
    /// Radar snapshots per coherent processing interval.
    #[serde(rename = "L")]
    pub l: usize,
    pub n_iter_max: usize,
    /// Relative objective-increase threshold that ends the AO loop.
    pub tol_outer: f64,
    /// Relative objective-increase threshold that ends an ADMM solve.
    pub tol_inner: f64,
    pub d_over_lambda: f64,
    pub seed: u64,
    pub n_seeds: usize,
    pub angle_grid_points: usize,
    pub area_side_m: f64,
    pub bs_min_sep_m: f64,
    pub bs_max_sep_m: f64,
    pub target_min_dist_m: f64,
    pub target_max_dist_m: f64,
    pub max_placement_attempts: usize,
    /// Initial ADMM penalty in the solver's normalized units.
    pub rho0: f64,
    pub rho_decay: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            k: 3,
            n: 10,
            m: 24,
            bandwidth: 1.0,
            beta0_db: -30.0,
            varsigma_c: 2.4,
            varsigma_t: 3.5,
            kappa_db: 3.0,
            sigma2_c_dbm: -90.0,
            sigma2_r_dbm: -90.0,
            sigma2_t: DEFAULT_SIGMA2_T,
            pt_dbm: 32.0,
            gamma_t_db: 7.0,
            epsilon_crb: 0.01,
            l: 1024,
            n_iter_max: 100,
            tol_outer: 1e-4,
            tol_inner: 1e-5,
            d_over_lambda: 0.5,
            seed: 0,
            n_seeds: 20,
            angle_grid_points: 721,
            area_side_m: 200.0,
            bs_min_sep_m: 80.0,
            bs_max_sep_m: 160.0,
            target_min_dist_m: 100.0,
            target_max_dist_m: 160.0,
            max_placement_attempts: 100_000,
            rho0: 1.0,
            rho_decay: 0.9,
        }
    }
}

/// RCS variance used when none is configured. Sized so the CRB threshold
/// is attainable at the target ranges under the `β₀·d^(-ς)` amplitude law.
pub const DEFAULT_SIGMA2_T: f64 = 1e29;

impl SystemConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: SystemConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Applies `key=value` where `value` is JSON (bare words are taken as strings).
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| IsacError::Config(format!("override `{assignment}` lacks `=`")))?;
        let mut tree = serde_json::to_value(&*self)?;
        let map = tree.as_object_mut().expect("config is an object");
        if !map.contains_key(key.trim()) {
            return Err(IsacError::Config(format!("unknown config field `{}`", key.trim())));
        }
        let value =
            serde_json::from_str(raw.trim()).unwrap_or_else(|_| serde_json::Value::String(raw.trim().to_string()));
        map.insert(key.trim().to_string(), value);
        let updated: SystemConfig =
            serde_json::from_value(tree).map_err(|e| IsacError::Config(format!("override `{assignment}`: {e}")))?;
        updated.validate()?;
        *self = updated;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(IsacError::Config(m.to_string()));
        if self.k == 0 || self.n == 0 || self.m == 0 {
            return bad("K, N and M must be positive");
        }
        if self.l == 0 {
            return bad("L must be positive");
        }
        if !(self.bandwidth > 0.0) {
            return bad("bandwidth must be positive");
        }
        if !(self.epsilon_crb > 0.0) {
            return bad("epsilon_crb must be positive");
        }
        if !(self.sigma2_t > 0.0) {
            return bad("sigma2_t must be positive");
        }
        if !(self.d_over_lambda > 0.0) {
            return bad("d_over_lambda must be positive");
        }
        if self.angle_grid_points < 2 {
            return bad("angle grid needs at least two points");
        }
        if !(self.area_side_m > 0.0) {
            return bad("area side must be positive");
        }
        if !(self.bs_min_sep_m <= self.bs_max_sep_m && self.bs_min_sep_m >= 0.0) {
            return bad("BS separation band is empty");
        }
        if !(self.target_min_dist_m <= self.target_max_dist_m && self.target_min_dist_m > 0.0) {
            return bad("target distance band is empty");
        }
        if !(self.rho0 > 0.0) || !(self.rho_decay > 0.0 && self.rho_decay <= 1.0) {
            return bad("rho0 must be positive and rho_decay in (0, 1]");
        }
        Ok(())
    }

    pub fn pt_watt(&self) -> f64 {
        dbm_to_watt(self.pt_dbm)
    }

    pub fn sigma2_c_watt(&self) -> f64 {
        dbm_to_watt(self.sigma2_c_dbm)
    }

    pub fn sigma2_r_watt(&self) -> f64 {
        dbm_to_watt(self.sigma2_r_dbm)
    }

    pub fn gamma_t_lin(&self) -> f64 {
        db_to_lin(self.gamma_t_db)
    }

    pub fn kappa_lin(&self) -> f64 {
        db_to_lin(self.kappa_db)
    }

    pub fn beta0_lin(&self) -> f64 {
        db_to_lin(self.beta0_db)
    }
}

/// A sensing target seen from its serving BS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub pos: [f64; 2],
    pub dist: f64,
    /// Folded bearing in `[0, π]`.
    pub angle: f64,
}

/// One random network realization. Indexing is `[k]` for BSs and `[k][i]`
/// for BS-to-CU quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub bs_pos: Vec<[f64; 2]>,
    pub cu_pos: Vec<[f64; 2]>,
    pub cu_dist: Vec<Vec<f64>>,
    pub cu_angle: Vec<Vec<f64>>,
    pub det_target: Vec<Target>,
    pub est_target: Vec<Target>,
    /// Realized RCS of each estimation target.
    pub alpha_est: Vec<Complex64>,
    pub seed: u64,
}

impl Scenario {
    pub fn k(&self) -> usize {
        self.bs_pos.len()
    }

    pub fn n(&self) -> usize {
        self.cu_pos.len()
    }

    /// The same network with only its first `n` CUs. Channel draws are per
    /// link, so the kept CUs also keep their channels.
    pub fn first_cus(&self, n: usize) -> Result<Scenario> {
        if n == 0 || n > self.n() {
            return Err(IsacError::Config(format!("cannot keep {n} of {} CUs", self.n())));
        }
        let mut s = self.clone();
        s.cu_pos.truncate(n);
        for v in s.cu_dist.iter_mut().chain(s.cu_angle.iter_mut()) {
            v.truncate(n);
        }
        Ok(s)
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Bearing from `from` to `to`, folded into `[0, π]`.
pub fn folded_bearing(from: [f64; 2], to: [f64; 2]) -> f64 {
    (to[1] - from[1]).atan2(to[0] - from[0]).abs()
}

fn place_bs(cfg: &SystemConfig, rng: &mut ChaCha20Rng) -> Result<Vec<[f64; 2]>> {
    let a = cfg.area_side_m;
    let in_band = |d: f64| d >= cfg.bs_min_sep_m && d <= cfg.bs_max_sep_m;
    let mut attempts = 0usize;
    let mut placed: Vec<[f64; 2]> = Vec::with_capacity(cfg.k);
    // Sequential rejection with restart once a partial layout gets stuck.
    let mut since_progress = 0usize;
    while placed.len() < cfg.k {
        if attempts >= cfg.max_placement_attempts {
            return Err(IsacError::Placement {
                what: format!(
                    "{} BSs with pairwise spacing in [{}, {}] m inside a {a} m square",
                    cfg.k, cfg.bs_min_sep_m, cfg.bs_max_sep_m
                ),
                attempts,
            });
        }
        attempts += 1;
        since_progress += 1;
        let c = [rng.random::<f64>() * a, rng.random::<f64>() * a];
        if placed.iter().all(|&p| in_band(dist(p, c))) {
            placed.push(c);
            since_progress = 0;
        } else if since_progress > 1000 {
            placed.clear();
            since_progress = 0;
        }
    }
    Ok(placed)
}

fn sample_target(cfg: &SystemConfig, bs: [f64; 2], rng: &mut ChaCha20Rng) -> Target {
    let span = cfg.target_max_dist_m - cfg.target_min_dist_m;
    let d = cfg.target_min_dist_m + span * rng.random::<f64>();
    let bearing = 2.0 * PI * rng.random::<f64>();
    let pos = [bs[0] + d * bearing.cos(), bs[1] + d * bearing.sin()];
    Target { pos, dist: d, angle: folded_bearing(bs, pos) }
}

fn sample_cn(rng: &mut ChaCha20Rng, var: f64) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * (var / 2.0).sqrt()
}

/// Draws a scenario. Target layouts whose initial radar beams cannot meet
/// the detection SNR or CRB thresholds are resampled, so every scenario
/// admits the initial beamformer as a feasible sensing point.
pub fn generate_scenario(cfg: &SystemConfig, seed: u64) -> Result<Scenario> {
    cfg.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let bs_pos = place_bs(cfg, &mut rng)?;
    let a = cfg.area_side_m;
    let cu_pos: Vec<[f64; 2]> = (0..cfg.n).map(|_| [rng.random::<f64>() * a, rng.random::<f64>() * a]).collect();
    let cu_dist = bs_pos.iter().map(|&b| cu_pos.iter().map(|&c| dist(b, c).max(1.0)).collect()).collect();
    let cu_angle = bs_pos.iter().map(|&b| cu_pos.iter().map(|&c| folded_bearing(b, c)).collect()).collect();

    let mut det_target = Vec::with_capacity(cfg.k);
    let mut est_target = Vec::with_capacity(cfg.k);
    let mut alpha_est = Vec::with_capacity(cfg.k);
    for &b in &bs_pos {
        let mut attempts = 0usize;
        loop {
            if attempts >= cfg.max_placement_attempts {
                return Err(IsacError::Placement {
                    what: "sensing targets meeting the detection and CRB thresholds".into(),
                    attempts,
                });
            }
            attempts += 1;
            let det = sample_target(cfg, b, &mut rng);
            let est = sample_target(cfg, b, &mut rng);
            let alpha = sample_cn(&mut rng, cfg.sigma2_t);
            // Two distinct targets per BS.
            if dist(det.pos, est.pos) < 1e-6 {
                continue;
            }
            if initial_sensing_feasible(cfg, &det, &est, alpha) {
                det_target.push(det);
                est_target.push(est);
                alpha_est.push(alpha);
                break;
            }
        }
    }
    Ok(Scenario { bs_pos, cu_pos, cu_dist, cu_angle, det_target, est_target, alpha_est, seed })
}

/// Whether the radar part of the initial beamformer alone meets both
/// sensing thresholds. Extra columns only add SNR and Fisher information.
pub fn initial_sensing_feasible(cfg: &SystemConfig, det: &Target, est: &Target, alpha: Complex64) -> bool {
    let m = cfg.m;
    let w_r = channel::radar_columns(m, cfg.d_over_lambda, det.angle, est.angle, cfg.pt_watt());
    let g_det = channel::sensing_channel(cfg, det.dist, det.angle);
    let snr = metrics::radar_snr(&g_det, &w_r, cfg.sigma2_t, cfg.sigma2_r_watt());
    if snr < cfg.gamma_t_lin() {
        return false;
    }
    let g_est = channel::sensing_channel(cfg, est.dist, est.angle);
    let dg_est = channel::sensing_channel_derivative(cfg, est.dist, est.angle);
    let th = metrics::theta_matrices(&g_est, &dg_est, alpha, cfg.l, cfg.sigma2_r_watt());
    let crb = metrics::crb_or_inf(&metrics::fim(&w_r, &th));
    crb.is_finite() && crb <= cfg.epsilon_crb
}
