//! Communication and sensing performance metrics.
//!
//! β̃ is counted once: it lives inside the sensing channel `g`, and neither
//! the radar SNR nor the Fisher information multiplies it in again.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{IsacError, Result};
use crate::{CMat, CVec};

/// Binary user association, stored as the serving BS of every CU.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UAMatrix {
    k: usize,
    assign: Vec<usize>,
}

impl UAMatrix {
    /// `assign[i]` is the 0-based BS serving CU `i`.
    pub fn from_assignment(k: usize, assign: Vec<usize>) -> Result<Self> {
        if k == 0 {
            return Err(IsacError::InvalidAssociation("no base stations".into()));
        }
        if let Some((i, &b)) = assign.iter().enumerate().find(|(_, &b)| b >= k) {
            return Err(IsacError::InvalidAssociation(format!("CU {i} assigned to BS {b} of {k}")));
        }
        let mut load = vec![0usize; k];
        for &b in &assign {
            load[b] += 1;
        }
        if let Some(empty) = load.iter().position(|&c| c == 0) {
            return Err(IsacError::InvalidAssociation(format!("BS {empty} serves no CU")));
        }
        Ok(UAMatrix { k, assign })
    }

    /// From 1-based BS indices as exchanged with external tools.
    pub fn from_one_based(k: usize, assign: &[usize]) -> Result<Self> {
        if assign.contains(&0) {
            return Err(IsacError::InvalidAssociation("BS index 0 in a 1-based list".into()));
        }
        Self::from_assignment(k, assign.iter().map(|b| b - 1).collect())
    }

    /// From the K×N binary matrix `u[k][i]`.
    pub fn from_matrix(u: &[Vec<u8>]) -> Result<Self> {
        let k = u.len();
        if k == 0 {
            return Err(IsacError::InvalidAssociation("empty matrix".into()));
        }
        let n = u[0].len();
        if u.iter().any(|r| r.len() != n) {
            return Err(IsacError::Dimension("ragged association matrix".into()));
        }
        let mut assign = Vec::with_capacity(n);
        for i in 0..n {
            let mut owner = None;
            for (b, row) in u.iter().enumerate() {
                match row[i] {
                    0 => {}
                    1 if owner.is_none() => owner = Some(b),
                    1 => return Err(IsacError::InvalidAssociation(format!("CU {i} served twice"))),
                    v => return Err(IsacError::InvalidAssociation(format!("entry {v} is not binary"))),
                }
            }
            assign.push(owner.ok_or_else(|| IsacError::InvalidAssociation(format!("CU {i} unserved")))?);
        }
        Self::from_assignment(k, assign)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.assign.len()
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assign
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.assign.iter().map(|b| b + 1).collect()
    }

    pub fn serves(&self, k: usize, i: usize) -> bool {
        self.assign[i] == k
    }

    /// `‖ũ_k‖₀`.
    pub fn load(&self, k: usize) -> usize {
        self.assign.iter().filter(|&&b| b == k).count()
    }

    pub fn served(&self, k: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.assign[i] == k).collect()
    }

    pub fn matrix(&self) -> Vec<Vec<u8>> {
        (0..self.k).map(|b| self.assign.iter().map(|&a| u8::from(a == b)).collect()).collect()
    }

    /// `ω_{k,i} = u_{k,i}/‖ũ_k‖₀`.
    pub fn weights(&self, k: usize) -> Vec<f64> {
        let load = self.load(k) as f64;
        self.assign.iter().map(|&b| if b == k { 1.0 / load } else { 0.0 }).collect()
    }
}

/// Per-BS beamformers `W_k ∈ C^{M×(N+M)}`; columns `0..N` serve CUs and the
/// rest are dedicated radar beams.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformingSolution {
    pub w: Vec<CMat>,
}

impl BeamformingSolution {
    /// Column-stacked `vec(W_k)`.
    pub fn stacked(&self, k: usize) -> CVec {
        stack(&self.w[k])
    }
}

pub fn stack(w: &CMat) -> CVec {
    CVec::from_column_slice(w.as_slice())
}

pub fn unstack(v: &CVec, m: usize) -> CMat {
    CMat::from_column_slice(m, v.len() / m, v.as_slice())
}

fn inner(a: &CVec, b: &CVec) -> Complex64 {
    a.dotc(b)
}

/// `|hᴴw_i|² / (Σ_{n≠i} |hᴴw_n|² + σ²)`, summing over all N+M columns.
pub fn sinr(h: &CVec, w: &CMat, i: usize, sigma2: f64) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(IsacError::Numerical(format!("noise power {sigma2} must be positive")));
    }
    if i >= w.ncols() || h.len() != w.nrows() {
        return Err(IsacError::Dimension(format!("column {i} of a {}×{} beamformer", w.nrows(), w.ncols())));
    }
    let g = h.adjoint() * w;
    let sig = g[i].norm_sqr();
    let total: f64 = g.iter().map(|x| x.norm_sqr()).sum();
    Ok(sig / (total - sig + sigma2))
}

/// SINR of every CU of `h` under one BS's beamformer.
pub fn sinr_all(h: &[CVec], w: &CMat, sigma2: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(h.len());
    for (i, hi) in h.iter().enumerate() {
        let g = hi.adjoint() * w;
        let sig = g[i].norm_sqr();
        let total: f64 = g.iter().map(|x| x.norm_sqr()).sum();
        out.push(sig / ((total - sig).max(0.0) + sigma2));
    }
    out
}

/// `γ_{k,i}` for every BS/CU pair; `h[k][i]`.
pub fn sinr_table(h: &[Vec<CVec>], sol: &BeamformingSolution, sigma2: f64) -> Vec<Vec<f64>> {
    h.iter().zip(&sol.w).map(|(hk, wk)| sinr_all(hk, wk, sigma2)).collect()
}

/// `Σ_i Σ_k u_{k,i}·(B/‖ũ_k‖₀)·log₂(1+γ_{k,i})`.
pub fn sum_rate(u: &UAMatrix, gamma: &[Vec<f64>], bandwidth: f64) -> Result<f64> {
    if gamma.len() != u.k() || gamma.iter().any(|r| r.len() != u.n()) {
        return Err(IsacError::Dimension(format!("SINR table does not match a {}×{} association", u.k(), u.n())));
    }
    let mut total = 0.0;
    for k in 0..u.k() {
        let load = u.load(k) as f64;
        for i in u.served(k) {
            total += bandwidth / load * (1.0 + gamma[k][i]).log2();
        }
    }
    Ok(total)
}

/// `σ²_t·‖gᴴW‖² / σ²_r`.
pub fn radar_snr(g: &CVec, w: &CMat, sigma2_t: f64, sigma2_r: f64) -> f64 {
    let p = g.adjoint() * w;
    sigma2_t * p.norm_squared() / sigma2_r
}

/// χ²₂ CDF `1 − e^(−x/2)`.
pub fn chi2_2_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -(-x / 2.0).exp_m1()
    }
}

pub fn chi2_2_inv_cdf(p: f64) -> f64 {
    -2.0 * (-p).ln_1p()
}

/// Neyman-Pearson detection probability `1 − F(μ₀/μ₁·F⁻¹(1 − P_FA))`,
/// which reduces to `P_FA^(μ₀/μ₁)`.
pub fn detection_probability(p_fa: f64, mu1_over_mu0: f64) -> Result<f64> {
    if !(p_fa > 0.0 && p_fa < 1.0) {
        return Err(IsacError::Config(format!("false-alarm probability {p_fa} outside (0, 1)")));
    }
    if !(mu1_over_mu0 >= 1.0) {
        return Err(IsacError::Config(format!("variance ratio {mu1_over_mu0} below 1")));
    }
    if mu1_over_mu0.is_infinite() {
        return Ok(1.0);
    }
    let threshold = chi2_2_inv_cdf(1.0 - p_fa);
    Ok(1.0 - chi2_2_cdf(threshold / mu1_over_mu0))
}

/// `Θ₁, Θ₂, Θ₃` of the Fisher functionals `Q_j(W) = Tr{Θ_j W Wᴴ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Thetas {
    pub t: [CMat; 3],
}

pub fn theta_matrices(g: &CVec, g_dot: &CVec, alpha: Complex64, l: usize, sigma2_r: f64) -> Thetas {
    let gm = g * g.adjoint();
    let gd = g_dot * g.adjoint() + g * g_dot.adjoint();
    let c = 2.0 * l as f64 / sigma2_r;
    let t1 = gd.adjoint() * &gd * Complex64::new(c * alpha.norm_sqr(), 0.0);
    let t2 = gd.adjoint() * &gm * (alpha.conj() * c);
    let t3 = gm.adjoint() * &gm * Complex64::new(c, 0.0);
    Thetas { t: [t1, t2, t3] }
}

/// `Tr{Θ W Wᴴ} = Σ_n w_nᴴ Θ w_n`.
pub fn q_functional(theta: &CMat, w: &CMat) -> Complex64 {
    let tw = theta * w;
    let mut acc = Complex64::new(0.0, 0.0);
    for n in 0..w.ncols() {
        acc += inner(&w.column(n).into_owned(), &tw.column(n).into_owned());
    }
    acc
}

/// Blocks of the 3×3 FIM over `(φ, Re α, Im α)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FimComponents {
    pub j_pp: f64,
    pub j_pa: [f64; 2],
    pub j_aa: [[f64; 2]; 2],
    pub q1: f64,
    pub q2: Complex64,
    pub q3: f64,
}

impl FimComponents {
    pub fn from_q(q1: f64, q2: Complex64, q3: f64) -> Self {
        FimComponents { j_pp: q1, j_pa: [q2.re, -q2.im], j_aa: [[q3, 0.0], [0.0, q3]], q1, q2, q3 }
    }

    pub fn full(&self) -> [[f64; 3]; 3] {
        let [a, b] = self.j_pa;
        [[self.j_pp, a, b], [a, self.j_aa[0][0], self.j_aa[0][1]], [b, self.j_aa[1][0], self.j_aa[1][1]]]
    }
}

pub fn fim(w: &CMat, th: &Thetas) -> FimComponents {
    let q1 = q_functional(&th.t[0], w).re;
    let q2 = q_functional(&th.t[1], w);
    let q3 = q_functional(&th.t[2], w).re;
    FimComponents::from_q(q1, q2, q3)
}

/// Schur complement `q₁ − |q₂|²/q₃`; `None` when `q₃ ≤ 0`.
pub fn schur(q1: f64, q2: Complex64, q3: f64) -> Option<f64> {
    (q3 > 0.0).then(|| q1 - q2.norm_sqr() / q3)
}

/// `1/(q₁ − |q₂|²/q₃)`.
pub fn crb(f: &FimComponents) -> Result<f64> {
    match schur(f.q1, f.q2, f.q3) {
        Some(s) if s > 0.0 => Ok(1.0 / s),
        _ => Err(IsacError::Numerical("Fisher information is singular; DoA not identifiable".into())),
    }
}

/// CRB with non-identifiable configurations mapped to `+∞`.
pub fn crb_or_inf(f: &FimComponents) -> f64 {
    crb(f).unwrap_or(f64::INFINITY)
}
