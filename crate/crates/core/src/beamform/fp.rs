//! Quadratic-transform auxiliaries of the weighted sum rate.
//!
//! `Φ` is reported in bits: the natural-log quadratic transform divided by
//! `ln 2`, so that substituting the optimal auxiliaries gives
//! `Σ ω_i log₂(1+γ_i)` exactly.

use std::f64::consts::LN_2;

use num_complex::Complex64;

use crate::{CMat, CVec};

/// `|h_iᴴ w_n|²` summed over every column, `Σ_n |h_iᴴw_n|²`.
fn total_power(h: &CVec, w: &CMat) -> (f64, CVec) {
    let g = (h.adjoint() * w).transpose();
    let tot = g.iter().map(|x| x.norm_sqr()).sum();
    (tot, g)
}

/// `υ*_i = γ_i`.
pub fn fp_update_upsilon(w: &CMat, h: &[CVec], sigma2: f64) -> Vec<f64> {
    crate::metrics::sinr_all(h, w, sigma2)
}

/// `b*_i = √(ω_i(1+υ_i))·h_iᴴw_i / (Σ_n |h_iᴴw_n|² + σ²)`.
pub fn fp_update_b(w: &CMat, upsilon: &[f64], h: &[CVec], omega: &[f64], sigma2: f64) -> Vec<Complex64> {
    h.iter()
        .enumerate()
        .map(|(i, hi)| {
            let (tot, g) = total_power(hi, w);
            g[i] * ((omega[i] * (1.0 + upsilon[i])).sqrt() / (tot + sigma2))
        })
        .collect()
}

/// Linear and quadratic data of the FP surrogate in `w`. The quadratic part
/// `‖Fw‖² = Σ_i |b_i|² Σ_n |h_iᴴw_n|²` is applied through the M×M matrix
/// `R = Σ_i |b_i|² h_i h_iᴴ` acting on every column.
#[derive(Debug, Clone)]
pub struct FpAssembly {
    /// `f` reshaped to M×(N+M); radar columns are zero.
    pub f: CMat,
    pub b: Vec<Complex64>,
    pub h: Vec<CVec>,
    pub omega: Vec<f64>,
    pub upsilon: Vec<f64>,
    pub sigma2: f64,
}

pub fn assemble_f(
    upsilon: &[f64],
    b: &[Complex64],
    h: &[CVec],
    omega: &[f64],
    ncols: usize,
    sigma2: f64,
) -> FpAssembly {
    let m = h.first().map_or(0, |x| x.len());
    let mut f = CMat::zeros(m, ncols);
    for (i, hi) in h.iter().enumerate() {
        let s = 2.0 * (omega[i] * (1.0 + upsilon[i])).sqrt();
        f.set_column(i, &(hi * (b[i] * s)));
    }
    FpAssembly { f, b: b.to_vec(), h: h.to_vec(), omega: omega.to_vec(), upsilon: upsilon.to_vec(), sigma2 }
}

impl FpAssembly {
    pub fn r_matrix(&self) -> CMat {
        let m = self.f.nrows();
        let mut r = CMat::zeros(m, m);
        for (bi, hi) in self.b.iter().zip(&self.h) {
            let s = bi.norm_sqr();
            if s > 0.0 {
                r += hi * hi.adjoint() * Complex64::new(s, 0.0);
            }
        }
        r
    }

    /// `‖Fw‖²` by direct summation.
    pub fn f_norm_sq(&self, w: &CMat) -> f64 {
        self.b.iter().zip(&self.h).map(|(bi, hi)| bi.norm_sqr() * (hi.adjoint() * w).norm_squared()).sum()
    }

    /// `Re{fᴴw}`.
    pub fn linear(&self, w: &CMat) -> f64 {
        self.f.dotc(w).re
    }

    /// Terms of the natural-log transform that do not depend on `w`.
    pub fn delta(&self) -> f64 {
        self.omega
            .iter()
            .zip(&self.upsilon)
            .zip(&self.b)
            .map(|((&om, &up), bi)| om * (1.0 + up).ln() - om * up - bi.norm_sqr() * self.sigma2)
            .sum()
    }

    /// `Φ(w, υ, b)` in bits.
    pub fn phi(&self, w: &CMat) -> f64 {
        (self.linear(w) - self.f_norm_sq(w) + self.delta()) / LN_2
    }
}

/// `Φ(w, υ, b)` in bits, evaluated term by term.
pub fn fp_objective(w: &CMat, upsilon: &[f64], b: &[Complex64], h: &[CVec], omega: &[f64], sigma2: f64) -> f64 {
    let mut acc = 0.0;
    for (i, hi) in h.iter().enumerate() {
        let (tot, g) = total_power(hi, w);
        let (om, up) = (omega[i], upsilon[i]);
        acc += om * (1.0 + up).ln() - om * up + 2.0 * (om * (1.0 + up)).sqrt() * (b[i].conj() * g[i]).re
            - b[i].norm_sqr() * (tot + sigma2);
    }
    acc / LN_2
}

/// `Φ(w, υ)` with `b` eliminated, in bits.
pub fn fp_objective_upsilon(w: &CMat, upsilon: &[f64], h: &[CVec], omega: &[f64], sigma2: f64) -> f64 {
    let mut acc = 0.0;
    for (i, hi) in h.iter().enumerate() {
        let (tot, g) = total_power(hi, w);
        let (om, up) = (omega[i], upsilon[i]);
        acc += om * (1.0 + up).ln() - om * up + om * (1.0 + up) * g[i].norm_sqr() / (tot + sigma2);
    }
    acc / LN_2
}

/// `Σ ω_i log₂(1+γ_i)`.
pub fn weighted_rate(w: &CMat, h: &[CVec], omega: &[f64], sigma2: f64) -> f64 {
    crate::metrics::sinr_all(h, w, sigma2).iter().zip(omega).map(|(g, om)| om * (1.0 + g).log2()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(rng: &mut ChaCha8Rng) -> Complex64 {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    }

    fn instance(seed: u64, m: usize, n: usize) -> (CMat, Vec<CVec>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = CMat::from_fn(m, n + m, |_, _| c(&mut rng));
        let h = (0..n).map(|_| CVec::from_fn(m, |_, _| c(&mut rng) * 2.0)).collect();
        let omega = (0..n).map(|i| if i % 3 == 2 { 0.0 } else { 0.5 }).collect();
        (w, h, omega)
    }

    #[test]
    fn zero_beams_zero_upsilon() {
        let (_, h, _) = instance(1, 3, 2);
        assert!(fp_update_upsilon(&CMat::zeros(3, 5), &h, 0.1).iter().all(|&u| u == 0.0));
    }

    #[test]
    fn upsilon_stationary() {
        let (w, h, omega) = instance(2, 4, 3);
        let s2 = 0.3;
        let up = fp_update_upsilon(&w, &h, s2);
        for i in 0..3 {
            let e = 1e-5;
            let mut a = up.clone();
            let mut b = up.clone();
            a[i] += e;
            b[i] -= e;
            let d = (fp_objective_upsilon(&w, &a, &h, &omega, s2) - fp_objective_upsilon(&w, &b, &h, &omega, s2))
                / (2.0 * e);
            assert!(d.abs() < 1e-6, "{d}");
        }
    }

    #[test]
    fn b_orthogonal_is_zero() {
        let h = vec![CVec::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)])];
        let mut w = CMat::zeros(2, 3);
        w[(1, 0)] = Complex64::new(1.0, 0.0);
        w[(0, 1)] = Complex64::new(1.0, 0.0);
        let up = fp_update_upsilon(&w, &h, 1.0);
        assert_eq!(fp_update_b(&w, &up, &h, &[1.0], 1.0)[0], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn assembly_identities() {
        let (w, h, omega) = instance(3, 4, 3);
        let s2 = 0.2;
        let up = fp_update_upsilon(&w, &h, s2);
        let b = fp_update_b(&w, &up, &h, &omega, s2);
        let fp = assemble_f(&up, &b, &h, &omega, w.ncols(), s2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = CMat::from_fn(4, 7, |_, _| c(&mut rng));
        let direct: f64 = (0..3)
            .map(|i| 2.0 * (omega[i] * (1.0 + up[i])).sqrt() * (b[i].conj() * h[i].dotc(&x.column(i).into_owned())).re)
            .sum();
        assert!((fp.linear(&x) - direct).abs() < 1e-12);
        let mut quad = 0.0;
        for i in 0..3 {
            for n in 0..7 {
                quad += b[i].norm_sqr() * h[i].dotc(&x.column(n).into_owned()).norm_sqr();
            }
        }
        assert!((fp.f_norm_sq(&x) - quad).abs() < 1e-12);
        let r = fp.r_matrix();
        let via_r: f64 = (0..7).map(|n| x.column(n).dotc(&(&r * x.column(n))).re).sum();
        assert!((via_r - quad).abs() < 1e-12);
        let zero = assemble_f(&up, &[Complex64::new(0.0, 0.0); 3], &h, &omega, 7, s2);
        assert_eq!(zero.f.norm(), 0.0);
        assert_eq!(zero.f_norm_sq(&x), 0.0);
    }
}
