//! Majorizer of the augmented-Lagrangian penalty `(1/2ρ)Σ_j |Q_j(W) + c_j|²`.
//!
//! Each `|Q + c|² = |Q|² + 2Re{c̄Q} + |c|²` is bounded term by term at `W⁰`:
//!
//! * `2Re{c̄Q} = wᴴ(I⊗B)w` with `B = c̄Θ + cΘᴴ` Hermitian, majorized by
//!   `λ⁺‖w‖² + 2Re{wᴴ(B − λ⁺I)w⁰} + w⁰ᴴ(λ⁺I − B)w⁰`, `λ⁺ = max(λ_max(B), 0)`;
//! * `|Q|² ≤ |vᴴw|² + |uᴴw|² + λ̂‖w‖⁴ − 4λ̂‖w⁰‖²Re{w⁰ᴴw} + 3λ̂‖w⁰‖⁴ − |Q⁰|²`
//!   with `v = vec(ΘᴴW⁰)`, `u = vec(ΘW⁰)`, `λ̂ = σ_max(Θ)²`.
//!
//! Both bounds are tight at `W⁰`, so the surrogate equals the penalty there.
//! The quartic keeps `‖w‖` rather than its power-budget bound, which keeps
//! the majorizer tight away from the sphere `‖w‖² = P`.

use num_complex::Complex64;

use crate::metrics::q_functional;
use crate::CMat;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmBounds {
    /// `max(λ_max(c̄Θ + cΘᴴ), 0)`.
    pub lambda: f64,
    /// `σ_max(Θ)²`.
    pub lambda_hat: f64,
}

pub fn mm_bounds(theta: &CMat, c: Complex64) -> MmBounds {
    let b = theta * c.conj() + theta.adjoint() * c;
    let lambda = b.symmetric_eigen().eigenvalues.max().max(0.0);
    let smax = theta.clone().svd(false, false).singular_values.max();
    MmBounds { lambda, lambda_hat: smax * smax }
}

/// Surrogate of one term `|Q_j(W) + c_j|²` around `W⁰` (no `1/2ρ` factor).
#[derive(Debug, Clone)]
pub struct PenaltyBlock {
    pub theta: CMat,
    pub c: Complex64,
    pub bounds: MmBounds,
    /// `(B − λ⁺I)W⁰`.
    lin: CMat,
    v: CMat,
    u: CMat,
    w0: CMat,
    w0_norm2: f64,
    constant: f64,
}

impl PenaltyBlock {
    pub fn new(theta: &CMat, c: Complex64, w0: &CMat) -> Self {
        let bounds = mm_bounds(theta, c);
        let m = theta.nrows();
        let b = theta * c.conj() + theta.adjoint() * c;
        let lin = (&b - CMat::identity(m, m) * Complex64::new(bounds.lambda, 0.0)) * w0;
        let v = theta.adjoint() * w0;
        let u = theta * w0;
        let w0_norm2 = w0.norm_squared();
        let q0 = q_functional(theta, w0);
        let bq: f64 = w0.dotc(&(&b * w0)).re;
        let lh = bounds.lambda_hat;
        let constant = bounds.lambda * w0_norm2 - bq + 3.0 * lh * w0_norm2 * w0_norm2 - q0.norm_sqr() + c.norm_sqr();
        PenaltyBlock { theta: theta.clone(), c, bounds, lin, v, u, w0: w0.clone(), w0_norm2, constant }
    }

    /// Exact `|Q(W) + c|²`.
    pub fn exact(&self, w: &CMat) -> f64 {
        (q_functional(&self.theta, w) + self.c).norm_sqr()
    }

    pub fn value(&self, w: &CMat) -> f64 {
        let n2 = w.norm_squared();
        let lh = self.bounds.lambda_hat;
        self.bounds.lambda * n2
            + 2.0 * self.lin.dotc(w).re
            + self.v.dotc(w).norm_sqr()
            + self.u.dotc(w).norm_sqr()
            + lh * n2 * n2
            - 4.0 * lh * self.w0_norm2 * self.w0.dotc(w).re
            + self.constant
    }

    /// `value(x + d) − value(x)`, formed without the large cancelling
    /// constants so that small steps keep their relative accuracy.
    pub fn value_delta(&self, x: &CMat, d: &CMat) -> f64 {
        let n0 = x.norm_squared();
        let s = 2.0 * x.dotc(d).re + d.norm_squared();
        let lh = self.bounds.lambda_hat;
        let quad = |a: &CMat| {
            let ax = a.dotc(x);
            let ad = a.dotc(d);
            2.0 * (ax.conj() * ad).re + ad.norm_sqr()
        };
        self.bounds.lambda * s + 2.0 * self.lin.dotc(d).re + quad(&self.v) + quad(&self.u) + lh * s * (2.0 * n0 + s)
            - 4.0 * lh * self.w0_norm2 * self.w0.dotc(d).re
    }

    /// `2∂/∂W̄` of [`Self::value`].
    pub fn gradient(&self, w: &CMat) -> CMat {
        let n2 = w.norm_squared();
        let lh = self.bounds.lambda_hat;
        let vw = self.v.dotc(w);
        let uw = self.u.dotc(w);
        w * Complex64::new(2.0 * self.bounds.lambda + 4.0 * lh * n2, 0.0)
            + &self.lin * Complex64::new(2.0, 0.0)
            + &self.v * (vw * 2.0)
            + &self.u * (uw * 2.0)
            - &self.w0 * Complex64::new(4.0 * lh * self.w0_norm2, 0.0)
    }

    /// Bound on the real Hessian norm over the ball `‖w‖² ≤ r2`.
    pub fn lipschitz(&self, r2: f64) -> f64 {
        2.0 * self.bounds.lambda
            + 2.0 * self.v.norm_squared()
            + 2.0 * self.u.norm_squared()
            + 12.0 * self.bounds.lambda_hat * r2
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rc(rng: &mut ChaCha8Rng) -> Complex64 {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    }

    #[test]
    fn majorizes_and_touches() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let theta = CMat::from_fn(3, 3, |_, _| rc(&mut rng));
            let c = rc(&mut rng) * 3.0;
            let w0 = CMat::from_fn(3, 4, |_, _| rc(&mut rng));
            let blk = PenaltyBlock::new(&theta, c, &w0);
            assert!((blk.value(&w0) - blk.exact(&w0)).abs() < 1e-10 * (1.0 + blk.exact(&w0)));
            for _ in 0..50 {
                let w = CMat::from_fn(3, 4, |_, _| rc(&mut rng) * 2.0);
                assert!(blk.value(&w) >= blk.exact(&w) - 1e-10 * (1.0 + blk.exact(&w)));
            }
        }
    }

    #[test]
    fn delta_matches_difference_of_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let theta = CMat::from_fn(3, 3, |_, _| rc(&mut rng));
        let w0 = CMat::from_fn(3, 2, |_, _| rc(&mut rng));
        let blk = PenaltyBlock::new(&theta, rc(&mut rng), &w0);
        for _ in 0..20 {
            let x = CMat::from_fn(3, 2, |_, _| rc(&mut rng));
            let d = CMat::from_fn(3, 2, |_, _| rc(&mut rng));
            let want = blk.value(&(&x + &d)) - blk.value(&x);
            assert!((blk.value_delta(&x, &d) - want).abs() < 1e-10 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn gradient_matches_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let theta = CMat::from_fn(2, 2, |_, _| rc(&mut rng));
        let w0 = CMat::from_fn(2, 3, |_, _| rc(&mut rng));
        let blk = PenaltyBlock::new(&theta, rc(&mut rng), &w0);
        let w = CMat::from_fn(2, 3, |_, _| rc(&mut rng));
        let g = blk.gradient(&w);
        let e = 1e-6;
        for idx in 0..6 {
            for dir in [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)] {
                let mut wp = w.clone();
                let mut wm = w.clone();
                wp[idx] += dir * e;
                wm[idx] -= dir * e;
                let fd = (blk.value(&wp) - blk.value(&wm)) / (2.0 * e);
                let an = (g[idx].conj() * dir).re;
                assert!((fd - an).abs() < 1e-6 * (1.0 + an.abs()), "{fd} {an}");
            }
        }
    }

    #[test]
    fn bounds_dominate_hermitian_and_spectral() {
        let theta =
            CMat::from_diagonal(&crate::CVec::from_vec(vec![Complex64::new(2.0, 0.0), Complex64::new(-1.0, 0.0)]));
        let b = mm_bounds(&theta, Complex64::new(1.0, 0.0));
        assert!((b.lambda - 4.0).abs() < 1e-12);
        assert!((b.lambda_hat - 4.0).abs() < 1e-12);
        assert_eq!(mm_bounds(&theta, Complex64::new(0.0, 0.0)).lambda, 0.0);
    }
}
