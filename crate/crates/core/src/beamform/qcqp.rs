//! The `w`-subproblem: minimize the FP quadratic plus the majorized penalty
//! over the power ball intersected with the linearized detection constraint.
//!
//! Solved by accelerated projected gradient with backtracking and adaptive
//! restart. The feasible set is a ball cut by one half-space, whose
//! projection has a closed form.

use num_complex::Complex64;

use super::fp::FpAssembly;
use super::mm::PenaltyBlock;
use crate::error::{IsacError, Result};
use crate::{CMat, CVec};

/// `‖ḡᴴW‖² ≥ τ` for a unit-direction `ḡ`, linearized at `W⁰` into
/// `Re⟨D, W⟩ ≥ β` with `D = ḡḡᴴW⁰`, `β = (τ + ‖ḡᴴW⁰‖²)/2`.
#[derive(Debug, Clone)]
pub struct SnrConstraint {
    pub g: CVec,
    pub tau: f64,
}

#[derive(Debug, Clone)]
pub struct HalfSpace {
    pub d: CMat,
    pub beta: f64,
}

impl SnrConstraint {
    pub fn linearize(&self, w0: &CMat) -> Option<HalfSpace> {
        if self.tau <= 0.0 {
            return None;
        }
        let gw = self.g.adjoint() * w0;
        let d = &self.g * &gw;
        // Keeps the true constraint strictly satisfied under rounding.
        let beta = (self.tau * (1.0 + 1e-9) + gw.norm_squared()) / 2.0;
        Some(HalfSpace { d, beta })
    }

    pub fn holds(&self, w: &CMat) -> bool {
        self.tau <= 0.0 || (self.g.adjoint() * w).norm_squared() >= self.tau
    }
}

/// Exact projection onto `{‖W‖² ≤ r2} ∩ {Re⟨D,W⟩ ≥ β}`.
pub fn project(x: &CMat, r2: f64, hs: Option<&HalfSpace>) -> Result<CMat> {
    let r = r2.sqrt();
    let ball = |y: CMat| {
        let n = y.norm();
        if n > r {
            y * Complex64::new(r / n, 0.0)
        } else {
            y
        }
    };
    let Some(hs) = hs else { return Ok(ball(x.clone())) };
    let an = hs.d.norm();
    if an == 0.0 {
        return if hs.beta <= 0.0 {
            Ok(ball(x.clone()))
        } else {
            Err(IsacError::InfeasibleSensing("linearized detection constraint has no direction".into()))
        };
    }
    if hs.beta > r * an {
        return Err(IsacError::InfeasibleSensing(format!(
            "detection half-space misses the power ball (β = {:.3e}, r‖D‖ = {:.3e})",
            hs.beta,
            r * an
        )));
    }
    let inside_h = |y: &CMat| hs.d.dotc(y).re >= hs.beta;
    if x.norm_squared() <= r2 && inside_h(x) {
        return Ok(x.clone());
    }
    // Onto the hyperplane.
    let s = hs.d.dotc(x).re;
    if s < hs.beta {
        let y = x + &hs.d * Complex64::new((hs.beta - s) / (an * an), 0.0);
        if y.norm_squared() <= r2 {
            return Ok(y);
        }
    }
    let y = ball(x.clone());
    if inside_h(&y) {
        return Ok(y);
    }
    // Onto the circle where the hyperplane meets the sphere.
    let dhat = &hs.d / Complex64::new(an, 0.0);
    let c0 = &dhat * Complex64::new(hs.beta / an, 0.0);
    let along = dhat.dotc(x).re;
    let perp = x - &dhat * Complex64::new(along, 0.0);
    let rho = (r2 - (hs.beta / an).powi(2)).max(0.0).sqrt();
    let pn = perp.norm();
    if pn == 0.0 {
        return Ok(c0);
    }
    Ok(c0 + perp * Complex64::new(rho / pn, 0.0))
}

/// Objective of the `w`-subproblem:
/// `κ_c(‖Fw‖² − Re{fᴴw}) + inv_2rho·Σ_j S_j(W)`.
pub struct WObjective<'a> {
    pub fp: &'a FpAssembly,
    pub r: CMat,
    pub comm_weight: f64,
    pub inv_2rho: f64,
    pub blocks: Vec<PenaltyBlock>,
}

impl<'a> WObjective<'a> {
    pub fn new(fp: &'a FpAssembly, comm_weight: f64, inv_2rho: f64, blocks: Vec<PenaltyBlock>) -> Self {
        WObjective { fp, r: fp.r_matrix(), comm_weight, inv_2rho, blocks }
    }

    fn comm(&self, w: &CMat) -> f64 {
        let rw = &self.r * w;
        self.comm_weight * (w.dotc(&rw).re - self.fp.linear(w))
    }

    pub fn value(&self, w: &CMat) -> f64 {
        let pen: f64 = self.blocks.iter().map(|b| b.value(w)).sum();
        self.comm(w) + self.inv_2rho * pen
    }

    /// With the penalty evaluated exactly rather than through its majorizer.
    pub fn exact_value(&self, w: &CMat) -> f64 {
        let pen: f64 = self.blocks.iter().map(|b| b.exact(w)).sum();
        self.comm(w) + self.inv_2rho * pen
    }

    /// `value(x + d) − value(x)` without cancellation.
    pub fn value_delta(&self, x: &CMat, d: &CMat) -> f64 {
        let rd = &self.r * d;
        let comm = 2.0 * rd.dotc(x).re + d.dotc(&rd).re - self.fp.linear(d);
        let pen: f64 = self.blocks.iter().map(|b| b.value_delta(x, d)).sum();
        self.comm_weight * comm + self.inv_2rho * pen
    }

    pub fn gradient(&self, w: &CMat) -> CMat {
        let mut g = (&self.r * w * Complex64::new(2.0, 0.0) - &self.fp.f) * Complex64::new(self.comm_weight, 0.0);
        for b in &self.blocks {
            g += b.gradient(w) * Complex64::new(self.inv_2rho, 0.0);
        }
        g
    }

    pub fn lipschitz(&self, r2: f64) -> f64 {
        let rmax = self.r.clone().symmetric_eigen().eigenvalues.max().max(0.0);
        let pen: f64 = self.blocks.iter().map(|b| b.lipschitz(r2)).sum();
        2.0 * self.comm_weight * rmax + self.inv_2rho * pen
    }
}

#[derive(Debug, Clone)]
pub struct WSolve {
    pub w: CMat,
    pub iterations: usize,
    /// `‖W − Π(W − ∇/L)‖·L / max(‖∇‖, ‖∇⁰‖)` at the returned point, with
    /// `L` the global Lipschitz bound and `∇⁰` the gradient at the start.
    pub kkt_residual: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct WSolveOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for WSolveOptions {
    fn default() -> Self {
        WSolveOptions { tol: 1e-6, max_iter: 5000 }
    }
}

/// Projected-gradient residual at `w`, relative to `scale` (a gradient
/// norm that does not vanish at an interior optimum).
fn kkt(obj: &WObjective, w: &CMat, l: f64, r2: f64, hs: Option<&HalfSpace>, scale: f64) -> Result<f64> {
    let g = obj.gradient(w);
    let s = g.norm().max(scale);
    if s == 0.0 {
        return Ok(0.0);
    }
    let p = project(&(w - &g / Complex64::new(l, 0.0)), r2, hs)?;
    Ok((w - p).norm() * l / s)
}

/// Minimizes `obj` over the ball of squared radius `r2` and the linearized
/// detection constraint at `w0`. Every accepted step lowers the surrogate,
/// so the result is never worse than the projection of `w0`.
pub fn solve_w(
    obj: &WObjective,
    w0: &CMat,
    r2: f64,
    snr: Option<&SnrConstraint>,
    opts: WSolveOptions,
) -> Result<WSolve> {
    let hs = snr.and_then(|c| c.linearize(w0));
    let hs = hs.as_ref();
    let l_max = obj.lipschitz(r2).max(1e-300);
    let mut l = l_max;
    let mut x = project(w0, r2, hs)?;
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut iterations = 0;
    let scale = obj.gradient(&x).norm();
    let mut res = kkt(obj, &x, l_max, r2, hs, scale)?;

    while iterations < opts.max_iter && res > opts.tol {
        iterations += 1;
        let gy = obj.gradient(&y);
        // Optimistic step, then backtrack on the quadratic upper model.
        l = (l * 0.5).max(l_max * 1e-12);
        let xn = loop {
            let cand = project(&(&y - &gy / Complex64::new(l, 0.0)), r2, hs)?;
            let d = &cand - &y;
            let rise = obj.value_delta(&y, &d);
            let model = gy.dotc(&d).re + 0.5 * l * d.norm_squared();
            if rise <= model + 1e-12 * l * d.norm_squared() || l >= l_max {
                break cand;
            }
            l = (l * 2.0).min(l_max);
        };
        let step = &xn - &x;
        let change = obj.value_delta(&x, &step);
        if change > 0.0 {
            // Restart momentum from the last iterate.
            if y == x {
                break;
            }
            y = x.clone();
            t = 1.0;
            continue;
        }
        let tn = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = &xn + step * Complex64::new((t - 1.0) / tn, 0.0);
        t = tn;
        x = xn;
        res = kkt(obj, &x, l_max, r2, hs, scale)?;
    }

    Ok(WSolve { w: x, iterations, kkt_residual: res })
}
