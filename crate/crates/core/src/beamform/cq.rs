//! Euclidean projection onto the CRB feasible set in `(q₁, q₂, q₃)`.
//!
//! With `x = q₁ − 1/ε`, `y = q₃`, `z = q₂` the set is the rotated cone
//! `K = {x ≥ 0, y ≥ 0, xy ≥ |z|²}`. Its dual under the real inner product on
//! `(x, y, Re z, Im z)` is `K* = {a ≥ 0, b ≥ 0, 4ab ≥ |c|²}`, which gives a
//! method-independent optimality certificate through Moreau's decomposition.

use num_complex::Complex64;

use crate::error::{IsacError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CqSolution {
    /// `C = q₁ − |q₂|²/q₃`, or `q₁` when `q₃ = 0`.
    pub c: f64,
    pub q1: f64,
    pub q2: Complex64,
    pub q3: f64,
    pub kkt_residual: f64,
}

#[derive(Debug, Clone, Copy)]
struct P {
    x: f64,
    y: f64,
    z: Complex64,
}

impl P {
    fn dist2(&self, o: &P) -> f64 {
        (self.x - o.x).powi(2) + (self.y - o.y).powi(2) + (self.z - o.z).norm_sqr()
    }
    fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z.norm_sqr()).sqrt()
    }
}

/// Distance-like violation of `K`.
fn cone_violation(p: &P) -> f64 {
    let r = (p.x.max(0.0) * p.y.max(0.0)).sqrt();
    (-p.x).max(-p.y).max(p.z.norm() - r).max(0.0)
}

fn dual_violation(e: &P) -> f64 {
    let r = (e.x.max(0.0) * e.y.max(0.0)).sqrt();
    (-e.x).max(-e.y).max(e.z.norm() / 2.0 - r).max(0.0)
}

/// Certificate residual of `p` as the projection of `p0`: `p ∈ K`,
/// `p − p0 ∈ K*` and `⟨p − p0, p⟩ = 0`, scaled by `1 + ‖p0‖`.
fn certificate(p: &P, p0: &P) -> f64 {
    let e = P { x: p.x - p0.x, y: p.y - p0.y, z: p.z - p0.z };
    let s = 1.0 + p0.norm();
    let orth = (e.x * p.x + e.y * p.y + (e.z.conj() * p.z).re).abs();
    (cone_violation(p) / s).max(dual_violation(&e) / s).max(orth / (s * s))
}

/// Stationary point on the smooth boundary for multiplier `μ`.
fn boundary_point(p0: &P, mu: f64) -> P {
    let d = 1.0 - mu * mu / 4.0;
    P { x: (p0.x + mu * p0.y / 2.0) / d, y: (p0.y + mu * p0.x / 2.0) / d, z: p0.z / (1.0 + mu) }
}

fn phi(p0: &P, mu: f64) -> Option<f64> {
    let p = boundary_point(p0, mu);
    (p.x > 0.0 && p.y > 0.0 && p.x.is_finite() && p.y.is_finite()).then(|| p.x * p.y - p.z.norm_sqr())
}

/// Multiplier intervals on which the stationary point has `x, y > 0`.
/// For `μ < 2` both numerators must be positive, for `μ > 2` both negative;
/// each condition is linear in `μ`.
fn mu_intervals(p0: &P) -> Vec<(f64, f64)> {
    // Solutions of `a + μb/2 > 0` (sign +1) or `< 0` (sign −1) as an interval.
    let half = |a: f64, b: f64, sign: f64| -> (f64, f64) {
        let (a, b) = (sign * a, sign * b / 2.0);
        if b == 0.0 {
            if a > 0.0 {
                (f64::NEG_INFINITY, f64::INFINITY)
            } else {
                (0.0, 0.0)
            }
        } else if b > 0.0 {
            (-a / b, f64::INFINITY)
        } else {
            (f64::NEG_INFINITY, -a / b)
        }
    };
    let mut out = Vec::new();
    for (lo0, hi0, sign) in [(0.0f64, 2.0f64, 1.0f64), (2.0, f64::INFINITY, -1.0)] {
        let (l1, h1) = half(p0.x, p0.y, sign);
        let (l2, h2) = half(p0.y, p0.x, sign);
        let lo = lo0.max(l1).max(l2);
        let hi = hi0.min(h1).min(h2);
        if hi > lo {
            out.push((lo, hi));
        }
    }
    out
}

/// Sample points in `(lo, hi)`, clustered towards both ends.
fn samples(lo: f64, hi: f64) -> Vec<f64> {
    let mut s = Vec::new();
    if hi.is_finite() {
        let w = hi - lo;
        for i in 1..400 {
            s.push(lo + w * i as f64 / 400.0);
        }
        for i in 0..=60 {
            let e = 10f64.powf(-1.0 - 15.0 * i as f64 / 60.0);
            s.push(lo + w * e);
            s.push(hi - w * e);
        }
    } else {
        for i in 0..=600 {
            let e = 10f64.powf(-15.0 + 30.0 * i as f64 / 600.0);
            s.push(lo + e * lo.max(1.0));
        }
    }
    s.retain(|&m| m > lo && m < hi);
    s.sort_by(f64::total_cmp);
    s.dedup();
    s
}

fn boundary_candidates(p0: &P) -> Vec<P> {
    let mut out = Vec::new();
    for (lo, hi) in mu_intervals(p0) {
        let grid = samples(lo, hi);
        let vals: Vec<Option<f64>> = grid.iter().map(|&m| phi(p0, m)).collect();
        for i in 0..grid.len().saturating_sub(1) {
            let (Some(fa), Some(fb)) = (vals[i], vals[i + 1]) else { continue };
            if fa == 0.0 {
                out.push(boundary_point(p0, grid[i]));
                continue;
            }
            if fa.signum() == fb.signum() {
                continue;
            }
            let (mut lo, mut hi) = (grid[i], grid[i + 1]);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                match phi(p0, mid) {
                    Some(f) if f.signum() == fa.signum() => lo = mid,
                    Some(_) => hi = mid,
                    None => break,
                }
            }
            let mut p = boundary_point(p0, 0.5 * (lo + hi));
            // Snap onto the cone surface; the correction is at rounding level.
            let r = (p.x * p.y).sqrt();
            if p.z.norm() > r {
                p.z *= r / p.z.norm();
            }
            out.push(p);
        }
    }
    out
}

/// Projects `t = (t₁, t₂, t₃)` onto `{C ≥ 1/ε, C ≤ q₁ − |q₂|²/q₃}`.
/// `ε = ∞` drops the lower bound on `C`.
pub fn solve_cq(t1: f64, t2: Complex64, t3: f64, epsilon: f64) -> Result<CqSolution> {
    if !(t1.is_finite() && t2.re.is_finite() && t2.im.is_finite() && t3.is_finite()) || !(epsilon > 0.0) {
        return Err(IsacError::Numerical(format!("solve_cq: bad input t=({t1}, {t2}, {t3}), ε={epsilon}")));
    }
    let kappa = if epsilon.is_infinite() { 0.0 } else { 1.0 / epsilon };
    let p0 = P { x: t1 - kappa, y: t3, z: t2 };

    let best = if cone_violation(&p0) == 0.0 {
        p0
    } else {
        let mut cands = boundary_candidates(&p0);
        cands.push(P { x: p0.x.max(0.0), y: 0.0, z: Complex64::new(0.0, 0.0) });
        cands.push(P { x: 0.0, y: p0.y.max(0.0), z: Complex64::new(0.0, 0.0) });
        cands.push(P { x: 0.0, y: 0.0, z: Complex64::new(0.0, 0.0) });
        let scale = 1.0 + p0.norm();
        cands
            .into_iter()
            .filter(|p| cone_violation(p) <= 1e-12 * scale)
            .min_by(|a, b| a.dist2(&p0).total_cmp(&b.dist2(&p0)))
            .ok_or_else(|| IsacError::Numerical("solve_cq: no feasible candidate".into()))?
    };

    let kkt = certificate(&best, &p0);
    let q1 = best.x + kappa;
    let c = if best.y > 0.0 { q1 - best.z.norm_sqr() / best.y } else { q1 };
    Ok(CqSolution { c, q1, q2: best.z, q3: best.y, kkt_residual: kkt })
}
