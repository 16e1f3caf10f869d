//! Independent oracles and fixtures shared by the integration tests and the
//! acceptance harness. Nothing here reuses the solver code paths it checks.

#![allow(dead_code)]

use isac_core::beamform::FpAssembly;
use isac_core::channel::{draw_channels, sensing_channel, Channels};
use isac_core::metrics::stack;
use isac_core::scene::{generate_scenario, Scenario, SystemConfig};
use isac_core::{CMat, CVec};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rc(r: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5)
}

pub fn cmat(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| rc(r))
}

pub fn cvec(r: &mut ChaCha8Rng, n: usize) -> CVec {
    CVec::from_fn(n, |_, _| rc(r))
}

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Configuration with a few keys overridden.
pub fn cfg_with(pairs: &[&str]) -> SystemConfig {
    let mut cfg = SystemConfig::default();
    for p in pairs {
        cfg.apply_override(p).expect("valid override");
    }
    cfg.validate().expect("valid config");
    cfg
}

pub fn instance(cfg: &SystemConfig, seed: u64) -> (Scenario, Channels) {
    let scn = generate_scenario(cfg, seed).expect("scenario");
    let ch = draw_channels(&scn, cfg, seed);
    (scn, ch)
}

/// Gaussian-model FIM over `(φ, Re α, Im α)`:
/// `J_ij = (2L/σ²_r)·Re⟨∂_i μ, ∂_j μ⟩` for the mean `μ = α g(φ)g(φ)ᴴ W`,
/// with `∂/∂φ` by central differences of the sensing channel.
pub fn fim_by_differences(
    cfg: &SystemConfig,
    dist: f64,
    angle: f64,
    alpha: Complex64,
    w: &CMat,
    step: f64,
) -> [[f64; 3]; 3] {
    let gmat = |phi: f64| {
        let g = sensing_channel(cfg, dist, phi);
        &g * g.adjoint()
    };
    let g0 = gmat(angle);
    let gdot = (gmat(angle + step) - gmat(angle - step)) / c(2.0 * step);
    let d = [&gdot * w * alpha, &g0 * w, &g0 * w * Complex64::new(0.0, 1.0)];
    let s = 2.0 * cfg.l as f64 / cfg.sigma2_r_watt();
    let mut j = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            j[a][b] = s * d[a].dotc(&d[b]).re;
        }
    }
    j
}

pub fn inverse3(m: [[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let a = DMatrix::from_fn(3, 3, |r, c| m[r][c]);
    let inv = a.try_inverse()?;
    let mut out = [[0.0; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            out[r][c] = inv[(r, c)];
        }
    }
    Some(out)
}

/// Squared distance from `t` to the CRB set after eliminating `q₁`: for a
/// fixed `(q₂, q₃)` the nearest admissible `q₁` is `max(t₁, κ + |q₂|²/q₃)`.
fn cq_dist2(t1: f64, t2: Complex64, t3: f64, kappa: f64, z: Complex64, y: f64) -> f64 {
    let floor = if y > 0.0 {
        kappa + z.norm_sqr() / y
    } else if z.norm_sqr() == 0.0 {
        kappa
    } else {
        f64::INFINITY
    };
    let q1 = t1.max(floor);
    (q1 - t1).powi(2) + (z - t2).norm_sqr() + (y - t3).powi(2)
}

/// Coarse-to-fine grid search over `(Re q₂, Im q₂, q₃ ≥ 0)`. Returns the
/// squared distance, the point `(q₁, q₂, q₃)` and the final grid step.
pub fn cq_grid_oracle(t1: f64, t2: Complex64, t3: f64, epsilon: f64) -> (f64, (f64, Complex64, f64), f64) {
    let kappa = 1.0 / epsilon;
    let span = 2.0 * (1.0 + t1.abs() + t2.norm() + t3.abs() + kappa);
    let (mut cre, mut cim, mut cy) = (0.0, 0.0, span / 2.0);
    let mut half = span;
    let pts = 24;
    let mut best = (f64::INFINITY, Complex64::new(0.0, 0.0), 0.0);
    // Boundary face y = 0 (which forces z = 0).
    let d0 = cq_dist2(t1, t2, t3, kappa, Complex64::new(0.0, 0.0), 0.0);
    if d0 < best.0 {
        best = (d0, Complex64::new(0.0, 0.0), 0.0);
    }
    for _ in 0..40 {
        let step = 2.0 * half / pts as f64;
        for i in 0..=pts {
            for jn in 0..=pts {
                for l in 0..=pts {
                    let z = Complex64::new(cre - half + step * i as f64, cim - half + step * jn as f64);
                    let y = (cy - half + step * l as f64).max(0.0);
                    let d = cq_dist2(t1, t2, t3, kappa, z, y);
                    if d < best.0 {
                        best = (d, z, y);
                    }
                }
            }
        }
        cre = best.1.re;
        cim = best.1.im;
        cy = best.2;
        half = 2.0 * step;
    }
    let step = 2.0 * half / pts as f64;
    let y = best.2;
    let q1 = t1.max(if y > 0.0 { kappa + best.1.norm_sqr() / y } else { kappa });
    (best.0, (q1, best.1, y), step)
}

/// `argmin Σ_n w_nᴴRw_n − Re⟨F, W⟩` over `‖W‖² ≤ r2` for Hermitian positive
/// definite `R`: `W(μ) = (2(R + μI))⁻¹F` with the ball multiplier `μ ≥ 0`
/// found by bisection on `‖W(μ)‖² = r2`.
pub fn ball_ls_oracle(r: &CMat, f: &CMat, r2: f64) -> CMat {
    let eig = r.clone().symmetric_eigen();
    let u = &eig.eigenvectors;
    let uf = u.adjoint() * f;
    let solve = |mu: f64| {
        let mut z = uf.clone();
        for (row, lam) in eig.eigenvalues.iter().enumerate() {
            let s = 1.0 / (2.0 * (lam + mu));
            for col in 0..z.ncols() {
                z[(row, col)] *= c(s);
            }
        }
        u * z
    };
    let w0 = solve(0.0);
    if w0.norm_squared() <= r2 {
        return w0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while solve(hi).norm_squared() > r2 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if solve(mid).norm_squared() > r2 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    solve(hi)
}

/// `I_n ⊗ A`.
pub fn kron_identity(n: usize, a: &CMat) -> CMat {
    let m = a.nrows();
    let mut out = CMat::zeros(n * m, n * m);
    for b in 0..n {
        out.view_mut((b * m, b * m), (m, m)).copy_from(a);
    }
    out
}

/// Penalty surrogate of `|Q(W) + c|²` around `W⁰`, assembled from the stacked
/// `M(N+M)`-dimensional operators `Θ̃ = I⊗Θ` and `I⊗B` rather than M×M
/// blocks. Returns `(value, gradient 2∂/∂w̄)`.
pub struct StackedSurrogate {
    pub theta_big: CMat,
    pub b_big: CMat,
    pub lambda: f64,
    pub lambda_hat: f64,
    pub w0: CVec,
    pub c: Complex64,
}

impl StackedSurrogate {
    pub fn new(theta: &CMat, c: Complex64, w0: &CMat) -> Self {
        let n = w0.ncols();
        let theta_big = kron_identity(n, theta);
        let b_big = &theta_big * c.conj() + theta_big.adjoint() * c;
        let lambda = b_big.clone().symmetric_eigen().eigenvalues.max().max(0.0);
        let smax = theta_big.clone().svd(false, false).singular_values.max();
        StackedSurrogate { theta_big, b_big, lambda, lambda_hat: smax * smax, w0: stack(w0), c }
    }

    pub fn q(&self, w: &CVec) -> Complex64 {
        w.dotc(&(&self.theta_big * w))
    }

    /// `|Q|²` as the quadratic form `xᴴΘ̂x` in `x = vec(wwᴴ)` with
    /// `Θ̂ = ttᴴ`, `t = vec(Θ̃ᴴ)`.
    pub fn q_abs2_lifted(&self, w: &CVec) -> f64 {
        let x = w * w.adjoint();
        let x = CVec::from_column_slice(x.as_slice());
        let th = self.theta_big.adjoint();
        let t = CVec::from_column_slice(th.as_slice());
        let theta_hat = &t * t.adjoint();
        (x.adjoint() * theta_hat * &x)[(0, 0)].re
    }

    pub fn exact(&self, w: &CVec) -> f64 {
        (self.q(w) + self.c).norm_sqr()
    }

    pub fn value(&self, w: &CVec) -> f64 {
        let w0 = &self.w0;
        let dim = w.len();
        let eye = CMat::identity(dim, dim);
        let bl = &self.b_big - &eye * c(self.lambda);
        let v = self.theta_big.adjoint() * w0;
        let u = &self.theta_big * w0;
        let n2 = w.norm_squared();
        let n02 = w0.norm_squared();
        let lh = self.lambda_hat;
        let q0 = self.q(w0);
        self.lambda * n2 + 2.0 * w.dotc(&(&bl * w0)).re - w0.dotc(&(&bl * w0)).re
            + v.dotc(w).norm_sqr()
            + u.dotc(w).norm_sqr()
            + lh * n2 * n2
            - 4.0 * lh * n02 * w0.dotc(w).re
            + 3.0 * lh * n02 * n02
            - q0.norm_sqr()
            + self.c.norm_sqr()
    }

    pub fn gradient(&self, w: &CVec) -> CVec {
        let w0 = &self.w0;
        let dim = w.len();
        let eye = CMat::identity(dim, dim);
        let bl = &self.b_big - &eye * c(self.lambda);
        let v = self.theta_big.adjoint() * w0;
        let u = &self.theta_big * w0;
        let lh = self.lambda_hat;
        w * c(2.0 * self.lambda + 4.0 * lh * w.norm_squared())
            + &bl * w0 * c(2.0)
            + &v * (v.dotc(w) * 2.0)
            + &u * (u.dotc(w) * 2.0)
            - w0 * c(4.0 * lh * w0.norm_squared())
    }
}

/// Explicit FP operator `F` with rows `b_i h_iᴴ` acting on every column:
/// `‖Fw‖² = Σ_i |b_i|² Σ_n |h_iᴴw_n|²` on `w = vec(W)`.
pub fn explicit_f(b: &[Complex64], h: &[CVec], ncols: usize) -> CMat {
    let m = h[0].len();
    let rows = b.len() * ncols;
    let mut f = CMat::zeros(rows, m * ncols);
    for (i, (bi, hi)) in b.iter().zip(h).enumerate() {
        for n in 0..ncols {
            for r in 0..m {
                f[(i * ncols + n, n * m + r)] = bi * hi[r].conj();
            }
        }
    }
    f
}

/// Monte-Carlo detection probability: the statistic is `μ|z|²`, `z ~ CN(0,1)`,
/// with the threshold placed at the `1 − P_FA` quantile under `μ₀` (itself
/// estimated from samples).
pub fn detection_probability_mc(p_fa: f64, ratio: f64, samples: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut draw = |mu: f64| -> Vec<f64> {
        (0..samples)
            .map(|_| {
                let a: f64 = r.sample(rand_distr::StandardNormal);
                let b: f64 = r.sample(rand_distr::StandardNormal);
                mu * (a * a + b * b) / 2.0
            })
            .collect()
    };
    let mut h0 = draw(1.0);
    h0.sort_by(f64::total_cmp);
    let idx = ((1.0 - p_fa) * samples as f64) as usize;
    let thr = h0[idx.min(samples - 1)];
    let h1 = draw(ratio);
    h1.iter().filter(|&&x| x > thr).count() as f64 / samples as f64
}

/// Every CU assigned exactly once, entries binary, every BS serving one or
/// more CUs.
pub fn association_valid(u: &[Vec<u8>]) -> bool {
    let k = u.len();
    if k == 0 {
        return false;
    }
    let n = u[0].len();
    let binary = u.iter().all(|row| row.len() == n && row.iter().all(|&x| x <= 1));
    let columns = (0..n).all(|i| u.iter().map(|row| row[i] as usize).sum::<usize>() == 1);
    let rows = u.iter().all(|row| row.iter().map(|&x| x as usize).sum::<usize>() >= 1);
    binary && columns && rows
}

/// Whether `p` has a local maximum within `tol` grid steps of index `at`.
pub fn peak_near(maxima: &[usize], at: usize, tol: usize) -> bool {
    maxima.iter().any(|&i| i.abs_diff(at) <= tol)
}

pub fn non_decreasing(trace: &[f64], slack: f64) -> bool {
    trace.windows(2).all(|w| w[1] - w[0] >= -slack)
}

/// Targets outside the CRB set, i.e. violating `x, y ≥ 0, xy ≥ |z|²`.
pub fn infeasible_targets(n: usize, seed: u64, eps: f64) -> Vec<(f64, Complex64, f64)> {
    let mut r = rng(seed);
    let kappa = 1.0 / eps;
    let mut out = Vec::new();
    while out.len() < n {
        let t1 = kappa + r.random_range(-2.0..2.0);
        let t3 = r.random_range(-2.0..2.0);
        let t2 = Complex64::new(r.random_range(-2.0..2.0), r.random_range(-2.0..2.0));
        let x = t1 - kappa;
        if !(x >= 0.0 && t3 >= 0.0 && x * t3 >= t2.norm_sqr()) {
            out.push((t1, t2, t3));
        }
    }
    out
}

/// Least-squares instance: `f = 2Fᴴy` and `R = FᴴF` full rank (N ≥ M).
pub fn ls_instance(seed: u64) -> (FpAssembly, f64) {
    let mut r = rng(seed);
    let (m, n) = (3, 5);
    let ncols = n + m;
    let h: Vec<_> = (0..n).map(|_| cvec(&mut r, m)).collect();
    let b: Vec<_> = (0..n).map(|_| rc(&mut r) + c(0.6)).collect();
    let y = cmat(&mut r, n, ncols) * c(3.0);
    let mut f = CMat::zeros(m, ncols);
    for col in 0..ncols {
        let mut acc = isac_core::CVec::zeros(m);
        for i in 0..n {
            acc += &h[i] * (b[i].conj() * y[(i, col)] * 2.0);
        }
        f.set_column(col, &acc);
    }
    let fp = FpAssembly { f, b, h, omega: vec![1.0; n], upsilon: vec![0.0; n], sigma2: 1.0 };
    // Half the instances leave the unconstrained optimum inside the ball.
    let r2 = if seed.is_multiple_of(2) { 0.5 } else { 1e6 };
    (fp, r2)
}

pub struct FpCase {
    pub h: Vec<CVec>,
    pub w: CMat,
    pub omega: Vec<f64>,
    pub sigma2: f64,
}

pub fn fp_case(seed: u64, m: usize, n: usize) -> FpCase {
    let mut r = rng(seed);
    let h = (0..n).map(|_| cvec(&mut r, m) * c(2.0)).collect();
    let w = cmat(&mut r, m, n + m);
    let omega = (0..n).map(|i| if i % 3 == 2 { 0.0 } else { 0.5 }).collect();
    FpCase { h, w, omega, sigma2: 0.2 }
}

pub fn mm_case(seed: u64) -> (CMat, Complex64, CMat) {
    let mut r = rng(seed);
    // M = 2, N = 1: W is 2 × 3.
    (cmat(&mut r, 2, 2) * c(3.0), rc(&mut r) * c(4.0), cmat(&mut r, 2, 3))
}
