//! Predicting fBM from its past: the kernel `g`, the urn's copy weights, and
//! a check of `∫ g dB` against exact Gaussian conditioning.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::constants::HurstParams;
use crate::error::{domain, Error, Result};
use crate::gaussian_bfbm::cholesky_with_jitter;
use crate::quad::{integrate, integrate_right_power, QuadOptions};
use crate::renewal::{draw_offset, mu_pmf, RenewalTable};
use crate::rng::{domain as dom, par_replicas, stream, Rng};
use crate::stats::{mean_estimate, CompensatedSum, Estimate};

const TIGHT: QuadOptions = QuadOptions { abs_tol: 1e-15, rel_tol: 1e-13, max_intervals: 2000 };

/// `∫_0^t ξ^α / (ξ + s) dξ`.
fn g_inner(t: f64, s: f64, alpha: f64) -> Result<f64> {
    Ok(integrate(|x| x.powf(alpha) / (x + s), 0.0, t, TIGHT)?.value)
}

/// `g(t, -s) = C_q s^{-α} ∫_0^t ξ^α / (ξ + s) dξ` for `s_neg = -s < 0`.
pub fn g_kernel(t: f64, s_neg: f64, p: &HurstParams) -> Result<f64> {
    if !(t > 0.0) || !(s_neg < 0.0) {
        return Err(domain(format!("need t > 0 and s < 0, got t = {t}, s = {s_neg}")));
    }
    let s = -s_neg;
    Ok(p.c_q * s.powf(-p.alpha) * g_inner(t, s, p.alpha)?)
}

/// `(∫_0^1 (1-x)^{α-1} (ξ+x)^{-α-1} dx, ξ^{-α} / (α + αξ))`.
pub fn beta_identity_check(xi: f64, alpha: f64) -> Result<(f64, f64)> {
    if !(xi > 0.0) || !(alpha > 0.0 && alpha <= 1.0) {
        return Err(domain(format!("need ξ > 0 and 0 < α ≤ 1, got ξ = {xi}, α = {alpha}")));
    }
    // The (1-x)^{α-1} factor is absorbed by the power map at x = 1.
    let lhs = integrate_right_power(
        |x, gap| gap.powf(alpha - 1.0) * (xi + x).powf(-alpha - 1.0),
        0.0,
        1.0,
        alpha,
        TIGHT,
    )?
    .value;
    let rhs = xi.powf(-alpha) / (alpha + alpha * xi);
    Ok((lhs, rhs))
}

/// `b_{n,-k} = Σ_{l=1}^{n} q_{n-l} μ(k+l)`: the probability that the first
/// ancestor of individual `n` at or below `0` is `-k`.
pub fn copy_weight(n: usize, k: usize, tbl: &RenewalTable) -> Result<f64> {
    if n == 0 {
        return Err(domain("need n ≥ 1"));
    }
    if n > tbl.n_max() {
        return Err(Error::TableTooShort { needed: n, available: tbl.n_max() });
    }
    Ok((1..=n)
        .map(|l| tbl.q[n - l] * mu_pmf((k + l) as u64, tbl.alpha))
        .collect::<CompensatedSum>()
        .value())
}

/// The limit `α ξ^{-α} / (Γ(α)Γ(1-α) n (α + αξ))` of `b_{n,-ξn}`.
pub fn copy_weight_asymptotic(n: usize, xi: f64, alpha: f64) -> f64 {
    let cq = (std::f64::consts::PI * alpha).sin() / std::f64::consts::PI;
    alpha * cq / n as f64 * xi.powf(-alpha) / (alpha + alpha * xi)
}

/// Follow the ancestral line of `n` down to the first individual `≤ 0` and
/// return its lag `k`.
pub fn first_past_ancestor(n: u64, alpha: f64, rng: &mut Rng) -> u64 {
    let mut pos = n as i64;
    while pos > 0 {
        let r = draw_offset(rng, alpha);
        pos = pos.saturating_sub(r.min(i64::MAX as u64) as i64);
    }
    pos.unsigned_abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PredictionSetup {
    pub h: f64,
    pub t: f64,
    /// The past is observed on `[-depth, 0]`.
    pub depth: f64,
    /// Number of past cells.
    pub grid: usize,
    pub replicas: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionReport {
    pub setup: PredictionSetup,
    /// Exact `E|a - b|` over the Gaussian law of the observed past.
    pub mean_abs_discrepancy: f64,
    /// Monte Carlo estimate of the same quantity.
    pub mc_discrepancy: Estimate,
    /// `√Var[B_t] = t^H`, the scale of the tolerance.
    pub scale: f64,
    /// Exact conditional variance of `B_t` given the grid.
    pub conditional_variance: f64,
}

/// `Cov[B_t, B_v - B_u]` for `u < v ≤ 0`.
fn cov_future_increment(t: f64, u: f64, v: f64, h2: f64) -> f64 {
    // ½(|t-u|^{2H} - |t-v|^{2H} + |v|^{2H} - |u|^{2H})
    0.5 * ((t - u).powf(h2) - (t - v).powf(h2) + v.abs().powf(h2) - u.abs().powf(h2))
}

/// Autocovariance of increments over cells of width `w` at lag `k` cells.
fn fgn(k: usize, w: f64, h2: f64) -> f64 {
    let k = k as f64;
    0.5 * w.powf(h2) * ((k + 1.0).powf(h2) - 2.0 * k.powf(h2) + (k - 1.0).abs().powf(h2))
}

/// Compare (a) the conditional mean of `B_t` given the increments of `B` on a
/// uniform past grid with (b) `Σ ḡ_k ΔB_k`, where `ḡ_k` is the average of
/// `g(t, ·)` over cell `k`.
pub fn prediction_check(setup: &PredictionSetup, seed: u64) -> Result<PredictionReport> {
    let p = HurstParams::new(setup.h)?;
    if setup.grid == 0 || !(setup.depth > 0.0) || !(setup.t > 0.0) {
        return Err(domain("need grid ≥ 1, depth > 0, t > 0"));
    }
    let h2 = 2.0 * p.h;
    let g = setup.grid;
    let w = setup.depth / g as f64;
    // Cell k covers [-(k+1) w, -k w].
    let gamma = DMatrix::from_fn(g, g, |i, j| fgn(i.abs_diff(j), w, h2));
    let c = DVector::from_fn(g, |k, _| cov_future_increment(setup.t, -((k + 1) as f64) * w, -(k as f64) * w, h2));
    let gbar = DVector::from_iterator(
        g,
        (0..g).map(|k| {
            let lo = k as f64 * w;
            let hi = lo + w;
            integrate(|s| g_kernel(setup.t, -s, &p).unwrap_or(f64::NAN), lo, hi, QuadOptions::abs(1e-13))
                .map(|r| r.value / w)
        })
        .collect::<Result<Vec<f64>>>()?,
    );
    let l = cholesky_with_jitter(&gamma, w.powf(h2))?;
    let chol = nalgebra::Cholesky::new(&l * l.transpose()).ok_or(Error::NotPositiveDefinite { jitter: 0.0 })?;
    let weights = chol.solve(&c);
    let diff = &weights - &gbar;
    let var_diff = (diff.transpose() * &gamma * &diff)[(0, 0)].max(0.0);
    let mean_abs = (2.0 / std::f64::consts::PI).sqrt() * var_diff.sqrt();
    let cond_var = setup.t.powf(h2) - c.dot(&weights);

    let samples = par_replicas(seed, setup.replicas, |_, s| {
        let mut rng = stream(s, dom::GAUSS, 0);
        let z = DVector::from_iterator(g, (0..g).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let x = &l * z;
        (weights.dot(&x) - gbar.dot(&x)).abs()
    });
    let mc = if samples.len() >= 2 {
        mean_estimate(&samples)
    } else {
        Estimate { value: f64::NAN, std_err: f64::NAN }
    };
    Ok(PredictionReport {
        setup: *setup,
        mean_abs_discrepancy: mean_abs,
        mc_discrepancy: mc,
        scale: setup.t.powf(p.h),
        conditional_variance: cond_var,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_goldens() {
        let p = HurstParams::new(0.85).unwrap();
        assert!((g_kernel(1.0, -1.0, &p).unwrap() - 0.137_803_534_235_208_33).abs() < 1e-12);
        assert!((g_kernel(2.0, -0.5, &p).unwrap() - 0.478_445_979_556_655_95).abs() < 1e-12);
        assert!(g_kernel(1.0, 0.5, &p).is_err());
        let q = HurstParams::new(0.500_000_1).unwrap();
        assert!(g_kernel(1.0, -1.0, &q).unwrap() < 1e-6);
        for &s in &[1e-6, 0.01, 1.0, 100.0, 1e5] {
            assert!(g_kernel(0.7, -s, &p).unwrap() > 0.0);
        }
    }

    #[test]
    fn beta_identity() {
        let (l, r) = beta_identity_check(1.0, 0.5).unwrap();
        assert!((l - 1.0).abs() < 1e-10 && (r - 1.0).abs() < 1e-15);
        let (l, r) = beta_identity_check(2.0, 0.35).unwrap();
        assert!((l - r).abs() < 1e-7);
        let (l, r) = beta_identity_check(1e6, 0.35).unwrap();
        assert!(r < 1e-7 && (l - r).abs() < 1e-7 * r);
    }

    #[test]
    fn copy_weights() {
        let tbl = RenewalTable::build(0.35, 1 << 14).unwrap();
        let total: f64 = (0..200_000).map(|k| copy_weight(50, k, &tbl).unwrap()).sum();
        assert!(total <= 1.0 + 1e-12);
        let n = 10_000;
        let b = copy_weight(n, n, &tbl).unwrap();
        let ratio = b / copy_weight_asymptotic(n, 1.0, 0.35);
        assert!((ratio - 1.0).abs() < 0.05, "{ratio}");
        assert!(copy_weight(1 << 15, 1, &tbl).is_err());
    }

    #[test]
    fn copy_weight_matches_sampling() {
        let tbl = RenewalTable::build(0.35, 1 << 10).unwrap();
        let exact = copy_weight(200, 50, &tbl).unwrap();
        let reps = 200_000;
        let mut rng = stream(17, dom::URN, 0);
        let hits = (0..reps).filter(|_| first_past_ancestor(200, 0.35, &mut rng) == 50).count();
        let f = hits as f64 / reps as f64;
        let se = (exact * (1.0 - exact) / reps as f64).sqrt();
        assert!((f - exact).abs() < 3.0 * se, "{f} vs {exact} ± {se}");
    }

    #[test]
    fn zero_past_gives_zero() {
        let s = PredictionSetup { h: 0.85, t: 1.0, depth: 5.0, grid: 40, replicas: 0 };
        let r = prediction_check(&s, 1).unwrap();
        assert!(r.mean_abs_discrepancy.is_finite());
        assert!(r.conditional_variance > 0.0 && r.conditional_variance < 1.0);
    }
}
