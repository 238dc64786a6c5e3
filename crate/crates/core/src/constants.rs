//! Hurst parameter, the derived normalising constants, and the leading-order
//! speed of the maximum.
//!
//! Every other module reads its constants from [`HurstParams`]; they are
//! computed once at construction.

use std::f64::consts::{LN_2, PI, SQRT_2};

use serde::Serialize;

use crate::error::{domain, Result};
use crate::special::gamma;

/// Hurst parameter `H ∈ (1/2, 1)` together with its cached constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HurstParams {
    pub h: f64,
    /// Urn tail exponent, `H - 1/2`.
    pub alpha: f64,
    /// Kernel normaliser; `Var[B_t] = t^{2H}` with this choice.
    pub c_h: f64,
    /// Prefactor in `ρ(t,t,s) = t^{2H} - c_rho (t-s)^{2H}`.
    pub c_rho: f64,
    /// Renewal asymptotic constant `1/(Γ(α)Γ(1-α))`.
    pub c_q: f64,
}

impl HurstParams {
    pub fn new(h: f64) -> Result<Self> {
        if !(h > 0.5 && h < 1.0) {
            return Err(domain(format!("Hurst parameter must lie in (1/2, 1), got {h}")));
        }
        let alpha = h - 0.5;
        let c_h2 = -(2f64.powf(-2.0 * h)) * gamma(-h) * gamma(h + 0.5) / PI.sqrt();
        let c_rho = PI.sqrt() * 2f64.powf(2.0 * h - 1.0) / (gamma(1.0 - h) * gamma(h + 0.5));
        let c_q = 1.0 / (gamma(alpha) * gamma(1.0 - alpha));
        Ok(Self {
            h,
            alpha,
            c_h: c_h2.sqrt(),
            c_rho,
            c_q,
        })
    }

    /// Build from the urn exponent `α = H - 1/2`.
    pub fn from_alpha(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 0.5) {
            return Err(domain(format!("alpha must lie in (0, 1/2), got {alpha}")));
        }
        Self::new(alpha + 0.5)
    }

    pub fn c_h2(&self) -> f64 {
        self.c_h * self.c_h
    }
}

/// Leading order of the maximum over a rate-one Yule tree:
/// `t^{H+1/2} √2 / (C_H (H + 1/2))`.
pub fn m_yule(t: f64, p: &HurstParams) -> f64 {
    debug_assert!(t >= 0.0);
    t.powf(p.h + 0.5) * SQRT_2 / (p.c_h * (p.h + 0.5))
}

/// Leading order of the maximum over the deterministic binary tree.
pub fn m_binary(t: f64, p: &HurstParams) -> f64 {
    m_yule(t, p) * LN_2.sqrt()
}

/// `√2 t^{H+1/2}`: the maximum of `e^t` independent `N(0, t^{2H})` variables.
pub fn iid_benchmark(t: f64, p: &HurstParams) -> f64 {
    SQRT_2 * t.powf(p.h + 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The first printed form of the Yule speed, evaluated independently.
    fn m_yule_gamma_form(t: f64, h: f64) -> f64 {
        let num = PI.sqrt() * 2f64.powf(2.0 * h + 1.0) * h;
        let den = gamma(1.0 - h) * gamma(h + 0.5) * (h + 0.5).powi(2);
        t.powf(h + 0.5) * (num / den).sqrt()
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(HurstParams::new(0.3).is_err());
        assert!(HurstParams::new(0.5).is_err());
        assert!(HurstParams::new(1.0).is_err());
        assert!(HurstParams::new(f64::NAN).is_err());
        assert!(HurstParams::from_alpha(0.5).is_err());
    }

    #[test]
    fn brownian_limit() {
        let p = HurstParams::new(0.500_000_1).unwrap();
        assert!((p.c_h - 1.0).abs() < 1e-5);
        assert!((p.c_rho - 1.0).abs() < 1e-5);
    }

    #[test]
    fn golden_constants() {
        // 30-digit reference evaluation.
        let p = HurstParams::new(0.85).unwrap();
        assert!((p.c_rho - 0.519_439_512_368_749_3).abs() < 1e-13);
        assert!((p.c_h - 1.064_162_738_819_138_5).abs() < 1e-13);
        let p = HurstParams::new(0.75).unwrap();
        assert!((p.c_rho - 0.762_759_763_501_813_2).abs() < 1e-13);
    }

    #[test]
    fn consistency_identity_on_grid() {
        for k in 0..9 {
            let h = 0.55 + 0.05 * k as f64;
            let p = HurstParams::new(h).unwrap();
            let lhs = 2.0 * h * p.c_rho * p.c_h2();
            assert!((lhs - 1.0).abs() < 1e-12, "H={h}: {lhs}");
            assert!(p.c_rho > 0.0 && p.c_rho <= 1.0);
        }
    }

    #[test]
    fn c_rho_decreasing() {
        let mut prev = f64::INFINITY;
        for k in 1..100 {
            let p = HurstParams::new(0.5 + 0.005 * k as f64).unwrap();
            assert!(p.c_rho < prev);
            prev = p.c_rho;
        }
    }

    #[test]
    fn euler_reflection() {
        for &h in &[0.55, 0.7, 0.85, 0.95] {
            let p = HurstParams::new(h).unwrap();
            let s = (PI * (h - 0.5)).sin() / PI;
            assert!((p.c_q - s).abs() < 1e-12);
        }
    }

    #[test]
    fn speeds() {
        let p = HurstParams::new(0.85).unwrap();
        assert_eq!(m_yule(0.0, &p), 0.0);
        assert_eq!(m_binary(0.0, &p), 0.0);
        let m = m_yule(10.0, &p);
        assert!((m - 22.038_050_865_178_255).abs() / m < 1e-10);
        assert!((m - m_yule_gamma_form(10.0, 0.85)).abs() / m < 1e-10);
        assert!((m_binary(8.0, &p) - 13.575_548_763_427_166).abs() < 1e-9);
        for &t in &[0.5, 1.0, 3.0, 17.0] {
            let r = m_binary(t, &p) / m_yule(t, &p);
            assert!((r - LN_2.sqrt()).abs() < 1e-15);
            let r = m_yule(t, &p) / iid_benchmark(t, &p);
            assert!((r - 1.0 / (p.c_h * (p.h + 0.5))).abs() < 1e-14);
        }
        let q = HurstParams::new(0.500_000_1).unwrap();
        assert!((m_yule(3.0, &q) - SQRT_2 * 3.0).abs() < 1e-5);
        let q = HurstParams::new(0.75).unwrap();
        assert!((iid_benchmark(4.0, &q) - 4f64.powf(1.25) * SQRT_2).abs() < 1e-12);
    }
}
