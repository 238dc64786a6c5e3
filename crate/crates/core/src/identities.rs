//! The Gauss hypergeometric function and numerical checks of the analytic
//! identities that follow from `ρ^HS = ρ^K`.

use serde::Serialize;

use crate::constants::HurstParams;
use crate::error::{domain, Error, Result};
use crate::gaussian_bfbm::{hs_boundary_terms, hs_prefactor, hs_triple_integral, rho_hs_quadrature, rho_kernel_quadrature};
use crate::special::{gamma, rgamma};

const SERIES_MAX_TERMS: usize = 20_000;

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && x.fract() == 0.0
}

fn series(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 0..SERIES_MAX_TERMS {
        let nf = n as f64;
        term *= (a + nf) * (b + nf) / ((c + nf) * (nf + 1.0)) * z;
        sum += term;
        if term == 0.0 || term.abs() < 1e-16 * sum.abs() {
            return Ok(sum);
        }
    }
    Err(Error::Hypergeometric(format!("series for 2F1({a}, {b}; {c}; {z}) did not converge")))
}

/// `₂F₁(a, b; c; z)` for real `z < 1`.
///
/// Power series for `|z| ≤ 0.8`; Pfaff `z → z/(z-1)` for `-4 ≤ z < -0.8`
/// and `0.8 < z < 1`; the `1/z` connection formula for `z < -4`, which needs
/// `a - b` to be non-integer.
pub fn hyp2f1(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    if is_nonpositive_integer(c) {
        return Err(Error::Hypergeometric(format!("c = {c} is a pole")));
    }
    if !(z < 1.0) || !z.is_finite() {
        return Err(Error::Hypergeometric(format!("z = {z} outside the supported region z < 1")));
    }
    if z == 0.0 {
        return Ok(1.0);
    }
    if z.abs() <= 0.8 {
        return series(a, b, c, z);
    }
    if z > 0.8 || z >= -4.0 {
        // Pfaff: (1-z)^{-a} 2F1(a, c-b; c; z/(z-1)).
        let w = z / (z - 1.0);
        return Ok((1.0 - z).powf(-a) * hyp2f1(a, c - b, c, w)?);
    }
    let d = a - b;
    if d.fract() == 0.0 {
        return Err(Error::Hypergeometric(format!("a - b = {d} is an integer; the 1/z formula degenerates")));
    }
    let w = 1.0 / z;
    let t1 = gamma(c) * gamma(b - a) * rgamma(b) * rgamma(c - a) * (-z).powf(-a) * series(a, a - c + 1.0, a - b + 1.0, w)?;
    let t2 = gamma(c) * gamma(a - b) * rgamma(a) * rgamma(c - b) * (-z).powf(-b) * series(b, b - c + 1.0, b - a + 1.0, w)?;
    Ok(t1 + t2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Identity {
    Id1,
    Id2,
    Id3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Pass,
    Fail,
    Indeterminate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityParams {
    pub alpha: f64,
    pub t1: f64,
    pub t2: f64,
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    pub identity: Identity,
    pub params: IdentityParams,
    pub lhs: f64,
    pub rhs: f64,
    pub abs_diff: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub verdict: Verdict,
    /// Spread between successive extrapolations, when the right side is a limit.
    pub spread: Option<f64>,
}

impl IdentityReport {
    fn new(identity: Identity, params: IdentityParams, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let abs_diff = (lhs - rhs).abs();
        let pass = abs_diff <= tolerance;
        Self {
            identity,
            params,
            lhs,
            rhs,
            abs_diff,
            tolerance,
            pass,
            verdict: if pass { Verdict::Pass } else { Verdict::Fail },
            spread: None,
        }
    }
}

/// `ρ^HS(t1, t2, s)` against `ρ^K(t1, t2, s)`.
pub fn check_id1(t1: f64, t2: f64, s: f64, p: &HurstParams, tol: f64) -> Result<IdentityReport> {
    if !(s >= 0.0 && t1 > s && t2 > s) {
        return Err(domain(format!("need t1, t2 > s ≥ 0, got ({t1}, {t2}, {s})")));
    }
    let lhs = rho_hs_quadrature(t1, t2, s, p)?.value;
    let rhs = rho_kernel_quadrature(t1, t2, s, p)?.value;
    Ok(IdentityReport::new(Identity::Id1, IdentityParams { alpha: p.alpha, t1, t2, s }, lhs, rhs, tol))
}

/// `t^{2α+1} - C_ρ (t-s)^{2α+1}` against
/// `t^{2α+1} - (t-s)^{2α+1} + κ ∫∫∫ (y3+y1)^{α-1} (y3+y2)^{α-1}`.
pub fn check_id2(t: f64, s: f64, p: &HurstParams, tol: f64) -> Result<IdentityReport> {
    if !(t > s && s > 0.0) {
        return Err(domain(format!("need t > s > 0, got ({t}, {s})")));
    }
    let a = p.alpha;
    let e = 2.0 * a + 1.0;
    let lhs = t.powf(e) - p.c_rho * (t - s).powf(e);
    let tri = hs_triple_integral(t - s, t - s, a)?.value;
    let rhs = hs_boundary_terms(t, t, s, a) + hs_prefactor(a) * tri;
    Ok(IdentityReport::new(Identity::Id2, IdentityParams { alpha: a, t1: t, t2: t, s }, lhs, rhs, tol))
}

/// `∫_0^x u^α (c+u)^α du = c^α x^{α+1}/(α+1) ₂F₁(-α, α+1; α+2; -x/c)`.
fn power_product_integral(c: f64, x: f64, alpha: f64) -> Result<f64> {
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok(c.powf(alpha) * x.powf(alpha + 1.0) / (alpha + 1.0) * hyp2f1(-alpha, alpha + 1.0, alpha + 2.0, -x / c)?)
}

/// Antiderivative of `((x+1)^α - x^α)((t+x)^α - x^α)` without the `1/α` factor:
/// the bracket of the closed form.
fn id3_bracket(x: f64, t: f64, alpha: f64) -> Result<f64> {
    let a = alpha;
    let c = 1.0 / a;
    let f = |z: f64| hyp2f1(1.0 + a, -a, 2.0 + a, z);
    let first = if x == 0.0 {
        0.0
    } else {
        -x.powf(a + 1.0) * (t + x).powf(a) * ((t + x) / t).powf(-a) * f(-x / t)? / (c + 1.0)
    };
    let second = (x + 1.0).powf(a + 1.0) * (t + x).powf(a) * ((t + x) / (t - 1.0)).powf(-a) * f((x + 1.0) / (1.0 - t))? / (c + 1.0);
    let third = if x == 0.0 { 0.0 } else { -x.powf(a + 1.0) * f(-x)? / (c + 1.0) };
    let fourth = x.powf(1.0 + a) * x.powf(a) / (c + 2.0);
    Ok(first + second + third + fourth)
}

/// `ρ^HS(t, 1, s)` against the hypergeometric closed form of `ρ^K(t, 1, s)`.
///
/// The half-line part is a limit `y → ∞` of a bracket whose remainder decays
/// like `y^{2α-1}`. It is extrapolated from `y_list` (increasing) with that
/// exponent; the spread between the last two extrapolations is reported, and
/// the verdict is `Indeterminate` when the spread or the cancellation in the
/// bracket exceeds the tolerance.
pub fn check_id3(t: f64, s: f64, p: &HurstParams, y_list: &[f64], tol: f64) -> Result<IdentityReport> {
    if !(t > 1.0 && s > 0.0 && s < 1.0) {
        return Err(domain(format!("need t > 1 > s > 0, got ({t}, {s})")));
    }
    if y_list.len() < 3 || y_list.windows(2).any(|w| !(w[1] > w[0])) || y_list[0] <= 0.0 {
        return Err(domain("need at least three increasing positive y values"));
    }
    let a = p.alpha;
    let ch2 = p.c_h2();
    let at_zero = id3_bracket(0.0, t, a)?;
    let mut values = Vec::with_capacity(y_list.len());
    let mut magnitude: f64 = 0.0;
    for &y in y_list {
        let b = id3_bracket(y, t, a)?;
        magnitude = magnitude.max(y.powf(2.0 * a + 1.0));
        values.push((b - at_zero) / (a * ch2));
    }
    // Remaining segment ∫_0^s (t-ξ)^α (1-ξ)^α dξ = F_{t-1}(1) - F_{t-1}(1-s).
    let close = (power_product_integral(t - 1.0, 1.0, a)? - power_product_integral(t - 1.0, 1.0 - s, a)?) / ch2;
    let pw = 2.0 * a - 1.0;
    let extrapolate = |i: usize| {
        let (y1, y2) = (y_list[i], y_list[i + 1]);
        let (g1, g2) = (values[i], values[i + 1]);
        g2 + (g2 - g1) * y2.powf(pw) / (y1.powf(pw) - y2.powf(pw))
    };
    let n = y_list.len();
    let last = extrapolate(n - 2);
    let prev = extrapolate(n - 3);
    let spread = (last - prev).abs();
    let rhs = last + close;
    let lhs = rho_hs_quadrature(t, 1.0, s, p)?.value;
    let mut r = IdentityReport::new(Identity::Id3, IdentityParams { alpha: a, t1: t, t2: 1.0, s }, lhs, rhs, tol);
    r.spread = Some(spread);
    let cancellation = magnitude * 1e-13 / (a * ch2);
    if spread > tol || cancellation > tol || !rhs.is_finite() {
        r.verdict = Verdict::Indeterminate;
    }
    Ok(r)
}

pub const ID3_Y_LIST: [f64; 3] = [1e2, 1e3, 1e4];

/// The sweep used by the command line: id1 on a grid, id2 and id3 at one point each.
pub fn default_sweep(p: &HurstParams, tol: f64) -> Result<Vec<IdentityReport>> {
    let mut out = Vec::new();
    for &t1 in &[1.0, 2.0] {
        for &t2 in &[1.0, 1.5] {
            for &s in &[0.0, 0.5] {
                out.push(check_id1(t1, t2, s, p, tol)?);
            }
        }
    }
    out.push(check_id2(2.0, 1.0, p, tol)?);
    out.push(check_id3(2.0, 0.5, p, &ID3_Y_LIST, tol.max(1e-3))?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hypergeometric_values() {
        assert_eq!(hyp2f1(0.3, 1.7, 2.2, 0.0).unwrap(), 1.0);
        assert!((hyp2f1(0.3, 1.7, 1.7, 0.5).unwrap() - 0.5f64.powf(-0.3)).abs() < 1e-12);
        assert!((hyp2f1(1.0, 1.0, 2.0, 0.5).unwrap() - 2.0 * 2f64.ln()).abs() < 1e-12);
        // (1-z)^{-a} on each branch of the implementation.
        for &z in &[-0.5, -2.0, -50.0, 0.9, 0.99] {
            let v = hyp2f1(0.37, 1.2, 1.2, z).unwrap();
            assert!((v / (1.0 - z).powf(-0.37) - 1.0).abs() < 1e-12, "z = {z}");
        }
        // ln(1-z)/(-z) on the Pfaff branch.
        assert!((hyp2f1(1.0, 1.0, 2.0, -3.0).unwrap() - 4f64.ln() / 3.0).abs() < 1e-12);
        assert!(hyp2f1(1.0, 1.0, -2.0, 0.1).is_err());
        assert!(hyp2f1(1.0, 1.0, 2.0, 1.0).is_err());
        assert!(hyp2f1(1.0, 2.0, 2.5, -10.0).is_err());
    }

    #[test]
    fn closed_form_antiderivative() {
        // d/dx of the bracket against α · integrand by central difference.
        let (a, t) = (0.35, 2.0);
        let x = 3.0;
        let h = 1e-5;
        let d = (id3_bracket(x + h, t, a).unwrap() - id3_bracket(x - h, t, a).unwrap()) / (2.0 * h);
        let f = ((x + 1.0f64).powf(a) - x.powf(a)) * ((t + x).powf(a) - x.powf(a));
        assert!((d / a - f).abs() < 1e-8, "{} vs {f}", d / a);
        let direct = crate::quad::integrate(|u| u.powf(a) * (0.7 + u).powf(a), 0.0, 40.0, crate::quad::QuadOptions::abs(1e-13)).unwrap().value;
        assert!((power_product_integral(0.7, 40.0, a).unwrap() - direct).abs() < 1e-10);
    }

    #[test]
    fn identity_reports() {
        let p = HurstParams::from_alpha(0.35).unwrap();
        let r = check_id1(2.0, 1.0, 0.5, &p, 1e-5).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(check_id1(2.0, 1.0, 0.0, &p, 1e-5).unwrap().pass);
        let r = check_id2(2.0, 1.0, &p, 1e-5).unwrap();
        assert!(r.pass, "{r:?}");
        let r = check_id3(2.0, 0.5, &p, &ID3_Y_LIST, 1e-3).unwrap();
        assert_eq!(r.verdict, Verdict::Pass, "{r:?}");
        assert!((r.rhs - 1.344_553_151_387_043_4).abs() < 1e-4);
        let near = check_id2(2.0, 1.999_999, &p, 1e-5).unwrap();
        assert!((near.lhs - 2f64.powf(1.7)).abs() < 1e-5 && near.pass);
        let q = HurstParams::from_alpha(0.01).unwrap();
        assert!(check_id2(2.0, 1.0, &q, 1e-4).unwrap().pass);
        assert!(check_id1(1.0, 1.0, 1.0, &p, 1e-5).is_err());
    }
}
