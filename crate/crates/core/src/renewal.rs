//! Power-law offsets `P(R ≥ n) = n^{-α}`, the renewal sequence `q_n`, and the
//! urn constants built from `Σ q_l²`.

use std::sync::Arc;

use rand::Rng;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::special::gamma;
use crate::stats::CompensatedSum;

pub fn mu_tail(n: u64, alpha: f64) -> Result<f64> {
    if n == 0 {
        return Err(domain("mu_tail is defined for n ≥ 1"));
    }
    Ok((n as f64).powf(-alpha))
}

/// `P(R = n) = n^{-α} - (n+1)^{-α}`, written to avoid cancellation at large n.
pub fn mu_pmf(n: u64, alpha: f64) -> f64 {
    debug_assert!(n >= 1);
    let x = n as f64;
    -x.powf(-alpha) * (-alpha * (1.0 / x).ln_1p()).exp_m1()
}

/// Inverse transform: `floor(u^{-1/α})`, saturating at `u64::MAX`.
pub fn sample_offset(u: f64, alpha: f64) -> Result<u64> {
    if !(u > 0.0 && u <= 1.0) {
        return Err(domain(format!("offset variate must lie in (0, 1], got {u}")));
    }
    Ok(offset_unchecked(u, alpha))
}

#[inline]
pub(crate) fn offset_unchecked(u: f64, alpha: f64) -> u64 {
    let r = u.powf(-1.0 / alpha).floor();
    if r >= u64::MAX as f64 {
        u64::MAX
    } else {
        r as u64
    }
}

/// Draw one offset from `rng`.
#[inline]
pub fn draw_offset<R: Rng + ?Sized>(rng: &mut R, alpha: f64) -> u64 {
    // random::<f64>() is in [0, 1); flip it into (0, 1].
    offset_unchecked(1.0 - rng.random::<f64>(), alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recursion {
    /// Direct `O(N²)` convolution.
    Naive,
    /// Divide-and-conquer online convolution with FFT blocks, `O(N log² N)`.
    Fft,
}

/// `q_0..q_N` with its squared sum and the urn constants.
#[derive(Debug, Clone, Serialize)]
pub struct RenewalTable {
    pub alpha: f64,
    #[serde(skip)]
    pub q: Vec<f64>,
    /// `Σ_{l ≤ N} q_l²`.
    pub q2_head: f64,
    /// Analytic estimate of `Σ_{l > N} q_l²`.
    pub q2_tail: f64,
    pub q2_sum: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c_q: f64,
}

/// `Σ_r q_{i+r} q_{j+r}` split into the tabulated part and the asymptotic tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairSum {
    pub value: f64,
    pub tail: f64,
}

impl RenewalTable {
    pub fn build(alpha: f64, n_max: usize) -> Result<Self> {
        let method = if n_max <= 4096 { Recursion::Naive } else { Recursion::Fft };
        Self::build_with(alpha, n_max, method)
    }

    pub fn build_with(alpha: f64, n_max: usize, method: Recursion) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 0.5) {
            return Err(domain(format!("alpha must lie in (0, 1/2), got {alpha}")));
        }
        if n_max < 1 {
            return Err(domain("renewal table needs N ≥ 1"));
        }
        let pmf: Vec<f64> = (0..=n_max as u64)
            .map(|k| if k == 0 { 0.0 } else { mu_pmf(k, alpha) })
            .collect();
        let q = match method {
            Recursion::Naive => renewal_naive(&pmf),
            Recursion::Fft => renewal_online_fft(&pmf),
        };
        let c_q = 1.0 / (gamma(alpha) * gamma(1.0 - alpha));
        let q2_head = q.iter().map(|x| x * x).collect::<CompensatedSum>().value();
        let q2_tail = asymptotic_pair_tail(c_q, alpha, n_max as f64 + 0.5);
        let q2_sum = q2_head + q2_tail;
        let c2 = 1.0 / q2_sum;
        let c1 = c2 * gamma(1.0 - 2.0 * alpha) / (gamma(alpha) * gamma(1.0 - alpha).powi(3));
        let c3 = c1 / (alpha * (2.0 * alpha + 1.0));
        Ok(Self {
            alpha,
            q,
            q2_head,
            q2_tail,
            q2_sum,
            c1,
            c2,
            c3,
            c_q,
        })
    }

    pub fn n_max(&self) -> usize {
        self.q.len() - 1
    }

    /// The walk scaling `c(n) = √(C_3 n^{2α+1})`.
    pub fn scale(&self, n: f64) -> f64 {
        (self.c3 * n.powf(2.0 * self.alpha + 1.0)).sqrt()
    }

    /// `Σ_{r≥0} q_{i+r} q_{j+r}`; the part past the table uses
    /// `q_l ≈ C_q l^{α-1}`.
    pub fn pair_sum(&self, i: usize, j: usize) -> Result<PairSum> {
        let n = self.n_max();
        let hi = i.max(j);
        if hi > n {
            return Err(Error::TableTooShort { needed: hi, available: n });
        }
        let len = n - hi;
        let head = (0..=len)
            .map(|r| self.q[i + r] * self.q[j + r])
            .collect::<CompensatedSum>()
            .value();
        let mid = 0.5 * (i + j) as f64;
        let tail = asymptotic_pair_tail(self.c_q, self.alpha, mid + len as f64 + 0.5);
        Ok(PairSum {
            value: head + tail,
            tail,
        })
    }

    /// `A(d) = Σ_{r≥0} q_r q_{r+d}` for `d = 0..=d_max`, by FFT, with the same
    /// asymptotic tail as [`RenewalTable::pair_sum`].
    pub fn autocorrelation(&self, d_max: usize) -> Result<Vec<f64>> {
        let n = self.n_max();
        if d_max > n {
            return Err(Error::TableTooShort { needed: d_max, available: n });
        }
        let size = (2 * (n + 1)).next_power_of_two();
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(size);
        let inv = planner.plan_fft_inverse(size);
        let mut a = vec![Complex64::new(0.0, 0.0); size];
        for (slot, &x) in a.iter_mut().zip(&self.q) {
            slot.re = x;
        }
        fwd.process(&mut a);
        for x in a.iter_mut() {
            *x = Complex64::new(x.norm_sqr(), 0.0);
        }
        inv.process(&mut a);
        let norm = 1.0 / size as f64;
        Ok((0..=d_max)
            .map(|d| {
                let tail = asymptotic_pair_tail(self.c_q, self.alpha, 0.5 * d as f64 + (n - d) as f64 + 0.5);
                a[d].re * norm + tail
            })
            .collect())
    }
}

/// `C_q² ∫_x^∞ l^{2α-2} dl`.
fn asymptotic_pair_tail(c_q: f64, alpha: f64, x: f64) -> f64 {
    c_q * c_q * x.powf(2.0 * alpha - 1.0) / (1.0 - 2.0 * alpha)
}

fn renewal_naive(pmf: &[f64]) -> Vec<f64> {
    let n = pmf.len();
    let mut q = vec![0.0; n];
    q[0] = 1.0;
    for m in 1..n {
        let mut s = 0.0;
        for k in 1..=m {
            s += pmf[k] * q[m - k];
        }
        q[m] = s;
    }
    q
}

const BASE_BLOCK: usize = 256;

struct OnlineConv<'a> {
    pmf: &'a [f64],
    q: Vec<f64>,
    acc: Vec<f64>,
    planner: FftPlanner<f64>,
}

impl OnlineConv<'_> {
    fn solve(&mut self, l: usize, r: usize) {
        if r - l <= BASE_BLOCK {
            for m in l..r {
                if m == 0 {
                    self.q[0] = 1.0;
                    continue;
                }
                let mut s = self.acc[m];
                for j in l..m {
                    s += self.q[j] * self.pmf[m - j];
                }
                self.q[m] = s;
            }
            return;
        }
        let mid = (l + r) / 2;
        self.solve(l, mid);
        // Push q[l..mid) * pmf[1..r-l) into acc[mid..r).
        let a_len = mid - l;
        let b_len = r - l;
        let size = (a_len + b_len).next_power_of_two();
        let fwd: Arc<dyn Fft<f64>> = self.planner.plan_fft_forward(size);
        let inv: Arc<dyn Fft<f64>> = self.planner.plan_fft_inverse(size);
        let mut a = vec![Complex64::new(0.0, 0.0); size];
        let mut b = vec![Complex64::new(0.0, 0.0); size];
        for (k, slot) in a.iter_mut().take(a_len).enumerate() {
            slot.re = self.q[l + k];
        }
        for (k, slot) in b.iter_mut().take(b_len).enumerate() {
            slot.re = self.pmf.get(k).copied().unwrap_or(0.0);
        }
        fwd.process(&mut a);
        fwd.process(&mut b);
        for (x, y) in a.iter_mut().zip(&b) {
            *x *= *y;
        }
        inv.process(&mut a);
        let norm = 1.0 / size as f64;
        for m in mid..r.min(self.q.len()) {
            // Index m - l in the product collects q_j pmf_{m-j} for j ∈ [l, mid).
            self.acc[m] += a[m - l].re * norm;
        }
        self.solve(mid, r);
    }
}

fn renewal_online_fft(pmf: &[f64]) -> Vec<f64> {
    let n = pmf.len();
    let size = n.next_power_of_two();
    let mut padded = pmf.to_vec();
    padded.resize(size, 0.0);
    let mut conv = OnlineConv {
        pmf: &padded,
        q: vec![0.0; size],
        acc: vec![0.0; size],
        planner: FftPlanner::new(),
    };
    conv.solve(0, size);
    conv.q.truncate(n);
    conv.q
}
