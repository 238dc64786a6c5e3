//! The urn indexed by a time-tree and the branch walks `S_b^{(n)}`.

use crate::error::{domain, Error, Result};
use crate::linear_hs::exact_variances;
use crate::quad::{integrate_tail, QuadOptions};
use crate::renewal::RenewalTable;
use crate::stats::{covariance_estimate, CompensatedSum, Estimate};
use crate::tree::TreeTopology;
use crate::urn::{simulate, OffsetLaw, UrnParams, UrnRealization};

pub type TreeUrnRealization = UrnRealization;

pub fn simulate_tree_urn(
    tree: &TreeTopology,
    n: usize,
    alpha: f64,
    window_past: u64,
    seed: u64,
) -> Result<TreeUrnRealization> {
    let params = UrnParams {
        alpha,
        n,
        window_past,
        offsets: OffsetLaw::PowerLaw,
    };
    simulate(tree, params, seed)
}

/// `S_b^{(n)}(t)` on `t_grid`.
pub fn branch_walk(r: &TreeUrnRealization, b: usize, t_grid: &[f64], tbl: &RenewalTable) -> Result<Vec<f64>> {
    if b >= r.tree.len() {
        return Err(Error::UnknownBranch(b));
    }
    let horizon = r.tree.horizon;
    let c = tbl.scale(r.params.n as f64);
    t_grid
        .iter()
        .map(|&t| {
            if !(0.0..=horizon + 1e-12).contains(&t) {
                return Err(Error::OutsideHorizon { t, horizon });
            }
            Ok(r.walk_continuous(b, t.min(horizon)) / c)
        })
        .collect()
}

/// Express a rescaled value in units of `(Σ q_l²)^{-1/2}`.
pub fn unit_normalized(value: f64, tbl: &RenewalTable) -> f64 {
    value * tbl.q2_sum.sqrt()
}

/// `P((b,i) ∼ (b̃,j)) = C_2 Σ_{r≥0} q_{i-sn+r} q_{j-sn+r}` for two branches
/// that split at index `s_index`.
pub fn branch_coalescence_exact(i: usize, j: usize, s_index: usize, tbl: &RenewalTable) -> Result<crate::linear_hs::Coalescence> {
    if i <= s_index || j <= s_index {
        return Err(domain(format!("indices {i}, {j} must lie beyond the split index {s_index}")));
    }
    crate::linear_hs::coalescence_exact(i - s_index, j - s_index, tbl)
}

/// Monte Carlo `Cov[X, Y]` from paired replica values.
pub fn empirical_cross_covariance(xs: &[f64], ys: &[f64]) -> Result<Estimate> {
    if xs.len() < 2 || xs.len() != ys.len() {
        return Err(Error::InsufficientReplicas {
            needed: 2,
            got: xs.len().min(ys.len()),
        });
    }
    Ok(covariance_estimate(xs, ys))
}

/// `C_2 Σ_{r≥0} (Σ_{a=1}^{k} q_{a+r})²`: the summed coalescence of the first
/// `k` individuals of two branches after their split.
fn post_split_block(tbl: &RenewalTable, k: usize) -> Result<f64> {
    let n = tbl.n_max();
    if k == 0 {
        return Ok(0.0);
    }
    if 4 * k > n {
        return Err(Error::TableTooShort { needed: 4 * k, available: n });
    }
    let mut prefix = Vec::with_capacity(n + 1);
    let mut acc = CompensatedSum::new();
    for &q in &tbl.q {
        acc.add(q);
        prefix.push(acc.value());
    }
    let last = n - k;
    let head = (0..=last)
        .map(|r| {
            let w = prefix[r + k] - prefix[r];
            w * w
        })
        .collect::<CompensatedSum>()
        .value();
    let (a, cq, kf) = (tbl.alpha, tbl.c_q, k as f64);
    let window = |x: f64| {
        let base = x + 0.5;
        let w = cq * base.powf(a) * (a * (kf / base).ln_1p()).exp_m1() / a;
        w * w
    };
    let tail = integrate_tail(window, last as f64 + 0.5, kf.max(1.0), 2.0 - 2.0 * a, QuadOptions::abs(1e-14))?;
    Ok(tbl.c2 * (head + tail.value))
}

/// Exact `Cov[S_b(m), S_b̃(m)]` in step units for two branches splitting at
/// index `s_index ≤ m`, with the infinite past.
pub fn exact_pair_covariance_steps(tbl: &RenewalTable, m: usize, s_index: usize) -> Result<f64> {
    if s_index > m {
        return Err(domain("split index beyond the evaluation index"));
    }
    let v = exact_variances(tbl, m)?;
    let k = m - s_index;
    Ok(v[m] - v[k] + post_split_block(tbl, k)?)
}

/// Exact covariance of the rescaled walks at time `t`, split at `s`, using
/// `n` steps per unit. `t·n` and `s·n` are rounded down to indices.
pub fn exact_pair_covariance(tbl: &RenewalTable, n: usize, t: f64, s: f64) -> Result<f64> {
    let m = (t * n as f64 + 1e-9).floor() as usize;
    let si = (s * n as f64 + 1e-9).floor() as usize;
    let c = tbl.scale(n as f64);
    Ok(exact_pair_covariance_steps(tbl, m, si)? / (c * c))
}
