//! The maximum over branches: Monte Carlo estimation, the level ladder
//! `Δf_i`, the binary-tree leading order and a crude Slepian envelope.

use serde::Serialize;

use crate::constants::{iid_benchmark, m_binary, m_yule, HurstParams};
use crate::error::{domain, Error, Result};
use crate::gaussian_bfbm::{rho_closed, CholeskySampler, GremPlan, Method};
use crate::quad::{integrate, QuadOptions};
use crate::rng::{derive_seed, domain as dom, par_replicas, stream};
use crate::stats::{mean_estimate, quantile, variance};
use crate::tree::{binary_tree, sample_yule, Direction, TreeTopology};

/// Largest `(expected branches) × levels` an experiment may touch per replica.
pub const GREM_BUDGET: f64 = 5e7;
/// Largest node count for a dense factorization.
pub const CHOLESKY_NODES: usize = 1 << 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MaxTree {
    Yule,
    Binary,
}

impl MaxTree {
    /// Log growth rate of the branch count.
    pub fn rate(self) -> f64 {
        match self {
            MaxTree::Yule => 1.0,
            MaxTree::Binary => std::f64::consts::LN_2,
        }
    }

    pub fn leading_order(self, t: f64, p: &HurstParams) -> f64 {
        match self {
            MaxTree::Yule => m_yule(t, p),
            MaxTree::Binary => m_binary(t, p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxExperiment {
    pub h: f64,
    pub tree: MaxTree,
    pub t_list: Vec<f64>,
    pub replicas: usize,
    pub method: Method,
    /// Grid levels per unit time; `None` means one, i.e. `K = ⌈t⌉`.
    pub levels: Option<usize>,
    pub direction: Direction,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxRow {
    pub t: f64,
    pub m: f64,
    pub mean_ratio: f64,
    pub std_err: f64,
    pub sd_ratio: f64,
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
    /// `M(t)` per replica, in replica order.
    pub samples: Vec<f64>,
}

fn expected_branches(kind: MaxTree, t: f64) -> f64 {
    (kind.rate() * t).exp()
}

fn levels_for(exp: &MaxExperiment, t: f64) -> usize {
    let per_unit = exp.levels.unwrap_or(1) as f64;
    (per_unit * t).ceil().max(1.0) as usize
}

/// Refuse experiments whose per-replica cost exceeds the budget.
pub fn check_budget(exp: &MaxExperiment) -> Result<()> {
    for &t in &exp.t_list {
        let b = expected_branches(exp.tree, t);
        match exp.method {
            Method::Cholesky => {
                if b > CHOLESKY_NODES as f64 {
                    return Err(Error::Budget(format!(
                        "t = {t}: about {b:.0} branches, dense factorization allows {CHOLESKY_NODES}"
                    )));
                }
            }
            _ => {
                let cost = b * levels_for(exp, t) as f64;
                if cost > GREM_BUDGET {
                    return Err(Error::Budget(format!(
                        "t = {t}: about {cost:.3e} level increments per replica, budget {GREM_BUDGET:.0e}"
                    )));
                }
            }
        }
    }
    Ok(())
}

fn one_max(exp: &MaxExperiment, p: &HurstParams, t: f64, seed: u64) -> Result<f64> {
    let tree = match exp.tree {
        MaxTree::Yule => sample_yule(t, derive_seed(seed, dom::TREE, 0))?,
        MaxTree::Binary => binary_tree(t)?,
    };
    let mut rng = stream(seed, dom::GAUSS, 0);
    match exp.method {
        Method::Grem | Method::WhiteNoise => {
            let disc = tree.discretize(levels_for(exp, t), t, exp.direction)?;
            Ok(GremPlan::new(&disc, p)?.sample_max(&mut rng))
        }
        Method::Cholesky => {
            let disc = tree.discretize(levels_for(exp, t), t, exp.direction)?;
            let nodes: Vec<(usize, f64)> = (0..disc.len()).map(|b| (b, t)).collect();
            let s = CholeskySampler::new(&disc, &nodes, p)?.sample(&mut rng);
            Ok(s.values.into_iter().fold(f64::NEG_INFINITY, f64::max))
        }
    }
}

/// `M(t) = max_b B_b(t)` for each `t` and replica, with ratio summaries.
/// Replica `r` at the `k`-th time uses seed `(seed, k, r)`.
pub fn estimate_max(exp: &MaxExperiment) -> Result<Vec<MaxRow>> {
    let p = HurstParams::new(exp.h)?;
    if exp.replicas < 2 {
        return Err(Error::InsufficientReplicas { needed: 2, got: exp.replicas });
    }
    if exp.method == Method::WhiteNoise {
        return Err(domain("maxima support the grem and cholesky samplers"));
    }
    check_budget(exp)?;
    let mut rows = Vec::with_capacity(exp.t_list.len());
    for (k, &t) in exp.t_list.iter().enumerate() {
        if !(t > 0.0) {
            return Err(domain(format!("t must be positive, got {t}")));
        }
        let master = derive_seed(exp.seed, dom::REPLICA, k as u64);
        let samples = par_replicas(master, exp.replicas, |_, s| one_max(exp, &p, t, s))
            .into_iter()
            .collect::<Result<Vec<f64>>>()?;
        let m = exp.tree.leading_order(t, &p);
        let ratios: Vec<f64> = samples.iter().map(|x| x / m).collect();
        let est = mean_estimate(&ratios);
        rows.push(MaxRow {
            t,
            m,
            mean_ratio: est.value,
            std_err: est.std_err,
            sd_ratio: variance(&ratios).sqrt(),
            q05: quantile(&ratios, 0.05),
            q50: quantile(&ratios, 0.5),
            q95: quantile(&ratios, 0.95),
            samples,
        });
    }
    Ok(rows)
}

/// `Δf_i = √(2t/K) √(ρ(t,t,i t/K) - ρ(t,t,(i-1) t/K))` for `i ≥ 1`, and
/// `√ρ(t,t,0)` for `i = 0`.
pub fn delta_f(i: usize, levels: usize, t: f64, p: &HurstParams) -> Result<f64> {
    if levels == 0 || i > levels {
        return Err(domain(format!("need 0 ≤ i ≤ K with K ≥ 1, got i = {i}, K = {levels}")));
    }
    if i == 0 {
        return Ok(rho_closed(t, 0.0, p)?.max(0.0).sqrt());
    }
    let step = t / levels as f64;
    let hi = rho_closed(t, (i as f64 * step).min(t), p)?;
    let lo = rho_closed(t, (i - 1) as f64 * step, p)?;
    Ok((2.0 * t / levels as f64).sqrt() * (hi - lo).max(0.0).sqrt())
}

/// `f(l t/K) = Σ_{i=1}^{l} Δf_i`.
pub fn f_ladder(l: usize, levels: usize, t: f64, p: &HurstParams) -> Result<f64> {
    if l > levels {
        return Err(domain(format!("need l ≤ K, got l = {l}, K = {levels}")));
    }
    (1..=l).map(|i| delta_f(i, levels, t, p)).sum()
}

/// `Σ_{i=1}^{K} Δf_i`. The level-0 term `√ρ(t,t,0)` grows only like `t^H`
/// and is left out.
pub fn delta_f_sum(levels: usize, t: f64, p: &HurstParams) -> Result<f64> {
    f_ladder(levels, levels, t, p)
}

/// `√(2 log 2 · C_ρ · 2H) / (H + ½)`.
pub fn bk_leading_order(p: &HurstParams) -> f64 {
    (2.0 * std::f64::consts::LN_2 * p.c_rho * 2.0 * p.h).sqrt() / (p.h + 0.5)
}

/// `√(2 log 2) ∫_0^1 √(C_ρ 2H (1-x)^{2H-1}) dx` by quadrature.
pub fn bk_leading_order_quadrature(p: &HurstParams) -> Result<f64> {
    let a = p.c_rho * 2.0 * p.h;
    let r = integrate(
        |x| (a * (1.0 - x).powf(2.0 * p.h - 1.0)).sqrt(),
        0.0,
        1.0,
        QuadOptions { abs_tol: 1e-14, rel_tol: 1e-14, max_intervals: 2000 },
    )?;
    Ok((2.0 * std::f64::consts::LN_2).sqrt() * r.value)
}

/// Order-of-magnitude bounds on `m(t)`.
///
/// Upper: independent leaves. Lower: keep one branch per line alive at `x t`;
/// those `e^{r x t}` values have pairwise covariance at most `ρ(t,t,x t)`, so
/// by Slepian their maximum dominates an equicorrelated block, giving
/// `√(2 r x t) √(t^{2H} - ρ(t,t,x t))`, maximized over `x`.
pub fn slepian_envelope(t: f64, p: &HurstParams, kind: MaxTree) -> Result<(f64, f64)> {
    if !(t > 0.0) {
        return Err(domain(format!("t must be positive, got {t}")));
    }
    let r = kind.rate();
    let f = |x: f64| -> f64 {
        let gap = t.powf(2.0 * p.h) - rho_closed(t, x * t, p).unwrap_or(0.0);
        (2.0 * r * x * t).sqrt() * gap.max(0.0).sqrt()
    };
    // Stationary point of √x (1-x)^H.
    let x_star = 1.0 / (1.0 + 2.0 * p.h);
    let lower = f(x_star);
    let upper = iid_benchmark(t, p) * r.sqrt();
    Ok((lower, upper))
}

/// Maximum of `B_b(t)` over the branches of one given tree.
pub fn tree_max(tree: &TreeTopology, p: &HurstParams, seed: u64) -> Result<f64> {
    let plan = GremPlan::new(tree, p)?;
    Ok(plan.sample_max(&mut stream(seed, dom::GAUSS, 0)))
}
