//! The urn on a single line: the walk `S_n = Σ Y_i`, its rescaling, and
//! exact coalescence probabilities.

use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::renewal::RenewalTable;
use crate::tree::TreeTopology;
use crate::urn::{simulate, OffsetLaw, UrnParams, UrnRealization};

/// Past depth used when none is given, as a multiple of the simulated length.
pub const DEFAULT_WINDOW_FACTOR: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UrnConfig {
    pub alpha: f64,
    /// Individuals `1..=n_total` are simulated.
    pub n_total: usize,
    /// Depth `W` of the simulated past.
    pub window_past: u64,
    /// Steps per unit time.
    pub steps_per_unit: usize,
    pub seed: u64,
    pub offsets: OffsetLaw,
}

impl UrnConfig {
    pub fn new(alpha: f64, n_total: usize, steps_per_unit: usize, seed: u64) -> Self {
        Self {
            alpha,
            n_total,
            window_past: default_window(n_total),
            steps_per_unit,
            seed,
            offsets: OffsetLaw::PowerLaw,
        }
    }
}

pub fn default_window(n_total: usize) -> u64 {
    (n_total.max(1) as u64).saturating_mul(DEFAULT_WINDOW_FACTOR).min(1 << 60)
}

/// A realization on one line; individuals `1..=n_total`.
#[derive(Debug, Clone)]
pub struct LinearRealization {
    pub urn: UrnRealization,
}

impl LinearRealization {
    pub fn n_total(&self) -> usize {
        self.urn.last_index
    }

    pub fn parent_offset(&self) -> &[u64] {
        &self.urn.parent_offset
    }

    pub fn component_id(&self) -> &[u32] {
        &self.urn.component
    }

    pub fn types(&self) -> &[i8] {
        &self.urn.types
    }

    /// `S_0, S_1, …, S_n`.
    pub fn walk(&self) -> Vec<i64> {
        std::iter::once(0).chain(self.urn.own_sum.iter().copied()).collect()
    }
}

pub fn simulate_linear(cfg: &UrnConfig) -> Result<LinearRealization> {
    if cfg.n_total == 0 || cfg.steps_per_unit == 0 {
        return Err(domain("need n_total ≥ 1 and steps_per_unit ≥ 1"));
    }
    let horizon = cfg.n_total as f64 / cfg.steps_per_unit as f64;
    let params = UrnParams {
        alpha: cfg.alpha,
        n: cfg.steps_per_unit,
        window_past: cfg.window_past,
        offsets: cfg.offsets,
    };
    let urn = simulate(&TreeTopology::single(horizon), params, cfg.seed)?;
    debug_assert_eq!(urn.last_index, cfg.n_total);
    Ok(LinearRealization { urn })
}

/// `S^{(n)}(t)`: the interpolated walk at `t·n` divided by `c(n)`.
pub fn rescaled_path(r: &LinearRealization, tbl: &RenewalTable, t_grid: &[f64]) -> Result<Vec<f64>> {
    let n = r.urn.params.n;
    let horizon = r.n_total() as f64 / n as f64;
    let c = tbl.scale(n as f64);
    t_grid
        .iter()
        .map(|&t| {
            if !(0.0..=horizon + 1e-12).contains(&t) {
                return Err(Error::OutsideHorizon { t, horizon });
            }
            Ok(r.urn.walk_continuous(0, t.min(horizon)) / c)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Coalescence {
    pub probability: f64,
    /// Contribution of the asymptotic tail past the table.
    pub tail: f64,
}

/// `C_2 Σ_{r≥0} q_{i+r} q_{j+r}`.
///
/// For two individuals `x, y` on one line, `P(x ∼ y)` is
/// `coalescence_exact(0, |x - y|)`.
pub fn coalescence_exact(i: usize, j: usize, tbl: &RenewalTable) -> Result<Coalescence> {
    let ps = tbl.pair_sum(i, j)?;
    Ok(Coalescence {
        probability: tbl.c2 * ps.value,
        tail: tbl.c2 * ps.tail,
    })
}

/// `P(x ∼ y)` for individuals on one line at distance `d = 0..=d_max`.
pub fn line_coalescence(tbl: &RenewalTable, d_max: usize) -> Result<Vec<f64>> {
    Ok(tbl.autocorrelation(d_max)?.into_iter().map(|a| tbl.c2 * a).collect())
}

/// `Var[S_k] = Σ_{i,j ≤ k} P(i ∼ j)` for every `k = 0..=n`, infinite past.
pub fn exact_variances(tbl: &RenewalTable, n: usize) -> Result<Vec<f64>> {
    let l = line_coalescence(tbl, n)?;
    // V(k) = V(k-1) + L(0) + 2 Σ_{d=1}^{k-1} L(d)
    let mut out = Vec::with_capacity(n + 1);
    out.push(0.0);
    let mut v = 0.0;
    let mut partial = 0.0;
    for k in 1..=n {
        v += l[0] + 2.0 * partial;
        partial += l[k];
        out.push(v);
    }
    Ok(out)
}

/// Relative loss in `Var[S_n]` from founding components below `-W`:
/// `C_2 C_q² W^{2α-1} n² / ((1-2α) C_3 n^{2α+1})`.
pub fn window_bias(tbl: &RenewalTable, n: usize, window: u64) -> f64 {
    let a = tbl.alpha;
    let n = n as f64;
    let lost = tbl.c2 * tbl.c_q * tbl.c_q * (window as f64).powf(2.0 * a - 1.0) / (1.0 - 2.0 * a);
    lost * n * n / (tbl.c3 * n.powf(2.0 * a + 1.0))
}
