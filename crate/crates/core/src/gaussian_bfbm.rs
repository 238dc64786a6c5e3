//! The Gaussian limit: kernel, tree covariance, exact endpoint samplers and
//! Gaussian conditioning.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::constants::HurstParams;
use crate::error::{domain, Error, Result};
use crate::quad::{integrate, integrate_right_power, integrate_tail, QuadOptions, QuadResult};
use crate::rng::Rng;
use crate::special::gamma;
use crate::tree::TreeTopology;

/// `(t+u)^α - u^α` for `u > 0`, without cancellation when `u ≫ t`.
#[inline]
fn kernel_gap(t: f64, u: f64, alpha: f64) -> f64 {
    if u <= 0.0 {
        return t.powf(alpha);
    }
    u.powf(alpha) * (alpha * (t / u).ln_1p()).exp_m1()
}

/// `K(s, t)`: the moving-average kernel. Zero for `s > t`.
pub fn kernel_k(s: f64, t: f64, p: &HurstParams) -> f64 {
    let a = p.alpha;
    if s > t {
        0.0
    } else if s <= 0.0 {
        kernel_gap(t, -s, a) / p.c_h
    } else {
        (t - s).powf(a) / p.c_h
    }
}

/// `½(t1^{2H} + t2^{2H} - |t1 - t2|^{2H})`.
pub fn fbm_cov(t1: f64, t2: f64, p: &HurstParams) -> f64 {
    let h2 = 2.0 * p.h;
    0.5 * (t1.powf(h2) + t2.powf(h2) - (t1 - t2).abs().powf(h2))
}

/// `ρ(t,t,s) = t^{2H} - C_ρ (t-s)^{2H}`.
pub fn rho_closed(t: f64, s: f64, p: &HurstParams) -> Result<f64> {
    if !(0.0..=t).contains(&s) {
        return Err(domain(format!("need 0 ≤ s ≤ t, got s = {s}, t = {t}")));
    }
    let h2 = 2.0 * p.h;
    Ok(t.powf(h2) - p.c_rho * (t - s).powf(h2))
}

/// `ρ(t1, t2, s)` for any overlap. Equal times use the closed form; otherwise
/// `fbm_cov - C_H^{-2} ∫_s^{min t} (t1-ξ)^α (t2-ξ)^α dξ`.
pub fn rho(t1: f64, t2: f64, s: f64, p: &HurstParams) -> Result<f64> {
    let m = t1.min(t2);
    if s >= m {
        return Ok(fbm_cov(t1, t2, p));
    }
    if s < 0.0 {
        return Err(domain(format!("split time must be ≥ 0, got {s}")));
    }
    if t1 == t2 {
        return rho_closed(t1, s, p);
    }
    let a = p.alpha;
    let r = integrate_right_power(
        |x, gap| {
            // gap = m - x exactly; the other factor is the far endpoint.
            let far = t1.max(t2) - x;
            gap.powf(a) * far.powf(a)
        },
        s,
        m,
        a + 1.0,
        QuadOptions { abs_tol: 1e-14, rel_tol: 1e-13, max_intervals: 2000 },
    )?;
    Ok(fbm_cov(t1, t2, p) - r.value / p.c_h2())
}

fn sum_results(parts: &[QuadResult], scale: f64) -> QuadResult {
    QuadResult {
        value: parts.iter().map(|r| r.value).sum::<f64>() * scale,
        error: parts.iter().map(|r| r.error).sum::<f64>() * scale.abs(),
    }
}

/// `ρ^K`: the two kernel integrals, evaluated by quadrature.
///
/// The half-line integral is split at `max(t1, t2)`; its tail decays like
/// `u^{2α-2}` and is mapped onto `(0, 1]`.
pub fn rho_kernel_quadrature(t1: f64, t2: f64, s: f64, p: &HurstParams) -> Result<QuadResult> {
    check_overlap(t1, t2, s)?;
    let a = p.alpha;
    let opts = QuadOptions { abs_tol: 1e-11, rel_tol: 1e-12, max_intervals: 4000 };
    let f = |u: f64| kernel_gap(t1, u, a) * kernel_gap(t2, u, a);
    let cut = t1.max(t2);
    let near = integrate(f, 0.0, cut, opts)?;
    let far = integrate_tail(f, cut, cut, 2.0 - 2.0 * a, opts)?;
    let g = |x: f64| (t1 - x).powf(a) * (t2 - x).powf(a);
    let overlap = if s <= 0.0 {
        QuadResult { value: 0.0, error: 0.0 }
    } else if s < t1.min(t2) {
        integrate(g, 0.0, s, opts)?
    } else {
        let far = t1.max(t2);
        integrate_right_power(|x, gap| gap.powf(a) * (far - x).powf(a), 0.0, s, a + 1.0, opts)?
    };
    Ok(sum_results(&[near, far, overlap], 1.0 / p.c_h2()))
}

/// Prefactor of the urn-side triple integral,
/// `α(2α+1)Γ(1-α) / (Γ(α)Γ(1-2α))`.
pub fn hs_prefactor(alpha: f64) -> f64 {
    alpha * (2.0 * alpha + 1.0) * gamma(1.0 - alpha) / (gamma(alpha) * gamma(1.0 - 2.0 * alpha))
}

/// `½[t1^{2α+1} - (t1-s)^{2α+1} + t2^{2α+1} - (t2-s)^{2α+1}]`.
pub fn hs_boundary_terms(t1: f64, t2: f64, s: f64, alpha: f64) -> f64 {
    let e = 2.0 * alpha + 1.0;
    0.5 * (t1.powf(e) - (t1 - s).powf(e) + t2.powf(e) - (t2 - s).powf(e))
}

/// `∫_0^∞ ∫_0^{a1} ∫_0^{a2} (y+y1)^{α-1} (y+y2)^{α-1} dy2 dy1 dy`, `a_i = t_i - s`.
///
/// The two inner integrals are evaluated by quadrature at every outer node,
/// so nothing here shares algebra with the kernel route.
pub fn hs_triple_integral(a1: f64, a2: f64, alpha: f64) -> Result<QuadResult> {
    if a1 <= 0.0 || a2 <= 0.0 {
        return Ok(QuadResult { value: 0.0, error: 0.0 });
    }
    let inner_opts = QuadOptions { abs_tol: 0.0, rel_tol: 1e-13, max_intervals: 400 };
    let inner = |y: f64, a: f64| -> f64 {
        // (y+x)^{α-1} is singular at x = 0 only when y = 0.
        let r = if y < 1e-3 * a {
            integrate(|w: f64| {
                // x = w^{1/α} removes the x^{α-1} blow-up.
                let x = w.powf(1.0 / alpha);
                (y + x).powf(alpha - 1.0) * x.powf(1.0 - alpha) / alpha
            }, 0.0, a.powf(alpha), inner_opts)
        } else {
            integrate(|x| (y + x).powf(alpha - 1.0), 0.0, a, inner_opts)
        };
        r.map(|r| r.value).unwrap_or(f64::NAN)
    };
    let f = |y: f64| inner(y, a1) * inner(y, a2);
    let opts = QuadOptions { abs_tol: 1e-11, rel_tol: 1e-11, max_intervals: 3000 };
    let cut = a1.max(a2);
    let near = integrate(f, 0.0, cut, opts)?;
    let far = integrate_tail(f, cut, cut, 2.0 - 2.0 * alpha, opts)?;
    if !(near.value.is_finite() && far.value.is_finite()) {
        return Err(Error::Quadrature { estimate: f64::NAN, error: f64::INFINITY, tolerance: opts.abs_tol });
    }
    Ok(sum_results(&[near, far], 1.0))
}

/// `ρ^HS`: closed boundary terms plus the prefactor times the triple integral.
pub fn rho_hs_quadrature(t1: f64, t2: f64, s: f64, p: &HurstParams) -> Result<QuadResult> {
    check_overlap(t1, t2, s)?;
    let a = p.alpha;
    let tri = hs_triple_integral(t1 - s, t2 - s, a)?;
    let k = hs_prefactor(a);
    Ok(QuadResult {
        value: hs_boundary_terms(t1, t2, s, a) + k * tri.value,
        error: k * tri.error,
    })
}

fn check_overlap(t1: f64, t2: f64, s: f64) -> Result<()> {
    if !(s >= 0.0 && s <= t1.min(t2)) {
        return Err(domain(format!("need 0 ≤ s ≤ min(t1, t2), got ({t1}, {t2}, {s})")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    Cholesky,
    WhiteNoise,
    Grem,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EndpointSample {
    pub nodes: Vec<(usize, f64)>,
    pub values: Vec<f64>,
    pub method: Method,
}

/// Map `(b, t)` to the branch that actually carries time `t` on `b`'s line.
pub fn canonical_node(tree: &TreeTopology, b: usize, t: f64) -> usize {
    let mut cur = b;
    while let Some(p) = tree.branches[cur].parent {
        if t > tree.branches[cur].birth {
            break;
        }
        cur = p;
    }
    cur
}

/// Covariance of `B_b(t)` over `nodes`.
pub fn covariance_matrix(tree: &TreeTopology, nodes: &[(usize, f64)], p: &HurstParams) -> Result<DMatrix<f64>> {
    let n = nodes.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let (bi, ti) = nodes[i];
            let (bj, tj) = nodes[j];
            let s = tree.split_time(bi, bj)?;
            let v = if s >= ti.min(tj) { fbm_cov(ti, tj, p) } else { rho(ti, tj, s, p)? };
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

/// Lower Cholesky factor, adding `ε·scale·I` with `ε` from `1e-12` up to
/// `1e-8` when the plain factorization fails.
pub fn cholesky_with_jitter(cov: &DMatrix<f64>, scale: f64) -> Result<DMatrix<f64>> {
    if let Some(c) = cov.clone().cholesky() {
        return Ok(c.l());
    }
    let mut eps = 1e-12;
    while eps <= 1e-8 * (1.0 + 1e-9) {
        let mut m = cov.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += eps * scale;
        }
        if let Some(c) = m.cholesky() {
            return Ok(c.l());
        }
        eps *= 10.0;
    }
    Err(Error::NotPositiveDefinite { jitter: 1e-8 * scale })
}

/// Exact endpoint sampler from the full covariance matrix. Nodes carrying the
/// same value (same line and time, or time zero) are merged before factoring.
#[derive(Debug, Clone)]
pub struct CholeskySampler {
    pub nodes: Vec<(usize, f64)>,
    /// For each requested node, its index among the distinct nodes, or `None`
    /// when the value is identically zero.
    slot: Vec<Option<usize>>,
    factor: DMatrix<f64>,
}

impl CholeskySampler {
    pub fn new(tree: &TreeTopology, nodes: &[(usize, f64)], p: &HurstParams) -> Result<Self> {
        let mut distinct: Vec<(usize, f64)> = Vec::new();
        let mut slot = Vec::with_capacity(nodes.len());
        for &(b, t) in nodes {
            if b >= tree.len() {
                return Err(Error::UnknownBranch(b));
            }
            if t < 0.0 {
                return Err(domain(format!("node time must be ≥ 0, got {t}")));
            }
            if t == 0.0 {
                slot.push(None);
                continue;
            }
            let key = (canonical_node(tree, b, t), t);
            let k = match distinct.iter().position(|d| *d == key) {
                Some(k) => k,
                None => {
                    distinct.push(key);
                    distinct.len() - 1
                }
            };
            slot.push(Some(k));
        }
        let cov = covariance_matrix(tree, &distinct, p)?;
        let t_max = distinct.iter().map(|d| d.1).fold(0.0, f64::max);
        let factor = if distinct.is_empty() {
            DMatrix::zeros(0, 0)
        } else {
            cholesky_with_jitter(&cov, t_max.powf(2.0 * p.h))?
        };
        Ok(Self { nodes: nodes.to_vec(), slot, factor })
    }

    pub fn sample(&self, rng: &mut Rng) -> EndpointSample {
        let k = self.factor.nrows();
        let z = DVector::from_iterator(k, (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let x = &self.factor * z;
        EndpointSample {
            nodes: self.nodes.clone(),
            values: self.slot.iter().map(|s| s.map_or(0.0, |k| x[k])).collect(),
            method: Method::Cholesky,
        }
    }
}

pub fn sample_cholesky(tree: &TreeTopology, nodes: &[(usize, f64)], p: &HurstParams, rng: &mut Rng) -> Result<EndpointSample> {
    Ok(CholeskySampler::new(tree, nodes, p)?.sample(rng))
}

/// One white-noise cell on a branch's own segment.
#[derive(Debug, Clone, Copy)]
struct Cell {
    weight: f64,
}

/// White-noise sampler for every branch at one evaluation time.
///
/// Each cell carries weight `√(∫_cell K(u, t)² du)`, so covariances between
/// lines are exact up to the truncated past. Cells on a branch are cut at its
/// children's birth times. Past cells are graded geometrically from `dt` at
/// the origin out to `-S_past`.
#[derive(Debug, Clone)]
pub struct WhiteNoisePlan {
    pub t_eval: f64,
    pub dt: f64,
    pub s_past: f64,
    past: Vec<Cell>,
    /// Own cells of each branch in time order.
    own: Vec<Vec<Cell>>,
    /// For each non-root branch: number of parent cells that precede its birth.
    cut: Vec<usize>,
    parent: Vec<Option<usize>>,
    /// `∫_{-∞}^{-S_past} K(u, t)² du`.
    pub deficit: f64,
}

impl WhiteNoisePlan {
    pub fn new(tree: &TreeTopology, dt: f64, t_eval: f64, s_past: f64, p: &HurstParams) -> Result<Self> {
        if !(dt > 0.0) || !(s_past >= 0.0) || !(t_eval > 0.0) {
            return Err(domain("need dt > 0, S_past ≥ 0, t > 0"));
        }
        let a = p.alpha;
        let ch2 = p.c_h2();
        let e = 2.0 * a + 1.0;
        let pos_weight = |lo: f64, hi: f64| (((t_eval - lo).powf(e) - (t_eval - hi).powf(e)) / (e * ch2)).max(0.0).sqrt();
        let k2 = |u: f64| {
            let g = kernel_gap(t_eval, u, a);
            g * g / ch2
        };
        // Past cells on [-S_past, 0], graded.
        let mut past = Vec::new();
        let mut lo = 0.0;
        let mut width = dt;
        let opts = QuadOptions { abs_tol: 1e-15, rel_tol: 1e-12, max_intervals: 200 };
        while lo < s_past {
            let hi = (lo + width).min(s_past);
            let v = integrate(k2, lo, hi, opts)?.value;
            past.push(Cell { weight: v.max(0.0).sqrt() });
            lo = hi;
            width *= 1.05;
        }
        let deficit = if s_past > 0.0 {
            integrate_tail(k2, s_past, s_past, 2.0 - 2.0 * a, QuadOptions::abs(1e-14))?.value
        } else {
            integrate_tail(k2, 0.0, t_eval, 2.0 - 2.0 * a, QuadOptions::abs(1e-14))?.value
        };

        let nb = tree.len();
        let mut own = vec![Vec::new(); nb];
        let mut cut = vec![0usize; nb];
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); nb];
        for b in 1..nb {
            children[tree.branches[b].parent.expect("non-root")].push(b);
        }
        for b in 0..nb {
            let birth = tree.branches[b].birth;
            if birth >= t_eval {
                // cut[c] = 0 already points past the (empty) own segment.
                continue;
            }
            let mut marks: Vec<f64> = children[b]
                .iter()
                .map(|&c| tree.branches[c].birth)
                .filter(|&s| s > birth && s < t_eval)
                .collect();
            marks.push(t_eval);
            marks.sort_by(f64::total_cmp);
            marks.dedup();
            let mut lo = birth;
            for &m in &marks {
                let pieces = ((m - lo) / dt).ceil().max(1.0) as usize;
                let h = (m - lo) / pieces as f64;
                for k in 0..pieces {
                    let a0 = lo + k as f64 * h;
                    let a1 = if k + 1 == pieces { m } else { lo + (k + 1) as f64 * h };
                    own[b].push(Cell { weight: pos_weight(a0, a1) });
                }
                // Children born at m branch off after these cells.
                for &c in &children[b] {
                    if tree.branches[c].birth == m {
                        cut[c] = own[b].len();
                    }
                }
                lo = m;
            }
            for &c in &children[b] {
                let s = tree.branches[c].birth;
                if s <= birth {
                    cut[c] = 0;
                } else if s >= t_eval {
                    cut[c] = own[b].len();
                }
            }
        }
        Ok(Self {
            t_eval,
            dt,
            s_past,
            past,
            own,
            cut,
            parent: tree.branches.iter().map(|b| b.parent).collect(),
            deficit,
        })
    }

    pub fn cell_count(&self) -> usize {
        self.past.len() + self.own.iter().map(Vec::len).sum::<usize>()
    }

    /// Values `B_b(t_eval)` for every branch `b`.
    pub fn sample(&self, rng: &mut Rng) -> EndpointSample {
        let mut normal = || rng.sample::<f64, _>(StandardNormal);
        let past: f64 = self.past.iter().map(|c| c.weight * normal()).sum();
        let nb = self.own.len();
        let mut prefix: Vec<Vec<f64>> = Vec::with_capacity(nb);
        for cells in &self.own {
            let mut acc = 0.0;
            let mut v = Vec::with_capacity(cells.len() + 1);
            v.push(0.0);
            for c in cells {
                acc += c.weight * normal();
                v.push(acc);
            }
            prefix.push(v);
        }
        // base[b]: value of the parent line at b's birth, past excluded.
        let mut base = vec![0.0; nb];
        for b in 1..nb {
            let p = self.parent[b].expect("non-root");
            base[b] = base[p] + prefix[p][self.cut[b].min(prefix[p].len() - 1)];
        }
        let values = (0..nb).map(|b| past + base[b] + prefix[b].last().copied().unwrap_or(0.0)).collect();
        EndpointSample {
            nodes: (0..nb).map(|b| (b, self.t_eval)).collect(),
            values,
            method: Method::WhiteNoise,
        }
    }
}

pub fn sample_whitenoise_tree(
    tree: &TreeTopology,
    dt: f64,
    t_eval: f64,
    s_past: f64,
    p: &HurstParams,
    rng: &mut Rng,
) -> Result<(EndpointSample, f64)> {
    let plan = WhiteNoisePlan::new(tree, dt, t_eval, s_past, p)?;
    Ok((plan.sample(rng), plan.deficit))
}

/// Level variances `ρ(t,t,i t/K) - ρ(t,t,(i-1) t/K)` for `i = 1..=K`, with
/// `(1 - C_ρ) t^{2H}` at index 0.
pub fn grem_level_variances(levels: usize, t: f64, p: &HurstParams) -> Vec<f64> {
    let step = t / levels as f64;
    let mut v = Vec::with_capacity(levels + 1);
    v.push((1.0 - p.c_rho) * t.powf(2.0 * p.h));
    for i in 1..=levels {
        let hi = rho_closed(t, (i as f64 * step).min(t), p).expect("grid inside [0, t]");
        let lo = rho_closed(t, (i - 1) as f64 * step, p).expect("grid inside [0, t]");
        v.push(hi - lo);
    }
    v
}

/// GREM endpoint sampler on a tree discretized to `K` levels over `[0, t]`.
#[derive(Debug, Clone)]
pub struct GremPlan {
    pub levels: usize,
    pub t: f64,
    sd: Vec<f64>,
    /// First own level of each branch.
    first_level: Vec<usize>,
    parent: Vec<Option<usize>>,
}

impl GremPlan {
    pub fn new(tree: &TreeTopology, p: &HurstParams) -> Result<Self> {
        let (levels, t) = tree.levels().ok_or(Error::NotDiscretized { levels: 0 })?;
        let step = t / levels as f64;
        let mut first_level = Vec::with_capacity(tree.len());
        for b in &tree.branches {
            let j = (b.birth / step).round();
            if (j * step - b.birth).abs() > 1e-9 * t.max(1.0) {
                return Err(Error::NotDiscretized { levels });
            }
            first_level.push(j as usize + 1);
        }
        let sd = grem_level_variances(levels, t, p).into_iter().map(|v| v.max(0.0).sqrt()).collect();
        Ok(Self {
            levels,
            t,
            sd,
            first_level,
            parent: tree.branches.iter().map(|b| b.parent).collect(),
        })
    }

    pub fn sample(&self, rng: &mut Rng) -> EndpointSample {
        let k = self.levels;
        let nb = self.parent.len();
        let root_inc: f64 = self.sd[0] * rng.sample::<f64, _>(StandardNormal);
        // Partial sums per branch over its own levels, stored from level `first - 1`.
        let mut partial: Vec<Vec<f64>> = Vec::with_capacity(nb);
        let mut values = Vec::with_capacity(nb);
        for b in 0..nb {
            let first = self.first_level[b];
            let start = match self.parent[b] {
                None => root_inc,
                Some(p) => {
                    let pf = self.first_level[p];
                    // Parent's value after level first - 1.
                    let idx = (first - 1).saturating_sub(pf - 1);
                    partial[p][idx.min(partial[p].len() - 1)]
                }
            };
            let mut v = Vec::with_capacity(k + 2 - first.min(k + 1));
            v.push(start);
            let mut acc = start;
            for i in first..=k {
                acc += self.sd[i] * rng.sample::<f64, _>(StandardNormal);
                v.push(acc);
            }
            values.push(acc);
            partial.push(v);
        }
        EndpointSample {
            nodes: (0..nb).map(|b| (b, self.t)).collect(),
            values,
            method: Method::Grem,
        }
    }

    /// Only the maximum over branches; avoids keeping the values.
    pub fn sample_max(&self, rng: &mut Rng) -> f64 {
        self.sample(rng).values.into_iter().fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn sample_grem_endpoint(tree_disc: &TreeTopology, p: &HurstParams, rng: &mut Rng) -> Result<EndpointSample> {
    Ok(GremPlan::new(tree_disc, p)?.sample(rng))
}

/// Conditional mean and covariance of the unobserved block.
#[derive(Debug, Clone)]
pub struct Conditional {
    pub free: Vec<usize>,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// Condition a centred Gaussian with covariance `cov` on `x[observed] = values`.
pub fn gaussian_condition(cov: &DMatrix<f64>, observed: &[usize], values: &[f64]) -> Result<Conditional> {
    let n = cov.nrows();
    if observed.len() != values.len() {
        return Err(domain("observed indices and values differ in length"));
    }
    let free: Vec<usize> = (0..n).filter(|i| !observed.contains(i)).collect();
    let soo = cov.select_rows(observed).select_columns(observed);
    let sfo = cov.select_rows(&free).select_columns(observed);
    let sff = cov.select_rows(&free).select_columns(&free);
    let scale = soo.diagonal().iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    let l = cholesky_with_jitter(&soo, scale)?;
    let chol = nalgebra::Cholesky::new(&l * l.transpose()).ok_or(Error::NotPositiveDefinite { jitter: 1e-8 * scale })?;
    let y = DVector::from_column_slice(values);
    let mean = &sfo * chol.solve(&y);
    let cov = &sff - &sfo * chol.solve(&sfo.transpose());
    Ok(Conditional { free, mean, cov })
}

/// `∫_a^b K(u, τ) du` for any real `τ`, with the kernel
/// `((τ-u)_+^α - (-u)_+^α) / C_H`.
fn kernel_cell_integral(a: f64, b: f64, tau: f64, p: &HurstParams) -> f64 {
    let e = p.alpha + 1.0;
    let prim = |x: f64, c: f64| (c - x).max(0.0).powf(e);
    // ∫_a^b (c-u)_+^α du = ((c-a)_+^{α+1} - (c-b)_+^{α+1}) / (α+1)
    ((prim(a, tau) - prim(b, tau)) - (prim(a, 0.0) - prim(b, 0.0))) / (e * p.c_h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionalIndependence {
    pub t: f64,
    pub s: f64,
    /// Number of shared-past values conditioned on.
    pub grid: usize,
    /// Cross-covariance left after conditioning, cell model with exact matrices.
    pub cell_model_residual: f64,
    /// The same with the continuum covariance on the same grid of times.
    pub continuum_residual: f64,
    /// `ρ(t, t, s)`: the cross-covariance before conditioning.
    pub unconditioned: f64,
}

/// Two branches split at `s`, observed at `t`. Condition both endpoint values
/// on the shared line's values at every cell edge of `[-S_past, s]`, and
/// report the Schur-complement cross-covariance.
///
/// In the cell model every cell carries one standard normal and
/// `B(τ) = Σ_c (∫_c K(u,τ) du / |c|) ΔW_c`; the shared values then determine
/// the shared cells.
pub fn conditional_independence_check(t: f64, s: f64, dt: f64, s_past: f64, p: &HurstParams) -> Result<ConditionalIndependence> {
    if !(0.0 < s && s < t) || !(dt > 0.0) || !(s_past > 0.0) {
        return Err(domain("need 0 < s < t, dt > 0, S_past > 0"));
    }
    // Shared cell edges: graded past, uniform on [0, s].
    let mut edges = vec![0.0];
    let mut w = dt;
    while *edges.last().unwrap() > -s_past {
        let next = (edges.last().unwrap() - w).max(-s_past);
        edges.push(next);
        w *= 1.05;
    }
    edges.reverse();
    let k = (s / dt).ceil() as usize;
    for i in 1..=k {
        edges.push(s * i as f64 / k as f64);
    }
    let cells: Vec<(f64, f64)> = edges.windows(2).map(|e| (e[0], e[1])).collect();
    let own_k = ((t - s) / dt).ceil() as usize;
    let own: Vec<(f64, f64)> = (0..own_k)
        .map(|i| (s + (t - s) * i as f64 / own_k as f64, s + (t - s) * (i + 1) as f64 / own_k as f64))
        .collect();
    // Observation times: every shared edge except 0, where B vanishes.
    let times: Vec<f64> = edges.iter().copied().filter(|&x| x != 0.0).collect();
    let m = times.len();
    let nc = cells.len();
    let no = own.len();
    // Rows: observations, branch b endpoint, branch b̃ endpoint. Columns:
    // shared cells, b's own cells, b̃'s own cells.
    let mut a = DMatrix::zeros(m + 2, nc + 2 * no);
    for (r, &tau) in times.iter().enumerate() {
        for (c, &(lo, hi)) in cells.iter().enumerate() {
            a[(r, c)] = kernel_cell_integral(lo, hi, tau, p) / (hi - lo).sqrt();
        }
    }
    for side in 0..2 {
        let r = m + side;
        for (c, &(lo, hi)) in cells.iter().enumerate() {
            a[(r, c)] = kernel_cell_integral(lo, hi, t, p) / (hi - lo).sqrt();
        }
        for (j, &(lo, hi)) in own.iter().enumerate() {
            a[(r, nc + side * no + j)] = kernel_cell_integral(lo, hi, t, p) / (hi - lo).sqrt();
        }
    }
    let cov = &a * a.transpose();
    let observed: Vec<usize> = (0..m).collect();
    let zeros = vec![0.0; m];
    let cell = gaussian_condition(&cov, &observed, &zeros)?;

    let h2 = 2.0 * p.h;
    let cont = DMatrix::from_fn(m + 2, m + 2, |i, j| {
        let ti = if i < m { times[i] } else { t };
        let tj = if j < m { times[j] } else { t };
        if i >= m && j >= m && i != j {
            rho_closed(t, s, p).unwrap_or(f64::NAN)
        } else {
            0.5 * (ti.abs().powf(h2) + tj.abs().powf(h2) - (ti - tj).abs().powf(h2))
        }
    });
    let cont_cond = gaussian_condition(&cont, &observed, &zeros)?;
    Ok(ConditionalIndependence {
        t,
        s,
        grid: m,
        cell_model_residual: cell.cov[(0, 1)],
        continuum_residual: cont_cond.cov[(0, 1)],
        unconditioned: rho_closed(t, s, p)?,
    })
}

/// Empirical covariance of replica samples (rows = replicas).
pub fn empirical_covariance(samples: &[Vec<f64>]) -> (DMatrix<f64>, DMatrix<f64>) {
    let r = samples.len();
    let k = samples[0].len();
    let mut cov = DMatrix::zeros(k, k);
    let mut se = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..=i {
            let xs: Vec<f64> = samples.iter().map(|s| s[i]).collect();
            let ys: Vec<f64> = samples.iter().map(|s| s[j]).collect();
            let e = crate::stats::covariance_estimate(&xs, &ys);
            cov[(i, j)] = e.value;
            cov[(j, i)] = e.value;
            se[(i, j)] = e.std_err;
            se[(j, i)] = e.std_err;
        }
    }
    let _ = r;
    (cov, se)
}
