use std::fmt::Write as _;

use serde_json::json;

use bfbm_core::branching_hs::{branch_walk, unit_normalized, simulate_tree_urn};
use bfbm_core::extremes::{estimate_max, MaxExperiment, MaxTree, CHOLESKY_NODES};
use bfbm_core::gaussian_bfbm::{
    rho_closed, rho_hs_quadrature, rho_kernel_quadrature, CholeskySampler, GremPlan, Method, WhiteNoisePlan,
};
use bfbm_core::identities::{default_sweep, Verdict};
use bfbm_core::linear_hs::{default_window, rescaled_path, simulate_linear, UrnConfig};
use bfbm_core::prediction::{prediction_check, PredictionSetup};
use bfbm_core::rng::{derive_seed, domain as dom, par_replicas, stream};
use bfbm_core::tree::{binary_tree, sample_yule, Direction, TreeTopology};
use bfbm_core::{fmt_f64, Error, HurstParams, RenewalTable};

use crate::output::{json_text, sidecar, write, Meta};
use crate::*;

/// Table length used when only the walk scaling `c(n)` is needed.
const SCALE_TABLE: usize = 1 << 16;

pub fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Renewal(a) => renewal(a),
        Command::SimulateLinear(a) => simulate_linear_cmd(a),
        Command::SampleTree(a) => sample_tree(a),
        Command::SimulateBfbmDiscrete(a) => simulate_bfbm_discrete(a),
        Command::SampleBfbm(a) => sample_bfbm(a),
        Command::Covariance(a) => covariance(a),
        Command::EstimateMax(a) => estimate_max_cmd(a),
        Command::PredictCheck(a) => predict_check(a),
        Command::VerifyIdentities(a) => verify_identities(a),
    }
}

fn need_seed(seed: Option<u64>) -> Result<u64, Failure> {
    seed.ok_or_else(|| Failure::Usage("this command is stochastic and needs --seed".into()))
}

fn direction(d: DirectionArg) -> Direction {
    match d {
        DirectionArg::Left => Direction::Left,
        DirectionArg::Right => Direction::Right,
    }
}

fn levels_for(per_unit: usize, t: f64) -> usize {
    (per_unit as f64 * t).ceil().max(1.0) as usize
}

/// The tree shared by every replica of a run: it depends on the seed only.
fn build_tree(kind: TreeArg, horizon: f64, seed: u64) -> Result<TreeTopology, Failure> {
    Ok(match kind {
        TreeArg::Yule => sample_yule(horizon, derive_seed(seed, dom::TREE, 0))?,
        TreeArg::Binary => binary_tree(horizon)?,
        TreeArg::Path => {
            if !(horizon > 0.0) {
                return Err(Failure::Usage(format!("horizon must be positive, got {horizon}")));
            }
            TreeTopology::single(horizon)
        }
    })
}

fn renewal(a: RenewalArgs) -> Result<(), Failure> {
    let p = a.hurst.params()?;
    let tbl = RenewalTable::build(p.alpha, a.n_max)?;
    let meta = Meta::new("renewal", &a, None);
    let mut csv = meta.csv_header();
    csv.push_str("n,q_n\n");
    for (n, q) in tbl.q.iter().enumerate() {
        let _ = writeln!(csv, "{n},{}", fmt_f64(*q));
    }
    write(a.out.as_deref(), &csv)?;
    if let Some(out) = &a.out {
        let body = json!({
            "alpha": tbl.alpha,
            "n_max": tbl.n_max(),
            "q2_sum": tbl.q2_sum,
            "q2_tail": tbl.q2_tail,
            "c1": tbl.c1,
            "c2": tbl.c2,
            "c3": tbl.c3,
        });
        write(Some(&sidecar(out)), &json_text(&meta.wrap(body)))?;
    }
    Ok(())
}

fn simulate_linear_cmd(a: SimulateLinearArgs) -> Result<(), Failure> {
    let p = a.hurst.params()?;
    let seed = need_seed(a.seed)?;
    if a.steps_per_unit == 0 || !(a.horizon > 0.0) || a.replicas == 0 {
        return Err(Failure::Usage("need steps-per-unit ≥ 1, T > 0 and replicas ≥ 1".into()));
    }
    let n = a.steps_per_unit;
    let n_total = (a.horizon * n as f64).round().max(1.0) as usize;
    let tbl = RenewalTable::build(p.alpha, SCALE_TABLE)?;
    let grid: Vec<f64> = (0..=n_total).map(|k| k as f64 / n as f64).collect();
    let paths = par_replicas(seed, a.replicas, |_, s| {
        let mut cfg = UrnConfig::new(p.alpha, n_total, n, s);
        if let Some(w) = a.window {
            cfg.window_past = w;
        }
        rescaled_path(&simulate_linear(&cfg)?, &tbl, &grid)
    })
    .into_iter()
    .collect::<Result<Vec<_>, Error>>()?;
    let meta = Meta::new("simulate-linear", &a, Some(seed));
    let mut csv = meta.csv_header();
    csv.push_str("replica,t,S_n_t\n");
    for (r, path) in paths.iter().enumerate() {
        for (t, v) in grid.iter().zip(path) {
            let _ = writeln!(csv, "{r},{},{}", fmt_f64(*t), fmt_f64(*v));
        }
    }
    write(a.out.as_deref(), &csv)
}

fn sample_tree(a: SampleTreeArgs) -> Result<(), Failure> {
    let seed = match a.kind {
        TreeArg::Yule => Some(need_seed(a.seed)?),
        _ => a.seed,
    };
    let mut tree = build_tree(a.kind, a.horizon, seed.unwrap_or(0))?;
    if let Some(k) = a.levels_per_unit {
        tree = tree.discretize(levels_for(k, a.horizon), a.horizon, direction(a.direction))?;
    }
    let meta = Meta::new("sample-tree", &a, seed);
    let mut csv = meta.csv_header();
    csv.push_str(&tree.to_csv());
    write(a.out.as_deref(), &csv)
}

fn simulate_bfbm_discrete(a: SimulateBfbmDiscreteArgs) -> Result<(), Failure> {
    let p = a.hurst.params()?;
    let seed = need_seed(a.seed)?;
    let n = a.steps_per_unit;
    if n == 0 {
        return Err(Failure::Usage("need steps-per-unit ≥ 1".into()));
    }
    let tree = build_tree(a.tree, a.horizon, seed)?;
    let n_total = (a.horizon * n as f64).round() as usize;
    let window = a.window.unwrap_or_else(|| default_window(n_total));
    let urn = simulate_tree_urn(&tree, n, p.alpha, window, derive_seed(seed, dom::URN, 0))?;
    let tbl = RenewalTable::build(p.alpha, SCALE_TABLE)?;
    let meta = Meta::new("simulate-bfbm-discrete", &a, Some(seed));
    let mut csv = meta.csv_header();
    csv.push_str("branch_id,t,value\n");
    for b in &tree.branches {
        let first = (b.birth * n as f64).floor() as usize + 1;
        let grid: Vec<f64> = std::iter::once(b.birth)
            .chain((first..=n_total).map(|k| k as f64 / n as f64))
            .collect();
        let values = branch_walk(&urn, b.id, &grid, &tbl)?;
        for (t, v) in grid.iter().zip(values) {
            let _ = writeln!(csv, "{},{},{}", b.id, fmt_f64(*t), fmt_f64(unit_normalized(v, &tbl)));
        }
    }
    write(a.out.as_deref(), &csv)
}

enum Sampler {
    Cholesky(CholeskySampler),
    WhiteNoise(WhiteNoisePlan),
    Grem(GremPlan),
}

fn sample_bfbm(a: SampleBfbmArgs) -> Result<(), Failure> {
    let p = a.hurst.params()?;
    let seed = need_seed(a.seed)?;
    if !(a.t > 0.0) {
        return Err(Failure::Usage(format!("t must be positive, got {}", a.t)));
    }
    let tree = build_tree(a.tree, a.t, seed)?;
    let sampler = match a.method {
        MethodArg::Cholesky => {
            if tree.len() > CHOLESKY_NODES {
                return Err(Error::Budget(format!("{} branches, dense factorization allows {CHOLESKY_NODES}", tree.len())).into());
            }
            let nodes: Vec<(usize, f64)> = (0..tree.len()).map(|b| (b, a.t)).collect();
            Sampler::Cholesky(CholeskySampler::new(&tree, &nodes, &p)?)
        }
        MethodArg::Whitenoise => {
            let dt = a.dt.unwrap_or(a.t / 200.0);
            let s_past = a.s_past.unwrap_or(50.0 * a.t);
            Sampler::WhiteNoise(WhiteNoisePlan::new(&tree, dt, a.t, s_past, &p)?)
        }
        MethodArg::Grem => {
            let disc = tree.discretize(levels_for(a.levels_per_unit, a.t), a.t, direction(a.direction))?;
            Sampler::Grem(GremPlan::new(&disc, &p)?)
        }
    };
    let rows = par_replicas(seed, a.replicas, |_, s| {
        let mut rng = stream(s, dom::GAUSS, 0);
        match &sampler {
            Sampler::Cholesky(c) => c.sample(&mut rng).values,
            Sampler::WhiteNoise(w) => w.sample(&mut rng).values,
            Sampler::Grem(g) => g.sample(&mut rng).values,
        }
    });
    let meta = Meta::new("sample-bfbm", &a, Some(seed));
    let mut csv = meta.csv_header();
    csv.push_str("replica,branch_id,value\n");
    for (r, values) in rows.iter().enumerate() {
        for (b, v) in values.iter().enumerate() {
            let _ = writeln!(csv, "{r},{b},{}", fmt_f64(*v));
        }
    }
    write(a.out.as_deref(), &csv)
}

fn covariance(a: CovarianceArgs) -> Result<(), Failure> {
    let p = a.hurst.params()?;
    let (value, est_error) = match a.mode {
        CovMode::Closed => {
            if a.t1 != a.t2 {
                return Err(Failure::Usage("closed mode needs t1 = t2".into()));
            }
            (rho_closed(a.t1, a.s, &p)?, 0.0)
        }
        CovMode::Kernel => {
            let r = rho_kernel_quadrature(a.t1, a.t2, a.s, &p)?;
            (r.value, r.error)
        }
        CovMode::Hs => {
            let r = rho_hs_quadrature(a.t1, a.t2, a.s, &p)?;
            (r.value, r.error)
        }
    };
    let meta = Meta::new("covariance", &a, None);
    let body = json!({ "value": value, "est_error": est_error });
    write(a.out.as_deref(), &json_text(&meta.wrap(body)))
}

fn estimate_max_cmd(a: EstimateMaxArgs) -> Result<(), Failure> {
    let p = a.hurst.params()?;
    let seed = need_seed(a.seed)?;
    let tree = match a.tree {
        TreeArg::Yule => MaxTree::Yule,
        TreeArg::Binary => MaxTree::Binary,
        TreeArg::Path => return Err(Failure::Usage("maxima need a yule or binary tree".into())),
    };
    let method = match a.method {
        MethodArg::Grem => Method::Grem,
        MethodArg::Cholesky => Method::Cholesky,
        MethodArg::Whitenoise => return Err(Failure::Usage("maxima support the grem and cholesky samplers".into())),
    };
    let exp = MaxExperiment {
        h: p.h,
        tree,
        t_list: a.t_list.clone(),
        replicas: a.replicas,
        method,
        levels: a.levels_per_unit,
        direction: direction(a.direction),
        seed,
    };
    let rows = estimate_max(&exp)?;
    let meta = Meta::new("estimate-max", &a, Some(seed));
    let mut csv = meta.csv_header();
    csv.push_str("t,replica,M,ratio\n");
    for row in &rows {
        for (r, m) in row.samples.iter().enumerate() {
            let _ = writeln!(csv, "{},{r},{},{}", fmt_f64(row.t), fmt_f64(*m), fmt_f64(m / row.m));
        }
    }
    write(a.out.as_deref(), &csv)?;
    if let Some(out) = &a.out {
        let summary: Vec<_> = rows
            .iter()
            .map(|r| {
                json!({
                    "t": r.t,
                    "m": r.m,
                    "mean_ratio": r.mean_ratio,
                    "std_err": r.std_err,
                    "sd_ratio": r.sd_ratio,
                    "q05": r.q05,
                    "q50": r.q50,
                    "q95": r.q95,
                })
            })
            .collect();
        write(Some(&sidecar(out)), &json_text(&meta.wrap(json!({ "rows": summary }))))?;
    }
    Ok(())
}

fn predict_check(a: PredictCheckArgs) -> Result<(), Failure> {
    let p = a.hurst.params()?;
    let seed = need_seed(a.seed)?;
    let setup = PredictionSetup {
        h: p.h,
        t: a.t,
        depth: a.depth,
        grid: a.grid,
        replicas: a.replicas,
    };
    let report = prediction_check(&setup, seed)?;
    let meta = Meta::new("predict-check", &a, Some(seed));
    let body = json!({
        "mean_abs_discrepancy": report.mean_abs_discrepancy,
        "mc_discrepancy": report.mc_discrepancy,
        "scale": report.scale,
        "relative": report.mean_abs_discrepancy / report.scale,
        "conditional_variance": report.conditional_variance,
    });
    write(a.out.as_deref(), &json_text(&meta.wrap(body)))
}

fn verify_identities(a: VerifyIdentitiesArgs) -> Result<(), Failure> {
    let p = a.hurst.params()?;
    if !(a.tol > 0.0) {
        return Err(Failure::Usage(format!("tol must be positive, got {}", a.tol)));
    }
    let mut reports = default_sweep(&p, a.tol)?;
    if a.sweep {
        for h in [0.55, 0.65, 0.75, 0.85, 0.95] {
            reports.extend(default_sweep(&HurstParams::new(h)?, a.tol)?);
        }
    }
    let meta = Meta::new("verify-identities", &a, None);
    let failed = reports.iter().filter(|r| r.verdict == Verdict::Fail).count();
    let body = json!({ "reports": reports, "failed": failed });
    write(a.out.as_deref(), &json_text(&meta.wrap(body)))?;
    if failed > 0 {
        return Err(Failure::Verification(format!("{failed} of {} identity checks failed", reports.len())));
    }
    Ok(())
}
