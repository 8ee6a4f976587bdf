use std::path::{Path, PathBuf};

use anyhow::Context;
use rand::Rng;
use serde::Serialize;
use serde_json::json;

use sctperc::cone::{
    build_cone, count_disjoint_surviving_clusters, find_wide_vertex, root_survives,
};
use sctperc::estimators::{
    cluster_size_sample, fit_tail, hitting_time_sample, lin_spaced, log_spaced,
    near_critical_theta_scan, run_indexed, scaling_selfconsistency, RunConfig, TailAxis,
    ThetaOptions,
};
use sctperc::halfplane::{bfs_cluster, LazyMap, PercolationOverlay};
use sctperc::model::{compute_drift, pruned_mean, AnalyticConstants};
use sctperc::peeling::{explore_cluster, simulate_walk, Budgets};
use sctperc::{BudgetKind, ModelParams};

use crate::config::{Axis, Command, ExperimentConfig, Format, Mode, Source, Task};
use crate::output::{Cell, Sink};
use crate::UsageError;

/// How a command finished.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Complete,
    /// Some samples stopped at a budget; their partial results were kept.
    Partial,
}

pub struct Env {
    pub out_dir: PathBuf,
    pub threads: Option<usize>,
}

const TOL: f64 = 1e-14;

fn model(alpha: f64, p: f64) -> anyhow::Result<ModelParams> {
    ModelParams::new(alpha, p).map_err(|e| UsageError(e.to_string()).into())
}

fn critical_p(alpha: f64) -> anyhow::Result<f64> {
    Ok(AnalyticConstants::compute(model(alpha, 0.5)?, TOL).p_c)
}

fn default_name(cfg: &ExperimentConfig, stem: &str, ext: &str) -> PathBuf {
    cfg.output
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{stem}.{ext}")))
}

pub fn run(mut cfg: ExperimentConfig, env: &Env) -> anyhow::Result<Status> {
    match cfg.command.expect("command is set") {
        Command::Pc => pc(&mut cfg, env),
        Command::Simulate => {
            let mode = cfg
                .mode
                .ok_or_else(|| UsageError("simulate needs --mode walk|cluster|cone".into()))?;
            match mode {
                Mode::Walk => sim_walk(&mut cfg, env),
                Mode::Cluster => sim_cluster(&mut cfg, env),
                Mode::Cone => sim_cone(&mut cfg, env),
            }
        }
        Command::Analyze => {
            let task = cfg.task.ok_or_else(|| {
                UsageError("analyze needs --task tail|theta-scan|scaling|count-clusters".into())
            })?;
            match task {
                Task::Tail => tail(&mut cfg, env),
                Task::ThetaScan => theta_scan(&mut cfg, env),
                Task::Scaling => scaling(&mut cfg, env),
                Task::CountClusters => count_clusters(&mut cfg, env),
            }
        }
    }
}

fn pc(cfg: &mut ExperimentConfig, env: &Env) -> anyhow::Result<Status> {
    let alpha = *cfg.alpha.get_or_insert(2.0 / 3.0);
    let tol = *cfg.tol.get_or_insert(1e-12);
    if !(tol > 0.0) {
        return Err(UsageError("--tol must be positive".into()).into());
    }
    let k = AnalyticConstants::compute(model(alpha, 0.5)?, tol);
    let at_pc = AnalyticConstants::compute(model(alpha, k.p_c)?, tol);
    println!("alpha   {alpha}");
    println!("m       {}", alpha / (1.0 - alpha));
    println!("eta     {:.12}", k.eta);
    println!("p_c     {:.12}", k.p_c);
    println!("sigma2  {:.12}  (increment variance at p_c)", at_pc.sigma2);
    println!(
        "series truncation error ≤ {:.1e}",
        k.series_truncation_error
    );
    println!();
    println!("{:>8}  {:>14}", "p", "drift");
    let grid = cfg
        .p_grid
        .get_or_insert_with(|| (1..=9).map(|i| i as f64 / 10.0).collect())
        .clone();
    let mut rows = Vec::new();
    for p in grid {
        let d = compute_drift(model(alpha, p)?, tol);
        println!("{p:>8.4}  {d:>14.10}");
        rows.push(vec![Cell::from(p), Cell::from(d)]);
    }
    if let Some(name) = cfg.output.clone() {
        let format = *cfg.format.get_or_insert(Format::Csv);
        let sink = Sink::new(&env.out_dir, cfg)?;
        let summary = json!({ "eta": k.eta, "p_c": k.p_c, "sigma2_at_pc": at_pc.sigma2,
            "series_truncation_error": k.series_truncation_error });
        let path = sink.table(&name, format, &["p", "drift"], &rows, &summary)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(Status::Complete)
}

fn run_config(cfg: &mut ExperimentConfig, env: &Env, n_default: u64) -> RunConfig {
    let seed = *cfg.seed.get_or_insert(1);
    let n = *cfg.n.get_or_insert(n_default);
    RunConfig::new(seed, n).with_threads(env.threads)
}

fn alpha_and_p(cfg: &mut ExperimentConfig) -> anyhow::Result<(f64, f64)> {
    let alpha = *cfg.alpha.get_or_insert(2.0 / 3.0);
    let p = match cfg.p {
        Some(p) => p,
        None => *cfg.p.insert(critical_p(alpha)?),
    };
    model(alpha, p)?;
    Ok((alpha, p))
}

#[derive(Serialize)]
struct WalkRecord {
    sample: u64,
    t: Option<u64>,
    t_prime: Option<u64>,
    steps: usize,
    max_height: i64,
    final_height: i64,
}

fn sim_walk(cfg: &mut ExperimentConfig, env: &Env) -> anyhow::Result<Status> {
    let (alpha, p) = alpha_and_p(cfg)?;
    let horizon = *cfg.horizon.get_or_insert(10_000);
    if horizon == 0 {
        return Err(UsageError("--horizon must be positive".into()).into());
    }
    let rc = run_config(cfg, env, 1000);
    let params = model(alpha, p)?;
    let records = run_indexed(rc.master_seed, 0..rc.n_samples, rc.threads, |i, rng| {
        let w = simulate_walk(params, horizon, rng);
        WalkRecord {
            sample: i,
            t: w.t,
            t_prime: w.t_prime,
            steps: w.len(),
            max_height: w.max_height(),
            final_height: *w.heights.last().unwrap(),
        }
    });
    let alive = records.iter().filter(|r| r.t.is_none()).count();
    let frac = alive as f64 / records.len().max(1) as f64;
    let se = (frac * (1.0 - frac) / records.len().max(1) as f64).sqrt();
    let summary = json!({ "samples": records.len(), "alive_at_horizon": alive, "fraction": frac,
        "ci95": [frac - 1.96 * se, frac + 1.96 * se] });
    println!(
        "{} walks, {} still nonnegative after {horizon} steps: {:.5} (95% CI {:.5}..{:.5})",
        records.len(),
        alive,
        frac,
        frac - 1.96 * se,
        frac + 1.96 * se
    );
    let sink = Sink::new(&env.out_dir, cfg)?;
    let path = sink.jsonl(
        &default_name(cfg, "simulate-walk", "jsonl"),
        &records,
        &summary,
    )?;
    eprintln!("wrote {}", path.display());
    Ok(Status::Complete)
}

#[derive(Serialize)]
struct ClusterRecord {
    sample: u64,
    finished: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    budget: Option<BudgetKind>,
    /// Vertices found (a lower bound when unfinished).
    size: usize,
    steps: usize,
    theta_sum: u64,
    max_jump: i64,
    #[serde(skip_serializing_if = "Option::is_none")]
    equals_bfs: Option<bool>,
}

fn budgets(cfg: &mut ExperimentConfig) -> Budgets {
    let d = Budgets::default();
    Budgets {
        max_steps: *cfg.max_steps.get_or_insert(100_000),
        max_level: *cfg.max_level.get_or_insert(10_000),
        max_vertices: *cfg.max_vertices.get_or_insert(d.max_vertices),
        max_skeleton: None,
    }
}

fn sim_cluster(cfg: &mut ExperimentConfig, env: &Env) -> anyhow::Result<Status> {
    let (alpha, p) = alpha_and_p(cfg)?;
    let b = budgets(cfg);
    let couple = *cfg.couple.get_or_insert(false);
    let rc = run_config(cfg, env, 1000);
    let params = model(alpha, p)?;
    let records = run_indexed(rc.master_seed, 0..rc.n_samples, rc.threads, |i, rng| {
        let mut map = LazyMap::half_plane(params, rng.gen());
        let ov = PercolationOverlay::hashed(p, rng.gen());
        let start = map.root(0);
        let (tr, budget) = match explore_cluster(&mut map, &ov, start, b) {
            Ok(tr) => (tr, None),
            Err(e) => (e.partial, Some(e.kind)),
        };
        let equals_bfs = (couple && budget.is_none()).then(|| {
            let mut ours = tr.cluster_vertices();
            ours.sort_by_cached_key(|&v| map.canonical_key(v));
            bfs_cluster(&mut map, &ov, start, i32::MAX, b.max_vertices)
                .is_ok_and(|s| s.vertices == ours)
        });
        ClusterRecord {
            sample: i,
            finished: budget.is_none(),
            budget,
            size: tr.cluster_size(),
            steps: tr.steps.len(),
            theta_sum: tr.steps.iter().map(|s| s.theta).sum(),
            max_jump: tr.max_jump(),
            equals_bfs,
        }
    });
    let finished = records.iter().filter(|r| r.finished).count();
    let partial = records.len() - finished;
    let mut summary =
        json!({ "samples": records.len(), "finished": finished, "budget_exhausted": partial });
    println!(
        "{} clusters: {finished} finished, {partial} stopped at a budget",
        records.len()
    );
    if couple {
        let equal = records
            .iter()
            .filter(|r| r.equals_bfs == Some(true))
            .count();
        let pct = if finished == 0 {
            100.0
        } else {
            100.0 * equal as f64 / finished as f64
        };
        summary["peeling_equals_bfs"] = json!(equal);
        summary["peeling_equals_bfs_percent"] = json!(pct);
        println!("peeling ≡ BFS on {equal}/{finished} finished clusters ({pct:.1}%)");
    }
    let sink = Sink::new(&env.out_dir, cfg)?;
    let path = sink.jsonl(
        &default_name(cfg, "simulate-cluster", "jsonl"),
        &records,
        &summary,
    )?;
    eprintln!("wrote {}", path.display());
    Ok(if partial > 0 {
        Status::Partial
    } else {
        Status::Complete
    })
}

#[derive(Serialize)]
struct ConeRecord {
    sample: u64,
    root_key: u64,
    attempts: u32,
    survives_to_depth: bool,
    explored: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    wide_level: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    wide_rounds: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cousins: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn sim_cone(cfg: &mut ExperimentConfig, env: &Env) -> anyhow::Result<Status> {
    let (alpha, p) = alpha_and_p(cfg)?;
    let depth = *cfg.depth.get_or_insert(60);
    let wdepth = *cfg.wideness_depth.get_or_insert(20);
    if depth == 0 {
        return Err(UsageError("--depth must be positive".into()).into());
    }
    let rc = run_config(cfg, env, 100);
    let params = model(alpha, p)?;
    let search_wide = pruned_mean(params) > 1.0;
    let records = run_indexed(rc.master_seed, 0..rc.n_samples, rc.threads, |i, rng| {
        let mut cone = match build_cone(params, depth, rng, 10_000) {
            Ok(c) => c,
            Err(e) => {
                return ConeRecord {
                    sample: i,
                    root_key: 0,
                    attempts: 0,
                    survives_to_depth: false,
                    explored: 0,
                    wide_level: None,
                    wide_rounds: None,
                    cousins: None,
                    error: Some(e.to_string()),
                }
            }
        };
        let ov = PercolationOverlay::hashed(p, rng.gen());
        let probe = root_survives(&mut cone, &ov, depth);
        let wide = search_wide.then(|| find_wide_vertex(&mut cone, &ov, wdepth, 1 << 26));
        let (wide_level, wide_rounds, cousins, error) = match wide {
            Some(Ok(r)) => (Some(r.vertex.0), Some(r.rounds), r.cousins_count, None),
            Some(Err(e)) => (None, None, None, Some(e.to_string())),
            None => (None, None, None, None),
        };
        ConeRecord {
            sample: i,
            root_key: cone.root_key(),
            attempts: cone.attempts(),
            survives_to_depth: probe.reached,
            explored: probe.explored,
            wide_level,
            wide_rounds,
            cousins,
            error,
        }
    });
    let survived = records.iter().filter(|r| r.survives_to_depth).count();
    let errors = records.iter().filter(|r| r.error.is_some()).count();
    let rounds: Vec<f64> = records
        .iter()
        .filter_map(|r| r.wide_rounds)
        .map(f64::from)
        .collect();
    let mean_rounds =
        (!rounds.is_empty()).then(|| rounds.iter().sum::<f64>() / rounds.len() as f64);
    let summary = json!({ "samples": records.len(), "root_survives": survived, "errors": errors,
        "mean_wide_rounds": mean_rounds });
    println!(
        "{} cones: root cluster reaches depth {depth} in {survived}; {errors} samples hit a budget",
        records.len()
    );
    if let Some(m) = mean_rounds {
        println!("wide vertex found after {m:.2} rounds on average");
    }
    let sink = Sink::new(&env.out_dir, cfg)?;
    let path = sink.jsonl(
        &default_name(cfg, "simulate-cone", "jsonl"),
        &records,
        &summary,
    )?;
    eprintln!("wrote {}", path.display());
    Ok(if errors > 0 {
        Status::Partial
    } else {
        Status::Complete
    })
}

fn read_samples(path: &Path) -> anyhow::Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| UsageError(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let field = line.split(',').next().unwrap().trim();
        match field.parse::<f64>() {
            Ok(x) if !x.is_nan() => out.push(x),
            _ if i == 0 => continue,
            _ => {
                return Err(UsageError(format!(
                    "{}:{}: not a number: {field:?}",
                    path.display(),
                    i + 1
                ))
                .into());
            }
        }
    }
    Ok(out)
}

fn tail(cfg: &mut ExperimentConfig, env: &Env) -> anyhow::Result<Status> {
    let n_min = *cfg.n_min.get_or_insert(100.0);
    let n_max = *cfg.n_max.get_or_insert(10_000.0);
    let points = *cfg.points.get_or_insert(9);
    let axis = *cfg.axis.get_or_insert(Axis::LogLog);
    if !(n_min >= 1.0 && n_max > n_min) || points < 5 {
        return Err(UsageError("need 1 ≤ n-min < n-max and at least 5 points".into()).into());
    }
    let samples = match cfg.input.clone() {
        Some(path) => read_samples(&path)?,
        None => {
            let (alpha, p) = alpha_and_p(cfg)?;
            let source = *cfg.source.get_or_insert(Source::Walk);
            let rc = run_config(cfg, env, 100_000);
            let params = model(alpha, p)?;
            match source {
                Source::Walk => hitting_time_sample(params, n_max as u64, &rc)?,
                Source::Cluster => cluster_size_sample(params, n_max as usize, &rc)?.sizes,
            }
        }
    };
    let (grid, ax) = match axis {
        Axis::LogLog => (log_spaced(n_min, n_max, points), TailAxis::LogLog),
        Axis::SemiLog => (lin_spaced(n_min, n_max, points), TailAxis::SemiLog),
    };
    let fit = fit_tail(&samples, &grid, ax).map_err(|e| UsageError(e.to_string()))?;
    println!(
        "exponent {:.5} ± {:.5} (95% CI {:.5}..{:.5}), r² = {:.5}, n ∈ [{}, {}], {} samples",
        fit.exponent,
        fit.stderr,
        fit.exponent - 1.96 * fit.stderr,
        fit.exponent + 1.96 * fit.stderr,
        fit.r_squared,
        fit.fit_range.0,
        fit.fit_range.1,
        fit.n_samples
    );
    let format = *cfg.format.get_or_insert(Format::Csv);
    let rows: Vec<Vec<Cell>> = fit
        .points
        .iter()
        .map(|&(n, s)| vec![Cell::from(n), Cell::from(s)])
        .collect();
    let summary = json!({ "exponent": fit.exponent, "stderr": fit.stderr, "intercept": fit.intercept,
        "fit_range": fit.fit_range, "r_squared": fit.r_squared, "n_samples": fit.n_samples });
    let sink = Sink::new(&env.out_dir, cfg)?;
    let name = default_name(cfg, "analyze-tail", format.extension());
    let path = sink.table(&name, format, &["n", "survival"], &rows, &summary)?;
    eprintln!("wrote {}", path.display());
    Ok(Status::Complete)
}

fn theta_scan(cfg: &mut ExperimentConfig, env: &Env) -> anyhow::Result<Status> {
    let alpha = *cfg.alpha.get_or_insert(2.0 / 3.0);
    let pc = critical_p(alpha)?;
    let grid = cfg
        .p_grid
        .get_or_insert_with(|| {
            [0.02, 0.04, 0.06, 0.08, 0.1]
                .iter()
                .map(|d| pc + d)
                .collect()
        })
        .clone();
    for &p in &grid {
        model(alpha, p)?;
    }
    let horizon = *cfg.horizon.get_or_insert(100_000);
    let rc = run_config(cfg, env, 100_000);
    let dps: Vec<f64> = grid.iter().map(|p| p - pc).collect();
    let opts = ThetaOptions {
        horizon,
        absorb_eps: Some(1e-6),
    };
    let rows = near_critical_theta_scan(alpha, &dps, opts, &rc)?;
    println!("p_c = {pc:.10}");
    println!(
        "{:>10} {:>10} {:>10} {:>21} {:>10}",
        "p", "p-p_c", "theta", "95% CI", "ratio"
    );
    for r in &rows {
        println!(
            "{:>10.6} {:>10.6} {:>10.6} {:>10.6}..{:<10.6} {:>10}",
            r.p,
            r.dp,
            r.theta,
            r.ci_low,
            r.ci_high,
            r.ratio.map_or("-".into(), |x| format!("{x:.5}"))
        );
    }
    let format = *cfg.format.get_or_insert(Format::Csv);
    let table: Vec<Vec<Cell>> = rows
        .iter()
        .map(|r| {
            vec![
                r.p.into(),
                r.dp.into(),
                r.theta.into(),
                r.ci_low.into(),
                r.ci_high.into(),
                r.ratio.into(),
                r.decomposition.into(),
            ]
        })
        .collect();
    let sink = Sink::new(&env.out_dir, cfg)?;
    let name = default_name(cfg, "analyze-theta-scan", format.extension());
    let cols = [
        "p",
        "dp",
        "theta",
        "ci_low",
        "ci_high",
        "ratio",
        "decomposition",
    ];
    let path = sink.table(
        &name,
        format,
        &cols,
        &table,
        &json!({ "p_c": pc, "horizon": horizon }),
    )?;
    eprintln!("wrote {}", path.display());
    Ok(Status::Complete)
}

fn scaling(cfg: &mut ExperimentConfig, env: &Env) -> anyhow::Result<Status> {
    let (alpha, p) = alpha_and_p(cfg)?;
    let n = *cfg.n_min.get_or_insert(1000.0) as u64;
    let factor = *cfg.factor.get_or_insert(4);
    let rc = run_config(cfg, env, 10_000);
    if factor < 2 || n < 2 {
        return Err(UsageError("scaling needs --factor ≥ 2 and --n-min ≥ 2".into()).into());
    }
    let rep = scaling_selfconsistency(model(alpha, p)?, n, factor, rc.n_samples as usize, &rc)?;
    println!(
        "scales {} and {}, {} conditioned walks each",
        rep.scales.0, rep.scales.1, rep.n_conditioned
    );
    println!(
        "acceptance rates {:.5} and {:.5}",
        rep.acceptance.0, rep.acceptance.1
    );
    let ks = [
        ("max_height", rep.ks_max_height),
        ("mid_height", rep.ks_mid_height),
        ("duration", rep.ks_duration),
    ];
    for (name, k) in &ks {
        println!(
            "KS {name:<11} {:.5} (p-value {:.3})",
            k.statistic, k.p_value
        );
    }
    let format = *cfg.format.get_or_insert(Format::Json);
    let sink = Sink::new(&env.out_dir, cfg)?;
    let name = default_name(cfg, "analyze-scaling", format.extension());
    let path = if format == Format::Json {
        sink.json(&name, &rep)?
    } else {
        let rows: Vec<Vec<Cell>> = ks
            .iter()
            .map(|(n, k)| vec![Cell::from(*n), k.statistic.into(), k.p_value.into()])
            .collect();
        let extra =
            json!({ "scales": rep.scales, "acceptance": rep.acceptance, "sigma2": rep.sigma2 });
        sink.table(
            &name,
            format,
            &["functional", "ks", "p_value"],
            &rows,
            &extra,
        )?
    };
    eprintln!("wrote {}", path.display());
    Ok(Status::Complete)
}

fn count_clusters(cfg: &mut ExperimentConfig, env: &Env) -> anyhow::Result<Status> {
    let alpha = *cfg.alpha.get_or_insert(2.0 / 3.0);
    let p = *cfg.p.get_or_insert(0.6);
    let hs = cfg.h.get_or_insert_with(|| vec![4, 8, 12]).clone();
    let r = *cfg.r.get_or_insert(30);
    let rc = run_config(cfg, env, 200);
    let params = model(alpha, p)?;
    let mut table = Vec::new();
    let mut failures = 0;
    println!(
        "{:>4} {:>10} {:>21} {:>11} {:>10}",
        "h", "groups", "95% CI", "candidates", "surviving"
    );
    for &h in &hs {
        let res = run_indexed(
            rc.master_seed.wrapping_add(h as u64),
            0..rc.n_samples,
            rc.threads,
            |_, rng| {
                let mut cone = build_cone(params, h + r + 1, rng, 10_000)?;
                let ov = PercolationOverlay::hashed(p, rng.gen());
                count_disjoint_surviving_clusters(&mut cone, &ov, h, r, 1 << 24)
            },
        );
        let ok: Vec<_> = res.iter().filter_map(|x| x.as_ref().ok()).collect();
        failures += res.len() - ok.len();
        if let Some(e) = res.iter().find_map(|x| x.as_ref().err()) {
            eprintln!(
                "h={h}: {} samples failed, first error: {e}",
                res.len() - ok.len()
            );
        }
        let k = ok.len().max(1) as f64;
        let g: Vec<f64> = ok.iter().map(|c| c.groups as f64).collect();
        let mean = g.iter().sum::<f64>() / k;
        let var = g.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0).max(1.0);
        let se = (var / k).sqrt();
        let cand = ok.iter().map(|c| c.candidates as f64).sum::<f64>() / k;
        let surv = ok.iter().map(|c| c.surviving as f64).sum::<f64>() / k;
        println!(
            "{h:>4} {mean:>10.4} {:>10.4}..{:<10.4} {cand:>11.2} {surv:>10.3}",
            mean - 1.96 * se,
            mean + 1.96 * se
        );
        table.push(vec![
            Cell::from(h),
            mean.into(),
            (mean - 1.96 * se).into(),
            (mean + 1.96 * se).into(),
            cand.into(),
            surv.into(),
            Cell::from(ok.len() as u64),
        ]);
    }
    let format = *cfg.format.get_or_insert(Format::Csv);
    let sink = Sink::new(&env.out_dir, cfg)?;
    let name = default_name(cfg, "analyze-count-clusters", format.extension());
    let cols = [
        "h",
        "mean_groups",
        "ci_low",
        "ci_high",
        "mean_candidates",
        "mean_surviving",
        "cones",
    ];
    let path = sink
        .table(
            &name,
            format,
            &cols,
            &table,
            &json!({ "failed_samples": failures }),
        )
        .context("writing count-clusters table")?;
    eprintln!("wrote {}", path.display());
    Ok(if failures > 0 {
        Status::Partial
    } else {
        Status::Complete
    })
}
