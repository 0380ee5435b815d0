//! Command implementations.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde_json::json;

use robo_mv::config::{Manifest, RunConfig};
use robo_mv::cycle_analytics::{annualize_sharpe, implied_gamma, sharpe_delta, SharpeInputs};
use robo_mv::montecarlo::{annualized, histogram, simulate, stats, SimConfig, Strategy};
use robo_mv::numeric::fmt12;
use robo_mv::personalization::{r_measure, r_tilde, s_measure, RMode};
use robo_mv::solver::{self, io::write_tables};
use robo_mv::Error;

use crate::{Command, Common, SweepVar};

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Solve { common, out } => cmd_solve(&common, &out),
        Command::Simulate { common, out, delta, dump_paths, bins } => {
            cmd_simulate(&common, &out, delta, dump_paths, bins)
        }
        Command::Personalize { common, out, phi_range, s_paths } => {
            cmd_personalize(&common, &out, &phi_range, s_paths)
        }
        Command::Sharpe { common, out, delta, sweep, from, to, steps } => {
            cmd_sharpe(&common, out.as_deref(), delta, sweep, from, to, steps)
        }
        Command::ImpliedGamma { common, out, delta } => cmd_implied_gamma(&common, out.as_deref(), delta),
        Command::Stationary { common } => cmd_stationary(&common),
    }
}

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    Error::InvalidParameter(msg.into()).into()
}

/// Read the config and apply flag overrides.
fn load(common: &Common, delta: Option<f64>) -> Result<RunConfig> {
    let mut cfg = RunConfig::from_path(&common.config)
        .with_context(|| format!("cannot read {}", common.config.display()))??;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(paths) = common.paths {
        cfg.paths = paths;
    }
    if let Some(q) = common.quad_points {
        cfg.grid.quad_points = q;
        cfg.grid.shock_quad_points = q;
    }
    if let Some(d) = delta {
        match cfg.strategy.as_mut() {
            Some(s) => s.delta = d,
            None => return Err(invalid("--delta needs a `strategy` in the config")),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn common_args(common: &Common) -> serde_json::Value {
    json!({
        "config": common.config,
        "seed": common.seed,
        "paths": common.paths,
        "quad_points": common.quad_points,
    })
}

fn write_lines(path: &Path, header: &str, rows: &[String]) -> Result<()> {
    let mut w = std::io::BufWriter::new(
        fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    );
    writeln!(w, "{header}")?;
    for r in rows {
        writeln!(w, "{r}")?;
    }
    w.flush()?;
    Ok(())
}

fn write_manifest(out: &Path, command: &str, args: serde_json::Value, cfg: &RunConfig, outputs: Vec<String>) -> Result<()> {
    let m = Manifest::new(command, args, cfg, outputs);
    let path = out.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&m)?).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn create_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))
}

fn cmd_solve(common: &Common, out: &Path) -> Result<()> {
    let cfg = load(common, None)?;
    let profile = cfg.profile()?;
    let tables = solver::solve(&cfg.market(), &profile, cfg.horizon, &cfg.solve_options())?;
    create_dir(out)?;
    write_tables(&tables, out, &cfg.params_hash()).with_context(|| format!("cannot write tables to {}", out.display()))?;
    let mut outputs: Vec<String> = tables.slices.iter().map(|s| solver::io::slice_file_name(s.n)).collect();
    outputs.push("tables_manifest.json".into());
    write_manifest(out, "solve", common_args(common), &cfg, outputs)?;
    let s0 = tables.initial_state(cfg.y0());
    println!(
        "slices {}, pi_0 {}, a_0 {}, b_0 {}, clamped mass fraction {:.3e}",
        tables.slices.len(),
        fmt12(tables.allocation_at(0, &s0)),
        fmt12(tables.a_at(0, &s0)),
        fmt12(tables.b_at(0, &s0)),
        tables.clamp.fraction()
    );
    Ok(())
}

fn cmd_simulate(common: &Common, out: &Path, delta: Option<f64>, dump_paths: bool, bins: usize) -> Result<()> {
    let cfg = load(common, delta)?;
    let market = cfg.market();
    let sim = SimConfig {
        horizon: cfg.horizon,
        n_paths: cfg.paths,
        seed: cfg.seed,
        initial_regime: cfg.y0(),
        initial_wealth: cfg.initial_wealth,
        bounds: cfg.bounds,
        liquidation: cfg.liquidation,
    };
    let tables;
    let strategy = match cfg.strategy {
        Some(s) => Strategy::Cycle(s),
        None => {
            tables = solver::solve(&market, &cfg.profile()?, cfg.horizon, &cfg.solve_options())?;
            Strategy::Policy(&tables)
        }
    };
    let res = simulate(&market, strategy, &sim)?;
    let total = stats(&res.returns)?;
    let (ann, dropped) = annualized(&res.returns, cfg.horizon, market.steps_per_year);
    let ann_stats = stats(&ann)?;
    let summary = json!({
        "total_return": total,
        "annualized": ann_stats,
        "annualized_dropped": dropped,
        "occupation": res.occupation,
        "clamped_fraction": res.clamped_steps as f64 / (cfg.paths * cfg.horizon) as f64,
    });
    create_dir(out)?;
    fs::write(out.join("stats.json"), serde_json::to_string_pretty(&summary)?)?;
    let hist: Vec<String> = histogram(&res.returns, bins)
        .into_iter()
        .map(|(l, r, c)| format!("{},{},{c}", fmt12(l), fmt12(r)))
        .collect();
    write_lines(&out.join("histogram.csv"), "bin_left,bin_right,count", &hist)?;
    let mut outputs = vec!["stats.json".to_string(), "histogram.csv".to_string()];
    if dump_paths {
        let rows: Vec<String> = (0..res.returns.len())
            .map(|i| format!("{i},{},{}", fmt12(res.terminal_wealth[i]), fmt12(res.returns[i])))
            .collect();
        write_lines(&out.join("paths.csv"), "path,terminal_wealth,total_return", &rows)?;
        outputs.push("paths.csv".into());
    }
    let mut args = common_args(common);
    args["delta"] = json!(delta);
    args["dump_paths"] = json!(dump_paths);
    args["bins"] = json!(bins);
    write_manifest(out, "simulate", args, &cfg, outputs)?;
    println!(
        "mean {:.6} sd {:.6} skewness {:.4} kurtosis {:.4} annualized mean {:.6}",
        total.mean, total.sd, total.skewness, total.kurtosis, ann_stats.mean
    );
    Ok(())
}

pub fn parse_range(s: &str) -> Result<(usize, usize)> {
    let bad = || invalid(format!("--phi-range expects `a:b` with 1 <= a <= b, got `{s}`"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = b.trim().parse().map_err(|_| bad())?;
    if a == 0 || a > b {
        return Err(bad());
    }
    Ok((a, b))
}

fn cmd_personalize(common: &Common, out: &Path, phi_range: &str, s_paths: Option<usize>) -> Result<()> {
    let cfg = load(common, None)?;
    let (lo, hi) = parse_range(phi_range)?;
    let market = cfg.market();
    let profile = cfg.profile()?;
    let y0 = cfg.y0();
    let sigma0 = market.step(y0).sigma;
    let s_paths = s_paths.unwrap_or(cfg.paths);
    let opts = cfg.solve_options();
    let mut rows = Vec::new();
    for phi in lo..=hi {
        let r = r_measure(phi, profile.beta, &market, &profile, cfg.horizon, cfg.paths, cfg.seed, y0, RMode::Full)?;
        let rt = r_tilde(phi as f64, profile.beta, sigma0, profile.p_eps, profile.sigma_eps);
        let s_cols = if s_paths > 0 {
            let s = s_measure(phi, profile.beta, &market, &profile, cfg.horizon, &opts, s_paths, cfg.seed, y0)?;
            format!("{},{}", fmt12(s.estimate), fmt12(s.se))
        } else {
            ",".to_string()
        };
        eprintln!("phi {phi}: R {:.6}", r.estimate);
        rows.push(format!("{phi},{},{},{},{s_cols}", fmt12(r.estimate), fmt12(r.se), fmt12(rt)));
    }
    create_dir(out)?;
    write_lines(&out.join("personalize.csv"), "phi,R,R_se,R_tilde,S,S_se", &rows)?;
    let mut args = common_args(common);
    args["phi_range"] = json!(phi_range);
    args["s_paths"] = json!(s_paths);
    write_manifest(out, "personalize", args, &cfg, vec!["personalize.csv".into()])?;
    Ok(())
}

fn emit(out: Option<&Path>, file: &str, header: &str, rows: &[String]) -> Result<bool> {
    match out {
        Some(dir) => {
            create_dir(dir)?;
            write_lines(&dir.join(file), header, rows)?;
            Ok(true)
        }
        None => {
            let mut o = std::io::stdout().lock();
            writeln!(o, "{header}")?;
            for r in rows {
                writeln!(o, "{r}")?;
            }
            Ok(false)
        }
    }
}

fn cmd_sharpe(
    common: &Common,
    out: Option<&Path>,
    delta: Option<f64>,
    sweep: SweepVar,
    from: f64,
    to: f64,
    steps: usize,
) -> Result<()> {
    if steps == 0 {
        return Err(invalid("--steps must be at least 1"));
    }
    let cfg = load(common, None)?;
    let market = cfg.market();
    let base = SharpeInputs::from_market(&market)?;
    let delta0 = delta.or(cfg.strategy.map(|s| s.delta)).unwrap_or(0.0);
    let rows: Vec<String> = (0..steps)
        .map(|i| {
            let v = if steps == 1 { from } else { from + (to - from) * i as f64 / (steps - 1) as f64 };
            let mut inp = base;
            let mut d = delta0;
            match sweep {
                SweepVar::Delta => d = v,
                SweepVar::Lambda => inp.lambda = v,
                SweepVar::A => inp.a = v,
                SweepVar::B => inp.b = v,
            }
            // Points where the ratio is undefined are reported as NaN.
            let s = sharpe_delta(d, &inp).map_or(f64::NAN, |s| annualize_sharpe(s, market.steps_per_year));
            format!("{},{},{}", sweep.name(), fmt12(v), fmt12(s))
        })
        .collect();
    if emit(out, "sharpe.csv", "sweep_var,value,sharpe_annualized", &rows)? {
        let mut args = common_args(common);
        args["delta"] = json!(delta);
        args["sweep"] = json!(sweep.name());
        args["from"] = json!(from);
        args["to"] = json!(to);
        args["steps"] = json!(steps);
        write_manifest(out.unwrap(), "sharpe", args, &cfg, vec!["sharpe.csv".into()])?;
    }
    Ok(())
}

fn cmd_implied_gamma(common: &Common, out: Option<&Path>, delta: Option<f64>) -> Result<()> {
    let cfg = load(common, delta)?;
    let strategy = cfg.strategy()?;
    let table = implied_gamma(&strategy, &cfg.market(), cfg.horizon)?;
    let header = std::iter::once("n".to_string())
        .chain((1..=cfg.states).map(|y| format!("gamma_{y}")))
        .collect::<Vec<_>>()
        .join(",");
    let rows: Vec<String> = table
        .iter()
        .enumerate()
        .map(|(n, row)| {
            let cols: Vec<String> = row.iter().map(|&g| fmt12(g)).collect();
            format!("{n},{}", cols.join(","))
        })
        .collect();
    if emit(out, "implied_gamma.csv", &header, &rows)? {
        let mut args = common_args(common);
        args["delta"] = json!(delta);
        write_manifest(out.unwrap(), "implied-gamma", args, &cfg, vec!["implied_gamma.csv".into()])?;
    }
    Ok(())
}

fn cmd_stationary(common: &Common) -> Result<()> {
    let cfg = load(common, None)?;
    let lam = cfg.market().stationary_distribution()?;
    let parts: Vec<String> = lam.iter().map(|l| format!("{l:.6}")).collect();
    println!("{}", parts.join(", "));
    Ok(())
}
