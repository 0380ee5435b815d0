//! Seeded wealth-path simulation and distribution statistics.
//!
//! Path `i` draws from its own ChaCha stream derived from the master seed, and
//! per-path results are collected in index order, so output does not depend on
//! the number of threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::MarketParams;
use crate::numeric::{mean_and_se, pairwise_sum};
use crate::rng;
use crate::solver::{constrain, liquidation_overlay, PolicyTables};

/// Allocation `π̄` in the first regime and `π̄(1+δ)` in every other regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CycleStrategy {
    pub pi_bar: f64,
    #[serde(default)]
    pub delta: f64,
}

impl CycleStrategy {
    pub fn validate(&self) -> Result<()> {
        if !(self.pi_bar > 0.0) || !self.pi_bar.is_finite() {
            return Err(Error::InvalidParameter("pi_bar must be positive".into()));
        }
        if !(self.delta > -1.0) || !self.delta.is_finite() {
            return Err(Error::InvalidParameter("delta must exceed -1".into()));
        }
        Ok(())
    }

    pub fn allocation(&self, y: usize) -> f64 {
        if y == 0 {
            self.pi_bar
        } else {
            self.pi_bar * (1.0 + self.delta)
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Strategy<'a> {
    Cycle(CycleStrategy),
    Policy(&'a PolicyTables),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub horizon: usize,
    pub n_paths: usize,
    pub seed: u64,
    /// Zero-based starting regime.
    pub initial_regime: usize,
    pub initial_wealth: f64,
    pub bounds: Option<(f64, f64)>,
    pub liquidation: bool,
}

impl SimConfig {
    pub fn new(horizon: usize, n_paths: usize, seed: u64) -> Self {
        SimConfig {
            horizon,
            n_paths,
            seed,
            initial_regime: 0,
            initial_wealth: 1.0,
            bounds: None,
            liquidation: false,
        }
    }

    fn validate(&self, market: &MarketParams) -> Result<()> {
        if self.horizon == 0 || self.n_paths == 0 {
            return Err(Error::InvalidParameter("horizon and n_paths must be at least 1".into()));
        }
        if !(self.initial_wealth > 0.0) {
            return Err(Error::InvalidParameter("initial wealth must be positive".into()));
        }
        if self.initial_regime >= market.num_states {
            return Err(Error::InvalidParameter(format!(
                "initial regime {} out of range",
                self.initial_regime + 1
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    /// Total return `(X_T − x₀)/x₀` per path.
    pub returns: Vec<f64>,
    pub terminal_wealth: Vec<f64>,
    /// Fraction of path-steps `n = 0..T−1` spent in each regime.
    pub occupation: Vec<f64>,
    /// Path-steps at which a policy lookup fell outside its grid.
    pub clamped_steps: usize,
}

struct PathResult {
    wealth: f64,
    visits: Vec<u32>,
    clamped: usize,
}

fn simulate_path(market: &MarketParams, strategy: Strategy, cfg: &SimConfig, i: usize) -> PathResult {
    let mut g = rng::stream(cfg.seed, i as u64);
    let mut x = cfg.initial_wealth;
    let mut y = cfg.initial_regime;
    let mut visits = vec![0u32; market.num_states];
    let mut clamped = 0;
    let mut state = match strategy {
        Strategy::Policy(t) => Some(t.initial_state(y)),
        Strategy::Cycle(_) => None,
    };
    let mut shock_sum = 0.0;
    for n in 0..cfg.horizon {
        visits[y] += 1;
        let step = market.step(y);
        let mut pi = match strategy {
            Strategy::Cycle(c) => c.allocation(y),
            Strategy::Policy(t) => {
                let s = state.as_ref().unwrap();
                if t.is_clamped(n, s) {
                    clamped += 1;
                }
                t.allocation_at(n, s)
            }
        };
        if let Some((lo, hi)) = cfg.bounds {
            pi = constrain(pi, lo, hi);
        }
        let dollars = if cfg.liquidation { liquidation_overlay(x, pi) } else { pi * x };
        let (y_next, z) = market.sample_step(y, &mut g);
        x = step.gross_rf * x + (z - step.r) * dollars;
        if let Strategy::Policy(t) = strategy {
            shock_sum += t.profile.sample_eps(&mut g);
            let s = state.unwrap().advance(n + 1, z - step.mu, y_next, shock_sum, &t.profile);
            if t.profile.is_interaction(n + 1) {
                shock_sum = 0.0;
            }
            state = Some(s);
        }
        y = y_next;
    }
    PathResult { wealth: x, visits, clamped }
}

pub fn simulate(market: &MarketParams, strategy: Strategy, cfg: &SimConfig) -> Result<SimOutput> {
    market.validate()?;
    cfg.validate(market)?;
    match strategy {
        Strategy::Cycle(c) => c.validate()?,
        Strategy::Policy(t) => {
            if t.horizon < cfg.horizon {
                return Err(Error::InvalidParameter("policy horizon shorter than simulation".into()));
            }
        }
    }
    let paths: Vec<PathResult> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| simulate_path(market, strategy, cfg, i))
        .collect();
    let mut counts = vec![0u64; market.num_states];
    let mut clamped_steps = 0;
    for p in &paths {
        for (c, v) in counts.iter_mut().zip(&p.visits) {
            *c += *v as u64;
        }
        clamped_steps += p.clamped;
    }
    let total = (cfg.n_paths * cfg.horizon) as f64;
    Ok(SimOutput {
        returns: paths.iter().map(|p| (p.wealth - cfg.initial_wealth) / cfg.initial_wealth).collect(),
        terminal_wealth: paths.iter().map(|p| p.wealth).collect(),
        occupation: counts.iter().map(|&c| c as f64 / total).collect(),
        clamped_steps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatsSummary {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub skewness: f64,
    pub kurtosis: f64,
    pub var90: f64,
    pub var95: f64,
    pub var99: f64,
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Mean, unbiased SD, standardized third moment, raw kurtosis and VaR levels.
/// Skewness and kurtosis are NaN for a sample without dispersion.
pub fn stats(returns: &[f64]) -> Result<StatsSummary> {
    let n = returns.len();
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    let nf = n as f64;
    let mut sorted = returns.to_vec();
    sorted.sort_by(f64::total_cmp);
    // A constant sample would otherwise pick up rounding noise from the mean.
    let mean = if sorted[0] == sorted[n - 1] { sorted[0] } else { pairwise_sum(returns) / nf };
    let d2: Vec<f64> = returns.iter().map(|x| (x - mean).powi(2)).collect();
    let d3: Vec<f64> = returns.iter().map(|x| (x - mean).powi(3)).collect();
    let d4: Vec<f64> = returns.iter().map(|x| (x - mean).powi(4)).collect();
    let s2 = pairwise_sum(&d2);
    let m2 = s2 / nf;
    let m3 = pairwise_sum(&d3) / nf;
    let m4 = pairwise_sum(&d4) / nf;
    let (skewness, kurtosis) = if m2 > 0.0 { (m3 / m2.powf(1.5), m4 / (m2 * m2)) } else { (f64::NAN, f64::NAN) };
    Ok(StatsSummary {
        n,
        mean,
        sd: (s2 / (nf - 1.0)).sqrt(),
        skewness,
        kurtosis,
        var90: -quantile_sorted(&sorted, 0.10),
        var95: -quantile_sorted(&sorted, 0.05),
        var99: -quantile_sorted(&sorted, 0.01),
    })
}

/// Per-path annualized rates `(1+r)^{k/T} − 1`. Paths with `r ≤ −1` are
/// dropped; the second value counts them.
pub fn annualized(returns: &[f64], horizon: usize, steps_per_year: u32) -> (Vec<f64>, usize) {
    let e = steps_per_year as f64 / horizon as f64;
    let mut out = Vec::with_capacity(returns.len());
    let mut dropped = 0;
    for &r in returns {
        if r > -1.0 {
            out.push((1.0 + r).powf(e) - 1.0);
        } else {
            dropped += 1;
        }
    }
    (out, dropped)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharpeEstimate {
    pub estimate: f64,
    /// Batch-means standard error.
    pub se: f64,
}

/// Mean over SD of per-step excess portfolio returns `π(Y_n) Z̃_{n+1}` along
/// one long path. The standard error comes from 100 non-overlapping batches.
pub fn long_run_sharpe(
    strategy: CycleStrategy,
    market: &MarketParams,
    total_steps: usize,
    seed: u64,
    initial_regime: usize,
) -> Result<SharpeEstimate> {
    market.validate()?;
    strategy.validate()?;
    if total_steps < 10_000 {
        return Err(Error::InsufficientSamples { needed: 10_000, got: total_steps });
    }
    let mut g = rng::master(seed);
    let mut y = initial_regime;
    let mut ex = Vec::with_capacity(total_steps);
    for _ in 0..total_steps {
        let step = market.step(y);
        let (y_next, z) = market.sample_step(y, &mut g);
        ex.push(strategy.allocation(y) * (z - step.r));
        y = y_next;
    }
    let ratio = |xs: &[f64]| {
        let (m, se) = mean_and_se(xs);
        m / (se * (xs.len() as f64).sqrt())
    };
    let estimate = ratio(&ex);
    let batches = 100;
    let size = total_steps / batches;
    let per: Vec<f64> = (0..batches).map(|b| ratio(&ex[b * size..(b + 1) * size])).collect();
    let (_, se) = mean_and_se(&per);
    Ok(SharpeEstimate { estimate, se })
}

/// Equal-width histogram over `[min, max]` of the data: `(left, right, count)`.
pub fn histogram(values: &[f64], bins: usize) -> Vec<(f64, f64, usize)> {
    if values.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for &v in values {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    (0..bins)
        .map(|k| (lo + width * k as f64, lo + width * (k + 1) as f64, counts[k]))
        .collect()
}
