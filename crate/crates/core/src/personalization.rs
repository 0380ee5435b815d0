//! Personalization measures and the choice of interaction period.
//!
//! `R` is the mean relative gap between the client's risk aversion and the
//! advisor's model of it; `S` is the mean relative gap between the allocations
//! the two processes induce. `R̃` is the closed-form approximation of `R` in a
//! single regime with per-step volatility `σ₀`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::MarketParams;
use crate::numeric::{bisect, mean_and_se};
use crate::rng;
use crate::risk_profile::{client_trajectory, simulate_joint, RiskProfileParams};
use crate::solver::{solve, ReducedState, SolveOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub se: f64,
}

/// How the market is simulated when estimating `R`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RMode {
    /// Regimes switch according to the transition matrix.
    #[default]
    Full,
    /// The regime is frozen at its initial value.
    SingleRegime,
}

fn frozen(market: &MarketParams) -> MarketParams {
    let m = market.num_states;
    let mut out = market.clone();
    out.transition = (0..m).map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    out
}

fn with_schedule(profile: &RiskProfileParams, phi: usize, beta: f64) -> RiskProfileParams {
    RiskProfileParams { phi, beta, ..profile.clone() }
}

/// Monte Carlo estimate of `R(φ, β)`: the path average over `n = 0..T−1` of
/// `|γ^{id}_n / (γ^{id}_τ γ^Z_τ) − 1|`.
#[allow(clippy::too_many_arguments)]
pub fn r_measure(
    phi: usize,
    beta: f64,
    market: &MarketParams,
    profile: &RiskProfileParams,
    horizon: usize,
    n_paths: usize,
    seed: u64,
    initial_regime: usize,
    mode: RMode,
) -> Result<McEstimate> {
    if n_paths < 100 {
        return Err(Error::InsufficientSamples { needed: 100, got: n_paths });
    }
    let profile = with_schedule(profile, phi, beta);
    market.validate()?;
    profile.validate(horizon, market.num_states)?;
    let market = match mode {
        RMode::Full => market.clone(),
        RMode::SingleRegime => frozen(market),
    };
    let per_path: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut g = rng::stream(seed, i as u64);
            let (path, eps) = simulate_joint(&market, &profile, horizon, initial_regime, &mut g);
            let t = client_trajectory(&path, &eps, &profile);
            let mut acc = 0.0;
            for n in 0..horizon {
                acc += (t.gamma_id[n] / t.normalized_xi(n, &profile) - 1.0).abs();
            }
            acc / horizon as f64
        })
        .collect();
    let (estimate, se) = mean_and_se(&per_path);
    Ok(McEstimate { estimate, se })
}

/// Closed-form approximation `R̃(φ, β)`.
pub fn r_tilde(phi: f64, beta: f64, sigma0: f64, p_eps: f64, sigma_eps: f64) -> f64 {
    let bs = beta * sigma0;
    let half = 0.5 * (phi - 1.0) * p_eps;
    (2.0 / PI).sqrt() * (bs / phi.sqrt() * (1.0 - half) + (bs * bs / phi + sigma_eps * sigma_eps).sqrt() * half)
}

/// Analytic derivative of `R̃` in `φ`.
pub fn r_tilde_slope(phi: f64, beta: f64, sigma0: f64, p_eps: f64, sigma_eps: f64) -> f64 {
    let bs = beta * sigma0;
    let p = p_eps;
    let root = (bs * bs / phi + sigma_eps * sigma_eps).sqrt();
    let d = -0.5 * bs * phi.powf(-1.5) * (1.0 - 0.5 * (phi - 1.0) * p) - 0.5 * bs * p / phi.sqrt();
    let e = if root > 0.0 { -bs * bs / (phi * phi) / (2.0 * root) * 0.5 * (phi - 1.0) * p } else { 0.0 };
    (2.0 / PI).sqrt() * (d + e + 0.5 * p * root)
}

/// The per-window average before the Taylor step that yields `R̃`:
/// `√(2/π)/φ · (βσ₀/√φ Σ_{n<φ}(1−p)^n + √(β²σ₀²/φ + σ_ε²) Σ_{n<φ} n p (1−p)^{n−1})`.
pub fn r_window_exact(phi: usize, beta: f64, sigma0: f64, p_eps: f64, sigma_eps: f64) -> f64 {
    let f = phi as f64;
    let bs = beta * sigma0;
    let root = (bs * bs / f + sigma_eps * sigma_eps).sqrt();
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    for n in 0..phi {
        s0 += (1.0 - p_eps).powi(n as i32);
        if n > 0 {
            s1 += n as f64 * p_eps * (1.0 - p_eps).powi(n as i32 - 1);
        }
    }
    (2.0 / PI).sqrt() / f * (bs / f.sqrt() * s0 + root * s1)
}

/// Sandwich around `R` built from the flanking multiples of `φ`: returns
/// `(T_φ/T · R̃ − err, T^φ/T · R̃ + err)` with
/// `err = |R̃ − R_window| + p_ε²σ_ε² + (βσ₀)²`.
pub fn sandwich_band(phi: usize, horizon: usize, beta: f64, sigma0: f64, p_eps: f64, sigma_eps: f64) -> (f64, f64) {
    let rt = r_tilde(phi as f64, beta, sigma0, p_eps, sigma_eps);
    let exact = r_window_exact(phi, beta, sigma0, p_eps, sigma_eps);
    let err = (rt - exact).abs() + (p_eps * sigma_eps).powi(2) + (beta * sigma0).powi(2);
    let t = horizon as f64;
    let lower_mult = (horizon / phi * phi) as f64;
    let upper_mult = horizon.div_ceil(phi) as f64 * phi as f64;
    (lower_mult / t * rt - err, upper_mult / t * rt + err)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhiStar {
    Finite { phi0: f64, integer: usize },
    Unbounded,
}

/// Minimizer of `R̃` over `φ ∈ [1, φ_max]`.
pub fn phi_star(beta: f64, sigma0: f64, p_eps: f64, sigma_eps: f64, phi_max: f64) -> PhiStar {
    if beta == 0.0 {
        return PhiStar::Finite { phi0: 1.0, integer: 1 };
    }
    if p_eps == 0.0 {
        return PhiStar::Unbounded;
    }
    let slope = |phi: f64| r_tilde_slope(phi, beta, sigma0, p_eps, sigma_eps);
    if slope(1.0) >= 0.0 {
        return PhiStar::Finite { phi0: 1.0, integer: 1 };
    }
    if slope(phi_max) < 0.0 {
        return PhiStar::Unbounded;
    }
    let phi0 = bisect(slope, 1.0, phi_max, 0.0).unwrap_or(1.0);
    let lo = phi0.floor().max(1.0);
    let hi = phi0.ceil().max(1.0);
    let rt = |x: f64| r_tilde(x, beta, sigma0, p_eps, sigma_eps);
    let integer = if rt(hi) < rt(lo) { hi } else { lo } as usize;
    PhiStar::Finite { phi0, integer }
}

/// Whether interacting every step is beaten by a longer period, decided by the
/// sign of `∂R̃/∂φ` at `φ = 1`.
pub fn interact_every_step_suboptimal(beta: f64, sigma0: f64, p_eps: f64, sigma_eps: f64) -> Result<bool> {
    if beta * sigma0 == 0.0 {
        return Err(Error::DivisionByZero("beta * sigma0 is zero".into()));
    }
    Ok(r_tilde_slope(1.0, beta, sigma0, p_eps, sigma_eps) < 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SEstimate {
    pub estimate: f64,
    pub se: f64,
    /// Path-steps skipped because the full-information allocation was below 1e-10.
    pub excluded_steps: usize,
    /// Path-steps at which either policy lookup fell outside its grid.
    pub clamped_steps: usize,
}

/// Monte Carlo estimate of `S(φ, β)` against the full-information policy
/// (interaction every step, no bias) on shared paths.
#[allow(clippy::too_many_arguments)]
pub fn s_measure(
    phi: usize,
    beta: f64,
    market: &MarketParams,
    profile: &RiskProfileParams,
    horizon: usize,
    options: &SolveOptions,
    n_paths: usize,
    seed: u64,
    initial_regime: usize,
) -> Result<SEstimate> {
    if n_paths < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n_paths });
    }
    let robo_profile = with_schedule(profile, phi, beta);
    let full_profile = with_schedule(profile, 1, 0.0);
    let robo = solve(market, &robo_profile, horizon, options)?;
    let full = solve(market, &full_profile, horizon, options)?;
    let per_path: Vec<(f64, usize, usize)> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut g = rng::stream(seed, i as u64);
            let (path, eps) = simulate_joint(market, &robo_profile, horizon, initial_regime, &mut g);
            let mut state = robo.initial_state(initial_regime);
            let mut gamma_id = robo_profile.gamma0;
            let mut shock_sum = 0.0;
            let mut acc = 0.0;
            let mut excluded = 0;
            let mut clamped = 0;
            for n in 0..horizon {
                let y = path.regimes[n];
                let fstate = ReducedState { xi: gamma_id, prev_window_sum: 0.0, cur_window_sum: 0.0, regime: y };
                if robo.is_clamped(n, &state) || full.is_clamped(n, &fstate) {
                    clamped += 1;
                }
                let pr = robo.allocation_at(n, &state);
                let pf = full.allocation_at(n, &fstate);
                if pf.abs() < 1e-10 {
                    excluded += 1;
                } else {
                    acc += ((pr - pf) / pf).abs();
                }
                gamma_id *= eps[n + 1].exp();
                shock_sum += eps[n + 1];
                state = state.advance(n + 1, path.excess_over_mean[n], path.regimes[n + 1], shock_sum, &robo_profile);
                if robo_profile.is_interaction(n + 1) {
                    shock_sum = 0.0;
                }
            }
            (acc / horizon as f64, excluded, clamped)
        })
        .collect();
    let values: Vec<f64> = per_path.iter().map(|v| v.0).collect();
    let (estimate, se) = mean_and_se(&values);
    Ok(SEstimate {
        estimate,
        se,
        excluded_steps: per_path.iter().map(|v| v.1).sum(),
        clamped_steps: per_path.iter().map(|v| v.2).sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn r_tilde_special_cases() {
        let c = (2.0 / PI).sqrt();
        assert_eq!(r_tilde(1.0, 4.0, 0.05, 0.05, 0.64), c * 4.0 * 0.05);
        let v = r_tilde(5.0, 0.0, 0.05, 0.05, 0.64);
        assert!((v - c * 0.64 * 4.0 * 0.05 / 2.0).abs() < 1e-15);
        assert_eq!(r_tilde(1.0, 0.0, 0.05, 0.05, 0.64), 0.0);
    }

    #[test]
    fn slope_matches_finite_difference() {
        for &phi in &[1.0, 2.5, 7.0, 30.0] {
            let h = 1e-6;
            let fd = (r_tilde(phi + h, 3.0, 0.05, 0.05, 0.64) - r_tilde(phi - h, 3.0, 0.05, 0.05, 0.64)) / (2.0 * h);
            assert!((fd - r_tilde_slope(phi, 3.0, 0.05, 0.05, 0.64)).abs() < 1e-8);
        }
    }

    #[test]
    fn phi_star_cases() {
        assert_eq!(phi_star(0.0, 0.05, 0.05, 0.64, 360.0), PhiStar::Finite { phi0: 1.0, integer: 1 });
        assert_eq!(phi_star(4.0, 0.05, 0.0, 0.64, 360.0), PhiStar::Unbounded);
        match phi_star(4.0, 0.2 / 12f64.sqrt(), 0.05, 0.64, 360.0) {
            PhiStar::Finite { phi0, .. } => {
                let f = |x: f64| r_tilde(x, 4.0, 0.2 / 12f64.sqrt(), 0.05, 0.64);
                assert!(phi0 > 1.0);
                assert!(f(phi0 + 0.01) >= f(phi0) - 1e-12 && f(phi0 - 0.01) >= f(phi0) - 1e-12);
            }
            PhiStar::Unbounded => panic!("expected a finite minimizer"),
        }
    }

    #[test]
    fn interaction_condition() {
        assert!(interact_every_step_suboptimal(4.0, 0.05, 0.01, 0.1).unwrap());
        // p σ_ε / (β σ₀) = 2.
        assert!(!interact_every_step_suboptimal(1.0, 0.05, 0.1, 1.0).unwrap());
        assert!(interact_every_step_suboptimal(0.0, 0.05, 0.1, 1.0).is_err());
    }

    #[test]
    fn r_vanishes_without_bias_or_shocks() {
        let m = MarketParams::single(0.0, 0.1, 0.2, 12);
        let mut p = RiskProfileParams::constant(3.5);
        let r = r_measure(3, 0.0, &m, &p, 36, 200, 1, 0, RMode::Full).unwrap();
        assert_eq!((r.estimate, r.se), (0.0, 0.0));
        p.p_eps = 0.05;
        p.sigma_eps = 0.64;
        let r = r_measure(1, 0.0, &m, &p, 36, 200, 1, 0, RMode::Full).unwrap();
        assert_eq!(r.estimate, 0.0);
    }
}
