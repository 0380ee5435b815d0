//! Brute-force equilibrium for tiny single-regime instances, used as a test oracle.
//!
//! With one regime and constant risk aversion the terminal gross return is a
//! product of independent factors `R + Z̃_k π_k`, so its mean and variance
//! follow exactly from Gaussian moments. Each player `n` maximizes
//! `E[G] − 1 − (γ/2) Var[G]` over a grid of `π_n` with later controls fixed.

use crate::error::{Error, Result};
use crate::market::{MarketParams, StepParams};

/// `J_n` when `π_n = pi_n` and the later allocations are `future`.
pub fn oracle_objective(pi_n: f64, future: &[f64], step: &StepParams, gamma: f64) -> f64 {
    let mut m1 = 1.0;
    let mut m2 = 1.0;
    for &pi in std::iter::once(&pi_n).chain(future) {
        let g = step.gross_rf + step.mu_tilde * pi;
        m1 *= g;
        m2 *= g * g + step.sigma * step.sigma * pi * pi;
    }
    m1 - 1.0 - 0.5 * gamma * (m2 - m1 * m1)
}

/// Allocations `π_0, …, π_{T−1}` found by grid search with successive zooming.
/// `resolution` is the number of candidate points per pass.
pub fn brute_force_equilibrium(
    market: &MarketParams,
    gamma: f64,
    horizon: usize,
    resolution: usize,
) -> Result<Vec<f64>> {
    market.validate()?;
    if market.num_states != 1 {
        return Err(Error::InvalidParameter("the oracle handles a single regime only".into()));
    }
    if horizon == 0 || horizon > 3 {
        return Err(Error::InvalidParameter("the oracle handles horizons 1 to 3".into()));
    }
    if resolution < 5 {
        return Err(Error::InvalidParameter("resolution must be at least 5".into()));
    }
    let step = market.step(0);
    let markowitz = step.mu_tilde / (gamma * step.sigma * step.sigma);
    let mut pis = vec![0.0; horizon];
    pis[horizon - 1] = markowitz;
    for n in (0..horizon - 1).rev() {
        let future = pis[n + 1..].to_vec();
        let half = 10.0f64.max(4.0 * markowitz.abs());
        let (mut lo, mut hi) = (markowitz - half, markowitz + half);
        let mut best = markowitz;
        for _ in 0..60 {
            let h = (hi - lo) / (resolution - 1) as f64;
            let mut best_j = f64::NEG_INFINITY;
            for i in 0..resolution {
                let x = lo + h * i as f64;
                let j = oracle_objective(x, &future, &step, gamma);
                if j > best_j {
                    best_j = j;
                    best = x;
                }
            }
            lo = best - 2.0 * h;
            hi = best + 2.0 * h;
            if h < 1e-13 {
                break;
            }
        }
        pis[n] = best;
    }
    Ok(pis)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horizon_one_is_markowitz() {
        let m = MarketParams::single(0.0, 0.10, 0.20, 12);
        let p = brute_force_equilibrium(&m, 3.5, 1, 101).unwrap();
        let s = m.step(0);
        assert_eq!(p[0], s.mu_tilde / (3.5 * s.sigma * s.sigma));
    }

    #[test]
    fn no_improvement_at_oracle_policy() {
        let m = MarketParams::single(0.01, 0.10, 0.20, 12);
        let p = brute_force_equilibrium(&m, 3.5, 3, 201).unwrap();
        let s = m.step(0);
        for n in 0..3 {
            let j0 = oracle_objective(p[n], &p[n + 1..], &s, 3.5);
            for d in [-1e-2, -1e-4, 1e-4, 1e-2] {
                assert!(oracle_objective(p[n] + d, &p[n + 1..], &s, 3.5) <= j0);
            }
        }
    }
}
