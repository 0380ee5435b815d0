//! Sharpe-ratio analytics for regime-cycle strategies and the implied risk aversion.
//!
//! A cycle strategy holds `π̄` in regime 1 and `π̄(1+δ)` in regime 2. Its
//! long-run Sharpe ratio depends on the market only through
//! `λ` (stationary weight of regime 2), `a = μ̃(2)/μ̃(1)`, `b = σ(2)/σ(1)` and
//! `u = (σ(1)/μ̃(1))²`, all per step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::MarketParams;
use crate::montecarlo::CycleStrategy;
use crate::numeric::bisect;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharpeInputs {
    pub lambda: f64,
    pub a: f64,
    pub b: f64,
    pub u: f64,
}

impl SharpeInputs {
    /// Inputs of a two-regime market at its per-step scale.
    pub fn from_market(market: &MarketParams) -> Result<Self> {
        if market.num_states != 2 {
            return Err(Error::BadDimension("Sharpe inputs need exactly two regimes".into()));
        }
        let lam = market.stationary_distribution()?;
        let s1 = market.step(0);
        let s2 = market.step(1);
        Ok(SharpeInputs {
            lambda: lam[1],
            a: s2.mu_tilde / s1.mu_tilde,
            b: s2.sigma / s1.sigma,
            u: (s1.sigma / s1.mu_tilde).powi(2),
        })
    }

    /// A two-regime market with these inputs: regime 1 has `μ̃ = 1/√u`, `σ = 1`,
    /// per step, zero rates, `k = 1`, and a chain with stationary weight `λ`.
    pub fn to_market(&self) -> MarketParams {
        let m1 = 1.0 / self.u.sqrt();
        let lam = self.lambda.clamp(0.0, 1.0);
        // Switching rates chosen so that λ P = λ with p12 + p21 = 0.2.
        let p12 = 0.2 * lam;
        let p21 = 0.2 * (1.0 - lam);
        MarketParams {
            num_states: 2,
            transition: vec![vec![1.0 - p12, p12], vec![p21, 1.0 - p21]],
            risk_free: vec![0.0, 0.0],
            mean_return: vec![m1, self.a * m1],
            vol_return: vec![1.0, self.b],
            steps_per_year: 1,
        }
    }
}

/// Long-run Sharpe ratio per step of the state-homogeneous strategy with
/// allocation `allocs[y]` in regime `y`.
pub fn sharpe_general(allocs: &[f64], market: &MarketParams) -> Result<f64> {
    if allocs.len() != market.num_states {
        return Err(Error::BadDimension("one allocation per regime is required".into()));
    }
    let lam = market.stationary_distribution()?;
    sharpe_with_weights(allocs, &lam, market)
}

/// As [`sharpe_general`] with explicit regime weights.
pub fn sharpe_with_weights(allocs: &[f64], lam: &[f64], market: &MarketParams) -> Result<f64> {
    let steps = market.steps();
    let mean: f64 = (0..steps.len()).map(|y| lam[y] * steps[y].mu_tilde * allocs[y]).sum();
    let var: f64 = (0..steps.len())
        .map(|y| {
            let s = &steps[y];
            lam[y] * ((s.sigma * allocs[y]).powi(2) + (s.mu_tilde * allocs[y] - mean).powi(2))
        })
        .sum();
    if !(var > 0.0) {
        return Err(Error::DegenerateDenominator(var));
    }
    Ok(mean / var.sqrt())
}

/// Two-regime closed form in `(λ, a, b, u, δ)`.
pub fn sharpe_delta(delta: f64, inp: &SharpeInputs) -> Result<f64> {
    let SharpeInputs { lambda: l, a, b, u } = *inp;
    let q = 1.0 + delta;
    let d = 1.0 + l * (a * q - 1.0);
    if !(d > 0.0) {
        return Err(Error::DegenerateDenominator(d));
    }
    let num = u * (1.0 - l + l * b * b * q * q) + (1.0 - l + l * a * a * q * q) - d * d;
    if !(num > 0.0) {
        return Err(Error::DegenerateDenominator(num));
    }
    Ok(d / num.sqrt())
}

/// Margin of the δ-monotonicity condition: positive iff the Sharpe ratio
/// increases in `δ` (for `0 < λ < 1`).
pub fn delta_margin(delta: f64, inp: &SharpeInputs) -> f64 {
    let SharpeInputs { a, b, u, .. } = *inp;
    1.0 + u - a * (1.0 + b * b * u / (a * a)) * (1.0 + delta)
}

pub fn monotone_in_delta(delta: f64, inp: &SharpeInputs) -> bool {
    delta_margin(delta, inp) > 0.0
}

/// Derivative-sign predicates together with the margins they were decided on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sensitivities {
    pub increasing_in_a: bool,
    pub a_margin: f64,
    pub decreasing_in_b: bool,
    pub increasing_in_lambda: bool,
    pub lambda_margin: f64,
    pub increasing_in_delta: bool,
    pub delta_margin: f64,
}

pub fn sensitivity_predicates(inp: &SharpeInputs, delta: f64) -> Sensitivities {
    let SharpeInputs { lambda: l, a, b, u } = *inp;
    let q = 1.0 + delta;
    let a_margin = (1.0 + u) / q + l / (1.0 - l) * u * b * b * q - a;
    let c0 = 1.0 + u;
    let c1 = (a * a + u * b * b) * q * q;
    let e = a * q - 1.0;
    let lambda_margin = l * e * (c1 - c0) - ((c1 - c0) - 2.0 * e * c0);
    let dm = delta_margin(delta, inp);
    Sensitivities {
        increasing_in_a: a_margin > 0.0,
        a_margin,
        decreasing_in_b: b > 0.0 && l > 0.0,
        increasing_in_lambda: lambda_margin > 0.0,
        lambda_margin,
        increasing_in_delta: dm > 0.0,
        delta_margin: dm,
    }
}

/// Central second difference of the closed form at `δ = 0`.
pub fn concavity_at_zero(inp: &SharpeInputs, step: f64) -> Result<f64> {
    let s0 = sharpe_delta(0.0, inp)?;
    let sp = sharpe_delta(step, inp)?;
    let sm = sharpe_delta(-step, inp)?;
    Ok((sp - 2.0 * s0 + sm) / (step * step))
}

pub fn annualize_sharpe(s_step: f64, steps_per_year: u32) -> f64 {
    s_step * (steps_per_year as f64).sqrt()
}

/// Risk aversion `γ_n(y)`, `n = 0..T−1`, under which the equilibrium policy is
/// the cycle strategy. Rows are times, columns regimes.
pub fn implied_gamma(strategy: &CycleStrategy, market: &MarketParams, horizon: usize) -> Result<Vec<Vec<f64>>> {
    market.validate()?;
    strategy.validate()?;
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    let m = market.num_states;
    let steps = market.steps();
    let mut a_next = vec![1.0; m];
    let mut b_next = vec![1.0; m];
    let mut table = vec![vec![0.0; m]; horizon];
    for n in (0..horizon).rev() {
        let mut a_cur = vec![0.0; m];
        let mut b_cur = vec![0.0; m];
        for y in 0..m {
            let s = steps[y];
            let pi = strategy.allocation(y);
            let sigma2 = s.sigma * s.sigma;
            let mu_a: f64 = (0..m).map(|j| market.transition[y][j] * a_next[j]).sum();
            let mu_b: f64 = (0..m).map(|j| market.transition[y][j] * b_next[j]).sum();
            let spread = mu_b - mu_a * mu_a;
            let gamma = if n + 1 == horizon || spread <= 0.0 {
                if !(s.mu_tilde > 0.0) {
                    return Err(Error::RootBracketFailure { n, regime: y });
                }
                s.mu_tilde * mu_a / (pi * sigma2 * mu_b.max(f64::MIN_POSITIVE))
            } else {
                let den = mu_b + s.mu_tilde * s.mu_tilde / sigma2 * spread;
                let h = |x: f64| s.mu_tilde / (x * sigma2) * (mu_a - s.gross_rf * x * spread) / den - pi;
                let hi = mu_a / (s.gross_rf * spread);
                let lo = hi * 1e-12;
                bisect(h, lo, hi, 0.0).ok_or(Error::RootBracketFailure { n, regime: y })?
            };
            if !(gamma > 0.0) || !gamma.is_finite() {
                return Err(Error::RootBracketFailure { n, regime: y });
            }
            table[n][y] = gamma;
            let g = s.gross_rf + s.mu_tilde * pi;
            a_cur[y] = g * mu_a;
            b_cur[y] = (g * g + sigma2 * pi * pi) * mu_b;
        }
        a_next = a_cur;
        b_next = b_cur;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn benchmark() -> SharpeInputs {
        SharpeInputs::from_market(&MarketParams::two_regime_example()).unwrap()
    }

    #[test]
    fn inputs_match_hand_values() {
        let i = benchmark();
        assert!((i.lambda - 1.0 / 3.0).abs() < 1e-12);
        assert!((i.a - 0.137 / 0.066).abs() < 1e-12);
        assert!((i.b - 0.173 / 0.155).abs() < 1e-12);
        assert!((i.u - 66.2).abs() < 0.1);
    }

    #[test]
    fn closed_form_matches_general() {
        let i = benchmark();
        let m = MarketParams::two_regime_example();
        for d in [-0.5, 0.0, 0.3, 2.0] {
            let g = sharpe_general(&[0.6, 0.6 * (1.0 + d)], &m).unwrap();
            assert!((g - sharpe_delta(d, &i).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn boundary_values() {
        let mut i = benchmark();
        i.lambda = 0.0;
        assert!((sharpe_delta(0.7, &i).unwrap() - 1.0 / i.u.sqrt()).abs() < 1e-12);
        i.lambda = 1.0;
        assert!((sharpe_delta(0.7, &i).unwrap() - i.a / (i.b * i.u.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn single_regime_sharpe_is_market_sharpe() {
        let m = MarketParams::single(0.01, 0.09, 0.2, 12);
        let s = m.step(0);
        assert!((sharpe_general(&[3.0], &m).unwrap() - s.mu_tilde / s.sigma).abs() < 1e-14);
    }

    #[test]
    fn benchmark_predicates() {
        let i = benchmark();
        assert!(monotone_in_delta(0.0, &i));
        assert!(!monotone_in_delta(1e6, &i));
        let p = sensitivity_predicates(&i, 0.0);
        assert!(p.increasing_in_a && p.decreasing_in_b);
        let mut eq = i;
        eq.b = eq.a;
        eq.lambda = 0.5 / (eq.a + 1.0);
        assert!(!sensitivity_predicates(&eq, 0.0).increasing_in_lambda);
    }

    #[test]
    fn concavity_cases() {
        let i = benchmark();
        assert!(concavity_at_zero(&i, 1e-3).unwrap() < 0.0);
        let mut z = i;
        z.lambda = 0.0;
        assert!(concavity_at_zero(&z, 1e-3).unwrap().abs() < 1e-9);
    }

    #[test]
    fn annualize() {
        assert!((annualize_sharpe(0.1, 12) - 0.34641016151377546).abs() < 1e-15);
        assert_eq!(annualize_sharpe(0.2, 1), 0.2);
        assert_eq!(annualize_sharpe(0.0, 12), 0.0);
    }

    #[test]
    fn implied_gamma_one_step_is_markowitz() {
        let m = MarketParams::two_regime_example();
        let strat = CycleStrategy { pi_bar: 0.6, delta: 0.3 };
        let g = implied_gamma(&strat, &m, 1).unwrap();
        for y in 0..2 {
            let s = m.step(y);
            let expect = s.mu_tilde / (strat.allocation(y) * s.sigma * s.sigma);
            assert!((g[0][y] - expect).abs() < 1e-12 * expect);
        }
    }
}
