//! Client risk-aversion process, behavioural bias, and the advisor's model of it.
//!
//! The client's actual risk aversion is
//! `γ^C_n = e^{η_n} · γ^{id}_n · γ̄_n(Y_n)` with `γ^{id}_n = γ₀ Π e^{ε_i}`.
//! At interaction times `τ = kφ` the client communicates `ξ = γ^C_τ · γ^Z_τ`,
//! where `γ^Z_τ = exp(−β/φ · Σ (Z − μ))` over the window of the `φ` steps before
//! `τ`. Between interactions the advisor uses
//! `γ_n = e^{η_n − η_τ} ξ γ̄_n(Y_n) / γ̄_τ(Y_τ)`.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::MarketParams;
use crate::rng::Rng;

/// State-dependent risk-aversion factor `γ̄_n(y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GammaBar {
    Constant(f64),
    PerState(Vec<f64>),
    /// One row per time `n = 0..=T`, one column per regime.
    Table(Vec<Vec<f64>>),
}

impl Default for GammaBar {
    fn default() -> Self {
        GammaBar::Constant(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskProfileParams {
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub p_eps: f64,
    #[serde(default)]
    pub sigma_eps: f64,
    #[serde(default)]
    pub beta: f64,
    #[serde(default = "one_usize")]
    pub phi: usize,
    #[serde(default)]
    pub gamma_bar: GammaBar,
    pub gamma0: f64,
    /// Optional explicit `η_n`, `n = 0..=T`; overrides `alpha` when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<Vec<f64>>,
}

fn one_usize() -> usize {
    1
}

impl RiskProfileParams {
    /// Constant risk aversion with no shocks, no bias, and interaction every step.
    pub fn constant(gamma0: f64) -> Self {
        RiskProfileParams {
            alpha: 0.0,
            p_eps: 0.0,
            sigma_eps: 0.0,
            beta: 0.0,
            phi: 1,
            gamma_bar: GammaBar::Constant(1.0),
            gamma0,
            eta: None,
        }
    }

    pub fn validate(&self, horizon: usize, num_states: usize) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return bad("alpha must be a finite non-negative number");
        }
        if !(0.0..=1.0).contains(&self.p_eps) {
            return bad("p_eps must lie in [0, 1]");
        }
        if !(self.sigma_eps >= 0.0) || !self.sigma_eps.is_finite() {
            return bad("sigma_eps must be a finite non-negative number");
        }
        if self.p_eps > 0.0 && self.sigma_eps == 0.0 {
            return bad("sigma_eps must be positive when p_eps > 0");
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return bad("beta must be a finite non-negative number");
        }
        if self.phi == 0 {
            return bad("phi must be at least 1");
        }
        if !(self.gamma0 > 0.0) || !self.gamma0.is_finite() {
            return bad("gamma0 must be positive");
        }
        match &self.gamma_bar {
            GammaBar::Constant(g) => {
                if !(*g > 0.0) {
                    return bad("gamma_bar must be positive");
                }
            }
            GammaBar::PerState(v) => {
                if v.len() != num_states {
                    return Err(Error::BadDimension(format!(
                        "gamma_bar has {} entries, expected {num_states}",
                        v.len()
                    )));
                }
                if v.iter().any(|g| !(*g > 0.0) || !g.is_finite()) {
                    return bad("gamma_bar must be positive");
                }
            }
            GammaBar::Table(rows) => {
                if rows.len() != horizon + 1 {
                    return Err(Error::BadDimension(format!(
                        "gamma_bar table has {} rows, expected T+1 = {}",
                        rows.len(),
                        horizon + 1
                    )));
                }
                for row in rows {
                    if row.len() != num_states {
                        return Err(Error::BadDimension(format!(
                            "gamma_bar row has {} entries, expected {num_states}",
                            row.len()
                        )));
                    }
                    if row.iter().any(|g| !(*g > 0.0) || !g.is_finite()) {
                        return bad("gamma_bar must be positive");
                    }
                }
            }
        }
        if let Some(eta) = &self.eta {
            if eta.len() != horizon + 1 {
                return Err(Error::BadDimension(format!(
                    "eta has {} entries, expected T+1 = {}",
                    eta.len(),
                    horizon + 1
                )));
            }
            if eta.iter().any(|e| !e.is_finite()) {
                return bad("eta must be finite");
            }
        }
        Ok(())
    }

    /// `η_n`, by default `−α(T − n)`.
    pub fn eta(&self, n: usize, horizon: usize) -> f64 {
        match &self.eta {
            Some(table) => table[n],
            None => -self.alpha * (horizon as f64 - n as f64),
        }
    }

    pub fn gamma_bar(&self, n: usize, y: usize) -> f64 {
        match &self.gamma_bar {
            GammaBar::Constant(g) => *g,
            GammaBar::PerState(v) => v[y],
            GammaBar::Table(rows) => rows[n][y],
        }
    }

    pub fn is_interaction(&self, n: usize) -> bool {
        n.is_multiple_of(self.phi)
    }

    /// Last interaction time at or before `n`.
    pub fn last_interaction(&self, n: usize) -> usize {
        n - n % self.phi
    }

    /// Draw one idiosyncratic shock. One uniform decides the jump; the normal is
    /// drawn only when a jump occurs.
    pub fn sample_eps(&self, rng: &mut Rng) -> f64 {
        let u: f64 = rng.random();
        if u < self.p_eps {
            let w: f64 = rng.sample(StandardNormal);
            self.sigma_eps * w - 0.5 * self.sigma_eps * self.sigma_eps
        } else {
            0.0
        }
    }
}

/// `γ^Z = exp(−β · mean(window))` over a window of exactly `phi` excess returns.
pub fn bias_factor(window: &[f64], beta: f64, phi: usize) -> Result<f64> {
    if window.len() != phi {
        return Err(Error::WindowLengthMismatch { expected: phi, got: window.len() });
    }
    let sum: f64 = window.iter().sum();
    Ok((-beta * sum / phi as f64).exp())
}

/// Communicated risk aversion `ξ = γ^C_τ γ^Z_τ` at interaction time `n`.
pub fn communicated_xi(n: usize, phi: usize, gamma_c: f64, gamma_z: f64) -> Result<f64> {
    if phi == 0 || !n.is_multiple_of(phi) {
        return Err(Error::NotInteractionTime { n, phi });
    }
    Ok(gamma_c * gamma_z)
}

/// The advisor's risk aversion at `n` given the value `xi` communicated at `tau`.
pub fn robo_gamma(
    n: usize,
    xi: f64,
    tau: usize,
    y_n: usize,
    y_tau: usize,
    params: &RiskProfileParams,
    horizon: usize,
) -> f64 {
    (params.eta(n, horizon) - params.eta(tau, horizon)).exp() * xi * params.gamma_bar(n, y_n)
        / params.gamma_bar(tau, y_tau)
}

/// A simulated market path: regimes `Y_0..=Y_T` and returns `Z_1..=Z_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketPath {
    pub regimes: Vec<usize>,
    /// `returns[n]` is the return over `(n, n+1]`.
    pub returns: Vec<f64>,
    /// `excess_over_mean[n] = Z_{n+1} − μ(Y_n)`, the input to the bias factor.
    pub excess_over_mean: Vec<f64>,
}

impl MarketPath {
    pub fn horizon(&self) -> usize {
        self.returns.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientTrajectory {
    pub gamma_id: Vec<f64>,
    pub gamma_c: Vec<f64>,
    /// Bias factor of the most recent interaction.
    pub gamma_z: Vec<f64>,
    pub xi: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl ClientTrajectory {
    /// `γ^{id}_τ γ^Z_τ` at the last interaction: the communicated value with the
    /// deterministic time and regime factors divided out.
    pub fn normalized_xi(&self, n: usize, params: &RiskProfileParams) -> f64 {
        let tau = params.last_interaction(n);
        self.gamma_id[tau] * self.gamma_z[tau]
    }
}

/// Simulate a market path together with the idiosyncratic shocks. Per step the
/// market draw precedes the shock draw.
pub fn simulate_joint(
    market: &MarketParams,
    params: &RiskProfileParams,
    horizon: usize,
    y0: usize,
    rng: &mut Rng,
) -> (MarketPath, Vec<f64>) {
    let mut regimes = Vec::with_capacity(horizon + 1);
    let mut returns = Vec::with_capacity(horizon);
    let mut excess = Vec::with_capacity(horizon);
    let mut eps = Vec::with_capacity(horizon + 1);
    eps.push(0.0);
    let mut y = y0;
    regimes.push(y);
    for _ in 0..horizon {
        let (y_next, z) = market.sample_step(y, rng);
        returns.push(z);
        excess.push(z - market.step(y).mu);
        eps.push(params.sample_eps(rng));
        y = y_next;
        regimes.push(y);
    }
    (MarketPath { regimes, returns, excess_over_mean: excess }, eps)
}

/// Build the client and advisor risk-aversion paths along a market path, with
/// `eps[n]` the shock applied at step `n` (`eps[0]` is ignored).
pub fn client_trajectory(path: &MarketPath, eps: &[f64], params: &RiskProfileParams) -> ClientTrajectory {
    let horizon = path.horizon();
    let mut gamma_id = Vec::with_capacity(horizon + 1);
    let mut gamma_c = Vec::with_capacity(horizon + 1);
    let mut gamma_z = Vec::with_capacity(horizon + 1);
    let mut xi = Vec::with_capacity(horizon + 1);
    let mut gamma = Vec::with_capacity(horizon + 1);
    let mut gid = params.gamma0;
    let mut gz = 1.0;
    let mut xi_cur = 0.0;
    let mut tau = 0;
    for n in 0..=horizon {
        if n > 0 {
            gid *= eps[n].exp();
        }
        let y = path.regimes[n];
        let gc = params.eta(n, horizon).exp() * gid * params.gamma_bar(n, y);
        if params.is_interaction(n) {
            gz = if n == 0 {
                1.0
            } else {
                let sum: f64 = path.excess_over_mean[n - params.phi..n].iter().sum();
                (-params.beta * sum / params.phi as f64).exp()
            };
            xi_cur = gc * gz;
            tau = n;
        }
        gamma_id.push(gid);
        gamma_c.push(gc);
        gamma_z.push(gz);
        xi.push(xi_cur);
        gamma.push(robo_gamma(n, xi_cur, tau, y, path.regimes[tau], params, horizon));
    }
    ClientTrajectory { gamma_id, gamma_c, gamma_z, xi, gamma }
}

/// Convenience wrapper: draw a path and build the trajectory.
pub fn client_gamma(
    market: &MarketParams,
    params: &RiskProfileParams,
    horizon: usize,
    y0: usize,
    rng: &mut Rng,
) -> (MarketPath, ClientTrajectory) {
    let (path, eps) = simulate_joint(market, params, horizon, y0, rng);
    let traj = client_trajectory(&path, &eps, params);
    (path, traj)
}
