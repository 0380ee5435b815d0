//! Regime-switching market: parameters, per-step conversion, Markov-chain utilities.
//!
//! Annual inputs are converted to one step by simple scaling: `r/k`, `μ/k`,
//! `σ/√k`, and the gross risk-free return per step is `1 + r/k`.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketParams {
    #[serde(rename = "states")]
    pub num_states: usize,
    pub transition: Vec<Vec<f64>>,
    pub risk_free: Vec<f64>,
    pub mean_return: Vec<f64>,
    pub vol_return: Vec<f64>,
    pub steps_per_year: u32,
}

/// Per-step quantities for one regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepParams {
    pub r: f64,
    pub mu: f64,
    pub sigma: f64,
    /// Gross risk-free return `1 + r`.
    pub gross_rf: f64,
    /// Mean excess return `μ − r`.
    pub mu_tilde: f64,
}

impl MarketParams {
    /// The two-regime market used throughout the examples: a growth state with a
    /// positive short rate and a contraction state with a zero short rate.
    pub fn two_regime_example() -> Self {
        MarketParams {
            num_states: 2,
            transition: vec![vec![0.95, 0.05], vec![0.10, 0.90]],
            risk_free: vec![0.015, 0.0],
            mean_return: vec![0.081, 0.137],
            vol_return: vec![0.155, 0.173],
            steps_per_year: 12,
        }
    }

    /// Single-regime market.
    pub fn single(risk_free: f64, mean_return: f64, vol_return: f64, steps_per_year: u32) -> Self {
        MarketParams {
            num_states: 1,
            transition: vec![vec![1.0]],
            risk_free: vec![risk_free],
            mean_return: vec![mean_return],
            vol_return: vec![vol_return],
            steps_per_year,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.num_states;
        if m == 0 {
            return Err(Error::BadDimension("at least one state is required".into()));
        }
        if self.steps_per_year == 0 {
            return Err(Error::InvalidParameter("steps_per_year must be at least 1".into()));
        }
        if self.transition.len() != m {
            return Err(Error::BadDimension(format!(
                "transition has {} rows, expected {m}",
                self.transition.len()
            )));
        }
        for (name, v) in [
            ("risk_free", &self.risk_free),
            ("mean_return", &self.mean_return),
            ("vol_return", &self.vol_return),
        ] {
            if v.len() != m {
                return Err(Error::BadDimension(format!("{name} has length {}, expected {m}", v.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} contains a non-finite value")));
            }
        }
        for (i, row) in self.transition.iter().enumerate() {
            if row.len() != m {
                return Err(Error::BadDimension(format!(
                    "transition row {i} has length {}, expected {m}",
                    row.len()
                )));
            }
            for (j, &p) in row.iter().enumerate() {
                if !(p >= 0.0) || !p.is_finite() {
                    return Err(Error::NegativeProbability { row: i, col: j, value: p });
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::NonStochasticRow { row: i, sum });
            }
        }
        for (y, &s) in self.vol_return.iter().enumerate() {
            if !(s > 0.0) {
                return Err(Error::NegativeVol { state: y, value: s });
            }
        }
        Ok(())
    }

    pub fn step(&self, y: usize) -> StepParams {
        let k = self.steps_per_year as f64;
        let r = self.risk_free[y] / k;
        let mu = self.mean_return[y] / k;
        StepParams {
            r,
            mu,
            sigma: self.vol_return[y] / k.sqrt(),
            gross_rf: 1.0 + r,
            mu_tilde: mu - r,
        }
    }

    pub fn steps(&self) -> Vec<StepParams> {
        (0..self.num_states).map(|y| self.step(y)).collect()
    }

    /// Mean and variance of the per-step excess return in regime `y`.
    pub fn excess_moments(&self, y: usize) -> (f64, f64) {
        let s = self.step(y);
        (s.mu_tilde, s.sigma * s.sigma)
    }

    /// Draw the next regime and the market return realized over the step.
    /// The normal draw comes first, then the uniform for the regime.
    pub fn sample_step(&self, y: usize, rng: &mut Rng) -> (usize, f64) {
        let s = self.step(y);
        let w: f64 = rng.sample(StandardNormal);
        let z = s.mu + s.sigma * w;
        (self.sample_next_regime(y, rng), z)
    }

    pub fn sample_next_regime(&self, y: usize, rng: &mut Rng) -> usize {
        let row = &self.transition[y];
        if row.len() == 1 {
            return 0;
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (j, &p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return j;
            }
        }
        // Rounding in the cumulative sum: fall back to the last state with mass.
        row.iter().rposition(|&p| p > 0.0).unwrap_or(row.len() - 1)
    }

    /// Stationary distribution by a direct linear solve of `λ(P − I) = 0`, `Σλ = 1`.
    pub fn stationary_distribution(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let m = self.num_states;
        if m == 1 {
            return Ok(vec![1.0]);
        }
        check_ergodic(&self.transition)?;
        let mut a = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                // Row i of the system is column i of (P − I).
                a[(i, j)] = self.transition[j][i] - if i == j { 1.0 } else { 0.0 };
            }
        }
        for j in 0..m {
            a[(m - 1, j)] = 1.0;
        }
        let mut rhs = DVector::<f64>::zeros(m);
        rhs[m - 1] = 1.0;
        let sol = a
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::NonErgodic("singular stationary system".into()))?;
        Ok(sol.iter().map(|&v| v.clamp(0.0, 1.0)).collect())
    }
}

/// Ergodicity check on the support graph: exactly one closed communicating class,
/// and that class is aperiodic.
fn check_ergodic(p: &[Vec<f64>]) -> Result<()> {
    let m = p.len();
    let mut reach = vec![vec![false; m]; m];
    for i in 0..m {
        reach[i][i] = true;
        for j in 0..m {
            if p[i][j] > 0.0 {
                reach[i][j] = true;
            }
        }
    }
    for k in 0..m {
        for i in 0..m {
            if reach[i][k] {
                for j in 0..m {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    // A state is recurrent iff everything it reaches reaches it back.
    let recurrent: Vec<bool> = (0..m).map(|i| (0..m).all(|j| !reach[i][j] || reach[j][i])).collect();
    let mut classes: Vec<usize> = Vec::new();
    for i in 0..m {
        if recurrent[i] && !classes.iter().any(|&c| reach[c][i]) {
            classes.push(i);
        }
    }
    if classes.len() != 1 {
        return Err(Error::NonErgodic(format!("{} closed classes", classes.len())));
    }
    let root = classes[0];
    let members: Vec<usize> = (0..m).filter(|&j| reach[root][j]).collect();
    // Period: gcd of level(u) + 1 − level(v) over edges inside the class.
    let mut level = vec![usize::MAX; m];
    level[root] = 0;
    let mut queue = std::collections::VecDeque::from([root]);
    while let Some(u) = queue.pop_front() {
        for v in 0..m {
            if p[u][v] > 0.0 && level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let mut g: i64 = 0;
    for &u in &members {
        for &v in &members {
            if p[u][v] > 0.0 {
                let d = (level[u] as i64 + 1 - level[v] as i64).abs();
                g = gcd(g, d);
            }
        }
    }
    if g != 1 {
        return Err(Error::NonErgodic(format!("periodic with period {g}")));
    }
    Ok(())
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}
