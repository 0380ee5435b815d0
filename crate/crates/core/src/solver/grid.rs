//! Grid construction and multilinear interpolation for the reduced state.

use serde::{Deserialize, Serialize};

use super::piecewise::Integration;
use crate::error::{Error, Result};
use crate::market::MarketParams;
use crate::risk_profile::RiskProfileParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    /// Number of log-spaced nodes for the normalized communicated risk
    /// aversion; by default enough to keep the spacing of 81 nodes on
    /// `[γ₀/8, 8γ₀]`.
    pub xi_count: Option<usize>,
    /// Lower end of the ξ grid; see [`Grid::build`] for the default.
    pub xi_min: Option<f64>,
    /// Upper end of the ξ grid.
    pub xi_max: Option<f64>,
    /// Reach of the default ξ span in standard deviations of the accumulated
    /// shocks and of the bias factor.
    pub xi_span_sd: f64,
    /// Nodes per window-sum dimension.
    pub zsum_count: usize,
    /// Half-width of the window-sum grids in units of `max σ_step · √φ`.
    pub zsum_span_sd: f64,
    /// Gauss–Hermite nodes for the market return.
    pub quad_points: usize,
    /// Gauss–Hermite nodes for each Gaussian component of the shock mixture.
    pub shock_quad_points: usize,
    /// How Gaussian expectations of interpolated fields are computed; the node
    /// counts above apply only to `gauss_hermite`.
    pub integration: Integration,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            xi_count: None,
            xi_min: None,
            xi_max: None,
            xi_span_sd: 4.0,
            zsum_count: 21,
            zsum_span_sd: 4.0,
            quad_points: 16,
            shock_quad_points: 16,
            integration: Integration::Exact,
        }
    }
}

impl GridSpec {
    /// A grid holding only the node `γ₀`; exact whenever `ξ` never moves.
    pub fn single_xi() -> Self {
        GridSpec { xi_count: Some(1), ..GridSpec::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.xi_count == Some(0) || self.zsum_count == 0 {
            return Err(Error::InvalidParameter("grid node counts must be at least 1".into()));
        }
        if self.quad_points == 0 || self.shock_quad_points == 0 {
            return Err(Error::InvalidParameter("quadrature needs at least one node".into()));
        }
        if !(self.zsum_span_sd > 0.0 && self.xi_span_sd > 0.0) {
            return Err(Error::InvalidParameter("grid spans must be positive".into()));
        }
        if let (Some(lo), Some(hi)) = (self.xi_min, self.xi_max) {
            if !(lo > 0.0 && hi > lo) {
                return Err(Error::InvalidParameter("need 0 < xi_min < xi_max".into()));
            }
        }
        Ok(())
    }
}

/// Realized node sets.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub log_xi: Vec<f64>,
    /// Nodes shared by both window-sum dimensions; a single zero node when the
    /// bias is switched off.
    pub zsum: Vec<f64>,
}

/// Node spacing in `log ξ` of the basic grid: 81 nodes on `[γ₀/8, 8γ₀]`.
pub const BASE_LOG_XI_STEP: f64 = 2.0 * 2.0794415416798357 / 80.0;

impl Grid {
    /// The default ξ span is `[γ₀/8, 8γ₀]`, widened where needed to cover
    /// `xi_span_sd` standard deviations of the shocks accumulated over the
    /// horizon (shifted by their mean) plus the largest bias factor reachable
    /// from the window-sum grid.
    pub fn build(spec: &GridSpec, market: &MarketParams, profile: &RiskProfileParams, horizon: usize) -> Result<Self> {
        spec.validate()?;
        let g0 = profile.gamma0.ln();
        let smax = market.steps().iter().map(|s| s.sigma).fold(0.0, f64::max);
        let phi = profile.phi as f64;
        let log_xi = if spec.xi_count == Some(1) {
            vec![g0]
        } else {
            let shock_var = profile.p_eps * horizon as f64 * profile.sigma_eps * profile.sigma_eps;
            let bias = profile.beta * spec.zsum_span_sd * smax / phi.sqrt();
            let up = (spec.xi_span_sd * shock_var.sqrt() + bias).max(8f64.ln());
            let down = (0.5 * shock_var + spec.xi_span_sd * shock_var.sqrt() + bias).max(8f64.ln());
            if spec.xi_min.is_none() && spec.xi_max.is_none() && spec.xi_count.is_none() {
                // Whole steps either side of γ₀ so that γ₀ itself is a node.
                let below = (down / BASE_LOG_XI_STEP - 1e-9).ceil() as i64;
                let above = (up / BASE_LOG_XI_STEP - 1e-9).ceil() as i64;
                (-below..=above).map(|k| g0 + k as f64 * BASE_LOG_XI_STEP).collect()
            } else {
                let lo = spec.xi_min.map_or(g0 - down, f64::ln);
                let hi = spec.xi_max.map_or(g0 + up, f64::ln);
                if !(hi > lo) {
                    return Err(Error::InvalidParameter("empty xi range".into()));
                }
                let count = spec.xi_count.unwrap_or_else(|| ((hi - lo) / BASE_LOG_XI_STEP - 1e-9).ceil() as usize + 1);
                linspace(lo, hi, count.max(2))
            }
        };
        let zsum = if profile.beta == 0.0 || spec.zsum_count == 1 {
            vec![0.0]
        } else {
            let half = spec.zsum_span_sd * smax * phi.sqrt();
            linspace(-half, half, spec.zsum_count)
        };
        Ok(Grid { log_xi, zsum })
    }
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let h = (hi - lo) / (n - 1) as f64;
    let mut v: Vec<f64> = (0..n).map(|i| lo + h * i as f64).collect();
    v[n - 1] = hi;
    v
}

/// Bracketing cell of `x` in `nodes`: lower index, weight of the upper node,
/// and whether `x` had to be clamped. A single-node axis never clamps.
#[inline]
pub fn locate(nodes: &[f64], x: f64) -> (usize, f64, bool) {
    let n = nodes.len();
    if n == 1 {
        return (0, 0.0, false);
    }
    if x <= nodes[0] {
        return (0, 0.0, x < nodes[0]);
    }
    if x >= nodes[n - 1] {
        return (n - 2, 1.0, x > nodes[n - 1]);
    }
    // Uniform spacing makes the cell index a direct computation.
    let h = (nodes[n - 1] - nodes[0]) / (n - 1) as f64;
    let mut i = (((x - nodes[0]) / h) as usize).min(n - 2);
    while i > 0 && x < nodes[i] {
        i -= 1;
    }
    while i + 2 < n && x >= nodes[i + 1] {
        i += 1;
    }
    let t = (x - nodes[i]) / (nodes[i + 1] - nodes[i]);
    (i, t, false)
}

/// Interpolation stencil: up to eight (flat index, weight) pairs.
#[derive(Debug, Clone, Copy)]
pub struct Stencil {
    pub idx: [usize; 8],
    pub w: [f64; 8],
    pub len: usize,
}

impl Stencil {
    #[inline]
    pub fn apply(&self, field: &[f64]) -> f64 {
        let mut s = 0.0;
        for k in 0..self.len {
            s += self.w[k] * field[self.idx[k]];
        }
        s
    }
}

/// Shape of one time slice: regimes × ξ × previous sum × current sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub m: usize,
    pub nx: usize,
    pub np: usize,
    pub nc: usize,
}

impl Shape {
    #[inline]
    pub fn len(&self) -> usize {
        self.m * self.nx * self.np * self.nc
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, y: usize, ix: usize, ip: usize, ic: usize) -> usize {
        ((y * self.nx + ix) * self.np + ip) * self.nc + ic
    }

    #[inline]
    pub fn unindex(&self, i: usize) -> (usize, usize, usize, usize) {
        let ic = i % self.nc;
        let r = i / self.nc;
        let ip = r % self.np;
        let r = r / self.np;
        (r / self.nx, r % self.nx, ip, ic)
    }

    /// Trilinear stencil at regime `y` (exact on nodes: zero weights are dropped).
    #[inline]
    pub fn stencil(
        &self,
        log_xi: &[f64],
        zsum: &[f64],
        cur_nodes: &[f64],
        y: usize,
        lx: f64,
        p: f64,
        c: f64,
    ) -> (Stencil, bool) {
        let (ix, tx, cx) = locate(log_xi, lx);
        let (ip, tp, cp) = locate(zsum, p);
        let (ic, tc, cc) = locate(cur_nodes, c);
        let mut st = Stencil { idx: [0; 8], w: [0.0; 8], len: 0 };
        for (dx, wx) in [(0, 1.0 - tx), (1, tx)] {
            if wx == 0.0 {
                continue;
            }
            for (dp, wp) in [(0, 1.0 - tp), (1, tp)] {
                if wp == 0.0 {
                    continue;
                }
                for (dc, wc) in [(0, 1.0 - tc), (1, tc)] {
                    if wc == 0.0 {
                        continue;
                    }
                    st.idx[st.len] = self.index(y, ix + dx, ip + dp, ic + dc);
                    st.w[st.len] = wx * wp * wc;
                    st.len += 1;
                }
            }
        }
        (st, cx || cp || cc)
    }
}
