//! Equilibrium allocation by backward induction over the reduced state.
//!
//! The state at time `n` is `(ξ̂, prev, cur, y)`: the normalized communicated risk
//! aversion `ξ̂ = γ^{id}_τ γ^Z_τ` of the last interaction `τ`, the sum of
//! `Z − μ` over the window before `τ`, the sum since `τ`, and the regime. The
//! advisor's risk aversion is then `γ_n = e^{η_n} ξ̂ γ̄_n(y)`, which equals
//! `e^{η_n − η_τ} ξ γ̄_n(y)/γ̄_τ(y_τ)` for the raw communicated value `ξ`.
//!
//! At each grid point the five conditional moments of `(a_{n+1}, b_{n+1})`
//! against `Z̃` are integrated (regimes by exact sums, returns and each
//! Gaussian component of the binomial shock mixture by integrating the
//! interpolant exactly between its kinks, see [`piecewise`]), the allocation
//! follows in closed form, and `(a_n, b_n)` are updated from the same moments.

mod grid;
pub mod piecewise;
pub mod io;
pub mod oracle;

pub use grid::{linspace, locate, Grid, GridSpec, Shape, Stencil};
pub use piecewise::Integration;
pub use oracle::{brute_force_equilibrium, oracle_objective};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{MarketParams, StepParams};
use crate::quadrature::GaussHermite;
use crate::risk_profile::RiskProfileParams;
use piecewise::{for_each_segment, poly_integral, Axis, PolyStencil, Template, MAX_DEG};

/// Four-component solver state; the time index is carried separately.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedState {
    /// Normalized communicated risk aversion `ξ̂ = γ^{id}_τ γ^Z_τ`.
    pub xi: f64,
    pub prev_window_sum: f64,
    pub cur_window_sum: f64,
    /// Zero-based regime index.
    pub regime: usize,
}

impl ReducedState {
    pub fn initial(profile: &RiskProfileParams, regime: usize) -> Self {
        ReducedState { xi: profile.gamma0, prev_window_sum: 0.0, cur_window_sum: 0.0, regime }
    }

    /// Normalize a raw communicated value `ξ` observed at interaction time `tau` in regime `y_tau`.
    pub fn from_communicated(
        xi: f64,
        tau: usize,
        y_tau: usize,
        profile: &RiskProfileParams,
        horizon: usize,
    ) -> f64 {
        xi * (-profile.eta(tau, horizon)).exp() / profile.gamma_bar(tau, y_tau)
    }

    /// Advance across one step given `dz = Z − μ(y)`, the new regime, and the
    /// total idiosyncratic shock accumulated since the last interaction (used
    /// only when `n_next` is an interaction time).
    pub fn advance(
        &self,
        n_next: usize,
        dz: f64,
        y_next: usize,
        shock_sum: f64,
        profile: &RiskProfileParams,
    ) -> ReducedState {
        let cur = self.cur_window_sum + dz;
        if profile.is_interaction(n_next) {
            let phi = profile.phi as f64;
            let log_xi = self.xi.ln() + profile.beta * (self.prev_window_sum - cur) / phi + shock_sum;
            ReducedState { xi: log_xi.exp(), prev_window_sum: cur, cur_window_sum: 0.0, regime: y_next }
        } else {
            ReducedState { cur_window_sum: cur, regime: y_next, ..*self }
        }
    }
}

/// Conditional moments `(μ^a, μ^{az}, μ^b, μ^{bz}, μ^{bz²})`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Moments {
    pub a: f64,
    pub az: f64,
    pub b: f64,
    pub bz: f64,
    pub bz2: f64,
}

impl Moments {
    /// Moments of `Z̃` itself, i.e. with `a_{n+1} = b_{n+1} = 1`.
    pub fn terminal(step: &StepParams) -> Self {
        let m = step.mu_tilde;
        Moments { a: 1.0, az: m, b: 1.0, bz: m, bz2: m * m + step.sigma * step.sigma }
    }
}

/// General allocation `π̃ = (1/γ)(μ^{az} − Rγ(μ^{bz} − μ^a μ^{az}))/(μ^{bz²} − (μ^{az})²)`.
pub fn allocation(n: usize, regime: usize, m: &Moments, gamma: f64, gross_rf: f64) -> Result<f64> {
    let den = m.bz2 - m.az * m.az;
    if !(den > 0.0) || !den.is_finite() {
        return Err(Error::DegenerateVariance { n, regime, denominator: den });
    }
    Ok((m.az - gross_rf * gamma * (m.bz - m.a * m.az)) / (gamma * den))
}

/// Allocation when the future risk-aversion path is independent of the next
/// return, written through `μ^a = E[a_{n+1}]` and `μ^b = E[b_{n+1}]` only.
pub fn allocation_independent(
    mu_tilde: f64,
    sigma2: f64,
    gross_rf: f64,
    gamma: f64,
    mu_a: f64,
    mu_b: f64,
) -> Result<f64> {
    let spread = mu_b - mu_a * mu_a;
    let den = mu_b + mu_tilde * mu_tilde / sigma2 * spread;
    if !(den > 0.0) || !(sigma2 > 0.0) {
        return Err(Error::DegenerateVariance { n: 0, regime: 0, denominator: den });
    }
    Ok(mu_tilde / (gamma * sigma2) * (mu_a - gross_rf * gamma * spread) / den)
}

/// `(a_n, b_n)` from the moments and the chosen allocation.
pub fn update_ab(m: &Moments, gross_rf: f64, pi: f64) -> (f64, f64) {
    let a = gross_rf * m.a + pi * m.az;
    let b = gross_rf * gross_rf * m.b + 2.0 * gross_rf * pi * m.bz + pi * pi * m.bz2;
    (a, b)
}

pub fn value(a: f64, b: f64, gamma: f64) -> f64 {
    a - 1.0 - 0.5 * gamma * (b - a * a)
}

/// Truncate an allocation to `[lower, upper]`.
pub fn constrain(pi: f64, lower: f64, upper: f64) -> f64 {
    pi.max(lower).min(upper)
}

/// Dollar position with the liquidation rule: nothing at risk once wealth is negative.
pub fn liquidation_overlay(wealth: f64, pi_fraction: f64) -> f64 {
    if wealth >= 0.0 {
        pi_fraction * wealth
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveOptions {
    pub grid: GridSpec,
    /// Allocation bounds applied inside the induction.
    pub bounds: Option<(f64, f64)>,
    /// Fail with `GridExhausted` when the clamped mass fraction exceeds this.
    pub max_clamp_fraction: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { grid: GridSpec::default(), bounds: None, max_clamp_fraction: None }
    }
}

/// Probability mass that left the grid and was clamped to its boundary.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClampReport {
    /// Mass clamped in return/regime transitions, summed over grid points.
    pub transition_clamped: f64,
    pub transition_total: f64,
    /// Mass clamped while integrating idiosyncratic shocks, summed over nodes.
    pub shock_clamped: f64,
    pub shock_total: f64,
}

impl ClampReport {
    pub fn transition_fraction(&self) -> f64 {
        ratio(self.transition_clamped, self.transition_total)
    }

    pub fn shock_fraction(&self) -> f64 {
        ratio(self.shock_clamped, self.shock_total)
    }

    /// Worst of the two fractions.
    pub fn fraction(&self) -> f64 {
        self.transition_fraction().max(self.shock_fraction())
    }
}

fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicySlice {
    pub n: usize,
    pub interaction: bool,
    pub shape: Shape,
    pub cur_nodes: Vec<f64>,
    pub gamma: Vec<f64>,
    pub pi: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub value: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PolicyTables {
    pub horizon: usize,
    pub market: MarketParams,
    pub profile: RiskProfileParams,
    pub options: SolveOptions,
    pub grid: Grid,
    pub slices: Vec<PolicySlice>,
    pub clamp: ClampReport,
}

/// Geometry of the slice being integrated against.
struct Geom<'a> {
    shape: Shape,
    cur_nodes: &'a [f64],
    interaction: bool,
}

struct Model<'a> {
    market: &'a MarketParams,
    profile: &'a RiskProfileParams,
    steps: Vec<StepParams>,
    horizon: usize,
    grid: &'a Grid,
    rule: Integration,
    gh: GaussHermite,
    shock_gh: GaussHermite,
    /// Spacing of the ξ grid when it is uniform and the rule is exact.
    xi_step: Option<f64>,
}

impl<'a> Model<'a> {
    fn new(
        market: &'a MarketParams,
        profile: &'a RiskProfileParams,
        horizon: usize,
        grid: &'a Grid,
        spec: &GridSpec,
    ) -> Self {
        Model {
            market,
            profile,
            steps: market.steps(),
            horizon,
            grid,
            rule: spec.integration,
            gh: GaussHermite::new(spec.quad_points),
            shock_gh: GaussHermite::new(spec.shock_quad_points),
            xi_step: uniform_step(&grid.log_xi).filter(|_| spec.integration == Integration::Exact),
        }
    }

    fn slice_layout(&self, n: usize) -> (Shape, Vec<f64>, bool) {
        let interaction = self.profile.is_interaction(n);
        let cur_nodes = if interaction || self.grid.zsum.len() == 1 {
            vec![0.0]
        } else {
            self.grid.zsum.clone()
        };
        let shape = Shape {
            m: self.market.num_states,
            nx: self.grid.log_xi.len(),
            np: self.grid.zsum.len(),
            nc: cur_nodes.len(),
        };
        (shape, cur_nodes, interaction)
    }

    fn gamma(&self, n: usize, log_xi: f64, y: usize) -> f64 {
        (self.profile.eta(n, self.horizon) + log_xi).exp() * self.profile.gamma_bar(n, y)
    }

    fn axes<'g>(&'g self, y: usize, lx: f64, p: f64, c: f64, geom: &Geom<'g>) -> [Axis<'g>; 3] {
        let sigma = self.steps[y].sigma;
        let beta_phi = self.profile.beta / self.profile.phi as f64;
        if geom.interaction {
            [
                Axis { nodes: &self.grid.log_xi, base: lx + beta_phi * (p - c), slope: -beta_phi * sigma },
                Axis { nodes: &self.grid.zsum, base: c, slope: sigma },
                Axis { nodes: geom.cur_nodes, base: 0.0, slope: 0.0 },
            ]
        } else {
            [
                Axis { nodes: &self.grid.log_xi, base: lx, slope: 0.0 },
                Axis { nodes: &self.grid.zsum, base: p, slope: 0.0 },
                Axis { nodes: geom.cur_nodes, base: c, slope: sigma },
            ]
        }
    }

    /// Visit the successors of `(y, lx, p, c)`: for each next regime, the
    /// segment moments of the standardized return with their stencils on the
    /// next slice. `Z̃ = μ̃ + σX`. Returns the clamped mass.
    #[allow(clippy::too_many_arguments)]
    fn integrate<F: FnMut(f64, &[f64; MAX_DEG + 1], &PolyStencil)>(
        &self,
        y: usize,
        lx: f64,
        p: f64,
        c: f64,
        geom: &Geom,
        deg: usize,
        mut f: F,
    ) -> f64 {
        let axes = self.axes(y, lx, p, c, geom);
        let mut clamped = 0.0;
        for (yn, &prob) in self.market.transition[y].iter().enumerate() {
            if prob == 0.0 {
                continue;
            }
            for_each_segment(&axes, self.rule, &self.gh, deg, |seg| {
                if seg.clamped() {
                    clamped += prob * seg.mom[0];
                }
                f(prob, &seg.mom, &PolyStencil::new(&geom.shape, yn, &seg.cells));
            });
        }
        clamped
    }

    /// Segments shared by every ξ node of a query `(y, ·, p, c)` on grid nodes.
    fn template(&self, h: f64, y: usize, p: f64, c: f64, geom: &Geom, deg: usize) -> Template<3> {
        let axes = self.axes(y, 0.0, p, c, geom);
        Template::new(h, axes[0].base, axes[0].slope, &axes, deg)
    }

    /// [`Self::integrate`] for a query on ξ node `ix`, using its template.
    fn integrate_template<F: FnMut(f64, &[f64; MAX_DEG + 1], &PolyStencil)>(
        &self,
        t: &Template<3>,
        y: usize,
        ix: usize,
        geom: &Geom,
        mut f: F,
    ) -> f64 {
        let nx = self.grid.log_xi.len();
        let cells: Vec<_> = t
            .segs
            .iter()
            .enumerate()
            .map(|(k, seg)| [t.cell0(k, ix, nx), seg.cells[1], seg.cells[2]])
            .collect();
        let mut clamped = 0.0;
        for (yn, &prob) in self.market.transition[y].iter().enumerate() {
            if prob == 0.0 {
                continue;
            }
            for (seg, cells) in t.segs.iter().zip(&cells) {
                if cells.iter().any(|c| c.clamped) {
                    clamped += prob * seg.mom[0];
                }
                f(prob, &seg.mom, &PolyStencil::new(&geom.shape, yn, cells));
            }
        }
        clamped
    }

    /// Expectation of each field over the `φ` shocks accumulated between two
    /// interactions, on the nodes of an interaction slice. Returns the smoothed
    /// fields and the clamped mass summed over nodes.
    fn smooth(&self, shape: Shape, fields: &[&[f64]]) -> (Vec<Vec<f64>>, f64) {
        let p = self.profile.p_eps;
        if p == 0.0 || self.grid.log_xi.len() == 1 {
            return (fields.iter().map(|f| f.to_vec()).collect(), 0.0);
        }
        let phi = self.profile.phi;
        let s2 = self.profile.sigma_eps * self.profile.sigma_eps;
        // Component J: J jumps, log-shock ~ N(−J s²/2, J s²).
        let mut comps: Vec<(f64, f64, f64)> = Vec::new();
        for j in 0..=phi {
            let w = binom_pmf(phi, j, p);
            if w < 1e-300 {
                continue;
            }
            comps.push((w, -0.5 * j as f64 * s2, (j as f64 * s2).sqrt()));
        }
        let log_xi = &self.grid.log_xi;
        let nf = fields.len();
        let results: Vec<(Vec<f64>, f64)> = (0..shape.len())
            .into_par_iter()
            .map(|i| {
                let (y, ix, ip, _) = shape.unindex(i);
                let mut acc = vec![0.0; nf];
                let mut clamped = 0.0;
                for &(w, mean, sd) in &comps {
                    if sd == 0.0 {
                        for (k, f) in fields.iter().enumerate() {
                            acc[k] += w * f[i];
                        }
                        continue;
                    }
                    let axis = [Axis { nodes: log_xi, base: log_xi[ix] + mean, slope: sd }];
                    for_each_segment(&axis, self.rule, &self.shock_gh, 1, |seg| {
                        let c = seg.cells[0];
                        if c.clamped {
                            clamped += w * seg.mom[0];
                        }
                        let upper = seg.integrate(&c.t);
                        let lower = seg.mom[0] - upper;
                        let i0 = shape.index(y, c.i, ip, 0);
                        let i1 = if upper == 0.0 { i0 } else { shape.index(y, c.i + 1, ip, 0) };
                        for (k, f) in fields.iter().enumerate() {
                            acc[k] += w * (lower * f[i0] + upper * f[i1]);
                        }
                    });
                }
                (acc, clamped)
            })
            .collect();
        let mut out = vec![vec![0.0; shape.len()]; nf];
        let mut clamped = 0.0;
        for (i, (acc, cl)) in results.into_iter().enumerate() {
            for k in 0..nf {
                out[k][i] = acc[k];
            }
            clamped += cl;
        }
        (out, clamped)
    }

    /// Moments at `(y, lx, p, c)` for slice `n`, against the (possibly smoothed)
    /// `a`, `b` fields of slice `n+1`. With a template, `(lx, p, c)` must be
    /// ξ node `ix` and the nodes the template was built for.
    #[allow(clippy::too_many_arguments)]
    fn moments(
        &self,
        n: usize,
        y: usize,
        (ix, lx): (usize, f64),
        p: f64,
        c: f64,
        next: Option<(&Geom, &[f64], &[f64])>,
        template: Option<&Template<3>>,
    ) -> (Moments, f64) {
        match next {
            None => {
                debug_assert_eq!(n + 1, self.horizon);
                (Moments::terminal(&self.steps[y]), 0.0)
            }
            Some((geom, fa, fb)) => {
                let (mu, s) = (self.steps[y].mu_tilde, self.steps[y].sigma);
                let mut m = Moments::default();
                let acc = |prob: f64, mom: &[f64; MAX_DEG + 1], st: &PolyStencil| {
                    let pa = st.field_poly(fa);
                    let pb = st.field_poly(fb);
                    let a0 = poly_integral(mom, &pa, 0);
                    let a1 = poly_integral(mom, &pa, 1);
                    let b0 = poly_integral(mom, &pb, 0);
                    let b1 = poly_integral(mom, &pb, 1);
                    let b2 = poly_integral(mom, &pb, 2);
                    m.a += prob * a0;
                    m.az += prob * (mu * a0 + s * a1);
                    m.b += prob * b0;
                    m.bz += prob * (mu * b0 + s * b1);
                    m.bz2 += prob * (mu * mu * b0 + 2.0 * mu * s * b1 + s * s * b2);
                };
                let clamped = match template {
                    Some(t) => self.integrate_template(t, y, ix, geom, acc),
                    None => self.integrate(y, lx, p, c, geom, 5, acc),
                };
                (m, clamped)
            }
        }
    }
}

/// Common spacing of an evenly spaced grid.
fn uniform_step(nodes: &[f64]) -> Option<f64> {
    if nodes.len() < 2 {
        return Some(1.0);
    }
    let h = (nodes[nodes.len() - 1] - nodes[0]) / (nodes.len() - 1) as f64;
    let tol = 1e-9 * h.abs().max(1e-300);
    nodes.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= tol).then_some(h)
}

fn binom_pmf(n: usize, k: usize, p: f64) -> f64 {
    let mut c = 1.0;
    for i in 0..k {
        c *= (n - i) as f64 / (i + 1) as f64;
    }
    c * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
}

/// Solve for the equilibrium policy over `n = T−1, …, 0`.
pub fn solve(
    market: &MarketParams,
    profile: &RiskProfileParams,
    horizon: usize,
    options: &SolveOptions,
) -> Result<PolicyTables> {
    market.validate()?;
    profile.validate(horizon, market.num_states)?;
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    if let Some((lo, hi)) = options.bounds {
        if !(lo <= hi) {
            return Err(Error::InvalidParameter("allocation bounds need lower <= upper".into()));
        }
    }
    let grid = Grid::build(&options.grid, market, profile, horizon)?;
    let model = Model::new(market, profile, horizon, &grid, &options.grid);
    let mut clamp = ClampReport::default();
    let mut slices: Vec<PolicySlice> = Vec::with_capacity(horizon);

    for n in (0..horizon).rev() {
        let (shape, cur_nodes, interaction) = model.slice_layout(n);
        // Fields of slice n+1 that slice n integrates against.
        let next_fields: Option<(Geom, Vec<f64>, Vec<f64>)> = slices.last().map(|s: &PolicySlice| {
            if s.interaction {
                let (sm, cl) = model.smooth(s.shape, &[&s.a, &s.b]);
                clamp.shock_clamped += cl;
                clamp.shock_total += s.shape.len() as f64;
                let mut it = sm.into_iter();
                let a = it.next().unwrap();
                let b = it.next().unwrap();
                (Geom { shape: s.shape, cur_nodes: &s.cur_nodes, interaction: true }, a, b)
            } else {
                (Geom { shape: s.shape, cur_nodes: &s.cur_nodes, interaction: false }, s.a.clone(), s.b.clone())
            }
        });
        let next_ref = next_fields.as_ref().map(|(g, a, b)| (g, a.as_slice(), b.as_slice()));
        // One template per (y, prev, cur) node, shared along the ξ axis.
        let templates: Option<Vec<Template<3>>> = match (next_ref, model.xi_step) {
            (Some((geom, _, _)), Some(h)) => Some(
                (0..shape.m * shape.np * shape.nc)
                    .into_par_iter()
                    .map(|k| {
                        let (y, ip, ic) = (k / (shape.np * shape.nc), (k / shape.nc) % shape.np, k % shape.nc);
                        model.template(h, y, grid.zsum[ip], cur_nodes[ic], geom, 5)
                    })
                    .collect(),
            ),
            _ => None,
        };

        let points: Vec<Result<(f64, f64, f64, f64, f64, f64)>> = (0..shape.len())
            .into_par_iter()
            .map(|i| {
                let (y, ix, ip, ic) = shape.unindex(i);
                let lx = grid.log_xi[ix];
                let p = grid.zsum[ip];
                let c = cur_nodes[ic];
                let step = model.steps[y];
                let gamma = model.gamma(n, lx, y);
                let t = templates.as_ref().map(|t| &t[(y * shape.np + ip) * shape.nc + ic]);
                let (m, cl) = model.moments(n, y, (ix, lx), p, c, next_ref, t);
                let mut pi = if n + 1 == horizon {
                    step.mu_tilde / (gamma * step.sigma * step.sigma)
                } else {
                    allocation(n, y, &m, gamma, step.gross_rf)?
                };
                if let Some((lo, hi)) = options.bounds {
                    pi = constrain(pi, lo, hi);
                }
                let (a, b) = update_ab(&m, step.gross_rf, pi);
                Ok((gamma, pi, a, b, value(a, b, gamma), cl))
            })
            .collect();

        let len = shape.len();
        let mut slice = PolicySlice {
            n,
            interaction,
            shape,
            cur_nodes: cur_nodes.clone(),
            gamma: Vec::with_capacity(len),
            pi: Vec::with_capacity(len),
            a: Vec::with_capacity(len),
            b: Vec::with_capacity(len),
            value: Vec::with_capacity(len),
        };
        for r in points {
            let (g, pi, a, b, v, cl) = r?;
            if !(pi.is_finite() && a.is_finite() && b.is_finite()) {
                return Err(Error::DegenerateVariance { n, regime: 0, denominator: f64::NAN });
            }
            slice.gamma.push(g);
            slice.pi.push(pi);
            slice.a.push(a);
            slice.b.push(b);
            slice.value.push(v);
            clamp.transition_clamped += cl;
        }
        if n + 1 < horizon {
            clamp.transition_total += len as f64;
        }
        slices.push(slice);
    }
    slices.reverse();

    if let Some(limit) = options.max_clamp_fraction {
        let fraction = clamp.fraction();
        if fraction > limit {
            return Err(Error::GridExhausted { fraction, limit });
        }
    }
    Ok(PolicyTables {
        horizon,
        market: market.clone(),
        profile: profile.clone(),
        options: options.clone(),
        grid,
        slices,
        clamp,
    })
}

impl PolicyTables {
    fn model(&self) -> Model<'_> {
        Model::new(&self.market, &self.profile, self.horizon, &self.grid, &self.options.grid)
    }

    fn stencil(&self, n: usize, state: &ReducedState) -> Stencil {
        let s = &self.slices[n];
        let c = if s.interaction { 0.0 } else { state.cur_window_sum };
        s.shape
            .stencil(&self.grid.log_xi, &self.grid.zsum, &s.cur_nodes, state.regime, state.xi.ln(), state.prev_window_sum, c)
            .0
    }

    /// True when the state lies outside the grid in some dimension.
    pub fn is_clamped(&self, n: usize, state: &ReducedState) -> bool {
        let s = &self.slices[n];
        let c = if s.interaction { 0.0 } else { state.cur_window_sum };
        s.shape
            .stencil(&self.grid.log_xi, &self.grid.zsum, &s.cur_nodes, state.regime, state.xi.ln(), state.prev_window_sum, c)
            .1
    }

    /// Advisor's risk aversion `γ_n` at a state.
    pub fn gamma_at(&self, n: usize, state: &ReducedState) -> f64 {
        (self.profile.eta(n, self.horizon)).exp() * state.xi * self.profile.gamma_bar(n, state.regime)
    }

    /// Interpolated allocation (fraction of wealth).
    pub fn allocation_at(&self, n: usize, state: &ReducedState) -> f64 {
        self.stencil(n, state).apply(&self.slices[n].pi)
    }

    pub fn a_at(&self, n: usize, state: &ReducedState) -> f64 {
        self.stencil(n, state).apply(&self.slices[n].a)
    }

    pub fn b_at(&self, n: usize, state: &ReducedState) -> f64 {
        self.stencil(n, state).apply(&self.slices[n].b)
    }

    /// Conditional moments at slice `n` for an arbitrary state against the
    /// solved slice `n+1`, using `quad_points` nodes when integrating by
    /// Gauss–Hermite.
    pub fn step_moments(&self, n: usize, state: &ReducedState, quad_points: usize) -> Moments {
        let spec = GridSpec { quad_points, ..self.options.grid.clone() };
        let model = Model::new(&self.market, &self.profile, self.horizon, &self.grid, &spec);
        let c = if self.slices[n].interaction { 0.0 } else { state.cur_window_sum };
        let lx = state.xi.ln();
        if n + 1 == self.horizon {
            return model.moments(n, state.regime, (0, lx), state.prev_window_sum, c, None, None).0;
        }
        let s = &self.slices[n + 1];
        let geom = Geom { shape: s.shape, cur_nodes: &s.cur_nodes, interaction: s.interaction };
        let (fa, fb) = if s.interaction {
            let (sm, _) = model.smooth(s.shape, &[&s.a, &s.b]);
            let mut it = sm.into_iter();
            (it.next().unwrap(), it.next().unwrap())
        } else {
            (s.a.clone(), s.b.clone())
        };
        model.moments(n, state.regime, (0, lx), state.prev_window_sum, c, Some((&geom, &fa, &fb)), None).0
    }

    /// Tables of the `m`-th moment of the gross return to `T` under the solved
    /// policy, `1 ≤ m ≤ 12`.
    pub fn moment_tables(&self, m: u32) -> Vec<Vec<f64>> {
        assert!((1..=12).contains(&m), "moment order must lie in 1..=12");
        let model = self.model();
        let mut out: Vec<Vec<f64>> = vec![Vec::new(); self.horizon];
        for n in (0..self.horizon).rev() {
            let s = &self.slices[n];
            let next: Option<(Geom, Vec<f64>)> = if n + 1 < self.horizon {
                let sn = &self.slices[n + 1];
                let f = if sn.interaction {
                    model.smooth(sn.shape, &[&out[n + 1]]).0.pop().unwrap()
                } else {
                    out[n + 1].clone()
                };
                Some((Geom { shape: sn.shape, cur_nodes: &sn.cur_nodes, interaction: sn.interaction }, f))
            } else {
                None
            };
            let table: Vec<f64> = (0..s.shape.len())
                .into_par_iter()
                .map(|i| {
                    let (y, ix, ip, ic) = s.shape.unindex(i);
                    let pi = s.pi[i];
                    let step = model.steps[y];
                    match &next {
                        None => model.gh.expect(|x| (step.gross_rf + (step.mu_tilde + step.sigma * x) * pi).powi(m as i32)),
                        Some((geom, f)) => {
                            let g = gross_return_poly(step.gross_rf + step.mu_tilde * pi, step.sigma * pi, m);
                            let mut acc = 0.0;
                            model.integrate(
                                y,
                                self.grid.log_xi[ix],
                                self.grid.zsum[ip],
                                s.cur_nodes[ic],
                                geom,
                                3 + m as usize,
                                |prob, mom, st| {
                                    let pf = st.field_poly(f);
                                    for (k, gk) in g.iter().enumerate() {
                                        acc += prob * gk * poly_integral(mom, &pf, k);
                                    }
                                },
                            );
                            acc
                        }
                    }
                })
                .collect();
            out[n] = table;
        }
        out
    }

    /// Initial state of a path starting in regime `y0`.
    pub fn initial_state(&self, y0: usize) -> ReducedState {
        ReducedState::initial(&self.profile, y0)
    }
}

/// Coefficients of `(c0 + c1 x)^m`.
fn gross_return_poly(c0: f64, c1: f64, m: u32) -> Vec<f64> {
    let m = m as usize;
    let mut out = vec![0.0; m + 1];
    let mut binom = 1.0;
    for k in 0..=m {
        out[k] = binom * c0.powi((m - k) as i32) * c1.powi(k as i32);
        binom = binom * (m - k) as f64 / (k + 1) as f64;
    }
    out
}

/// `m`-th moment of the gross return from `n` to `T` at `state`.
pub fn moment_m(m: u32, tables: &PolicyTables, state: &ReducedState, n: usize) -> f64 {
    let t = tables.moment_tables(m);
    tables.stencil(n, state).apply(&t[n])
}
