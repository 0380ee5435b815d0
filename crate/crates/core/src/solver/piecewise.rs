//! Gaussian expectations of multilinear interpolants along a line.
//!
//! Every conditional expectation in the solver has the form `E[g(X) f(u(X))]`
//! with `X` standard normal, `g` a polynomial, `u` affine in `X` and `f` a
//! multilinear interpolant. Between the points where `u` crosses a grid node
//! the integrand is a polynomial in `X`, so splitting the line there and using
//! the truncated normal moments integrates the interpolant exactly. The
//! alternative rule evaluates the same integrand at Gauss–Hermite nodes.

use serde::{Deserialize, Serialize};

use super::grid::{locate, Shape};
use crate::quadrature::GaussHermite;

/// Highest power of `X` a segment carries moments for.
pub const MAX_DEG: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Integration {
    /// Split at interpolation kinks and integrate each polynomial piece exactly.
    #[default]
    Exact,
    /// Gauss–Hermite nodes over the whole line.
    GaussHermite,
}

/// Beyond this many standard deviations the remaining mass (< 1e-17) is
/// merged into the outermost segments.
const CUT: f64 = 8.5;

/// One coordinate of the query point, `base + slope·X`, against its nodes.
#[derive(Debug, Clone, Copy)]
pub struct Axis<'a> {
    pub nodes: &'a [f64],
    pub base: f64,
    pub slope: f64,
}

/// Interpolation cell of one axis on a segment: lower node index and the
/// weight of the upper node as a polynomial `t0 + t1·X`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Cell {
    pub i: usize,
    pub t: [f64; 2],
    pub clamped: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct Segment<const K: usize> {
    /// `mom[j] = ∫ x^j dν` over the segment.
    pub mom: [f64; MAX_DEG + 1],
    pub cells: [Cell; K],
}

impl<const K: usize> Segment<K> {
    pub fn clamped(&self) -> bool {
        self.cells.iter().any(|c| c.clamped)
    }

    /// `∫ p(x) dν` for polynomial coefficients `p` (lowest degree first).
    #[inline]
    pub fn integrate(&self, p: &[f64]) -> f64 {
        self.integrate_shifted(p, 0)
    }

    /// `∫ x^k p(x) dν`.
    #[inline]
    pub fn integrate_shifted(&self, p: &[f64], k: usize) -> f64 {
        poly_integral(&self.mom, p, k)
    }
}

#[inline]
fn pdf(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
    }
}

/// A cut point of the line with the quantities both adjacent segments need.
#[derive(Debug, Clone, Copy)]
struct Edge {
    x: f64,
    pdf: f64,
    /// The smaller tail: `P(X < x)` for negative `x`, else `P(X > x)`.
    tail: f64,
}

impl Edge {
    fn new(x: f64) -> Self {
        let tail = 0.5 * libm::erfc(x.abs() * std::f64::consts::FRAC_1_SQRT_2);
        Edge { x, pdf: pdf(x), tail }
    }
}

/// `P(a < X < b)` computed on the side of the mean that avoids cancellation.
fn mass(a: &Edge, b: &Edge) -> f64 {
    if a.x >= 0.0 {
        a.tail - b.tail
    } else if b.x <= 0.0 {
        b.tail - a.tail
    } else {
        1.0 - a.tail - b.tail
    }
}

fn moments_between(a: &Edge, b: &Edge, deg: usize) -> [f64; MAX_DEG + 1] {
    let mut m = [0.0; MAX_DEG + 1];
    m[0] = mass(a, b);
    if deg >= 1 {
        m[1] = a.pdf - b.pdf;
    }
    // x^k φ(x) vanishes at infinite endpoints, where pdf is already zero.
    let (a1, b1) = (if a.x.is_finite() { a.x } else { 0.0 }, if b.x.is_finite() { b.x } else { 0.0 });
    let (mut xa, mut xb) = (a1, b1);
    for j in 2..=deg {
        m[j] = xa * a.pdf - xb * b.pdf + (j - 1) as f64 * m[j - 2];
        xa *= a1;
        xb *= b1;
    }
    m
}

/// Truncated moments `∫_a^b x^j φ(x) dx` for `j ≤ deg`.
pub fn partial_moments(a: f64, b: f64, deg: usize) -> [f64; MAX_DEG + 1] {
    moments_between(&Edge::new(a), &Edge::new(b), deg)
}

/// `∫ x^k p(x) dν` given the segment moments `mom`.
#[inline]
pub fn poly_integral(mom: &[f64; MAX_DEG + 1], p: &[f64], k: usize) -> f64 {
    p.iter().zip(&mom[k..]).map(|(c, m)| c * m).sum()
}

/// Sorted cut points with the outer ends at ±∞.
fn edges(mut bps: Vec<f64>) -> Vec<Edge> {
    bps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    bps.dedup();
    let mut out = Vec::with_capacity(bps.len() + 2);
    out.push(Edge::new(f64::NEG_INFINITY));
    out.extend(bps.into_iter().map(Edge::new));
    out.push(Edge::new(f64::INFINITY));
    out
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => 0.5 * (lo + hi),
        (false, true) => hi - 1.0,
        (true, false) => lo + 1.0,
        (false, false) => 0.0,
    }
}

fn node_cuts(a: &Axis, bps: &mut Vec<f64>) {
    if a.slope == 0.0 || a.nodes.len() == 1 {
        return;
    }
    for &v in a.nodes {
        let x = (v - a.base) / a.slope;
        if x.abs() < CUT {
            bps.push(x);
        }
    }
}

fn cell(axis: &Axis, x: f64) -> Cell {
    let u = axis.base + axis.slope * x;
    let (i, t, clamped) = locate(axis.nodes, u);
    if axis.nodes.len() == 1 || clamped || axis.slope == 0.0 {
        return Cell { i, t: [t, 0.0], clamped };
    }
    let h = axis.nodes[i + 1] - axis.nodes[i];
    Cell { i, t: [(axis.base - axis.nodes[i]) / h, axis.slope / h], clamped }
}

/// Visit the segments of `X`'s line for the given axes.
pub fn for_each_segment<const K: usize, F: FnMut(&Segment<K>)>(
    axes: &[Axis; K],
    rule: Integration,
    gh: &GaussHermite,
    deg: usize,
    mut f: F,
) {
    debug_assert!(deg <= MAX_DEG);
    match rule {
        Integration::GaussHermite => {
            for (&x, &w) in gh.nodes.iter().zip(&gh.weights) {
                let mut mom = [0.0; MAX_DEG + 1];
                let mut p = w;
                for m in mom.iter_mut().take(deg + 1) {
                    *m = p;
                    p *= x;
                }
                let mut cells = [Cell::default(); K];
                for (c, a) in cells.iter_mut().zip(axes) {
                    *c = cell(a, x);
                }
                f(&Segment { mom, cells });
            }
        }
        Integration::Exact => {
            let mut bps: Vec<f64> = Vec::new();
            for a in axes {
                node_cuts(a, &mut bps);
            }
            for w in edges(bps).windows(2) {
                let mid = midpoint(w[0].x, w[1].x);
                let mut cells = [Cell::default(); K];
                for (c, a) in cells.iter_mut().zip(axes) {
                    *c = cell(a, mid);
                }
                f(&Segment { mom: moments_between(&w[0], &w[1], deg), cells });
            }
        }
    }
}

/// Exact-rule segments for a query that sits on a node of the uniform axis 0,
/// valid for every node of that axis. Axis 0 is described by its spacing and
/// by the offset `shift + slope·X` from the query's own node; its cells are
/// stored as offsets and resolved per node with [`Template::cell0`]. The
/// remaining axes are absolute and `axes[0]` is ignored.
#[derive(Debug, Clone)]
pub struct Template<const K: usize> {
    pub segs: Vec<Segment<K>>,
    offsets: Vec<(isize, [f64; 2])>,
    moving: bool,
}

impl<const K: usize> Template<K> {
    pub fn new(h: f64, shift: f64, slope: f64, axes: &[Axis; K], deg: usize) -> Self {
        let moving = slope != 0.0;
        let mut bps: Vec<f64> = Vec::new();
        if moving {
            let lo = ((shift - slope.abs() * CUT) / h).ceil() as i64;
            let hi = ((shift + slope.abs() * CUT) / h).floor() as i64;
            for j in lo..=hi {
                let x = (j as f64 * h - shift) / slope;
                if x.abs() < CUT {
                    bps.push(x);
                }
            }
        }
        for a in &axes[1..] {
            node_cuts(a, &mut bps);
        }
        let cuts = edges(bps);
        let mut segs = Vec::with_capacity(cuts.len() - 1);
        let mut offsets = Vec::with_capacity(cuts.len() - 1);
        for w in cuts.windows(2) {
            let mid = midpoint(w[0].x, w[1].x);
            let mut cells = [Cell::default(); K];
            for (c, a) in cells.iter_mut().zip(axes).skip(1) {
                *c = cell(a, mid);
            }
            segs.push(Segment { mom: moments_between(&w[0], &w[1], deg), cells });
            if moving {
                let k = ((shift + slope * mid) / h).floor();
                offsets.push((k as isize, [(shift - k * h) / h, slope / h]));
            } else {
                offsets.push((0, [0.0, 0.0]));
            }
        }
        Template { segs, offsets, moving }
    }

    /// Axis-0 cell of segment `s` for a query on node `own` of an `n`-node axis.
    #[inline]
    pub fn cell0(&self, s: usize, own: usize, n: usize) -> Cell {
        if n == 1 {
            return Cell { i: 0, t: [0.0, 0.0], clamped: false };
        }
        if !self.moving {
            return if own + 1 == n {
                Cell { i: n - 2, t: [1.0, 0.0], clamped: false }
            } else {
                Cell { i: own, t: [0.0, 0.0], clamped: false }
            };
        }
        let (k, t) = self.offsets[s];
        let i = own as isize + k;
        if i < 0 {
            Cell { i: 0, t: [0.0, 0.0], clamped: true }
        } else if i as usize + 2 > n {
            Cell { i: n - 2, t: [1.0, 0.0], clamped: true }
        } else {
            Cell { i: i as usize, t, clamped: false }
        }
    }
}

/// Polynomial product, truncated to `out.len()` coefficients.
#[inline]
pub fn poly_mul(a: &[f64], b: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            if i + j < out.len() {
                out[i + j] += x * y;
            }
        }
    }
}

/// Interpolation stencil whose corner weights are polynomials in `X`
/// (one linear factor per moving axis).
#[derive(Debug, Clone, Copy)]
pub struct PolyStencil {
    pub idx: [usize; 8],
    pub w: [[f64; 4]; 8],
    pub len: usize,
}

impl PolyStencil {
    pub fn new(shape: &Shape, y: usize, cells: &[Cell; 3]) -> Self {
        let mut st = PolyStencil { idx: [0; 8], w: [[0.0; 4]; 8], len: 0 };
        let choices = |c: &Cell| [(0usize, [1.0 - c.t[0], -c.t[1]]), (1usize, c.t)];
        let [cx, cp, cc] = cells;
        for (dx, wx) in choices(cx) {
            if wx == [0.0, 0.0] {
                continue;
            }
            for (dp, wp) in choices(cp) {
                if wp == [0.0, 0.0] {
                    continue;
                }
                let mut wxp = [0.0; 3];
                poly_mul(&wx, &wp, &mut wxp);
                for (dc, wc) in choices(cc) {
                    if wc == [0.0, 0.0] {
                        continue;
                    }
                    let mut w = [0.0; 4];
                    poly_mul(&wxp, &wc, &mut w);
                    st.idx[st.len] = shape.index(y, cx.i + dx, cp.i + dp, cc.i + dc);
                    st.w[st.len] = w;
                    st.len += 1;
                }
            }
        }
        st
    }

    /// The interpolated field as a polynomial in `X`.
    #[inline]
    pub fn field_poly(&self, field: &[f64]) -> [f64; 4] {
        let mut out = [0.0; 4];
        for k in 0..self.len {
            let v = field[self.idx[k]];
            for (o, w) in out.iter_mut().zip(&self.w[k]) {
                *o += v * w;
            }
        }
        out
    }
}
