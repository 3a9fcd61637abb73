//! The six limit Gaussian fields: pointwise kernels, covariances, and the
//! structural identities they satisfy.
//!
//! Everything here is in permuted coordinates (q sorted as the classifier
//! sorts it). A field Y(x) is the integral of a kernel f_x against white
//! noise on R^3, so Cov(Y(x), Y(y)) is the integral of f_x f_y.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta, beta_reg};

use crate::covariance::{laws, pairwise_sum};
use crate::error::{Error, Result};
use crate::geometry::{cal_h, Family};
use crate::laplace::{AxisPairing, Bilinear, ContProfile, EngineOptions, Estimate};
use crate::model::ModelParams;
use crate::quad::{geometric_panels, rule, Rule};

/// How one axis enters a limit kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AxisKind {
    /// Integrated over the side: the integral of the profile at t - u over t in (lo, hi].
    Box,
    /// 1(lo < u < hi) times the integral of the profile over R.
    Flat,
    /// (hi - lo) times the profile at u.
    Point,
}

pub fn axis_kinds(family: Family) -> [AxisKind; 3] {
    use AxisKind::*;
    match family {
        Family::Y1 => [Box, Flat, Flat],
        Family::Y2 => [Point, Box, Flat],
        Family::Y3 => [Point, Point, Box],
        Family::Y12 => [Box, Box, Flat],
        Family::Y23 => [Point, Box, Box],
        Family::Y0 => [Box, Box, Box],
    }
}

/// The kernel of a rectangular increment of a limit field over (lo, hi];
/// lo = 0 gives the field value at the corner hi.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitKernel {
    pub family: Family,
    /// Model parameters in permuted coordinates.
    pub params: ModelParams,
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl LimitKernel {
    /// The kernel of Y(x); fails outside the family's existence condition.
    pub fn new(family: Family, params: &ModelParams, x: [f64; 3]) -> Result<Self> {
        Self::rectangle(family, params, [0.0; 3], x)
    }

    pub fn rectangle(family: Family, params: &ModelParams, lo: [f64; 3], hi: [f64; 3]) -> Result<Self> {
        family.existence(params.q)?;
        if (0..3).any(|j| !(lo[j] >= 0.0 && hi[j] >= lo[j] && hi[j].is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "rectangle ({lo:?}, {hi:?}] must satisfy 0 <= lo <= hi"
            )));
        }
        Ok(LimitKernel {
            family,
            params: params.clone(),
            lo,
            hi,
        })
    }

    pub fn is_degenerate(&self) -> bool {
        (0..3).any(|j| self.hi[j] <= self.lo[j])
    }

    /// The axis-j factor as an engine profile.
    pub fn profile(&self, j: usize) -> ContProfile {
        let (lo, hi) = (self.lo[j], self.hi[j]);
        match axis_kinds(self.family)[j] {
            AxisKind::Box => ContProfile::Box { lo, hi },
            AxisKind::Flat => ContProfile::Flat { lo, hi },
            AxisKind::Point => ContProfile::Point { at: 0.0, scale: hi - lo },
        }
    }
}

/// Quadrature scheme for direct kernel integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Composite Gauss-Legendre on panels refined towards singular points,
    /// halved until two levels agree.
    #[default]
    Adaptive,
    /// The same initial panels without refinement.
    Tensor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureSpec {
    pub scheme: Scheme,
    /// Gauss-Legendre nodes per panel.
    pub nodes: usize,
    /// Decay exponent p of |f(u)|^2 ~ |u|^{-1-p} used by the tail map
    /// u = b (1 - v)^{-1/p}; 0 picks 1.
    pub tail_exponent: f64,
    /// Target relative error.
    pub target: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            scheme: Scheme::Adaptive,
            nodes: 16,
            tail_exponent: 0.0,
            target: 1e-4,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.nodes < 8 || self.nodes > 128 {
            return Err(Error::Config(format!("quadrature nodes {} outside [8, 128]", self.nodes)));
        }
        if !(self.target > 0.0 && self.target < 1.0) {
            return Err(Error::Config(format!("quadrature target {} outside (0, 1)", self.target)));
        }
        if !(self.tail_exponent >= 0.0) {
            return Err(Error::Config("tail exponent must be nonnegative".into()));
        }
        Ok(())
    }

    fn engine(&self) -> EngineOptions {
        EngineOptions {
            narrow_tol: (0.1 * self.target).min(1e-4),
            ..EngineOptions::default()
        }
    }
}

// ---------------------------------------------------------------------------
// direct kernel evaluation

/// One axis of the power integrand (A + c |y|^alpha)^{-nu}.
#[derive(Debug, Clone, Copy)]
struct PowAxis {
    c: f64,
    alpha: f64,
}

impl PowAxis {
    fn term(&self, y: f64) -> f64 {
        self.c * y.abs().powf(self.alpha)
    }

    /// Integral over R; needs nu > 1/alpha and a > 0.
    fn line(&self, a: f64, nu: f64) -> f64 {
        let s = 1.0 / self.alpha;
        2.0 * self.c.powf(-s) * a.powf(s - nu) * beta(s, nu - s) / self.alpha
    }

    /// Integral over [l, r], or None when no closed form applies.
    fn closed(&self, a: f64, nu: f64, l: f64, r: f64) -> Option<f64> {
        let s = 1.0 / self.alpha;
        if a == 0.0 {
            let e = 1.0 - self.alpha * nu;
            if e <= 0.0 {
                return Some(f64::INFINITY);
            }
            let prim = |y: f64| y.signum() * y.abs().powf(e) / e;
            return Some(self.c.powf(-nu) * (prim(r) - prim(l)));
        }
        let b = nu - s;
        if b <= 0.0 {
            return None;
        }
        let k = self.c.powf(-s) * a.powf(s - nu) * beta(s, b) / self.alpha;
        // lower(y) = I_x(s, b) and upper(y) = 1 - lower(y), x = c y^a / (A + c y^a)
        let parts = |y: f64| {
            let t = self.term(y);
            (beta_reg(s, b, t / (a + t)), beta_reg(b, s, a / (a + t)))
        };
        if l < 0.0 && r > 0.0 {
            return Some(k * (parts(l).0 + parts(r).0));
        }
        let (p, q) = if r <= 0.0 { (-r, -l) } else { (l, r) };
        if q - p <= 0.25 * p {
            return Some(crate::quad::gl16(p, q, |y| (a + self.term(y)).powf(-nu)));
        }
        let (lp, up) = parts(p);
        let (lq, uq) = parts(q);
        Some(k * if lp > 0.5 { up - uq } else { lq - lp })
    }
}

/// Relative target for nested quadrature.
#[derive(Debug, Clone, Copy)]
struct Quad<'a> {
    rule: &'a Rule,
    adaptive: bool,
    target: f64,
}

impl Quad<'_> {
    /// Integral over [l, r] of f, refined geometrically towards 0 when it lies in [l, r].
    fn integrate(&self, l: f64, r: f64, f: &(dyn Fn(f64) -> f64 + Sync)) -> f64 {
        if !(r > l) {
            return 0.0;
        }
        let mut panels = Vec::new();
        let mut push_side = |from: f64, to: f64| {
            let len = (to - from).abs();
            if len == 0.0 {
                return;
            }
            for (a, b) in geometric_panels(0.0, len, len * 1e-12, 4.0) {
                let sgn = (to - from).signum();
                let (x0, x1) = (from + sgn * a, from + sgn * b);
                panels.push((x0.min(x1), x0.max(x1)));
            }
        };
        if l < 0.0 && r > 0.0 {
            push_side(0.0, l);
            push_side(0.0, r);
        } else if r <= 0.0 {
            push_side(r, l);
        } else {
            push_side(l, r);
        }
        let est: Vec<f64> = panels.iter().map(|&(a, b)| self.rule.integrate(a, b, f)).collect();
        if !self.adaptive {
            return pairwise_sum(&est);
        }
        let total = est.iter().map(|v| v.abs()).sum::<f64>();
        let tol = self.target * total / panels.len() as f64;
        let refined: Vec<f64> = panels
            .iter()
            .zip(&est)
            .map(|(&(a, b), &whole)| self.refine(a, b, whole, tol, f, 0))
            .collect();
        pairwise_sum(&refined)
    }

    fn refine(&self, a: f64, b: f64, whole: f64, tol: f64, f: &(dyn Fn(f64) -> f64 + Sync), depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let left = self.rule.integrate(a, m, f);
        let right = self.rule.integrate(m, b, f);
        if (left + right - whole).abs() <= tol || depth >= 30 {
            return left + right;
        }
        self.refine(a, m, left, 0.5 * tol, f, depth + 1) + self.refine(m, b, right, 0.5 * tol, f, depth + 1)
    }
}

/// Integral over the boxes of (a + sum of c |y|^alpha)^{-nu}; the last box is
/// done in closed form when possible.
fn box_integral(boxes: &[(PowAxis, f64, f64)], a: f64, nu: f64, quad: &Quad) -> f64 {
    match boxes {
        [] => a.powf(-nu),
        [(ax, l, r)] => ax
            .closed(a, nu, *l, *r)
            .unwrap_or_else(|| quad.integrate(*l, *r, &|y| (a + ax.term(y)).powf(-nu))),
        [(ax, l, r), rest @ ..] => quad.integrate(*l, *r, &|y| box_integral(rest, a + ax.term(y), nu, quad)),
    }
}

/// f(u) of the kernel by direct integration over the inner variables.
pub fn kernel_eval(k: &LimitKernel, u: [f64; 3], spec: &QuadratureSpec) -> Result<f64> {
    spec.validate()?;
    if k.is_degenerate() {
        return Ok(0.0);
    }
    let p = &k.params;
    let alpha = p.alpha();
    let kinds = axis_kinds(k.family);
    let mut pref = 1.0;
    let mut a0 = 0.0;
    let mut nu = p.nu;
    let mut boxes = Vec::new();
    for j in 0..3 {
        let ax = PowAxis { c: p.c[j], alpha: alpha[j] };
        match kinds[j] {
            AxisKind::Point => {
                pref *= k.hi[j] - k.lo[j];
                a0 += ax.term(u[j]);
            }
            AxisKind::Flat => {
                if !(k.lo[j] < u[j] && u[j] < k.hi[j]) {
                    return Ok(0.0);
                }
            }
            AxisKind::Box => boxes.push((ax, k.lo[j] - u[j], k.hi[j] - u[j])),
        }
    }
    for j in 0..3 {
        if kinds[j] == AxisKind::Flat {
            let ax = PowAxis { c: p.c[j], alpha: alpha[j] };
            let s = 1.0 / ax.alpha;
            if nu <= s {
                return Err(Error::Existence {
                    family: k.family.name().into(),
                    condition: "the flat-axis integral diverges".into(),
                });
            }
            // (A + c|y|^alpha)^{-nu} integrates to line(A, nu), which is A^{s - nu} times a constant
            pref *= ax.line(1.0, nu);
            nu -= s;
        }
    }
    // the closed-form axis goes last: the one with the largest alpha
    boxes.sort_by(|x, y| x.0.alpha.partial_cmp(&y.0.alpha).unwrap());
    let quad = Quad {
        rule: rule(spec.nodes),
        adaptive: spec.scheme == Scheme::Adaptive,
        target: 0.1 * spec.target,
    };
    let v = pref * box_integral(&boxes, a0, nu, &quad);
    if !v.is_finite() {
        return Err(Error::Quadrature(format!("kernel value at {u:?} is not finite")));
    }
    Ok(v)
}

// ---------------------------------------------------------------------------
// covariances

fn check_pair(k1: &LimitKernel, k2: &LimitKernel) -> Result<()> {
    if k1.family != k2.family || k1.params != k2.params {
        return Err(Error::InvalidParameter("covariances need the same family and parameters".into()));
    }
    Ok(())
}

/// Cov(Y(k1), Y(k2)): the integral of f_1 f_2 over R^3, by the Laplace engine.
pub fn limit_covariance(k1: &LimitKernel, k2: &LimitKernel, spec: &QuadratureSpec) -> Result<Estimate> {
    check_pair(k1, k2)?;
    spec.validate()?;
    if k1.is_degenerate() || k2.is_degenerate() {
        return Ok(Estimate::exact(0.0));
    }
    let axes = [0, 1, 2].map(|j| AxisPairing::Continuum {
        a: k1.profile(j),
        b: k2.profile(j),
    });
    let est = Bilinear::new(k1.params.nu, laws(&k1.params), axes).evaluate(&spec.engine())?;
    if est.error > spec.target * est.value.abs() + 1e-300 {
        return Err(Error::Quadrature(format!(
            "covariance error {:.3e} above target {:e} of {:.6e}",
            est.error, spec.target, est.value
        )));
    }
    Ok(est)
}

pub fn limit_variance(k: &LimitKernel, spec: &QuadratureSpec) -> Result<Estimate> {
    limit_covariance(k, k, spec)
}

/// Nodes and weights over R for one outer axis: panels refined towards each
/// breakpoint, and power-law maps beyond the outermost ones.
fn outer_nodes(breaks: &[f64], spec: &QuadratureSpec) -> (Vec<f64>, Vec<f64>) {
    let r = rule(spec.nodes);
    let mut b: Vec<f64> = breaks.to_vec();
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.dedup_by(|x, y| (*x - *y).abs() < 1e-14);
    let (mut xs, mut ws) = (Vec::new(), Vec::new());
    let scale = b.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let finest = 1e-9 * scale;
    for w in b.windows(2) {
        for (l, h) in crate::quad::two_sided_panels(w[0], w[1], finest, 2.0) {
            r.push_panel(l, h, &mut xs, &mut ws);
        }
    }
    let p = if spec.tail_exponent > 0.0 { spec.tail_exponent } else { 1.0 };
    // beyond an end e: u = e +- scale ((1 - v)^{-1/p} - 1); first refine near e itself
    for (end, dir) in [(b[0], -1.0), (*b.last().unwrap(), 1.0)] {
        let near: Vec<(f64, f64)> = geometric_panels(0.0, scale, finest, 2.0);
        for (l, h) in near {
            let (a, b) = (end + dir * l, end + dir * h);
            r.push_panel(a.min(b), a.max(b), &mut xs, &mut ws);
        }
        let start = end + dir * scale;
        let mut v0 = 0.0;
        for _ in 0..40 {
            let v1 = 0.5 * (1.0 + v0);
            let (mut vx, mut vw) = (Vec::new(), Vec::new());
            r.push_panel(v0, v1, &mut vx, &mut vw);
            for (v, w) in vx.into_iter().zip(vw) {
                let g = (1.0 - v).powf(-1.0 / p);
                xs.push(start + dir * scale * (g - 1.0));
                ws.push(w * scale * g / (p * (1.0 - v)));
            }
            v0 = v1;
        }
    }
    (xs, ws)
}

/// Cov(Y(k1), Y(k2)) by tensor quadrature of f_1 f_2 over u with `kernel_eval`;
/// independent of the Laplace engine and practical when at most two axes are
/// outer-integrated with cheap kernels.
pub fn limit_covariance_direct(k1: &LimitKernel, k2: &LimitKernel, spec: &QuadratureSpec) -> Result<f64> {
    check_pair(k1, k2)?;
    spec.validate()?;
    if k1.is_degenerate() || k2.is_degenerate() {
        return Ok(0.0);
    }
    let kinds = axis_kinds(k1.family);
    let mut factor = 1.0;
    let mut grids: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for j in 0..3 {
        match kinds[j] {
            AxisKind::Flat => {
                let l = k1.lo[j].max(k2.lo[j]);
                let h = k1.hi[j].min(k2.hi[j]);
                if h <= l {
                    return Ok(0.0);
                }
                factor *= h - l;
                grids.push((vec![0.5 * (l + h)], vec![1.0]));
            }
            AxisKind::Point => grids.push(outer_nodes(&[0.0], spec)),
            AxisKind::Box => grids.push(outer_nodes(&[k1.lo[j], k1.hi[j], k2.lo[j], k2.hi[j]], spec)),
        }
    }
    let inner = QuadratureSpec { target: 0.1 * spec.target, ..*spec };
    let (g0, g1, g2) = (&grids[0], &grids[1], &grids[2]);
    let slabs: Result<Vec<f64>> = (0..g0.0.len())
        .into_par_iter()
        .map(|i| {
            let mut acc = Vec::with_capacity(g1.0.len());
            for (y, wy) in g1.0.iter().zip(&g1.1) {
                let mut row = 0.0;
                for (z, wz) in g2.0.iter().zip(&g2.1) {
                    let u = [g0.0[i], *y, *z];
                    let f = kernel_eval(k1, u, &inner)?;
                    if f == 0.0 {
                        continue;
                    }
                    let g = if k1 == k2 { f } else { kernel_eval(k2, u, &inner)? };
                    row += wz * f * g;
                }
                acc.push(wy * row);
            }
            Ok(g0.1[i] * pairwise_sum(&acc))
        })
        .collect();
    Ok(factor * pairwise_sum(&slabs?))
}

/// Covariance of two rectangular increments as one engine evaluation.
pub fn increment_covariance(k1: &LimitKernel, k2: &LimitKernel, spec: &QuadratureSpec) -> Result<Estimate> {
    limit_covariance(k1, k2, spec)
}

/// The same covariance through the alternating sums over the 8 corners of each rectangle.
pub fn increment_covariance_corners(k1: &LimitKernel, k2: &LimitKernel, spec: &QuadratureSpec) -> Result<Estimate> {
    check_pair(k1, k2)?;
    let corners = |k: &LimitKernel| -> Result<Vec<(f64, LimitKernel)>> {
        let mut out = Vec::with_capacity(8);
        for e in 0..8u32 {
            let x = [0, 1, 2].map(|j| if e >> j & 1 == 1 { k.hi[j] } else { k.lo[j] });
            let sign = if (3 - e.count_ones()) % 2 == 0 { 1.0 } else { -1.0 };
            out.push((sign, LimitKernel::new(k.family, &k.params, x)?));
        }
        Ok(out)
    };
    let (c1, c2) = (corners(k1)?, corners(k2)?);
    let mut terms = Vec::with_capacity(64);
    let mut err = 0.0;
    for (s1, a) in &c1 {
        for (s2, b) in &c2 {
            let e = limit_covariance(a, b, spec)?;
            terms.push(s1 * s2 * e.value);
            err += e.error;
        }
    }
    Ok(Estimate {
        value: pairwise_sum(&terms),
        error: err,
    })
}

/// The covariance of fractional Brownian sheet with Hurst triple h.
pub fn fbs_covariance(h: [f64; 3], x: [f64; 3], y: [f64; 3]) -> f64 {
    (0..3)
        .map(|j| {
            let e = 2.0 * h[j];
            x[j].powf(e) + y[j].powf(e) - (x[j] - y[j]).abs().powf(e)
        })
        .product::<f64>()
        / 8.0
}

/// The Hurst triple of the sheet that Y1, Y2 or Y3 is a multiple of.
pub fn fbs_hurst(family: Family, q: [f64; 3]) -> Option<[f64; 3]> {
    let ch = cal_h(q);
    match family {
        Family::Y1 => Some([ch[0], 0.5, 0.5]),
        Family::Y2 => Some([1.0, ch[1], 0.5]),
        Family::Y3 => Some([1.0, 1.0, ch[2]]),
        _ => None,
    }
}

/// Self-similarity of a family: for the dilation parameters `s` returns the
/// corner multipliers and the factor by which the variance changes.
///
/// `s` is (l1, l2, l3) for Y1, Y2, Y3, (l, m, _) for Y12 and Y23, (l, _, _) for Y0.
pub fn self_similarity(family: Family, q: [f64; 3], s: [f64; 3]) -> ([f64; 3], f64) {
    let ch = cal_h(q);
    let [a, b, c] = s;
    match family {
        Family::Y1 => (s, a.powf(2.0 * ch[0]) * b * c),
        Family::Y2 => (s, a * a * b.powf(2.0 * ch[1]) * c),
        Family::Y3 => (s, a * a * b * b * c.powf(2.0 * ch[2])),
        Family::Y12 => ([a.powf(1.0 / q[0]), a.powf(1.0 / q[1]), b], a.powf(2.0 * ch[3]) * b),
        Family::Y23 => ([a, b.powf(1.0 / q[1]), b.powf(1.0 / q[2])], a * a * b.powf(2.0 * ch[4])),
        Family::Y0 => (q.map(|qi| a.powf(1.0 / qi)), a.powf(2.0 * ch[5])),
    }
}

/// theta(t): the integral over u of A(u) A(t - u), where A is the axis-1 profile
/// of a with both transverse axes integrated out, computed by quadrature.
pub fn theta(params: &ModelParams, t: f64, spec: &QuadratureSpec) -> Result<Estimate> {
    Family::Y1.existence(params.q)?;
    spec.validate()?;
    let alpha = params.alpha();
    let ax = |j: usize| PowAxis {
        c: params.c[j],
        alpha: alpha[j],
    };
    let (a1, a2, a3) = (ax(0), ax(1), ax(2));
    let k3 = a3.line(1.0, params.nu);
    let nu2 = params.nu - 1.0 / alpha[2];
    let profile = move |s: f64| k3 * a2.line(a1.term(s), nu2);
    let t = t.abs().max(f64::MIN_POSITIVE);
    let g = move |u: f64| profile(u) * profile(t - u);
    // A(s) ~ |s|^b; the powers below make every piece smooth at its singular end
    let b = alpha[0] * (1.0 / alpha[1] + 1.0 / alpha[2] - params.nu);
    let m_near = 1.0 / (1.0 + b);
    let m_tail = 1.0 / (-1.0 - 2.0 * b);
    let run = |target: f64, adaptive: bool| {
        let quad = Quad {
            rule: rule(spec.nodes),
            adaptive,
            target,
        };
        let mapped = |h: f64, m: f64, f: &(dyn Fn(f64) -> f64 + Sync)| {
            quad.integrate(0.0, h.powf(1.0 / m), &|w| f(w.powf(m)) * m * w.powf(m - 1.0))
        };
        // (t/2, t] and (t, inf) mirror [0, t/2) and (-inf, 0) under u -> t - u
        let near = mapped(0.5 * t, m_near, &|u| g(u));
        let far = mapped(t, m_near, &|w| g(-w)) + mapped(1.0, m_tail, &|v| g(-t / v) * t / (v * v));
        2.0 * (near + far)
    };
    let adaptive = spec.scheme == Scheme::Adaptive;
    let value = run(spec.target, adaptive);
    let coarse = run((10.0 * spec.target).min(0.1), adaptive);
    Ok(Estimate {
        value,
        error: (value - coarse).abs(),
    })
}

/// Exponent e in theta(t) = theta(1) |t|^e.
pub fn theta_exponent(q: [f64; 3]) -> f64 {
    1.0 + 2.0 * q[0] * (1.0 / q[1] + 1.0 / q[2] - 1.0)
}

/// One row of a covariance table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovRow {
    pub family: Family,
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
    pub y1: f64,
    pub y2: f64,
    pub y3: f64,
    pub value: f64,
    pub est_error: f64,
}

/// Covariances of Y(x) and Y(y) for each pair.
pub fn covariance_table(
    family: Family,
    params: &ModelParams,
    pairs: &[([f64; 3], [f64; 3])],
    spec: &QuadratureSpec,
) -> Result<Vec<CovRow>> {
    pairs
        .iter()
        .map(|&(x, y)| {
            let e = limit_covariance(&LimitKernel::new(family, params, x)?, &LimitKernel::new(family, params, y)?, spec)?;
            Ok(CovRow {
                family,
                x1: x[0],
                x2: x[1],
                x3: x[2],
                y1: y[0],
                y2: y[1],
                y3: y[2],
                value: e.value,
                est_error: e.error,
            })
        })
        .collect()
}

pub fn write_cov_csv(path: &Path, rows: &[CovRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Config(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::Config(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fbs_examples() {
        assert!((fbs_covariance([0.3, 0.7, 1.0], [1.0; 3], [1.0; 3]) - 1.0).abs() < 1e-15);
        let v = fbs_covariance([0.8, 0.5, 0.5], [1.0; 3], [2.0, 1.0, 1.0]);
        assert!((v - 2f64.powf(1.6) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn closed_forms_match_quadrature() {
        let ax = PowAxis { c: 1.3, alpha: 0.9 };
        let q = Quad {
            rule: rule(16),
            adaptive: true,
            target: 1e-12,
        };
        for &(a, nu, l, r) in &[(0.7, 2.0, -1.0, 2.0), (0.2, 1.5, 0.5, 3.0), (2.0, 3.0, -4.0, -0.1), (1.0, 2.5, 40.0, 41.0)] {
            let want = q.integrate(l, r, &|y| (a + ax.term(y)).powf(-nu));
            let got = ax.closed(a, nu, l, r).unwrap();
            assert!((got - want).abs() < 1e-10 * want, "{got} {want}");
        }
        let want = q.integrate(-1e7, 1e7, &|y| (0.5 + ax.term(y)).powf(-3.0));
        assert!((ax.line(0.5, 3.0) - want).abs() < 1e-6 * want);
    }

    #[test]
    fn existence_gate() {
        let p = ModelParams::simple([2.0, 2.2, 2.4]).unwrap();
        assert!(LimitKernel::new(Family::Y1, &p, [1.0; 3]).is_err());
        assert!(LimitKernel::new(Family::Y2, &p, [1.0; 3]).is_ok());
        assert!(LimitKernel::new(Family::Y3, &p, [1.0; 3]).is_err());
    }
}
