//! Exact evaluation of bilinear sums and integrals of the coefficient kernel.
//!
//! With X = sum_j c_j |y_j|^{alpha_j} the identity
//! X^{-nu} = Gamma(nu)^{-1} * integral over w > 0 of w^{nu-1} exp(-w X) dw
//! turns every kernel into a product of one-axis exponential profiles. A sum
//! over s in Z^3 (or an integral over R^3) of a product of two kernels then
//! becomes, after w = e^z,
//!
//!   Gamma(nu)^{-2} * double integral of e^{nu (z + z')} prod_j M_j(z, z') dz dz'
//!
//! where M_j pairs the two one-axis profiles along axis j. The outer integral is
//! done with the trapezoid rule in (z, z'), which converges geometrically in
//! the step because the integrand is analytic in a strip. Large-z tails of
//! continuum profiles are summed with their exact narrow-profile limits.

mod law;
mod nodes;

pub use law::AxisLaw;

use ndarray::Array2;
use rayon::prelude::*;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use nodes::NodeSet;

/// A one-axis profile on the lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LatticeProfile {
    /// s -> exp(-w c |s - at|_+^alpha).
    Point(i64),
    /// s -> sum over t in [lo, hi] of exp(-w c |t - s|_+^alpha); empty when hi < lo.
    Box(i64, i64),
}

/// A one-axis profile on the real line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ContProfile {
    /// u -> scale * exp(-w c |u - at|^alpha).
    Point { at: f64, scale: f64 },
    /// u -> integral over t in (lo, hi) of exp(-w c |t - u|^alpha).
    Box { lo: f64, hi: f64 },
    /// u -> 1(lo < u < hi) * integral over R of exp(-w c |t|^alpha).
    Flat { lo: f64, hi: f64 },
}

/// How the two factors meet along one axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AxisPairing {
    /// Sum over s in Z (or over `restrict` only) of a(s) b(s).
    Lattice {
        a: LatticeProfile,
        b: LatticeProfile,
        restrict: Option<(i64, i64)>,
    },
    /// Integral over R of a(u) b(u).
    Continuum { a: ContProfile, b: ContProfile },
    /// Sum over s in Z of a(s) times the integral of b over the cell ((s-1)/pitch, s/pitch].
    Mixed { a: LatticeProfile, b: ContProfile, pitch: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Lattice,
    Continuum,
}

impl AxisPairing {
    fn kinds(&self) -> (Kind, Kind) {
        match self {
            AxisPairing::Lattice { .. } => (Kind::Lattice, Kind::Lattice),
            AxisPairing::Continuum { .. } => (Kind::Continuum, Kind::Continuum),
            AxisPairing::Mixed { .. } => (Kind::Lattice, Kind::Continuum),
        }
    }

    fn is_empty(&self) -> bool {
        let lat_empty = |p: &LatticeProfile| matches!(p, LatticeProfile::Box(lo, hi) if hi < lo);
        let cont_empty = |p: &ContProfile| match p {
            ContProfile::Point { scale, .. } => *scale == 0.0,
            ContProfile::Box { lo, hi } | ContProfile::Flat { lo, hi } => !(hi > lo),
        };
        match self {
            AxisPairing::Lattice { a, b, restrict } => {
                lat_empty(a) || lat_empty(b) || matches!(restrict, Some((lo, hi)) if hi < lo)
            }
            AxisPairing::Continuum { a, b } => cont_empty(a) || cont_empty(b),
            AxisPairing::Mixed { a, b, .. } => lat_empty(a) || cont_empty(b),
        }
    }
}

/// A product-form bilinear quantity over Z^3 or R^3.
#[derive(Debug, Clone, PartialEq)]
pub struct Bilinear {
    pub nu: f64,
    pub laws: [AxisLaw; 3],
    pub axes: [AxisPairing; 3],
}

/// Numerical settings of the engine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineOptions {
    /// Trapezoid step in log w.
    pub step: f64,
    /// Half width of the exact integer windows around lattice features.
    pub window: i64,
    /// Relative width at which a continuum profile counts as a point mass.
    pub narrow_tol: f64,
    /// Relative size of the neglected small-w edge.
    pub edge_tol: f64,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            step: 0.3,
            window: 64,
            narrow_tol: 1e-4,
            edge_tol: 1e-9,
        }
    }
}

/// A value with an error estimate.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { value, error: 0.0 }
    }
}

#[derive(Debug, Clone, Copy)]
struct Grid {
    k0: i64,
    n: usize,
    h: f64,
}

impl Grid {
    fn new(lo: f64, hi: f64, h: f64) -> Grid {
        let k0 = (lo / h).floor() as i64;
        let k1 = ((hi / h).ceil() as i64).max(k0 + 1);
        Grid {
            k0,
            n: (k1 - k0 + 1) as usize,
            h,
        }
    }

    fn z(&self, i: usize) -> f64 {
        (self.k0 + i as i64) as f64 * self.h
    }

    fn zmax(&self) -> f64 {
        self.z(self.n - 1)
    }

    fn ws(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.z(i).exp()).collect()
    }
}

/// Narrow-profile limit of a continuum factor.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Measure {
    Leb(f64, f64),
    Dirac(f64, f64),
}

fn measure_of(p: &ContProfile) -> Measure {
    match *p {
        ContProfile::Point { at, scale } => Measure::Dirac(at, scale),
        ContProfile::Box { lo, hi } | ContProfile::Flat { lo, hi } => Measure::Leb(lo, hi),
    }
}

fn overlap(a: f64, b: f64, c: f64, d: f64) -> f64 {
    (b.min(d) - a.max(c)).max(0.0)
}

fn dirac_in(at: f64, lo: f64, hi: f64) -> f64 {
    if at > lo && at < hi {
        1.0
    } else if at == lo || at == hi {
        0.5
    } else {
        0.0
    }
}

fn measure_pair(a: Measure, b: Measure) -> f64 {
    match (a, b) {
        (Measure::Leb(a0, a1), Measure::Leb(b0, b1)) => overlap(a0, a1, b0, b1),
        (Measure::Leb(lo, hi), Measure::Dirac(at, m)) | (Measure::Dirac(at, m), Measure::Leb(lo, hi)) => {
            m * dirac_in(at, lo, hi)
        }
        (Measure::Dirac(p, _), Measure::Dirac(r, _)) => {
            if p == r {
                f64::INFINITY
            } else {
                0.0
            }
        }
    }
}

pub(crate) fn cont_value(law: &AxisLaw, w: f64, p: &ContProfile, u: f64) -> f64 {
    match *p {
        ContProfile::Point { at, scale } => scale * law.cont(w, u - at),
        ContProfile::Box { lo, hi } => law.box_int(w, lo - u, hi - u),
        ContProfile::Flat { lo, hi } => law.total(w) * dirac_in(u, lo, hi),
    }
}

/// Integral of a continuum profile against a measure.
fn cont_against(law: &AxisLaw, w: f64, p: &ContProfile, m: Measure) -> f64 {
    match m {
        Measure::Dirac(at, mass) => mass * cont_value(law, w, p, at),
        Measure::Leb(lo, hi) => match *p {
            ContProfile::Point { at, scale } => scale * law.box_int(w, lo - at, hi - at),
            ContProfile::Box { lo: a, hi: b } => law.box_cell(w, a, b, lo, hi),
            ContProfile::Flat { lo: a, hi: b } => law.total(w) * overlap(a, b, lo, hi),
        },
    }
}

/// Cell integral of a continuum profile over ((x-1)/pitch, x/pitch).
pub(crate) fn cell_value(law: &AxisLaw, w: f64, p: &ContProfile, pitch: f64, x: f64) -> f64 {
    cont_against(law, w, p, Measure::Leb((x - 1.0) / pitch, x / pitch))
}

fn measure_of_cell(m: Measure, pitch: f64, x: f64) -> f64 {
    let (a, b) = ((x - 1.0) / pitch, x / pitch);
    match m {
        Measure::Leb(lo, hi) => overlap(a, b, lo, hi),
        Measure::Dirac(at, mass) => mass * dirac_in(at, a, b),
    }
}

fn breakpoints(p: &ContProfile) -> Vec<f64> {
    match *p {
        ContProfile::Point { at, .. } => vec![at],
        ContProfile::Box { lo, hi } | ContProfile::Flat { lo, hi } => vec![lo, hi],
    }
}

fn lattice_feature(p: &LatticeProfile) -> (i64, i64) {
    match *p {
        LatticeProfile::Point(t) => (t, t),
        LatticeProfile::Box(lo, hi) => (lo, hi),
    }
}

/// Per-axis result of pairing the two profile families on the grids.
struct AxisBlock {
    law: AxisLaw,
    m: Array2<f64>,
    /// Closed form for all (w, w'): scale product and law (continuum point pairs).
    exact: Option<(f64, AxisLaw)>,
    /// Narrow limit of factor b paired with a at each a-grid point.
    lam_b: Option<Vec<f64>>,
    /// Narrow limit of factor a paired with b at each b-grid point.
    lam_a: Option<Vec<f64>>,
    /// Pairing of the two narrow limits.
    corner: f64,
}

struct Setup<'a> {
    law: &'a AxisLaw,
    wa: &'a [f64],
    wb: &'a [f64],
    window: i64,
    reach_a: f64,
    reach_b: f64,
    finest: f64,
}

fn axis_block(pair: &AxisPairing, s: &Setup) -> Result<AxisBlock> {
    let law = s.law;
    match *pair {
        AxisPairing::Lattice { a, b, restrict } => {
            let feats = [lattice_feature(&a), lattice_feature(&b)];
            let ns = match restrict {
                Some((lo, hi)) => NodeSet::integers(lo, hi)?,
                None => NodeSet::lattice(&feats, s.window, s.reach_a.max(s.reach_b)),
            };
            let fa = nodes::lattice_matrix(law, s.wa, &a, &ns);
            let fb = nodes::lattice_matrix(law, s.wb, &b, &ns);
            Ok(AxisBlock {
                law: *law,
                m: ns.pair(&fa, &fb),
                exact: None,
                lam_b: None,
                lam_a: None,
                corner: 0.0,
            })
        }
        AxisPairing::Continuum { a, b } => {
            if let (ContProfile::Point { at: p, scale: sa }, ContProfile::Point { at: r, scale: sb }) = (a, b) {
                if p == r {
                    let mut m = Array2::zeros((s.wa.len(), s.wb.len()));
                    for (i, wa) in s.wa.iter().enumerate() {
                        for (j, wb) in s.wb.iter().enumerate() {
                            m[[i, j]] = sa * sb * law.total(wa + wb);
                        }
                    }
                    return Ok(AxisBlock {
                        law: *law,
                        m,
                        exact: Some((sa * sb, *law)),
                        lam_b: None,
                        lam_a: None,
                        corner: 0.0,
                    });
                }
            }
            let mut bps = breakpoints(&a);
            bps.extend(breakpoints(&b));
            let ns = NodeSet::continuum(&bps, s.finest, s.reach_a.max(s.reach_b));
            let fa = nodes::cont_matrix(law, s.wa, &a, &ns);
            let fb = nodes::cont_matrix(law, s.wb, &b, &ns);
            let (mu_a, mu_b) = (measure_of(&a), measure_of(&b));
            let lam_b = s.wa.par_iter().map(|&w| cont_against(law, w, &a, mu_b)).collect();
            let lam_a = s.wb.par_iter().map(|&w| cont_against(law, w, &b, mu_a)).collect();
            Ok(AxisBlock {
                law: *law,
                m: ns.pair(&fa, &fb),
                exact: None,
                lam_b: Some(lam_b),
                lam_a: Some(lam_a),
                corner: measure_pair(mu_a, mu_b),
            })
        }
        AxisPairing::Mixed { a, b, pitch } => {
            let mut feats = vec![lattice_feature(&a)];
            for p in breakpoints(&b) {
                let x = p * pitch;
                feats.push((x.floor() as i64 - 1, x.ceil() as i64 + 1));
            }
            let reach_b = s.reach_b * pitch;
            let ns = NodeSet::lattice(&feats, s.window, s.reach_a.max(reach_b));
            let fa = nodes::lattice_matrix(law, s.wa, &a, &ns);
            let fb = nodes::cell_matrix(law, s.wb, &b, pitch, &ns);
            let mu_b = measure_of(&b);
            let cells: Vec<f64> = ns.xs.iter().map(|&x| measure_of_cell(mu_b, pitch, x)).collect();
            let lam_b = (0..s.wa.len())
                .map(|i| {
                    let row = fa.row(i);
                    let mut acc = 0.0;
                    for n in 0..ns.xs.len() {
                        acc += ns.ws[n] * row[n] * cells[n];
                    }
                    acc
                })
                .collect();
            Ok(AxisBlock {
                law: *law,
                m: ns.pair(&fa, &fb),
                exact: None,
                lam_b: Some(lam_b),
                lam_a: None,
                corner: 0.0,
            })
        }
    }
}

/// Length scale below which a continuum profile must shrink before its
/// narrow limit is used.
fn feature_scale(pair: &AxisPairing) -> f64 {
    let mut pts = Vec::new();
    match pair {
        AxisPairing::Continuum { a, b } => {
            pts.extend(breakpoints(a));
            pts.extend(breakpoints(b));
        }
        AxisPairing::Mixed { b, .. } => pts.extend(breakpoints(b)),
        AxisPairing::Lattice { .. } => return f64::INFINITY,
    }
    let cell = match pair {
        AxisPairing::Mixed { pitch, .. } => 1.0 / pitch,
        _ => f64::INFINITY,
    };
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut best = f64::INFINITY;
    for w in pts.windows(2) {
        let d = w[1] - w[0];
        if d > 0.0 {
            best = best.min(d);
        }
    }
    if best.is_infinite() {
        cell.min(1.0)
    } else {
        best.min(cell)
    }
}

impl Bilinear {
    pub fn new(nu: f64, laws: [AxisLaw; 3], axes: [AxisPairing; 3]) -> Self {
        Bilinear { nu, laws, axes }
    }

    /// Evaluates the quantity.
    pub fn evaluate(&self, opt: &EngineOptions) -> Result<Estimate> {
        let kinds = self.axes[0].kinds();
        if self.axes.iter().any(|a| a.kinds() != kinds) {
            return Err(Error::InvalidParameter("axis pairings mix lattice and continuum sides".into()));
        }
        if self.axes.iter().any(|a| a.is_empty()) {
            return Ok(Estimate::exact(0.0));
        }
        let mut zlo = -24.0;
        for _attempt in 0..8 {
            match self.evaluate_range(opt, kinds, zlo)? {
                Outcome::Done(e) => return Ok(e),
                Outcome::Extend(z) => zlo = z,
            }
        }
        Err(Error::Quadrature("small-w edge did not decay".into()))
    }

    fn high_cut(&self, kind: Kind, opt: &EngineOptions) -> f64 {
        match kind {
            Kind::Lattice => {
                let csum: f64 = self.laws.iter().map(|l| l.c).sum();
                (60.0 / csum).ln().max(2.0)
            }
            Kind::Continuum => {
                let mut z: f64 = 4.0;
                for j in 0..3 {
                    let ell = feature_scale(&self.axes[j]);
                    let law = &self.laws[j];
                    z = z.max(law.alpha * (1.0 / (opt.narrow_tol * ell)).ln() - law.c.ln());
                }
                z
            }
        }
    }

    fn evaluate_range(&self, opt: &EngineOptions, kinds: (Kind, Kind), zlo: f64) -> Result<Outcome> {
        let h = opt.step;
        let ga = Grid::new(zlo, self.high_cut(kinds.0, opt), h);
        let gb = Grid::new(zlo, self.high_cut(kinds.1, opt), h);
        let wa = ga.ws();
        let wb = gb.ws();
        let nu = self.nu;

        let mut blocks = Vec::with_capacity(3);
        for j in 0..3 {
            let law = &self.laws[j];
            let reach = |w: f64| law.width(w) * 60f64.powf(1.0 / law.alpha);
            let finest = 1e-2 * law.width(gb.zmax().max(ga.zmax()).exp()).min(feature_scale(&self.axes[j]));
            let finest = finest.max(1e-300);
            let setup = Setup {
                law,
                wa: &wa,
                wb: &wb,
                window: opt.window,
                reach_a: reach(wa[0]),
                reach_b: reach(wb[0]),
                finest,
            };
            blocks.push(axis_block(&self.axes[j], &setup)?);
        }

        // grid part
        let ea: Vec<f64> = (0..ga.n).map(|i| (nu * ga.z(i)).exp()).collect();
        let eb: Vec<f64> = (0..gb.n).map(|i| (nu * gb.z(i)).exp()).collect();
        let mut rows = vec![0.0; ga.n];
        let mut cols = vec![0.0; gb.n];
        let mut grid_sum = 0.0;
        let mut grid_abs = 0.0;
        for i in 0..ga.n {
            let mut rs = 0.0;
            for l in 0..gb.n {
                let v = ea[i] * eb[l] * blocks[0].m[[i, l]] * blocks[1].m[[i, l]] * blocks[2].m[[i, l]];
                rs += v;
                cols[l] += v;
            }
            rows[i] = rs;
            grid_sum += rs;
            grid_abs += rs.abs();
        }

        // large-w tails of continuum sides
        let mut tail = 0.0;
        if kinds.1 == Kind::Continuum {
            tail += row_tail(&blocks, &ea, &wa, gb.zmax(), h, nu, Side::B);
        }
        if kinds.0 == Kind::Continuum {
            tail += row_tail(&blocks, &eb, &wb, ga.zmax(), h, nu, Side::A);
            tail += corner_tail(&blocks, ga.zmax(), h, nu);
        }

        let total = grid_sum + tail;
        // small-w edge: extrapolate the first rows and columns geometrically
        let edge = edge_estimate(&rows, h) + edge_estimate(&cols, h);
        if !total.is_finite() {
            return Err(Error::Quadrature("non-finite value".into()));
        }
        if edge.abs() > opt.edge_tol * (grid_abs + tail.abs()) {
            return Ok(Outcome::Extend(zlo - 16.0));
        }
        let norm = h * h / (gamma(nu) * gamma(nu));
        let value = (total + edge) * norm;
        let error = (edge.abs() + opt.narrow_tol * tail.abs()) * norm + 1e-9 * value.abs();
        Ok(Outcome::Done(Estimate { value, error }))
    }
}

enum Outcome {
    Done(Estimate),
    Extend(f64),
}

#[derive(Clone, Copy, PartialEq)]
enum Side {
    A,
    B,
}

fn edge_estimate(v: &[f64], h: f64) -> f64 {
    let n = v.len();
    let m = ((2.0 / h).ceil() as usize).min(n - 1).max(1);
    let v0 = v[0].abs();
    if v0 == 0.0 {
        return 0.0;
    }
    let v1 = v[m].abs();
    let rate = if v1 > v0 { ((v1 / v0).ln() / (m as f64 * h)).max(1e-3) } else { 1e-3 };
    // sum over the grid points beyond the edge of a geometric continuation
    let r = (-rate * h).exp();
    v[0] * r / (1.0 - r)
}

/// Sum over points beyond the top of the continuum grid of one side, paired
/// with every grid point of the other side.
fn row_tail(blocks: &[AxisBlock], e_other: &[f64], w_other: &[f64], ztop: f64, h: f64, nu: f64, side: Side) -> f64 {
    let mut lam = vec![1.0; w_other.len()];
    let mut exact = Vec::new();
    let mut coef = 1.0;
    let mut beta = 0.0;
    for b in blocks {
        if let Some(e) = b.exact {
            exact.push(e);
            continue;
        }
        let l = match side {
            Side::B => b.lam_b.as_ref(),
            Side::A => b.lam_a.as_ref(),
        };
        let Some(l) = l else { return 0.0 };
        for (x, y) in lam.iter_mut().zip(l) {
            *x *= y;
        }
        coef *= b.law.total(1.0);
        beta += 1.0 / b.law.alpha;
    }
    let a = nu - beta;
    if exact.is_empty() {
        let r = (a * h).exp();
        let s = coef * (a * ztop).exp() * r / (1.0 - r);
        return lam.iter().zip(e_other).map(|(l, e)| l * e).sum::<f64>() * s;
    }
    let mut acc = 0.0;
    for (k, wo) in w_other.iter().enumerate() {
        if lam[k] == 0.0 {
            continue;
        }
        let mut s = 0.0;
        let mut n = 1;
        loop {
            let z = ztop + n as f64 * h;
            let w = z.exp();
            let mut t = coef * (a * z).exp();
            for (scale, law) in &exact {
                t *= scale * law.total(w + wo);
            }
            s += t;
            if t <= 1e-17 * s.abs() || n > 10_000_000 {
                break;
            }
            n += 1;
        }
        acc += e_other[k] * lam[k] * s;
    }
    acc
}

/// Sum over pairs of points both beyond the top of the grid.
fn corner_tail(blocks: &[AxisBlock], ztop: f64, h: f64, nu: f64) -> f64 {
    let mut l = 1.0;
    let mut coef = 1.0;
    let mut beta = 0.0;
    let mut b_exp = 0.0;
    for b in blocks {
        match b.exact {
            Some((scale, law)) => {
                coef *= scale * law.total(1.0);
                b_exp += 1.0 / law.alpha;
            }
            None => {
                l *= b.corner;
                coef *= b.law.total(1.0).powi(2);
                beta += 1.0 / b.law.alpha;
            }
        }
    }
    if l == 0.0 {
        return 0.0;
    }
    let a = nu - beta;
    if b_exp == 0.0 {
        let r = (a * h).exp();
        let s = (a * ztop).exp() * r / (1.0 - r);
        return l * coef * s * s;
    }
    // n = n' + d with n' >= 1; the n' sum is geometric
    let rho = ((2.0 * a - b_exp) * h).exp();
    let inner = rho / (1.0 - rho);
    let mut total = 0.0;
    let mut d = 0usize;
    loop {
        let x = d as f64 * h;
        let t = (a * x).exp() * (1.0 + x.exp()).powf(-b_exp) * inner;
        let add = if d == 0 { t } else { 2.0 * t };
        total += add;
        if add <= 1e-17 * total || d > 10_000_000 {
            break;
        }
        d += 1;
    }
    l * coef * ((2.0 * a - b_exp) * ztop).exp() * total
}
