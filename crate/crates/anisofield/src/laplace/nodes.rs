//! One-axis node sets: sums over Z and integrals over R as weighted point sets.

use ndarray::Array2;
use rayon::prelude::*;

use super::{cell_value, cont_value, AxisLaw, ContProfile, LatticeProfile};
use crate::error::{Error, Result};
use crate::quad::{geometric_panels, rule, two_sided_panels};

const STRETCH_RATIO: f64 = 1.4;
const STRETCH_RULE: usize = 10;
const CONT_RATIO: f64 = 2.0;
const CONT_RULE: usize = 10;
/// Stencil half width for derivatives in the Euler-Maclaurin corrections.
const DELTA: f64 = 0.25;
/// Table length of exact prefix sums of the lattice profile.
const TABLE: usize = 256;
/// Boxes with at most this many terms are summed directly off the windows.
const DIRECT_BOX: i64 = 64;
const MAX_INTEGERS: i64 = 2_000_000;

#[derive(Debug, Clone, Default)]
pub(super) struct NodeSet {
    pub xs: Vec<f64>,
    pub ws: Vec<f64>,
    /// Node sits on an integer where the lattice profile must be exact.
    pub exact: Vec<bool>,
}

impl NodeSet {
    fn push(&mut self, x: f64, w: f64, exact: bool) {
        self.xs.push(x);
        self.ws.push(w);
        self.exact.push(exact);
    }

    fn push_integers(&mut self, lo: i64, hi: i64) {
        for t in lo..=hi {
            self.push(t as f64, 1.0, true);
        }
    }

    fn push_panels(&mut self, panels: &[(f64, f64)], n: usize) {
        let r = rule(n);
        for &(a, b) in panels {
            let (mut xs, mut ws) = (Vec::new(), Vec::new());
            r.push_panel(a, b, &mut xs, &mut ws);
            for (x, w) in xs.into_iter().zip(ws) {
                self.push(x, w, false);
            }
        }
    }

    /// Adds `k` times the central difference F'(x).
    fn push_deriv(&mut self, x: f64, k: f64) {
        self.push(x + DELTA, k / (2.0 * DELTA), false);
        self.push(x - DELTA, -k / (2.0 * DELTA), false);
    }

    /// Every integer in [lo, hi].
    pub fn integers(lo: i64, hi: i64) -> Result<NodeSet> {
        if hi - lo > MAX_INTEGERS {
            return Err(Error::Truncation(format!("{} lattice points on one axis", hi - lo + 1)));
        }
        let mut ns = NodeSet::default();
        ns.push_integers(lo, hi);
        Ok(ns)
    }

    /// Sum over Z: exact integers in windows around the key points, and
    /// Euler-Maclaurin quadrature over the smooth stretches between them.
    pub fn lattice(feats: &[(i64, i64)], window: i64, reach: f64) -> NodeSet {
        let mut keys: Vec<i64> = Vec::new();
        for &(lo, hi) in feats {
            keys.push(lo);
            keys.push(hi);
        }
        keys.sort_unstable();
        keys.dedup();
        let mut wins: Vec<(i64, i64)> = Vec::new();
        for k in keys {
            let (lo, hi) = (k - window, k + window);
            match wins.last_mut() {
                Some(last) if lo <= last.1 + window => last.1 = hi,
                _ => wins.push((lo, hi)),
            }
        }
        let first = 0.5 * window as f64;
        let mut ns = NodeSet::default();
        let corr = 1.0 / 24.0;
        // left outer stretch
        let b = wins[0].0 as f64 - 0.5;
        let mut left = geometric_panels(0.0, reach + window as f64, first, STRETCH_RATIO);
        left.reverse();
        let left: Vec<(f64, f64)> = left.into_iter().map(|(x, y)| (b - y, b - x)).collect();
        ns.push_panels(&left, STRETCH_RULE);
        ns.push_deriv(b, -corr);
        for (i, &(lo, hi)) in wins.iter().enumerate() {
            ns.push_integers(lo, hi);
            let a = hi as f64 + 0.5;
            if let Some(&(next, _)) = wins.get(i + 1) {
                let b = next as f64 - 0.5;
                ns.push_panels(&two_sided_panels(a, b, first, STRETCH_RATIO), STRETCH_RULE);
                ns.push_deriv(b, -corr);
                ns.push_deriv(a, corr);
            } else {
                ns.push_panels(&geometric_panels(a, a + reach + window as f64, first, STRETCH_RATIO), STRETCH_RULE);
                ns.push_deriv(a, corr);
            }
        }
        ns
    }

    /// Integral over R with panels refined towards every breakpoint.
    pub fn continuum(bps: &[f64], finest: f64, reach: f64) -> NodeSet {
        let mut pts: Vec<f64> = bps.to_vec();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        let mut ns = NodeSet::default();
        let lo = pts[0];
        let hi = *pts.last().unwrap();
        let mut left = geometric_panels(0.0, reach, finest, CONT_RATIO);
        left.reverse();
        let left: Vec<(f64, f64)> = left.into_iter().map(|(x, y)| (lo - y, lo - x)).collect();
        ns.push_panels(&left, CONT_RULE);
        for w in pts.windows(2) {
            ns.push_panels(&two_sided_panels(w[0], w[1], finest, CONT_RATIO), CONT_RULE);
        }
        ns.push_panels(&geometric_panels(hi, hi + reach, finest, CONT_RATIO), CONT_RULE);
        ns
    }

    /// M = FA diag(ws) FB^T.
    pub fn pair(&self, fa: &Array2<f64>, fb: &Array2<f64>) -> Array2<f64> {
        let mut fw = fa.clone();
        for mut row in fw.rows_mut() {
            for (v, w) in row.iter_mut().zip(&self.ws) {
                *v *= w;
            }
        }
        fw.dot(&fb.t())
    }
}

fn assemble(rows: Vec<Vec<f64>>, ncol: usize) -> Array2<f64> {
    let nrow = rows.len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((nrow, ncol), flat).expect("row lengths agree")
}

/// Exact sums of the lattice profile for one w.
struct LatRow<'a> {
    law: &'a AxisLaw,
    w: f64,
    /// prefix[n] = sum over k in [0, n] of lat(k).
    prefix: Vec<f64>,
    /// Sum over k >= 0.
    half: f64,
}

impl<'a> LatRow<'a> {
    fn new(law: &'a AxisLaw, w: f64) -> Self {
        let mut prefix = Vec::with_capacity(TABLE + 1);
        let mut acc = 0.0;
        for k in 0..=TABLE {
            acc += law.lat(w, k as f64);
            prefix.push(acc);
        }
        let half = acc + upper_tail(law, w, TABLE as f64 + 0.5);
        LatRow { law, w, prefix, half }
    }

    /// Sum over k in [0, n].
    fn upto(&self, n: i64) -> f64 {
        if n < 0 {
            0.0
        } else if (n as usize) <= TABLE {
            self.prefix[n as usize]
        } else {
            self.half - upper_tail(self.law, self.w, n as f64 + 0.5)
        }
    }

    /// Sum over k in [a, b].
    fn range(&self, a: i64, b: i64) -> f64 {
        if b < a {
            0.0
        } else if a >= 0 {
            self.upto(b) - self.upto(a - 1)
        } else if b < 0 {
            self.upto(-a) - self.upto(-b - 1)
        } else {
            self.upto(b) + self.upto(-a) - self.prefix[0]
        }
    }

    fn total(&self) -> f64 {
        2.0 * self.half - self.prefix[0]
    }

    fn exact(&self, p: &LatticeProfile, s: i64) -> f64 {
        match *p {
            LatticeProfile::Point(t) => self.law.lat(self.w, (s - t) as f64),
            LatticeProfile::Box(lo, hi) => self.range(lo - s, hi - s),
        }
    }

    /// Smooth continuation to a real point at least a window away from the
    /// profile's key points.
    fn smooth(&self, p: &LatticeProfile, x: f64) -> f64 {
        let (law, w) = (self.law, self.w);
        match *p {
            LatticeProfile::Point(t) => law.cont(w, x - t as f64),
            LatticeProfile::Box(lo, hi) => {
                let (a, b) = (lo as f64 - 0.5 - x, hi as f64 + 0.5 - x);
                if x > lo as f64 && x < hi as f64 {
                    let left = law.box_int(w, f64::NEG_INFINITY, a) - law.cont_deriv(w, a) / 24.0
                        + 7.0 * law.cont_deriv3(w, a) / 5760.0;
                    let right = upper_tail(law, w, b);
                    self.total() - left - right
                } else if hi - lo < DIRECT_BOX {
                    (lo..=hi).map(|t| law.cont(w, t as f64 - x)).sum()
                } else {
                    law.box_int(w, a, b) - (law.cont_deriv(w, b) - law.cont_deriv(w, a)) / 24.0
                        + 7.0 * (law.cont_deriv3(w, b) - law.cont_deriv3(w, a)) / 5760.0
                }
            }
        }
    }
}

/// Sum over integers k > y - 1/2 of the profile at k, for y well away from 0,
/// given the half-integer point y.
fn upper_tail(law: &AxisLaw, w: f64, y: f64) -> f64 {
    law.box_int(w, y, f64::INFINITY) + law.cont_deriv(w, y) / 24.0 - 7.0 * law.cont_deriv3(w, y) / 5760.0
}

pub(super) fn lattice_matrix(law: &AxisLaw, ws: &[f64], p: &LatticeProfile, ns: &NodeSet) -> Array2<f64> {
    let rows: Vec<Vec<f64>> = ws
        .par_iter()
        .map(|&w| {
            let lr = LatRow::new(law, w);
            ns.xs
                .iter()
                .zip(&ns.exact)
                .map(|(&x, &e)| if e { lr.exact(p, x as i64) } else { lr.smooth(p, x) })
                .collect()
        })
        .collect();
    assemble(rows, ns.xs.len())
}

pub(super) fn cont_matrix(law: &AxisLaw, ws: &[f64], p: &ContProfile, ns: &NodeSet) -> Array2<f64> {
    let rows: Vec<Vec<f64>> = ws
        .par_iter()
        .map(|&w| ns.xs.iter().map(|&u| cont_value(law, w, p, u)).collect())
        .collect();
    assemble(rows, ns.xs.len())
}

pub(super) fn cell_matrix(law: &AxisLaw, ws: &[f64], p: &ContProfile, pitch: f64, ns: &NodeSet) -> Array2<f64> {
    let rows: Vec<Vec<f64>> = ws
        .par_iter()
        .map(|&w| ns.xs.iter().map(|&x| cell_value(law, w, p, pitch, x)).collect())
        .collect();
    assemble(rows, ns.xs.len())
}
