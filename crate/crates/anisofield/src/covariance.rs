//! Covariances of the linear field and sums of them over boxes, axes and planes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laplace::{AxisLaw, AxisPairing, Bilinear, EngineOptions, Estimate, LatticeProfile};
use crate::model::{rho, GMode, LatticePoint, ModelParams};

/// A box of lattice points with inclusive corners; empty when any hi < lo.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeBox {
    pub lo: [i64; 3],
    pub hi: [i64; 3],
}

impl LatticeBox {
    pub fn new(lo: [i64; 3], hi: [i64; 3]) -> Self {
        LatticeBox { lo, hi }
    }

    /// The rectangle [1, n_1] x [1, n_2] x [1, n_3].
    pub fn from_extents(n: [i64; 3]) -> Self {
        LatticeBox { lo: [1; 3], hi: n }
    }

    pub fn is_empty(&self) -> bool {
        (0..3).any(|j| self.hi[j] < self.lo[j])
    }

    pub fn len(&self) -> u64 {
        if self.is_empty() {
            0
        } else {
            (0..3).map(|j| (self.hi[j] - self.lo[j] + 1) as u64).product()
        }
    }
}

pub fn laws(params: &ModelParams) -> [AxisLaw; 3] {
    let a = params.alpha();
    [0, 1, 2].map(|j| AxisLaw::new(a[j], params.c[j]))
}

fn require_plain(params: &ModelParams) -> Result<()> {
    if params.g.is_constant_one() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "exact lattice sums need g = constant-one, got {}",
            params.g
        )))
    }
}

/// Evaluates a product-form lattice bilinear sum for the g = 1 model.
pub fn lattice_sum(params: &ModelParams, axes: [AxisPairing; 3]) -> Result<Estimate> {
    require_plain(params)?;
    Bilinear::new(params.nu, laws(params), axes).evaluate(&EngineOptions::default())
}

fn points(t: [i64; 3], restrict: Option<(i64, i64)>) -> [AxisPairing; 3] {
    [0, 1, 2].map(|j| AxisPairing::Lattice {
        a: LatticeProfile::Point(t[j]),
        b: LatticeProfile::Point(0),
        restrict,
    })
}

/// r(t) = sum over all s of a(t - s) a(s) for g = 1.
pub fn covariance_full(params: &ModelParams, t: LatticePoint) -> Result<Estimate> {
    lattice_sum(params, points(t.t, None))
}

/// A covariance split into the sum over the cube |s_i| <= radius and the
/// remainder outside it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceEstimate {
    /// Sum over the full lattice.
    pub value: f64,
    /// Sum over the cube |s_i| <= radius.
    pub truncated: f64,
    /// value - truncated.
    pub tail: f64,
    /// Numerical error of `value`.
    pub error: f64,
    /// Cauchy-Schwarz bound on |tail| from the square mass outside the cube.
    pub tail_bound: f64,
    pub radius: u64,
}

impl CovarianceEstimate {
    /// Fails when the truncated sum alone misses the target relative accuracy.
    pub fn require_tail(&self, rel: f64) -> Result<&Self> {
        if self.tail_bound <= rel * self.value.abs() {
            Ok(self)
        } else {
            Err(Error::Truncation(format!(
                "radius {} leaves a tail bound {:.3e} above {:.1e} of {:.6e}",
                self.radius, self.tail_bound, rel, self.value
            )))
        }
    }
}

/// Sum over the cube |s_i| <= radius of a(t - s) a(s), by direct loops.
pub fn covariance_direct(params: &ModelParams, t: LatticePoint, radius: u64) -> f64 {
    let r = radius as i64;
    let slabs: Vec<f64> = (-r..=r)
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            for j in -r..=r {
                for k in -r..=r {
                    let s = LatticePoint::new(i, j, k);
                    let d = LatticePoint::new(t.t[0] - i, t.t[1] - j, t.t[2] - k);
                    acc += params.coefficient(d) * params.coefficient(s);
                }
            }
            acc
        })
        .collect();
    pairwise_sum(&slabs)
}

/// Sum in a fixed binary tree order.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n => pairwise_sum(&v[..n / 2]) + pairwise_sum(&v[n / 2..]),
    }
}

/// Square mass sum over s outside the cube |s_i| <= radius of a(s)^2, and the total.
fn outside_mass(params: &ModelParams, radius: u64) -> Result<(f64, f64)> {
    let r = radius as i64;
    let full = lattice_sum(params, points([0; 3], None))?.value;
    let inner = lattice_sum(params, points([0; 3], Some((-r, r))))?.value;
    Ok(((full - inner).max(0.0), full))
}

/// The covariance r(t) = E X(t) X(0) with its split at the given radius.
pub fn covariance_exact(params: &ModelParams, t: LatticePoint, radius: u64) -> Result<CovarianceEstimate> {
    if radius < 1 {
        return Err(Error::InvalidParameter("radius must be at least 1".into()));
    }
    let r = radius as i64;
    match &params.g {
        GMode::Impulse => {
            let v = if t == LatticePoint::ORIGIN { 1.0 } else { 0.0 };
            Ok(CovarianceEstimate {
                value: v,
                truncated: v,
                tail: 0.0,
                error: 0.0,
                tail_bound: 0.0,
                radius,
            })
        }
        GMode::ConstantOne => {
            let full = lattice_sum(params, points(t.t, None))?;
            let trunc = lattice_sum(params, points(t.t, Some((-r, r))))?;
            let (out, r0) = outside_mass(params, radius)?;
            Ok(CovarianceEstimate {
                value: full.value,
                truncated: trunc.value,
                tail: full.value - trunc.value,
                error: full.error + trunc.error,
                tail_bound: (out * r0).sqrt(),
                radius,
            })
        }
        g => {
            // the modulation only changes finitely many terms materially, so
            // the remainder is taken from the g = 1 model
            let plain = params.with_g(GMode::ConstantOne);
            let trunc = covariance_direct(params, t, radius);
            let pf = lattice_sum(&plain, points(t.t, None))?;
            let pt = lattice_sum(&plain, points(t.t, Some((-r, r))))?;
            let tail = pf.value - pt.value;
            let (out, r0) = outside_mass(&plain, radius)?;
            let b = g.bound();
            let settled = g.settle_radius(1e-12).map_or(false, |s| s <= radius as f64);
            let tail_err = if settled { 1e-12 * tail.abs() } else { (b + 1.0) * tail.abs() };
            Ok(CovarianceEstimate {
                value: trunc + tail,
                truncated: trunc,
                tail,
                error: pf.error + pt.error + tail_err,
                tail_bound: b * b * (out * r0).sqrt(),
                radius,
            })
        }
    }
}

/// Square mass of a outside the box |s_i| <= radii[i], and the total square mass.
pub fn outside_mass_radii(params: &ModelParams, radii: [u64; 3]) -> Result<(f64, f64)> {
    if params.g == GMode::Impulse {
        return Ok((0.0, 1.0));
    }
    let plain = params.with_g(GMode::ConstantOne);
    let full = lattice_sum(&plain, points([0; 3], None))?.value;
    let axes = [0, 1, 2].map(|j| AxisPairing::Lattice {
        a: LatticeProfile::Point(0),
        b: LatticeProfile::Point(0),
        restrict: Some((-(radii[j] as i64), radii[j] as i64)),
    });
    let inner = lattice_sum(&plain, axes)?.value;
    Ok(((full - inner).max(0.0), full))
}

/// Per-axis radii of a level set of rho, balanced so that radii[i]^{q_i} agree.
pub fn radii_at_level(params: &ModelParams, level: f64) -> [u64; 3] {
    params.q.map(|q| level.powf(1.0 / q).ceil().max(1.0) as u64)
}

/// Smallest balanced radii (to within 10% in the rho level) leaving at most
/// `frac` of the square mass of a outside.
pub fn radii_for(params: &ModelParams, frac: f64) -> Result<[u64; 3]> {
    if params.g == GMode::Impulse {
        return Ok([1; 3]);
    }
    let ok = |level: f64| -> Result<bool> {
        let (out, total) = outside_mass_radii(params, radii_at_level(params, level))?;
        Ok(out <= frac * total)
    };
    let mut hi = 1.0f64;
    while !ok(hi)? {
        hi *= 2.0;
        if hi > 1e15 {
            return Err(Error::Truncation(format!("no radii reach tail fraction {frac}")));
        }
    }
    let mut lo = hi / 2.0;
    while hi / lo > 1.1 {
        let mid = (lo * hi).sqrt();
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(radii_at_level(params, hi))
}

/// Sum over the box |s_i| <= radii[i] of a(t - s) a(s) (g = 1).
pub fn covariance_truncated(params: &ModelParams, t: LatticePoint, radii: [u64; 3]) -> Result<Estimate> {
    let axes = [0, 1, 2].map(|j| AxisPairing::Lattice {
        a: LatticeProfile::Point(t.t[j]),
        b: LatticeProfile::Point(0),
        restrict: Some((-(radii[j] as i64), radii[j] as i64)),
    });
    lattice_sum(params, axes)
}

/// r(t) rho(t)^{2 - Q}, bounded above and below for large |t|.
pub fn envelope_ratio(params: &ModelParams, t: LatticePoint, radius: u64) -> Result<f64> {
    if t == LatticePoint::ORIGIN {
        return Err(Error::InvalidParameter("envelope ratio needs t != 0".into()));
    }
    let c = covariance_exact(params, t, radius)?;
    Ok(c.value * rho(params, t.as_real()).powf(2.0 - params.q_sum()))
}

/// Smallest radius (to within 10%) whose cube holds all but `frac` of sum a(s)^2.
pub fn radius_for(params: &ModelParams, frac: f64) -> Result<u64> {
    let plain = params.with_g(GMode::ConstantOne);
    let ok = |r: u64| -> Result<bool> {
        let (out, total) = outside_mass(&plain, r)?;
        Ok(out <= frac * total)
    };
    let mut hi = 1u64;
    while !ok(hi)? {
        hi *= 2;
        if hi > 1 << 20 {
            return Err(Error::Truncation(format!("no radius up to 2^20 reaches tail fraction {frac}")));
        }
    }
    let mut lo = hi / 2;
    while hi - lo > (lo / 10).max(1) {
        let mid = (lo + hi) / 2;
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

fn boxes(k1: &LatticeBox, k2: &LatticeBox, restrict: Option<LatticeBox>) -> [AxisPairing; 3] {
    [0, 1, 2].map(|j| AxisPairing::Lattice {
        a: LatticeProfile::Box(k1.lo[j], k1.hi[j]),
        b: LatticeProfile::Box(k2.lo[j], k2.hi[j]),
        restrict: restrict.map(|r| (r.lo[j], r.hi[j])),
    })
}

/// Cov(S_K1, S_K2) = sum over s of A_1(s) A_2(s) with A_i(s) = sum over t in K_i of a(t - s).
pub fn box_covariance(params: &ModelParams, k1: &LatticeBox, k2: &LatticeBox) -> Result<Estimate> {
    if params.g == GMode::Impulse {
        return Ok(Estimate::exact(overlap_count(k1, k2) as f64));
    }
    lattice_sum(params, boxes(k1, k2, None))
}

/// The same sum restricted to s in `support`.
pub fn box_covariance_within(params: &ModelParams, k1: &LatticeBox, k2: &LatticeBox, support: &LatticeBox) -> Result<Estimate> {
    if params.g == GMode::Impulse {
        let inter = LatticeBox::new(
            [0, 1, 2].map(|j| k1.lo[j].max(k2.lo[j]).max(support.lo[j])),
            [0, 1, 2].map(|j| k1.hi[j].min(k2.hi[j]).min(support.hi[j])),
        );
        return Ok(Estimate::exact(inter.len() as f64));
    }
    lattice_sum(params, boxes(k1, k2, Some(*support)))
}

fn overlap_count(k1: &LatticeBox, k2: &LatticeBox) -> u64 {
    LatticeBox::new(
        [0, 1, 2].map(|j| k1.lo[j].max(k2.lo[j])),
        [0, 1, 2].map(|j| k1.hi[j].min(k2.hi[j])),
    )
    .len()
}

/// sum over |t| <= n of r(t e_axis).
pub fn axis_partial_sum(params: &ModelParams, axis: usize, n: i64) -> Result<Estimate> {
    let mut ax = points([0; 3], None);
    ax[axis] = AxisPairing::Lattice {
        a: LatticeProfile::Box(-n, n),
        b: LatticeProfile::Point(0),
        restrict: None,
    };
    lattice_sum(params, ax)
}

/// sum over |t_i|, |t_j| <= n of r with the remaining coordinate 0.
pub fn plane_partial_sum(params: &ModelParams, axes: (usize, usize), n: i64) -> Result<Estimate> {
    let mut ax = points([0; 3], None);
    for j in [axes.0, axes.1] {
        ax[j] = AxisPairing::Lattice {
            a: LatticeProfile::Box(-n, n),
            b: LatticeProfile::Point(0),
            restrict: None,
        };
    }
    lattice_sum(params, ax)
}
