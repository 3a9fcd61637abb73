//! One-axis exponential profiles exp(-w c |y|^alpha) and their integrals.

use statrs::function::gamma::{gamma, gamma_lr, gamma_ur};

use crate::quad::gl16;

/// Exponent and weight of one axis of the coefficient denominator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisLaw {
    pub alpha: f64,
    pub c: f64,
    /// Gamma(1 + 1/alpha).
    g1: f64,
    /// Gamma(2/alpha) / alpha.
    g2: f64,
}

impl AxisLaw {
    pub fn new(alpha: f64, c: f64) -> Self {
        AxisLaw {
            alpha,
            c,
            g1: gamma(1.0 + 1.0 / alpha),
            g2: gamma(2.0 / alpha) / alpha,
        }
    }

    /// Lattice profile exp(-w c |y|_+^alpha).
    #[inline]
    pub fn lat(&self, w: f64, y: f64) -> f64 {
        (-w * self.c * y.abs().max(1.0).powf(self.alpha)).exp()
    }

    /// Continuum profile exp(-w c |y|^alpha).
    #[inline]
    pub fn cont(&self, w: f64, y: f64) -> f64 {
        (-w * self.c * y.abs().powf(self.alpha)).exp()
    }

    /// d/dy of the continuum profile.
    #[inline]
    pub fn cont_deriv(&self, w: f64, y: f64) -> f64 {
        let a = y.abs();
        if a == 0.0 {
            return 0.0;
        }
        let k = w * self.c;
        -k * self.alpha * a.powf(self.alpha - 1.0) * y.signum() * (-k * a.powf(self.alpha)).exp()
    }

    /// Third derivative of the continuum profile (y != 0).
    pub fn cont_deriv3(&self, w: f64, y: f64) -> f64 {
        if y < 0.0 {
            return -self.cont_deriv3(w, -y);
        }
        if y == 0.0 {
            return 0.0;
        }
        let (k, a) = (w * self.c, self.alpha);
        let g1 = k * a * y.powf(a - 1.0);
        let g2 = k * a * (a - 1.0) * y.powf(a - 2.0);
        let g3 = k * a * (a - 1.0) * (a - 2.0) * y.powf(a - 3.0);
        (-g1 * g1 * g1 + 3.0 * g1 * g2 - g3) * self.cont(w, y)
    }

    /// Profile width (w c)^{-1/alpha}.
    pub fn width(&self, w: f64) -> f64 {
        (w * self.c).powf(-1.0 / self.alpha)
    }

    /// Integral of the continuum profile over R.
    pub fn total(&self, w: f64) -> f64 {
        2.0 * self.g1 * self.width(w)
    }

    /// Integral of the continuum profile over [a, b].
    pub fn box_int(&self, w: f64, a: f64, b: f64) -> f64 {
        if !(b > a) {
            return 0.0;
        }
        if a < 0.0 && b > 0.0 {
            return self.half_int(w, 0.0, -a) + self.half_int(w, 0.0, b);
        }
        if b <= 0.0 {
            self.half_int(w, -b, -a)
        } else {
            self.half_int(w, a, b)
        }
    }

    /// Integral over [a, b] with 0 <= a < b (b may be infinite).
    fn half_int(&self, w: f64, a: f64, b: f64) -> f64 {
        let k = w * self.c;
        if b.is_finite() && (b - a) <= 0.25 * a {
            return gl16(a, b, |y| (-k * y.powf(self.alpha)).exp());
        }
        let s = 1.0 / self.alpha;
        let xa = k * a.powf(self.alpha);
        let xb = if b.is_finite() { k * b.powf(self.alpha) } else { f64::INFINITY };
        let scale = self.g1 * k.powf(-s);
        scale * reg_gamma_diff(s, xa, xb)
    }

    /// First moment: integral of y exp(-w c y^alpha) over [a, b], 0 <= a < b.
    fn half_moment(&self, w: f64, a: f64, b: f64) -> f64 {
        let k = w * self.c;
        if b.is_finite() && (b - a) <= 0.25 * a {
            return gl16(a, b, |y| y * (-k * y.powf(self.alpha)).exp());
        }
        let s2 = 2.0 / self.alpha;
        let xa = k * a.powf(self.alpha);
        let xb = if b.is_finite() { k * b.powf(self.alpha) } else { f64::INFINITY };
        self.g2 * k.powf(-s2) * reg_gamma_diff(s2, xa, xb)
    }

    /// Integral over [a, b] of the continuum profile times the linear function
    /// taking the values va at a and vb at b.
    pub fn lin_int(&self, w: f64, a: f64, b: f64, va: f64, vb: f64) -> f64 {
        if !(b > a) {
            return 0.0;
        }
        if a < 0.0 && b > 0.0 {
            let v0 = va + (vb - va) * (-a) / (b - a);
            return self.lin_int(w, a, 0.0, va, v0) + self.lin_int(w, 0.0, b, v0, vb);
        }
        if va == vb {
            return va * self.box_int(w, a, b);
        }
        // reflect onto the positive half line
        let (a, b, va, vb) = if b <= 0.0 { (-b, -a, vb, va) } else { (a, b, va, vb) };
        let slope = (vb - va) / (b - a);
        let icpt = va - slope * a;
        if (b - a) <= 0.25 * a {
            let k = w * self.c;
            return gl16(a, b, |y| (icpt + slope * y) * (-k * y.powf(self.alpha)).exp());
        }
        icpt * self.half_int(w, a, b) + slope * self.half_moment(w, a, b)
    }

    /// Integral over the cell (a, b) of the continuum box profile
    /// u -> integral over (lo, hi) of exp(-w c |t - u|^alpha) dt.
    pub fn box_cell(&self, w: f64, lo: f64, hi: f64, a: f64, b: f64) -> f64 {
        if !(hi > lo) || !(b > a) {
            return 0.0;
        }
        // y = t - u; weight(y) = |(a, b) ∩ (lo - y, hi - y)|, a trapezoid
        let l1 = b - a;
        let l2 = hi - lo;
        let y0 = lo - b;
        let y3 = hi - a;
        let y1 = y0 + l1.min(l2);
        let y2 = y3 - l1.min(l2);
        let top = l1.min(l2);
        self.lin_int(w, y0, y1, 0.0, top) + top * self.box_int(w, y1, y2) + self.lin_int(w, y2, y3, top, 0.0)
    }
}

/// P(s, xb) - P(s, xa) for xa < xb, computed without cancellation.
fn reg_gamma_diff(s: f64, xa: f64, xb: f64) -> f64 {
    let p = |x: f64| if x <= 0.0 { 0.0 } else if x.is_infinite() { 1.0 } else { gamma_lr(s, x) };
    let q = |x: f64| if x <= 0.0 { 1.0 } else if x.is_infinite() { 0.0 } else { gamma_ur(s, x) };
    if xa > 1.0 + s {
        q(xa) - q(xb)
    } else {
        p(xb) - p(xa)
    }
}
