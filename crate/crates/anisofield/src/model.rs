//! The linear field model: coefficients a(t), the shape function rho, and
//! admissibility of the tail exponents.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exclusion margin around Q = 1 and Q = 2.
pub const EPS_Q: f64 = 1e-6;

/// A point of the integer lattice Z^3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticePoint {
    pub t: [i64; 3],
}

impl LatticePoint {
    pub const ORIGIN: LatticePoint = LatticePoint { t: [0, 0, 0] };

    pub fn new(t1: i64, t2: i64, t3: i64) -> Self {
        LatticePoint { t: [t1, t2, t3] }
    }

    pub fn neg(self) -> Self {
        LatticePoint::new(-self.t[0], -self.t[1], -self.t[2])
    }

    pub fn as_real(self) -> [f64; 3] {
        [self.t[0] as f64, self.t[1] as f64, self.t[2] as f64]
    }
}

impl From<[i64; 3]> for LatticePoint {
    fn from(t: [i64; 3]) -> Self {
        LatticePoint { t }
    }
}

/// User supplied modulation g of the coefficients.
pub type GFn = Arc<dyn Fn(LatticePoint) -> f64 + Send + Sync>;

/// The modulation factor g(t) in the numerator of the coefficient.
///
/// Every mode except `Impulse` tends to 1 at infinity. `Impulse` keeps only
/// the origin and exists to exercise the pipeline on white noise.
#[derive(Clone)]
pub enum GMode {
    ConstantOne,
    /// g(t) = 1 + amp * exp(-|t|^2 / scale^2).
    RadialBump { amp: f64, scale: f64 },
    /// g(t) = 1 at the origin and 0 elsewhere.
    Impulse,
    /// Arbitrary bounded g with limit 1; the limit is sampled, not verified.
    Custom { f: GFn, bound: f64 },
}

impl GMode {
    pub fn value(&self, t: LatticePoint) -> f64 {
        match self {
            GMode::ConstantOne => 1.0,
            GMode::RadialBump { amp, scale } => {
                let r2: f64 = t.t.iter().map(|&v| (v as f64) * (v as f64)).sum();
                1.0 + amp * (-r2 / (scale * scale)).exp()
            }
            GMode::Impulse => {
                if t == LatticePoint::ORIGIN {
                    1.0
                } else {
                    0.0
                }
            }
            GMode::Custom { f, .. } => f(t),
        }
    }

    pub fn is_constant_one(&self) -> bool {
        matches!(self, GMode::ConstantOne)
    }

    /// True when g tends to 1, so that far tails behave like the g = 1 model.
    pub fn tends_to_one(&self) -> bool {
        !matches!(self, GMode::Impulse)
    }

    /// Radius beyond which g differs from 1 by less than `tol` (None: never).
    pub fn settle_radius(&self, tol: f64) -> Option<f64> {
        match self {
            GMode::ConstantOne => Some(0.0),
            GMode::RadialBump { amp, scale } => {
                if amp.abs() <= tol {
                    Some(0.0)
                } else {
                    Some(scale * (amp.abs() / tol).ln().sqrt())
                }
            }
            GMode::Impulse => Some(0.0),
            GMode::Custom { .. } => None,
        }
    }

    pub fn bound(&self) -> f64 {
        match self {
            GMode::ConstantOne | GMode::Impulse => 1.0,
            GMode::RadialBump { amp, .. } => 1.0 + amp.abs(),
            GMode::Custom { bound, .. } => *bound,
        }
    }
}

impl fmt::Debug for GMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl PartialEq for GMode {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (GMode::Custom { f: a, .. }, GMode::Custom { f: b, .. }) => Arc::ptr_eq(a, b),
            _ => self.to_string() == other.to_string(),
        }
    }
}

impl fmt::Display for GMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GMode::ConstantOne => write!(f, "constant-one"),
            GMode::RadialBump { amp, scale } => write!(f, "radial-bump:{}:{}", amp, scale),
            GMode::Impulse => write!(f, "impulse"),
            GMode::Custom { bound, .. } => write!(f, "custom(bound={})", bound),
        }
    }
}

impl FromStr for GMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "constant-one" {
            return Ok(GMode::ConstantOne);
        }
        if s == "impulse" {
            return Ok(GMode::Impulse);
        }
        if let Some(rest) = s.strip_prefix("radial-bump:") {
            let mut it = rest.split(':');
            let amp = it.next().and_then(|v| v.parse::<f64>().ok());
            let scale = it.next().and_then(|v| v.parse::<f64>().ok());
            if let (Some(amp), Some(scale), None) = (amp, scale, it.next()) {
                if amp.is_finite() && scale.is_finite() && scale > 0.0 {
                    return Ok(GMode::RadialBump { amp, scale });
                }
            }
        }
        Err(Error::Config(format!(
            "unknown g_mode '{}' (expected constant-one, radial-bump:AMP:SCALE or impulse)",
            s
        )))
    }
}

/// The law of the field: tail exponents q, weights c, shape nu and g.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelConfig", into = "ModelConfig")]
pub struct ModelParams {
    pub q: [f64; 3],
    pub c: [f64; 3],
    pub nu: f64,
    pub g: GMode,
}

/// Flat key-value form of [`ModelParams`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    #[serde(default = "one")]
    pub c1: f64,
    #[serde(default = "one")]
    pub c2: f64,
    #[serde(default = "one")]
    pub c3: f64,
    #[serde(default = "one")]
    pub nu: f64,
    #[serde(default = "default_g")]
    pub g_mode: String,
}

fn one() -> f64 {
    1.0
}

fn default_g() -> String {
    "constant-one".to_string()
}

impl TryFrom<ModelConfig> for ModelParams {
    type Error = Error;

    fn try_from(c: ModelConfig) -> Result<Self> {
        let g: GMode = c.g_mode.parse()?;
        ModelParams::new([c.q1, c.q2, c.q3], [c.c1, c.c2, c.c3], c.nu, g)
    }
}

impl From<ModelParams> for ModelConfig {
    fn from(p: ModelParams) -> Self {
        ModelConfig {
            q1: p.q[0],
            q2: p.q[1],
            q3: p.q[2],
            c1: p.c[0],
            c2: p.c[1],
            c3: p.c[2],
            nu: p.nu,
            g_mode: p.g.to_string(),
        }
    }
}

/// Result of the admissibility test on q.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Admissibility {
    pub q_sum: f64,
    pub valid: bool,
    /// Q lies within [`EPS_Q`] of 1 or 2.
    pub near_boundary: bool,
}

impl Admissibility {
    pub fn check(self) -> Result<f64> {
        if self.near_boundary {
            let boundary = if (self.q_sum - 1.0).abs() < (self.q_sum - 2.0).abs() {
                1.0
            } else {
                2.0
            };
            return Err(Error::Boundary {
                what: "Q".into(),
                value: self.q_sum,
                boundary,
                margin: EPS_Q,
            });
        }
        if !self.valid {
            return Err(Error::InvalidQ { q_sum: self.q_sum });
        }
        Ok(self.q_sum)
    }
}

/// Q = sum 1/q_i together with the validity flag.
pub fn admissibility_of(q: [f64; 3]) -> Admissibility {
    let q_sum: f64 = q.iter().map(|v| 1.0 / v).sum();
    let near_boundary = (q_sum - 1.0).abs() <= EPS_Q || (q_sum - 2.0).abs() <= EPS_Q;
    let valid = q_sum > 1.0 + EPS_Q && q_sum < 2.0 - EPS_Q;
    Admissibility {
        q_sum,
        valid,
        near_boundary,
    }
}

pub fn admissibility(params: &ModelParams) -> Admissibility {
    admissibility_of(params.q)
}

impl ModelParams {
    pub fn new(q: [f64; 3], c: [f64; 3], nu: f64, g: GMode) -> Result<Self> {
        for i in 0..3 {
            if !(q[i].is_finite() && q[i] > 0.0) {
                return Err(Error::InvalidParameter(format!("q{} must be positive", i + 1)));
            }
            if !(c[i].is_finite() && c[i] > 0.0) {
                return Err(Error::InvalidParameter(format!("c{} must be positive", i + 1)));
            }
        }
        if !(nu.is_finite() && nu > 0.0) {
            return Err(Error::InvalidParameter("nu must be positive".into()));
        }
        if let GMode::Custom { bound, .. } = &g {
            if !(bound.is_finite() && *bound > 0.0) {
                return Err(Error::InvalidParameter("custom g needs a finite bound".into()));
            }
        }
        admissibility_of(q).check()?;
        Ok(ModelParams { q, c, nu, g })
    }

    /// Unit weights, nu = 1 and g = 1.
    pub fn simple(q: [f64; 3]) -> Result<Self> {
        Self::new(q, [1.0; 3], 1.0, GMode::ConstantOne)
    }

    pub fn q_sum(&self) -> f64 {
        self.q.iter().map(|v| 1.0 / v).sum()
    }

    /// Per-axis exponents alpha_j = q_j / nu of the coefficient denominator.
    pub fn alpha(&self) -> [f64; 3] {
        [self.q[0] / self.nu, self.q[1] / self.nu, self.q[2] / self.nu]
    }

    /// Denominator base sum_j c_j |t_j|_+^{q_j/nu}.
    pub fn denominator_base(&self, t: LatticePoint) -> f64 {
        let a = self.alpha();
        (0..3)
            .map(|j| self.c[j] * ((t.t[j].unsigned_abs().max(1)) as f64).powf(a[j]))
            .sum()
    }

    /// The coefficient with g = 1.
    pub fn coefficient_plain(&self, t: LatticePoint) -> f64 {
        self.denominator_base(t).powf(-self.nu)
    }

    pub fn coefficient(&self, t: LatticePoint) -> f64 {
        match self.g {
            GMode::ConstantOne => self.coefficient_plain(t),
            GMode::Impulse if t != LatticePoint::ORIGIN => 0.0,
            _ => self.g.value(t) * self.coefficient_plain(t),
        }
    }

    /// Copy of the parameters with axes reordered: new axis i is old axis perm[i].
    pub fn permuted(&self, perm: [usize; 3]) -> ModelParams {
        ModelParams {
            q: perm.map(|i| self.q[i]),
            c: perm.map(|i| self.c[i]),
            nu: self.nu,
            g: match &self.g {
                GMode::Custom { f, bound } => {
                    let f = f.clone();
                    let inv = invert(perm);
                    GMode::Custom {
                        f: Arc::new(move |t: LatticePoint| f(LatticePoint { t: inv.map(|i| t.t[i]) })),
                        bound: *bound,
                    }
                }
                other => other.clone(),
            },
        }
    }

    pub fn with_g(&self, g: GMode) -> ModelParams {
        ModelParams { g, ..self.clone() }
    }
}

fn invert(perm: [usize; 3]) -> [usize; 3] {
    let mut inv = [0; 3];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

/// The coefficient a(t) = g(t) / (sum_j c_j |t_j|_+^{q_j/nu})^nu.
pub fn coefficient(params: &ModelParams, t: LatticePoint) -> f64 {
    params.coefficient(t)
}

/// rho(t) = sum_j |t_j|^{q_j}.
pub fn rho(params: &ModelParams, t: [f64; 3]) -> f64 {
    rho_q(params.q, t)
}

pub fn rho_q(q: [f64; 3], t: [f64; 3]) -> f64 {
    (0..3).map(|j| t[j].abs().powf(q[j])).sum()
}

/// Two-sided envelope constants with C1 / rho(t) <= a(t) <= C2 / rho(t) for t != 0
/// and g = 1.
pub fn coefficient_envelope(params: &ModelParams) -> (f64, f64) {
    // For t != 0 and each axis: c_j |t_j|_+^{alpha_j} lies between
    // c_j |t_j|^{alpha_j} and c_j (1 + |t_j|^{alpha_j}); in terms of
    // s_j = |t_j|^{q_j}: base is between cmin * sum s_j^{1/nu} and cmax * (3 + sum s_j^{1/nu}).
    // With power means, sum s_j^{1/nu} lies between min(1, 3^{1-1/nu}) rho^{1/nu}
    // and max(1, 3^{1-1/nu}) rho^{1/nu}, and rho >= 1 on Z^3 \ {0}.
    let nu = params.nu;
    let cmin = params.c.iter().cloned().fold(f64::INFINITY, f64::min);
    let cmax = params.c.iter().cloned().fold(0.0, f64::max);
    let k = 3f64.powf(1.0 - 1.0 / nu);
    let (klo, khi) = (k.min(1.0), k.max(1.0));
    let c1 = (cmax * (3.0 + khi)).powf(-nu);
    let c2 = (cmin * klo).powf(-nu);
    (c1, c2)
}
