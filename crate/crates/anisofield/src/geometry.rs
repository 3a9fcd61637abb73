//! Scaling geometry of (q, gamma): balance cells, parameter regions, the sorting
//! permutation, limit families and all scaling exponents.
//!
//! Balance is judged on the products gamma_i q_i: the pair (i, j) is balanced when
//! gamma_i q_i = gamma_j q_j, i.e. gamma_i / gamma_j equals the intrinsic ratio
//! q_j / q_i. The cell label k21 k31 k32 holds the signs of
//! gamma_2 q_2 - gamma_1 q_1, gamma_3 q_3 - gamma_1 q_1 and gamma_3 q_3 - gamma_2 q_2.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, EPS_Q};

/// Relative tolerance for equality of the products gamma_i q_i.
pub const EPS_BAL: f64 = 1e-12;

/// Anisotropic scaling exponents gamma.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingVector {
    pub gamma: [f64; 3],
}

impl ScalingVector {
    pub fn new(gamma: [f64; 3]) -> Result<Self> {
        if gamma.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(Error::InvalidParameter("gamma components must be positive".into()));
        }
        Ok(ScalingVector { gamma })
    }

    pub fn permuted(&self, perm: [usize; 3]) -> ScalingVector {
        ScalingVector {
            gamma: perm.map(|i| self.gamma[i]),
        }
    }
}

/// One of the 13 cells of the balance partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BalanceCell {
    /// (k21, k31, k32), each in {-1, 0, 1}.
    pub k: [i8; 3],
}

/// All 13 labels.
pub const CELL_LABELS: [&str; 13] = [
    "000", "011", "110", "10-1", "0-1-1", "-1-10", "-101", "111", "11-1", "1-1-1", "-1-1-1", "-1-11", "-111",
];

impl BalanceCell {
    pub fn label(&self) -> String {
        self.k.iter().map(|v| v.to_string()).collect()
    }

    pub fn parse(label: &str) -> Result<Self> {
        let mut k = Vec::new();
        let mut chars = label.chars().peekable();
        while let Some(ch) = chars.next() {
            match ch {
                '0' => k.push(0),
                '1' => k.push(1),
                '-' if chars.next() == Some('1') => k.push(-1),
                _ => return Err(Error::Config(format!("bad cell label '{}'", label))),
            }
        }
        if k.len() != 3 {
            return Err(Error::Config(format!("bad cell label '{}'", label)));
        }
        let cell = BalanceCell { k: [k[0], k[1], k[2]] };
        if !cell.is_consistent() {
            return Err(Error::Config(format!("infeasible cell label '{}'", label)));
        }
        Ok(cell)
    }

    /// True when some ordering of three reals realizes the sign pattern.
    pub fn is_consistent(&self) -> bool {
        // k31 = sign((p3 - p2) + (p2 - p1)) must be compatible with k32, k21.
        let [k21, k31, k32] = self.k;
        match (k21, k32) {
            (a, b) if a == b => k31 == a,
            (0, b) => k31 == b,
            (a, 0) => k31 == a,
            _ => true,
        }
    }

    /// Number of balance conditions that hold.
    pub fn balanced_pairs(&self) -> usize {
        self.k.iter().filter(|v| **v == 0).count()
    }
}

impl fmt::Display for BalanceCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl Serialize for BalanceCell {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.label())
    }
}

impl<'de> Deserialize<'de> for BalanceCell {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        BalanceCell::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Parameter region of q.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    I,
    II,
    III,
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Region::I => "I",
            Region::II => "II",
            Region::III => "III",
        };
        f.write_str(s)
    }
}

/// The six limit random fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    Y1,
    Y2,
    Y3,
    Y12,
    Y23,
    Y0,
}

impl Family {
    pub const ALL: [Family; 6] = [Family::Y1, Family::Y2, Family::Y3, Family::Y12, Family::Y23, Family::Y0];

    pub fn name(&self) -> &'static str {
        match self {
            Family::Y1 => "Y1",
            Family::Y2 => "Y2",
            Family::Y3 => "Y3",
            Family::Y12 => "Y12",
            Family::Y23 => "Y23",
            Family::Y0 => "Y0",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Family::ALL
            .iter()
            .copied()
            .find(|f| f.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown family '{}'", s)))
    }

    /// Existence condition of the limit field for (already permuted) q.
    pub fn existence(&self, q: [f64; 3]) -> Result<()> {
        let d = Discriminants::of(q);
        let half = d.half_sum;
        let (ok, text) = match self {
            Family::Y1 => (d.d1 < 1.0 && 1.0 < d.q_sum, "1/(2q1) + 1/q2 + 1/q3 < 1 < Q"),
            Family::Y2 => (d.d2 < 1.0 && 1.0 < d.d1, "1/(2q1) + 1/(2q2) + 1/q3 < 1 < 1/(2q1) + 1/q2 + 1/q3"),
            Family::Y3 => (half < 1.0 && 1.0 < d.d2, "sum 1/(2qi) < 1 < 1/(2q1) + 1/(2q2) + 1/q3"),
            Family::Y12 => (d.d2 < 1.0 && 1.0 < d.q_sum, "1/(2q1) + 1/(2q2) + 1/q3 < 1 < Q"),
            Family::Y23 => (half < 1.0 && 1.0 < d.d1, "sum 1/(2qi) < 1 < 1/(2q1) + 1/q2 + 1/q3"),
            Family::Y0 => (half < 1.0 && 1.0 < d.q_sum, "sum 1/(2qi) < 1 < Q"),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Existence {
                family: self.name().into(),
                condition: format!("{} fails for q = {:?}", text, q),
            })
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The sums that decide regions and existence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discriminants {
    pub q_sum: f64,
    pub half_sum: f64,
    /// 1/(2 q1) + 1/q2 + 1/q3.
    pub d1: f64,
    /// 1/(2 q1) + 1/(2 q2) + 1/q3.
    pub d2: f64,
}

impl Discriminants {
    pub fn of(q: [f64; 3]) -> Self {
        let r = q.map(|v| 1.0 / v);
        Discriminants {
            q_sum: r[0] + r[1] + r[2],
            half_sum: 0.5 * (r[0] + r[1] + r[2]),
            d1: 0.5 * r[0] + r[1] + r[2],
            d2: 0.5 * r[0] + 0.5 * r[1] + r[2],
        }
    }
}

/// The scaling exponents: script-H values and the normalizations H.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    pub cal_h1: f64,
    pub cal_h2: f64,
    pub cal_h3: f64,
    pub cal_h12: f64,
    pub cal_h23: f64,
    pub cal_h0: f64,
    pub h1: f64,
    pub h2: f64,
    pub h3: f64,
    pub h12: f64,
    pub h23: f64,
    pub h0: f64,
}

impl Exponents {
    pub fn h_of(&self, family: Family) -> f64 {
        match family {
            Family::Y1 => self.h1,
            Family::Y2 => self.h2,
            Family::Y3 => self.h3,
            Family::Y12 => self.h12,
            Family::Y23 => self.h23,
            Family::Y0 => self.h0,
        }
    }

    pub fn cal_h_of(&self, family: Family) -> f64 {
        match family {
            Family::Y1 => self.cal_h1,
            Family::Y2 => self.cal_h2,
            Family::Y3 => self.cal_h3,
            Family::Y12 => self.cal_h12,
            Family::Y23 => self.cal_h23,
            Family::Y0 => self.cal_h0,
        }
    }
}

/// Exponents from q alone (script H).
pub fn cal_h(q: [f64; 3]) -> [f64; 6] {
    let [q1, q2, q3] = q;
    [
        1.5 - q1 * (1.0 - 1.0 / q2 - 1.0 / q3),
        1.5 - q2 * (1.0 - 1.0 / (2.0 * q1) - 1.0 / q3),
        1.5 - q3 * (1.0 - 1.0 / (2.0 * q1) - 1.0 / (2.0 * q2)),
        1.5 / q1 + 1.5 / q2 + 1.0 / q3 - 1.0,
        0.5 / q1 + 1.5 / q2 + 1.5 / q3 - 1.0,
        1.5 / q1 + 1.5 / q2 + 1.5 / q3 - 1.0,
    ]
}

/// All six script-H and six H exponents in the given coordinates.
pub fn exponents(params: &ModelParams, gamma: &ScalingVector) -> Exponents {
    exponents_q(params.q, gamma.gamma)
}

pub fn exponents_q(q: [f64; 3], g: [f64; 3]) -> Exponents {
    let ch = cal_h(q);
    Exponents {
        cal_h1: ch[0],
        cal_h2: ch[1],
        cal_h3: ch[2],
        cal_h12: ch[3],
        cal_h23: ch[4],
        cal_h0: ch[5],
        h1: g[0] * ch[0] + 0.5 * (g[1] + g[2]),
        h2: g[0] + g[1] * ch[1] + 0.5 * g[2],
        h3: g[0] + g[1] + g[2] * ch[2],
        h12: g[0] * q[0] * ch[3] + 0.5 * g[2],
        h23: g[0] + g[1] * q[1] * ch[4],
        h0: g[0] * q[0] * ch[5],
    }
}

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() <= EPS_BAL * a.abs().max(b.abs())
}

/// Tie groups of the products: rank[i] is the group index of product i in
/// ascending order. Near-equal values are chained so the relation is transitive.
fn tie_ranks(p: [f64; 3]) -> [usize; 3] {
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| p[a].partial_cmp(&p[b]).unwrap().then(a.cmp(&b)));
    let mut rank = [0usize; 3];
    let mut r = 0;
    for w in 1..3 {
        if !near(p[idx[w - 1]], p[idx[w]]) {
            r += 1;
        }
        rank[idx[w]] = r;
    }
    rank
}

fn sign_of(a: usize, b: usize) -> i8 {
    match a.cmp(&b) {
        std::cmp::Ordering::Less => -1,
        std::cmp::Ordering::Equal => 0,
        std::cmp::Ordering::Greater => 1,
    }
}

/// Balance cell of (q, gamma).
pub fn balance_cell(params: &ModelParams, gamma: &ScalingVector) -> BalanceCell {
    balance_cell_q(params.q, gamma.gamma)
}

pub fn balance_cell_q(q: [f64; 3], g: [f64; 3]) -> BalanceCell {
    let p = [g[0] * q[0], g[1] * q[1], g[2] * q[2]];
    let r = tie_ranks(p);
    BalanceCell {
        k: [sign_of(r[1], r[0]), sign_of(r[2], r[0]), sign_of(r[2], r[1])],
    }
}

/// The permutation sorting gamma_i q_i ascending, ties in index order.
/// Entry i is the (0-based) original axis placed at position i.
pub fn sorting_permutation(q: [f64; 3], g: [f64; 3]) -> [usize; 3] {
    let p = [g[0] * q[0], g[1] * q[1], g[2] * q[2]];
    let r = tie_ranks(p);
    let mut idx = [0usize, 1, 2];
    idx.sort_by_key(|&i| (r[i], i));
    idx
}

/// Region of q in the coordinates given.
pub fn region(params: &ModelParams) -> Result<Region> {
    region_q(params.q)
}

pub fn region_q(q: [f64; 3]) -> Result<Region> {
    let d = Discriminants::of(q);
    for (name, v) in [("1/(2q1) + 1/q2 + 1/q3", d.d1), ("1/(2q1) + 1/(2q2) + 1/q3", d.d2)] {
        if (v - 1.0).abs() <= EPS_Q {
            return Err(Error::Boundary {
                what: name.into(),
                value: v,
                boundary: 1.0,
                margin: EPS_Q,
            });
        }
    }
    Ok(if d.d1 < 1.0 {
        Region::I
    } else if d.d2 < 1.0 {
        Region::II
    } else {
        Region::III
    })
}

/// A classified (q, gamma) pair.
///
/// `pi`, `region`, `family`, `h` and `exponents` refer to the permuted
/// coordinates (axis i of the permuted problem is original axis `pi[i]`);
/// `cell` refers to the original coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub params: ModelParams,
    pub gamma: ScalingVector,
    pub pi: [usize; 3],
    pub region: Region,
    pub cell: BalanceCell,
    pub family: Family,
    pub h: f64,
    pub cal_h: f64,
    pub exponents: Exponents,
}

impl Scenario {
    /// Parameters in the permuted coordinates.
    pub fn permuted_params(&self) -> ModelParams {
        self.params.permuted(self.pi)
    }

    pub fn permuted_gamma(&self) -> ScalingVector {
        self.gamma.permuted(self.pi)
    }

    /// Maps a corner from original to permuted coordinates.
    pub fn to_permuted(&self, x: [f64; 3]) -> [f64; 3] {
        self.pi.map(|i| x[i])
    }

    /// Discretization scales (m1, m2, m3) of the rescaled kernel, permuted coordinates.
    pub fn grid_scales(&self, lambda: f64) -> [u64; 3] {
        let q = self.permuted_params().q;
        let g = self.permuted_gamma().gamma;
        let ceil = |v: f64| v.ceil().max(1.0) as u64;
        match self.family {
            Family::Y1 | Family::Y0 => g.map(|gi| ceil(lambda.powf(gi))),
            Family::Y2 | Family::Y12 => [
                (lambda.powf(g[1] * q[1] / q[0]).floor().max(1.0)) as u64,
                ceil(lambda.powf(g[1])),
                ceil(lambda.powf(g[2])),
            ],
            Family::Y3 | Family::Y23 => [0, 1, 2].map(|i| ceil(lambda.powf(g[2] * q[2] / q[i]))),
        }
    }

    pub fn document(&self) -> ScenarioDoc {
        ScenarioDoc {
            q: self.params.q,
            c: self.params.c,
            nu: self.params.nu,
            gamma: self.gamma.gamma,
            pi: self.pi.map(|i| i + 1),
            region: self.region,
            cell: self.cell,
            family: self.family,
            h: self.h,
            cal_h: self.cal_h,
            exponents: self.exponents,
        }
    }
}

/// Serializable view of a [`Scenario`]; `pi` is 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDoc {
    pub q: [f64; 3],
    pub c: [f64; 3],
    pub nu: f64,
    pub gamma: [f64; 3],
    pub pi: [usize; 3],
    pub region: Region,
    pub cell: BalanceCell,
    pub family: Family,
    pub h: f64,
    pub cal_h: f64,
    pub exponents: Exponents,
}

/// Classifies (q, gamma): permutation, region, cell, family and H.
pub fn classify_scenario(params: &ModelParams, gamma: &ScalingVector) -> Result<Scenario> {
    let pi = sorting_permutation(params.q, gamma.gamma);
    let q = pi.map(|i| params.q[i]);
    let g = pi.map(|i| gamma.gamma[i]);
    let region = region_q(q)?;
    let p = [g[0] * q[0], g[1] * q[1], g[2] * q[2]];
    let e12 = near(p[0], p[1]);
    let e23 = near(p[1], p[2]);
    let family = match (e12, e23) {
        (true, true) => Family::Y0,
        (false, false) => match region {
            Region::I => Family::Y1,
            Region::II => Family::Y2,
            Region::III => Family::Y3,
        },
        (true, false) => match region {
            Region::III => Family::Y3,
            _ => Family::Y12,
        },
        (false, true) => match region {
            Region::I => Family::Y1,
            _ => Family::Y23,
        },
    };
    family.existence(q)?;
    let exponents = exponents_q(q, g);
    let h = exponents.h_of(family);
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("non-positive H = {}", h)));
    }
    Ok(Scenario {
        params: params.clone(),
        gamma: *gamma,
        pi,
        region,
        cell: balance_cell_q(params.q, gamma.gamma),
        family,
        h,
        cal_h: exponents.cal_h_of(family),
        exponents,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(q: [f64; 3]) -> ModelParams {
        ModelParams::simple(q).unwrap()
    }

    #[test]
    fn cell_examples() {
        let g = |v| ScalingVector::new(v).unwrap();
        assert_eq!(balance_cell(&p([1.8, 3.0, 6.0]), &g([1.0, 0.6, 0.3])).label(), "000");
        assert_eq!(balance_cell(&p([1.8, 3.0, 6.0]), &g([1.0, 1.0, 1.0])).label(), "111");
        assert_eq!(balance_cell(&p([2.2, 2.2, 2.2]), &g([1.0, 1.0, 2.0])).label(), "011");
    }

    #[test]
    fn all_labels_parse_and_are_consistent() {
        for l in CELL_LABELS {
            let c = BalanceCell::parse(l).unwrap();
            assert_eq!(c.label(), l);
        }
        assert!(BalanceCell::parse("1-11").is_err());
        assert!(BalanceCell::parse("01-1").is_err());
    }

    #[test]
    fn region_examples() {
        assert_eq!(region(&p([2.7; 3])).unwrap(), Region::I);
        assert_eq!(region(&p([1.8, 3.0, 6.0])).unwrap(), Region::I);
        assert_eq!(region(&p([1.8; 3])).unwrap(), Region::III);
        assert_eq!(region(&p([2.2; 3])).unwrap(), Region::II);
        assert!(region(&p([2.0; 3])).unwrap_err().is_boundary());
        assert!(region(&p([2.5; 3])).unwrap_err().is_boundary());
    }

    #[test]
    fn classify_examples() {
        let s = classify_scenario(&p([1.8, 3.0, 6.0]), &ScalingVector::new([1.0; 3]).unwrap()).unwrap();
        assert_eq!(s.family, Family::Y1);
        assert!((s.h - 1.6).abs() < 1e-12);
        let s = classify_scenario(&p([2.7; 3]), &ScalingVector::new([1.0; 3]).unwrap()).unwrap();
        assert_eq!(s.family, Family::Y0);
        assert!((s.h - 1.8).abs() < 1e-12);
        let s = classify_scenario(&p([2.7; 3]), &ScalingVector::new([1.0, 1.0, 2.0]).unwrap()).unwrap();
        assert_eq!(s.family, Family::Y12);
    }

    #[test]
    fn isotropic_closed_forms() {
        for q in [1.6, 1.9, 2.2, 2.6, 2.9] {
            let e = exponents_q([q; 3], [1.0, 1.3, 1.7]);
            assert!((e.cal_h1 - (3.5 - q)).abs() < 1e-14);
            assert!((e.cal_h2 - (3.0 - q)).abs() < 1e-14);
            assert!((e.cal_h3 - (2.5 - q)).abs() < 1e-14);
        }
    }

    #[test]
    fn grid_scales_follow_case() {
        let s = classify_scenario(&p([1.8, 3.0, 6.0]), &ScalingVector::new([1.0; 3]).unwrap()).unwrap();
        assert_eq!(s.grid_scales(32.0), [32, 32, 32]);
        let s = classify_scenario(&p([2.2; 3]), &ScalingVector::new([1.0, 1.5, 2.0]).unwrap()).unwrap();
        assert_eq!(s.family, Family::Y2);
        let m = s.grid_scales(4.0);
        assert_eq!(m, [(4f64.powf(1.5)).floor() as u64, 8, 16]);
    }
}
