mod common;

use anisofield::covariance::{covariance_exact, covariance_full, envelope_ratio};
use anisofield::model::{LatticePoint, ModelParams};
use common::r_oracle;

const A: [f64; 3] = [1.8, 3.0, 6.0];
const B: [f64; 3] = [2.7, 2.7, 2.7];

/// r(t) for q = (1.8, 3, 6) and isotropic q = 2.7, c = 1, nu = 1, g = 1.
const FROZEN: [([f64; 3], [i64; 3], f64); 12] = [
    (A, [0, 0, 0], 4.580939982763770),
    (A, [1, 0, 0], 4.299384537674596),
    (A, [0, 1, 0], 3.932676667415631),
    (A, [0, 0, 1], 3.295529474751567),
    (A, [5, 2, 1], 1.185959534235167),
    (A, [20, 0, 0], 3.369642035683814e-1),
    (A, [0, 20, 0], 1.894004737575910e-2),
    (A, [0, 0, 20], 1.096488806267581e-5),
    (B, [0, 0, 0], 4.471725547641701),
    (B, [1, 0, 0], 3.944041617092969),
    (B, [5, 2, 1], 7.572375047903153e-1),
    (B, [20, 0, 0], 4.926785121675958e-2),
];

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn covariance_matches_frozen_values() {
    for (q, t, want) in FROZEN {
        let p = ModelParams::simple(q).unwrap();
        let got = covariance_full(&p, LatticePoint::from(t)).unwrap().value;
        assert!(rel(got, want) < 1e-9, "q={q:?} t={t:?}: {got:e} vs {want:e}");
    }
}

#[test]
fn covariance_agrees_with_brute_force_cubature() {
    for (q, t) in [(A, [0, 0, 0]), (A, [5, 2, 1]), (B, [1, 0, 0])] {
        let p = ModelParams::simple(q).unwrap();
        let engine = covariance_full(&p, LatticePoint::from(t)).unwrap().value;
        let oracle = r_oracle(&p, t, 32);
        assert!(rel(engine, oracle) < 1e-4, "q={q:?} t={t:?}: {engine:e} vs {oracle:e}");
    }
}

#[test]
fn isotropic_covariance_is_symmetric_in_axes() {
    let p = ModelParams::simple(B).unwrap();
    let r = |t: [i64; 3]| covariance_full(&p, LatticePoint::from(t)).unwrap().value;
    let base = r([5, 2, 1]);
    for t in [[2, 5, 1], [1, 2, 5], [-5, 2, -1], [5, -1, 2]] {
        assert!(rel(r(t), base) < 1e-12, "{t:?}");
    }
}

#[test]
fn truncated_split_adds_up() {
    let p = ModelParams::simple(A).unwrap();
    let c = covariance_exact(&p, LatticePoint::new(3, 1, 0), 12).unwrap();
    assert!((c.truncated + c.tail - c.value).abs() < 1e-14 * c.value);
    assert!(c.tail > 0.0 && c.truncated < c.value);
}

#[test]
fn envelope_ratio_on_first_axis() {
    let p = ModelParams::simple(A).unwrap();
    let r20 = envelope_ratio(&p, LatticePoint::new(20, 0, 0), 200).unwrap();
    let want = 3.369642035683814e-1 * 20f64.powf(1.8 * (2.0 - p.q_sum()));
    assert!(rel(r20, want) < 1e-9);
    let back = envelope_ratio(&p, LatticePoint::new(-20, 0, 0), 200).unwrap();
    assert!(rel(back, r20) < 1e-12);
}
