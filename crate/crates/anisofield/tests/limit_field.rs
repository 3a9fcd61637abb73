use anisofield::geometry::Family;
use anisofield::limit::{
    fbs_covariance, fbs_hurst, increment_covariance, increment_covariance_corners, limit_covariance,
    limit_covariance_direct, limit_variance, self_similarity, theta, theta_exponent, LimitKernel, QuadratureSpec,
};
use anisofield::model::ModelParams;

const A: [f64; 3] = [1.8, 3.0, 6.0];
const II: [f64; 3] = [2.0, 2.2, 2.4];
const III: [f64; 3] = [1.8, 1.8, 1.8];

fn spec() -> QuadratureSpec {
    QuadratureSpec::default()
}

fn var(family: Family, q: [f64; 3], x: [f64; 3]) -> f64 {
    let p = ModelParams::simple(q).unwrap();
    limit_variance(&LimitKernel::new(family, &p, x).unwrap(), &spec()).unwrap().value
}

fn cov(family: Family, q: [f64; 3], x: [f64; 3], y: [f64; 3]) -> f64 {
    let p = ModelParams::simple(q).unwrap();
    let k = |z| LimitKernel::new(family, &p, z).unwrap();
    limit_covariance(&k(x), &k(y), &spec()).unwrap().value
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn variances_at_unit_corner_match_frozen_values() {
    let table = [
        (Family::Y1, A, 11626.719023930),
        (Family::Y12, A, 9511.6042),
        (Family::Y0, A, 7804.41498),
        (Family::Y2, II, 482.28927),
        (Family::Y12, II, 295.89839),
        (Family::Y23, II, 263.55015),
        (Family::Y3, III, 110.92901),
        (Family::Y23, III, 54.542769),
        (Family::Y0, III, 43.352068),
        (Family::Y0, [2.7; 3], 1551.42465),
    ];
    for (family, q, want) in table {
        let got = var(family, q, [1.0; 3]);
        assert!(rel(got, want) < 1e-5, "{family} q={q:?}: {got} vs {want}");
    }
}

#[test]
fn direct_quadrature_agrees_with_engine() {
    for (family, q, x, y) in [
        (Family::Y1, A, [1.0; 3], [0.5, 2.0, 1.0]),
        (Family::Y2, II, [1.0; 3], [1.0; 3]),
    ] {
        let p = ModelParams::simple(q).unwrap();
        let (k1, k2) = (LimitKernel::new(family, &p, x).unwrap(), LimitKernel::new(family, &p, y).unwrap());
        let engine = limit_covariance(&k1, &k2, &spec()).unwrap().value;
        let direct = limit_covariance_direct(&k1, &k2, &spec()).unwrap();
        assert!(rel(direct, engine) < 1e-4, "{family}: {direct} vs {engine}");
    }
}

#[test]
fn first_family_is_a_fractional_brownian_sheet() {
    let h = fbs_hurst(Family::Y1, A).unwrap();
    assert!((h[0] - 0.6).abs() < 1e-12);
    let v1 = var(Family::Y1, A, [1.0; 3]);
    let x = [0.5, 2.0, 1.0];
    let y = [1.5, 0.5, 3.0];
    let got = cov(Family::Y1, A, x, y);
    let want = v1 * fbs_covariance(h, x, y);
    assert!(rel(got, want) < 1e-4, "{got} vs {want}");
}

#[test]
fn self_similarity_of_y1_and_y0() {
    for (family, s) in [(Family::Y1, [2.0, 0.5, 3.0]), (Family::Y0, [2.0, 0.0, 0.0])] {
        let x = [1.0, 0.7, 1.3];
        let (m, factor) = self_similarity(family, A, s);
        let scaled = [x[0] * m[0], x[1] * m[1], x[2] * m[2]];
        let got = var(family, A, scaled);
        let want = factor * var(family, A, x);
        assert!(rel(got, want) < 1e-3, "{family}: {got} vs {want}");
    }
}

#[test]
fn degenerate_corner_has_zero_variance() {
    assert_eq!(var(Family::Y1, A, [1.0, 0.0, 1.0]), 0.0);
}

#[test]
fn theta_scales_with_its_exponent() {
    let p = ModelParams::simple(A).unwrap();
    let e = theta_exponent(A);
    let t1 = theta(&p, 1.0, &spec()).unwrap().value;
    assert!(rel(t1, 1395.2062828717576) < 1e-9, "{t1}");
    for t in [0.5, 2.0, 4.0] {
        let got = theta(&p, t, &spec()).unwrap().value;
        assert!(rel(got, t1 * t.powf(e)) < 1e-3, "t={t}: {got} vs {}", t1 * t.powf(e));
    }
}

#[test]
fn y12_increments_separated_along_third_axis_are_uncorrelated() {
    let p = ModelParams::simple(A).unwrap();
    let r1 = LimitKernel::rectangle(Family::Y12, &p, [0.0, 0.0, 0.0], [1.0, 1.0, 1.0]).unwrap();
    let r2 = LimitKernel::rectangle(Family::Y12, &p, [0.5, 0.2, 1.5], [1.5, 1.2, 2.5]).unwrap();
    let c = increment_covariance(&r1, &r2, &spec()).unwrap().value;
    let v = increment_covariance(&r1, &r1, &spec()).unwrap().value;
    assert!(c.abs() < 1e-6 * v, "{c} vs {v}");
}

#[test]
fn y23_increments_are_invariant_along_first_axis() {
    let p = ModelParams::simple(II).unwrap();
    let inc = |a: f64| {
        let r = LimitKernel::rectangle(Family::Y23, &p, [a, 0.3, 0.2], [a + 0.5, 1.0, 1.1]).unwrap();
        increment_covariance(&r, &r, &spec()).unwrap().value
    };
    let base = inc(0.0);
    for a in [0.5, 3.0] {
        assert!(rel(inc(a), base) < 1e-6);
    }
}

#[test]
fn corner_sums_match_single_increment_evaluation() {
    let p = ModelParams::simple(A).unwrap();
    let r1 = LimitKernel::rectangle(Family::Y1, &p, [0.2, 0.1, 0.3], [1.0, 0.9, 1.2]).unwrap();
    let r2 = LimitKernel::rectangle(Family::Y1, &p, [0.6, 0.5, 0.0], [1.4, 1.0, 0.8]).unwrap();
    let single = increment_covariance(&r1, &r2, &spec()).unwrap().value;
    let corners = increment_covariance_corners(&r1, &r2, &spec()).unwrap().value;
    let scale = increment_covariance(&r1, &r1, &spec()).unwrap().value;
    assert!((single - corners).abs() < 1e-4 * scale, "{single} vs {corners}");
}
