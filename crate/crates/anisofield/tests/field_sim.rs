use anisofield::covariance::{covariance_full, outside_mass_radii};
use anisofield::field::{
    discrete_kernel, partial_sum, replicate_sums, sample_stats, simulate_window, variance_exact, FieldWindow, Innovation,
    KernelSpec,
};
use anisofield::geometry::ScalingVector;
use anisofield::model::{GMode, LatticePoint, ModelParams};

const A: [f64; 3] = [1.8, 3.0, 6.0];
const R0: f64 = 4.580939982763770;
const R100: f64 = 4.299384537674596;
const RADII: [u64; 3] = [231, 27, 6];

fn spec(lambda: f64, x: [f64; 3], h: f64) -> KernelSpec {
    KernelSpec {
        gamma: [1.0; 3],
        lambda,
        x,
        h,
        radii: RADII,
    }
}

#[test]
fn unit_scale_variance_is_the_covariance_double_sum() {
    let p = ModelParams::simple(A).unwrap();
    let single = variance_exact(&p, &spec(1.0, [1.0; 3], 0.0)).unwrap();
    assert!((single.value - R0).abs() < 1e-9 * R0);
    let pair = variance_exact(&p, &spec(1.0, [2.0, 1.0, 1.0], 0.0)).unwrap();
    let want = 2.0 * R0 + 2.0 * R100;
    assert!((pair.value - want).abs() < 1e-9 * want, "{} vs {want}", pair.value);
}

#[test]
fn normalization_divides_by_lambda_to_the_2h() {
    let p = ModelParams::simple(A).unwrap();
    let raw = variance_exact(&p, &spec(8.0, [1.0; 3], 0.0)).unwrap().value;
    let normed = variance_exact(&p, &spec(8.0, [1.0; 3], 1.6)).unwrap().value;
    assert!((normed - raw * 8f64.powf(-3.2)).abs() < 1e-12 * normed);
}

#[test]
fn kernel_square_norm_is_the_truncated_variance() {
    let p = ModelParams::simple(A).unwrap();
    let s = spec(4.0, [1.0, 0.5, 1.0], 1.6);
    let k = discrete_kernel(&p, &s);
    let v = variance_exact(&p, &s).unwrap();
    assert!((k.sum_squares() - v.truncated).abs() < 1e-10 * v.truncated);
    assert!(v.truncated <= v.value);
}

#[test]
fn white_noise_variance_counts_cells() {
    let p = ModelParams::simple(A).unwrap().with_g(GMode::Impulse);
    let v = variance_exact(&p, &spec(4.0, [1.0, 0.5, 0.75], 0.0)).unwrap();
    assert_eq!(v.value, 4.0 * 2.0 * 3.0);
}

fn window_moments(innovation: Innovation) -> (Vec<f64>, Vec<f64>) {
    let p = ModelParams::simple(A).unwrap();
    let mut sq = Vec::new();
    let mut lag = Vec::new();
    for seed in 0..48 {
        let w = simulate_window(&p, [8, 8, 8], seed, RADII, innovation, 1e-4).unwrap();
        let n = w.values.len() as f64;
        sq.push(w.values.iter().map(|v| v * v).sum::<f64>() / n);
        let mut acc = 0.0;
        for i in 0..7 {
            for j in 0..8 {
                for k in 0..8 {
                    acc += w.values[[i, j, k]] * w.values[[i + 1, j, k]];
                }
            }
        }
        lag.push(acc / (7.0 * 64.0));
    }
    (sq, lag)
}

#[test]
fn simulated_second_moments_match_covariances() {
    let p = ModelParams::simple(A).unwrap();
    let (out, total) = outside_mass_radii(&p, RADII).unwrap();
    let want0 = total - out;
    let want1 = covariance_full(&p, LatticePoint::new(1, 0, 0)).unwrap().value;
    for innovation in [Innovation::Normal, Innovation::Rademacher] {
        let (sq, lag) = window_moments(innovation);
        let s0 = sample_stats(&sq);
        let s1 = sample_stats(&lag);
        let se0 = (s0.variance / s0.n as f64).sqrt();
        let se1 = (s1.variance / s1.n as f64).sqrt();
        assert!((s0.mean - want0).abs() < 4.0 * se0, "{innovation}: E X^2 {} vs {want0} (se {se0})", s0.mean);
        assert!((s1.mean - want1).abs() < 4.0 * se1 + 1e-3 * want1, "{innovation}: lag {} vs {want1}", s1.mean);
    }
}

#[test]
fn windows_are_reproducible_from_the_seed() {
    let p = ModelParams::simple(A).unwrap();
    let a = simulate_window(&p, [6, 5, 4], 11, RADII, Innovation::Normal, 1e-4).unwrap();
    let b = simulate_window(&p, [6, 5, 4], 11, RADII, Innovation::Normal, 1e-4).unwrap();
    let c = simulate_window(&p, [6, 5, 4], 12, RADII, Innovation::Normal, 1e-4).unwrap();
    assert_eq!(a.values, b.values);
    assert_ne!(a.values, c.values);
}

#[test]
fn undersized_radii_are_rejected() {
    let p = ModelParams::simple(A).unwrap();
    assert!(simulate_window(&p, [4, 4, 4], 1, [3, 3, 3], Innovation::Normal, 1e-4).is_err());
}

#[test]
fn window_files_round_trip() {
    let p = ModelParams::simple(A).unwrap();
    let w = simulate_window(&p, [5, 4, 3], 3, RADII, Innovation::Rademacher, 1e-4).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (head, bin) = w.write(dir.path(), "w").unwrap();
    assert_eq!(std::fs::metadata(bin).unwrap().len(), 5 * 4 * 3 * 8);
    let back = FieldWindow::read(&head).unwrap();
    assert_eq!(back, w);
}

#[test]
fn partial_sums_of_a_window() {
    let p = ModelParams::simple(A).unwrap();
    let w = simulate_window(&p, [8, 8, 8], 5, RADII, Innovation::Normal, 1e-4).unwrap();
    let g = ScalingVector::new([1.0, 1.0, 1.0]).unwrap();
    let direct: f64 = (0..4).flat_map(|i| (0..2).flat_map(move |j| (0..8).map(move |k| [i, j, k]))).map(|t| w.values[t]).sum();
    let got = partial_sum(&w, &g, 4.0, [1.0, 0.5, 2.0]).unwrap();
    assert!((got - direct).abs() < 1e-12 * direct.abs().max(1.0));
    assert_eq!(partial_sum(&w, &g, 4.0, [0.0, 1.0, 1.0]).unwrap(), 0.0);
    assert!(partial_sum(&w, &g, 16.0, [1.0; 3]).is_err());
}

#[test]
fn replicate_sums_have_the_kernel_variance() {
    let p = ModelParams::simple(A).unwrap();
    let s = spec(4.0, [1.0; 3], 1.6);
    let k = discrete_kernel(&p, &s);
    let v = variance_exact(&p, &s).unwrap().truncated;
    for innovation in [Innovation::Normal, Innovation::Rademacher] {
        let rows = replicate_sums(&k, 4000, 99, innovation);
        let st = sample_stats(&rows.iter().map(|r| r.s).collect::<Vec<_>>());
        assert!((st.variance - v).abs() < 4.0 * st.variance_se, "{innovation}: {} vs {v}", st.variance);
        assert!(st.mean.abs() < 4.0 * (v / 4000.0).sqrt());
    }
    let again = replicate_sums(&k, 10, 99, Innovation::Normal);
    assert_eq!(again, replicate_sums(&k, 10, 99, Innovation::Normal));
}
