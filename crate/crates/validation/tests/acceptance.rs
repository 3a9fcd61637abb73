use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use anisofield::covariance::{envelope_ratio, radii_for};
use anisofield::field::Innovation;
use anisofield::geometry::{cal_h, classify_scenario, exponents_q, Family, Region, Scenario, ScalingVector};
use anisofield::limit::{
    fbs_covariance, fbs_hurst, limit_covariance, limit_variance, self_similarity, theta, theta_exponent, LimitKernel,
    QuadratureSpec,
};
use anisofield::model::{LatticePoint, ModelParams};
use anisofield::verify::{
    covariance_match, l2_convergence_check, ols, slope_check, summability_diagnostics, universality_check, ReportConfig,
    Thresholds, Verdict,
};
use anisofield::Error;
use anisofield_cli::{Outcome, Run, RunConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const A: [f64; 3] = [1.8, 3.0, 6.0];
const B: [f64; 3] = [2.7, 2.7, 2.7];
const ONES: [f64; 3] = [1.0, 1.0, 1.0];
const GRID: [f64; 4] = [4.0, 8.0, 16.0, 32.0];

struct Finding {
    pass: bool,
    lines: Vec<String>,
}

impl Finding {
    fn new() -> Self {
        Finding {
            pass: true,
            lines: Vec::new(),
        }
    }

    fn record(&mut self, ok: bool, line: String) {
        self.pass &= ok;
        self.lines.push(format!("{} {line}", if ok { "ok  " } else { "FAIL" }));
    }
}

fn params(q: [f64; 3]) -> ModelParams {
    ModelParams::simple(q).expect("valid q")
}

fn scenario(q: [f64; 3], g: [f64; 3]) -> Scenario {
    classify_scenario(&params(q), &ScalingVector::new(g).expect("valid gamma")).expect("classifiable")
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn max_rel(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NAN, f64::max);
    let lo = v.iter().copied().fold(f64::NAN, f64::min);
    (m - lo) / lo.abs().max(m.abs())
}

fn exponent_algebra() -> Finding {
    let mut f = Finding::new();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = [0.0f64; 3];
    let mut n = 0;
    while n < 1000 {
        let w: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.05..1.0));
        let total = rng.random_range(1.02..1.98);
        let s: f64 = w.iter().sum();
        let q = w.map(|wi| s / (total * wi));
        if q.iter().any(|&qi| qi <= 1.0) {
            continue;
        }
        n += 1;
        let g: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.2..3.0));
        let e = exponents_q(q, [g[0], g[0] * q[0] / q[1], g[2]]);
        worst[0] = worst[0].max(max_rel(&[e.h1, e.h2, e.h12]));
        let e = exponents_q(q, [g[0], g[1], g[1] * q[1] / q[2]]);
        worst[1] = worst[1].max(max_rel(&[e.h2, e.h3, e.h23]));
        let c = g[0] * q[0];
        let e = exponents_q(q, q.map(|qi| c / qi));
        worst[2] = worst[2].max(max_rel(&[e.h1, e.h2, e.h3, e.h12, e.h23, e.h0]));
    }
    for (name, w) in ["H1 = H2 = H12", "H2 = H3 = H23", "all six equal"].iter().zip(worst) {
        f.record(w <= 1e-12, format!("{name}: worst relative spread {w:.2e} over 1000 draws"));
    }
    let mut iso_worst = 0.0f64;
    for i in 0..1000 {
        let q = 1.5 + 1.5 * i as f64 / 1000.0;
        let ch = cal_h([q; 3]);
        for (got, want) in [(ch[0], 3.5 - q), (ch[1], 3.0 - q), (ch[2], 2.5 - q)] {
            iso_worst = iso_worst.max((got - want).abs());
        }
    }
    f.record(
        iso_worst <= 4.0 * f64::EPSILON,
        format!("isotropic closed forms: worst absolute error {iso_worst:.2e}"),
    );
    f
}

enum Expected {
    Classified {
        cell: &'static str,
        region: Region,
        family: Family,
        h: f64,
        pi: [usize; 3],
    },
    Boundary(&'static str),
}

fn case(q: f64, g: [f64; 3], cell: &'static str, region: Region, family: Family, h: f64, pi: [usize; 3]) -> ([f64; 3], [f64; 3], Expected) {
    (
        [q; 3],
        g,
        Expected::Classified {
            cell,
            region,
            family,
            h,
            pi: pi.map(|i| i - 1),
        },
    )
}

fn classifier_table() -> Finding {
    use Family::*;
    use Region::*;
    let mut cases = vec![
        (
            A,
            ONES,
            Expected::Classified {
                cell: "111",
                region: I,
                family: Y1,
                h: 1.6,
                pi: [0, 1, 2],
            },
        ),
        (
            A,
            [1.0, 0.6, 0.3],
            Expected::Classified {
                cell: "000",
                region: I,
                family: Y0,
                h: 1.05,
                pi: [0, 1, 2],
            },
        ),
    ];
    cases.extend([
        case(2.7, [1.0, 1.0, 1.0], "000", I, Y0, 1.8, [1, 2, 3]),
        case(2.7, [1.0, 1.0, 2.0], "011", I, Y12, 2.3, [1, 2, 3]),
        case(2.7, [2.0, 1.0, 1.0], "-1-10", I, Y12, 2.3, [2, 3, 1]),
        case(2.7, [1.0, 2.0, 1.0], "10-1", I, Y12, 2.3, [1, 3, 2]),
        case(2.7, [1.0, 2.0, 2.0], "110", I, Y1, 2.8, [1, 2, 3]),
        case(2.7, [2.0, 1.0, 2.0], "-101", I, Y1, 2.8, [2, 1, 3]),
        case(2.7, [2.0, 2.0, 1.0], "0-1-1", I, Y1, 2.8, [3, 1, 2]),
        case(2.2, [1.0, 2.0, 3.0], "111", II, Y2, 4.1, [1, 2, 3]),
        case(2.2, [1.0, 3.0, 2.0], "11-1", II, Y2, 4.1, [1, 3, 2]),
        case(2.2, [2.0, 3.0, 1.0], "1-1-1", II, Y2, 4.1, [3, 1, 2]),
        case(2.2, [1.0, 1.0, 2.0], "011", II, Y12, 2.8, [1, 2, 3]),
        case(2.2, [1.0, 2.0, 2.0], "110", II, Y23, 3.6, [1, 2, 3]),
        case(1.8, [3.0, 2.0, 1.0], "-1-1-1", III, Y3, 5.1, [3, 2, 1]),
        case(1.8, [3.0, 1.0, 2.0], "-1-11", III, Y3, 5.1, [2, 3, 1]),
        case(1.8, [2.0, 1.0, 3.0], "-111", III, Y3, 5.1, [2, 1, 3]),
        case(1.8, [1.0, 2.0, 2.0], "110", III, Y23, 4.4, [1, 2, 3]),
        ([2.5; 3], ONES, Expected::Boundary("1/(2q1) + 1/q2 + 1/q3")),
        ([2.0; 3], ONES, Expected::Boundary("1/(2q1) + 1/(2q2) + 1/q3")),
    ]);
    let mut f = Finding::new();
    let mut wrong = Vec::new();
    let mut cells = std::collections::BTreeSet::new();
    for (q, g, want) in &cases {
        let got = classify_scenario(&params(*q), &ScalingVector::new(*g).unwrap());
        let ok = match (want, &got) {
            (Expected::Classified { cell, region, family, h, pi }, Ok(s)) => {
                cells.insert(*cell);
                s.cell.label() == *cell && s.region == *region && s.family == *family && rel(s.h, *h) <= 1e-12 && s.pi == *pi
            }
            (Expected::Boundary(what), Err(Error::Boundary { what: w, .. })) => w == what,
            _ => false,
        };
        if !ok {
            wrong.push(format!("q={q:?} gamma={g:?}: {:?}", got.map(|s| (s.cell.label(), s.region, s.family, s.h, s.pi))));
        }
    }
    f.record(
        cells.len() == 13,
        format!("{} distinct balance cells among {} cases", cells.len(), cases.len()),
    );
    f.record(wrong.is_empty(), format!("{} of {} cases as expected", cases.len() - wrong.len(), cases.len()));
    for w in wrong {
        f.lines.push(format!("     mismatch {w}"));
    }
    f
}

fn covariance_envelope() -> Finding {
    let mut f = Finding::new();
    let ks: Vec<i64> = (20..=100).collect();
    for (name, q) in [("A", A), ("B", B)] {
        let p = params(q);
        let gap = 2.0 - p.q_sum();
        for axis in 0..3 {
            let point = |k: i64| {
                let mut t = [0i64; 3];
                t[axis] = k;
                LatticePoint::new(t[0], t[1], t[2])
            };
            let mut ratios = Vec::new();
            let mut logs = Vec::new();
            for &k in &ks {
                let e = envelope_ratio(&p, point(k), 200).expect("covariance");
                let rho = (k as f64).powf(q[axis]);
                ratios.push(e);
                logs.push((e * rho.powf(-gap)).ln());
            }
            let lk: Vec<f64> = ks.iter().map(|&k| (k as f64).ln()).collect();
            let slope = ols(&lk, &logs).slope;
            let want = -q[axis] * gap;
            let band = ratios.iter().copied().fold(f64::NAN, f64::max) / ratios.iter().copied().fold(f64::NAN, f64::min);
            f.record(
                band <= 10.0 && (slope - want).abs() <= 0.1,
                format!("{name} axis {}: band {band:.3}, exponent {slope:.3} vs {want:.3}", axis + 1),
            );
        }
    }
    f
}

fn summability_by_region() -> Finding {
    let mut f = Finding::new();
    let th = Thresholds::default();
    for q in [A, [6.0, 1.3, 4.0], [1.8; 3]] {
        let s = summability_diagnostics(&params(q), 10_000, &th).expect("diagnostics");
        let describe = |d: &anisofield::verify::SeriesDiagnostic| match d.expected {
            anisofield::verify::Expectation::Convergent => format!("convergent, Cauchy tail {:.2e}", d.cauchy_tail),
            anisofield::verify::Expectation::Divergent { exponent } => {
                format!("divergent, growth {:.3} vs {exponent:.3}", d.growth_exponent)
            }
        };
        f.record(
            s.verdict == Verdict::Pass,
            format!("region {} q={q:?}: axis {}; plane {}", s.region, describe(&s.axis), describe(&s.plane)),
        );
    }
    f
}

fn quad_1e3() -> QuadratureSpec {
    QuadratureSpec {
        target: 1e-3,
        ..QuadratureSpec::default()
    }
}

fn limit_var(family: Family, q: [f64; 3], x: [f64; 3], spec: &QuadratureSpec) -> f64 {
    limit_variance(&LimitKernel::new(family, &params(q), x).unwrap(), spec).unwrap().value
}

fn limit_structure() -> Finding {
    let mut f = Finding::new();
    let spec = quad_1e3();
    let x = [1.0, 0.7, 1.3];
    let members = [
        (Family::Y1, A, [2.0, 0.5, 3.0]),
        (Family::Y2, [2.2; 3], [2.0, 0.5, 3.0]),
        (Family::Y3, [1.8; 3], [2.0, 0.5, 3.0]),
        (Family::Y12, B, [2.0, 3.0, 0.0]),
        (Family::Y23, [2.2; 3], [2.0, 3.0, 0.0]),
        (Family::Y0, B, [3.0, 0.0, 0.0]),
    ];
    for (family, q, s) in members {
        let (m, factor) = self_similarity(family, q, s);
        let got = limit_var(family, q, [x[0] * m[0], x[1] * m[1], x[2] * m[2]], &spec);
        let want = factor * limit_var(family, q, x, &spec);
        let e = rel(got, want);
        f.record(e <= 0.01, format!("self-similarity {family} q={q:?}: relative error {e:.2e}"));
    }
    let xs = [[1.0, 1.0, 1.0], [0.5, 2.0, 1.0], [1.5, 0.5, 0.8]];
    let ys = [[0.7, 1.2, 1.5], [2.0, 0.6, 0.9], [1.0, 1.0, 0.4]];
    for (family, q) in [(Family::Y1, A), (Family::Y2, [2.2; 3]), (Family::Y3, [1.8; 3])] {
        let h = fbs_hurst(family, q).unwrap();
        let p = params(q);
        let v1 = limit_var(family, q, ONES, &spec);
        let mut worst = 0.0f64;
        for x in xs {
            for y in ys {
                let kx = LimitKernel::new(family, &p, x).unwrap();
                let ky = LimitKernel::new(family, &p, y).unwrap();
                let got = limit_covariance(&kx, &ky, &spec).unwrap().value;
                worst = worst.max(rel(got, v1 * fbs_covariance(h, x, y)));
            }
        }
        f.record(
            worst <= 0.02,
            format!("sheet {family} q={q:?} H=({:.3}, {:.3}, {:.3}): worst relative error {worst:.2e} on 3x3 pairs", h[0], h[1], h[2]),
        );
    }
    let p = params(A);
    let ts = [0.5, 1.0, 2.0, 4.0];
    let lt: Vec<f64> = ts.iter().map(|t: &f64| t.ln()).collect();
    let lv: Vec<f64> = ts.iter().map(|&t| theta(&p, t, &spec).unwrap().value.ln()).collect();
    let fitted = ols(&lt, &lv).slope;
    let want = theta_exponent(A);
    let e = rel(fitted, want);
    f.record(e <= 0.02, format!("theta exponent {fitted:.4} vs {want:.4}: relative error {e:.2e}"));
    f
}

fn desk_scale(name: &str, q: [f64; 3]) -> Finding {
    let mut f = Finding::new();
    let s = scenario(q, ONES);
    let cfg = ReportConfig::default();
    let th = cfg.thresholds;
    let radii = radii_for(&s.params, cfg.tail_frac).unwrap();
    let slope = slope_check(&s, &GRID, ONES, radii, &th).unwrap();
    f.record(
        slope.verdict == Verdict::Pass,
        format!("{name} {}: slope/2 = {:.4} vs H = {:.4}", s.family, slope.estimated_h, s.h),
    );
    let l2 = l2_convergence_check(&s, &GRID, ONES, &cfg.quadrature, &th).unwrap();
    let ds: Vec<String> = l2.points.iter().map(|p| format!("{:.4}", p.d)).collect();
    f.record(
        l2.verdict == Verdict::Pass,
        format!("{name} D(4..32) = [{}], decreasing {}", ds.join(", "), l2.decreasing),
    );
    let cm = covariance_match(&s, &cfg.pairs, 32.0, &cfg.quadrature, &th).unwrap();
    let ratios: Vec<String> = cm.rows.iter().map(|r| format!("{:.4}", r.ratio)).collect();
    f.record(
        cm.verdict == Verdict::Pass,
        format!("{name} covariance ratios at lambda = 32: [{}]", ratios.join(", ")),
    );
    f
}

fn universality() -> Finding {
    let mut f = Finding::new();
    let th = Thresholds::default();
    for (name, q) in [("A", A), ("B", B)] {
        let s = scenario(q, ONES);
        let radii = radii_for(&s.params, ReportConfig::default().tail_frac).unwrap();
        let u = universality_check(&s, &[4.0, 8.0, 16.0], ONES, radii, 10_000, 20240611, Innovation::Rademacher, &th).unwrap();
        let zs: Vec<String> = u.rows.iter().map(|r| format!("{:+.2}", r.z)).collect();
        f.record(
            u.verdict == Verdict::Pass,
            format!(
                "{name}: z = [{}]; Monte Carlo slope {:.4}, exact slope {:.4}",
                zs.join(", "),
                u.mc_slope.slope,
                u.exact_slope.slope
            ),
        );
    }
    f
}

fn snapshot(outcome: &Outcome, dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut m = BTreeMap::new();
    m.insert("<stdout>".to_string(), outcome.text.replace(&*dir.to_string_lossy(), "<out>").into_bytes());
    for p in &outcome.files {
        let key = p.strip_prefix(dir).unwrap_or(p).to_string_lossy().into_owned();
        m.insert(key, fs::read(p).unwrap());
    }
    m.insert("<code>".to_string(), outcome.code.to_string().into_bytes());
    m
}

fn determinism() -> Finding {
    let mut f = Finding::new();
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/scenario_b.toml");
    let mut base = RunConfig::load(&root).unwrap();
    base.monte_carlo.replicates = 500;
    base.report.n_max = 1024;
    base.report.cov_lambda = 8.0;
    base.lambda_grid = vec![2.0, 4.0, 8.0, 16.0];
    let tmp = tempfile::tempdir().unwrap();
    let commands: [(&str, fn(&Run) -> anisofield::Result<Outcome>); 7] = [
        ("classify", Run::classify),
        ("exponents", Run::exponents),
        ("simulate", Run::simulate),
        ("variance", Run::variance),
        ("limit-cov", Run::limit_cov),
        ("verify", Run::verify),
        ("report", Run::report),
    ];
    for (name, command) in commands {
        let mut snaps = Vec::new();
        for threads in [1usize, 2, 8] {
            let dir = tmp.path().join(format!("{name}-{threads}"));
            let mut cfg = base.clone();
            cfg.output.dir = dir.clone();
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            let outcome = pool.install(|| command(&Run::new(cfg).unwrap())).unwrap();
            snaps.push(snapshot(&outcome, &dir));
        }
        let same = snaps.windows(2).all(|w| w[0] == w[1]);
        let files = snaps[0].len() - 2;
        f.record(same, format!("{name}: {files} output files byte-identical on 1, 2 and 8 threads"));
    }
    f
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Finding); 9] = [
        ("1 exponent algebra", exponent_algebra),
        ("2 classifier table", classifier_table),
        ("3 covariance envelope", covariance_envelope),
        ("4 summability by region", summability_by_region),
        ("5 limit-field structure", limit_structure),
        ("6 desk scale, scenario A", || desk_scale("A", A)),
        ("6 desk scale, scenario B", || desk_scale("B", B)),
        ("7 universality", universality),
        ("8 determinism", determinism),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = Vec::new();
    let mut summary = Vec::new();
    for (name, run) in criteria {
        if !only.is_empty() && !only.iter().any(|o| name.starts_with(o.as_str())) {
            continue;
        }
        let start = Instant::now();
        let finding = run();
        let secs = start.elapsed().as_secs_f64();
        for l in &finding.lines {
            println!("    {l}");
        }
        let line = format!("criterion {name}: {} ({secs:.1} s)", if finding.pass { "PASS" } else { "FAIL" });
        println!("{line}");
        summary.push(line);
        if !finding.pass {
            failed.push(name);
        }
    }
    println!();
    for l in &summary {
        println!("{l}");
    }
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed: {}", failed.join("; "));
        ExitCode::FAILURE
    }
}
