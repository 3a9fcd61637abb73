//! Numerical checks of the scaling limit: variance slopes, L2 kernel
//! convergence, covariance structure, summability, and report assembly.

use serde::{Deserialize, Serialize};

use crate::covariance::{axis_partial_sum, box_covariance, laws, plane_partial_sum, radii_for, LatticeBox};
use crate::error::{Error, Result};
use crate::field::{discrete_kernel, permuted_spec, replicate_sums, sample_stats, variance_exact, Innovation, KernelSpec};
use crate::geometry::{classify_scenario, region, Region, ScalingVector, Scenario, ScenarioDoc};
use crate::laplace::{AxisPairing, Bilinear, EngineOptions, LatticeProfile};
use crate::limit::{limit_covariance, limit_variance, LimitKernel, QuadratureSpec};
use crate::model::{admissibility, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn of(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

/// Pass thresholds; every verdict in a report refers to one of these.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Allowed |slope/2 - H|.
    pub slope: f64,
    /// Allowed |ratio - 1| of discrete to limit covariances.
    pub covariance: f64,
    /// Upper bound on D at the largest lambda.
    pub l2: f64,
    /// Upper bound on the relative Cauchy tail of a convergent series.
    pub cauchy: f64,
    /// Allowed |fitted - predicted| growth exponent of a divergent series.
    pub growth: f64,
    /// Number of standard errors allowed between Monte Carlo and exact variances.
    pub sigmas: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            slope: 0.05,
            covariance: 0.10,
            l2: 0.1,
            cauchy: 1e-3,
            growth: 0.1,
            sigmas: 3.0,
        }
    }
}

/// Ordinary least squares y = a + b x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub r2: f64,
}

pub fn ols(xs: &[f64], ys: &[f64]) -> LineFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let slope_se = if xs.len() > 2 { (sse / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    LineFit {
        slope,
        intercept,
        slope_se,
        r2,
    }
}

fn check_grid(grid: &[f64], octaves: f64) -> Result<()> {
    let lo = grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = grid.iter().cloned().fold(0.0, f64::max);
    if grid.len() < 2 || !(lo > 0.0) || (hi / lo).log2() < octaves - 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "lambda grid {grid:?} must be positive and span at least {octaves} octaves"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub lambdas: Vec<f64>,
    /// Var S(x) at each lambda, unnormalized.
    pub variances: Vec<f64>,
    pub fit: LineFit,
    /// slope / 2.
    pub estimated_h: f64,
    pub expected_h: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
}

/// OLS of log Var S(x) against log lambda; the slope estimates 2H.
pub fn slope_check(scenario: &Scenario, grid: &[f64], x: [f64; 3], radii: [u64; 3], th: &Thresholds) -> Result<SlopeFit> {
    check_grid(grid, 3.0)?;
    let mut vars = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let spec = KernelSpec {
            gamma: scenario.gamma.gamma,
            lambda,
            x,
            h: 0.0,
            radii,
        };
        vars.push(variance_exact(&scenario.params, &spec)?.value);
    }
    if vars.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidParameter("slope check needs positive variances".into()));
    }
    let lx: Vec<f64> = grid.iter().map(|l| l.ln()).collect();
    let ly: Vec<f64> = vars.iter().map(|v| v.ln()).collect();
    let fit = ols(&lx, &ly);
    let estimated_h = fit.slope / 2.0;
    Ok(SlopeFit {
        lambdas: grid.to_vec(),
        variances: vars,
        fit,
        estimated_h,
        expected_h: scenario.h,
        tolerance: th.slope,
        verdict: Verdict::of((estimated_h - scenario.h).abs() <= th.slope),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L2Point {
    pub lambda: f64,
    /// Relative square distance between the rescaled kernel and the limit kernel.
    pub d: f64,
    pub kernel_norm: f64,
    pub cross: f64,
    pub limit_norm: f64,
}

/// D(lambda) for the scenario's limit kernel at corner x (original coordinates).
pub fn l2_discrepancy(scenario: &Scenario, lambda: f64, x: [f64; 3], quad: &QuadratureSpec) -> Result<L2Point> {
    let p = scenario.permuted_params();
    let spec = permuted_spec(scenario, lambda, x, [0; 3]);
    let k = LimitKernel::new(scenario.family, &p, spec.x)?;
    let rect = spec.rect();
    if k.is_degenerate() || rect.is_empty() {
        let kn = if rect.is_empty() { 0.0 } else { variance_exact(&p, &spec)?.value };
        let ln = if k.is_degenerate() { 0.0 } else { limit_variance(&k, quad)?.value };
        let d = if kn == 0.0 && ln == 0.0 { 0.0 } else { 1.0 };
        return Ok(L2Point {
            lambda,
            d,
            kernel_norm: kn,
            cross: 0.0,
            limit_norm: ln,
        });
    }
    let kernel_norm = variance_exact(&p, &spec)?.value;
    let limit_norm = limit_variance(&k, quad)?.value;
    let m = scenario.grid_scales(lambda);
    let axes = [0, 1, 2].map(|j| AxisPairing::Mixed {
        a: LatticeProfile::Box(rect.lo[j], rect.hi[j]),
        b: k.profile(j),
        pitch: m[j] as f64,
    });
    let raw = Bilinear::new(p.nu, laws(&p), axes).evaluate(&EngineOptions::default())?;
    let cross = raw.value * spec.norm() * ((m[0] * m[1] * m[2]) as f64).sqrt();
    Ok(L2Point {
        lambda,
        d: (kernel_norm - 2.0 * cross + limit_norm) / limit_norm,
        kernel_norm,
        cross,
        limit_norm,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L2Curve {
    pub points: Vec<L2Point>,
    pub decreasing: bool,
    pub last: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
    pub note: String,
}

/// D along the grid; passes when strictly decreasing with D(last) below the threshold.
pub fn l2_convergence_check(scenario: &Scenario, grid: &[f64], x: [f64; 3], quad: &QuadratureSpec, th: &Thresholds) -> Result<L2Curve> {
    let points = grid
        .iter()
        .map(|&l| l2_discrepancy(scenario, l, x, quad))
        .collect::<Result<Vec<_>>>()?;
    let decreasing = points.windows(2).all(|w| w[1].d < w[0].d);
    let last = points.last().map_or(0.0, |p| p.d);
    Ok(L2Curve {
        decreasing,
        last,
        tolerance: th.l2,
        verdict: Verdict::of(decreasing && last < th.l2),
        note: "no convergence rate is known; a decreasing D with a small final value is a surrogate".into(),
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovMatchRow {
    pub x: [f64; 3],
    pub y: [f64; 3],
    pub discrete: f64,
    pub limit: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovMatch {
    pub lambda: f64,
    pub rows: Vec<CovMatchRow>,
    pub tolerance: f64,
    pub verdict: Verdict,
}

/// Cov(lambda^{-H} S(x), lambda^{-H} S(y)) against the limit covariance.
pub fn covariance_match(
    scenario: &Scenario,
    pairs: &[([f64; 3], [f64; 3])],
    lambda: f64,
    quad: &QuadratureSpec,
    th: &Thresholds,
) -> Result<CovMatch> {
    let p = scenario.permuted_params();
    let mut rows = Vec::with_capacity(pairs.len());
    for &(x, y) in pairs {
        let sx = permuted_spec(scenario, lambda, x, [0; 3]);
        let sy = permuted_spec(scenario, lambda, y, [0; 3]);
        let (kx, ky) = (sx.rect(), sy.rect());
        let discrete = if kx.is_empty() || ky.is_empty() {
            0.0
        } else {
            box_covariance(&p, &kx, &ky)?.value * sx.norm() * sy.norm()
        };
        let limit = limit_covariance(
            &LimitKernel::new(scenario.family, &p, sx.x)?,
            &LimitKernel::new(scenario.family, &p, sy.x)?,
            quad,
        )?
        .value;
        rows.push(CovMatchRow {
            x,
            y,
            discrete,
            limit,
            ratio: discrete / limit,
        });
    }
    let ok = rows.iter().all(|r| (r.ratio - 1.0).abs() <= th.covariance);
    Ok(CovMatch {
        lambda,
        rows,
        tolerance: th.covariance,
        verdict: Verdict::of(ok),
    })
}

/// Lattice box of the half-open real rectangle (lambda^gamma lo, lambda^gamma hi].
pub fn rectangle_box(gamma: [f64; 3], lambda: f64, lo: [f64; 3], hi: [f64; 3]) -> LatticeBox {
    let a = crate::field::rect_extents(gamma, lambda, lo);
    let b = crate::field::rect_extents(gamma, lambda, hi);
    LatticeBox::new(a.map(|v| v + 1), b)
}

/// Covariance of normalized discrete increments over two rectangles (permuted coordinates).
pub fn increment_covariance_discrete(
    scenario: &Scenario,
    lambda: f64,
    r1: ([f64; 3], [f64; 3]),
    r2: ([f64; 3], [f64; 3]),
) -> Result<f64> {
    let g = scenario.permuted_gamma().gamma;
    let b1 = rectangle_box(g, lambda, r1.0, r1.1);
    let b2 = rectangle_box(g, lambda, r2.0, r2.1);
    if b1.is_empty() || b2.is_empty() {
        return Ok(0.0);
    }
    let n = lambda.powf(-scenario.h);
    Ok(box_covariance(&scenario.permuted_params(), &b1, &b2)?.value * n * n)
}

/// Expected behavior of a series of |r| values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Expectation {
    Convergent,
    Divergent { exponent: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesDiagnostic {
    pub name: String,
    pub ns: Vec<i64>,
    pub sums: Vec<f64>,
    /// Slope of log(S(2N) - S(N)) against log N.
    pub growth_exponent: f64,
    /// (S(N) - S(N/2)) / S(N) at the largest N.
    pub cauchy_tail: f64,
    pub expected: Expectation,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summability {
    pub region: Region,
    pub r0: f64,
    pub axis: SeriesDiagnostic,
    pub plane: SeriesDiagnostic,
    pub verdict: Verdict,
}

fn growth_prediction(q: [f64; 3]) -> (f64, f64) {
    let gap = 2.0 - (1.0 / q[0] + 1.0 / q[1] + 1.0 / q[2]);
    let axis = 1.0 - q[2] * gap;
    let plane = q[1].min(q[2]) * (1.0 / q[1] + 1.0 / q[2] - gap);
    (axis, plane)
}

fn diagnose(name: &str, ns: Vec<i64>, sums: Vec<f64>, expected: Expectation, th: &Thresholds) -> SeriesDiagnostic {
    // sums are at N_0, 2 N_0, 4 N_0, ...
    let lx: Vec<f64> = ns[..ns.len() - 1].iter().map(|&n| (n as f64).ln()).collect();
    let ly: Vec<f64> = sums.windows(2).map(|w| (w[1] - w[0]).max(1e-300).ln()).collect();
    let growth_exponent = ols(&lx, &ly).slope;
    let k = sums.len() - 1;
    let cauchy_tail = (sums[k] - sums[k - 1]) / sums[k];
    let increasing = sums.windows(2).all(|w| w[1] > w[0]);
    let ok = match expected {
        Expectation::Convergent => cauchy_tail < th.cauchy,
        Expectation::Divergent { exponent } => {
            increasing && growth_exponent > 0.0 && (growth_exponent - exponent).abs() <= th.growth
        }
    };
    SeriesDiagnostic {
        name: name.into(),
        ns,
        sums,
        growth_exponent,
        cauchy_tail,
        expected,
        verdict: Verdict::of(ok),
    }
}

/// Axis and plane partial sums of |r| (r >= 0 here) on N = n_max / 2^k, k = 4..0.
pub fn summability_diagnostics(params: &ModelParams, n_max: i64, th: &Thresholds) -> Result<Summability> {
    if n_max < 64 {
        return Err(Error::InvalidParameter(format!("n_max = {n_max} is too small for a stable fit")));
    }
    let region = region(params)?;
    let ns: Vec<i64> = (0..5).rev().map(|k| n_max >> k).collect();
    let mut axis = Vec::new();
    let mut plane = Vec::new();
    for &n in &ns {
        axis.push(axis_partial_sum(params, 2, n)?.value);
        plane.push(plane_partial_sum(params, (1, 2), n)?.value);
    }
    let r0 = axis_partial_sum(params, 2, 0)?.value;
    let (ea, ep) = growth_prediction(params.q);
    let (axis_exp, plane_exp) = match region {
        Region::I => (Expectation::Convergent, Expectation::Convergent),
        Region::II => (Expectation::Convergent, Expectation::Divergent { exponent: ep }),
        Region::III => (Expectation::Divergent { exponent: ea }, Expectation::Divergent { exponent: ep.max(ea) }),
    };
    let axis = diagnose("axis t3", ns.clone(), axis, axis_exp, th);
    let plane = diagnose("plane (t2, t3)", ns, plane, plane_exp, th);
    let verdict = match region {
        Region::III => axis.verdict,
        _ => Verdict::of(axis.verdict == Verdict::Pass && plane.verdict == Verdict::Pass),
    };
    Ok(Summability {
        region,
        r0,
        axis,
        plane,
        verdict,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniversalityRow {
    pub lambda: f64,
    pub mc_variance: f64,
    pub mc_se: f64,
    pub exact_variance: f64,
    /// (mc - exact) / se.
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Universality {
    pub innovation: Innovation,
    pub replicates: u64,
    pub rows: Vec<UniversalityRow>,
    pub mc_slope: LineFit,
    pub exact_slope: LineFit,
    pub verdict: Verdict,
}

/// Monte Carlo variances of lambda^{-H} S(x) against the exact variance of the same kernel.
pub fn universality_check(
    scenario: &Scenario,
    grid: &[f64],
    x: [f64; 3],
    radii: [u64; 3],
    replicates: u64,
    seed: u64,
    innovation: Innovation,
    th: &Thresholds,
) -> Result<Universality> {
    let mut rows = Vec::new();
    for &lambda in grid {
        let spec = KernelSpec {
            gamma: scenario.gamma.gamma,
            lambda,
            x,
            h: scenario.h,
            radii,
        };
        let kernel = discrete_kernel(&scenario.params, &spec);
        let exact = variance_exact(&scenario.params, &spec)?.truncated;
        let s: Vec<f64> = replicate_sums(&kernel, replicates, seed, innovation).iter().map(|r| r.s).collect();
        let st = sample_stats(&s);
        rows.push(UniversalityRow {
            lambda,
            mc_variance: st.variance,
            mc_se: st.variance_se,
            exact_variance: exact,
            z: (st.variance - exact) / st.variance_se,
        });
    }
    let lx: Vec<f64> = rows.iter().map(|r| r.lambda.ln()).collect();
    let mc_slope = ols(&lx, &rows.iter().map(|r| r.mc_variance.ln()).collect::<Vec<_>>());
    let exact_slope = ols(&lx, &rows.iter().map(|r| r.exact_variance.ln()).collect::<Vec<_>>());
    let ok = rows.iter().all(|r| r.z.abs() <= th.sigmas);
    Ok(Universality {
        innovation,
        replicates,
        rows,
        mc_slope,
        exact_slope,
        verdict: Verdict::of(ok),
    })
}

/// Settings of a full report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub lambda_grid: Vec<f64>,
    pub x: [f64; 3],
    pub pairs: Vec<([f64; 3], [f64; 3])>,
    pub cov_lambda: f64,
    pub tail_frac: f64,
    pub n_max: i64,
    pub quadrature: QuadratureSpec,
    pub thresholds: Thresholds,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            lambda_grid: vec![4.0, 8.0, 16.0, 32.0],
            x: [1.0; 3],
            pairs: vec![
                ([1.0, 1.0, 1.0], [1.0, 1.0, 1.0]),
                ([1.0, 1.0, 1.0], [0.5, 1.0, 1.0]),
                ([1.0, 0.5, 1.0], [0.5, 1.0, 0.5]),
            ],
            cov_lambda: 32.0,
            tail_frac: 1e-4,
            n_max: 10_000,
            quadrature: QuadratureSpec::default(),
            thresholds: Thresholds::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckVerdict {
    pub check: String,
    pub verdict: Verdict,
    pub criterion: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub scenario: Option<ScenarioDoc>,
    pub rejection: Option<String>,
    pub lambda_grid: Vec<f64>,
    pub thresholds: Thresholds,
    pub slope_fit: Option<SlopeFit>,
    pub l2_curve: Option<L2Curve>,
    pub cov_match: Option<CovMatch>,
    pub diagnostics: Option<Summability>,
    pub verdicts: Vec<CheckVerdict>,
}

impl VerificationReport {
    /// Pass when every check passed and nothing was rejected.
    pub fn all_pass(&self) -> bool {
        self.rejection.is_none() && self.verdicts.iter().all(|v| v.verdict == Verdict::Pass)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

fn failed(check: &str, err: &Error) -> CheckVerdict {
    CheckVerdict {
        check: check.into(),
        verdict: Verdict::Inconclusive,
        criterion: format!("not evaluated: {err}"),
    }
}

/// classify, then the slope, L2, covariance and summability checks.
/// Invalid Q is an error; boundary cases give a report carrying the rejection.
pub fn full_report(params: &ModelParams, gamma: &ScalingVector, cfg: &ReportConfig) -> Result<VerificationReport> {
    admissibility(params).check()?;
    let th = cfg.thresholds;
    let mut report = VerificationReport {
        scenario: None,
        rejection: None,
        lambda_grid: cfg.lambda_grid.clone(),
        thresholds: th,
        slope_fit: None,
        l2_curve: None,
        cov_match: None,
        diagnostics: None,
        verdicts: Vec::new(),
    };
    let scenario = match classify_scenario(params, gamma) {
        Ok(s) => s,
        Err(e) if e.is_boundary() => {
            report.rejection = Some(format!("{e}; no limit theorem covers boundary cases"));
            return Ok(report);
        }
        Err(e) => return Err(e),
    };
    report.scenario = Some(scenario.document());
    let radii = radii_for(params, cfg.tail_frac)?;

    match slope_check(&scenario, &cfg.lambda_grid, cfg.x, radii, &th) {
        Ok(s) => {
            report.verdicts.push(CheckVerdict {
                check: "slope".into(),
                verdict: s.verdict,
                criterion: format!("|slope/2 - H| = |{:.4} - {:.4}| <= {}", s.estimated_h, s.expected_h, th.slope),
            });
            report.slope_fit = Some(s);
        }
        Err(e) => report.verdicts.push(failed("slope", &e)),
    }
    match l2_convergence_check(&scenario, &cfg.lambda_grid, cfg.x, &cfg.quadrature, &th) {
        Ok(c) => {
            report.verdicts.push(CheckVerdict {
                check: "l2".into(),
                verdict: c.verdict,
                criterion: format!("D strictly decreasing ({}) and D(last) = {:.4} < {}", c.decreasing, c.last, th.l2),
            });
            report.l2_curve = Some(c);
        }
        Err(e) => report.verdicts.push(failed("l2", &e)),
    }
    match covariance_match(&scenario, &cfg.pairs, cfg.cov_lambda, &cfg.quadrature, &th) {
        Ok(c) => {
            let worst = c.rows.iter().map(|r| (r.ratio - 1.0).abs()).fold(0.0, f64::max);
            report.verdicts.push(CheckVerdict {
                check: "covariance".into(),
                verdict: c.verdict,
                criterion: format!("max |ratio - 1| = {worst:.4} <= {}", th.covariance),
            });
            report.cov_match = Some(c);
        }
        Err(e) => report.verdicts.push(failed("covariance", &e)),
    }
    match summability_diagnostics(params, cfg.n_max, &th) {
        Ok(d) => {
            report.verdicts.push(CheckVerdict {
                check: "summability".into(),
                verdict: d.verdict,
                criterion: format!(
                    "region {}: convergent series Cauchy tail < {}, divergent growth exponent within {} of prediction",
                    d.region, th.cauchy, th.growth
                ),
            });
            report.diagnostics = Some(d);
        }
        Err(e) => report.verdicts.push(failed("summability", &e)),
    }
    Ok(report)
}
