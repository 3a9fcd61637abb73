//! Run configuration and subcommands of the `anisofield` binary.

use std::fs;
use std::path::{Path, PathBuf};

use anisofield::covariance::radii_for;
use anisofield::field::{
    discrete_kernel, replicate_sums, simulate_window, variance_exact, Innovation, KernelSpec, DEFAULT_TAIL_FRAC,
};
use anisofield::geometry::{classify_scenario, exponents, ScalingVector, Scenario, ScenarioDoc};
use anisofield::limit::{covariance_table, CovRow, QuadratureSpec};
use anisofield::model::{ModelConfig, ModelParams};
use anisofield::verify::{full_report, ReportConfig, Thresholds, Verdict, VerificationReport};
use anisofield::Error;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INVALID_Q: i32 = 3;
pub const EXIT_BOUNDARY: i32 = 4;
pub const EXIT_EXISTENCE: i32 = 5;
pub const EXIT_NUMERICAL: i32 = 6;

/// Process exit status for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidQ { .. } => EXIT_INVALID_Q,
        Error::Boundary { .. } => EXIT_BOUNDARY,
        Error::Existence { .. } => EXIT_EXISTENCE,
        Error::InvalidParameter(_) | Error::Config(_) => EXIT_USAGE,
        Error::Truncation(_) | Error::Quadrature(_) | Error::Io(_) => EXIT_NUMERICAL,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruncationConfig {
    /// Largest allowed share of the square mass of a outside the radii.
    pub tail_frac: f64,
    /// Explicit radii; chosen from `tail_frac` when absent.
    pub radii: Option<[u64; 3]>,
}

impl Default for TruncationConfig {
    fn default() -> Self {
        TruncationConfig {
            tail_frac: DEFAULT_TAIL_FRAC,
            radii: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub extents: [usize; 3],
    pub innovation: Innovation,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            extents: [32, 32, 32],
            innovation: Innovation::Normal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloConfig {
    /// Replicates of S per lambda written by `variance`; 0 skips Monte Carlo.
    pub replicates: u64,
    pub innovation: Innovation,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        MonteCarloConfig {
            replicates: 0,
            innovation: Innovation::Rademacher,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSettings {
    pub cov_lambda: f64,
    pub n_max: i64,
}

impl Default for ReportSettings {
    fn default() -> Self {
        let d = ReportConfig::default();
        ReportSettings {
            cov_lambda: d.cov_lambda,
            n_max: d.n_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("out") }
    }
}

/// Everything a run depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "unit")]
    pub gamma: [f64; 3],
    #[serde(default = "unit_corner")]
    pub corners: Vec<[f64; 3]>,
    /// Point pairs for covariance tables; every pair of corners when empty.
    #[serde(default)]
    pub pairs: Vec<([f64; 3], [f64; 3])>,
    #[serde(default = "default_grid")]
    pub lambda_grid: Vec<f64>,
    pub model: ModelConfig,
    #[serde(default)]
    pub truncation: TruncationConfig,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub monte_carlo: MonteCarloConfig,
    #[serde(default)]
    pub report: ReportSettings,
    #[serde(default)]
    pub output: OutputConfig,
}

fn unit() -> [f64; 3] {
    [1.0; 3]
}

fn unit_corner() -> Vec<[f64; 3]> {
    vec![[1.0; 3]]
}

fn default_grid() -> Vec<f64> {
    ReportConfig::default().lambda_grid
}

impl RunConfig {
    pub fn from_toml(text: &str) -> anisofield::Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> anisofield::Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> anisofield::Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the canonical document with the output directory blanked.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output.dir = PathBuf::new();
        let text = c.to_toml().expect("run configs always serialize");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    /// Checks every value, returning the model and scaling vector.
    pub fn validate(&self) -> anisofield::Result<(ModelParams, ScalingVector)> {
        let params = ModelParams::try_from(self.model.clone())?;
        let gamma = ScalingVector::new(self.gamma)?;
        let corner_ok = |x: &[f64; 3]| x.iter().all(|v| v.is_finite() && *v >= 0.0);
        if self.corners.is_empty() || !self.corners.iter().all(corner_ok) {
            return Err(Error::Config("corners must be a nonempty list of nonnegative points".into()));
        }
        if !self.pairs.iter().all(|(x, y)| corner_ok(x) && corner_ok(y)) {
            return Err(Error::Config("pair points must be nonnegative".into()));
        }
        if self.lambda_grid.is_empty() || !self.lambda_grid.iter().all(|l| l.is_finite() && *l >= 1.0) {
            return Err(Error::Config("lambda_grid must hold values >= 1".into()));
        }
        if !(self.truncation.tail_frac > 0.0 && self.truncation.tail_frac < 1.0) {
            return Err(Error::Config("truncation.tail_frac must lie in (0, 1)".into()));
        }
        self.quadrature.validate()?;
        let t = &self.thresholds;
        if ![t.slope, t.covariance, t.l2, t.cauchy, t.growth, t.sigmas].iter().all(|v| *v > 0.0) {
            return Err(Error::Config("thresholds must be positive".into()));
        }
        if self.simulate.extents.contains(&0) {
            return Err(Error::Config("simulate.extents must be positive".into()));
        }
        if !(self.report.cov_lambda >= 1.0) {
            return Err(Error::Config("report.cov_lambda must be >= 1".into()));
        }
        Ok((params, gamma))
    }

    pub fn point_pairs(&self) -> Vec<([f64; 3], [f64; 3])> {
        if !self.pairs.is_empty() {
            return self.pairs.clone();
        }
        let c = &self.corners;
        (0..c.len()).flat_map(|i| (i..c.len()).map(move |j| (c[i], c[j]))).collect()
    }

    pub fn report_config(&self) -> ReportConfig {
        ReportConfig {
            lambda_grid: self.lambda_grid.clone(),
            x: self.corners[0],
            pairs: self.point_pairs(),
            cov_lambda: self.report.cov_lambda,
            tail_frac: self.truncation.tail_frac,
            n_max: self.report.n_max,
            quadrature: self.quadrature,
            thresholds: self.thresholds,
        }
    }
}

/// A result document tagged with the run it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stamped<T> {
    pub config_hash: String,
    pub seed: u64,
    pub result: T,
}

/// Output of one subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub text: String,
    pub files: Vec<PathBuf>,
    pub code: i32,
}

/// A validated configuration ready to run.
pub struct Run {
    pub config: RunConfig,
    pub params: ModelParams,
    pub gamma: ScalingVector,
    pub hash: String,
    pub out: PathBuf,
}

impl Run {
    pub fn new(config: RunConfig) -> anisofield::Result<Self> {
        let (params, gamma) = config.validate()?;
        Ok(Run {
            hash: config.hash(),
            out: config.output.dir.clone(),
            params,
            gamma,
            config,
        })
    }

    fn stamp<T>(&self, result: T) -> Stamped<T> {
        Stamped {
            config_hash: self.hash.clone(),
            seed: self.config.seed,
            result,
        }
    }

    fn write_toml<T: Serialize>(&self, name: &str, value: &T) -> anisofield::Result<(PathBuf, String)> {
        fs::create_dir_all(&self.out)?;
        let text = toml::to_string(value).map_err(|e| Error::Config(e.to_string()))?;
        let path = self.out.join(name);
        fs::write(&path, &text)?;
        Ok((path, text))
    }

    fn write_csv<T: Serialize>(&self, name: &str, rows: &[T]) -> anisofield::Result<PathBuf> {
        fs::create_dir_all(&self.out)?;
        let mut buf = format!("# config_hash={} seed={}\n", self.hash, self.config.seed).into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            for r in rows {
                w.serialize(r).map_err(|e| Error::Config(e.to_string()))?;
            }
            w.flush()?;
        }
        let path = self.out.join(name);
        fs::write(&path, buf)?;
        Ok(path)
    }

    fn scenario(&self) -> anisofield::Result<Scenario> {
        classify_scenario(&self.params, &self.gamma)
    }

    fn radii(&self) -> anisofield::Result<[u64; 3]> {
        match self.config.truncation.radii {
            Some(r) => Ok(r),
            None => radii_for(&self.params, self.config.truncation.tail_frac),
        }
    }

    pub fn classify(&self) -> anisofield::Result<Outcome> {
        let doc: ScenarioDoc = self.scenario()?.document();
        let (path, text) = self.write_toml("classify.toml", &self.stamp(doc))?;
        Ok(Outcome {
            text,
            files: vec![path],
            code: EXIT_OK,
        })
    }

    pub fn exponents(&self) -> anisofield::Result<Outcome> {
        let doc = ExponentsDoc {
            q: self.params.q,
            gamma: self.gamma.gamma,
            exponents: exponents(&self.params, &self.gamma),
        };
        let (path, text) = self.write_toml("exponents.toml", &self.stamp(doc))?;
        Ok(Outcome {
            text,
            files: vec![path],
            code: EXIT_OK,
        })
    }

    pub fn simulate(&self) -> anisofield::Result<Outcome> {
        let s = &self.config.simulate;
        let radii = self.radii()?;
        let w = simulate_window(
            &self.params,
            s.extents,
            self.config.seed,
            radii,
            s.innovation,
            self.config.truncation.tail_frac,
        )?;
        let (head, bin) = w.write(&self.out, "window")?;
        let manifest = SimulateDoc {
            window: "window.toml".into(),
            extents: s.extents,
            radii,
            innovation: s.innovation,
        };
        let (path, text) = self.write_toml("simulate.toml", &self.stamp(manifest))?;
        Ok(Outcome {
            text,
            files: vec![path, head, bin],
            code: EXIT_OK,
        })
    }

    pub fn variance(&self) -> anisofield::Result<Outcome> {
        let scenario = self.scenario()?;
        let radii = self.radii()?;
        let mut rows = Vec::new();
        let mut reps = Vec::new();
        for &lambda in &self.config.lambda_grid {
            for &x in &self.config.corners {
                let spec = KernelSpec {
                    gamma: self.gamma.gamma,
                    lambda,
                    x,
                    h: scenario.h,
                    radii,
                };
                let v = variance_exact(&self.params, &spec)?;
                rows.push(VarianceRow {
                    lambda,
                    x1: x[0],
                    x2: x[1],
                    x3: x[2],
                    h: scenario.h,
                    variance: v.value,
                    truncated: v.truncated,
                    tail: v.tail,
                });
            }
            let mc = &self.config.monte_carlo;
            if mc.replicates > 0 {
                let spec = KernelSpec {
                    gamma: self.gamma.gamma,
                    lambda,
                    x: self.config.corners[0],
                    h: scenario.h,
                    radii,
                };
                let k = discrete_kernel(&self.params, &spec);
                reps.extend(replicate_sums(&k, mc.replicates, self.config.seed, mc.innovation));
            }
        }
        let mut files = vec![self.write_csv("variance.csv", &rows)?];
        if !reps.is_empty() {
            files.push(self.write_csv("replicates.csv", &reps)?);
        }
        let text = rows
            .iter()
            .map(|r| {
                format!(
                    "lambda={} x=({}, {}, {}) var={:.10e} truncated={:.10e}",
                    r.lambda, r.x1, r.x2, r.x3, r.variance, r.truncated
                )
            })
            .collect::<Vec<_>>()
            .join("\n");
        Ok(Outcome {
            text,
            files,
            code: EXIT_OK,
        })
    }

    pub fn limit_cov(&self) -> anisofield::Result<Outcome> {
        let scenario = self.scenario()?;
        let pairs = self.config.point_pairs();
        let permuted: Vec<_> = pairs.iter().map(|&(x, y)| (scenario.to_permuted(x), scenario.to_permuted(y))).collect();
        let mut rows = covariance_table(scenario.family, &scenario.permuted_params(), &permuted, &self.config.quadrature)?;
        for (r, (x, y)) in rows.iter_mut().zip(&pairs) {
            (r.x1, r.x2, r.x3) = (x[0], x[1], x[2]);
            (r.y1, r.y2, r.y3) = (y[0], y[1], y[2]);
        }
        let path = self.write_csv::<CovRow>("limit_cov.csv", &rows)?;
        let text = rows
            .iter()
            .map(|r| {
                format!(
                    "{} x=({}, {}, {}) y=({}, {}, {}) cov={:.10e} +- {:.1e}",
                    r.family, r.x1, r.x2, r.x3, r.y1, r.y2, r.y3, r.value, r.est_error
                )
            })
            .collect::<Vec<_>>()
            .join("\n");
        Ok(Outcome {
            text,
            files: vec![path],
            code: EXIT_OK,
        })
    }

    fn run_report(&self) -> anisofield::Result<(VerificationReport, PathBuf, i32)> {
        let report = full_report(&self.params, &self.gamma, &self.config.report_config())?;
        let code = if report.rejection.is_some() {
            EXIT_BOUNDARY
        } else if report.all_pass() {
            EXIT_OK
        } else {
            EXIT_CHECK_FAILED
        };
        let (path, _) = self.write_toml("report.toml", &self.stamp(report.clone()))?;
        Ok((report, path, code))
    }

    pub fn verify(&self) -> anisofield::Result<Outcome> {
        let (report, path, code) = self.run_report()?;
        Ok(Outcome {
            text: summary_lines(&report),
            files: vec![path],
            code,
        })
    }

    /// The verification report plus a CSV summary table.
    pub fn report(&self) -> anisofield::Result<Outcome> {
        let (report, path, code) = self.run_report()?;
        let rows: Vec<SummaryRow> = report
            .verdicts
            .iter()
            .map(|v| SummaryRow {
                check: v.check.clone(),
                verdict: v.verdict,
                criterion: v.criterion.clone(),
            })
            .collect();
        let csv = self.write_csv("summary.csv", &rows)?;
        Ok(Outcome {
            text: summary_lines(&report),
            files: vec![path, csv],
            code,
        })
    }
}

fn summary_lines(report: &VerificationReport) -> String {
    if let Some(r) = &report.rejection {
        return format!("rejected: {r}");
    }
    let mut lines: Vec<String> = report
        .verdicts
        .iter()
        .map(|v| format!("{:<12} {:<12} {}", v.check, verdict_name(v.verdict), v.criterion))
        .collect();
    lines.push(format!("overall      {}", if report.all_pass() { "pass" } else { "fail" }));
    lines.join("\n")
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "pass",
        Verdict::Fail => "fail",
        Verdict::Inconclusive => "inconclusive",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentsDoc {
    pub q: [f64; 3],
    pub gamma: [f64; 3],
    pub exponents: anisofield::geometry::Exponents,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateDoc {
    pub window: String,
    pub extents: [usize; 3],
    pub radii: [u64; 3],
    pub innovation: Innovation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceRow {
    pub lambda: f64,
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
    pub h: f64,
    pub variance: f64,
    pub truncated: f64,
    pub tail: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub check: String,
    pub verdict: Verdict,
    pub criterion: String,
}

/// Reads a CSV written by a subcommand, skipping the stamp line.
pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> anisofield::Result<Vec<T>> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Error::Config(e.to_string()))?;
    r.deserialize().map(|row| row.map_err(|e| Error::Config(e.to_string()))).collect()
}
