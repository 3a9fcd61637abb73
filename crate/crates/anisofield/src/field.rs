//! The linear field on finite windows, its partial sums and the discrete
//! kernels h(s) = lambda^{-H} sum over t in K of a(t - s).

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::{s, Array3, Zip};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::{box_covariance, box_covariance_within, outside_mass_radii, pairwise_sum, LatticeBox};
use crate::error::{Error, Result};
use crate::fft::convolve_full;
use crate::geometry::{Scenario, ScalingVector};
use crate::model::{GMode, LatticePoint, ModelConfig, ModelParams};

/// Default bound on the fraction of the square mass of a left outside the radii.
pub const DEFAULT_TAIL_FRAC: f64 = 1e-4;

/// Law of the i.i.d. innovations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Innovation {
    #[default]
    Normal,
    Rademacher,
    /// All innovations zero; a test hook.
    Zero,
}

impl fmt::Display for Innovation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Innovation::Normal => "normal",
            Innovation::Rademacher => "rademacher",
            Innovation::Zero => "zero",
        })
    }
}

impl FromStr for Innovation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "normal" | "gaussian" => Ok(Innovation::Normal),
            "rademacher" => Ok(Innovation::Rademacher),
            "zero" => Ok(Innovation::Zero),
            _ => Err(Error::Config(format!("unknown innovation law '{s}'"))),
        }
    }
}

/// Generator for substream `stream` of `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Fills `out` with innovations in memory order.
fn fill_innovations(out: &mut [f64], rng: &mut ChaCha8Rng, law: Innovation) {
    match law {
        Innovation::Zero => out.iter_mut().for_each(|v| *v = 0.0),
        Innovation::Normal => out.iter_mut().for_each(|v| *v = rng.sample(StandardNormal)),
        Innovation::Rademacher => {
            for chunk in out.chunks_mut(64) {
                let bits = rng.next_u64();
                for (i, v) in chunk.iter_mut().enumerate() {
                    *v = if (bits >> i) & 1 == 1 { 1.0 } else { -1.0 };
                }
            }
        }
    }
}

/// Everything needed to reproduce a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub radii: [u64; 3],
    pub innovation: Innovation,
    pub model: ModelConfig,
}

/// X(t) for t in [1, n_1] x [1, n_2] x [1, n_3]; values[[i, j, k]] = X(i + 1, j + 1, k + 1).
#[derive(Debug, Clone, PartialEq)]
pub struct FieldWindow {
    pub extents: [usize; 3],
    pub values: Array3<f64>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct WindowHeader {
    extents: [usize; 3],
    data: String,
    dtype: String,
    order: String,
    provenance: Provenance,
}

/// a(s) for s in the box [lo, hi].
fn coefficient_block(params: &ModelParams, lo: [i64; 3], hi: [i64; 3]) -> Array3<f64> {
    let shape = [0, 1, 2].map(|j| (hi[j] - lo[j] + 1).max(0) as usize);
    let mut out = Array3::<f64>::zeros(shape);
    Zip::indexed(&mut out).par_for_each(|(i, j, k), v| {
        *v = params.coefficient(LatticePoint::new(lo[0] + i as i64, lo[1] + j as i64, lo[2] + k as i64));
    });
    out
}

/// Fails when the radii leave more than `tail_frac` of the square mass of a outside.
pub fn check_radii(params: &ModelParams, radii: [u64; 3], tail_frac: f64) -> Result<()> {
    let (out, total) = outside_mass_radii(params, radii)?;
    if out <= tail_frac * total {
        Ok(())
    } else {
        Err(Error::Truncation(format!(
            "radii {radii:?} leave {:.3e} of the square mass outside, above {tail_frac:e}",
            out / total
        )))
    }
}

/// Simulates X(t) = sum over |s_i| <= radii[i] of a(s) eps(t - s) on the window.
pub fn simulate_window(
    params: &ModelParams,
    extents: [usize; 3],
    seed: u64,
    radii: [u64; 3],
    innovation: Innovation,
    tail_frac: f64,
) -> Result<FieldWindow> {
    if extents.contains(&0) {
        return Err(Error::InvalidParameter("window extents must be positive".into()));
    }
    check_radii(params, radii, tail_frac)?;
    let provenance = Provenance {
        seed,
        radii,
        innovation,
        model: params.clone().into(),
    };
    if innovation == Innovation::Zero {
        return Ok(FieldWindow {
            extents,
            values: Array3::zeros(extents),
            provenance,
        });
    }
    let r = radii.map(|v| v as i64);
    let kernel = coefficient_block(params, r.map(|v| -v), r);
    let mut eps = Array3::<f64>::zeros([0, 1, 2].map(|j| extents[j] + 2 * radii[j] as usize));
    fill_innovations(eps.as_slice_mut().unwrap(), &mut substream(seed, 0), innovation);
    let conv = convolve_full(&kernel, &eps);
    let r = radii.map(|v| 2 * v as usize);
    let values = conv
        .slice(s![r[0]..r[0] + extents[0], r[1]..r[1] + extents[1], r[2]..r[2] + extents[2]])
        .to_owned();
    Ok(FieldWindow {
        extents,
        values,
        provenance,
    })
}

impl FieldWindow {
    pub fn get(&self, t: LatticePoint) -> f64 {
        self.values[[t.t[0] as usize - 1, t.t[1] as usize - 1, t.t[2] as usize - 1]]
    }

    /// Writes `<stem>.toml` (header) and `<stem>.bin` (little-endian f64, t_1 slowest).
    pub fn write(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir)?;
        let bin = dir.join(format!("{stem}.bin"));
        let head = dir.join(format!("{stem}.toml"));
        let mut bytes = Vec::with_capacity(self.values.len() * 8);
        for v in self.values.iter() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(&bin, bytes)?;
        let header = WindowHeader {
            extents: self.extents,
            data: format!("{stem}.bin"),
            dtype: "f64-le".into(),
            order: "row-major, t1 slowest".into(),
            provenance: self.provenance.clone(),
        };
        let text = toml::to_string(&header).map_err(|e| Error::Config(e.to_string()))?;
        fs::write(&head, text)?;
        Ok((head, bin))
    }

    /// Reads a window written by [`FieldWindow::write`].
    pub fn read(header: &Path) -> Result<FieldWindow> {
        let text = fs::read_to_string(header)?;
        let h: WindowHeader = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        let bin = header.parent().unwrap_or(Path::new(".")).join(&h.data);
        let bytes = fs::read(bin)?;
        let n = h.extents.iter().product::<usize>();
        if bytes.len() != 8 * n {
            return Err(Error::Config(format!("expected {} bytes, found {}", 8 * n, bytes.len())));
        }
        let vals: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        let values = Array3::from_shape_vec(h.extents, vals).map_err(|e| Error::Config(e.to_string()))?;
        Ok(FieldWindow {
            extents: h.extents,
            values,
            provenance: h.provenance,
        })
    }
}

/// floor(lambda^{gamma_i} x_i), tolerant to rounding just below an integer.
pub fn rect_extents(gamma: [f64; 3], lambda: f64, x: [f64; 3]) -> [i64; 3] {
    [0, 1, 2].map(|j| {
        let v = lambda.powf(gamma[j]) * x[j];
        (v * (1.0 + 1e-12)).floor() as i64
    })
}

/// S(x): the sum of X over the rectangle [1, floor(lambda^{gamma_i} x_i)].
pub fn partial_sum(window: &FieldWindow, gamma: &ScalingVector, lambda: f64, x: [f64; 3]) -> Result<f64> {
    let n = rect_extents(gamma.gamma, lambda, x);
    if n.iter().any(|&v| v < 1) {
        return Ok(0.0);
    }
    if (0..3).any(|j| n[j] as usize > window.extents[j]) {
        return Err(Error::InvalidParameter(format!(
            "window {:?} too small for rectangle {:?}",
            window.extents, n
        )));
    }
    let n = n.map(|v| v as usize);
    let block = window.values.slice(s![..n[0], ..n[1], ..n[2]]);
    let rows: Vec<f64> = block
        .outer_iter()
        .map(|plane| {
            let v: Vec<f64> = plane.iter().copied().collect();
            pairwise_sum(&v)
        })
        .collect();
    Ok(pairwise_sum(&rows))
}

/// Inputs of a discrete kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub gamma: [f64; 3],
    pub lambda: f64,
    pub x: [f64; 3],
    /// Exponent of the normalization lambda^{-h}.
    pub h: f64,
    pub radii: [u64; 3],
}

impl KernelSpec {
    pub fn rect(&self) -> LatticeBox {
        LatticeBox::from_extents(rect_extents(self.gamma, self.lambda, self.x))
    }

    /// The rectangle widened by the radii.
    pub fn support(&self) -> LatticeBox {
        let k = self.rect();
        if k.is_empty() {
            return k;
        }
        LatticeBox::new(
            [0, 1, 2].map(|j| k.lo[j] - self.radii[j] as i64),
            [0, 1, 2].map(|j| k.hi[j] + self.radii[j] as i64),
        )
    }

    pub fn norm(&self) -> f64 {
        self.lambda.powf(-self.h)
    }
}

/// h(s) on its support box; values[[i, j, k]] = h(support.lo + (i, j, k)).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteKernel {
    pub spec: KernelSpec,
    pub support: LatticeBox,
    pub values: Array3<f64>,
}

impl DiscreteKernel {
    pub fn get(&self, s: [i64; 3]) -> f64 {
        let lo = self.support.lo;
        if (0..3).any(|j| s[j] < lo[j] || s[j] > self.support.hi[j]) {
            return 0.0;
        }
        self.values[[(s[0] - lo[0]) as usize, (s[1] - lo[1]) as usize, (s[2] - lo[2]) as usize]]
    }

    pub fn sum_squares(&self) -> f64 {
        let rows: Vec<f64> = self
            .values
            .outer_iter()
            .into_par_iter()
            .map(|p| {
                let v: Vec<f64> = p.iter().map(|x| x * x).collect();
                pairwise_sum(&v)
            })
            .collect();
        pairwise_sum(&rows)
    }

    /// (m_1 m_2 m_3)^{1/2} h(ceil(m_1 u_1), ceil(m_2 u_2), ceil(m_3 u_3)).
    pub fn rescaled(&self, m: [u64; 3], u: [f64; 3]) -> f64 {
        let s = [0, 1, 2].map(|j| (m[j] as f64 * u[j]).ceil() as i64);
        ((m[0] * m[1] * m[2]) as f64).sqrt() * self.get(s)
    }
}

fn empty_kernel(spec: &KernelSpec) -> DiscreteKernel {
    DiscreteKernel {
        spec: *spec,
        support: spec.support(),
        values: Array3::zeros([0, 0, 0]),
    }
}

/// The discrete kernel by FFT convolution of a with the rectangle indicator.
pub fn discrete_kernel(params: &ModelParams, spec: &KernelSpec) -> DiscreteKernel {
    let k = spec.rect();
    if k.is_empty() {
        return empty_kernel(spec);
    }
    let n = k.hi;
    let r = spec.radii.map(|v| v as i64);
    // reversed coefficients a(n - 1 + R - k) for k in [0, 2(n + R) - 2]
    let reach = [0, 1, 2].map(|j| n[j] - 1 + r[j]);
    let block = coefficient_block(params, reach.map(|v| -v), reach);
    let rev = block.slice(s![..;-1, ..;-1, ..;-1]).to_owned();
    let ones = Array3::<f64>::ones(n.map(|v| v as usize));
    let conv = convolve_full(&ones, &rev);
    let lo = n.map(|v| (v - 1) as usize);
    let len = [0, 1, 2].map(|j| (n[j] + 2 * r[j]) as usize);
    let norm = spec.norm();
    let values = conv
        .slice(s![lo[0]..lo[0] + len[0], lo[1]..lo[1] + len[1], lo[2]..lo[2] + len[2]])
        .map(|v| v * norm);
    DiscreteKernel {
        spec: *spec,
        support: spec.support(),
        values,
    }
}

/// h(s) at one point by direct summation over the rectangle.
pub fn kernel_value_direct(params: &ModelParams, spec: &KernelSpec, s: [i64; 3]) -> f64 {
    let k = spec.rect();
    if k.is_empty() {
        return 0.0;
    }
    let mut acc = Vec::with_capacity(k.hi[0] as usize);
    for t1 in 1..=k.hi[0] {
        let mut row = 0.0;
        for t2 in 1..=k.hi[1] {
            for t3 in 1..=k.hi[2] {
                row += params.coefficient(LatticePoint::new(t1 - s[0], t2 - s[1], t3 - s[2]));
            }
        }
        acc.push(row);
    }
    spec.norm() * pairwise_sum(&acc)
}

/// The discrete kernel by direct summation; the reference for [`discrete_kernel`].
pub fn discrete_kernel_direct(params: &ModelParams, spec: &KernelSpec) -> DiscreteKernel {
    let sup = spec.support();
    if sup.is_empty() {
        return empty_kernel(spec);
    }
    let shape = [0, 1, 2].map(|j| (sup.hi[j] - sup.lo[j] + 1) as usize);
    let mut values = Array3::<f64>::zeros(shape);
    Zip::indexed(&mut values).par_for_each(|(i, j, k), v| {
        let s = [sup.lo[0] + i as i64, sup.lo[1] + j as i64, sup.lo[2] + k as i64];
        *v = kernel_value_direct(params, spec, s);
    });
    DiscreteKernel {
        spec: *spec,
        support: sup,
        values,
    }
}

/// Variance of lambda^{-H} S(x): the full lattice sum and its part over the support box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimate {
    /// Sum of h(s)^2 over all of Z^3.
    pub value: f64,
    /// Sum of h(s)^2 over the support box.
    pub truncated: f64,
    /// value - truncated.
    pub tail: f64,
    pub error: f64,
}

impl VarianceEstimate {
    fn zero() -> Self {
        VarianceEstimate {
            value: 0.0,
            truncated: 0.0,
            tail: 0.0,
            error: 0.0,
        }
    }

    /// Fails when the part outside the support exceeds `rel` of the value.
    pub fn require_tail(&self, rel: f64) -> Result<&Self> {
        if self.tail.abs() <= rel * self.value.abs() {
            Ok(self)
        } else {
            Err(Error::Truncation(format!(
                "kernel tail {:.3e} exceeds {rel:e} of the variance {:.6e}",
                self.tail, self.value
            )))
        }
    }
}

/// Exact variance of lambda^{-H} S(x) as the square norm of the kernel.
pub fn variance_exact(params: &ModelParams, spec: &KernelSpec) -> Result<VarianceEstimate> {
    let k = spec.rect();
    if k.is_empty() {
        return Ok(VarianceEstimate::zero());
    }
    let sup = spec.support();
    let n2 = spec.norm().powi(2);
    match &params.g {
        GMode::Impulse => {
            let v = k.len() as f64 * n2;
            Ok(VarianceEstimate {
                value: v,
                truncated: v,
                tail: 0.0,
                error: 0.0,
            })
        }
        GMode::ConstantOne => {
            let full = box_covariance(params, &k, &k)?;
            let inner = box_covariance_within(params, &k, &k, &sup)?;
            Ok(VarianceEstimate {
                value: full.value * n2,
                truncated: inner.value * n2,
                tail: (full.value - inner.value) * n2,
                error: (full.error + inner.error) * n2,
            })
        }
        g => {
            let trunc = discrete_kernel(params, spec).sum_squares();
            let plain = params.with_g(GMode::ConstantOne);
            let full = box_covariance(&plain, &k, &k)?;
            let inner = box_covariance_within(&plain, &k, &k, &sup)?;
            let b = g.bound();
            let tail = (full.value - inner.value) * n2;
            Ok(VarianceEstimate {
                value: trunc + tail,
                truncated: trunc,
                tail,
                error: (full.error + inner.error) * n2 + b * b * tail.abs(),
            })
        }
    }
}

/// h~(u) for the scenario's limit: kernel and u in permuted coordinates,
/// `x` and `radii` in original coordinates.
pub fn rescaled_kernel(
    scenario: &Scenario,
    lambda: f64,
    x: [f64; 3],
    u: [f64; 3],
    radii: [u64; 3],
) -> f64 {
    let spec = permuted_spec(scenario, lambda, x, radii);
    let m = scenario.grid_scales(lambda);
    let s = [0, 1, 2].map(|j| (m[j] as f64 * u[j]).ceil() as i64);
    let sup = spec.support();
    if sup.is_empty() || (0..3).any(|j| s[j] < sup.lo[j] || s[j] > sup.hi[j]) {
        return 0.0;
    }
    ((m[0] * m[1] * m[2]) as f64).sqrt() * kernel_value_direct(&scenario.permuted_params(), &spec, s)
}

/// The kernel spec of a scenario in permuted coordinates, normalized by lambda^{-H}.
pub fn permuted_spec(scenario: &Scenario, lambda: f64, x: [f64; 3], radii: [u64; 3]) -> KernelSpec {
    KernelSpec {
        gamma: scenario.permuted_gamma().gamma,
        lambda,
        x: scenario.to_permuted(x),
        h: scenario.h,
        radii: scenario.pi.map(|i| radii[i]),
    }
}

/// One Monte Carlo replicate of S(h) = sum over s of h(s) eps(s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRow {
    pub lambda: f64,
    pub replicate: u64,
    #[serde(rename = "S")]
    pub s: f64,
    pub seed: u64,
}

/// S(h) for replicates 0..reps; replicate r draws from substream r + 1 of `seed`.
pub fn replicate_sums(kernel: &DiscreteKernel, reps: u64, seed: u64, innovation: Innovation) -> Vec<ReplicateRow> {
    let h: Vec<f64> = kernel.values.iter().copied().collect();
    (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(seed, r + 1);
            let mut eps = vec![0.0; 4096];
            let mut partial = Vec::with_capacity(h.len() / 4096 + 1);
            for chunk in h.chunks(4096) {
                let e = &mut eps[..chunk.len()];
                fill_innovations(e, &mut rng, innovation);
                partial.push(chunk.iter().zip(e.iter()).map(|(a, b)| a * b).sum::<f64>());
            }
            ReplicateRow {
                lambda: kernel.spec.lambda,
                replicate: r,
                s: pairwise_sum(&partial),
                seed,
            }
        })
        .collect()
}

/// Writes replicate rows as CSV with the header lambda,replicate,S,seed.
pub fn write_replicates_csv(path: &Path, rows: &[ReplicateRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Config(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::Config(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Sample moments of replicate sums.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    /// Standard error of `variance` from the fourth central moment.
    pub variance_se: f64,
    pub skewness: f64,
    pub kurtosis: f64,
}

pub fn sample_stats(v: &[f64]) -> SampleStats {
    let n = v.len() as f64;
    let mean = pairwise_sum(v) / n;
    let c: Vec<f64> = v.iter().map(|x| x - mean).collect();
    let m2 = pairwise_sum(&c.iter().map(|d| d * d).collect::<Vec<_>>()) / n;
    let m3 = pairwise_sum(&c.iter().map(|d| d * d * d).collect::<Vec<_>>()) / n;
    let m4 = pairwise_sum(&c.iter().map(|d| d * d * d * d).collect::<Vec<_>>()) / n;
    let variance = m2 * n / (n - 1.0);
    SampleStats {
        n: v.len(),
        mean,
        variance,
        variance_se: ((m4 - m2 * m2) / n).max(0.0).sqrt(),
        skewness: m3 / m2.powf(1.5),
        kurtosis: m4 / (m2 * m2),
    }
}
