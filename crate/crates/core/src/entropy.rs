//! Numerical verification lab for the entropy claims behind the proxy:
//! empirical one-dimensional entropy, multivariate Gaussian differential
//! entropy, a max-pool window scanner, and the four proposition checks.
//!
//! Monte-Carlo trials use counter-based seeding — trial `t` of a run seeded
//! with `s` always draws from `ChaCha8(s, t)` — so reports are reproducible
//! given `(seed, trials)` and independent of any parallel execution.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::arch::{KernelSpec, PoolSpec, StrideSpec};

/// log2(2*pi*e), the per-dimension additive constant of Gaussian entropy.
pub const LOG2_TAU_E: f64 = 4.094191170361282;

/// Errors from the lab's numerical operations.
#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EntropyError {
    #[error("field entries length {got} does not match extents {w}x{h}x{c}")]
    ShapeMismatch {
        w: usize,
        h: usize,
        c: usize,
        got: usize,
    },
    #[error("field entries must be finite")]
    NonFiniteEntries,
    #[error("pool window {o_w}x{o_h} larger than field {w}x{h}")]
    PoolTooLarge {
        o_w: usize,
        o_h: usize,
        w: usize,
        h: usize,
    },
    #[error("covariance matrix is not symmetric within 1e-12")]
    Asymmetric,
    #[error("covariance matrix is not positive semi-definite (min eigenvalue {min_eig:.3e})")]
    NotPositiveSemiDefinite { min_eig: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("window index out of bounds: {0}")]
    WindowOutOfBounds(String),
}

// ---------------------------------------------------------------------------
// Feature fields and windows
// ---------------------------------------------------------------------------

/// A dense w x h x c tensor of finite values. Entry (i, j, v) lives at
/// `(i * h + j) * c + v`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureField {
    pub w: usize,
    pub h: usize,
    pub c: usize,
    entries: Vec<f64>,
}

impl FeatureField {
    pub fn new(w: usize, h: usize, c: usize, entries: Vec<f64>) -> Result<Self, EntropyError> {
        if entries.len() != w * h * c {
            return Err(EntropyError::ShapeMismatch {
                w,
                h,
                c,
                got: entries.len(),
            });
        }
        if entries.iter().any(|e| !e.is_finite()) {
            return Err(EntropyError::NonFiniteEntries);
        }
        Ok(Self { w, h, c, entries })
    }

    pub fn constant(w: usize, h: usize, c: usize, value: f64) -> Result<Self, EntropyError> {
        Self::new(w, h, c, vec![value; w * h * c])
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, v: usize) -> f64 {
        self.entries[(i * self.h + j) * self.c + v]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Extracts the subtensor selected by a window.
    pub fn subtensor(&self, window: &SubtensorWindow) -> Result<FeatureField, EntropyError> {
        window.check_bounds(self.w, self.h, self.c)?;
        let mut out =
            Vec::with_capacity(window.alpha.len() * window.beta.len() * window.gamma.len());
        for &i in &window.alpha {
            for &j in &window.beta {
                for &v in &window.gamma {
                    out.push(self.get(i, j, v));
                }
            }
        }
        FeatureField::new(
            window.alpha.len(),
            window.beta.len(),
            window.gamma.len(),
            out,
        )
    }
}

/// Index selection along each axis: strictly increasing, 0-based, in bounds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubtensorWindow {
    pub alpha: Vec<usize>,
    pub beta: Vec<usize>,
    pub gamma: Vec<usize>,
}

impl SubtensorWindow {
    pub fn new(
        alpha: Vec<usize>,
        beta: Vec<usize>,
        gamma: Vec<usize>,
    ) -> Result<Self, EntropyError> {
        for (name, seq) in [("alpha", &alpha), ("beta", &beta), ("gamma", &gamma)] {
            if seq.is_empty() {
                return Err(EntropyError::InvalidParameter(format!("{name} is empty")));
            }
            if seq.windows(2).any(|p| p[0] >= p[1]) {
                return Err(EntropyError::InvalidParameter(format!(
                    "{name} must be strictly increasing"
                )));
            }
        }
        Ok(Self { alpha, beta, gamma })
    }

    /// A contiguous window starting at (i0, j0, v0).
    pub fn contiguous(
        i0: usize,
        len_w: usize,
        j0: usize,
        len_h: usize,
        v0: usize,
        len_c: usize,
    ) -> Result<Self, EntropyError> {
        Self::new(
            (i0..i0 + len_w).collect(),
            (j0..j0 + len_h).collect(),
            (v0..v0 + len_c).collect(),
        )
    }

    fn check_bounds(&self, w: usize, h: usize, c: usize) -> Result<(), EntropyError> {
        let over = |seq: &[usize], bound: usize| seq.last().is_some_and(|&m| m >= bound);
        if over(&self.alpha, w) || over(&self.beta, h) || over(&self.gamma, c) {
            return Err(EntropyError::WindowOutOfBounds(format!(
                "window {:?}/{:?}/{:?} in {w}x{h}x{c}",
                self.alpha, self.beta, self.gamma
            )));
        }
        Ok(())
    }

    /// Flattened entry indices of the window in a w x h x c field.
    pub fn flat_indices(&self, w: usize, h: usize, c: usize) -> Result<Vec<usize>, EntropyError> {
        self.check_bounds(w, h, c)?;
        let mut out = Vec::with_capacity(self.alpha.len() * self.beta.len() * self.gamma.len());
        for &i in &self.alpha {
            for &j in &self.beta {
                for &v in &self.gamma {
                    out.push((i * h + j) * c + v);
                }
            }
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// One-dimensional entropy
// ---------------------------------------------------------------------------

/// Empirical entropy (bits) over exact-equality value bins:
/// `-sum_v P(v) log2 P(v)` with `P` the relative frequency.
pub fn one_dim_entropy(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    // Ordered bins keep the summation order fixed, so results are bitwise
    // reproducible across runs.
    let mut counts: std::collections::BTreeMap<u64, u64> = std::collections::BTreeMap::new();
    for &v in values {
        // Normalize -0.0 so equal values share a bin.
        let key = if v == 0.0 {
            0.0f64.to_bits()
        } else {
            v.to_bits()
        };
        *counts.entry(key).or_insert(0) += 1;
    }
    let n = values.len() as f64;
    -counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            p * p.log2()
        })
        .sum::<f64>()
}

// ---------------------------------------------------------------------------
// Gaussian differential entropy
// ---------------------------------------------------------------------------

/// A multivariate Gaussian over `dim` variables. The covariance is stored
/// row-major and must be symmetric within 1e-12; positive semi-definiteness
/// is checked when the entropy is evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianFieldSpec {
    pub dim: usize,
    pub mean: Vec<f64>,
    pub cov: Vec<f64>,
}

impl GaussianFieldSpec {
    pub fn new(dim: usize, mean: Vec<f64>, cov: Vec<f64>) -> Result<Self, EntropyError> {
        if mean.len() != dim || cov.len() != dim * dim {
            return Err(EntropyError::Dimension(format!(
                "mean {} / cov {} for dim {dim}",
                mean.len(),
                cov.len()
            )));
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(EntropyError::NonFiniteEntries);
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                if (cov[i * dim + j] - cov[j * dim + i]).abs() > 1e-12 {
                    return Err(EntropyError::Asymmetric);
                }
            }
        }
        Ok(Self { dim, mean, cov })
    }

    pub fn isotropic(dim: usize, sigma2: f64) -> Result<Self, EntropyError> {
        let mut cov = vec![0.0; dim * dim];
        for i in 0..dim {
            cov[i * dim + i] = sigma2;
        }
        Self::new(dim, vec![0.0; dim], cov)
    }

    /// The marginal over a subset of variables: principal submatrix of the
    /// covariance at `indices`.
    pub fn marginal(&self, indices: &[usize]) -> Result<GaussianFieldSpec, EntropyError> {
        if indices.iter().any(|&i| i >= self.dim) {
            return Err(EntropyError::Dimension(format!(
                "marginal index out of range for dim {}",
                self.dim
            )));
        }
        let m = indices.len();
        let mut cov = vec![0.0; m * m];
        for (a, &i) in indices.iter().enumerate() {
            for (b, &j) in indices.iter().enumerate() {
                cov[a * m + b] = self.cov[i * self.dim + j];
            }
        }
        let mean = indices.iter().map(|&i| self.mean[i]).collect();
        GaussianFieldSpec::new(m, mean, cov)
    }
}

/// Differential entropy (bits) of the Gaussian:
/// `0.5 * log2((2 pi e)^n det(cov))`.
///
/// Computed through a Cholesky factorization in log space. A singular
/// covariance returns `f64::NEG_INFINITY` (the degenerate limit); an
/// indefinite one is a domain error.
pub fn gaussian_entropy(spec: &GaussianFieldSpec) -> Result<f64, EntropyError> {
    let n = spec.dim;
    if n == 0 {
        return Err(EntropyError::Dimension("dim must be >= 1".into()));
    }
    match log2_det_spd(n, &spec.cov) {
        Some(log2_det) => Ok(0.5 * (n as f64 * LOG2_TAU_E + log2_det)),
        None => {
            // Cholesky failed: classify singular vs indefinite by eigenvalues.
            let eigs = jacobi_eigenvalues(n, &spec.cov);
            let scale = spec.cov.iter().fold(1.0f64, |m, &v| m.max(v.abs()));
            let min_eig = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
            if min_eig < -1e-10 * scale {
                Err(EntropyError::NotPositiveSemiDefinite { min_eig })
            } else {
                Ok(f64::NEG_INFINITY)
            }
        }
    }
}

/// Cholesky log2-determinant of a symmetric positive-definite matrix;
/// `None` if a pivot is not strictly positive.
fn log2_det_spd(n: usize, a: &[f64]) -> Option<f64> {
    let mut l = vec![0.0f64; n * n];
    let mut log2_det = 0.0f64;
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return None;
                }
                let d = sum.sqrt();
                l[i * n + i] = d;
                log2_det += 2.0 * d.log2();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Some(log2_det)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations. Intended
/// for the lab's modest dimensions; used only to classify Cholesky failures.
fn jacobi_eigenvalues(n: usize, a: &[f64]) -> Vec<f64> {
    let mut m = a.to_vec();
    let scale = a.iter().fold(1.0f64, |s, &v| s.max(v.abs()));
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[i * n + j] * m[i * n + j];
            }
        }
        if off.sqrt() < 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
            }
        }
    }
    (0..n).map(|i| m[i * n + i]).collect()
}

// ---------------------------------------------------------------------------
// Max pooling and the zero-entropy window scan
// ---------------------------------------------------------------------------

/// Sliding-window maximum per channel. Output extents are
/// `floor((w - o_w)/s_1) + 1` by `floor((h - o_h)/s_2) + 1`. Only the window
/// geometry of `pool` is used.
pub fn max_pool(
    x: &FeatureField,
    pool: &PoolSpec,
    stride: &StrideSpec,
) -> Result<FeatureField, EntropyError> {
    let (o_w, o_h) = (pool.o_w as usize, pool.o_h as usize);
    let (s_1, s_2) = (stride.s_1.max(1) as usize, stride.s_2.max(1) as usize);
    if o_w > x.w || o_h > x.h {
        return Err(EntropyError::PoolTooLarge {
            o_w,
            o_h,
            w: x.w,
            h: x.h,
        });
    }
    let out_w = (x.w - o_w) / s_1 + 1;
    let out_h = (x.h - o_h) / s_2 + 1;
    // Separable: max over each row segment first, then across rows.
    let mut rows = vec![f64::NEG_INFINITY; x.w * out_h * x.c];
    for i in 0..x.w {
        for oj in 0..out_h {
            for v in 0..x.c {
                let mut best = f64::NEG_INFINITY;
                for dj in 0..o_h {
                    let val = x.entries[(i * x.h + oj * s_2 + dj) * x.c + v];
                    if val > best {
                        best = val;
                    }
                }
                rows[(i * out_h + oj) * x.c + v] = best;
            }
        }
    }
    let mut out = vec![f64::NEG_INFINITY; out_w * out_h * x.c];
    for oi in 0..out_w {
        for oj in 0..out_h {
            for v in 0..x.c {
                let mut best = f64::NEG_INFINITY;
                for di in 0..o_w {
                    let val = rows[((oi * s_1 + di) * out_h + oj) * x.c + v];
                    if val > best {
                        best = val;
                    }
                }
                out[(oi * out_h + oj) * x.c + v] = best;
            }
        }
    }
    FeatureField::new(out_w, out_h, x.c, out)
}

/// True iff some contiguous `win_w x win_h` window (stride-1 scan, per
/// channel) holds a single repeated value — i.e. has zero one-dimensional
/// entropy. Uses exact equality; see [`zero_entropy_window_exists_eps`] for
/// externally loaded data.
pub fn zero_entropy_window_exists(x: &FeatureField, win_w: usize, win_h: usize) -> bool {
    zero_entropy_window_exists_eps(x, win_w, win_h, 0.0)
}

/// Tolerance-based variant: a window counts as constant when every entry is
/// within `eps` of the window's first entry.
pub fn zero_entropy_window_exists_eps(
    x: &FeatureField,
    win_w: usize,
    win_h: usize,
    eps: f64,
) -> bool {
    if win_w == 0 || win_h == 0 || win_w > x.w || win_h > x.h {
        return false;
    }
    for v in 0..x.c {
        for i0 in 0..=(x.w - win_w) {
            'window: for j0 in 0..=(x.h - win_h) {
                let first = x.get(i0, j0, v);
                for di in 0..win_w {
                    for dj in 0..win_h {
                        if (x.get(i0 + di, j0 + dj, v) - first).abs() > eps {
                            continue 'window;
                        }
                    }
                }
                return true;
            }
        }
    }
    false
}

/// The pooled-field zero-entropy probability bound
/// `1 - 2 (max(o_w, o_h) - 2)(w + h) / (w h)`. Values at or below 0 make the
/// bound vacuous; at or above 1 the strict-probability claim is trivial.
pub fn prop2_bound(w: usize, h: usize, o_w: usize, o_h: usize) -> f64 {
    let m = o_w.max(o_h) as f64;
    1.0 - 2.0 * (m - 2.0) * (w + h) as f64 / (w as f64 * h as f64)
}

// ---------------------------------------------------------------------------
// Seeded trial RNG and samplers
// ---------------------------------------------------------------------------

/// Counter-based per-trial RNG: independent of how trials are scheduled.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&trial.to_le_bytes());
    key[16..24].copy_from_slice(&0x5ed0_e117_u64.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Standard normal draw via Box-Muller.
fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            break u;
        }
    };
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Distribution for random field sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldDist {
    /// Continuous: ties only arise through pooling.
    StandardNormal,
    /// `levels` equiprobable values; for sensitivity analysis.
    DiscreteUniform(u32),
}

fn sample_field(w: usize, h: usize, dist: FieldDist, rng: &mut ChaCha8Rng) -> FeatureField {
    let entries: Vec<f64> = (0..w * h)
        .map(|_| match dist {
            FieldDist::StandardNormal => normal(rng),
            FieldDist::DiscreteUniform(levels) => rng.random_range(0..levels.max(1)) as f64,
        })
        .collect();
    FeatureField::new(w, h, 1, entries).expect("sampled entries are finite")
}

/// Random symmetric positive-definite covariance `A A^T + min_eig I`, so the
/// smallest eigenvalue is at least `min_eig`.
pub fn random_pd_spec(dim: usize, min_eig: f64, rng: &mut ChaCha8Rng) -> GaussianFieldSpec {
    let a: Vec<f64> = (0..dim * dim)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let mut cov = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            let mut sum = 0.0;
            for k in 0..dim {
                sum += a[i * dim + k] * a[j * dim + k];
            }
            cov[i * dim + j] = sum;
        }
    }
    // Exact symmetry despite floating-point accumulation order.
    for i in 0..dim {
        for j in 0..i {
            let v = 0.5 * (cov[i * dim + j] + cov[j * dim + i]);
            cov[i * dim + j] = v;
            cov[j * dim + i] = v;
        }
        cov[i * dim + i] += min_eig;
    }
    GaussianFieldSpec::new(dim, vec![0.0; dim], cov).expect("constructed covariance is symmetric")
}

// ---------------------------------------------------------------------------
// Flipped-kernel discrete convolution (used by the proposition checks)
// ---------------------------------------------------------------------------

/// Discrete convolution of the kernel against the window whose top-left
/// corner is (i0, j0): `sum X[i0+a, j0+b, e] * K[kw-1-a, kh-1-b, kc-1-e]`
/// (flipped kernel).
pub fn convolve_at(
    field: &FeatureField,
    kernel: &[f64],
    kw: usize,
    kh: usize,
    kc: usize,
    i0: usize,
    j0: usize,
) -> f64 {
    let mut sum = 0.0;
    for a in 0..kw {
        for b in 0..kh {
            for e in 0..kc {
                sum += field.get(i0 + a, j0 + b, e)
                    * kernel[((kw - 1 - a) * kh + (kh - 1 - b)) * kc + (kc - 1 - e)];
            }
        }
    }
    sum
}

// ---------------------------------------------------------------------------
// Proposition reports
// ---------------------------------------------------------------------------

/// Canonical JSON shape shared by every proposition report.
#[derive(Debug, Clone, Serialize)]
pub struct PropReportJson {
    pub proposition: u8,
    pub parameters: serde_json::Value,
    pub seed: u64,
    pub trials: u64,
    pub statistic: f64,
    pub bound: f64,
    pub pass: bool,
    pub detail: serde_json::Value,
}

/// Constant-window convolution check: on a zero-entropy window the
/// convolution output is the constant `c * sum(K)` at every position.
#[derive(Debug, Clone)]
pub struct Prop1Report {
    pub kernel: KernelSpec,
    pub seed: u64,
    pub trials: u64,
    pub tolerance: f64,
    /// Largest |output - c * sum(K)| seen across all positions and trials.
    pub max_deviation: f64,
    /// Fraction of non-constant control fields with position-dependent
    /// outputs.
    pub negative_control_rate: f64,
    pub pass: bool,
}

impl Prop1Report {
    pub fn to_json(&self) -> PropReportJson {
        PropReportJson {
            proposition: 1,
            parameters: json!({
                "k_w": self.kernel.k_w, "k_h": self.kernel.k_h, "k_c": self.kernel.k_c,
            }),
            seed: self.seed,
            trials: self.trials,
            statistic: self.max_deviation,
            bound: self.tolerance,
            pass: self.pass,
            detail: json!({ "negative_control_rate": self.negative_control_rate }),
        }
    }
}

/// Checks that convolving a random kernel with a constant (zero-entropy)
/// patch yields `c * sum(weights)` independent of position, to within
/// 1e-12. Non-constant control fields must show position dependence.
pub fn verify_prop1(
    kernel: &KernelSpec,
    trials: u64,
    seed: u64,
) -> Result<Prop1Report, EntropyError> {
    if trials == 0 {
        return Err(EntropyError::InvalidParameter("trials must be >= 1".into()));
    }
    let (kw, kh, kc) = (
        kernel.k_w as usize,
        kernel.k_h as usize,
        kernel.k_c as usize,
    );
    if kw == 0 || kh == 0 || kc == 0 {
        return Err(EntropyError::InvalidParameter(
            "kernel extents must be >= 1".into(),
        ));
    }
    if kc != 1 {
        return Err(EntropyError::InvalidParameter(
            "the single-channel setting requires k_c = 1".into(),
        ));
    }
    let (w, h) = (kw + 4, kh + 4);
    let tolerance = 1e-12;
    let mut max_deviation = 0.0f64;
    let mut dependent = 0u64;
    for t in 0..trials {
        let mut rng = trial_rng(seed, t);
        let weights: Vec<f64> = (0..kw * kh).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c: f64 = rng.random_range(-1.0..1.0);
        let kernel_sum: f64 = weights.iter().sum();

        let constant = FeatureField::constant(w, h, 1, c).expect("valid field");
        for i0 in 0..=(w - kw) {
            for j0 in 0..=(h - kh) {
                let out = convolve_at(&constant, &weights, kw, kh, 1, i0, j0);
                let dev = (out - c * kernel_sum).abs();
                if dev > max_deviation {
                    max_deviation = dev;
                }
            }
        }

        // Negative control: a continuous random field should give distinct
        // outputs at distinct positions.
        let noisy = sample_field(w, h, FieldDist::StandardNormal, &mut rng);
        let mut first: Option<f64> = None;
        let mut varies = false;
        'scan: for i0 in 0..=(w - kw) {
            for j0 in 0..=(h - kh) {
                let out = convolve_at(&noisy, &weights, kw, kh, 1, i0, j0);
                match first {
                    None => first = Some(out),
                    Some(f) if out != f => {
                        varies = true;
                        break 'scan;
                    }
                    _ => {}
                }
            }
        }
        if varies {
            dependent += 1;
        }
    }
    let negative_control_rate = dependent as f64 / trials as f64;
    Ok(Prop1Report {
        kernel: *kernel,
        seed,
        trials,
        tolerance,
        max_deviation,
        negative_control_rate,
        pass: max_deviation < tolerance,
    })
}

/// Monte-Carlo frequency of pooled fields producing a zero-entropy window.
#[derive(Debug, Clone)]
pub struct Prop2Report {
    pub w: usize,
    pub h: usize,
    pub pool: PoolSpec,
    pub stride: StrideSpec,
    pub seed: u64,
    pub trials: u64,
    pub window_w: usize,
    pub window_h: usize,
    pub empirical_freq: f64,
    pub bound: f64,
    pub std_err: f64,
    /// Bound outside (0, 1): nothing to certify, frequency reported as-is.
    pub trivial: bool,
    pub pass: bool,
}

impl Prop2Report {
    pub fn to_json(&self) -> PropReportJson {
        PropReportJson {
            proposition: 2,
            parameters: json!({
                "w": self.w, "h": self.h,
                "o_w": self.pool.o_w, "o_h": self.pool.o_h,
                "s_1": self.stride.s_1, "s_2": self.stride.s_2,
                "window_w": self.window_w, "window_h": self.window_h,
            }),
            seed: self.seed,
            trials: self.trials,
            statistic: self.empirical_freq,
            bound: self.bound,
            pass: self.pass,
            detail: json!({ "std_err": self.std_err, "trivial": self.trivial }),
        }
    }
}

/// Samples iid continuous fields, max-pools them, and scans the pooled map
/// for a constant `ceil(o_w/s_1) x ceil(o_h/s_2)` window. Passes when the
/// empirical frequency reaches the bound minus two binomial standard errors.
pub fn verify_prop2(
    w: usize,
    h: usize,
    pool: &PoolSpec,
    stride: &StrideSpec,
    trials: u64,
    seed: u64,
) -> Result<Prop2Report, EntropyError> {
    verify_prop2_dist(w, h, pool, stride, trials, seed, FieldDist::StandardNormal)
}

/// [`verify_prop2`] with an explicit sampling distribution.
pub fn verify_prop2_dist(
    w: usize,
    h: usize,
    pool: &PoolSpec,
    stride: &StrideSpec,
    trials: u64,
    seed: u64,
    dist: FieldDist,
) -> Result<Prop2Report, EntropyError> {
    if trials < 100 {
        return Err(EntropyError::InvalidParameter(
            "trials must be >= 100".into(),
        ));
    }
    if pool.o_w as usize > w || pool.o_h as usize > h {
        return Err(EntropyError::PoolTooLarge {
            o_w: pool.o_w as usize,
            o_h: pool.o_h as usize,
            w,
            h,
        });
    }
    let win_w = (pool.o_w as usize).div_ceil(stride.s_1.max(1) as usize);
    let win_h = (pool.o_h as usize).div_ceil(stride.s_2.max(1) as usize);

    let mut hits = 0u64;
    for t in 0..trials {
        let mut rng = trial_rng(seed, t);
        let field = sample_field(w, h, dist, &mut rng);
        let pooled = max_pool(&field, pool, stride)?;
        if pooled.w >= win_w
            && pooled.h >= win_h
            && zero_entropy_window_exists(&pooled, win_w, win_h)
        {
            hits += 1;
        }
    }
    let empirical_freq = hits as f64 / trials as f64;
    let bound = prop2_bound(w, h, pool.o_w as usize, pool.o_h as usize);
    let trivial = bound <= 0.0 || bound >= 1.0;
    let std_err = if trivial {
        0.0
    } else {
        (bound * (1.0 - bound) / trials as f64).sqrt()
    };
    let pass = trivial || empirical_freq >= bound - 2.0 * std_err;
    Ok(Prop2Report {
        w,
        h,
        pool: *pool,
        stride: *stride,
        seed,
        trials,
        window_w: win_w,
        window_h: win_h,
        empirical_freq,
        bound,
        std_err,
        trivial,
        pass,
    })
}

/// Covariance models for the window-volume monotonicity check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CovModel {
    /// Independent coordinates with variance `sigma2`.
    Iid { sigma2: f64 },
    /// AR(1)-style `rho^{|i-j|}` covariance, positive definite for |rho| < 1.
    Toeplitz { rho: f64 },
}

/// Threshold below which iid per-coordinate entropy turns negative and the
/// volume-monotonicity claim fails: `1 / (2 pi e)`.
pub fn iid_monotone_threshold() -> f64 {
    1.0 / (std::f64::consts::TAU * std::f64::consts::E)
}

#[derive(Debug, Clone, Serialize)]
pub struct Prop3Pair {
    pub larger: usize,
    pub smaller: usize,
    pub h_larger: f64,
    pub h_smaller: f64,
    pub holds: bool,
}

/// Entropy monotonicity in window volume under an explicit covariance model.
/// The claim is covariance-dependent, so refuting regimes are recorded
/// rather than asserted away.
#[derive(Debug, Clone)]
pub struct Prop3Report {
    pub model: CovModel,
    pub seed: u64,
    pub sizes: Vec<usize>,
    pub pairs: Vec<Prop3Pair>,
    pub all_hold: bool,
    /// For the iid model: monotone iff sigma2 >= this threshold.
    pub iid_threshold: f64,
}

impl Prop3Report {
    pub fn to_json(&self) -> PropReportJson {
        let held = self.pairs.iter().filter(|p| p.holds).count();
        let model = match self.model {
            CovModel::Iid { sigma2 } => json!({"model": "iid", "sigma2": sigma2}),
            CovModel::Toeplitz { rho } => json!({"model": "toeplitz", "rho": rho}),
        };
        PropReportJson {
            proposition: 3,
            parameters: json!({ "cov": model, "sizes": self.sizes }),
            seed: self.seed,
            trials: self.pairs.len() as u64,
            statistic: if self.pairs.is_empty() {
                1.0
            } else {
                held as f64 / self.pairs.len() as f64
            },
            bound: 1.0,
            pass: self.all_hold,
            detail: json!({
                "pairs": self.pairs,
                "iid_monotone_threshold": self.iid_threshold,
            }),
        }
    }
}

fn model_cov(model: CovModel, m: usize) -> Vec<f64> {
    let mut cov = vec![0.0; m * m];
    match model {
        CovModel::Iid { sigma2 } => {
            for i in 0..m {
                cov[i * m + i] = sigma2;
            }
        }
        CovModel::Toeplitz { rho } => {
            for i in 0..m {
                for j in 0..m {
                    cov[i * m + j] = rho.powi((i as i32 - j as i32).abs());
                }
            }
        }
    }
    cov
}

/// Compares Gaussian entropies of nested windows (leading principal
/// submatrices at the given volumes) for every ordered size pair.
pub fn verify_prop3(
    model: CovModel,
    sizes: &[usize],
    seed: u64,
) -> Result<Prop3Report, EntropyError> {
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(EntropyError::InvalidParameter(
            "sizes must be non-empty and >= 1".into(),
        ));
    }
    match model {
        CovModel::Iid { sigma2 } if sigma2 <= 0.0 => {
            return Err(EntropyError::InvalidParameter("sigma2 must be > 0".into()))
        }
        CovModel::Toeplitz { rho } if rho.abs() >= 1.0 => {
            return Err(EntropyError::InvalidParameter("|rho| must be < 1".into()))
        }
        _ => {}
    }
    let mut entropies = Vec::with_capacity(sizes.len());
    for &m in sizes {
        let spec = GaussianFieldSpec::new(m, vec![0.0; m], model_cov(model, m))?;
        entropies.push(gaussian_entropy(&spec)?);
    }
    let mut pairs = Vec::new();
    for a in 0..sizes.len() {
        for b in 0..sizes.len() {
            if a == b || sizes[a] < sizes[b] {
                continue;
            }
            pairs.push(Prop3Pair {
                larger: sizes[a],
                smaller: sizes[b],
                h_larger: entropies[a],
                h_smaller: entropies[b],
                holds: entropies[a] >= entropies[b] - 1e-12,
            });
        }
    }
    let all_hold = pairs.iter().all(|p| p.holds);
    Ok(Prop3Report {
        model,
        seed,
        sizes: sizes.to_vec(),
        pairs,
        all_hold,
        iid_threshold: iid_monotone_threshold(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Prop4Window {
    pub size: usize,
    pub h1: f64,
    pub h2: f64,
    pub h_sum: f64,
    pub gap: f64,
    /// A window covariance was singular; the strict inequality is trivial.
    pub degenerate: bool,
    pub holds: bool,
}

/// Sum-of-independent-fields entropy dominance, checked analytically via
/// log-determinants — no sampling, no stochastic failures.
#[derive(Debug, Clone)]
pub struct Prop4Report {
    pub seed: u64,
    pub windows: Vec<Prop4Window>,
    /// Smallest gap over non-degenerate windows, +inf when none.
    pub min_gap: f64,
    pub all_hold: bool,
}

impl Prop4Report {
    pub fn to_json(&self) -> PropReportJson {
        PropReportJson {
            proposition: 4,
            parameters: json!({ "windows": self.windows.len() }),
            seed: self.seed,
            trials: self.windows.len() as u64,
            statistic: self.min_gap,
            bound: 0.0,
            pass: self.all_hold,
            detail: json!({ "windows": self.windows }),
        }
    }
}

/// For each window `W`, checks
/// `H2((X1 + X2)[W]) > max(H2(X1[W]), H2(X2[W]))` with the sum covariance
/// `cov1 + cov2` (independent fields). Windows with a singular marginal are
/// reported as degenerate and hold trivially.
pub fn verify_prop4(
    spec1: &GaussianFieldSpec,
    spec2: &GaussianFieldSpec,
    shape: (usize, usize, usize),
    windows: &[SubtensorWindow],
) -> Result<Prop4Report, EntropyError> {
    let (w, h, c) = shape;
    if spec1.dim != spec2.dim {
        return Err(EntropyError::Dimension(format!(
            "field dims differ: {} vs {}",
            spec1.dim, spec2.dim
        )));
    }
    if w * h * c != spec1.dim {
        return Err(EntropyError::Dimension(format!(
            "shape {w}x{h}x{c} does not match dim {}",
            spec1.dim
        )));
    }
    let n = spec1.dim;
    let sum_cov: Vec<f64> = spec1
        .cov
        .iter()
        .zip(&spec2.cov)
        .map(|(a, b)| a + b)
        .collect();
    let sum_mean: Vec<f64> = spec1
        .mean
        .iter()
        .zip(&spec2.mean)
        .map(|(a, b)| a + b)
        .collect();
    let sum_spec = GaussianFieldSpec::new(n, sum_mean, sum_cov)?;

    let mut out = Vec::with_capacity(windows.len());
    let mut min_gap = f64::INFINITY;
    for win in windows {
        let idx = win.flat_indices(w, h, c)?;
        let h1 = gaussian_entropy(&spec1.marginal(&idx)?)?;
        let h2 = gaussian_entropy(&spec2.marginal(&idx)?)?;
        let h_sum = gaussian_entropy(&sum_spec.marginal(&idx)?)?;
        let degenerate = h1 == f64::NEG_INFINITY || h2 == f64::NEG_INFINITY;
        let max12 = h1.max(h2);
        let gap = h_sum - max12;
        let holds = if degenerate {
            h_sum > max12 || h_sum == f64::NEG_INFINITY
        } else {
            gap > 0.0
        };
        if !degenerate && gap < min_gap {
            min_gap = gap;
        }
        out.push(Prop4Window {
            size: idx.len(),
            h1,
            h2,
            h_sum,
            gap,
            degenerate,
            holds,
        });
    }
    let all_hold = out.iter().all(|w| w.holds);
    Ok(Prop4Report {
        seed: 0,
        windows: out,
        min_gap,
        all_hold,
    })
}

/// Monte-Carlo wrapper over [`verify_prop4`]: random PD covariance pairs of
/// the given dimension, full window each. `min_eig` floors both spectra.
pub fn verify_prop4_random(
    dim: usize,
    trials: u64,
    seed: u64,
    min_eig: f64,
) -> Result<Prop4Report, EntropyError> {
    if dim == 0 || trials == 0 {
        return Err(EntropyError::InvalidParameter(
            "dim and trials must be >= 1".into(),
        ));
    }
    let full = SubtensorWindow::contiguous(0, dim, 0, 1, 0, 1)?;
    let mut windows = Vec::with_capacity(trials as usize);
    let mut min_gap = f64::INFINITY;
    for t in 0..trials {
        let mut rng = trial_rng(seed, t);
        let s1 = random_pd_spec(dim, min_eig, &mut rng);
        let s2 = random_pd_spec(dim, min_eig, &mut rng);
        let rep = verify_prop4(&s1, &s2, (dim, 1, 1), std::slice::from_ref(&full))?;
        let w = rep
            .windows
            .into_iter()
            .next()
            .expect("one window per trial");
        if !w.degenerate && w.gap < min_gap {
            min_gap = w.gap;
        }
        windows.push(w);
    }
    let all_hold = windows.iter().all(|w| w.holds);
    Ok(Prop4Report {
        seed,
        windows,
        min_gap,
        all_hold,
    })
}
