//! Python bindings: the scoring toolkit as an in-process extension module.
//!
//! Build with `cargo build --release -p sednas-python`, rename the produced
//! `libsednas_py.so` to `sednas_py.so` (see `python/smoke_test.py`, which
//! does this automatically), and import:
//!
//!     import sednas_py
//!     space = sednas_py.SearchSpace.tss()
//!     space.score("|nor_conv_3x3~0|+|none~0|none~1|+|none~0|none~1|none~2|")
//!
//! Structured reports cross the boundary as JSON strings; decode with
//! `json.loads`.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use sednas_core::arch::{KernelSpec, PoolKind, PoolSpec, SearchSpaceDescriptor, StrideSpec};
use sednas_core::bench;
use sednas_core::entropy;
use sednas_core::parse;
use sednas_core::search::{self, SearchConfig};
use sednas_core::sed;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A search space plus its scoring entry points.
#[pyclass]
struct SearchSpace {
    inner: SearchSpaceDescriptor,
}

#[pymethods]
impl SearchSpace {
    /// The built-in NATS-Bench topology space.
    #[staticmethod]
    fn tss() -> Self {
        Self {
            inner: sednas_core::spaces::nats_bench_tss_space(),
        }
    }

    /// The built-in DARTS space (20-cell evaluation skeleton).
    #[staticmethod]
    fn darts() -> Self {
        Self {
            inner: sednas_core::spaces::darts_space(),
        }
    }

    /// Load a space descriptor from its JSON document.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: parse::parse_space(text).map_err(value_err)?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PyValueError::new_err(format!("{path}: {e}")))?;
        Self::from_json(&text)
    }

    #[getter]
    fn id(&self) -> String {
        self.inner.id.clone()
    }

    fn to_json(&self) -> String {
        parse::serialize_space(&self.inner)
    }

    /// SED of one encoding in the space's native format.
    fn score(&self, encoding: &str) -> PyResult<f64> {
        let arch = parse::parse_in_space(encoding, &self.inner).map_err(value_err)?;
        Ok(sed::sed(&arch, &self.inner).map_err(value_err)?.sed)
    }

    /// SED of many encodings, order-preserving.
    fn score_many(&self, encodings: Vec<String>) -> PyResult<Vec<f64>> {
        let mut archs = Vec::with_capacity(encodings.len());
        for e in &encodings {
            archs.push(parse::parse_in_space(e, &self.inner).map_err(value_err)?);
        }
        sed::batch_score(&archs, &self.inner)
            .into_iter()
            .map(|r| r.map_err(value_err))
            .collect()
    }

    /// Full scoring breakdown as a JSON string.
    fn explain_json(&self, encoding: &str) -> PyResult<String> {
        let arch = parse::parse_in_space(encoding, &self.inner).map_err(value_err)?;
        let breakdown = sed::sed(&arch, &self.inner).map_err(value_err)?;
        serde_json::to_string(&breakdown).map_err(value_err)
    }

    /// Serialize an encoding to the generic JSON document format.
    fn to_generic_json(&self, encoding: &str) -> PyResult<String> {
        let arch = parse::parse_in_space(encoding, &self.inner).map_err(value_err)?;
        parse::serialize_generic(&arch, &self.inner).map_err(value_err)
    }

    /// Draw seeded random encodings (uniform per operation slot).
    #[pyo3(signature = (n, seed, dedup = false))]
    fn sample(&self, n: usize, seed: u64, dedup: bool) -> PyResult<Vec<String>> {
        let archs = search::sample_random(&self.inner, n, seed, dedup).map_err(value_err)?;
        Ok(archs.into_iter().map(|a| a.encoding).collect())
    }

    /// Random search: returns (best_encoding, best_sed, scoring_seconds).
    #[pyo3(signature = (n, seed, dedup = false))]
    fn search(&self, n: usize, seed: u64, dedup: bool) -> PyResult<(String, f64, f64)> {
        let config = SearchConfig {
            n_samples: n,
            seed,
            dedup,
            output: None,
        };
        let outcome = search::search(&self.inner, &config).map_err(value_err)?;
        Ok((
            outcome.best_encoding,
            outcome.best_sed,
            outcome.scoring_time.as_secs_f64(),
        ))
    }

    fn __repr__(&self) -> String {
        format!(
            "SearchSpace(id={:?}, ops={}, blocks={})",
            self.inner.id,
            self.inner.opt.len(),
            self.inner.total_blocks()
        )
    }
}

/// The logistic function used throughout the proxy.
#[pyfunction]
fn sig(x: f64) -> f64 {
    sed::sig(x)
}

/// All 15,625 NATS-Bench-TSS cell encodings.
#[pyfunction]
fn enumerate_tss() -> Vec<String> {
    search::enumerate_tss_encodings()
}

/// Tie-aware Spearman rank correlation.
#[pyfunction]
fn spearman(xs: Vec<f64>, ys: Vec<f64>) -> PyResult<f64> {
    bench::spearman(&xs, &ys).map_err(value_err)
}

/// Kendall tau-b with tie correction.
#[pyfunction]
fn kendall(xs: Vec<f64>, ys: Vec<f64>) -> PyResult<f64> {
    bench::kendall(&xs, &ys).map_err(value_err)
}

/// Empirical entropy in bits over exact-equality bins.
#[pyfunction]
fn one_dim_entropy(values: Vec<f64>) -> f64 {
    entropy::one_dim_entropy(&values)
}

/// Differential entropy (bits) of a zero-mean Gaussian with the given
/// covariance (nested rows). Singular covariances give -inf.
#[pyfunction]
fn gaussian_entropy(cov: Vec<Vec<f64>>) -> PyResult<f64> {
    let dim = cov.len();
    let flat: Vec<f64> = cov.into_iter().flatten().collect();
    let spec = entropy::GaussianFieldSpec::new(dim, vec![0.0; dim], flat).map_err(value_err)?;
    entropy::gaussian_entropy(&spec).map_err(value_err)
}

/// The pooled-field zero-entropy probability bound.
#[pyfunction]
fn prop2_bound(w: usize, h: usize, o_w: usize, o_h: usize) -> f64 {
    entropy::prop2_bound(w, h, o_w, o_h)
}

#[pyfunction]
#[pyo3(signature = (kw = 3, kh = 3, trials = 1000, seed = 0))]
fn verify_prop1_json(kw: u32, kh: u32, trials: u64, seed: u64) -> PyResult<String> {
    let report =
        entropy::verify_prop1(&KernelSpec::new(kw, kh, 1), trials, seed).map_err(value_err)?;
    serde_json::to_string(&report.to_json()).map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (w = 32, h = 32, pool = 3, stride = 1, trials = 10_000, seed = 0))]
fn verify_prop2_json(
    w: usize,
    h: usize,
    pool: u32,
    stride: u32,
    trials: u64,
    seed: u64,
) -> PyResult<String> {
    let report = entropy::verify_prop2(
        w,
        h,
        &PoolSpec::new(pool, pool, PoolKind::Max),
        &StrideSpec::new(stride, stride, 0),
        trials,
        seed,
    )
    .map_err(value_err)?;
    serde_json::to_string(&report.to_json()).map_err(value_err)
}

/// `model` is "iid" (param = sigma^2) or "toeplitz" (param = rho).
#[pyfunction]
#[pyo3(signature = (model = "iid", param = 1.0, sizes = vec![1, 4, 9, 16], seed = 0))]
fn verify_prop3_json(model: &str, param: f64, sizes: Vec<usize>, seed: u64) -> PyResult<String> {
    let model = match model {
        "iid" => entropy::CovModel::Iid { sigma2: param },
        "toeplitz" => entropy::CovModel::Toeplitz { rho: param },
        other => return Err(PyValueError::new_err(format!("unknown model {other:?}"))),
    };
    let report = entropy::verify_prop3(model, &sizes, seed).map_err(value_err)?;
    serde_json::to_string(&report.to_json()).map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (dim = 8, trials = 1000, seed = 0, min_eig = 1e-3))]
fn verify_prop4_json(dim: usize, trials: u64, seed: u64, min_eig: f64) -> PyResult<String> {
    let report = entropy::verify_prop4_random(dim, trials, seed, min_eig).map_err(value_err)?;
    serde_json::to_string(&report.to_json()).map_err(value_err)
}

#[pymodule]
fn sednas_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<SearchSpace>()?;
    m.add_function(wrap_pyfunction!(sig, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_tss, m)?)?;
    m.add_function(wrap_pyfunction!(spearman, m)?)?;
    m.add_function(wrap_pyfunction!(kendall, m)?)?;
    m.add_function(wrap_pyfunction!(one_dim_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(prop2_bound, m)?)?;
    m.add_function(wrap_pyfunction!(verify_prop1_json, m)?)?;
    m.add_function(wrap_pyfunction!(verify_prop2_json, m)?)?;
    m.add_function(wrap_pyfunction!(verify_prop3_json, m)?)?;
    m.add_function(wrap_pyfunction!(verify_prop4_json, m)?)?;
    Ok(())
}
