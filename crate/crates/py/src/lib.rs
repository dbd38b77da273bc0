//! Python bindings for `sicma_core`.
//!
//! Metrics come back as plain dicts with the same field names as the Rust
//! structs.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use sicma_core::config::{PacketLength, SystemParams};
use sicma_core::sic::{MhTable, DEFAULT_MH_SAMPLES};
use sicma_core::{Scheme, SimConfig};

fn err(e: sicma_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, v: &serde_json::Value) -> PyResult<Bound<'py, PyAny>> {
    use serde_json::Value;
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match n.as_u64() {
            Some(u) => u.into_pyobject(py)?.into_any(),
            None => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(to_py(py, item)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, item) in map {
                dict.set_item(k, to_py(py, item)?)?;
            }
            dict.into_any()
        }
    })
}

/// Serializes through JSON; non-finite floats become NaN instead of null.
fn dict<'py>(
    py: Python<'py>,
    value: &impl Serialize,
    floats: &[(&str, f64)],
) -> PyResult<Bound<'py, PyAny>> {
    let json = serde_json::to_value(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let obj = to_py(py, &json)?;
    if let Ok(d) = obj.cast::<PyDict>() {
        for (k, v) in floats {
            d.set_item(*k, *v)?;
        }
    }
    Ok(obj)
}

fn scheme(name: &str) -> PyResult<Scheme> {
    name.parse().map_err(err)
}

/// System configuration. Keyword arguments default to the desk-scale setup.
#[pyclass(name = "SystemConfig", frozen, from_py_object)]
#[derive(Clone)]
struct PySystemConfig {
    inner: sicma_core::SystemConfig,
}

#[pymethods]
impl PySystemConfig {
    #[new]
    #[pyo3(signature = (n=50, packet_bits=4000, bandwidth_hz=1e6, epsilon=0.1, gamma_max=31.0, lam=100.0, k_c=6, a_gamma=0.39, b_gamma=0.78, t_0=None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        n: usize,
        packet_bits: u64,
        bandwidth_hz: f64,
        epsilon: f64,
        gamma_max: f64,
        lam: f64,
        k_c: usize,
        a_gamma: f64,
        b_gamma: f64,
        t_0: Option<f64>,
    ) -> PyResult<Self> {
        let params = SystemParams {
            n,
            l: PacketLength::from_bits(packet_bits),
            w: bandwidth_hz,
            epsilon,
            gamma_max,
            lambda: lam,
            k_c,
            a_gamma,
            b_gamma,
            t_0,
            ..SystemParams::default()
        };
        Ok(Self {
            inner: sicma_core::SystemConfig::new(params).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: sicma_core::SystemConfig::from_toml_str(text).map_err(err)?,
        })
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml_string()
    }

    fn with_lambda(&self, lam: f64) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.with_lambda(lam).map_err(err)?,
        })
    }

    fn slot_time(&self, gamma: f64) -> PyResult<f64> {
        self.inner.slot_time(gamma).map_err(err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn packet_bits(&self) -> u64 {
        self.inner.packet_bits()
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon()
    }

    #[getter]
    fn lam(&self) -> f64 {
        self.inner.lambda()
    }

    #[getter]
    fn t0(&self) -> f64 {
        self.inner.t0()
    }

    fn __repr__(&self) -> String {
        format!(
            "SystemConfig(n={}, packet_bits={}, epsilon={}, lam={})",
            self.inner.n(),
            self.inner.packet_bits(),
            self.inner.epsilon(),
            self.inner.lambda()
        )
    }
}

#[pyfunction]
fn slot_time(gamma: f64, bits: u64, bandwidth_hz: f64) -> PyResult<f64> {
    sicma_core::slot_time(gamma, bits, bandwidth_hz).map_err(err)
}

#[pyfunction]
fn target_snr(gamma: f64, epsilon: f64) -> PyResult<f64> {
    sicma_core::target_snr(gamma, epsilon).map_err(err)
}

/// Decoded flags for unit-mean channel gains, in input order.
#[pyfunction]
#[pyo3(signature = (gains, gamma, epsilon, seed=0))]
fn decode_slot(gains: Vec<f64>, gamma: f64, epsilon: f64, seed: u64) -> PyResult<Vec<bool>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let out = sicma_core::decode_slot(&gains, gamma, epsilon, &mut rng).map_err(err)?;
    Ok(out.decoded_flags)
}

/// Mean number of decoded packets out of `h`: `(mean, stderr)`.
#[pyfunction]
#[pyo3(signature = (h, gamma, epsilon, samples=DEFAULT_MH_SAMPLES, seed=1))]
fn estimate_mh(
    py: Python<'_>,
    h: usize,
    gamma: f64,
    epsilon: f64,
    samples: u64,
    seed: u64,
) -> PyResult<(f64, f64)> {
    let est = py
        .detach(|| sicma_core::estimate_mh(h, gamma, epsilon, samples, seed))
        .map_err(err)?;
    Ok((est.mean, est.stderr))
}

#[pyfunction]
fn fixed_params<'py>(py: Python<'py>, config: &PySystemConfig) -> PyResult<Bound<'py, PyAny>> {
    let p = sicma_core::fixed_params(&config.inner).map_err(err)?;
    dict(py, &p, &[])
}

#[pyfunction]
fn adaptive_params<'py>(
    py: Python<'py>,
    k: usize,
    config: &PySystemConfig,
) -> PyResult<Bound<'py, PyAny>> {
    let p = sicma_core::adaptive_params(k, &config.inner).map_err(err)?;
    dict(py, &p, &[])
}

/// Closed-form fixed-scheme metrics at the configuration's arrival rate.
#[pyfunction]
#[pyo3(signature = (config, mh_samples=DEFAULT_MH_SAMPLES, seed=1))]
fn fixed_metrics<'py>(
    py: Python<'py>,
    config: &PySystemConfig,
    mh_samples: u64,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = &config.inner;
    let m = py
        .detach(|| {
            let gamma = sicma_core::fixed_params(cfg)?.gamma;
            let mh = MhTable::build(cfg.n(), gamma, cfg.epsilon(), mh_samples, seed)?;
            sicma_core::fixed_metrics(cfg, &mh)
        })
        .map_err(err)?;
    dict(py, &m, &[("ea", m.ea)])
}

fn sim_config(
    config: &PySystemConfig,
    scheme_name: &str,
    horizon: f64,
    seed: u64,
    warmup: Option<f64>,
    min_slots: u64,
) -> PyResult<SimConfig> {
    let mut cfg = SimConfig::new(config.inner.clone(), scheme(scheme_name)?, horizon, seed)
        .with_min_slots(min_slots);
    if let Some(w) = warmup {
        cfg = cfg.with_warmup(w);
    }
    Ok(cfg)
}

/// One simulation run; standard errors are batch means.
#[pyfunction]
#[pyo3(signature = (config, scheme, horizon, seed=1, warmup=None, min_slots=0))]
fn simulate<'py>(
    py: Python<'py>,
    config: &PySystemConfig,
    scheme: &str,
    horizon: f64,
    seed: u64,
    warmup: Option<f64>,
    min_slots: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = sim_config(config, scheme, horizon, seed, warmup, min_slots)?;
    let m = py.detach(|| sicma_core::run(&cfg)).map_err(err)?;
    dict(py, &m, &[("mean_aoi", m.mean_aoi)])
}

/// Independent replications with seeds `seed, seed+1, ...`; standard
/// errors are taken across replications.
#[pyfunction]
#[pyo3(signature = (config, scheme, horizon, replications, seed=1, warmup=None, min_slots=0))]
#[allow(clippy::too_many_arguments)]
fn replicate<'py>(
    py: Python<'py>,
    config: &PySystemConfig,
    scheme: &str,
    horizon: f64,
    replications: usize,
    seed: u64,
    warmup: Option<f64>,
    min_slots: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = sim_config(config, scheme, horizon, seed, warmup, min_slots)?;
    let r = py
        .detach(|| sicma_core::replicate(&cfg, replications))
        .map_err(err)?;
    let m = &r.aggregate;
    dict(py, m, &[("mean_aoi", m.mean_aoi)])
}

#[pymodule]
fn sicma(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySystemConfig>()?;
    m.add_function(wrap_pyfunction!(slot_time, m)?)?;
    m.add_function(wrap_pyfunction!(target_snr, m)?)?;
    m.add_function(wrap_pyfunction!(decode_slot, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_mh, m)?)?;
    m.add_function(wrap_pyfunction!(fixed_params, m)?)?;
    m.add_function(wrap_pyfunction!(adaptive_params, m)?)?;
    m.add_function(wrap_pyfunction!(fixed_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(replicate, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
