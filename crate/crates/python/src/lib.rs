//! Python bindings: telegram codec, DPT9, divergences, the HVAC impact
//! runs, bus scenarios and the experiment suite.

use std::path::PathBuf;

use knxlab as core;
use core::attack::{DelayModel, FalsifyKind};
use core::codec::{self, Destination, GroupAddress, GroupData, IndividualAddress, Lsdu};
use core::detector::{self, Distribution};
use core::experiment::{self, ExperimentConfig};
use core::hvac;
use core::scenario::{count_temperature_telegrams, BusScenario};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn falsify_kind(kind: &str, value: f64) -> PyResult<FalsifyKind> {
    match kind {
        "bias" => Ok(FalsifyKind::BiasAdd(value)),
        "override" => Ok(FalsifyKind::Override(value)),
        "passthrough" => Ok(FalsifyKind::Passthrough),
        other => Err(PyValueError::new_err(format!("unknown falsifier kind {other:?}"))),
    }
}

/// A decoded KNX TP1 telegram.
#[pyclass(name = "Telegram", module = "knxlab", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyTelegram(codec::Telegram);

#[pymethods]
impl PyTelegram {
    /// Parses raw frame octets.
    #[staticmethod]
    fn decode(raw: &[u8]) -> PyResult<Self> {
        codec::Telegram::decode(raw).map(Self).map_err(value_err)
    }

    #[staticmethod]
    fn from_hex(text: &str) -> PyResult<Self> {
        Self::decode(&codec::parse_hex(text).map_err(value_err)?)
    }

    /// Standard-frame GroupWrite of a DPT9 temperature.
    #[staticmethod]
    fn temperature_write(source: &str, group: &str, celsius: f64) -> PyResult<Self> {
        let source: IndividualAddress = source.parse().map_err(value_err)?;
        let group: GroupAddress = group.parse().map_err(value_err)?;
        let data = codec::encode_dpt9(celsius).map_err(value_err)?;
        Ok(Self(codec::Telegram::group_write(source, group, GroupData::Octets(data.to_vec()))))
    }

    fn encode<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, pyo3::types::PyBytes>> {
        Ok(pyo3::types::PyBytes::new(py, &self.0.encode().map_err(value_err)?))
    }

    fn hex(&self) -> PyResult<String> {
        Ok(codec::hex_dump(&self.0.encode().map_err(value_err)?))
    }

    #[getter]
    fn source(&self) -> String {
        self.0.source.to_string()
    }

    #[getter]
    fn destination(&self) -> String {
        self.0.destination.to_string()
    }

    #[getter]
    fn is_group(&self) -> bool {
        matches!(self.0.destination, Destination::Group(_) | Destination::Tag(_))
    }

    #[getter]
    fn extended(&self) -> bool {
        self.0.eff.is_some()
    }

    #[getter]
    fn hop_count(&self) -> u8 {
        self.0.hop_count
    }

    #[getter]
    fn service(&self) -> &'static str {
        match self.0.lsdu {
            Lsdu::GroupRead => "group_read",
            Lsdu::GroupWrite(_) => "group_write",
            Lsdu::GroupResponse(_) => "group_response",
            Lsdu::LtePropRead { .. } => "property_read",
            Lsdu::LtePropWrite { .. } => "property_write",
        }
    }

    /// DPT9 value of a two-octet group payload, if it carries one.
    #[getter]
    fn temperature(&self) -> Option<f64> {
        self.0.lsdu.group_data().and_then(GroupData::octets).and_then(|d| codec::decode_dpt9_slice(d).ok())
    }

    fn checksum(&self) -> PyResult<u8> {
        self.0.checksum().map_err(value_err)
    }

    /// The telegram a line coupler would forward, or `None` when the hop
    /// count is exhausted.
    fn coupler_forward(&self) -> Option<Self> {
        core::bus::coupler_forward(&self.0).map(Self)
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.0 == other.0
    }

    fn __repr__(&self) -> String {
        format!("Telegram({} {} -> {}, hop {})", self.service(), self.source(), self.destination(), self.0.hop_count)
    }
}

#[pyfunction]
fn checksum(octets: &[u8]) -> u8 {
    codec::compute_checksum(octets)
}

#[pyfunction]
fn encode_dpt9(celsius: f64) -> PyResult<(u8, u8)> {
    let [a, b] = codec::encode_dpt9(celsius).map_err(value_err)?;
    Ok((a, b))
}

#[pyfunction]
fn decode_dpt9(octets: (u8, u8)) -> PyResult<f64> {
    codec::decode_dpt9([octets.0, octets.1]).map_err(value_err)
}

fn distribution(p: Vec<f64>) -> PyResult<Distribution> {
    Distribution::from_probs(p).map_err(value_err)
}

/// Base-2 Jensen-Shannon divergence of two probability vectors.
#[pyfunction]
fn jsd(p: Vec<f64>, q: Vec<f64>) -> PyResult<f64> {
    detector::jsd(&distribution(p)?, &distribution(q)?).map_err(value_err)
}

#[pyfunction]
fn kl_divergence(p: Vec<f64>, q: Vec<f64>) -> PyResult<f64> {
    detector::kl_divergence(&distribution(p)?, &distribution(q)?).map_err(value_err)
}

/// Additional energy (kWh) of a falsified-temperature run against the
/// unmodified one, with the default building and weather.
#[pyfunction]
#[pyo3(signature = (kind = "bias", value = 1.0, duration_h = 12.0))]
fn hvac_attack_impact<'py>(py: Python<'py>, kind: &str, value: f64, duration_h: f64) -> PyResult<Bound<'py, PyDict>> {
    let setup = hvac::ImpactSetup { duration_h, ..hvac::ImpactSetup::default() };
    let r = hvac::run_attack_impact(&hvac::HvacParams::default(), &hvac::WeatherTrace::default(), falsify_kind(kind, value)?, &setup)
        .map_err(value_err)?;
    let s = r.summary;
    let d = PyDict::new(py);
    d.set_item("baseline_kwh", s.baseline_kwh)?;
    d.set_item("attacked_kwh", s.attacked_kwh)?;
    let extra = PyDict::new(py);
    extra.set_item("fan", s.additional_kwh.fan)?;
    extra.set_item("pump", s.additional_kwh.pump)?;
    extra.set_item("chiller", s.additional_kwh.chiller)?;
    extra.set_item("total", s.additional_kwh.total)?;
    d.set_item("additional_kwh", extra)?;
    Ok(d)
}

/// Runs one bus topology ("baseline", "stealth" or "single") and returns
/// telegram counts.
#[pyfunction]
#[pyo3(signature = (topology, duration_s = 3600.0, seed = 1, delay_s = 0.05, jitter_sd_s = 0.02, kind = "bias", value = 1.0))]
#[allow(clippy::too_many_arguments)]
fn simulate_counts<'py>(
    py: Python<'py>,
    topology: &str,
    duration_s: f64,
    seed: u64,
    delay_s: f64,
    jitter_sd_s: f64,
    kind: &str,
    value: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = ExperimentConfig { seed, bus: experiment::BusSection { duration_s, ..Default::default() }, ..ExperimentConfig::default() };
    let s: BusScenario = cfg.bus_scenario(topology);
    let delay = DelayModel { base: delay_s, jitter_sd: jitter_sd_s, seed: cfg.derive_seed("attack.delay"), ..DelayModel::default() };
    let kind = falsify_kind(kind, value)?;
    let out = match topology {
        "baseline" => s.run_baseline(),
        "stealth" => s.run_stealth(delay, kind),
        "single" => s.run_single_device(delay, kind),
        other => return Err(PyValueError::new_err(format!("unknown topology {other:?}"))),
    }
    .map_err(value_err)?;
    let count = |c| count_temperature_telegrams(c, s.sensor.address, s.sensor.group);
    let d = PyDict::new(py);
    d.set_item("controller_telegrams", out.controller_capture.len())?;
    d.set_item("controller_temperature", count(&out.controller_capture))?;
    d.set_item("sensor_temperature", out.sensor_capture.as_ref().map(count))?;
    d.set_item("sensor_writes", out.sensor_writes)?;
    d.set_item("sensor_responses", out.sensor_responses)?;
    d.set_item("injected", out.injected)?;
    Ok(d)
}

/// Runs simulate, hvac, featurize, train and report into `out_dir` and
/// returns the text summary. `config_json` overrides the defaults.
#[pyfunction]
#[pyo3(signature = (out_dir, seed = None, config_json = None))]
fn run_suite(py: Python<'_>, out_dir: PathBuf, seed: Option<u64>, config_json: Option<&str>) -> PyResult<String> {
    let mut cfg = match config_json {
        Some(text) => ExperimentConfig::from_json(text).map_err(value_err)?,
        None => ExperimentConfig::default(),
    };
    cfg.out_dir = out_dir;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    py.detach(|| experiment::suite(&cfg)).map_err(|e| if e.is_config() { value_err(e) } else { PyRuntimeError::new_err(e.to_string()) })
}

#[pymodule(name = "knxlab")]
fn knxlab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTelegram>()?;
    m.add_function(wrap_pyfunction!(checksum, m)?)?;
    m.add_function(wrap_pyfunction!(encode_dpt9, m)?)?;
    m.add_function(wrap_pyfunction!(decode_dpt9, m)?)?;
    m.add_function(wrap_pyfunction!(jsd, m)?)?;
    m.add_function(wrap_pyfunction!(kl_divergence, m)?)?;
    m.add_function(wrap_pyfunction!(hvac_attack_impact, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_counts, m)?)?;
    m.add_function(wrap_pyfunction!(run_suite, m)?)?;
    Ok(())
}
