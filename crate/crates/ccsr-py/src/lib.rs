//! Python bindings for the link-level analysis and simulation library:
//! closed-form bounds, threshold optimization, LDPC coding, and Monte Carlo
//! operating-point measurement.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use ccsr_core::analysis;
use ccsr_core::config::{ChannelMode, CrcMode, ModulationSpec, ProtocolConfig};
use ccsr_core::fec;
use ccsr_core::optimizer::{optimize_tau, GridSpec};
use ccsr_core::protocol::Scheme;
use ccsr_core::sim::{run_point, MeasureBudget};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn modulation(mod_order: usize) -> PyResult<ModulationSpec> {
    ModulationSpec::qam(mod_order).map_err(value_err)
}

/// Bits as a Python list of ints rather than the default `bytes` mapping.
fn bit_list(py: Python<'_>, bits: &[u8]) -> PyResult<Py<PyList>> {
    Ok(PyList::new(py, bits.iter().map(|&b| b as u32))?.unbind())
}

/// Exponential-sum approximation of the Gaussian tail probability.
#[pyfunction]
fn q_approx(x: f64) -> f64 {
    analysis::q_chiani(x)
}

/// Noise spectral density for a given SNR per information bit.
#[pyfunction]
#[pyo3(signature = (snr_db, bits_per_symbol = 2, rate = 1.0))]
fn snr_to_n0(snr_db: f64, bits_per_symbol: usize, rate: f64) -> f64 {
    ccsr_core::snr_to_n0(snr_db, bits_per_symbol, rate)
}

/// Expected fraction of subcarriers marked at threshold `tau`.
#[pyfunction]
fn marking_fraction(tau: f64) -> f64 {
    analysis::marking_fraction(tau)
}

/// Closed-form upper bound on the post-combining bit error rate.
#[pyfunction]
#[pyo3(signature = (ebn0_db, tau, rounds, mod_order = 4))]
fn ber_upper_bound(ebn0_db: f64, tau: f64, rounds: u32, mod_order: usize) -> PyResult<f64> {
    let m = modulation(mod_order)?;
    let bp = analysis::BoundParams::from_ebn0_db(ebn0_db, &m);
    Ok(analysis::ber_bound(&bp, tau, rounds))
}

/// Analytical lower bound on protocol throughput.
#[pyfunction]
#[pyo3(signature = (ebn0_db, tau, mu, frame_bits, mod_order = 4))]
fn throughput_lower_bound(
    ebn0_db: f64,
    tau: f64,
    mu: u32,
    frame_bits: usize,
    mod_order: usize,
) -> PyResult<f64> {
    let m = modulation(mod_order)?;
    Ok(analysis::throughput_lower_bound(ebn0_db, tau, mu, frame_bits, &m).unwrap_or(0.0))
}

/// Threshold maximizing the throughput bound; returns `(tau, eta)`.
#[pyfunction]
#[pyo3(signature = (ebn0_db, mu, frame_bits, mod_order = 4, step = 1e-3, hi = 4.0))]
fn optimal_tau(
    ebn0_db: f64,
    mu: u32,
    frame_bits: usize,
    mod_order: usize,
    step: f64,
    hi: f64,
) -> PyResult<(f64, f64)> {
    if step <= 0.0 || hi <= 0.0 {
        return Err(value_err("grid step and upper edge must be positive"));
    }
    let m = modulation(mod_order)?;
    let grid = GridSpec { lo: 0.0, hi, step };
    let opt = optimize_tau(ebn0_db, mu, frame_bits, &m, &grid);
    Ok((opt.tau, opt.eta))
}

/// The bundled rate-1/2 binary LDPC code (648 coded, 324 information bits).
#[pyclass(frozen)]
struct LdpcCode {
    code: &'static fec::LdpcCode,
}

#[pymethods]
impl LdpcCode {
    #[new]
    fn new() -> Self {
        Self { code: fec::wifi_648_324() }
    }

    /// Codeword length in bits.
    #[getter]
    fn n(&self) -> usize {
        self.code.n()
    }

    /// Information bits per codeword.
    #[getter]
    fn k(&self) -> usize {
        self.code.k()
    }

    /// Systematically encodes `k` information bits into `n` coded bits.
    fn encode(&self, py: Python<'_>, info: Vec<u8>) -> PyResult<Py<PyList>> {
        if info.len() != self.code.k() {
            return Err(value_err(format!("expected {} info bits", self.code.k())));
        }
        if info.iter().any(|&b| b > 1) {
            return Err(value_err("bits must be 0 or 1"));
        }
        bit_list(py, &self.code.encode(&info))
    }

    /// Decodes channel log-likelihood ratios (positive favors bit 0).
    /// Returns `(bits, converged, iterations)`.
    #[pyo3(signature = (llrs, max_iters = 50))]
    fn decode(
        &self,
        py: Python<'_>,
        llrs: Vec<f64>,
        max_iters: usize,
    ) -> PyResult<(Py<PyList>, bool, usize)> {
        if llrs.len() != self.code.n() {
            return Err(value_err(format!("expected {} llr values", self.code.n())));
        }
        let mut decoder = fec::LdpcDecoder::new(self.code);
        let res = decoder.decode(&llrs, max_iters);
        Ok((bit_list(py, &res.bits)?, res.converged, res.iterations))
    }

    /// True when `bits` satisfies every parity check.
    fn syndrome_ok(&self, bits: Vec<u8>) -> PyResult<bool> {
        if bits.len() != self.code.n() {
            return Err(value_err(format!("expected {} bits", self.code.n())));
        }
        Ok(self.code.syndrome_ok(&bits))
    }
}

/// Monte Carlo measurement of one operating point; returns a dict mirroring
/// the sweep CSV columns.
#[pyfunction]
#[pyo3(signature = (
    snr_db, mu, tau, scheme = "ccsr", frames = 200, seed = 0x1234_5678,
    subcarriers = 512, channel = "taps", crc = "genie", fec = false
))]
#[allow(clippy::too_many_arguments)]
fn simulate_point(
    py: Python<'_>,
    snr_db: f64,
    mu: u32,
    tau: f64,
    scheme: &str,
    frames: u64,
    seed: u64,
    subcarriers: usize,
    channel: &str,
    crc: &str,
    fec: bool,
) -> PyResult<Py<PyDict>> {
    let scheme = match scheme {
        "ccsr" => Scheme::Ccsr,
        "cc" => Scheme::Chase,
        other => return Err(value_err(format!("unknown scheme: {other}"))),
    };
    let mut cfg = ProtocolConfig::default();
    cfg.snr_db = snr_db;
    cfg.mu = mu;
    cfg.tau = if scheme == Scheme::Chase { 0.0 } else { tau };
    cfg.n_subcarriers = subcarriers;
    cfg.channel_mode = match channel {
        "taps" => ChannelMode::Taps,
        "iid" | "iid_gains" => ChannelMode::IidGains,
        other => return Err(value_err(format!("unknown channel mode: {other}"))),
    };
    cfg.crc_mode = match crc {
        "genie" => CrcMode::Genie,
        "crc24" => CrcMode::Crc24,
        other => return Err(value_err(format!("unknown crc mode: {other}"))),
    };
    if fec {
        cfg.enable_fec();
    } else {
        cfg.frame_bits = cfg.coded_bits_per_frame();
    }
    if frames == 0 {
        return Err(value_err("frames must be at least 1"));
    }
    let budget = MeasureBudget {
        target_errors: 0,
        bit_cap: u64::MAX,
        initial_frames: frames,
    };
    let p = py
        .detach(|| run_point(&cfg, scheme, &budget, seed))
        .map_err(value_err)?;
    let d = PyDict::new(py);
    d.set_item("scheme", p.scheme.label())?;
    d.set_item("mu", p.mu)?;
    d.set_item("snr_db", p.snr_db)?;
    d.set_item("tau", p.tau)?;
    d.set_item("ber", p.ber)?;
    d.set_item("ber_ci95", p.ber_ci95)?;
    d.set_item("eta", p.eta)?;
    d.set_item("eta_ci95", p.eta_ci95)?;
    d.set_item("mean_rounds", p.mean_rounds)?;
    d.set_item("mean_beta_fraction", p.mean_beta_fraction)?;
    d.set_item("frames", p.frames)?;
    d.set_item("bits", p.bits)?;
    Ok(d.into())
}

#[pymodule]
fn ccsr(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(q_approx, m)?)?;
    m.add_function(wrap_pyfunction!(snr_to_n0, m)?)?;
    m.add_function(wrap_pyfunction!(marking_fraction, m)?)?;
    m.add_function(wrap_pyfunction!(ber_upper_bound, m)?)?;
    m.add_function(wrap_pyfunction!(throughput_lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_tau, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_point, m)?)?;
    m.add_class::<LdpcCode>()?;
    Ok(())
}
