//! Run configuration, modulation tables, noise bookkeeping, and seeded RNG
//! construction shared by every other module.

use num_complex::Complex64;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::{Error, Result};

/// Per-dimension variance of a unit-power Rayleigh subcarrier gain.
pub const SIGMA_SQ: f64 = 0.5;

/// LDPC frame geometry used when FEC is enabled: one codeword per frame.
pub const FEC_INFO_BITS: usize = 324;
pub const FEC_CODED_BITS: usize = 648;

// ---------------------------------------------------------------------------
// Modulation
// ---------------------------------------------------------------------------

/// Square Gray-mapped QAM alphabet normalized to unit average symbol energy.
///
/// Bits map to a symbol MSB-first: the first half of the bits selects the
/// in-phase level, the second half the quadrature level, each through a Gray
/// code so neighbouring levels differ in exactly one bit. The all-zeros label
/// sits in the first quadrant, e.g. `00 -> (1+i)/sqrt(2)` for 4-QAM.
#[derive(Clone, Debug)]
pub struct ModulationSpec {
    order: usize,
    bits_per_symbol: usize,
    bits_per_axis: usize,
    /// Amplitude carried by each per-axis bit group (indexed by group value).
    axis_amp: Vec<f64>,
    /// Full constellation indexed by the symbol label (bits MSB-first).
    points: Vec<Complex64>,
    nn_scale: f64,
    nn_count: f64,
}

impl ModulationSpec {
    /// Builds the alphabet for `order` in {4, 16}.
    pub fn qam(order: usize) -> Result<Self> {
        if order != 4 && order != 16 {
            return Err(Error::InvalidConfig(format!(
                "unsupported modulation order {order} (expected 4 or 16)"
            )));
        }
        let bits_per_symbol = order.ilog2() as usize;
        let bits_per_axis = bits_per_symbol / 2;
        let levels = 1usize << bits_per_axis;
        // Per-axis mean square energy must be 1/2 so the symbol energy is 1.
        let d = (3.0 / (2.0 * ((levels * levels - 1) as f64))).sqrt();
        let mut axis_amp = vec![0.0; levels];
        for idx in 0..levels {
            let label = idx ^ (idx >> 1);
            axis_amp[label] = ((levels - 1) as f64 - 2.0 * idx as f64) * d;
        }
        let mut points = Vec::with_capacity(order);
        for label in 0..order {
            let i_group = label >> bits_per_axis;
            let q_group = label & (levels - 1);
            points.push(Complex64::new(axis_amp[i_group], axis_amp[q_group]));
        }
        let m = order as f64;
        let k = bits_per_symbol as f64;
        Ok(Self {
            order,
            bits_per_symbol,
            bits_per_axis,
            axis_amp,
            points,
            nn_scale: 3.0 * k / (m - 1.0),
            nn_count: (4.0 / k) * (1.0 - 1.0 / m.sqrt()),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    pub fn bits_per_axis(&self) -> usize {
        self.bits_per_axis
    }

    /// Amplitude levels per axis, indexed by the Gray bit-group value.
    pub fn axis_amplitudes(&self) -> &[f64] {
        &self.axis_amp
    }

    /// Constellation point for a symbol label (bits MSB-first).
    pub fn point(&self, label: usize) -> Complex64 {
        self.points[label]
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    /// Nearest-neighbour argument scale `g` in `c*Q(sqrt(g*x/N0))` with the
    /// per-bit energy convention; 2 for 4-QAM.
    pub fn nn_scale(&self) -> f64 {
        self.nn_scale
    }

    /// Nearest-neighbour multiplicity `c`; 1 for 4-QAM.
    pub fn nn_count(&self) -> f64 {
        self.nn_count
    }
}

// ---------------------------------------------------------------------------
// Noise and SNR
// ---------------------------------------------------------------------------

/// One-sided noise spectral density for unit-energy symbols at a given
/// `Eb/N0` operating point.
///
/// Symbols carry `code_rate * bits_per_symbol` information bits, so
/// `N0 = 1 / (code_rate * bits_per_symbol * 10^(snr_db/10))`.
pub fn snr_to_n0(snr_db: f64, bits_per_symbol: usize, code_rate: f64) -> f64 {
    1.0 / (code_rate * bits_per_symbol as f64 * 10f64.powf(snr_db / 10.0))
}

/// Complex noise parameters of one receive observation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    /// Total complex noise variance (per-dimension variance is `n0 / 2`).
    pub n0: f64,
    /// Per-dimension fading variance of a subcarrier gain.
    pub sigma_sq: f64,
}

impl NoiseSpec {
    pub fn from_snr(snr_db: f64, modulation: &ModulationSpec, code_rate: f64) -> Self {
        Self {
            n0: snr_to_n0(snr_db, modulation.bits_per_symbol(), code_rate),
            sigma_sq: SIGMA_SQ,
        }
    }
}

// ---------------------------------------------------------------------------
// RNG
// ---------------------------------------------------------------------------

/// Deterministic RNG for a `(seed, stream)` pair.
///
/// Streams with the same seed are statistically independent, and a pair gives
/// the same draw sequence regardless of thread count or call order, which is
/// what keeps parallel sweeps reproducible.
pub fn make_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives a sub-seed from a base seed and a salt (splitmix64 step).
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

// ---------------------------------------------------------------------------
// Protocol configuration
// ---------------------------------------------------------------------------

/// How subcarrier gains are produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelMode {
    /// Physical model: an L-tap Rayleigh impulse response zero-padded and
    /// taken through the DFT.
    Taps,
    /// Matched analytical model: independent CN(0,1) gains per subcarrier.
    IidGains,
}

/// Delivery check applied to the detected frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrcMode {
    /// Oracle comparison against the transmitted payload.
    Genie,
    /// Real CRC-24 appended inside the frame (payload shrinks by 24 bits).
    Crc24,
}

/// Full description of one simulated link.
#[derive(Clone, Debug)]
pub struct ProtocolConfig {
    /// Rounds per HARQ cycle before the buffer is discarded.
    pub mu: u32,
    /// Selective retransmission threshold on the subcarrier channel power.
    pub tau: f64,
    pub n_subcarriers: usize,
    pub n_taps: usize,
    pub snr_db: f64,
    pub fec_enabled: bool,
    /// Information bits per frame.
    pub frame_bits: usize,
    pub seed: u64,
    pub channel_mode: ChannelMode,
    pub crc_mode: CrcMode,
    pub modulation: ModulationSpec,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        let modulation = ModulationSpec::qam(4).unwrap();
        Self {
            mu: 1,
            tau: 0.0,
            n_subcarriers: 512,
            n_taps: 10,
            snr_db: 10.0,
            fec_enabled: false,
            frame_bits: 512 * modulation.bits_per_symbol(),
            seed: 0x1234_5678,
            channel_mode: ChannelMode::Taps,
            crc_mode: CrcMode::Genie,
            modulation,
        }
    }
}

impl ProtocolConfig {
    /// Code rate implied by the FEC switch.
    pub fn code_rate(&self) -> f64 {
        if self.fec_enabled {
            FEC_INFO_BITS as f64 / FEC_CODED_BITS as f64
        } else {
            1.0
        }
    }

    pub fn noise(&self) -> NoiseSpec {
        NoiseSpec::from_snr(self.snr_db, &self.modulation, self.code_rate())
    }

    /// Coded bits sent per full OFDM symbol.
    pub fn coded_bits_per_frame(&self) -> usize {
        self.n_subcarriers * self.modulation.bits_per_symbol()
    }

    /// Checks internal consistency; every entry point calls this first.
    pub fn validate(&self) -> Result<()> {
        if self.mu < 1 {
            return Err(Error::InvalidConfig("mu must be at least 1".into()));
        }
        if !(self.tau >= 0.0) || !self.tau.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "tau must be finite and non-negative, got {}",
                self.tau
            )));
        }
        if self.n_subcarriers == 0 {
            return Err(Error::InvalidConfig("n_subcarriers must be positive".into()));
        }
        if self.n_taps == 0 || self.n_taps > self.n_subcarriers {
            return Err(Error::InvalidConfig(format!(
                "n_taps must lie in 1..={}, got {}",
                self.n_subcarriers, self.n_taps
            )));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::InvalidConfig("snr_db must be finite".into()));
        }
        if self.fec_enabled {
            if self.modulation.order() != 4 {
                return Err(Error::InvalidConfig(
                    "FEC track supports 4-QAM only".into(),
                ));
            }
            if self.frame_bits != FEC_INFO_BITS {
                return Err(Error::InvalidConfig(format!(
                    "FEC frames carry exactly {FEC_INFO_BITS} information bits, got {}",
                    self.frame_bits
                )));
            }
            if self.n_subcarriers * self.modulation.bits_per_symbol() != FEC_CODED_BITS {
                return Err(Error::InvalidConfig(format!(
                    "FEC mode needs n_subcarriers * bits_per_symbol = {FEC_CODED_BITS}, got {}",
                    self.n_subcarriers * self.modulation.bits_per_symbol()
                )));
            }
        } else if self.frame_bits != self.coded_bits_per_frame() {
            return Err(Error::InvalidConfig(format!(
                "uncoded frames span one OFDM symbol: frame_bits must be {}, got {}",
                self.coded_bits_per_frame(),
                self.frame_bits
            )));
        }
        if self.crc_mode == CrcMode::Crc24 && self.frame_bits <= 24 {
            return Err(Error::InvalidConfig(
                "crc24 mode needs frames longer than 24 bits".into(),
            ));
        }
        Ok(())
    }

    /// Loads a config from TOML text (`key = value` per line).
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))?;
        let mut cfg = Self::default();
        raw.apply(&mut cfg)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Switches to the coded-frame geometry (one LDPC codeword per frame).
    pub fn enable_fec(&mut self) {
        self.fec_enabled = true;
        self.frame_bits = FEC_INFO_BITS;
        self.n_subcarriers = FEC_CODED_BITS / self.modulation.bits_per_symbol();
    }
}

/// TOML-facing view of [`ProtocolConfig`]; absent keys keep their defaults.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub mu: Option<u32>,
    pub tau: Option<f64>,
    pub n_subcarriers: Option<usize>,
    pub n_taps: Option<usize>,
    pub snr_db: Option<f64>,
    pub fec_enabled: Option<bool>,
    pub frame_bits: Option<usize>,
    pub seed: Option<u64>,
    pub channel_mode: Option<ChannelMode>,
    pub crc_mode: Option<CrcMode>,
    pub modulation: Option<usize>,
}

impl RawConfig {
    /// Overlays the present keys onto `cfg`.
    pub fn apply(&self, cfg: &mut ProtocolConfig) -> Result<()> {
        if let Some(order) = self.modulation {
            cfg.modulation = ModulationSpec::qam(order)?;
        }
        if let Some(v) = self.mu {
            cfg.mu = v;
        }
        if let Some(v) = self.tau {
            cfg.tau = v;
        }
        if let Some(v) = self.n_subcarriers {
            cfg.n_subcarriers = v;
        }
        if let Some(v) = self.n_taps {
            cfg.n_taps = v;
        }
        if let Some(v) = self.snr_db {
            cfg.snr_db = v;
        }
        if let Some(v) = self.fec_enabled {
            if v {
                cfg.enable_fec();
            } else {
                cfg.fec_enabled = false;
            }
        }
        if let Some(v) = self.frame_bits {
            cfg.frame_bits = v;
        } else if !cfg.fec_enabled {
            cfg.frame_bits = cfg.coded_bits_per_frame();
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.channel_mode {
            cfg.channel_mode = v;
        }
        if let Some(v) = self.crc_mode {
            cfg.crc_mode = v;
        }
        Ok(())
    }
}
