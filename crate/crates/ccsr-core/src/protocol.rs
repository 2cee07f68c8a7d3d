//! The retransmission state machine: full rounds, selective retransmission of
//! weak subcarriers, joint detection over the accumulated observations, frame
//! checks, and cycle restarts of the whole buffer.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{apply_channel_into, ChannelSampler, SubcarrierChannel, TransmissionEvent};
use crate::config::{CrcMode, ModulationSpec, ProtocolConfig};
use crate::fec::{wifi_648_324, LdpcDecoder, DECODE_MAX_ITERS};
use crate::phy::{hard_decide, llrs, modulate, ObservationBuffer};
use crate::Result;

/// Retransmission scheme under test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Full rounds plus selective retransmission of marked subcarriers.
    Ccsr,
    /// Plain Chase combining: full rounds only.
    Chase,
}

impl Scheme {
    pub fn label(&self) -> &'static str {
        match self {
            Scheme::Ccsr => "ccsr",
            Scheme::Chase => "cc",
        }
    }
}

// ---------------------------------------------------------------------------
// Frame check sequence
// ---------------------------------------------------------------------------

const CRC24_POLY: u32 = 0x86_4CFB;
/// Number of bits appended by [`attach_crc24`].
pub const CRC24_BITS: usize = 24;

/// CRC-24 remainder (polynomial 0x864CFB, zero init) over bits, MSB-first.
pub fn crc24(bits: &[u8]) -> u32 {
    let mut reg = 0u32;
    for &b in bits {
        debug_assert!(b <= 1);
        let top = (reg >> 23) & 1;
        reg = (reg << 1) & 0xFF_FFFF;
        if top ^ b as u32 == 1 {
            reg ^= CRC24_POLY;
        }
    }
    reg
}

/// Appends the 24 check bits for the current frame content, MSB first.
pub fn attach_crc24(frame: &mut Vec<u8>) {
    let c = crc24(frame);
    for i in (0..CRC24_BITS).rev() {
        frame.push(((c >> i) & 1) as u8);
    }
}

/// True when the trailing 24 bits are a valid check sequence for the rest.
pub fn frame_check_crc24(bits: &[u8]) -> bool {
    bits.len() > CRC24_BITS && crc24(bits) == 0
}

// ---------------------------------------------------------------------------
// Marking rule
// ---------------------------------------------------------------------------

/// Subcarriers whose gain power falls strictly below the marking threshold.
pub fn select_retx(ch: &SubcarrierChannel, tau: f64) -> Vec<usize> {
    let mut out = Vec::new();
    select_retx_into(ch, tau, &mut out);
    out
}

fn select_retx_into(ch: &SubcarrierChannel, tau: f64, out: &mut Vec<usize>) {
    out.clear();
    for (l, g) in ch.gains.iter().enumerate() {
        if g.norm_sqr() < tau {
            out.push(l);
        }
    }
}

// ---------------------------------------------------------------------------
// Outcomes
// ---------------------------------------------------------------------------

/// Bookkeeping of one frame's life through the protocol.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FrameOutcome {
    pub delivered: bool,
    /// Cycles started, including the one that delivered.
    pub cycles: u32,
    /// Rounds used across all cycles.
    pub rounds: u32,
    /// Full transmission events (equals `rounds` in this protocol).
    pub full_events: u32,
    /// Symbols carried by selective retransmissions, across all cycles.
    pub selective_symbols: u64,
    /// Hamming distance between the final decision and the true frame.
    pub residual_bit_errors: u64,
}

impl FrameOutcome {
    /// Symbols put on the air, full plus selective.
    pub fn sent_symbols(&self, n_subcarriers: usize) -> u64 {
        self.full_events as u64 * n_subcarriers as u64 + self.selective_symbols
    }

    /// Channel bits put on the air.
    pub fn sent_bits(&self, n_subcarriers: usize, bits_per_symbol: usize) -> u64 {
        self.sent_symbols(n_subcarriers) * bits_per_symbol as u64
    }
}

/// Outcome of an unconditional fixed-round run (no frame checks).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FixedRoundsOutcome {
    pub bit_errors: u64,
    pub frame_bits: u64,
    pub full_events: u32,
    pub selective_symbols: u64,
    /// Decoder convergence of the final detection; always true when no FEC
    /// is configured.
    pub fec_converged: bool,
}

// ---------------------------------------------------------------------------
// Runner
// ---------------------------------------------------------------------------

/// Owns the transmit and receive state for running frames through the
/// protocol; reusable across frames to keep allocations out of the hot loop.
pub struct PacketRunner {
    cfg: ProtocolConfig,
    modulation: ModulationSpec,
    n0: f64,
    sampler: ChannelSampler,
    fec: Option<LdpcDecoder<'static>>,
    buffer: ObservationBuffer,
    // Current frame state.
    frame: Vec<u8>,
    coded: Vec<u8>,
    tx_symbols: Vec<Complex64>,
    decided: Vec<u8>,
    // Scratch.
    y_full: Vec<Complex64>,
    sel_idx: Vec<usize>,
    sel_sym: Vec<Complex64>,
    y_sel: Vec<Complex64>,
    llr: Vec<f64>,
    expected_obs: usize,
}

impl PacketRunner {
    pub fn new(cfg: &ProtocolConfig) -> Result<Self> {
        cfg.validate()?;
        let modulation = cfg.modulation.clone();
        let n0 = cfg.noise().n0;
        let n_sub = cfg.n_subcarriers;
        let fec = cfg.fec_enabled.then(|| LdpcDecoder::new(wifi_648_324()));
        Ok(Self {
            cfg: cfg.clone(),
            n0,
            sampler: ChannelSampler::for_config(cfg),
            fec,
            buffer: ObservationBuffer::new(n_sub),
            frame: Vec::new(),
            coded: Vec::new(),
            tx_symbols: Vec::new(),
            decided: vec![0; cfg.frame_bits],
            y_full: vec![Complex64::new(0.0, 0.0); n_sub],
            sel_idx: Vec::with_capacity(n_sub),
            sel_sym: Vec::with_capacity(n_sub),
            y_sel: Vec::with_capacity(n_sub),
            llr: vec![0.0; n_sub * modulation.bits_per_symbol()],
            modulation,
            expected_obs: 0,
        })
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.cfg
    }

    /// A random frame of the configured size, with a valid check sequence
    /// already attached when the frame check is a real CRC.
    pub fn random_frame<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<u8> {
        let n = self.cfg.frame_bits;
        match self.cfg.crc_mode {
            CrcMode::Genie => (0..n).map(|_| rng.random_range(0..2u8)).collect(),
            CrcMode::Crc24 => {
                let mut f: Vec<u8> =
                    (0..n - CRC24_BITS).map(|_| rng.random_range(0..2u8)).collect();
                attach_crc24(&mut f);
                f
            }
        }
    }

    /// Runs the full protocol on one frame: up to `max_cycles` cycles of `mu`
    /// rounds each, restarting with an empty buffer after every failed cycle.
    pub fn run<R: Rng + ?Sized>(
        &mut self,
        scheme: Scheme,
        frame: &[u8],
        max_cycles: u32,
        rng: &mut R,
    ) -> FrameOutcome {
        assert!(max_cycles >= 1);
        self.prepare(frame);
        let mut out = FrameOutcome::default();
        for _ in 0..max_cycles {
            out.cycles += 1;
            self.buffer.clear();
            self.expected_obs = 0;
            for round in 1..=self.cfg.mu {
                let beta = self.transmit_round(scheme, round, rng);
                out.rounds += 1;
                out.full_events += 1;
                out.selective_symbols += beta as u64;
                self.detect();
                if self.frame_check() {
                    out.delivered = true;
                    out.residual_bit_errors = self.residual_errors();
                    return out;
                }
            }
        }
        out.residual_bit_errors = self.residual_errors();
        out
    }

    /// Sends exactly `rounds` rounds and detects once at the end, with no
    /// frame checks anywhere: the raw post-combining error-rate probe.
    pub fn run_fixed_rounds<R: Rng + ?Sized>(
        &mut self,
        scheme: Scheme,
        frame: &[u8],
        rounds: u32,
        rng: &mut R,
    ) -> FixedRoundsOutcome {
        assert!(rounds >= 1);
        self.prepare(frame);
        self.buffer.clear();
        self.expected_obs = 0;
        let mut selective_symbols = 0u64;
        for round in 1..=rounds {
            selective_symbols += self.transmit_round(scheme, round, rng) as u64;
        }
        let fec_converged = self.detect();
        FixedRoundsOutcome {
            bit_errors: self.residual_errors(),
            frame_bits: self.cfg.frame_bits as u64,
            full_events: rounds,
            selective_symbols,
            fec_converged,
        }
    }

    // -- internals ----------------------------------------------------------

    fn prepare(&mut self, frame: &[u8]) {
        assert_eq!(frame.len(), self.cfg.frame_bits, "frame size mismatch");
        self.frame.clear();
        self.frame.extend_from_slice(frame);
        if let Some(dec) = &self.fec {
            dec.code().encode_into(frame, &mut self.coded);
        } else {
            self.coded.clear();
            self.coded.extend_from_slice(frame);
        }
        self.tx_symbols = modulate(&self.coded, &self.modulation);
        debug_assert_eq!(self.tx_symbols.len(), self.cfg.n_subcarriers);
    }

    /// One round: a full transmission, then (for the selective scheme) the
    /// marked symbols again on a fresh channel. Returns the marked count.
    fn transmit_round<R: Rng + ?Sized>(&mut self, scheme: Scheme, round: u32, rng: &mut R) -> u32 {
        let ch = self.sampler.draw(TransmissionEvent::Full { round }, rng);
        apply_channel_into(&ch, &self.tx_symbols, self.n0, rng, &mut self.y_full);
        self.buffer.push_full(&ch, &self.y_full);
        self.expected_obs += self.cfg.n_subcarriers;

        let mut beta = 0usize;
        if scheme == Scheme::Ccsr {
            select_retx_into(&ch, self.cfg.tau, &mut self.sel_idx);
            beta = self.sel_idx.len();
            if beta > 0 {
                let fresh = self
                    .sampler
                    .draw(TransmissionEvent::Selective { round }, rng);
                let sel_ch = fresh.gather(&self.sel_idx);
                self.sel_sym.clear();
                self.sel_sym
                    .extend(self.sel_idx.iter().map(|&i| self.tx_symbols[i]));
                self.y_sel.resize(beta, Complex64::new(0.0, 0.0));
                apply_channel_into(&sel_ch, &self.sel_sym, self.n0, rng, &mut self.y_sel);
                self.buffer.push_selective(&self.sel_idx, &sel_ch, &self.y_sel);
                self.expected_obs += beta;
            }
        }
        debug_assert_eq!(self.buffer.total_observations(), self.expected_obs);
        beta as u32
    }

    /// Joint detection over everything in the buffer; fills `decided` with
    /// the frame-bit decisions and reports decoder convergence.
    fn detect(&mut self) -> bool {
        let k = self.modulation.bits_per_symbol();
        for i in 0..self.cfg.n_subcarriers {
            let soft = self.buffer.combine(i, self.n0);
            llrs(&soft, &self.modulation, &mut self.llr[i * k..(i + 1) * k]);
        }
        match &mut self.fec {
            Some(dec) => {
                let r = dec.decode(&self.llr, DECODE_MAX_ITERS);
                self.decided.copy_from_slice(r.info(dec.code()));
                r.converged
            }
            None => {
                hard_decide(&self.llr, &mut self.decided);
                true
            }
        }
    }

    fn frame_check(&self) -> bool {
        match self.cfg.crc_mode {
            CrcMode::Genie => self.decided == self.frame,
            CrcMode::Crc24 => frame_check_crc24(&self.decided),
        }
    }

    fn residual_errors(&self) -> u64 {
        self.decided
            .iter()
            .zip(&self.frame)
            .filter(|(a, b)| a != b)
            .count() as u64
    }
}
