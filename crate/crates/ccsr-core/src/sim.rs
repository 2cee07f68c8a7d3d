//! Monte Carlo measurement: per-point error-rate and throughput estimates
//! with confidence intervals, deterministic under any worker count.
//!
//! Every frame index owns two fixed RNG substreams (error-rate track and
//! throughput track), and all accumulation happens in integers, so results
//! are byte-identical no matter how frames are scheduled across threads.

use rayon::prelude::*;

use crate::analysis::{BoundParams, ThroughputTerms};
use crate::config::{make_rng, mix_seed, ProtocolConfig};
use crate::optimizer::{optimize_tau, GridSpec, TauTable};
use crate::protocol::{PacketRunner, Scheme};
use crate::{Error, Result};

/// Stopping rule for one measurement point.
///
/// Batches of frames double in size until the error-rate track has seen
/// `target_errors` bit errors or `bit_cap` demodulated bits. Setting
/// `target_errors` to zero runs exactly `initial_frames` frames, which is
/// how fixed-size pilot and regression runs are expressed.
#[derive(Clone, Copy, Debug)]
pub struct MeasureBudget {
    pub target_errors: u64,
    pub bit_cap: u64,
    pub initial_frames: u64,
}

impl Default for MeasureBudget {
    fn default() -> Self {
        Self {
            target_errors: 100,
            bit_cap: 100_000_000,
            initial_frames: 200,
        }
    }
}

/// How the marking threshold is chosen at each operating point.
#[derive(Clone, Debug)]
pub enum TauPolicy {
    /// One threshold everywhere.
    Fixed(f64),
    /// Maximize the analytical throughput bound on this grid.
    Optimal(GridSpec),
    /// Look the threshold up in a prebuilt table (exact SNR/mu match).
    Table(TauTable),
}

/// A full sweep: the cartesian product of schemes, cycle lengths and SNRs
/// over one base configuration.
#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub base: ProtocolConfig,
    pub schemes: Vec<Scheme>,
    pub mus: Vec<u32>,
    pub snrs_db: Vec<f64>,
    pub tau_policy: TauPolicy,
    pub budget: MeasureBudget,
}

/// Measured statistics of one operating point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointResult {
    pub scheme: Scheme,
    pub mu: u32,
    pub snr_db: f64,
    pub tau: f64,
    /// Bit error rate after all `mu` rounds, unconditioned on frame checks.
    pub ber: f64,
    pub ber_ci95: f64,
    /// Delivered information bits per transmitted channel bit.
    pub eta: f64,
    pub eta_ci95: f64,
    /// Rounds per frame on the protocol track, capped frames included.
    pub mean_rounds: f64,
    /// Selectively retransmitted symbols per full-transmission symbol.
    pub mean_beta_fraction: f64,
    pub frames: u64,
    /// Demodulated bits on the error-rate track.
    pub bits: u64,
}

pub const SWEEP_CSV_HEADER: &str =
    "scheme,mu,snr_db,tau,ber,ber_ci95,eta,eta_ci95,mean_rounds,mean_beta_fraction,frames,bits";

impl PointResult {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.scheme.label(),
            self.mu,
            self.snr_db,
            self.tau,
            self.ber,
            self.ber_ci95,
            self.eta,
            self.eta_ci95,
            self.mean_rounds,
            self.mean_beta_fraction,
            self.frames,
            self.bits
        )
    }
}

/// Serializes sweep results with the pinned column layout.
pub fn sweep_to_csv(points: &[PointResult]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for p in points {
        out.push_str(&p.csv_row());
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// Cycle cap
// ---------------------------------------------------------------------------

/// Deterministic cap on protocol cycles per frame, from the analytical cycle
/// success probability: generous where deliveries are plausible, tight where
/// the analytical bound already says the point is hopeless.
pub fn cycle_cap_for(p_cycle: f64) -> u32 {
    if p_cycle >= 1e-4 {
        (400.0 / p_cycle).clamp(1_000.0, 100_000.0) as u32
    } else if p_cycle >= 1e-6 {
        1_000
    } else {
        200
    }
}

/// Cap used when FEC is on and the uncoded analytical machinery does not
/// describe the cycle success probability. Biases the throughput estimate
/// only where per-cycle success is below ~1e-3, i.e. where it is ~0 anyway.
pub const FEC_CYCLE_CAP: u32 = 1_000;

fn cycle_cap(cfg: &ProtocolConfig, scheme: Scheme) -> u32 {
    if cfg.fec_enabled {
        return FEC_CYCLE_CAP;
    }
    let tau = match scheme {
        Scheme::Ccsr => cfg.tau,
        Scheme::Chase => 0.0,
    };
    let bp = BoundParams::from_ebn0_db(cfg.snr_db, &cfg.modulation);
    let t = ThroughputTerms::from_bounds(&bp, tau, cfg.mu, cfg.frame_bits);
    cycle_cap_for(t.one_minus_alpha)
}

// ---------------------------------------------------------------------------
// Integer accumulators
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct Accum {
    // Error-rate track.
    frames: u64,
    bits: u64,
    errors: u64,
    errors_sq: u128,
    // Protocol track.
    delivered_frames: u64,
    delivered_bits: u64,
    sent_bits: u64,
    delivered_sq: u128,
    sent_sq: u128,
    cross: u128,
    rounds: u64,
    full_events: u64,
    selective_symbols: u64,
}

impl Accum {
    fn add(self, o: Self) -> Self {
        Self {
            frames: self.frames + o.frames,
            bits: self.bits + o.bits,
            errors: self.errors + o.errors,
            errors_sq: self.errors_sq + o.errors_sq,
            delivered_frames: self.delivered_frames + o.delivered_frames,
            delivered_bits: self.delivered_bits + o.delivered_bits,
            sent_bits: self.sent_bits + o.sent_bits,
            delivered_sq: self.delivered_sq + o.delivered_sq,
            sent_sq: self.sent_sq + o.sent_sq,
            cross: self.cross + o.cross,
            rounds: self.rounds + o.rounds,
            full_events: self.full_events + o.full_events,
            selective_symbols: self.selective_symbols + o.selective_symbols,
        }
    }
}

/// Both tracks for one frame index, each on its own RNG substream.
fn measure_frame(
    runner: &mut PacketRunner,
    scheme: Scheme,
    point_seed: u64,
    frame_idx: u64,
    cap: u32,
) -> Accum {
    let cfg = runner.config();
    let (mu, n_sub, k, frame_bits) = (
        cfg.mu,
        cfg.n_subcarriers,
        cfg.modulation.bits_per_symbol(),
        cfg.frame_bits as u64,
    );

    let mut acc = Accum {
        frames: 1,
        ..Accum::default()
    };

    // Track 0: raw error rate after exactly mu rounds.
    let mut rng = make_rng(point_seed, 2 * frame_idx);
    let frame = runner.random_frame(&mut rng);
    let fo = runner.run_fixed_rounds(scheme, &frame, mu, &mut rng);
    acc.bits = fo.frame_bits;
    acc.errors = fo.bit_errors;
    acc.errors_sq = (fo.bit_errors as u128) * (fo.bit_errors as u128);

    // Track 1: the real protocol with restarts.
    let mut rng = make_rng(point_seed, 2 * frame_idx + 1);
    let frame = runner.random_frame(&mut rng);
    let eo = runner.run(scheme, &frame, cap, &mut rng);
    let d = if eo.delivered { frame_bits } else { 0 };
    let n = eo.sent_bits(n_sub, k);
    acc.delivered_frames = eo.delivered as u64;
    acc.delivered_bits = d;
    acc.sent_bits = n;
    acc.delivered_sq = (d as u128) * (d as u128);
    acc.sent_sq = (n as u128) * (n as u128);
    acc.cross = (d as u128) * (n as u128);
    acc.rounds = eo.rounds as u64;
    acc.full_events = eo.full_events as u64;
    acc.selective_symbols = eo.selective_symbols;
    acc
}

// ---------------------------------------------------------------------------
// Point and sweep drivers
// ---------------------------------------------------------------------------

/// Measures one operating point; parallelizes over frames in the ambient
/// rayon pool. `point_seed` fixes every substream, so the result is a pure
/// function of `(cfg, scheme, budget, point_seed)`.
pub fn run_point(
    cfg: &ProtocolConfig,
    scheme: Scheme,
    budget: &MeasureBudget,
    point_seed: u64,
) -> Result<PointResult> {
    cfg.validate()?;
    assert!(budget.initial_frames >= 1);
    let cap = cycle_cap(cfg, scheme);

    let mut acc = Accum::default();
    let mut next = 0u64;
    let mut batch = budget.initial_frames;
    loop {
        let chunk = (0..batch as usize)
            .into_par_iter()
            .with_min_len(32)
            .map_init(
                || PacketRunner::new(cfg).expect("config validated above"),
                |runner, i| measure_frame(runner, scheme, point_seed, next + i as u64, cap),
            )
            .reduce(Accum::default, Accum::add);
        acc = acc.add(chunk);
        next += batch;
        if acc.errors >= budget.target_errors || acc.bits >= budget.bit_cap {
            break;
        }
        batch *= 2;
    }

    let (ber, ber_ci95) = ber_stats(&acc, cfg.frame_bits as u64);
    let (eta, eta_ci95) = eta_stats(&acc);
    let tau = match scheme {
        Scheme::Ccsr => cfg.tau,
        Scheme::Chase => 0.0,
    };
    Ok(PointResult {
        scheme,
        mu: cfg.mu,
        snr_db: cfg.snr_db,
        tau,
        ber,
        ber_ci95,
        eta,
        eta_ci95,
        mean_rounds: acc.rounds as f64 / acc.frames as f64,
        mean_beta_fraction: if acc.full_events == 0 {
            0.0
        } else {
            acc.selective_symbols as f64 / (acc.full_events * cfg.n_subcarriers as u64) as f64
        },
        frames: acc.frames,
        bits: acc.bits,
    })
}

/// Mean and 95% half-width of the error rate, clustering by frame.
fn ber_stats(acc: &Accum, bits_per_frame: u64) -> (f64, f64) {
    let f = acc.frames as f64;
    let ber = acc.errors as f64 / acc.bits as f64;
    if acc.frames < 2 {
        return (ber, 0.0);
    }
    let mean_e = acc.errors as f64 / f;
    let var_e = (acc.errors_sq as f64 - f * mean_e * mean_e) / (f - 1.0);
    let se = (var_e.max(0.0) / f).sqrt() / bits_per_frame as f64;
    (ber, 1.96 * se)
}

/// Ratio-estimator mean and 95% half-width for delivered-per-sent bits.
fn eta_stats(acc: &Accum) -> (f64, f64) {
    if acc.sent_bits == 0 {
        return (0.0, 0.0);
    }
    let f = acc.frames as f64;
    let r = acc.delivered_bits as f64 / acc.sent_bits as f64;
    if acc.frames < 2 {
        return (r, 0.0);
    }
    let s2 = (acc.delivered_sq as f64 - 2.0 * r * acc.cross as f64
        + r * r * acc.sent_sq as f64)
        / (f - 1.0);
    let n_bar = acc.sent_bits as f64 / f;
    let se = (s2.max(0.0) / f).sqrt() / n_bar;
    (r, 1.96 * se)
}

/// Runs the whole sweep. Points are seeded by their position in the
/// (scheme, mu, snr) nest, so adding SNRs to the end of a sweep never
/// reshuffles earlier points' randomness.
pub fn run_sweep(spec: &SweepSpec, seed: u64, workers: usize) -> Result<Vec<PointResult>> {
    let execute = || -> Result<Vec<PointResult>> {
        let mut results = Vec::new();
        let mut point_index = 0u64;
        for &scheme in &spec.schemes {
            for &mu in &spec.mus {
                for &snr_db in &spec.snrs_db {
                    let tau = match (scheme, &spec.tau_policy) {
                        (Scheme::Chase, _) => 0.0,
                        (_, TauPolicy::Fixed(t)) => *t,
                        (_, TauPolicy::Optimal(grid)) => {
                            optimize_tau(snr_db, mu, spec.base.frame_bits, &spec.base.modulation, grid)
                                .tau
                        }
                        (_, TauPolicy::Table(t)) => {
                            t.lookup(snr_db, mu)
                                .ok_or_else(|| {
                                    Error::InvalidInput(format!(
                                        "no threshold table entry for {snr_db} dB, mu={mu}"
                                    ))
                                })?
                                .tau_o
                        }
                    };
                    let mut cfg = spec.base.clone();
                    cfg.mu = mu;
                    cfg.snr_db = snr_db;
                    cfg.tau = tau;
                    let point_seed = mix_seed(seed, point_index);
                    results.push(run_point(&cfg, scheme, &spec.budget, point_seed)?);
                    point_index += 1;
                }
            }
        }
        Ok(results)
    };

    if workers == 0 {
        execute()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
        pool.install(execute)
    }
}

/// Picks the threshold with the best measured protocol throughput from a
/// candidate list, using fixed-size pilot runs on a salted seed so the pilot
/// never shares substreams with the final measurement. Ties break low.
pub fn tune_tau_measured(
    base: &ProtocolConfig,
    scheme: Scheme,
    mu: u32,
    snr_db: f64,
    candidates: &[f64],
    pilot_frames: u64,
    seed: u64,
) -> Result<f64> {
    assert!(!candidates.is_empty());
    const PILOT_SALT: u64 = 0x7069_6c6f_74;
    let budget = MeasureBudget {
        target_errors: 0,
        bit_cap: u64::MAX,
        initial_frames: pilot_frames,
    };
    let mut best = (candidates[0], f64::NEG_INFINITY);
    for (i, &tau) in candidates.iter().enumerate() {
        let mut cfg = base.clone();
        cfg.mu = mu;
        cfg.snr_db = snr_db;
        cfg.tau = tau;
        let point_seed = mix_seed(mix_seed(seed, PILOT_SALT), i as u64);
        let r = run_point(&cfg, scheme, &budget, point_seed)?;
        if r.eta > best.1 {
            best = (tau, r.eta);
        }
    }
    Ok(best.0)
}
