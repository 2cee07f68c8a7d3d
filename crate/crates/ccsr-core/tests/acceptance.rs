//! Acceptance gate: one test per shipping criterion, each printing a single
//! `ACCEPTANCE <n> <name>: PASS|FAIL` verdict line. Failing clauses carry
//! their evidence in the panic message.

use std::io::Write;

use ccsr_core::analysis::{
    ber_bound, ber_bound_round1, ber_bound_round2, expected_bits_n_mu, marking_fraction,
    throughput_eta, throughput_lower_bound, BoundParams, ThroughputTerms,
};
use ccsr_core::channel::{ChannelSampler, TransmissionEvent};
use ccsr_core::config::{ChannelMode, ModulationSpec, ProtocolConfig};
use ccsr_core::fec::{wifi_648_324, LdpcDecoder, DECODE_MAX_ITERS};
use ccsr_core::optimizer::{optimize_tau, GridSpec, TauTable};
use ccsr_core::protocol::{select_retx, PacketRunner, Scheme};
use ccsr_core::config::mix_seed;
use ccsr_core::sim::{run_point, run_sweep, sweep_to_csv, MeasureBudget, SweepSpec, TauPolicy};
use ccsr_core::make_rng;
use rand::Rng;

// ---------------------------------------------------------------------------
// Verdict plumbing
// ---------------------------------------------------------------------------

/// Collects clause failures for one criterion and prints the verdict line.
/// The line is written straight to the process stdout so it shows up even
/// for passing tests under harness capture.
struct Gate {
    failures: Vec<String>,
}

impl Gate {
    fn new() -> Self {
        Self { failures: Vec::new() }
    }

    fn check(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(detail());
        }
    }

    fn finish(self, n: u32, name: &str) {
        let pass = self.failures.is_empty();
        let verdict = if pass { "PASS" } else { "FAIL" };
        let mut out = std::io::stdout();
        let _ = writeln!(out, "ACCEPTANCE {n} {name}: {verdict}");
        let _ = out.flush();
        assert!(pass, "{}", self.failures.join("; "));
    }
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn fixed_frames(n: u64) -> MeasureBudget {
    MeasureBudget {
        target_errors: 0,
        bit_cap: u64::MAX,
        initial_frames: n,
    }
}

fn iid_config(snr_db: f64, mu: u32, tau: f64) -> ProtocolConfig {
    let mut cfg = ProtocolConfig::default();
    cfg.channel_mode = ChannelMode::IidGains;
    cfg.snr_db = snr_db;
    cfg.mu = mu;
    cfg.tau = tau;
    cfg
}

// ---------------------------------------------------------------------------
// 1. Closed-form consistency
// ---------------------------------------------------------------------------

#[test]
fn acceptance_1_formula_consistency() {
    let mut gate = Gate::new();
    let modulation = ModulationSpec::qam(4).unwrap();
    let taus = [0.0, 0.1, 0.5, 1.0, 3.0];

    // General error-rate sum against the dedicated one- and two-round
    // expansions on a 100-point grid.
    for i in 0..20 {
        let snr = 1.0 + i as f64;
        let bp = BoundParams::from_ebn0_db(snr, &modulation);
        for &tau in &taus {
            let g1 = ber_bound(&bp, tau, 1);
            let e1 = ber_bound_round1(&bp, tau);
            gate.check(rel_close(g1, e1, 1e-12), || {
                format!("round-1 mismatch at snr={snr} tau={tau}: {g1} vs {e1}")
            });
            let g2 = ber_bound(&bp, tau, 2);
            let e2 = ber_bound_round2(&bp, tau);
            gate.check(rel_close(g2, e2, 1e-12), || {
                format!("round-2 mismatch at snr={snr} tau={tau}: {g2} vs {e2}")
            });
        }
    }

    // Throughput and expected-cost are exact reciprocals.
    for (snr, tau, mu, frame_bits) in [
        (8.0, 0.5, 1u32, 256usize),
        (10.0, 0.3, 2, 1024),
        (12.0, 1.0, 3, 512),
        (16.0, 0.1, 4, 1024),
        (14.0, 0.0, 2, 2048),
    ] {
        let bp = BoundParams::from_ebn0_db(snr, &modulation);
        let t = ThroughputTerms::from_bounds(&bp, tau, mu, frame_bits);
        let n = expected_bits_n_mu(&t).unwrap();
        let eta = throughput_eta(&t).unwrap();
        gate.check(rel_close(eta * n, 1.0, 1e-12), || {
            format!("eta*n = {} at snr={snr} tau={tau} mu={mu}", eta * n)
        });
        if mu == 1 {
            let closed = t.p_success[0] / (1.0 + t.marking_fraction);
            gate.check(rel_close(eta, closed, 1e-12), || {
                format!("single-round closed form: {eta} vs {closed}")
            });
        }
    }

    // Single-round closed form at a few more points.
    for snr in [6.0, 12.0, 18.0] {
        let bp = BoundParams::from_ebn0_db(snr, &modulation);
        let t = ThroughputTerms::from_bounds(&bp, 0.4, 1, 1024);
        let eta = throughput_eta(&t).unwrap();
        let closed = t.p_success[0] / (1.0 + t.marking_fraction);
        gate.check(rel_close(eta, closed, 1e-12), || {
            format!("single-round closed form at snr={snr}: {eta} vs {closed}")
        });
    }

    gate.finish(1, "formula_consistency");
}

// ---------------------------------------------------------------------------
// 2. Renewal-process oracle
// ---------------------------------------------------------------------------

#[test]
fn acceptance_2_renewal_oracle() {
    let mut gate = Gate::new();
    let modulation = ModulationSpec::qam(4).unwrap();
    let mut param_rng = make_rng(0xACC2, 0);
    let mut accepted = 0u64;

    while accepted < 5 {
        let snr: f64 = param_rng.random_range(8.0..16.0);
        let tau: f64 = param_rng.random_range(0.2..1.0);
        let mu: u32 = param_rng.random_range(1..=4);
        let frame_bits = [256usize, 512, 1024][param_rng.random_range(0..3)];
        let bp = BoundParams::from_ebn0_db(snr, &modulation);
        let t = ThroughputTerms::from_bounds(&bp, tau, mu, frame_bits);
        // Keep the restart process short enough to deliver 1e6 frames fast.
        if t.one_minus_alpha < 0.05 {
            continue;
        }
        accepted += 1;

        let eta = throughput_eta(&t).unwrap();
        let mut rng = make_rng(0xACC2, accepted);
        let mut rounds_total = 0u64;
        let target = 1_000_000u64;
        for _ in 0..target {
            'cycles: loop {
                for j in 0..mu as usize {
                    rounds_total += 1;
                    if rng.random::<f64>() < t.p_success[j] {
                        break 'cycles;
                    }
                }
            }
        }
        let eta_hat = target as f64 / (rounds_total as f64 * (1.0 + t.marking_fraction));
        gate.check((eta_hat - eta).abs() <= 0.005 * eta, || {
            format!(
                "set {accepted} (snr={snr:.2} tau={tau:.2} mu={mu} L={frame_bits}): \
                 event-driven {eta_hat:.6} vs closed form {eta:.6}"
            )
        });
    }

    gate.finish(2, "renewal_oracle");
}

// ---------------------------------------------------------------------------
// 3. Channel statistics
// ---------------------------------------------------------------------------

fn ks_distance_exp1(samples: &mut [f64]) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in samples.iter().enumerate() {
        let f = 1.0 - (-x).exp();
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

#[test]
fn acceptance_3_channel_statistics() {
    let mut gate = Gate::new();

    // Squared-gain law in the independent-gains mode: pool everything.
    let mut rng = make_rng(0xACC3, 0);
    let mut sampler = ChannelSampler::new(ChannelMode::IidGains, 100, 10);
    let mut samples = Vec::with_capacity(100_000);
    for round in 0..1000u32 {
        let ch = sampler.draw(TransmissionEvent::Full { round }, &mut rng);
        for l in 0..ch.len() {
            samples.push(ch.power(l));
        }
    }
    let d = ks_distance_exp1(&mut samples);
    gate.check(d < 0.01, || format!("independent-gains KS distance {d:.5}"));

    // Tap mode: gains within one draw are correlated, so track a single
    // subcarrier across draws.
    let mut rng = make_rng(0xACC3, 1);
    let mut sampler = ChannelSampler::new(ChannelMode::Taps, 64, 10);
    let mut samples = Vec::with_capacity(100_000);
    for round in 0..100_000u32 {
        let ch = sampler.draw(TransmissionEvent::Full { round }, &mut rng);
        samples.push(ch.power(7));
    }
    let d = ks_distance_exp1(&mut samples);
    gate.check(d < 0.01, || format!("tap-mode KS distance {d:.5}"));

    // Marked fraction matches the exponential law within 3 sigma, with the
    // per-draw fractions treated as the independent unit in both modes.
    let tau = 0.7;
    let m_expected = marking_fraction(tau);
    for (mode, stream) in [(ChannelMode::IidGains, 2u64), (ChannelMode::Taps, 3u64)] {
        let mut rng = make_rng(0xACC3, stream);
        let mut sampler = ChannelSampler::new(mode, 512, 10);
        let draws = 2000u32;
        let (mut sum, mut sum_sq) = (0.0f64, 0.0f64);
        for round in 0..draws {
            let ch = sampler.draw(TransmissionEvent::Full { round }, &mut rng);
            let frac = select_retx(&ch, tau).len() as f64 / ch.len() as f64;
            sum += frac;
            sum_sq += frac * frac;
        }
        let n = draws as f64;
        let mean = sum / n;
        let var = (sum_sq - n * mean * mean) / (n - 1.0);
        let se = (var / n).sqrt();
        gate.check((mean - m_expected).abs() <= 3.0 * se, || {
            format!(
                "marked fraction in {mode:?}: {mean:.5} vs {m_expected:.5} (se {se:.2e})"
            )
        });
    }

    gate.finish(3, "channel_statistics");
}

// ---------------------------------------------------------------------------
// 4. Degenerate-parameter equivalences
// ---------------------------------------------------------------------------

#[test]
fn acceptance_4_degeneracy_equivalence() {
    let mut gate = Gate::new();

    // Zero threshold never marks anything, so the selective scheme must be
    // bit-identical to plain combining, RNG draw for RNG draw.
    let mut cfg = ProtocolConfig::default();
    cfg.n_subcarriers = 256;
    cfg.frame_bits = 512;
    cfg.snr_db = 8.0;
    cfg.mu = 2;
    cfg.tau = 0.0;
    let mut a = PacketRunner::new(&cfg).unwrap();
    let mut b = PacketRunner::new(&cfg).unwrap();
    let mut mismatches = 0u32;
    for f in 0..300u64 {
        let frame = a.random_frame(&mut make_rng(0xACC4, 2 * f));
        let out_a = a.run(Scheme::Ccsr, &frame, 50, &mut make_rng(0xACC4, 2 * f + 1));
        let out_b = b.run(Scheme::Chase, &frame, 50, &mut make_rng(0xACC4, 2 * f + 1));
        if out_a != out_b {
            mismatches += 1;
        }
    }
    gate.check(mismatches == 0, || {
        format!("zero-threshold equivalence: {mismatches}/300 frames diverged")
    });

    // A threshold beyond any gain marks everything, so one selective round
    // carries the same two observations as two plain combining rounds.
    let frames = 977u64; // ~1e6 bits at 1024 bits/frame
    let all = run_point(
        &iid_config(6.0, 1, 1e9),
        Scheme::Ccsr,
        &fixed_frames(frames),
        0xC4B1,
    )
    .unwrap();
    let chase = run_point(
        &iid_config(6.0, 2, 0.0),
        Scheme::Chase,
        &fixed_frames(frames),
        0xC4B2,
    )
    .unwrap();
    let sigma = ((all.ber_ci95 / 1.96).powi(2) + (chase.ber_ci95 / 1.96).powi(2)).sqrt();
    gate.check((all.ber - chase.ber).abs() <= 3.0 * sigma, || {
        format!(
            "full-marking vs plain combining: {:.3e} vs {:.3e} (3 sigma {:.3e})",
            all.ber,
            chase.ber,
            3.0 * sigma
        )
    });
    gate.check(all.mean_beta_fraction > 0.999, || {
        format!("full marking expected, got {}", all.mean_beta_fraction)
    });

    gate.finish(4, "degeneracy_equivalence");
}

// ---------------------------------------------------------------------------
// 5. Bound tightness against measurement
// ---------------------------------------------------------------------------

#[test]
fn acceptance_5_bound_tightness() {
    let mut gate = Gate::new();
    let modulation = ModulationSpec::qam(4).unwrap();
    let frames = 10_000u64;
    let mut idx = 0u64;

    for mu in [1u32, 2, 4] {
        for snr in [4.0, 8.0, 12.0, 16.0] {
            idx += 1;
            let opt = optimize_tau(snr, mu, 1024, &modulation, &GridSpec::default());
            let cfg = iid_config(snr, mu, opt.tau);
            let p = run_point(
                &cfg,
                Scheme::Ccsr,
                &fixed_frames(frames),
                mix_seed(0xACC5, idx),
            )
            .unwrap();
            let bp = BoundParams::from_ebn0_db(snr, &modulation);
            let ber_a = ber_bound(&bp, opt.tau, mu);
            let eta_a =
                throughput_lower_bound(snr, opt.tau, mu, 1024, &modulation).unwrap_or(0.0);

            // The error-rate bound must not be statistically refuted: the
            // observed error count stays below the 3-sigma envelope of the
            // count the bound itself predicts.
            let errors = (p.ber * p.bits as f64).round();
            let lambda = ber_a * p.bits as f64;
            gate.check(errors <= lambda + 3.0 * lambda.sqrt() + 3.0, || {
                format!(
                    "({snr} dB, mu={mu}): {errors} errors vs bound envelope {:.1}",
                    lambda + 3.0 * lambda.sqrt() + 3.0
                )
            });
            // Tightness within 4x wherever the measurement resolves it.
            if errors >= 10.0 {
                gate.check(ber_a / p.ber <= 4.0, || {
                    format!(
                        "({snr} dB, mu={mu}): bound {ber_a:.3e} vs measured {:.3e}",
                        p.ber
                    )
                });
            }
            gate.check(p.eta >= eta_a, || {
                format!(
                    "({snr} dB, mu={mu}): measured eta {:.3e} below bound {eta_a:.3e}",
                    p.eta
                )
            });
            gate.check(p.eta - eta_a <= 0.1, || {
                format!(
                    "({snr} dB, mu={mu}): eta gap {:.3} above 0.1",
                    p.eta - eta_a
                )
            });
        }
    }

    gate.finish(5, "bound_tightness");
}

// ---------------------------------------------------------------------------
// 6. Throughput dominance over plain combining
// ---------------------------------------------------------------------------

#[test]
fn acceptance_6_throughput_dominance() {
    let mut gate = Gate::new();
    let modulation = ModulationSpec::qam(4).unwrap();
    let frames = 2500u64;
    let mut idx = 0u64;

    for mu in [1u32, 2, 4] {
        for snr in [8.0, 12.0, 16.0] {
            idx += 1;
            let opt = optimize_tau(snr, mu, 1024, &modulation, &GridSpec::default());
            let sel = run_point(
                &iid_config(snr, mu, opt.tau),
                Scheme::Ccsr,
                &fixed_frames(frames),
                mix_seed(0xACC6, 2 * idx),
            )
            .unwrap();
            let plain = run_point(
                &iid_config(snr, mu, 0.0),
                Scheme::Chase,
                &fixed_frames(frames),
                mix_seed(0xACC6, 2 * idx + 1),
            )
            .unwrap();
            let ci = (sel.eta_ci95.powi(2) + plain.eta_ci95.powi(2)).sqrt();
            gate.check(sel.eta >= plain.eta - ci, || {
                format!(
                    "({snr} dB, mu={mu}): selective {:.4} vs plain {:.4} (ci {ci:.4})",
                    sel.eta, plain.eta
                )
            });
            if mu == 1 && snr == 12.0 {
                gate.check(sel.eta >= 1.05 * plain.eta, || {
                    format!(
                        "moderate-SNR margin: selective {:.4} not 5% above plain {:.4}",
                        sel.eta, plain.eta
                    )
                });
            }
        }
    }

    gate.finish(6, "throughput_dominance");
}

// ---------------------------------------------------------------------------
// 7. Optimizer behavior across SNR and cycle length
// ---------------------------------------------------------------------------

#[test]
fn acceptance_7_optimizer_behavior() {
    let mut gate = Gate::new();
    let modulation = ModulationSpec::qam(4).unwrap();
    let grid = GridSpec {
        lo: 0.0,
        hi: 4.0,
        step: 0.01,
    };
    let snrs: Vec<f64> = (8..=20).map(|s| s as f64).collect();
    let table = TauTable::build(&snrs, &[1, 2, 3, 4], 1024, &modulation, &grid);
    let tau_at = |snr: f64, mu: u32| table.lookup(snr, mu).unwrap().tau_o;
    let step_tol = grid.step + 1e-9;

    // High-SNR single-round track collapses to no marking at all.
    for snr in [16.0, 17.0, 18.0, 19.0, 20.0] {
        let t = tau_at(snr, 1);
        gate.check(t == 0.0, || {
            format!("single-round threshold at {snr} dB is {t}, not 0")
        });
    }

    // Longer cycles agree with each other once SNR is moderate.
    for &snr in &snrs {
        let diff = (tau_at(snr, 4) - tau_at(snr, 3)).abs();
        gate.check(diff <= step_tol, || {
            format!(
                "mu=3/mu=4 disagree at {snr} dB: {} vs {}",
                tau_at(snr, 3),
                tau_at(snr, 4)
            )
        });
    }
    for &snr in &snrs {
        if snr < 12.0 {
            continue;
        }
        for mu in [3u32, 4] {
            let diff = (tau_at(snr, mu) - tau_at(snr, 2)).abs();
            gate.check(diff <= step_tol, || {
                format!(
                    "mu={mu} vs mu=2 disagree at {snr} dB: {} vs {}",
                    tau_at(snr, mu),
                    tau_at(snr, 2)
                )
            });
        }
    }

    gate.finish(7, "optimizer_behavior");
}

// ---------------------------------------------------------------------------
// 8. Coded track
// ---------------------------------------------------------------------------

#[test]
fn acceptance_8_fec_track() {
    let mut gate = Gate::new();

    // Encode/decode round trip with clean observations.
    let code = wifi_648_324();
    let mut rng = make_rng(0xACC8, 0);
    let mut decoder = LdpcDecoder::new(code);
    for _ in 0..20 {
        let info: Vec<u8> = (0..code.k()).map(|_| rng.random_range(0..2u8)).collect();
        let cw = code.encode(&info);
        let llr: Vec<f64> = cw.iter().map(|&b| if b == 1 { -20.0 } else { 20.0 }).collect();
        let res = decoder.decode(&llr, DECODE_MAX_ITERS);
        let ok = res.converged && res.iterations == 0 && res.bits == cw
            && res.info(code) == &info[..];
        gate.check(ok, || "clean round trip failed".into());
        if !ok {
            break;
        }
    }

    // Coding gain at 3 dB over the single-observation fading channel.
    let uncoded = run_point(
        &iid_config(3.0, 1, 0.0),
        Scheme::Ccsr,
        &fixed_frames(977),
        0xC8B1,
    )
    .unwrap();
    let mut coded_cfg = iid_config(3.0, 1, 0.0);
    coded_cfg.enable_fec();
    let coded = run_point(&coded_cfg, Scheme::Ccsr, &fixed_frames(3087), 0xC8B2).unwrap();
    gate.check(10.0 * coded.ber <= uncoded.ber, || {
        format!(
            "3 dB coding gain {:.2}x below 10x (uncoded {:.4}, coded {:.4})",
            uncoded.ber / coded.ber,
            uncoded.ber,
            coded.ber
        )
    });

    // Selective-retransmission HARQ keeps up with plain combining across the
    // low-SNR sweep when its threshold is tuned by cheap pilots. Zero is a
    // candidate because at high SNR any marking is pure overhead.
    let candidates = [0.0, 1.0, 5.0];
    let mut idx = 0u64;
    for snr in [-8.0, -6.0, -4.0, -2.0, 0.0, 2.0, 4.0, 6.0, 8.0] {
        idx += 1;
        let mut cfg = iid_config(snr, 1, 0.0);
        cfg.enable_fec();

        // Probe with the most aggressive candidate; if nothing is ever
        // delivered the operating point is dead and tuning is meaningless.
        let mut probe_cfg = cfg.clone();
        probe_cfg.tau = *candidates.last().unwrap();
        let probe = run_point(
            &probe_cfg,
            Scheme::Ccsr,
            &fixed_frames(10),
            mix_seed(0xC8C0, idx),
        )
        .unwrap();
        let dead = probe.eta == 0.0;

        let tau = if dead {
            1.0
        } else {
            ccsr_core::sim::tune_tau_measured(
                &cfg,
                Scheme::Ccsr,
                1,
                snr,
                &candidates,
                25,
                mix_seed(0xC8C1, idx),
            )
            .unwrap()
        };
        let frames = if dead {
            25
        } else if snr < 3.0 {
            100
        } else {
            150
        };
        cfg.tau = tau;
        let sel = run_point(
            &cfg,
            Scheme::Ccsr,
            &fixed_frames(frames),
            mix_seed(0xC8C2, idx),
        )
        .unwrap();
        let mut plain_cfg = cfg.clone();
        plain_cfg.tau = 0.0;
        let plain = run_point(
            &plain_cfg,
            Scheme::Chase,
            &fixed_frames(frames),
            mix_seed(0xC8C3, idx),
        )
        .unwrap();
        let ci = (sel.eta_ci95.powi(2) + plain.eta_ci95.powi(2)).sqrt();
        gate.check(sel.eta >= plain.eta - ci, || {
            format!(
                "coded sweep at {snr} dB (tau {tau}): selective {:.4} vs plain {:.4} (ci {ci:.4})",
                sel.eta, plain.eta
            )
        });
    }

    gate.finish(8, "fec_track");
}

// ---------------------------------------------------------------------------
// 9. Determinism across worker counts
// ---------------------------------------------------------------------------

#[test]
fn acceptance_9_determinism() {
    let mut gate = Gate::new();
    let mut base = ProtocolConfig::default();
    base.n_subcarriers = 128;
    base.frame_bits = 256;
    let spec = SweepSpec {
        base,
        schemes: vec![Scheme::Ccsr, Scheme::Chase],
        mus: vec![1, 2],
        snrs_db: vec![8.0, 12.0],
        tau_policy: TauPolicy::Optimal(GridSpec::default()),
        budget: fixed_frames(150),
    };
    let reference = sweep_to_csv(&run_sweep(&spec, 0xACC9, 1).unwrap());
    for workers in [2usize, 5, 0] {
        let csv = sweep_to_csv(&run_sweep(&spec, 0xACC9, workers).unwrap());
        gate.check(csv == reference, || {
            format!("worker count {workers} changed the sweep output")
        });
    }

    gate.finish(9, "determinism");
}
