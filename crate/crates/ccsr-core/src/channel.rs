//! Frequency-selective Rayleigh channel draws and the receive observation
//! model `y = H*s + w`.
//!
//! In tap mode an `L`-tap impulse response with per-tap power `1/L` is
//! zero-padded and taken through the DFT, so every subcarrier gain is
//! marginally CN(0,1) and the power `|H|^2` is Exp(1). The iid mode draws the
//! gains directly from CN(0,1), matching the independence assumptions of the
//! analytical bounds. The channel is quasi-static per OFDM symbol and
//! independent between transmission events.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};

use crate::config::{ChannelMode, ProtocolConfig};

/// What a channel realization was drawn for; kept for tracing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransmissionEvent {
    Full { round: u32 },
    Selective { round: u32 },
}

/// Time-domain impulse response of one transmission event.
#[derive(Clone, Debug)]
pub struct TapChannel {
    pub taps: Vec<Complex64>,
}

/// Per-subcarrier complex gains of one transmission event.
#[derive(Clone, Debug)]
pub struct SubcarrierChannel {
    pub gains: Vec<Complex64>,
    pub event: TransmissionEvent,
}

impl SubcarrierChannel {
    /// Channel power on subcarrier `l`.
    pub fn power(&self, l: usize) -> f64 {
        self.gains[l].norm_sqr()
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    /// Gains at `indices`, in order, as a shorter channel vector.
    pub fn gather(&self, indices: &[usize]) -> SubcarrierChannel {
        SubcarrierChannel {
            gains: indices.iter().map(|&i| self.gains[i]).collect(),
            event: self.event,
        }
    }
}

/// Reusable channel generator holding the DFT plan for tap mode.
pub struct ChannelSampler {
    mode: ChannelMode,
    n_subcarriers: usize,
    n_taps: usize,
    fft: Option<Arc<dyn Fft<f64>>>,
    scratch: Vec<Complex64>,
}

impl ChannelSampler {
    pub fn new(mode: ChannelMode, n_subcarriers: usize, n_taps: usize) -> Self {
        assert!(n_taps >= 1 && n_taps <= n_subcarriers);
        let fft = match mode {
            ChannelMode::Taps => {
                Some(FftPlanner::new().plan_fft_forward(n_subcarriers))
            }
            ChannelMode::IidGains => None,
        };
        Self {
            mode,
            n_subcarriers,
            n_taps,
            fft,
            scratch: vec![Complex64::new(0.0, 0.0); n_subcarriers],
        }
    }

    pub fn for_config(cfg: &ProtocolConfig) -> Self {
        Self::new(cfg.channel_mode, cfg.n_subcarriers, cfg.n_taps)
    }

    /// Draws the impulse response used by tap mode.
    pub fn draw_taps<R: Rng + ?Sized>(&self, rng: &mut R) -> TapChannel {
        let scale = (1.0 / (2.0 * self.n_taps as f64)).sqrt();
        let taps = (0..self.n_taps)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re * scale, im * scale)
            })
            .collect();
        TapChannel { taps }
    }

    /// Draws a fresh channel realization for one transmission event.
    pub fn draw<R: Rng + ?Sized>(&mut self, event: TransmissionEvent, rng: &mut R) -> SubcarrierChannel {
        let gains = match self.mode {
            ChannelMode::Taps => {
                let taps = self.draw_taps(rng);
                self.scratch.fill(Complex64::new(0.0, 0.0));
                self.scratch[..taps.taps.len()].copy_from_slice(&taps.taps);
                self.fft.as_ref().unwrap().process(&mut self.scratch);
                self.scratch.clone()
            }
            ChannelMode::IidGains => {
                let scale = (0.5f64).sqrt();
                (0..self.n_subcarriers)
                    .map(|_| {
                        let re: f64 = rng.sample(StandardNormal);
                        let im: f64 = rng.sample(StandardNormal);
                        Complex64::new(re * scale, im * scale)
                    })
                    .collect()
            }
        };
        SubcarrierChannel { gains, event }
    }
}

/// One-shot convenience wrapper over [`ChannelSampler`].
pub fn draw_channel<R: Rng + ?Sized>(
    cfg: &ProtocolConfig,
    event: TransmissionEvent,
    rng: &mut R,
) -> SubcarrierChannel {
    ChannelSampler::for_config(cfg).draw(event, rng)
}

/// Passes symbols through the channel and adds CN(0, n0) noise.
pub fn apply_channel<R: Rng + ?Sized>(
    ch: &SubcarrierChannel,
    symbols: &[Complex64],
    n0: f64,
    rng: &mut R,
) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); symbols.len()];
    apply_channel_into(ch, symbols, n0, rng, &mut out);
    out
}

/// In-place variant of [`apply_channel`].
pub fn apply_channel_into<R: Rng + ?Sized>(
    ch: &SubcarrierChannel,
    symbols: &[Complex64],
    n0: f64,
    rng: &mut R,
    out: &mut [Complex64],
) {
    assert_eq!(ch.gains.len(), symbols.len(), "channel/symbol length mismatch");
    assert_eq!(out.len(), symbols.len());
    let nscale = (n0 / 2.0).sqrt();
    for ((y, s), h) in out.iter_mut().zip(symbols).zip(&ch.gains) {
        let wr: f64 = rng.sample(StandardNormal);
        let wi: f64 = rng.sample(StandardNormal);
        *y = h * s + Complex64::new(wr * nscale, wi * nscale);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::make_rng;

    fn taps_sampler(n_sub: usize, n_taps: usize) -> ChannelSampler {
        ChannelSampler::new(ChannelMode::Taps, n_sub, n_taps)
    }

    #[test]
    fn test_single_tap_gives_flat_channel() {
        let mut s = taps_sampler(64, 1);
        let mut rng = make_rng(1, 0);
        let ch = s.draw(TransmissionEvent::Full { round: 1 }, &mut rng);
        let h0 = ch.gains[0];
        for g in &ch.gains {
            assert!((g - h0).norm() < 1e-12, "single-tap DFT must be flat");
        }
    }

    #[test]
    fn test_mean_power_is_unity() {
        let mut rng = make_rng(2, 0);
        for (mode, n_sub) in [(ChannelMode::Taps, 512), (ChannelMode::IidGains, 512)] {
            let mut s = ChannelSampler::new(mode, n_sub, 10);
            let mut sum = 0.0;
            let mut count = 0usize;
            for _ in 0..2000 {
                let ch = s.draw(TransmissionEvent::Full { round: 1 }, &mut rng);
                sum += ch.gains.iter().map(|g| g.norm_sqr()).sum::<f64>();
                count += n_sub;
            }
            let mean = sum / count as f64;
            assert!((mean - 1.0).abs() < 0.01, "{mode:?}: mean power {mean}");
        }
    }

    #[test]
    fn test_gain_dimensions_are_zero_mean_half_variance() {
        // Within one multipath draw the subcarrier gains are correlated, so
        // sample one fixed subcarrier per draw; those are iid CN(0,1) across
        // draws. Tolerances sit at roughly 4-5 standard errors.
        let n_draws = 20_000;
        let mut s = taps_sampler(64, 10);
        let mut rng = make_rng(3, 0);
        let mut sum = Complex64::new(0.0, 0.0);
        let mut sum_re2 = 0.0;
        let mut sum_im2 = 0.0;
        for _ in 0..n_draws {
            let g = s.draw(TransmissionEvent::Full { round: 1 }, &mut rng).gains[5];
            sum += g;
            sum_re2 += g.re * g.re;
            sum_im2 += g.im * g.im;
        }
        let nf = n_draws as f64;
        assert!((sum.re / nf).abs() < 0.02);
        assert!((sum.im / nf).abs() < 0.02);
        assert!((sum_re2 / nf - 0.5).abs() < 0.025, "re var {}", sum_re2 / nf);
        assert!((sum_im2 / nf - 0.5).abs() < 0.025, "im var {}", sum_im2 / nf);

        // Independent-gains mode has no within-draw correlation; pool all.
        let mut s = ChannelSampler::new(ChannelMode::IidGains, 512, 10);
        let mut sum = Complex64::new(0.0, 0.0);
        let mut sum2 = 0.0;
        for _ in 0..500 {
            let ch = s.draw(TransmissionEvent::Full { round: 1 }, &mut rng);
            for g in &ch.gains {
                sum += g;
                sum2 += g.norm_sqr();
            }
        }
        let nf = 500.0 * 512.0;
        assert!((sum.re / nf).abs() < 0.01);
        assert!((sum.im / nf).abs() < 0.01);
        assert!((sum2 / nf - 1.0).abs() < 0.015, "power {}", sum2 / nf);
    }

    #[test]
    fn test_events_are_independent() {
        // Correlation between one subcarrier's gain in successive draws stays
        // at the noise floor (samples across draws are iid, so the mean of
        // conj products has standard error ~ 1/sqrt(n) per dimension).
        let n_pairs = 20_000;
        let mut s = taps_sampler(64, 10);
        let mut rng = make_rng(4, 0);
        let mut cross = Complex64::new(0.0, 0.0);
        let mut prev = s.draw(TransmissionEvent::Full { round: 1 }, &mut rng).gains[0];
        for i in 0..n_pairs {
            let event = if i % 2 == 0 {
                TransmissionEvent::Selective { round: 1 }
            } else {
                TransmissionEvent::Full { round: 2 }
            };
            let cur = s.draw(event, &mut rng).gains[0];
            cross += prev * cur.conj();
            prev = cur;
        }
        let corr = (cross / n_pairs as f64).norm();
        assert!(corr < 0.03, "cross-event correlation {corr}");
    }

    #[test]
    fn test_apply_channel_noiseless_and_noise_power() {
        let mut rng = make_rng(5, 0);
        let gains = vec![Complex64::new(0.3, -1.2); 4];
        let ch = SubcarrierChannel {
            gains,
            event: TransmissionEvent::Full { round: 1 },
        };
        let s = vec![Complex64::new(1.0, 0.0); 4];
        let y = apply_channel(&ch, &s, 0.0, &mut rng);
        for v in &y {
            assert!((v - Complex64::new(0.3, -1.2)).norm() < 1e-15);
        }

        // Zero signal: the output variance approaches n0.
        let zeros = vec![Complex64::new(0.0, 0.0); 4];
        let n0 = 0.8;
        let mut acc = 0.0;
        let mut n = 0usize;
        for _ in 0..20000 {
            let y = apply_channel(&ch, &zeros, n0, &mut rng);
            acc += y.iter().map(|v| v.norm_sqr()).sum::<f64>();
            n += y.len();
        }
        let var = acc / n as f64;
        assert!((var - n0).abs() < 0.02, "noise variance {var}");
    }

    #[test]
    fn test_seeded_draws_reproduce() {
        let cfg = ProtocolConfig::default();
        let mut a = make_rng(9, 1);
        let mut b = make_rng(9, 1);
        let ca = draw_channel(&cfg, TransmissionEvent::Full { round: 1 }, &mut a);
        let cb = draw_channel(&cfg, TransmissionEvent::Full { round: 1 }, &mut b);
        assert_eq!(ca.gains, cb.gains);
    }

    #[test]
    fn test_gather_picks_indices() {
        let ch = SubcarrierChannel {
            gains: vec![
                Complex64::new(1.0, 0.0),
                Complex64::new(2.0, 0.0),
                Complex64::new(3.0, 0.0),
            ],
            event: TransmissionEvent::Selective { round: 2 },
        };
        let g = ch.gather(&[2, 0]);
        assert_eq!(g.gains.len(), 2);
        assert!((g.gains[0].re - 3.0).abs() < 1e-15);
        assert!((g.gains[1].re - 1.0).abs() < 1e-15);
    }
}
