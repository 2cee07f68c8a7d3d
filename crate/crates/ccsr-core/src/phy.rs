//! Modulation, maximum-ratio combining of stacked observations, and soft/hard
//! demodulation.

use num_complex::Complex64;

use crate::config::ModulationSpec;

/// Combined decision statistic for one information symbol.
///
/// `s_hat` is the MRC output and `noise_var` the total complex variance of its
/// effective noise. A symbol with no usable observations carries infinite
/// variance and demaps to all-zero LLRs (an erasure).
#[derive(Clone, Copy, Debug)]
pub struct SoftSymbol {
    pub s_hat: Complex64,
    pub noise_var: f64,
}

/// Maps a frame of bits onto constellation symbols, MSB-first per symbol.
pub fn modulate(bits: &[u8], modulation: &ModulationSpec) -> Vec<Complex64> {
    let k = modulation.bits_per_symbol();
    assert!(
        bits.len() % k == 0,
        "bit count {} not a multiple of bits per symbol {k}",
        bits.len()
    );
    bits.chunks_exact(k)
        .map(|chunk| {
            let mut label = 0usize;
            for &b in chunk {
                debug_assert!(b <= 1);
                label = (label << 1) | b as usize;
            }
            modulation.point(label)
        })
        .collect()
}

/// Maximum-ratio combining of `(gain, observation)` pairs for one symbol.
///
/// Returns `s_hat = sum(conj(h)*y) / sum(|h|^2)` with effective noise variance
/// `n0 / sum(|h|^2)`; the estimate is unbiased and invariant under observation
/// order.
pub fn combine(observations: &[(Complex64, Complex64)], n0: f64) -> SoftSymbol {
    let mut num = Complex64::new(0.0, 0.0);
    let mut den = 0.0;
    for (h, y) in observations {
        num += h.conj() * y;
        den += h.norm_sqr();
    }
    if den == 0.0 {
        SoftSymbol {
            s_hat: Complex64::new(0.0, 0.0),
            noise_var: f64::INFINITY,
        }
    } else {
        SoftSymbol {
            s_hat: num / den,
            noise_var: n0 / den,
        }
    }
}

/// Per-bit LLRs `log P(b=0) - log P(b=1)` for one combined symbol.
///
/// Exact for 4-QAM; max-log over the per-axis PAM sub-constellation for
/// larger orders (which coincides with the exact value at 4-QAM).
pub fn llrs(sym: &SoftSymbol, modulation: &ModulationSpec, out: &mut [f64]) {
    let ka = modulation.bits_per_axis();
    debug_assert_eq!(out.len(), modulation.bits_per_symbol());
    if !sym.noise_var.is_finite() {
        out.fill(0.0);
        return;
    }
    // Per-dimension noise variance after combining.
    let nv = sym.noise_var / 2.0;
    axis_llrs(sym.s_hat.re, modulation, nv, &mut out[..ka]);
    axis_llrs(sym.s_hat.im, modulation, nv, &mut out[ka..]);
}

fn axis_llrs(obs: f64, modulation: &ModulationSpec, noise_var_dim: f64, out: &mut [f64]) {
    let amps = modulation.axis_amplitudes();
    let ka = modulation.bits_per_axis();
    for (pos, slot) in out.iter_mut().enumerate() {
        let bit_mask = 1usize << (ka - 1 - pos);
        let mut best0 = f64::INFINITY;
        let mut best1 = f64::INFINITY;
        for (group, &a) in amps.iter().enumerate() {
            let d = obs - a;
            let metric = d * d;
            if group & bit_mask == 0 {
                best0 = best0.min(metric);
            } else {
                best1 = best1.min(metric);
            }
        }
        *slot = (best1 - best0) / (2.0 * noise_var_dim);
    }
}

/// Hard bit decisions from LLRs; a zero LLR resolves to bit 0.
pub fn hard_decide(llr: &[f64], out: &mut [u8]) {
    debug_assert_eq!(llr.len(), out.len());
    for (b, &l) in out.iter_mut().zip(llr) {
        *b = if l < 0.0 { 1 } else { 0 };
    }
}

// ---------------------------------------------------------------------------
// Observation buffer
// ---------------------------------------------------------------------------

use crate::channel::SubcarrierChannel;

/// Receiver-side store of every `(gain, observation)` pair collected for the
/// current HARQ cycle, grouped by information symbol.
#[derive(Clone, Debug)]
pub struct ObservationBuffer {
    slots: Vec<Vec<(Complex64, Complex64)>>,
}

impl ObservationBuffer {
    pub fn new(n_symbols: usize) -> Self {
        Self {
            slots: vec![Vec::new(); n_symbols],
        }
    }

    pub fn n_symbols(&self) -> usize {
        self.slots.len()
    }

    /// Drops all stored observations but keeps the allocations.
    pub fn clear(&mut self) {
        for s in &mut self.slots {
            s.clear();
        }
    }

    /// Appends a full transmission: one observation per symbol.
    pub fn push_full(&mut self, ch: &SubcarrierChannel, y: &[Complex64]) {
        assert_eq!(ch.len(), self.slots.len());
        assert_eq!(y.len(), self.slots.len());
        for (slot, (h, v)) in self.slots.iter_mut().zip(ch.gains.iter().zip(y)) {
            slot.push((*h, *v));
        }
    }

    /// Appends a selective retransmission of the symbols listed in `indices`.
    ///
    /// `ch` and `y` have one entry per marked symbol, in `indices` order.
    pub fn push_selective(&mut self, indices: &[usize], ch: &SubcarrierChannel, y: &[Complex64]) {
        assert_eq!(ch.len(), indices.len());
        assert_eq!(y.len(), indices.len());
        for ((&idx, h), v) in indices.iter().zip(&ch.gains).zip(y) {
            self.slots[idx].push((*h, *v));
        }
    }

    pub fn observations(&self, symbol: usize) -> &[(Complex64, Complex64)] {
        &self.slots[symbol]
    }

    /// Total observation count across all symbols.
    pub fn total_observations(&self) -> usize {
        self.slots.iter().map(Vec::len).sum()
    }

    /// MRC statistic for one symbol.
    pub fn combine(&self, symbol: usize, n0: f64) -> SoftSymbol {
        combine(&self.slots[symbol], n0)
    }
}
