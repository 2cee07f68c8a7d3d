//! Closed-form performance bounds: detection BER after any number of combined
//! rounds, and the induced lower bound on ARQ throughput.
//!
//! All expressions use the per-bit energy convention: symbols are scaled so a
//! transported information bit has unit energy, hence `n0 = 10^(-snr_db/10)`
//! with `snr_db` the Eb/N0 operating point. Subcarrier powers are Exp(1), so
//! the marking probability of the selective sub-layer is `1 - exp(-tau)`.

use crate::config::{ModulationSpec, SIGMA_SQ};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Gaussian tail surrogate
// ---------------------------------------------------------------------------

/// Two-term exponential surrogate of the Gaussian tail,
/// `Q(x) ~= exp(-x^2/2)/12 + exp(-2x^2/3)/4`.
///
/// The surrogate upper-bounds Q for x above roughly 0.7 and stays close below
/// it, which keeps the fading averages integrable in closed form.
pub fn q_chiani(x: f64) -> f64 {
    let (a, b) = q_chiani_terms(x);
    a + b
}

/// The two surrogate terms separately: `(exp(-x^2/2)/12, exp(-2x^2/3)/4)`.
pub fn q_chiani_terms(x: f64) -> (f64, f64) {
    let x2 = x * x;
    ((-x2 / 2.0).exp() / 12.0, (-2.0 * x2 / 3.0).exp() / 4.0)
}

// ---------------------------------------------------------------------------
// Bound parameters
// ---------------------------------------------------------------------------

/// Precomputed quantities entering every BER bound at one operating point.
///
/// `rho_sq` and `rho1_sq` are the fading-average contractions produced by the
/// two surrogate terms: `rho^2 = sigma^2*n0 / (g*sigma^2 + n0)` and the same
/// with `g1 = 4g/3` in place of `g`, where `g` is the modulation's
/// nearest-neighbour scale. Both lie strictly inside `(0, sigma^2)`.
#[derive(Clone, Copy, Debug)]
pub struct BoundParams {
    pub n0: f64,
    pub sigma_sq: f64,
    pub rho_sq: f64,
    pub rho1_sq: f64,
    pub nn_scale: f64,
    pub nn_count: f64,
}

impl BoundParams {
    /// Parameters for an `Eb/N0` point given in dB.
    pub fn from_ebn0_db(ebn0_db: f64, modulation: &ModulationSpec) -> Self {
        let n0 = 10f64.powf(-ebn0_db / 10.0);
        let g = modulation.nn_scale();
        let g1 = 4.0 * g / 3.0;
        let s2 = SIGMA_SQ;
        Self {
            n0,
            sigma_sq: s2,
            rho_sq: s2 * n0 / (g * s2 + n0),
            rho1_sq: s2 * n0 / (g1 * s2 + n0),
            nn_scale: g,
            nn_count: modulation.nn_count(),
        }
    }

    /// Survival probability of the marking test under the first surrogate
    /// term, `exp(-tau / (2 rho^2))`.
    fn gate_a(&self, tau: f64) -> f64 {
        (-tau / (2.0 * self.rho_sq)).exp()
    }

    fn gate_b(&self, tau: f64) -> f64 {
        (-tau / (2.0 * self.rho1_sq)).exp()
    }
}

/// Expected fraction of subcarriers marked for selective retransmission.
pub fn marking_fraction(tau: f64) -> f64 {
    -(-tau).exp_m1()
}

// ---------------------------------------------------------------------------
// BER upper bounds
// ---------------------------------------------------------------------------

/// Upper bound on the detection BER after the first round (one full
/// transmission plus its selective retransmission), written out term by term.
pub fn ber_bound_round1(bp: &BoundParams, tau: f64) -> f64 {
    let r = bp.rho_sq / bp.sigma_sq;
    let r1 = bp.rho1_sq / bp.sigma_sq;
    let c = bp.nn_count;
    let a = bp.gate_a(tau);
    let b = bp.gate_b(tau);
    c / 12.0 * r * a
        + c / 4.0 * r1 * b
        + c / 12.0 * r * r * (1.0 - a)
        + c / 4.0 * r1 * r1 * (1.0 - b)
}

/// Upper bound on the detection BER after two combined rounds, written out
/// term by term (six terms: both rounds' symbols split on the marking test).
pub fn ber_bound_round2(bp: &BoundParams, tau: f64) -> f64 {
    let r = bp.rho_sq / bp.sigma_sq;
    let r1 = bp.rho1_sq / bp.sigma_sq;
    let c = bp.nn_count;
    let a = bp.gate_a(tau);
    let b = bp.gate_b(tau);
    c / 12.0 * r.powi(2) * a * a
        + c / 4.0 * r1.powi(2) * b * b
        + c / 6.0 * r.powi(3) * a * (1.0 - a)
        + c / 2.0 * r1.powi(3) * b * (1.0 - b)
        + c / 12.0 * r.powi(4) * (1.0 - a) * (1.0 - a)
        + c / 4.0 * r1.powi(4) * (1.0 - b) * (1.0 - b)
}

/// Upper bound on the detection BER after `rounds` combined rounds.
///
/// Each of the `rounds` full transmissions contributes one diversity branch,
/// and every one of the `i` rounds whose gain fell below `tau` contributes a
/// second; summing the binomial mixture gives
///
/// ```text
/// P_J <= sum_{i=0}^{J} C(J,i) [ c/12 r^(J+i) A^(J-i) (1-A)^i
///                             + c/4 r1^(J+i) B^(J-i) (1-B)^i ]
/// ```
///
/// with `r = rho^2/sigma^2`, `A = exp(-tau/(2 rho^2))`, and the `r1`/`B`
/// twins for the second surrogate term.
pub fn ber_bound(bp: &BoundParams, tau: f64, rounds: u32) -> f64 {
    assert!(rounds >= 1, "rounds must be at least 1");
    let r = bp.rho_sq / bp.sigma_sq;
    let r1 = bp.rho1_sq / bp.sigma_sq;
    let c = bp.nn_count;
    let a = bp.gate_a(tau);
    let b = bp.gate_b(tau);
    let j = rounds as i32;
    let mut sum = 0.0;
    for i in 0..=j {
        let w = binomial(j, i);
        sum += w
            * (c / 12.0 * r.powi(j + i) * a.powi(j - i) * (1.0 - a).powi(i)
                + c / 4.0 * r1.powi(j + i) * b.powi(j - i) * (1.0 - b).powi(i));
    }
    sum
}

/// Binomial coefficient as f64 (exact for the small arguments used here).
pub(crate) fn binomial(n: i32, k: i32) -> f64 {
    debug_assert!(n >= 0 && k >= 0 && k <= n);
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

// ---------------------------------------------------------------------------
// Throughput
// ---------------------------------------------------------------------------

/// Per-round frame statistics feeding the throughput expression.
#[derive(Clone, Debug)]
pub struct ThroughputTerms {
    /// Detection BER per round, clamped to 1/2.
    pub ber: Vec<f64>,
    /// Frame success probability per round, `(1 - ber_J)^frame_bits`.
    pub p_success: Vec<f64>,
    /// Frame error probability per round.
    pub p_error: Vec<f64>,
    /// Probability that a whole cycle of `mu` rounds fails.
    pub alpha: f64,
    /// `1 - alpha` computed in log space so it survives `alpha -> 1`.
    pub one_minus_alpha: f64,
    /// Expected marked fraction per round.
    pub marking_fraction: f64,
    pub frame_bits: usize,
}

/// Frame success/error probabilities from per-round BER values.
///
/// BER inputs above 1/2 (bounds can exceed it at very low SNR) are clamped.
pub fn frame_probs(ber_per_round: &[f64], frame_bits: usize, marking: f64) -> ThroughputTerms {
    assert!(!ber_per_round.is_empty());
    assert!(frame_bits >= 1);
    let ber: Vec<f64> = ber_per_round
        .iter()
        .map(|&p| p.clamp(0.0, 0.5))
        .collect();
    let p_success: Vec<f64> = ber
        .iter()
        .map(|&p| ((frame_bits as f64) * (-p).ln_1p()).exp())
        .collect();
    let p_error: Vec<f64> = p_success.iter().map(|&p| 1.0 - p).collect();
    let log_alpha: f64 = p_success.iter().map(|&p| (-p).ln_1p()).sum();
    let (alpha, one_minus_alpha) = if p_success.iter().any(|&p| p == 1.0) {
        (0.0, 1.0)
    } else {
        (log_alpha.exp(), -log_alpha.exp_m1())
    };
    ThroughputTerms {
        ber,
        p_success,
        p_error,
        alpha,
        one_minus_alpha,
        marking_fraction: marking,
        frame_bits,
    }
}

impl ThroughputTerms {
    /// Builds the terms from the analytical BER bounds at one operating point.
    pub fn from_bounds(bp: &BoundParams, tau: f64, mu: u32, frame_bits: usize) -> Self {
        let bers: Vec<f64> = (1..=mu).map(|j| ber_bound(bp, tau, j)).collect();
        frame_probs(&bers, frame_bits, marking_fraction(tau))
    }

    pub fn mu(&self) -> u32 {
        self.p_success.len() as u32
    }

    /// Probability of reaching round `j` within a cycle (1-based); the prefix
    /// product of earlier rounds' failures.
    fn reach(&self, j: usize) -> f64 {
        self.p_error[..j - 1].iter().product()
    }
}

/// Expected transmitted information bits per delivered information bit.
///
/// Tail-restart ARQ renewal sum: a cycle of `mu` rounds repeats until some
/// round's joint detection passes the frame check, each full transmission
/// costing `1 + m` symbols per information symbol. In closed form
///
/// ```text
/// n = sum_J (1+m) reach(J) p_c(J) * (J + (mu-J) alpha) / (1-alpha)^2
/// ```
pub fn expected_bits_n_mu(t: &ThroughputTerms) -> Result<f64> {
    let mu = t.p_success.len();
    if t.one_minus_alpha == 0.0 {
        return Err(Error::Divergence(
            "every round's frame success probability is zero".into(),
        ));
    }
    let om = t.one_minus_alpha;
    let mut n = 0.0;
    for j in 1..=mu {
        let b_j = (1.0 + t.marking_fraction) * t.reach(j) * t.p_success[j - 1];
        n += b_j * (j as f64 + (mu - j) as f64 * t.alpha) / (om * om);
    }
    Ok(n)
}

/// Throughput lower bound: delivered information bits per transmitted
/// information bit, the reciprocal of [`expected_bits_n_mu`].
pub fn throughput_eta(t: &ThroughputTerms) -> Result<f64> {
    let mu = t.p_success.len();
    if t.one_minus_alpha == 0.0 {
        return Err(Error::Divergence(
            "every round's frame success probability is zero".into(),
        ));
    }
    let om = t.one_minus_alpha;
    let mut denom = 0.0;
    for j in 1..=mu {
        denom += t.reach(j) * t.p_success[j - 1] * (j as f64 + (mu - j) as f64 * t.alpha);
    }
    denom *= 1.0 + t.marking_fraction;
    Ok(om * om / denom)
}

/// Convenience chain from an operating point straight to the throughput bound.
pub fn throughput_lower_bound(
    ebn0_db: f64,
    tau: f64,
    mu: u32,
    frame_bits: usize,
    modulation: &ModulationSpec,
) -> Result<f64> {
    let bp = BoundParams::from_ebn0_db(ebn0_db, modulation);
    throughput_eta(&ThroughputTerms::from_bounds(&bp, tau, mu, frame_bits))
}
