//! Exhaustive threshold search against the analytical throughput bound, and
//! the resulting threshold table artifact.

use crate::analysis::throughput_lower_bound;
use crate::config::ModulationSpec;
use crate::{Error, Result};

/// Search grid for the marking threshold.
#[derive(Clone, Copy, Debug)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            lo: 0.0,
            hi: 4.0,
            step: 1e-3,
        }
    }
}

impl GridSpec {
    /// Grid points in ascending order, endpoints included.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        assert!(self.step > 0.0 && self.hi >= self.lo);
        let n = ((self.hi - self.lo) / self.step).round() as usize + 1;
        (0..n).map(move |i| self.lo + i as f64 * self.step)
    }
}

/// Result of one threshold search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TauOptimum {
    pub tau: f64,
    pub eta: f64,
}

/// Maximizes `objective` over the grid; ties resolve to the smallest
/// threshold because only strict improvements move the argmax.
pub fn optimize_tau_with(grid: &GridSpec, mut objective: impl FnMut(f64) -> f64) -> TauOptimum {
    let mut best = TauOptimum {
        tau: grid.lo,
        eta: f64::NEG_INFINITY,
    };
    for tau in grid.values() {
        let eta = objective(tau);
        if eta > best.eta {
            best = TauOptimum { tau, eta };
        }
    }
    best
}

/// Maximizes the analytical throughput bound over the threshold grid.
///
/// Operating points where the bound degenerates (no round can ever succeed)
/// score zero throughput rather than aborting the search.
pub fn optimize_tau(
    ebn0_db: f64,
    mu: u32,
    frame_bits: usize,
    modulation: &ModulationSpec,
    grid: &GridSpec,
) -> TauOptimum {
    optimize_tau_with(grid, |tau| {
        throughput_lower_bound(ebn0_db, tau, mu, frame_bits, modulation).unwrap_or(0.0)
    })
}

// ---------------------------------------------------------------------------
// Threshold table
// ---------------------------------------------------------------------------

/// One operating point of the threshold table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TauRow {
    pub snr_db: f64,
    pub mu: u32,
    pub tau_o: f64,
    pub eta: f64,
}

/// Optimized thresholds over an SNR x cycle-length grid, sorted by
/// `(mu, snr_db)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TauTable {
    rows: Vec<TauRow>,
}

impl TauTable {
    /// Runs the search at every `(snr, mu)` combination.
    pub fn build(
        snrs: &[f64],
        mus: &[u32],
        frame_bits: usize,
        modulation: &ModulationSpec,
        grid: &GridSpec,
    ) -> Self {
        let mut rows = Vec::with_capacity(snrs.len() * mus.len());
        for &mu in mus {
            for &snr_db in snrs {
                let opt = optimize_tau(snr_db, mu, frame_bits, modulation, grid);
                rows.push(TauRow {
                    snr_db,
                    mu,
                    tau_o: opt.tau,
                    eta: opt.eta,
                });
            }
        }
        let mut t = Self { rows };
        t.sort();
        t
    }

    fn sort(&mut self) {
        self.rows
            .sort_by(|a, b| (a.mu, a.snr_db).partial_cmp(&(b.mu, b.snr_db)).unwrap());
    }

    pub fn rows(&self) -> &[TauRow] {
        &self.rows
    }

    /// The row at an exact operating point, within float tolerance on SNR.
    pub fn lookup(&self, snr_db: f64, mu: u32) -> Option<&TauRow> {
        self.rows
            .iter()
            .find(|r| r.mu == mu && (r.snr_db - snr_db).abs() < 1e-9)
    }

    /// The same-`mu` row with the closest SNR, if any.
    pub fn nearest(&self, snr_db: f64, mu: u32) -> Option<&TauRow> {
        self.rows
            .iter()
            .filter(|r| r.mu == mu)
            .min_by(|a, b| {
                (a.snr_db - snr_db)
                    .abs()
                    .partial_cmp(&(b.snr_db - snr_db).abs())
                    .unwrap()
            })
    }

    /// Serializes with the pinned header `snr_db,mu,tau_o,eta`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("snr_db,mu,tau_o,eta\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{}\n", r.snr_db, r.mu, r.tau_o, r.eta));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty table".into()))?;
        if header.trim() != "snr_db,mu,tau_o,eta" {
            return Err(Error::Parse(format!("unexpected header: {header}")));
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(Error::Parse(format!("line {}: expected 4 fields", i + 2)));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("line {}: bad number {s}", i + 2)))
            };
            rows.push(TauRow {
                snr_db: parse(f[0])?,
                mu: f[1]
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("line {}: bad mu {}", i + 2, f[1])))?,
                tau_o: parse(f[2])?,
                eta: parse(f[3])?,
            });
        }
        let mut t = Self { rows };
        t.sort();
        Ok(t)
    }

    /// Soft sanity report: within each `mu`, the optimal threshold is
    /// expected to shrink and the throughput to grow as SNR improves.
    pub fn monotonicity_warnings(&self) -> Vec<String> {
        let mut warnings = Vec::new();
        for w in self.rows.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            if a.mu != b.mu {
                continue;
            }
            if b.tau_o > a.tau_o + 1e-12 {
                warnings.push(format!(
                    "mu={}: tau_o rises from {} at {} dB to {} at {} dB",
                    a.mu, a.tau_o, a.snr_db, b.tau_o, b.snr_db
                ));
            }
            if b.eta < a.eta - 1e-12 {
                warnings.push(format!(
                    "mu={}: eta falls from {} at {} dB to {} at {} dB",
                    a.mu, a.eta, a.snr_db, b.eta, b.snr_db
                ));
            }
        }
        warnings
    }
}
