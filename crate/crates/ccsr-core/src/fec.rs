//! LDPC forward error correction: alist parsing, systematic encoding through
//! the inverted parity submatrix, and normalized min-sum decoding.

use std::sync::OnceLock;

use crate::{Error, Result};

/// Scaling applied to check-node magnitudes in the min-sum update.
pub const NORM_MIN_SUM_FACTOR: f64 = 0.75;
/// Default decoding iteration budget.
pub const DECODE_MAX_ITERS: usize = 50;

/// A binary LDPC code defined by its parity-check matrix.
///
/// Codewords are systematic: the first `k` bits are information, the last
/// `n - k` are parity. Loading fails unless the parity submatrix (the last
/// `n - k` columns of H) is invertible, which is what makes the systematic
/// form reachable.
pub struct LdpcCode {
    n: usize,
    m: usize,
    /// Variable indices per check row.
    check_vars: Vec<Vec<usize>>,
    /// Edge ids per variable column (into the flattened check-major order).
    var_edges: Vec<Vec<usize>>,
    n_edges: usize,
    /// Row `i` holds the info-bit mask producing parity bit `i`, packed 64
    /// bits per word.
    parity_gen: Vec<Vec<u64>>,
}

impl LdpcCode {
    /// Parses a code from alist text (1-based indices, zero padding allowed).
    pub fn from_alist(text: &str) -> Result<Self> {
        let mut ints = text
            .split_ascii_whitespace()
            .map(|t| t.parse::<i64>().map_err(|_| bad(format!("not an integer: {t}"))));
        let mut next = move || ints.next().unwrap_or_else(|| Err(bad("truncated alist".into())));

        let n = next()? as usize;
        let m = next()? as usize;
        if n == 0 || m == 0 || m >= n {
            return Err(bad(format!("unusable code dimensions n={n} m={m}")));
        }
        let max_col = next()? as usize;
        let max_row = next()? as usize;
        let col_deg: Vec<usize> = (0..n)
            .map(|_| next().map(|v| v as usize))
            .collect::<Result<_>>()?;
        let row_deg: Vec<usize> = (0..m)
            .map(|_| next().map(|v| v as usize))
            .collect::<Result<_>>()?;
        if col_deg.iter().any(|&d| d == 0 || d > max_col) {
            return Err(bad("column degree out of range".into()));
        }
        if row_deg.iter().any(|&d| d == 0 || d > max_row) {
            return Err(bad("row degree out of range".into()));
        }

        // Column adjacency lists (consumed for validation only).
        let mut col_rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (v, rows) in col_rows.iter_mut().enumerate() {
            for slot in 0..max_col {
                let idx = next()?;
                if slot < col_deg[v] {
                    if idx < 1 || idx as usize > m {
                        return Err(bad(format!("row index {idx} out of range")));
                    }
                    rows.push(idx as usize - 1);
                } else if idx != 0 {
                    return Err(bad("nonzero entry in column padding".into()));
                }
            }
        }

        // Row adjacency lists define the check structure.
        let mut check_vars: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (c, vars) in check_vars.iter_mut().enumerate() {
            for slot in 0..max_row {
                let idx = next()?;
                if slot < row_deg[c] {
                    if idx < 1 || idx as usize > n {
                        return Err(bad(format!("column index {idx} out of range")));
                    }
                    vars.push(idx as usize - 1);
                } else if idx != 0 {
                    return Err(bad("nonzero entry in row padding".into()));
                }
            }
        }

        // Cross-check the two adjacency views.
        let mut seen: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (c, vars) in check_vars.iter().enumerate() {
            for &v in vars {
                seen[v].push(c);
            }
        }
        for v in 0..n {
            let mut a = seen[v].clone();
            let mut b = col_rows[v].clone();
            a.sort_unstable();
            b.sort_unstable();
            if a != b {
                return Err(bad(format!("row/column lists disagree at column {v}")));
            }
        }

        let mut var_edges: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut edge = 0usize;
        for vars in &check_vars {
            for &v in vars {
                var_edges[v].push(edge);
                edge += 1;
            }
        }

        let parity_gen = build_parity_generator(n, m, &check_vars)?;
        Ok(Self {
            n,
            m,
            check_vars,
            var_edges,
            n_edges: edge,
            parity_gen,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Information bits per codeword.
    pub fn k(&self) -> usize {
        self.n - self.m
    }

    pub fn n_checks(&self) -> usize {
        self.m
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    pub fn rate(&self) -> f64 {
        self.k() as f64 / self.n as f64
    }

    /// Systematic encoding: `[info | parity]` with `parity = B^-1 A info`.
    pub fn encode(&self, info: &[u8]) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.n);
        self.encode_into(info, &mut out);
        out
    }

    pub fn encode_into(&self, info: &[u8], out: &mut Vec<u8>) {
        let k = self.k();
        assert_eq!(info.len(), k, "expected {k} information bits");
        let words = k.div_ceil(64);
        let mut packed = vec![0u64; words];
        for (i, &b) in info.iter().enumerate() {
            debug_assert!(b <= 1);
            packed[i / 64] |= (b as u64) << (i % 64);
        }
        out.clear();
        out.extend_from_slice(info);
        for row in &self.parity_gen {
            let mut acc = 0u64;
            for (w, r) in packed.iter().zip(row) {
                acc ^= w & r;
            }
            out.push((acc.count_ones() & 1) as u8);
        }
    }

    /// True when every parity check is satisfied.
    pub fn syndrome_ok(&self, bits: &[u8]) -> bool {
        assert_eq!(bits.len(), self.n);
        self.check_vars
            .iter()
            .all(|vars| vars.iter().fold(0u8, |acc, &v| acc ^ bits[v]) == 0)
    }
}

fn bad(msg: String) -> Error {
    Error::Parse(msg)
}

/// Inverts the parity submatrix B (last `m` columns of H) over GF(2) and
/// multiplies by the information submatrix A, giving the dense map from
/// information bits to parity bits.
fn build_parity_generator(
    n: usize,
    m: usize,
    check_vars: &[Vec<usize>],
) -> Result<Vec<Vec<u64>>> {
    let k = n - m;
    let bwords = m.div_ceil(64);
    let kwords = k.div_ceil(64);
    // Augmented rows [B | I] packed over GF(2), plus the A rows.
    let mut b_rows = vec![vec![0u64; bwords]; m];
    let mut inv_rows = vec![vec![0u64; bwords]; m];
    let mut a_rows = vec![vec![0u64; kwords]; m];
    for (r, vars) in check_vars.iter().enumerate() {
        inv_rows[r][r / 64] |= 1 << (r % 64);
        for &v in vars {
            if v < k {
                a_rows[r][v / 64] |= 1 << (v % 64);
            } else {
                let c = v - k;
                b_rows[r][c / 64] |= 1 << (c % 64);
            }
        }
    }

    // Gauss-Jordan elimination to identity on B.
    for col in 0..m {
        let word = col / 64;
        let mask = 1u64 << (col % 64);
        let pivot = (col..m)
            .find(|&r| b_rows[r][word] & mask != 0)
            .ok_or_else(|| bad("parity submatrix is singular".into()))?;
        b_rows.swap(col, pivot);
        inv_rows.swap(col, pivot);
        for r in 0..m {
            if r != col && b_rows[r][word] & mask != 0 {
                let (pb, pi) = (b_rows[col].clone(), inv_rows[col].clone());
                for (w, p) in b_rows[r].iter_mut().zip(&pb) {
                    *w ^= p;
                }
                for (w, p) in inv_rows[r].iter_mut().zip(&pi) {
                    *w ^= p;
                }
            }
        }
    }

    // parity_gen row i = XOR of A rows selected by row i of B^-1.
    let mut gen = vec![vec![0u64; kwords]; m];
    for (gi, inv) in gen.iter_mut().zip(&inv_rows) {
        for j in 0..m {
            if inv[j / 64] & (1 << (j % 64)) != 0 {
                for (w, a) in gi.iter_mut().zip(&a_rows[j]) {
                    *w ^= a;
                }
            }
        }
    }
    Ok(gen)
}

// ---------------------------------------------------------------------------
// Decoder
// ---------------------------------------------------------------------------

/// Outcome of one decoding attempt.
#[derive(Clone, Debug)]
pub struct DecodeResult {
    /// Hard decisions for the full codeword.
    pub bits: Vec<u8>,
    /// Whether the decisions satisfy every check with usable soft input.
    pub converged: bool,
    /// Iterations performed before stopping.
    pub iterations: usize,
}

impl DecodeResult {
    /// The systematic information part of the decision.
    pub fn info<'a>(&'a self, code: &LdpcCode) -> &'a [u8] {
        &self.bits[..code.k()]
    }
}

/// Reusable normalized min-sum decoder for one code.
///
/// LLRs follow the convention `log P(b=0) - log P(b=1)`, so positive means
/// bit 0. A frame whose posterior is identically zero (for instance an
/// erased frame with all-zero input) is reported as not converged even
/// though the all-zero word trivially satisfies the checks.
pub struct LdpcDecoder<'a> {
    code: &'a LdpcCode,
    c2v: Vec<f64>,
    v2c: Vec<f64>,
    posterior: Vec<f64>,
    hard: Vec<u8>,
}

impl<'a> LdpcDecoder<'a> {
    pub fn new(code: &'a LdpcCode) -> Self {
        Self {
            code,
            c2v: vec![0.0; code.n_edges],
            v2c: vec![0.0; code.n_edges],
            posterior: vec![0.0; code.n],
            hard: vec![0u8; code.n],
        }
    }

    pub fn code(&self) -> &'a LdpcCode {
        self.code
    }

    /// Runs up to `max_iters` normalized min-sum iterations.
    pub fn decode(&mut self, llr: &[f64], max_iters: usize) -> DecodeResult {
        let code = self.code;
        assert_eq!(llr.len(), code.n, "expected {} channel LLRs", code.n);

        // Initial posterior is the channel itself; a clean frame needs no
        // iterations.
        self.posterior.copy_from_slice(llr);
        if let Some(result) = self.settle(0) {
            return result;
        }

        // First variable-to-check messages are the channel LLRs, laid out in
        // check-major edge order.
        let mut edge = 0usize;
        for vars in &code.check_vars {
            for &v in vars {
                self.v2c[edge] = llr[v];
                edge += 1;
            }
        }

        for iter in 1..=max_iters {
            // Check update: for each check, signs and two smallest magnitudes
            // give every outgoing message in one pass.
            let mut edge = 0usize;
            for vars in &code.check_vars {
                let deg = vars.len();
                let msgs = &self.v2c[edge..edge + deg];
                let mut sign = 1.0f64;
                let mut min1 = f64::INFINITY;
                let mut min2 = f64::INFINITY;
                let mut argmin = 0usize;
                for (i, &v) in msgs.iter().enumerate() {
                    if v < 0.0 {
                        sign = -sign;
                    }
                    let a = v.abs();
                    if a < min1 {
                        min2 = min1;
                        min1 = a;
                        argmin = i;
                    } else if a < min2 {
                        min2 = a;
                    }
                }
                for i in 0..deg {
                    let mag = if i == argmin { min2 } else { min1 };
                    let s = if msgs[i] < 0.0 { -sign } else { sign };
                    self.c2v[edge + i] = NORM_MIN_SUM_FACTOR * s * mag;
                }
                edge += deg;
            }

            // Variable update and posterior.
            for v in 0..code.n {
                let total: f64 = llr[v] + code.var_edges[v].iter().map(|&e| self.c2v[e]).sum::<f64>();
                self.posterior[v] = total;
                for &e in &code.var_edges[v] {
                    self.v2c[e] = total - self.c2v[e];
                }
            }

            if let Some(result) = self.settle(iter) {
                return result;
            }
        }

        self.harden();
        DecodeResult {
            bits: self.hard.clone(),
            converged: false,
            iterations: max_iters,
        }
    }

    fn harden(&mut self) {
        for (b, &p) in self.hard.iter_mut().zip(&self.posterior) {
            *b = if p < 0.0 { 1 } else { 0 };
        }
    }

    /// Hard-decides the posterior and stops early on a satisfied syndrome,
    /// unless the posterior carries no information at all.
    fn settle(&mut self, iter: usize) -> Option<DecodeResult> {
        self.harden();
        if self.posterior.iter().all(|&p| p == 0.0) {
            return None;
        }
        if self.code.syndrome_ok(&self.hard) {
            return Some(DecodeResult {
                bits: self.hard.clone(),
                converged: true,
                iterations: iter,
            });
        }
        None
    }
}

// ---------------------------------------------------------------------------
// Bundled code
// ---------------------------------------------------------------------------

static WIFI_648_324: OnceLock<LdpcCode> = OnceLock::new();

/// The IEEE 802.11n rate-1/2 quasi-cyclic code with n = 648, k = 324
/// (lifting factor 27), parsed once on first use.
pub fn wifi_648_324() -> &'static LdpcCode {
    WIFI_648_324.get_or_init(|| {
        LdpcCode::from_alist(include_str!("../data/wifi_n648_r12.alist"))
            .expect("bundled alist must parse")
    })
}
