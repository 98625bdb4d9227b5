//! The diagonal binary-register Hamiltonian and its Pauli-Z expansion.
//!
//! Energy of a basis state is
//!
//! ```text
//! E = dist + lambda * rep + mu * inv
//! dist = D[s][a0] + sum_i D~[a_i][a_{i+1}] + D[a_{M-1}][s]   (valid codes only)
//! rep  = #{ i < j : a_i == a_j < M }
//! inv  = #{ i : a_i >= M }
//! ```
//!
//! Distance terms involving an invalid code contribute nothing, exactly as the
//! projector sums over valid labels do.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::encoding::{BasisState, ReducedEncoding, StateClass};
use crate::error::{Error, Result};
use crate::instances::TspInstance;

/// Register-bit count above which [`DiagonalHamiltonian`] stops storing a
/// dense diagonal and evaluates energies on demand.
pub const MATERIALIZE_MAX_BITS: usize = 20;

/// Register-bit cap for exhaustive scans in [`DiagonalHamiltonian::ground_states`].
pub const GROUND_STATE_MAX_BITS: usize = 20;

/// Coefficients below this magnitude are dropped from Pauli expansions.
pub const PAULI_EPS: f64 = 1e-12;

/// Default penalty weight `2 * n * max(dist)`, which exceeds the spread of
/// feasible tour lengths.
pub fn default_penalty(inst: &TspInstance) -> f64 {
    2.0 * inst.n() as f64 * inst.max_weight()
}

#[derive(Debug, Clone)]
pub struct DiagonalHamiltonian {
    enc: ReducedEncoding,
    lambda: f64,
    mu: f64,
    /// `D[s][a+1]`
    from_start: Vec<f64>,
    /// `D[a+1][s]`
    to_start: Vec<f64>,
    /// `D~[a][b] = D[a+1][b+1]`, row-major `M x M`
    reduced: Vec<f64>,
    diag: Option<Vec<f64>>,
}

pub fn build_hamiltonian(
    inst: &TspInstance,
    enc: &ReducedEncoding,
    lambda: f64,
    mu: f64,
) -> Result<DiagonalHamiltonian> {
    if !(lambda > 0.0 && mu > 0.0) {
        return Err(Error::NonPositivePenalty { lambda, mu });
    }
    DiagonalHamiltonian::assemble(inst, enc, lambda, mu)
}

impl DiagonalHamiltonian {
    /// The distance part alone (`lambda = mu = 0`).
    pub fn distance_only(inst: &TspInstance, enc: &ReducedEncoding) -> Result<Self> {
        Self::assemble(inst, enc, 0.0, 0.0)
    }

    fn assemble(inst: &TspInstance, enc: &ReducedEncoding, lambda: f64, mu: f64) -> Result<Self> {
        if inst.n() != enc.cities() {
            return Err(Error::EncodingMismatch {
                inst: inst.n(),
                enc: enc.cities(),
            });
        }
        let m = enc.registers();
        let s = enc.start_city();
        let city = |a: usize| enc.original_city(a);
        let mut h = Self {
            enc: *enc,
            lambda,
            mu,
            from_start: (0..m).map(|a| inst.dist(s, city(a))).collect(),
            to_start: (0..m).map(|a| inst.dist(city(a), s)).collect(),
            reduced: (0..m * m)
                .map(|ab| inst.dist(city(ab / m), city(ab % m)))
                .collect(),
            diag: None,
        };
        if enc.data_qubits() <= MATERIALIZE_MAX_BITS {
            let diag = (0..enc.num_states() as u64)
                .map(|x| h.evaluate(BasisState(x)))
                .collect();
            h.diag = Some(diag);
        }
        Ok(h)
    }

    pub fn encoding(&self) -> &ReducedEncoding {
        &self.enc
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Dense diagonal, when materialized.
    pub fn diag(&self) -> Option<&[f64]> {
        self.diag.as_deref()
    }

    pub fn energy(&self, state: BasisState) -> f64 {
        match &self.diag {
            Some(d) => d[state.0 as usize],
            None => self.evaluate(state),
        }
    }

    fn evaluate(&self, state: BasisState) -> f64 {
        self.dist_term(state)
            + self.lambda * self.rep_term(state) as f64
            + self.mu * self.inv_term(state) as f64
    }

    pub fn dist_term(&self, state: BasisState) -> f64 {
        let m = self.enc.registers();
        let code = |i| self.enc.code(state, i);
        let mut e = 0.0;
        let first = code(0);
        if first < m {
            e += self.from_start[first];
        }
        for i in 0..m - 1 {
            let (a, b) = (code(i), code(i + 1));
            if a < m && b < m {
                e += self.reduced[a * m + b];
            }
        }
        let last = code(m - 1);
        if last < m {
            e += self.to_start[last];
        }
        e
    }

    /// Number of unordered register pairs holding the same valid code.
    pub fn rep_term(&self, state: BasisState) -> usize {
        let m = self.enc.registers();
        let mut counts = vec![0usize; m];
        for i in 0..m {
            let c = self.enc.code(state, i);
            if c < m {
                counts[c] += 1;
            }
        }
        counts.iter().map(|&c| c * c.saturating_sub(1) / 2).sum()
    }

    /// Number of registers holding an invalid code.
    pub fn inv_term(&self, state: BasisState) -> usize {
        let m = self.enc.registers();
        (0..m).filter(|&i| self.enc.code(state, i) >= m).count()
    }

    /// Dense diagonal of the distance term alone.
    pub fn distance_diag(&self) -> Result<Vec<f64>> {
        self.check_scan_cap(MATERIALIZE_MAX_BITS)?;
        Ok((0..self.enc.num_states() as u64)
            .map(|x| self.dist_term(BasisState(x)))
            .collect())
    }

    fn check_scan_cap(&self, cap: usize) -> Result<()> {
        if self.enc.data_qubits() > cap {
            return Err(Error::CapExceeded {
                what: "register bits",
                value: self.enc.data_qubits(),
                cap,
            });
        }
        Ok(())
    }

    /// Exact minimizers over all basis states. Energies within a relative
    /// `1e-9` of the minimum count as degenerate.
    pub fn ground_states(&self) -> Result<(f64, Vec<BasisState>)> {
        self.check_scan_cap(GROUND_STATE_MAX_BITS)?;
        let n = self.enc.num_states() as u64;
        let best = (0..n)
            .map(|x| self.energy(BasisState(x)))
            .fold(f64::INFINITY, f64::min);
        let tol = 1e-9 * best.abs().max(1.0);
        let states = (0..n)
            .map(BasisState)
            .filter(|&s| self.energy(s) - best <= tol)
            .collect();
        Ok((best, states))
    }

    /// Expands every projector product into Z strings, merging equal masks.
    /// Output is sorted by ascending mask; terms with `|coeff| <= eps` are
    /// dropped.
    pub fn expand_pauli(&self, eps: f64) -> Vec<PauliZTerm> {
        let m = self.enc.registers();
        let mut acc = BTreeMap::new();
        for a in 0..m {
            add_projector_product(&mut acc, &self.enc, self.from_start[a], &[(0, a)]);
            add_projector_product(&mut acc, &self.enc, self.to_start[a], &[(m - 1, a)]);
        }
        for i in 0..m.saturating_sub(1) {
            for a in 0..m {
                for b in 0..m {
                    let w = self.reduced[a * m + b];
                    add_projector_product(&mut acc, &self.enc, w, &[(i, a), (i + 1, b)]);
                }
            }
        }
        if self.lambda != 0.0 {
            for i in 0..m {
                for j in (i + 1)..m {
                    for a in 0..m {
                        add_projector_product(&mut acc, &self.enc, self.lambda, &[(i, a), (j, a)]);
                    }
                }
            }
        }
        if self.mu != 0.0 {
            for i in 0..m {
                for a in m..self.enc.num_codes() {
                    add_projector_product(&mut acc, &self.enc, self.mu, &[(i, a)]);
                }
            }
        }
        acc.into_iter()
            .filter(|(_, c): &(u64, f64)| c.abs() > eps)
            .map(|(z_mask, coeff)| PauliZTerm { coeff, z_mask })
            .collect()
    }

    /// Energy spread over feasible states, `(min, max)`.
    pub fn feasible_energy_range(&self) -> Result<(f64, f64)> {
        let states = self.enc.feasible_states()?;
        Ok(states
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| {
                let e = self.energy(s);
                (lo.min(e), hi.max(e))
            }))
    }

    pub fn classify(&self, state: BasisState) -> StateClass {
        self.enc.classify_state(state)
    }
}

/// Adds `coeff * prod_r P_r(a_r)` to `acc`, expanding each projector as
/// `prod_b (1 + (-1)^{a_b} Z_b) / 2`.
fn add_projector_product(
    acc: &mut BTreeMap<u64, f64>,
    enc: &ReducedEncoding,
    coeff: f64,
    factors: &[(usize, usize)],
) {
    if coeff == 0.0 {
        return;
    }
    let k = enc.bits_per_register();
    // (qubit, sign) for every bit touched
    let bits: Vec<(usize, f64)> = factors
        .iter()
        .flat_map(|&(reg, code)| {
            (0..k).map(move |b| {
                let sign = if (code >> b) & 1 == 1 { -1.0 } else { 1.0 };
                (enc.qubit(reg, b), sign)
            })
        })
        .collect();
    let scale = coeff / (1u64 << bits.len()) as f64;
    for subset in 0u64..(1 << bits.len()) {
        let mut mask = 0u64;
        let mut sign = 1.0;
        for (j, &(q, s)) in bits.iter().enumerate() {
            if subset >> j & 1 == 1 {
                mask |= 1 << q;
                sign *= s;
            }
        }
        *acc.entry(mask).or_insert(0.0) += scale * sign;
    }
}

/// `coeff * prod_{q in z_mask} Z_q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PauliZTerm {
    pub coeff: f64,
    pub z_mask: u64,
}

impl PauliZTerm {
    /// Eigenvalue on a computational basis state.
    #[inline]
    pub fn eval(&self, state: BasisState) -> f64 {
        if (self.z_mask & state.0).count_ones().is_multiple_of(2) {
            self.coeff
        } else {
            -self.coeff
        }
    }
}

pub fn eval_terms(terms: &[PauliZTerm], state: BasisState) -> f64 {
    terms.iter().map(|t| t.eval(state)).sum()
}

/// Writes `coeff,z_mask` rows, masks as `0x`-prefixed hex.
pub fn write_pauli_csv<W: Write>(mut w: W, terms: &[PauliZTerm]) -> std::io::Result<()> {
    writeln!(w, "coeff,z_mask")?;
    for t in terms {
        writeln!(w, "{},{:#x}", t.coeff, t.z_mask)?;
    }
    Ok(())
}

/// Reads the format written by [`write_pauli_csv`]. Lines starting with `#`
/// are skipped.
pub fn read_pauli_csv<R: BufRead>(r: R) -> Result<Vec<PauliZTerm>> {
    let mut out = Vec::new();
    let mut header_seen = false;
    for (idx, line) in r.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::PauliParse {
            line: line_no,
            msg: e.to_string(),
        })?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header_seen {
            header_seen = true;
            if line == "coeff,z_mask" {
                continue;
            }
        }
        let parse_err = |msg: &str| Error::PauliParse {
            line: line_no,
            msg: msg.to_string(),
        };
        let (c, m) = line
            .split_once(',')
            .ok_or_else(|| parse_err("expected two fields"))?;
        let coeff: f64 = c.trim().parse().map_err(|_| parse_err("bad coefficient"))?;
        let m = m.trim();
        let hex = m
            .strip_prefix("0x")
            .ok_or_else(|| parse_err("mask must be 0x-prefixed"))?;
        let z_mask = u64::from_str_radix(hex, 16).map_err(|_| parse_err("bad mask"))?;
        out.push(PauliZTerm { coeff, z_mask });
    }
    Ok(out)
}

/// One-hot QUBO baseline: `x[i][u] = 1` iff city `u` sits at position `i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuboCost {
    pub n: usize,
    pub a: f64,
    pub b: f64,
}

impl QuboCost {
    pub fn new(n: usize, a: f64, b: f64) -> Self {
        Self { n, a, b }
    }

    pub fn cost(&self, inst: &TspInstance, x: &[Vec<u8>]) -> Result<f64> {
        let n = self.n;
        if inst.n() != n {
            return Err(Error::EncodingMismatch {
                inst: inst.n(),
                enc: n,
            });
        }
        if x.len() != n || x.iter().any(|row| row.len() != n) {
            return Err(Error::SizeMismatch {
                expected: n * n,
                got: x.iter().map(Vec::len).sum(),
            });
        }
        let xv = |i: usize, u: usize| f64::from(x[i][u]);
        let mut dist = 0.0;
        for (i, row) in x.iter().enumerate() {
            let next = (i + 1) % n;
            for (u, &bit) in row.iter().enumerate() {
                if bit == 0 {
                    continue;
                }
                for v in 0..n {
                    dist += inst.dist(u, v) * xv(i, u) * xv(next, v);
                }
            }
        }
        let pos: f64 = (0..n)
            .map(|i| (1.0 - (0..n).map(|u| xv(i, u)).sum::<f64>()).powi(2))
            .sum();
        let city: f64 = (0..n)
            .map(|u| (1.0 - (0..n).map(|i| xv(i, u)).sum::<f64>()).powi(2))
            .sum();
        Ok(dist + self.a * pos + self.b * city)
    }

    /// One-hot assignment of a full tour.
    pub fn one_hot(tour: &[usize]) -> Vec<Vec<u8>> {
        let n = tour.len();
        let mut x = vec![vec![0u8; n]; n];
        for (i, &u) in tour.iter().enumerate() {
            x[i][u] = 1;
        }
        x
    }
}
