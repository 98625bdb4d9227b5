//! Fixed-start reduction and binary city-label registers.
//!
//! City 0 is always the start city and is not encoded. The remaining `M = n-1`
//! positions each hold a `k = ceil(log2 M)`-bit register; reduced label `a`
//! stands for original city `a + 1`.
//!
//! Bit layout: register `i` occupies bits `[i*k, (i+1)*k)` of the packed
//! basis index, least significant bit first. Every module uses this layout,
//! and the ansatz ancilla sits directly above the data bits at index `M*k`.

use std::fmt;

use crate::error::{Error, Result};
use crate::instances::{check_permutation, next_permutation};

/// Largest register count [`ReducedEncoding::feasible_states`] will enumerate.
pub const FEASIBLE_ENUMERATION_CAP: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReducedEncoding {
    n: usize,
    m: usize,
    k: usize,
}

/// Packed basis index over the data qubits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BasisState(pub u64);

/// Reduced labels of a valid tour, position by position.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FeasibleTour {
    codes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StateClass {
    Feasible(FeasibleTour),
    RepeatedCity,
    InvalidCode,
}

impl ReducedEncoding {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewCities(n));
        }
        let m = n - 1;
        // M == 1 still gets one qubit.
        let k = (usize::BITS - (m - 1).leading_zeros()).max(1) as usize;
        if m * k > 63 {
            return Err(Error::CapExceeded {
                what: "data qubits",
                value: m * k,
                cap: 63,
            });
        }
        Ok(Self { n, m, k })
    }

    pub fn cities(&self) -> usize {
        self.n
    }

    /// `M`, the number of encoded positions.
    pub fn registers(&self) -> usize {
        self.m
    }

    /// `k`, bits per register.
    pub fn bits_per_register(&self) -> usize {
        self.k
    }

    pub fn data_qubits(&self) -> usize {
        self.m * self.k
    }

    pub fn num_states(&self) -> usize {
        1usize << self.data_qubits()
    }

    /// Number of distinct register codes, `2^k`.
    pub fn num_codes(&self) -> usize {
        1 << self.k
    }

    pub fn start_city(&self) -> usize {
        0
    }

    pub fn original_city(&self, label: usize) -> usize {
        label + 1
    }

    /// Qubit index of bit `b` in register `i`.
    pub fn qubit(&self, register: usize, bit: usize) -> usize {
        register * self.k + bit
    }

    #[inline]
    pub fn code(&self, state: BasisState, register: usize) -> usize {
        ((state.0 >> (register * self.k)) & ((1u64 << self.k) - 1)) as usize
    }

    pub fn decode_state(&self, state: BasisState) -> Vec<usize> {
        (0..self.m).map(|i| self.code(state, i)).collect()
    }

    /// Packs arbitrary codes (valid or not) into a basis state.
    pub fn pack_codes(&self, codes: &[usize]) -> Result<BasisState> {
        if codes.len() != self.m {
            return Err(Error::SizeMismatch {
                expected: self.m,
                got: codes.len(),
            });
        }
        let mut bits = 0u64;
        for (i, &c) in codes.iter().enumerate() {
            if c >= self.num_codes() {
                return Err(Error::OutOfRange {
                    what: "code",
                    index: c,
                    limit: self.num_codes(),
                });
            }
            bits |= (c as u64) << (i * self.k);
        }
        Ok(BasisState(bits))
    }

    /// Diagonal entry of the projector `P_register(code)` at `state`.
    pub fn projector_value(&self, state: BasisState, register: usize, code: usize) -> Result<u8> {
        if register >= self.m {
            return Err(Error::OutOfRange {
                what: "register",
                index: register,
                limit: self.m,
            });
        }
        if code >= self.num_codes() {
            return Err(Error::OutOfRange {
                what: "code",
                index: code,
                limit: self.num_codes(),
            });
        }
        Ok(u8::from(self.code(state, register) == code))
    }

    pub fn encode_tour(&self, tour: &FeasibleTour) -> Result<BasisState> {
        check_permutation(&tour.codes, self.m)?;
        self.pack_codes(&tour.codes)
    }

    pub fn classify_state(&self, state: BasisState) -> StateClass {
        let codes = self.decode_state(state);
        if codes.iter().any(|&c| c >= self.m) {
            return StateClass::InvalidCode;
        }
        let mut seen = 0u64;
        for &c in &codes {
            if seen & (1 << c) != 0 {
                return StateClass::RepeatedCity;
            }
            seen |= 1 << c;
        }
        StateClass::Feasible(FeasibleTour { codes })
    }

    pub fn is_feasible(&self, state: BasisState) -> bool {
        matches!(self.classify_state(state), StateClass::Feasible(_))
    }

    /// The `M!` feasible states, ordered by lexicographic tour codes.
    pub fn feasible_states(&self) -> Result<Vec<BasisState>> {
        Ok(self
            .feasible_tours()?
            .iter()
            .map(|t| self.pack_codes(&t.codes).expect("valid codes"))
            .collect())
    }

    /// All feasible tours in lexicographic order of their codes.
    pub fn feasible_tours(&self) -> Result<Vec<FeasibleTour>> {
        if self.m > FEASIBLE_ENUMERATION_CAP {
            return Err(Error::CapExceeded {
                what: "register count",
                value: self.m,
                cap: FEASIBLE_ENUMERATION_CAP,
            });
        }
        let mut codes: Vec<usize> = (0..self.m).collect();
        let mut out = vec![FeasibleTour {
            codes: codes.clone(),
        }];
        while next_permutation(&mut codes) {
            out.push(FeasibleTour {
                codes: codes.clone(),
            });
        }
        Ok(out)
    }

    /// The identity ordering `(0, 1, …, M-1)`.
    pub fn canonical_tour(&self) -> FeasibleTour {
        FeasibleTour {
            codes: (0..self.m).collect(),
        }
    }

    /// Renders `state` as register codes, register 0 first, each code written
    /// most significant bit first, e.g. `00|01|10|11`.
    pub fn render(&self, state: BasisState) -> String {
        self.decode_state(state)
            .iter()
            .map(|c| format!("{c:0width$b}", width = self.k))
            .collect::<Vec<_>>()
            .join("|")
    }
}

impl FeasibleTour {
    pub fn new(codes: Vec<usize>) -> Result<Self> {
        let m = codes.len();
        check_permutation(&codes, m)?;
        Ok(Self { codes })
    }

    /// Accepts a full tour starting at city 0.
    pub fn from_full_tour(tour: &[usize]) -> Result<Self> {
        check_permutation(tour, tour.len())?;
        if tour.first() != Some(&0) {
            return Err(Error::NotAPermutation(tour.to_vec()));
        }
        Ok(Self {
            codes: tour[1..].iter().map(|c| c - 1).collect(),
        })
    }

    pub fn to_full_tour(&self) -> Vec<usize> {
        std::iter::once(0)
            .chain(self.codes.iter().map(|c| c + 1))
            .collect()
    }

    pub fn codes(&self) -> &[usize] {
        &self.codes
    }

    /// The tour with positions `i` and `i+1` exchanged.
    pub fn swapped(&self, i: usize) -> Self {
        let mut codes = self.codes.clone();
        codes.swap(i, i + 1);
        Self { codes }
    }
}

impl fmt::Display for FeasibleTour {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let full = self.to_full_tour();
        let parts: Vec<String> = full.iter().map(ToString::to_string).collect();
        write!(f, "{}", parts.join("-"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn register_widths() {
        let cases = [
            (2, 1, 1),
            (3, 2, 1),
            (4, 3, 2),
            (5, 4, 2),
            (6, 5, 3),
            (9, 8, 3),
            (10, 9, 4),
        ];
        for (n, m, k) in cases {
            let enc = ReducedEncoding::new(n).unwrap();
            assert_eq!((enc.registers(), enc.bits_per_register()), (m, k), "n={n}");
            assert_eq!(enc.data_qubits(), m * k);
        }
    }

    #[test]
    fn six_cities_use_fifteen_data_qubits() {
        let enc = ReducedEncoding::new(6).unwrap();
        let state = enc.encode_tour(&enc.canonical_tour()).unwrap();
        assert_eq!(enc.data_qubits(), 15);
        assert!(state.0 < 1 << 15);
    }

    #[test]
    fn projector_examples() {
        let enc = ReducedEncoding::new(5).unwrap();
        let state = enc.pack_codes(&[3, 1, 0, 2]).unwrap();
        assert_eq!(enc.projector_value(state, 1, 1).unwrap(), 1);
        assert_eq!(enc.projector_value(state, 1, 2).unwrap(), 0);
        assert!(enc.projector_value(state, 4, 0).is_err());
        assert!(enc.projector_value(state, 0, 4).is_err());
    }

    #[test]
    fn projectors_are_complete() {
        let enc = ReducedEncoding::new(6).unwrap();
        for s in (0..enc.num_states() as u64).step_by(97) {
            for i in 0..enc.registers() {
                let total: u32 = (0..enc.num_codes())
                    .map(|a| u32::from(enc.projector_value(BasisState(s), i, a).unwrap()))
                    .sum();
                assert_eq!(total, 1);
            }
        }
    }

    #[test]
    fn packing_layout() {
        let enc = ReducedEncoding::new(5).unwrap();
        let state = enc
            .encode_tour(&FeasibleTour::new(vec![0, 1, 2, 3]).unwrap())
            .unwrap();
        assert_eq!(state.0, 0b1110_0100);
        assert_eq!(enc.render(state), "00|01|10|11");
    }

    #[test]
    fn encode_decode_round_trip() {
        let enc = ReducedEncoding::new(5).unwrap();
        let tours = enc.feasible_tours().unwrap();
        assert_eq!(tours.len(), 24);
        for t in tours {
            let s = enc.encode_tour(&t).unwrap();
            assert_eq!(enc.decode_state(s), t.codes());
            assert_eq!(FeasibleTour::from_full_tour(&t.to_full_tour()).unwrap(), t);
        }
    }

    #[test]
    fn classification_examples() {
        let enc4 = ReducedEncoding::new(5).unwrap();
        assert!(matches!(
            enc4.classify_state(enc4.pack_codes(&[0, 1, 2, 3]).unwrap()),
            StateClass::Feasible(_)
        ));
        assert_eq!(
            enc4.classify_state(enc4.pack_codes(&[0, 0, 1, 2]).unwrap()),
            StateClass::RepeatedCity
        );
        let enc3 = ReducedEncoding::new(4).unwrap();
        assert_eq!(
            enc3.classify_state(enc3.pack_codes(&[0, 3, 1]).unwrap()),
            StateClass::InvalidCode
        );
        // invalid code wins over a repeat
        assert_eq!(
            enc3.classify_state(enc3.pack_codes(&[3, 0, 0]).unwrap()),
            StateClass::InvalidCode
        );
    }

    #[test]
    fn feasible_set_sizes() {
        let factorial = |m: usize| (1..=m).product::<usize>();
        for n in 3..=7 {
            let enc = ReducedEncoding::new(n).unwrap();
            let feasible: std::collections::HashSet<_> =
                enc.feasible_states().unwrap().into_iter().collect();
            assert_eq!(feasible.len(), factorial(n - 1));
            let mut counted = 0;
            for s in 0..enc.num_states() as u64 {
                let is = enc.is_feasible(BasisState(s));
                counted += usize::from(is);
                assert_eq!(is, feasible.contains(&BasisState(s)));
            }
            assert_eq!(counted, feasible.len());
        }
    }

    #[test]
    fn rejects_non_permutations() {
        assert!(FeasibleTour::new(vec![0, 0, 1]).is_err());
        assert!(FeasibleTour::from_full_tour(&[1, 0, 2]).is_err());
        let enc = ReducedEncoding::new(5).unwrap();
        let short = FeasibleTour::new(vec![0, 1, 2]).unwrap();
        assert!(enc.encode_tour(&short).is_err());
    }
}
