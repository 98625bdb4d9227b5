//! Dense statevector simulation for the two circuit families used here.
//!
//! Qubit `q` is bit `q` of the basis index. For the register-swap ansatz the
//! data qubits follow [`crate::encoding`]'s layout and the ancilla is the
//! highest qubit, `M*k`.

use num_complex::Complex64;

use crate::encoding::{BasisState, FeasibleTour, ReducedEncoding};
use crate::error::{Error, Result};

/// Dense simulation refuses more qubits than this.
pub const MAX_QUBITS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GateOp {
    /// `[[cos(t/2), -sin(t/2)], [sin(t/2), cos(t/2)]]`
    Ry {
        target: usize,
        angle: f64,
    },
    X {
        target: usize,
    },
    Cz {
        a: usize,
        b: usize,
    },
    /// Exchanges qubits `a` and `b` on the `control = 1` subspace.
    Cswap {
        control: usize,
        a: usize,
        b: usize,
    },
}

impl GateOp {
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            GateOp::Ry { target, .. } | GateOp::X { target } => vec![target],
            GateOp::Cz { a, b } => vec![a, b],
            GateOp::Cswap { control, a, b } => vec![control, a, b],
        }
    }

    pub fn is_single_qubit(&self) -> bool {
        matches!(self, GateOp::Ry { .. } | GateOp::X { .. })
    }
}

/// Whether a register-swap block rotates the ancilla before or after the
/// controlled swaps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockOrder {
    #[default]
    RotateThenSwap,
    SwapThenRotate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    num_qubits: usize,
    amps: Vec<Complex64>,
}

impl Statevector {
    /// Computational basis state `|index>`.
    pub fn init_basis(num_qubits: usize, index: u64) -> Result<Self> {
        if num_qubits > MAX_QUBITS {
            return Err(Error::CapExceeded {
                what: "qubits",
                value: num_qubits,
                cap: MAX_QUBITS,
            });
        }
        let dim = 1usize << num_qubits;
        if index as usize >= dim {
            return Err(Error::OutOfRange {
                what: "basis index",
                index: index as usize,
                limit: dim,
            });
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[index as usize] = Complex64::new(1.0, 0.0);
        Ok(Self { num_qubits, amps })
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let dim = amps.len();
        if !dim.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "{dim} is not a power of two"
            )));
        }
        Ok(Self {
            num_qubits: dim.trailing_zeros() as usize,
            amps,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    fn check(&self, g: &GateOp) -> Result<()> {
        let qs = g.qubits();
        for (i, &q) in qs.iter().enumerate() {
            if q >= self.num_qubits {
                return Err(Error::OutOfRange {
                    what: "qubit",
                    index: q,
                    limit: self.num_qubits,
                });
            }
            if qs[..i].contains(&q) {
                return Err(Error::QubitCollision(q));
            }
        }
        Ok(())
    }

    pub fn apply(&mut self, g: &GateOp) -> Result<()> {
        self.check(g)?;
        match *g {
            GateOp::Ry { target, angle } => {
                let (s, c) = (angle / 2.0).sin_cos();
                let bit = 1usize << target;
                for i in 0..self.amps.len() {
                    if i & bit == 0 {
                        let (a0, a1) = (self.amps[i], self.amps[i | bit]);
                        self.amps[i] = a0 * c - a1 * s;
                        self.amps[i | bit] = a0 * s + a1 * c;
                    }
                }
            }
            GateOp::X { target } => {
                let bit = 1usize << target;
                for i in 0..self.amps.len() {
                    if i & bit == 0 {
                        self.amps.swap(i, i | bit);
                    }
                }
            }
            GateOp::Cz { a, b } => {
                let mask = (1usize << a) | (1usize << b);
                for (i, amp) in self.amps.iter_mut().enumerate() {
                    if i & mask == mask {
                        *amp = -*amp;
                    }
                }
            }
            GateOp::Cswap { control, a, b } => {
                let (cb, ab, bb) = (1usize << control, 1usize << a, 1usize << b);
                for i in 0..self.amps.len() {
                    // visit each swapped pair once, from its |..a=1,b=0..> member
                    if i & cb != 0 && i & ab != 0 && i & bb == 0 {
                        self.amps.swap(i, (i & !ab) | bb);
                    }
                }
            }
        }
        Ok(())
    }

    pub fn apply_all<'a>(&mut self, ops: impl IntoIterator<Item = &'a GateOp>) -> Result<()> {
        ops.into_iter().try_for_each(|g| self.apply(g))
    }

    /// Ancilla `RY(2 theta)` plus the `k` controlled swaps exchanging
    /// registers `i` and `i+1`.
    pub fn register_swap_block(
        &mut self,
        enc: &ReducedEncoding,
        i: usize,
        theta: f64,
        aux: usize,
        order: BlockOrder,
    ) -> Result<()> {
        for g in register_swap_gates(enc, i, theta, aux, order)? {
            self.apply(&g)?;
        }
        Ok(())
    }

    /// `sum_x p(x) diag[x]`. A diagonal covering all but the top qubit is
    /// applied with that qubit (the ancilla) traced out.
    pub fn diag_expectation(&self, diag: &[f64]) -> Result<f64> {
        let dim = self.amps.len();
        if diag.len() == dim {
            return Ok(self
                .amps
                .iter()
                .zip(diag)
                .map(|(a, d)| a.norm_sqr() * d)
                .sum());
        }
        if diag.len() * 2 == dim {
            let half = diag.len();
            return Ok((0..half)
                .map(|x| (self.amps[x].norm_sqr() + self.amps[x + half].norm_sqr()) * diag[x])
                .sum());
        }
        Err(Error::SizeMismatch {
            expected: dim,
            got: diag.len(),
        })
    }

    /// Data-register distribution with the ancilla marginalized.
    pub fn data_marginal(&self, enc: &ReducedEncoding) -> Result<Vec<f64>> {
        let data = enc.data_qubits();
        if self.num_qubits != data + 1 {
            return Err(Error::SizeMismatch {
                expected: data + 1,
                got: self.num_qubits,
            });
        }
        let half = 1usize << data;
        Ok((0..half)
            .map(|x| self.amps[x].norm_sqr() + self.amps[x + half].norm_sqr())
            .collect())
    }

    /// Marginal probability of every feasible tour, in lexicographic tour
    /// order.
    pub fn marginal_tour_probabilities(
        &self,
        enc: &ReducedEncoding,
    ) -> Result<Vec<(FeasibleTour, f64)>> {
        let marginal = self.data_marginal(enc)?;
        enc.feasible_tours()?
            .into_iter()
            .map(|t| {
                let BasisState(x) = enc.encode_tour(&t)?;
                Ok((t, marginal[x as usize]))
            })
            .collect()
    }
}

/// The gates of one register-swap block.
pub fn register_swap_gates(
    enc: &ReducedEncoding,
    i: usize,
    theta: f64,
    aux: usize,
    order: BlockOrder,
) -> Result<Vec<GateOp>> {
    let m = enc.registers();
    if i + 1 >= m {
        return Err(Error::OutOfRange {
            what: "register pair",
            index: i,
            limit: m.saturating_sub(1),
        });
    }
    let rot = GateOp::Ry {
        target: aux,
        angle: 2.0 * theta,
    };
    let swaps = (0..enc.bits_per_register()).map(|b| GateOp::Cswap {
        control: aux,
        a: enc.qubit(i, b),
        b: enc.qubit(i + 1, b),
    });
    Ok(match order {
        BlockOrder::RotateThenSwap => std::iter::once(rot).chain(swaps).collect(),
        BlockOrder::SwapThenRotate => swaps.chain(std::iter::once(rot)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn random_state(n: usize, rng: &mut ChaCha8Rng) -> Statevector {
        let mut amps: Vec<Complex64> = (0..1 << n)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|a| *a /= norm);
        Statevector::from_amplitudes(amps).unwrap()
    }

    /// Full `2^n x 2^n` matrix of a gate, built column by column from its
    /// action on basis vectors described independently of `apply`.
    fn dense_matrix(n: usize, g: &GateOp) -> Vec<Vec<Complex64>> {
        let dim = 1 << n;
        let bit = |x: usize, q: usize| (x >> q) & 1;
        let mut mat = vec![vec![c(0.0); dim]; dim];
        for col in 0..dim {
            match *g {
                GateOp::Ry { target, angle } => {
                    let (s, co) = ((angle / 2.0).sin(), (angle / 2.0).cos());
                    let flipped = col ^ (1 << target);
                    if bit(col, target) == 0 {
                        mat[col][col] = c(co);
                        mat[flipped][col] = c(s);
                    } else {
                        mat[col][col] = c(co);
                        mat[flipped][col] = c(-s);
                    }
                }
                GateOp::X { target } => mat[col ^ (1 << target)][col] = c(1.0),
                GateOp::Cz { a, b } => {
                    mat[col][col] = c(if bit(col, a) & bit(col, b) == 1 {
                        -1.0
                    } else {
                        1.0
                    })
                }
                GateOp::Cswap { control, a, b } => {
                    let row = if bit(col, control) == 1 && bit(col, a) != bit(col, b) {
                        col ^ (1 << a) ^ (1 << b)
                    } else {
                        col
                    };
                    mat[row][col] = c(1.0);
                }
            }
        }
        mat
    }

    #[test]
    fn gates_match_dense_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let gates = [
            GateOp::Ry {
                target: 0,
                angle: 0.7,
            },
            GateOp::Ry {
                target: 3,
                angle: -2.1,
            },
            GateOp::X { target: 2 },
            GateOp::Cz { a: 1, b: 3 },
            GateOp::Cz { a: 2, b: 0 },
            GateOp::Cswap {
                control: 3,
                a: 0,
                b: 2,
            },
            GateOp::Cswap {
                control: 0,
                a: 2,
                b: 1,
            },
        ];
        for g in &gates {
            let sv = random_state(4, &mut rng);
            let mat = dense_matrix(4, g);
            let mut out = sv.clone();
            out.apply(g).unwrap();
            for (row, amp) in mat.iter().zip(out.amplitudes()) {
                let expect: Complex64 = row.iter().zip(sv.amplitudes()).map(|(m, a)| m * a).sum();
                assert!((expect - amp).norm() < 1e-12, "{g:?}");
            }
        }
    }

    #[test]
    fn basis_init() {
        let sv = Statevector::init_basis(3, 0).unwrap();
        assert_eq!(sv.amplitudes()[0], c(1.0));
        assert!(sv.amplitudes()[1..].iter().all(|a| a.norm() == 0.0));
        assert_eq!(sv.norm_sqr(), 1.0);
        assert!(Statevector::init_basis(3, 8).is_err());
        assert!(Statevector::init_basis(MAX_QUBITS + 1, 0).is_err());
    }

    #[test]
    fn ry_pi_flips_and_inverts() {
        let mut sv = Statevector::init_basis(1, 0).unwrap();
        sv.apply(&GateOp::Ry {
            target: 0,
            angle: PI,
        })
        .unwrap();
        assert!((sv.amplitudes()[1] - c(1.0)).norm() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let start = random_state(3, &mut rng);
        let mut sv = start.clone();
        sv.apply(&GateOp::Ry {
            target: 1,
            angle: 1.234,
        })
        .unwrap();
        sv.apply(&GateOp::Ry {
            target: 1,
            angle: -1.234,
        })
        .unwrap();
        for (a, b) in sv.amplitudes().iter().zip(start.amplitudes()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn cswap_with_control_zero_is_identity() {
        let mut sv = Statevector::init_basis(3, 0b110).unwrap();
        sv.apply(&GateOp::Cswap {
            control: 0,
            a: 1,
            b: 2,
        })
        .unwrap();
        assert_eq!(sv.amplitudes()[0b110], c(1.0));
        let mut sv = Statevector::init_basis(3, 0b011).unwrap();
        sv.apply(&GateOp::Cswap {
            control: 0,
            a: 1,
            b: 2,
        })
        .unwrap();
        assert_eq!(sv.amplitudes()[0b101], c(1.0));
    }

    #[test]
    fn rejects_bad_indices() {
        let mut sv = Statevector::init_basis(3, 0).unwrap();
        assert!(matches!(
            sv.apply(&GateOp::Cswap {
                control: 0,
                a: 1,
                b: 1
            }),
            Err(Error::QubitCollision(1))
        ));
        assert!(sv.apply(&GateOp::Cz { a: 0, b: 3 }).is_err());
        assert!(sv.diag_expectation(&[0.0; 3]).is_err());
    }

    #[test]
    fn norm_survives_many_random_gates() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 6;
        let mut sv = random_state(n, &mut rng);
        for _ in 0..10_000 {
            let q: Vec<usize> = {
                let mut v: Vec<usize> = (0..n).collect();
                for i in 0..3 {
                    let j = rng.random_range(i..n);
                    v.swap(i, j);
                }
                v
            };
            let g = match rng.random_range(0..4) {
                0 => GateOp::Ry {
                    target: q[0],
                    angle: rng.random_range(-PI..PI),
                },
                1 => GateOp::X { target: q[0] },
                2 => GateOp::Cz { a: q[0], b: q[1] },
                _ => GateOp::Cswap {
                    control: q[0],
                    a: q[1],
                    b: q[2],
                },
            };
            sv.apply(&g).unwrap();
        }
        assert!((sv.norm_sqr() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn swap_block_edge_angles() {
        let enc = ReducedEncoding::new(5).unwrap();
        let aux = enc.data_qubits();
        let pi0 = enc.encode_tour(&enc.canonical_tour()).unwrap();
        let start = Statevector::init_basis(aux + 1, pi0.0).unwrap();

        let mut sv = start.clone();
        sv.register_swap_block(&enc, 1, 0.0, aux, BlockOrder::RotateThenSwap)
            .unwrap();
        assert_eq!(sv, start);

        let mut sv = start.clone();
        sv.register_swap_block(&enc, 1, PI / 2.0, aux, BlockOrder::RotateThenSwap)
            .unwrap();
        let swapped = enc.encode_tour(&enc.canonical_tour().swapped(1)).unwrap();
        let idx = swapped.0 as usize | (1 << aux);
        assert!((sv.amplitudes()[idx].norm_sqr() - 1.0).abs() < 1e-12);

        assert!(sv
            .register_swap_block(&enc, 3, 0.1, aux, BlockOrder::RotateThenSwap)
            .is_err());
    }

    #[test]
    fn quarter_turn_block_splits_evenly() {
        let enc = ReducedEncoding::new(5).unwrap();
        let aux = enc.data_qubits();
        let pi0 = enc.canonical_tour();
        let mut sv = Statevector::init_basis(aux + 1, enc.encode_tour(&pi0).unwrap().0).unwrap();
        sv.register_swap_block(&enc, 0, PI / 4.0, aux, BlockOrder::RotateThenSwap)
            .unwrap();
        let probs = sv.marginal_tour_probabilities(&enc).unwrap();
        let p = |t: &FeasibleTour| probs.iter().find(|(x, _)| x == t).unwrap().1;
        assert!((p(&pi0) - 0.5).abs() < 1e-12);
        assert!((p(&pi0.swapped(0)) - 0.5).abs() < 1e-12);
        let total: f64 = probs.iter().map(|(_, p)| p).sum();
        assert!(probs.iter().all(|(_, p)| *p >= 0.0));
        assert!(total <= 1.0 + 1e-10);
    }

    #[test]
    fn expectation_marginalizes_ancilla() {
        let mut sv = Statevector::init_basis(3, 0).unwrap();
        sv.apply(&GateOp::Ry {
            target: 2,
            angle: 1.0,
        })
        .unwrap();
        sv.apply(&GateOp::Ry {
            target: 0,
            angle: PI,
        })
        .unwrap();
        let diag = [5.0, 7.0, 11.0, 13.0];
        assert!((sv.diag_expectation(&diag).unwrap() - 7.0).abs() < 1e-12);
    }
}
