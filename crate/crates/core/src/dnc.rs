//! Divide-and-conquer evaluation on product states.
//!
//! The data qubits are split into disjoint groups, each prepared by its own
//! small circuit. For a product state every Z-string factorizes, so
//!
//! ```text
//! E = sum_t c_t prod_g <psi_g| Z(submask_{t,g}) |psi_g>
//! ```
//!
//! and only group-local distributions are ever needed. Those distributions
//! come either from exact local amplitudes or from per-group shot histograms,
//! optionally passed through a readout confusion model and mitigated.

use std::f64::consts::FRAC_PI_2;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::encoding::{BasisState, FeasibleTour, ReducedEncoding};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::hamiltonian::{DiagonalHamiltonian, PauliZTerm, PAULI_EPS};
use crate::instances::{solve_exact, TspInstance};
use crate::mitigation::{
    calibrate, mitigate_ibu, mitigate_inversion, sample_counts, ConfusionModel, Histogram,
    IbuConfig,
};
use crate::rng::{derive_seed, rng_from_seed};
use crate::simulator::{GateOp, Statevector};

/// Largest group the local simulator accepts.
pub const LOCAL_QUBIT_CAP: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsystemPartition {
    groups: Vec<Vec<usize>>,
    data_qubits: usize,
    /// `owner[q] = (group, local index)`
    owner: Vec<(usize, usize)>,
}

impl SubsystemPartition {
    /// One group per register, qubits in register bit order.
    pub fn per_register(enc: &ReducedEncoding) -> Self {
        let groups = (0..enc.registers())
            .map(|i| {
                (0..enc.bits_per_register())
                    .map(|b| enc.qubit(i, b))
                    .collect()
            })
            .collect();
        Self::new(groups, enc.data_qubits()).expect("register groups are a partition")
    }

    pub fn new(groups: Vec<Vec<usize>>, data_qubits: usize) -> Result<Self> {
        let mut owner = vec![(usize::MAX, 0); data_qubits];
        for (g, group) in groups.iter().enumerate() {
            if group.is_empty() {
                return Err(Error::InvalidPartition(format!("group {g} is empty")));
            }
            if group.len() > LOCAL_QUBIT_CAP {
                return Err(Error::InvalidPartition(format!(
                    "group {g} has {} qubits (cap {LOCAL_QUBIT_CAP})",
                    group.len()
                )));
            }
            for (j, &q) in group.iter().enumerate() {
                if q >= data_qubits {
                    return Err(Error::InvalidPartition(format!("qubit {q} out of range")));
                }
                if owner[q].0 != usize::MAX {
                    return Err(Error::InvalidPartition(format!("qubit {q} in two groups")));
                }
                owner[q] = (g, j);
            }
        }
        if let Some(q) = owner.iter().position(|o| o.0 == usize::MAX) {
            return Err(Error::InvalidPartition(format!("qubit {q} is not covered")));
        }
        Ok(Self {
            groups,
            data_qubits,
            owner,
        })
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn data_qubits(&self) -> usize {
        self.data_qubits
    }

    /// Restriction of a global bit pattern to group `g`, in local bit order.
    pub fn local_bits(&self, g: usize, global: u64) -> u64 {
        self.groups[g]
            .iter()
            .enumerate()
            .fold(0, |acc, (j, &q)| acc | ((global >> q) & 1) << j)
    }

    /// Inverse of [`Self::local_bits`] for one group.
    pub fn global_bits(&self, g: usize, local: u64) -> u64 {
        self.groups[g]
            .iter()
            .enumerate()
            .fold(0, |acc, (j, &q)| acc | ((local >> j) & 1) << q)
    }

    /// Number of variational angles across all groups.
    pub fn num_params(&self) -> usize {
        self.groups
            .iter()
            .map(|g| LocalCircuit::new(g.len()).num_params())
            .sum()
    }
}

/// Hardware-efficient local circuit: an RY layer, a CZ chain, another RY
/// layer. On two qubits this is `RY(t1) ⊗ RY(t2)`, `CZ(0, 1)`,
/// `RY(t3) ⊗ RY(t4)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalCircuit {
    num_qubits: usize,
}

impl LocalCircuit {
    pub fn new(num_qubits: usize) -> Self {
        Self { num_qubits }
    }

    pub fn num_params(&self) -> usize {
        2 * self.num_qubits
    }

    pub fn gates(&self, params: &[f64]) -> Result<Vec<GateOp>> {
        let q = self.num_qubits;
        if params.len() != 2 * q {
            return Err(Error::SizeMismatch {
                expected: 2 * q,
                got: params.len(),
            });
        }
        let mut ops: Vec<GateOp> = (0..q)
            .map(|j| GateOp::Ry {
                target: j,
                angle: params[j],
            })
            .collect();
        ops.extend((0..q.saturating_sub(1)).map(|j| GateOp::Cz { a: j, b: j + 1 }));
        ops.extend((0..q).map(|j| GateOp::Ry {
            target: j,
            angle: params[q + j],
        }));
        Ok(ops)
    }

    pub fn state(&self, params: &[f64]) -> Result<Statevector> {
        let mut sv = Statevector::init_basis(self.num_qubits, 0)?;
        sv.apply_all(&self.gates(params)?)?;
        Ok(sv)
    }

    pub fn distribution(&self, params: &[f64]) -> Result<Vec<f64>> {
        Ok(self.state(params)?.probabilities())
    }
}

/// The two-qubit local state for angles `(t1, t2, t3, t4)`.
pub fn local_state(params: &[f64; 4]) -> Statevector {
    LocalCircuit::new(2)
        .state(params)
        .expect("four angles for two qubits")
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorizedTerm {
    pub coeff: f64,
    /// Local Z mask per group; 0 means identity on that group.
    pub submasks: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorizedObjective {
    terms: Vec<FactorizedTerm>,
    partition: SubsystemPartition,
    /// Distinct submasks per group.
    distinct: Vec<Vec<u64>>,
    /// `slots[t][g]` indexes `distinct[g]`.
    slots: Vec<Vec<usize>>,
}

/// Splits every term's mask across the partition's groups.
pub fn partition_terms(
    terms: &[PauliZTerm],
    part: &SubsystemPartition,
) -> Result<FactorizedObjective> {
    let covered = if part.data_qubits() >= 64 {
        u64::MAX
    } else {
        (1u64 << part.data_qubits()) - 1
    };
    let mut distinct: Vec<Vec<u64>> = vec![Vec::new(); part.len()];
    let mut slots = Vec::with_capacity(terms.len());
    let mut out = Vec::with_capacity(terms.len());
    for t in terms {
        if t.z_mask & !covered != 0 {
            return Err(Error::InvalidPartition(format!(
                "term mask {:#x} touches qubits outside the partition",
                t.z_mask
            )));
        }
        let submasks: Vec<u64> = (0..part.len())
            .map(|g| part.local_bits(g, t.z_mask))
            .collect();
        let slot = submasks
            .iter()
            .enumerate()
            .map(|(g, &m)| match distinct[g].iter().position(|&x| x == m) {
                Some(i) => i,
                None => {
                    distinct[g].push(m);
                    distinct[g].len() - 1
                }
            })
            .collect();
        slots.push(slot);
        out.push(FactorizedTerm {
            coeff: t.coeff,
            submasks,
        });
    }
    Ok(FactorizedObjective {
        terms: out,
        partition: part.clone(),
        distinct,
        slots,
    })
}

fn z_expectation(dist: &[f64], mask: u64) -> f64 {
    dist.iter()
        .enumerate()
        .map(|(x, p)| {
            if (x as u64 & mask).count_ones().is_multiple_of(2) {
                *p
            } else {
                -*p
            }
        })
        .sum()
}

impl FactorizedObjective {
    pub fn terms(&self) -> &[FactorizedTerm] {
        &self.terms
    }

    pub fn partition(&self) -> &SubsystemPartition {
        &self.partition
    }

    /// Global mask of term `t`, rebuilt from its submasks.
    pub fn recombine(&self, t: usize) -> u64 {
        self.terms[t]
            .submasks
            .iter()
            .enumerate()
            .fold(0, |acc, (g, &m)| acc | self.partition.global_bits(g, m))
    }

    /// Energy of the product of the given group distributions.
    pub fn energy_from_distributions(&self, dists: &[Vec<f64>]) -> Result<f64> {
        if dists.len() != self.partition.len() {
            return Err(Error::SizeMismatch {
                expected: self.partition.len(),
                got: dists.len(),
            });
        }
        let local: Vec<Vec<f64>> = self
            .distinct
            .iter()
            .zip(dists)
            .map(|(masks, d)| masks.iter().map(|&m| z_expectation(d, m)).collect())
            .collect();
        Ok(self
            .terms
            .iter()
            .zip(&self.slots)
            .map(|(t, slot)| {
                t.coeff
                    * slot
                        .iter()
                        .enumerate()
                        .map(|(g, &i)| local[g][i])
                        .product::<f64>()
            })
            .sum())
    }

    fn group_params<'a>(&self, params: &'a [f64]) -> Result<Vec<&'a [f64]>> {
        let need = self.partition.num_params();
        if params.len() != need {
            return Err(Error::SizeMismatch {
                expected: need,
                got: params.len(),
            });
        }
        let mut rest = params;
        Ok(self
            .partition
            .groups()
            .iter()
            .map(|g| {
                let (head, tail) = rest.split_at(2 * g.len());
                rest = tail;
                head
            })
            .collect())
    }

    /// Exact local distributions for concatenated per-group angles.
    pub fn local_distributions(&self, params: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.group_params(params)?
            .into_iter()
            .zip(self.partition.groups())
            .map(|(p, g)| LocalCircuit::new(g.len()).distribution(p))
            .collect()
    }

    /// Global product state, for cross-checks on small systems.
    pub fn product_state(&self, params: &[f64]) -> Result<Statevector> {
        let n = self.partition.data_qubits();
        let locals: Vec<Statevector> = self
            .group_params(params)?
            .into_iter()
            .zip(self.partition.groups())
            .map(|(p, g)| LocalCircuit::new(g.len()).state(p))
            .collect::<Result<_>>()?;
        let mut amps = vec![num_complex::Complex64::new(1.0, 0.0); 1 << n];
        for (x, amp) in amps.iter_mut().enumerate() {
            for (g, sv) in locals.iter().enumerate() {
                *amp *= sv.amplitudes()[self.partition.local_bits(g, x as u64) as usize];
            }
        }
        Statevector::from_amplitudes(amps)
    }

    /// Probability the product distribution assigns to the given basis states.
    pub fn target_probability(&self, dists: &[Vec<f64>], targets: &[BasisState]) -> f64 {
        targets
            .iter()
            .map(|s| {
                (0..self.partition.len())
                    .map(|g| dists[g][self.partition.local_bits(g, s.0) as usize])
                    .product::<f64>()
            })
            .sum()
    }
}

pub fn exact_factorized_energy(obj: &FactorizedObjective, params: &[f64]) -> Result<f64> {
    obj.energy_from_distributions(&obj.local_distributions(params)?)
}

/// Per-group readout channel plus the calibration used to undo it.
#[derive(Debug, Clone, PartialEq)]
pub struct Readout {
    pub truth: Vec<ConfusionModel>,
    pub calibration: Option<Vec<ConfusionModel>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mitigation {
    None,
    Ibu(IbuConfig),
    Inversion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub energy: f64,
    /// Per-group distributions after noise and mitigation.
    pub distributions: Vec<Vec<f64>>,
}

/// Shot-based estimate of the factorized energy. Each group is sampled
/// `shots` times from its own stream `derive_seed(seed, [g])`; one histogram
/// serves every term, since all observables are Z-diagonal.
pub fn sampled_factorized_energy(
    obj: &FactorizedObjective,
    params: &[f64],
    shots: u64,
    readout: Option<&Readout>,
    mitigation: Mitigation,
    seed: u64,
) -> Result<Measurement> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shots must be positive".into()));
    }
    let calibration = match mitigation {
        Mitigation::None => None,
        _ => Some(
            readout
                .and_then(|r| r.calibration.as_ref())
                .ok_or(Error::MissingCalibration)?,
        ),
    };
    let exact = obj.local_distributions(params)?;
    let mut distributions = Vec::with_capacity(exact.len());
    for (g, p) in exact.iter().enumerate() {
        let observed = match readout {
            Some(r) => r.truth[g].apply(p),
            None => p.clone(),
        };
        let mut rng = rng_from_seed(derive_seed(seed, &[g as u64]));
        let hist = Histogram::from_counts(&sample_counts(&observed, shots, &mut rng))?;
        let fixed = match (mitigation, calibration) {
            (Mitigation::Ibu(cfg), Some(cal)) => {
                mitigate_ibu(&cal[g], &hist, cfg, &Histogram::uniform(hist.len()))?
            }
            (Mitigation::Inversion, Some(cal)) => mitigate_inversion(&cal[g], &hist)?,
            _ => hist,
        };
        distributions.push(fixed.into_probs());
    }
    Ok(Measurement {
        energy: obj.energy_from_distributions(&distributions)?,
        distributions,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpsaConfig {
    pub a: f64,
    pub c: f64,
    /// Stability constant `A`.
    pub stability: f64,
    pub alpha: f64,
    pub gamma: f64,
}

impl Default for SpsaConfig {
    fn default() -> Self {
        Self {
            a: 0.2,
            c: 0.1,
            stability: 12.0,
            alpha: 0.602,
            gamma: 0.101,
        }
    }
}

impl SpsaConfig {
    pub fn step_gain(&self, k: usize) -> f64 {
        self.a / (k as f64 + 1.0 + self.stability).powf(self.alpha)
    }

    pub fn perturbation_gain(&self, k: usize) -> f64 {
        self.c / (k as f64 + 1.0).powf(self.gamma)
    }
}

/// Independent per-qubit readout flips.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    /// `P(read 1 | prepared 0)`
    pub p01: f64,
    /// `P(read 0 | prepared 1)`
    pub p10: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            p01: 0.03,
            p10: 0.07,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DncConfig {
    pub iterations: usize,
    pub shots: u64,
    pub spsa: SpsaConfig,
    pub noise: NoiseModel,
    pub calibration_shots: u64,
    pub ibu: IbuConfig,
    /// Half-width of the uniform jitter added to the starting angles.
    pub init_jitter: f64,
    pub seed: u64,
}

impl Default for DncConfig {
    fn default() -> Self {
        Self {
            iterations: 120,
            shots: 1024,
            spsa: SpsaConfig::default(),
            noise: NoiseModel::default(),
            calibration_shots: 1024,
            ibu: IbuConfig::default(),
            init_jitter: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Raw,
    Ibu,
    Inversion,
    Noiseless,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Raw,
        Variant::Ibu,
        Variant::Inversion,
        Variant::Noiseless,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Raw => "raw",
            Variant::Ibu => "ibu",
            Variant::Inversion => "inversion",
            Variant::Noiseless => "noiseless",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything a divide-and-conquer run needs about one instance.
#[derive(Debug, Clone)]
pub struct DncProblem {
    pub objective: FactorizedObjective,
    /// Encodings of every optimal tour.
    pub targets: Vec<BasisState>,
    pub optimal_length: f64,
    /// SPSA sees `energy / loss_scale`.
    pub loss_scale: f64,
}

impl DncProblem {
    pub fn new(
        inst: &TspInstance,
        enc: &ReducedEncoding,
        h: &DiagonalHamiltonian,
        part: &SubsystemPartition,
    ) -> Result<Self> {
        if !(h.lambda() > 0.0 && h.mu() > 0.0) {
            return Err(Error::NonPositivePenalty {
                lambda: h.lambda(),
                mu: h.mu(),
            });
        }
        let exact = solve_exact(inst)?;
        let targets = exact
            .optimal_tours
            .iter()
            .map(|t| enc.encode_tour(&FeasibleTour::from_full_tour(t)?))
            .collect::<Result<_>>()?;
        Ok(Self {
            objective: partition_terms(&h.expand_pauli(PAULI_EPS), part)?,
            targets,
            optimal_length: exact.optimal_length,
            loss_scale: inst.max_weight(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DncTrace {
    pub variant: Variant,
    /// Loss measured after each update.
    pub loss: Vec<f64>,
    pub target_probability: Vec<f64>,
    pub initial_params: Vec<f64>,
    pub final_params: Vec<f64>,
}

impl DncTrace {
    pub fn final_loss(&self) -> Option<f64> {
        self.loss.last().copied()
    }

    pub fn final_target_probability(&self) -> Option<f64> {
        self.target_probability.last().copied()
    }
}

const TAG_INIT: u64 = 1;
const TAG_PERTURB: u64 = 2;
const TAG_SHOTS: u64 = 3;
const TAG_CALIBRATION: u64 = 4;

/// Starting angles: every group in the uniform superposition
/// (`pi/2` on the first RY layer, 0 on the second) plus uniform jitter.
pub fn initial_params(part: &SubsystemPartition, jitter: f64, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(derive_seed(seed, &[TAG_INIT]));
    part.groups()
        .iter()
        .flat_map(|g| {
            let q = g.len();
            (0..2 * q).map(move |j| if j < q { FRAC_PI_2 } else { 0.0 })
        })
        .collect::<Vec<f64>>()
        .into_iter()
        .map(|base| {
            if jitter > 0.0 {
                base + rng.random_range(-jitter..=jitter)
            } else {
                base
            }
        })
        .collect()
}

/// Seed of the calibration shots for group `g`.
pub fn calibration_seed(seed: u64, g: usize) -> u64 {
    derive_seed(seed, &[TAG_CALIBRATION, g as u64])
}

/// Readout channel for `variant`; calibration draws its own shots.
pub fn readout_for(
    part: &SubsystemPartition,
    variant: Variant,
    cfg: &DncConfig,
) -> Result<Option<Readout>> {
    if variant == Variant::Noiseless {
        return Ok(None);
    }
    let truth: Vec<ConfusionModel> = part
        .groups()
        .iter()
        .map(|g| ConfusionModel::independent_flips(g.len(), cfg.noise.p01, cfg.noise.p10))
        .collect::<Result<_>>()?;
    let calibration = match variant {
        Variant::Raw => None,
        _ => Some(
            truth
                .iter()
                .enumerate()
                .map(|(g, t)| calibrate(t, cfg.calibration_shots, calibration_seed(cfg.seed, g)))
                .collect::<Result<_>>()?,
        ),
    };
    Ok(Some(Readout { truth, calibration }))
}

/// SPSA on the sampled factorized loss for one measurement pipeline.
///
/// Initial angles, perturbation directions and shot streams depend only on
/// `cfg.seed` and the iteration, so all variants see the same randomness.
pub fn run_dnc_variant(
    problem: &DncProblem,
    variant: Variant,
    cfg: &DncConfig,
) -> Result<DncTrace> {
    let part = problem.objective.partition();
    let readout = readout_for(part, variant, cfg)?;
    let mitigation = match variant {
        Variant::Ibu => Mitigation::Ibu(cfg.ibu),
        Variant::Inversion => Mitigation::Inversion,
        Variant::Raw | Variant::Noiseless => Mitigation::None,
    };
    let measure = |theta: &[f64], k: usize, slot: u64| {
        sampled_factorized_energy(
            &problem.objective,
            theta,
            cfg.shots,
            readout.as_ref(),
            mitigation,
            derive_seed(cfg.seed, &[TAG_SHOTS, k as u64, slot]),
        )
    };
    let initial = initial_params(part, cfg.init_jitter, cfg.seed);
    let mut theta = initial.clone();
    let mut loss = Vec::with_capacity(cfg.iterations);
    let mut target_probability = Vec::with_capacity(cfg.iterations);
    let mut plus = theta.clone();
    let mut minus = theta.clone();
    for k in 0..cfg.iterations {
        let (ak, ck) = (cfg.spsa.step_gain(k), cfg.spsa.perturbation_gain(k));
        let mut rng = rng_from_seed(derive_seed(cfg.seed, &[TAG_PERTURB, k as u64]));
        let delta: Vec<f64> = (0..theta.len())
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        for j in 0..theta.len() {
            plus[j] = theta[j] + ck * delta[j];
            minus[j] = theta[j] - ck * delta[j];
        }
        let y_plus = measure(&plus, k, 0)?.energy / problem.loss_scale;
        let y_minus = measure(&minus, k, 1)?.energy / problem.loss_scale;
        let slope = (y_plus - y_minus) / (2.0 * ck);
        for (t, d) in theta.iter_mut().zip(&delta) {
            *t -= ak * slope * d;
        }
        let now = measure(&theta, k, 2)?;
        loss.push(now.energy);
        target_probability.push(
            problem
                .objective
                .target_probability(&now.distributions, &problem.targets),
        );
    }
    Ok(DncTrace {
        variant,
        loss,
        target_probability,
        initial_params: initial,
        final_params: theta,
    })
}

/// Runs all four measurement pipelines from the same seed.
pub fn run_dnc_spsa(
    inst: &TspInstance,
    enc: &ReducedEncoding,
    h: &DiagonalHamiltonian,
    part: &SubsystemPartition,
    cfg: &DncConfig,
    exec: Execution,
) -> Result<Vec<DncTrace>> {
    let problem = DncProblem::new(inst, enc, h, part)?;
    exec.map(&Variant::ALL, |&v| run_dnc_variant(&problem, v, cfg))
        .into_iter()
        .collect()
}
