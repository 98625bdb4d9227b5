//! The permutation-preserving register-swap ansatz and its optimization.
//!
//! A layer applies one ancilla-controlled register-swap block to every
//! neighbouring register pair `(i, i+1)` in ascending `i`. Starting from
//! `|0>_aux ⊗ |π0>`, every block either leaves two registers alone or
//! exchanges them whole, so the data registers never leave the span of the
//! `M!` feasible permutations.
//!
//! Two evaluation paths exist:
//!
//! - [`Circuit`] lowers the ansatz to [`GateOp`]s for the dense
//!   [`Statevector`]; this is the reference path.
//! - [`SubspaceAnsatz`] tracks only the `2 * M!` amplitudes of
//!   `{ancilla} x {feasible tours}`, where a block is a 2x2 rotation on the
//!   ancilla followed by a permutation of tour indices. Optimization runs on
//!   this path.

use std::f64::consts::FRAC_PI_4;

use rand::distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::encoding::{FeasibleTour, ReducedEncoding};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::hamiltonian::DiagonalHamiltonian;
use crate::instances::{
    generate_instance_with, solve_exact, ExactSolution, TspInstance, WeightKind, WeightRange,
};
use crate::rng::{derive_seed, rng_from_seed};
use crate::simulator::{register_swap_gates, BlockOrder, GateOp, Statevector};

/// Probabilities this close to the maximum count as tied for the best tour.
pub const TIE_TOL: f64 = 1e-12;

/// Rotation angles, layer-major: `theta[l * (M-1) + i]` drives the block on
/// registers `(i, i+1)` in layer `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnsatzParams {
    layers: usize,
    per_layer: usize,
    theta: Vec<f64>,
}

impl AnsatzParams {
    pub fn zeros(enc: &ReducedEncoding, layers: usize) -> Self {
        let per_layer = enc.registers() - 1;
        Self {
            layers,
            per_layer,
            theta: vec![0.0; layers * per_layer],
        }
    }

    pub fn from_vec(enc: &ReducedEncoding, layers: usize, theta: Vec<f64>) -> Result<Self> {
        let per_layer = enc.registers() - 1;
        if theta.len() != layers * per_layer {
            return Err(Error::SizeMismatch {
                expected: layers * per_layer,
                got: theta.len(),
            });
        }
        Ok(Self {
            layers,
            per_layer,
            theta,
        })
    }

    /// Independent uniform draws from `[-half_width, half_width]`.
    pub fn random(enc: &ReducedEncoding, layers: usize, half_width: f64, seed: u64) -> Self {
        let mut p = Self::zeros(enc, layers);
        if half_width > 0.0 {
            let dist = Uniform::new_inclusive(-half_width, half_width).expect("finite width");
            let mut rng = rng_from_seed(seed);
            p.theta.iter_mut().for_each(|t| *t = dist.sample(&mut rng));
        }
        p
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn get(&self, layer: usize, pair: usize) -> f64 {
        self.theta[layer * self.per_layer + pair]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.theta
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    /// `(register pair, angle)` in application order.
    fn blocks(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.theta
            .iter()
            .enumerate()
            .map(move |(j, &t)| (j % self.per_layer.max(1), t))
    }
}

/// Gate and qubit budget of a built circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceCount {
    pub qubits: usize,
    pub params: usize,
    pub one_qubit_gates: usize,
    pub cswap_gates: usize,
}

impl ResourceCount {
    /// Closed forms for `M` registers and `L` layers.
    pub fn formula(m: usize, layers: usize) -> Self {
        let k = ReducedEncoding::new(m + 1)
            .map(|e| e.bits_per_register())
            .unwrap_or(1);
        let popcounts: usize = (0..m).map(|i| i.count_ones() as usize).sum();
        Self {
            qubits: m * k + 1,
            params: (m - 1) * layers,
            one_qubit_gates: (m - 1) * layers + popcounts,
            cswap_gates: k * (m - 1) * layers,
        }
    }
}

/// Reference counts for the one-hot feasible-subspace construction, kept
/// for comparison tables only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OneHotReferenceCount {
    pub qubits: usize,
    pub params: usize,
    pub one_qubit_gates: usize,
    pub two_qubit_gates: usize,
    pub cswap_gates: usize,
}

impl OneHotReferenceCount {
    pub fn formula(m: usize) -> Self {
        Self {
            qubits: m * m,
            params: m * (m - 1) / 2,
            one_qubit_gates: m * m - 1,
            two_qubit_gates: m * m - m + 2,
            // M^3/3 - M^2/2 + M/6 - 1 = (M-1)M(2M-1)/6 - 1
            cswap_gates: (m - 1) * m * (2 * m - 1) / 6 - 1,
        }
    }
}

/// A lowered ansatz: `X` flips preparing `|π0>` followed by the blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    pub num_qubits: usize,
    pub ops: Vec<GateOp>,
    pub params: usize,
}

impl Circuit {
    pub fn resource_count(&self) -> ResourceCount {
        ResourceCount {
            qubits: self.num_qubits,
            params: self.params,
            one_qubit_gates: self.ops.iter().filter(|g| g.is_single_qubit()).count(),
            cswap_gates: self
                .ops
                .iter()
                .filter(|g| matches!(g, GateOp::Cswap { .. }))
                .count(),
        }
    }

    /// Runs the circuit from `|0...0>`.
    pub fn simulate(&self) -> Result<Statevector> {
        let mut sv = Statevector::init_basis(self.num_qubits, 0)?;
        sv.apply_all(&self.ops)?;
        Ok(sv)
    }
}

pub fn build_layer_circuit(
    enc: &ReducedEncoding,
    params: &AnsatzParams,
    order: BlockOrder,
) -> Result<Circuit> {
    let aux = enc.data_qubits();
    let pi0 = enc.encode_tour(&enc.canonical_tour())?;
    let mut ops: Vec<GateOp> = (0..aux)
        .filter(|q| pi0.0 >> q & 1 == 1)
        .map(|target| GateOp::X { target })
        .collect();
    for (pair, theta) in params.blocks() {
        ops.extend(register_swap_gates(enc, pair, theta, aux, order)?);
    }
    Ok(Circuit {
        num_qubits: aux + 1,
        ops,
        params: params.len(),
    })
}

/// `<Psi(theta)| I_aux ⊗ H_dist |Psi(theta)>` on the dense simulator.
pub fn dense_energy(
    enc: &ReducedEncoding,
    distance_diag: &[f64],
    params: &AnsatzParams,
    order: BlockOrder,
) -> Result<f64> {
    build_layer_circuit(enc, params, order)?
        .simulate()?
        .diag_expectation(distance_diag)
}

/// Amplitudes over `{aux = 0, aux = 1} x feasible tours`. All gates involved
/// are real, so amplitudes stay real.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceState {
    pub aux0: Vec<f64>,
    pub aux1: Vec<f64>,
}

impl SubspaceState {
    pub fn tour_probabilities(&self) -> Vec<f64> {
        self.aux0
            .iter()
            .zip(&self.aux1)
            .map(|(a, b)| a * a + b * b)
            .collect()
    }
}

/// Feasible-subspace evaluator for one instance.
#[derive(Debug, Clone)]
pub struct SubspaceAnsatz {
    enc: ReducedEncoding,
    order: BlockOrder,
    tours: Vec<FeasibleTour>,
    /// Distance energy of each tour.
    energies: Vec<f64>,
    /// `swap[i][t]` is the index of tour `t` with positions `i, i+1` exchanged.
    swap: Vec<Vec<u32>>,
    start: usize,
}

impl SubspaceAnsatz {
    pub fn new(h: &DiagonalHamiltonian, order: BlockOrder) -> Result<Self> {
        let enc = *h.encoding();
        let tours = enc.feasible_tours()?;
        let energies = tours
            .iter()
            .map(|t| Ok(h.dist_term(enc.encode_tour(t)?)))
            .collect::<Result<Vec<_>>>()?;
        let index: std::collections::HashMap<&FeasibleTour, u32> = tours
            .iter()
            .enumerate()
            .map(|(i, t)| (t, i as u32))
            .collect();
        let swap = (0..enc.registers() - 1)
            .map(|i| tours.iter().map(|t| index[&t.swapped(i)]).collect())
            .collect();
        let start = index[&enc.canonical_tour()] as usize;
        Ok(Self {
            enc,
            order,
            tours,
            energies,
            swap,
            start,
        })
    }

    pub fn encoding(&self) -> &ReducedEncoding {
        &self.enc
    }

    pub fn tours(&self) -> &[FeasibleTour] {
        &self.tours
    }

    pub fn tour_energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn initial_state(&self) -> SubspaceState {
        let mut aux0 = vec![0.0; self.tours.len()];
        aux0[self.start] = 1.0;
        SubspaceState {
            aux0,
            aux1: vec![0.0; self.tours.len()],
        }
    }

    fn rotate(state: &mut SubspaceState, theta: f64) {
        // RY(2 theta) on the ancilla
        let (s, c) = theta.sin_cos();
        for (a0, a1) in state.aux0.iter_mut().zip(state.aux1.iter_mut()) {
            let (x, y) = (*a0, *a1);
            *a0 = c * x - s * y;
            *a1 = s * x + c * y;
        }
    }

    fn controlled_swap(&self, state: &mut SubspaceState, pair: usize, scratch: &mut Vec<f64>) {
        scratch.clear();
        scratch.extend(self.swap[pair].iter().map(|&j| state.aux1[j as usize]));
        std::mem::swap(&mut state.aux1, scratch);
    }

    fn apply_block(
        &self,
        state: &mut SubspaceState,
        pair: usize,
        theta: f64,
        scratch: &mut Vec<f64>,
    ) {
        match self.order {
            BlockOrder::RotateThenSwap => {
                Self::rotate(state, theta);
                self.controlled_swap(state, pair, scratch);
            }
            BlockOrder::SwapThenRotate => {
                self.controlled_swap(state, pair, scratch);
                Self::rotate(state, theta);
            }
        }
    }

    fn pair_of(&self, j: usize) -> usize {
        j % (self.enc.registers() - 1)
    }

    pub fn state(&self, params: &AnsatzParams) -> SubspaceState {
        let mut state = self.initial_state();
        let mut scratch = Vec::with_capacity(self.tours.len());
        for (pair, theta) in params.blocks() {
            self.apply_block(&mut state, pair, theta, &mut scratch);
        }
        state
    }

    pub fn expectation(&self, state: &SubspaceState) -> f64 {
        state
            .tour_probabilities()
            .iter()
            .zip(&self.energies)
            .map(|(p, e)| p * e)
            .sum()
    }

    pub fn energy(&self, params: &AnsatzParams) -> f64 {
        self.expectation(&self.state(params))
    }

    /// Parameter-shift gradient: each block's generator is `Y/2` on the
    /// `2 theta` rotation, so `dE/dtheta = E(theta + pi/4) - E(theta - pi/4)`.
    pub fn gradient(&self, params: &AnsatzParams) -> Vec<f64> {
        let theta = params.as_slice();
        let mut scratch = Vec::with_capacity(self.tours.len());
        // prefix[j] = state before block j
        let mut prefix = Vec::with_capacity(theta.len());
        let mut state = self.initial_state();
        for (j, &t) in theta.iter().enumerate() {
            prefix.push(state.clone());
            self.apply_block(&mut state, self.pair_of(j), t, &mut scratch);
        }
        let shifted = |j: usize, delta: f64, scratch: &mut Vec<f64>| {
            let mut s = prefix[j].clone();
            self.apply_block(&mut s, self.pair_of(j), theta[j] + delta, scratch);
            for (l, &t) in theta.iter().enumerate().skip(j + 1) {
                self.apply_block(&mut s, self.pair_of(l), t, scratch);
            }
            self.expectation(&s)
        };
        (0..theta.len())
            .map(|j| shifted(j, FRAC_PI_4, &mut scratch) - shifted(j, -FRAC_PI_4, &mut scratch))
            .collect()
    }

    /// Embeds a subspace state into the dense `M*k + 1` qubit register.
    pub fn to_dense(&self, state: &SubspaceState) -> Result<Statevector> {
        let aux = self.enc.data_qubits();
        let mut amps = vec![num_complex::Complex64::new(0.0, 0.0); 1 << (aux + 1)];
        for (t, tour) in self.tours.iter().enumerate() {
            let x = self.enc.encode_tour(tour)?.0 as usize;
            amps[x].re = state.aux0[t];
            amps[x | 1 << aux].re = state.aux1[t];
        }
        Statevector::from_amplitudes(amps)
    }
}

/// Adam hyperparameters and initialization for [`run_vqe`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VqeConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Initial angles are uniform in `[-init_half_width, init_half_width]`.
    pub init_half_width: f64,
    pub order: BlockOrder,
}

impl Default for VqeConfig {
    fn default() -> Self {
        Self {
            iterations: 200,
            learning_rate: 0.05,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            init_half_width: std::f64::consts::PI / 8.0,
            order: BlockOrder::RotateThenSwap,
        }
    }
}

#[derive(Debug, Clone)]
struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    cfg: VqeConfig,
}

impl Adam {
    fn new(len: usize, cfg: VqeConfig) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            cfg,
        }
    }

    fn step(&mut self, theta: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c = &self.cfg;
        let bc1 = 1.0 - c.beta1.powi(self.t);
        let bc2 = 1.0 - c.beta2.powi(self.t);
        for ((x, g), (m, v)) in theta
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = c.beta1 * *m + (1.0 - c.beta1) * g;
            *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
            *x -= c.learning_rate * (*m / bc1) / ((*v / bc2).sqrt() + c.epsilon);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VqeRunResult {
    /// Energy of the retained (lowest-energy) iterate.
    pub final_energy: f64,
    /// Energy before each update, followed by the energy after the last one.
    pub energy_trace: Vec<f64>,
    pub best_tour: FeasibleTour,
    pub best_probability: f64,
    /// Other tours within [`TIE_TOL`] of the best probability.
    pub tied: Vec<FeasibleTour>,
    pub success: bool,
    pub iterations_used: usize,
    pub params: AnsatzParams,
}

/// One Adam optimization from a seeded random start. The lowest-energy
/// iterate is kept and its most probable tour is judged against `exact`.
pub fn run_vqe(
    ansatz: &SubspaceAnsatz,
    layers: usize,
    seed: u64,
    cfg: &VqeConfig,
    exact: &ExactSolution,
) -> Result<VqeRunResult> {
    if layers == 0 {
        return Err(Error::InvalidArgument(
            "layer count must be at least 1".into(),
        ));
    }
    let enc = ansatz.encoding();
    let mut params = AnsatzParams::random(enc, layers, cfg.init_half_width, seed);
    let mut adam = Adam::new(params.len(), *cfg);
    let mut trace = Vec::with_capacity(cfg.iterations + 1);
    let mut best = (ansatz.energy(&params), params.clone());
    trace.push(best.0);
    for _ in 0..cfg.iterations {
        let grad = ansatz.gradient(&params);
        adam.step(params.as_mut_slice(), &grad);
        let e = ansatz.energy(&params);
        trace.push(e);
        if e < best.0 {
            best = (e, params.clone());
        }
    }
    let (final_energy, params) = best;
    let probs = ansatz.state(&params).tour_probabilities();
    let top = probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut leaders: Vec<&FeasibleTour> = ansatz
        .tours()
        .iter()
        .zip(&probs)
        .filter(|(_, &p)| top - p <= TIE_TOL)
        .map(|(t, _)| t)
        .collect();
    // prefer an optimal tour among tied leaders
    leaders.sort_by_key(|t| !exact.is_optimal(&t.to_full_tour()));
    let success = leaders.iter().any(|t| exact.is_optimal(&t.to_full_tour()));
    if leaders.len() > 1 {
        log::debug!("{} tours tied at probability {top}", leaders.len());
    }
    Ok(VqeRunResult {
        final_energy,
        energy_trace: trace,
        best_tour: leaders[0].clone(),
        best_probability: top,
        tied: leaders[1..].iter().map(|t| (*t).clone()).collect(),
        success,
        iterations_used: cfg.iterations,
        params,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCase {
    pub n: usize,
    pub depths: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub cases: Vec<SweepCase>,
    pub instances: usize,
    pub inits: usize,
    pub root_seed: u64,
    pub weight_range: WeightRange,
    pub weight_kind: WeightKind,
    pub vqe: VqeConfig,
}

/// Seed derivation tags.
const TAG_INSTANCE: u64 = 1;
const TAG_INIT: u64 = 2;

pub fn instance_seed(root: u64, n: usize, index: usize) -> u64 {
    derive_seed(root, &[TAG_INSTANCE, n as u64, index as u64])
}

pub fn init_seed(root: u64, n: usize, index: usize, layers: usize, init: usize) -> u64 {
    derive_seed(
        root,
        &[TAG_INIT, n as u64, index as u64, layers as u64, init as u64],
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub n: usize,
    pub layers: usize,
    pub instance_index: usize,
    pub instance_seed: u64,
    pub init_seed: u64,
    pub success: bool,
    pub final_energy: f64,
    pub iterations: usize,
}

/// Success statistics for one `(n, L)`: per-instance success rates over
/// initializations, then mean/min/max across instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAggregate {
    pub n: usize,
    pub layers: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub per_instance: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub runs: Vec<RunRecord>,
    pub aggregates: Vec<SweepAggregate>,
}

pub struct PreparedInstance {
    pub instance: TspInstance,
    pub exact: ExactSolution,
    pub ansatz: SubspaceAnsatz,
}

pub fn prepare_instance(inst: TspInstance, order: BlockOrder) -> Result<PreparedInstance> {
    let enc = ReducedEncoding::new(inst.n())?;
    let h = DiagonalHamiltonian::distance_only(&inst, &enc)?;
    Ok(PreparedInstance {
        exact: solve_exact(&inst)?,
        ansatz: SubspaceAnsatz::new(&h, order)?,
        instance: inst,
    })
}

pub fn depth_sweep(cfg: &SweepConfig, exec: Execution) -> Result<SweepResult> {
    if cfg.instances == 0 || cfg.inits == 0 {
        return Err(Error::InvalidArgument(
            "instances and inits must be positive".into(),
        ));
    }
    let mut prepared = Vec::new();
    for case in &cfg.cases {
        if case.depths.is_empty() || case.depths.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "n={} needs a non-empty list of positive depths",
                case.n
            )));
        }
        let insts: Vec<usize> = (0..cfg.instances).collect();
        let built = exec.map(&insts, |&idx| {
            let seed = instance_seed(cfg.root_seed, case.n, idx);
            generate_instance_with(case.n, seed, cfg.weight_range, cfg.weight_kind)
                .and_then(|inst| prepare_instance(inst, cfg.vqe.order))
        });
        prepared.push(built.into_iter().collect::<Result<Vec<_>>>()?);
    }

    let mut jobs = Vec::new();
    for (c, case) in cfg.cases.iter().enumerate() {
        for &layers in &case.depths {
            for idx in 0..cfg.instances {
                for init in 0..cfg.inits {
                    jobs.push((c, layers, idx, init));
                }
            }
        }
    }
    let runs = exec.map(&jobs, |&(c, layers, idx, init)| {
        let n = cfg.cases[c].n;
        let p = &prepared[c][idx];
        let seed = init_seed(cfg.root_seed, n, idx, layers, init);
        run_vqe(&p.ansatz, layers, seed, &cfg.vqe, &p.exact).map(|r| RunRecord {
            n,
            layers,
            instance_index: idx,
            instance_seed: p.instance.seed(),
            init_seed: seed,
            success: r.success,
            final_energy: r.final_energy,
            iterations: r.iterations_used,
        })
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let aggregates = aggregate(&runs, cfg.instances);
    Ok(SweepResult { runs, aggregates })
}

/// Groups consecutive runs by `(n, L)` in input order.
pub fn aggregate(runs: &[RunRecord], instances: usize) -> Vec<SweepAggregate> {
    let mut out: Vec<SweepAggregate> = Vec::new();
    let mut i = 0;
    while i < runs.len() {
        let (n, layers) = (runs[i].n, runs[i].layers);
        let mut j = i;
        let mut wins = vec![0usize; instances];
        let mut tries = vec![0usize; instances];
        while j < runs.len() && runs[j].n == n && runs[j].layers == layers {
            let idx = runs[j].instance_index;
            tries[idx] += 1;
            wins[idx] += usize::from(runs[j].success);
            j += 1;
        }
        let per_instance: Vec<f64> = wins
            .iter()
            .zip(&tries)
            .filter(|(_, &t)| t > 0)
            .map(|(&w, &t)| w as f64 / t as f64)
            .collect();
        let mean = per_instance.iter().sum::<f64>() / per_instance.len() as f64;
        out.push(SweepAggregate {
            n,
            layers,
            mean,
            min: per_instance.iter().copied().fold(f64::INFINITY, f64::min),
            max: per_instance
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max),
            per_instance,
        });
        i = j;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{generate_instance, WeightRange};
    use std::f64::consts::PI;

    fn setup(n: usize, seed: u64) -> (TspInstance, SubspaceAnsatz, Vec<f64>) {
        let inst = generate_instance(n, seed, WeightRange::default()).unwrap();
        let enc = ReducedEncoding::new(n).unwrap();
        let h = DiagonalHamiltonian::distance_only(&inst, &enc).unwrap();
        let diag = h.distance_diag().unwrap();
        (
            inst,
            SubspaceAnsatz::new(&h, BlockOrder::RotateThenSwap).unwrap(),
            diag,
        )
    }

    #[test]
    fn resource_counts_for_six_cities() {
        let enc = ReducedEncoding::new(6).unwrap();
        let c = build_layer_circuit(&enc, &AnsatzParams::zeros(&enc, 1), BlockOrder::default())
            .unwrap();
        let r = c.resource_count();
        assert_eq!(r.cswap_gates, 12);
        assert_eq!(
            r.one_qubit_gates - (0..5usize).map(|i| i.count_ones() as usize).sum::<usize>(),
            4
        );
        assert_eq!(r.qubits, 16);
        assert_eq!(AnsatzParams::zeros(&enc, 12).len(), 48);
        assert_eq!(r, ResourceCount::formula(5, 1));
    }

    #[test]
    fn one_hot_reference_counts() {
        let r = OneHotReferenceCount::formula(5);
        assert_eq!(
            (r.qubits, r.params, r.one_qubit_gates, r.two_qubit_gates),
            (25, 10, 24, 22)
        );
        // 125/3 - 25/2 + 5/6 - 1 = 29
        assert_eq!(r.cswap_gates, 29);
    }

    #[test]
    fn subspace_matches_dense_simulation() {
        for n in [4, 5, 6] {
            let (_, ans, diag) = setup(n, 5);
            let enc = *ans.encoding();
            for (layers, seed) in [(1, 1), (3, 2)] {
                for order in [BlockOrder::RotateThenSwap, BlockOrder::SwapThenRotate] {
                    let p = AnsatzParams::random(&enc, layers, PI, seed);
                    let ans = SubspaceAnsatz {
                        order,
                        ..ans.clone()
                    };
                    let sub = ans.to_dense(&ans.state(&p)).unwrap();
                    let dense = build_layer_circuit(&enc, &p, order)
                        .unwrap()
                        .simulate()
                        .unwrap();
                    for (a, b) in sub.amplitudes().iter().zip(dense.amplitudes()) {
                        assert!((a - b).norm() < 1e-12);
                    }
                    let e = dense_energy(&enc, &diag, &p, order).unwrap();
                    assert!((ans.energy(&p) - e).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn zero_angles_give_the_canonical_tour() {
        let (inst, ans, _) = setup(5, 8);
        let enc = *ans.encoding();
        let p = AnsatzParams::zeros(&enc, 3);
        let pi0 = enc.canonical_tour().to_full_tour();
        assert!((ans.energy(&p) - inst.tour_length(&pi0).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn energy_never_beats_the_optimum() {
        let (inst, ans, _) = setup(5, 12);
        let opt = solve_exact(&inst).unwrap().optimal_length;
        for seed in 0..50 {
            let p = AnsatzParams::random(ans.encoding(), 4, PI, seed);
            assert!(ans.energy(&p) >= opt - 1e-9);
        }
    }

    #[test]
    fn parameter_shift_matches_finite_differences() {
        for (n, layers, seed) in [(4, 2, 1), (5, 3, 2), (6, 2, 3)] {
            let (_, ans, _) = setup(n, seed);
            let p = AnsatzParams::random(ans.encoding(), layers, PI, seed + 10);
            let g = ans.gradient(&p);
            let h = 1e-5;
            for j in 0..p.len() {
                let mut up = p.clone();
                up.as_mut_slice()[j] += h;
                let mut dn = p.clone();
                dn.as_mut_slice()[j] -= h;
                let fd = (ans.energy(&up) - ans.energy(&dn)) / (2.0 * h);
                assert!((fd - g[j]).abs() < 1e-6, "n={n} j={j}: {fd} vs {}", g[j]);
            }
        }
    }

    #[test]
    fn flat_landscape_has_zero_gradient() {
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|u| (0..5).map(|v| if u == v { 0.0 } else { 4.0 }).collect())
            .collect();
        let inst = TspInstance::from_matrix(&rows).unwrap();
        let enc = ReducedEncoding::new(5).unwrap();
        let h = DiagonalHamiltonian::distance_only(&inst, &enc).unwrap();
        let ans = SubspaceAnsatz::new(&h, BlockOrder::default()).unwrap();
        let g = ans.gradient(&AnsatzParams::random(&enc, 2, PI, 4));
        assert!(g.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn symmetric_swap_is_stationary_at_zero() {
        // D[0][1] == D[0][2] and D[2][3] == D[1][3]: swapping registers 0 and 1
        // of the canonical tour 0-1-2-3 gives 0-2-1-3 with equal length
        let inst = TspInstance::from_matrix(&[
            vec![0.0, 10.0, 10.0, 17.0],
            vec![10.0, 0.0, 23.0, 29.0],
            vec![10.0, 23.0, 0.0, 29.0],
            vec![17.0, 29.0, 29.0, 0.0],
        ])
        .unwrap();
        let enc = ReducedEncoding::new(4).unwrap();
        let h = DiagonalHamiltonian::distance_only(&inst, &enc).unwrap();
        let ans = SubspaceAnsatz::new(&h, BlockOrder::default()).unwrap();
        let g = ans.gradient(&AnsatzParams::zeros(&enc, 2));
        assert!(g[0].abs() < 1e-12);
    }

    #[test]
    fn zero_iterations_keep_the_start() {
        let (inst, ans, _) = setup(5, 3);
        let exact = solve_exact(&inst).unwrap();
        let cfg = VqeConfig {
            iterations: 0,
            init_half_width: 0.0,
            ..VqeConfig::default()
        };
        let r = run_vqe(&ans, 2, 0, &cfg, &exact).unwrap();
        let pi0 = ans.encoding().canonical_tour();
        assert_eq!(r.best_tour, pi0);
        assert_eq!(
            r.final_energy,
            inst.tour_length(&pi0.to_full_tour()).unwrap()
        );
        assert_eq!(r.energy_trace.len(), 1);
    }

    #[test]
    fn optimization_does_not_increase_energy() {
        let (inst, ans, _) = setup(5, 4);
        let exact = solve_exact(&inst).unwrap();
        let cfg = VqeConfig {
            iterations: 40,
            ..VqeConfig::default()
        };
        for seed in 0..4 {
            let r = run_vqe(&ans, 4, seed, &cfg, &exact).unwrap();
            assert!(r.final_energy <= r.energy_trace[0]);
            assert_eq!(r.energy_trace.len(), 41);
            assert_eq!(r.success, exact.is_optimal(&r.best_tour.to_full_tour()));
        }
    }

    #[test]
    fn scaling_distances_scales_energy_not_tours() {
        let (inst, _, _) = setup(5, 6);
        let enc = ReducedEncoding::new(5).unwrap();
        let a = SubspaceAnsatz::new(
            &DiagonalHamiltonian::distance_only(&inst, &enc).unwrap(),
            BlockOrder::default(),
        )
        .unwrap();
        let scaled = inst.scaled(3.0);
        let b = SubspaceAnsatz::new(
            &DiagonalHamiltonian::distance_only(&scaled, &enc).unwrap(),
            BlockOrder::default(),
        )
        .unwrap();
        let p = AnsatzParams::random(&enc, 3, PI, 1);
        assert!((3.0 * a.energy(&p) - b.energy(&p)).abs() < 1e-9);
        assert_eq!(a.state(&p), b.state(&p));
    }

    #[test]
    fn single_run_sweep_is_bernoulli() {
        let cfg = SweepConfig {
            cases: vec![SweepCase {
                n: 5,
                depths: vec![2, 4],
            }],
            instances: 1,
            inits: 1,
            root_seed: 3,
            weight_range: WeightRange::default(),
            weight_kind: WeightKind::Continuous,
            vqe: VqeConfig {
                iterations: 10,
                ..VqeConfig::default()
            },
        };
        let res = depth_sweep(&cfg, Execution::Sequential).unwrap();
        assert_eq!(res.aggregates.len(), 2);
        for a in &res.aggregates {
            assert!(a.mean == 0.0 || a.mean == 1.0);
            assert_eq!(a.min, a.max);
        }
        let empty = SweepConfig {
            cases: vec![SweepCase {
                n: 5,
                depths: vec![],
            }],
            ..cfg
        };
        assert!(depth_sweep(&empty, Execution::Sequential).is_err());
    }
}
