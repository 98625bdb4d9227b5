//! Randomized invariants across modules.

use proptest::prelude::*;
use regswap::ansatz::{AnsatzParams, SubspaceAnsatz};
use regswap::dnc::SubsystemPartition;
use regswap::encoding::{BasisState, FeasibleTour, ReducedEncoding, StateClass};
use regswap::hamiltonian::{
    build_hamiltonian, default_penalty, eval_terms, DiagonalHamiltonian, PAULI_EPS,
};
use regswap::instances::{generate_instance, solve_exact, WeightRange};
use regswap::mitigation::{mitigate_ibu, ConfusionModel, Histogram, IbuConfig};
use regswap::simulator::BlockOrder;

fn permutation(m: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..m).collect::<Vec<_>>()).prop_shuffle()
}

proptest! {
    #[test]
    fn tours_round_trip_through_the_encoding(n in 3usize..9, seed in any::<u64>()) {
        let enc = ReducedEncoding::new(n).unwrap();
        let codes = {
            let mut rng = regswap::rng::rng_from_seed(seed);
            let mut c: Vec<usize> = (0..n - 1).collect();
            rand::seq::SliceRandom::shuffle(c.as_mut_slice(), &mut rng);
            c
        };
        let tour = FeasibleTour::new(codes.clone()).unwrap();
        let state = enc.encode_tour(&tour).unwrap();
        prop_assert_eq!(enc.decode_state(state), codes);
        prop_assert_eq!(enc.classify_state(state), StateClass::Feasible(tour.clone()));
        let full = tour.to_full_tour();
        prop_assert_eq!(FeasibleTour::from_full_tour(&full).unwrap(), tour);
    }

    #[test]
    fn every_state_has_exactly_one_class(n in 3usize..7, raw in any::<u64>()) {
        let enc = ReducedEncoding::new(n).unwrap();
        let s = BasisState(raw % enc.num_states() as u64);
        let codes = enc.decode_state(s);
        let invalid = codes.iter().any(|&c| c >= enc.registers());
        let mut sorted = codes.clone();
        sorted.sort_unstable();
        sorted.dedup();
        let repeated = sorted.len() < codes.len();
        let class = enc.classify_state(s);
        match class {
            StateClass::InvalidCode => prop_assert!(invalid),
            StateClass::RepeatedCity => prop_assert!(!invalid && repeated),
            StateClass::Feasible(_) => prop_assert!(!invalid && !repeated),
        }
        prop_assert_eq!(enc.is_feasible(s), !invalid && !repeated);
    }

    #[test]
    fn pauli_expansion_reproduces_energies(seed in 0u64..1000, raw in any::<u64>()) {
        let inst = generate_instance(5, seed, WeightRange::default()).unwrap();
        let enc = ReducedEncoding::new(5).unwrap();
        let lam = default_penalty(&inst);
        let h = build_hamiltonian(&inst, &enc, lam, lam).unwrap();
        let terms = h.expand_pauli(PAULI_EPS);
        let s = BasisState(raw % enc.num_states() as u64);
        prop_assert!((eval_terms(&terms, s) - h.energy(s)).abs() < 1e-9 * (1.0 + h.energy(s).abs()));
    }

    #[test]
    fn ansatz_energy_is_bounded_by_the_tour_spectrum(
        seed in 0u64..1000,
        layers in 1usize..5,
        theta in prop::collection::vec(-3.2f64..3.2, 12),
    ) {
        let inst = generate_instance(5, seed, WeightRange::default()).unwrap();
        let enc = ReducedEncoding::new(5).unwrap();
        let h = DiagonalHamiltonian::distance_only(&inst, &enc).unwrap();
        let ansatz = SubspaceAnsatz::new(&h, BlockOrder::default()).unwrap();
        let params = AnsatzParams::from_vec(&enc, layers, theta[..3 * layers].to_vec()).unwrap();
        let e = ansatz.energy(&params);
        let lo = solve_exact(&inst).unwrap().optimal_length;
        let hi = ansatz.tour_energies().iter().cloned().fold(f64::MIN, f64::max);
        prop_assert!(e >= lo - 1e-9 && e <= hi + 1e-9);
        let probs = ansatz.state(&params).tour_probabilities();
        prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn partition_bits_round_trip(perm in permutation(8), raw in 0u64..256) {
        let groups = vec![perm[..3].to_vec(), perm[3..4].to_vec(), perm[4..].to_vec()];
        let part = SubsystemPartition::new(groups, 8).unwrap();
        let rebuilt = (0..part.len()).fold(0, |acc, g| acc | part.global_bits(g, part.local_bits(g, raw)));
        prop_assert_eq!(rebuilt, raw);
    }

    #[test]
    fn confusion_and_ibu_stay_on_the_simplex(
        p01 in 0.0f64..0.3,
        p10 in 0.0f64..0.3,
        w in prop::collection::vec(0.01f64..1.0, 4),
    ) {
        let r = ConfusionModel::independent_flips(2, p01, p10).unwrap();
        let total: f64 = w.iter().sum();
        let p: Vec<f64> = w.iter().map(|x| x / total).collect();
        let m = r.apply(&p);
        prop_assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(m.iter().all(|&x| x >= 0.0));
        let out = mitigate_ibu(&r, &Histogram::from_probs(m).unwrap(), IbuConfig::default(), &Histogram::uniform(4)).unwrap();
        prop_assert!((out.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(out.probs().iter().all(|&x| x >= 0.0));
    }
}
