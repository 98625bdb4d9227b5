//! End-to-end depth sweep on small instances.

use regswap::ansatz::{depth_sweep, SweepCase, SweepConfig, VqeConfig};
use regswap::instances::{WeightKind, WeightRange};
use regswap::Execution;

fn config(cases: Vec<SweepCase>, instances: usize, inits: usize) -> SweepConfig {
    SweepConfig {
        cases,
        instances,
        inits,
        root_seed: 7,
        weight_range: WeightRange::default(),
        weight_kind: WeightKind::default(),
        vqe: VqeConfig::default(),
    }
}

#[test]
fn four_city_sweep_always_finds_the_optimum() {
    let cfg = config(
        vec![SweepCase {
            n: 4,
            depths: vec![3],
        }],
        1,
        20,
    );
    let out = depth_sweep(&cfg, Execution::Parallel).unwrap();
    assert_eq!(out.runs.len(), 20);
    assert_eq!(out.aggregates.len(), 1);
    assert_eq!(out.aggregates[0].mean, 1.0);
}

#[test]
fn sweep_is_independent_of_the_scheduler() {
    let cfg = config(
        vec![SweepCase {
            n: 5,
            depths: vec![2, 4],
        }],
        2,
        3,
    );
    let par = depth_sweep(&cfg, Execution::Parallel).unwrap();
    let seq = depth_sweep(&cfg, Execution::Sequential).unwrap();
    assert_eq!(par, seq);
    let keys: Vec<(usize, usize)> = par.aggregates.iter().map(|a| (a.n, a.layers)).collect();
    assert_eq!(keys, [(5, 2), (5, 4)]);
    assert!(par
        .aggregates
        .iter()
        .all(|a| a.min <= a.mean && a.mean <= a.max));
}

#[test]
fn empty_or_zero_depths_are_rejected() {
    for depths in [vec![], vec![3, 0]] {
        let cfg = config(vec![SweepCase { n: 4, depths }], 1, 1);
        assert!(depth_sweep(&cfg, Execution::Sequential).is_err());
    }
}
