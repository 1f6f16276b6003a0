//! Replica-pair runs on targets with known answers.

use mresgld::replica::discretization::{deviation_ladder, strictly_decreasing};
use mresgld::replica::{run_replica_pair, PairRngs, PairSchedule};
use mresgld::rng::{stream_rng, streams};
use mresgld::sampler::run_chain;
use mresgld::targets::{DoubleWell, GaussianMixture};
use mresgld::{ChainConfig, SwapConfig, SwapEstimator};

const ETAS: [f64; 3] = [1e-2, 2.5e-3, 6.25e-4];

fn mixture_pair(swap_interval: u64, steps: u64, seed: u64) -> mresgld::replica::PairTrajectory<f64> {
    let gm = GaussianMixture { center: 3.0, std: 0.5 };
    let eta = 0.01;
    let swap = SwapConfig::new(1.0, 10.0, 1.0 / eta).unwrap();
    let cl = ChainConfig::new(1.0, eta, 0.0).unwrap();
    let ch = ChainConfig::new(10.0, eta, 0.0).unwrap();
    run_replica_pair(
        vec![-3.0].into(),
        vec![-3.0].into(),
        &gm,
        &gm,
        &swap,
        SwapEstimator::MultiVariance,
        (&cl, &ch),
        &PairSchedule::new(steps, swap_interval),
        &mut PairRngs::from_seed(seed),
    )
    .unwrap()
}

fn right_fraction(xs: &[mresgld::sampler::Snapshot<f64>]) -> f64 {
    let tail = &xs[xs.len() / 5..];
    tail.iter().filter(|s| s.position[0] > 0.0).count() as f64 / tail.len() as f64
}

#[test]
fn exchange_balances_the_mixture_while_a_lone_chain_stays_put() {
    let tr = mixture_pair(1, 200_000, 5);
    let frac = right_fraction(&tr.low);
    assert!((frac - 0.5).abs() < 0.1, "right-mode occupancy {frac}");
    assert!(tr.final_state.swap_count > 100);

    let gm = GaussianMixture { center: 3.0, std: 0.5 };
    let cfg = ChainConfig::new(1.0, 0.01, 0.0).unwrap();
    let lone = run_chain(vec![-3.0].into(), &cfg, &gm, 200_000, 1, &mut stream_rng(5, streams::LOW_CHAIN)).unwrap();
    assert!(right_fraction(&lone.snapshots) < 0.02);
}

#[test]
fn attempts_follow_the_swap_interval() {
    let tr = mixture_pair(7, 700, 1);
    assert_eq!(tr.final_state.attempt_count, 100);
    assert_eq!(tr.swaps.len(), 100);
    assert!(tr.swaps.iter().all(|r| r.step % 7 == 0));
}

#[test]
fn interval_beyond_the_run_never_swaps_and_matches_plain_sgld() {
    let tr = mixture_pair(10_000, 2_000, 9);
    assert_eq!(tr.final_state.attempt_count, 0);
    assert!(tr.swaps.is_empty());
    let gm = GaussianMixture { center: 3.0, std: 0.5 };
    let cfg = ChainConfig::new(1.0, 0.01, 0.0).unwrap();
    let lone = run_chain(vec![-3.0].into(), &cfg, &gm, 2_000, 1, &mut stream_rng(9, streams::LOW_CHAIN)).unwrap();
    assert_eq!(tr.low, lone.snapshots);
}

#[test]
fn same_seed_gives_identical_trajectories() {
    let a = mixture_pair(3, 3_000, 42);
    let b = mixture_pair(3, 3_000, 42);
    assert_eq!(a.low, b.low);
    assert_eq!(a.high, b.high);
    assert_eq!(a.swaps, b.swaps);
    let c = mixture_pair(3, 3_000, 43);
    assert_ne!(a.low, c.low);
}

#[test]
fn double_well_deviation_shrinks_across_the_step_ladder() {
    let dw = DoubleWell::default();
    let swap = SwapConfig::new(0.15, 1.0, 1.0).unwrap().with_weight(0.5).unwrap();
    let runs = deviation_ladder(&dw, &swap, &ETAS, 1.0, &[-1.0], &[-1.0], 1000, 1).unwrap();
    let devs: Vec<f64> = runs.iter().map(|r| r.mean_deviation).collect();
    assert!(strictly_decreasing(&runs), "deviations {devs:?}");
    // each quartering of the step should cut the deviation noticeably
    assert!(devs[2] < 0.6 * devs[0], "deviations {devs:?}");
}
