// SPDX-License-Identifier: MIT OR Apache-2.0

use mvtv::eval::{add_noise, generate_piecewise, mse};
use mvtv::stream::{select_candidate, CandidateState, Direction, SelectionEntry, Step};
use mvtv::{
    run_stream, solve_exact, solve_known_z, tv1d_direct, CandidateSet, ExactOptions, SegmentInit,
    SigmaMode, Signal, StreamConfig, StreamSolver, TvError,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn noisy(m: usize, n: usize, snr: f64, seed: u64) -> Signal {
    add_noise(
        &generate_piecewise(m, n, seed).unwrap().x,
        snr,
        seed ^ 0xABCD,
    )
    .unwrap()
}

#[test]
fn univariate_stream_equals_direct_solver() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let y: Vec<f64> = (0..500).map(|_| rng.random_range(-5.0..5.0)).collect();
        let lambda = rng.random_range(0.1..10.0);
        let ys = Signal::from_univariate(&y).unwrap();
        let q = CandidateSet::single(lambda, 1).unwrap();
        let x = run_stream(&ys, &q, StreamConfig::default())
            .unwrap()
            .reconstruct()
            .unwrap();
        let direct = tv1d_direct(&y, lambda).unwrap();
        for (a, b) in x.as_slice().iter().zip(&direct) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}

#[test]
fn step_signal_is_recovered_exactly() {
    let mut y = vec![0.0; 30];
    y.extend(vec![5.0; 25]);
    let lambda = 0.5;
    let ys = Signal::from_univariate(&y).unwrap();
    let res = run_stream(
        &ys,
        &CandidateSet::single(lambda, 1).unwrap(),
        StreamConfig::default(),
    )
    .unwrap();
    assert_eq!(res.segments.len(), 2);
    assert_eq!(res.segments[0].end, 29);
    assert!((res.segments[0].level[0] - lambda / 30.0).abs() < 1e-12);
    assert!((res.segments[1].level[0] - (5.0 - lambda / 25.0)).abs() < 1e-12);
}

#[test]
fn bivariate_scenario_is_reasonable() {
    let y = noisy(2, 180, 4.0, 11);
    let q = CandidateSet::dyadic_bivariate(20.0, 7).unwrap();
    assert_eq!(q.len(), 127);
    let res = run_stream(&y, &q, StreamConfig::offline(&y)).unwrap();
    let approx = res.reconstruct().unwrap();
    let exact = solve_exact(&y, 20.0, ExactOptions::default()).unwrap().x;
    assert!(mse(&approx, &exact).unwrap().is_finite());
    assert!(res.segments.len() <= y.len());
}

#[test]
fn simultaneous_large_jump_is_located() {
    let mut rows = vec![vec![1.0, -2.0]; 40];
    rows.extend(vec![vec![9.0, 6.0]; 40]);
    let y = Signal::from_samples(&rows).unwrap();
    let lambda = 0.5;
    let q = CandidateSet::dyadic_bivariate(lambda, 4).unwrap();
    let res = run_stream(&y, &q, StreamConfig::offline(&y)).unwrap();
    assert_eq!(res.segments[0].end, 39);
    let exact = solve_exact(&y, lambda, ExactOptions::default()).unwrap().x;
    let jumps: Vec<usize> = (0..79)
        .filter(|&k| (exact.get(0, k + 1) - exact.get(0, k)).abs() > 1e-9)
        .collect();
    assert_eq!(jumps, vec![39]);
}

#[test]
fn segments_tile_and_lie_on_the_sphere() {
    for seed in 0..5 {
        let y = noisy(3, 300, 4.0, seed);
        let q = CandidateSet::random_directions(3.0, 3, 50, seed).unwrap();
        let res = run_stream(&y, &q, StreamConfig::default()).unwrap();
        let mut next = 0;
        for s in &res.segments {
            assert_eq!(s.start, next);
            assert!(s.start <= s.end);
            let norm = s.zeta.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 3.0).abs() < 1e-9);
            assert_eq!(q.get(s.q), s.zeta.as_slice());
            next = s.end + 1;
        }
        assert_eq!(next, 300);
        assert_eq!(res.samples_consumed, 300);
    }
}

#[test]
fn runs_are_deterministic() {
    let y = noisy(2, 400, 3.0, 4);
    let q = CandidateSet::random_directions(5.0, 2, 64, 9).unwrap();
    let a = run_stream(&y, &q, StreamConfig::default()).unwrap();
    let b = run_stream(&y, &q, StreamConfig::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn incremental_feeding_matches_batch() {
    let y = noisy(2, 250, 3.0, 8);
    let q = CandidateSet::dyadic_bivariate(4.0, 3).unwrap();
    let batch = run_stream(&y, &q, StreamConfig::default()).unwrap();
    let mut solver = StreamSolver::new(q, StreamConfig::default()).unwrap();
    let mut segments = Vec::new();
    for (k, sample) in y.samples().enumerate() {
        for s in solver.push(sample).unwrap() {
            // a segment is only emitted once data past its end has arrived
            assert!(s.end < k);
            segments.push(s);
        }
    }
    segments.extend(solver.finish().unwrap());
    assert_eq!(segments, batch.segments);
    assert!(matches!(solver.push(&[0.0, 0.0]), Err(TvError::State(_))));
}

#[test]
fn stream_errors() {
    let q = CandidateSet::single(1.0, 2).unwrap();
    assert_eq!(
        run_stream(&Signal::zeros(2, 0), &q, StreamConfig::default()),
        Err(TvError::Empty)
    );
    let mut solver = StreamSolver::new(q.clone(), StreamConfig::default()).unwrap();
    assert!(solver.push(&[1.0]).is_err());
    assert!(solver.push(&[1.0, f64::NAN]).is_err());
    assert_eq!(solver.finish(), Err(TvError::Empty));
    let bad_sigma = StreamConfig {
        sigma: SigmaMode::Offline(vec![1.0]),
        init: SegmentInit::Auto,
    };
    assert!(StreamSolver::new(q, bad_sigma).is_err());
}

#[test]
fn chained_and_independent_coincide_on_first_segment() {
    let y = noisy(2, 200, 3.0, 5);
    let q = CandidateSet::dyadic_bivariate(4.0, 4).unwrap();
    let a = run_stream(
        &y,
        &q,
        StreamConfig::default().with_init(SegmentInit::Independent),
    )
    .unwrap();
    let b = run_stream(
        &y,
        &q,
        StreamConfig::default().with_init(SegmentInit::Chained),
    )
    .unwrap();
    assert_eq!(a.segments[0], b.segments[0]);
}

#[test]
fn known_z_reduces_to_univariate() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let y: Vec<f64> = (0..200).map(|_| rng.random_range(-3.0..3.0)).collect();
    let ys = Signal::from_univariate(&y).unwrap();
    let z = Signal::from_univariate(&[1.5; 199]).unwrap();
    let x = solve_known_z(&ys, &z, 1.5).unwrap();
    assert_eq!(x.into_vec(), tv1d_direct(&y, 1.5).unwrap());
}

#[test]
fn known_z_rejects_invalid_z() {
    let y = Signal::zeros(2, 5);
    let mut z = Signal::from_samples(&vec![vec![0.6, 0.8]; 4]).unwrap();
    assert!(solve_known_z(&y, &z, 1.0).is_ok());
    z.set(0, 2, 0.7);
    assert!(solve_known_z(&y, &z, 1.0).is_err());
    z.set(0, 2, -0.6);
    assert!(solve_known_z(&y, &z, 1.0).is_err());
    assert!(solve_known_z(&y, &Signal::zeros(2, 5), 1.0).is_err());
}

/// `z_k = lambda |u_k| / ||u_k||` from the exact dual. At jumps this is
/// `lambda |dx| / ||dx||`; between jumps it gives a feasible interpolation.
fn oracle_z(u: &Signal, lambda: f64) -> Signal {
    let m = u.components();
    let mut z = Signal::zeros(m, u.len());
    for k in 0..u.len() {
        let norm = u.sample(k).iter().map(|v| v * v).sum::<f64>().sqrt();
        for i in 0..m {
            let v = if norm > 0.0 {
                lambda * u.get(i, k).abs() / norm
            } else {
                lambda / (m as f64).sqrt()
            };
            z.set(i, k, v);
        }
    }
    z
}

#[test]
fn known_z_from_oracle_reproduces_oracle() {
    for seed in 0..5 {
        let y = noisy(2, 150, 10.0, seed);
        let lambda = 2.0;
        let exact = solve_exact(&y, lambda, ExactOptions::default()).unwrap();
        let z = oracle_z(&exact.u, lambda);
        let x = solve_known_z(&y, &z, lambda).unwrap();
        let err = x.max_abs_diff(&exact.x).unwrap();
        assert!(err < 1e-5, "seed {seed}: {err}");
    }
}

#[test]
fn non_violating_component_follows_sign_rule() {
    let s = 1.0 / 2f64.sqrt();
    let mut st = CandidateState::new(0, &[0.0, 0.0], &[s, s], None).unwrap();
    // component 0 drifts slightly down, component 1 jumps up
    assert_eq!(st.advance(&[-0.1, 0.0]).unwrap(), Step::Continue);
    assert_eq!(st.advance(&[-0.1, 5.0]).unwrap(), Step::RuleOneViolated);
    assert!(st.u_hi()[1] > s);
    assert!(st.u_lo()[0] >= -s && st.u_hi()[0] <= s);
    assert!(st.u_lo()[0] + st.u_hi()[0] < 0.0);
    let f = st.finalize().unwrap();
    assert_eq!(f.directions, vec![Direction::Down, Direction::Up]);
    let common: Vec<usize> = st
        .rev_lo(0)
        .iter()
        .map(|r| r.index)
        .filter(|i| st.rev_hi(1).iter().any(|r| r.index == *i))
        .collect();
    assert_eq!(f.k_rupt, *common.last().unwrap());
}

#[test]
fn opposite_sign_violations_cut_at_segment_start() {
    let s = 1.0 / 2f64.sqrt();
    let k0 = 7;
    let mut st = CandidateState::new(k0, &[0.0, 0.0], &[s, s], None).unwrap();
    let mut step = Step::Continue;
    let mut n = 0;
    while step == Step::Continue {
        step = st.advance(&[-1.0, 1.0]).unwrap();
        n += 1;
        assert!(n < 20);
    }
    let f = st.finalize().unwrap();
    assert_eq!(f.directions, vec![Direction::Down, Direction::Up]);
    // component 0 only ever revises its upper bound, component 1 its lower one
    assert_eq!(st.rev_lo(0).len(), 1);
    assert_eq!(st.rev_hi(1).len(), 1);
    assert_eq!(f.k_rupt, k0);
}

#[test]
fn selection_is_invariant_to_joint_rescaling() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..200 {
        let entries: Vec<SelectionEntry> = (0..10)
            .map(|_| SelectionEntry {
                k_rupt: rng.random_range(0..20),
                gap: vec![rng.random_range(0.0..2.0), rng.random_range(0.0..2.0)],
            })
            .collect();
        let sigma = [rng.random_range(0.5..2.0), rng.random_range(0.5..2.0)];
        let c = 4.0;
        let scaled: Vec<SelectionEntry> = entries
            .iter()
            .map(|e| SelectionEntry {
                k_rupt: e.k_rupt,
                gap: vec![e.gap[0], c * e.gap[1]],
            })
            .collect();
        assert_eq!(
            select_candidate(&entries, &sigma),
            select_candidate(&scaled, &[sigma[0], c * sigma[1]])
        );
    }
}

#[test]
fn provisional_after_one_sample_is_the_sample() {
    let q = CandidateSet::random_directions(2.0, 3, 10, 1).unwrap();
    let mut solver = StreamSolver::new(q, StreamConfig::default()).unwrap();
    solver.push(&[1.0, -2.0, 0.5]).unwrap();
    let p = solver.provisional().unwrap();
    assert_eq!((p.start, p.k), (0, 0));
    for (a, b) in p.level.iter().zip([1.0, -2.0, 0.5]) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn provisional_converges_on_constant_stream() {
    let q = CandidateSet::dyadic_bivariate(1.0, 3).unwrap();
    let zeta_max = q.iter().flatten().cloned().fold(0.0, f64::max);
    let mut solver = StreamSolver::new(q, StreamConfig::default()).unwrap();
    let c = [3.0, -1.0];
    for k in 0..60usize {
        assert!(solver.push(&c).unwrap().is_empty());
        let p = solver.provisional().unwrap();
        for i in 0..2 {
            assert!((p.level[i] - c[i]).abs() <= zeta_max / (k + 1) as f64 + 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn advance_keeps_bounds_ordered_and_clamped(
        seed in any::<u64>(),
        m in 1usize..4,
        lambda in 0.2f64..4.0,
        chained in any::<bool>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dir: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..1.0)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        let zeta: Vec<f64> = dir.iter().map(|v| lambda * v / norm).collect();
        let carried: Option<Vec<f64>> = chained.then(|| zeta.iter().map(|z| -z).collect());
        let y0: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut st = CandidateState::new(0, &y0, &zeta, carried.as_deref()).unwrap();
        for _ in 0..100 {
            let y: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
            if st.advance(&y).unwrap() == Step::RuleOneViolated {
                break;
            }
            prop_assert!(st.bounds_ordered());
            for i in 0..m {
                prop_assert!(st.u_lo()[i] <= zeta[i] && st.u_hi()[i] >= -zeta[i]);
                prop_assert!(st.u_lo()[i] >= -zeta[i] && st.u_hi()[i] <= zeta[i]);
            }
        }
    }

    #[test]
    fn univariate_stream_passes_kkt(seed in any::<u64>(), n in 1usize..150, lambda in 0.05f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-4.0..4.0)).collect();
        let ys = Signal::from_univariate(&y).unwrap();
        let x = run_stream(&ys, &CandidateSet::single(lambda, 1).unwrap(), StreamConfig::default())
            .unwrap()
            .reconstruct()
            .unwrap();
        let cert = mvtv::DualCertificate::from_primal(&x, &ys).unwrap();
        let report = mvtv::verify_kkt(&x, &ys, lambda, &cert, mvtv::KktOptions::with_tol(1e-8)).unwrap();
        prop_assert!(report.pass);
    }
}
