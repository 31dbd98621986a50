use proptest::prelude::*;

use uavloc::channel::{mean_path_loss_db, p_los, synth_range, ChannelParams, RangingNoiseModel};
use uavloc::geometry::{gen_uav_trajectory, true_ranges, TrajectoryParams, UavPath, Vec2, Vec3};
use uavloc::learning::layers::{maxpool2_backward, maxpool2_forward, Dims};
use uavloc::learning::{build_phi, DatasetSplit};
use uavloc::mobility::{gen_track, MobilityConfig, MobilityTrace};
use uavloc::multilateration::{gauss_newton_refine, AnchorSet, SolverConfig};
use uavloc::protocol::{run_exchange_with, CatcherFsm, CatcherState, LossyLink, UeFsm, UeState, MAX_MESSAGES};
use uavloc::pseudotri::{lemma1_two_solutions, snap_to_bins, solve_dp_oracle, solve_greedy, AnchorLine, PseudoTriInstance, StepCost};
use uavloc::rng;

fn circle_instance(center: Vec2, rho: f64, target: Vec2, n: usize) -> PseudoTriInstance {
    let path = gen_uav_trajectory(&TrajectoryParams::circle(center, 100.0, rho, n)).unwrap();
    let ranges = true_ranges(&path, &vec![target.with_z(0.0); n]).unwrap();
    PseudoTriInstance::new(path, ranges, 0.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mobility_is_seed_deterministic(seed in any::<u64>(), w in 1usize..300) {
        let cfg = MobilityConfig { num_waypoints: w, seed, ..MobilityConfig::default() };
        prop_assert_eq!(gen_track(&cfg, 50, 3.0).unwrap(), gen_track(&cfg, 50, 3.0).unwrap());
    }

    #[test]
    fn p_los_decreases_with_distance(h in 10.0f64..500.0, r in 1.0f64..2000.0, dr in 1.0f64..500.0) {
        let p = ChannelParams::default();
        prop_assert!(p_los(h, r + dr, &p).unwrap() < p_los(h, r, &p).unwrap());
    }

    #[test]
    fn mean_path_loss_grows_with_distance(h in 10.0f64..300.0, r in 1.0f64..2000.0, dr in 1.0f64..200.0) {
        let p = ChannelParams::default();
        prop_assert!(mean_path_loss_db(h, r + dr, &p).unwrap() > mean_path_loss_db(h, r, &p).unwrap());
    }

    #[test]
    fn planar_trajectory_translates(cx in -1e3f64..1e3, cy in -1e3f64..1e3, rho in 50.0f64..250.0, n in 3usize..60) {
        let a = gen_uav_trajectory(&TrajectoryParams::circle(Vec2::default(), 100.0, rho, n)).unwrap();
        let b = gen_uav_trajectory(&TrajectoryParams::circle(Vec2::new(cx, cy), 100.0, rho, n)).unwrap();
        for (p, q) in a.spots.iter().zip(&b.spots) {
            prop_assert!((p.x + cx - q.x).abs() < 1e-9 * (1.0 + q.x.abs()));
            prop_assert!((p.y + cy - q.y).abs() < 1e-9 * (1.0 + q.y.abs()));
            prop_assert!((q.xy().dist(Vec2::new(cx, cy)) - rho).abs() < 1e-9 * rho);
        }
    }

    #[test]
    fn gauss_newton_never_worse_than_start(seed in any::<u64>(), dx in -80.0f64..80.0, dy in -80.0f64..80.0) {
        use rand::Rng;
        let mut r = rng::from_seed(seed);
        let anchors: Vec<Vec3> = (0..6).map(|_| Vec3::new(r.random_range(-300.0..300.0), r.random_range(-300.0..300.0), r.random_range(50.0..150.0))).collect();
        let target = Vec3::new(r.random_range(-100.0..100.0), r.random_range(-100.0..100.0), 0.0);
        let ranges: Vec<f64> = anchors.iter().map(|a| a.dist(target) + r.random_range(-3.0..3.0)).collect();
        let set = AnchorSet::new(anchors, ranges).unwrap();
        let init = target + Vec3::new(dx, dy, 0.0);
        let out = gauss_newton_refine(&set, init, &SolverConfig::default()).unwrap();
        prop_assert!(out.residual <= set.residual(init) + 1e-9);
    }

    #[test]
    fn greedy_feasible_and_dp_no_worse(
        cx in -300.0f64..300.0, cy in -300.0f64..300.0, rho in 50.0f64..250.0,
        tx in -0.5f64..0.5, ty in -0.5f64..0.5,
    ) {
        let c = Vec2::new(cx, cy);
        let inst = circle_instance(c, rho, c + Vec2::new(tx * rho, ty * rho), 20);
        let greedy = solve_greedy(&inst, inst.spots.spots[0].xy());
        for (circle, p) in inst.circles().iter().zip(&greedy.positions) {
            prop_assert!(circle.residual(*p) < 1e-9);
        }
        let dp = solve_dp_oracle(&inst, 90).unwrap();
        prop_assert!(dp.path_cost <= snap_to_bins(&greedy, &inst, 90, StepCost::Distance).path_cost + 1e-9);
    }

    #[test]
    fn lemma1_pair_is_symmetric(r in -2.0f64..2.0, q in -50.0f64..50.0, xa in -100.0f64..-10.0, xb in 10.0f64..100.0,
                                tx in -100.0f64..100.0, ty in -100.0f64..100.0) {
        let line = AnchorLine { r, q };
        let (a, b) = (Vec3::new(xa, r * xa + q, 90.0), Vec3::new(xb, r * xb + q, 90.0));
        let t = Vec3::new(tx, ty, 0.0);
        let (p1, p2) = lemma1_two_solutions(a, b, a.dist(t), b.dist(t), line).unwrap();
        prop_assert!(line.reflect(p1).dist(p2) < 1e-6 * (1.0 + p1.x.abs() + p1.y.abs()));
    }

    #[test]
    fn mirrored_target_has_same_ranges(r in -2.0f64..2.0, q in -50.0f64..50.0, tx in -200.0f64..200.0, ty in -200.0f64..200.0) {
        let line = AnchorLine { r, q };
        let path = UavPath { spots: (0..8).map(|i| { let x = -70.0 + 20.0 * i as f64; Vec3::new(x, r * x + q, 100.0) }).collect() };
        let t = Vec2::new(tx, ty);
        let a = true_ranges(&path, &vec![t.with_z(0.0); 8]).unwrap();
        let b = true_ranges(&path, &vec![line.reflect(t).with_z(0.0); 8]).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-9 * x.max(1.0));
        }
    }

    #[test]
    fn phi_roundtrip(n in 1usize..12, l in 1usize..12, seed in any::<u64>()) {
        use rand::Rng;
        let mut r = rng::from_seed(seed);
        let ranges: Vec<Vec<f64>> = (0..n).map(|_| (0..l).map(|_| r.random_range(0.0..500.0)).collect()).collect();
        let path = UavPath { spots: (0..n).map(|_| Vec3::new(r.random(), r.random(), 100.0)).collect() };
        let phi = build_phi(&ranges, &path).unwrap();
        for (i, row) in ranges.iter().enumerate() {
            prop_assert_eq!(phi.gamma_row(i), row.as_slice());
            prop_assert_eq!(phi.spot_block[i], path.spots[i]);
        }
    }

    #[test]
    fn maxpool_routes_to_argmax(seed in any::<u64>(), c in 1usize..3, h in 2usize..7, w in 2usize..7) {
        use rand::Rng;
        let mut r = rng::from_seed(seed);
        let d = Dims { c, h, w };
        let x: Vec<f64> = (0..c * h * w).map(|_| r.random()).collect();
        let (y, arg, od) = maxpool2_forward(&x, d);
        prop_assert_eq!(y.len(), od.c * od.h * od.w);
        for (v, &i) in y.iter().zip(&arg) {
            prop_assert_eq!(*v, x[i]);
        }
        let dx = maxpool2_backward(&vec![1.0; y.len()], &arg, x.len());
        for (i, g) in dx.iter().enumerate() {
            prop_assert_eq!(*g != 0.0, arg.contains(&i));
        }
    }

    #[test]
    fn split_is_a_partition(n in 0usize..2000, seed in any::<u64>()) {
        let s = DatasetSplit::new(n, seed);
        let mut all: Vec<usize> = s.train.iter().chain(&s.test).chain(&s.validation).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        let near = |got: usize, frac: f64| (got as f64 - n as f64 * frac).abs() <= 1.0;
        prop_assert!(near(s.train.len(), 6.0 / 9.0) && near(s.test.len(), 2.0 / 9.0) && near(s.validation.len(), 1.0 / 9.0));
    }

    #[test]
    fn exchange_terminates_or_reports(seed in any::<u64>(), drop in prop_oneof![Just(0.0), 0.0f64..0.5], dup in 0.0f64..0.5, re in 0.0f64..1.0) {
        let ue = UeFsm::new("001010123456789", "g", 1).unwrap();
        let catcher = CatcherFsm::new(99, 1).unwrap();
        let mut link = LossyLink { rng: rng::from_seed(seed), p_drop: drop, p_dup: dup, p_reorder: re };
        let (out, violations) = run_exchange_with(&ue, &catcher, &mut link, 100);
        let steps = 1 + out.transcript.kinds().iter().filter(|k| **k != "SIB").count();
        prop_assert!(steps <= MAX_MESSAGES || !violations.is_empty());
        let done = out.catcher.state == CatcherState::Done;
        prop_assert_eq!(out.catcher.ue_rangeable, done);
        prop_assert!(out.ue.state != UeState::Rejected || done);
        if drop == 0.0 {
            prop_assert_eq!(done, out.ue.state == UeState::Rejected);
        }
    }
}

#[test]
fn synth_range_bias_matches_rubble() {
    let mut r = rng::from_seed(1);
    let clean = RangingNoiseModel::default();
    let n = 200_000;
    let mean = |m: &RangingNoiseModel, loss: f64, r: &mut rng::SimRng| (0..n).map(|_| synth_range(300.0, m, loss, r) - 300.0).sum::<f64>() / n as f64;
    assert!(mean(&clean, 40.0, &mut r).abs() < 0.1);
    let rubble = RangingNoiseModel { rubble_enabled: true, ..clean };
    assert!((mean(&rubble, 40.0, &mut r) - rubble.beta_rubble * 40.0).abs() < 0.1);
}

#[test]
fn more_waypoints_turn_more_often() {
    let turns_per_meter = |w: usize| {
        let mut turns = 0.0;
        let mut length = 0.0;
        for seed in 0..20 {
            let t = MobilityTrace::new(&MobilityConfig { num_waypoints: w, seed, ..MobilityConfig::default() }).unwrap();
            turns += t.route().len().saturating_sub(2) as f64;
            length += t.route_length();
        }
        turns / length
    };
    assert!(turns_per_meter(100) < turns_per_meter(500));
    assert!(turns_per_meter(500) < turns_per_meter(1900));
}
