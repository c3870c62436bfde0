use gsrc_core::channel::{sample_channel, ChannelDraw, ChannelParams, DeadLink, IdealLink, ScriptedLink};
use gsrc_core::config::ExperimentConfig;
use gsrc_core::dqn::{argmax, train, Agent, FeatureMap, QNetwork, TrainerConfig};
use gsrc_core::engine::{
    episode_rng, run_episode, run_pipeline, Episode, Generator, LinkModel, Pipeline, QueueSpec, Scenario, SchemeEnv,
    SchemeId, Transmission,
};
use gsrc_core::kinematics::{mse, MotionLog, Position, SimClock, TargetTrajectory, Velocity, VelocitySets};
use gsrc_core::repetition::{run_proactive, MotionContext, RepetitionParams};
use gsrc_core::tucf::CncRecord;
use gsrc_core::vaqom::{estimate_target, is_fresh, SemanticQueue};
use gsrc_core::{Error, SimRng};
use proptest::prelude::*;
use rand::SeedableRng;

fn grid() -> Vec<Velocity> {
    VelocitySets::planar_default().grid()
}

fn scenario(trajectory_seed: u64) -> Scenario {
    let mut cfg = ExperimentConfig::default();
    cfg.trajectory_seed = trajectory_seed;
    cfg.scenario().unwrap()
}

fn zero_agent(sc: &Scenario) -> Agent {
    let features = FeatureMap::new(100.0, &sc.clock, &sc.vel_sets, true);
    let actions = sc.action_space();
    let net = QNetwork::zeros(&[features.len(), 4, actions.len()]).unwrap();
    Agent::new(net, features, actions).unwrap()
}

fn walk_from(start: Position, steps: &[usize], clock: &SimClock) -> TargetTrajectory {
    let g = grid();
    let mut pts = vec![start];
    for &s in steps {
        let last = *pts.last().unwrap();
        pts.push(last.advanced(g[s % g.len()], clock.tti_s));
    }
    TargetTrajectory::new(pts, clock.tti_s).unwrap()
}

fn shifted(p: Position, d: (f64, f64, f64)) -> Position {
    Position::new(p.x + d.0, p.y + d.1, p.z + d.2)
}

fn arb_position() -> impl Strategy<Value = Position> {
    (-200.0..200.0f64, -200.0..200.0f64, 1.0..120.0f64).prop_map(|(x, y, z)| Position::new(x, y, z))
}

// ---- kinematics ----

fn random_log(origin: Position, cuts: &[(f64, usize)], horizon: f64) -> MotionLog {
    let g = grid();
    let mut times: Vec<f64> = cuts.iter().map(|&(f, _)| f * horizon).collect();
    times.sort_by(f64::total_cmp);
    times.push(horizon);
    let mut log = MotionLog::new(origin);
    for (t, &(_, v)) in times.iter().zip(cuts.iter().chain(std::iter::once(&(0.0, 0)))) {
        log.extend_to(g[v % g.len()], *t);
    }
    log
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mse_is_nonnegative_and_translation_invariant(
        steps in prop::collection::vec(0usize..121, 99),
        cuts in prop::collection::vec((0.0..1.0f64, 0usize..121), 0..30),
        d in (-50.0..50.0f64, -50.0..50.0f64, -10.0..10.0f64),
    ) {
        let clock = SimClock::default();
        let start = Position::new(80.0, 80.0, 20.0);
        let traj = walk_from(start, &steps, &clock);
        let log = random_log(start, &cuts, clock.horizon());
        let m = mse(&log, &traj, &clock).unwrap();
        prop_assert!(m >= 0.0);

        let traj2 = walk_from(shifted(start, d), &steps, &clock);
        let log2 = random_log(shifted(start, d), &cuts, clock.horizon());
        let m2 = mse(&log2, &traj2, &clock).unwrap();
        prop_assert!((m - m2).abs() <= 1e-9 * m.max(1.0), "{} vs {}", m, m2);
    }

    #[test]
    fn following_the_waypoints_gives_zero_mse(steps in prop::collection::vec(0usize..121, 99)) {
        let clock = SimClock::default();
        let g = grid();
        let traj = walk_from(Position::new(0.0, 0.0, 20.0), &steps, &clock);
        let mut log = MotionLog::new(traj.waypoint(0));
        for (i, &s) in steps.iter().enumerate() {
            log.extend_to(g[s], clock.boundary(i + 1));
        }
        prop_assert!(mse(&log, &traj, &clock).unwrap() < 1e-18);
    }

    #[test]
    fn position_is_piecewise_linear(cuts in prop::collection::vec((0.0..1.0f64, 0usize..121), 1..30), f in 0.0..1.0f64) {
        let horizon = SimClock::default().horizon();
        let log = random_log(Position::new(1.0, 2.0, 3.0), &cuts, horizon);
        for s in log.segments() {
            let t = s.t_start + f * (s.t_end - s.t_start);
            let d = log.position_at(t).unwrap() - log.position_at(s.t_start).unwrap();
            let dt = t - s.t_start;
            for (got, v) in [(d.dx, s.velocity.vx), (d.dy, s.velocity.vy), (d.dz, s.velocity.vz)] {
                let want = v * dt;
                prop_assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0) + 1e-12);
            }
        }
    }
}

// ---- channel ----

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn transmission_time_falls_with_snr(a in 3.6..1e6f64, r in 1.0001..10.0f64) {
        let p = ChannelParams::default();
        let slow = p.transmission_time(a).unwrap();
        let fast = p.transmission_time(a * r).unwrap();
        prop_assert!(fast < slow);
    }

    #[test]
    fn channel_draws_repeat_bitwise(uav in arb_position(), seed in any::<u64>()) {
        let p = ChannelParams::default();
        let bs = Position::new(0.0, 0.0, 0.0);
        let a = sample_channel(bs, uav, &p, &mut SimRng::seed_from_u64(seed)).unwrap();
        let b = sample_channel(bs, uav, &p, &mut SimRng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(a.snr_linear.to_bits(), b.snr_linear.to_bits());
        prop_assert_eq!(a, b);
    }
}

// ---- repetition ----

#[derive(Default)]
struct Still {
    now: f64,
    delivered: Vec<CncRecord>,
}

impl MotionContext for Still {
    fn advance_to(&mut self, t: f64) -> Result<(), Error> {
        assert!(t >= self.now, "time ran backwards");
        self.now = t;
        Ok(())
    }

    fn position(&self) -> Position {
        Position::new(10.0, 10.0, 20.0)
    }

    fn deliver(&mut self, cnc: CncRecord) {
        self.delivered.push(cnc);
    }
}

fn script(mask: &[bool], delays: &[f64]) -> ScriptedLink {
    ScriptedLink::new(
        mask.iter()
            .zip(delays)
            .map(|(&ok, &d)| if ok { ChannelDraw::delivered(d) } else { ChannelDraw::lost() }),
    )
}

#[test]
fn dead_channel_uses_every_copy() {
    let clock = SimClock::default();
    for k_max in 1..=8u32 {
        let params = RepetitionParams::new(k_max, 1e-4, clock.tti_s).unwrap();
        let cnc = CncRecord::new(3, Velocity::ZERO, &clock);
        let out = run_proactive(&cnc, &clock, &mut DeadLink, &mut Still::default(), &params, &mut SimRng::seed_from_u64(0))
            .unwrap();
        assert_eq!(out.attempts_made(), k_max as usize);
        assert_eq!(out.earliest_arrival, None);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn attempts_stay_within_bounds(k_max in 1u32..=8, delay in 0.0..5e-4f64, i in 1usize..99) {
        let clock = SimClock::default();
        let params = RepetitionParams::new(k_max, 1e-4, clock.tti_s).unwrap();
        let cnc = CncRecord::new(i, Velocity::ZERO, &clock);
        let mut ctx = Still::default();
        let out = run_proactive(&cnc, &clock, &mut IdealLink { tx_time_s: delay }, &mut ctx, &params, &mut SimRng::seed_from_u64(0)).unwrap();
        prop_assert!(out.attempts_made() >= 1 && out.attempts_made() <= k_max as usize);
        // copy k is only sent while no ACK is back
        let expected = (1..=k_max).filter(|&k| f64::from(k - 1) * params.t_rep_s < delay).count().max(1);
        prop_assert_eq!(out.attempts_made(), expected);
        prop_assert_eq!(ctx.delivered.len(), 1);
    }

    #[test]
    fn earliest_arrival_only_improves_with_more_decodes(
        mask in prop::collection::vec(any::<bool>(), 4),
        delays in prop::collection::vec(1e-6..4e-4f64, 4),
        flip in 0usize..4,
    ) {
        let clock = SimClock::default();
        let params = RepetitionParams::new(4, 5e-5, clock.tti_s).unwrap();
        let cnc = CncRecord::new(5, Velocity::ZERO, &clock);
        let rng = &mut SimRng::seed_from_u64(0);
        let base = run_proactive(&cnc, &clock, &mut script(&mask, &delays), &mut Still::default(), &params, rng).unwrap();
        let mut more = mask.clone();
        more[flip] = true;
        let better = run_proactive(&cnc, &clock, &mut script(&more, &delays), &mut Still::default(), &params, rng).unwrap();
        match (base.earliest_arrival, better.earliest_arrival) {
            (Some(a), Some(b)) => prop_assert!(b <= a),
            (None, _) => {}
            (Some(_), None) => prop_assert!(false, "decoding more copies lost the command"),
        }
    }
}

// ---- vaqom ----

/// Distinct TTI indices with grid payloads, all decoded before `now`.
fn arb_queue() -> impl Strategy<Value = (Vec<CncRecord>, f64, Position)> {
    let clock = SimClock::default();
    (
        prop::sample::subsequence((1usize..=30).collect::<Vec<_>>(), 1..=10),
        prop::collection::vec(0usize..121, 10),
        0.0..1.0f64,
        0.0..0.9f64,
        arb_position(),
    )
        .prop_map(move |(idx, pay, frac, arrive, current)| {
            let g = grid();
            let newest = *idx.iter().max().unwrap();
            // somewhere in TTI `newest`, after every arrival
            let now = clock.boundary(newest - 1) + frac * clock.tti_s;
            let recs = idx
                .iter()
                .zip(&pay)
                .map(|(&i, &p)| {
                    let r = CncRecord::new(i, g[p], &clock);
                    r.arrived_at(r.gen_time + arrive * (now - r.gen_time))
                })
                .collect();
            (recs, now, current)
        })
}

fn history() -> Vec<Position> {
    (0..=40).map(|k| Position::new(k as f64, -(k as f64), 20.0)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn reorder_scores_and_permutes((recs, now, current) in arb_queue()) {
        let clock = SimClock::default();
        let mut q = SemanticQueue::new(10);
        for r in &recs {
            prop_assert!(q.push(*r));
            prop_assert!(!q.push(*r), "duplicate enqueued");
        }
        q.reorder(now, current, &history(), &clock).unwrap();
        let mut before: Vec<usize> = recs.iter().map(|r| r.index).collect();
        let mut after: Vec<usize> = q.entries().iter().map(|e| e.cnc.index).collect();
        before.sort_unstable();
        after.sort_unstable();
        prop_assert_eq!(before, after);
        for e in q.entries() {
            prop_assert!(e.si > 0.0 && e.si <= 1.0);
            prop_assert!(e.voi <= 0.0);
            if is_fresh(e.aoi_s, &clock) {
                prop_assert_eq!(e.si, 1.0);
            }
        }
        for w in q.entries().windows(2) {
            prop_assert!(w[0].si >= w[1].si);
            let both_stale = !is_fresh(w[0].aoi_s, &clock) && !is_fresh(w[1].aoi_s, &clock);
            if both_stale && w[0].si != w[1].si {
                prop_assert!(w[0].voi > w[1].voi, "stale order must follow VoI");
            }
        }
    }

    #[test]
    fn eviction_drops_the_lowest_ranked((recs, now, current) in arb_queue(), cap in 1usize..10) {
        let clock = SimClock::default();
        let mut full = SemanticQueue::new(10);
        let mut small = SemanticQueue::new(cap);
        for r in &recs {
            full.push(*r);
            small.push(*r);
        }
        full.reorder(now, current, &history(), &clock).unwrap();
        small.reorder(now, current, &history(), &clock).unwrap();
        let keep = cap.min(recs.len());
        prop_assert_eq!(small.entries(), &full.entries()[..keep]);
    }

    #[test]
    fn target_estimate_ignores_all_but_the_freshest((recs, now, _) in arb_queue(), p in 0usize..121) {
        let clock = SimClock::default();
        let h = history();
        let g = estimate_target(&recs, &h, now, &clock).unwrap();
        let freshest = recs.iter().map(|r| r.index).max().unwrap();
        let perturbed: Vec<CncRecord> = recs
            .iter()
            .map(|r| if r.index == freshest { *r } else { CncRecord { payload: grid()[p], ..*r } })
            .collect();
        prop_assert_eq!(estimate_target(&perturbed, &h, now, &clock).unwrap(), g);
    }
}

// ---- dqn ----

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn argmax_ignores_a_common_offset(q in prop::collection::vec(-64i32..64, 1..121), c in -1000i32..1000) {
        let q: Vec<f64> = q.into_iter().map(|v| f64::from(v) / 8.0).collect();
        let shifted: Vec<f64> = q.iter().map(|v| v + f64::from(c)).collect();
        prop_assert_eq!(argmax(&q), argmax(&shifted));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn rewards_are_negative_distances(seed in any::<u64>(), actions in prop::collection::vec(0usize..121, 99)) {
        let sc = scenario(seed % 50);
        let g = grid();
        let mut ep = Episode::new(&sc, sc.pipeline(SchemeId::Gsrc), sc.make_link());
        let rng = &mut SimRng::seed_from_u64(seed);
        for &a in &actions {
            let report = ep.step(g[a], rng).unwrap();
            let here = *ep.history().last().unwrap();
            let miss = here.distance(sc.traj.waypoint(report.tti));
            prop_assert!(report.reward <= 0.0);
            prop_assert_eq!(report.reward, -miss);
        }
        prop_assert!(ep.is_done());
    }
}

#[test]
fn hovering_on_a_stationary_goal_earns_zero() {
    let mut cfg = ExperimentConfig::default();
    cfg.set("experiment.trajectory", "stationary").unwrap();
    let sc = cfg.scenario().unwrap().with_link(LinkModel::Ideal { tx_time_s: 1e-5 });
    let mut ep = Episode::new(&sc, sc.pipeline(SchemeId::DeepPro), sc.make_link());
    let rng = &mut SimRng::seed_from_u64(0);
    while !ep.is_done() {
        assert_eq!(ep.step(Velocity::ZERO, rng).unwrap().reward, 0.0);
    }
}

#[test]
fn training_is_bit_reproducible() {
    let sc = scenario(2024);
    let cfg = TrainerConfig {
        episodes: 6,
        warmup: 32,
        batch_size: 16,
        hidden: vec![16],
        ..TrainerConfig::default()
    };
    let run = || {
        let mut env = SchemeEnv::new(SchemeId::Gsrc, &sc, cfg.seed).unwrap();
        let features = FeatureMap::new(cfg.scene_scale_m, &sc.clock, &sc.vel_sets, cfg.goal_offset);
        let n = env.actions().len();
        train(&mut env, &cfg, features, n, &mut SimRng::seed_from_u64(5)).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.curve, b.curve);
    let bits = |n: &QNetwork| n.params().iter().map(|p| p.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.net), bits(&b.net));
}

// ---- engine ----

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn episodes_are_consistent(traj_seed in 0u64..1000, seed in any::<u64>(), e in 0usize..1000) {
        let sc = scenario(traj_seed);
        let agent = zero_agent(&sc);
        let allowed = grid();
        let n = sc.clock.n_tti;
        for scheme in SchemeId::ALL {
            let a = scheme.uses_agent().then_some(&agent);
            let r = run_episode(scheme, &sc, a, &mut episode_rng(seed, e)).unwrap();
            let direct = mse(&r.log, &sc.traj, &sc.clock).unwrap();
            prop_assert!((r.mse - direct).abs() <= 1e-9 * direct.max(1e-300));
            if scheme.uses_repetition() {
                prop_assert!(r.transmissions >= n && r.transmissions <= n * sc.repetition.k_max as usize);
            } else {
                prop_assert_eq!(r.transmissions, n);
            }
            for v in r.log.velocities() {
                prop_assert!(v.is_zero() || allowed.contains(&v), "{} off the grid", v);
            }
            // nothing moves before the first command lands
            let first_arrival = r
                .latencies
                .iter()
                .enumerate()
                .filter_map(|(i, l)| l.map(|d| sc.clock.boundary(i) + d))
                .fold(f64::INFINITY, f64::min);
            for s in r.log.segments() {
                prop_assert!(s.velocity.is_zero() || s.t_start >= first_arrival);
            }
            for &d in r.latencies.iter().flatten() {
                prop_assert!(d > 0.0 && d.is_finite());
            }
        }
    }

    #[test]
    fn instant_tucf_and_untrained_gsrc_fly_the_same_path(traj_seed in 0u64..1000) {
        let sc = scenario(traj_seed).with_link(LinkModel::Ideal { tx_time_s: 0.0 });
        let gsrc_nearest = Pipeline {
            generator: Generator::Nearest,
            transmission: Transmission::Proactive(sc.repetition),
            queue: QueueSpec::semantic(sc.q_max),
        };
        let tucf = run_episode(SchemeId::Tucf, &sc, None, &mut SimRng::seed_from_u64(0)).unwrap();
        let gsrc = run_pipeline(gsrc_nearest, &sc, sc.make_link(), None, &mut SimRng::seed_from_u64(0)).unwrap();
        prop_assert_eq!(tucf.log, gsrc.log);
    }
}
