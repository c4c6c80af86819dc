//! End-to-end properties across scenario, channel, trackers and harness.

use proptest::prelude::*;

use beamtrack::channel::{generate_trace, parse_trace, write_trace, ChannelConfig, ChannelSource};
use beamtrack::harness::{parse_config, run_sweep};
use beamtrack::neural::{actor_dims, checkpoint, Activation, Mlp};
use beamtrack::parallel::Exec;
use beamtrack::rng::{stream, stream_rng};
use beamtrack::scenario::{MobilityPhase, ScenarioConfig};
use beamtrack::trackers::{run_tracked_episode, TrackerKind, TrackerParams};

fn short_route(v0: f64, accel: f64) -> ScenarioConfig {
    ScenarioConfig {
        total_time: 2.0,
        initial_velocity: v0,
        initial_acceleration: accel,
        phases: vec![MobilityPhase::new(2.0, accel)],
        ..ScenarioConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    // Every slot is a packet, a pilot or a failure, for any route and interval.
    #[test]
    fn tracked_episodes_account_for_every_slot(
        v0 in 2.0..20.0f64,
        accel in -0.9..1.5f64,
        steps in 1usize..40,
        pf in any::<bool>(),
        seed in 0u64..1000,
    ) {
        let scenario = short_route(v0, accel);
        let params = TrackerParams {
            tracking_interval: steps as f64 * scenario.slot_duration,
            sigma_u2: 0.5,
            particles: 50,
            phi_threshold: None,
            exec: Exec::Sequential,
        };
        let kind = if pf { TrackerKind::Pf } else { TrackerKind::Ekf };
        let ep = run_tracked_episode(kind, &scenario, &ChannelConfig::default(), &ChannelSource::SyntheticLos, &params, seed)
            .unwrap();
        let l = ep.ledger;
        prop_assert_eq!(l.total_delay_slots, 400);
        prop_assert_eq!(l.total_delay_slots, l.successful_packets + l.tracking_slots + l.failed_slots);
        prop_assert!(l.tracking_slots >= 1);
        prop_assert!(ep.distance_rmse.is_finite());
    }

    #[test]
    fn generated_traces_reload_exactly(paths in 1usize..5, records in 2usize..40, seed in 0u64..1000) {
        let channel = ChannelConfig::default();
        let trace = generate_trace(&channel, &ScenarioConfig::default(), paths, 0.5, records, &mut stream_rng(seed, stream::TRACE));
        let mut bytes = Vec::new();
        write_trace(&mut bytes, &trace).unwrap();
        let back = parse_trace(std::str::from_utf8(&bytes).unwrap(), &trace.origin).unwrap();
        prop_assert_eq!(back.records, trace.records);
    }

    #[test]
    fn checkpoints_round_trip(hidden in 1usize..24, seed in 0u64..1000) {
        let net = Mlp::new(
            &actor_dims(4, 2, hidden),
            Activation::ScaledSigmoid { bounds: vec![(0.0, std::f64::consts::PI), (0.0, 1.0)] },
            &mut stream_rng(seed, stream::AGENT_INIT),
        );
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("actor.btnn");
        checkpoint::save(&path, &net).unwrap();
        prop_assert_eq!(checkpoint::load(&path).unwrap(), net);
    }
}

#[test]
fn sweep_rows_follow_config_and_conserve_slots() {
    let cfg = parse_config(
        "[experiment]\nmode = \"ekf\"\nseeds = [3, 4]\n\
         [scenario]\ntotal_time = 2.0\nphases = [[2.0, -1.0]]\n\
         [sweep]\ntracking_interval = [0.05, 0.2]\n",
        Vec::new(),
    )
    .unwrap();
    let mut streamed = 0;
    let rows = run_sweep(&cfg, 1, |_| {
        streamed += 1;
        Ok(())
    })
    .unwrap();
    assert_eq!(streamed, 4);
    let intervals: Vec<_> = rows.iter().map(|r| (r.tracking_interval, r.seed)).collect();
    assert_eq!(intervals, [(0.05, 3), (0.05, 4), (0.2, 3), (0.2, 4)]);
    for r in &rows {
        let l = r.ledger.as_ref().expect("ledger");
        assert_eq!(l.total_delay_slots, 400);
        assert_eq!(l.total_delay_slots, l.successful_packets + l.tracking_slots + l.failed_slots);
        assert!(r.avg_delay_ms.unwrap() >= 5.0);
    }
}
