//! Sequential against rayon execution of the data-parallel loops: one particle
//! filter step, a full PF episode and a small multi-seed sweep.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use beamtrack::channel::{ChannelConfig, ChannelSource};
use beamtrack::harness::{expand_points, run_point, ExperimentConfig, Mode};
use beamtrack::parallel::{map_bounded, Exec};
use beamtrack::rng::stream_rng;
use beamtrack::scenario::{MobilityPhase, ScenarioConfig};
use beamtrack::trackers::{
    pf_step, run_tracked_episode, BeamMeasurement, FilterState, MeasCov, MeasVec, ParticleSet, TrackerKind,
    TrackerParams, TransitionModel,
};

const EXECS: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn pf_single_step(c: &mut Criterion) {
    let scenario = ScenarioConfig::default();
    let model = BeamMeasurement::new(&scenario, 16, 16, 0.5);
    let tm = TransitionModel::new(0.995, 0.5, scenario.slot_duration);
    let r = MeasCov::identity() * 0.005;
    let z = MeasVec::new(1.0, 0.0);
    let mut group = c.benchmark_group("pf_step");
    for particles in [1000, 10_000] {
        let set = ParticleSet::from_gaussian(&FilterState::initial(16.0, -4.0), particles, &mut stream_rng(1, 1));
        for (name, exec) in EXECS {
            group.bench_with_input(BenchmarkId::new(name, particles), &set, |b, set| {
                let mut rng = stream_rng(2, 2);
                b.iter(|| pf_step(black_box(set), &tm, &z, 1.0, &model, &r, &mut rng, exec).unwrap());
            });
        }
    }
    group.finish();
}

fn pf_episode(c: &mut Criterion) {
    let scenario =
        ScenarioConfig { total_time: 1.0, phases: vec![MobilityPhase::new(1.0, 0.0)], ..ScenarioConfig::stationary(8.0) };
    let channel = ChannelConfig::default();
    let mut group = c.benchmark_group("pf_episode");
    group.sample_size(10);
    for (name, exec) in EXECS {
        let params = TrackerParams { tracking_interval: 0.05, exec, ..TrackerParams::default() };
        group.bench_function(name, |b| {
            b.iter(|| {
                run_tracked_episode(TrackerKind::Pf, &scenario, &channel, &ChannelSource::SyntheticLos, &params, 3)
                    .unwrap()
            });
        });
    }
    group.finish();
}

fn ekf_sweep(c: &mut Criterion) {
    let mut cfg = ExperimentConfig::default();
    cfg.experiment.mode = Mode::Ekf;
    cfg.experiment.seeds = (0..8).collect();
    let points = expand_points(&cfg);
    let mut group = c.benchmark_group("ekf_sweep_8_seeds");
    group.sample_size(10);
    for (name, jobs) in [("sequential", 1), ("parallel", 0)] {
        group.bench_function(name, |b| {
            b.iter(|| map_bounded(jobs, &points, |p| run_point(&cfg, &ChannelSource::SyntheticLos, p, Exec::Sequential)));
        });
    }
    group.finish();
}

criterion_group!(benches, pf_single_step, pf_episode, ekf_sweep);
criterion_main!(benches);
