use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use mbf_core::mapping::{allocate_zone, map_feedback_variable, MappingConfig, ZoneLayout};
use mbf_core::motion::{FilterSpec, SignalConditioner, TiltEstimator, DEFAULT_ALPHA};
use mbf_core::osc::{decode_osc_message, encode_osc_message, ImuSample};
use mbf_core::sequencer::{builtin_song, builtin_style, Schedule};
use mbf_core::session::{SessionState, VirtualSession};
use mbf_core::sim::{generate_profile, MotionProfile, ProfileKind};
use mbf_core::synth::offline::OfflineRenderer;
use mbf_core::synth::{Strategy, StrategyControl, SynthSettings};

fn mapping(c: &mut Criterion) {
    let cfg = MappingConfig::new((-2.0, 2.0), (-10.0, 10.0)).with_gamma(2.0);
    c.bench_function("map_feedback_variable", |b| {
        let mut x = -12.0;
        b.iter(|| {
            x = if x > 12.0 { -12.0 } else { x + 0.01 };
            black_box(map_feedback_variable(black_box(x), &cfg).unwrap())
        })
    });
    let layout = ZoneLayout::default();
    c.bench_function("allocate_zone", |b| {
        let mut t = 0.0f64;
        b.iter(|| {
            t += 0.001;
            black_box(allocate_zone((3.0 * t.cos(), 2.0 * (1.3 * t).sin()), &layout))
        })
    });
}

fn motion(c: &mut Criterion) {
    let mut cond = SignalConditioner::new(FilterSpec::new(3, 8.0, 100.0)).unwrap();
    c.bench_function("signal_conditioner", |b| {
        let mut t = 0.0f64;
        b.iter(|| {
            t += 0.01;
            black_box(cond.process(black_box(t.sin())))
        })
    });
    let mut tilt = TiltEstimator::new(DEFAULT_ALPHA);
    c.bench_function("tilt_update", |b| {
        b.iter(|| black_box(tilt.update(black_box([0.05, -0.02, 0.99]), [0.3, -0.1, 0.0], 0.01)))
    });
}

fn osc(c: &mut Criterion) {
    let bytes = encode_osc_message(&ImuSample::new(0.0, [0.01, 0.02, 0.98], [1.0, -2.0, 0.5], 0.9));
    c.bench_function("decode_osc_message", |b| {
        b.iter(|| black_box(decode_osc_message(black_box(&bytes), 0.0).unwrap()))
    });
}

fn synth(c: &mut Criterion) {
    let schedule = Schedule::build(&builtin_song("demo").unwrap(), &builtin_style("pop").unwrap()).unwrap();
    let start = OfflineRenderer::new(Arc::new(schedule), 100.0, SynthSettings::default()).unwrap();
    let controls = [StrategyControl::new(Strategy::ALL[0], 0.6)];
    c.bench_function("render_block", |b| {
        let mut r = start.clone();
        b.iter(|| {
            if r.is_finished() {
                r = start.clone();
            }
            black_box(r.render_block(&controls))
        })
    });
}

fn session(c: &mut Criterion) {
    let run = generate_profile(&MotionProfile::new(ProfileKind::StaticSway, 60.0)).unwrap();
    c.bench_function("session_step_with_audio", |b| {
        let mut v = VirtualSession::new(SessionState::default()).unwrap();
        v.attach_run(&run, 0.0, 0.0, 1);
        b.iter(|| black_box(v.step(true)))
    });
}

criterion_group!(benches, mapping, motion, osc, synth, session);
criterion_main!(benches);
