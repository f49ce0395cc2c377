//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion fails.

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;

use mbf_core::clock::Clock;
use mbf_core::dsp::BiquadCoeffs;
use mbf_core::mapping::{allocate_zone, map_feedback_variable, MappingConfig, Zone, ZoneLayout};
use mbf_core::motion::{cascade_magnitude, design_butterworth, FilterSpec, Foot, Lowpass};
use mbf_core::sequencer::{
    builtin_song, builtin_style, EventKind, MusicEvent, Schedule, Sequencer, Track, MAX_VOICES,
};
use mbf_core::session::{
    load_config, measure_loop_delay, read_log, save_config, write_log, LoopDelayOptions, LogWriter, Mode,
    Runtime, RuntimeOptions, SessionState, TiltAxis, VirtualSession,
};
use mbf_core::sim::{generate_profile, stream_run, MotionProfile, ProfileKind, StreamOptions};
use mbf_core::synth::offline::OfflineRenderer;
use mbf_core::synth::{AudioBlock, Strategy, StrategyControl, StrategyParams, Synth, SynthSettings, SAMPLE_RATE};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn ephemeral(mut s: SessionState) -> SessionState {
    for slot in &mut s.sensors.slots {
        slot.udp_port = 0;
    }
    s
}

fn loop_delay() -> Outcome {
    let t0 = Instant::now();
    let stats = measure_loop_delay(30, LoopDelayOptions::default()).map_err(|e| e.to_string())?;
    let elapsed = t0.elapsed().as_secs_f64();
    // sensor period + feedback period + block + parameter ramp
    let budget = 8.0 + 10.0 + 10.0 + 10.0;
    check(
        stats.mean_ms <= 100.0 && stats.mean_ms >= budget && stats.trials.len() == 30 && elapsed < 120.0,
        format!(
            "mean {:.1} ms, std {:.1} ms over {} trials ({} missed), floor {budget} ms, {elapsed:.0} s wall",
            stats.mean_ms,
            stats.std_ms,
            stats.trials.len(),
            stats.missed
        ),
    )
}

fn real_time_factor() -> Outcome {
    let mut s = SessionState::default();
    s.mode = Mode::TrunkControl;
    s.tempo = 60.0;
    s.music.style = "slow_rock".into();
    let mut p = MotionProfile::new(ProfileKind::StaticSway, 60.0);
    p.sway.amplitude_deg = 6.0;
    let run = generate_profile(&p).map_err(|e| e.to_string())?;
    let mut v = VirtualSession::new(s).map_err(|e| e.to_string())?;
    v.attach_run(&run, 0.0, 0.0, 1);
    let dir = tempfile::tempdir().unwrap();
    let mut log = LogWriter::create(&dir.path().join("rtf.csv")).map_err(|e| e.to_string())?;
    let seconds = 60.0;
    let t0 = Instant::now();
    let mut audible = 0;
    for _ in 0..(seconds * 100.0) as usize {
        let (out, block) = v.step(true);
        log.write(&out.row).map_err(|e| e.to_string())?;
        audible += usize::from(block.is_some_and(|b| !b.is_silent()));
    }
    log.flush().map_err(|e| e.to_string())?;
    let factor = seconds / t0.elapsed().as_secs_f64();
    check(
        factor >= 3.0 && audible > 5000,
        format!("{seconds} s rendered at {factor:.1}x real time"),
    )
}

/// Reference evaluator for the feedback-variable transform.
fn mapping_oracle(x: f64, c: &MappingConfig) -> f64 {
    let (dist, span) = if x > c.target_hi {
        (x - c.target_hi, c.bound_hi - c.target_hi)
    } else if x < c.target_lo {
        (c.target_lo - x, c.target_lo - c.bound_lo)
    } else {
        (0.0, 1.0)
    };
    let e = if dist >= span { 1.0 } else { dist / span };
    let mut m = if e == 0.0 { 0.0 } else { (c.gamma * e.ln()).exp() };
    if c.quant_levels > 0 {
        let q = c.quant_levels;
        let mut best = 0.0;
        for k in 0..=q {
            let level = f64::from(k) / f64::from(q);
            if (m - level).abs() <= (m - best).abs() {
                best = level;
            }
        }
        m = best;
    }
    let mut v = if c.directional {
        let centre = 0.5 * (c.target_lo + c.target_hi);
        let s = if x == centre { 0.0 } else { (x - centre).signum() };
        0.5 + 0.5 * s * m
    } else {
        m
    };
    if c.invert {
        v = 1.0 - v;
    }
    v
}

fn mapping() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst = 0.0f64;
    let n = 100_000;
    for i in 0..n {
        let t_lo = rng.gen_range(-50.0..50.0);
        let t_hi = t_lo + if rng.gen_bool(0.1) { 0.0 } else { rng.gen_range(0.0..20.0) };
        let b_lo = t_lo - rng.gen_range(0.01..40.0);
        let b_hi = t_hi + rng.gen_range(0.01..40.0);
        let c = MappingConfig {
            target_lo: t_lo,
            target_hi: t_hi,
            bound_lo: b_lo,
            bound_hi: b_hi,
            gamma: rng.gen_range(0.1..5.0),
            quant_levels: if rng.gen_bool(0.5) { 0 } else { rng.gen_range(1..12) },
            invert: rng.gen_bool(0.3),
            directional: rng.gen_bool(0.3),
        };
        let x = match i % 10 {
            0 => t_lo,
            1 => t_hi,
            2 => b_hi,
            _ => rng.gen_range(b_lo - 10.0..b_hi + 10.0),
        };
        let got = map_feedback_variable(x, &c).map_err(|e| format!("{c:?}: {e}"))?.value;
        let want = mapping_oracle(x, &c);
        let d = (got - want).abs();
        if d > 1e-9 {
            return Err(format!("x={x} {c:?}: got {got}, oracle {want}"));
        }
        worst = worst.max(d);
    }
    let c = MappingConfig::new((-2.0, 2.0), (-20.0, 20.0));
    let exact = [(0.0, 0.0), (2.0, 0.0), (-2.0, 0.0), (11.0, 0.5), (-11.0, 0.5), (20.0, 1.0), (35.0, 1.0), (-20.0, 1.0)];
    for (x, want) in exact {
        let got = map_feedback_variable(x, &c).unwrap().value;
        if got != want {
            return Err(format!("gamma=1 x={x}: got {got}, want exactly {want}"));
        }
    }
    let sq = map_feedback_variable(11.0, &c.with_gamma(2.0)).unwrap().value;
    check(
        (sq - 0.25).abs() < 1e-12,
        format!("{n} random cases agree (max diff {worst:.1e}); gamma=1 cases exact"),
    )
}

/// Reference zone classifier: rectangles by ML offset, rings by comparing
/// the radial distance with the ellipse radius in that direction.
fn zone_oracle(p: (f64, f64), l: &ZoneLayout) -> Zone {
    let dx = p.0 - l.center.0;
    let dy = p.1 - l.center.1;
    if dx > l.rect_ml_bound {
        return 5;
    }
    if -dx > l.rect_ml_bound {
        return 4;
    }
    let r = dx.hypot(dy);
    let th = dy.atan2(dx);
    for (i, &(a, b)) in l.radii.iter().enumerate() {
        let edge = a * b / ((b * th.cos()).powi(2) + (a * th.sin()).powi(2)).sqrt();
        if r <= edge {
            return i as Zone;
        }
    }
    3
}

fn zones() -> Outcome {
    let mut agree = 0;
    let mut total = 0;
    let mut seen = [0usize; 6];
    for l in ZoneLayout::presets() {
        let half_ml = 1.4 * l.rect_ml_bound;
        let half_ap = 1.4 * l.radii[2].1;
        for i in 0..100 {
            for j in 0..100 {
                let p = (
                    l.center.0 - half_ml + 2.0 * half_ml * (i as f64 + 0.5) / 100.0,
                    l.center.1 - half_ap + 2.0 * half_ap * (j as f64 + 0.5) / 100.0,
                );
                let z = allocate_zone(p, &l);
                seen[z as usize] += 1;
                total += 1;
                if z == zone_oracle(p, &l) {
                    agree += 1;
                }
            }
        }
    }
    check(
        agree == total && seen.iter().all(|&n| n > 0),
        format!("{agree}/{total} grid points agree across 5 layouts"),
    )
}

/// Reference lowpass design from the analog poles through the bilinear
/// transform, one section per conjugate pair, unity DC gain.
fn butterworth_oracle(fc: f64, fs: f64, order: usize) -> Vec<BiquadCoeffs> {
    let wc = 2.0 * fs * (std::f64::consts::PI * fc / fs).tan();
    let mut out = Vec::new();
    for k in 0..order {
        let angle = std::f64::consts::PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
        let s = Complex64::from_polar(wc, angle);
        if s.im <= 0.0 {
            continue;
        }
        let z = (2.0 * fs + s) / (2.0 * fs - s);
        let a1 = -2.0 * z.re;
        let a2 = z.norm_sqr();
        let g = (1.0 + a1 + a2) / 4.0;
        out.push(BiquadCoeffs {
            b0: g,
            b1: 2.0 * g,
            b2: g,
            a1,
            a2,
        });
    }
    out.sort_by(|x, y| x.a2.total_cmp(&y.a2));
    out
}

fn sine_gain_db(spec: &FilterSpec, f: f64) -> f64 {
    let mut lp = Lowpass::new(spec).unwrap();
    let n = (spec.rate * 60.0) as usize;
    let settle = n / 2;
    let mut peak = 0.0f64;
    for i in 0..n {
        let y = lp.process((2.0 * std::f64::consts::PI * f * i as f64 / spec.rate).sin());
        if i >= settle {
            peak = peak.max(y.abs());
        }
    }
    20.0 * peak.log10()
}

fn filter() -> Outcome {
    let mut lines = Vec::new();
    for (fc, fs) in [(8.0, 100.0), (5.0, 100.0), (10.0, 100.0), (2.0, 100.0), (50.0, 1000.0), (8.0, 125.0)] {
        let spec = FilterSpec::new(1, fc, fs);
        let sections = design_butterworth(&spec).map_err(|e| e.to_string())?;
        let at_fc = 20.0 * cascade_magnitude(&sections, fc, fs).log10();
        let dc = cascade_magnitude(&sections, 0.0, fs);
        let stop = 20.0 * cascade_magnitude(&sections, 4.0 * fc, fs).log10();
        let mut mine = sections.to_vec();
        mine.sort_by(|x, y| x.a2.total_cmp(&y.a2));
        let oracle = butterworth_oracle(fc, fs, 6);
        let coeff_err = mine
            .iter()
            .zip(&oracle)
            .flat_map(|(a, b)| {
                [a.b0 - b.b0, a.b1 - b.b1, a.b2 - b.b2, a.a1 - b.a1, a.a2 - b.a2]
            })
            .fold(0.0f64, |m, d| m.max(d.abs()));
        let measured = sine_gain_db(&spec, fc);
        let ok = (at_fc + 3.01).abs() <= 0.1
            && (dc - 1.0).abs() <= 1e-6
            && stop <= -48.0
            && oracle.len() == 3
            && coeff_err <= 1e-6
            && (measured + 3.01).abs() <= 0.1;
        if !ok {
            return Err(format!(
                "fc={fc} fs={fs}: {at_fc:.3} dB at cutoff (sine {measured:.3}), dc {dc}, {stop:.1} dB at 4fc, coeff err {coeff_err:.1e}"
            ));
        }
        if fc == 8.0 && fs == 100.0 {
            lines.push(format!(
                "8 Hz/100 Hz: {at_fc:.3} dB at cutoff, {stop:.1} dB two octaves up, coeff err {coeff_err:.1e}"
            ));
        }
    }
    Ok(format!("6 designs within tolerance; {}", lines.join("")))
}

fn event_stream(song: &str, style: &str, tempo: f64, jitter: Option<u64>) -> (Vec<(u64, MusicEvent)>, f64) {
    let schedule = Arc::new(Schedule::build(&builtin_song(song).unwrap(), &builtin_style(style).unwrap()).unwrap());
    let mut seq = Sequencer::new(schedule, tempo);
    seq.set_repeat(false);
    seq.play();
    let mut rng = ChaCha8Rng::seed_from_u64(jitter.unwrap_or(0));
    let mut out = Vec::new();
    let mut buf = Vec::new();
    let mut elapsed = 0.0;
    let mut k = 0u64;
    while !seq.is_finished() && elapsed < 600_000.0 {
        let dt = if k == 0 {
            0.0
        } else if jitter.is_some() {
            1.0 + rng.gen_range(-0.5..0.5)
        } else {
            1.0
        };
        elapsed += dt;
        buf.clear();
        seq.tick(dt, &mut buf);
        out.extend(buf.iter().map(|e| (k, *e)));
        k += 1;
    }
    (out, elapsed)
}

fn max_simultaneous(events: &[(u64, MusicEvent)]) -> usize {
    let mut active: HashMap<Track, i64> = HashMap::new();
    let mut worst = 0;
    for (_, e) in events {
        let n = active.entry(e.track).or_default();
        *n += if e.kind == EventKind::NoteOn { 1 } else { -1 };
        worst = worst.max(*n);
    }
    worst as usize
}

fn sequencer() -> Outcome {
    let (a, _) = event_stream("demo", "slow_rock", 60.0, None);
    let (b, _) = event_stream("demo", "slow_rock", 60.0, None);
    let (j, _) = event_stream("demo", "slow_rock", 60.0, Some(9));
    let ticks = |v: &[(u64, MusicEvent)]| v.iter().map(|(_, e)| *e).collect::<Vec<_>>();
    let identical = a == b && !a.is_empty();
    let jitter_same = ticks(&a) == ticks(&j);
    let (etude, span) = event_stream("etude", "pop", 120.0, None);
    let mut voices = max_simultaneous(&a).max(max_simultaneous(&etude));
    for style in ["pop", "slow_rock"] {
        let schedule = Arc::new(Schedule::build(&builtin_song("demo").unwrap(), &builtin_style(style).unwrap()).unwrap());
        let mut r = OfflineRenderer::new(schedule, 120.0, SynthSettings::default()).unwrap();
        while !r.is_finished() {
            r.render_block(&[]);
            for t in Track::ALL {
                voices = voices.max(r.synth.active_voices(t));
            }
        }
    }
    check(
        identical && jitter_same && (span - 8000.0).abs() <= 10.0 && voices <= MAX_VOICES,
        format!(
            "{} events identical across runs and under jitter; 4 bars at 120 BPM span {span:.0} ms; max {voices} voices",
            a.len()
        ),
    )
}

fn gait_session(cadence: f64, tempo: f64) -> Result<(Vec<(Foot, f64)>, Vec<mbf_core::sim::Footfall>, Vec<(f64, f64)>), String> {
    let mut s = SessionState::default();
    s.mode = Mode::GaitDuration;
    s.tempo = tempo;
    let mut p = MotionProfile::new(ProfileKind::Gait, 12.0);
    p.gait.cadence = cadence;
    let run = generate_profile(&p).map_err(|e| e.to_string())?;
    let mut v = VirtualSession::new(s).map_err(|e| e.to_string())?;
    v.attach_run(&run, 0.0, 0.0, 4);
    let mut steps = Vec::new();
    let mut params = Vec::new();
    for _ in 0..1250 {
        let (out, _) = v.step(false);
        if let Some(ev) = v.engine.movement().step_event {
            steps.push((ev.foot, ev.t));
        }
        params.push((out.row.t, out.row.param));
    }
    Ok((steps, run.truth.footfalls, params))
}

fn step_pipeline() -> Outcome {
    let (steps, truth, params) = gait_session(100.0, 100.0)?;
    let mut matched = 0;
    let mut worst = 0.0f64;
    for f in &truth {
        if let Some((_, t)) = steps
            .iter()
            .find(|(foot, t)| *foot == f.foot && (t - f.t).abs() <= 20.0)
        {
            matched += 1;
            worst = worst.max((t - f.t).abs());
        }
    }
    let second = truth.get(1).map_or(f64::INFINITY, |f| f.t + 20.0);
    let on_tempo = params.iter().filter(|(t, _)| *t > second).all(|(_, p)| *p == 0.0);
    let mut signs = Vec::new();
    for (cadence, want) in [(110.0, -1.0), (90.0, 1.0)] {
        let (_, truth, params) = gait_session(cadence, 100.0)?;
        let second = truth[1].t + 20.0;
        let ok = params
            .iter()
            .filter(|(t, _)| *t > second)
            .all(|(_, p)| p.signum() == want && *p != 0.0);
        signs.push(ok);
    }
    check(
        matched == 20 && truth.len() == 20 && steps.len() == 20 && on_tempo && signs.iter().all(|&b| b),
        format!(
            "{matched}/{} steps within 20 ms (worst {worst:.1} ms, {} detected); on-tempo error 0: {on_tempo}; +/-10% cadence signs correct: {:?}",
            truth.len(),
            steps.len(),
            signs
        ),
    )
}

fn render_session(standby: bool, blocks: usize) -> Result<Vec<AudioBlock>, String> {
    let mut s = SessionState::default();
    s.music.song = "etude".into();
    s.music.repeat = false;
    s.standby = standby;
    let mut p = MotionProfile::new(ProfileKind::StaticSway, blocks as f64 / 100.0 + 1.0);
    p.sway.amplitude_deg = 8.0;
    let run = generate_profile(&p).map_err(|e| e.to_string())?;
    let mut v = VirtualSession::new(s).map_err(|e| e.to_string())?;
    v.attach_run(&run, 0.0, 0.0, 2);
    Ok(v.run_for(blocks as f64 * 10.0, true).blocks)
}

fn standby() -> Outcome {
    let s = SessionState::default();
    let schedule = Arc::new(Schedule::build(&builtin_song("etude").unwrap(), &builtin_style(&s.music.style).unwrap()).unwrap());
    let mut r = OfflineRenderer::new(schedule, s.tempo, s.mixer.clone()).unwrap();
    let reference = r.render_song(&[], 50);
    let on = render_session(true, reference.len())?;
    let off = render_session(false, reference.len())?;
    let identical = on == reference;
    let differs = off != reference;
    check(
        identical && differs,
        format!(
            "{} blocks ({:.1} s) bit-identical with standby on: {identical}; feedback audible with standby off: {differs}",
            reference.len(),
            reference.len() as f64 / 100.0
        ),
    )
}

fn render_controls(controls: &[StrategyControl], music: bool, blocks: usize) -> Vec<[f32; 2]> {
    let s = SessionState::default();
    let mut frames = Vec::new();
    if music {
        let schedule = Arc::new(Schedule::build(&builtin_song("demo").unwrap(), &builtin_style("pop").unwrap()).unwrap());
        let mut r = OfflineRenderer::new(schedule, 90.0, s.mixer.clone()).unwrap();
        for _ in 0..blocks {
            frames.extend(r.render_block(controls).frames);
        }
    } else {
        let mut synth = Synth::new(s.mixer.clone(), 90.0).unwrap();
        for _ in 0..blocks {
            frames.extend(synth.render_block(&[], controls).frames);
        }
    }
    frames
}

fn band_power_db(x: &[f32], freq: f64) -> f64 {
    let n = 1 << 15;
    let seg = &x[x.len() - n..];
    let mut buf: Vec<rustfft::num_complex::Complex<f64>> = seg
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let w = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos();
            rustfft::num_complex::Complex::new(f64::from(v) * w, 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let bin = (freq * n as f64 / SAMPLE_RATE).round() as usize;
    let p: f64 = buf[bin - 3..=bin + 3].iter().map(|c| c.norm_sqr()).sum();
    10.0 * p.max(1e-30).log10()
}

fn rms_db(frames: &[[f32; 2]], ch: usize) -> f64 {
    let tail = &frames[frames.len() / 2..];
    let ms = tail.iter().map(|f| f64::from(f[ch]).powi(2)).sum::<f64>() / tail.len() as f64;
    10.0 * ms.max(1e-30).log10()
}

fn strategy_audibility() -> Outcome {
    let tone_hz = StrategyParams::default().tone_hz;
    let left = |f: &[[f32; 2]]| f.iter().map(|x| x[0]).collect::<Vec<_>>();
    let with = render_controls(&[StrategyControl::new(Strategy::DisturbanceTone, 1.0)], true, 150);
    let without = render_controls(&[], true, 150);
    let peak = band_power_db(&left(&with), tone_hz) - band_power_db(&left(&without), tone_hz);

    let siren = |fv: f64| {
        let p = StrategyParams {
            siren_level: Some(1.0),
            ..Default::default()
        };
        render_controls(&[StrategyControl::new(Strategy::AmbulanceSiren, fv).with_params(p)], false, 100)
    };
    let centre = siren(0.5);
    let balance = rms_db(&centre, 0) - rms_db(&centre, 1);
    let right = siren(1.0);
    let (l, r) = (rms_db(&right, 0), rms_db(&right, 1));
    check(
        peak >= 20.0 && balance.abs() <= 0.1 && l <= r - 20.0,
        format!(
            "tone {peak:.1} dB above music at {tone_hz} Hz; siren fv=0.5 L-R {balance:.3} dB; fv=1 L {l:.1} dB vs R {r:.1} dB"
        ),
    )
}

fn logging_and_persistence() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ten.csv");
    let clock = Clock::new();
    let rt = Runtime::start(
        ephemeral(SessionState::default()),
        RuntimeOptions {
            log_path: Some(path.clone()),
            clock: Some(clock),
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;
    clock.sleep_until(rt.start_ms() + 10_000.0);
    rt.stop();
    let rows = read_log(&path).map_err(|e| e.to_string())?;
    let spacing_ok = rows.windows(2).all(|w| (w[1].t - w[0].t - 10.0).abs() <= 1.0);

    let mut s = SessionState::default();
    s.mode = Mode::Reach;
    s.tempo = 84.0;
    s.modes.reach.mapping.gamma = 2.5;
    s.modes.sts.mapping.quant_levels = 4;
    s.zones.radii[1] = (3.5, 4.5);
    s.trajectory.tempo_divisor = 8;
    s.sensors.slots[0].gyro_bias = [0.1, -0.2, 0.3];
    s.mixer.strips[2].pan = -0.4;
    let cfg = dir.path().join("session.toml");
    save_config(&s, &cfg).map_err(|e| e.to_string())?;
    let round_trip = load_config(&cfg).map_err(|e| e.to_string())? == s;

    let mut st = SessionState::default();
    st.mode = Mode::Reach;
    let mut p = MotionProfile::new(ProfileKind::Reach, 12.0);
    p.reach.angle_deg = 25.0;
    p.reach.period_s = 4.0;
    p.reach.axis = TiltAxis::Ap;
    let mut v = VirtualSession::new(st.clone()).map_err(|e| e.to_string())?;
    v.attach_run(&generate_profile(&p).map_err(|e| e.to_string())?, 0.0, 0.0, 5);
    let original = v.run_for(12_000.0, false).rows;
    let logged = dir.path().join("reach.csv");
    write_log(&logged, &original).map_err(|e| e.to_string())?;
    let mut rp = MotionProfile::new(ProfileKind::Replay, 12.0);
    rp.replay.path = logged;
    let replay = generate_profile(&rp).map_err(|e| e.to_string())?;
    let mut v = VirtualSession::new(st).map_err(|e| e.to_string())?;
    v.attach_run(&replay, 0.0, 0.0, 5);
    let replayed = v.run_for(12_000.0, false).rows;
    let worst = original
        .iter()
        .zip(&replayed)
        .filter(|(a, _)| a.t >= 1000.0)
        .map(|(a, b)| (a.fv - b.fv).abs())
        .fold(0.0f64, f64::max);
    let active = original.iter().filter(|r| r.fv > 0.1).count();

    check(
        (998..=1002).contains(&rows.len()) && spacing_ok && round_trip && worst <= 0.01 && active > 100,
        format!(
            "{} rows in 10 s (spacing ok: {spacing_ok}); config round-trip exact: {round_trip}; replay fv max diff {worst:.4} after 1 s",
            rows.len()
        ),
    )
}

fn packet_robustness() -> Outcome {
    let mut p = MotionProfile::new(ProfileKind::StaticSway, 20.0);
    p.sway.amplitude_deg = 4.0;
    let run = generate_profile(&p).map_err(|e| e.to_string())?;
    let mut v = VirtualSession::new(SessionState::default()).map_err(|e| e.to_string())?;
    v.attach_run(&run, 0.0, 0.2, 11);
    let rows = v.run_for(20_000.0, false).rows;
    let first = rows.iter().position(|r| r.trunk_online).unwrap_or(rows.len());
    let virtual_frozen = rows[first..].iter().filter(|r| r.frozen).count();
    let virtual_gaps = rows.windows(2).filter(|w| w[1].t - w[0].t != 10.0).count();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("loss.csv");
    let clock = Clock::new();
    let rt = Runtime::start(
        ephemeral(SessionState::default()),
        RuntimeOptions {
            log_path: Some(path.clone()),
            clock: Some(clock),
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let mut short = MotionProfile::new(ProfileKind::StaticSway, 6.0);
    short.sway.amplitude_deg = 4.0;
    let srun = generate_profile(&short).map_err(|e| e.to_string())?;
    let sent = stream_run(
        &srun,
        rt.sensor_addrs()[0],
        23,
        StreamOptions {
            drop_fraction: 0.2,
            start_ms: Some(clock.now_ms() + 100.0),
            ..Default::default()
        },
        &clock,
        None,
    )
    .map_err(|e| e.to_string())?;
    let origin = rt.start_ms();
    rt.stop();
    let live = read_log(&path).map_err(|e| e.to_string())?;
    let start = sent.start_ms - origin;
    let window: Vec<_> = live
        .iter()
        .filter(|r| r.t >= start + 50.0 && r.t <= start + 5950.0)
        .collect();
    let live_frozen = window.iter().filter(|r| r.frozen || !r.trunk_online).count();
    let live_gaps = live.windows(2).filter(|w| (w[1].t - w[0].t - 10.0).abs() > 1e-9).count();
    let drop_rate = sent.dropped as f64 / (sent.sent + sent.dropped) as f64;
    check(
        virtual_frozen == 0 && virtual_gaps == 0 && rows.len() == 2000 && live_frozen == 0 && live_gaps == 0 && window.len() >= 580,
        format!(
            "loss {:.0}%: simulated 2000/2000 ticks, {virtual_frozen} frozen; loopback {} ticks in window, {live_frozen} frozen, {live_gaps} gaps",
            drop_rate * 100.0,
            window.len()
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("loop delay", loop_delay),
        ("real-time factor", real_time_factor),
        ("mapping oracle", mapping),
        ("zone oracle", zones),
        ("filter correctness", filter),
        ("sequencer determinism and timing", sequencer),
        ("step pipeline", step_pipeline),
        ("standby equivalence", standby),
        ("strategy audibility", strategy_audibility),
        ("logging and persistence", logging_and_persistence),
        ("packet robustness", packet_robustness),
    ];
    let mut failed = Vec::new();
    for (name, f) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(d) => println!("PASS {name}: {d}"),
            Err(d) => {
                println!("FAIL {name}: {d}");
                failed.push(name);
            }
        }
    }
    if !failed.is_empty() {
        eprintln!("failed: {failed:?}");
        std::process::exit(1);
    }
}
