//! Deterministic synthetic motion and its replay over the sensor wire protocol.

use std::f64::consts::TAU;
use std::net::{SocketAddr, UdpSocket};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::Clock;
use crate::mapping::{allocate_zone, Zone, ZoneLayout};
use crate::motion::Foot;
use crate::osc::{encode_osc_message, BodyLocation, ImuSample, SENSOR_PERIOD_MS};
use crate::session::{read_log, TiltAxis};

pub const MAX_TILT_DEG: f64 = 60.0;
pub const MAX_CADENCE: f64 = 160.0;
/// Acceleration magnitude of a simulated footfall, g.
pub const FOOTFALL_G: f32 = 1.8;
pub const FOOTFALL_SAMPLES: usize = 2;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("socket error: {0}")]
    Socket(#[from] std::io::Error),
    #[error("cannot read profile: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    StaticSway,
    Reach,
    Sts,
    Gait,
    Replay,
    StepChange,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SwayParams {
    pub amplitude_deg: f64,
    pub freq_hz: f64,
    pub axis: TiltAxis,
    /// Constant (ml, ap) lean the sway is centred on.
    pub offset: (f64, f64),
}

impl Default for SwayParams {
    fn default() -> Self {
        Self {
            amplitude_deg: 5.0,
            freq_hz: 0.25,
            axis: TiltAxis::Ml,
            offset: (0.0, 0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReachParams {
    pub angle_deg: f64,
    /// One out-and-back reach per period.
    pub period_s: f64,
    pub axis: TiltAxis,
}

impl Default for ReachParams {
    fn default() -> Self {
        Self {
            angle_deg: 25.0,
            period_s: 4.0,
            axis: TiltAxis::Ap,
        }
    }
}

/// A brief forward/backward acceleration reversal on the trunk x axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JerkBurst {
    pub at_s: f64,
    pub duration_ms: f64,
    pub amplitude_g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StsParams {
    pub peak_deg: f64,
    /// One sit-to-stand every period.
    pub period_s: f64,
    /// Flex-and-extend time within each period.
    pub movement_s: f64,
    pub bursts: Vec<JerkBurst>,
}

impl Default for StsParams {
    fn default() -> Self {
        Self {
            peak_deg: 45.0,
            period_s: 5.0,
            movement_s: 3.0,
            bursts: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaitParams {
    /// Steps per minute, both feet together.
    pub cadence: f64,
    /// Uniform per-step timing jitter, +/- ms.
    pub jitter_ms: f64,
    pub first_step_s: f64,
}

impl Default for GaitParams {
    fn default() -> Self {
        Self {
            cadence: 100.0,
            jitter_ms: 0.0,
            first_step_s: 0.3,
        }
    }
}

/// Ramp to a fixed lean, hold, ramp back. Repeated at each onset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepChangeParams {
    pub angle_deg: f64,
    pub axis: TiltAxis,
    pub onsets_s: Vec<f64>,
    pub transition_ms: f64,
    pub hold_s: f64,
}

impl Default for StepChangeParams {
    fn default() -> Self {
        Self {
            angle_deg: 20.0,
            axis: TiltAxis::Ml,
            onsets_s: vec![1.0],
            transition_ms: 40.0,
            hold_s: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ReplayParams {
    /// Session log to replay.
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MotionProfile {
    pub kind: ProfileKind,
    /// s
    pub duration: f64,
    pub seed: u64,
    pub battery: f64,
    pub sway: SwayParams,
    pub reach: ReachParams,
    pub sts: StsParams,
    pub gait: GaitParams,
    pub step_change: StepChangeParams,
    pub replay: ReplayParams,
}

impl Default for MotionProfile {
    fn default() -> Self {
        Self {
            kind: ProfileKind::StaticSway,
            duration: 10.0,
            seed: 1,
            battery: 0.9,
            sway: SwayParams::default(),
            reach: ReachParams::default(),
            sts: StsParams::default(),
            gait: GaitParams::default(),
            step_change: StepChangeParams::default(),
            replay: ReplayParams::default(),
        }
    }
}

impl MotionProfile {
    pub fn new(kind: ProfileKind, duration: f64) -> Self {
        Self {
            kind,
            duration,
            ..Default::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        let p: MotionProfile = toml::from_str(text).map_err(|e| SimError::Parse(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Parse(format!("{}: {e}", path.display())))?;
        let mut p = Self::from_toml(&text)?;
        if p.kind == ProfileKind::Replay && p.replay.path.is_relative() {
            if let Some(dir) = path.parent() {
                p.replay.path = dir.join(&p.replay.path);
            }
        }
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidProfile(m));
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return bad(format!("duration {} must be > 0", self.duration));
        }
        if !(0.0..=1.0).contains(&self.battery) {
            return bad("battery must be within 0..1".into());
        }
        let tilt_ok = |deg: f64| deg.is_finite() && deg.abs() <= MAX_TILT_DEG;
        match self.kind {
            ProfileKind::StaticSway => {
                let s = &self.sway;
                let worst = s.amplitude_deg.abs() + s.offset.0.abs().max(s.offset.1.abs());
                if !tilt_ok(worst) {
                    return bad(format!("sway reaches {worst} deg, limit {MAX_TILT_DEG}"));
                }
                if !(s.freq_hz > 0.0 && s.freq_hz.is_finite()) {
                    return bad("sway.freq_hz must be > 0".into());
                }
            }
            ProfileKind::Reach => {
                if !tilt_ok(self.reach.angle_deg) {
                    return bad(format!("reach angle {} deg exceeds {MAX_TILT_DEG}", self.reach.angle_deg));
                }
                if !(self.reach.period_s > 0.0) {
                    return bad("reach.period_s must be > 0".into());
                }
            }
            ProfileKind::Sts => {
                let s = &self.sts;
                if !tilt_ok(s.peak_deg) {
                    return bad(format!("sts peak {} deg exceeds {MAX_TILT_DEG}", s.peak_deg));
                }
                if !(s.movement_s > 0.0 && s.period_s >= s.movement_s) {
                    return bad("need 0 < sts.movement_s <= sts.period_s".into());
                }
                if s.bursts.iter().any(|b| !(b.duration_ms > 0.0 && b.amplitude_g.abs() <= 2.0)) {
                    return bad("bursts need duration_ms > 0 and |amplitude_g| <= 2".into());
                }
            }
            ProfileKind::Gait => {
                let g = &self.gait;
                if !(g.cadence > 0.0 && g.cadence <= MAX_CADENCE) {
                    return bad(format!("cadence {} outside (0, {MAX_CADENCE}]", g.cadence));
                }
                let interval = 60_000.0 / g.cadence;
                if !(g.jitter_ms >= 0.0 && g.jitter_ms < 0.25 * interval) {
                    return bad("gait.jitter_ms must be below a quarter of the step interval".into());
                }
                if g.first_step_s < 0.0 {
                    return bad("gait.first_step_s must be >= 0".into());
                }
            }
            ProfileKind::StepChange => {
                let s = &self.step_change;
                if !tilt_ok(s.angle_deg) {
                    return bad(format!("step angle {} deg exceeds {MAX_TILT_DEG}", s.angle_deg));
                }
                if !(s.transition_ms > 0.0 && s.hold_s >= 0.0) {
                    return bad("step_change needs transition_ms > 0 and hold_s >= 0".into());
                }
            }
            ProfileKind::Replay => {
                if self.replay.path.as_os_str().is_empty() {
                    return bad("replay.path is required".into());
                }
            }
        }
        Ok(())
    }

    /// Analytic trunk tilt `(ml, ap)` and its rate, deg and deg/s, at `t_ms`.
    pub fn trunk_motion(&self, t_ms: f64) -> ((f64, f64), (f64, f64)) {
        let t = t_ms * 1e-3;
        let on_axis = |axis: TiltAxis, v: f64, r: f64| match axis {
            TiltAxis::Ml => ((v, 0.0), (r, 0.0)),
            TiltAxis::Ap => ((0.0, v), (0.0, r)),
        };
        match self.kind {
            ProfileKind::StaticSway => {
                let s = &self.sway;
                let w = TAU * s.freq_hz;
                let ((ml, ap), rate) = on_axis(s.axis, s.amplitude_deg * (w * t).sin(), s.amplitude_deg * w * (w * t).cos());
                ((ml + s.offset.0, ap + s.offset.1), rate)
            }
            ProfileKind::Reach => {
                let r = &self.reach;
                let (v, dv) = raised_cosine(t, r.period_s, r.angle_deg);
                on_axis(r.axis, v, dv)
            }
            ProfileKind::Sts => {
                let s = &self.sts;
                let tau = t.rem_euclid(s.period_s);
                let (v, dv) = if tau < s.movement_s {
                    raised_cosine(tau, s.movement_s, s.peak_deg)
                } else {
                    (0.0, 0.0)
                };
                on_axis(TiltAxis::Ap, v, dv)
            }
            ProfileKind::StepChange => {
                let s = &self.step_change;
                let ramp = s.transition_ms * 1e-3;
                let rate = s.angle_deg / ramp;
                let mut v = 0.0;
                let mut dv = 0.0;
                for &t0 in &s.onsets_s {
                    let back = t0 + ramp + s.hold_s;
                    if t >= t0 && t < t0 + ramp {
                        v += rate * (t - t0);
                        dv += rate;
                    } else if t >= t0 + ramp && t < back {
                        v += s.angle_deg;
                    } else if t >= back && t < back + ramp {
                        v += s.angle_deg - rate * (t - back);
                        dv -= rate;
                    }
                }
                on_axis(s.axis, v, dv)
            }
            ProfileKind::Gait | ProfileKind::Replay => ((0.0, 0.0), (0.0, 0.0)),
        }
    }
}

/// `amp * (1 - cos)/2` over one period and its derivative.
fn raised_cosine(t: f64, period: f64, amp: f64) -> (f64, f64) {
    let w = TAU / period;
    (0.5 * amp * (1.0 - (w * t).cos()), 0.5 * amp * w * (w * t).sin())
}

/// Gravity seen by a sensor leaning `(ml, ap)` degrees, in g.
pub fn gravity_for_tilt(ml_deg: f64, ap_deg: f64) -> [f64; 3] {
    let v = [ap_deg.to_radians().tan(), ml_deg.to_radians().tan(), 1.0];
    let n = (v[0] * v[0] + v[1] * v[1] + 1.0).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Footfall {
    pub foot: Foot,
    /// Time of the first spike sample, ms.
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TiltPoint {
    pub t: f64,
    pub ml: f64,
    pub ap: f64,
}

/// What the simulated body actually did.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    pub footfalls: Vec<Footfall>,
    /// Analytic trunk tilt at every sample time.
    pub tilt: Vec<TiltPoint>,
    /// Times of maximal excursion of each reach or sit-to-stand, ms.
    pub peaks: Vec<f64>,
    /// (start, end) of each jerk burst, ms.
    pub bursts: Vec<(f64, f64)>,
    /// Movement onsets of a step-change profile, ms.
    pub onsets: Vec<f64>,
}

impl GroundTruth {
    pub fn tilt_at(&self, t: f64) -> Option<(f64, f64)> {
        let i = self.tilt.partition_point(|p| p.t <= t);
        if i == 0 || i > self.tilt.len() {
            return None;
        }
        let a = self.tilt[i - 1];
        let Some(&b) = self.tilt.get(i) else {
            return (t == a.t).then_some((a.ml, a.ap));
        };
        let f = (t - a.t) / (b.t - a.t);
        Some((a.ml + f * (b.ml - a.ml), a.ap + f * (b.ap - a.ap)))
    }

    /// Upward crossings of `threshold` on `axis`, linearly interpolated.
    pub fn crossings(&self, axis: TiltAxis, threshold: f64) -> Vec<f64> {
        let pick = |p: &TiltPoint| match axis {
            TiltAxis::Ml => p.ml,
            TiltAxis::Ap => p.ap,
        };
        self.tilt
            .windows(2)
            .filter_map(|w| {
                let (a, b) = (pick(&w[0]), pick(&w[1]));
                (a < threshold && b >= threshold).then(|| w[0].t + (threshold - a) / (b - a) * (w[1].t - w[0].t))
            })
            .collect()
    }

    /// Zone of the analytic trunk projection at each `period_ms` tick.
    pub fn zone_occupancy(&self, layout: &ZoneLayout, period_ms: f64) -> Vec<(f64, Zone)> {
        let end = self.tilt.last().map_or(0.0, |p| p.t);
        (0..)
            .map(|k| k as f64 * period_ms)
            .take_while(|&t| t <= end)
            .filter_map(|t| self.tilt_at(t).map(|pos| (t, allocate_zone(pos, layout))))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorStream {
    pub location: BodyLocation,
    /// `t_rx` holds the send time, ms from stream start.
    pub samples: Vec<ImuSample>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimRun {
    pub streams: Vec<SensorStream>,
    pub truth: GroundTruth,
}

impl SimRun {
    pub fn stream(&self, location: BodyLocation) -> Option<&SensorStream> {
        self.streams.iter().find(|s| s.location == location)
    }
}

pub fn generate_profile(profile: &MotionProfile) -> Result<SimRun, SimError> {
    profile.validate()?;
    match profile.kind {
        ProfileKind::Gait => Ok(generate_gait(profile)),
        ProfileKind::Replay => replay_log(&profile.replay.path),
        _ => Ok(generate_trunk(profile)),
    }
}

fn sample_times(duration_s: f64) -> impl Iterator<Item = f64> {
    let n = (duration_s * 1000.0 / SENSOR_PERIOD_MS).ceil() as usize;
    (0..n).map(|i| i as f64 * SENSOR_PERIOD_MS)
}

fn generate_trunk(p: &MotionProfile) -> SimRun {
    let mut truth = GroundTruth::default();
    let bursts: Vec<(f64, f64, f64)> = p
        .sts
        .bursts
        .iter()
        .filter(|_| p.kind == ProfileKind::Sts)
        .map(|b| (b.at_s * 1000.0, b.at_s * 1000.0 + b.duration_ms, b.amplitude_g))
        .collect();
    truth.bursts = bursts.iter().map(|&(a, b, _)| (a, b)).collect();
    let mut samples = Vec::new();
    for t in sample_times(p.duration) {
        let ((ml, ap), (dml, dap)) = p.trunk_motion(t);
        truth.tilt.push(TiltPoint { t, ml, ap });
        let mut acc = gravity_for_tilt(ml, ap);
        for &(a, b, amp) in &bursts {
            if t >= a && t < b {
                acc[0] += if t < 0.5 * (a + b) { amp } else { -amp };
            }
        }
        samples.push(ImuSample::new(
            t,
            acc.map(|v| v as f32),
            [dml as f32, dap as f32, 0.0],
            p.battery as f32,
        ));
    }
    let end = p.duration * 1000.0;
    let periodic_peaks = |period_s: f64, rise_s: f64| -> Vec<f64> {
        (0..)
            .map(|k| (k as f64 * period_s + 0.5 * rise_s) * 1000.0)
            .take_while(|&t| t < end)
            .collect()
    };
    match p.kind {
        ProfileKind::Reach => truth.peaks = periodic_peaks(p.reach.period_s, p.reach.period_s),
        ProfileKind::Sts => truth.peaks = periodic_peaks(p.sts.period_s, p.sts.movement_s),
        ProfileKind::StepChange => {
            truth.onsets = p
                .step_change
                .onsets_s
                .iter()
                .map(|s| s * 1000.0)
                .filter(|&t| t < end)
                .collect()
        }
        _ => {}
    }
    SimRun {
        streams: vec![SensorStream {
            location: BodyLocation::Trunk,
            samples,
        }],
        truth,
    }
}

fn generate_gait(p: &MotionProfile) -> SimRun {
    let g = &p.gait;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let interval = 60_000.0 / g.cadence;
    let times: Vec<f64> = sample_times(p.duration).collect();
    let n = times.len();
    let mut footfalls = Vec::new();
    for k in 0.. {
        let jitter = if g.jitter_ms > 0.0 {
            rng.gen_range(-g.jitter_ms..=g.jitter_ms)
        } else {
            0.0
        };
        let nominal = g.first_step_s * 1000.0 + k as f64 * interval;
        let idx = ((nominal + jitter).max(0.0) / SENSOR_PERIOD_MS).round() as usize;
        if nominal >= p.duration * 1000.0 {
            break;
        }
        if idx + FOOTFALL_SAMPLES > n {
            continue;
        }
        let foot = if k % 2 == 0 { Foot::Left } else { Foot::Right };
        footfalls.push((foot, idx));
    }
    let leg = |foot: Foot| {
        let mut samples: Vec<ImuSample> = times
            .iter()
            .map(|&t| ImuSample::new(t, [0.0, 0.0, 1.0], [0.0; 3], p.battery as f32))
            .collect();
        for &(f, idx) in &footfalls {
            if f == foot {
                for s in &mut samples[idx..idx + FOOTFALL_SAMPLES] {
                    s.acc = [0.0, 0.0, FOOTFALL_G];
                }
            }
        }
        samples
    };
    let truth = GroundTruth {
        footfalls: footfalls
            .iter()
            .map(|&(foot, idx)| Footfall {
                foot,
                t: times[idx],
            })
            .collect(),
        tilt: times.iter().map(|&t| TiltPoint { t, ml: 0.0, ap: 0.0 }).collect(),
        ..Default::default()
    };
    SimRun {
        streams: vec![
            SensorStream {
                location: BodyLocation::LeftLeg,
                samples: leg(Foot::Left),
            },
            SensorStream {
                location: BodyLocation::RightLeg,
                samples: leg(Foot::Right),
            },
        ],
        truth,
    }
}

/// Rebuild sensor streams from the raw columns of a session log, one sample
/// per logged tick, timed relative to the first row.
pub fn replay_log(path: &Path) -> Result<SimRun, SimError> {
    let rows = read_log(path).map_err(|e| SimError::Parse(format!("{}: {e}", path.display())))?;
    let Some(t0) = rows.first().map(|r| r.t) else {
        return Err(SimError::InvalidProfile("replay log has no rows".into()));
    };
    let mut trunk = Vec::new();
    let mut left = Vec::new();
    let mut right = Vec::new();
    let mut truth = GroundTruth::default();
    let f = |v: f64| v as f32;
    for r in &rows {
        let t = r.t - t0;
        if r.trunk_online {
            trunk.push(ImuSample::new(
                t,
                [f(r.trunk_ax), f(r.trunk_ay), f(r.trunk_az)],
                [f(r.trunk_gx), f(r.trunk_gy), f(r.trunk_gz)],
                1.0,
            ));
        }
        if r.left_online {
            left.push(ImuSample::new(t, [f(r.left_ax), f(r.left_ay), f(r.left_az)], [0.0; 3], 1.0));
        }
        if r.right_online {
            right.push(ImuSample::new(t, [f(r.right_ax), f(r.right_ay), f(r.right_az)], [0.0; 3], 1.0));
        }
        truth.tilt.push(TiltPoint {
            t,
            ml: r.tilt_ml,
            ap: r.tilt_ap,
        });
        if let Ok(foot) = serde_json::from_value::<Foot>(serde_json::Value::String(r.step.clone())) {
            truth.footfalls.push(Footfall { foot, t });
        }
    }
    let streams = [
        (BodyLocation::Trunk, trunk),
        (BodyLocation::LeftLeg, left),
        (BodyLocation::RightLeg, right),
    ]
    .into_iter()
    .filter(|(_, s)| !s.is_empty())
    .map(|(location, samples)| SensorStream { location, samples })
    .collect();
    Ok(SimRun { streams, truth })
}

/// One datagram of a streamed run.
#[derive(Debug, Clone, PartialEq)]
pub struct Datagram {
    /// Send time, ms from stream start at rate scale 1.
    pub t: f64,
    /// Index of the source stream; it goes to `base_port + stream`.
    pub stream: usize,
    pub bytes: Vec<u8>,
}

/// All datagrams of a run in send order with seeded random withholding.
/// Returns the kept datagrams and the number withheld.
pub fn datagrams(run: &SimRun, drop_fraction: f64, seed: u64) -> (Vec<Datagram>, usize) {
    let mut all: Vec<Datagram> = run
        .streams
        .iter()
        .enumerate()
        .flat_map(|(i, s)| {
            s.samples.iter().map(move |smp| Datagram {
                t: smp.t_rx,
                stream: i,
                bytes: encode_osc_message(smp),
            })
        })
        .collect();
    all.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.stream.cmp(&b.stream)));
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xd809_5eed);
    let p = drop_fraction.clamp(0.0, 1.0);
    let before = all.len();
    all.retain(|_| !(p > 0.0 && rng.gen_bool(p)));
    let dropped = before - all.len();
    (all, dropped)
}

#[derive(Debug, Clone, Copy)]
pub struct StreamOptions {
    pub rate_scale: f64,
    pub drop_fraction: f64,
    /// Clock reading at which the first sample is due; `None` starts now.
    pub start_ms: Option<f64>,
}

impl Default for StreamOptions {
    fn default() -> Self {
        Self {
            rate_scale: 1.0,
            drop_fraction: 0.0,
            start_ms: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamStats {
    pub sent: usize,
    pub dropped: usize,
    /// Clock reading of the stream origin, ms.
    pub start_ms: f64,
    pub elapsed_ms: f64,
}

/// Send a run to `dest` (stream `i` to port `dest.port() + i`), pacing each
/// sample at `t / rate_scale` after the start.
pub fn stream_run(
    run: &SimRun,
    dest: SocketAddr,
    seed: u64,
    opts: StreamOptions,
    clock: &Clock,
    stop: Option<&AtomicBool>,
) -> Result<StreamStats, SimError> {
    if !(opts.rate_scale > 0.0 && opts.rate_scale.is_finite()) {
        return Err(SimError::InvalidProfile("rate_scale must be > 0".into()));
    }
    let bind: SocketAddr = if dest.is_ipv4() { "0.0.0.0:0" } else { "[::]:0" }.parse().expect("literal address");
    let socket = UdpSocket::bind(bind)?;
    let (grams, dropped) = datagrams(run, opts.drop_fraction, seed);
    let start = opts.start_ms.unwrap_or_else(|| clock.now_ms());
    let mut sent = 0;
    for d in &grams {
        if stop.is_some_and(|s| s.load(Ordering::Relaxed)) {
            break;
        }
        clock.sleep_until(start + d.t / opts.rate_scale);
        let mut to = dest;
        to.set_port(dest.port() + d.stream as u16);
        socket.send_to(&d.bytes, to)?;
        sent += 1;
    }
    Ok(StreamStats {
        sent,
        dropped,
        start_ms: start,
        elapsed_ms: clock.now_ms() - start,
    })
}

/// Generate and stream a profile in one call.
pub fn stream_profile(
    profile: &MotionProfile,
    dest: SocketAddr,
    rate_scale: f64,
    drop_fraction: f64,
) -> Result<StreamStats, SimError> {
    let run = generate_profile(profile)?;
    let opts = StreamOptions {
        rate_scale,
        drop_fraction,
        start_ms: None,
    };
    stream_run(&run, dest, profile.seed, opts, &Clock::new(), None)
}
