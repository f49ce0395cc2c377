use std::collections::VecDeque;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::log::LogRow;
use super::reps::RepCounter;
use super::{Mode, SessionError, SessionState};
use crate::mapping::{
    allocate_zone, anticipated_error_feedback, map_feedback_variable, reach_scale_degree, step_timing_error,
    trajectory_position, CueEvents, FeedbackVariable, FlexionCueDetector, Zone,
};
use crate::motion::{
    calibrate_bias, Bias, Foot, LegPipeline, MovementState, StepEvent, TrunkPipeline, MBF_PERIOD_MS,
    MIN_CALIBRATION_SAMPLES,
};
use crate::osc::{poll_sensor_status, BodyLocation, Delivery, ImuSample};
use crate::sequencer::{
    builtin_song, builtin_style, load_song_file, load_style_file, MusicEvent, Schedule, Sequencer,
};
use crate::synth::{CueKind, Strategy, StrategyControl, SynthSettings};

/// What one slot's receiver produced since the previous feedback tick.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SlotInput {
    pub delivery: Option<Delivery>,
    pub last_rx: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MbfOutput {
    /// Controls for the next audio block; empty in standby or while frozen.
    pub controls: Vec<StrategyControl>,
    pub row: LogRow,
}

/// Work the render side must do before its next block.
#[derive(Debug, Clone, PartialEq)]
pub enum RenderCommand {
    AllNotesOff,
    Settings(Box<SynthSettings>),
    Variants([u8; 8]),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transport {
    Play,
    Pause,
    Stop,
    Rewind,
}

/// Immutable copy of everything the console shows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub state: SessionState,
    pub movement: MovementState,
    pub zone: Zone,
    pub fv: f64,
    pub param: f64,
    pub target: (f64, f64),
    pub rep_count: u64,
    pub progress: f64,
    pub online: Vec<bool>,
    pub frozen: bool,
    pub playing: bool,
    pub beat_phase: f64,
}

fn load_schedule(state: &SessionState) -> Result<Schedule, SessionError> {
    let song = match builtin_song(&state.music.song) {
        Some(s) => s,
        None => load_song_file(Path::new(&state.music.song))?,
    };
    let style = match builtin_style(&state.music.style) {
        Some(s) => s,
        None => load_style_file(Path::new(&state.music.style))?,
    };
    Ok(Schedule::build(&song, &style)?)
}

fn slot_bias(state: &SessionState, i: usize) -> Bias {
    let s = &state.sensors.slots[i];
    Bias {
        gyro: s.gyro_bias,
        acc: s.acc_bias,
    }
}

const HISTORY_LEN: usize = 2 * MIN_CALIBRATION_SAMPLES;

/// The session core. Owns the state, the motion pipelines and the sequencer;
/// audio is rendered elsewhere from its outputs.
#[derive(Debug, Clone)]
pub struct Engine {
    state: SessionState,
    sequencer: Sequencer,
    trunk: TrunkPipeline,
    legs: [LegPipeline; 2],
    held: Vec<Option<ImuSample>>,
    history: Vec<VecDeque<ImuSample>>,
    cues: FlexionCueDetector,
    reps: RepCounter,
    last_step_t: Option<f64>,
    gait_param: Option<f64>,
    movement: MovementState,
    last: Option<MbfOutput>,
    commands: Vec<RenderCommand>,
}

impl Engine {
    pub fn new(state: SessionState) -> Result<Self, SessionError> {
        state.validate()?;
        let schedule = Arc::new(load_schedule(&state)?);
        let mut sequencer = Sequencer::new(schedule.clone(), state.tempo);
        sequencer.set_repeat(state.music.repeat);
        if state.music.autoplay {
            sequencer.play();
        }
        let n = state.sensors.slots.len();
        Ok(Self {
            trunk: TrunkPipeline::new(&state.filters)?,
            legs: [
                LegPipeline::new(Foot::Left, state.filters.step)?,
                LegPipeline::new(Foot::Right, state.filters.step)?,
            ],
            held: vec![None; n],
            history: vec![VecDeque::with_capacity(HISTORY_LEN); n],
            cues: FlexionCueDetector::new(state.sts.sit_threshold, state.sts.stand_threshold, state.sts.hysteresis),
            reps: RepCounter::new(&state),
            last_step_t: None,
            gait_param: None,
            movement: MovementState::default(),
            last: None,
            commands: vec![RenderCommand::Variants(schedule.variants)],
            sequencer,
            state,
        })
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn movement(&self) -> &MovementState {
        &self.movement
    }

    pub fn sequencer(&self) -> &Sequencer {
        &self.sequencer
    }

    pub fn schedule(&self) -> &Arc<Schedule> {
        self.sequencer.schedule()
    }

    pub fn tempo(&self) -> f64 {
        self.sequencer.clock().tempo
    }

    pub fn last_output(&self) -> Option<&MbfOutput> {
        self.last.as_ref()
    }

    /// Drain pending render-side commands into `out`.
    pub fn take_render_commands(&mut self, out: &mut Vec<RenderCommand>) {
        out.append(&mut self.commands);
    }

    fn slot_of(&self, loc: BodyLocation) -> Option<usize> {
        self.state.sensors.slots.iter().position(|s| s.body_location == loc)
    }

    fn reset_detectors(&mut self) {
        let s = &self.state;
        self.cues = FlexionCueDetector::new(s.sts.sit_threshold, s.sts.stand_threshold, s.sts.hysteresis);
        self.reps = RepCounter::new(s);
        self.last_step_t = None;
        self.gait_param = None;
    }

    /// Replace the whole state, rebuilding only what changed.
    pub fn apply_state(&mut self, new: SessionState) -> Result<(), SessionError> {
        new.validate()?;
        let old = std::mem::replace(&mut self.state, new);
        let result = self.rebuild(&old);
        if result.is_err() {
            self.state = old;
        }
        result
    }

    fn rebuild(&mut self, old: &SessionState) -> Result<(), SessionError> {
        let s = self.state.clone();
        let s = &s;
        if s.music.song != old.music.song || s.music.style != old.music.style {
            let schedule = Arc::new(load_schedule(s)?);
            self.commands.push(RenderCommand::Variants(schedule.variants));
            self.sequencer.set_schedule(schedule);
        }
        if s.filters != old.filters {
            self.trunk = TrunkPipeline::new(&s.filters)?;
            self.legs = [
                LegPipeline::new(Foot::Left, s.filters.step)?,
                LegPipeline::new(Foot::Right, s.filters.step)?,
            ];
        }
        if s.sensors.slots.len() != old.sensors.slots.len() {
            self.held = vec![None; s.sensors.slots.len()];
            self.history = vec![VecDeque::with_capacity(HISTORY_LEN); s.sensors.slots.len()];
        }
        if s.mode != old.mode || s.sts != old.sts || s.reach != old.reach {
            self.reset_detectors();
        }
        if s.mixer != old.mixer {
            self.commands.push(RenderCommand::Settings(Box::new(s.mixer.clone())));
        }
        self.sequencer.set_repeat(s.music.repeat);
        let tempo = self.sequencer.set_tempo(s.tempo);
        self.state.tempo = tempo;
        Ok(())
    }

    pub fn set_mode(&mut self, mode: Mode) {
        if mode != self.state.mode {
            self.state.mode = mode;
            self.reset_detectors();
        }
    }

    pub fn set_standby(&mut self, on: bool) {
        self.state.standby = on;
    }

    pub fn transport(&mut self, t: Transport) {
        match t {
            Transport::Play => {
                if self.sequencer.is_finished() {
                    self.sequencer.rewind();
                }
                self.sequencer.play();
            }
            Transport::Pause => {
                self.sequencer.pause();
                self.commands.push(RenderCommand::AllNotesOff);
            }
            Transport::Stop | Transport::Rewind => {
                if t == Transport::Stop {
                    self.sequencer.pause();
                }
                self.sequencer.rewind();
                self.commands.push(RenderCommand::AllNotesOff);
            }
        }
        self.state.progress = self.sequencer.progress();
    }

    /// Estimate biases from the recent samples of the given slots (all when
    /// empty) and store them in the state.
    pub fn calibrate(&mut self, slot_ids: &[u8]) -> Result<Vec<(u8, Bias)>, SessionError> {
        let mut out = Vec::new();
        for i in 0..self.state.sensors.slots.len() {
            let id = self.state.sensors.slots[i].slot_id;
            if !slot_ids.is_empty() && !slot_ids.contains(&id) {
                continue;
            }
            let recent: Vec<ImuSample> = self.history[i].iter().copied().collect();
            let bias = calibrate_bias(&recent)?;
            let slot = &mut self.state.sensors.slots[i];
            slot.gyro_bias = bias.gyro;
            slot.acc_bias = bias.acc;
            out.push((id, bias));
        }
        Ok(out)
    }

    /// Advance the sequencer by `dt_ms`, appending due events.
    pub fn tick_sequencer(&mut self, dt_ms: f64, out: &mut Vec<MusicEvent>) -> usize {
        let n = self.sequencer.tick(dt_ms, out);
        self.state.progress = self.sequencer.progress();
        n
    }

    /// One feedback tick at `now` ms. `inputs` is indexed like the sensor slots.
    pub fn tick_mbf(&mut self, now: f64, inputs: &[SlotInput]) -> MbfOutput {
        let mut superseded = 0;
        for (i, slot) in self.state.sensors.slots.iter_mut().enumerate() {
            let input = inputs.get(i).copied().unwrap_or_default();
            if let Some(t) = input.last_rx {
                slot.last_rx = Some(t);
            }
            if let Some(d) = input.delivery {
                self.held[i] = Some(d.sample);
                superseded += d.superseded;
                if self.history[i].len() == HISTORY_LEN {
                    self.history[i].pop_front();
                }
                self.history[i].push_back(d.sample);
            }
            poll_sensor_status(slot, now, self.state.sensors.offline_timeout_ms);
        }
        let online = |e: &Self, loc| e.slot_of(loc).is_some_and(|i| e.state.sensors.slots[i].online);
        let trunk_online = online(self, BodyLocation::Trunk);
        let left_online = online(self, BodyLocation::LeftLeg);
        let right_online = online(self, BodyLocation::RightLeg);
        let mode = self.state.mode;
        let frozen = if mode.is_gait() {
            !(left_online && right_online)
        } else {
            !trunk_online
        };

        let dt_s = MBF_PERIOD_MS * 1e-3;
        let mut row = LogRow {
            t: now,
            mode,
            standby: self.state.standby,
            frozen,
            trunk_online,
            left_online,
            right_online,
            superseded,
            ..Default::default()
        };
        if trunk_online {
            let i = self.slot_of(BodyLocation::Trunk).unwrap();
            if let Some(s) = self.held[i] {
                let bias = slot_bias(&self.state, i);
                self.movement = self.trunk.process(&s, &bias, dt_s);
                let (a, g) = (s.acc_f64(), s.gyro_f64());
                (row.trunk_ax, row.trunk_ay, row.trunk_az) = (a[0], a[1], a[2]);
                (row.trunk_gx, row.trunk_gy, row.trunk_gz) = (g[0], g[1], g[2]);
            }
        }
        self.movement.step_event = None;
        let mut steps: Vec<StepEvent> = Vec::new();
        for (k, (loc, is_online)) in [(BodyLocation::LeftLeg, left_online), (BodyLocation::RightLeg, right_online)]
            .into_iter()
            .enumerate()
        {
            let Some(i) = self.slot_of(loc).filter(|_| is_online) else {
                continue;
            };
            let Some(s) = self.held[i] else {
                continue;
            };
            let a = s.acc_f64();
            if k == 0 {
                (row.left_ax, row.left_ay, row.left_az) = (a[0], a[1], a[2]);
            } else {
                (row.right_ax, row.right_ay, row.right_az) = (a[0], a[1], a[2]);
            }
            let bias = slot_bias(&self.state, i);
            if let Some(ev) = self.legs[k].process(&s, &bias) {
                steps.push(ev);
            }
        }
        steps.sort_by(|a, b| a.t.total_cmp(&b.t));
        let mut intervals = Vec::new();
        for ev in &steps {
            intervals.push(self.last_step_t.map(|p| ev.t - p));
            self.last_step_t = Some(ev.t);
        }
        self.movement.step_event = steps.first().copied();

        let m = self.movement;
        let cues = if frozen { CueEvents::default() } else { self.cues.process(m.flexion_angle) };
        let zone = allocate_zone(m.pos2d, &self.state.zones);
        let beat_phase = self.sequencer.beat_phase();
        let cfg = *self.state.mode_config();
        let directional = cfg.strategy.is_directional();
        let mut mapping = cfg.mapping;
        mapping.directional = directional;
        let map = |x: f64| map_feedback_variable(x, &mapping).unwrap_or(FeedbackVariable::neutral(directional));
        let mut params = cfg.params;
        let mut target = self.state.zones.center;

        let (param, fv) = match mode {
            Mode::StaticBalance => {
                let level = if zone >= 4 { 4.0 } else { f64::from(zone) };
                let side = if m.pos2d.0 < self.state.zones.center.0 { -1.0 } else { 1.0 };
                let x = side * level;
                (x, map(x))
            }
            Mode::Reach => {
                let r = self.state.reach;
                let x = match r.axis {
                    super::TiltAxis::Ml => m.tilt_ml,
                    super::TiltAxis::Ap => m.tilt_ap,
                };
                params.degree = reach_scale_degree(x, r.range, r.n_degrees as usize) as u32;
                params.key = self.schedule().key;
                (x, map(x))
            }
            Mode::TrunkControl => {
                let d = self.state.dynamic;
                let traj = &self.state.trajectory;
                target = trajectory_position(traj, beat_phase + d.lead_beats);
                if directional {
                    let (fv_ml, _) = anticipated_error_feedback(m.pos2d, traj, beat_phase, d.lead_beats, d.k, d.d0);
                    (m.pos2d.0 - target.0, fv_ml)
                } else {
                    let x = (m.pos2d.0 - target.0).hypot(m.pos2d.1 - target.1);
                    (x, map(x))
                }
            }
            Mode::Sts => (m.jerk_sq, map(m.jerk_sq)),
            Mode::GaitDuration => {
                let beat = self.sequencer.clock().beat_interval_ms();
                if let Some(Some(iv)) = intervals.last() {
                    self.gait_param = Some(step_timing_error(*iv, beat, self.state.gait.dead_zone_ms));
                }
                match self.gait_param {
                    Some(x) => (x, map(x)),
                    None => (0.0, FeedbackVariable::neutral(directional)),
                }
            }
            Mode::GaitPhase => {
                params.foot = steps.last().map(|s| s.foot);
                (0.0, FeedbackVariable::new(1.0, directional))
            }
        };

        if self.reps.process(mode, &m, cues) && !frozen {
            self.state.rep_count += 1;
        }

        let fv = if frozen { FeedbackVariable::neutral(directional) } else { fv };
        let mut controls = Vec::new();
        if !frozen && !self.state.standby {
            let c = StrategyControl {
                strategy: cfg.strategy,
                intensity: fv,
                params,
            };
            if !c.is_neutral() {
                controls.push(c);
            }
            if mode == Mode::Sts && cues.any() {
                let mut p = cfg.params;
                p.cue = Some(p.cue.unwrap_or(CueKind::Bell));
                controls.push(StrategyControl::new(Strategy::CueArtifact, 1.0).with_params(p));
            }
        }

        row.tilt_ml = m.tilt_ml;
        row.tilt_ap = m.tilt_ap;
        row.jerk_sq = m.jerk_sq;
        row.flexion = m.flexion_angle;
        row.param = param;
        row.fv = fv.value;
        row.zone = zone;
        (row.target_ml, row.target_ap) = target;
        if let Some(ev) = steps.last() {
            row.step = match ev.foot {
                Foot::Left => "left".into(),
                Foot::Right => "right".into(),
            };
            row.step_interval = intervals.last().copied().flatten();
        }
        row.cue = match (cues.sit, cues.stand) {
            (true, true) => "sit+stand".into(),
            (true, false) => "sit".into(),
            (false, true) => "stand".into(),
            (false, false) => String::new(),
        };
        row.rep_count = self.state.rep_count;
        row.beat_phase = beat_phase;
        let out = MbfOutput { controls, row };
        self.last = Some(out.clone());
        out
    }

    pub fn snapshot(&self, t: f64) -> Snapshot {
        let row = self.last.as_ref().map(|o| &o.row);
        Snapshot {
            t,
            state: self.state.clone(),
            movement: self.movement,
            zone: allocate_zone(self.movement.pos2d, &self.state.zones),
            fv: row.map_or(0.0, |r| r.fv),
            param: row.map_or(0.0, |r| r.param),
            target: row.map_or(self.state.zones.center, |r| (r.target_ml, r.target_ap)),
            rep_count: self.state.rep_count,
            progress: self.state.progress,
            online: self.state.sensors.slots.iter().map(|s| s.online).collect(),
            frozen: row.is_some_and(|r| r.frozen),
            playing: self.sequencer.is_playing(),
            beat_phase: self.sequencer.beat_phase(),
        }
    }
}
