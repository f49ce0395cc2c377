//! Feedback strategies: how a feedback variable manipulates the music.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{SynthError, BLOCK_FRAMES};
use crate::mapping::FeedbackVariable;
use crate::motion::Foot;
use crate::sequencer::{Scale, Track};

pub const DISSONANCE_MAX_CENTS: f64 = 90.0;
pub const PITCH_SKEW_MAX_SEMITONES: f64 = 2.0;
pub const DISTURBANCE_TONE_HZ: f64 = 2200.0;
pub const DISTURBANCE_MAX_DB: f64 = -6.0;
pub const SIREN_TONES_HZ: (f64, f64) = (600.0, 800.0);
pub const SIREN_RATE_HZ: f64 = 2.0;
pub const SIREN_MAX_DB: f64 = -9.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    MusicDissonance,
    DisturbanceTone,
    AmbulanceSiren,
    PitchSkew,
    MelodyDegree,
    TrackMute,
    DrumTrigger,
    CueArtifact,
    MusicStop,
}

impl Strategy {
    pub const ALL: [Strategy; 9] = [
        Strategy::MusicDissonance,
        Strategy::DisturbanceTone,
        Strategy::AmbulanceSiren,
        Strategy::PitchSkew,
        Strategy::MelodyDegree,
        Strategy::TrackMute,
        Strategy::DrumTrigger,
        Strategy::CueArtifact,
        Strategy::MusicStop,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::MusicDissonance => "music_dissonance",
            Strategy::DisturbanceTone => "disturbance_tone",
            Strategy::AmbulanceSiren => "ambulance_siren",
            Strategy::PitchSkew => "pitch_skew",
            Strategy::MelodyDegree => "melody_degree",
            Strategy::TrackMute => "track_mute",
            Strategy::DrumTrigger => "drum_trigger",
            Strategy::CueArtifact => "cue_artifact",
            Strategy::MusicStop => "music_stop",
        }
    }

    /// Directional strategies are neutral at 0.5, the rest at 0.
    pub fn is_directional(self) -> bool {
        matches!(self, Strategy::AmbulanceSiren | Strategy::PitchSkew)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, SynthError> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| SynthError::UnknownStrategy(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CueKind {
    Bell,
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StrategyParams {
    /// Track gated by `track_mute`.
    pub track: Track,
    /// `track_mute` / `music_stop` engage when the feedback variable exceeds this.
    pub threshold: f64,
    /// Siren loudness 0..1; when absent it follows `|2 fv - 1|`.
    pub siren_level: Option<f64>,
    /// One-shot fired by `drum_trigger` this block.
    pub foot: Option<Foot>,
    /// One-shot fired by `cue_artifact` this block.
    pub cue: Option<CueKind>,
    pub degree: u32,
    pub scale: Scale,
    pub key: u8,
    pub root_octave: i32,
    pub tone_hz: f64,
}

impl Default for StrategyParams {
    fn default() -> Self {
        Self {
            track: Track::Melody,
            threshold: 0.5,
            siren_level: None,
            foot: None,
            cue: None,
            degree: 0,
            scale: Scale::Major,
            key: 0,
            root_octave: 5,
            tone_hz: DISTURBANCE_TONE_HZ,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyControl {
    pub strategy: Strategy,
    pub intensity: FeedbackVariable,
    #[serde(default)]
    pub params: StrategyParams,
}

impl StrategyControl {
    pub fn new(strategy: Strategy, value: f64) -> Self {
        Self {
            strategy,
            intensity: FeedbackVariable::new(value, strategy.is_directional()),
            params: StrategyParams::default(),
        }
    }

    pub fn neutral(strategy: Strategy) -> Self {
        Self {
            strategy,
            intensity: FeedbackVariable::neutral(strategy.is_directional()),
            params: StrategyParams::default(),
        }
    }

    pub fn with_params(mut self, params: StrategyParams) -> Self {
        self.params = params;
        self
    }

    pub fn siren_level(&self) -> f64 {
        self.params
            .siren_level
            .unwrap_or_else(|| (2.0 * self.intensity.value - 1.0).abs())
            .clamp(0.0, 1.0)
    }

    /// Neutral controls leave the render bit-identical to their absence.
    pub fn is_neutral(&self) -> bool {
        match self.strategy {
            Strategy::AmbulanceSiren => self.siren_level() == 0.0,
            _ => self.intensity.is_neutral(),
        }
    }
}

/// A parameter ramped linearly to its target over one block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Smoothed {
    pub current: f64,
    pub target: f64,
}

impl Smoothed {
    pub const fn at(v: f64) -> Self {
        Self {
            current: v,
            target: v,
        }
    }

    pub fn is_steady_at(&self, v: f64) -> bool {
        self.current == v && self.target == v
    }

    /// Value at frame `i` of the block; exactly `target` on the last frame.
    #[inline]
    pub fn at_frame(&self, i: usize) -> f64 {
        if self.current == self.target {
            return self.target;
        }
        let t = (i + 1) as f64 / BLOCK_FRAMES as f64;
        self.current * (1.0 - t) + self.target * t
    }

    pub fn settle(&mut self) {
        self.current = self.target;
    }
}

/// Per-block targets derived from the active strategy controls.
#[derive(Debug, Clone)]
pub(crate) struct StrategyState {
    pub dissonance_cents: Smoothed,
    pub skew_semitones: Smoothed,
    pub tone_amp: Smoothed,
    pub tone_hz: f64,
    pub siren_level: Smoothed,
    pub siren_pan: Smoothed,
    pub track_gate: [Smoothed; Track::COUNT],
    pub music_gate: Smoothed,
    pub melody_pitch: Option<u8>,
    pub drums_replaced: bool,
    pub drum_hit: Option<Foot>,
    pub cue: Option<CueKind>,
}

impl Default for StrategyState {
    fn default() -> Self {
        Self {
            dissonance_cents: Smoothed::at(0.0),
            skew_semitones: Smoothed::at(0.0),
            tone_amp: Smoothed::at(0.0),
            tone_hz: DISTURBANCE_TONE_HZ,
            siren_level: Smoothed::at(0.0),
            siren_pan: Smoothed::at(0.0),
            track_gate: [Smoothed::at(1.0); Track::COUNT],
            music_gate: Smoothed::at(1.0),
            melody_pitch: None,
            drums_replaced: false,
            drum_hit: None,
            cue: None,
        }
    }
}

impl StrategyState {
    /// Neutral targets, then each control applied on top.
    pub fn begin_block(&mut self, controls: &[StrategyControl]) {
        self.dissonance_cents.target = 0.0;
        self.skew_semitones.target = 0.0;
        self.tone_amp.target = 0.0;
        self.siren_level.target = 0.0;
        for g in &mut self.track_gate {
            g.target = 1.0;
        }
        self.music_gate.target = 1.0;
        self.melody_pitch = None;
        self.drums_replaced = false;
        self.drum_hit = None;
        self.cue = None;
        for c in controls {
            self.apply(c);
        }
    }

    fn apply(&mut self, c: &StrategyControl) {
        let fv = c.intensity.value;
        let p = &c.params;
        match c.strategy {
            Strategy::MusicDissonance => self.dissonance_cents.target = DISSONANCE_MAX_CENTS * fv,
            Strategy::DisturbanceTone => {
                self.tone_amp.target = crate::dsp::db_to_gain(DISTURBANCE_MAX_DB) * fv;
                self.tone_hz = p.tone_hz;
            }
            Strategy::AmbulanceSiren => {
                let level = c.siren_level();
                self.siren_level.target = level;
                if level > 0.0 {
                    self.siren_pan.target = (2.0 * (fv - 0.5)).clamp(-1.0, 1.0);
                }
            }
            Strategy::PitchSkew => {
                self.skew_semitones.target = 2.0 * PITCH_SKEW_MAX_SEMITONES * (fv - 0.5);
            }
            Strategy::MelodyDegree => {
                if fv > 0.0 {
                    self.melody_pitch = Some(crate::sequencer::scale_degree_to_pitch(
                        p.degree, p.key, p.scale, p.root_octave,
                    ));
                }
            }
            Strategy::TrackMute => {
                if fv > p.threshold {
                    self.track_gate[p.track.index()].target = 0.0;
                }
            }
            Strategy::MusicStop => {
                if fv > p.threshold {
                    self.music_gate.target = 0.0;
                }
            }
            Strategy::DrumTrigger => {
                if fv > 0.0 {
                    self.drums_replaced = true;
                    self.drum_hit = p.foot;
                }
            }
            Strategy::CueArtifact => {
                if fv > 0.0 {
                    self.cue = p.cue;
                }
            }
        }
    }

    pub fn end_block(&mut self) {
        self.dissonance_cents.settle();
        self.skew_semitones.settle();
        self.tone_amp.settle();
        self.siren_level.settle();
        self.siren_pan.settle();
        for g in &mut self.track_gate {
            g.settle();
        }
        self.music_gate.settle();
    }
}
