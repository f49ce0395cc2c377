//! Eight-track ensemble synthesis, mixing, master processing and feedback strategies.

mod dynamics;
mod echo;
mod eq;
pub mod offline;
mod strategy;
mod voice;
mod wav;

pub use dynamics::{compressor_gain, Compressor, CompressorSettings, Limiter};
pub use echo::{echo_delay_ms, Echo, EchoSettings};
pub use eq::{design_peaking_eq, EqBand, ParametricEq};
pub use strategy::{
    CueKind, Strategy, StrategyControl, StrategyParams, DISSONANCE_MAX_CENTS, DISTURBANCE_MAX_DB, DISTURBANCE_TONE_HZ,
    PITCH_SKEW_MAX_SEMITONES, SIREN_MAX_DB, SIREN_RATE_HZ, SIREN_TONES_HZ,
};
pub use voice::{midi_to_hz, AdsrSpec, Noise, PatchSpec, PercKind, PercVoice, PitchedVoice, Wave};
pub use wav::{read_wav, write_wav, WavSink};

use std::f64::consts::{FRAC_PI_4, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::db_to_gain;
use crate::motion::Foot;
use crate::sequencer::{EventKind, MusicEvent, Track, MAX_VOICES};
use strategy::StrategyState;

pub const SAMPLE_RATE: f64 = 48_000.0;
pub const BLOCK_FRAMES: usize = 480;
pub const BLOCK_MS: f64 = 10.0;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("EQ frequency {0} Hz outside (0, fs/2)")]
    InvalidFreq(f64),
    #[error("EQ band needs Q > 0 and finite gain")]
    InvalidEq,
    #[error("unknown strategy {0:?}")]
    UnknownStrategy(String),
    #[error("wav: {0}")]
    Wav(#[from] hound::Error),
}

/// 480 stereo frames at 48 kHz.
#[derive(Clone, Copy, PartialEq)]
pub struct AudioBlock {
    pub frames: [[f32; 2]; BLOCK_FRAMES],
}

impl AudioBlock {
    pub const SILENT: AudioBlock = AudioBlock {
        frames: [[0.0; 2]; BLOCK_FRAMES],
    };

    pub fn channel(&self, ch: usize) -> impl Iterator<Item = f32> + '_ {
        self.frames.iter().map(move |f| f[ch])
    }

    pub fn is_silent(&self) -> bool {
        self.frames.iter().all(|f| f[0] == 0.0 && f[1] == 0.0)
    }

    pub fn peak(&self) -> f32 {
        self.frames.iter().fold(0.0, |m, f| m.max(f[0].abs()).max(f[1].abs()))
    }
}

impl std::fmt::Debug for AudioBlock {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "AudioBlock(peak {})", self.peak())
    }
}

/// A sequencer event placed at a frame offset within the block being rendered.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockEvent {
    pub offset: u32,
    pub event: MusicEvent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StripSettings {
    pub gain_db: f64,
    /// -1 (left) to 1 (right).
    pub pan: f64,
    pub mute: bool,
    pub compressor: CompressorSettings,
    pub eq: [EqBand; 4],
    /// Echo send level.
    pub echo_send: f64,
}

impl StripSettings {
    fn preset(pan: f64, eq: [EqBand; 4], echo_send: f64) -> Self {
        Self {
            gain_db: 0.0,
            pan,
            mute: false,
            compressor: CompressorSettings {
                threshold_db: -12.0,
                ratio: 3.0,
                attack_ms: 5.0,
                release_ms: 80.0,
            },
            eq,
            echo_send,
        }
    }
}

fn flat_eq() -> [EqBand; 4] {
    [
        EqBand::flat(100.0),
        EqBand::flat(500.0),
        EqBand::flat(2000.0),
        EqBand::flat(8000.0),
    ]
}

fn eq_with(band: usize, freq: f64, gain_db: f64, q: f64) -> [EqBand; 4] {
    let mut eq = flat_eq();
    eq[band] = EqBand { freq, gain_db, q };
    eq
}

/// Everything about the mix that the operator can change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSettings {
    pub strips: [StripSettings; Track::COUNT],
    /// Bass, chord, melody, pad.
    pub patches: [PatchSpec; 4],
    pub master_eq: [EqBand; 4],
    pub master_gain_db: f64,
    pub limiter_threshold_db: f64,
    pub limiter_release_ms: f64,
    pub echo: EchoSettings,
}

impl Default for SynthSettings {
    fn default() -> Self {
        let env = |attack_ms, decay_ms, sustain, release_ms| AdsrSpec {
            attack_ms,
            decay_ms,
            sustain,
            release_ms,
        };
        let patch = |osc1, osc2, detune_cents, osc2_level, cutoff_hz, level, env, tempo_scaled| PatchSpec {
            osc1,
            osc2,
            detune_cents,
            osc2_level,
            cutoff_hz,
            resonance: 0.8,
            level,
            env,
            tempo_scaled,
        };
        Self {
            strips: [
                StripSettings::preset(0.0, eq_with(0, 60.0, 3.0, 1.0), 0.0),
                StripSettings::preset(0.0, flat_eq(), 0.05),
                StripSettings::preset(0.3, eq_with(1, 500.0, -2.0, 1.0), 0.0),
                StripSettings::preset(-0.3, flat_eq(), 0.1),
                StripSettings::preset(0.0, eq_with(1, 250.0, -2.0, 1.2), 0.0),
                StripSettings::preset(-0.25, eq_with(1, 350.0, -2.0, 1.0), 0.15),
                StripSettings::preset(0.2, eq_with(2, 2500.0, 1.5, 1.0), 0.25),
                StripSettings::preset(0.0, flat_eq(), 0.1),
            ],
            patches: [
                patch(Wave::Saw, Wave::Square, 0.0, 0.6, 700.0, 0.35, env(3.0, 250.0, 0.6, 80.0), false),
                patch(Wave::Saw, Wave::Saw, 9.0, 1.0, 2200.0, 0.12, env(0.02, 300.0, 0.55, 0.25), true),
                patch(Wave::Square, Wave::Saw, 4.0, 0.5, 3200.0, 0.2, env(4.0, 180.0, 0.65, 120.0), false),
                patch(Wave::Saw, Wave::Saw, 14.0, 1.0, 1400.0, 0.08, env(0.5, 10.0, 1.0, 0.5), true),
            ],
            master_eq: [
                EqBand { freq: 80.0, gain_db: 1.0, q: 0.7 },
                EqBand::flat(400.0),
                EqBand::flat(3000.0),
                EqBand { freq: 10_000.0, gain_db: 1.0, q: 0.7 },
            ],
            master_gain_db: 0.0,
            limiter_threshold_db: -1.0,
            limiter_release_ms: 80.0,
            echo: EchoSettings::default(),
        }
    }
}

impl SynthSettings {
    pub fn validate(&self) -> Result<(), SynthError> {
        for b in self.strips.iter().flat_map(|s| s.eq.iter()).chain(self.master_eq.iter()) {
            design_peaking_eq(b.freq, if b.gain_db == 0.0 { 1.0 } else { b.gain_db }, b.q, SAMPLE_RATE)?;
        }
        Ok(())
    }
}

fn pan_gains(pan: f64) -> (f64, f64) {
    let theta = (pan.clamp(-1.0, 1.0) + 1.0) * FRAC_PI_4;
    (theta.cos(), theta.sin())
}

fn perc_kind(track: Track, variant: u8) -> PercKind {
    match (track, variant) {
        (Track::Kick, _) => PercKind::Kick,
        (Track::Snare, _) => PercKind::Snare,
        (Track::Hat, 1) => PercKind::Ride,
        (Track::Hat, _) => PercKind::Hat,
        _ => PercKind::Block,
    }
}

const PERC_LEVEL: [f64; 4] = [0.6, 0.45, 0.18, 0.25];

#[derive(Debug, Clone)]
struct Strip {
    gain: f64,
    pan: (f64, f64),
    mute: bool,
    send: f64,
    eq: ParametricEq,
    comp: Compressor,
}

impl Strip {
    fn new(s: &StripSettings) -> Result<Self, SynthError> {
        Ok(Self {
            gain: db_to_gain(s.gain_db),
            pan: pan_gains(s.pan),
            mute: s.mute,
            send: s.echo_send,
            eq: ParametricEq::new(&s.eq, SAMPLE_RATE)?,
            comp: Compressor::new(s.compressor),
        })
    }

    fn update(&mut self, s: &StripSettings) -> Result<(), SynthError> {
        self.eq.update(&s.eq, SAMPLE_RATE)?;
        self.comp.update(s.compressor);
        self.gain = db_to_gain(s.gain_db);
        self.pan = pan_gains(s.pan);
        self.mute = s.mute;
        self.send = s.echo_send;
        Ok(())
    }
}

/// The whole audio engine. Rendering allocates nothing and takes no locks.
#[derive(Debug, Clone)]
pub struct Synth {
    settings: SynthSettings,
    tempo: f64,
    variants: [u8; 8],
    perc: [[PercVoice; MAX_VOICES]; 4],
    pitched: [[PitchedVoice; MAX_VOICES]; 4],
    strips: [Strip; Track::COUNT],
    master_eq: [ParametricEq; 2],
    master_gain: f64,
    limiter: Limiter,
    echo: Echo,
    noise: Noise,
    strat: StrategyState,
    cue_voice: PercVoice,
    tone_phase: f64,
    siren_phase: f64,
    siren_lfo: f64,
    track_buf: [f64; BLOCK_FRAMES],
    bus: [[f64; 2]; BLOCK_FRAMES],
    send: [[f64; 2]; BLOCK_FRAMES],
    ratio: [f64; BLOCK_FRAMES],
}

impl Synth {
    pub fn new(settings: SynthSettings, tempo: f64) -> Result<Self, SynthError> {
        let strips = [0, 1, 2, 3, 4, 5, 6, 7].map(|i| Strip::new(&settings.strips[i]));
        let strips = match strips.iter().position(Result::is_err) {
            Some(i) => return Err(Strip::new(&settings.strips[i]).unwrap_err()),
            None => strips.map(Result::unwrap),
        };
        let mut echo = Echo::new(settings.echo.beats.max(2.0));
        echo.set_delay(tempo, settings.echo.beats);
        let variants = [0; 8];
        Ok(Self {
            perc: [0, 1, 2, 3].map(|t| {
                let track = Track::ALL[t];
                std::array::from_fn(|_| PercVoice::new(perc_kind(track, variants[t])))
            }),
            pitched: Default::default(),
            strips,
            master_eq: [
                ParametricEq::new(&settings.master_eq, SAMPLE_RATE)?,
                ParametricEq::new(&settings.master_eq, SAMPLE_RATE)?,
            ],
            master_gain: db_to_gain(settings.master_gain_db),
            limiter: Limiter::new(settings.limiter_threshold_db, settings.limiter_release_ms),
            echo,
            noise: Noise::new(0x5eed_1234),
            strat: StrategyState::default(),
            cue_voice: PercVoice::new(PercKind::Bell),
            tone_phase: 0.0,
            siren_phase: 0.0,
            siren_lfo: 0.0,
            track_buf: [0.0; BLOCK_FRAMES],
            bus: [[0.0; 2]; BLOCK_FRAMES],
            send: [[0.0; 2]; BLOCK_FRAMES],
            ratio: [1.0; BLOCK_FRAMES],
            settings,
            tempo,
            variants,
        })
    }

    pub fn settings(&self) -> &SynthSettings {
        &self.settings
    }

    /// Apply new mix settings at a block boundary.
    pub fn update_settings(&mut self, settings: &SynthSettings) -> Result<(), SynthError> {
        settings.validate()?;
        for (strip, s) in self.strips.iter_mut().zip(&settings.strips) {
            strip.update(s)?;
        }
        for eq in &mut self.master_eq {
            eq.update(&settings.master_eq, SAMPLE_RATE)?;
        }
        self.master_gain = db_to_gain(settings.master_gain_db);
        self.limiter = Limiter::new(settings.limiter_threshold_db, settings.limiter_release_ms);
        self.echo.set_delay(self.tempo, settings.echo.beats);
        self.settings = settings.clone();
        Ok(())
    }

    pub fn tempo(&self) -> f64 {
        self.tempo
    }

    /// Envelope and echo times follow the tempo.
    pub fn set_tempo(&mut self, tempo: f64) {
        if tempo != self.tempo {
            self.tempo = tempo;
            self.echo.set_delay(tempo, self.settings.echo.beats);
        }
    }

    pub fn echo_delay_samples(&self) -> usize {
        self.echo.delay_samples()
    }

    pub fn set_variants(&mut self, variants: [u8; 8]) {
        self.variants = variants;
        for t in 0..4 {
            let kind = perc_kind(Track::ALL[t], variants[t]);
            for v in &mut self.perc[t] {
                v.set_kind(kind);
            }
        }
    }

    /// Release every sounding pitched note (transport stop, song change).
    pub fn all_notes_off(&mut self) {
        for v in self.pitched.iter_mut().flatten() {
            v.note_off();
        }
    }

    pub fn active_voices(&self, track: Track) -> usize {
        let t = track.index();
        if track.is_percussive() {
            self.perc[t].iter().filter(|v| v.is_active()).count()
        } else {
            self.pitched[t - 4].iter().filter(|v| v.is_held()).count()
        }
    }

    fn beat_ms(&self) -> f64 {
        60_000.0 / self.tempo
    }

    fn handle_event(&mut self, ev: &MusicEvent) {
        let t = ev.track.index();
        let slot = usize::from(ev.voice).min(MAX_VOICES - 1);
        if ev.track.is_percussive() {
            if ev.kind == EventKind::NoteOn {
                let replaced = self.strat.drums_replaced && matches!(ev.track, Track::Kick | Track::Snare);
                if !replaced {
                    self.perc[t][slot].trigger(PERC_LEVEL[t] * f64::from(ev.velocity) / 127.0);
                }
            }
            return;
        }
        let beat_ms = self.beat_ms();
        let patch = self.settings.patches[t - 4];
        let v = &mut self.pitched[t - 4][slot];
        match ev.kind {
            EventKind::NoteOn => {
                let pitch = match (ev.track, self.strat.melody_pitch) {
                    (Track::Melody, Some(p)) => p,
                    _ => ev.pitch,
                };
                v.note_on(pitch, ev.velocity, &patch, beat_ms);
            }
            EventKind::NoteOff => {
                let routed = ev.track == Track::Melody && self.strat.melody_pitch.is_some();
                if v.is_held() && (v.pitch() == ev.pitch || routed) {
                    v.note_off();
                }
            }
        }
    }

    fn render_voices(&mut self, t: usize, from: usize, to: usize) {
        if t < 4 {
            for v in &mut self.perc[t] {
                if v.is_active() {
                    for y in &mut self.track_buf[from..to] {
                        *y += v.next(&mut self.noise);
                    }
                }
            }
        } else {
            let patch = self.settings.patches[t - 4];
            for v in &mut self.pitched[t - 4] {
                if v.is_active() {
                    for (y, r) in self.track_buf[from..to].iter_mut().zip(&self.ratio[from..to]) {
                        *y += v.next(&patch, *r);
                    }
                }
            }
        }
    }

    /// Pitch ratio per frame from dissonance and skew; `false` when both are idle.
    fn fill_ratio(&mut self, track: Track) -> bool {
        let detune = matches!(track, Track::Chord | Track::Melody) && !self.strat.dissonance_cents.is_steady_at(0.0);
        let skew = track == Track::Melody && !self.strat.skew_semitones.is_steady_at(0.0);
        if !detune && !skew {
            self.ratio.fill(1.0);
            return false;
        }
        for (i, r) in self.ratio.iter_mut().enumerate() {
            let mut cents = 0.0;
            if detune {
                cents += self.strat.dissonance_cents.at_frame(i);
            }
            if skew {
                cents += 100.0 * self.strat.skew_semitones.at_frame(i);
            }
            *r = (cents / 1200.0).exp2();
        }
        true
    }

    fn render_track(&mut self, t: usize, events: &[BlockEvent]) {
        let track = Track::ALL[t];
        self.track_buf.fill(0.0);
        self.fill_ratio(track);
        let mut pos = 0;
        for be in events.iter().filter(|e| e.event.track == track) {
            let at = (be.offset as usize).clamp(pos, BLOCK_FRAMES);
            self.render_voices(t, pos, at);
            self.handle_event(&be.event);
            pos = at;
        }
        self.render_voices(t, pos, BLOCK_FRAMES);
        let strip = &mut self.strips[t];
        if strip.mute {
            return;
        }
        let gate = self.strat.track_gate[t];
        let gated = !gate.is_steady_at(1.0);
        for (i, x) in self.track_buf.iter().enumerate() {
            let mut y = strip.comp.process(strip.eq.process(*x * strip.gain)).clamp(-1.0, 1.0);
            if gated {
                y *= gate.at_frame(i);
            }
            self.bus[i][0] += y * strip.pan.0;
            self.bus[i][1] += y * strip.pan.1;
            if strip.send != 0.0 {
                self.send[i][0] += y * strip.send * strip.pan.0;
                self.send[i][1] += y * strip.send * strip.pan.1;
            }
        }
    }

    fn trigger_one_shots(&mut self) {
        if let Some(foot) = self.strat.drum_hit {
            let (track, vel) = match foot {
                Foot::Left => (Track::Kick, 1.0),
                Foot::Right => (Track::Snare, 1.0),
            };
            let t = track.index();
            let slot = self.perc[t].iter().position(|v| !v.is_active()).unwrap_or(0);
            self.perc[t][slot].trigger(PERC_LEVEL[t] * vel);
        }
        if let Some(cue) = self.strat.cue {
            self.cue_voice.set_kind(match cue {
                CueKind::Bell => PercKind::Bell,
                CueKind::Sweep => PercKind::Sweep,
            });
            self.cue_voice.trigger(0.5);
        }
    }

    /// Render one block. `events` are expected in offset order; `controls` are
    /// the strategy targets for this block (absent strategies ramp to neutral).
    pub fn render_block(&mut self, events: &[BlockEvent], controls: &[StrategyControl]) -> AudioBlock {
        self.strat.begin_block(controls);
        if let Some(p) = self.strat.melody_pitch {
            for v in &mut self.pitched[Track::Melody.index() - 4] {
                if v.is_held() && v.pitch() != p {
                    v.retune(p);
                }
            }
        }
        self.trigger_one_shots();
        self.bus = [[0.0; 2]; BLOCK_FRAMES];
        self.send = [[0.0; 2]; BLOCK_FRAMES];
        for t in 0..Track::COUNT {
            self.render_track(t, events);
        }

        let mix = self.settings.echo.mix;
        let fb = self.settings.echo.feedback;
        let music_gate = self.strat.music_gate;
        let gated = !music_gate.is_steady_at(1.0);
        let tone_on = !self.strat.tone_amp.is_steady_at(0.0);
        let siren_on = !self.strat.siren_level.is_steady_at(0.0);
        let siren_amp = db_to_gain(SIREN_MAX_DB);
        let mut out = AudioBlock::SILENT;
        for i in 0..BLOCK_FRAMES {
            let wet = self.echo.process(self.send[i], fb);
            let mut l = self.bus[i][0] + mix * wet[0];
            let mut r = self.bus[i][1] + mix * wet[1];
            if gated {
                let g = music_gate.at_frame(i);
                l *= g;
                r *= g;
            }
            if tone_on {
                let y = self.strat.tone_amp.at_frame(i) * (TAU * self.tone_phase).sin();
                self.tone_phase = (self.tone_phase + self.strat.tone_hz / SAMPLE_RATE).fract();
                l += y;
                r += y;
            }
            if siren_on {
                let f = if self.siren_lfo < 0.5 { SIREN_TONES_HZ.0 } else { SIREN_TONES_HZ.1 };
                self.siren_lfo = (self.siren_lfo + SIREN_RATE_HZ / SAMPLE_RATE).fract();
                self.siren_phase = (self.siren_phase + f / SAMPLE_RATE).fract();
                let y = siren_amp * self.strat.siren_level.at_frame(i) * (TAU * self.siren_phase).sin();
                let (gl, gr) = pan_gains(self.strat.siren_pan.at_frame(i));
                l += y * gl;
                r += y * gr;
            }
            if self.cue_voice.is_active() {
                let y = self.cue_voice.next(&mut self.noise);
                l += y;
                r += y;
            }
            l = self.master_eq[0].process(l * self.master_gain);
            r = self.master_eq[1].process(r * self.master_gain);
            let (l, r) = self.limiter.process(l, r);
            out.frames[i] = [l as f32, r as f32];
        }
        self.strat.end_block();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequencer::Track;

    fn synth() -> Synth {
        Synth::new(SynthSettings::default(), 120.0).unwrap()
    }

    fn on(track: Track, pitch: u8, offset: u32) -> BlockEvent {
        BlockEvent {
            offset,
            event: MusicEvent {
                kind: EventKind::NoteOn,
                track,
                pitch,
                velocity: 110,
                voice: 0,
                t_tick: 0,
            },
        }
    }

    #[test]
    fn silence_in_silence_out() {
        let mut s = synth();
        for _ in 0..50 {
            assert!(s.render_block(&[], &[]).is_silent());
        }
    }

    #[test]
    fn render_is_deterministic() {
        let ev = [on(Track::Kick, 36, 0), on(Track::Melody, 72, 100), on(Track::Hat, 42, 300)];
        let ctl = [StrategyControl::new(Strategy::MusicDissonance, 0.7)];
        let mut a = synth();
        let mut b = a.clone();
        for k in 0..30 {
            let e: &[BlockEvent] = if k == 0 { &ev } else { &[] };
            assert_eq!(a.render_block(e, &ctl), b.render_block(e, &ctl));
        }
    }

    #[test]
    fn every_neutral_strategy_is_bit_identical_to_none() {
        let ev = [on(Track::Kick, 36, 0), on(Track::Chord, 60, 10), on(Track::Melody, 72, 200), on(Track::Snare, 38, 400)];
        for s in Strategy::ALL {
            let ctl = [StrategyControl::neutral(s)];
            let mut clean = synth();
            let mut with = synth();
            for k in 0..40 {
                let e: &[BlockEvent] = if k % 10 == 0 { &ev } else { &[] };
                assert_eq!(clean.render_block(e, &[]), with.render_block(e, &ctl), "{s}");
            }
        }
    }

    #[test]
    fn output_bounded_under_overload() {
        let mut settings = SynthSettings::default();
        for st in &mut settings.strips {
            st.gain_db = 30.0;
        }
        let mut s = Synth::new(settings, 120.0).unwrap();
        let mut ev = Vec::new();
        for t in Track::ALL {
            for v in 0..4 {
                let mut e = on(t, 40 + 7 * v, 0);
                e.event.voice = v;
                ev.push(e);
            }
        }
        let ctl = [
            StrategyControl::new(Strategy::DisturbanceTone, 1.0),
            StrategyControl::new(Strategy::AmbulanceSiren, 1.0),
        ];
        for k in 0..20 {
            let b = s.render_block(if k == 0 { &ev } else { &[] }, &ctl);
            for f in &b.frames {
                assert!(f[0].is_finite() && f[1].is_finite());
                assert!(f[0].abs() <= 1.0 && f[1].abs() <= 1.0);
            }
        }
    }

    #[test]
    fn music_stop_fades_within_one_block() {
        let mut s = synth();
        let mut ev = vec![on(Track::Pad, 60, 0)];
        ev[0].event.velocity = 127;
        s.render_block(&ev, &[]);
        for _ in 0..30 {
            s.render_block(&[], &[]);
        }
        let ctl = [StrategyControl::new(Strategy::MusicStop, 1.0)];
        s.render_block(&[], &ctl);
        // Master EQ and echo tails ring briefly; the gate itself is closed.
        let b = s.render_block(&[], &ctl);
        assert!(b.peak() < 1e-3, "{}", b.peak());
    }

    #[test]
    fn pan_law_is_constant_power() {
        for p in [-1.0, -0.3, 0.0, 0.5, 1.0] {
            let (l, r) = pan_gains(p);
            assert!((l * l + r * r - 1.0).abs() < 1e-12);
        }
        let (l, r) = pan_gains(1.0);
        assert!(l < 1e-12 && (r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn drum_trigger_replaces_sequenced_kick() {
        let mut s = synth();
        let ctl = [StrategyControl::new(Strategy::DrumTrigger, 1.0)];
        let b = s.render_block(&[on(Track::Kick, 36, 0)], &ctl);
        assert!(b.is_silent());
        let mut p = StrategyParams::default();
        p.foot = Some(Foot::Left);
        let b = s.render_block(&[], &[ctl[0].with_params(p)]);
        assert!(b.peak() > 0.05);
    }

    #[test]
    fn melody_degree_retunes_held_note() {
        let mut s = synth();
        s.render_block(&[on(Track::Melody, 60, 0)], &[]);
        let mut c = StrategyControl::new(Strategy::MelodyDegree, 1.0);
        c.params.degree = 4;
        c.params.root_octave = 4;
        s.render_block(&[], &[c]);
        assert_eq!(s.pitched[Track::Melody.index() - 4][0].pitch(), 67);
    }
}
