use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use super::SAMPLE_RATE;

pub fn midi_to_hz(pitch: f64) -> f64 {
    440.0 * ((pitch - 69.0) / 12.0).exp2()
}

/// xorshift32 white noise in [-1, 1).
#[derive(Debug, Clone)]
pub struct Noise(u32);

impl Noise {
    pub fn new(seed: u32) -> Self {
        Self(seed.max(1))
    }

    pub fn next(&mut self) -> f64 {
        let mut x = self.0;
        x ^= x << 13;
        x ^= x >> 17;
        x ^= x << 5;
        self.0 = x;
        f64::from(x) / 2_147_483_648.0 - 1.0
    }
}

fn decay_coef(tau_s: f64) -> f64 {
    (-1.0 / (tau_s * SAMPLE_RATE)).exp()
}

/// One-pole highpass used for noise shaping.
#[derive(Debug, Clone, Copy, Default)]
struct OnePoleHp {
    a: f64,
    x1: f64,
    y1: f64,
}

impl OnePoleHp {
    fn new(fc: f64) -> Self {
        Self {
            a: (-TAU * fc / SAMPLE_RATE).exp(),
            ..Default::default()
        }
    }

    fn process(&mut self, x: f64) -> f64 {
        let y = self.a * (self.y1 + x - self.x1);
        self.x1 = x;
        self.y1 = y;
        y
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PercKind {
    Kick,
    Snare,
    Hat,
    Ride,
    Block,
    Bell,
    Sweep,
}

/// Synthesized one-shot percussion.
#[derive(Debug, Clone)]
pub struct PercVoice {
    kind: PercKind,
    active: bool,
    n: u32,
    amp: f64,
    env: f64,
    env2: f64,
    d1: f64,
    d2: f64,
    phase: f64,
    hp: OnePoleHp,
    bp: [f64; 2],
}

impl PercVoice {
    pub fn new(kind: PercKind) -> Self {
        Self {
            kind,
            active: false,
            n: 0,
            amp: 0.0,
            env: 0.0,
            env2: 0.0,
            d1: 0.0,
            d2: 0.0,
            phase: 0.0,
            hp: OnePoleHp::default(),
            bp: [0.0; 2],
        }
    }

    pub fn is_active(&self) -> bool {
        self.active
    }

    pub fn set_kind(&mut self, kind: PercKind) {
        self.kind = kind;
    }

    pub fn trigger(&mut self, amp: f64) {
        let (t1, t2, hp) = match self.kind {
            PercKind::Kick => (0.28, 0.004, 0.0),
            PercKind::Snare => (0.12, 0.07, 1200.0),
            PercKind::Hat => (0.035, 0.0, 7000.0),
            PercKind::Ride => (0.35, 0.0, 5000.0),
            PercKind::Block => (0.05, 0.0, 0.0),
            PercKind::Bell => (0.6, 0.15, 0.0),
            PercKind::Sweep => (0.18, 0.0, 0.0),
        };
        self.active = true;
        self.n = 0;
        self.amp = amp;
        self.env = 1.0;
        self.env2 = 1.0;
        self.d1 = decay_coef(t1);
        self.d2 = if t2 > 0.0 { decay_coef(t2) } else { 0.0 };
        self.phase = 0.0;
        self.hp = if hp > 0.0 { OnePoleHp::new(hp) } else { OnePoleHp::default() };
        self.bp = [0.0; 2];
    }

    pub fn next(&mut self, noise: &mut Noise) -> f64 {
        if !self.active {
            return 0.0;
        }
        let t = f64::from(self.n) / SAMPLE_RATE;
        let y = match self.kind {
            PercKind::Kick => {
                let f = 48.0 + 110.0 * (-t / 0.035).exp();
                self.phase += f / SAMPLE_RATE;
                (TAU * self.phase).sin() * self.env + 0.4 * noise.next() * self.env2
            }
            PercKind::Snare => {
                self.phase += 185.0 / SAMPLE_RATE;
                0.7 * self.hp.process(noise.next()) * self.env + 0.5 * (TAU * self.phase).sin() * self.env2
            }
            PercKind::Hat | PercKind::Ride => self.hp.process(noise.next()) * self.env,
            PercKind::Block => {
                self.phase += 820.0 / SAMPLE_RATE;
                (TAU * self.phase).sin() * self.env
            }
            PercKind::Bell => {
                self.phase += 1318.5 / SAMPLE_RATE;
                let p = TAU * self.phase;
                p.sin() * self.env + 0.5 * (p * 2.76).sin() * self.env2
            }
            PercKind::Sweep => {
                // Resonant bandpass swept upward over noise.
                let fc = 400.0 * (1.0 + 8.0 * t / 0.35);
                let g = (PI * fc.min(18_000.0) / SAMPLE_RATE).tan();
                let k = 0.25;
                let [ic1, ic2] = self.bp;
                let v1 = (ic1 + g * (noise.next() - ic2)) / (1.0 + g * (g + k));
                let v2 = ic2 + g * v1;
                self.bp = [2.0 * v1 - ic1, 2.0 * v2 - ic2];
                0.6 * v1 * self.env
            }
        };
        self.env *= self.d1;
        self.env2 *= self.d2;
        self.n = self.n.saturating_add(1);
        if self.env < 1e-5 {
            self.active = false;
        }
        y * self.amp
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdsrSpec {
    pub attack_ms: f64,
    pub decay_ms: f64,
    pub sustain: f64,
    pub release_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Stage {
    Idle,
    Attack,
    Decay,
    Sustain,
    Release,
}

#[derive(Debug, Clone)]
pub struct Adsr {
    stage: Stage,
    level: f64,
    attack_step: f64,
    decay_coef: f64,
    release_coef: f64,
    sustain: f64,
}

impl Adsr {
    fn new() -> Self {
        Self {
            stage: Stage::Idle,
            level: 0.0,
            attack_step: 1.0,
            decay_coef: 0.0,
            release_coef: 0.0,
            sustain: 1.0,
        }
    }

    fn start(&mut self, spec: &AdsrSpec) {
        let samples = spec.attack_ms * 1e-3 * SAMPLE_RATE;
        self.attack_step = if samples >= 1.0 { 1.0 / samples } else { 1.0 };
        self.decay_coef = decay_coef((spec.decay_ms * 1e-3).max(1e-4) / 4.0);
        self.release_coef = decay_coef((spec.release_ms * 1e-3).max(1e-4) / 4.0);
        self.sustain = spec.sustain.clamp(0.0, 1.0);
        self.stage = Stage::Attack;
    }

    fn release(&mut self) {
        if self.stage != Stage::Idle {
            self.stage = Stage::Release;
        }
    }

    fn next(&mut self) -> f64 {
        match self.stage {
            Stage::Idle => {}
            Stage::Attack => {
                self.level += self.attack_step;
                if self.level >= 1.0 {
                    self.level = 1.0;
                    self.stage = Stage::Decay;
                }
            }
            Stage::Decay => {
                self.level = self.sustain + (self.level - self.sustain) * self.decay_coef;
                if self.level - self.sustain < 1e-4 {
                    self.level = self.sustain;
                    self.stage = Stage::Sustain;
                }
            }
            Stage::Sustain => {}
            Stage::Release => {
                self.level *= self.release_coef;
                if self.level < 1e-4 {
                    self.level = 0.0;
                    self.stage = Stage::Idle;
                }
            }
        }
        self.level
    }
}

fn poly_blep(t: f64, dt: f64) -> f64 {
    if t < dt {
        let x = t / dt;
        x + x - x * x - 1.0
    } else if t > 1.0 - dt {
        let x = (t - 1.0) / dt;
        x * x + x + x + 1.0
    } else {
        0.0
    }
}

fn saw(phase: f64, dt: f64) -> f64 {
    2.0 * phase - 1.0 - poly_blep(phase, dt)
}

fn square(phase: f64, dt: f64) -> f64 {
    let p2 = (phase + 0.5).fract();
    saw(phase, dt) - saw(p2, dt)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Wave {
    Saw,
    Square,
}

impl Wave {
    fn sample(self, phase: f64, dt: f64) -> f64 {
        match self {
            Wave::Saw => saw(phase, dt),
            Wave::Square => square(phase, dt),
        }
    }
}

/// Timbre of a two-oscillator subtractive voice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatchSpec {
    pub osc1: Wave,
    pub osc2: Wave,
    /// Second oscillator offset in cents.
    pub detune_cents: f64,
    pub osc2_level: f64,
    pub cutoff_hz: f64,
    pub resonance: f64,
    pub level: f64,
    pub env: AdsrSpec,
    /// When set, attack and release are given in beats and follow the tempo.
    pub tempo_scaled: bool,
}

/// Two oscillators into a state-variable lowpass under an ADSR.
#[derive(Debug, Clone)]
pub struct PitchedVoice {
    pitch: u8,
    freq: f64,
    phases: [f64; 2],
    amp: f64,
    env: Adsr,
    g: f64,
    k: f64,
    ic: [f64; 2],
    held: bool,
}

impl PitchedVoice {
    pub fn new() -> Self {
        Self {
            pitch: 0,
            freq: 0.0,
            phases: [0.0; 2],
            amp: 0.0,
            env: Adsr::new(),
            g: 0.0,
            k: 1.0,
            ic: [0.0; 2],
            held: false,
        }
    }

    pub fn is_active(&self) -> bool {
        self.env.stage != Stage::Idle
    }

    pub fn pitch(&self) -> u8 {
        self.pitch
    }

    pub fn is_held(&self) -> bool {
        self.held
    }

    pub fn note_on(&mut self, pitch: u8, velocity: u8, patch: &PatchSpec, beat_ms: f64) {
        self.pitch = pitch;
        self.freq = midi_to_hz(f64::from(pitch));
        self.amp = patch.level * (f64::from(velocity) / 127.0);
        let mut env = patch.env;
        if patch.tempo_scaled {
            env.attack_ms *= beat_ms;
            env.release_ms *= beat_ms;
        }
        self.env.start(&env);
        let fc = (patch.cutoff_hz * (0.6 + 0.8 * f64::from(velocity) / 127.0)).min(0.45 * SAMPLE_RATE);
        self.g = (PI * fc / SAMPLE_RATE).tan();
        self.k = 1.0 / patch.resonance.max(0.5);
        self.held = true;
    }

    pub fn note_off(&mut self) {
        self.held = false;
        self.env.release();
    }

    pub fn retune(&mut self, pitch: u8) {
        self.pitch = pitch;
        self.freq = midi_to_hz(f64::from(pitch));
    }

    /// `ratio` scales the voice frequency (detune, transposition).
    pub fn next(&mut self, patch: &PatchSpec, ratio: f64) -> f64 {
        if !self.is_active() {
            return 0.0;
        }
        let f1 = self.freq * ratio;
        let f2 = f1 * (patch.detune_cents / 1200.0).exp2();
        let dt1 = f1 / SAMPLE_RATE;
        let dt2 = f2 / SAMPLE_RATE;
        let x = patch.osc1.sample(self.phases[0], dt1) + patch.osc2_level * patch.osc2.sample(self.phases[1], dt2);
        self.phases[0] = (self.phases[0] + dt1).fract();
        self.phases[1] = (self.phases[1] + dt2).fract();
        let [ic1, ic2] = self.ic;
        let v1 = (ic1 + self.g * (x - ic2)) / (1.0 + self.g * (self.g + self.k));
        let v2 = ic2 + self.g * v1;
        self.ic = [2.0 * v1 - ic1, 2.0 * v2 - ic2];
        v2 * self.env.next() * self.amp
    }
}

impl Default for PitchedVoice {
    fn default() -> Self {
        Self::new()
    }
}
