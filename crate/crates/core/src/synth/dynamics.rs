use serde::{Deserialize, Serialize};

use super::SAMPLE_RATE;

/// Static compressor curve: gain change in dB (zero or negative).
pub fn compressor_gain(level_db: f64, threshold_db: f64, ratio: f64) -> f64 {
    if level_db <= threshold_db || ratio <= 1.0 {
        return 0.0;
    }
    -(level_db - threshold_db) * (1.0 - 1.0 / ratio)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompressorSettings {
    pub threshold_db: f64,
    pub ratio: f64,
    pub attack_ms: f64,
    pub release_ms: f64,
}

impl CompressorSettings {
    pub const OFF: Self = Self {
        threshold_db: 0.0,
        ratio: 1.0,
        attack_ms: 5.0,
        release_ms: 50.0,
    };
}

fn smoothing_coef(ms: f64) -> f64 {
    if ms <= 0.0 {
        0.0
    } else {
        (-1.0 / (ms * 1e-3 * SAMPLE_RATE)).exp()
    }
}

/// Feed-forward peak compressor with first-order attack/release on the gain reduction.
#[derive(Debug, Clone)]
pub struct Compressor {
    settings: CompressorSettings,
    attack: f64,
    release: f64,
    gr_db: f64,
}

impl Compressor {
    pub fn new(settings: CompressorSettings) -> Self {
        Self {
            settings,
            attack: smoothing_coef(settings.attack_ms),
            release: smoothing_coef(settings.release_ms),
            gr_db: 0.0,
        }
    }

    pub fn update(&mut self, settings: CompressorSettings) {
        self.settings = settings;
        self.attack = smoothing_coef(settings.attack_ms);
        self.release = smoothing_coef(settings.release_ms);
    }

    pub fn gain_reduction_db(&self) -> f64 {
        self.gr_db
    }

    #[inline]
    pub fn process(&mut self, x: f64) -> f64 {
        if self.settings.ratio <= 1.0 {
            return x;
        }
        let level_db = 20.0 * (x.abs() + 1e-12).log10();
        let target = compressor_gain(level_db, self.settings.threshold_db, self.settings.ratio);
        let coef = if target < self.gr_db { self.attack } else { self.release };
        self.gr_db = target + (self.gr_db - target) * coef;
        if self.gr_db == 0.0 {
            return x;
        }
        x * (self.gr_db * (std::f64::consts::LN_10 / 20.0)).exp()
    }
}

/// Stereo-linked peak limiter with instant attack and a final hard clip at ±1.
#[derive(Debug, Clone)]
pub struct Limiter {
    threshold: f64,
    release: f64,
    gain: f64,
}

impl Limiter {
    pub fn new(threshold_db: f64, release_ms: f64) -> Self {
        Self {
            threshold: crate::dsp::db_to_gain(threshold_db.min(0.0)),
            release: smoothing_coef(release_ms),
            gain: 1.0,
        }
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    #[inline]
    pub fn process(&mut self, l: f64, r: f64) -> (f64, f64) {
        let peak = l.abs().max(r.abs());
        let target = if peak > self.threshold { self.threshold / peak } else { 1.0 };
        if target < self.gain {
            self.gain = target;
        } else {
            self.gain = target + (self.gain - target) * self.release;
            if 1.0 - self.gain < 1e-9 {
                self.gain = 1.0;
            }
        }
        if self.gain == 1.0 {
            return (l.clamp(-1.0, 1.0), r.clamp(-1.0, 1.0));
        }
        ((l * self.gain).clamp(-1.0, 1.0), (r * self.gain).clamp(-1.0, 1.0))
    }
}
