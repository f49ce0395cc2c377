use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::dsp::{Biquad, BiquadCoeffs};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EqBand {
    pub freq: f64,
    pub gain_db: f64,
    pub q: f64,
}

impl EqBand {
    pub const fn flat(freq: f64) -> Self {
        Self {
            freq,
            gain_db: 0.0,
            q: 1.0,
        }
    }
}

/// Peaking (bell) biquad from the audio-EQ cookbook.
pub fn design_peaking_eq(freq: f64, gain_db: f64, q: f64, fs: f64) -> Result<BiquadCoeffs, SynthError> {
    if !(freq > 0.0 && freq < fs / 2.0) {
        return Err(SynthError::InvalidFreq(freq));
    }
    if !(q > 0.0) || !gain_db.is_finite() {
        return Err(SynthError::InvalidEq);
    }
    let a = 10f64.powf(gain_db / 40.0);
    let w0 = 2.0 * PI * freq / fs;
    let alpha = w0.sin() / (2.0 * q);
    let cw = w0.cos();
    let a0 = 1.0 + alpha / a;
    Ok(BiquadCoeffs {
        b0: (1.0 + alpha * a) / a0,
        b1: -2.0 * cw / a0,
        b2: (1.0 - alpha * a) / a0,
        a1: -2.0 * cw / a0,
        a2: (1.0 - alpha / a) / a0,
    })
}

/// Four peaking bands in series; 0 dB bands are skipped entirely.
#[derive(Debug, Clone)]
pub struct ParametricEq {
    bands: [Option<Biquad>; 4],
}

impl ParametricEq {
    pub fn new(bands: &[EqBand; 4], fs: f64) -> Result<Self, SynthError> {
        let mut out = [None; 4];
        for (slot, b) in out.iter_mut().zip(bands) {
            if b.gain_db != 0.0 {
                *slot = Some(Biquad::new(design_peaking_eq(b.freq, b.gain_db, b.q, fs)?));
            }
        }
        Ok(Self { bands: out })
    }

    /// Swap coefficients in place, keeping filter state for unchanged bands.
    pub fn update(&mut self, bands: &[EqBand; 4], fs: f64) -> Result<(), SynthError> {
        for (slot, b) in self.bands.iter_mut().zip(bands) {
            if b.gain_db == 0.0 {
                *slot = None;
                continue;
            }
            let c = design_peaking_eq(b.freq, b.gain_db, b.q, fs)?;
            match slot {
                Some(bq) => bq.set_coeffs(c),
                None => *slot = Some(Biquad::new(c)),
            }
        }
        Ok(())
    }

    pub fn is_bypassed(&self) -> bool {
        self.bands.iter().all(Option::is_none)
    }

    #[inline]
    pub fn process(&mut self, x: f64) -> f64 {
        let mut y = x;
        for b in self.bands.iter_mut().flatten() {
            y = b.process(y);
        }
        y
    }
}
