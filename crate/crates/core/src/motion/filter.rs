//! Signal conditioning: running median followed by a 6th-order Butterworth lowpass.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::MotionError;
use crate::dsp::{Biquad, BiquadCoeffs};

/// Butterworth order used for every conditioning stage.
pub const LP_ORDER: usize = 6;
pub const LP_SECTIONS: usize = LP_ORDER / 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    /// Running median window in samples (odd, >= 1).
    pub median_len: usize,
    /// Lowpass cutoff in Hz.
    pub lp_cutoff: f64,
    /// Sample rate in Hz.
    pub rate: f64,
}

impl FilterSpec {
    pub const fn new(median_len: usize, lp_cutoff: f64, rate: f64) -> Self {
        Self {
            median_len,
            lp_cutoff,
            rate,
        }
    }

    pub fn validate(&self) -> Result<(), MotionError> {
        if self.median_len == 0 || self.median_len % 2 == 0 {
            return Err(MotionError::InvalidMedianLength(self.median_len));
        }
        if !(self.rate > 0.0) || !(self.lp_cutoff > 0.0) || self.lp_cutoff >= self.rate / 2.0 {
            return Err(MotionError::InvalidCutoff {
                cutoff: self.lp_cutoff,
                rate: self.rate,
            });
        }
        Ok(())
    }
}

/// Design the lowpass as three cascaded second-order sections.
///
/// Each conjugate pole pair of the analog prototype `s^2 + 2 sin(t_k) s + 1`,
/// `t_k = (2k + 1) pi / 12`, is mapped through the bilinear transform with the
/// cutoff prewarped to `K = tan(pi fc / fs)`. Every section has unity DC gain.
pub fn design_butterworth(spec: &FilterSpec) -> Result<[BiquadCoeffs; LP_SECTIONS], MotionError> {
    spec.validate()?;
    let k = (PI * spec.lp_cutoff / spec.rate).tan();
    let k2 = k * k;
    let mut out = [BiquadCoeffs::IDENTITY; LP_SECTIONS];
    for (i, c) in out.iter_mut().enumerate() {
        let theta = PI * (2 * i + 1) as f64 / (2 * LP_ORDER) as f64;
        let damping = 2.0 * theta.sin();
        let a0 = 1.0 + damping * k + k2;
        *c = BiquadCoeffs {
            b0: k2 / a0,
            b1: 2.0 * k2 / a0,
            b2: k2 / a0,
            a1: 2.0 * (k2 - 1.0) / a0,
            a2: (1.0 - damping * k + k2) / a0,
        };
    }
    Ok(out)
}

/// Magnitude of a section cascade at `freq`.
pub fn cascade_magnitude(sections: &[BiquadCoeffs], freq: f64, fs: f64) -> f64 {
    sections.iter().map(|s| s.magnitude(freq, fs)).product()
}

/// Running median over the last `len` samples.
#[derive(Debug, Clone)]
pub struct MedianFilter {
    window: Vec<f64>,
    scratch: Vec<f64>,
    pos: usize,
    primed: bool,
}

impl MedianFilter {
    pub fn new(len: usize) -> Self {
        let len = len.max(1);
        Self {
            window: vec![0.0; len],
            scratch: vec![0.0; len],
            pos: 0,
            primed: false,
        }
    }

    pub fn process(&mut self, x: f64) -> f64 {
        if !self.primed {
            self.window.fill(x);
            self.primed = true;
        }
        self.window[self.pos] = x;
        self.pos = (self.pos + 1) % self.window.len();
        if self.window.len() == 1 {
            return x;
        }
        self.scratch.copy_from_slice(&self.window);
        self.scratch.sort_unstable_by(|a, b| a.total_cmp(b));
        self.scratch[self.scratch.len() / 2]
    }
}

/// Butterworth cascade on its own (used where no median stage is wanted).
#[derive(Debug, Clone)]
pub struct Lowpass {
    sections: [Biquad; LP_SECTIONS],
    primed: bool,
}

impl Lowpass {
    pub fn new(spec: &FilterSpec) -> Result<Self, MotionError> {
        let coeffs = design_butterworth(spec)?;
        Ok(Self {
            sections: coeffs.map(Biquad::new),
            primed: false,
        })
    }

    pub fn process(&mut self, x: f64) -> f64 {
        if !self.primed {
            for s in &mut self.sections {
                s.prime(x);
            }
            self.primed = true;
        }
        self.sections.iter_mut().fold(x, |acc, s| s.process(acc))
    }
}

/// Stateful median + lowpass conditioner for one scalar stream.
///
/// The first sample primes both stages to steady state so a constant input
/// passes through without a start-up transient.
#[derive(Debug, Clone)]
pub struct SignalConditioner {
    spec: FilterSpec,
    median: MedianFilter,
    lowpass: Lowpass,
}

impl SignalConditioner {
    pub fn new(spec: FilterSpec) -> Result<Self, MotionError> {
        Ok(Self {
            median: MedianFilter::new(spec.median_len),
            lowpass: Lowpass::new(&spec)?,
            spec,
        })
    }

    pub fn spec(&self) -> &FilterSpec {
        &self.spec
    }

    pub fn process(&mut self, x: f64) -> f64 {
        let m = self.median.process(x);
        self.lowpass.process(m)
    }
}

/// Run `x` through a fresh conditioner built from `spec`.
pub fn condition_signal(x: &[f64], spec: &FilterSpec) -> Result<Vec<f64>, MotionError> {
    let mut c = SignalConditioner::new(*spec)?;
    Ok(x.iter().map(|&v| c.process(v)).collect())
}
