//! Raw samples to calibrated, filtered movement parameters at the feedback rate.

mod calibration;
mod filter;
mod jerk;
mod step;
mod tilt;

pub use calibration::{calibrate_bias, Bias, MAX_STATIONARY_GYRO_STD, MIN_CALIBRATION_SAMPLES};
pub use filter::{
    cascade_magnitude, condition_signal, design_butterworth, FilterSpec, Lowpass, MedianFilter,
    SignalConditioner, LP_ORDER, LP_SECTIONS,
};
pub use jerk::{compute_jerk, JerkEstimator, G_TO_MS2};
pub use step::{detect_step, Foot, StepDetector, StepDetectorConfig, StepEvent};
pub use tilt::{accel_tilt, estimate_tilt, TiltEstimator, DEFAULT_ALPHA};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::osc::ImuSample;

/// Feedback (mapping) rate.
pub const MBF_RATE_HZ: f64 = 100.0;
pub const MBF_PERIOD_MS: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MotionError {
    #[error("cutoff {cutoff} Hz is outside (0, {rate}/2)")]
    InvalidCutoff { cutoff: f64, rate: f64 },
    #[error("median length {0} must be odd and >= 1")]
    InvalidMedianLength(usize),
    #[error("device not stationary: gyro std-dev {0:.2} deg/s")]
    NotStationary(f64),
    #[error("need at least {needed} samples for calibration, got {got}")]
    TooFewSamples { needed: usize, got: usize },
}

/// Derived quantities for one feedback tick.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MovementState {
    /// Mediolateral tilt, deg (+ = right lean).
    pub tilt_ml: f64,
    /// Anteroposterior tilt, deg (+ = forward flexion).
    pub tilt_ap: f64,
    /// Trunk projection on the ML/AP plane, deg.
    pub pos2d: (f64, f64),
    /// Smoothed squared jerk, (m/s^3)^2.
    pub jerk_sq: f64,
    pub step_event: Option<StepEvent>,
    pub flexion_angle: f64,
}

/// Per-parameter conditioning defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSettings {
    pub tilt: FilterSpec,
    pub jerk: FilterSpec,
    pub step: StepDetectorConfig,
    pub complementary_alpha: f64,
}

impl Default for FilterSettings {
    fn default() -> Self {
        Self {
            tilt: FilterSpec::new(3, 8.0, MBF_RATE_HZ),
            jerk: FilterSpec::new(3, 8.0, MBF_RATE_HZ),
            step: StepDetectorConfig::default(),
            complementary_alpha: DEFAULT_ALPHA,
        }
    }
}

fn corrected(sample: &ImuSample, bias: &Bias) -> ([f64; 3], [f64; 3]) {
    let a = sample.acc_f64();
    let g = sample.gyro_f64();
    (
        [a[0] - bias.acc[0], a[1] - bias.acc[1], a[2] - bias.acc[2]],
        [g[0] - bias.gyro[0], g[1] - bias.gyro[1], g[2] - bias.gyro[2]],
    )
}

/// Trunk sensor chain: tilt (complementary filter, then conditioning) and jerk.
#[derive(Debug, Clone)]
pub struct TrunkPipeline {
    tilt: TiltEstimator,
    cond_ml: SignalConditioner,
    cond_ap: SignalConditioner,
    jerk: JerkEstimator,
    state: MovementState,
}

impl TrunkPipeline {
    pub fn new(settings: &FilterSettings) -> Result<Self, MotionError> {
        Ok(Self {
            tilt: TiltEstimator::new(settings.complementary_alpha),
            cond_ml: SignalConditioner::new(settings.tilt)?,
            cond_ap: SignalConditioner::new(settings.tilt)?,
            jerk: JerkEstimator::new(settings.jerk)?,
            state: MovementState::default(),
        })
    }

    /// Process one sample taken at the feedback tick; `dt_s` is the tick spacing.
    pub fn process(&mut self, sample: &ImuSample, bias: &Bias, dt_s: f64) -> MovementState {
        let (acc, gyro) = corrected(sample, bias);
        let (ml, ap) = self.tilt.update(acc, gyro, dt_s);
        let tilt_ml = self.cond_ml.process(ml).clamp(-90.0, 90.0);
        let tilt_ap = self.cond_ap.process(ap).clamp(-90.0, 90.0);
        let jerk_sq = self.jerk.process(acc, dt_s);
        self.state = MovementState {
            tilt_ml,
            tilt_ap,
            pos2d: (tilt_ml, tilt_ap),
            jerk_sq,
            step_event: None,
            flexion_angle: tilt_ap,
        };
        self.state
    }

    pub fn state(&self) -> MovementState {
        self.state
    }
}

/// Leg sensor chain: footfall detection on bias-corrected acceleration magnitude.
#[derive(Debug, Clone)]
pub struct LegPipeline {
    detector: StepDetector,
}

impl LegPipeline {
    pub fn new(foot: Foot, cfg: StepDetectorConfig) -> Result<Self, MotionError> {
        Ok(Self {
            detector: StepDetector::new(foot, cfg)?,
        })
    }

    pub fn process(&mut self, sample: &ImuSample, bias: &Bias) -> Option<StepEvent> {
        let (acc, _) = corrected(sample, bias);
        let mag = (acc[0] * acc[0] + acc[1] * acc[1] + acc[2] * acc[2]).sqrt();
        self.detector.process(sample.t_rx, mag)
    }
}
