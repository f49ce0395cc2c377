//! Movement parameter to feedback variable transforms and interaction geometry.

mod cues;
mod directional;
mod trajectory;
mod zones;

pub use cues::{reach_scale_degree, CueEvents, FlexionCueDetector};
pub use directional::{anticipated_error_feedback, logistic, sigmoid_sum, step_timing_error};
pub use trajectory::{trajectory_position, Trajectory, TrajectoryShape};
pub use zones::{allocate_zone, Zone, ZoneLayout};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MappingError {
    #[error("invalid mapping config: {0}")]
    ConfigInvalid(&'static str),
    #[error("invalid zone layout: {0}")]
    LayoutInvalid(&'static str),
    #[error("invalid trajectory: {0}")]
    TrajectoryInvalid(&'static str),
    #[error("parameter value is not finite")]
    NonFinite,
}

/// Target range, normalization extremes and output shaping for one parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MappingConfig {
    pub target_lo: f64,
    pub target_hi: f64,
    pub bound_lo: f64,
    pub bound_hi: f64,
    /// Power applied to the normalized error.
    pub gamma: f64,
    /// Number of output steps; 0 keeps the output continuous.
    pub quant_levels: u32,
    pub invert: bool,
    pub directional: bool,
}

impl MappingConfig {
    pub fn new(target: (f64, f64), bounds: (f64, f64)) -> Self {
        Self {
            target_lo: target.0,
            target_hi: target.1,
            bound_lo: bounds.0,
            bound_hi: bounds.1,
            gamma: 1.0,
            quant_levels: 0,
            invert: false,
            directional: false,
        }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn directional(mut self) -> Self {
        self.directional = true;
        self
    }

    pub fn target_center(&self) -> f64 {
        0.5 * (self.target_lo + self.target_hi)
    }

    pub fn validate(&self) -> Result<(), MappingError> {
        let vals = [
            self.target_lo,
            self.target_hi,
            self.bound_lo,
            self.bound_hi,
            self.gamma,
        ];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(MappingError::ConfigInvalid("non-finite field"));
        }
        if !(self.bound_lo < self.target_lo
            && self.target_lo <= self.target_hi
            && self.target_hi < self.bound_hi)
        {
            return Err(MappingError::ConfigInvalid(
                "need bound_lo < target_lo <= target_hi < bound_hi",
            ));
        }
        if self.gamma <= 0.0 {
            return Err(MappingError::ConfigInvalid("gamma must be > 0"));
        }
        Ok(())
    }
}

/// Normalized feedback intensity. For directional variables 0.5 is neutral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackVariable {
    pub value: f64,
    pub directional: bool,
}

impl FeedbackVariable {
    pub fn new(value: f64, directional: bool) -> Self {
        Self {
            value: value.clamp(0.0, 1.0),
            directional,
        }
    }

    pub fn neutral(directional: bool) -> Self {
        Self {
            value: if directional { 0.5 } else { 0.0 },
            directional,
        }
    }

    pub fn is_neutral(&self) -> bool {
        *self == Self::neutral(self.directional)
    }

    /// Signed deviation from neutral in [-1, 1] (directional) or [0, 1].
    pub fn deviation(&self) -> f64 {
        if self.directional {
            2.0 * (self.value - 0.5)
        } else {
            self.value
        }
    }
}

/// Compare `x` with the target range and produce the feedback variable.
///
/// The compliance error is 0 inside the target and grows linearly to 1 at
/// the bound on the side `x` lies, then goes through `e^gamma`, optional
/// quantization to `quant_levels` steps, the directional split around the
/// target centre, and finally polarity inversion.
pub fn map_feedback_variable(x: f64, cfg: &MappingConfig) -> Result<FeedbackVariable, MappingError> {
    cfg.validate()?;
    if !x.is_finite() {
        return Err(MappingError::NonFinite);
    }
    let err = if x > cfg.target_hi {
        ((x - cfg.target_hi) / (cfg.bound_hi - cfg.target_hi)).clamp(0.0, 1.0)
    } else if x < cfg.target_lo {
        ((cfg.target_lo - x) / (cfg.target_lo - cfg.bound_lo)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let mut mag = err.powf(cfg.gamma);
    if cfg.quant_levels > 0 {
        let q = f64::from(cfg.quant_levels);
        mag = (mag * q).round() / q;
    }
    let mut value = if cfg.directional {
        let c = cfg.target_center();
        let sign = if x > c {
            1.0
        } else if x < c {
            -1.0
        } else {
            0.0
        };
        0.5 + 0.5 * sign * mag
    } else {
        mag
    };
    if cfg.invert {
        value = 1.0 - value;
    }
    Ok(FeedbackVariable::new(value, cfg.directional))
}
