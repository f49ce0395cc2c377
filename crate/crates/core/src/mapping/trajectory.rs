use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::MappingError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryShape {
    Linear,
    Diagonal,
    Circular,
    Square,
    Rhombic,
}

/// Music-synced target path on the ML/AP plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub shape: TrajectoryShape,
    /// (A_ml, A_ap), degrees.
    pub amp: (f64, f64),
    /// One cycle spans this many beats.
    pub tempo_divisor: u32,
    pub center: (f64, f64),
}

impl Default for Trajectory {
    fn default() -> Self {
        Self {
            shape: TrajectoryShape::Circular,
            amp: (5.0, 5.0),
            tempo_divisor: 4,
            center: (0.0, 0.0),
        }
    }
}

impl Trajectory {
    pub fn validate(&self) -> Result<(), MappingError> {
        if !(self.amp.0 > 0.0 && self.amp.1 > 0.0) {
            return Err(MappingError::TrajectoryInvalid("amplitudes must be > 0"));
        }
        if self.tempo_divisor == 0 {
            return Err(MappingError::TrajectoryInvalid("tempo_divisor must be >= 1"));
        }
        Ok(())
    }
}

/// Triangle wave: 0 at 0, +1 at 1/4, 0 at 1/2, -1 at 3/4.
fn tri(theta: f64) -> f64 {
    if theta < 0.25 {
        4.0 * theta
    } else if theta < 0.75 {
        2.0 - 4.0 * theta
    } else {
        4.0 * theta - 4.0
    }
}

/// Target position at `beat_phase` beats since start. Closed shapes run
/// counter-clockwise; a cycle starts on a bar boundary.
pub fn trajectory_position(traj: &Trajectory, beat_phase: f64) -> (f64, f64) {
    let theta = (beat_phase / f64::from(traj.tempo_divisor.max(1))).rem_euclid(1.0);
    let (am, aa) = traj.amp;
    let (cm, ca) = traj.center;
    let (dm, da) = match traj.shape {
        TrajectoryShape::Circular => (am * (TAU * theta).cos(), aa * (TAU * theta).sin()),
        TrajectoryShape::Linear => (am * tri(theta), 0.0),
        TrajectoryShape::Diagonal => (am * tri(theta), aa * tri(theta)),
        TrajectoryShape::Square => {
            // Edges: top (+,+)->(-,+), left ->(-,-), bottom ->(+,-), right ->(+,+).
            let s = theta * 4.0 * (am + aa);
            if s < 2.0 * am {
                (am - s, aa)
            } else if s < 2.0 * am + 2.0 * aa {
                (-am, aa - (s - 2.0 * am))
            } else if s < 4.0 * am + 2.0 * aa {
                (-am + (s - 2.0 * am - 2.0 * aa), -aa)
            } else {
                (am, -aa + (s - 4.0 * am - 2.0 * aa))
            }
        }
        TrajectoryShape::Rhombic => {
            // All four edges have equal length, so the edge index is linear in theta.
            let q = theta * 4.0;
            let edge = (q.floor() as usize).min(3);
            let f = q - edge as f64;
            match edge {
                0 => (am * (1.0 - f), aa * f),
                1 => (-am * f, aa * (1.0 - f)),
                2 => (-am * (1.0 - f), -aa * f),
                _ => (am * f, -aa * (1.0 - f)),
            }
        }
    };
    (cm + dm, ca + da)
}
