use super::{Mode, SessionState, TiltAxis};
use crate::mapping::{CueEvents, FlexionCueDetector};
use crate::motion::MovementState;

/// Repetition counting for reach, sit-to-stand and gait.
#[derive(Debug, Clone)]
pub struct RepCounter {
    axis: TiltAxis,
    threshold: f64,
    rearm: f64,
    armed: bool,
}

impl RepCounter {
    pub fn new(state: &SessionState) -> Self {
        Self {
            axis: state.reach.axis,
            threshold: state.reach.threshold_deg,
            rearm: state.reach.rearm_deg,
            armed: true,
        }
    }

    /// True when this tick completes a repetition.
    pub fn process(&mut self, mode: Mode, m: &MovementState, cues: CueEvents) -> bool {
        match mode {
            Mode::Reach => {
                let v = match self.axis {
                    TiltAxis::Ml => m.tilt_ml,
                    TiltAxis::Ap => m.tilt_ap,
                }
                .abs();
                if self.armed && v >= self.threshold {
                    self.armed = false;
                    true
                } else {
                    if !self.armed && v <= self.rearm {
                        self.armed = true;
                    }
                    false
                }
            }
            Mode::Sts => cues.stand,
            Mode::GaitDuration | Mode::GaitPhase => m.step_event.is_some(),
            Mode::StaticBalance | Mode::TrunkControl => false,
        }
    }
}

/// Batch count over a movement stream, with cue detection for sit-to-stand.
pub fn count_repetition(mode: Mode, states: &[MovementState], cfg: &SessionState) -> u64 {
    let mut counter = RepCounter::new(cfg);
    let mut cues = FlexionCueDetector::new(cfg.sts.sit_threshold, cfg.sts.stand_threshold, cfg.sts.hysteresis);
    states
        .iter()
        .filter(|m| counter.process(mode, m, cues.process(m.flexion_angle)))
        .count() as u64
}
