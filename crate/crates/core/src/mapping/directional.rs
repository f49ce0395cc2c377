use super::trajectory::{trajectory_position, Trajectory};
use super::FeedbackVariable;

pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Two shifted logistics: 0.5 at `d = 0`, flat of width `2 d0`, saturating to 0 and 1.
pub fn sigmoid_sum(d: f64, k: f64, d0: f64) -> f64 {
    // sigma(x) = (1 + tanh(x/2)) / 2; tanh is odd, so d = 0 gives exactly 0.5.
    0.5 + 0.25 * ((0.5 * k * (d - d0)).tanh() + (0.5 * k * (d + d0)).tanh())
}

/// Directional feedback from the distance to where the trajectory will be
/// `lead_beats` ahead, per axis `(ml, ap)`.
pub fn anticipated_error_feedback(
    user: (f64, f64),
    traj: &Trajectory,
    beat_phase: f64,
    lead_beats: f64,
    k: f64,
    d0: f64,
) -> (FeedbackVariable, FeedbackVariable) {
    let target = trajectory_position(traj, beat_phase + lead_beats);
    let d_ml = user.0 - target.0;
    let d_ap = user.1 - target.1;
    (
        FeedbackVariable::new(sigmoid_sum(d_ml, k, d0), true),
        FeedbackVariable::new(sigmoid_sum(d_ap, k, d0), true),
    )
}

/// Signed step duration error relative to the beat, with a dead zone, in [-1, 1].
pub fn step_timing_error(duration_ms: f64, beat_interval_ms: f64, dead_zone_ms: f64) -> f64 {
    let diff = duration_ms - beat_interval_ms;
    let excess = (diff.abs() - dead_zone_ms).max(0.0);
    if excess == 0.0 {
        return 0.0;
    }
    (diff.signum() * excess / beat_interval_ms).clamp(-1.0, 1.0)
}
