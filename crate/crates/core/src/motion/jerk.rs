use super::filter::{FilterSpec, Lowpass, SignalConditioner};
use super::MotionError;

pub const G_TO_MS2: f64 = 9.81;

/// Instantaneous squared jerk from conditioned acceleration, smoothed by a
/// second lowpass with the same cutoff. No windowing or segmentation.
#[derive(Debug, Clone)]
pub struct JerkEstimator {
    axes: [SignalConditioner; 3],
    smoother: Lowpass,
    prev: Option<[f64; 3]>,
}

impl JerkEstimator {
    pub fn new(spec: FilterSpec) -> Result<Self, MotionError> {
        let c = SignalConditioner::new(spec)?;
        Ok(Self {
            axes: [c.clone(), c.clone(), c],
            smoother: Lowpass::new(&spec)?,
            prev: None,
        })
    }

    /// `acc_g` in g; returns smoothed jerk^2 in (m/s^3)^2.
    pub fn process(&mut self, acc_g: [f64; 3], dt_s: f64) -> f64 {
        let mut a = [0.0; 3];
        for i in 0..3 {
            a[i] = self.axes[i].process(acc_g[i] * G_TO_MS2);
        }
        let raw = match self.prev {
            Some(p) if dt_s > 0.0 => (0..3).map(|i| ((a[i] - p[i]) / dt_s).powi(2)).sum(),
            _ => 0.0,
        };
        self.prev = Some(a);
        self.smoother.process(raw).max(0.0)
    }
}

/// Batch form over a uniformly sampled stream.
pub fn compute_jerk(acc_g: &[[f64; 3]], spec: FilterSpec) -> Result<Vec<f64>, MotionError> {
    let dt = 1.0 / spec.rate;
    let mut j = JerkEstimator::new(spec)?;
    Ok(acc_g.iter().map(|&a| j.process(a, dt)).collect())
}
