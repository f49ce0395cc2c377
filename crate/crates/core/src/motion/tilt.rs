//! Trunk tilt by complementary filter.
//!
//! Axis convention: +AP is forward flexion, +ML is a right lean. The AP rate
//! is read from gyro y and the ML rate from gyro x.

pub const DEFAULT_ALPHA: f64 = 0.98;

/// Tilt implied by gravity alone, (ml, ap) in degrees.
pub fn accel_tilt(acc: [f64; 3]) -> (f64, f64) {
    (
        acc[1].atan2(acc[2]).to_degrees(),
        acc[0].atan2(acc[2]).to_degrees(),
    )
}

/// One complementary-filter step. Angles in degrees, rates in deg/s.
pub fn estimate_tilt(acc: [f64; 3], gyro: [f64; 3], prev: (f64, f64), dt_s: f64, alpha: f64) -> (f64, f64) {
    let (acc_ml, acc_ap) = accel_tilt(acc);
    let ml = alpha * (prev.0 + gyro[0] * dt_s) + (1.0 - alpha) * acc_ml;
    let ap = alpha * (prev.1 + gyro[1] * dt_s) + (1.0 - alpha) * acc_ap;
    (ml.clamp(-90.0, 90.0), ap.clamp(-90.0, 90.0))
}

#[derive(Debug, Clone)]
pub struct TiltEstimator {
    alpha: f64,
    tilt: Option<(f64, f64)>,
}

impl TiltEstimator {
    pub fn new(alpha: f64) -> Self {
        Self { alpha, tilt: None }
    }

    /// Seeds from the accelerometer on the first call.
    pub fn update(&mut self, acc: [f64; 3], gyro: [f64; 3], dt_s: f64) -> (f64, f64) {
        let next = match self.tilt {
            None => {
                let (ml, ap) = accel_tilt(acc);
                (ml.clamp(-90.0, 90.0), ap.clamp(-90.0, 90.0))
            }
            Some(prev) => estimate_tilt(acc, gyro, prev, dt_s, self.alpha),
        };
        self.tilt = Some(next);
        next
    }
}
