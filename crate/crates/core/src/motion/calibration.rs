use serde::{Deserialize, Serialize};

use super::MotionError;
use crate::osc::ImuSample;

/// One second at the feedback rate.
pub const MIN_CALIBRATION_SAMPLES: usize = 100;
pub const MAX_STATIONARY_GYRO_STD: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Bias {
    /// deg/s
    pub gyro: [f64; 3],
    /// g
    pub acc: [f64; 3],
}

/// Estimate gyro and accelerometer offsets from a stationary recording.
///
/// The accelerometer bias is the mean reading minus the signed unit axis
/// closest to it, so whatever orientation the device rests in becomes "level".
pub fn calibrate_bias(samples: &[ImuSample]) -> Result<Bias, MotionError> {
    if samples.len() < MIN_CALIBRATION_SAMPLES {
        return Err(MotionError::TooFewSamples {
            needed: MIN_CALIBRATION_SAMPLES,
            got: samples.len(),
        });
    }
    let n = samples.len() as f64;
    let mut gyro_mean = [0.0; 3];
    let mut acc_mean = [0.0; 3];
    for s in samples {
        for i in 0..3 {
            gyro_mean[i] += f64::from(s.gyro[i]);
            acc_mean[i] += f64::from(s.acc[i]);
        }
    }
    for i in 0..3 {
        gyro_mean[i] /= n;
        acc_mean[i] /= n;
    }
    let mut worst_std: f64 = 0.0;
    for i in 0..3 {
        let var = samples
            .iter()
            .map(|s| (f64::from(s.gyro[i]) - gyro_mean[i]).powi(2))
            .sum::<f64>()
            / n;
        worst_std = worst_std.max(var.sqrt());
    }
    if worst_std > MAX_STATIONARY_GYRO_STD {
        return Err(MotionError::NotStationary(worst_std));
    }
    let axis = (0..3)
        .max_by(|&a, &b| acc_mean[a].abs().total_cmp(&acc_mean[b].abs()))
        .unwrap();
    let mut gravity = [0.0; 3];
    gravity[axis] = acc_mean[axis].signum();
    Ok(Bias {
        gyro: gyro_mean,
        acc: [
            acc_mean[0] - gravity[0],
            acc_mean[1] - gravity[1],
            acc_mean[2] - gravity[2],
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn still(n: usize, gyro: [f32; 3], acc: [f32; 3]) -> Vec<ImuSample> {
        (0..n)
            .map(|i| ImuSample::new(i as f64 * 8.0, acc, gyro, 1.0))
            .collect()
    }

    #[test]
    fn zero_noise_gives_zero_bias() {
        let b = calibrate_bias(&still(125, [0.0; 3], [0.0, 0.0, 1.0])).unwrap();
        assert_eq!(b, Bias::default());
    }

    #[test]
    fn recovers_gyro_offset() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let samples: Vec<_> = (0..250)
            .map(|i| {
                let g = [1.0, 2.0, 3.0].map(|o: f32| o + rng.gen_range(-0.5f32..0.5));
                ImuSample::new(i as f64 * 8.0, [0.02, -0.01, 1.03], g, 1.0)
            })
            .collect();
        // Oracle: plain sample mean.
        let mean: Vec<f64> = (0..3)
            .map(|i| samples.iter().map(|s| s.gyro[i] as f64).sum::<f64>() / 250.0)
            .collect();
        let b = calibrate_bias(&samples).unwrap();
        for i in 0..3 {
            assert!((b.gyro[i] - (i as f64 + 1.0)).abs() < 0.05);
            assert!((b.gyro[i] - mean[i]).abs() < 1e-9);
        }
        assert!((b.acc[0] - 0.02).abs() < 1e-6);
        assert!((b.acc[2] - 0.03).abs() < 1e-6);
    }

    #[test]
    fn sway_is_not_stationary() {
        let samples: Vec<_> = (0..250)
            .map(|i| {
                let t = i as f64 * 0.008;
                let rate = 10.0 * 2.0 * std::f64::consts::PI * 0.25 * (2.0 * std::f64::consts::PI * 0.25 * t).cos();
                ImuSample::new(t * 1000.0, [0.0, 0.0, 1.0], [0.0, rate as f32, 0.0], 1.0)
            })
            .collect();
        assert!(matches!(
            calibrate_bias(&samples),
            Err(MotionError::NotStationary(_))
        ));
    }

    #[test]
    fn too_short_rejected() {
        assert!(matches!(
            calibrate_bias(&still(10, [0.0; 3], [0.0, 0.0, 1.0])),
            Err(MotionError::TooFewSamples { .. })
        ));
    }
}
