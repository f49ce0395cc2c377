#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CueEvents {
    pub sit: bool,
    pub stand: bool,
}

impl CueEvents {
    pub fn any(&self) -> bool {
        self.sit || self.stand
    }
}

#[derive(Debug, Clone, Copy)]
struct Crossing {
    threshold: f64,
    armed: Option<bool>,
}

impl Crossing {
    fn new(threshold: f64) -> Self {
        Self {
            threshold,
            armed: None,
        }
    }

    fn update(&mut self, angle: f64, hysteresis: f64) -> bool {
        let armed = self.armed.get_or_insert(angle < self.threshold);
        if *armed && angle >= self.threshold {
            *armed = false;
            true
        } else {
            if !*armed && angle <= self.threshold - hysteresis {
                *armed = true;
            }
            false
        }
    }
}

/// Fires sit/stand cues on rising threshold crossings of the trunk flexion
/// angle; each re-arms once the angle has dropped `hysteresis` below it.
#[derive(Debug, Clone)]
pub struct FlexionCueDetector {
    sit: Crossing,
    stand: Crossing,
    hysteresis: f64,
}

impl FlexionCueDetector {
    pub const DEFAULT_HYSTERESIS: f64 = 2.0;

    pub fn new(sit_threshold: f64, stand_threshold: f64, hysteresis: f64) -> Self {
        Self {
            sit: Crossing::new(sit_threshold),
            stand: Crossing::new(stand_threshold),
            hysteresis: hysteresis.max(0.0),
        }
    }

    pub fn process(&mut self, flexion_deg: f64) -> CueEvents {
        CueEvents {
            sit: self.sit.update(flexion_deg, self.hysteresis),
            stand: self.stand.update(flexion_deg, self.hysteresis),
        }
    }
}

/// Bin a tilt angle into one of `n_degrees` equal scale-degree bins.
pub fn reach_scale_degree(tilt: f64, axis_range: (f64, f64), n_degrees: usize) -> usize {
    let (lo, hi) = axis_range;
    let n = n_degrees.max(1);
    let frac = ((tilt.clamp(lo, hi) - lo) / (hi - lo)).clamp(0.0, 1.0);
    ((frac * n as f64).floor() as usize).min(n - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monotone_rise_gives_one_cue() {
        let mut d = FlexionCueDetector::new(50.0, 30.0, 2.0);
        let n: usize = (0..100).map(|i| d.process(i as f64 * 0.5).stand as usize).sum();
        assert_eq!(n, 1);
    }

    #[test]
    fn hysteresis_suppresses_chatter() {
        let mut d = FlexionCueDetector::new(80.0, 30.0, 2.0);
        let mut count = 0;
        d.process(20.0);
        for i in 0..200 {
            let a = 30.0 + if i % 2 == 0 { 1.0 } else { -1.0 };
            count += d.process(a).stand as usize;
        }
        assert_eq!(count, 1);
        // retreating past the band re-arms
        d.process(27.0);
        assert!(d.process(31.0).stand);
    }

    #[test]
    fn starting_above_threshold_does_not_fire() {
        let mut d = FlexionCueDetector::new(30.0, 30.0, 2.0);
        assert!(!d.process(40.0).any());
        assert!(!d.process(41.0).any());
    }

    #[test]
    fn scale_degree_bins() {
        assert_eq!(reach_scale_degree(0.0, (0.0, 30.0), 8), 0);
        assert_eq!(reach_scale_degree(30.0, (0.0, 30.0), 8), 7);
        assert_eq!(reach_scale_degree(14.0, (0.0, 30.0), 8), 3);
        assert_eq!(reach_scale_degree(-5.0, (0.0, 30.0), 8), 0);
        assert_eq!(reach_scale_degree(99.0, (0.0, 30.0), 8), 7);
    }
}
