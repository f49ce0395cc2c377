use serde::{Deserialize, Serialize};

use super::filter::{FilterSpec, SignalConditioner};
use super::MotionError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Foot {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepEvent {
    pub foot: Foot,
    /// ms
    pub t: f64,
    /// Time since the previous event of the same foot, ms.
    pub duration_since_prev: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepDetectorConfig {
    /// Rising-edge threshold on acceleration magnitude, g.
    pub threshold_g: f64,
    pub refractory_ms: f64,
    /// Optional conditioning of the magnitude before thresholding. Off by
    /// default: a lowpass delays and flattens two-sample impact spikes.
    pub filter: Option<FilterSpec>,
}

impl Default for StepDetectorConfig {
    fn default() -> Self {
        Self {
            threshold_g: 1.3,
            refractory_ms: 300.0,
            filter: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StepDetector {
    foot: Foot,
    cfg: StepDetectorConfig,
    conditioner: Option<SignalConditioner>,
    above: bool,
    last_event: Option<f64>,
}

impl StepDetector {
    pub fn new(foot: Foot, cfg: StepDetectorConfig) -> Result<Self, MotionError> {
        let conditioner = cfg.filter.map(SignalConditioner::new).transpose()?;
        Ok(Self {
            foot,
            cfg,
            conditioner,
            above: false,
            last_event: None,
        })
    }

    /// Feed one magnitude sample (g) taken at `t_ms`.
    pub fn process(&mut self, t_ms: f64, acc_mag_g: f64) -> Option<StepEvent> {
        let x = match &mut self.conditioner {
            Some(c) => c.process(acc_mag_g),
            None => acc_mag_g,
        };
        let is_above = x > self.cfg.threshold_g;
        let rising = is_above && !self.above;
        self.above = is_above;
        if !rising {
            return None;
        }
        if let Some(last) = self.last_event {
            if t_ms - last < self.cfg.refractory_ms {
                return None;
            }
        }
        let ev = StepEvent {
            foot: self.foot,
            t: t_ms,
            duration_since_prev: self.last_event.map(|l| t_ms - l),
        };
        self.last_event = Some(t_ms);
        Some(ev)
    }
}

/// Batch detection over `(t_ms, |acc| in g)` pairs.
pub fn detect_step(
    stream: &[(f64, f64)],
    foot: Foot,
    cfg: StepDetectorConfig,
) -> Result<Vec<StepEvent>, MotionError> {
    let mut d = StepDetector::new(foot, cfg)?;
    Ok(stream.iter().filter_map(|&(t, m)| d.process(t, m)).collect())
}
