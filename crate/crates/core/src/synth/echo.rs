use serde::{Deserialize, Serialize};

use super::SAMPLE_RATE;
use crate::sequencer::TEMPO_MIN;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EchoSettings {
    /// Delay length in beats.
    pub beats: f64,
    pub feedback: f64,
    /// Wet level into the master bus.
    pub mix: f64,
}

impl Default for EchoSettings {
    fn default() -> Self {
        Self {
            beats: 0.75,
            feedback: 0.35,
            mix: 0.3,
        }
    }
}

pub fn echo_delay_ms(tempo: f64, beats: f64) -> f64 {
    beats * 60_000.0 / tempo
}

/// Cross-fed stereo delay whose length follows the tempo.
#[derive(Debug, Clone)]
pub struct Echo {
    buf: Vec<[f64; 2]>,
    write: usize,
    delay: usize,
}

impl Echo {
    /// Sized for the longest delay `max_beats` can produce at the slowest tempo.
    pub fn new(max_beats: f64) -> Self {
        let len = (echo_delay_ms(TEMPO_MIN, max_beats) * 1e-3 * SAMPLE_RATE).ceil() as usize + 1;
        Self {
            buf: vec![[0.0; 2]; len.max(2)],
            write: 0,
            delay: 1,
        }
    }

    pub fn set_delay(&mut self, tempo: f64, beats: f64) {
        let samples = (echo_delay_ms(tempo, beats) * 1e-3 * SAMPLE_RATE).round() as usize;
        self.delay = samples.clamp(1, self.buf.len() - 1);
    }

    pub fn delay_samples(&self) -> usize {
        self.delay
    }

    #[inline]
    pub fn process(&mut self, send: [f64; 2], feedback: f64) -> [f64; 2] {
        let n = self.buf.len();
        let read = (self.write + n - self.delay) % n;
        let [l, r] = self.buf[read];
        self.buf[self.write] = [send[0] + feedback * r, send[1] + feedback * l];
        self.write = (self.write + 1) % n;
        [l, r]
    }
}
