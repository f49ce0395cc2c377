use std::time::{Duration, Instant};

/// Monotonic millisecond clock shared by every thread of one engine process.
#[derive(Debug, Clone, Copy)]
pub struct Clock {
    epoch: Instant,
}

impl Clock {
    pub fn new() -> Self {
        Self {
            epoch: Instant::now(),
        }
    }

    pub fn now_ms(&self) -> f64 {
        self.epoch.elapsed().as_secs_f64() * 1000.0
    }

    pub fn instant_at(&self, ms: f64) -> Instant {
        self.epoch + Duration::from_secs_f64(ms.max(0.0) / 1000.0)
    }

    /// Sleep until the clock reads `ms`. Returns immediately if it already has.
    pub fn sleep_until(&self, ms: f64) {
        let target = self.instant_at(ms);
        let now = Instant::now();
        if target > now {
            std::thread::sleep(target - now);
        }
    }
}

impl Default for Clock {
    fn default() -> Self {
        Self::new()
    }
}
