use std::time::Duration;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockMode {
    #[default]
    Virtual,
    Realtime,
}

/// Session clock in milliseconds of scheduled time.
///
/// Both modes keep the same tick arithmetic, so logs agree across modes; the
/// realtime clock additionally sleeps through every advance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SessionClock {
    mode: ClockMode,
    ticks_ms: u64,
}

impl SessionClock {
    pub fn new(mode: ClockMode) -> Self {
        Self { mode, ticks_ms: 0 }
    }

    pub fn mode(&self) -> ClockMode {
        self.mode
    }

    pub fn now_ms(&self) -> u64 {
        self.ticks_ms
    }
}

pub fn advance_clock(clock: SessionClock, duration: Duration) -> SessionClock {
    if clock.mode == ClockMode::Realtime && !duration.is_zero() {
        std::thread::sleep(duration);
    }
    SessionClock {
        mode: clock.mode,
        ticks_ms: clock.ticks_ms + duration.as_millis() as u64,
    }
}

pub fn secs(s: f64) -> Duration {
    Duration::from_secs_f64(s.max(0.0))
}
