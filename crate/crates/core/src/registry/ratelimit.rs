//! Per-host request spacing and retry backoff.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use rand::Rng;

pub const DEFAULT_REQUESTS_PER_SECOND: f64 = 5.0;

/// Time source. Tests use [`SimClock`] so rate limiting and backoff can be
/// checked without sleeping.
pub trait Clock: Send + Sync {
    /// Time elapsed since an arbitrary fixed origin.
    fn now(&self) -> Duration;
    fn sleep(&self, d: Duration);
}

pub struct SystemClock {
    origin: Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        Self {
            origin: Instant::now(),
        }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }

    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Virtual clock: `sleep` advances time instantly.
#[derive(Default)]
pub struct SimClock {
    now: Mutex<Duration>,
    sleeps: Mutex<Vec<Duration>>,
}

impl SimClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn advance(&self, d: Duration) {
        *self.now.lock().unwrap() += d;
    }

    /// Every sleep requested so far, in order.
    pub fn sleeps(&self) -> Vec<Duration> {
        self.sleeps.lock().unwrap().clone()
    }
}

impl Clock for SimClock {
    fn now(&self) -> Duration {
        *self.now.lock().unwrap()
    }

    fn sleep(&self, d: Duration) {
        self.sleeps.lock().unwrap().push(d);
        *self.now.lock().unwrap() += d;
    }
}

/// Spaces requests to the same host at least `1 / rps` apart.
pub struct RateLimiter {
    interval: Duration,
    next_slot: Mutex<HashMap<String, Duration>>,
    clock: Arc<dyn Clock>,
}

impl RateLimiter {
    pub fn new(requests_per_second: f64, clock: Arc<dyn Clock>) -> Self {
        let interval = if requests_per_second > 0.0 {
            Duration::from_secs_f64(1.0 / requests_per_second)
        } else {
            Duration::ZERO
        };
        Self {
            interval,
            next_slot: Mutex::new(HashMap::new()),
            clock,
        }
    }

    pub fn interval(&self) -> Duration {
        self.interval
    }

    /// Block until a request to `host` may be sent. Returns the granted time.
    pub fn acquire(&self, host: &str) -> Duration {
        let (slot, now) = {
            let mut slots = self.next_slot.lock().unwrap();
            let now = self.clock.now();
            let next = slots.get(host).copied().unwrap_or(Duration::ZERO);
            let slot = now.max(next);
            slots.insert(host.to_owned(), slot + self.interval);
            (slot, now)
        };
        if slot > now {
            self.clock.sleep(slot - now);
        }
        slot
    }
}

#[derive(Debug, Clone)]
pub struct RetryPolicy {
    /// Retries after the first attempt.
    pub max_retries: u32,
    pub base_delay: Duration,
    /// Extra random delay as a fraction of the backoff step.
    pub jitter: f64,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            base_delay: Duration::from_secs(1),
            jitter: 0.25,
            max_delay: Duration::from_secs(120),
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (0-based). A server-provided
    /// Retry-After is honored when it asks for longer.
    pub fn delay(&self, retry: u32, retry_after: Option<Duration>) -> Duration {
        let step = self.base_delay.saturating_mul(1u32 << retry.min(16));
        let jitter = if self.jitter > 0.0 {
            step.mul_f64(rand::rng().random_range(0.0..self.jitter))
        } else {
            Duration::ZERO
        };
        let backoff = (step + jitter).min(self.max_delay);
        match retry_after {
            Some(ra) => backoff.max(ra.min(self.max_delay)),
            None => backoff,
        }
    }
}
