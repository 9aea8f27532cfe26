use std::sync::Arc;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use parking_lot::Mutex;

/// Time source for rate limiting and cache timestamps.
pub trait Clock: Send + Sync {
    /// Monotonic time since an arbitrary origin.
    fn elapsed(&self) -> Duration;
    fn sleep(&self, d: Duration);
    fn unix_seconds(&self) -> u64;
}

#[derive(Debug)]
pub struct SystemClock {
    origin: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        Self {
            origin: Instant::now(),
        }
    }
}

impl Clock for SystemClock {
    fn elapsed(&self) -> Duration {
        self.origin.elapsed()
    }

    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }

    fn unix_seconds(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs())
    }
}

/// Clock that only moves when slept on. Used in tests.
#[derive(Debug, Default)]
pub struct ManualClock {
    now: Mutex<Duration>,
}

impl ManualClock {
    pub fn advance(&self, d: Duration) {
        *self.now.lock() += d;
    }
}

impl Clock for ManualClock {
    fn elapsed(&self) -> Duration {
        *self.now.lock()
    }

    fn sleep(&self, d: Duration) {
        self.advance(d);
    }

    fn unix_seconds(&self) -> u64 {
        1_551_427_200 + self.now.lock().as_secs()
    }
}

/// Spaces calls at least `1 / rate` apart, shared by all threads.
pub struct RateLimiter {
    interval: Duration,
    next: Mutex<Option<Duration>>,
    clock: Arc<dyn Clock>,
}

impl RateLimiter {
    /// `None` or a non-positive rate disables limiting.
    pub fn new(per_second: Option<f64>, clock: Arc<dyn Clock>) -> Self {
        let interval = match per_second {
            Some(r) if r > 0.0 && r.is_finite() => Duration::from_secs_f64(1.0 / r),
            _ => Duration::ZERO,
        };
        Self {
            interval,
            next: Mutex::new(None),
            clock,
        }
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    /// Blocks until the caller may issue one request.
    pub fn acquire(&self) {
        if self.interval.is_zero() {
            return;
        }
        let wait = {
            let mut next = self.next.lock();
            let now = self.clock.elapsed();
            let slot = next.map_or(now, |n| n.max(now));
            *next = Some(slot + self.interval);
            slot.saturating_sub(now)
        };
        if !wait.is_zero() {
            self.clock.sleep(wait);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn burst_of_hundred_at_ten_per_second_takes_nine_seconds() {
        let clock = Arc::new(ManualClock::default());
        let limiter = RateLimiter::new(Some(10.0), clock.clone());
        for _ in 0..100 {
            limiter.acquire();
        }
        assert!(clock.elapsed() >= Duration::from_secs(9));
        assert!(clock.elapsed() < Duration::from_secs(10));
    }

    #[test]
    fn idle_time_is_not_banked() {
        let clock = Arc::new(ManualClock::default());
        let limiter = RateLimiter::new(Some(2.0), clock.clone());
        limiter.acquire();
        clock.advance(Duration::from_secs(60));
        let before = clock.elapsed();
        limiter.acquire();
        limiter.acquire();
        assert_eq!(clock.elapsed() - before, Duration::from_millis(500));
    }

    #[test]
    fn disabled_limiter_never_sleeps() {
        let clock = Arc::new(ManualClock::default());
        let limiter = RateLimiter::new(None, clock.clone());
        for _ in 0..50 {
            limiter.acquire();
        }
        assert_eq!(clock.elapsed(), Duration::ZERO);
    }
}
