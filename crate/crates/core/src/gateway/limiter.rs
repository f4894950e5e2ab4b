//! Token-bucket rate limiter for outbound provider calls.

use std::sync::Mutex;
use std::time::{Duration, Instant};

struct BucketState {
    tokens: f64,
    last_refill: Instant,
}

/// Classic token bucket: `rate` tokens accrue per second up to a burst
/// capacity; `acquire` blocks until one token is available.
pub struct TokenBucket {
    rate: f64,
    capacity: f64,
    state: Mutex<BucketState>,
}

impl TokenBucket {
    /// A bucket allowing `rate` requests per second with the given
    /// burst capacity. Returns `None` for a non-positive rate, which
    /// callers treat as "unlimited".
    pub fn new(rate: f64, burst: f64) -> Option<Self> {
        if rate <= 0.0 || !rate.is_finite() {
            return None;
        }
        let capacity = burst.max(1.0);
        Some(TokenBucket {
            rate,
            capacity,
            state: Mutex::new(BucketState { tokens: capacity, last_refill: Instant::now() }),
        })
    }

    /// Blocks until a token is available, then consumes it.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut st = self.state.lock().expect("limiter poisoned");
                let now = Instant::now();
                let elapsed = now.duration_since(st.last_refill).as_secs_f64();
                st.tokens = (st.tokens + elapsed * self.rate).min(self.capacity);
                st.last_refill = now;
                if st.tokens >= 1.0 {
                    st.tokens -= 1.0;
                    return;
                }
                Duration::from_secs_f64((1.0 - st.tokens) / self.rate)
            };
            std::thread::sleep(wait);
        }
    }
}
