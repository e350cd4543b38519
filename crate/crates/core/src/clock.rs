//! Process-wide monotonic clock.
//!
//! Every timestamp the harness records (request timing hooks, telemetry
//! samples, cold-start phases) is expressed as seconds since a single
//! process epoch so values taken on different threads are comparable.

use std::sync::OnceLock;
use std::time::{Duration, Instant};

static EPOCH: OnceLock<Instant> = OnceLock::new();

/// The instant all timestamps are measured from.
pub fn epoch() -> Instant {
    *EPOCH.get_or_init(Instant::now)
}

/// Seconds elapsed since the process epoch.
pub fn now() -> f64 {
    epoch().elapsed().as_secs_f64()
}

/// Converts an `Instant` to epoch-relative seconds.
pub fn to_secs(instant: Instant) -> f64 {
    instant.saturating_duration_since(epoch()).as_secs_f64()
}

/// Converts epoch-relative seconds back to an `Instant`.
pub fn to_instant(secs: f64) -> Instant {
    epoch() + Duration::from_secs_f64(secs.max(0.0))
}
