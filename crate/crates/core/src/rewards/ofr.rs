/// Resolved-request counters for one bidder or the whole system.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OfrCounter {
    pub succeeded: u64,
    /// Deadline expiries, post-rebid rejections, drops and reset flushes.
    pub failed: u64,
}

impl OfrCounter {
    pub fn resolved(&self) -> u64 {
        self.succeeded + self.failed
    }

    pub fn add(&mut self, other: &OfrCounter) {
        self.succeeded += other.succeeded;
        self.failed += other.failed;
    }
}

/// Failure share of resolved requests; `None` when nothing was resolved.
pub fn offloading_failure_rate(c: &OfrCounter) -> Option<f64> {
    match c.resolved() {
        0 => None,
        n => Some(c.failed as f64 / n as f64),
    }
}
