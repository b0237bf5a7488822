use std::time::Instant;

use proprec::domain::Timestamp;
use proprec::store::Clock;

/// Wall time shifted so that it starts at `base`. Lets a server run "inside"
/// a synthetic world whose events end at some fixed instant.
#[derive(Debug)]
pub struct OffsetClock {
    base: Timestamp,
    started: Instant,
}

impl OffsetClock {
    pub fn starting_at(base: Timestamp) -> Self {
        OffsetClock { base, started: Instant::now() }
    }
}

impl Clock for OffsetClock {
    fn now(&self) -> Timestamp {
        self.base + self.started.elapsed().as_millis() as Timestamp
    }
}
