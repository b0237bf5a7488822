use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicI64, Ordering};

use serde::{Deserialize, Serialize};

use crate::config::Cadences;
use crate::domain::{Span, Timestamp};

/// Source of "now" for serving and scheduling.
pub trait Clock: Send + Sync {
    fn now(&self) -> Timestamp;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Timestamp {
        let d = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).unwrap_or_default();
        d.as_millis() as Timestamp
    }
}

/// Manually driven clock for tests and simulations.
#[derive(Debug, Default)]
pub struct SimulatedClock(AtomicI64);

impl SimulatedClock {
    pub fn new(start: Timestamp) -> Self {
        SimulatedClock(AtomicI64::new(start))
    }
    pub fn set(&self, t: Timestamp) {
        self.0.store(t, Ordering::SeqCst);
    }
    pub fn advance(&self, by: Span) -> Timestamp {
        self.0.fetch_add(by.as_millis(), Ordering::SeqCst) + by.as_millis()
    }
}

impl Clock for SimulatedClock {
    fn now(&self) -> Timestamp {
        self.0.load(Ordering::SeqCst)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    ContentShort,
    ContentLong,
    Collab,
    Cohorts,
}

impl JobKind {
    pub const ALL: [JobKind; 4] = [JobKind::ContentShort, JobKind::ContentLong, JobKind::Collab, JobKind::Cohorts];

    pub fn as_str(self) -> &'static str {
        match self {
            JobKind::ContentShort => "content_short",
            JobKind::ContentLong => "content_long",
            JobKind::Collab => "collab",
            JobKind::Cohorts => "cohorts",
        }
    }

    pub fn cadence(self, cadences: &Cadences) -> Span {
        match self {
            JobKind::ContentShort => cadences.content_short,
            JobKind::ContentLong => cadences.content_long,
            JobKind::Collab => cadences.collab,
            JobKind::Cohorts => cadences.cohorts,
        }
    }
}

impl fmt::Display for JobKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for JobKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        JobKind::ALL
            .into_iter()
            .find(|j| j.as_str() == s)
            .ok_or_else(|| format!("unknown model {s:?} (cohorts, content_short, content_long, collab)"))
    }
}

/// Decides which retrain jobs are due. A job is due when its cadence has
/// elapsed since it last fired; a failed job is re-armed so the next tick
/// retries it.
#[derive(Clone, Debug)]
pub struct Scheduler {
    cadences: Cadences,
    fired: BTreeMap<JobKind, Timestamp>,
    succeeded: BTreeMap<JobKind, Timestamp>,
}

impl Scheduler {
    pub fn new(cadences: Cadences) -> Self {
        Scheduler { cadences, fired: BTreeMap::new(), succeeded: BTreeMap::new() }
    }

    /// Jobs due at `now`, in [`JobKind::ALL`] order. Marks them fired.
    pub fn tick(&mut self, now: Timestamp) -> Vec<JobKind> {
        let mut due = Vec::new();
        for job in JobKind::ALL {
            let cadence = job.cadence(&self.cadences).as_millis();
            if self.fired.get(&job).is_none_or(|&t| now - t >= cadence) {
                self.fired.insert(job, now);
                due.push(job);
            }
        }
        due
    }

    pub fn mark_success(&mut self, job: JobKind, at: Timestamp) {
        self.succeeded.insert(job, at);
    }

    /// Re-arms a job so the next tick fires it again.
    pub fn mark_failure(&mut self, job: JobKind) {
        match self.succeeded.get(&job) {
            Some(&t) => self.fired.insert(job, t - job.cadence(&self.cadences).as_millis()),
            None => self.fired.remove(&job),
        };
    }

    pub fn last_success(&self, job: JobKind) -> Option<Timestamp> {
        self.succeeded.get(&job).copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{HOUR_MS, MINUTE_MS};

    #[test]
    fn twenty_four_hours_of_minute_ticks() {
        let mut s = Scheduler::new(Cadences::default());
        let t0 = 1_000 * HOUR_MS;
        let mut counts: BTreeMap<JobKind, usize> = BTreeMap::new();
        for m in 0..24 * 60 {
            for job in s.tick(t0 + m * MINUTE_MS) {
                *counts.entry(job).or_default() += 1;
                s.mark_success(job, t0 + m * MINUTE_MS);
            }
        }
        assert_eq!(counts[&JobKind::ContentShort], 144);
        assert_eq!(counts[&JobKind::ContentLong], 12);
        assert_eq!(counts[&JobKind::Collab], 1);
        assert_eq!(counts[&JobKind::Cohorts], 1);
    }

    #[test]
    fn first_tick_fires_all_and_same_instant_fires_none() {
        let mut s = Scheduler::new(Cadences::default());
        assert_eq!(s.tick(0), JobKind::ALL.to_vec());
        assert!(s.tick(0).is_empty());
    }

    #[test]
    fn failure_retries_next_tick() {
        let mut s = Scheduler::new(Cadences::default());
        s.tick(0);
        s.mark_success(JobKind::Collab, 0);
        s.tick(24 * HOUR_MS);
        s.mark_failure(JobKind::Collab);
        assert_eq!(s.tick(24 * HOUR_MS + MINUTE_MS), vec![JobKind::Collab]);
        let mut fresh = Scheduler::new(Cadences::default());
        fresh.tick(0);
        fresh.mark_failure(JobKind::Cohorts);
        assert_eq!(fresh.tick(MINUTE_MS), vec![JobKind::Cohorts]);
    }

    #[test]
    fn job_names_parse() {
        for j in JobKind::ALL {
            assert_eq!(j.as_str().parse::<JobKind>().unwrap(), j);
        }
        assert!("nope".parse::<JobKind>().is_err());
    }
}
