use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::simcore::{SimRng, Step};

/// Objective weights. Each pair sums to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreferenceVector {
    /// Auction utility.
    pub o1: f64,
    /// Offloading failure rate (minimised).
    pub o2: f64,
    /// Resource utilisation.
    pub o3: f64,
    /// Fairness.
    pub o4: f64,
    /// Loss-cost weight inside the auction utility.
    pub o1_2: f64,
    /// Backoff-cost weight inside the auction utility.
    pub o1_3: f64,
}

impl PreferenceVector {
    pub fn from_free(o1: f64, o2: f64, o1_2: f64) -> Self {
        Self {
            o1,
            o2,
            o3: 1.0 - o1,
            o4: 1.0 - o2,
            o1_2,
            o1_3: 1.0 - o1_2,
        }
    }

    pub fn balanced() -> Self {
        Self::from_free(0.5, 0.5, 0.5)
    }

    pub fn satisfies_simplex(&self) -> bool {
        let ok = |x: f64| (0.0..=1.0).contains(&x);
        [self.o1, self.o2, self.o3, self.o4, self.o1_2, self.o1_3]
            .into_iter()
            .all(ok)
            && self.o1 + self.o3 == 1.0
            && self.o2 + self.o4 == 1.0
            && self.o1_2 + self.o1_3 == 1.0
    }

    pub fn as_array(&self) -> [f64; 6] {
        [self.o1, self.o2, self.o3, self.o4, self.o1_2, self.o1_3]
    }
}

pub fn sample_preferences(rng: &mut SimRng) -> PreferenceVector {
    let u1: f64 = rng.random();
    let u2: f64 = rng.random();
    let u3: f64 = rng.random();
    PreferenceVector::from_free(u1, u2, u3)
}

/// Geometric resample epochs with a configurable mean length.
#[derive(Debug, Clone)]
pub struct ResampleClock {
    geo: Option<Geometric>,
    next: Step,
}

impl ResampleClock {
    /// `mean_steps == 0` disables resampling.
    pub fn new(mean_steps: f64, now: Step, rng: &mut SimRng) -> Self {
        let geo = if mean_steps >= 1.0 {
            Geometric::new(1.0 / mean_steps).ok()
        } else {
            None
        };
        let mut c = Self { geo, next: Step::MAX };
        c.schedule(now, rng);
        c
    }

    fn schedule(&mut self, now: Step, rng: &mut SimRng) {
        self.next = match &self.geo {
            Some(g) => now + 1 + g.sample(rng),
            None => Step::MAX,
        };
    }

    /// True once per epoch boundary; schedules the following boundary.
    pub fn due(&mut self, now: Step, rng: &mut SimRng) -> bool {
        if now >= self.next {
            self.schedule(now, rng);
            true
        } else {
            false
        }
    }
}
