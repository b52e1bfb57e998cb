//! Synthetic mobility at a signalised 4-way intersection.
//!
//! Vehicles enter the coverage disc on one of four arms, drive straight at a
//! constant speed toward the stop line, wait if their axis shows red, then
//! cross and leave on the opposite arm. The access point sits at the centre.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::simcore::{SimRng, Step};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MobilityConfig {
    /// Mean vehicle arrivals per second; 0 disables traffic.
    pub arrival_rate_per_s: f64,
    pub speed_kmh: f64,
    pub radius_m: f64,
    /// Distance of the stop line from the centre.
    pub stop_line_m: f64,
    /// Green time per axis; the two axes alternate, so a cycle is twice this.
    pub green_s: f64,
}

impl Default for MobilityConfig {
    fn default() -> Self {
        Self::train()
    }
}

impl MobilityConfig {
    pub fn train() -> Self {
        Self {
            arrival_rate_per_s: 1.0 / 2.2,
            speed_kmh: 10.0,
            radius_m: 65.0,
            stop_line_m: 5.0,
            green_s: 30.0,
        }
    }

    pub fn test() -> Self {
        Self {
            arrival_rate_per_s: 1.0,
            speed_kmh: 30.0,
            green_s: 15.0,
            ..Self::train()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    NorthSouth,
    EastWest,
}

/// Fixed-cycle two-phase light: north-south is green first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficLight {
    green_steps: Step,
}

impl TrafficLight {
    pub fn new(green_s: f64) -> Self {
        Self {
            green_steps: ((green_s * 1000.0).round() as Step).max(1),
        }
    }

    pub fn is_green(&self, axis: Axis, t: Step) -> bool {
        let phase = t % (2 * self.green_steps);
        match axis {
            Axis::NorthSouth => phase < self.green_steps,
            Axis::EastWest => phase >= self.green_steps,
        }
    }

    /// First step `>= t` at which `axis` is green.
    pub fn next_green(&self, axis: Axis, t: Step) -> Step {
        if self.is_green(axis, t) {
            return t;
        }
        let cycle = 2 * self.green_steps;
        let phase = t % cycle;
        let start = match axis {
            Axis::NorthSouth => cycle,
            Axis::EastWest => self.green_steps,
        };
        t - phase + start
    }
}

/// One vehicle's trajectory through the coverage disc.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleTrack {
    pub id: u64,
    pub spawn: Step,
    pub speed_kmh: f64,
    pub axis: Axis,
    radius_m: f64,
    stop_line_m: f64,
    /// Arrival at the stop line.
    at_stop: Step,
    /// Departure from the stop line.
    depart: Step,
    exit: Step,
}

impl VehicleTrack {
    fn meters_per_step(&self) -> f64 {
        self.speed_kmh / 3.6 / 1000.0
    }

    pub fn exit_time(&self) -> Step {
        self.exit
    }

    pub fn waited_steps(&self) -> Step {
        self.depart - self.at_stop
    }

    pub fn in_coverage(&self, t: Step) -> bool {
        t >= self.spawn && t < self.exit
    }

    /// Distance to the access point, or `None` outside the coverage window.
    pub fn distance_at(&self, t: Step) -> Option<f64> {
        if !self.in_coverage(t) {
            return None;
        }
        let v = self.meters_per_step();
        let d = if t < self.at_stop {
            self.radius_m - v * (t - self.spawn) as f64
        } else if t < self.depart {
            self.stop_line_m
        } else {
            (self.stop_line_m - v * (t - self.depart) as f64).abs()
        };
        Some(d.clamp(0.0, self.radius_m))
    }
}

/// Lazily generates vehicle tracks in spawn order.
pub struct VehicleSpawner {
    cfg: MobilityConfig,
    light: TrafficLight,
    rng: SimRng,
    next_spawn_ms: f64,
    next_id: u64,
}

impl VehicleSpawner {
    pub fn new(cfg: MobilityConfig, mut rng: SimRng) -> Self {
        let light = TrafficLight::new(cfg.green_s);
        let first = Self::gap(&cfg, &mut rng).unwrap_or(f64::INFINITY);
        Self {
            cfg,
            light,
            rng,
            next_spawn_ms: first,
            next_id: 0,
        }
    }

    fn gap(cfg: &MobilityConfig, rng: &mut SimRng) -> Option<f64> {
        if cfg.arrival_rate_per_s <= 0.0 {
            return None;
        }
        let exp = Exp::new(cfg.arrival_rate_per_s / 1000.0).ok()?;
        Some(exp.sample(rng))
    }

    pub fn light(&self) -> TrafficLight {
        self.light
    }

    /// Spawn time of the next vehicle, if traffic is enabled.
    pub fn peek_spawn(&self) -> Option<Step> {
        self.next_spawn_ms
            .is_finite()
            .then(|| self.next_spawn_ms.ceil() as Step)
    }

    fn build(&mut self, spawn: Step) -> VehicleTrack {
        let axis = if self.rng.random::<bool>() {
            Axis::NorthSouth
        } else {
            Axis::EastWest
        };
        let v = self.cfg.speed_kmh / 3.6 / 1000.0;
        let approach = ((self.cfg.radius_m - self.cfg.stop_line_m) / v).ceil() as Step;
        let at_stop = spawn + approach;
        let depart = self.light.next_green(axis, at_stop);
        let cross = ((self.cfg.stop_line_m + self.cfg.radius_m) / v).ceil() as Step;
        let track = VehicleTrack {
            id: self.next_id,
            spawn,
            speed_kmh: self.cfg.speed_kmh,
            axis,
            radius_m: self.cfg.radius_m,
            stop_line_m: self.cfg.stop_line_m,
            at_stop,
            depart,
            exit: depart + cross,
        };
        self.next_id += 1;
        track
    }
}

impl Iterator for VehicleSpawner {
    type Item = VehicleTrack;

    fn next(&mut self) -> Option<VehicleTrack> {
        if !self.next_spawn_ms.is_finite() {
            return None;
        }
        let spawn = self.next_spawn_ms.ceil() as Step;
        let track = self.build(spawn);
        let gap = Self::gap(&self.cfg, &mut self.rng).unwrap_or(f64::INFINITY);
        self.next_spawn_ms += gap;
        Some(track)
    }
}

/// Vehicles in coverage at step `t`.
pub fn concurrent_count(tracks: &[VehicleTrack], t: Step) -> usize {
    tracks.iter().filter(|v| v.in_coverage(t)).count()
}

/// Per-second samples of the concurrent vehicle count over `[0, horizon)`.
pub fn count_series(cfg: MobilityConfig, rng: SimRng, horizon: Step) -> Vec<usize> {
    let tracks: Vec<_> = VehicleSpawner::new(cfg, rng)
        .take_while(|v| v.spawn < horizon)
        .collect();
    let mut deltas = vec![0i64; (horizon / 1000 + 2) as usize];
    for v in &tracks {
        let a = v.spawn.div_ceil(1000) as usize;
        let b = (v.exit.div_ceil(1000) as usize).min(deltas.len() - 1);
        if a < b {
            deltas[a] += 1;
            deltas[b] -= 1;
        }
    }
    let mut out = Vec::with_capacity(deltas.len());
    let mut acc = 0i64;
    for d in deltas.iter().take((horizon / 1000) as usize) {
        acc += d;
        out.push(acc as usize);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng(seed: u64) -> SimRng {
        SimRng::seed_from_u64(seed)
    }

    #[test]
    fn light_alternates() {
        let l = TrafficLight::new(30.0);
        assert!(l.is_green(Axis::NorthSouth, 0));
        assert!(!l.is_green(Axis::EastWest, 0));
        assert!(l.is_green(Axis::EastWest, 30_000));
        assert_eq!(l.next_green(Axis::EastWest, 100), 30_000);
        assert_eq!(l.next_green(Axis::NorthSouth, 30_000), 60_000);
        assert_eq!(l.next_green(Axis::NorthSouth, 59_999), 60_000);
    }

    #[test]
    fn distance_is_bounded_and_exits() {
        let cfg = MobilityConfig::test();
        for v in VehicleSpawner::new(cfg, rng(3)).take(50) {
            assert!(v.distance_at(v.spawn).unwrap() > 64.9);
            assert!(v.distance_at(v.exit_time()).is_none());
            let mut t = v.spawn;
            while t < v.exit_time() {
                let d = v.distance_at(t).unwrap();
                assert!((0.0..=cfg.radius_m).contains(&d));
                t += 97;
            }
        }
    }

    #[test]
    fn zero_arrival_rate_spawns_nothing() {
        let cfg = MobilityConfig {
            arrival_rate_per_s: 0.0,
            ..MobilityConfig::train()
        };
        let mut sp = VehicleSpawner::new(cfg, rng(1));
        assert!(sp.peek_spawn().is_none());
        assert!(sp.next().is_none());
    }

    #[test]
    fn train_preset_count_envelope() {
        // one simulated hour after a two minute warm-up
        let series = count_series(MobilityConfig::train(), rng(11), 3_720_000);
        let tail = &series[120..];
        let mean = tail.iter().sum::<usize>() as f64 / tail.len() as f64;
        assert!((22.0..=29.0).contains(&mean), "mean {mean}");
    }

    #[test]
    fn test_preset_is_bursty_within_envelope() {
        let series = count_series(MobilityConfig::test(), rng(11), 3_720_000);
        let tail = &series[120..];
        let mean = tail.iter().sum::<usize>() as f64 / tail.len() as f64;
        assert!((14.0..=30.0).contains(&mean), "mean {mean}");
        let cv = |s: &[usize]| {
            let m = s.iter().sum::<usize>() as f64 / s.len() as f64;
            let var = s.iter().map(|x| (*x as f64 - m).powi(2)).sum::<f64>() / s.len() as f64;
            var.sqrt() / m
        };
        let train = count_series(MobilityConfig::train(), rng(11), 3_720_000);
        assert!(cv(tail) > cv(&train[120..]));
    }
}
