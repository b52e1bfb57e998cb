//! Linear distance-to-throughput radio model and transmission delays.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simcore::Step;

/// Throughput falls linearly with distance from the access point:
/// `throughput(d) = intercept - slope * d` Mbps, clamped below at `floor`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelModel {
    pub slope_mbps_per_m: f64,
    pub intercept_mbps: f64,
    pub radius_m: f64,
    pub floor_mbps: f64,
}

impl Default for ChannelModel {
    fn default() -> Self {
        Self {
            slope_mbps_per_m: 26.0,
            intercept_mbps: 1690.0,
            radius_m: 65.0,
            // the linear formula's value at 64 m; it hits 0 at the 65 m edge
            floor_mbps: 26.0,
        }
    }
}

impl ChannelModel {
    pub fn throughput_mbps(&self, distance_m: f64) -> f64 {
        (self.intercept_mbps - self.slope_mbps_per_m * distance_m).max(self.floor_mbps)
    }

    /// Steps needed to move `data_mbit` over the link at `distance_m`.
    pub fn transmission_delay(&self, data_mbit: f64, distance_m: f64) -> Result<Step> {
        if distance_m > self.radius_m {
            return Err(Error::OutOfRange {
                distance: distance_m,
                radius: self.radius_m,
            });
        }
        if data_mbit <= 0.0 {
            return Ok(0);
        }
        let ms = data_mbit / self.throughput_mbps(distance_m.max(0.0)) * 1000.0;
        // absorb representation noise on exact integers (e.g. 1.0000000000002)
        Ok((ms - 1e-9).ceil().max(0.0) as Step)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_evaluated_delays() {
        let ch = ChannelModel::default();
        assert_eq!(ch.throughput_mbps(50.0), 390.0);
        assert_eq!(ch.transmission_delay(0.4, 50.0).unwrap(), 2);
        assert_eq!(ch.transmission_delay(0.0, 30.0).unwrap(), 0);
        assert_eq!(ch.transmission_delay(0.0, 65.0).unwrap(), 0);
        // formula gives 0 Mbps at the edge; the floor applies
        assert_eq!(ch.throughput_mbps(65.0), 26.0);
        assert_eq!(ch.transmission_delay(4.0, 65.0).unwrap(), 154);
    }

    #[test]
    fn out_of_range_is_an_error() {
        let ch = ChannelModel::default();
        assert!(matches!(
            ch.transmission_delay(1.0, 65.5),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn exact_integer_delay_is_not_rounded_up() {
        let ch = ChannelModel::default();
        // 0.39 Mbit at 390 Mbps is exactly 1 ms
        assert_eq!(ch.transmission_delay(0.39, 50.0).unwrap(), 1);
    }

    #[test]
    fn monotone_in_size_and_distance() {
        let ch = ChannelModel::default();
        let mut prev = 0;
        for i in 0..=40 {
            let d = ch.transmission_delay(i as f64 * 0.1, 40.0).unwrap();
            assert!(d >= prev);
            prev = d;
        }
        let mut prev = 0;
        for m in 0..=65 {
            // farther means lower throughput, so never shorter
            let d = ch.transmission_delay(2.0, m as f64).unwrap();
            assert!(d >= prev);
            prev = d;
        }
    }
}
