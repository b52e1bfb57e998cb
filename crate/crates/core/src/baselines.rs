//! Benchmark bidder kinds built from the same agent machinery.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::agent::{Agent, LearningConfig, ModelSet, Networks};
use crate::error::Error;
use crate::simcore::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgoKind {
    Moody,
    /// Actor-critic with fictitious self-play only.
    Ac,
    /// Full module set trained per agent with fixed weights.
    Draco2,
    Random,
}

/// What happens to a bidder's parameters after deployment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeployTraining {
    /// Retrain on a rising credit prediction loss.
    Adaptive,
    /// Train continuously for a fixed number of steps, then freeze.
    Fixed,
    Frozen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Features {
    pub learning: bool,
    pub curiosity: bool,
    pub credit: bool,
    /// Offline training goes through the coordinator.
    pub meta: bool,
    /// Preference vector stays fixed for the whole run.
    pub constant_preferences: bool,
    pub deploy: DeployTraining,
}

impl AlgoKind {
    pub const ALL: [AlgoKind; 4] = [AlgoKind::Moody, AlgoKind::Ac, AlgoKind::Draco2, AlgoKind::Random];

    pub fn label(self) -> &'static str {
        match self {
            AlgoKind::Moody => "moody",
            AlgoKind::Ac => "ac",
            AlgoKind::Draco2 => "draco2-like",
            AlgoKind::Random => "random",
        }
    }

    pub fn features(self) -> Features {
        match self {
            AlgoKind::Moody => Features {
                learning: true,
                curiosity: true,
                credit: true,
                meta: true,
                constant_preferences: false,
                deploy: DeployTraining::Adaptive,
            },
            AlgoKind::Ac => Features {
                learning: true,
                curiosity: false,
                credit: false,
                meta: false,
                constant_preferences: false,
                deploy: DeployTraining::Frozen,
            },
            AlgoKind::Draco2 => Features {
                learning: true,
                curiosity: true,
                credit: true,
                meta: false,
                constant_preferences: true,
                deploy: DeployTraining::Fixed,
            },
            AlgoKind::Random => Features {
                learning: false,
                curiosity: false,
                credit: false,
                meta: false,
                constant_preferences: false,
                deploy: DeployTraining::Frozen,
            },
        }
    }
}

impl fmt::Display for AlgoKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for AlgoKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "moody" => Ok(AlgoKind::Moody),
            "ac" => Ok(AlgoKind::Ac),
            "draco2" | "draco2-like" | "draco2_like" => Ok(AlgoKind::Draco2),
            "random" => Ok(AlgoKind::Random),
            other => Err(Error::Config(format!("unknown bidder kind `{other}`"))),
        }
    }
}

/// Builds a bidder of `kind` with the given starting parameters.
pub fn make_bidder(
    id: usize,
    kind: AlgoKind,
    cfg: Arc<LearningConfig>,
    nets: Arc<Networks>,
    models: ModelSet,
    rng: SimRng,
) -> Agent {
    Agent::new(id, kind, cfg, nets, models, rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_label_round_trip() {
        for k in AlgoKind::ALL {
            assert_eq!(k.label().parse::<AlgoKind>().unwrap(), k);
        }
        assert!("greedy".parse::<AlgoKind>().is_err());
    }

    #[test]
    fn ablations() {
        let ac = AlgoKind::Ac.features();
        assert!(!ac.curiosity && !ac.credit && ac.deploy == DeployTraining::Frozen);
        assert!(AlgoKind::Draco2.features().constant_preferences);
        assert!(!AlgoKind::Random.features().learning);
    }
}
