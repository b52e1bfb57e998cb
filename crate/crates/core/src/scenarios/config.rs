use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::LearningConfig;
use crate::baselines::AlgoKind;
use crate::error::{Error, Result};
use crate::market::{CommodityType, PricingRule, SellerConfig};
use crate::simcore::{ChannelModel, MobilityConfig, Step};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Train,
    Test,
    Custom,
}

/// Grid for the sensitivity command; each empty list means "default only".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SensitivityGrid {
    /// Common factor applied to every bidder's valuation.
    pub valuation_scale: Vec<f64>,
    /// Factor on the backoff cost.
    pub backoff_scale: Vec<f64>,
    /// Fixed utility weight `W^{o1}` for all bidders.
    pub w_utility: Vec<f64>,
    /// Fixed OFR weight `W^{o2}` for all bidders.
    pub w_ofr: Vec<f64>,
}

/// Populations for the heterogeneous-mix command: `counts[i]` bidders of
/// `kind`, the rest of the population of `baseline`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixSpec {
    pub kind: AlgoKind,
    pub baseline: AlgoKind,
    pub counts: Vec<usize>,
}

impl Default for MixSpec {
    fn default() -> Self {
        Self {
            kind: AlgoKind::Moody,
            baseline: AlgoKind::Draco2,
            counts: vec![0, 2, 4],
        }
    }
}

/// Full description of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub preset: Preset,
    pub seed: u64,
    /// Steps simulated by `test`, `mix` and `sensitivity`.
    pub horizon: Step,
    /// Traffic simulated before the market opens.
    pub warmup_steps: Step,
    /// Offline training epochs and their length.
    pub epochs: usize,
    pub epoch_steps: Step,
    /// Long-term reward delay and fairness window.
    pub window: Step,
    /// Mean preference epoch length during deployment; 0 keeps them fixed.
    pub preference_mean_steps: f64,
    pub max_rebids: u8,
    pub initial_budget: f64,
    /// Per-bidder valuation scale as a fraction of initial wealth; the
    /// largest type's valuation equals it, smaller types scale with their
    /// resource units.
    pub valuation_fraction: (f64, f64),
    /// Share of vehicles that issue requests; the rest is background traffic.
    pub participation: f64,
    pub valuation_scale: f64,
    pub backoff_scale: f64,
    /// Multiplicative jitter on nominal work.
    pub jitter: (f64, f64),
    /// Steps of backlog that saturate a seller's utilisation.
    pub load_horizon: f64,
    /// Extra delay of auctioneer broadcasts, at least one step.
    pub feedback_delay: Step,
    /// Fixed preference weights `(o1, o2, o1-2)` overriding sampling.
    pub fixed_preferences: Option<(f64, f64, f64)>,
    pub population: BTreeMap<AlgoKind, usize>,
    pub types: Vec<CommodityType>,
    pub sellers: Vec<SellerConfig>,
    pub pricing: PricingRule,
    pub mobility: MobilityConfig,
    pub channel: ChannelModel,
    pub learning: LearningConfig,
    pub sensitivity: SensitivityGrid,
    pub mix: MixSpec,
}

impl ScenarioConfig {
    pub fn preset(preset: Preset) -> Self {
        let test = preset == Preset::Test;
        // the preset capacity is the total over both sites
        let per_site = if test { 5.0 } else { 30.0 };
        Self {
            preset,
            seed: 1,
            horizon: if test { 100_000 } else { 50_000 },
            warmup_steps: 60_000,
            epochs: 5,
            epoch_steps: 10_000,
            window: 2000,
            preference_mean_steps: 5000.0,
            max_rebids: 1,
            initial_budget: 1.0,
            valuation_fraction: (0.5, 1.0),
            participation: 1.0,
            valuation_scale: 1.0,
            backoff_scale: 1.0,
            jitter: (1.0, 1.2),
            load_horizon: 20.0,
            feedback_delay: 1,
            fixed_preferences: None,
            population: BTreeMap::from([(AlgoKind::Moody, 6)]),
            types: vec![CommodityType::motion_planning(), CommodityType::image_segmentation()],
            sellers: vec![
                SellerConfig {
                    capacity: per_site,
                    extra_delay: 0,
                    slots_per_type: 2,
                },
                SellerConfig {
                    capacity: per_site,
                    extra_delay: 5,
                    slots_per_type: 2,
                },
            ],
            pricing: PricingRule::default(),
            mobility: if test {
                MobilityConfig::test()
            } else {
                MobilityConfig::train()
            },
            channel: ChannelModel::default(),
            learning: LearningConfig::default(),
            sensitivity: SensitivityGrid::default(),
            mix: MixSpec::default(),
        }
    }

    /// Parses a TOML document: the `preset` key picks the base, every other
    /// key overrides it.
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let user: toml::Table = s
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let preset = match user.get("preset") {
            None => Preset::Custom,
            Some(v) => v
                .clone()
                .try_into()
                .map_err(|e: toml::de::Error| Error::Config(format!("preset: {e}")))?,
        };
        let base = toml::Table::try_from(Self::preset(preset))
            .map_err(|e| Error::Config(e.to_string()))?;
        let merged = merge(base, user);
        let cfg: Self = merged
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn bidder_count(&self) -> usize {
        self.population.values().sum()
    }

    /// Bidder kinds in id order.
    pub fn roster(&self) -> Vec<AlgoKind> {
        self.population
            .iter()
            .flat_map(|(k, n)| std::iter::repeat_n(*k, *n))
            .collect()
    }

    pub fn total_capacity(&self) -> f64 {
        self.sellers.iter().map(|s| s.capacity).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.types.is_empty() {
            return bad("at least one commodity type is required".into());
        }
        for t in &self.types {
            t.validate().map_err(Error::Config)?;
        }
        if self.sellers.is_empty() {
            return bad("at least one seller is required".into());
        }
        if self.sellers.iter().any(|s| !(s.capacity >= 0.0)) {
            return bad("seller capacity must be >= 0".into());
        }
        if self.bidder_count() == 0 {
            return bad("population is empty".into());
        }
        if self.window == 0 {
            return bad("window must be > 0".into());
        }
        if self.feedback_delay == 0 {
            return bad("feedback_delay must be >= 1".into());
        }
        let (lo, hi) = self.valuation_fraction;
        if !(lo > 0.0 && hi >= lo && hi <= 1.0) {
            return bad("valuation_fraction must satisfy 0 < lo <= hi <= 1".into());
        }
        if !(0.0..=1.0).contains(&self.participation) {
            return bad("participation must be in [0, 1]".into());
        }
        if !(self.initial_budget > 0.0) {
            return bad("initial_budget must be > 0".into());
        }
        if self.jitter.0 <= 0.0 || self.jitter.1 < self.jitter.0 {
            return bad("jitter must satisfy 0 < lo <= hi".into());
        }
        if self.mobility.radius_m > self.channel.radius_m + 1e-9 {
            return bad("mobility radius exceeds channel radius".into());
        }
        if let Some((a, b, c)) = self.fixed_preferences {
            if [a, b, c].iter().any(|w| !(0.0..=1.0).contains(w)) {
                return bad("fixed_preferences weights must be in [0, 1]".into());
            }
        }
        if self.mix.kind == self.mix.baseline {
            return bad("mix kind and baseline must differ".into());
        }
        let g = &self.sensitivity;
        if g.valuation_scale.iter().chain(&g.backoff_scale).any(|x| *x <= 0.0) {
            return bad("sensitivity scales must be positive".into());
        }
        if g.w_utility.iter().chain(&g.w_ofr).any(|w| !(0.0..=1.0).contains(w)) {
            return bad("sensitivity weights must be in [0, 1]".into());
        }
        self.learning.validate()
    }
}

/// Tables merge key by key, except `population`, which is replaced whole.
fn merge(mut base: toml::Table, user: toml::Table) -> toml::Table {
    for (k, v) in user {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(u)) if k != "population" => {
                let merged = merge(std::mem::take(b), u);
                *b = merged;
            }
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
    base
}
