//! Offline training and deployment runs over one seed.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use super::{InvariantCounters, MetricRow, ScenarioConfig, World, WorldOptions};
use crate::agent::{Agent, LearningConfig, ModelSet, Networks};
use crate::baselines::{make_bidder, AlgoKind};
use crate::error::{Error, Result};
use crate::market::AuditRow;
use crate::meta::Coordinator;
use crate::nn::Checkpoint;
use crate::simcore::{RngStreams, Step, Stream};

/// One row of the training CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainingRow {
    pub step: Step,
    pub epoch: u64,
    pub agent: usize,
    pub algo: &'static str,
    pub shot: u64,
    pub rl_reward: f64,
    pub credit_loss: f64,
    pub forward_loss: f64,
    pub inverse_loss: f64,
}

pub struct TrainOutput {
    pub checkpoints: BTreeMap<AlgoKind, Checkpoint>,
    pub training: Vec<TrainingRow>,
    pub metrics: Vec<MetricRow>,
    pub coordinator_updates: u64,
}

pub struct TestOutput {
    pub metrics: Vec<MetricRow>,
    pub audit: Vec<AuditRow>,
    pub trace: Vec<String>,
    pub invariants: InvariantCounters,
    /// Per bidder: `(kind, retrain event steps, retrain busy steps)`.
    pub retrains: Vec<(AlgoKind, Vec<Step>, u64)>,
}

/// Shared network shapes for a scenario.
pub fn networks(cfg: &ScenarioConfig) -> (Arc<LearningConfig>, Arc<Networks>) {
    let lc = Arc::new(cfg.learning.clone());
    let nets = Arc::new(Networks::new(&lc, cfg.types.len()));
    (lc, nets)
}

/// Initial parameters of a kind: the same draw for every bidder of the kind.
pub fn initial_models(cfg: &ScenarioConfig, nets: &Networks, kind: AlgoKind) -> ModelSet {
    let streams = RngStreams::new(cfg.seed);
    let idx = AlgoKind::ALL.iter().position(|k| *k == kind).unwrap_or(0) as u64;
    nets.init(&mut streams.fork(Stream::LearningInit, idx))
}

fn population(
    cfg: &ScenarioConfig,
    mut models_for: impl FnMut(AlgoKind) -> Result<ModelSet>,
) -> Result<Vec<Agent>> {
    let (lc, nets) = networks(cfg);
    let streams = RngStreams::new(cfg.seed);
    cfg.roster()
        .into_iter()
        .enumerate()
        .map(|(id, kind)| {
            Ok(make_bidder(
                id,
                kind,
                Arc::clone(&lc),
                Arc::clone(&nets),
                models_for(kind)?,
                streams.fork(Stream::Exploration, id as u64),
            ))
        })
        .collect()
}

/// Offline training: `epochs` consecutive epochs in one world. Bidders of
/// kinds with meta-learning share a coordinator whose parameters are
/// broadcast at every epoch start; other kinds train locally.
pub fn train_run(cfg: &ScenarioConfig) -> Result<TrainOutput> {
    let (_, nets) = networks(cfg);
    let init: BTreeMap<AlgoKind, ModelSet> = cfg
        .population
        .keys()
        .map(|k| (*k, initial_models(cfg, &nets, *k)))
        .collect();
    let mut agents = population(cfg, |k| Ok(init[&k].clone()))?;
    let meta_init = agents
        .iter()
        .find(|a| a.features.meta)
        .map(|a| a.models.clone());
    let coordinator = meta_init.map(|m| Coordinator::new(m.into_vec(), cfg.learning.meta_lr).shared());
    for a in &mut agents {
        a.start_training(coordinator.clone());
    }
    let cfg_arc = Arc::new(cfg.clone());
    let mut world = World::new(cfg_arc, agents, WorldOptions::default())?;
    for epoch in 0..cfg.epochs {
        if epoch > 0 {
            world.resample_preferences();
        }
        if let Some(c) = &coordinator {
            let params = c.lock().expect("coordinator lock poisoned").params().to_vec();
            let generic = ModelSet::from_vec(params)
                .ok_or_else(|| Error::LayoutMismatch("coordinator module count".into()))?;
            for a in world.agents_mut().filter(|a| a.features.meta) {
                a.models = generic.clone();
            }
        }
        world.run(cfg.epoch_steps)?;
        log::info!("seed {} epoch {} done", cfg.seed, epoch + 1);
    }
    let trained = cfg.epochs as u64 * cfg.epoch_steps;
    let metrics = world.metrics().to_vec();
    let agents = world.into_agents();
    let mut checkpoints = BTreeMap::new();
    let mut updates = 0;
    if let Some(c) = coordinator {
        let c = c.lock().expect("coordinator lock poisoned");
        updates = c.updates();
        let generic = ModelSet::from_vec(c.params().to_vec())
            .ok_or_else(|| Error::LayoutMismatch("coordinator module count".into()))?;
        for a in agents.iter().filter(|a| a.features.meta) {
            checkpoints
                .entry(a.kind)
                .or_insert_with(|| generic.to_checkpoint(a.kind.label(), trained));
        }
    }
    for a in &agents {
        checkpoints
            .entry(a.kind)
            .or_insert_with(|| a.models.to_checkpoint(a.kind.label(), trained));
    }
    let epoch_len = cfg.epoch_steps.max(1);
    let training = agents
        .iter()
        .flat_map(|a| {
            a.log.shots.iter().map(move |s| TrainingRow {
                step: s.step,
                epoch: s.step / epoch_len,
                agent: a.id,
                algo: a.kind.label(),
                shot: s.shot,
                rl_reward: s.rl_reward,
                credit_loss: s.credit_loss,
                forward_loss: s.forward_loss,
                inverse_loss: s.inverse_loss,
            })
        })
        .collect();
    Ok(TrainOutput {
        checkpoints,
        training,
        metrics,
        coordinator_updates: updates,
    })
}

/// Deployment run. Learning kinds start from their checkpoint; kinds
/// without learning start from a fresh draw.
pub fn test_run(
    cfg: &ScenarioConfig,
    checkpoints: &BTreeMap<AlgoKind, Checkpoint>,
    audit: bool,
    trace: bool,
) -> Result<TestOutput> {
    let (_, nets) = networks(cfg);
    let mut base = BTreeMap::new();
    let agents = population(cfg, |k| {
        if !k.features().learning {
            return Ok(initial_models(cfg, &nets, k));
        }
        let c = checkpoints
            .get(&k)
            .ok_or_else(|| Error::Checkpoint(format!("no checkpoint for bidder kind {}", k.label())))?;
        base.insert(k, c.trained_steps);
        ModelSet::from_checkpoint(c, &nets)
    })?;
    let mut agents = agents;
    for a in &mut agents {
        a.start_test(base.get(&a.kind).copied().unwrap_or(0));
    }
    let opts = WorldOptions {
        audit,
        trace,
        preference_clock: true,
    };
    let mut world = World::new(Arc::new(cfg.clone()), agents, opts)?;
    world.run(cfg.horizon)?;
    let metrics = world.metrics().to_vec();
    let audit = world.audit_rows().to_vec();
    let trace = world.trace_lines().to_vec();
    let invariants = world.invariants();
    let retrains = world
        .into_agents()
        .into_iter()
        .map(|a| (a.kind, a.log.retrain_events.clone(), a.log.retrain_steps))
        .collect();
    Ok(TestOutput {
        metrics,
        audit,
        trace,
        invariants,
        retrains,
    })
}
