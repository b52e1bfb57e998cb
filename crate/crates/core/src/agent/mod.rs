//! The learning bidder: state assembly, memory, FSP action choice, curiosity,
//! credit assignment, inner-loop training and adaptive retraining.

mod config;
mod credit;
mod fsp;
mod memory;
mod models;
mod retrain;
mod state;
mod train;

use std::collections::VecDeque;
use std::sync::Arc;

pub use config::LearningConfig;
pub use credit::{normalized_eps, segment_input_dim, segment_inputs, segment_of, CreditSample};
pub use fsp::{select_action, EtaSchedule};
pub use memory::{AgentMemory, Transition};
pub use models::{ModelSet, Networks};
pub use retrain::RetrainMonitor;
pub use state::{build_state, state_dim, HeadView, Observation, StateStack};
pub use train::{credit_gradient, credit_step, inner_train_step, shot_gradients, ShotGrads};

use crate::baselines::{AlgoKind, DeployTraining, Features};
use crate::error::Result;
use crate::meta::{submit_gradient, SharedCoordinator};
use crate::nn::{Gradient, HeadDist, TypeAction};
use crate::rewards::PreferenceVector;
use crate::simcore::{SimRng, Step};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Train,
    Test,
}

/// One training update as logged to the training CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotRecord {
    pub step: Step,
    pub shot: u64,
    pub rl_reward: f64,
    pub credit_loss: f64,
    pub forward_loss: f64,
    pub inverse_loss: f64,
    pub handoff: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AgentLog {
    pub shots: Vec<ShotRecord>,
    /// Credit prediction loss at each long-term delivery, before training.
    pub credit_losses: Vec<(Step, f64)>,
    pub retrain_events: Vec<Step>,
    pub retrain_steps: u64,
    pub decisions: u64,
    pub best_response: u64,
}

#[derive(Debug, Clone)]
pub struct Agent {
    pub id: usize,
    pub kind: AlgoKind,
    pub features: Features,
    pub preferences: PreferenceVector,
    pub models: ModelSet,
    pub monitor: RetrainMonitor,
    pub log: AgentLog,
    cfg: Arc<LearningConfig>,
    nets: Arc<Networks>,
    staged: Option<(Step, ModelSet)>,
    stack: StateStack,
    memory: AgentMemory,
    rng: SimRng,
    credit_samples: VecDeque<CreditSample>,
    phase: Phase,
    coordinator: Option<SharedCoordinator>,
    eta: EtaSchedule,
    /// Steps of experience carried in from the checkpoint.
    base_steps: u64,
    shots_in_cycle: usize,
    shot_count: u64,
    pending: Vec<Transition>,
    last_credit_loss: f64,
}

impl Agent {
    pub fn new(
        id: usize,
        kind: AlgoKind,
        cfg: Arc<LearningConfig>,
        nets: Arc<Networks>,
        models: ModelSet,
        rng: SimRng,
    ) -> Self {
        Self::with_features(id, kind, kind.features(), cfg, nets, models, rng)
    }

    pub fn with_features(
        id: usize,
        kind: AlgoKind,
        features: Features,
        cfg: Arc<LearningConfig>,
        nets: Arc<Networks>,
        models: ModelSet,
        rng: SimRng,
    ) -> Self {
        Self {
            id,
            kind,
            features,
            preferences: PreferenceVector::balanced(),
            models,
            monitor: RetrainMonitor::new(cfg.retrain_history, cfg.retrain_shots),
            log: AgentLog::default(),
            staged: None,
            stack: StateStack::new(cfg.stack_depth, nets.state_dim),
            memory: AgentMemory::new(cfg.memory_capacity),
            rng,
            credit_samples: VecDeque::new(),
            phase: Phase::Test,
            coordinator: None,
            eta: EtaSchedule {
                eta0: cfg.eta0,
                scale: cfg.eta_steps,
            },
            base_steps: 0,
            shots_in_cycle: 0,
            shot_count: 0,
            pending: Vec::new(),
            last_credit_loss: f64::NAN,
            cfg,
            nets,
        }
    }

    /// Switches to offline training, optionally through a coordinator.
    pub fn start_training(&mut self, coordinator: Option<SharedCoordinator>) {
        self.phase = Phase::Train;
        self.coordinator = coordinator.filter(|_| self.features.meta);
    }

    pub fn start_test(&mut self, base_steps: u64) {
        self.phase = Phase::Test;
        self.coordinator = None;
        self.base_steps = base_steps;
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn set_base_steps(&mut self, steps: u64) {
        self.base_steps = steps;
    }

    pub fn eta(&self, now: Step) -> f64 {
        self.eta.at(self.base_steps + now)
    }

    pub fn memory(&self) -> &AgentMemory {
        &self.memory
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    pub fn has_staged(&self) -> bool {
        self.staged.is_some()
    }

    /// Swaps in retrained parameters once their cycle has finished.
    pub fn apply_staged(&mut self, now: Step) {
        if matches!(self.staged, Some((at, _)) if at <= now) {
            if let Some((_, m)) = self.staged.take() {
                self.models = m;
            }
        }
    }

    /// Chooses this step's action for each present head-of-queue request and
    /// records the decision. The previous decision is closed with this state.
    pub fn decide(&mut self, now: Step, obs: &Observation) -> Vec<Option<TypeAction>> {
        let state = build_state(obs);
        let phi = self.stack.push(state.clone());
        let curiosity = self.features.curiosity;
        let nets = Arc::clone(&self.nets);
        let cur = &self.models.curiosity.values;
        if let Some(open) = self.memory.open_mut() {
            if curiosity {
                open.l_f = nets
                    .curiosity
                    .forward_loss(cur, &open.phi, &open.actions, &state)
                    .unwrap_or(0.0);
            }
            open.next_phi = Some(phi.clone());
            open.next_state = Some(state.clone());
        }
        let present: Vec<bool> = obs.heads.iter().map(|h| h.is_some()).collect();
        let (actions, best) = if self.features.learning {
            let eta = self.eta(now);
            let b = nets.policy.forward(&self.models.actor_critic.values, &phi);
            let p = nets.behavior.forward(&self.models.behavior.values, &phi);
            match (b, p) {
                (Ok(b), Ok(p)) => select_action(eta, &b, &p, &present, &mut self.rng),
                _ => (vec![None; present.len()], false),
            }
        } else {
            let u = HeadDist::uniform(self.nets.levels);
            let a = present
                .iter()
                .map(|p| p.then(|| u.sample(&mut self.rng)))
                .collect();
            (a, false)
        };
        self.log.decisions += 1;
        self.log.best_response += best as u64;
        let mut t = Transition::new(now, phi, state, actions.clone(), best);
        t.labeled = !self.features.credit;
        self.memory.push(t);
        actions
    }

    /// Adds scalarised reward to the latest decision.
    pub fn add_reward(&mut self, r: f64) {
        if let Some(t) = self.memory.last_mut() {
            t.r_e += r;
        }
    }

    /// Long-term reward for the window `[start, end)`. With credit
    /// assignment the reward is spread over the window by attention weights;
    /// otherwise it lands on the latest decision.
    pub fn deliver_long_term(&mut self, now: Step, start: Step, end: Step, r_long: f64) -> Result<Option<f64>> {
        if !self.features.credit {
            if let Some(t) = self.memory.last_mut() {
                t.long_share += r_long;
            }
            return Ok(None);
        }
        let n = self.memory.window(start, end).count();
        if n == 0 {
            return Ok(None);
        }
        let cfg = Arc::clone(&self.cfg);
        let nets = Arc::clone(&self.nets);
        let segments = segment_inputs(
            self.memory.window(start, end),
            start,
            end - start,
            cfg.credit_segments,
            nets.state_dim,
            nets.levels,
        );
        let out = nets.credit.forward(&self.models.credit.values, &segments)?;
        let loss = (out.prediction - r_long).powi(2);
        let segs: Vec<usize> = self
            .memory
            .window(start, end)
            .map(|t| segment_of(t.step, start, end - start, cfg.credit_segments))
            .collect();
        let eps = normalized_eps(&out.eps, &segs);
        let share = r_long / n as f64;
        for (t, e) in self.memory.window_mut(start, end).zip(eps) {
            t.eps = e;
            t.long_share = share;
            t.labeled = true;
        }
        if self.credit_samples.len() == cfg.credit_buffer.max(1) {
            self.credit_samples.pop_front();
        }
        self.credit_samples.push_back(CreditSample {
            segments,
            target: r_long,
        });
        self.last_credit_loss = loss;
        self.log.credit_losses.push((now, loss));

        match (self.phase, self.features.deploy) {
            (Phase::Train, _) if self.features.learning => self.train_credit()?,
            (Phase::Test, DeployTraining::Fixed) if now < cfg.fixed_retrain_steps => self.train_credit()?,
            (Phase::Test, DeployTraining::Adaptive) => {
                self.collect_ready();
                if self.monitor.check(loss) {
                    self.retrain(now)?;
                }
                self.pending.clear();
            }
            _ => {}
        }
        Ok(Some(loss))
    }

    fn train_credit(&mut self) -> Result<()> {
        let samples: Vec<CreditSample> = self.credit_samples.iter().cloned().collect();
        for s in &samples {
            credit_step(&self.nets, &mut self.models, s, &self.cfg)?;
        }
        Ok(())
    }

    fn collect_ready(&mut self) {
        let ready = self.memory.take_ready();
        self.pending.extend(ready);
        let cap = self.cfg.memory_capacity;
        if self.pending.len() > cap {
            let excess = self.pending.len() - cap;
            self.pending.drain(..excess);
        }
    }

    /// Runs one retrain cycle on everything collected since the last update.
    /// The result goes live `retrain_cycle_steps` later.
    fn retrain(&mut self, now: Step) -> Result<()> {
        let cfg = Arc::clone(&self.cfg);
        let mut staged = self.models.clone();
        for _ in 0..self.monitor.shots.max(1) {
            for batch in self.pending.chunks(cfg.shot_size) {
                inner_train_step(&self.nets, &mut staged, batch, &cfg, self.features.curiosity)?;
            }
            for s in &self.credit_samples {
                credit_step(&self.nets, &mut staged, s, &cfg)?;
            }
        }
        self.staged = Some((now + cfg.retrain_cycle_steps, staged));
        self.log.retrain_events.push(now);
        self.log.retrain_steps += cfg.retrain_cycle_steps;
        Ok(())
    }

    /// Consumes ready transitions according to the phase: shots during
    /// offline training or fixed deployment retraining, collection for
    /// adaptive retraining, nothing otherwise.
    pub fn train(&mut self, now: Step) -> Result<()> {
        if !self.features.learning {
            return Ok(());
        }
        let continuous = match self.phase {
            Phase::Train => true,
            Phase::Test => {
                self.features.deploy == DeployTraining::Fixed && now < self.cfg.fixed_retrain_steps
            }
        };
        if self.phase == Phase::Test && self.features.deploy == DeployTraining::Adaptive {
            self.collect_ready();
            return Ok(());
        }
        if !continuous {
            self.memory.take_ready();
            return Ok(());
        }
        self.collect_ready();
        let k = self.cfg.shot_size;
        while self.pending.len() >= k {
            let batch: Vec<Transition> = self.pending.drain(..k).collect();
            self.shot(now, &batch)?;
        }
        Ok(())
    }

    fn shot(&mut self, now: Step, batch: &[Transition]) -> Result<()> {
        let cfg = Arc::clone(&self.cfg);
        let curiosity = self.features.curiosity;
        self.shot_count += 1;
        let (grads, handoff) = match self.coordinator.clone() {
            Some(_) if cfg.tau == 0 => (shot_gradients(&self.nets, &self.models, batch, &cfg, curiosity), false),
            Some(coord) if self.shots_in_cycle >= cfg.tau => {
                let g = shot_gradients(&self.nets, &self.models, batch, &cfg, curiosity);
                let credit = match self.credit_samples.back() {
                    Some(s) => credit_gradient(&self.nets, &self.models, s)?.1,
                    None => vec![0.0; self.models.credit.len()],
                };
                let mk = |values: Vec<f64>| Gradient {
                    values,
                    agent: self.id,
                    shot: self.shot_count,
                };
                let mut bundle = vec![
                    mk(g.actor_critic.clone()),
                    mk(g.behavior.clone()),
                    mk(g.curiosity.clone()),
                    mk(credit),
                ];
                if cfg.grad_clip > 0.0 {
                    for b in &mut bundle {
                        crate::nn::clip_norm(&mut b.values, cfg.grad_clip);
                    }
                }
                let fresh = submit_gradient(&coord, &bundle)?;
                if let Some(m) = ModelSet::from_vec(fresh) {
                    self.models = m;
                }
                self.shots_in_cycle = 0;
                (g, true)
            }
            _ => {
                let g = inner_train_step(&self.nets, &mut self.models, batch, &cfg, curiosity)?;
                self.shots_in_cycle += 1;
                (g, false)
            }
        };
        self.log.shots.push(ShotRecord {
            step: now,
            shot: self.shot_count,
            rl_reward: grads.rl_reward,
            credit_loss: self.last_credit_loss,
            forward_loss: grads.forward_loss,
            inverse_loss: grads.inverse_loss,
            handoff,
        });
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn agent(kind: AlgoKind) -> Agent {
        let cfg = Arc::new(LearningConfig {
            shot_size: 2,
            ..Default::default()
        });
        let nets = Arc::new(Networks::new(&cfg, 2));
        let models = nets.init(&mut SimRng::seed_from_u64(1));
        Agent::new(0, kind, cfg, nets, models, SimRng::seed_from_u64(2))
    }

    fn obs(budget_ratio: f64) -> Observation {
        Observation {
            heads: vec![
                Some(HeadView {
                    ttd_frac: 0.8,
                    resource_units: 80.0,
                    rebid_count: 0,
                }),
                None,
            ],
            active_fraction: 1.0,
            utilization: vec![0.1, 0.0],
            budget_ratio,
            payments: vec![0.0, 0.0],
            prev_reward: 0.0,
        }
    }

    #[test]
    fn only_present_heads_act() {
        let mut a = agent(AlgoKind::Moody);
        for t in 0..20 {
            let acts = a.decide(t, &obs(1.0));
            assert!(acts[0].is_some() && acts[1].is_none());
        }
    }

    #[test]
    fn credit_labels_exactly_the_window() {
        let mut a = agent(AlgoKind::Moody);
        for t in 0..30 {
            a.decide(t * 10, &obs(1.0));
            a.add_reward(0.1 * t as f64);
        }
        a.deliver_long_term(200, 100, 200, 1.0).unwrap();
        for t in a.memory().iter() {
            assert_eq!(t.labeled, (100..200).contains(&t.step), "step {}", t.step);
        }
        let inside: Vec<_> = a.memory().window(100, 200).collect();
        let eps_sum: f64 = inside.iter().map(|t| t.eps).sum();
        assert!((eps_sum - inside.len() as f64).abs() < 1e-9);
        for t in &inside {
            assert_eq!(t.long_share, 0.1);
            assert_eq!(t.intrinsic_reward(), t.eps * (t.r_e + t.long_share) + t.l_f);
        }
    }

    #[test]
    fn ablated_agent_gets_reward_on_latest_entry() {
        let mut a = agent(AlgoKind::Ac);
        for t in 0..5 {
            a.decide(t, &obs(1.0));
        }
        a.deliver_long_term(5, 0, 5, 2.0).unwrap();
        let last = a.memory().last().unwrap();
        assert_eq!(last.long_share, 2.0);
        assert!(a.memory().iter().all(|t| t.l_f == 0.0));
        assert!(a.log.credit_losses.is_empty());
    }

    #[test]
    fn random_bidder_is_uniform() {
        let mut a = agent(AlgoKind::Random);
        let mut bids = 0;
        let n = 4000;
        for t in 0..n {
            if let Some(TypeAction::Bid(_)) = a.decide(t, &obs(1.0))[0] {
                bids += 1;
            }
        }
        assert!((bids as f64 / n as f64 - 0.5).abs() < 0.03);
    }

    #[test]
    fn frozen_test_agent_never_changes() {
        let mut a = agent(AlgoKind::Ac);
        a.start_test(0);
        let before = a.models.clone();
        for t in 0..50 {
            a.decide(t, &obs(1.0));
            a.add_reward(1.0);
            a.train(t).unwrap();
        }
        assert_eq!(a.models, before);
    }

    #[test]
    fn training_agent_updates_in_shots() {
        let mut a = agent(AlgoKind::Ac);
        a.start_training(None);
        let before = a.models.actor_critic.clone();
        for t in 0..9 {
            a.decide(t, &obs(1.0));
            a.add_reward(if t % 2 == 0 { 1.0 } else { -1.0 });
            a.train(t).unwrap();
        }
        // 8 closed transitions -> 4 shots of 2
        assert_eq!(a.log.shots.len(), 4);
        assert_ne!(a.models.actor_critic, before);
    }

    #[test]
    fn adaptive_retrain_is_staged() {
        let mut a = agent(AlgoKind::Moody);
        a.start_test(0);
        for t in 0..100 {
            a.decide(t, &obs(1.0));
            a.add_reward(0.2);
            a.train(t).unwrap();
        }
        let before = a.models.clone();
        a.deliver_long_term(100, 0, 100, 0.5).unwrap();
        assert_eq!(a.log.retrain_events, vec![100]);
        assert!(a.has_staged());
        a.apply_staged(150);
        assert_eq!(a.models, before);
        a.apply_staged(300);
        assert!(!a.has_staged());
        assert_ne!(a.models, before);
    }
}
