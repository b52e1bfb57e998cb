use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Learning hyperparameters shared by every learning bidder in a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningConfig {
    pub discount: f64,
    pub lr_actor: f64,
    pub lr_behavior: f64,
    pub lr_curiosity: f64,
    pub lr_credit: f64,
    pub value_coef: f64,
    /// Transitions per shot.
    pub shot_size: usize,
    /// Local shots between gradient handoffs.
    pub tau: usize,
    /// Coordinator step size.
    pub meta_lr: f64,
    /// Per-module gradient norm clip, 0 disables.
    pub grad_clip: f64,
    pub eta0: f64,
    pub eta_steps: f64,
    pub stack_depth: usize,
    pub hidden: Vec<usize>,
    pub curiosity_hidden: usize,
    pub credit_hidden: usize,
    pub credit_attention: usize,
    pub credit_segments: usize,
    pub credit_buffer: usize,
    pub price_levels: usize,
    pub retrain_history: usize,
    pub retrain_shots: usize,
    /// Simulated steps a retrain cycle takes before its parameters go live.
    pub retrain_cycle_steps: u64,
    /// Fixed deployment retraining length for the DRACO2-like bidder.
    pub fixed_retrain_steps: u64,
    pub memory_capacity: usize,
    /// Divergence guard on any training loss.
    pub loss_ceiling: f64,
}

impl Default for LearningConfig {
    fn default() -> Self {
        Self {
            discount: 0.9,
            lr_actor: 0.01,
            lr_behavior: 0.01,
            lr_curiosity: 0.01,
            lr_credit: 0.01,
            value_coef: 0.5,
            shot_size: 8,
            tau: 3,
            meta_lr: 0.1,
            grad_clip: 5.0,
            eta0: 0.9,
            eta_steps: 20_000.0,
            stack_depth: 4,
            hidden: vec![32, 32],
            curiosity_hidden: 32,
            credit_hidden: 16,
            credit_attention: 16,
            credit_segments: 50,
            credit_buffer: 16,
            price_levels: 11,
            retrain_history: 10,
            retrain_shots: 1,
            retrain_cycle_steps: 200,
            fixed_retrain_steps: 10_000,
            memory_capacity: 8192,
            loss_ceiling: 1e6,
        }
    }
}

impl LearningConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("learning.{m}")));
        if !(0.0..=1.0).contains(&self.discount) {
            return bad("discount must be in [0, 1]");
        }
        if self.shot_size == 0 {
            return bad("shot_size must be > 0");
        }
        if self.stack_depth == 0 {
            return bad("stack_depth must be > 0");
        }
        if self.price_levels < 2 {
            return bad("price_levels must be >= 2");
        }
        if self.credit_segments == 0 || self.credit_hidden == 0 || self.credit_attention == 0 {
            return bad("credit sizes must be > 0");
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden layers must be non-empty and > 0");
        }
        if !(0.0..1.0).contains(&self.eta0) {
            return bad("eta0 must be in [0, 1)");
        }
        if self.retrain_history == 0 {
            return bad("retrain_history must be > 0");
        }
        Ok(())
    }
}
