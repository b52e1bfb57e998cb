use serde::{Deserialize, Serialize};

use super::{credit::segment_input_dim, state::state_dim, LearningConfig};
use crate::error::Result;
use crate::nn::{
    Checkpoint, CreditArch, CreditNet, CuriosityArch, CuriosityNet, Layout, ParamVector, PolicyArch,
    PolicyNet,
};
use crate::simcore::SimRng;

/// Architectures of every learned module; identical for all agents in a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Networks {
    pub n_types: usize,
    pub state_dim: usize,
    pub feature_dim: usize,
    pub levels: usize,
    pub policy: PolicyNet,
    pub behavior: PolicyNet,
    pub curiosity: CuriosityNet,
    pub credit: CreditNet,
}

impl Networks {
    pub fn new(cfg: &LearningConfig, n_types: usize) -> Self {
        let sd = state_dim(n_types);
        let fd = sd * cfg.stack_depth;
        let arch = PolicyArch {
            input: fd,
            hidden: cfg.hidden.clone(),
            n_types,
            levels: cfg.price_levels,
        };
        Self {
            n_types,
            state_dim: sd,
            feature_dim: fd,
            levels: cfg.price_levels,
            policy: PolicyNet::actor_critic(arch.clone()),
            behavior: PolicyNet::supervised(arch),
            curiosity: CuriosityNet::new(CuriosityArch {
                feature: fd,
                state: sd,
                hidden: cfg.curiosity_hidden,
                n_types,
                levels: cfg.price_levels,
            }),
            credit: CreditNet::new(CreditArch {
                input: segment_input_dim(sd),
                hidden: cfg.credit_hidden,
                attention: cfg.credit_attention,
            }),
        }
    }

    pub fn layouts(&self) -> [&Layout; 4] {
        [
            self.policy.layout(),
            self.behavior.layout(),
            self.curiosity.layout(),
            self.credit.layout(),
        ]
    }

    pub fn init(&self, rng: &mut SimRng) -> ModelSet {
        ModelSet {
            actor_critic: self.policy.init(rng),
            behavior: self.behavior.init(rng),
            curiosity: self.curiosity.init(rng),
            credit: self.credit.init(rng),
        }
    }
}

/// Parameters of every learned module of one bidder, in fixed order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSet {
    pub actor_critic: ParamVector,
    pub behavior: ParamVector,
    pub curiosity: ParamVector,
    pub credit: ParamVector,
}

impl ModelSet {
    pub fn as_array(&self) -> [&ParamVector; 4] {
        [&self.actor_critic, &self.behavior, &self.curiosity, &self.credit]
    }

    pub fn as_array_mut(&mut self) -> [&mut ParamVector; 4] {
        [
            &mut self.actor_critic,
            &mut self.behavior,
            &mut self.curiosity,
            &mut self.credit,
        ]
    }

    pub fn from_vec(mut v: Vec<ParamVector>) -> Option<Self> {
        if v.len() != 4 {
            return None;
        }
        let credit = v.pop()?;
        let curiosity = v.pop()?;
        let behavior = v.pop()?;
        let actor_critic = v.pop()?;
        Some(Self {
            actor_critic,
            behavior,
            curiosity,
            credit,
        })
    }

    pub fn into_vec(self) -> Vec<ParamVector> {
        vec![self.actor_critic, self.behavior, self.curiosity, self.credit]
    }

    pub fn to_checkpoint(&self, kind: &str, trained_steps: u64) -> Checkpoint {
        Checkpoint::new(kind, trained_steps, self.clone().into_vec())
    }

    pub fn from_checkpoint(c: &Checkpoint, nets: &Networks) -> Result<Self> {
        let [a, b, cu, cr] = nets.layouts();
        Ok(Self {
            actor_critic: c.params_for(a)?,
            behavior: c.params_for(b)?,
            curiosity: c.params_for(cu)?,
            credit: c.params_for(cr)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn default_sizes() {
        let n = Networks::new(&LearningConfig::default(), 2);
        assert_eq!(n.state_dim, 15);
        assert_eq!(n.feature_dim, 15 * 4);
        let m = n.init(&mut SimRng::seed_from_u64(0));
        let c = m.to_checkpoint("generic", 7);
        assert_eq!(ModelSet::from_checkpoint(&c, &n).unwrap(), m);
    }

    #[test]
    fn checkpoint_from_other_architecture_is_rejected() {
        let small = LearningConfig {
            hidden: vec![8],
            ..Default::default()
        };
        let a = Networks::new(&small, 2);
        let b = Networks::new(&LearningConfig::default(), 2);
        let c = a.init(&mut SimRng::seed_from_u64(0)).to_checkpoint("generic", 0);
        assert!(ModelSet::from_checkpoint(&c, &b).is_err());
    }
}
