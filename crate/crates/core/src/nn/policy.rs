use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Activation, Dense, Layout, Mlp, MlpCache, ModuleTag, ParamVector};
use crate::error::{Error, Result};
use crate::simcore::SimRng;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyArch {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub n_types: usize,
    /// Number of price levels on the grid `{0, 1/(L-1), .., 1} x v`.
    pub levels: usize,
}

/// Decision for one type's head-of-queue bid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TypeAction {
    Backoff,
    Bid(usize),
}

/// Bernoulli bid/backoff coin plus a categorical price level.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadDist {
    pub p_bid: f64,
    pub levels: Vec<f64>,
}

impl HeadDist {
    pub fn uniform(levels: usize) -> Self {
        Self {
            p_bid: 0.5,
            levels: vec![1.0 / levels as f64; levels],
        }
    }

    pub fn prob(&self, a: TypeAction) -> f64 {
        match a {
            TypeAction::Backoff => 1.0 - self.p_bid,
            TypeAction::Bid(l) => self.p_bid * self.levels.get(l).copied().unwrap_or(0.0),
        }
    }

    pub fn sample(&self, rng: &mut SimRng) -> TypeAction {
        if rng.random::<f64>() >= self.p_bid {
            return TypeAction::Backoff;
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (l, p) in self.levels.iter().enumerate() {
            acc += p;
            if u < acc {
                return TypeAction::Bid(l);
            }
        }
        TypeAction::Bid(self.levels.len() - 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutput {
    pub heads: Vec<HeadDist>,
    /// Zero for networks without a critic.
    pub value: f64,
}

impl PolicyOutput {
    /// Joint log-probability over the acted types.
    pub fn log_prob(&self, actions: &[Option<TypeAction>]) -> Result<f64> {
        let mut lp = 0.0;
        for (h, a) in self.heads.iter().zip(actions) {
            if let Some(a) = a {
                let p = h.prob(*a);
                if p <= 0.0 {
                    return Err(Error::ZeroProbabilityAction);
                }
                lp += p.ln();
            }
        }
        Ok(lp)
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Shared tanh trunk with per-type actor heads and an optional critic.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNet {
    pub arch: PolicyArch,
    trunk: Mlp,
    actor: Dense,
    critic: Option<Dense>,
    layout: Layout,
}

struct Pass {
    trunk: MlpCache,
    logits: Vec<f64>,
    out: PolicyOutput,
}

impl PolicyNet {
    fn build(arch: PolicyArch, tag: ModuleTag, critic: bool) -> Self {
        let mut layout = Layout::new(tag);
        let mut sizes = vec![arch.input];
        sizes.extend(&arch.hidden);
        let trunk = Mlp::register(&mut layout, "trunk", &sizes, Activation::Tanh, Activation::Tanh);
        let feat = *sizes.last().unwrap();
        let actor = Dense::register(&mut layout, "actor", feat, arch.n_types * (1 + arch.levels));
        let critic = critic.then(|| Dense::register(&mut layout, "critic", feat, 1));
        Self {
            arch,
            trunk,
            actor,
            critic,
            layout,
        }
    }

    pub fn actor_critic(arch: PolicyArch) -> Self {
        Self::build(arch, ModuleTag::ActorCritic, true)
    }

    /// Behavioural network: same trunk and heads, no critic.
    pub fn supervised(arch: PolicyArch) -> Self {
        Self::build(arch, ModuleTag::Supervised, false)
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn init(&self, rng: &mut SimRng) -> ParamVector {
        let mut p = ParamVector::glorot(self.layout.clone(), rng);
        p.scale_tensor("actor.w", 0.1);
        p.scale_tensor("critic.w", 0.1);
        p
    }

    fn pass(&self, theta: &[f64], phi: &[f64]) -> Result<Pass> {
        if theta.len() != self.layout.len {
            return Err(Error::Dimension {
                expected: self.layout.len,
                got: theta.len(),
            });
        }
        if phi.len() != self.arch.input {
            return Err(Error::Dimension {
                expected: self.arch.input,
                got: phi.len(),
            });
        }
        let trunk = self.trunk.forward(theta, phi);
        let h = trunk.output();
        let logits = self.actor.forward(theta, h);
        let stride = 1 + self.arch.levels;
        let heads = (0..self.arch.n_types)
            .map(|k| {
                let block = &logits[k * stride..(k + 1) * stride];
                HeadDist {
                    p_bid: sigmoid(block[0]),
                    levels: softmax(&block[1..]),
                }
            })
            .collect();
        let value = self.critic.map_or(0.0, |c| c.forward(theta, h)[0]);
        Ok(Pass {
            trunk,
            logits,
            out: PolicyOutput { heads, value },
        })
    }

    pub fn forward(&self, theta: &[f64], phi: &[f64]) -> Result<PolicyOutput> {
        Ok(self.pass(theta, phi)?.out)
    }

    pub fn value(&self, theta: &[f64], phi: &[f64]) -> Result<f64> {
        Ok(self.pass(theta, phi)?.out.value)
    }

    /// `w_pi * grad ln pi(actions) + w_v * grad V` from one backward pass.
    pub fn grad_combined(
        &self,
        theta: &[f64],
        phi: &[f64],
        actions: &[Option<TypeAction>],
        w_pi: f64,
        w_v: f64,
    ) -> Result<(PolicyOutput, Vec<f64>)> {
        let pass = self.pass(theta, phi)?;
        pass.out.log_prob(actions)?;
        let stride = 1 + self.arch.levels;
        let mut dlogits = vec![0.0; pass.logits.len()];
        for (k, a) in actions.iter().enumerate().take(self.arch.n_types) {
            let Some(a) = a else { continue };
            let head = &pass.out.heads[k];
            let block = &mut dlogits[k * stride..(k + 1) * stride];
            match *a {
                TypeAction::Backoff => block[0] = -head.p_bid * w_pi,
                TypeAction::Bid(l) => {
                    block[0] = (1.0 - head.p_bid) * w_pi;
                    for (j, p) in head.levels.iter().enumerate() {
                        let ind = if j == l { 1.0 } else { 0.0 };
                        block[1 + j] = (ind - p) * w_pi;
                    }
                }
            }
        }
        let mut g = vec![0.0; self.layout.len];
        let h = pass.trunk.output();
        let mut dh = self
            .actor
            .backward(theta, h, &dlogits, &mut g, true)
            .unwrap_or_default();
        if let (Some(c), true) = (self.critic, w_v != 0.0) {
            let dv = c.backward(theta, h, &[w_v], &mut g, true).unwrap_or_default();
            for (a, b) in dh.iter_mut().zip(dv) {
                *a += b;
            }
        }
        self.trunk.backward(theta, &pass.trunk, &dh, &mut g, false);
        Ok((pass.out, g))
    }

    pub fn grad_log_policy(
        &self,
        theta: &[f64],
        phi: &[f64],
        actions: &[Option<TypeAction>],
    ) -> Result<Vec<f64>> {
        Ok(self.grad_combined(theta, phi, actions, 1.0, 0.0)?.1)
    }

    pub fn grad_value(&self, theta: &[f64], phi: &[f64]) -> Result<Vec<f64>> {
        let none = vec![None; self.arch.n_types];
        Ok(self.grad_combined(theta, phi, &none, 0.0, 1.0)?.1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{max_relative_error, numeric_gradient};
    use rand::SeedableRng;

    fn arch() -> PolicyArch {
        PolicyArch {
            input: 5,
            hidden: vec![6, 4],
            n_types: 2,
            levels: 3,
        }
    }

    fn setup(seed: u64) -> (PolicyNet, ParamVector, Vec<f64>) {
        let net = PolicyNet::actor_critic(arch());
        let mut rng = SimRng::seed_from_u64(seed);
        let mut p = ParamVector::glorot(net.layout().clone(), &mut rng);
        // larger head weights so the check is not dominated by tiny logits
        p.scale_tensor("actor.w", 2.0);
        let phi: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        (net, p, phi)
    }

    #[test]
    fn zero_params_give_uniform_heads() {
        let net = PolicyNet::actor_critic(arch());
        let p = ParamVector::zeros(net.layout().clone());
        let out = net.forward(&p.values, &[0.3; 5]).unwrap();
        for h in &out.heads {
            assert_eq!(h.p_bid, 0.5);
            assert!(h.levels.iter().all(|q| (q - 1.0 / 3.0).abs() < 1e-15));
        }
        assert_eq!(out.value, 0.0);
    }

    #[test]
    fn distributions_are_normalised() {
        let (net, p, phi) = setup(1);
        let out = net.forward(&p.values, &phi).unwrap();
        for h in &out.heads {
            let total: f64 = h.levels.iter().sum();
            assert!((total - 1.0).abs() < 1e-9);
            let all = h.prob(TypeAction::Backoff)
                + (0..3).map(|l| h.prob(TypeAction::Bid(l))).sum::<f64>();
            assert!((all - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn wrong_input_dimension_errors() {
        let (net, p, _) = setup(1);
        assert!(matches!(
            net.forward(&p.values, &[0.0; 4]),
            Err(Error::Dimension { expected: 5, got: 4 })
        ));
    }

    #[test]
    fn log_policy_gradient_matches_fd() {
        for seed in 0..3 {
            let (net, p, phi) = setup(seed);
            let acts = [Some(TypeAction::Bid(2)), Some(TypeAction::Backoff)];
            let g = net.grad_log_policy(&p.values, &phi, &acts).unwrap();
            let f = |th: &[f64]| net.forward(th, &phi).unwrap().log_prob(&acts).unwrap();
            let n = numeric_gradient(&f, &p.values, 1e-5);
            assert!(max_relative_error(&g, &n) < 1e-4);
        }
    }

    #[test]
    fn value_gradient_matches_fd() {
        let (net, p, phi) = setup(7);
        let g = net.grad_value(&p.values, &phi).unwrap();
        let f = |th: &[f64]| net.value(th, &phi).unwrap();
        let n = numeric_gradient(&f, &p.values, 1e-5);
        assert!(max_relative_error(&g, &n) < 1e-4);
    }

    #[test]
    fn score_function_identity() {
        let (net, p, phi) = setup(3);
        let out = net.forward(&p.values, &phi).unwrap();
        let mut acc = vec![0.0; p.len()];
        let mut actions = vec![TypeAction::Backoff];
        actions.extend((0..3).map(TypeAction::Bid));
        for a in actions {
            let acts = [Some(a), None];
            let g = net.grad_log_policy(&p.values, &phi, &acts).unwrap();
            let pa = out.heads[0].prob(a);
            for (s, gi) in acc.iter_mut().zip(g) {
                *s += pa * gi;
            }
        }
        assert!(acc.iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn saturated_softmax_has_flat_level_gradient() {
        let net = PolicyNet::actor_critic(arch());
        let mut p = ParamVector::zeros(net.layout().clone());
        // bias level 0 of type 0 far above the rest
        let off = net.layout().tensor("actor.b").unwrap().offset;
        p.values[off + 1] = 60.0;
        let g = net
            .grad_log_policy(&p.values, &[0.1; 5], &[Some(TypeAction::Bid(0)), None])
            .unwrap();
        for j in 1..4 {
            assert!(g[off + j].abs() < 1e-12);
        }
    }

    #[test]
    fn impossible_action_is_an_error() {
        let net = PolicyNet::actor_critic(arch());
        let mut p = ParamVector::zeros(net.layout().clone());
        let off = net.layout().tensor("actor.b").unwrap().offset;
        p.values[off] = -1000.0;
        assert!(matches!(
            net.grad_log_policy(&p.values, &[0.0; 5], &[Some(TypeAction::Bid(0)), None]),
            Err(Error::ZeroProbabilityAction)
        ));
    }

    #[test]
    fn sampling_matches_probabilities() {
        let h = HeadDist {
            p_bid: 0.7,
            levels: vec![0.2, 0.8],
        };
        let mut rng = SimRng::seed_from_u64(11);
        let n = 20_000;
        let bids1 = (0..n)
            .filter(|_| h.sample(&mut rng) == TypeAction::Bid(1))
            .count();
        assert!((bids1 as f64 / n as f64 - 0.56).abs() < 0.02);
    }
}
