use serde::{Deserialize, Serialize};

use super::{Activation, Layout, Mlp, ModuleTag, ParamVector, TypeAction};
use crate::error::{Error, Result};
use crate::simcore::SimRng;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CuriosityArch {
    pub feature: usize,
    /// Size of one state vector, the forward model's target.
    pub state: usize,
    pub hidden: usize,
    pub n_types: usize,
    pub levels: usize,
}

impl CuriosityArch {
    pub fn action_dim(&self) -> usize {
        3 * self.n_types
    }
}

/// Forward and inverse dynamics models sharing one parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CuriosityNet {
    pub arch: CuriosityArch,
    fwd: Mlp,
    inv: Mlp,
    layout: Layout,
}

fn log_softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    z.iter().map(|v| v - lse).collect()
}

impl CuriosityNet {
    pub fn new(arch: CuriosityArch) -> Self {
        let mut layout = Layout::new(ModuleTag::Curiosity);
        let fwd = Mlp::register(
            &mut layout,
            "forward",
            &[arch.feature + arch.action_dim(), arch.hidden, arch.state],
            Activation::Tanh,
            Activation::Identity,
        );
        let inv = Mlp::register(
            &mut layout,
            "inverse",
            &[arch.feature + arch.state, arch.hidden, arch.n_types * (1 + arch.levels)],
            Activation::Tanh,
            Activation::Identity,
        );
        Self {
            arch,
            fwd,
            inv,
            layout,
        }
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn init(&self, rng: &mut SimRng) -> ParamVector {
        ParamVector::glorot(self.layout.clone(), rng)
    }

    /// Per type: `[acted, bid, level / (L-1)]`.
    pub fn encode_action(&self, actions: &[Option<TypeAction>]) -> Vec<f64> {
        let span = (self.arch.levels.max(2) - 1) as f64;
        let mut v = Vec::with_capacity(self.arch.action_dim());
        for k in 0..self.arch.n_types {
            match actions.get(k).copied().flatten() {
                None => v.extend([0.0, 0.0, 0.0]),
                Some(TypeAction::Backoff) => v.extend([1.0, 0.0, 0.0]),
                Some(TypeAction::Bid(l)) => v.extend([1.0, 1.0, l as f64 / span]),
            }
        }
        v
    }

    fn check(&self, theta: &[f64], phi: &[f64], s_next: &[f64]) -> Result<()> {
        for (expected, got) in [
            (self.layout.len, theta.len()),
            (self.arch.feature, phi.len()),
            (self.arch.state, s_next.len()),
        ] {
            if expected != got {
                return Err(Error::Dimension { expected, got });
            }
        }
        Ok(())
    }

    /// Mean squared error of the predicted next state, and its gradient.
    pub fn forward_loss_grad(
        &self,
        theta: &[f64],
        phi: &[f64],
        actions: &[Option<TypeAction>],
        s_next: &[f64],
    ) -> Result<(f64, Vec<f64>)> {
        self.check(theta, phi, s_next)?;
        let mut x = phi.to_vec();
        x.extend(self.encode_action(actions));
        let cache = self.fwd.forward(theta, &x);
        let d = s_next.len() as f64;
        let diff: Vec<f64> = cache.output().iter().zip(s_next).map(|(p, s)| p - s).collect();
        let loss = diff.iter().map(|e| e * e).sum::<f64>() / d;
        let dout: Vec<f64> = diff.iter().map(|e| 2.0 * e / d).collect();
        let mut g = vec![0.0; self.layout.len];
        self.fwd.backward(theta, &cache, &dout, &mut g, false);
        Ok((loss, g))
    }

    pub fn forward_loss(
        &self,
        theta: &[f64],
        phi: &[f64],
        actions: &[Option<TypeAction>],
        s_next: &[f64],
    ) -> Result<f64> {
        Ok(self.forward_loss_grad(theta, phi, actions, s_next)?.0)
    }

    /// Mean negative log-likelihood of the taken per-type actions given
    /// `(phi, s_next)`, and its gradient. Zero when no type acted.
    pub fn inverse_loss_grad(
        &self,
        theta: &[f64],
        phi: &[f64],
        actions: &[Option<TypeAction>],
        s_next: &[f64],
    ) -> Result<(f64, Vec<f64>)> {
        self.check(theta, phi, s_next)?;
        let mut g = vec![0.0; self.layout.len];
        let acted = actions.iter().filter(|a| a.is_some()).count();
        if acted == 0 {
            return Ok((0.0, g));
        }
        let mut x = phi.to_vec();
        x.extend_from_slice(s_next);
        let cache = self.inv.forward(theta, &x);
        let logits = cache.output();
        let stride = 1 + self.arch.levels;
        let mut dout = vec![0.0; logits.len()];
        let mut loss = 0.0;
        for (k, a) in actions.iter().enumerate().take(self.arch.n_types) {
            let Some(a) = a else { continue };
            let class = match *a {
                TypeAction::Backoff => 0,
                TypeAction::Bid(l) => 1 + l,
            };
            let lsm = log_softmax(&logits[k * stride..(k + 1) * stride]);
            loss -= lsm[class];
            for (j, l) in lsm.iter().enumerate() {
                let ind = if j == class { 1.0 } else { 0.0 };
                dout[k * stride + j] = (l.exp() - ind) / acted as f64;
            }
        }
        self.inv.backward(theta, &cache, &dout, &mut g, false);
        Ok((loss / acted as f64, g))
    }

    /// Probability the inverse model assigns to each type's taken action.
    pub fn inverse_accuracy(
        &self,
        theta: &[f64],
        phi: &[f64],
        actions: &[Option<TypeAction>],
        s_next: &[f64],
    ) -> Result<f64> {
        let (l, _) = self.inverse_loss_grad(theta, phi, actions, s_next)?;
        Ok((-l).exp())
    }
}
