use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::nn::{Gradient, ParamVector};

/// Holder of the generic model during offline training.
#[derive(Debug, Clone)]
pub struct Coordinator {
    params: Vec<ParamVector>,
    pub meta_lr: f64,
    updates: u64,
    /// `(agent, shot)` of every accepted submission, in arrival order.
    accepted: Vec<(usize, u64)>,
}

pub type SharedCoordinator = Arc<Mutex<Coordinator>>;

impl Coordinator {
    pub fn new(params: Vec<ParamVector>, meta_lr: f64) -> Self {
        Self {
            params,
            meta_lr,
            updates: 0,
            accepted: Vec::new(),
        }
    }

    pub fn shared(self) -> SharedCoordinator {
        Arc::new(Mutex::new(self))
    }

    pub fn params(&self) -> &[ParamVector] {
        &self.params
    }

    pub fn into_params(self) -> Vec<ParamVector> {
        self.params
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn accepted(&self) -> &[(usize, u64)] {
        &self.accepted
    }

    /// Applies one gradient per module on arrival, `theta0 += meta_lr * g`,
    /// and returns the refreshed parameters. A bundle with any wrong length
    /// or non-finite entry is rejected as a whole.
    pub fn submit(&mut self, grads: &[Gradient]) -> Result<Vec<ParamVector>> {
        if grads.len() != self.params.len() {
            return Err(Error::LayoutMismatch(format!(
                "expected {} module gradients, got {}",
                self.params.len(),
                grads.len()
            )));
        }
        for (g, p) in grads.iter().zip(&self.params) {
            if g.values.len() != p.len() {
                return Err(Error::LayoutMismatch(format!(
                    "{:?}: gradient length {} vs {} params",
                    p.layout.tag,
                    g.values.len(),
                    p.len()
                )));
            }
            if !g.is_finite() {
                return Err(Error::NonFinite(format!("{:?} gradient", p.layout.tag)));
            }
        }
        for (g, p) in grads.iter().zip(self.params.iter_mut()) {
            for (t, x) in p.values.iter_mut().zip(&g.values) {
                *t += self.meta_lr * x;
            }
        }
        self.updates += 1;
        if let Some(g) = grads.first() {
            self.accepted.push((g.agent, g.shot));
        }
        Ok(self.params.clone())
    }
}

/// Locked submission for use from concurrent training loops.
pub fn submit_gradient(c: &SharedCoordinator, grads: &[Gradient]) -> Result<Vec<ParamVector>> {
    c.lock().expect("coordinator lock poisoned").submit(grads)
}

/// Checks `state == theta0 + meta_lr * sum(g)` per module within `rel_tol`.
pub fn meta_update_equivalence_check(
    theta0: &[ParamVector],
    submissions: &[Vec<Gradient>],
    meta_lr: f64,
    state: &[ParamVector],
    rel_tol: f64,
) -> bool {
    if theta0.len() != state.len() {
        return false;
    }
    theta0.iter().zip(state).enumerate().all(|(m, (t0, st))| {
        t0.values.iter().zip(&st.values).enumerate().all(|(i, (a, s))| {
            let expected = a + meta_lr * submissions.iter().map(|g| g[m].values[i]).sum::<f64>();
            (expected - s).abs() <= rel_tol * expected.abs().max(1.0)
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Layout, ModuleTag};

    fn theta() -> Vec<ParamVector> {
        let mut l = Layout::new(ModuleTag::ActorCritic);
        l.push("w", &[3]);
        let mut p = ParamVector::zeros(l);
        p.values = vec![1.0, -2.0, 0.5];
        vec![p]
    }

    fn grad(agent: usize, v: [f64; 3]) -> Vec<Gradient> {
        vec![Gradient {
            values: v.to_vec(),
            agent,
            shot: 3,
        }]
    }

    #[test]
    fn single_submission() {
        let mut c = Coordinator::new(theta(), 0.1);
        let out = c.submit(&grad(0, [1.0, 0.0, -1.0])).unwrap();
        assert_eq!(out[0].values, vec![1.1, -2.0, 0.4]);
    }

    #[test]
    fn sequential_equals_batch() {
        let gs = [grad(0, [1.0, 2.0, 3.0]), grad(1, [-0.5, 0.25, 0.0])];
        let mut c = Coordinator::new(theta(), 0.1);
        for g in &gs {
            c.submit(g).unwrap();
        }
        assert!(meta_update_equivalence_check(&theta(), &gs, 0.1, c.params(), 1e-12));
        assert_eq!(c.accepted(), &[(0, 3), (1, 3)]);
    }

    #[test]
    fn invalid_submissions_leave_state_untouched() {
        let mut c = Coordinator::new(theta(), 0.1);
        assert!(c.submit(&grad(0, [f64::NAN, 0.0, 0.0])).is_err());
        let short = vec![Gradient {
            values: vec![1.0],
            agent: 0,
            shot: 0,
        }];
        assert!(c.submit(&short).is_err());
        assert_eq!(c.params(), theta().as_slice());
        assert_eq!(c.updates(), 0);
    }

    #[test]
    fn degenerate_cases() {
        assert!(meta_update_equivalence_check(&theta(), &[], 0.1, &theta(), 1e-12));
        let mut c = Coordinator::new(theta(), 0.0);
        c.submit(&grad(0, [5.0, 5.0, 5.0])).unwrap();
        assert_eq!(c.params(), theta().as_slice());
    }
}
