use rand::Rng;

use crate::nn::{PolicyOutput, TypeAction};
use crate::simcore::SimRng;

/// Best-response weight `eta(t) = 1 - eta0 * exp(-t / scale)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaSchedule {
    pub eta0: f64,
    pub scale: f64,
}

impl EtaSchedule {
    pub fn at(&self, t: u64) -> f64 {
        if self.scale <= 0.0 {
            return 1.0;
        }
        1.0 - self.eta0 * (-(t as f64) / self.scale).exp()
    }
}

/// Samples one joint action for the present heads: from the best response
/// with probability `eta`, otherwise from the behavioural policy.
pub fn select_action(
    eta: f64,
    best: &PolicyOutput,
    behavior: &PolicyOutput,
    present: &[bool],
    rng: &mut SimRng,
) -> (Vec<Option<TypeAction>>, bool) {
    let use_best = rng.random::<f64>() < eta;
    let src = if use_best { best } else { behavior };
    let actions = present
        .iter()
        .zip(&src.heads)
        .map(|(p, h)| p.then(|| h.sample(rng)))
        .collect();
    (actions, use_best)
}
