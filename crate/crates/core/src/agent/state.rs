use std::collections::VecDeque;

/// What a bidder sees of one type's head-of-queue request.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadView {
    /// Remaining steps to deadline over the type's deadline window.
    pub ttd_frac: f64,
    pub resource_units: f64,
    pub rebid_count: u8,
}

/// Inputs available to a bidder at a decision step.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub heads: Vec<Option<HeadView>>,
    pub active_fraction: f64,
    /// Slot occupancy per type as broadcast by the auctioneer.
    pub utilization: Vec<f64>,
    /// `ln(1 + budget / initial)` before this step.
    pub budget_ratio: f64,
    /// Last broadcast clearing payment per type.
    pub payments: Vec<f64>,
    pub prev_reward: f64,
}

pub fn state_dim(n_types: usize) -> usize {
    6 * n_types + 3
}

/// Flattens an observation: per-type pipeline features, auctioneer signals,
/// wealth, payments and the previous reward.
pub fn build_state(obs: &Observation) -> Vec<f64> {
    let n = obs.heads.len();
    let mut s = Vec::with_capacity(state_dim(n));
    for h in &obs.heads {
        match h {
            Some(h) => s.extend([
                1.0,
                h.ttd_frac,
                h.resource_units / 100.0,
                h.rebid_count as f64,
            ]),
            None => s.extend([0.0; 4]),
        }
    }
    s.push(obs.active_fraction);
    s.extend(&obs.utilization);
    s.push(obs.budget_ratio);
    s.extend(&obs.payments);
    s.push(obs.prev_reward);
    s
}

/// Last `depth` states, newest first, zero-padded on cold start.
#[derive(Debug, Clone)]
pub struct StateStack {
    depth: usize,
    dim: usize,
    states: VecDeque<Vec<f64>>,
}

impl StateStack {
    pub fn new(depth: usize, dim: usize) -> Self {
        Self {
            depth,
            dim,
            states: VecDeque::with_capacity(depth),
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.depth * self.dim
    }

    pub fn push(&mut self, state: Vec<f64>) -> Vec<f64> {
        debug_assert_eq!(state.len(), self.dim);
        if self.states.len() == self.depth {
            self.states.pop_back();
        }
        self.states.push_front(state);
        self.phi()
    }

    pub fn phi(&self) -> Vec<f64> {
        let mut phi = vec![0.0; self.feature_dim()];
        for (i, s) in self.states.iter().enumerate() {
            phi[i * self.dim..(i + 1) * self.dim].copy_from_slice(s);
        }
        phi
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs() -> Observation {
        Observation {
            heads: vec![
                Some(HeadView {
                    ttd_frac: 0.5,
                    resource_units: 80.0,
                    rebid_count: 1,
                }),
                None,
            ],
            active_fraction: 1.0,
            utilization: vec![0.25, 1.0],
            budget_ratio: 0.9,
            payments: vec![0.3, 0.0],
            prev_reward: -0.1,
        }
    }

    #[test]
    fn layout_of_state() {
        let s = build_state(&obs());
        assert_eq!(s.len(), state_dim(2));
        assert_eq!(&s[..4], &[1.0, 0.5, 0.8, 1.0]);
        assert_eq!(&s[4..8], &[0.0; 4]);
        assert_eq!(&s[8..], &[1.0, 0.25, 1.0, 0.9, 0.3, 0.0, -0.1]);
    }

    #[test]
    fn cold_start_is_zero_padded() {
        let mut st = StateStack::new(3, 2);
        assert_eq!(st.push(vec![1.0, 2.0]), vec![1.0, 2.0, 0.0, 0.0, 0.0, 0.0]);
        st.push(vec![3.0, 4.0]);
        assert_eq!(st.push(vec![5.0, 6.0]), vec![5.0, 6.0, 3.0, 4.0, 1.0, 2.0]);
        assert_eq!(st.push(vec![7.0, 8.0]), vec![7.0, 8.0, 5.0, 6.0, 3.0, 4.0]);
    }

    #[test]
    fn identical_observations_give_identical_features() {
        let mut a = StateStack::new(2, state_dim(2));
        let mut b = StateStack::new(2, state_dim(2));
        assert_eq!(a.push(build_state(&obs())), b.push(build_state(&obs())));
    }
}
