use std::collections::VecDeque;

use crate::nn::TypeAction;
use crate::simcore::Step;

/// One decision step and everything learned about it afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub step: Step,
    pub phi: Vec<f64>,
    pub state: Vec<f64>,
    pub actions: Vec<Option<TypeAction>>,
    /// Action drawn from the best-response policy rather than the behavioural one.
    pub best_response: bool,
    /// Extrinsic reward accrued until the next decision step.
    pub r_e: f64,
    /// Share of a delivered long-term reward assigned to this entry.
    pub long_share: f64,
    /// Credit weight, mean one over its window.
    pub eps: f64,
    /// Forward-model loss, the curiosity bonus.
    pub l_f: f64,
    pub next_phi: Option<Vec<f64>>,
    pub next_state: Option<Vec<f64>>,
    pub labeled: bool,
    pub consumed: bool,
}

impl Transition {
    pub fn new(
        step: Step,
        phi: Vec<f64>,
        state: Vec<f64>,
        actions: Vec<Option<TypeAction>>,
        best_response: bool,
    ) -> Self {
        Self {
            step,
            phi,
            state,
            actions,
            best_response,
            r_e: 0.0,
            long_share: 0.0,
            eps: 1.0,
            l_f: 0.0,
            next_phi: None,
            next_state: None,
            labeled: false,
            consumed: false,
        }
    }

    pub fn is_closed(&self) -> bool {
        self.next_phi.is_some()
    }

    pub fn is_ready(&self) -> bool {
        self.labeled && self.is_closed() && !self.consumed
    }

    /// `eps * (r_e + long_share) + l_f`.
    pub fn intrinsic_reward(&self) -> f64 {
        self.eps * (self.r_e + self.long_share) + self.l_f
    }
}

/// Bounded transition log with a cursor over not-yet-trained entries.
#[derive(Debug, Clone)]
pub struct AgentMemory {
    entries: VecDeque<Transition>,
    capacity: usize,
    /// Absolute index of `entries[0]`.
    base: u64,
    /// Absolute index of the first entry not handed out for training.
    cursor: u64,
}

impl AgentMemory {
    pub fn new(capacity: usize) -> Self {
        Self {
            entries: VecDeque::new(),
            capacity: capacity.max(1),
            base: 0,
            cursor: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
            self.base += 1;
            self.cursor = self.cursor.max(self.base);
        }
        self.entries.push_back(t);
    }

    pub fn last_mut(&mut self) -> Option<&mut Transition> {
        self.entries.back_mut()
    }

    pub fn last(&self) -> Option<&Transition> {
        self.entries.back()
    }

    /// The still-open transition, if any.
    pub fn open_mut(&mut self) -> Option<&mut Transition> {
        self.entries.back_mut().filter(|t| !t.is_closed())
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.entries.iter()
    }

    /// Entries with `start <= step < end`.
    pub fn window_mut(&mut self, start: Step, end: Step) -> impl Iterator<Item = &mut Transition> {
        self.entries
            .iter_mut()
            .filter(move |t| t.step >= start && t.step < end)
    }

    pub fn window(&self, start: Step, end: Step) -> impl Iterator<Item = &Transition> {
        self.entries
            .iter()
            .filter(move |t| t.step >= start && t.step < end)
    }

    /// Hands out the ready prefix after the cursor, marking it consumed.
    pub fn take_ready(&mut self) -> Vec<Transition> {
        let mut out = Vec::new();
        let mut i = (self.cursor - self.base) as usize;
        while let Some(t) = self.entries.get_mut(i) {
            if !t.is_ready() {
                break;
            }
            t.consumed = true;
            out.push(t.clone());
            i += 1;
        }
        self.cursor = self.base + i as u64;
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tr(step: Step) -> Transition {
        Transition::new(step, vec![0.0], vec![0.0], vec![None], true)
    }

    fn close(t: &mut Transition) {
        t.next_phi = Some(vec![0.0]);
        t.next_state = Some(vec![0.0]);
    }

    #[test]
    fn ready_prefix_only() {
        let mut m = AgentMemory::new(10);
        for s in 0..4 {
            m.push(tr(s));
        }
        for t in m.window_mut(0, 3) {
            t.labeled = true;
            close(t);
        }
        // entry 1 is not closed yet; only entry 0 can go
        m.entries[1].next_phi = None;
        assert_eq!(m.take_ready().len(), 1);
        close(&mut m.entries[1]);
        let out = m.take_ready();
        assert_eq!(out.iter().map(|t| t.step).collect::<Vec<_>>(), vec![1, 2]);
        assert!(m.take_ready().is_empty());
    }

    #[test]
    fn eviction_moves_cursor() {
        let mut m = AgentMemory::new(2);
        for s in 0..5 {
            m.push(tr(s));
        }
        assert_eq!(m.len(), 2);
        for t in m.window_mut(0, 10) {
            t.labeled = true;
            close(t);
        }
        assert_eq!(m.take_ready().iter().map(|t| t.step).collect::<Vec<_>>(), vec![3, 4]);
    }

    #[test]
    fn window_bounds() {
        let mut m = AgentMemory::new(10);
        for s in [5, 10, 15, 20] {
            m.push(tr(s));
        }
        let steps: Vec<_> = m.window(10, 20).map(|t| t.step).collect();
        assert_eq!(steps, vec![10, 15]);
    }

    #[test]
    fn intrinsic_reward_formula() {
        let mut t = tr(0);
        t.r_e = 2.0;
        t.long_share = 0.5;
        t.eps = 1.5;
        t.l_f = 0.25;
        assert_eq!(t.intrinsic_reward(), 1.5 * 2.5 + 0.25);
    }
}
