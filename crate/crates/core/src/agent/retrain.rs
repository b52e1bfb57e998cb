use std::collections::VecDeque;

/// Moving-average trigger on the credit module's prediction loss.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrainMonitor {
    history: VecDeque<f64>,
    capacity: usize,
    pub shots: usize,
}

impl RetrainMonitor {
    pub fn new(capacity: usize, shots: usize) -> Self {
        Self {
            history: VecDeque::with_capacity(capacity),
            capacity,
            shots,
        }
    }

    /// True when `loss` exceeds the mean of the stored losses (always on an
    /// empty history). The loss is recorded either way.
    pub fn check(&mut self, loss: f64) -> bool {
        let trigger = if self.history.is_empty() {
            true
        } else {
            loss > self.history.iter().sum::<f64>() / self.history.len() as f64
        };
        if self.history.len() == self.capacity {
            self.history.pop_front();
        }
        self.history.push_back(loss);
        trigger
    }

    pub fn history(&self) -> &VecDeque<f64> {
        &self.history
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn warmed(v: f64) -> RetrainMonitor {
        let mut m = RetrainMonitor::new(10, 1);
        for _ in 0..10 {
            m.check(v);
        }
        m
    }

    #[test]
    fn above_average_triggers() {
        assert!(warmed(1.0).check(2.0));
        assert!(!warmed(1.0).check(0.5));
        assert!(!warmed(1.0).check(1.0));
    }

    #[test]
    fn improving_sequence_only_triggers_on_cold_start() {
        let mut m = RetrainMonitor::new(10, 1);
        let pattern: Vec<bool> = (0..20).map(|i| m.check(20.0 - i as f64)).collect();
        assert!(pattern[0]);
        assert!(pattern[1..].iter().all(|t| !t));
    }

    #[test]
    fn history_is_bounded() {
        let mut m = RetrainMonitor::new(3, 1);
        for v in [1.0, 2.0, 3.0, 4.0] {
            m.check(v);
        }
        assert_eq!(m.history().iter().copied().collect::<Vec<_>>(), vec![2.0, 3.0, 4.0]);
    }
}
