use std::collections::VecDeque;

use crate::simcore::Step;

/// Jain index of per-bidder payment totals. All-zero totals count as fair.
pub fn jain_fairness(totals: &[f64]) -> f64 {
    if totals.is_empty() {
        return 1.0;
    }
    let sum: f64 = totals.iter().sum();
    let sq: f64 = totals.iter().map(|p| p * p).sum();
    if sq <= 0.0 {
        return 1.0;
    }
    (sum * sum / (totals.len() as f64 * sq)).min(1.0)
}

/// Sliding window of payments per bidder over the last `window` steps.
#[derive(Debug, Clone)]
pub struct PaymentWindow {
    window: Step,
    entries: VecDeque<(Step, usize, f64)>,
    totals: Vec<f64>,
    counts: Vec<usize>,
}

impl PaymentWindow {
    pub fn new(bidders: usize, window: Step) -> Self {
        Self {
            window,
            entries: VecDeque::new(),
            totals: vec![0.0; bidders],
            counts: vec![0; bidders],
        }
    }

    pub fn record(&mut self, step: Step, bidder: usize, payment: f64) {
        self.entries.push_back((step, bidder, payment));
        self.totals[bidder] += payment;
        self.counts[bidder] += 1;
    }

    /// Forgets payments older than the window ending at `now` (inclusive).
    pub fn expire(&mut self, now: Step) {
        while let Some(&(s, b, p)) = self.entries.front() {
            if s + self.window > now {
                break;
            }
            self.counts[b] -= 1;
            // an emptied total is reset exactly so rounding residue cannot
            // masquerade as a tiny payment
            self.totals[b] = if self.counts[b] == 0 { 0.0 } else { (self.totals[b] - p).max(0.0) };
            self.entries.pop_front();
        }
    }

    pub fn totals(&self) -> &[f64] {
        &self.totals
    }

    pub fn fairness(&self) -> f64 {
        jain_fairness(&self.totals)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_examples() {
        assert!((jain_fairness(&[3.0, 3.0, 3.0]) - 1.0).abs() < 1e-12);
        assert!((jain_fairness(&[6.0, 0.0, 0.0]) - 1.0 / 3.0).abs() < 1e-12);
        assert!((jain_fairness(&[2.0, 1.0, 1.0]) - 16.0 / 18.0).abs() < 1e-12);
        assert_eq!(jain_fairness(&[0.0, 0.0]), 1.0);
    }

    #[test]
    fn window_expires_old_payments() {
        let mut w = PaymentWindow::new(2, 10);
        w.record(0, 0, 4.0);
        w.record(5, 1, 4.0);
        w.expire(9);
        assert_eq!(w.totals(), &[4.0, 4.0]);
        w.expire(10);
        assert_eq!(w.totals(), &[0.0, 4.0]);
        assert!((w.fairness() - 0.5).abs() < 1e-12);
        w.expire(100);
        assert_eq!(w.fairness(), 1.0);
    }

    proptest! {
        #[test]
        fn bounds_and_scale(p in prop::collection::vec(0.0f64..100.0, 1..12), lam in 0.01f64..100.0) {
            prop_assume!(p.iter().any(|x| *x > 0.0));
            let j = jain_fairness(&p);
            let n = p.len() as f64;
            prop_assert!(j >= 1.0 / n - 1e-12 && j <= 1.0 + 1e-12);
            let scaled: Vec<f64> = p.iter().map(|x| x * lam).collect();
            prop_assert!((jain_fairness(&scaled) - j).abs() < 1e-9);
            let mut rev = p.clone();
            rev.reverse();
            prop_assert!((jain_fairness(&rev) - j).abs() < 1e-12);
        }

        #[test]
        fn sliding_window_stays_in_bounds(
            events in prop::collection::vec((0usize..4, 0.0f64..1.0, 0u64..30), 1..200)
        ) {
            let mut w = PaymentWindow::new(4, 50);
            let mut now = 0;
            for (b, p, gap) in events {
                now += gap;
                w.expire(now);
                w.record(now, b, p * 0.1);
                let f = w.fairness();
                prop_assert!(w.totals().iter().all(|t| *t >= 0.0));
                prop_assert!((0.25 - 1e-12..=1.0 + 1e-12).contains(&f), "fairness {}", f);
            }
        }
    }
}
