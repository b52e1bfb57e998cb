use crate::agent::Transition;
use crate::nn::TypeAction;
use crate::simcore::Step;

/// One window's credit-module training example.
#[derive(Debug, Clone, PartialEq)]
pub struct CreditSample {
    pub segments: Vec<Vec<f64>>,
    pub target: f64,
}

pub fn segment_input_dim(state_dim: usize) -> usize {
    state_dim + 3
}

/// Segment index of `step` inside the window starting at `start`.
pub fn segment_of(step: Step, start: Step, window: Step, segments: usize) -> usize {
    let off = step.saturating_sub(start) as u128;
    ((off * segments as u128) / window.max(1) as u128).min(segments as u128 - 1) as usize
}

/// Summarises a window's transitions into `segments` equal-length slices:
/// mean state, bid fraction, mean price level and summed extrinsic reward.
pub fn segment_inputs<'a>(
    entries: impl IntoIterator<Item = &'a Transition>,
    start: Step,
    window: Step,
    segments: usize,
    state_dim: usize,
    levels: usize,
) -> Vec<Vec<f64>> {
    let span = (levels.max(2) - 1) as f64;
    let mut sum_state = vec![vec![0.0; state_dim]; segments];
    let mut count = vec![0usize; segments];
    let mut acted = vec![0usize; segments];
    let mut bids = vec![0usize; segments];
    let mut level_sum = vec![0.0; segments];
    let mut reward = vec![0.0; segments];
    for t in entries {
        let s = segment_of(t.step, start, window, segments);
        for (a, b) in sum_state[s].iter_mut().zip(&t.state) {
            *a += b;
        }
        count[s] += 1;
        reward[s] += t.r_e;
        for a in t.actions.iter().flatten() {
            acted[s] += 1;
            if let TypeAction::Bid(l) = a {
                bids[s] += 1;
                level_sum[s] += *l as f64 / span;
            }
        }
    }
    (0..segments)
        .map(|s| {
            let mut v: Vec<f64> = if count[s] > 0 {
                sum_state[s].iter().map(|x| x / count[s] as f64).collect()
            } else {
                vec![0.0; state_dim]
            };
            v.push(if acted[s] > 0 { bids[s] as f64 / acted[s] as f64 } else { 0.0 });
            v.push(if bids[s] > 0 { level_sum[s] / bids[s] as f64 } else { 0.0 });
            v.push(reward[s]);
            v
        })
        .collect()
}

/// Per-entry credit weights with mean one over the entries.
pub fn normalized_eps(seg_eps: &[f64], entry_segments: &[usize]) -> Vec<f64> {
    let total: f64 = entry_segments.iter().map(|s| seg_eps[*s]).sum();
    let n = entry_segments.len() as f64;
    if total <= 0.0 || !total.is_finite() {
        return vec![1.0; entry_segments.len()];
    }
    entry_segments.iter().map(|s| n * seg_eps[*s] / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tr(step: Step, action: Option<TypeAction>, r_e: f64) -> Transition {
        let mut t = Transition::new(step, vec![], vec![step as f64, 1.0], vec![action], true);
        t.r_e = r_e;
        t
    }

    #[test]
    fn segments_cover_window() {
        assert_eq!(segment_of(0, 0, 2000, 50), 0);
        assert_eq!(segment_of(39, 0, 2000, 50), 0);
        assert_eq!(segment_of(40, 0, 2000, 50), 1);
        assert_eq!(segment_of(1999, 0, 2000, 50), 49);
        // steps past the window clamp to the last segment
        assert_eq!(segment_of(4039, 2000, 2000, 50), 49);
    }

    #[test]
    fn aggregates() {
        let e = [
            tr(0, Some(TypeAction::Bid(10)), 1.0),
            tr(2, Some(TypeAction::Backoff), 0.5),
            tr(5, None, 0.0),
        ];
        let s = segment_inputs(e.iter(), 0, 10, 2, 2, 11);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0], vec![1.0, 1.0, 0.5, 1.0, 1.5]);
        assert_eq!(s[1], vec![5.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn eps_mean_one() {
        let e = normalized_eps(&[0.5, 0.25, 0.25], &[0, 0, 1, 2]);
        assert!((e.iter().sum::<f64>() - 4.0).abs() < 1e-12);
        assert!((e[0] - 4.0 * 0.5 / 1.5).abs() < 1e-12);
        let u = normalized_eps(&[0.5, 0.5], &[0, 1, 1]);
        assert!(u.iter().all(|x| (x - 1.0).abs() < 1e-12));
    }
}
