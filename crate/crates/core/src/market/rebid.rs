use crate::market::Bid;
use crate::simcore::Step;

/// Fate of a bid that lost its round or found no capable site.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RebidDecision {
    /// Back into the bidder's pipeline at `at` with the incremented count.
    Requeue { at: Step, rebid_count: u8 },
    FinalLoss,
}

/// A losing bid may come back once (by default) if it can still be placed
/// before its deadline.
pub fn handle_rebid(bid: &Bid, now: Step, max_rebids: u8) -> RebidDecision {
    if bid.rebid_count < max_rebids && now + 1 < bid.deadline {
        RebidDecision::Requeue {
            at: now + 1,
            rebid_count: bid.rebid_count + 1,
        }
    } else {
        RebidDecision::FinalLoss
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bid(rebid_count: u8, deadline: Step) -> Bid {
        Bid {
            bidder: 0,
            request: 0,
            kind: 0,
            price: 1.0,
            created: 0,
            deadline,
            rebid_count,
        }
    }

    #[test]
    fn fresh_bid_requeues() {
        assert_eq!(
            handle_rebid(&bid(0, 60), 10, 1),
            RebidDecision::Requeue { at: 11, rebid_count: 1 }
        );
    }

    #[test]
    fn second_rejection_is_final() {
        assert_eq!(handle_rebid(&bid(1, 60), 10, 1), RebidDecision::FinalLoss);
    }

    #[test]
    fn rejection_at_deadline_is_final() {
        assert_eq!(handle_rebid(&bid(0, 60), 60, 1), RebidDecision::FinalLoss);
        assert_eq!(handle_rebid(&bid(0, 60), 59, 1), RebidDecision::FinalLoss);
    }

    #[test]
    fn rebid_limit_is_configurable() {
        assert!(matches!(handle_rebid(&bid(1, 60), 10, 2), RebidDecision::Requeue { .. }));
        assert_eq!(handle_rebid(&bid(0, 60), 10, 0), RebidDecision::FinalLoss);
    }
}
