//! Sealed-bid uniform-price auction, one round per commodity type.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::simcore::{SimRng, Step};

/// Opaque request identifier, unique within a simulation.
pub type RequestId = u64;

/// A bid for one service slot of one commodity type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bid {
    pub bidder: usize,
    pub request: RequestId,
    pub kind: usize,
    pub price: f64,
    pub created: Step,
    pub deadline: Step,
    pub rebid_count: u8,
}

/// Outcome of one type's round. Indices refer to the bid slice passed in.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TypeOutcome {
    pub slots: usize,
    /// Winning bid indices, highest price first.
    pub winners: Vec<usize>,
    pub rejected: Vec<usize>,
    pub payment: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AuctionRoundResult {
    pub per_type: Vec<TypeOutcome>,
    /// `z` flag per submitted bid.
    pub won: Vec<bool>,
}

impl AuctionRoundResult {
    pub fn payment(&self, kind: usize) -> f64 {
        self.per_type.get(kind).map_or(0.0, |o| o.payment)
    }
}

/// Ranks `bids` (indices into the full slice) for one type: highest price
/// first, ties in a uniformly random order drawn from `rng`.
fn rank(bids: &[Bid], mut idx: Vec<usize>, rng: &mut SimRng) -> Vec<usize> {
    idx.shuffle(rng);
    // stable sort keeps the shuffled order among equal prices
    idx.sort_by(|a, b| bids[*b].price.total_cmp(&bids[*a].price));
    idx
}

/// Runs one round for every type.
///
/// The `n_k` highest bids of type `k` win and all pay the `(n_k+1)`-th highest
/// price, or 0 when there is no losing bid. `availability[k] == 0` rejects
/// every type-`k` bid.
pub fn run_auction(bids: &[Bid], availability: &[usize], rng: &mut SimRng) -> AuctionRoundResult {
    let mut result = AuctionRoundResult {
        per_type: vec![TypeOutcome::default(); availability.len()],
        won: vec![false; bids.len()],
    };
    for (kind, &slots) in availability.iter().enumerate() {
        let entries: Vec<usize> = (0..bids.len()).filter(|i| bids[*i].kind == kind).collect();
        let out = &mut result.per_type[kind];
        out.slots = slots;
        if entries.is_empty() {
            continue;
        }
        let ranked = rank(bids, entries, rng);
        let n = slots.min(ranked.len());
        out.winners = ranked[..n].to_vec();
        out.rejected = ranked[n..].to_vec();
        out.payment = if n > 0 && ranked.len() > slots {
            bids[ranked[slots]].price
        } else {
            0.0
        };
        for &w in &out.winners {
            result.won[w] = true;
        }
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn bids(prices: &[f64]) -> Vec<Bid> {
        prices
            .iter()
            .enumerate()
            .map(|(i, p)| Bid {
                bidder: i,
                request: i as u64,
                kind: 0,
                price: *p,
                created: 0,
                deadline: 100,
                rebid_count: 0,
            })
            .collect()
    }

    fn rng() -> SimRng {
        SimRng::seed_from_u64(5)
    }

    #[test]
    fn second_price_single_slot() {
        let r = run_auction(&bids(&[7.0, 5.0, 2.0]), &[1], &mut rng());
        assert_eq!(r.per_type[0].winners, vec![0]);
        assert_eq!(r.per_type[0].payment, 5.0);
        assert_eq!(r.won, vec![true, false, false]);
    }

    #[test]
    fn uniform_price_two_slots() {
        let r = run_auction(&bids(&[7.0, 5.0, 2.0]), &[2], &mut rng());
        assert_eq!(r.per_type[0].winners, vec![0, 1]);
        assert_eq!(r.per_type[0].payment, 2.0);
        assert_eq!(r.per_type[0].rejected, vec![2]);
    }

    #[test]
    fn no_losing_bid_clears_at_zero() {
        let r = run_auction(&bids(&[7.0, 5.0]), &[3], &mut rng());
        assert_eq!(r.per_type[0].winners.len(), 2);
        assert_eq!(r.per_type[0].payment, 0.0);
    }

    #[test]
    fn zero_availability_rejects_all() {
        let r = run_auction(&bids(&[7.0, 5.0]), &[0], &mut rng());
        assert!(r.per_type[0].winners.is_empty());
        assert_eq!(r.per_type[0].rejected.len(), 2);
        assert_eq!(r.per_type[0].payment, 0.0);
        assert_eq!(r.won, vec![false, false]);
    }

    #[test]
    fn ties_are_broken_uniformly() {
        let b = bids(&[4.0, 4.0, 4.0]);
        let mut rng = rng();
        let mut wins = [0usize; 3];
        let n = 30_000;
        for _ in 0..n {
            let r = run_auction(&b, &[1], &mut rng);
            assert_eq!(r.per_type[0].winners.len(), 1);
            assert_eq!(r.per_type[0].payment, 4.0);
            wins[r.per_type[0].winners[0]] += 1;
        }
        for w in wins {
            let f = w as f64 / n as f64;
            // 5 sigma for a binomial(1/3) frequency at n = 30k is ~0.014
            assert!((f - 1.0 / 3.0).abs() < 0.014, "frequency {f}");
        }
    }

    #[test]
    fn types_are_independent() {
        let mut b = bids(&[3.0, 9.0, 1.0, 8.0]);
        b[1].kind = 1;
        b[3].kind = 1;
        let r = run_auction(&b, &[1, 1], &mut rng());
        assert_eq!(r.per_type[0].winners, vec![0]);
        assert_eq!(r.per_type[0].payment, 1.0);
        assert_eq!(r.per_type[1].winners, vec![1]);
        assert_eq!(r.per_type[1].payment, 8.0);
    }

    proptest! {
        #[test]
        fn clearing_invariants(
            entries in prop::collection::vec((0usize..3, 0u8..6), 0..20),
            availability in prop::collection::vec(0usize..5, 3),
            seed in any::<u64>(),
        ) {
            let mut b = bids(&entries.iter().map(|(_, p)| *p as f64 / 5.0).collect::<Vec<_>>());
            for (bid, (k, _)) in b.iter_mut().zip(&entries) {
                bid.kind = *k;
            }
            let r = run_auction(&b, &availability, &mut SimRng::seed_from_u64(seed));
            prop_assert_eq!(r.won.len(), b.len());
            for (k, o) in r.per_type.iter().enumerate() {
                let of_kind = b.iter().filter(|x| x.kind == k).count();
                prop_assert_eq!(o.winners.len(), availability[k].min(of_kind));
                prop_assert_eq!(o.winners.len() + o.rejected.len(), of_kind);
                for &w in &o.winners {
                    prop_assert!(r.won[w] && b[w].kind == k);
                    prop_assert!(b[w].price >= o.payment);
                    for &l in &o.rejected {
                        prop_assert!(b[w].price >= b[l].price);
                    }
                }
                let top_loser = o.rejected.iter().map(|l| b[*l].price).fold(0.0, f64::max);
                let expected = if o.winners.is_empty() { 0.0 } else { top_loser };
                prop_assert_eq!(o.payment, expected);
            }
        }
    }
}
