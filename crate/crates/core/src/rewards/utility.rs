use super::PreferenceVector;

/// Inputs to the per-bid auction utility.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UtilityInputs {
    /// 1 if the bidder submitted, 0 if it backed off.
    pub alpha: bool,
    /// 1 if the submitted bid won.
    pub won: bool,
    pub valuation: f64,
    pub payment: f64,
    /// Cost of losing the bid.
    pub loss_cost: f64,
    /// Cost of backing off this step.
    pub backoff_cost: f64,
}

/// Utility of one bid: payoff on a win, weighted loss cost on a loss and
/// weighted backoff cost when the bidder holds back.
pub fn auction_utility(x: &UtilityInputs, w_loss: f64, w_backoff: f64) -> f64 {
    match (x.alpha, x.won) {
        (true, true) => x.valuation - x.payment,
        (true, false) => -w_loss * x.loss_cost,
        (false, _) => -w_backoff * x.backoff_cost,
    }
}

/// Long-term objective values, present only on delivery steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LongTermTerms {
    pub ofr: f64,
    pub fairness: f64,
}

/// Scalarised extrinsic reward. OFR enters negated so every term is maximised.
pub fn extrinsic_reward(
    r_o1: f64,
    beta: f64,
    long_term: Option<LongTermTerms>,
    w: &PreferenceVector,
) -> f64 {
    let short = w.o1 * r_o1 + w.o3 * beta;
    match long_term {
        Some(lt) => short + w.o2 * -lt.ofr + w.o4 * lt.fairness,
        None => short,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(o1: f64, o2: f64, o12: f64) -> PreferenceVector {
        PreferenceVector::from_free(o1, o2, o12)
    }

    #[test]
    fn payoff_term() {
        let x = UtilityInputs {
            alpha: true,
            won: true,
            valuation: 10.0,
            payment: 6.0,
            ..Default::default()
        };
        assert_eq!(auction_utility(&x, 0.5, 0.5), 4.0);
    }

    #[test]
    fn backoff_term() {
        let x = UtilityInputs {
            backoff_cost: 2.0,
            ..Default::default()
        };
        assert_eq!(auction_utility(&x, 0.5, 0.5), -1.0);
        let zero = UtilityInputs::default();
        assert_eq!(auction_utility(&zero, 0.5, 0.5), 0.0);
    }

    #[test]
    fn loss_term() {
        let x = UtilityInputs {
            alpha: true,
            loss_cost: 10.0,
            ..Default::default()
        };
        assert_eq!(auction_utility(&x, 0.5, 0.5), -5.0);
    }

    #[test]
    fn scalarisation_examples() {
        assert_eq!(extrinsic_reward(3.0, 0.7, None, &w(1.0, 0.5, 0.5)), 3.0);
        let r = extrinsic_reward(2.0, 0.5, None, &w(0.6, 0.5, 0.5));
        assert!((r - 1.4).abs() < 1e-12);
        let lt = LongTermTerms {
            ofr: 0.2,
            fairness: 0.9,
        };
        let r = extrinsic_reward(0.0, 0.0, Some(lt), &w(0.5, 0.5, 0.5));
        assert!((r - 0.35).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn reward_mixes_each_objective_pair(
            free in (0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0),
            r in -5.0f64..5.0,
            beta in 0.0f64..=1.0,
            ofr in 0.0f64..=1.0,
            fair in 0.0f64..=1.0,
        ) {
            let w = w(free.0, free.1, free.2);
            prop_assert!(w.satisfies_simplex());
            let lt = LongTermTerms { ofr, fairness: fair };
            let v = extrinsic_reward(r, beta, Some(lt), &w);
            // each weight pair mixes its two terms
            let lo = r.min(beta) + (-ofr).min(fair);
            let hi = r.max(beta) + (-ofr).max(fair);
            prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
            let worse = LongTermTerms { ofr: (ofr + 0.1).min(1.0), fairness: fair };
            prop_assert!(extrinsic_reward(r, beta, Some(worse), &w) <= v + 1e-12);
        }
    }
}
