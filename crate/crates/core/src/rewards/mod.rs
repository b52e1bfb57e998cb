//! Objective terms, scalarisation, budgets and preference sampling.

mod budget;
mod fairness;
mod ofr;
mod preference;
mod utility;

pub use budget::{update_budget, BidderAccount, BudgetOutcome};
pub use fairness::{jain_fairness, PaymentWindow};
pub use ofr::{offloading_failure_rate, OfrCounter};
pub use preference::{sample_preferences, PreferenceVector, ResampleClock};
pub use utility::{auction_utility, extrinsic_reward, LongTermTerms, UtilityInputs};

/// Share of total capacity in service, clamped to `[0, 1]`.
pub fn utilization_beta(in_service: f64, capacity: f64) -> f64 {
    if capacity <= 0.0 {
        return 0.0;
    }
    (in_service / capacity).clamp(0.0, 1.0)
}
