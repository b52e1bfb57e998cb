/// A bidder's wealth and lifetime counters.
#[derive(Debug, Clone, PartialEq)]
pub struct BidderAccount {
    pub budget: f64,
    pub initial: f64,
    /// Valuation per commodity type.
    pub valuations: Vec<f64>,
    pub bids: u64,
    pub wins: u64,
    pub losses: u64,
    pub failures: u64,
    pub resets: u64,
}

impl BidderAccount {
    pub fn new(initial: f64, valuations: Vec<f64>) -> Self {
        Self {
            budget: initial,
            initial,
            valuations,
            bids: 0,
            wins: 0,
            losses: 0,
            failures: 0,
            resets: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BudgetOutcome {
    Updated,
    /// Budget hit zero or below; the caller must flush the pipeline.
    Reset,
}

/// Adds `u` to the budget, resetting to the initial wealth on `B <= 0`.
pub fn update_budget(acct: &mut BidderAccount, u: f64) -> BudgetOutcome {
    acct.budget += u;
    if acct.budget <= 0.0 {
        acct.budget = acct.initial;
        acct.resets += 1;
        BudgetOutcome::Reset
    } else {
        BudgetOutcome::Updated
    }
}
