//! Auction mechanism and supply side.

mod auction;
mod rebid;
mod seller;

use serde::Serialize;

pub use auction::{run_auction, AuctionRoundResult, Bid, RequestId, TypeOutcome};
pub use rebid::{handle_rebid, RebidDecision};
pub use seller::{
    Admission, CommodityType, Job, JobReport, Market, PricingRule, Rejection, Seller, SellerConfig,
    StepReport,
};

use crate::simcore::Step;

/// One line of the per-round audit log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditRow {
    pub step: Step,
    pub kind: usize,
    pub slots: usize,
    pub bid_count: usize,
    pub clearing_price: f64,
    /// Winning bidder ids joined with `;`.
    pub winners: String,
    pub rejections: String,
}

impl AuditRow {
    pub fn from_round(step: Step, bids: &[Bid], round: &AuctionRoundResult) -> Vec<AuditRow> {
        let ids = |idx: &[usize]| {
            idx.iter()
                .map(|i| bids[*i].bidder.to_string())
                .collect::<Vec<_>>()
                .join(";")
        };
        round
            .per_type
            .iter()
            .enumerate()
            .filter(|(_, o)| !o.winners.is_empty() || !o.rejected.is_empty())
            .map(|(kind, o)| AuditRow {
                step,
                kind,
                slots: o.slots,
                bid_count: o.winners.len() + o.rejected.len(),
                clearing_price: o.payment,
                winners: ids(&o.winners),
                rejections: ids(&o.rejected),
            })
            .collect()
    }
}
