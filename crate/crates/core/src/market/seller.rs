//! Passive computing sites: admission, FIFO execution, deadline drops and
//! utilisation-driven pricing.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::market::RequestId;
use crate::simcore::{SimRng, Step};

/// A service request type with its resource and timing specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommodityType {
    pub name: String,
    pub resource_units: f64,
    /// Steps from request creation to its deadline.
    pub deadline_window: Step,
    /// A vehicle emits one request of this type every `arrival_interval` steps.
    pub arrival_interval: Step,
    pub uplink_mbit: f64,
    pub downlink_mbit: f64,
}

impl CommodityType {
    pub fn motion_planning() -> Self {
        Self {
            name: "F1".into(),
            resource_units: 80.0,
            deadline_window: 100,
            arrival_interval: 100,
            uplink_mbit: 0.4,
            downlink_mbit: 0.0,
        }
    }

    pub fn image_segmentation() -> Self {
        Self {
            name: "F2".into(),
            resource_units: 80.0,
            deadline_window: 500,
            arrival_interval: 500,
            uplink_mbit: 4.0,
            downlink_mbit: 0.4,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.resource_units > 0.0) {
            return Err(format!("type {}: resource_units must be > 0", self.name));
        }
        if self.deadline_window == 0 {
            return Err(format!("type {}: deadline_window must be > 0", self.name));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SellerConfig {
    /// Resource units processed per step.
    pub capacity: f64,
    /// Extra one-way network delay to reach this site (remote cloud).
    pub extra_delay: Step,
    /// Concurrent admitted jobs allowed per commodity type.
    pub slots_per_type: usize,
}

impl Default for SellerConfig {
    fn default() -> Self {
        Self {
            capacity: 60.0,
            extra_delay: 0,
            slots_per_type: 2,
        }
    }
}

/// Unit-price rule as a function of utilisation; must be non-decreasing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum PricingRule {
    Linear { base: f64 },
    Power { base: f64, exponent: f64 },
}

impl Default for PricingRule {
    fn default() -> Self {
        PricingRule::Linear { base: 1.0 }
    }
}

impl PricingRule {
    pub fn price(&self, utilization: f64) -> f64 {
        let u = utilization.clamp(0.0, 1.0);
        match *self {
            PricingRule::Linear { base } => base * u,
            PricingRule::Power { base, exponent } => base * u.powf(exponent),
        }
    }
}

/// A request admitted by the auctioneer and waiting at or running on a site.
#[derive(Debug, Clone, PartialEq)]
pub struct Job {
    pub request: RequestId,
    pub bidder: usize,
    pub kind: usize,
    pub work_total: f64,
    pub work_remaining: f64,
    /// First step the uplink data is available at the site.
    pub ready_at: Step,
    pub deadline: Step,
    /// Steps needed to return the result to the vehicle.
    pub return_steps: Step,
    pub admitted: Step,
}

/// What the auctioneer knows when it tries to place a winning request.
#[derive(Debug, Clone, PartialEq)]
pub struct Admission {
    pub request: RequestId,
    pub bidder: usize,
    pub kind: usize,
    pub nominal_work: f64,
    pub uplink_steps: Step,
    pub downlink_steps: Step,
    pub deadline: Step,
}

#[derive(Debug, Clone)]
pub struct Seller {
    pub id: usize,
    pub cfg: SellerConfig,
    queue: Vec<Job>,
    occupied: Vec<usize>,
    price: f64,
    utilization: f64,
    in_service: f64,
}

impl Seller {
    pub fn new(id: usize, cfg: SellerConfig, n_types: usize) -> Self {
        Self {
            id,
            cfg,
            queue: Vec::new(),
            occupied: vec![0; n_types],
            price: 0.0,
            utilization: 0.0,
            in_service: 0.0,
        }
    }

    pub fn price(&self) -> f64 {
        self.price
    }

    pub fn utilization(&self) -> f64 {
        self.utilization
    }

    /// Resource units consumed during the last executed step.
    pub fn in_service(&self) -> f64 {
        self.in_service
    }

    pub fn backlog(&self) -> f64 {
        self.queue.iter().map(|j| j.work_remaining).sum()
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    pub fn free_slots(&self, kind: usize) -> usize {
        self.cfg.slots_per_type.saturating_sub(self.occupied[kind])
    }

    /// Conservative completion estimate for a new job appended to the queue.
    pub fn can_meet(&self, adm: &Admission, now: Step) -> bool {
        if self.cfg.capacity <= 0.0 {
            return false;
        }
        let processing = ((self.backlog() + adm.nominal_work) / self.cfg.capacity).ceil() as Step;
        let finish = now
            + adm.uplink_steps
            + self.cfg.extra_delay
            + processing
            + adm.downlink_steps
            + self.cfg.extra_delay;
        finish <= adm.deadline
    }

    fn enqueue(&mut self, job: Job) {
        self.occupied[job.kind] += 1;
        self.queue.push(job);
    }

    fn set_price(&mut self, rule: &PricingRule, horizon: f64) {
        let denom = self.cfg.capacity * horizon;
        self.utilization = if denom > 0.0 {
            (self.backlog() / denom).min(1.0)
        } else {
            1.0
        };
        self.price = rule.price(self.utilization);
    }
}

/// Completion or drop notice for an admitted job.
#[derive(Debug, Clone, PartialEq)]
pub struct JobReport {
    pub request: RequestId,
    pub bidder: usize,
    pub kind: usize,
    pub seller: usize,
    pub step: Step,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepReport {
    pub completed: Vec<JobReport>,
    pub dropped: Vec<JobReport>,
    pub in_service: f64,
    pub capacity: f64,
    pub capacity_violations: usize,
}

impl StepReport {
    pub fn beta(&self) -> f64 {
        crate::rewards::utilization_beta(self.in_service, self.capacity)
    }
}

/// Why the auctioneer could not place a winning request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rejection {
    NoCapableSeller,
}

/// All computing sites plus the placement and pricing policy.
#[derive(Debug, Clone)]
pub struct Market {
    pub types: Vec<CommodityType>,
    sellers: Vec<Seller>,
    pricing: PricingRule,
    /// Multiplicative jitter on nominal work, drawn uniformly from this range.
    jitter: (f64, f64),
    /// Horizon (steps) over which backlog is compared to capacity for pricing.
    load_horizon: f64,
    capacity_violations: usize,
}

impl Market {
    pub fn new(
        types: Vec<CommodityType>,
        sellers: &[SellerConfig],
        pricing: PricingRule,
        jitter: (f64, f64),
        load_horizon: f64,
    ) -> Self {
        let n = types.len();
        let sellers = sellers
            .iter()
            .enumerate()
            .map(|(i, c)| Seller::new(i, c.clone(), n))
            .collect();
        Self {
            types,
            sellers,
            pricing,
            jitter,
            load_horizon,
            capacity_violations: 0,
        }
    }

    pub fn sellers(&self) -> &[Seller] {
        &self.sellers
    }

    pub fn total_capacity(&self) -> f64 {
        self.sellers.iter().map(|s| s.cfg.capacity).sum()
    }

    pub fn capacity_violations(&self) -> usize {
        self.capacity_violations
    }

    /// Free service slots `n_k` per type across all sites.
    pub fn availability(&self) -> Vec<usize> {
        (0..self.types.len())
            .map(|k| self.sellers.iter().map(|s| s.free_slots(k)).sum())
            .collect()
    }

    /// Places a winning request on the cheapest site that has a free slot and
    /// can still meet the deadline; equal prices go to the lowest site id.
    pub fn assign_to_seller(
        &mut self,
        adm: &Admission,
        now: Step,
        rng: &mut SimRng,
    ) -> Result<usize, Rejection> {
        let chosen = self
            .sellers
            .iter()
            .filter(|s| s.free_slots(adm.kind) > 0 && s.can_meet(adm, now))
            .min_by(|a, b| a.price.total_cmp(&b.price).then(a.id.cmp(&b.id)))
            .map(|s| s.id)
            .ok_or(Rejection::NoCapableSeller)?;
        let (lo, hi) = self.jitter;
        let factor = if hi > lo { rng.random_range(lo..hi) } else { lo };
        let seller = &mut self.sellers[chosen];
        let work = adm.nominal_work * factor;
        seller.enqueue(Job {
            request: adm.request,
            bidder: adm.bidder,
            kind: adm.kind,
            work_total: work,
            work_remaining: work,
            ready_at: now + adm.uplink_steps + seller.cfg.extra_delay,
            deadline: adm.deadline,
            return_steps: adm.downlink_steps + seller.cfg.extra_delay,
            admitted: now,
        });
        Ok(chosen)
    }

    /// Runs one step of FIFO execution on every site.
    ///
    /// Jobs that can no longer return their result by the deadline are dropped
    /// first; the remaining capacity is then handed out in queue order to jobs
    /// whose input has arrived.
    pub fn execute_step(&mut self, now: Step) -> StepReport {
        let mut report = StepReport {
            capacity: self.total_capacity(),
            ..Default::default()
        };
        for seller in &mut self.sellers {
            let mut kept = Vec::with_capacity(seller.queue.len());
            for job in seller.queue.drain(..) {
                if now + job.return_steps > job.deadline {
                    seller.occupied[job.kind] -= 1;
                    report.dropped.push(JobReport {
                        request: job.request,
                        bidder: job.bidder,
                        kind: job.kind,
                        seller: seller.id,
                        step: now,
                    });
                } else {
                    kept.push(job);
                }
            }
            seller.queue = kept;

            let mut budget = seller.cfg.capacity;
            let mut used = 0.0;
            for job in seller.queue.iter_mut() {
                if budget <= 0.0 {
                    break;
                }
                if job.ready_at > now {
                    continue;
                }
                let take = job.work_remaining.min(budget);
                job.work_remaining -= take;
                budget -= take;
                used += take;
            }
            if used > seller.cfg.capacity + 1e-9 {
                self.capacity_violations += 1;
                report.capacity_violations += 1;
            }
            seller.in_service = used;
            report.in_service += used;

            let mut kept = Vec::with_capacity(seller.queue.len());
            for job in seller.queue.drain(..) {
                if job.work_remaining <= 1e-9 {
                    seller.occupied[job.kind] -= 1;
                    report.completed.push(JobReport {
                        request: job.request,
                        bidder: job.bidder,
                        kind: job.kind,
                        seller: seller.id,
                        step: now + job.return_steps,
                    });
                } else {
                    kept.push(job);
                }
            }
            seller.queue = kept;
        }
        report
    }

    /// Refreshes every site's utilisation and unit price.
    pub fn update_seller_prices(&mut self) -> Vec<f64> {
        let rule = self.pricing;
        let horizon = self.load_horizon;
        self.sellers
            .iter_mut()
            .map(|s| {
                s.set_price(&rule, horizon);
                s.price
            })
            .collect()
    }

    /// Share of each type's service slots currently holding a job.
    pub fn slot_occupancy(&self) -> Vec<f64> {
        let total: usize = self.sellers.iter().map(|s| s.cfg.slots_per_type).sum();
        self.availability()
            .iter()
            .map(|free| {
                if total == 0 {
                    1.0
                } else {
                    1.0 - *free as f64 / total as f64
                }
            })
            .collect()
    }

    /// Population variance of site utilisations.
    pub fn load_variance(&self) -> f64 {
        let n = self.sellers.len() as f64;
        if n == 0.0 {
            return 0.0;
        }
        let mean = self.sellers.iter().map(|s| s.utilization).sum::<f64>() / n;
        self.sellers
            .iter()
            .map(|s| (s.utilization - mean).powi(2))
            .sum::<f64>()
            / n
    }

    #[cfg(test)]
    pub(crate) fn seller_mut(&mut self, id: usize) -> &mut Seller {
        &mut self.sellers[id]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng() -> SimRng {
        SimRng::seed_from_u64(9)
    }

    fn market(caps: &[f64], slots: usize) -> Market {
        let cfgs: Vec<_> = caps
            .iter()
            .map(|c| SellerConfig {
                capacity: *c,
                extra_delay: 0,
                slots_per_type: slots,
            })
            .collect();
        Market::new(
            vec![CommodityType::motion_planning()],
            &cfgs,
            PricingRule::Linear { base: 1.0 },
            (1.0, 1.0),
            20.0,
        )
    }

    fn adm(request: u64, deadline: Step) -> Admission {
        Admission {
            request,
            bidder: 0,
            kind: 0,
            nominal_work: 80.0,
            uplink_steps: 0,
            downlink_steps: 0,
            deadline,
        }
    }

    #[test]
    fn lone_job_completes_after_eight_steps() {
        let mut m = market(&[10.0], 1);
        m.assign_to_seller(&adm(1, 100), 0, &mut rng()).unwrap();
        for t in 0..7 {
            let r = m.execute_step(t);
            assert!(r.completed.is_empty(), "step {t}");
            assert_eq!(r.in_service, 10.0);
        }
        let r = m.execute_step(7);
        assert_eq!(r.completed.len(), 1);
        assert_eq!(r.completed[0].step, 7);
        assert_eq!(m.availability(), vec![1]);
    }

    #[test]
    fn infeasible_admission_is_rejected() {
        let mut m = market(&[10.0], 4);
        // needs 8 steps but only 2 remain
        assert_eq!(
            m.assign_to_seller(&adm(1, 2), 0, &mut rng()),
            Err(Rejection::NoCapableSeller)
        );
        // queue already saturating the deadline
        m.assign_to_seller(&adm(2, 100), 0, &mut rng()).unwrap();
        assert_eq!(
            m.assign_to_seller(&adm(3, 10), 0, &mut rng()),
            Err(Rejection::NoCapableSeller)
        );
    }

    #[test]
    fn job_past_deadline_is_dropped() {
        let mut m = market(&[10.0], 1);
        let s = m.seller_mut(0);
        s.enqueue(Job {
            request: 5,
            bidder: 0,
            kind: 0,
            work_total: 80.0,
            work_remaining: 80.0,
            ready_at: 0,
            deadline: 2,
            return_steps: 0,
            admitted: 0,
        });
        let mut dropped = 0;
        for t in 0..10 {
            let r = m.execute_step(t);
            assert!(r.completed.is_empty());
            dropped += r.dropped.len();
        }
        assert_eq!(dropped, 1);
        assert_eq!(m.availability(), vec![1]);
    }

    #[test]
    fn empty_market_is_idle() {
        let mut m = market(&[10.0, 10.0], 1);
        let r = m.execute_step(0);
        assert!(r.completed.is_empty() && r.dropped.is_empty());
        assert_eq!(r.beta(), 0.0);
        assert_eq!(m.update_seller_prices(), vec![0.0, 0.0]);
    }

    #[test]
    fn lowest_price_then_lowest_id() {
        let mut m = market(&[10.0, 10.0], 4);
        // equal prices: lowest id wins
        assert_eq!(m.assign_to_seller(&adm(1, 400), 0, &mut rng()), Ok(0));
        m.update_seller_prices();
        // seller 0 now loaded, seller 1 idle and cheaper
        assert!(m.sellers()[0].price() > m.sellers()[1].price());
        assert_eq!(m.assign_to_seller(&adm(2, 400), 0, &mut rng()), Ok(1));
    }

    #[test]
    fn utilisation_prices_and_preference() {
        let mut m = market(&[100.0, 100.0], 8);
        // seller 0 at 0.9 of its 20-step horizon, seller 1 at 0.2
        for (id, work) in [(0usize, 1800.0), (1, 400.0)] {
            m.seller_mut(id).enqueue(Job {
                request: 100 + id as u64,
                bidder: 9,
                kind: 0,
                work_total: work,
                work_remaining: work,
                ready_at: 0,
                deadline: 10_000,
                return_steps: 0,
                admitted: 0,
            });
        }
        let prices = m.update_seller_prices();
        assert!((m.sellers()[0].utilization() - 0.9).abs() < 1e-12);
        assert!((prices[1] - 0.2).abs() < 1e-12);
        assert_eq!(m.assign_to_seller(&adm(1, 1000), 0, &mut rng()), Ok(1));
    }

    #[test]
    fn pricing_rule_boundaries() {
        let r = PricingRule::Linear { base: 3.0 };
        assert_eq!(r.price(0.0), 0.0);
        assert_eq!(r.price(1.0), 3.0);
        let p = PricingRule::Power { base: 2.0, exponent: 2.0 };
        assert!(p.price(0.3) <= p.price(0.6));
    }

    #[test]
    fn steady_demand_balances_utilisation() {
        let mut m = market(&[10.0, 10.0], 50);
        // asymmetric start: seller 0 carries a large backlog
        m.seller_mut(0).enqueue(Job {
            request: 0,
            bidder: 0,
            kind: 0,
            work_total: 190.0,
            work_remaining: 190.0,
            ready_at: 0,
            deadline: 100_000,
            return_steps: 0,
            admitted: 0,
        });
        m.update_seller_prices();
        let gap0 = (m.sellers()[0].utilization() - m.sellers()[1].utilization()).abs();
        let mut rng = rng();
        let mut gaps = Vec::new();
        for t in 0..200u64 {
            if t % 4 == 0 {
                let _ = m.assign_to_seller(
                    &Admission {
                        nominal_work: 20.0,
                        ..adm(t + 1, t + 10_000)
                    },
                    t,
                    &mut rng,
                );
            }
            m.execute_step(t);
            m.update_seller_prices();
            gaps.push((m.sellers()[0].utilization() - m.sellers()[1].utilization()).abs());
        }
        let late = gaps[150..].iter().cloned().fold(0.0, f64::max);
        assert!(gap0 > 0.9);
        assert!(late < gap0 / 2.0, "late gap {late}");
    }
}
