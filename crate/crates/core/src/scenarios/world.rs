//! The marketplace event loop: vehicles, bidders, auctioneer and sellers.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ScenarioConfig;
use crate::agent::{Agent, HeadView, Observation, Phase};
use crate::error::{Error, Result};
use crate::market::{
    handle_rebid, run_auction, Admission, AuditRow, Bid, Market, RebidDecision, RequestId,
};
use crate::nn::TypeAction;
use crate::rewards::{
    auction_utility, extrinsic_reward, offloading_failure_rate, sample_preferences,
    update_budget, BidderAccount, BudgetOutcome, LongTermTerms, OfrCounter, PaymentWindow,
    PreferenceVector, ResampleClock, UtilityInputs,
};
use crate::simcore::{EventQueue, RngStreams, SimRng, Step, Stream, VehicleSpawner, VehicleTrack};

/// One row of the metrics CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub step: Step,
    pub window: u64,
    pub bidder: String,
    pub algo: String,
    pub metric: String,
    pub value: f64,
}

pub const SYSTEM: &str = "SYSTEM";

/// Auctioneer broadcast, readable by bidders from its delivery step on.
#[derive(Debug, Clone, PartialEq)]
struct Feedback {
    origin: Step,
    payments: Vec<f64>,
    /// Computing utilisation, the reward's utilisation term.
    beta: f64,
    /// Slot occupancy per type, the utilisation signal in the bidder state.
    occupancy: Vec<f64>,
    active: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Event {
    Feedback(Feedback),
    /// Result of a finished job arriving back at the vehicle.
    Delivery {
        request: RequestId,
        bidder: usize,
        vehicle: u64,
        deadline: Step,
    },
}

#[derive(Debug, Clone, PartialEq)]
struct Request {
    id: RequestId,
    vehicle: u64,
    created: Step,
    deadline: Step,
    rebid_count: u8,
    available_at: Step,
}

#[derive(Debug, Clone, Default, PartialEq)]
struct WindowStats {
    utility: f64,
    reward: f64,
    ofr: OfrCounter,
    payments: f64,
    bids: u64,
    wins: u64,
    admitted: u64,
    executed: u64,
    dropped: u64,
}

struct Bidder {
    agent: Agent,
    account: BidderAccount,
    pipeline: Vec<Vec<Request>>,
    vehicles: usize,
    clock: Option<ResampleClock>,
    pref_rng: SimRng,
    prev_reward: f64,
    last_ofr: f64,
    window: WindowStats,
    retrains_seen: usize,
    retrain_steps_seen: u64,
}

struct Vehicle {
    track: VehicleTrack,
    bidder: Option<usize>,
    next_request: Vec<Step>,
}

#[derive(Debug, Clone, Default, PartialEq)]
struct SystemWindow {
    beta: f64,
    load_variance: f64,
    vehicles: f64,
    active: f64,
    steps: u64,
}

/// Switches for optional outputs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WorldOptions {
    pub audit: bool,
    pub trace: bool,
    /// Resample preferences on the geometric clock (deployment behaviour).
    pub preference_clock: bool,
}

/// Counters that must stay at zero in a healthy run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct InvariantCounters {
    pub capacity_violations: usize,
    pub causality_violations: usize,
    /// Broadcast reads checked by the causality audit.
    pub feedback_reads: usize,
}

pub struct World {
    cfg: Arc<ScenarioConfig>,
    opts: WorldOptions,
    now: Step,
    market: Market,
    queue: EventQueue<Event>,
    streams: RngStreams,
    spawner: VehicleSpawner,
    vehicles: BTreeMap<u64, Vehicle>,
    bidders: Vec<Bidder>,
    payments: PaymentWindow,
    observed: Option<Feedback>,
    next_request: RequestId,
    levels: usize,
    /// Vehicle and deadline of every job currently admitted to a seller.
    admitted_meta: BTreeMap<RequestId, (u64, Step)>,
    metrics: Vec<MetricRow>,
    audit: Vec<AuditRow>,
    trace: Vec<String>,
    invariants: InvariantCounters,
    system: SystemWindow,
}

impl World {
    /// Builds the world around pre-made agents; agent `i` is bidder `i`.
    pub fn new(cfg: Arc<ScenarioConfig>, agents: Vec<Agent>, opts: WorldOptions) -> Result<Self> {
        cfg.validate()?;
        if agents.is_empty() {
            return Err(Error::Config("no bidders".into()));
        }
        let mut streams = RngStreams::new(cfg.seed);
        let spawner = VehicleSpawner::new(cfg.mobility, streams.fork(Stream::Mobility, 0));
        let max_units = cfg
            .types
            .iter()
            .map(|t| t.resource_units)
            .fold(0.0, f64::max);
        let fixed = cfg.fixed_preferences.map(|(a, b, c)| PreferenceVector::from_free(a, b, c));
        let n = agents.len();
        let mut bidders = Vec::with_capacity(n);
        for (i, mut agent) in agents.into_iter().enumerate() {
            if agent.id != i {
                return Err(Error::Config(format!("agent {} at position {i}", agent.id)));
            }
            let mut pref_rng = streams.fork(Stream::Preferences, i as u64);
            agent.preferences = fixed.unwrap_or_else(|| sample_preferences(&mut pref_rng));
            let (lo, hi) = cfg.valuation_fraction;
            let frac = if hi > lo {
                streams.get(Stream::Requests).random_range(lo..hi)
            } else {
                lo
            };
            let valuations = cfg
                .types
                .iter()
                .map(|t| frac * cfg.initial_budget * t.resource_units / max_units * cfg.valuation_scale)
                .collect();
            let resample = opts.preference_clock
                && fixed.is_none()
                && !agent.features.constant_preferences;
            let clock = resample.then(|| ResampleClock::new(cfg.preference_mean_steps, 0, &mut pref_rng));
            bidders.push(Bidder {
                agent,
                account: BidderAccount::new(cfg.initial_budget, valuations),
                pipeline: vec![Vec::new(); cfg.types.len()],
                vehicles: 0,
                clock,
                pref_rng,
                prev_reward: 0.0,
                last_ofr: 0.0,
                window: WindowStats::default(),
                retrains_seen: 0,
                retrain_steps_seen: 0,
            });
        }
        let market = Market::new(
            cfg.types.clone(),
            &cfg.sellers,
            cfg.pricing,
            cfg.jitter,
            cfg.load_horizon,
        );
        Ok(Self {
            payments: PaymentWindow::new(n, cfg.window),
            levels: cfg.learning.price_levels,
            cfg,
            opts,
            now: 0,
            market,
            queue: EventQueue::new(),
            streams,
            spawner,
            vehicles: BTreeMap::new(),
            bidders,
            observed: None,
            next_request: 0,
            admitted_meta: BTreeMap::new(),
            metrics: Vec::new(),
            audit: Vec::new(),
            trace: Vec::new(),
            invariants: InvariantCounters::default(),
            system: SystemWindow::default(),
        })
    }

    pub fn now(&self) -> Step {
        self.now
    }

    pub fn agents(&self) -> impl Iterator<Item = &Agent> {
        self.bidders.iter().map(|b| &b.agent)
    }

    pub fn agents_mut(&mut self) -> impl Iterator<Item = &mut Agent> {
        self.bidders.iter_mut().map(|b| &mut b.agent)
    }

    pub fn into_agents(self) -> Vec<Agent> {
        self.bidders.into_iter().map(|b| b.agent).collect()
    }

    pub fn metrics(&self) -> &[MetricRow] {
        &self.metrics
    }

    pub fn audit_rows(&self) -> &[AuditRow] {
        &self.audit
    }

    pub fn trace_lines(&self) -> &[String] {
        &self.trace
    }

    pub fn invariants(&self) -> InvariantCounters {
        InvariantCounters {
            capacity_violations: self.market.capacity_violations(),
            ..self.invariants
        }
    }

    pub fn budgets(&self) -> Vec<f64> {
        self.bidders.iter().map(|b| b.account.budget).collect()
    }

    pub fn valuations(&self, bidder: usize) -> &[f64] {
        &self.bidders[bidder].account.valuations
    }

    /// Draws fresh preferences for every bidder that does not keep them fixed.
    pub fn resample_preferences(&mut self) {
        if self.cfg.fixed_preferences.is_some() {
            return;
        }
        for b in &mut self.bidders {
            if !b.agent.features.constant_preferences {
                b.agent.preferences = sample_preferences(&mut b.pref_rng);
            }
        }
    }

    pub fn run(&mut self, steps: Step) -> Result<()> {
        for _ in 0..steps {
            self.step()?;
        }
        Ok(())
    }

    fn trace(&mut self, kind: &str, payload: std::fmt::Arguments) {
        if self.opts.trace {
            let mut line = String::new();
            let _ = write!(line, "{},{},{}", self.now, kind, payload);
            self.trace.push(line);
        }
    }

    fn fail(&mut self, bidder: usize, req: RequestId, why: &str) {
        let b = &mut self.bidders[bidder];
        b.window.ofr.failed += 1;
        b.account.failures += 1;
        self.trace("fail", format_args!("{bidder};{req};{why}"));
    }

    /// Advances the world by one step.
    pub fn step(&mut self) -> Result<()> {
        let now = self.now;
        self.queue.advance_to(now)?;
        for b in &mut self.bidders {
            b.agent.apply_staged(now);
            if let Some(clock) = &mut b.clock {
                if clock.due(now, &mut b.pref_rng) {
                    b.agent.preferences = sample_preferences(&mut b.pref_rng);
                }
            }
        }
        self.mobility(now);
        self.generate_requests(now);
        self.deliver_events(now);
        self.expire_requests(now);

        let (bids, mut utility, decided) = self.decide(now)?;
        let payments = self.auction(now, &bids, &mut utility)?;

        let report = self.market.execute_step(now);
        for d in &report.dropped {
            self.admitted_meta.remove(&d.request);
            self.bidders[d.bidder].window.dropped += 1;
            self.fail(d.bidder, d.request, "dropped");
        }
        for c in &report.completed {
            self.bidders[c.bidder].window.executed += 1;
            let (vehicle, deadline) = self
                .admitted_meta
                .remove(&c.request)
                .unwrap_or((u64::MAX, 0));
            self.queue.schedule(
                Event::Delivery {
                    request: c.request,
                    bidder: c.bidder,
                    vehicle,
                    deadline,
                },
                c.step.max(now),
            )?;
        }
        // results that need no downlink arrive this step
        self.deliver_events(now);
        self.market.update_seller_prices();
        let active = self.bidders.iter().filter(|b| b.vehicles > 0).count();
        let beta = report.beta();
        self.queue.schedule(
            Event::Feedback(Feedback {
                origin: now,
                payments,
                beta,
                occupancy: self.market.slot_occupancy(),
                active,
            }),
            now + self.cfg.feedback_delay,
        )?;
        self.system.beta += beta;
        self.system.load_variance += self.market.load_variance();
        self.system.vehicles += self.vehicles.len() as f64;
        self.system.active += active as f64;
        self.system.steps += 1;

        self.settle_rewards(&decided, &utility);
        self.payments.expire(now);
        if (now + 1) % self.cfg.window == 0 {
            self.close_window(now)?;
        }
        for b in &mut self.bidders {
            b.agent.train(now)?;
        }
        self.now += 1;
        Ok(())
    }

    /// Mobility runs ahead of the market so the run starts in steady traffic.
    fn road_time(&self, now: Step) -> Step {
        now + self.cfg.warmup_steps
    }

    fn mobility(&mut self, now: Step) {
        let m = self.bidders.len() as u64;
        let road = self.road_time(now);
        while self.spawner.peek_spawn().is_some_and(|s| s <= road) {
            let Some(track) = self.spawner.next() else { break };
            let rng = self.streams.get(Stream::Requests);
            let joins = rng.random::<f64>() < self.cfg.participation;
            let next_request = self
                .cfg
                .types
                .iter()
                .map(|t| now + rng.random_range(0..t.arrival_interval.max(1)))
                .collect();
            let bidder = joins.then_some((track.id % m) as usize);
            if let Some(b) = bidder {
                self.bidders[b].vehicles += 1;
            }
            self.trace("spawn", format_args!("{};{:?}", track.id, bidder));
            self.vehicles.insert(
                track.id,
                Vehicle {
                    track,
                    bidder,
                    next_request,
                },
            );
        }
        let gone: Vec<u64> = self
            .vehicles
            .iter()
            .filter(|(_, v)| !v.track.in_coverage(road))
            .map(|(id, _)| *id)
            .collect();
        for id in gone {
            let Some(v) = self.vehicles.remove(&id) else { continue };
            self.trace("exit", format_args!("{id}"));
            let Some(b) = v.bidder else { continue };
            self.bidders[b].vehicles -= 1;
            let mut lost = Vec::new();
            for queue in &mut self.bidders[b].pipeline {
                queue.retain(|r| {
                    let keep = r.vehicle != id;
                    if !keep {
                        lost.push(r.id);
                    }
                    keep
                });
            }
            for r in lost {
                self.fail(b, r, "departed");
            }
        }
    }

    fn generate_requests(&mut self, now: Step) {
        let mut created = Vec::new();
        for (id, v) in &mut self.vehicles {
            let Some(b) = v.bidder else { continue };
            for (k, t) in self.cfg.types.iter().enumerate() {
                while v.next_request[k] <= now {
                    v.next_request[k] += t.arrival_interval.max(1);
                    created.push((b, k, *id, now + t.deadline_window));
                }
            }
        }
        for (b, k, vehicle, deadline) in created {
            let id = self.next_request;
            self.next_request += 1;
            self.bidders[b].pipeline[k].push(Request {
                id,
                vehicle,
                created: now,
                deadline,
                rebid_count: 0,
                available_at: now,
            });
            self.trace("request", format_args!("{b};{id};{k};{deadline}"));
        }
    }

    fn deliver_events(&mut self, now: Step) {
        while let Some((_, at, ev)) = self.queue.pop_due() {
            if at > now {
                self.invariants.causality_violations += 1;
            }
            match ev {
                Event::Feedback(f) => {
                    self.trace("feedback", format_args!("{};{}", f.origin, f.beta));
                    self.observed = Some(f);
                }
                Event::Delivery {
                    request,
                    bidder,
                    vehicle,
                    deadline,
                } => {
                    let road = self.road_time(now);
                    let present = self
                        .vehicles
                        .get(&vehicle)
                        .is_some_and(|v| v.track.in_coverage(road));
                    if present && now <= deadline {
                        self.bidders[bidder].window.ofr.succeeded += 1;
                        self.trace("delivered", format_args!("{bidder};{request}"));
                    } else {
                        self.fail(bidder, request, "undeliverable");
                    }
                }
            }
        }
    }

    fn expire_requests(&mut self, now: Step) {
        let mut expired = Vec::new();
        for (i, b) in self.bidders.iter_mut().enumerate() {
            for queue in &mut b.pipeline {
                queue.retain(|r| {
                    let keep = r.deadline > now;
                    if !keep {
                        expired.push((i, r.id));
                    }
                    keep
                });
            }
        }
        for (b, r) in expired {
            self.fail(b, r, "expired");
        }
    }

    /// Collects every bidder's choice for its head-of-queue requests.
    fn decide(&mut self, now: Step) -> Result<(Vec<Bid>, Vec<f64>, Vec<bool>)> {
        let m = self.bidders.len();
        let mut bids = Vec::new();
        let mut utility = vec![0.0; m];
        let mut decided = vec![false; m];
        let n_types = self.cfg.types.len();
        let levels = self.levels;
        if let Some(f) = &self.observed {
            if f.origin >= now {
                self.invariants.causality_violations += 1;
            }
        }
        for (i, b) in self.bidders.iter_mut().enumerate() {
            let heads: Vec<Option<&Request>> = b
                .pipeline
                .iter()
                .map(|q| q.iter().find(|r| r.available_at <= now))
                .collect();
            if heads.iter().all(Option::is_none) {
                continue;
            }
            let obs = Observation {
                heads: heads
                    .iter()
                    .zip(&self.cfg.types)
                    .map(|(h, t)| {
                        h.map(|r| HeadView {
                            ttd_frac: (r.deadline - now) as f64 / t.deadline_window as f64,
                            resource_units: t.resource_units,
                            rebid_count: r.rebid_count,
                        })
                    })
                    .collect(),
                active_fraction: self.observed.as_ref().map_or(0.0, |f| f.active as f64 / m as f64),
                utilization: self
                    .observed
                    .as_ref()
                    .map_or_else(|| vec![0.0; n_types], |f| f.occupancy.clone()),
                budget_ratio: (b.account.budget / b.account.initial).ln_1p(),
                payments: self
                    .observed
                    .as_ref()
                    .map_or_else(|| vec![0.0; n_types], |f| f.payments.clone()),
                prev_reward: b.prev_reward,
            };
            if self.observed.is_some() {
                self.invariants.feedback_reads += 1;
            }
            let actions = b.agent.decide(now, &obs);
            decided[i] = true;
            let w = b.agent.preferences;
            let mut committed = 0.0;
            for (k, (head, action)) in heads.iter().zip(&actions).enumerate() {
                let (Some(r), Some(action)) = (head, action) else { continue };
                let v = b.account.valuations[k];
                let price = match *action {
                    TypeAction::Bid(l) => {
                        let p = l as f64 / (levels.max(2) - 1) as f64 * v;
                        (committed + p <= b.account.budget).then_some(p)
                    }
                    TypeAction::Backoff => None,
                };
                match price {
                    Some(p) => {
                        committed += p;
                        b.account.bids += 1;
                        b.window.bids += 1;
                        bids.push(Bid {
                            bidder: i,
                            request: r.id,
                            kind: k,
                            price: p,
                            created: r.created,
                            deadline: r.deadline,
                            rebid_count: r.rebid_count,
                        });
                    }
                    None => {
                        let ttd = r.deadline.saturating_sub(now).max(1) as f64;
                        utility[i] += auction_utility(
                            &UtilityInputs {
                                alpha: false,
                                backoff_cost: v / ttd * self.cfg.backoff_scale,
                                ..Default::default()
                            },
                            w.o1_2,
                            w.o1_3,
                        );
                    }
                }
            }
        }
        Ok((bids, utility, decided))
    }

    /// Runs the auction and places winners; returns the clearing payments.
    fn auction(&mut self, now: Step, bids: &[Bid], utility: &mut [f64]) -> Result<Vec<f64>> {
        let availability = self.market.availability();
        let round = run_auction(bids, &availability, self.streams.get(Stream::AuctionTies));
        if self.opts.audit {
            self.audit.extend(AuditRow::from_round(now, bids, &round));
        }
        for (idx, bid) in bids.iter().enumerate() {
            let b = bid.bidder;
            let v = self.bidders[b].account.valuations[bid.kind];
            let w = self.bidders[b].agent.preferences;
            let pos = self.bidders[b].pipeline[bid.kind]
                .iter()
                .position(|r| r.id == bid.request)
                .ok_or_else(|| Error::Config(format!("request {} missing from pipeline", bid.request)))?;
            let mut placed = false;
            if round.won[idx] {
                let req = &self.bidders[b].pipeline[bid.kind][pos];
                let vehicle = req.vehicle;
                let t = &self.cfg.types[bid.kind];
                let road = self.road_time(now);
                let distance = self
                    .vehicles
                    .get(&vehicle)
                    .and_then(|v| v.track.distance_at(road));
                let delays = distance.and_then(|d| {
                    let up = self.cfg.channel.transmission_delay(t.uplink_mbit, d).ok()?;
                    let down = self.cfg.channel.transmission_delay(t.downlink_mbit, d).ok()?;
                    Some((up, down))
                });
                if let Some((up, down)) = delays {
                    let adm = Admission {
                        request: bid.request,
                        bidder: b,
                        kind: bid.kind,
                        nominal_work: t.resource_units,
                        uplink_steps: up,
                        downlink_steps: down,
                        deadline: bid.deadline,
                    };
                    let rng = self.streams.get(Stream::Requests);
                    if let Ok(seller) = self.market.assign_to_seller(&adm, now, rng) {
                        placed = true;
                        let p = round.payment(bid.kind);
                        self.bidders[b].pipeline[bid.kind].remove(pos);
                        self.admitted_meta.insert(bid.request, (vehicle, bid.deadline));
                        let bs = &mut self.bidders[b];
                        bs.account.wins += 1;
                        bs.window.wins += 1;
                        bs.window.admitted += 1;
                        bs.window.payments += p;
                        self.payments.record(now, b, p);
                        utility[b] += auction_utility(
                            &UtilityInputs {
                                alpha: true,
                                won: true,
                                valuation: v,
                                payment: p,
                                ..Default::default()
                            },
                            w.o1_2,
                            w.o1_3,
                        );
                        self.trace("win", format_args!("{b};{};{seller};{p}", bid.request));
                    }
                }
            }
            if placed {
                continue;
            }
            self.bidders[b].account.losses += 1;
            utility[b] += auction_utility(
                &UtilityInputs {
                    alpha: true,
                    won: false,
                    loss_cost: v,
                    ..Default::default()
                },
                w.o1_2,
                w.o1_3,
            );
            match handle_rebid(bid, now, self.cfg.max_rebids) {
                RebidDecision::Requeue { at, rebid_count } => {
                    let r = &mut self.bidders[b].pipeline[bid.kind][pos];
                    r.available_at = at;
                    r.rebid_count = rebid_count;
                    self.trace("requeue", format_args!("{b};{}", bid.request));
                }
                RebidDecision::FinalLoss => {
                    self.bidders[b].pipeline[bid.kind].remove(pos);
                    self.fail(b, bid.request, "lost");
                }
            }
        }
        Ok(round.per_type.iter().map(|o| o.payment).collect())
    }

    fn settle_rewards(&mut self, decided: &[bool], utility: &[f64]) {
        let beta = self.observed.as_ref().map_or(0.0, |f| f.beta);
        for i in 0..self.bidders.len() {
            if !decided[i] {
                continue;
            }
            let mut u = utility[i];
            let b = &mut self.bidders[i];
            let w = b.agent.preferences;
            let mut flushed = Vec::new();
            if update_budget(&mut b.account, u) == BudgetOutcome::Reset {
                for (k, queue) in b.pipeline.iter_mut().enumerate() {
                    for r in queue.drain(..) {
                        u -= w.o1_2 * b.account.valuations[k];
                        flushed.push(r.id);
                    }
                }
            }
            let r_e = extrinsic_reward(u, beta, None, &w);
            b.agent.add_reward(r_e);
            b.prev_reward = r_e;
            b.window.utility += u;
            b.window.reward += r_e;
            for r in flushed {
                self.fail(i, r, "reset");
            }
        }
    }

    fn close_window(&mut self, now: Step) -> Result<()> {
        let win = self.cfg.window;
        let end = now + 1;
        let start = end - win;
        let index = now / win;
        let fairness = self.payments.fairness();
        let mut system = OfrCounter::default();
        let (mut executed, mut dropped) = (0u64, 0u64);
        let mut rows = Vec::new();
        for (i, b) in self.bidders.iter_mut().enumerate() {
            let ofr = offloading_failure_rate(&b.window.ofr).unwrap_or(b.last_ofr);
            b.last_ofr = ofr;
            let w = b.agent.preferences;
            let r_long = extrinsic_reward(0.0, 0.0, Some(LongTermTerms { ofr, fairness }), &w);
            let credit_loss = b.agent.deliver_long_term(now, start, end, r_long)?;
            b.window.reward += r_long;
            system.add(&b.window.ofr);
            executed += b.window.executed;
            dropped += b.window.dropped;
            let retrains = b.agent.log.retrain_events.len() - b.retrains_seen;
            for &at in &b.agent.log.retrain_events[b.retrains_seen..] {
                rows.push((i, "retrain_event", at as f64));
            }
            b.retrains_seen = b.agent.log.retrain_events.len();
            let busy = b.agent.log.retrain_steps - b.retrain_steps_seen;
            b.retrain_steps_seen = b.agent.log.retrain_steps;
            let s = &b.window;
            let mut push = |metric: &'static str, value: f64| rows.push((i, metric, value));
            push("utility", s.utility);
            push("reward", s.reward);
            if let Some(o) = offloading_failure_rate(&s.ofr) {
                push("ofr", o);
            }
            push("resolved", s.ofr.resolved() as f64);
            push("failures", s.ofr.failed as f64);
            push("payments", s.payments);
            push("bids", s.bids as f64);
            push("wins", s.wins as f64);
            push("budget", b.account.budget);
            push("retrains", retrains as f64);
            push("retrain_steps", busy as f64);
            if let Some(l) = credit_loss {
                push("credit_loss", l);
            }
            b.window = WindowStats::default();
        }
        for (i, metric, value) in rows {
            let b = &self.bidders[i];
            self.metrics.push(MetricRow {
                step: end,
                window: index,
                bidder: i.to_string(),
                algo: b.agent.kind.label().to_string(),
                metric: metric.to_string(),
                value,
            });
        }
        let steps = self.system.steps.max(1) as f64;
        let mut sys = vec![
            ("fairness", fairness),
            ("beta", self.system.beta / steps),
            ("load_variance", self.system.load_variance / steps),
            ("vehicles", self.system.vehicles / steps),
            ("active_bidders", self.system.active / steps),
            ("capacity_violations", self.market.capacity_violations() as f64),
            ("causality_violations", self.invariants.causality_violations as f64),
        ];
        if let Some(o) = offloading_failure_rate(&system) {
            sys.push(("ofr", o));
        }
        if executed + dropped > 0 {
            sys.push(("responsiveness", executed as f64 / (executed + dropped) as f64));
        }
        for (metric, value) in sys {
            self.metrics.push(MetricRow {
                step: end,
                window: index,
                bidder: SYSTEM.to_string(),
                algo: SYSTEM.to_string(),
                metric: metric.to_string(),
                value,
            });
        }
        self.system = SystemWindow::default();
        self.trace("window", format_args!("{index};{fairness}"));
        Ok(())
    }

    /// Phase of the first agent, for callers that drive training epochs.
    pub fn phase(&self) -> Phase {
        self.bidders[0].agent.phase()
    }
}
