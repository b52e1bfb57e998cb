//! Brute-force and property oracles for the deterministic mechanisms, with
//! optional injected faults to show that each oracle can fail.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::agent::{inner_train_step, segment_input_dim, shot_gradients, LearningConfig, Networks, RetrainMonitor, Transition};
use crate::market::{run_auction, Bid};
use crate::meta::{meta_update_equivalence_check, Coordinator};
use crate::nn::{max_relative_error, numeric_gradient, Gradient, TypeAction};
use crate::rewards::{
    auction_utility, extrinsic_reward, jain_fairness, offloading_failure_rate, sample_preferences, update_budget,
    utilization_beta, BidderAccount, BudgetOutcome, LongTermTerms, OfrCounter, PreferenceVector, UtilityInputs,
};
use crate::simcore::SimRng;

/// Fault injected into the code under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mutation {
    #[default]
    None,
    /// Winners pay the lowest winning price instead of the highest losing one.
    PaymentRule,
    /// One coordinate of every analytic gradient is perturbed.
    Gradient,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub millis: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub checks: Vec<OracleCheck>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn timed(name: &'static str, f: impl FnOnce() -> Result<String, String>) -> OracleCheck {
    let t = Instant::now();
    let (passed, detail) = match f() {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    OracleCheck {
        name,
        passed,
        detail,
        millis: t.elapsed().as_millis(),
    }
}

/// Every oracle at its acceptance size.
pub fn run_suite(seed: u64, mutation: Mutation) -> OracleReport {
    OracleReport {
        checks: vec![
            auction_oracle(10_000, seed, mutation),
            gradient_oracle(seed, mutation),
            meta_oracle(seed),
            rewards_oracle(10_000, seed),
            jain_oracle(10_000, seed),
            retrain_oracle(),
        ],
    }
}

/// Winner price multiset and clearing price by exhaustive search over all
/// winner subsets of the admissible size.
fn brute_force_type(prices: &[f64], slots: usize) -> (Vec<f64>, f64) {
    let m = prices.len();
    let n = slots.min(m);
    let mut best: Option<(f64, u32)> = None;
    for mask in 0u32..(1 << m) {
        if mask.count_ones() as usize != n {
            continue;
        }
        let total: f64 = (0..m).filter(|i| mask & (1 << i) != 0).map(|i| prices[i]).sum();
        if best.is_none_or(|(b, _)| total > b) {
            best = Some((total, mask));
        }
    }
    let mask = best.map_or(0, |(_, m)| m);
    let mut won: Vec<f64> = (0..m).filter(|i| mask & (1 << i) != 0).map(|i| prices[i]).collect();
    won.sort_by(|a, b| b.total_cmp(a));
    let payment = if n > 0 && m > slots {
        (0..m)
            .filter(|i| mask & (1 << i) == 0)
            .map(|i| prices[i])
            .fold(f64::NEG_INFINITY, f64::max)
    } else {
        0.0
    };
    (won, payment)
}

pub fn auction_oracle(instances: usize, seed: u64, mutation: Mutation) -> OracleCheck {
    timed("auction", || {
        let mut rng = SimRng::seed_from_u64(seed);
        for inst in 0..instances {
            let n_types = rng.random_range(1..=2usize);
            let slots: Vec<usize> = (0..n_types).map(|_| rng.random_range(1..=4)).collect();
            let n_bids = rng.random_range(0..=8usize);
            let ties = rng.random::<bool>();
            let bids: Vec<Bid> = (0..n_bids)
                .map(|i| Bid {
                    bidder: i,
                    request: i as u64,
                    kind: rng.random_range(0..n_types),
                    price: if ties {
                        rng.random_range(0..5u32) as f64
                    } else {
                        rng.random_range(0.0..10.0)
                    },
                    created: 0,
                    deadline: 100,
                    rebid_count: 0,
                })
                .collect();
            let mut got = run_auction(&bids, &slots, &mut rng);
            if mutation == Mutation::PaymentRule {
                for o in &mut got.per_type {
                    if let Some(&w) = o.winners.last() {
                        o.payment = bids[w].price;
                    }
                }
            }
            for (k, &s) in slots.iter().enumerate() {
                let idx: Vec<usize> = (0..n_bids).filter(|i| bids[*i].kind == k).collect();
                let prices: Vec<f64> = idx.iter().map(|i| bids[*i].price).collect();
                let (want, pay) = brute_force_type(&prices, s);
                let o = &got.per_type[k];
                let have: Vec<f64> = o.winners.iter().map(|w| bids[*w].price).collect();
                let mut all: Vec<usize> = o.winners.iter().chain(&o.rejected).copied().collect();
                all.sort_unstable();
                if have != want || o.payment != pay || all != idx {
                    return Err(format!(
                        "instance {inst} type {k}: winners {have:?} pay {} vs oracle {want:?} pay {pay}",
                        o.payment
                    ));
                }
                if !ties {
                    let mut exact: Vec<usize> = idx.clone();
                    exact.sort_by(|a, b| bids[*b].price.total_cmp(&bids[*a].price));
                    exact.truncate(s.min(idx.len()));
                    if o.winners != exact {
                        return Err(format!("instance {inst} type {k}: winner ids {:?} vs {exact:?}", o.winners));
                    }
                }
            }
            let flags: usize = got.won.iter().filter(|w| **w).count();
            let winners: usize = got.per_type.iter().map(|o| o.winners.len()).sum();
            if flags != winners {
                return Err(format!("instance {inst}: {flags} win flags for {winners} winners"));
            }
        }
        Ok(format!("{instances} instances match"))
    })
}

fn tiny_learning() -> LearningConfig {
    LearningConfig {
        hidden: vec![6, 4],
        stack_depth: 1,
        price_levels: 3,
        curiosity_hidden: 5,
        credit_hidden: 4,
        credit_attention: 3,
        grad_clip: 0.0,
        ..Default::default()
    }
}

fn random_vec(rng: &mut SimRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn gradient_oracle(seed: u64, mutation: Mutation) -> OracleCheck {
    timed("gradients", || {
        const TOL: f64 = 1e-4;
        const H: f64 = 1e-5;
        let nets = Networks::new(&tiny_learning(), 2);
        let mut worst = 0.0f64;
        let mut check = |name: &str, init: u64, mut g: Vec<f64>, n: Vec<f64>| -> Result<(), String> {
            if mutation == Mutation::Gradient {
                let i = g.len() / 2;
                g[i] += 1e-2 * g[i].abs().max(1.0);
            }
            let e = max_relative_error(&g, &n);
            worst = worst.max(e);
            if e < TOL {
                Ok(())
            } else {
                Err(format!("{name} init {init}: relative error {e:.3e}"))
            }
        };
        for init in 0..3u64 {
            let mut rng = SimRng::seed_from_u64(seed.wrapping_add(init));
            let m = nets.init(&mut rng);
            let phi = random_vec(&mut rng, nets.feature_dim);
            let s_next = random_vec(&mut rng, nets.state_dim);
            let acts = [Some(TypeAction::Bid(rng.random_range(0..nets.levels))), Some(TypeAction::Backoff)];
            let (w_pi, w_v) = (0.7, -0.3);

            let th = &m.actor_critic.values;
            let (_, g) = nets.policy.grad_combined(th, &phi, &acts, w_pi, w_v).map_err(|e| e.to_string())?;
            let f = |t: &[f64]| {
                w_pi * nets.policy.forward(t, &phi).unwrap().log_prob(&acts).unwrap() + w_v * nets.policy.value(t, &phi).unwrap()
            };
            check("actor-critic", init, g, numeric_gradient(&f, th, H))?;

            let th = &m.behavior.values;
            let g = nets.behavior.grad_log_policy(th, &phi, &acts).map_err(|e| e.to_string())?;
            let f = |t: &[f64]| nets.behavior.forward(t, &phi).unwrap().log_prob(&acts).unwrap();
            check("behavior", init, g, numeric_gradient(&f, th, H))?;

            let th = &m.curiosity.values;
            let (_, g) = nets.curiosity.forward_loss_grad(th, &phi, &acts, &s_next).map_err(|e| e.to_string())?;
            let f = |t: &[f64]| nets.curiosity.forward_loss_grad(t, &phi, &acts, &s_next).unwrap().0;
            check("curiosity forward", init, g, numeric_gradient(&f, th, H))?;
            let (_, g) = nets.curiosity.inverse_loss_grad(th, &phi, &acts, &s_next).map_err(|e| e.to_string())?;
            let f = |t: &[f64]| nets.curiosity.inverse_loss_grad(t, &phi, &acts, &s_next).unwrap().0;
            check("curiosity inverse", init, g, numeric_gradient(&f, th, H))?;

            let th = &m.credit.values;
            let seq: Vec<Vec<f64>> = (0..4).map(|_| random_vec(&mut rng, segment_input_dim(nets.state_dim))).collect();
            let target = rng.random_range(-1.0..1.0);
            let (_, g, _) = nets.credit.loss_grad(th, &seq, target).map_err(|e| e.to_string())?;
            let f = |t: &[f64]| nets.credit.loss_grad(t, &seq, target).unwrap().0;
            check("credit", init, g, numeric_gradient(&f, th, H))?;
        }
        Ok(format!("5 modules x 3 inits, worst relative error {worst:.2e}"))
    })
}

fn synthetic_batch(nets: &Networks, rng: &mut SimRng, n: usize) -> Vec<Transition> {
    (0..n)
        .map(|_| {
            let phi = random_vec(rng, nets.feature_dim);
            let a = if rng.random::<bool>() {
                TypeAction::Bid(rng.random_range(0..nets.levels))
            } else {
                TypeAction::Backoff
            };
            let mut t = Transition::new(0, phi, random_vec(rng, nets.state_dim), vec![Some(a), None], true);
            t.r_e = rng.random_range(-1.0..1.0);
            t.labeled = true;
            t.next_state = Some(random_vec(rng, nets.state_dim));
            t.next_phi = Some(random_vec(rng, nets.feature_dim));
            t
        })
        .collect()
}

/// Three agents run `tau` local shots from the shared start and hand off
/// the gradient of the next batch; returns the coordinator state and the
/// submissions in order.
fn meta_round(seed: u64) -> Result<(Vec<crate::nn::ParamVector>, Vec<crate::nn::ParamVector>, Vec<Vec<Gradient>>), String> {
    let cfg = tiny_learning();
    let nets = Networks::new(&cfg, 2);
    let mut rng = SimRng::seed_from_u64(seed);
    let theta0 = nets.init(&mut rng);
    let mut coord = Coordinator::new(theta0.clone().into_vec(), cfg.meta_lr);
    let mut subs = Vec::new();
    for agent in 0..3 {
        let mut local = theta0.clone();
        for _ in 0..cfg.tau {
            let b = synthetic_batch(&nets, &mut rng, 4);
            inner_train_step(&nets, &mut local, &b, &cfg, true).map_err(|e| e.to_string())?;
        }
        let g = shot_gradients(&nets, &local, &synthetic_batch(&nets, &mut rng, 4), &cfg, true);
        let credit = vec![0.0; local.credit.len()];
        let bundle: Vec<Gradient> = [g.actor_critic, g.behavior, g.curiosity, credit]
            .into_iter()
            .map(|values| Gradient {
                values,
                agent,
                shot: cfg.tau as u64 + 1,
            })
            .collect();
        coord.submit(&bundle).map_err(|e| e.to_string())?;
        subs.push(bundle);
    }
    Ok((theta0.into_vec(), coord.into_params(), subs))
}

pub fn meta_oracle(seed: u64) -> OracleCheck {
    timed("meta-equivalence", || {
        let (theta0, state, subs) = meta_round(seed)?;
        let lr = tiny_learning().meta_lr;
        if !meta_update_equivalence_check(&theta0, &subs, lr, &state, 1e-10) {
            return Err("coordinator state differs from theta0 + lr * sum(g)".into());
        }
        let (_, again, _) = meta_round(seed)?;
        let same = state
            .iter()
            .zip(&again)
            .all(|(a, b)| a.values.iter().zip(&b.values).all(|(x, y)| x.to_bits() == y.to_bits()));
        if !same {
            return Err("repeat run is not bit-identical".into());
        }
        Ok("3 agents, tau 3, within 1e-10 and bit-identical on repeat".into())
    })
}

pub fn rewards_oracle(draws: usize, seed: u64) -> OracleCheck {
    timed("rewards", || {
        let w = |o1, o2, o12| PreferenceVector::from_free(o1, o2, o12);
        let mut cases: Vec<(&str, f64, f64)> = vec![
            (
                "payoff",
                auction_utility(
                    &UtilityInputs {
                        alpha: true,
                        won: true,
                        valuation: 10.0,
                        payment: 6.0,
                        ..Default::default()
                    },
                    0.5,
                    0.5,
                ),
                4.0,
            ),
            (
                "backoff",
                auction_utility(
                    &UtilityInputs {
                        backoff_cost: 2.0,
                        ..Default::default()
                    },
                    0.5,
                    0.5,
                ),
                -1.0,
            ),
            (
                "loss",
                auction_utility(
                    &UtilityInputs {
                        alpha: true,
                        loss_cost: 10.0,
                        ..Default::default()
                    },
                    0.5,
                    0.5,
                ),
                -5.0,
            ),
            ("short-term", extrinsic_reward(2.0, 0.5, None, &w(0.6, 0.5, 0.5)), 1.4),
            (
                "long-term",
                extrinsic_reward(
                    0.0,
                    0.0,
                    Some(LongTermTerms {
                        ofr: 0.2,
                        fairness: 0.9,
                    }),
                    &w(0.5, 0.5, 0.5),
                ),
                0.35,
            ),
            ("jain", jain_fairness(&[2.0, 1.0, 1.0]), 16.0 / 18.0),
            (
                "ofr",
                offloading_failure_rate(&OfrCounter {
                    succeeded: 8,
                    failed: 2,
                })
                .unwrap_or(f64::NAN),
                0.2,
            ),
            ("beta", utilization_beta(30.0, 60.0), 0.5),
        ];
        let mut acct = BidderAccount::new(1.0, vec![1.0]);
        let reset = update_budget(&mut acct, -1.0) == BudgetOutcome::Reset;
        cases.push(("budget reset", if reset { acct.budget } else { f64::NAN }, 1.0));
        for (name, got, want) in &cases {
            if got != want {
                return Err(format!("{name}: {got} != {want}"));
            }
        }
        let mut rng = SimRng::seed_from_u64(seed);
        for i in 0..draws {
            let p = sample_preferences(&mut rng);
            if !p.satisfies_simplex() {
                return Err(format!("draw {i} off the simplex: {p:?}"));
            }
        }
        Ok(format!("{} examples exact, {draws} simplex draws", cases.len()))
    })
}

pub fn jain_oracle(vectors: usize, seed: u64) -> OracleCheck {
    timed("jain", || {
        let mut rng = SimRng::seed_from_u64(seed);
        for i in 0..vectors {
            let n = rng.random_range(1..=12usize);
            let mut p: Vec<f64> = (0..n)
                .map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..100.0) })
                .collect();
            if p.iter().all(|x| *x == 0.0) {
                p[0] = 1.0;
            }
            let j = jain_fairness(&p);
            let lo = 1.0 / n as f64;
            if j < lo * (1.0 - 1e-12) || j > 1.0 {
                return Err(format!("vector {i}: J = {j} outside [{lo}, 1]"));
            }
            let lambda = rng.random_range(1e-3..1e3);
            let scaled: Vec<f64> = p.iter().map(|x| x * lambda).collect();
            let js = jain_fairness(&scaled);
            if (js - j).abs() > 1e-12 {
                return Err(format!("vector {i}: scaling by {lambda} moves J {j} -> {js}"));
            }
            let mut perm = p.clone();
            perm.reverse();
            perm.rotate_left(rng.random_range(0..n));
            let jp = jain_fairness(&perm);
            if (jp - j).abs() > 1e-12 {
                return Err(format!("vector {i}: permutation moves J {j} -> {jp}"));
            }
        }
        Ok(format!("{vectors} vectors: bounds, scale invariance, symmetry"))
    })
}

/// Moving-average trigger computed directly from the full loss history.
fn trigger_pattern(losses: &[f64], n: usize) -> Vec<bool> {
    (0..losses.len())
        .map(|i| {
            let past = &losses[i.saturating_sub(n)..i];
            past.is_empty() || losses[i] > past.iter().sum::<f64>() / past.len() as f64
        })
        .collect()
}

pub fn retrain_oracle() -> OracleCheck {
    timed("retrain-trigger", || {
        let mut ones = vec![1.0; 10];
        let mut up = ones.clone();
        up.push(2.0);
        ones.push(0.5);
        let improving: Vec<f64> = (0..20).map(|i| 10.0 - 0.5 * i as f64).collect();
        let zigzag: Vec<f64> = (0..40).map(|i| ((i * 7) % 11) as f64 + (i / 10) as f64).collect();
        let mut expected_improving = vec![false; 20];
        expected_improving[0] = true;
        let cases: Vec<(&str, Vec<f64>, Option<Vec<bool>>)> = vec![
            ("above average", up, None),
            ("below average", ones, None),
            ("improving", improving, Some(expected_improving)),
            ("zigzag", zigzag, None),
        ];
        for (name, seq, want) in cases {
            let mut m = RetrainMonitor::new(10, 1);
            let got: Vec<bool> = seq.iter().map(|l| m.check(*l)).collect();
            let oracle = trigger_pattern(&seq, 10);
            if got != oracle || want.is_some_and(|w| w != got) {
                return Err(format!("{name}: got {got:?}, expected {oracle:?}"));
            }
            match name {
                "above average" if !got[10] => return Err("above-average loss did not trigger".into()),
                "below average" if got[10] => return Err("below-average loss triggered".into()),
                _ => {}
            }
        }
        Ok("4 sequences match the N=10 moving-average pattern".into())
    })
}
