use super::{CreditSample, LearningConfig, ModelSet, Networks, Transition};
use crate::error::{Error, Result};
use crate::nn::{clip_norm, sgd_step};

/// Mean gradients of one shot, each in ascent direction, plus logged losses.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotGrads {
    pub actor_critic: Vec<f64>,
    pub behavior: Vec<f64>,
    pub curiosity: Vec<f64>,
    /// Mean raw extrinsic reward over the batch.
    pub rl_reward: f64,
    pub forward_loss: f64,
    pub inverse_loss: f64,
    pub used: usize,
}

/// Gradients of a batch at the given parameters.
///
/// Actor-critic: `delta * grad ln pi + value_coef * delta * grad V` with
/// `delta = r_i + gamma V(phi') - V(phi)`. Behavioural net: log-likelihood of
/// best-response actions. Curiosity: negative forward plus inverse loss.
pub fn shot_gradients(
    nets: &Networks,
    models: &ModelSet,
    batch: &[Transition],
    cfg: &LearningConfig,
    curiosity: bool,
) -> ShotGrads {
    let mut ac = vec![0.0; models.actor_critic.len()];
    let mut beh = vec![0.0; models.behavior.len()];
    let mut cur = vec![0.0; models.curiosity.len()];
    let (mut used, mut n_beh, mut n_cur) = (0usize, 0usize, 0usize);
    let (mut rl, mut lf, mut li) = (0.0, 0.0, 0.0);
    for t in batch {
        rl += t.r_e;
        let (Some(next_phi), Some(next_state)) = (&t.next_phi, &t.next_state) else {
            continue;
        };
        let th = &models.actor_critic.values;
        if let (Ok(v), Ok(v_next)) = (nets.policy.value(th, &t.phi), nets.policy.value(th, next_phi)) {
            let delta = t.intrinsic_reward() + cfg.discount * v_next - v;
            if delta.is_finite() {
                if let Ok((_, g)) =
                    nets.policy
                        .grad_combined(th, &t.phi, &t.actions, delta, cfg.value_coef * delta)
                {
                    ac.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
                    used += 1;
                }
            }
        }
        if t.best_response {
            if let Ok(g) = nets
                .behavior
                .grad_log_policy(&models.behavior.values, &t.phi, &t.actions)
            {
                beh.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
                n_beh += 1;
            }
        }
        if curiosity {
            let c = &models.curiosity.values;
            let f = nets.curiosity.forward_loss_grad(c, &t.phi, &t.actions, next_state);
            let i = nets.curiosity.inverse_loss_grad(c, &t.phi, &t.actions, next_state);
            if let (Ok((l1, g1)), Ok((l2, g2))) = (f, i) {
                for ((a, x), y) in cur.iter_mut().zip(&g1).zip(&g2) {
                    *a -= x + y;
                }
                lf += l1;
                li += l2;
                n_cur += 1;
            }
        }
    }
    let scale = |v: &mut Vec<f64>, n: usize| {
        if n > 0 {
            v.iter_mut().for_each(|x| *x /= n as f64);
        }
    };
    scale(&mut ac, used);
    scale(&mut beh, n_beh);
    scale(&mut cur, n_cur);
    let n = batch.len().max(1) as f64;
    ShotGrads {
        actor_critic: ac,
        behavior: beh,
        curiosity: cur,
        rl_reward: rl / n,
        forward_loss: if n_cur > 0 { lf / n_cur as f64 } else { f64::NAN },
        inverse_loss: if n_cur > 0 { li / n_cur as f64 } else { f64::NAN },
        used,
    }
}

fn apply(theta: &mut [f64], mut g: Vec<f64>, lr: f64, clip: f64) -> Result<()> {
    if clip > 0.0 {
        clip_norm(&mut g, clip);
    }
    sgd_step(theta, &g, lr)
}

/// One local inner-loop update of the actor-critic, behavioural and
/// (optionally) curiosity modules.
pub fn inner_train_step(
    nets: &Networks,
    models: &mut ModelSet,
    batch: &[Transition],
    cfg: &LearningConfig,
    curiosity: bool,
) -> Result<ShotGrads> {
    let g = shot_gradients(nets, models, batch, cfg, curiosity);
    for l in [g.forward_loss, g.inverse_loss] {
        if l.is_finite() && l > cfg.loss_ceiling {
            return Err(Error::Diverged(format!("curiosity loss {l}")));
        }
    }
    apply(&mut models.actor_critic.values, g.actor_critic.clone(), cfg.lr_actor, cfg.grad_clip)?;
    apply(&mut models.behavior.values, g.behavior.clone(), cfg.lr_behavior, cfg.grad_clip)?;
    if curiosity {
        apply(&mut models.curiosity.values, g.curiosity.clone(), cfg.lr_curiosity, cfg.grad_clip)?;
    }
    Ok(g)
}

/// Ascent-direction credit gradient and the pre-update loss on one window.
pub fn credit_gradient(nets: &Networks, models: &ModelSet, s: &CreditSample) -> Result<(f64, Vec<f64>)> {
    let (loss, g, _) = nets.credit.loss_grad(&models.credit.values, &s.segments, s.target)?;
    Ok((loss, g.into_iter().map(|x| -x).collect()))
}

pub fn credit_step(
    nets: &Networks,
    models: &mut ModelSet,
    s: &CreditSample,
    cfg: &LearningConfig,
) -> Result<f64> {
    let (loss, g) = credit_gradient(nets, models, s)?;
    if loss > cfg.loss_ceiling {
        return Err(Error::Diverged(format!("credit loss {loss}")));
    }
    apply(&mut models.credit.values, g, cfg.lr_credit, cfg.grad_clip)?;
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{ParamVector, TypeAction};
    use crate::simcore::SimRng;
    use rand::SeedableRng;

    fn small() -> (LearningConfig, Networks) {
        let cfg = LearningConfig {
            hidden: vec![3],
            stack_depth: 1,
            price_levels: 2,
            curiosity_hidden: 3,
            credit_hidden: 2,
            credit_attention: 2,
            grad_clip: 0.0,
            ..Default::default()
        };
        let nets = Networks::new(&cfg, 2);
        (cfg, nets)
    }

    fn transition(nets: &Networks, r: f64) -> Transition {
        let phi: Vec<f64> = (0..nets.feature_dim).map(|i| (i as f64 * 0.37).sin()).collect();
        let next: Vec<f64> = phi.iter().map(|x| x * 0.5).collect();
        let mut t = Transition::new(
            0,
            phi,
            vec![0.1; nets.state_dim],
            vec![Some(TypeAction::Bid(1)), Some(TypeAction::Backoff)],
            true,
        );
        t.r_e = r;
        t.labeled = true;
        t.next_state = Some(next[..nets.state_dim].to_vec());
        t.next_phi = Some(next);
        t
    }

    #[test]
    fn zero_reward_zero_value_is_a_fixed_point() {
        let (cfg, nets) = small();
        let mut m = nets.init(&mut SimRng::seed_from_u64(0));
        m.actor_critic = ParamVector::zeros(nets.policy.layout().clone());
        let before = m.actor_critic.clone();
        inner_train_step(&nets, &mut m, &[transition(&nets, 0.0)], &cfg, false).unwrap();
        assert_eq!(m.actor_critic, before);
    }

    #[test]
    fn single_transition_update_is_td_scaled_score() {
        let (mut cfg, nets) = small();
        cfg.value_coef = 0.0;
        let mut m = nets.init(&mut SimRng::seed_from_u64(3));
        let t = transition(&nets, 0.7);
        let th = m.actor_critic.values.clone();
        let v = nets.policy.value(&th, &t.phi).unwrap();
        let v2 = nets.policy.value(&th, t.next_phi.as_ref().unwrap()).unwrap();
        let delta = 0.7 + cfg.discount * v2 - v;
        let score = nets.policy.grad_log_policy(&th, &t.phi, &t.actions).unwrap();
        inner_train_step(&nets, &mut m, &[t], &cfg, false).unwrap();
        for ((new, old), s) in m.actor_critic.values.iter().zip(&th).zip(&score) {
            assert!((new - (old + cfg.lr_actor * delta * s)).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_discount_uses_immediate_reward() {
        let (mut cfg, nets) = small();
        cfg.discount = 0.0;
        cfg.value_coef = 0.0;
        let m = nets.init(&mut SimRng::seed_from_u64(5));
        let t = transition(&nets, 0.4);
        let v = nets.policy.value(&m.actor_critic.values, &t.phi).unwrap();
        let g = shot_gradients(&nets, &m, std::slice::from_ref(&t), &cfg, false);
        let score = nets
            .policy
            .grad_log_policy(&m.actor_critic.values, &t.phi, &t.actions)
            .unwrap();
        for (a, s) in g.actor_critic.iter().zip(&score) {
            assert!((a - (0.4 - v) * s).abs() < 1e-15);
        }
    }

    #[test]
    fn curiosity_disabled_leaves_its_params() {
        let (cfg, nets) = small();
        let mut m = nets.init(&mut SimRng::seed_from_u64(1));
        let before = m.curiosity.clone();
        let g = inner_train_step(&nets, &mut m, &[transition(&nets, 1.0)], &cfg, false).unwrap();
        assert_eq!(m.curiosity, before);
        assert!(g.forward_loss.is_nan());
        let g = inner_train_step(&nets, &mut m, &[transition(&nets, 1.0)], &cfg, true).unwrap();
        assert_ne!(m.curiosity, before);
        assert!(g.forward_loss >= 0.0);
    }

    #[test]
    fn learns_a_contextual_backoff_rule() {
        use rand::Rng;
        let cfg = LearningConfig {
            stack_depth: 1,
            ..Default::default()
        };
        let nets = Networks::new(&cfg, 2);
        let mut m = nets.init(&mut SimRng::seed_from_u64(11));
        let mut rng = SimRng::seed_from_u64(12);
        let phi_for = |x: f64, rng: &mut SimRng| -> Vec<f64> {
            let mut v: Vec<f64> = (0..nets.feature_dim).map(|_| rng.random_range(0.0..1.0)).collect();
            v[0] = x;
            v
        };
        for _ in 0..1500 {
            let batch: Vec<Transition> = (0..8)
                .map(|_| {
                    let x = if rng.random::<bool>() { 1.0 } else { 0.0 };
                    let phi = phi_for(x, &mut rng);
                    let out = nets.policy.forward(&m.actor_critic.values, &phi).unwrap();
                    let a = out.heads[0].sample(&mut rng);
                    let r = match a {
                        TypeAction::Bid(_) => 1.0 - 2.0 * x,
                        TypeAction::Backoff => 0.0,
                    };
                    let next = phi_for(if rng.random::<bool>() { 1.0 } else { 0.0 }, &mut rng);
                    let mut t = Transition::new(0, phi, vec![0.0; nets.state_dim], vec![Some(a), None], true);
                    t.r_e = r;
                    t.labeled = true;
                    t.next_state = Some(vec![0.0; nets.state_dim]);
                    t.next_phi = Some(next);
                    t
                })
                .collect();
            inner_train_step(&nets, &mut m, &batch, &cfg, false).unwrap();
        }
        let p = |x: f64, rng: &mut SimRng| {
            let mut s = 0.0;
            for _ in 0..200 {
                s += nets.policy.forward(&m.actor_critic.values, &phi_for(x, rng)).unwrap().heads[0].p_bid;
            }
            s / 200.0
        };
        let (p0, p1) = (p(0.0, &mut rng), p(1.0, &mut rng));
        assert!(p0 > 0.8 && p1 < 0.2, "p_bid {p0} vs {p1}");
    }
}
