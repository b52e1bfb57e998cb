use serde::{Deserialize, Serialize};

use super::{Layout, ModuleTag, ParamVector};
use crate::error::{Error, Result};
use crate::simcore::SimRng;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreditArch {
    pub input: usize,
    pub hidden: usize,
    pub attention: usize,
}

/// Elman cell over segment summaries, additive attention over the hidden
/// states and a linear readout of the attended context.
#[derive(Debug, Clone, PartialEq)]
pub struct CreditNet {
    pub arch: CreditArch,
    layout: Layout,
    wx: usize,
    wh: usize,
    b: usize,
    wa: usize,
    ba: usize,
    v: usize,
    wo: usize,
    bo: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CreditOutput {
    pub hidden: Vec<Vec<f64>>,
    /// Attention weights, non-negative and summing to one.
    pub eps: Vec<f64>,
    pub prediction: f64,
}

struct Trace {
    out: CreditOutput,
    att: Vec<Vec<f64>>,
    context: Vec<f64>,
}

impl CreditNet {
    pub fn new(arch: CreditArch) -> Self {
        let (i, h, a) = (arch.input, arch.hidden, arch.attention);
        let mut layout = Layout::new(ModuleTag::Credit);
        let wx = layout.push("rnn.wx", &[h, i]);
        let wh = layout.push("rnn.wh", &[h, h]);
        let b = layout.push("rnn.b", &[h]);
        let wa = layout.push("att.w", &[a, h]);
        let ba = layout.push("att.b", &[a]);
        let v = layout.push("att.v", &[a]);
        let wo = layout.push("out.w", &[h]);
        let bo = layout.push("out.b", &[1]);
        Self {
            arch,
            layout,
            wx,
            wh,
            b,
            wa,
            ba,
            v,
            wo,
            bo,
        }
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn init(&self, rng: &mut SimRng) -> ParamVector {
        use rand::Rng;
        let mut p = ParamVector::glorot(self.layout.clone(), rng);
        // rank-1 attention and readout vectors get small random values too
        let h = self.arch.hidden as f64;
        for name in ["att.v", "out.w"] {
            if let Some(s) = p.tensor_mut(name) {
                for x in s {
                    *x = rng.random_range(-1.0..1.0) / h.sqrt();
                }
            }
        }
        p
    }

    fn matvec(theta: &[f64], off: usize, rows: usize, x: &[f64], out: &mut [f64]) {
        let cols = x.len();
        for r in 0..rows {
            let row = &theta[off + r * cols..off + (r + 1) * cols];
            out[r] += row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }

    fn trace(&self, theta: &[f64], seq: &[Vec<f64>]) -> Result<Trace> {
        if seq.is_empty() {
            return Err(Error::EmptySequence);
        }
        if theta.len() != self.layout.len {
            return Err(Error::Dimension {
                expected: self.layout.len,
                got: theta.len(),
            });
        }
        let (h, a) = (self.arch.hidden, self.arch.attention);
        let mut hidden = Vec::with_capacity(seq.len());
        let mut att = Vec::with_capacity(seq.len());
        let mut scores = Vec::with_capacity(seq.len());
        let mut prev = vec![0.0; h];
        for x in seq {
            if x.len() != self.arch.input {
                return Err(Error::Dimension {
                    expected: self.arch.input,
                    got: x.len(),
                });
            }
            let mut pre = theta[self.b..self.b + h].to_vec();
            Self::matvec(theta, self.wx, h, x, &mut pre);
            Self::matvec(theta, self.wh, h, &prev, &mut pre);
            let ht: Vec<f64> = pre.iter().map(|v| v.tanh()).collect();
            let mut ap = theta[self.ba..self.ba + a].to_vec();
            Self::matvec(theta, self.wa, a, &ht, &mut ap);
            let at: Vec<f64> = ap.iter().map(|v| v.tanh()).collect();
            scores.push(at.iter().zip(&theta[self.v..self.v + a]).map(|(x, w)| x * w).sum::<f64>());
            att.push(at);
            prev = ht.clone();
            hidden.push(ht);
        }
        let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
        let z: f64 = e.iter().sum();
        let eps: Vec<f64> = e.iter().map(|v| v / z).collect();
        let mut context = vec![0.0; h];
        for (w, ht) in eps.iter().zip(&hidden) {
            for (c, x) in context.iter_mut().zip(ht) {
                *c += w * x;
            }
        }
        let prediction = theta[self.bo]
            + context
                .iter()
                .zip(&theta[self.wo..self.wo + h])
                .map(|(c, w)| c * w)
                .sum::<f64>();
        Ok(Trace {
            out: CreditOutput {
                hidden,
                eps,
                prediction,
            },
            att,
            context,
        })
    }

    pub fn forward(&self, theta: &[f64], seq: &[Vec<f64>]) -> Result<CreditOutput> {
        Ok(self.trace(theta, seq)?.out)
    }

    /// Squared prediction error against `target`, with its gradient.
    pub fn loss_grad(
        &self,
        theta: &[f64],
        seq: &[Vec<f64>],
        target: f64,
    ) -> Result<(f64, Vec<f64>, CreditOutput)> {
        let tr = self.trace(theta, seq)?;
        let (h, a, n_in) = (self.arch.hidden, self.arch.attention, self.arch.input);
        let err = tr.out.prediction - target;
        let dy = 2.0 * err;
        let mut g = vec![0.0; self.layout.len];
        g[self.bo] += dy;
        for j in 0..h {
            g[self.wo + j] += dy * tr.context[j];
        }
        let dc: Vec<f64> = theta[self.wo..self.wo + h].iter().map(|w| dy * w).collect();
        let deps: Vec<f64> = tr
            .out
            .hidden
            .iter()
            .map(|ht| ht.iter().zip(&dc).map(|(x, d)| x * d).sum())
            .collect();
        let mean: f64 = tr.out.eps.iter().zip(&deps).map(|(e, d)| e * d).sum();
        let n = seq.len();
        let mut dh_direct = vec![vec![0.0; h]; n];
        for t in 0..n {
            let ht = &tr.out.hidden[t];
            let de = tr.out.eps[t] * (deps[t] - mean);
            let at = &tr.att[t];
            for (i, d) in dh_direct[t].iter_mut().enumerate() {
                *d += tr.out.eps[t] * dc[i];
            }
            for r in 0..a {
                g[self.v + r] += de * at[r];
                let dpre = de * theta[self.v + r] * (1.0 - at[r] * at[r]);
                if dpre == 0.0 {
                    continue;
                }
                g[self.ba + r] += dpre;
                for i in 0..h {
                    g[self.wa + r * h + i] += dpre * ht[i];
                    dh_direct[t][i] += dpre * theta[self.wa + r * h + i];
                }
            }
        }
        let mut carry = vec![0.0; h];
        for t in (0..n).rev() {
            let ht = &tr.out.hidden[t];
            let dpre: Vec<f64> = (0..h)
                .map(|i| (dh_direct[t][i] + carry[i]) * (1.0 - ht[i] * ht[i]))
                .collect();
            let zero = vec![0.0; h];
            let prev = if t > 0 { &tr.out.hidden[t - 1] } else { &zero };
            let mut next_carry = vec![0.0; h];
            for r in 0..h {
                let d = dpre[r];
                g[self.b + r] += d;
                for (i, x) in seq[t].iter().enumerate() {
                    g[self.wx + r * n_in + i] += d * x;
                }
                for i in 0..h {
                    g[self.wh + r * h + i] += d * prev[i];
                    next_carry[i] += d * theta[self.wh + r * h + i];
                }
            }
            carry = next_carry;
        }
        Ok((err * err, g, tr.out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{max_relative_error, numeric_gradient, sgd_step};
    use rand::{Rng, SeedableRng};

    fn net() -> CreditNet {
        CreditNet::new(CreditArch {
            input: 3,
            hidden: 4,
            attention: 3,
        })
    }

    fn seq(rng: &mut SimRng, n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect()
    }

    #[test]
    fn gradient_matches_fd() {
        let n = net();
        for seed in 0..3 {
            let mut rng = SimRng::seed_from_u64(seed);
            let p = n.init(&mut rng);
            let s = seq(&mut rng, 6);
            let (_, g, _) = n.loss_grad(&p.values, &s, 0.7).unwrap();
            let f = |th: &[f64]| n.loss_grad(th, &s, 0.7).unwrap().0;
            assert!(max_relative_error(&g, &numeric_gradient(&f, &p.values, 1e-5)) < 1e-4);
        }
    }

    #[test]
    fn attention_is_a_distribution() {
        let n = net();
        let mut rng = SimRng::seed_from_u64(3);
        let p = n.init(&mut rng);
        let out = n.forward(&p.values, &seq(&mut rng, 10)).unwrap();
        assert!(out.eps.iter().all(|e| *e >= 0.0));
        assert!((out.eps.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn empty_sequence_errors() {
        let n = net();
        let p = ParamVector::zeros(n.layout().clone());
        assert!(matches!(n.forward(&p.values, &[]), Err(Error::EmptySequence)));
    }

    #[test]
    fn constant_input_is_near_uniform_at_zero_attention() {
        let n = net();
        let mut p = n.init(&mut SimRng::seed_from_u64(1));
        p.tensor_mut("att.v").unwrap().iter_mut().for_each(|v| *v = 0.0);
        let out = n.forward(&p.values, &vec![vec![0.2, 0.2, 0.2]; 8]).unwrap();
        assert!(out.eps.iter().all(|e| (e - 0.125).abs() < 1e-12));
    }

    #[test]
    fn constant_target_loss_decreases() {
        let n = net();
        let mut rng = SimRng::seed_from_u64(5);
        let mut p = n.init(&mut rng);
        let data: Vec<_> = (0..8).map(|_| seq(&mut rng, 5)).collect();
        let total = |th: &[f64]| -> f64 {
            data.iter().map(|s| n.loss_grad(th, s, 1.5).unwrap().0).sum()
        };
        let start = total(&p.values);
        for _ in 0..200 {
            for s in &data {
                let (_, g, _) = n.loss_grad(&p.values, s, 1.5).unwrap();
                let neg: Vec<f64> = g.iter().map(|v| -v).collect();
                sgd_step(&mut p.values, &neg, 0.02).unwrap();
            }
        }
        assert!(total(&p.values) < 0.05 * start);
    }

    #[test]
    fn attention_finds_the_causal_step() {
        // target equals the marker carried by exactly one step
        let n = CreditNet::new(CreditArch {
            input: 2,
            hidden: 8,
            attention: 8,
        });
        let mut rng = SimRng::seed_from_u64(21);
        let mut p = n.init(&mut rng);
        let len = 10;
        let make = |rng: &mut SimRng| {
            let mut s: Vec<Vec<f64>> = (0..len).map(|_| vec![0.0, rng.random_range(-0.5..0.5)]).collect();
            let k = rng.random_range(0..len);
            let y = rng.random_range(0.5..1.5);
            s[k][0] = y;
            (s, y, k)
        };
        for _ in 0..4000 {
            let (s, y, _) = make(&mut rng);
            let (_, g, _) = n.loss_grad(&p.values, &s, y).unwrap();
            let neg: Vec<f64> = g.iter().map(|v| -v).collect();
            sgd_step(&mut p.values, &neg, 0.02).unwrap();
        }
        let mut hits = 0;
        for _ in 0..100 {
            let (s, _, k) = make(&mut rng);
            let out = n.forward(&p.values, &s).unwrap();
            let arg = out
                .eps
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0;
            hits += (arg == k) as usize;
        }
        assert!(hits >= 80, "argmax hit the causal step {hits}/100 times");
    }
}
