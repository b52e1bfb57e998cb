use super::Layout;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation's output.
    fn slope(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

/// `y = W x + b` with `W` stored row-major as `[n_out, n_in]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dense {
    pub w: usize,
    pub b: usize,
    pub n_in: usize,
    pub n_out: usize,
}

impl Dense {
    pub fn register(layout: &mut Layout, name: &str, n_in: usize, n_out: usize) -> Self {
        let w = layout.push(format!("{name}.w"), &[n_out, n_in]);
        let b = layout.push(format!("{name}.b"), &[n_out]);
        Self { w, b, n_in, n_out }
    }

    pub fn forward(&self, theta: &[f64], x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n_in);
        (0..self.n_out)
            .map(|o| {
                let row = &theta[self.w + o * self.n_in..self.w + (o + 1) * self.n_in];
                theta[self.b + o] + row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>()
            })
            .collect()
    }

    /// Accumulates parameter gradients into `g`; returns `dL/dx` if asked.
    pub fn backward(
        &self,
        theta: &[f64],
        x: &[f64],
        dy: &[f64],
        g: &mut [f64],
        want_dx: bool,
    ) -> Option<Vec<f64>> {
        let mut dx = want_dx.then(|| vec![0.0; self.n_in]);
        for (o, &d) in dy.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            g[self.b + o] += d;
            let base = self.w + o * self.n_in;
            for (i, &xi) in x.iter().enumerate() {
                g[base + i] += d * xi;
            }
            if let Some(dx) = dx.as_mut() {
                for (i, dxi) in dx.iter_mut().enumerate() {
                    *dxi += d * theta[base + i];
                }
            }
        }
        dx
    }
}

/// Stack of dense layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<(Dense, Activation)>,
}

/// Layer inputs and post-activation outputs from a forward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    pub inputs: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
}

impl MlpCache {
    pub fn output(&self) -> &[f64] {
        self.outputs.last().map(|v| v.as_slice()).unwrap_or(&[])
    }
}

impl Mlp {
    /// `sizes = [input, hidden.., output]`; hidden layers use `hidden`, the last
    /// layer uses `out`.
    pub fn register(
        layout: &mut Layout,
        prefix: &str,
        sizes: &[usize],
        hidden: Activation,
        out: Activation,
    ) -> Self {
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let d = Dense::register(layout, &format!("{prefix}.{i}"), sizes[i], sizes[i + 1]);
                (d, if i + 1 == n { out } else { hidden })
            })
            .collect();
        Self { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.0.n_in)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.0.n_out)
    }

    pub fn forward(&self, theta: &[f64], x: &[f64]) -> MlpCache {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut outputs = Vec::with_capacity(self.layers.len());
        let mut cur = x.to_vec();
        for (d, act) in &self.layers {
            let mut y = d.forward(theta, &cur);
            y.iter_mut().for_each(|v| *v = act.apply(*v));
            inputs.push(cur);
            cur = y.clone();
            outputs.push(y);
        }
        MlpCache { inputs, outputs }
    }

    pub fn backward(
        &self,
        theta: &[f64],
        cache: &MlpCache,
        dout: &[f64],
        g: &mut [f64],
        want_dx: bool,
    ) -> Option<Vec<f64>> {
        let mut d = dout.to_vec();
        for (i, (layer, act)) in self.layers.iter().enumerate().rev() {
            for (dv, y) in d.iter_mut().zip(&cache.outputs[i]) {
                *dv *= act.slope(*y);
            }
            let need = want_dx || i > 0;
            match layer.backward(theta, &cache.inputs[i], &d, g, need) {
                Some(dx) => d = dx,
                None => return None,
            }
        }
        want_dx.then_some(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{max_relative_error, numeric_gradient, ModuleTag, ParamVector};
    use crate::simcore::SimRng;
    use rand::SeedableRng;

    #[test]
    fn hand_forward() {
        let mut l = Layout::new(ModuleTag::Credit);
        let d = Dense::register(&mut l, "d", 2, 1);
        let theta = [0.5, -1.0, 0.25];
        assert_eq!(d.forward(&theta, &[2.0, 1.0]), vec![0.25]);
    }

    #[test]
    fn mlp_gradient_matches_finite_differences() {
        let mut l = Layout::new(ModuleTag::Credit);
        let m = Mlp::register(&mut l, "m", &[3, 5, 2], Activation::Tanh, Activation::Identity);
        let p = ParamVector::glorot(l, &mut SimRng::seed_from_u64(4));
        let x = [0.3, -0.7, 1.1];
        let loss = |th: &[f64]| {
            let c = m.forward(th, &x);
            c.output()[0] * 0.7 - c.output()[1] * c.output()[1]
        };
        let c = m.forward(&p.values, &x);
        let out = c.output();
        let mut g = vec![0.0; p.len()];
        m.backward(&p.values, &c, &[0.7, -2.0 * out[1]], &mut g, false);
        let n = numeric_gradient(&loss, &p.values, 1e-5);
        assert!(max_relative_error(&g, &n) < 1e-6);
    }
}
