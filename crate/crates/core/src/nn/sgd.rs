use crate::error::{Error, Result};

/// `theta += lr * grad`. Non-finite gradients leave `theta` untouched.
pub fn sgd_step(theta: &mut [f64], grad: &[f64], lr: f64) -> Result<()> {
    if theta.len() != grad.len() {
        return Err(Error::Dimension {
            expected: theta.len(),
            got: grad.len(),
        });
    }
    if grad.iter().any(|g| !g.is_finite()) {
        log::warn!("skipping update with non-finite gradient");
        return Err(Error::NonFinite("gradient".into()));
    }
    for (t, g) in theta.iter_mut().zip(grad) {
        *t += lr * g;
    }
    Ok(())
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Rescales `g` to at most `max_norm`; returns the original norm.
pub fn clip_norm(g: &mut [f64], max_norm: f64) -> f64 {
    let n = l2_norm(g);
    if max_norm > 0.0 && n > max_norm {
        let s = max_norm / n;
        g.iter_mut().for_each(|x| *x *= s);
    }
    n
}

pub fn axpy(dst: &mut [f64], a: f64, src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += a * s;
    }
}
