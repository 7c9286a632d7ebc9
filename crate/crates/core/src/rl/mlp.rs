//! Dense tanh multilayer perceptron over a flat parameter vector.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;

/// tanh through a single exp; absolute error stays near one ulp of 1.
#[inline]
fn tanh(x: f64) -> f64 {
    let a = x.abs();
    if a > 20.0 {
        return 1.0f64.copysign(x);
    }
    let e = libm::exp(-2.0 * a);
    ((1.0 - e) / (1.0 + e)).copysign(x)
}

/// `c = a * b + beta * c` for row-major `a` (m×k), `b` (k×n), `c` (m×n).
/// `ta`/`tb` read the stored matrix transposed.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(m: usize, k: usize, n: usize, a: &[f64], ta: bool, b: &[f64], tb: bool, beta: f64, c: &mut [f64]) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    let (rsa, csa) = if ta { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if tb { (1, k as isize) } else { (n as isize, 1) };
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: the asserted lengths cover every element addressed by the strides.
    unsafe {
        matrixmultiply::dgemm(m, k, n, 1.0, a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, beta, c.as_mut_ptr(), n as isize, 1);
    }
}

/// Layer `l` maps `sizes[l]` inputs to `sizes[l + 1]` outputs; hidden layers
/// apply tanh, the last layer is linear. Weights are stored input-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub params: Vec<f64>,
}

/// Activations of one batched forward pass.
#[derive(Debug, Clone, Default)]
pub struct Cache {
    batch: usize,
    acts: Vec<Vec<f64>>,
}

impl Cache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map(|v| v.as_slice()).unwrap_or(&[])
    }
}

impl Mlp {
    pub fn n_params(sizes: &[usize]) -> usize {
        sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2 && sizes.iter().all(|&s| s > 0));
        Self { sizes: sizes.to_vec(), params: vec![0.0; Self::n_params(sizes)] }
    }

    /// Uniform fan-in initialisation; the last layer is scaled by `out_scale`.
    pub fn init(sizes: &[usize], out_scale: f64, rng: &mut Rng) -> Self {
        let mut m = Self::zeros(sizes);
        let n_layers = sizes.len() - 1;
        let mut off = 0;
        for l in 0..n_layers {
            let (i, o) = (sizes[l], sizes[l + 1]);
            let bound = libm::sqrt(3.0 / i as f64) * if l + 1 == n_layers { out_scale } else { 1.0 };
            for w in &mut m.params[off..off + i * o] {
                *w = rng.gen_range(-bound..=bound);
            }
            off += i * o + o;
        }
        m
    }

    pub fn input_len(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_len(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    fn layer(&self, l: usize) -> (usize, usize, usize) {
        let off: usize = self.sizes[..l + 1].windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        (off, self.sizes[l], self.sizes[l + 1])
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    /// Forward pass over `batch` row-major inputs.
    pub fn forward(&self, x: &[f64], batch: usize) -> Cache {
        assert_eq!(x.len(), batch * self.input_len());
        let n_layers = self.sizes.len() - 1;
        let mut acts = Vec::with_capacity(n_layers + 1);
        acts.push(x.to_vec());
        for l in 0..n_layers {
            let (off, i, o) = self.layer(l);
            let w = &self.params[off..off + i * o];
            let b = &self.params[off + i * o..off + i * o + o];
            let mut y = vec![0.0; batch * o];
            for row in y.chunks_exact_mut(o) {
                row.copy_from_slice(b);
            }
            gemm(batch, i, o, &acts[l], false, w, false, 1.0, &mut y);
            if l + 1 < n_layers {
                for v in &mut y {
                    *v = tanh(*v);
                }
            }
            acts.push(y);
        }
        Cache { batch, acts }
    }

    /// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(output).
    pub fn backward(&self, cache: &Cache, d_out: &[f64], grad: &mut [f64]) {
        let n_layers = self.sizes.len() - 1;
        let batch = cache.batch;
        assert_eq!(d_out.len(), batch * self.output_len());
        assert_eq!(grad.len(), self.params.len());
        let mut delta = d_out.to_vec();
        for l in (0..n_layers).rev() {
            let (off, i, o) = self.layer(l);
            if l + 1 < n_layers {
                for (d, y) in delta.iter_mut().zip(&cache.acts[l + 1]) {
                    *d *= 1.0 - y * y;
                }
            }
            let (gw, rest) = grad[off..].split_at_mut(i * o);
            gemm(i, batch, o, &cache.acts[l], true, &delta, false, 1.0, gw);
            let gb = &mut rest[..o];
            for row in delta.chunks_exact(o) {
                for (g, d) in gb.iter_mut().zip(row) {
                    *g += d;
                }
            }
            if l > 0 {
                let w = &self.params[off..off + i * o];
                let mut prev = vec![0.0; batch * i];
                gemm(batch, o, i, &delta, false, w, true, 0.0, &mut prev);
                delta = prev;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng;

    fn naive(m: &Mlp, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        let n_layers = m.sizes.len() - 1;
        for l in 0..n_layers {
            let (off, i, o) = m.layer(l);
            let mut y = vec![0.0; o];
            for (j, yj) in y.iter_mut().enumerate() {
                *yj = m.params[off + i * o + j];
                for (k, ak) in a.iter().enumerate() {
                    *yj += ak * m.params[off + k * o + j];
                }
                if l + 1 < n_layers {
                    *yj = yj.tanh();
                }
            }
            a = y;
        }
        a
    }

    #[test]
    fn batched_forward_matches_naive() {
        let mut r = rng(3);
        let m = Mlp::init(&[6, 7, 5, 3], 1.0, &mut r);
        let x: Vec<f64> = (0..4 * 6).map(|_| r.gen_range(-1.0..1.0)).collect();
        let out = m.forward(&x, 4);
        for b in 0..4 {
            let want = naive(&m, &x[b * 6..b * 6 + 6]);
            for (g, w) in out.output()[b * 3..b * 3 + 3].iter().zip(&want) {
                assert!((g - w).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut r = rng(5);
        let mut m = Mlp::init(&[3, 4, 2], 1.0, &mut r);
        let x: Vec<f64> = (0..2 * 3).map(|_| r.gen_range(-1.0..1.0)).collect();
        // loss = sum of outputs weighted by fixed coefficients
        let coef = [0.3, -1.1, 0.7, 0.2];
        let loss = |m: &Mlp| m.forward(&x, 2).output().iter().zip(&coef).map(|(a, b)| a * b).sum::<f64>();
        let mut grad = vec![0.0; m.params.len()];
        m.backward(&m.forward(&x, 2), &coef, &mut grad);
        for i in 0..m.params.len() {
            let p = m.params[i];
            m.params[i] = p + 1e-6;
            let up = loss(&m);
            m.params[i] = p - 1e-6;
            let down = loss(&m);
            m.params[i] = p;
            let fd = (up - down) / 2e-6;
            assert!((fd - grad[i]).abs() < 1e-7, "param {i}: {fd} vs {}", grad[i]);
        }
    }
}
