//! Fully connected SiLU network `psi(h, t)` with reverse-mode gradients,
//! forward-mode Jacobian-vector products and Adam.
//!
//! Batches are flat row-major buffers: `n` rows of `dim` values.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{bail, Result};

/// `c = a · b^T` (`a`: `m x k`, `b`: `n x k`, row-major), overwriting `c`.
fn gemm_abt(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    debug_assert!(a.len() >= m * k && b.len() >= n * k && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: the slices cover the strided ranges asserted above.
    unsafe {
        matrixmultiply::dgemm(m, k, n, 1.0, a.as_ptr(), k as isize, 1, b.as_ptr(), 1, k as isize, 0.0, c.as_mut_ptr(), n as isize, 1);
    }
}

/// `c = a · b` (`a`: `m x k`, `b`: `k x n`, row-major).
fn gemm_ab(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: as above.
    unsafe {
        matrixmultiply::dgemm(m, k, n, 1.0, a.as_ptr(), k as isize, 1, b.as_ptr(), n as isize, 1, 0.0, c.as_mut_ptr(), n as isize, 1);
    }
}

/// `c += a^T · b` (`a`: `m x p`, `b`: `m x q`, row-major; `c`: `p x q`).
fn gemm_atb_acc(m: usize, p: usize, q: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    debug_assert!(a.len() >= m * p && b.len() >= m * q && c.len() >= p * q);
    if p == 0 || q == 0 {
        return;
    }
    // SAFETY: as above.
    unsafe {
        matrixmultiply::dgemm(p, m, q, 1.0, a.as_ptr(), 1, p as isize, b.as_ptr(), q as isize, 1, 1.0, c.as_mut_ptr(), q as isize, 1);
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

#[inline]
fn silu_grad(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

/// MLP on `[h, t]` (input width `K + 1`) to `K` outputs, SiLU between
/// layers and a linear output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFieldNet {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Per-layer activations kept for the backward pass.
pub struct ForwardCache {
    n: usize,
    /// `acts[0]` is the input, `acts[l]` the output of layer `l`.
    acts: Vec<Vec<f64>>,
    /// Pre-activations of every layer.
    pre: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().unwrap()
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

impl VectorFieldNet {
    /// PyTorch-style uniform initialisation `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    /// With `zero_output` the last layer starts at zero, so `psi = 0`.
    pub fn new<R: Rng + ?Sized>(k: usize, hidden: &[usize], zero_output: bool, rng: &mut R) -> Result<Self> {
        if k == 0 || hidden.contains(&0) {
            bail!(InvalidInput, "network widths must be positive");
        }
        let mut sizes = vec![k + 1];
        sizes.extend_from_slice(hidden);
        sizes.push(k);
        let mut net = Self::zeros(sizes)?;
        let n_layers = net.n_layers();
        for l in 0..n_layers {
            if zero_output && l + 1 == n_layers {
                continue;
            }
            let bound = 1.0 / (net.sizes[l] as f64).sqrt();
            let (w, b) = net.layer_range(l);
            for p in &mut net.params[w.0..b.1] {
                *p = bound * (2.0 * rng.random::<f64>() - 1.0);
            }
        }
        Ok(net)
    }

    pub fn zeros(sizes: Vec<usize>) -> Result<Self> {
        if sizes.len() < 2 || sizes[0] < 2 || sizes.last() != Some(&(sizes[0] - 1)) {
            bail!(InvalidInput, "layer sizes must run from K + 1 inputs to K outputs");
        }
        let count = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        Ok(VectorFieldNet { sizes, params: vec![0.0; count] })
    }

    pub fn from_params(sizes: Vec<usize>, params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        if params.len() != net.params.len() {
            bail!(Dimension, "expected {} parameters, got {}", net.params.len(), params.len());
        }
        if params.iter().any(|p| !p.is_finite()) {
            bail!(InvalidInput, "network parameters must be finite");
        }
        net.params = params;
        Ok(net)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// `((w_start, w_end), (b_start, b_end))` of layer `l`; the weight block
    /// is `out x in` row-major.
    fn layer_range(&self, l: usize) -> ((usize, usize), (usize, usize)) {
        let mut off = 0;
        for w in self.sizes.windows(2).take(l) {
            off += w[0] * w[1] + w[1];
        }
        let (i, o) = (self.sizes[l], self.sizes[l + 1]);
        ((off, off + i * o), (off + i * o, off + i * o + o))
    }

    pub fn weights(&self, l: usize) -> &[f64] {
        let (w, _) = self.layer_range(l);
        &self.params[w.0..w.1]
    }

    pub fn weights_mut(&mut self, l: usize) -> &mut [f64] {
        let (w, _) = self.layer_range(l);
        &mut self.params[w.0..w.1]
    }

    pub fn bias_mut(&mut self, l: usize) -> &mut [f64] {
        let (_, b) = self.layer_range(l);
        &mut self.params[b.0..b.1]
    }

    /// Builds the `n x (K + 1)` input `[h, t]`.
    pub fn input(&self, h: &[f64], t: &[f64]) -> Vec<f64> {
        let k = self.dim();
        let n = t.len();
        debug_assert_eq!(h.len(), n * k);
        let mut x = vec![0.0; n * (k + 1)];
        for i in 0..n {
            x[i * (k + 1)..i * (k + 1) + k].copy_from_slice(&h[i * k..(i + 1) * k]);
            x[i * (k + 1) + k] = t[i];
        }
        x
    }

    fn affine(&self, l: usize, n: usize, a: &[f64], out: &mut [f64]) {
        let (wr, br) = self.layer_range(l);
        let (i, o) = (self.sizes[l], self.sizes[l + 1]);
        gemm_abt(n, i, o, a, &self.params[wr.0..wr.1], out);
        let b = &self.params[br.0..br.1];
        for row in out.chunks_exact_mut(o) {
            for (x, bb) in row.iter_mut().zip(b) {
                *x += bb;
            }
        }
    }

    pub fn forward_cached(&self, input: &[f64]) -> ForwardCache {
        let n = input.len() / self.sizes[0];
        let mut acts = Vec::with_capacity(self.sizes.len());
        let mut pre = Vec::with_capacity(self.n_layers());
        acts.push(input.to_vec());
        for l in 0..self.n_layers() {
            let mut z = vec![0.0; n * self.sizes[l + 1]];
            self.affine(l, n, &acts[l], &mut z);
            let a = if l + 1 < self.n_layers() { z.iter().map(|&x| silu(x)).collect() } else { z.clone() };
            pre.push(z);
            acts.push(a);
        }
        ForwardCache { n, acts, pre }
    }

    /// `psi(h, t)` for a batch.
    pub fn forward(&self, h: &[f64], t: &[f64]) -> Vec<f64> {
        let n = t.len();
        let mut a = self.input(h, t);
        for l in 0..self.n_layers() {
            let mut z = vec![0.0; n * self.sizes[l + 1]];
            self.affine(l, n, &a, &mut z);
            if l + 1 < self.n_layers() {
                for x in &mut z {
                    *x = silu(*x);
                }
            }
            a = z;
        }
        a
    }

    /// Gradient of `sum_i dout_i · psi_i` with respect to the parameters.
    pub fn backward(&self, cache: &ForwardCache, dout: &[f64]) -> Vec<f64> {
        let n = cache.n;
        let mut grad = vec![0.0; self.params.len()];
        let mut delta = dout.to_vec();
        for l in (0..self.n_layers()).rev() {
            let (i, o) = (self.sizes[l], self.sizes[l + 1]);
            let (wr, br) = self.layer_range(l);
            gemm_atb_acc(n, o, i, &delta, &cache.acts[l], &mut grad[wr.0..wr.1]);
            let gb = &mut grad[br.0..br.1];
            for row in delta.chunks_exact(o) {
                for (g, d) in gb.iter_mut().zip(row) {
                    *g += d;
                }
            }
            if l > 0 {
                let mut prev = vec![0.0; n * i];
                gemm_ab(n, o, i, &delta, &self.params[wr.0..wr.1], &mut prev);
                for (p, z) in prev.iter_mut().zip(&cache.pre[l - 1]) {
                    *p *= silu_grad(*z);
                }
                delta = prev;
            }
        }
        grad
    }

    /// Flow-matching loss `mean_i |psi(h_i, t_i) - target_i|^2` and its
    /// parameter gradient.
    pub fn loss_and_grad(&self, h: &[f64], t: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
        let n = t.len();
        let cache = self.forward_cached(&self.input(h, t));
        let out = cache.output();
        let mut dout = vec![0.0; out.len()];
        let mut loss = 0.0;
        for ((d, o), y) in dout.iter_mut().zip(out).zip(target) {
            let r = o - y;
            loss += r * r;
            *d = 2.0 * r / n as f64;
        }
        (loss / n as f64, self.backward(&cache, &dout))
    }

    /// Directional derivatives `J_h psi · v` for `m` state tangents per
    /// point. `tangents` is `(n * m) x K`, grouped by point. Returns the
    /// primal output (`n x K`) and the tangent outputs (`(n * m) x K`).
    pub fn jvp(&self, h: &[f64], t: &[f64], tangents: &[f64], m: usize) -> (Vec<f64>, Vec<f64>) {
        let n = t.len();
        let k = self.dim();
        let cache = self.forward_cached(&self.input(h, t));
        let rows = n * m;
        // tangent of the input carries zero in the time slot
        let mut dot = vec![0.0; rows * (k + 1)];
        for r in 0..rows {
            dot[r * (k + 1)..r * (k + 1) + k].copy_from_slice(&tangents[r * k..(r + 1) * k]);
        }
        for l in 0..self.n_layers() {
            let (i, o) = (self.sizes[l], self.sizes[l + 1]);
            let (wr, _) = self.layer_range(l);
            let mut z = vec![0.0; rows * o];
            gemm_abt(rows, i, o, &dot, &self.params[wr.0..wr.1], &mut z);
            if l + 1 < self.n_layers() {
                let pre = &cache.pre[l];
                for r in 0..rows {
                    let p = r / m;
                    for j in 0..o {
                        z[r * o + j] *= silu_grad(pre[p * o + j]);
                    }
                }
            }
            dot = z;
        }
        (cache.output().to_vec(), dot)
    }

    /// Exact divergence `sum_k d psi_k / d h_k` through `K` tangents per
    /// point.
    pub fn divergence_exact(&self, h: &[f64], t: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = t.len();
        let k = self.dim();
        let mut tangents = vec![0.0; n * k * k];
        for p in 0..n {
            for j in 0..k {
                tangents[(p * k + j) * k + j] = 1.0;
            }
        }
        let (out, dot) = self.jvp(h, t, &tangents, k);
        let div = (0..n).map(|p| (0..k).map(|j| dot[(p * k + j) * k + j]).sum()).collect();
        (out, div)
    }

    /// Hutchinson estimate `mean_probes eps^T J eps` with Rademacher probes.
    pub fn divergence_hutchinson<R: Rng + ?Sized>(&self, h: &[f64], t: &[f64], probes: usize, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        let n = t.len();
        let k = self.dim();
        let eps: Vec<f64> = (0..n * probes * k).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
        let (out, dot) = self.jvp(h, t, &eps, probes);
        let div = (0..n)
            .map(|p| {
                let mut acc = 0.0;
                for q in 0..probes {
                    let r = p * probes + q;
                    for j in 0..k {
                        acc += eps[r * k + j] * dot[r * k + j];
                    }
                }
                acc / probes as f64
            })
            .collect();
        (out, div)
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n_params: usize, lr: f64) -> Self {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; n_params], v: vec![0.0; n_params], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}
