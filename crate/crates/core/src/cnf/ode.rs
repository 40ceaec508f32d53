//! Straight-line interpolants, the flow-matching step and the fixed-step
//! midpoint integrator.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use rand::RngCore;

#[allow(unused_imports)]
use num_traits::Float;

use super::manifold::ManifoldSpec;
use super::net::{Adam, VectorFieldNet};
use crate::error::{bail, Error, Result};

/// How the Jacobian trace of the field is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivergenceMode {
    Exact,
    Hutchinson(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `t: 0 -> 1`, base to data.
    Forward,
    /// `t: 1 -> 0`, data to base.
    Reverse,
}

/// `h^t = (1 - t) h0 + t h1` and the target velocity `h1 - h0` for a batch.
/// Exact at both ends.
pub fn geodesic_interpolant(h0: &[f64], h1: &[f64], t: &[f64], k: usize) -> (Vec<f64>, Vec<f64>) {
    let mut ht = vec![0.0; h0.len()];
    let mut target = vec![0.0; h0.len()];
    for (i, &ti) in t.iter().enumerate() {
        for j in i * k..(i + 1) * k {
            ht[j] = if ti == 1.0 { h1[j] } else { (1.0 - ti) * h0[j] + ti * h1[j] };
            target[j] = h1[j] - h0[j];
        }
    }
    (ht, target)
}

/// One flow-matching update on paired base and data draws. Returns the loss
/// before the update.
pub fn rcfm_step(net: &mut VectorFieldNet, opt: &mut Adam, h0: &[f64], h1: &[f64], t: &[f64]) -> Result<f64> {
    if t.is_empty() {
        bail!(InvalidInput, "empty training batch");
    }
    let k = net.dim();
    if h0.len() != t.len() * k || h1.len() != t.len() * k {
        bail!(Dimension, "batch of {} times does not match the state buffers", t.len());
    }
    let (ht, target) = geodesic_interpolant(h0, h1, t, k);
    let (loss, grad) = net.loss_and_grad(&ht, &t, &target);
    if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        return Err(Error::Numerical(format!("non-finite flow-matching loss {loss} (max |grad| {gmax})")));
    }
    opt.step(net.params_mut(), &grad);
    Ok(loss)
}

/// Number of midpoint steps for a nominal step size; the actual step divides
/// the unit interval evenly.
pub fn n_steps(step: f64) -> Result<usize> {
    if !(step > 0.0 && step <= 1.0) {
        bail!(InvalidInput, "integrator step must lie in (0, 1], got {step}");
    }
    Ok((1.0 / step - 1e-9).ceil().max(1.0) as usize)
}

fn check_finite(h: &[f64]) -> Result<()> {
    if h.iter().any(|x| !x.is_finite()) {
        bail!(Numerical, "flow state became non-finite");
    }
    Ok(())
}

/// Midpoint integration of `dh/dt = psi(h, t)` over `[0, 1]`, projecting
/// after each half and full step.
pub fn integrate(net: &VectorFieldNet, h0: &[f64], manifold: &ManifoldSpec, step: f64, direction: Direction) -> Result<Vec<f64>> {
    integrate_inner(net, h0, manifold, step, direction, None).map(|(h, _)| h)
}

/// As [`integrate`], also returning `int_0^1 div psi(h_t, t) dt` along the
/// path for each point, by midpoint quadrature.
pub fn integrate_with_divergence<R: RngCore>(
    net: &VectorFieldNet,
    h0: &[f64],
    manifold: &ManifoldSpec,
    step: f64,
    direction: Direction,
    mode: DivergenceMode,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>)> {
    integrate_inner(net, h0, manifold, step, direction, Some((mode, rng as &mut dyn RngCore)))
}

fn integrate_inner(
    net: &VectorFieldNet,
    h0: &[f64],
    manifold: &ManifoldSpec,
    step: f64,
    direction: Direction,
    mut div: Option<(DivergenceMode, &mut dyn RngCore)>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let k = net.dim();
    if h0.len() % k != 0 {
        bail!(Dimension, "state buffer is not a multiple of K = {k}");
    }
    let n = h0.len() / k;
    let steps = n_steps(step)?;
    let dt = 1.0 / steps as f64;
    let (t_start, sign) = match direction {
        Direction::Forward => (0.0, 1.0),
        Direction::Reverse => (1.0, -1.0),
    };
    let mut h = h0.to_vec();
    check_finite(&h)?;
    let mut acc = vec![0.0; n];
    let mut mid = vec![0.0; h.len()];
    for s in 0..steps {
        let t0 = t_start + sign * s as f64 * dt;
        let tm = t0 + sign * 0.5 * dt;
        let k1 = net.forward(&h, &vec![t0; n]);
        for j in 0..h.len() {
            mid[j] = h[j] + sign * 0.5 * dt * k1[j];
        }
        manifold.project_batch(&mut mid, k)?;
        let tv = vec![tm; n];
        let k2 = match div.as_mut() {
            None => net.forward(&mid, &tv),
            Some((mode, rng)) => {
                let (v, d) = match *mode {
                    DivergenceMode::Exact => net.divergence_exact(&mid, &tv),
                    DivergenceMode::Hutchinson(p) => net.divergence_hutchinson(&mid, &tv, p.max(1), *rng),
                };
                for (a, di) in acc.iter_mut().zip(&d) {
                    *a += dt * di;
                }
                v
            }
        };
        for j in 0..h.len() {
            h[j] += sign * dt * k2[j];
        }
        manifold.project_batch(&mut h, k)?;
        check_finite(&h)?;
    }
    Ok((h, acc))
}
