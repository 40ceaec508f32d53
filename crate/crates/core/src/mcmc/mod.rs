//! Multi-proposal hit-and-run sampling for densities supported on a
//! polytope.
//!
//! Each step draws one direction, places `M` proposals on the chord through
//! the current point and picks the next state among the `M + 1` candidates
//! with Peskun or Barker weights.

mod diagnostics;

pub use diagnostics::{ess_percent, split_rhat, ChainDiagnostics};

use alloc::vec::Vec;
use rand::Rng;
use rand_distr::OpenClosed01;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{bail, Error, Result};
use crate::linalg::{log_sum_exp, Matrix, Vector};
use crate::polytope::HPolytope;
use crate::rng::{sample_ball, sample_sphere, stream_rng, StreamRng};
use crate::rounding::chebyshev_center;
use crate::special::{norm_cdf, norm_ppf, norm_sf};

/// Rows with `|a_i·s|` below this never bound the chord.
pub const PARALLEL_TOL: f64 = 1e-14;

/// `(alpha_min <= 0, alpha_max >= 0)` such that `v + alpha s` is feasible
/// exactly for `alpha` in between.
pub fn chord_extremes(v: &Vector, s: &Vector, h: &HPolytope) -> Result<(f64, f64)> {
    let ds = h.a() * s;
    let dv = h.slack(v);
    if dv.iter().any(|&x| !(x > 0.0)) {
        bail!(OutOfDomain, "chord origin is not strictly feasible");
    }
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for (d, sv) in dv.iter().zip(ds.iter()) {
        if *sv > PARALLEL_TOL {
            hi = hi.min(d / sv);
        } else if *sv < -PARALLEL_TOL {
            lo = lo.max(d / sv);
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        bail!(Unbounded, "chord is unbounded");
    }
    Ok((lo, hi))
}

/// Proposal law for the step length along the chord.
#[derive(Debug, Clone, PartialEq)]
pub enum ProposalDist {
    Uniform,
    /// Normal centred on the current point, truncated to the chord, with
    /// variance `s^T Sigma s` along direction `s`.
    TruncatedNormal { sigma: Matrix },
}

impl ProposalDist {
    pub fn truncated_normal(sigma: Matrix) -> Result<Self> {
        if !sigma.is_square() || (&sigma - sigma.transpose()).amax() > 1e-12 * sigma.amax().max(1.0) {
            bail!(InvalidInput, "proposal covariance must be square and symmetric");
        }
        if sigma.clone().cholesky().is_none() {
            bail!(InvalidInput, "proposal covariance must be positive definite");
        }
        Ok(ProposalDist::TruncatedNormal { sigma })
    }

    /// Proposal standard deviation along `s` (`None` for uniform).
    pub fn chord_sd(&self, s: &Vector) -> Option<f64> {
        match self {
            ProposalDist::Uniform => None,
            ProposalDist::TruncatedNormal { sigma } => Some((s.transpose() * sigma * s)[(0, 0)].sqrt()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Peskun,
    Barker,
}

/// Draws `m` step lengths in `[alpha_min, alpha_max]`; the truncated normal
/// uses the inverse CDF on whichever tail keeps precision.
pub fn propose<R: Rng + ?Sized>(alpha_min: f64, alpha_max: f64, m: usize, sd: Option<f64>, rng: &mut R) -> Result<Vec<f64>> {
    if !(alpha_max - alpha_min >= 1e-14) {
        bail!(InvalidInput, "degenerate chord of width {}", alpha_max - alpha_min);
    }
    let mut out = Vec::with_capacity(m);
    for _ in 0..m {
        let u: f64 = rng.sample(OpenClosed01);
        let u = 1.0 - u;
        let alpha = match sd {
            None => alpha_min + u * (alpha_max - alpha_min),
            Some(sd) => {
                if !(sd > 0.0) {
                    bail!(InvalidInput, "proposal standard deviation must be positive");
                }
                sd * truncated_std_normal_ppf(alpha_min / sd, alpha_max / sd, u)
            }
        };
        out.push(alpha.clamp(alpha_min, alpha_max));
    }
    Ok(out)
}

/// Quantile `u` of the standard normal truncated to `[a, b]`.
fn truncated_std_normal_ppf(a: f64, b: f64, u: f64) -> f64 {
    if a > 0.0 {
        let (qa, qb) = (norm_sf(a), norm_sf(b));
        -norm_ppf(qa - u * (qa - qb))
    } else {
        let (pa, pb) = (norm_cdf(a), norm_cdf(b));
        norm_ppf(pa + u * (pb - pa))
    }
}

/// `ln(Phi(b) - Phi(a))` for `a < b`.
fn log_normal_mass(a: f64, b: f64) -> f64 {
    if a > 0.0 {
        (norm_sf(a) - norm_sf(b)).ln()
    } else {
        (norm_cdf(b) - norm_cdf(a)).ln()
    }
}

/// `ln q(others | i)` for each candidate on the chord, up to a shared
/// constant. `alphas[0]` is the current point (`0`).
///
/// For the uniform proposal every candidate sees the same chord length, so
/// all terms are equal and dropped.
pub fn proposal_log_terms(alphas: &[f64], alpha_min: f64, alpha_max: f64, sd: Option<f64>) -> Vec<f64> {
    match sd {
        None => alloc::vec![0.0; alphas.len()],
        Some(sd) => {
            let m = (alphas.len() - 1) as f64;
            alphas
                .iter()
                .enumerate()
                .map(|(i, &ai)| {
                    let quad: f64 = alphas
                        .iter()
                        .enumerate()
                        .filter(|&(j, _)| j != i)
                        .map(|(_, &aj)| {
                            let z = (aj - ai) / sd;
                            -0.5 * z * z
                        })
                        .sum();
                    quad - m * log_normal_mass((alpha_min - ai) / sd, (alpha_max - ai) / sd)
                })
                .collect()
        }
    }
}

/// Transition weights over the `M + 1` candidates (index 0 is the current
/// state) from `ln pi` and the proposal terms.
pub fn transition_weights(log_pi: &[f64], log_q: &[f64], kernel: KernelKind) -> Result<Vec<f64>> {
    if log_pi.len() != log_q.len() || log_pi.len() < 2 {
        bail!(Dimension, "need matching weight inputs for at least one proposal");
    }
    if log_pi.iter().any(|x| x.is_nan() || *x == f64::INFINITY) {
        bail!(Numerical, "target log-density returned NaN or +inf");
    }
    let l: Vec<f64> = log_pi.iter().zip(log_q).map(|(p, q)| p + q).collect();
    match kernel {
        KernelKind::Peskun => {
            if !l[0].is_finite() {
                bail!(Numerical, "current state has zero target density");
            }
            let m = (l.len() - 1) as f64;
            let mut w = alloc::vec![0.0; l.len()];
            let mut total = 0.0;
            for i in 1..l.len() {
                w[i] = (l[i] - l[0]).min(0.0).exp() / m;
                total += w[i];
            }
            let w0 = 1.0 - total;
            assert!(w0 > -1e-12, "Peskun weights exceed one");
            w[0] = w0.max(0.0);
            Ok(w)
        }
        KernelKind::Barker => {
            let lse = log_sum_exp(&l);
            if !lse.is_finite() {
                bail!(Numerical, "all candidates have zero target density");
            }
            Ok(l.iter().map(|x| (x - lse).exp()).collect())
        }
    }
}

/// Categorical draw with the proposals first and the current state last,
/// so a single proposal is accepted iff `u < w_1`.
pub fn select_candidate(weights: &[f64], u: f64) -> usize {
    let mut cum = 0.0;
    for (i, w) in weights.iter().enumerate().skip(1) {
        cum += w;
        if u < cum {
            return i;
        }
    }
    0
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub n_samples: usize,
    /// Proposals per step (excluding the current state).
    pub proposals: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub proposal: ProposalDist,
    pub kernel: KernelKind,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig { n_samples: 1000, proposals: 1, burn_in: 1000, thin: 10, proposal: ProposalDist::Uniform, kernel: KernelKind::Peskun }
    }
}

impl SamplerConfig {
    fn validate(&self, k: usize) -> Result<()> {
        if self.proposals == 0 || self.thin == 0 {
            bail!(InvalidInput, "proposals and thinning must be at least 1");
        }
        if let ProposalDist::TruncatedNormal { sigma } = &self.proposal {
            if sigma.nrows() != k {
                bail!(Dimension, "proposal covariance is {}x{}, polytope dimension {k}", sigma.nrows(), sigma.ncols());
            }
        }
        Ok(())
    }
}

/// One chain: current point, its log-density and the RNG stream.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub current: Vector,
    pub log_pi: f64,
    pub seed: u64,
    pub stream: u64,
    pub step_index: u64,
    rng: StreamRng,
}

impl ChainState {
    pub fn new<F>(start: Vector, target: &F, seed: u64, stream: u64) -> Result<Self>
    where
        F: Fn(&Vector) -> f64,
    {
        let log_pi = target(&start);
        if !log_pi.is_finite() {
            bail!(Numerical, "target density is not finite at the starting point");
        }
        Ok(ChainState { current: start, log_pi, seed, stream, step_index: 0, rng: stream_rng(seed, stream) })
    }

    /// Starts from a uniform draw in the ball `B(center, radius)` taken from
    /// the chain's own stream.
    pub fn from_ball<F>(center: &Vector, radius: f64, target: &F, seed: u64, stream: u64) -> Result<Self>
    where
        F: Fn(&Vector) -> f64,
    {
        let mut rng = stream_rng(seed, stream);
        let start = center + sample_ball(center.len(), radius * (1.0 - 1e-9), &mut rng);
        let mut state = Self::new(start, target, seed, stream)?;
        state.rng = rng;
        Ok(state)
    }

    pub fn rng(&mut self) -> &mut StreamRng {
        &mut self.rng
    }

    /// One multi-proposal hit-and-run step; returns the selected index
    /// (`0` = stayed).
    pub fn step<F>(&mut self, h: &HPolytope, target: &F, cfg: &SamplerConfig) -> Result<usize>
    where
        F: Fn(&Vector) -> f64,
    {
        let k = self.current.len();
        let s = sample_sphere(k, &mut self.rng);
        let (lo, hi) = chord_extremes(&self.current, &s, h)?;
        let sd = cfg.proposal.chord_sd(&s);
        let props = propose(lo, hi, cfg.proposals, sd, &mut self.rng)?;
        let mut alphas = Vec::with_capacity(props.len() + 1);
        alphas.push(0.0);
        alphas.extend_from_slice(&props);
        let mut log_pi = Vec::with_capacity(alphas.len());
        log_pi.push(self.log_pi);
        let candidates: Vec<Vector> = props.iter().map(|&a| &self.current + &s * a).collect();
        for c in &candidates {
            log_pi.push(target(c));
        }
        let log_q = proposal_log_terms(&alphas, lo, hi, sd);
        let w = transition_weights(&log_pi, &log_q, cfg.kernel)?;
        let u: f64 = self.rng.random();
        let pick = select_candidate(&w, u);
        if pick > 0 {
            self.current = candidates[pick - 1].clone();
            self.log_pi = log_pi[pick];
        }
        self.step_index += 1;
        Ok(pick)
    }

    /// Classical Metropolis-Hastings hit-and-run step with a uniform step
    /// length, drawing from the stream in the same order as [`Self::step`].
    pub fn metropolis_step<F>(&mut self, h: &HPolytope, target: &F) -> Result<bool>
    where
        F: Fn(&Vector) -> f64,
    {
        let k = self.current.len();
        let s = sample_sphere(k, &mut self.rng);
        let (lo, hi) = chord_extremes(&self.current, &s, h)?;
        let alpha = propose(lo, hi, 1, None, &mut self.rng)?[0];
        let cand = &self.current + &s * alpha;
        let lp = target(&cand);
        let accept_prob = (lp - self.log_pi).exp().min(1.0);
        let u: f64 = self.rng.random();
        self.step_index += 1;
        if u < accept_prob {
            self.current = cand;
            self.log_pi = lp;
            return Ok(true);
        }
        Ok(false)
    }
}

/// Retained draws of one chain (`n_samples x K`) and its move rate.
#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub samples: Matrix,
    pub move_rate: f64,
}

/// Runs a chain from a start drawn in `B(center, radius)`: `burn_in` steps,
/// then one retained state every `thin` steps.
pub fn run_chain<F>(h: &HPolytope, target: &F, cfg: &SamplerConfig, center: &Vector, radius: f64, seed: u64, stream: u64) -> Result<ChainOutput>
where
    F: Fn(&Vector) -> f64,
{
    let k = h.dim();
    cfg.validate(k)?;
    let mut state = ChainState::from_ball(center, radius, target, seed, stream)?;
    let mut moves = 0usize;
    for _ in 0..cfg.burn_in {
        moves += usize::from(state.step(h, target, cfg)? > 0);
    }
    let mut samples = Matrix::zeros(cfg.n_samples, k);
    for i in 0..cfg.n_samples {
        for _ in 0..cfg.thin {
            moves += usize::from(state.step(h, target, cfg)? > 0);
        }
        samples.row_mut(i).copy_from(&state.current.transpose());
    }
    let total = cfg.burn_in + cfg.n_samples * cfg.thin;
    Ok(ChainOutput { samples, move_rate: moves as f64 / total.max(1) as f64 })
}

/// Chebyshev ball used to initialise chains.
pub fn init_ball(h: &HPolytope) -> Result<(Vector, f64)> {
    let (c, r) = chebyshev_center(h)?;
    if !(r > 0.0) {
        return Err(Error::InvalidInput("polytope has an empty interior".into()));
    }
    Ok((c, r))
}

/// All chains, one after another. Chain `i` uses stream `i` of `seed`, so the
/// result equals any parallel schedule over the same streams.
pub fn run_chains<F>(h: &HPolytope, target: &F, cfg: &SamplerConfig, n_chains: usize, seed: u64) -> Result<(Vec<ChainOutput>, ChainDiagnostics)>
where
    F: Fn(&Vector) -> f64,
{
    let (c, r) = init_ball(h)?;
    let chains = (0..n_chains)
        .map(|i| run_chain(h, target, cfg, &c, r, seed, i as u64))
        .collect::<Result<Vec<_>>>()?;
    let samples: Vec<Matrix> = chains.iter().map(|c| c.samples.clone()).collect();
    let diag = ChainDiagnostics::compute(&samples)?;
    Ok((chains, diag))
}

/// Stacks chains row-wise into one sample matrix.
pub fn stack_chains(chains: &[ChainOutput]) -> Matrix {
    let k = chains.first().map_or(0, |c| c.samples.ncols());
    let n: usize = chains.iter().map(|c| c.samples.nrows()).sum();
    let mut out = Matrix::zeros(n, k);
    let mut row = 0;
    for c in chains {
        out.view_mut((row, 0), (c.samples.nrows(), k)).copy_from(&c.samples);
        row += c.samples.nrows();
    }
    out
}
