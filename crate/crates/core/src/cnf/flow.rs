//! The three flow families on a polytope and their training loop.
//!
//! * Euclidean: the flow acts on the polytope coordinates directly with a
//!   uniform base on the polytope; points outside get density zero.
//! * Ball: the flow acts on the unit ball with a uniform base and is pushed
//!   to the polytope by the inverse ball map.
//! * Aitchison: the flow acts on standardized ilr coordinates with a
//!   standard normal base.

use alloc::vec;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::{Rng, RngCore};

#[allow(unused_imports)]
use num_traits::Float;

use super::manifold::ManifoldSpec;
use super::net::{Adam, VectorFieldNet};
use super::ode::{integrate_with_divergence, rcfm_step, Direction, DivergenceMode};
use crate::ball::{from_ball, logdet_from_ball, to_ball, BallMapConfig};
use crate::error::{bail, Result};
use crate::linalg::{ln_ball_volume, Matrix, Vector};
use crate::mcmc::{init_ball, run_chain, SamplerConfig};
use crate::polytope::HPolytope;
use crate::rng::{named_rng, sample_ball, standard_normal};
use crate::simplex_coords::AitchisonMap;
use crate::special::norm_logpdf;

/// Rows per integration chunk; bounds the memory of exact divergence.
const CHUNK: usize = 256;
/// Ball samples are pulled this far inside the sphere before `from_ball`.
const BALL_EDGE: f64 = 1e-12;

#[derive(Debug, Clone)]
pub enum FlowKind {
    Euclidean { h: HPolytope, log_volume: f64 },
    Ball { h: HPolytope, cfg: BallMapConfig },
    Aitchison { map: AitchisonMap },
}

impl FlowKind {
    pub fn name(&self) -> &'static str {
        match self {
            FlowKind::Euclidean { .. } => "euclid",
            FlowKind::Ball { .. } => "ball",
            FlowKind::Aitchison { .. } => "ait",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            FlowKind::Euclidean { h, .. } | FlowKind::Ball { h, .. } => h.dim(),
            FlowKind::Aitchison { map } => map.projection.dim(),
        }
    }

    fn default_manifold(&self) -> ManifoldSpec {
        match self {
            FlowKind::Euclidean { h, .. } => ManifoldSpec::EuclideanPolytope { h: h.clone(), project: false },
            FlowKind::Ball { .. } => ManifoldSpec::UnitBall,
            FlowKind::Aitchison { .. } => ManifoldSpec::IlrSpace,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub step_size: f64,
    pub divergence: DivergenceMode,
    pub seed: u64,
    pub hidden: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { lr: 1e-3, epochs: 35, batch_size: 8192, step_size: 0.05, divergence: DivergenceMode::Exact, seed: 0, hidden: vec![512; 6] }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            bail!(InvalidInput, "learning rate must be positive");
        }
        if self.batch_size == 0 || self.epochs == 0 {
            bail!(InvalidInput, "batch size and epochs must be positive");
        }
        if !(self.step_size > 0.0 && self.step_size <= 1.0) {
            bail!(InvalidInput, "integrator step must lie in (0, 1]");
        }
        if self.divergence == DivergenceMode::Hutchinson(0) {
            bail!(InvalidInput, "Hutchinson estimator needs at least one probe");
        }
        Ok(())
    }
}

/// Mean loss per epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epoch_losses: Vec<f64>,
    pub steps: usize,
}

/// Flow draws in polytope coordinates with their log-densities. For the
/// Euclidean flow, points outside the polytope carry `-inf`.
#[derive(Debug, Clone)]
pub struct FlowSamples {
    pub v: Matrix,
    pub log_q: Vec<f64>,
    pub inside: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct TrainedFlow {
    pub net: VectorFieldNet,
    pub kind: FlowKind,
    pub manifold: ManifoldSpec,
    pub step_size: f64,
    pub divergence: DivergenceMode,
}

impl TrainedFlow {
    pub fn new(kind: FlowKind, net: VectorFieldNet, step_size: f64, divergence: DivergenceMode) -> Result<Self> {
        if net.dim() != kind.dim() {
            bail!(Dimension, "network dimension {} does not match the flow dimension {}", net.dim(), kind.dim());
        }
        if let FlowKind::Euclidean { log_volume, .. } = &kind {
            if !log_volume.is_finite() {
                bail!(InvalidInput, "Euclidean flow needs a finite log-volume");
            }
        }
        let manifold = kind.default_manifold();
        Ok(TrainedFlow { net, kind, manifold, step_size, divergence })
    }

    /// A fresh network for `kind` built from the config's widths and seed.
    pub fn untrained(kind: FlowKind, cfg: &TrainConfig, zero_output: bool) -> Result<Self> {
        cfg.validate()?;
        let mut rng = named_rng(cfg.seed, "cnf-init");
        let net = VectorFieldNet::new(kind.dim(), &cfg.hidden, zero_output, &mut rng)?;
        Self::new(kind, net, cfg.step_size, cfg.divergence)
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    pub fn to_flow_coords(&self, v: &Vector) -> Result<Vector> {
        match &self.kind {
            FlowKind::Euclidean { .. } => Ok(v.clone()),
            FlowKind::Ball { h, cfg } => to_ball(v, h, cfg),
            FlowKind::Aitchison { map } => map.to_zt(v),
        }
    }

    pub fn from_flow_coords(&self, x: &Vector) -> Result<Vector> {
        match &self.kind {
            FlowKind::Euclidean { .. } => Ok(x.clone()),
            FlowKind::Ball { h, cfg } => from_ball(x, h, cfg),
            FlowKind::Aitchison { map } => map.from_zt(x),
        }
    }

    /// `log|det dv/dx|` of the fixed map from flow coordinates to the polytope.
    fn fixed_logdet(&self, x: &Vector) -> Result<f64> {
        match &self.kind {
            FlowKind::Euclidean { .. } => Ok(0.0),
            FlowKind::Ball { h, cfg } => logdet_from_ball(x, h, cfg),
            FlowKind::Aitchison { map } => map.logdet_jvt(x),
        }
    }

    fn base_log_density(&self, x: &[f64]) -> f64 {
        match &self.kind {
            FlowKind::Euclidean { h, log_volume } => {
                if h.contains(&Vector::from_column_slice(x), 0.0) {
                    -log_volume
                } else {
                    f64::NEG_INFINITY
                }
            }
            FlowKind::Ball { .. } => {
                if x.iter().map(|a| a * a).sum::<f64>() <= 1.0 {
                    -ln_ball_volume(x.len(), 1.0)
                } else {
                    f64::NEG_INFINITY
                }
            }
            FlowKind::Aitchison { .. } => x.iter().map(|&a| norm_logpdf(a)).sum(),
        }
    }

    /// `n` base draws as a flat `n x K` buffer.
    pub fn sample_base<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<f64>> {
        let k = self.dim();
        match &self.kind {
            FlowKind::Euclidean { h, .. } => {
                let m = uniform_polytope_samples(h, n, rng.next_u64())?;
                Ok(m.transpose().as_slice().to_vec())
            }
            FlowKind::Ball { .. } => Ok((0..n).flat_map(|_| sample_ball(k, 1.0, rng).data.as_vec().clone()).collect()),
            FlowKind::Aitchison { .. } => Ok((0..n).flat_map(|_| standard_normal(k, rng).data.as_vec().clone()).collect()),
        }
    }

    /// Forward-integrates base draws; returns polytope points and `log q`.
    pub fn sample<R: RngCore>(&self, n: usize, rng: &mut R) -> Result<FlowSamples> {
        let k = self.dim();
        let base = self.sample_base(n, rng)?;
        let mut v = Matrix::zeros(n, k);
        let mut log_q = vec![0.0; n];
        let mut inside = vec![true; n];
        for (c, chunk) in base.chunks(CHUNK * k).enumerate() {
            let (x1, div) = integrate_with_divergence(&self.net, chunk, &self.manifold, self.step_size, Direction::Forward, self.divergence, rng)?;
            for i in 0..chunk.len() / k {
                let row = c * CHUNK + i;
                let lp0 = self.base_log_density(&chunk[i * k..(i + 1) * k]);
                let mut x = Vector::from_column_slice(&x1[i * k..(i + 1) * k]);
                if let FlowKind::Ball { .. } = self.kind {
                    let r = x.norm();
                    if r > 1.0 - BALL_EDGE {
                        x *= (1.0 - BALL_EDGE) / r;
                    }
                }
                let vi = self.from_flow_coords(&x)?;
                let (lq, ok) = match &self.kind {
                    FlowKind::Euclidean { h, .. } => {
                        let ok = h.contains(&vi, 0.0);
                        (if ok { lp0 - div[i] } else { f64::NEG_INFINITY }, ok)
                    }
                    _ => (lp0 - div[i] - self.fixed_logdet(&x)?, true),
                };
                v.row_mut(row).copy_from(&vi.transpose());
                log_q[row] = lq;
                inside[row] = ok;
            }
        }
        Ok(FlowSamples { v, log_q, inside })
    }

    /// `log q(v)` for each row by reverse integration.
    pub fn log_density<R: RngCore>(&self, vs: &Matrix, rng: &mut R) -> Result<Vec<f64>> {
        let k = self.dim();
        if vs.ncols() != k {
            bail!(Dimension, "points have {} coordinates, flow {}", vs.ncols(), k);
        }
        let mut out = vec![f64::NEG_INFINITY; vs.nrows()];
        let mut rows = Vec::with_capacity(vs.nrows());
        let mut xs = Vec::with_capacity(vs.nrows() * k);
        let mut fixed = Vec::with_capacity(vs.nrows());
        for (i, r) in vs.row_iter().enumerate() {
            let v = r.transpose();
            if let FlowKind::Euclidean { h, .. } = &self.kind {
                if !h.contains(&v, 0.0) {
                    continue;
                }
            }
            let x = self.to_flow_coords(&v)?;
            fixed.push(self.fixed_logdet(&x)?);
            xs.extend_from_slice(x.as_slice());
            rows.push(i);
        }
        for (c, chunk) in xs.chunks(CHUNK * k).enumerate() {
            let (x0, div) = integrate_with_divergence(&self.net, chunk, &self.manifold, self.step_size, Direction::Reverse, self.divergence, rng)?;
            for i in 0..chunk.len() / k {
                let j = c * CHUNK + i;
                out[rows[j]] = self.base_log_density(&x0[i * k..(i + 1) * k]) - div[i] - fixed[j];
            }
        }
        Ok(out)
    }
}

/// Uniform draws on `h` from hit-and-run chains (4 chains, burn-in 1000,
/// thinning 10) seeded from `seed`; rows are points.
pub fn uniform_polytope_samples(h: &HPolytope, n: usize, seed: u64) -> Result<Matrix> {
    let chains = 4usize;
    let per = n.div_ceil(chains);
    let cfg = SamplerConfig { n_samples: per, ..SamplerConfig::default() };
    let (c, r) = init_ball(h)?;
    let mut out = Matrix::zeros(n, h.dim());
    let mut row = 0;
    for i in 0..chains {
        if row == n {
            break;
        }
        let chain = run_chain(h, &|_: &Vector| 0.0, &cfg, &c, r, seed, i as u64)?;
        let take = per.min(n - row);
        out.view_mut((row, 0), (take, h.dim())).copy_from(&chain.samples.rows(0, take));
        row += take;
    }
    Ok(out)
}

/// Flow matching on `data` (rows are polytope points). For the Euclidean
/// flow, base draws come from `base_pool` when given, else from fresh
/// hit-and-run chains. `progress` sees each epoch's mean loss.
pub fn train_flow(
    flow: &mut TrainedFlow,
    data: &Matrix,
    cfg: &TrainConfig,
    base_pool: Option<&Matrix>,
    mut progress: Option<&mut dyn FnMut(usize, f64)>,
) -> Result<TrainReport> {
    cfg.validate()?;
    let k = flow.dim();
    if data.nrows() == 0 || data.ncols() != k {
        bail!(Dimension, "training data must be a non-empty n x {k} matrix");
    }
    let mut rng = named_rng(cfg.seed, "cnf-train");
    let mut x1 = Vec::with_capacity(data.nrows() * k);
    for r in data.row_iter() {
        x1.extend_from_slice(flow.to_flow_coords(&r.transpose())?.as_slice());
    }
    let pool = match (&flow.kind, base_pool) {
        (FlowKind::Euclidean { .. }, Some(p)) => Some(p.transpose().as_slice().to_vec()),
        (FlowKind::Euclidean { .. }, None) => Some(flow.sample_base(data.nrows(), &mut rng)?),
        _ => None,
    };
    let n = data.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    let mut opt = Adam::new(flow.net.params().len(), cfg.lr);
    let mut report = TrainReport { epoch_losses: Vec::with_capacity(cfg.epochs), steps: 0 };
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let b = batch.len();
            let mut h1 = Vec::with_capacity(b * k);
            for &i in batch {
                h1.extend_from_slice(&x1[i * k..(i + 1) * k]);
            }
            let h0 = match &pool {
                Some(p) => {
                    let m = p.len() / k;
                    let mut h0 = Vec::with_capacity(b * k);
                    for _ in 0..b {
                        let j = rng.random_range(0..m);
                        h0.extend_from_slice(&p[j * k..(j + 1) * k]);
                    }
                    h0
                }
                None => flow.sample_base(b, &mut rng)?,
            };
            let t: Vec<f64> = (0..b).map(|_| rng.random::<f64>()).collect();
            total += rcfm_step(&mut flow.net, &mut opt, &h0, &h1, &t)? * b as f64;
            report.steps += 1;
        }
        let mean = total / n as f64;
        report.epoch_losses.push(mean);
        if let Some(cb) = progress.as_mut() {
            cb(epoch, mean);
        }
    }
    flow.step_size = cfg.step_size;
    flow.divergence = cfg.divergence;
    Ok(report)
}
