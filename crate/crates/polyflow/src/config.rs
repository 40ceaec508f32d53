//! Experiment configuration (JSON).

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use polyflow_core::cnf::TrainConfig;
use polyflow_core::eval::MixtureOfGaussians;
use polyflow_core::mcmc::{KernelKind, ProposalDist, SamplerConfig};
use polyflow_core::{Matrix, Vector};

use crate::error::{AppError, Result};
use crate::formats::parse_divergence;

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum Manifold {
    Euclid,
    Ball,
    Ait,
}

impl Manifold {
    pub fn name(self) -> &'static str {
        match self {
            Manifold::Euclid => "euclid",
            Manifold::Ball => "ball",
            Manifold::Ait => "ait",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "euclid" => Ok(Manifold::Euclid),
            "ball" => Ok(Manifold::Ball),
            "ait" => Ok(Manifold::Ait),
            other => Err(AppError::Config(format!("manifold must be euclid, ball or ait, got '{other}'"))),
        }
    }
}

/// Where the polytope comes from.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSource {
    /// The built-in worked example network.
    Example,
    /// A model file (see `ModelFile`).
    Path(PathBuf),
    /// An axis-aligned box `lo <= x <= hi`.
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Component {
    pub weight: f64,
    pub mean: Vec<f64>,
    /// Full covariance; overrides `scale`.
    #[serde(default)]
    pub covariance: Option<Vec<Vec<f64>>>,
    /// Isotropic covariance `scale * I`.
    #[serde(default)]
    pub scale: Option<f64>,
}

/// Target density on the rounded polytope.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum TargetConfig {
    Uniform,
    Mixture { components: Vec<Component> },
}

impl TargetConfig {
    pub fn mixture(&self, k: usize) -> Result<Option<MixtureOfGaussians>> {
        let TargetConfig::Mixture { components } = self else { return Ok(None) };
        let mut weights = Vec::new();
        let mut means = Vec::new();
        let mut covs = Vec::new();
        for (i, c) in components.iter().enumerate() {
            if c.mean.len() != k {
                return Err(AppError::Config(format!("component {i} mean has {} entries, polytope dimension is {k}", c.mean.len())));
            }
            let cov = match (&c.covariance, c.scale) {
                (Some(rows), _) => {
                    if rows.len() != k || rows.iter().any(|r| r.len() != k) {
                        return Err(AppError::Config(format!("component {i} covariance must be {k}x{k}")));
                    }
                    Matrix::from_fn(k, k, |a, b| rows[a][b])
                }
                (None, Some(s)) => Matrix::identity(k, k) * s,
                (None, None) => return Err(AppError::Config(format!("component {i} needs a covariance or a scale"))),
            };
            weights.push(c.weight);
            means.push(Vector::from_column_slice(&c.mean));
            covs.push(cov);
        }
        Ok(Some(MixtureOfGaussians::new(weights, means, covs)?))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct McmcConfig {
    pub chains: usize,
    pub samples_per_chain: usize,
    pub proposals: usize,
    /// `peskun` or `barker`.
    pub kernel: String,
    /// `uniform` or `truncated_normal`.
    pub proposal: String,
    pub burn_in: usize,
    pub thin: usize,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig { chains: 4, samples_per_chain: 26_250, proposals: 3, kernel: "peskun".into(), proposal: "uniform".into(), burn_in: 1000, thin: 15 }
    }
}

impl McmcConfig {
    pub fn sampler(&self, target_cov: Option<Matrix>) -> Result<SamplerConfig> {
        let kernel = match self.kernel.as_str() {
            "peskun" => KernelKind::Peskun,
            "barker" => KernelKind::Barker,
            other => return Err(AppError::Config(format!("kernel must be peskun or barker, got '{other}'"))),
        };
        let proposal = match self.proposal.as_str() {
            "uniform" => ProposalDist::Uniform,
            "truncated_normal" => {
                let cov = target_cov.ok_or_else(|| AppError::Config("truncated normal proposals need a mixture target".into()))?;
                ProposalDist::truncated_normal(cov)?
            }
            other => return Err(AppError::Config(format!("proposal must be uniform or truncated_normal, got '{other}'"))),
        };
        if self.chains < 2 {
            return Err(AppError::Config("at least two chains are needed for diagnostics".into()));
        }
        Ok(SamplerConfig { n_samples: self.samples_per_chain, proposals: self.proposals, burn_in: self.burn_in, thin: self.thin, proposal, kernel })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct UniformConfig {
    /// Uniform draws for the normalizing constant.
    pub samples: usize,
    /// Ball draws for the rejection volume.
    pub volume_draws: usize,
}

impl Default for UniformConfig {
    fn default() -> Self {
        UniformConfig { samples: 125_000, volume_draws: 1_000_000 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub manifolds: Vec<Manifold>,
    pub epochs: usize,
    /// Epochs for the ilr flow when different.
    pub epochs_ait: Option<usize>,
    pub lr: f64,
    pub batch_size: usize,
    pub step_size: f64,
    /// `exact` or `hutchinson:N`.
    pub divergence: String,
    pub hidden: Vec<usize>,
    /// Cap on the MCMC draws used for training (evenly thinned).
    pub max_train_samples: Option<usize>,
    /// The ilr flow is fitted and trained only on draws whose smallest
    /// maximum-entropy log-weight is at least this; `null` keeps all.
    pub ait_log_weight_floor: Option<f64>,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            manifolds: vec![Manifold::Ball],
            epochs: 35,
            epochs_ait: Some(50),
            lr: 1e-3,
            batch_size: 8192,
            step_size: 0.05,
            divergence: "exact".into(),
            hidden: vec![512; 6],
            max_train_samples: None,
            ait_log_weight_floor: Some(-30.0),
        }
    }
}

impl TrainSettings {
    pub fn train_config(&self, manifold: Manifold, seed: u64) -> Result<TrainConfig> {
        let epochs = match manifold {
            Manifold::Ait => self.epochs_ait.unwrap_or(self.epochs),
            _ => self.epochs,
        };
        let cfg = TrainConfig {
            lr: self.lr,
            epochs,
            batch_size: self.batch_size,
            step_size: self.step_size,
            divergence: parse_divergence(&self.divergence)?,
            seed,
            hidden: self.hidden.clone(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub flow_samples: usize,
    /// Grid points per axis of the 2D marginal density grids.
    pub grid_points: usize,
    /// Draws per source used for the kernel density estimates.
    pub kde_samples: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { flow_samples: 20_000, grid_points: 50, kde_samples: 10_000 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    pub model: ModelSource,
    pub target: TargetConfig,
    #[serde(default)]
    pub mcmc: McmcConfig,
    #[serde(default)]
    pub uniform: UniformConfig,
    #[serde(default)]
    pub train: TrainSettings,
    #[serde(default)]
    pub eval: EvalConfig,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// The mixture on the rounded example polytope: equal weights,
    /// isotropic covariance 0.05 I and means at 1.015 along three rounded
    /// axes. The covariances are artifact defaults, not published values.
    pub fn example_mixture() -> Self {
        let comp = |axis: usize, sign: f64| {
            let mut mean = vec![0.0; 4];
            mean[axis] = sign * 1.015;
            Component { weight: 1.0 / 3.0, mean, covariance: None, scale: Some(0.05) }
        };
        ExperimentConfig {
            name: "mog_polytope".into(),
            seed: 2024,
            model: ModelSource::Example,
            target: TargetConfig::Mixture { components: vec![comp(0, -1.0), comp(2, 1.0), comp(3, 1.0)] },
            mcmc: McmcConfig::default(),
            uniform: UniformConfig::default(),
            train: TrainSettings::default(),
            eval: EvalConfig::default(),
        }
    }
}

/// Command-line overrides applied on top of a config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub manifold: Option<Manifold>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub batch_size: Option<usize>,
    pub step_size: Option<f64>,
    pub seed: Option<u64>,
    pub divergence: Option<String>,
    pub model: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) -> Result<()> {
        if let Some(m) = self.manifold {
            cfg.train.manifolds = vec![m];
        }
        if let Some(e) = self.epochs {
            cfg.train.epochs = e;
            cfg.train.epochs_ait = Some(e);
        }
        if let Some(lr) = self.lr {
            cfg.train.lr = lr;
        }
        if let Some(b) = self.batch_size {
            cfg.train.batch_size = b;
        }
        if let Some(s) = self.step_size {
            cfg.train.step_size = s;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(d) = &self.divergence {
            parse_divergence(d)?;
            cfg.train.divergence = d.clone();
        }
        if let Some(p) = &self.model {
            cfg.model = ModelSource::Path(p.clone());
        }
        Ok(())
    }
}
