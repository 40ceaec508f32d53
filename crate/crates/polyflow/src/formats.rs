//! JSON file formats for models, transform chains and flow checkpoints.

use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use polyflow_core::ball::BallMapConfig;
use polyflow_core::cnf::{DivergenceMode, FlowKind, TrainedFlow, VectorFieldNet};
use polyflow_core::rounding::{AffineEmbedding, EmbeddingKind, RoundingTransform, TransformChain};
use polyflow_core::simplex_coords::{AitchisonMap, IlrBasis, IlrProjection, MecOptions};
use polyflow_core::{CanonicalModel, HPolytope, Matrix, VPolytope, Vector};

use crate::error::{AppError, Result};

pub const CHECKPOINT_FORMAT: &str = "polyflow-flow/1";

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| AppError::io(path, e))
}

/// Dense matrix as a list of rows.
pub fn matrix_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn matrix_from_rows(rows: &[Vec<f64>], ncols: usize) -> Result<Matrix> {
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(AppError::Format(format!("matrix rows must all have {ncols} entries")));
    }
    Ok(Matrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn square_or_rect(rows: &[Vec<f64>]) -> Result<Matrix> {
    let ncols = rows.first().map_or(0, Vec::len);
    matrix_from_rows(rows, ncols)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct InequalityBlock {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

/// `S v = h`, `lo <= v <= hi` plus optional extra rows `A v <= b`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModelFile {
    pub variable_names: Vec<String>,
    pub stoichiometry: Vec<Vec<f64>>,
    #[serde(default)]
    pub rhs: Option<Vec<f64>>,
    pub bounds: Vec<[f64; 2]>,
    #[serde(default)]
    pub inequalities: Option<InequalityBlock>,
}

impl ModelFile {
    pub fn to_model(&self) -> Result<CanonicalModel> {
        let r = self.variable_names.len();
        let s = matrix_from_rows(&self.stoichiometry, r)?;
        let h = match &self.rhs {
            Some(h) => Vector::from_column_slice(h),
            None => Vector::zeros(s.nrows()),
        };
        let extra = match &self.inequalities {
            Some(block) => Some((matrix_from_rows(&block.a, r)?, Vector::from_column_slice(&block.b))),
            None => None,
        };
        let bounds: Vec<(f64, f64)> = self.bounds.iter().map(|b| (b[0], b[1])).collect();
        Ok(CanonicalModel::with_bounds(s, h, extra, &bounds, self.variable_names.clone())?)
    }

    /// The worked example with its box bounds split back out of `A_c`.
    pub fn example() -> Self {
        let m = polyflow_core::model::build_example_model();
        let bounds = polyflow_core::model::example_bounds().iter().map(|&(lo, hi)| [lo, hi]).collect();
        ModelFile { variable_names: m.variable_names.clone(), stoichiometry: matrix_rows(&m.s), rhs: None, bounds, inequalities: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PolytopeFile {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

impl PolytopeFile {
    pub fn from_polytope(h: &HPolytope) -> Self {
        PolytopeFile { a: matrix_rows(h.a()), b: h.b().iter().copied().collect() }
    }

    pub fn to_polytope(&self) -> Result<HPolytope> {
        Ok(HPolytope::new(square_or_rect(&self.a)?, Vector::from_column_slice(&self.b))?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TransformChainFile {
    pub variable_names: Vec<String>,
    pub embedding_kind: String,
    pub free_names: Vec<String>,
    pub rounded_names: Vec<String>,
    /// `v = T x + tau` (full space from free coordinates).
    pub t: Vec<Vec<f64>>,
    pub tau: Vec<f64>,
    /// `x = E y + eps` (free coordinates from rounded ones).
    pub e: Vec<Vec<f64>>,
    pub eps: Vec<f64>,
    pub john: PolytopeFile,
    pub inscribed_radius: f64,
}

impl TransformChainFile {
    pub fn from_chain(c: &TransformChain) -> Self {
        TransformChainFile {
            variable_names: c.variable_names.clone(),
            embedding_kind: match c.embedding.kind {
                EmbeddingKind::Rref => "rref".into(),
                EmbeddingKind::Svd => "svd".into(),
            },
            free_names: c.embedding.free_names.clone(),
            rounded_names: c.rounded_names(),
            t: matrix_rows(&c.embedding.t),
            tau: c.embedding.tau.iter().copied().collect(),
            e: matrix_rows(&c.rounding.e),
            eps: c.rounding.eps.iter().copied().collect(),
            john: PolytopeFile::from_polytope(&c.john),
            inscribed_radius: c.inscribed_radius(),
        }
    }

    pub fn to_chain(&self) -> Result<TransformChain> {
        let kind = match self.embedding_kind.as_str() {
            "rref" => EmbeddingKind::Rref,
            "svd" => EmbeddingKind::Svd,
            other => return Err(AppError::Format(format!("unknown embedding kind '{other}'"))),
        };
        let k = self.free_names.len();
        let embedding = AffineEmbedding { t: matrix_from_rows(&self.t, k)?, tau: Vector::from_column_slice(&self.tau), kind, free_names: self.free_names.clone() };
        let rounding = RoundingTransform { e: matrix_from_rows(&self.e, k)?, eps: Vector::from_column_slice(&self.eps) };
        let john = self.john.to_polytope()?;
        if embedding.t.nrows() != self.variable_names.len() || john.dim() != k || rounding.eps.len() != k {
            return Err(AppError::Format("transform chain shapes are inconsistent".into()));
        }
        Ok(TransformChain { embedding, rounding, john, variable_names: self.variable_names.clone() })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AitchisonFile {
    /// One row per vertex.
    pub vertices: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
    pub zbar: Vec<f64>,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub singular_values: Vec<f64>,
    pub mec_tol: f64,
    pub mec_max_iter: usize,
}

impl AitchisonFile {
    pub fn from_map(m: &AitchisonMap) -> Self {
        let pr = &m.projection;
        AitchisonFile {
            vertices: matrix_rows(&m.vertices.vertices().transpose()),
            p: matrix_rows(&pr.p),
            zbar: pr.zbar.iter().copied().collect(),
            mu: pr.mu.iter().copied().collect(),
            sigma: pr.sigma.iter().copied().collect(),
            singular_values: pr.singular_values.iter().copied().collect(),
            mec_tol: m.mec.tol,
            mec_max_iter: m.mec.max_iter,
        }
    }

    pub fn to_map(&self) -> Result<AitchisonMap> {
        let vertices = VPolytope::new(square_or_rect(&self.vertices)?.transpose())?;
        let basis = IlrBasis::helmert(vertices.n_vertices())?;
        let p = matrix_from_rows(&self.p, basis.n_parts() - 1)?;
        let projection = IlrProjection {
            p,
            zbar: Vector::from_column_slice(&self.zbar),
            mu: Vector::from_column_slice(&self.mu),
            sigma: Vector::from_column_slice(&self.sigma),
            singular_values: Vector::from_column_slice(&self.singular_values),
        };
        let mec = MecOptions { tol: self.mec_tol, max_iter: self.mec_max_iter };
        Ok(AitchisonMap { vertices, basis, projection, mec })
    }
}

pub fn encode_f64s(values: &[f64]) -> String {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

pub fn decode_f64s(text: &str) -> Result<Vec<f64>> {
    let bytes = STANDARD.decode(text).map_err(|e| AppError::Format(format!("weights are not valid base64: {e}")))?;
    if bytes.len() % 8 != 0 {
        return Err(AppError::Format("weight blob is not a whole number of f64 values".into()));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

pub fn parse_divergence(s: &str) -> Result<DivergenceMode> {
    if s == "exact" {
        return Ok(DivergenceMode::Exact);
    }
    if let Some(n) = s.strip_prefix("hutchinson:") {
        let probes: usize = n.parse().map_err(|_| AppError::Config(format!("bad probe count in '{s}'")))?;
        if probes == 0 {
            return Err(AppError::Config("Hutchinson estimator needs at least one probe".into()));
        }
        return Ok(DivergenceMode::Hutchinson(probes));
    }
    Err(AppError::Config(format!("divergence must be 'exact' or 'hutchinson:N', got '{s}'")))
}

pub fn format_divergence(d: DivergenceMode) -> String {
    match d {
        DivergenceMode::Exact => "exact".into(),
        DivergenceMode::Hutchinson(n) => format!("hutchinson:{n}"),
    }
}

/// Network weights plus everything needed to evaluate the flow.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FlowCheckpoint {
    pub format: String,
    pub manifold: String,
    pub layer_sizes: Vec<usize>,
    pub activation: String,
    /// Base64 of the little-endian `f64` parameters, layer by layer
    /// (weights `out x in` row-major, then biases).
    pub weights: String,
    pub step_size: f64,
    pub divergence: String,
    /// Polytope for the Euclidean and ball flows.
    #[serde(default)]
    pub polytope: Option<PolytopeFile>,
    #[serde(default)]
    pub log_volume: Option<f64>,
    #[serde(default)]
    pub ball_exponent: Option<f64>,
    #[serde(default)]
    pub ball_closed: bool,
    #[serde(default)]
    pub aitchison: Option<AitchisonFile>,
    /// File the flow coordinates were rounded with, if any.
    #[serde(default)]
    pub transform_chain: Option<String>,
}

impl FlowCheckpoint {
    pub fn from_flow(flow: &TrainedFlow, transform_chain: Option<String>) -> Self {
        let mut ck = FlowCheckpoint {
            format: CHECKPOINT_FORMAT.into(),
            manifold: flow.kind.name().into(),
            layer_sizes: flow.net.sizes().to_vec(),
            activation: "silu".into(),
            weights: encode_f64s(flow.net.params()),
            step_size: flow.step_size,
            divergence: format_divergence(flow.divergence),
            polytope: None,
            log_volume: None,
            ball_exponent: None,
            ball_closed: false,
            aitchison: None,
            transform_chain,
        };
        match &flow.kind {
            FlowKind::Euclidean { h, log_volume } => {
                ck.polytope = Some(PolytopeFile::from_polytope(h));
                ck.log_volume = Some(*log_volume);
            }
            FlowKind::Ball { h, cfg } => {
                ck.polytope = Some(PolytopeFile::from_polytope(h));
                ck.ball_exponent = cfg.exponent;
                ck.ball_closed = cfg.closed_ball;
            }
            FlowKind::Aitchison { map } => ck.aitchison = Some(AitchisonFile::from_map(map)),
        }
        ck
    }

    pub fn to_flow(&self) -> Result<TrainedFlow> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(AppError::Format(format!("unsupported checkpoint format '{}'", self.format)));
        }
        if self.activation != "silu" {
            return Err(AppError::Format(format!("unsupported activation '{}'", self.activation)));
        }
        let net = VectorFieldNet::from_params(self.layer_sizes.clone(), decode_f64s(&self.weights)?)?;
        let polytope = || -> Result<HPolytope> {
            self.polytope.as_ref().ok_or_else(|| AppError::Format("checkpoint lacks its polytope".into()))?.to_polytope()
        };
        let kind = match self.manifold.as_str() {
            "euclid" => FlowKind::Euclidean {
                h: polytope()?,
                log_volume: self.log_volume.ok_or_else(|| AppError::Format("Euclidean checkpoint lacks its log-volume".into()))?,
            },
            "ball" => FlowKind::Ball { h: polytope()?, cfg: BallMapConfig { exponent: self.ball_exponent, closed_ball: self.ball_closed } },
            "ait" => FlowKind::Aitchison {
                map: self.aitchison.as_ref().ok_or_else(|| AppError::Format("checkpoint lacks its ilr map".into()))?.to_map()?,
            },
            other => return Err(AppError::Format(format!("unknown manifold '{other}'"))),
        };
        Ok(TrainedFlow::new(kind, net, self.step_size, parse_divergence(&self.divergence)?)?)
    }
}
