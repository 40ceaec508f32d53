//! Experiment stages: round, sample, estimate the normalizer, train,
//! evaluate and emit artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::thread;

use serde::Serialize;

use polyflow_core::ball::BallMapConfig;
use polyflow_core::cnf::{train_flow, uniform_polytope_samples, FlowKind, FlowSamples, TrainReport, TrainedFlow};
use polyflow_core::eval::{estimate_volume, estimate_z, flow_metrics, MetricsReport, MixtureOfGaussians, VolumeEstimate};
use polyflow_core::mcmc::{init_ball, run_chain, ChainDiagnostics, ChainOutput, SamplerConfig};
use polyflow_core::model::build_example_model;
use polyflow_core::polytope::enumerate_vertices;
use polyflow_core::rng::named_rng;
use polyflow_core::rounding::{circumscribed_radius, round_full_dimensional, round_model, MveOptions, RoundingOptions, TransformChain};
use polyflow_core::simplex_coords::{rows_above_log_weight_floor, AitchisonMap, MecOptions};
use polyflow_core::{HPolytope, Matrix, Vector};
use rand::RngCore;

use crate::config::{ExperimentConfig, Manifold, ModelSource};
use crate::error::{AppError, Result, StageContext};
use crate::formats::{read_json, write_json, FlowCheckpoint, ModelFile, TransformChainFile};
use crate::kde::marginal_grid;

/// Vertex enumeration budget for the ilr flow.
const MAX_VERTEX_SUBSETS: usize = 5_000_000;
/// Training rows used to fit the ilr projection.
const ILR_FIT_ROWS: usize = 2000;

/// Independent seed for a named stage.
pub fn sub_seed(seed: u64, name: &str) -> u64 {
    named_rng(seed, name).next_u64()
}

/// The rounded polytope every later stage works on.
#[derive(Debug, Clone)]
pub struct Geometry {
    pub chain: TransformChain,
    pub names: Vec<String>,
    /// Radius of a ball around the origin containing the polytope.
    pub phi: f64,
}

impl Geometry {
    pub fn polytope(&self) -> &HPolytope {
        &self.chain.john
    }

    pub fn dim(&self) -> usize {
        self.chain.dim()
    }
}

pub fn build_geometry(source: &ModelSource, base_dir: &Path) -> Result<Geometry> {
    let chain = match source {
        ModelSource::Example => round_model(&build_example_model(), RoundingOptions::default())?,
        ModelSource::Path(p) => {
            let path = if p.is_absolute() { p.clone() } else { base_dir.join(p) };
            let file: ModelFile = read_json(&path)?;
            round_model(&file.to_model()?, RoundingOptions::default())?
        }
        ModelSource::Box { lo, hi } => round_full_dimensional(&HPolytope::from_box(lo, hi)?, MveOptions::default())?,
    };
    let names = chain.rounded_names();
    let phi = circumscribed_radius(&chain.john)?;
    Ok(Geometry { chain, names, phi })
}

/// Unnormalized target on the rounded polytope.
#[derive(Debug, Clone)]
pub struct Target {
    pub mixture: Option<MixtureOfGaussians>,
}

impl Target {
    pub fn log_p(&self, v: &Vector) -> f64 {
        self.mixture.as_ref().map_or(0.0, |m| m.log_pdf(v))
    }

    /// Weighted mean of the component covariances, for truncated-normal proposals.
    pub fn mean_covariance(&self) -> Option<Matrix> {
        let m = self.mixture.as_ref()?;
        let k = m.dim();
        let mut acc = Matrix::zeros(k, k);
        for (w, c) in m.weights().iter().zip(m.covariances()) {
            acc += c * *w;
        }
        Some(acc)
    }
}

/// Chains in parallel threads; chain `i` uses stream `i` of `seed`, so the
/// result matches the sequential runner exactly.
pub fn run_chains_parallel(h: &HPolytope, target: &Target, cfg: &SamplerConfig, n_chains: usize, seed: u64) -> Result<(Vec<ChainOutput>, ChainDiagnostics)> {
    let (c, r) = init_ball(h)?;
    let log_p = |v: &Vector| target.log_p(v);
    let chains = thread::scope(|s| {
        let handles: Vec<_> = (0..n_chains).map(|i| {
            let (c, log_p) = (&c, &log_p);
            s.spawn(move || run_chain(h, log_p, cfg, c, r, seed, i as u64))
        }).collect();
        handles.into_iter().map(|h| h.join().expect("chain thread panicked")).collect::<polyflow_core::Result<Vec<_>>>()
    })?;
    let samples: Vec<Matrix> = chains.iter().map(|c| c.samples.clone()).collect();
    let diag = ChainDiagnostics::compute(&samples)?;
    Ok((chains, diag))
}

/// Rejection volume, uniform draws and the normalizer of the target.
#[derive(Debug, Clone)]
pub struct UniformStage {
    pub volume: VolumeEstimate,
    pub samples: Matrix,
    pub z: f64,
}

pub fn run_uniform(geo: &Geometry, target: &Target, samples: usize, volume_draws: usize, seed: u64) -> Result<UniformStage> {
    let h = geo.polytope();
    let volume = estimate_volume(h, geo.phi, volume_draws, &mut named_rng(seed, "volume"))?;
    let uniform = uniform_polytope_samples(h, samples, sub_seed(seed, "uniform"))?;
    let z = match target.mixture {
        Some(_) => estimate_z(|v| target.log_p(v), volume.volume, &uniform)?,
        None => volume.volume,
    };
    Ok(UniformStage { volume, samples: uniform, z })
}

/// Every `stride`-th row so that at most `cap` rows remain.
pub fn thin_rows(m: &Matrix, cap: Option<usize>) -> Matrix {
    match cap {
        Some(cap) if cap > 0 && m.nrows() > cap => {
            let idx: Vec<usize> = (0..cap).map(|i| i * m.nrows() / cap).collect();
            Matrix::from_fn(cap, m.ncols(), |i, j| m[(idx[i], j)])
        }
        _ => m.clone(),
    }
}

/// Builds the untrained flow for `manifold`.
pub fn flow_kind(manifold: Manifold, geo: &Geometry, uniform: &UniformStage, data: &Matrix) -> Result<FlowKind> {
    let h = geo.polytope().clone();
    Ok(match manifold {
        Manifold::Euclid => FlowKind::Euclidean { h, log_volume: uniform.volume.volume.ln() },
        Manifold::Ball => FlowKind::Ball { h, cfg: BallMapConfig::default() },
        Manifold::Ait => {
            let vertices = enumerate_vertices(&h, 1e-9, MAX_VERTEX_SUBSETS)?;
            let fit = thin_rows(data, Some(ILR_FIT_ROWS));
            FlowKind::Aitchison { map: AitchisonMap::fit(vertices, &fit, MecOptions::default())? }
        }
    })
}

pub fn train_manifold(
    manifold: Manifold,
    geo: &Geometry,
    uniform: &UniformStage,
    data: &Matrix,
    cfg: &ExperimentConfig,
    progress: &mut dyn FnMut(usize, f64),
) -> Result<(TrainedFlow, TrainReport)> {
    let seed = sub_seed(cfg.seed, &format!("train-{}", manifold.name()));
    let tc = cfg.train.train_config(manifold, seed)?;
    let mut data = thin_rows(data, cfg.train.max_train_samples);
    if let (Manifold::Ait, Some(floor)) = (manifold, cfg.train.ait_log_weight_floor) {
        let vertices = enumerate_vertices(geo.polytope(), 1e-9, MAX_VERTEX_SUBSETS)?;
        let keep = rows_above_log_weight_floor(&data, &vertices, floor, MecOptions::default())?;
        if keep.is_empty() {
            return Err(AppError::Config(format!("no training draw has all log-weights above {floor}")));
        }
        data = data.select_rows(&keep);
    }
    let kind = flow_kind(manifold, geo, uniform, &data)?;
    let mut flow = TrainedFlow::untrained(kind, &tc, false)?;
    let pool = (manifold == Manifold::Euclid).then_some(&uniform.samples);
    let report = train_flow(&mut flow, &data, &tc, pool, Some(progress))?;
    Ok((flow, report))
}

pub fn evaluate_flow(flow: &TrainedFlow, target: &Target, z: f64, h: &HPolytope, n: usize, seed: u64) -> Result<(FlowSamples, MetricsReport)> {
    let mut rng = named_rng(seed, &format!("eval-{}", flow.kind.name()));
    let samples = flow.sample(n, &mut rng)?;
    let log_p: Vec<f64> = samples.v.row_iter().map(|r| target.log_p(&r.transpose())).collect();
    let metrics = flow_metrics(&samples.v, &samples.log_q, &log_p, Some(z), Some(h), seed)?;
    Ok((samples, metrics))
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct MetricsJson {
    pub kl_nats: f64,
    pub kl_given_z: Option<f64>,
    pub ess_pct: f64,
    pub outside_pct: Option<f64>,
    pub z_kl: f64,
    pub z_estimate: Option<f64>,
    pub n_samples: usize,
    pub n_evaluated: usize,
    pub seed: u64,
}

impl From<&MetricsReport> for MetricsJson {
    fn from(m: &MetricsReport) -> Self {
        MetricsJson {
            kl_nats: m.kl_nats,
            kl_given_z: m.kl_given_z,
            ess_pct: m.ess_pct,
            outside_pct: m.outside_pct,
            z_kl: m.z_kl,
            z_estimate: m.z_estimate,
            n_samples: m.n_samples,
            n_evaluated: m.n_evaluated,
            seed: m.seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct DiagnosticsJson {
    pub names: Vec<String>,
    pub rhat: Vec<f64>,
    pub ess_pct: Vec<f64>,
    pub move_rates: Vec<f64>,
    pub chains: usize,
    pub draws_per_chain: usize,
}

impl DiagnosticsJson {
    pub fn new(names: &[String], chains: &[ChainOutput], diag: &ChainDiagnostics) -> Self {
        DiagnosticsJson {
            names: names.to_vec(),
            rhat: diag.rhat.clone(),
            ess_pct: diag.ess_pct.clone(),
            move_rates: chains.iter().map(|c| c.move_rate).collect(),
            chains: chains.len(),
            draws_per_chain: chains.first().map_or(0, |c| c.samples.nrows()),
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RunMetrics {
    pub name: String,
    pub seed: u64,
    pub volume: f64,
    pub volume_stderr: f64,
    pub z: f64,
    pub flows: BTreeMap<String, MetricsJson>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub name: String,
    pub seed: u64,
    pub version: String,
    pub stage_seeds: BTreeMap<String, u64>,
    pub files: Vec<String>,
    pub config: ExperimentConfig,
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| AppError::io(path, e))
}

pub fn write_samples_csv(path: &Path, names: &[String], chains: &[ChainOutput]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["chain".to_string(), "draw".to_string()];
    header.extend_from_slice(names);
    w.write_record(&header)?;
    for (c, chain) in chains.iter().enumerate() {
        for (d, row) in chain.samples.row_iter().enumerate() {
            let mut rec = vec![c.to_string(), d.to_string()];
            rec.extend(row.iter().map(|x| x.to_string()));
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| AppError::io(path, e))
}

pub fn write_flow_samples_csv(path: &Path, names: &[String], s: &FlowSamples) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["draw".to_string()];
    header.extend_from_slice(names);
    header.push("log_q".into());
    header.push("inside".into());
    w.write_record(&header)?;
    for (i, row) in s.v.row_iter().enumerate() {
        let mut rec = vec![i.to_string()];
        rec.extend(row.iter().map(|x| x.to_string()));
        rec.push(s.log_q[i].to_string());
        rec.push(s.inside[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| AppError::io(path, e))
}

/// 2D marginal grids of every coordinate pair for each named sample set,
/// on a shared range padded by 5%.
pub fn write_density_grid(path: &Path, names: &[String], sources: &[(String, Matrix)], n: usize, cap: usize) -> Result<()> {
    let k = names.len();
    let mut lo = vec![f64::INFINITY; k];
    let mut hi = vec![f64::NEG_INFINITY; k];
    for (_, m) in sources {
        for row in m.row_iter() {
            for j in 0..k {
                lo[j] = lo[j].min(row[j]);
                hi[j] = hi[j].max(row[j]);
            }
        }
    }
    for j in 0..k {
        let pad = 0.05 * (hi[j] - lo[j]).max(1e-9);
        lo[j] -= pad;
        hi[j] += pad;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["source", "dim_x", "dim_y", "x", "y", "density"])?;
    for (name, m) in sources {
        let m = thin_rows(m, Some(cap));
        for a in 0..k {
            for b in a + 1..k {
                for p in marginal_grid(&m, a, b, [lo[a], lo[b]], [hi[a], hi[b]], n) {
                    w.write_record([name.as_str(), names[a].as_str(), names[b].as_str(), &p.x.to_string(), &p.y.to_string(), &p.density.to_string()])?;
                }
            }
        }
    }
    w.flush().map_err(|e| AppError::io(path, e))
}

/// Everything a full run produced, for callers that inspect results.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub geometry: Geometry,
    pub diagnostics: ChainDiagnostics,
    pub uniform_z: f64,
    pub volume: VolumeEstimate,
    pub metrics: BTreeMap<Manifold, MetricsReport>,
    pub files: Vec<PathBuf>,
}

/// Stages of `run` (all of them) and of the narrower CLI verbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stages {
    Sample,
    Train,
    Full,
}

pub fn run_experiment(cfg: &ExperimentConfig, base_dir: &Path, out_dir: &Path, stages: Stages, log: &mut dyn FnMut(&str)) -> Result<RunOutput> {
    create_dir(out_dir).stage("emit")?;
    let mut files = Vec::new();
    let mut stage_seeds = BTreeMap::new();

    let geo = build_geometry(&cfg.model, base_dir).stage("round")?;
    let chain_path = out_dir.join("transform_chain.json");
    write_json(&chain_path, &TransformChainFile::from_chain(&geo.chain)).stage("round")?;
    files.push(chain_path);
    log(&format!("round: K = {}, inscribed radius {:.6}, circumscribed radius {:.4}", geo.dim(), geo.chain.inscribed_radius(), geo.phi));

    let target = Target { mixture: cfg.target.mixture(geo.dim()).stage("target")? };

    let mcmc_seed = sub_seed(cfg.seed, "mcmc");
    stage_seeds.insert("mcmc".to_string(), mcmc_seed);
    let sampler = cfg.mcmc.sampler(target.mean_covariance()).stage("mcmc")?;
    let (chains, diag) = run_chains_parallel(geo.polytope(), &target, &sampler, cfg.mcmc.chains, mcmc_seed).stage("mcmc")?;
    let samples_path = out_dir.join("samples.csv");
    write_samples_csv(&samples_path, &geo.names, &chains).stage("mcmc")?;
    let diag_path = out_dir.join("chain_diagnostics.json");
    write_json(&diag_path, &DiagnosticsJson::new(&geo.names, &chains, &diag)).stage("mcmc")?;
    files.push(samples_path);
    files.push(diag_path);
    log(&format!("mcmc: R-hat {:?}, ESS% {:?}", round4(&diag.rhat), round4(&diag.ess_pct)));
    let data = polyflow_core::mcmc::stack_chains(&chains);

    let uniform_seed = sub_seed(cfg.seed, "uniform");
    stage_seeds.insert("uniform".to_string(), uniform_seed);
    let needs_uniform = stages != Stages::Sample;
    let uniform = if needs_uniform {
        let u = run_uniform(&geo, &target, cfg.uniform.samples, cfg.uniform.volume_draws, uniform_seed).stage("uniform")?;
        log(&format!("uniform: volume {:.4} +- {:.4}, Z {:.5}", u.volume.volume, u.volume.stderr, u.z));
        Some(u)
    } else {
        None
    };

    let mut metrics = BTreeMap::new();
    let mut sources = vec![("mcmc".to_string(), data.clone())];
    if let Some(uniform) = &uniform {
        for &m in &cfg.train.manifolds {
            let dir = out_dir.join("flows").join(m.name());
            create_dir(&dir).stage("train")?;
            let mut progress = |e: usize, loss: f64| log(&format!("train[{}]: epoch {} loss {:.5}", m.name(), e + 1, loss));
            let (flow, _) = train_manifold(m, &geo, uniform, &data, cfg, &mut progress).stage("train")?;
            let ck_path = dir.join("flow_checkpoint.json");
            write_json(&ck_path, &FlowCheckpoint::from_flow(&flow, Some("../../transform_chain.json".into()))).stage("train")?;
            files.push(ck_path);
            if stages == Stages::Full {
                let eval_seed = sub_seed(cfg.seed, &format!("eval-{}", m.name()));
                stage_seeds.insert(format!("eval-{}", m.name()), eval_seed);
                let (s, report) = evaluate_flow(&flow, &target, uniform.z, geo.polytope(), cfg.eval.flow_samples, eval_seed).stage("evaluate")?;
                log(&format!(
                    "evaluate[{}]: KL {:.4} nats, ESS {:.2}%, outside {:.2}%",
                    m.name(),
                    report.kl_nats,
                    report.ess_pct,
                    report.outside_pct.unwrap_or(0.0)
                ));
                let sp = dir.join("flow_samples.csv");
                write_flow_samples_csv(&sp, &geo.names, &s).stage("emit")?;
                let mp = dir.join("metrics.json");
                write_json(&mp, &MetricsJson::from(&report)).stage("emit")?;
                files.push(sp);
                files.push(mp);
                let inside: Vec<usize> = (0..s.v.nrows()).filter(|&i| s.inside[i]).collect();
                sources.push((m.name().to_string(), Matrix::from_fn(inside.len(), geo.dim(), |i, j| s.v[(inside[i], j)])));
                metrics.insert(m, report);
            }
        }
    }

    if stages == Stages::Full {
        let uniform = uniform.as_ref().expect("uniform stage ran");
        let run_metrics = RunMetrics {
            name: cfg.name.clone(),
            seed: cfg.seed,
            volume: uniform.volume.volume,
            volume_stderr: uniform.volume.stderr,
            z: uniform.z,
            flows: metrics.iter().map(|(m, r)| (m.name().to_string(), MetricsJson::from(r))).collect(),
        };
        let mp = out_dir.join("metrics.json");
        write_json(&mp, &run_metrics).stage("emit")?;
        files.push(mp);
        let gp = out_dir.join("density_grid.csv");
        write_density_grid(&gp, &geo.names, &sources, cfg.eval.grid_points, cfg.eval.kde_samples).stage("emit")?;
        files.push(gp);
    }

    let manifest_path = out_dir.join("manifest.json");
    files.push(manifest_path.clone());
    let manifest = Manifest {
        name: cfg.name.clone(),
        seed: cfg.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        stage_seeds,
        files: files.iter().map(|f| f.strip_prefix(out_dir).unwrap_or(f).display().to_string()).collect(),
        config: cfg.clone(),
    };
    write_json(&manifest_path, &manifest).stage("emit")?;

    Ok(RunOutput {
        geometry: geo,
        diagnostics: diag,
        uniform_z: uniform.as_ref().map_or(f64::NAN, |u| u.z),
        volume: uniform.as_ref().map_or(VolumeEstimate { volume: f64::NAN, stderr: f64::NAN, accepted: 0, n: 0 }, |u| u.volume),
        metrics,
        files,
    })
}

/// Loads a checkpoint and evaluates it against the configured target.
/// Evaluates a saved flow; `step_size` overrides the integration step stored
/// in the checkpoint.
pub fn evaluate_checkpoint(
    cfg: &ExperimentConfig,
    base_dir: &Path,
    checkpoint: &Path,
    step_size: Option<f64>,
    out_dir: &Path,
    log: &mut dyn FnMut(&str),
) -> Result<MetricsReport> {
    create_dir(out_dir).stage("emit")?;
    let mut flow = read_json::<FlowCheckpoint>(checkpoint).and_then(|c| c.to_flow()).stage("load")?;
    if let Some(step) = step_size {
        flow.step_size = step;
    }
    let geo = build_geometry(&cfg.model, base_dir).stage("round")?;
    let target = Target { mixture: cfg.target.mixture(geo.dim()).stage("target")? };
    let uniform = run_uniform(&geo, &target, cfg.uniform.samples, cfg.uniform.volume_draws, sub_seed(cfg.seed, "uniform")).stage("uniform")?;
    let seed = sub_seed(cfg.seed, &format!("eval-{}", flow.kind.name()));
    let (s, report) = evaluate_flow(&flow, &target, uniform.z, geo.polytope(), cfg.eval.flow_samples, seed).stage("evaluate")?;
    write_flow_samples_csv(&out_dir.join("flow_samples.csv"), &geo.names, &s).stage("emit")?;
    write_json(&out_dir.join("metrics.json"), &MetricsJson::from(&report)).stage("emit")?;
    log(&format!("evaluate[{}]: KL {:.4} nats, ESS {:.2}%, Z_KL {:.4}, Z {:.4}", flow.kind.name(), report.kl_nats, report.ess_pct, report.z_kl, uniform.z));
    Ok(report)
}

fn round4(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| (x * 1e4).round() / 1e4).collect()
}
