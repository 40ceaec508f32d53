//! File formats: shipped configs parse, and every artifact round-trips.

use std::path::Path;

use polyflow::config::{ExperimentConfig, Manifold, ModelSource};
use polyflow::formats::{decode_f64s, encode_f64s, format_divergence, parse_divergence, read_json, write_json, AitchisonFile, FlowCheckpoint, ModelFile, TransformChainFile};
use polyflow_core::ball::BallMapConfig;
use polyflow_core::cnf::{uniform_polytope_samples, DivergenceMode, FlowKind, TrainConfig, TrainedFlow};
use polyflow_core::model::build_example_model;
use polyflow_core::polytope::enumerate_vertices;
use polyflow_core::rng::stream_rng;
use polyflow_core::rounding::{round_model, RoundingOptions};
use polyflow_core::simplex_coords::{AitchisonMap, MecOptions};
use polyflow_core::Vector;

fn configs() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn shipped_configs_parse() {
    for name in ["mog_polytope.json", "mog_polytope_quick.json", "box2d.json"] {
        let text = std::fs::read_to_string(configs().join(name)).unwrap();
        let cfg = ExperimentConfig::from_json(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(cfg.mcmc.chains >= 2, "{name}");
    }
}

#[test]
fn full_scale_config_matches_the_built_in_example() {
    let text = std::fs::read_to_string(configs().join("mog_polytope.json")).unwrap();
    let cfg = ExperimentConfig::from_json(&text).unwrap();
    let builtin = ExperimentConfig::example_mixture();
    assert_eq!(cfg.model, ModelSource::Example);
    assert_eq!(cfg.target, builtin.target);
    assert_eq!(cfg.mcmc, builtin.mcmc);
    assert_eq!(cfg.train.manifolds, vec![Manifold::Euclid, Manifold::Ball, Manifold::Ait]);
}

#[test]
fn shipped_model_file_is_the_example() {
    let file: ModelFile = read_json(&configs().join("example_model.json")).unwrap();
    assert_eq!(file, ModelFile::example());
    let model = file.to_model().unwrap();
    let builtin = build_example_model();
    assert_eq!(model.s, builtin.s);
    assert_eq!(model.a_c, builtin.a_c);
    assert_eq!(model.b_c, builtin.b_c);
}

#[test]
fn unknown_config_fields_are_rejected() {
    let text = r#"{"name": "x", "seed": 1, "model": "example", "target": {"kind": "uniform"}, "extra": 3}"#;
    assert!(ExperimentConfig::from_json(text).is_err());
}

#[test]
fn weights_encode_exactly() {
    let values = [0.0, -0.0, 1.5, f64::MIN_POSITIVE, -1e300, std::f64::consts::PI];
    let back = decode_f64s(&encode_f64s(&values)).unwrap();
    assert!(values.iter().zip(&back).all(|(a, b)| a.to_bits() == b.to_bits()));
    assert!(decode_f64s("not base64!").is_err());
    assert!(decode_f64s(&encode_f64s(&values)[..4]).is_err());
}

#[test]
fn divergence_strings() {
    assert_eq!(parse_divergence("exact").unwrap(), DivergenceMode::Exact);
    assert_eq!(parse_divergence("hutchinson:4").unwrap(), DivergenceMode::Hutchinson(4));
    assert_eq!(format_divergence(DivergenceMode::Hutchinson(4)), "hutchinson:4");
    assert!(parse_divergence("hutchinson:0").is_err());
    assert!(parse_divergence("trace").is_err());
}

#[test]
fn transform_chain_round_trips() {
    let chain = round_model(&build_example_model(), RoundingOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("chain.json");
    write_json(&path, &TransformChainFile::from_chain(&chain)).unwrap();
    let back = read_json::<TransformChainFile>(&path).unwrap().to_chain().unwrap();
    assert_eq!(back.embedding.free_names, chain.embedding.free_names);
    let y = Vector::from_vec(vec![0.1, -0.2, 0.3, 0.05]);
    assert_eq!(back.lift(&y).unwrap(), chain.lift(&y).unwrap());
}

fn small_config() -> TrainConfig {
    TrainConfig { hidden: vec![8, 8], epochs: 1, batch_size: 16, ..TrainConfig::default() }
}

#[test]
fn ball_checkpoint_reproduces_samples() {
    let chain = round_model(&build_example_model(), RoundingOptions::default()).unwrap();
    let kind = FlowKind::Ball { h: chain.john.clone(), cfg: BallMapConfig::default() };
    let flow = TrainedFlow::untrained(kind, &small_config(), false).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("flow.json");
    write_json(&path, &FlowCheckpoint::from_flow(&flow, None)).unwrap();
    let back = read_json::<FlowCheckpoint>(&path).unwrap().to_flow().unwrap();
    let a = flow.sample(50, &mut stream_rng(1, 0)).unwrap();
    let b = back.sample(50, &mut stream_rng(1, 0)).unwrap();
    assert_eq!(a.v, b.v);
    assert_eq!(a.log_q, b.log_q);
}

#[test]
fn aitchison_checkpoint_reproduces_samples() {
    let chain = round_model(&build_example_model(), RoundingOptions::default()).unwrap();
    let vertices = enumerate_vertices(&chain.john, 1e-9, 5_000_000).unwrap();
    let train = uniform_polytope_samples(&chain.john, 300, 2).unwrap();
    let map = AitchisonMap::fit(vertices, &train, MecOptions::default()).unwrap();
    let map_back = AitchisonFile::from_map(&map).to_map().unwrap();
    let v = train.row(0).transpose();
    assert!((map_back.to_zt(&v).unwrap() - map.to_zt(&v).unwrap()).amax() < 1e-12);
    let flow = TrainedFlow::untrained(FlowKind::Aitchison { map }, &small_config(), false).unwrap();
    let text = serde_json::to_string(&FlowCheckpoint::from_flow(&flow, None)).unwrap();
    let back = serde_json::from_str::<FlowCheckpoint>(&text).unwrap().to_flow().unwrap();
    let a = flow.sample(20, &mut stream_rng(3, 0)).unwrap();
    let b = back.sample(20, &mut stream_rng(3, 0)).unwrap();
    assert_eq!(a.v, b.v);
}

#[test]
fn checkpoint_with_wrong_weight_count_is_rejected() {
    let chain = round_model(&build_example_model(), RoundingOptions::default()).unwrap();
    let kind = FlowKind::Ball { h: chain.john.clone(), cfg: BallMapConfig::default() };
    let flow = TrainedFlow::untrained(kind, &small_config(), false).unwrap();
    let mut ck = FlowCheckpoint::from_flow(&flow, None);
    ck.layer_sizes[1] += 1;
    assert!(ck.to_flow().is_err());
}
