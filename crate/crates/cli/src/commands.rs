//! The `gen`, `geodesics`, `fit`, `analyze` and `mesh` commands. Each takes a
//! resolved [`RunConfig`], writes its artifacts plus the config echo into the
//! output directory and returns a summary of what it wrote.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use geolift::analysis::{
    decompose_charts, estimate_normals, normal_consistency, purity, transfer_labels,
    NeighborhoodMode, OrientedPointSet,
};
use geolift::geodesic::{all_pairs_geodesics, build_graph, GeodesicMatrix};
use geolift::geometry::{gen_shape, longest_side, normalize_to_unit_box, sample_unit_ball};
use geolift::io;
use geolift::losses::{chamfer, LossReport};
use geolift::meshing::{reconstruct_mesh, sample_mesh_surface};
use geolift::network::{fit_object, geodesic_mre, Activation, MappingNetwork, TrainingConfig};
use geolift::soft_geodesic::SoftGeodesicContext;
use geolift::{BoxTransform, LiftedEmbedding, PointCloud};
use log::info;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::report::{EvalReport, ReportMetadata};

pub const CLOUD_FILE: &str = "cloud.ply";
pub const DISTANCES_FILE: &str = "distances.ghdm";
pub const GEODESICS_SUMMARY: &str = "geodesics.json";
pub const CHECKPOINT_FILE: &str = "network.ghnn";
pub const TRACE_FILE: &str = "trace.json";
pub const EMBEDDING_FILE: &str = "embedding.txt";
pub const REPORT_FILE: &str = "report.json";
pub const MESH_FILE: &str = "mesh.obj";

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn prepare_dir(config: &RunConfig, command: &str) -> anyhow::Result<PathBuf> {
    config.validate()?;
    let dir = config.output_dir(command);
    config.echo(&dir)?;
    Ok(dir)
}

// ------------------------------------------------------------------ gen

pub fn gen(config: &RunConfig) -> anyhow::Result<PathBuf> {
    let dir = prepare_dir(config, "gen")?;
    let cloud = gen_shape(&config.shape.spec, config.shape.n, config.seed)?;
    let path = dir.join(CLOUD_FILE);
    io::save_cloud(&path, &cloud, "label")?;
    info!(
        "wrote {} {} points to {}",
        cloud.len(),
        config.shape.spec.kind().name(),
        path.display()
    );
    Ok(path)
}

// ------------------------------------------------------------------ geodesics

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeodesicsSummary {
    pub n: usize,
    pub k: usize,
    pub bridges_added: usize,
    pub min_distance: f64,
    pub max_distance: f64,
    pub mean_edge_length: f64,
}

pub fn geodesics(config: &RunConfig) -> anyhow::Result<GeodesicsSummary> {
    let input = config
        .require_input(&config.inputs.cloud, "cloud")?
        .to_path_buf();
    let dir = prepare_dir(config, "geodesics")?;
    let cloud = io::load_cloud(&input)?;
    let graph = build_graph(&cloud, config.graph.k)?;
    if !graph.bridges.is_empty() {
        info!(
            "k-NN graph was disconnected; added {} bridge edges",
            graph.bridges.len()
        );
    }
    let d = all_pairs_geodesics(&graph);
    fs::write(dir.join(DISTANCES_FILE), io::write_matrix(&d))?;
    let summary = GeodesicsSummary {
        n: d.len(),
        k: config.graph.k,
        bridges_added: graph.bridges.len(),
        min_distance: d.min_off_diagonal(),
        max_distance: d.max(),
        mean_edge_length: graph.mean_edge_length(),
    };
    write_json(&dir.join(GEODESICS_SUMMARY), &summary)?;
    Ok(summary)
}

// ------------------------------------------------------------------ fit

/// Everything needed besides the raw parameters to rebuild a checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointSidecar {
    pub layer_sizes: Vec<usize>,
    pub lifting_dim: usize,
    pub activation: Activation,
    pub seed: u64,
    /// Maps the original cloud into the unit box the network lives in.
    pub transform: BoxTransform,
    pub graph_k: usize,
    pub training: TrainingConfig,
}

pub fn sidecar_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("json")
}

/// A cloud normalized to the unit box together with its soft-geodesic context.
pub struct PreparedObject {
    pub cloud: PointCloud,
    pub transform: BoxTransform,
    pub ctx: SoftGeodesicContext,
}

/// Normalizes `cloud` and pairs it with the matching distance matrix (given in
/// the cloud's original units, rescaled here) or, when absent, computes one.
pub fn prepare_object(
    cloud: &PointCloud,
    distances: Option<GeodesicMatrix>,
    graph_k: usize,
    training: &TrainingConfig,
) -> anyhow::Result<PreparedObject> {
    let (normalized, transform) = normalize_to_unit_box(cloud)?;
    let graph = build_graph(&normalized, graph_k)?;
    let d = match distances {
        Some(d) => {
            if d.len() != normalized.len() {
                anyhow::bail!(
                    "distance matrix covers {} points but the cloud has {}",
                    d.len(),
                    normalized.len()
                );
            }
            let n = d.len();
            let scaled = d.as_slice().iter().map(|v| v / transform.scale).collect();
            GeodesicMatrix::from_rows(n, scaled, 1e-5, 1e-6)?
        }
        None => all_pairs_geodesics(&graph),
    };
    let ctx = match training.bandwidth {
        Some(b) => SoftGeodesicContext::new(graph, d, training.k_lambda, b)?,
        None => SoftGeodesicContext::with_default_bandwidth(graph, d, training.k_lambda)?,
    };
    Ok(PreparedObject {
        cloud: normalized,
        transform,
        ctx,
    })
}

fn load_object(
    config: &RunConfig,
    need_distances: bool,
) -> anyhow::Result<(PointCloud, Option<GeodesicMatrix>)> {
    let cloud_path = config.require_input(&config.inputs.cloud, "cloud")?;
    let cloud = io::load_cloud(cloud_path)?;
    let distances = if need_distances || config.inputs.distances.is_some() {
        let path = config.require_input(&config.inputs.distances, "distances")?;
        Some(io::read_matrix(&fs::read(path)?)?)
    } else {
        None
    };
    Ok((cloud, distances))
}

/// Parameters rounded to the precision of the checkpoint, so that an exported
/// embedding is exactly what a reloaded checkpoint produces.
fn round_to_checkpoint(network: &mut MappingNetwork) {
    for p in network.params_mut() {
        *p = *p as f32 as f64;
    }
}

#[derive(Debug, Clone)]
pub struct FitArtifacts {
    pub checkpoint: PathBuf,
    pub trace: Vec<LossReport>,
    pub embedding: LiftedEmbedding,
}

pub fn fit(config: &RunConfig) -> anyhow::Result<FitArtifacts> {
    let (cloud, distances) = load_object(config, true)?;
    let dir = prepare_dir(config, "fit")?;
    let object = prepare_object(&cloud, distances, config.graph.k, &config.training)?;
    let outcome = fit_object(&object.cloud, &object.ctx, &config.training)?;
    let mut network = outcome.network;
    round_to_checkpoint(&mut network);

    let checkpoint = dir.join(CHECKPOINT_FILE);
    fs::write(&checkpoint, io::write_network(network.mlp()))?;
    let sidecar = CheckpointSidecar {
        layer_sizes: network.layer_sizes().to_vec(),
        lifting_dim: network.lifting_dim(),
        activation: config.training.activation,
        seed: config.seed,
        transform: object.transform,
        graph_k: config.graph.k,
        training: config.training.clone(),
    };
    write_json(&sidecar_path(&checkpoint), &sidecar)?;
    write_json(&dir.join(TRACE_FILE), &outcome.trace)?;
    let embedding = embed(&network, config.eval.samples, config.seed);
    fs::write(dir.join(EMBEDDING_FILE), io::write_embedding(&embedding))?;
    Ok(FitArtifacts {
        checkpoint,
        trace: outcome.trace,
        embedding,
    })
}

/// The network's image of `n` seeded unit-ball samples.
pub fn embed(network: &MappingNetwork, n: usize, seed: u64) -> LiftedEmbedding {
    network.forward(&sample_unit_ball(n, seed))
}

pub fn load_checkpoint(path: &Path) -> anyhow::Result<(MappingNetwork, CheckpointSidecar)> {
    let sidecar: CheckpointSidecar = read_json(&sidecar_path(path))?;
    let mlp = io::read_network(&fs::read(path)?, sidecar.activation)?;
    if mlp.layer_sizes() != sidecar.layer_sizes.as_slice() {
        anyhow::bail!(
            "checkpoint layer sizes {:?} disagree with its sidecar {:?}",
            mlp.layer_sizes(),
            sidecar.layer_sizes
        );
    }
    Ok((MappingNetwork::from_mlp(mlp)?, sidecar))
}

// ------------------------------------------------------------------ analyze

/// Chamfer, both normal-consistency variants, geodesic error and chart purity
/// of an embedding against its normalized reference cloud.
pub fn evaluate_embedding(
    z: &LiftedEmbedding,
    reference: &PointCloud,
    config: &RunConfig,
    command: &str,
) -> anyhow::Result<EvalReport> {
    let raw = chamfer(&z.points(), &reference.points)?;
    let mut report = EvalReport::new(
        raw,
        longest_side(&reference.points),
        ReportMetadata::new(command, config.seed, config.hash()),
    );
    if reference.normals.is_some() {
        let gt = OrientedPointSet::from_cloud(reference)?;
        let k = config.eval.normal_k.min(z.len() - 1);
        let euc = estimate_normals(z, k, NeighborhoodMode::Euclidean)?;
        let geo = estimate_normals(z, k, NeighborhoodMode::Geodesic)?;
        report.normal_euc = Some(normal_consistency(&gt, &euc)?);
        report.normal_geo = Some(normal_consistency(&gt, &geo)?);
        report.normal_consistency = report.normal_geo;
    }
    if reference.labels.is_some() && z.len() >= config.eval.charts {
        let charts = decompose_charts(&z.liftings(), config.eval.charts, config.seed)?;
        let truth = transfer_labels(&z.points(), reference)?;
        report.chart_purity = Some(purity(&charts.labels, &truth));
    }
    Ok(report)
}

pub struct AnalyzeArtifacts {
    pub report: EvalReport,
    pub dir: PathBuf,
}

pub fn analyze(config: &RunConfig) -> anyhow::Result<AnalyzeArtifacts> {
    let checkpoint = config
        .require_input(&config.inputs.checkpoint, "checkpoint")?
        .to_path_buf();
    let (cloud, distances) = load_object(config, false)?;
    let dir = prepare_dir(config, "analyze")?;
    let (network, sidecar) = load_checkpoint(&checkpoint)?;
    let z = embed(&network, config.eval.samples, config.seed);
    let (reference, _) = normalize_to_unit_box(&cloud)?;
    let mut report = evaluate_embedding(&z, &reference, config, "analyze")?;

    if let Some(d) = distances {
        let object = prepare_object(&cloud, Some(d), sidecar.graph_k, &sidecar.training)?;
        let mre = geodesic_mre(
            &network,
            &object.ctx,
            config.eval.samples.min(4000),
            config.eval.mre_pairs,
            config.eval.mre_min_geodesic,
            config.seed.wrapping_add(1),
        );
        report.geodesic_mre = mre.is_finite().then_some(mre);
    }

    let k = config.eval.normal_k.min(z.len() - 1);
    for (mode, name) in [
        (NeighborhoodMode::Euclidean, "normals_euc.ply"),
        (NeighborhoodMode::Geodesic, "normals_geo.ply"),
    ] {
        let set = estimate_normals(&z, k, mode)?;
        let cloud = PointCloud::new(set.points, Some(set.normals), None)?;
        io::save_cloud(&dir.join(name), &cloud, "label")?;
    }
    let charts = decompose_charts(&z.liftings(), config.eval.charts.min(z.len()), config.seed)?;
    let labelled = PointCloud::new(
        z.points(),
        None,
        Some(charts.labels.iter().map(|&c| c as u32).collect()),
    )?;
    io::save_cloud(&dir.join("charts.ply"), &labelled, "chart")?;
    write_json(&dir.join(REPORT_FILE), &report)?;
    Ok(AnalyzeArtifacts { report, dir })
}

// ------------------------------------------------------------------ mesh

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeshReport {
    pub eval: EvalReport,
    pub charts_requested: usize,
    pub charts_meshed: usize,
    pub skipped_charts: Vec<usize>,
    /// Chamfer between mesh samples and the embedding it was built from.
    pub chamfer_to_embedding: f64,
    /// First and last value of each chart's fitting trace.
    pub chart_traces: Vec<(usize, f64, f64)>,
    pub vertices: usize,
    pub faces: usize,
}

pub fn mesh(config: &RunConfig) -> anyhow::Result<MeshReport> {
    let checkpoint = config
        .require_input(&config.inputs.checkpoint, "checkpoint")?
        .to_path_buf();
    let cloud_path = config
        .require_input(&config.inputs.cloud, "cloud")?
        .to_path_buf();
    let dir = prepare_dir(config, "mesh")?;
    let (network, _) = load_checkpoint(&checkpoint)?;
    let (reference, _) = normalize_to_unit_box(&io::load_cloud(&cloud_path)?)?;
    let z = embed(&network, config.eval.samples, config.seed);
    let recon = reconstruct_mesh(&z, &config.mesh)?;
    fs::write(dir.join(MESH_FILE), io::write_obj(&recon.mesh))?;

    let samples = sample_mesh_surface(&recon.mesh, config.mesh.samples, config.seed)?;
    let raw = chamfer(&samples.points, &reference.points)?;
    let mut eval = EvalReport::new(
        raw,
        longest_side(&reference.points),
        ReportMetadata::new("mesh", config.seed, config.hash()),
    );
    if reference.normals.is_some() {
        let gamma = normal_consistency(&OrientedPointSet::from_cloud(&reference)?, &samples)?;
        eval.normal_consistency = Some(gamma);
    }
    let report = MeshReport {
        eval,
        charts_requested: config.mesh.charts,
        charts_meshed: recon.charts.len(),
        skipped_charts: recon.skipped.clone(),
        chamfer_to_embedding: recon.chamfer,
        chart_traces: recon
            .charts
            .iter()
            .map(|c| {
                let first = c.fit_trace.first().copied().unwrap_or(f64::NAN);
                let last = c.fit_trace.last().copied().unwrap_or(f64::NAN);
                (c.chart_id, first, last)
            })
            .collect(),
        vertices: recon.mesh.vertices.len(),
        faces: recon.mesh.faces.len(),
    };
    write_json(&dir.join(REPORT_FILE), &report)?;
    Ok(report)
}
