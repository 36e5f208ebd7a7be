//! Explicit surfaces from charts: one small UV network per chart, fitted by
//! Chamfer distance to that chart's predicted points, then triangulated on a
//! regular grid and concatenated into a mesh.

use log::warn;
use nalgebra::SymmetricEigen;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::analysis::{decompose_charts, OrientedPointSet};
use crate::embedding::LiftedEmbedding;
use crate::losses::{chamfer, chamfer_with_grad};
use crate::network::{adam_step, Activation, AdamConfig, AdamState, Mlp};
use crate::{rng_from_seed, Error, Point, Result, Rng, Vector};

pub const MIN_CHART_POINTS: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChartConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    /// UV samples per step are the smallest square count at or above this.
    pub uv_batch: usize,
}

impl Default for ChartConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            learning_rate: 1e-3,
            uv_batch: 400,
        }
    }
}

/// Affine placement of the unit square: `origin + (u - 1/2) axis_u + (v - 1/2) axis_v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartFrame {
    pub origin: Point,
    pub axis_u: Vector,
    pub axis_v: Vector,
}

impl ChartFrame {
    /// Principal plane of the points, spanning their projected extent.
    pub fn fit(points: &[Point]) -> Self {
        let n = points.len().max(1) as f64;
        let mean = points.iter().fold(Vector::zeros(), |a, p| a + p.coords) / n;
        let cov = points.iter().fold(nalgebra::Matrix3::zeros(), |a, p| {
            let d = p.coords - mean;
            a + d * d.transpose()
        }) / n;
        let eig = SymmetricEigen::new(cov);
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let e1: Vector = eig.eigenvectors.column(order[0]).into();
        let e2: Vector = eig.eigenvectors.column(order[1]).into();
        let span = |e: &Vector| {
            points
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                    let t = (p.coords - mean).dot(e);
                    (lo.min(t), hi.max(t))
                })
        };
        let (lo1, hi1) = span(&e1);
        let (lo2, hi2) = span(&e2);
        Self {
            origin: Point::from(mean + e1 * (0.5 * (lo1 + hi1)) + e2 * (0.5 * (lo2 + hi2))),
            axis_u: e1 * (hi1 - lo1),
            axis_v: e2 * (hi2 - lo2),
        }
    }

    fn place(&self, u: f64, v: f64) -> Point {
        self.origin + self.axis_u * (u - 0.5) + self.axis_v * (v - 0.5)
    }
}

/// A fitted chart `f: [0,1]^2 -> R^3`: the chart frame plus a residual UV network.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartSurface {
    pub chart_id: usize,
    pub frame: ChartFrame,
    pub uv_net: Mlp,
    pub fit_trace: Vec<f64>,
}

impl ChartSurface {
    pub fn evaluate(&self, uv: &[[f64; 2]]) -> Vec<Point> {
        let flat: Vec<f64> = uv.iter().flatten().copied().collect();
        let out = self.uv_net.forward(&flat).expect("two-dimensional inputs");
        uv.iter()
            .zip(out.chunks(3))
            .map(|(&[u, v], r)| self.frame.place(u, v) + Vector::new(r[0], r[1], r[2]))
            .collect()
    }
}

/// Jittered grid over the unit square: one uniform sample per cell.
fn stratified_uv(side: usize, rng: &mut Rng) -> Vec<[f64; 2]> {
    let h = 1.0 / side as f64;
    (0..side)
        .flat_map(|i| (0..side).map(move |j| (i, j)))
        .map(|(i, j)| {
            [
                (i as f64 + rng.random::<f64>()) * h,
                (j as f64 + rng.random::<f64>()) * h,
            ]
        })
        .collect()
}

/// Fits one chart surface to `target` with `steps` Adam steps on the
/// symmetric Chamfer distance. The residual network starts at zero output,
/// so the initial surface is the principal plane of the target.
pub fn fit_chart(
    chart_id: usize,
    target: &[Point],
    steps: usize,
    seed: u64,
    config: &ChartConfig,
) -> Result<ChartSurface> {
    if target.len() < MIN_CHART_POINTS {
        return Err(Error::InvalidInput(format!(
            "chart {chart_id} has {} points; at least {MIN_CHART_POINTS} are needed",
            target.len()
        )));
    }
    if steps == 0 {
        return Err(Error::InvalidInput(
            "chart fitting needs at least one step".into(),
        ));
    }
    let mut sizes = vec![2];
    sizes.extend_from_slice(&config.hidden);
    sizes.push(3);
    let mut uv_net = Mlp::init(&sizes, Activation::Tanh, seed)?;
    let out_layer = sizes[sizes.len() - 2] * 3 + 3;
    let total = uv_net.params().len();
    uv_net.params_mut()[total - out_layer..].fill(0.0);

    let mut surface = ChartSurface {
        chart_id,
        frame: ChartFrame::fit(target),
        uv_net,
        fit_trace: Vec::with_capacity(steps),
    };
    let side = (config.uv_batch as f64).sqrt().ceil().max(2.0) as usize;
    let adam_cfg = AdamConfig {
        learning_rate: config.learning_rate,
        ..AdamConfig::default()
    };
    let mut adam = AdamState::new(total);
    let mut rng = rng_from_seed(seed.wrapping_add(0x0c4a));
    for step in 0..steps {
        let uv = stratified_uv(side, &mut rng);
        let flat: Vec<f64> = uv.iter().flatten().copied().collect();
        let tape = surface.uv_net.forward_tape(&flat)?;
        let pts: Vec<Point> = uv
            .iter()
            .zip(tape.output().chunks(3))
            .map(|(&[u, v], r)| surface.frame.place(u, v) + Vector::new(r[0], r[1], r[2]))
            .collect();
        let (value, grad) = chamfer_with_grad(&pts, target)?;
        if !value.is_finite() {
            return Err(Error::Diverged { step, value });
        }
        let upstream: Vec<f64> = grad.iter().flat_map(|g| [g.x, g.y, g.z]).collect();
        let (grads, _) = surface.uv_net.backward(&tape, &upstream)?;
        adam_step(&mut adam, surface.uv_net.params_mut(), &grads, &adam_cfg);
        surface.fit_trace.push(value);
    }
    Ok(surface)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriangleMesh {
    pub vertices: Vec<Point>,
    pub faces: Vec<[usize; 3]>,
    pub face_chart: Vec<usize>,
}

impl TriangleMesh {
    pub fn new(
        vertices: Vec<Point>,
        faces: Vec<[usize; 3]>,
        face_chart: Vec<usize>,
    ) -> Result<Self> {
        if faces.len() != face_chart.len() {
            return Err(Error::ShapeMismatch(
                "one chart id is needed per face".into(),
            ));
        }
        for f in &faces {
            if f.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::InvalidInput(format!(
                    "face {f:?} references a missing vertex"
                )));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::InvalidInput(format!("face {f:?} repeats a vertex")));
            }
        }
        Ok(Self {
            vertices,
            faces,
            face_chart,
        })
    }

    fn cross(&self, f: &[usize; 3]) -> Vector {
        let [a, b, c] = f.map(|i| self.vertices[i]);
        (b - a).cross(&(c - a))
    }

    pub fn face_area(&self, face: usize) -> f64 {
        0.5 * self.cross(&self.faces[face]).norm()
    }

    pub fn face_normal(&self, face: usize) -> Option<Vector> {
        let c = self.cross(&self.faces[face]);
        let n = c.norm();
        (n > 0.0).then(|| c / n)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Distinct chart ids in order of first appearance.
    pub fn charts(&self) -> Vec<usize> {
        let mut seen = Vec::new();
        for &c in &self.face_chart {
            if !seen.contains(&c) {
                seen.push(c);
            }
        }
        seen
    }
}

/// Smallest twice-area below which a triangle counts as degenerate.
const DEGENERATE_AREA: f64 = 1e-18;

/// Evaluates the chart on a `res x res` grid and splits each cell into two
/// triangles with the same winding. Zero-area triangles are dropped.
pub fn triangulate_chart(surface: &ChartSurface, res: usize) -> Result<TriangleMesh> {
    if res < 2 {
        return Err(Error::InvalidInput(format!(
            "grid resolution must be >= 2, got {res}"
        )));
    }
    let step = 1.0 / (res - 1) as f64;
    let uv: Vec<[f64; 2]> = (0..res)
        .flat_map(|i| (0..res).map(move |j| [i as f64 * step, j as f64 * step]))
        .collect();
    let vertices = surface.evaluate(&uv);
    let id = |i: usize, j: usize| i * res + j;
    let mut faces = Vec::with_capacity(2 * (res - 1) * (res - 1));
    for i in 0..res - 1 {
        for j in 0..res - 1 {
            faces.push([id(i, j), id(i + 1, j), id(i, j + 1)]);
            faces.push([id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    let mut mesh = TriangleMesh {
        vertices,
        face_chart: vec![surface.chart_id; faces.len()],
        faces,
    };
    let before = mesh.faces.len();
    let keep: Vec<bool> = mesh
        .faces
        .iter()
        .map(|f| mesh.cross(f).norm() > DEGENERATE_AREA)
        .collect();
    let mut k = keep.iter();
    mesh.faces.retain(|_| *k.next().expect("one flag per face"));
    mesh.face_chart.truncate(mesh.faces.len());
    if mesh.faces.len() < before {
        warn!(
            "chart {}: dropped {} degenerate triangles",
            surface.chart_id,
            before - mesh.faces.len()
        );
    }
    Ok(mesh)
}

/// Concatenates chart meshes, offsetting face indices. No stitching.
pub fn assemble_mesh(charts: &[TriangleMesh]) -> Result<TriangleMesh> {
    if charts.is_empty() {
        return Err(Error::InvalidInput("no chart meshes to assemble".into()));
    }
    let mut out = TriangleMesh::default();
    for m in charts {
        let offset = out.vertices.len();
        out.vertices.extend_from_slice(&m.vertices);
        out.faces
            .extend(m.faces.iter().map(|f| f.map(|v| v + offset)));
        out.face_chart.extend_from_slice(&m.face_chart);
    }
    Ok(out)
}

/// Area-weighted uniform samples on the mesh with the face normal of the
/// triangle each sample lands in.
pub fn sample_mesh_surface(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<OrientedPointSet> {
    let mut cdf = Vec::with_capacity(mesh.faces.len());
    let mut acc = 0.0;
    for f in 0..mesh.faces.len() {
        acc += mesh.face_area(f);
        cdf.push(acc);
    }
    if !(acc > 0.0) {
        return Err(Error::Degenerate("mesh has zero total area".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut points = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    for _ in 0..n {
        let r = rng.random::<f64>() * acc;
        let face = cdf.partition_point(|&c| c <= r).min(mesh.faces.len() - 1);
        let [a, b, c] = mesh.faces[face].map(|i| mesh.vertices[i]);
        let (r1, r2) = (rng.random::<f64>().sqrt(), rng.random::<f64>());
        let (wa, wb, wc) = (1.0 - r1, r1 * (1.0 - r2), r1 * r2);
        points.push(Point::from(a.coords * wa + b.coords * wb + c.coords * wc));
        normals.push(
            mesh.face_normal(face)
                .expect("sampled faces have positive area"),
        );
    }
    OrientedPointSet::new(points, normals)
}

#[derive(Debug, Clone)]
pub struct MeshReconstruction {
    pub mesh: TriangleMesh,
    pub charts: Vec<ChartSurface>,
    /// Charts with too few points to fit.
    pub skipped: Vec<usize>,
    /// Chamfer between mesh samples and the embedding's point coordinates.
    pub chamfer: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    pub charts: usize,
    pub resolution: usize,
    pub steps: usize,
    pub samples: usize,
    pub seed: u64,
    pub chart: ChartConfig,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self {
            charts: 20,
            resolution: 12,
            steps: 100,
            samples: 10_000,
            seed: 0,
            chart: ChartConfig::default(),
        }
    }
}

/// Chart decomposition on the lifting coordinates, one surface per chart,
/// triangulation and assembly.
pub fn reconstruct_mesh(z: &LiftedEmbedding, config: &MeshConfig) -> Result<MeshReconstruction> {
    let charts = decompose_charts(&z.liftings(), config.charts, config.seed)?;
    let points = z.points();
    let mut surfaces = Vec::new();
    let mut skipped = Vec::new();
    for c in 0..charts.k {
        let target: Vec<Point> = charts.members(c).into_iter().map(|i| points[i]).collect();
        if target.len() < MIN_CHART_POINTS {
            warn!("skipping chart {c}: only {} points", target.len());
            skipped.push(c);
            continue;
        }
        surfaces.push(fit_chart(
            c,
            &target,
            config.steps,
            config.seed.wrapping_add(c as u64),
            &config.chart,
        )?);
    }
    let meshes = surfaces
        .iter()
        .map(|s| triangulate_chart(s, config.resolution))
        .collect::<Result<Vec<_>>>()?;
    let mesh = assemble_mesh(&meshes)?;
    let samples = sample_mesh_surface(&mesh, config.samples, config.seed)?;
    let chamfer = chamfer(&samples.points, &points)?;
    Ok(MeshReconstruction {
        mesh,
        charts: surfaces,
        skipped,
        chamfer,
    })
}
