//! Soft geodesic targets for points that are not graph vertices.
//!
//! A query pair `(x_i, x_j)` is attached to the graph through the `k` nearest
//! vertices of each endpoint. Every combination `(v_i^p, v_j^q)` is a
//! candidate route whose unnormalized confidence is the product of two RBF
//! weights, one per endpoint. The target is the confidence-weighted mean of
//! the graph distances `D(v_i^p, v_j^q)`.
//!
//! Because the exponent is a sum of one term per endpoint, the normalized
//! confidence grid factors into an outer product of two per-endpoint softmax
//! vectors. Everything is evaluated in log space with max subtraction, so
//! queries arbitrarily far from the graph still produce a proper
//! distribution.

use crate::geodesic::{GeodesicMatrix, NeighborGraph};
use crate::geometry::nearest_k;
use crate::{Error, Point, Result};

pub const DEFAULT_K_LAMBDA: usize = 4;

#[derive(Debug, Clone)]
pub struct SoftGeodesicContext {
    pub graph: NeighborGraph,
    pub distances: GeodesicMatrix,
    pub k_lambda: usize,
    /// Coefficient on squared distances inside the RBF exponent.
    pub bandwidth: f64,
}

impl SoftGeodesicContext {
    pub fn new(
        graph: NeighborGraph,
        distances: GeodesicMatrix,
        k_lambda: usize,
        bandwidth: f64,
    ) -> Result<Self> {
        if k_lambda == 0 || k_lambda > graph.len() {
            return Err(Error::InvalidInput(format!(
                "k_lambda must lie in 1..={}, got {k_lambda}",
                graph.len()
            )));
        }
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "bandwidth must be positive, got {bandwidth}"
            )));
        }
        if distances.len() != graph.len() {
            return Err(Error::ShapeMismatch(format!(
                "graph has {} vertices but the distance matrix is {}x{}",
                graph.len(),
                distances.len(),
                distances.len()
            )));
        }
        Ok(Self {
            graph,
            distances,
            k_lambda,
            bandwidth,
        })
    }

    /// Context with the default bandwidth `1 / h^2`, `h` the mean graph edge length.
    pub fn with_default_bandwidth(
        graph: NeighborGraph,
        distances: GeodesicMatrix,
        k_lambda: usize,
    ) -> Result<Self> {
        let bandwidth = default_bandwidth(&graph);
        Self::new(graph, distances, k_lambda, bandwidth)
    }

    /// Neighbor set of `x` on the graph together with its normalized weights.
    pub fn attach(&self, x: &Point) -> Attachment {
        let neighbors = nearest_k(&self.graph.positions, x, self.k_lambda, None);
        let logits: Vec<f64> = neighbors
            .iter()
            .map(|&v| -self.bandwidth * (x - self.graph.positions[v]).norm_squared())
            .collect();
        Attachment {
            weights: softmax(&logits),
            neighbors,
        }
    }
}

pub fn default_bandwidth(graph: &NeighborGraph) -> f64 {
    let h = graph.mean_edge_length();
    if h > 0.0 {
        1.0 / (h * h)
    } else {
        1.0
    }
}

/// Gaussian RBF `exp(-bandwidth * |a - b|^2)`.
pub fn rbf(a: &Point, b: &Point, bandwidth: f64) -> f64 {
    (-bandwidth * (a - b).norm_squared()).exp()
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Graph neighbors `Λ(x)` of one query point and their softmax weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Attachment {
    pub neighbors: Vec<usize>,
    pub weights: Vec<f64>,
}

/// Normalized confidence grid for one query pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PathConfidences {
    /// Row-major `k x k`; entry `(p, q)` is the confidence of the route
    /// through `lambda_i[p]` and `lambda_j[q]`.
    pub alpha: Vec<f64>,
    pub lambda_i: Vec<usize>,
    pub lambda_j: Vec<usize>,
}

impl PathConfidences {
    pub fn get(&self, p: usize, q: usize) -> f64 {
        self.alpha[p * self.lambda_j.len() + q]
    }
}

pub fn path_confidences(ctx: &SoftGeodesicContext, x_i: &Point, x_j: &Point) -> PathConfidences {
    let (a, b) = (ctx.attach(x_i), ctx.attach(x_j));
    let alpha = a
        .weights
        .iter()
        .flat_map(|wa| b.weights.iter().map(move |wb| wa * wb))
        .collect();
    PathConfidences {
        alpha,
        lambda_i: a.neighbors,
        lambda_j: b.neighbors,
    }
}

fn lex_le(a: &Point, b: &Point) -> bool {
    a.coords
        .iter()
        .zip(b.coords.iter())
        .find(|(x, y)| x != y)
        .is_none_or(|(x, y)| x < y)
}

/// Combines two attachments. The pair is put in a canonical order first so
/// that swapping the endpoints reproduces the same floating-point sum.
fn combine(
    d: &GeodesicMatrix,
    (xa, a): (&Point, &Attachment),
    (xb, b): (&Point, &Attachment),
) -> f64 {
    let (a, b) = if lex_le(xa, xb) { (a, b) } else { (b, a) };
    let mut g = 0.0;
    for (&vp, &wp) in a.neighbors.iter().zip(&a.weights) {
        let row = d.row(vp);
        let mut inner = 0.0;
        for (&vq, &wq) in b.neighbors.iter().zip(&b.weights) {
            inner += wq * row[vq];
        }
        g += wp * inner;
    }
    g
}

/// Confidence-weighted average of graph distances between the neighbor sets of `x_i` and `x_j`.
pub fn soft_geodesic(ctx: &SoftGeodesicContext, x_i: &Point, x_j: &Point) -> f64 {
    let (a, b) = (ctx.attach(x_i), ctx.attach(x_j));
    combine(&ctx.distances, (x_i, &a), (x_j, &b))
}

/// Soft geodesics for many index pairs into `points`; each point is attached once.
pub fn soft_geodesic_batch(
    ctx: &SoftGeodesicContext,
    points: &[Point],
    pairs: &[(usize, usize)],
) -> Result<Vec<f64>> {
    if let Some(&(i, j)) = pairs
        .iter()
        .find(|&&(i, j)| i >= points.len() || j >= points.len())
    {
        return Err(Error::InvalidInput(format!(
            "pair ({i}, {j}) out of range for {} points",
            points.len()
        )));
    }
    let mut cache: Vec<Option<Attachment>> = vec![None; points.len()];
    for &(i, j) in pairs {
        for k in [i, j] {
            if cache[k].is_none() {
                cache[k] = Some(ctx.attach(&points[k]));
            }
        }
    }
    Ok(pairs
        .iter()
        .map(|&(i, j)| {
            let a = cache[i].as_ref().expect("attached above");
            let b = cache[j].as_ref().expect("attached above");
            combine(&ctx.distances, (&points[i], a), (&points[j], b))
        })
        .collect())
}
