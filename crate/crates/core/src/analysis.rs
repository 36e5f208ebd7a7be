//! Consumers of a fitted embedding: neighborhoods, normals, normal
//! consistency, chart decomposition and the curvature proxy.

use log::debug;
use nalgebra::{Matrix3, SymmetricEigen};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::embedding::{sq_dist, LiftedEmbedding};
use crate::geometry::{nearest, nearest_k, PointCloud};
use crate::{rng_from_seed, Error, Point, Result, Vector};

pub const DEFAULT_NORMAL_K: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct OrientedPointSet {
    pub points: Vec<Point>,
    pub normals: Vec<Vector>,
}

impl OrientedPointSet {
    pub fn new(points: Vec<Point>, normals: Vec<Vector>) -> Result<Self> {
        if points.len() != normals.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} points with {} normals",
                points.len(),
                normals.len()
            )));
        }
        if normals.iter().any(|n| (n.norm() - 1.0).abs() > 1e-6) {
            return Err(Error::InvalidInput("normals must be unit length".into()));
        }
        Ok(Self { points, normals })
    }

    pub fn from_cloud(cloud: &PointCloud) -> Result<Self> {
        let normals = cloud
            .normals
            .clone()
            .ok_or_else(|| Error::InvalidInput("cloud carries no normals".into()))?;
        Self::new(cloud.points.clone(), normals)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborhoodMode {
    /// 3D distance between point coordinates.
    Euclidean,
    /// Distance between full lifted rows.
    Geodesic,
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k >= n {
        return Err(Error::InvalidInput(format!(
            "neighborhood needs 1 <= k < n, got k = {k}, n = {n}"
        )));
    }
    Ok(())
}

pub fn euclidean_neighborhood(x: &[Point], i: usize, k: usize) -> Result<Vec<usize>> {
    check_k(k, x.len())?;
    Ok(nearest_k(x, &x[i], k, Some(i)))
}

pub fn geodesic_neighborhood(z: &LiftedEmbedding, i: usize, k: usize) -> Result<Vec<usize>> {
    check_k(k, z.len())?;
    let q = z.row(i);
    let mut cand: Vec<(f64, usize)> = (0..z.len())
        .filter(|&j| j != i)
        .map(|j| (sq_dist(q, z.row(j)), j))
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    cand.select_nth_unstable_by(k - 1, cmp);
    cand.truncate(k);
    cand.sort_unstable_by(cmp);
    Ok(cand.into_iter().map(|(_, j)| j).collect())
}

pub fn neighborhood(
    z: &LiftedEmbedding,
    i: usize,
    k: usize,
    mode: NeighborhoodMode,
) -> Result<Vec<usize>> {
    match mode {
        NeighborhoodMode::Euclidean => euclidean_neighborhood(&z.points(), i, k),
        NeighborhoodMode::Geodesic => geodesic_neighborhood(z, i, k),
    }
}

/// Principal-axes normal: eigenvector of the neighborhood covariance with the
/// smallest eigenvalue, signed so its largest-magnitude component is positive.
pub fn estimate_normal(points: &[Point]) -> Result<Vector> {
    if points.len() < 3 {
        return Err(Error::Degenerate(format!(
            "normal estimation needs at least 3 points, got {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mean = points.iter().fold(Vector::zeros(), |acc, p| acc + p.coords) / n;
    let cov = points.iter().fold(Matrix3::zeros(), |acc, p| {
        let d = p.coords - mean;
        acc + d * d.transpose()
    }) / n;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let (mid, top) = (eig.eigenvalues[order[1]], eig.eigenvalues[order[2]]);
    if !(top > 0.0) || mid <= 1e-12 * top {
        return Err(Error::Degenerate(
            "neighborhood is collinear or coincident; the tangent plane is undefined".into(),
        ));
    }
    let mut normal: Vector = eig.eigenvectors.column(order[0]).into();
    normal.normalize_mut();
    let lead = normal.iamax();
    if normal[lead] < 0.0 {
        normal = -normal;
    }
    Ok(normal)
}

/// Oriented predicted set: every row of `z` with a normal estimated from
/// itself plus its `k` neighbors under `mode`.
pub fn estimate_normals(
    z: &LiftedEmbedding,
    k: usize,
    mode: NeighborhoodMode,
) -> Result<OrientedPointSet> {
    let x = z.points();
    check_k(k, x.len())?;
    let normals = (0..x.len())
        .map(|i| {
            let nb = match mode {
                NeighborhoodMode::Euclidean => euclidean_neighborhood(&x, i, k)?,
                NeighborhoodMode::Geodesic => geodesic_neighborhood(z, i, k)?,
            };
            let local: Vec<Point> = std::iter::once(i).chain(nb).map(|j| x[j]).collect();
            // Degenerate neighborhoods fall back to an arbitrary axis; they
            // count against consistency rather than aborting the evaluation.
            Ok(estimate_normal(&local).unwrap_or_else(|_| Vector::z()))
        })
        .collect::<Result<Vec<_>>>()?;
    OrientedPointSet::new(x, normals)
}

/// Mean absolute cosine between each ground-truth normal and the normal of
/// its nearest predicted point.
pub fn normal_consistency(gt: &OrientedPointSet, pred: &OrientedPointSet) -> Result<f64> {
    if gt.is_empty() || pred.is_empty() {
        return Err(Error::InvalidInput(
            "normal consistency of an empty set".into(),
        ));
    }
    let sum: f64 = gt
        .points
        .iter()
        .zip(&gt.normals)
        .map(|(p, n)| n.dot(&pred.normals[nearest(&pred.points, p)]).abs())
        .sum();
    Ok((sum / gt.len() as f64).clamp(0.0, 1.0))
}

/// `g_hat(z_i, z_j)^2 - |x_i - x_j|^2`, which equals `|w_i - w_j|^2`.
pub fn curvature_proxy(z: &LiftedEmbedding, i: usize, j: usize) -> f64 {
    z.lifting_sq_distance(i, j)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChartAssignment {
    pub labels: Vec<usize>,
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squares after each Lloyd iteration.
    pub inertia: Vec<f64>,
}

impl ChartAssignment {
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &l in &self.labels {
            s[l] += 1;
        }
        s
    }

    /// Within-cluster sum of squares of the returned assignment.
    pub fn final_inertia(&self) -> f64 {
        self.inertia.last().copied().unwrap_or(f64::INFINITY)
    }

    pub fn members(&self, chart: usize) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&i| self.labels[i] == chart)
            .collect()
    }
}

pub const KMEANS_MAX_ITERS: usize = 300;
pub const KMEANS_TOL: f64 = 1e-6;
/// Independent k-means++ initializations; the run with the lowest final
/// inertia is kept.
pub const KMEANS_RESTARTS: usize = 10;

/// K-means (k-means++ seeding, Lloyd iterations) on arbitrary-width rows,
/// best of [`KMEANS_RESTARTS`] initializations.
pub fn kmeans(rows: &[Vec<f64>], k: usize, seed: u64) -> Result<ChartAssignment> {
    let n = rows.len();
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!(
            "cluster count must lie in 1..={n}, got {k}"
        )));
    }
    let dim = rows[0].len();
    if rows.iter().any(|r| r.len() != dim) {
        return Err(Error::ShapeMismatch("rows have different widths".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut best: Option<ChartAssignment> = None;
    for _ in 0..KMEANS_RESTARTS {
        let run = lloyd(rows, k, &mut rng);
        let better = match &best {
            None => true,
            Some(b) => run.final_inertia() < b.final_inertia(),
        };
        if better {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn lloyd(rows: &[Vec<f64>], k: usize, rng: &mut crate::Rng) -> ChartAssignment {
    let n = rows.len();
    let dim = rows[0].len();

    // k-means++ seeding
    let mut centroids: Vec<Vec<f64>> = vec![rows[rng.random_range(0..n)].clone()];
    let mut closest: Vec<f64> = rows.iter().map(|r| sq_dist(r, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = closest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in closest.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.push(rows[pick].clone());
        for (c, r) in closest.iter_mut().zip(rows) {
            *c = c.min(sq_dist(r, &centroids[centroids.len() - 1]));
        }
    }

    let assign = |centroids: &[Vec<f64>], labels: &mut [usize]| -> f64 {
        let mut inertia = 0.0;
        for (label, r) in labels.iter_mut().zip(rows) {
            let (mut best, mut arg) = (f64::INFINITY, 0);
            for (c, cen) in centroids.iter().enumerate() {
                let d = sq_dist(r, cen);
                if d < best {
                    best = d;
                    arg = c;
                }
            }
            *label = arg;
            inertia += best;
        }
        inertia
    };

    let mut labels = vec![0usize; n];
    let mut inertia = Vec::new();
    assign(&centroids, &mut labels);
    for iter in 0..KMEANS_MAX_ITERS {
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (r, &l) in rows.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(r) {
                *s += v;
            }
        }
        let mut moved: f64 = 0.0;
        for c in 0..k {
            let next = if counts[c] > 0 {
                sums[c].iter().map(|s| s / counts[c] as f64).collect()
            } else {
                // Re-seed an empty cluster at the point worst served by its centroid.
                let far = (0..n)
                    .max_by(|&a, &b| {
                        sq_dist(&rows[a], &centroids[labels[a]])
                            .total_cmp(&sq_dist(&rows[b], &centroids[labels[b]]))
                            .then(b.cmp(&a))
                    })
                    .expect("n >= k >= 1");
                labels[far] = c;
                rows[far].clone()
            };
            moved = moved.max(sq_dist(&next, &centroids[c]).sqrt());
            centroids[c] = next;
        }
        inertia.push(assign(&centroids, &mut labels));
        if moved < KMEANS_TOL {
            debug!("k-means converged after {} iterations", iter + 1);
            break;
        }
    }
    ChartAssignment {
        labels,
        k,
        centroids,
        inertia,
    }
}

/// Clusters the lifting coordinates of an embedding into `k` charts.
pub fn decompose_charts(w: &[Vec<f64>], k: usize, seed: u64) -> Result<ChartAssignment> {
    kmeans(w, k, seed)
}

/// Size-weighted majority-label fraction of a clustering.
pub fn purity(clusters: &[usize], truth: &[u32]) -> f64 {
    assert_eq!(clusters.len(), truth.len());
    if clusters.is_empty() {
        return 0.0;
    }
    let mut table = std::collections::BTreeMap::<(usize, u32), usize>::new();
    for (&c, &t) in clusters.iter().zip(truth) {
        *table.entry((c, t)).or_default() += 1;
    }
    let mut best = std::collections::BTreeMap::<usize, usize>::new();
    for (&(c, _), &count) in &table {
        let b = best.entry(c).or_default();
        *b = (*b).max(count);
    }
    best.values().sum::<usize>() as f64 / clusters.len() as f64
}

/// Part label of the nearest ground-truth sample for every predicted point.
pub fn transfer_labels(points: &[Point], cloud: &PointCloud) -> Result<Vec<u32>> {
    let labels = cloud
        .labels
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("cloud carries no labels".into()))?;
    Ok(points
        .iter()
        .map(|p| labels[nearest(&cloud.points, p)])
        .collect())
}
