//! Chamfer and geodesic losses and their gradients.

use serde::{Deserialize, Serialize};

use crate::embedding::LiftedEmbedding;
use crate::geometry::nearest;
use crate::{Error, Point, Result, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub lambda_c: f64,
    pub lambda_g: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_c: 1.0,
            lambda_g: 0.1,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.lambda_c) || !ok(self.lambda_g) {
            return Err(Error::InvalidInput(format!(
                "loss weights must be finite and nonnegative, got {self:?}"
            )));
        }
        if self.lambda_c == 0.0 && self.lambda_g == 0.0 {
            return Err(Error::InvalidInput(
                "loss weights cannot both be zero".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub chamfer: f64,
    pub geodesic: f64,
    pub total: f64,
    pub pair_count: usize,
}

/// A supervised pair `(i, j, g_ij)` for the geodesic loss.
pub type GeodesicTarget = (usize, usize, f64);

fn check_nonempty(x: &[Point], y: &[Point]) -> Result<()> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::InvalidInput(
            "Chamfer distance of an empty set".into(),
        ));
    }
    Ok(())
}

/// Nearest-neighbor assignments in both directions.
struct Matching {
    x_to_y: Vec<usize>,
    y_to_x: Vec<usize>,
}

fn matching(x: &[Point], y: &[Point]) -> Matching {
    Matching {
        x_to_y: x.iter().map(|p| nearest(y, p)).collect(),
        y_to_x: y.iter().map(|p| nearest(x, p)).collect(),
    }
}

fn directed(from: &[Point], to: &[Point], assign: &[usize]) -> f64 {
    from.iter()
        .zip(assign)
        .map(|(p, &j)| (p - to[j]).norm_squared())
        .sum::<f64>()
        / from.len() as f64
}

/// Symmetric Chamfer distance: mean squared nearest-neighbor distance from
/// each set to the other, summed over both directions.
pub fn chamfer(x: &[Point], y: &[Point]) -> Result<f64> {
    check_nonempty(x, y)?;
    let m = matching(x, y);
    Ok(directed(x, y, &m.x_to_y) + directed(y, x, &m.y_to_x))
}

/// Chamfer value and its gradient with respect to `x`. Argmin ties resolve
/// to the lowest index, which fixes one subgradient.
pub fn chamfer_with_grad(x: &[Point], y: &[Point]) -> Result<(f64, Vec<Vector>)> {
    check_nonempty(x, y)?;
    let m = matching(x, y);
    let value = directed(x, y, &m.x_to_y) + directed(y, x, &m.y_to_x);
    let (nx, ny) = (x.len() as f64, y.len() as f64);
    let mut grad: Vec<Vector> = x
        .iter()
        .zip(&m.x_to_y)
        .map(|(p, &j)| (p - y[j]) * (2.0 / nx))
        .collect();
    for (q, &i) in y.iter().zip(&m.y_to_x) {
        grad[i] += (x[i] - q) * (2.0 / ny);
    }
    Ok((value, grad))
}

pub fn chamfer_grad(x: &[Point], y: &[Point]) -> Result<Vec<Vector>> {
    chamfer_with_grad(x, y).map(|(_, g)| g)
}

fn check_targets(n: usize, targets: &[GeodesicTarget]) -> Result<()> {
    for &(i, j, g) in targets {
        if i >= n || j >= n {
            return Err(Error::InvalidInput(format!(
                "pair ({i}, {j}) out of range for {n} rows"
            )));
        }
        if !(g >= 0.0) {
            return Err(Error::InvalidInput(format!("negative geodesic target {g}")));
        }
    }
    Ok(())
}

/// `(1/|Z|^2) * sum over supplied pairs of (|z_i - z_j| - g_ij)^2`.
pub fn geodesic_loss(z: &LiftedEmbedding, targets: &[GeodesicTarget]) -> Result<f64> {
    check_targets(z.len(), targets)?;
    if z.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = targets
        .iter()
        .map(|&(i, j, g)| {
            let r = z.lifted_distance(i, j) - g;
            r * r
        })
        .sum();
    Ok(sum / (z.len() * z.len()) as f64)
}

/// Loss value and gradient over every embedding component, row-major like `z`.
/// Coincident rows contribute a zero subgradient.
pub fn geodesic_loss_with_grad(
    z: &LiftedEmbedding,
    targets: &[GeodesicTarget],
) -> Result<(f64, Vec<f64>)> {
    check_targets(z.len(), targets)?;
    let (n, dim) = (z.len(), z.dim());
    let mut grad = vec![0.0; n * dim];
    if n == 0 {
        return Ok((0.0, grad));
    }
    let scale = 1.0 / (n * n) as f64;
    let mut sum = 0.0;
    let mut diff = vec![0.0; dim];
    for &(i, j, g) in targets {
        let (zi, zj) = (z.row(i), z.row(j));
        let mut d2 = 0.0;
        for k in 0..dim {
            diff[k] = zi[k] - zj[k];
            d2 += diff[k] * diff[k];
        }
        let d = d2.sqrt();
        let r = d - g;
        sum += r * r;
        if d > 0.0 {
            let c = 2.0 * scale * r / d;
            for k in 0..dim {
                grad[i * dim + k] += c * diff[k];
                grad[j * dim + k] -= c * diff[k];
            }
        }
    }
    Ok((sum * scale, grad))
}

pub fn geodesic_loss_grad(z: &LiftedEmbedding, targets: &[GeodesicTarget]) -> Result<Vec<f64>> {
    geodesic_loss_with_grad(z, targets).map(|(_, g)| g)
}

/// Weighted objective over a predicted embedding and the ground-truth cloud.
pub fn total_loss(
    x_pred: &[Point],
    y_gt: &[Point],
    z: &LiftedEmbedding,
    targets: &[GeodesicTarget],
    weights: LossWeights,
) -> Result<LossReport> {
    weights.validate()?;
    if x_pred.len() != z.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predicted points for {} embedding rows",
            x_pred.len(),
            z.len()
        )));
    }
    let chamfer = chamfer(x_pred, y_gt)?;
    let geodesic = geodesic_loss(z, targets)?;
    Ok(combine(chamfer, geodesic, targets.len(), weights))
}

pub(crate) fn combine(
    chamfer: f64,
    geodesic: f64,
    pair_count: usize,
    w: LossWeights,
) -> LossReport {
    LossReport {
        chamfer,
        geodesic,
        total: w.lambda_c * chamfer + w.lambda_g * geodesic,
        pair_count,
    }
}
