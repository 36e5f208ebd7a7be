use crate::{Error, Point, Result};

/// Rows `z_i = [x_i; w_i]` in `R^(3+K)`: point coordinates followed by
/// lifting coordinates. Stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedEmbedding {
    dim: usize,
    data: Vec<f64>,
}

impl LiftedEmbedding {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim < 4 {
            return Err(Error::InvalidInput(format!(
                "embedding width must be 3 + K with K >= 1, got {dim}"
            )));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::ShapeMismatch(format!(
                "{} values do not fill rows of width {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(4, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::ShapeMismatch("rows have different widths".into()));
        }
        Self::new(dim, rows.concat())
    }

    /// Full width `3 + K`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lifting_dim(&self) -> usize {
        self.dim - 3
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn point(&self, i: usize) -> Point {
        let r = self.row(i);
        Point::new(r[0], r[1], r[2])
    }

    pub fn lifting(&self, i: usize) -> &[f64] {
        &self.row(i)[3..]
    }

    /// Point-coordinate view `X`.
    pub fn points(&self) -> Vec<Point> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Lifting-coordinate view `W` as one vector per row.
    pub fn liftings(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.lifting(i).to_vec()).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Predicted geodesic: Euclidean distance between full rows.
    pub fn lifted_distance(&self, i: usize, j: usize) -> f64 {
        sq_dist(self.row(i), self.row(j)).sqrt()
    }

    pub fn point_distance(&self, i: usize, j: usize) -> f64 {
        sq_dist(&self.row(i)[..3], &self.row(j)[..3]).sqrt()
    }

    pub fn lifting_sq_distance(&self, i: usize, j: usize) -> f64 {
        sq_dist(self.lifting(i), self.lifting(j))
    }

    /// Copy with every lifting coordinate set to zero.
    pub fn without_lifting(&self) -> Self {
        let mut out = self.clone();
        for row in out.data.chunks_mut(self.dim) {
            row[3..].fill(0.0);
        }
        out
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
