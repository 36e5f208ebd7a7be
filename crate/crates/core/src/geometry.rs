//! Point clouds, synthetic shapes, canonical-domain sampling and k-NN.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{rng_from_seed, Error, Point, Result, Vector};

const NORMAL_TOL: f64 = 1e-6;

/// Surface samples with optional unit normals and part labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point>,
    pub normals: Option<Vec<Vector>>,
    pub labels: Option<Vec<u32>>,
}

impl PointCloud {
    pub fn new(
        points: Vec<Point>,
        normals: Option<Vec<Vector>>,
        labels: Option<Vec<u32>>,
    ) -> Result<Self> {
        let cloud = Self {
            points,
            normals,
            labels,
        };
        cloud.validate()?;
        Ok(cloud)
    }

    pub fn from_points(points: Vec<Point>) -> Result<Self> {
        Self::new(points, None, None)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(i) = self
            .points
            .iter()
            .position(|p| !p.coords.iter().all(|c| c.is_finite()))
        {
            return Err(Error::InvalidInput(format!("point {i} is not finite")));
        }
        if let Some(normals) = &self.normals {
            if normals.len() != self.points.len() {
                return Err(Error::InvalidInput(format!(
                    "{} normals for {} points",
                    normals.len(),
                    self.points.len()
                )));
            }
            if let Some(i) = normals
                .iter()
                .position(|n| (n.norm() - 1.0).abs() > NORMAL_TOL)
            {
                return Err(Error::InvalidInput(format!(
                    "normal {i} is not unit length"
                )));
            }
        }
        if let Some(labels) = &self.labels {
            if labels.len() != self.points.len() {
                return Err(Error::InvalidInput(format!(
                    "{} labels for {} points",
                    labels.len(),
                    self.points.len()
                )));
            }
        }
        Ok(())
    }
}

/// Samples of the canonical domain (the closed unit ball in `R^3`).
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub samples: Vec<Point>,
    pub domain_dim: usize,
}

impl SampleSet {
    pub fn new(samples: Vec<Point>) -> Result<Self> {
        if let Some(i) = samples.iter().position(|p| p.coords.norm() > 1.0 + 1e-9) {
            return Err(Error::InvalidInput(format!(
                "sample {i} lies outside the unit ball"
            )));
        }
        Ok(Self {
            samples,
            domain_dim: 3,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Uniform scale plus translation taking object coordinates into the unit box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxTransform {
    pub center: [f64; 3],
    /// Longest bounding-box side of the original object.
    pub scale: f64,
}

impl BoxTransform {
    pub fn identity() -> Self {
        Self {
            center: [0.0; 3],
            scale: 1.0,
        }
    }

    pub fn apply(&self, p: &Point) -> Point {
        Point::from((p - Point::from(self.center)) / self.scale)
    }

    pub fn invert(&self, p: &Point) -> Point {
        Point::from(p.coords * self.scale) + Vector::from(self.center)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Sphere,
    Cube,
    CutCylinderBand,
    ThinPlate,
    Torus,
    SwissRoll,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 6] = [
        ShapeKind::Sphere,
        ShapeKind::Cube,
        ShapeKind::CutCylinderBand,
        ShapeKind::ThinPlate,
        ShapeKind::Torus,
        ShapeKind::SwissRoll,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ShapeKind::Sphere => "sphere",
            ShapeKind::Cube => "cube",
            ShapeKind::CutCylinderBand => "cut_cylinder_band",
            ShapeKind::ThinPlate => "thin_plate",
            ShapeKind::Torus => "torus",
            ShapeKind::SwissRoll => "swiss_roll",
        }
    }
}

impl fmt::Display for ShapeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ShapeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ShapeKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownKind(s.to_string()))
    }
}

/// A synthetic shape with its parameters, in object units.
///
/// * `sphere`: centered at the origin.
/// * `cube`: axis aligned, centered; face labels `0..6` are `+x, -x, +y, -y, +z, -z`.
/// * `cut_cylinder_band`: open cylinder around the z axis with height `height`;
///   the angular wedge of width `cut_angle` (radians) centered on the +x axis is
///   removed, so the band is a "C" whose two rims face each other across the gap.
/// * `thin_plate`: box of `size x size x thickness`; labels are 0 top, 1 bottom, 2 edge.
/// * `torus`: around the z axis.
/// * `swiss_roll`: the spiral `r = pitch * t` for `t` in `[t_start, t_end]`,
///   extruded along y over `width`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapeSpec {
    Sphere {
        radius: f64,
    },
    Cube {
        edge: f64,
    },
    CutCylinderBand {
        radius: f64,
        height: f64,
        cut_angle: f64,
    },
    ThinPlate {
        size: f64,
        thickness: f64,
    },
    Torus {
        major_radius: f64,
        minor_radius: f64,
    },
    SwissRoll {
        pitch: f64,
        t_start: f64,
        t_end: f64,
        width: f64,
    },
}

impl ShapeSpec {
    pub fn default_for(kind: ShapeKind) -> Self {
        match kind {
            ShapeKind::Sphere => ShapeSpec::Sphere { radius: 1.0 },
            ShapeKind::Cube => ShapeSpec::Cube { edge: 1.0 },
            ShapeKind::CutCylinderBand => ShapeSpec::CutCylinderBand {
                radius: 1.0,
                height: 0.8,
                cut_angle: PI / 3.0,
            },
            ShapeKind::ThinPlate => ShapeSpec::ThinPlate {
                size: 1.0,
                thickness: 0.02,
            },
            ShapeKind::Torus => ShapeSpec::Torus {
                major_radius: 1.0,
                minor_radius: 0.3,
            },
            ShapeKind::SwissRoll => ShapeSpec::SwissRoll {
                pitch: 0.05,
                t_start: 1.5 * PI,
                t_end: 4.5 * PI,
                width: 1.0,
            },
        }
    }

    pub fn kind(&self) -> ShapeKind {
        match self {
            ShapeSpec::Sphere { .. } => ShapeKind::Sphere,
            ShapeSpec::Cube { .. } => ShapeKind::Cube,
            ShapeSpec::CutCylinderBand { .. } => ShapeKind::CutCylinderBand,
            ShapeSpec::ThinPlate { .. } => ShapeKind::ThinPlate,
            ShapeSpec::Torus { .. } => ShapeKind::Torus,
            ShapeSpec::SwissRoll { .. } => ShapeKind::SwissRoll,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!(
                    "{}: `{name}` must be positive, got {v}",
                    self.kind()
                )))
            }
        };
        match *self {
            ShapeSpec::Sphere { radius } => positive("radius", radius),
            ShapeSpec::Cube { edge } => positive("edge", edge),
            ShapeSpec::CutCylinderBand {
                radius,
                height,
                cut_angle,
            } => {
                positive("radius", radius)?;
                positive("height", height)?;
                if !(0.0..2.0 * PI).contains(&cut_angle) {
                    return Err(Error::InvalidInput(format!(
                        "cut_cylinder_band: cut_angle must lie in [0, 2pi), got {cut_angle}"
                    )));
                }
                Ok(())
            }
            ShapeSpec::ThinPlate { size, thickness } => {
                positive("size", size)?;
                positive("thickness", thickness)
            }
            ShapeSpec::Torus {
                major_radius,
                minor_radius,
            } => {
                positive("major_radius", major_radius)?;
                positive("minor_radius", minor_radius)?;
                if minor_radius >= major_radius {
                    return Err(Error::InvalidInput(
                        "torus: minor_radius must be smaller than major_radius".into(),
                    ));
                }
                Ok(())
            }
            ShapeSpec::SwissRoll {
                pitch,
                t_start,
                t_end,
                width,
            } => {
                positive("pitch", pitch)?;
                positive("width", width)?;
                if !(t_start >= 0.0 && t_end > t_start) {
                    return Err(Error::InvalidInput(
                        "swiss_roll: need 0 <= t_start < t_end".into(),
                    ));
                }
                Ok(())
            }
        }
    }
}

/// Arc length of the spiral `r = t` from 0 to `t` (scale by the pitch for `r = a t`).
pub(crate) fn spiral_arc(t: f64) -> f64 {
    0.5 * (t * (1.0 + t * t).sqrt() + t.asinh())
}

fn invert_spiral_arc(s: f64, lo: f64, hi: f64) -> f64 {
    // spiral_arc is strictly increasing; Newton with a bisection fallback.
    let (mut lo, mut hi) = (lo, hi);
    let mut t = 0.5 * (lo + hi);
    for _ in 0..100 {
        let f = spiral_arc(t) - s;
        if f.abs() < 1e-13 {
            break;
        }
        if f > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        let next = t - f / (1.0 + t * t).sqrt();
        t = if next > lo && next < hi {
            next
        } else {
            0.5 * (lo + hi)
        };
    }
    t
}

/// Samples `n` points uniformly by area on the shape, with analytic normals
/// and part labels where the shape has natural parts.
pub fn gen_shape(spec: &ShapeSpec, n: usize, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::InvalidInput(
            "sample count must be at least 1".into(),
        ));
    }
    spec.validate()?;
    let mut rng = rng_from_seed(seed);
    let mut points = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut has_labels = false;

    match *spec {
        ShapeSpec::Sphere { radius } => {
            for _ in 0..n {
                let d = gaussian_direction(&mut rng);
                points.push(Point::from(d * radius));
                normals.push(d);
            }
        }
        ShapeSpec::Cube { edge } => {
            has_labels = true;
            let h = 0.5 * edge;
            for _ in 0..n {
                let face = rng.random_range(0..6u32);
                let a = rng.random_range(-h..=h);
                let b = rng.random_range(-h..=h);
                let axis = (face / 2) as usize;
                let sign = if face % 2 == 0 { 1.0 } else { -1.0 };
                let mut p = [0.0; 3];
                p[axis] = sign * h;
                p[(axis + 1) % 3] = a;
                p[(axis + 2) % 3] = b;
                let mut nrm = Vector::zeros();
                nrm[axis] = sign;
                points.push(Point::from(p));
                normals.push(nrm);
                labels.push(face);
            }
        }
        ShapeSpec::CutCylinderBand {
            radius,
            height,
            cut_angle,
        } => {
            let lo = 0.5 * cut_angle;
            let hi = 2.0 * PI - 0.5 * cut_angle;
            for _ in 0..n {
                let theta = rng.random_range(lo..=hi);
                let z = rng.random_range(-0.5 * height..=0.5 * height);
                let (s, c) = theta.sin_cos();
                points.push(Point::new(radius * c, radius * s, z));
                normals.push(Vector::new(c, s, 0.0));
            }
        }
        ShapeSpec::ThinPlate { size, thickness } => {
            has_labels = true;
            let face_area = size * size;
            let edge_area = 4.0 * size * thickness;
            let total = 2.0 * face_area + edge_area;
            let (h, t) = (0.5 * size, 0.5 * thickness);
            for _ in 0..n {
                let r = rng.random::<f64>() * total;
                if r < 2.0 * face_area {
                    let top = r < face_area;
                    let x = rng.random_range(-h..=h);
                    let y = rng.random_range(-h..=h);
                    let z = if top { t } else { -t };
                    points.push(Point::new(x, y, z));
                    normals.push(Vector::new(0.0, 0.0, z.signum()));
                    labels.push(if top { 0 } else { 1 });
                } else {
                    let side = rng.random_range(0..4u32);
                    let s = rng.random_range(-h..=h);
                    let z = rng.random_range(-t..=t);
                    let (p, nrm) = match side {
                        0 => (Point::new(h, s, z), Vector::x()),
                        1 => (Point::new(-h, s, z), -Vector::x()),
                        2 => (Point::new(s, h, z), Vector::y()),
                        _ => (Point::new(s, -h, z), -Vector::y()),
                    };
                    points.push(p);
                    normals.push(nrm);
                    labels.push(2);
                }
            }
        }
        ShapeSpec::Torus {
            major_radius,
            minor_radius,
        } => {
            let (big, small) = (major_radius, minor_radius);
            for _ in 0..n {
                // Area element is proportional to (R + r cos phi); rejection on phi.
                let phi = loop {
                    let phi = rng.random_range(0.0..2.0 * PI);
                    let accept = rng.random::<f64>() * (big + small);
                    if accept <= big + small * phi.cos() {
                        break phi;
                    }
                };
                let theta = rng.random_range(0.0..2.0 * PI);
                let (sp, cp) = phi.sin_cos();
                let (st, ct) = theta.sin_cos();
                let ring = big + small * cp;
                points.push(Point::new(ring * ct, ring * st, small * sp));
                normals.push(Vector::new(cp * ct, cp * st, sp));
            }
        }
        ShapeSpec::SwissRoll {
            pitch,
            t_start,
            t_end,
            width,
        } => {
            let (s0, s1) = (spiral_arc(t_start), spiral_arc(t_end));
            for _ in 0..n {
                let s = rng.random_range(s0..=s1);
                let t = invert_spiral_arc(s, t_start, t_end);
                let y = rng.random_range(-0.5 * width..=0.5 * width);
                let (st, ct) = t.sin_cos();
                points.push(Point::new(pitch * t * ct, y, pitch * t * st));
                let tangent = Vector::new(ct - t * st, 0.0, st + t * ct);
                normals.push(Vector::new(tangent.z, 0.0, -tangent.x).normalize());
            }
        }
    }

    PointCloud::new(points, Some(normals), has_labels.then_some(labels))
}

fn gaussian_direction(rng: &mut crate::Rng) -> Vector {
    loop {
        let v = Vector::new(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        );
        let norm = v.norm();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

/// Axis-aligned bounding box of a point set as `(min, max)`.
pub fn bounding_box(points: &[Point]) -> Option<(Point, Point)> {
    let first = points.first()?;
    let (mut lo, mut hi) = (*first, *first);
    for p in points {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    Some((lo, hi))
}

/// Longest side of the axis-aligned bounding box.
pub fn longest_side(points: &[Point]) -> f64 {
    bounding_box(points)
        .map(|(lo, hi)| (hi - lo).max())
        .unwrap_or(0.0)
}

/// Recenters and uniformly rescales so the bounding box has longest side 1.
pub fn normalize_to_unit_box(cloud: &PointCloud) -> Result<(PointCloud, BoxTransform)> {
    let (lo, hi) = bounding_box(&cloud.points)
        .ok_or_else(|| Error::InvalidInput("cannot normalize an empty cloud".into()))?;
    let extent = (hi - lo).max();
    if !(extent > 0.0) {
        return Err(Error::Degenerate(
            "all points are identical; bounding box has zero extent".into(),
        ));
    }
    let center = nalgebra::center(&lo, &hi);
    let transform = BoxTransform {
        center: center.coords.into(),
        scale: extent,
    };
    let points = cloud.points.iter().map(|p| transform.apply(p)).collect();
    let out = PointCloud {
        points,
        normals: cloud.normals.clone(),
        labels: cloud.labels.clone(),
    };
    Ok((out, transform))
}

/// `n` points distributed uniformly in the closed unit ball.
pub fn sample_unit_ball(n: usize, seed: u64) -> SampleSet {
    let mut rng = rng_from_seed(seed);
    sample_unit_ball_with(n, &mut rng)
}

pub(crate) fn sample_unit_ball_with(n: usize, rng: &mut crate::Rng) -> SampleSet {
    let samples = (0..n)
        .map(|_| {
            let d = gaussian_direction(rng);
            let r = rng.random::<f64>().cbrt();
            Point::from(d * r.min(1.0))
        })
        .collect();
    SampleSet {
        samples,
        domain_dim: 3,
    }
}

/// Indices of the `k` reference points nearest to `query`, ascending by
/// distance with ties broken by ascending index. `exclude` is skipped.
pub fn nearest_k(refs: &[Point], query: &Point, k: usize, exclude: Option<usize>) -> Vec<usize> {
    let mut cand: Vec<(f64, usize)> = refs
        .iter()
        .enumerate()
        .filter(|(j, _)| Some(*j) != exclude)
        .map(|(j, p)| ((p - query).norm_squared(), j))
        .collect();
    let k = k.min(cand.len());
    if k == 0 {
        return Vec::new();
    }
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < cand.len() {
        cand.select_nth_unstable_by(k - 1, cmp);
        cand.truncate(k);
    }
    cand.sort_unstable_by(cmp);
    cand.into_iter().map(|(_, j)| j).collect()
}

/// Index of the single nearest reference point (lowest index on ties).
pub fn nearest(refs: &[Point], query: &Point) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (j, p) in refs.iter().enumerate() {
        let d = (p - query).norm_squared();
        if d < best.0 {
            best = (d, j);
        }
    }
    best.1
}

/// For every point, the indices of its `k` nearest other points.
pub fn knn(points: &[Point], k: usize) -> Result<Vec<Vec<usize>>> {
    let n = points.len();
    if k == 0 || k >= n {
        return Err(Error::InvalidInput(format!(
            "k-NN needs 1 <= k < n, got k = {k}, n = {n}"
        )));
    }
    Ok((0..n)
        .map(|i| nearest_k(points, &points[i], k, Some(i)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cube_faces_are_balanced() {
        let cloud = gen_shape(&ShapeSpec::Cube { edge: 1.0 }, 6000, 1).unwrap();
        assert_eq!(cloud.len(), 6000);
        let labels = cloud.labels.as_ref().unwrap();
        let mut counts = [0usize; 6];
        for &l in labels {
            counts[l as usize] += 1;
        }
        // binomial sd ~ 29; 5 sd band
        for c in counts {
            assert!((c as i64 - 1000).abs() < 150, "{counts:?}");
        }
    }

    #[test]
    fn single_sphere_sample_is_on_surface() {
        let cloud = gen_shape(&ShapeSpec::Sphere { radius: 1.0 }, 1, 0).unwrap();
        assert_eq!(cloud.len(), 1);
        assert_relative_eq!(cloud.points[0].coords.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn thin_plate_thickness_is_exact() {
        let spec = ShapeSpec::ThinPlate {
            size: 1.0,
            thickness: 0.02,
        };
        let cloud = gen_shape(&spec, 4000, 2).unwrap();
        let (lo, hi) = bounding_box(&cloud.points).unwrap();
        assert!((hi.z - lo.z - 0.02).abs() < 1e-9);
        let labels = cloud.labels.unwrap();
        assert!(labels.contains(&0) && labels.contains(&1) && labels.contains(&2));
    }

    #[test]
    fn bad_shapes_are_rejected() {
        assert!(matches!(
            "teapot".parse::<ShapeKind>(),
            Err(Error::UnknownKind(_))
        ));
        assert!(gen_shape(&ShapeSpec::Sphere { radius: -1.0 }, 10, 0).is_err());
        assert!(gen_shape(&ShapeSpec::Cube { edge: 0.0 }, 10, 0).is_err());
        assert!(gen_shape(&ShapeSpec::Cube { edge: 1.0 }, 0, 0).is_err());
    }

    /// Analytic tangent vectors at a sample, used to check the normals.
    fn tangents(spec: &ShapeSpec, p: &Point, label: Option<u32>) -> [Vector; 2] {
        match *spec {
            ShapeSpec::Sphere { .. } => {
                let d = p.coords.normalize();
                let a = if d.x.abs() < 0.9 {
                    Vector::x()
                } else {
                    Vector::y()
                };
                let t1 = d.cross(&a).normalize();
                [t1, d.cross(&t1)]
            }
            ShapeSpec::Cube { .. } => {
                let axis = (label.unwrap() / 2) as usize;
                let mut t1 = Vector::zeros();
                let mut t2 = Vector::zeros();
                t1[(axis + 1) % 3] = 1.0;
                t2[(axis + 2) % 3] = 1.0;
                [t1, t2]
            }
            ShapeSpec::CutCylinderBand { .. } => {
                let theta = p.y.atan2(p.x);
                [Vector::new(-theta.sin(), theta.cos(), 0.0), Vector::z()]
            }
            ShapeSpec::ThinPlate { .. } => [Vector::x(), Vector::y()],
            ShapeSpec::Torus { major_radius, .. } => {
                let theta = p.y.atan2(p.x);
                let ring = (p.x * p.x + p.y * p.y).sqrt();
                let phi = p.z.atan2(ring - major_radius);
                [
                    Vector::new(-theta.sin(), theta.cos(), 0.0),
                    Vector::new(
                        -phi.sin() * theta.cos(),
                        -phi.sin() * theta.sin(),
                        phi.cos(),
                    ),
                ]
            }
            ShapeSpec::SwissRoll { pitch, .. } => {
                let t = (p.x * p.x + p.z * p.z).sqrt() / pitch;
                let (st, ct) = t.sin_cos();
                [
                    Vector::new(ct - t * st, 0.0, st + t * ct).normalize(),
                    Vector::y(),
                ]
            }
        }
    }

    #[test]
    fn normals_are_orthogonal_to_tangent_planes() {
        for kind in ShapeKind::ALL {
            let spec = ShapeSpec::default_for(kind);
            let cloud = gen_shape(&spec, 500, 11).unwrap();
            let normals = cloud.normals.as_ref().unwrap();
            for (i, (p, n)) in cloud.points.iter().zip(normals).enumerate() {
                let label = cloud.labels.as_ref().map(|l| l[i]);
                if kind == ShapeKind::ThinPlate && label == Some(2) {
                    assert!(n.z.abs() < 1e-12);
                    continue;
                }
                for t in tangents(&spec, p, label) {
                    assert!(n.dot(&t).abs() < 1e-6, "{kind}: dot {}", n.dot(&t));
                }
            }
        }
    }

    #[test]
    fn normalize_scales_longest_side() {
        let cloud = PointCloud::from_points(vec![
            Point::new(0.0, 0.0, 0.0),
            Point::new(2.0, 1.0, 1.0),
            Point::new(1.0, 0.5, 0.2),
        ])
        .unwrap();
        let (out, tf) = normalize_to_unit_box(&cloud).unwrap();
        assert_relative_eq!(tf.scale, 2.0);
        assert_eq!(tf.center, [1.0, 0.5, 0.5]);
        let (lo, hi) = bounding_box(&out.points).unwrap();
        assert_relative_eq!((hi - lo).max(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(
            nalgebra::center(&lo, &hi).coords.norm(),
            0.0,
            epsilon = 1e-12
        );
        for (p, q) in cloud.points.iter().zip(&out.points) {
            assert_relative_eq!(*p, tf.invert(q), epsilon = 1e-12);
        }
    }

    #[test]
    fn normalize_is_idempotent() {
        let cloud = gen_shape(&ShapeSpec::Cube { edge: 3.0 }, 300, 4).unwrap();
        let (once, _) = normalize_to_unit_box(&cloud).unwrap();
        let (_, tf) = normalize_to_unit_box(&once).unwrap();
        assert!((tf.scale - 1.0).abs() < 1e-9);
        assert!(Vector::from(tf.center).norm() < 1e-9);
    }

    #[test]
    fn normalize_rejects_zero_extent() {
        let cloud = PointCloud::from_points(vec![Point::new(1.0, 2.0, 3.0); 4]).unwrap();
        assert!(matches!(
            normalize_to_unit_box(&cloud),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn unit_ball_sampling() {
        assert!(sample_unit_ball(0, 3).is_empty());
        let a = sample_unit_ball(1000, 5);
        let b = sample_unit_ball(1000, 5);
        assert_eq!(a, b);
        assert!(a.samples.iter().all(|p| p.coords.norm() <= 1.0));
    }

    #[test]
    fn unit_ball_radial_distribution() {
        let n = 100_000;
        let set = sample_unit_ball(n, 7);
        let mut radii: Vec<f64> = set.samples.iter().map(|p| p.coords.norm()).collect();
        // Monte-Carlo oracle for E|r| = 3/4.
        let mean = radii.iter().sum::<f64>() / n as f64;
        assert!((mean - 0.75).abs() < 0.01, "mean norm {mean}");
        // Kolmogorov-Smirnov distance against F(r) = r^3.
        radii.sort_by(f64::total_cmp);
        let ks = radii
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let f = r.powi(3);
                (f - i as f64 / n as f64)
                    .abs()
                    .max((f - (i + 1) as f64 / n as f64).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.01, "KS statistic {ks}");
    }

    #[test]
    fn knn_collinear() {
        let pts = [
            Point::new(0.0, 0.0, 0.0),
            Point::new(1.0, 0.0, 0.0),
            Point::new(3.0, 0.0, 0.0),
        ];
        assert_eq!(knn(&pts, 1).unwrap(), vec![vec![1], vec![0], vec![1]]);
    }

    #[test]
    fn knn_all_others_and_ties() {
        let pts = [
            Point::new(0.0, 0.0, 0.0),
            Point::new(1.0, 0.0, 0.0),
            Point::new(-1.0, 0.0, 0.0),
            Point::new(0.0, 5.0, 0.0),
        ];
        let all = knn(&pts, 3).unwrap();
        for (i, nb) in all.iter().enumerate() {
            let mut sorted = nb.clone();
            sorted.sort();
            let expect: Vec<usize> = (0..4).filter(|&j| j != i).collect();
            assert_eq!(sorted, expect);
        }
        // points 1 and 2 are equidistant from 0: lower index wins
        assert_eq!(knn(&pts, 1).unwrap()[0], vec![1]);
        assert!(knn(&pts, 4).is_err());
        assert!(knn(&pts, 0).is_err());
    }
}
