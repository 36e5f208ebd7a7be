//! Ground-truth geodesics: k-NN graphs over surface samples, Dijkstra
//! shortest paths, and closed-form references for the synthetic shapes.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use log::warn;

use crate::geometry::{knn, spiral_arc, PointCloud, ShapeSpec};
use crate::{Error, Point, Result};

/// Symmetric neighbor graph over surface samples, edges weighted by length.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborGraph {
    pub positions: Vec<Point>,
    /// Per vertex, `(neighbor, length)` sorted by neighbor index.
    pub adjacency: Vec<Vec<(usize, f64)>>,
    /// Edges added by [`connect_components`], as `(a, b)` with `a < b`.
    pub bridges: Vec<(usize, usize)>,
}

impl NeighborGraph {
    /// Builds a graph from explicit undirected edges; lengths are Euclidean.
    pub fn from_edges(positions: Vec<Point>, edges: &[(usize, usize)]) -> Result<Self> {
        let n = positions.len();
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n || a == b {
                return Err(Error::InvalidInput(format!("invalid edge ({a}, {b})")));
            }
            let w = (positions[a] - positions[b]).norm();
            adjacency[a].push((b, w));
            adjacency[b].push((a, w));
        }
        for adj in &mut adjacency {
            adj.sort_by_key(|&(j, _)| j);
            adj.dedup_by_key(|&mut (j, _)| j);
        }
        Ok(Self {
            positions,
            adjacency,
            bridges: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Mean length over undirected edges.
    pub fn mean_edge_length(&self) -> f64 {
        let (sum, count) = self
            .adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, adj)| adj.iter().filter(move |(j, _)| *j > i))
            .fold((0.0, 0usize), |(s, c), (_, w)| (s + w, c + 1));
        if count == 0 {
            0.0
        } else {
            sum / count as f64
        }
    }

    /// Connected-component id per vertex, numbered by lowest member index.
    pub fn components(&self) -> Vec<usize> {
        let n = self.len();
        let mut comp = vec![usize::MAX; n];
        let mut next = 0;
        let mut stack = Vec::new();
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            comp[start] = next;
            stack.push(start);
            while let Some(u) = stack.pop() {
                for &(v, _) in &self.adjacency[u] {
                    if comp[v] == usize::MAX {
                        comp[v] = next;
                        stack.push(v);
                    }
                }
            }
            next += 1;
        }
        comp
    }
}

/// Symmetric k-NN graph (union of directed k-NN edges), bridged to be connected.
pub fn build_graph(cloud: &PointCloud, k: usize) -> Result<NeighborGraph> {
    let neighbors = knn(&cloud.points, k)?;
    let edges: Vec<(usize, usize)> = neighbors
        .iter()
        .enumerate()
        .flat_map(|(i, nb)| nb.iter().map(move |&j| (i, j)))
        .collect();
    let graph = NeighborGraph::from_edges(cloud.points.clone(), &edges)?;
    Ok(connect_components(graph))
}

/// Joins disconnected components by greedily adding the globally shortest
/// inter-component edge until one component remains.
pub fn connect_components(mut graph: NeighborGraph) -> NeighborGraph {
    let comp = graph.components();
    let count = comp.iter().copied().max().map_or(0, |m| m + 1);
    if count <= 1 {
        return graph;
    }

    // Closest point pair between every two components.
    let mut best = vec![(f64::INFINITY, 0usize, 0usize); count * count];
    let pts = &graph.positions;
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            let (ci, cj) = (comp[i], comp[j]);
            if ci == cj {
                continue;
            }
            let d = (pts[i] - pts[j]).norm_squared();
            let slot = &mut best[ci.min(cj) * count + ci.max(cj)];
            if d < slot.0 {
                *slot = (d, i, j);
            }
        }
    }
    let mut candidates: Vec<(f64, usize, usize, usize, usize)> = (0..count)
        .flat_map(|a| ((a + 1)..count).map(move |b| (a, b)))
        .map(|(a, b)| {
            let (d, i, j) = best[a * count + b];
            (d, i, j, a, b)
        })
        .collect();
    candidates.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));

    // Kruskal over components: identical to repeatedly merging the two
    // closest components, since merged distances are minima of the parts.
    let mut parent: Vec<usize> = (0..count).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (d2, i, j, a, b) in candidates {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra == rb {
            continue;
        }
        parent[ra.max(rb)] = ra.min(rb);
        let w = d2.sqrt();
        warn!("bridging disconnected components with edge ({i}, {j}) of length {w:.6}");
        for (u, v) in [(i, j), (j, i)] {
            let adj = &mut graph.adjacency[u];
            let at = adj.partition_point(|&(x, _)| x < v);
            adj.insert(at, (v, w));
        }
        graph.bridges.push((i, j));
    }
    graph
}

#[derive(Clone, Copy, PartialEq)]
struct Frontier {
    dist: f64,
    vertex: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then(self.vertex.cmp(&other.vertex))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source shortest-path lengths. Unreachable vertices get `inf`.
pub fn dijkstra_from(graph: &NeighborGraph, source: usize) -> Vec<f64> {
    let n = graph.len();
    assert!(source < n, "source {source} out of range for {n} vertices");
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Reverse(Frontier {
        dist: 0.0,
        vertex: source,
    }));
    while let Some(Reverse(Frontier { dist: d, vertex: u })) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        for &(v, w) in &graph.adjacency[u] {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Reverse(Frontier {
                    dist: nd,
                    vertex: v,
                }));
            }
        }
    }
    dist
}

/// Dense symmetric matrix of graph geodesic distances.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicMatrix {
    n: usize,
    data: Vec<f64>,
}

impl GeodesicMatrix {
    /// Wraps a row-major `n x n` buffer after checking symmetry and the diagonal.
    pub fn from_rows(n: usize, data: Vec<f64>, tol_sym: f64, tol_diag: f64) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::ShapeMismatch(format!(
                "{} entries for a {n}x{n} matrix",
                data.len()
            )));
        }
        for i in 0..n {
            let d = data[i * n + i];
            if !(d.abs() <= tol_diag) {
                return Err(Error::Format(format!(
                    "diagonal entry {i} is {d}, expected 0"
                )));
            }
            for j in (i + 1)..n {
                let (a, b) = (data[i * n + j], data[j * n + i]);
                if !(a >= 0.0) || !((a - b).abs() <= tol_sym) {
                    return Err(Error::Format(format!(
                        "entries ({i}, {j}) = {a} and ({j}, {i}) = {b} are not a symmetric distance"
                    )));
                }
            }
        }
        Ok(Self { n, data })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    /// Smallest off-diagonal entry.
    pub fn min_off_diagonal(&self) -> f64 {
        let mut m = f64::INFINITY;
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    m = m.min(self.get(i, j));
                }
            }
        }
        m
    }
}

/// All-pairs distances from one Dijkstra run per source. Row `i` comes from
/// source `i`; the two float sums along a path in opposite directions can
/// differ in the last bits, so each pair keeps the smaller of the two.
pub fn all_pairs_geodesics(graph: &NeighborGraph) -> GeodesicMatrix {
    let n = graph.len();
    let mut data = Vec::with_capacity(n * n);
    for i in 0..n {
        data.extend(dijkstra_from(graph, i));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let m = data[i * n + j].min(data[j * n + i]);
            data[i * n + j] = m;
            data[j * n + i] = m;
        }
    }
    GeodesicMatrix { n, data }
}

const SURFACE_TOL: f64 = 1e-6;

fn off_surface(what: &str, p: &Point) -> Error {
    Error::InvalidInput(format!("point {p:?} is not on the {what}"))
}

/// Closed-form geodesic length between two points on a synthetic shape.
///
/// Supported: sphere (great circle), cut cylinder band and swiss roll
/// (developable, measured in the unrolled strip), and the faces of cubes and
/// thin plates (straight line within a face, straight line in the unfolding
/// across the shared edge for adjacent faces). Pairs on opposite box faces
/// and tori are not supported.
pub fn analytic_geodesic(spec: &ShapeSpec, p: &Point, q: &Point) -> Result<f64> {
    match *spec {
        ShapeSpec::Sphere { radius } => {
            for x in [p, q] {
                if (x.coords.norm() - radius).abs() > SURFACE_TOL {
                    return Err(off_surface("sphere", x));
                }
            }
            let angle = p
                .coords
                .cross(&q.coords)
                .norm()
                .atan2(p.coords.dot(&q.coords));
            Ok(radius * angle)
        }
        ShapeSpec::CutCylinderBand {
            radius,
            height,
            cut_angle,
        } => {
            let unroll = |x: &Point| -> Result<(f64, f64)> {
                let r = x.x.hypot(x.y);
                let theta = x.y.atan2(x.x).rem_euclid(2.0 * PI);
                let inside = theta >= 0.5 * cut_angle - SURFACE_TOL
                    && theta <= 2.0 * PI - 0.5 * cut_angle + SURFACE_TOL;
                if (r - radius).abs() > SURFACE_TOL
                    || x.z.abs() > 0.5 * height + SURFACE_TOL
                    || !inside
                {
                    return Err(off_surface("cut cylinder band", x));
                }
                Ok((radius * theta, x.z))
            };
            let (a, b) = (unroll(p)?, unroll(q)?);
            Ok((a.0 - b.0).hypot(a.1 - b.1))
        }
        ShapeSpec::SwissRoll {
            pitch,
            t_start,
            t_end,
            width,
        } => {
            let unroll = |x: &Point| -> Result<(f64, f64)> {
                let t = x.x.hypot(x.z) / pitch;
                let phase = (x.z.atan2(x.x) - t).rem_euclid(2.0 * PI);
                let on_spiral =
                    phase.min(2.0 * PI - phase) * t.max(1.0) * pitch < SURFACE_TOL * 10.0;
                if t < t_start - SURFACE_TOL
                    || t > t_end + SURFACE_TOL
                    || x.y.abs() > 0.5 * width + SURFACE_TOL
                    || !on_spiral
                {
                    return Err(off_surface("swiss roll", x));
                }
                Ok((pitch * spiral_arc(t), x.y))
            };
            let (a, b) = (unroll(p)?, unroll(q)?);
            Ok((a.0 - b.0).hypot(a.1 - b.1))
        }
        ShapeSpec::Cube { edge } => box_geodesic([0.5 * edge; 3], p, q),
        ShapeSpec::ThinPlate { size, thickness } => {
            box_geodesic([0.5 * size, 0.5 * size, 0.5 * thickness], p, q)
        }
        ShapeSpec::Torus { .. } => Err(Error::Unsupported(
            "no closed-form geodesic for the torus".into(),
        )),
    }
}

/// `(axis, sign)` of a box face containing `p`.
fn box_face(half: [f64; 3], p: &Point) -> Result<(usize, f64)> {
    for a in 0..3 {
        if p[a].abs() > half[a] + SURFACE_TOL {
            return Err(off_surface("box", p));
        }
    }
    (0..3)
        .find(|&a| (p[a].abs() - half[a]).abs() <= SURFACE_TOL)
        .map(|a| (a, p[a].signum()))
        .ok_or_else(|| off_surface("box", p))
}

fn box_geodesic(half: [f64; 3], p: &Point, q: &Point) -> Result<f64> {
    let (a, sa) = box_face(half, p)?;
    let (b, sb) = box_face(half, q)?;
    if a == b {
        if sa == sb {
            return Ok((p - q).norm());
        }
        return Err(Error::Unsupported(
            "geodesics between opposite box faces".into(),
        ));
    }
    // Unfold q's face about the shared edge into p's plane. In p's face the
    // free coordinates are b and c; q sits at depth (half[a] - |q_a|) past the edge.
    let c = 3 - a - b;
    let depth = half[a] - sa * q[a];
    let unfolded_b = sb * (half[b] + depth);
    let (db, dc) = (p[b] - unfolded_b, p[c] - q[c]);
    // Where the straight unfolded segment meets the hinge line.
    let t = (p[b] - sb * half[b]) / (p[b] - unfolded_b);
    let hinge_c = p[c] + t * (q[c] - p[c]);
    if hinge_c.abs() <= half[c] {
        Ok(db.hypot(dc))
    } else {
        let mut corner = Point::origin();
        corner[a] = sa * half[a];
        corner[b] = sb * half[b];
        corner[c] = hinge_c.signum() * half[c];
        Ok((p - corner).norm() + (corner - q).norm())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::gen_shape;
    use approx::assert_relative_eq;

    fn path_graph() -> NeighborGraph {
        let pts = (0..3).map(|i| Point::new(i as f64, 0.0, 0.0)).collect();
        NeighborGraph::from_edges(pts, &[(0, 1), (1, 2)]).unwrap()
    }

    /// Bellman-Ford relaxation, independent of the heap-based search.
    fn bellman_ford(g: &NeighborGraph, s: usize) -> Vec<f64> {
        let mut d = vec![f64::INFINITY; g.len()];
        d[s] = 0.0;
        for _ in 0..g.len() {
            for u in 0..g.len() {
                for &(v, w) in &g.adjacency[u] {
                    if d[u] + w < d[v] {
                        d[v] = d[u] + w;
                    }
                }
            }
        }
        d
    }

    #[test]
    fn unit_square_graph() {
        let pts = vec![
            Point::new(0.0, 0.0, 0.0),
            Point::new(1.0, 0.0, 0.0),
            Point::new(1.0, 1.0, 0.0),
            Point::new(0.0, 1.0, 0.0),
        ];
        let cloud = PointCloud::from_points(pts).unwrap();
        let g = build_graph(&cloud, 2).unwrap();
        let expect = [[1, 3], [0, 2], [1, 3], [0, 2]];
        for (i, adj) in g.adjacency.iter().enumerate() {
            let idx: Vec<usize> = adj.iter().map(|e| e.0).collect();
            assert_eq!(idx, expect[i]);
            assert!(adj.iter().all(|e| (e.1 - 1.0).abs() < 1e-12));
        }
        assert!(g.bridges.is_empty());
    }

    #[test]
    fn complete_graph_when_k_is_n_minus_one() {
        let cloud = gen_shape(&ShapeSpec::Sphere { radius: 1.0 }, 7, 3).unwrap();
        let g = build_graph(&cloud, 6).unwrap();
        assert_eq!(g.edge_count(), 21);
        assert!(build_graph(&cloud, 7).is_err());
    }

    #[test]
    fn bridges_two_far_clusters() {
        let mut pts = Vec::new();
        for i in 0..5 {
            pts.push(Point::new(i as f64 * 0.1, 0.0, 0.0));
            pts.push(Point::new(100.0 + i as f64 * 0.1, 0.0, 0.0));
        }
        let g = build_graph(&PointCloud::from_points(pts).unwrap(), 2).unwrap();
        assert_eq!(g.components().iter().max(), Some(&0));
        assert_eq!(g.bridges.len(), 1);
    }

    #[test]
    fn bridge_uses_closest_pair() {
        let pts = vec![
            Point::new(0.0, 0.0, 0.0),
            Point::new(1.0, 0.0, 0.0),
            Point::new(6.0, 0.0, 0.0),
            Point::new(7.0, 0.0, 0.0),
        ];
        let g = NeighborGraph::from_edges(pts, &[(0, 1), (2, 3)]).unwrap();
        let g = connect_components(g);
        assert_eq!(g.bridges, vec![(1, 2)]);
        assert_eq!(g.adjacency[1], vec![(0, 1.0), (2, 5.0)]);
        assert_eq!(g.adjacency[2], vec![(1, 5.0), (3, 1.0)]);
    }

    #[test]
    fn three_clusters_need_two_bridges() {
        let centers = [0.0, 50.0, 200.0];
        let pts: Vec<Point> = centers
            .iter()
            .flat_map(|&c| (0..3).map(move |i| Point::new(c, i as f64 * 0.1, 0.0)))
            .collect();
        let g = build_graph(&PointCloud::from_points(pts).unwrap(), 2).unwrap();
        assert_eq!(g.bridges.len(), 2);
        assert_eq!(g.components().iter().max(), Some(&0));
    }

    #[test]
    fn connected_graph_is_unchanged() {
        let g = path_graph();
        assert_eq!(connect_components(g.clone()), g);
    }

    #[test]
    fn path_graph_distances() {
        let g = path_graph();
        assert_eq!(dijkstra_from(&g, 0), vec![0.0, 1.0, 2.0]);
        assert_eq!(bellman_ford(&g, 0), vec![0.0, 1.0, 2.0]);
        let m = all_pairs_geodesics(&g);
        assert_eq!(m.as_slice(), &[0.0, 1.0, 2.0, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0]);
    }

    /// Brute force over all simple paths.
    fn enumerate_paths(g: &NeighborGraph, s: usize, t: usize) -> f64 {
        fn go(
            g: &NeighborGraph,
            u: usize,
            t: usize,
            seen: &mut Vec<bool>,
            acc: f64,
            best: &mut f64,
        ) {
            if u == t {
                *best = best.min(acc);
                return;
            }
            for &(v, w) in &g.adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    go(g, v, t, seen, acc + w, best);
                    seen[v] = false;
                }
            }
        }
        let mut seen = vec![false; g.len()];
        seen[s] = true;
        let mut best = f64::INFINITY;
        go(g, s, t, &mut seen, 0.0, &mut best);
        best
    }

    #[test]
    fn complete_metric_graph_uses_direct_edges() {
        let cloud = gen_shape(&ShapeSpec::Cube { edge: 1.0 }, 7, 9).unwrap();
        let g = build_graph(&cloud, 6).unwrap();
        for s in 0..7 {
            let d = dijkstra_from(&g, s);
            assert_eq!(d[s], 0.0);
            for t in 0..7 {
                let brute = enumerate_paths(&g, s, t);
                assert_relative_eq!(d[t], brute, epsilon = 1e-12);
                assert_relative_eq!(
                    d[t],
                    (cloud.points[s] - cloud.points[t]).norm(),
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn dijkstra_matches_bellman_ford_and_ignores_ordering() {
        let cloud = gen_shape(
            &ShapeSpec::Torus {
                major_radius: 1.0,
                minor_radius: 0.3,
            },
            300,
            5,
        )
        .unwrap();
        let g = build_graph(&cloud, 5).unwrap();
        let mut shuffled = g.clone();
        for adj in &mut shuffled.adjacency {
            adj.reverse();
        }
        for s in [0, 17, 299] {
            let d = dijkstra_from(&g, s);
            let bf = bellman_ford(&g, s);
            for (a, b) in d.iter().zip(&bf) {
                assert_relative_eq!(a, b, epsilon = 1e-12);
            }
            assert_eq!(d, dijkstra_from(&shuffled, s));
        }
    }

    #[test]
    fn geodesic_matrix_invariants() {
        let cloud = gen_shape(&ShapeSpec::Cube { edge: 1.0 }, 400, 8).unwrap();
        let g = build_graph(&cloud, 6).unwrap();
        let m = all_pairs_geodesics(&g);
        let n = m.len();
        for i in 0..n {
            assert_eq!(m.get(i, i), 0.0);
            for j in 0..n {
                assert_eq!(m.get(i, j), m.get(j, i));
                let e = (cloud.points[i] - cloud.points[j]).norm();
                assert!(m.get(i, j) >= e - 1e-12);
            }
        }
        // Rows match single-source runs up to summation order.
        let row = dijkstra_from(&g, 3);
        for (a, b) in m.row(3).iter().zip(&row) {
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
        use rand::Rng as _;
        let mut rng = crate::rng_from_seed(1);
        for _ in 0..10_000 {
            let (i, j, k) = (
                rng.random_range(0..n),
                rng.random_range(0..n),
                rng.random_range(0..n),
            );
            assert!(m.get(i, j) <= (m.get(i, k) + m.get(k, j)) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn analytic_sphere() {
        let s = ShapeSpec::Sphere { radius: 1.0 };
        let p = Point::new(0.0, 0.0, 1.0);
        assert_eq!(analytic_geodesic(&s, &p, &p).unwrap(), 0.0);
        assert_relative_eq!(
            analytic_geodesic(&s, &p, &Point::new(0.0, 0.0, -1.0)).unwrap(),
            PI,
            epsilon = 1e-12
        );
        let s2 = ShapeSpec::Sphere { radius: 2.0 };
        let d =
            analytic_geodesic(&s2, &Point::new(2.0, 0.0, 0.0), &Point::new(0.0, 2.0, 0.0)).unwrap();
        assert_relative_eq!(d, PI, epsilon = 1e-12);
        assert!(analytic_geodesic(&s, &p, &Point::new(0.0, 0.0, 2.0)).is_err());
    }

    #[test]
    fn analytic_sphere_agrees_with_dense_graph() {
        // r = 2, quarter circle; dense sampling keeps the graph overestimate small.
        let spec = ShapeSpec::Sphere { radius: 2.0 };
        let mut cloud = gen_shape(&spec, 3000, 21).unwrap();
        cloud.points.push(Point::new(2.0, 0.0, 0.0));
        cloud.points.push(Point::new(0.0, 2.0, 0.0));
        cloud.normals = None;
        let g = build_graph(&cloud, 10).unwrap();
        let d = dijkstra_from(&g, 3000)[3001];
        assert!((PI - 1e-9..PI * 1.06).contains(&d), "graph distance {d}");
    }

    #[test]
    fn analytic_cylinder_band_and_box() {
        let band = ShapeSpec::CutCylinderBand {
            radius: 1.0,
            height: 1.0,
            cut_angle: PI / 2.0,
        };
        let at = |theta: f64, z: f64| Point::new(theta.cos(), theta.sin(), z);
        // Across the cut the path goes the long way round.
        let d = analytic_geodesic(&band, &at(PI / 4.0 + 0.01, 0.0), &at(-PI / 4.0 - 0.01, 0.0))
            .unwrap();
        assert_relative_eq!(d, 1.5 * PI - 0.02, epsilon = 1e-9);
        let d = analytic_geodesic(&band, &at(PI, -0.3), &at(PI + 0.4, 0.0)).unwrap();
        assert_relative_eq!(d, 0.4f64.hypot(0.3), epsilon = 1e-9);
        assert!(analytic_geodesic(&band, &at(0.0, 0.0), &at(PI, 0.0)).is_err());

        let cube = ShapeSpec::Cube { edge: 2.0 };
        let p = Point::new(1.0, 0.0, 0.0);
        let q = Point::new(0.0, 1.0, 0.0);
        // unfolds into a straight segment of length 2
        assert_relative_eq!(
            analytic_geodesic(&cube, &p, &q).unwrap(),
            2.0,
            epsilon = 1e-12
        );
        let r = Point::new(1.0, 0.5, 0.5);
        assert_relative_eq!(
            analytic_geodesic(&cube, &p, &r).unwrap(),
            0.5f64.hypot(0.5),
            epsilon = 1e-12
        );
        assert!(analytic_geodesic(&cube, &p, &Point::new(-1.0, 0.0, 0.0)).is_err());
        assert!(matches!(
            analytic_geodesic(&ShapeSpec::default_for(crate::ShapeKind::Torus), &p, &q),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn analytic_swiss_roll_matches_graph() {
        let spec = ShapeSpec::default_for(crate::ShapeKind::SwissRoll);
        let cloud = gen_shape(&spec, 3000, 4).unwrap();
        let g = build_graph(&cloud, 8).unwrap();
        let d = dijkstra_from(&g, 0);
        for j in [5, 100, 2000] {
            let exact = analytic_geodesic(&spec, &cloud.points[0], &cloud.points[j]).unwrap();
            assert!(d[j] >= exact - 1e-9);
            assert!(
                d[j] <= exact * 1.1 + 0.02,
                "graph {} vs exact {exact}",
                d[j]
            );
        }
    }
}
