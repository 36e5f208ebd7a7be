//! File formats: XYZ and binary PLY point clouds, the `GHOF-DM1` distance
//! matrix, the `GHOF-NN1` network checkpoint, Wavefront OBJ meshes and
//! plain-text embeddings.
//!
//! Every writer is a pure function of its input, so write -> read -> write
//! reproduces the same bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::embedding::LiftedEmbedding;
use crate::geodesic::GeodesicMatrix;
use crate::geometry::PointCloud;
use crate::meshing::TriangleMesh;
use crate::network::{Activation, Mlp};
use crate::{Error, Point, Result, Vector};

pub const MATRIX_MAGIC: &[u8; 8] = b"GHOF-DM1";
pub const NETWORK_MAGIC: &[u8; 8] = b"GHOF-NN1";

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

// ---------------------------------------------------------------- XYZ

/// `x y z [nx ny nz] [label]` per line.
pub fn write_xyz(cloud: &PointCloud) -> String {
    let mut out = String::new();
    for (i, p) in cloud.points.iter().enumerate() {
        write!(out, "{} {} {}", p.x, p.y, p.z).expect("writing to a String");
        if let Some(n) = &cloud.normals {
            write!(out, " {} {} {}", n[i].x, n[i].y, n[i].z).expect("writing to a String");
        }
        if let Some(l) = &cloud.labels {
            write!(out, " {}", l[i]).expect("writing to a String");
        }
        out.push('\n');
    }
    out
}

/// Parses XYZ text. Column counts: 3 (points), 4 (+label), 6 (+normals),
/// 7 (+normals and label). `#` starts a comment.
pub fn read_xyz(text: &str) -> Result<PointCloud> {
    let mut points = Vec::new();
    let mut normals = Vec::new();
    let mut labels = Vec::new();
    let mut columns = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let cols = *columns.get_or_insert(fields.len());
        if fields.len() != cols || ![3, 4, 6, 7].contains(&cols) {
            return Err(format_err(format!(
                "line {}: expected 3, 4, 6 or 7 columns consistently, found {}",
                lineno + 1,
                fields.len()
            )));
        }
        let num = |k: usize| -> Result<f64> {
            fields[k]
                .parse::<f64>()
                .map_err(|e| format_err(format!("line {}: {e}", lineno + 1)))
        };
        points.push(Point::new(num(0)?, num(1)?, num(2)?));
        if cols >= 6 {
            normals.push(Vector::new(num(3)?, num(4)?, num(5)?));
        }
        if cols == 4 || cols == 7 {
            labels.push(
                fields[cols - 1]
                    .parse::<u32>()
                    .map_err(|e| format_err(format!("line {}: label: {e}", lineno + 1)))?,
            );
        }
    }
    let cols = columns.unwrap_or(3);
    PointCloud::new(
        points,
        (cols >= 6).then_some(normals),
        (cols == 4 || cols == 7).then_some(labels),
    )
}

// ---------------------------------------------------------------- PLY

/// Binary little-endian PLY with float32 coordinates, optional float32
/// normals and an optional int32 property named `label_name`.
pub fn write_ply(cloud: &PointCloud, label_name: &str) -> Vec<u8> {
    let mut header = format!(
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\n",
        cloud.len()
    );
    if cloud.normals.is_some() {
        header.push_str("property float nx\nproperty float ny\nproperty float nz\n");
    }
    if cloud.labels.is_some() {
        writeln!(header, "property int {label_name}").expect("writing to a String");
    }
    header.push_str("end_header\n");
    let mut out = header.into_bytes();
    for (i, p) in cloud.points.iter().enumerate() {
        for c in p.coords.iter() {
            out.extend_from_slice(&(*c as f32).to_le_bytes());
        }
        if let Some(n) = &cloud.normals {
            for c in n[i].iter() {
                out.extend_from_slice(&(*c as f32).to_le_bytes());
            }
        }
        if let Some(l) = &cloud.labels {
            out.extend_from_slice(&(l[i] as i32).to_le_bytes());
        }
    }
    out
}

#[derive(Clone, Copy)]
enum PlyType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl PlyType {
    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "char" | "int8" => PlyType::I8,
            "uchar" | "uint8" => PlyType::U8,
            "short" | "int16" => PlyType::I16,
            "ushort" | "uint16" => PlyType::U16,
            "int" | "int32" => PlyType::I32,
            "uint" | "uint32" => PlyType::U32,
            "float" | "float32" => PlyType::F32,
            "double" | "float64" => PlyType::F64,
            other => return Err(format_err(format!("unsupported PLY type `{other}`"))),
        })
    }

    fn size(self) -> usize {
        match self {
            PlyType::I8 | PlyType::U8 => 1,
            PlyType::I16 | PlyType::U16 => 2,
            PlyType::I32 | PlyType::U32 | PlyType::F32 => 4,
            PlyType::F64 => 8,
        }
    }

    fn read(self, b: &[u8]) -> f64 {
        match self {
            PlyType::I8 => b[0] as i8 as f64,
            PlyType::U8 => b[0] as f64,
            PlyType::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            PlyType::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            PlyType::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            PlyType::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            PlyType::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            PlyType::F64 => f64::from_le_bytes(b[..8].try_into().expect("8 bytes")),
        }
    }
}

/// Reads a binary little-endian PLY vertex element. Integer properties named
/// `label` or `chart` become labels.
pub fn read_ply(bytes: &[u8]) -> Result<PointCloud> {
    const END: &[u8] = b"end_header\n";
    let end = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or_else(|| format_err("PLY header is not terminated"))?;
    let header =
        std::str::from_utf8(&bytes[..end]).map_err(|_| format_err("PLY header is not UTF-8"))?;
    let mut lines = header.lines();
    if lines.next() != Some("ply") {
        return Err(format_err("missing `ply` magic line"));
    }
    let mut count = None;
    let mut props: Vec<(String, PlyType)> = Vec::new();
    let mut in_vertex = false;
    for line in lines {
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            ["format", "binary_little_endian", _] => {}
            ["format", other, _] => {
                return Err(format_err(format!("unsupported PLY format `{other}`")));
            }
            ["comment", ..] | ["obj_info", ..] => {}
            ["element", name, n] => {
                in_vertex = *name == "vertex";
                if in_vertex {
                    count = Some(n.parse::<usize>().map_err(|e| format_err(e.to_string()))?);
                } else if count.is_none() {
                    return Err(format_err("elements before `vertex` are not supported"));
                }
            }
            ["property", "list", ..] if in_vertex => {
                return Err(format_err("list properties on vertices are not supported"));
            }
            ["property", ty, name] if in_vertex => {
                props.push((name.to_string(), PlyType::parse(ty)?))
            }
            ["property", ..] => {}
            _ => return Err(format_err(format!("unexpected PLY header line `{line}`"))),
        }
    }
    let count = count.ok_or_else(|| format_err("PLY has no vertex element"))?;
    let stride: usize = props.iter().map(|(_, t)| t.size()).sum();
    let body = &bytes[end + END.len()..];
    if body.len() < count * stride {
        return Err(format_err(format!(
            "PLY body holds {} bytes, {} vertices need {}",
            body.len(),
            count,
            count * stride
        )));
    }
    let find = |name: &str| props.iter().position(|(n, _)| n == name);
    let (ix, iy, iz) = match (find("x"), find("y"), find("z")) {
        (Some(x), Some(y), Some(z)) => (x, y, z),
        _ => return Err(format_err("PLY vertices need x, y and z")),
    };
    let normal_idx = match (find("nx"), find("ny"), find("nz")) {
        (Some(a), Some(b), Some(c)) => Some((a, b, c)),
        _ => None,
    };
    let label_idx = find("label").or_else(|| find("chart"));
    let offsets: Vec<usize> = props
        .iter()
        .scan(0, |acc, (_, t)| {
            let o = *acc;
            *acc += t.size();
            Some(o)
        })
        .collect();
    let mut points = Vec::with_capacity(count);
    let mut normals = Vec::new();
    let mut labels = Vec::new();
    for v in 0..count {
        let rec = &body[v * stride..(v + 1) * stride];
        let get = |k: usize| props[k].1.read(&rec[offsets[k]..]);
        points.push(Point::new(get(ix), get(iy), get(iz)));
        if let Some((a, b, c)) = normal_idx {
            normals.push(Vector::new(get(a), get(b), get(c)));
        }
        if let Some(k) = label_idx {
            let l = get(k);
            if l < 0.0 {
                return Err(format_err(format!("negative label {l}")));
            }
            labels.push(l as u32);
        }
    }
    PointCloud::new(
        points,
        normal_idx.map(|_| normals),
        label_idx.map(|_| labels),
    )
}

/// Reads `.ply` or XYZ text depending on the file extension.
pub fn load_cloud(path: &Path) -> Result<PointCloud> {
    let bytes = fs::read(path)?;
    if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("ply"))
    {
        read_ply(&bytes)
    } else {
        read_xyz(std::str::from_utf8(&bytes).map_err(|_| format_err("XYZ file is not UTF-8"))?)
    }
}

pub fn save_cloud(path: &Path, cloud: &PointCloud, label_name: &str) -> Result<()> {
    if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("ply"))
    {
        fs::write(path, write_ply(cloud, label_name))?;
    } else {
        fs::write(path, write_xyz(cloud))?;
    }
    Ok(())
}

// ---------------------------------------------------------------- GHOF-DM1

pub fn write_matrix(m: &GeodesicMatrix) -> Vec<u8> {
    let n = m.len();
    let mut out = Vec::with_capacity(16 + 4 * n * n);
    out.extend_from_slice(MATRIX_MAGIC);
    out.extend_from_slice(&(n as u64).to_le_bytes());
    for v in m.as_slice() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

/// Parses a distance matrix, checking symmetry to 1e-5 and a zero diagonal to 1e-6.
pub fn read_matrix(bytes: &[u8]) -> Result<GeodesicMatrix> {
    if bytes.len() < 16 || &bytes[..8] != MATRIX_MAGIC {
        return Err(format_err("missing GHOF-DM1 magic"));
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let expected = n
        .checked_mul(n)
        .and_then(|nn| nn.checked_mul(4))
        .ok_or_else(|| format_err("matrix size overflows"))?;
    if bytes.len() - 16 != expected {
        return Err(format_err(format!(
            "expected {expected} payload bytes for n = {n}, found {}",
            bytes.len() - 16
        )));
    }
    let data = bytes[16..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    GeodesicMatrix::from_rows(n, data, 1e-5, 1e-6)
}

// ---------------------------------------------------------------- GHOF-NN1

/// Magic, `u32` number of layer sizes, each size as `u32`, then float32
/// parameters layer by layer (weights row-major, then biases).
pub fn write_network(net: &Mlp) -> Vec<u8> {
    let sizes = net.layer_sizes();
    let mut out = Vec::with_capacity(12 + 4 * sizes.len() + 4 * net.params().len());
    out.extend_from_slice(NETWORK_MAGIC);
    out.extend_from_slice(&(sizes.len() as u32).to_le_bytes());
    for &s in sizes {
        out.extend_from_slice(&(s as u32).to_le_bytes());
    }
    for p in net.params() {
        out.extend_from_slice(&(*p as f32).to_le_bytes());
    }
    out
}

pub fn read_network(bytes: &[u8], activation: Activation) -> Result<Mlp> {
    if bytes.len() < 12 || &bytes[..8] != NETWORK_MAGIC {
        return Err(format_err("missing GHOF-NN1 magic"));
    }
    let u32_at = |o: usize| -> Result<u32> {
        bytes
            .get(o..o + 4)
            .map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")))
            .ok_or_else(|| format_err("truncated network header"))
    };
    let count = u32_at(8)? as usize;
    let sizes = (0..count)
        .map(|k| u32_at(12 + 4 * k).map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    let start = 12 + 4 * count;
    let expected = crate::network::param_count(&sizes);
    if bytes.len() != start + 4 * expected {
        return Err(format_err(format!(
            "expected {expected} parameters for layer sizes {sizes:?}"
        )));
    }
    let params = bytes[start..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    Mlp::from_params(&sizes, activation, params)
}

// ---------------------------------------------------------------- OBJ

/// `v` lines, then per chart a `usemtl chart_<id>` line followed by its `f` lines (1-based).
pub fn write_obj(mesh: &TriangleMesh) -> String {
    let mut out = String::new();
    for v in &mesh.vertices {
        writeln!(out, "v {} {} {}", v.x, v.y, v.z).expect("writing to a String");
    }
    let mut current = None;
    for (f, &chart) in mesh.faces.iter().zip(&mesh.face_chart) {
        if current != Some(chart) {
            writeln!(out, "usemtl chart_{chart}").expect("writing to a String");
            current = Some(chart);
        }
        writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1).expect("writing to a String");
    }
    out
}

/// Reads vertices and triangular faces; `usemtl chart_<id>` sets the chart of
/// the faces that follow (0 when absent). Polygons are fanned into triangles.
pub fn read_obj(text: &str) -> Result<TriangleMesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut face_chart = Vec::new();
    let mut chart = 0usize;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tok = line.split_whitespace();
        let err = |m: &str| format_err(format!("line {}: {m}", lineno + 1));
        match tok.next() {
            Some("v") => {
                let c: Vec<f64> = tok
                    .take(3)
                    .map(|t| t.parse::<f64>().map_err(|e| err(&e.to_string())))
                    .collect::<Result<_>>()?;
                if c.len() != 3 {
                    return Err(err("vertex needs three coordinates"));
                }
                vertices.push(Point::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let idx: Vec<usize> = tok
                    .map(|t| {
                        let first = t.split('/').next().unwrap_or("");
                        let i: i64 = first.parse().map_err(|_| err("bad face index"))?;
                        let resolved = if i < 0 {
                            vertices.len() as i64 + i
                        } else {
                            i - 1
                        };
                        usize::try_from(resolved).map_err(|_| err("face index out of range"))
                    })
                    .collect::<Result<_>>()?;
                if idx.len() < 3 {
                    return Err(err("face needs at least three vertices"));
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                    face_chart.push(chart);
                }
            }
            Some("usemtl") => {
                chart = tok
                    .next()
                    .and_then(|m| m.strip_prefix("chart_"))
                    .and_then(|id| id.parse().ok())
                    .unwrap_or(0);
            }
            _ => {}
        }
    }
    TriangleMesh::new(vertices, faces, face_chart)
}

// ---------------------------------------------------------------- embeddings

/// One row per line: `x y z w_1 ... w_K`.
pub fn write_embedding(z: &LiftedEmbedding) -> String {
    let mut out = String::new();
    for i in 0..z.len() {
        let row: Vec<String> = z.row(i).iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn read_embedding(text: &str) -> Result<LiftedEmbedding> {
    let rows = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| format_err(e.to_string())))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    LiftedEmbedding::from_rows(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesic::{all_pairs_geodesics, build_graph};
    use crate::geometry::{gen_shape, ShapeSpec};
    use proptest::prelude::*;

    #[test]
    fn xyz_columns() {
        let c = read_xyz("# header\n0 0 0\n1 2 3 # trailing\n\n").unwrap();
        assert_eq!(c.len(), 2);
        assert!(c.normals.is_none() && c.labels.is_none());
        let c = read_xyz("0 0 0 0 0 1 4\n1 1 1 1 0 0 2\n").unwrap();
        assert_eq!(c.labels, Some(vec![4, 2]));
        let c = read_xyz("0 0 0 7\n").unwrap();
        assert_eq!(c.labels, Some(vec![7]));
        assert!(read_xyz("0 0 0\n0 0\n").is_err());
        assert!(read_xyz("0 0 0 0 0 2\n").is_err(), "non-unit normal");
    }

    #[test]
    fn cloud_round_trips() {
        let c = gen_shape(&ShapeSpec::Cube { edge: 1.0 }, 200, 4).unwrap();
        let text = write_xyz(&c);
        let back = read_xyz(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(write_xyz(&back), text);

        let bytes = write_ply(&c, "label");
        let back = read_ply(&bytes).unwrap();
        assert_eq!(back.labels, c.labels);
        assert_eq!(write_ply(&back, "label"), bytes);
        for (a, b) in back.points.iter().zip(&c.points) {
            assert!((a - b).norm() < 1e-6);
        }
        let charts = read_ply(&write_ply(&c, "chart")).unwrap();
        assert_eq!(charts.labels, c.labels);
    }

    #[test]
    fn ply_rejects_garbage() {
        assert!(read_ply(b"not a ply").is_err());
        assert!(read_ply(b"ply\nformat ascii 1.0\nelement vertex 0\nend_header\n").is_err());
        let mut short = write_ply(
            &gen_shape(&ShapeSpec::Sphere { radius: 1.0 }, 5, 0).unwrap(),
            "label",
        );
        short.truncate(short.len() - 3);
        assert!(read_ply(&short).is_err());
    }

    #[test]
    fn matrix_round_trip_and_validation() {
        let cloud = gen_shape(&ShapeSpec::Sphere { radius: 1.0 }, 50, 1).unwrap();
        let m = all_pairs_geodesics(&build_graph(&cloud, 6).unwrap());
        let bytes = write_matrix(&m);
        assert_eq!(&bytes[..8], b"GHOF-DM1");
        assert_eq!(bytes.len(), 16 + 4 * 50 * 50);
        let back = read_matrix(&bytes).unwrap();
        assert_eq!(write_matrix(&back), bytes);
        let mut asym = bytes.clone();
        asym[16 + 4..16 + 8].copy_from_slice(&5.0f32.to_le_bytes());
        assert!(read_matrix(&asym).is_err());
        let mut diag = bytes.clone();
        diag[16..20].copy_from_slice(&1.0f32.to_le_bytes());
        assert!(read_matrix(&diag).is_err());
        assert!(read_matrix(&bytes[..100]).is_err());
    }

    #[test]
    fn network_round_trip() {
        let net = Mlp::init(&[3, 5, 6], Activation::default(), 3).unwrap();
        let bytes = write_network(&net);
        let back = read_network(&bytes, Activation::default()).unwrap();
        assert_eq!(back.layer_sizes(), net.layer_sizes());
        assert_eq!(write_network(&back), bytes);
        assert!(read_network(&bytes[..bytes.len() - 1], Activation::default()).is_err());
    }

    #[test]
    fn obj_round_trip() {
        let mesh = TriangleMesh::new(
            vec![
                Point::new(0.0, 0.0, 0.0),
                Point::new(1.0, 0.0, 0.0),
                Point::new(0.0, 1.0, 0.0),
                Point::new(1.0, 1.0, 0.5),
            ],
            vec![[0, 1, 2], [1, 3, 2]],
            vec![2, 5],
        )
        .unwrap();
        let text = write_obj(&mesh);
        assert!(text.contains("usemtl chart_2") && text.contains("usemtl chart_5"));
        let back = read_obj(&text).unwrap();
        assert_eq!(back, mesh);
        assert_eq!(write_obj(&back), text);
        let quad = read_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1 2/2 3/3 4/4\n").unwrap();
        assert_eq!(quad.faces, vec![[0, 1, 2], [0, 2, 3]]);
        assert!(read_obj("v 0 0 0\nf 1 2 3\n").is_err());
    }

    proptest! {
        #[test]
        fn embedding_text_round_trips(values in proptest::collection::vec(-1e6..1e6f64, 5..60)) {
            let n = values.len() / 5;
            let z = LiftedEmbedding::new(5, values[..n * 5].to_vec()).unwrap();
            let text = write_embedding(&z);
            let back = read_embedding(&text).unwrap();
            prop_assert_eq!(&back, &z);
            prop_assert_eq!(write_embedding(&back), text);
        }
    }
}
