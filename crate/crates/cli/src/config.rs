//! Run configuration: a TOML file, dotted-path overrides from the command
//! line (overrides win), and the resolved record echoed into every output
//! directory.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use geolift::meshing::MeshConfig;
use geolift::network::TrainingConfig;
use geolift::{ShapeKind, ShapeSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

/// Environment variable naming the default root for output directories.
pub const OUTPUT_ROOT_ENV: &str = "GEOLIFT_OUTPUT_ROOT";

/// File name of the effective-config echo written to each output directory.
pub const CONFIG_ECHO: &str = "config.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Run seed; it is copied into the training and mesh sections.
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    /// Upper bound on worker threads. Results never depend on it.
    pub threads: usize,
    pub shape: ShapeConfig,
    pub graph: GraphConfig,
    pub training: TrainingConfig,
    pub mesh: MeshConfig,
    pub eval: EvalConfig,
    pub inputs: InputPaths,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: None,
            threads: 1,
            shape: ShapeConfig::default(),
            graph: GraphConfig::default(),
            training: TrainingConfig::default(),
            mesh: MeshConfig::default(),
            eval: EvalConfig::default(),
            inputs: InputPaths::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeConfig {
    pub n: usize,
    #[serde(flatten)]
    pub spec: ShapeSpec,
}

impl Default for ShapeConfig {
    fn default() -> Self {
        Self {
            n: 4096,
            spec: ShapeSpec::default_for(ShapeKind::Sphere),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphConfig {
    /// Neighbors per vertex of the k-NN graph.
    pub k: usize,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self { k: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Unit-ball samples pushed through the network for evaluation.
    pub samples: usize,
    /// Neighborhood size for normal estimation.
    pub normal_k: usize,
    /// Cluster count for the chart-purity report.
    pub charts: usize,
    pub mre_pairs: usize,
    /// Pairs with a reference geodesic at or below this are not scored.
    pub mre_min_geodesic: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            samples: 10_000,
            normal_k: 16,
            charts: 6,
            mre_pairs: 1000,
            mre_min_geodesic: 0.1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputPaths {
    pub cloud: Option<PathBuf>,
    pub distances: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
}

/// Parses `KEY=VALUE` where `KEY` is a dotted path and `VALUE` a TOML value;
/// values that do not parse as TOML are taken as strings.
pub fn parse_override(arg: &str) -> anyhow::Result<(String, Value)> {
    let (key, raw) = arg
        .split_once('=')
        .with_context(|| format!("override `{arg}` is not of the form key=value"))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        bail!("override `{arg}` has an empty key segment");
    }
    let raw = raw.trim();
    let value = toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

fn set_path(root: &mut Table, key: &str, value: Value) -> anyhow::Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("non-empty key");
    let mut table = root;
    for part in parts {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        table = entry
            .as_table_mut()
            .with_context(|| format!("`{part}` in `{key}` is not a table"))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

/// Fills parameters the `[shape]` table leaves out with the defaults of its kind.
fn complete_shape(root: &mut Table) -> anyhow::Result<()> {
    let Some(shape) = root.get_mut("shape") else {
        return Ok(());
    };
    let shape = shape.as_table_mut().context("`shape` must be a table")?;
    let kind: ShapeKind = match shape.get("kind") {
        None => ShapeKind::Sphere,
        Some(Value::String(s)) => s.parse()?,
        Some(other) => bail!("shape.kind must be a string, got {other}"),
    };
    let defaults = Table::try_from(ShapeSpec::default_for(kind))?;
    for (k, v) in defaults {
        shape.entry(k).or_insert(v);
    }
    shape
        .entry("n".to_string())
        .or_insert(Value::Integer(ShapeConfig::default().n as i64));
    Ok(())
}

impl RunConfig {
    /// Reads an optional config file and applies overrides in order.
    pub fn load(file: Option<&Path>, overrides: &[(String, Value)]) -> anyhow::Result<Self> {
        let mut root = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                toml::from_str::<Table>(&text)
                    .with_context(|| format!("parsing config {}", path.display()))?
            }
            None => Table::new(),
        };
        for (key, value) in overrides {
            set_path(&mut root, key, value.clone())?;
        }
        Self::from_table(root)
    }

    pub fn from_table(mut root: Table) -> anyhow::Result<Self> {
        complete_shape(&mut root)?;
        let mut config: RunConfig = Value::Table(root).try_into()?;
        config.training.seed = config.seed;
        config.mesh.seed = config.seed;
        Ok(config)
    }

    /// Range checks that do not depend on the command.
    pub fn validate(&self) -> anyhow::Result<()> {
        if self.threads == 0 {
            bail!("threads must be at least 1");
        }
        if self.shape.n == 0 {
            bail!("shape.n must be positive");
        }
        self.shape.spec.validate()?;
        if self.graph.k == 0 {
            bail!("graph.k must be positive");
        }
        self.training.validate()?;
        let m = &self.mesh;
        if m.charts == 0 || m.resolution < 2 || m.steps == 0 || m.samples == 0 {
            bail!("mesh needs charts >= 1, resolution >= 2, steps >= 1 and samples >= 1");
        }
        let e = &self.eval;
        if e.samples < 2 || e.normal_k < 3 || e.charts == 0 || e.mre_pairs == 0 {
            bail!("eval needs samples >= 2, normal_k >= 3, charts >= 1 and mre_pairs >= 1");
        }
        if !(e.mre_min_geodesic >= 0.0) {
            bail!("eval.mre_min_geodesic must be non-negative");
        }
        Ok(())
    }

    /// The input at `path`, which must exist.
    pub fn require_input<'a>(
        &self,
        path: &'a Option<PathBuf>,
        what: &str,
    ) -> anyhow::Result<&'a Path> {
        let path = path
            .as_deref()
            .with_context(|| format!("missing input: set inputs.{what}"))?;
        if !path.exists() {
            bail!("input {what} `{}` does not exist", path.display());
        }
        Ok(path)
    }

    /// Explicit `output_dir`, else `$GEOLIFT_OUTPUT_ROOT/<command>`, else `runs/<command>`.
    pub fn output_dir(&self, command: &str) -> PathBuf {
        if let Some(dir) = &self.output_dir {
            return dir.clone();
        }
        let root = std::env::var_os(OUTPUT_ROOT_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("runs"));
        root.join(command)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes to TOML")
    }

    /// SHA-256 of the TOML echo, hex-encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Writes the effective config into `dir`, creating it if needed.
    pub fn echo(&self, dir: &Path) -> anyhow::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(CONFIG_ECHO), self.to_toml())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = RunConfig::default();
        let back = RunConfig::from_table(toml::from_str(&c.to_toml()).unwrap()).unwrap();
        assert_eq!(back, c);
        c.validate().unwrap();
    }

    #[test]
    fn overrides_win_and_shapes_are_completed() {
        let ov = [
            parse_override("shape.kind = \"cube\"").unwrap(),
            parse_override("training.steps=7").unwrap(),
            parse_override("seed=9").unwrap(),
        ];
        let c = RunConfig::load(None, &ov).unwrap();
        assert_eq!(c.shape.spec, ShapeSpec::Cube { edge: 1.0 });
        assert_eq!(c.training.steps, 7);
        assert_eq!((c.training.seed, c.mesh.seed), (9, 9));
    }

    #[test]
    fn bad_configs_are_rejected() {
        assert!(RunConfig::load(None, &[parse_override("shape.kind=blob").unwrap()]).is_err());
        assert!(RunConfig::load(None, &[parse_override("training.nonsense=1").unwrap()]).is_err());
        assert!(parse_override("novalue").is_err());
        assert!(parse_override("a..b=1").is_err());
        let c = RunConfig::load(None, &[parse_override("graph.k=0").unwrap()]).unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn string_fallback_for_bare_words() {
        let (k, v) = parse_override("inputs.cloud=out/cloud.ply").unwrap();
        assert_eq!(k, "inputs.cloud");
        assert_eq!(v, Value::String("out/cloud.ply".into()));
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let b = RunConfig {
            seed: 1,
            ..RunConfig::default()
        };
        assert_eq!(a.hash(), RunConfig::default().hash());
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
