//! Per-object fitting of the mapping network.

use log::{debug, info};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::mlp::Activation;
use super::{layer_sizes, MappingNetwork, DEFAULT_HIDDEN, DEFAULT_LIFTING_DIM};
use crate::embedding::LiftedEmbedding;
use crate::geometry::{longest_side, nearest, sample_unit_ball, sample_unit_ball_with, PointCloud};
use crate::losses::{
    chamfer_with_grad, combine, geodesic_loss_with_grad, GeodesicTarget, LossReport, LossWeights,
};
use crate::soft_geodesic::{soft_geodesic_batch, SoftGeodesicContext, DEFAULT_K_LAMBDA};
use crate::{rng_from_seed, Error, Point, Result, Rng};

/// Sample batches up to this size use every ordered off-diagonal pair.
pub const FULL_PAIR_LIMIT: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub steps: usize,
    pub learning_rate: f64,
    /// When set, the learning rate follows a cosine schedule down to this value.
    pub final_learning_rate: Option<f64>,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub weights: LossWeights,
    /// Pairs per step once the sample batch exceeds [`FULL_PAIR_LIMIT`].
    pub pair_batch: usize,
    /// Unit-ball samples drawn per step.
    pub sample_batch: usize,
    pub seed: u64,
    /// Soft-geodesic neighbor count, used when the context is built.
    pub k_lambda: usize,
    /// Soft-geodesic bandwidth; `None` means `1 / h^2` from the graph.
    pub bandwidth: Option<f64>,
    pub hidden: Vec<usize>,
    pub lifting_dim: usize,
    pub activation: Activation,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            steps: 5000,
            learning_rate: 1e-3,
            final_learning_rate: None,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            weights: LossWeights::default(),
            pair_batch: 8192,
            sample_batch: 2048,
            seed: 0,
            k_lambda: DEFAULT_K_LAMBDA,
            bandwidth: None,
            hidden: DEFAULT_HIDDEN.to_vec(),
            lifting_dim: DEFAULT_LIFTING_DIM,
            activation: Activation::default(),
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if self.steps == 0 {
            return bad("training needs at least one step".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            ));
        }
        if let Some(lr) = self.final_learning_rate {
            if !(lr > 0.0 && lr.is_finite()) {
                return bad(format!("final learning rate must be positive, got {lr}"));
            }
        }
        for (name, b) in [
            ("adam_beta1", self.adam_beta1),
            ("adam_beta2", self.adam_beta2),
        ] {
            if !(0.0..1.0).contains(&b) {
                return bad(format!("{name} must lie in [0, 1), got {b}"));
            }
        }
        if !(self.adam_epsilon > 0.0) {
            return bad("adam_epsilon must be positive".into());
        }
        if self.sample_batch < 2 || self.pair_batch == 0 {
            return bad("sample_batch must be >= 2 and pair_batch >= 1".into());
        }
        if self.k_lambda == 0 {
            return bad("k_lambda must be at least 1".into());
        }
        if let Some(b) = self.bandwidth {
            if !(b > 0.0) {
                return bad(format!("bandwidth must be positive, got {b}"));
            }
        }
        if self.lifting_dim == 0 || self.hidden.contains(&0) {
            return bad("lifting_dim and hidden widths must be positive".into());
        }
        self.weights.validate()
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        layer_sizes(&self.hidden, self.lifting_dim)
    }

    pub(crate) fn adam(&self, step: usize) -> AdamConfig {
        let learning_rate = match self.final_learning_rate {
            None => self.learning_rate,
            Some(end) => {
                let t = step as f64 / self.steps.max(1) as f64;
                end + 0.5 * (self.learning_rate - end) * (1.0 + (std::f64::consts::PI * t).cos())
            }
        };
        AdamConfig {
            learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            epsilon: self.adam_epsilon,
        }
    }
}

/// Ordered pairs `(i, j)`, `i != j`, over a batch of `n` rows: all of them
/// when `n <= FULL_PAIR_LIMIT`, otherwise `pair_batch` drawn uniformly.
pub fn select_pairs(n: usize, pair_batch: usize, rng: &mut Rng) -> Vec<(usize, usize)> {
    if n < 2 {
        return Vec::new();
    }
    if n <= FULL_PAIR_LIMIT {
        return (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .collect();
    }
    (0..pair_batch)
        .map(|_| {
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            (i, j)
        })
        .collect()
}

/// Loss report and upstream gradient (row-major over `z`) of the weighted
/// objective. Soft-geodesic targets are evaluated at the current point
/// coordinates and treated as constants. When `pairs` is a uniform subsample
/// of the ordered pairs, the geodesic term is rescaled so that it estimates
/// the full double sum without bias.
pub fn objective(
    z: &LiftedEmbedding,
    cloud: &[Point],
    ctx: &SoftGeodesicContext,
    weights: LossWeights,
    pairs: &[(usize, usize)],
) -> Result<(LossReport, Vec<f64>)> {
    let n = z.len();
    let dim = z.dim();
    let points = z.points();
    let (chamfer, chamfer_grad) = chamfer_with_grad(&points, cloud)?;
    let g = soft_geodesic_batch(ctx, &points, pairs)?;
    let targets: Vec<GeodesicTarget> = pairs.iter().zip(g).map(|(&(i, j), g)| (i, j, g)).collect();
    let (mut geodesic, mut geo_grad) = geodesic_loss_with_grad(z, &targets)?;
    let all = n * n.saturating_sub(1);
    if !pairs.is_empty() && pairs.len() != all {
        let s = all as f64 / pairs.len() as f64;
        geodesic *= s;
        geo_grad.iter_mut().for_each(|v| *v *= s);
    }
    let mut upstream: Vec<f64> = geo_grad.into_iter().map(|v| v * weights.lambda_g).collect();
    for (i, gc) in chamfer_grad.iter().enumerate() {
        for a in 0..3 {
            upstream[i * dim + a] += weights.lambda_c * gc[a];
        }
    }
    Ok((combine(chamfer, geodesic, pairs.len(), weights), upstream))
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub network: MappingNetwork,
    pub trace: Vec<LossReport>,
}

fn check_normalized(cloud: &PointCloud) -> Result<()> {
    let side = longest_side(&cloud.points);
    if (side - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidInput(format!(
            "cloud must be normalized to the unit box (longest side {side})"
        )));
    }
    Ok(())
}

/// Non-finite network outputs mean the optimizer has blown up.
pub(crate) fn check_finite(z: &LiftedEmbedding, step: usize) -> Result<()> {
    match z.as_slice().iter().find(|v| !v.is_finite()) {
        Some(&value) => Err(Error::Diverged { step, value }),
        None => Ok(()),
    }
}

/// Fits a fresh mapping network to one object.
pub fn fit_object(
    cloud: &PointCloud,
    ctx: &SoftGeodesicContext,
    config: &TrainingConfig,
) -> Result<FitOutcome> {
    config.validate()?;
    check_normalized(cloud)?;
    let mut network = MappingNetwork::init_with(
        &config.layer_sizes(),
        config.lifting_dim,
        config.activation,
        config.seed,
    )?;
    let mut rng = rng_from_seed(config.seed.wrapping_add(0x5eed));
    let mut adam = AdamState::new(network.params().len());
    let mut trace = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        let samples = sample_unit_ball_with(config.sample_batch, &mut rng);
        let (tape, z) = network.forward_tape(&samples);
        check_finite(&z, step)?;
        let pairs = select_pairs(z.len(), config.pair_batch, &mut rng);
        let (report, upstream) = objective(&z, &cloud.points, ctx, config.weights, &pairs)?;
        if !report.total.is_finite() {
            return Err(Error::Diverged {
                step,
                value: report.total,
            });
        }
        let grads = network.backward_tape(&tape, &upstream)?;
        adam_step(&mut adam, network.params_mut(), &grads, &config.adam(step));
        if step % 250 == 0 || step + 1 == config.steps {
            debug!(
                "step {step}: total {:.6} chamfer {:.6} geodesic {:.6}",
                report.total, report.chamfer, report.geodesic
            );
        }
        trace.push(report);
    }
    if let (Some(first), Some(last)) = (trace.first(), trace.last()) {
        info!(
            "fit finished after {} steps: total loss {:.6} -> {:.6}",
            config.steps, first.total, last.total
        );
    }
    Ok(FitOutcome { network, trace })
}

/// Mean relative error `|g_hat - g| / g` of the lifted distances against the
/// graph geodesics between the vertices nearest to each predicted point.
/// Pairs with `g <= min_g` are skipped.
pub fn geodesic_mre(
    network: &MappingNetwork,
    ctx: &SoftGeodesicContext,
    n_samples: usize,
    n_pairs: usize,
    min_g: f64,
    seed: u64,
) -> f64 {
    let z = network.forward(&sample_unit_ball(n_samples, seed));
    let anchors: Vec<usize> = (0..z.len())
        .map(|i| nearest(&ctx.graph.positions, &z.point(i)))
        .collect();
    let mut rng = rng_from_seed(seed.wrapping_add(1));
    let (mut sum, mut count) = (0.0, 0usize);
    let mut attempts = 0;
    while count < n_pairs && attempts < 100 * n_pairs {
        attempts += 1;
        let (i, j) = (rng.random_range(0..z.len()), rng.random_range(0..z.len()));
        let g = ctx.distances.get(anchors[i], anchors[j]);
        if g > min_g {
            sum += (z.lifted_distance(i, j) - g).abs() / g;
            count += 1;
        }
    }
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesic::{all_pairs_geodesics, build_graph};
    use crate::geometry::{gen_shape, normalize_to_unit_box, ShapeSpec};
    use crate::losses::total_loss;

    fn small_setup(n: usize) -> (PointCloud, SoftGeodesicContext) {
        let raw = gen_shape(&ShapeSpec::Sphere { radius: 1.0 }, n, 3).unwrap();
        let (cloud, _) = normalize_to_unit_box(&raw).unwrap();
        let g = build_graph(&cloud, 8).unwrap();
        let d = all_pairs_geodesics(&g);
        let ctx = SoftGeodesicContext::with_default_bandwidth(g, d, 4).unwrap();
        (cloud, ctx)
    }

    fn tiny_config() -> TrainingConfig {
        TrainingConfig {
            steps: 3,
            sample_batch: 16,
            hidden: vec![8],
            lifting_dim: 2,
            ..TrainingConfig::default()
        }
    }

    #[test]
    fn pair_selection() {
        let mut rng = rng_from_seed(0);
        let full = select_pairs(4, 3, &mut rng);
        assert_eq!(full.len(), 12);
        assert!(full.iter().all(|(i, j)| i != j));
        let sampled = select_pairs(2000, 500, &mut rng);
        assert_eq!(sampled.len(), 500);
        assert!(sampled.iter().all(|&(i, j)| i != j && i < 2000 && j < 2000));
    }

    #[test]
    fn objective_matches_total_loss() {
        let (cloud, ctx) = small_setup(300);
        let net = MappingNetwork::init(&layer_sizes(&[8], 2), 2, 1).unwrap();
        let z = net.forward(&sample_unit_ball(10, 2));
        let pairs = select_pairs(10, 0, &mut rng_from_seed(0));
        let (report, upstream) =
            objective(&z, &cloud.points, &ctx, LossWeights::default(), &pairs).unwrap();
        let g = soft_geodesic_batch(&ctx, &z.points(), &pairs).unwrap();
        let targets: Vec<_> = pairs.iter().zip(g).map(|(&(i, j), g)| (i, j, g)).collect();
        let direct = total_loss(
            &z.points(),
            &cloud.points,
            &z,
            &targets,
            LossWeights::default(),
        )
        .unwrap();
        assert!((report.total - direct.total).abs() < 1e-12);
        assert_eq!(upstream.len(), 10 * 5);
    }

    #[test]
    fn end_to_end_gradient_matches_finite_differences() {
        // Targets held fixed, as during training.
        let (cloud, ctx) = small_setup(200);
        for seed in 0..20 {
            let net = MappingNetwork::init(&layer_sizes(&[8], 2), 2, seed).unwrap();
            let samples = sample_unit_ball(6, 50 + seed);
            let z = net.forward(&samples);
            let pairs = select_pairs(6, 0, &mut rng_from_seed(0));
            let g = soft_geodesic_batch(&ctx, &z.points(), &pairs).unwrap();
            let targets: Vec<_> = pairs.iter().zip(g).map(|(&(i, j), g)| (i, j, g)).collect();
            let w = LossWeights::default();
            let loss = |n: &MappingNetwork| {
                let z = n.forward(&samples);
                total_loss(&z.points(), &cloud.points, &z, &targets, w)
                    .unwrap()
                    .total
            };
            let (_, upstream) = objective(&z, &cloud.points, &ctx, w, &pairs).unwrap();
            let analytic = net.backward(&samples, &upstream).unwrap();
            let mut probe = net.clone();
            let (mut num, mut den) = (0.0, 0.0);
            for k in 0..analytic.len() {
                let orig = probe.params()[k];
                probe.params_mut()[k] = orig + 1e-5;
                let up = loss(&probe);
                probe.params_mut()[k] = orig - 1e-5;
                let down = loss(&probe);
                probe.params_mut()[k] = orig;
                let fd = (up - down) / 2e-5;
                num += (fd - analytic[k]).powi(2);
                den += fd * fd;
            }
            let rel = (num / den).sqrt();
            assert!(rel < 1e-4, "seed {seed}: {rel}");
        }
    }

    #[test]
    fn fit_records_trace_and_is_reproducible() {
        let (cloud, ctx) = small_setup(300);
        let cfg = tiny_config();
        let a = fit_object(&cloud, &ctx, &cfg).unwrap();
        let b = fit_object(&cloud, &ctx, &cfg).unwrap();
        assert_eq!(a.trace.len(), 3);
        assert_eq!(a.network, b.network);
        assert_eq!(a.trace, b.trace);
        let one = fit_object(
            &cloud,
            &ctx,
            &TrainingConfig {
                steps: 1,
                ..cfg.clone()
            },
        )
        .unwrap();
        assert_eq!(one.trace.len(), 1);
    }

    #[test]
    fn fit_rejects_bad_inputs() {
        let (cloud, ctx) = small_setup(300);
        let zero = TrainingConfig {
            steps: 0,
            ..tiny_config()
        };
        assert!(matches!(
            fit_object(&cloud, &ctx, &zero),
            Err(Error::InvalidInput(_))
        ));
        let mut big = cloud.clone();
        big.points.iter_mut().for_each(|p| *p *= 3.0);
        assert!(fit_object(&big, &ctx, &tiny_config()).is_err());
        let bad_beta = TrainingConfig {
            adam_beta1: 1.0,
            ..tiny_config()
        };
        assert!(bad_beta.validate().is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let (cloud, ctx) = small_setup(300);
        let cfg = TrainingConfig {
            learning_rate: 1e300,
            steps: 20,
            ..tiny_config()
        };
        match fit_object(&cloud, &ctx, &cfg) {
            Err(Error::Diverged { .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn short_fit_reduces_loss() {
        let (cloud, ctx) = small_setup(500);
        let cfg = TrainingConfig {
            steps: 300,
            sample_batch: 128,
            hidden: vec![32, 32],
            lifting_dim: 4,
            learning_rate: 3e-3,
            ..TrainingConfig::default()
        };
        let fit = fit_object(&cloud, &ctx, &cfg).unwrap();
        let first = fit.trace[0].total;
        let last: f64 = fit.trace[280..].iter().map(|r| r.total).sum::<f64>() / 20.0;
        assert!(last < 0.5 * first, "{first} -> {last}");
    }
}
