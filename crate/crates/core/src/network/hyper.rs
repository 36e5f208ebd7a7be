//! Code-conditioned hypernetwork: a linear generator that outputs the full
//! parameter vector of a mapping network from a per-shape code.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use super::adam::{adam_step, AdamState};
use super::fit::{check_finite, objective, select_pairs, TrainingConfig};
use super::mlp::{Activation, Mlp};
use super::MappingNetwork;
use crate::geometry::{sample_unit_ball_with, PointCloud};
use crate::losses::LossReport;
use crate::soft_geodesic::SoftGeodesicContext;
use crate::{rng_from_seed, Error, Result};

/// `theta(c) = A c + b`, with `A` of shape `P x code_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperNetwork {
    code_dim: usize,
    target_sizes: Vec<usize>,
    activation: Activation,
    /// `A` row-major followed by `b`.
    params: Vec<f64>,
}

impl HyperNetwork {
    /// `b` starts at a regular mapping-network initialization, `A` at small
    /// Gaussian noise so that distinct codes begin near the same network.
    pub fn init(
        code_dim: usize,
        target_sizes: &[usize],
        activation: Activation,
        seed: u64,
    ) -> Result<Self> {
        if code_dim == 0 {
            return Err(Error::InvalidInput("code_dim must be positive".into()));
        }
        let lifting = target_sizes.last().copied().unwrap_or(0).saturating_sub(3);
        let base = MappingNetwork::init_with(target_sizes, lifting, activation, seed)?;
        let p = base.params().len();
        let mut rng = rng_from_seed(seed.wrapping_add(0xc0de));
        let normal = Normal::new(0.0, 1e-2).expect("valid deviation");
        let mut params: Vec<f64> = (0..p * code_dim).map(|_| normal.sample(&mut rng)).collect();
        params.extend_from_slice(base.params());
        Ok(Self {
            code_dim,
            target_sizes: target_sizes.to_vec(),
            activation,
            params,
        })
    }

    pub fn code_dim(&self) -> usize {
        self.code_dim
    }

    /// Number of mapping-network parameters produced per code.
    pub fn output_len(&self) -> usize {
        self.params.len() / (self.code_dim + 1)
    }

    pub fn generate(&self, code: &[f64]) -> Result<MappingNetwork> {
        if code.len() != self.code_dim {
            return Err(Error::ShapeMismatch(format!(
                "code has {} entries, expected {}",
                code.len(),
                self.code_dim
            )));
        }
        let p = self.output_len();
        let (a, b) = self.params.split_at(p * self.code_dim);
        let theta: Vec<f64> = (0..p)
            .map(|r| {
                let row = &a[r * self.code_dim..(r + 1) * self.code_dim];
                b[r] + row.iter().zip(code).map(|(x, c)| x * c).sum::<f64>()
            })
            .collect();
        MappingNetwork::from_mlp(Mlp::from_params(
            &self.target_sizes,
            self.activation,
            theta,
        )?)
    }
}

pub struct HyperShape<'a> {
    pub code: Vec<f64>,
    pub cloud: &'a PointCloud,
    pub ctx: &'a SoftGeodesicContext,
}

#[derive(Debug, Clone)]
pub struct HyperFitOutcome {
    pub hyper: HyperNetwork,
    /// Final code per shape (unchanged when codes are frozen).
    pub codes: Vec<Vec<f64>>,
    /// Per step, one report per shape.
    pub trace: Vec<Vec<LossReport>>,
}

/// Jointly fits the generator and (unless `freeze_codes`) the shape codes
/// against the summed per-shape objective.
pub fn hyper_fit(
    shapes: &[HyperShape<'_>],
    config: &TrainingConfig,
    freeze_codes: bool,
) -> Result<HyperFitOutcome> {
    config.validate()?;
    let code_dim = shapes
        .first()
        .map(|s| s.code.len())
        .ok_or_else(|| Error::InvalidInput("hyper_fit needs at least one shape".into()))?;
    for (i, s) in shapes.iter().enumerate() {
        if s.code.len() != code_dim {
            return Err(Error::ShapeMismatch("codes have different lengths".into()));
        }
        if shapes[..i].iter().any(|o| o.code == s.code) {
            return Err(Error::InvalidInput(format!(
                "shape {i} reuses an earlier code"
            )));
        }
    }
    let mut hyper = HyperNetwork::init(
        code_dim,
        &config.layer_sizes(),
        config.activation,
        config.seed,
    )?;
    let mut codes: Vec<Vec<f64>> = shapes.iter().map(|s| s.code.clone()).collect();
    let p = hyper.output_len();
    let mut adam = AdamState::new(hyper.params.len());
    let mut code_adam: Vec<AdamState> = codes.iter().map(|c| AdamState::new(c.len())).collect();
    let mut rng = rng_from_seed(config.seed.wrapping_add(0x5eed));
    let mut trace = Vec::with_capacity(config.steps);

    for step in 0..config.steps {
        let mut grads = vec![0.0; hyper.params.len()];
        let mut reports = Vec::with_capacity(shapes.len());
        let adam_cfg = config.adam(step);
        for (s, shape) in shapes.iter().enumerate() {
            let net = hyper.generate(&codes[s])?;
            let samples = sample_unit_ball_with(config.sample_batch, &mut rng);
            let (tape, z) = net.forward_tape(&samples);
            check_finite(&z, step)?;
            let pairs = select_pairs(z.len(), config.pair_batch, &mut rng);
            let (report, upstream) =
                objective(&z, &shape.cloud.points, shape.ctx, config.weights, &pairs)?;
            if !report.total.is_finite() {
                return Err(Error::Diverged {
                    step,
                    value: report.total,
                });
            }
            let d_theta = net.backward_tape(&tape, &upstream)?;
            let (ga, gb) = grads.split_at_mut(p * code_dim);
            let (a, _) = hyper.params.split_at(p * code_dim);
            let mut d_code = vec![0.0; code_dim];
            for r in 0..p {
                let g = d_theta[r];
                gb[r] += g;
                for c in 0..code_dim {
                    ga[r * code_dim + c] += g * codes[s][c];
                    d_code[c] += g * a[r * code_dim + c];
                }
            }
            if !freeze_codes {
                adam_step(&mut code_adam[s], &mut codes[s], &d_code, &adam_cfg);
            }
            reports.push(report);
        }
        adam_step(&mut adam, &mut hyper.params, &grads, &adam_cfg);
        trace.push(reports);
    }
    Ok(HyperFitOutcome {
        hyper,
        codes,
        trace,
    })
}

/// Distinct random codes, one per shape.
pub fn random_codes(count: usize, code_dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng_from_seed(seed);
    (0..count)
        .map(|_| (0..code_dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesic::{all_pairs_geodesics, build_graph};
    use crate::geometry::{gen_shape, normalize_to_unit_box, sample_unit_ball, ShapeSpec};
    use crate::losses::chamfer;
    use crate::network::fit_object;

    fn prepared(spec: ShapeSpec, n: usize) -> (PointCloud, SoftGeodesicContext) {
        let (cloud, _) = normalize_to_unit_box(&gen_shape(&spec, n, 1).unwrap()).unwrap();
        let g = build_graph(&cloud, 8).unwrap();
        let d = all_pairs_geodesics(&g);
        (
            cloud,
            SoftGeodesicContext::with_default_bandwidth(g, d, 4).unwrap(),
        )
    }

    fn config(steps: usize) -> TrainingConfig {
        TrainingConfig {
            steps,
            sample_batch: 128,
            hidden: vec![32, 32],
            lifting_dim: 4,
            learning_rate: 3e-3,
            ..TrainingConfig::default()
        }
    }

    #[test]
    fn generated_parameter_count_matches_target() {
        let cfg = config(1);
        let h = HyperNetwork::init(5, &cfg.layer_sizes(), cfg.activation, 0).unwrap();
        let net = h.generate(&[0.1; 5]).unwrap();
        assert_eq!(net.params().len(), h.output_len());
        assert!(h.generate(&[0.1; 4]).is_err());
    }

    #[test]
    fn rejects_duplicate_codes() {
        let (cloud, ctx) = prepared(ShapeSpec::Sphere { radius: 1.0 }, 300);
        let shapes = [
            HyperShape {
                code: vec![1.0, 0.0],
                cloud: &cloud,
                ctx: &ctx,
            },
            HyperShape {
                code: vec![1.0, 0.0],
                cloud: &cloud,
                ctx: &ctx,
            },
        ];
        assert!(hyper_fit(&shapes, &config(1), false).is_err());
        assert!(hyper_fit(&[], &config(1), false).is_err());
    }

    #[test]
    fn single_frozen_code_tracks_plain_fitting() {
        let (cloud, ctx) = prepared(ShapeSpec::Sphere { radius: 1.0 }, 400);
        let cfg = config(300);
        let shapes = [HyperShape {
            code: vec![0.5, -0.5],
            cloud: &cloud,
            ctx: &ctx,
        }];
        let hyper = hyper_fit(&shapes, &cfg, true).unwrap();
        assert_eq!(hyper.codes[0], vec![0.5, -0.5]);
        let plain = fit_object(&cloud, &ctx, &cfg).unwrap();
        let tail = |t: &[f64]| t[t.len() - 20..].iter().sum::<f64>() / 20.0;
        let h: Vec<f64> = hyper.trace.iter().map(|r| r[0].total).collect();
        let f: Vec<f64> = plain.trace.iter().map(|r| r.total).collect();
        let (h, f) = (tail(&h), tail(&f));
        assert!(h < 2.0 * f && f < 2.0 * h, "hyper {h} vs plain {f}");
    }

    #[test]
    fn codes_select_their_shapes() {
        let (sphere, sctx) = prepared(ShapeSpec::Sphere { radius: 1.0 }, 400);
        let (cube, cctx) = prepared(ShapeSpec::Cube { edge: 1.0 }, 400);
        let codes = random_codes(2, 4, 3);
        let shapes = [
            HyperShape {
                code: codes[0].clone(),
                cloud: &sphere,
                ctx: &sctx,
            },
            HyperShape {
                code: codes[1].clone(),
                cloud: &cube,
                ctx: &cctx,
            },
        ];
        let out = hyper_fit(&shapes, &config(600), false).unwrap();
        let eval = |code: &[f64], target: &PointCloud| {
            let z = out
                .hyper
                .generate(code)
                .unwrap()
                .forward(&sample_unit_ball(800, 9));
            chamfer(&z.points(), &target.points).unwrap()
        };
        let own_s = eval(&out.codes[0], &sphere);
        let own_c = eval(&out.codes[1], &cube);
        let swap_s = eval(&out.codes[1], &sphere);
        let swap_c = eval(&out.codes[0], &cube);
        assert!(
            own_s < swap_s && own_c < swap_c,
            "{own_s} {own_c} {swap_s} {swap_c}"
        );
    }
}
