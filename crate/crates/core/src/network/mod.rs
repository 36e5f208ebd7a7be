//! The mapping network from the unit ball to `R^(3+K)` and its training.

mod adam;
mod fit;
mod hyper;
mod mlp;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use fit::{
    fit_object, geodesic_mre, objective, select_pairs, FitOutcome, TrainingConfig, FULL_PAIR_LIMIT,
};
pub use hyper::{hyper_fit, random_codes, HyperFitOutcome, HyperNetwork, HyperShape};
pub use mlp::{param_count, Activation, Mlp, Tape};

use crate::embedding::LiftedEmbedding;
use crate::geometry::SampleSet;
use crate::{Error, Result};

pub const DEFAULT_LIFTING_DIM: usize = 16;
pub const DEFAULT_HIDDEN: [usize; 3] = [256, 256, 256];

/// `[3, hidden..., 3 + lifting_dim]`.
pub fn layer_sizes(hidden: &[usize], lifting_dim: usize) -> Vec<usize> {
    let mut sizes = vec![3];
    sizes.extend_from_slice(hidden);
    sizes.push(3 + lifting_dim);
    sizes
}

/// MLP from the unit ball to point coordinates plus `K` lifting coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct MappingNetwork {
    mlp: Mlp,
}

impl MappingNetwork {
    pub fn init(layer_sizes: &[usize], lifting_dim: usize, seed: u64) -> Result<Self> {
        Self::init_with(layer_sizes, lifting_dim, Activation::default(), seed)
    }

    pub fn init_with(
        layer_sizes: &[usize],
        lifting_dim: usize,
        activation: Activation,
        seed: u64,
    ) -> Result<Self> {
        check_layout(layer_sizes, lifting_dim)?;
        Ok(Self {
            mlp: Mlp::init(layer_sizes, activation, seed)?,
        })
    }

    pub fn from_mlp(mlp: Mlp) -> Result<Self> {
        let sizes = mlp.layer_sizes();
        let k = sizes.last().copied().unwrap_or(0).saturating_sub(3);
        check_layout(sizes, k)?;
        Ok(Self { mlp })
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub fn params(&self) -> &[f64] {
        self.mlp.params()
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        self.mlp.params_mut()
    }

    pub fn layer_sizes(&self) -> &[usize] {
        self.mlp.layer_sizes()
    }

    pub fn lifting_dim(&self) -> usize {
        self.mlp.output_dim() - 3
    }

    pub fn forward(&self, samples: &SampleSet) -> LiftedEmbedding {
        let (_, z) = self.forward_tape(samples);
        z
    }

    pub fn forward_tape(&self, samples: &SampleSet) -> (Tape, LiftedEmbedding) {
        let inputs = flatten_samples(samples);
        let tape = self
            .mlp
            .forward_tape(&inputs)
            .expect("three-dimensional samples match the input layer");
        let z = LiftedEmbedding::new(self.mlp.output_dim(), tape.output().to_vec())
            .expect("output width is 3 + K");
        (tape, z)
    }

    /// Parameter gradient of `sum(upstream * f(samples))`.
    pub fn backward(&self, samples: &SampleSet, upstream: &[f64]) -> Result<Vec<f64>> {
        let (tape, _) = self.forward_tape(samples);
        self.backward_tape(&tape, upstream)
    }

    pub fn backward_tape(&self, tape: &Tape, upstream: &[f64]) -> Result<Vec<f64>> {
        self.mlp.backward(tape, upstream).map(|(g, _)| g)
    }
}

fn check_layout(layer_sizes: &[usize], lifting_dim: usize) -> Result<()> {
    if lifting_dim == 0 {
        return Err(Error::InvalidInput(
            "lifting dimension K must be at least 1".into(),
        ));
    }
    if layer_sizes.first() != Some(&3) || layer_sizes.last() != Some(&(3 + lifting_dim)) {
        return Err(Error::InvalidInput(format!(
            "layer sizes {layer_sizes:?} must start at 3 and end at 3 + K = {}",
            3 + lifting_dim
        )));
    }
    Ok(())
}

pub(crate) fn flatten_samples(samples: &SampleSet) -> Vec<f64> {
    samples
        .samples
        .iter()
        .flat_map(|p| [p.x, p.y, p.z])
        .collect()
}
