//! Fully connected network with a hand-written batched backward pass.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::{rng_from_seed, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    LeakyRelu { slope: f64 },
    Tanh,
}

impl Default for Activation {
    fn default() -> Self {
        Activation::LeakyRelu { slope: 0.01 }
    }
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::LeakyRelu { slope } => {
                if x > 0.0 {
                    x
                } else {
                    slope * x
                }
            }
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative given the pre-activation `x` and the activation `y`.
    #[inline]
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::LeakyRelu { slope } => {
                if x > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

/// Multilayer perceptron with a linear output layer. Parameters live in one
/// flat buffer: for each layer the `out x in` weights row-major, then the biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    activation: Activation,
    params: Vec<f64>,
}

/// Intermediate values kept by [`Mlp::forward_tape`] for the backward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    batch: usize,
    /// `values[0]` is the input; `values[l]` the activated output of layer `l`
    /// (the last one is the linear network output).
    values: Vec<Vec<f64>>,
    /// Pre-activations of the hidden layers.
    pre: Vec<Vec<f64>>,
}

impl Tape {
    pub fn output(&self) -> &[f64] {
        self.values.last().expect("tape has an input layer")
    }

    pub fn batch(&self) -> usize {
        self.batch
    }
}

pub fn param_count(layer_sizes: &[usize]) -> usize {
    layer_sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

fn check_sizes(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
        return Err(Error::InvalidInput(format!(
            "need at least two positive layer sizes, got {layer_sizes:?}"
        )));
    }
    Ok(())
}

/// `c = a * b (+ c if accumulate)` for row-major operands with explicit strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    c: &mut [f64],
    accumulate: bool,
) {
    if m == 0 || n == 0 {
        return;
    }
    if k > 0 {
        assert!(a.len() > (m - 1) * rsa + (k - 1) * csa);
        assert!(b.len() > (k - 1) * rsb + (n - 1) * csb);
    }
    assert!(c.len() >= m * n);
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: bounds of all three operands are checked above and the output
    // does not alias the inputs (distinct borrows).
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

impl Mlp {
    /// Fan-in scaled uniform initialization: He-uniform on hidden layers,
    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))` on the output layer, zero biases.
    pub fn init(layer_sizes: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        check_sizes(layer_sizes)?;
        let mut rng = rng_from_seed(seed);
        let mut params = Vec::with_capacity(param_count(layer_sizes));
        let last = layer_sizes.len() - 2;
        for (l, w) in layer_sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = if l == last {
                1.0 / (fan_in as f64).sqrt()
            } else {
                let gain = match activation {
                    Activation::LeakyRelu { slope } => 2.0 / (1.0 + slope * slope),
                    Activation::Tanh => 1.0,
                };
                (3.0 * gain / fan_in as f64).sqrt()
            };
            params.extend((0..fan_in * fan_out).map(|_| rng.random_range(-bound..=bound)));
            params.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            activation,
            params,
        })
    }

    pub fn from_params(
        layer_sizes: &[usize],
        activation: Activation,
        params: Vec<f64>,
    ) -> Result<Self> {
        check_sizes(layer_sizes)?;
        let expected = param_count(layer_sizes);
        if params.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "{} parameters for layer sizes {layer_sizes:?} (expected {expected})",
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidInput("non-finite network parameter".into()));
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            activation,
            params,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("validated sizes")
    }

    /// `(weight offset, bias offset)` of each layer in the flat buffer.
    fn offsets(&self) -> impl Iterator<Item = (usize, usize, usize, usize)> + '_ {
        let mut at = 0;
        self.layer_sizes.windows(2).map(move |w| {
            let (fi, fo) = (w[0], w[1]);
            let wo = at;
            at += fi * fo + fo;
            (fi, fo, wo, wo + fi * fo)
        })
    }

    /// Batched forward pass over row-major inputs, keeping the tape.
    pub fn forward_tape(&self, inputs: &[f64]) -> Result<Tape> {
        let d_in = self.input_dim();
        if !inputs.len().is_multiple_of(d_in) {
            return Err(Error::ShapeMismatch(format!(
                "{} inputs do not form rows of width {d_in}",
                inputs.len()
            )));
        }
        let batch = inputs.len() / d_in;
        let hidden = self.layer_sizes.len() - 2;
        let mut values = vec![inputs.to_vec()];
        let mut pre = Vec::with_capacity(hidden);
        for (l, (fi, fo, wo, bo)) in self.offsets().enumerate() {
            let bias = &self.params[bo..bo + fo];
            let mut out: Vec<f64> = Vec::with_capacity(batch * fo);
            for _ in 0..batch {
                out.extend_from_slice(bias);
            }
            gemm(
                batch,
                fi,
                fo,
                values.last().expect("input present"),
                (fi, 1),
                &self.params[wo..bo],
                (1, fi),
                &mut out,
                true,
            );
            if l < hidden {
                let act: Vec<f64> = out.iter().map(|&x| self.activation.apply(x)).collect();
                pre.push(out);
                values.push(act);
            } else {
                values.push(out);
            }
        }
        Ok(Tape { batch, values, pre })
    }

    pub fn forward(&self, inputs: &[f64]) -> Result<Vec<f64>> {
        let mut tape = self.forward_tape(inputs)?;
        Ok(tape.values.pop().expect("output present"))
    }

    /// Reverse pass: gradient of `sum(upstream * output)` with respect to the
    /// parameters, plus the gradient with respect to the inputs.
    pub fn backward(&self, tape: &Tape, upstream: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let batch = tape.batch;
        if upstream.len() != batch * self.output_dim() {
            return Err(Error::ShapeMismatch(format!(
                "upstream has {} values, expected {} x {}",
                upstream.len(),
                batch,
                self.output_dim()
            )));
        }
        let mut grads = vec![0.0; self.params.len()];
        let offsets: Vec<_> = self.offsets().collect();
        let mut delta = upstream.to_vec();
        for (l, &(fi, fo, wo, bo)) in offsets.iter().enumerate().rev() {
            let input = &tape.values[l];
            let (gw, gb) = grads[wo..bo + fo].split_at_mut(fi * fo);
            gemm(fo, batch, fi, &delta, (1, fo), input, (fi, 1), gw, false);
            for row in delta.chunks(fo) {
                for (b, d) in gb.iter_mut().zip(row) {
                    *b += d;
                }
            }
            let mut below = vec![0.0; batch * fi];
            gemm(
                batch,
                fo,
                fi,
                &delta,
                (fo, 1),
                &self.params[wo..bo],
                (fi, 1),
                &mut below,
                false,
            );
            if l > 0 {
                let (x, y) = (&tape.pre[l - 1], &tape.values[l]);
                for ((d, &x), &y) in below.iter_mut().zip(x).zip(y) {
                    *d *= self.activation.derivative(x, y);
                }
            }
            delta = below;
        }
        Ok((grads, delta))
    }
}
