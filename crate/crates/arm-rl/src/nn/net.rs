//! Network architectures, parameter containers, and the forward pass.
//!
//! An [`Architecture`] is a declarative trunk (dense/conv/activation layers)
//! followed by one or more named dense heads — Q-values for DQN, logits plus
//! a value estimate for PPO. Parameters live outside any tape and are loaded
//! as leaves per forward pass, so concurrent forward passes on independent
//! tapes can share them immutably.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tape::{NnError, NodeId, Tape};
use super::tensor::Tensor;

/// One trunk layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Layer {
    Dense { inputs: usize, outputs: usize },
    Conv { in_channels: usize, out_channels: usize, kernel: usize, stride: usize },
    Relu,
    Tanh,
    Flatten,
}

/// A named dense output head attached to the trunk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Head {
    pub name: String,
    pub outputs: usize,
}

impl Head {
    pub fn new(name: &str, outputs: usize) -> Self {
        Self {
            name: name.to_string(),
            outputs,
        }
    }
}

/// Shape of the whole network: input (without batch dimension), trunk, heads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    pub input_shape: Vec<usize>,
    pub layers: Vec<Layer>,
    pub heads: Vec<Head>,
}

impl Architecture {
    /// Feature-mode network: two 64-unit ReLU layers and the given heads.
    pub fn features_mlp(input_dim: usize, heads: Vec<Head>) -> Self {
        Self {
            input_shape: vec![input_dim],
            layers: vec![
                Layer::Dense { inputs: input_dim, outputs: 64 },
                Layer::Relu,
                Layer::Dense { inputs: 64, outputs: 64 },
                Layer::Relu,
            ],
            heads,
        }
    }

    /// Image-mode network over 80×60 RGB inputs (the camera frame box-
    /// averaged 5×): two strided conv+ReLU stages, then a 128-unit dense
    /// layer. A declared stand-in — no canonical architecture exists for
    /// this task.
    pub fn image_cnn(heads: Vec<Head>) -> Self {
        Self {
            input_shape: vec![3, 60, 80],
            layers: vec![
                Layer::Conv { in_channels: 3, out_channels: 8, kernel: 5, stride: 2 },
                Layer::Relu,
                Layer::Conv { in_channels: 8, out_channels: 16, kernel: 3, stride: 2 },
                Layer::Relu,
                Layer::Flatten,
                Layer::Dense { inputs: 16 * 13 * 18, outputs: 128 },
                Layer::Relu,
            ],
            heads,
        }
    }

    /// Walk the layer list, checking dimension consistency; returns the
    /// trunk output width.
    pub fn validate(&self) -> Result<usize, NnError> {
        if self.heads.is_empty() {
            return Err(NnError::InvalidArchitecture("at least one head required".into()));
        }
        let mut shape = self.input_shape.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            match layer {
                Layer::Dense { inputs, outputs } => {
                    if shape != [*inputs] {
                        return Err(NnError::InvalidArchitecture(format!(
                            "layer {i}: dense expects [{inputs}], trunk carries {shape:?}"
                        )));
                    }
                    shape = vec![*outputs];
                }
                Layer::Conv { in_channels, out_channels, kernel, stride } => {
                    if shape.len() != 3 || shape[0] != *in_channels {
                        return Err(NnError::InvalidArchitecture(format!(
                            "layer {i}: conv expects [{in_channels}, h, w], trunk carries {shape:?}"
                        )));
                    }
                    if *stride == 0 || shape[1] < *kernel || shape[2] < *kernel {
                        return Err(NnError::InvalidArchitecture(format!(
                            "layer {i}: kernel {kernel}/stride {stride} too large for {shape:?}"
                        )));
                    }
                    shape = vec![
                        *out_channels,
                        (shape[1] - kernel) / stride + 1,
                        (shape[2] - kernel) / stride + 1,
                    ];
                }
                Layer::Relu | Layer::Tanh => {}
                Layer::Flatten => shape = vec![shape.iter().product()],
            }
        }
        if shape.len() != 1 {
            return Err(NnError::InvalidArchitecture(format!(
                "trunk must end one-dimensional (add Flatten), got {shape:?}"
            )));
        }
        Ok(shape[0])
    }
}

/// Named parameter tensors plus the architecture they instantiate.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub arch: Architecture,
    /// `(name, tensor)` in deterministic order: trunk layers then heads.
    pub tensors: Vec<(String, Tensor)>,
}

impl NetworkParams {
    pub fn tensor(&self, name: &str) -> Option<&Tensor> {
        self.tensors
            .iter()
            .find_map(|(n, t)| (n == name).then_some(t))
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.iter().map(|(_, t)| t.len()).sum()
    }
}

fn he_uniform(rng: &mut ChaCha8Rng, fan_in: usize, n: usize) -> Vec<f64> {
    let bound = (6.0 / fan_in as f64).sqrt();
    (0..n).map(|_| rng.random_range(-bound..bound)).collect()
}

fn small_uniform(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1e-3..1e-3)).collect()
}

/// Sample fresh parameters: He-uniform for trunk weights, small-uniform for
/// head weights (so initial Q-values/logits sit near zero), zero biases.
/// Deterministic per seed.
pub fn init_params(arch: &Architecture, seed: u64) -> Result<NetworkParams, NnError> {
    let trunk_dim = arch.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tensors = Vec::new();
    for (i, layer) in arch.layers.iter().enumerate() {
        match layer {
            Layer::Dense { inputs, outputs } => {
                tensors.push((
                    format!("layer{i}.weight"),
                    Tensor::new(vec![*inputs, *outputs], he_uniform(&mut rng, *inputs, inputs * outputs)),
                ));
                tensors.push((format!("layer{i}.bias"), Tensor::zeros(vec![*outputs])));
            }
            Layer::Conv { in_channels, out_channels, kernel, .. } => {
                let fan_in = in_channels * kernel * kernel;
                let n = out_channels * in_channels * kernel * kernel;
                tensors.push((
                    format!("layer{i}.weight"),
                    Tensor::new(
                        vec![*out_channels, *in_channels, *kernel, *kernel],
                        he_uniform(&mut rng, fan_in, n),
                    ),
                ));
                tensors.push((format!("layer{i}.bias"), Tensor::zeros(vec![*out_channels])));
            }
            Layer::Relu | Layer::Tanh | Layer::Flatten => {}
        }
    }
    for head in &arch.heads {
        tensors.push((
            format!("head.{}.weight", head.name),
            Tensor::new(
                vec![trunk_dim, head.outputs],
                small_uniform(&mut rng, trunk_dim * head.outputs),
            ),
        ));
        tensors.push((format!("head.{}.bias", head.name), Tensor::zeros(vec![head.outputs])));
    }
    Ok(NetworkParams {
        arch: arch.clone(),
        tensors,
    })
}

/// Result of one recorded forward pass: parameter leaf ids (aligned with
/// `params.tensors`) and one output node per head.
pub struct ForwardPass {
    pub param_nodes: Vec<NodeId>,
    pub heads: Vec<(String, NodeId)>,
}

impl ForwardPass {
    pub fn head(&self, name: &str) -> NodeId {
        self.heads
            .iter()
            .find_map(|(n, id)| (n == name).then_some(*id))
            .unwrap_or_else(|| panic!("no head named {name:?}"))
    }
}

/// Record a batched forward pass on the tape. `input` must be shaped
/// `[batch] + arch.input_shape`.
pub fn forward(tape: &mut Tape, params: &NetworkParams, input: &Tensor) -> Result<ForwardPass, NnError> {
    let arch = &params.arch;
    let expected: Vec<usize> = input
        .shape()
        .first()
        .map(|&b| {
            let mut s = vec![b];
            s.extend_from_slice(&arch.input_shape);
            s
        })
        .unwrap_or_default();
    if input.shape().is_empty() || input.shape() != expected.as_slice() {
        return Err(NnError::ShapeMismatch {
            op: "forward",
            detail: format!(
                "input {:?} does not match [batch] + {:?}",
                input.shape(),
                arch.input_shape
            ),
        });
    }
    let batch = input.shape()[0];

    let mut param_nodes = Vec::with_capacity(params.tensors.len());
    let mut param_iter = params.tensors.iter();
    let mut next_param = |tape: &mut Tape, expect: &str| -> NodeId {
        let (name, tensor) = param_iter.next().expect("parameter list exhausted");
        debug_assert!(name.ends_with(expect), "expected *.{expect}, got {name}");
        let id = tape.leaf(tensor.clone(), true);
        param_nodes.push(id);
        id
    };

    // Dense layers see a [batch, n] matrix; conv layers a [batch, c, h, w]
    // block. Flatten switches representation.
    let mut x = tape.constant(input.clone());
    for layer in &arch.layers {
        x = match layer {
            Layer::Dense { .. } => {
                let w = next_param(tape, "weight");
                let b = next_param(tape, "bias");
                let mm = tape.matmul(x, w);
                tape.add_row(mm, b)
            }
            Layer::Conv { stride, .. } => {
                let w = next_param(tape, "weight");
                let b = next_param(tape, "bias");
                tape.conv2d(x, w, b, *stride)
            }
            Layer::Relu => tape.relu(x),
            Layer::Tanh => tape.tanh(x),
            Layer::Flatten => {
                let len = tape.value(x).len() / batch;
                tape.reshape(x, vec![batch, len])
            }
        };
    }

    let mut heads = Vec::with_capacity(arch.heads.len());
    for head in &arch.heads {
        let w = next_param(tape, "weight");
        let b = next_param(tape, "bias");
        let mm = tape.matmul(x, w);
        let out = tape.add_row(mm, b);
        heads.push((head.name.clone(), out));
    }
    debug_assert!(param_iter.next().is_none(), "unconsumed parameters");
    Ok(ForwardPass { param_nodes, heads })
}

/// Convenience inference: run `forward` on a throwaway tape and return each
/// head's values.
pub fn infer(params: &NetworkParams, input: &Tensor) -> Result<Vec<(String, Tensor)>, NnError> {
    let mut tape = Tape::new();
    let fp = forward(&mut tape, params, input)?;
    Ok(fp
        .heads
        .iter()
        .map(|(name, id)| (name.clone(), tape.value(*id).clone()))
        .collect())
}
