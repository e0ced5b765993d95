use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::params::{Gradients, ParamId, ParamStore};
use crate::nn::tape::{NodeId, Tape};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    /// `x · sigmoid(x)` on hidden layers; the output layer is linear.
    Silu,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub name: String,
    pub layer_widths: Vec<usize>,
    pub activation: Activation,
    /// Whether every layer carries a bias vector.
    #[serde(default = "default_bias")]
    pub bias: bool,
}

fn default_bias() -> bool {
    true
}

impl MlpSpec {
    pub fn new(name: impl Into<String>, layer_widths: Vec<usize>) -> Self {
        MlpSpec {
            name: name.into(),
            layer_widths,
            activation: Activation::Silu,
            bias: true,
        }
    }

    pub fn without_bias(mut self) -> Self {
        self.bias = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_widths.len() < 2 {
            return Err(Error::Config(format!(
                "mlp {}: needs input and output widths",
                self.name
            )));
        }
        if self.layer_widths.iter().any(|w| *w == 0) {
            return Err(Error::Config(format!("mlp {}: zero width", self.name)));
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.layer_widths.last().expect("validated")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Layer {
    weight: ParamId,
    bias: Option<ParamId>,
}

/// Handles to the parameters of one MLP inside a [`ParamStore`].
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    spec: MlpSpec,
    layers: Vec<Layer>,
}

fn name_hash(name: &str) -> u64 {
    // FNV-1a
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

impl ParamStore {
    /// Registers and initializes the tensors of an MLP. Weights are uniform
    /// in `±sqrt(6 / (fan_in + fan_out))`, biases zero. The draw depends only
    /// on the store seed and the MLP name.
    pub fn init_mlp(&mut self, spec: &MlpSpec) -> Result<Mlp> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed() ^ name_hash(&spec.name));
        let mut layers = Vec::new();
        for (k, pair) in spec.layer_widths.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let w: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| rng.gen_range(-bound..=bound))
                .collect();
            let weight = self.insert(&format!("{}.{k}.weight", spec.name), vec![fan_out, fan_in], w)?;
            let bias = if spec.bias {
                Some(self.insert(&format!("{}.{k}.bias", spec.name), vec![fan_out], vec![0.0; fan_out])?)
            } else {
                None
            };
            layers.push(Layer { weight, bias });
        }
        Ok(Mlp {
            spec: spec.clone(),
            layers,
        })
    }
}

/// A fresh store holding one initialized MLP.
pub fn init_params(spec: &MlpSpec, seed: u64) -> Result<(ParamStore, Mlp)> {
    let mut store = ParamStore::new(seed);
    let mlp = store.init_mlp(spec)?;
    Ok((store, mlp))
}

impl Mlp {
    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn weight(&self, layer: usize) -> ParamId {
        self.layers[layer].weight
    }

    pub fn bias(&self, layer: usize) -> Option<ParamId> {
        self.layers[layer].bias
    }

    pub fn forward(&self, tape: &mut Tape<'_>, x: NodeId) -> Result<NodeId> {
        let width = tape.value(x).len();
        if width != self.spec.input_width() {
            return Err(Error::Shape(format!(
                "mlp {}: input width {width}, expected {}",
                self.spec.name,
                self.spec.input_width()
            )));
        }
        let pre = self.first_layer_partial(tape, x, 0, true)?;
        self.finish(tape, pre)
    }

    /// Contribution of a slice of the input, `x` occupying columns
    /// `col_offset..col_offset + len(x)`, to the first pre-activation.
    /// Summing the partials of all slices (exactly one with `bias`) equals
    /// the first layer applied to their concatenation.
    pub fn first_layer_partial(
        &self,
        tape: &mut Tape<'_>,
        x: NodeId,
        col_offset: usize,
        bias: bool,
    ) -> Result<NodeId> {
        let l = self.layers[0];
        tape.affine(x, l.weight, l.bias.filter(|_| bias), col_offset)
    }

    /// Runs the network from the first pre-activation onwards.
    pub fn finish(&self, tape: &mut Tape<'_>, pre: NodeId) -> Result<NodeId> {
        let mut h = pre;
        for l in &self.layers[1..] {
            let a = tape.silu(h)?;
            h = tape.affine(a, l.weight, l.bias, 0)?;
        }
        Ok(h)
    }
}

/// One recorded MLP evaluation.
pub struct MlpPass<'p> {
    pub output: Vec<f64>,
    pub tape: Tape<'p>,
    pub input_node: NodeId,
    pub output_node: NodeId,
}

impl MlpPass<'_> {
    /// Accumulates parameter gradients into `grads` and returns the gradient
    /// with respect to the input.
    pub fn backward(&self, grad_out: &[f64], grads: &mut Gradients) -> Result<Vec<f64>> {
        let adj = self.tape.backward(&[(self.output_node, grad_out)], grads)?;
        Ok(adj
            .get(self.input_node)
            .map(<[f64]>::to_vec)
            .unwrap_or_else(|| vec![0.0; self.tape.value(self.input_node).len()]))
    }
}

/// Runs an MLP on a fresh tape.
pub fn mlp_forward<'p>(params: &'p ParamStore, mlp: &Mlp, input: &[f64]) -> Result<MlpPass<'p>> {
    let mut tape = Tape::new(params);
    let input_node = tape.input(input.to_vec());
    let output_node = mlp.forward(&mut tape, input_node)?;
    Ok(MlpPass {
        output: tape.value(output_node).to_vec(),
        tape,
        input_node,
        output_node,
    })
}
