//! Point-group equivariant message passing.
//!
//! Each layer computes, for every directed edge `(i, j)`,
//!
//! ```text
//! m_ij = (q_i − q_j) · φ({ O x_ij : O ∈ P }, h_i, h_j, a_ij)
//! ```
//!
//! where `x_ij` are the edge features and φ is permutation invariant over
//! the orbit. Nodes are then updated with
//!
//! ```text
//! qdot_i' = ψ(h_i) · qdot_i + Σ_j m_ij
//! q_i'    = q_i + qdot_i'
//! h_i'    = σ_h(h_i, ‖Σ_j m_ij‖²)
//! ```
//!
//! The node embeddings only ever see invariant inputs, so they are identical
//! for a state and any group-transformed copy of it. The `plain` baseline is
//! the exception: it starts `h` from the raw position and velocity as well.

mod equivariance;
mod features;
mod message;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Gradients, Mlp, MlpSpec, NodeId, ParamStore, Tape};
use crate::pointgroup::{make_group, GroupElement, GroupId, PointGroup};
use crate::sim::SystemState;
use crate::train::mse_loss;

pub use equivariance::{check_equivariance, random_orthogonal, random_states, EquivarianceReport};
pub use features::{build_features, FeatureMode};
pub use message::Pooling;

use message::Phi;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub num_layers: usize,
    pub hidden: usize,
    pub feature_mode: FeatureMode,
    pub pooling: Pooling,
    /// Required for the `degnn` feature mode. Other modes fall back to the
    /// identity-only group; `plain` never augments and keeps the group for
    /// auditing only.
    pub group: Option<GroupId>,
    pub dim: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            num_layers: 4,
            hidden: 64,
            feature_mode: FeatureMode::Degnn,
            pooling: Pooling::Attn,
            group: None,
            dim: 3,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 {
            return Err(Error::Config("num_layers must be at least 1".into()));
        }
        if self.hidden == 0 {
            return Err(Error::Config("hidden width must be at least 1".into()));
        }
        if !(2..=3).contains(&self.dim) {
            return Err(Error::Config(format!("spatial dimension {} not supported", self.dim)));
        }
        if self.feature_mode == FeatureMode::Degnn && self.group.is_none() {
            return Err(Error::Config("feature mode degnn needs a group".into()));
        }
        if let Some(id) = self.group {
            make_group(id.name, self.dim, id.axis)?;
        }
        Ok(())
    }

    /// The configured group, if any, realized in the model's dimension.
    pub fn group(&self) -> Result<Option<PointGroup>> {
        self.group
            .map(|id| make_group(id.name, self.dim, id.axis))
            .transpose()
    }

    /// Group whose orbit feeds φ.
    pub fn orbit_group(&self) -> Result<PointGroup> {
        match (self.feature_mode, self.group()?) {
            (FeatureMode::Plain, _) | (_, None) => Ok(PointGroup::trivial(self.dim)),
            (_, Some(g)) => Ok(g),
        }
    }
}

/// Scale on the initial output weights of every message network. Small
/// initial messages keep the stacked position updates from compounding.
const MESSAGE_INIT_GAIN: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
struct Layer {
    phi: Phi,
    psi: Mlp,
    node: Mlp,
}

/// Parameter handles plus the orbit group. The values live in a
/// [`ParamStore`] created alongside.
#[derive(Clone, Debug)]
pub struct Model {
    config: ModelConfig,
    orbit: PointGroup,
    embed: Mlp,
    layers: Vec<Layer>,
}

/// One recorded forward pass.
pub struct ForwardPass<'p> {
    pub tape: Tape<'p>,
    /// Predicted position node per object.
    pub positions: Vec<NodeId>,
    /// Node embeddings per layer; entry 0 is the initial embedding.
    pub embeddings: Vec<Vec<NodeId>>,
}

impl ForwardPass<'_> {
    /// Predicted positions, flat `N × dim`.
    pub fn prediction(&self) -> Vec<f64> {
        self.positions
            .iter()
            .flat_map(|&p| self.tape.value(p).iter().copied())
            .collect()
    }

    /// Embeddings of layer `l`, flat `N × hidden`.
    pub fn embedding_values(&self, l: usize) -> Vec<f64> {
        self.embeddings[l]
            .iter()
            .flat_map(|&h| self.tape.value(h).iter().copied())
            .collect()
    }
}

impl Model {
    /// Builds a model with freshly initialized parameters.
    pub fn new(config: ModelConfig, seed: u64) -> Result<(Model, ParamStore)> {
        config.validate()?;
        let orbit = config.orbit_group()?;
        let mut store = ParamStore::new(seed);
        let h = config.hidden;
        let layout = config.feature_mode.layout(config.dim);
        let image_width = layout.geometric_blocks() * config.dim;
        let rest_width = layout.scalar_channels() + 2 * h + 1;

        let embed_in = match config.feature_mode {
            FeatureMode::Plain => 1 + 2 * config.dim,
            _ => 2,
        };
        let embed = store.init_mlp(&MlpSpec::new("embed", vec![embed_in, h, h]))?;
        let mut layers = Vec::with_capacity(config.num_layers);
        for l in 0..config.num_layers {
            let prefix = format!("layer{l}");
            let phi = Phi::init(
                &mut store,
                &prefix,
                config.pooling,
                orbit.len(),
                image_width,
                rest_width,
                h,
            )?;
            let psi = store.init_mlp(&MlpSpec::new(format!("{prefix}.psi"), vec![h, h, 1]))?;
            let node = store.init_mlp(&MlpSpec::new(format!("{prefix}.node"), vec![h + 1, h, h]))?;
            let out = phi.output_mlp();
            let last = out.weight(out.num_layers() - 1);
            store.get_mut(last).data.iter_mut().for_each(|w| *w *= MESSAGE_INIT_GAIN);
            layers.push(Layer { phi, psi, node });
        }
        Ok((
            Model {
                config,
                orbit,
                embed,
                layers,
            },
            store,
        ))
    }

    /// Rebuilds the model for a stored set of parameters. Names and shapes
    /// must match what `config` would create.
    pub fn from_params(config: ModelConfig, params: &ParamStore) -> Result<(Model, ParamStore)> {
        let (model, mut store) = Model::new(config, params.seed())?;
        store.load_values(params)?;
        Ok((model, store))
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// The group whose orbits feed the message weights.
    pub fn orbit_group(&self) -> &PointGroup {
        &self.orbit
    }

    fn check_state(&self, state: &SystemState) -> Result<()> {
        if state.dim != self.config.dim {
            return Err(Error::Shape(format!(
                "state has dimension {}, model expects {}",
                state.dim, self.config.dim
            )));
        }
        if state.edges.len() != state.edge_attrs.len() {
            return Err(Error::Shape("edge attributes do not match edges".into()));
        }
        if let Some(&(i, j)) = state.edges.iter().find(|&&(i, j)| i >= state.n() || j >= state.n()) {
            return Err(Error::Shape(format!("edge ({i}, {j}) out of range")));
        }
        Ok(())
    }

    /// Records the full forward pass for one state.
    pub fn record<'p>(&self, params: &'p ParamStore, state: &SystemState) -> Result<ForwardPass<'p>> {
        self.check_state(state)?;
        let mut tape = Tape::new(params);
        let n = state.n();
        let mut q: Vec<NodeId> = (0..n).map(|i| tape.input(state.pos(i).to_vec())).collect();
        let mut qdot: Vec<NodeId> = (0..n).map(|i| tape.input(state.vel(i).to_vec())).collect();
        let attrs: Vec<NodeId> = state.edge_attrs.iter().map(|&a| tape.input(vec![a])).collect();

        let mut h = Vec::with_capacity(n);
        for i in 0..n {
            let u = tape.input(vec![state.u[i]]);
            let x = match self.config.feature_mode {
                FeatureMode::Plain => tape.concat(&[u, q[i], qdot[i]])?,
                _ => {
                    let speed = tape.sq_norm(qdot[i])?;
                    tape.concat(&[u, speed])?
                }
            };
            h.push(self.embed.forward(&mut tape, x)?);
        }
        let mut embeddings = vec![h.clone()];

        for layer in &self.layers {
            let mut incoming: Vec<Vec<NodeId>> = vec![Vec::new(); n];
            for (k, &(i, j)) in state.edges.iter().enumerate() {
                let diff = tape.sub(q[i], q[j])?;
                let feats = features::record_features(&mut tape, self.config.feature_mode, (q[i], q[j]), (qdot[i], qdot[j]), diff)?;
                let images = match feats.geometric {
                    Some(g) => self.orbit_images(&mut tape, g)?,
                    None => Vec::new(),
                };
                let mut rest_parts: Vec<NodeId> = feats.scalars.into_iter().collect();
                rest_parts.extend([h[i], h[j], attrs[k]]);
                let rest = tape.concat(&rest_parts)?;
                let w = layer.phi.weight(&mut tape, &images, self.orbit.len(), rest)?;
                incoming[i].push(tape.scale(diff, w)?);
            }
            for i in 0..n {
                let msum = match incoming[i].as_slice() {
                    [] => tape.input(vec![0.0; self.config.dim]),
                    [one] => *one,
                    many => tape.sum(many)?,
                };
                let (qi, vi, hi) = layer.update(&mut tape, q[i], qdot[i], h[i], msum)?;
                q[i] = qi;
                qdot[i] = vi;
                h[i] = hi;
            }
            embeddings.push(h.clone());
        }
        Ok(ForwardPass {
            tape,
            positions: q,
            embeddings,
        })
    }

    fn orbit_images(&self, tape: &mut Tape<'_>, x: NodeId) -> Result<Vec<NodeId>> {
        let identity = GroupElement::identity(self.config.dim);
        self.orbit
            .elements()
            .iter()
            .map(|e| {
                if e.matrix() == identity.matrix() {
                    Ok(x)
                } else {
                    tape.block_map(x, e.matrix(), e.dim())
                }
            })
            .collect()
    }

    /// Predicted positions after `num_layers` rounds, flat `N × dim`.
    pub fn forward(&self, params: &ParamStore, state: &SystemState) -> Result<Vec<f64>> {
        Ok(self.record(params, state)?.prediction())
    }

    /// Mean squared error against `target` and its parameter gradient.
    pub fn loss_and_grad(&self, params: &ParamStore, state: &SystemState, target: &[f64]) -> Result<(f64, Gradients)> {
        let pass = self.record(params, state)?;
        let (loss, grad) = mse_loss(&pass.prediction(), target)?;
        let d = self.config.dim;
        let seeds: Vec<(NodeId, &[f64])> = pass
            .positions
            .iter()
            .enumerate()
            .map(|(i, &p)| (p, &grad[i * d..(i + 1) * d]))
            .collect();
        let mut grads = Gradients::zeros_like(params);
        pass.tape.backward(&seeds, &mut grads)?;
        Ok((loss, grads))
    }

    /// Scalar message weight of layer `layer` for explicit orbit images and
    /// invariant inputs (scalars, `h_i`, `h_j`, `a_ij` concatenated).
    pub fn message_weight(&self, params: &ParamStore, layer: usize, images: &[Vec<f64>], rest: &[f64]) -> Result<f64> {
        let l = self.layer(layer)?;
        let mut tape = Tape::new(params);
        let nodes: Vec<NodeId> = images.iter().map(|v| tape.input(v.clone())).collect();
        let r = tape.input(rest.to_vec());
        let w = l.phi.weight(&mut tape, &nodes, self.orbit.len(), r)?;
        Ok(tape.value(w)[0])
    }

    /// Applies one layer's node update to a single object and returns
    /// `(q', qdot', h')`.
    pub fn node_update(
        &self,
        params: &ParamStore,
        layer: usize,
        q: &[f64],
        qdot: &[f64],
        h: &[f64],
        message_sum: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let l = self.layer(layer)?;
        let mut tape = Tape::new(params);
        let (qn, vn, hn, mn) = (
            tape.input(q.to_vec()),
            tape.input(qdot.to_vec()),
            tape.input(h.to_vec()),
            tape.input(message_sum.to_vec()),
        );
        let (a, b, c) = l.update(&mut tape, qn, vn, hn, mn)?;
        Ok((tape.value(a).to_vec(), tape.value(b).to_vec(), tape.value(c).to_vec()))
    }

    fn layer(&self, layer: usize) -> Result<&Layer> {
        self.layers
            .get(layer)
            .ok_or_else(|| Error::Config(format!("layer {layer} out of range")))
    }

    /// The last-layer weight tensors of every φ output network. Zeroing
    /// them silences all messages.
    pub fn message_output_weights(&self) -> Vec<crate::nn::ParamId> {
        self.layers
            .iter()
            .map(|l| {
                let out = l.phi.output_mlp();
                out.weight(out.num_layers() - 1)
            })
            .collect()
    }

    /// `(last weight, last bias)` of every ψ network.
    pub fn velocity_gate_output(&self) -> Vec<(crate::nn::ParamId, crate::nn::ParamId)> {
        self.layers
            .iter()
            .map(|l| {
                let last = l.psi.num_layers() - 1;
                (l.psi.weight(last), l.psi.bias(last).expect("gate has a bias"))
            })
            .collect()
    }
}

impl Layer {
    fn update(
        &self,
        tape: &mut Tape<'_>,
        q: NodeId,
        qdot: NodeId,
        h: NodeId,
        msum: NodeId,
    ) -> Result<(NodeId, NodeId, NodeId)> {
        let gate = self.psi.forward(tape, h)?;
        let kept = tape.scale(qdot, gate)?;
        let qdot_next = tape.add(kept, msum)?;
        let q_next = tape.add(q, qdot_next)?;
        let strength = tape.sq_norm(msum)?;
        let x = tape.concat(&[h, strength])?;
        let h_next = self.node.forward(tape, x)?;
        Ok((q_next, qdot_next, h_next))
    }
}

#[cfg(test)]
mod tests;
