//! Permutation-invariant embeddings of an orbit of edge features.
//!
//! Each realization maps the list of orbit images together with the
//! invariant channels (scalars, `h_i`, `h_j`, `a_ij`) to one scalar weight.
//! The weight does not depend on the order in which the images are listed,
//! which is what makes `(q_i − q_j) · weight` equivariant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Mlp, MlpSpec, NodeId, ParamStore, Tape};
use crate::pointgroup::canonical_order;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    /// Sort the images, then one MLP over their concatenation.
    Rank,
    Sum,
    Mean,
    /// Self-attention across images, rows averaged.
    Attn,
}

impl Pooling {
    pub fn as_str(self) -> &'static str {
        match self {
            Pooling::Rank => "rank",
            Pooling::Sum => "sum",
            Pooling::Mean => "mean",
            Pooling::Attn => "attn",
        }
    }

    pub fn all() -> [Pooling; 4] {
        [Pooling::Rank, Pooling::Sum, Pooling::Mean, Pooling::Attn]
    }
}

impl std::fmt::Display for Pooling {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Pooling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Pooling::all()
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown pooling {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Realization {
    Rank {
        net: Mlp,
    },
    Pool {
        embed: Mlp,
        out: Mlp,
        mean: bool,
    },
    Attn {
        embed: Mlp,
        query: Mlp,
        key: Mlp,
        value: Mlp,
        out: Mlp,
    },
}

/// The φ network of one layer.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Phi {
    realization: Realization,
    image_width: usize,
    rest_width: usize,
}

impl Phi {
    /// `orbit_len` images of width `image_width` each, plus `rest_width`
    /// invariant inputs.
    pub fn init(
        store: &mut ParamStore,
        prefix: &str,
        pooling: Pooling,
        orbit_len: usize,
        image_width: usize,
        rest_width: usize,
        hidden: usize,
    ) -> Result<Phi> {
        // A key bias shifts every logit of a row equally and cannot matter.
        let key_spec = MlpSpec::new(format!("{prefix}.key"), vec![hidden, hidden]).without_bias();
        let mut mlp = |suffix: &str, widths: Vec<usize>| {
            let spec = MlpSpec::new(format!("{prefix}.{suffix}"), widths);
            store.init_mlp(if suffix == "key" { &key_spec } else { &spec })
        };
        let embed_in = image_width + rest_width;
        let realization = match pooling {
            Pooling::Rank => Realization::Rank {
                net: mlp("phi", vec![orbit_len * image_width + rest_width, hidden, 1])?,
            },
            Pooling::Sum | Pooling::Mean => Realization::Pool {
                embed: mlp("phi", vec![embed_in, hidden, hidden])?,
                out: mlp("phi_out", vec![hidden, hidden, 1])?,
                mean: pooling == Pooling::Mean,
            },
            Pooling::Attn => Realization::Attn {
                embed: mlp("phi", vec![embed_in, hidden, hidden])?,
                query: mlp("query", vec![hidden, hidden])?,
                key: mlp("key", vec![hidden, hidden])?,
                value: mlp("value", vec![hidden, hidden])?,
                out: mlp("phi_out", vec![hidden, hidden, 1])?,
            },
        };
        Ok(Phi {
            realization,
            image_width,
            rest_width,
        })
    }

    /// Networks whose last layer produces the scalar weight.
    pub fn output_mlp(&self) -> &Mlp {
        match &self.realization {
            Realization::Rank { net } => net,
            Realization::Pool { out, .. } | Realization::Attn { out, .. } => out,
        }
    }

    /// Records the scalar weight for one edge. `images` lists the orbit in
    /// any order; `copies` is the orbit size, used when the images are
    /// empty (no geometric channels) and every image is the same.
    pub fn weight(&self, tape: &mut Tape<'_>, images: &[NodeId], copies: usize, rest: NodeId) -> Result<NodeId> {
        if tape.value(rest).len() != self.rest_width {
            return Err(Error::Shape(format!(
                "phi: {} invariant inputs, expected {}",
                tape.value(rest).len(),
                self.rest_width
            )));
        }
        if let Some(bad) = images.iter().find(|&&k| tape.value(k).len() != self.image_width) {
            return Err(Error::Shape(format!(
                "phi: orbit image of width {}, expected {}",
                tape.value(*bad).len(),
                self.image_width
            )));
        }
        // Listing the images in canonical order once makes every reduction
        // below order independent without sorting its terms.
        let values: Vec<&[f64]> = images.iter().map(|&k| tape.value(k)).collect();
        let listed: Vec<NodeId> = canonical_order(&values).into_iter().map(|k| images[k]).collect();
        match &self.realization {
            Realization::Rank { net } => {
                let mut parts = listed;
                parts.push(rest);
                let x = tape.concat(&parts)?;
                net.forward(tape, x)
            }
            Realization::Pool { embed, out, mean } => {
                let e = self.embed_images(tape, embed, &listed, copies, rest)?;
                let mut agg = tape.sum(&e)?;
                if *mean {
                    agg = tape.scale_const(agg, 1.0 / e.len() as f64)?;
                }
                out.forward(tape, agg)
            }
            Realization::Attn {
                embed,
                query,
                key,
                value,
                out,
            } => {
                let e = self.embed_images(tape, embed, &listed, copies, rest)?;
                let mut qs = Vec::with_capacity(e.len());
                let mut ks = Vec::with_capacity(e.len());
                let mut vs = Vec::with_capacity(e.len());
                for &ek in &e {
                    qs.push(query.forward(tape, ek)?);
                    ks.push(key.forward(tape, ek)?);
                    vs.push(value.forward(tape, ek)?);
                }
                // The mean over rows of Σ_k α_rk v_k is Σ_k ᾱ_k v_k with ᾱ the
                // column mean of the attention matrix.
                let mut alphas = Vec::with_capacity(e.len());
                for &qk in &qs {
                    let logits = tape.dots(qk, &ks)?;
                    alphas.push(tape.softmax_in_order(logits)?);
                }
                let total = tape.sum(&alphas)?;
                let mean_alpha = tape.scale_const(total, 1.0 / alphas.len() as f64)?;
                let agg = tape.weighted_sum_in_order(mean_alpha, &vs)?;
                out.forward(tape, agg)
            }
        }
    }

    /// One embedding per image. The invariant part of the first layer is
    /// computed once and shared.
    fn embed_images(
        &self,
        tape: &mut Tape<'_>,
        embed: &Mlp,
        images: &[NodeId],
        copies: usize,
        rest: NodeId,
    ) -> Result<Vec<NodeId>> {
        let shared = embed.first_layer_partial(tape, rest, self.image_width, true)?;
        if self.image_width == 0 {
            let e = embed.finish(tape, shared)?;
            return Ok(vec![e; copies.max(1)]);
        }
        images
            .iter()
            .map(|&img| {
                let own = embed.first_layer_partial(tape, img, 0, false)?;
                let pre = tape.add(own, shared)?;
                embed.finish(tape, pre)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn weight_of(phi: &Phi, store: &ParamStore, images: &[Vec<f64>], rest: &[f64]) -> f64 {
        let mut t = Tape::new(store);
        let nodes: Vec<NodeId> = images.iter().map(|v| t.input(v.clone())).collect();
        let r = t.input(rest.to_vec());
        let w = phi.weight(&mut t, &nodes, images.len(), r).unwrap();
        t.value(w)[0]
    }

    fn random(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn image_order_does_not_matter() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for pooling in Pooling::all() {
            let mut store = ParamStore::new(11);
            let phi = Phi::init(&mut store, "t", pooling, 6, 4, 5, 8).unwrap();
            for _ in 0..20 {
                let mut images: Vec<Vec<f64>> = (0..6).map(|_| random(&mut rng, 4)).collect();
                let rest = random(&mut rng, 5);
                let a = weight_of(&phi, &store, &images, &rest);
                images.shuffle(&mut rng);
                let b = weight_of(&phi, &store, &images, &rest);
                assert_eq!(a.to_bits(), b.to_bits(), "{pooling}");
            }
        }
    }

    #[test]
    fn identical_images_reduce_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let img = random(&mut rng, 3);
        let rest = random(&mut rng, 2);
        for pooling in [Pooling::Mean, Pooling::Attn] {
            let mut s4 = ParamStore::new(2);
            let phi4 = Phi::init(&mut s4, "t", pooling, 4, 3, 2, 6).unwrap();
            let mut s1 = ParamStore::new(2);
            let phi1 = Phi::init(&mut s1, "t", pooling, 1, 3, 2, 6).unwrap();
            let many = weight_of(&phi4, &s4, &vec![img.clone(); 4], &rest);
            let one = weight_of(&phi1, &s1, &[img.clone()], &rest);
            assert!((many - one).abs() < 1e-12, "{pooling}: {many} vs {one}");
        }
    }

    #[test]
    fn attention_over_equal_images_is_uniform() {
        let mut store = ParamStore::new(4);
        let phi = Phi::init(&mut store, "t", Pooling::Attn, 3, 2, 1, 5).unwrap();
        let mut t = Tape::new(&store);
        let img = t.input(vec![0.4, -0.9]);
        let rest = t.input(vec![0.2]);
        phi.weight(&mut t, &[img, img, img], 3, rest).unwrap();
        // every softmax on the tape should be uniform
        let third = 1.0 / 3.0;
        let mut seen = 0;
        for k in 0..t.len() {
            let v = t.value(crate::nn::NodeId::from_index(k));
            if v.len() == 3 && v.iter().all(|x| (x - third).abs() < 1e-15) {
                seen += 1;
            }
        }
        assert!(seen >= 3);
    }

    #[test]
    fn sum_is_orbit_size_times_mean_at_the_aggregate() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let images: Vec<Vec<f64>> = (0..4).map(|_| random(&mut rng, 3)).collect();
        let rest = random(&mut rng, 2);
        let mut aggs = Vec::new();
        for pooling in [Pooling::Sum, Pooling::Mean] {
            let mut store = ParamStore::new(9);
            let phi = Phi::init(&mut store, "t", pooling, 4, 3, 2, 5).unwrap();
            let mut t = Tape::new(&store);
            let nodes: Vec<NodeId> = images.iter().map(|v| t.input(v.clone())).collect();
            let r = t.input(rest.clone());
            let w = phi.weight(&mut t, &nodes, 4, r).unwrap();
            // aggregate is the input of the output MLP: 5 nodes before the weight
            let agg = t.value(crate::nn::NodeId::from_index(w.index() - 3)).to_vec();
            aggs.push(agg);
        }
        for (s, m) in aggs[0].iter().zip(&aggs[1]) {
            assert!((s - 4.0 * m).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_output_layer_gives_zero_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for pooling in Pooling::all() {
            let mut store = ParamStore::new(1);
            let phi = Phi::init(&mut store, "t", pooling, 2, 3, 2, 4).unwrap();
            let out = phi.output_mlp().clone();
            let last = out.num_layers() - 1;
            store.get_mut(out.weight(last)).data.fill(0.0);
            let images = vec![random(&mut rng, 3), random(&mut rng, 3)];
            assert_eq!(weight_of(&phi, &store, &images, &random(&mut rng, 2)), 0.0);
        }
    }

    #[test]
    fn widths_are_checked() {
        let mut store = ParamStore::new(1);
        let phi = Phi::init(&mut store, "t", Pooling::Sum, 2, 3, 2, 4).unwrap();
        let mut t = Tape::new(&store);
        let img = t.input(vec![0.0; 2]);
        let rest = t.input(vec![0.0; 2]);
        assert!(phi.weight(&mut t, &[img], 2, rest).is_err());
    }

    #[test]
    fn pooling_names_parse() {
        for p in Pooling::all() {
            assert_eq!(p.as_str().parse::<Pooling>().unwrap(), p);
        }
        assert!("max".parse::<Pooling>().is_err());
    }
}
