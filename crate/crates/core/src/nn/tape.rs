//! Reverse-mode tape over small dense vectors.
//!
//! Each node stores the value it produced. Gradients flow back through the
//! recorded ops into a [`Gradients`] buffer (parameters) and into per-node
//! adjoints (inputs). The tape only reads the [`ParamStore`] it was built on.
//!
//! Reductions over sets (`set_sum`, `weighted_sum`, the `softmax`
//! normalizer) add their terms in sorted order, so their result depends
//! only on the multiset of terms and not on the order they were listed in.
//! The `_in_order` variants skip the sort for callers that already list
//! their terms in a canonical order.

use crate::error::{Error, Result};
use crate::nn::params::{Gradients, ParamId, ParamStore};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }

    #[cfg(test)]
    pub(crate) fn from_index(i: usize) -> NodeId {
        NodeId(i)
    }
}

#[derive(Clone, Debug)]
enum Op {
    Input,
    /// `W[:, col_offset .. col_offset + len(x)] · x (+ b)`
    Affine {
        x: NodeId,
        weight: ParamId,
        bias: Option<ParamId>,
        col_offset: usize,
    },
    Silu(NodeId),
    Concat(Vec<NodeId>),
    Sum {
        terms: Vec<NodeId>,
        canonical: bool,
    },
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    /// Vector times a length-1 node.
    Scale {
        v: NodeId,
        s: NodeId,
    },
    ScaleConst(NodeId, f64),
    Dot(NodeId, NodeId),
    /// Inner products of one vector against each of `keys`.
    Dots {
        query: NodeId,
        keys: Vec<NodeId>,
    },
    SqNorm(NodeId),
    Softmax {
        x: NodeId,
        canonical: bool,
    },
    /// `Σ_k w[k] · v_k`
    WeightedSum {
        weights: NodeId,
        values: Vec<NodeId>,
        canonical: bool,
    },
    /// Multiplies each `dim`-block of `x` by an orthogonal matrix.
    BlockMap {
        x: NodeId,
        matrix: Vec<f64>,
        dim: usize,
    },
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: Vec<f64>,
}

pub struct Tape<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
}

/// Per-node adjoints produced by [`Tape::backward`].
pub struct Adjoints {
    grads: Vec<Option<Vec<f64>>>,
}

impl Adjoints {
    /// Gradient with respect to a node; zero-length nodes or nodes the seed
    /// does not reach return `None`.
    pub fn get(&self, id: NodeId) -> Option<&[f64]> {
        self.grads[id.0].as_deref()
    }
}

fn silu(x: f64) -> f64 {
    x / (1.0 + (-x).exp())
}

fn silu_grad(x: f64) -> f64 {
    let s = 1.0 / (1.0 + (-x).exp());
    s + x * s * (1.0 - s)
}

/// Sum that does not depend on the order of `terms`.
fn sorted_sum(terms: &mut [f64]) -> f64 {
    match terms.len() {
        0 => 0.0,
        1 => terms[0],
        2 => terms[0] + terms[1],
        _ => {
            terms.sort_unstable_by(f64::total_cmp);
            terms.iter().sum()
        }
    }
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Tape {
            params,
            nodes: Vec::new(),
        }
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.nodes[id.0].value
    }

    fn push(&mut self, op: Op) -> Result<NodeId> {
        let value = eval(&op, self.params, |id| self.nodes[id.0].value.as_slice())?;
        self.nodes.push(Node { op, value });
        Ok(NodeId(self.nodes.len() - 1))
    }

    pub fn input(&mut self, value: Vec<f64>) -> NodeId {
        self.nodes.push(Node {
            op: Op::Input,
            value,
        });
        NodeId(self.nodes.len() - 1)
    }

    pub fn affine(
        &mut self,
        x: NodeId,
        weight: ParamId,
        bias: Option<ParamId>,
        col_offset: usize,
    ) -> Result<NodeId> {
        self.push(Op::Affine {
            x,
            weight,
            bias,
            col_offset,
        })
    }

    pub fn silu(&mut self, x: NodeId) -> Result<NodeId> {
        self.push(Op::Silu(x))
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        self.push(Op::Concat(parts.to_vec()))
    }

    /// Elementwise sum in the given order.
    pub fn sum(&mut self, terms: &[NodeId]) -> Result<NodeId> {
        self.push(Op::Sum {
            terms: terms.to_vec(),
            canonical: false,
        })
    }

    /// Elementwise sum that is bit-identical under any reordering of `terms`.
    pub fn set_sum(&mut self, terms: &[NodeId]) -> Result<NodeId> {
        self.push(Op::Sum {
            terms: terms.to_vec(),
            canonical: true,
        })
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.sum(&[a, b])
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.push(Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.push(Op::Mul(a, b))
    }

    pub fn scale(&mut self, v: NodeId, s: NodeId) -> Result<NodeId> {
        self.push(Op::Scale { v, s })
    }

    pub fn scale_const(&mut self, v: NodeId, c: f64) -> Result<NodeId> {
        self.push(Op::ScaleConst(v, c))
    }

    pub fn dot(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.push(Op::Dot(a, b))
    }

    pub fn dots(&mut self, query: NodeId, keys: &[NodeId]) -> Result<NodeId> {
        self.push(Op::Dots {
            query,
            keys: keys.to_vec(),
        })
    }

    pub fn sq_norm(&mut self, x: NodeId) -> Result<NodeId> {
        self.push(Op::SqNorm(x))
    }

    pub fn softmax(&mut self, x: NodeId) -> Result<NodeId> {
        self.push(Op::Softmax { x, canonical: true })
    }

    /// Softmax whose normalizer adds the exponentials in listed order.
    pub fn softmax_in_order(&mut self, x: NodeId) -> Result<NodeId> {
        self.push(Op::Softmax { x, canonical: false })
    }

    pub fn weighted_sum(&mut self, weights: NodeId, values: &[NodeId]) -> Result<NodeId> {
        self.push(Op::WeightedSum {
            weights,
            values: values.to_vec(),
            canonical: true,
        })
    }

    pub fn weighted_sum_in_order(&mut self, weights: NodeId, values: &[NodeId]) -> Result<NodeId> {
        self.push(Op::WeightedSum {
            weights,
            values: values.to_vec(),
            canonical: false,
        })
    }

    pub fn block_map(&mut self, x: NodeId, matrix: &[f64], dim: usize) -> Result<NodeId> {
        self.push(Op::BlockMap {
            x,
            matrix: matrix.to_vec(),
            dim,
        })
    }

    /// Recomputes every node from the recorded inputs and reports whether
    /// all values match bit for bit.
    pub fn replay_matches(&self) -> Result<bool> {
        let mut values: Vec<Vec<f64>> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let v = match node.op {
                Op::Input => node.value.clone(),
                ref op => eval(op, self.params, |id| values[id.0].as_slice())?,
            };
            values.push(v);
        }
        Ok(values
            .iter()
            .zip(&self.nodes)
            .all(|(a, n)| a.len() == n.value.len() && a.iter().zip(&n.value).all(|(x, y)| x.to_bits() == y.to_bits())))
    }

    /// Propagates `seeds` (node, upstream gradient) backwards. Parameter
    /// gradients are added into `grads`.
    pub fn backward(&self, seeds: &[(NodeId, &[f64])], grads: &mut Gradients) -> Result<Adjoints> {
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        for (id, g) in seeds {
            let len = self.nodes[id.0].value.len();
            if g.len() != len {
                return Err(Error::Shape(format!(
                    "seed for node {} has length {}, expected {len}",
                    id.0,
                    g.len()
                )));
            }
            accumulate(&mut adj[id.0], g);
        }

        for i in (0..self.nodes.len()).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            self.backward_node(&node.op, &node.value, &g, &mut adj, grads)?;
            adj[i] = Some(g);
        }
        Ok(Adjoints { grads: adj })
    }

    fn backward_node(
        &self,
        op: &Op,
        out: &[f64],
        g: &[f64],
        adj: &mut [Option<Vec<f64>>],
        grads: &mut Gradients,
    ) -> Result<()> {
        let val = |id: &NodeId| self.nodes[id.0].value.as_slice();
        match op {
            Op::Input => {}
            Op::Affine {
                x,
                weight,
                bias,
                col_offset,
            } => {
                let w = self.params.get(*weight);
                let cols = w.shape[1];
                let xv = val(x);
                let k = xv.len();
                let mut gx = vec![0.0; k];
                {
                    let gw = grads.get_mut(*weight);
                    for (r, gr) in g.iter().enumerate() {
                        if *gr == 0.0 {
                            continue;
                        }
                        let row = r * cols + col_offset;
                        let wrow = &w.data[row..row + k];
                        let grow = &mut gw[row..row + k];
                        for c in 0..k {
                            grow[c] += gr * xv[c];
                            gx[c] += wrow[c] * gr;
                        }
                    }
                }
                if let Some(b) = bias {
                    for (gb, gr) in grads.get_mut(*b).iter_mut().zip(g) {
                        *gb += gr;
                    }
                }
                accumulate(&mut adj[x.0], &gx);
            }
            Op::Silu(x) => {
                let gx: Vec<f64> = val(x).iter().zip(g).map(|(xi, gi)| gi * silu_grad(*xi)).collect();
                accumulate(&mut adj[x.0], &gx);
            }
            Op::Concat(parts) => {
                let mut at = 0;
                for p in parts {
                    let len = val(p).len();
                    accumulate(&mut adj[p.0], &g[at..at + len]);
                    at += len;
                }
            }
            Op::Sum { terms, .. } => {
                for t in terms {
                    accumulate(&mut adj[t.0], g);
                }
            }
            Op::Sub(a, b) => {
                accumulate(&mut adj[a.0], g);
                let neg: Vec<f64> = g.iter().map(|x| -x).collect();
                accumulate(&mut adj[b.0], &neg);
            }
            Op::Mul(a, b) => {
                let ga: Vec<f64> = g.iter().zip(val(b)).map(|(x, y)| x * y).collect();
                let gb: Vec<f64> = g.iter().zip(val(a)).map(|(x, y)| x * y).collect();
                accumulate(&mut adj[a.0], &ga);
                accumulate(&mut adj[b.0], &gb);
            }
            Op::Scale { v, s } => {
                let sv = val(s)[0];
                let gv: Vec<f64> = g.iter().map(|x| x * sv).collect();
                let gs: f64 = g.iter().zip(val(v)).map(|(x, y)| x * y).sum();
                accumulate(&mut adj[v.0], &gv);
                accumulate(&mut adj[s.0], &[gs]);
            }
            Op::ScaleConst(v, c) => {
                let gv: Vec<f64> = g.iter().map(|x| x * c).collect();
                accumulate(&mut adj[v.0], &gv);
            }
            Op::Dot(a, b) => {
                let ga: Vec<f64> = val(b).iter().map(|y| g[0] * y).collect();
                let gb: Vec<f64> = val(a).iter().map(|y| g[0] * y).collect();
                accumulate(&mut adj[a.0], &ga);
                accumulate(&mut adj[b.0], &gb);
            }
            Op::Dots { query, keys } => {
                let qv = val(query);
                let mut gq = vec![0.0; qv.len()];
                for (k, gk) in keys.iter().zip(g) {
                    let kv = val(k);
                    for (a, b) in gq.iter_mut().zip(kv) {
                        *a += gk * b;
                    }
                    let gkey: Vec<f64> = qv.iter().map(|x| gk * x).collect();
                    accumulate(&mut adj[k.0], &gkey);
                }
                accumulate(&mut adj[query.0], &gq);
            }
            Op::SqNorm(x) => {
                let gx: Vec<f64> = val(x).iter().map(|y| 2.0 * g[0] * y).collect();
                accumulate(&mut adj[x.0], &gx);
            }
            Op::Softmax { x, .. } => {
                let gy: f64 = g.iter().zip(out).map(|(a, b)| a * b).sum();
                let gx: Vec<f64> = out.iter().zip(g).map(|(y, gi)| y * (gi - gy)).collect();
                accumulate(&mut adj[x.0], &gx);
            }
            Op::WeightedSum { weights, values, .. } => {
                let w = val(weights);
                let mut gw = vec![0.0; w.len()];
                for (k, v) in values.iter().enumerate() {
                    gw[k] = g.iter().zip(val(v)).map(|(a, b)| a * b).sum();
                    let gv: Vec<f64> = g.iter().map(|x| x * w[k]).collect();
                    accumulate(&mut adj[v.0], &gv);
                }
                accumulate(&mut adj[weights.0], &gw);
            }
            Op::BlockMap { x, matrix, dim } => {
                let n = *dim;
                let mut gx = vec![0.0; g.len()];
                for (gb, ob) in g.chunks(n).zip(gx.chunks_mut(n)) {
                    for c in 0..n {
                        ob[c] = (0..n).map(|r| matrix[r * n + c] * gb[r]).sum();
                    }
                }
                accumulate(&mut adj[x.0], &gx);
            }
        }
        Ok(())
    }
}

fn accumulate(slot: &mut Option<Vec<f64>>, g: &[f64]) {
    match slot {
        Some(acc) => {
            for (a, b) in acc.iter_mut().zip(g) {
                *a += b;
            }
        }
        None => *slot = Some(g.to_vec()),
    }
}

fn same_len(what: &str, a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "{what}: operand lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

fn eval<'a, F>(op: &Op, params: &ParamStore, val: F) -> Result<Vec<f64>>
where
    F: Fn(NodeId) -> &'a [f64],
{
    Ok(match op {
        Op::Input => unreachable!("inputs carry their own value"),
        Op::Affine {
            x,
            weight,
            bias,
            col_offset,
        } => {
            let w = params.get(*weight);
            let (rows, cols) = (w.shape[0], w.shape[1]);
            let xv = val(*x);
            if col_offset + xv.len() > cols {
                return Err(Error::Shape(format!(
                    "{}: input of length {} at column {col_offset} exceeds {cols} columns",
                    w.name,
                    xv.len()
                )));
            }
            let mut out = match bias {
                Some(b) => params.get(*b).data.clone(),
                None => vec![0.0; rows],
            };
            for (r, o) in out.iter_mut().enumerate() {
                let row = r * cols + col_offset;
                let acc: f64 = w.data[row..row + xv.len()]
                    .iter()
                    .zip(xv)
                    .map(|(a, b)| a * b)
                    .sum();
                *o += acc;
            }
            out
        }
        Op::Silu(x) => val(*x).iter().map(|v| silu(*v)).collect(),
        Op::Concat(parts) => parts.iter().flat_map(|p| val(*p).iter().copied()).collect(),
        Op::Sum { terms, canonical } => {
            let Some(first) = terms.first() else {
                return Err(Error::Shape("sum of zero terms".into()));
            };
            let len = val(*first).len();
            for t in terms {
                if val(*t).len() != len {
                    return Err(Error::Shape("sum: ragged terms".into()));
                }
            }
            if *canonical && terms.len() > 2 {
                let mut buf = vec![0.0; terms.len()];
                (0..len)
                    .map(|c| {
                        for (b, t) in buf.iter_mut().zip(terms) {
                            *b = val(*t)[c];
                        }
                        sorted_sum(&mut buf)
                    })
                    .collect()
            } else {
                let mut out = val(*first).to_vec();
                for t in &terms[1..] {
                    for (o, v) in out.iter_mut().zip(val(*t)) {
                        *o += v;
                    }
                }
                out
            }
        }
        Op::Sub(a, b) => {
            same_len("sub", val(*a), val(*b))?;
            val(*a).iter().zip(val(*b)).map(|(x, y)| x - y).collect()
        }
        Op::Mul(a, b) => {
            same_len("mul", val(*a), val(*b))?;
            val(*a).iter().zip(val(*b)).map(|(x, y)| x * y).collect()
        }
        Op::Scale { v, s } => {
            let s = val(*s);
            if s.len() != 1 {
                return Err(Error::Shape(format!("scale factor has length {}", s.len())));
            }
            val(*v).iter().map(|x| x * s[0]).collect()
        }
        Op::ScaleConst(v, c) => val(*v).iter().map(|x| x * c).collect(),
        Op::Dot(a, b) => {
            same_len("dot", val(*a), val(*b))?;
            vec![val(*a).iter().zip(val(*b)).map(|(x, y)| x * y).sum()]
        }
        Op::Dots { query, keys } => {
            let qv = val(*query);
            let mut out = Vec::with_capacity(keys.len());
            for k in keys {
                same_len("dots", qv, val(*k))?;
                out.push(qv.iter().zip(val(*k)).map(|(x, y)| x * y).sum());
            }
            out
        }
        Op::SqNorm(x) => {
            let mut sq: Vec<f64> = val(*x).iter().map(|v| v * v).collect();
            vec![sorted_sum(&mut sq)]
        }
        Op::Softmax { x, canonical } => {
            let xv = val(*x);
            let max = xv.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = xv.iter().map(|v| (v - max).exp()).collect();
            let z = if *canonical {
                sorted_sum(&mut exps.clone())
            } else {
                exps.iter().sum()
            };
            exps.iter().map(|e| e / z).collect()
        }
        Op::WeightedSum {
            weights,
            values,
            canonical,
        } => {
            let w = val(*weights);
            if w.len() != values.len() || values.is_empty() {
                return Err(Error::Shape(format!(
                    "weighted sum: {} weights for {} values",
                    w.len(),
                    values.len()
                )));
            }
            let len = val(values[0]).len();
            if !*canonical {
                let mut out = vec![0.0; len];
                for (v, wk) in values.iter().zip(w) {
                    for (o, x) in out.iter_mut().zip(val(*v)) {
                        *o += wk * x;
                    }
                }
                return Ok(out);
            }
            let mut buf = vec![0.0; values.len()];
            (0..len)
                .map(|c| {
                    for ((b, v), wk) in buf.iter_mut().zip(values).zip(w) {
                        *b = wk * val(*v)[c];
                    }
                    sorted_sum(&mut buf)
                })
                .collect()
        }
        Op::BlockMap { x, matrix, dim } => {
            let xv = val(*x);
            let n = *dim;
            if xv.len() % n != 0 {
                return Err(Error::Shape(format!(
                    "block map: length {} not a multiple of {n}",
                    xv.len()
                )));
            }
            let mut out = vec![0.0; xv.len()];
            for (src, dst) in xv.chunks(n).zip(out.chunks_mut(n)) {
                for r in 0..n {
                    dst[r] = (0..n).map(|c| matrix[r * n + c] * src[c]).sum();
                }
            }
            out
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store() -> (ParamStore, ParamId, ParamId) {
        let mut s = ParamStore::new(0);
        let w = s
            .insert("w", vec![2, 3], vec![1.0, -2.0, 0.5, 3.0, 0.25, -1.0])
            .unwrap();
        let b = s.insert("b", vec![2], vec![0.1, -0.2]).unwrap();
        (s, w, b)
    }

    #[test]
    fn affine_with_column_offset() {
        let (s, w, b) = store();
        let mut t = Tape::new(&s);
        let x = t.input(vec![2.0, 4.0]);
        let y = t.affine(x, w, Some(b), 1).unwrap();
        assert_eq!(t.value(y), &[-2.0 * 2.0 + 0.5 * 4.0 + 0.1, 0.25 * 2.0 - 4.0 - 0.2]);
        let bad = t.input(vec![1.0; 3]);
        assert!(t.affine(bad, w, None, 1).is_err());
    }

    #[test]
    fn linear_grad_in_is_transpose_product() {
        let (s, w, _) = store();
        let mut t = Tape::new(&s);
        let x = t.input(vec![1.0, 2.0, 3.0]);
        let y = t.affine(x, w, None, 0).unwrap();
        let mut grads = Gradients::zeros_like(&s);
        let adj = t.backward(&[(y, &[1.0, -1.0])], &mut grads).unwrap();
        assert_eq!(adj.get(x).unwrap(), &[1.0 - 3.0, -2.0 - 0.25, 0.5 + 1.0]);
        assert_eq!(grads.get(w), &[1.0, 2.0, 3.0, -1.0, -2.0, -3.0]);
    }

    #[test]
    fn set_sum_ignores_term_order() {
        let s = ParamStore::new(0);
        let vals = [1e16, 1.0, -1e16, 3.0, 1e-3];
        let mut t = Tape::new(&s);
        let a: Vec<NodeId> = vals.iter().map(|v| t.input(vec![*v])).collect();
        let mut rev = a.clone();
        rev.reverse();
        let x = t.set_sum(&a).unwrap();
        let y = t.set_sum(&rev).unwrap();
        assert_eq!(t.value(x)[0].to_bits(), t.value(y)[0].to_bits());
    }

    #[test]
    fn softmax_of_equal_logits_is_uniform() {
        let s = ParamStore::new(0);
        let mut t = Tape::new(&s);
        let x = t.input(vec![700.0; 4]);
        let y = t.softmax(x).unwrap();
        assert_eq!(t.value(y), &[0.25; 4]);
    }

    #[test]
    fn in_order_variants_agree_with_sorted_ones() {
        let s = ParamStore::new(0);
        let mut t = Tape::new(&s);
        let x = t.input(vec![0.3, -1.2, 2.5, 0.01]);
        let vs: Vec<NodeId> = (0..4).map(|k| t.input(vec![k as f64 - 1.5, 0.5 * k as f64])).collect();
        let a = t.softmax(x).unwrap();
        let b = t.softmax_in_order(x).unwrap();
        let wa = t.weighted_sum(a, &vs).unwrap();
        let wb = t.weighted_sum_in_order(b, &vs).unwrap();
        for (p, q) in t.value(a).iter().zip(t.value(b)).chain(t.value(wa).iter().zip(t.value(wb))) {
            assert!((p - q).abs() <= 1e-15, "{p} vs {q}");
        }
        let total: f64 = t.value(b).iter().sum();
        assert!((total - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn elementwise_op_gradients_match_finite_differences() {
        // f(a, b) = softmax(a ⊙ b) · silu(a − b) + ||a||² * (b0) with a block map.
        let s = ParamStore::new(0);
        let f = |a: &[f64], b: &[f64]| -> (f64, Vec<f64>, Vec<f64>) {
            let mut t = Tape::new(&s);
            let an = t.input(a.to_vec());
            let bn = t.input(b.to_vec());
            let ab = t.mul(an, bn).unwrap();
            let sm = t.softmax(ab).unwrap();
            let d = t.sub(an, bn).unwrap();
            let sd = t.silu(d).unwrap();
            let dot = t.dot(sm, sd).unwrap();
            let rot = t
                .block_map(an, &[0.0, -1.0, 1.0, 0.0], 2)
                .unwrap();
            let nrm = t.sq_norm(rot).unwrap();
            let b0 = t.input(vec![b[0]]);
            let _ = b0;
            let sc = t.scale(bn, nrm).unwrap();
            let ws = t.weighted_sum(sm, &[sc, sd, d, an]).unwrap();
            let ds = t.dots(an, &[bn, sd, an]).unwrap();
            let ws = t.concat(&[ws, ds]).unwrap();
            let cat = t.concat(&[dot, ws]).unwrap();
            let half = t.scale_const(cat, 0.5).unwrap();
            let ones = t.input(vec![1.0; 8]);
            let out = t.dot(half, ones).unwrap();
            let mut g = Gradients::zeros_like(&s);
            let adj = t.backward(&[(out, &[1.0])], &mut g).unwrap();
            (
                t.value(out)[0],
                adj.get(an).unwrap().to_vec(),
                adj.get(bn).unwrap().to_vec(),
            )
        };
        let a = [0.3, -0.7, 1.1, 0.2];
        let b = [-0.4, 0.9, 0.5, -1.3];
        let (_, ga, gb) = f(&a, &b);
        let h = 1e-6;
        for i in 0..4 {
            let mut ap = a;
            let mut am = a;
            ap[i] += h;
            am[i] -= h;
            let fd = (f(&ap, &b).0 - f(&am, &b).0) / (2.0 * h);
            assert!((fd - ga[i]).abs() < 1e-7, "a[{i}]: {fd} vs {}", ga[i]);
            let mut bp = b;
            let mut bm = b;
            bp[i] += h;
            bm[i] -= h;
            let fd = (f(&a, &bp).0 - f(&a, &bm).0) / (2.0 * h);
            assert!((fd - gb[i]).abs() < 1e-7, "b[{i}]: {fd} vs {}", gb[i]);
        }
    }

    #[test]
    fn replay_reproduces_values() {
        let (s, w, b) = store();
        let mut t = Tape::new(&s);
        let x = t.input(vec![0.1, 0.2, 0.3]);
        let y = t.affine(x, w, Some(b), 0).unwrap();
        let z = t.silu(y).unwrap();
        let _ = t.softmax(z).unwrap();
        assert!(t.replay_matches().unwrap());
    }
}
