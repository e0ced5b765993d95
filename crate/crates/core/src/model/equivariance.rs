use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use super::Model;
use crate::error::Result;
use crate::nn::ParamStore;
use crate::pointgroup::GroupElement;
use crate::sim::SystemState;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquivarianceReport {
    /// `max |forward(O∘s) − O∘forward(s)|` over all trials and elements.
    pub max_deviation: f64,
    /// Label of the element attaining the maximum.
    pub worst_element: Option<String>,
    pub worst_trial: Option<usize>,
    /// Largest change of any node embedding between `s` and `O∘s`.
    pub max_embedding_deviation: f64,
    pub trials: usize,
    pub elements: usize,
}

impl EquivarianceReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.max_deviation <= tol
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Compares `forward(O∘s)` with `O∘forward(s)` for every state and element.
pub fn check_equivariance(
    model: &Model,
    params: &ParamStore,
    elements: &[GroupElement],
    states: &[SystemState],
) -> Result<EquivarianceReport> {
    let layers = model.config().num_layers;
    let per_state: Vec<Vec<(f64, f64)>> = states
        .par_iter()
        .map(|s| {
            let base = model.record(params, s)?;
            let pred = base.prediction();
            let emb: Vec<Vec<f64>> = (0..=layers).map(|l| base.embedding_values(l)).collect();
            elements
                .iter()
                .map(|e| {
                    let moved = model.record(params, &s.transformed(e)?)?;
                    let dev = max_abs_diff(&moved.prediction(), &e.apply(&pred, None)?);
                    let hdev = (0..=layers)
                        .map(|l| max_abs_diff(&moved.embedding_values(l), &emb[l]))
                        .fold(0.0f64, f64::max);
                    Ok((dev, hdev))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut report = EquivarianceReport {
        max_deviation: 0.0,
        worst_element: None,
        worst_trial: None,
        max_embedding_deviation: 0.0,
        trials: states.len(),
        elements: elements.len(),
    };
    for (t, row) in per_state.iter().enumerate() {
        for (e, &(dev, hdev)) in elements.iter().zip(row) {
            if report.worst_element.is_none() || dev > report.max_deviation {
                report.max_deviation = dev;
                report.worst_element = Some(e.label().to_string());
                report.worst_trial = Some(t);
            }
            report.max_embedding_deviation = report.max_embedding_deviation.max(hdev);
        }
    }
    Ok(report)
}

/// `count` random states: positions ~ N(0, 1), speeds 0.5, charges ±1.
pub fn random_states(n: usize, dim: usize, count: usize, seed: u64) -> Result<Vec<SystemState>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let q: Vec<f64> = (0..n * dim).map(|_| rng.sample(StandardNormal)).collect();
            let mut qdot: Vec<f64> = (0..n * dim).map(|_| rng.sample(StandardNormal)).collect();
            for v in qdot.chunks_mut(dim) {
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
                v.iter_mut().for_each(|x| *x *= 0.5 / norm);
            }
            let u = (0..n).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
            SystemState::new(dim, q, qdot, u)
        })
        .collect()
}

/// A random orthogonal matrix (rotation or improper rotation) from
/// Gram–Schmidt on Gaussian columns.
pub fn random_orthogonal<R: Rng>(dim: usize, rng: &mut R) -> GroupElement {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(dim);
    while cols.len() < dim {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        for c in &cols {
            let p: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(c).for_each(|(a, b)| *a -= p * b);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            cols.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    let matrix = (0..dim * dim).map(|k| cols[k % dim][k / dim]).collect();
    GroupElement::new(matrix, dim, "random").expect("square matrix")
}
