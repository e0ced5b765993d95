use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::nn::params::{Gradients, ParamStore};

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    /// `max |analytic − numeric| / max(1e-8, |numeric|)` over all entries.
    pub max_rel_error: f64,
    /// `max |analytic − numeric|`. Central differences carry roughly
    /// `ulp(loss) / step` of rounding noise, so entries far below that
    /// cannot meet a relative bound whatever the analytic value.
    pub max_abs_error: f64,
    /// Error relative to `max(|numeric|, 1e-4 · max_k |numeric_k|)`, which
    /// measures tiny entries against the gradient's overall scale.
    pub max_scaled_error: f64,
    /// Parameter name and flat index of the worst entry.
    pub worst: Option<(String, usize)>,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
    pub entries: usize,
}

/// Compares the analytic gradient of `f` against central differences with
/// the given step, perturbing every parameter entry in turn.
pub fn grad_check<F>(params: &ParamStore, step: f64, f: F) -> Result<GradCheckReport>
where
    F: Fn(&ParamStore) -> Result<(f64, Gradients)> + Sync,
{
    let (loss, analytic) = f(params)?;
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("loss is {loss}")));
    }

    let coords: Vec<(usize, usize)> = params
        .tensors()
        .iter()
        .enumerate()
        .flat_map(|(t, tensor)| (0..tensor.len()).map(move |k| (t, k)))
        .collect();

    let results: Vec<Result<(f64, f64)>> = coords
        .par_iter()
        .map_init(
            || params.clone(),
            |local, &(t, k)| {
                let orig = local.tensors()[t].data[k];
                local.tensors_mut()[t].data[k] = orig + step;
                let plus = f(local).map(|r| r.0);
                local.tensors_mut()[t].data[k] = orig - step;
                let minus = f(local).map(|r| r.0);
                local.tensors_mut()[t].data[k] = orig;
                let (plus, minus) = (plus?, minus?);
                if !plus.is_finite() || !minus.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "loss at perturbed {}[{k}]",
                        params.tensors()[t].name
                    )));
                }
                let numeric = (plus - minus) / (2.0 * step);
                Ok((analytic.buffers()[t][k], numeric))
            },
        )
        .collect();

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        max_scaled_error: 0.0,
        worst: None,
        worst_analytic: 0.0,
        worst_numeric: 0.0,
        entries: coords.len(),
    };
    let pairs = results.into_iter().collect::<Result<Vec<(f64, f64)>>>()?;
    let scale = 1e-4 * pairs.iter().fold(0.0f64, |m, p| m.max(p.1.abs()));
    for (&(t, k), &(a, n)) in coords.iter().zip(&pairs) {
        report.max_abs_error = report.max_abs_error.max((a - n).abs());
        report.max_scaled_error = report.max_scaled_error.max((a - n).abs() / n.abs().max(scale).max(1e-300));
        let err = (a - n).abs() / n.abs().max(1e-8);
        if err > report.max_rel_error || report.worst.is_none() {
            report.max_rel_error = err;
            report.worst = Some((params.tensors()[t].name.clone(), k));
            report.worst_analytic = a;
            report.worst_numeric = n;
        }
    }
    Ok(report)
}
