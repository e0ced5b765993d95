//! The `audit` command: group axioms, forward equivariance and gradients.

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use degnn::model::{check_equivariance, random_states, FeatureMode, Model, ModelConfig};
use degnn::nn::{grad_check, ParamStore};
use degnn::pointgroup::{make_group, verify_group, Axis, GroupId, GroupName, PointGroup};
use degnn::train::load_model;
use serde::Serialize;

use crate::descriptor::Descriptor;
use crate::ModelFlags;

/// Models with more parameter entries than this are gradient-checked on a
/// narrow two-layer copy of their configuration instead.
const GRAD_CHECK_MAX_ENTRIES: usize = 5_000;

#[derive(Args)]
pub struct AuditArgs {
    #[command(flatten)]
    common: crate::Common,
    /// Audit a trained checkpoint instead of a fresh model.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[command(flatten)]
    model: ModelFlags,
    /// Spatial dimension for a fresh model without a group.
    #[arg(long)]
    dim: Option<usize>,
    /// Number of random 5-body states for the equivariance check.
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 1e-9)]
    equivariance_tol: f64,
    #[arg(long, default_value_t = 1e-6)]
    gradient_tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Serialize)]
struct GroupLine {
    group: String,
    order: usize,
    max_residual: f64,
    pass: bool,
}

#[derive(Serialize)]
struct EquivarianceLine {
    group: String,
    max_deviation: f64,
    max_embedding_deviation: f64,
    worst_element: Option<String>,
    tolerance: f64,
    pass: bool,
    /// Set for models that are not meant to be equivariant; their result
    /// does not affect the verdict.
    informational: bool,
}

#[derive(Serialize)]
struct GradientLine {
    reduced_copy: bool,
    entries: usize,
    max_rel_error: f64,
    max_scaled_error: f64,
    max_abs_error: f64,
    tolerance: f64,
    pass: bool,
}

#[derive(Serialize)]
struct AuditSummary {
    model: ModelConfig,
    groups: Vec<GroupLine>,
    equivariance: Option<EquivarianceLine>,
    gradients: GradientLine,
    pass: bool,
}

fn catalog() -> Result<Vec<PointGroup>> {
    let mut out = vec![
        make_group(GroupName::Ci, 3, None)?,
        make_group(GroupName::D2, 2, None)?,
        make_group(GroupName::D2h, 3, None)?,
    ];
    for axis in [Axis::X, Axis::Y, Axis::Z] {
        out.push(make_group(GroupName::D4h, 3, Some(axis))?);
    }
    out.push(make_group(GroupName::Oh, 3, None)?);
    Ok(out)
}

fn model_under_audit(args: &AuditArgs) -> Result<(Model, ParamStore)> {
    if let Some(path) = &args.checkpoint {
        let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        return Ok(load_model(BufReader::new(f))?);
    }
    let d = Descriptor::load(args.common.config.as_deref())?;
    let mut c = d.model;
    c.feature_mode = args.model.mode.unwrap_or(c.feature_mode);
    c.pooling = args.model.pooling.unwrap_or(c.pooling);
    c.group = args.model.group.or(c.group);
    c.num_layers = args.model.layers.unwrap_or(c.num_layers);
    c.hidden = args.model.hidden.unwrap_or(c.hidden);
    c.dim = match (args.dim, c.group) {
        (Some(dim), _) => dim,
        (None, Some(GroupId { name: GroupName::D2, .. })) => 2,
        (None, _) => c.dim,
    };
    Ok(Model::new(c, d.init_seed)?)
}

fn gradient_line(model: &Model, params: &ParamStore, args: &AuditArgs) -> Result<GradientLine> {
    let reduced = params.num_values() > GRAD_CHECK_MAX_ENTRIES;
    let small;
    let (model, params) = if reduced {
        let c = ModelConfig {
            num_layers: 2,
            hidden: 4,
            ..model.config().clone()
        };
        small = Model::new(c, args.seed)?;
        (&small.0, &small.1)
    } else {
        (model, params)
    };
    let dim = model.config().dim;
    let state = &random_states(3, dim, 1, args.seed)?[0];
    let target: Vec<f64> = state.q.iter().map(|x| x + 0.3).collect();
    let r = grad_check(params, 1e-5, |p| model.loss_and_grad(p, state, &target))?;
    Ok(GradientLine {
        reduced_copy: reduced,
        entries: r.entries,
        max_rel_error: r.max_rel_error,
        max_scaled_error: r.max_scaled_error,
        max_abs_error: r.max_abs_error,
        tolerance: args.gradient_tol,
        pass: r.max_scaled_error < args.gradient_tol,
    })
}

/// Runs the audit, prints a JSON summary and returns the verdict.
pub fn cmd_audit(args: AuditArgs) -> Result<bool> {
    let groups: Vec<GroupLine> = catalog()?
        .iter()
        .map(|g| {
            let r = verify_group(g);
            GroupLine {
                group: g.id().to_string(),
                order: r.order,
                max_residual: r.max_residual(),
                pass: r.passed(),
            }
        })
        .collect();

    let (model, params) = model_under_audit(&args)?;
    let config = model.config().clone();
    let equivariance = match config.group()? {
        Some(g) => {
            let states = random_states(5, config.dim, args.trials, args.seed)?;
            let r = check_equivariance(&model, &params, g.elements(), &states)?;
            Some(EquivarianceLine {
                group: g.id().to_string(),
                max_deviation: r.max_deviation,
                max_embedding_deviation: r.max_embedding_deviation,
                worst_element: r.worst_element.clone(),
                tolerance: args.equivariance_tol,
                pass: r.passed(args.equivariance_tol),
                informational: config.feature_mode == FeatureMode::Plain,
            })
        }
        None => None,
    };
    let gradients = gradient_line(&model, &params, &args)?;

    let pass = groups.iter().all(|g| g.pass)
        && equivariance.as_ref().map_or(true, |e| e.pass || e.informational)
        && gradients.pass;
    let summary = AuditSummary {
        model: config,
        groups,
        equivariance,
        gradients,
        pass,
    };
    let json = serde_json::to_string_pretty(&summary)?;
    println!("{json}");
    if args.common.out.is_some() || std::env::var_os(crate::descriptor::OUT_DIR_ENV).is_some() {
        let d = Descriptor::load(args.common.config.as_deref())?;
        let out = d.out_dir(args.common.out.as_deref());
        crate::create_dir(&out)?;
        crate::write_file(&out.join("audit.json"), &json)?;
    }
    Ok(pass)
}
