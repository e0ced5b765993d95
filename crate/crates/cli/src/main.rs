mod audit;
mod descriptor;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use degnn::model::{FeatureMode, Model, Pooling};
use degnn::pointgroup::{Axis, GroupElement, GroupId, PointGroup};
use degnn::sim::{make_dataset, read_dataset, write_dataset, Dataset, SystemKind};
use degnn::train::{evaluate, generalization_eval, load_model, save_model, train, Inertial, TrainConfig, Trained};

use descriptor::Descriptor;

/// Exit status for a non-finite loss or prediction.
const EXIT_NUMERIC: u8 = 2;
/// Exit status for a failed audit.
const EXIT_AUDIT: u8 = 3;

#[derive(Parser)]
#[command(name = "degnn", version, about = "Point-group equivariant graph networks for boxed N-body systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate trajectories and write train/val/test files.
    Generate(GenerateArgs),
    /// Train a model and write a checkpoint with its metrics.
    Train(TrainArgs),
    /// Report the MSE of a checkpoint, optionally on transformed data.
    Eval(EvalArgs),
    /// Check group axioms, model equivariance and gradients.
    Audit(audit::AuditArgs),
}

#[derive(Args)]
struct Common {
    /// Run descriptor (TOML).
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Output directory; overrides DEGNN_OUT_DIR and the descriptor.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    n: Option<usize>,
    /// Box side lengths, e.g. 5,4,3.
    #[arg(long = "box", value_delimiter = ',')]
    box_sides: Option<Vec<f64>>,
    #[arg(long, value_parser = parse_kind)]
    kind: Option<SystemKind>,
    #[arg(long)]
    dt: Option<f64>,
    /// Frames between input and target.
    #[arg(long)]
    delta_frames: Option<usize>,
    /// Train, val and test counts, e.g. 50,100,100.
    #[arg(long, value_delimiter = ',')]
    counts: Option<Vec<usize>>,
    #[arg(long)]
    seed: Option<u64>,
    /// Start every object moving into the positive half of this axis.
    #[arg(long, value_parser = parse_axis)]
    heading: Option<Axis>,
}

#[derive(Args)]
struct ModelFlags {
    #[arg(long, value_parser = parse_mode)]
    mode: Option<FeatureMode>,
    #[arg(long, value_parser = parse_pooling)]
    pooling: Option<Pooling>,
    /// Catalog group such as Oh, D2h or D4h:x.
    #[arg(long, value_parser = parse_group)]
    group: Option<GroupId>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    /// Directory holding train.jsonl, val.jsonl and optionally test.jsonl.
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    model: ModelFlags,
    /// Start from the laptop-sized training settings.
    #[arg(long)]
    desk: bool,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    /// Seed for the epoch shuffles.
    #[arg(long)]
    seed: Option<u64>,
    /// Seed for parameter initialization.
    #[arg(long)]
    init_seed: Option<u64>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    checkpoint: PathBuf,
    /// A dataset file, or a directory holding test.jsonl.
    #[arg(long)]
    data: PathBuf,
    /// Element label (e.g. reflect_x) to apply to the data as well.
    #[arg(long)]
    transform: Option<String>,
}

fn parse_kind(s: &str) -> Result<SystemKind, String> {
    match s.to_ascii_lowercase().as_str() {
        "charged" => Ok(SystemKind::Charged),
        "gravity" => Ok(SystemKind::Gravity),
        _ => Err(format!("unknown system kind {s:?}")),
    }
}

fn parse_axis(s: &str) -> Result<Axis, String> {
    match s.to_ascii_lowercase().as_str() {
        "x" => Ok(Axis::X),
        "y" => Ok(Axis::Y),
        "z" => Ok(Axis::Z),
        _ => Err(format!("unknown axis {s:?}")),
    }
}

fn parse_mode(s: &str) -> Result<FeatureMode, String> {
    s.parse().map_err(|e: degnn::Error| e.to_string())
}

fn parse_pooling(s: &str) -> Result<Pooling, String> {
    s.parse().map_err(|e: degnn::Error| e.to_string())
}

fn parse_group(s: &str) -> Result<GroupId, String> {
    s.parse().map_err(|e: degnn::Error| e.to_string())
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn load_split(path: &Path) -> Result<Dataset> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_dataset(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

fn cmd_generate(args: GenerateArgs) -> Result<()> {
    let mut d = Descriptor::load(args.common.config.as_deref())?;
    let s = &mut d.sim;
    s.n = args.n.unwrap_or(s.n);
    s.box_sides = args.box_sides.unwrap_or_else(|| s.box_sides.clone());
    s.kind = args.kind.unwrap_or(s.kind);
    s.dt = args.dt.unwrap_or(s.dt);
    s.delta_frames = args.delta_frames.unwrap_or(s.delta_frames);
    if let Some(c) = args.counts {
        s.counts = c
            .try_into()
            .map_err(|c: Vec<usize>| anyhow::anyhow!("--counts needs three values, got {}", c.len()))?;
    }
    s.seed = args.seed.unwrap_or(s.seed);
    s.heading = args.heading.or(s.heading);

    let cfg = d.sim.sim_config()?;
    let [ntr, nva, nte] = d.sim.counts;
    let (tr, va, te) = make_dataset(&cfg, (ntr, nva, nte), d.sim.delta_frames, d.sim.seed)?;
    let out = d.out_dir(args.common.out.as_deref());
    create_dir(&out)?;
    for ds in [&tr, &va, &te] {
        let path = out.join(format!("{}.jsonl", ds.split.as_str()));
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(f);
        write_dataset(&mut w, ds)?;
        w.flush()?;
    }
    let suggestion = GroupId::for_box(cfg.box_spec.sides())?;
    println!("wrote {ntr}/{nva}/{nte} samples to {}", out.display());
    println!("kind {:?}, {} objects, box {:?}", cfg.kind, cfg.n, cfg.box_spec.sides());
    println!("horizon {} frames ({} time units)", d.sim.delta_frames, tr.horizon());
    println!("suggested group {suggestion}");
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let mut d = Descriptor::load(args.common.config.as_deref())?;
    let m = &mut d.model;
    m.feature_mode = args.model.mode.unwrap_or(m.feature_mode);
    m.pooling = args.model.pooling.unwrap_or(m.pooling);
    m.group = args.model.group.or(m.group);
    m.num_layers = args.model.layers.unwrap_or(m.num_layers);
    m.hidden = args.model.hidden.unwrap_or(m.hidden);
    if args.desk {
        d.train = TrainConfig {
            seed: d.train.seed,
            ..TrainConfig::desk()
        };
    }
    let t = &mut d.train;
    t.batch_size = args.batch_size.unwrap_or(t.batch_size);
    t.lr = args.lr.unwrap_or(t.lr);
    t.max_epochs = args.epochs.unwrap_or(t.max_epochs);
    t.patience = args.patience.unwrap_or(t.patience).min(t.max_epochs);
    t.seed = args.seed.unwrap_or(t.seed);
    d.init_seed = args.init_seed.unwrap_or(d.init_seed);

    let tr = load_split(&args.data.join("train.jsonl"))?;
    let va = load_split(&args.data.join("val.jsonl"))?;
    let test_path = args.data.join("test.jsonl");
    let te = test_path.exists().then(|| load_split(&test_path)).transpose()?;
    d.model.dim = tr.config.dim();

    let (model, params) = Model::new(d.model.clone(), d.init_seed)?;
    let (best, mut metrics) = train(&model, params, &tr, &va, &d.train)?;
    if let Some(te) = &te {
        metrics.test_mse = Some(evaluate(&Trained { model: &model, params: &best }, te)?);
    }

    let out = d.out_dir(args.common.out.as_deref());
    create_dir(&out)?;
    let ckpt = out.join("model.ckpt");
    let f = File::create(&ckpt).with_context(|| format!("creating {}", ckpt.display()))?;
    let mut w = BufWriter::new(f);
    save_model(&mut w, model.config(), &best)?;
    w.flush()?;
    write_file(&out.join("metrics.csv"), &metrics.to_csv())?;
    write_file(&out.join("metrics.json"), &serde_json::to_string_pretty(&metrics)?)?;
    let mut report = metrics.report();
    if let Some(te) = &te {
        let inertial = evaluate(&Inertial { horizon: te.horizon() }, te)?;
        report.push_str(&format!("inertial mse    {inertial:.6e}\n"));
    }
    write_file(&out.join("report.txt"), &report)?;
    print!("{report}");
    println!("checkpoint      {}", ckpt.display());
    Ok(())
}

/// Looks a label up in the model's group, then in the box's group.
fn find_element(label: &str, model: &Model, data: &Dataset) -> Result<GroupElement> {
    let dim = data.config.dim();
    if label == "identity" {
        return Ok(GroupElement::identity(dim));
    }
    let mut groups: Vec<PointGroup> = model.config().group()?.into_iter().collect();
    groups.push(PointGroup::from_id(GroupId::for_box(data.config.box_spec.sides())?)?);
    for g in &groups {
        if let Some(e) = g.element(label) {
            return Ok(e.clone());
        }
    }
    let mut known: Vec<&str> = Vec::new();
    for e in groups.iter().flat_map(|g| g.elements()) {
        if !known.contains(&e.label()) {
            known.push(e.label());
        }
    }
    bail!("no element {label:?}; known labels: {}", known.join(", "))
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let d = Descriptor::load(args.common.config.as_deref())?;
    let f = File::open(&args.checkpoint).with_context(|| format!("opening {}", args.checkpoint.display()))?;
    let (model, params) = load_model(BufReader::new(f))?;
    let data_path = if args.data.is_dir() { args.data.join("test.jsonl") } else { args.data.clone() };
    let data = load_split(&data_path)?;
    let predictor = Trained { model: &model, params: &params };

    let summary = match &args.transform {
        None => {
            let mse = evaluate(&predictor, &data)?;
            println!("mse {mse:.6e}");
            serde_json::json!({ "data": data_path, "mse": mse })
        }
        Some(label) => {
            let e = find_element(label, &model, &data)?;
            let g = generalization_eval(&predictor, &data, &e)?;
            println!("mse             {:.6e}", g.mse_plain);
            println!("mse {:<11} {:.6e}", g.element, g.mse_transformed);
            println!("ratio           {:.9}", g.ratio);
            serde_json::json!({ "data": data_path, "generalization": g })
        }
    };
    let out = d.out_dir(args.common.out.as_deref());
    create_dir(&out)?;
    write_file(&out.join("eval.json"), &serde_json::to_string_pretty(&summary)?)?;
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let numeric = err
        .chain()
        .any(|e| matches!(e.downcast_ref::<degnn::Error>(), Some(degnn::Error::NonFinite(_))));
    if numeric {
        EXIT_NUMERIC
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Audit(a) => match audit::cmd_audit(a) {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::from(EXIT_AUDIT),
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
