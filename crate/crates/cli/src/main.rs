//! `lmnet` command-line tool.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use lmnet::bench::{cutoff_sweep, size_sweep, BenchRecord, SizeRecord, SizeSweepConfig};
use lmnet::inference::{infer_batch, BBConfig, InferMethod};
use lmnet::io::{
    format_predictions, read_label_vectors, read_multilabel_svmlight, write_multilabel_svmlight, MinMaxScaler,
    ModelFile, SvmlightOptions, TrainMeta,
};
use lmnet::metrics::evaluate;
use lmnet::ordering::{order_strategy, OrderKind};
use lmnet::synth::{random_weights, sample_bm, sample_sbn, InputModel, SynthConfig};
use lmnet::{train_lmbm, train_lmsbn, Dataset, GraphKind, GraphSpec, TrainConfig};

#[derive(Parser)]
#[command(name = "lmnet", version, about = "Large margin belief networks for multi-label prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model on a multi-label svmlight file
    Train(TrainArgs),
    /// Predict label vectors for every instance of a data file
    Predict(PredictArgs),
    /// Compare predictions with true labels
    Eval(EvalArgs),
    /// Search-effort experiments for branch-and-bound inference
    Bench(BenchArgs),
    /// Sample a dataset from a random planted model
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKind {
    Lmsbn,
    Lmbm,
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphShape {
    Full,
    Chain,
    Independent,
}

#[derive(Clone, Copy, ValueEnum)]
enum OrderArg {
    Index,
    Fscore,
}

#[derive(Clone, Copy, ValueEnum)]
enum InferArg {
    Bb,
    Exhaustive,
    Icm,
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalFormat {
    Csv,
    Kv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Planted {
    Sbn,
    Bm,
}

#[derive(Args, Clone)]
struct DataOpts {
    /// First label id in the label field: 0, 1 or auto
    #[arg(long, default_value = "1")]
    label_base: String,
}

impl DataOpts {
    fn read(&self, path: &Path, k: Option<usize>, d: Option<usize>) -> Result<Dataset> {
        let opts = SvmlightOptions { k, d, label_base: self.label_base.parse()? };
        read_multilabel_svmlight(path, &opts).with_context(|| format!("reading {}", path.display()))
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_enum, default_value = "lmsbn")]
    model: ModelKind,
    #[arg(long, value_enum, default_value = "full")]
    graph: GraphShape,
    #[arg(long, value_enum, default_value = "index")]
    order: OrderArg,
    #[arg(long, default_value_t = 1e-3)]
    lambda: f64,
    #[arg(long, default_value_t = 0.0)]
    eta0: f64,
    /// Maximum number of epochs
    #[arg(long, default_value_t = 1000)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    /// Seed for the coordinate shuffling
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Rescale every input feature to [-1, 1] using the training range
    #[arg(long)]
    scale: bool,
    /// Write the training log here instead of stderr
    #[arg(long)]
    log: Option<PathBuf>,
    /// Number of labels; the largest label id in the file when omitted
    #[arg(long)]
    num_labels: Option<usize>,
    /// Input dimension; the largest feature index in the file when omitted
    #[arg(long)]
    num_features: Option<usize>,
    #[command(flatten)]
    data_opts: DataOpts,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model_file: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Initial upper bound for branch-and-bound
    #[arg(long = "S", default_value_t = 1e9)]
    s: f64,
    #[arg(long)]
    max_states: Option<u64>,
    /// Double S and retry when nothing is found under it
    #[arg(long)]
    escalate: bool,
    #[arg(long, value_enum, default_value = "bb")]
    infer: InferArg,
    #[arg(long, default_value_t = 100)]
    max_sweeps: usize,
    /// Output file; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    data_opts: DataOpts,
}

#[derive(Args)]
struct EvalArgs {
    /// Prediction file (or svmlight file)
    #[arg(long)]
    pred: PathBuf,
    /// svmlight file (or prediction file) with the true labels
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: EvalFormat,
    #[command(flatten)]
    data_opts: DataOpts,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, required_unless_present = "k_list")]
    model_file: Option<PathBuf>,
    #[arg(long, required_unless_present = "k_list")]
    data: Option<PathBuf>,
    #[arg(long = "S-list", value_delimiter = ',', default_value = "1,2,4,8")]
    s_list: Vec<f64>,
    /// Branch evaluations per search; defaults to K times the number of paths below S
    #[arg(long)]
    max_states: Option<u64>,
    /// Run the size sweep over these K instead of the cutoff sweep
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["model_file", "data"])]
    k_list: Option<Vec<usize>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    d: usize,
    #[arg(long, default_value_t = 500)]
    n_train: usize,
    #[arg(long, default_value_t = 100)]
    n_test: usize,
    #[arg(long, default_value_t = 4.0)]
    planted_scale: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    data_opts: DataOpts,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum, default_value = "sbn")]
    model: Planted,
    #[arg(long, value_enum, default_value = "full")]
    graph: GraphShape,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    d: usize,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Standard deviation of the planted weights
    #[arg(long, default_value_t = 1.0)]
    weight_scale: f64,
    /// Seed of the planted weights; the same model can then generate several splits
    #[arg(long, default_value_t = 0)]
    weight_seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also save the planted model
    #[arg(long)]
    planted_out: Option<PathBuf>,
}

fn build_graph(kind: GraphKind, shape: GraphShape, k: usize, d: usize, order: Vec<usize>) -> lmnet::Result<GraphSpec> {
    match shape {
        GraphShape::Full => GraphSpec::full(kind, k, d, order),
        GraphShape::Chain => GraphSpec::chain(kind, k, d, order),
        GraphShape::Independent => GraphSpec::independent(kind, k, d),
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            Box::new(io::BufWriter::new(fs::File::create(p).with_context(|| format!("creating {}", p.display()))?))
        }
        None => Box::new(io::stdout().lock()),
    })
}

fn train(args: TrainArgs) -> Result<()> {
    let mut data = args.data_opts.read(&args.data, args.num_labels, args.num_features)?;
    let scaler = if args.scale {
        let sc = MinMaxScaler::fit(&data)?;
        sc.transform(&mut data)?;
        Some(sc)
    } else {
        None
    };
    let config = TrainConfig {
        lambda: args.lambda,
        eta0: args.eta0,
        max_epochs: args.epochs,
        tolerance: args.tol,
        shuffle_seed: args.seed,
        shuffle: true,
    };
    let kind = match args.model {
        ModelKind::Lmsbn => GraphKind::Directed,
        ModelKind::Lmbm => GraphKind::Undirected,
    };
    let order_kind = match args.order {
        OrderArg::Index => OrderKind::Index,
        OrderArg::Fscore => OrderKind::FScore,
    };
    let strategy = order_strategy(order_kind, &data, &config)?;
    let graph = build_graph(kind, args.graph, data.k, data.d, strategy.order.clone())?;
    let trained = match kind {
        GraphKind::Directed => train_lmsbn(&data, &graph, &config)?,
        GraphKind::Undirected => train_lmbm(&data, &graph, &config)?,
    };
    let rep = &trained.report;

    let mut log = String::new();
    log.push_str(&format!(
        "order {}\n",
        strategy.order.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(" ")
    ));
    if let Some(f) = &strategy.per_label_fscores {
        log.push_str(&format!("order_fscores {}\n", f.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")));
    }
    log.push_str("subproblem,epochs,max_pg,gap,converged\n");
    for (i, s) in rep.subproblems.iter().enumerate() {
        log.push_str(&format!("{},{},{},{},{}\n", i + 1, s.epochs, s.max_pg, s.gap, s.converged));
    }
    log.push_str(&format!("epochs={} final_gap={} converged={}\n", rep.epochs, rep.final_gap, rep.converged));
    match &args.log {
        Some(p) => fs::write(p, &log)?,
        None => eprint!("{log}"),
    }
    if !rep.converged {
        eprintln!("warning: stopped after {} epochs without reaching tolerance {}", rep.epochs, args.tol);
    }

    let model = ModelFile {
        graph,
        weights: trained.weights,
        meta: TrainMeta { epochs: rep.epochs, final_gap: rep.final_gap, converged: rep.converged },
        scaler,
    };
    model.save(&args.out).with_context(|| format!("writing {}", args.out.display()))?;
    Ok(())
}

fn load_inputs(model: &ModelFile, path: &Path, opts: &DataOpts) -> Result<Dataset> {
    let mut data = opts.read(path, Some(model.graph.k()), Some(model.graph.d()))?;
    if let Some(sc) = &model.scaler {
        sc.transform(&mut data)?;
    }
    Ok(data)
}

fn predict(args: PredictArgs) -> Result<()> {
    let model = ModelFile::load(&args.model_file).with_context(|| format!("loading {}", args.model_file.display()))?;
    let method = match args.infer {
        InferArg::Bb => {
            if model.graph.kind() != GraphKind::Directed {
                bail!("--infer bb needs a directed (lmsbn) model; use --infer exhaustive or icm");
            }
            InferMethod::BranchAndBound(BBConfig {
                s: args.s,
                max_states: args.max_states,
                escalate: args.escalate,
                ..BBConfig::default()
            })
        }
        InferArg::Exhaustive => InferMethod::Exhaustive,
        InferArg::Icm => InferMethod::Icm { max_sweeps: args.max_sweeps },
    };
    let data = load_inputs(&model, &args.data, &args.data_opts)?;
    let xs: Vec<&[f64]> = data.instances.iter().map(|i| i.x.as_slice()).collect();
    let results = infer_batch(&model.graph, &model.weights, &xs, &method)?;
    let mut out = output(args.out.as_deref())?;
    out.write_all(format_predictions(&results).as_bytes())?;
    out.flush()?;
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let read = |p: &Path, k: Option<usize>| -> Result<Vec<Vec<lmnet::Label>>> {
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        let opts = SvmlightOptions { k, d: None, label_base: args.data_opts.label_base.parse()? };
        read_label_vectors(&text, &opts).with_context(|| format!("parsing {}", p.display()))
    };
    let pred = read(&args.pred, None)?;
    let k = pred.first().map(Vec::len);
    let truth = read(&args.truth, k)?;
    let report = evaluate(&truth, &pred)?;
    match args.format {
        EvalFormat::Csv => println!("{}\n{}", lmnet::MetricReport::CSV_HEADER, report.csv_row()),
        EvalFormat::Kv => println!("{}", report.key_values()),
    }
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    let mut out = output(args.out.as_deref())?;
    if let Some(k_list) = &args.k_list {
        let config = SizeSweepConfig {
            seed: args.seed,
            d: args.d,
            n_train: args.n_train,
            n_test: args.n_test,
            planted_scale: args.planted_scale,
            max_states: args.max_states.or(SizeSweepConfig::default().max_states),
            ..SizeSweepConfig::default()
        };
        writeln!(out, "{}", SizeRecord::CSV_HEADER)?;
        for r in size_sweep(k_list, &config)? {
            writeln!(out, "{}", r.csv_row())?;
        }
    } else {
        let (Some(model_file), Some(data)) = (&args.model_file, &args.data) else {
            bail!("bench needs --model-file and --data, or --k-list");
        };
        let model = ModelFile::load(model_file).with_context(|| format!("loading {}", model_file.display()))?;
        if model.graph.kind() != GraphKind::Directed {
            bail!("the cutoff sweep runs branch-and-bound and needs a directed (lmsbn) model");
        }
        let data = load_inputs(&model, data, &args.data_opts)?;
        writeln!(out, "{}", BenchRecord::CSV_HEADER)?;
        for r in cutoff_sweep(&model.graph, &model.weights, &data, &args.s_list, args.max_states)? {
            writeln!(out, "{}", r.csv_row())?;
        }
    }
    out.flush()?;
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let kind = match args.model {
        Planted::Sbn => GraphKind::Directed,
        Planted::Bm => GraphKind::Undirected,
    };
    let graph = build_graph(kind, args.graph, args.k, args.d, (0..args.k).collect())?;
    if !(args.weight_scale >= 0.0 && args.weight_scale.is_finite()) {
        bail!("--weight-scale must be finite and non-negative");
    }
    let weights = random_weights(&graph, args.weight_scale, &mut ChaCha8Rng::seed_from_u64(args.weight_seed));
    let input = if args.d == 0 { InputModel::None } else { InputModel::StandardNormal };
    let config = SynthConfig { seed: args.seed, n: args.n, input, graph: graph.clone(), weights: weights.clone() };
    let data = match kind {
        GraphKind::Directed => sample_sbn(&config)?,
        GraphKind::Undirected => sample_bm(&config)?,
    };
    write_multilabel_svmlight(&args.out, &data)?;
    if let Some(p) = &args.planted_out {
        let meta = TrainMeta { epochs: 0, final_gap: 0.0, converged: false };
        ModelFile { graph, weights, meta, scaler: None }.save(p)?;
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Train(a) => train(a),
        Command::Predict(a) => predict(a),
        Command::Eval(a) => eval(a),
        Command::Bench(a) => bench(a),
        Command::Synth(a) => synth(a),
    }
}
