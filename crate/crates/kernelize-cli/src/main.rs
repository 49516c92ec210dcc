//! kernelize: featurize sparse datasets with randomized kernel feature
//! maps, export exact kernel matrices, measure estimator convergence, and
//! train/score a linear SVM on the encoded output.
//!
//! Exit codes: 0 success, 1 usage errors, 2 data/runtime errors.
//! Diagnostics go to stderr, results to stdout. Commands that write files
//! also write a `<output>.manifest.json` recording the full parameter set,
//! so any run can be reproduced bit for bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use kernelize::data::{self, NormMode, ParseOptions};
use kernelize::estimate::convergence_study;
use kernelize::kernels::{self, KernelKind, KernelSpec};
use kernelize::randstream::{uniform01, StreamKey};
use kernelize::sketch::{
    featurize_dataset, read_encoded_svmlight, write_encoded_svmlight, EncodedDataset, SketchMethod,
    SketchPlan,
};
use kernelize::trainer::{self, SvmModel, TrainConfig};

const PAIR_SLOT: u32 = 42;

#[derive(Parser)]
#[command(
    name = "kernelize",
    version,
    about = "Nonlinear kernels and their randomized linearizations for sparse nonnegative data"
)]
struct Cli {
    /// Worker thread count (default: KERNELIZE_THREADS or all cores).
    /// Results never depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Map a dataset through a randomized feature map (svmlight in/out).
    Featurize(FeaturizeArgs),
    /// Export an exact kernel matrix in precomputed text format.
    KernelMatrix(KernelMatrixArgs),
    /// Measure |estimate - exact kernel| across sample counts; write CSV.
    Converge(ConvergeArgs),
    /// Train a linear SVM (dual coordinate descent) on an encoded dataset.
    Train(TrainArgs),
    /// Predict with a trained model; prints accuracy against file labels.
    Predict(PredictArgs),
    /// Print the 58-value gamma grid for the RBF-family kernels.
    GammaGrid,
}

#[derive(Args)]
struct FeaturizeArgs {
    /// Input dataset (svmlight text).
    #[arg(long = "in")]
    input: PathBuf,
    /// Output path for the encoded dataset.
    #[arg(long)]
    out: PathBuf,
    /// signgauss | signcauchy | rff | frff | cws0 | mmacos | mmacoschi2 | mmrbf
    #[arg(long)]
    method: String,
    /// Sample count (nonzeros per encoded row).
    #[arg(long)]
    k: usize,
    /// Bucket bits (CWS-based methods), 1..=16.
    #[arg(long)]
    b: Option<u8>,
    /// Kernel width (rff, frff, mmrbf).
    #[arg(long)]
    gamma: Option<f64>,
    /// Master seed; fixes all randomness of the map.
    #[arg(long)]
    seed: u64,
    /// l1 | l2 | none — normalization applied before sketching.
    #[arg(long, default_value = "none")]
    normalize: String,
    /// Ambient dimension override (share one dimension across files).
    #[arg(long)]
    dim: Option<u32>,
}

#[derive(Args)]
struct KernelMatrixArgs {
    /// Training dataset (svmlight text).
    #[arg(long)]
    train: PathBuf,
    /// Optional test dataset; adds a test-by-train matrix.
    #[arg(long)]
    test: Option<PathBuf>,
    /// rho | acos | chi2 | acoschi2 | minmax | rbf | frbf | mmacos | mmacoschi2 | mmrbf
    #[arg(long)]
    kernel: String,
    /// Kernel width (rbf, frbf, mmrbf).
    #[arg(long)]
    gamma: Option<f64>,
    /// Output path for the train-by-train matrix.
    #[arg(long)]
    out: PathBuf,
    /// Output path for the test-by-train matrix (default: `<out>.t`).
    #[arg(long)]
    test_out: Option<PathBuf>,
    /// l1 | l2 | none — normalization applied before evaluation.
    #[arg(long, default_value = "none")]
    normalize: String,
    /// Ambient dimension override.
    #[arg(long)]
    dim: Option<u32>,
}

#[derive(Args)]
struct ConvergeArgs {
    /// Input dataset (svmlight text).
    #[arg(long = "in")]
    input: PathBuf,
    /// Exact kernel the estimator targets.
    #[arg(long)]
    kernel: String,
    /// Feature map under test.
    #[arg(long)]
    method: String,
    /// Comma-separated sample counts.
    #[arg(long, default_value = "128,256,512,1024,4096")]
    kgrid: String,
    /// Repetitions per cell (seed shifts by the repetition index).
    #[arg(long, default_value_t = 10)]
    reps: u32,
    /// Number of random row pairs to sample.
    #[arg(long)]
    pairs: usize,
    /// Master seed.
    #[arg(long)]
    seed: u64,
    /// Bucket bits (CWS-based methods).
    #[arg(long)]
    b: Option<u8>,
    /// Kernel width, shared by the kernel and the map where both need it.
    #[arg(long)]
    gamma: Option<f64>,
    /// l1 | l2 | none — normalization applied before both sides.
    #[arg(long, default_value = "none")]
    normalize: String,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Encoded training dataset (featurize output).
    #[arg(long = "in")]
    input: PathBuf,
    /// Regularization parameter C.
    #[arg(long)]
    c: Option<f64>,
    /// Comma-separated C grid; trains each, keeps the best.
    #[arg(long)]
    csweep: Option<String>,
    /// Encoded dataset scored during a C sweep (default: the training set).
    #[arg(long)]
    test: Option<PathBuf>,
    /// Model output path.
    #[arg(long)]
    model: PathBuf,
    /// Shuffle seed for the coordinate order.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Stopping tolerance on the projected gradient.
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    /// Maximum outer sweeps.
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
}

#[derive(Args)]
struct PredictArgs {
    /// Encoded dataset (featurize output).
    #[arg(long = "in")]
    input: PathBuf,
    /// Model path (train output).
    #[arg(long)]
    model: PathBuf,
    /// Write predicted labels here, one per line.
    #[arg(long)]
    labels_out: Option<PathBuf>,
}

enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }
}

macro_rules! data_error_from {
    ($($ty:ty),*) => {
        $(impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::Data(e.to_string())
            }
        })*
    };
}

data_error_from!(
    std::io::Error,
    kernelize::data::DataError,
    kernelize::kernels::KernelError,
    kernelize::sketch::SketchError,
    kernelize::estimate::EstimateError,
    kernelize::trainer::TrainError
);

#[derive(Serialize)]
struct RunManifest {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    args: BTreeMap<String, String>,
    inputs: Vec<String>,
    outputs: Vec<String>,
    seed: Option<u64>,
}

impl RunManifest {
    fn new(command: &'static str) -> Self {
        Self {
            tool: "kernelize",
            version: env!("CARGO_PKG_VERSION"),
            command,
            args: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            seed: None,
        }
    }

    fn arg(mut self, key: &str, value: impl ToString) -> Self {
        self.args.insert(key.to_string(), value.to_string());
        self
    }

    fn arg_opt(self, key: &str, value: &Option<impl ToString>) -> Self {
        match value {
            Some(v) => self.arg(key, v.to_string()),
            None => self,
        }
    }

    fn input(mut self, path: &Path) -> Self {
        self.inputs.push(path.display().to_string());
        self
    }

    fn output(mut self, path: &Path) -> Self {
        self.outputs.push(path.display().to_string());
        self
    }

    fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    /// Written next to the primary output as `<output>.manifest.json`.
    fn write(&self, primary_output: &Path) -> Result<(), CliError> {
        let mut path = primary_output.as_os_str().to_owned();
        path.push(".manifest.json");
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Data(format!("manifest: {e}")))?;
        std::fs::write(&path, json + "\n")?;
        Ok(())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };

    let threads = cli.threads.or_else(|| {
        std::env::var("KERNELIZE_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = threads {
        // Only caps parallelism; outputs are schedule-independent.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }

    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("run `kernelize --help` for usage");
            ExitCode::from(1)
        }
        Err(CliError::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Featurize(args) => cmd_featurize(args),
        Command::KernelMatrix(args) => cmd_kernel_matrix(args),
        Command::Converge(args) => cmd_converge(args),
        Command::Train(args) => cmd_train(args),
        Command::Predict(args) => cmd_predict(args),
        Command::GammaGrid => cmd_gamma_grid(),
    }
}

/// Write results to stdout, treating a closed pipe (e.g. `| head`) as a
/// clean exit rather than an error.
fn print_out(text: &str) -> Result<(), CliError> {
    use std::io::Write;
    match std::io::stdout().write_all(text.as_bytes()) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        Err(e) => Err(e.into()),
    }
}

fn parse_flag<T: std::str::FromStr<Err = String>>(flag: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|e: String| CliError::usage(format!("--{flag}: {e}")))
}

fn read_dataset(path: &Path, dim: Option<u32>) -> Result<kernelize::Dataset, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let d = data::parse_svmlight_with(&text, &ParseOptions { dim_override: dim })
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(d)
}

fn read_encoded(path: &Path) -> Result<(EncodedDataset, Option<SketchPlan>), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    read_encoded_svmlight(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn build_plan(
    method_s: &str,
    k: usize,
    b: Option<u8>,
    gamma: Option<f64>,
    seed: u64,
    normalize_s: &str,
) -> Result<SketchPlan, CliError> {
    let method: SketchMethod = parse_flag("method", method_s)?;
    let norm: NormMode = parse_flag("normalize", normalize_s)?;
    if method.needs_gamma() && gamma.is_none() {
        return Err(CliError::usage(format!(
            "--gamma is required for --method {method}"
        )));
    }
    if method.needs_bits() && b.is_none() {
        return Err(CliError::usage(format!(
            "--b is required for --method {method}"
        )));
    }
    SketchPlan::new(method, k, b, gamma, seed, norm).map_err(|e| CliError::usage(e.to_string()))
}

fn build_kernel_spec(kernel_s: &str, gamma: Option<f64>) -> Result<KernelSpec, CliError> {
    let kind: KernelKind = parse_flag("kernel", kernel_s)?;
    if kind.needs_gamma() && gamma.is_none() {
        return Err(CliError::usage(format!(
            "--gamma is required for --kernel {kind}"
        )));
    }
    KernelSpec::new(kind, if kind.needs_gamma() { gamma } else { None })
        .map_err(|e| CliError::usage(e.to_string()))
}

fn cmd_featurize(args: FeaturizeArgs) -> Result<(), CliError> {
    let plan = build_plan(
        &args.method,
        args.k,
        args.b,
        args.gamma,
        args.seed,
        &args.normalize,
    )?;
    let dataset = read_dataset(&args.input, args.dim)?;
    let encoded = featurize_dataset(&dataset, &plan)?;
    std::fs::write(&args.out, write_encoded_svmlight(&encoded, &plan))?;

    RunManifest::new("featurize")
        .arg("method", plan.method)
        .arg("k", plan.k)
        .arg_opt("b", &plan.b)
        .arg_opt("gamma", &plan.gamma)
        .arg("normalize", plan.norm)
        .arg_opt("dim", &args.dim)
        .seed(plan.seed)
        .input(&args.input)
        .output(&args.out)
        .write(&args.out)?;

    println!(
        "featurized {} rows: method={} k={} total_dim={} nnz/row={}",
        encoded.len(),
        plan.method,
        plan.k,
        encoded.dim(),
        plan.k
    );
    Ok(())
}

fn cmd_kernel_matrix(args: KernelMatrixArgs) -> Result<(), CliError> {
    let spec = build_kernel_spec(&args.kernel, args.gamma)?;
    let norm: NormMode = parse_flag("normalize", &args.normalize)?;

    let train = read_dataset(&args.train, args.dim)?.normalized(norm)?;
    let m = kernels::kernel_matrix(&train, &train, &spec)?;
    std::fs::write(&args.out, kernels::export_precomputed(&m))?;
    let mut manifest = RunManifest::new("kernel-matrix")
        .arg("kernel", spec.kind())
        .arg_opt("gamma", &spec.gamma())
        .arg("normalize", norm)
        .arg_opt("dim", &args.dim)
        .input(&args.train)
        .output(&args.out);
    println!(
        "wrote {}x{} {} matrix to {}",
        m.n_rows(),
        m.n_cols(),
        spec.kind(),
        args.out.display()
    );

    if let Some(test_path) = &args.test {
        let dim = Some(args.dim.unwrap_or(train.dim()));
        let test = read_dataset(test_path, dim)?.normalized(norm)?;
        let mt = kernels::kernel_matrix(&test, &train, &spec)?;
        let test_out = args.test_out.clone().unwrap_or_else(|| {
            let mut p = args.out.as_os_str().to_owned();
            p.push(".t");
            PathBuf::from(p)
        });
        std::fs::write(&test_out, kernels::export_precomputed(&mt))?;
        manifest = manifest.input(test_path).output(&test_out);
        println!(
            "wrote {}x{} {} matrix to {}",
            mt.n_rows(),
            mt.n_cols(),
            spec.kind(),
            test_out.display()
        );
    }
    manifest.write(&args.out)
}

fn sample_pairs(
    d: &kernelize::Dataset,
    count: usize,
    seed: u64,
) -> Result<Vec<(kernelize::SparseVector, kernelize::SparseVector)>, CliError> {
    let n = d.len();
    if n < 2 {
        return Err(CliError::Data(
            "need at least 2 rows to sample pairs".into(),
        ));
    }
    let mut pairs = Vec::with_capacity(count);
    for t in 0..count {
        let a = (uniform01(StreamKey::new(seed, t as u64, 1, PAIR_SLOT)) * n as f64) as usize;
        let mut b =
            (uniform01(StreamKey::new(seed, t as u64, 2, PAIR_SLOT)) * (n - 1) as f64) as usize;
        let a = a.min(n - 1);
        b = b.min(n - 2);
        if b >= a {
            b += 1;
        }
        pairs.push((d.rows()[a].1.clone(), d.rows()[b].1.clone()));
    }
    Ok(pairs)
}

fn cmd_converge(args: ConvergeArgs) -> Result<(), CliError> {
    let spec = build_kernel_spec(&args.kernel, args.gamma)?;
    let k_grid: Vec<usize> = args
        .kgrid
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| CliError::usage(format!("--kgrid: bad entry `{s}`")))
        })
        .collect::<Result<_, _>>()?;
    // Template plan; convergence_study swaps in each grid k and shifts the
    // seed per repetition.
    let plan = build_plan(
        &args.method,
        1,
        args.b,
        args.gamma,
        args.seed,
        &args.normalize,
    )?;

    let dataset = read_dataset(&args.input, None)?;
    let pairs = sample_pairs(&dataset, args.pairs, args.seed)?;
    let report = convergence_study(&pairs, &spec, &plan, &k_grid, args.reps)?;
    let csv = report.to_csv();
    std::fs::write(&args.out, &csv)?;

    RunManifest::new("converge")
        .arg("kernel", spec.kind())
        .arg("method", plan.method)
        .arg("kgrid", &args.kgrid)
        .arg("reps", args.reps)
        .arg("pairs", args.pairs)
        .arg_opt("b", &plan.b)
        .arg_opt("gamma", &args.gamma)
        .arg("normalize", plan.norm)
        .seed(args.seed)
        .input(&args.input)
        .output(&args.out)
        .write(&args.out)?;

    print_out(&csv)
}

fn parse_c_grid(list: &str) -> Result<Vec<f64>, CliError> {
    list.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|c| c.is_finite() && *c > 0.0)
                .ok_or_else(|| CliError::usage(format!("--csweep: bad C value `{s}`")))
        })
        .collect()
}

fn cmd_train(args: TrainArgs) -> Result<(), CliError> {
    let base_cfg = TrainConfig {
        c: 1.0,
        max_outer_iters: args.max_iters,
        tolerance: args.tol,
        shuffle_seed: args.seed,
    };
    let (train, _) = read_encoded(&args.input)?;

    let (model, sweep_summary) = match (args.c, &args.csweep) {
        (Some(_), Some(_)) => {
            return Err(CliError::usage("--c and --csweep are mutually exclusive"));
        }
        (Some(c), None) => {
            if !(c.is_finite() && c > 0.0) {
                return Err(CliError::usage(format!("--c must be positive, got {c}")));
            }
            let cfg = TrainConfig { c, ..base_cfg };
            (trainer::train_multiclass(&train, &cfg)?, None)
        }
        (None, Some(list)) => {
            let grid = parse_c_grid(list)?;
            let eval = match &args.test {
                Some(path) => read_encoded(path)?.0,
                None => train.clone(),
            };
            let sweep = trainer::c_sweep(&train, &eval, &grid, &base_cfg)?;
            let (best_c, _) = sweep.best();
            let cfg = TrainConfig {
                c: best_c,
                ..base_cfg
            };
            (trainer::train_multiclass(&train, &cfg)?, Some(sweep))
        }
        (None, None) => {
            return Err(CliError::usage("one of --c or --csweep is required"));
        }
    };

    std::fs::write(&args.model, model.to_text())?;

    RunManifest::new("train")
        .arg_opt("c", &args.c)
        .arg_opt("csweep", &args.csweep)
        .arg_opt("test", &args.test.as_ref().map(|p| p.display().to_string()))
        .arg("tol", args.tol)
        .arg("max_iters", args.max_iters)
        .seed(args.seed)
        .input(&args.input)
        .output(&args.model)
        .write(&args.model)?;

    if let Some(sweep) = sweep_summary {
        let mut table = String::from("C,accuracy\n");
        for &(c, acc) in &sweep.results {
            let _ = writeln!(table, "{c},{acc:.6}");
        }
        print_out(&table)?;
        let (best_c, best_acc) = sweep.best();
        println!("best C={best_c} accuracy={best_acc:.6}");
    }
    println!(
        "trained {} classes on {} rows (dim {}), C={}; model written to {}",
        model.class_ids().len(),
        train.len(),
        train.dim(),
        model.c(),
        args.model.display()
    );
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> Result<(), CliError> {
    let (dataset, _) = read_encoded(&args.input)?;
    let model_text = std::fs::read_to_string(&args.model)
        .map_err(|e| CliError::Data(format!("{}: {e}", args.model.display())))?;
    let model = SvmModel::from_text(&model_text)
        .map_err(|e| CliError::Data(format!("{}: {e}", args.model.display())))?;

    let rows: Vec<kernelize::EncodedVector> =
        dataset.rows().iter().map(|(_, v)| v.clone()).collect();
    let predictions = trainer::predict(&model, &rows)?;
    let acc = trainer::accuracy(&predictions, &dataset.labels())?;

    if let Some(out) = &args.labels_out {
        let mut text = String::new();
        for p in &predictions {
            let _ = writeln!(text, "{p}");
        }
        std::fs::write(out, text)?;
        RunManifest::new("predict")
            .input(&args.input)
            .input(&args.model)
            .output(out)
            .write(out)?;
    }
    println!("predicted {} rows, accuracy {acc:.6}", predictions.len());
    Ok(())
}

fn cmd_gamma_grid() -> Result<(), CliError> {
    let mut out = String::new();
    for gamma in kernels::gamma_grid() {
        let _ = writeln!(out, "{gamma}");
    }
    print_out(&out)
}
