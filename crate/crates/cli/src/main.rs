use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use kernelsmith::{
    build, evaluate, generate, load_csv_with_sidecar, save_csv, BuildParams, DdaConfig, DdaError, EvalParams, ForestConfig,
    GeneratorError, GeneratorSpec, ReportError, SamplingConfig, SamplingError, WidthRule,
};

#[derive(Parser)]
#[command(name = "kernelsmith", version, about = "Generate semi-artificial tabular data from RBF networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a generator on a CSV file and write it as JSON.
    Fit(FitArgs),
    /// Sample a CSV file from a generator.
    Gen(GenArgs),
    /// Compare a generated CSV with the original and write a quality report.
    Eval(EvalArgs),
}

#[derive(Args)]
struct FitArgs {
    csv: PathBuf,
    /// Schema JSON describing the CSV columns.
    #[arg(long)]
    schema: PathBuf,
    /// Kernels with fewer committed instances are dropped.
    #[arg(long, default_value_t = 1)]
    min_w: usize,
    /// Encode nominal attributes one-hot (true) or as a single scaled code (false).
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    nominal_binary: bool,
    #[arg(long, default_value_t = 0.4)]
    theta_plus: f64,
    #[arg(long, default_value_t = 0.2)]
    theta_minus: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "generator.json")]
    out: PathBuf,
}

#[derive(Args)]
struct SamplingArgs {
    /// Comma-separated class proportions, in schema order. Defaults to the
    /// training proportions.
    #[arg(long, value_delimiter = ',')]
    class_dist: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = Var::Estimated)]
    var: Var,
    /// Standard deviation used where a kernel's estimated spread is zero.
    #[arg(long, default_value_t = kernelsmith::sampler::DEFAULT_SPREAD)]
    default_spread: f64,
}

#[derive(Args)]
struct GenArgs {
    generator: PathBuf,
    /// Number of rows to generate.
    #[arg(long)]
    size: usize,
    #[command(flatten)]
    sampling: SamplingArgs,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "generated.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    original: PathBuf,
    generated: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    /// Generator of `generated`; enables averaging the ARI over freshly
    /// sampled datasets.
    #[arg(long)]
    generator: Option<PathBuf>,
    #[command(flatten)]
    sampling: SamplingArgs,
    #[arg(long, default_value_t = 10)]
    repeats_ari: usize,
    #[arg(long, default_value_t = 5)]
    repeats_cv: usize,
    #[arg(long, default_value_t = 100)]
    trees: usize,
    /// Dataset name in the report; defaults to the original file stem.
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "report.json")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Var {
    Estimated,
    Silverman,
}

impl From<Var> for WidthRule {
    fn from(v: Var) -> Self {
        match v {
            Var::Estimated => WidthRule::Estimated,
            Var::Silverman => WidthRule::Silverman,
        }
    }
}

/// An error together with the process exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

const USAGE: u8 = 2;
const BUILD: u8 = 3;
const SAMPLING: u8 = 4;

fn fail(code: u8) -> impl FnOnce(anyhow::Error) -> Failure {
    move |error| Failure { code, error }
}

trait OrExit<T> {
    fn or_exit(self, code: u8) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> OrExit<T> for Result<T, E> {
    fn or_exit(self, code: u8) -> Result<T, Failure> {
        self.map_err(|e| fail(code)(e.into()))
    }
}

fn sampling_code(e: &SamplingError) -> u8 {
    match e {
        SamplingError::RejectionExhausted { .. } => SAMPLING,
        _ => USAGE,
    }
}

fn build_code(e: &GeneratorError) -> u8 {
    match e {
        GeneratorError::BadMinWeight | GeneratorError::Dda(DdaError::BadThresholds { .. }) => USAGE,
        GeneratorError::Preprocess(_) | GeneratorError::Io(_) | GeneratorError::Json(_) => USAGE,
        _ => BUILD,
    }
}

fn seed_or_clock(seed: Option<u64>) -> Result<u64, Failure> {
    if let Some(s) = seed {
        return Ok(s);
    }
    if std::env::var_os("CI").is_some() {
        return Err(fail(USAGE)(anyhow::anyhow!("--seed is required when CI is set")));
    }
    let nanos = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_nanos()).unwrap_or_default();
    let s = nanos as u64;
    eprintln!("seed: {s}");
    Ok(s)
}

fn load(csv: &Path, schema: &Path) -> Result<kernelsmith::Dataset, Failure> {
    load_csv_with_sidecar(csv, schema).with_context(|| format!("reading {}", csv.display())).or_exit(USAGE)
}

fn load_generator(path: &Path) -> Result<GeneratorSpec, Failure> {
    GeneratorSpec::load(path).with_context(|| format!("reading generator {}", path.display())).or_exit(USAGE)
}

fn sampling_config(args: &SamplingArgs, size: usize, seed: u64) -> SamplingConfig {
    SamplingConfig {
        class_distribution: args.class_dist.clone(),
        var: args.var.into(),
        default_spread: args.default_spread,
        ..SamplingConfig::new(size, seed)
    }
}

fn fit(args: FitArgs) -> Result<(), Failure> {
    let seed = seed_or_clock(args.seed)?;
    let data = load(&args.csv, &args.schema)?;
    let params = BuildParams {
        min_w: args.min_w,
        nominal_as_binary: args.nominal_binary,
        dda: DdaConfig { theta_plus: args.theta_plus, theta_minus: args.theta_minus, ..DdaConfig::default() },
        seed,
    };
    let spec = build(&data, &params).map_err(|e| Failure { code: build_code(&e), error: e.into() })?;
    spec.save(&args.out).with_context(|| format!("writing {}", args.out.display())).or_exit(USAGE)?;
    println!("G = {}  t = {:.3}s  ->  {}", spec.kernel_count(), spec.meta.build_seconds, args.out.display());
    Ok(())
}

fn gen(args: GenArgs) -> Result<(), Failure> {
    let seed = seed_or_clock(args.seed)?;
    let spec = load_generator(&args.generator)?;
    let cfg = sampling_config(&args.sampling, args.size, seed);
    let out = generate(&spec, &cfg).map_err(|e| Failure { code: sampling_code(&e), error: e.into() })?;
    save_csv(&args.out, &out).with_context(|| format!("writing {}", args.out.display())).or_exit(USAGE)?;
    let counts: Vec<String> = out.class_counts().iter().map(usize::to_string).collect();
    println!("{} rows ({})  ->  {}", out.len(), counts.join("/"), args.out.display());
    Ok(())
}

fn report_code(e: &ReportError) -> u8 {
    match e {
        ReportError::Sampling(s) => sampling_code(s),
        _ => USAGE,
    }
}

fn eval(args: EvalArgs) -> Result<(), Failure> {
    let seed = seed_or_clock(args.seed)?;
    let original = load(&args.original, &args.schema)?;
    let generated = load(&args.generated, &args.schema)?;
    let spec = args.generator.as_deref().map(load_generator).transpose()?;
    let cfg = sampling_config(&args.sampling, generated.len(), kernelsmith::rng::derive_seed(seed, 1));
    let params = EvalParams {
        repeats_ari: args.repeats_ari,
        repeats_cv: args.repeats_cv,
        seed,
        forest: ForestConfig { tree_count: args.trees, ..ForestConfig::default() },
    };
    let name = args.name.clone().unwrap_or_else(|| args.original.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned()));
    let report = evaluate(&name, &original, &generated, &params, spec.as_ref().map(|s| (s, &cfg)))
        .map_err(|e| Failure { code: report_code(&e), error: e.into() })?;
    let json = serde_json::to_string_pretty(&report).or_exit(USAGE)?;
    std::fs::write(&args.out, json).with_context(|| format!("writing {}", args.out.display())).or_exit(USAGE)?;
    print!("{}", report.table());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(a) => fit(a),
        Command::Gen(a) => gen(a),
        Command::Eval(a) => eval(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, error }) => {
            eprintln!("error: {error:#}");
            ExitCode::from(code)
        }
    }
}
