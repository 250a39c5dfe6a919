//! `wick`: command-line front end for wick-core.

mod commands;
mod model;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use wick_core::WickError;

#[derive(Parser, Debug)]
#[command(name = "wick", version, about = "Wick products, Appell polynomials and Wick integrals")]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    /// Re-run the command recorded in a file written by --output.
    #[arg(long, global = true, value_name = "FILE")]
    input: Option<PathBuf>,

    /// Also write the JSON result envelope to FILE.
    #[arg(long, global = true, value_name = "FILE")]
    output: Option<PathBuf>,

    /// Human-readable text instead of JSON.
    #[arg(long, global = true, conflicts_with = "csv")]
    pretty: bool,

    /// CSV for commands that produce a table.
    #[arg(long, global = true)]
    csv: bool,
}

fn model_arg(s: &str) -> Result<String, String> {
    model::parse_model(s).map(|_| s.to_string())
}

fn rows_arg(s: &str) -> Result<String, String> {
    model::parse_rows(s).map(|_| s.to_string())
}

fn word_arg(s: &str) -> Result<String, String> {
    model::parse_word(s).map(|_| s.to_string())
}

#[derive(Subcommand, Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "command", content = "args", rename_all = "kebab-case")]
enum Command {
    /// Appell polynomial x^{⋄I} of a model.
    Appell(AppellArgs),
    /// Wick product x^{I_1} ⋄ ⋯ ⋄ x^{I_m} of monomials.
    WickProduct(WickProductArgs),
    /// Enumerate or count diagrams on rows of nodes.
    Diagrams(DiagramsArgs),
    /// Joint cumulant (or moment) of model variables or second-chaos kernels.
    Cumulant(CumulantArgs),
    /// Wick product of Y_k = x^{⋄I_k} relative to Y, in the x-Appell basis,
    /// or the second-chaos change of chaos for kernels.
    ChangeChaos(ChangeChaosArgs),
    /// Cumulants and kernel truncation of the Rosenblatt process.
    Rosenblatt(RosenblattArgs),
    /// Pathwise identities on a sampled fBm path.
    Verify(VerifyArgs),
    /// Monte Carlo experiments.
    Mc(McArgs),
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Form {
    Closed,
    Recursive,
    Inverse,
    Generating,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum BasisArg {
    Monomial,
    Appell,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Method {
    Diagrams,
    Iterate,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Check {
    ScalarIdentity,
    ItoResidual,
    Consistency,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[command(group = clap::ArgGroup::new("which").required(true))]
struct AppellArgs {
    #[arg(long, default_value = "gaussian:1", value_parser = model_arg)]
    model: String,
    /// Univariate degree n, for x^{⋄n}.
    #[arg(long, group = "which")]
    degree: Option<usize>,
    /// Multi-index as a word over x, y, z, w.
    #[arg(long, group = "which", value_parser = word_arg)]
    index: Option<String>,
    #[arg(long, value_enum, default_value = "closed")]
    form: Form,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct WickProductArgs {
    #[arg(long, default_value = "gaussian:1", value_parser = model_arg)]
    model: String,
    /// Rows such as `2,1` or `xy,x`.
    #[arg(long, value_parser = rows_arg)]
    rows: String,
    #[arg(long, value_enum, default_value = "monomial")]
    basis: BasisArg,
    #[arg(long, value_enum, default_value = "diagrams")]
    method: Method,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct DiagramsArgs {
    #[arg(long, value_parser = rows_arg)]
    rows: String,
    #[arg(long)]
    total: bool,
    #[arg(long)]
    nonflat: bool,
    #[arg(long)]
    gaussian: bool,
    #[arg(long)]
    connected: bool,
    #[arg(long)]
    nonempty_residual: bool,
    /// Print only the number of diagrams.
    #[arg(long)]
    count: bool,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[command(group = clap::ArgGroup::new("source").required(true))]
struct CumulantArgs {
    #[arg(long, default_value = "gaussian:1", value_parser = model_arg)]
    model: String,
    /// Variables as a word over x, y, z, w.
    #[arg(long, group = "source", value_parser = word_arg)]
    vars: Option<String>,
    /// JSON array of second-chaos kernels.
    #[arg(long, group = "source", value_name = "FILE")]
    kernels: Option<PathBuf>,
    /// Moment instead of cumulant (model variables only).
    #[arg(long, conflicts_with = "kernels")]
    moment: bool,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[command(group = clap::ArgGroup::new("source").required(true))]
struct ChangeChaosArgs {
    #[arg(long, default_value = "gaussian:1", value_parser = model_arg)]
    model: String,
    #[arg(long, group = "source", value_parser = rows_arg)]
    rows: Option<String>,
    /// JSON array of two or three second-chaos kernels.
    #[arg(long, group = "source", value_name = "FILE")]
    kernels: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct RosenblattArgs {
    #[arg(long = "H", default_value_t = 0.7)]
    hurst: f64,
    #[arg(long, default_value_t = 2)]
    order: usize,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    /// Kernel truncation report over these grid sizes instead.
    #[arg(long, value_delimiter = ',', value_name = "N,N,…")]
    truncation: Option<Vec<usize>>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value = "scalar-identity")]
    check: Check,
    #[arg(long, default_value = "fbm:0.7", value_parser = model_arg)]
    model: String,
    #[arg(long, default_value_t = 256)]
    grid: usize,
    /// Appell degree (scalar identity) or integrand degree (consistency).
    #[arg(long, default_value_t = 1)]
    n: usize,
    #[arg(long, default_value_t = 4)]
    levels: usize,
    #[arg(long)]
    shifted: bool,
    #[arg(long)]
    seed: u64,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[command(group = clap::ArgGroup::new("spec").required(true))]
struct McArgs {
    #[arg(long, group = "spec")]
    experiment: Option<String>,
    /// Experiment config as JSON or key=value lines; flags override it.
    #[arg(long, group = "spec", value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long = "H")]
    hurst: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    paths: usize,
    #[arg(long)]
    seed: u64,
    /// Worker threads; results do not depend on it.
    #[arg(long, default_value_t = 1)]
    #[serde(skip, default = "one")]
    workers: usize,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    kernel_grid: Option<usize>,
}

fn one() -> usize {
    1
}

/// Result of one command in each output format.
pub struct Outcome {
    pub result: Value,
    pub text: String,
    pub csv: Option<String>,
}

enum Failure {
    Usage(String),
    Domain(WickError),
}

impl From<WickError> for Failure {
    fn from(e: WickError) -> Self {
        Failure::Domain(e)
    }
}

fn run(cli: Cli) -> Result<String, Failure> {
    let command = match (cli.command, &cli.input) {
        (Some(_), Some(_)) => return Err(Failure::Usage("--input replaces the subcommand; give only one".into())),
        (None, None) => return Err(Failure::Usage("a subcommand or --input is required".into())),
        (Some(c), None) => c,
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| WickError::Invalid(format!("cannot read {}: {e}", path.display())))?;
            let mut v: Value = serde_json::from_str(&text).map_err(|e| WickError::Parse(e.to_string()))?;
            if let Some(obj) = v.as_object_mut() {
                obj.remove("result");
            }
            serde_json::from_value(v).map_err(|e| WickError::Parse(format!("{}: {e}", path.display())))?
        }
    };
    let outcome = match &command {
        Command::Appell(a) => commands::appell(a)?,
        Command::WickProduct(a) => commands::wick_product(a)?,
        Command::Diagrams(a) => commands::diagrams(a)?,
        Command::Cumulant(a) => commands::cumulant(a)?,
        Command::ChangeChaos(a) => commands::change_chaos(a)?,
        Command::Rosenblatt(a) => commands::rosenblatt(a)?,
        Command::Verify(a) => commands::verify(a)?,
        Command::Mc(a) => commands::mc(a)?,
    };
    let mut envelope = serde_json::to_value(&command).expect("arguments serialize");
    envelope["result"] = outcome.result;
    let json = serde_json::to_string_pretty(&envelope).expect("result serializes") + "\n";
    if let Some(path) = &cli.output {
        std::fs::write(path, &json).map_err(|e| WickError::Invalid(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(if cli.pretty {
        outcome.text + "\n"
    } else if cli.csv {
        outcome
            .csv
            .ok_or_else(|| WickError::Invalid("this command has no table output".into()))?
    } else {
        json
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Domain(e)) => {
            let err = json!({"error": {"kind": e.kind(), "message": e.to_string()}});
            eprintln!("{err}");
            ExitCode::from(1)
        }
    }
}
