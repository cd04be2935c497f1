mod commands;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use ergodic::ahk::SeedKey;
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(
    name = "ergodic",
    version,
    about = "Sample, audit and build invariant measures on countable structures"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Master seed, up to 32 hex digits with an optional 0x prefix.
    #[arg(long, global = true, default_value = "0")]
    pub seed: SeedKey,
    /// Monte Carlo trials for estimating commands.
    #[arg(long, global = true, default_value_t = 10_000)]
    pub trials: u64,
    /// Output file. Without it the output goes to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Jsonl)]
    pub format: Format,
    /// Where to write the run manifest. Defaults to `<out>.run.json`, or
    /// stderr when there is no output file.
    #[arg(long, global = true)]
    pub run_manifest: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Jsonl,
    Csv,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Sample finite structures from a gallery sampler.
    Sample(SampleArgs),
    /// Estimate the measure of a quantifier-free formula.
    Estimate(EstimateArgs),
    /// Test whether two formulas on disjoint tuples are independent.
    Dissoc(DissocArgs),
    /// Compare the measure of a formula at a tuple and at its permutation.
    Invariance(InvarianceArgs),
    /// Check restriction and permutation coherence exactly.
    Coherence(CoherenceArgs),
    /// Probability that two disjoint tuples share their type.
    Collide(CollideArgs),
    /// Rootedness of every realized type in sampled or given structures.
    Roots(RootsArgs),
    /// Quantifier-free types of positive empirical measure.
    Postypes(PostypesArgs),
    /// Morleyize a theory and optionally check canonical expansions.
    Morleyize(MorleyizeArgs),
    /// Build the stages of a measured structure along a guide.
    BuildLimit(BuildLimitArgs),
    /// Sample finite structures from a built limit.
    LimitSample(LimitSampleArgs),
    /// Rescale a built limit by a finite-partition weight.
    Rescale(RescaleArgs),
    /// Rerun a recorded command and compare its outputs.
    Replay(ReplayArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SamplerArg {
    /// Sampler spec such as `kaleidoscope:k=2,d=8` or `maxgraph:d=16`.
    #[arg(long)]
    pub sampler: String,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SampleArgs {
    #[command(flatten)]
    pub sampler: SamplerArg,
    #[arg(short = 'n', long, default_value_t = 10)]
    pub size: usize,
    #[arg(long, default_value_t = 1)]
    pub count: u64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub sampler: SamplerArg,
    /// Formula in s-expression syntax over variables x0, x1, ...
    #[arg(long)]
    pub formula: String,
    /// Flag the run when the estimate is more than `k` stderrs from this.
    #[arg(long)]
    pub target: Option<f64>,
    #[arg(long, default_value_t = 3.0)]
    pub k: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct DissocArgs {
    #[command(flatten)]
    pub sampler: SamplerArg,
    #[arg(long)]
    pub phi: String,
    #[arg(long)]
    pub psi: String,
    #[arg(long, default_value_t = 3.0)]
    pub k: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct InvarianceArgs {
    #[command(flatten)]
    pub sampler: SamplerArg,
    #[arg(long)]
    pub formula: String,
    /// Permutation as comma-separated images, e.g. `1,0,2`.
    #[arg(long)]
    pub perm: String,
    #[arg(long, default_value_t = 3.0)]
    pub k: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct CoherenceArgs {
    #[command(flatten)]
    pub sampler: SamplerArg,
    /// Largest domain size of the random configurations.
    #[arg(long, default_value_t = 5)]
    pub max_n: usize,
    /// Check one fixed `n` instead of a sweep.
    #[arg(long)]
    pub n: Option<usize>,
    /// Restriction size for a fixed `n`; defaults to `n`.
    #[arg(long, requires = "n")]
    pub m: Option<usize>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct CollideArgs {
    #[command(flatten)]
    pub sampler: SamplerArg,
    /// Tuple length.
    #[arg(short = 'n', long, default_value_t = 2)]
    pub arity: usize,
    #[arg(long)]
    pub target: Option<f64>,
    #[arg(long, default_value_t = 3.0)]
    pub k: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct RootsArgs {
    #[arg(long, conflicts_with = "input", required_unless_present = "input")]
    pub sampler: Option<String>,
    /// Structures in JSON Lines form.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(short = 'n', long, default_value_t = 30)]
    pub size: usize,
    #[arg(long, default_value_t = 1)]
    pub count: u64,
    #[arg(long, default_value = "(not (= x0 x1))")]
    pub chi: String,
    /// Comma-separated relation names; defaults to the whole signature.
    #[arg(long)]
    pub sub: Option<String>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct PostypesArgs {
    #[command(flatten)]
    pub sampler: SamplerArg,
    #[arg(short = 'n', long, default_value_t = 2)]
    pub size: usize,
    #[arg(long, default_value_t = 0.01)]
    pub eps: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct MorleyizeArgs {
    /// File of sentences in s-expression syntax.
    #[arg(long)]
    pub theory: PathBuf,
    /// Structures over the base language to expand and check.
    #[arg(long)]
    pub check: Option<PathBuf>,
    /// Also check this many random structures over the base language.
    #[arg(long, default_value_t = 0)]
    pub random: u64,
    #[arg(long, default_value_t = 5)]
    pub max_size: usize,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GuideKind {
    KaleidoscopePredicate,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct BuildLimitArgs {
    #[arg(long, value_enum, default_value_t = GuideKind::KaleidoscopePredicate)]
    pub guide: GuideKind,
    #[arg(long, default_value_t = 12)]
    pub stages: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct LimitSampleArgs {
    /// Build manifest written by `build-limit` or `rescale`.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(short = 'n', long, default_value_t = 30)]
    pub size: usize,
    /// Deepest stage the points may be pushed to before they separate.
    #[arg(long, default_value_t = 20)]
    pub depth: usize,
    #[arg(long, default_value_t = 1)]
    pub count: u64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct RescaleArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Use stored weight 0 (1/4, 3/4) or 1 (3/4, 1/4) on the split cells.
    #[arg(long, conflicts_with = "weight", required_unless_present = "weight", value_parser = clap::value_parser!(u8).range(0..2))]
    pub stored: Option<u8>,
    /// Weight file in JSON.
    #[arg(long)]
    pub weight: Option<PathBuf>,
    /// Stage carrying the stored weights; defaults to the first that splits.
    #[arg(long)]
    pub stage: Option<usize>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ReplayArgs {
    /// Run manifest to replay.
    pub manifest: PathBuf,
    /// Write the reproduced outputs into this directory instead of their
    /// recorded paths.
    #[arg(long)]
    pub into: Option<PathBuf>,
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => run::USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run::execute(cli, &argv[1..]) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
