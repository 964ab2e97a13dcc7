//! `mvdyn`: command-line front end for finite-multivalued interval maps.
//!
//! Every command prints a JSON envelope `{command, system, params, seed,
//! result}` (or CSV with `--format csv`). Exit status is 0 on success, 1 on
//! invalid input or a violated precondition, and 2 when a budget or
//! convergence limit was hit and the output is partial.

mod commands;
mod input;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug)]
pub enum CliError {
    /// Bad input or a violated precondition.
    Domain(String),
    Io(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Domain(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl From<mvdyn::Error> for CliError {
    fn from(e: mvdyn::Error) -> Self {
        CliError::Domain(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(name = "mvdyn", version, about = "Exact transfer operators and ergodicity diagnostics for multivalued interval maps")]
struct Cli {
    /// Read the whole invocation from a JSON run configuration.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(flatten)]
    global: Global,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// `gallery:<name>` or a path to a system JSON file.
    #[arg(long, global = true)]
    pub system: Option<String>,
    /// Write the main output here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Also write the command's CSV artifact here.
    #[arg(long, global = true, value_name = "PATH")]
    pub csv: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Values S(x).
    Eval(EvalArgs),
    /// Full and graded preimages of a set.
    Preimage(PreimageArgs),
    /// Pushforward of a density.
    Pushforward(DensityArgs),
    /// Whether a density is invariant.
    CheckInvariance(DensityArgs),
    /// Kernel value K(x, B).
    Kernel(KernelArgs),
    /// Koopman operator U applied to a step function.
    Koopman(FunctionArgs),
    /// Frobenius–Perron operator P applied to a step function.
    Fp(FunctionArgs),
    /// Residual of <Pf, g> = <f, Ug>.
    Duality(DualityArgs),
    /// Ulam matrix on a uniform grid.
    Ulam(UlamArgs),
    /// Stationary density by power iteration or exact verification.
    Stationary(StationaryArgs),
    /// Birkhoff average A_n(f)(x).
    Birkhoff(BirkhoffArgs),
    /// Returns of orbit-tree paths to a set.
    Recurrence(RecurrenceArgs),
    /// A random orbit following the kernel weights.
    Orbit(OrbitArgs),
    /// Ergodicity evidence across resolutions.
    Ergodicity(ErgodicityArgs),
    /// Measure of the set where S has more than one value.
    Branching,
    /// Cantor-intersection map and its transfer operator.
    Cantor(CantorArgs),
    /// Overlap map of similarities.
    Ifs(IfsArgs),
    /// Random finite systems checked against the three ergodicity statements.
    Oracle(OracleArgs),
    /// Named systems and families.
    Gallery(GalleryArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub x: String,
}

#[derive(Args, Debug, Serialize)]
pub struct PreimageArgs {
    /// Interval set `a,b;c,d`.
    #[arg(long)]
    pub set: String,
    /// Also list the graded preimages S⁻¹_{k;l}.
    #[arg(long)]
    pub graded: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct DensityArgs {
    /// Input density; Lebesgue measure by default.
    #[arg(long, default_value = "const:1")]
    pub density: String,
    /// Set whose pushforward mass is reported.
    #[arg(long, default_value = "0,1/2")]
    pub set: String,
}

#[derive(Args, Debug, Serialize)]
pub struct KernelArgs {
    #[arg(long)]
    pub x: String,
    #[arg(long)]
    pub set: String,
}

#[derive(Args, Debug, Serialize)]
pub struct FunctionArgs {
    /// Step function: `const:c`, `chi:a,b;...`, `cells:v,...`, `x:n`, JSON or a path.
    #[arg(long)]
    pub f: String,
    /// Also evaluate the image at this point.
    #[arg(long)]
    pub x: Option<String>,
}

#[derive(Args, Debug, Serialize)]
pub struct DualityArgs {
    #[arg(long)]
    pub f: String,
    #[arg(long)]
    pub g: String,
}

#[derive(Args, Debug, Serialize)]
pub struct UlamArgs {
    #[arg(long, default_value_t = 64)]
    pub cells: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct StationaryArgs {
    #[arg(long, default_value_t = 256)]
    pub cells: usize,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_iter: usize,
    /// Starting density for power iteration.
    #[arg(long)]
    pub start: Option<String>,
    /// Certify this density exactly instead of iterating.
    #[arg(long, conflicts_with = "start")]
    pub verify: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BirkhoffModeArg {
    Exact,
    Ulam,
}

#[derive(Args, Debug, Serialize)]
pub struct BirkhoffArgs {
    #[arg(long, default_value = "x:1024")]
    pub f: String,
    #[arg(long)]
    pub x: String,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, value_enum, default_value_t = BirkhoffModeArg::Ulam)]
    pub mode: BirkhoffModeArg,
    #[arg(long, default_value_t = 1024)]
    pub cells: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct RecurrenceArgs {
    #[arg(long, default_value = "0,1/4")]
    pub set: String,
    #[arg(long, default_value_t = 30)]
    pub depth: usize,
    /// Node budget per start.
    #[arg(long, default_value_t = 10_000)]
    pub budget: usize,
    /// Explore a single start instead of sampling.
    #[arg(long)]
    pub x: Option<String>,
    #[arg(long, default_value_t = 1000, conflicts_with = "x")]
    pub starts: usize,
    #[arg(long, default_value_t = mvdyn::ergodic::DEFAULT_EXACT_DEPTH)]
    pub exact_depth: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct OrbitArgs {
    #[arg(long)]
    pub x: String,
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    #[arg(long, default_value_t = mvdyn::ergodic::DEFAULT_EXACT_DEPTH)]
    pub exact_depth: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct ErgodicityArgs {
    #[arg(long, default_value = "64,256,1024")]
    pub resolutions: String,
    #[arg(long, default_value_t = mvdyn::ergodic::DEFAULT_EPSILON)]
    pub epsilon: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct CantorArgs {
    #[arg(long)]
    pub alpha: String,
    #[arg(long)]
    pub check_invariance: bool,
    #[arg(long)]
    pub compare_fp: bool,
    /// Test function for the operator comparison.
    #[arg(long, default_value = "chi:1/2,1")]
    pub f: String,
}

#[derive(Args, Debug, Serialize)]
pub struct IfsArgs {
    /// Similarities `ratio:shift,...`, each x -> ratio·x + shift.
    #[arg(long)]
    pub maps: String,
    #[arg(long)]
    pub check_invariance: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct OracleArgs {
    #[arg(long, default_value_t = 1000)]
    pub instances: usize,
    #[arg(long, default_value_t = 8)]
    pub n_max: usize,
    #[arg(long, default_value_t = 3)]
    pub m_max: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct GalleryArgs {
    #[arg(long, conflicts_with = "name")]
    pub list: bool,
    /// Print this system as JSON.
    #[arg(long)]
    pub name: Option<String>,
}

fn parse(args: Vec<String>) -> Result<Cli, ExitCode> {
    Cli::try_parse_from(args).map_err(|e| {
        let _ = e.print();
        if e.use_stderr() {
            ExitCode::from(1)
        } else {
            ExitCode::SUCCESS
        }
    })
}

fn main() -> ExitCode {
    let mut cli = match parse(std::env::args().collect()) {
        Ok(cli) => cli,
        Err(code) => return code,
    };
    if let Some(path) = &cli.config {
        if cli.command.is_some() {
            eprintln!("error: --config replaces the command line; give one or the other");
            return ExitCode::from(1);
        }
        let argv = match input::RunConfig::load(path).and_then(|c| c.to_args()) {
            Ok(a) => a,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
        };
        cli = match parse(std::iter::once("mvdyn".to_string()).chain(argv).collect()) {
            Ok(cli) => cli,
            Err(code) => return code,
        };
    }
    let Some(command) = cli.command else {
        eprintln!("error: no command given; see `mvdyn --help`");
        return ExitCode::from(1);
    };
    match commands::run(&command, &cli.global) {
        Ok(outcome) => match emit(&command, &cli.global, &outcome) {
            Ok(()) => match &outcome.warning {
                Some(w) => {
                    eprintln!("warning: {w}");
                    ExitCode::from(2)
                }
                None => ExitCode::SUCCESS,
            },
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn emit(command: &Command, global: &Global, outcome: &commands::Outcome) -> Result<(), CliError> {
    if let Some(line) = &outcome.summary {
        eprintln!("{line}");
    }
    let envelope = output::Envelope {
        command: commands::name(command).to_string(),
        system: outcome.system.clone(),
        params: outcome.params.clone(),
        seed: global.seed,
        result: outcome.result.clone(),
    };
    let json = serde_json::to_string_pretty(&envelope).expect("envelopes serialize") + "\n";
    let main = match global.format {
        Format::Json => json,
        Format::Csv => outcome
            .csv
            .clone()
            .ok_or_else(|| CliError::Domain(format!("`{}` has no CSV output", envelope.command)))?,
    };
    if let Some(path) = &global.csv {
        let csv = outcome
            .csv
            .as_ref()
            .ok_or_else(|| CliError::Domain(format!("`{}` has no CSV output", envelope.command)))?;
        write(path, csv)?;
    }
    match &global.out {
        Some(path) => write(path, &main),
        None => std::io::stdout()
            .write_all(main.as_bytes())
            .map_err(|e| CliError::Io(format!("stdout: {e}"))),
    }
}

fn write(path: &std::path::Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn argument_definitions_are_consistent() {
        Cli::command().debug_assert();
    }
}
