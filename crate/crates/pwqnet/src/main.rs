use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use pwqnet::problem_doc::SolutionDoc;
use pwqnet::report_doc::reports_to_json;
use pwqnet::train_config::{table_csv, table_text};
use pwqnet::{DocError, NetworkDoc, ProblemDoc, TrainConfigDoc};
use pwqnet_core::verify::{self, Reference, Report};
use pwqnet_core::{build, mpc, showcase, train, Error, FeatureMap, MpcProblem, ReluNetwork};

/// Exact ReLU networks for explicit MPC value functions, policies and
/// Q-functions of scalar constrained linear systems.
#[derive(Parser)]
#[command(name = "pwqnet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    Policy,
    Value,
    Qnet,
}

#[derive(Clone, Copy, Default, ValueEnum)]
enum Format {
    #[default]
    Text,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem by dynamic programming and print every stage as JSON.
    Solve {
        problem: PathBuf,
        /// Override the horizon given in the problem file.
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Build the exact network for the policy, value function or Q-function
    /// at the horizon.
    Build {
        problem: PathBuf,
        #[arg(long, value_enum)]
        target: Target,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Evaluate a network at one or more points (comma-separated raw inputs).
    Eval {
        net: PathBuf,
        #[arg(long = "point", required = true, allow_hyphen_values = true)]
        points: Vec<String>,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Compare a network with a `solve` output or a problem file; exits 1 if
    /// any check fails.
    Verify {
        net: PathBuf,
        reference: PathBuf,
        /// Uniform grid points per axis, on top of all breakpoints.
        #[arg(long, default_value_t = 1000)]
        density: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run the topology comparison described by a TOML config.
    Train {
        config: PathBuf,
        /// Base seed for initialization and shuffling (trial t uses seed + t).
        #[arg(long)]
        seed: Option<u64>,
        /// Seed of the shared training set.
        #[arg(long)]
        data_seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Verify the hand-built two-dimensional example network.
    Demo2d {
        /// Write (x1, x2, V, Phi, residual) samples to this CSV file.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Samples per axis for the CSV.
        #[arg(long, default_value_t = 41)]
        grid: usize,
    },
    /// Re-emit a network document, merging `key=value` metadata.
    Export {
        net: PathBuf,
        #[arg(long = "meta", value_parser = parse_meta)]
        meta: Vec<(String, String)>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn parse_meta(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .filter(|(k, _)| !k.is_empty())
        .map(|(k, v)| (k.to_owned(), v.to_owned()))
        .ok_or_else(|| format!("expected key=value, got '{s}'"))
}

/// Failure modes, each with its exit code.
enum Failure {
    /// Bad arguments, unreadable or malformed input (exit 2).
    Usage(String),
    /// A verification check or a computation failed (exit 1).
    Check(String),
    /// The problem has no feasible state (exit 3).
    Infeasible(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Check(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Infeasible(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Check(m) | Failure::Infeasible(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Infeasible { .. } => Failure::Infeasible(e.to_string()),
            Error::InvalidProblem(_)
            | Error::InvalidInterval { .. }
            | Error::ChainBroken { .. }
            | Error::NotChained { .. }
            | Error::Empty
            | Error::DimensionMismatch(_)
            | Error::FeatureMapMismatch { .. }
            | Error::ShapeMismatch { .. }
            | Error::OutOfDomain { .. } => Failure::Usage(e.to_string()),
            _ => Failure::Check(e.to_string()),
        }
    }
}

impl From<DocError> for Failure {
    fn from(e: DocError) -> Self {
        match e {
            DocError::Core(core) => core.into(),
            other => Failure::Usage(other.to_string()),
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn emit(text: &str, output: Option<&Path>) -> CliResult {
    match output {
        Some(path) => fs::write(path, text),
        None => io::stdout().lock().write_all(text.as_bytes()),
    }
    .map_err(|e| Failure::Usage(format!("cannot write output: {e}")))
}

fn load_problem(path: &Path, horizon: Option<usize>) -> CliResult<MpcProblem> {
    let mut problem = ProblemDoc::from_toml(&read(path)?)?.to_problem()?;
    if let Some(n) = horizon {
        problem.horizon = n;
    }
    problem.validate()?;
    Ok(problem)
}

fn load_network(path: &Path) -> CliResult<NetworkDoc> {
    let doc = NetworkDoc::from_json(&read(path)?)?;
    doc.to_network()?;
    Ok(doc)
}

/// A `solve` output, or a problem file that is solved on the spot.
fn load_reference(path: &Path) -> CliResult<SolutionDoc> {
    let text = read(path)?;
    if let Ok(doc) = SolutionDoc::from_json(&text) {
        return Ok(doc);
    }
    let problem = ProblemDoc::from_toml(&text)
        .map_err(|e| Failure::Usage(format!("{} is neither a solution nor a problem: {e}", path.display())))?
        .to_problem()?;
    problem.validate()?;
    Ok(SolutionDoc::new(&problem, &mpc::dp_solve(&problem)?))
}

fn solve(problem: &Path, horizon: Option<usize>, output: Option<&Path>) -> CliResult {
    let problem = load_problem(problem, horizon)?;
    let stages = mpc::dp_solve(&problem)?;
    emit(&SolutionDoc::new(&problem, &stages).to_json(), output)
}

fn build_net(problem: &Path, target: Target, horizon: Option<usize>, output: Option<&Path>) -> CliResult {
    let problem = load_problem(problem, horizon)?;
    let stages = mpc::dp_solve(&problem)?;
    let n = problem.horizon;
    let (net, name) = match target {
        Target::Policy => {
            let policy = stages[n].policy.as_ref().expect("stages above 0 carry a policy");
            (build::build_policy_net(policy.pieces())?, "policy")
        }
        Target::Value => (build::build_value_net(stages[n].value.pieces())?, "value"),
        Target::Qnet => (build::build_full_q_net(&problem, stages[n - 1].value.pieces())?, "qnet"),
    };
    let meta = BTreeMap::from([
        ("generator".to_owned(), format!("pwqnet {}", env!("CARGO_PKG_VERSION"))),
        ("horizon".to_owned(), n.to_string()),
        ("target".to_owned(), name.to_owned()),
    ]);
    emit(&NetworkDoc::new(&net, meta).to_json(), output)
}

fn parse_point(s: &str, expected: usize) -> CliResult<Vec<f64>> {
    let coords = s
        .split(',')
        .map(|c| c.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::Usage(format!("bad point '{s}': {e}")))?;
    if coords.len() != expected {
        return Err(Failure::Usage(format!(
            "point '{s}' has {} coordinates, the network takes {expected}",
            coords.len()
        )));
    }
    Ok(coords)
}

fn eval(net: &Path, points: &[String], format: Format) -> CliResult {
    let net = load_network(net)?.to_network()?;
    let dim = net.feature_map().raw_dim();
    let mut rows = Vec::with_capacity(points.len());
    for p in points {
        let x = parse_point(p, dim)?;
        let y = net.forward(&x)?;
        rows.push((x, y));
    }
    let text = match format {
        Format::Text => rows
            .iter()
            .map(|(_, y)| y.iter().map(|v| format!("{v:.16e}")).collect::<Vec<_>>().join(" ") + "\n")
            .collect(),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let mut header: Vec<String> = (0..dim).map(|i| format!("x{i}")).collect();
            header.extend((0..net.output_dim()).map(|i| format!("y{i}")));
            w.write_record(&header).expect("in-memory write");
            for (x, y) in &rows {
                w.write_record(x.iter().chain(y).map(|v| format!("{v:.16e}"))).expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ASCII output")
        }
    };
    emit(&text, None)
}

fn verify_net(net: &ReluNetwork, reference: &SolutionDoc, density: usize, tol: f64) -> CliResult<Vec<Report>> {
    let last = reference.last()?;
    let mut reports = match net.feature_map() {
        FeatureMap::Identity { dim: 1 } => {
            let policy = last
                .policy()?
                .ok_or_else(|| Failure::Usage("reference has no policy at its horizon".into()))?;
            vec![verify::check_exact(net, Reference::Policy(&policy), density, tol)]
        }
        FeatureMap::Hv { n: 1 } => {
            let value = last.value()?;
            vec![
                verify::check_exact(net, Reference::Value(&value), density, tol),
                verify::check_value_function(&value),
            ]
        }
        FeatureMap::HqPrime { n: 1, m: 1 } => {
            let spec = reference.q_spec()?;
            // a square grid; `density` per axis would be quadratic in cost
            let per_axis = density.min(200);
            vec![verify::check_exact(net, Reference::QFunction(&spec), per_axis, tol)]
        }
        other => return Err(Failure::Usage(format!("no reference for networks on feature map {other}"))),
    };
    for r in &mut reports {
        if r.check == "exact" {
            r.check = format!("exact_{}", net.feature_map().tag());
        }
    }
    Ok(reports)
}

fn verify_cmd(net: &Path, reference: &Path, density: usize, tol: f64, output: Option<&Path>) -> CliResult {
    let net = load_network(net)?.to_network()?;
    let reference = load_reference(reference)?;
    let reports = verify_net(&net, &reference, density, tol)?;
    emit(&reports_to_json(&reports), output)?;
    summarize(&reports)
}

fn summarize(reports: &[Report]) -> CliResult {
    let failed: Vec<&str> = reports.iter().filter(|r| !r.pass).map(|r| r.check.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(format!("failed checks: {}", failed.join(", "))))
    }
}

struct TrainArgs {
    seed: Option<u64>,
    data_seed: Option<u64>,
    trials: Option<usize>,
    epochs: Option<usize>,
    format: Format,
}

fn train_cmd(config: &Path, args: TrainArgs, output: Option<&Path>) -> CliResult {
    let mut cfg = TrainConfigDoc::from_toml(&read(config)?)?;
    cfg.base_seed = args.seed.unwrap_or(cfg.base_seed);
    cfg.data_seed = args.data_seed.unwrap_or(cfg.data_seed);
    cfg.trials = args.trials.unwrap_or(cfg.trials);
    cfg.epochs = args.epochs.unwrap_or(cfg.epochs);
    let problem = cfg.problem()?;
    problem.validate()?;
    let spec = mpc::q_function_spec(&problem)?;
    let data = train::sample_dataset(&spec, cfg.samples, cfg.data_seed)?;
    let rows = train::experiment(&cfg.topologies()?, &data, cfg.trials, cfg.base_seed, cfg.train_config()?)?;
    let text = match args.format {
        Format::Text => table_text(&rows),
        Format::Csv => table_csv(&rows),
    };
    emit(&text, output)
}

fn demo2d(csv_path: Option<&Path>, grid: usize) -> CliResult {
    let reports = showcase::verify_showcase();
    emit(&reports_to_json(&reports), None)?;
    if let Some(path) = csv_path {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["x1", "x2", "v", "phi", "residual"]).expect("in-memory write");
        for s in showcase::samples(grid.max(2)) {
            w.write_record(s.iter().map(|v| format!("{v:.16e}"))).expect("in-memory write");
        }
        let bytes = w.into_inner().expect("in-memory flush");
        fs::write(path, bytes).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?;
    }
    summarize(&reports)
}

fn export(net: &Path, meta: Vec<(String, String)>, output: Option<&Path>) -> CliResult {
    let mut doc = load_network(net)?;
    doc.meta.extend(meta);
    emit(&doc.to_json(), output)
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Solve { problem, horizon, output } => solve(&problem, horizon, output.as_deref()),
        Command::Build {
            problem,
            target,
            horizon,
            output,
        } => build_net(&problem, target, horizon, output.as_deref()),
        Command::Eval { net, points, format } => eval(&net, &points, format),
        Command::Verify {
            net,
            reference,
            density,
            tol,
            output,
        } => verify_cmd(&net, &reference, density, tol, output.as_deref()),
        Command::Train {
            config,
            seed,
            data_seed,
            trials,
            epochs,
            format,
            output,
        } => train_cmd(
            &config,
            TrainArgs {
                seed,
                data_seed,
                trials,
                epochs,
                format,
            },
            output.as_deref(),
        ),
        Command::Demo2d { csv, grid } => demo2d(csv.as_deref(), grid),
        Command::Export { net, meta, output } => export(&net, meta, output.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("pwqnet: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
