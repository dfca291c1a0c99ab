use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use conelab::config::{ConfigError, ExperimentConfig, Overrides, Scenario, TGridSpec};
use conelab::{report, scenarios, store};

#[derive(Parser)]
#[command(name = "conelab", version, about = "Cone multiplier experiments and acceptance reports")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    Reconstruct(RunArgs),
    SquareBound(RunArgs),
    TraceSweep(RunArgs),
    SphereSweep(RunArgs),
    SliceVolume(RunArgs),
    KernelDecay(RunArgs),
    OffconeDecay(RunArgs),
    G0Weighted(RunArgs),
    Converge(RunArgs),
    DecomposeCheck(RunArgs),
    OrthoCheck(RunArgs),
    A2Check(RunArgs),
    /// Summarise a run store; exit status 1 if any row fails.
    Report {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        scenario: Option<Scenario>,
    },
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    /// Flat `key = value` file; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long = "N")]
    grid: Option<usize>,
    #[arg(long = "L")]
    len: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    delta: Option<Vec<f64>>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    /// `t_min,t_max,count`
    #[arg(long)]
    tgrid: Option<TGridSpec>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Record runtimes; `false` makes the CSV bit-identical across runs.
    #[arg(long)]
    timing: Option<bool>,
    #[arg(long)]
    memory_cap: Option<usize>,
}

impl RunArgs {
    fn overrides(&self, scenario: Scenario) -> Overrides {
        Overrides {
            scenario: Some(scenario),
            n: self.n,
            grid: self.grid,
            len: self.len,
            deltas: self.delta.clone(),
            lambda: self.lambda,
            alpha: self.alpha,
            beta: self.beta,
            p: self.p,
            tgrid: self.tgrid,
            samples: self.samples,
            seed: self.seed,
            out: self.out.clone(),
            threads: self.threads,
            timing: self.timing,
            memory_cap: self.memory_cap,
        }
    }
}

fn resolve(scenario: Scenario, args: &RunArgs) -> Result<ExperimentConfig, ConfigError> {
    let file = match &args.config {
        Some(path) => Overrides::from_file(path)?,
        None => Overrides::default(),
    };
    if let Some(s) = file.scenario {
        if s != scenario {
            return Err(ConfigError::Schema {
                path: "scenario".into(),
                message: format!("file is for `{s}`, command is `{scenario}`"),
            });
        }
    }
    ExperimentConfig::resolve(args.overrides(scenario), file)
}

fn run(scenario: Scenario, args: &RunArgs) -> ExitCode {
    let cfg = match resolve(scenario, args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(t) = cfg.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let records = scenarios::run(&cfg);
    let saved = store::append(&cfg.out, &records).and_then(|p| {
        store::write_summary(&cfg.out, &cfg, &records)?;
        Ok(p)
    });
    match saved {
        Ok(path) => eprintln!("{} rows appended to {}", records.len(), path.display()),
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    }
    match report::build(&records, None) {
        Ok(r) => {
            print!("{}", r.table());
            ExitCode::from(r.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (scenario, args) = match cli.command {
        Command::Report { store: dir, scenario } => {
            let result = store::read_records(&dir)
                .and_then(|recs| report::build(&recs, scenario.map(Scenario::name)))
                .and_then(|r| {
                    report::write_json(&dir, &r)?;
                    Ok(r)
                });
            return match result {
                Ok(r) => {
                    print!("{}", r.table());
                    ExitCode::from(r.exit_code() as u8)
                }
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(2)
                }
            };
        }
        Command::Reconstruct(a) => (Scenario::Reconstruct, a),
        Command::SquareBound(a) => (Scenario::SquareBound, a),
        Command::TraceSweep(a) => (Scenario::TraceSweep, a),
        Command::SphereSweep(a) => (Scenario::SphereSweep, a),
        Command::SliceVolume(a) => (Scenario::SliceVolume, a),
        Command::KernelDecay(a) => (Scenario::KernelDecay, a),
        Command::OffconeDecay(a) => (Scenario::OffconeDecay, a),
        Command::G0Weighted(a) => (Scenario::G0Weighted, a),
        Command::Converge(a) => (Scenario::Converge, a),
        Command::DecomposeCheck(a) => (Scenario::DecomposeCheck, a),
        Command::OrthoCheck(a) => (Scenario::OrthoCheck, a),
        Command::A2Check(a) => (Scenario::A2Check, a),
    };
    run(scenario, &args)
}
