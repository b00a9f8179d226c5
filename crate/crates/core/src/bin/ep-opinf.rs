use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ep_opinf::harness::{
    builtin_config, reproduce, run_evaluate, run_simulate, run_train, EvalScope, ExperimentConfig,
    Figure, Problem, Profile,
};
use ep_opinf::Error;

#[derive(Parser)]
#[command(version, about = "Learn energy-preserving quadratic reduced models from PDE data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the full-order model for every training initial condition.
    Simulate(Common),
    /// Compute the POD basis and fit operators at r_max for each method.
    Train(Common),
    /// Integrate reduced models and write error / statistics tables.
    Evaluate(Common),
    /// Run the whole pipeline and emit the data behind one figure.
    Reproduce {
        #[arg(value_enum)]
        figure: FigureArg,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML). Defaults to the built-in config of --problem and --profile.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Base seed for test-set sampling; test set i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "desk")]
    profile: ProfileArg,
    /// Problem for the built-in config when --config is not given.
    #[arg(long, value_enum)]
    problem: Option<ProblemArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Desk,
    Paper,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProblemArg {
    Burgers,
    Kse,
}

#[derive(Clone, Copy, ValueEnum)]
enum FigureArg {
    BurgersError,
    BurgersViolation,
    KseAutocorr,
    KseNace,
    KseViolation,
}

impl FigureArg {
    fn figure(self) -> Figure {
        match self {
            FigureArg::BurgersError => Figure::BurgersError,
            FigureArg::BurgersViolation => Figure::BurgersViolation,
            FigureArg::KseAutocorr => Figure::KseAutocorr,
            FigureArg::KseNace => Figure::KseNace,
            FigureArg::KseViolation => Figure::KseViolation,
        }
    }
}

fn load(common: &Common, default_problem: Option<Problem>) -> Result<ExperimentConfig, Error> {
    let profile = match common.profile {
        ProfileArg::Desk => Profile::Desk,
        ProfileArg::Paper => Profile::Paper,
    };
    let problem = common.problem.map(|p| match p {
        ProblemArg::Burgers => Problem::Burgers,
        ProblemArg::Kse => Problem::Kse,
    });
    let mut cfg = match (&common.config, problem.or(default_problem)) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(p)) => builtin_config(p, profile),
        (None, None) => return Err(Error::Config("give --config or --problem".into())),
    };
    if let Some(out) = &common.output {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = common.seed {
        for (i, set) in cfg.test_ics.iter_mut().enumerate() {
            set.seed = seed.wrapping_add(i as u64);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate(c) => run_simulate(&load(&c, None)?),
        Command::Train(c) => run_train(&load(&c, None)?),
        Command::Evaluate(c) => run_evaluate(&load(&c, None)?, &EvalScope::default()),
        Command::Reproduce { figure, common } => {
            let figure = figure.figure();
            let cfg = load(&common, Some(figure.problem()))?;
            for path in reproduce(figure, &cfg)? {
                println!("{}", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
