use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use polymax_cli::{config, data_access, runner, CliError, ExperimentId, ExperimentSpec};

/// Desk-scale experiment runner. Writes results.json, manifest.json, and
/// plot-ready CSVs for one experiment per invocation.
#[derive(Parser, Debug)]
#[command(name = "polymax", version, about)]
struct Cli {
    /// Experiment id (fig1, fig2, fig3, fig4, fig5, fig6, table1, table2) or
    /// `make-data` to generate the synthetic digit corpus.
    experiment: String,

    /// Seed for every random draw in the run.
    #[arg(long, default_value_t = 7)]
    seed: u64,

    /// Directory holding the IDX digit files.
    #[arg(long, env = config::DATA_DIR_ENV, default_value = "data")]
    data_dir: PathBuf,

    /// Directory for results.json, manifest.json, and CSVs.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,

    /// Attack scales, comma separated (defaults depend on the experiment).
    #[arg(long, value_delimiter = ',')]
    epsilons: Option<Vec<f64>>,

    /// BIM iteration counts, comma separated. fig4 sweeps all of them;
    /// table1 uses the first.
    #[arg(long, value_delimiter = ',')]
    bim_steps: Option<Vec<usize>>,

    /// Covariate-shift weighting exponents, comma separated.
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,

    /// Total training samples across classes.
    #[arg(long, default_value_t = config::DEFAULT_TRAIN_CAP)]
    train_cap: usize,

    /// Total test samples across classes.
    #[arg(long, default_value_t = config::DEFAULT_TEST_CAP)]
    test_cap: usize,

    /// Digit classes, comma separated (e.g. 3,7).
    #[arg(long, value_delimiter = ',')]
    classes: Option<Vec<u8>>,

    /// (make-data) Samples rendered per class for the training file.
    #[arg(long, default_value_t = config::SYNTH_PER_CLASS_TRAIN)]
    per_class_train: usize,

    /// (make-data) Samples rendered per class for the test file.
    #[arg(long, default_value_t = config::SYNTH_PER_CLASS_TEST)]
    per_class_test: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let classes = cli
        .classes
        .clone()
        .unwrap_or_else(|| config::DEFAULT_CLASSES.to_vec());

    if cli.experiment == "make-data" {
        let paths = data_access::make_data(
            &cli.data_dir,
            &classes,
            cli.per_class_train,
            cli.per_class_test,
            cli.seed,
        )?;
        for p in paths {
            println!("wrote {}", p.display());
        }
        return Ok(());
    }

    let id = ExperimentId::parse(&cli.experiment).ok_or_else(|| {
        CliError::Config(format!(
            "unknown experiment '{}' (expected one of {}, or make-data)",
            cli.experiment,
            ExperimentId::ALL.map(|i| i.name()).join(", ")
        ))
    })?;

    let mut spec = ExperimentSpec::new(id, cli.data_dir.clone(), cli.out_dir.clone());
    spec.seed = cli.seed;
    spec.epsilons = cli.epsilons.clone();
    spec.bim_steps = cli.bim_steps.clone();
    spec.lambdas = cli.lambdas.clone();
    spec.train_cap = cli.train_cap;
    spec.test_cap = cli.test_cap;
    spec.classes = classes;

    let artifacts = runner::run(&spec)?;
    println!("wrote {}", artifacts.results_path.display());
    println!("wrote {}", artifacts.manifest_path.display());
    for p in &artifacts.csv_paths {
        println!("wrote {}", p.display());
    }
    Ok(())
}
