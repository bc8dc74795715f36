use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qnlp_cli::{commands, report, run_experiment, run_sweep, CliError, ExperimentConfig, SweepConfig, RESULTS_ENV};
use qnlp_core::pregroup::Lexicon;
use qnlp_core::rewrite::RewriteScheme;
use qnlp_core::training::mc_lexicon;

#[derive(Parser)]
#[command(name = "qnlp", version, about = "Compositional sentence classifiers: parse, rewrite, compile, train, sweep, report")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a sentence into a diagram.
    Parse {
        sentence: String,
        /// Lexicon file (`word<TAB>type` per line); defaults to the built-in one.
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long)]
        emit_json: bool,
    },
    /// Rewrite a diagram read from a JSON file or stdin.
    Rewrite {
        #[arg(long)]
        scheme: String,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Compile a diagram to a circuit or, for tensor/spider/mps, a tensor network.
    Compile {
        #[arg(long)]
        ansatz: String,
        #[arg(long, default_value_t = 1)]
        layers: usize,
        #[arg(long, default_value_t = 3)]
        rotations: usize,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Evaluate a circuit's sentence distribution.
    Simulate {
        #[arg(long)]
        circuit: PathBuf,
        /// JSON list of angles, or an object keyed by symbol name.
        #[arg(long)]
        params: PathBuf,
    },
    /// Run an experiment described by a TOML file.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, env = RESULTS_ENV, default_value = "results")]
        results: PathBuf,
    },
    /// Run (or resume) a layers x rotations sweep.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, env = RESULTS_ENV, default_value = "results")]
        results: PathBuf,
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Per-cell wall-clock budget in seconds.
        #[arg(long)]
        budget_secs: Option<f64>,
    },
    /// Build summary tables and curve files from finished runs.
    Report {
        #[arg(long, env = RESULTS_ENV, default_value = "results")]
        results: PathBuf,
    },
}

fn read_input(path: Option<&Path>) -> Result<String, CliError> {
    match path {
        Some(p) if p != Path::new("-") => read_file(p),
        _ => {
            let mut s = String::new();
            std::io::stdin()
                .read_to_string(&mut s)
                .map_err(|source| CliError::Io { path: "<stdin>".into(), source })?;
            Ok(s)
        }
    }
}

fn read_file(p: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
}

fn execute(cmd: Command) -> Result<String, CliError> {
    match cmd {
        Command::Parse { sentence, lexicon, emit_json } => {
            let lexicon = match lexicon {
                Some(p) => Lexicon::load(&p).map_err(|e| CliError::Config(e.to_string()))?,
                None => mc_lexicon(),
            };
            commands::parse(&sentence, &lexicon, emit_json)
        }
        Command::Rewrite { scheme, input } => {
            let scheme: RewriteScheme = scheme.parse().map_err(|e: qnlp_core::rewrite::RewriteError| CliError::Config(e.to_string()))?;
            commands::rewrite_json(&read_input(input.as_deref())?, scheme)
        }
        Command::Compile { ansatz, layers, rotations, input } => {
            commands::compile_json(&read_input(input.as_deref())?, &ansatz, layers, rotations)
        }
        Command::Simulate { circuit, params } => commands::simulate_json(&read_file(&circuit)?, &read_file(&params)?),
        Command::Train { config, results } => {
            let cfg = ExperimentConfig::load(&config)?;
            let out = run_experiment(&cfg, &results)?;
            let mut text = String::new();
            for r in &out.runs {
                let s = &r.summary;
                text.push_str(&format!(
                    "{}: val_acc {:.4} test_acc {:.4} ({:.1}s)\n",
                    s.run_id, s.val_acc, s.test_acc, s.elapsed_secs
                ));
            }
            Ok(text)
        }
        Command::Sweep { config, results, seeds, epochs, budget_secs } => {
            let mut cfg = match config {
                Some(p) => SweepConfig::load(&p)?,
                None => SweepConfig::default(),
            };
            if let Some(s) = seeds {
                cfg.seeds = s;
            }
            if let Some(e) = epochs {
                cfg.epochs = e;
            }
            if budget_secs.is_some() {
                cfg.budget_secs = budget_secs;
            }
            let out = run_sweep(&cfg, &results)?;
            Ok(format!(
                "{} cells ({} run now, {} from ledger); table: {}\n",
                out.records.len(),
                out.executed.len(),
                out.records.len() - out.executed.len(),
                out.table.display()
            ))
        }
        Command::Report { results } => {
            let f = report(&results)?;
            Ok([f.table1, f.table2, f.table2_cells, f.table3, f.curves]
                .iter()
                .map(|p| format!("{}\n", p.display()))
                .collect())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(out) => {
            print!("{out}");
            if !out.ends_with('\n') {
                println!();
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
