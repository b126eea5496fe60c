use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use swarm_ann::dataset::{generate_synthetic, write_csv};
use swarm_ann::experiment::{
    evaluate_file, run_experiment, validate_config, Checkpoint, Evaluation,
};
use swarm_ann::{Error, ErrorClass};

#[derive(Debug, Parser)]
#[command(
    name = "swarm-ann",
    version,
    about = "Train feed-forward classifiers with nested particle swarm optimization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a cross-validated experiment described by an INI config file.
    Run { config: PathBuf },
    /// Write a two-class Gaussian data set to CSV.
    Synth {
        /// Total number of rows, split evenly between the classes.
        #[arg(long, value_parser = even_row_count)]
        rows: usize,
        #[arg(long)]
        features: usize,
        /// Distance between the class centres along every axis.
        #[arg(long)]
        separation: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify the rows of a CSV file with a saved model.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Write predictions here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn even_row_count(s: &str) -> Result<usize, String> {
    let n: usize = s.parse().map_err(|e| format!("{e}"))?;
    if n >= 2 && n.is_multiple_of(2) {
        Ok(n)
    } else {
        Err("must be an even number of at least 2".into())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(ErrorClass::Config.exit_code())
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.class().exit_code())
        }
    }
}

fn execute(command: Command) -> swarm_ann::Result<()> {
    match command {
        Command::Run { config } => run(&config),
        Command::Synth {
            rows,
            features,
            separation,
            seed,
            out,
        } => synth(rows, features, separation, seed, &out),
        Command::Eval { model, data, out } => eval(&model, &data, out.as_deref()),
    }
}

fn run(path: &Path) -> swarm_ann::Result<()> {
    let config = validate_config(path)?;
    let outcome = run_experiment(&config)?;
    let summary = std::fs::read_to_string(config.output_dir.join("summary.txt"))
        .map_err(|e| Error::io(config.output_dir.join("summary.txt"), e))?;
    println!(
        "{} rows, {} features, {}-fold cross validation\n",
        outcome.n_rows, outcome.n_features, config.k_folds
    );
    print!("{summary}");
    println!();
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn synth(
    rows: usize,
    features: usize,
    separation: f64,
    seed: u64,
    out: &Path,
) -> swarm_ann::Result<()> {
    let data = generate_synthetic(rows / 2, features, separation, seed)?;
    write_csv(&data.as_raw(), out)?;
    eprintln!("wrote {rows} rows to {}", out.display());
    Ok(())
}

fn predictions_csv(eval: &Evaluation) -> String {
    let mut out = String::from("row,probability,prediction");
    if eval.labels.is_some() {
        out.push_str(",label");
    }
    out.push('\n');
    for (i, (p, c)) in eval.probabilities.iter().zip(&eval.predictions).enumerate() {
        out.push_str(&format!("{i},{p},{c}"));
        if let Some(labels) = &eval.labels {
            out.push_str(&format!(",{}", labels[i]));
        }
        out.push('\n');
    }
    out
}

fn eval(model: &Path, data: &Path, out: Option<&Path>) -> swarm_ann::Result<()> {
    let checkpoint = Checkpoint::load(model)?;
    let evaluation = evaluate_file(&checkpoint, data)?;
    let csv = predictions_csv(&evaluation);
    match out {
        Some(path) => std::fs::write(path, csv).map_err(|e| Error::io(path, e))?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(csv.as_bytes())
                .map_err(|e| Error::io("<stdout>", e))?;
        }
    }
    if let Some(r) = evaluation.report {
        eprintln!(
            "accuracy {:.4}  precision {:.4}  sensitivity {:.4}  specificity {:.4}  f-measure {:.4}",
            r.accuracy, r.precision, r.recall, r.specificity, r.f_measure
        );
    }
    Ok(())
}
