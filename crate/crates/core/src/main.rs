use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use advgame::bench::Method;
use advgame::experiment::{
    emit_report, evaluate_results, format_report, generate, load_set, margin_table, run_experiment,
    ExperimentConfig,
};
use advgame::game::PayoffKind;
use advgame::geometry::GeometryConfig;
use advgame::io::load_dataset;
use advgame::synthetic::SyntheticSpec;
use advgame::{AttackBudget, Norm, Result};

#[derive(Parser)]
#[command(
    name = "advgame",
    version,
    about = "Optimal randomized attacks on sets of classifiers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Inputs {
    /// Model JSON files, one per classifier.
    #[arg(long, num_args = 1.., required = true)]
    models: Vec<PathBuf>,
    /// Dataset CSV with header f0,...,f{d-1},label.
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args)]
struct BudgetArgs {
    #[arg(long, default_value = "l2")]
    norm: Norm,
    #[arg(long)]
    eps: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Attack every point and write a run directory.
    Attack {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        budget: BudgetArgs,
        #[arg(long, default_value = "mwu-exact")]
        method: Method,
        #[arg(long, default_value_t = 30)]
        rounds: usize,
        /// MWU step size; defaults to sqrt(ln n / rounds).
        #[arg(long)]
        beta: Option<f64>,
        /// Game payoff: zero_one, reverse_hinge or untargeted_reverse_hinge.
        #[arg(long)]
        payoff: Option<PayoffKind>,
        #[arg(long, default_value_t = 40)]
        pgd_iters: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Keep perturbed points inside [0, 1]^d.
        #[arg(long)]
        pixel_box: bool,
        #[arg(long, default_value_t = 60_000)]
        max_regions: usize,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Print the distance from every point to each model's nearest wrong region.
    Margins {
        #[command(flatten)]
        inputs: Inputs,
    },
    /// Re-score a stored results.json against a set of models.
    Evaluate {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        budget: BudgetArgs,
        #[arg(long)]
        results: PathBuf,
    },
    /// Summarize every run under a directory, sorted by max accuracy.
    Report {
        #[arg(long, default_value = "results")]
        dir: PathBuf,
    },
    /// Write a synthetic sparse linear task.
    Generate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        dim: usize,
        #[arg(long, default_value_t = 5)]
        classifiers: usize,
        #[arg(long, default_value_t = 100)]
        points: usize,
        #[arg(long, default_value_t = 2)]
        classes: usize,
        #[arg(long, default_value_t = 0.75)]
        sparsity: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Attack {
            inputs,
            budget,
            method,
            rounds,
            beta,
            payoff,
            pgd_iters,
            seed,
            pixel_box,
            max_regions,
            out,
        } => {
            let b = AttackBudget::new(budget.norm, budget.eps)?;
            let mut cfg = ExperimentConfig::new(inputs.models, inputs.data, method, b);
            cfg.rounds = rounds;
            cfg.beta = beta;
            cfg.payoff = payoff;
            cfg.pgd_iterations = pgd_iters;
            cfg.seed = seed;
            cfg.pixel_box = pixel_box;
            cfg.geometry.max_regions = max_regions;
            let outcome = run_experiment(&cfg, &out)?;
            let r = &outcome.results.report;
            println!("{}", outcome.dir.display());
            println!(
                "{}: mean accuracy {:.4}, max accuracy {:.4}",
                r.method, r.mean_accuracy, r.max_accuracy
            );
        }
        Command::Margins { inputs } => {
            let set = load_set(&inputs.models)?;
            let data = load_dataset(&inputs.data, false)?;
            print!("{}", margin_table(&set, &data, &GeometryConfig::default())?);
        }
        Command::Evaluate {
            inputs,
            budget,
            results,
        } => {
            let set = load_set(&inputs.models)?;
            let data = load_dataset(&inputs.data, false)?;
            let b = AttackBudget::new(budget.norm, budget.eps)?;
            let r = evaluate_results(&results, &set, &data, &b)?;
            for (label, acc) in set.labels().iter().zip(&r.per_classifier_accuracy) {
                println!("{label}: {acc:.4}");
            }
            println!(
                "mean accuracy {:.4}, max accuracy {:.4}",
                r.mean_accuracy, r.max_accuracy
            );
        }
        Command::Report { dir } => {
            print!("{}", format_report(&emit_report(&dir)?));
        }
        Command::Generate {
            out,
            dim,
            classifiers,
            points,
            classes,
            sparsity,
            seed,
        } => {
            let spec = SyntheticSpec {
                classes,
                sparsity,
                ..SyntheticSpec::new(dim, classifiers, points, seed)
            };
            let g = generate(&spec, &out)?;
            println!(
                "wrote {} models and {}",
                g.models.len(),
                g.dataset.display()
            );
            println!(
                "margins range from {:.6} to {:.6}",
                g.margins.0, g.margins.1
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
