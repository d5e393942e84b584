use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use perfpred_core::data::{
    biased_split, load_csv, write_csv, CsvOptions, IdPolicy, Proportion, SplitCondition,
    SplitManifest, SplitSizes,
};
use perfpred_core::harness::{
    generate_synthetic, run_experiment, write_results, ExperimentConfig, RunOptions, SyntheticSpec,
};
use perfpred_core::metrics::{
    read_curves_csv, summarize, AucRank, Method, Summary, DEFAULT_TOLERANCES,
};

#[derive(Parser)]
#[command(
    name = "perfpred",
    version,
    about = "Test-set maintenance under covariate shift"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic classification dataset as CSV.
    Generate(GenerateArgs),
    /// Draw one biased split from a CSV dataset and write its manifest.
    Split(SplitArgs),
    /// Run an experiment grid from a JSON config.
    Run(RunArgs),
    /// Recompute the summary tables from a results directory.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    size: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    classes: Option<usize>,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "label")]
    label_column: String,
    /// Column holding row ids; row order is used when absent.
    #[arg(long)]
    id_column: Option<String>,
    /// Columns to encode by vocabulary. Repeatable.
    #[arg(long)]
    categorical: Vec<String>,
    /// `column>value` or `column=value`.
    #[arg(long)]
    condition: String,
    /// Percentage of bin A in train and test.
    #[arg(long)]
    k: u8,
    #[arg(long)]
    train: usize,
    #[arg(long)]
    test: usize,
    #[arg(long)]
    prod: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 picks one per core.
    #[arg(long, default_value_t = 0)]
    parallelism: usize,
    /// Also write per-iteration weights for every run.
    #[arg(long)]
    verbose_weights: bool,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    results: PathBuf,
    /// Effort-saved tolerance in percentage points. Repeatable.
    #[arg(long = "tolerance")]
    tolerances: Vec<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Split(a) => split(a),
        Command::Run(a) => run(a),
        Command::Report(a) => report(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn generate(a: GenerateArgs) -> Result<()> {
    let mut spec = SyntheticSpec {
        seed: a.seed,
        ..SyntheticSpec::default()
    };
    if let Some(n) = a.size {
        spec.size = n;
    }
    if let Some(d) = a.dim {
        spec.dim = d;
    }
    if let Some(c) = a.classes {
        spec.classes = c;
    }
    let ds = generate_synthetic(&spec)?;
    write_csv(&ds, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    println!("wrote {} rows to {}", ds.len(), a.out.display());
    Ok(())
}

fn split(a: SplitArgs) -> Result<()> {
    let mut opts = CsvOptions::new(a.label_column);
    opts.categorical = a.categorical;
    if let Some(col) = a.id_column {
        opts.id_policy = IdPolicy::Column(col);
    }
    let ds = load_csv(&a.data, &opts).with_context(|| format!("loading {}", a.data.display()))?;
    let cond = SplitCondition::parse(&a.condition, &ds)?;
    let k = Proportion::new(a.k)?;
    let sizes = SplitSizes {
        train: a.train,
        test: a.test,
        prod: a.prod,
    };
    let s = biased_split(&ds, &cond, k, sizes, a.seed)?;
    let manifest = s.manifest();
    write_json(&a.out, &manifest)?;
    println!(
        "train {} / test {} / pool {} / production-eval {} -> {}",
        manifest.train_ids.len(),
        manifest.test_ids.len(),
        manifest.pool_ids.len(),
        manifest.production_eval_ids.len(),
        a.out.display()
    );
    Ok(())
}

fn run(a: RunArgs) -> Result<()> {
    let mut config = ExperimentConfig::from_json_file(&a.config)
        .with_context(|| format!("reading config {}", a.config.display()))?;
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    let opts = RunOptions {
        parallelism: a.parallelism,
        verbose_weights: a.verbose_weights,
    };
    let results = run_experiment(&config, &opts)?;
    write_results(&results, &a.out)
        .with_context(|| format!("writing results to {}", a.out.display()))?;
    println!(
        "{} runs written to {}",
        results.cells.len(),
        a.out.display()
    );
    print_tables(&results.summary);
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    let curves_path = a.results.join("curves.csv");
    let curves = read_curves_csv(&curves_path)
        .with_context(|| format!("reading {}", curves_path.display()))?;
    let tolerances = if a.tolerances.is_empty() {
        DEFAULT_TOLERANCES.to_vec()
    } else {
        a.tolerances
    };
    let summary = summarize(&curves, &tolerances)?;
    print_tables(&summary);

    let stored_path = a.results.join("summary.json");
    if tolerances == DEFAULT_TOLERANCES && stored_path.exists() {
        let text = fs::read_to_string(&stored_path)
            .with_context(|| format!("reading {}", stored_path.display()))?;
        let stored: Summary = serde_json::from_str(&text)
            .with_context(|| format!("parsing {}", stored_path.display()))?;
        if stored != summary {
            bail!(
                "{} disagrees with the summary recomputed from curves.csv",
                stored_path.display()
            );
        }
        println!("\nsummary.json matches curves.csv");
    }
    Ok(())
}

fn write_json(path: &Path, value: &SplitManifest) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn print_table(title: &str, rows: &[(String, &AucRank)]) {
    println!("\n{title}");
    print!("{:<24}", "");
    for m in Method::ALL {
        print!("{:>22}", m.name());
    }
    println!();
    for (label, t) in rows {
        print!("{label:<24}");
        for m in Method::ALL {
            let auc = t.auc.get(&m).copied().unwrap_or(f64::NAN);
            let rank = t.rank.get(&m).copied().unwrap_or(f64::NAN);
            print!("{:>22}", format!("{auc:.1} ({rank:.2})"));
        }
        println!();
    }
}

fn print_tables(summary: &Summary) {
    let by_strategy: Vec<(String, &AucRank)> = summary
        .by_strategy
        .iter()
        .map(|(s, t)| (s.to_string(), t))
        .collect();
    print_table("AUC (mean rank) by strategy", &by_strategy);
    let by_group: Vec<(String, &AucRank)> = summary
        .by_group
        .iter()
        .map(|(g, t)| (format!("{g:?}").to_lowercase(), t))
        .collect();
    print_table("AUC (mean rank) by proportion group", &by_group);
    print_table(
        "AUC (mean rank) overall",
        &[("all".to_string(), &summary.overall)],
    );

    println!(
        "\nEffort saved vs {} (pooled over strategies)",
        Method::BASELINE
    );
    println!(
        "{:<10}{:<22}{:>12}{:>8}{:>13}{:>11}",
        "tol", "method", "mean saved", "saved", "not reached", "undefined"
    );
    for row in summary.effort_saved.iter().filter(|r| r.strategy.is_none()) {
        let mean = row
            .mean_saved
            .map(|v| format!("{v:.1}%"))
            .unwrap_or_else(|| "-".into());
        println!(
            "{:<10}{:<22}{:>12}{:>8}{:>13}{:>11}",
            row.tolerance,
            row.method.name(),
            mean,
            row.saved,
            row.not_reached,
            row.undefined
        );
    }
}
