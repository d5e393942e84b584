//! Runs the default synthetic grid and prints AUC / rank tables.
//!
//! Usage: cargo run --release --example synthetic_grid [seed] [data seed]

use std::time::Instant;

use perfpred_core::harness::{run_experiment, ExperimentConfig, RunOptions, SyntheticSpec};
use perfpred_core::metrics::Method;

fn main() -> perfpred_core::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let data_seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let mut cfg = ExperimentConfig::synthetic(SyntheticSpec {
        seed: data_seed,
        ..SyntheticSpec::default()
    });
    cfg.seed = seed;

    let start = Instant::now();
    let res = run_experiment(&cfg, &RunOptions::default())?;
    println!("grid finished in {:.1?}", start.elapsed());

    let header: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
    println!("{:<26} {}", "", header.join("  "));
    let row = |name: &str, t: &perfpred_core::metrics::AucRank| {
        let cells: Vec<String> = Method::ALL
            .iter()
            .map(|m| format!("{:>7.1}/{:.2}", t.auc[m], t.rank[m]))
            .collect();
        println!("{name:<26} {}", cells.join("  "));
    };
    for (s, t) in &res.summary.by_strategy {
        row(s.name(), t);
    }
    for (g, t) in &res.summary.by_group {
        row(&format!("{g:?}"), t);
    }
    row("overall", &res.summary.overall);

    for e in &res.summary.experiments {
        let cells: Vec<String> = Method::ALL
            .iter()
            .map(|m| format!("{:>7.1}", e.auc[m]))
            .collect();
        println!("{:<30} {}", e.experiment_id, cells.join(" "));
    }
    for c in res.curves.iter().filter(|c| c.points.len() > 1) {
        if c.split_k.percent() == 10 || c.split_k.percent() == 90 {
            println!(
                "{} {} it0={:.2} last={:.2}",
                c.experiment_id,
                c.method,
                c.points[0].error_mean,
                c.points.last().unwrap().error_mean
            );
        }
    }
    Ok(())
}
