//! `vgs report`: aggregate sweep cell outputs into a per-(method, budget)
//! report plus a totals row. Totals equal the sum over cells; nothing is
//! silently dropped.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{anyhow, Context, Result};
use clap::Args;

use super::sweep::{CellRow, SweepManifest};

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Sweep output directory (reads sweep_manifest.json).
    #[arg(long)]
    pub dir: PathBuf,
    /// Aggregated report CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (xs.len() as f64 - 1.0)).sqrt()
}

pub fn run(args: &ReportArgs) -> Result<()> {
    let manifest_path = args.dir.join("sweep_manifest.json");
    let manifest = SweepManifest::load(&manifest_path)
        .with_context(|| format!("no sweep manifest under {}", args.dir.display()))?;
    let rows: Vec<CellRow> = manifest.cells.values().filter_map(|s| s.row.clone()).collect();
    let failed = manifest.cells.values().filter(|s| s.status == "failed").count();
    if rows.is_empty() {
        return Err(anyhow!("no completed cells under {}", args.dir.display()));
    }

    let mut groups: BTreeMap<(String, usize, usize, usize), Vec<&CellRow>> = BTreeMap::new();
    for row in &rows {
        groups
            .entry((row.method.clone(), row.budget, row.width, row.block_size))
            .or_default()
            .push(row);
    }

    let mut w = csv::Writer::from_path(&args.out)
        .with_context(|| format!("cannot write {}", args.out.display()))?;
    w.write_record([
        "method",
        "budget",
        "width",
        "block_size",
        "seeds",
        "accuracy_mean",
        "accuracy_std_across_seeds",
        "flops_total",
        "tokens_total",
        "value_calls",
    ])?;
    let mut total_flops = 0.0;
    let mut total_tokens: u64 = 0;
    let mut total_calls: u64 = 0;
    for ((method, budget, width, block_size), cells) in &groups {
        let accs: Vec<f64> = cells.iter().map(|c| c.accuracy_mean).collect();
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        let flops: f64 = cells.iter().map(|c| c.flops_total).sum();
        let tokens: u64 = cells.iter().map(|c| c.tokens_total).sum();
        let calls: u64 = cells.iter().map(|c| c.value_calls).sum();
        total_flops += flops;
        total_tokens += tokens;
        total_calls += calls;
        w.write_record([
            method.clone(),
            budget.to_string(),
            width.to_string(),
            block_size.to_string(),
            cells.len().to_string(),
            mean.to_string(),
            std_dev(&accs).to_string(),
            flops.to_string(),
            tokens.to_string(),
            calls.to_string(),
        ])?;
    }
    w.write_record([
        "TOTAL".to_string(),
        String::new(),
        String::new(),
        String::new(),
        rows.len().to_string(),
        String::new(),
        String::new(),
        total_flops.to_string(),
        total_tokens.to_string(),
        total_calls.to_string(),
    ])?;
    w.flush()?;

    // Consistency check: totals must equal the raw cell sums.
    let raw_flops: f64 = rows.iter().map(|r| r.flops_total).sum();
    let raw_tokens: u64 = rows.iter().map(|r| r.tokens_total).sum();
    let raw_calls: u64 = rows.iter().map(|r| r.value_calls).sum();
    if (raw_flops - total_flops).abs() > 1e-6 || raw_tokens != total_tokens || raw_calls != total_calls
    {
        return Err(anyhow!("report totals diverge from cell sums"));
    }

    println!(
        "report: {} cells aggregated into {} rows ({failed} failed cells excluded), written to {}",
        rows.len(),
        groups.len(),
        args.out.display()
    );
    Ok(())
}
