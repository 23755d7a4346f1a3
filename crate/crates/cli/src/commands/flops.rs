//! `vgs flops`: the inference FLOPs calculator.
//!
//! With no arguments it prints the reference accounting table (full-length
//! generations for the standard model sizes, per-generation scorer cost at
//! one call per block, and the budget-256 total with overhead). Flags
//! switch to a custom calculation.

use anyhow::Result;
use clap::Args;
use serde::Serialize;

use vgs_core::metrics::{generation_flops, reference_flops_table, ModelShape};

#[derive(Args, Debug)]
pub struct FlopsArgs {
    /// Generator parameter count (e.g. 1.5e9). Repeatable.
    #[arg(long = "gen-params")]
    pub gen_params: Vec<f64>,
    /// Scorer parameter count.
    #[arg(long = "scorer-params")]
    pub scorer_params: Option<f64>,
    /// Generation length in tokens.
    #[arg(long, default_value_t = 16384)]
    pub ctx: u64,
    /// Search block size (one scorer call per block).
    #[arg(long, default_value_t = 4096)]
    pub block: u64,
    /// Inference budget for the total.
    #[arg(long, default_value_t = 256)]
    pub budget: u64,
    /// Emit JSON instead of the table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Serialize)]
struct CustomFlops {
    generations: Vec<GenEntry>,
    scorer_per_generation: Option<f64>,
    total: Option<f64>,
    overhead_fraction: Option<f64>,
    ctx: u64,
    block: u64,
    budget: u64,
}

#[derive(Serialize)]
struct GenEntry {
    params: f64,
    flops: f64,
}

fn human(f: f64) -> String {
    const UNITS: &[(f64, &str)] = &[(1e15, "P"), (1e12, "T"), (1e9, "B"), (1e6, "M")];
    for &(scale, suffix) in UNITS {
        if f >= scale {
            return format!("{:.4}{suffix}", f / scale);
        }
    }
    format!("{f:.1}")
}

pub fn run(args: &FlopsArgs) -> Result<()> {
    if args.gen_params.is_empty() {
        let table = reference_flops_table();
        if args.json {
            println!("{}", serde_json::to_string_pretty(&table)?);
        } else {
            println!("FLOPs per full 16384-token generation (2N per token):");
            println!("  1.5B generator: {}", human(table.generation_1_5b));
            println!("  7B generator:   {}", human(table.generation_7b));
            println!("  14B generator:  {}", human(table.generation_14b));
            println!("  37B activated:  {}", human(table.generation_37b_activated));
            println!("Scorer cost per generation (4 calls at 4096-token blocks):");
            println!("  1.5B scorer: {}", human(table.scorer_1_5b_per_generation));
            println!("  7B scorer:   {}", human(table.scorer_7b_per_generation));
            println!(
                "Total at budget 256 (1.5B generator + 1.5B scorer): {}",
                human(table.total_budget_256)
            );
            println!(
                "Scorer overhead: {:.4}% of generator FLOPs",
                table.overhead_fraction_1_5b * 100.0
            );
        }
        return Ok(());
    }

    let calls_per_gen = args.ctx.div_ceil(args.block) as f64;
    let mut generations = Vec::new();
    for &params in &args.gen_params {
        let flops = generation_flops(&ModelShape::from_params(params), args.ctx, true)
            .expect("params given");
        generations.push(GenEntry { params, flops });
    }
    let scorer_per_generation = args.scorer_params.map(|p| 2.0 * p * calls_per_gen);
    let total = scorer_per_generation
        .map(|s| (generations[0].flops + s) * args.budget as f64)
        .or(Some(generations[0].flops * args.budget as f64));
    let overhead_fraction = scorer_per_generation.map(|s| s / generations[0].flops);
    let custom = CustomFlops {
        generations,
        scorer_per_generation,
        total,
        overhead_fraction,
        ctx: args.ctx,
        block: args.block,
        budget: args.budget,
    };
    if args.json {
        println!("{}", serde_json::to_string_pretty(&custom)?);
    } else {
        for g in &custom.generations {
            println!(
                "generation ({} params, {} tokens): {}",
                human(g.params),
                args.ctx,
                human(g.flops)
            );
        }
        if let Some(s) = custom.scorer_per_generation {
            println!("scorer per generation ({} calls): {}", calls_per_gen, human(s));
        }
        if let Some(t) = custom.total {
            println!("total at budget {}: {}", args.budget, human(t));
        }
        if let Some(o) = custom.overhead_fraction {
            println!("scorer overhead: {:.4}%", o * 100.0);
        }
    }
    Ok(())
}
