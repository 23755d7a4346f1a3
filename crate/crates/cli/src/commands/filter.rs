//! `vgs filter`: apply the corpus pre-filtering rules, writing kept and
//! dropped records with the rule each drop fired.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use serde::Serialize;

use vgs_core::pipeline::{pre_filter, write_jsonl, FilterRule};
use vgs_core::types::ProblemRecord;

use crate::run::load_corpus;

#[derive(Args, Debug)]
pub struct FilterArgs {
    /// Problem corpus (JSONL of problem records).
    #[arg(long)]
    pub corpus: PathBuf,
    /// Output path for kept records.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional output path for dropped records with their rules.
    #[arg(long)]
    pub dropped: Option<PathBuf>,
}

#[derive(Serialize)]
struct DroppedRecord<'a> {
    rule: FilterRule,
    record: &'a ProblemRecord,
}

pub fn run(args: &FilterArgs) -> Result<()> {
    let corpus = load_corpus(&args.corpus)?;
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    let mut rule_counts: BTreeMap<String, usize> = BTreeMap::new();
    for record in &corpus {
        let verdict = pre_filter(record);
        if verdict.keep {
            kept.push(record.clone());
        } else {
            let rule = verdict.rule_fired.expect("dropped records carry a rule");
            *rule_counts
                .entry(format!("{rule:?}"))
                .or_insert(0) += 1;
            dropped.push(DroppedRecord { rule, record });
        }
    }
    write_jsonl(&args.out, &kept)?;
    if let Some(path) = &args.dropped {
        write_jsonl(path, &dropped)?;
    }
    println!(
        "filter: kept {} of {} problems ({} dropped)",
        kept.len(),
        corpus.len(),
        dropped.len()
    );
    for (rule, count) in &rule_counts {
        println!("  {rule}: {count}");
    }
    Ok(())
}
