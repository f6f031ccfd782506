//! The KB-vs-documents ladder: six corpora sharing one KB and question set
//! but with progressively harder document realizations, each trained and
//! evaluated under one configuration, emitted as a single comparison table.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use kvmem_core::datagen::GenConfig;
use kvmem_core::featurize::Representation;
use kvmem_core::model::HyperParams;

use crate::commands::{eval_checkpoint, train_into};
use crate::error::Result;
use crate::experiment::{Baseline, ExperimentSpec, Source, SplitName};

pub const LADDER_LABELS: [&str; 6] = [
    "kb",
    "one_template",
    "all_templates",
    "one_template_coref",
    "one_template_conj",
    "all_corruptions",
];

/// Document parameters for one ladder rung. The KB and the questions stay
/// identical across rungs (generation draws them from the same seed before
/// any document randomness).
pub fn ladder_gen_config(base: &GenConfig, label: &str) -> GenConfig {
    let (templates, conj, coref) = match label {
        "kb" => (1, 0.0, 0.0),
        "one_template" => (1, 0.0, 0.0),
        "all_templates" => (100, 0.0, 0.0),
        "one_template_coref" => (1, 0.0, base.coreference_rate),
        "one_template_conj" => (1, base.conjunction_rate, 0.0),
        "all_corruptions" => (100, base.conjunction_rate, base.coreference_rate),
        other => panic!("unknown ladder label '{other}'"),
    };
    GenConfig {
        templates_per_relation: templates,
        conjunction_rate: conj,
        coreference_rate: coref,
        ..base.clone()
    }
}

fn ladder_spec(label: &str, doc_representation: Representation) -> ExperimentSpec {
    if label == "kb" {
        ExperimentSpec {
            source: Source::Kb,
            representation: Representation::KbTriple,
            baseline: Baseline::None,
        }
    } else {
        ExperimentSpec {
            source: Source::Doc,
            representation: doc_representation,
            baseline: Baseline::None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LadderParams {
    pub gen: GenConfig,
    pub hyper: HyperParams,
    pub doc_representation: Representation,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct LadderRow {
    pub label: String,
    pub corpus: PathBuf,
    pub dev_hits1: f64,
    pub test_hits1: f64,
    pub train_seconds: f64,
}

/// Generate the six corpora under `out/<label>/corpus`.
pub fn generate_ladder_corpora(base: &GenConfig, out: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut dirs = Vec::new();
    for label in LADDER_LABELS {
        let dir = out.join(label).join("corpus");
        let config = ladder_gen_config(base, label);
        crate::commands::generate_corpus(&config, &dir)?;
        dirs.push((label.to_string(), dir));
    }
    Ok(dirs)
}

/// Run the whole ladder sequentially and write the comparison table.
pub fn run_ladder(params: &LadderParams) -> Result<Vec<LadderRow>> {
    let corpora = generate_ladder_corpora(&params.gen, &params.out)?;
    let mut rows = Vec::new();
    for (label, corpus_dir) in corpora {
        let spec = ladder_spec(&label, params.doc_representation);
        let run_dir = params.out.join(&label).join("run");
        let trained = train_into(&corpus_dir, spec, params.hyper.clone(), &run_dir, None)?;
        let eval = eval_checkpoint(
            &trained.checkpoint_path,
            &corpus_dir,
            SplitName::Test,
            Some(&run_dir),
            None,
        )?;
        rows.push(LadderRow {
            label,
            corpus: corpus_dir,
            dev_hits1: trained.dev_report.overall_hits1,
            test_hits1: eval.report.overall_hits1,
            train_seconds: trained.train_seconds,
        });
    }
    write_table(&rows, &params.out)?;
    Ok(rows)
}

pub fn write_table(rows: &[LadderRow], out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    let mut json = serde_json::to_string_pretty(rows)?;
    json.push('\n');
    fs::write(out.join("ladder.json"), json)?;
    let mut txt = String::new();
    txt.push_str(&format!("{:<22} {:>10} {:>10}\n", "knowledge", "dev h@1", "test h@1"));
    txt.push_str(&format!("{}\n", "-".repeat(44)));
    for r in rows {
        txt.push_str(&format!("{:<22} {:>10.1} {:>10.1}\n", r.label, r.dev_hits1, r.test_hits1));
    }
    fs::write(out.join("ladder.txt"), txt)?;
    Ok(())
}
