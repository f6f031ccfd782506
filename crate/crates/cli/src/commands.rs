//! Command implementations behind the CLI surface; all usable as a library
//! (the integration suites drive them directly).

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use kvmem_core::datagen::{GenConfig, SynthCorpus};
use kvmem_core::evaluation::{breakdown_report, EvalReport};
use kvmem_core::featurize::EntityDictionary;
use kvmem_core::model::{self, train, EpochLog, HyperParams, ModelParams, TrainError};

use crate::checkpoint::{self, Checkpoint};
use crate::error::{CliError, Result};
use crate::experiment::{
    assemble, rank_split, rankings_and_golds, Assembled, ExperimentSpec, SplitName,
};
use crate::formats;

/// Generate a corpus and emit it; returns the corpus for reporting.
pub fn generate_corpus(config: &GenConfig, out: &Path) -> Result<SynthCorpus> {
    let corpus = SynthCorpus::generate(config)
        .map_err(|e| CliError::usage(format!("generation config: {e}")))?;
    formats::write_corpus(&corpus, out)?;
    Ok(corpus)
}

pub struct TrainedRun {
    pub checkpoint: Checkpoint,
    pub checkpoint_path: PathBuf,
    pub dev_report: EvalReport,
    pub train_seconds: f64,
    pub hash_recall_train: f64,
}

/// Assemble, train, and persist: checkpoint, per-epoch JSONL log, and a dev
/// report land in `out`.
pub fn train_into(
    corpus_dir: &Path,
    spec: ExperimentSpec,
    hyper: HyperParams,
    out: &Path,
    resume: Option<&Path>,
) -> Result<TrainedRun> {
    let corpus = formats::read_corpus(corpus_dir)?;
    let assembled = assemble(&corpus, &spec, &hyper)?;
    fs::create_dir_all(out)?;

    let (params, start_epoch, mut log, mut global_best): (ModelParams, usize, Vec<EpochLog>, Option<(f64, u32, ModelParams)>) =
        match resume {
            Some(path) => {
                let prev = checkpoint::load(path)?;
                if prev.vocab_sha != assembled.vocab_sha {
                    return Err(CliError::data(
                        "resume checkpoint was trained on a different corpus (vocabulary hash mismatch)"
                            .to_string(),
                    ));
                }
                let best = (prev.best_metric, prev.best_epoch, prev.best.clone());
                (prev.final_params.clone(), prev.epochs_done as usize, prev.log.clone(), Some(best))
            }
            None => {
                let params = ModelParams::init(
                    hyper.dim_embed,
                    assembled.vocab.dim(),
                    hyper.hops,
                    hyper.tied_output,
                    hyper.seed,
                );
                (params, 0, Vec::new(), None)
            }
        };

    let mode = spec.baseline.train_mode();
    let start = Instant::now();
    let outcome = train(
        params,
        &assembled.train.examples,
        &assembled.dev.examples,
        &assembled.store,
        &assembled.candidates,
        &hyper,
        mode,
        assembled.dev_metric,
        start_epoch,
    )
    .map_err(|e: TrainError| CliError::Numeric(e.to_string()))?;
    let train_seconds = start.elapsed().as_secs_f64();

    log.extend(outcome.log.iter().copied());
    let epochs_done = log.last().map(|e| e.epoch + 1).unwrap_or(start_epoch) as u32;
    // Keep the best parameters seen across the resumed history too.
    let (best_metric, best_epoch, best) = match global_best.take() {
        Some((m, e, p)) if m >= outcome.best_metric => (m, e, p),
        _ => (outcome.best_metric, outcome.best_epoch as u32, outcome.best_params),
    };

    let ckpt = Checkpoint {
        spec,
        hyper: hyper.clone(),
        vocab: assembled.vocab.clone(),
        entities: corpus.kb.entities(),
        vocab_sha: assembled.vocab_sha,
        best,
        final_params: outcome.final_params,
        epochs_done,
        best_epoch,
        best_metric,
        log: log.clone(),
        store: assembled.store.clone(),
        candidates: assembled.candidates.clone(),
        dev_metric: assembled.dev_metric,
    };
    let checkpoint_path = out.join("checkpoint.kvmn");
    checkpoint::save(&ckpt, &checkpoint_path)?;

    let mut jsonl = String::new();
    for e in &log {
        jsonl.push_str(&format!(
            "{{\"epoch\":{},\"train_loss\":{},\"dev_metric\":{}}}\n",
            e.epoch,
            serde_json::to_string(&e.train_loss)?,
            serde_json::to_string(&e.dev_metric)?
        ));
    }
    fs::write(out.join("train_log.jsonl"), jsonl)?;

    // Dev report for the selected parameters.
    let fingerprint = run_fingerprint(corpus_dir, &checkpoint_path)?;
    let ranked = rank_split(&ckpt.best, mode, &assembled.store, &assembled.candidates, &assembled.dev);
    let (rankings, golds) = rankings_and_golds(&ranked, &assembled.dev);
    let dev_report = breakdown_report(&rankings, &golds, &assembled.dev.qtypes, fingerprint);
    fs::write(out.join("dev_report.json"), report_json(&dev_report)?)?;
    fs::write(out.join("dev_report.txt"), dev_report.render_text())?;

    let hash_recall_train = assembled.store.hash_recall(
        assembled
            .train
            .examples
            .iter()
            .zip(assembled.train.gold_slots.iter())
            .map(|(ex, gold)| (ex.question_tokens.as_slice(), gold.as_slice())),
    );

    Ok(TrainedRun { checkpoint: ckpt, checkpoint_path, dev_report, train_seconds, hash_recall_train })
}

fn report_json(report: &EvalReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

/// Manifest hash + checkpoint hash, the like-for-like fingerprint reports carry.
pub fn run_fingerprint(corpus_dir: &Path, checkpoint_path: &Path) -> Result<String> {
    let manifest = formats::manifest_bytes(corpus_dir)?;
    let ckpt = fs::read(checkpoint_path)?;
    Ok(format!(
        "{}:{}",
        &checkpoint::sha256_hex(&manifest)[..16],
        &checkpoint::sha256_hex(&ckpt)[..16]
    ))
}

pub struct EvalRun {
    pub report: EvalReport,
    pub assembled: Assembled,
    pub ranked: Vec<Vec<(usize, f64)>>,
}

/// Evaluate a checkpoint on one split of a corpus. The corpus must match
/// the checkpoint (vocabulary hash); assembly is deterministic, so the
/// rebuilt pipeline is exactly the one trained on.
pub fn eval_checkpoint(
    checkpoint_path: &Path,
    corpus_dir: &Path,
    split: SplitName,
    out: Option<&Path>,
    dump_rankings: Option<&Path>,
) -> Result<EvalRun> {
    let ckpt = checkpoint::load(checkpoint_path)?;
    let corpus = formats::read_corpus(corpus_dir)?;
    let assembled = assemble(&corpus, &ckpt.spec, &ckpt.hyper)?;
    if assembled.vocab_sha != ckpt.vocab_sha {
        return Err(CliError::data(
            "refusing to evaluate: the corpus vocabulary does not match the checkpoint \
             (was this checkpoint trained on a different corpus or representation?)"
                .to_string(),
        ));
    }
    let mode = ckpt.spec.baseline.train_mode();
    let bound = assembled.split(split);
    let ranked = rank_split(&ckpt.best, mode, &assembled.store, &assembled.candidates, bound);
    let (rankings, golds) = rankings_and_golds(&ranked, bound);
    let fingerprint = run_fingerprint(corpus_dir, checkpoint_path)?;
    let report = breakdown_report(&rankings, &golds, &bound.qtypes, fingerprint);
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        let stem = format!("report_{}", split.name());
        fs::write(dir.join(format!("{stem}.json")), report_json(&report)?)?;
        fs::write(dir.join(format!("{stem}.txt")), report.render_text())?;
    }
    if let Some(path) = dump_rankings {
        let mut jsonl = String::new();
        for (i, r) in ranked.iter().enumerate() {
            let row = serde_json::json!({
                "question": bound.questions[i],
                "gold": golds[i],
                "ranking": rankings[i],
                "scores": r.iter().map(|&(_, s)| s).collect::<Vec<f64>>(),
            });
            jsonl.push_str(&serde_json::to_string(&row)?);
            jsonl.push('\n');
        }
        fs::write(path, jsonl)?;
    }
    Ok(EvalRun { report, assembled, ranked })
}

/// Human-readable hop trace for one question, straight off a checkpoint.
pub fn inspect_question(checkpoint_path: &Path, question: &str, top_k: usize) -> Result<String> {
    let ckpt = checkpoint::load(checkpoint_path)?;
    let entities = EntityDictionary::new(ckpt.entities.iter().map(|s| s.as_str()));
    let mut tokens = kvmem_core::featurize::tokenize(question, &entities);
    if ckpt.spec.representation.sentence_selection() {
        tokens = kvmem_core::featurize::mark_numbers(&tokens);
    }
    let token_ids: Vec<u32> = tokens.iter().filter_map(|t| ckpt.vocab.id(t)).collect();
    let mut out = String::new();
    out.push_str(&format!("question: {question}\n"));
    out.push_str(&format!("tokens: {}\n", tokens.join(" ")));
    if token_ids.is_empty() {
        out.push_str("warning: no in-vocabulary tokens; proceeding via the hashing fallback\n");
    }
    let question_vec = kvmem_core::featurize::bow(
        &tokens,
        &ckpt.vocab,
        kvmem_core::featurize::FeatureBank::Question,
    );
    let hashed = if ckpt.hyper.hashing {
        ckpt.store.hash_query(&token_ids)
    } else {
        ckpt.store.all_ids()
    };
    out.push_str(&format!("hashed slots: {} of {}\n", hashed.len(), ckpt.store.len()));

    let render_sparse = |v: &kvmem_core::numerics::SparseVec| -> String {
        let base = ckpt.vocab.base_size() as u32;
        v.entries()
            .iter()
            .map(|&(id, w)| {
                let star = if id >= base { "*" } else { "" };
                if w == 1.0 {
                    format!("{}{}", ckpt.vocab.word_of(id), star)
                } else {
                    format!("{}{}x{}", ckpt.vocab.word_of(id), star, w)
                }
            })
            .collect::<Vec<_>>()
            .join(" ")
    };

    match ckpt.spec.baseline.train_mode() {
        kvmem_core::model::TrainMode::KeyValue => {
            let trace =
                model::forward(&ckpt.best, &question_vec, &ckpt.store, &hashed, &ckpt.candidates);
            for (j, hop) in trace.hops.iter().enumerate() {
                let p_sum: f64 = hop.attention.iter().sum();
                out.push_str(&format!("hop {} (probability mass {:.6}):\n", j + 1, p_sum));
                let mut ranked: Vec<(usize, f64)> =
                    hop.attention.iter().copied().enumerate().collect();
                ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
                for &(i, p) in ranked.iter().take(top_k) {
                    let slot = ckpt.store.slot(trace.hashed[i]);
                    out.push_str(&format!(
                        "  p={:.4} slot {} key [{}] value [{}]\n",
                        p,
                        trace.hashed[i],
                        render_sparse(&slot.key),
                        render_sparse(&slot.value)
                    ));
                }
            }
            out.push_str("prediction:\n");
            let ranked = model::rank_candidates(&trace.distribution);
            for &(c, s) in ranked.iter().take(top_k) {
                out.push_str(&format!("  {:.4} {}\n", s, render_candidate(&ckpt, c)));
            }
        }
        kvmem_core::model::TrainMode::SupervisedEmbeddings => {
            let dist =
                model::supervised_embeddings_forward(&ckpt.best, &question_vec, &ckpt.candidates);
            out.push_str("prediction (supervised embeddings, no memory):\n");
            let ranked = model::rank_candidates(&dist);
            for &(c, s) in ranked.iter().take(top_k) {
                out.push_str(&format!("  {:.4} {}\n", s, render_candidate(&ckpt, c)));
            }
        }
    }
    Ok(out)
}

fn render_candidate(ckpt: &Checkpoint, index: usize) -> String {
    match ckpt.candidates.mode() {
        kvmem_core::model::CandidateMode::Entity => {
            ckpt.vocab.token(ckpt.candidates.external_id(index)).to_string()
        }
        kvmem_core::model::CandidateMode::Sentence => {
            format!("sentence {}", ckpt.candidates.external_id(index))
        }
    }
}
