//! Wiring from a corpus directory to bound training data: build the entity
//! dictionary and vocabulary, emit memory slots for the configured
//! representation, construct the candidate set, and bind every QA example
//! to candidate indices and pre-hashed slot ids.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Deserialize;

use kvmem_core::datagen::{QAItem, SynthCorpus};
use kvmem_core::featurize::{
    bow, kb_slots, mark_numbers, sentence_slots, tokenize, window_sentence_slots, window_slots,
    Document, EntityDictionary, FeatureBank, MemorySlot, Provenance, Representation, Vocabulary,
    VocabularyBuilder,
};
use kvmem_core::memory_store::MemoryStore;
use kvmem_core::model::{
    CandidateMode, CandidateSet, DevMetric, HyperParams, ModelParams, TrainExample, TrainMode,
};

use crate::checkpoint::vocab_sha;
use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    Kb,
    Doc,
}

impl Source {
    pub fn name(&self) -> &'static str {
        match self {
            Source::Kb => "kb",
            Source::Doc => "doc",
        }
    }

    pub fn from_name(name: &str) -> Option<Source> {
        match name {
            "kb" => Some(Source::Kb),
            "doc" => Some(Source::Doc),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Baseline {
    /// The full key-value model.
    #[default]
    None,
    /// Standard memory network: key and value both hold the merged bag.
    MemNn,
    /// No memory at all; question scored directly against answers.
    SupervisedEmbeddings,
}

impl Baseline {
    pub fn name(&self) -> &'static str {
        match self {
            Baseline::None => "none",
            Baseline::MemNn => "memnn",
            Baseline::SupervisedEmbeddings => "supervised",
        }
    }

    pub fn from_name(name: &str) -> Option<Baseline> {
        match name {
            "none" => Some(Baseline::None),
            "memnn" => Some(Baseline::MemNn),
            "supervised" => Some(Baseline::SupervisedEmbeddings),
            _ => None,
        }
    }

    pub fn train_mode(&self) -> TrainMode {
        match self {
            Baseline::SupervisedEmbeddings => TrainMode::SupervisedEmbeddings,
            _ => TrainMode::KeyValue,
        }
    }
}

/// What to train: knowledge source, memory representation, and baseline.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExperimentSpec {
    pub source: Source,
    pub representation: Representation,
    pub baseline: Baseline,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match self.source {
            Source::Kb => self.representation == Representation::KbTriple,
            Source::Doc => self.representation != Representation::KbTriple,
        };
        if !ok {
            return Err(CliError::usage(format!(
                "representation '{}' is not valid for source '{}' (kb_triple requires source=kb, document representations require source=doc)",
                self.representation.name(),
                self.source.name()
            )));
        }
        Ok(())
    }

    pub fn from_names(source: &str, representation: &str, baseline: &str) -> std::result::Result<Self, String> {
        let source = Source::from_name(source).ok_or_else(|| format!("unknown source '{source}'"))?;
        let representation = Representation::from_name(representation)
            .ok_or_else(|| format!("unknown representation '{representation}'"))?;
        let baseline =
            Baseline::from_name(baseline).ok_or_else(|| format!("unknown baseline '{baseline}'"))?;
        Ok(ExperimentSpec { source, representation, baseline })
    }
}

/// One bound split: examples aligned with their class labels, surfaces, and
/// acceptable supporting slot ids (for hashing-recall diagnostics).
#[derive(Clone, Debug, Default)]
pub struct BoundSplit {
    pub examples: Vec<TrainExample>,
    pub qtypes: Vec<String>,
    pub questions: Vec<String>,
    pub gold_slots: Vec<Vec<u32>>,
}

/// Everything derived from (corpus, spec, hyper); deterministic, so the
/// train- and eval-time assemblies of the same corpus are identical.
pub struct Assembled {
    pub vocab: Vocabulary,
    pub entities: EntityDictionary,
    pub store: MemoryStore,
    pub candidates: CandidateSet,
    pub train: BoundSplit,
    pub dev: BoundSplit,
    pub test: BoundSplit,
    pub vocab_sha: [u8; 32],
    pub skipped_slots: u32,
    pub dev_metric: DevMetric,
    /// The stop-word threshold actually used (manifest recommendation when
    /// the hyperparameter was 0).
    pub freq_threshold: usize,
}

impl Assembled {
    pub fn split(&self, name: SplitName) -> &BoundSplit {
        match name {
            SplitName::Train => &self.train,
            SplitName::Dev => &self.dev,
            SplitName::Test => &self.test,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitName {
    Train,
    Dev,
    Test,
}

impl SplitName {
    pub fn name(&self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Dev => "dev",
            SplitName::Test => "test",
        }
    }

    pub fn from_name(name: &str) -> Option<SplitName> {
        match name {
            "train" => Some(SplitName::Train),
            "dev" => Some(SplitName::Dev),
            "test" => Some(SplitName::Test),
            _ => None,
        }
    }
}

fn tokenize_marked(text: &str, entities: &EntityDictionary, mark: bool) -> Vec<String> {
    let tokens = tokenize(text, entities);
    if mark {
        mark_numbers(&tokens)
    } else {
        tokens
    }
}

pub fn assemble(corpus: &SynthCorpus, spec: &ExperimentSpec, hyper: &HyperParams) -> Result<Assembled> {
    spec.validate()?;
    hyper.validate().map_err(CliError::Usage)?;
    let mark = spec.representation.sentence_selection();
    let entities = EntityDictionary::new(corpus.kb.entities());

    // Tokenized documents, shared by slots and the vocabulary.
    let documents: Vec<Document> = corpus
        .docs
        .docs
        .iter()
        .map(|d| Document {
            title: EntityDictionary::entity_token(&d.title),
            sentences: d
                .sentences
                .iter()
                .map(|s| tokenize_marked(s, &entities, mark))
                .collect(),
        })
        .collect();

    // Vocabulary: reserved markers, then KB tokens, then document tokens,
    // then the training questions.
    let mut builder = VocabularyBuilder::new();
    for t in &corpus.kb.triples {
        builder.add(&EntityDictionary::entity_token(&t.subject));
        builder.add(&t.relation);
        builder.add(&kvmem_core::featurize::KBTriple::reversed_relation(&t.relation));
        builder.add(&EntityDictionary::entity_token(&t.object));
    }
    for doc in &documents {
        for sentence in &doc.sentences {
            for token in sentence {
                builder.add(token);
            }
        }
    }
    for item in &corpus.qa.train {
        for token in tokenize_marked(&item.question, &entities, mark) {
            builder.add(&token);
        }
    }
    let vocab = builder.build(spec.representation.center_encoded());

    // Memory slots for the configured representation.
    let mut skipped_slots = 0u32;
    let mut slots: Vec<MemorySlot> = match spec.representation {
        Representation::KbTriple => {
            let (slots, skipped) = kb_slots(&corpus.kb.triples, &vocab);
            skipped_slots = skipped;
            slots
        }
        Representation::Sentence => {
            let mut slots = Vec::new();
            for (i, doc) in documents.iter().enumerate() {
                slots.extend(sentence_slots(doc, i as u32, &vocab, &entities));
            }
            slots
        }
        Representation::WindowSentence => {
            let mut slots = Vec::new();
            let mut sentence_base = 0u32;
            for (i, doc) in documents.iter().enumerate() {
                slots.extend(window_sentence_slots(
                    doc,
                    i as u32,
                    hyper.window,
                    &vocab,
                    &entities,
                    sentence_base,
                ));
                sentence_base += doc.sentences.len() as u32;
            }
            slots
        }
        _ => {
            let options = spec.representation.window_options().expect("window representation");
            let mut slots = Vec::new();
            for (i, doc) in documents.iter().enumerate() {
                slots.extend(window_slots(doc, i as u32, hyper.window, &vocab, &entities, options));
            }
            slots
        }
    };
    if slots.is_empty() {
        return Err(CliError::data("no memory slots could be built from this corpus"));
    }
    if spec.baseline == Baseline::MemNn {
        // Standard memory network: one embedding per memory, so the whole
        // (key, value) content is merged into a single shared bag.
        for slot in slots.iter_mut() {
            let merged = slot.key.merged(&slot.value);
            slot.key = merged.clone();
            slot.value = merged;
        }
    }

    let freq_threshold =
        if hyper.freq_threshold == 0 { corpus.recommended_f() } else { hyper.freq_threshold };
    let store = MemoryStore::build(slots, vocab.base_size(), freq_threshold, hyper.cap);

    // Candidates: every KB entity, or every document sentence.
    let sentence_mode = spec.representation.sentence_selection();
    let candidates = if sentence_mode {
        let mut ids = Vec::new();
        let mut feats = Vec::new();
        let mut global = 0u32;
        for doc in &documents {
            for sentence in &doc.sentences {
                ids.push(global);
                feats.push(bow(sentence, &vocab, FeatureBank::Key));
                global += 1;
            }
        }
        CandidateSet::sentences(ids, feats)
    } else {
        let mut ids: Vec<u32> = corpus
            .kb
            .entities()
            .iter()
            .filter_map(|e| vocab.id(&EntityDictionary::entity_token(e)))
            .collect();
        ids.sort_unstable();
        ids.dedup();
        CandidateSet::entities(ids, vocab.dim())
    };

    // Slot lookup tables for gold-slot bookkeeping.
    let mut triple_slots: BTreeMap<(u32, bool), u32> = BTreeMap::new();
    let mut doc_slots: BTreeMap<(u32, u32), Vec<u32>> = BTreeMap::new();
    for (id, slot) in store.slots().iter().enumerate() {
        match slot.provenance {
            Provenance::Triple { triple, reversed } => {
                triple_slots.insert((triple, reversed), id as u32);
            }
            Provenance::Doc { doc, sentence, .. } => {
                doc_slots.entry((doc, sentence)).or_default().push(id as u32);
            }
        }
    }

    let sentence_offsets: Vec<u32> = {
        let mut offsets = Vec::with_capacity(documents.len());
        let mut acc = 0u32;
        for doc in &documents {
            offsets.push(acc);
            acc += doc.sentences.len() as u32;
        }
        offsets
    };

    let ctx = BindContext {
        corpus,
        spec,
        hyper,
        vocab: &vocab,
        entities: &entities,
        store: &store,
        candidates: &candidates,
        triple_slots: &triple_slots,
        doc_slots: &doc_slots,
        sentence_offsets: &sentence_offsets,
        mark,
    };
    let train = bind_items(&corpus.qa.train, &ctx)?;
    let dev = bind_items(&corpus.qa.dev, &ctx)?;
    let test = bind_items(&corpus.qa.test, &ctx)?;

    let sha = vocab_sha(&vocab);
    let dev_metric = if sentence_mode { DevMetric::Mrr } else { DevMetric::Hits1 };
    Ok(Assembled {
        vocab,
        entities,
        store,
        candidates,
        train,
        dev,
        test,
        vocab_sha: sha,
        skipped_slots,
        dev_metric,
        freq_threshold,
    })
}

struct BindContext<'a> {
    corpus: &'a SynthCorpus,
    spec: &'a ExperimentSpec,
    hyper: &'a HyperParams,
    vocab: &'a Vocabulary,
    entities: &'a EntityDictionary,
    store: &'a MemoryStore,
    candidates: &'a CandidateSet,
    triple_slots: &'a BTreeMap<(u32, bool), u32>,
    doc_slots: &'a BTreeMap<(u32, u32), Vec<u32>>,
    sentence_offsets: &'a [u32],
    mark: bool,
}

fn bind_items(items: &[QAItem], ctx: &BindContext<'_>) -> Result<BoundSplit> {
    let mut split = BoundSplit::default();
    for item in items {
        let tokens = tokenize_marked(&item.question, ctx.entities, ctx.mark);
        let question_tokens: Vec<u32> = tokens.iter().filter_map(|t| ctx.vocab.id(t)).collect();
        let question = bow(&tokens, ctx.vocab, FeatureBank::Question);

        // Gold candidate indices and the external ids the gold denotes.
        let (gold, gold_external): (Vec<usize>, Vec<u32>) =
            if ctx.candidates.mode() == CandidateMode::Sentence {
                let mut ids: Vec<u32> = item
                    .support
                    .iter()
                    .map(|&t| {
                        let (doc, sentence) = ctx.corpus.docs.realizations[t as usize];
                        ctx.sentence_offsets[doc as usize] + sentence
                    })
                    .collect();
                ids.sort_unstable();
                ids.dedup();
                let idx: Vec<usize> =
                    ids.iter().filter_map(|&id| ctx.candidates.index_of(id)).collect();
                (idx, ids)
            } else {
                let mut ids: Vec<u32> = item
                    .answers
                    .iter()
                    .filter_map(|a| ctx.vocab.id(&EntityDictionary::entity_token(a)))
                    .collect();
                ids.sort_unstable();
                ids.dedup();
                let idx: Vec<usize> =
                    ids.iter().filter_map(|&id| ctx.candidates.index_of(id)).collect();
                (idx, ids)
            };
        if gold.is_empty() {
            return Err(CliError::data(format!(
                "question '{}' has no representable gold answer",
                item.question
            )));
        }

        let hashed = if ctx.spec.baseline == Baseline::SupervisedEmbeddings {
            Vec::new()
        } else if ctx.hyper.hashing {
            ctx.store.hash_query(&question_tokens)
        } else {
            ctx.store.all_ids()
        };

        // Acceptable supporting slots.
        let mut gold_slots: Vec<u32> = Vec::new();
        if ctx.spec.representation == Representation::KbTriple {
            for &t in &item.support {
                let reversed = match item.class.edge() {
                    Some((_, reversed)) => reversed,
                    // Two-hop support mixes both directions: the first hop
                    // enters through the reversed edge, the second reads the
                    // forward one.
                    None => {
                        ctx.corpus.kb.triples[t as usize].relation == "directed_by"
                    }
                };
                if let Some(&slot) = ctx.triple_slots.get(&(t, reversed)) {
                    gold_slots.push(slot);
                }
            }
        } else {
            for &t in &item.support {
                let key = ctx.corpus.docs.realizations[t as usize];
                if let Some(slot_ids) = ctx.doc_slots.get(&key) {
                    for &sid in slot_ids {
                        let slot = ctx.store.slot(sid);
                        if slot.value_candidates.iter().any(|c| gold_external.contains(c)) {
                            gold_slots.push(sid);
                        }
                    }
                }
            }
        }
        gold_slots.sort_unstable();
        gold_slots.dedup();

        split.examples.push(TrainExample { question, question_tokens, hashed, gold });
        split.qtypes.push(item.class.label().to_string());
        split.questions.push(item.question.clone());
        split.gold_slots.push(gold_slots);
    }
    Ok(split)
}

/// Rank every example of a split in parallel; order is preserved.
pub fn rank_split(
    params: &ModelParams,
    mode: TrainMode,
    store: &MemoryStore,
    candidates: &CandidateSet,
    split: &BoundSplit,
) -> Vec<Vec<(usize, f64)>> {
    use rayon::prelude::*;
    split
        .examples
        .par_iter()
        .map(|ex| match mode {
            TrainMode::KeyValue => {
                kvmem_core::model::predict_with_slots(params, &ex.question, &ex.hashed, store, candidates)
            }
            TrainMode::SupervisedEmbeddings => {
                let dist = kvmem_core::model::supervised_embeddings_forward(params, &ex.question, candidates);
                kvmem_core::model::rank_candidates(&dist)
            }
        })
        .collect()
}

/// Candidate-index rankings and gold sets in the form the metrics take.
pub fn rankings_and_golds(
    ranked: &[Vec<(usize, f64)>],
    split: &BoundSplit,
) -> (Vec<Vec<u32>>, Vec<Vec<u32>>) {
    let rankings: Vec<Vec<u32>> =
        ranked.iter().map(|r| r.iter().map(|&(i, _)| i as u32).collect()).collect();
    let golds: Vec<Vec<u32>> =
        split.examples.iter().map(|ex| ex.gold.iter().map(|&g| g as u32).collect()).collect();
    (rankings, golds)
}

// --- experiment config files -------------------------------------------------

#[derive(Debug, Deserialize)]
struct ExperimentFileSection {
    source: String,
    representation: String,
    #[serde(default)]
    baseline: Option<String>,
    #[serde(default)]
    corpus: Option<PathBuf>,
    #[serde(default)]
    out: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(default)]
struct HyperFile {
    dim_embed: usize,
    hops: usize,
    window: usize,
    freq_threshold: usize,
    cap: usize,
    hashing: bool,
    learn_rate: f64,
    epochs: usize,
    dropout_question: f64,
    dropout_memory: f64,
    dropout_answer: f64,
    tied_output: bool,
    grad_clip: f64,
    seed: u64,
    early_stop_dev: Option<f64>,
}

impl Default for HyperFile {
    fn default() -> Self {
        let h = HyperParams::default();
        HyperFile {
            dim_embed: h.dim_embed,
            hops: h.hops,
            window: h.window,
            freq_threshold: h.freq_threshold,
            cap: h.cap,
            hashing: h.hashing,
            learn_rate: h.learn_rate,
            epochs: h.epochs,
            dropout_question: h.dropout_question,
            dropout_memory: h.dropout_memory,
            dropout_answer: h.dropout_answer,
            tied_output: h.tied_output,
            grad_clip: h.grad_clip,
            seed: h.seed,
            early_stop_dev: h.early_stop_dev,
        }
    }
}

#[derive(Debug, Deserialize)]
struct ExperimentFile {
    experiment: ExperimentFileSection,
    #[serde(default)]
    hyper: HyperFile,
}

/// A parsed experiment config file; paths may still need CLI overrides.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub spec: ExperimentSpec,
    pub hyper: HyperParams,
    pub corpus: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

pub fn parse_experiment_config(text: &str) -> Result<ExperimentConfig> {
    let file: ExperimentFile =
        toml::from_str(text).map_err(|e| CliError::usage(format!("experiment config: {e}")))?;
    let spec = ExperimentSpec::from_names(
        &file.experiment.source,
        &file.experiment.representation,
        file.experiment.baseline.as_deref().unwrap_or("none"),
    )
    .map_err(CliError::Usage)?;
    spec.validate()?;
    let h = file.hyper;
    let hyper = HyperParams {
        dim_embed: h.dim_embed,
        hops: h.hops,
        window: h.window,
        freq_threshold: h.freq_threshold,
        cap: h.cap,
        hashing: h.hashing,
        learn_rate: h.learn_rate,
        epochs: h.epochs,
        dropout_question: h.dropout_question,
        dropout_memory: h.dropout_memory,
        dropout_answer: h.dropout_answer,
        tied_output: h.tied_output,
        grad_clip: h.grad_clip,
        seed: h.seed,
        early_stop_dev: h.early_stop_dev,
    };
    hyper.validate().map_err(CliError::Usage)?;
    Ok(ExperimentConfig { spec, hyper, corpus: file.experiment.corpus, out: file.experiment.out })
}
