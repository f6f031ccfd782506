//! Versioned binary checkpoint: experiment spec, hyperparameters, the full
//! vocabulary and entity table, dev-best and final parameters, the training
//! log, the memory store with its inverted index, and the candidate set.
//!
//! A checkpoint is self-contained: question inspection needs nothing else.
//! All integers are little-endian; floats are written as their IEEE bits,
//! so a fixed seed reproduces byte-identical checkpoints.
//!
//! Layout (version 1): magic `KVMN`, version u32, then sections in fixed
//! order: spec, hyper, vocabulary, entities, vocabulary hash, best params,
//! final params, training meta, memory store, candidates, dev metric kind.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use kvmem_core::featurize::{MemorySlot, Provenance, Vocabulary};
use kvmem_core::memory_store::MemoryStore;
use kvmem_core::model::{
    CandidateMode, CandidateSet, DevMetric, EpochLog, HyperParams, ModelParams,
};
use kvmem_core::numerics::{DenseMat, SparseVec};

use crate::error::{CliError, Result};
use crate::experiment::ExperimentSpec;

pub const MAGIC: [u8; 4] = *b"KVMN";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub spec: ExperimentSpec,
    pub hyper: HyperParams,
    pub vocab: Vocabulary,
    /// Entity surface strings for the tokenizer.
    pub entities: Vec<String>,
    pub vocab_sha: [u8; 32],
    pub best: ModelParams,
    pub final_params: ModelParams,
    pub epochs_done: u32,
    pub best_epoch: u32,
    pub best_metric: f64,
    pub log: Vec<EpochLog>,
    pub store: MemoryStore,
    pub candidates: CandidateSet,
    pub dev_metric: DevMetric,
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new() -> Self {
        Writer { buf: Vec::new() }
    }

    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_bits().to_le_bytes());
    }

    fn str(&mut self, s: &str) {
        self.u64(s.len() as u64);
        self.buf.extend_from_slice(s.as_bytes());
    }

    fn sparse(&mut self, v: &SparseVec) {
        self.u64(v.dim() as u64);
        self.u64(v.nnz() as u64);
        for &(i, w) in v.entries() {
            self.u32(i);
            self.f64(w);
        }
    }

    fn mat(&mut self, m: &DenseMat) {
        self.u64(m.rows() as u64);
        self.u64(m.cols() as u64);
        for &v in m.data() {
            self.f64(v);
        }
    }

    fn params(&mut self, p: &ModelParams) {
        self.u8(p.tied() as u8);
        self.mat(p.a());
        if let Some(b) = p.b_untied() {
            self.mat(b);
        }
        self.u64(p.hops() as u64);
        for r in p.r() {
            self.mat(r);
        }
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(CliError::data("checkpoint truncated"));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn usize(&mut self) -> Result<usize> {
        Ok(self.u64()? as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }

    fn str(&mut self) -> Result<String> {
        let n = self.usize()?;
        let bytes = self.take(n)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| CliError::data("checkpoint holds invalid utf-8"))
    }

    fn sparse(&mut self) -> Result<SparseVec> {
        let dim = self.usize()?;
        let nnz = self.usize()?;
        let mut entries = Vec::with_capacity(nnz);
        for _ in 0..nnz {
            let i = self.u32()?;
            let w = self.f64()?;
            entries.push((i, w));
        }
        Ok(SparseVec::new(dim, entries))
    }

    fn mat(&mut self) -> Result<DenseMat> {
        let rows = self.usize()?;
        let cols = self.usize()?;
        let mut m = DenseMat::zeros(rows, cols);
        for i in 0..rows * cols {
            m.data_mut()[i] = self.f64()?;
        }
        Ok(m)
    }

    fn params(&mut self) -> Result<ModelParams> {
        let tied = self.u8()? != 0;
        let a = self.mat()?;
        let b = if tied { None } else { Some(self.mat()?) };
        let hops = self.usize()?;
        let mut r = Vec::with_capacity(hops);
        for _ in 0..hops {
            r.push(self.mat()?);
        }
        Ok(ModelParams::from_parts(a, b, r))
    }
}

pub fn encode(ckpt: &Checkpoint) -> Vec<u8> {
    let mut w = Writer::new();
    w.buf.extend_from_slice(&MAGIC);
    w.u32(VERSION);

    w.str(ckpt.spec.source.name());
    w.str(ckpt.spec.representation.name());
    w.str(ckpt.spec.baseline.name());

    let h = &ckpt.hyper;
    w.u64(h.dim_embed as u64);
    w.u64(h.hops as u64);
    w.u64(h.window as u64);
    w.u64(h.freq_threshold as u64);
    w.u64(h.cap as u64);
    w.u8(h.hashing as u8);
    w.f64(h.learn_rate);
    w.u64(h.epochs as u64);
    w.f64(h.dropout_question);
    w.f64(h.dropout_memory);
    w.f64(h.dropout_answer);
    w.u8(h.tied_output as u8);
    w.f64(h.grad_clip);
    w.u64(h.seed);
    match h.early_stop_dev {
        Some(v) => {
            w.u8(1);
            w.f64(v);
        }
        None => w.u8(0),
    }

    w.u8(ckpt.vocab.center_encoded() as u8);
    w.u64(ckpt.vocab.base_size() as u64);
    for t in ckpt.vocab.tokens() {
        w.str(t);
    }
    for id in 0..ckpt.vocab.base_size() as u32 {
        w.u64(ckpt.vocab.count(id));
    }

    w.u64(ckpt.entities.len() as u64);
    for e in &ckpt.entities {
        w.str(e);
    }
    w.buf.extend_from_slice(&ckpt.vocab_sha);

    w.params(&ckpt.best);
    w.params(&ckpt.final_params);

    w.u32(ckpt.epochs_done);
    w.u32(ckpt.best_epoch);
    w.f64(ckpt.best_metric);
    w.u64(ckpt.log.len() as u64);
    for e in &ckpt.log {
        w.u64(e.epoch as u64);
        w.f64(e.train_loss);
        w.f64(e.dev_metric);
    }

    let store = &ckpt.store;
    w.u64(store.base_dim() as u64);
    w.u64(store.freq_threshold() as u64);
    w.u64(store.cap() as u64);
    w.u64(store.len() as u64);
    for slot in store.slots() {
        w.sparse(&slot.key);
        w.sparse(&slot.value);
        w.u64(slot.value_candidates.len() as u64);
        for &c in &slot.value_candidates {
            w.u32(c);
        }
        match slot.provenance {
            Provenance::Triple { triple, reversed } => {
                w.u8(0);
                w.u32(triple);
                w.u8(reversed as u8);
            }
            Provenance::Doc { doc, sentence, start, end } => {
                w.u8(1);
                w.u32(doc);
                w.u32(sentence);
                w.u32(start);
                w.u32(end);
            }
        }
    }
    for word in 0..store.base_dim() as u32 {
        let p = store.postings(word);
        w.u64(p.len() as u64);
        for &id in p {
            w.u32(id);
        }
        w.u32(store.word_frequency(word));
    }

    match ckpt.candidates.mode() {
        CandidateMode::Entity => {
            w.u8(0);
            w.u64(ckpt.candidates.len() as u64);
            for &id in ckpt.candidates.ids() {
                w.u32(id);
            }
            w.u64(ckpt.candidates.feature(0).dim() as u64);
        }
        CandidateMode::Sentence => {
            w.u8(1);
            w.u64(ckpt.candidates.len() as u64);
            for i in 0..ckpt.candidates.len() {
                w.u32(ckpt.candidates.external_id(i));
                w.sparse(ckpt.candidates.feature(i));
            }
        }
    }

    w.u8(match ckpt.dev_metric {
        DevMetric::Hits1 => 0,
        DevMetric::Mrr => 1,
    });
    w.buf
}

pub fn decode(data: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { data, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(CliError::data("not a checkpoint file (bad magic)"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(CliError::data(format!(
            "checkpoint version {version} not supported (expected {VERSION})"
        )));
    }

    let source = r.str()?;
    let representation = r.str()?;
    let baseline = r.str()?;
    let spec = ExperimentSpec::from_names(&source, &representation, &baseline)
        .map_err(CliError::Data)?;

    let hyper = HyperParams {
        dim_embed: r.usize()?,
        hops: r.usize()?,
        window: r.usize()?,
        freq_threshold: r.usize()?,
        cap: r.usize()?,
        hashing: r.u8()? != 0,
        learn_rate: r.f64()?,
        epochs: r.usize()?,
        dropout_question: r.f64()?,
        dropout_memory: r.f64()?,
        dropout_answer: r.f64()?,
        tied_output: r.u8()? != 0,
        grad_clip: r.f64()?,
        seed: r.u64()?,
        early_stop_dev: if r.u8()? != 0 { Some(r.f64()?) } else { None },
    };

    let center = r.u8()? != 0;
    let base = r.usize()?;
    let mut tokens = Vec::with_capacity(base);
    for _ in 0..base {
        tokens.push(r.str()?);
    }
    let mut counts = Vec::with_capacity(base);
    for _ in 0..base {
        counts.push(r.u64()?);
    }
    let vocab = Vocabulary::from_parts(tokens, counts, center);

    let n_entities = r.usize()?;
    let mut entities = Vec::with_capacity(n_entities);
    for _ in 0..n_entities {
        entities.push(r.str()?);
    }
    let vocab_sha: [u8; 32] = r.take(32)?.try_into().unwrap();

    let best = r.params()?;
    let final_params = r.params()?;

    let epochs_done = r.u32()?;
    let best_epoch = r.u32()?;
    let best_metric = r.f64()?;
    let n_log = r.usize()?;
    let mut log = Vec::with_capacity(n_log);
    for _ in 0..n_log {
        log.push(EpochLog { epoch: r.usize()?, train_loss: r.f64()?, dev_metric: r.f64()? });
    }

    let base_dim = r.usize()?;
    let freq_threshold = r.usize()?;
    let cap = r.usize()?;
    let n_slots = r.usize()?;
    let mut slots = Vec::with_capacity(n_slots);
    for _ in 0..n_slots {
        let key = r.sparse()?;
        let value = r.sparse()?;
        let n_cands = r.usize()?;
        let mut value_candidates = Vec::with_capacity(n_cands);
        for _ in 0..n_cands {
            value_candidates.push(r.u32()?);
        }
        let provenance = match r.u8()? {
            0 => Provenance::Triple { triple: r.u32()?, reversed: r.u8()? != 0 },
            1 => Provenance::Doc {
                doc: r.u32()?,
                sentence: r.u32()?,
                start: r.u32()?,
                end: r.u32()?,
            },
            other => return Err(CliError::data(format!("unknown provenance tag {other}"))),
        };
        slots.push(MemorySlot { key, value, value_candidates, provenance });
    }
    let mut postings = Vec::with_capacity(base_dim);
    let mut doc_freq = Vec::with_capacity(base_dim);
    for _ in 0..base_dim {
        let n = r.usize()?;
        let mut p = Vec::with_capacity(n);
        for _ in 0..n {
            p.push(r.u32()?);
        }
        postings.push(p);
        doc_freq.push(r.u32()?);
    }
    let store = MemoryStore::from_parts(slots, base_dim, freq_threshold, cap, postings, doc_freq);

    let candidates = match r.u8()? {
        0 => {
            let n = r.usize()?;
            let mut ids = Vec::with_capacity(n);
            for _ in 0..n {
                ids.push(r.u32()?);
            }
            let dim = r.usize()?;
            CandidateSet::entities(ids, dim)
        }
        1 => {
            let n = r.usize()?;
            let mut ids = Vec::with_capacity(n);
            let mut feats = Vec::with_capacity(n);
            for _ in 0..n {
                ids.push(r.u32()?);
                feats.push(r.sparse()?);
            }
            CandidateSet::sentences(ids, feats)
        }
        other => return Err(CliError::data(format!("unknown candidate mode tag {other}"))),
    };

    let dev_metric = match r.u8()? {
        0 => DevMetric::Hits1,
        1 => DevMetric::Mrr,
        other => return Err(CliError::data(format!("unknown dev metric tag {other}"))),
    };
    if r.pos != data.len() {
        return Err(CliError::data("checkpoint has trailing bytes"));
    }
    Ok(Checkpoint {
        spec,
        hyper,
        vocab,
        entities,
        vocab_sha,
        best,
        final_params,
        epochs_done,
        best_epoch,
        best_metric,
        log,
        store,
        candidates,
        dev_metric,
    })
}

pub fn save(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    fs::write(path, encode(ckpt))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let data = fs::read(path)
        .map_err(|e| CliError::data(format!("cannot read checkpoint {}: {e}", path.display())))?;
    decode(&data)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of the vocabulary identity: bank layout plus every token in id order.
pub fn vocab_sha(vocab: &Vocabulary) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update([vocab.center_encoded() as u8]);
    hasher.update((vocab.base_size() as u64).to_le_bytes());
    for t in vocab.tokens() {
        hasher.update((t.len() as u64).to_le_bytes());
        hasher.update(t.as_bytes());
    }
    hasher.finalize().into()
}
