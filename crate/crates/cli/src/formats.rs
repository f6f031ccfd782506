//! Corpus directory layout:
//!
//! * `kb.tsv` — one triple per line, `subject<TAB>relation<TAB>object`;
//!   multi-valued relations use one line per object.
//! * `docs.jsonl` — one document per line, `{"title": str, "sentences": [str]}`.
//! * `qa_train.tsv` / `qa_dev.tsv` / `qa_test.tsv` —
//!   `question<TAB>answer1|answer2|...<TAB>qtype`.
//! * `manifest.json` — generation config (with seed), counts, recommended
//!   stop-word threshold, corruption statistics, entity pools, per-triple
//!   document realizations, and per-question supporting-triple ids.
//!
//! Reading a directory reconstructs the full in-memory corpus; emitting it
//! again produces byte-identical files.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use kvmem_core::datagen::{
    DocSet, DocStats, GenConfig, QAItem, QaSplits, QuestionClass, RawDocument, SynthCorpus, SynthKb,
};
use kvmem_core::featurize::KBTriple;

use crate::error::{CliError, Result};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestCounts {
    pub entities: usize,
    pub triples: usize,
    pub documents: usize,
    pub sentences: usize,
    pub questions_train: usize,
    pub questions_dev: usize,
    pub questions_test: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestPools {
    pub movies: Vec<String>,
    pub actors: Vec<String>,
    pub directors: Vec<String>,
    pub writers: Vec<String>,
    pub tags: Vec<String>,
    pub genres: Vec<String>,
    pub languages: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestSupport {
    pub train: Vec<Vec<u32>>,
    pub dev: Vec<Vec<u32>>,
    pub test: Vec<Vec<u32>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub config: GenConfig,
    pub recommended_f: usize,
    pub counts: ManifestCounts,
    pub doc_stats: DocStats,
    pub pools: ManifestPools,
    /// Per triple id: (document index, sentence index) realizing the fact.
    pub realizations: Vec<(u32, u32)>,
    /// Per QA example (aligned with the qa files): supporting triple ids.
    pub support: ManifestSupport,
}

#[derive(Debug, Serialize, Deserialize)]
struct DocJson {
    title: String,
    sentences: Vec<String>,
}

fn qa_line(item: &QAItem) -> String {
    format!("{}\t{}\t{}\n", item.question, item.answers.join("|"), item.class.label())
}

fn write_qa(path: &Path, items: &[QAItem]) -> Result<()> {
    let mut out = String::new();
    for item in items {
        out.push_str(&qa_line(item));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Emit a generated corpus; the same corpus always produces identical bytes.
pub fn write_corpus(corpus: &SynthCorpus, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut kb = String::new();
    for t in &corpus.kb.triples {
        kb.push_str(&format!("{}\t{}\t{}\n", t.subject, t.relation, t.object));
    }
    fs::write(dir.join("kb.tsv"), kb)?;

    let mut docs = String::new();
    for d in &corpus.docs.docs {
        let row = DocJson { title: d.title.clone(), sentences: d.sentences.clone() };
        docs.push_str(&serde_json::to_string(&row)?);
        docs.push('\n');
    }
    fs::write(dir.join("docs.jsonl"), docs)?;

    write_qa(&dir.join("qa_train.tsv"), &corpus.qa.train)?;
    write_qa(&dir.join("qa_dev.tsv"), &corpus.qa.dev)?;
    write_qa(&dir.join("qa_test.tsv"), &corpus.qa.test)?;

    let manifest = Manifest {
        format_version: MANIFEST_VERSION,
        config: corpus.config.clone(),
        recommended_f: corpus.recommended_f(),
        counts: ManifestCounts {
            entities: corpus.kb.entities().len(),
            triples: corpus.kb.triples.len(),
            documents: corpus.docs.docs.len(),
            sentences: corpus.docs.stats.sentences,
            questions_train: corpus.qa.train.len(),
            questions_dev: corpus.qa.dev.len(),
            questions_test: corpus.qa.test.len(),
        },
        doc_stats: corpus.docs.stats,
        pools: ManifestPools {
            movies: corpus.kb.movies.clone(),
            actors: corpus.kb.actors.clone(),
            directors: corpus.kb.directors.clone(),
            writers: corpus.kb.writers.clone(),
            tags: corpus.kb.tags.clone(),
            genres: corpus.kb.genres.clone(),
            languages: corpus.kb.languages.clone(),
        },
        realizations: corpus.docs.realizations.clone(),
        support: ManifestSupport {
            train: corpus.qa.train.iter().map(|q| q.support.clone()).collect(),
            dev: corpus.qa.dev.iter().map(|q| q.support.clone()).collect(),
            test: corpus.qa.test.iter().map(|q| q.support.clone()).collect(),
        },
    };
    let mut manifest_json = serde_json::to_string_pretty(&manifest)?;
    manifest_json.push('\n');
    fs::write(dir.join("manifest.json"), manifest_json)?;
    Ok(())
}

fn read_qa(path: &Path, support: &[Vec<u32>]) -> Result<Vec<QAItem>> {
    let text = fs::read_to_string(path)?;
    let mut items = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let mut parts = line.split('\t');
        let (question, answers, qtype) = match (parts.next(), parts.next(), parts.next()) {
            (Some(q), Some(a), Some(t)) => (q, a, t),
            _ => {
                return Err(CliError::data(format!(
                    "{}:{}: expected question<TAB>answers<TAB>qtype",
                    path.display(),
                    lineno + 1
                )))
            }
        };
        let class = QuestionClass::from_label(qtype).ok_or_else(|| {
            CliError::data(format!("{}:{}: unknown question type '{qtype}'", path.display(), lineno + 1))
        })?;
        let support = support.get(lineno).cloned().ok_or_else(|| {
            CliError::data(format!("manifest support missing for {}:{}", path.display(), lineno + 1))
        })?;
        items.push(QAItem {
            question: question.to_string(),
            answers: answers.split('|').map(|s| s.to_string()).collect(),
            class,
            support,
        });
    }
    if items.len() != support.len() {
        return Err(CliError::data(format!(
            "{}: {} rows but manifest lists {} support entries",
            path.display(),
            items.len(),
            support.len()
        )));
    }
    Ok(items)
}

/// Load a corpus directory back into the full in-memory corpus.
pub fn read_corpus(dir: &Path) -> Result<SynthCorpus> {
    let manifest_text = fs::read_to_string(dir.join("manifest.json"))?;
    let manifest: Manifest = serde_json::from_str(&manifest_text)?;
    if manifest.format_version != MANIFEST_VERSION {
        return Err(CliError::data(format!(
            "unsupported corpus manifest version {} (expected {})",
            manifest.format_version, MANIFEST_VERSION
        )));
    }

    let kb_text = fs::read_to_string(dir.join("kb.tsv"))?;
    let mut triples = Vec::new();
    for (lineno, line) in kb_text.lines().enumerate() {
        let mut parts = line.split('\t');
        match (parts.next(), parts.next(), parts.next()) {
            (Some(s), Some(r), Some(o)) => triples.push(KBTriple::new(s, r, o)),
            _ => {
                return Err(CliError::data(format!(
                    "kb.tsv:{}: expected subject<TAB>relation<TAB>object",
                    lineno + 1
                )))
            }
        }
    }
    // Per-movie triple ranges: triples are contiguous per movie in pool order.
    let mut movie_triples = Vec::with_capacity(manifest.pools.movies.len());
    let mut pos = 0usize;
    for movie in &manifest.pools.movies {
        let start = pos;
        while pos < triples.len() && &triples[pos].subject == movie {
            pos += 1;
        }
        if pos == start {
            return Err(CliError::data(format!("kb.tsv holds no triples for movie '{movie}'")));
        }
        movie_triples.push((start, pos));
    }
    if pos != triples.len() {
        return Err(CliError::data("kb.tsv triples are not grouped by manifest movie order"));
    }
    let years: std::collections::BTreeSet<String> = triples
        .iter()
        .filter(|t| t.relation == "release_year")
        .map(|t| t.object.clone())
        .collect();

    let docs_text = fs::read_to_string(dir.join("docs.jsonl"))?;
    let mut docs = Vec::new();
    for line in docs_text.lines() {
        let row: DocJson = serde_json::from_str(line)?;
        docs.push(RawDocument { title: row.title, sentences: row.sentences });
    }

    let qa = QaSplits {
        train: read_qa(&dir.join("qa_train.tsv"), &manifest.support.train)?,
        dev: read_qa(&dir.join("qa_dev.tsv"), &manifest.support.dev)?,
        test: read_qa(&dir.join("qa_test.tsv"), &manifest.support.test)?,
    };

    let kb = SynthKb {
        triples,
        movie_triples,
        movies: manifest.pools.movies.clone(),
        actors: manifest.pools.actors.clone(),
        directors: manifest.pools.directors.clone(),
        writers: manifest.pools.writers.clone(),
        tags: manifest.pools.tags.clone(),
        genres: manifest.pools.genres.clone(),
        languages: manifest.pools.languages.clone(),
        years: years.into_iter().collect(),
    };
    if kb.triples.len() != manifest.counts.triples {
        return Err(CliError::data("kb.tsv triple count disagrees with manifest"));
    }
    let corpus = SynthCorpus {
        config: manifest.config.clone(),
        kb,
        docs: DocSet {
            docs,
            realizations: manifest.realizations.clone(),
            stats: manifest.doc_stats,
        },
        qa,
    };
    if corpus.docs.realizations.len() != corpus.kb.triples.len() {
        return Err(CliError::data("manifest realizations do not cover every triple"));
    }
    Ok(corpus)
}

/// Raw manifest bytes, for report fingerprints.
pub fn manifest_bytes(dir: &Path) -> Result<Vec<u8>> {
    Ok(fs::read(dir.join("manifest.json"))?)
}
