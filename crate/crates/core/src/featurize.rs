//! Dictionaries and feature maps: turn questions, KB triples, and documents
//! into sparse bag-of-words memory slots.
//!
//! A memory slot is a (key, value) pair. Keys are matched against the
//! question during addressing, values are what reading returns. The slot
//! builders here implement the representation menu:
//!
//! * `kb_slots` — key = subject + relation, value = object, with the
//!   reversed `!relation` twin so both question directions resolve.
//! * `sentence_slots` — key and value are the same whole-sentence bag.
//! * `window_slots` — entity-centered word windows as keys, the center
//!   entity as value; optional center encoding (second dictionary bank for
//!   the center/value) and optional title slots (window + `_title_` +
//!   title in the key, title as value, doubling the slot count).
//! * `window_sentence_slots` — window key, whole-sentence value, for
//!   answer-sentence selection.
//!
//! Reserved tokens `_window_`, `_title_`, and `_number_` are installed at
//! vocabulary build time. Entity tokens are the entity surface lowercased
//! with spaces replaced by `_`.

use alloc::borrow::ToOwned;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::numerics::SparseVec;

pub const WINDOW_MARKER: &str = "_window_";
pub const TITLE_MARKER: &str = "_title_";
pub const NUMBER_MARKER: &str = "_number_";

/// A (subject, relation, object) fact in surface form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KBTriple {
    pub subject: String,
    pub relation: String,
    pub object: String,
}

impl KBTriple {
    pub fn new(subject: impl Into<String>, relation: impl Into<String>, object: impl Into<String>) -> Self {
        KBTriple { subject: subject.into(), relation: relation.into(), object: object.into() }
    }

    /// Dictionary entry for the reversed edge, distinct from the forward one.
    pub fn reversed_relation(relation: &str) -> String {
        let mut s = String::with_capacity(relation.len() + 1);
        s.push('!');
        s.push_str(relation);
        s
    }
}

/// A tokenized document: entity-token title plus tokenized sentences.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Document {
    pub title: String,
    pub sentences: Vec<Vec<String>>,
}

/// Where a slot came from, for diagnostics and gold-slot bookkeeping.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Triple { triple: u32, reversed: bool },
    Doc { doc: u32, sentence: u32, start: u32, end: u32 },
}

/// One addressable (key, value) pair.
///
/// `value_candidates` names what the value denotes: entity token ids in the
/// entity-answer modes, global sentence ids in sentence-selection mode.
/// Sorted ascending; may be empty only for sentence-level slots whose
/// sentence contains no entity.
#[derive(Clone, Debug, PartialEq)]
pub struct MemorySlot {
    pub key: SparseVec,
    pub value: SparseVec,
    pub value_candidates: Vec<u32>,
    pub provenance: Provenance,
}

/// Multi-word entity table with a greedy longest-match collapse.
#[derive(Clone, Debug, Default)]
pub struct EntityDictionary {
    // first word -> word sequences starting with it, longest first
    by_first: BTreeMap<String, Vec<Vec<String>>>,
    tokens: BTreeSet<String>,
}

impl EntityDictionary {
    pub fn new<I, S>(surfaces: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut dict = EntityDictionary::default();
        for s in surfaces {
            dict.insert(s.as_ref());
        }
        dict
    }

    pub fn insert(&mut self, surface: &str) {
        let words = normalize_words(surface);
        assert!(!words.is_empty(), "entity surface must not be empty");
        let token = words.join("_");
        self.tokens.insert(token);
        let seqs = self.by_first.entry(words[0].clone()).or_default();
        if !seqs.contains(&words) {
            seqs.push(words);
            seqs.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        }
    }

    /// Canonical token for an entity surface string.
    pub fn entity_token(surface: &str) -> String {
        normalize_words(surface).join("_")
    }

    pub fn is_entity_token(&self, token: &str) -> bool {
        self.tokens.contains(token)
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    fn longest_match(&self, words: &[String], pos: usize) -> Option<usize> {
        let seqs = self.by_first.get(&words[pos])?;
        for seq in seqs {
            if pos + seq.len() <= words.len() && words[pos..pos + seq.len()] == seq[..] {
                return Some(seq.len());
            }
        }
        None
    }
}

fn normalize_words(text: &str) -> Vec<String> {
    let mut cleaned = String::with_capacity(text.len());
    for ch in text.chars() {
        if ch.is_alphanumeric() || ch == '_' {
            for lc in ch.to_lowercase() {
                cleaned.push(lc);
            }
        } else {
            cleaned.push(' ');
        }
    }
    cleaned.split_whitespace().map(|w| w.to_owned()).collect()
}

/// Lowercase, strip punctuation, and collapse maximal entity phrases into
/// single tokens (greedy longest match, left to right).
pub fn tokenize(text: &str, entities: &EntityDictionary) -> Vec<String> {
    let words = normalize_words(text);
    let mut out = Vec::with_capacity(words.len());
    let mut pos = 0;
    while pos < words.len() {
        if let Some(len) = entities.longest_match(&words, pos) {
            out.push(words[pos..pos + len].join("_"));
            pos += len;
        } else {
            out.push(words[pos].clone());
            pos += 1;
        }
    }
    out
}

/// Replace digit tokens and the bigram "how many" with `_number_`.
pub fn mark_numbers(tokens: &[String]) -> Vec<String> {
    let mut out = Vec::with_capacity(tokens.len());
    let mut i = 0;
    while i < tokens.len() {
        if tokens[i] == "how" && i + 1 < tokens.len() && tokens[i + 1] == "many" {
            out.push(NUMBER_MARKER.to_owned());
            i += 2;
        } else if !tokens[i].is_empty() && tokens[i].chars().all(|c| c.is_ascii_digit()) {
            out.push(NUMBER_MARKER.to_owned());
            i += 1;
        } else {
            out.push(tokens[i].clone());
            i += 1;
        }
    }
    out
}

/// Token dictionary. Under center encoding the effective feature dimension
/// doubles and `id + D` addresses the center/value copy of token `id`.
#[derive(Clone, Debug)]
pub struct Vocabulary {
    token_to_id: BTreeMap<String, u32>,
    id_to_token: Vec<String>,
    counts: Vec<u64>,
    center_encoded: bool,
}

#[derive(Debug, Default)]
pub struct VocabularyBuilder {
    token_to_id: BTreeMap<String, u32>,
    id_to_token: Vec<String>,
    counts: Vec<u64>,
}

impl VocabularyBuilder {
    pub fn new() -> Self {
        let mut b = VocabularyBuilder::default();
        for reserved in [WINDOW_MARKER, TITLE_MARKER, NUMBER_MARKER] {
            b.intern(reserved);
        }
        b
    }

    fn intern(&mut self, token: &str) -> u32 {
        if let Some(&id) = self.token_to_id.get(token) {
            return id;
        }
        let id = self.id_to_token.len() as u32;
        self.token_to_id.insert(token.to_owned(), id);
        self.id_to_token.push(token.to_owned());
        self.counts.push(0);
        id
    }

    /// Add one occurrence of `token`, interning it on first sight.
    pub fn add(&mut self, token: &str) {
        let id = self.intern(token);
        self.counts[id as usize] += 1;
    }

    pub fn add_all<'a>(&mut self, tokens: impl IntoIterator<Item = &'a str>) {
        for t in tokens {
            self.add(t);
        }
    }

    pub fn build(self, center_encoded: bool) -> Vocabulary {
        Vocabulary {
            token_to_id: self.token_to_id,
            id_to_token: self.id_to_token,
            counts: self.counts,
            center_encoded,
        }
    }
}

impl Vocabulary {
    /// Rebuild a vocabulary from its serialized parts (tokens in id order).
    pub fn from_parts(tokens: Vec<String>, counts: Vec<u64>, center_encoded: bool) -> Vocabulary {
        assert_eq!(tokens.len(), counts.len(), "token/count length mismatch");
        let mut token_to_id = BTreeMap::new();
        for (i, t) in tokens.iter().enumerate() {
            let prev = token_to_id.insert(t.clone(), i as u32);
            assert!(prev.is_none(), "duplicate token '{t}' in vocabulary parts");
        }
        Vocabulary { token_to_id, id_to_token: tokens, counts, center_encoded }
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.token_to_id.get(token).copied()
    }

    /// Token spelling for a base-bank id.
    pub fn token(&self, id: u32) -> &str {
        &self.id_to_token[id as usize]
    }

    /// Token spelling for any id, folding the center bank back (`id mod D`).
    pub fn word_of(&self, id: u32) -> &str {
        &self.id_to_token[id as usize % self.base_size()]
    }

    /// Dictionary size D.
    pub fn base_size(&self) -> usize {
        self.id_to_token.len()
    }

    /// Feature dimension: D, or 2D under center encoding.
    pub fn dim(&self) -> usize {
        if self.center_encoded {
            2 * self.id_to_token.len()
        } else {
            self.id_to_token.len()
        }
    }

    pub fn center_encoded(&self) -> bool {
        self.center_encoded
    }

    /// Corpus occurrence count recorded at build time.
    pub fn count(&self, id: u32) -> u64 {
        self.counts[id as usize]
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.id_to_token.iter().map(|s| s.as_str())
    }

    pub fn contains(&self, token: &str) -> bool {
        self.token_to_id.contains_key(token)
    }
}

/// Which feature bank a bag-of-words vector is built for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureBank {
    Question,
    Key,
    /// Second dictionary copy; only valid on a center-encoded vocabulary.
    ValueCenter,
}

/// Bag weighting hook; raw counts unless told otherwise.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Weighting {
    #[default]
    Counts,
    Binary,
}

/// Bag-of-words features. Out-of-vocabulary tokens are dropped; the result
/// may be empty and callers must handle that.
pub fn bow(tokens: &[String], vocab: &Vocabulary, bank: FeatureBank) -> SparseVec {
    bow_weighted(tokens, vocab, bank, Weighting::Counts)
}

pub fn bow_weighted(tokens: &[String], vocab: &Vocabulary, bank: FeatureBank, weighting: Weighting) -> SparseVec {
    let offset = match bank {
        FeatureBank::Question | FeatureBank::Key => 0,
        FeatureBank::ValueCenter => {
            assert!(vocab.center_encoded(), "ValueCenter bank requires a center-encoded vocabulary");
            vocab.base_size() as u32
        }
    };
    let ids = tokens.iter().filter_map(|t| vocab.id(t)).map(|id| id + offset);
    match weighting {
        Weighting::Counts => SparseVec::from_counts(vocab.dim(), ids),
        Weighting::Binary => {
            let distinct: BTreeSet<u32> = ids.collect();
            SparseVec::new(vocab.dim(), distinct.into_iter().map(|i| (i, 1.0)).collect())
        }
    }
}

/// Two slots per triple: (subject + relation -> object) and the reversed
/// (object + !relation -> subject). Slots whose tokens are missing from the
/// vocabulary are skipped; the second return value counts them.
pub fn kb_slots(triples: &[KBTriple], vocab: &Vocabulary) -> (Vec<MemorySlot>, u32) {
    let dim = vocab.dim();
    let mut slots = Vec::with_capacity(triples.len() * 2);
    let mut skipped = 0u32;
    for (i, t) in triples.iter().enumerate() {
        let subj = vocab.id(&EntityDictionary::entity_token(&t.subject));
        let obj = vocab.id(&EntityDictionary::entity_token(&t.object));
        let rel = vocab.id(&t.relation);
        let rev = vocab.id(&KBTriple::reversed_relation(&t.relation));
        match (subj, rel, obj) {
            (Some(s), Some(r), Some(o)) => slots.push(MemorySlot {
                key: SparseVec::from_counts(dim, [s, r]),
                value: SparseVec::from_counts(dim, [o]),
                value_candidates: alloc::vec![o],
                provenance: Provenance::Triple { triple: i as u32, reversed: false },
            }),
            _ => skipped += 1,
        }
        match (obj, rev, subj) {
            (Some(o), Some(r), Some(s)) => slots.push(MemorySlot {
                key: SparseVec::from_counts(dim, [o, r]),
                value: SparseVec::from_counts(dim, [s]),
                value_candidates: alloc::vec![s],
                provenance: Provenance::Triple { triple: i as u32, reversed: true },
            }),
            _ => skipped += 1,
        }
    }
    (slots, skipped)
}

/// One slot per sentence with key and value the identical whole-sentence
/// bag — the configuration in which the model degenerates to a standard
/// memory network.
pub fn sentence_slots(doc: &Document, doc_id: u32, vocab: &Vocabulary, entities: &EntityDictionary) -> Vec<MemorySlot> {
    let mut slots = Vec::with_capacity(doc.sentences.len());
    for (s, sentence) in doc.sentences.iter().enumerate() {
        let bag = bow(sentence, vocab, FeatureBank::Key);
        if bag.is_empty() {
            continue;
        }
        let value_candidates = entity_ids_in(sentence, vocab, entities);
        slots.push(MemorySlot {
            key: bag.clone(),
            value: bag,
            value_candidates,
            provenance: Provenance::Doc { doc: doc_id, sentence: s as u32, start: 0, end: sentence.len() as u32 },
        });
    }
    slots
}

/// Options for the window-level representations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct WindowOptions {
    /// Encode the window center (and the value) in the second dictionary bank.
    pub center_encoding: bool,
    /// Additionally emit (window + `_title_` + title -> title) slots and tag
    /// plain window keys with `_window_`; doubles the slot count.
    pub title: bool,
}

/// Entity-centered sliding windows over each sentence. Windows never cross
/// sentence boundaries; edge windows are truncated rather than padded.
pub fn window_slots(
    doc: &Document,
    doc_id: u32,
    window: usize,
    vocab: &Vocabulary,
    entities: &EntityDictionary,
    options: WindowOptions,
) -> Vec<MemorySlot> {
    assert!(window % 2 == 1 && window >= 1, "window size must be odd, got {window}");
    if options.center_encoding {
        assert!(vocab.center_encoded(), "center encoding requires a center-encoded vocabulary");
    }
    let dim = vocab.dim();
    let base = vocab.base_size() as u32;
    let half = window / 2;
    let title_id = vocab.id(&doc.title);
    let window_marker = vocab.id(WINDOW_MARKER).expect("reserved _window_ token missing");
    let title_marker = vocab.id(TITLE_MARKER).expect("reserved _title_ token missing");

    let mut slots = Vec::new();
    for (s, sentence) in doc.sentences.iter().enumerate() {
        for center in 0..sentence.len() {
            if !entities.is_entity_token(&sentence[center]) {
                continue;
            }
            let Some(center_id) = vocab.id(&sentence[center]) else { continue };
            let start = center.saturating_sub(half);
            let end = (center + half + 1).min(sentence.len());
            let mut key_ids: Vec<u32> = Vec::with_capacity(end - start + 2);
            for (pos, token) in sentence[start..end].iter().enumerate() {
                let Some(id) = vocab.id(token) else { continue };
                if options.center_encoding && start + pos == center {
                    key_ids.push(id + base);
                } else {
                    key_ids.push(id);
                }
            }
            let value_id = if options.center_encoding { center_id + base } else { center_id };
            let provenance =
                Provenance::Doc { doc: doc_id, sentence: s as u32, start: start as u32, end: end as u32 };
            if options.title {
                let mut tagged = key_ids.clone();
                tagged.push(window_marker);
                slots.push(MemorySlot {
                    key: SparseVec::from_counts(dim, tagged),
                    value: SparseVec::from_counts(dim, [value_id]),
                    value_candidates: alloc::vec![center_id],
                    provenance,
                });
                if let Some(title) = title_id {
                    let mut key = key_ids.clone();
                    key.push(title_marker);
                    key.push(title);
                    let title_value = if options.center_encoding { title + base } else { title };
                    slots.push(MemorySlot {
                        key: SparseVec::from_counts(dim, key),
                        value: SparseVec::from_counts(dim, [title_value]),
                        value_candidates: alloc::vec![title],
                        provenance,
                    });
                }
            } else {
                slots.push(MemorySlot {
                    key: SparseVec::from_counts(dim, key_ids),
                    value: SparseVec::from_counts(dim, [value_id]),
                    value_candidates: alloc::vec![center_id],
                    provenance,
                });
            }
        }
    }
    slots
}

/// Window key, whole-sentence value: the answer-sentence-selection layout.
/// `sentence_base` is the global id of this document's first sentence.
pub fn window_sentence_slots(
    doc: &Document,
    doc_id: u32,
    window: usize,
    vocab: &Vocabulary,
    entities: &EntityDictionary,
    sentence_base: u32,
) -> Vec<MemorySlot> {
    assert!(window % 2 == 1 && window >= 1, "window size must be odd, got {window}");
    let dim = vocab.dim();
    let half = window / 2;
    let mut slots = Vec::new();
    for (s, sentence) in doc.sentences.iter().enumerate() {
        let sentence_bag = bow(sentence, vocab, FeatureBank::Key);
        if sentence_bag.is_empty() {
            continue;
        }
        for center in 0..sentence.len() {
            if !entities.is_entity_token(&sentence[center]) || vocab.id(&sentence[center]).is_none() {
                continue;
            }
            let start = center.saturating_sub(half);
            let end = (center + half + 1).min(sentence.len());
            let key_ids = sentence[start..end].iter().filter_map(|t| vocab.id(t));
            slots.push(MemorySlot {
                key: SparseVec::from_counts(dim, key_ids),
                value: sentence_bag.clone(),
                value_candidates: alloc::vec![sentence_base + s as u32],
                provenance: Provenance::Doc {
                    doc: doc_id,
                    sentence: s as u32,
                    start: start as u32,
                    end: end as u32,
                },
            });
        }
    }
    slots
}

fn entity_ids_in(sentence: &[String], vocab: &Vocabulary, entities: &EntityDictionary) -> Vec<u32> {
    let ids: BTreeSet<u32> = sentence
        .iter()
        .filter(|t| entities.is_entity_token(t))
        .filter_map(|t| vocab.id(t))
        .collect();
    ids.into_iter().collect()
}

/// The memory representation menu.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Representation {
    KbTriple,
    Sentence,
    Window,
    WindowCenter,
    WindowTitle,
    WindowCenterTitle,
    WindowSentence,
}

impl Representation {
    pub const ALL: [Representation; 7] = [
        Representation::KbTriple,
        Representation::Sentence,
        Representation::Window,
        Representation::WindowCenter,
        Representation::WindowTitle,
        Representation::WindowCenterTitle,
        Representation::WindowSentence,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Representation::KbTriple => "kb_triple",
            Representation::Sentence => "sentence",
            Representation::Window => "window",
            Representation::WindowCenter => "window_center",
            Representation::WindowTitle => "window_title",
            Representation::WindowCenterTitle => "window_center_title",
            Representation::WindowSentence => "window_sentence",
        }
    }

    pub fn from_name(name: &str) -> Option<Representation> {
        Representation::ALL.iter().copied().find(|r| r.name() == name)
    }

    /// Whether the feature dimension doubles for the center bank.
    pub fn center_encoded(&self) -> bool {
        matches!(self, Representation::WindowCenter | Representation::WindowCenterTitle)
    }

    /// True for every representation that reads documents rather than the KB.
    pub fn needs_documents(&self) -> bool {
        !matches!(self, Representation::KbTriple)
    }

    /// True when answers are sentences rather than entities.
    pub fn sentence_selection(&self) -> bool {
        matches!(self, Representation::WindowSentence)
    }

    pub fn window_options(&self) -> Option<WindowOptions> {
        match self {
            Representation::Window => Some(WindowOptions::default()),
            Representation::WindowCenter => Some(WindowOptions { center_encoding: true, title: false }),
            Representation::WindowTitle => Some(WindowOptions { center_encoding: false, title: true }),
            Representation::WindowCenterTitle => Some(WindowOptions { center_encoding: true, title: true }),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    fn vocab_of(tokens: &[&str], center: bool) -> Vocabulary {
        let mut b = VocabularyBuilder::new();
        for t in tokens {
            b.add(t);
        }
        b.build(center)
    }

    #[test]
    fn tokenize_collapses_entities() {
        let dict = EntityDictionary::new(["Blade Runner"]);
        assert_eq!(tokenize("Who directed Blade Runner?", &dict), toks(&["who", "directed", "blade_runner"]));
    }

    #[test]
    fn tokenize_empty_text() {
        let dict = EntityDictionary::new(["X"]);
        assert!(tokenize("", &dict).is_empty());
    }

    #[test]
    fn tokenize_prefers_longest_match() {
        let dict = EntityDictionary::new(["San Jose", "San Jose State"]);
        // Enumerating matches at position 0: "san jose" (2 words) and
        // "san jose state" (3 words) both apply; the longest must win.
        assert_eq!(tokenize("San Jose State wins", &dict), toks(&["san_jose_state", "wins"]));
        assert_eq!(tokenize("San Jose wins", &dict), toks(&["san_jose", "wins"]));
    }

    #[test]
    fn tokenize_is_idempotent() {
        let dict = EntityDictionary::new(["Blade Runner", "Ridley Scott", "solo"]);
        let once = tokenize("Ridley Scott directed Blade Runner, a solo effort.", &dict);
        let again = tokenize(&once.join(" "), &dict);
        assert_eq!(once, again);
    }

    #[test]
    fn mark_numbers_examples() {
        assert_eq!(mark_numbers(&toks(&["released", "in", "1982"])), toks(&["released", "in", NUMBER_MARKER]));
        assert_eq!(mark_numbers(&toks(&["how", "many", "films"])), toks(&[NUMBER_MARKER, "films"]));
        assert_eq!(mark_numbers(&toks(&["no", "digits", "here"])), toks(&["no", "digits", "here"]));
    }

    #[test]
    fn bow_counts_occurrences() {
        let v = vocab_of(&["a", "b"], false);
        let a = v.id("a").unwrap();
        let b = v.id("b").unwrap();
        let bag = bow(&toks(&["a", "b", "a"]), &v, FeatureBank::Question);
        assert_eq!(bag.entries(), &[(a, 2.0), (b, 1.0)]);
        assert!(bow(&toks(&[]), &v, FeatureBank::Question).is_empty());
    }

    #[test]
    fn bow_center_bank_offsets_ids() {
        let mut b = VocabularyBuilder::new();
        for i in 0..7 {
            b.add(&alloc::format!("w{i}"));
        }
        let v = b.build(true);
        assert_eq!(v.base_size(), 10);
        assert_eq!(v.dim(), 20);
        let bag = bow(&toks(&["w0"]), &v, FeatureBank::ValueCenter);
        let id = v.id("w0").unwrap();
        assert_eq!(bag.entries(), &[(id + 10, 1.0)]);
    }

    #[test]
    fn bow_binary_weighting() {
        let v = vocab_of(&["a", "b"], false);
        let bag = bow_weighted(&toks(&["a", "a", "b"]), &v, FeatureBank::Question, Weighting::Binary);
        assert!(bag.entries().iter().all(|&(_, w)| w == 1.0));
        assert_eq!(bag.nnz(), 2);
    }

    #[test]
    fn kb_slots_doubles_triples() {
        let triples = vec![KBTriple::new("Blade Runner", "directed_by", "Ridley Scott")];
        let v = vocab_of(&["blade_runner", "directed_by", "!directed_by", "ridley_scott"], false);
        let (slots, skipped) = kb_slots(&triples, &v);
        assert_eq!(skipped, 0);
        assert_eq!(slots.len(), 2);
        let br = v.id("blade_runner").unwrap();
        let rel = v.id("directed_by").unwrap();
        let rev = v.id("!directed_by").unwrap();
        let rs = v.id("ridley_scott").unwrap();
        let mut fwd_key = vec![(br, 1.0), (rel, 1.0)];
        fwd_key.sort_by_key(|e| e.0);
        assert_eq!(slots[0].key.entries(), &fwd_key[..]);
        assert_eq!(slots[0].value.entries(), &[(rs, 1.0)]);
        let mut rev_key = vec![(rs, 1.0), (rev, 1.0)];
        rev_key.sort_by_key(|e| e.0);
        assert_eq!(slots[1].key.entries(), &rev_key[..]);
        assert_eq!(slots[1].value.entries(), &[(br, 1.0)]);
        assert_eq!(slots[1].provenance, Provenance::Triple { triple: 0, reversed: true });
    }

    #[test]
    fn kb_slots_empty_input() {
        let v = vocab_of(&["x"], false);
        let (slots, skipped) = kb_slots(&[], &v);
        assert!(slots.is_empty());
        assert_eq!(skipped, 0);
    }

    #[test]
    fn kb_slots_skips_unknown_entities() {
        let triples = vec![KBTriple::new("Known", "directed_by", "Unknown Person")];
        let v = vocab_of(&["known", "directed_by", "!directed_by"], false);
        let (slots, skipped) = kb_slots(&triples, &v);
        assert!(slots.is_empty());
        assert_eq!(skipped, 2);
    }

    #[test]
    fn kb_slots_two_per_triple() {
        let rels = ["directed_by", "written_by"];
        let mut b = VocabularyBuilder::new();
        for r in rels {
            b.add(r);
            b.add(&KBTriple::reversed_relation(r));
        }
        for e in ["m0", "m1", "p0", "p1"] {
            b.add(e);
        }
        let v = b.build(false);
        let triples = vec![
            KBTriple::new("m0", "directed_by", "p0"),
            KBTriple::new("m0", "written_by", "p1"),
            KBTriple::new("m1", "directed_by", "p1"),
        ];
        let (slots, skipped) = kb_slots(&triples, &v);
        assert_eq!(skipped, 0);
        assert_eq!(slots.len(), 2 * triples.len());
    }

    fn sample_doc() -> (Document, EntityDictionary, Vocabulary) {
        let dict = EntityDictionary::new(["Movie One", "Ada Lin", "1982"]);
        let doc = Document {
            title: "movie_one".to_string(),
            sentences: vec![
                toks(&["movie_one", "was", "directed", "by", "ada_lin"]),
                toks(&["it", "came", "out", "in", "1982"]),
                toks(&["plain", "words", "only"]),
            ],
        };
        let mut b = VocabularyBuilder::new();
        for s in &doc.sentences {
            for t in s {
                b.add(t);
            }
        }
        b.add("movie_one");
        (doc, dict, b.build(false))
    }

    #[test]
    fn sentence_slots_key_equals_value() {
        let (doc, dict, vocab) = sample_doc();
        let slots = sentence_slots(&doc, 0, &vocab, &dict);
        assert_eq!(slots.len(), 3);
        for slot in &slots {
            assert_eq!(slot.key, slot.value);
        }
        // Third sentence has no entities.
        assert!(slots[2].value_candidates.is_empty());
        assert_eq!(slots[0].value_candidates.len(), 2);
    }

    #[test]
    fn window_slots_single_window() {
        let dict = EntityDictionary::new(["e"]);
        let doc = Document { title: "e".to_string(), sentences: vec![toks(&["a", "e", "b"])] };
        let mut b = VocabularyBuilder::new();
        for t in ["a", "e", "b"] {
            b.add(t);
        }
        let vocab = b.build(false);
        let slots = window_slots(&doc, 0, 3, &vocab, &dict, WindowOptions::default());
        assert_eq!(slots.len(), 1);
        let ids: Vec<u32> = ["a", "e", "b"].iter().map(|t| vocab.id(t).unwrap()).collect();
        let mut expect: Vec<(u32, f64)> = ids.iter().map(|&i| (i, 1.0)).collect();
        expect.sort_by_key(|e| e.0);
        assert_eq!(slots[0].key.entries(), &expect[..]);
        assert_eq!(slots[0].value.entries(), &[(vocab.id("e").unwrap(), 1.0)]);
    }

    #[test]
    fn window_slots_title_doubles() {
        let dict = EntityDictionary::new(["e", "t"]);
        let doc = Document { title: "t".to_string(), sentences: vec![toks(&["a", "e", "b"])] };
        let mut b = VocabularyBuilder::new();
        for t in ["a", "e", "b", "t"] {
            b.add(t);
        }
        let vocab = b.build(false);
        let slots = window_slots(&doc, 0, 3, &vocab, &dict, WindowOptions { center_encoding: false, title: true });
        assert_eq!(slots.len(), 2);
        // Plain slot is tagged _window_.
        let wm = vocab.id(WINDOW_MARKER).unwrap();
        assert!(slots[0].key.entries().iter().any(|&(i, _)| i == wm));
        // Title slot carries _title_ and the title token, and points at it.
        let tm = vocab.id(TITLE_MARKER).unwrap();
        let tt = vocab.id("t").unwrap();
        assert!(slots[1].key.entries().iter().any(|&(i, _)| i == tm));
        assert!(slots[1].key.entries().iter().any(|&(i, _)| i == tt));
        assert_eq!(slots[1].value.entries(), &[(tt, 1.0)]);
        assert_eq!(slots[1].value_candidates, vec![tt]);
    }

    #[test]
    fn window_slots_counts_entity_centers() {
        // 10-token sentence with 4 entity tokens, W=7: one slot per entity
        // center (truncated edges), verified against a position scan.
        let dict = EntityDictionary::new(["e1", "e2", "e3", "e4"]);
        let words = ["w0", "e1", "w1", "e2", "w2", "w3", "e3", "w4", "e4", "w5"];
        let doc = Document { title: "e1".to_string(), sentences: vec![toks(&words)] };
        let mut b = VocabularyBuilder::new();
        for t in words {
            b.add(t);
        }
        let vocab = b.build(false);
        let plain = window_slots(&doc, 0, 7, &vocab, &dict, WindowOptions::default());
        let scan = words.iter().filter(|t| dict.is_entity_token(t)).count();
        assert_eq!(scan, 4);
        assert_eq!(plain.len(), scan);
        let titled = window_slots(&doc, 0, 7, &vocab, &dict, WindowOptions { center_encoding: false, title: true });
        assert_eq!(titled.len(), 2 * scan);
    }

    #[test]
    fn center_encoding_folds_back_to_plain_key() {
        let dict = EntityDictionary::new(["e"]);
        let doc = Document { title: "e".to_string(), sentences: vec![toks(&["a", "e", "b", "e", "c"])] };
        let mut b = VocabularyBuilder::new();
        for t in ["a", "e", "b", "c"] {
            b.add(t);
        }
        let plain_vocab = b.build(false);
        let mut b2 = VocabularyBuilder::new();
        for t in ["a", "e", "b", "c"] {
            b2.add(t);
        }
        let center_vocab = b2.build(true);
        let plain = window_slots(&doc, 0, 3, &plain_vocab, &dict, WindowOptions::default());
        let centered = window_slots(&doc, 0, 3, &center_vocab, &dict, WindowOptions { center_encoding: true, title: false });
        assert_eq!(plain.len(), centered.len());
        let base = center_vocab.base_size() as u32;
        for (p, c) in plain.iter().zip(centered.iter()) {
            // Folding the bank offset recovers the plain window multiset.
            let mut folded: BTreeMap<u32, f64> = BTreeMap::new();
            for &(i, w) in c.key.entries() {
                *folded.entry(i % base).or_insert(0.0) += w;
            }
            let folded: Vec<(u32, f64)> = folded.into_iter().collect();
            assert_eq!(p.key.entries(), &folded[..]);
            // Exactly one center entry lives in the second bank.
            let second: f64 =
                c.key.entries().iter().filter(|&&(i, _)| i >= base).map(|&(_, w)| w).sum();
            assert_eq!(second, 1.0);
        }
    }

    #[test]
    fn window_sentence_shares_sentence_value() {
        let dict = EntityDictionary::new(["e1", "e2"]);
        let doc = Document { title: "e1".to_string(), sentences: vec![toks(&["e1", "met", "e2"])] };
        let mut b = VocabularyBuilder::new();
        for t in ["e1", "met", "e2"] {
            b.add(t);
        }
        let vocab = b.build(false);
        let slots = window_sentence_slots(&doc, 0, 3, &vocab, &dict, 10);
        assert_eq!(slots.len(), 2);
        assert_eq!(slots[0].value, slots[1].value);
        assert_eq!(slots[0].value_candidates, vec![10]);
        let sentence_bag = bow(&doc.sentences[0], &vocab, FeatureBank::Key);
        assert_eq!(slots[0].value, sentence_bag);
    }

    #[test]
    #[should_panic(expected = "odd")]
    fn window_rejects_even_size() {
        let dict = EntityDictionary::new(["e"]);
        let doc = Document { title: "e".to_string(), sentences: vec![toks(&["e"])] };
        let vocab = vocab_of(&["e"], false);
        window_slots(&doc, 0, 4, &vocab, &dict, WindowOptions::default());
    }

    #[test]
    fn representation_names_round_trip() {
        for r in Representation::ALL {
            assert_eq!(Representation::from_name(r.name()), Some(r));
        }
    }
}
