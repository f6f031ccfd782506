//! Synthetic movie-domain benchmark: a nine-relation KB, questions in 13
//! classes (plus an optional two-hop family) built by pattern substitution,
//! and per-movie documents generated from fact templates with controllable
//! conjunction and coreference corruption.
//!
//! Generation is a pure function of the config (which embeds the seed):
//! the same config produces the same corpus, byte for byte once emitted.

mod names;
mod patterns;
mod templates;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;

use crate::featurize::KBTriple;
use crate::rng::{fnv1a, substream};
use names::NameForge;

/// The nine KB relation types.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Relation {
    DirectedBy,
    WrittenBy,
    StarredActors,
    ReleaseYear,
    InLanguage,
    HasGenre,
    HasTags,
    HasImdbRating,
    HasImdbVotes,
}

impl Relation {
    pub const ALL: [Relation; 9] = [
        Relation::DirectedBy,
        Relation::WrittenBy,
        Relation::StarredActors,
        Relation::ReleaseYear,
        Relation::InLanguage,
        Relation::HasGenre,
        Relation::HasTags,
        Relation::HasImdbRating,
        Relation::HasImdbVotes,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Relation::DirectedBy => "directed_by",
            Relation::WrittenBy => "written_by",
            Relation::StarredActors => "starred_actors",
            Relation::ReleaseYear => "release_year",
            Relation::InLanguage => "in_language",
            Relation::HasGenre => "has_genre",
            Relation::HasTags => "has_tags",
            Relation::HasImdbRating => "has_imdb_rating",
            Relation::HasImdbVotes => "has_imdb_votes",
        }
    }

    pub fn from_name(name: &str) -> Option<Relation> {
        Relation::ALL.iter().copied().find(|r| r.name() == name)
    }

    fn index(&self) -> usize {
        Relation::ALL.iter().position(|r| r == self).unwrap()
    }
}

/// Text bins shared by the rating and vote relations.
pub const RATING_BINS: [&str; 5] = ["unheard of", "unknown", "well known", "highly watched", "famous"];

/// Question classes: one per KB edge direction, plus the composed
/// director-to-year family used for multi-hop experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum QuestionClass {
    WriterToMovie,
    TagToMovie,
    MovieToYear,
    MovieToWriter,
    MovieToTags,
    MovieToLanguage,
    MovieToImdbVotes,
    MovieToImdbRating,
    MovieToGenre,
    MovieToDirector,
    MovieToActors,
    DirectorToMovie,
    ActorToMovie,
    DirectorToYear,
}

impl QuestionClass {
    pub const ALL: [QuestionClass; 14] = [
        QuestionClass::WriterToMovie,
        QuestionClass::TagToMovie,
        QuestionClass::MovieToYear,
        QuestionClass::MovieToWriter,
        QuestionClass::MovieToTags,
        QuestionClass::MovieToLanguage,
        QuestionClass::MovieToImdbVotes,
        QuestionClass::MovieToImdbRating,
        QuestionClass::MovieToGenre,
        QuestionClass::MovieToDirector,
        QuestionClass::MovieToActors,
        QuestionClass::DirectorToMovie,
        QuestionClass::ActorToMovie,
        QuestionClass::DirectorToYear,
    ];

    /// The 13 single-edge classes.
    pub const SINGLE_HOP: [QuestionClass; 13] = [
        QuestionClass::WriterToMovie,
        QuestionClass::TagToMovie,
        QuestionClass::MovieToYear,
        QuestionClass::MovieToWriter,
        QuestionClass::MovieToTags,
        QuestionClass::MovieToLanguage,
        QuestionClass::MovieToImdbVotes,
        QuestionClass::MovieToImdbRating,
        QuestionClass::MovieToGenre,
        QuestionClass::MovieToDirector,
        QuestionClass::MovieToActors,
        QuestionClass::DirectorToMovie,
        QuestionClass::ActorToMovie,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            QuestionClass::WriterToMovie => "writer_to_movie",
            QuestionClass::TagToMovie => "tag_to_movie",
            QuestionClass::MovieToYear => "movie_to_year",
            QuestionClass::MovieToWriter => "movie_to_writer",
            QuestionClass::MovieToTags => "movie_to_tags",
            QuestionClass::MovieToLanguage => "movie_to_language",
            QuestionClass::MovieToImdbVotes => "movie_to_imdb_votes",
            QuestionClass::MovieToImdbRating => "movie_to_imdb_rating",
            QuestionClass::MovieToGenre => "movie_to_genre",
            QuestionClass::MovieToDirector => "movie_to_director",
            QuestionClass::MovieToActors => "movie_to_actors",
            QuestionClass::DirectorToMovie => "director_to_movie",
            QuestionClass::ActorToMovie => "actor_to_movie",
            QuestionClass::DirectorToYear => "director_to_year",
        }
    }

    pub fn from_label(label: &str) -> Option<QuestionClass> {
        QuestionClass::ALL.iter().copied().find(|c| c.label() == label)
    }

    /// The KB edge this class traverses; None for the two-hop family.
    pub fn edge(&self) -> Option<(Relation, bool)> {
        // bool: edge is traversed object-to-subject (question names the object)
        match self {
            QuestionClass::WriterToMovie => Some((Relation::WrittenBy, true)),
            QuestionClass::TagToMovie => Some((Relation::HasTags, true)),
            QuestionClass::MovieToYear => Some((Relation::ReleaseYear, false)),
            QuestionClass::MovieToWriter => Some((Relation::WrittenBy, false)),
            QuestionClass::MovieToTags => Some((Relation::HasTags, false)),
            QuestionClass::MovieToLanguage => Some((Relation::InLanguage, false)),
            QuestionClass::MovieToImdbVotes => Some((Relation::HasImdbVotes, false)),
            QuestionClass::MovieToImdbRating => Some((Relation::HasImdbRating, false)),
            QuestionClass::MovieToGenre => Some((Relation::HasGenre, false)),
            QuestionClass::MovieToDirector => Some((Relation::DirectedBy, false)),
            QuestionClass::MovieToActors => Some((Relation::StarredActors, false)),
            QuestionClass::DirectorToMovie => Some((Relation::DirectedBy, true)),
            QuestionClass::ActorToMovie => Some((Relation::StarredActors, true)),
            QuestionClass::DirectorToYear => None,
        }
    }
}

/// Whether the composed director-to-year questions are generated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TwoHopMode {
    #[default]
    Off,
    Include,
    Only,
}

/// Granularity of split disjointness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SplitLevel {
    /// No single (pattern, entity) instantiation appears in two splits.
    #[default]
    Pattern,
    /// No (class, entity) question appears in two splits under any wording.
    Entity,
}

/// Everything the generator needs; the seed is part of the config.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct GenConfig {
    pub n_movies: usize,
    pub n_actors: usize,
    pub n_directors: usize,
    pub n_writers: usize,
    pub n_tags: usize,
    pub n_genres: usize,
    pub n_languages: usize,
    /// Inclusive year span movies are drawn from.
    pub year_range: (u32, u32),
    /// How many templates per relation documents draw from (clamped to the
    /// bank size; 1 reproduces the single-template configuration).
    pub templates_per_relation: usize,
    pub conjunction_rate: f64,
    pub coreference_rate: f64,
    pub split_fractions: (f64, f64, f64),
    /// Deterministic downsample of the generated questions (total across
    /// splits); None keeps every instantiation.
    pub max_questions: Option<usize>,
    pub two_hop: TwoHopMode,
    pub split_by: SplitLevel,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            n_movies: 100,
            n_actors: 120,
            n_directors: 40,
            n_writers: 60,
            n_tags: 25,
            n_genres: 12,
            n_languages: 6,
            year_range: (1950, 2009),
            templates_per_relation: 1,
            conjunction_rate: 0.5,
            coreference_rate: 0.8,
            split_fractions: (0.8, 0.1, 0.1),
            max_questions: None,
            two_hop: TwoHopMode::Off,
            split_by: SplitLevel::Pattern,
            seed: 7,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GenError {
    PoolTooSmall { role: &'static str, need: usize, have: usize },
    InvalidConfig(String),
}

impl core::fmt::Display for GenError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            GenError::PoolTooSmall { role, need, have } => {
                write!(f, "entity pool '{role}' too small: need at least {need}, have {have}")
            }
            GenError::InvalidConfig(msg) => write!(f, "invalid generation config: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for GenError {}

impl GenConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        let pools: [(&'static str, usize, usize); 7] = [
            ("movies", 1, self.n_movies),
            ("actors", 5, self.n_actors),
            ("directors", 1, self.n_directors),
            ("writers", 3, self.n_writers),
            ("tags", 6, self.n_tags),
            ("genres", 2, self.n_genres),
            ("languages", 1, self.n_languages),
        ];
        for (role, need, have) in pools {
            if have < need {
                return Err(GenError::PoolTooSmall { role, need, have });
            }
        }
        for (name, rate) in
            [("conjunction_rate", self.conjunction_rate), ("coreference_rate", self.coreference_rate)]
        {
            if !(0.0..=1.0).contains(&rate) {
                return Err(GenError::InvalidConfig(format!("{name} must be in [0,1], got {rate}")));
            }
        }
        let (a, b, c) = self.split_fractions;
        if a < 0.0 || b < 0.0 || c < 0.0 || (a + b + c - 1.0).abs() > 1e-9 {
            return Err(GenError::InvalidConfig("split fractions must be nonnegative and sum to 1".into()));
        }
        if self.year_range.0 > self.year_range.1 {
            return Err(GenError::InvalidConfig("empty year range".into()));
        }
        if self.templates_per_relation < 1 {
            return Err(GenError::InvalidConfig("templates_per_relation must be >= 1".into()));
        }
        Ok(())
    }
}

/// Generated KB: triples in canonical per-movie order plus the entity pools.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthKb {
    pub triples: Vec<KBTriple>,
    /// Per-movie contiguous triple range [start, end).
    pub movie_triples: Vec<(usize, usize)>,
    pub movies: Vec<String>,
    pub actors: Vec<String>,
    pub directors: Vec<String>,
    pub writers: Vec<String>,
    pub tags: Vec<String>,
    pub genres: Vec<String>,
    pub languages: Vec<String>,
    /// Distinct years that actually occur, as strings, sorted.
    pub years: Vec<String>,
}

impl SynthKb {
    /// Every entity surface appearing in the KB (subjects and objects),
    /// sorted and deduplicated. Pool members that never got an edge are not
    /// entities of the KB and are excluded.
    pub fn entities(&self) -> Vec<String> {
        let mut set: BTreeSet<String> = BTreeSet::new();
        for t in &self.triples {
            set.insert(t.subject.clone());
            set.insert(t.object.clone());
        }
        set.into_iter().collect()
    }
}

/// One generated QA pair in surface form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QAItem {
    pub question: String,
    /// Gold answer entity surfaces, sorted.
    pub answers: Vec<String>,
    pub class: QuestionClass,
    /// Ids of the KB triples that support the answer.
    pub support: Vec<u32>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct QaSplits {
    pub train: Vec<QAItem>,
    pub dev: Vec<QAItem>,
    pub test: Vec<QAItem>,
}

/// A document in surface form: one per movie, title = movie name.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawDocument {
    pub title: String,
    pub sentences: Vec<String>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DocStats {
    pub sentences: usize,
    pub conj_opportunities: usize,
    pub conj_applied: usize,
    pub coref_opportunities: usize,
    pub coref_applied: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DocSet {
    pub docs: Vec<RawDocument>,
    /// Per triple id: (document, sentence) where the fact is realized.
    pub realizations: Vec<(u32, u32)>,
    pub stats: DocStats,
}

/// The full generated benchmark.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthCorpus {
    pub config: GenConfig,
    pub kb: SynthKb,
    pub docs: DocSet,
    pub qa: QaSplits,
}

impl SynthCorpus {
    pub fn generate(config: &GenConfig) -> Result<SynthCorpus, GenError> {
        config.validate()?;
        let kb = generate_kb(config)?;
        let qa = generate_questions(&kb, config);
        let docs = generate_documents(&kb, config);
        Ok(SynthCorpus { config: config.clone(), kb, docs, qa })
    }

    /// Stop-word threshold suggestion scaled to this corpus: entity words
    /// stay well below it, template words land above it.
    pub fn recommended_f(&self) -> usize {
        (self.config.n_movies / 2).max(16)
    }
}

/// All lowercase words that may appear in generated text around entities;
/// the name generator must avoid them.
fn reserved_words() -> BTreeSet<String> {
    let mut set: BTreeSet<String> = BTreeSet::new();
    set.insert("it".to_string());
    set.insert("and".to_string());
    for rel in Relation::ALL {
        for t in templates::templates_for(rel) {
            for w in t.split_whitespace() {
                if w != "{m}" && w != "{o}" {
                    set.insert(w.to_string());
                }
            }
        }
    }
    for class in QuestionClass::ALL {
        for p in patterns::patterns_for(class) {
            for w in p.split_whitespace() {
                let w: String = w.chars().filter(|c| c.is_alphanumeric()).collect();
                if !w.is_empty() && w != "X" {
                    set.insert(w.to_lowercase());
                }
            }
        }
    }
    for bin in RATING_BINS {
        for w in bin.split_whitespace() {
            set.insert(w.to_string());
        }
    }
    set
}

fn sample_distinct<'a>(pool: &'a [String], k: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Vec<&'a String> {
    assert!(k <= pool.len());
    let mut picked: Vec<usize> = Vec::with_capacity(k);
    while picked.len() < k {
        let i = rng.gen_range(0..pool.len());
        if !picked.contains(&i) {
            picked.push(i);
        }
    }
    picked.into_iter().map(|i| &pool[i]).collect()
}

/// Generate entity pools and one fact set per movie: 1 director, 1-3
/// writers, 2-5 actors, 1 year, 1 language, 1-2 genres, 2-6 tags, and one
/// rating and vote bin each.
pub fn generate_kb(config: &GenConfig) -> Result<SynthKb, GenError> {
    config.validate()?;
    let mut name_rng = substream(config.seed, "names");
    let mut forge = NameForge::new(reserved_words());
    let movies: Vec<String> = (0..config.n_movies).map(|_| forge.title(&mut name_rng)).collect();
    let actors: Vec<String> = (0..config.n_actors).map(|_| forge.person(&mut name_rng)).collect();
    let directors: Vec<String> = (0..config.n_directors).map(|_| forge.person(&mut name_rng)).collect();
    let writers: Vec<String> = (0..config.n_writers).map(|_| forge.person(&mut name_rng)).collect();
    let tags: Vec<String> = (0..config.n_tags).map(|_| forge.single(&mut name_rng)).collect();
    let genres: Vec<String> = (0..config.n_genres).map(|_| forge.single(&mut name_rng)).collect();
    let languages: Vec<String> = (0..config.n_languages).map(|_| forge.single(&mut name_rng)).collect();

    let mut rng = substream(config.seed, "kb");
    let mut triples = Vec::new();
    let mut movie_triples = Vec::with_capacity(movies.len());
    let mut years_used: BTreeSet<String> = BTreeSet::new();
    for movie in &movies {
        let start = triples.len();
        let mut push = |rel: Relation, obj: &str| {
            triples.push(KBTriple::new(movie.clone(), rel.name(), obj));
        };
        let director = sample_distinct(&directors, 1, &mut rng);
        push(Relation::DirectedBy, director[0]);
        let n_writers = rng.gen_range(1..=3);
        for w in sample_distinct(&writers, n_writers, &mut rng) {
            push(Relation::WrittenBy, w);
        }
        let n_actors = rng.gen_range(2..=5);
        for a in sample_distinct(&actors, n_actors, &mut rng) {
            push(Relation::StarredActors, a);
        }
        let year = rng.gen_range(config.year_range.0..=config.year_range.1).to_string();
        years_used.insert(year.clone());
        push(Relation::ReleaseYear, &year);
        let lang = sample_distinct(&languages, 1, &mut rng);
        push(Relation::InLanguage, lang[0]);
        let n_genres = rng.gen_range(1..=2);
        for g in sample_distinct(&genres, n_genres, &mut rng) {
            push(Relation::HasGenre, g);
        }
        let n_tags = rng.gen_range(2..=6);
        for t in sample_distinct(&tags, n_tags, &mut rng) {
            push(Relation::HasTags, t);
        }
        push(Relation::HasImdbRating, RATING_BINS[rng.gen_range(0..RATING_BINS.len())]);
        push(Relation::HasImdbVotes, RATING_BINS[rng.gen_range(0..RATING_BINS.len())]);
        movie_triples.push((start, triples.len()));
    }
    Ok(SynthKb {
        triples,
        movie_triples,
        movies,
        actors,
        directors,
        writers,
        tags,
        genres,
        languages,
        years: years_used.into_iter().collect(),
    })
}

struct KbIndex {
    /// relation -> subject -> (triple id, object)
    forward: Vec<BTreeMap<String, Vec<(u32, String)>>>,
    /// relation -> object -> (triple id, subject)
    reverse: Vec<BTreeMap<String, Vec<(u32, String)>>>,
}

impl KbIndex {
    fn build(kb: &SynthKb) -> KbIndex {
        let mut forward = alloc::vec![BTreeMap::new(); Relation::ALL.len()];
        let mut reverse = alloc::vec![BTreeMap::new(); Relation::ALL.len()];
        for (i, t) in kb.triples.iter().enumerate() {
            let rel = Relation::from_name(&t.relation).expect("generated relation");
            forward[rel.index()]
                .entry(t.subject.clone())
                .or_insert_with(Vec::new)
                .push((i as u32, t.object.clone()));
            reverse[rel.index()]
                .entry(t.object.clone())
                .or_insert_with(Vec::new)
                .push((i as u32, t.subject.clone()));
        }
        KbIndex { forward, reverse }
    }
}

fn bucket(seed: u64, key: &str, fractions: (f64, f64, f64)) -> usize {
    let full = format!("{seed}|{key}");
    let frac = fnv1a(full.as_bytes()) as f64 / (u64::MAX as f64 + 1.0);
    if frac < fractions.0 {
        0
    } else if frac < fractions.0 + fractions.1 {
        1
    } else {
        2
    }
}

fn split_of(config: &GenConfig, class: QuestionClass, pattern: &str, entity: &str) -> usize {
    match config.split_by {
        // One (pattern, entity) instantiation never crosses splits; other
        // wordings of the same underlying question may.
        SplitLevel::Pattern => bucket(
            config.seed,
            &format!("{}|{}|{}", class.label(), pattern, entity.to_lowercase()),
            config.split_fractions,
        ),
        // Stricter: every wording of a (class, entity) question shares one
        // split, so a fact queried at test time was never queried in
        // training under any phrasing.
        SplitLevel::Entity => bucket(
            config.seed,
            &format!("{}|{}", class.label(), entity.to_lowercase()),
            config.split_fractions,
        ),
    }
}

/// Instantiate every pattern of every active class with every applicable
/// entity; gold sets are the full KB edge. Split assignment hashes the
/// (pattern, entity) pair (or the (class, entity) pair under the stricter
/// level), and an optional deterministic downsample trims each split while
/// keeping at least one wording of every underlying question it covers.
pub fn generate_questions(kb: &SynthKb, config: &GenConfig) -> QaSplits {
    let index = KbIndex::build(kb);
    let classes: &[QuestionClass] = match config.two_hop {
        TwoHopMode::Off => &QuestionClass::SINGLE_HOP,
        TwoHopMode::Include => &QuestionClass::ALL,
        TwoHopMode::Only => core::slice::from_ref(&QuestionClass::DirectorToYear),
    };
    // rank = position of the wording among its (class, entity) siblings
    // within the same split; the downsample drops high ranks first.
    let mut splits: [Vec<(u32, QAItem)>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for &class in classes {
        let subjects: Vec<&String> = match class.edge() {
            Some((rel, false)) => index.forward[rel.index()].keys().collect(),
            Some((rel, true)) => index.reverse[rel.index()].keys().collect(),
            None => index.reverse[Relation::DirectedBy.index()].keys().collect(),
        };
        for subject in subjects {
            let (answers, support) = match class.edge() {
                Some((rel, false)) => {
                    let edges = &index.forward[rel.index()][subject];
                    let answers: BTreeSet<String> = edges.iter().map(|(_, o)| o.clone()).collect();
                    let support: Vec<u32> = edges.iter().map(|(i, _)| *i).collect();
                    (answers, support)
                }
                Some((rel, true)) => {
                    let edges = &index.reverse[rel.index()][subject];
                    let answers: BTreeSet<String> = edges.iter().map(|(_, s)| s.clone()).collect();
                    let support: Vec<u32> = edges.iter().map(|(i, _)| *i).collect();
                    (answers, support)
                }
                None => {
                    // Two hops: director -> movies -> release years.
                    let movies = &index.reverse[Relation::DirectedBy.index()][subject];
                    let mut answers = BTreeSet::new();
                    let mut support = Vec::new();
                    for (tid, movie) in movies {
                        support.push(*tid);
                        for (ytid, year) in &index.forward[Relation::ReleaseYear.index()][movie] {
                            answers.insert(year.clone());
                            support.push(*ytid);
                        }
                    }
                    (answers, support)
                }
            };
            let mut rank_in_split = [0u32; 3];
            for pattern in patterns::patterns_for(class) {
                let split = split_of(config, class, pattern, subject);
                splits[split].push((
                    rank_in_split[split],
                    QAItem {
                        question: pattern.replace("[X]", subject),
                        answers: answers.iter().cloned().collect(),
                        class,
                        support: support.clone(),
                    },
                ));
                rank_in_split[split] += 1;
            }
        }
    }
    if let Some(cap) = config.max_questions {
        let fractions = [config.split_fractions.0, config.split_fractions.1, config.split_fractions.2];
        for (part, frac) in splits.iter_mut().zip(fractions) {
            let quota = ((cap as f64 * frac + 0.5) as usize).min(part.len());
            // Keep first wordings of every question before second wordings
            // of any, ties broken by hash: coverage survives the trim.
            let mut keyed: Vec<(u32, u64, usize)> = part
                .iter()
                .enumerate()
                .map(|(i, (rank, q))| {
                    (*rank, fnv1a(format!("{}|cap|{}", config.seed, q.question).as_bytes()), i)
                })
                .collect();
            keyed.sort_unstable();
            let mut keep: Vec<usize> = keyed.into_iter().take(quota).map(|(_, _, i)| i).collect();
            keep.sort_unstable();
            let mut kept = Vec::with_capacity(keep.len());
            for i in keep {
                kept.push(part[i].clone());
            }
            *part = kept;
        }
    }
    let [train, dev, test] = splits;
    QaSplits {
        train: train.into_iter().map(|(_, q)| q).collect(),
        dev: dev.into_iter().map(|(_, q)| q).collect(),
        test: test.into_iter().map(|(_, q)| q).collect(),
    }
}

fn words_of(surface: &str) -> Vec<String> {
    surface.split_whitespace().map(|w| w.to_string()).collect()
}

fn realize(template: &str, title: &str, object_words: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    for w in template.split_whitespace() {
        match w {
            "{m}" => out.extend(words_of(title)),
            "{o}" => out.extend(object_words.iter().cloned()),
            _ => out.push(w.to_string()),
        }
    }
    out
}

/// Replace every occurrence of the title word sequence with "it".
fn corefer(words: &[String], title_words: &[String]) -> Vec<String> {
    let mut out = Vec::with_capacity(words.len());
    let mut i = 0;
    while i < words.len() {
        if i + title_words.len() <= words.len() && words[i..i + title_words.len()] == title_words[..] {
            out.push("it".to_string());
            i += title_words.len();
        } else {
            out.push(words[i].clone());
            i += 1;
        }
    }
    out
}

/// One document per movie: a sentence per KB fact realized from that
/// relation's templates, consecutive facts merged with "and" at the
/// conjunction rate (at most two facts per sentence), and the movie name
/// replaced by "it" in later sentences at the coreference rate. The first
/// sentence always keeps the name so every pronoun has an antecedent.
pub fn generate_documents(kb: &SynthKb, config: &GenConfig) -> DocSet {
    let mut rng = substream(config.seed, "docs");
    let mut docs = Vec::with_capacity(kb.movies.len());
    let mut realizations = alloc::vec![(0u32, 0u32); kb.triples.len()];
    let mut stats = DocStats::default();
    for (doc_id, (movie, &(start, end))) in kb.movies.iter().zip(kb.movie_triples.iter()).enumerate() {
        let facts: Vec<(u32, Relation, &str)> = (start..end)
            .map(|i| {
                let t = &kb.triples[i];
                (i as u32, Relation::from_name(&t.relation).unwrap(), t.object.as_str())
            })
            .collect();
        // Plan: group consecutive facts into 1- or 2-fact sentences.
        let mut groups: Vec<&[(u32, Relation, &str)]> = Vec::new();
        let mut i = 0;
        while i < facts.len() {
            if i + 1 < facts.len() {
                stats.conj_opportunities += 1;
                if rng.gen::<f64>() < config.conjunction_rate {
                    stats.conj_applied += 1;
                    groups.push(&facts[i..i + 2]);
                    i += 2;
                    continue;
                }
            }
            groups.push(&facts[i..i + 1]);
            i += 1;
        }
        // Realize each group.
        let title_words = words_of(movie);
        let mut sentences: Vec<Vec<String>> = Vec::with_capacity(groups.len());
        for group in &groups {
            let sentence_id = sentences.len() as u32;
            let words = match group {
                [(tid, rel, obj)] => {
                    realizations[*tid as usize] = (doc_id as u32, sentence_id);
                    let bank = templates::templates_for(*rel);
                    let n = config.templates_per_relation.min(bank.len());
                    realize(bank[rng.gen_range(0..n)], movie, &words_of(obj))
                }
                [(t1, r1, o1), (t2, r2, o2)] => {
                    realizations[*t1 as usize] = (doc_id as u32, sentence_id);
                    realizations[*t2 as usize] = (doc_id as u32, sentence_id);
                    if r1 == r2 {
                        // Same relation: one clause with the objects joined.
                        let bank = templates::templates_for(*r1);
                        let n = config.templates_per_relation.min(bank.len());
                        let mut objects = words_of(o1);
                        objects.push("and".to_string());
                        objects.extend(words_of(o2));
                        realize(bank[rng.gen_range(0..n)], movie, &objects)
                    } else {
                        let bank1 = templates::templates_for(*r1);
                        let bank2 = templates::templates_for(*r2);
                        let n1 = config.templates_per_relation.min(bank1.len());
                        let n2 = config.templates_per_relation.min(bank2.len());
                        let mut words = realize(bank1[rng.gen_range(0..n1)], movie, &words_of(o1));
                        words.push("and".to_string());
                        words.extend(realize(bank2[rng.gen_range(0..n2)], movie, &words_of(o2)));
                        words
                    }
                }
                _ => unreachable!("groups hold one or two facts"),
            };
            sentences.push(words);
        }
        // Coreference pass; never the first sentence.
        for sentence in sentences.iter_mut().skip(1) {
            stats.coref_opportunities += 1;
            if rng.gen::<f64>() < config.coreference_rate {
                stats.coref_applied += 1;
                *sentence = corefer(sentence, &title_words);
            }
        }
        stats.sentences += sentences.len();
        docs.push(RawDocument {
            title: movie.clone(),
            sentences: sentences.into_iter().map(|w| w.join(" ")).collect(),
        });
    }
    DocSet { docs, realizations, stats }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> GenConfig {
        GenConfig {
            n_movies: 12,
            n_actors: 20,
            n_directors: 6,
            n_writers: 9,
            n_tags: 8,
            n_genres: 4,
            n_languages: 3,
            seed: 11,
            ..GenConfig::default()
        }
    }

    #[test]
    fn single_movie_has_at_least_nine_triples() {
        let config = GenConfig {
            n_movies: 1,
            n_actors: 5,
            n_directors: 1,
            n_writers: 3,
            n_tags: 6,
            n_genres: 2,
            n_languages: 1,
            ..GenConfig::default()
        };
        let kb = generate_kb(&config).unwrap();
        assert!(kb.triples.len() >= 9);
        // Every relation appears.
        for rel in Relation::ALL {
            assert!(kb.triples.iter().any(|t| t.relation == rel.name()), "{:?}", rel);
        }
    }

    #[test]
    fn pool_too_small_is_rejected() {
        let config = GenConfig { n_actors: 3, ..GenConfig::default() };
        assert!(matches!(
            generate_kb(&config),
            Err(GenError::PoolTooSmall { role: "actors", .. })
        ));
    }

    #[test]
    fn generation_is_deterministic() {
        let config = small_config();
        let a = SynthCorpus::generate(&config).unwrap();
        let b = SynthCorpus::generate(&config).unwrap();
        assert_eq!(a, b);
        let c = SynthCorpus::generate(&GenConfig { seed: 12, ..config }).unwrap();
        assert_ne!(a.kb.movies, c.kb.movies);
    }

    #[test]
    fn per_movie_cardinalities_hold() {
        let kb = generate_kb(&small_config()).unwrap();
        for &(start, end) in &kb.movie_triples {
            let count = |rel: Relation| {
                kb.triples[start..end].iter().filter(|t| t.relation == rel.name()).count()
            };
            assert_eq!(count(Relation::DirectedBy), 1);
            assert!((1..=3).contains(&count(Relation::WrittenBy)));
            assert!((2..=5).contains(&count(Relation::StarredActors)));
            assert_eq!(count(Relation::ReleaseYear), 1);
            assert_eq!(count(Relation::InLanguage), 1);
            assert!((1..=2).contains(&count(Relation::HasGenre)));
            assert!((2..=6).contains(&count(Relation::HasTags)));
            assert_eq!(count(Relation::HasImdbRating), 1);
            assert_eq!(count(Relation::HasImdbVotes), 1);
        }
    }

    #[test]
    fn questions_carry_full_gold_edges() {
        let config = small_config();
        let kb = generate_kb(&config).unwrap();
        let qa = generate_questions(&kb, &config);
        let all: Vec<&QAItem> =
            qa.train.iter().chain(qa.dev.iter()).chain(qa.test.iter()).collect();
        assert!(!all.is_empty());
        // Recompute every gold set from the raw triples.
        for item in &all {
            let (rel, reversed) = item.class.edge().expect("single hop classes only");
            // The subject is whichever entity the pattern was filled with;
            // recover it by checking support triples.
            assert!(!item.support.is_empty());
            let expect: BTreeSet<String> = item
                .support
                .iter()
                .map(|&i| {
                    let t = &kb.triples[i as usize];
                    assert_eq!(t.relation, rel.name());
                    if reversed { t.subject.clone() } else { t.object.clone() }
                })
                .collect();
            let got: BTreeSet<String> = item.answers.iter().cloned().collect();
            assert_eq!(got, expect, "{}", item.question);
        }
        // Multi-answer questions exist (actors per movie >= 2).
        assert!(all
            .iter()
            .any(|q| q.class == QuestionClass::MovieToActors && q.answers.len() >= 2));
    }

    #[test]
    fn no_question_string_crosses_splits() {
        let config = small_config();
        let corpus = SynthCorpus::generate(&config).unwrap();
        let train: BTreeSet<&str> = corpus.qa.train.iter().map(|q| q.question.as_str()).collect();
        let dev: BTreeSet<&str> = corpus.qa.dev.iter().map(|q| q.question.as_str()).collect();
        let test: BTreeSet<&str> = corpus.qa.test.iter().map(|q| q.question.as_str()).collect();
        assert!(train.intersection(&dev).next().is_none());
        assert!(train.intersection(&test).next().is_none());
        assert!(dev.intersection(&test).next().is_none());
    }

    #[test]
    fn entity_split_isolates_every_wording() {
        let config = GenConfig { split_by: SplitLevel::Entity, ..small_config() };
        let corpus = SynthCorpus::generate(&config).unwrap();
        // No (class, entity) pair crosses splits under any wording.
        let keys = |items: &[QAItem]| -> BTreeSet<(QuestionClass, Vec<u32>)> {
            items.iter().map(|q| (q.class, q.support.clone())).collect()
        };
        let (ktrain, kdev, ktest) = (keys(&corpus.qa.train), keys(&corpus.qa.dev), keys(&corpus.qa.test));
        assert!(ktrain.intersection(&kdev).next().is_none());
        assert!(ktrain.intersection(&ktest).next().is_none());
        assert!(kdev.intersection(&ktest).next().is_none());
    }

    #[test]
    fn question_cap_downsamples_deterministically() {
        let config = GenConfig { max_questions: Some(100), ..small_config() };
        let a = SynthCorpus::generate(&config).unwrap();
        let b = SynthCorpus::generate(&config).unwrap();
        assert_eq!(a.qa, b.qa);
        let total = a.qa.train.len() + a.qa.dev.len() + a.qa.test.len();
        assert!(total <= 102, "{total}");
        assert!(a.qa.train.len() >= 70);
    }

    #[test]
    fn two_hop_only_generates_the_composed_family() {
        let config = GenConfig { two_hop: TwoHopMode::Only, ..small_config() };
        let corpus = SynthCorpus::generate(&config).unwrap();
        let all: Vec<&QAItem> = corpus
            .qa
            .train
            .iter()
            .chain(corpus.qa.dev.iter())
            .chain(corpus.qa.test.iter())
            .collect();
        assert!(!all.is_empty());
        let kb = &corpus.kb;
        for q in all {
            assert_eq!(q.class, QuestionClass::DirectorToYear);
            // Gold answers are years of the director's movies.
            for a in &q.answers {
                assert!(kb.years.contains(a), "{a}");
            }
            // Support pairs directed_by edges with release_year edges.
            assert!(q.support.len() >= 2);
        }
    }

    #[test]
    fn clean_documents_invert_to_the_kb() {
        // templates_per_relation = 1, no conjunctions, no coreference: the
        // corpus must be exactly parseable back into triples.
        let config = GenConfig {
            templates_per_relation: 1,
            conjunction_rate: 0.0,
            coreference_rate: 0.0,
            ..small_config()
        };
        let kb = generate_kb(&config).unwrap();
        let docs = generate_documents(&kb, &config);
        assert_eq!(docs.stats.conj_applied, 0);
        assert_eq!(docs.stats.coref_applied, 0);
        let mut recovered: Vec<KBTriple> = Vec::new();
        for doc in &docs.docs {
            for sentence in &doc.sentences {
                // Inverse parser: match against each relation's first template.
                let mut matched = false;
                for rel in Relation::ALL {
                    let template = templates::templates_for(rel)[0];
                    if let Some(object) = invert_template(template, &doc.title, sentence) {
                        recovered.push(KBTriple::new(doc.title.clone(), rel.name(), object));
                        matched = true;
                        break;
                    }
                }
                assert!(matched, "unparseable sentence: {sentence}");
            }
        }
        assert_eq!(recovered.len(), kb.triples.len());
        let want: BTreeSet<(String, String, String)> = kb
            .triples
            .iter()
            .map(|t| (t.subject.clone(), t.relation.clone(), t.object.clone()))
            .collect();
        let got: BTreeSet<(String, String, String)> =
            recovered.into_iter().map(|t| (t.subject, t.relation, t.object)).collect();
        assert_eq!(want, got);
    }

    /// Rule-based inverse of `realize` for a single-object template.
    fn invert_template(template: &str, title: &str, sentence: &str) -> Option<String> {
        let tw: Vec<&str> = template.split_whitespace().collect();
        let title_words: Vec<String> = words_of(title);
        let sw: Vec<&str> = sentence.split_whitespace().collect();
        // Expand {m} in the template, leaving {o} as a hole.
        let mut expanded: Vec<&str> = Vec::new();
        for w in &tw {
            match *w {
                "{m}" => expanded.extend(title_words.iter().map(|s| s.as_str())),
                other => expanded.push(other),
            }
        }
        let hole = expanded.iter().position(|w| *w == "{o}")?;
        let tail = expanded.len() - hole - 1;
        if sw.len() < expanded.len() {
            return None;
        }
        if sw[..hole] != expanded[..hole] {
            return None;
        }
        if tail > 0 && sw[sw.len() - tail..] != expanded[expanded.len() - tail..] {
            return None;
        }
        Some(sw[hole..sw.len() - tail].join(" "))
    }

    #[test]
    fn coreference_spares_the_first_sentence() {
        let config = GenConfig {
            conjunction_rate: 0.0,
            coreference_rate: 1.0,
            ..small_config()
        };
        let kb = generate_kb(&config).unwrap();
        let docs = generate_documents(&kb, &config);
        for doc in &docs.docs {
            assert!(doc.sentences[0].contains(&doc.title));
            for s in &doc.sentences[1..] {
                assert!(!s.contains(&doc.title), "{s}");
                assert!(s.split_whitespace().any(|w| w == "it"), "{s}");
            }
        }
    }

    #[test]
    fn corruption_rates_track_configured_values() {
        let config = GenConfig { n_movies: 80, ..small_config() };
        let kb = generate_kb(&config).unwrap();
        let docs = generate_documents(&kb, &config);
        let s = &docs.stats;
        assert!(s.sentences >= 500);
        let conj = s.conj_applied as f64 / s.conj_opportunities as f64;
        let coref = s.coref_applied as f64 / s.coref_opportunities as f64;
        assert!((conj - 0.5).abs() < 0.06, "conj {conj}");
        assert!((coref - 0.8).abs() < 0.06, "coref {coref}");
    }

    #[test]
    fn realizations_cover_every_triple() {
        let config = small_config();
        let corpus = SynthCorpus::generate(&config).unwrap();
        assert_eq!(corpus.docs.realizations.len(), corpus.kb.triples.len());
        for (tid, &(doc, sentence)) in corpus.docs.realizations.iter().enumerate() {
            let d = &corpus.docs.docs[doc as usize];
            let t = &corpus.kb.triples[tid];
            assert_eq!(d.title, t.subject);
            assert!((sentence as usize) < d.sentences.len());
            // The object surface appears in the realizing sentence.
            let s = format!(" {} ", d.sentences[sentence as usize]);
            assert!(s.contains(&format!(" {} ", t.object)), "{} / {}", s, t.object);
        }
    }
}
