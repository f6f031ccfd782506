//! Pronounceable unique entity names built from sampled syllables, kept
//! clear of every word the templates and patterns use.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

const ONSETS: &[&str] = &[
    "b", "br", "d", "dr", "f", "g", "gr", "k", "kr", "l", "m", "n", "p", "pr", "r", "s", "st",
    "t", "tr", "v", "z", "sh", "ch",
];
const NUCLEI: &[&str] = &["a", "e", "i", "o", "u", "ai", "ea", "io", "ou"];
const CODAS: &[&str] = &["", "", "", "n", "r", "s", "l", "m", "x"];

pub(crate) struct NameForge {
    used: BTreeSet<String>,
    reserved: BTreeSet<String>,
}

impl NameForge {
    pub(crate) fn new(reserved: BTreeSet<String>) -> Self {
        NameForge { used: BTreeSet::new(), reserved }
    }

    /// A fresh lowercase word, unique across every entity generated so far.
    pub(crate) fn word(&mut self, rng: &mut ChaCha8Rng) -> String {
        for attempt in 0..64 {
            let syllables = rng.gen_range(2..=3);
            let mut w = String::new();
            for s in 0..syllables {
                w.push_str(ONSETS[rng.gen_range(0..ONSETS.len())]);
                w.push_str(NUCLEI[rng.gen_range(0..NUCLEI.len())]);
                if s + 1 == syllables {
                    w.push_str(CODAS[rng.gen_range(0..CODAS.len())]);
                }
            }
            if attempt > 32 {
                w = format!("{w}{attempt}");
            }
            if !self.used.contains(&w) && !self.reserved.contains(&w) {
                self.used.insert(w.clone());
                return w;
            }
        }
        unreachable!("syllable space exhausted");
    }

    fn capitalize(word: &str) -> String {
        let mut chars = word.chars();
        match chars.next() {
            Some(c) => c.to_uppercase().chain(chars).collect(),
            None => String::new(),
        }
    }

    /// Two-word capitalized person name.
    pub(crate) fn person(&mut self, rng: &mut ChaCha8Rng) -> String {
        let first = Self::capitalize(&self.word(rng));
        let last = Self::capitalize(&self.word(rng));
        format!("{first} {last}")
    }

    /// One- or two-word capitalized movie title.
    pub(crate) fn title(&mut self, rng: &mut ChaCha8Rng) -> String {
        let words = rng.gen_range(1..=2);
        let parts: Vec<String> = (0..words).map(|_| Self::capitalize(&self.word(rng))).collect();
        parts.join(" ")
    }

    /// Single lowercase word (tags, genres, languages).
    pub(crate) fn single(&mut self, rng: &mut ChaCha8Rng) -> String {
        self.word(rng)
    }
}
