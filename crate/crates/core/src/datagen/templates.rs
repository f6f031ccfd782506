//! Sentence templates used to realize KB facts as document text.
//!
//! `{m}` is the movie, `{o}` the object. Exactly one of each per template,
//! and no template contains the word "and" (conjunction merging owns it) or
//! any digit. The first template of each relation is the "one template"
//! configuration; the rest only come in at higher template counts.

use super::Relation;

const DIRECTED_BY: &[&str] = &[
    "{m} was directed by {o}",
    "{m} is a film directed by {o}",
    "the movie {m} was directed by {o}",
    "{o} directed {m}",
    "{o} was the director of {m}",
    "{m} was helmed by {o}",
    "direction of {m} was handled by {o}",
    "{o} served as the director of {m}",
    "the director of {m} was {o}",
    "{o} took the director chair for {m}",
];

const WRITTEN_BY: &[&str] = &[
    "{m} was written by {o}",
    "the screenplay of {m} was written by {o}",
    "{o} wrote {m}",
    "{o} was the writer of {m}",
    "{m} was penned by {o}",
    "the script for {m} came from {o}",
    "{o} authored the story of {m}",
    "writing credits for {m} go to {o}",
    "the writer of {m} was {o}",
    "{m} is based on a script by {o}",
];

const STARRED_ACTORS: &[&str] = &[
    "{m} starred {o}",
    "{o} starred in {m}",
    "{o} appeared in {m}",
    "{m} features {o}",
    "{o} played a leading role in {m}",
    "the cast of {m} included {o}",
    "{o} acted in {m}",
    "{m} showcased {o}",
    "one of the stars of {m} was {o}",
    "{o} headlined {m}",
];

const RELEASE_YEAR: &[&str] = &[
    "{m} came out in {o}",
    "{m} was released in {o}",
    "{m} premiered in {o}",
    "{m} hit theaters in {o}",
    "the release of {m} happened in {o}",
    "{o} saw the release of {m}",
    "{m} first screened in {o}",
    "{m} dates from {o}",
    "{m} arrived in cinemas in {o}",
    "the year {o} brought {m} to the screen",
];

const IN_LANGUAGE: &[&str] = &[
    "{m} is in {o}",
    "{m} was filmed in {o}",
    "the dialogue of {m} is in {o}",
    "{o} is the language of {m}",
    "{m} was shot in the {o} language",
    "{m} was produced in {o}",
    "the spoken language of {m} is {o}",
    "audiences hear {o} throughout {m}",
    "{m} plays in {o}",
    "{m} uses the {o} language",
];

const HAS_GENRE: &[&str] = &[
    "{m} is a {o} film",
    "{m} belongs to the {o} genre",
    "{m} is classified as {o}",
    "the genre of {m} is {o}",
    "{m} falls under {o}",
    "{o} best describes the genre of {m}",
    "critics file {m} under {o}",
    "{m} counts as a {o} picture",
    "as a genre {m} is {o}",
    "{m} sits in the {o} category",
];

const HAS_TAGS: &[&str] = &[
    "{m} can be described by {o}",
    "viewers tagged {m} with {o}",
    "{m} is associated with {o}",
    "{o} is a word often used for {m}",
    "a common label for {m} is {o}",
    "{m} evokes {o}",
    "people remember {m} for being {o}",
    "{o} comes up when discussing {m}",
    "{m} carries the tag {o}",
    "talk about {m} often mentions {o}",
];

const HAS_IMDB_RATING: &[&str] = &[
    "{m} is rated as {o}",
    "critics consider {m} to be {o}",
    "the rating reputation of {m} is {o}",
    "on review sites {m} counts as {o}",
    "{m} scores as {o} with reviewers",
    "reviewers describe {m} as {o}",
    "the critical standing of {m} is {o}",
    "{m} holds a reputation of being {o}",
    "rating wise {m} is {o}",
    "{m} ranks as {o} among critics",
];

const HAS_IMDB_VOTES: &[&str] = &[
    "{m} is {o} among audiences",
    "in terms of popularity {m} is {o}",
    "{m} counts as {o} with viewers",
    "the audience reach of {m} is {o}",
    "{m} remains {o} to the public",
    "by vote count {m} is {o}",
    "viewership makes {m} {o}",
    "{m} stands as {o} in audience numbers",
    "the public finds {m} {o}",
    "popularity wise {m} is {o}",
];

pub(crate) fn templates_for(relation: Relation) -> &'static [&'static str] {
    match relation {
        Relation::DirectedBy => DIRECTED_BY,
        Relation::WrittenBy => WRITTEN_BY,
        Relation::StarredActors => STARRED_ACTORS,
        Relation::ReleaseYear => RELEASE_YEAR,
        Relation::InLanguage => IN_LANGUAGE,
        Relation::HasGenre => HAS_GENRE,
        Relation::HasTags => HAS_TAGS,
        Relation::HasImdbRating => HAS_IMDB_RATING,
        Relation::HasImdbVotes => HAS_IMDB_VOTES,
    }
}
