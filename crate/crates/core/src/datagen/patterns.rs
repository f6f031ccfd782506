//! Surface question patterns, several per question class. `[X]` marks the
//! subject entity slot.

use super::QuestionClass;

const WRITER_TO_MOVIE: &[&str] = &[
    "what movies did [X] write?",
    "which films did [X] write?",
    "[X] was the writer of which movies?",
    "what is a film written by [X]?",
];

const TAG_TO_MOVIE: &[&str] = &[
    "which films can be described by [X]?",
    "what movies are about [X]?",
    "which movies match the description [X]?",
    "name a film that people describe as [X]",
];

const MOVIE_TO_YEAR: &[&str] = &[
    "what year was the movie [X] released?",
    "when did [X] come out?",
    "in which year was [X] released?",
    "what was the release year of [X]?",
];

const MOVIE_TO_WRITER: &[&str] = &[
    "who wrote the film [X]?",
    "who is the writer of [X]?",
    "which person wrote the movie [X]?",
    "who was the screenwriter for [X]?",
];

const MOVIE_TO_TAGS: &[&str] = &[
    "describe the movie [X] in a few words",
    "which words describe the film [X]?",
    "what is [X] known for being?",
    "how would people describe [X]?",
];

const MOVIE_TO_LANGUAGE: &[&str] = &[
    "what language is [X] in?",
    "which language was the film [X] made in?",
    "what is the language of [X]?",
    "in what language is [X] spoken?",
];

const MOVIE_TO_IMDB_VOTES: &[&str] = &[
    "how popular is the movie [X]?",
    "how watched is the film [X]?",
    "how many people have seen [X]?",
    "what is the popularity of [X]?",
];

const MOVIE_TO_IMDB_RATING: &[&str] = &[
    "how well rated is the movie [X]?",
    "what do critics think of [X]?",
    "what sort of rating does [X] hold?",
    "how do reviewers rate the film [X]?",
];

const MOVIE_TO_GENRE: &[&str] = &[
    "what genre is the movie [X]?",
    "which genre does [X] belong to?",
    "what kind of film is [X]?",
    "what genre would you call [X]?",
];

const MOVIE_TO_DIRECTOR: &[&str] = &[
    "who directed [X]?",
    "who was the director of [X]?",
    "which person directed the movie [X]?",
    "the film [X] was directed by whom?",
];

const MOVIE_TO_ACTORS: &[&str] = &[
    "who starred in [X]?",
    "who acted in the movie [X]?",
    "which actors appeared in [X]?",
    "who are the stars of [X]?",
];

const DIRECTOR_TO_MOVIE: &[&str] = &[
    "which films did [X] direct?",
    "what movies was [X] the director of?",
    "[X] directed which movies?",
    "name a film directed by [X]",
];

const ACTOR_TO_MOVIE: &[&str] = &[
    "what movies did [X] star in?",
    "which films did [X] appear in?",
    "what did [X] act in?",
    "name a movie starring [X]",
];

const DIRECTOR_TO_YEAR: &[&str] = &[
    "what year was the film directed by [X] released?",
    "when did the movie directed by [X] come out?",
    "the film directed by [X] came out in which year?",
    "in which year was a movie by [X] released?",
];

pub(crate) fn patterns_for(class: QuestionClass) -> &'static [&'static str] {
    match class {
        QuestionClass::WriterToMovie => WRITER_TO_MOVIE,
        QuestionClass::TagToMovie => TAG_TO_MOVIE,
        QuestionClass::MovieToYear => MOVIE_TO_YEAR,
        QuestionClass::MovieToWriter => MOVIE_TO_WRITER,
        QuestionClass::MovieToTags => MOVIE_TO_TAGS,
        QuestionClass::MovieToLanguage => MOVIE_TO_LANGUAGE,
        QuestionClass::MovieToImdbVotes => MOVIE_TO_IMDB_VOTES,
        QuestionClass::MovieToImdbRating => MOVIE_TO_IMDB_RATING,
        QuestionClass::MovieToGenre => MOVIE_TO_GENRE,
        QuestionClass::MovieToDirector => MOVIE_TO_DIRECTOR,
        QuestionClass::MovieToActors => MOVIE_TO_ACTORS,
        QuestionClass::DirectorToMovie => DIRECTOR_TO_MOVIE,
        QuestionClass::ActorToMovie => ACTOR_TO_MOVIE,
        QuestionClass::DirectorToYear => DIRECTOR_TO_YEAR,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_class_has_at_least_three_patterns() {
        for class in QuestionClass::ALL {
            let bank = patterns_for(class);
            assert!(bank.len() >= 3, "{:?}", class);
            for p in bank {
                assert_eq!(p.matches("[X]").count(), 1, "{p}");
            }
        }
    }
}
