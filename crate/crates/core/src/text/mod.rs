//! Tokenization, coarse part-of-speech tagging, pronoun resolution and entity extraction.

pub mod coref;
pub mod entities;
pub mod lexicon;

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use coref::{resolve_in_gold_order, resolve_pronouns, resolve_pronouns_with, ResolvedStory, Substitution};
pub use entities::{assign_role, extract_entities, extract_entities_with, normalize_noun, Entity, Mention};
pub use lexicon::{Lexicon, LexiconTagger};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TextError {
    #[error("cannot tokenize an empty sentence")]
    EmptySentence,
    #[error("{0}")]
    Io(String),
    #[error("lexicon line {line}: {reason}")]
    BadLexicon { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tag {
    Noun,
    Pronoun,
    Verb,
    Other,
}

/// Syntactic role of a noun mention. Ranked `Subject > Object > Other`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    Subject,
    Object,
    Other,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::Subject, Role::Object, Role::Other];

    /// Higher is stronger.
    pub fn rank(self) -> u8 {
        match self {
            Role::Subject => 2,
            Role::Object => 1,
            Role::Other => 0,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Role::Subject => 0,
            Role::Object => 1,
            Role::Other => 2,
        }
    }

    pub fn stronger(self, other: Role) -> Role {
        if other.rank() > self.rank() {
            other
        } else {
            self
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Subject => "S",
            Role::Object => "O",
            Role::Other => "X",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub normalized: String,
    pub tag: Tag,
    /// Byte offsets into the source sentence.
    pub span: (usize, usize),
}

pub const PRONOUNS: [&str; 12] = [
    "he", "she", "it", "they", "him", "her", "them", "his", "hers", "its", "their", "theirs",
];

pub fn is_pronoun(word: &str) -> bool {
    PRONOUNS.contains(&word)
}

pub fn is_plural_pronoun(word: &str) -> bool {
    matches!(word, "they" | "them" | "their" | "theirs")
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

/// Splits a sentence into word tokens and single-character punctuation tokens.
///
/// Apostrophes and hyphens stay inside a word when they sit between two
/// alphanumeric characters. Tags are initialised to [`Tag::Other`].
pub fn tokenize(sentence: &str) -> Result<Vec<Token>, TextError> {
    if sentence.trim().is_empty() {
        return Err(TextError::EmptySentence);
    }
    let chars: Vec<(usize, char)> = sentence.char_indices().collect();
    let end_of = |k: usize| {
        chars
            .get(k + 1)
            .map(|&(b, _)| b)
            .unwrap_or(sentence.len())
    };
    let mut tokens = Vec::new();
    let mut k = 0;
    while k < chars.len() {
        let (start, c) = chars[k];
        if c.is_whitespace() {
            k += 1;
            continue;
        }
        if is_word_char(c) {
            let mut j = k;
            loop {
                if j + 1 < chars.len() && is_word_char(chars[j + 1].1) {
                    j += 1;
                } else if j + 2 < chars.len()
                    && matches!(chars[j + 1].1, '\'' | '-' | '\u{2019}')
                    && is_word_char(chars[j + 2].1)
                {
                    j += 2;
                } else {
                    break;
                }
            }
            tokens.push(make_token(sentence, start, end_of(j)));
            k = j + 1;
        } else {
            tokens.push(make_token(sentence, start, end_of(k)));
            k += 1;
        }
    }
    Ok(tokens)
}

fn make_token(sentence: &str, start: usize, end: usize) -> Token {
    let surface = &sentence[start..end];
    Token {
        surface: surface.to_string(),
        normalized: surface.to_lowercase(),
        tag: Tag::Other,
        span: (start, end),
    }
}

/// Assigns coarse tags to tokens in place.
pub trait Tagger: Send + Sync {
    fn tag(&self, tokens: &mut [Token]);
}

pub fn default_tagger() -> &'static LexiconTagger {
    static TAGGER: OnceLock<LexiconTagger> = OnceLock::new();
    TAGGER.get_or_init(|| LexiconTagger::new(Lexicon::bundled().clone()))
}

/// Tags tokens with the bundled lexicon tagger.
pub fn tag_pos(mut tokens: Vec<Token>) -> Vec<Token> {
    default_tagger().tag(&mut tokens);
    tokens
}

/// Tokenizes and tags one sentence.
pub fn analyze(sentence: &str, tagger: &dyn Tagger) -> Result<Vec<Token>, TextError> {
    let mut tokens = tokenize(sentence)?;
    tagger.tag(&mut tokens);
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn surfaces(s: &str) -> Vec<String> {
        tokenize(s).unwrap().into_iter().map(|t| t.surface).collect()
    }

    #[test]
    fn tokenizes_with_terminal_period() {
        assert_eq!(surfaces("Tom fed his dog."), ["Tom", "fed", "his", "dog", "."]);
    }

    #[test]
    fn whitespace_spans() {
        let toks = tokenize("a b").unwrap();
        assert_eq!(toks.len(), 2);
        assert_eq!(toks[0].span, (0, 1));
        assert_eq!(toks[1].span, (2, 3));
    }

    #[test]
    fn empty_is_an_error() {
        assert_eq!(tokenize(""), Err(TextError::EmptySentence));
        assert_eq!(tokenize("   "), Err(TextError::EmptySentence));
    }

    #[test]
    fn keeps_contractions_and_hyphens() {
        assert_eq!(
            surfaces("She didn't see the ice-cream truck!"),
            ["She", "didn't", "see", "the", "ice-cream", "truck", "!"]
        );
        assert_eq!(surfaces("Wait -- no."), ["Wait", "-", "-", "no", "."]);
    }

    #[test]
    fn spans_are_byte_offsets_for_unicode() {
        let s = "Zoë ate crème brûlée.";
        for t in tokenize(s).unwrap() {
            assert_eq!(&s[t.span.0..t.span.1], t.surface);
        }
    }

    #[test]
    fn closed_class_and_lexicon_tags() {
        let tag_of = |w: &str| tag_pos(tokenize(w).unwrap())[0].tag;
        assert_eq!(tag_of("he"), Tag::Pronoun);
        assert_eq!(tag_of("He"), Tag::Pronoun);
        assert_eq!(tag_of("dog"), Tag::Noun);
        assert_eq!(tag_of("quickly"), Tag::Other);
        assert_eq!(tag_of("fed"), Tag::Verb);
    }

    #[test]
    fn role_ranking() {
        assert_eq!(Role::Object.stronger(Role::Subject), Role::Subject);
        assert_eq!(Role::Object.stronger(Role::Other), Role::Object);
        assert_eq!(Role::Other.stronger(Role::Other), Role::Other);
    }
}
