use std::collections::HashMap;
use std::path::Path;
use std::sync::OnceLock;

use super::{is_pronoun, Tag, Tagger, TextError, Token};

const BUNDLED: &str = include_str!("../../data/lexicon.tsv");

/// Flat word → tag table. File format: one `word<TAB>tag` per line,
/// tag one of `noun`, `verb`, `other`.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: HashMap<String, Tag>,
}

impl Lexicon {
    pub fn bundled() -> &'static Lexicon {
        static LEXICON: OnceLock<Lexicon> = OnceLock::new();
        LEXICON.get_or_init(|| Lexicon::parse(BUNDLED).expect("bundled lexicon parses"))
    }

    pub fn parse(text: &str) -> Result<Self, TextError> {
        let mut entries = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (word, tag) = line.split_once('\t').ok_or_else(|| TextError::BadLexicon {
                line: i + 1,
                reason: "expected word<TAB>tag".into(),
            })?;
            let tag = match tag.trim().to_ascii_lowercase().as_str() {
                "noun" | "n" => Tag::Noun,
                "verb" | "v" => Tag::Verb,
                "pronoun" | "pron" => Tag::Pronoun,
                "other" | "x" => Tag::Other,
                other => {
                    return Err(TextError::BadLexicon {
                        line: i + 1,
                        reason: format!("unknown tag {other:?}"),
                    })
                }
            };
            entries.insert(word.trim().to_lowercase(), tag);
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, TextError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TextError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn get(&self, word: &str) -> Option<Tag> {
        self.entries.get(word).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Lexicon lookup with plural folding and suffix fallbacks.
///
/// Order: closed-class pronouns, punctuation and digits, exact lexicon
/// entry, plural of a lexicon noun, suffix rules, capitalised unknown word
/// (proper noun), then [`Tag::Other`].
#[derive(Debug, Clone)]
pub struct LexiconTagger {
    lexicon: Lexicon,
}

impl LexiconTagger {
    pub fn new(lexicon: Lexicon) -> Self {
        Self { lexicon }
    }

    pub fn tag_word(&self, surface: &str) -> Tag {
        let lower = surface.to_lowercase();
        if is_pronoun(&lower) {
            return Tag::Pronoun;
        }
        if !lower.chars().any(char::is_alphabetic) {
            return Tag::Other;
        }
        if let Some(tag) = self.lexicon.get(&lower) {
            return tag;
        }
        let plural_stems = [lower.strip_suffix('s'), lower.strip_suffix("es")];
        if plural_stems
            .into_iter()
            .flatten()
            .any(|stem| self.lexicon.get(stem) == Some(Tag::Noun))
        {
            return Tag::Noun;
        }
        if lower.ends_with("ly") {
            return Tag::Other;
        }
        if lower.len() > 4 && (lower.ends_with("ed") || lower.ends_with("ing")) {
            return Tag::Verb;
        }
        const NOUN_SUFFIXES: [&str; 6] = ["tion", "ment", "ness", "ity", "ship", "ism"];
        if NOUN_SUFFIXES.iter().any(|s| lower.len() > s.len() + 2 && lower.ends_with(s)) {
            return Tag::Noun;
        }
        if surface.chars().next().is_some_and(char::is_uppercase) {
            return Tag::Noun;
        }
        Tag::Other
    }
}

impl Tagger for LexiconTagger {
    fn tag(&self, tokens: &mut [Token]) {
        for t in tokens {
            t.tag = self.tag_word(&t.surface);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_lexicon_covers_generator_vocabulary() {
        let lex = Lexicon::bundled();
        for w in crate::corpus::OBJECTS.iter().chain(crate::corpus::PEOPLE.iter()) {
            assert_eq!(lex.get(w), Some(Tag::Noun), "{w}");
        }
        for w in crate::corpus::PAST_VERBS {
            assert_eq!(lex.get(w), Some(Tag::Verb), "{w}");
        }
    }

    #[test]
    fn suffix_rules_and_proper_nouns() {
        let t = LexiconTagger::new(Lexicon::default());
        assert_eq!(t.tag_word("gently"), Tag::Other);
        assert_eq!(t.tag_word("jumped"), Tag::Verb);
        assert_eq!(t.tag_word("celebration"), Tag::Noun);
        assert_eq!(t.tag_word("Anna"), Tag::Noun);
        assert_eq!(t.tag_word("zorp"), Tag::Other);
        assert_eq!(t.tag_word("42"), Tag::Other);
    }

    #[test]
    fn plural_nouns_fold_to_lexicon_entry() {
        let t = default_tagger_for_test();
        assert_eq!(t.tag_word("dogs"), Tag::Noun);
        assert_eq!(t.tag_word("boxes"), Tag::Noun);
        assert_eq!(t.tag_word("bikes"), Tag::Noun);
    }

    fn default_tagger_for_test() -> LexiconTagger {
        LexiconTagger::new(Lexicon::bundled().clone())
    }

    #[test]
    fn parse_errors_name_the_line() {
        let err = Lexicon::parse("dog\tnoun\ncat noun\n").unwrap_err();
        assert_eq!(
            err,
            TextError::BadLexicon {
                line: 2,
                reason: "expected word<TAB>tag".into()
            }
        );
        assert!(Lexicon::parse("dog\tadjective\n").is_err());
    }
}
