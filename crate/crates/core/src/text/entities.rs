use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{analyze, default_tagger, ResolvedStory, Role, Tag, Tagger, TextError, Token};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub sentence: usize,
    pub token: usize,
    pub role: Role,
}

/// A noun shared by at least two sentences.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub canonical: String,
    pub mentions: Vec<Mention>,
}

impl Entity {
    /// Strongest role per sentence the entity appears in.
    pub fn sentence_roles(&self) -> BTreeMap<usize, Role> {
        let mut roles: BTreeMap<usize, Role> = BTreeMap::new();
        for m in &self.mentions {
            roles
                .entry(m.sentence)
                .and_modify(|r| *r = r.stronger(m.role))
                .or_insert(m.role);
        }
        roles
    }

    pub fn sentence_count(&self) -> usize {
        self.sentence_roles().len()
    }
}

/// Entity key for a noun surface: lowercased, with one trailing plural "s"
/// removed (but not from "ss" endings or words of three letters or fewer).
pub fn normalize_noun(surface: &str) -> String {
    let lower = surface.to_lowercase();
    if lower.len() > 3 && lower.ends_with('s') && !lower.ends_with("ss") {
        lower[..lower.len() - 1].to_string()
    } else {
        lower
    }
}

/// Role of the token at `index`: before the first verb is Subject, after it
/// Object; sentences without a verb give Other.
pub fn assign_role(tokens: &[Token], index: usize) -> Role {
    match tokens.iter().position(|t| t.tag == Tag::Verb) {
        None => Role::Other,
        Some(v) if index < v => Role::Subject,
        Some(v) if index > v => Role::Object,
        Some(_) => Role::Other,
    }
}

/// Entities of a resolved story, extracted from its pronoun-replaced text.
pub fn extract_entities(resolved: &ResolvedStory) -> Result<Vec<Entity>, TextError> {
    extract_entities_with(&resolved.story.sentences, default_tagger())
}

/// Collects every noun, then drops those not found in at least two
/// different sentences. Output is sorted by canonical form.
pub fn extract_entities_with(
    sentences: &[String],
    tagger: &dyn Tagger,
) -> Result<Vec<Entity>, TextError> {
    let mut by_key: BTreeMap<String, Vec<Mention>> = BTreeMap::new();
    for (si, sentence) in sentences.iter().enumerate() {
        let tokens = analyze(sentence, tagger)?;
        for (ti, tok) in tokens.iter().enumerate() {
            if tok.tag != Tag::Noun {
                continue;
            }
            by_key
                .entry(normalize_noun(&tok.surface))
                .or_default()
                .push(Mention {
                    sentence: si,
                    token: ti,
                    role: assign_role(&tokens, ti),
                });
        }
    }
    Ok(by_key
        .into_iter()
        .map(|(canonical, mentions)| Entity {
            canonical,
            mentions,
        })
        .filter(|e| e.mentions.len() >= 2 && e.sentence_count() >= 2)
        .collect())
}
