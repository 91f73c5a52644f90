//! Rule-based pronoun replacement.
//!
//! Each third-person pronoun is replaced by the nearest preceding noun that
//! agrees in number. The search runs backward through the same sentence and
//! then through earlier sentences. In an earlier sentence, a candidate whose
//! role matches the pronoun's role is preferred over a closer one, so that
//! "Anna bought a bike. She rode it home." links She→Anna and it→bike.
//! Nouns introduced by earlier replacements are candidates for later
//! sentences only.

use serde::{Deserialize, Serialize};

use super::{
    analyze, assign_role, default_tagger, is_plural_pronoun, normalize_noun, Role, Tag, Tagger,
    TextError, Token,
};
use crate::corpus::Story;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Substitution {
    pub sentence: usize,
    pub token: usize,
    pub pronoun: String,
    /// Surface text written in place of the pronoun.
    pub replacement: String,
    /// Canonical entity key of the antecedent.
    pub entity: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedStory {
    /// Input story, untouched.
    pub original: Story,
    /// Same story with pronouns replaced.
    pub story: Story,
    pub substitutions: Vec<Substitution>,
}

impl ResolvedStory {
    /// Wraps a story without resolving anything (pre-resolved corpora, coref off).
    pub fn unresolved(story: Story) -> Self {
        Self {
            original: story.clone(),
            story,
            substitutions: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.story.len()
    }

    pub fn is_empty(&self) -> bool {
        self.story.is_empty()
    }

    /// Re-presents the sentences so that new position `q` holds old sentence `perm[q]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut inverse = vec![0; perm.len()];
        for (q, &old) in perm.iter().enumerate() {
            inverse[old] = q;
        }
        let permute_story = |s: &Story| Story {
            id: s.id.clone(),
            sentences: perm.iter().map(|&i| s.sentences[i].clone()).collect(),
            gold_order: perm.iter().map(|&i| s.gold_order[i]).collect(),
        };
        let mut substitutions: Vec<Substitution> = self
            .substitutions
            .iter()
            .map(|sub| Substitution {
                sentence: inverse[sub.sentence],
                ..sub.clone()
            })
            .collect();
        substitutions.sort_by_key(|s| (s.sentence, s.token));
        Self {
            original: permute_story(&self.original),
            story: permute_story(&self.story),
            substitutions,
        }
    }
}

fn is_plural_noun(tok: &Token) -> bool {
    let lower = tok.surface.to_lowercase();
    lower.len() > 3 && lower.ends_with('s') && !lower.ends_with("ss")
}

/// Resolves pronouns reading the story in its gold order, then presents the
/// result in the story's own sentence order. This is how a corpus resolved
/// before shuffling looks, and it makes resolution independent of the
/// presentation order.
pub fn resolve_in_gold_order(story: &Story) -> Result<ResolvedStory, TextError> {
    let gold = Story {
        id: story.id.clone(),
        sentences: story.gold_sentences(),
        gold_order: (0..story.len()).collect(),
    };
    Ok(resolve_pronouns(&gold)?.permuted(&story.gold_order))
}

pub fn resolve_pronouns(story: &Story) -> Result<ResolvedStory, TextError> {
    resolve_pronouns_with(story, default_tagger())
}

pub fn resolve_pronouns_with(
    story: &Story,
    tagger: &dyn Tagger,
) -> Result<ResolvedStory, TextError> {
    let mut analyzed: Vec<Vec<Token>> = story
        .sentences
        .iter()
        .map(|s| analyze(s, tagger))
        .collect::<Result<_, _>>()?;
    let mut substitutions = Vec::new();
    let mut replaced: Vec<Vec<bool>> = analyzed.iter().map(|t| vec![false; t.len()]).collect();

    for si in 0..analyzed.len() {
        for ti in 0..analyzed[si].len() {
            let tok = &analyzed[si][ti];
            if tok.tag != Tag::Pronoun {
                continue;
            }
            let plural = is_plural_pronoun(&tok.normalized);
            let role = assign_role(&analyzed[si], ti);
            let Some((asi, ati)) = find_antecedent(&analyzed, &replaced[si], si, ti, plural, role) else {
                log::debug!(
                    "story {:?}: no antecedent for {:?} in sentence {si}",
                    story.id,
                    tok.surface
                );
                continue;
            };
            let replacement = analyzed[asi][ati].surface.clone();
            let pronoun = std::mem::replace(&mut analyzed[si][ti].surface, replacement.clone());
            let target = &mut analyzed[si][ti];
            target.normalized = replacement.to_lowercase();
            target.tag = Tag::Noun;
            replaced[si][ti] = true;
            substitutions.push(Substitution {
                sentence: si,
                token: ti,
                pronoun,
                entity: normalize_noun(&replacement),
                replacement,
            });
        }
    }

    let sentences = story
        .sentences
        .iter()
        .zip(&analyzed)
        .enumerate()
        .map(|(si, (text, tokens))| {
            let mut out = text.clone();
            // replace right to left so earlier spans stay valid
            for sub in substitutions.iter().rev().filter(|s| s.sentence == si) {
                let (a, b) = tokens[sub.token].span;
                out.replace_range(a..b, &sub.replacement);
            }
            out
        })
        .collect();

    Ok(ResolvedStory {
        original: story.clone(),
        story: Story {
            id: story.id.clone(),
            sentences,
            gold_order: story.gold_order.clone(),
        },
        substitutions,
    })
}

fn find_antecedent(
    analyzed: &[Vec<Token>],
    replaced_here: &[bool],
    si: usize,
    ti: usize,
    plural: bool,
    role: Role,
) -> Option<(usize, usize)> {
    let agrees = |t: &Token| t.tag == Tag::Noun && is_plural_noun(t) == plural;

    if let Some(j) = (0..ti)
        .rev()
        .find(|&j| !replaced_here[j] && agrees(&analyzed[si][j]))
    {
        return Some((si, j));
    }
    for prev in (0..si).rev() {
        let tokens = &analyzed[prev];
        let candidates: Vec<usize> = (0..tokens.len()).rev().filter(|&j| agrees(&tokens[j])).collect();
        if candidates.is_empty() {
            continue;
        }
        let pick = candidates
            .iter()
            .copied()
            .find(|&j| assign_role(tokens, j) == role)
            .unwrap_or(candidates[0]);
        return Some((prev, pick));
    }
    None
}
