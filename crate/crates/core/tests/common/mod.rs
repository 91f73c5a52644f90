#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use story_order::corpus::Story;
use story_order::embed::HashEmbedder;
use story_order::graph::GraphVariant;
use story_order::nn::{init_params, Model, ModelConfig};
use story_order::order::Ordering;
use story_order::pipeline::{prepare_story, GraphSettings, PreparedStory};

pub fn small_config(h: usize, d: usize, buckets: usize) -> ModelConfig {
    ModelConfig {
        hidden: h,
        embed_dim: d,
        steps: 3,
        entity_buckets: buckets,
    }
}

pub fn model_f64(cfg: ModelConfig, seed: u64) -> Model<f64> {
    let params = init_params(&cfg, &mut ChaCha8Rng::seed_from_u64(seed));
    Model::new(cfg, params).unwrap()
}

pub fn model_f32(cfg: ModelConfig, seed: u64) -> Model<f32> {
    let params = init_params(&cfg, &mut ChaCha8Rng::seed_from_u64(seed));
    Model::new(cfg, params).unwrap()
}

/// Five sentences whose entities take all three roles after pronoun
/// resolution: subjects, objects and a verbless mention.
pub fn role_story() -> Story {
    Story::new(
        "roles",
        vec![
            "Anna bought a bike.".into(),
            "She rode it to the park.".into(),
            "The park was quiet.".into(),
            "A bike, a park, a dog.".into(),
            "Anna liked the dog.".into(),
        ],
    )
    .unwrap()
}

pub fn three_story() -> Story {
    Story::new(
        "three",
        vec![
            "Tom found a key.".into(),
            "He opened the door with the key.".into(),
            "Tom, the key, the door.".into(),
        ],
    )
    .unwrap()
}

pub fn prepare(story: &Story, variant: GraphVariant, dim: usize) -> PreparedStory {
    let emb = HashEmbedder { dim, seed: 11 };
    prepare_story(story, GraphSettings { variant, coref: true }, &emb).unwrap()
}

/// O(n²) count of pairs ordered differently.
pub fn brute_inversions(pred: &Ordering, gold: &Ordering) -> usize {
    let n = pred.len();
    let mut inv = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            if pred.precedes(i, j) != gold.precedes(i, j) {
                inv += 1;
            }
        }
    }
    inv
}

/// Every permutation of `0..n` in lexicographic order.
pub fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    let mut seq: Vec<usize> = (0..n).collect();
    let mut out = vec![seq.clone()];
    while story_order::ensemble::next_permutation(&mut seq) {
        out.push(seq.clone());
    }
    out
}

/// Stories dense in pronouns that refer back to earlier nouns.
pub fn pronoun_corpus() -> Vec<Story> {
    let texts: [&[&str]; 6] = [
        &["Maria bought a kite.", "She flew it in the park.", "The wind took it away.", "Maria cried."],
        &["The farmer fed a horse.", "He brushed it slowly.", "Later he rode it home.", "The horse slept."],
        &["Ben found a wallet.", "He opened it.", "It held a ticket.", "Ben kept the ticket."],
        &["A girl painted a fence.", "She cleaned the brush.", "Then she painted it again.", "The girl smiled."],
        &["Sam baked a pie.", "He cut it.", "His sister ate it.", "Sam laughed."],
        &["The teacher lost a book.", "She searched the school.", "A student found it.", "He returned the book."],
    ];
    texts
        .iter()
        .enumerate()
        .map(|(i, t)| Story::new(format!("pron-{i}"), t.iter().map(|s| s.to_string()).collect()).unwrap())
        .collect()
}

const NAMES: [&str; 6] = ["Anna", "Tom", "Maria", "Ben", "Lucy", "Sam"];
const NOUNS: [&str; 12] = [
    "dog", "bike", "park", "cake", "house", "river", "book", "car", "garden", "kite", "box", "ball",
];
const VERBS: [&str; 10] = [
    "found", "bought", "washed", "saw", "took", "fixed", "painted", "lost", "liked", "sold",
];
const PRONOUNS: [&str; 6] = ["He", "She", "It", "They", "he", "it"];

/// A random story of 2..=8 sentences mixing names, nouns, pronouns and
/// verbless sentences, for invariant sweeps.
pub fn random_story(rng: &mut impl rand::Rng, id: &str) -> Story {
    use rand::seq::SliceRandom;
    let n = rng.gen_range(2..=8);
    let mut sentences = Vec::with_capacity(n);
    for _ in 0..n {
        let subj = match rng.gen_range(0..3) {
            0 => NAMES.choose(rng).unwrap().to_string(),
            1 => format!("The {}", NOUNS.choose(rng).unwrap()),
            _ => PRONOUNS.choose(rng).unwrap().to_string(),
        };
        let s = match rng.gen_range(0..5) {
            0 => format!("{}, the {}.", NOUNS.choose(rng).unwrap(), NOUNS.choose(rng).unwrap()),
            1 => format!("{subj} {} it.", VERBS.choose(rng).unwrap()),
            _ => format!(
                "{subj} {} the {} near the {}.",
                VERBS.choose(rng).unwrap(),
                NOUNS.choose(rng).unwrap(),
                NOUNS.choose(rng).unwrap()
            ),
        };
        let mut c = s.chars();
        let first = c.next().unwrap().to_uppercase().collect::<String>();
        sentences.push(first + c.as_str());
    }
    Story::new(id, sentences).unwrap()
}
