use std::collections::BTreeSet;

use proptest::prelude::*;
use story_order::corpus::{generate_synthetic, shuffle_story, split_corpus, Story};

fn story(n: usize) -> Story {
    Story::new("s", (0..n).map(|i| format!("Sentence number {i}.")).collect()).unwrap()
}

proptest! {
    #[test]
    fn shuffling_round_trips(n in 2usize..10, seed in any::<u64>()) {
        let s = story(n);
        let sh = shuffle_story(&s, seed);
        prop_assert_eq!(sh.gold_sentences(), s.sentences.clone());
        let again = sh.to_story();
        prop_assert_eq!(again.gold_sentences(), s.sentences.clone());
        prop_assert_eq!(shuffle_story(&s, seed), sh);
    }

    #[test]
    fn splits_partition_the_corpus(n in 3usize..200, seed in any::<u64>()) {
        let stories = generate_synthetic(n, 4, 50, 1);
        let split = split_corpus(&stories, (0.8, 0.1, 0.1), seed).unwrap();
        let ids = |v: &[Story]| v.iter().map(|s| s.id.clone()).collect::<BTreeSet<_>>();
        let (a, b, c) = (ids(&split.train), ids(&split.validation), ids(&split.test));
        prop_assert_eq!(a.len() + b.len() + c.len(), n);
        prop_assert!(a.is_disjoint(&b) && a.is_disjoint(&c) && b.is_disjoint(&c));
        prop_assert_eq!(split.train.len(), (n as f64 * 0.8).floor() as usize);
        let all: BTreeSet<_> = a.union(&b).chain(c.iter()).cloned().collect();
        prop_assert_eq!(all, ids(&stories));
    }
}

#[test]
fn full_scale_split_sizes() {
    let n = 98_162usize;
    let train = (n as f64 * 0.8).floor() as usize;
    let val = (n as f64 * 0.1).floor() as usize;
    assert_eq!((train, val, n - train - val), (78_529, 9_816, 9_817));
}
