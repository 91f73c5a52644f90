mod common;

use common::all_permutations;
use proptest::prelude::*;
use story_order::ensemble::{
    fuse, majority_order, majority_order_exhaustive, pair_votes, EnsembleError, PairVoteMatrix,
};
use story_order::order::Ordering;

fn seq(s: &[usize]) -> Ordering {
    Ordering::from_sequence(s).unwrap()
}

fn perm(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..n).collect::<Vec<_>>()).prop_shuffle()
}

fn orderings(n: usize, k: std::ops::Range<usize>) -> impl Strategy<Value = Vec<Ordering>> {
    prop::collection::vec(perm(n).prop_map(|p| seq(&p)), k)
}

#[test]
fn matches_exhaustive_search_on_all_triples_up_to_four() {
    for n in 1..=4 {
        let perms: Vec<Ordering> = all_permutations(n).iter().map(|p| seq(p)).collect();
        for a in &perms {
            for b in &perms {
                for c in &perms {
                    let v = pair_votes(&[a.clone(), b.clone(), c.clone()]).unwrap();
                    assert_eq!(
                        majority_order(&v).unwrap().sequence(),
                        majority_order_exhaustive(&v).unwrap().sequence()
                    );
                }
            }
        }
    }
}

#[test]
fn footnote_case_and_condorcet_cycle() {
    let v = pair_votes(&[seq(&[0, 1]), seq(&[0, 1]), seq(&[1, 0])]).unwrap();
    assert_eq!((v.get(0, 1), v.get(1, 0)), (2, 1));
    assert_eq!(majority_order(&v).unwrap().sequence(), vec![0, 1]);

    let inputs = [seq(&[0, 1, 2]), seq(&[1, 2, 0]), seq(&[2, 0, 1])];
    let v = pair_votes(&inputs).unwrap();
    let out = majority_order(&v).unwrap();
    assert_eq!(v.score(&out), 5);
    assert!(inputs.iter().any(|i| i.same_order(&out)));
    for p in all_permutations(3) {
        assert!(v.score(&seq(&p)) <= 5);
    }
}

#[test]
fn size_limits() {
    let long: Vec<usize> = (0..11).collect();
    let v = pair_votes(&[seq(&long)]).unwrap();
    assert_eq!(majority_order(&v), Err(EnsembleError::TooLarge(11)));
    assert_eq!(fuse(&[seq(&long)], true).unwrap().sequence(), long);
    assert!(pair_votes(&[seq(&[0, 1]), seq(&[0, 1, 2])]).is_err());
    assert_eq!(pair_votes(&[]), Err(EnsembleError::Empty));
}

#[test]
fn even_vote_ties_are_resolved_deterministically() {
    let v = pair_votes(&[seq(&[0, 1, 2]), seq(&[2, 1, 0])]).unwrap();
    assert_eq!(majority_order(&v).unwrap().sequence(), vec![0, 1, 2]);
}

#[test]
fn acyclic_majorities_are_all_realised() {
    // strict majorities 0<1, 1<2, 0<2, 3 anywhere consistent
    let rows = vec![
        vec![0, 3, 2, 3],
        vec![0, 0, 3, 2],
        vec![1, 0, 0, 2],
        vec![0, 1, 1, 0],
    ];
    let v = PairVoteMatrix::from_counts(3, rows).unwrap();
    let out = majority_order(&v).unwrap();
    for i in 0..4 {
        for j in 0..4 {
            if i != j && v.strict_majority(i, j) {
                assert!(out.precedes(i, j), "{i} before {j} in {:?}", out.sequence());
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn random_triples_of_five(inputs in orderings(5, 3..4)) {
        let v = pair_votes(&inputs).unwrap();
        v.validate().unwrap();
        let out = majority_order(&v).unwrap();
        prop_assert_eq!(out.sequence(), majority_order_exhaustive(&v).unwrap().sequence());
        for o in &inputs {
            prop_assert!(v.score(&out) >= v.score(o));
        }
    }

    #[test]
    fn unanimity_and_round_trip(p in perm(6), k in 1usize..5) {
        let o = seq(&p);
        let inputs = vec![o.clone(); k];
        prop_assert_eq!(fuse(&inputs, false).unwrap().sequence(), o.sequence());
        let v = pair_votes(std::slice::from_ref(&o)).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                if i != j {
                    prop_assert_eq!(v.get(i, j), u32::from(o.precedes(i, j)));
                }
            }
        }
    }

    #[test]
    fn any_number_of_voters(inputs in orderings(5, 1..7)) {
        let v = pair_votes(&inputs).unwrap();
        prop_assert_eq!(v.k(), inputs.len());
        prop_assert_eq!(majority_order(&v).unwrap().sequence(), majority_order_exhaustive(&v).unwrap().sequence());
    }
}
