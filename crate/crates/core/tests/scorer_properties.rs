use jointbeam::models::HashTransducer;
use jointbeam::oracle::{
    brute_force_ctc, brute_force_ctc_distribution, brute_force_rnnt, rnnt_partial_sums,
};
use jointbeam::scorers::{
    ctc_prefix_batch, ctc_prefix_init, ctc_prefix_score, rnnt_prefix_batch, rnnt_prefix_init,
    rnnt_prefix_score, Next,
};
use jointbeam::synth::{random_grid, random_transducer};
use jointbeam::vocab::all_sequences;
use jointbeam::{CtcGrid, TokenSeq, TransducerModel};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn grid(seed: u64, frames: usize, v: usize) -> CtcGrid {
    random_grid(&mut ChaCha8Rng::seed_from_u64(seed), frames, v).unwrap()
}

fn transducer(seed: u64, frames: usize, v: usize, hash: bool) -> TransducerModel {
    if hash {
        TransducerModel::Hash(HashTransducer {
            vocab_size: v,
            frames,
            seed,
            concentration: 2.5,
        })
    } else {
        TransducerModel::Table(
            random_transducer(&mut ChaCha8Rng::seed_from_u64(seed), frames, v, 4).unwrap(),
        )
    }
}

/// Complete log score of `y` via token-by-token CTC prefix scoring.
fn ctc_incremental(g: &CtcGrid, y: &TokenSeq) -> f64 {
    let mut cache = ctc_prefix_init(g);
    let mut prefix = TokenSeq::empty();
    for &c in y.iter() {
        cache = ctc_prefix_score(g, &prefix, Next::Token(c), &cache)
            .unwrap()
            .cache
            .unwrap();
        prefix = prefix.extended(c);
    }
    ctc_prefix_score(g, &prefix, Next::Eos, &cache)
        .unwrap()
        .alpha
}

fn rnnt_incremental(m: &TransducerModel, y: &TokenSeq) -> f64 {
    let mut cache = rnnt_prefix_init(m, m.frames()).unwrap();
    let mut prefix = TokenSeq::empty();
    for &c in y.iter() {
        cache = rnnt_prefix_score(m, &prefix, Next::Token(c), &cache)
            .unwrap()
            .cache
            .unwrap();
        prefix = prefix.extended(c);
    }
    rnnt_prefix_score(m, &prefix, Next::Eos, &cache)
        .unwrap()
        .alpha
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ctc_scorer_matches_enumeration(seed in any::<u64>(), frames in 1usize..=5, v in 1usize..=3) {
        let g = grid(seed, frames, v);
        for y in all_sequences(v, 4) {
            let brute = brute_force_ctc(&g, &y).unwrap();
            prop_assert!((ctc_incremental(&g, &y).exp() - brute).abs() <= 1e-9);
        }
    }

    #[test]
    fn ctc_enumeration_is_normalized(seed in any::<u64>(), frames in 1usize..=6, v in 1usize..=3) {
        let g = grid(seed, frames, v);
        let total: f64 = brute_force_ctc_distribution(&g).unwrap().values().sum();
        prop_assert!((total - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn rnnt_scorer_matches_enumeration(seed in any::<u64>(), frames in 1usize..=4, v in 1usize..=3, hash in any::<bool>()) {
        let m = transducer(seed, frames, v, hash);
        for y in all_sequences(v, 3) {
            let brute = brute_force_rnnt(&m, &y, frames).unwrap();
            prop_assert!((rnnt_incremental(&m, &y).exp() - brute).abs() <= 1e-9);
        }
    }

    #[test]
    fn rnnt_partial_sums_grow_to_at_most_one(seed in any::<u64>(), frames in 1usize..=4, v in 1usize..=2, hash in any::<bool>()) {
        let m = transducer(seed, frames, v, hash);
        let sums = rnnt_partial_sums(&m, frames, 4).unwrap();
        for pair in sums.windows(2) {
            prop_assert!(pair[0] <= pair[1]);
        }
        prop_assert!(*sums.last().unwrap() <= 1.0 + 1e-9);
    }

    #[test]
    fn incremental_caches_equal_batch(seed in any::<u64>(), frames in 1usize..=6, tokens in prop::collection::vec(0usize..3, 0..5)) {
        let g = grid(seed, frames, 3);
        let m = transducer(seed, frames, 3, seed % 2 == 0);
        let mut ctc = ctc_prefix_init(&g);
        let mut rnnt = rnnt_prefix_init(&m, frames).unwrap();
        let mut prefix = TokenSeq::empty();
        for &c in &tokens {
            let a = ctc_prefix_score(&g, &prefix, Next::Token(c), &ctc).unwrap();
            let b = rnnt_prefix_score(&m, &prefix, Next::Token(c), &rnnt).unwrap();
            prefix = prefix.extended(c);
            let (ctc_batch, _) = ctc_prefix_batch(&g, &prefix).unwrap();
            let (rnnt_batch, _) = rnnt_prefix_batch(&m, &prefix).unwrap();
            prop_assert!(close(a.alpha, ctc_batch, 1e-12));
            prop_assert!(close(b.alpha, rnnt_batch, 1e-12));
            ctc = a.cache.unwrap();
            rnnt = b.cache.unwrap();
        }
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol
}

#[test]
fn longer_than_frames_has_zero_ctc_mass() {
    let g = grid(1, 2, 2);
    let y = TokenSeq::from(vec![0, 1, 0]);
    assert_eq!(brute_force_ctc(&g, &y).unwrap(), 0.0);
    assert_eq!(ctc_incremental(&g, &y), f64::NEG_INFINITY);
}
