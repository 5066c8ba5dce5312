use jointbeam::oracle::{best_in_table, oracle_table};
use jointbeam::synth::random_models;
use jointbeam::{search, Algorithm, Decoder, DecoderWeights, SearchConfig};
use proptest::prelude::*;

fn weights() -> impl Strategy<Value = DecoderWeights> {
    (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0, -1.0f64..1.0)
        .prop_filter("some positive weight", |(c, r, a, _)| c + r + a > 1e-3)
        .prop_map(|(c, r, a, b)| DecoderWeights {
            ctc: c,
            rnnt: r,
            att: a,
            beta: b,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn exhaustive_beams_find_the_oracle_argmax(seed in any::<u64>(), v in 1usize..=2, w in weights()) {
        let frames = 3;
        let models = random_models(seed, frames, v, frames).unwrap();
        let table = oracle_table(&models, &Decoder::ALL, frames).unwrap();
        let (y, joint) = best_in_table(&table, &w).unwrap();
        for algorithm in Algorithm::ALL {
            let cfg = SearchConfig::new(algorithm, w).beams(table.len(), table.len()).max_output_len(frames);
            let best = search(&models, &cfg).unwrap().nbest.best().unwrap().clone();
            prop_assert_eq!(&best.tokens, &y, "{}", algorithm);
            prop_assert!((best.joint - joint).abs() <= 1e-9);
        }
    }

    #[test]
    fn output_is_valid_and_deterministic(seed in any::<u64>(), k in 1usize..6, w in weights()) {
        let models = random_models(seed, 4, 3, 4).unwrap();
        for algorithm in Algorithm::ALL {
            let cfg = SearchConfig::new(algorithm, w).beams(k, k + 2).max_output_len(3).n_best(10);
            let a = search(&models, &cfg).unwrap();
            prop_assert_eq!(&a, &search(&models, &cfg).unwrap());
            let e = a.nbest.entries();
            for h in e {
                prop_assert!(h.tokens.len() <= 3);
                prop_assert!(h.tokens.iter().all(|&t| t < 3));
                for d in Decoder::ALL {
                    prop_assert_eq!(h.scores.get(d).is_some(), w.uses(d));
                }
            }
            for pair in e.windows(2) {
                prop_assert!(pair[0].joint >= pair[1].joint);
                prop_assert!(pair[0].tokens != pair[1].tokens);
            }
        }
    }

    #[test]
    fn zeroed_decoders_are_never_consulted(seed in any::<u64>(), w in weights()) {
        let models = random_models(seed, 4, 2, 4).unwrap();
        for algorithm in Algorithm::ALL {
            let cfg = SearchConfig::new(algorithm, w).beams(4, 5);
            let calls = search(&models, &cfg).unwrap().calls;
            for d in Decoder::ALL {
                if d != algorithm.primary() && !w.uses(d) {
                    prop_assert_eq!(calls.get(d), 0);
                }
            }
        }
    }
}
