use nelex::clcb::{PairSource, TrainingPair};
use nelex::corpus::{align, english_nes, Edition};
use nelex::translit::{augment, TranslitConfig, TranslitModel, Vocab};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_model(seed: u64) -> TranslitModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = TranslitConfig {
        embedding_dim: 5,
        encoder_hidden_per_direction: 3,
        decoder_hidden: 6,
        ..TranslitConfig::default()
    };
    TranslitModel::random(
        Vocab::from_chars("abcdef".chars()),
        Vocab::from_chars("uvwxyz".chars()),
        cfg,
        1.0,
        &mut rng,
    )
}

proptest! {
    #[test]
    fn attention_is_monotone(seed in 0u64..500, input in "[abcdefg]{0,10}", output in "[uvwxyz]{1,10}") {
        let model = random_model(seed);
        let out = model.forward(&input, &output).unwrap();
        let positions = input.chars().count() + 1;
        prop_assert_eq!(out.trace.steps.len(), output.chars().count() + 1);
        prop_assert_eq!(out.trace.steps[0].floor, 0);
        let mut prev = 0;
        for (t, step) in out.trace.steps.iter().enumerate() {
            prop_assert_eq!(step.weights.len(), positions);
            if t > 0 {
                prop_assert_eq!(step.floor, prev);
            }
            prop_assert!(step.weights[..step.floor].iter().all(|&w| w == 0.0));
            prop_assert!(step.argmax >= prev);
            prev = step.argmax;
        }
        prop_assert!(out.loss >= 0.0);
    }

    #[test]
    fn score_bounds(seed in 0u64..500, input in "[a-h]{0,8}", output in "[u-z]{1,8}") {
        let model = random_model(seed);
        let s = model.score(&input, &output).unwrap();
        let loss = model.forward(&input, &output).unwrap().loss;
        prop_assert!(s <= 0.0);
        prop_assert_eq!(s, -loss / (output.chars().count() + 1) as f64);
    }

    #[test]
    fn augmentation_balanced(n_boot in 1usize..60, n_aug in 1usize..120, seed in any::<u64>()) {
        let boot: Vec<TrainingPair> = (0..n_boot)
            .map(|i| TrainingPair::bootstrapped(format!("t{i}"), format!("e{i}")))
            .collect();
        let names: Vec<String> = (0..n_aug).map(|i| format!("n{i}")).collect();
        let out = augment(&boot, &names, seed).unwrap();
        let b = out.iter().filter(|p| p.source == PairSource::Bootstrapped).count();
        let a = out.len() - b;
        prop_assert!(a.abs_diff(b) <= 1);
        prop_assert!(a >= n_aug && b >= n_boot);
    }

    #[test]
    fn subcorpus_size_is_verse_frequency(
        verses in prop::collection::vec(prop::collection::vec("[abc]{1,3}", 1..6), 1..25),
    ) {
        let en: Vec<(String, String)> = verses
            .iter()
            .enumerate()
            .map(|(i, w)| (format!("{i:03}"), w.join(" ")))
            .collect();
        let tg: Vec<(String, String)> = en.iter().map(|(id, _)| (id.clone(), "x".to_string())).collect();
        let english = Edition::from_verses("e", en).unwrap();
        let corpus = align(english.clone(), Edition::from_verses("t", tg).unwrap());
        let names = ["a", "ab", "abc", "cab", "b"];
        for ne in english_nes(names.iter().copied(), &english) {
            prop_assert_eq!(corpus.extract_subcorpus(&ne).len(), ne.frequency);
        }
    }
}
