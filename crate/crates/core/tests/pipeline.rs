use std::collections::BTreeSet;

use nelex::clcb::{bootstrap, ClcbConfig, GlobalCounts};
use nelex::corpus::{english_nes, EnglishNe};
use nelex::eval::{synth_corpus, SynthCorpus, SynthSpec};
use nelex::miner::{
    candidates_tokenized, candidates_untokenized, mine, MineOptions, MiningMode,
};
use nelex::translit::{read_model, train, write_model, TranslitConfig, TranslitModel};

fn synth(seed: u64, singletons: usize, unsegmented: bool) -> (SynthSpec, SynthCorpus) {
    let mut spec = SynthSpec::generated(seed, 20, 2, 10, singletons);
    spec.unsegmented = unsegmented;
    let corpus = synth_corpus(&spec).unwrap();
    (spec, corpus)
}

fn nes_of(s: &SynthCorpus) -> Vec<EnglishNe> {
    english_nes(s.ne_list.iter().map(String::as_str), &s.english)
}

fn trained(s: &SynthCorpus, seed: u64) -> TranslitModel {
    let corpus = s.corpus();
    let boot = bootstrap(&corpus, &nes_of(s), &ClcbConfig::default());
    let cfg = TranslitConfig {
        seed,
        ..TranslitConfig::default()
    };
    train(&boot.training_pairs(), &s.augmentation, &cfg).unwrap()
}

#[test]
fn clcb_recovers_planted_substrings() {
    let (_, s) = synth(21, 0, false);
    let corpus = s.corpus();
    let boot = bootstrap(&corpus, &nes_of(&s), &ClcbConfig::default());
    let found: BTreeSet<&str> = boot
        .pairs
        .iter()
        .filter(|p| s.gold[&p.english] == p.target)
        .map(|p| p.english.as_str())
        .collect();
    assert!(found.len() * 10 >= s.gold.len() * 9, "{} of {}", found.len(), s.gold.len());
}

#[test]
fn untokenized_candidates_contain_gold() {
    let (spec, s) = synth(22, 0, true);
    let corpus = s.corpus();
    let cfg = ClcbConfig::default();
    let global = GlobalCounts::full(&corpus.target, &cfg);
    let mut hits = 0;
    for (name, _) in &spec.nes {
        let sub = corpus.extract_subcorpus(&EnglishNe::new(name.clone(), 0));
        let c = candidates_untokenized(name, &sub.target_verses, &global, &cfg).unwrap();
        hits += c.contains(&s.gold[name]) as usize;
    }
    assert!(hits * 10 >= spec.nes.len() * 9, "{hits}");
}

#[test]
fn tokenized_candidates_match_recount() {
    let (spec, s) = synth(23, 2, false);
    let corpus = s.corpus();
    for (name, freq) in &spec.nes {
        let sub = corpus.extract_subcorpus(&EnglishNe::new(name.clone(), *freq));
        let got = candidates_tokenized(&sub).unwrap();
        let mut brute: Vec<String> = Vec::new();
        for verse in &sub.target_verses {
            for raw in verse.split(' ') {
                let w: String = raw.trim_end_matches('.').to_lowercase();
                if w.chars().count() >= 2 && !brute.contains(&w) {
                    brute.push(w);
                }
            }
        }
        brute.sort();
        assert_eq!(got, brute, "{name}");
    }
}

#[test]
fn end_to_end_tokenized() {
    let (_, s) = synth(24, 3, false);
    let model = trained(&s, 24);
    let corpus = s.corpus();
    let nes = nes_of(&s);
    let boot = bootstrap(&corpus, &nes, &ClcbConfig::default());
    let result = mine(&model, &corpus, &nes, &MineOptions::default()).unwrap();

    assert_eq!(result.pairs.len(), nes.len());
    let hits = result
        .pairs
        .iter()
        .filter(|p| s.gold[&p.english] == p.target)
        .count();
    assert!(hits * 10 >= nes.len() * 9, "{hits} of {}", nes.len());

    for ne in nes.iter().filter(|n| n.frequency == 1) {
        assert!(boot.pairs.iter().all(|p| p.english != ne.surface));
        assert!(result.pairs.iter().any(|p| p.english == ne.surface));
    }
    for p in &result.pairs {
        let sub = corpus.extract_subcorpus(&EnglishNe::new(p.english.clone(), 0));
        let cands = candidates_tokenized(&sub).unwrap();
        assert!(cands.contains(&p.target));
        assert_eq!(cands.len(), p.n_candidates);
        assert_eq!(p.score, model.score(&p.target, &p.english).unwrap());
        assert!(p.score <= 0.0);
    }
    assert_eq!(result, mine(&model, &corpus, &nes, &MineOptions::default()).unwrap());
}

#[test]
fn end_to_end_untokenized() {
    let (_, s) = synth(25, 0, true);
    let model = trained(&s, 25);
    let corpus = s.corpus();
    let nes = nes_of(&s);
    let opts = MineOptions {
        mode: MiningMode::Untokenized,
        ..MineOptions::default()
    };
    let result = mine(&model, &corpus, &nes, &opts).unwrap();
    let hits = result
        .pairs
        .iter()
        .filter(|p| s.gold[&p.english] == p.target)
        .count();
    assert!(hits * 10 >= nes.len() * 8, "{hits} of {}", nes.len());
}

#[test]
fn training_is_reproducible_and_serializable() {
    let (_, s) = synth(26, 0, false);
    let a = trained(&s, 7);
    let b = trained(&s, 7);
    let bits = |m: &TranslitModel| m.loss_curve.iter().map(|l| l.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
    assert_eq!(write_model(&a), write_model(&b));
    assert!(a.loss_curve.last().unwrap() < &a.loss_curve[0]);

    let back = read_model(&write_model(&a)).unwrap();
    let (en, tg) = s.gold.iter().next().unwrap();
    assert_eq!(
        back.score(tg, en).unwrap().to_bits(),
        a.score(tg, en).unwrap().to_bits()
    );
}
