//! Synthetic verse-aligned corpora with known transliterations.
//!
//! Every planted English NE appears in exactly its requested number of
//! verses; the parallel target verse carries the NE's character-substitution
//! image. Everything else is seeded random filler.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{align, Edition, ParallelCorpus};
use crate::error::{Error, Result};

const TARGET_LETTERS: &str = "αβψδεφγηιξκλμνοπϙρστθωϝχυζ";
const ENGLISH_LETTERS: &str = "abcdefghijklmnopqrstuvwxyz";

/// `a..z` mapped one-to-one onto lowercase Greek-script letters.
pub fn default_substitution() -> BTreeMap<char, String> {
    ENGLISH_LETTERS
        .chars()
        .zip(TARGET_LETTERS.chars())
        .map(|(s, t)| (s, t.to_string()))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub substitution: BTreeMap<char, String>,
    /// `(english NE, number of verses it is planted in)`.
    pub nes: Vec<(String, usize)>,
    pub verses: usize,
    /// Distinct filler words per language.
    pub filler_vocab: usize,
    /// Filler words per verse, not counting planted NEs.
    pub words_per_verse: usize,
    /// Extra English names for the augmentation list.
    pub augmentation_names: usize,
    /// Join target words without spaces.
    pub unsegmented: bool,
    pub seed: u64,
}

impl SynthSpec {
    /// A spec with `ne_count` generated names, frequencies drawn uniformly
    /// from `freq_min..=freq_max`, plus `singletons` names planted once.
    pub fn generated(
        seed: u64,
        ne_count: usize,
        freq_min: usize,
        freq_max: usize,
        singletons: usize,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6e65_6c65_7821);
        let names = random_names(&mut rng, ne_count + singletons, &HashSet::new());
        let nes = names
            .into_iter()
            .enumerate()
            .map(|(i, name)| {
                let freq = if i < ne_count {
                    rng.random_range(freq_min..=freq_max)
                } else {
                    1
                };
                (name, freq)
            })
            .collect();
        SynthSpec {
            substitution: default_substitution(),
            nes,
            verses: 500,
            filler_vocab: 300,
            words_per_verse: 8,
            augmentation_names: 100,
            unsegmented: false,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for (src, image) in &self.substitution {
            if image.is_empty() {
                return Err(Error::InvalidInput(format!("substitution for {src:?} is empty")));
            }
            if !seen.insert(image.as_str()) {
                return Err(Error::InvalidInput(format!(
                    "substitution is not injective: {image:?} is the image of more than one character"
                )));
            }
        }
        let mut names = HashSet::new();
        for (name, freq) in &self.nes {
            if name.is_empty() || !name.chars().all(|c| c.is_lowercase()) {
                return Err(Error::InvalidInput(format!(
                    "named entity {name:?} must be non-empty lowercase letters"
                )));
            }
            if let Some(c) = name.chars().find(|c| !self.substitution.contains_key(c)) {
                return Err(Error::InvalidInput(format!(
                    "no substitution for {c:?} in {name:?}"
                )));
            }
            if *freq > self.verses {
                return Err(Error::InvalidInput(format!(
                    "{name:?} planted in {freq} verses but the corpus has {}",
                    self.verses
                )));
            }
            if !names.insert(name) {
                return Err(Error::InvalidInput(format!("duplicate named entity {name:?}")));
            }
        }
        if self.words_per_verse == 0 || self.filler_vocab == 0 {
            return Err(Error::InvalidInput("filler vocabulary and verse length must be positive".into()));
        }
        Ok(())
    }

    pub fn transliterate(&self, english: &str) -> String {
        english
            .chars()
            .map(|c| self.substitution[&c].as_str())
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub english: Edition,
    pub target: Edition,
    /// English NE -> planted target string, for NEs planted at least once.
    pub gold: BTreeMap<String, String>,
    /// All planted NEs in spec order.
    pub ne_list: Vec<String>,
    /// English names that never occur in the corpus.
    pub augmentation: Vec<String>,
}

impl SynthCorpus {
    pub fn corpus(&self) -> ParallelCorpus {
        align(self.english.clone(), self.target.clone())
    }

    pub fn verse_id(index: usize) -> String {
        format!("{:08}", 40_001_001 + index)
    }

    /// `verse_id<TAB>text` lines for both editions.
    pub fn edition_files(&self) -> (String, String) {
        let render = |e: &Edition| {
            e.iter()
                .map(|(id, text)| format!("{id}\t{text}\n"))
                .collect::<String>()
        };
        (render(&self.english), render(&self.target))
    }
}

fn random_word(rng: &mut impl Rng, letters: &[char], min: usize, max: usize) -> String {
    let len = rng.random_range(min..=max);
    (0..len).map(|_| *letters.choose(rng).unwrap()).collect()
}

fn random_names(rng: &mut impl Rng, count: usize, exclude: &HashSet<String>) -> Vec<String> {
    let letters: Vec<char> = ENGLISH_LETTERS.chars().collect();
    let mut seen = exclude.clone();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let name = random_word(rng, &letters, 5, 9);
        if seen.insert(name.clone()) {
            out.push(name);
        }
    }
    out
}

/// Generate a synthetic corpus from `spec`.
pub fn synth_corpus(spec: &SynthSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let gold: BTreeMap<String, String> = spec
        .nes
        .iter()
        .filter(|(_, f)| *f > 0)
        .map(|(name, _)| (name.clone(), spec.transliterate(name)))
        .collect();
    let planted_names: HashSet<String> = spec.nes.iter().map(|(n, _)| n.clone()).collect();

    let en_letters: Vec<char> = ENGLISH_LETTERS.chars().collect();
    let mut english_fillers = BTreeSet::new();
    while english_fillers.len() < spec.filler_vocab {
        let w = random_word(&mut rng, &en_letters, 2, 7);
        if !planted_names.contains(&w) {
            english_fillers.insert(w);
        }
    }
    let english_fillers: Vec<String> = english_fillers.into_iter().collect();

    let target_letters: Vec<char> = {
        let mut chars: Vec<char> = spec.substitution.values().flat_map(|s| s.chars()).collect();
        chars.sort_unstable();
        chars.dedup();
        chars
    };
    let mut target_fillers = BTreeSet::new();
    while target_fillers.len() < spec.filler_vocab {
        let w = random_word(&mut rng, &target_letters, 2, 7);
        if !gold.values().any(|g| w.contains(g.as_str()) || g.contains(w.as_str())) {
            target_fillers.insert(w);
        }
    }
    let target_fillers: Vec<String> = target_fillers.into_iter().collect();

    let mut planted: Vec<Vec<&str>> = vec![Vec::new(); spec.verses];
    let all_verses: Vec<usize> = (0..spec.verses).collect();
    for (name, freq) in &spec.nes {
        for &v in all_verses.choose_multiple(&mut rng, *freq) {
            planted[v].push(name);
        }
    }

    let separator = if spec.unsegmented { "" } else { " " };
    let mut english = Vec::with_capacity(spec.verses);
    let mut target = Vec::with_capacity(spec.verses);
    for (v, names) in planted.iter().enumerate() {
        let mut en_words: Vec<&str> = (0..spec.words_per_verse)
            .map(|_| english_fillers.choose(&mut rng).unwrap().as_str())
            .collect();
        for name in names {
            let at = rng.random_range(0..=en_words.len());
            en_words.insert(at, name);
        }
        // a planted image must only appear where it was planted, including
        // across word boundaries of unsegmented text
        let tg_text = loop {
            let mut tg_words: Vec<&str> = (0..spec.words_per_verse)
                .map(|_| target_fillers.choose(&mut rng).unwrap().as_str())
                .collect();
            for name in names {
                let at = rng.random_range(0..=tg_words.len());
                tg_words.insert(at, &gold[*name]);
            }
            let text = tg_words.join(separator);
            let clean = gold.iter().all(|(name, image)| {
                let expected = names.iter().filter(|n| **n == name).count();
                text.matches(image.as_str()).count() == expected
            });
            if clean {
                break text;
            }
        };
        let id = SynthCorpus::verse_id(v);
        english.push((id.clone(), format!("{}.", en_words.join(" "))));
        target.push((id, format!("{tg_text}.")));
    }

    let exclude: HashSet<String> = planted_names
        .iter()
        .cloned()
        .chain(english_fillers.iter().cloned())
        .collect();
    let augmentation = random_names(&mut rng, spec.augmentation_names, &exclude);

    Ok(SynthCorpus {
        english: Edition::from_verses("eng", english)?,
        target: Edition::from_verses("tgt", target)?,
        gold,
        ne_list: spec.nes.iter().map(|(n, _)| n.clone()).collect(),
        augmentation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::EnglishNe;
    use crate::text::tokenize;

    #[test]
    fn planted_frequencies_hold() {
        let spec = SynthSpec::generated(7, 20, 2, 10, 3);
        let synth = synth_corpus(&spec).unwrap();
        let corpus = synth.corpus();
        assert_eq!(corpus.len(), 500);
        for (name, freq) in &spec.nes {
            let sub = corpus.extract_subcorpus(&EnglishNe::new(name.clone(), *freq));
            assert_eq!(sub.len(), *freq, "{name}");
            let image = &synth.gold[name];
            for t in &sub.target_verses {
                assert!(tokenize(t).contains(image));
            }
            let total = corpus
                .target
                .texts()
                .filter(|t| tokenize(t).contains(image))
                .count();
            assert_eq!(total, *freq, "{name}");
        }
        let keys: Vec<&String> = synth.gold.keys().collect();
        let mut planted: Vec<&String> = spec.nes.iter().map(|(n, _)| n).collect();
        planted.sort();
        assert_eq!(keys, planted);
    }

    #[test]
    fn deterministic() {
        let spec = SynthSpec::generated(11, 5, 2, 4, 0);
        let a = synth_corpus(&spec).unwrap();
        let b = synth_corpus(&spec).unwrap();
        assert_eq!(a.edition_files(), b.edition_files());
        assert_eq!(a.augmentation, b.augmentation);
    }

    #[test]
    fn unsegmented_has_no_spaces() {
        let mut spec = SynthSpec::generated(3, 5, 2, 4, 0);
        spec.unsegmented = true;
        let synth = synth_corpus(&spec).unwrap();
        assert!(synth.target.texts().all(|t| !t.contains(' ')));
        for (name, freq) in &spec.nes {
            let image = &synth.gold[name];
            let n: usize = synth.target.texts().map(|t| t.matches(image.as_str()).count()).sum();
            assert_eq!(n, *freq);
        }
    }

    #[test]
    fn rejects_non_injective_map() {
        let mut spec = SynthSpec::generated(1, 3, 2, 3, 0);
        spec.substitution.insert('b', "α".into());
        assert!(matches!(synth_corpus(&spec), Err(Error::InvalidInput(_))));
    }
}
