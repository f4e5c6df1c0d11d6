//! Character-level correspondence bootstrapping.
//!
//! For every English NE we take the target side of its parallel subcorpus,
//! count all character ngrams there (`f_s`) and in the whole target edition
//! (`f_a`), drop ngrams seen once in the subcorpus or more than `max_fa`
//! times overall, and narrow the rest down in three stages:
//!
//! 1. keep the ngrams with the highest `f_s`,
//! 2. of those, keep the ones with the smallest `|f_a - f_s|`,
//! 3. of those, keep the ones whose length is closest to the NE's.
//!
//! Ties survive every stage; the final list is sorted for determinism.

use std::collections::{HashMap, HashSet};
use std::fmt;

use rayon::prelude::*;

use crate::corpus::{Edition, EnglishNe, ParallelCorpus};
use crate::text::is_ngram_char;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClcbConfig {
    /// Shortest ngram, in characters.
    pub n_min: usize,
    /// Longest ngram, in characters.
    pub n_max: usize,
    /// Ngrams occurring more often than this in the whole edition are dropped.
    pub max_fa: u32,
}

impl Default for ClcbConfig {
    fn default() -> Self {
        ClcbConfig {
            n_min: 4,
            n_max: 19,
            max_fa: 50,
        }
    }
}

/// Every character window of length `n_min..=n_max` that contains no
/// digit, punctuation, symbol or whitespace, with repeats.
pub fn char_ngrams(text: &str, n_min: usize, n_max: usize) -> Vec<&str> {
    let mut out = Vec::new();
    for_each_ngram(text, n_min, n_max, |g| out.push(g));
    out
}

fn for_each_ngram<'t>(text: &'t str, n_min: usize, n_max: usize, mut f: impl FnMut(&'t str)) {
    assert!(n_min >= 1 && n_min <= n_max, "invalid ngram range {n_min}..={n_max}");
    let mut bounds: Vec<usize> = Vec::new();
    let mut emit_run = |bounds: &[usize]| {
        // `bounds` holds the byte offset of every char in the run plus the end.
        let run_len = bounds.len().saturating_sub(1);
        for start in 0..run_len {
            let longest = n_max.min(run_len - start);
            for n in n_min..=longest {
                f(&text[bounds[start]..bounds[start + n]]);
            }
        }
    };
    for (offset, c) in text.char_indices() {
        if is_ngram_char(c) {
            bounds.push(offset);
        } else if !bounds.is_empty() {
            bounds.push(offset);
            emit_run(&bounds);
            bounds.clear();
        }
    }
    if !bounds.is_empty() {
        bounds.push(text.len());
        emit_run(&bounds);
    }
}

/// Occurrence counts of all ngrams in `texts`.
pub fn count_ngrams<'a>(
    texts: impl IntoIterator<Item = &'a str>,
    n_min: usize,
    n_max: usize,
) -> HashMap<String, u32> {
    let mut counts: HashMap<String, u32> = HashMap::new();
    for text in texts {
        for_each_ngram(text, n_min, n_max, |g| bump(&mut counts, g));
    }
    counts
}

fn bump(counts: &mut HashMap<String, u32>, g: &str) {
    match counts.get_mut(g) {
        Some(c) => *c += 1,
        None => {
            counts.insert(g.to_owned(), 1);
        }
    }
}

/// Edition-wide ngram counts (`f_a`).
#[derive(Debug, Clone, Default)]
pub struct GlobalCounts {
    counts: HashMap<String, u32>,
}

impl GlobalCounts {
    /// Count every ngram of the edition.
    pub fn full(edition: &Edition, config: &ClcbConfig) -> Self {
        GlobalCounts {
            counts: count_ngrams(edition.texts(), config.n_min, config.n_max),
        }
    }

    /// Count only the given ngrams. Much cheaper than [`GlobalCounts::full`]
    /// on large editions; lookups of ngrams outside `wanted` return 0.
    pub fn restricted<'a>(
        edition: &Edition,
        wanted: impl IntoIterator<Item = &'a str>,
        config: &ClcbConfig,
    ) -> Self {
        let mut counts: HashMap<String, u32> =
            wanted.into_iter().map(|g| (g.to_owned(), 0)).collect();
        if counts.is_empty() {
            return GlobalCounts { counts };
        }
        let texts: Vec<&str> = edition.texts().collect();
        let partials: Vec<HashMap<&str, u32>> = texts
            .par_chunks(512)
            .map(|chunk| {
                let mut local: HashMap<&str, u32> = HashMap::new();
                for text in chunk {
                    for_each_ngram(text, config.n_min, config.n_max, |g| {
                        if counts.contains_key(g) {
                            *local.entry(g).or_insert(0) += 1;
                        }
                    });
                }
                local
            })
            .collect();
        let mut merged: HashMap<String, u32> = HashMap::with_capacity(counts.len());
        for partial in partials {
            for (g, c) in partial {
                match merged.get_mut(g) {
                    Some(total) => *total += c,
                    None => {
                        merged.insert(g.to_owned(), c);
                    }
                }
            }
        }
        for (g, c) in counts.iter_mut() {
            *c = merged.get(g.as_str()).copied().unwrap_or(0);
        }
        GlobalCounts { counts }
    }

    pub fn get(&self, ngram: &str) -> u32 {
        self.counts.get(ngram).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Build the full `f_a` table for an edition.
pub fn global_ngram_counts(edition: &Edition, config: &ClcbConfig) -> GlobalCounts {
    GlobalCounts::full(edition, config)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NgramStat {
    pub ngram: String,
    /// Occurrences in the subcorpus.
    pub f_s: u32,
    /// Occurrences in the whole target edition.
    pub f_a: u32,
}

impl NgramStat {
    fn fa_fs_gap(&self) -> u32 {
        self.f_a.abs_diff(self.f_s)
    }
}

/// Subcorpus ngrams seen at least twice there, with their local counts.
pub(crate) fn repeated_local_ngrams(target_verses: &[String], config: &ClcbConfig) -> Vec<(String, u32)> {
    let mut local: Vec<(String, u32)> =
        count_ngrams(target_verses.iter().map(String::as_str), config.n_min, config.n_max)
            .into_iter()
            .filter(|&(_, f_s)| f_s >= 2)
            .collect();
    local.sort_unstable();
    local
}

/// The candidate set for one NE: subcorpus ngrams with `f_s >= 2` and
/// `f_a <= max_fa`, sorted by ngram.
pub fn get_ngrams(
    target_verses: &[String],
    global: &GlobalCounts,
    config: &ClcbConfig,
) -> Vec<NgramStat> {
    gate(repeated_local_ngrams(target_verses, config), global, config)
}

pub(crate) fn gate(local: Vec<(String, u32)>, global: &GlobalCounts, config: &ClcbConfig) -> Vec<NgramStat> {
    local
        .into_iter()
        .filter_map(|(ngram, f_s)| {
            let f_a = global.get(&ngram);
            debug_assert!(f_s <= f_a, "{ngram}: f_s={f_s} > f_a={f_a}");
            (f_a <= config.max_fa).then_some(NgramStat { ngram, f_s, f_a })
        })
        .collect()
}

/// The survivors of each filter stage, each a subset of the previous one.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FilterStages {
    pub highest_fs: Vec<NgramStat>,
    pub smallest_gap: Vec<NgramStat>,
    pub closest_length: Vec<NgramStat>,
}

fn keep_min_by_key<K: Ord + Copy>(items: &[NgramStat], key: impl Fn(&NgramStat) -> K) -> Vec<NgramStat> {
    let Some(best) = items.iter().map(&key).min() else {
        return Vec::new();
    };
    let mut kept: Vec<NgramStat> = items.iter().filter(|s| key(s) == best).cloned().collect();
    kept.sort_by(|a, b| a.ngram.cmp(&b.ngram));
    kept
}

/// Run the three filter stages on `candidates` for the English NE `english`.
pub fn filter_stages(candidates: &[NgramStat], english: &str) -> FilterStages {
    let english_len = english.chars().count();
    let highest_fs = keep_min_by_key(candidates, |s| std::cmp::Reverse(s.f_s));
    let smallest_gap = keep_min_by_key(&highest_fs, NgramStat::fa_fs_gap);
    let closest_length =
        keep_min_by_key(&smallest_gap, |s| s.ngram.chars().count().abs_diff(english_len));
    FilterStages {
        highest_fs,
        smallest_gap,
        closest_length,
    }
}

/// Final filter output: the ngrams surviving all three stages, sorted.
pub fn filter(candidates: &[NgramStat], english: &str) -> Vec<NgramStat> {
    filter_stages(candidates, english).closest_length
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairSource {
    Bootstrapped,
    Augmented,
}

/// One training example for the transliteration model: target-language
/// string in, English NE out.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TrainingPair {
    pub target: String,
    pub english: String,
    pub source: PairSource,
}

impl TrainingPair {
    pub fn bootstrapped(target: impl Into<String>, english: impl Into<String>) -> Self {
        TrainingPair {
            target: target.into(),
            english: english.into(),
            source: PairSource::Bootstrapped,
        }
    }

    /// Empty input, English output.
    pub fn augmented(english: impl Into<String>) -> Self {
        TrainingPair {
            target: String::new(),
            english: english.into(),
            source: PairSource::Augmented,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BootstrapPair {
    pub english: String,
    pub target: String,
    pub f_s: u32,
    pub f_a: u32,
}

impl BootstrapPair {
    pub fn training_pair(&self) -> TrainingPair {
        TrainingPair::bootstrapped(self.target.clone(), self.english.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SkipReason {
    /// The NE does not occur in the parallel corpus.
    Absent,
    /// The NE occurs in a single parallel verse.
    FrequencyOne,
    /// No ngram survived the frequency gates.
    NoCandidates,
}

impl SkipReason {
    pub fn as_str(self) -> &'static str {
        match self {
            SkipReason::Absent => "absent",
            SkipReason::FrequencyOne => "frequency_one",
            SkipReason::NoCandidates => "no_candidates",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "absent" => Some(SkipReason::Absent),
            "frequency_one" => Some(SkipReason::FrequencyOne),
            "no_candidates" => Some(SkipReason::NoCandidates),
            _ => None,
        }
    }
}

impl fmt::Display for SkipReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BootstrapResult {
    pub pairs: Vec<BootstrapPair>,
    pub skipped: Vec<(EnglishNe, SkipReason)>,
}

impl BootstrapResult {
    pub fn training_pairs(&self) -> Vec<TrainingPair> {
        self.pairs.iter().map(BootstrapPair::training_pair).collect()
    }

    /// `english<TAB>target<TAB>f_s<TAB>f_a` lines.
    pub fn pairs_tsv(&self) -> String {
        let mut out = String::new();
        for p in &self.pairs {
            out.push_str(&format!("{}\t{}\t{}\t{}\n", p.english, p.target, p.f_s, p.f_a));
        }
        out
    }

    /// `english<TAB>reason` lines.
    pub fn skipped_tsv(&self) -> String {
        let mut out = String::new();
        for (ne, reason) in &self.skipped {
            out.push_str(&format!("{}\t{}\n", ne.surface, reason));
        }
        out
    }
}

/// Parse the pairs TSV written by [`BootstrapResult::pairs_tsv`]; `#` lines
/// are skipped.
pub fn parse_pairs_tsv(content: &str) -> Result<Vec<BootstrapPair>, String> {
    let mut pairs = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.starts_with('#') || line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [english, target, f_s, f_a] = fields[..] else {
            return Err(format!("line {}: expected 4 tab-separated fields", i + 1));
        };
        let num = |s: &str| {
            s.parse::<u32>()
                .map_err(|e| format!("line {}: bad count {s:?}: {e}", i + 1))
        };
        if english.is_empty() || target.is_empty() {
            return Err(format!("line {}: empty field", i + 1));
        }
        pairs.push(BootstrapPair {
            english: english.to_string(),
            target: target.to_string(),
            f_s: num(f_s)?,
            f_a: num(f_a)?,
        });
    }
    Ok(pairs)
}

enum NeOutcome {
    Skip(SkipReason),
    Local(Vec<(String, u32)>),
}

/// Bootstrap noisy (target ngram, English NE) pairs for every NE.
///
/// NEs are processed independently; output order follows `nes`.
pub fn bootstrap(corpus: &ParallelCorpus, nes: &[EnglishNe], config: &ClcbConfig) -> BootstrapResult {
    let outcomes: Vec<NeOutcome> = nes
        .par_iter()
        .map(|ne| {
            let sub = corpus.extract_subcorpus(ne);
            match sub.len() {
                0 => NeOutcome::Skip(SkipReason::Absent),
                1 => NeOutcome::Skip(SkipReason::FrequencyOne),
                _ => NeOutcome::Local(repeated_local_ngrams(&sub.target_verses, config)),
            }
        })
        .collect();

    let wanted: HashSet<&str> = outcomes
        .iter()
        .filter_map(|o| match o {
            NeOutcome::Local(local) => Some(local.iter().map(|(g, _)| g.as_str())),
            NeOutcome::Skip(_) => None,
        })
        .flatten()
        .collect();
    let global = GlobalCounts::restricted(&corpus.target, wanted, config);

    let mut result = BootstrapResult::default();
    for (ne, outcome) in nes.iter().zip(outcomes) {
        let local = match outcome {
            NeOutcome::Skip(reason) => {
                result.skipped.push((ne.clone(), reason));
                continue;
            }
            NeOutcome::Local(local) => local,
        };
        let candidates = gate(local, &global, config);
        let survivors = filter(&candidates, &ne.surface);
        if survivors.is_empty() {
            result.skipped.push((ne.clone(), SkipReason::NoCandidates));
            continue;
        }
        result.pairs.extend(survivors.into_iter().map(|s| BootstrapPair {
            english: ne.surface.clone(),
            target: s.ngram,
            f_s: s.f_s,
            f_a: s.f_a,
        }));
    }
    result
}
