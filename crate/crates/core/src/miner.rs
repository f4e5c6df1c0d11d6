//! Pick, for each English NE, the target candidate the transliteration
//! model scores highest, and export the resulting lexicon.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::path::Path;

use rayon::prelude::*;

use crate::clcb::{filter_stages, gate, repeated_local_ngrams, ClcbConfig, GlobalCounts};
use crate::corpus::{EnglishNe, ParallelCorpus, ParallelSubcorpus};
use crate::error::{Error, Result};
use crate::text::tokenize;
use crate::translit::TranslitModel;

#[derive(Debug, Clone, PartialEq)]
pub struct NePair {
    pub english: String,
    pub target: String,
    /// Mean log-likelihood from [`TranslitModel::score`].
    pub score: f64,
    pub n_candidates: usize,
    pub verse_frequency: usize,
}

impl NePair {
    pub fn entry(&self) -> ResourceEntry {
        ResourceEntry {
            english: self.english.clone(),
            target: self.target.clone(),
            score: round6(self.score),
            verse_frequency: self.verse_frequency,
        }
    }
}

/// One line of the exported resource.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceEntry {
    pub english: String,
    pub target: String,
    /// Rounded to the 6 decimals written to disk.
    pub score: f64,
    pub verse_frequency: usize,
}

fn round6(x: f64) -> f64 {
    format!("{x:.6}").parse().expect("formatted float parses")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MiningMode {
    /// Candidates are the words of the parallel target verses.
    Tokenized,
    /// Candidates are CLC-B ngrams; for scripts without word boundaries.
    Untokenized,
}

impl MiningMode {
    pub fn as_str(self) -> &'static str {
        match self {
            MiningMode::Tokenized => "tokenized",
            MiningMode::Untokenized => "untokenized",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "tokenized" => Some(MiningMode::Tokenized),
            "untokenized" => Some(MiningMode::Untokenized),
            _ => None,
        }
    }
}

impl fmt::Display for MiningMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MineSkipReason {
    Absent,
    NoCandidates,
    BelowMinScore,
}

impl MineSkipReason {
    pub fn as_str(self) -> &'static str {
        match self {
            MineSkipReason::Absent => "absent",
            MineSkipReason::NoCandidates => "no_candidates",
            MineSkipReason::BelowMinScore => "below_min_score",
        }
    }
}

impl fmt::Display for MineSkipReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Minimum candidate length in characters.
pub const MIN_CANDIDATE_CHARS: usize = 2;

/// Distinct tokens of the target verses, sorted, single characters dropped.
pub fn candidates_tokenized(subcorpus: &ParallelSubcorpus) -> Result<Vec<String>> {
    if subcorpus.is_empty() {
        return Err(Error::InvalidInput("empty subcorpus".into()));
    }
    let set: BTreeSet<String> = subcorpus
        .target_verses
        .iter()
        .flat_map(|v| tokenize(v))
        .filter(|t| t.chars().count() >= MIN_CANDIDATE_CHARS)
        .collect();
    Ok(set.into_iter().collect())
}

/// The ngrams that survive the first two CLC-B filter stages for `english`.
/// An empty result means the NE has no candidates.
pub fn candidates_untokenized(
    english: &str,
    target_verses: &[String],
    global: &GlobalCounts,
    config: &ClcbConfig,
) -> Result<Vec<String>> {
    if target_verses.is_empty() {
        return Err(Error::InvalidInput("empty subcorpus".into()));
    }
    let gated = gate(repeated_local_ngrams(target_verses, config), global, config);
    Ok(filter_stages(&gated, english)
        .smallest_gap
        .into_iter()
        .map(|s| s.ngram)
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MineOptions {
    pub mode: MiningMode,
    pub clcb: ClcbConfig,
    /// Drop pairs scoring below this. Off by default.
    pub min_score: Option<f64>,
}

impl Default for MineOptions {
    fn default() -> Self {
        MineOptions {
            mode: MiningMode::Tokenized,
            clcb: ClcbConfig::default(),
            min_score: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MiningResult {
    pub pairs: Vec<NePair>,
    pub skipped: Vec<(EnglishNe, MineSkipReason)>,
}

impl MiningResult {
    /// `english<TAB>reason` lines.
    pub fn skipped_tsv(&self) -> String {
        self.skipped
            .iter()
            .map(|(ne, r)| format!("{}\t{}\n", ne.surface, r))
            .collect()
    }
}

/// Highest-scoring candidate; exact score ties go to the smallest string.
fn best_candidate(
    model: &TranslitModel,
    english: &str,
    candidates: &[String],
) -> Result<(String, f64)> {
    let mut best: Option<(&String, f64)> = None;
    for c in candidates {
        let s = model.score(c, english)?;
        best = match best {
            Some((b, bs)) if bs > s || (bs == s && b <= c) => Some((b, bs)),
            _ => Some((c, s)),
        };
    }
    let (b, s) = best.expect("candidates non-empty");
    Ok((b.clone(), s))
}

enum Outcome {
    Pair(NePair),
    Skip(MineSkipReason),
}

/// Mine one pair per NE present in the corpus, frequency-1 NEs included.
/// Output follows the order of `nes`.
pub fn mine(
    model: &TranslitModel,
    corpus: &ParallelCorpus,
    nes: &[EnglishNe],
    options: &MineOptions,
) -> Result<MiningResult> {
    let subcorpora: Vec<ParallelSubcorpus> =
        nes.par_iter().map(|ne| corpus.extract_subcorpus(ne)).collect();

    let global = match options.mode {
        MiningMode::Tokenized => GlobalCounts::default(),
        MiningMode::Untokenized => {
            let locals: Vec<Vec<(String, u32)>> = subcorpora
                .par_iter()
                .map(|s| repeated_local_ngrams(&s.target_verses, &options.clcb))
                .collect();
            let wanted: HashSet<&str> = locals
                .iter()
                .flatten()
                .map(|(g, _)| g.as_str())
                .collect();
            GlobalCounts::restricted(&corpus.target, wanted, &options.clcb)
        }
    };

    let outcomes: Vec<Outcome> = nes
        .par_iter()
        .zip(&subcorpora)
        .map(|(ne, sub)| -> Result<Outcome> {
            if sub.is_empty() {
                return Ok(Outcome::Skip(MineSkipReason::Absent));
            }
            let candidates = match options.mode {
                MiningMode::Tokenized => candidates_tokenized(sub)?,
                MiningMode::Untokenized => {
                    candidates_untokenized(&ne.surface, &sub.target_verses, &global, &options.clcb)?
                }
            };
            if candidates.is_empty() {
                return Ok(Outcome::Skip(MineSkipReason::NoCandidates));
            }
            let (target, score) = best_candidate(model, &ne.surface, &candidates)?;
            if options.min_score.is_some_and(|m| score < m) {
                return Ok(Outcome::Skip(MineSkipReason::BelowMinScore));
            }
            Ok(Outcome::Pair(NePair {
                english: ne.surface.clone(),
                target,
                score,
                n_candidates: candidates.len(),
                verse_frequency: sub.len(),
            }))
        })
        .collect::<Result<_>>()?;

    let mut result = MiningResult::default();
    for (ne, outcome) in nes.iter().zip(outcomes) {
        match outcome {
            Outcome::Pair(p) => result.pairs.push(p),
            Outcome::Skip(reason) => {
                log::info!("skipping {}: {reason}", ne.surface);
                result.skipped.push((ne.clone(), reason));
            }
        }
    }
    Ok(result)
}

pub const RESOURCE_COLUMNS: &str = "english\ttarget\tscore\tverse_frequency";

/// Resource TSV sorted by English NE, with a single `#` header line made of
/// `header` (or the column names when `None`).
pub fn resource_tsv(pairs: &[NePair], header: Option<&str>) -> String {
    let mut sorted: Vec<&NePair> = pairs.iter().collect();
    sorted.sort_by(|a, b| a.english.cmp(&b.english).then_with(|| a.target.cmp(&b.target)));
    let mut out = format!("# {}\n", header.unwrap_or(RESOURCE_COLUMNS));
    for p in sorted {
        out.push_str(&format!(
            "{}\t{}\t{:.6}\t{}\n",
            p.english, p.target, p.score, p.verse_frequency
        ));
    }
    out
}

pub fn export_resource(pairs: &[NePair], path: impl AsRef<Path>, header: Option<&str>) -> Result<()> {
    if pairs.is_empty() {
        return Err(Error::InvalidInput("no pairs to export".into()));
    }
    let path = path.as_ref();
    std::fs::write(path, resource_tsv(pairs, header)).map_err(|e| Error::io(path, e))
}

/// Parse a resource TSV; `#` lines are skipped.
pub fn parse_resource(content: &str) -> Result<Vec<ResourceEntry>> {
    let mut out = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.starts_with('#') || line.is_empty() {
            continue;
        }
        let bad = |what: &str| Error::InvalidInput(format!("resource line {}: {what}", i + 1));
        let fields: Vec<&str> = line.split('\t').collect();
        let [english, target, score, freq] = fields[..] else {
            return Err(bad("expected 4 tab-separated fields"));
        };
        if english.is_empty() || target.is_empty() {
            return Err(bad("empty field"));
        }
        out.push(ResourceEntry {
            english: english.to_string(),
            target: target.to_string(),
            score: score.parse().map_err(|_| bad("bad score"))?,
            verse_frequency: freq.parse().map_err(|_| bad("bad verse frequency"))?,
        });
    }
    Ok(out)
}
