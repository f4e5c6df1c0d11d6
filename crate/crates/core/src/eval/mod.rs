//! Evaluation against silver and gold references, plus the synthetic
//! corpus generator used as a test oracle.

mod gold;
mod jaro;
mod synth;

use std::collections::BTreeMap;

pub use gold::{
    cohens_kappa, gold_eval, majority_vote, pairwise_kappa, AnnotationSet, GoldSet, Question,
};
pub use jaro::{jaro_distance, jaro_similarity};
pub use synth::{default_substitution, synth_corpus, SynthCorpus, SynthSpec};

use crate::error::{Error, Result};
use crate::miner::ResourceEntry;
use crate::text::{nfc, strip_marks};

/// Jaro distance at or below which a prediction counts as correct.
pub const DEFAULT_JARO_THRESHOLD: f64 = 0.3;

/// String normalization applied to both sides before comparison.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Normalization {
    /// Remove combining marks (e.g. short-vowel diacritics).
    pub strip_marks: bool,
}

impl Normalization {
    pub fn apply(&self, s: &str) -> String {
        let s = nfc(s).to_lowercase();
        if self.strip_marks {
            strip_marks(&s)
        } else {
            s
        }
    }
}

/// One reference translation per English NE.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SilverLexicon {
    entries: BTreeMap<String, String>,
}

impl SilverLexicon {
    /// Keys are lowercased; entries with an empty value are rejected.
    pub fn from_entries<I, K, V>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let mut lex = SilverLexicon::default();
        for (k, v) in entries {
            let key = nfc(k.as_ref().trim()).to_lowercase();
            let value = v.as_ref().trim();
            if key.is_empty() || value.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "silver entry {:?} -> {:?} has an empty side",
                    k.as_ref(),
                    v.as_ref()
                )));
            }
            lex.entries.insert(key, value.to_string());
        }
        Ok(lex)
    }

    /// Parse `english<TAB>target` lines; `#` lines are comments.
    pub fn parse_tsv(content: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in content.lines().enumerate() {
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let Some((en, tg)) = line.split_once('\t') else {
                return Err(Error::InvalidInput(format!(
                    "silver line {}: expected `english<TAB>target`",
                    i + 1
                )));
            };
            rows.push((en, tg));
        }
        Self::from_entries(rows)
    }

    pub fn get(&self, english: &str) -> Option<&str> {
        self.entries.get(english).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Judgment {
    pub english: String,
    pub predicted: String,
    pub reference: String,
    /// Jaro distance for silver evaluation; `None` for gold evaluation.
    pub distance: Option<f64>,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub total: usize,
    pub correct: usize,
    pub precision: f64,
    pub per_pair: Vec<Judgment>,
}

impl EvalReport {
    fn from_judgments(per_pair: Vec<Judgment>) -> Self {
        let total = per_pair.len();
        let correct = per_pair.iter().filter(|j| j.correct).count();
        EvalReport {
            total,
            correct,
            precision: if total == 0 {
                0.0
            } else {
                correct as f64 / total as f64
            },
            per_pair,
        }
    }

    /// `english<TAB>predicted<TAB>reference<TAB>distance<TAB>verdict` lines.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for j in &self.per_pair {
            let dist = j
                .distance
                .map(|d| format!("{d:.6}"))
                .unwrap_or_else(|| "-".into());
            let verdict = if j.correct { "correct" } else { "incorrect" };
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                j.english, j.predicted, j.reference, dist, verdict
            ));
        }
        out
    }

    pub fn summary(&self) -> String {
        format!(
            "pairs evaluated: {}\ncorrect: {}\nprecision: {:.4}\n",
            self.total, self.correct, self.precision
        )
    }
}

/// Compare mined pairs against a silver lexicon by Jaro distance.
///
/// Pairs whose English NE has no silver entry are left out of the
/// denominator. A pair is correct when its distance is `<= threshold`.
pub fn silver_eval(
    pairs: &[ResourceEntry],
    silver: &SilverLexicon,
    threshold: f64,
    norm: Normalization,
) -> Result<EvalReport> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "threshold {threshold} outside (0, 1]"
        )));
    }
    let mut judgments = Vec::new();
    for pair in pairs {
        let key = nfc(&pair.english).to_lowercase();
        let Some(reference) = silver.get(&key) else {
            continue;
        };
        let distance = jaro_distance(&norm.apply(&pair.target), &norm.apply(reference));
        judgments.push(Judgment {
            english: pair.english.clone(),
            predicted: pair.target.clone(),
            reference: reference.to_string(),
            distance: Some(distance),
            correct: distance <= threshold,
        });
    }
    if judgments.is_empty() {
        return Err(Error::InvalidInput(
            "no mined English NE has a silver entry".into(),
        ));
    }
    Ok(EvalReport::from_judgments(judgments))
}
