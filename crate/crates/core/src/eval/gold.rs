//! Gold references from three-way human annotation.

use std::collections::{BTreeMap, BTreeSet};

use super::{EvalReport, Judgment, Normalization};
use crate::error::{Error, Result};
use crate::miner::ResourceEntry;

pub const ANNOTATORS_PER_QUESTION: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Question {
    pub english: String,
    pub options: BTreeSet<String>,
    /// `(annotator_id, chosen options)`; an empty set means "none correct".
    pub choices: Vec<(String, BTreeSet<String>)>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AnnotationSet {
    pub questions: Vec<Question>,
}

impl AnnotationSet {
    /// Parse `question_id<TAB>annotator_id<TAB>chosen_option` lines.
    ///
    /// The question id is the English NE. An annotator picking several
    /// options contributes several lines; an empty option (or `-`) records
    /// that the annotator saw the question and picked nothing. The option
    /// list of a question is the union of everything chosen for it.
    pub fn parse_tsv(content: &str) -> Result<Self> {
        let mut by_question: BTreeMap<String, BTreeMap<String, BTreeSet<String>>> = BTreeMap::new();
        for (i, line) in content.lines().enumerate() {
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let (q, a, opt) = match fields[..] {
                [q, a] => (q, a, ""),
                [q, a, opt] => (q, a, opt),
                _ => {
                    return Err(Error::InvalidInput(format!(
                        "annotation line {}: expected `question_id<TAB>annotator_id<TAB>chosen_option`",
                        i + 1
                    )))
                }
            };
            let chosen = by_question
                .entry(q.trim().to_lowercase())
                .or_default()
                .entry(a.trim().to_string())
                .or_default();
            let opt = opt.trim();
            if !opt.is_empty() && opt != "-" {
                chosen.insert(opt.to_string());
            }
        }
        let questions = by_question
            .into_iter()
            .map(|(english, annotators)| {
                let options = annotators.values().flatten().cloned().collect();
                Question {
                    english,
                    options,
                    choices: annotators.into_iter().collect(),
                }
            })
            .collect();
        Ok(AnnotationSet { questions })
    }

    fn validate(&self) -> Result<()> {
        for q in &self.questions {
            if q.choices.len() != ANNOTATORS_PER_QUESTION {
                return Err(Error::InvalidInput(format!(
                    "question {:?} has {} annotators, expected {ANNOTATORS_PER_QUESTION}",
                    q.english,
                    q.choices.len()
                )));
            }
            for (annotator, chosen) in &q.choices {
                if !chosen.is_subset(&q.options) {
                    return Err(Error::InvalidInput(format!(
                        "annotator {annotator:?} chose an option outside question {:?}",
                        q.english
                    )));
                }
            }
        }
        Ok(())
    }
}

/// English NE -> options at least two annotators agreed on.
pub type GoldSet = BTreeMap<String, BTreeSet<String>>;

/// Keep every option chosen by at least two of the three annotators.
/// Questions without such an option contribute nothing.
pub fn majority_vote(annotations: &AnnotationSet) -> Result<GoldSet> {
    annotations.validate()?;
    let mut gold = GoldSet::new();
    for q in &annotations.questions {
        let kept: BTreeSet<String> = q
            .options
            .iter()
            .filter(|opt| q.choices.iter().filter(|(_, c)| c.contains(*opt)).count() >= 2)
            .cloned()
            .collect();
        if !kept.is_empty() {
            gold.insert(q.english.clone(), kept);
        }
    }
    Ok(gold)
}

/// Cohen's kappa between two binary raters.
///
/// When chance agreement is 1 (both raters constant and equal) kappa is
/// 1 if they agree everywhere and 0 otherwise.
pub fn cohens_kappa(a: &[bool], b: &[bool]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput(format!(
            "judgment vectors differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::InvalidInput("no judgments".into()));
    }
    let n = a.len() as f64;
    let agree = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64;
    let a_yes = a.iter().filter(|&&x| x).count() as f64 / n;
    let b_yes = b.iter().filter(|&&x| x).count() as f64 / n;
    let p_o = agree / n;
    let p_e = a_yes * b_yes + (1.0 - a_yes) * (1.0 - b_yes);
    if p_e >= 1.0 {
        return Ok(if p_o >= 1.0 { 1.0 } else { 0.0 });
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

/// Mean pairwise kappa over annotator slots.
///
/// Annotators of each question are ordered by id and assigned to slots
/// 0..3; every (question, option) is one binary judgment per slot.
pub fn pairwise_kappa(annotations: &AnnotationSet) -> Result<f64> {
    annotations.validate()?;
    let mut slots: [Vec<bool>; ANNOTATORS_PER_QUESTION] = Default::default();
    for q in &annotations.questions {
        for opt in &q.options {
            for (slot, (_, chosen)) in q.choices.iter().enumerate() {
                slots[slot].push(chosen.contains(opt));
            }
        }
    }
    let mut total = 0.0;
    let mut pairs = 0;
    for i in 0..ANNOTATORS_PER_QUESTION {
        for j in i + 1..ANNOTATORS_PER_QUESTION {
            total += cohens_kappa(&slots[i], &slots[j])?;
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

/// Precision of mined pairs against a gold set. Pairs whose English NE has
/// no gold entry are left out.
pub fn gold_eval(pairs: &[ResourceEntry], gold: &GoldSet, norm: Normalization) -> Result<EvalReport> {
    let mut judgments = Vec::new();
    for pair in pairs {
        let Some(options) = gold.get(&norm.apply(&pair.english)) else {
            continue;
        };
        let predicted = norm.apply(&pair.target);
        let correct = options.iter().any(|o| norm.apply(o) == predicted);
        judgments.push(Judgment {
            english: pair.english.clone(),
            predicted: pair.target.clone(),
            reference: options.iter().cloned().collect::<Vec<_>>().join("|"),
            distance: None,
            correct,
        });
    }
    if judgments.is_empty() {
        return Err(Error::InvalidInput(
            "no mined English NE has a gold entry".into(),
        ));
    }
    Ok(EvalReport::from_judgments(judgments))
}
