//! Verse-aligned editions and the parallel subcorpus for a single English
//! named entity.
//!
//! Edition files hold one verse per line as `verse_id<TAB>text`. Lines
//! starting with `#` and blank lines are skipped. All text is NFC-normalized
//! on load.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::text::{nfc, tokenize};

/// One edition of the corpus: verse-ID-keyed text for a single language.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edition {
    language_tag: String,
    verses: Vec<(String, String)>,
    index: HashMap<String, usize>,
}

impl Edition {
    /// Build an edition from `(verse_id, text)` pairs, in order.
    ///
    /// Verses whose text is blank are dropped. A repeated verse id is an
    /// error.
    pub fn from_verses<I, K, V>(language_tag: impl Into<String>, verses: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: AsRef<str>,
    {
        let mut edition = Edition {
            language_tag: language_tag.into(),
            verses: Vec::new(),
            index: HashMap::new(),
        };
        for (line, (id, text)) in verses.into_iter().enumerate() {
            let id = id.into();
            if !edition.push(id.clone(), text.as_ref()) {
                return Err(Error::DuplicateVerseId {
                    path: "<memory>".into(),
                    line: line + 1,
                    id,
                });
            }
        }
        Ok(edition)
    }

    fn push(&mut self, id: String, text: &str) -> bool {
        if self.index.contains_key(&id) {
            return false;
        }
        let text = nfc(text.trim());
        if !text.is_empty() {
            self.index.insert(id.clone(), self.verses.len());
            self.verses.push((id, text));
        }
        true
    }

    pub fn language_tag(&self) -> &str {
        &self.language_tag
    }

    pub fn len(&self) -> usize {
        self.verses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.verses.is_empty()
    }

    pub fn get(&self, verse_id: &str) -> Option<&str> {
        self.index.get(verse_id).map(|&i| self.verses[i].1.as_str())
    }

    pub fn contains(&self, verse_id: &str) -> bool {
        self.index.contains_key(verse_id)
    }

    /// `(verse_id, text)` in file order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> + '_ {
        self.verses.iter().map(|(id, t)| (id.as_str(), t.as_str()))
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> + '_ {
        self.verses.iter().map(|(_, t)| t.as_str())
    }
}

/// Load an edition from a `verse_id<TAB>text` file.
pub fn load_edition(path: impl AsRef<Path>, language_tag: &str) -> Result<Edition> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut edition = Edition {
        language_tag: language_tag.to_string(),
        verses: Vec::new(),
        index: HashMap::new(),
    };
    for (lineno, line) in content.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let Some((id, text)) = line.split_once('\t') else {
            return Err(Error::Parse {
                path: path.into(),
                line: lineno + 1,
                message: "expected `verse_id<TAB>text`".into(),
            });
        };
        let id = id.trim();
        if id.is_empty() {
            return Err(Error::Parse {
                path: path.into(),
                line: lineno + 1,
                message: "empty verse id".into(),
            });
        }
        if !edition.push(id.to_string(), text) {
            return Err(Error::DuplicateVerseId {
                path: path.into(),
                line: lineno + 1,
                id: id.to_string(),
            });
        }
    }
    Ok(edition)
}

/// Two editions restricted to the verse ids they share.
#[derive(Debug, Clone)]
pub struct ParallelCorpus {
    pub english: Edition,
    pub target: Edition,
    shared_ids: Vec<String>,
    // English token -> positions in `shared_ids` of the verses containing it.
    token_index: HashMap<String, Vec<usize>>,
}

/// Align two editions on their shared verse ids, keeping English order.
///
/// An empty intersection is valid; check [`ParallelCorpus::is_empty`].
pub fn align(english: Edition, target: Edition) -> ParallelCorpus {
    let shared_ids: Vec<String> = english
        .iter()
        .filter(|(id, _)| target.contains(id))
        .map(|(id, _)| id.to_string())
        .collect();
    if shared_ids.is_empty() {
        log::warn!(
            "editions {} and {} share no verse ids",
            english.language_tag(),
            target.language_tag()
        );
    }
    let mut token_index: HashMap<String, Vec<usize>> = HashMap::new();
    for (pos, id) in shared_ids.iter().enumerate() {
        let text = english.get(id).expect("shared id present in english");
        let tokens: HashSet<String> = tokenize(text).into_iter().collect();
        for tok in tokens {
            token_index.entry(tok).or_default().push(pos);
        }
    }
    ParallelCorpus {
        english,
        target,
        shared_ids,
        token_index,
    }
}

impl ParallelCorpus {
    pub fn shared_ids(&self) -> &[String] {
        &self.shared_ids
    }

    pub fn len(&self) -> usize {
        self.shared_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shared_ids.is_empty()
    }

    /// Verse pairs whose English side contains `ne` as a whole token, in
    /// corpus order.
    pub fn extract_subcorpus(&self, ne: &EnglishNe) -> ParallelSubcorpus {
        let positions = self
            .token_index
            .get(&ne.surface)
            .map(Vec::as_slice)
            .unwrap_or(&[]);
        let mut sub = ParallelSubcorpus::default();
        for &pos in positions {
            let id = &self.shared_ids[pos];
            sub.english_verses
                .push(self.english.get(id).unwrap().to_string());
            sub.target_verses.push(self.target.get(id).unwrap().to_string());
            sub.verse_ids.push(id.clone());
        }
        sub
    }
}

/// The verses parallel to those containing one English NE.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParallelSubcorpus {
    pub english_verses: Vec<String>,
    pub target_verses: Vec<String>,
    pub verse_ids: Vec<String>,
}

impl ParallelSubcorpus {
    pub fn len(&self) -> usize {
        self.verse_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.verse_ids.is_empty()
    }
}

/// A lowercase single-token English named entity and the number of verses
/// of the English edition it occurs in.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EnglishNe {
    pub surface: String,
    pub frequency: usize,
}

impl EnglishNe {
    pub fn new(surface: impl Into<String>, frequency: usize) -> Self {
        EnglishNe {
            surface: surface.into(),
            frequency,
        }
    }

    /// The NE never occurs in the edition it was counted against.
    pub fn is_absent(&self) -> bool {
        self.frequency == 0
    }
}

/// Number of verses of `edition` containing each of `surfaces` as a token.
pub fn verse_frequencies(edition: &Edition, surfaces: &[String]) -> Vec<usize> {
    let wanted: HashMap<&str, usize> = surfaces
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let mut counts = vec![0; surfaces.len()];
    for text in edition.texts() {
        let tokens: HashSet<String> = tokenize(text).into_iter().collect();
        for tok in &tokens {
            if let Some(&i) = wanted.get(tok.as_str()) {
                counts[i] += 1;
            }
        }
    }
    counts
}

/// Lowercase, NFC-normalize and deduplicate NE surfaces (first occurrence
/// wins). Entries with internal whitespace are dropped with a warning.
pub fn normalize_ne_surfaces<'a>(raw: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for line in raw {
        let surface = nfc(line.trim()).to_lowercase();
        if surface.is_empty() {
            continue;
        }
        if surface.chars().any(char::is_whitespace) {
            log::warn!("skipping multi-word named entity {surface:?}");
            continue;
        }
        if seen.insert(surface.clone()) {
            out.push(surface);
        }
    }
    out
}

/// Build English NEs from raw surfaces, counting their frequency in
/// `edition`. Absent NEs are kept with frequency 0.
pub fn english_nes<'a>(raw: impl IntoIterator<Item = &'a str>, edition: &Edition) -> Vec<EnglishNe> {
    let surfaces = normalize_ne_surfaces(raw);
    let freqs = verse_frequencies(edition, &surfaces);
    let nes: Vec<EnglishNe> = surfaces
        .into_iter()
        .zip(freqs)
        .map(|(s, f)| EnglishNe::new(s, f))
        .collect();
    for ne in nes.iter().filter(|ne| ne.is_absent()) {
        log::info!("named entity {:?} does not occur in the edition", ne.surface);
    }
    nes
}

/// Read a one-NE-per-line file (`#` lines are comments).
pub fn read_name_list(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(normalize_ne_surfaces(
        content.lines().filter(|l| !l.starts_with('#')),
    ))
}

/// Load an NE list and count each NE against `edition`.
pub fn load_ne_list(path: impl AsRef<Path>, edition: &Edition) -> Result<Vec<EnglishNe>> {
    let surfaces = read_name_list(path)?;
    Ok(english_nes(surfaces.iter().map(String::as_str), edition))
}
