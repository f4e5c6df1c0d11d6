//! Unicode helpers shared by the corpus, ngram and evaluation code.

use unicode_general_category::{get_general_category, GeneralCategory};
use unicode_normalization::UnicodeNormalization;

/// NFC-normalize a string.
pub fn nfc(text: &str) -> String {
    text.nfc().collect()
}

/// Punctuation (P*) and symbols (S*).
pub fn is_punct_or_symbol(c: char) -> bool {
    use GeneralCategory::*;
    matches!(
        get_general_category(c),
        ConnectorPunctuation
            | DashPunctuation
            | OpenPunctuation
            | ClosePunctuation
            | InitialPunctuation
            | FinalPunctuation
            | OtherPunctuation
            | MathSymbol
            | CurrencySymbol
            | ModifierSymbol
            | OtherSymbol
    )
}

/// Any digit or number character (N*).
pub fn is_number(c: char) -> bool {
    use GeneralCategory::*;
    matches!(
        get_general_category(c),
        DecimalNumber | LetterNumber | OtherNumber
    )
}

/// Whether `c` may appear inside a character ngram: no digits, punctuation,
/// symbols, whitespace or control characters.
pub fn is_ngram_char(c: char) -> bool {
    !(c.is_whitespace() || c.is_control() || is_number(c) || is_punct_or_symbol(c))
}

/// Lowercase, split on whitespace, strip leading and trailing punctuation
/// from every token and drop tokens that end up empty. Interior
/// punctuation is kept.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|raw| raw.trim_matches(is_punct_or_symbol).to_lowercase())
        .filter(|tok| !tok.is_empty())
        .collect()
}

/// Decompose, drop combining marks (M*), recompose. Used as an optional
/// normalization for scripts written with and without vowel diacritics.
pub fn strip_marks(text: &str) -> String {
    use GeneralCategory::*;
    text.nfd()
        .filter(|&c| {
            !matches!(
                get_general_category(c),
                NonspacingMark | SpacingMark | EnclosingMark
            )
        })
        .nfc()
        .collect()
}
