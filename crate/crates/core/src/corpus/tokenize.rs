//! Sentence splitting and token normalization.
//!
//! Rules, applied deterministically:
//! - input is NFC-normalized; non-ASCII letters are retained
//! - sentences split on terminal punctuation (`.` `!` `?`)
//! - tokens split on whitespace, then stripped of leading/trailing
//!   non-alphanumeric characters (internal hyphens and symbols survive)
//! - tokens lowercased
//! - tokens without at least one alphabetic character are dropped
//! - sentences left with zero tokens are dropped

use unicode_normalization::UnicodeNormalization;

use super::{lemmatize, TokenizedSentence};

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn normalize_token(raw: &str) -> Option<String> {
    let trimmed = raw.trim_matches(|c: char| !c.is_alphanumeric());
    if trimmed.is_empty() || !trimmed.chars().any(|c| c.is_alphabetic()) {
        return None;
    }
    Some(trimmed.to_lowercase())
}

/// Splits text into denoised, lowercased sentences.
pub fn tokenize(text: &str) -> Vec<TokenizedSentence> {
    let text: String = text.nfc().collect();
    let mut sentences = Vec::new();
    let mut tokens: Vec<String> = Vec::new();
    let mut current = String::new();

    let flush_token = |current: &mut String, tokens: &mut Vec<String>| {
        if !current.is_empty() {
            if let Some(tok) = normalize_token(current) {
                tokens.push(tok);
            }
            current.clear();
        }
    };

    for c in text.chars() {
        if is_terminal(c) {
            flush_token(&mut current, &mut tokens);
            if !tokens.is_empty() {
                sentences.push(TokenizedSentence {
                    tokens: std::mem::take(&mut tokens),
                });
            }
        } else if c.is_whitespace() {
            flush_token(&mut current, &mut tokens);
        } else {
            current.push(c);
        }
    }
    flush_token(&mut current, &mut tokens);
    if !tokens.is_empty() {
        sentences.push(TokenizedSentence { tokens });
    }
    sentences
}

/// [`tokenize`] followed by per-token lemmatization.
pub fn tokenize_lemmatized(text: &str) -> Vec<TokenizedSentence> {
    let mut sentences = tokenize(text);
    for s in &mut sentences {
        for t in &mut s.tokens {
            let lemma = lemmatize(t);
            if lemma != *t {
                *t = lemma;
            }
        }
    }
    sentences
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(sentences: &[TokenizedSentence]) -> Vec<Vec<&str>> {
        sentences
            .iter()
            .map(|s| s.tokens.iter().map(String::as_str).collect())
            .collect()
    }

    #[test]
    fn splits_sentences_and_lowercases() {
        let got = tokenize("A neural network. It learns.");
        assert_eq!(
            toks(&got),
            vec![vec!["a", "neural", "network"], vec!["it", "learns"]]
        );
    }

    #[test]
    fn empty_text_yields_no_sentences() {
        assert!(tokenize("").is_empty());
    }

    #[test]
    fn digits_and_punctuation_only_sentences_are_dropped() {
        assert!(tokenize("100% !!").is_empty());
    }

    #[test]
    fn strips_surrounding_punctuation_keeps_internal_hyphens() {
        let got = tokenize("An (improved) x-ray tube!");
        assert_eq!(toks(&got), vec![vec!["an", "improved", "x-ray", "tube"]]);
    }

    #[test]
    fn alphanumeric_mixes_survive() {
        let got = tokenize("The 3d sensor uses 100 volts");
        assert_eq!(
            toks(&got),
            vec![vec!["the", "3d", "sensor", "uses", "volts"]]
        );
    }

    #[test]
    fn tokenization_is_deterministic() {
        let text = "Stators, rotors; and 3,4-diols! Et al. 42";
        assert_eq!(tokenize(text), tokenize(text));
    }

    #[test]
    fn lemmatized_variant_applies_rules() {
        let got = tokenize_lemmatized("Neural networks learning.");
        assert_eq!(toks(&got), vec![vec!["neural", "network", "learn"]]);
    }
}
