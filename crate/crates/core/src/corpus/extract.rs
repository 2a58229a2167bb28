//! Applies a learned vocabulary to one document.

use std::collections::HashMap;

use super::{ConceptId, Document, Vocabulary};

/// Longest-match-first, left-to-right segmentation of one tokenized sentence
/// against vocabulary terms. Out-of-vocabulary tokens are skipped.
pub fn segment_tokens(tokens: &[String], vocab: &Vocabulary) -> Vec<ConceptId> {
    let mut out = Vec::new();
    if vocab.is_empty() {
        return out;
    }
    let max_gram = vocab.max_gram();
    let mut i = 0;
    while i < tokens.len() {
        let mut advance = 1;
        let hi = (tokens.len() - i).min(max_gram);
        for len in (1..=hi).rev() {
            let id = if len == 1 {
                vocab.id(&tokens[i])
            } else {
                vocab.id(&tokens[i..i + len].join(" "))
            };
            if let Some(id) = id {
                out.push(id);
                advance = len;
                break;
            }
        }
        i += advance;
    }
    out
}

/// Segments the tokenized, lemmatized title and abstract and aggregates
/// occurrence counts, sorted by concept id.
pub fn extract_concepts(doc: &Document, vocab: &Vocabulary) -> Vec<(ConceptId, u32)> {
    let mut counts: HashMap<ConceptId, u32> = HashMap::new();
    for sentence in doc.sentences() {
        for id in segment_tokens(&sentence.tokens, vocab) {
            *counts.entry(id).or_insert(0) += 1;
        }
    }
    let mut out: Vec<_> = counts.into_iter().collect();
    out.sort_unstable_by_key(|(id, _)| *id);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(text: &str) -> Document {
        Document {
            id: "d1".into(),
            year: 1990,
            title: String::new(),
            abstract_text: text.into(),
        }
    }

    fn by_term<'v>(vocab: &'v Vocabulary, got: &[(ConceptId, u32)]) -> Vec<(&'v str, u32)> {
        got.iter().map(|(id, c)| (vocab.term(*id), *c)).collect()
    }

    #[test]
    fn longest_match_wins() {
        let vocab = Vocabulary::from_terms(["neural network", "model", "neural", "network"]).unwrap();
        let got = extract_concepts(&doc("neural network model"), &vocab);
        assert_eq!(by_term(&vocab, &got), vec![("neural network", 1), ("model", 1)]);
    }

    #[test]
    fn out_of_vocabulary_document_yields_nothing() {
        let vocab = Vocabulary::from_terms(["gear"]).unwrap();
        assert!(extract_concepts(&doc("unrelated words entirely"), &vocab).is_empty());
    }

    #[test]
    fn repeated_terms_are_counted() {
        let vocab = Vocabulary::from_terms(["network"]).unwrap();
        let got = extract_concepts(&doc("network network"), &vocab);
        assert_eq!(by_term(&vocab, &got), vec![("network", 2)]);
    }

    #[test]
    fn oov_tokens_inside_matches_are_skipped() {
        let vocab = Vocabulary::from_terms(["neural network"]).unwrap();
        let got = extract_concepts(&doc("neural zzz neural network"), &vocab);
        assert_eq!(by_term(&vocab, &got), vec![("neural network", 1)]);
    }

    #[test]
    fn counts_bounded_by_token_count_and_terms_in_vocab() {
        let vocab = Vocabulary::from_terms(["a b", "b", "c"]).unwrap();
        let d = doc("a b c b a b");
        let tokens: usize = d.sentences().iter().map(|s| s.tokens.len()).sum();
        let got = extract_concepts(&d, &vocab);
        let total: u32 = got.iter().map(|(_, c)| *c).sum();
        assert!((total as usize) <= tokens);
        for (id, _) in &got {
            assert!((*id as usize) < vocab.len());
        }
    }

    #[test]
    fn title_and_abstract_both_contribute() {
        let vocab = Vocabulary::from_terms(["gear"]).unwrap();
        let d = Document {
            id: "d2".into(),
            year: 1990,
            title: "A gear".into(),
            abstract_text: "The gear turns.".into(),
        };
        let got = extract_concepts(&d, &vocab);
        assert_eq!(by_term(&vocab, &got), vec![("gear", 2)]);
    }
}
