//! Fixed English stopword list.
//!
//! Stopwords never become standalone vocabulary terms but may occur inside
//! multi-word phrases.

static STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "all", "also", "an", "and", "any", "are", "as", "at",
    "be", "because", "been", "being", "below", "between", "both", "but", "by", "can", "could",
    "did", "do", "does", "down", "during", "each", "either", "few", "for", "from", "further",
    "had", "has", "have", "having", "he", "her", "here", "herein", "him", "his", "how", "i", "if",
    "in", "into", "is", "it", "its", "itself", "just", "may", "might", "more", "most", "must",
    "no", "nor", "not", "of", "off", "on", "once", "one", "only", "or", "other", "our", "out",
    "over", "own", "said", "same", "shall", "she", "should", "since", "so", "some", "such",
    "than", "that", "the", "their", "them", "then", "there", "thereby", "therefore", "thereof",
    "these", "they", "this", "those", "through", "thus", "to", "too", "under", "until", "up",
    "upon", "use", "used", "using", "very", "was", "we", "were", "what", "when", "where",
    "whereby", "wherein", "whether", "which", "while", "who", "whose", "why", "will", "with",
    "within", "without", "would", "you", "your",
];

/// True when the token is on the fixed stopword list.
pub fn is_stopword(token: &str) -> bool {
    STOPWORDS.binary_search(&token).is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn list_is_sorted_for_binary_search() {
        for w in STOPWORDS.windows(2) {
            assert!(w[0] < w[1], "{:?} before {:?}", w[0], w[1]);
        }
    }

    #[test]
    fn membership() {
        assert!(is_stopword("the"));
        assert!(is_stopword("wherein"));
        assert!(!is_stopword("network"));
    }
}
