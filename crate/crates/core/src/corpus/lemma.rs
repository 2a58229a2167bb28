//! Rule-table lemmatizer.
//!
//! A small fixed cascade (irregular forms, plural endings, -ing/-ed endings
//! with doubling and e-restoration) iterated to a fixed point, which makes
//! `lemmatize(lemmatize(t)) == lemmatize(t)` hold for every token by
//! construction.

/// Irregular or guarded forms checked before any suffix rule.
static IRREGULAR: &[(&str, &str)] = &[
    ("analyses", "analysis"),
    ("apparatuses", "apparatus"),
    ("axes", "axis"),
    ("children", "child"),
    ("criteria", "criterion"),
    ("feet", "foot"),
    ("gases", "gas"),
    ("indices", "index"),
    ("lens", "lens"),
    ("lenses", "lens"),
    ("matrices", "matrix"),
    ("media", "medium"),
    ("men", "man"),
    ("mice", "mouse"),
    ("series", "series"),
    ("species", "species"),
    ("teeth", "tooth"),
    ("vertices", "vertex"),
    ("women", "woman"),
];

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u')
}

fn has_vowel(s: &str) -> bool {
    s.chars().any(|c| is_vowel(c) || c == 'y')
}

/// Restores stems mangled by -ing/-ed stripping: undo consonant doubling
/// (stopp -> stop) and re-add a final e after consonant-vowel-consonant
/// (mak -> make). Final l/s/z doubling is kept (call stays call).
fn restore(mut stem: String) -> String {
    let chars: Vec<char> = stem.chars().collect();
    let n = chars.len();
    if n >= 2 && chars[n - 1] == chars[n - 2] {
        let c = chars[n - 1];
        if c.is_ascii_alphabetic() && !is_vowel(c) && !matches!(c, 'l' | 's' | 'z') {
            stem.pop();
            return stem;
        }
    }
    if n >= 3 {
        let (a, b, c) = (chars[n - 3], chars[n - 2], chars[n - 1]);
        let cvc = a.is_ascii_alphabetic()
            && !is_vowel(a)
            && is_vowel(b)
            && c.is_ascii_alphabetic()
            && !is_vowel(c)
            && !matches!(c, 'w' | 'x' | 'y');
        if cvc {
            stem.push('e');
        }
    }
    stem
}

fn strip_plural(token: &str) -> String {
    let n = token.len();
    if token.ends_with("ies") && n > 4 {
        return format!("{}y", &token[..n - 3]);
    }
    if (token.ends_with("xes")
        || token.ends_with("zes")
        || token.ends_with("ches")
        || token.ends_with("shes")
        || token.ends_with("sses"))
        && n > 4
    {
        return token[..n - 2].to_string();
    }
    if token.ends_with("ss") || token.ends_with("us") || token.ends_with("is") {
        return token.to_string();
    }
    if token.ends_with('s') && n >= 4 {
        return token[..n - 1].to_string();
    }
    token.to_string()
}

fn strip_verb_suffix(token: String) -> String {
    let n = token.len();
    if token.ends_with("ing") && n >= 6 {
        let stem = &token[..n - 3];
        if has_vowel(stem) {
            return restore(stem.to_string());
        }
        return token;
    }
    if token.ends_with("ied") && n > 4 {
        return format!("{}y", &token[..n - 3]);
    }
    if token.ends_with("eed") {
        if n >= 6 {
            return token[..n - 1].to_string();
        }
        return token;
    }
    if token.ends_with("ed") && n >= 5 {
        let stem = &token[..n - 2];
        if has_vowel(stem) {
            return restore(stem.to_string());
        }
    }
    token
}

fn step(token: &str) -> String {
    if let Ok(i) = IRREGULAR.binary_search_by_key(&token, |(t, _)| t) {
        return IRREGULAR[i].1.to_string();
    }
    strip_verb_suffix(strip_plural(token))
}

/// Canonical form of a lowercased token.
pub fn lemmatize(token: &str) -> String {
    let mut current = token.to_string();
    // Irregular rewrites land on fixed points and suffix rules strictly
    // shrink the token, so this terminates; the bound is belt and braces.
    for _ in 0..=token.len() {
        let next = step(&current);
        if next == current {
            return current;
        }
        current = next;
    }
    current
}
