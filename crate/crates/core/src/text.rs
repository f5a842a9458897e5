//! Tokenization and sentence segmentation shared by every reader.
//!
//! The tokenizer is deliberately simple so that span indices are stable across
//! modules: a token is either a maximal run of alphanumeric characters (plus
//! `_`), or a single non-whitespace, non-alphanumeric character. All output is
//! lowercased.

/// Splits `text` into lowercased tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() || ch == '_' {
            word.extend(ch.to_lowercase());
            continue;
        }
        if !word.is_empty() {
            tokens.push(std::mem::take(&mut word));
        }
        if !ch.is_whitespace() {
            tokens.push(ch.to_lowercase().collect());
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    tokens
}

/// Lowercases already-tokenized input.
pub fn lowercase_all<S: AsRef<str>>(tokens: &[S]) -> Vec<String> {
    tokens.iter().map(|t| t.as_ref().to_lowercase()).collect()
}

/// Tokens that never end a sentence when followed by a period.
pub const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "st", "jr", "sr", "vs", "etc", "inc", "ltd", "co", "corp",
    "no", "mt", "ft", "gen", "col", "capt", "lt", "sgt", "rev", "gov", "sen", "rep", "jan", "feb",
    "mar", "apr", "jun", "jul", "aug", "sep", "sept", "oct", "nov", "dec", "approx", "dept", "est",
    "fig", "vol", "al",
];

fn is_terminal(tok: &str) -> bool {
    matches!(tok, "." | "!" | "?")
}

fn guards_period(prev: &str) -> bool {
    if ABBREVIATIONS.contains(&prev) {
        return true;
    }
    // single-letter initials ("j. r. r. tolkien")
    let mut chars = prev.chars();
    matches!((chars.next(), chars.next()), (Some(c), None) if c.is_alphabetic())
}

/// Returns half-open token ranges, one per sentence.
///
/// A sentence ends at `.`, `!` or `?` (plus any directly following closing
/// quotes or brackets), unless the period follows an abbreviation or a
/// single-letter initial, or is immediately followed by a digit token.
pub fn sentence_bounds<S: AsRef<str>>(tokens: &[S]) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut k = 0;
    while k < tokens.len() {
        let tok = tokens[k].as_ref();
        let mut ends = is_terminal(tok);
        if ends && tok == "." && k > 0 && guards_period(tokens[k - 1].as_ref()) {
            ends = false;
        }
        if ends && tok == "." {
            if let Some(next) = tokens.get(k + 1) {
                if next
                    .as_ref()
                    .chars()
                    .next()
                    .is_some_and(|c| c.is_ascii_digit())
                    && k > 0
                    && tokens[k - 1].as_ref().chars().all(|c| c.is_ascii_digit())
                {
                    ends = false;
                }
            }
        }
        if ends {
            let mut end = k + 1;
            while end < tokens.len() && matches!(tokens[end].as_ref(), "\"" | "'" | ")" | "]") {
                end += 1;
            }
            out.push(start..end);
            start = end;
            k = end;
            continue;
        }
        k += 1;
    }
    if start < tokens.len() {
        out.push(start..tokens.len());
    }
    out
}

/// English personal, possessive and reflexive pronouns.
pub const PRONOUNS: &[&str] = &[
    "i",
    "me",
    "my",
    "mine",
    "myself",
    "you",
    "your",
    "yours",
    "yourself",
    "yourselves",
    "he",
    "him",
    "his",
    "himself",
    "she",
    "her",
    "hers",
    "herself",
    "it",
    "its",
    "itself",
    "we",
    "us",
    "our",
    "ours",
    "ourselves",
    "they",
    "them",
    "their",
    "theirs",
    "themselves",
    "one",
    "oneself",
    "this",
    "that",
    "these",
    "those",
    "who",
    "whom",
    "whose",
    "which",
];

/// True when every token of the mention is a pronoun.
pub fn is_pronoun_mention<S: AsRef<str>>(tokens: &[S]) -> bool {
    !tokens.is_empty()
        && tokens
            .iter()
            .all(|t| PRONOUNS.contains(&t.as_ref().to_lowercase().as_str()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_words_and_punctuation() {
        assert_eq!(
            tokenize("Hello, World's  end-game!"),
            vec!["hello", ",", "world", "'", "s", "end", "-", "game", "!"]
        );
        assert!(tokenize("   ").is_empty());
    }

    #[test]
    fn tokenization_is_concatenative_at_whitespace() {
        let a = tokenize("the cat");
        let b = tokenize("sat down.");
        let joined = tokenize("the cat sat down.");
        assert_eq!([a, b].concat(), joined);
    }

    #[test]
    fn sentence_split_with_abbreviations() {
        let toks =
            tokenize("Mr. Smith went to Washington. He met Dr. J. Doe! Then 3.5 hours passed.");
        let bounds = sentence_bounds(&toks);
        assert_eq!(bounds.len(), 3);
        assert_eq!(toks[bounds[0].clone()].last().unwrap(), ".");
        assert_eq!(toks[bounds[1].clone()].last().unwrap(), "!");
    }

    #[test]
    fn trailing_fragment_is_a_sentence() {
        let toks = tokenize("no terminal punctuation here");
        assert_eq!(sentence_bounds(&toks), vec![0..4]);
    }

    #[test]
    fn pronoun_detection() {
        assert!(is_pronoun_mention(&["he"]));
        assert!(is_pronoun_mention(&["She"]));
        assert!(!is_pronoun_mention(&["the", "company"]));
        assert!(!is_pronoun_mention::<&str>(&[]));
    }
}
