//! Word tokenizer shared by entity IDs, the trie and the scorers.
//!
//! A token is a run of non-space, non-hyphen characters or a single hyphen,
//! carrying any whitespace that precedes it. Concatenating the tokens of a
//! string reproduces it exactly.

/// End-of-sequence token; never produced by [`tokenize`].
pub const EOS: &str = "</s>";

pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut in_word = false;
    for ch in text.chars() {
        if ch.is_whitespace() {
            if in_word {
                tokens.push(std::mem::take(&mut current));
                in_word = false;
            }
            current.push(ch);
        } else if ch == '-' {
            if in_word {
                tokens.push(std::mem::take(&mut current));
                in_word = false;
            }
            current.push(ch);
            tokens.push(std::mem::take(&mut current));
        } else {
            current.push(ch);
            in_word = true;
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Concatenates tokens, skipping [`EOS`].
pub fn detokenize<S: AsRef<str>>(tokens: &[S]) -> String {
    tokens
        .iter()
        .map(AsRef::as_ref)
        .filter(|t| *t != EOS)
        .collect()
}

/// Lowercased words of a token or phrase, split on whitespace and hyphens.
pub fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| c.is_whitespace() || c == '-')
        .map(|w| {
            w.trim_matches(|c: char| !c.is_alphanumeric() && c != '#')
                .to_lowercase()
        })
        .filter(|w| !w.is_empty())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn splits_hierarchical_id() {
        assert_eq!(
            tokenize("Teaching Area-Building A"),
            vec!["Teaching", " Area", "-", "Building", " A"]
        );
        assert_eq!(tokenize("Dining-Cafe#12"), vec!["Dining", "-", "Cafe#12"]);
        assert!(tokenize("").is_empty());
    }

    #[test]
    fn words_are_lowercased() {
        let w: Vec<String> = words("Where is the Library?").collect();
        assert_eq!(w, vec!["where", "is", "the", "library"]);
    }

    proptest! {
        #[test]
        fn round_trips(s in "[ a-zA-Z0-9#\\-]{0,40}") {
            prop_assert_eq!(detokenize(&tokenize(&s)), s);
        }
    }
}
