//! Tokenization shared by extraction, graph building and embedding.

/// Lowercase and split on anything that is not alphanumeric.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Canonical form for tags and lexicon keys: tokens joined by one space.
pub fn normalize(text: &str) -> String {
    tokenize(text).join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_and_lowercases() {
        assert_eq!(
            tokenize("Where are the Toilets nearby?"),
            vec!["where", "are", "the", "toilets", "nearby"]
        );
        assert_eq!(tokenize("  ,, "), Vec::<String>::new());
        assert_eq!(normalize("Coffee-Shop"), "coffee shop");
    }
}
