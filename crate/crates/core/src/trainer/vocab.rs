use std::collections::HashMap;

pub type TokenId = u32;

/// Reserved id standing in for the null input.
pub const NULL_ID: TokenId = 0;
/// Reserved id for tokens outside the vocabulary.
pub const OOV_ID: TokenId = 1;
pub const NULL_TOKEN: &str = "<null>";
pub const OOV_TOKEN: &str = "<oov>";
/// Token sequences are cut to this length.
pub const MAX_TOKENS: usize = 256;

/// Lowercase and split into alphanumeric runs; every other non-space
/// character is a token of its own.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut word = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            word.extend(ch.to_lowercase());
            continue;
        }
        if !word.is_empty() {
            out.push(std::mem::take(&mut word));
        }
        if !ch.is_whitespace() {
            out.push(ch.to_lowercase().collect());
        }
    }
    if !word.is_empty() {
        out.push(word);
    }
    out
}

/// Frequency-ordered token vocabulary with the two reserved ids in front.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl Vocab {
    /// Keep the `cap - 2` most frequent tokens (ties broken lexicographically).
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>, cap: usize) -> Self {
        let mut counts: HashMap<String, usize> = HashMap::new();
        for text in texts {
            for tok in tokenize(text) {
                *counts.entry(tok).or_default() += 1;
            }
        }
        let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut tokens = vec![NULL_TOKEN.to_string(), OOV_TOKEN.to_string()];
        tokens.extend(
            ranked
                .into_iter()
                .take(cap.saturating_sub(2))
                .map(|(t, _)| t),
        );
        Self::from_tokens(tokens)
    }

    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as TokenId))
            .collect();
        Self { tokens, index }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> TokenId {
        self.index.get(token).copied().unwrap_or(OOV_ID)
    }

    /// Empty (or all-whitespace) text encodes as `[NULL]`.
    pub fn encode(&self, text: &str) -> Vec<TokenId> {
        let mut ids: Vec<TokenId> = tokenize(text)
            .iter()
            .take(MAX_TOKENS)
            .map(|t| self.id(t))
            .collect();
        if ids.is_empty() {
            ids.push(NULL_ID);
        }
        ids
    }
}
