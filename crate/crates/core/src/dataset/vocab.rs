use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::fnv1a;

pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";
pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;

/// Number of pseudo-ids unknown tokens hash into, above the trained range.
pub const HASH_BUCKETS: u64 = 1 << 20;

/// Lowercases, splits on whitespace and strips ASCII punctuation from token edges.
pub fn tokenize(command: &str) -> Result<Vec<String>> {
    let tokens: Vec<String> = command
        .split_whitespace()
        .map(|t| t.trim_matches(|c: char| c.is_ascii_punctuation()).to_lowercase())
        .filter(|t| !t.is_empty())
        .collect();
    if tokens.is_empty() {
        return Err(Error::data(format!("command {command:?} has no tokens")));
    }
    Ok(tokens)
}

/// How tokens missing from the vocabulary are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum UnkPolicy {
    /// Every unknown token maps to [`UNK_ID`].
    ReservedUnk,
    /// Unknown tokens hash to a pseudo-id at or above the vocabulary size;
    /// the encoder gives each such id a frozen random embedding.
    HashedRandom { seed: u64 },
}

impl Default for UnkPolicy {
    fn default() -> Self {
        UnkPolicy::HashedRandom { seed: 0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "VocabRepr", into = "VocabRepr")]
pub struct Vocabulary {
    id_to_token: Vec<String>,
    token_to_id: HashMap<String, usize>,
    unk_policy: UnkPolicy,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VocabRepr {
    tokens: Vec<String>,
    unk_policy: UnkPolicy,
}

impl TryFrom<VocabRepr> for Vocabulary {
    type Error = Error;

    fn try_from(repr: VocabRepr) -> Result<Self> {
        if repr.tokens.get(PAD_ID).map(String::as_str) != Some(PAD_TOKEN)
            || repr.tokens.get(UNK_ID).map(String::as_str) != Some(UNK_TOKEN)
        {
            return Err(Error::data("vocabulary must start with the reserved pad and unk tokens"));
        }
        let mut token_to_id = HashMap::with_capacity(repr.tokens.len());
        for (id, tok) in repr.tokens.iter().enumerate() {
            if token_to_id.insert(tok.clone(), id).is_some() {
                return Err(Error::data(format!("duplicate vocabulary token {tok:?}")));
            }
        }
        Ok(Vocabulary {
            id_to_token: repr.tokens,
            token_to_id,
            unk_policy: repr.unk_policy,
        })
    }
}

impl From<Vocabulary> for VocabRepr {
    fn from(v: Vocabulary) -> Self {
        VocabRepr {
            tokens: v.id_to_token,
            unk_policy: v.unk_policy,
        }
    }
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.id_to_token == other.id_to_token && self.unk_policy == other.unk_policy
    }
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    pub fn unk_policy(&self) -> UnkPolicy {
        self.unk_policy
    }

    pub fn with_unk_policy(&self, unk_policy: UnkPolicy) -> Self {
        Vocabulary {
            unk_policy,
            ..self.clone()
        }
    }

    pub fn contains(&self, token: &str) -> bool {
        self.token_to_id.contains_key(token)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.id_to_token.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }

    pub fn lookup(&self, token: &str) -> usize {
        if let Some(&id) = self.token_to_id.get(token) {
            return id;
        }
        match self.unk_policy {
            UnkPolicy::ReservedUnk => UNK_ID,
            UnkPolicy::HashedRandom { seed } => self.len() + (fnv1a(seed, token.as_bytes()) % HASH_BUCKETS) as usize,
        }
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.lookup(t)).collect()
    }
}

/// Assigns ids in first-occurrence order after the reserved pad/unk ids.
pub fn build_vocab<S: AsRef<str>>(commands: &[Vec<S>], unk_policy: UnkPolicy) -> Vocabulary {
    let mut id_to_token = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
    let mut token_to_id: HashMap<String, usize> = id_to_token.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();
    for tok in commands.iter().flatten() {
        let tok = tok.as_ref();
        if !token_to_id.contains_key(tok) {
            token_to_id.insert(tok.to_string(), id_to_token.len());
            id_to_token.push(tok.to_string());
        }
    }
    Vocabulary {
        id_to_token,
        token_to_id,
        unk_policy,
    }
}

/// Tokens of a command alongside their vocabulary ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedCommand {
    pub tokens: Vec<String>,
    pub token_ids: Vec<usize>,
}

impl TokenizedCommand {
    pub fn new(command: &str, vocab: &Vocabulary) -> Result<Self> {
        let tokens = tokenize(command)?;
        let token_ids = vocab.encode(&tokens);
        Ok(TokenizedCommand { tokens, token_ids })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &[&str]) -> Vec<String> {
        s.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("Hand me something to cut").unwrap(), toks(&["hand", "me", "something", "to", "cut"]));
        assert_eq!(tokenize("An item to wear.").unwrap(), toks(&["an", "item", "to", "wear"]));
        assert!(tokenize("   ").is_err());
        assert!(tokenize(" ... !").is_err());
    }

    #[test]
    fn first_occurrence_order() {
        let v = build_vocab(&[toks(&["a", "b"]), toks(&["b", "c"])], UnkPolicy::ReservedUnk);
        assert_eq!(v.tokens(), &toks(&["<pad>", "<unk>", "a", "b", "c"])[..]);
        assert_eq!(v.lookup("b"), 3);
        assert_eq!(v.lookup("zzz"), UNK_ID);
    }

    #[test]
    fn hashed_unknowns_are_stable_and_out_of_range() {
        let v = build_vocab(&[toks(&["give", "me"])], UnkPolicy::HashedRandom { seed: 11 });
        let a = v.lookup("dax");
        assert_eq!(a, v.lookup("dax"));
        assert!(a >= v.len());
        assert_eq!(v.lookup("me"), 3);
        let other_seed = build_vocab(&[toks(&["give", "me"])], UnkPolicy::HashedRandom { seed: 12 });
        assert_ne!(a, other_seed.lookup("dax"));
    }

    #[test]
    fn serde_round_trip() {
        let v = build_vocab(&[toks(&["x", "y"])], UnkPolicy::HashedRandom { seed: 3 });
        let json = serde_json::to_string(&v).unwrap();
        let back: Vocabulary = serde_json::from_str(&json).unwrap();
        assert_eq!(v, back);
        assert_eq!(back.lookup("y"), 3);
    }

    #[test]
    fn rejects_missing_reserved_tokens() {
        let bad = r#"{"tokens":["a","b"],"unk_policy":{"kind":"reserved-unk"}}"#;
        assert!(serde_json::from_str::<Vocabulary>(bad).is_err());
    }
}
