//! Token/id vocabulary with a reserved unknown token.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use super::LmError;

/// Reserved id for the unknown token.
pub const UNK_ID: u32 = 0;
/// Reserved id of the synthetic open symbol in vocabularies built by
/// [`Vocab::synthetic`].
pub const ALPHA_ID: u32 = 1;
/// Reserved id of the synthetic close symbol in vocabularies built by
/// [`Vocab::synthetic`].
pub const OMEGA_ID: u32 = 2;

pub const UNK_TOKEN: &str = "<unk>";
pub const ALPHA_TOKEN: &str = "ALPHA";
pub const OMEGA_TOKEN: &str = "OMEGA";

/// Bijective token ↔ id mapping. Id 0 is always `<unk>`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Vocab {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

impl Vocab {
    /// Builds a vocabulary from unique tokens; `<unk>` is prepended at id 0.
    /// Duplicate or reserved tokens are rejected.
    pub fn new(tokens: impl IntoIterator<Item = String>) -> Result<Self, LmError> {
        let mut v = Vocab {
            tokens: vec![UNK_TOKEN.to_string()],
            index: HashMap::new(),
        };
        v.index.insert(UNK_TOKEN.to_string(), UNK_ID);
        for t in tokens {
            if v.index.contains_key(&t) {
                return Err(LmError::DuplicateToken(t));
            }
            let id = v.tokens.len() as u32;
            v.index.insert(t.clone(), id);
            v.tokens.push(t);
        }
        Ok(v)
    }

    /// Vocabulary for synthetic corpora: `<unk>`, `ALPHA`, `OMEGA`, then
    /// `t0..t{sigma_size-1}`.
    pub fn synthetic(sigma_size: usize) -> Vocab {
        let names = [ALPHA_TOKEN.to_string(), OMEGA_TOKEN.to_string()]
            .into_iter()
            .chain((0..sigma_size).map(|i| format!("t{i}")));
        Vocab::new(names).expect("synthetic token names are unique")
    }

    /// Builds a vocabulary from whitespace-separated text, lowercased, with
    /// types appearing fewer than `min_count` times left out (mapped to unk).
    /// Types are ordered by first occurrence.
    pub fn from_text(text: &str, min_count: usize) -> Vocab {
        let mut counts: HashMap<String, usize> = HashMap::new();
        let mut order: Vec<String> = Vec::new();
        for tok in text.split_whitespace() {
            let t = tok.to_lowercase();
            let c = counts.entry(t.clone()).or_insert(0);
            if *c == 0 {
                order.push(t);
            }
            *c += 1;
        }
        let kept = order.into_iter().filter(|t| counts[t] >= min_count);
        Vocab::new(kept).expect("first-occurrence order has no duplicates")
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    /// Id of `token`, or [`UNK_ID`] when out of vocabulary.
    pub fn id_or_unk(&self, token: &str) -> u32 {
        self.id(token).unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(|s| s.as_str())
    }

    /// Encodes whitespace-separated text, lowercasing and mapping OOV to unk.
    pub fn encode(&self, text: &str) -> Vec<u32> {
        text.split_whitespace()
            .map(|t| self.id_or_unk(&t.to_lowercase()))
            .collect()
    }

    /// Encodes already-normalized tokens (no case folding).
    pub fn encode_tokens<'a>(&self, tokens: impl IntoIterator<Item = &'a str>) -> Vec<u32> {
        tokens.into_iter().map(|t| self.id_or_unk(t)).collect()
    }

    pub fn decode(&self, ids: &[u32]) -> String {
        ids.iter()
            .map(|&id| self.token(id).unwrap_or(UNK_TOKEN))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Rebuilds the token → id index after deserialization.
    pub(crate) fn rebuild_index(&mut self) {
        self.index = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("vocab serializes")
    }

    pub fn from_json(s: &str) -> Result<Vocab, LmError> {
        let mut v: Vocab = serde_json::from_str(s).map_err(|e| LmError::VocabJson(e.to_string()))?;
        v.rebuild_index();
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_reserved_ids() {
        let v = Vocab::synthetic(4);
        assert_eq!(v.len(), 7);
        assert_eq!(v.id(UNK_TOKEN), Some(UNK_ID));
        assert_eq!(v.id(ALPHA_TOKEN), Some(ALPHA_ID));
        assert_eq!(v.id(OMEGA_TOKEN), Some(OMEGA_ID));
        assert_eq!(v.id("t0"), Some(3));
        assert_eq!(v.id("t3"), Some(6));
        assert_eq!(v.token(3), Some("t0"));
    }

    #[test]
    fn bijective_round_trip() {
        let v = Vocab::synthetic(10);
        for id in 0..v.len() as u32 {
            let t = v.token(id).unwrap();
            assert_eq!(v.id(t), Some(id));
        }
    }

    #[test]
    fn json_round_trip_preserves_ids() {
        let v = Vocab::from_text("the cat sat on the mat the cat", 1);
        let j = v.to_json();
        let w = Vocab::from_json(&j).unwrap();
        assert_eq!(v, w);
        assert_eq!(w.id("the"), Some(1));
        assert_eq!(w.id("mat"), w.id("mat"));
        assert_eq!(w.id_or_unk("zebra"), UNK_ID);
    }

    #[test]
    fn min_count_filters_rare_types() {
        let v = Vocab::from_text("a a a b", 2);
        assert_eq!(v.id("a"), Some(1));
        assert_eq!(v.id("b"), None);
        assert_eq!(v.encode("a b"), vec![1, UNK_ID]);
    }

    #[test]
    fn duplicate_token_rejected() {
        assert!(Vocab::new(vec!["x".into(), "x".into()]).is_err());
    }
}
