//! Byte-level BPE tokenization against published vocabulary files, plus the
//! token-healing suffix computation.

mod bpe;
pub mod bytemap;
mod healing;
mod load;
pub mod pretokenize;

use std::collections::HashMap;
use std::fmt;

pub use healing::HealingPlan;
pub use load::{load_tokenizer, load_tokenizer_with, parse_tokenizer};
pub use pretokenize::PreTokenizer;

use crate::error::{Error, Result};

pub type TokenId = u32;

/// An ordered list of token ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct TokenSequence(pub Vec<TokenId>);

impl TokenSequence {
    pub fn new(ids: Vec<TokenId>) -> Self {
        TokenSequence(ids)
    }

    pub fn ids(&self) -> &[TokenId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<TokenId> {
        self.0
    }
}

impl From<Vec<TokenId>> for TokenSequence {
    fn from(ids: Vec<TokenId>) -> Self {
        TokenSequence(ids)
    }
}

impl std::ops::Deref for TokenSequence {
    type Target = [TokenId];

    fn deref(&self) -> &[TokenId] {
        &self.0
    }
}

/// An immutable byte-level BPE vocabulary with its merge rules.
///
/// Tokens are stored as raw bytes; the printable byte alphabet only exists
/// at the file boundary. Cloning is cheap enough for tests but the engine
/// shares one instance behind a reference.
pub struct TokenizerSpec {
    tokens: Vec<Box<[u8]>>,
    by_bytes: HashMap<Box<[u8]>, TokenId>,
    // None where the vocabulary has no token for the byte
    byte_tokens: [Option<TokenId>; 256],
    merges: HashMap<(TokenId, TokenId), (u32, TokenId)>,
    merge_count: usize,
    reachable: Vec<bool>,
    // reachable ids sorted by their byte strings, for prefix range queries
    sorted: Vec<TokenId>,
    max_token_len: usize,
    pretokenizer: PreTokenizer,
    id: String,
}

impl fmt::Debug for TokenizerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TokenizerSpec")
            .field("id", &self.id)
            .field("vocab_size", &self.tokens.len())
            .field("merges", &self.merge_count)
            .field("pretokenizer", &self.pretokenizer)
            .finish()
    }
}

impl TokenizerSpec {
    /// Builds a tokenizer from raw token byte strings (indexed by id) and
    /// merge rules given as pairs of token ids in priority order.
    ///
    /// Each merge's concatenation must itself be a token. Bytes without a
    /// single-byte token cannot be encoded and are dropped by
    /// [`encode`](Self::encode).
    pub fn from_parts(
        tokens: Vec<Vec<u8>>,
        merges: Vec<(TokenId, TokenId)>,
        pretokenizer: Option<PreTokenizer>,
        id: impl Into<String>,
    ) -> Result<Self> {
        let mut by_bytes = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() {
                return Err(Error::Integrity(format!("token {i} is empty")));
            }
            if let Some(prev) = by_bytes.insert(t.clone().into_boxed_slice(), i as TokenId) {
                return Err(Error::Integrity(format!(
                    "duplicate token {:?} (ids {prev} and {i})",
                    bytemap::encode_bytes(t)
                )));
            }
        }
        let mut byte_tokens = [None; 256];
        let mut reachable = vec![false; tokens.len()];
        for b in 0..=255u8 {
            if let Some(&id) = by_bytes.get(&[b][..]) {
                byte_tokens[b as usize] = Some(id);
                reachable[id as usize] = true;
            }
        }
        let mut merge_map = HashMap::with_capacity(merges.len());
        for (rank, &(a, b)) in merges.iter().enumerate() {
            let (ta, tb) = match (tokens.get(a as usize), tokens.get(b as usize)) {
                (Some(ta), Some(tb)) => (ta, tb),
                _ => return Err(Error::Integrity(format!("merge {rank} references an unknown token id"))),
            };
            let joined: Vec<u8> = ta.iter().chain(tb.iter()).copied().collect();
            let merged = *by_bytes.get(joined.as_slice()).ok_or_else(|| {
                Error::Integrity(format!(
                    "merge {rank} produces {:?}, which is not in the vocabulary",
                    bytemap::encode_bytes(&joined)
                ))
            })?;
            reachable[merged as usize] = true;
            // first occurrence wins, as in the reference implementation
            merge_map.entry((a, b)).or_insert((rank as u32, merged));
        }
        let mut sorted: Vec<TokenId> = (0..tokens.len() as TokenId)
            .filter(|&i| reachable[i as usize])
            .collect();
        sorted.sort_by(|&x, &y| tokens[x as usize].cmp(&tokens[y as usize]));
        let max_token_len = sorted.iter().map(|&i| tokens[i as usize].len()).max().unwrap_or(1);
        let tokens: Vec<Box<[u8]>> = tokens.into_iter().map(Vec::into_boxed_slice).collect();
        let pretokenizer = pretokenizer.unwrap_or_else(|| detect_pretokenizer(&tokens, &reachable));
        Ok(TokenizerSpec {
            tokens,
            by_bytes,
            byte_tokens,
            merges: merge_map,
            merge_count: merges.len(),
            reachable,
            sorted,
            max_token_len,
            pretokenizer,
            id: id.into(),
        })
    }

    /// The fallback tokenizer: 256 byte tokens, no merges.
    pub fn byte_level() -> Self {
        let tokens = (0..=255u8).map(|b| vec![b]).collect();
        Self::from_parts(tokens, Vec::new(), Some(PreTokenizer::Gpt2), "byte-level")
            .expect("byte-level vocabulary is well formed")
    }

    /// Builds a vocabulary by starting from the 256 byte tokens and
    /// appending one token per merge of two existing byte strings.
    pub fn from_byte_merges(merges: &[(&[u8], &[u8])], id: impl Into<String>) -> Result<Self> {
        let mut tokens: Vec<Vec<u8>> = (0..=255u8).map(|b| vec![b]).collect();
        let mut index: HashMap<Vec<u8>, TokenId> = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as TokenId))
            .collect();
        let mut pairs = Vec::with_capacity(merges.len());
        for (a, b) in merges {
            let lookup = |s: &[u8]| {
                index.get(s).copied().ok_or_else(|| {
                    Error::Integrity(format!("merge operand {:?} is not a token", bytemap::encode_bytes(s)))
                })
            };
            let (ia, ib) = (lookup(a)?, lookup(b)?);
            let joined = [*a, *b].concat();
            if !index.contains_key(&joined) {
                index.insert(joined.clone(), tokens.len() as TokenId);
                tokens.push(joined);
            }
            pairs.push((ia, ib));
        }
        Self::from_parts(tokens, pairs, Some(PreTokenizer::Gpt2), id)
    }

    /// Bytes that have no single-byte token, in ascending order.
    pub fn missing_bytes(&self) -> Vec<u8> {
        (0..=255u8)
            .filter(|&b| self.byte_tokens[b as usize].is_none())
            .collect()
    }

    /// True when every byte string round-trips through encode and decode.
    pub fn is_lossless(&self) -> bool {
        self.byte_tokens.iter().all(Option::is_some)
    }

    pub fn vocab_size(&self) -> usize {
        self.tokens.len()
    }

    /// Identifier binding databases and model sessions to this vocabulary.
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn pretokenizer(&self) -> PreTokenizer {
        self.pretokenizer
    }

    pub fn merge_count(&self) -> usize {
        self.merge_count
    }

    pub fn max_token_len(&self) -> usize {
        self.max_token_len
    }

    /// Raw bytes of one token.
    pub fn token_bytes(&self, id: TokenId) -> Result<&[u8]> {
        self.tokens
            .get(id as usize)
            .map(|t| &t[..])
            .ok_or(Error::TokenOutOfRange {
                id,
                vocab_size: self.tokens.len(),
            })
    }

    /// The token string in the vocabulary file's printable alphabet.
    pub fn token_string(&self, id: TokenId) -> Result<String> {
        self.token_bytes(id).map(bytemap::encode_bytes)
    }

    pub fn token_id(&self, bytes: &[u8]) -> Option<TokenId> {
        self.by_bytes.get(bytes).copied()
    }

    /// Whether plain text can ever encode to this token (single bytes and
    /// merge products). Added special tokens are not reachable.
    pub fn is_reachable(&self, id: TokenId) -> bool {
        self.reachable.get(id as usize).copied().unwrap_or(false)
    }

    pub fn encode(&self, text: &[u8]) -> TokenSequence {
        let mut out = Vec::with_capacity(text.len() / 3 + 1);
        for range in pretokenize::split(text, self.pretokenizer) {
            bpe::merge_word(self, &text[range], &mut out);
        }
        TokenSequence(out)
    }

    pub fn encode_str(&self, text: &str) -> TokenSequence {
        self.encode(text.as_bytes())
    }

    pub fn decode(&self, ids: &[TokenId]) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(ids.len() * 4);
        for &id in ids {
            out.extend_from_slice(self.token_bytes(id)?);
        }
        Ok(out)
    }

    /// Lossy UTF-8 view of [`decode`](Self::decode).
    pub fn decode_lossy(&self, ids: &[TokenId]) -> Result<String> {
        Ok(String::from_utf8_lossy(&self.decode(ids)?).into_owned())
    }

    /// Ids of reachable tokens whose bytes start with `prefix`, in byte order.
    pub fn tokens_with_prefix(&self, prefix: &[u8]) -> &[TokenId] {
        let start = self.sorted.partition_point(|&i| &self.tokens[i as usize][..] < prefix);
        let len = self.sorted[start..]
            .iter()
            .take_while(|&&i| self.tokens[i as usize].starts_with(prefix))
            .count();
        &self.sorted[start..start + len]
    }

    /// True iff `s` is a strict prefix of some reachable token.
    pub fn is_strict_token_prefix(&self, s: &[u8]) -> bool {
        self.tokens_with_prefix(s)
            .iter()
            .any(|&i| self.tokens[i as usize].len() > s.len())
    }

    /// Tokens eligible while `pending` bytes remain to be regenerated: the
    /// token is a prefix of `pending`, or `pending` is a prefix of the token.
    pub fn tokens_compatible_with(&self, pending: &[u8]) -> Vec<TokenId> {
        let mut out: Vec<TokenId> = (1..pending.len())
            .filter_map(|len| self.token_id(&pending[..len]))
            .filter(|&i| self.is_reachable(i))
            .collect();
        out.extend_from_slice(self.tokens_with_prefix(pending));
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn compute_healing(&self, text: &[u8]) -> HealingPlan {
        healing::compute(self, text)
    }
}

fn detect_pretokenizer(tokens: &[Box<[u8]>], reachable: &[bool]) -> PreTokenizer {
    let multi_digit = tokens
        .iter()
        .zip(reachable)
        .any(|(t, &r)| r && t.windows(2).any(|w| w[0].is_ascii_digit() && w[1].is_ascii_digit()));
    if multi_digit {
        PreTokenizer::Gpt2
    } else {
        PreTokenizer::IsolatedDigits
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> TokenizerSpec {
        TokenizerSpec::from_byte_merges(
            &[
                (b" ", b"w"),
                (b" w", b"o"),
                (b"r", b"l"),
                (b"rl", b"d"),
                (b" wo", b"rld"),
            ],
            "toy",
        )
        .unwrap()
    }

    #[test]
    fn byte_level_fallback_one_token_per_byte() {
        let t = TokenizerSpec::byte_level();
        assert_eq!(t.vocab_size(), 256);
        let ids = t.encode(b"def x");
        assert_eq!(ids.len(), 5);
        assert_eq!(t.decode(&ids).unwrap(), b"def x");
    }

    #[test]
    fn toy_merges_apply() {
        let t = toy();
        let ids = t.encode(b"Hello world");
        let pieces: Vec<String> = ids.iter().map(|&i| t.token_string(i).unwrap()).collect();
        assert_eq!(pieces, ["H", "e", "l", "l", "o", "Ġworld"]);
    }

    #[test]
    fn empty_input_and_out_of_range() {
        let t = toy();
        assert!(t.encode(b"").is_empty());
        assert_eq!(t.decode(&[]).unwrap(), b"");
        assert!(matches!(
            t.decode(&[9999]),
            Err(Error::TokenOutOfRange { id: 9999, .. })
        ));
    }

    #[test]
    fn prefix_queries() {
        let t = toy();
        let with: Vec<String> = t
            .tokens_with_prefix(b" wo")
            .iter()
            .map(|&i| t.token_string(i).unwrap())
            .collect();
        assert_eq!(with, ["Ġwo", "Ġworld"]);
        assert!(t.is_strict_token_prefix(b" wo"));
        assert!(!t.is_strict_token_prefix(b" world"));
        let compat: Vec<String> = t
            .tokens_compatible_with(b" wo")
            .iter()
            .map(|&i| t.token_string(i).unwrap())
            .collect();
        assert_eq!(compat, ["Ġ", "Ġw", "Ġwo", "Ġworld"]);
    }

    #[test]
    fn bytes_without_a_token_are_dropped() {
        let tokens = (0..=254u8).map(|b| vec![b]).collect();
        let t = TokenizerSpec::from_parts(tokens, vec![], None, "x").unwrap();
        assert_eq!(t.missing_bytes(), [255]);
        assert!(!t.is_lossless());
        assert_eq!(t.decode(&t.encode(b"a\xffb")).unwrap(), b"ab");
        assert!(TokenizerSpec::byte_level().is_lossless());
    }
}
