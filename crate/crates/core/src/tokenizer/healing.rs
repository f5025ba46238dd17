use serde::{Deserialize, Serialize};

use super::TokenizerSpec;

/// The result of rolling an input back to a token boundary.
///
/// `trimmed_input ++ pending` is always the original input. `pending` is the
/// longest suffix of the input that is a strict prefix of some reachable
/// vocabulary token, or empty when no suffix qualifies.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HealingPlan {
    pub trimmed_input: Vec<u8>,
    pub pending: Vec<u8>,
    /// Trailing tokens of the original tokenization that overlap `pending`.
    pub rolled_back_tokens: usize,
}

impl HealingPlan {
    /// A plan that keeps the input as is.
    pub fn disabled(text: &[u8]) -> Self {
        HealingPlan {
            trimmed_input: text.to_vec(),
            pending: Vec::new(),
            rolled_back_tokens: 0,
        }
    }

    pub fn is_active(&self) -> bool {
        !self.pending.is_empty()
    }
}

pub(super) fn compute(spec: &TokenizerSpec, text: &[u8]) -> HealingPlan {
    let limit = spec.max_token_len().min(text.len());
    let pending_len = (1..=limit)
        .rev()
        .find(|&len| spec.is_strict_token_prefix(&text[text.len() - len..]))
        .unwrap_or(0);
    if pending_len == 0 {
        return HealingPlan::disabled(text);
    }
    let cut = text.len() - pending_len;

    // Count how many trailing tokens of the full tokenization reach past `cut`.
    let ids = spec.encode(text);
    let mut end = text.len();
    let mut rolled_back = 0;
    for &id in ids.iter().rev() {
        if end <= cut {
            break;
        }
        rolled_back += 1;
        end -= spec.token_bytes(id).map(|t| t.len()).unwrap_or(0);
    }
    HealingPlan {
        trimmed_input: text[..cut].to_vec(),
        pending: text[cut..].to_vec(),
        rolled_back_tokens: rolled_back,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig2_vocab() -> TokenizerSpec {
        TokenizerSpec::from_byte_merges(
            &[
                (b"H", b"e"),
                (b"He", b"l"),
                (b"Hel", b"l"),
                (b"Hell", b"o"),
                (b" ", b"w"),
                (b" w", b"o"),
                (b"r", b"l"),
                (b"rl", b"d"),
                (b" wo", b"rld"),
            ],
            "fig2",
        )
        .unwrap()
    }

    #[test]
    fn hello_wo_rolls_back_one_token() {
        let t = fig2_vocab();
        let plan = t.compute_healing(b"Hello wo");
        assert_eq!(plan.pending, b" wo");
        assert_eq!(plan.trimmed_input, b"Hello");
        assert_eq!(plan.rolled_back_tokens, 1);
    }

    #[test]
    fn complete_token_without_extension_is_not_healed() {
        let t = fig2_vocab();
        let plan = t.compute_healing(b"Hello world");
        // "d" alone extends nothing; " world" is a full token with no longer one
        assert!(plan.pending.is_empty());
        assert_eq!(plan.trimmed_input, b"Hello world");
    }

    #[test]
    fn single_char_input() {
        let t = TokenizerSpec::from_byte_merges(&[(b"x", b"y")], "xy").unwrap();
        let plan = t.compute_healing(b"x");
        assert_eq!(plan.pending, b"x");
        assert!(plan.trimmed_input.is_empty());
        assert_eq!(plan.rolled_back_tokens, 1);
    }

    #[test]
    fn suffix_may_span_several_tokens() {
        // "zab" encodes as z, a, b; "ab" is a strict prefix of the token "abc"
        let t = TokenizerSpec::from_byte_merges(&[(b"b", b"c"), (b"a", b"bc")], "span").unwrap();
        let plan = t.compute_healing(b"zab");
        assert_eq!(plan.pending, b"ab");
        assert_eq!(plan.rolled_back_tokens, 2);
    }

    #[test]
    fn empty_input() {
        let t = fig2_vocab();
        assert_eq!(t.compute_healing(b""), HealingPlan::disabled(b""));
    }
}
