//! Splits raw bytes into pre-tokens before BPE merging.
//!
//! Reproduces the byte-level GPT-2 splitting pattern
//! `'s|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+`
//! with a hand-written scanner, so it also accepts bytes that are not valid
//! UTF-8 (each such byte is classified as punctuation).

use std::ops::Range;

use serde::{Deserialize, Serialize};
use unicode_general_category::{get_general_category, GeneralCategory};

/// How text is split before merging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreTokenizer {
    /// The GPT-2 pattern alone.
    Gpt2,
    /// Every numeric character isolated first, then the GPT-2 pattern on
    /// each remaining segment (StarCoder-style code vocabularies).
    IsolatedDigits,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Class {
    Letter,
    Number,
    Space,
    Other,
}

#[derive(Debug, Clone, Copy)]
struct Unit {
    start: usize,
    end: usize,
    ch: Option<char>,
    class: Class,
}

fn classify(c: char) -> Class {
    if c.is_whitespace() {
        return Class::Space;
    }
    if c.is_numeric() {
        return Class::Number;
    }
    use GeneralCategory::*;
    match get_general_category(c) {
        UppercaseLetter | LowercaseLetter | TitlecaseLetter | ModifierLetter | OtherLetter => Class::Letter,
        _ => Class::Other,
    }
}

fn units(bytes: &[u8]) -> Vec<Unit> {
    let mut out = Vec::with_capacity(bytes.len());
    let mut offset = 0;
    for chunk in bytes.utf8_chunks() {
        for (i, c) in chunk.valid().char_indices() {
            out.push(Unit {
                start: offset + i,
                end: offset + i + c.len_utf8(),
                ch: Some(c),
                class: classify(c),
            });
        }
        offset += chunk.valid().len();
        for _ in chunk.invalid() {
            out.push(Unit {
                start: offset,
                end: offset + 1,
                ch: None,
                class: Class::Other,
            });
            offset += 1;
        }
    }
    out
}

/// Returns the byte ranges of the pre-tokens of `bytes`, in order and
/// covering the input exactly.
pub fn split(bytes: &[u8], mode: PreTokenizer) -> Vec<Range<usize>> {
    let units = units(bytes);
    let mut out = Vec::new();
    match mode {
        PreTokenizer::Gpt2 => scan(&units, &mut out),
        PreTokenizer::IsolatedDigits => {
            let mut seg_start = 0;
            for (i, u) in units.iter().enumerate() {
                if u.class == Class::Number {
                    scan(&units[seg_start..i], &mut out);
                    out.push(u.start..u.end);
                    seg_start = i + 1;
                }
            }
            scan(&units[seg_start..], &mut out);
        }
    }
    out
}

fn contraction_len(units: &[Unit], i: usize) -> usize {
    let at = |k: usize| units.get(i + k).and_then(|u| u.ch);
    if at(0) != Some('\'') {
        return 0;
    }
    match (at(1), at(2)) {
        (Some('r'), Some('e')) | (Some('v'), Some('e')) | (Some('l'), Some('l')) => 3,
        (Some('s' | 't' | 'm' | 'd'), _) => 2,
        _ => 0,
    }
}

fn scan(units: &[Unit], out: &mut Vec<Range<usize>>) {
    let n = units.len();
    let mut i = 0;
    while i < n {
        let len = match_len(units, i);
        debug_assert!(len > 0);
        out.push(units[i].start..units[i + len - 1].end);
        i += len;
    }
}

fn match_len(units: &[Unit], i: usize) -> usize {
    let n = units.len();
    let c = contraction_len(units, i);
    if c > 0 {
        return c;
    }
    let run = |from: usize, class: Class| units[from..].iter().take_while(|u| u.class == class).count();
    let u = units[i];
    if u.ch == Some(' ') && i + 1 < n && units[i + 1].class != Class::Space {
        return 1 + run(i + 1, units[i + 1].class);
    }
    if u.class != Class::Space {
        return run(i, u.class);
    }
    // `\s+(?!\S)` backs off one character so a following word can take its
    // leading space; a lone space before a non-space falls through to `\s+`.
    let ws = run(i, Class::Space);
    if i + ws == n || ws == 1 {
        ws
    } else {
        ws - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pieces(s: &str, mode: PreTokenizer) -> Vec<&str> {
        split(s.as_bytes(), mode).into_iter().map(|r| &s[r]).collect()
    }

    #[test]
    fn gpt2_pattern_cases() {
        let g = PreTokenizer::Gpt2;
        assert_eq!(
            pieces("def foo():\n    pass", g),
            ["def", " foo", "():", "\n   ", " pass"]
        );
        assert_eq!(pieces("Hello world", g), ["Hello", " world"]);
        assert_eq!(pieces("it's we're", g), ["it", "'s", " we", "'re"]);
        assert_eq!(pieces("\n\nfoo", g), ["\n", "\n", "foo"]);
        assert_eq!(pieces("a  ", g), ["a", "  "]);
        assert_eq!(pieces("x='s'", g), ["x", "='", "s", "'"]);
        assert_eq!(pieces("x 12", g), ["x", " 12"]);
        assert_eq!(pieces("", g), Vec::<&str>::new());
    }

    #[test]
    fn isolated_digits() {
        let d = PreTokenizer::IsolatedDigits;
        assert_eq!(pieces("x 12", d), ["x", " ", "1", "2"]);
        assert_eq!(pieces("v2x", d), ["v", "2", "x"]);
    }

    #[test]
    fn invalid_utf8_is_covered() {
        let bytes = b"ab\xff\xfe cd";
        let ranges = split(bytes, PreTokenizer::Gpt2);
        let joined: Vec<u8> = ranges.iter().flat_map(|r| bytes[r.clone()].to_vec()).collect();
        assert_eq!(joined, bytes);
        assert_eq!(ranges, vec![0..2, 2..4, 4..7]);
    }
}
