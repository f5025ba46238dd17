//! Vocabulary file loading: a JSON object mapping token string to id, and a
//! merges text file with one space-separated pair per line.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::{Deserializer, MapAccess, Visitor};
use sha2::{Digest, Sha256};

use super::{bytemap, PreTokenizer, TokenId, TokenizerSpec};
use crate::error::{Error, Result};

struct Entries(Vec<(String, u64)>);

impl<'de> serde::Deserialize<'de> for Entries {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Entries;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an object mapping token strings to ids")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<Entries, A::Error> {
                let mut out = Vec::with_capacity(map.size_hint().unwrap_or(0));
                while let Some((k, v)) = map.next_entry::<String, u64>()? {
                    out.push((k, v));
                }
                Ok(Entries(out))
            }
        }
        d.deserialize_map(V)
    }
}

fn resolve(path: &Path) -> (PathBuf, PathBuf) {
    if path.is_dir() {
        (path.join("vocab.json"), path.join("merges.txt"))
    } else {
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        (path.to_path_buf(), dir.join("merges.txt"))
    }
}

/// Loads `vocab.json` + `merges.txt` from a directory (or from the directory
/// holding the given `vocab.json`). The pre-tokenizer is detected from the
/// vocabulary: one without multi-digit tokens isolates digits.
pub fn load_tokenizer(path: impl AsRef<Path>) -> Result<TokenizerSpec> {
    load_tokenizer_with(path, None)
}

pub fn load_tokenizer_with(path: impl AsRef<Path>, pretokenizer: Option<PreTokenizer>) -> Result<TokenizerSpec> {
    let (vocab_path, merges_path) = resolve(path.as_ref());
    let vocab_raw = std::fs::read(&vocab_path).map_err(|e| Error::io(&vocab_path, e))?;
    let merges_raw = std::fs::read(&merges_path).map_err(|e| Error::io(&merges_path, e))?;
    parse_tokenizer(&vocab_raw, &merges_raw, pretokenizer).map_err(|e| match e {
        Error::Parse {
            what,
            location,
            message,
        } if what == "vocab" => Error::Parse {
            what: vocab_path.display().to_string(),
            location,
            message,
        },
        Error::Parse {
            what,
            location,
            message,
        } if what == "merges" => Error::Parse {
            what: merges_path.display().to_string(),
            location,
            message,
        },
        other => other,
    })
}

/// Parses in-memory vocabulary and merges file contents.
pub fn parse_tokenizer(
    vocab_json: &[u8],
    merges_txt: &[u8],
    pretokenizer: Option<PreTokenizer>,
) -> Result<TokenizerSpec> {
    let Entries(entries) = serde_json::from_slice(vocab_json).map_err(|e| {
        Error::parse(
            "vocab",
            format!("line {} column {}", e.line(), e.column()),
            e.to_string(),
        )
    })?;
    let n = entries.len();
    let mut tokens: Vec<Option<Vec<u8>>> = vec![None; n];
    let mut seen: HashMap<&str, u64> = HashMap::with_capacity(n);
    for (s, id) in &entries {
        if let Some(prev) = seen.insert(s.as_str(), *id) {
            return Err(Error::Integrity(format!(
                "duplicate token string {s:?} (ids {prev} and {id})"
            )));
        }
        let slot = tokens
            .get_mut(*id as usize)
            .ok_or_else(|| Error::Integrity(format!("token {s:?} has id {id}, outside [0, {n})")))?;
        if slot.is_some() {
            return Err(Error::Integrity(format!("id {id} assigned twice")));
        }
        let bytes = bytemap::decode_str(s)
            .ok_or_else(|| Error::Integrity(format!("token {s:?} uses characters outside the byte alphabet")))?;
        *slot = Some(bytes);
    }
    let tokens: Vec<Vec<u8>> = tokens.into_iter().map(|t| t.expect("ids are dense")).collect();

    let text = std::str::from_utf8(merges_txt)
        .map_err(|e| Error::parse("merges", format!("byte {}", e.valid_up_to()), "invalid UTF-8"))?;
    let mut merges = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if (lineno == 0 && line.starts_with("#version")) || line.is_empty() {
            continue;
        }
        let mut parts = line.split(' ');
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::parse(
                "merges",
                format!("line {}", lineno + 1),
                format!("expected two space-separated symbols, got {line:?}"),
            ));
        };
        let lookup = |s: &str| -> Result<TokenId> {
            seen.get(s).map(|&id| id as TokenId).ok_or_else(|| {
                Error::Integrity(format!(
                    "merges line {}: symbol {s:?} is not in the vocabulary",
                    lineno + 1
                ))
            })
        };
        merges.push((lookup(a)?, lookup(b)?));
    }

    let mut hasher = Sha256::new();
    hasher.update(vocab_json);
    hasher.update([0u8]);
    hasher.update(merges_txt);
    let digest = hasher.finalize();
    let hex: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
    let spec = TokenizerSpec::from_parts(tokens, merges, pretokenizer, format!("bpe-{n}-{hex}"))?;
    let missing = spec.missing_bytes();
    if !missing.is_empty() {
        log::warn!(
            "vocabulary has no token for {} byte values; they are dropped when encoding",
            missing.len()
        );
    }
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn byte_vocab() -> serde_json::Map<String, serde_json::Value> {
        (0..=255u8)
            .map(|b| (bytemap::byte_to_char(b).to_string(), serde_json::json!(b)))
            .collect()
    }

    #[test]
    fn byte_only_vocab_with_empty_merges() {
        let vocab = serde_json::to_vec(&byte_vocab()).unwrap();
        let t = parse_tokenizer(&vocab, b"#version: 0.2\n", None).unwrap();
        assert_eq!(t.vocab_size(), 256);
        assert_eq!(t.encode(b"pass").len(), 4);
    }

    #[test]
    fn merges_extend_vocab() {
        let mut v = byte_vocab();
        v.insert("Ġp".into(), serde_json::json!(256));
        let vocab = serde_json::to_vec(&v).unwrap();
        let t = parse_tokenizer(&vocab, b"\xc4\xa0 p\n", None).unwrap();
        assert_eq!(t.encode(b" p").0, vec![256]);
    }

    #[test]
    fn duplicate_token_string_rejected() {
        let mut body = String::from("{");
        for b in 0..=255u8 {
            body.push_str(&format!(
                "{}:{b},",
                serde_json::to_string(&bytemap::byte_to_char(b).to_string()).unwrap()
            ));
        }
        body.push_str("\"a\":256}");
        let err = parse_tokenizer(body.as_bytes(), b"", None).unwrap_err();
        assert!(
            matches!(err, Error::Integrity(ref m) if m.contains("duplicate")),
            "{err}"
        );
    }

    #[test]
    fn malformed_json_reports_location() {
        let err = parse_tokenizer(b"{\n\"a\": 0,\n oops}", b"", None).unwrap_err();
        match err {
            Error::Parse { location, .. } => assert!(location.starts_with("line 3"), "{location}"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn malformed_merge_line_reports_line() {
        let vocab = serde_json::to_vec(&byte_vocab()).unwrap();
        let err = parse_tokenizer(&vocab, b"#version: 0.2\na b c\n", None).unwrap_err();
        match err {
            Error::Parse { location, .. } => assert_eq!(location, "line 2"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn merge_product_must_exist() {
        let vocab = serde_json::to_vec(&byte_vocab()).unwrap();
        assert!(matches!(
            parse_tokenizer(&vocab, b"a b\n", None),
            Err(Error::Integrity(_))
        ));
    }
}
