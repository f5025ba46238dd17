//! Reversible byte <-> printable-character mapping used by byte-level BPE
//! vocabularies (the GPT-2 convention).
//!
//! Printable Latin-1 bytes map to themselves; the remaining 68 bytes are
//! shifted into U+0100.. so every vocabulary entry is a visible string.

use std::sync::OnceLock;

struct Tables {
    encode: [char; 256],
    decode: std::collections::HashMap<char, u8>,
}

fn tables() -> &'static Tables {
    static TABLES: OnceLock<Tables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let printable = |b: u32| {
            (u32::from(b'!')..=u32::from(b'~')).contains(&b) || (0xA1..=0xAC).contains(&b) || (0xAE..=0xFF).contains(&b)
        };
        let mut encode = ['\0'; 256];
        let mut shifted = 0u32;
        for b in 0u32..256 {
            let code = if printable(b) {
                b
            } else {
                shifted += 1;
                255 + shifted
            };
            encode[b as usize] = char::from_u32(code).expect("code point below 0x200");
        }
        let decode = encode.iter().enumerate().map(|(b, &c)| (c, b as u8)).collect();
        Tables { encode, decode }
    })
}

pub fn byte_to_char(b: u8) -> char {
    tables().encode[b as usize]
}

pub fn char_to_byte(c: char) -> Option<u8> {
    tables().decode.get(&c).copied()
}

/// Renders raw bytes in the vocabulary's printable alphabet.
pub fn encode_bytes(bytes: &[u8]) -> String {
    bytes.iter().map(|&b| byte_to_char(b)).collect()
}

/// Maps a vocabulary string back to raw bytes; `None` if it contains a
/// character outside the byte alphabet.
pub fn decode_str(s: &str) -> Option<Vec<u8>> {
    s.chars().map(char_to_byte).collect()
}
