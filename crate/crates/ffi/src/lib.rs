//! C ABI over the tokenizer, healing, chunk database and string metrics.
//!
//! Every fallible call returns an [`RcStatus`]; on failure the message is
//! kept per thread and read back with [`rc_last_error_message`]. Handles
//! are opaque and owned by the caller once created; free them with the
//! matching `*_free`. Output buffers follow one convention: the caller
//! passes a capacity, the callee always writes the required length to
//! `out_len` and returns `RC_BUFFER_TOO_SMALL` when it does not fit.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use repocomplete::chunkstore::{self, BuildOptions, RetrievalDatabase};
use repocomplete::metrics::{edit_similarity, PredictionPair};
use repocomplete::{Error, TokenId, TokenizerSpec};

/// Status codes returned by every fallible function.
#[repr(C)]
#[allow(non_camel_case_types)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RcStatus {
    RC_OK = 0,
    RC_NULL_POINTER = 1,
    RC_INVALID_ARGUMENT = 2,
    RC_IO = 3,
    RC_PARSE = 4,
    RC_INTEGRITY = 5,
    RC_TOKENIZER_MISMATCH = 6,
    RC_FORMAT_VERSION = 7,
    RC_BUFFER_TOO_SMALL = 8,
    RC_MODEL = 9,
    RC_PANIC = 10,
}

/// A loaded BPE vocabulary.
pub struct RcTokenizer {
    spec: TokenizerSpec,
}

/// A chunk retrieval database.
pub struct RcDatabase {
    db: RetrievalDatabase,
}

/// One retrieval hit.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RcHit {
    /// Position of the record in the database.
    pub record_index: usize,
    pub chunk_index: u32,
    /// 1-based.
    pub rank: usize,
    pub score: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &Error) -> RcStatus {
    match e {
        Error::Io { .. } | Error::NoFiles(_) => RcStatus::RC_IO,
        Error::Parse { .. } => RcStatus::RC_PARSE,
        Error::Integrity(_) | Error::Dataset(_) => RcStatus::RC_INTEGRITY,
        Error::TokenizerMismatch { .. } => RcStatus::RC_TOKENIZER_MISMATCH,
        Error::FormatVersion { .. } => RcStatus::RC_FORMAT_VERSION,
        Error::Model(_) | Error::Protocol(_) => RcStatus::RC_MODEL,
        Error::InvalidArgument(_)
        | Error::Config(_)
        | Error::TokenOutOfRange { .. }
        | Error::DimensionMismatch { .. } => RcStatus::RC_INVALID_ARGUMENT,
    }
}

/// Runs `f`, turning errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), RcStatus>) -> RcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RcStatus::RC_OK,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            RcStatus::RC_PANIC
        }
    }
}

fn fail(e: Error) -> RcStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn null(what: &str) -> RcStatus {
    set_error(format!("{what} is null"));
    RcStatus::RC_NULL_POINTER
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, RcStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        RcStatus::RC_INVALID_ARGUMENT
    })
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], RcStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_out<T: Copy>(data: &[T], out: *mut T, cap: usize, out_len: *mut usize) -> Result<(), RcStatus> {
    if out_len.is_null() {
        return Err(null("out_len"));
    }
    *out_len = data.len();
    if data.len() > cap {
        set_error(format!("buffer holds {cap}, need {}", data.len()));
        return Err(RcStatus::RC_BUFFER_TOO_SMALL);
    }
    if !data.is_empty() {
        if out.is_null() {
            return Err(null("output buffer"));
        }
        std::ptr::copy_nonoverlapping(data.as_ptr(), out, data.len());
    }
    Ok(())
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), RcStatus> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Copies the calling thread's last error message, NUL-terminated and
/// truncated to `cap`. Returns the full message length without the NUL.
///
/// # Safety
/// `buf` must point to `cap` writable bytes, or be null when `cap` is 0.
#[no_mangle]
pub unsafe extern "C" fn rc_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Static, NUL-terminated library version.
#[no_mangle]
pub extern "C" fn rc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads `vocab.json` and `merges.txt` from a directory (or a vocab file
/// with its sibling merges file).
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rc_tokenizer_load(path: *const c_char, out: *mut *mut RcTokenizer) -> RcStatus {
    guard(|| {
        let path = c_str(path, "path")?;
        let spec = repocomplete::load_tokenizer(path).map_err(fail)?;
        store(out, RcTokenizer { spec })
    })
}

/// The 256-token byte-level tokenizer (no merges).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rc_tokenizer_byte_level(out: *mut *mut RcTokenizer) -> RcStatus {
    guard(|| {
        store(
            out,
            RcTokenizer {
                spec: TokenizerSpec::byte_level(),
            },
        )
    })
}

/// # Safety
/// `tok` must come from a tokenizer constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rc_tokenizer_free(tok: *mut RcTokenizer) {
    if !tok.is_null() {
        drop(Box::from_raw(tok));
    }
}

/// Vocabulary size, or 0 for a null handle.
///
/// # Safety
/// `tok` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn rc_tokenizer_vocab_size(tok: *const RcTokenizer) -> usize {
    tok.as_ref().map_or(0, |t| t.spec.vocab_size())
}

/// # Safety
/// `tok` live; `text` has `len` readable bytes; `out_ids` has `cap` slots.
#[no_mangle]
pub unsafe extern "C" fn rc_tokenizer_encode(
    tok: *const RcTokenizer,
    text: *const u8,
    len: usize,
    out_ids: *mut u32,
    cap: usize,
    out_len: *mut usize,
) -> RcStatus {
    guard(|| {
        let tok = tok.as_ref().ok_or_else(|| null("tokenizer"))?;
        let text = slice(text, len, "text")?;
        let ids = tok.spec.encode(text);
        write_out(&ids, out_ids, cap, out_len)
    })
}

/// # Safety
/// `tok` live; `ids` has `n` entries; `out` has `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn rc_tokenizer_decode(
    tok: *const RcTokenizer,
    ids: *const u32,
    n: usize,
    out: *mut u8,
    cap: usize,
    out_len: *mut usize,
) -> RcStatus {
    guard(|| {
        let tok = tok.as_ref().ok_or_else(|| null("tokenizer"))?;
        let ids: &[TokenId] = slice(ids, n, "ids")?;
        let bytes = tok.spec.decode(ids).map_err(fail)?;
        write_out(&bytes, out, cap, out_len)
    })
}

/// Token healing: the input splits into `text[..trimmed_len]` and the
/// pending suffix `text[trimmed_len..]`.
///
/// # Safety
/// `tok` live; `text` has `len` readable bytes; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn rc_tokenizer_heal(
    tok: *const RcTokenizer,
    text: *const u8,
    len: usize,
    out_trimmed_len: *mut usize,
    out_rolled_back: *mut usize,
) -> RcStatus {
    guard(|| {
        let tok = tok.as_ref().ok_or_else(|| null("tokenizer"))?;
        let text = slice(text, len, "text")?;
        if out_trimmed_len.is_null() || out_rolled_back.is_null() {
            return Err(null("output"));
        }
        let plan = tok.spec.compute_healing(text);
        *out_trimmed_len = plan.trimmed_input.len();
        *out_rolled_back = plan.rolled_back_tokens;
        Ok(())
    })
}

/// Indexes every `.py` file under `root` in chunks of `chunk_size` tokens.
///
/// # Safety
/// `root` NUL-terminated; `tok` live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rc_database_build(
    root: *const c_char,
    tok: *const RcTokenizer,
    chunk_size: usize,
    out: *mut *mut RcDatabase,
) -> RcStatus {
    guard(|| {
        let root = c_str(root, "root")?;
        let tok = tok.as_ref().ok_or_else(|| null("tokenizer"))?;
        let opts = BuildOptions {
            chunk_size,
            ..BuildOptions::default()
        };
        let built = chunkstore::build_database(Path::new(root), &tok.spec, &opts).map_err(fail)?;
        store(out, RcDatabase { db: built.database })
    })
}

/// # Safety
/// `path` NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rc_database_load(path: *const c_char, out: *mut *mut RcDatabase) -> RcStatus {
    guard(|| {
        let path = c_str(path, "path")?;
        let db = chunkstore::load_database(path).map_err(fail)?;
        store(out, RcDatabase { db })
    })
}

/// # Safety
/// `db` live; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn rc_database_save(db: *const RcDatabase, path: *const c_char) -> RcStatus {
    guard(|| {
        let db = db.as_ref().ok_or_else(|| null("database"))?;
        let path = c_str(path, "path")?;
        chunkstore::save_database(&db.db, path).map_err(fail)
    })
}

/// # Safety
/// `db` must come from a database constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rc_database_free(db: *mut RcDatabase) {
    if !db.is_null() {
        drop(Box::from_raw(db));
    }
}

/// Record count, or 0 for a null handle.
///
/// # Safety
/// `db` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn rc_database_len(db: *const RcDatabase) -> usize {
    db.as_ref().map_or(0, |d| d.db.len())
}

/// Fails with `RC_TOKENIZER_MISMATCH` unless `db` was built with `tok`.
///
/// # Safety
/// Both handles live.
#[no_mangle]
pub unsafe extern "C" fn rc_database_check_tokenizer(db: *const RcDatabase, tok: *const RcTokenizer) -> RcStatus {
    guard(|| {
        let db = db.as_ref().ok_or_else(|| null("database"))?;
        let tok = tok.as_ref().ok_or_else(|| null("tokenizer"))?;
        db.db.check_tokenizer(&tok.spec).map_err(fail)
    })
}

/// Top-`k` records by Jaccard similarity. `exclude_file` may be null.
/// `out_len` receives the hit count (at most `k`).
///
/// # Safety
/// `db` live; `query` has `n` entries; `out_hits` has `cap` slots.
#[no_mangle]
pub unsafe extern "C" fn rc_database_retrieve_jaccard(
    db: *const RcDatabase,
    query: *const u32,
    n: usize,
    k: usize,
    exclude_file: *const c_char,
    out_hits: *mut RcHit,
    cap: usize,
    out_len: *mut usize,
) -> RcStatus {
    guard(|| {
        let db = db.as_ref().ok_or_else(|| null("database"))?;
        let query: &[TokenId] = slice(query, n, "query")?;
        let exclude = if exclude_file.is_null() {
            None
        } else {
            Some(c_str(exclude_file, "exclude_file")?)
        };
        let hits = db.db.retrieve_jaccard(query, k, exclude).map_err(fail)?;
        let hits: Vec<RcHit> = hits
            .iter()
            .map(|h| RcHit {
                record_index: h.record_index,
                chunk_index: h.record.chunk_index,
                rank: h.rank,
                score: h.score,
            })
            .collect();
        write_out(&hits, out_hits, cap, out_len)
    })
}

/// File path of a record, without a terminating NUL.
///
/// # Safety
/// `db` live; `out` has `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn rc_database_record_path(
    db: *const RcDatabase,
    record_index: usize,
    out: *mut u8,
    cap: usize,
    out_len: *mut usize,
) -> RcStatus {
    guard(|| {
        let db = db.as_ref().ok_or_else(|| null("database"))?;
        let rec = db.db.records().get(record_index).ok_or_else(|| {
            set_error(format!("record {record_index} out of range"));
            RcStatus::RC_INVALID_ARGUMENT
        })?;
        write_out(rec.file_path.as_bytes(), out, cap, out_len)
    })
}

/// Key and continuation tokens of a record, concatenated; the key length
/// goes to `out_key_len`.
///
/// # Safety
/// `db` live; `out` has `cap` slots; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn rc_database_record_tokens(
    db: *const RcDatabase,
    record_index: usize,
    out: *mut u32,
    cap: usize,
    out_len: *mut usize,
    out_key_len: *mut usize,
) -> RcStatus {
    guard(|| {
        let db = db.as_ref().ok_or_else(|| null("database"))?;
        let rec = db.db.records().get(record_index).ok_or_else(|| {
            set_error(format!("record {record_index} out of range"));
            RcStatus::RC_INVALID_ARGUMENT
        })?;
        if out_key_len.is_null() {
            return Err(null("out_key_len"));
        }
        *out_key_len = rec.key_tokens.len();
        let all: Vec<TokenId> = rec
            .key_tokens
            .iter()
            .chain(rec.continuation_tokens.iter())
            .copied()
            .collect();
        write_out(&all, out, cap, out_len)
    })
}

/// Edit similarity of two UTF-8 strings, as given (no trimming).
///
/// # Safety
/// Both arguments NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn rc_edit_similarity(s: *const c_char, t: *const c_char, out: *mut f64) -> RcStatus {
    guard(|| {
        let s = c_str(s, "s")?;
        let t = c_str(t, "t")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = edit_similarity(s, t);
        Ok(())
    })
}

/// Exact match (1 or 0) and common-prefix length in characters after
/// trimming both strings.
///
/// # Safety
/// Both strings NUL-terminated; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn rc_match_scores(
    predicted: *const c_char,
    target: *const c_char,
    out_exact: *mut f64,
    out_prefix_len: *mut usize,
) -> RcStatus {
    guard(|| {
        let p = c_str(predicted, "predicted")?;
        let t = c_str(target, "target")?;
        if out_exact.is_null() || out_prefix_len.is_null() {
            return Err(null("output"));
        }
        let pair = PredictionPair::new(p, t);
        *out_exact = pair.exact_match();
        *out_prefix_len = pair.prefix_len();
        Ok(())
    })
}
