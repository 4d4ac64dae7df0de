//! C bindings for loading trained vectors and WordNet data and querying
//! similarities.
//!
//! Every function returns a [`JvStatus`]. On failure a description is kept
//! per thread and can be fetched with [`jv_last_error`]. Handles are opaque
//! and must be released with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, UnwindSafe};
use std::path::Path;
use std::ptr;

use jointvec::checkpoint::read_embedding_checkpoint;
use jointvec::embedding::{cosine, WordVectors};
use jointvec::eval::analogy::spearman;
use jointvec::wordnet::{word_similarity, WordNet};
use jointvec::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JvStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    NotFound = 5,
    DimensionMismatch = 6,
    ZeroVector = 7,
    BufferTooSmall = 8,
    /// The value is not defined for these inputs, e.g. a word without synsets.
    Undefined = 9,
    Panic = 10,
    Other = 11,
}

/// Vectors loaded from a text vector file.
pub struct JvVectors {
    inner: WordVectors,
}

/// A WordNet graph with its word-to-synset map.
pub struct JvWordNet {
    inner: WordNet,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(JvStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Io { .. } => JvStatus::Io,
            Error::Parse { .. } => JvStatus::Parse,
            Error::DimensionMismatch { .. } => JvStatus::DimensionMismatch,
            Error::ZeroVector => JvStatus::ZeroVector,
            Error::UnknownSynset(_) | Error::UnknownWord(_) => JvStatus::NotFound,
            _ => JvStatus::Other,
        };
        Failure(status, e.to_string())
    }
}

fn fail<T>(status: JvStatus, msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure(status, msg.into()))
}

/// Runs `f`, recording any error or panic and turning it into a status.
fn guard(f: impl FnOnce() -> Result<(), Failure> + UnwindSafe) -> JvStatus {
    match catch_unwind(f) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            JvStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            JvStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return fail(JvStatus::NullArgument, format!("{what} is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .or_else(|_| fail(JvStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .map_or_else(|| fail(JvStatus::NullArgument, format!("{what} is null")), Ok)
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .map_or_else(|| fail(JvStatus::NullArgument, format!("{what} is null")), Ok)
}

/// Message for the last failed call on this thread, or null after a
/// successful one. Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn jv_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Loads a vector file (`count dim` header, then `word v1 .. vdim` lines).
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn jv_vectors_load(path: *const c_char, out: *mut *mut JvVectors) -> JvStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let path = str_arg(path, "path")?;
        let inner = read_embedding_checkpoint(Path::new(path))?;
        *out = Box::into_raw(Box::new(JvVectors { inner }));
        Ok(())
    })
}

/// # Safety
/// `handle` must come from [`jv_vectors_load`] and not be used afterwards.
/// Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn jv_vectors_free(handle: *mut JvVectors) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// # Safety
/// `handle` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn jv_vectors_dim(handle: *const JvVectors, out: *mut usize) -> JvStatus {
    guard(|| {
        *out_arg(out, "out")? = ref_arg(handle, "handle")?.inner.dim();
        Ok(())
    })
}

/// Number of words, including the rare-word entry.
///
/// # Safety
/// `handle` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn jv_vectors_len(handle: *const JvVectors, out: *mut usize) -> JvStatus {
    guard(|| {
        *out_arg(out, "out")? = ref_arg(handle, "handle")?.inner.vocab.len();
        Ok(())
    })
}

/// Copies the vector for `word` into `buf`, which must hold at least `dim`
/// values.
///
/// # Safety
/// `buf` must point to `buf_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn jv_vectors_lookup(
    handle: *const JvVectors,
    word: *const c_char,
    buf: *mut f64,
    buf_len: usize,
) -> JvStatus {
    guard(|| {
        let v = &ref_arg(handle, "handle")?.inner;
        let word = str_arg(word, "word")?;
        let row = match v.get(word) {
            Some(r) => r,
            None => return fail(JvStatus::NotFound, format!("unknown word `{word}`")),
        };
        if buf.is_null() {
            return fail(JvStatus::NullArgument, "buf is null");
        }
        if buf_len < row.len() {
            return fail(
                JvStatus::BufferTooSmall,
                format!("buffer holds {buf_len} values, need {}", row.len()),
            );
        }
        std::slice::from_raw_parts_mut(buf, row.len()).copy_from_slice(row);
        Ok(())
    })
}

/// Cosine similarity between the vectors of two words.
///
/// # Safety
/// Strings must be NUL-terminated and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn jv_vectors_cosine(
    handle: *const JvVectors,
    a: *const c_char,
    b: *const c_char,
    out: *mut f64,
) -> JvStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let v = &ref_arg(handle, "handle")?.inner;
        let row = |p, what| {
            let w = str_arg(p, what)?;
            v.get(w)
                .map_or_else(|| fail(JvStatus::NotFound, format!("unknown word `{w}`")), Ok)
        };
        let (ra, rb) = (row(a, "a")?, row(b, "b")?);
        *out = cosine(ra, rb)?;
        Ok(())
    })
}

/// Loads hypernym edges (`child<TAB>parent`) and synset membership
/// (`synset<TAB>word`). `max_vocab` caps the word list; 0 keeps every word.
///
/// # Safety
/// Paths must be NUL-terminated and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn jv_wordnet_load(
    hypernyms: *const c_char,
    members: *const c_char,
    max_vocab: usize,
    out: *mut *mut JvWordNet,
) -> JvStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let h = str_arg(hypernyms, "hypernyms")?;
        let m = str_arg(members, "members")?;
        let cap = if max_vocab == 0 { usize::MAX } else { max_vocab };
        let inner = WordNet::load(Path::new(h), Path::new(m), cap)?;
        *out = Box::into_raw(Box::new(JvWordNet { inner }));
        Ok(())
    })
}

/// # Safety
/// `handle` must come from [`jv_wordnet_load`] and not be used afterwards.
/// Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn jv_wordnet_free(handle: *mut JvWordNet) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Graph similarity of two words: the best synset similarity over their
/// synsets. `Undefined` when a word has no synset.
///
/// # Safety
/// Strings must be NUL-terminated and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn jv_wordnet_similarity(
    handle: *const JvWordNet,
    a: *const c_char,
    b: *const c_char,
    out: *mut f64,
) -> JvStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let wn = &ref_arg(handle, "handle")?.inner;
        let id = |p, what| {
            let w = str_arg(p, what)?;
            wn.vocab
                .get(&w.to_lowercase())
                .map_or_else(|| fail(JvStatus::NotFound, format!("unknown word `{w}`")), Ok)
        };
        let (i, j) = (id(a, "a")?, id(b, "b")?);
        match word_similarity(&wn.graph, &wn.map, i, j)? {
            Some(s) => *out = s,
            None => return fail(JvStatus::Undefined, "word has no synsets"),
        }
        Ok(())
    })
}

/// Spearman rank correlation of two arrays of length `n`, ties given their
/// average rank. `Undefined` for n < 2 or a constant input.
///
/// # Safety
/// `x` and `y` must point to `n` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn jv_spearman(x: *const f64, y: *const f64, n: usize, out: *mut f64) -> JvStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if n > 0 && (x.is_null() || y.is_null()) {
            return fail(JvStatus::NullArgument, "input array is null");
        }
        let (x, y) = if n == 0 {
            (&[][..], &[][..])
        } else {
            (std::slice::from_raw_parts(x, n), std::slice::from_raw_parts(y, n))
        };
        match spearman(x, y) {
            Some(r) => *out = r,
            None => return fail(JvStatus::Undefined, "correlation undefined"),
        }
        Ok(())
    })
}
