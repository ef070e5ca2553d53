//! C interface to `ctxmatch`.
//!
//! Objects are opaque handles created by `*_new` functions and released by
//! the matching `*_free`. Every fallible call returns a [`CtxStatus`]; the
//! message of the last failure on the calling thread is available from
//! [`ctxmatch_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::num::NonZeroUsize;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use ctxmatch::blob::{blob_match, BlobConfig, Combiner, Fginn, PrefilterMode, PrefilterRank, ScoreVariant};
use ctxmatch::dtm::{dtm, DtmConfig, Stage};
use ctxmatch::geometry::BoundaryMode;
use ctxmatch::model::{one_sac, ModelKind};
use ctxmatch::{DistanceMatrix, Ellipse, Error, Keypoint, Match, MatchSet, PairContext};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CtxStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    DimensionMismatch = 3,
    OutOfRange = 4,
    Degenerate = 5,
    Unsupported = 6,
    Io = 7,
    Parse = 8,
    Panic = 9,
}

/// Descriptor distances, row-major, image 1 by image 2.
pub struct CtxDistanceMatrix(DistanceMatrix);

/// Keypoints and image sizes of a pair.
pub struct CtxPairContext(PairContext);

pub struct CtxMatchSet(MatchSet);

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CtxScoreVariant {
    DGe = 0,
    DPlusGe = 1,
    DPlus = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CtxFginn {
    None = 0,
    Pixels = 1,
    Overlap = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CtxCombiner {
    First = 0,
    Second = 1,
    Min = 2,
    Max = 3,
    Harmonic = 4,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CtxBoundaryMode {
    Alpha = 0,
    ConvexHull = 1,
    None = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CtxModelKind {
    Homography = 0,
    Fundamental = 1,
}

/// Blob matching settings. `f == 0` keeps every candidate of a line.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CtxBlobConfig {
    pub f: usize,
    /// Union of the row and column pre-filters instead of their intersection.
    pub f_union: bool,
    pub f_prime: usize,
    pub score_variant: CtxScoreVariant,
    pub fginn: CtxFginn,
    /// Pixel distance or overlap error, depending on `fginn`.
    pub fginn_value: f64,
    pub combiner: CtxCombiner,
    pub use_threshold: bool,
    pub threshold: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CtxStatus {
    match e {
        Error::InvalidInput(_) => CtxStatus::InvalidInput,
        Error::DimensionMismatch { .. } => CtxStatus::DimensionMismatch,
        Error::OutOfRange { .. } => CtxStatus::OutOfRange,
        Error::Degenerate(_) => CtxStatus::Degenerate,
        Error::Unsupported(_) => CtxStatus::Unsupported,
        Error::Io { .. } => CtxStatus::Io,
        Error::Parse { .. } => CtxStatus::Parse,
    }
}

enum Fail {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

/// Runs `f`, records any failure and converts it to a status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CtxStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CtxStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            CtxStatus::NullPointer
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            CtxStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

/// Slice view that accepts a null pointer for an empty array.
unsafe fn view<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn release<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn ctxmatch_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ctxmatch_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `values` must hold `rows * cols` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctxmatch_distance_matrix_new(
    rows: usize,
    cols: usize,
    values: *const f64,
    out: *mut *mut CtxDistanceMatrix,
) -> CtxStatus {
    guard(|| {
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::InvalidInput("matrix too large".into()))?;
        let v = view(values, len, "values")?;
        let d = DistanceMatrix::new(rows, cols, v.to_vec())?;
        emit(out, CtxDistanceMatrix(d))
    })
}

/// # Safety
/// `d` must come from [`ctxmatch_distance_matrix_new`] or be null.
#[no_mangle]
pub unsafe extern "C" fn ctxmatch_distance_matrix_free(d: *mut CtxDistanceMatrix) {
    release(d)
}

/// Keypoints given as interleaved `x, y` coordinates.
///
/// # Safety
/// `xy1` and `xy2` must hold `2 * n1` and `2 * n2` doubles.
#[no_mangle]
pub unsafe extern "C" fn ctxmatch_pair_context_new(
    xy1: *const f64,
    n1: usize,
    xy2: *const f64,
    n2: usize,
    width1: f64,
    height1: f64,
    width2: f64,
    height2: f64,
    out: *mut *mut CtxPairContext,
) -> CtxStatus {
    guard(|| {
        let points = |p: &[f64]| p.chunks_exact(2).map(|c| Keypoint::new(c[0], c[1])).collect::<Vec<_>>();
        let k1 = points(view(xy1, n1.saturating_mul(2), "xy1")?);
        let k2 = points(view(xy2, n2.saturating_mul(2), "xy2")?);
        let ctx = PairContext::new(k1, k2, (width1, height1), (width2, height2))?;
        emit(out, CtxPairContext(ctx))
    })
}

/// Attaches patch ellipses `a, b, c` (matrix `[[a, c], [c, b]]`) to every
/// keypoint of image 1 or 2. `n` must equal that image's keypoint count.
///
/// # Safety
/// `ctx` must be a live context and `abc` must hold `3 * n` doubles.
#[no_mangle]
pub unsafe extern "C" fn ctxmatch_pair_context_set_ellipses(
    ctx: *mut CtxPairContext,
    image: u32,
    abc: *const f64,
    n: usize,
) -> CtxStatus {
    guard(|| {
        let ctx = &mut ctx.as_mut().ok_or(Fail::Null("ctx"))?.0;
        let kps = match image {
            1 => &mut ctx.keypoints1,
            2 => &mut ctx.keypoints2,
            _ => return Err(Error::InvalidInput(format!("image must be 1 or 2, got {image}")).into()),
        };
        if n != kps.len() {
            return Err(Error::DimensionMismatch {
                expected: kps.len(),
                actual: n,
            }
            .into());
        }
        let ellipses = view(abc, n.saturating_mul(3), "abc")?
            .chunks_exact(3)
            .map(|c| Ellipse::new(c[0], c[1], c[2]))
            .collect::<ctxmatch::Result<Vec<_>>>()?;
        for (k, e) in kps.iter_mut().zip(ellipses) {
            k.ellipse = Some(e);
        }
        Ok(())
    })
}

/// # Safety
/// `ctx` must come from [`ctxmatch_pair_context_new`] or be null.
#[no_mangle]
pub unsafe extern "C" fn ctxmatch_pair_context_free(ctx: *mut CtxPairContext) {
    release(ctx)
}

/// Builds a match set from parallel arrays, keeping their order.
///
/// # Safety
/// `i`, `j` and `score` must each hold `n` elements.
#[no_mangle]
pub unsafe extern "C" fn ctxmatch_match_set_new(
    i: *const usize,
    j: *const usize,
    score: *const f64,
    n: usize,
    out: *mut *mut CtxMatchSet,
) -> CtxStatus {
    guard(|| {
        let (i, j, s) = (view(i, n, "i")?, view(j, n, "j")?, view(score, n, "score")?);
        let mut set = MatchSet::new();
        for k in 0..n {
            set.push(Match::new(i[k], j[k], s[k]));
        }
        emit(out, CtxMatchSet(set))
    })
}

/// Number of matches; 0 for null.
///
/// # Safety
/// `set` must be a live match set or null.
#[no_mangle]
pub unsafe extern "C" fn ctxmatch_match_set_len(set: *const CtxMatchSet) -> usize {
    set.as_ref().map_or(0, |s| s.0.len())
}

/// Reads match `k`. Any of the outputs may be null.
///
/// # Safety
/// `set` must be a live match set; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctxmatch_match_set_get(
    set: *const CtxMatchSet,
    k: usize,
    i: *mut usize,
    j: *mut usize,
    score: *mut f64,
) -> CtxStatus {
    guard(|| {
        let set = &borrow(set, "set")?.0;
        let m = set.entries().get(k).ok_or(Error::OutOfRange {
            index: k,
            len: set.len(),
        })?;
        if !i.is_null() {
            *i = m.i;
        }
        if !j.is_null() {
            *j = m.j;
        }
        if !score.is_null() {
            *score = m.score;
        }
        Ok(())
    })
}

/// # Safety
/// `set` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn ctxmatch_match_set_free(set: *mut CtxMatchSet) {
    release(set)
}

fn to_c(cfg: &BlobConfig) -> CtxBlobConfig {
    let (fginn, fginn_value) = match cfg.fginn {
        Fginn::None => (CtxFginn::None, 0.0),
        Fginn::Pixels(v) => (CtxFginn::Pixels, v),
        Fginn::Overlap(v) => (CtxFginn::Overlap, v),
    };
    CtxBlobConfig {
        f: match cfg.f {
            PrefilterRank::Rank(f) => f.get(),
            PrefilterRank::Omega => 0,
        },
        f_union: cfg.f_mode == PrefilterMode::Union,
        f_prime: cfg.f_prime.get(),
        score_variant: match cfg.score_variant {
            ScoreVariant::DGe => CtxScoreVariant::DGe,
            ScoreVariant::DPlusGe => CtxScoreVariant::DPlusGe,
            ScoreVariant::DPlus => CtxScoreVariant::DPlus,
        },
        fginn,
        fginn_value,
        combiner: match cfg.combiner {
            Combiner::First => CtxCombiner::First,
            Combiner::Second => CtxCombiner::Second,
            Combiner::Min => CtxCombiner::Min,
            Combiner::Max => CtxCombiner::Max,
            Combiner::Harmonic => CtxCombiner::Harmonic,
        },
        use_threshold: cfg.threshold.is_some(),
        threshold: cfg.threshold.unwrap_or(0.0),
    }
}

fn from_c(c: &CtxBlobConfig) -> ctxmatch::Result<BlobConfig> {
    let cfg = BlobConfig {
        f: NonZeroUsize::new(c.f).map_or(PrefilterRank::Omega, PrefilterRank::Rank),
        f_mode: if c.f_union {
            PrefilterMode::Union
        } else {
            PrefilterMode::Intersection
        },
        f_prime: NonZeroUsize::new(c.f_prime).ok_or_else(|| Error::InvalidInput("f_prime must be >= 1".into()))?,
        score_variant: match c.score_variant {
            CtxScoreVariant::DGe => ScoreVariant::DGe,
            CtxScoreVariant::DPlusGe => ScoreVariant::DPlusGe,
            CtxScoreVariant::DPlus => ScoreVariant::DPlus,
        },
        fginn: match c.fginn {
            CtxFginn::None => Fginn::None,
            CtxFginn::Pixels => Fginn::Pixels(c.fginn_value),
            CtxFginn::Overlap => Fginn::Overlap(c.fginn_value),
        },
        combiner: match c.combiner {
            CtxCombiner::First => Combiner::First,
            CtxCombiner::Second => Combiner::Second,
            CtxCombiner::Min => Combiner::Min,
            CtxCombiner::Max => Combiner::Max,
            CtxCombiner::Harmonic => Combiner::Harmonic,
        },
        threshold: c.use_threshold.then_some(c.threshold),
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Recommended blob matching settings.
#[no_mangle]
pub extern "C" fn ctxmatch_blob_config_best() -> CtxBlobConfig {
    to_c(&BlobConfig::best())
}

/// Plain one-to-one nearest neighbour ratio matching.
#[no_mangle]
pub extern "C" fn ctxmatch_blob_config_baseline() -> CtxBlobConfig {
    to_c(&BlobConfig::baseline())
}

/// # Safety
/// All pointers must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctxmatch_blob_match(
    d: *const CtxDistanceMatrix,
    ctx: *const CtxPairContext,
    cfg: *const CtxBlobConfig,
    out: *mut *mut CtxMatchSet,
) -> CtxStatus {
    guard(|| {
        let (d, ctx, cfg) = (&borrow(d, "d")?.0, &borrow(ctx, "ctx")?.0, borrow(cfg, "cfg")?);
        let m = blob_match(d, ctx, &from_c(cfg)?)?;
        emit(out, CtxMatchSet(m))
    })
}

/// Spatial filtering. `dtm1_only` skips the recovery stage.
///
/// # Safety
/// All pointers must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctxmatch_dtm(
    matches: *const CtxMatchSet,
    ctx: *const CtxPairContext,
    boundary_mode: CtxBoundaryMode,
    dtm1_only: bool,
    out: *mut *mut CtxMatchSet,
) -> CtxStatus {
    guard(|| {
        let (m, ctx) = (&borrow(matches, "matches")?.0, &borrow(ctx, "ctx")?.0);
        let cfg = DtmConfig {
            boundary_mode: match boundary_mode {
                CtxBoundaryMode::Alpha => BoundaryMode::Alpha,
                CtxBoundaryMode::ConvexHull => BoundaryMode::ConvexHull,
                CtxBoundaryMode::None => BoundaryMode::None,
            },
            stage: if dtm1_only { Stage::Dtm1Only } else { Stage::Full },
            ..DtmConfig::default()
        };
        emit(out, CtxMatchSet(dtm(m, ctx, &cfg)?))
    })
}

/// Single-sample model fit. On success `model` receives the row-major
/// 3x3 matrix and `failed` whether no model could be formed, in which case
/// the output set is empty and `model` is zeroed. `model` and `failed` may
/// be null.
///
/// # Safety
/// All handles must be live; `model` must hold 9 doubles when non-null.
#[no_mangle]
pub unsafe extern "C" fn ctxmatch_one_sac(
    matches: *const CtxMatchSet,
    ctx: *const CtxPairContext,
    kind: CtxModelKind,
    threshold: f64,
    out: *mut *mut CtxMatchSet,
    model: *mut f64,
    failed: *mut bool,
) -> CtxStatus {
    guard(|| {
        let (m, ctx) = (&borrow(matches, "matches")?.0, &borrow(ctx, "ctx")?.0);
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let kind = match kind {
            CtxModelKind::Homography => ModelKind::Homography,
            CtxModelKind::Fundamental => ModelKind::Fundamental,
        };
        let r = one_sac(m, kind, ctx, threshold)?;
        if !model.is_null() {
            let values = r.model.as_ref().map_or([0.0; 9], |m| m.to_array());
            slice::from_raw_parts_mut(model, 9).copy_from_slice(&values);
        }
        if !failed.is_null() {
            *failed = r.failed;
        }
        emit(out, CtxMatchSet(r.matches))
    })
}

/// Copies the message of the last failure into `buf` (truncated, always
/// NUL-terminated) and returns the full message length.
///
/// # Safety
/// `buf` must hold `len` bytes when non-null.
#[no_mangle]
pub unsafe extern "C" fn ctxmatch_last_error_copy(buf: *mut c_char, len: usize) -> usize {
    let p = ctxmatch_last_error();
    if p.is_null() {
        if !buf.is_null() && len > 0 {
            *buf = 0;
        }
        return 0;
    }
    let bytes = CStr::from_ptr(p).to_bytes();
    if !buf.is_null() && len > 0 {
        let n = bytes.len().min(len - 1);
        ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
        *buf.add(n) = 0;
    }
    bytes.len()
}
