//! C interface to `loschmidt`.
//!
//! Every function returns an [`LsStatus`]. Objects are exposed as opaque
//! handles created by `*_new`/constructor functions and released with the
//! matching `*_free`. After a non-zero status, [`ls_last_error_message`]
//! returns a description of the failure on the calling thread.
//!
//! Output arrays are caller-allocated; the caller passes their length and
//! the call fails with `LS_STATUS_INVALID_ARGUMENT` if it is too short.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use loschmidt::ensembles::{
    kicked_top, make_coe, perturbed_map, restricted_kicked_top, sample_cue, KickedTopParams,
    PerturbationForm, PerturbationSpec, Spin,
};
use loschmidt::experiment::{run_in_directory, validate_config};
use loschmidt::fidelity::{fidelity_direct, fidelity_spectral, saturation_ipr, time_averages};
use loschmidt::linalg::{
    overlap_matrix, spectral_decompose, ComplexMatrix, CVector, OverlapMatrix, Provenance,
    SpectralDecomposition, UnitaryOperator, C64,
};
use loschmidt::Error;

/// Result code of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NonUnitary = 3,
    DimensionMismatch = 4,
    DecompositionFailed = 5,
    IndexOutOfRange = 6,
    InvalidPerturbation = 7,
    ParseError = 8,
    SemanticError = 9,
    OutputExists = 10,
    IoError = 11,
    Failed = 12,
    Panic = 13,
}

/// Generator of the collective z-rotation perturbation.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LsPerturbation {
    /// Half the summed Pauli-z over log2(N) qubits; N must be a power of two.
    Qubit = 0,
    /// Jz of the spin with 2j + 1 = N.
    Spin = 1,
}

/// A certified unitary map.
pub struct LsUnitary(UnitaryOperator);

/// Eigenphases and eigenvectors of a unitary map.
pub struct LsDecomposition(SpectralDecomposition);

/// Overlaps between unperturbed and perturbed eigenvectors.
pub struct LsOverlap(OverlapMatrix);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> LsStatus {
    match err.kind() {
        "non_unitary" => LsStatus::NonUnitary,
        "dimension_mismatch" | "not_square" => LsStatus::DimensionMismatch,
        "decomposition_failed" => LsStatus::DecompositionFailed,
        "index_out_of_range" | "window_out_of_range" => LsStatus::IndexOutOfRange,
        "invalid_perturbation" => LsStatus::InvalidPerturbation,
        "parse_error" => LsStatus::ParseError,
        "semantic_error" => LsStatus::SemanticError,
        "output_exists" => LsStatus::OutputExists,
        "io_error" => LsStatus::IoError,
        "invalid_argument" | "invalid_spin" | "not_normalized" => LsStatus::InvalidArgument,
        _ => LsStatus::Failed,
    }
}

struct Fail(LsStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(LsStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(LsStatus::InvalidArgument, msg.into())
}

fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> LsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error(String::new());
            LsStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            LsStatus::Panic
        }
    }
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_slice<'a>(p: *mut f64, len: usize, needed: usize, what: &str) -> Result<&'a mut [f64], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    if len < needed {
        return Err(invalid(format!("{what} holds {len} values, need {needed}")));
    }
    Ok(std::slice::from_raw_parts_mut(p, needed))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

/// Message for the most recent failure on this thread; empty after a
/// successful call. Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn ls_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ls_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Certifies a row-major complex matrix as unitary.
///
/// # Safety
/// `re` and `im` must each point to `dim * dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn ls_unitary_from_row_major(
    dim: usize,
    re: *const f64,
    im: *const f64,
    out: *mut *mut LsUnitary,
) -> LsStatus {
    guard(|| {
        if re.is_null() || im.is_null() {
            return Err(null("matrix entries"));
        }
        let n = dim.checked_mul(dim).ok_or_else(|| invalid("dimension overflows"))?;
        let (re, im) = (std::slice::from_raw_parts(re, n), std::slice::from_raw_parts(im, n));
        let entries: Vec<C64> = re.iter().zip(im).map(|(a, b)| C64::new(*a, *b)).collect();
        let m = ComplexMatrix::from_row_major(dim, &entries)?;
        store(out, LsUnitary(UnitaryOperator::certify(m, Provenance::Composed, None)?))
    })
}

/// Haar-random unitary of dimension `dim` drawn from `seed`.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn ls_unitary_sample_cue(dim: usize, seed: u64, out: *mut *mut LsUnitary) -> LsStatus {
    guard(|| store(out, LsUnitary(sample_cue(dim, seed)?)))
}

/// Orthogonal-ensemble map `U U^T` built from a map made by
/// `ls_unitary_sample_cue`.
///
/// # Safety
/// `cue` must be a live handle and `out` a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn ls_unitary_make_coe(cue: *const LsUnitary, out: *mut *mut LsUnitary) -> LsStatus {
    guard(|| {
        let u = handle(cue, "cue")?;
        store(out, LsUnitary(make_coe(&u.0)?))
    })
}

/// Kicked top with spin `twice_j / 2` and kick strength `k`. With
/// `odd_subspace` set, the map restricted to the odd eigenspace of the y
/// rotation by pi (needs `twice_j` divisible by 4).
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn ls_unitary_kicked_top(
    twice_j: u32,
    k: f64,
    odd_subspace: bool,
    out: *mut *mut LsUnitary,
) -> LsStatus {
    guard(|| {
        let params = KickedTopParams::new(twice_j as f64 / 2.0, k)?;
        let u = if odd_subspace {
            restricted_kicked_top(&params)?.1
        } else {
            kicked_top(&params)?
        };
        store(out, LsUnitary(u))
    })
}

/// `exp(-i delta V) U` for the chosen generator `V`.
///
/// # Safety
/// `u` must be a live handle and `out` a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn ls_unitary_perturb(
    u: *const LsUnitary,
    form: LsPerturbation,
    delta: f64,
    out: *mut *mut LsUnitary,
) -> LsStatus {
    guard(|| {
        let u = handle(u, "unitary")?;
        let form = match form {
            LsPerturbation::Qubit => PerturbationForm::qubits_for_dim(u.0.dim())?,
            LsPerturbation::Spin => PerturbationForm::spin(Spin::from_dim(u.0.dim())?),
        };
        store(out, LsUnitary(perturbed_map(&u.0, &PerturbationSpec { form, delta })?))
    })
}

/// Writes the dimension of `u` to `dim`.
///
/// # Safety
/// `u` must be a live handle and `dim` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ls_unitary_dim(u: *const LsUnitary, dim: *mut usize) -> LsStatus {
    guard(|| {
        let u = handle(u, "unitary")?;
        *dim.as_mut().ok_or_else(|| null("dim"))? = u.0.dim();
        Ok(())
    })
}

/// Copies the row-major entries of `u` into `re` and `im`, each of length
/// at least `dim * dim`.
///
/// # Safety
/// `u` must be a live handle; `re` and `im` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ls_unitary_entries(
    u: *const LsUnitary,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> LsStatus {
    guard(|| {
        let u = handle(u, "unitary")?;
        let entries = u.0.as_complex_matrix().row_major();
        let re = out_slice(re, len, entries.len(), "re")?;
        let im = out_slice(im, len, entries.len(), "im")?;
        for (k, z) in entries.iter().enumerate() {
            re[k] = z.re;
            im[k] = z.im;
        }
        Ok(())
    })
}

/// Releases a unitary handle. Null is ignored.
///
/// # Safety
/// `u` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ls_unitary_free(u: *mut LsUnitary) {
    if !u.is_null() {
        drop(Box::from_raw(u));
    }
}

/// Eigendecomposition with phases sorted ascending in (-pi, pi].
///
/// # Safety
/// `u` must be a live handle and `out` a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn ls_decompose(u: *const LsUnitary, out: *mut *mut LsDecomposition) -> LsStatus {
    guard(|| {
        let u = handle(u, "unitary")?;
        store(out, LsDecomposition(spectral_decompose(&u.0)?))
    })
}

/// Copies the eigenphases into `phases`.
///
/// # Safety
/// `d` must be a live handle; `phases` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ls_decomposition_phases(
    d: *const LsDecomposition,
    phases: *mut f64,
    len: usize,
) -> LsStatus {
    guard(|| {
        let d = handle(d, "decomposition")?;
        out_slice(phases, len, d.0.dim(), "phases")?.copy_from_slice(d.0.phases());
        Ok(())
    })
}

/// Releases a decomposition handle. Null is ignored.
///
/// # Safety
/// `d` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ls_decomposition_free(d: *mut LsDecomposition) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Overlaps `<v'_l|v_m>` between two decompositions of equal dimension.
///
/// # Safety
/// Both decompositions must be live handles and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ls_overlap_new(
    unperturbed: *const LsDecomposition,
    perturbed: *const LsDecomposition,
    out: *mut *mut LsOverlap,
) -> LsStatus {
    guard(|| {
        let a = handle(unperturbed, "unperturbed")?;
        let b = handle(perturbed, "perturbed")?;
        store(out, LsOverlap(overlap_matrix(&a.0, &b.0)?))
    })
}

/// Releases an overlap handle. Null is ignored.
///
/// # Safety
/// `o` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ls_overlap_free(o: *mut LsOverlap) {
    if !o.is_null() {
        drop(Box::from_raw(o));
    }
}

/// Fidelity of unperturbed eigenstate `m` for `n = 0..=n_max`, written to
/// `values` (length at least `n_max + 1`).
///
/// # Safety
/// `o` must be a live handle; `values` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ls_fidelity_spectral(
    o: *const LsOverlap,
    m: usize,
    n_max: usize,
    values: *mut f64,
    len: usize,
) -> LsStatus {
    guard(|| {
        let o = handle(o, "overlap")?;
        let s = fidelity_spectral(&o.0, m, n_max)?;
        out_slice(values, len, s.values.len(), "values")?.copy_from_slice(&s.values);
        Ok(())
    })
}

/// Fidelity of the normalized state `(psi_re, psi_im)` by repeated
/// application of `u` and `perturbed`.
///
/// # Safety
/// Handles must be live; `psi_re` and `psi_im` must hold the map dimension
/// in doubles; `values` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ls_fidelity_direct(
    u: *const LsUnitary,
    perturbed: *const LsUnitary,
    psi_re: *const f64,
    psi_im: *const f64,
    n_max: usize,
    values: *mut f64,
    len: usize,
) -> LsStatus {
    guard(|| {
        let u = handle(u, "unitary")?;
        let p = handle(perturbed, "perturbed")?;
        if psi_re.is_null() || psi_im.is_null() {
            return Err(null("state"));
        }
        let n = u.0.dim();
        let (re, im) = (std::slice::from_raw_parts(psi_re, n), std::slice::from_raw_parts(psi_im, n));
        let psi = CVector::from_iterator(n, re.iter().zip(im).map(|(a, b)| C64::new(*a, *b)));
        let s = fidelity_direct(&u.0, &p.0, &psi, n_max)?;
        out_slice(values, len, s.values.len(), "values")?.copy_from_slice(&s.values);
        Ok(())
    })
}

/// Long-time fidelity level of eigenstate `m` from its overlap weights.
///
/// # Safety
/// `o` must be a live handle and `value` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ls_saturation_ipr(o: *const LsOverlap, m: usize, value: *mut f64) -> LsStatus {
    guard(|| {
        let o = handle(o, "overlap")?;
        let v = value.as_mut().ok_or_else(|| null("value"))?;
        *v = saturation_ipr(&o.0, m)?.value;
        Ok(())
    })
}

/// Mean fidelity of eigenstate `m` over `count` steps from `start`, with
/// its standard error.
///
/// # Safety
/// `o` must be a live handle; `value` and `stderr` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ls_saturation_time_average(
    o: *const LsOverlap,
    m: usize,
    start: usize,
    count: usize,
    value: *mut f64,
    stderr: *mut f64,
) -> LsStatus {
    guard(|| {
        let o = handle(o, "overlap")?;
        o.0.check_index(m)?;
        let (v, e) = (
            value.as_mut().ok_or_else(|| null("value"))?,
            stderr.as_mut().ok_or_else(|| null("stderr"))?,
        );
        let est = time_averages(&o.0, &[m], start, count)?[0];
        *v = est.value;
        *e = est.statistical_error;
        Ok(())
    })
}

/// Runs the experiment described by `config` (config file text). A
/// non-null `output_dir` overrides the configured directory and a
/// non-zero `workers` the worker count. The number of result rows is
/// written to `rows` when it is non-null.
///
/// # Safety
/// `config` must be a NUL-terminated string; `output_dir` null or one.
#[no_mangle]
pub unsafe extern "C" fn ls_run_experiment(
    config: *const c_char,
    output_dir: *const c_char,
    resume: bool,
    workers: usize,
    rows: *mut usize,
) -> LsStatus {
    guard(|| {
        let mut cfg = validate_config(c_str(config, "config")?)?;
        if !output_dir.is_null() {
            cfg.output_dir = PathBuf::from(c_str(output_dir, "output_dir")?);
        }
        if workers > 0 {
            cfg.workers = workers;
        }
        let result = run_in_directory(&cfg, resume)?;
        if let Some(r) = rows.as_mut() {
            *r = result.rows.len();
        }
        Ok(())
    })
}
