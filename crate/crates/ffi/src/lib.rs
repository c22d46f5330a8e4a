//! C interface to `dlrom-core`.
//!
//! Every function returns a [`DlromStatus`]; on failure the message is
//! available from [`dlrom_last_error`] on the same thread. Objects are
//! handed out as opaque pointers and released with the matching `_free`
//! function. Output buffers are caller-allocated and their lengths are
//! checked.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use dlrom_core::geometry::{vh_norm, FieldVector, UniformGrid1D};
use dlrom_core::linalg::Matrix;
use dlrom_core::neural::{load_network, Network};
use dlrom_core::solvers::{BurgersProblem, DarcyProblem};
use dlrom_core::study::io::read_snapshot_matrix;
use dlrom_core::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DlromStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Numerical = 4,
    Io = 5,
    Format = 6,
    Panic = 7,
}

/// Unit-square triangulation with its mass matrix and Darcy operator data.
pub struct DlromMesh {
    problem: DarcyProblem,
}

/// Dense row-major matrix, e.g. a snapshot file.
pub struct DlromMatrix {
    inner: Matrix,
}

/// Feed-forward network loaded from a checkpoint.
pub struct DlromNetwork {
    inner: Network,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> DlromStatus {
    match e {
        Error::DimensionMismatch { .. } => DlromStatus::DimensionMismatch,
        Error::Io(_) => DlromStatus::Io,
        Error::Format { .. } => DlromStatus::Format,
        e if e.is_numerical() => DlromStatus::Numerical,
        _ => DlromStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (DlromStatus, String)>) -> DlromStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DlromStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            DlromStatus::Panic
        }
    }
}

fn core<T>(r: Result<T, Error>) -> Result<T, (DlromStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (DlromStatus, String) {
    (DlromStatus::NullPointer, format!("{what} is null"))
}

unsafe fn slice<'a>(
    p: *const f64,
    len: usize,
    what: &str,
) -> Result<&'a [f64], (DlromStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    // SAFETY: caller guarantees `p` points to `len` readable doubles.
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

unsafe fn slice_mut<'a>(
    p: *mut f64,
    len: usize,
    what: &str,
) -> Result<&'a mut [f64], (DlromStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    // SAFETY: caller guarantees `p` points to `len` writable doubles.
    Ok(unsafe { std::slice::from_raw_parts_mut(p, len) })
}

fn check_len(what: &str, expected: usize, actual: usize) -> Result<(), (DlromStatus, String)> {
    if expected != actual {
        return Err((
            DlromStatus::DimensionMismatch,
            format!("{what}: expected length {expected}, got {actual}"),
        ));
    }
    Ok(())
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<&'a Path, (DlromStatus, String)> {
    if p.is_null() {
        return Err(null("path"));
    }
    // SAFETY: caller guarantees a NUL-terminated string.
    let s = unsafe { CStr::from_ptr(p) }.to_str().map_err(|_| {
        (
            DlromStatus::InvalidArgument,
            "path is not UTF-8".to_string(),
        )
    })?;
    Ok(Path::new(s))
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dlrom_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds the `n_div x n_div` unit-square mesh.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn dlrom_mesh_create(n_div: usize, out: *mut *mut DlromMesh) -> DlromStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let problem = core(DarcyProblem::new(n_div))?;
        let handle = Box::into_raw(Box::new(DlromMesh { problem }));
        // SAFETY: checked non-null above.
        unsafe { *out = handle };
        Ok(())
    })
}

/// # Safety
/// `mesh` must be NULL or a pointer from [`dlrom_mesh_create`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dlrom_mesh_free(mesh: *mut DlromMesh) {
    if !mesh.is_null() {
        // SAFETY: ownership returns to Rust exactly once.
        drop(unsafe { Box::from_raw(mesh) });
    }
}

/// Number of mesh nodes, 0 for NULL.
///
/// # Safety
/// `mesh` must be NULL or a live mesh handle.
#[no_mangle]
pub unsafe extern "C" fn dlrom_mesh_node_count(mesh: *const DlromMesh) -> usize {
    // SAFETY: caller guarantees validity.
    unsafe { mesh.as_ref() }.map_or(0, |m| m.problem.mesh.node_count())
}

/// Writes node coordinates as `x0, y0, x1, y1, ...` (length `2 * nodes`).
///
/// # Safety
/// `mesh` must be a live handle and `coords` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dlrom_mesh_node_coords(
    mesh: *const DlromMesh,
    coords: *mut f64,
    len: usize,
) -> DlromStatus {
    guard(|| {
        // SAFETY: caller guarantees validity.
        let m = unsafe { mesh.as_ref() }.ok_or_else(|| null("mesh"))?;
        let nodes = m.problem.mesh.nodes();
        check_len("coords", 2 * nodes.len(), len)?;
        let dst = unsafe { slice_mut(coords, len, "coords") }?;
        for (d, p) in dst.chunks_exact_mut(2).zip(nodes) {
            d.copy_from_slice(p);
        }
        Ok(())
    })
}

/// `sqrt(v^T M v)` for a nodal vector `v` of length `nodes`.
///
/// # Safety
/// `mesh` must be a live handle, `values` must hold `len` doubles and `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn dlrom_vh_norm(
    mesh: *const DlromMesh,
    values: *const f64,
    len: usize,
    out: *mut f64,
) -> DlromStatus {
    guard(|| {
        let m = unsafe { mesh.as_ref() }.ok_or_else(|| null("mesh"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let v = unsafe { slice(values, len, "values") }?;
        let n = core(vh_norm(&m.problem.mass, v))?;
        unsafe { *out = n };
        Ok(())
    })
}

/// Solves the Darcy problem for the nodal log-permeability `sigma`, writing
/// the nodal pressure to `u`. Both buffers have `nodes` entries.
///
/// # Safety
/// `mesh` must be a live handle; `sigma` and `u` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dlrom_solve_darcy(
    mesh: *const DlromMesh,
    sigma: *const f64,
    u: *mut f64,
    len: usize,
) -> DlromStatus {
    guard(|| {
        let m = unsafe { mesh.as_ref() }.ok_or_else(|| null("mesh"))?;
        check_len("sigma", m.problem.mesh.node_count(), len)?;
        let s = unsafe { slice(sigma, len, "sigma") }?;
        let dst = unsafe { slice_mut(u, len, "u") }?;
        let sol = core(m.problem.solve(&FieldVector(s.to_vec())))?;
        dst.copy_from_slice(&sol);
        Ok(())
    })
}

/// Evolves the inviscid Burgers equation on `[0, length]` with `n_cells`
/// cells from the cell averages `ic` to `t_final`, writing the result to
/// `out`.
///
/// # Safety
/// `ic` and `out` must hold `n_cells` doubles.
#[no_mangle]
pub unsafe extern "C" fn dlrom_solve_burgers(
    ic: *const f64,
    out: *mut f64,
    n_cells: usize,
    length: f64,
    dt: f64,
    t_final: f64,
) -> DlromStatus {
    guard(|| {
        let grid = core(UniformGrid1D::new(length, n_cells))?;
        let problem = BurgersProblem { grid, dt, t_final };
        let v0 = unsafe { slice(ic, n_cells, "ic") }?;
        let dst = unsafe { slice_mut(out, n_cells, "out") }?;
        let v = core(problem.solve(&FieldVector(v0.to_vec())))?;
        dst.copy_from_slice(&v);
        Ok(())
    })
}

/// Reads a binary snapshot matrix file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dlrom_snapshots_read(
    path: *const c_char,
    out: *mut *mut DlromMatrix,
) -> DlromStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let p = unsafe { path_arg(path) }?;
        let inner = core(read_snapshot_matrix(p))?;
        unsafe { *out = Box::into_raw(Box::new(DlromMatrix { inner })) };
        Ok(())
    })
}

/// # Safety
/// `m` must be NULL or a live matrix handle.
#[no_mangle]
pub unsafe extern "C" fn dlrom_matrix_rows(m: *const DlromMatrix) -> usize {
    unsafe { m.as_ref() }.map_or(0, |m| m.inner.rows())
}

/// # Safety
/// `m` must be NULL or a live matrix handle.
#[no_mangle]
pub unsafe extern "C" fn dlrom_matrix_cols(m: *const DlromMatrix) -> usize {
    unsafe { m.as_ref() }.map_or(0, |m| m.inner.cols())
}

/// Copies the row-major entries (`rows * cols` doubles) into `data`.
///
/// # Safety
/// `m` must be a live handle and `data` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dlrom_matrix_copy(
    m: *const DlromMatrix,
    data: *mut f64,
    len: usize,
) -> DlromStatus {
    guard(|| {
        let m = unsafe { m.as_ref() }.ok_or_else(|| null("matrix"))?;
        check_len("data", m.inner.as_slice().len(), len)?;
        let dst = unsafe { slice_mut(data, len, "data") }?;
        dst.copy_from_slice(m.inner.as_slice());
        Ok(())
    })
}

/// # Safety
/// `m` must be NULL or a handle from [`dlrom_snapshots_read`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dlrom_matrix_free(m: *mut DlromMatrix) {
    if !m.is_null() {
        drop(unsafe { Box::from_raw(m) });
    }
}

/// Loads a network checkpoint.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dlrom_network_load(
    path: *const c_char,
    out: *mut *mut DlromNetwork,
) -> DlromStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let p = unsafe { path_arg(path) }?;
        let inner = core(load_network(p))?;
        unsafe { *out = Box::into_raw(Box::new(DlromNetwork { inner })) };
        Ok(())
    })
}

/// # Safety
/// `net` must be NULL or a live network handle.
#[no_mangle]
pub unsafe extern "C" fn dlrom_network_input_width(net: *const DlromNetwork) -> usize {
    unsafe { net.as_ref() }.map_or(0, |n| n.inner.input_width())
}

/// # Safety
/// `net` must be NULL or a live network handle.
#[no_mangle]
pub unsafe extern "C" fn dlrom_network_output_width(net: *const DlromNetwork) -> usize {
    unsafe { net.as_ref() }.map_or(0, |n| n.inner.output_width())
}

/// Evaluates the network on `rows` row-major inputs of the network's input
/// width, writing `rows * output_width` doubles to `output`.
///
/// # Safety
/// `net` must be a live handle; `input` must hold `input_len` doubles and
/// `output` must hold `output_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dlrom_network_forward(
    net: *const DlromNetwork,
    input: *const f64,
    input_len: usize,
    rows: usize,
    output: *mut f64,
    output_len: usize,
) -> DlromStatus {
    guard(|| {
        let n = unsafe { net.as_ref() }.ok_or_else(|| null("network"))?;
        check_len("input", rows * n.inner.input_width(), input_len)?;
        check_len("output", rows * n.inner.output_width(), output_len)?;
        let x = unsafe { slice(input, input_len, "input") }?;
        let dst = unsafe { slice_mut(output, output_len, "output") }?;
        let batch = core(Matrix::from_vec(rows, n.inner.input_width(), x.to_vec()))?;
        let y = core(n.inner.predict(&batch))?;
        dst.copy_from_slice(y.as_slice());
        Ok(())
    })
}

/// # Safety
/// `net` must be NULL or a handle from [`dlrom_network_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dlrom_network_free(net: *mut DlromNetwork) {
    if !net.is_null() {
        drop(unsafe { Box::from_raw(net) });
    }
}
