//! Minimal bindings to the UMFPACK multifrontal LU of SuiteSparse
//! (`long` integer complex version, packed storage). Real matrices are
//! factored as complex ones: the real kernels of some OpenBLAS builds give
//! wrong dense updates.

#![allow(clippy::too_many_arguments)]

use std::os::raw::c_void;
use std::ptr;

use num_complex::Complex64;

pub(crate) const CONTROL: usize = 20;
pub(crate) const INFO: usize = 90;
const IRSTEP: usize = 7;

pub(crate) const SYS_A: i64 = 0;
/// Conjugate transpose for complex matrices.
pub(crate) const SYS_AH: i64 = 1;

pub(crate) const STATUS_OK: i64 = 0;
pub(crate) const STATUS_SINGULAR: i64 = 1;
pub(crate) const STATUS_OUT_OF_MEMORY: i64 = -1;

#[link(name = "umfpack")]
extern "C" {
    fn umfpack_zl_defaults(control: *mut f64);
    fn umfpack_zl_symbolic(
        n_row: i64,
        n_col: i64,
        ap: *const i64,
        ai: *const i64,
        ax: *const f64,
        az: *const f64,
        symbolic: *mut *mut c_void,
        control: *const f64,
        info: *mut f64,
    ) -> i64;
    fn umfpack_zl_numeric(
        ap: *const i64,
        ai: *const i64,
        ax: *const f64,
        az: *const f64,
        symbolic: *mut c_void,
        numeric: *mut *mut c_void,
        control: *const f64,
        info: *mut f64,
    ) -> i64;
    fn umfpack_zl_solve(
        sys: i64,
        ap: *const i64,
        ai: *const i64,
        ax: *const f64,
        az: *const f64,
        xx: *mut f64,
        xz: *mut f64,
        bx: *const f64,
        bz: *const f64,
        numeric: *mut c_void,
        control: *const f64,
        info: *mut f64,
    ) -> i64;
    fn umfpack_zl_free_symbolic(symbolic: *mut *mut c_void);
    fn umfpack_zl_free_numeric(numeric: *mut *mut c_void);
}

/// Complex LU factors owned by UMFPACK, together with the CSC arrays
/// they were computed from.
pub(crate) struct ComplexLu {
    numeric: *mut c_void,
    ap: Vec<i64>,
    ai: Vec<i64>,
    ax: Vec<Complex64>,
    control: [f64; CONTROL],
}

// The numeric object is only read after construction.
unsafe impl Send for ComplexLu {}
unsafe impl Sync for ComplexLu {}

impl ComplexLu {
    /// Factors the order-`n` matrix with CSC arrays `(ap, ai, ax)`.
    pub(crate) fn new(n: usize, ap: Vec<i64>, ai: Vec<i64>, ax: Vec<Complex64>) -> Result<Self, i64> {
        let mut control = [0.0; CONTROL];
        let mut info = [0.0; INFO];
        unsafe { umfpack_zl_defaults(control.as_mut_ptr()) };
        // refinement is done by the caller against the exact residual
        control[IRSTEP] = 0.0;
        let x: *const f64 = ax.as_ptr().cast();
        let mut sym = ptr::null_mut();
        let st = unsafe {
            umfpack_zl_symbolic(
                n as i64,
                n as i64,
                ap.as_ptr(),
                ai.as_ptr(),
                x,
                ptr::null(),
                &mut sym,
                control.as_ptr(),
                info.as_mut_ptr(),
            )
        };
        if st != STATUS_OK {
            unsafe { umfpack_zl_free_symbolic(&mut sym) };
            return Err(st);
        }
        let mut numeric = ptr::null_mut();
        let st = unsafe {
            umfpack_zl_numeric(
                ap.as_ptr(),
                ai.as_ptr(),
                x,
                ptr::null(),
                sym,
                &mut numeric,
                control.as_ptr(),
                info.as_mut_ptr(),
            )
        };
        unsafe { umfpack_zl_free_symbolic(&mut sym) };
        if st != STATUS_OK {
            unsafe { umfpack_zl_free_numeric(&mut numeric) };
            return Err(st);
        }
        Ok(Self { numeric, ap, ai, ax, control })
    }

    /// Solves with `A` (`SYS_A`) or `Aᴴ` (`SYS_AH`).
    pub(crate) fn solve(&self, sys: i64, b: &[Complex64]) -> Vec<Complex64> {
        let mut x = vec![Complex64::default(); b.len()];
        let mut info = [0.0; INFO];
        let st = unsafe {
            umfpack_zl_solve(
                sys,
                self.ap.as_ptr(),
                self.ai.as_ptr(),
                self.ax.as_ptr().cast(),
                ptr::null(),
                x.as_mut_ptr().cast(),
                ptr::null_mut(),
                b.as_ptr().cast(),
                ptr::null(),
                self.numeric,
                self.control.as_ptr(),
                info.as_mut_ptr(),
            )
        };
        debug_assert!(st == STATUS_OK || st == STATUS_SINGULAR, "UMFPACK solve status {st}");
        x
    }
}

impl Drop for ComplexLu {
    fn drop(&mut self) {
        unsafe { umfpack_zl_free_numeric(&mut self.numeric) };
    }
}
