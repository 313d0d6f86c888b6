//! Complex matrix product on row-major slices.

use crate::Complex;
use matrixmultiply::CGemmOption;

/// `A (m×k) · B (k×n)`, all row-major.
pub fn zgemm(a: &[Complex], b: &[Complex], m: usize, k: usize, n: usize) -> Vec<Complex> {
    assert!(a.len() >= m * k && b.len() >= k * n);
    let mut c = vec![Complex::new(0.0, 0.0); m * n];
    if m == 0 || n == 0 || k == 0 {
        return c;
    }
    // SAFETY: Complex<f64> is #[repr(C)] {re, im}, layout-identical to [f64; 2];
    // the slices hold at least m·k, k·n and m·n elements with the given row strides.
    unsafe {
        matrixmultiply::zgemm(
            CGemmOption::Standard,
            CGemmOption::Standard,
            m,
            k,
            n,
            [1.0, 0.0],
            a.as_ptr() as *const [f64; 2],
            k as isize,
            1,
            b.as_ptr() as *const [f64; 2],
            n as isize,
            1,
            [0.0, 0.0],
            c.as_mut_ptr() as *mut [f64; 2],
            n as isize,
            1,
        );
    }
    c
}
