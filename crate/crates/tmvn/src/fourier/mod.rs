//! Truncated Fourier series on centered boxes: sampling grids, FFT fits,
//! Gaussian-weighted integration, and evaluation at arbitrary points through
//! either exact summation or a nonuniform FFT.
//!
//! Conventions: on `[-L, L)` with `2M` samples `t_i = -L + i·L/M`, a series is
//! `Σ_{k=-M}^{M-1} c_k b_k(πt/L)` with `b_k(x) = e^{ikx}` except that the
//! Nyquist term uses `b_{-M}(x) = cos(Mx)`. Both agree on the grid; the cosine
//! keeps Hermitian data Hermitian at every point.

mod nufft;

pub use nufft::{Nufft1, Nufft2, NufftParams};

use crate::error::{domain, Result};
use crate::specfun::gauss_fourier_weight;
use crate::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// Nonuniform evaluation backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    #[default]
    Direct,
    Fast,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::Direct => "direct",
            Backend::Fast => "fast",
        }
    }
}

impl std::str::FromStr for Backend {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "direct" => Ok(Backend::Direct),
            "fast" => Ok(Backend::Fast),
            other => Err(format!("unknown backend '{other}' (expected direct|fast)")),
        }
    }
}

/// Uniform half-open grid `t_i = -L + i·L/M`, `i = 0..2M`.
pub fn grid_points(m: usize, half_width: f64) -> Vec<f64> {
    (0..2 * m)
        .map(|i| -half_width + i as f64 * half_width / m as f64)
        .collect()
}

/// Weights `q_j` with `Σ_j q_j f(t_j)` equal to the Gaussian-weighted integral
/// of the series fitted to the samples `f(t_j)`.
pub fn gauss_quadrature_weights(m: usize, half_width: f64) -> Vec<f64> {
    let n = 2 * m;
    let g: Vec<f64> = (0..=m).map(|k| gauss_fourier_weight(k as i64, half_width)).collect();
    (0..n)
        .map(|j| {
            let mut acc = g[0];
            for k in 1..m {
                // cos(πk(j - M)/M) with the angle reduced exactly
                let r = (k as i64 * (j as i64 - m as i64)).rem_euclid(n as i64);
                let r = r.min(n as i64 - r);
                acc += 2.0 * g[k] * (PI * r as f64 / m as f64).cos();
            }
            let sign = if (m + j) % 2 == 0 { 1.0 } else { -1.0 };
            (acc + g[m] * sign) / n as f64
        })
        .collect()
}

fn fft_plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut planner = FftPlanner::new();
    if inverse {
        planner.plan_fft_inverse(len)
    } else {
        planner.plan_fft_forward(len)
    }
}

fn sign(k: i64) -> f64 {
    if k.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Uniform samples → coefficients (index `k + M`), in place semantics.
fn samples_to_coeffs_1d(values: &[Complex], fft: &dyn Fft<f64>, out: &mut [Complex]) {
    let n = values.len();
    let m = n / 2;
    let mut buf = values.to_vec();
    fft.process(&mut buf);
    for idx in 0..n {
        let k = idx as i64 - m as i64;
        out[idx] = buf[k.rem_euclid(n as i64) as usize] * (sign(k) / n as f64);
    }
}

fn coeffs_to_samples_1d(coeffs: &[Complex], ifft: &dyn Fft<f64>, out: &mut [Complex]) {
    let n = coeffs.len();
    let m = n / 2;
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    for idx in 0..n {
        let k = idx as i64 - m as i64;
        buf[k.rem_euclid(n as i64) as usize] = coeffs[idx] * sign(k);
    }
    ifft.process(&mut buf);
    out.copy_from_slice(&buf);
}

/// One-dimensional truncated series.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierSeries1 {
    pub m: usize,
    pub half_width: f64,
    /// `c_k` at index `k + M`.
    pub coeffs: Vec<Complex>,
}

impl FourierSeries1 {
    pub fn from_samples(values: &[Complex], half_width: f64) -> Result<Self> {
        let n = values.len();
        if n < 2 || n % 2 != 0 {
            return domain(format!("sample count must be even and positive, got {n}"));
        }
        let mut coeffs = vec![Complex::new(0.0, 0.0); n];
        samples_to_coeffs_1d(values, fft_plan(n, false).as_ref(), &mut coeffs);
        Ok(FourierSeries1 { m: n / 2, half_width, coeffs })
    }

    pub fn samples(&self) -> Vec<Complex> {
        let mut out = vec![Complex::new(0.0, 0.0); 2 * self.m];
        coeffs_to_samples_1d(&self.coeffs, fft_plan(2 * self.m, true).as_ref(), &mut out);
        out
    }

    /// Exact evaluation by summing every mode.
    pub fn eval_direct(&self, u: f64) -> Complex {
        let x = PI * u / self.half_width;
        let m = self.m as i64;
        let mut acc = self.coeffs[0] * (m as f64 * x).cos();
        for idx in 1..2 * self.m {
            let k = idx as i64 - m;
            acc += self.coeffs[idx] * Complex::from_polar(1.0, k as f64 * x);
        }
        acc
    }

    /// `(1/√π) ∫ e^{-t²} f(t) dt`.
    pub fn integrate_gauss_weighted(&self) -> Complex {
        integrate_gauss_weighted(&self.coeffs, self.half_width)
    }
}

/// `Σ_k c_k exp(-k²π²/(4L²))` for coefficients indexed `k + M`.
pub fn integrate_gauss_weighted(coeffs: &[Complex], half_width: f64) -> Complex {
    let m = (coeffs.len() / 2) as i64;
    coeffs
        .iter()
        .enumerate()
        .map(|(idx, c)| c * gauss_fourier_weight(idx as i64 - m, half_width))
        .sum()
}

/// Samples on the `(2M)×(2M)` grid, row-major with the first variable outer.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGrid2 {
    pub m: usize,
    pub values: Vec<Complex>,
}

impl SampleGrid2 {
    pub fn new(m: usize, values: Vec<Complex>) -> Result<Self> {
        if values.len() != 4 * m * m {
            return domain(format!("grid needs {} values, got {}", 4 * m * m, values.len()));
        }
        Ok(SampleGrid2 { m, values })
    }

    /// Samples `f(t_1, t_2)` on the grid of the given half-widths.
    pub fn from_fn(m: usize, half_widths: [f64; 2], f: impl Fn(f64, f64) -> Complex) -> Self {
        let g1 = grid_points(m, half_widths[0]);
        let g2 = grid_points(m, half_widths[1]);
        let mut values = Vec::with_capacity(4 * m * m);
        for &u in &g1 {
            for &v in &g2 {
                values.push(f(u, v));
            }
        }
        SampleGrid2 { m, values }
    }
}

/// Two-dimensional truncated series on `[-L₁, L₁) × [-L₂, L₂)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierSeries2 {
    pub m: usize,
    pub half_widths: [f64; 2],
    /// `c_{k₁k₂}` at `(k₁ + M)·2M + (k₂ + M)`.
    pub coeffs: Vec<Complex>,
}

/// Fits a 2-D series to uniform samples by a 2-D FFT.
pub fn series_from_samples(grid: &SampleGrid2, half_widths: [f64; 2]) -> Result<FourierSeries2> {
    let m = grid.m;
    let n = 2 * m;
    if grid.values.len() != n * n {
        return domain("grid shape does not match its M");
    }
    let fft = fft_plan(n, false);
    let mut rows = vec![Complex::new(0.0, 0.0); n * n];
    for r in 0..n {
        samples_to_coeffs_1d(&grid.values[r * n..(r + 1) * n], fft.as_ref(), &mut rows[r * n..(r + 1) * n]);
    }
    let mut coeffs = vec![Complex::new(0.0, 0.0); n * n];
    let mut col = vec![Complex::new(0.0, 0.0); n];
    let mut out = vec![Complex::new(0.0, 0.0); n];
    for c in 0..n {
        for r in 0..n {
            col[r] = rows[r * n + c];
        }
        samples_to_coeffs_1d(&col, fft.as_ref(), &mut out);
        for r in 0..n {
            coeffs[r * n + c] = out[r];
        }
    }
    Ok(FourierSeries2 { m, half_widths, coeffs })
}

impl FourierSeries2 {
    /// Values back on the sampling grid.
    pub fn samples(&self) -> SampleGrid2 {
        let n = 2 * self.m;
        let ifft = fft_plan(n, true);
        let mut rows = vec![Complex::new(0.0, 0.0); n * n];
        for r in 0..n {
            coeffs_to_samples_1d(&self.coeffs[r * n..(r + 1) * n], ifft.as_ref(), &mut rows[r * n..(r + 1) * n]);
        }
        let mut values = vec![Complex::new(0.0, 0.0); n * n];
        let mut col = vec![Complex::new(0.0, 0.0); n];
        let mut out = vec![Complex::new(0.0, 0.0); n];
        for c in 0..n {
            for r in 0..n {
                col[r] = rows[r * n + c];
            }
            coeffs_to_samples_1d(&col, ifft.as_ref(), &mut out);
            for r in 0..n {
                values[r * n + c] = out[r];
            }
        }
        SampleGrid2 { m: self.m, values }
    }

    pub fn coeff_l1(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).sum()
    }

    /// Exact evaluation at one point.
    pub fn eval_direct(&self, u: f64, v: f64) -> Complex {
        let n = 2 * self.m;
        let b1 = basis(self.m, PI * u / self.half_widths[0]);
        let b2 = basis(self.m, PI * v / self.half_widths[1]);
        let mut acc = Complex::new(0.0, 0.0);
        for r in 0..n {
            let row = &self.coeffs[r * n..(r + 1) * n];
            let inner: Complex = row.iter().zip(&b2).map(|(c, b)| c * b).sum();
            acc += inner * b1[r];
        }
        acc
    }
}

/// `b_k(x)` into `out` (length `2M`), by recurrence re-anchored every 32 steps.
fn basis_into(m: usize, x: f64, out: &mut [Complex]) {
    let step = Complex::from_polar(1.0, x);
    let mut p = Complex::new(1.0, 0.0);
    out[m] = p;
    for k in 1..=m {
        p = if k % 32 == 0 { Complex::from_polar(1.0, k as f64 * x) } else { p * step };
        if k < m {
            out[m + k] = p;
            out[m - k] = p.conj();
        }
    }
    out[0] = Complex::new(p.re, 0.0);
}

impl FourierSeries2 {
    /// Exact evaluation at many points through dense matrix products.
    pub fn eval_direct_batch(&self, points: &[(f64, f64)], out: &mut [Complex]) {
        let n = 2 * self.m;
        const CHUNK: usize = 256;
        let mut b2t = vec![Complex::new(0.0, 0.0); n * CHUNK];
        let mut row = vec![Complex::new(0.0, 0.0); n];
        for (pts, dst) in points.chunks(CHUNK).zip(out.chunks_mut(CHUNK)) {
            let p = pts.len();
            for (col, &(_, v)) in pts.iter().enumerate() {
                basis_into(self.m, PI * v / self.half_widths[1], &mut row);
                for k in 0..n {
                    b2t[k * p + col] = row[k];
                }
            }
            let x = crate::gemm::zgemm(&self.coeffs, &b2t[..n * p], n, n, p);
            for (col, (&(u, _), d)) in pts.iter().zip(dst.iter_mut()).enumerate() {
                basis_into(self.m, PI * u / self.half_widths[0], &mut row);
                *d = (0..n).map(|k| row[k] * x[k * p + col]).sum();
            }
        }
    }
}

/// `b_k(x)` for `k = -M..M-1`, Nyquist as a cosine.
fn basis(m: usize, x: f64) -> Vec<Complex> {
    let mut b = Vec::with_capacity(2 * m);
    b.push(Complex::new((m as f64 * x).cos(), 0.0));
    for idx in 1..2 * m {
        let k = idx as f64 - m as f64;
        b.push(Complex::from_polar(1.0, k * x));
    }
    b
}

/// Prepared evaluator of a 2-D series at arbitrary points.
pub enum Evaluator2<'a> {
    Direct(&'a FourierSeries2),
    Fast(Nufft2),
}

impl<'a> Evaluator2<'a> {
    pub fn new(series: &'a FourierSeries2, backend: Backend, tol: f64) -> Self {
        match backend {
            Backend::Direct => Evaluator2::Direct(series),
            Backend::Fast => Evaluator2::Fast(Nufft2::new(series, NufftParams::for_tolerance(tol))),
        }
    }

    pub fn eval(&self, u: f64, v: f64) -> Complex {
        match self {
            Evaluator2::Direct(s) => s.eval_direct(u, v),
            Evaluator2::Fast(p) => p.eval(u, v),
        }
    }

    pub fn eval_batch(&self, points: &[(f64, f64)], out: &mut [Complex]) {
        match self {
            Evaluator2::Direct(s) => s.eval_direct_batch(points, out),
            Evaluator2::Fast(p) => {
                for (o, &(u, v)) in out.iter_mut().zip(points) {
                    *o = p.eval(u, v);
                }
            }
        }
    }
}

/// Prepared evaluator of a 1-D series at arbitrary points.
pub enum Evaluator1<'a> {
    Direct(&'a FourierSeries1),
    Fast(Nufft1),
}

impl<'a> Evaluator1<'a> {
    pub fn new(series: &'a FourierSeries1, backend: Backend, tol: f64) -> Self {
        match backend {
            Backend::Direct => Evaluator1::Direct(series),
            Backend::Fast => Evaluator1::Fast(Nufft1::new(series, NufftParams::for_tolerance(tol))),
        }
    }

    pub fn eval(&self, u: f64) -> Complex {
        match self {
            Evaluator1::Direct(s) => s.eval_direct(u),
            Evaluator1::Fast(p) => p.eval(u),
        }
    }
}

/// Evaluates a 2-D series at the given points.
pub fn eval_nonuniform(series: &FourierSeries2, points: &[(f64, f64)], backend: Backend, tol: f64) -> Vec<Complex> {
    let mut out = vec![Complex::new(0.0, 0.0); points.len()];
    Evaluator2::new(series, backend, tol).eval_batch(points, &mut out);
    out
}

/// Dense three-axis complex tensor, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    pub dims: [usize; 3],
    pub data: Vec<Complex>,
}

impl Tensor3 {
    pub fn new(dims: [usize; 3], data: Vec<Complex>) -> Result<Self> {
        if data.len() != dims.iter().product::<usize>() {
            return domain("tensor data length does not match its dimensions");
        }
        Ok(Tensor3 { dims, data })
    }

    fn offset(&self, i: [usize; 3]) -> usize {
        (i[0] * self.dims[1] + i[1]) * self.dims[2] + i[2]
    }

    pub fn get(&self, i: [usize; 3]) -> Complex {
        self.data[self.offset(i)]
    }

    /// Fiber along `axis` through the other two fixed indices.
    pub fn fiber(&self, axis: usize, fixed: [usize; 3]) -> Vec<Complex> {
        (0..self.dims[axis])
            .map(|j| {
                let mut idx = fixed;
                idx[axis] = j;
                self.get(idx)
            })
            .collect()
    }
}

/// Per-fiber series coefficients along one axis (same layout as the input).
pub fn fft_1d_along_axis(values: &Tensor3, axis: usize, inverse: bool) -> Result<Tensor3> {
    if axis > 2 {
        return domain(format!("axis {axis} out of range"));
    }
    let len = values.dims[axis];
    if len < 2 || len % 2 != 0 {
        return domain(format!("axis length must be even, got {len}"));
    }
    let plan = fft_plan(len, inverse);
    let mut out = values.clone();
    let (o1, o2) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let mut buf = vec![Complex::new(0.0, 0.0); len];
    for a in 0..values.dims[o1] {
        for b in 0..values.dims[o2] {
            let mut fixed = [0; 3];
            fixed[o1] = a;
            fixed[o2] = b;
            let fiber = values.fiber(axis, fixed);
            if inverse {
                coeffs_to_samples_1d(&fiber, plan.as_ref(), &mut buf);
            } else {
                samples_to_coeffs_1d(&fiber, plan.as_ref(), &mut buf);
            }
            for (j, v) in buf.iter().enumerate() {
                let mut idx = fixed;
                idx[axis] = j;
                let off = out.offset(idx);
                out.data[off] = *v;
            }
        }
    }
    Ok(out)
}
