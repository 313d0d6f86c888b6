//! Type-2 nonuniform FFT with the exponential-of-semicircle kernel on a
//! twice-oversampled fine grid.

use super::{FourierSeries1, FourierSeries2};
use crate::quadrature::GaussLegendre;
use crate::Complex;
use rustfft::FftPlanner;
use std::f64::consts::PI;

/// Kernel width (in fine-grid cells) and shape parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NufftParams {
    pub width: usize,
    pub beta: f64,
}

impl NufftParams {
    pub fn for_tolerance(tol: f64) -> Self {
        let digits = (1.0 / tol.clamp(1e-15, 1e-1)).log10().ceil() as usize;
        // One spare cell: per-evaluation errors accumulate over the tree.
        let width = (digits + 2).clamp(4, 16);
        NufftParams { width, beta: 2.30 * width as f64 }
    }

    #[inline]
    fn kernel(&self, z: f64) -> f64 {
        let s = 2.0 * z / self.width as f64;
        let r = 1.0 - s * s;
        if r <= 0.0 {
            0.0
        } else {
            (self.beta * (r.sqrt() - 1.0)).exp()
        }
    }

    /// `∫ φ(z) e^{-iξz} dz`.
    fn kernel_ft(&self, xi: f64) -> f64 {
        let rule = GaussLegendre::get(200);
        let h = self.width as f64 / 2.0;
        2.0 * rule.mapped(0.0, h).map(|(z, w)| w * self.kernel(z) * (xi * z).cos()).sum::<f64>()
    }

}

const LANES: usize = 16;

#[inline(always)]
fn fmadd(a: f64, b: f64, c: f64) -> f64 {
    if cfg!(target_feature = "fma") {
        a.mul_add(b, c)
    } else {
        a * b + c
    }
}

/// Polynomial fit of the kernel on each of the `width` unit cells, so that
/// all weights for one point come from vectorizable Horner sweeps.
#[derive(Debug, Clone)]
struct KernelTable {
    width: usize,
    /// Even and odd parts in powers of `y²`, highest first: cell `j` holds
    /// `Σ_i even[i][j] y^(2(h-1-i)) + y Σ_i odd[i][j] y^(2(h-1-i))`, `y ∈ [-1, 1]`.
    even: Vec<[f64; LANES]>,
    odd: Vec<[f64; LANES]>,
}

impl KernelTable {
    fn new(params: &NufftParams) -> Self {
        Self::with_degree(params, params.width)
    }

    fn with_degree(params: &NufftParams, deg: usize) -> Self {
        let w = params.width;
        let nodes = deg + 1;
        let lo = w as f64 / 2.0 - 1.0;
        // Chebyshev interpolant per cell, then converted to monomials
        let mut t_prev = vec![0.0; nodes];
        let mut t_cur = vec![0.0; nodes];
        t_prev[0] = 1.0;
        t_cur[1] = 1.0;
        let mut tpolys = vec![t_prev.clone(), t_cur.clone()];
        for _ in 2..nodes {
            let mut next = vec![0.0; nodes];
            for i in 0..nodes - 1 {
                next[i + 1] += 2.0 * t_cur[i];
            }
            for i in 0..nodes {
                next[i] -= t_prev[i];
            }
            t_prev = std::mem::replace(&mut t_cur, next.clone());
            tpolys.push(next);
        }
        let mut mono = vec![[0.0; LANES]; nodes + 1];
        for j in 0..w {
            let f: Vec<f64> = (0..nodes)
                .map(|i| {
                    let y = (PI * (i as f64 + 0.5) / nodes as f64).cos();
                    params.kernel(lo + 0.5 * (y + 1.0) - j as f64)
                })
                .collect();
            for (d, tp) in tpolys.iter().enumerate() {
                let c: f64 = (0..nodes)
                    .map(|i| f[i] * (PI * d as f64 * (i as f64 + 0.5) / nodes as f64).cos())
                    .sum::<f64>()
                    * if d == 0 { 1.0 } else { 2.0 }
                    / nodes as f64;
                for (power, &tc) in tp.iter().enumerate() {
                    mono[power][j] += c * tc;
                }
            }
        }
        let h = deg / 2 + 1;
        let even = (0..h).rev().map(|i| mono[2 * i]).collect();
        let odd = (0..h).rev().map(|i| mono[2 * i + 1]).collect();
        KernelTable { width: w, even, odd }
    }

    /// Weights for the `width` cells starting at `ceil(x - width/2)`.
    #[inline(always)]
    fn weights(&self, x: f64, out: &mut [f64; LANES]) -> i64 {
        let (start, y) = self.local(x);
        let y2 = y * y;
        let mut e = self.even[0];
        let mut o = self.odd[0];
        for (re, ro) in self.even[1..].iter().zip(&self.odd[1..]) {
            for j in 0..LANES {
                e[j] = fmadd(e[j], y2, re[j]);
                o[j] = fmadd(o[j], y2, ro[j]);
            }
        }
        for j in 0..LANES {
            out[j] = fmadd(o[j], y, e[j]);
        }
        start
    }

    /// First cell and the local coordinate in `[-1, 1]`.
    #[inline(always)]
    fn local(&self, x: f64) -> (i64, f64) {
        let half = self.width as f64 / 2.0;
        let start = (x - half).ceil();
        (start as i64, 2.0 * (x - start - (half - 1.0)) - 1.0)
    }
}

/// Deconvolved fine-grid amplitudes for modes `k = -M..M` (Nyquist split).
fn spread_1d(m: usize, n: usize, params: &NufftParams) -> Vec<(usize, f64, usize)> {
    // (coefficient index, factor, fine index)
    let mut out = Vec::with_capacity(2 * m + 1);
    for idx in 0..2 * m {
        let k = idx as i64 - m as i64;
        let d = 1.0 / params.kernel_ft(2.0 * PI * k as f64 / n as f64);
        if idx == 0 {
            out.push((idx, 0.5 * d, (n as i64 - m as i64) as usize % n));
            out.push((idx, 0.5 * d, m % n));
        } else {
            out.push((idx, d, k.rem_euclid(n as i64) as usize));
        }
    }
    out
}

/// Prepared fast evaluator for a 1-D series.
pub struct Nufft1 {
    table: KernelTable,
    n: usize,
    pad: usize,
    /// Interleaved re/im, wrapped with `pad` cells in front and `pad + LANES` behind.
    grid: Vec<f64>,
    to_grid: f64,
    inv_n: f64,
}

impl Nufft1 {
    pub fn new(series: &FourierSeries1, params: NufftParams) -> Self {
        let m = series.m;
        let n = (4 * m).max(2 * params.width);
        let mut fine = vec![Complex::new(0.0, 0.0); n];
        for (idx, d, f) in spread_1d(m, n, &params) {
            fine[f] += series.coeffs[idx] * d;
        }
        FftPlanner::new().plan_fft_inverse(n).process(&mut fine);
        let pad = params.width + 1;
        let grid = (0..n + 2 * pad + LANES)
            .flat_map(|p| {
                let c = fine[(p as i64 - pad as i64).rem_euclid(n as i64) as usize];
                [c.re, c.im]
            })
            .collect();
        Nufft1 {
            table: KernelTable::new(&params),
            n,
            pad,
            grid,
            to_grid: n as f64 / (2.0 * series.half_width),
            inv_n: 1.0 / n as f64,
        }
    }

    pub fn eval(&self, u: f64) -> Complex {
        let nf = self.n as f64;
        let mut x = u * self.to_grid;
        x -= (x * self.inv_n).floor() * nf;
        let mut w = [0.0f64; LANES];
        let start = self.table.weights(x, &mut w);
        let base = 2 * (start + self.pad as i64) as usize;
        let cells: &[f64; 2 * LANES] = self.grid[base..base + 2 * LANES].try_into().expect("padded grid");
        dot_interleaved(cells, &w)
    }
}

/// Prepared fast evaluator for a 2-D series.
pub struct Nufft2 {
    table: KernelTable,
    n: usize,
    pad: usize,
    /// Row length in `f64`s.
    stride: usize,
    /// Interleaved re/im rows, wrapped like the 1-D grid along both axes.
    grid: Vec<f64>,
    to_grid: [f64; 2],
    inv_n: f64,
}

impl Nufft2 {
    pub fn new(series: &FourierSeries2, params: NufftParams) -> Self {
        let m = series.m;
        let n = (4 * m).max(2 * params.width);
        let spread = spread_1d(m, n, &params);
        let two_m = 2 * m;
        let mut fine = vec![Complex::new(0.0, 0.0); n * n];
        for &(i1, d1, f1) in &spread {
            for &(i2, d2, f2) in &spread {
                fine[f1 * n + f2] += series.coeffs[i1 * two_m + i2] * (d1 * d2);
            }
        }
        let ifft = FftPlanner::new().plan_fft_inverse(n);
        for row in fine.chunks_mut(n) {
            ifft.process(row);
        }
        let mut col = vec![Complex::new(0.0, 0.0); n];
        for c in 0..n {
            for r in 0..n {
                col[r] = fine[r * n + c];
            }
            ifft.process(&mut col);
            for r in 0..n {
                fine[r * n + c] = col[r];
            }
        }
        let pad = params.width + 1;
        let rows = n + 2 * pad;
        let cols = n + 2 * pad + LANES;
        let stride = 2 * cols;
        let mut grid = vec![0.0; rows * stride];
        for p in 0..rows {
            let r = (p as i64 - pad as i64).rem_euclid(n as i64) as usize;
            for q in 0..cols {
                let c = (q as i64 - pad as i64).rem_euclid(n as i64) as usize;
                let v = fine[r * n + c];
                grid[p * stride + 2 * q] = v.re;
                grid[p * stride + 2 * q + 1] = v.im;
            }
        }
        Nufft2 {
            table: KernelTable::new(&params),
            n,
            pad,
            stride,
            grid,
            to_grid: [
                n as f64 / (2.0 * series.half_widths[0]),
                n as f64 / (2.0 * series.half_widths[1]),
            ],
            inv_n: 1.0 / n as f64,
        }
    }

    pub fn eval(&self, u: f64, v: f64) -> Complex {
        let nf = self.n as f64;
        let mut x = u * self.to_grid[0];
        x -= (x * self.inv_n).floor() * nf;
        let mut y = v * self.to_grid[1];
        y -= (y * self.inv_n).floor() * nf;
        let width = self.table.width;
        let mut wx = [0.0f64; LANES];
        let mut wy = [0.0f64; LANES];
        let sx = self.table.weights(x, &mut wx);
        let sy = self.table.weights(y, &mut wy);
        let r0 = (sx + self.pad as i64) as usize;
        let c0 = 2 * (sy + self.pad as i64) as usize;
        let mut col = [0.0f64; 2 * LANES];
        for (r, &kx) in wx[..width].iter().enumerate() {
            let off = (r0 + r) * self.stride + c0;
            let row: &[f64; 2 * LANES] = self.grid[off..off + 2 * LANES].try_into().expect("padded grid");
            for k in 0..2 * LANES {
                col[k] = fmadd(kx, row[k], col[k]);
            }
        }
        dot_interleaved(&col, &wy)
    }
}

/// `Σ_j (re_j + i im_j) w_j` over interleaved pairs.
#[inline(always)]
fn dot_interleaved(v: &[f64; 2 * LANES], w: &[f64; LANES]) -> Complex {
    let mut acc = [0.0f64; 8];
    for c in 0..LANES / 4 {
        for l in 0..4 {
            let j = 4 * c + l;
            acc[2 * l] = fmadd(v[2 * j], w[j], acc[2 * l]);
            acc[2 * l + 1] = fmadd(v[2 * j + 1], w[j], acc[2 * l + 1]);
        }
    }
    Complex::new(acc[0] + acc[2] + acc[4] + acc[6], acc[1] + acc[3] + acc[5] + acc[7])
}
