//! Constant symmetric tridiagonal matrices `A = tridiag(-o, d, -o)`.
//!
//! Each coupling `o·x_k x_{k+1}` is rewritten as `-(o/2)(x_k - x_{k+1})²` plus
//! diagonal terms and decoupled with
//! `e^{-s²} = (1/√π) ∫ e^{-t²} e^{2ist} dt`, `s = √(o/2)(x_k - x_{k+1})`.
//! Every tree node then carries a function of at most two coupling variables
//! `(t_l, t_r)`, sampled on `[-14, 14)²`; a parent is obtained from its
//! children by a Gaussian-weighted contraction over the shared variable.

use crate::error::{domain, Result, TmvnError};
use crate::gemm::zgemm;
use crate::exec::Execution;
use crate::fourier::{fft_1d_along_axis, gauss_quadrature_weights, grid_points, integrate_gauss_weighted, SampleGrid2, Tensor3};
use crate::lowrank::{ClosedForm, Factor, FactorQuadrature, LeafSource, LowRankH};
use crate::report::{LevelDiagnostic, Timings};
use crate::scaled::Scaled;
use crate::specfun::filter;
use crate::tree::PartitionTree;
use crate::Complex;
use std::sync::Mutex;
use std::time::Instant;

/// Half-width of the sampled t-domain.
pub const T_HALF_WIDTH: f64 = 14.0;
/// Filter transition start.
pub const T_TRUSTED: f64 = 7.0;
/// Quadrature nodes whose weight falls below this fraction of the largest are skipped.
const PRUNE_RELATIVE: f64 = 1e-17;

#[derive(Debug, Clone, PartialEq)]
pub struct TridiagSpec {
    pub n: usize,
    pub d: f64,
    pub o: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl TridiagSpec {
    pub fn new(n: usize, d: f64, o: f64, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return domain(format!("N must be a power of two, got {n}"));
        }
        if a.len() != n || b.len() != n {
            return domain("bound vectors must have length N");
        }
        if let Some(k) = (0..n).find(|&k| !(a[k] < b[k])) {
            return domain(format!("bounds must satisfy a < b at variable {}", k + 1));
        }
        if !(o > 0.0) || !(d >= 2.0 * o) {
            return Err(TmvnError::Config(format!("need d ≥ 2o > 0, got d={d}, o={o}")));
        }
        Ok(TridiagSpec { n, d, o, a, b })
    }

    /// Leaf exponent for a variable with two neighbours.
    pub fn alpha_interior(&self) -> f64 {
        self.d / 2.0 - self.o
    }

    /// Leaf exponent for the first and last variable.
    pub fn alpha_boundary(&self) -> f64 {
        self.d / 2.0 - self.o / 2.0
    }

    /// Scale of the coupling variables, `√(o/2)`.
    pub fn kappa(&self) -> f64 {
        (self.o / 2.0).sqrt()
    }

    /// Dense matrix, row-major.
    pub fn dense(&self) -> Vec<f64> {
        let n = self.n;
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            m[i * n + i] = self.d;
            if i + 1 < n {
                m[i * n + i + 1] = -self.o;
                m[(i + 1) * n + i] = -self.o;
            }
        }
        m
    }
}

/// How a parent is assembled from its children.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CombineMode {
    /// Weighted matrix product over the shared variable.
    #[default]
    Contraction,
    /// Literal product tensor, FFT along the shared axis, Gaussian weights.
    Tensor,
}

#[derive(Debug, Clone, Copy)]
pub struct TridiagOptions {
    pub m: usize,
    pub exec: Execution,
    pub mode: CombineMode,
}

impl TridiagOptions {
    pub fn new(m: usize) -> Self {
        TridiagOptions { m, exec: Execution::default(), mode: CombineMode::default() }
    }
}

/// Which coupling variables a node function depends on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HShape {
    /// `h(t_l, t_r)`, dense.
    Full,
    /// `h(t_l, t_r) = p(t_l - t_r) F(t_l) F(t_r)`, stored as `p`.
    Toeplitz,
    /// First variable absent: `h(t_r)`.
    RightVar,
    /// Second variable absent: `h(t_l)`.
    LeftVar,
    Scalar,
}

/// Filtered node function on the sample grid, times `e^{log_scale}`.
#[derive(Debug, Clone)]
pub struct HNode {
    pub id: usize,
    pub m: usize,
    pub shape: HShape,
    pub values: Vec<Complex>,
    pub log_scale: f64,
}

/// Shared sampling data for one M.
#[derive(Debug, Clone)]
pub struct TGrid {
    pub m: usize,
    pub t: Vec<f64>,
    pub filter: Vec<f64>,
    /// Quadrature weight times filter at each node.
    pub weight: Vec<f64>,
    pub keep: Vec<usize>,
}

impl TGrid {
    pub fn new(m: usize) -> Self {
        let t = grid_points(m, T_HALF_WIDTH);
        let filter: Vec<f64> = t.iter().map(|&x| filter(x, T_TRUSTED)).collect();
        let q = gauss_quadrature_weights(m, T_HALF_WIDTH);
        let weight: Vec<f64> = q.iter().zip(&filter).map(|(a, b)| a * b).collect();
        let top = weight.iter().fold(0.0f64, |s, w| s.max(w.abs()));
        let keep = (0..2 * m).filter(|&j| weight[j].abs() > PRUNE_RELATIVE * top).collect();
        TGrid { m, t, filter, weight, keep }
    }

    fn len(&self) -> usize {
        2 * self.m
    }
}

impl HNode {
    /// Value at grid indices (null axes ignored).
    pub fn value(&self, grid: &TGrid, l: usize, r: usize) -> Complex {
        let n = grid.len();
        match self.shape {
            HShape::Full => self.values[l * n + r],
            HShape::Toeplitz => self.values[l + n - 1 - r] * (grid.filter[l] * grid.filter[r]),
            HShape::RightVar => self.values[r],
            HShape::LeftVar => self.values[l],
            HShape::Scalar => self.values[0],
        }
    }

    /// Dense `(2M)²` grid (constant along absent variables), unscaled.
    pub fn to_grid(&self, grid: &TGrid) -> SampleGrid2 {
        let n = grid.len();
        let mut values = Vec::with_capacity(n * n);
        for l in 0..n {
            for r in 0..n {
                values.push(self.value(grid, l, r));
            }
        }
        SampleGrid2 { m: self.m, values }
    }

    fn normalize(&mut self) -> Result<()> {
        let top = self.values.iter().fold(0.0f64, |s, v| s.max(v.norm()));
        if !top.is_finite() || self.values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(TmvnError::Numeric { node: self.id, detail: "non-finite node values".into() });
        }
        if top == 0.0 {
            return Err(TmvnError::Numeric { node: self.id, detail: "node function vanished".into() });
        }
        for v in &mut self.values {
            *v /= top;
        }
        self.log_scale += top.ln();
        Ok(())
    }

    /// Largest magnitude on the outermost grid line, relative to the peak.
    fn edge_leakage(&self, grid: &TGrid) -> f64 {
        let n = grid.len();
        let mut worst = 0.0f64;
        for j in 0..n {
            worst = worst.max(self.value(grid, 0, j).norm()).max(self.value(grid, j, 0).norm());
        }
        worst
    }
}

/// Filtered leaf function of variable `k` with closed-form integrals.
pub fn leaf_h(spec: &TridiagSpec, tree: &PartitionTree, k: usize, grid: &TGrid) -> Result<HNode> {
    leaf_from(spec, tree, k, grid, &ClosedForm)
}

/// Leaf function with the factor `u` folded into the integral (quadrature).
pub fn leaf_h_factor(spec: &TridiagSpec, tree: &PartitionTree, k: usize, grid: &TGrid, u: &Factor) -> Result<HNode> {
    let h = LowRankH::new(
        spec.n,
        vec![crate::lowrank::Term {
            weight: 1.0,
            factors: vec![crate::lowrank::IndexedFactor { var: k + 1, factor: u.clone() }],
        }],
    )?;
    leaf_from(spec, tree, k, grid, &FactorQuadrature { h: &h, term: 0 })
}

fn leaf_from(spec: &TridiagSpec, tree: &PartitionTree, k: usize, grid: &TGrid, src: &dyn LeafSource) -> Result<HNode> {
    let n = grid.len();
    let kappa = spec.kappa();
    let (a, b) = (spec.a[k], spec.b[k]);
    let id = tree.leaf_of(k).id;
    let boundary_alpha = spec.alpha_boundary();
    let interior_alpha = spec.alpha_interior();
    if interior_alpha < 0.0 {
        return Err(TmvnError::Config(format!("leaf exponent {interior_alpha} is negative")));
    }
    let mut node = if k == 0 {
        let values = (0..n)
            .map(|r| Ok(src.integral(k, a, b, boundary_alpha, -kappa * grid.t[r])? * grid.filter[r]))
            .collect::<Result<Vec<_>>>()?;
        HNode { id, m: grid.m, shape: HShape::RightVar, values, log_scale: 0.0 }
    } else if k == spec.n - 1 {
        let values = (0..n)
            .map(|l| Ok(src.integral(k, a, b, boundary_alpha, kappa * grid.t[l])? * grid.filter[l]))
            .collect::<Result<Vec<_>>>()?;
        HNode { id, m: grid.m, shape: HShape::LeftVar, values, log_scale: 0.0 }
    } else {
        let h = T_HALF_WIDTH / grid.m as f64;
        let values = (0..2 * n - 1)
            .map(|i| {
                let diff = i as f64 - (n - 1) as f64;
                src.integral(k, a, b, interior_alpha, kappa * diff * h)
            })
            .collect::<Result<Vec<_>>>()?;
        HNode { id, m: grid.m, shape: HShape::Toeplitz, values, log_scale: 0.0 }
    };
    node.normalize()?;
    Ok(node)
}

fn out_shape(left_rows: usize, right_cols: usize) -> HShape {
    match (left_rows, right_cols) {
        (1, 1) => HShape::Scalar,
        (1, _) => HShape::RightVar,
        (_, 1) => HShape::LeftVar,
        _ => HShape::Full,
    }
}

/// Parent function from `child1 = h(t_l, t_m)` and `child2 = h(t_m, t_r)`.
pub fn combine(id: usize, child1: &HNode, child2: &HNode, grid: &TGrid, mode: CombineMode) -> Result<HNode> {
    if child1.m != grid.m || child2.m != grid.m {
        return domain("child grids do not match the requested M");
    }
    if matches!(child1.shape, HShape::LeftVar | HShape::Scalar) || matches!(child2.shape, HShape::RightVar | HShape::Scalar) {
        return domain("children do not share a coupling variable");
    }
    let mut node = match mode {
        CombineMode::Contraction => contract(id, child1, child2, grid),
        CombineMode::Tensor => tensor_combine(id, child1, child2, grid)?,
    };
    node.log_scale += child1.log_scale + child2.log_scale;
    node.normalize()?;
    Ok(node)
}

fn contract(id: usize, child1: &HNode, child2: &HNode, grid: &TGrid) -> HNode {
    let n = grid.len();
    let keep = &grid.keep;
    let kk = keep.len();
    let rows = if child1.shape == HShape::RightVar { 1 } else { n };
    let cols = if child2.shape == HShape::LeftVar { 1 } else { n };
    let mut a = Vec::with_capacity(rows * kk);
    for l in 0..rows {
        for &j in keep {
            a.push(child1.value(grid, l, j));
        }
    }
    let mut b = Vec::with_capacity(kk * cols);
    for &j in keep {
        let w = grid.weight[j];
        for r in 0..cols {
            b.push(child2.value(grid, j, r) * w);
        }
    }
    let mut values = zgemm(&a, &b, rows, kk, cols);
    for l in 0..rows {
        for r in 0..cols {
            let f = if rows > 1 { grid.filter[l] } else { 1.0 } * if cols > 1 { grid.filter[r] } else { 1.0 };
            values[l * cols + r] *= f;
        }
    }
    HNode { id, m: grid.m, shape: out_shape(rows, cols), values, log_scale: 0.0 }
}

/// Reference path: product tensor over `(t_l, t_r, t_m)`, filter and FFT along
/// `t_m`, Gaussian integration per fiber, then the outer filter.
fn tensor_combine(id: usize, child1: &HNode, child2: &HNode, grid: &TGrid) -> Result<HNode> {
    let n = grid.len();
    let mut data = Vec::with_capacity(n * n * n);
    for l in 0..n {
        for r in 0..n {
            for mid in 0..n {
                data.push(child1.value(grid, l, mid) * child2.value(grid, mid, r) * grid.filter[mid]);
            }
        }
    }
    let coeffs = fft_1d_along_axis(&Tensor3::new([n, n, n], data)?, 2, false)?;
    let rows = if child1.shape == HShape::RightVar { 1 } else { n };
    let cols = if child2.shape == HShape::LeftVar { 1 } else { n };
    let mut values = Vec::with_capacity(rows * cols);
    for l in 0..rows {
        for r in 0..cols {
            let fiber = &coeffs.data[(l * n + r) * n..(l * n + r + 1) * n];
            let f = if rows > 1 { grid.filter[l] } else { 1.0 } * if cols > 1 { grid.filter[r] } else { 1.0 };
            values.push(integrate_gauss_weighted(fiber, T_HALF_WIDTH) * f);
        }
    }
    Ok(HNode { id, m: grid.m, shape: out_shape(rows, cols), values, log_scale: 0.0 })
}

/// Result of one tridiagonal run.
#[derive(Debug, Clone)]
pub struct TridiagSolution {
    pub phi: Scaled,
    pub imag_ratio: f64,
    pub timings: Timings,
    pub levels: Vec<LevelDiagnostic>,
}

/// Largest tolerated `|Im φ| / |Re φ|`.
pub const IMAG_TOLERANCE: f64 = 1e-10;

pub fn compute_phi_tridiag(spec: &TridiagSpec, opts: &TridiagOptions) -> Result<TridiagSolution> {
    run(spec, opts, &ClosedForm)
}

/// `Σ_p w_p φ_p` with every leaf integral replaced by quadrature of its factor.
pub fn compute_phi_tridiag_lowrank_h(spec: &TridiagSpec, h: &LowRankH, opts: &TridiagOptions) -> Result<TridiagSolution> {
    if h.n != spec.n {
        return domain("H model dimension does not match N");
    }
    let mut total: Option<TridiagSolution> = None;
    for p in 0..h.terms.len() {
        let mut sol = run(spec, opts, &FactorQuadrature { h, term: p })?;
        sol.phi.mantissa *= h.terms[p].weight;
        total = Some(match total {
            None => sol,
            Some(mut acc) => {
                acc.phi = acc.phi.add(&sol.phi);
                acc.imag_ratio = acc.imag_ratio.max(sol.imag_ratio);
                acc.timings = acc.timings.add(&sol.timings);
                acc
            }
        });
    }
    Ok(total.expect("at least one term"))
}

fn run(spec: &TridiagSpec, opts: &TridiagOptions, src: &dyn LeafSource) -> Result<TridiagSolution> {
    let start = Instant::now();
    if opts.m < 2 {
        return domain("M must be at least 2");
    }
    if spec.n == 1 {
        let v = src.integral(0, spec.a[0], spec.b[0], spec.d / 2.0, 0.0)?;
        let t = start.elapsed().as_secs_f64();
        return Ok(TridiagSolution {
            phi: Scaled::from_f64(v.re),
            imag_ratio: (v.im / v.re).abs(),
            timings: Timings { leaves: t, total: t, ..Timings::default() },
            levels: Vec::new(),
        });
    }
    let tree = PartitionTree::build(spec.n)?;
    let grid = TGrid::new(opts.m);
    let ctx = Ctx { spec, tree: &tree, grid: &grid, opts, src, diag: Mutex::new(Vec::new()), leaf_nanos: Mutex::new(0.0) };
    let root = ctx.up(0)?;
    let v = root.values[0];
    let imag_ratio = (v.im / v.re).abs();
    // A sign-changing H may integrate to zero, so only finiteness is checked there.
    let rejected = if src.nonnegative() { !(v.re > 0.0) || imag_ratio > IMAG_TOLERANCE } else { !v.re.is_finite() };
    if rejected {
        return Err(TmvnError::Numeric {
            node: 0,
            detail: format!("root value {v} is not a positive real (|Im/Re| = {imag_ratio:e})"),
        });
    }
    let total = start.elapsed().as_secs_f64();
    let leaves = *ctx.leaf_nanos.lock().expect("timer");
    let levels = LevelDiagnostic::aggregate(ctx.diag.into_inner().expect("diagnostics"));
    Ok(TridiagSolution {
        phi: Scaled::new(v.re, root.log_scale),
        imag_ratio,
        timings: Timings { downward: 0.0, leaves, upward: total - leaves, total },
        levels,
    })
}

struct Ctx<'a> {
    spec: &'a TridiagSpec,
    tree: &'a PartitionTree,
    grid: &'a TGrid,
    opts: &'a TridiagOptions,
    src: &'a dyn LeafSource,
    diag: Mutex<Vec<(usize, f64, f64)>>,
    leaf_nanos: Mutex<f64>,
}

impl Ctx<'_> {
    fn up(&self, id: usize) -> Result<HNode> {
        let node = self.tree.node(id);
        let h = match node.children {
            None => {
                let t0 = Instant::now();
                let h = leaf_from(self.spec, self.tree, node.lo, self.grid, self.src)?;
                *self.leaf_nanos.lock().expect("timer") += t0.elapsed().as_secs_f64();
                h
            }
            Some((l, r)) => {
                let (hl, hr) = self.opts.exec.join(|| self.up(l), || self.up(r));
                combine(id, &hl?, &hr?, self.grid, self.opts.mode)?
            }
        };
        let leak = h.edge_leakage(self.grid);
        self.diag.lock().expect("diagnostics").push((node.level, h.log_scale, leak));
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn table_spec(n: usize) -> TridiagSpec {
        let mut b = vec![1.0; n];
        b[0] = 0.5;
        if n > 1 {
            b[1] = 2.0;
        }
        TridiagSpec::new(n, 4.0, 2.0, vec![-1.0; n], b).unwrap()
    }

    #[test]
    fn exponents_for_the_standard_matrix() {
        let s = table_spec(4);
        assert_eq!(s.alpha_interior(), 0.0);
        assert_eq!(s.alpha_boundary(), 1.0);
        assert_eq!(s.kappa(), 1.0);
        assert!(TridiagSpec::new(4, 3.0, 2.0, vec![-1.0; 4], vec![1.0; 4]).is_err());
        assert!(TridiagSpec::new(3, 4.0, 2.0, vec![-1.0; 3], vec![1.0; 3]).is_err());
    }

    #[test]
    fn interior_leaf_on_diagonal_is_interval_length() {
        let s = table_spec(4);
        let tree = PartitionTree::build(4).unwrap();
        let g = TGrid::new(16);
        let h = leaf_h(&s, &tree, 2, &g).unwrap();
        let v = h.value(&g, 16, 16) * h.log_scale.exp();
        assert!((v.re - 2.0).abs() < 1e-14 && v.im.abs() < 1e-15);
        let a = h.value(&g, 9, 20);
        let b = h.value(&g, 23, 12);
        assert!((a - b.conj()).norm() < 1e-15);
    }

    #[test]
    fn constant_children_give_constant_parent() {
        let g = TGrid::new(64);
        let n = 128;
        let ones = |shape| HNode {
            id: 0,
            m: 64,
            shape,
            values: vec![Complex::new(1.0, 0.0); if shape == HShape::Full { n * n } else { n }],
            log_scale: 0.0,
        };
        for mode in [CombineMode::Contraction, CombineMode::Tensor] {
            let p = combine(0, &ones(HShape::Full), &ones(HShape::Full), &g, mode).unwrap();
            let v = p.value(&g, 64, 80) * p.log_scale.exp();
            assert!((v - Complex::new(1.0, 0.0)).norm() < 1e-12, "{mode:?} {v}");
        }
    }

    #[test]
    fn opposite_modes_cancel() {
        let g = TGrid::new(64);
        let n = 128;
        let left: Vec<Complex> = (0..n).map(|j| Complex::from_polar(1.0, PI * g.t[j] / T_HALF_WIDTH)).collect();
        let right: Vec<Complex> = left.iter().map(|c| c.conj()).collect();
        let c1 = HNode { id: 1, m: 64, shape: HShape::RightVar, values: left, log_scale: 0.0 };
        let c2 = HNode { id: 2, m: 64, shape: HShape::LeftVar, values: right, log_scale: 0.0 };
        let p = combine(0, &c1, &c2, &g, CombineMode::Contraction).unwrap();
        let v = p.values[0] * p.log_scale.exp();
        assert!((v - Complex::new(1.0, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn tensor_and_contraction_agree() {
        let s = table_spec(8);
        let mut o = TridiagOptions::new(16);
        let a = compute_phi_tridiag(&s, &o).unwrap();
        o.mode = CombineMode::Tensor;
        let b = compute_phi_tridiag(&s, &o).unwrap();
        assert!(a.phi.rel_diff(&b.phi) < 1e-13);
    }

    #[test]
    fn single_variable_is_closed_form() {
        let s = TridiagSpec::new(1, 4.0, 2.0, vec![-1.0], vec![1.0]).unwrap();
        let r = compute_phi_tridiag(&s, &TridiagOptions::new(16)).unwrap();
        let exact = (PI / 8.0).sqrt() * 2.0 * crate::specfun::erf(2f64.sqrt());
        assert!((r.phi.value() - exact).abs() < 1e-14);
    }

    #[test]
    fn table_value_small_n() {
        let r = compute_phi_tridiag(&table_spec(4), &TridiagOptions::new(128)).unwrap();
        assert!((r.phi.value() / 2.289334215088779 - 1.0).abs() < 1e-12, "{}", r.phi.value());
    }
}
