//! Exponential covariance matrices `A_ij = exp(-|z_i - z_j|/β)`.
//!
//! Locations are divided by β, so the working kernel is `e^{-|z-y|}`. The
//! exponent `-½xᵀAx` equals `-xᵀGx` with `G = ½e^{-|z-y|}`, the Green's function
//! of `u - u'' = f` on the root interval. Splitting a node's kernel into its
//! two children leaves a rank-one coupling that one Gaussian variable `t`
//! removes; each child then sees the phase
//! `ψ(z) = w₁ cosh(z - c) + w₂ sinh(z - c)/(b - a)` and its function depends on
//! `(w₁, w₂)` only. A downward pass computes the maps from a parent's
//! `(w₁, w₂, t)` to each child's `(w₁, w₂)`; the upward pass samples each parent
//! on its box and fits a 2-D Fourier series.

use crate::error::{domain, Result, TmvnError};
use crate::exec::Execution;
use crate::fourier::{
    grid_points, series_from_samples, Backend, Evaluator1, Evaluator2, FourierSeries1, FourierSeries2, SampleGrid2,
};
use crate::greens::{basis, child_ranges, node_greens, transfer_identity_residual, w_transfer, WTransfer};
use crate::lowrank::{ClosedForm, FactorQuadrature, LeafSource, LowRankH};
use crate::report::{LevelDiagnostic, Timings};
use crate::scaled::Scaled;
use crate::specfun::filter;
use crate::tree::{NodeRole, PartitionTree, ZLocations};
use crate::tridiag::TGrid;
use crate::Complex;
use std::sync::Mutex;
use std::time::Instant;

#[derive(Debug, Clone, PartialEq)]
pub struct ExpcovSpec {
    pub n: usize,
    pub z: ZLocations,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl ExpcovSpec {
    pub fn new(z: ZLocations, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let n = z.z.len();
        if n == 0 || !n.is_power_of_two() {
            return domain(format!("N must be a power of two, got {n}"));
        }
        if a.len() != n || b.len() != n {
            return domain("bound vectors must have length N");
        }
        if let Some(k) = (0..n).find(|&k| !(a[k] < b[k])) {
            return domain(format!("bounds must satisfy a < b at variable {}", k + 1));
        }
        Ok(ExpcovSpec { n, z, a, b })
    }

    /// Dense `A`, row-major.
    pub fn dense(&self) -> Vec<f64> {
        let n = self.n;
        let (z, _) = self.z.scaled();
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                m[i * n + j] = (-(z[i] - z[j]).abs()).exp();
            }
        }
        m
    }

    /// Partition tree with geometry on the scaled locations.
    pub fn tree(&self) -> Result<PartitionTree> {
        let (z, bz) = self.z.scaled();
        let mut tree = PartitionTree::build(self.n)?;
        tree.assign_geometry(&z, bz)?;
        Ok(tree)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ExpcovOptions {
    pub m: usize,
    pub backend: Backend,
    pub tol: f64,
    /// Parent grid rows per work item.
    pub memory_block: usize,
    pub exec: Execution,
}

impl ExpcovOptions {
    pub fn new(m: usize) -> Self {
        ExpcovOptions { m, backend: Backend::Direct, tol: 1e-12, memory_block: 8, exec: Execution::default() }
    }

    pub fn with_backend(mut self, backend: Backend) -> Self {
        self.backend = backend;
        self
    }
}

/// Transfer numbers for every non-root node, indexed by node id.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeTransferTable {
    pub entries: Vec<Option<WTransfer>>,
}

impl NodeTransferTable {
    pub fn get(&self, id: usize) -> &WTransfer {
        self.entries[id].as_ref().expect("root has no transfer")
    }

    /// `[C₁, C₂]` per node (zeros for the root).
    pub fn ranges(&self) -> Vec<[f64; 2]> {
        self.entries.iter().map(|e| e.map_or([0.0, 0.0], |t| t.range)).collect()
    }

    pub fn max_range(&self) -> f64 {
        self.entries.iter().flatten().flat_map(|t| t.range).fold(0.0, f64::max)
    }

    /// Scales one coefficient of one node (negative controls).
    pub fn corrupt(&mut self, id: usize, coeff: usize, factor: f64) {
        if let Some(t) = self.entries[id].as_mut() {
            t.c[coeff] *= factor;
        }
    }
}

/// Root-to-leaf computation of the transfer coefficients and ranges.
pub fn downward_pass(tree: &PartitionTree) -> Result<NodeTransferTable> {
    let mut entries: Vec<Option<WTransfer>> = vec![None; tree.nodes.len()];
    for node in &tree.nodes {
        let Some((l, r)) = node.children else { continue };
        let (a, b) = node.ab();
        let c = node.split_point.expect("geometry assigned");
        let p = tree.node(l).basis_center.expect("geometry assigned");
        let q = tree.node(r).basis_center.expect("geometry assigned");
        let (lc, rc) = w_transfer(node.role, a, b, c, p, q)?;
        let parent = entries[node.id].map(|t| t.range);
        for (id, coeffs) in [(l, lc), (r, rc)] {
            let range = child_ranges(&coeffs, parent);
            if !(range[0] > 0.0 && range[1] > 0.0 && range[0].is_finite() && range[1].is_finite()) {
                return Err(TmvnError::Numeric { node: id, detail: format!("degenerate range {range:?}") });
            }
            entries[id] = Some(WTransfer { c: coeffs, range });
        }
    }
    Ok(NodeTransferTable { entries })
}

/// Largest phase-identity residual over all internal nodes for the stored coefficients.
pub fn audit_transfers(tree: &PartitionTree, table: &NodeTransferTable, samples: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    for node in &tree.nodes {
        let Some((l, r)) = node.children else { continue };
        let (a, b) = node.ab();
        let c = node.split_point.expect("geometry assigned");
        let p = tree.node(l).basis_center.expect("geometry assigned");
        let q = tree.node(r).basis_center.expect("geometry assigned");
        let res = transfer_identity_residual(node.role, (a, b, c), (p, q), &table.get(l).c, &table.get(r).c, samples)?;
        worst = worst.max(res);
    }
    Ok(worst)
}

/// Per-leaf constants: exponent `g` in `e^{-g x²}`, basis values at `z_k`, and the phase range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeafData {
    pub k: usize,
    pub g: f64,
    pub phi: [f64; 2],
    pub range: [f64; 2],
    /// Bound on `|w₁Φ₁ + w₂Φ₂|` over the trusted box.
    pub s_range: f64,
}

pub fn leaf_data(tree: &PartitionTree, table: &NodeTransferTable, z_scaled: &[f64], k: usize) -> Result<LeafData> {
    let leaf = tree.leaf_of(k);
    let (a, b) = leaf.ab();
    let zk = z_scaled[k];
    let g = node_greens(leaf.role, a, b).eval(zk, zk);
    if !(g > 0.0) {
        return Err(TmvnError::Numeric { node: leaf.id, detail: format!("leaf exponent {g} is not positive") });
    }
    let (f1, f2) = basis(zk, leaf.basis_center.expect("geometry assigned"), a, b);
    let range = table.get(leaf.id).range;
    let s_range = f1.abs() * range[0] + f2.abs() * range[1];
    Ok(LeafData { k, g, phi: [f1, f2], range, s_range })
}

/// 2-D filtered leaf function `∫ e^{-g x²} e^{2i(w₁Φ₁ + w₂Φ₂)x} dx` on the leaf's
/// `[-2C₁, 2C₁) × [-2C₂, 2C₂)` box, as a series.
pub fn leaf_h_expcov(spec: &ExpcovSpec, tree: &PartitionTree, table: &NodeTransferTable, k: usize, m: usize) -> Result<FourierSeries2> {
    let (z, _) = spec.z.scaled();
    let ld = leaf_data(tree, table, &z, k)?;
    let [c1, c2] = ld.range;
    let w1 = grid_points(m, 2.0 * c1);
    let w2 = grid_points(m, 2.0 * c2);
    let mut values = Vec::with_capacity(4 * m * m);
    for &u in &w1 {
        for &v in &w2 {
            let s = u * ld.phi[0] + v * ld.phi[1];
            let h = ClosedForm.integral(k, spec.a[k], spec.b[k], ld.g, -s)?;
            values.push(h * (filter(u, c1) * filter(v, c2)));
        }
    }
    series_from_samples(&SampleGrid2::new(m, values)?, [2.0 * c1, 2.0 * c2])
}

/// A node function times `e^{log_scale}`.
#[derive(Debug, Clone)]
pub enum WFunction {
    /// Leaf: a function of `s = w₁Φ₁ + w₂Φ₂` only.
    Leaf { phi: [f64; 2], series: FourierSeries1 },
    Inner(FourierSeries2),
}

#[derive(Debug, Clone)]
pub struct WNode {
    pub id: usize,
    pub f: WFunction,
    pub log_scale: f64,
}

enum WEval<'a> {
    Leaf([f64; 2], Evaluator1<'a>),
    Inner(Evaluator2<'a>),
}

impl<'a> WEval<'a> {
    fn new(node: &'a WNode, backend: Backend, tol: f64) -> Self {
        match &node.f {
            WFunction::Leaf { phi, series } => WEval::Leaf(*phi, Evaluator1::new(series, backend, tol)),
            WFunction::Inner(s) => WEval::Inner(Evaluator2::new(s, backend, tol)),
        }
    }

    fn eval_batch(&self, pts: &[(f64, f64)], out: &mut [Complex]) {
        match self {
            WEval::Leaf(phi, ev) => {
                for (o, &(u, v)) in out.iter_mut().zip(pts) {
                    *o = ev.eval(phi[0] * u + phi[1] * v);
                }
            }
            WEval::Inner(ev) => ev.eval_batch(pts, out),
        }
    }
}

fn check_finite(id: usize, values: &[Complex]) -> Result<f64> {
    let top = values.iter().fold(0.0f64, |s, v| s.max(v.norm()));
    if !top.is_finite() || values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(TmvnError::Numeric { node: id, detail: "non-finite node values".into() });
    }
    if top == 0.0 {
        return Err(TmvnError::Numeric { node: id, detail: "node function vanished".into() });
    }
    Ok(top)
}

/// Filtered leaf as a 1-D series in `s` on `[-2S, 2S)`; returns the node and its edge leakage.
fn leaf_node(
    id: usize,
    ld: &LeafData,
    bounds: (f64, f64),
    m: usize,
    src: &dyn LeafSource,
) -> Result<(WNode, f64)> {
    let s_half = ld.s_range;
    let mut values = grid_points(m, 2.0 * s_half)
        .into_iter()
        .map(|s| Ok(src.integral(ld.k, bounds.0, bounds.1, ld.g, -s)? * filter(s, s_half)))
        .collect::<Result<Vec<_>>>()?;
    let top = check_finite(id, &values)?;
    for v in &mut values {
        *v /= top;
    }
    let leak = values[0].norm();
    let series = FourierSeries1::from_samples(&values, 2.0 * s_half)?;
    Ok((WNode { id, f: WFunction::Leaf { phi: ld.phi, series }, log_scale: top.ln() }, leak))
}

/// Parent function on `[-2C₁, 2C₁) × [-2C₂, 2C₂)` from its children and their
/// transfer coefficients: `h(w) = Σ_j q_j F(t_j) h_L(T_L(w, t_j)) h_R(T_R(w, t_j))`,
/// filtered in `w`. Returns the node and its edge leakage.
#[allow(clippy::too_many_arguments)]
pub fn upward_combine_expcov(
    id: usize,
    range: [f64; 2],
    left: &WNode,
    left_c: &[f64; 6],
    right: &WNode,
    right_c: &[f64; 6],
    tq: &TGrid,
    opts: &ExpcovOptions,
) -> Result<(WNode, f64)> {
    let m = opts.m;
    let n = 2 * m;
    let w1 = grid_points(m, 2.0 * range[0]);
    let w2 = grid_points(m, 2.0 * range[1]);
    let f1: Vec<f64> = w1.iter().map(|&u| filter(u, range[0])).collect();
    let f2: Vec<f64> = w2.iter().map(|&v| filter(v, range[1])).collect();
    let ev_l = WEval::new(left, opts.backend, opts.tol);
    let ev_r = WEval::new(right, opts.backend, opts.tol);
    let keep = &tq.keep;
    let kk = keep.len();
    let block = opts.memory_block.max(1);
    // rows 0..=M directly; the rest by h(-w) = conj h(w)
    let rows = m + 1;
    let blocks = rows.div_ceil(block);
    let parts = opts.exec.map(blocks, |bi| {
        let r0 = bi * block;
        let r1 = (r0 + block).min(rows);
        let mut pl = vec![(0.0, 0.0); kk];
        let mut pr = vec![(0.0, 0.0); kk];
        let mut vl = vec![Complex::new(0.0, 0.0); kk];
        let mut vr = vec![Complex::new(0.0, 0.0); kk];
        let mut out = vec![Complex::new(0.0, 0.0); (r1 - r0) * n];
        for i in r0..r1 {
            for j in 0..n {
                let f = f1[i] * f2[j];
                if f < 1e-25 {
                    continue;
                }
                let (u, v) = (w1[i], w2[j]);
                let (bl, br) = (
                    [left_c[0] * u + left_c[1] * v, left_c[3] * u + left_c[4] * v],
                    [right_c[0] * u + right_c[1] * v, right_c[3] * u + right_c[4] * v],
                );
                for (x, &jt) in keep.iter().enumerate() {
                    let t = tq.t[jt];
                    pl[x] = (bl[0] + left_c[2] * t, bl[1] + left_c[5] * t);
                    pr[x] = (br[0] + right_c[2] * t, br[1] + right_c[5] * t);
                }
                ev_l.eval_batch(&pl, &mut vl);
                ev_r.eval_batch(&pr, &mut vr);
                let mut acc = Complex::new(0.0, 0.0);
                for (x, &jt) in keep.iter().enumerate() {
                    acc += vl[x] * vr[x] * tq.weight[jt];
                }
                out[(i - r0) * n + j] = acc * f;
            }
        }
        out
    });
    let mut values = vec![Complex::new(0.0, 0.0); n * n];
    let mut offset = 0;
    for part in parts {
        values[offset..offset + part.len()].copy_from_slice(&part);
        offset += part.len();
    }
    for i in rows..n {
        for j in 0..n {
            values[i * n + j] = values[(n - i) * n + (n - j) % n].conj();
        }
    }
    let top = check_finite(id, &values)?;
    for v in &mut values {
        *v /= top;
    }
    let mut leak = 0.0f64;
    for j in 0..n {
        leak = leak.max(values[j].norm()).max(values[j * n].norm());
    }
    let series = series_from_samples(&SampleGrid2::new(m, values)?, [2.0 * range[0], 2.0 * range[1]])?;
    let node = WNode { id, f: WFunction::Inner(series), log_scale: top.ln() + left.log_scale + right.log_scale };
    Ok((node, leak))
}

/// Root value `Σ_j q_j F(t_j) h_L(T_L(t_j)) h_R(T_R(t_j))` times `e^{log_scale}`.
fn root_value(left: &WNode, lc: &[f64; 6], right: &WNode, rc: &[f64; 6], tq: &TGrid, opts: &ExpcovOptions) -> (Complex, f64) {
    let ev_l = WEval::new(left, opts.backend, opts.tol);
    let ev_r = WEval::new(right, opts.backend, opts.tol);
    let pl: Vec<(f64, f64)> = tq.keep.iter().map(|&j| (lc[2] * tq.t[j], lc[5] * tq.t[j])).collect();
    let pr: Vec<(f64, f64)> = tq.keep.iter().map(|&j| (rc[2] * tq.t[j], rc[5] * tq.t[j])).collect();
    let mut vl = vec![Complex::new(0.0, 0.0); pl.len()];
    let mut vr = vec![Complex::new(0.0, 0.0); pr.len()];
    ev_l.eval_batch(&pl, &mut vl);
    ev_r.eval_batch(&pr, &mut vr);
    let v: Complex = tq.keep.iter().enumerate().map(|(x, &j)| vl[x] * vr[x] * tq.weight[j]).sum();
    (v, left.log_scale + right.log_scale)
}

/// Result of one exponential-case run.
#[derive(Debug, Clone)]
pub struct ExpcovSolution {
    pub phi: Scaled,
    pub imag_ratio: f64,
    pub timings: Timings,
    pub levels: Vec<LevelDiagnostic>,
    pub ranges: Vec<[f64; 2]>,
    pub max_range: f64,
    /// `(1 + ε)^N - 1` with ε the nonuniform evaluation tolerance.
    pub condition_estimate: f64,
}

/// Largest tolerated `|Im φ| / |Re φ|`.
pub const IMAG_TOLERANCE: f64 = 1e-9;

pub fn condition_estimate(n: usize, eps: f64) -> f64 {
    (n as f64 * eps.ln_1p()).exp_m1()
}

pub fn compute_phi_expcov(spec: &ExpcovSpec, opts: &ExpcovOptions) -> Result<ExpcovSolution> {
    run(spec, opts, &ClosedForm, None)
}

/// Same pipeline with a precomputed (possibly altered) transfer table.
pub fn compute_phi_expcov_with_table(spec: &ExpcovSpec, opts: &ExpcovOptions, table: &NodeTransferTable) -> Result<ExpcovSolution> {
    run(spec, opts, &ClosedForm, Some(table))
}

/// `Σ_p w_p φ_p` with leaf integrals of the factors by quadrature.
pub fn compute_phi_expcov_lowrank_h(spec: &ExpcovSpec, h: &LowRankH, opts: &ExpcovOptions) -> Result<ExpcovSolution> {
    if h.n != spec.n {
        return domain("H model dimension does not match N");
    }
    let mut total: Option<ExpcovSolution> = None;
    for p in 0..h.terms.len() {
        let mut sol = run(spec, opts, &FactorQuadrature { h, term: p }, None)?;
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

fn run(spec: &ExpcovSpec, opts: &ExpcovOptions, src: &dyn LeafSource, table: Option<&NodeTransferTable>) -> Result<ExpcovSolution> {
    let start = Instant::now();
    if opts.m < 2 {
        return domain("M must be at least 2");
    }
    let eps = condition_estimate(spec.n, opts.tol);
    if spec.n == 1 {
        // A = [1]
        let v = src.integral(0, spec.a[0], spec.b[0], 0.5, 0.0)?;
        let t = start.elapsed().as_secs_f64();
        return Ok(ExpcovSolution {
            phi: Scaled::from_f64(v.re),
            imag_ratio: (v.im / v.re).abs(),
            timings: Timings { leaves: t, total: t, ..Timings::default() },
            levels: Vec::new(),
            ranges: vec![[0.0, 0.0]],
            max_range: 0.0,
            condition_estimate: eps,
        });
    }
    let tree = spec.tree()?;
    let owned;
    let table = match table {
        Some(t) => t,
        None => {
            owned = downward_pass(&tree)?;
            &owned
        }
    };
    let downward = start.elapsed().as_secs_f64();
    let (z, _) = spec.z.scaled();
    let ctx = Ctx {
        spec,
        tree: &tree,
        table,
        z: &z,
        tq: TGrid::new(opts.m),
        opts,
        src,
        diag: Mutex::new(Vec::new()),
        leaf_secs: Mutex::new(0.0),
    };
    let (l, r) = tree.root().children.expect("N ≥ 2");
    let (hl, hr) = opts.exec.join(|| ctx.up(l), || ctx.up(r));
    let (hl, hr) = (hl?, hr?);
    let (v, log_scale) = root_value(&hl, &table.get(l).c, &hr, &table.get(r).c, &ctx.tq, opts);
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
    let leaves = *ctx.leaf_secs.lock().expect("timer");
    let levels = LevelDiagnostic::aggregate(ctx.diag.into_inner().expect("diagnostics"));
    Ok(ExpcovSolution {
        phi: Scaled::new(v.re, log_scale),
        imag_ratio,
        timings: Timings { downward, leaves, upward: total - downward - leaves, total },
        levels,
        ranges: table.ranges(),
        max_range: table.max_range(),
        condition_estimate: eps,
    })
}

struct Ctx<'a> {
    spec: &'a ExpcovSpec,
    tree: &'a PartitionTree,
    table: &'a NodeTransferTable,
    z: &'a [f64],
    tq: TGrid,
    opts: &'a ExpcovOptions,
    src: &'a dyn LeafSource,
    diag: Mutex<Vec<(usize, f64, f64)>>,
    leaf_secs: Mutex<f64>,
}

impl Ctx<'_> {
    fn up(&self, id: usize) -> Result<WNode> {
        let node = self.tree.node(id);
        let (h, leak) = match node.children {
            None => {
                let t0 = Instant::now();
                let k = node.lo;
                let ld = leaf_data(self.tree, self.table, self.z, k)?;
                let out = leaf_node(id, &ld, (self.spec.a[k], self.spec.b[k]), self.opts.m, self.src)?;
                *self.leaf_secs.lock().expect("timer") += t0.elapsed().as_secs_f64();
                out
            }
            Some((l, r)) => {
                let (hl, hr) = self.opts.exec.join(|| self.up(l), || self.up(r));
                upward_combine_expcov(
                    id,
                    self.table.get(id).range,
                    &hl?,
                    &self.table.get(l).c,
                    &hr?,
                    &self.table.get(r).c,
                    &self.tq,
                    self.opts,
                )?
            }
        };
        debug_assert!(node.role != NodeRole::Root);
        self.diag.lock().expect("diagnostics").push((node.level, h.log_scale, leak));
        Ok(h)
    }
}
