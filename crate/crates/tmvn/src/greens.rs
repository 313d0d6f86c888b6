//! Green's functions of `u - u'' = f` on nested intervals and the linear maps
//! that carry a parent's effective variables `(w₁, w₂)` and the new coupling
//! variable `t` to each child.
//!
//! A node on `[a, b]` with basis center `c` represents its phase as
//! `ψ(z) = w₁·cosh(z - c) + w₂·sinh(z - c)/(b - a)`.

use crate::error::{domain, Result};
use crate::tree::{NodeRole, PartitionTree};
use nalgebra::DMatrix;
use serde::Serialize;
use std::f64::consts::SQRT_2;

/// Range of the coupling variable that the filters treat as trusted.
pub const T_RANGE: f64 = 7.0;

/// One of `e^{z-s}`, `e^{s-z}`, `sinh(z-s)`, `sinh(s-z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum GFn {
    ExpUp(f64),
    ExpDown(f64),
    SinhUp(f64),
    SinhDown(f64),
}

impl GFn {
    pub fn eval(&self, z: f64) -> f64 {
        match *self {
            GFn::ExpUp(s) => (z - s).exp(),
            GFn::ExpDown(s) => (s - z).exp(),
            GFn::SinhUp(s) => (z - s).sinh(),
            GFn::SinhDown(s) => (s - z).sinh(),
        }
    }

    fn negated_sinh(self) -> GFn {
        match self {
            GFn::SinhUp(s) => GFn::SinhDown(s),
            GFn::SinhDown(s) => GFn::SinhUp(s),
            other => other,
        }
    }
}

/// `G(z, y) = coef · g_l(min(z,y)) · g_r(max(z,y))` on `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GreensSpec {
    pub role: NodeRole,
    pub a: f64,
    pub b: f64,
    pub g_l: GFn,
    pub g_r: GFn,
    pub coef: f64,
}

impl GreensSpec {
    pub fn eval(&self, z: f64, y: f64) -> f64 {
        let (lo, hi) = if z <= y { (z, y) } else { (y, z) };
        self.coef * self.g_l.eval(lo) * self.g_r.eval(hi)
    }
}

fn check_order(a: f64, b: f64, c: f64) -> Result<()> {
    if !(a < c && c < b) || !a.is_finite() || !b.is_finite() {
        return domain(format!("need a < c < b, got a={a}, c={c}, b={b}"));
    }
    Ok(())
}

fn parent_spec(role: NodeRole, a: f64, b: f64) -> GreensSpec {
    let (g_l, g_r, coef) = match role {
        NodeRole::Root => (GFn::ExpUp(b), GFn::ExpDown(b), 0.5),
        NodeRole::LeftBoundary => (GFn::ExpUp(b), GFn::SinhDown(b), 1.0),
        NodeRole::RightBoundary => (GFn::SinhUp(a), GFn::ExpDown(a), 1.0),
        NodeRole::Interior => (GFn::SinhUp(a), GFn::SinhDown(b), 1.0 / (b - a).sinh()),
    };
    GreensSpec { role, a, b, g_l, g_r, coef }
}

fn child_role(parent: NodeRole, left: bool) -> NodeRole {
    match (parent, left) {
        (NodeRole::Root, true) | (NodeRole::LeftBoundary, true) => NodeRole::LeftBoundary,
        (NodeRole::Root, false) | (NodeRole::RightBoundary, false) => NodeRole::RightBoundary,
        _ => NodeRole::Interior,
    }
}

/// Kernel of a node with the given role on `[a, b]`.
pub fn node_greens(role: NodeRole, a: f64, b: f64) -> GreensSpec {
    parent_spec(role, a, b)
}

/// Parent and child kernels for a node split at `c`.
pub fn greens_catalog(role: NodeRole, a: f64, b: f64, c: f64) -> Result<(GreensSpec, GreensSpec, GreensSpec)> {
    check_order(a, b, c)?;
    let parent = parent_spec(role, a, b);
    let left = parent_spec(child_role(role, true), a, c);
    let right = parent_spec(child_role(role, false), c, b);
    Ok((parent, left, right))
}

/// The eight numbers attached to a non-root node: `w₁ = c₁w₁ᵖ + c₂w₂ᵖ + c₃t`,
/// `w₂ = c₄w₁ᵖ + c₅w₂ᵖ + c₆t`, and bounds `|w₁| ≤ C₁`, `|w₂| ≤ C₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WTransfer {
    pub c: [f64; 6],
    pub range: [f64; 2],
}

/// Coefficient vectors `[c₁..c₆]` for the left and right child.
pub fn w_transfer(role: NodeRole, a: f64, b: f64, c: f64, p: f64, q: f64) -> Result<([f64; 6], [f64; 6])> {
    check_order(a, b, c)?;
    if !(a < p && p < c && c < q && q < b) {
        return domain(format!("child centers must satisfy a < p < c < q < b, got p={p}, q={q}"));
    }
    let (l3, l6, r3, r6) = t_terms(role, a, b, c, p, q);
    let mut left = [0.0; 6];
    let mut right = [0.0; 6];
    if role != NodeRole::Root {
        let (cp, sp) = ((c - p).cosh(), (c - p).sinh());
        left[0] = cp;
        left[1] = sp / (a - b);
        left[3] = (a - c) * sp;
        left[4] = (a - c) * cp / (a - b);
        let (cq, sq) = ((c - q).cosh(), (c - q).sinh());
        right[0] = cq;
        right[1] = sq / (a - b);
        right[3] = (b - c) * (b - a) * sq / (a - b);
        right[4] = -(b - c) * cq / (a - b);
    }
    left[2] = l3;
    left[5] = l6;
    right[2] = r3;
    right[5] = r6;
    Ok((left, right))
}

/// `(c₃, c₆)` for the left child then the right child.
fn t_terms(role: NodeRole, a: f64, b: f64, c: f64, p: f64, q: f64) -> (f64, f64, f64, f64) {
    match role {
        NodeRole::Root => {
            let l = (p - c).exp() / SQRT_2;
            let r = (c - q).exp() / SQRT_2;
            (l, -(a - c) * l, r, -(b - c) * r)
        }
        NodeRole::LeftBoundary => {
            // e^p √(e^{-2c} - e^{-2b}) / √2 and √(coth(b-c) - 1)
            let l = (p - c).exp() * (-(2.0 * (c - b)).exp_m1()).sqrt() / SQRT_2;
            let k = (2.0 / (2.0 * (b - c)).exp_m1()).sqrt();
            (l, -(a - c) * l, k * (b - q).sinh(), (c - b) * k * (b - q).cosh())
        }
        NodeRole::RightBoundary => {
            // √(-coth(a-c) - 1) and e^{-q} √(e^{2c} - e^{2a}) / √2
            let k = (2.0 / (2.0 * (c - a)).exp_m1()).sqrt();
            let r = (c - q).exp() * (-(2.0 * (a - c)).exp_m1()).sqrt() / SQRT_2;
            (k * (p - a).sinh(), (c - a) * k * (a - p).cosh(), r, (c - b) * r)
        }
        NodeRole::Interior => {
            let kl = ((b - c).sinh() / ((b - a).sinh() * (c - a).sinh())).sqrt();
            let kr = ((c - a).sinh() / ((b - a).sinh() * (b - c).sinh())).sqrt();
            (
                (p - a).sinh() * kl,
                (c - a) * (a - p).cosh() * kl,
                (b - q).sinh() * kr,
                (c - b) * (b - q).cosh() * kr,
            )
        }
    }
}

/// Interval-arithmetic bounds on a child's effective variables.
pub fn child_ranges(coeffs: &[f64; 6], parent: Option<[f64; 2]>) -> [f64; 2] {
    let [p1, p2] = parent.unwrap_or([0.0, 0.0]);
    [
        coeffs[0].abs() * p1 + coeffs[1].abs() * p2 + coeffs[2].abs() * T_RANGE,
        coeffs[3].abs() * p1 + coeffs[4].abs() * p2 + coeffs[5].abs() * T_RANGE,
    ]
}

/// Basis `(cosh(z - c), sinh(z - c)/(b - a))` of a node.
pub fn basis(z: f64, center: f64, a: f64, b: f64) -> (f64, f64) {
    ((z - center).cosh(), (z - center).sinh() / (b - a))
}

/// γ̃² such that `G_parent - G_child = γ̃² g(z) g(y)` on the child interval,
/// recovered from one interior pair of points.
pub fn gamma_squared(parent: &GreensSpec, child: &GreensSpec, left: bool) -> f64 {
    let (z, y) = (
        child.a + 0.3 * (child.b - child.a),
        child.a + 0.8 * (child.b - child.a),
    );
    let g = if left { parent.g_l } else { parent.g_r };
    (parent.eval(z, y) - child.eval(z, y)) / (g.eval(z) * g.eval(y))
}

/// Largest deviation of `G_parent - G_child` from a rank-one `γ̃² g ⊗ g` on
/// an `k × k` grid, relative to the largest kernel value.
pub fn rank_one_residual(parent: &GreensSpec, child: &GreensSpec, left: bool, k: usize) -> f64 {
    let gamma2 = gamma_squared(parent, child, left);
    let g = if left { parent.g_l } else { parent.g_r };
    let pts: Vec<f64> = (0..k)
        .map(|i| child.a + (i as f64 + 0.5) / k as f64 * (child.b - child.a))
        .collect();
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for &z in &pts {
        for &y in &pts {
            let lhs = parent.eval(z, y) - child.eval(z, y);
            let rhs = gamma2 * g.eval(z) * g.eval(y);
            worst = worst.max((lhs - rhs).abs());
            scale = scale.max(parent.eval(z, y).abs());
        }
    }
    worst / scale
}

/// Residual of the phase identity
/// `w₁Φ₁ᶜ + w₂Φ₂ᶜ = w₁ᵖΦ₁ᵖ + w₂ᵖΦ₂ᵖ + t·γ̃·g` on `samples` points of each child
/// interval, for the given transfer coefficients. Relative to the largest term.
pub fn transfer_identity_residual(
    role: NodeRole,
    (a, b, c): (f64, f64, f64),
    (p, q): (f64, f64),
    left: &[f64; 6],
    right: &[f64; 6],
    samples: usize,
) -> Result<f64> {
    let (parent, lspec, rspec) = greens_catalog(role, a, b, c)?;
    let mut worst = 0.0f64;
    for (is_left, coeffs, spec, center) in [(true, left, lspec, p), (false, right, rspec, q)] {
        let gamma = gamma_squared(&parent, &spec, is_left).sqrt();
        let g = if is_left { parent.g_l } else { parent.g_r };
        for i in 0..samples {
            let z = spec.a + (i as f64 + 0.5) / samples as f64 * (spec.b - spec.a);
            let (f1, f2) = basis(z, center, spec.a, spec.b);
            let (p1, p2) = basis(z, c, a, b);
            let has_parent = role != NodeRole::Root;
            // unit inputs: w₁ᵖ, w₂ᵖ, t
            let cases: [(f64, f64); 3] = [
                (coeffs[0] * f1 + coeffs[3] * f2, if has_parent { p1 } else { 0.0 }),
                (coeffs[1] * f1 + coeffs[4] * f2, if has_parent { p2 } else { 0.0 }),
                (coeffs[2] * f1 + coeffs[5] * f2, gamma * g.eval(z)),
            ];
            for (lhs, rhs) in cases {
                let scale = lhs.abs().max(rhs.abs()).max(1e-300);
                let diff = (lhs - rhs).abs();
                worst = worst.max(if scale < 1e-12 { diff } else { diff / scale });
            }
        }
    }
    Ok(worst)
}

/// Minimum eigenvalue of every node matrix `2·G(z_i, z_j)`.
#[derive(Debug, Clone, Serialize)]
pub struct SpdReport {
    pub min_eigenvalues: Vec<f64>,
    pub violations: Vec<usize>,
}

impl SpdReport {
    pub fn all_positive(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.min_eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Kernel assigned to a node; the default is the catalog.
pub type KernelFn<'a> = &'a dyn Fn(NodeRole, f64, f64) -> GreensSpec;

/// Assembles each node's kernel on its points and checks positivity.
pub fn verify_spd(tree: &PartitionTree, z: &[f64]) -> SpdReport {
    verify_spd_with(tree, z, &node_greens)
}

pub fn verify_spd_with(tree: &PartitionTree, z: &[f64], kernel: KernelFn<'_>) -> SpdReport {
    let mut mins = Vec::with_capacity(tree.nodes.len());
    let mut violations = Vec::new();
    for node in &tree.nodes {
        let (a, b) = node.ab();
        let spec = kernel(node.role, a, b);
        let pts = &z[node.lo..=node.hi];
        let k = pts.len();
        let m = DMatrix::from_fn(k, k, |i, j| 2.0 * spec.eval(pts[i], pts[j]));
        let min = if k == 1 {
            m[(0, 0)]
        } else {
            m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
        };
        if !(min > 0.0) {
            violations.push(node.id);
        }
        mins.push(min);
    }
    SpdReport { min_eigenvalues: mins, violations }
}

/// A deliberately wrong kernel (sign-flipped right factor) for negative controls.
pub fn corrupted_greens(role: NodeRole, a: f64, b: f64) -> GreensSpec {
    let mut spec = node_greens(role, a, b);
    if role != NodeRole::Root {
        spec.g_r = spec.g_r.negated_sinh();
        if matches!(spec.g_r, GFn::ExpDown(_) | GFn::ExpUp(_)) {
            spec.coef = -spec.coef;
        }
    }
    spec
}
