//! Gauss–Legendre rules and panel quadrature for smooth, possibly oscillatory
//! one-dimensional integrands.

use crate::Complex;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Nodes and weights of an n-point Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Newton iteration on the Legendre recurrence.
    pub fn compute(n: usize) -> Self {
        assert!(n >= 1, "rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let half = n.div_ceil(2);
        for i in 0..half {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let p = if n == 1 { x } else { p1 };
                let pm1 = if n == 1 { 1.0 } else { p0 };
                dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            if n == 1 {
                x = 0.0;
                dp = 1.0;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    /// Cached rule.
    pub fn get(n: usize) -> Arc<GaussLegendre> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut map = cache.lock().expect("quadrature cache poisoned");
        map.entry(n).or_insert_with(|| Arc::new(GaussLegendre::compute(n))).clone()
    }

    /// Nodes and weights mapped to [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (mid + half * x, half * w))
    }
}

const PANEL_ORDER: usize = 20;

/// Splits [a, b] at the given breakpoints (those strictly inside), then into
/// panels no longer than `max_len`.
pub fn panels(a: f64, b: f64, breakpoints: &[f64], max_len: f64) -> Vec<(f64, f64)> {
    let mut cuts: Vec<f64> = breakpoints.iter().copied().filter(|&c| c > a && c < b).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut ends = vec![a];
    ends.extend(cuts);
    ends.push(b);
    let mut out = Vec::new();
    for pair in ends.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        let pieces = ((hi - lo) / max_len).ceil().max(1.0) as usize;
        let h = (hi - lo) / pieces as f64;
        for k in 0..pieces {
            let p0 = lo + k as f64 * h;
            let p1 = if k + 1 == pieces { hi } else { p0 + h };
            out.push((p0, p1));
        }
    }
    out
}

/// `∫_a^b f(x) e^{-2ixt} dx` for smooth `f` (smooth between breakpoints).
pub fn oscillatory_integral<F: Fn(f64) -> f64>(
    a: f64,
    b: f64,
    t: f64,
    breakpoints: &[f64],
    f: F,
) -> Complex {
    let max_len = (4.0 / (2.0 * t.abs()).max(1e-300)).min(0.5);
    let rule = GaussLegendre::get(PANEL_ORDER);
    let mut acc = Complex::new(0.0, 0.0);
    for (lo, hi) in panels(a, b, breakpoints, max_len) {
        for (x, w) in rule.mapped(lo, hi) {
            acc += Complex::from_polar(w * f(x), -2.0 * x * t);
        }
    }
    acc
}

/// Adaptive bisection comparing 15- and 30-point Gauss–Legendre per panel.
pub fn adaptive<F: Fn(f64) -> Complex>(f: &F, a: f64, b: f64, abs_tol: f64) -> Complex {
    fn rec<F: Fn(f64) -> Complex>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> Complex {
        let lo = GaussLegendre::get(15);
        let hi = GaussLegendre::get(30);
        let q1: Complex = lo.mapped(a, b).map(|(x, w)| f(x) * w).sum();
        let q2: Complex = hi.mapped(a, b).map(|(x, w)| f(x) * w).sum();
        if (q1 - q2).norm() <= tol || depth >= 40 {
            return q2;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, 0.5 * tol, depth + 1) + rec(f, m, b, 0.5 * tol, depth + 1)
    }
    rec(f, a, b, abs_tol, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_integrates_polynomials() {
        for n in [1, 2, 5, 20, 64] {
            let g = GaussLegendre::compute(n);
            let s: f64 = g.weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-14);
            let deg = 2 * n - 1;
            let q: f64 = g.nodes.iter().zip(&g.weights).map(|(x, w)| w * x.powi(deg as i32 - 1)).sum();
            let exact = if (deg - 1) % 2 == 0 { 2.0 / deg as f64 } else { 0.0 };
            assert!((q - exact).abs() < 1e-13, "n={n}");
        }
    }

    #[test]
    fn panels_respect_breakpoints() {
        let p = panels(-1.0, 2.0, &[0.25, 5.0, -3.0], 0.4);
        assert_eq!(p.first().unwrap().0, -1.0);
        assert_eq!(p.last().unwrap().1, 2.0);
        assert!(p.iter().any(|&(lo, _)| lo == 0.25));
        assert!(p.iter().all(|&(lo, hi)| hi - lo <= 0.4 + 1e-15));
    }

    #[test]
    fn oscillatory_matches_closed_form() {
        let t = 7.3;
        let v = oscillatory_integral(-1.0, 0.7, t, &[], |_| 1.0);
        let exact = Complex::new(0.0, 0.5 / t)
            * (Complex::from_polar(1.0, -1.4 * t) - Complex::from_polar(1.0, 2.0 * t));
        assert!((v - exact).norm() < 1e-15);
    }
}
