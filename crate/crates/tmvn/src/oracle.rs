//! Reference integrators for `∫_a^b H(x) e^{-xᵀAx/2} dx`: tensor Gauss–Legendre
//! for small `n`, plain Monte Carlo otherwise.

use crate::error::{domain, Result, TmvnError};
use crate::exec::{pairwise_sum, Execution};
use crate::lowrank::LowRankH;
use crate::quadrature::{panels, GaussLegendre};
use crate::spec::{HModel, Problem};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const QUAD_COST_CAP: u64 = 1_000_000_000;
pub const QUAD_MAX_DIM: usize = 6;
pub const MC_MIN_SAMPLES: u64 = 10_000;
const MC_CHUNK: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMethod {
    Quadrature,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleEstimate {
    pub value: f64,
    pub error_bound: f64,
    pub method: OracleMethod,
    /// Integrand evaluations.
    pub cost: u64,
}

impl OracleEstimate {
    /// `|x - value| <= error_bound + rel * |value|`.
    pub fn covers(&self, x: f64, rel: f64) -> bool {
        (x - self.value).abs() <= self.error_bound + rel * self.value.abs()
    }
}

/// Explicit `n×n` row-major matrix of the problem, checked to be SPD.
pub fn build_dense_matrix(problem: &Problem) -> Result<Vec<f64>> {
    let (n, m) = match problem {
        Problem::Tridiagonal(s) => (s.n, s.dense()),
        Problem::Expcov(s) => (s.n, s.dense()),
    };
    let min = min_eigenvalue(&m, n);
    if !(min > 0.0) {
        return Err(TmvnError::Numeric { node: 0, detail: format!("matrix is not SPD (min eigenvalue {min:e})") });
    }
    Ok(m)
}

pub fn min_eigenvalue(m: &[f64], n: usize) -> f64 {
    let mat = DMatrix::from_row_slice(n, n, m);
    SymmetricEigen::new(mat).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Separable view of `H`: a weighted sum of per-variable factors.
struct Separable {
    weights: Vec<f64>,
    lowrank: Option<LowRankH>,
}

impl Separable {
    fn new(h: &HModel, n: usize) -> Result<Self> {
        match h {
            HModel::Constant(c) => Ok(Separable { weights: vec![*c], lowrank: None }),
            HModel::LowRank(lr) => {
                if lr.n != n {
                    return domain(format!("H has {} variables, matrix has {n}", lr.n));
                }
                Ok(Separable { weights: lr.terms.iter().map(|t| t.weight).collect(), lowrank: Some(lr.clone()) })
            }
        }
    }

    fn terms(&self) -> usize {
        self.weights.len()
    }

    fn factor(&self, p: usize, k: usize, x: f64) -> f64 {
        self.lowrank.as_ref().map_or(1.0, |lr| lr.factor(p, k).eval(x))
    }

    fn breakpoints(&self, k: usize) -> Vec<f64> {
        self.lowrank.as_ref().map_or_else(Vec::new, |lr| lr.breakpoints(k))
    }

    fn eval(&self, x: &[f64]) -> f64 {
        match &self.lowrank {
            None => self.weights[0],
            Some(lr) => lr.eval(x),
        }
    }
}

fn check_box(n: usize, m: &[f64], a: &[f64], b: &[f64]) -> Result<()> {
    if n == 0 || m.len() != n * n || a.len() != n || b.len() != n {
        return domain("matrix and bounds must agree in dimension");
    }
    if a.iter().zip(b).any(|(lo, hi)| !(lo < hi) || !lo.is_finite() || !hi.is_finite()) {
        return domain("bounds must be finite with a < b");
    }
    Ok(())
}

/// Per-dimension nodes and weights, one `p`-point rule per smooth panel.
fn axis_rule(a: f64, b: f64, breaks: &[f64], p: usize) -> (Vec<f64>, Vec<f64>) {
    let rule = GaussLegendre::get(p);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for (lo, hi) in panels(a, b, breaks, f64::INFINITY) {
        for (x, w) in rule.mapped(lo, hi) {
            nodes.push(x);
            weights.push(w);
        }
    }
    (nodes, weights)
}

struct Grid {
    n: usize,
    nodes: Vec<Vec<f64>>,
    weights: Vec<Vec<f64>>,
    /// `factors[k][p * len_k + i]`.
    factors: Vec<Vec<f64>>,
}

impl Grid {
    fn points(&self) -> u64 {
        self.nodes.iter().map(|v| v.len() as u64).product()
    }
}

fn build_grid(sep: &Separable, n: usize, a: &[f64], b: &[f64], p: usize) -> Grid {
    let mut g = Grid { n, nodes: Vec::new(), weights: Vec::new(), factors: Vec::new() };
    for k in 0..n {
        let (x, w) = axis_rule(a[k], b[k], &sep.breakpoints(k), p);
        let f = (0..sep.terms()).flat_map(|t| x.iter().map(move |&xi| (t, xi))).map(|(t, xi)| sep.factor(t, k, xi)).collect();
        g.nodes.push(x);
        g.weights.push(w);
        g.factors.push(f);
    }
    g
}

/// Depth-first sweep carrying the partial quadratic form and per-term products.
struct Sweep<'a> {
    grid: &'a Grid,
    m: &'a [f64],
    term_weights: &'a [f64],
}

impl Sweep<'_> {
    fn run(&self, k: usize, q: f64, s: &[f64], w: f64, prod: &[f64]) -> f64 {
        let g = self.grid;
        let n = g.n;
        let len = g.nodes[k].len();
        let mut acc = 0.0;
        let mut s_next = s.to_vec();
        let mut prod_next = prod.to_vec();
        for i in 0..len {
            let x = g.nodes[k][i];
            let qk = q + 2.0 * x * s[k] + self.m[k * n + k] * x * x;
            let wk = w * g.weights[k][i];
            for (t, pn) in prod_next.iter_mut().enumerate() {
                *pn = prod[t] * g.factors[k][t * len + i];
            }
            if k + 1 == n {
                let h: f64 = prod_next.iter().zip(self.term_weights).map(|(p, c)| p * c).sum();
                acc += wk * h * (-0.5 * qk).exp();
            } else {
                for j in k + 1..n {
                    s_next[j] = s[j] + self.m[j * n + k] * x;
                }
                acc += self.run(k + 1, qk, &s_next, wk, &prod_next);
            }
        }
        acc
    }
}

fn tensor_sum(grid: &Grid, m: &[f64], term_weights: &[f64], exec: Execution) -> f64 {
    let sweep = Sweep { grid, m, term_weights };
    let n = grid.n;
    let len0 = grid.nodes[0].len();
    let parts = exec.map(len0, |i| {
        let x = grid.nodes[0][i];
        let q = m[0] * x * x;
        let w = grid.weights[0][i];
        let prod: Vec<f64> = (0..term_weights.len()).map(|t| grid.factors[0][t * len0 + i]).collect();
        if n == 1 {
            let h: f64 = prod.iter().zip(term_weights).map(|(p, c)| p * c).sum();
            return w * h * (-0.5 * q).exp();
        }
        let s: Vec<f64> = (0..n).map(|j| m[j * n] * x).collect();
        sweep.run(1, q, &s, w, &prod)
    });
    pairwise_sum(&parts)
}

/// Tensor Gauss–Legendre value with `points_per_dim` points per smooth panel;
/// the error bound is the difference to the doubled rule.
pub fn quad_reference(
    matrix: &[f64],
    a: &[f64],
    b: &[f64],
    h: &HModel,
    points_per_dim: usize,
    exec: Execution,
) -> Result<OracleEstimate> {
    let n = a.len();
    check_box(n, matrix, a, b)?;
    if n > QUAD_MAX_DIM {
        return domain(format!("tensor quadrature supports n <= {QUAD_MAX_DIM}, got {n}"));
    }
    if points_per_dim == 0 {
        return domain("points_per_dim must be positive");
    }
    let sep = Separable::new(h, n)?;
    let coarse = build_grid(&sep, n, a, b, points_per_dim);
    let fine = build_grid(&sep, n, a, b, 2 * points_per_dim);
    let cost = coarse.points().saturating_add(fine.points());
    if cost > QUAD_COST_CAP {
        return Err(TmvnError::CostCap(cost));
    }
    let lo = tensor_sum(&coarse, matrix, &sep.weights, exec);
    let hi = tensor_sum(&fine, matrix, &sep.weights, exec);
    let floor = 4.0 * f64::EPSILON * hi.abs().max(f64::MIN_POSITIVE);
    Ok(OracleEstimate { value: hi, error_bound: (hi - lo).abs().max(floor), method: OracleMethod::Quadrature, cost })
}

/// Uniform sampling of the box; the bound is three standard errors.
pub fn mc_reference(
    matrix: &[f64],
    a: &[f64],
    b: &[f64],
    h: &HModel,
    samples: u64,
    seed: u64,
    exec: Execution,
) -> Result<OracleEstimate> {
    let n = a.len();
    check_box(n, matrix, a, b)?;
    if samples < MC_MIN_SAMPLES {
        return domain(format!("Monte Carlo needs at least {MC_MIN_SAMPLES} samples"));
    }
    let sep = Separable::new(h, n)?;
    let chunks = samples.div_ceil(MC_CHUNK);
    // (count, mean, M2) per chunk, merged in chunk order
    let stats = exec.map(chunks as usize, |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64);
        let count = MC_CHUNK.min(samples - c as u64 * MC_CHUNK);
        let mut x = vec![0.0; n];
        let (mut mean, mut m2) = (0.0, 0.0);
        for i in 0..count {
            for k in 0..n {
                x[k] = a[k] + (b[k] - a[k]) * rng.random::<f64>();
            }
            let mut q = 0.0;
            for r in 0..n {
                let row: f64 = (0..n).map(|s| matrix[r * n + s] * x[s]).sum();
                q += x[r] * row;
            }
            let f = sep.eval(&x) * (-0.5 * q).exp();
            let delta = f - mean;
            mean += delta / (i + 1) as f64;
            m2 += delta * (f - mean);
        }
        (count as f64, mean, m2)
    });
    let (mut cnt, mut mean, mut m2) = (0.0, 0.0, 0.0);
    for (nb, mb, m2b) in stats {
        let tot = cnt + nb;
        let delta = mb - mean;
        mean += delta * nb / tot;
        m2 += m2b + delta * delta * cnt * nb / tot;
        cnt = tot;
    }
    let volume: f64 = a.iter().zip(b).map(|(lo, hi)| hi - lo).product();
    let var = m2 / (cnt - 1.0);
    let se = volume * (var / cnt).sqrt();
    Ok(OracleEstimate {
        value: volume * mean,
        error_bound: (3.0 * se).max(f64::MIN_POSITIVE),
        method: OracleMethod::MonteCarlo,
        cost: samples,
    })
}
