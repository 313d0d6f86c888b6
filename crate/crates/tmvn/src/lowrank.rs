//! Low-rank integrands `H(x) = Σ_p w_p Π_k u_{p,k}(x_k)`.

use crate::error::{domain, Result};
use crate::quadrature;
use crate::Complex;
use serde::{Deserialize, Serialize};

/// Single-variable factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Factor {
    /// `u(x) = 1`.
    One,
    /// `u(x) = (Σ_j coeffs[j] x^j) · exp(-gauss · x²)`.
    Polynomial {
        coeffs: Vec<f64>,
        #[serde(default)]
        gauss: f64,
    },
    /// `u(x) = 1` on `[lo, hi]`, else 0.
    Indicator { lo: f64, hi: f64 },
    /// `values[i]` on `[breaks[i-1], breaks[i])`, with open ends.
    PiecewiseConstant { breaks: Vec<f64>, values: Vec<f64> },
}

impl Factor {
    pub fn validate(&self) -> Result<()> {
        match self {
            Factor::One => Ok(()),
            Factor::Polynomial { coeffs, gauss } => {
                if coeffs.is_empty() || !(*gauss >= 0.0) {
                    return domain("polynomial factor needs coefficients and a non-negative gauss rate");
                }
                Ok(())
            }
            Factor::Indicator { lo, hi } => {
                if !(lo < hi) {
                    return domain(format!("indicator needs lo < hi, got [{lo}, {hi}]"));
                }
                Ok(())
            }
            Factor::PiecewiseConstant { breaks, values } => {
                if values.len() != breaks.len() + 1 || breaks.windows(2).any(|w| w[1] <= w[0]) {
                    return domain("piecewise-constant factor needs increasing breaks and one more value");
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Factor::One => 1.0,
            Factor::Polynomial { coeffs, gauss } => {
                let p = coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c);
                p * (-gauss * x * x).exp()
            }
            Factor::Indicator { lo, hi } => {
                if x >= *lo && x <= *hi {
                    1.0
                } else {
                    0.0
                }
            }
            Factor::PiecewiseConstant { breaks, values } => {
                let i = breaks.partition_point(|&b| b <= x);
                values[i]
            }
        }
    }

    /// Conservative sign test: true only when `u ≥ 0` everywhere.
    pub fn nonnegative(&self) -> bool {
        match self {
            Factor::One | Factor::Indicator { .. } => true,
            Factor::Polynomial { coeffs, .. } => {
                coeffs.iter().step_by(2).all(|c| *c >= 0.0) && coeffs.iter().skip(1).step_by(2).all(|c| *c == 0.0)
            }
            Factor::PiecewiseConstant { values, .. } => values.iter().all(|v| *v >= 0.0),
        }
    }

    /// Points where the factor is not smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Factor::Indicator { lo, hi } => vec![*lo, *hi],
            Factor::PiecewiseConstant { breaks, .. } => breaks.clone(),
            _ => Vec::new(),
        }
    }

    /// `∫_a^b u(x) e^{-αx²} e^{-2ixt} dx` by panel Gauss–Legendre quadrature.
    pub fn leaf_integral(&self, a: f64, b: f64, alpha: f64, t: f64) -> Complex {
        let bp = self.breakpoints();
        let width = if alpha > 0.0 { 0.5 / alpha.sqrt() } else { f64::INFINITY };
        let mut acc = Complex::new(0.0, 0.0);
        // finer panels for sharp Gaussians
        let mut edges = vec![a];
        let pieces = ((b - a) / width).ceil().clamp(1.0, 1e4) as usize;
        for i in 1..pieces {
            edges.push(a + (b - a) * i as f64 / pieces as f64);
        }
        edges.push(b);
        for w in edges.windows(2) {
            acc += quadrature::oscillatory_integral(w[0], w[1], t, &bp, |x| {
                self.eval(x) * (-alpha * x * x).exp()
            });
        }
        acc
    }
}

/// One product term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    #[serde(default = "unit")]
    pub weight: f64,
    /// Factors by 1-based variable index; missing variables get `One`.
    #[serde(default)]
    pub factors: Vec<IndexedFactor>,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexedFactor {
    pub var: usize,
    pub factor: Factor,
}

/// Sum of product terms over `n` variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowRankH {
    pub n: usize,
    pub terms: Vec<Term>,
}

impl LowRankH {
    pub fn new(n: usize, terms: Vec<Term>) -> Result<Self> {
        if terms.is_empty() {
            return domain("low-rank H needs at least one term");
        }
        for term in &terms {
            for f in &term.factors {
                if f.var == 0 || f.var > n {
                    return domain(format!("factor variable {} outside 1..={n}", f.var));
                }
                f.factor.validate()?;
            }
            let mut vars: Vec<usize> = term.factors.iter().map(|f| f.var).collect();
            vars.sort_unstable();
            if vars.windows(2).any(|w| w[0] == w[1]) {
                return domain("a term lists the same variable twice");
            }
        }
        Ok(LowRankH { n, terms })
    }

    /// `H ≡ 1`.
    pub fn constant(n: usize, value: f64) -> Self {
        LowRankH { n, terms: vec![Term { weight: value, factors: Vec::new() }] }
    }

    /// Factor of term `p` for 0-based variable `k`.
    pub fn factor(&self, p: usize, k: usize) -> Factor {
        self.terms[p]
            .factors
            .iter()
            .find(|f| f.var == k + 1)
            .map(|f| f.factor.clone())
            .unwrap_or(Factor::One)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| t.weight * t.factors.iter().map(|f| f.factor.eval(x[f.var - 1])).product::<f64>())
            .sum()
    }

    /// Breakpoints per variable, over all terms.
    pub fn breakpoints(&self, k: usize) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .terms
            .iter()
            .flat_map(|t| t.factors.iter().filter(|f| f.var == k + 1).flat_map(|f| f.factor.breakpoints()))
            .collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    /// Single-term model holding only term `p`.
    pub fn single(&self, p: usize) -> LowRankH {
        LowRankH { n: self.n, terms: vec![self.terms[p].clone()] }
    }
}

/// Leaf integrals `∫_a^b u_k(x) e^{-αx²} e^{-2ixt} dx` for variable `k`.
pub trait LeafSource: Sync {
    fn integral(&self, k: usize, a: f64, b: f64, alpha: f64, t: f64) -> Result<Complex>;

    /// Whether every leaf integrand is non-negative, so φ must come out positive.
    fn nonnegative(&self) -> bool {
        true
    }
}

/// `u_k ≡ 1`, closed form.
pub struct ClosedForm;

impl LeafSource for ClosedForm {
    fn integral(&self, _k: usize, a: f64, b: f64, alpha: f64, t: f64) -> Result<Complex> {
        crate::specfun::leaf_integral_gauss(a, b, alpha, t)
    }
}

/// Factors of one term of a low-rank model, by quadrature.
pub struct FactorQuadrature<'a> {
    pub h: &'a LowRankH,
    pub term: usize,
}

impl LeafSource for FactorQuadrature<'_> {
    fn integral(&self, k: usize, a: f64, b: f64, alpha: f64, t: f64) -> Result<Complex> {
        Ok(self.h.factor(self.term, k).leaf_integral(a, b, alpha, t))
    }

    fn nonnegative(&self) -> bool {
        self.h.terms[self.term].factors.iter().all(|f| f.factor.nonnegative())
    }
}
