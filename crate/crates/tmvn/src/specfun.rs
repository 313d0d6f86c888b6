//! Faddeeva function, complex error function, the smooth window filter and
//! closed-form Gaussian-weighted Fourier integrals over an interval.

use crate::error::{domain, Result};
use crate::quadrature;
use crate::Complex;
use std::f64::consts::PI;
use std::sync::OnceLock;

const SQRT_PI: f64 = 1.772_453_850_905_516;
const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// Terms in the rational approximation used inside `|z| < CF_RADIUS`.
const RATIONAL_TERMS: usize = 40;
/// Inside this modulus the Maclaurin series is used.
const TAYLOR_RADIUS: f64 = 0.5;
/// Beyond this modulus the Laplace continued fraction takes over.
const CF_RADIUS: f64 = 6.0;

/// Below this |t| the plane-wave leaf switches to its Taylor expansion.
pub const PLANE_TAYLOR_EPS: f64 = 1e-6;

struct Rational {
    scale: f64,
    coeffs: Vec<f64>,
}

fn rational() -> &'static Rational {
    static TABLE: OnceLock<Rational> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = RATIONAL_TERMS;
        let m = 2 * n;
        let m2 = 2 * m;
        let scale = (n as f64 / std::f64::consts::SQRT_2).sqrt();
        // f sampled on the tangent map, index 0 padded with zero, then
        // fftshifted and transformed; only real parts are kept.
        let mut f = vec![0.0f64; m2];
        for (idx, k) in (-(m as i64) + 1..m as i64).enumerate() {
            let theta = k as f64 * PI / m as f64;
            let t = scale * (theta / 2.0).tan();
            f[idx + 1] = (-t * t).exp() * (scale * scale + t * t);
        }
        let shifted: Vec<f64> = (0..m2).map(|i| f[(i + m2 / 2) % m2]).collect();
        let mut a = vec![0.0f64; n];
        for (j, slot) in a.iter_mut().enumerate() {
            let k = j + 1;
            let mut acc = 0.0;
            for (i, v) in shifted.iter().enumerate() {
                acc += v * (2.0 * PI * (k * i) as f64 / m2 as f64).cos();
            }
            *slot = acc / m2 as f64;
        }
        a.reverse();
        Rational { scale, coeffs: a }
    })
}

fn w_rational(z: Complex) -> Complex {
    let r = rational();
    let i = Complex::i();
    let denom = r.scale - i * z;
    let big_z = (r.scale + i * z) / denom;
    let mut p = Complex::new(0.0, 0.0);
    for &c in &r.coeffs {
        p = p * big_z + c;
    }
    2.0 * p / (denom * denom) + FRAC_1_SQRT_PI / denom
}

fn w_continued_fraction(z: Complex) -> Complex {
    let r2 = z.norm_sqr();
    let terms = if r2 > 1e4 {
        8
    } else if r2 > 400.0 {
        16
    } else {
        40
    };
    let mut r = Complex::new(0.0, 0.0);
    for k in (1..=terms).rev() {
        r = (k as f64 * 0.5) / (z - r);
    }
    Complex::i() * FRAC_1_SQRT_PI / (z - r)
}

/// `Σ (iz)^n / Γ(n/2 + 1)`, used near the origin.
fn w_taylor(z: Complex) -> Complex {
    let iz = Complex::i() * z;
    let iz2 = iz * iz;
    let mut even = Complex::new(1.0, 0.0);
    let mut odd = iz * (2.0 * FRAC_1_SQRT_PI);
    let mut sum = even + odd;
    for k in 1..40 {
        even = even * iz2 / k as f64;
        odd = odd * iz2 / (k as f64 + 0.5);
        sum += even + odd;
        if even.norm() + odd.norm() < 1e-17 * sum.norm() {
            break;
        }
    }
    sum
}

fn w_upper(z: Complex) -> Complex {
    let r2 = z.norm_sqr();
    if r2 < TAYLOR_RADIUS * TAYLOR_RADIUS {
        w_taylor(z)
    } else if r2 < CF_RADIUS * CF_RADIUS {
        w_rational(z)
    } else {
        w_continued_fraction(z)
    }
}

/// Faddeeva function `w(z) = exp(-z²) erfc(-iz)`.
pub fn faddeeva(z: Complex) -> Complex {
    if z.im >= 0.0 {
        w_upper(z)
    } else {
        2.0 * (-z * z).exp() - w_upper(-z)
    }
}

/// Scaled complementary error function `erfcx(x) = exp(x²) erfc(x)` for real x ≥ 0.
fn erfcx_nonneg(x: f64) -> f64 {
    w_upper(Complex::new(0.0, x)).re
}

/// Real complementary error function.
pub fn erfc(x: f64) -> f64 {
    if x >= 0.0 {
        if x > 27.3 {
            return 0.0;
        }
        (-x * x).exp() * erfcx_nonneg(x)
    } else {
        2.0 - erfc(-x)
    }
}

/// Real error function.
pub fn erf(x: f64) -> f64 {
    if x.abs() < 0.5 {
        erf_complex(Complex::new(x, 0.0)).re
    } else if x > 0.0 {
        1.0 - erfc(x)
    } else {
        erfc(-x) - 1.0
    }
}

fn erf_taylor(z: Complex) -> Complex {
    let z2 = z * z;
    let mut term = z;
    let mut sum = z;
    for n in 1..40 {
        term = -term * z2 / n as f64;
        let add = term / (2 * n + 1) as f64;
        sum += add;
        if add.norm() < 1e-17 * sum.norm() {
            break;
        }
    }
    sum * (2.0 * FRAC_1_SQRT_PI)
}

/// Complex error function, evaluated through the Faddeeva function.
pub fn erf_complex(z: Complex) -> Complex {
    if z.norm_sqr() < 0.25 {
        return erf_taylor(z);
    }
    if z.re < 0.0 {
        return -erf_complex(-z);
    }
    // erfc(z) = exp(-z²) w(iz), and iz lies in the upper half plane for Re z > 0.
    Complex::new(1.0, 0.0) - (-z * z).exp() * w_upper(Complex::i() * z)
}

fn filter_args(x: f64, half_width: f64) -> (f64, f64) {
    let u = x / half_width;
    (14.0 * (u + 1.5), 14.0 * (u - 1.5))
}

/// Smooth window: ≈1 on `|x| < half_width`, decaying to ≈2e-23 at `2·half_width`.
pub fn filter(x: f64, half_width: f64) -> f64 {
    let (p, q) = filter_args(x, half_width);
    if q > 0.0 {
        0.5 * (erfc(q) - erfc(p))
    } else if p < 0.0 {
        0.5 * (erfc(-p) - erfc(-q))
    } else {
        0.5 * (erf(p) - erf(q))
    }
}

/// `1 - filter(x, half_width)` without cancellation.
pub fn filter_complement(x: f64, half_width: f64) -> f64 {
    let (p, q) = filter_args(x, half_width);
    0.5 * (erfc(p) + erfc(-q))
}

/// `(1/√π) ∫ e^{-t²} e^{ikπt/L} dt = exp(-k²π²/(4L²))`.
pub fn gauss_fourier_weight(k: i64, half_period: f64) -> f64 {
    let kf = k as f64 * PI / half_period;
    (-kf * kf / 4.0).exp()
}

/// `e^{-t²} erfc(a + it)` for a ≥ 0.
fn tail_nonneg(a: f64, t: f64) -> Complex {
    let phase = Complex::new(-a * a, -2.0 * a * t).exp();
    phase * w_upper(Complex::new(-t, a))
}

/// `e^{-t²} erfc(a + it)` for any real a.
fn tail(a: f64, t: f64) -> Complex {
    if a >= 0.0 {
        tail_nonneg(a, t)
    } else {
        Complex::new(2.0 * (-t * t).exp(), 0.0) - tail_nonneg(-a, t).conj()
    }
}

/// `∫_a^b e^{-x²} e^{-2ixt} dx`.
fn unit_gauss(a: f64, b: f64, t: f64) -> Complex {
    if b <= 0.0 {
        return unit_gauss(-b, -a, -t);
    }
    0.5 * SQRT_PI * (tail(a, t) - tail(b, t))
}

/// `∫_a^b e^{-αx²} e^{-2ixt} dx` for α ≥ 0.
pub fn leaf_integral_gauss(a: f64, b: f64, alpha: f64, t: f64) -> Result<Complex> {
    if !(b > a) {
        return domain(format!("leaf interval requires a < b, got [{a}, {b}]"));
    }
    if !(alpha >= 0.0) {
        return domain(format!("leaf exponent must be non-negative, got {alpha}"));
    }
    if alpha == 0.0 {
        return leaf_integral_plane(a, b, t);
    }
    let s = alpha.sqrt();
    if s * (b - a) < 1e-3 {
        // The closed form cancels for nearly flat Gaussians; integrate directly.
        return Ok(quadrature::oscillatory_integral(a, b, t, &[], |x| {
            (-alpha * x * x).exp()
        }));
    }
    Ok(unit_gauss(a * s, b * s, t / s) / s)
}

/// `∫_a^b e^{-2ixt} dx`.
pub fn leaf_integral_plane(a: f64, b: f64, t: f64) -> Result<Complex> {
    if !(b > a) {
        return domain(format!("leaf interval requires a < b, got [{a}, {b}]"));
    }
    if t.abs() < PLANE_TAYLOR_EPS {
        // Σ_{n≤4} (-2it)^n (b^{n+1} - a^{n+1}) / ((n+1) n!)
        let mut acc = Complex::new(0.0, 0.0);
        let mut coef = Complex::new(1.0, 0.0);
        let step = Complex::new(0.0, -2.0 * t);
        let (mut pa, mut pb) = (a, b);
        let mut fact = 1.0;
        for n in 0..5 {
            acc += coef * ((pb - pa) / ((n + 1) as f64 * fact));
            coef *= step;
            fact *= (n + 1) as f64;
            pa *= a;
            pb *= b;
        }
        return Ok(acc);
    }
    let phase = Complex::new(0.0, -(a + b) * t).exp();
    Ok(phase * (((b - a) * t).sin() / t))
}
