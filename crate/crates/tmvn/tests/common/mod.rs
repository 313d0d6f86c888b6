//! Shared helpers for the integration and acceptance targets: a double-double
//! reference evaluator for the Faddeeva and complex error functions, plus
//! small numeric utilities.

#![allow(dead_code, clippy::approx_constant)]

use tmvn::Complex;

/// Unevaluated sum `hi + lo` with `|lo| ≤ ulp(hi)/2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };
    pub const FRAC_1_SQRT_PI: Dd = Dd { hi: 0.5641895835477563, lo: 7.66772980658294e-18 };
    pub const FRAC_PI_2: Dd = Dd { hi: 1.5707963267948966, lo: 6.123233995736766e-17 };
    pub const LN_2: Dd = Dd { hi: 0.6931471805599453, lo: 2.3190468138462996e-17 };

    pub fn new(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn abs(self) -> f64 {
        self.hi.abs()
    }

    pub fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }

    pub fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    pub fn sub(self, o: Dd) -> Dd {
        self.add(o.neg())
    }

    pub fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + (self.hi * o.lo + self.lo * o.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    pub fn mul_f(self, f: f64) -> Dd {
        let (p, e) = two_prod(self.hi, f);
        let (hi, lo) = quick_two_sum(p, e + self.lo * f);
        Dd { hi, lo }
    }

    pub fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self.sub(o.mul_f(q1));
        let q2 = r.hi / o.hi;
        let r = r.sub(o.mul_f(q2));
        let q3 = r.hi / o.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo }.add(Dd::new(q3))
    }

    pub fn div_f(self, f: f64) -> Dd {
        self.div(Dd::new(f))
    }

    /// Exact scaling by `2^n`.
    fn ldexp(self, n: i32) -> Dd {
        let s = 2f64.powi(n);
        Dd { hi: self.hi * s, lo: self.lo * s }
    }

    pub fn exp(self) -> Dd {
        if self.hi < -745.0 {
            return Dd::ZERO;
        }
        let n = (self.hi / Dd::LN_2.hi).round();
        let r = self.sub(Dd::LN_2.mul_f(n));
        let mut term = Dd::ONE;
        let mut sum = Dd::ONE;
        for k in 1..40 {
            term = term.mul(r).div_f(k as f64);
            sum = sum.add(term);
            if term.abs() < 1e-34 {
                break;
            }
        }
        // Split the scaling so intermediate powers of two stay representable.
        let n = n as i32;
        let half = n / 2;
        sum.ldexp(half).ldexp(n - half)
    }

    /// `(sin x, cos x)`.
    pub fn sin_cos(self) -> (Dd, Dd) {
        let k = (self.hi / Dd::FRAC_PI_2.hi).round();
        let r = self.sub(Dd::FRAC_PI_2.mul_f(k));
        let r2 = r.mul(r);
        let mut s_term = r;
        let mut s = r;
        let mut c_term = Dd::ONE;
        let mut c = Dd::ONE;
        for j in 1..30 {
            let j = j as f64;
            s_term = s_term.mul(r2).div_f(-(2.0 * j) * (2.0 * j + 1.0));
            c_term = c_term.mul(r2).div_f(-(2.0 * j - 1.0) * (2.0 * j));
            s = s.add(s_term);
            c = c.add(c_term);
            if s_term.abs() < 1e-34 && c_term.abs() < 1e-34 {
                break;
            }
        }
        match (k as i64).rem_euclid(4) {
            0 => (s, c),
            1 => (c, s.neg()),
            2 => (s.neg(), c.neg()),
            _ => (c.neg(), s),
        }
    }
}

/// Complex double-double.
#[derive(Clone, Copy, Debug)]
pub struct Cdd {
    pub re: Dd,
    pub im: Dd,
}

impl Cdd {
    pub const ZERO: Cdd = Cdd { re: Dd::ZERO, im: Dd::ZERO };
    pub const ONE: Cdd = Cdd { re: Dd::ONE, im: Dd::ZERO };
    pub const I: Cdd = Cdd { re: Dd::ZERO, im: Dd::ONE };

    pub fn new(z: Complex) -> Cdd {
        Cdd { re: Dd::new(z.re), im: Dd::new(z.im) }
    }

    pub fn to_complex(self) -> Complex {
        Complex::new(self.re.to_f64(), self.im.to_f64())
    }

    pub fn norm(self) -> f64 {
        self.re.hi.hypot(self.im.hi)
    }

    pub fn add(self, o: Cdd) -> Cdd {
        Cdd { re: self.re.add(o.re), im: self.im.add(o.im) }
    }

    pub fn sub(self, o: Cdd) -> Cdd {
        Cdd { re: self.re.sub(o.re), im: self.im.sub(o.im) }
    }

    pub fn neg(self) -> Cdd {
        Cdd { re: self.re.neg(), im: self.im.neg() }
    }

    pub fn mul(self, o: Cdd) -> Cdd {
        Cdd {
            re: self.re.mul(o.re).sub(self.im.mul(o.im)),
            im: self.re.mul(o.im).add(self.im.mul(o.re)),
        }
    }

    pub fn scale(self, f: Dd) -> Cdd {
        Cdd { re: self.re.mul(f), im: self.im.mul(f) }
    }

    pub fn div_f(self, f: f64) -> Cdd {
        Cdd { re: self.re.div_f(f), im: self.im.div_f(f) }
    }

    pub fn div(self, o: Cdd) -> Cdd {
        let den = o.re.mul(o.re).add(o.im.mul(o.im));
        let num = self.mul(Cdd { re: o.re, im: o.im.neg() });
        Cdd { re: num.re.div(den), im: num.im.div(den) }
    }

    pub fn exp(self) -> Cdd {
        let m = self.re.exp();
        let (s, c) = self.im.sin_cos();
        Cdd { re: m.mul(c), im: m.mul(s) }
    }
}

const SERIES_RADIUS: f64 = 5.5;
const STEP: f64 = 0.5;

/// `w(z) = Σ (iz)^n / Γ(n/2 + 1)`.
fn w_series(z: Cdd) -> Cdd {
    let iz = Cdd::I.mul(z);
    let iz2 = iz.mul(iz);
    let mut even = Cdd::ONE;
    let mut odd = iz.scale(Dd::FRAC_1_SQRT_PI.mul_f(2.0));
    let mut sum = even.add(odd);
    let r2 = z.norm().powi(2);
    for k in 1..4000 {
        let k = k as f64;
        even = even.mul(iz2).div_f(k);
        odd = odd.mul(iz2).div_f(k + 0.5);
        sum = sum.add(even).add(odd);
        if k > r2 + 10.0 && even.norm() + odd.norm() < 1e-34 * sum.norm() {
            break;
        }
    }
    sum
}

/// Laplace continued fraction `w(z) = (i/√π) / (z − ½/(z − 1/(z − 3/2/(z − …))))`.
fn w_cf_terms(z: Cdd, terms: usize) -> Cdd {
    let mut r = Cdd::ZERO;
    for k in (1..=terms).rev() {
        r = Cdd::new(Complex::new(0.5 * k as f64, 0.0)).div(z.sub(r));
    }
    Cdd::I.scale(Dd::FRAC_1_SQRT_PI).div(z.sub(r))
}

fn w_cf(z: Cdd) -> Cdd {
    let mut terms = 64;
    let mut prev = w_cf_terms(z, terms);
    loop {
        terms *= 2;
        let next = w_cf_terms(z, terms);
        if next.sub(prev).norm() < 1e-28 * next.norm() || terms >= 1 << 17 {
            return next;
        }
        prev = next;
    }
}

/// Advance `w` from `z0` to `z0 + h` using the Taylor series generated by
/// `w' = −2zw + 2i/√π`.
fn w_taylor_step(z0: Cdd, w0: Cdd, h: Cdd) -> Cdd {
    let two_i_over_sqrt_pi = Cdd::I.scale(Dd::FRAC_1_SQRT_PI.mul_f(2.0));
    let m2z = z0.scale(Dd::new(-2.0));
    let mut c_prev = w0;
    let mut c = m2z.mul(w0).add(two_i_over_sqrt_pi);
    let mut hk = h;
    let mut sum = w0.add(c.mul(hk));
    let mut small = 0;
    for k in 1..2000 {
        let next = m2z.mul(c).sub(c_prev.scale(Dd::new(2.0))).div_f((k + 1) as f64);
        c_prev = c;
        c = next;
        hk = hk.mul(h);
        let term = c.mul(hk);
        sum = sum.add(term);
        if term.norm() < 1e-34 * sum.norm() {
            small += 1;
            if small >= 3 {
                break;
            }
        } else {
            small = 0;
        }
    }
    sum
}

fn w_ode(z: Cdd) -> Cdd {
    let r = z.norm();
    let start = SERIES_RADIUS - 0.5;
    let steps = ((r - start) / STEP).ceil().max(1.0) as usize;
    let unit = Cdd::new(z.to_complex() / r);
    let mut cur = unit.scale(Dd::new(start));
    let mut w = w_series(cur);
    let dist = Dd::new(r).sub(Dd::new(start));
    for s in 1..=steps {
        let next = if s == steps { z } else { unit.scale(Dd::new(start).add(dist.mul_f(s as f64 / steps as f64))) };
        w = w_taylor_step(cur, w, next.sub(cur));
        cur = next;
    }
    w
}

/// Reference Faddeeva function for `Im z ≥ 0`, accurate to roughly 1e-25.
pub fn hp_faddeeva(z: Complex) -> Complex {
    assert!(z.im >= 0.0, "reference evaluator covers the closed upper half plane");
    hp_faddeeva_dd(Cdd::new(z)).to_complex()
}

fn hp_faddeeva_dd(z: Cdd) -> Cdd {
    let r = z.norm();
    if r <= SERIES_RADIUS {
        w_series(z)
    } else if z.im.hi >= 3.0 {
        w_cf(z)
    } else {
        w_ode(z)
    }
}

/// Reference complex error function.
pub fn hp_erf(z: Complex) -> Complex {
    if z.re < 0.0 {
        return -hp_erf(-z);
    }
    let zd = Cdd::new(z);
    if z.norm() <= SERIES_RADIUS {
        let z2 = zd.mul(zd).neg();
        let mut term = zd;
        let mut sum = zd;
        for n in 1..4000 {
            term = term.mul(z2).div_f(n as f64);
            let add = term.div_f((2 * n + 1) as f64);
            sum = sum.add(add);
            if n as f64 > z.norm_sqr() + 10.0 && add.norm() < 1e-34 * sum.norm() {
                break;
            }
        }
        return sum.scale(Dd::FRAC_1_SQRT_PI.mul_f(2.0)).to_complex();
    }
    // erf z = 1 − e^{−z²} w(iz), with iz in the upper half plane.
    let w = hp_faddeeva_dd(Cdd::I.mul(zd));
    let e = zd.mul(zd).neg().exp();
    Cdd::ONE.sub(e.mul(w)).to_complex()
}

/// Relative difference `|a − b| / |b|`.
pub fn rel(a: Complex, b: Complex) -> f64 {
    (a - b).norm() / b.norm()
}

/// Relative difference of two reals.
pub fn rel_f(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}
