//! Numbers carried as `mantissa · e^{log_scale}` so that φ for large N
//! neither overflows nor underflows.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaled {
    pub mantissa: f64,
    pub log_scale: f64,
}

impl Scaled {
    pub fn new(mantissa: f64, log_scale: f64) -> Self {
        Scaled { mantissa, log_scale }
    }

    pub fn from_f64(v: f64) -> Self {
        Scaled { mantissa: v, log_scale: 0.0 }
    }

    /// Plain value; infinite or zero when out of range.
    pub fn value(&self) -> f64 {
        self.mantissa * self.log_scale.exp()
    }

    /// Natural log of the magnitude.
    pub fn ln_abs(&self) -> f64 {
        self.mantissa.abs().ln() + self.log_scale
    }

    pub fn log10_abs(&self) -> f64 {
        self.ln_abs() / std::f64::consts::LN_10
    }

    /// `|self - other| / |other|`, computed without forming either value.
    pub fn rel_diff(&self, other: &Scaled) -> f64 {
        let shift = self.log_scale - other.log_scale;
        let a = self.mantissa * shift.exp();
        ((a - other.mantissa) / other.mantissa).abs()
    }

    pub fn add(&self, other: &Scaled) -> Scaled {
        let ls = self.log_scale.max(other.log_scale);
        Scaled::new(
            self.mantissa * (self.log_scale - ls).exp() + other.mantissa * (other.log_scale - ls).exp(),
            ls,
        )
    }

    /// Scientific-notation string with 17 significant digits, valid beyond f64 range.
    pub fn to_sci(&self) -> String {
        let v = self.value();
        if v.is_finite() && v != 0.0 {
            return format!("{:.16e}", v);
        }
        if self.mantissa == 0.0 {
            return "0".into();
        }
        let l10 = self.log10_abs();
        let e = l10.floor();
        let m = 10f64.powf(l10 - e) * self.mantissa.signum();
        format!("{:.16}e{}", m, e as i64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rel_diff_across_scales() {
        let a = Scaled::new(2.0, 1000.0);
        let b = Scaled::new(2.0 * 1f64.exp(), 999.0);
        assert!(a.rel_diff(&b) < 1e-15);
        assert!(a.value().is_infinite());
        assert!(a.to_sci().contains('e'));
    }

    #[test]
    fn add_aligns_scales() {
        let s = Scaled::new(1.0, 0.0).add(&Scaled::new(1.0, 2f64.ln()));
        assert!((s.value() - 3.0).abs() < 1e-15);
    }
}
