//! Points of the torus stored as 64-bit fixed-point fractions.
//!
//! A coordinate `raw` stands for the real number `raw / 2^64` in `[0, 1)`.
//! Addition and multiplication by integers wrap modulo `2^64`, which is
//! exactly reduction modulo one, so phases of integer polynomials can be
//! accumulated without drift.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

const TWO_POW_64: f64 = 18_446_744_073_709_551_616.0;
const TWO_POW_NEG_64: f64 = 1.0 / TWO_POW_64;
const TWO_POW_NEG_53: f64 = 1.0 / 9_007_199_254_740_992.0;

/// A fraction `raw / 2^64` modulo one.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Phase(pub u64);

impl Phase {
    pub const ZERO: Phase = Phase(0);

    /// Quantizes a real number: reduces it modulo one and rounds to the
    /// nearest multiple of `2^-64`. This is the only lossy step in the
    /// phase pipeline.
    pub fn from_f64(x: f64) -> Phase {
        assert!(x.is_finite(), "phase must be finite");
        let frac = x.rem_euclid(1.0);
        let scaled = (frac * TWO_POW_64).round();
        if scaled >= TWO_POW_64 {
            Phase(0)
        } else {
            Phase(scaled as u64)
        }
    }

    /// `num / den` rounded to the nearest representable fraction.
    pub fn from_ratio(num: i64, den: u64) -> Phase {
        assert!(den > 0, "zero denominator");
        let den = den as i128;
        let r = (num as i128).rem_euclid(den) as u128;
        let den = den as u128;
        // r / den * 2^64, rounded to nearest
        let q = (r << 64) / den;
        let rem = (r << 64) % den;
        let q = if 2 * rem >= den { q + 1 } else { q };
        Phase(q as u64)
    }

    /// Value in `[0, 1)`, truncated to 53 bits so it never rounds up to one.
    pub fn to_f64(self) -> f64 {
        (self.0 >> 11) as f64 * TWO_POW_NEG_53
    }

    /// Representative in `[-1/2, 1/2)`, accurate to full double precision.
    pub fn to_signed_f64(self) -> f64 {
        (self.0 as i64) as f64 * TWO_POW_NEG_64
    }

    /// `e(x) = exp(2 pi i x)`.
    #[inline]
    pub fn unit(self) -> Complex64 {
        let (s, c) = (std::f64::consts::TAU * self.to_signed_f64()).sin_cos();
        Complex64::new(c, s)
    }

    #[inline]
    pub fn wrapping_add(self, other: Phase) -> Phase {
        Phase(self.0.wrapping_add(other.0))
    }

    #[inline]
    pub fn wrapping_sub(self, other: Phase) -> Phase {
        Phase(self.0.wrapping_sub(other.0))
    }

    /// Multiplication by an integer, exact modulo one.
    #[inline]
    pub fn scale(self, g: i64) -> Phase {
        Phase(self.0.wrapping_mul(g as u64))
    }

    /// Distance to zero on the circle, in `[0, 1/2]`.
    pub fn circle_norm(self) -> f64 {
        self.to_signed_f64().abs()
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}

/// A point `u = (u_1, ..., u_d)` of the torus.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TorusPoint {
    coords: Vec<Phase>,
}

impl TorusPoint {
    pub fn new(coords: Vec<Phase>) -> Self {
        TorusPoint { coords }
    }

    pub fn zero(d: usize) -> Self {
        TorusPoint { coords: vec![Phase::ZERO; d] }
    }

    pub fn from_f64(xs: &[f64]) -> Self {
        TorusPoint { coords: xs.iter().map(|&x| Phase::from_f64(x)).collect() }
    }

    pub fn from_raw(raw: &[u64]) -> Self {
        TorusPoint { coords: raw.iter().map(|&r| Phase(r)).collect() }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[Phase] {
        &self.coords
    }

    pub fn coord(&self, j: usize) -> Phase {
        self.coords[j]
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.coords.iter().map(|p| p.to_f64()).collect()
    }

    /// `g u mod 1`, coordinatewise.
    pub fn scale(&self, g: i64) -> TorusPoint {
        TorusPoint { coords: self.coords.iter().map(|p| p.scale(g)).collect() }
    }

    /// Concatenation `(x, y)` of a split point.
    pub fn join(x: &[Phase], y: &[Phase]) -> TorusPoint {
        let mut coords = Vec::with_capacity(x.len() + y.len());
        coords.extend_from_slice(x);
        coords.extend_from_slice(y);
        TorusPoint { coords }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantization_round_trips_dyadics() {
        for &x in &[0.0, 0.5, 0.25, 0.75, 0.125] {
            assert_eq!(Phase::from_f64(x).to_f64(), x);
        }
        assert_eq!(Phase::from_f64(1.0), Phase(0));
        assert_eq!(Phase::from_f64(-0.25), Phase::from_f64(0.75));
    }

    #[test]
    fn ratio_rounds_to_nearest() {
        assert_eq!(Phase::from_ratio(1, 2), Phase(1 << 63));
        assert_eq!(Phase::from_ratio(-1, 4), Phase(3 << 62));
        let third = Phase::from_ratio(1, 3);
        // three thirds land within one unit of an integer
        assert!(third.scale(3).circle_norm() < 1e-18);
    }

    #[test]
    fn to_f64_never_reaches_one() {
        assert!(Phase(u64::MAX).to_f64() < 1.0);
        assert!(Phase(u64::MAX).to_signed_f64() < 0.0);
    }

    #[test]
    fn unit_is_on_the_circle() {
        let z = Phase::from_ratio(1, 4).unit();
        assert!((z - Complex64::new(0.0, 1.0)).norm() < 1e-15);
        assert!((Phase::from_f64(0.5).unit() + 1.0).norm() < 1e-15);
    }
}
