//! Extreme discrepancy of finite sequences in `[0, 1)`, unnormalized:
//! `D_N = sup_{0 <= a < b <= 1} |#{n : a < xi_n < b} - (b - a) N|`.
//!
//! Intervals are open, so atoms sitting exactly on an endpoint are not
//! counted. The supremum is usually a limit; the reported witness gives the
//! endpoints it is approached from.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expsum::{weyl_sum_poly, ExpSumError, PhasePolynomial, WeightSeq};
use crate::polyfam::{shift_coefficients, PolynomialFamily};
use crate::torus::{Phase, TorusPoint};

/// Largest input accepted by [`brute_force_discrepancy`].
pub const BRUTE_FORCE_LIMIT: usize = 512;

#[derive(Debug, Error, PartialEq)]
pub enum DiscrepancyError {
    #[error("empty sequence")]
    Empty,
    #[error("point {index} = {value} is outside [0, 1)")]
    PointOutOfRange { index: usize, value: f64 },
    #[error("{n} points exceed the brute-force limit {limit}")]
    BudgetExceeded { n: usize, limit: usize },
    #[error("cutoff G must be at least 1")]
    BadCutoff,
    #[error(transparent)]
    Sum(#[from] ExpSumError),
}

/// Whether the supremum comes from too many or too few points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Excess,
    Deficit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyResult {
    #[serde(rename = "N")]
    pub n: usize,
    pub value: f64,
    /// Left end of the witness interval.
    pub a: f64,
    /// Right end of the witness interval.
    pub b: f64,
    /// For `Excess` the value is the limit as `(a, b)` widens to the closed
    /// interval `[a, b]`; for `Deficit` it is attained at `(a, b)`.
    pub side: Side,
}

impl DiscrepancyResult {
    pub const CSV_HEADER: &'static str = "N,value,a,b";

    pub fn normalized(&self) -> f64 {
        self.value / self.n as f64
    }

    pub fn csv_row(&self) -> String {
        format!("{},{:.16e},{:.16e},{:.16e}", self.n, self.value, self.a, self.b)
    }
}

impl fmt::Display for DiscrepancyResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "D_{} = {} on ({}, {})", self.n, self.value, self.a, self.b)
    }
}

fn validate(points: &[f64]) -> Result<(), DiscrepancyError> {
    if points.is_empty() {
        return Err(DiscrepancyError::Empty);
    }
    for (index, &value) in points.iter().enumerate() {
        if !(0.0..1.0).contains(&value) {
            return Err(DiscrepancyError::PointOutOfRange { index, value });
        }
    }
    Ok(())
}

/// Sorted distinct values with cumulative counts `C_i = #{xi <= v_i}`.
fn atoms(points: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut sorted = points.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut values: Vec<f64> = Vec::new();
    let mut cumulative: Vec<usize> = Vec::new();
    for (i, &x) in sorted.iter().enumerate() {
        if values.last() == Some(&x) {
            *cumulative.last_mut().expect("nonempty") = i + 1;
        } else {
            values.push(x);
            cumulative.push(i + 1);
        }
    }
    (values, cumulative)
}

/// Exact discrepancy in `O(N log N)`.
///
/// Excess: the count of `(a, b)` is largest when the interval hugs a run of
/// atoms `v_i..v_j` from outside, giving `C_j - C_{i-1} - N(v_j - v_i)`; an
/// atom at `0` can never be inside. Deficit: endpoints sit on atoms (or on `0`,
/// `1`) so they exclude as much as possible, giving
/// `N(b - a) - #{xi < b} + #{xi <= a}`.
pub fn exact_discrepancy(points: &[f64]) -> Result<DiscrepancyResult, DiscrepancyError> {
    validate(points)?;
    let n = points.len();
    let nf = n as f64;
    let (v, c) = atoms(points);
    let m = v.len();
    let below = |i: usize| if i == 0 { 0 } else { c[i - 1] };

    let mut best = DiscrepancyResult { n, value: 0.0, a: 0.0, b: 0.0, side: Side::Deficit };

    // excess: max_j (C_j - N v_j) + max_{i <= j, v_i > 0} (N v_i - C_{i-1})
    let mut left: Option<(f64, usize)> = None;
    for j in 0..m {
        if v[j] > 0.0 {
            let cand = nf * v[j] - below(j) as f64;
            if left.is_none_or(|(l, _)| cand > l) {
                left = Some((cand, j));
            }
        }
        if let Some((_, i)) = left {
            let value = (c[j] - below(i)) as f64 - nf * (v[j] - v[i]);
            if value > best.value {
                best = DiscrepancyResult { n, value, a: v[i], b: v[j], side: Side::Excess };
            }
        }
    }

    // deficit: left ends 0 and atoms, right ends atoms and 1, swept in order
    let zeros = if v[0] == 0.0 { c[0] } else { 0 };
    let mut min_left = (0.0 - zeros as f64, 0.0); // (N a - #{xi <= a}, a)
    let consider = |b: f64, strictly_below: usize, min_left: (f64, f64), best: &mut DiscrepancyResult| {
        if b > min_left.1 {
            let value = nf * (b - min_left.1) - (strictly_below as f64 - (nf * min_left.1 - min_left.0));
            if value > best.value {
                *best = DiscrepancyResult { n, value, a: min_left.1, b, side: Side::Deficit };
            }
        }
    };
    for j in 0..m {
        consider(v[j], below(j), min_left, &mut best);
        let key = nf * v[j] - c[j] as f64;
        if key < min_left.0 {
            min_left = (key, v[j]);
        }
    }
    consider(1.0, n, min_left, &mut best);
    Ok(best)
}

/// Endpoint `value` displaced by an infinitesimal in direction `side`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
struct Endpoint {
    value: f64,
    side: i8,
}

/// `O(N^2 log N)` reference: every pair of candidate endpoints `0`, `1` and
/// `xi_n - eta, xi_n, xi_n + eta` with `eta` infinitesimal. Lengths use the
/// limit `eta -> 0`.
pub fn brute_force_discrepancy(points: &[f64]) -> Result<f64, DiscrepancyError> {
    validate(points)?;
    if points.len() > BRUTE_FORCE_LIMIT {
        return Err(DiscrepancyError::BudgetExceeded { n: points.len(), limit: BRUTE_FORCE_LIMIT });
    }
    let n = points.len() as f64;
    let mut sorted = points.to_vec();
    sorted.sort_by(f64::total_cmp);

    let mut ends = vec![Endpoint { value: 0.0, side: 0 }, Endpoint { value: 0.0, side: 1 }, Endpoint { value: 1.0, side: -1 }, Endpoint { value: 1.0, side: 0 }];
    for &x in &sorted {
        for side in -1..=1 {
            if x == 0.0 && side == -1 {
                continue;
            }
            ends.push(Endpoint { value: x, side });
        }
    }
    ends.sort_by(|p, q| p.partial_cmp(q).expect("finite"));
    ends.dedup();

    // #{xi > a} and #{xi < b} under the displaced endpoints
    let above = |a: Endpoint| -> usize {
        let at_or_after = if a.side < 0 {
            sorted.partition_point(|&x| x < a.value)
        } else {
            sorted.partition_point(|&x| x <= a.value)
        };
        sorted.len() - at_or_after
    };
    let before = |b: Endpoint| -> usize {
        if b.side > 0 {
            sorted.partition_point(|&x| x <= b.value)
        } else {
            sorted.partition_point(|&x| x < b.value)
        }
    };

    let mut best = 0.0f64;
    for (i, &a) in ends.iter().enumerate() {
        for &b in &ends[i + 1..] {
            let inside = (before(b) + above(a)) as f64 - n;
            let dev = (inside - n * (b.value - a.value)).abs();
            best = best.max(dev);
        }
    }
    Ok(best)
}

/// `3 (N/(G+1) + sum_{g<=G} |sum_n e(g xi_n)| / g)` for arbitrary phases.
pub fn erdos_turan_bound_phases(points: &[Phase], g_max: u64) -> Result<f64, DiscrepancyError> {
    if points.is_empty() {
        return Err(DiscrepancyError::Empty);
    }
    if g_max == 0 {
        return Err(DiscrepancyError::BadCutoff);
    }
    let n = points.len() as f64;
    let mut total = n / (g_max as f64 + 1.0);
    for g in 1..=g_max {
        let s: Complex64 = points.iter().map(|p| p.scale(g as i64).unit()).sum();
        total += s.norm() / g as f64;
    }
    Ok(3.0 * total)
}

/// Erdős–Turán bound for real points in `[0, 1)`.
pub fn erdos_turan_bound(points: &[f64], g_max: u64) -> Result<f64, DiscrepancyError> {
    validate(points)?;
    let phases: Vec<Phase> = points.iter().map(|&x| Phase::from_f64(x)).collect();
    erdos_turan_bound_phases(&phases, g_max)
}

/// Erdős–Turán bound for `xi_n = f(n)`, `n = 1..=N`, where each harmonic sum
/// is a Weyl sum at the scaled point `g u`.
pub fn erdos_turan_bound_poly(
    fam: &PolynomialFamily,
    u: &TorusPoint,
    n: u64,
    g_max: u64,
) -> Result<f64, DiscrepancyError> {
    if g_max == 0 {
        return Err(DiscrepancyError::BadCutoff);
    }
    let poly = PhasePolynomial::new(fam, u)?;
    let mut total = n as f64 / (g_max as f64 + 1.0);
    for g in 1..=g_max {
        let s = weyl_sum_poly(&poly.scale(g as i64), &WeightSeq::Unit, 1, n)?;
        total += s.value.norm() / g as f64;
    }
    Ok(3.0 * total)
}

/// Phases `f(start), ..., f(start + count - 1)`.
pub fn sequence_phases(poly: &PhasePolynomial, start: i64, count: u64) -> Vec<Phase> {
    let mut table = poly.table_at(start);
    (0..count)
        .map(|_| {
            let p = table.current();
            table.advance();
            p
        })
        .collect()
}

fn phases_to_points(phases: &[Phase]) -> Vec<f64> {
    phases.iter().map(|p| p.to_f64()).collect()
}

/// Discrepancy of the fractional parts `{u_1 phi_1(n) + ... + u_d phi_d(n)}`, `n <= N`.
pub fn poly_discrepancy(fam: &PolynomialFamily, u: &TorusPoint, n: u64) -> Result<DiscrepancyResult, DiscrepancyError> {
    if n == 0 {
        return Err(DiscrepancyError::Empty);
    }
    let poly = PhasePolynomial::new(fam, u)?;
    exact_discrepancy(&phases_to_points(&sequence_phases(&poly, 1, n)))
}

/// Discrepancy of `{u_1 n + ... + u_d n^d}`, `n = M+1..=M+N`, computed from
/// the shifted coefficients. The shifted sequence plus the constant `v_0`
/// is checked to be the same multiset of phases as the direct one.
pub fn short_interval_discrepancy(u: &TorusPoint, m: i64, n: u64) -> Result<DiscrepancyResult, DiscrepancyError> {
    if n == 0 {
        return Err(DiscrepancyError::Empty);
    }
    let d = u.dim().max(1);
    let fam = PolynomialFamily::classical(d).expect("d >= 1");
    let shifted = shift_coefficients(u, m);
    let via_shift = PhasePolynomial::new(&fam, &shifted.point)?.shifted_by(shifted.constant);
    let mut from_shift = sequence_phases(&via_shift, 1, n);
    let mut direct = sequence_phases(&PhasePolynomial::new(&fam, u)?, m + 1, n);
    from_shift.sort_unstable();
    direct.sort_unstable();
    assert_eq!(from_shift, direct, "shifted sequence differs from the direct one");
    exact_discrepancy(&phases_to_points(&from_shift))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atoms_at_zero() {
        let r = exact_discrepancy(&[0.0; 5]).unwrap();
        assert_eq!(r.value, 5.0);
        assert_eq!((r.a, r.b), (0.0, 1.0));
        assert_eq!(brute_force_discrepancy(&[0.0; 5]).unwrap(), 5.0);
    }

    #[test]
    fn equally_spaced() {
        let pts: Vec<f64> = (1..=4).map(|i| (2 * i - 1) as f64 / 8.0).collect();
        assert_eq!(exact_discrepancy(&pts).unwrap().value, 1.0);
        assert_eq!(brute_force_discrepancy(&pts).unwrap(), 1.0);
    }

    #[test]
    fn single_point() {
        let r = exact_discrepancy(&[0.5]).unwrap();
        assert_eq!(r.value, 1.0);
        assert_eq!(brute_force_discrepancy(&[0.5]).unwrap(), 1.0);
    }

    #[test]
    fn excess_witness() {
        // two atoms at 0.5: the interval squeezed around them holds 2 points of length ~0
        let r = exact_discrepancy(&[0.5, 0.5]).unwrap();
        assert_eq!(r.value, 2.0);
        assert_eq!(r.side, Side::Excess);
        assert_eq!((r.a, r.b), (0.5, 0.5));
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(exact_discrepancy(&[]).unwrap_err(), DiscrepancyError::Empty);
        assert!(matches!(exact_discrepancy(&[0.2, 1.0]), Err(DiscrepancyError::PointOutOfRange { index: 1, .. })));
        assert!(matches!(exact_discrepancy(&[-0.1]), Err(DiscrepancyError::PointOutOfRange { index: 0, .. })));
        assert!(matches!(
            brute_force_discrepancy(&vec![0.5; 513]),
            Err(DiscrepancyError::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn erdos_turan_examples() {
        let n = 12;
        let pts: Vec<f64> = (1..=n).map(|i| (i % n) as f64 / n as f64).collect();
        for g in 1..n as u64 {
            let b = erdos_turan_bound(&pts, g).unwrap();
            assert!((b - 3.0 * n as f64 / (g as f64 + 1.0)).abs() < 1e-9, "G={g}");
        }
        let zeros = vec![0.0; 7];
        let h3 = 1.0 + 0.5 + 1.0 / 3.0;
        let b = erdos_turan_bound(&zeros, 3).unwrap();
        assert!((b - 3.0 * (7.0 / 4.0 + 7.0 * h3)).abs() < 1e-9);
        assert!(b >= exact_discrepancy(&zeros).unwrap().value);
        assert_eq!(erdos_turan_bound(&zeros, 0).unwrap_err(), DiscrepancyError::BadCutoff);
    }

    #[test]
    fn polynomial_examples() {
        let fam = PolynomialFamily::classical(2).unwrap();
        assert_eq!(poly_discrepancy(&fam, &TorusPoint::zero(2), 9).unwrap().value, 9.0);
        let fam1 = PolynomialFamily::classical(1).unwrap();
        assert_eq!(poly_discrepancy(&fam1, &TorusPoint::from_f64(&[0.5]), 4).unwrap().value, 2.0);
    }

    #[test]
    fn poly_bound_matches_point_bound() {
        let fam = PolynomialFamily::classical(3).unwrap();
        let u = TorusPoint::from_f64(&[0.137, 0.552, 0.918]);
        let poly = PhasePolynomial::new(&fam, &u).unwrap();
        let phases = sequence_phases(&poly, 1, 50);
        let a = erdos_turan_bound_phases(&phases, 10).unwrap();
        let b = erdos_turan_bound_poly(&fam, &u, 50, 10).unwrap();
        assert!((a - b).abs() < 1e-9);
        assert!(poly_discrepancy(&fam, &u, 50).unwrap().value <= a);
    }

    #[test]
    fn short_interval_matches_direct() {
        let u = TorusPoint::from_f64(&[0.31, 0.77, 0.05]);
        for m in [0, 1, 17, -5, 1000] {
            let r = short_interval_discrepancy(&u, m, 40).unwrap();
            let fam = PolynomialFamily::classical(3).unwrap();
            let direct = sequence_phases(&PhasePolynomial::new(&fam, &u).unwrap(), m + 1, 40);
            let expected = exact_discrepancy(&phases_to_points(&direct)).unwrap();
            assert_eq!(r.value, expected.value, "M={m}");
        }
    }

    #[test]
    fn csv_and_json() {
        let r = exact_discrepancy(&[0.5]).unwrap();
        assert_eq!(DiscrepancyResult::CSV_HEADER, "N,value,a,b");
        assert!(r.csv_row().starts_with("1,1.0000000000000000e0,"));
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["N"], 1);
    }
}
