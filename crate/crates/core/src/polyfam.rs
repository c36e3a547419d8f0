//! Exact integer polynomials and the families `phi = (phi_1, ..., phi_d)`
//! whose values drive the phases of the sums.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::torus::{Phase, TorusPoint};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum FamilyError {
    #[error("a family needs at least one polynomial")]
    Empty,
    #[error("polynomial {index} is constant")]
    Constant { index: usize },
    #[error("polynomials {first} and {second} coincide")]
    Duplicate { first: usize, second: usize },
    #[error("split index k = {k} outside 1..={d}")]
    SplitOutOfRange { k: usize, d: usize },
    #[error("family already contains the polynomial T")]
    AlreadyHasT,
    #[error("cannot parse family literal: {0}")]
    Parse(String),
}

/// Degree of a polynomial. The zero polynomial has degree "minus infinity",
/// kept as its own variant rather than a numeric sentinel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Degree {
    NegInfinity,
    Finite(usize),
}

impl Degree {
    pub fn finite(self) -> Option<usize> {
        match self {
            Degree::NegInfinity => None,
            Degree::Finite(e) => Some(e),
        }
    }
}

/// Polynomial in `Z[T]`; `coeffs[i]` is the coefficient of `T^i`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct IntPolynomial {
    coeffs: Vec<BigInt>,
}

impl IntPolynomial {
    pub fn new(mut coeffs: Vec<BigInt>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        IntPolynomial { coeffs }
    }

    pub fn from_i64(coeffs: &[i64]) -> Self {
        Self::new(coeffs.iter().map(|&c| BigInt::from(c)).collect())
    }

    pub fn zero() -> Self {
        IntPolynomial { coeffs: Vec::new() }
    }

    pub fn constant(c: impl Into<BigInt>) -> Self {
        Self::new(vec![c.into()])
    }

    /// `c T^e`.
    pub fn monomial(c: impl Into<BigInt>, e: usize) -> Self {
        let mut coeffs = vec![BigInt::zero(); e + 1];
        coeffs[e] = c.into();
        Self::new(coeffs)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> &[BigInt] {
        &self.coeffs
    }

    pub fn degree(&self) -> Degree {
        if self.coeffs.is_empty() {
            Degree::NegInfinity
        } else {
            Degree::Finite(self.coeffs.len() - 1)
        }
    }

    pub fn leading_coeff(&self) -> Option<&BigInt> {
        self.coeffs.last()
    }

    /// Formal derivative.
    pub fn derivative(&self) -> IntPolynomial {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, c)| c * BigInt::from(i))
            .collect();
        Self::new(coeffs)
    }

    /// Horner evaluation at an integer.
    pub fn evaluate(&self, n: &BigInt) -> BigInt {
        self.coeffs.iter().rev().fold(BigInt::zero(), |acc, c| acc * n + c)
    }

    pub fn evaluate_i64(&self, n: i64) -> BigInt {
        self.evaluate(&BigInt::from(n))
    }

    /// Coefficients reduced modulo `2^64` (two's complement for negatives).
    pub fn residues(&self) -> Vec<u64> {
        let modulus = BigInt::one() << 64;
        self.coeffs
            .iter()
            .map(|c| c.mod_floor(&modulus).to_u64().expect("reduced residue fits"))
            .collect()
    }

    /// Value at `n` modulo `2^64`, computed with wrapping arithmetic.
    pub fn evaluate_wrapping(&self, n: i64) -> u64 {
        let n = n as u64;
        self.residues().iter().rev().fold(0u64, |acc, &c| acc.wrapping_mul(n).wrapping_add(c))
    }

    /// Exact quotient `self / divisor`, or `None` when the division leaves a
    /// remainder or a non-integral coefficient.
    pub fn exact_div(&self, divisor: &IntPolynomial) -> Option<IntPolynomial> {
        let lead = divisor.leading_coeff()?;
        if self.is_zero() {
            return Some(IntPolynomial::zero());
        }
        let dd = divisor.coeffs.len() - 1;
        let mut rem = self.coeffs.clone();
        if rem.len() < divisor.coeffs.len() {
            return None;
        }
        let mut quot = vec![BigInt::zero(); rem.len() - dd];
        for i in (0..quot.len()).rev() {
            let top = &rem[i + dd];
            if top.is_zero() {
                continue;
            }
            let (q, r) = top.div_rem(lead);
            if !r.is_zero() {
                return None;
            }
            for (j, c) in divisor.coeffs.iter().enumerate() {
                rem[i + j] -= &q * c;
            }
            quot[i] = q;
        }
        if rem.iter().any(|c| !c.is_zero()) {
            return None;
        }
        Some(Self::new(quot))
    }
}

impl std::ops::Add for &IntPolynomial {
    type Output = IntPolynomial;
    fn add(self, rhs: &IntPolynomial) -> IntPolynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let coeffs = (0..n)
            .map(|i| {
                let a = self.coeffs.get(i).cloned().unwrap_or_default();
                let b = rhs.coeffs.get(i).cloned().unwrap_or_default();
                a + b
            })
            .collect();
        IntPolynomial::new(coeffs)
    }
}

impl std::ops::Neg for &IntPolynomial {
    type Output = IntPolynomial;
    fn neg(self) -> IntPolynomial {
        IntPolynomial { coeffs: self.coeffs.iter().map(|c| -c).collect() }
    }
}

impl std::ops::Sub for &IntPolynomial {
    type Output = IntPolynomial;
    fn sub(self, rhs: &IntPolynomial) -> IntPolynomial {
        self + &(-rhs)
    }
}

impl std::ops::Mul for &IntPolynomial {
    type Output = IntPolynomial;
    fn mul(self, rhs: &IntPolynomial) -> IntPolynomial {
        if self.is_zero() || rhs.is_zero() {
            return IntPolynomial::zero();
        }
        let mut coeffs = vec![BigInt::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        IntPolynomial::new(coeffs)
    }
}

impl fmt::Display for IntPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let sign = if c.is_negative() { "-" } else { "+" };
            if first {
                if c.is_negative() {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            first = false;
            let a = c.abs();
            match (i, a.is_one()) {
                (0, _) => write!(f, "{a}")?,
                (1, true) => write!(f, "T")?,
                (1, false) => write!(f, "{a}T")?,
                (_, true) => write!(f, "T^{i}")?,
                (_, false) => write!(f, "{a}T^{i}")?,
            }
        }
        Ok(())
    }
}

/// A family of distinct nonconstant polynomials with cached degree data.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolynomialFamily {
    polys: Vec<IntPolynomial>,
    degrees: Vec<usize>,
    sorted_degrees: Vec<usize>,
}

impl PolynomialFamily {
    pub fn new(polys: Vec<IntPolynomial>) -> Result<Self, FamilyError> {
        if polys.is_empty() {
            return Err(FamilyError::Empty);
        }
        let mut degrees = Vec::with_capacity(polys.len());
        for (index, p) in polys.iter().enumerate() {
            match p.degree() {
                Degree::Finite(e) if e >= 1 => degrees.push(e),
                _ => return Err(FamilyError::Constant { index }),
            }
        }
        for i in 0..polys.len() {
            for j in i + 1..polys.len() {
                if polys[i] == polys[j] {
                    return Err(FamilyError::Duplicate { first: i, second: j });
                }
            }
        }
        let mut sorted_degrees = degrees.clone();
        sorted_degrees.sort_unstable();
        Ok(PolynomialFamily { polys, degrees, sorted_degrees })
    }

    /// `(T, T^2, ..., T^d)`.
    pub fn classical(d: usize) -> Result<Self, FamilyError> {
        if d == 0 {
            return Err(FamilyError::Empty);
        }
        Self::new((1..=d).map(|e| IntPolynomial::monomial(1, e)).collect())
    }

    /// Family of monomials `T^{e_1}, ..., T^{e_d}`.
    pub fn monomials(exponents: &[usize]) -> Result<Self, FamilyError> {
        Self::new(exponents.iter().map(|&e| IntPolynomial::monomial(1, e)).collect())
    }

    pub fn d(&self) -> usize {
        self.polys.len()
    }

    pub fn polys(&self) -> &[IntPolynomial] {
        &self.polys
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn sorted_degrees(&self) -> &[usize] {
        &self.sorted_degrees
    }

    pub fn max_degree(&self) -> usize {
        *self.sorted_degrees.last().expect("nonempty family")
    }

    pub fn is_classical(&self) -> bool {
        self.polys
            .iter()
            .enumerate()
            .all(|(i, p)| *p == IntPolynomial::monomial(1, i + 1))
    }

    pub fn check_split(&self, k: usize) -> Result<(), FamilyError> {
        if k == 0 || k > self.d() {
            return Err(FamilyError::SplitOutOfRange { k, d: self.d() });
        }
        Ok(())
    }

    /// The family with `phi_{d+1}(T) = T` appended.
    pub fn augmented_with_linear(&self) -> Result<Self, FamilyError> {
        let t = IntPolynomial::monomial(1, 1);
        if self.polys.contains(&t) {
            return Err(FamilyError::AlreadyHasT);
        }
        let mut polys = self.polys.clone();
        polys.push(t);
        Self::new(polys)
    }

    /// Reorders members; `order[i]` is the old index placed at position `i`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self::new(order.iter().map(|&i| self.polys[i].clone()).collect())
            .expect("a permutation of a valid family is valid")
    }

    pub fn wronskian(&self) -> Wronskian {
        wronskian(self)
    }

    /// Largest `|phi_j(n)|` over `1 <= n <= n_max`.
    pub fn max_abs_value(&self, j: usize, n_max: u64) -> BigInt {
        (1..=n_max as i64)
            .map(|n| self.polys[j].evaluate_i64(n).abs())
            .max()
            .unwrap_or_default()
    }
}

impl fmt::Display for PolynomialFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, p) in self.polys.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, ")")
    }
}

/// Parses either `classical:d` or a JSON-style list of coefficient lists,
/// lowest degree first, e.g. `[[0,1],[0,0,1]]` for `(T, T^2)`.
impl FromStr for PolynomialFamily {
    type Err = FamilyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("classical:") {
            let d: usize = rest
                .trim()
                .parse()
                .map_err(|_| FamilyError::Parse(format!("bad degree in {s:?}")))?;
            return Self::classical(d);
        }
        let lists: Vec<Vec<serde_json::Number>> =
            serde_json::from_str(s).map_err(|e| FamilyError::Parse(e.to_string()))?;
        let polys = lists
            .into_iter()
            .map(|coeffs| {
                coeffs
                    .into_iter()
                    .map(|c| {
                        BigInt::from_str(&c.to_string())
                            .map_err(|_| FamilyError::Parse(format!("non-integer coefficient {c}")))
                    })
                    .collect::<Result<Vec<_>, _>>()
                    .map(IntPolynomial::new)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(polys)
    }
}

/// Determinant of the matrix of successive derivatives
/// `(phi_i^{(j-1)}(T))_{i,j}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Wronskian {
    pub value: IntPolynomial,
}

impl Wronskian {
    pub fn is_nonvanishing(&self) -> bool {
        !self.value.is_zero()
    }
}

/// Families up to this size use cofactor expansion, larger ones Bareiss.
const COFACTOR_LIMIT: usize = 6;

pub fn wronskian(fam: &PolynomialFamily) -> Wronskian {
    let matrix = derivative_matrix(fam);
    let value = if fam.d() <= COFACTOR_LIMIT {
        determinant_cofactor(&matrix)
    } else {
        determinant_bareiss(&matrix)
    };
    Wronskian { value }
}

/// Rows are family members, columns successive derivatives.
pub fn derivative_matrix(fam: &PolynomialFamily) -> Vec<Vec<IntPolynomial>> {
    let d = fam.d();
    fam.polys()
        .iter()
        .map(|p| {
            let mut row = Vec::with_capacity(d);
            let mut cur = p.clone();
            for _ in 0..d {
                let next = cur.derivative();
                row.push(cur);
                cur = next;
            }
            row
        })
        .collect()
}

/// Laplace expansion along the first row.
pub fn determinant_cofactor(m: &[Vec<IntPolynomial>]) -> IntPolynomial {
    let cols: Vec<usize> = (0..m.len()).collect();
    cofactor_rec(m, 0, &cols)
}

fn cofactor_rec(m: &[Vec<IntPolynomial>], row: usize, cols: &[usize]) -> IntPolynomial {
    if cols.is_empty() {
        return IntPolynomial::constant(1);
    }
    let mut acc = IntPolynomial::zero();
    for (pos, &c) in cols.iter().enumerate() {
        let entry = &m[row][c];
        if entry.is_zero() {
            continue;
        }
        let rest: Vec<usize> = cols.iter().copied().filter(|&x| x != c).collect();
        let term = entry * &cofactor_rec(m, row + 1, &rest);
        acc = if pos % 2 == 0 { &acc + &term } else { &acc - &term };
    }
    acc
}

/// Fraction-free Gaussian elimination over `Z[T]`; every division is exact.
pub fn determinant_bareiss(m: &[Vec<IntPolynomial>]) -> IntPolynomial {
    let n = m.len();
    if n == 0 {
        return IntPolynomial::constant(1);
    }
    let mut a: Vec<Vec<IntPolynomial>> = m.to_vec();
    let mut prev = IntPolynomial::constant(1);
    let mut negate = false;
    for k in 0..n - 1 {
        if a[k][k].is_zero() {
            match (k + 1..n).find(|&i| !a[i][k].is_zero()) {
                Some(i) => {
                    a.swap(k, i);
                    negate = !negate;
                }
                None => return IntPolynomial::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let num = &(&a[i][j] * &a[k][k]) - &(&a[i][k] * &a[k][j]);
                a[i][j] = num.exact_div(&prev).expect("Bareiss division is exact");
            }
        }
        prev = a[k][k].clone();
    }
    let det = a[n - 1][n - 1].clone();
    if negate {
        -&det
    } else {
        det
    }
}

/// The degree sums `sigma_k` (members `k+1..d` in the given order) and
/// `sigma~_k` (the `d-k` largest degrees).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeStats {
    pub sigma: u64,
    pub sigma_tilde: u64,
}

pub fn degree_stats(fam: &PolynomialFamily, k: usize) -> Result<DegreeStats, FamilyError> {
    fam.check_split(k)?;
    let sigma = fam.degrees()[k..].iter().map(|&e| e as u64).sum();
    let sigma_tilde = fam.sorted_degrees()[k..].iter().map(|&e| e as u64).sum();
    Ok(DegreeStats { sigma, sigma_tilde })
}

/// Where the linear members of a family sit relative to the split `(x, y)`.
/// Indices are zero-based positions in the family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseLabel {
    /// A linear member belongs to the `y` part.
    A { linear_index: usize },
    /// No linear member in `y`, but `x` has one; it moves to `y`.
    B { linear_index: usize },
    /// No linear member at all; `T` is appended to the family.
    C,
}

impl CaseLabel {
    pub fn letter(&self) -> char {
        match self {
            CaseLabel::A { .. } => 'A',
            CaseLabel::B { .. } => 'B',
            CaseLabel::C => 'C',
        }
    }
}

impl fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CaseLabel::A { linear_index } => write!(f, "A (linear member {} in y)", linear_index + 1),
            CaseLabel::B { linear_index } => {
                write!(f, "B (move member {} from x to y)", linear_index + 1)
            }
            CaseLabel::C => write!(f, "C (append T to y)"),
        }
    }
}

pub fn classify_case(fam: &PolynomialFamily, k: usize) -> Result<CaseLabel, FamilyError> {
    fam.check_split(k)?;
    let degrees = fam.degrees();
    if let Some(j) = (k..fam.d()).find(|&j| degrees[j] == 1) {
        return Ok(CaseLabel::A { linear_index: j });
    }
    if let Some(j) = (0..k).find(|&j| degrees[j] == 1) {
        return Ok(CaseLabel::B { linear_index: j });
    }
    Ok(CaseLabel::C)
}

/// Applies the reduction of a case B or C split to a case A split:
/// returns the rearranged family and its new split index.
pub fn reduce_to_case_a(
    fam: &PolynomialFamily,
    k: usize,
) -> Result<Option<(PolynomialFamily, usize)>, FamilyError> {
    match classify_case(fam, k)? {
        CaseLabel::A { .. } => Ok(Some((fam.clone(), k))),
        CaseLabel::B { linear_index } => {
            if k < 2 {
                // the x part would become empty
                return Ok(None);
            }
            let mut order: Vec<usize> = (0..k).filter(|&j| j != linear_index).collect();
            order.push(linear_index);
            order.extend(k..fam.d());
            Ok(Some((fam.permuted(&order), k - 1)))
        }
        CaseLabel::C => Ok(Some((fam.augmented_with_linear()?, k))),
    }
}

/// Coefficients of `u_1 (T+M) + ... + u_d (T+M)^d` for the classical family.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShiftedCoefficients {
    /// The constant term `v_0`.
    pub constant: Phase,
    /// `(v_1, ..., v_{d-1}, u_d)`.
    pub point: TorusPoint,
}

/// Binomial expansion of the shifted phase, exact modulo one:
/// `v_j = sum_{i >= max(j,1)} u_i C(i,j) M^{i-j}`.
pub fn shift_coefficients(u: &TorusPoint, m: i64) -> ShiftedCoefficients {
    let d = u.dim();
    let binom = binomial_rows_wrapping(d);
    let mut v = vec![0u64; d + 1];
    let mpow: Vec<u64> = (0..=d as u32).map(|e| (m as u64).wrapping_pow(e)).collect();
    for i in 1..=d {
        let ui = u.coord(i - 1).0;
        for j in 0..=i {
            let factor = binom[i][j].wrapping_mul(mpow[i - j]);
            v[j] = v[j].wrapping_add(ui.wrapping_mul(factor));
        }
    }
    ShiftedCoefficients {
        constant: Phase(v[0]),
        point: TorusPoint::from_raw(&v[1..]),
    }
}

/// Real-valued convenience wrapper returning `(v_0, v_1, ..., v_{d-1}, u_d)`,
/// each reduced to `[0, 1)`.
pub fn shift_coefficients_real(u: &[f64], m: i64) -> Vec<f64> {
    let s = shift_coefficients(&TorusPoint::from_f64(u), m);
    std::iter::once(s.constant.to_f64()).chain(s.point.to_f64()).collect()
}

fn binomial_rows_wrapping(d: usize) -> Vec<Vec<u64>> {
    let mut rows = vec![vec![1u64]];
    for i in 1..=d {
        let prev = &rows[i - 1];
        let mut row = vec![1u64; i + 1];
        for j in 1..i {
            row[j] = prev[j - 1].wrapping_add(prev[j]);
        }
        rows.push(row);
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(c: &[i64]) -> IntPolynomial {
        IntPolynomial::from_i64(c)
    }

    #[test]
    fn classical_degrees() {
        let f = PolynomialFamily::classical(3).unwrap();
        assert_eq!(f.degrees(), &[1, 2, 3]);
        assert_eq!(PolynomialFamily::classical(1).unwrap().polys(), &[p(&[0, 1])]);
        assert_eq!(PolynomialFamily::classical(4).unwrap().sorted_degrees(), &[1, 2, 3, 4]);
        assert_eq!(PolynomialFamily::classical(0), Err(FamilyError::Empty));
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(p(&[0, 0, 0, 1]).derivative(), p(&[0, 0, 3]));
        assert_eq!(p(&[5]).derivative(), IntPolynomial::zero());
        assert_eq!(p(&[0, 1, 2]).derivative(), p(&[1, 4]));
    }

    #[test]
    fn evaluate_examples() {
        assert_eq!(p(&[0, 0, 0, 1]).evaluate_i64(4), BigInt::from(64));
        assert_eq!(p(&[1, 2]).evaluate_i64(0), BigInt::from(1));
        assert_eq!(p(&[0, -1, 1]).evaluate_i64(5), BigInt::from(20));
        assert_eq!(p(&[0, -1, 1]).evaluate_wrapping(5), 20);
        assert_eq!(p(&[0, -1]).evaluate_wrapping(5), (-5i64) as u64);
    }

    #[test]
    fn zero_polynomial_degree_is_sentinel() {
        assert_eq!(IntPolynomial::zero().degree(), Degree::NegInfinity);
        assert_eq!(p(&[3, 0, 0]).degree(), Degree::Finite(0));
        assert!(Degree::NegInfinity < Degree::Finite(0));
    }

    #[test]
    fn construction_rejects_bad_families() {
        assert_eq!(
            PolynomialFamily::new(vec![p(&[0, 1]), p(&[7])]),
            Err(FamilyError::Constant { index: 1 })
        );
        assert_eq!(
            PolynomialFamily::new(vec![p(&[0, 1]), p(&[0, 1])]),
            Err(FamilyError::Duplicate { first: 0, second: 1 })
        );
        assert_eq!(PolynomialFamily::new(vec![]), Err(FamilyError::Empty));
    }

    #[test]
    fn wronskian_examples() {
        let f2 = PolynomialFamily::classical(2).unwrap();
        assert_eq!(f2.wronskian().value, p(&[0, 0, 1]));
        let f3 = PolynomialFamily::classical(3).unwrap();
        assert_eq!(f3.wronskian().value, p(&[0, 0, 0, 2]));
        let prop = PolynomialFamily::new(vec![p(&[0, 1]), p(&[0, 2])]).unwrap();
        let w = prop.wronskian();
        assert!(w.value.is_zero());
        assert!(!w.is_nonvanishing());
    }

    #[test]
    fn two_linear_members_can_have_constant_wronskian() {
        let f = PolynomialFamily::new(vec![p(&[0, 1]), p(&[1, 1])]).unwrap();
        assert_eq!(f.wronskian().value, p(&[-1]));
    }

    #[test]
    fn bareiss_matches_cofactor() {
        for d in 1..=6 {
            let m = derivative_matrix(&PolynomialFamily::classical(d).unwrap());
            assert_eq!(determinant_bareiss(&m), determinant_cofactor(&m));
        }
        let f = PolynomialFamily::new(vec![p(&[1, 0, 3]), p(&[0, 2, 0, 1]), p(&[-1, 1])]).unwrap();
        let m = derivative_matrix(&f);
        assert_eq!(determinant_bareiss(&m), determinant_cofactor(&m));
    }

    #[test]
    fn exact_division() {
        let a = &p(&[1, 1]) * &p(&[-2, 0, 3]);
        assert_eq!(a.exact_div(&p(&[1, 1])), Some(p(&[-2, 0, 3])));
        assert_eq!(p(&[1, 0, 1]).exact_div(&p(&[1, 1])), None);
        assert_eq!(p(&[1, 2]).exact_div(&p(&[2])), None);
    }

    #[test]
    fn degree_stats_examples() {
        let c3 = PolynomialFamily::classical(3).unwrap();
        assert_eq!(degree_stats(&c3, 1).unwrap(), DegreeStats { sigma: 5, sigma_tilde: 5 });
        assert_eq!(degree_stats(&c3, 3).unwrap().sigma, 0);
        let f = PolynomialFamily::monomials(&[3, 1, 2]).unwrap();
        assert_eq!(degree_stats(&f, 1).unwrap(), DegreeStats { sigma: 3, sigma_tilde: 5 });
        assert!(degree_stats(&f, 0).is_err());
        assert!(degree_stats(&f, 4).is_err());
    }

    #[test]
    fn case_examples() {
        let c3 = PolynomialFamily::classical(3).unwrap();
        assert_eq!(classify_case(&c3, 2).unwrap(), CaseLabel::B { linear_index: 0 });
        assert_eq!(classify_case(&c3, 1).unwrap(), CaseLabel::B { linear_index: 0 });
        let f = PolynomialFamily::monomials(&[2, 3]).unwrap();
        assert_eq!(classify_case(&f, 1).unwrap(), CaseLabel::C);
        let g = PolynomialFamily::monomials(&[3, 2, 1]).unwrap();
        assert_eq!(classify_case(&g, 1).unwrap(), CaseLabel::A { linear_index: 2 });
    }

    #[test]
    fn reductions() {
        let c3 = PolynomialFamily::classical(3).unwrap();
        let (r, k) = reduce_to_case_a(&c3, 2).unwrap().unwrap();
        assert_eq!(k, 1);
        assert_eq!(r.degrees(), &[2, 1, 3]);
        assert!(matches!(classify_case(&r, k).unwrap(), CaseLabel::A { .. }));
        assert_eq!(reduce_to_case_a(&c3, 1).unwrap(), None);
        let f = PolynomialFamily::monomials(&[2, 3]).unwrap();
        let (r, k) = reduce_to_case_a(&f, 1).unwrap().unwrap();
        assert_eq!((r.degrees(), k), (&[2usize, 3, 1][..], 1));
    }

    #[test]
    fn shift_examples() {
        let u = TorusPoint::from_f64(&[0.3, 0.7]);
        let s = shift_coefficients(&u, 0);
        assert_eq!(s.constant, Phase::ZERO);
        assert_eq!(s.point, u);

        let v = shift_coefficients_real(&[0.0, 0.25], 1);
        assert_eq!(v, vec![0.25, 0.5, 0.25]);

        let a = Phase::from_f64(0.375);
        let s = shift_coefficients(&TorusPoint::new(vec![a]), 5);
        assert_eq!(s.constant, a.scale(5));
        assert_eq!(s.point.coord(0), a);
    }

    #[test]
    fn parse_literals() {
        let f: PolynomialFamily = "[[0,1],[0,0,1]]".parse().unwrap();
        assert_eq!(f, PolynomialFamily::classical(2).unwrap());
        let g: PolynomialFamily = "classical:3".parse().unwrap();
        assert!(g.is_classical());
        assert!("[[1]]".parse::<PolynomialFamily>().is_err());
        assert!("[[0,1.5]]".parse::<PolynomialFamily>().is_err());
        assert!("classical:x".parse::<PolynomialFamily>().is_err());
    }

    #[test]
    fn display() {
        assert_eq!(p(&[1, -2, 0, 3]).to_string(), "3T^3 - 2T + 1");
        assert_eq!(p(&[0, 1]).to_string(), "T");
        assert_eq!(p(&[0, 0, -1]).to_string(), "-T^2");
    }
}
