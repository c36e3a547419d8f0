//! Evaluation kernels for `T(u; N) = sum_{n<=N} a_n e(u_1 phi_1(n) + ... + u_d phi_d(n))`.
//!
//! Phases are carried as 64-bit fixed-point fractions. The phase polynomial
//! `f(n) = sum_j u_j phi_j(n)` is advanced with a forward-difference table
//! whose registers wrap modulo `2^64`, so `f(n)` is bit-identical to a direct
//! evaluation for every `n`. Only the final `e(f(n))` goes through floating
//! point.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_complex::Complex64;
use num_traits::{Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::polyfam::{shift_coefficients, PolynomialFamily};
pub use crate::torus::{Phase, TorusPoint};

/// Hard cap on the number of tuples enumerated by [`vinogradov_count`].
pub const VINOGRADOV_TUPLE_CAP: u64 = 1 << 28;

/// Hard cap on `grid points x N` for [`moment_integral`].
pub const MOMENT_EVALUATION_CAP: u64 = 1 << 32;

#[derive(Debug, Error, PartialEq)]
pub enum ExpSumError {
    #[error("sum length must be at least 1")]
    EmptySum,
    #[error("weight sequence has {have} entries, {needed} required")]
    WeightsTooShort { needed: usize, have: usize },
    #[error("weight a_{n} is not finite")]
    NonFiniteWeight { n: usize },
    #[error("weight a_{n} = {magnitude} exceeds the declared envelope {bound}")]
    EnvelopeViolated { n: usize, magnitude: f64, bound: f64 },
    #[error("point has {have} coordinates, family has {needed} members")]
    DimensionMismatch { needed: usize, have: usize },
    #[error("prefix length {m} outside 1..={n}")]
    PrefixOutOfRange { m: u64, n: u64 },
    #[error("oversampling factor {0} is below 2")]
    OversampleTooSmall(usize),
    #[error("moment order {0} must be a positive even integer")]
    BadMomentOrder(u32),
    #[error("grid on axis {axis} has {have} points, exact quadrature needs {need}")]
    GridTooCoarse { axis: usize, have: usize, need: u128 },
    #[error("workload {needed} exceeds the cap {cap}")]
    BudgetExceeded { needed: u128, cap: u64 },
    #[error("polynomial values overflow the enumeration range")]
    ValueOverflow,
}

/// Polynomial growth envelope `|a_n| <= constant * n^exponent`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub constant: f64,
    pub exponent: f64,
}

/// Complex weights `a_1, a_2, ...`.
#[derive(Clone, Debug, PartialEq)]
pub enum WeightSeq {
    /// `a_n = 1` for every `n`.
    Unit,
    Explicit { values: Vec<Complex64>, envelope: Envelope },
}

impl WeightSeq {
    /// Validates finiteness and the declared envelope.
    pub fn explicit(values: Vec<Complex64>, envelope: Envelope) -> Result<Self, ExpSumError> {
        for (i, a) in values.iter().enumerate() {
            let n = i + 1;
            if !a.re.is_finite() || !a.im.is_finite() {
                return Err(ExpSumError::NonFiniteWeight { n });
            }
            let bound = envelope.constant * (n as f64).powf(envelope.exponent);
            let magnitude = a.norm();
            if magnitude > bound {
                return Err(ExpSumError::EnvelopeViolated { n, magnitude, bound });
            }
        }
        Ok(WeightSeq::Explicit { values, envelope })
    }

    /// `a_n` for `n >= 1`.
    #[inline]
    pub fn get(&self, n: usize) -> Complex64 {
        match self {
            WeightSeq::Unit => Complex64::new(1.0, 0.0),
            WeightSeq::Explicit { values, .. } => values[n - 1],
        }
    }

    pub fn check_len(&self, n: u64) -> Result<(), ExpSumError> {
        if n == 0 {
            return Err(ExpSumError::EmptySum);
        }
        if let WeightSeq::Explicit { values, .. } = self {
            if (values.len() as u64) < n {
                return Err(ExpSumError::WeightsTooShort { needed: n as usize, have: values.len() });
            }
        }
        Ok(())
    }

    /// `sum_{n<=N} |a_n|^2`.
    pub fn l2_squared(&self, n: u64) -> f64 {
        match self {
            WeightSeq::Unit => n as f64,
            WeightSeq::Explicit { values, .. } => values[..n as usize].iter().map(|a| a.norm_sqr()).sum(),
        }
    }

    /// `sum_{n<=N} |a_n|`.
    pub fn l1(&self, n: u64) -> f64 {
        match self {
            WeightSeq::Unit => n as f64,
            WeightSeq::Explicit { values, .. } => values[..n as usize].iter().map(|a| a.norm()).sum(),
        }
    }

    pub fn is_unit(&self) -> bool {
        matches!(self, WeightSeq::Unit)
    }
}

/// `f(n) = sum_j u_j phi_j(n) mod 1` as a single polynomial with
/// coefficients in `Z / 2^64`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhasePolynomial {
    coeffs: Vec<u64>,
}

impl PhasePolynomial {
    pub fn new(fam: &PolynomialFamily, u: &TorusPoint) -> Result<Self, ExpSumError> {
        if u.dim() != fam.d() {
            return Err(ExpSumError::DimensionMismatch { needed: fam.d(), have: u.dim() });
        }
        let mut coeffs = vec![0u64; fam.max_degree() + 1];
        for (p, uj) in fam.polys().iter().zip(u.coords()) {
            for (i, r) in p.residues().into_iter().enumerate() {
                coeffs[i] = coeffs[i].wrapping_add(r.wrapping_mul(uj.0));
            }
        }
        Ok(PhasePolynomial { coeffs })
    }

    pub fn from_coeffs(coeffs: Vec<Phase>) -> Self {
        PhasePolynomial { coeffs: coeffs.into_iter().map(|p| p.0).collect() }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// Direct wrapping Horner evaluation.
    #[inline]
    pub fn eval(&self, n: i64) -> Phase {
        let n = n as u64;
        Phase(self.coeffs.iter().rev().fold(0u64, |acc, &c| acc.wrapping_mul(n).wrapping_add(c)))
    }

    /// Multiplies every coefficient by `g`, i.e. the phase `g f(n)`.
    pub fn scale(&self, g: i64) -> Self {
        PhasePolynomial { coeffs: self.coeffs.iter().map(|c| c.wrapping_mul(g as u64)).collect() }
    }

    /// Adds a constant phase.
    pub fn shifted_by(&self, c: Phase) -> Self {
        let mut coeffs = self.coeffs.clone();
        if coeffs.is_empty() {
            coeffs.push(0);
        }
        coeffs[0] = coeffs[0].wrapping_add(c.0);
        PhasePolynomial { coeffs }
    }

    /// Difference registers positioned at `n = start`.
    pub fn table_at(&self, start: i64) -> PhaseTable {
        let d = self.degree();
        let mut regs: Vec<u64> = (0..=d as i64).map(|i| self.eval(start + i).0).collect();
        // in place: regs[i] <- Delta^i f(start)
        for level in 1..=d {
            for i in (level..=d).rev() {
                regs[i] = regs[i].wrapping_sub(regs[i - 1]);
            }
        }
        PhaseTable { n: start, registers: regs }
    }
}

/// Forward-difference registers `(f(n), Delta f(n), ..., Delta^D f(n))`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhaseTable {
    n: i64,
    registers: Vec<u64>,
}

impl PhaseTable {
    #[inline]
    pub fn current(&self) -> Phase {
        Phase(self.registers[0])
    }

    pub fn position(&self) -> i64 {
        self.n
    }

    pub fn registers(&self) -> Vec<Phase> {
        self.registers.iter().map(|&r| Phase(r)).collect()
    }

    /// Moves from `n` to `n + 1` with `D` wrapping additions.
    #[inline]
    pub fn advance(&mut self) {
        let d = self.registers.len() - 1;
        for i in 0..d {
            self.registers[i] = self.registers[i].wrapping_add(self.registers[i + 1]);
        }
        self.n += 1;
    }
}

/// Registers for `f(n) = sum_j u_j phi_j(n)` positioned at `n = 0`.
pub fn phase_table(fam: &PolynomialFamily, u: &TorusPoint) -> Result<PhaseTable, ExpSumError> {
    Ok(PhasePolynomial::new(fam, u)?.table_at(0))
}

/// Magnitudes of a prefix sum at a power-of-two length.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicPrefix {
    pub m: u64,
    pub magnitude: f64,
    /// `max_{1 <= M' <= m} |T(u; M')|`.
    pub prefix_max: f64,
}

/// A sum together with prefix statistics gathered in the same pass.
#[derive(Clone, Debug, PartialEq)]
pub struct SumTrace {
    pub value: Complex64,
    pub n: u64,
    pub prefix_max: f64,
    pub dyadic: Vec<DyadicPrefix>,
}

impl Serialize for SumTrace {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("SumTrace", 5)?;
        s.serialize_field("value_re", &self.value.re)?;
        s.serialize_field("value_im", &self.value.im)?;
        s.serialize_field("prefix_max", &self.prefix_max)?;
        s.serialize_field("N", &self.n)?;
        s.serialize_field("dyadic", &self.dyadic)?;
        s.end()
    }
}

/// `sum_{i=0}^{count-1} a_{i+1} e(f(start + i))` with prefix bookkeeping.
pub fn weyl_sum_poly(poly: &PhasePolynomial, a: &WeightSeq, start: i64, count: u64) -> Result<SumTrace, ExpSumError> {
    a.check_len(count)?;
    let mut table = poly.table_at(start);
    let mut acc = Complex64::zero();
    let mut prefix_max = 0.0f64;
    let mut dyadic = Vec::new();
    let mut next_dyadic = 1u64;
    for i in 1..=count {
        acc += a.get(i as usize) * table.current().unit();
        table.advance();
        let mag = acc.norm();
        if mag > prefix_max {
            prefix_max = mag;
        }
        if i == next_dyadic {
            dyadic.push(DyadicPrefix { m: i, magnitude: mag, prefix_max });
            next_dyadic <<= 1;
        }
    }
    Ok(SumTrace { value: acc, n: count, prefix_max, dyadic })
}

/// `T_{a,phi}(u; N)` evaluated through the difference table.
pub fn weyl_sum(fam: &PolynomialFamily, u: &TorusPoint, a: &WeightSeq, n: u64) -> Result<SumTrace, ExpSumError> {
    weyl_sum_poly(&PhasePolynomial::new(fam, u)?, a, 1, n)
}

/// The terms `c_n = a_n e(f(n))`, `n = 1..=N`.
pub fn terms(fam: &PolynomialFamily, u: &TorusPoint, a: &WeightSeq, n: u64) -> Result<Vec<Complex64>, ExpSumError> {
    terms_poly(&PhasePolynomial::new(fam, u)?, a, 1, n)
}

pub fn terms_poly(poly: &PhasePolynomial, a: &WeightSeq, start: i64, count: u64) -> Result<Vec<Complex64>, ExpSumError> {
    a.check_len(count)?;
    let mut table = poly.table_at(start);
    let mut out = Vec::with_capacity(count as usize);
    for i in 1..=count {
        out.push(a.get(i as usize) * table.current().unit());
        table.advance();
    }
    Ok(out)
}

/// `S_d(u; M, N) = sum_{n=M+1}^{M+N} e(u_1 n + ... + u_d n^d)`, evaluated on
/// the shifted coefficients `(v_1, ..., v_{d-1}, u_d)` with `e(v_0)` applied
/// as a global factor.
pub fn short_interval_sum(u: &TorusPoint, m: i64, n: u64) -> Result<Complex64, ExpSumError> {
    let d = u.dim();
    let fam = PolynomialFamily::classical(d.max(1)).expect("d >= 1");
    let shifted = shift_coefficients(u, m);
    let trace = weyl_sum(&fam, &shifted.point, &WeightSeq::Unit, n)?;
    Ok(shifted.constant.unit() * trace.value)
}

/// The majorant `W(u; N)` and optionally the transform magnitudes `|X_h|`.
#[derive(Clone, Debug, PartialEq)]
pub struct CompletionResult {
    pub w: f64,
    pub dft_magnitudes: Option<Vec<f64>>,
}

impl Serialize for CompletionResult {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("CompletionResult", 2)?;
        s.serialize_field("W", &self.w)?;
        s.serialize_field("dft_magnitudes", &self.dft_magnitudes)?;
        s.end()
    }
}

fn twiddles(n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|m| {
            let (s, c) = (TAU * m as f64 / n as f64).sin_cos();
            Complex64::new(c, s)
        })
        .collect()
}

/// `sum_{h=-N}^{N} |X_{h mod N}| / (|h| + 1)` from the `N` values `|X_h|`.
fn kernel_weighted(mags: &[f64]) -> f64 {
    let n = mags.len() as i64;
    (-n..=n)
        .map(|h| mags[h.rem_euclid(n) as usize] / (h.unsigned_abs() as f64 + 1.0))
        .sum()
}

/// Reference `O(N^2)` evaluation of the completion majorant.
pub fn completion_naive(
    fam: &PolynomialFamily,
    u: &TorusPoint,
    a: &WeightSeq,
    n: u64,
) -> Result<CompletionResult, ExpSumError> {
    let c = terms(fam, u, a, n)?;
    let len = n as usize;
    let tw = twiddles(len);
    let mags: Vec<f64> = (0..len)
        .map(|h| {
            c.iter()
                .enumerate()
                .map(|(i, cn)| cn * tw[(h * (i + 1)) % len])
                .sum::<Complex64>()
                .norm()
        })
        .collect();
    // the kernel runs over h = -N..=N; each |h| maps to a residue class
    let w = (-(len as i64)..=len as i64)
        .map(|h| {
            let s: Complex64 = c
                .iter()
                .enumerate()
                .map(|(i, cn)| cn * tw[((h * (i as i64 + 1)).rem_euclid(len as i64)) as usize])
                .sum();
            s.norm() / (h.unsigned_abs() as f64 + 1.0)
        })
        .sum();
    Ok(CompletionResult { w, dft_magnitudes: Some(mags) })
}

/// Length-`N` transform `X_h = sum_n c_n e(hn/N)` with a cached plan.
/// Not shared between threads; build one per worker.
pub struct CompletionKernel {
    len: usize,
    fft: Arc<dyn Fft<f64>>,
    buffer: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl CompletionKernel {
    pub fn new(len: usize) -> Self {
        assert!(len >= 1);
        let fft = FftPlanner::new().plan_fft_inverse(len);
        let scratch = vec![Complex64::zero(); fft.get_inplace_scratch_len()];
        CompletionKernel { len, fft, buffer: vec![Complex64::zero(); len], scratch }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Fills `X_0, ..., X_{N-1}` from `c_1, ..., c_N`.
    pub fn transform(&mut self, c: &[Complex64]) -> &[Complex64] {
        assert_eq!(c.len(), self.len);
        let len = self.len;
        for (i, cn) in c.iter().enumerate() {
            self.buffer[(i + 1) % len] = *cn;
        }
        self.fft.process_with_scratch(&mut self.buffer, &mut self.scratch);
        &self.buffer
    }

    /// `W` from the terms `c_n`.
    pub fn majorant(&mut self, c: &[Complex64]) -> f64 {
        let x = self.transform(c);
        let n = x.len() as i64;
        (-n..=n)
            .map(|h| x[h.rem_euclid(n) as usize].norm() / (h.unsigned_abs() as f64 + 1.0))
            .sum()
    }
}

/// `O(N log N)` evaluation of the completion majorant through one FFT.
pub fn completion_fft(
    fam: &PolynomialFamily,
    u: &TorusPoint,
    a: &WeightSeq,
    n: u64,
) -> Result<CompletionResult, ExpSumError> {
    let c = terms(fam, u, a, n)?;
    let mut kernel = CompletionKernel::new(n as usize);
    let mags: Vec<f64> = kernel.transform(&c).iter().map(|x| x.norm()).collect();
    let w = kernel_weighted(&mags);
    Ok(CompletionResult { w, dft_magnitudes: Some(mags) })
}

/// Recovers `T(u; M)` from the length-`N` transform by orthogonality:
/// `T(u; M) = (1/N) sum_{h=1}^{N} (sum_{k=1}^{M} e(-hk/N)) X_h`.
pub fn reconstruct_prefix(
    fam: &PolynomialFamily,
    u: &TorusPoint,
    a: &WeightSeq,
    n: u64,
    m: u64,
) -> Result<Complex64, ExpSumError> {
    if m == 0 || m > n {
        return Err(ExpSumError::PrefixOutOfRange { m, n });
    }
    let c = terms(fam, u, a, n)?;
    let len = n as usize;
    let mut kernel = CompletionKernel::new(len);
    let x = kernel.transform(&c).to_vec();
    let tw = twiddles(len);
    let mut total = Complex64::zero();
    for h in 1..=len {
        let g: Complex64 = (1..=m as usize).map(|k| tw[(h * k) % len].conj()).sum();
        total += g * x[h % len];
    }
    Ok(total / len as f64)
}

/// Every prefix `T(u; 1), ..., T(u; N)` through the same identity, `O(N^2)`.
pub fn reconstruct_all_prefixes(
    fam: &PolynomialFamily,
    u: &TorusPoint,
    a: &WeightSeq,
    n: u64,
) -> Result<Vec<Complex64>, ExpSumError> {
    let c = terms(fam, u, a, n)?;
    let len = n as usize;
    let mut kernel = CompletionKernel::new(len);
    let x = kernel.transform(&c).to_vec();
    let tw = twiddles(len);
    // geometric partial sums G_h(M), advanced one k at a time
    let mut g = vec![Complex64::zero(); len + 1];
    let mut out = Vec::with_capacity(len);
    for k in 1..=len {
        let mut total = Complex64::zero();
        for h in 1..=len {
            g[h] += tw[(h * k) % len].conj();
            total += g[h] * x[h % len];
        }
        out.push(total / len as f64);
    }
    Ok(out)
}

/// Supremum over `y` of `|sum_n c_n e(yn)|` on an oversampled grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearSup {
    pub grid_max: f64,
    /// `grid_max` plus the Lipschitz slack over half a grid step.
    pub certified_upper: f64,
    pub argmax_y: f64,
}

pub fn sup_linear_coeff(c: &[Complex64], oversample: usize) -> Result<LinearSup, ExpSumError> {
    if c.is_empty() {
        return Err(ExpSumError::EmptySum);
    }
    if oversample < 2 {
        return Err(ExpSumError::OversampleTooSmall(oversample));
    }
    let n = c.len();
    let len = oversample * n;
    let mut buf = vec![Complex64::zero(); len];
    buf[1..=n].copy_from_slice(c);
    FftPlanner::new().plan_fft_inverse(len).process(&mut buf);
    let (argmax, grid_max) = buf
        .iter()
        .map(|z| z.norm())
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (j, v)| if v > best.1 { (j, v) } else { best });
    let l1: f64 = c.iter().map(|z| z.norm()).sum();
    // |g(y) - g(y')| <= 2 pi |y - y'| N sum |c_n|, and every y is within 1/(2L) of the grid
    let slack = TAU * (0.5 / len as f64) * n as f64 * l1;
    Ok(LinearSup { grid_max, certified_upper: grid_max + slack, argmax_y: argmax as f64 / len as f64 })
}

/// Elementary perturbation bound `2 pi sum_n |a_n| sum_j |v_j - u_j| |phi_j(n)|`,
/// with each difference taken as its representative in `[-1/2, 1/2)`.
pub fn perturbation_bound(
    fam: &PolynomialFamily,
    u: &TorusPoint,
    v: &TorusPoint,
    a: &WeightSeq,
    n: u64,
) -> Result<f64, ExpSumError> {
    a.check_len(n)?;
    let deltas: Vec<f64> = u
        .coords()
        .iter()
        .zip(v.coords())
        .map(|(x, y)| y.wrapping_sub(*x).to_signed_f64().abs())
        .collect();
    let mut total = 0.0;
    for i in 1..=n {
        let mut inner = 0.0;
        for (p, delta) in fam.polys().iter().zip(&deltas) {
            let val = p.evaluate_i64(i as i64).abs().to_f64().unwrap_or(f64::INFINITY);
            inner += delta * val;
        }
        total += a.get(i as usize).norm() * inner;
    }
    Ok(TAU * total)
}

/// Number of solutions of `sum_{i<=s} n_i^j = sum_{i<=s} m_i^j`, `1 <= j <= d`,
/// with all variables in `[1, N]`.
pub fn vinogradov_count(d: usize, s: usize, n: u64) -> Result<BigUint, ExpSumError> {
    let fam = PolynomialFamily::classical(d).map_err(|_| ExpSumError::DimensionMismatch { needed: 1, have: 0 })?;
    vinogradov_count_family(&fam, s, n)
}

/// Same count for the system built from a general family: enumerates every
/// ordered `s`-tuple, keys it by its vector of value sums and returns the sum
/// of squared multiplicities.
pub fn vinogradov_count_family(fam: &PolynomialFamily, s: usize, n: u64) -> Result<BigUint, ExpSumError> {
    if n == 0 || s == 0 {
        return Err(ExpSumError::EmptySum);
    }
    let tuples = (n as u128).checked_pow(s as u32).unwrap_or(u128::MAX);
    if tuples > VINOGRADOV_TUPLE_CAP as u128 {
        return Err(ExpSumError::BudgetExceeded { needed: tuples, cap: VINOGRADOV_TUPLE_CAP });
    }
    let d = fam.d();
    let values: Vec<Vec<i128>> = (1..=n as i64)
        .map(|x| {
            fam.polys()
                .iter()
                .map(|p| p.evaluate_i64(x).to_i128().ok_or(ExpSumError::ValueOverflow))
                .collect()
        })
        .collect::<Result<_, _>>()?;

    let mut counts: HashMap<Vec<i128>, u64> = HashMap::new();
    let mut idx = vec![0usize; s];
    // partial[i] holds the sums over the first i coordinates of the tuple
    let mut partial = vec![vec![0i128; d]; s + 1];
    let mut level = 0;
    loop {
        if level == s {
            *counts.entry(partial[s].clone()).or_insert(0) += 1;
            level -= 1;
            idx[level] += 1;
            continue;
        }
        if idx[level] == n as usize {
            if level == 0 {
                break;
            }
            idx[level] = 0;
            level -= 1;
            idx[level] += 1;
            continue;
        }
        let (lo, hi) = partial.split_at_mut(level + 1);
        for j in 0..d {
            hi[0][j] = lo[level][j]
                .checked_add(values[idx[level]][j])
                .ok_or(ExpSumError::ValueOverflow)?;
        }
        level += 1;
    }
    let total: u128 = counts.values().map(|&c| (c as u128) * (c as u128)).sum();
    Ok(BigUint::from(total))
}

/// Smallest per-axis grid on which the uniform quadrature of `|T|^{2s}` is
/// exact: `s * (max phi_j - min phi_j) + 1` points on axis `j`.
pub fn exact_moment_grid(fam: &PolynomialFamily, n: u64, two_s: u32) -> Result<Vec<u128>, ExpSumError> {
    if two_s == 0 || !two_s.is_multiple_of(2) {
        return Err(ExpSumError::BadMomentOrder(two_s));
    }
    let s = (two_s / 2) as i128;
    fam.polys()
        .iter()
        .map(|p| {
            let vals: Vec<BigInt> = (1..=n as i64).map(|x| p.evaluate_i64(x)).collect();
            let lo = vals.iter().min().cloned().unwrap_or_default();
            let hi = vals.iter().max().cloned().unwrap_or_default();
            let spread = (hi - lo).to_i128().ok_or(ExpSumError::ValueOverflow)?;
            s.checked_mul(spread)
                .and_then(|v| v.checked_add(1))
                .map(|v| v as u128)
                .ok_or(ExpSumError::ValueOverflow)
        })
        .collect()
}

/// `int_{T_d} |T(u; N)|^{2s} du` by the uniform rule on `grid[0] x ... x grid[d-1]`
/// points. The rule is exact (up to rounding) because `|T|^{2s}` is a
/// trigonometric polynomial whose frequency on axis `j` is bounded by
/// `s * (max phi_j - min phi_j)`; coarser grids are rejected.
pub fn moment_integral(
    fam: &PolynomialFamily,
    a: &WeightSeq,
    n: u64,
    two_s: u32,
    grid: &[usize],
) -> Result<f64, ExpSumError> {
    a.check_len(n)?;
    let d = fam.d();
    if grid.len() != d {
        return Err(ExpSumError::DimensionMismatch { needed: d, have: grid.len() });
    }
    let need = exact_moment_grid(fam, n, two_s)?;
    for (axis, (&have, &need)) in grid.iter().zip(&need).enumerate() {
        if (have as u128) < need {
            return Err(ExpSumError::GridTooCoarse { axis, have, need });
        }
    }
    let points: u128 = grid.iter().map(|&g| g as u128).product();
    let work = points * n as u128;
    if work > MOMENT_EVALUATION_CAP as u128 {
        return Err(ExpSumError::BudgetExceeded { needed: work, cap: MOMENT_EVALUATION_CAP });
    }

    let len = n as usize;
    // residues phi_j(n) mod grid_j and per-axis roots of unity
    let residues: Vec<Vec<usize>> = fam
        .polys()
        .iter()
        .zip(grid)
        .map(|(p, &g)| {
            let g = BigInt::from(g);
            (1..=n as i64)
                .map(|x| {
                    let r = p.evaluate_i64(x) % &g;
                    let r = if r.is_negative() { r + &g } else { r };
                    r.to_usize().expect("residue below grid size")
                })
                .collect()
        })
        .collect();
    let roots: Vec<Vec<Complex64>> = grid.iter().map(|&g| twiddles(g)).collect();
    let base: Vec<Complex64> = (1..=len).map(|i| a.get(i)).collect();

    let axis0 = |i0: usize| -> f64 {
        let mut partial = vec![base.clone(); d + 1];
        for (t, r) in residues[0].iter().enumerate() {
            partial[1][t] = base[t] * roots[0][(i0 * r) % grid[0]];
        }
        moment_rec(&residues, &roots, grid, 1, &mut partial, two_s as i32)
    };
    let sums: Vec<f64> = (0..grid[0]).into_par_iter().map(axis0).collect();
    Ok(sums.iter().sum::<f64>() / points as f64)
}

fn moment_rec(
    residues: &[Vec<usize>],
    roots: &[Vec<Complex64>],
    grid: &[usize],
    axis: usize,
    partial: &mut [Vec<Complex64>],
    power: i32,
) -> f64 {
    let d = grid.len();
    if axis == d {
        return partial[d].iter().sum::<Complex64>().norm().powi(power);
    }
    let mut total = 0.0;
    for i in 0..grid[axis] {
        let (lo, hi) = partial.split_at_mut(axis + 1);
        for (t, r) in residues[axis].iter().enumerate() {
            hi[0][t] = lo[axis][t] * roots[axis][(i * r) % grid[axis]];
        }
        total += moment_rec(residues, roots, grid, axis + 1, partial, power);
    }
    total
}

/// `max_M |T(u;M)| / W(u;N)`, exposed for study; nothing is asserted about it.
pub fn control_ratio(trace: &SumTrace, completion: &CompletionResult) -> f64 {
    trace.prefix_max / completion.w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyfam::IntPolynomial;

    fn classical(d: usize) -> PolynomialFamily {
        PolynomialFamily::classical(d).unwrap()
    }

    #[test]
    fn phase_table_examples() {
        let t = phase_table(&classical(2), &TorusPoint::zero(2)).unwrap();
        assert!(t.registers().iter().all(|r| *r == Phase::ZERO));

        let t = phase_table(&classical(1), &TorusPoint::from_f64(&[0.5])).unwrap();
        assert_eq!(t.registers(), vec![Phase::ZERO, Phase::from_f64(0.5)]);

        let mut t = phase_table(&classical(2), &TorusPoint::from_f64(&[0.25, 0.25])).unwrap();
        t.advance();
        assert_eq!(t.current(), Phase::from_f64(0.5));
        t.advance();
        assert_eq!(t.current(), Phase::from_f64(0.5));
    }

    #[test]
    fn table_matches_direct_evaluation_for_negative_starts() {
        let fam = PolynomialFamily::new(vec![
            IntPolynomial::from_i64(&[3, -1, 0, 2]),
            IntPolynomial::from_i64(&[0, 5, 1]),
        ])
        .unwrap();
        let u = TorusPoint::from_raw(&[0x9e37_79b9_7f4a_7c15, 0x2545_f491_4f6c_dd1d]);
        let poly = PhasePolynomial::new(&fam, &u).unwrap();
        let mut t = poly.table_at(-40);
        for n in -40..200 {
            assert_eq!(t.current(), poly.eval(n));
            t.advance();
        }
    }

    #[test]
    fn weyl_sum_examples() {
        let tr = weyl_sum(&classical(3), &TorusPoint::zero(3), &WeightSeq::Unit, 17).unwrap();
        assert!((tr.value - Complex64::new(17.0, 0.0)).norm() < 1e-12);
        assert!((tr.prefix_max - 17.0).abs() < 1e-12);

        let tr = weyl_sum(&classical(2), &TorusPoint::from_f64(&[0.5, 0.5]), &WeightSeq::Unit, 33).unwrap();
        assert!((tr.value - Complex64::new(33.0, 0.0)).norm() < 1e-12);

        let u = TorusPoint::new(vec![Phase::from_ratio(1, 3)]);
        let tr = weyl_sum(&classical(1), &u, &WeightSeq::Unit, 3).unwrap();
        assert!(tr.value.norm() < 1e-12);
    }

    #[test]
    fn weyl_sum_errors() {
        let short = WeightSeq::explicit(vec![Complex64::new(1.0, 0.0); 3], Envelope { constant: 1.0, exponent: 0.0 }).unwrap();
        assert_eq!(
            weyl_sum(&classical(1), &TorusPoint::zero(1), &short, 4).unwrap_err(),
            ExpSumError::WeightsTooShort { needed: 4, have: 3 }
        );
        assert_eq!(
            weyl_sum(&classical(1), &TorusPoint::zero(1), &WeightSeq::Unit, 0).unwrap_err(),
            ExpSumError::EmptySum
        );
        assert!(weyl_sum(&classical(2), &TorusPoint::zero(1), &WeightSeq::Unit, 4).is_err());
    }

    #[test]
    fn envelope_is_enforced() {
        let env = Envelope { constant: 1.0, exponent: 1.0 };
        assert!(WeightSeq::explicit(vec![Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0)], env).is_ok());
        assert!(matches!(
            WeightSeq::explicit(vec![Complex64::new(1.5, 0.0)], env),
            Err(ExpSumError::EnvelopeViolated { n: 1, .. })
        ));
        assert!(matches!(
            WeightSeq::explicit(vec![Complex64::new(f64::NAN, 0.0)], env),
            Err(ExpSumError::NonFiniteWeight { n: 1 })
        ));
    }

    #[test]
    fn dyadic_prefixes_are_recorded() {
        let tr = weyl_sum(&classical(2), &TorusPoint::from_f64(&[0.1, 0.37]), &WeightSeq::Unit, 40).unwrap();
        let ms: Vec<u64> = tr.dyadic.iter().map(|p| p.m).collect();
        assert_eq!(ms, vec![1, 2, 4, 8, 16, 32]);
        assert!(tr.dyadic.windows(2).all(|w| w[0].prefix_max <= w[1].prefix_max));
        assert!(tr.prefix_max >= tr.value.norm());
    }

    #[test]
    fn short_interval_examples() {
        let u = TorusPoint::from_f64(&[0.3, 0.1]);
        let full = weyl_sum(&classical(2), &u, &WeightSeq::Unit, 10).unwrap().value;
        assert!((short_interval_sum(&u, 0, 10).unwrap() - full).norm() < 1e-12);
        assert!((short_interval_sum(&TorusPoint::zero(3), 77, 9).unwrap() - Complex64::new(9.0, 0.0)).norm() < 1e-12);
        // e(4/4) + e(9/4) = 1 + i
        let s = short_interval_sum(&TorusPoint::from_f64(&[0.0, 0.25]), 1, 2).unwrap();
        assert!((s - Complex64::new(1.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn completion_closed_form_at_zero() {
        for n in [1u64, 2, 5, 16, 33] {
            let expected = n as f64 + 2.0 * n as f64 / (n as f64 + 1.0);
            let naive = completion_naive(&classical(2), &TorusPoint::zero(2), &WeightSeq::Unit, n).unwrap();
            let fft = completion_fft(&classical(2), &TorusPoint::zero(2), &WeightSeq::Unit, n).unwrap();
            assert!((naive.w - expected).abs() < 1e-9 * expected, "n={n}");
            assert!((fft.w - expected).abs() < 1e-9 * expected, "n={n}");
        }
    }

    #[test]
    fn completion_single_term() {
        let a = WeightSeq::explicit(vec![Complex64::new(0.0, 3.0)], Envelope { constant: 3.0, exponent: 0.0 }).unwrap();
        let u = TorusPoint::from_f64(&[0.123]);
        for r in [
            completion_naive(&classical(1), &u, &a, 1).unwrap(),
            completion_fft(&classical(1), &u, &a, 1).unwrap(),
        ] {
            assert!((r.w - 6.0).abs() < 1e-12);
        }
    }

    #[test]
    fn completion_unit_n2_both_ways() {
        let u = TorusPoint::from_f64(&[0.31, 0.77]);
        let naive = completion_naive(&classical(2), &u, &WeightSeq::Unit, 2).unwrap();
        let fft = completion_fft(&classical(2), &u, &WeightSeq::Unit, 2).unwrap();
        assert!((naive.w - fft.w).abs() < 1e-12);
    }

    #[test]
    fn reconstruct_examples() {
        let n = 32;
        let z = reconstruct_prefix(&classical(2), &TorusPoint::zero(2), &WeightSeq::Unit, n, n).unwrap();
        assert!((z - Complex64::new(n as f64, 0.0)).norm() < 1e-9);
        let u = TorusPoint::from_f64(&[0.41, 0.13]);
        let first = reconstruct_prefix(&classical(2), &u, &WeightSeq::Unit, n, 1).unwrap();
        let direct = PhasePolynomial::new(&classical(2), &u).unwrap().eval(1).unit();
        assert!((first - direct).norm() < 1e-10);
        assert!(reconstruct_prefix(&classical(2), &u, &WeightSeq::Unit, n, 0).is_err());
        assert!(reconstruct_prefix(&classical(2), &u, &WeightSeq::Unit, n, n + 1).is_err());
    }

    #[test]
    fn sup_linear_examples() {
        let ones = vec![Complex64::new(1.0, 0.0); 50];
        let s = sup_linear_coeff(&ones, 4).unwrap();
        assert!((s.grid_max - 50.0).abs() < 1e-9);
        assert_eq!(s.argmax_y, 0.0);
        assert!(s.certified_upper >= 50.0);

        let n = 20;
        let l = 3 * n;
        let y0 = Phase::from_ratio(7, l as u64);
        let c: Vec<Complex64> = (1..=n as i64).map(|k| y0.scale(-k).unit()).collect();
        let s = sup_linear_coeff(&c, 3).unwrap();
        assert!((s.grid_max - n as f64).abs() < 1e-9);
        assert!((s.argmax_y - 7.0 / l as f64).abs() < 1e-12);

        assert_eq!(sup_linear_coeff(&ones, 1).unwrap_err(), ExpSumError::OversampleTooSmall(1));
        assert_eq!(sup_linear_coeff(&[], 2).unwrap_err(), ExpSumError::EmptySum);
    }

    #[test]
    fn vinogradov_examples() {
        assert_eq!(vinogradov_count(3, 1, 9).unwrap(), BigUint::from(9u32));
        assert_eq!(vinogradov_count(1, 2, 2).unwrap(), BigUint::from(6u32));
        assert_eq!(vinogradov_count(2, 3, 16).unwrap(), BigUint::from(27304u32));
        // s = 2, d = 2: only diagonal solutions, 2N^2 - N of them
        assert_eq!(vinogradov_count(2, 2, 10).unwrap(), BigUint::from(190u32));
        assert!(matches!(vinogradov_count(2, 5, 64), Err(ExpSumError::BudgetExceeded { .. })));
    }

    #[test]
    fn moment_examples() {
        let fam = classical(2);
        let grid = exact_moment_grid(&fam, 8, 2).unwrap();
        let grid: Vec<usize> = grid.iter().map(|&g| g as usize).collect();
        let v = moment_integral(&fam, &WeightSeq::Unit, 8, 2, &grid).unwrap();
        assert!((v - 8.0).abs() < 1e-9);

        let a = WeightSeq::explicit(vec![Complex64::new(0.6, 0.8) * 2.0], Envelope { constant: 2.0, exponent: 0.0 }).unwrap();
        let v = moment_integral(&fam, &a, 1, 6, &[1, 1]).unwrap();
        assert!((v - 64.0).abs() < 1e-9);

        assert!(matches!(
            moment_integral(&fam, &WeightSeq::Unit, 8, 6, &[4, 4]),
            Err(ExpSumError::GridTooCoarse { axis: 0, .. })
        ));
        assert_eq!(
            moment_integral(&fam, &WeightSeq::Unit, 8, 3, &[64, 512]).unwrap_err(),
            ExpSumError::BadMomentOrder(3)
        );
    }

    #[test]
    fn sum_trace_json_field_names() {
        let tr = weyl_sum(&classical(1), &TorusPoint::zero(1), &WeightSeq::Unit, 2).unwrap();
        let v = serde_json::to_value(&tr).unwrap();
        for key in ["value_re", "value_im", "prefix_max", "N"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        let c = completion_fft(&classical(1), &TorusPoint::zero(1), &WeightSeq::Unit, 2).unwrap();
        assert!(serde_json::to_value(&c).unwrap().get("W").is_some());
    }
}
