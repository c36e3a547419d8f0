//! Box census of large values of the completion majorant `W(u; N)` and
//! orthogonal projections of the marked boxes.
//!
//! The torus is cut into boxes with side `zeta_j = 1 / ceil(N^{e_j + 1 + eps - alpha})`
//! along axis `j`. A box is marked when some sampled point has `W >= N^alpha`.

use std::collections::HashSet;

use num_bigint::BigUint;
use num_complex::Complex64;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exponents::{decimal, Rational};
use crate::expsum::{CompletionKernel, ExpSumError, PhasePolynomial, WeightSeq};
use crate::polyfam::PolynomialFamily;
use crate::torus::{Phase, TorusPoint};

/// Default cap on the number of boxes.
pub const DEFAULT_BOX_BUDGET: u128 = 1 << 24;

/// Relative slack for floating-point rounding in the identity-level checks.
const ROUNDING_SLACK: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum CensusError {
    #[error("alpha must lie strictly between 0 and 1")]
    AlphaOutOfRange,
    #[error("epsilon must be positive")]
    EpsilonNotPositive,
    #[error("N must be at least 1")]
    EmptySum,
    #[error("grid needs {needed} boxes, budget is {budget}")]
    BudgetExceeded { needed: String, budget: u128 },
    #[error("at least one sample per box is required")]
    NoSamples,
    #[error("Markov inequality violated: {count} values above the threshold, moment {moment}")]
    MarkovViolated { count: u64, moment: f64 },
    #[error("basis is not orthonormal: {0}")]
    NotOrthonormal(String),
    #[error("basis vectors have {have} components, grid has dimension {needed}")]
    DimensionMismatch { needed: usize, have: usize },
    #[error("per-box bound is defined for one-dimensional projections only")]
    NotOneDimensional,
    #[error("projected measure {measure} exceeds the per-box bound {bound}")]
    ProjectionExceedsBound { measure: f64, bound: f64 },
    #[error("box index {0} outside the grid")]
    BoxOutOfRange(u64),
    #[error(transparent)]
    Sum(#[from] ExpSumError),
}

/// Partition of `[0, 1)^d` into `U = prod_j m_j` boxes of side `zeta_j = 1/m_j`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoxGrid {
    pub d: usize,
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(serialize_with = "ser_rational")]
    pub alpha: Rational,
    #[serde(serialize_with = "ser_rational")]
    pub epsilon: Rational,
    pub degrees: Vec<usize>,
    /// `m_j = 1 / zeta_j`.
    pub divisions: Vec<u64>,
    /// `U`.
    pub total: u64,
}

fn ser_rational<S: serde::Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&r.to_string())
}

impl BoxGrid {
    pub fn side(&self, j: usize) -> f64 {
        1.0 / self.divisions[j] as f64
    }

    pub fn sides(&self) -> Vec<f64> {
        (0..self.d).map(|j| self.side(j)).collect()
    }

    pub fn side_rational(&self, j: usize) -> Rational {
        Rational::new(1.into(), self.divisions[j].into())
    }

    /// Per-axis cell indices of box `b`; axis 0 varies slowest.
    pub fn cell(&self, mut b: u64) -> Vec<u64> {
        let mut out = vec![0; self.d];
        for j in (0..self.d).rev() {
            out[j] = b % self.divisions[j];
            b /= self.divisions[j];
        }
        out
    }

    pub fn index(&self, cell: &[u64]) -> u64 {
        cell.iter().zip(&self.divisions).fold(0, |acc, (&c, &m)| acc * m + c)
    }

    /// Lower corner of box `b`.
    pub fn corner(&self, b: u64) -> Vec<f64> {
        self.cell(b).iter().zip(&self.divisions).map(|(&c, &m)| c as f64 / m as f64).collect()
    }

    /// Center of box `b` as an exactly rounded torus point.
    pub fn center(&self, b: u64) -> TorusPoint {
        TorusPoint::new(
            self.cell(b)
                .iter()
                .zip(&self.divisions)
                .map(|(&c, &m)| Phase::from_ratio(2 * c as i64 + 1, 2 * m))
                .collect(),
        )
    }

    /// `N^alpha` rounded to a double.
    pub fn threshold(&self) -> f64 {
        (self.n as f64).powf(self.alpha.to_f64().expect("finite"))
    }
}

/// Smallest `m` with `m^den >= N^num`, i.e. `ceil(N^{num/den})`.
pub fn ceil_rational_power(n: u64, exponent: &Rational) -> Option<u64> {
    let num = exponent.numer().to_u32()?;
    let den = exponent.denom().to_u32()?;
    let target = num_traits::pow(BigUint::from(n), num as usize);
    let estimate = (n as f64).powf(num as f64 / den as f64);
    if !estimate.is_finite() || estimate > 9.0e15 {
        return None;
    }
    let fits = |m: u64| num_traits::pow(BigUint::from(m), den as usize) >= target;
    let mut m = (estimate.ceil() as u64).max(1);
    while m > 1 && fits(m - 1) {
        m -= 1;
    }
    while !fits(m) {
        m += 1;
    }
    Some(m)
}

/// Exact box sides for `(family, N, alpha, eps)`; the ceiling is taken on the
/// exact real power, so `zeta_j` is never larger than the formula allows.
pub fn grid_sides(
    fam: &PolynomialFamily,
    n: u64,
    alpha: &Rational,
    epsilon: &Rational,
    budget: u128,
) -> Result<BoxGrid, CensusError> {
    if n == 0 {
        return Err(CensusError::EmptySum);
    }
    if alpha <= &Rational::zero() || alpha >= &Rational::one() {
        return Err(CensusError::AlphaOutOfRange);
    }
    if epsilon <= &Rational::zero() {
        return Err(CensusError::EpsilonNotPositive);
    }
    let over = |needed: String| CensusError::BudgetExceeded { needed, budget };
    let mut divisions = Vec::with_capacity(fam.d());
    let mut total: u128 = 1;
    for &e in fam.degrees() {
        let exponent = Rational::from_integer((e as u64 + 1).into()) + epsilon - alpha;
        let m = ceil_rational_power(n, &exponent)
            .ok_or_else(|| over(format!("N^{}", decimal(&exponent, 4))))?;
        total = total.saturating_mul(m as u128);
        if total > budget {
            return Err(over(format!(">= {total}")));
        }
        divisions.push(m);
    }
    Ok(BoxGrid {
        d: fam.d(),
        n,
        alpha: alpha.clone(),
        epsilon: epsilon.clone(),
        degrees: fam.degrees().to_vec(),
        divisions,
        total: total as u64,
    })
}

/// Outcome of a census at one `N`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CensusResult {
    #[serde(rename = "N")]
    pub n: u64,
    pub alpha: f64,
    pub threshold: f64,
    pub marked: u64,
    #[serde(rename = "U")]
    pub total: u64,
    pub samples_per_box: u32,
    /// `2 s(d)`.
    pub moment_order: u32,
    /// Mean of `|W|^{2 s(d)}` over all samples.
    pub empirical_moment: f64,
    /// Samples with `|W| >= N^alpha`.
    pub samples_above: u64,
    pub marked_boxes: Vec<u64>,
    /// Largest sampled `|W|` in each box, by box index.
    #[serde(skip)]
    pub box_max: Vec<f64>,
}

impl CensusResult {
    /// Number of boxes whose sampled maximum reaches `threshold`.
    pub fn marked_at(&self, threshold: f64) -> u64 {
        self.box_max.iter().filter(|&&v| v >= threshold).count() as u64
    }
}

struct BoxOutcome {
    max: f64,
    above: u64,
    moment: f64,
}

/// Uniform point in box `b`, coordinates quantized to 64-bit phases.
fn sample_in_box(grid: &BoxGrid, cell: &[u64], rng: &mut ChaCha8Rng) -> TorusPoint {
    TorusPoint::new(
        cell.iter()
            .zip(&grid.divisions)
            .map(|(&c, &m)| {
                let r: f64 = rng.gen();
                Phase::from_f64((c as f64 + r) / m as f64)
            })
            .collect(),
    )
}

/// Marks boxes where the sampled majorant reaches `N^alpha`. Box `b` uses
/// its center and `samples_per_box - 1` points from the ChaCha stream `b`
/// of `seed`, so the result does not depend on scheduling.
pub fn census(
    fam: &PolynomialFamily,
    a: &WeightSeq,
    grid: &BoxGrid,
    samples_per_box: u32,
    seed: u64,
) -> Result<CensusResult, CensusError> {
    if samples_per_box == 0 {
        return Err(CensusError::NoSamples);
    }
    a.check_len(grid.n)?;
    let n = grid.n as usize;
    let threshold = grid.threshold();
    let d = fam.d() as u32;
    let two_s = d * (d + 1);
    let weights: Vec<Complex64> = (1..=n).map(|i| a.get(i)).collect();

    let outcomes: Vec<BoxOutcome> = (0..grid.total)
        .into_par_iter()
        .map_init(
            || (CompletionKernel::new(n), vec![Complex64::zero(); n]),
            |(kernel, terms), b| {
                let cell = grid.cell(b);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(b);
                let mut out = BoxOutcome { max: 0.0, above: 0, moment: 0.0 };
                for s in 0..samples_per_box {
                    let u = if s == 0 { grid.center(b) } else { sample_in_box(grid, &cell, &mut rng) };
                    let poly = PhasePolynomial::new(fam, &u).expect("dimensions checked");
                    let mut table = poly.table_at(1);
                    for (t, w) in terms.iter_mut().zip(&weights) {
                        *t = w * table.current().unit();
                        table.advance();
                    }
                    let v = kernel.majorant(terms);
                    out.max = out.max.max(v);
                    out.moment += v.powi(two_s as i32);
                    if v >= threshold {
                        out.above += 1;
                    }
                }
                out
            },
        )
        .collect();

    let mut marked_boxes = Vec::new();
    let mut moment_sum = 0.0;
    let mut samples_above = 0;
    for (b, o) in outcomes.iter().enumerate() {
        if o.max >= threshold {
            marked_boxes.push(b as u64);
        }
        moment_sum += o.moment;
        samples_above += o.above;
    }
    markov_check_aggregate(samples_above, moment_sum, threshold, two_s)?;
    let samples = grid.total as f64 * samples_per_box as f64;
    Ok(CensusResult {
        n: grid.n,
        alpha: grid.alpha.to_f64().expect("finite"),
        threshold,
        marked: marked_boxes.len() as u64,
        total: grid.total,
        samples_per_box,
        moment_order: two_s,
        empirical_moment: moment_sum / samples,
        samples_above,
        marked_boxes,
        box_max: outcomes.iter().map(|o| o.max).collect(),
    })
}

/// `U N^{s(d)(1 - 2 alpha)}`, the box count predicted by the mean value
/// argument without its `N^{o(1)}` factor. Reported, never asserted.
pub fn counting_bound(grid: &BoxGrid) -> f64 {
    let d = grid.d as f64;
    let s = d * (d + 1.0) / 2.0;
    let alpha = grid.alpha.to_f64().expect("finite");
    grid.total as f64 * (grid.n as f64).powf(s * (1.0 - 2.0 * alpha))
}

/// `#{v >= t} t^{2s} <= sum v^{2s}` over the sample, checked from aggregates.
pub fn markov_check_aggregate(count: u64, moment_sum: f64, threshold: f64, two_s: u32) -> Result<bool, CensusError> {
    let lhs = count as f64 * threshold.powi(two_s as i32);
    if lhs <= moment_sum * (1.0 + ROUNDING_SLACK) {
        Ok(true)
    } else {
        Err(CensusError::MarkovViolated { count, moment: moment_sum })
    }
}

/// Markov's inequality on the empirical measure of `values`.
pub fn markov_check(values: &[f64], threshold: f64, two_s: u32) -> Result<bool, CensusError> {
    let count = values.iter().filter(|&&v| v >= threshold).count() as u64;
    let moment: f64 = values.iter().map(|v| v.powi(two_s as i32)).sum();
    markov_check_aggregate(count, moment, threshold, two_s)
}

/// Orthonormal directions spanning the target subspace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSpec {
    basis: Vec<Vec<f64>>,
}

impl ProjectionSpec {
    pub fn new(basis: Vec<Vec<f64>>) -> Result<Self, CensusError> {
        if basis.is_empty() {
            return Err(CensusError::NotOrthonormal("empty basis".into()));
        }
        let d = basis[0].len();
        for (i, v) in basis.iter().enumerate() {
            if v.len() != d {
                return Err(CensusError::DimensionMismatch { needed: d, have: v.len() });
            }
            for (j, w) in basis.iter().enumerate().take(i + 1) {
                let dot: f64 = v.iter().zip(w).map(|(x, y)| x * y).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                if (dot - want).abs() > 1e-12 {
                    return Err(CensusError::NotOrthonormal(format!("<b{j}, b{i}> = {dot}")));
                }
            }
        }
        Ok(ProjectionSpec { basis })
    }

    /// A single direction, normalized.
    pub fn direction(v: &[f64]) -> Result<Self, CensusError> {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(CensusError::NotOrthonormal("zero direction".into()));
        }
        Self::new(vec![v.iter().map(|x| x / norm).collect()])
    }

    /// `(u_1, ..., u_d) -> (u_1, ..., u_k)`.
    pub fn coordinate(d: usize, k: usize) -> Result<Self, CensusError> {
        Self::new(
            (0..k)
                .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect(),
        )
    }

    pub fn k(&self) -> usize {
        self.basis.len()
    }

    pub fn dim(&self) -> usize {
        self.basis[0].len()
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    /// The axes picked out when every basis vector is a standard unit vector.
    fn axes(&self) -> Option<Vec<usize>> {
        self.basis
            .iter()
            .map(|v| {
                let ones: Vec<usize> = (0..v.len()).filter(|&j| v[j] == 1.0).collect();
                let rest_zero = v.iter().filter(|&&x| x != 0.0).count() == 1;
                (ones.len() == 1 && rest_zero).then(|| ones[0])
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionMethod {
    /// Union of intervals on a line.
    Exact1d,
    /// Coordinate projection: distinct cell prefixes times the cell volume.
    ExactAxis,
    MonteCarlo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionResult {
    pub measure: f64,
    pub method: ProjectionMethod,
    /// Standard error of the Monte Carlo estimate.
    pub std_error: Option<f64>,
}

/// Sampling controls for projections onto planes and higher.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloOptions {
    pub samples: u64,
    pub seed: u64,
}

impl Default for MonteCarloOptions {
    fn default() -> Self {
        MonteCarloOptions { samples: 200_000, seed: 0 }
    }
}

/// Length of the projection of one box onto the unit direction `w`.
pub fn box_projection_length(sides: &[f64], w: &[f64]) -> f64 {
    sides.iter().zip(w).map(|(z, x)| z * x.abs()).sum()
}

/// `sqrt(d) max_j zeta_j`, the diameter of a box, which bounds the length of
/// its projection onto any line.
pub fn per_box_projection_bound(grid: &BoxGrid, spec: &ProjectionSpec) -> Result<f64, CensusError> {
    if spec.k() != 1 {
        return Err(CensusError::NotOneDimensional);
    }
    let max_side = grid.sides().into_iter().fold(0.0, f64::max);
    Ok((grid.d as f64).sqrt() * max_side)
}

/// Lebesgue measure of the projection of the union of `marked` boxes.
pub fn project_union(
    grid: &BoxGrid,
    marked: &[u64],
    spec: &ProjectionSpec,
    mc: MonteCarloOptions,
) -> Result<ProjectionResult, CensusError> {
    if spec.dim() != grid.d {
        return Err(CensusError::DimensionMismatch { needed: grid.d, have: spec.dim() });
    }
    if let Some(&b) = marked.iter().find(|&&b| b >= grid.total) {
        return Err(CensusError::BoxOutOfRange(b));
    }
    if marked.is_empty() {
        return Ok(ProjectionResult { measure: 0.0, method: ProjectionMethod::Exact1d, std_error: None });
    }
    if let Some(axes) = spec.axes() {
        let prefixes: HashSet<Vec<u64>> = marked
            .iter()
            .map(|&b| {
                let cell = grid.cell(b);
                axes.iter().map(|&j| cell[j]).collect()
            })
            .collect();
        let volume: f64 = axes.iter().map(|&j| grid.side(j)).product();
        let measure = prefixes.len() as f64 * volume;
        return Ok(ProjectionResult { measure, method: ProjectionMethod::ExactAxis, std_error: None });
    }
    if spec.k() == 1 {
        let measure = project_line(grid, marked, &spec.basis[0]);
        let bound = per_box_projection_bound(grid, spec)? * marked.len() as f64;
        if measure > bound * (1.0 + ROUNDING_SLACK) {
            return Err(CensusError::ProjectionExceedsBound { measure, bound });
        }
        return Ok(ProjectionResult { measure, method: ProjectionMethod::Exact1d, std_error: None });
    }
    Ok(project_monte_carlo(grid, marked, spec, mc))
}

fn project_line(grid: &BoxGrid, marked: &[u64], w: &[f64]) -> f64 {
    let sides = grid.sides();
    let half = 0.5 * box_projection_length(&sides, w);
    let mut intervals: Vec<(f64, f64)> = marked
        .iter()
        .map(|&b| {
            let center: f64 = grid.corner(b).iter().zip(&sides).zip(w).map(|((c, z), x)| (c + 0.5 * z) * x).sum();
            (center - half, center + half)
        })
        .collect();
    intervals.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut total = 0.0;
    let (mut lo, mut hi) = intervals[0];
    for &(a, b) in &intervals[1..] {
        if a > hi {
            total += hi - lo;
            lo = a;
            hi = b;
        } else {
            hi = hi.max(b);
        }
    }
    total + (hi - lo)
}

/// Determinant by Gaussian elimination with partial pivoting.
fn det(mut m: Vec<Vec<f64>>) -> f64 {
    let n = m.len();
    let mut sign = 1.0;
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).expect("nonempty");
        if m[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            m.swap(pivot, col);
            sign = -sign;
        }
        for row in col + 1..n {
            let (upper, lower) = m.split_at_mut(row);
            let (pivot_row, target) = (&upper[col], &mut lower[0]);
            let f = target[col] / pivot_row[col];
            for (x, p) in target[col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= f * p;
            }
        }
    }
    sign * (0..n).map(|i| m[i][i]).product::<f64>()
}

/// Vector orthogonal to `k - 1` vectors in `R^k` (generalized cross product).
fn cross(vectors: &[Vec<f64>], k: usize) -> Vec<f64> {
    (0..k)
        .map(|i| {
            let minor: Vec<Vec<f64>> = vectors
                .iter()
                .map(|v| (0..k).filter(|&c| c != i).map(|c| v[c]).collect())
                .collect();
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            sign * if minor.is_empty() { 1.0 } else { det(minor) }
        })
        .collect()
}

fn subsets(n: usize, r: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, r: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, r, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, r, &mut Vec::new(), &mut out);
    out
}

/// Projected boxes are zonotopes `c + sum_j [-1/2, 1/2] zeta_j g_j`; membership
/// is tested against the facet normals, and candidate zonotopes are found
/// through a uniform bucket grid over the bounding box.
fn project_monte_carlo(grid: &BoxGrid, marked: &[u64], spec: &ProjectionSpec, mc: MonteCarloOptions) -> ProjectionResult {
    let k = spec.k();
    let d = grid.d;
    let sides = grid.sides();
    let gens: Vec<Vec<f64>> = (0..d).map(|j| (0..k).map(|i| spec.basis[i][j] * sides[j]).collect()).collect();

    let mut normals: Vec<(Vec<f64>, f64)> = Vec::new();
    for subset in subsets(d, k - 1) {
        let vs: Vec<Vec<f64>> = subset.iter().map(|&j| gens[j].clone()).collect();
        let nrm = cross(&vs, k);
        let len = nrm.iter().map(|x| x * x).sum::<f64>().sqrt();
        if len < 1e-14 {
            continue;
        }
        let nrm: Vec<f64> = nrm.iter().map(|x| x / len).collect();
        let support = 0.5 * gens.iter().map(|g| g.iter().zip(&nrm).map(|(a, b)| a * b).sum::<f64>().abs()).sum::<f64>();
        normals.push((nrm, support));
    }
    let half_width: Vec<f64> = (0..k).map(|i| 0.5 * gens.iter().map(|g| g[i].abs()).sum::<f64>()).collect();

    let centers: Vec<Vec<f64>> = marked
        .iter()
        .map(|&b| {
            let c: Vec<f64> = grid.corner(b).iter().zip(&sides).map(|(x, z)| x + 0.5 * z).collect();
            (0..k).map(|i| spec.basis[i].iter().zip(&c).map(|(a, b)| a * b).sum()).collect()
        })
        .collect();
    let lo: Vec<f64> = (0..k).map(|i| centers.iter().map(|c| c[i]).fold(f64::INFINITY, f64::min) - half_width[i]).collect();
    let hi: Vec<f64> = (0..k).map(|i| centers.iter().map(|c| c[i]).fold(f64::NEG_INFINITY, f64::max) + half_width[i]).collect();

    // buckets roughly the size of one projected box
    let cells: Vec<usize> = (0..k)
        .map(|i| (((hi[i] - lo[i]) / (2.0 * half_width[i])).ceil() as usize).clamp(1, 1 << (20 / k)))
        .collect();
    let bucket_of = |p: &[f64], i: usize| -> usize {
        let t = ((p[i] - lo[i]) / (hi[i] - lo[i]) * cells[i] as f64).floor();
        (t.max(0.0) as usize).min(cells[i] - 1)
    };
    let flat = |idx: &[usize]| idx.iter().zip(&cells).fold(0, |acc, (&x, &m)| acc * m + x);
    let mut buckets: std::collections::HashMap<usize, Vec<usize>> = std::collections::HashMap::new();
    for (z, c) in centers.iter().enumerate() {
        let lo_b: Vec<f64> = (0..k).map(|i| c[i] - half_width[i]).collect();
        let hi_b: Vec<f64> = (0..k).map(|i| c[i] + half_width[i]).collect();
        let from: Vec<usize> = (0..k).map(|i| bucket_of(&lo_b, i)).collect();
        let to: Vec<usize> = (0..k).map(|i| bucket_of(&hi_b, i)).collect();
        let mut idx = from.clone();
        loop {
            buckets.entry(flat(&idx)).or_default().push(z);
            let mut axis = k;
            while axis > 0 {
                axis -= 1;
                if idx[axis] < to[axis] {
                    idx[axis] += 1;
                    break;
                }
                idx[axis] = from[axis];
                if axis == 0 {
                    axis = usize::MAX;
                    break;
                }
            }
            if axis == usize::MAX {
                break;
            }
        }
    }

    let inside = |p: &[f64], z: usize| {
        let c = &centers[z];
        normals.iter().all(|(nrm, h)| {
            let t: f64 = nrm.iter().zip(p).zip(c).map(|((a, x), y)| a * (x - y)).sum();
            t.abs() <= *h
        })
    };

    const CHUNK: u64 = 4096;
    let chunks = mc.samples.div_ceil(CHUNK);
    let hits: u64 = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(mc.seed);
            rng.set_stream(chunk);
            let count = CHUNK.min(mc.samples - chunk * CHUNK);
            let mut p = vec![0.0; k];
            let mut hits = 0u64;
            for _ in 0..count {
                for i in 0..k {
                    p[i] = lo[i] + rng.gen::<f64>() * (hi[i] - lo[i]);
                }
                let idx: Vec<usize> = (0..k).map(|i| bucket_of(&p, i)).collect();
                if buckets.get(&flat(&idx)).is_some_and(|zs| zs.iter().any(|&z| inside(&p, z))) {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    let volume: f64 = (0..k).map(|i| hi[i] - lo[i]).product();
    let frac = hits as f64 / mc.samples as f64;
    ProjectionResult {
        measure: volume * frac,
        method: ProjectionMethod::MonteCarlo,
        std_error: Some(volume * (frac * (1.0 - frac) / mc.samples as f64).sqrt()),
    }
}
