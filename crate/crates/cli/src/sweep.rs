//! Monte Carlo sweeps of `sup_y |T(x, y; N)|` over random `x`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use weyl_core::census::ceil_rational_power;
use weyl_core::exponents::Rational;
use weyl_core::expsum::{sup_linear_coeff, terms_poly, weyl_sum_poly, CompletionKernel, PhasePolynomial, WeightSeq};
use weyl_core::polyfam::{IntPolynomial, PolynomialFamily};
use weyl_core::{Phase, TorusPoint};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::AppError;
use crate::fit::{exponent_fit, Fit};
use crate::table::{Cell, Table, SCHEMA_VERSION};

/// Offsets `M` in the short-interval modes are drawn from `[0, OFFSET_RANGE)`.
pub const OFFSET_RANGE: i64 = 1 << 32;

/// One observation: a statistic for sample `sample` at length `N`.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub experiment: String,
    pub sample: u64,
    pub x: Vec<f64>,
    pub n: u64,
    pub statistic: &'static str,
    pub value: f64,
    /// Named side columns, identical names for every record of a run.
    pub aux: Vec<(&'static str, f64)>,
}

impl RunRecord {
    pub fn log2_n(&self) -> f64 {
        (self.n as f64).log2()
    }

    pub fn log2_value(&self) -> f64 {
        self.value.log2()
    }
}

/// Flattens records into the output table; `x` is `;`-joined.
pub fn records_table(records: &[RunRecord]) -> Table {
    let mut columns: Vec<String> = ["schema_version", "experiment", "sample", "x", "N", "statistic", "value", "log2_N", "log2_value"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    if let Some(first) = records.first() {
        columns.extend(first.aux.iter().map(|(name, _)| name.to_string()));
    }
    let mut table = Table::new(columns);
    for r in records {
        let x: Vec<String> = r.x.iter().map(|v| crate::table::format_float(*v)).collect();
        let mut row: Vec<Cell> = vec![
            SCHEMA_VERSION.into(),
            r.experiment.as_str().into(),
            r.sample.into(),
            x.join(";").into(),
            r.n.into(),
            r.statistic.into(),
            r.value.into(),
            r.log2_n().into(),
            r.log2_value().into(),
        ];
        row.extend(r.aux.iter().map(|(_, v)| Cell::Float(*v)));
        table.push(row);
    }
    table
}

/// The generator for sample `sample`: stream `sample` of the master seed.
pub fn sample_rng(seed: u64, sample: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sample);
    rng
}

/// Uniform point of `T_dim` at full 64-bit resolution; sample 0 is the
/// origin when `include_zero` is set.
pub fn sample_point(rng: &mut ChaCha8Rng, dim: usize, zero: bool) -> TorusPoint {
    let raw: Vec<u64> = (0..dim).map(|_| rng.gen::<u64>()).collect();
    if zero {
        TorusPoint::zero(dim)
    } else {
        TorusPoint::from_raw(&raw)
    }
}

pub fn sample_offsets(rng: &mut ChaCha8Rng, count: u32) -> Vec<i64> {
    std::iter::once(0).chain((0..count).map(|_| rng.gen_range(0..OFFSET_RANGE))).collect()
}

fn sub_family(fam: &PolynomialFamily, idx: &[usize]) -> Result<PolynomialFamily, AppError> {
    Ok(PolynomialFamily::new(idx.iter().map(|&i| fam.polys()[i].clone()).collect())?)
}

/// The members carrying `y`, with the first linear one (if any) split off
/// for the exact sup over its coefficient.
struct YLayout {
    /// Members sampled on a grid of spacing `1/m_j`.
    grid: Vec<IntPolynomial>,
    grid_degrees: Vec<usize>,
    linear: bool,
}

impl YLayout {
    fn new(y: &[IntPolynomial]) -> Self {
        let linear_at = y.iter().position(|p| p.degree().finite() == Some(1));
        let grid: Vec<IntPolynomial> =
            y.iter().enumerate().filter(|&(i, _)| Some(i) != linear_at).map(|(_, p)| p.clone()).collect();
        let grid_degrees = grid.iter().map(|p| p.degree().finite().expect("nonconstant")).collect();
        YLayout { grid, grid_degrees, linear: linear_at.is_some() }
    }

    /// `m_j = ceil(N^{e_j + 1 + eps - alpha})` per grid axis.
    fn divisions(&self, n: u64, alpha: &Rational, eps: &Rational) -> Result<Vec<u64>, AppError> {
        self.grid_degrees
            .iter()
            .map(|&e| {
                let exponent = Rational::from_integer((e as u64 + 1).into()) + eps - alpha;
                ceil_rational_power(n, &exponent)
                    .ok_or_else(|| AppError::Budget(format!("y grid at N={n} needs N^{exponent} points per axis")))
            })
            .collect()
    }

    /// `2 pi sum |a_n| sum_j (zeta_j / 2) max_n |phi_j(n)|`: how far the sum
    /// can move between a point and its nearest grid point.
    fn slack(&self, divisions: &[u64], a: &WeightSeq, n: u64) -> f64 {
        let l1 = a.l1(n);
        let spread: f64 = self
            .grid
            .iter()
            .zip(divisions)
            .map(|(p, &m)| {
                let top = (1..=n as i64).map(|t| num_traits::Signed::abs(&p.evaluate_i64(t))).max().expect("n >= 1");
                top.to_f64().unwrap_or(f64::INFINITY) * 0.5 / m as f64
            })
            .sum();
        TAU * l1 * spread
    }
}

/// Grid max and certified upper bound of `sup_y |sum_n b_n e(y . phi(n))|`.
fn sup_over_y(base: &[Complex64], layout: &YLayout, divisions: &[u64], oversample: usize) -> Result<(f64, f64), AppError> {
    let fam = if layout.grid.is_empty() { None } else { Some(PolynomialFamily::new(layout.grid.clone())?) };
    let mut cell = vec![0u64; divisions.len()];
    let mut terms = base.to_vec();
    let (mut best, mut best_upper) = (0.0f64, 0.0f64);
    loop {
        if let Some(fam) = &fam {
            let y = TorusPoint::new(cell.iter().zip(divisions).map(|(&c, &m)| Phase::from_ratio(c as i64, m)).collect());
            let mut table = PhasePolynomial::new(fam, &y)?.table_at(1);
            for (t, b) in terms.iter_mut().zip(base) {
                *t = b * table.current().unit();
                table.advance();
            }
        }
        let (value, upper) = if layout.linear {
            let s = sup_linear_coeff(&terms, oversample)?;
            (s.grid_max, s.certified_upper)
        } else {
            let v = terms.iter().sum::<Complex64>().norm();
            (v, v)
        };
        best = best.max(value);
        best_upper = best_upper.max(upper);
        // odometer over the grid axes, last axis fastest
        let mut j = divisions.len();
        loop {
            if j == 0 {
                return Ok((best, best_upper));
            }
            j -= 1;
            cell[j] += 1;
            if cell[j] < divisions[j] {
                break;
            }
            cell[j] = 0;
        }
    }
}

/// Estimated elementary operations, checked against `cfg.budget` before any work.
pub fn estimate_sweep_cost(cfg: &ExperimentConfig) -> Result<f64, AppError> {
    let fam = cfg.family()?;
    let d = fam.d();
    let alpha = &cfg.alpha_values()?[0];
    let eps = cfg.epsilon()?;
    let samples = cfg.samples as f64;
    let mut per_sample = 0.0;
    match (cfg.kind, cfg.k == d) {
        (ExperimentKind::Sweep, true) => {
            for n in cfg.schedule.values() {
                let nf = n as f64;
                per_sample += nf * (d as f64 + 5.0 * nf.log2().max(1.0));
            }
        }
        (ExperimentKind::Sweep, false) | (ExperimentKind::Short, _) => {
            let (layout, offsets) = match cfg.kind {
                ExperimentKind::Short => (YLayout::new(&monomials(1..d)), cfg.offsets as f64 + 1.0),
                _ => (YLayout::new(&fam.polys()[cfg.k..]), 1.0),
            };
            for n in cfg.schedule.values() {
                let nf = n as f64;
                let points: f64 = layout.divisions(n, alpha, &eps)?.iter().map(|&m| m as f64).product();
                let inner = if layout.linear {
                    let len = (cfg.oversample as f64) * nf;
                    nf * d as f64 + 5.0 * len * len.log2()
                } else {
                    nf * d as f64
                };
                per_sample += offsets * points * inner;
            }
        }
        _ => return Err(AppError::Config(format!("{:?} is not a sweep experiment", cfg.kind))),
    }
    Ok(samples * per_sample)
}

fn monomials(exps: std::ops::Range<usize>) -> Vec<IntPolynomial> {
    exps.map(|e| IntPolynomial::monomial(1, e)).collect()
}

fn check_budget(estimate: f64, budget: f64) -> Result<(), AppError> {
    if estimate > budget {
        Err(AppError::Budget(format!("estimated {estimate:.3e} operations, budget {budget:.3e}")))
    } else {
        Ok(())
    }
}

/// Runs a `sweep` or `short` experiment. Samples run in parallel on the
/// current rayon pool and come back in `(sample, N)` order.
pub fn metric_sweep(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>, AppError> {
    check_budget(estimate_sweep_cost(cfg)?, cfg.budget)?;
    let fam = cfg.family()?;
    let d = fam.d();
    let a = cfg.weights.build()?;
    let schedule = cfg.schedule.values();
    let alpha = cfg.alpha_values()?[0].clone();
    let eps = cfg.epsilon()?;

    let per_sample: Vec<Result<Vec<RunRecord>, AppError>> = match (cfg.kind, cfg.k == d) {
        (ExperimentKind::Sweep, true) => (0..cfg.samples)
            .into_par_iter()
            .map(|s| full_dimension_sample(cfg, &fam, &a, &schedule, s))
            .collect(),
        (ExperimentKind::Sweep, false) => {
            let x_fam = sub_family(&fam, &(0..cfg.k).collect::<Vec<_>>())?;
            let layout = YLayout::new(&fam.polys()[cfg.k..]);
            let plan = GridPlan::new(&layout, &a, &schedule, &alpha, &eps)?;
            (0..cfg.samples)
                .into_par_iter()
                .map(|s| {
                    let mut rng = sample_rng(cfg.seed, s);
                    let x = sample_point(&mut rng, cfg.k, cfg.include_zero && s == 0);
                    let poly = PhasePolynomial::new(&x_fam, &x)?;
                    let mut out = Vec::with_capacity(schedule.len());
                    for (i, &n) in schedule.iter().enumerate() {
                        let base = terms_poly(&poly, &a, 1, n)?;
                        let (value, upper) = sup_over_y(&base, &layout, &plan.divisions[i], cfg.oversample)?;
                        out.push(RunRecord {
                            experiment: cfg.id.clone(),
                            sample: s,
                            x: x.to_f64(),
                            n,
                            statistic: "sup_y",
                            value,
                            aux: vec![
                                ("upper_bound", upper + plan.slack[i]),
                                ("grid_slack", plan.slack[i]),
                                ("grid_points", plan.points[i]),
                            ],
                        });
                    }
                    Ok(out)
                })
                .collect()
        }
        (ExperimentKind::Short, _) => {
            let top = PolynomialFamily::monomials(&[d])?;
            let layout = YLayout::new(&monomials(1..d));
            let plan = GridPlan::new(&layout, &a, &schedule, &alpha, &eps)?;
            (0..cfg.samples)
                .into_par_iter()
                .map(|s| {
                    let mut rng = sample_rng(cfg.seed, s);
                    let x = sample_point(&mut rng, 1, cfg.include_zero && s == 0);
                    let offsets = sample_offsets(&mut rng, cfg.offsets);
                    let poly = PhasePolynomial::new(&top, &x)?;
                    let mut out = Vec::with_capacity(schedule.len());
                    for (i, &n) in schedule.iter().enumerate() {
                        let (mut hi, mut lo, mut upper) = (0.0f64, f64::INFINITY, 0.0f64);
                        for &m in &offsets {
                            // x (n + M)^d on the x side, y on n itself
                            let base = terms_poly(&poly, &a, m + 1, n)?;
                            let (v, u) = sup_over_y(&base, &layout, &plan.divisions[i], cfg.oversample)?;
                            hi = hi.max(v);
                            lo = lo.min(v);
                            upper = upper.max(u);
                        }
                        out.push(RunRecord {
                            experiment: cfg.id.clone(),
                            sample: s,
                            x: x.to_f64(),
                            n,
                            statistic: "sup_y_short",
                            value: hi,
                            aux: vec![
                                ("upper_bound", upper + plan.slack[i]),
                                ("offset_spread", hi - lo),
                                ("grid_points", plan.points[i]),
                            ],
                        });
                    }
                    Ok(out)
                })
                .collect()
        }
        _ => return Err(AppError::Config(format!("{:?} is not a sweep experiment", cfg.kind))),
    };
    let mut records = Vec::new();
    for r in per_sample {
        records.extend(r?);
    }
    Ok(records)
}

/// Per-`N` grid sizes and slacks, shared by all samples.
struct GridPlan {
    divisions: Vec<Vec<u64>>,
    slack: Vec<f64>,
    points: Vec<f64>,
}

impl GridPlan {
    fn new(layout: &YLayout, a: &WeightSeq, schedule: &[u64], alpha: &Rational, eps: &Rational) -> Result<Self, AppError> {
        let mut plan = GridPlan { divisions: Vec::new(), slack: Vec::new(), points: Vec::new() };
        for &n in schedule {
            let div = layout.divisions(n, alpha, eps)?;
            plan.slack.push(layout.slack(&div, a, n));
            plan.points.push(div.iter().map(|&m| m as f64).product());
            plan.divisions.push(div);
        }
        Ok(plan)
    }
}

/// `k = d`: no `y`, so the statistic is the running maximum of `|T(x; M)|`
/// for `M <= N`, read off one pass, with `W(x; N)` alongside.
fn full_dimension_sample(
    cfg: &ExperimentConfig,
    fam: &PolynomialFamily,
    a: &WeightSeq,
    schedule: &[u64],
    s: u64,
) -> Result<Vec<RunRecord>, AppError> {
    let mut rng = sample_rng(cfg.seed, s);
    let x = sample_point(&mut rng, fam.d(), cfg.include_zero && s == 0);
    let poly = PhasePolynomial::new(fam, &x)?;
    let n_max = *schedule.last().expect("nonempty schedule");
    let trace = weyl_sum_poly(&poly, a, 1, n_max)?;
    let all_terms = terms_poly(&poly, a, 1, n_max)?;
    let mut out = Vec::with_capacity(schedule.len());
    for &n in schedule {
        let dy = trace.dyadic.iter().find(|p| p.m == n).expect("schedule is dyadic");
        let w = CompletionKernel::new(n as usize).majorant(&all_terms[..n as usize]);
        out.push(RunRecord {
            experiment: cfg.id.clone(),
            sample: s,
            x: x.to_f64(),
            n,
            statistic: "prefix_max",
            value: dy.prefix_max,
            aux: vec![("abs_sum", dy.magnitude), ("W", w)],
        });
    }
    Ok(out)
}

/// Fits `log2 value` against `log2 N` separately for every sample.
pub fn fits_by_sample(records: &[RunRecord]) -> Vec<(u64, Result<Fit, crate::fit::FitError>)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < records.len() {
        let s = records[i].sample;
        let mut j = i;
        while j < records.len() && records[j].sample == s {
            j += 1;
        }
        let ns: Vec<u64> = records[i..j].iter().map(|r| r.n).collect();
        let vs: Vec<f64> = records[i..j].iter().map(|r| r.value).collect();
        out.push((s, exponent_fit(&ns, &vs)));
        i = j;
    }
    out
}
