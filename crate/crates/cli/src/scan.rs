//! Discrepancy growth and box-count scans.

use num_traits::ToPrimitive;
use rayon::prelude::*;
use weyl_core::census::{census, counting_bound, grid_sides, BoxGrid};
use weyl_core::discrepancy::{poly_discrepancy, short_interval_discrepancy};
use weyl_core::exponents::{self, Rational};
use weyl_core::polyfam::PolynomialFamily;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::AppError;
use crate::fit::ols;
use crate::sweep::{sample_offsets, sample_point, sample_rng, RunRecord};
use crate::table::{Cell, Table};

fn check_budget(estimate: f64, budget: f64) -> Result<(), AppError> {
    if estimate > budget {
        Err(AppError::Budget(format!("estimated {estimate:.3e} operations, budget {budget:.3e}")))
    } else {
        Ok(())
    }
}

pub fn estimate_discrepancy_cost(cfg: &ExperimentConfig) -> Result<f64, AppError> {
    let d = cfg.family()?.d() as f64;
    let offsets = match cfg.kind {
        ExperimentKind::DiscrepancyShort => cfg.offsets as f64 + 1.0,
        ExperimentKind::Discrepancy => 1.0,
        other => return Err(AppError::Config(format!("{other:?} is not a discrepancy experiment"))),
    };
    let per: f64 = cfg.schedule.values().iter().map(|&n| n as f64 * (d + (n as f64).log2().max(1.0))).sum();
    Ok(cfg.samples as f64 * offsets * per)
}

/// `D(u; N)` for every sample and `N`, with `D / sqrt N` and
/// `D / (sqrt N (ln N)^{3/2})`. The short variant records the largest
/// `D(u; M, N)` over the sampled offsets (always including `M = 0`).
pub fn discrepancy_growth(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>, AppError> {
    check_budget(estimate_discrepancy_cost(cfg)?, cfg.budget)?;
    let fam = cfg.family()?;
    let d = fam.d();
    let schedule = cfg.schedule.values();
    let short = cfg.kind == ExperimentKind::DiscrepancyShort;
    let per_sample: Vec<Result<Vec<RunRecord>, AppError>> = (0..cfg.samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = sample_rng(cfg.seed, s);
            let u = sample_point(&mut rng, d, cfg.include_zero && s == 0);
            let offsets = if short { sample_offsets(&mut rng, cfg.offsets) } else { vec![0] };
            let mut out = Vec::with_capacity(schedule.len());
            for &n in &schedule {
                let value = if short {
                    let mut best = 0.0f64;
                    for &m in &offsets {
                        best = best.max(short_interval_discrepancy(&u, m, n)?.value);
                    }
                    best
                } else {
                    poly_discrepancy(&fam, &u, n)?.value
                };
                let root = (n as f64).sqrt();
                out.push(RunRecord {
                    experiment: cfg.id.clone(),
                    sample: s,
                    x: u.to_f64(),
                    n,
                    statistic: if short { "max_short_discrepancy" } else { "discrepancy" },
                    value,
                    aux: vec![
                        ("D_over_sqrtN", value / root),
                        ("D_over_sqrtN_log", value / (root * (n as f64).ln().powf(1.5))),
                    ],
                });
            }
            Ok(out)
        })
        .collect();
    let mut records = Vec::new();
    for r in per_sample {
        records.extend(r?);
    }
    Ok(records)
}

/// Median of `D / sqrt N` at the largest `N` of the schedule.
pub fn median_normalized_at_top(records: &[RunRecord]) -> Option<f64> {
    let top = records.iter().map(|r| r.n).max()?;
    let mut v: Vec<f64> = records.iter().filter(|r| r.n == top).map(|r| r.aux[0].1).collect();
    v.sort_by(f64::total_cmp);
    Some(if v.len() % 2 == 1 { v[v.len() / 2] } else { 0.5 * (v[v.len() / 2 - 1] + v[v.len() / 2]) })
}

/// Smallest `k < d` with `alpha > tilde-Gamma(phi, k)`, else `d`: the
/// dimension bound predicted for the large-value set at level `alpha`.
pub fn predicted_dimension(fam: &PolynomialFamily, alpha: &Rational) -> usize {
    (1..fam.d())
        .find(|&k| exponents::gamma_tilde(fam, k).is_ok_and(|g| alpha > &g))
        .unwrap_or(fam.d())
}

pub const DIMSCAN_COLUMNS: [&str; 15] = [
    "alpha",
    "alpha_decimal",
    "N",
    "U",
    "delta",
    "marked",
    "marked_finest_grid",
    "proxy",
    "slope",
    "slope_points",
    "predicted_dim_bound",
    "counting_bound",
    "samples_above",
    "empirical_moment",
    "threshold",
];

/// Census at every `(alpha, N)`. `delta = U^{-1/d}` is the mean box side,
/// `proxy = ln(marked) / ln(1/delta)` and `slope` the least-squares slope
/// of `ln(marked)` against `ln(1/delta)` over the `N` where something was
/// marked. `marked_finest_grid` re-thresholds the grid of the smallest
/// alpha at this alpha. Everything except the Markov check (enforced inside
/// every census) is report-only.
pub fn dimension_scan(cfg: &ExperimentConfig) -> Result<Table, AppError> {
    if cfg.kind != ExperimentKind::Dimscan {
        return Err(AppError::Config(format!("{:?} is not a dimscan experiment", cfg.kind)));
    }
    let fam = cfg.family()?;
    let d = fam.d();
    let a = cfg.weights.build()?;
    let eps = cfg.epsilon()?;
    let alphas = cfg.alpha_values()?;
    let schedule = cfg.schedule.values();
    let box_cap = (cfg.budget.min(u64::MAX as f64) as u128).max(1);

    // size every grid before computing anything
    let mut grids: Vec<Vec<BoxGrid>> = Vec::new();
    let mut estimate = 0.0;
    for alpha in &alphas {
        let mut row = Vec::new();
        for &n in &schedule {
            let g = grid_sides(&fam, n, alpha, &eps, box_cap)?;
            let nf = n as f64;
            estimate += g.total as f64 * cfg.samples_per_box as f64 * nf * (d as f64 + 5.0 * nf.log2().max(1.0));
            row.push(g);
        }
        grids.push(row);
    }
    check_budget(estimate, cfg.budget)?;

    let mut all = Vec::with_capacity(grids.len());
    for row in &grids {
        let mut results = Vec::with_capacity(row.len());
        for g in row {
            results.push(census(&fam, &a, g, cfg.samples_per_box, cfg.seed)?);
        }
        all.push(results);
    }
    // the finest grid (smallest alpha) re-thresholded at every alpha gives
    // counts that are monotone by construction
    let finest = (0..alphas.len()).min_by(|&i, &j| alphas[i].cmp(&alphas[j])).expect("nonempty alphas");

    let mut table = Table::new(DIMSCAN_COLUMNS);
    for ((alpha, row), results) in alphas.iter().zip(&grids).zip(&all) {
        let deltas: Vec<f64> = row.iter().map(|g| (g.total as f64).powf(-1.0 / d as f64)).collect();
        let (xs, ys): (Vec<f64>, Vec<f64>) = results
            .iter()
            .zip(&deltas)
            .filter(|(r, _)| r.marked > 0)
            .map(|(r, delta)| ((1.0 / delta).ln(), (r.marked as f64).ln()))
            .unzip();
        let slope = ols(&xs, &ys).ok().map(|f| f.slope);
        let predicted = predicted_dimension(&fam, alpha);
        for (i, ((g, r), delta)) in row.iter().zip(results).zip(&deltas).enumerate() {
            let proxy = (r.marked > 0).then(|| (r.marked as f64).ln() / (1.0 / delta).ln());
            table.push(vec![
                alpha.to_string().into(),
                alpha.to_f64().unwrap_or(f64::NAN).into(),
                g.n.into(),
                g.total.into(),
                (*delta).into(),
                r.marked.into(),
                all[finest][i].marked_at(r.threshold).into(),
                Cell::from(proxy),
                Cell::from(slope),
                (xs.len() as u64).into(),
                predicted.into(),
                counting_bound(g).into(),
                r.samples_above.into(),
                r.empirical_moment.into(),
                r.threshold.into(),
            ]);
        }
    }
    Ok(table)
}
