//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::process::Command;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use num_traits::{One, Signed, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use weyl_core::census::{
    box_projection_length, census, grid_sides, markov_check, per_box_projection_bound, project_union,
    MonteCarloOptions, ProjectionSpec,
};
use weyl_core::discrepancy::{brute_force_discrepancy, erdos_turan_bound_poly, exact_discrepancy, poly_discrepancy};
use weyl_core::exponents::{
    closed_form, disc_gamma, disc_gamma_star, fixed_point, fixed_point_step_bound, gamma_general, gamma_star,
    gamma_yl, rat, Rational,
};
use weyl_core::expsum::{
    completion_fft, completion_naive, exact_moment_grid, moment_integral, reconstruct_prefix, terms,
    vinogradov_count, WeightSeq,
};
use weyl_core::polyfam::{IntPolynomial, PolynomialFamily};
use weyl_core::TorusPoint;
use weyl_lab::sweep::{fits_by_sample, metric_sweep};
use weyl_lab::ExperimentConfig;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed <= limit, || format!("took {:.1}s, limit {}s", elapsed.as_secs_f64(), limit.as_secs()))
}

fn classical(d: usize) -> PolynomialFamily {
    PolynomialFamily::classical(d).expect("d >= 1")
}

fn random_point(rng: &mut ChaCha8Rng, d: usize) -> TorusPoint {
    TorusPoint::from_raw(&(0..d).map(|_| rng.gen::<u64>()).collect::<Vec<_>>())
}

fn c1_completion_identity() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for n in [64u64, 256] {
        for _ in 0..50 {
            let d = rng.gen_range(1..=3);
            let fam = classical(d);
            let u = random_point(&mut rng, d);
            let c = terms(&fam, &u, &WeightSeq::Unit, n).map_err(|e| e.to_string())?;
            let mut direct = Complex64::new(0.0, 0.0);
            for m in 1..=n {
                direct += c[m as usize - 1];
                let z = reconstruct_prefix(&fam, &u, &WeightSeq::Unit, n, m).map_err(|e| e.to_string())?;
                let err = (z - direct).norm();
                worst = worst.max(err / n as f64);
                ensure(err <= 1e-8 * n as f64, || format!("N={n} M={m} error {err:.3e}"))?;
            }
        }
    }
    within(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!("max error/N {worst:.2e}"))
}

fn c2_fft_matches_naive() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for i in 0..50 {
        let d = rng.gen_range(1..=3);
        let n = if i == 0 { 512 } else { rng.gen_range(1..=512) };
        let fam = classical(d);
        let u = random_point(&mut rng, d);
        let naive = completion_naive(&fam, &u, &WeightSeq::Unit, n).map_err(|e| e.to_string())?;
        let fft = completion_fft(&fam, &u, &WeightSeq::Unit, n).map_err(|e| e.to_string())?;
        let rel = (naive.w - fft.w).abs() / naive.w;
        worst = worst.max(rel);
        ensure(rel <= 1e-9, || format!("N={n} relative error {rel:.3e}"))?;
    }
    within(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!("max relative error {worst:.2e}"))
}

fn c3_mean_value() -> Outcome {
    let start = Instant::now();
    let fam = classical(2);
    let mut parts = Vec::new();
    for n in [4u64, 8, 16] {
        let count = vinogradov_count(2, 3, n).map_err(|e| e.to_string())?.to_f64().expect("small");
        let grid: Vec<usize> =
            exact_moment_grid(&fam, n, 6).map_err(|e| e.to_string())?.into_iter().map(|m| m as usize).collect();
        let m6 = moment_integral(&fam, &WeightSeq::Unit, n, 6, &grid).map_err(|e| e.to_string())?;
        ensure((m6 - count).abs() <= 1e-6 * count, || format!("N={n}: moment {m6} vs count {count}"))?;
        let grid2: Vec<usize> =
            exact_moment_grid(&fam, n, 2).map_err(|e| e.to_string())?.into_iter().map(|m| m as usize).collect();
        let m2 = moment_integral(&fam, &WeightSeq::Unit, n, 2, &grid2).map_err(|e| e.to_string())?;
        ensure((m2 - n as f64).abs() <= 1e-9 * n as f64, || format!("N={n}: second moment {m2}"))?;
        parts.push(format!("J(N={n})={count}"));
    }
    within(start.elapsed(), Duration::from_secs(120))?;
    Ok(parts.join(", "))
}

fn c4_exponent_calculus() -> Outcome {
    let mut checked = 0;
    for d in 2..=20usize {
        let fam = classical(d);
        for k in 1..=d {
            let g = gamma_general(&fam, k).map_err(|e| e.to_string())?;
            let gs = gamma_star(&fam, k).map_err(|e| e.to_string())?;
            let dg = disc_gamma(&fam, k).map_err(|e| e.to_string())?;
            let dgs = disc_gamma_star(&fam, k).map_err(|e| e.to_string())?;
            ensure(g < gs, || format!("d={d} k={k}: {g} !< {gs}"))?;
            ensure(dg < dgs, || format!("d={d} k={k}: {dg} !< {dgs}"))?;
            checked += 1;
        }
        let half = rat(1, 2);
        ensure(gamma_general(&fam, d).map_err(|e| e.to_string())? == half, || format!("d={d}: full split"))?;
        ensure(closed_form::gamma_yl(d as u64, 0) == half, || format!("d={d}: linear-in-y full split"))?;

        let mut exps = vec![d];
        exps.extend(1..d);
        let short = PolynomialFamily::monomials(&exps).map_err(|e| e.to_string())?;
        let yl = gamma_yl(&short, 1).map_err(|e| e.to_string())?;
        let dy = disc_gamma(&short, 1).map_err(|e| e.to_string())?;
        ensure(yl == Rational::one() - rat(1, d as i64 + 1), || format!("d={d}: short sum exponent {yl}"))?;
        ensure(dy == Rational::one() - rat(1, d as i64 + 2), || format!("d={d}: short discrepancy exponent {dy}"))?;
    }
    Ok(format!("{checked} classical splits"))
}

fn c5_fixed_point() -> Outcome {
    let tol = rat(1, 1_000_000_000_000);
    let mut runs = 0;
    let mut max_steps = 0;
    for d in 2..=12usize {
        for k in 1..d {
            let mut exps: Vec<usize> = (2..=d).collect();
            exps.push(1);
            let fam = PolynomialFamily::monomials(&exps).map_err(|e| e.to_string())?;
            let fp = fixed_point(&fam, k, &Rational::one(), &tol).map_err(|e| e.to_string())?;
            let target = gamma_yl(&fam, k).map_err(|e| e.to_string())?;
            ensure(fp.exact == target, || format!("d={d} k={k}: exact {} vs {target}", fp.exact))?;
            let gap = (&fp.value - &target).abs();
            ensure(gap <= tol, || format!("d={d} k={k}: gap {gap}"))?;
            ensure(fp.trace.windows(2).all(|w| w[1] < w[0]), || format!("d={d} k={k}: trace not decreasing"))?;
            let bound = fixed_point_step_bound(&closed_form::self_improve_slope(d as u64, k as u64), &tol);
            ensure(fp.steps() <= bound, || format!("d={d} k={k}: {} steps > {bound}", fp.steps()))?;
            runs += 1;
            max_steps = max_steps.max(fp.steps());
        }
    }
    Ok(format!("{runs} families, at most {max_steps} steps"))
}

fn c6_discrepancy() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for i in 0..200 {
        let n = rng.gen_range(1..=256usize);
        let points: Vec<f64> = if i % 2 == 0 {
            let den = rng.gen_range(1..=64u32);
            (0..n).map(|_| rng.gen_range(0..den) as f64 / den as f64).collect()
        } else {
            (0..n).map(|_| rng.gen::<f64>()).collect()
        };
        let fast = exact_discrepancy(&points).map_err(|e| e.to_string())?.value;
        let slow = brute_force_discrepancy(&points).map_err(|e| e.to_string())?;
        ensure((fast - slow).abs() <= 1e-12, || format!("instance {i}: {fast} vs {slow}"))?;
    }
    for n in [1usize, 7, 256] {
        let v = exact_discrepancy(&vec![0.375; n]).map_err(|e| e.to_string())?.value;
        ensure(v == n as f64, || format!("canary N={n} gave {v}"))?;
    }
    for i in 0..100 {
        let d = rng.gen_range(1..=3);
        let n = 1u64 << rng.gen_range(4..=10);
        let fam = classical(d);
        let u = random_point(&mut rng, d);
        let disc = poly_discrepancy(&fam, &u, n).map_err(|e| e.to_string())?.value;
        for p in [0.25f64, 0.5, 0.75] {
            let g = ((n as f64).powf(p).round() as u64).max(1);
            let bound = erdos_turan_bound_poly(&fam, &u, n, g).map_err(|e| e.to_string())?;
            ensure(disc <= bound, || format!("sequence {i}: D={disc} > bound {bound} (G={g})"))?;
        }
    }
    within(start.elapsed(), Duration::from_secs(60))?;
    Ok("200 oracle instances, canary, 100 sequences x 3 cutoffs".into())
}

fn c7_census_inequalities() -> Outcome {
    let start = Instant::now();
    let fam = classical(2);
    let mut rng = ChaCha8Rng::seed_from_u64(70);
    let mut uniform = Vec::new();
    for _ in 0..2000 {
        let u = random_point(&mut rng, 2);
        uniform.push(completion_fft(&fam, &u, &WeightSeq::Unit, 16).map_err(|e| e.to_string())?.w);
    }
    let mut summary = Vec::new();
    // the default resolution marks almost everything; alpha = 3/4 gives a sparse set
    for (alpha, eps) in [(rat(1, 2), rat(1, 20)), (rat(3, 4), rat(1, 20))] {
        let grid = grid_sides(&fam, 16, &alpha, &eps, 1 << 24).map_err(|e| e.to_string())?;
        // census runs the Markov check itself and fails otherwise
        let r = census(&fam, &WeightSeq::Unit, &grid, 4, 7).map_err(|e| e.to_string())?;
        let ok = markov_check(&uniform, grid.threshold(), r.moment_order).map_err(|e| e.to_string())?;
        ensure(ok, || "markov check on uniform samples".into())?;

        let mut dirs = ChaCha8Rng::seed_from_u64(71);
        for i in 0..1000 {
            let v = [dirs.gen::<f64>() * 2.0 - 1.0, dirs.gen::<f64>() * 2.0 - 1.0];
            let Ok(spec) = ProjectionSpec::direction(&v) else { continue };
            let per_box = per_box_projection_bound(&grid, &spec).map_err(|e| e.to_string())?;
            let one = box_projection_length(&grid.sides(), &spec.basis()[0]);
            ensure(one <= per_box, || format!("direction {i}: single box {one} > {per_box}"))?;
            let p = project_union(&grid, &r.marked_boxes, &spec, MonteCarloOptions::default())
                .map_err(|e| e.to_string())?;
            let bound = per_box * r.marked as f64;
            ensure(p.measure <= bound, || format!("direction {i}: union {} > {bound}", p.measure))?;
        }
        summary.push(format!("alpha={alpha}: U={} marked={}", grid.total, r.marked));
    }
    within(start.elapsed(), Duration::from_secs(120))?;
    Ok(summary.join("; "))
}

const SLOPE_CONFIG: &str = r#"
id = "metric-slope"
kind = "sweep"
family = "classical:2"
k = 2
schedule = { min_exp = 8, max_exp = 14 }
samples = 100
seed = 20240601
slope_check = { max_slope = 0.75, min_fraction = 0.95 }
"#;

fn c8_metric_slopes() -> Outcome {
    let cfg = ExperimentConfig::from_toml(SLOPE_CONFIG).map_err(|e| e.to_string())?;
    let timed = |threads: usize| -> Result<(Duration, Vec<weyl_lab::RunRecord>), String> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| e.to_string())?;
        let start = Instant::now();
        let recs = pool.install(|| metric_sweep(&cfg)).map_err(|e| e.to_string())?;
        Ok((start.elapsed(), recs))
    };
    let (single, records) = timed(1)?;
    within(single, Duration::from_secs(300))?;
    let (eight, again) = timed(8)?;
    ensure(records == again, || "records differ between 1 and 8 workers".into())?;
    let fits = fits_by_sample(&records);
    let mut slopes = Vec::new();
    for (s, f) in &fits {
        slopes.push(f.as_ref().map_err(|e| format!("sample {s}: {e}"))?.slope);
    }
    let ok = slopes.iter().filter(|&&s| s <= 0.75).count();
    slopes.sort_by(f64::total_cmp);
    ensure(ok >= 95, || format!("only {ok}/100 slopes <= 0.75"))?;
    Ok(format!(
        "{ok}/100 slopes <= 0.75, median {:.3}; 1 worker {:.2}s, 8 workers {:.2}s (speedup report-only)",
        slopes[slopes.len() / 2],
        single.as_secs_f64(),
        eight.as_secs_f64()
    ))
}

fn c9_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = dir.path().join("slope.toml");
    std::fs::write(&config, SLOPE_CONFIG).map_err(|e| e.to_string())?;
    let mut digests = Vec::new();
    for threads in [1, 8] {
        let out = dir.path().join(format!("run-{threads}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_weyl-lab"))
            .args(["sweep", "--config"])
            .arg(&config)
            .args(["--threads", &threads.to_string(), "--output"])
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(status.status.success(), || format!("run with {threads} threads: {:?}", status.status))?;
        let bytes = std::fs::read(&out).map_err(|e| e.to_string())?;
        digests.push(format!("{:x}", Sha256::digest(&bytes)));
    }
    ensure(digests[0] == digests[1], || format!("hashes differ: {} vs {}", digests[0], digests[1]))?;
    Ok(format!("sha256 {}", &digests[0][..16]))
}

fn c10_wronskians() -> Outcome {
    for d in 1..=8 {
        ensure(classical(d).wronskian().is_nonvanishing(), || format!("classical d={d} vanishes"))?;
    }
    let dependent = PolynomialFamily::new(vec![IntPolynomial::from_i64(&[0, 1]), IntPolynomial::from_i64(&[0, 2])])
        .map_err(|e| e.to_string())?;
    ensure(!dependent.wronskian().is_nonvanishing(), || "(T, 2T) not flagged".into())?;
    let w = classical(3).wronskian().value;
    ensure(w == IntPolynomial::monomial(2, 3), || format!("(T, T^2, T^3) gave {w}"))?;
    Ok("classical d<=8 nonvanishing, (T,2T) vanishing, W(T,T^2,T^3)=2T^3".into())
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("C1 completion identity", c1_completion_identity),
        ("C2 fft vs naive completion", c2_fft_matches_naive),
        ("C3 mean value at desk scale", c3_mean_value),
        ("C4 exponent calculus", c4_exponent_calculus),
        ("C5 self-improving fixed point", c5_fixed_point),
        ("C6 discrepancy oracle and Erdos-Turan", c6_discrepancy),
        ("C7 census hard inequalities", c7_census_inequalities),
        ("C8 metric slope check", c8_metric_slopes),
        ("C9 determinism across workers", c9_determinism),
        ("C10 wronskians", c10_wronskians),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail} [{secs:.2}s]"),
            Err(reason) => {
                failed += 1;
                println!("FAIL {name}: {reason} [{secs:.2}s]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
