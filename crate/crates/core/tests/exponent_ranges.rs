use num_traits::One;
use proptest::prelude::*;
use weyl_core::exponents::{
    best_bound, closed_form, disc_gamma, disc_gamma_star, fixed_point, fixed_point_step_bound, gamma_general,
    gamma_star, gamma_yl, rat, Entry, Rational,
};
use weyl_core::polyfam::{degree_stats, PolynomialFamily};

fn classical(d: usize) -> PolynomialFamily {
    PolynomialFamily::classical(d).unwrap()
}

fn present(entries: &[&Entry]) -> Vec<Rational> {
    entries.iter().filter_map(|e| e.value().cloned()).collect()
}

#[test]
fn new_exponents_beat_earlier_ones_on_classical_families() {
    for d in 2..=20 {
        let fam = classical(d);
        for k in 1..=d {
            assert!(gamma_general(&fam, k).unwrap() < gamma_star(&fam, k).unwrap(), "d={d} k={k}");
            assert!(disc_gamma(&fam, k).unwrap() < disc_gamma_star(&fam, k).unwrap(), "d={d} k={k}");
        }
    }
}

#[test]
fn full_split_gives_one_half() {
    for d in 1..=20u64 {
        assert_eq!(closed_form::gamma_general(d, d, 0), rat(1, 2));
        assert_eq!(closed_form::gamma_yl(d, 0), rat(1, 2));
        assert_eq!(gamma_general(&classical(d as usize), d as usize).unwrap(), rat(1, 2));
    }
}

#[test]
fn short_interval_exponents() {
    for d in 2..=20usize {
        let mut exps = vec![d];
        exps.extend(1..d);
        let fam = PolynomialFamily::monomials(&exps).unwrap();
        assert_eq!(gamma_yl(&fam, 1).unwrap(), Rational::one() - rat(1, d as i64 + 1), "d={d}");
        assert_eq!(disc_gamma(&fam, 1).unwrap(), Rational::one() - rat(1, d as i64 + 2), "d={d}");
    }
}

#[test]
fn classical_reports_stay_in_range() {
    for d in 2..=20 {
        for k in 1..d {
            let r = best_bound(&classical(d), k).unwrap();
            let entries = [
                &r.gamma_star,
                &r.gamma_general,
                &r.gamma_yl,
                &r.gamma_xl,
                &r.gamma_nl,
                &r.gamma_tilde,
                &r.disc_gamma,
                &r.disc_gamma_star,
            ];
            for v in present(&entries) {
                assert!(v > rat(1, 2) && v <= Rational::one(), "d={d} k={k} value={v}");
            }
            assert!(r.nontrivial);
        }
    }
}

#[test]
fn fixed_point_converges_in_predicted_steps() {
    let tol = rat(1, 1_000_000_000_000);
    for d in 2..=12usize {
        for k in 1..d {
            // T placed last so the split always has a linear member in y
            let mut exps: Vec<usize> = (2..=d).collect();
            exps.push(1);
            let fam = PolynomialFamily::monomials(&exps).unwrap();
            let fp = fixed_point(&fam, k, &Rational::one(), &tol).unwrap();
            assert_eq!(fp.exact, gamma_yl(&fam, k).unwrap());
            assert!((&fp.value - &fp.exact) <= tol && (&fp.exact - &fp.value) <= tol);
            assert!(fp.trace.windows(2).all(|w| w[1] < w[0]), "d={d} k={k}");
            let slope = closed_form::self_improve_slope(d as u64, k as u64);
            assert!(fp.steps() <= fixed_point_step_bound(&slope, &tol), "d={d} k={k}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn linear_in_y_improves_general(
        exps in proptest::sample::subsequence((2..=9usize).collect::<Vec<_>>(), 1..=6).prop_shuffle(),
        k_frac in 0.0f64..1.0,
    ) {
        let mut exps = exps;
        exps.push(1);
        let fam = PolynomialFamily::monomials(&exps).unwrap();
        let d = fam.d();
        let k = 1 + ((k_frac * (d - 1) as f64) as usize).min(d - 2);
        let sigma = degree_stats(&fam, k).unwrap().sigma;
        let yl = gamma_yl(&fam, k).unwrap();
        if sigma < (d * (d + 1) / 2) as u64 {
            prop_assert!(yl < gamma_general(&fam, k).unwrap());
        }
        let r = best_bound(&fam, k).unwrap();
        for v in present(&[&r.gamma_general, &r.gamma_yl, &r.gamma_xl, &r.gamma_nl]) {
            prop_assert!(r.best.value <= v);
        }
        prop_assert!(r.best.value <= Rational::one());
    }
}
