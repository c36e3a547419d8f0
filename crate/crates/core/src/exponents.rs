//! Exact rational arithmetic for the almost-all exponents of Weyl sums and
//! discrepancy, the self-improving iteration and the best-bound selector.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::polyfam::{classify_case, degree_stats, CaseLabel, FamilyError, PolynomialFamily};

pub type Rational = BigRational;

/// `n / d` as an exact rational.
pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

fn int(n: u64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

fn half() -> Rational {
    rat(1, 2)
}

/// Why an exponent does not apply to a given `(family, k)`.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum Inapplicable {
    #[error("Wronskian vanishes identically")]
    WronskianVanishes,
    #[error("Wronskian of the family extended by T vanishes identically")]
    AugmentedWronskianVanishes,
    #[error("requires case {required}, family is in case {actual}")]
    WrongCase { required: char, actual: char },
    #[error("moving the linear member out of x needs k >= 2")]
    SplitTooSmall,
    #[error("degree sum {sigma} is not below {limit}")]
    DegreeSumTooLarge { sigma: u64, limit: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ExponentError {
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error("not applicable: {0}")]
    Inapplicable(#[from] Inapplicable),
    #[error("starting point must lie in [{lower}, 1]")]
    StartOutOfRange { lower: String },
    #[error("tolerance must be positive")]
    BadTolerance,
}

/// Parses `"3/4"`, `"0.75"` or `"2"` into an exact rational.
pub fn parse_rational(text: &str) -> Result<Rational, String> {
    let text = text.trim();
    let bad = || format!("not a rational number: {text:?}");
    if let Some((num, den)) = text.split_once('/') {
        let num: BigInt = num.trim().parse().map_err(|_| bad())?;
        let den: BigInt = den.trim().parse().map_err(|_| bad())?;
        if den.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(num, den));
    }
    let (neg, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    let (whole, frac) = body.split_once('.').unwrap_or((body, ""));
    if whole.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits: BigInt = format!("0{whole}{frac}").parse().map_err(|_| bad())?;
    let scale = num_traits::pow(BigInt::from(10), frac.len());
    let r = Rational::new(digits, scale);
    Ok(if neg { -r } else { r })
}

/// `s(q) = q(q+1)/2`.
pub fn s_of(q: u64) -> Rational {
    int(q * (q + 1) / 2)
}

fn s_int(q: u64) -> u64 {
    q * (q + 1) / 2
}

/// Closed forms in terms of `(d, k, sigma)`, with no applicability checks.
pub mod closed_form {
    use super::*;

    pub fn gamma_star(d: u64, k: u64, sigma: u64) -> Rational {
        half() + Rational::new((2 * sigma + d - k + 1).into(), (2 * d * d + 4 * d - 2 * k + 2).into())
    }

    pub fn gamma_general(d: u64, k: u64, sigma: u64) -> Rational {
        half() + Rational::new((2 * sigma + d - k).into(), (2 * d * d + 4 * d - 2 * k).into())
    }

    pub fn gamma_yl(d: u64, sigma: u64) -> Rational {
        half() + Rational::new(sigma.into(), (2 * s_int(d)).into())
    }

    pub fn gamma_xl(d: u64, sigma: u64) -> Rational {
        gamma_yl(d, sigma + 1)
    }

    pub fn gamma_nl(d: u64, sigma: u64) -> Rational {
        gamma_yl(d + 1, sigma + 1)
    }

    pub fn gamma_tilde(d: u64, k: u64, sigma_tilde: u64) -> Rational {
        gamma_general(d, k, sigma_tilde)
    }

    pub fn disc_gamma(d: u64, k: u64, sigma: u64) -> Rational {
        half() + Rational::new((d - k + 2 * sigma + 1).into(), (2 * d * d + 4 * d - 2 * k + 2).into())
    }

    pub fn disc_gamma_star(d: u64, k: u64, sigma: u64) -> Rational {
        half() + Rational::new((d - k + 2 * sigma + 2).into(), (2 * d * d + 4 * d - 2 * k + 4).into())
    }

    /// `f(t) = (s(d) + sigma + (d-k) t) / (2 s(d) + d - k)`.
    pub fn self_improve(d: u64, k: u64, sigma: u64, t: &Rational) -> Rational {
        let s = s_int(d);
        (int(s + sigma) + int(d - k) * t) / int(2 * s + d - k)
    }

    /// Slope `(d-k) / (2 s(d) + d - k)` of the self-improving map.
    pub fn self_improve_slope(d: u64, k: u64) -> Rational {
        Rational::new((d - k).into(), (2 * s_int(d) + d - k).into())
    }
}

/// Closed form for the classical family `(T, ..., T^d)`, where the top
/// `d-k` degrees sum to `(d-k)(d+k+1)/2`.
pub fn gamma_tilde_classical(d: u64, k: u64) -> Rational {
    half() + Rational::new(((d - k) * (d + k + 2)).into(), (2 * d * d + 4 * d - 2 * k).into())
}

struct Facts {
    d: u64,
    k: u64,
    sigma: u64,
    sigma_tilde: u64,
    case: CaseLabel,
    wronskian: bool,
}

fn facts(fam: &PolynomialFamily, k: usize) -> Result<Facts, ExponentError> {
    let stats = degree_stats(fam, k)?;
    Ok(Facts {
        d: fam.d() as u64,
        k: k as u64,
        sigma: stats.sigma,
        sigma_tilde: stats.sigma_tilde,
        case: classify_case(fam, k)?,
        wronskian: fam.wronskian().is_nonvanishing(),
    })
}

fn need_wronskian(f: &Facts) -> Result<(), Inapplicable> {
    if f.wronskian {
        Ok(())
    } else {
        Err(Inapplicable::WronskianVanishes)
    }
}

fn need_case(f: &Facts, required: char) -> Result<(), Inapplicable> {
    let actual = f.case.letter();
    if actual == required {
        Ok(())
    } else {
        Err(Inapplicable::WrongCase { required, actual })
    }
}

fn need_below_s(sigma: u64, d: u64) -> Result<(), Inapplicable> {
    let limit = s_int(d);
    if sigma < limit {
        Ok(())
    } else {
        Err(Inapplicable::DegreeSumTooLarge { sigma, limit })
    }
}

/// The earlier-literature exponent, for comparison only.
pub fn gamma_star(fam: &PolynomialFamily, k: usize) -> Result<Rational, ExponentError> {
    let f = facts(fam, k)?;
    Ok(closed_form::gamma_star(f.d, f.k, f.sigma))
}

pub fn gamma_general(fam: &PolynomialFamily, k: usize) -> Result<Rational, ExponentError> {
    let f = facts(fam, k)?;
    need_wronskian(&f)?;
    Ok(closed_form::gamma_general(f.d, f.k, f.sigma))
}

/// Whether `sigma_k < s(d)`, i.e. the general exponent is below one.
pub fn is_nontrivial(fam: &PolynomialFamily, k: usize) -> Result<bool, ExponentError> {
    let f = facts(fam, k)?;
    Ok(f.sigma < s_int(f.d))
}

/// Exponent when a linear member sits in the `y` part.
pub fn gamma_yl(fam: &PolynomialFamily, k: usize) -> Result<Rational, ExponentError> {
    let f = facts(fam, k)?;
    need_wronskian(&f)?;
    need_case(&f, 'A')?;
    Ok(closed_form::gamma_yl(f.d, f.sigma))
}

/// Exponent when the only linear members sit in the `x` part.
pub fn gamma_xl(fam: &PolynomialFamily, k: usize) -> Result<Rational, ExponentError> {
    let f = facts(fam, k)?;
    need_wronskian(&f)?;
    need_case(&f, 'B')?;
    if f.k < 2 {
        return Err(Inapplicable::SplitTooSmall.into());
    }
    Ok(closed_form::gamma_xl(f.d, f.sigma))
}

/// Exponent for families without a linear member, via the family extended by `T`.
pub fn gamma_nl(fam: &PolynomialFamily, k: usize) -> Result<Rational, ExponentError> {
    let f = facts(fam, k)?;
    need_case(&f, 'C')?;
    if !fam.augmented_with_linear()?.wronskian().is_nonvanishing() {
        return Err(Inapplicable::AugmentedWronskianVanishes.into());
    }
    Ok(closed_form::gamma_nl(f.d, f.sigma))
}

/// Projection exponent built from the `d-k` largest degrees.
pub fn gamma_tilde(fam: &PolynomialFamily, k: usize) -> Result<Rational, ExponentError> {
    let f = facts(fam, k)?;
    need_wronskian(&f)?;
    need_below_s(f.sigma_tilde, f.d)?;
    Ok(closed_form::gamma_tilde(f.d, f.k, f.sigma_tilde))
}

/// Discrepancy exponent.
pub fn disc_gamma(fam: &PolynomialFamily, k: usize) -> Result<Rational, ExponentError> {
    let f = facts(fam, k)?;
    need_wronskian(&f)?;
    need_below_s(f.sigma, f.d)?;
    Ok(closed_form::disc_gamma(f.d, f.k, f.sigma))
}

/// Earlier-literature discrepancy exponent, for comparison only.
pub fn disc_gamma_star(fam: &PolynomialFamily, k: usize) -> Result<Rational, ExponentError> {
    let f = facts(fam, k)?;
    Ok(closed_form::disc_gamma_star(f.d, f.k, f.sigma))
}

/// The affine map `f` whose iterates from `1` decrease to the case A exponent.
pub fn self_improve_map(fam: &PolynomialFamily, k: usize, t: &Rational) -> Result<Rational, ExponentError> {
    let f = facts(fam, k)?;
    need_case(&f, 'A')?;
    Ok(closed_form::self_improve(f.d, f.k, f.sigma, t))
}

/// Iterates of the self-improving map.
#[derive(Clone, Debug, PartialEq)]
pub struct FixedPointTrace {
    pub value: Rational,
    /// `t_0, t_1, ..., t_m` with `|t_m - t_{m-1}| <= tol`.
    pub trace: Vec<Rational>,
    /// The exact fixed point, obtained by solving the affine equation.
    pub exact: Rational,
}

impl FixedPointTrace {
    pub fn steps(&self) -> usize {
        self.trace.len() - 1
    }
}

/// Upper bound `ceil(log tol / log slope) + 1` on the iterations needed to
/// reach successive differences `<= tol` from a start within `1/2` of the limit.
pub fn fixed_point_step_bound(slope: &Rational, tol: &Rational) -> usize {
    let slope = slope.to_f64().unwrap_or(0.0);
    let tol = tol.to_f64().unwrap_or(0.0);
    if slope <= 0.0 {
        return 1;
    }
    ((tol.ln() / slope.ln()).ceil().max(0.0) as usize) + 1
}

pub fn fixed_point(
    fam: &PolynomialFamily,
    k: usize,
    t0: &Rational,
    tol: &Rational,
) -> Result<FixedPointTrace, ExponentError> {
    let f = facts(fam, k)?;
    need_case(&f, 'A')?;
    if !tol.is_positive() {
        return Err(ExponentError::BadTolerance);
    }
    let exact = closed_form::gamma_yl(f.d, f.sigma);
    if t0 < &exact || t0 > &Rational::one() {
        return Err(ExponentError::StartOutOfRange { lower: exact.to_string() });
    }
    let slope = closed_form::self_improve_slope(f.d, f.k);
    assert!(slope < Rational::one(), "self-improving map must be a contraction");
    let cap = fixed_point_step_bound(&slope, tol) + 1;

    let mut trace = vec![t0.clone()];
    loop {
        let prev = trace.last().expect("nonempty");
        let next = closed_form::self_improve(f.d, f.k, f.sigma, prev);
        let done = (&next - prev).abs() <= *tol;
        trace.push(next);
        if done {
            break;
        }
        assert!(trace.len() <= cap + 1, "iteration failed to contract");
    }
    Ok(FixedPointTrace { value: trace.last().cloned().expect("nonempty"), trace, exact })
}

/// Which result supplied the selected exponent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundTag {
    /// Linear member in `y`.
    LinearInY,
    /// Linear member moved from `x` into `y`.
    LinearFromX,
    /// `T` appended to the family.
    LinearAppended,
    /// Applies to any family with nonvanishing Wronskian.
    General,
    /// `|T| <= sum |a_n|`, exponent one.
    Trivial,
}

impl BoundTag {
    pub fn name(&self) -> &'static str {
        match self {
            BoundTag::LinearInY => "linear_in_y",
            BoundTag::LinearFromX => "linear_from_x",
            BoundTag::LinearAppended => "linear_appended",
            BoundTag::General => "general",
            BoundTag::Trivial => "trivial",
        }
    }
}

impl fmt::Display for BoundTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A computed exponent or the reason it does not apply.
#[derive(Clone, Debug, PartialEq)]
pub enum Entry {
    Value(Rational),
    Inapplicable(String),
}

impl Entry {
    fn from_result(r: Result<Rational, ExponentError>) -> Entry {
        match r {
            Ok(v) => Entry::Value(v),
            Err(e) => Entry::Inapplicable(e.to_string()),
        }
    }

    pub fn value(&self) -> Option<&Rational> {
        match self {
            Entry::Value(v) => Some(v),
            Entry::Inapplicable(_) => None,
        }
    }
}

/// Serializes a rational as `{num, den, decimal}`.
pub struct RationalJson<'a>(pub &'a Rational);

fn big_to_json(x: &BigInt) -> serde_json::Value {
    match x.to_i64() {
        Some(v) => serde_json::Value::from(v),
        None => serde_json::Value::from(x.to_string()),
    }
}

impl Serialize for RationalJson<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("Rational", 3)?;
        s.serialize_field("num", &big_to_json(self.0.numer()))?;
        s.serialize_field("den", &big_to_json(self.0.denom()))?;
        s.serialize_field("decimal", &decimal(self.0, 17))?;
        s.end()
    }
}

impl Serialize for Entry {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Entry::Value(v) => RationalJson(v).serialize(serializer),
            Entry::Inapplicable(reason) => {
                let mut s = serializer.serialize_struct("Inapplicable", 1)?;
                s.serialize_field("inapplicable", reason)?;
                s.end()
            }
        }
    }
}

/// Decimal expansion with `digits` fractional digits, truncated toward zero.
pub fn decimal(x: &Rational, digits: usize) -> String {
    let neg = x.is_negative();
    let x = x.abs();
    let whole = x.numer() / x.denom();
    let mut rem = x.numer() - &whole * x.denom();
    let mut out = format!("{}{}.", if neg { "-" } else { "" }, whole);
    for _ in 0..digits {
        rem *= 10;
        let digit = &rem / x.denom();
        rem -= &digit * x.denom();
        out.push_str(&digit.to_string());
    }
    out
}

/// Selected exponent with its source.
#[derive(Clone, Debug, PartialEq)]
pub struct Best {
    pub value: Rational,
    pub tag: BoundTag,
    /// Other sources that attain the same value; the precedence rule chose `tag`.
    pub tied_with: Vec<BoundTag>,
}

impl Serialize for Best {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("Best", 3)?;
        s.serialize_field("value", &RationalJson(&self.value))?;
        s.serialize_field("tag", &self.tag)?;
        s.serialize_field("tied_with", &self.tied_with)?;
        s.end()
    }
}

/// Every exponent for one `(family, k)` with applicability flags.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExponentReport {
    pub family: String,
    pub d: u64,
    pub k: u64,
    pub case: char,
    pub sigma: u64,
    pub sigma_tilde: u64,
    /// `sigma_k < s(d)`.
    pub nontrivial: bool,
    pub wronskian_nonvanishing: bool,
    /// `None` when the family already contains `T`.
    pub augmented_wronskian_nonvanishing: Option<bool>,
    pub gamma_star: Entry,
    pub gamma_general: Entry,
    pub gamma_yl: Entry,
    pub gamma_xl: Entry,
    pub gamma_nl: Entry,
    pub gamma_tilde: Entry,
    pub disc_gamma: Entry,
    pub disc_gamma_star: Entry,
    pub best: Best,
}

/// Computes every exponent and selects the smallest applicable one. Exact
/// ties go to the earlier source in `LinearInY, LinearFromX, LinearAppended,
/// General`; the comparison exponents are never selected. When nothing
/// applicable is below one the trivial exponent is reported.
pub fn best_bound(fam: &PolynomialFamily, k: usize) -> Result<ExponentReport, ExponentError> {
    let f = facts(fam, k)?;
    // families that already contain T have no augmented family
    let augmented = fam.augmented_with_linear().ok().map(|a| a.wronskian().is_nonvanishing());

    let gamma_general = Entry::from_result(self::gamma_general(fam, k));
    let gamma_yl = Entry::from_result(self::gamma_yl(fam, k));
    let gamma_xl = Entry::from_result(self::gamma_xl(fam, k));
    let gamma_nl = Entry::from_result(self::gamma_nl(fam, k));

    let mut candidates: Vec<(Rational, BoundTag)> = [
        (&gamma_yl, BoundTag::LinearInY),
        (&gamma_xl, BoundTag::LinearFromX),
        (&gamma_nl, BoundTag::LinearAppended),
        (&gamma_general, BoundTag::General),
    ]
    .into_iter()
    .filter_map(|(e, tag)| e.value().map(|v| (v.clone(), tag)))
    .collect();
    candidates.push((Rational::one(), BoundTag::Trivial));
    candidates.sort();
    let (value, tag) = candidates[0].clone();
    let tied_with = candidates[1..].iter().filter(|(v, _)| *v == value).map(|(_, t)| *t).collect();

    Ok(ExponentReport {
        family: fam.to_string(),
        d: f.d,
        k: f.k,
        case: f.case.letter(),
        sigma: f.sigma,
        sigma_tilde: f.sigma_tilde,
        nontrivial: f.sigma < s_int(f.d),
        wronskian_nonvanishing: f.wronskian,
        augmented_wronskian_nonvanishing: augmented,
        gamma_star: Entry::from_result(self::gamma_star(fam, k)),
        gamma_general,
        gamma_yl,
        gamma_xl,
        gamma_nl,
        gamma_tilde: Entry::from_result(self::gamma_tilde(fam, k)),
        disc_gamma: Entry::from_result(self::disc_gamma(fam, k)),
        disc_gamma_star: Entry::from_result(self::disc_gamma_star(fam, k)),
        best: Best { value, tag, tied_with },
    })
}
