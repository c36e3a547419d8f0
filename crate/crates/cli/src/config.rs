//! Experiment configuration, read from TOML or JSON.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use weyl_core::exponents::{parse_rational, Rational};
use weyl_core::expsum::{Envelope, WeightSeq};
use weyl_core::polyfam::PolynomialFamily;

use crate::error::AppError;

/// Highest dyadic exponent accepted in a schedule.
pub const MAX_SCHEDULE_EXP: u32 = 26;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// `sup_y |T(x, y; N)|` over random `x`.
    Sweep,
    /// Sup over `y` of the classical sum over `(M, M + N]`, `x` the top coefficient.
    Short,
    /// `D(u; N)` over random `u`.
    Discrepancy,
    /// `max_M D(u; M, N)` over sampled offsets.
    DiscrepancyShort,
    /// Census at every `(alpha, N)` with box-count slopes.
    Dimscan,
}

/// `N_i = 2^i` for `min_exp <= i <= max_exp`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    pub min_exp: u32,
    pub max_exp: u32,
}

impl Schedule {
    pub fn values(&self) -> Vec<u64> {
        (self.min_exp..=self.max_exp).map(|i| 1u64 << i).collect()
    }

    pub fn max(&self) -> u64 {
        1 << self.max_exp
    }
}

/// A real given as a number or as an exact string such as `"3/4"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RationalSpec {
    Number(f64),
    Text(String),
}

impl RationalSpec {
    pub fn to_rational(&self) -> Result<Rational, AppError> {
        match self {
            RationalSpec::Text(s) => parse_rational(s).map_err(AppError::Config),
            RationalSpec::Number(x) => {
                // the shortest decimal that round-trips is what the user typed
                parse_rational(&format!("{x}")).map_err(AppError::Config)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightSpec {
    #[default]
    Unit,
    /// `values[i] = [re, im]` is `a_{i+1}`.
    Explicit { values: Vec<[f64; 2]>, constant: f64, exponent: f64 },
}

impl WeightSpec {
    pub fn build(&self) -> Result<WeightSeq, AppError> {
        match self {
            WeightSpec::Unit => Ok(WeightSeq::Unit),
            WeightSpec::Explicit { values, constant, exponent } => WeightSeq::explicit(
                values.iter().map(|[re, im]| Complex64::new(*re, *im)).collect(),
                Envelope { constant: *constant, exponent: *exponent },
            )
            .map_err(|e| AppError::Config(e.to_string())),
        }
    }
}

fn default_oversample() -> usize {
    4
}
fn default_samples_per_box() -> u32 {
    4
}
fn default_offsets() -> u32 {
    4
}
fn default_budget() -> f64 {
    1e10
}
fn default_epsilon() -> RationalSpec {
    RationalSpec::Text("0.05".into())
}
fn default_alphas() -> Vec<RationalSpec> {
    vec![RationalSpec::Text("1/2".into())]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlopeCheck {
    /// Per-sample slopes must not exceed this...
    pub max_slope: f64,
    /// ...for at least this fraction of samples.
    pub min_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub id: String,
    pub kind: ExperimentKind,
    /// Family literal: `classical:d` or a list of coefficient lists.
    pub family: String,
    /// Number of leading members carried by the random `x`.
    pub k: usize,
    #[serde(default)]
    pub weights: WeightSpec,
    pub schedule: Schedule,
    /// Large-value thresholds; the first one also sets the `y` grid resolution.
    #[serde(default = "default_alphas")]
    pub alphas: Vec<RationalSpec>,
    #[serde(default = "default_epsilon")]
    pub epsilon: RationalSpec,
    pub samples: u64,
    pub seed: u64,
    #[serde(default = "default_oversample")]
    pub oversample: usize,
    #[serde(default = "default_samples_per_box")]
    pub samples_per_box: u32,
    /// Offsets `M` drawn per sample in the short-interval modes.
    #[serde(default = "default_offsets")]
    pub offsets: u32,
    /// Sample 0 uses `x = 0` instead of a random point.
    #[serde(default)]
    pub include_zero: bool,
    /// Operation budget checked before any computation.
    #[serde(default = "default_budget")]
    pub budget: f64,
    #[serde(default)]
    pub slope_check: Option<SlopeCheck>,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, AppError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AppError::Config(format!("cannot read {}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let cfg = if is_json { Self::from_json(&text)? } else { Self::from_toml(&text)? };
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self, AppError> {
        let cfg: Self = toml::from_str(text).map_err(|e| AppError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self, AppError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| AppError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), AppError> {
        let bad = |m: String| Err(AppError::Config(m));
        if self.id.is_empty() || self.id.contains(['\n', ',', '"']) {
            return bad(format!("experiment id {:?} must be nonempty without commas, quotes or newlines", self.id));
        }
        let fam = self.family()?;
        if self.k == 0 || self.k > fam.d() {
            return bad(format!("k = {} outside 1..={}", self.k, fam.d()));
        }
        if self.schedule.min_exp > self.schedule.max_exp || self.schedule.max_exp > MAX_SCHEDULE_EXP {
            return bad(format!(
                "schedule 2^{}..2^{} must be increasing with exponents at most {MAX_SCHEDULE_EXP}",
                self.schedule.min_exp, self.schedule.max_exp
            ));
        }
        if self.samples == 0 {
            return bad("samples must be at least 1".into());
        }
        if self.oversample < 2 {
            return bad("oversample must be at least 2".into());
        }
        if self.samples_per_box == 0 {
            return bad("samples_per_box must be at least 1".into());
        }
        if self.alphas.is_empty() {
            return bad("alphas must not be empty".into());
        }
        for a in self.alpha_values()? {
            if a <= Rational::from_integer(0.into()) || a >= Rational::from_integer(1.into()) {
                return bad(format!("alpha {a} outside (0, 1)"));
            }
        }
        if self.epsilon()? <= Rational::from_integer(0.into()) {
            return bad("epsilon must be positive".into());
        }
        if self.budget.is_nan() || self.budget <= 0.0 {
            return bad("budget must be positive".into());
        }
        let weights = self.weights.build()?;
        weights.check_len(self.schedule.max()).map_err(|e| AppError::Config(e.to_string()))?;
        if matches!(self.kind, ExperimentKind::Short | ExperimentKind::DiscrepancyShort) {
            if !fam.is_classical() {
                return bad("short-interval modes need a classical family".into());
            }
            if self.kind == ExperimentKind::Short && (self.k != 1 || fam.d() < 2) {
                return bad("short mode takes k = 1 (the top coefficient) and d >= 2".into());
            }
        }
        Ok(())
    }

    pub fn family(&self) -> Result<PolynomialFamily, AppError> {
        self.family.parse().map_err(|e: weyl_core::polyfam::FamilyError| AppError::Config(e.to_string()))
    }

    pub fn alpha_values(&self) -> Result<Vec<Rational>, AppError> {
        self.alphas.iter().map(RationalSpec::to_rational).collect()
    }

    pub fn epsilon(&self) -> Result<Rational, AppError> {
        self.epsilon.to_rational()
    }
}
