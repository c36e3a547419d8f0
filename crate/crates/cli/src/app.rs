//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use num_traits::ToPrimitive;
use weyl_core::census::{
    census, counting_bound, grid_sides, per_box_projection_bound, project_union, MonteCarloOptions, ProjectionSpec,
    DEFAULT_BOX_BUDGET,
};
use weyl_core::discrepancy::{erdos_turan_bound_poly, poly_discrepancy, short_interval_discrepancy};
use weyl_core::exponents::{best_bound, parse_rational, Entry, ExponentReport, Rational};
use weyl_core::expsum::{
    completion_fft, completion_naive, exact_moment_grid, moment_integral, short_interval_sum, vinogradov_count,
    weyl_sum, WeightSeq,
};
use weyl_core::polyfam::PolynomialFamily;
use weyl_core::{Phase, TorusPoint};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::AppError;
use crate::scan::{dimension_scan, discrepancy_growth, median_normalized_at_top};
use crate::sweep::{fits_by_sample, metric_sweep, records_table, RunRecord};
use crate::table::{Cell, Format, Header, Table};

#[derive(Parser, Debug)]
#[command(name = "weyl-lab", version, about = "Weyl sums, large values and discrepancy of polynomial sequences")]
struct Cli {
    /// Experiment configuration (TOML, or JSON when the extension is .json).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, default_value = "csv", value_parser = ["csv", "json"])]
    out: String,
    /// Write to this file instead of standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct FamilyArg {
    /// `classical:d` or coefficient lists, lowest degree first, e.g. `[[0,1],[0,0,1]]`.
    #[arg(long, default_value = "classical:2")]
    family: String,
}

#[derive(Args, Debug, Clone)]
struct PointArgs {
    #[command(flatten)]
    family: FamilyArg,
    /// Coefficients `u_1,...,u_d` as decimals or fractions.
    #[arg(long, allow_hyphen_values = true)]
    u: String,
    #[arg(long = "N")]
    n: u64,
}

#[derive(Args, Debug, Clone)]
struct CensusArgs {
    #[command(flatten)]
    family: FamilyArg,
    #[arg(long = "N")]
    n: u64,
    #[arg(long)]
    alpha: String,
    #[arg(long, default_value = "0.05")]
    epsilon: String,
    #[arg(long, default_value_t = 4)]
    samples_per_box: u32,
    /// Maximum number of boxes.
    #[arg(long, default_value_t = DEFAULT_BOX_BUDGET as u64)]
    box_budget: u64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exponent table for a family and split.
    Exponents {
        #[command(flatten)]
        family: FamilyArg,
        /// Split size; all `1..=d` when omitted.
        #[arg(long)]
        k: Option<usize>,
    },
    /// One sum, optionally over the shifted range `(M, M + N]` (classical only).
    Sum {
        #[command(flatten)]
        point: PointArgs,
        #[arg(long = "M", allow_hyphen_values = true)]
        m: Option<i64>,
    },
    /// The completion majorant `W` next to `|T|`.
    Completion {
        #[command(flatten)]
        point: PointArgs,
        /// Use the quadratic reference evaluation.
        #[arg(long)]
        naive: bool,
    },
    /// Discrepancy of one sequence, or a growth experiment with `--config`.
    Discrepancy {
        #[command(flatten)]
        family: FamilyArg,
        #[arg(long, allow_hyphen_values = true)]
        u: Option<String>,
        #[arg(long = "N")]
        n: Option<u64>,
        #[arg(long = "M", allow_hyphen_values = true)]
        m: Option<i64>,
        /// Also report the Erdős–Turán bound with this many frequencies.
        #[arg(long = "G")]
        g: Option<u64>,
    },
    /// Metric sweep from `--config` (kind `sweep` or `short`).
    Sweep {
        #[arg(long)]
        samples: Option<u64>,
    },
    /// Large-value census at one `N`.
    Census {
        #[command(flatten)]
        args: CensusArgs,
    },
    /// Census followed by the measure of the projected marked set.
    Project {
        #[command(flatten)]
        args: CensusArgs,
        /// Direction `w_1,...,w_d` (normalized internally).
        #[arg(long, allow_hyphen_values = true, conflicts_with = "axes")]
        direction: Option<String>,
        /// Project onto the first `k` coordinates.
        #[arg(long)]
        axes: Option<usize>,
        #[arg(long, default_value_t = 200_000)]
        mc_samples: u64,
    },
    /// Box-count scan from `--config` (kind `dimscan`).
    Dimscan,
    /// Exact Vinogradov count, checked against the moment integral.
    Vinogradov {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        s: usize,
        #[arg(long = "N")]
        n: u64,
    },
}

/// Result of a command: a table plus optional extra JSON lines.
struct Output {
    experiment: String,
    seed: u64,
    table: Table,
    /// Replaces the table rows in JSON mode when present.
    json_rows: Option<Vec<String>>,
    notes: Vec<String>,
}

impl Output {
    fn table(experiment: &str, seed: u64, table: Table) -> Self {
        Output { experiment: experiment.into(), seed, table, json_rows: None, notes: Vec::new() }
    }
}

/// Entry point used by the binary. Returns the process exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(args, &mut stdout.lock(), &mut stderr.lock())
}

/// Like [`cli_main`] with explicit streams.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), AppError> {
    let format: Format = cli.out.parse().map_err(AppError::Config)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(AppError::Config("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(t);
    }
    let pool = pool.build().map_err(|e| AppError::Config(e.to_string()))?;
    let result = pool.install(|| dispatch(cli))?;

    let command = command_name(&cli.command);
    let header = Header { experiment: result.experiment.clone(), command: command.into(), seed: result.seed };
    let mut buffer = Vec::new();
    match (&result.json_rows, format) {
        (Some(rows), Format::Json) => {
            Table::new(Vec::<String>::new()).write(&header, Format::Json, &mut buffer).expect("in memory");
            for r in rows {
                buffer.extend_from_slice(r.as_bytes());
                buffer.push(b'\n');
            }
        }
        _ => result.table.write(&header, format, &mut buffer).expect("in memory"),
    }
    match &cli.output {
        Some(path) => std::fs::write(path, &buffer)
            .map_err(|e| AppError::Config(format!("cannot write {}: {e}", path.display())))?,
        None => out.write_all(&buffer).map_err(|e| AppError::Config(e.to_string()))?,
    }
    for note in &result.notes {
        let _ = writeln!(err, "{note}");
    }
    Ok(())
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Exponents { .. } => "exponents",
        Command::Sum { .. } => "sum",
        Command::Completion { .. } => "completion",
        Command::Discrepancy { .. } => "discrepancy",
        Command::Sweep { .. } => "sweep",
        Command::Census { .. } => "census",
        Command::Project { .. } => "project",
        Command::Dimscan => "dimscan",
        Command::Vinogradov { .. } => "vinogradov",
    }
}

fn load_config(cli: &Cli, kinds: &[ExperimentKind]) -> Result<ExperimentConfig, AppError> {
    let path = cli.config.as_ref().ok_or_else(|| AppError::Config("this command needs --config".into()))?;
    let mut cfg = ExperimentConfig::from_path(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if !kinds.contains(&cfg.kind) {
        return Err(AppError::Config(format!("experiment kind {:?} does not fit this command", cfg.kind)));
    }
    Ok(cfg)
}

fn dispatch(cli: &Cli) -> Result<Output, AppError> {
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::Exponents { family, k } => exponents_cmd(&family.family, *k),
        Command::Sum { point, m } => sum_cmd(point, *m),
        Command::Completion { point, naive } => completion_cmd(point, *naive),
        Command::Discrepancy { family, u, n, m, g } => {
            if cli.config.is_some() {
                let cfg = load_config(cli, &[ExperimentKind::Discrepancy, ExperimentKind::DiscrepancyShort])?;
                return discrepancy_experiment(&cfg);
            }
            let (u, n) = match (u, n) {
                (Some(u), Some(n)) => (u, *n),
                _ => return Err(AppError::Config("discrepancy needs --u and --N, or --config".into())),
            };
            discrepancy_cmd(&family.family, u, n, *m, *g)
        }
        Command::Sweep { samples } => {
            let mut cfg = load_config(cli, &[ExperimentKind::Sweep, ExperimentKind::Short])?;
            if let Some(s) = samples {
                cfg.samples = *s;
                cfg.validate()?;
            }
            sweep_experiment(&cfg)
        }
        Command::Census { args } => census_cmd(args, seed),
        Command::Project { args, direction, axes, mc_samples } => {
            project_cmd(args, direction.as_deref(), *axes, *mc_samples, seed)
        }
        Command::Dimscan => {
            let cfg = load_config(cli, &[ExperimentKind::Dimscan])?;
            Ok(Output::table(&cfg.id, cfg.seed, dimension_scan(&cfg)?))
        }
        Command::Vinogradov { d, s, n } => vinogradov_cmd(*d, *s, *n),
    }
}

fn parse_family(text: &str) -> Result<PolynomialFamily, AppError> {
    Ok(text.parse::<PolynomialFamily>()?)
}

/// Nearest 64-bit phase to `r mod 1`.
fn phase_of(r: &Rational) -> Result<Phase, AppError> {
    let num = r.numer().to_i64();
    let den = r.denom().to_u64();
    match (num, den) {
        (Some(n), Some(d)) => Ok(Phase::from_ratio(n, d)),
        _ => Err(AppError::Config(format!("coefficient {r} has too many digits"))),
    }
}

fn parse_point(text: &str, d: usize) -> Result<TorusPoint, AppError> {
    let coords = text
        .split(',')
        .map(|t| parse_rational(t.trim()).map_err(AppError::Config).and_then(|r| phase_of(&r)))
        .collect::<Result<Vec<_>, _>>()?;
    if coords.len() != d {
        return Err(AppError::Config(format!("expected {d} coefficients, got {}", coords.len())));
    }
    Ok(TorusPoint::new(coords))
}

fn entry_text(e: &Entry) -> String {
    match e {
        Entry::Value(v) => v.to_string(),
        Entry::Inapplicable(_) => "n/a".into(),
    }
}

const EXPONENT_COLUMNS: [&str; 20] = [
    "family",
    "d",
    "k",
    "case",
    "sigma",
    "sigma_tilde",
    "nontrivial",
    "wronskian_nonvanishing",
    "gamma_star",
    "gamma",
    "gamma_yl",
    "gamma_xl",
    "gamma_nl",
    "gamma_tilde",
    "disc_gamma",
    "disc_gamma_star",
    "best",
    "best_decimal",
    "best_source",
    "tied_with",
];

fn exponent_row(r: &ExponentReport) -> Vec<Cell> {
    vec![
        r.family.clone().into(),
        r.d.into(),
        r.k.into(),
        r.case.to_string().into(),
        r.sigma.into(),
        r.sigma_tilde.into(),
        r.nontrivial.to_string().into(),
        r.wronskian_nonvanishing.to_string().into(),
        entry_text(&r.gamma_star).into(),
        entry_text(&r.gamma_general).into(),
        entry_text(&r.gamma_yl).into(),
        entry_text(&r.gamma_xl).into(),
        entry_text(&r.gamma_nl).into(),
        entry_text(&r.gamma_tilde).into(),
        entry_text(&r.disc_gamma).into(),
        entry_text(&r.disc_gamma_star).into(),
        r.best.value.to_string().into(),
        r.best.value.to_f64().unwrap_or(f64::NAN).into(),
        r.best.tag.name().into(),
        r.best.tied_with.iter().map(|t| t.name()).collect::<Vec<_>>().join(";").into(),
    ]
}

fn exponents_cmd(family: &str, k: Option<usize>) -> Result<Output, AppError> {
    let fam = parse_family(family)?;
    let ks: Vec<usize> = match k {
        Some(k) => vec![k],
        None => (1..=fam.d()).collect(),
    };
    let mut table = Table::new(EXPONENT_COLUMNS);
    let mut json = Vec::new();
    for k in ks {
        let report = best_bound(&fam, k)?;
        table.push(exponent_row(&report));
        json.push(serde_json::to_string(&report).expect("reports serialize"));
    }
    let mut o = Output::table("exponents", 0, table);
    o.json_rows = Some(json);
    Ok(o)
}

fn sum_cmd(p: &PointArgs, m: Option<i64>) -> Result<Output, AppError> {
    let fam = parse_family(&p.family.family)?;
    let u = parse_point(&p.u, fam.d())?;
    let mut table = Table::new(["N", "M", "re", "im", "abs", "prefix_max"]);
    match m {
        Some(m) => {
            if !fam.is_classical() {
                return Err(AppError::Config("--M needs a classical family".into()));
            }
            let s = short_interval_sum(&u, m, p.n)?;
            table.push(vec![p.n.into(), m.into(), s.re.into(), s.im.into(), s.norm().into(), Cell::Empty]);
        }
        None => {
            let t = weyl_sum(&fam, &u, &WeightSeq::Unit, p.n)?;
            table.push(vec![
                p.n.into(),
                0i64.into(),
                t.value.re.into(),
                t.value.im.into(),
                t.value.norm().into(),
                t.prefix_max.into(),
            ]);
        }
    }
    Ok(Output::table("sum", 0, table))
}

fn completion_cmd(p: &PointArgs, naive: bool) -> Result<Output, AppError> {
    let fam = parse_family(&p.family.family)?;
    let u = parse_point(&p.u, fam.d())?;
    let t = weyl_sum(&fam, &u, &WeightSeq::Unit, p.n)?;
    let c = if naive {
        completion_naive(&fam, &u, &WeightSeq::Unit, p.n)?
    } else {
        completion_fft(&fam, &u, &WeightSeq::Unit, p.n)?
    };
    let mut table = Table::new(["N", "W", "abs_sum", "prefix_max", "prefix_max_over_W"]);
    table.push(vec![
        p.n.into(),
        c.w.into(),
        t.value.norm().into(),
        t.prefix_max.into(),
        (t.prefix_max / c.w).into(),
    ]);
    Ok(Output::table("completion", 0, table))
}

fn discrepancy_cmd(family: &str, u: &str, n: u64, m: Option<i64>, g: Option<u64>) -> Result<Output, AppError> {
    let fam = parse_family(family)?;
    let point = parse_point(u, fam.d())?;
    let r = match m {
        Some(m) => {
            if !fam.is_classical() {
                return Err(AppError::Config("--M needs a classical family".into()));
            }
            short_interval_discrepancy(&point, m, n)?
        }
        None => poly_discrepancy(&fam, &point, n)?,
    };
    let et = match g {
        Some(g) if m.is_none() => Some(erdos_turan_bound_poly(&fam, &point, n, g)?),
        Some(_) => return Err(AppError::Config("--G is only available without --M".into())),
        None => None,
    };
    let mut table = Table::new(["N", "value", "a", "b", "side", "D_over_sqrtN", "erdos_turan_bound"]);
    table.push(vec![
        r.n.into(),
        r.value.into(),
        r.a.into(),
        r.b.into(),
        format!("{:?}", r.side).to_lowercase().into(),
        r.normalized().into(),
        Cell::from(et),
    ]);
    Ok(Output::table("discrepancy", 0, table))
}

fn slope_notes(records: &[RunRecord], cfg: &ExperimentConfig, notes: &mut Vec<String>) -> Result<(), AppError> {
    let fits = fits_by_sample(records);
    let slopes: Vec<f64> = fits.iter().filter_map(|(_, f)| f.as_ref().ok().map(|f| f.slope)).collect();
    if slopes.is_empty() {
        notes.push("report: no sample had enough positive points for a slope fit".into());
        return Ok(());
    }
    let mut sorted = slopes.clone();
    sorted.sort_by(f64::total_cmp);
    notes.push(format!(
        "report: {} fitted slopes, median {:.4}, min {:.4}, max {:.4}",
        sorted.len(),
        sorted[sorted.len() / 2],
        sorted[0],
        sorted[sorted.len() - 1]
    ));
    if cfg.kind == ExperimentKind::Short {
        let d = cfg.family()?.d() as f64;
        notes.push(format!("report: short-interval reference exponent 1 - 1/(d+1) = {:.4}", 1.0 - 1.0 / (d + 1.0)));
    }
    if let Some(check) = &cfg.slope_check {
        let ok = slopes.iter().filter(|&&s| s <= check.max_slope).count();
        let frac = ok as f64 / fits.len() as f64;
        let verdict = if frac >= check.min_fraction { "PASS" } else { "WARN" };
        notes.push(format!(
            "soft-check {verdict}: {ok}/{} slopes <= {} (need fraction {})",
            fits.len(),
            check.max_slope,
            check.min_fraction
        ));
    }
    Ok(())
}

fn sweep_experiment(cfg: &ExperimentConfig) -> Result<Output, AppError> {
    let records = metric_sweep(cfg)?;
    let mut o = Output::table(&cfg.id, cfg.seed, records_table(&records));
    slope_notes(&records, cfg, &mut o.notes)?;
    Ok(o)
}

fn discrepancy_experiment(cfg: &ExperimentConfig) -> Result<Output, AppError> {
    let records = discrepancy_growth(cfg)?;
    let mut o = Output::table(&cfg.id, cfg.seed, records_table(&records));
    if let Some(m) = median_normalized_at_top(&records) {
        o.notes.push(format!("report: median D/sqrt(N) at the largest N is {m:.4}"));
    }
    slope_notes(&records, cfg, &mut o.notes)?;
    Ok(o)
}

fn census_grid(args: &CensusArgs) -> Result<(PolynomialFamily, weyl_core::census::BoxGrid), AppError> {
    let fam = parse_family(&args.family.family)?;
    let alpha = parse_rational(&args.alpha).map_err(AppError::Config)?;
    let eps = parse_rational(&args.epsilon).map_err(AppError::Config)?;
    let grid = grid_sides(&fam, args.n, &alpha, &eps, args.box_budget as u128)?;
    Ok((fam, grid))
}

fn census_cmd(args: &CensusArgs, seed: u64) -> Result<Output, AppError> {
    let (fam, grid) = census_grid(args)?;
    let r = census(&fam, &WeightSeq::Unit, &grid, args.samples_per_box, seed)?;
    let mut table = Table::new([
        "N",
        "alpha",
        "epsilon",
        "U",
        "marked",
        "threshold",
        "samples_above",
        "empirical_moment",
        "moment_order",
        "counting_bound",
        "sides",
    ]);
    let sides: Vec<String> = grid.divisions.iter().map(|m| format!("1/{m}")).collect();
    table.push(vec![
        r.n.into(),
        grid.alpha.to_string().into(),
        grid.epsilon.to_string().into(),
        r.total.into(),
        r.marked.into(),
        r.threshold.into(),
        r.samples_above.into(),
        r.empirical_moment.into(),
        r.moment_order.into(),
        counting_bound(&grid).into(),
        sides.join(";").into(),
    ]);
    Ok(Output::table("census", seed, table))
}

fn parse_reals(text: &str) -> Result<Vec<f64>, AppError> {
    text.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| AppError::Config(format!("bad number {t:?}: {e}"))))
        .collect()
}

fn project_cmd(
    args: &CensusArgs,
    direction: Option<&str>,
    axes: Option<usize>,
    mc_samples: u64,
    seed: u64,
) -> Result<Output, AppError> {
    let (fam, grid) = census_grid(args)?;
    let spec = match (direction, axes) {
        (Some(w), None) => ProjectionSpec::direction(&parse_reals(w)?)?,
        (None, Some(k)) => ProjectionSpec::coordinate(fam.d(), k)?,
        _ => return Err(AppError::Config("project needs --direction or --axes".into())),
    };
    let r = census(&fam, &WeightSeq::Unit, &grid, args.samples_per_box, seed)?;
    let p = project_union(&grid, &r.marked_boxes, &spec, MonteCarloOptions { samples: mc_samples, seed })?;
    let bound = if spec.k() == 1 {
        let b = per_box_projection_bound(&grid, &spec)? * r.marked as f64;
        if p.measure > b {
            return Err(AppError::Assertion(format!("projection {} exceeds {b}", p.measure)));
        }
        Some(b)
    } else {
        None
    };
    let mut table = Table::new(["N", "alpha", "U", "marked", "k", "measure", "method", "std_error", "bound"]);
    table.push(vec![
        r.n.into(),
        grid.alpha.to_string().into(),
        r.total.into(),
        r.marked.into(),
        spec.k().into(),
        p.measure.into(),
        format!("{:?}", p.method).to_lowercase().into(),
        Cell::from(p.std_error),
        Cell::from(bound),
    ]);
    Ok(Output::table("project", seed, table))
}

fn vinogradov_cmd(d: usize, s: usize, n: u64) -> Result<Output, AppError> {
    let count = vinogradov_count(d, s, n)?;
    let fam = PolynomialFamily::classical(d)?;
    let two_s = (2 * s) as u32;
    let grid: Vec<usize> = exact_moment_grid(&fam, n, two_s)?
        .into_iter()
        .map(|m| usize::try_from(m).map_err(|_| AppError::Budget(format!("moment grid axis {m} too large"))))
        .collect::<Result<_, _>>()?;
    let moment = moment_integral(&fam, &WeightSeq::Unit, n, two_s, &grid)?;
    let exact = count.to_f64().unwrap_or(f64::INFINITY);
    let rel = (moment - exact).abs() / exact.max(1.0);
    if rel > 1e-6 {
        return Err(AppError::Assertion(format!("moment {moment} differs from count {count}")));
    }
    let mut table = Table::new(["d", "s", "N", "count", "moment", "relative_error"]);
    table.push(vec![d.into(), s.into(), n.into(), count.to_string().into(), moment.into(), rel.into()]);
    Ok(Output::table("vinogradov", 0, table))
}
