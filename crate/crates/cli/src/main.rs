//! `mixcast` — command-line tools for hubs that collect probabilistic
//! forecasts: validate submission files, score them against observed truth,
//! build multi-model ensembles, fit normal mixtures to bin and quantile
//! forecasts, and export plot-ready density/CDF grids.
//!
//! Exit codes are a stable contract: 0 on success, 1 on I/O or structural
//! failures, 2 on semantic validation failures.

use clap::{Parser, Subcommand, ValueEnum};
use mixcast::distributions::Mixture;
use mixcast::ensemble::{
    crps_min_weights, em_weights, ma_ensemble, pmp_weights, quantile_average, PmpMode,
    QuantileAverage,
};
use mixcast::fitting::FitConfig;
use mixcast::formats::{
    parse_submission, parse_truth, serialize_submission, ForecastData, ForecastKey, ForecastKind,
    FormatError, SubmissionTable,
};
use mixcast::representations::mixture_quantiles;
use mixcast::scoring::{crps_bin, crps_mixture, interval_score, log_score, wis, IntervalSet};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

mod parallel;

#[derive(Parser)]
#[command(name = "mixcast", version, about = "Mixture-distribution forecast hub tools")]
struct Cli {
    /// Worker threads for per-forecast work. Output order is always sorted
    /// by forecast key, independent of scheduling.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,

    /// Base seed for operations that draw random samples.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Bin,
    Quantile,
    Mixture,
}

impl From<KindArg> for ForecastKind {
    fn from(k: KindArg) -> ForecastKind {
        match k {
            KindArg::Bin => ForecastKind::Bin,
            KindArg::Quantile => ForecastKind::Quantile,
            KindArg::Mixture => ForecastKind::Mixture,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RuleArg {
    Logs,
    Crps,
    Is,
    Wis,
}

impl RuleArg {
    fn name(&self) -> &'static str {
        match self {
            RuleArg::Logs => "logs",
            RuleArg::Crps => "crps",
            RuleArg::Is => "is",
            RuleArg::Wis => "wis",
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check a submission file, reporting every invalid row.
    Validate {
        submission: PathBuf,
        #[arg(long, value_enum)]
        kind: KindArg,
    },
    /// Score each forecast against the observed truth.
    Score {
        submission: PathBuf,
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long, value_enum)]
        rule: RuleArg,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Quantile levels used to derive intervals from mixture forecasts
        /// (comma-separated; defaults to the 23 hub levels).
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<f64>>,
    },
    /// Combine submissions of the same kind into an ensemble submission.
    Ensemble {
        /// Input submission files, one per model.
        submissions: Vec<PathBuf>,
        #[arg(long, value_enum)]
        kind: KindArg,
        /// `equal`, `pmp`, `pmp-cdf`, `crps-min`, `em`, or an explicit
        /// comma-separated weight list.
        #[arg(long, default_value = "equal")]
        weights: String,
        /// Truth file; required by the performance-based weight schemes.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit shared-sigma normal mixtures to bin or quantile forecasts and
    /// write the result as a mixture submission.
    Fit {
        submission: PathBuf,
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Number of mixture components to fit.
        #[arg(long)]
        components: usize,
        #[arg(long)]
        out: PathBuf,
        /// Per-forecast fit report (objective, iterations, convergence).
        #[arg(long)]
        report: PathBuf,
    },
    /// Emit an (x, pdf, cdf) grid for one mixture forecast.
    Grid {
        submission: PathBuf,
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long)]
        location: String,
        #[arg(long)]
        target: String,
        #[arg(long)]
        unit: String,
        #[arg(long, default_value_t = 200)]
        points: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Errors split by exit code: structural problems exit 1, semantic ones 2.
enum CliError {
    Structural(String),
    Semantic(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Structural(_) => 1,
            CliError::Semantic(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Structural(m) | CliError::Semantic(m) => m,
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        if e.is_structural() {
            CliError::Structural(e.to_string())
        } else {
            CliError::Semantic(e.to_string())
        }
    }
}

fn semantic(msg: impl Into<String>) -> CliError {
    CliError::Semantic(msg.into())
}

fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    std::fs::write(path, content)
        .map_err(|e| CliError::Structural(format!("failed to write {}: {e}", path.display())))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let workers = cli.workers.max(1);
    match cli.command {
        Command::Validate { submission, kind } => cmd_validate(&submission, kind.into()),
        Command::Score {
            submission,
            kind,
            rule,
            truth,
            out,
            levels,
        } => cmd_score(&submission, kind.into(), rule, &truth, &out, levels, workers),
        Command::Ensemble {
            submissions,
            kind,
            weights,
            truth,
            out,
        } => cmd_ensemble(&submissions, kind.into(), &weights, truth.as_deref(), &out),
        Command::Fit {
            submission,
            kind,
            components,
            out,
            report,
        } => cmd_fit(&submission, kind.into(), components, &out, &report, workers),
        Command::Grid {
            submission,
            kind,
            location,
            target,
            unit,
            points,
            out,
        } => cmd_grid(
            &submission,
            kind.into(),
            ForecastKey::new(location, target, unit),
            points,
            &out,
        ),
    }
}

fn load_valid(path: &Path, kind: ForecastKind) -> Result<SubmissionTable, CliError> {
    let parsed = parse_submission(path, kind)?;
    for w in &parsed.warnings {
        eprintln!("warning: {}: {w}", path.display());
    }
    Ok(parsed.into_valid()?)
}

fn cmd_validate(path: &Path, kind: ForecastKind) -> Result<(), CliError> {
    let parsed = parse_submission(path, kind)?;
    for w in &parsed.warnings {
        eprintln!("warning: {w}");
    }
    if parsed.issues.is_empty() {
        println!("{} forecasts OK", parsed.table.len());
        Ok(())
    } else {
        for issue in &parsed.issues {
            eprintln!("invalid: {issue}");
        }
        Err(semantic(format!(
            "{} invalid forecast row group(s)",
            parsed.issues.len()
        )))
    }
}

fn hub_or(levels: Option<Vec<f64>>) -> Result<Vec<f64>, CliError> {
    match levels {
        None => Ok(mixcast::hub_levels()),
        Some(ls) => {
            if ls.is_empty()
                || ls.windows(2).any(|w| w[0] >= w[1])
                || ls.iter().any(|&l| !(l > 0.0 && l < 1.0))
            {
                return Err(semantic(
                    "levels must be strictly increasing and inside (0, 1)",
                ));
            }
            Ok(ls)
        }
    }
}

/// Interval score of the widest reported central interval (the smallest
/// alpha in the set).
fn outermost_interval_score(set: &IntervalSet, x: f64) -> Result<f64, CliError> {
    let &(alpha, lower, upper) = set
        .intervals()
        .iter()
        .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
        .expect("interval sets are nonempty");
    interval_score(alpha, lower, upper, x).map_err(|e| semantic(e.to_string()))
}

fn score_one(
    data: &ForecastData,
    rule: RuleArg,
    x_star: f64,
    levels: &[f64],
) -> Result<f64, String> {
    let unsupported = |kind: &str| {
        Err(format!(
            "rule `{}` is not supported for {kind} forecasts",
            rule.name()
        ))
    };
    match data {
        ForecastData::Mixture(m) => {
            let score = match rule {
                RuleArg::Logs => log_score(m, x_star).map_err(|e| e.to_string())?,
                RuleArg::Crps => crps_mixture(m, x_star).map_err(|e| e.to_string())?,
                RuleArg::Is | RuleArg::Wis => {
                    let q = mixture_quantiles(m, levels).map_err(|e| e.to_string())?;
                    let set = IntervalSet::from_quantiles(&q).map_err(|e| e.to_string())?;
                    match rule {
                        RuleArg::Is => {
                            outermost_interval_score(&set, x_star).map_err(|e| e.message().to_string())?
                        }
                        _ => wis(&set, x_star).map_err(|e| e.to_string())?,
                    }
                }
            };
            Ok(score)
        }
        ForecastData::Quantile(q) => match rule {
            // density-based rules have no quantile-forecast analogue
            RuleArg::Logs | RuleArg::Crps => unsupported("quantile"),
            RuleArg::Is | RuleArg::Wis => {
                let set = IntervalSet::from_quantiles(q).map_err(|e| e.to_string())?;
                match rule {
                    RuleArg::Is => {
                        outermost_interval_score(&set, x_star).map_err(|e| e.message().to_string())
                    }
                    _ => wis(&set, x_star).map_err(|e| e.to_string()),
                }
            }
        },
        ForecastData::Bin(f) => match rule {
            // the log score of a bin forecast is the negative log mass of
            // the bin containing the truth
            RuleArg::Logs => {
                let p = f.prob_of_bin_containing(x_star).unwrap_or(0.0);
                Ok(if p > 0.0 { -p.ln() } else { f64::INFINITY })
            }
            RuleArg::Crps => crps_bin(f, x_star).map_err(|e| e.to_string()),
            RuleArg::Is | RuleArg::Wis => unsupported("bin"),
        },
    }
}

fn cmd_score(
    path: &Path,
    kind: ForecastKind,
    rule: RuleArg,
    truth_path: &Path,
    out: &Path,
    levels: Option<Vec<f64>>,
    workers: usize,
) -> Result<(), CliError> {
    let table = load_valid(path, kind)?;
    let truth = parse_truth(truth_path)?;
    let levels = hub_or(levels)?;

    let items: Vec<(ForecastKey, ForecastData)> =
        table.iter().map(|(k, d)| (k.clone(), d.clone())).collect();
    let scored = parallel::par_map(workers, items, |(key, data)| {
        let x_star = truth
            .get(key)
            .ok_or_else(|| format!("no truth value for key {key}"))?;
        score_one(data, rule, x_star, &levels)
    });

    let mut rows = String::from("location,target,unit,rule,score\n");
    for ((key, _), result) in scored {
        let score = result.map_err(|m| semantic(format!("{key}: {m}")))?;
        rows.push_str(&format!(
            "{},{},{},{},{}\n",
            key.location,
            key.target,
            key.unit,
            rule.name(),
            score
        ));
    }
    write_file(out, &rows)
}

enum WeightScheme {
    Equal,
    Pmp(PmpMode),
    CrpsMin,
    Em,
    Explicit(Vec<f64>),
}

fn parse_weights(s: &str) -> Result<WeightScheme, CliError> {
    match s {
        "equal" => Ok(WeightScheme::Equal),
        "pmp" => Ok(WeightScheme::Pmp(PmpMode::Density)),
        "pmp-cdf" => Ok(WeightScheme::Pmp(PmpMode::Cdf)),
        "crps-min" => Ok(WeightScheme::CrpsMin),
        "em" => Ok(WeightScheme::Em),
        other => {
            let ws: Result<Vec<f64>, _> = other.split(',').map(|t| t.trim().parse::<f64>()).collect();
            match ws {
                Ok(ws) if !ws.is_empty() => Ok(WeightScheme::Explicit(ws)),
                _ => Err(semantic(format!(
                    "unknown weight scheme `{other}` (expected equal, pmp, pmp-cdf, crps-min, em, or a comma-separated weight list)"
                ))),
            }
        }
    }
}

fn cmd_ensemble(
    paths: &[PathBuf],
    kind: ForecastKind,
    weights: &str,
    truth_path: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    if paths.is_empty() {
        return Err(semantic("at least one submission is required"));
    }
    let scheme = parse_weights(weights)?;
    let needs_truth = matches!(
        scheme,
        WeightScheme::Pmp(_) | WeightScheme::CrpsMin | WeightScheme::Em
    );
    let truth = match (needs_truth, truth_path) {
        (true, None) => return Err(semantic(format!("weight scheme `{weights}` requires --truth"))),
        (_, Some(p)) => Some(parse_truth(p)?),
        (false, None) => None,
    };

    let tables: Vec<SubmissionTable> = paths
        .iter()
        .map(|p| load_valid(p, kind))
        .collect::<Result<_, _>>()?;
    let keys: Vec<ForecastKey> = tables[0].keys().cloned().collect();
    for (t, p) in tables.iter().zip(paths) {
        let these: Vec<ForecastKey> = t.keys().cloned().collect();
        if these != keys {
            return Err(semantic(format!(
                "submission {} covers a different key set",
                p.display()
            )));
        }
    }
    if let WeightScheme::Explicit(ws) = &scheme {
        if ws.len() != tables.len() {
            return Err(semantic(format!(
                "{} weights given for {} submissions",
                ws.len(),
                tables.len()
            )));
        }
        let sum: f64 = ws.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || ws.iter().any(|&w| w < 0.0) {
            return Err(semantic(format!(
                "explicit weights must be nonnegative and sum to 1, got {sum}"
            )));
        }
    }

    let mut out_table = SubmissionTable::new(kind);
    let m = tables.len();
    for key in &keys {
        let x_star = || -> Result<f64, CliError> {
            truth
                .as_ref()
                .and_then(|t| t.get(key))
                .ok_or_else(|| semantic(format!("no truth value for key {key}")))
        };
        match kind {
            ForecastKind::Mixture => {
                let models: Vec<Mixture> = tables
                    .iter()
                    .map(|t| match t.get(key) {
                        Some(ForecastData::Mixture(mx)) => mx.clone(),
                        _ => unreachable!("kind and key set checked"),
                    })
                    .collect();
                let w = match &scheme {
                    WeightScheme::Equal => vec![1.0 / m as f64; m],
                    WeightScheme::Explicit(ws) => ws.clone(),
                    WeightScheme::Pmp(mode) => pmp_weights(&models, x_star()?, *mode)
                        .map_err(|e| semantic(format!("{key}: {e}")))?,
                    WeightScheme::CrpsMin => crps_min_weights(&models, &[x_star()?])
                        .map_err(|e| semantic(format!("{key}: {e}")))?
                        .weights,
                    WeightScheme::Em => em_weights(&models, &[x_star()?], 1000, 1e-8)
                        .map_err(|e| semantic(format!("{key}: {e}")))?,
                };
                let ens = ma_ensemble(&models, &w).map_err(|e| semantic(format!("{key}: {e}")))?;
                out_table
                    .insert(key.clone(), ForecastData::Mixture(ens))
                    .map_err(CliError::from)?;
            }
            ForecastKind::Quantile => {
                let models: Vec<_> = tables
                    .iter()
                    .map(|t| match t.get(key) {
                        Some(ForecastData::Quantile(q)) => q.clone(),
                        _ => unreachable!("kind and key set checked"),
                    })
                    .collect();
                let w = match &scheme {
                    WeightScheme::Equal => vec![1.0 / m as f64; m],
                    WeightScheme::Explicit(ws) => ws.clone(),
                    _ => {
                        return Err(semantic(format!(
                            "weight scheme `{weights}` needs density forecasts; quantile ensembles support equal or explicit weights"
                        )))
                    }
                };
                let ens = quantile_average(&models, &w, QuantileAverage::Mean)
                    .map_err(|e| semantic(format!("{key}: {e}")))?;
                out_table
                    .insert(key.clone(), ForecastData::Quantile(ens))
                    .map_err(CliError::from)?;
            }
            ForecastKind::Bin => {
                return Err(semantic(
                    "bin submissions cannot be combined directly; fit mixtures first",
                ))
            }
        }
    }
    serialize_submission(&out_table, out).map_err(CliError::from)
}

fn cmd_fit(
    path: &Path,
    kind: ForecastKind,
    components: usize,
    out: &Path,
    report_path: &Path,
    workers: usize,
) -> Result<(), CliError> {
    if kind == ForecastKind::Mixture {
        return Err(semantic("fit expects a bin or quantile submission"));
    }
    let table = load_valid(path, kind)?;
    let cfg = FitConfig::with_components(components);

    // fit each forecast on its own single-key table so keys parallelize
    let items: Vec<(ForecastKey, ForecastData)> =
        table.iter().map(|(k, d)| (k.clone(), d.clone())).collect();
    let fitted = parallel::par_map(workers, items, |(key, data)| {
        let mut single = SubmissionTable::new(kind);
        single
            .insert(key.clone(), data.clone())
            .expect("kind matches");
        mixcast::formats::convert_to_mixture(&single, &cfg).map(|(t, mut records)| {
            (t, records.pop().expect("one record per key"))
        })
    });

    let mut out_table = SubmissionTable::new(ForecastKind::Mixture);
    let mut report = String::from("location,target,unit,objective,iterations,converged,error\n");
    for ((key, _), result) in fitted {
        let (t, record) = result.map_err(|e| semantic(format!("{key}: {e}")))?;
        for (k, d) in t.iter() {
            out_table
                .insert(k.clone(), d.clone())
                .map_err(CliError::from)?;
        }
        report.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            key.location,
            key.target,
            key.unit,
            record.objective.map(|o| o.to_string()).unwrap_or_default(),
            record.iterations,
            record.converged,
            record.error.as_deref().unwrap_or("")
        ));
    }
    serialize_submission(&out_table, out)?;
    write_file(report_path, &report)
}

fn cmd_grid(
    path: &Path,
    kind: ForecastKind,
    key: ForecastKey,
    points: usize,
    out: &Path,
) -> Result<(), CliError> {
    if kind != ForecastKind::Mixture {
        return Err(semantic("grid expects a mixture submission"));
    }
    let table = load_valid(path, kind)?;
    let Some(ForecastData::Mixture(m)) = table.get(&key) else {
        return Err(semantic(format!("no forecast for key {key}")));
    };
    let points = points.max(2);
    let lo = m.quantile(1e-4).map_err(|e| semantic(e.to_string()))?;
    let hi = m.quantile(1.0 - 1e-4).map_err(|e| semantic(e.to_string()))?;
    let mut rows = String::from("x,pdf,cdf\n");
    for i in 0..points {
        let x = lo + (hi - lo) * i as f64 / (points - 1) as f64;
        rows.push_str(&format!("{x},{},{}\n", m.pdf(x), m.cdf(x)));
    }
    write_file(out, &rows)
}
