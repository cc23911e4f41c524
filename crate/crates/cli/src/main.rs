use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use reserve_lab::diagnostics::scaled_deviance_residuals;
use reserve_lab::evaluation::{
    self, family_bakeoff, rank_corpus, CorpusReport, EvalOptions, IncidenceBasis,
};
use reserve_lab::forecast::{forecast_effects, ArimaMethod, ForecastOptions, SeriesModel};
use reserve_lab::hazard::{self, ModelSpec};
use reserve_lab::io::{read_triangle, write_atomic, TriangleKind};
use reserve_lab::reserving::ReserveReport;
use reserve_lab::{
    amount, datasets, plot, reserve, Execution, Mode, Model, PipelineOptions, RunOffTriangle,
};

/// Claims reserving with claim-development hazard models.
///
/// All computation is deterministic; RESERVE_LAB_SEED is reserved and ignored.
#[derive(Parser)]
#[command(name = "reserve-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model, complete the triangle and report reserves
    Reserve(ReserveArgs),
    /// Scaled deviance residuals of a fitted model
    Residuals(ReserveArgs),
    /// Fitted and extrapolated effect paths of a hazard model
    Effects(ReserveArgs),
    /// Rank models by error incidence on the last diagonal of each triangle
    Rank(RankArgs),
    /// Select within model families on one diagonal, score on the next
    Bakeoff(BakeoffArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Dataset {
    Autobi,
    Genins,
    Ukmotor,
    Raa,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Cumulative,
    Incremental,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Svg,
}

#[derive(Clone, Copy, ValueEnum)]
enum Series {
    Arima110,
    Rwdrift,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Ml,
    Css,
}

#[derive(Args)]
struct TriangleArgs {
    /// Triangle CSV; one row per cohort, one column per development period
    #[arg(long, short, conflicts_with = "dataset")]
    input: Option<PathBuf>,
    /// Use a bundled triangle instead of --input
    #[arg(long, value_enum)]
    dataset: Option<Dataset>,
    #[arg(long, value_enum, default_value = "cumulative")]
    kind: Kind,
    /// Reject negative increments and non-positive exposures (default)
    #[arg(long, overrides_with = "lenient")]
    strict: bool,
    /// Exclude offending cells instead of failing
    #[arg(long, overrides_with = "strict")]
    lenient: bool,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long, default_value = "a", value_parser = parse_model)]
    model: Model,
    /// Exposure weight of the current period's claims, in [0, 1]
    #[arg(long, default_value_t = 0.5, value_parser = parse_eta)]
    eta: f64,
    /// Cap extrapolated hazards just below 1/eta instead of failing
    #[arg(long, overrides_with = "no_cap")]
    cap_hazard: bool,
    #[arg(long, overrides_with = "cap_hazard")]
    no_cap: bool,
    /// Cohort effect forecaster (ac, apc)
    #[arg(long, value_enum)]
    cohort_model: Option<Series>,
    /// Period effect forecaster (ap, apc, amount-apc)
    #[arg(long, value_enum)]
    period_model: Option<Series>,
    /// ARIMA(1,1,0) estimator
    #[arg(long, value_enum, default_value = "ml")]
    arima_method: Method,
}

#[derive(Args)]
struct OutputArgs {
    /// Directory for output files; created if missing
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
struct ReserveArgs {
    #[command(flatten)]
    triangle: TriangleArgs,
    #[command(flatten)]
    fit: FitArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, default_value_t = 0.5, value_parser = parse_eta)]
    eta: f64,
    #[arg(long, overrides_with = "no_cap")]
    cap_hazard: bool,
    #[arg(long, overrides_with = "cap_hazard")]
    no_cap: bool,
    #[arg(long, value_enum, default_value = "ml")]
    arima_method: Method,
    /// Score incremental instead of cumulative amounts
    #[arg(long)]
    incremental_ei: bool,
    /// Run models and datasets one after another
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct RankArgs {
    /// Triangle CSV, or a directory whose *.csv files form the corpus
    #[arg(long, short, conflicts_with = "dataset")]
    input: Option<PathBuf>,
    #[arg(long, value_enum)]
    dataset: Option<Dataset>,
    #[arg(long, value_enum, default_value = "cumulative")]
    kind: Kind,
    #[arg(long, overrides_with = "lenient")]
    strict: bool,
    #[arg(long, overrides_with = "strict")]
    lenient: bool,
    /// Comma-separated models to rank [default: amount-ac,amount-apc,a,ac,ap,apc]
    #[arg(long, value_delimiter = ',', value_parser = parse_model)]
    models: Vec<Model>,
    #[command(flatten)]
    eval: EvalArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct BakeoffArgs {
    #[command(flatten)]
    triangle: TriangleArgs,
    #[command(flatten)]
    eval: EvalArgs,
    /// Score the test diagonal with the fit used for selection
    #[arg(long)]
    no_refit: bool,
    #[command(flatten)]
    output: OutputArgs,
}

/// Invalid flag combination, reported with exit code 2.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn parse_model(s: &str) -> std::result::Result<Model, String> {
    s.parse().map_err(|e: reserve_lab::Error| e.to_string())
}

fn parse_eta(s: &str) -> std::result::Result<f64, String> {
    let eta: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if (0.0..=1.0).contains(&eta) {
        Ok(eta)
    } else {
        Err(format!("eta must lie in [0, 1], got {eta}"))
    }
}

impl Kind {
    fn core(self) -> TriangleKind {
        match self {
            Kind::Cumulative => TriangleKind::Cumulative,
            Kind::Incremental => TriangleKind::Incremental,
        }
    }
}

impl Series {
    fn core(self) -> SeriesModel {
        match self {
            Series::Arima110 => SeriesModel::ArimaDrift,
            Series::Rwdrift => SeriesModel::RandomWalkDrift,
        }
    }
}

impl Method {
    fn core(self) -> ArimaMethod {
        match self {
            Method::Ml => ArimaMethod::Ml,
            Method::Css => ArimaMethod::Css,
        }
    }
}

fn mode(lenient: bool) -> Mode {
    if lenient {
        Mode::Lenient
    } else {
        Mode::Strict
    }
}

fn bundled(d: Dataset) -> (String, RunOffTriangle) {
    match d {
        Dataset::Autobi => ("autobi".into(), datasets::autobi()),
        Dataset::Genins => ("genins".into(), datasets::genins()),
        Dataset::Ukmotor => ("ukmotor".into(), datasets::ukmotor()),
        Dataset::Raa => ("raa".into(), datasets::raa()),
    }
}

fn load(
    input: &Option<PathBuf>,
    dataset: Option<Dataset>,
    kind: Kind,
    mode: Mode,
) -> Result<RunOffTriangle> {
    match (input, dataset) {
        (Some(path), _) => read_triangle(path, kind.core(), mode)
            .with_context(|| format!("reading {}", path.display())),
        (None, Some(d)) => Ok(bundled(d).1),
        (None, None) => Err(usage("one of --input or --dataset is required")),
    }
}

fn check_format(format: Option<Format>, allowed: &[Format], command: &str) -> Result<()> {
    match format {
        Some(f) if !allowed.contains(&f) => Err(usage(format!(
            "--format {} is not available for {command}",
            f.to_possible_value().unwrap().get_name()
        ))),
        _ => Ok(()),
    }
}

impl FitArgs {
    fn validate(&self) -> Result<()> {
        let (cohort, period) = match self.model {
            Model::Hazard(s) => (s.has_cohort(), s.has_period()),
            Model::Amount(s) => (false, s.has_period()),
            Model::ChainLadder => (false, false),
        };
        if self.cohort_model.is_some() && !cohort {
            return Err(usage(format!(
                "--cohort-model has no effect for model {}",
                self.model
            )));
        }
        if self.period_model.is_some() && !period {
            return Err(usage(format!(
                "--period-model has no effect for model {}",
                self.model
            )));
        }
        Ok(())
    }

    fn options(&self, mode: Mode) -> PipelineOptions {
        let defaults = ForecastOptions::default();
        PipelineOptions {
            eta: self.eta,
            mode,
            cap_hazard: self.cap_hazard,
            forecast: ForecastOptions {
                cohort_model: self
                    .cohort_model
                    .map_or(defaults.cohort_model, Series::core),
                period_model: self
                    .period_model
                    .map_or(defaults.period_model, Series::core),
                arima_method: self.arima_method.core(),
            },
        }
    }
}

impl EvalArgs {
    fn options(&self, mode: Mode, refit: bool) -> EvalOptions {
        EvalOptions {
            pipeline: PipelineOptions {
                eta: self.eta,
                mode,
                cap_hazard: self.cap_hazard,
                forecast: ForecastOptions {
                    arima_method: self.arima_method.core(),
                    ..ForecastOptions::default()
                },
            },
            basis: if self.incremental_ei {
                IncidenceBasis::Incremental
            } else {
                IncidenceBasis::Cumulative
            },
            refit,
            execution: if self.sequential {
                Execution::Sequential
            } else {
                Execution::Parallel
            },
        }
    }
}

/// Files are only written after every computation succeeded.
fn write_outputs(dir: &Option<PathBuf>, files: &[(&str, String)]) -> Result<()> {
    let Some(dir) = dir else { return Ok(()) };
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (name, contents) in files {
        write_atomic(&dir.join(name), contents.as_bytes())?;
    }
    Ok(())
}

fn pretty(value: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn cohort_label(report: &ReserveReport, k: usize) -> String {
    match report.origin_label.as_deref().map(str::parse::<i64>) {
        Some(Ok(first)) => (first + k as i64).to_string(),
        _ => k.to_string(),
    }
}

fn reserve_table(report: &ReserveReport) -> String {
    let mut s = format!(
        "model {}\n{:>8} {:>16} {:>16} {:>16}\n",
        report.model, "cohort", "latest", "ultimate", "reserve"
    );
    for k in 0..=report.m {
        s += &format!(
            "{:>8} {:>16.2} {:>16.2} {:>16.2}\n",
            cohort_label(report, k),
            report.latest[k],
            report.ultimate[k],
            report.reserves[k]
        );
    }
    s += &format!(
        "{:>8} {:>16} {:>16} {:>16.2}\n",
        "total", "", "", report.total
    );
    s
}

fn cmd_reserve(args: &ReserveArgs) -> Result<()> {
    args.fit.validate()?;
    check_format(args.output.format, &[Format::Json, Format::Csv], "reserve")?;
    let tri = load(
        &args.triangle.input,
        args.triangle.dataset,
        args.triangle.kind,
        mode(args.triangle.lenient),
    )?;
    let report = reserve(
        args.fit.model,
        &tri,
        &args.fit.options(mode(args.triangle.lenient)),
    )?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let json = pretty(&report);
    write_outputs(
        &args.output.out_dir,
        &[
            ("reserve.json", json.clone()),
            ("completed.csv", report.completed_csv()),
        ],
    )?;
    match args.output.format {
        Some(Format::Json) => print!("{json}"),
        Some(Format::Csv) => print!("{}", report.completed_csv()),
        _ => print!("{}", reserve_table(&report)),
    }
    Ok(())
}

fn cmd_residuals(args: &ReserveArgs) -> Result<()> {
    args.fit.validate()?;
    check_format(
        args.output.format,
        &[Format::Json, Format::Csv, Format::Svg],
        "residuals",
    )?;
    let mode = mode(args.triangle.lenient);
    let cells = match args.fit.model {
        Model::Hazard(s) => {
            let tri = load(
                &args.triangle.input,
                args.triangle.dataset,
                args.triangle.kind,
                mode,
            )?;
            hazard::fit(ModelSpec::new(s).with_eta(args.fit.eta), &tri, mode)?.fitted_cells(&tri)?
        }
        Model::Amount(s) => {
            let tri = load(
                &args.triangle.input,
                args.triangle.dataset,
                args.triangle.kind,
                mode,
            )?;
            amount::fit_amount(s, &tri, mode)?.fitted_cells(&tri)
        }
        Model::ChainLadder => {
            return Err(usage("cl has no likelihood; use --model a or amount-ac"))
        }
    };
    let res = scaled_deviance_residuals(&cells)?;
    let mut files = vec![("residuals.csv", res.to_csv())];
    if args.output.format == Some(Format::Svg) {
        files.push(("residuals.svg", res.to_svg()));
    }
    if args.output.format == Some(Format::Json) {
        files.push(("residuals.json", pretty(&res)));
    }
    write_outputs(&args.output.out_dir, &files)?;
    match args.output.format {
        Some(Format::Json) => print!("{}", pretty(&res)),
        Some(Format::Svg) if args.output.out_dir.is_none() => print!("{}", res.to_svg()),
        _ => print!("{}", res.to_csv()),
    }
    eprintln!(
        "deviance {:.6}, dispersion {:.6}, cells {}, parameters {}",
        res.deviance, res.dispersion, res.n_obs, res.n_params
    );
    Ok(())
}

fn cmd_effects(args: &ReserveArgs) -> Result<()> {
    args.fit.validate()?;
    check_format(
        args.output.format,
        &[Format::Json, Format::Csv, Format::Svg],
        "effects",
    )?;
    let Model::Hazard(structure) = args.fit.model else {
        return Err(usage(
            "effects are available for hazard models a, ac, ap, apc",
        ));
    };
    let mode = mode(args.triangle.lenient);
    let tri = load(
        &args.triangle.input,
        args.triangle.dataset,
        args.triangle.kind,
        mode,
    )?;
    let fit = hazard::fit(ModelSpec::new(structure).with_eta(args.fit.eta), &tri, mode)?;
    let options = args.fit.options(mode).forecast;
    let forecast = forecast_effects(&fit, options)?;

    let mut paths = vec![("age", &fit.age, None)];
    if let Some(p) = &fit.period {
        paths.push(("period", p, forecast.period.as_ref().map(|e| &e.path)));
    }
    if let Some(g) = &fit.cohort {
        paths.push(("cohort", g, forecast.cohort.as_ref().map(|e| &e.path)));
    }
    let mut files = Vec::new();
    let mut text = String::new();
    for (name, observed, extrapolated) in &paths {
        let csv = plot::effect_csv(observed, *extrapolated);
        text += &format!("# {name}\n{csv}");
        files.push((format!("effect_{name}.csv"), csv));
        if args.output.format == Some(Format::Svg) {
            files.push((
                format!("effect_{name}.svg"),
                plot::effect_plot(
                    &format!("{name} effect ({structure})"),
                    observed,
                    *extrapolated,
                ),
            ));
        }
    }
    let json = pretty(&serde_json::json!({ "fit": fit, "forecast": forecast }));
    files.push(("effects.json".into(), json.clone()));
    let named: Vec<(&str, String)> = files.iter().map(|(n, c)| (n.as_str(), c.clone())).collect();
    write_outputs(&args.output.out_dir, &named)?;
    for w in forecast
        .cohort
        .iter()
        .chain(&forecast.period)
        .flat_map(|e| &e.warnings)
    {
        eprintln!("warning: {w}");
    }
    match args.output.format {
        Some(Format::Json) => print!("{json}"),
        _ => print!("{text}"),
    }
    Ok(())
}

fn corpus_input(args: &RankArgs) -> Result<Vec<(String, reserve_lab::Result<RunOffTriangle>)>> {
    let mode = mode(args.lenient);
    match (&args.input, args.dataset) {
        (Some(path), _) if path.is_dir() => {
            let files = evaluation::corpus_files(path).map_err(|e| usage(e.to_string()))?;
            Ok(files
                .into_iter()
                .map(|f| {
                    let name = f
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_default();
                    (name, read_triangle(&f, args.kind.core(), mode))
                })
                .collect())
        }
        (Some(path), _) => {
            let tri = read_triangle(path, args.kind.core(), mode)
                .with_context(|| format!("reading {}", path.display()))?;
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            Ok(vec![(name, Ok(tri))])
        }
        (None, Some(d)) => {
            let (name, tri) = bundled(d);
            Ok(vec![(name, Ok(tri))])
        }
        (None, None) => Err(usage("one of --input or --dataset is required")),
    }
}

fn ranking_text(report: &CorpusReport) -> String {
    let mut s = String::new();
    for d in &report.datasets {
        s += &format!("# {}\n", d.dataset);
        match (&d.ranking, &d.failure) {
            (Some(r), _) => {
                for score in &r.scores {
                    let ei = score
                        .ei
                        .map_or_else(|| "failed".to_string(), |v| format!("{v:.6}"));
                    s += &format!("{:>4}  {:<11} {ei}\n", score.rank, score.model.label());
                }
            }
            (None, Some(f)) => s += &format!("failed: {f}\n"),
            (None, None) => {}
        }
    }
    s += "# mean rank\n";
    s += &report.mean_rank_table();
    s
}

fn cmd_rank(args: &RankArgs) -> Result<()> {
    check_format(args.output.format, &[Format::Json, Format::Csv], "rank")?;
    let models = if args.models.is_empty() {
        Model::ranking_set()
    } else {
        args.models.clone()
    };
    let datasets = corpus_input(args)?;
    let report = rank_corpus(
        &datasets,
        &models,
        &args.eval.options(mode(args.lenient), true),
    );
    let json = pretty(&report);
    write_outputs(
        &args.output.out_dir,
        &[
            ("ranking.json", json.clone()),
            ("ranking.csv", report.to_csv()),
            ("mean_ranks.csv", report.mean_rank_table()),
        ],
    )?;
    match args.output.format {
        Some(Format::Json) => print!("{json}"),
        Some(Format::Csv) => print!("{}", report.to_csv()),
        _ => print!("{}", ranking_text(&report)),
    }
    Ok(())
}

fn cmd_bakeoff(args: &BakeoffArgs) -> Result<()> {
    check_format(args.output.format, &[Format::Json], "bakeoff")?;
    let mode = mode(args.triangle.lenient);
    let tri = load(
        &args.triangle.input,
        args.triangle.dataset,
        args.triangle.kind,
        mode,
    )?;
    let report = family_bakeoff(
        &tri,
        &Model::default_families(),
        &args.eval.options(mode, !args.no_refit),
    )?;
    let json = pretty(&report);
    write_outputs(&args.output.out_dir, &[("bakeoff.json", json.clone())])?;
    if args.output.format == Some(Format::Json) {
        print!("{json}");
        return Ok(());
    }
    println!(
        "{:<8} {:<11} {:>14} {:>14}",
        "family", "selected", "validation_ei", "test_ei"
    );
    for f in &report.families {
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.6}"));
        println!(
            "{:<8} {:<11} {:>14} {:>14}",
            f.family,
            f.selected.map_or("-", |m| m.label()),
            fmt(f.validation_ei),
            fmt(f.test_ei)
        );
        if let Some(e) = &f.failure {
            eprintln!("{}: {e}", f.family);
        }
    }
    Ok(())
}

fn error_json(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": { "kind": kind, "message": message } }).to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.render().to_string();
            let first = message
                .lines()
                .next()
                .unwrap_or_default()
                .trim_start_matches("error: ");
            eprintln!("{}", error_json("usage", first));
            eprint!("{message}");
            return ExitCode::from(2);
        }
    };
    let result = match &cli.command {
        Command::Reserve(a) => cmd_reserve(a),
        Command::Residuals(a) => cmd_residuals(a),
        Command::Effects(a) => cmd_effects(a),
        Command::Rank(a) => cmd_rank(a),
        Command::Bakeoff(a) => cmd_bakeoff(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if let Some(u) = e.downcast_ref::<UsageError>() {
                eprintln!("{}", error_json("usage", &u.0));
                return ExitCode::from(2);
            }
            let kind = e
                .downcast_ref::<reserve_lab::Error>()
                .map_or("internal", |c| c.kind());
            eprintln!("{}", error_json(kind, &format!("{e:#}")));
            ExitCode::FAILURE
        }
    }
}
