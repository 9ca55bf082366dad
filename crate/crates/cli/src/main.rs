//! `survcheck`: fit parametric survival models, test their interval
//! calibration, draw the report figure and run the type-I-error study.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or input error,
//! 3 a model fit did not converge.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use survcheck::report::{build_report, intervals_csv, overall_csv, parse_grid, parse_models, render_svg, IntervalSpec, ReportBundle};
use survcheck::simulation::{run_grid, GridConfig, ModelSource, FULL_REPLICATIONS, TABLES};
use survcheck::{fit_all, load_dataset, AtRiskConvention, Family, FittedModel, PValueMode, SurvivalDataset};

#[derive(Parser)]
#[command(name = "survcheck", version, about = "Interval calibration tests for parametric survival models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit parametric families by maximum likelihood and rank them by AIC.
    Fit {
        /// CSV with `time` and `event` columns.
        input: PathBuf,
        /// Comma-separated families; all seven by default.
        #[arg(long, value_delimiter = ',')]
        families: Option<Vec<String>>,
        /// Write the fitted models as JSON here.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Test fitted models interval by interval and write a report.
    Test {
        input: PathBuf,
        /// Model JSON: one model, an array, `fit` output or a report bundle.
        #[arg(long)]
        model: PathBuf,
        /// `censor`, `fixed:K` or `grid:FILE`.
        #[arg(long, default_value = "censor")]
        intervals: String,
        #[arg(long, value_enum, default_value = "mid")]
        pvalues: PValueArg,
        /// Seed for randomized p-values.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value = "risk-set")]
        convention: ConventionArg,
        /// Output directory for report.json, CSV tables and figures.
        #[arg(long, default_value = "survcheck-report")]
        output: PathBuf,
    },
    /// Render the three-panel SVG figure from a report bundle.
    Figure {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Family to draw; the first model in the bundle by default.
        #[arg(long)]
        model: Option<String>,
    },
    /// Monte-Carlo type-I-error study.
    Simulate {
        /// JSON grid description; missing fields take the full design.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "survcheck-simulation")]
        out_dir: PathBuf,
        #[arg(long)]
        replications: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// 10,000 replications per cell.
        #[arg(long, conflicts_with = "replications")]
        full_scale: bool,
        /// Test against the generating rate or each dataset's refitted rate.
        #[arg(long, value_enum)]
        model: Option<ModelArg>,
        #[arg(long, value_enum)]
        convention: Option<ConventionArg>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PValueArg {
    Mid,
    Rand,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConventionArg {
    RiskSet,
    CensorsInclusive,
}

impl From<ConventionArg> for AtRiskConvention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::RiskSet => AtRiskConvention::RiskSet,
            ConventionArg::CensorsInclusive => AtRiskConvention::CensorsInclusive,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Generating,
    Refit,
}

enum Failure {
    Usage(String),
    Data(anyhow::Error),
    NotConverged(String),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::NotConverged(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Fit { input, families, output } => cmd_fit(&input, families, output.as_deref()),
        Command::Test { input, model, intervals, pvalues, seed, convention, output } => {
            let mode = match pvalues {
                PValueArg::Mid => PValueMode::Midpoint,
                PValueArg::Rand => PValueMode::Randomized { seed },
            };
            cmd_test(&input, &model, &intervals, mode, convention.into(), &output)
        }
        Command::Figure { report, output, model } => cmd_figure(&report, &output, model.as_deref()),
        Command::Simulate { config, out_dir, replications, seed, full_scale, model, convention } => {
            let overrides = SimOverrides {
                replications,
                seed,
                full_scale,
                model: model.map(|m| match m {
                    ModelArg::Generating => ModelSource::Generating,
                    ModelArg::Refit => ModelSource::Refit,
                }),
                convention: convention.map(Into::into),
            };
            cmd_simulate(config.as_deref(), &out_dir, overrides)
        }
    }
}

fn read_dataset(path: &Path) -> anyhow::Result<SurvivalDataset> {
    let file = fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    load_dataset(file).with_context(|| format!("reading {}", path.display()))
}

fn parse_families(names: Option<Vec<String>>) -> Result<Vec<Family>, Failure> {
    let Some(names) = names else {
        return Ok(Family::ALL.to_vec());
    };
    let mut out = Vec::new();
    for name in names.iter().filter(|n| !n.trim().is_empty()) {
        let family: Family = name.parse().map_err(|e: survcheck::Error| Failure::Usage(e.to_string()))?;
        if !out.contains(&family) {
            out.push(family);
        }
    }
    if out.is_empty() {
        return Err(Failure::Usage("no family given".into()));
    }
    Ok(out)
}

fn cmd_fit(input: &Path, families: Option<Vec<String>>, output: Option<&Path>) -> Result<(), Failure> {
    let families = parse_families(families)?;
    let data = read_dataset(input)?;
    let mut fitted: Vec<FittedModel> = Vec::new();
    let mut unconverged = Vec::new();
    let mut errors = Vec::new();
    for (family, result) in fit_all(&families, &data) {
        match result {
            Ok(m) => {
                if !m.converged {
                    unconverged.push(family.name());
                }
                fitted.push(m);
            }
            Err(e) => errors.push(format!("{family}: {e}")),
        }
    }

    let mut ranking: Vec<&FittedModel> = fitted.iter().collect();
    ranking.sort_by(|a, b| a.aic().total_cmp(&b.aic()));
    println!("{:<18} {:>6} {:>14} {:>12} {:>12}  converged", "family", "params", "log_lik", "AIC", "BIC");
    for m in &ranking {
        println!(
            "{:<18} {:>6} {:>14.4} {:>12.4} {:>12.4}  {}",
            m.family.name(),
            m.n_params(),
            m.log_likelihood,
            m.aic(),
            m.bic(),
            if m.converged { "yes" } else { "no" }
        );
    }

    let json = serde_json::json!({
        "n_obs": data.len(),
        "models": fitted.iter().map(|m| m.to_json()).collect::<Vec<_>>(),
        "ranking": ranking.iter().map(|m| m.family.name()).collect::<Vec<_>>(),
    });
    let text = serde_json::to_string_pretty(&json).context("serializing models")? + "\n";
    if let Some(path) = output {
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    if !errors.is_empty() {
        return Err(Failure::Data(anyhow::anyhow!(errors.join("; "))));
    }
    if !unconverged.is_empty() {
        return Err(Failure::NotConverged(format!("optimizer did not converge for {}", unconverged.join(", "))));
    }
    Ok(())
}

fn interval_spec(arg: &str) -> Result<IntervalSpec, Failure> {
    if let Some(path) = arg.strip_prefix("grid:") {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read grid file {path}"))?;
        let boundaries = parse_grid(&text).with_context(|| format!("parsing grid file {path}"))?;
        return Ok(IntervalSpec::Grid { boundaries });
    }
    arg.parse().map_err(|e: survcheck::Error| Failure::Usage(e.to_string()))
}

fn cmd_test(
    input: &Path,
    model_path: &Path,
    intervals: &str,
    mode: PValueMode,
    convention: AtRiskConvention,
    out_dir: &Path,
) -> Result<(), Failure> {
    let spec = interval_spec(intervals)?;
    let data = read_dataset(input)?;
    let text = fs::read_to_string(model_path).with_context(|| format!("cannot read {}", model_path.display()))?;
    let models = parse_models(&text)
        .with_context(|| format!("parsing {}", model_path.display()))?
        .iter()
        .map(|j| FittedModel::from_json(j, &data))
        .collect::<Result<Vec<_>, _>>()
        .context("loading model parameters")?;
    let bundle = build_report(&data, &models, &spec, &mode, convention).context("running interval tests")?;

    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let write = |name: &str, contents: &str| -> anyhow::Result<()> {
        let path = out_dir.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
    };
    write("report.json", &(serde_json::to_string_pretty(&bundle).context("serializing report")? + "\n"))?;
    write("overall.csv", &overall_csv(&bundle))?;
    for (i, r) in bundle.results.iter().enumerate() {
        let family = r.model.family.name();
        write(&format!("intervals_{family}.csv"), &intervals_csv(r))?;
        write(&format!("figure_{family}.svg"), &render_svg(&bundle, i).context("rendering figure")?)?;
    }

    println!("{:<18} {:>4} {:>10} {:>8} {:>7} {:>8}  bonferroni", "family", "I", "T_cont", "TFT p", "t", "PAVSI p");
    for r in &bundle.results {
        let o = &r.overall;
        println!(
            "{:<18} {:>4} {:>10.3} {:>8.4} {:>7} {:>8.4}  {}",
            r.model.family.name(),
            o.n_tested,
            o.t_cont,
            o.tft_pvalue,
            o.t_pavsi,
            o.pavsi_pvalue,
            if o.bonferroni_reject { "reject" } else { "-" }
        );
        for w in &r.warnings {
            eprintln!("warning: {w}");
        }
    }
    println!("report written to {}", out_dir.display());
    Ok(())
}

fn cmd_figure(report: &Path, output: &Path, model: Option<&str>) -> Result<(), Failure> {
    let text = fs::read_to_string(report).with_context(|| format!("cannot read {}", report.display()))?;
    let bundle: ReportBundle = serde_json::from_str(&text).with_context(|| format!("parsing {}", report.display()))?;
    let index = match model {
        None => 0,
        Some(name) => {
            let family: Family = name.parse().map_err(|e: survcheck::Error| Failure::Usage(e.to_string()))?;
            match bundle.results.iter().position(|r| r.model.family == family) {
                Some(i) => i,
                None => return Err(Failure::Data(anyhow::anyhow!("report has no {family} model"))),
            }
        }
    };
    let svg = render_svg(&bundle, index).context("rendering figure")?;
    fs::write(output, svg).with_context(|| format!("writing {}", output.display()))?;
    Ok(())
}

struct SimOverrides {
    replications: Option<usize>,
    seed: Option<u64>,
    full_scale: bool,
    model: Option<ModelSource>,
    convention: Option<AtRiskConvention>,
}

fn cmd_simulate(config: Option<&Path>, out_dir: &Path, overrides: SimOverrides) -> Result<(), Failure> {
    let mut grid = match config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            serde_json::from_str::<GridConfig>(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => GridConfig::default(),
    };
    if overrides.full_scale {
        grid.replications = FULL_REPLICATIONS;
    }
    if let Some(r) = overrides.replications {
        grid.replications = r;
    }
    if let Some(s) = overrides.seed {
        grid.seed = s;
    }
    if let Some(m) = overrides.model {
        grid.model = m;
    }
    if let Some(c) = overrides.convention {
        grid.convention = c;
    }
    if grid.replications == 0 {
        return Err(Failure::Usage("replications must be at least 1".into()));
    }
    if grid.lambdas.iter().any(|l| !(*l > 0.0 && l.is_finite())) || grid.n_patients.iter().any(|&n| n < 2) {
        return Err(Failure::Data(anyhow::anyhow!("config needs positive rates and at least 2 patients per trial")));
    }
    if grid.scenarios().is_empty() {
        return Err(Failure::Usage("the configuration describes no scenario".into()));
    }
    eprintln!("simulating {} datasets", grid.total_datasets());
    let report = run_grid(&grid).context("simulation failed")?;

    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    for (name, im, pm) in TABLES {
        let rows = report.table(im, pm);
        if rows.is_empty() {
            continue;
        }
        let csv_path = out_dir.join(format!("{name}.csv"));
        fs::write(&csv_path, report.table_csv(im, pm)).with_context(|| format!("writing {}", csv_path.display()))?;
        let json_path = out_dir.join(format!("{name}.json"));
        let json = serde_json::to_string_pretty(&rows).context("serializing table")? + "\n";
        fs::write(&json_path, json).with_context(|| format!("writing {}", json_path.display()))?;
    }
    let all = serde_json::to_string_pretty(&report).context("serializing results")? + "\n";
    fs::write(out_dir.join("results.json"), all).context("writing results.json")?;

    let failures: usize = report.results.iter().map(|r| r.other_failures).sum();
    if failures > 0 {
        eprintln!("warning: {failures} replications failed and are excluded from the rates");
    }
    println!("{:<12} {:<10} {:>6} {:>7} {:>8} {:>8} {:>8}", "intervals", "pvalues", "N", "lambda", "bonf", "tft", "pavsi");
    for r in &report.results {
        let s = &r.scenario;
        println!(
            "{:<12} {:<10} {:>6} {:>7} {:>8.4} {:>8.4} {:>8.4}",
            label(&s.interval_mode),
            label(&s.pvalue_mode),
            s.n_patients,
            survcheck::simulation::lambda_label(s.lambda),
            r.bonferroni.rate,
            r.tft.rate,
            r.pavsi.rate
        );
    }
    Ok(())
}

fn label<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_value(value).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
}
