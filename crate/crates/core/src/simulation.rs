//! Monte-Carlo type-I-error study under a correctly specified exponential model.
//!
//! Each replication draws `T ~ Exp(λ)`, censors at `min(U[0, 100], U[18, 22])`
//! and runs the interval tests against an exponential model: by default the
//! generating one (the null hypothesis is a fully specified model), or the
//! closed-form refit `λ̂ = E / Σt`.
//! Replication `r` of a scenario draws from ChaCha stream `r` of the
//! scenario seed, so results do not depend on how replications are scheduled
//! across threads.

use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intervals::{build_censor_scheme_with, build_specified_scheme_with, default_ten_interval_grid, AtRiskConvention};
use crate::models::{Family, FittedModel};
use crate::survival::{SurvivalDataset, SurvivalRecord};
use crate::verdicts::{run_full_test, PValueMode};

/// Hazard rates and trial sizes of the standard type-I-error grid.
pub const STUDY_LAMBDAS: [f64; 3] = [1.0 / 10.0, 1.0 / 30.0, 1.0 / 70.0];
pub const STUDY_SIZES: [usize; 4] = [50, 100, 200, 500];
pub const DESK_REPLICATIONS: usize = 2_000;
pub const FULL_REPLICATIONS: usize = 10_000;
pub const DEFAULT_SEED: u64 = 20_240_917;
/// Nominal level for the overall TFT and PAVSI decisions.
pub const ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntervalMethod {
    Censor,
    TenFixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PValueMethod {
    Midpoint,
    Randomized,
}

/// Which exponential rate the tests are run against.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelSource {
    /// The generating rate λ.
    #[default]
    Generating,
    /// The closed-form MLE `E / Σt` of each simulated dataset.
    Refit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationScenario {
    pub lambda: f64,
    pub n_patients: usize,
    pub interval_mode: IntervalMethod,
    pub pvalue_mode: PValueMethod,
    pub model: ModelSource,
    pub convention: AtRiskConvention,
    pub replications: usize,
    pub seed: u64,
}

/// Draw one trial: `time = min(T, C)`, `event = T <= C`.
pub fn simulate_trial<R: Rng + ?Sized>(lambda: f64, n_patients: usize, rng: &mut R) -> Result<SurvivalDataset> {
    if !(lambda > 0.0) || n_patients < 2 {
        return Err(Error::InvalidInput(format!("need lambda > 0 and at least 2 patients, got {lambda}, {n_patients}")));
    }
    let records = (0..n_patients)
        .map(|_| {
            let t = -rng.sample::<f64, _>(Open01).ln() / lambda;
            let c1 = 100.0 * rng.sample::<f64, _>(Open01);
            let c2 = rng.gen_range(18.0..=22.0);
            let c = c1.min(c2);
            SurvivalRecord { time: t.min(c), event: t <= c }
        })
        .collect();
    SurvivalDataset::new(records)
}

/// Closed-form exponential MLE `E / Σt`.
pub fn refit_rate(data: &SurvivalDataset) -> f64 {
    data.n_events() as f64 / data.total_time()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Tested { bonferroni: bool, tft: bool, pavsi: bool },
    NoEvents,
    NoCensors,
    Failed,
}

fn replicate(scenario: &SimulationScenario, rep: usize) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    rng.set_stream(rep as u64);
    let Ok(data) = simulate_trial(scenario.lambda, scenario.n_patients, &mut rng) else {
        return Outcome::Failed;
    };
    if data.n_events() == 0 {
        return Outcome::NoEvents;
    }
    if data.n_censors() == 0 {
        return Outcome::NoCensors;
    }
    let rate = match scenario.model {
        ModelSource::Generating => scenario.lambda,
        ModelSource::Refit => refit_rate(&data),
    };
    let Ok(model) = FittedModel::with_params(Family::Exponential, vec![rate], &data) else {
        return Outcome::Failed;
    };
    let scheme = match scenario.interval_mode {
        IntervalMethod::Censor => build_censor_scheme_with(&data, &model, scenario.convention),
        IntervalMethod::TenFixed => default_ten_interval_grid(&data)
            .and_then(|grid| build_specified_scheme_with(&data, &model, &grid, scenario.convention)),
    };
    let mode = match scenario.pvalue_mode {
        PValueMethod::Midpoint => PValueMode::Midpoint,
        PValueMethod::Randomized => PValueMode::Randomized { seed: rng.gen() },
    };
    match scheme.and_then(|s| run_full_test(&s, &mode)) {
        Ok(result) => Outcome::Tested {
            bonferroni: result.bonferroni_reject,
            tft: result.tft_pvalue <= ALPHA,
            pavsi: result.pavsi_pvalue <= ALPHA,
        },
        Err(_) => Outcome::Failed,
    }
}

/// Rejection rate with its binomial Monte-Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub rate: f64,
    pub se: f64,
}

impl Rate {
    fn from_counts(hits: usize, n: usize) -> Self {
        if n == 0 {
            return Self { rate: f64::NAN, se: f64::NAN };
        }
        let rate = hits as f64 / n as f64;
        Self { rate, se: (rate * (1.0 - rate) / n as f64).sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub scenario: SimulationScenario,
    pub bonferroni: Rate,
    pub tft: Rate,
    pub pavsi: Rate,
    /// Replications that produced a test result (the rate denominators).
    pub tested: usize,
    pub zero_event_datasets: usize,
    pub zero_censor_datasets: usize,
    pub other_failures: usize,
}

pub fn run_scenario(scenario: &SimulationScenario) -> Result<ScenarioResult> {
    if scenario.replications == 0 {
        return Err(Error::InvalidInput("replications must be at least 1".into()));
    }
    #[derive(Default, Clone, Copy)]
    struct Tally {
        tested: usize,
        bonferroni: usize,
        tft: usize,
        pavsi: usize,
        no_events: usize,
        no_censors: usize,
        failed: usize,
    }
    let tally = (0..scenario.replications)
        .into_par_iter()
        .map(|rep| {
            let mut t = Tally::default();
            match replicate(scenario, rep) {
                Outcome::Tested { bonferroni, tft, pavsi } => {
                    t.tested = 1;
                    t.bonferroni = bonferroni as usize;
                    t.tft = tft as usize;
                    t.pavsi = pavsi as usize;
                }
                Outcome::NoEvents => t.no_events = 1,
                Outcome::NoCensors => t.no_censors = 1,
                Outcome::Failed => t.failed = 1,
            }
            t
        })
        .reduce(Tally::default, |a, b| Tally {
            tested: a.tested + b.tested,
            bonferroni: a.bonferroni + b.bonferroni,
            tft: a.tft + b.tft,
            pavsi: a.pavsi + b.pavsi,
            no_events: a.no_events + b.no_events,
            no_censors: a.no_censors + b.no_censors,
            failed: a.failed + b.failed,
        });
    Ok(ScenarioResult {
        scenario: *scenario,
        bonferroni: Rate::from_counts(tally.bonferroni, tally.tested),
        tft: Rate::from_counts(tally.tft, tally.tested),
        pavsi: Rate::from_counts(tally.pavsi, tally.tested),
        tested: tally.tested,
        zero_event_datasets: tally.no_events,
        zero_censor_datasets: tally.no_censors,
        other_failures: tally.failed,
    })
}

/// Grid description; every field falls back to the full factorial design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub lambdas: Vec<f64>,
    pub n_patients: Vec<usize>,
    pub interval_modes: Vec<IntervalMethod>,
    pub pvalue_modes: Vec<PValueMethod>,
    pub model: ModelSource,
    pub convention: AtRiskConvention,
    pub replications: usize,
    pub seed: u64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            lambdas: STUDY_LAMBDAS.to_vec(),
            n_patients: STUDY_SIZES.to_vec(),
            interval_modes: vec![IntervalMethod::Censor, IntervalMethod::TenFixed],
            pvalue_modes: vec![PValueMethod::Midpoint, PValueMethod::Randomized],
            model: ModelSource::Generating,
            convention: AtRiskConvention::CensorsInclusive,
            replications: DESK_REPLICATIONS,
            seed: DEFAULT_SEED,
        }
    }
}

impl GridConfig {
    /// Scenarios in table order; each cell gets its own derived seed.
    pub fn scenarios(&self) -> Vec<SimulationScenario> {
        let mut out = Vec::new();
        for &interval_mode in &self.interval_modes {
            for &pvalue_mode in &self.pvalue_modes {
                for &n_patients in &self.n_patients {
                    for &lambda in &self.lambdas {
                        let key = splitmix(
                            self.seed
                                ^ splitmix(lambda.to_bits())
                                ^ splitmix(n_patients as u64).rotate_left(17)
                                ^ ((interval_mode as u64) << 40)
                                ^ ((pvalue_mode as u64) << 48),
                        );
                        out.push(SimulationScenario {
                            lambda,
                            n_patients,
                            interval_mode,
                            pvalue_mode,
                            model: self.model,
                            convention: self.convention,
                            replications: self.replications,
                            seed: key,
                        });
                    }
                }
            }
        }
        out
    }

    pub fn total_datasets(&self) -> usize {
        self.scenarios().len() * self.replications
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeIErrorReport {
    pub config: GridConfig,
    pub results: Vec<ScenarioResult>,
}

pub fn run_grid(config: &GridConfig) -> Result<TypeIErrorReport> {
    let results = config.scenarios().iter().map(run_scenario).collect::<Result<Vec<_>>>()?;
    Ok(TypeIErrorReport { config: config.clone(), results })
}

/// Output tables of a grid run, one per interval and p-value method.
pub const TABLES: [(&str, IntervalMethod, PValueMethod); 4] = [
    ("censor_midpoint", IntervalMethod::Censor, PValueMethod::Midpoint),
    ("ten_fixed_midpoint", IntervalMethod::TenFixed, PValueMethod::Midpoint),
    ("censor_randomized", IntervalMethod::Censor, PValueMethod::Randomized),
    ("ten_fixed_randomized", IntervalMethod::TenFixed, PValueMethod::Randomized),
];

impl TypeIErrorReport {
    pub fn find(&self, lambda: f64, n: usize, im: IntervalMethod, pm: PValueMethod) -> Option<&ScenarioResult> {
        self.results.iter().find(|r| {
            r.scenario.lambda == lambda && r.scenario.n_patients == n && r.scenario.interval_mode == im && r.scenario.pvalue_mode == pm
        })
    }

    pub fn table(&self, im: IntervalMethod, pm: PValueMethod) -> Vec<&ScenarioResult> {
        self.results.iter().filter(|r| r.scenario.interval_mode == im && r.scenario.pvalue_mode == pm).collect()
    }

    /// CSV for one table; one row per (λ, N) cell present in the report.
    pub fn table_csv(&self, im: IntervalMethod, pm: PValueMethod) -> String {
        let mut out = String::from(
            "lambda,n_patients,interval_mode,pvalue_mode,bonferroni,bonferroni_se,tft,tft_se,pavsi,pavsi_se,replications,tested,zero_event,zero_censor,failures\n",
        );
        for r in self.table(im, pm) {
            let s = &r.scenario;
            out.push_str(&format!(
                "{},{},{},{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{},{},{},{},{}\n",
                lambda_label(s.lambda),
                s.n_patients,
                interval_label(s.interval_mode),
                pvalue_label(s.pvalue_mode),
                r.bonferroni.rate,
                r.bonferroni.se,
                r.tft.rate,
                r.tft.se,
                r.pavsi.rate,
                r.pavsi.se,
                s.replications,
                r.tested,
                r.zero_event_datasets,
                r.zero_censor_datasets,
                r.other_failures,
            ));
        }
        out
    }
}

/// `1/30` style label when λ is the reciprocal of an integer.
pub fn lambda_label(lambda: f64) -> String {
    let inv = 1.0 / lambda;
    if (inv - inv.round()).abs() < 1e-9 {
        format!("1/{}", inv.round() as u64)
    } else {
        format!("{lambda}")
    }
}

fn interval_label(m: IntervalMethod) -> &'static str {
    match m {
        IntervalMethod::Censor => "censor",
        IntervalMethod::TenFixed => "ten-fixed",
    }
}

fn pvalue_label(m: PValueMethod) -> &'static str {
    match m {
        PValueMethod::Midpoint => "midpoint",
        PValueMethod::Randomized => "randomized",
    }
}
