//! Interval calibration tests for parametric survival models.
//!
//! Right-censored data are cut into time intervals, either at the observed
//! censor times or on a user-supplied grid. Under a fitted model each
//! interval's event count is binomial (or a sum of binomials on a grid), so
//! every interval yields an exact discrete p-value. Those p-values feed an
//! individual flag, a Bonferroni familywise test, a transformed Fisher test
//! (TFT) and the PAVSI count test.
//!
//! ```
//! use survcheck::{fit, build_censor_scheme, run_full_test, Family, PValueMode, SurvivalDataset};
//!
//! let data = SurvivalDataset::from_pairs(&[
//!     (1.0, 1), (2.0, 0), (2.5, 1), (3.0, 1), (4.0, 0), (5.0, 1), (6.0, 0),
//! ]).unwrap();
//! let model = fit(Family::Exponential, &data).unwrap();
//! let scheme = build_censor_scheme(&data, &model).unwrap();
//! let result = run_full_test(&scheme, &PValueMode::Midpoint).unwrap();
//! assert_eq!(result.n_tested, 3);
//! ```

pub mod distribution;
pub mod error;
pub mod intervals;
pub mod models;
pub mod report;
pub mod simulation;
pub mod special;
pub mod survival;
pub mod verdicts;

pub use distribution::{
    binomial_pmf, chi_square_sf, midpoint_pvalue, randomized_pvalue, sum_of_binomials_pmf,
    DiscreteDistribution, PValue, PValueKind,
};
pub use error::{Error, Result};
pub use intervals::{
    build_censor_scheme, build_censor_scheme_with, build_specified_scheme,
    build_specified_scheme_with, default_ten_interval_grid, AtRiskConvention, Interval,
    IntervalScheme, SchemeMode, SpecifiedGrid,
};
pub use models::{fit, fit_all, Family, FittedModel, ModelJson};
pub use survival::{at_risk_table, kaplan_meier, load_dataset, KaplanMeierCurve, SurvivalDataset, SurvivalRecord};
pub use verdicts::{
    bonferroni_test, individual_flags, pavsi, run_full_test, tft, Flag, IntervalTestResult,
    IntervalVerdict, PValueMode,
};
