//! Claims reserving by modelling claim development on run-off triangles.
//!
//! The development rate of cohort `k` at development period `j`,
//! `mu = X[k][j] / (C[k][j-1] + eta X[k][j])`, is fitted with a Poisson
//! GLM. The age-only model reproduces chain-ladder factors exactly through
//! `f = (1 + (1 - eta) mu) / (1 - eta mu)`; age-cohort, age-period and
//! age-period-cohort structures add effects that are extrapolated by simple
//! time-series models before the lower triangle is completed with the chain
//! principle.
//!
//! Modules:
//! - [`triangle`], [`io`]: triangles, exposures, CSV format
//! - [`hazard`]: claim-development GLMs
//! - [`amount`]: claim-amount GLM baselines
//! - [`forecast`]: effect extrapolation
//! - [`reserving`]: factors, completion, reserves
//! - [`diagnostics`]: scaled deviance residuals
//! - [`evaluation`]: diagonal-holdout backtesting

pub mod amount;
pub mod datasets;
pub mod diagnostics;
pub mod effects;
pub mod error;
pub mod evaluation;
pub mod forecast;
mod glm;
pub mod hazard;
pub mod io;
pub mod par;
pub mod pipeline;
pub mod plot;
pub mod reserving;
pub mod triangle;

pub use amount::{fit_amount, AmountFit, AmountStructure};
pub use effects::EffectPath;
pub use error::{Error, Result};
pub use evaluation::{EvalOptions, IncidenceBasis};
pub use forecast::{ArimaMethod, EffectForecast, ForecastOptions, SeriesModel};
pub use hazard::{HazardFit, HazardStructure, ModelSpec};
pub use io::TriangleKind;
pub use par::Execution;
pub use pipeline::{reserve, Model, PipelineOptions};
pub use reserving::ReserveReport;
pub use triangle::{Mode, RunOffTriangle};
