//! End-to-end reserving pipelines for every supported model.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::amount::{amount_reserve, fit_amount, AmountStructure};
use crate::error::{Error, Result};
use crate::forecast::{forecast_effects, ForecastOptions};
use crate::hazard::{self, HazardStructure, ModelSpec};
use crate::reserving::{chain_ladder_reserve, hazard_reserve, FactorOptions, ReserveReport};
use crate::triangle::{Mode, RunOffTriangle};

/// A reserving model: a hazard structure, an amount structure, or plain chain ladder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Model {
    Hazard(HazardStructure),
    Amount(AmountStructure),
    ChainLadder,
}

impl Model {
    /// The six models compared in rankings: four hazard structures and two amount models.
    pub fn ranking_set() -> Vec<Model> {
        vec![
            Model::Amount(AmountStructure::AgeCohort),
            Model::Amount(AmountStructure::AgePeriodCohort),
            Model::Hazard(HazardStructure::Age),
            Model::Hazard(HazardStructure::AgeCohort),
            Model::Hazard(HazardStructure::AgePeriod),
            Model::Hazard(HazardStructure::AgePeriodCohort),
        ]
    }

    /// Model families `amount`, `hazard` and their union.
    pub fn default_families() -> Vec<(String, Vec<Model>)> {
        let amount = vec![
            Model::Amount(AmountStructure::AgeCohort),
            Model::Amount(AmountStructure::AgePeriodCohort),
        ];
        let hazard: Vec<Model> = HazardStructure::ALL
            .iter()
            .map(|&s| Model::Hazard(s))
            .collect();
        let union = amount.iter().chain(&hazard).copied().collect();
        vec![
            ("amount".to_string(), amount),
            ("hazard".to_string(), hazard),
            ("union".to_string(), union),
        ]
    }

    pub fn label(self) -> &'static str {
        match self {
            Model::Hazard(s) => s.label(),
            Model::Amount(s) => s.label(),
            Model::ChainLadder => "cl",
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "cl" {
            return Ok(Model::ChainLadder);
        }
        if let Ok(h) = s.parse::<HazardStructure>() {
            return Ok(Model::Hazard(h));
        }
        s.parse::<AmountStructure>()
            .map(Model::Amount)
            .map_err(|_| Error::Parse(format!("unknown model {s:?}")))
    }
}

impl Serialize for Model {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for Model {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub eta: f64,
    pub mode: Mode,
    pub cap_hazard: bool,
    pub forecast: ForecastOptions,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            eta: 0.5,
            mode: Mode::Strict,
            cap_hazard: false,
            forecast: ForecastOptions::default(),
        }
    }
}

/// Fits `model` on `tri`, extrapolates what it needs and completes the triangle.
pub fn reserve(
    model: Model,
    tri: &RunOffTriangle,
    options: &PipelineOptions,
) -> Result<ReserveReport> {
    match model {
        Model::Hazard(structure) => {
            let spec = ModelSpec::new(structure).with_eta(options.eta);
            let fit = hazard::fit(spec, tri, options.mode)?;
            let forecast = forecast_effects(&fit, options.forecast)?;
            hazard_reserve(
                tri,
                &fit,
                &forecast,
                FactorOptions {
                    cap_hazard: options.cap_hazard,
                },
            )
        }
        Model::Amount(structure) => {
            let fit = fit_amount(structure, tri, options.mode)?;
            amount_reserve(tri, &fit, options.forecast.period_model)
        }
        Model::ChainLadder => chain_ladder_reserve(tri),
    }
}
