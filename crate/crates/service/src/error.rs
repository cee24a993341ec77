use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use skyplan_core::dss::DssError;
use skyplan_core::geo::GeoError;
use skyplan_core::mission::{MissionError, ValidationError};
use skyplan_core::moea::MoeaError;
use skyplan_core::plan::PlanError;
use skyplan_core::sim::SimError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Mission(#[from] MissionError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Search(#[from] MoeaError),
    #[error(transparent)]
    Ranking(#[from] DssError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    BadRequest(String),
    #[error("{0} not found")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("external planner: {0}")]
    External(String),
}

impl ServiceError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ServiceError::Io { path: path.into(), source }
    }

    /// Stable machine-readable code.
    pub fn reason(&self) -> &'static str {
        match self {
            ServiceError::Mission(MissionError::Json(_)) => "malformed_json",
            ServiceError::Mission(_) => "validation",
            ServiceError::Plan(PlanError::Mission(_)) => "validation",
            ServiceError::Plan(_) | ServiceError::Geo(_) => "planning_context",
            ServiceError::Search(MoeaError::Config(_)) => "invalid_config",
            ServiceError::Search(_) => "planning_context",
            ServiceError::Ranking(_) => "ranking",
            ServiceError::Sim(SimError::Drift { .. }) => "drift",
            ServiceError::Sim(SimError::Mission(_)) => "validation",
            ServiceError::Sim(_) => "simulation",
            ServiceError::Io { .. } => "io",
            ServiceError::BadRequest(_) => "bad_request",
            ServiceError::NotFound(_) => "not_found",
            ServiceError::Conflict(_) => "conflict",
            ServiceError::External(_) => "external_planner",
        }
    }

    pub fn status(&self) -> u16 {
        match self.reason() {
            "malformed_json" | "bad_request" | "invalid_config" => 400,
            "not_found" => 404,
            "conflict" | "drift" => 409,
            "validation" | "planning_context" => 422,
            "external_planner" => 502,
            _ => 500,
        }
    }

    pub fn validation_errors(&self) -> Vec<ValidationError> {
        let m = match self {
            ServiceError::Mission(m)
            | ServiceError::Plan(PlanError::Mission(m))
            | ServiceError::Sim(SimError::Mission(m)) => m,
            _ => return Vec::new(),
        };
        m.validation_errors().to_vec()
    }

    pub fn is_validation(&self) -> bool {
        self.reason() == "validation" || self.reason() == "malformed_json"
    }

    pub fn problem(&self) -> Problem {
        Problem {
            status: self.status(),
            reason: self.reason().to_string(),
            title: self.to_string(),
            errors: self.validation_errors(),
        }
    }
}

/// JSON error document returned by the API and printed by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub status: u16,
    pub reason: String,
    pub title: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<ValidationError>,
}

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;
