//! Error severity model: every failure is classified into one of four exit
//! classes, and stderr carries a machine-parseable `error[<tag>]: message`
//! line.
//!
//! Exit codes: 0 success, 2 usage or invalid input, 3 resource guard
//! (exhaustive-search budget), 4 numerical failure (non-convergence,
//! indefiniteness, violated self-check identities), 1 I/O or other
//! environment trouble.

use modalsense::datasets::DatasetError;
use modalsense::estimate::EstimateError;
use modalsense::experiments::ExperimentError;
use modalsense::numerics::NumericsError;
use modalsense::placement::PlacementError;
use modalsense::pod::PodError;
use modalsense::risk::RiskError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    /// Bad flags, malformed config, or invalid input data.
    Usage,
    /// A guard refused to start work that exceeds a declared budget.
    Resource,
    /// The numerics failed or a mathematical self-check was violated.
    Numerical,
    /// The filesystem or environment failed.
    Io,
}

impl Severity {
    pub fn exit_code(self) -> i32 {
        match self {
            Severity::Usage => 2,
            Severity::Resource => 3,
            Severity::Numerical => 4,
            Severity::Io => 1,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Severity::Usage => "usage",
            Severity::Resource => "budget",
            Severity::Numerical => "numerics",
            Severity::Io => "io",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub severity: Severity,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Usage,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Io,
            message: message.into(),
        }
    }
}

fn classify_numerics(e: &NumericsError) -> Severity {
    match e {
        NumericsError::NoConvergence { .. } | NumericsError::NotPositiveDefinite { .. } => {
            Severity::Numerical
        }
        _ => Severity::Usage,
    }
}

fn classify_pod(e: &PodError) -> Severity {
    match e {
        PodError::SingularPrior { .. } | PodError::IndefinitePrior { .. } => Severity::Numerical,
        PodError::Numerics(inner) => classify_numerics(inner),
        _ => Severity::Usage,
    }
}

fn classify_placement(e: &PlacementError) -> Severity {
    match e {
        PlacementError::BudgetExceeded { .. } => Severity::Resource,
        PlacementError::Pod(inner) => classify_pod(inner),
        PlacementError::Numerics(inner) => classify_numerics(inner),
        _ => Severity::Usage,
    }
}

fn classify_estimate(e: &EstimateError) -> Severity {
    match e {
        EstimateError::DegenerateMeasurementMap => Severity::Numerical,
        EstimateError::Pod(inner) => classify_pod(inner),
        EstimateError::Placement(inner) => classify_placement(inner),
        EstimateError::Numerics(inner) => classify_numerics(inner),
        _ => Severity::Usage,
    }
}

fn classify_risk(e: &RiskError) -> Severity {
    match e {
        RiskError::InvariantViolation { .. } => Severity::Numerical,
        RiskError::Estimate(inner) => classify_estimate(inner),
        RiskError::Pod(inner) => classify_pod(inner),
        RiskError::Placement(inner) => classify_placement(inner),
        RiskError::Numerics(inner) => classify_numerics(inner),
        RiskError::TooFewDraws { .. } => Severity::Usage,
    }
}

fn classify_dataset(e: &DatasetError) -> Severity {
    match e {
        DatasetError::Io { .. } => Severity::Io,
        DatasetError::Numerics(inner) => classify_numerics(inner),
        _ => Severity::Usage,
    }
}

fn classify_experiment(e: &ExperimentError) -> Severity {
    match e {
        ExperimentError::Io { .. } => Severity::Io,
        ExperimentError::Dataset(inner) => classify_dataset(inner),
        ExperimentError::Pod(inner) => classify_pod(inner),
        ExperimentError::Placement(inner) => classify_placement(inner),
        ExperimentError::Estimate(inner) => classify_estimate(inner),
        ExperimentError::Risk(inner) => classify_risk(inner),
        ExperimentError::Numerics(inner) => classify_numerics(inner),
        _ => Severity::Usage,
    }
}

macro_rules! from_classified {
    ($ty:ty, $classify:ident) => {
        impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError {
                    severity: $classify(&e),
                    message: e.to_string(),
                }
            }
        }
    };
}

from_classified!(NumericsError, classify_numerics);
from_classified!(PodError, classify_pod);
from_classified!(PlacementError, classify_placement);
from_classified!(EstimateError, classify_estimate);
from_classified!(RiskError, classify_risk);
from_classified!(DatasetError, classify_dataset);
from_classified!(ExperimentError, classify_experiment);

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::io(e.to_string())
    }
}
