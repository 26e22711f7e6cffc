//! Quantitative checks of moment envelopes, entropy balance, tails and
//! asymptotic rates against simulation output.

mod bounds;
mod entropy;
mod fit;
mod moments;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use bounds::{m1_bound_check, product_bound_check, Envelope};
pub use entropy::{entropy, entropy_production_residual, EntropyResidual};
pub use fit::{detect_knee, fit_exp_decay, fit_exp_decay_window, fit_line, fit_power_law, ExpFit, Fit, Knee};
pub use moments::{
    appmom_inequality_check, compute_ssp, exp_moment, generalized_binomial, lower_bound_scan, AppmomResult,
    LowerBoundReport, MomentPoint,
};

/// Default multiplier for "holds within kσ" checks.
pub const K_SIGMA: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

/// One entry of the JSON check report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub name: String,
    pub status: Status,
    pub margin: f64,
    pub tolerance: f64,
    pub details: serde_json::Value,
}

impl Report {
    pub fn new(name: impl Into<String>, pass: bool, margin: f64, tolerance: f64, details: serde_json::Value) -> Self {
        Report {
            name: name.into(),
            status: if pass { Status::Pass } else { Status::Fail },
            margin,
            tolerance,
            details,
        }
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

pub fn write_reports(path: &Path, reports: &[Report]) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(reports)?)?;
    Ok(())
}
