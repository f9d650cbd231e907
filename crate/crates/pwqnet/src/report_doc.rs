//! Verification reports as JSON.

use pwqnet_core::verify::Report;
use serde::{Deserialize, Serialize};

use crate::json;

/// A [`Report`]; an infinite `max_error` is written as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDoc {
    pub check: String,
    pub pass: bool,
    pub max_error: Option<f64>,
    pub location: Vec<f64>,
    pub tol: f64,
    pub samples: usize,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl From<&Report> for ReportDoc {
    fn from(r: &Report) -> Self {
        ReportDoc {
            check: r.check.clone(),
            pass: r.pass,
            max_error: r.max_error.is_finite().then_some(r.max_error),
            location: r.location.clone(),
            tol: r.tol,
            samples: r.samples,
            detail: r.detail.clone(),
        }
    }
}

/// `{"pass": all_passed, "checks": [...]}`.
pub fn reports_to_json(reports: &[Report]) -> String {
    #[derive(Serialize)]
    struct Summary {
        pass: bool,
        checks: Vec<ReportDoc>,
    }
    json::to_string(&Summary {
        pass: reports.iter().all(|r| r.pass),
        checks: reports.iter().map(ReportDoc::from).collect(),
    })
    .expect("reports always serialize")
}
