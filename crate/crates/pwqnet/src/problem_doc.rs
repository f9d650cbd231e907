//! Problem definitions (TOML) and DP solutions (JSON).
//!
//! ```toml
//! a = 1.2
//! b = 1.0
//! q = 3.8
//! r = 1.0
//! p = 5.0
//! x_set = [-10.0, 10.0]
//! u_set = [-1.0, 1.0]
//! terminal = [-1.0, 1.0]
//! horizon = 1
//! ```

use pwqnet_core::mpc::DpStage;
use pwqnet_core::piecewise::Piece;
use pwqnet_core::{Affine, Interval, MpcProblem, PwaFunction, PwqFunction, QFunctionSpec, Quadratic};
use serde::{Deserialize, Serialize};

use crate::{json, DocError, DocResult};

fn interval(bounds: [f64; 2], what: &str) -> DocResult<Interval> {
    Interval::new(bounds[0], bounds[1])
        .map_err(|_| DocError::Invalid(format!("{what} must be [lower, upper] with lower < upper, got {bounds:?}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDoc {
    pub a: f64,
    pub b: f64,
    pub q: f64,
    pub r: f64,
    pub p: f64,
    pub x_set: [f64; 2],
    pub u_set: [f64; 2],
    pub terminal: [f64; 2],
    pub horizon: usize,
}

impl ProblemDoc {
    /// The problem, without range checks beyond interval well-formedness;
    /// see [`MpcProblem::validate`].
    pub fn to_problem(&self) -> DocResult<MpcProblem> {
        Ok(MpcProblem {
            a: self.a,
            b: self.b,
            q: self.q,
            r: self.r,
            p: self.p,
            x_set: interval(self.x_set, "x_set")?,
            u_set: interval(self.u_set, "u_set")?,
            terminal: interval(self.terminal, "terminal")?,
            horizon: self.horizon,
        })
    }

    pub fn from_toml(text: &str) -> DocResult<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("problem documents always serialize")
    }
}

impl From<&MpcProblem> for ProblemDoc {
    fn from(p: &MpcProblem) -> Self {
        let b = |i: Interval| [i.lower(), i.upper()];
        ProblemDoc {
            a: p.a,
            b: p.b,
            q: p.q,
            r: p.r,
            p: p.p,
            x_set: b(p.x_set),
            u_set: b(p.u_set),
            terminal: b(p.terminal),
            horizon: p.horizon,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticPieceDoc {
    pub region: [f64; 2],
    pub s: f64,
    pub l: f64,
    pub c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffinePieceDoc {
    pub region: [f64; 2],
    pub k: f64,
    pub b: f64,
}

/// One DP stage: value function and (except at the terminal stage) policy
/// with `steps_to_go` steps remaining.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageDoc {
    pub steps_to_go: usize,
    pub feasible: [f64; 2],
    pub value: Vec<QuadraticPieceDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<Vec<AffinePieceDoc>>,
}

impl StageDoc {
    pub fn new(steps_to_go: usize, stage: &DpStage) -> Self {
        let region = |i: Interval| [i.lower(), i.upper()];
        StageDoc {
            steps_to_go,
            feasible: region(stage.feasible),
            value: stage
                .value
                .pieces()
                .iter()
                .map(|p| QuadraticPieceDoc {
                    region: region(p.region),
                    s: p.f.s,
                    l: p.f.l,
                    c: p.f.c,
                })
                .collect(),
            policy: stage.policy.as_ref().map(|pol| {
                pol.pieces()
                    .iter()
                    .map(|p| AffinePieceDoc {
                        region: region(p.region),
                        k: p.f.k,
                        b: p.f.b,
                    })
                    .collect()
            }),
        }
    }

    pub fn value(&self) -> DocResult<PwqFunction> {
        let pieces = self
            .value
            .iter()
            .map(|p| Ok(Piece::new(interval(p.region, "region")?, Quadratic::new(p.s, p.l, p.c))))
            .collect::<DocResult<Vec<_>>>()?;
        Ok(PwqFunction::from_pieces(pieces)?)
    }

    pub fn policy(&self) -> DocResult<Option<PwaFunction>> {
        let Some(policy) = &self.policy else {
            return Ok(None);
        };
        let pieces = policy
            .iter()
            .map(|p| Ok(Piece::new(interval(p.region, "region")?, Affine::new(p.k, p.b))))
            .collect::<DocResult<Vec<_>>>()?;
        Ok(Some(PwaFunction::from_pieces(pieces)?))
    }
}

/// Output of `solve`: the problem and every stage from the terminal cost
/// (`steps_to_go = 0`) up to the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionDoc {
    pub problem: ProblemDoc,
    pub stages: Vec<StageDoc>,
}

impl SolutionDoc {
    pub fn new(problem: &MpcProblem, stages: &[DpStage]) -> Self {
        SolutionDoc {
            problem: problem.into(),
            stages: stages.iter().enumerate().map(|(k, s)| StageDoc::new(k, s)).collect(),
        }
    }

    pub fn stage(&self, steps_to_go: usize) -> DocResult<&StageDoc> {
        self.stages
            .iter()
            .find(|s| s.steps_to_go == steps_to_go)
            .ok_or_else(|| DocError::Invalid(format!("solution has no stage with {steps_to_go} steps to go")))
    }

    /// Value function and policy at the horizon.
    pub fn last(&self) -> DocResult<&StageDoc> {
        self.stage(self.problem.horizon)
    }

    /// `Q_N` for the problem's horizon `N >= 1`.
    pub fn q_spec(&self) -> DocResult<QFunctionSpec> {
        let n = self.problem.horizon;
        if n == 0 {
            return Err(DocError::Invalid("Q-function needs horizon >= 1".into()));
        }
        Ok(QFunctionSpec {
            problem: self.problem.to_problem()?,
            v_prev: self.stage(n - 1)?.value()?,
        })
    }

    pub fn to_json(&self) -> String {
        json::to_string(self).expect("solutions always serialize")
    }

    pub fn from_json(text: &str) -> DocResult<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
