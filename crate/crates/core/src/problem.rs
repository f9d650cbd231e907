use crate::{Error, Interval, PwqFunction, Result};

/// Scalar constrained linear-quadratic MPC problem.
///
/// Dynamics `x+ = a x + b u`, stage cost `q x^2 + r u^2`, terminal cost
/// `p x^2`, constraints `x in x_set`, `u in u_set` and `x(N) in terminal`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpcProblem {
    pub a: f64,
    pub b: f64,
    pub q: f64,
    pub r: f64,
    pub p: f64,
    pub x_set: Interval,
    pub u_set: Interval,
    pub terminal: Interval,
    pub horizon: usize,
}

impl MpcProblem {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.a, self.b, self.q, self.r, self.p]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidProblem("plant and weights must be finite"));
        }
        if self.q < 0.0 || self.p < 0.0 {
            return Err(Error::InvalidProblem("Q and P must be nonnegative"));
        }
        if self.r <= 0.0 {
            return Err(Error::InvalidProblem("R must be positive"));
        }
        if !self.terminal.is_subset_of(&self.x_set) {
            return Err(Error::InvalidProblem("terminal set must lie inside X"));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidProblem("horizon must be positive"));
        }
        Ok(())
    }

    /// The worked example: `x+ = 6/5 x + u`, `Q = 19/5`, `R = 1`, `P = 5`,
    /// `X = [-10, 10]`, `U = T = [-1, 1]`.
    pub fn example(horizon: usize) -> Self {
        MpcProblem {
            a: 6.0 / 5.0,
            b: 1.0,
            q: 19.0 / 5.0,
            r: 1.0,
            p: 5.0,
            x_set: Interval::new(-10.0, 10.0).unwrap(),
            u_set: Interval::new(-1.0, 1.0).unwrap(),
            terminal: Interval::new(-1.0, 1.0).unwrap(),
            horizon,
        }
    }

    pub fn with_horizon(&self, horizon: usize) -> Self {
        MpcProblem { horizon, ..*self }
    }

    #[inline]
    pub fn stage_cost(&self, x: f64, u: f64) -> f64 {
        self.q * x * x + self.r * u * u
    }

    #[inline]
    pub fn successor(&self, x: f64, u: f64) -> f64 {
        self.a * x + self.b * u
    }
}

/// Data defining `Q_N(x, u) = l(x, u) + V_{N-1}(a x + b u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QFunctionSpec {
    pub problem: MpcProblem,
    /// Value function for horizon `N - 1`.
    pub v_prev: PwqFunction,
}
