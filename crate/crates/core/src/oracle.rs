//! Brute-force reference for `V_N`: nested grid search over the input
//! sequence with local refinement. Shares no code with [`crate::mpc`].

use alloc::vec::Vec;

use crate::MpcProblem;

/// Refinement passes used by [`brute_force_value`].
pub const DEFAULT_PASSES: usize = 5;

/// Bracket shrink factor per pass.
const SHRINK: f64 = 10.0;

const SLACK: f64 = 1e-12;

/// Minimal cost from `x` over all input sequences, or `f64::INFINITY` if no
/// sequence on the search grid satisfies the constraints.
///
/// `grid` is the number of points per input per pass; 21 or more guarantees
/// the refined bracket keeps the minimizer of the convex inner problem.
pub fn brute_force_value(problem: &MpcProblem, x: f64, grid: usize) -> f64 {
    brute_force_value_with(problem, x, grid, DEFAULT_PASSES)
}

pub fn brute_force_value_with(problem: &MpcProblem, x: f64, grid: usize, passes: usize) -> f64 {
    let search = Search::new(problem, grid.max(2), passes.max(1));
    search.cost_to_go(x, problem.horizon)
}

struct Search<'a> {
    problem: &'a MpcProblem,
    grid: usize,
    passes: usize,
    /// `reach[j]`: states that can be steered into the terminal set in `j`
    /// steps, as `(lo, hi)`; empty when `lo > hi`.
    reach: Vec<(f64, f64)>,
}

impl<'a> Search<'a> {
    fn new(problem: &'a MpcProblem, grid: usize, passes: usize) -> Self {
        let mut reach = Vec::with_capacity(problem.horizon + 1);
        reach.push((problem.terminal.lower(), problem.terminal.upper()));
        for j in 1..=problem.horizon {
            let (s_lo, s_hi) = reach[j - 1];
            // a x + b u hits [s_lo, s_hi] for some u iff a x lies in the
            // Minkowski difference with b U; take extremes over the corners
            let corners = [problem.b * problem.u_set.lower(), problem.b * problem.u_set.upper()];
            let ax_lo = s_lo - corners[0].max(corners[1]);
            let ax_hi = s_hi - corners[0].min(corners[1]);
            let (mut lo, mut hi) = if problem.a == 0.0 {
                if ax_lo <= 0.0 && 0.0 <= ax_hi {
                    (f64::NEG_INFINITY, f64::INFINITY)
                } else {
                    (1.0, -1.0)
                }
            } else {
                let e = [ax_lo / problem.a, ax_hi / problem.a];
                (e[0].min(e[1]), e[0].max(e[1]))
            };
            if s_lo > s_hi {
                lo = 1.0;
                hi = -1.0;
            }
            reach.push((
                lo.max(problem.x_set.lower()),
                hi.min(problem.x_set.upper()),
            ));
        }
        Search {
            problem,
            grid,
            passes,
            reach,
        }
    }

    fn cost_to_go(&self, y: f64, steps: usize) -> f64 {
        let pr = self.problem;
        if steps == 0 {
            return if pr.terminal.contains_within(y, SLACK) {
                pr.p * y * y
            } else {
                f64::INFINITY
            };
        }
        if !pr.x_set.contains_within(y, SLACK) {
            return f64::INFINITY;
        }
        let Some((u_lo, u_hi)) = self.input_range(y, steps) else {
            return f64::INFINITY;
        };
        let stage = pr.q * y * y;
        let g = |u: f64| stage + pr.r * u * u + self.cost_to_go(pr.a * y + pr.b * u, steps - 1);

        let (mut lo, mut hi) = (u_lo, u_hi);
        let mut best = (f64::INFINITY, 0.5 * (u_lo + u_hi));
        for _ in 0..self.passes {
            let spacing = (hi - lo) / (self.grid - 1) as f64;
            for i in 0..self.grid {
                let u = if i + 1 == self.grid { hi } else { lo + spacing * i as f64 };
                let v = g(u);
                if v < best.0 {
                    best = (v, u);
                }
            }
            if !best.0.is_finite() || spacing == 0.0 {
                break;
            }
            let half = (0.5 * (hi - lo) / SHRINK).max(spacing);
            lo = (best.1 - half).max(u_lo);
            hi = (best.1 + half).min(u_hi);
        }
        best.0
    }

    /// Inputs in `U` whose successor can still finish in `steps - 1` steps.
    fn input_range(&self, y: f64, steps: usize) -> Option<(f64, f64)> {
        let pr = self.problem;
        let (s_lo, s_hi) = self.reach[steps - 1];
        if s_lo > s_hi {
            return None;
        }
        let (mut lo, mut hi) = (pr.u_set.lower(), pr.u_set.upper());
        if pr.b != 0.0 {
            let e = [(s_lo - pr.a * y) / pr.b, (s_hi - pr.a * y) / pr.b];
            lo = lo.max(e[0].min(e[1]));
            hi = hi.min(e[0].max(e[1]));
        }
        (lo <= hi).then_some((lo, hi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_costs_nothing() {
        let v = brute_force_value(&MpcProblem::example(1), 0.0, 21);
        assert!(v.abs() < 1e-6);
    }

    #[test]
    fn matches_printed_outer_piece() {
        // 11 x^2 - 12 x + 6 at x = 1.5
        let v = brute_force_value(&MpcProblem::example(1), 1.5, 21);
        assert!((v - 12.75).abs() < 1e-4, "{v}");
    }

    #[test]
    fn infeasible_state_is_infinite() {
        assert_eq!(brute_force_value(&MpcProblem::example(1), 2.0, 21), f64::INFINITY);
        assert_eq!(brute_force_value(&MpcProblem::example(2), 9.5, 21), f64::INFINITY);
    }
}
