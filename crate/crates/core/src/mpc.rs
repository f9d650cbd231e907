//! Exact explicit MPC for scalar systems by backward dynamic programming.
//!
//! Each stage minimizes `q x^2 + r u^2 + V_k(a x + b u)` over `u`. For every
//! piece of `V_k` the optimum is one of a few affine input laws: the interior
//! stationary point, `u` at a bound of `U`, or the successor pinned to a bound
//! of the piece. Each law is valid on an interval of `x`; the next value
//! function is the pointwise minimum of the resulting quadratics.

use alloc::vec;
use alloc::vec::Vec;

use crate::piecewise::{Piece, PieceFn};
use crate::{
    Affine, Error, Interval, MpcProblem, PwaFunction, PwqFunction, QFunctionSpec, Quadratic,
    Result, EPS_MERGE,
};

/// Pieces narrower than this are absorbed into their neighbours.
pub const SLIVER_WIDTH: f64 = 1e-10;

/// Negative discriminants above this are treated as tangency.
const DISCRIMINANT_CLIP: f64 = -1e-12;

/// Discriminants this small relative to `l^2` or `4 s c` count as zero.
const TANGENCY_RTOL: f64 = 1e-11;

/// Tolerance on `u in U` and on piece membership of successors.
const MEMBERSHIP_TOL: f64 = 1e-12;

/// Result of one backward DP step.
#[derive(Debug, Clone, PartialEq)]
pub struct DpStage {
    /// `V_k`, defined on `feasible`.
    pub value: PwqFunction,
    /// Optimal first input for `k` remaining steps; `None` for `k = 0`.
    pub policy: Option<PwaFunction>,
    pub feasible: Interval,
}

/// Solves all stages `0..=N`. Stage 0 is the terminal cost on the terminal set.
pub fn dp_solve(problem: &MpcProblem) -> Result<Vec<DpStage>> {
    problem.validate()?;
    let terminal = PwqFunction::from_pieces(vec![Piece::new(
        problem.terminal,
        Quadratic::new(problem.p, 0.0, 0.0),
    )])?;
    let mut stages = Vec::with_capacity(problem.horizon + 1);
    stages.push(DpStage {
        value: terminal,
        policy: None,
        feasible: problem.terminal,
    });
    for k in 1..=problem.horizon {
        let next = dp_step(problem, &stages[k - 1].value, k)?;
        stages.push(next);
    }
    Ok(stages)
}

/// `V_N` and its policy.
pub fn solve_value(problem: &MpcProblem) -> Result<DpStage> {
    let mut stages = dp_solve(problem)?;
    Ok(stages.pop().expect("dp_solve returns horizon + 1 stages"))
}

/// States from which some admissible input reaches `target`.
pub fn predecessor_set(problem: &MpcProblem, target: &Interval) -> Option<Interval> {
    let (u_lo, u_hi) = (problem.u_set.lower(), problem.u_set.upper());
    let bu_min = (problem.b * u_lo).min(problem.b * u_hi);
    let bu_max = (problem.b * u_lo).max(problem.b * u_hi);
    let lo = target.lower() - bu_max;
    let hi = target.upper() - bu_min;
    let (x_lo, x_hi) = affine_preimage(problem.a, 0.0, lo, hi);
    Interval::new(x_lo.max(problem.x_set.lower()), x_hi.min(problem.x_set.upper())).ok()
}

/// `{x : lo <= m x + q <= hi}` as a possibly infinite, possibly empty pair.
fn affine_preimage(m: f64, q: f64, lo: f64, hi: f64) -> (f64, f64) {
    if m > 0.0 {
        ((lo - q) / m, (hi - q) / m)
    } else if m < 0.0 {
        ((hi - q) / m, (lo - q) / m)
    } else if lo - MEMBERSHIP_TOL <= q && q <= hi + MEMBERSHIP_TOL {
        (f64::NEG_INFINITY, f64::INFINITY)
    } else {
        (f64::INFINITY, f64::NEG_INFINITY)
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    law: Affine,
    cost: Quadratic,
    lo: f64,
    hi: f64,
}

impl Candidate {
    fn covers(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

fn intersect(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0.max(b.0), a.1.min(b.1))
}

/// Cost of following `u = law(x)` with the successor `alpha x + gamma`
/// evaluated on `piece`.
fn candidate_cost(problem: &MpcProblem, law: Affine, alpha: f64, gamma: f64, piece: &Quadratic) -> Quadratic {
    let (q, r) = (problem.q, problem.r);
    let (k, b) = (law.k, law.b);
    Quadratic::new(
        q + r * k * k + piece.s * alpha * alpha,
        2.0 * r * k * b + 2.0 * piece.s * alpha * gamma + piece.l * alpha,
        r * b * b + piece.s * gamma * gamma + piece.l * gamma + piece.c,
    )
}

fn candidates(problem: &MpcProblem, value: &PwqFunction, domain: (f64, f64)) -> Vec<Candidate> {
    let (a, b) = (problem.a, problem.b);
    let u_set = problem.u_set;
    let mut out = Vec::with_capacity(5 * value.len());

    let mut push = |law: Affine, alpha: f64, gamma: f64, piece: &Piece<Quadratic>, pinned: bool| {
        let mut valid = intersect(domain, affine_preimage(law.k, law.b, u_set.lower(), u_set.upper()));
        if !pinned {
            let reg = piece.region;
            valid = intersect(valid, affine_preimage(alpha, gamma, reg.lower(), reg.upper()));
        }
        if valid.0 <= valid.1 {
            out.push(Candidate {
                law,
                cost: candidate_cost(problem, law, alpha, gamma, &piece.f),
                lo: valid.0,
                hi: valid.1,
            });
        }
    };

    for piece in value.pieces() {
        let f = piece.f;
        // interior stationary point of r u^2 + f(a x + b u)
        let curv = problem.r + f.s * b * b;
        let stationary = Affine::new(-f.s * b * a / curv, -f.l * b / (2.0 * curv));
        for law in [
            stationary,
            Affine::new(0.0, u_set.lower()),
            Affine::new(0.0, u_set.upper()),
        ] {
            push(law, a + b * law.k, b * law.b, piece, false);
        }
        if b != 0.0 {
            for pin in [piece.region.lower(), piece.region.upper()] {
                let law = Affine::new(-a / b, pin / b);
                push(law, 0.0, pin, piece, true);
            }
        }
    }
    out
}

/// Real roots of `s x^2 + l x + c`, with near-tangent discriminants clipped.
fn quadratic_roots(d: Quadratic) -> ([f64; 2], usize) {
    let Quadratic { s, l, c } = d;
    if s == 0.0 {
        if l == 0.0 {
            return ([0.0; 2], 0);
        }
        return ([-c / l, 0.0], 1);
    }
    let disc = l * l - 4.0 * s * c;
    // tangencies come out with a rounding-sized discriminant of either sign;
    // its square root would move the double root by ~1e-8
    let scale = (l * l).max((4.0 * s * c).abs());
    if disc.abs() <= TANGENCY_RTOL * scale || (DISCRIMINANT_CLIP..0.0).contains(&disc) {
        return ([-l / (2.0 * s), 0.0], 1);
    }
    if disc < 0.0 {
        return ([0.0; 2], 0);
    }
    let sq = libm::sqrt(disc);
    let q = -0.5 * (l + if l >= 0.0 { sq } else { -sq });
    if q == 0.0 {
        return ([-l / (2.0 * s), 0.0], 1);
    }
    ([q / s, c / q], 2)
}

fn dp_step(problem: &MpcProblem, value: &PwqFunction, stage: usize) -> Result<DpStage> {
    let feasible = predecessor_set(problem, &value.domain()).ok_or(Error::Infeasible { stage })?;
    let (f_lo, f_hi) = (feasible.lower(), feasible.upper());
    let cands = candidates(problem, value, (f_lo, f_hi));

    let mut points: Vec<f64> = Vec::with_capacity(4 * cands.len() * cands.len());
    for c in &cands {
        points.push(c.lo);
        points.push(c.hi);
    }
    for (i, ci) in cands.iter().enumerate() {
        for cj in &cands[i + 1..] {
            let (lo, hi) = (ci.lo.max(cj.lo), ci.hi.min(cj.hi));
            if lo >= hi {
                continue;
            }
            let diff = Quadratic::new(ci.cost.s - cj.cost.s, ci.cost.l - cj.cost.l, ci.cost.c - cj.cost.c);
            let (roots, n) = quadratic_roots(diff);
            points.extend(roots[..n].iter().copied().filter(|r| lo < *r && *r < hi));
        }
    }
    points.retain(|p| f_lo < *p && *p < f_hi);
    points.sort_by(f64::total_cmp);

    let mut cuts = vec![f_lo];
    for p in points {
        let last = cuts[cuts.len() - 1];
        if p - last >= SLIVER_WIDTH && f_hi - p >= SLIVER_WIDTH {
            cuts.push(p);
        }
    }
    cuts.push(f_hi);

    // (region, law, cost) per elementary interval, merged on the fly
    let mut pieces: Vec<(Interval, Affine, Quadratic)> = Vec::new();
    for w in cuts.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let best = cands
            .iter()
            .filter(|c| c.covers(mid))
            .min_by(|x, y| x.cost.eval(mid).total_cmp(&y.cost.eval(mid)))
            .ok_or(Error::CoverageGap { stage, at: mid })?;
        match pieces.last_mut() {
            Some(last)
                if last.1.coeff_distance(&best.law) < EPS_MERGE
                    && last.2.coeff_distance(&best.cost) < EPS_MERGE =>
            {
                last.0 = Interval::new(last.0.lower(), w[1])?;
            }
            _ => pieces.push((Interval::new(w[0], w[1])?, best.law, best.cost)),
        }
    }

    check_convex(&pieces, stage)?;
    let value = PwqFunction::new(pieces.iter().map(|p| Piece::new(p.0, p.2)).collect())?;
    let policy = PwaFunction::from_pieces(pieces.iter().map(|p| Piece::new(p.0, p.1)).collect())?;
    Ok(DpStage {
        value,
        policy: Some(policy),
        feasible,
    })
}

fn check_convex(pieces: &[(Interval, Affine, Quadratic)], stage: usize) -> Result<()> {
    for p in pieces {
        if p.2.s < -1e-12 {
            return Err(Error::NonConvex { stage, at: p.0.midpoint() });
        }
    }
    for w in pieces.windows(2) {
        let at = w[0].0.upper();
        let left = w[0].2.derivative(at);
        let right = w[1].2.derivative(at);
        if left > right + 1e-7 * left.abs().max(1.0) {
            return Err(Error::NonConvex { stage, at });
        }
    }
    Ok(())
}

/// `Q_N(x, u) = q x^2 + r u^2 + V_{N-1}(a x + b u)`.
///
/// `u` is not checked against `U`; the successor must lie in the domain of
/// `v_prev` (within [`crate::EPS_DOMAIN`]).
pub fn q_eval(spec: &QFunctionSpec, x: f64, u: f64) -> Result<f64> {
    let next = spec.problem.successor(x, u);
    let tail = spec
        .v_prev
        .eval(next)
        .map_err(|_| Error::OutOfDomain { x: next })?;
    Ok(spec.problem.stage_cost(x, u) + tail)
}

/// Builds the Q-function data for `problem.horizon` by solving horizon `N - 1`.
pub fn q_function_spec(problem: &MpcProblem) -> Result<QFunctionSpec> {
    if problem.horizon < 2 {
        return Err(Error::InvalidProblem("Q-function needs horizon >= 2"));
    }
    let prev = solve_value(&problem.with_horizon(problem.horizon - 1))?;
    Ok(QFunctionSpec {
        problem: *problem,
        v_prev: prev.value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-9;

    #[test]
    fn example_horizon_one() {
        let stage = solve_value(&MpcProblem::example(1)).unwrap();
        let expect = [
            (-5.0 / 3.0, -1.0, 11.0, 12.0, 6.0),
            (-1.0, 1.0, 5.0, 0.0, 0.0),
            (1.0, 5.0 / 3.0, 11.0, -12.0, 6.0),
        ];
        let v = &stage.value;
        assert_eq!(v.len(), 3, "{v:?}");
        for (p, e) in v.pieces().iter().zip(expect) {
            assert!((p.region.lower() - e.0).abs() < TOL);
            assert!((p.region.upper() - e.1).abs() < TOL);
            assert!((p.f.s - e.2).abs() < TOL);
            assert!((p.f.l - e.3).abs() < TOL);
            assert!((p.f.c - e.4).abs() < TOL);
        }
        let pol = stage.policy.unwrap();
        assert_eq!(pol.len(), 3);
        assert!((pol.pieces()[0].f.b - 1.0).abs() < TOL && pol.pieces()[0].f.k.abs() < TOL);
        assert!((pol.pieces()[1].f.k + 1.0).abs() < TOL && pol.pieces()[1].f.b.abs() < TOL);
        assert!((pol.pieces()[2].f.b + 1.0).abs() < TOL);
    }

    #[test]
    fn unconstrained_middle_matches_riccati_step() {
        // wide bounds so the unconstrained law is interior near the origin
        let (a, b, q, r, p) = (0.9, 0.5, 2.0, 0.7, 3.0);
        let problem = MpcProblem {
            a,
            b,
            q,
            r,
            p,
            x_set: Interval::new(-100.0, 100.0).unwrap(),
            u_set: Interval::new(-100.0, 100.0).unwrap(),
            terminal: Interval::new(-100.0, 100.0).unwrap(),
            horizon: 1,
        };
        let riccati = q + a * a * p - (a * b * p) * (a * b * p) / (r + b * b * p);
        let v = solve_value(&problem).unwrap().value;
        let mid = v.locate(0.0).unwrap();
        assert!((v.pieces()[mid].f.s - riccati).abs() < 1e-12);
    }

    #[test]
    fn empty_feasible_set() {
        let mut problem = MpcProblem::example(1);
        problem.terminal = Interval::new(9.0, 10.0).unwrap();
        problem.u_set = Interval::new(-0.1, 0.1).unwrap();
        problem.x_set = Interval::new(-10.0, 10.0).unwrap();
        problem.a = 0.1;
        assert_eq!(dp_solve(&problem), Err(Error::Infeasible { stage: 1 }));
    }

    #[test]
    fn q_eval_examples() {
        let spec = q_function_spec(&MpcProblem::example(2)).unwrap();
        assert_eq!(q_eval(&spec, 0.0, 0.0).unwrap(), 0.0);
        assert!((q_eval(&spec, 0.0, 1.0).unwrap() - 6.0).abs() < 1e-12);
        assert!(matches!(q_eval(&spec, 1.0, 1.0), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn roots() {
        let (r, n) = quadratic_roots(Quadratic::new(1.0, 0.0, -4.0));
        assert_eq!(n, 2);
        let mut r = [r[0], r[1]];
        r.sort_by(f64::total_cmp);
        assert_eq!(r, [-2.0, 2.0]);
        // (x - 1)^2 with a slightly negative discriminant is a tangency
        let (r, n) = quadratic_roots(Quadratic::new(1.0, -2.0, 1.0 + 1e-14));
        assert!(n >= 1 && (r[0] - 1.0).abs() < 1e-6);
        assert_eq!(quadratic_roots(Quadratic::new(1.0, 0.0, 1.0)).1, 0);
    }
}
