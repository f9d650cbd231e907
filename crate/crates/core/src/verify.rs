//! Certification checks. Failures are report entries, not errors.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::piecewise::PieceFn;
use crate::{
    mpc, Error, Interval, PwaFunction, PwqFunction, QFunctionSpec, ReluNetwork, Result, EPS_CONT,
};

/// Breakpoints are sampled this far inside each adjacent region.
pub const BREAKPOINT_SHIFT: f64 = 1e-12;

/// Defaults for [`check_residual_pwa`].
pub const DEFAULT_STEP: f64 = 1e-3;
pub const DEFAULT_SECOND_DIFF_TOL: f64 = 1e-8;

/// Stencil centers per axis and region.
const CENTERS_PER_AXIS: usize = 101;

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub check: String,
    pub max_error: f64,
    /// Where `max_error` was attained.
    pub location: Vec<f64>,
    pub tol: f64,
    pub samples: usize,
    pub pass: bool,
    pub detail: String,
}

impl Report {
    fn new(check: &str, tol: f64) -> Self {
        Report {
            check: check.into(),
            max_error: 0.0,
            location: Vec::new(),
            tol,
            samples: 0,
            pass: true,
            detail: String::new(),
        }
    }

    fn record(&mut self, err: f64, at: &[f64]) {
        self.samples += 1;
        // NaN counts as worst
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(err <= self.max_error) {
            self.max_error = err;
            self.location = at.to_vec();
        }
    }

    fn finish(mut self) -> Self {
        self.pass = self.max_error < self.tol;
        self
    }
}

/// Reference function a network is compared against.
#[derive(Debug, Clone, Copy)]
pub enum Reference<'a> {
    Value(&'a PwqFunction),
    Policy(&'a PwaFunction),
    QFunction(&'a QFunctionSpec),
}

fn grid_1d(domain: Interval, breakpoints: impl Iterator<Item = f64>, density: usize) -> Vec<f64> {
    let mut xs: Vec<f64> = domain.linspace(density.max(2)).collect();
    xs.push(domain.lower() + BREAKPOINT_SHIFT);
    xs.push(domain.upper() - BREAKPOINT_SHIFT);
    for b in breakpoints {
        xs.extend([b - BREAKPOINT_SHIFT, b, b + BREAKPOINT_SHIFT]);
    }
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

/// Max absolute deviation between a scalar network and its reference on a
/// grid containing every breakpoint (and points just inside each side of it)
/// plus `grid_density` uniform points per axis.
pub fn check_exact(net: &ReluNetwork, reference: Reference<'_>, grid_density: usize, tol: f64) -> Report {
    let mut report = Report::new("exact", tol);
    let probe = |raw: &[f64], want: f64, report: &mut Report| match net.forward(raw) {
        Ok(y) if y.len() == 1 => report.record((y[0] - want).abs(), raw),
        _ => report.record(f64::INFINITY, raw),
    };
    match reference {
        Reference::Value(v) => {
            for x in grid_1d(v.domain(), v.breakpoints(), grid_density) {
                if let Ok(want) = v.eval(x) {
                    probe(&[x], want, &mut report);
                }
            }
        }
        Reference::Policy(p) => {
            for x in grid_1d(p.domain(), p.breakpoints(), grid_density) {
                if let Ok(want) = p.eval(x) {
                    probe(&[x], want, &mut report);
                }
            }
        }
        Reference::QFunction(spec) => {
            for (x, u) in q_grid(spec, grid_density) {
                if let Ok(want) = mpc::q_eval(spec, x, u) {
                    probe(&[x, u], want, &mut report);
                }
            }
        }
    }
    if report.samples == 0 {
        report.max_error = f64::INFINITY;
        report.detail = "no reference points".into();
    }
    report.finish()
}

/// Feasible `(x, u)` pairs: a uniform grid over the states that can reach
/// `dom(v_prev)` times `U`, plus, for every `u`, the states whose successor
/// sits on (or just beside) a breakpoint or a domain bound of `v_prev`.
pub fn q_grid(spec: &QFunctionSpec, density: usize) -> Vec<(f64, f64)> {
    let pr = &spec.problem;
    let dom = spec.v_prev.domain();
    let Some(xs) = mpc::predecessor_set(pr, &dom) else {
        return Vec::new();
    };
    let us: Vec<f64> = pr.u_set.linspace(density.max(2)).collect();
    let mut edges: Vec<f64> = vec![dom.lower(), dom.upper()];
    edges.extend(spec.v_prev.breakpoints());
    let mut out = Vec::new();
    for &u in &us {
        let mut col: Vec<f64> = xs.linspace(density.max(2)).collect();
        if pr.a != 0.0 {
            for e in &edges {
                let x = (e - pr.b * u) / pr.a;
                col.extend([x - BREAKPOINT_SHIFT, x, x + BREAKPOINT_SHIFT]);
            }
        }
        for x in col {
            let next = pr.successor(x, u);
            if pr.x_set.contains(x) && dom.contains(next) {
                out.push((x, u));
            }
        }
    }
    out
}

/// A region on which second differences can be sampled.
pub trait StencilRegion {
    fn dim(&self) -> usize;

    /// Centers `p` such that `p +- step * d` stays strictly inside the region
    /// for every stencil direction `d` (entries in `{-1, 0, 1}`). `None` if
    /// the region is too narrow for `step`.
    fn stencil_centers(&self, step: f64, per_axis: usize) -> Option<Vec<Vec<f64>>>;
}

impl StencilRegion for Interval {
    fn dim(&self) -> usize {
        1
    }

    fn stencil_centers(&self, step: f64, per_axis: usize) -> Option<Vec<Vec<f64>>> {
        if step > self.width() / 4.0 {
            return None;
        }
        let inner = Interval::new(self.lower() + 1.5 * step, self.upper() - 1.5 * step).ok()?;
        Some(inner.linspace(per_axis).map(|x| vec![x]).collect())
    }
}

fn directions(dim: usize) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![1.0]],
        2 => vec![
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 1.0],
            vec![1.0, -1.0],
        ],
        _ => (0..dim)
            .map(|i| {
                let mut d = vec![0.0; dim];
                d[i] = 1.0;
                d
            })
            .collect(),
    }
}

/// Second central differences `f(p + h d) - 2 f(p) + f(p - h d)` along the
/// axes (and both diagonals in 2-D) at stencil centers inside every region.
/// An affine function gives zero up to rounding; a quadratic with curvature
/// `S` gives about `2 S h^2`.
pub fn check_residual_pwa<R, F>(residual: F, regions: &[R], step: f64, tol: f64) -> Result<Report>
where
    R: StencilRegion,
    F: Fn(&[f64]) -> Option<f64>,
{
    let mut report = Report::new("residual_pwa", tol);
    for (index, region) in regions.iter().enumerate() {
        let centers = region
            .stencil_centers(step, CENTERS_PER_AXIS)
            .ok_or(Error::RegionTooNarrow { index, step })?;
        let dirs = directions(region.dim());
        for p in &centers {
            let Some(f0) = residual(p) else {
                report.record(f64::INFINITY, p);
                continue;
            };
            for d in &dirs {
                let plus: Vec<f64> = p.iter().zip(d).map(|(pi, di)| pi + step * di).collect();
                let minus: Vec<f64> = p.iter().zip(d).map(|(pi, di)| pi - step * di).collect();
                let err = match (residual(&plus), residual(&minus)) {
                    (Some(fp), Some(fm)) => (fp - 2.0 * f0 + fm).abs(),
                    _ => f64::INFINITY,
                };
                report.record(err, p);
            }
        }
    }
    Ok(report.finish())
}

/// Continuity at breakpoints, nonnegative curvature and nondecreasing slopes.
pub fn check_value_function(pwq: &PwqFunction) -> Report {
    const CURVATURE_TOL: f64 = 1e-12;
    const SLOPE_TOL: f64 = 1e-9;
    let mut report = Report::new("value_function", EPS_CONT);
    let mut problems: Vec<String> = Vec::new();
    let mut worst = (0.0f64, Vec::new());
    let note = |err: f64, at: f64, worst: &mut (f64, Vec<f64>)| {
        if err > worst.0 {
            *worst = (err, vec![at]);
        }
    };

    for w in pwq.pieces().windows(2) {
        let at = w[0].region.upper();
        let jump = (w[0].f.eval(at) - w[1].f.eval(at)).abs();
        report.samples += 1;
        note(jump, at, &mut worst);
        if jump >= EPS_CONT {
            problems.push(format!("discontinuous at {at} (jump {jump:e})"));
        }
        let (left, right) = (w[0].f.derivative(at), w[1].f.derivative(at));
        let drop = left - right;
        if drop > SLOPE_TOL * left.abs().max(right.abs()).max(1.0) {
            note(drop, at, &mut worst);
            problems.push(format!("slope decreases by {drop:e} at {at}"));
        }
    }
    for p in pwq.pieces() {
        report.samples += 1;
        if p.f.s < -CURVATURE_TOL {
            note(-p.f.s, p.region.midpoint(), &mut worst);
            problems.push(format!(
                "negative curvature {} on [{}, {}]",
                p.f.s,
                p.region.lower(),
                p.region.upper()
            ));
        }
    }
    report.max_error = worst.0;
    report.location = worst.1;
    report.pass = problems.is_empty();
    report.detail = problems.join("; ");
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::build;
    use crate::piecewise::Piece;
    use crate::{Interval, Quadratic};

    fn iv(a: f64, b: f64) -> Interval {
        Interval::new(a, b).unwrap()
    }

    #[test]
    fn value_function_failures() {
        let concave = PwqFunction::from_pieces(vec![
            Piece::new(iv(0.0, 1.0), Quadratic::new(1.0, 0.0, 0.0)),
            Piece::new(iv(1.0, 2.0), Quadratic::new(-1.0, 4.0, -2.0)),
        ])
        .unwrap();
        let r = check_value_function(&concave);
        assert!(!r.pass);
        assert!(r.detail.contains("curvature"));

        let jump = PwqFunction::from_pieces(vec![
            Piece::new(iv(0.0, 1.0), Quadratic::new(1.0, 0.0, 0.0)),
            Piece::new(iv(1.0, 2.0), Quadratic::new(1.0, 0.0, 0.5)),
        ])
        .unwrap();
        let r = check_value_function(&jump);
        assert!(!r.pass);
        assert!(r.detail.contains("discontinuous"));
    }

    #[test]
    fn quadratic_fails_second_difference() {
        let s = 5.0;
        let region = iv(-1.0, 1.0);
        let r = check_residual_pwa(|p| Some(s * p[0] * p[0]), &[region], DEFAULT_STEP, DEFAULT_SECOND_DIFF_TOL).unwrap();
        assert!(!r.pass);
        assert!((r.max_error - 2.0 * s * DEFAULT_STEP * DEFAULT_STEP).abs() < 1e-9);
    }

    #[test]
    fn narrow_region_is_reported() {
        let r = check_residual_pwa(|p| Some(p[0]), &[iv(0.0, 1e-3)], DEFAULT_STEP, 1e-8);
        assert_eq!(r, Err(Error::RegionTooNarrow { index: 0, step: DEFAULT_STEP }));
    }

    #[test]
    fn perturbed_network_fails() {
        let v = PwqFunction::new(vec![
            Piece::new(iv(-1.0, 0.5), Quadratic::new(2.0, 0.0, 0.0)),
            Piece::new(iv(0.5, 2.0), Quadratic::new(4.0, -2.0, 0.5)),
        ])
        .unwrap();
        let net = build::build_value_net(v.pieces()).unwrap();
        assert!(check_exact(&net, Reference::Value(&v), 500, 1e-9).pass);

        let mut bad = net.clone();
        bad.layers_mut()[1].w.as_mut_slice()[0] += 1e-3;
        let r = check_exact(&bad, Reference::Value(&v), 500, 1e-9);
        assert!(!r.pass);
        assert!(r.max_error >= 1e-4);
    }
}
