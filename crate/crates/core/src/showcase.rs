//! A two-dimensional piecewise quadratic function on four triangles around
//! the origin, together with a hand-derived width-8 network on `h_v(x)` whose
//! residual `V - Phi` is piecewise affine.

use alloc::vec;
use alloc::vec::Vec;

use crate::verify::{self, Report, StencilRegion};
use crate::{Error, FeatureMap, Layer, Matrix, ReluNetwork, Result};

/// Convex polygon `{x : normal . x <= offset}` for every halfspace.
#[derive(Debug, Clone, PartialEq)]
pub struct Region2D {
    pub halfspaces: Vec<([f64; 2], f64)>,
}

impl Region2D {
    pub fn contains_within(&self, x: [f64; 2], slack: f64) -> bool {
        self.halfspaces
            .iter()
            .all(|(n, o)| n[0] * x[0] + n[1] * x[1] <= o + slack)
    }

    /// Minimum distance-like margin `offset - normal . x` over the halfspaces.
    pub fn margin(&self, x: [f64; 2]) -> f64 {
        self.halfspaces
            .iter()
            .map(|(n, o)| o - n[0] * x[0] - n[1] * x[1])
            .fold(f64::INFINITY, f64::min)
    }

    /// Vertices from pairwise boundary intersections.
    pub fn vertices(&self) -> Vec<[f64; 2]> {
        let hs = &self.halfspaces;
        let mut out = Vec::new();
        for i in 0..hs.len() {
            for j in i + 1..hs.len() {
                let ([a, b], e) = hs[i];
                let ([c, d], f) = hs[j];
                let det = a * d - b * c;
                if det.abs() < 1e-14 {
                    continue;
                }
                let v = [(e * d - b * f) / det, (a * f - e * c) / det];
                if self.contains_within(v, 1e-12) {
                    out.push(v);
                }
            }
        }
        out
    }
}

impl StencilRegion for Region2D {
    fn dim(&self) -> usize {
        2
    }

    fn stencil_centers(&self, step: f64, per_axis: usize) -> Option<Vec<Vec<f64>>> {
        let verts = self.vertices();
        if verts.is_empty() {
            return None;
        }
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for v in &verts {
            for k in 0..2 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        let per_axis = per_axis.max(2);
        let mut out = Vec::new();
        for i in 0..per_axis {
            for j in 0..per_axis {
                let p = [
                    lo[0] + (hi[0] - lo[0]) * i as f64 / (per_axis - 1) as f64,
                    lo[1] + (hi[1] - lo[1]) * j as f64 / (per_axis - 1) as f64,
                ];
                // every stencil point p +- step d with d in {-1,0,1}^2 stays inside
                let ok = self.halfspaces.iter().all(|(n, o)| {
                    n[0] * p[0] + n[1] * p[1] + 1.5 * step * (n[0].abs() + n[1].abs()) < *o
                });
                if ok {
                    out.push(p.to_vec());
                }
            }
        }
        (!out.is_empty()).then_some(out)
    }
}

/// The four triangles, in order.
pub fn regions() -> [Region2D; 4] {
    let r = |h: [([f64; 2], f64); 3]| Region2D {
        halfspaces: h.to_vec(),
    };
    [
        r([([-1.0, 0.0], 0.0), ([0.0, -1.0], 0.0), ([1.0, 1.0], 1.0)]),
        r([([1.0, 0.0], 0.0), ([0.0, -1.0], 0.0), ([-1.0, 1.0], 1.0)]),
        r([([1.0, 0.0], 0.0), ([0.0, 1.0], 0.0), ([-1.0, -1.0], 1.0)]),
        r([([-1.0, 0.0], 0.0), ([0.0, 1.0], 0.0), ([1.0, -1.0], 1.0)]),
    ]
}

/// `(c1, c2)` with `V = c1 x1^2 + c2 x2^2` on each region.
pub const PIECE_COEFFS: [(f64, f64); 4] = [(1.0, 1.0), (2.0, 1.0), (2.0, 2.0), (1.0, 2.0)];

/// Hidden neurons active on each region (0-based).
pub const ACTIVE_SETS: [[usize; 4]; 4] = [[4, 5, 6, 7], [0, 2, 4, 6], [0, 1, 2, 3], [1, 3, 5, 7]];

const MEMBERSHIP_SLACK: f64 = 1e-12;

/// Index of the first region containing `x`.
pub fn locate(x: [f64; 2]) -> Option<usize> {
    regions()
        .iter()
        .position(|r| r.contains_within(x, MEMBERSHIP_SLACK))
}

pub fn fictive_v(x: [f64; 2]) -> Result<f64> {
    let i = locate(x).ok_or(Error::OutOfDomain { x: x[0] })?;
    let (c1, c2) = PIECE_COEFFS[i];
    Ok(c1 * x[0] * x[0] + c2 * x[1] * x[1])
}

/// First-layer rows over `(x1, x2, x1^2, x1 x2, x2^2)`.
pub const SHOWCASE_W1: [[f64; 5]; 8] = [
    [-1.0, 0.0, -1.0, 1.0, 0.0],
    [0.0, -1.0, 0.0, -1.0, -1.0],
    [-1.0, 0.0, -1.0, -1.0, 0.0],
    [0.0, -1.0, 0.0, 1.0, -1.0],
    [0.0, 1.0, 0.0, -1.0, -1.0],
    [1.0, 0.0, -1.0, -1.0, 0.0],
    [0.0, 1.0, 0.0, 1.0, -1.0],
    [1.0, 0.0, -1.0, 1.0, 0.0],
];

pub const SHOWCASE_W2: [f64; 8] = [-1.0, -1.0, -1.0, -1.0, -0.5, -0.5, -0.5, -0.5];

pub fn build_showcase_net() -> ReluNetwork {
    let w1 = Matrix::from_rows(&SHOWCASE_W1).expect("8x5");
    let w2 = Matrix::from_row_major(1, 8, SHOWCASE_W2.to_vec()).expect("1x8");
    ReluNetwork::new(
        FeatureMap::Hv { n: 2 },
        vec![
            Layer::new(w1, vec![0.0; 8]).expect("8 biases"),
            Layer::new(w2, vec![0.0]).expect("1 bias"),
        ],
    )
    .expect("8x5 layer on a 5-wide feature map")
}

/// `V - Phi`, `None` outside the four regions.
pub fn residual(net: &ReluNetwork, x: [f64; 2]) -> Option<f64> {
    let v = fictive_v(x).ok()?;
    Some(v - net.forward_scalar(&x).ok()?)
}

/// Quadratic coefficients `(x1^2, x1 x2, x2^2)` that the active neurons of
/// `region` contribute to `Phi`.
pub fn active_quadratic_part(net: &ReluNetwork, region: usize) -> [f64; 3] {
    let [l1, l2] = net.layers() else {
        unreachable!("showcase net has one hidden layer")
    };
    let mut q = [0.0; 3];
    for &i in &ACTIVE_SETS[region] {
        let w = l2.w[(0, i)];
        for (k, qk) in q.iter_mut().enumerate() {
            *qk += w * l1.w[(i, 2 + k)];
        }
    }
    q
}

fn interior_samples(region: &Region2D, per_axis: usize, margin: f64) -> Vec<[f64; 2]> {
    let mut out = Vec::new();
    for i in 0..per_axis {
        for j in 0..per_axis {
            let p = [
                -1.0 + 2.0 * (i as f64 + 0.5) / per_axis as f64,
                -1.0 + 2.0 * (j as f64 + 0.5) / per_axis as f64,
            ];
            if region.margin(p) > margin {
                out.push(p);
            }
        }
    }
    out
}

/// Runs the residual second-difference test, the activation pattern check,
/// the quadratic cancellation check and a continuity check on the shared
/// region boundaries.
pub fn verify_showcase() -> Vec<Report> {
    const TOL: f64 = 1e-9;
    let net = build_showcase_net();
    let regs = regions();
    let mut reports = Vec::new();

    let mut pwa = verify::check_residual_pwa(
        |p: &[f64]| residual(&net, [p[0], p[1]]),
        &regs,
        verify::DEFAULT_STEP,
        TOL,
    )
    .expect("showcase regions are wide enough for the default step");
    pwa.check = "showcase_residual_pwa".into();
    reports.push(pwa);

    // sign pattern of the pre-activations at interior samples
    let mut act = empty_report("showcase_activation", 0.5);
    for (r, region) in regs.iter().enumerate() {
        for p in interior_samples(region, 64, 1e-6) {
            let z = net.first_preactivations(&p).expect("2-D input");
            let active: Vec<usize> = (0..8).filter(|&i| z[i] > 0.0).collect();
            let mismatch = if active.len() == 4 && active == ACTIVE_SETS[r] { 0.0 } else { 1.0 };
            record(&mut act, mismatch, &p);
        }
    }
    act.pass = act.max_error < act.tol;
    act.detail = "four ReLUs active on every region, matching the expected sets".into();
    reports.push(act);

    let mut cancel = empty_report("showcase_quadratic_cancellation", TOL);
    for (r, &(c1, c2)) in PIECE_COEFFS.iter().enumerate() {
        let q = active_quadratic_part(&net, r);
        let err = (q[0] - c1).abs().max(q[1].abs()).max((q[2] - c2).abs());
        record(&mut cancel, err, &[r as f64]);
    }
    cancel.pass = cancel.max_error < cancel.tol;
    reports.push(cancel);

    // V - Phi from both sides of every shared edge
    let mut cont = empty_report("showcase_continuity", TOL);
    let edges: [(usize, usize, [f64; 2]); 4] = [
        (0, 1, [0.0, 1.0]),
        (1, 2, [-1.0, 0.0]),
        (2, 3, [0.0, -1.0]),
        (3, 0, [1.0, 0.0]),
    ];
    for (i, j, end) in edges {
        for k in 0..=200 {
            let t = k as f64 / 200.0;
            let p = [end[0] * t, end[1] * t];
            let vi = PIECE_COEFFS[i].0 * p[0] * p[0] + PIECE_COEFFS[i].1 * p[1] * p[1];
            let vj = PIECE_COEFFS[j].0 * p[0] * p[0] + PIECE_COEFFS[j].1 * p[1] * p[1];
            record(&mut cont, (vi - vj).abs(), &p);
        }
    }
    cont.pass = cont.max_error < cont.tol;
    reports.push(cont);
    reports
}

fn empty_report(check: &str, tol: f64) -> Report {
    Report {
        check: check.into(),
        max_error: 0.0,
        location: Vec::new(),
        tol,
        samples: 0,
        pass: true,
        detail: Default::default(),
    }
}

fn record(report: &mut Report, err: f64, at: &[f64]) {
    report.samples += 1;
    if err > report.max_error || report.location.is_empty() {
        report.max_error = report.max_error.max(err);
        report.location = at.to_vec();
    }
}

/// `(x1, x2, V, Phi, V - Phi)` on a uniform grid over `[-1, 1]^2`, keeping
/// points inside the four regions.
pub fn samples(per_axis: usize) -> Vec<[f64; 5]> {
    let net = build_showcase_net();
    let per_axis = per_axis.max(2);
    let mut out = Vec::new();
    for i in 0..per_axis {
        for j in 0..per_axis {
            let x = [
                -1.0 + 2.0 * i as f64 / (per_axis - 1) as f64,
                -1.0 + 2.0 * j as f64 / (per_axis - 1) as f64,
            ];
            if let Ok(v) = fictive_v(x) {
                let phi = net.forward_scalar(&x).expect("2-D input");
                out.push([x[0], x[1], v, phi, v - phi]);
            }
        }
    }
    out
}
