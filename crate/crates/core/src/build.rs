//! Mechanical constructions of exact one-hidden-layer ReLU networks.
//!
//! All builders sort the pieces by lower bound before use, so the emitted
//! parameter rows follow the region order left to right.

use alloc::vec;
use alloc::vec::Vec;

use crate::eval::upper_pairs;
use crate::piecewise::Piece;
use crate::{
    Affine, Error, FeatureMap, Layer, Matrix, MpcProblem, PwaFunction, PwaPiece, PwqPiece,
    ReluNetwork, Result,
};

fn ordered<F: Copy>(pieces: &[Piece<F>]) -> Result<Vec<Piece<F>>> {
    if pieces.is_empty() {
        return Err(Error::Empty);
    }
    let mut sorted = pieces.to_vec();
    sorted.sort_by(|a, b| a.region.lower().total_cmp(&b.region.lower()));
    if let Some(index) = sorted
        .windows(2)
        .position(|w| w[0].region.upper() != w[1].region.lower())
    {
        return Err(Error::NotChained { index });
    }
    Ok(sorted)
}

/// Hidden layer of the PWA construction: one left-facing ReLU, then one
/// right-facing ReLU per interior breakpoint. `width` is the feature width and
/// `x` sits in column 0.
fn pwa_layers(pieces: &[PwaPiece], width: usize) -> Result<(Layer, Layer)> {
    let s = pieces.len();
    let x1 = pieces[0].region.upper();
    let mut w1 = Matrix::zeros(s, width);
    let mut a1 = Vec::with_capacity(s);
    let mut w2 = Vec::with_capacity(s);
    w1[(0, 0)] = -1.0;
    a1.push(x1);
    w2.push(-pieces[0].f.k);
    for i in 1..s {
        w1[(i, 0)] = 1.0;
        a1.push(-pieces[i - 1].region.upper());
        w2.push(if i == 1 {
            pieces[1].f.k
        } else {
            pieces[i].f.k - pieces[i - 1].f.k
        });
    }
    let k1 = pieces[0].f.k;
    let b1 = pieces[0].f.b;
    Ok((
        Layer::new(w1, a1)?,
        Layer::new(Matrix::from_row_major(1, s, w2)?, vec![k1 * x1 + b1])?,
    ))
}

/// Exact network for a continuous PWA policy on chained intervals, input `x`.
pub fn build_policy_net(policy: &[PwaPiece]) -> Result<ReluNetwork> {
    let pieces = ordered(policy)?;
    let (l1, l2) = pwa_layers(&pieces, 1)?;
    ReluNetwork::new(FeatureMap::Identity { dim: 1 }, vec![l1, l2])
}

/// Network on `h_v(x) = (x, x^2)` carrying the quadratic terms: neuron `i`
/// computes `max(0, (x - lo_i)(hi_i - x))`, positive exactly on the interior
/// of region `i`, and is weighted by `-S_i`.
pub fn build_quadratic_net(pwq: &[PwqPiece]) -> Result<ReluNetwork> {
    let pieces = ordered(pwq)?;
    let s = pieces.len();
    let mut w1 = Matrix::zeros(s, 2);
    let mut a1 = Vec::with_capacity(s);
    for (i, p) in pieces.iter().enumerate() {
        let (lo, hi) = (p.region.lower(), p.region.upper());
        w1[(i, 0)] = lo + hi;
        w1[(i, 1)] = -1.0;
        a1.push(-lo * hi);
    }
    let w2 = Matrix::from_row_major(1, s, pieces.iter().map(|p| -p.f.s).collect())?;
    ReluNetwork::new(
        FeatureMap::Hv { n: 1 },
        vec![Layer::new(w1, a1)?, Layer::new(w2, vec![0.0])?],
    )
}

/// `V - Phi_quadratic` as a PWA function: slope `l + S (lo + hi)`, offset
/// `c - S lo hi` on each region.
pub fn residual_pwa(pwq: &[PwqPiece]) -> Result<PwaFunction> {
    let pieces = ordered(pwq)?;
    PwaFunction::from_pieces(
        pieces
            .iter()
            .map(|p| {
                let (lo, hi) = (p.region.lower(), p.region.upper());
                Piece::new(
                    p.region,
                    Affine::new(p.f.l + p.f.s * (lo + hi), p.f.c - p.f.s * lo * hi),
                )
            })
            .collect(),
    )
}

/// The PWA residual as a network on `h_v(x)` (the `x^2` column is unused).
pub fn build_residual_net(pwq: &[PwqPiece]) -> Result<ReluNetwork> {
    let residual = residual_pwa(pwq)?;
    let (l1, l2) = pwa_layers(residual.pieces(), 2)?;
    ReluNetwork::new(FeatureMap::Hv { n: 1 }, vec![l1, l2])
}

/// Runs two one-hidden-layer scalar networks side by side and sums them.
pub fn stack_parallel(first: &ReluNetwork, second: &ReluNetwork) -> Result<ReluNetwork> {
    if first.feature_map() != second.feature_map() {
        return Err(Error::FeatureMapMismatch {
            expected: first.feature_map().tag(),
            found: second.feature_map().tag(),
        });
    }
    let ([f1, f2], [s1, s2]) = match (first.layers(), second.layers()) {
        ([f1, f2], [s1, s2]) => ([f1, f2], [s1, s2]),
        _ => return Err(Error::DimensionMismatch("stacking needs one hidden layer")),
    };
    let mut a1 = f1.a.clone();
    a1.extend_from_slice(&s1.a);
    let a2: Vec<f64> = f2.a.iter().zip(&s2.a).map(|(x, y)| x + y).collect();
    if f2.a.len() != s2.a.len() {
        return Err(Error::DimensionMismatch("output widths differ"));
    }
    ReluNetwork::new(
        first.feature_map(),
        vec![
            Layer::new(f1.w.vstack(&s1.w)?, a1)?,
            Layer::new(f2.w.hstack(&s2.w)?, a2)?,
        ],
    )
}

/// Exact network for a PWQ value function: quadratic block stacked with the
/// residual block, hidden width `2s`.
pub fn build_value_net(pwq: &[PwqPiece]) -> Result<ReluNetwork> {
    stack_parallel(&build_quadratic_net(pwq)?, &build_residual_net(pwq)?)
}

/// Linear map with `h_q(x, u) = L h'_q(x, u)`, where
/// `h_q = (h_v(A x + B u), x'Qx + u'Ru)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LMatrix {
    pub entries: Matrix,
    pub n: usize,
    pub m: usize,
}

impl LMatrix {
    /// Column of the monomial `z_i z_j` (`i <= j`) of `z = (x, u)` in `h'_q`.
    fn quad_col(n: usize, m: usize, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        let wx = n + n * (n + 1) / 2;
        let tri = |d: usize, a: usize, b: usize| a * d - a * (a + 1) / 2 + b;
        if j < n {
            n + tri(n, i, j)
        } else if i >= n {
            wx + m + tri(m, i - n, j - n)
        } else {
            wx + m + m * (m + 1) / 2 + i * m + (j - n)
        }
    }

    /// Column of the linear monomial `z_i`.
    fn lin_col(n: usize, i: usize) -> usize {
        if i < n {
            i
        } else {
            n + n * (n + 1) / 2 + (i - n)
        }
    }
}

pub fn build_l_matrix(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix) -> Result<LMatrix> {
    let n = a.rows();
    let m = b.cols();
    if n == 0 || m == 0 {
        return Err(Error::DimensionMismatch("empty plant"));
    }
    if a.cols() != n || b.rows() != n {
        return Err(Error::DimensionMismatch("A must be n x n and B n x m"));
    }
    if q.rows() != n || q.cols() != n || r.rows() != m || r.cols() != m {
        return Err(Error::DimensionMismatch("Q must be n x n and R m x m"));
    }
    let w0 = n * (n + 3) / 2 + 1;
    let w0p = (n + m) * (n + m + 3) / 2;
    let mut l = Matrix::zeros(w0, w0p);

    // successor y = M z with M = [A B]
    let mrow = |i: usize, k: usize| if k < n { a[(i, k)] } else { b[(i, k - n)] };

    for i in 0..n {
        for k in 0..n + m {
            l[(i, LMatrix::lin_col(n, k))] += mrow(i, k);
        }
    }
    for (row, (i, j)) in upper_pairs(n).enumerate() {
        for k in 0..n + m {
            for t in 0..n + m {
                let coeff = mrow(i, k) * mrow(j, t);
                if coeff != 0.0 {
                    l[(n + row, LMatrix::quad_col(n, m, k, t))] += coeff;
                }
            }
        }
    }
    let last = w0 - 1;
    for i in 0..n {
        for j in 0..n {
            l[(last, LMatrix::quad_col(n, m, i, j))] += q[(i, j)];
        }
    }
    for i in 0..m {
        for j in 0..m {
            l[(last, LMatrix::quad_col(n, m, n + i, n + j))] += r[(i, j)];
        }
    }
    Ok(LMatrix { entries: l, n, m })
}

/// [`build_l_matrix`] for a scalar problem.
pub fn l_matrix_for(problem: &MpcProblem) -> LMatrix {
    build_l_matrix(
        &Matrix::scalar(problem.a),
        &Matrix::scalar(problem.b),
        &Matrix::scalar(problem.q),
        &Matrix::scalar(problem.r),
    )
    .expect("scalar data is dimensionally consistent")
}

/// Turns a network on `h_v` for `V_{N-1}` into one on `h'_q` for `Q_N` by
/// adding a pass-through neuron for the stage cost and folding `L` into the
/// first layer.
pub fn build_q_net(value_net_prev: &ReluNetwork, l: &LMatrix) -> Result<ReluNetwork> {
    match value_net_prev.feature_map() {
        FeatureMap::Hv { n } if n == l.n => {}
        other => {
            return Err(Error::FeatureMapMismatch {
                expected: "hv",
                found: other.tag(),
            })
        }
    }
    let [l1, l2] = value_net_prev.layers() else {
        return Err(Error::DimensionMismatch("value network needs one hidden layer"));
    };
    if l2.out_dim() != 1 {
        return Err(Error::DimensionMismatch("value network must be scalar"));
    }
    let w1 = l1.w.block_diag(&Matrix::scalar(1.0)).matmul(&l.entries)?;
    let mut a1 = l1.a.clone();
    a1.push(0.0);
    let w2 = l2.w.hstack(&Matrix::scalar(1.0))?;
    ReluNetwork::new(
        FeatureMap::HqPrime { n: l.n, m: l.m },
        vec![Layer::new(w1, a1)?, Layer::new(w2, l2.a.clone())?],
    )
}

/// The residual block evaluated at the successor state, on `h'_q`.
pub fn build_successor_residual_net(v_prev: &[PwqPiece], l: &LMatrix) -> Result<ReluNetwork> {
    let residual = build_residual_net(v_prev)?;
    let [r1, r2] = residual.layers() else {
        unreachable!("residual net has one hidden layer")
    };
    // picks h_v(A x + B u) out of h_q
    let wv = r1.w.cols();
    let mut select = Matrix::zeros(wv, wv + 1);
    for i in 0..wv {
        select[(i, i)] = 1.0;
    }
    let w1 = r1.w.matmul(&select)?.matmul(&l.entries)?;
    ReluNetwork::new(
        FeatureMap::HqPrime { n: l.n, m: l.m },
        vec![Layer::new(w1, r1.a.clone())?, r2.clone()],
    )
}

/// Exact network for `Q_N` of a scalar problem, hidden width `2s' + 1`.
pub fn build_full_q_net(problem: &MpcProblem, v_prev: &[PwqPiece]) -> Result<ReluNetwork> {
    let l = l_matrix_for(problem);
    let qnet = build_q_net(&build_quadratic_net(v_prev)?, &l)?;
    stack_parallel(&qnet, &build_successor_residual_net(v_prev, &l)?)
}
