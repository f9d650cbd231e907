//! Piecewise quadratic and piecewise affine functions on chained intervals.

use alloc::vec::Vec;

use crate::{Error, Interval, Result, EPS_CONT, EPS_DOMAIN};

/// A function that can live on one piece of a piecewise function.
pub trait PieceFn: Copy + core::fmt::Debug + PartialEq {
    fn eval(&self, x: f64) -> f64;

    fn derivative(&self, x: f64) -> f64;

    /// Componentwise coefficient distance in the max norm.
    fn coeff_distance(&self, other: &Self) -> f64;
}

/// `s x^2 + l x + c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadratic {
    pub s: f64,
    pub l: f64,
    pub c: f64,
}

impl Quadratic {
    pub const fn new(s: f64, l: f64, c: f64) -> Self {
        Quadratic { s, l, c }
    }
}

impl PieceFn for Quadratic {
    #[inline]
    fn eval(&self, x: f64) -> f64 {
        (self.s * x + self.l) * x + self.c
    }

    #[inline]
    fn derivative(&self, x: f64) -> f64 {
        2.0 * self.s * x + self.l
    }

    fn coeff_distance(&self, other: &Self) -> f64 {
        (self.s - other.s)
            .abs()
            .max((self.l - other.l).abs())
            .max((self.c - other.c).abs())
    }
}

/// `k x + b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub k: f64,
    pub b: f64,
}

impl Affine {
    pub const fn new(k: f64, b: f64) -> Self {
        Affine { k, b }
    }
}

impl PieceFn for Affine {
    #[inline]
    fn eval(&self, x: f64) -> f64 {
        self.k * x + self.b
    }

    #[inline]
    fn derivative(&self, _x: f64) -> f64 {
        self.k
    }

    fn coeff_distance(&self, other: &Self) -> f64 {
        (self.k - other.k).abs().max((self.b - other.b).abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece<F> {
    pub region: Interval,
    pub f: F,
}

impl<F> Piece<F> {
    pub const fn new(region: Interval, f: F) -> Self {
        Piece { region, f }
    }
}

pub type PwqPiece = Piece<Quadratic>;
pub type PwaPiece = Piece<Affine>;

/// Continuous function on an interval, given piecewise on sorted chained regions.
///
/// Chaining is exact: the upper bound of piece `i` is bitwise equal to the
/// lower bound of piece `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Piecewise<F> {
    pieces: Vec<Piece<F>>,
}

pub type PwqFunction = Piecewise<Quadratic>;
pub type PwaFunction = Piecewise<Affine>;

fn check_chain<F>(pieces: &[Piece<F>]) -> core::result::Result<(), usize> {
    match pieces
        .windows(2)
        .position(|w| w[0].region.upper() != w[1].region.lower())
    {
        Some(i) => Err(i),
        None => Ok(()),
    }
}

impl<F: PieceFn> Piecewise<F> {
    /// Validates chaining and continuity (within [`EPS_CONT`]).
    pub fn new(pieces: Vec<Piece<F>>) -> Result<Self> {
        let pw = Self::from_pieces(pieces)?;
        if let Some((at, jump)) = pw.worst_jump() {
            if jump >= EPS_CONT {
                return Err(Error::Discontinuous { at, jump });
            }
        }
        Ok(pw)
    }

    /// Validates chaining only. Continuity can be inspected with
    /// [`Piecewise::worst_jump`].
    pub fn from_pieces(pieces: Vec<Piece<F>>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::Empty);
        }
        check_chain(&pieces).map_err(|index| Error::ChainBroken { index })?;
        Ok(Piecewise { pieces })
    }

    #[inline]
    pub fn pieces(&self) -> &[Piece<F>] {
        &self.pieces
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn domain(&self) -> Interval {
        let lo = self.pieces[0].region.lower();
        let hi = self.pieces[self.pieces.len() - 1].region.upper();
        Interval::new(lo, hi).expect("chained proper pieces span a proper interval")
    }

    /// Interior breakpoints, ascending.
    pub fn breakpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.pieces[..self.pieces.len() - 1]
            .iter()
            .map(|p| p.region.upper())
    }

    /// Index of the piece containing `x`; at a breakpoint the smaller index wins.
    pub fn locate(&self, x: f64) -> Result<usize> {
        let dom = self.domain();
        if !dom.contains_within(x, EPS_DOMAIN) {
            return Err(Error::OutOfDomain { x });
        }
        let idx = self.pieces.partition_point(|p| p.region.upper() < x);
        Ok(idx.min(self.pieces.len() - 1))
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        self.locate(x).map(|i| self.pieces[i].f.eval(x))
    }

    /// Largest `|left - right|` over the breakpoints, with its location.
    pub fn worst_jump(&self) -> Option<(f64, f64)> {
        self.pieces
            .windows(2)
            .map(|w| {
                let at = w[0].region.upper();
                (at, (w[0].f.eval(at) - w[1].f.eval(at)).abs())
            })
            .fold(None, |acc: Option<(f64, f64)>, cur| match acc {
                Some(best) if best.1 >= cur.1 => Some(best),
                _ => Some(cur),
            })
    }

    /// Merges adjacent pieces whose coefficients differ by less than `eps`
    /// componentwise. The merged piece keeps the coefficients of its leftmost
    /// constituent, which makes the operation idempotent.
    pub fn canonicalize(&self, eps: f64) -> Self {
        let mut out: Vec<Piece<F>> = Vec::with_capacity(self.pieces.len());
        for p in &self.pieces {
            match out.last_mut() {
                Some(last) if last.f.coeff_distance(&p.f) < eps => {
                    last.region = Interval::new(last.region.lower(), p.region.upper())
                        .expect("union of chained proper intervals");
                }
                _ => out.push(*p),
            }
        }
        Piecewise { pieces: out }
    }

    /// Same function, with every piece mapped through `g`.
    pub fn map<G: PieceFn>(&self, mut g: impl FnMut(&Piece<F>) -> G) -> Piecewise<G> {
        Piecewise {
            pieces: self
                .pieces
                .iter()
                .map(|p| Piece::new(p.region, g(p)))
                .collect(),
        }
    }
}

/// Canonicalizes a raw piece list, reporting gaps or overlaps as
/// [`Error::ChainBroken`].
pub fn canonicalize<F: PieceFn>(pieces: &[Piece<F>], eps: f64) -> Result<Piecewise<F>> {
    Ok(Piecewise::from_pieces(pieces.to_vec())?.canonicalize(eps))
}
