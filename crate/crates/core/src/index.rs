//! Lattice coordinates, boxes of sites and summation rectangles.

use std::fmt;
use std::ops::{Add, Sub};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{check_dim, Error, Result};

/// A point of the integer lattice `Z^d`.
///
/// The derived `Ord` is lexicographic; the probabilistic order is the
/// componentwise one exposed through [`MultiIndex::leq`].
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "Vec<i64>", into = "Vec<i64>")]
pub struct MultiIndex(SmallVec<[i64; 4]>);

impl MultiIndex {
    pub fn new(coords: impl IntoIterator<Item = i64>) -> Self {
        MultiIndex(coords.into_iter().collect())
    }

    pub fn zeros(dim: usize) -> Self {
        MultiIndex(SmallVec::from_elem(0, dim))
    }

    pub fn ones(dim: usize) -> Self {
        MultiIndex(SmallVec::from_elem(1, dim))
    }

    pub fn splat(dim: usize, value: i64) -> Self {
        MultiIndex(SmallVec::from_elem(value, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn get(&self, axis: usize) -> i64 {
        self.0[axis]
    }

    /// Componentwise `self <= other`.
    pub fn leq(&self, other: &MultiIndex) -> bool {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(other.0.iter()).all(|(a, b)| a <= b)
    }

    /// Componentwise minimum.
    pub fn meet(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(other.0.iter()).map(|(a, b)| *a.min(b)).collect())
    }

    /// Componentwise maximum.
    pub fn join(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(other.0.iter()).map(|(a, b)| *a.max(b)).collect())
    }

    pub fn with_coord(&self, axis: usize, value: i64) -> MultiIndex {
        let mut out = self.clone();
        out.0[axis] = value;
        out
    }

    pub fn checked_add(&self, other: &MultiIndex) -> Result<MultiIndex> {
        check_dim(self.dim(), other.dim())?;
        Ok(self + other)
    }

    /// Product of the coordinates; the cell count `|n|` of a rectangle.
    pub fn volume(&self) -> i64 {
        self.0.iter().product()
    }
}

impl From<Vec<i64>> for MultiIndex {
    fn from(v: Vec<i64>) -> Self {
        MultiIndex(SmallVec::from_vec(v))
    }
}

impl From<MultiIndex> for Vec<i64> {
    fn from(m: MultiIndex) -> Self {
        m.0.into_vec()
    }
}

impl<const N: usize> From<[i64; N]> for MultiIndex {
    fn from(a: [i64; N]) -> Self {
        MultiIndex(a.iter().copied().collect())
    }
}

impl Add for &MultiIndex {
    type Output = MultiIndex;

    fn add(self, rhs: &MultiIndex) -> MultiIndex {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch in index addition");
        MultiIndex(self.0.iter().zip(rhs.0.iter()).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &MultiIndex {
    type Output = MultiIndex;

    fn sub(self, rhs: &MultiIndex) -> MultiIndex {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch in index subtraction");
        MultiIndex(self.0.iter().zip(rhs.0.iter()).map(|(a, b)| a - b).collect())
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str(")")
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for MultiIndex {
    type Err = Error;

    /// Accepts `(1,2)`, `1,2` or `1 2`.
    fn from_str(s: &str) -> Result<Self> {
        let inner = s.trim().trim_start_matches('(').trim_end_matches(')');
        let coords = inner
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<i64>().map_err(|e| Error::Parse {
                    line: 0,
                    message: format!("bad coordinate `{t}`: {e}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if coords.is_empty() {
            return Err(Error::Parse { line: 0, message: format!("empty index `{s}`") });
        }
        Ok(MultiIndex::from(coords))
    }
}

/// Inclusive box `lo <= u <= hi` of lattice sites, iterated lexicographically.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexBox {
    lo: MultiIndex,
    hi: MultiIndex,
}

impl IndexBox {
    pub fn new(lo: MultiIndex, hi: MultiIndex) -> Result<Self> {
        check_dim(lo.dim(), hi.dim())?;
        Ok(IndexBox { lo, hi })
    }

    pub fn lo(&self) -> &MultiIndex {
        &self.lo
    }

    pub fn hi(&self) -> &MultiIndex {
        &self.hi
    }

    pub fn dim(&self) -> usize {
        self.lo.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.coords().iter().zip(self.hi.coords()).any(|(a, b)| a > b)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.lo
            .coords()
            .iter()
            .zip(self.hi.coords())
            .map(|(a, b)| if b >= a { (b - a + 1) as usize } else { 0 })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.shape().iter().product()
    }

    pub fn contains(&self, u: &MultiIndex) -> bool {
        self.lo.leq(u) && u.leq(&self.hi)
    }

    /// Smallest box containing both.
    pub fn hull(&self, other: &IndexBox) -> IndexBox {
        IndexBox { lo: self.lo.meet(&other.lo), hi: self.hi.join(&other.hi) }
    }

    /// Row-major offset of `u`, last axis fastest. `u` must lie in the box.
    pub fn offset(&self, u: &MultiIndex) -> usize {
        debug_assert!(self.contains(u), "{u} outside box");
        let shape = self.shape();
        let mut off = 0usize;
        for axis in 0..self.dim() {
            off = off * shape[axis] + (u.get(axis) - self.lo.get(axis)) as usize;
        }
        off
    }

    pub fn iter(&self) -> BoxIter {
        BoxIter {
            lo: self.lo.clone(),
            hi: self.hi.clone(),
            next: if self.is_empty() { None } else { Some(self.lo.clone()) },
        }
    }
}

/// Lexicographic odometer over an [`IndexBox`].
pub struct BoxIter {
    lo: MultiIndex,
    hi: MultiIndex,
    next: Option<MultiIndex>,
}

impl Iterator for BoxIter {
    type Item = MultiIndex;

    fn next(&mut self) -> Option<MultiIndex> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut axis = succ.dim();
        loop {
            if axis == 0 {
                break;
            }
            axis -= 1;
            if succ.0[axis] < self.hi.0[axis] {
                succ.0[axis] += 1;
                self.next = Some(succ);
                break;
            }
            succ.0[axis] = self.lo.0[axis];
        }
        Some(current)
    }
}

/// Summation window `1 <= u <= n`.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<i64>", into = "Vec<i64>")]
pub struct Rectangle {
    upper: MultiIndex,
}

impl Rectangle {
    pub fn new(upper: MultiIndex) -> Result<Self> {
        if upper.dim() == 0 || upper.coords().iter().any(|&c| c < 1) {
            return Err(Error::InvalidRectangle(upper));
        }
        Ok(Rectangle { upper })
    }

    pub fn square(dim: usize, side: i64) -> Result<Self> {
        Rectangle::new(MultiIndex::splat(dim, side))
    }

    pub fn upper(&self) -> &MultiIndex {
        &self.upper
    }

    pub fn dim(&self) -> usize {
        self.upper.dim()
    }

    pub fn cells(&self) -> usize {
        self.upper.volume() as usize
    }

    pub fn as_box(&self) -> IndexBox {
        IndexBox { lo: MultiIndex::ones(self.dim()), hi: self.upper.clone() }
    }

    pub fn iter(&self) -> BoxIter {
        self.as_box().iter()
    }

    /// Grid label such as `4x4`.
    pub fn label(&self) -> String {
        self.upper.coords().iter().map(|c| c.to_string()).collect::<Vec<_>>().join("x")
    }

    /// Parses the `4x4` form produced by [`Rectangle::label`].
    pub fn parse_label(s: &str) -> Result<Self> {
        let coords = s
            .trim()
            .split('x')
            .map(|t| {
                t.trim().parse::<i64>().map_err(|e| Error::Config(format!("bad grid `{s}`: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Rectangle::new(MultiIndex::from(coords))
    }
}

impl TryFrom<Vec<i64>> for Rectangle {
    type Error = Error;

    fn try_from(v: Vec<i64>) -> Result<Self> {
        Rectangle::new(MultiIndex::from(v))
    }
}

impl From<Rectangle> for Vec<i64> {
    fn from(r: Rectangle) -> Self {
        r.upper.into()
    }
}

impl fmt::Debug for Rectangle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Rectangle({})", self.label())
    }
}

impl fmt::Display for Rectangle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_order_and_lattice_ops() {
        let a = MultiIndex::from([1, 4]);
        let b = MultiIndex::from([2, 3]);
        assert!(!a.leq(&b) && !b.leq(&a));
        assert_eq!(a.meet(&b), MultiIndex::from([1, 3]));
        assert_eq!(a.join(&b), MultiIndex::from([2, 4]));
        assert!(a.meet(&b).leq(&a));
    }

    #[test]
    fn box_iteration_is_lexicographic_and_offsets_match() {
        let bx = IndexBox::new(MultiIndex::from([0, -1]), MultiIndex::from([1, 1])).unwrap();
        let sites: Vec<_> = bx.iter().collect();
        assert_eq!(sites.len(), 6);
        assert_eq!(sites[0], MultiIndex::from([0, -1]));
        assert_eq!(sites[1], MultiIndex::from([0, 0]));
        assert_eq!(sites[5], MultiIndex::from([1, 1]));
        for (i, s) in sites.iter().enumerate() {
            assert_eq!(bx.offset(s), i);
        }
        let mut sorted = sites.clone();
        sorted.sort();
        assert_eq!(sorted, sites);
    }

    #[test]
    fn empty_box_yields_nothing() {
        let bx = IndexBox::new(MultiIndex::from([2]), MultiIndex::from([1])).unwrap();
        assert!(bx.is_empty());
        assert_eq!(bx.iter().count(), 0);
    }

    #[test]
    fn rectangle_validation_and_labels() {
        assert!(Rectangle::new(MultiIndex::from([0, 3])).is_err());
        let r = Rectangle::parse_label("3x5").unwrap();
        assert_eq!(r.cells(), 15);
        assert_eq!(r.label(), "3x5");
        assert_eq!(r.iter().count(), 15);
    }

    #[test]
    fn index_parsing() {
        assert_eq!("(1,-2)".parse::<MultiIndex>().unwrap(), MultiIndex::from([1, -2]));
        assert_eq!("3 4 5".parse::<MultiIndex>().unwrap(), MultiIndex::from([3, 4, 5]));
        assert!("()".parse::<MultiIndex>().is_err());
    }
}
