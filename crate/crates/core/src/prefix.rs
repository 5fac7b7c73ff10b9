//! d-dimensional summed-area tables.
//!
//! `PrefixTable<T>` stores `P[j] = Σ_{lo <= u <= j} v[u]` over an
//! [`IndexBox`], built with one cumulative pass per axis. It is used with
//! `f64` for simulated lattices and with [`Expansion`](crate::algebra::Expansion)
//! for the projected partial sums `P_1(S_j)`.

use std::ops::AddAssign;

use crate::error::{check_dim, Error, Result};
use crate::index::{IndexBox, MultiIndex};

#[derive(Clone, Debug)]
pub struct PrefixTable<T> {
    bounds: IndexBox,
    cumulative: Vec<T>,
}

impl<T> PrefixTable<T>
where
    T: Clone + for<'a> AddAssign<&'a T>,
{
    /// `values` are in the row-major order of `bounds.iter()`.
    pub fn build(bounds: IndexBox, mut values: Vec<T>) -> Result<Self> {
        if values.len() != bounds.len() {
            return Err(Error::InvalidKernel(format!(
                "prefix table expects {} values, got {}",
                bounds.len(),
                values.len()
            )));
        }
        let shape = bounds.shape();
        let mut stride = 1usize;
        for axis in (0..shape.len()).rev() {
            let extent = shape[axis];
            for flat in 0..values.len() {
                if (flat / stride) % extent != 0 {
                    let (head, tail) = values.split_at_mut(flat);
                    tail[0] += &head[flat - stride];
                }
            }
            stride *= extent;
        }
        Ok(PrefixTable { bounds, cumulative: values })
    }

    pub fn bounds(&self) -> &IndexBox {
        &self.bounds
    }

    /// `Σ_{lo <= u <= j} v[u]`, with `j` clamped to the box from above.
    /// Returns `None` when some coordinate of `j` is below the box.
    pub fn prefix(&self, j: &MultiIndex) -> Option<&T> {
        if j.dim() != self.bounds.dim() || self.bounds.is_empty() || !self.bounds.lo().leq(j) {
            return None;
        }
        let clamped = j.meet(self.bounds.hi());
        Some(&self.cumulative[self.bounds.offset(&clamped)])
    }

    pub fn total(&self) -> Option<&T> {
        self.cumulative.last()
    }
}

impl PrefixTable<f64> {
    /// Sum over the sub-box `lo <= u <= hi` by inclusion–exclusion over the
    /// `2^d` corners.
    pub fn box_sum(&self, lo: &MultiIndex, hi: &MultiIndex) -> Result<f64> {
        check_dim(self.bounds.dim(), lo.dim())?;
        check_dim(self.bounds.dim(), hi.dim())?;
        let d = lo.dim();
        let mut total = 0.0;
        for mask in 0u32..(1 << d) {
            let corner = MultiIndex::new((0..d).map(|axis| {
                if mask >> axis & 1 == 1 {
                    lo.get(axis) - 1
                } else {
                    hi.get(axis)
                }
            }));
            let sign = if mask.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            if let Some(v) = self.prefix(&corner) {
                total += sign * v;
            }
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(bounds: &IndexBox, values: &[f64], lo: &MultiIndex, hi: &MultiIndex) -> f64 {
        bounds
            .iter()
            .zip(values)
            .filter(|(u, _)| lo.leq(u) && u.leq(hi))
            .map(|(_, v)| v)
            .sum()
    }

    #[test]
    fn two_dimensional_prefix_matches_hand_values() {
        let bounds = IndexBox::new(MultiIndex::from([1, 1]), MultiIndex::from([2, 3])).unwrap();
        let t = PrefixTable::build(bounds, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(*t.prefix(&MultiIndex::from([1, 3])).unwrap(), 6.0);
        assert_eq!(*t.prefix(&MultiIndex::from([2, 2])).unwrap(), 12.0);
        assert_eq!(*t.prefix(&MultiIndex::from([9, 9])).unwrap(), 21.0);
        assert!(t.prefix(&MultiIndex::from([0, 2])).is_none());
        let s = t.box_sum(&MultiIndex::from([2, 2]), &MultiIndex::from([2, 3])).unwrap();
        assert_eq!(s, 11.0);
    }

    proptest! {
        #[test]
        fn box_sums_match_brute_force(
            dims in prop::collection::vec(1i64..4, 1..4),
            seed in prop::collection::vec(-5i32..5, 64),
            a in prop::collection::vec(0i64..4, 3),
            b in prop::collection::vec(0i64..4, 3),
        ) {
            let d = dims.len();
            let lo0 = MultiIndex::new((0..d).map(|i| -(i as i64)));
            let hi0 = MultiIndex::new((0..d).map(|i| dims[i] - 1 - i as i64));
            let bounds = IndexBox::new(lo0.clone(), hi0).unwrap();
            let values: Vec<f64> = (0..bounds.len()).map(|k| seed[k % seed.len()] as f64).collect();
            let table = PrefixTable::build(bounds.clone(), values.clone()).unwrap();
            let lo = MultiIndex::new((0..d).map(|i| lo0.get(i) + a[i].min(b[i])));
            let hi = MultiIndex::new((0..d).map(|i| lo0.get(i) + a[i].max(b[i])));
            prop_assert_eq!(table.box_sum(&lo, &hi).unwrap(), brute(&bounds, &values, &lo, &hi));
        }
    }
}
