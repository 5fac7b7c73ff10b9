//! Brute-force reference for the algebra.
//!
//! Innovations are taken to be Rademacher (`±1`, so `σ² = 1`) and every
//! expectation is computed by averaging over all `2^|window|` sign
//! assignments. Nothing here uses the closed-form rules of
//! [`crate::algebra`]; it only evaluates polynomials pointwise.

use std::collections::HashMap;

use crate::algebra::Expansion;
use crate::error::{Error, Result};
use crate::index::MultiIndex;

/// Hard limit on enumerated sites.
pub const MAX_WINDOW: usize = 24;

/// Sign pattern over a window: bit `i` set means site `i` takes value `-1`.
pub type Assignment = u32;

/// A set of lattice sites with a fixed bit position for each.
#[derive(Clone, Debug)]
pub struct Window {
    sites: Vec<MultiIndex>,
    position: HashMap<MultiIndex, usize>,
}

impl Window {
    pub fn new(sites: impl IntoIterator<Item = MultiIndex>) -> Result<Self> {
        let mut uniq: Vec<MultiIndex> = sites.into_iter().collect();
        uniq.sort();
        uniq.dedup();
        if uniq.len() > MAX_WINDOW {
            return Err(Error::WindowTooLarge { sites: uniq.len(), max: MAX_WINDOW });
        }
        let position = uniq.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        Ok(Window { sites: uniq, position })
    }

    /// The sites of all given expansions.
    pub fn covering<'a>(exprs: impl IntoIterator<Item = &'a Expansion>) -> Result<Self> {
        Window::new(exprs.into_iter().flat_map(|e| e.sites()))
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[MultiIndex] {
        &self.sites
    }

    /// Bits of the sites `<= cutoff`.
    pub fn mask_leq(&self, cutoff: &MultiIndex) -> u32 {
        self.sites
            .iter()
            .enumerate()
            .filter(|(_, s)| s.leq(cutoff))
            .fold(0u32, |acc, (i, _)| acc | (1 << i))
    }

    pub fn full_mask(&self) -> u32 {
        if self.sites.is_empty() {
            0
        } else {
            u32::MAX >> (32 - self.sites.len())
        }
    }

    pub fn value(&self, assignment: Assignment, site: &MultiIndex) -> Option<f64> {
        self.position
            .get(site)
            .map(|&i| if assignment >> i & 1 == 1 { -1.0 } else { 1.0 })
    }

    /// Compiles `e` into (site mask, coefficient) pairs for fast evaluation.
    pub fn compile(&self, e: &Expansion) -> Result<CompiledExpansion> {
        let mut terms = Vec::with_capacity(e.len());
        for (m, c) in e.terms() {
            let mut mask = 0u32;
            for s in m.sites() {
                let i = *self.position.get(s).ok_or_else(|| Error::WindowMissingSite(s.clone()))?;
                mask |= 1 << i;
            }
            terms.push((mask, c));
        }
        Ok(CompiledExpansion { terms })
    }
}

/// An expansion evaluated through parity of masked sign bits.
#[derive(Clone, Debug)]
pub struct CompiledExpansion {
    terms: Vec<(u32, f64)>,
}

impl CompiledExpansion {
    pub fn eval(&self, assignment: Assignment) -> f64 {
        self.terms
            .iter()
            .map(|&(mask, c)| if (mask & assignment).count_ones() % 2 == 1 { -c } else { c })
            .sum()
    }
}

/// Iterates every subset of `mask` (including the empty set).
fn subsets(mask: u32) -> impl Iterator<Item = u32> {
    let mut next = Some(0u32);
    std::iter::from_fn(move || {
        let cur = next?;
        let succ = cur.wrapping_sub(mask) & mask;
        next = if succ == 0 { None } else { Some(succ) };
        Some(cur)
    })
}

/// Average of `f` over all assignments of the window.
pub fn oracle_mean(window: &Window, f: impl Fn(Assignment) -> f64) -> f64 {
    let full = window.full_mask();
    let count = (full as u64) + 1;
    let total: f64 = subsets(full).map(&f).sum();
    total / count as f64
}

/// `E[e]` by enumeration.
pub fn oracle_expectation(e: &Expansion, window: &Window) -> Result<f64> {
    let compiled = window.compile(e)?;
    Ok(oracle_mean(window, |a| compiled.eval(a)))
}

/// `E[e1 · e2]` by enumeration.
pub fn oracle_inner(e1: &Expansion, e2: &Expansion, window: &Window) -> Result<f64> {
    let c1 = window.compile(e1)?;
    let c2 = window.compile(e2)?;
    Ok(oracle_mean(window, |a| c1.eval(a) * c2.eval(a)))
}

/// Largest deviation between the definitional conditional expectation of
/// `e` given `F_cutoff` (average over the sites not `<= cutoff`) and the
/// candidate produced by `cond`.
pub fn oracle_cond_deviation(
    e: &Expansion,
    cutoff: &MultiIndex,
    window: &Window,
    cond: impl Fn(&Expansion, &MultiIndex) -> Result<Expansion>,
) -> Result<f64> {
    let claimed = cond(e, cutoff)?;
    // a conditional expectation must be F_cutoff-measurable
    if claimed.monomials().flat_map(|m| m.sites()).any(|s| !s.leq(cutoff)) {
        return Ok(f64::INFINITY);
    }
    let ce = window.compile(e)?;
    let cc = window.compile(&claimed)?;
    let known = window.mask_leq(cutoff);
    let free = window.full_mask() & !known;
    let free_count = (1u64 << free.count_ones()) as f64;
    let mut worst = 0.0f64;
    for fixed in subsets(known) {
        let avg: f64 = subsets(free).map(|rest| ce.eval(fixed | rest)).sum::<f64>() / free_count;
        worst = worst.max((avg - cc.eval(fixed)).abs());
    }
    Ok(worst)
}

/// Definitional check of `cond_expect(e, cutoff)`.
pub fn oracle_cond_check(e: &Expansion, cutoff: &MultiIndex, window: &Window) -> Result<bool> {
    let scale = 1.0 + e.terms().map(|(_, c)| c.abs()).sum::<f64>();
    let dev = oracle_cond_deviation(e, cutoff, window, crate::algebra::cond_expect)?;
    Ok(dev <= 1e-12 * scale)
}
