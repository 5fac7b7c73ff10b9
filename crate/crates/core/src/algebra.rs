//! Exact algebra of multilinear innovation monomials.
//!
//! Every functional of a field driven by i.i.d. centered innovations
//! `ξ_u` that we need (the field values, partial sums, martingale
//! differences, remainders) is a finite real combination of monomials of
//! degree at most two with pairwise distinct sites. On that class the
//! conditional expectation given `F_c = σ(ξ_j : j <= c)` has a closed form:
//! a monomial survives iff all of its sites are `<= c`, otherwise an
//! independent centered factor annihilates it. Distinct monomials are
//! orthogonal in `L²` and `E[m²] = σ^(2·degree)`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use smallvec::SmallVec;

use crate::error::{check_dim, Error, Result};
use crate::index::MultiIndex;

/// Product of distinct innovations, sites kept sorted lexicographically.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Monomial(SmallVec<[MultiIndex; 2]>);

impl Monomial {
    pub const MAX_DEGREE: usize = 2;

    pub fn constant() -> Self {
        Monomial(SmallVec::new())
    }

    pub fn single(site: MultiIndex) -> Self {
        let mut v = SmallVec::new();
        v.push(site);
        Monomial(v)
    }

    pub fn pair(a: MultiIndex, b: MultiIndex) -> Result<Self> {
        Monomial::from_sites(vec![a, b])
    }

    pub fn from_sites(mut sites: Vec<MultiIndex>) -> Result<Self> {
        if sites.len() > Self::MAX_DEGREE {
            return Err(Error::DegreeTooHigh(sites.len()));
        }
        if let Some(first) = sites.first() {
            let d = first.dim();
            for s in &sites {
                check_dim(d, s.dim())?;
            }
        }
        sites.sort();
        for w in sites.windows(2) {
            if w[0] == w[1] {
                return Err(Error::RepeatedIndex(w[0].clone()));
            }
        }
        Ok(Monomial(SmallVec::from_vec(sites)))
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn sites(&self) -> &[MultiIndex] {
        &self.0
    }

    /// Componentwise maximum of the sites; `None` for the constant monomial.
    pub fn max_site(&self) -> Option<MultiIndex> {
        let mut it = self.0.iter();
        let first = it.next()?.clone();
        Some(it.fold(first, |acc, s| acc.join(s)))
    }

    /// `F_c`-measurability: every site is `<= c` componentwise.
    pub fn measurable_at(&self, cutoff: &MultiIndex) -> bool {
        self.0.iter().all(|s| s.leq(cutoff))
    }

    pub fn shifted(&self, by: &MultiIndex) -> Monomial {
        // translation preserves the lexicographic order of the sites
        Monomial(self.0.iter().map(|s| s + by).collect())
    }

    pub fn evaluate(&self, value: impl Fn(&MultiIndex) -> f64) -> f64 {
        self.0.iter().map(value).product()
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("1");
        }
        for s in &self.0 {
            write!(f, "x[{s}]")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Finite real combination of monomials over `Z^dim`.
///
/// Canonical form: no stored coefficient is exactly zero, so two
/// expansions are equal iff their term tables are identical.
#[derive(Clone, PartialEq)]
pub struct Expansion {
    dim: usize,
    terms: BTreeMap<Monomial, f64>,
}

impl Expansion {
    pub fn zero(dim: usize) -> Self {
        Expansion { dim, terms: BTreeMap::new() }
    }

    pub fn constant(dim: usize, value: f64) -> Self {
        let mut e = Expansion::zero(dim);
        e.add_term(Monomial::constant(), value);
        e
    }

    /// `coef · ξ_site`.
    pub fn innovation(site: MultiIndex, coef: f64) -> Self {
        let mut e = Expansion::zero(site.dim());
        e.add_term(Monomial::single(site), coef);
        e
    }

    /// `coef · ξ_a ξ_b`; fails when `a == b`.
    pub fn product(a: MultiIndex, b: MultiIndex, coef: f64) -> Result<Self> {
        let dim = a.dim();
        let mut e = Expansion::zero(dim);
        e.add_term(Monomial::pair(a, b)?, coef);
        Ok(e)
    }

    pub fn from_terms(dim: usize, terms: impl IntoIterator<Item = (Monomial, f64)>) -> Result<Self> {
        let mut e = Expansion::zero(dim);
        for (m, c) in terms {
            if let Some(s) = m.sites().first() {
                check_dim(dim, s.dim())?;
            }
            e.add_term(m, c);
        }
        Ok(e)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> + '_ {
        self.terms.iter().map(|(m, c)| (m, *c))
    }

    pub fn monomials(&self) -> impl Iterator<Item = &Monomial> + '_ {
        self.terms.keys()
    }

    pub fn coefficient(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    pub fn constant_term(&self) -> f64 {
        self.coefficient(&Monomial::constant())
    }

    /// Distinct sites touched by any monomial.
    pub fn sites(&self) -> BTreeSet<MultiIndex> {
        self.terms.keys().flat_map(|m| m.sites().iter().cloned()).collect()
    }

    /// Componentwise bounds of [`Expansion::sites`].
    pub fn site_bounds(&self) -> Option<(MultiIndex, MultiIndex)> {
        let mut it = self.terms.keys().flat_map(|m| m.sites().iter());
        let first = it.next()?.clone();
        Some(it.fold((first.clone(), first), |(lo, hi), s| (lo.meet(s), hi.join(s))))
    }

    pub fn add_term(&mut self, m: Monomial, coef: f64) {
        use std::collections::btree_map::Entry;
        if coef == 0.0 {
            return;
        }
        match self.terms.entry(m) {
            Entry::Vacant(v) => {
                v.insert(coef);
            }
            Entry::Occupied(mut o) => {
                let next = *o.get() + coef;
                if next == 0.0 {
                    o.remove();
                } else {
                    *o.get_mut() = next;
                }
            }
        }
    }

    /// `self += factor · other`.
    pub fn add_scaled(&mut self, other: &Expansion, factor: f64) {
        assert_eq!(self.dim, other.dim, "dimension mismatch in expansion arithmetic");
        for (m, c) in &other.terms {
            self.add_term(m.clone(), factor * c);
        }
    }

    pub fn scaled(&self, factor: f64) -> Expansion {
        let mut out = Expansion::zero(self.dim);
        out.add_scaled(self, factor);
        out
    }

    /// Keeps the terms whose monomial satisfies `keep`.
    pub fn filter(&self, mut keep: impl FnMut(&Monomial) -> bool) -> Expansion {
        Expansion {
            dim: self.dim,
            terms: self.terms.iter().filter(|(m, _)| keep(m)).map(|(m, c)| (m.clone(), *c)).collect(),
        }
    }

    /// Value of the polynomial for a given innovation assignment.
    pub fn evaluate(&self, value: impl Fn(&MultiIndex) -> f64) -> f64 {
        self.terms.iter().map(|(m, c)| c * m.evaluate(&value)).sum()
    }

    /// Same monomial set, ignoring coefficients.
    pub fn same_support(&self, other: &Expansion) -> bool {
        self.terms.len() == other.terms.len() && self.terms.keys().eq(other.terms.keys())
    }
}

impl AddAssign<&Expansion> for Expansion {
    fn add_assign(&mut self, rhs: &Expansion) {
        self.add_scaled(rhs, 1.0);
    }
}

impl SubAssign<&Expansion> for Expansion {
    fn sub_assign(&mut self, rhs: &Expansion) {
        self.add_scaled(rhs, -1.0);
    }
}

impl Add for &Expansion {
    type Output = Expansion;

    fn add(self, rhs: &Expansion) -> Expansion {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub for &Expansion {
    type Output = Expansion;

    fn sub(self, rhs: &Expansion) -> Expansion {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl Neg for &Expansion {
    type Output = Expansion;

    fn neg(self) -> Expansion {
        self.scaled(-1.0)
    }
}

impl Mul<f64> for &Expansion {
    type Output = Expansion;

    fn mul(self, rhs: f64) -> Expansion {
        self.scaled(rhs)
    }
}

impl fmt::Display for Expansion {
    /// `coef * x[(i1,..,id)]x[(..)] + ...`, constant term as a bare number.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            if m.degree() == 0 {
                write!(f, "{c}")?;
            } else {
                write!(f, "{c} * {m}")?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Expansion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expansion[d={}]({})", self.dim, self)
    }
}

fn split_terms(s: &str) -> Vec<&str> {
    let bytes = s.as_bytes();
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, &b) in bytes.iter().enumerate() {
        match b {
            b'[' | b'(' => depth += 1,
            b']' | b')' => depth -= 1,
            b'+' | b'-' if depth == 0 => {
                let prev = s[..i].trim_end().as_bytes().last().copied();
                let exponent = matches!(prev, Some(b'e') | Some(b'E')) && i > 0 && bytes[i - 1] != b' ';
                let after_term = matches!(prev, Some(c) if c == b']' || c == b'.' || c.is_ascii_digit());
                if b == b'+' && !exponent {
                    out.push(&s[start..i]);
                    start = i + 1;
                } else if b == b'-' && !exponent && after_term && s[start..i].trim() != "" {
                    out.push(&s[start..i]);
                    start = i;
                }
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

fn parse_monomial(s: &str) -> Result<Monomial> {
    let bad = |msg: String| Error::Parse { line: 0, message: msg };
    let mut sites = Vec::new();
    let mut rest = s.trim();
    while !rest.is_empty() {
        let body = rest
            .strip_prefix("x[")
            .ok_or_else(|| bad(format!("expected `x[...]` in `{s}`")))?;
        let end = body.find(']').ok_or_else(|| bad(format!("unterminated `x[` in `{s}`")))?;
        sites.push(body[..end].parse::<MultiIndex>()?);
        rest = body[end + 1..].trim_start().trim_start_matches('*').trim_start();
    }
    Monomial::from_sites(sites)
}

impl FromStr for Expansion {
    type Err = Error;

    /// Parses the [`Display`](fmt::Display) form. The dimension is taken
    /// from the first site; a pure constant is read as dimension 0 and must
    /// be re-dimensioned with [`Expansion::with_dim`].
    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: String| Error::Parse { line: 0, message: msg };
        let mut parsed = Vec::new();
        for term in split_terms(s) {
            let term = term.trim();
            if term.is_empty() {
                return Err(bad(format!("empty term in `{s}`")));
            }
            let (coef, mono) = match term.find("x[") {
                None => (term, Monomial::constant()),
                Some(pos) => {
                    let head = term[..pos].trim().trim_end_matches('*').trim();
                    (if head.is_empty() { "1" } else { head }, parse_monomial(&term[pos..])?)
                }
            };
            let coef: String = coef.split_whitespace().collect();
            let coef = match coef.as_str() {
                "-" => -1.0,
                c => c.parse::<f64>().map_err(|e| bad(format!("bad coefficient `{c}`: {e}")))?,
            };
            parsed.push((mono, coef));
        }
        let dim = parsed
            .iter()
            .find_map(|(m, _)| m.sites().first().map(|s| s.dim()))
            .unwrap_or(0);
        Expansion::from_terms(dim, parsed)
    }
}

impl Expansion {
    /// Re-labels the ambient dimension; only allowed when no site disagrees.
    pub fn with_dim(mut self, dim: usize) -> Result<Self> {
        if let Some(s) = self.terms.keys().find_map(|m| m.sites().first()) {
            check_dim(dim, s.dim())?;
        }
        self.dim = dim;
        Ok(self)
    }
}

/// Translation by `u`: every site `a` becomes `a + u`.
pub fn shift(e: &Expansion, u: &MultiIndex) -> Result<Expansion> {
    check_dim(e.dim, u.dim())?;
    Ok(Expansion {
        dim: e.dim,
        terms: e.terms.iter().map(|(m, c)| (m.shifted(u), *c)).collect(),
    })
}

/// `E(e | F_cutoff)`.
pub fn cond_expect(e: &Expansion, cutoff: &MultiIndex) -> Result<Expansion> {
    check_dim(e.dim, cutoff.dim())?;
    Ok(e.filter(|m| m.measurable_at(cutoff)))
}

fn corner_signs(dim: usize) -> impl Iterator<Item = (MultiIndex, i64)> {
    (0u32..(1u32 << dim)).map(move |mask| {
        let eps = MultiIndex::new((0..dim).map(|axis| ((mask >> axis) & 1) as i64));
        let sign = if mask.count_ones() % 2 == 0 { 1 } else { -1 };
        (eps, sign)
    })
}

/// Projection `P_m = Σ_{ε ∈ {0,1}^d} (-1)^{|ε|} E_{m-ε}`.
///
/// The alternating sum is accumulated per monomial as an integer
/// multiplicity so that cancelling corners give an exact zero.
pub fn project(e: &Expansion, m: &MultiIndex) -> Result<Expansion> {
    check_dim(e.dim, m.dim())?;
    let corners: Vec<(MultiIndex, i64)> = corner_signs(e.dim).map(|(eps, s)| (m - &eps, s)).collect();
    let mut out = Expansion::zero(e.dim);
    for (mono, c) in &e.terms {
        let mult: i64 = corners
            .iter()
            .filter(|(cut, _)| mono.measurable_at(cut))
            .map(|(_, s)| s)
            .sum();
        if mult != 0 {
            out.add_term(mono.clone(), mult as f64 * c);
        }
    }
    Ok(out)
}

/// Keeps exactly the monomials whose componentwise site maximum is `m`.
pub fn project_by_max(e: &Expansion, m: &MultiIndex) -> Result<Expansion> {
    check_dim(e.dim, m.dim())?;
    Ok(e.filter(|mono| mono.max_site().as_ref() == Some(m)))
}

/// One-direction difference `E_m - E_{m - e_axis}`.
pub fn coordinate_difference(e: &Expansion, m: &MultiIndex, axis: usize) -> Result<Expansion> {
    check_dim(e.dim, m.dim())?;
    if axis >= e.dim {
        return Err(Error::DimensionMismatch { expected: e.dim, found: axis + 1 });
    }
    let lower = m.with_coord(axis, m.get(axis) - 1);
    let mut out = Expansion::zero(e.dim);
    for (mono, c) in &e.terms {
        let mult = mono.measurable_at(m) as i64 - mono.measurable_at(&lower) as i64;
        if mult != 0 {
            out.add_term(mono.clone(), mult as f64 * c);
        }
    }
    Ok(out)
}

fn check_sigma2(sigma2: f64) -> Result<()> {
    if sigma2 > 0.0 && sigma2.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidLaw(format!("sigma2 must be positive and finite, got {sigma2}")))
    }
}

/// `E[e1 · e2]` for innovations of variance `sigma2`.
pub fn inner(e1: &Expansion, e2: &Expansion, sigma2: f64) -> Result<f64> {
    check_dim(e1.dim, e2.dim)?;
    check_sigma2(sigma2)?;
    let (small, large) = if e1.len() <= e2.len() { (e1, e2) } else { (e2, e1) };
    Ok(small
        .terms
        .iter()
        .filter_map(|(m, c)| large.terms.get(m).map(|c2| c * c2 * sigma2.powi(m.degree() as i32)))
        .fold(0.0, |acc, x| acc + x))
}

/// `E[e²]`.
pub fn norm2(e: &Expansion, sigma2: f64) -> Result<f64> {
    check_sigma2(sigma2)?;
    Ok(e.terms.iter().map(|(m, c)| c * c * sigma2.powi(m.degree() as i32)).fold(0.0, |acc, x| acc + x))
}
