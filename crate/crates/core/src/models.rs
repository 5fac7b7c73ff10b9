//! Stationary fields driven by i.i.d. innovations: linear (moving average)
//! and Volterra (bilinear) kernels of finite support.
//!
//! Kernels with infinite support must be truncated by the caller; all
//! exact computations see only the stored entries.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::algebra::{norm2, Expansion, Monomial};
use crate::error::{check_dim, Error, Result};
use crate::index::{IndexBox, MultiIndex, Rectangle};
use crate::prefix::PrefixTable;
use crate::rng::replicate_rng;

/// Default cap on stored monomials while accumulating a partial sum.
pub const DEFAULT_TERM_BUDGET: usize = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LawKind {
    Rademacher,
    Gaussian,
    UniformCentered,
}

impl fmt::Display for LawKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LawKind::Rademacher => "rademacher",
            LawKind::Gaussian => "gaussian",
            LawKind::UniformCentered => "uniform-centered",
        })
    }
}

/// Centered innovation law with variance `sigma2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InnovationLaw {
    kind: LawKind,
    sigma2: f64,
}

impl InnovationLaw {
    pub fn new(kind: LawKind, sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidLaw(format!("sigma2 must be positive and finite, got {sigma2}")));
        }
        Ok(InnovationLaw { kind, sigma2 })
    }

    pub fn rademacher() -> Self {
        InnovationLaw { kind: LawKind::Rademacher, sigma2: 1.0 }
    }

    pub fn gaussian(sigma2: f64) -> Result<Self> {
        InnovationLaw::new(LawKind::Gaussian, sigma2)
    }

    pub fn kind(&self) -> LawKind {
        self.kind
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// `E ξ⁴`. Not used by the exact path, which never squares an innovation.
    pub fn fourth_moment(&self) -> f64 {
        let s4 = self.sigma2 * self.sigma2;
        match self.kind {
            LawKind::Rademacher => s4,
            LawKind::Gaussian => 3.0 * s4,
            LawKind::UniformCentered => 1.8 * s4,
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let sigma = self.sigma2.sqrt();
        match self.kind {
            LawKind::Rademacher => {
                if rng.random::<bool>() {
                    sigma
                } else {
                    -sigma
                }
            }
            LawKind::Gaussian => {
                let z: f64 = StandardNormal.sample(rng);
                sigma * z
            }
            LawKind::UniformCentered => {
                let half = (3.0 * self.sigma2).sqrt();
                Uniform::new_inclusive(-half, half).expect("finite bounds").sample(rng)
            }
        }
    }
}

/// Moving-average coefficients `a_j`, `j >= 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearKernel {
    dim: usize,
    entries: BTreeMap<MultiIndex, f64>,
}

impl LinearKernel {
    pub fn new(dim: usize, entries: impl IntoIterator<Item = (MultiIndex, f64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (j, a) in entries {
            check_dim(dim, j.dim())?;
            if j.coords().iter().any(|&c| c < 0) {
                return Err(Error::InvalidKernel(format!("linear index {j} has a negative coordinate")));
            }
            if !a.is_finite() {
                return Err(Error::InvalidKernel(format!("coefficient at {j} is not finite")));
            }
            if map.insert(j.clone(), a).is_some() {
                return Err(Error::InvalidKernel(format!("duplicate linear entry {j}")));
            }
        }
        Ok(LinearKernel { dim, entries: map })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> impl Iterator<Item = (&MultiIndex, f64)> + '_ {
        self.entries.iter().map(|(j, a)| (j, *a))
    }

    pub fn coefficient(&self, j: &MultiIndex) -> f64 {
        self.entries.get(j).copied().unwrap_or(0.0)
    }

    pub fn scaled(&self, factor: f64) -> LinearKernel {
        LinearKernel {
            dim: self.dim,
            entries: self.entries.iter().map(|(j, a)| (j.clone(), a * factor)).collect(),
        }
    }
}

/// Bilinear coefficients `a_{u,v}`, `u, v >= 0`, `u != v`.
#[derive(Clone, Debug, PartialEq)]
pub struct VolterraKernel {
    dim: usize,
    entries: BTreeMap<(MultiIndex, MultiIndex), f64>,
}

impl VolterraKernel {
    pub fn new(
        dim: usize,
        entries: impl IntoIterator<Item = ((MultiIndex, MultiIndex), f64)>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for ((u, v), a) in entries {
            check_dim(dim, u.dim())?;
            check_dim(dim, v.dim())?;
            if u.coords().iter().chain(v.coords()).any(|&c| c < 0) {
                return Err(Error::InvalidKernel(format!("volterra pair {u}|{v} has a negative coordinate")));
            }
            if u == v {
                return Err(Error::InvalidKernel(format!("diagonal volterra entry {u}|{v}")));
            }
            if !a.is_finite() {
                return Err(Error::InvalidKernel(format!("coefficient at {u}|{v} is not finite")));
            }
            if map.insert((u.clone(), v.clone()), a).is_some() {
                return Err(Error::InvalidKernel(format!("duplicate volterra entry {u}|{v}")));
            }
        }
        Ok(VolterraKernel { dim, entries: map })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> impl Iterator<Item = (&(MultiIndex, MultiIndex), f64)> + '_ {
        self.entries.iter().map(|(k, a)| (k, *a))
    }

    /// `a_{u,v}`, zero off the support (including any negative index).
    pub fn coefficient(&self, u: &MultiIndex, v: &MultiIndex) -> f64 {
        self.entries.get(&(u.clone(), v.clone())).copied().unwrap_or(0.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Kernel {
    Linear(LinearKernel),
    Volterra(VolterraKernel),
}

/// One summand of `X_0`: `coef · Π ξ_{-offset}`.
#[derive(Clone, Debug)]
pub struct KernelTerm {
    pub offsets: SmallVec<[MultiIndex; 2]>,
    pub coef: f64,
}

impl Kernel {
    pub fn dim(&self) -> usize {
        match self {
            Kernel::Linear(k) => k.dim(),
            Kernel::Volterra(k) => k.dim(),
        }
    }

    pub fn terms(&self) -> Vec<KernelTerm> {
        match self {
            Kernel::Linear(k) => k
                .entries()
                .map(|(j, a)| KernelTerm { offsets: smallvec::smallvec![j.clone()], coef: a })
                .collect(),
            Kernel::Volterra(k) => k
                .entries()
                .map(|((u, v), a)| KernelTerm { offsets: smallvec::smallvec![u.clone(), v.clone()], coef: a })
                .collect(),
        }
    }

    /// Componentwise (min, max) over all offsets; `None` for an empty kernel.
    pub fn offset_bounds(&self) -> Option<(MultiIndex, MultiIndex)> {
        let terms = self.terms();
        let mut it = terms.iter().flat_map(|t| t.offsets.iter());
        let first = it.next()?.clone();
        Some(it.fold((first.clone(), first), |(lo, hi), o| (lo.meet(o), hi.join(o))))
    }
}

/// `X_k = f(ξ_j : j <= k)` for a finite kernel and an innovation law.
#[derive(Clone, Debug)]
pub struct FieldModel {
    kernel: Kernel,
    law: InnovationLaw,
    terms: Vec<KernelTerm>,
}

impl FieldModel {
    pub fn new(kernel: Kernel, law: InnovationLaw) -> Self {
        let terms = kernel.terms();
        FieldModel { kernel, law, terms }
    }

    pub fn linear(kernel: LinearKernel, law: InnovationLaw) -> Self {
        FieldModel::new(Kernel::Linear(kernel), law)
    }

    pub fn volterra(kernel: VolterraKernel, law: InnovationLaw) -> Self {
        FieldModel::new(Kernel::Volterra(kernel), law)
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn law(&self) -> &InnovationLaw {
        &self.law
    }

    pub fn sigma2(&self) -> f64 {
        self.law.sigma2
    }

    pub fn with_law(&self, law: InnovationLaw) -> FieldModel {
        FieldModel::new(self.kernel.clone(), law)
    }

    pub fn kernel_terms(&self) -> &[KernelTerm] {
        &self.terms
    }

    fn add_term_at(&self, k: &MultiIndex, out: &mut Expansion) -> Result<()> {
        for t in &self.terms {
            let sites: Vec<MultiIndex> = t.offsets.iter().map(|o| k - o).collect();
            out.add_term(Monomial::from_sites(sites)?, t.coef);
        }
        Ok(())
    }

    /// Exact expansion of `X_k`.
    pub fn term_expansion(&self, k: &MultiIndex) -> Result<Expansion> {
        check_dim(self.dim(), k.dim())?;
        let mut out = Expansion::zero(self.dim());
        self.add_term_at(k, &mut out)?;
        Ok(out)
    }

    /// `S_n = Σ_{1 <= u <= n} X_u` with the default term budget.
    pub fn partial_sum(&self, rect: &Rectangle) -> Result<Expansion> {
        self.partial_sum_with_budget(rect, DEFAULT_TERM_BUDGET)
    }

    pub fn partial_sum_with_budget(&self, rect: &Rectangle, budget: usize) -> Result<Expansion> {
        self.window_sum(&rect.as_box(), budget)
    }

    /// `Σ_{u in bx} X_u`.
    pub fn window_sum(&self, bx: &IndexBox, budget: usize) -> Result<Expansion> {
        check_dim(self.dim(), bx.dim())?;
        let mut out = Expansion::zero(self.dim());
        for u in bx.iter() {
            self.add_term_at(&u, &mut out)?;
            if out.len() > budget {
                return Err(Error::TermBudgetExceeded { terms: out.len(), budget });
            }
        }
        Ok(out)
    }

    /// `E S_n² / |n|`.
    pub fn exact_variance_ratio(&self, rect: &Rectangle) -> Result<f64> {
        Ok(norm2(&self.partial_sum(rect)?, self.sigma2())? / rect.cells() as f64)
    }

    /// Sites touched by `X_u` for `u` in `rect`; `None` for an empty kernel.
    pub fn field_window(&self, rect: &Rectangle) -> Option<IndexBox> {
        let (min, max) = self.kernel.offset_bounds()?;
        let lo = &MultiIndex::ones(self.dim()) - &max;
        let hi = rect.upper() - &min;
        Some(IndexBox::new(lo, hi).expect("same dimension"))
    }

    /// Value of `X_u` for a realised innovation field.
    pub fn evaluate_at(&self, field: &InnovationField, u: &MultiIndex) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coef * t.offsets.iter().map(|o| field.get(&(u - o))).product::<f64>())
            .sum()
    }

    /// One realisation of `X_u` over `rect`, deterministic in `seed`.
    pub fn sample(&self, rect: &Rectangle, seed: u64) -> Result<FieldSample> {
        check_dim(self.dim(), rect.dim())?;
        let mut rng = replicate_rng(seed, 0);
        let window = self
            .field_window(rect)
            .unwrap_or_else(|| rect.as_box());
        let field = InnovationField::draw(&self.law, window, &mut rng);
        Ok(FieldSample::from_fn(rect, |u| self.evaluate_at(&field, u)))
    }
}

/// Dense innovation values on a box of sites, drawn in lexicographic order.
#[derive(Clone, Debug)]
pub struct InnovationField {
    bounds: IndexBox,
    values: Vec<f64>,
}

impl InnovationField {
    pub fn draw<R: Rng + ?Sized>(law: &InnovationLaw, bounds: IndexBox, rng: &mut R) -> Self {
        let values = (0..bounds.len()).map(|_| law.draw(rng)).collect();
        InnovationField { bounds, values }
    }

    pub fn bounds(&self) -> &IndexBox {
        &self.bounds
    }

    /// Panics when `site` lies outside the drawn window.
    pub fn get(&self, site: &MultiIndex) -> f64 {
        self.values[self.bounds.offset(site)]
    }
}

/// Real values on a rectangle `1 <= u <= n`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldSample {
    rect: Rectangle,
    values: Vec<f64>,
}

impl FieldSample {
    pub fn from_fn(rect: &Rectangle, f: impl Fn(&MultiIndex) -> f64) -> Self {
        FieldSample { rect: rect.clone(), values: rect.iter().map(|u| f(&u)).collect() }
    }

    pub fn rect(&self) -> &Rectangle {
        &self.rect
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, u: &MultiIndex) -> f64 {
        self.values[self.rect.as_box().offset(u)]
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Summed-area table: `prefix(j)` is the partial sum over `1 <= u <= j`.
    pub fn prefix_sums(&self) -> PrefixTable<f64> {
        PrefixTable::build(self.rect.as_box(), self.values.clone()).expect("shape matches")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::shift;

    fn mi(c: &[i64]) -> MultiIndex {
        MultiIndex::new(c.iter().copied())
    }

    fn rect(c: &[i64]) -> Rectangle {
        Rectangle::new(mi(c)).unwrap()
    }

    fn iid() -> FieldModel {
        FieldModel::linear(LinearKernel::new(2, [(mi(&[0, 0]), 1.0)]).unwrap(), InnovationLaw::rademacher())
    }

    fn z2() -> FieldModel {
        FieldModel::linear(
            LinearKernel::new(2, [(mi(&[0, 0]), 1.0), (mi(&[1, 1]), 1.0)]).unwrap(),
            InnovationLaw::rademacher(),
        )
    }

    fn z3() -> FieldModel {
        FieldModel::volterra(
            VolterraKernel::new(2, [((mi(&[1, 0]), mi(&[0, 1])), 1.0)]).unwrap(),
            InnovationLaw::rademacher(),
        )
    }

    fn xi(c: &[i64]) -> Expansion {
        Expansion::innovation(mi(c), 1.0)
    }

    #[test]
    fn term_expansion_examples() {
        assert_eq!(iid().term_expansion(&mi(&[3, 5])).unwrap(), xi(&[3, 5]));
        assert_eq!(z2().term_expansion(&mi(&[1, 1])).unwrap(), &xi(&[1, 1]) + &xi(&[0, 0]));
        assert_eq!(
            z3().term_expansion(&mi(&[1, 1])).unwrap(),
            Expansion::product(mi(&[0, 1]), mi(&[1, 0]), 1.0).unwrap()
        );
    }

    #[test]
    fn partial_sum_examples() {
        let s = iid().partial_sum(&rect(&[2, 2])).unwrap();
        let expect = [[1, 1], [1, 2], [2, 1], [2, 2]].iter().fold(Expansion::zero(2), |acc, c| &acc + &xi(c));
        assert_eq!(s, expect);

        let s = z2().partial_sum(&rect(&[2, 2])).unwrap();
        assert_eq!(s.len(), 7);
        assert_eq!(s.coefficient(&Monomial::single(mi(&[1, 1]))), 2.0);
        for c in [[1, 2], [2, 1], [2, 2], [0, 0], [0, 1], [1, 0]] {
            assert_eq!(s.coefficient(&Monomial::single(mi(&c))), 1.0);
        }
        assert_eq!(norm2(&s, 1.0).unwrap(), 10.0);
        assert_eq!(norm2(&s, 2.0).unwrap(), 20.0);

        let s = z3().partial_sum(&rect(&[2, 2])).unwrap();
        let pairs = [([0, 1], [1, 0]), ([0, 2], [1, 1]), ([1, 1], [2, 0]), ([1, 2], [2, 1])];
        assert_eq!(s.len(), 4);
        for (a, b) in pairs {
            assert_eq!(s.coefficient(&Monomial::pair(mi(&a), mi(&b)).unwrap()), 1.0);
        }
        assert_eq!(norm2(&s, 1.0).unwrap(), 4.0);
    }

    #[test]
    fn term_budget_is_enforced() {
        let err = z2().partial_sum_with_budget(&rect(&[10, 10]), 50).unwrap_err();
        assert!(matches!(err, Error::TermBudgetExceeded { budget: 50, .. }));
    }

    #[test]
    fn stationarity_of_terms() {
        for model in [z2(), z3()] {
            let base = model.term_expansion(&mi(&[2, -1])).unwrap();
            let u = mi(&[3, 4]);
            assert_eq!(model.term_expansion(&mi(&[5, 3])).unwrap(), shift(&base, &u).unwrap());
        }
    }

    #[test]
    fn variance_ratio_examples() {
        assert_eq!(iid().exact_variance_ratio(&rect(&[3, 7])).unwrap(), 1.0);
        let g = iid().with_law(InnovationLaw::gaussian(2.5).unwrap());
        assert_eq!(g.exact_variance_ratio(&rect(&[4, 2])).unwrap(), 2.5);
        assert_eq!(z2().exact_variance_ratio(&rect(&[2, 2])).unwrap(), 2.5);
        for (n, m) in [(3i64, 5i64), (6, 6), (1, 4)] {
            let closed = (2 * (n - 1) * (m - 1) + 2 * n * m) as f64 / (n * m) as f64;
            let got = z2().exact_variance_ratio(&rect(&[n, m])).unwrap();
            assert!((got - closed).abs() < 1e-12, "{n}x{m}: {got} vs {closed}");
            assert_eq!(z3().exact_variance_ratio(&rect(&[n, m])).unwrap(), 1.0);
        }
    }

    #[test]
    fn kernel_validation() {
        assert!(LinearKernel::new(2, [(mi(&[-1, 0]), 1.0)]).is_err());
        assert!(LinearKernel::new(2, [(mi(&[0, 0, 0]), 1.0)]).is_err());
        assert!(VolterraKernel::new(2, [((mi(&[1, 1]), mi(&[1, 1])), 1.0)]).is_err());
        assert!(InnovationLaw::new(LawKind::Gaussian, 0.0).is_err());
    }

    #[test]
    fn fourth_moments() {
        let l = InnovationLaw::new(LawKind::UniformCentered, 2.0).unwrap();
        assert!((l.fourth_moment() - 7.2).abs() < 1e-12);
        assert_eq!(InnovationLaw::gaussian(1.0).unwrap().fourth_moment(), 3.0);
        assert_eq!(InnovationLaw::rademacher().fourth_moment(), 1.0);
    }

    #[test]
    fn rademacher_sample_support_and_determinism() {
        let m = iid().with_law(InnovationLaw::new(LawKind::Rademacher, 4.0).unwrap());
        let a = m.sample(&rect(&[5, 6]), 11).unwrap();
        assert!(a.values().iter().all(|&v| v == 2.0 || v == -2.0));
        assert_eq!(a, m.sample(&rect(&[5, 6]), 11).unwrap());
        assert_ne!(a, m.sample(&rect(&[5, 6]), 12).unwrap());
    }

    #[test]
    fn uniform_draws_respect_bounds() {
        let law = InnovationLaw::new(LawKind::UniformCentered, 1.0).unwrap();
        let mut rng = replicate_rng(3, 0);
        let half = 3f64.sqrt();
        for _ in 0..1000 {
            let v = law.draw(&mut rng);
            assert!(v.abs() <= half);
        }
    }

    #[test]
    fn sample_mean_is_centered() {
        let m = iid().with_law(InnovationLaw::gaussian(1.0).unwrap());
        let r = rect(&[1, 1]);
        let reps = 100_000u64;
        let mean = (0..reps).map(|s| m.sample(&r, s).unwrap().total()).sum::<f64>() / reps as f64;
        assert!(mean.abs() < 4.0 / (reps as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn sample_prefix_sums_match_subrectangle_totals() {
        let s = z2().sample(&rect(&[6, 5]), 5).unwrap();
        let table = s.prefix_sums();
        let sub = rect(&[4, 3]);
        let direct: f64 = sub.iter().map(|u| s.get(&u)).sum();
        assert!((table.prefix(sub.upper()).unwrap() - direct).abs() < 1e-12);
        assert!((table.total().unwrap() - s.total()).abs() < 1e-12);
    }
}
