//! Replicated simulation of `S_n` and `M_n`.
//!
//! Replicate `r` draws its innovations from [`replicate_rng`]`(seed, r)`, so
//! every replicate is reproducible on its own: results do not depend on the
//! thread count, and running `2R` replicates reproduces the first `R`.
//! Replicates are collected in index order and reduced sequentially.

use rayon::prelude::*;
use serde::Serialize;
use smallvec::SmallVec;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::algebra::{norm2, project, Expansion};
use crate::error::{check_dim, Error, Result};
use crate::index::{IndexBox, MultiIndex, Rectangle};
use crate::models::{FieldModel, InnovationField};
use crate::prefix::PrefixTable;
use crate::rng::replicate_rng;

/// Largest innovation window one replicate may draw.
pub const DEFAULT_CELL_BUDGET: usize = 1 << 24;

/// KS critical-value coefficients: reject at level α when the statistic
/// exceeds `coef / √R`.
pub const KS_COEF_ALPHA_01: f64 = 1.63;
pub const KS_COEF_ALPHA_001: f64 = 1.95;

pub fn ks_critical(coef: f64, replicates: usize) -> f64 {
    coef / (replicates as f64).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct McSettings {
    pub replicates: usize,
    pub seed: u64,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl McSettings {
    pub fn new(replicates: usize, seed: u64) -> Self {
        McSettings { replicates, seed, threads: None }
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = Some(threads);
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ErrorEstimate {
    pub rect: Rectangle,
    pub replicates: usize,
    pub seed: u64,
    /// Mean of `(S_n − M_n)² / |n|`.
    pub mc_error_per_cell: f64,
    pub standard_error: f64,
    pub exact_value: Option<f64>,
}

impl ErrorEstimate {
    pub fn with_exact(mut self, exact: f64) -> Self {
        self.exact_value = Some(exact);
        self
    }

    /// `|estimate − exact|` in standard errors.
    pub fn z_score(&self) -> Option<f64> {
        let exact = self.exact_value?;
        let diff = (self.mc_error_per_cell - exact).abs();
        Some(if self.standard_error > 0.0 {
            diff / self.standard_error
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CltReport {
    pub rect: Rectangle,
    pub replicates: usize,
    pub seed: u64,
    /// Sample mean of `S_n / √|n|`.
    pub empirical_mean: f64,
    /// Unbiased sample variance of `S_n / √|n|`.
    pub empirical_variance: f64,
    /// `‖D‖²`.
    pub target_variance: f64,
    /// `E S_n² / |n|`, when the exact expansion fits the term budget.
    pub exact_variance_ratio: Option<f64>,
    /// Against `Normal(0, target_variance)`; absent when the target is
    /// degenerate.
    pub ks_statistic: Option<f64>,
    pub flags: Vec<String>,
}

/// Paired draws for one replicate: `S_n` and `M_n` for every rectangle.
#[derive(Clone, Debug, PartialEq)]
pub struct PairDraw {
    pub s: Vec<f64>,
    pub m: Vec<f64>,
}

struct CompiledD {
    terms: Vec<(SmallVec<[MultiIndex; 2]>, f64)>,
}

/// Precomputed windows for simulating `S` and `M` over a ladder.
pub struct PairSimulator<'a> {
    model: &'a FieldModel,
    d: CompiledD,
    ladder: Vec<Rectangle>,
    window: IndexBox,
    outer: Rectangle,
}

fn box_of(lo: MultiIndex, hi: MultiIndex) -> IndexBox {
    IndexBox::new(lo, hi).expect("dimensions agree")
}

impl<'a> PairSimulator<'a> {
    /// `ladder` rectangles all start at `1`; the largest (componentwise
    /// join) determines the innovation window.
    pub fn new(model: &'a FieldModel, d: &Expansion, ladder: &[Rectangle]) -> Result<Self> {
        Self::with_budget(model, d, ladder, DEFAULT_CELL_BUDGET)
    }

    pub fn with_budget(model: &'a FieldModel, d: &Expansion, ladder: &[Rectangle], budget: usize) -> Result<Self> {
        let dim = model.dim();
        check_dim(dim, d.dim())?;
        let first = ladder.first().ok_or_else(|| Error::InvalidLadder("ladder is empty".into()))?;
        let mut upper = first.upper().clone();
        for r in ladder {
            check_dim(dim, r.dim())?;
            upper = upper.join(r.upper());
        }
        let outer = Rectangle::new(upper)?;
        let one = MultiIndex::ones(dim);
        if project(d, &one)? != *d {
            return Err(Error::NotMartingaleDifference(one));
        }
        let mut window = model.field_window(&outer).unwrap_or_else(|| outer.as_box());
        if let Some((lo, hi)) = d.site_bounds() {
            let shifted_hi = &hi + &(outer.upper() - &one);
            window = window.hull(&box_of(lo, shifted_hi));
        }
        if window.len() > budget {
            return Err(Error::SimulationTooLarge { cells: window.len(), budget });
        }
        let terms = d.terms().map(|(m, c)| (m.sites().iter().map(|s| s - &one).collect(), c)).collect();
        Ok(PairSimulator { model, d: CompiledD { terms }, ladder: ladder.to_vec(), window, outer })
    }

    pub fn window(&self) -> &IndexBox {
        &self.window
    }

    fn d_at(&self, field: &InnovationField, u: &MultiIndex) -> f64 {
        self.d
            .terms
            .iter()
            .map(|(offsets, c)| c * offsets.iter().map(|o| field.get(&(o + u))).product::<f64>())
            .sum()
    }

    /// One replicate. `S` and `M` come from the same innovation draw.
    pub fn draw(&self, seed: u64, replicate: u64) -> PairDraw {
        let mut rng = replicate_rng(seed, replicate);
        let field = InnovationField::draw(self.model.law(), self.window.clone(), &mut rng);
        let bx = self.outer.as_box();
        let mut xs = Vec::with_capacity(bx.len());
        let mut ds = Vec::with_capacity(bx.len());
        for u in bx.iter() {
            xs.push(self.model.evaluate_at(&field, &u));
            ds.push(self.d_at(&field, &u));
        }
        let xs = PrefixTable::build(bx.clone(), xs).expect("shape matches");
        let ds = PrefixTable::build(bx, ds).expect("shape matches");
        let read = |t: &PrefixTable<f64>, r: &Rectangle| *t.prefix(r.upper()).expect("rectangle starts at 1");
        PairDraw {
            s: self.ladder.iter().map(|r| read(&xs, r)).collect(),
            m: self.ladder.iter().map(|r| read(&ds, r)).collect(),
        }
    }

    /// All replicates in index order.
    pub fn run(&self, settings: &McSettings) -> Result<Vec<PairDraw>> {
        let work = || -> Vec<PairDraw> {
            (0..settings.replicates as u64).into_par_iter().map(|r| self.draw(settings.seed, r)).collect()
        };
        match settings.threads {
            None => Ok(work()),
            Some(t) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(t.max(1))
                    .build()
                    .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
                Ok(pool.install(work))
            }
        }
    }
}

/// One draw of `(S_n, M_n)` for replicate 0 of `seed`.
pub fn simulate_pair(model: &FieldModel, d: &Expansion, rect: &Rectangle, seed: u64) -> Result<(f64, f64)> {
    let sim = PairSimulator::new(model, d, std::slice::from_ref(rect))?;
    let draw = sim.draw(seed, 0);
    Ok((draw.s[0], draw.m[0]))
}

fn mean_and_variance(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64, usize) {
    let n = xs.clone().count();
    let mean = xs.clone().sum::<f64>() / n as f64;
    let var = if n > 1 { xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
    (mean, var, n)
}

fn error_from_draws(draws: &[PairDraw], k: usize, rect: &Rectangle, settings: &McSettings) -> ErrorEstimate {
    let cells = rect.cells() as f64;
    let (mean, var, n) = mean_and_variance(draws.iter().map(|p| (p.s[k] - p.m[k]).powi(2) / cells));
    ErrorEstimate {
        rect: rect.clone(),
        replicates: settings.replicates,
        seed: settings.seed,
        mc_error_per_cell: mean,
        standard_error: (var / n as f64).sqrt(),
        exact_value: None,
    }
}

fn clt_from_draws(
    model: &FieldModel,
    draws: &[PairDraw],
    k: usize,
    rect: &Rectangle,
    target_variance: f64,
    settings: &McSettings,
) -> Result<CltReport> {
    let root = (rect.cells() as f64).sqrt();
    let samples: Vec<f64> = draws.iter().map(|p| p.s[k] / root).collect();
    let (mean, var, _) = mean_and_variance(samples.iter().copied());
    let mut flags = Vec::new();
    let ks = if target_variance > 0.0 {
        Some(ks_statistic(&samples, target_variance)?)
    } else {
        flags.push("degenerate-variance".to_string());
        None
    };
    let exact_variance_ratio = match model.exact_variance_ratio(rect) {
        Ok(v) => Some(v),
        Err(Error::TermBudgetExceeded { .. }) => {
            flags.push("exact-variance-skipped".to_string());
            None
        }
        Err(e) => return Err(e),
    };
    Ok(CltReport {
        rect: rect.clone(),
        replicates: settings.replicates,
        seed: settings.seed,
        empirical_mean: mean,
        empirical_variance: var,
        target_variance,
        exact_variance_ratio,
        ks_statistic: ks,
        flags,
    })
}

/// Monte Carlo mean of `(S_n − M_n)²/|n|` with its standard error.
pub fn estimate_error(
    model: &FieldModel,
    d: &Expansion,
    rect: &Rectangle,
    settings: &McSettings,
) -> Result<ErrorEstimate> {
    Ok(estimate_error_ladder(model, d, std::slice::from_ref(rect), settings)?.remove(0))
}

/// [`estimate_error`] for every ladder rectangle from shared draws.
pub fn estimate_error_ladder(
    model: &FieldModel,
    d: &Expansion,
    ladder: &[Rectangle],
    settings: &McSettings,
) -> Result<Vec<ErrorEstimate>> {
    if settings.replicates < 2 {
        return Err(Error::InvalidSamples(format!("need at least 2 replicates, got {}", settings.replicates)));
    }
    let draws = PairSimulator::new(model, d, ladder)?.run(settings)?;
    Ok(ladder.iter().enumerate().map(|(k, r)| error_from_draws(&draws, k, r, settings)).collect())
}

pub const MIN_CLT_REPLICATES: usize = 100;

/// Distribution of `S_n/√|n|` against `Normal(0, ‖D‖²)`.
pub fn clt_experiment(
    model: &FieldModel,
    d: &Expansion,
    rect: &Rectangle,
    settings: &McSettings,
) -> Result<CltReport> {
    let (mut reports, _) = clt_and_error_ladder(model, d, std::slice::from_ref(rect), settings)?;
    Ok(reports.remove(0))
}

/// CLT reports and error estimates for every ladder rectangle from one set
/// of draws.
pub fn clt_and_error_ladder(
    model: &FieldModel,
    d: &Expansion,
    ladder: &[Rectangle],
    settings: &McSettings,
) -> Result<(Vec<CltReport>, Vec<ErrorEstimate>)> {
    if settings.replicates < MIN_CLT_REPLICATES {
        return Err(Error::InvalidSamples(format!(
            "need at least {MIN_CLT_REPLICATES} replicates, got {}",
            settings.replicates
        )));
    }
    let target = norm2(d, model.sigma2())?;
    let draws = PairSimulator::new(model, d, ladder)?.run(settings)?;
    let mut clt = Vec::with_capacity(ladder.len());
    let mut err = Vec::with_capacity(ladder.len());
    for (k, r) in ladder.iter().enumerate() {
        clt.push(clt_from_draws(model, &draws, k, r, target, settings)?);
        err.push(error_from_draws(&draws, k, r, settings));
    }
    Ok((clt, err))
}

/// Two-sided Kolmogorov–Smirnov distance between the empirical CDF of
/// `samples` and `Normal(0, variance)`.
pub fn ks_statistic(samples: &[f64], variance: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidSamples("no samples".into()));
    }
    if !(variance > 0.0) || !variance.is_finite() {
        return Err(Error::InvalidSamples(format!("variance must be positive, got {variance}")));
    }
    if let Some(bad) = samples.iter().find(|x| !x.is_finite()) {
        return Err(Error::InvalidSamples(format!("non-finite sample {bad}")));
    }
    let normal = Normal::new(0.0, variance.sqrt()).map_err(|e| Error::InvalidSamples(e.to_string()))?;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, x) in sorted.iter().enumerate() {
        let f = normal.cdf(*x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{InnovationLaw, LinearKernel, VolterraKernel};
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn mi(c: &[i64]) -> MultiIndex {
        MultiIndex::new(c.iter().copied())
    }

    fn xi(c: &[i64]) -> Expansion {
        Expansion::innovation(mi(c), 1.0)
    }

    fn z1() -> FieldModel {
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

    fn r(a: i64, b: i64) -> Rectangle {
        Rectangle::new(mi(&[a, b])).unwrap()
    }

    #[test]
    fn exact_pairs() {
        for seed in 0..20 {
            let (s, m) = simulate_pair(&z1(), &xi(&[1, 1]), &r(3, 4), seed).unwrap();
            assert_eq!(s, m);
            let d = Expansion::product(mi(&[0, 1]), mi(&[1, 0]), 1.0).unwrap();
            let (s, m) = simulate_pair(&z3(), &d, &r(4, 3), seed).unwrap();
            assert_eq!(s, m);
        }
    }

    #[test]
    fn z2_pair_difference_matches_expansion() {
        let model = z2();
        let d = &xi(&[1, 1]) * 2.0;
        let rect = r(2, 2);
        let sim = PairSimulator::new(&model, &d, std::slice::from_ref(&rect)).unwrap();
        let mut rng = replicate_rng(7, 0);
        let field = InnovationField::draw(model.law(), sim.window().clone(), &mut rng);
        let v = |a: i64, b: i64| field.get(&mi(&[a, b]));
        let want = -v(1, 2) - v(2, 1) - v(2, 2) + v(0, 0) + v(0, 1) + v(1, 0);
        let (s, m) = simulate_pair(&model, &d, &rect, 7).unwrap();
        assert!((s - m - want).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_martingale_difference() {
        assert!(matches!(
            simulate_pair(&z1(), &xi(&[0, 1]), &r(2, 2), 1),
            Err(Error::NotMartingaleDifference(_))
        ));
    }

    #[test]
    fn window_budget_is_enforced() {
        let err = PairSimulator::with_budget(&z2(), &xi(&[1, 1]), &[r(10, 10)], 50).err().unwrap();
        assert!(matches!(err, Error::SimulationTooLarge { cells: 121, budget: 50 }));
    }

    #[test]
    fn iid_error_is_exactly_zero() {
        let e = estimate_error(&z1(), &xi(&[1, 1]), &r(5, 5), &McSettings::new(50, 3)).unwrap();
        assert_eq!(e.mc_error_per_cell, 0.0);
        assert_eq!(e.standard_error, 0.0);
        assert_eq!(e.with_exact(0.0).z_score(), Some(0.0));
    }

    #[test]
    fn prefix_property_and_thread_independence() {
        let model = z2();
        let d = &xi(&[1, 1]) * 2.0;
        let sim = PairSimulator::new(&model, &d, &[r(3, 3), r(5, 4)]).unwrap();
        let short = sim.run(&McSettings::new(40, 11).with_threads(1)).unwrap();
        let long = sim.run(&McSettings::new(80, 11).with_threads(4)).unwrap();
        assert_eq!(short[..], long[..40]);
    }

    #[test]
    fn replicate_minimums() {
        assert!(estimate_error(&z2(), &xi(&[1, 1]), &r(2, 2), &McSettings::new(1, 0)).is_err());
        assert!(clt_experiment(&z2(), &xi(&[1, 1]), &r(2, 2), &McSettings::new(99, 0)).is_err());
    }

    #[test]
    fn degenerate_target_skips_ks() {
        let rep = clt_experiment(&z2(), &Expansion::zero(2), &r(2, 2), &McSettings::new(100, 0)).unwrap();
        assert!(rep.ks_statistic.is_none());
        assert!(rep.flags.contains(&"degenerate-variance".to_string()));
    }

    #[test]
    fn ks_examples() {
        let n = 200;
        let normal = Normal::new(0.0, 1.0).unwrap();
        let quantiles: Vec<f64> = (1..=n).map(|i| normal.inverse_cdf((i as f64 - 0.5) / n as f64)).collect();
        let ks = ks_statistic(&quantiles, 1.0).unwrap();
        assert!(ks <= 0.5 / n as f64 + 1e-9, "{ks}");
        assert_eq!(ks_statistic(&[0.0; 10], 1.0).unwrap(), 0.5);
        let mut rng = replicate_rng(2024, 0);
        let draws: Vec<f64> = (0..10_000).map(|_| rng.sample(StandardNormal)).collect();
        assert!(ks_statistic(&draws, 1.0).unwrap() < ks_critical(KS_COEF_ALPHA_001, 10_000));
        assert!(ks_statistic(&[], 1.0).is_err());
        assert!(ks_statistic(&[1.0, f64::NAN], 1.0).is_err());
        assert!(ks_statistic(&[1.0], 0.0).is_err());
    }
}
