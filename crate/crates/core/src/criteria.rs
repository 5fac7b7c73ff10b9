//! Projective criteria for ortho-martingale approximation.
//!
//! With `1 = (1,…,1)` and `S_n = Σ_{1<=u<=n} X_u`, the quantities
//! evaluated here are
//!
//! * `P_1(S_j)` and its Cesàro mean `|n|⁻¹ Σ_{j<=n} P_1(S_j)`, whose limit
//!   is the martingale difference `D` at `1`;
//! * `|n|⁻¹ Σ_{j<=n} ‖P_1(S_j) − D‖²`;
//! * the regularity terms `|n|⁻¹ ‖E_{n_j}(S_n)‖²` where `n_j` is `n` with
//!   coordinate `j` set to zero;
//! * `|n|⁻¹ ‖S_n‖²` against `‖D‖²`;
//! * the approximation error `|n|⁻¹ ‖S_n − M_n‖²` with
//!   `M_n = Σ_{1<=u<=n} D_u`.
//!
//! All of them are exact (up to floating-point rounding) for finite kernels.
//! Limits are judged on a finite ladder of growing rectangles; see
//! [`Trend`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::algebra::{cond_expect, norm2, project, shift, Expansion, Monomial};
use crate::error::{check_dim, Error, Result};
use crate::index::{IndexBox, MultiIndex, Rectangle};
use crate::models::{FieldModel, Kernel, DEFAULT_TERM_BUDGET};
use crate::prefix::PrefixTable;

/// Default relative tolerance for ladder verdicts.
pub const DEFAULT_TOLERANCE: f64 = 1e-2;

/// Relative size below which a ladder value is treated as an exact zero.
pub const ROUNDING_FLOOR: f64 = 1e-12;

/// `P_1(S_j)` computed literally: build `S_j`, then project at `1`.
pub fn projection_of_sums_direct(model: &FieldModel, j: &MultiIndex) -> Result<Expansion> {
    let rect = Rectangle::new(j.clone())?;
    project(&model.partial_sum(&rect)?, &MultiIndex::ones(model.dim()))
}

/// `M_n = Σ_{1<=u<=n} shift(D, u − 1)`.
pub fn build_martingale(d: &Expansion, n: &Rectangle) -> Result<Expansion> {
    check_dim(d.dim(), n.dim())?;
    let one = MultiIndex::ones(n.dim());
    let mut out = Expansion::zero(d.dim());
    for u in n.iter() {
        out += &shift(d, &(&u - &one))?;
    }
    Ok(out)
}

/// Sum over the nonempty subsets `A` of axes of `(−1)^{|A|+1} E_{n^A}(S)`,
/// `n^A` being `n` with the coordinates in `A` set to zero. For `S` that is
/// `F_n`-measurable this is `S − Σ_{1<=i<=n} P_i(S)`.
pub fn remainder_expansion(s: &Expansion, n: &MultiIndex) -> Result<Expansion> {
    check_dim(s.dim(), n.dim())?;
    let d = n.dim();
    let cutoffs: Vec<(MultiIndex, i64)> = (1u32..(1 << d))
        .map(|mask| {
            let cut = MultiIndex::new((0..d).map(|a| if mask >> a & 1 == 1 { 0 } else { n.get(a) }));
            let sign = if mask.count_ones() % 2 == 1 { 1 } else { -1 };
            (cut, sign)
        })
        .collect();
    let mut out = Expansion::zero(d);
    for (m, c) in s.terms() {
        let mult: i64 = cutoffs.iter().filter(|(cut, _)| m.measurable_at(cut)).map(|(_, s)| s).sum();
        if mult != 0 {
            out.add_term(m.clone(), mult as f64 * c);
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    CesaroLimit,
    UserSupplied,
}

/// Martingale difference `D` at the base point `1`.
#[derive(Clone, Debug)]
pub struct MartingaleCandidate {
    d_expansion: Expansion,
    provenance: Provenance,
    distances: Vec<f64>,
    support_stable: bool,
}

impl MartingaleCandidate {
    /// Accepts `d` only if `P_1(d) = d`.
    pub fn user_supplied(d: Expansion) -> Result<Self> {
        let one = MultiIndex::ones(d.dim());
        if project(&d, &one)? != d {
            return Err(Error::NotMartingaleDifference(one));
        }
        Ok(MartingaleCandidate { d_expansion: d, provenance: Provenance::UserSupplied, distances: vec![], support_stable: true })
    }

    pub fn expansion(&self) -> &Expansion {
        &self.d_expansion
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// `‖C_k − C_{k−1}‖` between successive Cesàro means on the ladder.
    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    /// The monomial set did not change over the last two ladder steps.
    pub fn support_stable(&self) -> bool {
        self.support_stable
    }

    /// Successive distances fail to shrink: the ladder gives no evidence
    /// that the Cesàro means converge.
    pub fn no_convergence_evidence(&self) -> bool {
        match self.distances.last() {
            Some(&last) if last > 0.0 => self.distances.windows(2).any(|w| w[1] >= w[0]),
            _ => false,
        }
    }
}

/// Both sides of the orthogonal decomposition of `‖S_n − M_n‖²`.
#[derive(Clone, Debug, Serialize)]
pub struct DecompositionCheck {
    /// `‖S_n − M_n‖²`.
    pub error: f64,
    /// `Σ_{i<=n} ‖P_i(S_n) − D_i‖²`.
    pub projective: f64,
    /// `Σ_{i<=n} ‖P_1(S_i) − D‖²`, the same sum after stationarity.
    pub projective_stationary: f64,
    /// `‖R_n‖²` with `R_n = S_n − Σ_{i<=n} P_i(S_n)`.
    pub remainder: f64,
    /// `‖R_n‖²` from conditional expectations alone: for `d = 2` the
    /// three-term norm identity, otherwise the norm of the alternating sum.
    pub remainder_formula: f64,
    /// `‖R_n − Σ_A ±E_{n^A}(S_n)‖²`.
    pub remainder_mismatch: f64,
}

impl DecompositionCheck {
    pub fn residual(&self) -> f64 {
        (self.error - (self.projective + self.remainder)).abs()
    }

    /// Largest discrepancy among all the identities, relative to
    /// `max(1, error)`.
    pub fn worst_relative(&self) -> f64 {
        let scale = self.error.max(1.0);
        [
            self.residual(),
            (self.projective - self.projective_stationary).abs(),
            (self.remainder - self.remainder_formula).abs(),
            self.remainder_mismatch,
        ]
        .into_iter()
        .fold(0.0, f64::max)
            / scale
    }
}

/// `E(S_n M_n)` computed directly and as `Σ_{u<=n} E(D P_1(S_u))`.
#[derive(Clone, Copy, Debug)]
pub struct CrossMoments {
    pub direct: f64,
    pub via_projections: f64,
    /// `E(D S_n)`.
    pub d_with_sum: f64,
    /// `E(D P_1(S_n))`.
    pub d_with_projection: f64,
}

/// Limit policy for one ladder sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Trend {
    /// Every value is exactly zero.
    Exact,
    /// Strictly decreasing over the last three steps and ending below the
    /// threshold.
    Decreasing,
    /// Settled at, or rising toward, a level above the threshold.
    Plateau,
    /// No evidence either way.
    Fail,
}

impl Trend {
    pub fn holds(self) -> bool {
        matches!(self, Trend::Exact | Trend::Decreasing)
    }

    /// Values at or below `floor` count as exact zeros.
    pub fn classify(values: &[f64], threshold: f64, floor: f64) -> Trend {
        let values: Vec<f64> = values.iter().map(|&v| if v.abs() <= floor { 0.0 } else { v }).collect();
        let Some(&last) = values.last() else { return Trend::Fail };
        if values.iter().all(|&v| v == 0.0) {
            return Trend::Exact;
        }
        let tail = &values[values.len() - values.len().min(3)..];
        let decreasing = tail.len() >= 2 && tail.windows(2).all(|w| w[1] < w[0]);
        if last <= threshold && (decreasing || tail.len() < 2) {
            return Trend::Decreasing;
        }
        let hi = tail.iter().copied().fold(f64::MIN, f64::max);
        let lo = tail.iter().copied().fold(f64::MAX, f64::min);
        let rising = tail.windows(2).all(|w| w[1] >= w[0]);
        if last > threshold && tail.len() >= 2 && (hi - lo <= 0.05 * hi || rising) {
            return Trend::Plateau;
        }
        Trend::Fail
    }

    fn combine(trends: &[Trend]) -> Trend {
        if trends.iter().all(|t| *t == Trend::Exact) {
            Trend::Exact
        } else if trends.iter().all(|t| t.holds()) {
            Trend::Decreasing
        } else if trends.contains(&Trend::Plateau) {
            Trend::Plateau
        } else {
            Trend::Fail
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Trend::Exact => "exact",
            Trend::Decreasing => "decreasing",
            Trend::Plateau => "plateau",
            Trend::Fail => "fail",
        }
    }
}

/// One ladder rectangle of a [`CriterionReport`].
#[derive(Clone, Debug, Serialize)]
pub struct CriterionRow {
    pub grid: Rectangle,
    pub defdlim2_avg: f64,
    pub regularity_norms: Vec<f64>,
    pub variance_ratio: f64,
    pub d_norm2: f64,
    /// `‖C_n‖²` for the Cesàro mean `C_n` at this rectangle.
    pub cesaro_norm2: f64,
    /// `‖C_n − D‖`.
    pub cesaro_distance: f64,
    pub error_per_cell: f64,
    pub remainder_per_cell: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Verdicts {
    pub defdlim2: Trend,
    pub regularity: Trend,
    /// `|n|⁻¹‖S_n‖² − ‖C_n‖²`, comparing the variance ratio with the
    /// running Cesàro candidate.
    pub variance: Trend,
    pub cesaro: Trend,
    pub approximation: Trend,
    /// Cesàro-mean condition together with the variance condition.
    pub cesaro_and_variance: bool,
    /// Projective condition together with regularity, and their sum (a
    /// bound on the error per cell) below the threshold.
    pub projective_and_regularity: bool,
    /// Projective condition together with the variance condition, with the
    /// same shared budget.
    pub projective_and_variance: bool,
    pub conclusion: String,
}

/// Coefficient-level diagnostics for the two model families.
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum CoefficientDiagnostics {
    Linear {
        /// `b_j` for `j` up to where it stops changing.
        b_table: Vec<(MultiIndex, f64)>,
        /// Cesàro means of `b_j` per ladder rectangle.
        b_cesaro: Vec<f64>,
        kernel_sum: f64,
    },
    Volterra {
        /// Closed-form `c_{n,w}` per ladder rectangle, as `(w, c)` pairs.
        tables: Vec<Vec<(MultiIndex, f64)>>,
        /// Cauchy gaps of the closed-form `c_{n,w}` table between
        /// successive ladder rectangles.
        literal_gaps: Vec<f64>,
        projected_gaps: Vec<f64>,
        /// The closed-form table and the projected coefficients differ.
        disagreement: bool,
        cross_terms: String,
    },
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionReport {
    pub dimension: usize,
    pub sigma2: f64,
    pub tolerance: f64,
    pub threshold: f64,
    pub candidate: String,
    pub provenance: Provenance,
    pub candidate_distances: Vec<f64>,
    pub support_stable: bool,
    pub no_convergence_evidence: bool,
    pub rows: Vec<CriterionRow>,
    pub verdicts: Verdicts,
    pub coefficients: CoefficientDiagnostics,
    pub flags: Vec<String>,
}

/// `P_1(X_u)` tabulated on the only box of `u` where it can be nonzero,
/// together with its prefix sums `P_1(S_j)`.
#[derive(Clone, Debug)]
struct ProjectedIncrements {
    bounds: IndexBox,
    increments: Vec<(MultiIndex, Expansion)>,
    prefix: PrefixTable<Expansion>,
}

impl ProjectedIncrements {
    fn new(model: &FieldModel) -> Result<Self> {
        let d = model.dim();
        let one = MultiIndex::ones(d);
        // X_u only involves sites u − offset; beyond 1 + max offset none of
        // them is F_1-measurable and every corner of P_1 vanishes.
        let hi = match model.kernel().offset_bounds() {
            Some((_, max)) => &one + &max,
            None => one.clone(),
        };
        let bounds = IndexBox::new(one.clone(), hi)?;
        let mut values = Vec::with_capacity(bounds.len());
        let mut increments = Vec::new();
        for u in bounds.iter() {
            let q = project(&model.term_expansion(&u)?, &one)?;
            if !q.is_zero() {
                increments.push((u.clone(), q.clone()));
            }
            values.push(q);
        }
        let prefix = PrefixTable::build(bounds.clone(), values)?;
        Ok(ProjectedIncrements { bounds, increments, prefix })
    }
}

/// Exact evaluation of the approximation criteria for one model.
#[derive(Clone, Debug)]
pub struct FieldCriteria<'a> {
    model: &'a FieldModel,
    increments: ProjectedIncrements,
    budget: usize,
}

impl<'a> FieldCriteria<'a> {
    pub fn new(model: &'a FieldModel) -> Result<Self> {
        Ok(FieldCriteria { model, increments: ProjectedIncrements::new(model)?, budget: DEFAULT_TERM_BUDGET })
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn model(&self) -> &FieldModel {
        self.model
    }

    fn sigma2(&self) -> f64 {
        self.model.sigma2()
    }

    fn one(&self) -> MultiIndex {
        MultiIndex::ones(self.model.dim())
    }

    fn partial_sum(&self, n: &Rectangle) -> Result<Expansion> {
        check_dim(self.model.dim(), n.dim())?;
        self.model.partial_sum_with_budget(n, self.budget)
    }

    /// `P_1(S_j)`, read from the prefix table of `P_1(X_u)`.
    pub fn projection_of_sums(&self, j: &MultiIndex) -> Result<Expansion> {
        check_dim(self.model.dim(), j.dim())?;
        if !self.one().leq(j) {
            return Err(Error::InvalidRectangle(j.clone()));
        }
        Ok(self.increments.prefix.prefix(j).cloned().unwrap_or_else(|| Expansion::zero(j.dim())))
    }

    /// `|n|⁻¹ Σ_{1<=j<=n} P_1(S_j)`.
    ///
    /// `P_1(X_u)` enters `P_1(S_j)` for every `j >= u`, i.e. for
    /// `Π (n_i − u_i + 1)` of the `j <= n`.
    pub fn cesaro_projection(&self, n: &Rectangle) -> Result<Expansion> {
        check_dim(self.model.dim(), n.dim())?;
        let cells = n.cells() as f64;
        let mut out = Expansion::zero(n.dim());
        for (u, q) in &self.increments.increments {
            if !u.leq(n.upper()) {
                continue;
            }
            let count: i64 = (0..n.dim()).map(|a| n.upper().get(a) - u.get(a) + 1).product();
            out.add_scaled(q, count as f64 / cells);
        }
        Ok(out)
    }

    /// Cesàro mean at the largest ladder rectangle, with the successive
    /// distances along the ladder.
    pub fn candidate_d(&self, ladder: &[Rectangle]) -> Result<MartingaleCandidate> {
        validate_ladder(ladder, self.model.dim())?;
        let means = ladder.iter().map(|n| self.cesaro_projection(n)).collect::<Result<Vec<_>>>()?;
        let distances = means
            .windows(2)
            .map(|w| norm2(&(&w[1] - &w[0]), self.sigma2()).map(f64::sqrt))
            .collect::<Result<Vec<_>>>()?;
        let support_stable = match means.len() {
            0 | 1 => true,
            k => means[k - 1].same_support(&means[k - 2]),
        };
        let d = means.into_iter().last().expect("ladder is nonempty");
        let one = self.one();
        if project(&d, &one)? != d {
            return Err(Error::NotMartingaleDifference(one));
        }
        Ok(MartingaleCandidate { d_expansion: d, provenance: Provenance::CesaroLimit, distances, support_stable })
    }

    /// `|n|⁻¹ Σ_{1<=j<=n} ‖P_1(S_j) − D‖²`.
    ///
    /// `P_1(S_j)` only depends on `j` clamped to the box of nonzero
    /// increments, so each clamped value is weighted by how many `j` map to it.
    pub fn defdlim2_average(&self, d: &Expansion, n: &Rectangle) -> Result<f64> {
        check_dim(self.model.dim(), n.dim())?;
        check_dim(d.dim(), n.dim())?;
        let hi = self.increments.bounds.hi().meet(n.upper());
        let clamp_box = IndexBox::new(self.one(), hi)?;
        let box_hi = self.increments.bounds.hi();
        let mut total = 0.0;
        for c in clamp_box.iter() {
            let weight: i64 = (0..n.dim())
                .map(|a| if c.get(a) == box_hi.get(a) { n.upper().get(a) - box_hi.get(a) + 1 } else { 1 })
                .product();
            let p = self.projection_of_sums(&c)?;
            total += weight as f64 * norm2(&(&p - d), self.sigma2())?;
        }
        Ok(total / n.cells() as f64)
    }

    fn regularity_from_sum(&self, s: &Expansion, n: &Rectangle) -> Result<Vec<f64>> {
        let cells = n.cells() as f64;
        (0..n.dim())
            .map(|axis| {
                let cut = n.upper().with_coord(axis, 0);
                Ok(norm2(&cond_expect(s, &cut)?, self.sigma2())? / cells)
            })
            .collect()
    }

    /// `|n|⁻¹ ‖E_{n_j}(S_n)‖²` for each axis `j`.
    pub fn regularity_norms(&self, n: &Rectangle) -> Result<Vec<f64>> {
        let s = self.partial_sum(n)?;
        self.regularity_from_sum(&s, n)
    }

    /// `(|n|⁻¹ ‖S_n‖², ‖D‖²)`.
    pub fn variance_ratio_check(&self, d: &Expansion, n: &Rectangle) -> Result<(f64, f64)> {
        let s = self.partial_sum(n)?;
        Ok((norm2(&s, self.sigma2())? / n.cells() as f64, norm2(d, self.sigma2())?))
    }

    /// `|n|⁻¹ ‖S_n − M_n‖²`.
    pub fn approx_error(&self, d: &Expansion, n: &Rectangle) -> Result<f64> {
        let s = self.partial_sum(n)?;
        let m = build_martingale(d, n)?;
        Ok(norm2(&(&s - &m), self.sigma2())? / n.cells() as f64)
    }

    /// `|n|⁻¹ ‖R_n‖²`.
    pub fn remainder_per_cell(&self, n: &Rectangle) -> Result<f64> {
        let s = self.partial_sum(n)?;
        Ok(norm2(&remainder_expansion(&s, n.upper())?, self.sigma2())? / n.cells() as f64)
    }

    /// Evaluates every piece of the orthogonal decomposition of
    /// `‖S_n − M_n‖²` independently. Costs `O(|n| · |S_n|)`.
    pub fn decomposition(&self, d: &Expansion, n: &Rectangle) -> Result<DecompositionCheck> {
        let sigma2 = self.sigma2();
        let s = self.partial_sum(n)?;
        let m = build_martingale(d, n)?;
        let error = norm2(&(&s - &m), sigma2)?;
        let one = self.one();
        let mut projective = 0.0;
        let mut projected_total = Expansion::zero(n.dim());
        for i in n.iter() {
            let p = project(&s, &i)?;
            let d_i = shift(d, &(&i - &one))?;
            projective += norm2(&(&p - &d_i), sigma2)?;
            projected_total += &p;
        }
        let r = &s - &projected_total;
        let remainder = norm2(&r, sigma2)?;
        let r_alt = remainder_expansion(&s, n.upper())?;
        let remainder_formula = if n.dim() == 2 {
            let (a, b) = (n.upper().get(0), n.upper().get(1));
            let e = |c: [i64; 2]| -> Result<f64> { norm2(&cond_expect(&s, &MultiIndex::from(c))?, sigma2) };
            e([a, 0])? + e([0, b])? - e([0, 0])?
        } else {
            norm2(&r_alt, sigma2)?
        };
        let remainder_mismatch = norm2(&(&r - &r_alt), sigma2)?;
        let projective_stationary = self.defdlim2_average(d, n)? * n.cells() as f64;
        Ok(DecompositionCheck { error, projective, projective_stationary, remainder, remainder_formula, remainder_mismatch })
    }

    /// The second-moment identities behind the variance route.
    pub fn cross_moments(&self, d: &Expansion, n: &Rectangle) -> Result<CrossMoments> {
        let sigma2 = self.sigma2();
        let s = self.partial_sum(n)?;
        let m = build_martingale(d, n)?;
        let direct = crate::algebra::inner(&s, &m, sigma2)?;
        let mut via_projections = 0.0;
        for u in n.iter() {
            via_projections += crate::algebra::inner(d, &self.projection_of_sums(&u)?, sigma2)?;
        }
        Ok(CrossMoments {
            direct,
            via_projections,
            d_with_sum: crate::algebra::inner(d, &s, sigma2)?,
            d_with_projection: crate::algebra::inner(d, &self.projection_of_sums(n.upper())?, sigma2)?,
        })
    }

    /// Evaluates every condition along `ladder` against `candidate`.
    pub fn report(
        &self,
        ladder: &[Rectangle],
        candidate: &MartingaleCandidate,
        tolerance: f64,
    ) -> Result<CriterionReport> {
        validate_ladder(ladder, self.model.dim())?;
        if !(tolerance > 0.0) {
            return Err(Error::Config(format!("tolerance must be positive, got {tolerance}")));
        }
        let sigma2 = self.sigma2();
        let d = candidate.expansion();
        check_dim(self.model.dim(), d.dim())?;
        let d_norm2 = norm2(d, sigma2)?;
        let mut rows = Vec::with_capacity(ladder.len());
        for n in ladder {
            let cells = n.cells() as f64;
            let s = self.partial_sum(n)?;
            let m = build_martingale(d, n)?;
            let cesaro = self.cesaro_projection(n)?;
            rows.push(CriterionRow {
                grid: n.clone(),
                defdlim2_avg: self.defdlim2_average(d, n)?,
                regularity_norms: self.regularity_from_sum(&s, n)?,
                variance_ratio: norm2(&s, sigma2)? / cells,
                d_norm2,
                cesaro_norm2: norm2(&cesaro, sigma2)?,
                cesaro_distance: norm2(&(&cesaro - d), sigma2)?.sqrt(),
                error_per_cell: norm2(&(&s - &m), sigma2)? / cells,
                remainder_per_cell: norm2(&remainder_expansion(&s, n.upper())?, sigma2)? / cells,
            });
        }

        let marginal = norm2(&self.model.term_expansion(&self.one())?, sigma2)?;
        let final_ratio = rows.last().map(|r| r.variance_ratio).unwrap_or(0.0);
        let scale = if final_ratio.max(marginal) > 0.0 { final_ratio.max(marginal) } else { 1.0 };
        let threshold = tolerance * scale;
        let floor = ROUNDING_FLOOR * scale;

        let column = |f: &dyn Fn(&CriterionRow) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
        let defdlim2 = Trend::classify(&column(&|r| r.defdlim2_avg), threshold, floor);
        let regularity = Trend::combine(
            &(0..self.model.dim())
                .map(|a| Trend::classify(&column(&|r| r.regularity_norms[a]), threshold, floor))
                .collect::<Vec<_>>(),
        );
        let variance = Trend::classify(&column(&|r| (r.variance_ratio - r.cesaro_norm2).abs()), threshold, floor);
        let cesaro = Trend::classify(&column(&|r| r.cesaro_distance * r.cesaro_distance), threshold, floor);
        let approximation = Trend::classify(&column(&|r| r.error_per_cell), threshold, floor);

        // The error per cell is bounded by defdlim2 plus the regularity
        // terms, so the conjunction asks for the sum to be small as well.
        let last = rows.last().expect("ladder is nonempty");
        let regularity_budget = last.defdlim2_avg + last.regularity_norms.iter().sum::<f64>();
        let projective_and_regularity = defdlim2.holds() && regularity.holds() && regularity_budget <= threshold;
        let projective_and_variance = defdlim2.holds() && variance.holds();
        let conclusion = if [defdlim2, regularity, approximation].iter().all(|t| *t == Trend::Exact) {
            "approximation holds (exact)"
        } else if projective_and_regularity {
            "approximation holds"
        } else if defdlim2 == Trend::Plateau || regularity == Trend::Plateau {
            "approximation fails"
        } else {
            "inconclusive"
        };
        let verdicts = Verdicts {
            defdlim2,
            regularity,
            variance,
            cesaro,
            approximation,
            cesaro_and_variance: cesaro.holds() && variance.holds(),
            projective_and_regularity,
            projective_and_variance,
            conclusion: conclusion.to_string(),
        };

        let mut flags = Vec::new();
        if candidate.no_convergence_evidence() {
            flags.push("no-convergence-evidence".to_string());
        }
        if !candidate.support_stable() {
            flags.push("support-not-stabilized".to_string());
        }
        let coefficients = match self.model.kernel() {
            Kernel::Linear(_) => CoefficientDiagnostics::Linear {
                b_table: self
                    .increments
                    .bounds
                    .iter()
                    .map(|j| Ok((j.clone(), linear_b(self.model, &j, BConvention::ShiftedOrigin)?)))
                    .collect::<Result<_>>()?,
                b_cesaro: linear_cesaro(self.model, ladder, BConvention::ShiftedOrigin)?,
                kernel_sum: linear_kernel_sum(self.model)?,
            },
            Kernel::Volterra(_) => {
                let last = ladder.last().expect("nonempty");
                let table = volterra_cnw(self, last)?;
                let tables = ladder
                    .iter()
                    .map(|n| Ok(volterra_literal_table(self.model, n)?.into_iter().collect()))
                    .collect::<Result<_>>()?;
                let mut literal_gaps = Vec::new();
                let mut projected_gaps = Vec::new();
                for w in ladder.windows(2) {
                    let gap = volterra_cauchy_gap(self, &w[1], &w[0])?;
                    literal_gaps.push(gap.literal);
                    projected_gaps.push(gap.projected);
                }
                if table.disagreement {
                    flags.push("volterra-table-disagreement".to_string());
                }
                CoefficientDiagnostics::Volterra {
                    tables,
                    literal_gaps,
                    projected_gaps,
                    disagreement: table.disagreement,
                    cross_terms: table.cross_terms.to_string(),
                }
            }
        };

        Ok(CriterionReport {
            dimension: self.model.dim(),
            sigma2,
            tolerance,
            threshold,
            candidate: d.to_string(),
            provenance: candidate.provenance(),
            candidate_distances: candidate.distances().to_vec(),
            support_stable: candidate.support_stable(),
            no_convergence_evidence: candidate.no_convergence_evidence(),
            rows,
            verdicts,
            coefficients,
            flags,
        })
    }
}

/// Ladders must be nonempty, of the model dimension, and strictly
/// increasing in every coordinate.
pub fn validate_ladder(ladder: &[Rectangle], dim: usize) -> Result<()> {
    if ladder.is_empty() {
        return Err(Error::InvalidLadder("ladder is empty".into()));
    }
    for r in ladder {
        check_dim(dim, r.dim())?;
    }
    for w in ladder.windows(2) {
        let strict = w[0].upper().coords().iter().zip(w[1].upper().coords()).all(|(a, b)| a < b);
        if !strict {
            return Err(Error::InvalidLadder(format!("{} does not strictly dominate {}", w[1], w[0])));
        }
    }
    Ok(())
}

/// Indexing of the cumulative kernel sums `b_j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BConvention {
    /// `b_j = Σ_{0<=k<=j−1} a_k`, so that `P_1(S_j) = b_j ξ_1`.
    ShiftedOrigin,
    /// `b_j = Σ_{1<=k<=j} a_k`.
    LiteralRange,
}

fn linear_kernel(model: &FieldModel) -> Result<&crate::models::LinearKernel> {
    match model.kernel() {
        Kernel::Linear(k) => Ok(k),
        Kernel::Volterra(_) => Err(Error::InvalidKernel("a linear model is required".into())),
    }
}

fn linear_kernel_sum(model: &FieldModel) -> Result<f64> {
    Ok(linear_kernel(model)?.entries().map(|(_, a)| a).sum())
}

/// `b_j` for a linear model.
pub fn linear_b(model: &FieldModel, j: &MultiIndex, convention: BConvention) -> Result<f64> {
    let k = linear_kernel(model)?;
    check_dim(k.dim(), j.dim())?;
    let lower = match convention {
        BConvention::ShiftedOrigin => MultiIndex::zeros(j.dim()),
        BConvention::LiteralRange => MultiIndex::ones(j.dim()),
    };
    let upper = match convention {
        BConvention::ShiftedOrigin => j - &MultiIndex::ones(j.dim()),
        BConvention::LiteralRange => j.clone(),
    };
    Ok(k.entries().filter(|(idx, _)| lower.leq(idx) && idx.leq(&upper)).map(|(_, a)| a).sum())
}

/// `|n|⁻¹ Σ_{1<=j<=n} b_j` for each ladder rectangle.
pub fn linear_cesaro(model: &FieldModel, ladder: &[Rectangle], convention: BConvention) -> Result<Vec<f64>> {
    let k = linear_kernel(model)?;
    ladder
        .iter()
        .map(|n| {
            check_dim(k.dim(), n.dim())?;
            let mut total = 0.0;
            for (idx, a) in k.entries() {
                // number of j <= n with b_j containing a_idx
                let count: i64 = (0..n.dim())
                    .map(|ax| {
                        let first = match convention {
                            BConvention::ShiftedOrigin => idx.get(ax) + 1,
                            BConvention::LiteralRange => idx.get(ax).max(1),
                        };
                        let lowest_ok = convention == BConvention::ShiftedOrigin || idx.get(ax) >= 1;
                        if lowest_ok {
                            (n.upper().get(ax) - first + 1).max(0)
                        } else {
                            0
                        }
                    })
                    .product();
                total += a * count as f64;
            }
            Ok(total / n.cells() as f64)
        })
        .collect()
}

/// The Volterra coefficient tables at rectangle `n`.
#[derive(Clone, Debug)]
pub struct VolterraCoefficients {
    /// Closed form `c_{n,w} = |n|⁻¹ Σ_{j<=n} Σ_{0<=k<=j−1} (a_{k,k−w} + a_{k−w,k})`,
    /// `w <= 0`; counts only monomials `ξ_1 ξ_{1+w}` that contain the base site.
    pub literal: BTreeMap<MultiIndex, f64>,
    /// Coefficients of `ξ_1 ξ_{1+w}` in the Cesàro projection.
    pub projected: BTreeMap<MultiIndex, f64>,
    /// Monomials of the Cesàro projection that avoid the base site.
    pub cross_terms: Expansion,
    pub disagreement: bool,
}

fn volterra_kernel(model: &FieldModel) -> Result<&crate::models::VolterraKernel> {
    match model.kernel() {
        Kernel::Volterra(k) => Ok(k),
        Kernel::Linear(_) => Err(Error::InvalidKernel("a volterra model is required".into())),
    }
}

/// Closed-form `c_{n,w}` from the kernel entries.
///
/// `a_{k,k−w}` with `w <= 0` is the entry `(u, v) = (k, k − w)`, so `k = u`
/// and `w = u − v` (needs `u <= v`); it is counted for every `j >= u + 1`.
/// The mirrored branch `a_{k−w,k}` is `k = v`, `w = v − u` with `v <= u`.
pub fn volterra_literal_table(model: &FieldModel, n: &Rectangle) -> Result<BTreeMap<MultiIndex, f64>> {
    let k = volterra_kernel(model)?;
    check_dim(k.dim(), n.dim())?;
    let cells = n.cells() as f64;
    let count = |first: &MultiIndex| -> i64 {
        (0..n.dim()).map(|a| (n.upper().get(a) - first.get(a)).max(0)).product()
    };
    let mut table: BTreeMap<MultiIndex, f64> = BTreeMap::new();
    for ((u, v), a) in k.entries() {
        if u.leq(v) {
            *table.entry(u - v).or_insert(0.0) += a * count(u) as f64 / cells;
        }
        if v.leq(u) {
            *table.entry(v - u).or_insert(0.0) += a * count(v) as f64 / cells;
        }
    }
    table.retain(|_, c| *c != 0.0);
    Ok(table)
}

/// Both coefficient tables and whether they disagree.
pub fn volterra_cnw(criteria: &FieldCriteria<'_>, n: &Rectangle) -> Result<VolterraCoefficients> {
    let model = criteria.model();
    let literal = volterra_literal_table(model, n)?;
    let one = MultiIndex::ones(model.dim());
    let cesaro = criteria.cesaro_projection(n)?;
    let mut projected = BTreeMap::new();
    let mut cross = Vec::new();
    for (m, c) in cesaro.terms() {
        let sites = m.sites();
        match sites.iter().position(|s| *s == one) {
            Some(pos) if sites.len() == 2 => {
                let other = &sites[1 - pos];
                *projected.entry(other - &one).or_insert(0.0) += c;
            }
            _ => cross.push((m.clone(), c)),
        }
    }
    let cross_terms = Expansion::from_terms(model.dim(), cross)?;
    let scale = 1.0 + literal.values().chain(projected.values()).map(|c| c.abs()).fold(0.0, f64::max);
    let keys: std::collections::BTreeSet<&MultiIndex> = literal.keys().chain(projected.keys()).collect();
    let tables_differ = keys.into_iter().any(|w| {
        let a = literal.get(w).copied().unwrap_or(0.0);
        let b = projected.get(w).copied().unwrap_or(0.0);
        (a - b).abs() > 1e-12 * scale
    });
    let disagreement = tables_differ || !cross_terms.is_zero();
    Ok(VolterraCoefficients { literal, projected, cross_terms, disagreement })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CauchyGap {
    /// `Σ_w (c_{n,w} − c_{m,w})²` over the closed-form tables.
    pub literal: f64,
    /// The same over all coefficients of the Cesàro projections.
    pub projected: f64,
}

/// Cauchy gap between rectangles `m <= n`.
pub fn volterra_cauchy_gap(criteria: &FieldCriteria<'_>, n: &Rectangle, m: &Rectangle) -> Result<CauchyGap> {
    let model = criteria.model();
    volterra_kernel(model)?;
    if !m.upper().leq(n.upper()) {
        return Err(Error::InvalidLadder(format!("{m} is not below {n}")));
    }
    let tn = volterra_literal_table(model, n)?;
    let tm = volterra_literal_table(model, m)?;
    let keys: std::collections::BTreeSet<&MultiIndex> = tn.keys().chain(tm.keys()).collect();
    let literal = keys
        .into_iter()
        .map(|w| {
            let diff = tn.get(w).copied().unwrap_or(0.0) - tm.get(w).copied().unwrap_or(0.0);
            diff * diff
        })
        .fold(0.0, |acc, x| acc + x);
    let diff = &criteria.cesaro_projection(n)? - &criteria.cesaro_projection(m)?;
    let projected = diff.terms().map(|(_, c)| c * c).fold(0.0, |acc, x| acc + x);
    Ok(CauchyGap { literal, projected })
}

/// Monomial `ξ_a` helper for callers assembling candidates by hand.
pub fn innovation_at(site: MultiIndex) -> Expansion {
    Expansion::from_terms(site.dim(), [(Monomial::single(site), 1.0)]).expect("single site")
}
