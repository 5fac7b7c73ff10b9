//! Config-driven experiments: `check`, `clt`, `oracle` and `construct-d`.
//!
//! ```toml
//! seed = 7
//! replicates = 2000
//! tolerance = 0.01
//! format = "csv"
//! output = "z2.csv"
//! ladder = [[2, 2], [4, 4], [8, 8]]
//!
//! [model]
//! kind = "linear"
//! dimension = 2
//! kernel = ["0 0 : 1", "1 1 : 1"]
//!
//! [innovation]
//! law = "rademacher"
//! sigma2 = 1.0
//! ```
//!
//! `kernel_file` may replace `kernel`; a relative path is resolved against
//! the directory of the config file. An optional `candidate` key holds a
//! user-supplied martingale difference in expansion text form.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::algebra::{cond_expect, inner, norm2, Expansion};
use crate::criteria::{validate_ladder, CriterionReport, FieldCriteria, MartingaleCandidate};
use crate::error::{Error, Result};
use crate::index::{IndexBox, MultiIndex, Rectangle};
use crate::kernel_file::parse_kernel;
use crate::models::{FieldModel, InnovationLaw, Kernel, LawKind};
use crate::montecarlo::{clt_and_error_ladder, CltReport, ErrorEstimate, McSettings};
use crate::oracle::{oracle_cond_deviation, oracle_expectation, oracle_inner, Window};

/// Largest oracle window used by [`run_oracle`].
pub const ORACLE_SITES: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    Structured,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "structured" | "json" => Ok(OutputFormat::Structured),
            other => Err(Error::Config(format!("unknown format `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Linear,
    Volterra,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub dimension: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_file: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InnovationSpec {
    pub law: LawKind,
    #[serde(default = "unit")]
    pub sigma2: f64,
}

fn unit() -> f64 {
    1.0
}

fn default_replicates() -> usize {
    1000
}

fn default_tolerance() -> f64 {
    crate::criteria::DEFAULT_TOLERANCE
}

fn default_format() -> OutputFormat {
    OutputFormat::Csv
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_format")]
    pub format: OutputFormat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub ladder: Vec<Rectangle>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate: Option<String>,
    /// Cap on stored monomials per exact expansion.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub term_budget: Option<usize>,
    pub model: ModelSpec,
    pub innovation: InnovationSpec,
}

impl RunConfig {
    /// Parses and validates config text. Relative kernel paths are resolved
    /// against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let mut config: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if let (Some(dir), Some(file)) = (base_dir, config.model.kernel_file.as_mut()) {
            if file.is_relative() {
                *file = dir.join(&*file);
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text, path.parent())
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.replicates < 1 {
            return bad("replicates must be at least 1".into());
        }
        if !(self.tolerance > 0.0) || !self.tolerance.is_finite() {
            return bad(format!("tolerance must be positive, got {}", self.tolerance));
        }
        if self.model.dimension == 0 {
            return bad("dimension must be at least 1".into());
        }
        match (&self.model.kernel, &self.model.kernel_file) {
            (Some(_), Some(_)) => return bad("give either `kernel` or `kernel_file`, not both".into()),
            (None, None) => return bad("missing `kernel` or `kernel_file`".into()),
            _ => {}
        }
        validate_ladder(&self.ladder, self.model.dimension).map_err(|e| Error::Config(e.to_string()))?;
        InnovationLaw::new(self.innovation.law, self.innovation.sigma2).map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    /// Builds the field model; kernel syntax errors keep their line number.
    pub fn build_model(&self) -> Result<FieldModel> {
        let text = match (&self.model.kernel, &self.model.kernel_file) {
            (Some(lines), _) => lines.join("\n"),
            (None, Some(path)) => std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read kernel file {}: {e}", path.display())))?,
            (None, None) => return Err(Error::Config("missing kernel".into())),
        };
        let kernel = parse_kernel(&text, Some(self.model.dimension))?;
        let kernel = match (self.model.kind, kernel) {
            (ModelKind::Linear, Kernel::Volterra(_)) => {
                return Err(Error::Config("model kind is linear but the kernel has volterra entries".into()))
            }
            (ModelKind::Volterra, Kernel::Linear(l)) if l.entries().next().is_some() => {
                return Err(Error::Config("model kind is volterra but the kernel has linear entries".into()))
            }
            (ModelKind::Volterra, Kernel::Linear(_)) => {
                Kernel::Volterra(crate::models::VolterraKernel::new(self.model.dimension, [])?)
            }
            (_, k) => k,
        };
        let law = InnovationLaw::new(self.innovation.law, self.innovation.sigma2)?;
        Ok(FieldModel::new(kernel, law))
    }

    pub fn criteria<'a>(&self, model: &'a FieldModel) -> Result<FieldCriteria<'a>> {
        let c = FieldCriteria::new(model)?;
        Ok(match self.term_budget {
            Some(b) => c.with_budget(b),
            None => c,
        })
    }

    /// The configured candidate, or the Cesàro mean over the ladder.
    pub fn candidate(&self, criteria: &FieldCriteria<'_>) -> Result<MartingaleCandidate> {
        match &self.candidate {
            Some(text) => {
                let e: Expansion = text.parse()?;
                let e = e.with_dim(self.model.dimension).map_err(|e| Error::Config(e.to_string()))?;
                MartingaleCandidate::user_supplied(e)
            }
            None => criteria.candidate_d(&self.ladder),
        }
    }
}

/// Maps an error to the process exit code.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Parse { .. } | Error::Config(_) => 2,
        Error::TermBudgetExceeded { .. } => 3,
        Error::OracleMismatch { .. } => 4,
        _ => 1,
    }
}

/// Shortest text that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn write_output(config: &RunConfig, rendered: &str) -> Result<()> {
    if let Some(path) = &config.output {
        std::fs::write(path, rendered)?;
    }
    Ok(())
}

fn csv_text(header: Vec<String>, rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub report: CriterionReport,
    pub rendered: String,
}

pub fn check_report(config: &RunConfig) -> Result<CriterionReport> {
    let model = config.build_model()?;
    let criteria = config.criteria(&model)?;
    let candidate = config.candidate(&criteria)?;
    criteria.report(&config.ladder, &candidate, config.tolerance)
}

pub fn render_check(report: &CriterionReport, format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Structured => Ok(serde_json::to_string_pretty(report)? + "\n"),
        OutputFormat::Csv => {
            let v = &report.verdicts;
            let verdicts = format!(
                "defdlim2={};regularity={};variance={};cesaro={};approximation={};overall={}",
                v.defdlim2.as_str(),
                v.regularity.as_str(),
                v.variance.as_str(),
                v.cesaro.as_str(),
                v.approximation.as_str(),
                v.conclusion
            );
            let mut header = vec!["grid".to_string(), "defdlim2_avg".to_string()];
            header.extend((1..=report.dimension).map(|j| format!("reg_{j}")));
            header.extend(
                [
                    "variance_ratio",
                    "d_norm2",
                    "cesaro_distance",
                    "error_per_cell",
                    "remainder_per_cell",
                    "verdicts",
                ]
                .map(String::from),
            );
            let rows = report
                .rows
                .iter()
                .map(|r| {
                    let mut row = vec![r.grid.label(), fmt_f64(r.defdlim2_avg)];
                    row.extend(r.regularity_norms.iter().map(|x| fmt_f64(*x)));
                    row.extend([
                        fmt_f64(r.variance_ratio),
                        fmt_f64(r.d_norm2),
                        fmt_f64(r.cesaro_distance),
                        fmt_f64(r.error_per_cell),
                        fmt_f64(r.remainder_per_cell),
                        verdicts.clone(),
                    ]);
                    row
                })
                .collect();
            csv_text(header, rows)
        }
    }
}

/// Evaluates every criterion along the ladder and writes the report.
pub fn run_check(config: &RunConfig) -> Result<CheckOutcome> {
    let report = check_report(config)?;
    let rendered = render_check(&report, config.format)?;
    write_output(config, &rendered)?;
    Ok(CheckOutcome { report, rendered })
}

#[derive(Clone, Debug)]
pub struct CltOutcome {
    pub clt: Vec<CltReport>,
    pub errors: Vec<ErrorEstimate>,
    pub rendered: String,
}

#[derive(Serialize)]
struct CltDocument<'a> {
    clt: &'a [CltReport],
    errors: &'a [ErrorEstimate],
}

pub fn render_clt(clt: &[CltReport], errors: &[ErrorEstimate], format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Structured => Ok(serde_json::to_string_pretty(&CltDocument { clt, errors })? + "\n"),
        OutputFormat::Csv => {
            let header = [
                "grid",
                "replicates",
                "seed",
                "emp_mean",
                "emp_var",
                "target_var",
                "ks",
                "mc_error",
                "mc_stderr",
                "exact_error",
                "flags",
            ]
            .map(String::from)
            .to_vec();
            let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
            let rows = clt
                .iter()
                .zip(errors)
                .map(|(c, e)| {
                    vec![
                        c.rect.label(),
                        c.replicates.to_string(),
                        c.seed.to_string(),
                        fmt_f64(c.empirical_mean),
                        fmt_f64(c.empirical_variance),
                        fmt_f64(c.target_variance),
                        opt(c.ks_statistic),
                        fmt_f64(e.mc_error_per_cell),
                        fmt_f64(e.standard_error),
                        opt(e.exact_value),
                        c.flags.join(";"),
                    ]
                })
                .collect();
            csv_text(header, rows)
        }
    }
}

/// CLT and Monte Carlo error for every ladder rectangle.
pub fn run_clt(config: &RunConfig, threads: Option<usize>) -> Result<CltOutcome> {
    let model = config.build_model()?;
    let criteria = config.criteria(&model)?;
    let candidate = config.candidate(&criteria)?;
    let d = candidate.expansion();
    let settings = McSettings { replicates: config.replicates, seed: config.seed, threads };
    if settings.replicates < crate::montecarlo::MIN_CLT_REPLICATES {
        return Err(Error::Config(format!(
            "clt needs at least {} replicates",
            crate::montecarlo::MIN_CLT_REPLICATES
        )));
    }
    let (clt, errors) = clt_and_error_ladder(&model, d, &config.ladder, &settings)?;
    let errors = errors
        .into_iter()
        .map(|e| match criteria.approx_error(d, &e.rect) {
            Ok(exact) => Ok(e.with_exact(exact)),
            Err(Error::TermBudgetExceeded { .. }) => Ok(e),
            Err(err) => Err(err),
        })
        .collect::<Result<Vec<_>>>()?;
    let rendered = render_clt(&clt, &errors, config.format)?;
    write_output(config, &rendered)?;
    Ok(CltOutcome { clt, errors, rendered })
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleSummary {
    pub rectangles: Vec<Rectangle>,
    pub checks: usize,
    pub lines: Vec<String>,
}

impl OracleSummary {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for line in &self.lines {
            let _ = writeln!(out, "{line}");
        }
        let _ = writeln!(out, "oracle: {} checks passed", self.checks);
        out
    }
}

fn oracle_rectangles(config: &RunConfig, model: &FieldModel) -> Vec<Rectangle> {
    let d = config.model.dimension;
    let mut pool: Vec<Rectangle> = [1, 2].iter().filter_map(|&k| Rectangle::square(d, k).ok()).collect();
    pool.extend(config.ladder.iter().cloned());
    pool.sort_by(|a, b| a.upper().cmp(b.upper()));
    pool.dedup();
    pool.retain(|r| model.field_window(r).map(|w| w.len()).unwrap_or(0) <= ORACLE_SITES);
    pool
}

fn mismatch(witness: &Expansion, cutoff: impl std::fmt::Display, detail: String) -> Error {
    Error::OracleMismatch { witness: witness.to_string(), cutoff: cutoff.to_string(), detail }
}

/// Cross-checks the algebra against Rademacher enumeration on every small
/// rectangle, using `cond` for conditional expectations.
pub fn run_oracle_with<F>(config: &RunConfig, cond: F) -> Result<OracleSummary>
where
    F: Fn(&Expansion, &MultiIndex) -> Result<Expansion>,
{
    let model = config.build_model()?;
    let criteria = config.criteria(&model)?;
    let candidate = config.candidate(&criteria)?;
    let dim = config.model.dimension;
    let rectangles = oracle_rectangles(config, &model);
    let cutoffs = IndexBox::new(MultiIndex::splat(dim, -2), MultiIndex::splat(dim, 2))?;
    let mut lines = Vec::new();
    let mut checks = 0;
    for rect in &rectangles {
        let s = model.partial_sum(rect)?;
        let m = crate::criteria::build_martingale(candidate.expansion(), rect)?;
        let both = Window::covering([&s, &m])?;
        let with_m = both.len() <= ORACLE_SITES;
        let window = if with_m { both } else { Window::covering([&s])? };
        let tol = |x: f64| 1e-12 * (1.0 + x.abs());

        let mean = oracle_expectation(&s, &window)?;
        if (mean - s.constant_term()).abs() > tol(mean) {
            return Err(mismatch(&s, "none", format!("E S = {mean} by enumeration, {} by algebra", s.constant_term())));
        }
        let second = oracle_inner(&s, &s, &window)?;
        let algebra = norm2(&s, 1.0)?;
        if (second - algebra).abs() > tol(algebra) {
            return Err(mismatch(&s, "none", format!("E S^2 = {second} by enumeration, {algebra} by algebra")));
        }
        checks += 2;
        let mut line = format!("{rect}: {} sites, E S = {}, E S^2 = {}", window.len(), fmt_f64(mean), fmt_f64(second));
        if with_m {
            let cross = oracle_inner(&s, &m, &window)?;
            let algebra = inner(&s, &m, 1.0)?;
            if (cross - algebra).abs() > tol(algebra) {
                return Err(mismatch(&s, "none", format!("E S M = {cross} by enumeration, {algebra} by algebra")));
            }
            checks += 1;
            let _ = write!(line, ", E S M = {}", fmt_f64(cross));
        }
        let mut cuts: Vec<MultiIndex> = cutoffs.iter().collect();
        cuts.push(rect.upper().clone());
        let witnesses: Vec<&Expansion> = if with_m { vec![&s, &m] } else { vec![&s] };
        for w in witnesses {
            for c in &cuts {
                let dev = oracle_cond_deviation(w, c, &window, &cond)?;
                let scale: f64 = 1.0 + w.terms().map(|(_, v)| v.abs()).sum::<f64>();
                if !(dev <= 1e-12 * scale) {
                    return Err(mismatch(w, c, format!("conditional expectation off by {dev}")));
                }
                checks += 1;
            }
        }
        let _ = write!(line, ", {} cutoffs ok", cuts.len());
        lines.push(line);
    }
    if rectangles.is_empty() {
        lines.push(format!("no rectangle has at most {ORACLE_SITES} innovation sites"));
    }
    Ok(OracleSummary { rectangles, checks, lines })
}

pub fn run_oracle(config: &RunConfig) -> Result<OracleSummary> {
    run_oracle_with(config, cond_expect)
}

#[derive(Clone, Debug, Serialize)]
pub struct ConstructOutcome {
    pub candidate: String,
    pub provenance: crate::criteria::Provenance,
    pub norm2: f64,
    pub distances: Vec<f64>,
    pub support_stable: bool,
    pub no_convergence_evidence: bool,
    #[serde(skip)]
    pub rendered: String,
}

/// The candidate `D` with its convergence distances along the ladder.
pub fn construct_d(config: &RunConfig) -> Result<ConstructOutcome> {
    let model = config.build_model()?;
    let criteria = config.criteria(&model)?;
    let c = config.candidate(&criteria)?;
    let mut out = ConstructOutcome {
        candidate: c.expansion().to_string(),
        provenance: c.provenance(),
        norm2: norm2(c.expansion(), model.sigma2())?,
        distances: c.distances().to_vec(),
        support_stable: c.support_stable(),
        no_convergence_evidence: c.no_convergence_evidence(),
        rendered: String::new(),
    };
    out.rendered = match config.format {
        OutputFormat::Structured => serde_json::to_string_pretty(&out)? + "\n",
        OutputFormat::Csv => {
            let mut t = format!("D = {}\n||D||^2 = {}\n", out.candidate, fmt_f64(out.norm2));
            for (w, dist) in config.ladder.windows(2).zip(&out.distances) {
                let _ = writeln!(t, "{} -> {}: {}", w[0], w[1], fmt_f64(*dist));
            }
            if out.no_convergence_evidence {
                t.push_str("flag: no-convergence-evidence\n");
            }
            if !out.support_stable {
                t.push_str("flag: support-not-stabilized\n");
            }
            t
        }
    };
    write_output(config, &out.rendered)?;
    Ok(out)
}
