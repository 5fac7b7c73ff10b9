//! Text format for kernels.
//!
//! ```text
//! # linear: j1 ... jd : coef
//! 0 0 : 1.0
//! 1 1 : 1.0
//! # volterra: u1 ... ud | v1 ... vd : coef
//! 1 0 | 0 1 : 1.0
//! ```
//!
//! Blank lines and `#` comments are ignored. Numbers always use `.` as the
//! decimal point.

use crate::error::{Error, Result};
use crate::index::MultiIndex;
use crate::models::{Kernel, LinearKernel, VolterraKernel};

enum Line {
    Linear(MultiIndex, f64),
    Volterra(MultiIndex, MultiIndex, f64),
}

fn parse_coords(text: &str, line: usize) -> Result<MultiIndex> {
    let coords = text
        .split_whitespace()
        .map(|t| {
            t.parse::<i64>().map_err(|e| Error::Parse { line, message: format!("bad index `{t}`: {e}") })
        })
        .collect::<Result<Vec<_>>>()?;
    if coords.is_empty() {
        return Err(Error::Parse { line, message: "missing index".into() });
    }
    Ok(MultiIndex::from(coords))
}

fn parse_line(raw: &str, line: usize) -> Result<Option<Line>> {
    let body = raw.split('#').next().unwrap_or("").trim();
    if body.is_empty() {
        return Ok(None);
    }
    let (lhs, coef) = body
        .rsplit_once(':')
        .ok_or_else(|| Error::Parse { line, message: format!("missing `:` before coefficient in `{body}`") })?;
    let coef_text = coef.trim();
    let coef = coef_text
        .parse::<f64>()
        .map_err(|e| Error::Parse { line, message: format!("bad coefficient `{coef_text}`: {e}") })?;
    if !coef.is_finite() {
        return Err(Error::Parse { line, message: format!("coefficient `{coef_text}` is not finite") });
    }
    Ok(Some(match lhs.split_once('|') {
        None => Line::Linear(parse_coords(lhs, line)?, coef),
        Some((u, v)) => {
            let u = parse_coords(u, line)?;
            let v = parse_coords(v, line)?;
            if u.dim() != v.dim() {
                return Err(Error::Parse { line, message: "volterra pair with unequal dimensions".into() });
            }
            Line::Volterra(u, v, coef)
        }
    }))
}

/// Parses a kernel; `dim`, when given, must agree with every entry. A file
/// with no entries needs `dim` and yields an empty linear kernel.
pub fn parse_kernel(text: &str, dim: Option<usize>) -> Result<Kernel> {
    let mut linear = Vec::new();
    let mut volterra = Vec::new();
    let mut found_dim = dim;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let Some(parsed) = parse_line(raw, line)? else { continue };
        let d = match &parsed {
            Line::Linear(j, _) => j.dim(),
            Line::Volterra(u, _, _) => u.dim(),
        };
        match found_dim {
            Some(expected) if expected != d => {
                return Err(Error::Parse { line, message: format!("expected dimension {expected}, found {d}") })
            }
            _ => found_dim = Some(d),
        }
        match parsed {
            Line::Linear(j, a) => linear.push((line, j, a)),
            Line::Volterra(u, v, a) => volterra.push((line, u, v, a)),
        }
        if !linear.is_empty() && !volterra.is_empty() {
            return Err(Error::Parse { line, message: "mixes linear and volterra entries".into() });
        }
    }
    let dim = found_dim.ok_or_else(|| Error::Parse { line: 0, message: "empty kernel without a dimension".into() })?;
    let at = |line: usize| move |e: Error| Error::Parse { line, message: e.to_string() };
    if !volterra.is_empty() {
        let mut entries = Vec::new();
        for (line, u, v, a) in volterra {
            VolterraKernel::new(dim, [((u.clone(), v.clone()), a)]).map_err(at(line))?;
            if entries.iter().any(|((a, b), _)| *a == u && *b == v) {
                return Err(Error::Parse { line, message: format!("duplicate entry {u}|{v}") });
            }
            entries.push(((u, v), a));
        }
        return Ok(Kernel::Volterra(VolterraKernel::new(dim, entries)?));
    }
    let mut entries = Vec::new();
    for (line, j, a) in linear {
        LinearKernel::new(dim, [(j.clone(), a)]).map_err(at(line))?;
        if entries.iter().any(|(k, _)| *k == j) {
            return Err(Error::Parse { line, message: format!("duplicate entry {j}") });
        }
        entries.push((j, a));
    }
    Ok(Kernel::Linear(LinearKernel::new(dim, entries)?))
}

fn coords_text(m: &MultiIndex) -> String {
    m.coords().iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ")
}

/// One line per entry in the format accepted by [`parse_kernel`].
pub fn kernel_lines(kernel: &Kernel) -> Vec<String> {
    match kernel {
        Kernel::Linear(k) => k.entries().map(|(j, a)| format!("{} : {a}", coords_text(j))).collect(),
        Kernel::Volterra(k) => k
            .entries()
            .map(|((u, v), a)| format!("{} | {} : {a}", coords_text(u), coords_text(v)))
            .collect(),
    }
}
