//! Central finite-difference gradient checker.
//!
//! Anything that exposes a flat parameter vector and a scalar loss can be
//! checked: the analytic gradient is compared against
//! `(L(th + h) - L(th - h)) / 2h` parameter by parameter, with relative error
//! `|analytic - numeric| / (|analytic| + 1e-8)`. Intended for desk-scale
//! fragments (<= ~1e3 parameters) with dropout inactive.

use crate::error::{CmcoError, Result};

/// A differentiable fragment under test.
pub trait GradCheckable {
    /// Names aligned with the flat parameter vector, one per entry.
    /// Implementations usually expand a block name with an index suffix.
    fn param_names(&self) -> Vec<String>;
    fn params(&self) -> Vec<f64>;
    fn set_params(&mut self, values: &[f64]);
    /// Loss at the current parameters.
    fn loss(&mut self) -> Result<f64>;
    /// Loss and analytic gradient at the current parameters.
    fn loss_and_grad(&mut self) -> Result<(f64, Vec<f64>)>;
}

#[derive(Debug, Clone)]
pub struct ParamEntry {
    pub name: String,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub worst: Option<ParamEntry>,
    /// Entries exceeding the tolerance.
    pub failures: Vec<ParamEntry>,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Check every parameter of `fragment` against central differences with the
/// given step, failing entries over `tol`.
pub fn grad_check(
    fragment: &mut dyn GradCheckable,
    step: f64,
    tol: f64,
) -> Result<GradCheckReport> {
    let base = fragment.params();
    let names = fragment.param_names();
    if names.len() != base.len() {
        return Err(CmcoError::shape(
            "grad_check",
            format!("{} names for {} parameters", names.len(), base.len()),
        ));
    }
    let (_, analytic) = fragment.loss_and_grad()?;
    if analytic.len() != base.len() {
        return Err(CmcoError::shape(
            "grad_check",
            format!("gradient len {} vs {} parameters", analytic.len(), base.len()),
        ));
    }

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst: None,
        failures: Vec::new(),
        checked: base.len(),
    };
    let mut work = base.clone();
    for idx in 0..base.len() {
        work[idx] = base[idx] + step;
        fragment.set_params(&work);
        let up = fragment.loss()?;
        work[idx] = base[idx] - step;
        fragment.set_params(&work);
        let down = fragment.loss()?;
        work[idx] = base[idx];

        let numeric = (up - down) / (2.0 * step);
        let rel = (analytic[idx] - numeric).abs() / (analytic[idx].abs() + 1e-8);
        let entry = ParamEntry {
            name: names[idx].clone(),
            analytic: analytic[idx],
            numeric,
            rel_err: rel,
        };
        if rel > report.max_rel_err {
            report.max_rel_err = rel;
            report.worst = Some(entry.clone());
        }
        if rel > tol {
            report.failures.push(entry);
        }
    }
    fragment.set_params(&base);

    if !report.failures.is_empty() {
        let listed: Vec<String> = report
            .failures
            .iter()
            .take(8)
            .map(|f| format!("{} (rel {:.3e})", f.name, f.rel_err))
            .collect();
        return Err(CmcoError::GradCheckFailure(format!(
            "{}/{} parameters over tol {:.1e}: {}",
            report.failures.len(),
            report.checked,
            tol,
            listed.join(", ")
        )));
    }
    Ok(report)
}

/// Expand a block name into one name per flat entry.
pub fn indexed_names(block: &str, len: usize) -> Vec<String> {
    (0..len).map(|i| format!("{block}[{i}]")).collect()
}
