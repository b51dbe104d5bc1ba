//! Central-difference gradient checking against the tape's analytic gradients.

use super::params::ParamStore;
use super::tape::{Tape, Var};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub coordinates: usize,
}

/// Compares the analytic gradient of `f` against central differences with
/// step `eps` for every coordinate of every parameter in `params`.
///
/// Relative error is `|a - n| / max(1, |a|, |n|)`.
pub fn grad_check<F>(params: &ParamStore, eps: f64, f: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::Invalid(format!(
            "grad_check step must be positive, got {eps}"
        )));
    }
    let mut tape = Tape::new();
    let root = f(&mut tape, params)?;
    tape.backward(root)?;
    let analytic = tape.param_grads(params);

    let eval = |store: &ParamStore| -> Result<f64> {
        let mut t = Tape::new();
        let r = f(&mut t, store)?;
        let v = t.value(r).item();
        if !v.is_finite() {
            return Err(Error::NonFinite { op: "grad_check" });
        }
        Ok(v)
    };

    let mut work = params.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        coordinates: 0,
    };
    for id in params.ids() {
        for k in 0..params.get(id).len() {
            let original = params.get(id).as_slice()[k];
            work.get_mut(id).as_mut_slice()[k] = original + eps;
            let plus = eval(&work)?;
            work.get_mut(id).as_mut_slice()[k] = original - eps;
            let minus = eval(&work)?;
            work.get_mut(id).as_mut_slice()[k] = original;

            let numeric = (plus - minus) / (2.0 * eps);
            let exact = analytic.get(id).map_or(0.0, |g| g.as_slice()[k]);
            let rel = relative_error(exact, numeric);
            report.coordinates += 1;
            if rel > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = rel;
                report.worst = Some((params.name(id).to_owned(), k));
            }
        }
    }
    Ok(report)
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / 1f64.max(analytic.abs()).max(numeric.abs())
}
