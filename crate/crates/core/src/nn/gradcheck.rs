//! Central finite-difference gradient checker.

use super::params::{Gradients, ParamId, ParamSet};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// (parameter name, coordinate, analytic, numeric) for the worst coordinate.
    pub worst: Option<(String, usize, f64, f64)>,
    pub checked: usize,
}

/// Relative error used by the checker.
pub fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / (a.abs() + n.abs() + 1e-12)
}

/// Checks `f`'s analytic gradients against central differences with step `h`.
/// `coords` restricts the check to some coordinates; `None` checks all of them.
pub fn grad_check<F>(params: &ParamSet, h: f64, coords: Option<&[(ParamId, usize)]>, mut f: F) -> Result<GradCheck>
where
    F: FnMut(&ParamSet) -> Result<(f64, Gradients)>,
{
    let (_, analytic) = f(params)?;
    let all: Vec<(ParamId, usize)>;
    let coords = match coords {
        Some(c) => c,
        None => {
            all = (0..params.len()).flat_map(|p| (0..params.get(p).len()).map(move |i| (p, i))).collect();
            &all
        }
    };
    let mut work = params.clone();
    let mut out = GradCheck { max_rel_error: 0.0, worst: None, checked: 0 };
    for &(p, i) in coords {
        let orig = work.get(p).values[i];
        work.get_mut(p).values[i] = orig + h;
        let (fp, _) = f(&work)?;
        work.get_mut(p).values[i] = orig - h;
        let (fm, _) = f(&work)?;
        work.get_mut(p).values[i] = orig;
        let numeric = (fp - fm) / (2.0 * h);
        let a = analytic.get(p)[i];
        let e = rel_error(a, numeric);
        out.checked += 1;
        if e > out.max_rel_error || out.worst.is_none() {
            out.max_rel_error = out.max_rel_error.max(e);
            out.worst = Some((params.get(p).name.clone(), i, a, numeric));
        }
    }
    Ok(out)
}
