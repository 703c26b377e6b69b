//! Central finite-difference checking of analytic gradients.

use crate::error::{DynImpError, Result};

#[derive(Debug, Clone)]
pub struct GradCheckEntry {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// Worst offenders, largest relative error first (up to 10).
    pub worst: Vec<GradCheckEntry>,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_err <= tolerance
    }
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Compares `analytic` against central differences of `loss` at `params`,
/// perturbing only the parameters listed in `indices` (all when empty).
///
/// The closure must be deterministic; it is evaluated twice at the base point
/// and an error is raised if the two values differ.
pub fn grad_check(
    loss: &mut dyn FnMut(&[f64]) -> Result<f64>,
    analytic: &[f64],
    params: &[f64],
    indices: &[usize],
    epsilon: f64,
) -> Result<GradCheckReport> {
    if epsilon <= 0.0 {
        return Err(DynImpError::GradCheck(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    if analytic.len() != params.len() {
        return Err(DynImpError::ShapeMismatch(format!(
            "gradient len {} vs params len {}",
            analytic.len(),
            params.len()
        )));
    }
    let base_a = loss(params)?;
    let base_b = loss(params)?;
    if base_a != base_b {
        return Err(DynImpError::GradCheck(format!(
            "closure is not deterministic: {base_a} vs {base_b}"
        )));
    }

    let all: Vec<usize>;
    let indices = if indices.is_empty() {
        all = (0..params.len()).collect();
        &all
    } else {
        indices
    };

    let mut work = params.to_vec();
    let mut entries = Vec::with_capacity(indices.len());
    for &i in indices {
        let orig = work[i];
        work[i] = orig + epsilon;
        let plus = loss(&work)?;
        work[i] = orig - epsilon;
        let minus = loss(&work)?;
        work[i] = orig;
        let numeric = (plus - minus) / (2.0 * epsilon);
        entries.push(GradCheckEntry {
            index: i,
            analytic: analytic[i],
            numeric,
            rel_err: rel_err(analytic[i], numeric),
        });
    }
    entries.sort_by(|a, b| b.rel_err.total_cmp(&a.rel_err));
    let max_rel_err = entries.first().map(|e| e.rel_err).unwrap_or(0.0);
    let checked = entries.len();
    entries.truncate(10);
    Ok(GradCheckReport {
        max_rel_err,
        worst: entries,
        checked,
    })
}
