//! Central finite-difference validation of analytic gradients.

use super::autodiff::ParamStore;
use super::tensor::Tensor2;
use crate::error::{Error, Result};

/// Perturbation step for central differences.
pub const FD_STEP: f64 = 1e-5;

/// Gradient coordinates whose magnitude (analytic and numeric) both fall
/// below this are treated as zero: central differences at [`FD_STEP`] cannot
/// resolve anything smaller than their own roundoff noise.
const ZERO_SCALE: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct ParamGradCheck {
    pub name: String,
    /// Largest |analytic - numeric| over the parameter's coordinates.
    pub max_abs_diff: f64,
    /// `max_abs_diff` relative to the parameter's gradient magnitude
    /// (the larger of the analytic and numeric max-abs entries).
    pub rel_error: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub per_param: Vec<ParamGradCheck>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.per_param.iter().fold(0.0, |m, p| m.max(p.rel_error))
    }
}

/// Compare analytic gradients against central finite differences of
/// `loss_fn`, evaluated by perturbing each parameter coordinate by
/// ±[`FD_STEP`]. `analytic` must be aligned with the store (one tensor per
/// parameter, matching shapes); the store is restored to its original values
/// before returning.
#[allow(clippy::needless_range_loop)]
pub fn finite_difference_check(
    store: &mut ParamStore,
    analytic: &[Tensor2],
    mut loss_fn: impl FnMut(&ParamStore) -> Result<f64>,
) -> Result<GradCheckReport> {
    assert_eq!(
        analytic.len(),
        store.len(),
        "analytic gradients must align with the parameter store"
    );

    let mut per_param = Vec::with_capacity(store.len());
    for pi in 0..store.len() {
        let count = {
            let p = store.at(pi);
            assert_eq!(
                p.value.shape(),
                analytic[pi].shape(),
                "gradient shape mismatch for {}",
                p.name
            );
            p.value.data().len()
        };

        let mut max_abs_diff = 0.0f64;
        let mut scale = 0.0f64;
        for flat in 0..count {
            let original = store.at(pi).value.data()[flat];

            store.at_mut(pi).value.data_mut()[flat] = original + FD_STEP;
            let plus = loss_fn(store)?;
            store.at_mut(pi).value.data_mut()[flat] = original - FD_STEP;
            let minus = loss_fn(store)?;
            store.at_mut(pi).value.data_mut()[flat] = original;

            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite loss while perturbing parameter {pi} coordinate {flat}"
                )));
            }

            let numeric = (plus - minus) / (2.0 * FD_STEP);
            let exact = analytic[pi].data()[flat];
            max_abs_diff = max_abs_diff.max((exact - numeric).abs());
            scale = scale.max(exact.abs()).max(numeric.abs());
        }

        let rel_error = if scale < ZERO_SCALE {
            0.0
        } else {
            max_abs_diff / scale
        };
        per_param.push(ParamGradCheck {
            name: store.at(pi).name.clone(),
            max_abs_diff,
            rel_error,
        });
    }

    Ok(GradCheckReport { per_param })
}
