use super::problem::{BlockValue, Residual};
use super::SolverError;

/// Central-difference step on each tangent coordinate.
pub const FD_STEP: f64 = 1e-6;

/// Compares the analytic Jacobians of `residual` at `values` against central
/// finite differences taken through each block's retraction, returning the
/// worst entry-wise error `|a − n| / max(1, |a|, |n|)`.
pub fn check_jacobians(residual: &dyn Residual, values: &[BlockValue]) -> Result<f64, SolverError> {
    let fail = |e: crate::factors::FactorError| SolverError::NumericalFailure(e.to_string());
    let refs: Vec<&BlockValue> = values.iter().collect();
    let analytic = residual.evaluate(&refs, true).map_err(fail)?;
    if analytic.jacobians.len() != values.len() {
        return Err(SolverError::Structural("Jacobian count does not match block count".into()));
    }
    let mut worst = 0.0f64;
    for (bi, block) in values.iter().enumerate() {
        let jac = &analytic.jacobians[bi];
        for k in 0..block.tangent_dim() {
            let mut delta = vec![0.0; block.tangent_dim()];
            delta[k] = FD_STEP;
            let plus = block.retract(&delta);
            delta[k] = -FD_STEP;
            let minus = block.retract(&delta);

            let mut perturbed = values.to_vec();
            perturbed[bi] = plus;
            let rp = residual.evaluate(&perturbed.iter().collect::<Vec<_>>(), false).map_err(fail)?.residual;
            perturbed[bi] = minus;
            let rm = residual.evaluate(&perturbed.iter().collect::<Vec<_>>(), false).map_err(fail)?.residual;

            for row in 0..residual.dim() {
                let numeric = (rp[row] - rm[row]) / (2.0 * FD_STEP);
                let a = jac[(row, k)];
                if !numeric.is_finite() || !a.is_finite() {
                    return Err(SolverError::NumericalFailure("non-finite Jacobian entry".into()));
                }
                let err = (a - numeric).abs() / 1f64.max(a.abs()).max(numeric.abs());
                worst = worst.max(err);
            }
        }
    }
    Ok(worst)
}
