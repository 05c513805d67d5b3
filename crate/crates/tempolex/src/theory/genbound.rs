//! Stability-based generalization bound for beta-mixing training sequences.

use serde::{Deserialize, Serialize};

use super::TheoryError;

/// Inputs: uniform stability, loss-variance bound, summed mixing
/// coefficients B = sum_k beta(k), sample size, and confidence delta.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenBoundInput {
    pub stability: f64,
    pub variance_bound: f64,
    pub beta_sum: f64,
    pub n: usize,
    pub delta: f64,
}

/// Evaluate 2 eps_stab + sqrt(2 sigma^2 (1 + 4B) ln(2/delta) / n).
///
/// The (1 + 4B) constant follows the stated bound; it depends on which
/// concentration inequality for dependent sequences is invoked, so treat
/// absolute values as indicative and trends (notably the 1/sqrt(n) decay)
/// as the robust content.
pub fn gen_bound(input: &GenBoundInput) -> Result<f64, TheoryError> {
    if !(input.delta > 0.0 && input.delta < 1.0) {
        return Err(TheoryError::InvalidInput(format!(
            "delta must lie in (0, 1), got {}",
            input.delta
        )));
    }
    if input.n == 0 {
        return Err(TheoryError::InvalidInput("n must be >= 1".into()));
    }
    if input.stability < 0.0 || input.variance_bound < 0.0 || input.beta_sum < 0.0 {
        return Err(TheoryError::InvalidInput(
            "stability, variance bound, and beta sum must be nonnegative".into(),
        ));
    }
    let concentration =
        (2.0 * input.variance_bound * (1.0 + 4.0 * input.beta_sum) * (2.0 / input.delta).ln()
            / input.n as f64)
            .sqrt();
    Ok(2.0 * input.stability + concentration)
}
