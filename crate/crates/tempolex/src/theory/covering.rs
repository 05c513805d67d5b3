//! Covering-number bound on the codebook size needed for a target
//! quantization radius.

use serde::{Deserialize, Serialize};

use super::TheoryError;

/// Patch dimension P and covering radius epsilon, with 0 < epsilon < 2 sqrt(P).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoveringInput {
    pub patch_len: usize,
    pub epsilon: f64,
}

/// Evaluate (1 + 2 sqrt(P) / epsilon)^(P-1), the codebook-size bound that
/// guarantees every normalized patch sits within epsilon of some centroid.
pub fn covering_bound(input: &CoveringInput) -> Result<f64, TheoryError> {
    if input.patch_len < 2 {
        return Err(TheoryError::InvalidInput(format!(
            "patch dimension must be >= 2, got {}",
            input.patch_len
        )));
    }
    let sqrt_p = (input.patch_len as f64).sqrt();
    let limit = 2.0 * sqrt_p;
    if !(input.epsilon > 0.0 && input.epsilon < limit) {
        return Err(TheoryError::EpsilonOutOfRange {
            epsilon: input.epsilon,
            limit,
        });
    }
    let base = 1.0 + limit / input.epsilon;
    Ok(base.powi(input.patch_len as i32 - 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_closed_form_p16() {
        let bound = covering_bound(&CoveringInput {
            patch_len: 16,
            epsilon: 4.0,
        })
        .unwrap();
        assert_eq!(bound, 14_348_907.0); // 3^15
    }

    #[test]
    fn exact_closed_form_p2() {
        let sqrt2 = 2.0f64.sqrt();
        let bound = covering_bound(&CoveringInput {
            patch_len: 2,
            epsilon: sqrt2,
        })
        .unwrap();
        assert_eq!(bound, 3.0); // (1 + 2*sqrt(2)/sqrt(2))^1
    }

    #[test]
    fn boundary_epsilon_rejected() {
        let err = covering_bound(&CoveringInput {
            patch_len: 16,
            epsilon: 8.0, // 2 sqrt(16)
        })
        .unwrap_err();
        assert!(matches!(err, TheoryError::EpsilonOutOfRange { .. }));
        assert!(covering_bound(&CoveringInput {
            patch_len: 16,
            epsilon: 0.0,
        })
        .is_err());
        assert!(covering_bound(&CoveringInput {
            patch_len: 16,
            epsilon: -1.0,
        })
        .is_err());
    }

    #[test]
    fn monotone_in_epsilon_and_dimension() {
        // Decreasing in epsilon at fixed P.
        let mut prev = f64::INFINITY;
        for eps in [1.0, 2.0, 3.0, 5.0, 7.9] {
            let b = covering_bound(&CoveringInput {
                patch_len: 16,
                epsilon: eps,
            })
            .unwrap();
            assert!(b < prev, "bound rose at epsilon {eps}");
            prev = b;
        }
        // Increasing in P at a fixed epsilon / (2 sqrt(P)) ratio.
        let mut prev = 0.0;
        for p in [4usize, 8, 16, 32, 64] {
            let eps = 0.5 * 2.0 * (p as f64).sqrt();
            let b = covering_bound(&CoveringInput {
                patch_len: p,
                epsilon: eps,
            })
            .unwrap();
            assert!(b > prev, "bound fell at P = {p}");
            prev = b;
        }
    }
}
