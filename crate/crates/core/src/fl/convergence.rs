//! Analytic convergence-round estimate and the per-round time model.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Constants of the convergence-round bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceModel<T: Scalar> {
    /// Smoothness constant `L`.
    pub smoothness: T,
    /// Strong-convexity constant `μ`.
    pub strong_convexity: T,
    /// Heterogeneity plus gradient-variance constant `Γ`.
    pub heterogeneity: T,
    /// Target optimality gap `λ`.
    pub lambda: T,
    /// `‖w_g⁰ − w*‖²`.
    pub init_gap_sq: T,
}

impl<T: Scalar> ConvergenceModel<T> {
    pub fn validate(&self) -> Result<()> {
        let all_positive =
            [self.smoothness, self.strong_convexity, self.lambda].iter().all(|v| v.is_finite() && *v > T::zero());
        if !all_positive {
            return Err(Error::Validation("L, mu and lambda must be positive".into()));
        }
        if !(self.heterogeneity.is_finite() && self.heterogeneity >= T::zero()) {
            return Err(Error::Validation("Gamma must be non-negative".into()));
        }
        if !(self.init_gap_sq.is_finite() && self.init_gap_sq >= T::zero()) {
            return Err(Error::Validation("init_gap_sq must be non-negative".into()));
        }
        if self.smoothness < self.strong_convexity {
            return Err(Error::Validation("L must be at least mu".into()));
        }
        Ok(())
    }

    /// Condition number `κ = L / μ`.
    pub fn kappa(&self) -> T {
        self.smoothness / self.strong_convexity
    }

    pub fn with_init_gap(mut self, gap_sq: T) -> Self {
        self.init_gap_sq = gap_sq;
        self
    }
}

/// `⌈(√d/(qK) + 1) · ((L·‖w⁰ − w*‖² + 2Γ/μ)/λ − 2) · κ + 1⌉`, at least 1.
pub fn min_convergence_rounds<T: Scalar>(cm: &ConvergenceModel<T>, q: u32, k: usize, d: usize) -> u64 {
    debug_assert!(q >= 1 && k >= 1 && d >= 1);
    let q = T::from_u32(q).expect("level count representable");
    let k = T::from_usize_lossy(k);
    let d = T::from_usize_lossy(d);
    let two = T::lit(2.0);
    let alpha = d.sqrt() / (q * k) + T::one();
    let inner = (cm.smoothness * cm.init_gap_sq + two * cm.heterogeneity / cm.strong_convexity) / cm.lambda - two;
    if inner.is_nan() || inner <= T::zero() {
        return 1;
    }
    let value = (alpha * inner * cm.kappa() + T::one()).ceil();
    value.to_u64().unwrap_or(u64::MAX).max(1)
}

/// Round delay before aggregation: computation plus upload.
pub fn fed_round_time<T: Scalar>(t_comp: T, t_upload: T) -> T {
    t_comp + t_upload
}

pub fn total_time_estimate<T: Scalar>(rounds: u64, t_fed: T) -> T {
    T::from_u64(rounds).expect("round count representable") * t_fed
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn example() -> ConvergenceModel<f64> {
        ConvergenceModel { smoothness: 1.0, strong_convexity: 1.0, heterogeneity: 0.5, lambda: 0.3, init_gap_sq: 1.0 }
    }

    #[test]
    fn rounds_examples() {
        // inner = (1 + 1)/0.3 − 2 = 4.667; α = 10/100 + 1 = 1.1 → ⌈6.133⌉
        assert_eq!(min_convergence_rounds(&example(), 10, 10, 100), 7);
        // q → ∞: α → 1 → ⌈5.667⌉
        assert_eq!(min_convergence_rounds(&example(), u32::MAX, 10, 100), 6);
        let loose = ConvergenceModel { lambda: 1e6, ..example() };
        assert_eq!(min_convergence_rounds(&loose, 2, 1, 100), 1);
    }

    #[test]
    fn validation() {
        assert!(example().validate().is_ok());
        assert!(ConvergenceModel { strong_convexity: 2.0, ..example() }.validate().is_err());
        assert!(ConvergenceModel { lambda: 0.0, ..example() }.validate().is_err());
        assert_eq!(example().kappa(), 1.0);
    }

    #[test]
    fn time_examples() {
        assert_relative_eq!(fed_round_time(50.0, 1.007), 51.007);
        assert_eq!(fed_round_time(0.0, 0.0), 0.0);
        assert_eq!(fed_round_time(3.0, 4.0), fed_round_time(4.0, 3.0));
        assert_relative_eq!(total_time_estimate(7, 51.007), 357.049, max_relative = 1e-12);
        assert_eq!(total_time_estimate(1, 51.007), 51.007);
        assert_eq!(total_time_estimate(14, 3.5), 2.0 * total_time_estimate(7, 3.5));
    }

    proptest! {
        #[test]
        fn rounds_monotone(
            l in 1.0f64..5.0, mu_frac in 0.05f64..1.0, gamma in 0.0f64..2.0,
            lambda in 0.01f64..1.0, gap in 0.0f64..3.0, d in 1usize..300_000,
        ) {
            let cm = ConvergenceModel { smoothness: l, strong_convexity: l * mu_frac, heterogeneity: gamma, lambda, init_gap_sq: gap };
            for q in 1..10u32 {
                prop_assert!(min_convergence_rounds(&cm, q + 1, 5, d) <= min_convergence_rounds(&cm, q, 5, d));
            }
            for k in 1..15usize {
                prop_assert!(min_convergence_rounds(&cm, 4, k + 1, d) <= min_convergence_rounds(&cm, 4, k, d));
            }
            prop_assert!(min_convergence_rounds(&cm, 4, 3, d) <= min_convergence_rounds(&cm, 4, 3, d + 1000));
            prop_assert!(min_convergence_rounds(&cm, 4, 3, d) >= 1);
        }
    }
}
