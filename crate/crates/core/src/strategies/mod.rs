//! Benchmark liquidation strategies.

mod qp;
mod schedule;

pub use qp::{
    cost_gradient, cost_hessian, is_positive_definite, kkt_violation,
    optimal_deterministic_schedule, reduced_hessian,
};
pub use schedule::{largest_remainder, Schedule};

use crate::error::{invalid, Result};
use crate::market_sim::CirImpactSpec;

/// Equal slices of `q0` over `n_steps`, rounded to whole shares by largest remainder.
pub fn twap(q0: u32, n_steps: usize) -> Result<Schedule> {
    if n_steps == 0 {
        return Err(invalid("TWAP needs at least one step"));
    }
    let even = vec![f64::from(q0) / n_steps as f64; n_steps];
    Schedule::from_shares(&largest_remainder(&even, q0))
}

/// Mean-variance trading parameters for the sinh holding curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcRiskParams {
    pub lambda_ra: f64,
    pub sigma: f64,
    pub alpha_tilde: f64,
    pub tau: f64,
}

impl AcRiskParams {
    /// Rate `w` solving `2 (cosh(w tau) - 1) = lambda sigma^2 tau^2 / (2 alpha_tilde)`.
    ///
    /// Uses `2 (cosh x - 1) = 4 sinh^2(x/2)`, so `w tau = 2 asinh(sqrt(rhs) / 2)`, which stays
    /// accurate for tiny right-hand sides.
    pub fn sinh_rate(&self) -> Result<f64> {
        if !(self.lambda_ra >= 0.0) {
            return Err(invalid("risk aversion must be >= 0"));
        }
        if !(self.sigma > 0.0 && self.alpha_tilde > 0.0 && self.tau > 0.0) {
            return Err(invalid("sigma, alpha_tilde and tau must be positive"));
        }
        let rhs = self.lambda_ra * self.sigma * self.sigma * self.tau * self.tau
            / (2.0 * self.alpha_tilde);
        Ok(2.0 * (rhs.sqrt() / 2.0).asinh() / self.tau)
    }
}

/// Optimal holdings `q0 sinh(w (T - t tau)) / sinh(w T)` for `t = 0..=N`.
/// With zero risk aversion this is the TWAP line `(N - t) q0 / N`.
pub fn ac_sinh_holdings(q0: u32, n_steps: usize, risk: &AcRiskParams) -> Result<Vec<f64>> {
    if n_steps == 0 {
        return Err(invalid("need at least one step"));
    }
    let w = risk.sinh_rate()?;
    let q0 = f64::from(q0);
    let horizon = n_steps as f64 * risk.tau;
    let denom = (w * horizon).sinh();
    let holdings = (0..=n_steps)
        .map(|t| {
            if t == n_steps {
                0.0
            } else if w == 0.0 || denom == 0.0 {
                (n_steps - t) as f64 * q0 / n_steps as f64
            } else {
                q0 * (w * (horizon - t as f64 * risk.tau)).sinh() / denom
            }
        })
        .collect();
    Ok(holdings)
}

/// First-order perturbation of TWAP for mean-reverting impacts.
///
/// The trading rate is
/// `(1/(N-t) + l_a (th_a - a_t) / (2 a_t) + (N-t) l_k (th_k - k_t) / (6 k_t)) q`;
/// the returned volume is `round(rate * tau)` clamped to `[0, q]`, and the last step sells
/// whatever is left.
pub fn barger_lorig_action(
    q: u32,
    t: usize,
    n_steps: usize,
    alpha_t: f64,
    kappa_t: f64,
    spec: &CirImpactSpec,
    tau: f64,
) -> u32 {
    if t + 1 >= n_steps {
        return q;
    }
    let rate = barger_lorig_rate(q, t, n_steps, alpha_t, kappa_t, spec);
    let volume = (rate * tau).round();
    if volume.is_nan() || volume <= 0.0 {
        0
    } else {
        volume.min(f64::from(q)) as u32
    }
}

/// Unclamped trading velocity of the perturbative policy.
pub fn barger_lorig_rate(
    q: u32,
    t: usize,
    n_steps: usize,
    alpha_t: f64,
    kappa_t: f64,
    spec: &CirImpactSpec,
) -> f64 {
    let left = (n_steps - t) as f64;
    let temporary = spec.lambda_alpha * (spec.theta_alpha - alpha_t) / (2.0 * alpha_t);
    let permanent = left * spec.lambda_kappa * (spec.theta_kappa - kappa_t) / (6.0 * kappa_t);
    (1.0 / left + temporary + permanent) * f64::from(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twap_examples() {
        assert_eq!(twap(20, 10).unwrap().volumes(), &[2.0; 10]);
        assert_eq!(twap(20, 1).unwrap().volumes(), &[20.0]);
        assert_eq!(twap(7, 3).unwrap().volumes(), &[3.0, 2.0, 2.0]);
        assert!(twap(7, 0).is_err());
    }

    #[test]
    fn sinh_zero_risk_is_twap() {
        let risk = AcRiskParams {
            lambda_ra: 0.0,
            sigma: 1e-5,
            alpha_tilde: 0.002,
            tau: 1.0,
        };
        let h = ac_sinh_holdings(20, 10, &risk).unwrap();
        let expected: Vec<f64> = (0..=10).map(|t| (10 - t) as f64 * 2.0).collect();
        assert_eq!(h, expected);
    }

    #[test]
    fn sinh_rate_solves_its_equation() {
        let risk = AcRiskParams {
            lambda_ra: 3.0,
            sigma: 0.3,
            alpha_tilde: 0.002,
            tau: 0.5,
        };
        let w = risk.sinh_rate().unwrap();
        let lhs = 2.0 * ((w * risk.tau).cosh() - 1.0);
        let rhs = risk.lambda_ra * risk.sigma.powi(2) * risk.tau.powi(2) / (2.0 * risk.alpha_tilde);
        assert!((lhs - rhs).abs() < 1e-10 * rhs);

        // Bisection on the same equation agrees.
        let f = |x: f64| 2.0 * ((x * risk.tau).cosh() - 1.0) - rhs;
        let (mut lo, mut hi) = (0.0, 1.0);
        while f(hi) < 0.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        assert!((w - 0.5 * (lo + hi)).abs() < 1e-12);
    }

    #[test]
    fn sinh_large_risk_front_loads() {
        let risk = AcRiskParams {
            lambda_ra: 100.0,
            sigma: 0.05,
            alpha_tilde: 0.002,
            tau: 1.0,
        };
        let h = ac_sinh_holdings(20, 10, &risk).unwrap();
        assert!(h[1] < 18.0);
        assert!(h.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(h[10], 0.0);
        assert_eq!(h[0], 20.0);
    }

    #[test]
    fn barger_lorig_at_long_run_means_is_twap_rate() {
        let spec = CirImpactSpec::LOW_REVERSION;
        let rate = barger_lorig_rate(20, 0, 10, spec.theta_alpha, spec.theta_kappa, &spec);
        assert!((rate - 2.0).abs() < 1e-12);
        // Full episode at the means liquidates like TWAP.
        let mut q = 20;
        let mut vols = vec![];
        for t in 0..10 {
            let v = barger_lorig_action(q, t, 10, spec.theta_alpha, spec.theta_kappa, &spec, 1.0);
            vols.push(v);
            q -= v;
        }
        assert_eq!(vols, vec![2; 10]);
    }

    #[test]
    fn barger_lorig_clamps_buys_and_forces_completion() {
        let spec = CirImpactSpec::LOW_REVERSION;
        let rate = barger_lorig_rate(20, 0, 10, 2.0 * spec.theta_alpha, spec.theta_kappa, &spec);
        assert!((rate - (-3.0)).abs() < 1e-12);
        assert_eq!(
            barger_lorig_action(20, 0, 10, 2.0 * spec.theta_alpha, spec.theta_kappa, &spec, 1.0),
            0
        );
        assert_eq!(barger_lorig_action(13, 9, 10, 0.1, 0.1, &spec, 1.0), 13);
        // Very cheap liquidity cannot sell more than is held.
        assert_eq!(barger_lorig_action(5, 0, 10, 1e-6, 1e-6, &spec, 1.0), 5);
    }
}
