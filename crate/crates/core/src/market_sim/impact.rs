//! Impact-coefficient trajectories: constant, linear in time, and correlated
//! square-root (CIR) mean-reverting paths.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};

/// Euler substeps per trading step used for CIR paths.
pub const CIR_SUBSTEPS: usize = 10;

/// Lower bound applied to every CIR value handed out in a trajectory.
pub const IMPACT_FLOOR: f64 = 1e-8;

/// Per-step permanent (`kappa`) and temporary (`alpha`) impact coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpactTrajectory {
    kappa: Vec<f64>,
    alpha: Vec<f64>,
}

impl ImpactTrajectory {
    pub fn new(kappa: Vec<f64>, alpha: Vec<f64>) -> Result<Self> {
        if kappa.is_empty() || kappa.len() != alpha.len() {
            return Err(invalid(format!(
                "trajectory lengths must be equal and non-zero (kappa {}, alpha {})",
                kappa.len(),
                alpha.len()
            )));
        }
        for (t, (&k, &a)) in kappa.iter().zip(&alpha).enumerate() {
            if !(k > 0.0 && k.is_finite() && a > 0.0 && a.is_finite()) {
                return Err(invalid(format!(
                    "impacts must be strictly positive at t={t} (kappa {k}, alpha {a})"
                )));
            }
        }
        Ok(Self { kappa, alpha })
    }

    pub fn len(&self) -> usize {
        self.kappa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kappa.is_empty()
    }

    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn kappa_at(&self, t: usize) -> f64 {
        self.kappa[t]
    }

    pub fn alpha_at(&self, t: usize) -> f64 {
        self.alpha[t]
    }
}

/// Linear-in-time impacts `x_t = x_0 + beta * t`; slopes carry their sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearImpactSpec {
    pub kappa0: f64,
    pub beta_kappa: f64,
    pub alpha0: f64,
    pub beta_alpha: f64,
}

impl LinearImpactSpec {
    /// Impacts rising from a cheap open.
    pub const INCREASING: Self = Self {
        kappa0: 0.0001,
        beta_kappa: 0.0002,
        alpha0: 0.0001,
        beta_alpha: 0.0004,
    };

    /// Impacts falling from an expensive open.
    pub const DECREASING: Self = Self {
        kappa0: 0.002,
        beta_kappa: -0.0002,
        alpha0: 0.004,
        beta_alpha: -0.0004,
    };
}

/// Parameters of two correlated square-root mean-reverting impact processes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CirImpactSpec {
    pub lambda_kappa: f64,
    pub lambda_alpha: f64,
    pub theta_kappa: f64,
    pub theta_alpha: f64,
    pub sigma_kappa: f64,
    pub sigma_alpha: f64,
    /// Correlation between the two driving Brownian motions.
    pub omega: f64,
}

impl CirImpactSpec {
    /// Weak mean reversion (rate 1).
    pub const LOW_REVERSION: Self = Self::with_rate(1.0);
    /// Strong mean reversion (rate 5).
    pub const HIGH_REVERSION: Self = Self::with_rate(5.0);

    pub const fn with_rate(lambda: f64) -> Self {
        Self {
            lambda_kappa: lambda,
            lambda_alpha: lambda,
            theta_kappa: 0.001,
            theta_alpha: 0.002,
            sigma_kappa: 0.002,
            sigma_alpha: 0.002,
            omega: 0.9,
        }
    }

    /// Checks positivity, `|omega| <= 1` and the Feller condition `2 lambda theta >= sigma^2`
    /// for both processes. Zero volatility is accepted (deterministic relaxation).
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.lambda_kappa,
            self.lambda_alpha,
            self.theta_kappa,
            self.theta_alpha,
            self.sigma_kappa,
            self.sigma_alpha,
            self.omega,
        ]
        .iter()
        .all(|x| x.is_finite());
        if !finite {
            return Err(invalid("CIR parameters must be finite"));
        }
        if self.lambda_kappa <= 0.0 || self.lambda_alpha <= 0.0 {
            return Err(invalid("CIR mean-reversion rates must be positive"));
        }
        if self.theta_kappa <= 0.0 || self.theta_alpha <= 0.0 {
            return Err(invalid("CIR long-run means must be positive"));
        }
        if self.sigma_kappa < 0.0 || self.sigma_alpha < 0.0 {
            return Err(invalid("CIR volatilities must be non-negative"));
        }
        if self.omega.abs() > 1.0 {
            return Err(invalid(format!("correlation {} outside [-1, 1]", self.omega)));
        }
        let feller = |name: &str, lambda: f64, theta: f64, sigma: f64| {
            if 2.0 * lambda * theta < sigma * sigma {
                Err(invalid(format!(
                    "Feller condition violated for {name}: 2*{lambda}*{theta} < {sigma}^2"
                )))
            } else {
                Ok(())
            }
        };
        feller("kappa", self.lambda_kappa, self.theta_kappa, self.sigma_kappa)?;
        feller("alpha", self.lambda_alpha, self.theta_alpha, self.sigma_alpha)
    }
}

pub fn constant_trajectory(kappa: f64, alpha: f64, n_steps: usize) -> Result<ImpactTrajectory> {
    if !(kappa > 0.0 && alpha > 0.0) {
        return Err(invalid(format!(
            "constant impacts must be positive (kappa {kappa}, alpha {alpha})"
        )));
    }
    if n_steps == 0 {
        return Err(invalid("trajectory needs at least one step"));
    }
    ImpactTrajectory::new(vec![kappa; n_steps], vec![alpha; n_steps])
}

/// `kappa_t = kappa0 + beta_kappa * t`, `alpha_t = alpha0 + beta_alpha * t` for `t = 0..n_steps`.
pub fn linear_trajectory(spec: &LinearImpactSpec, n_steps: usize) -> Result<ImpactTrajectory> {
    if n_steps == 0 {
        return Err(invalid("trajectory needs at least one step"));
    }
    let kappa = (0..n_steps)
        .map(|t| spec.kappa0 + spec.beta_kappa * t as f64)
        .collect();
    let alpha = (0..n_steps)
        .map(|t| spec.alpha0 + spec.beta_alpha * t as f64)
        .collect();
    ImpactTrajectory::new(kappa, alpha)
        .map_err(|e| invalid(format!("linear impact spec yields non-positive impacts: {e}")))
}

/// Two standard normals with correlation `omega`: `z2 = omega z1 + sqrt(1 - omega^2) z'`.
pub fn correlated_normals<R: Rng + ?Sized>(omega: f64, rng: &mut R) -> (f64, f64) {
    let z1: f64 = rng.sample(StandardNormal);
    let z_indep: f64 = rng.sample(StandardNormal);
    (z1, omega * z1 + (1.0 - omega * omega).sqrt() * z_indep)
}

/// Correlated CIR paths started at their long-run means, discretised by full-truncation
/// Euler with `substeps` substeps per unit trading step. Entry `t` is the value at time `t`.
pub fn cir_trajectory<R: Rng + ?Sized>(
    spec: &CirImpactSpec,
    n_steps: usize,
    substeps: usize,
    rng: &mut R,
) -> Result<ImpactTrajectory> {
    spec.validate()?;
    if n_steps == 0 {
        return Err(invalid("trajectory needs at least one step"));
    }
    if substeps == 0 {
        return Err(invalid("CIR discretisation needs at least one substep"));
    }
    let dt = 1.0 / substeps as f64;
    let sqrt_dt = dt.sqrt();
    let mut kappa = Vec::with_capacity(n_steps);
    let mut alpha = Vec::with_capacity(n_steps);
    let (mut k, mut a) = (spec.theta_kappa, spec.theta_alpha);
    for t in 0..n_steps {
        if t > 0 {
            for _ in 0..substeps {
                let (z1, z2) = correlated_normals(spec.omega, rng);
                let kp = k.max(0.0);
                let ap = a.max(0.0);
                k += spec.lambda_kappa * (spec.theta_kappa - kp) * dt
                    + spec.sigma_kappa * kp.sqrt() * sqrt_dt * z1;
                a += spec.lambda_alpha * (spec.theta_alpha - ap) * dt
                    + spec.sigma_alpha * ap.sqrt() * sqrt_dt * z2;
            }
        }
        kappa.push(k.max(IMPACT_FLOOR));
        alpha.push(a.max(IMPACT_FLOOR));
    }
    ImpactTrajectory::new(kappa, alpha)
}
