//! Expected-cost minimisation for deterministic impact trajectories.
//!
//! The expected shortfall of a static schedule `v` is the quadratic form `1/2 v' H v` with
//! `H_tt = 2 alpha_t` and `H_ts = kappa_min(t,s)` off the diagonal. We minimise it subject to
//! `sum v = q0` and `v >= 0` with a primal active-set method: each iterate solves the
//! equality-constrained KKT system on the free variables, steps toward its solution until a
//! bound blocks, and releases bounds whose multipliers turn negative.

use nalgebra::{DMatrix, DVector};

use super::schedule::Schedule;
use crate::error::{invalid, Error, Result};
use crate::market_sim::ImpactTrajectory;

const STEP_TOL: f64 = 1e-12;
const MULTIPLIER_TOL: f64 = 1e-12;

/// Hessian of the expected cost, row-major `n x n`.
pub fn cost_hessian(traj: &ImpactTrajectory) -> Vec<f64> {
    let n = traj.len();
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] = if i == j {
                2.0 * traj.alpha_at(i)
            } else {
                traj.kappa_at(i.min(j))
            };
        }
    }
    h
}

/// Gradient `H v` of the expected cost.
pub fn cost_gradient(traj: &ImpactTrajectory, v: &[f64]) -> Vec<f64> {
    let n = traj.len();
    let h = cost_hessian(traj);
    (0..n)
        .map(|i| (0..n).map(|j| h[i * n + j] * v[j]).sum())
        .collect()
}

/// Real-valued cost-minimising schedule for a known trajectory.
pub fn optimal_deterministic_schedule(traj: &ImpactTrajectory, q0: f64) -> Result<Schedule> {
    if !(q0 > 0.0 && q0.is_finite()) {
        return Err(invalid(format!("inventory must be positive, got {q0}")));
    }
    let n = traj.len();
    let h = cost_hessian(traj);
    if !is_positive_definite(&reduced_hessian(&h, n), n - 1) {
        return Err(Error::Solver(
            "expected cost is not strictly convex on the budget hyperplane".into(),
        ));
    }
    let mut x = vec![q0 / n as f64; n];
    let mut active = vec![false; n];

    for _ in 0..(10 * n + 10) {
        let free: Vec<usize> = (0..n).filter(|&i| !active[i]).collect();
        let (target, mu) = solve_equality_qp(&h, n, &free, q0)?;
        let mut step = vec![0.0; n];
        for (k, &i) in free.iter().enumerate() {
            step[i] = target[k] - x[i];
        }
        let step_norm = step.iter().fold(0.0f64, |m, s| m.max(s.abs()));

        if step_norm <= STEP_TOL * q0.max(1.0) {
            // Bound multipliers: lambda_i = (H x)_i - mu must be >= 0.
            let worst = (0..n)
                .filter(|&i| active[i])
                .map(|i| {
                    let grad: f64 = (0..n).map(|j| h[i * n + j] * x[j]).sum();
                    (i, grad - mu)
                })
                .min_by(|a, b| a.1.total_cmp(&b.1));
            match worst {
                Some((i, lambda)) if lambda < -MULTIPLIER_TOL => active[i] = false,
                _ => {
                    for (k, &i) in free.iter().enumerate() {
                        x[i] = target[k];
                    }
                    for i in (0..n).filter(|&i| active[i]) {
                        x[i] = 0.0;
                    }
                    let total: f64 = x.iter().sum();
                    // Rescale away round-off so the schedule sums to q0 exactly.
                    for v in x.iter_mut() {
                        *v = (*v * q0 / total).max(0.0);
                    }
                    return Schedule::new(x, q0);
                }
            }
        } else {
            let mut alpha = 1.0;
            let mut blocking = None;
            for &i in &free {
                if step[i] < 0.0 {
                    let ratio = -x[i] / step[i];
                    if ratio < alpha {
                        alpha = ratio;
                        blocking = Some(i);
                    }
                }
            }
            for &i in &free {
                x[i] += alpha * step[i];
            }
            if let Some(i) = blocking {
                x[i] = 0.0;
                active[i] = true;
            }
        }
    }
    Err(Error::Solver("active-set iteration did not converge".into()))
}

/// Largest violation of the KKT conditions at `v`: stationarity on the support, dual
/// feasibility on the zero set, primal feasibility.
pub fn kkt_violation(traj: &ImpactTrajectory, v: &[f64], q0: f64) -> f64 {
    let grad = cost_gradient(traj, v);
    let support: Vec<usize> = (0..v.len()).filter(|&i| v[i] > 1e-12).collect();
    if support.is_empty() {
        return f64::INFINITY;
    }
    let mu = support.iter().map(|&i| grad[i]).sum::<f64>() / support.len() as f64;
    let mut worst = (v.iter().sum::<f64>() - q0).abs();
    for i in 0..v.len() {
        worst = worst.max((-v[i]).max(0.0));
        if support.contains(&i) {
            worst = worst.max((grad[i] - mu).abs());
        } else {
            worst = worst.max((mu - grad[i]).max(0.0));
        }
    }
    worst
}

/// Solves `min 1/2 x' H_FF x  s.t. sum x = q0` over the free index set.
fn solve_equality_qp(h: &[f64], n: usize, free: &[usize], q0: f64) -> Result<(Vec<f64>, f64)> {
    let m = free.len();
    if m == 0 {
        return Err(Error::Solver("every variable is bound at zero".into()));
    }
    let dim = m + 1;
    let mut a = vec![0.0; dim * dim];
    let mut b = vec![0.0; dim];
    for (r, &i) in free.iter().enumerate() {
        for (c, &j) in free.iter().enumerate() {
            a[r * dim + c] = h[i * n + j];
        }
        a[r * dim + m] = -1.0;
        a[m * dim + r] = 1.0;
    }
    b[m] = q0;
    let sol = solve_dense(a, b, dim)?;
    Ok((sol[..m].to_vec(), sol[m]))
}

/// Hessian restricted to `sum v = 0`, in the basis `e_i - e_{n-1}`, `i < n - 1`.
/// The full Hessian may be indefinite (e.g. falling impacts) while this block is positive
/// definite, which is all the budget-constrained problem needs.
pub fn reduced_hessian(h: &[f64], n: usize) -> Vec<f64> {
    let m = n.saturating_sub(1);
    let last = n - 1;
    let mut z = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            z[i * m + j] = h[i * n + j] - h[i * n + last] - h[last * n + j] + h[last * n + last];
        }
    }
    z
}

/// Cholesky test.
pub fn is_positive_definite(h: &[f64], n: usize) -> bool {
    DMatrix::from_row_slice(n, n, h).cholesky().is_some()
}

fn solve_dense(a: Vec<f64>, b: Vec<f64>, n: usize) -> Result<Vec<f64>> {
    let x = DMatrix::from_row_slice(n, n, &a)
        .full_piv_lu()
        .solve(&DVector::from_vec(b))
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Solver("singular KKT system".into()))?;
    Ok(x.iter().copied().collect())
}
