use crate::error::{invalid, Result};

/// A static selling schedule: per-step volumes summing to the initial inventory.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    volumes: Vec<f64>,
    q0: f64,
}

impl Schedule {
    pub fn new(volumes: Vec<f64>, q0: f64) -> Result<Self> {
        if volumes.is_empty() {
            return Err(invalid("schedule needs at least one step"));
        }
        if let Some(v) = volumes.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(invalid(format!("schedule entry {v} is negative or non-finite")));
        }
        let total: f64 = volumes.iter().sum();
        if (total - q0).abs() > 1e-9 * q0.abs().max(1.0) {
            return Err(invalid(format!("schedule sums to {total}, expected {q0}")));
        }
        Ok(Self { volumes, q0 })
    }

    pub fn from_shares(shares: &[u32]) -> Result<Self> {
        let q0 = shares.iter().map(|&v| f64::from(v)).sum();
        Self::new(shares.iter().map(|&v| f64::from(v)).collect(), q0)
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn q0(&self) -> f64 {
        self.q0
    }

    pub fn len(&self) -> usize {
        self.volumes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.volumes.is_empty()
    }

    /// Inventory held before each step plus the final (zero) holding; length `N + 1`.
    pub fn holdings(&self) -> Vec<f64> {
        let mut left = self.q0;
        let mut out = Vec::with_capacity(self.volumes.len() + 1);
        out.push(left);
        for (i, v) in self.volumes.iter().enumerate() {
            left -= v;
            if i + 1 == self.volumes.len() {
                left = 0.0;
            }
            out.push(left.max(0.0));
        }
        out
    }

    /// Whole-share version of the schedule via largest-remainder rounding.
    pub fn to_shares(&self) -> Vec<u32> {
        largest_remainder(&self.volumes, self.q0.round() as u32)
    }
}

/// Rounds non-negative reals to integers summing to `total`: floor everything, then hand the
/// leftover units to the largest fractional parts (earlier index wins ties).
pub fn largest_remainder(values: &[f64], total: u32) -> Vec<u32> {
    let mut out: Vec<u32> = values.iter().map(|v| v.max(0.0).floor() as u32).collect();
    let floored: u64 = out.iter().map(|&v| u64::from(v)).sum();
    if floored > u64::from(total) {
        // Only reachable when `values` sums above `total`; trim from the back.
        let mut excess = floored - u64::from(total);
        for v in out.iter_mut().rev() {
            let cut = excess.min(u64::from(*v));
            *v -= cut as u32;
            excess -= cut;
        }
        return out;
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    let frac = |i: usize| values[i].max(0.0) - values[i].max(0.0).floor();
    order.sort_by(|&a, &b| frac(b).total_cmp(&frac(a)).then(a.cmp(&b)));
    let remaining = (u64::from(total) - floored) as usize;
    for k in 0..remaining {
        out[order[k % order.len()]] += 1;
    }
    out
}
