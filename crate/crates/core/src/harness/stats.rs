use crate::error::{invalid, Result};

/// Relative cash difference in basis points: `1e4 (agent - bench) / bench`.
pub fn delta_pnl(cash_agent: f64, cash_bench: f64) -> Result<f64> {
    if !(cash_bench > 0.0) {
        return Err(invalid(format!("benchmark cash must be positive, got {cash_bench}")));
    }
    Ok(10_000.0 * (cash_agent - cash_bench) / cash_bench)
}

/// Per-episode basis-point differences of two paired cash columns.
pub fn paired_delta_pnl(agent: &[f64], bench: &[f64]) -> Result<Vec<f64>> {
    if agent.len() != bench.len() {
        return Err(invalid(format!(
            "paired columns differ in length ({} vs {})",
            agent.len(),
            bench.len()
        )));
    }
    agent.iter().zip(bench).map(|(&a, &b)| delta_pnl(a, b)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation (`n - 1` denominator); zero for a single value.
    pub std: f64,
    pub median: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("cannot summarise an empty column"));
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        Ok(Self {
            count: n,
            mean,
            std,
            median,
        })
    }

    pub fn std_error(&self) -> f64 {
        self.std / (self.count as f64).sqrt()
    }
}
