//! State/action features scaled to `[-1, 1]`.

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureMode {
    /// Inventory, time, action.
    Qt,
    /// Inventory, time, normalised mid-price, action.
    Qts,
}

impl FeatureMode {
    pub fn input_dim(self) -> usize {
        match self {
            FeatureMode::Qt => 3,
            FeatureMode::Qts => 4,
        }
    }

    pub fn uses_price(self) -> bool {
        matches!(self, FeatureMode::Qts)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureMode::Qt => "QT",
            FeatureMode::Qts => "QTS",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            FeatureMode::Qt => 0,
            FeatureMode::Qts => 1,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(FeatureMode::Qt),
            1 => Ok(FeatureMode::Qts),
            other => Err(invalid(format!("unknown feature mode code {other}"))),
        }
    }
}

impl std::str::FromStr for FeatureMode {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qt" => Ok(FeatureMode::Qt),
            "qts" => Ok(FeatureMode::Qts),
            other => Err(invalid(format!("unknown feature mode '{other}' (expected qt or qts)"))),
        }
    }
}

impl std::fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Running min/max of observed mid-prices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceBounds {
    pub min: f64,
    pub max: f64,
}

impl PriceBounds {
    pub fn starting_at(price: f64) -> Self {
        Self {
            min: price,
            max: price,
        }
    }

    pub fn observe(&mut self, price: f64) {
        if price < self.min {
            self.min = price;
        }
        if price > self.max {
            self.max = price;
        }
    }

    /// `2 (S - min) / (max - min) - 1`, clamped; zero when the bounds are degenerate.
    pub fn normalize(&self, price: f64) -> f64 {
        let width = self.max - self.min;
        if !(width > 0.0) {
            return 0.0;
        }
        (2.0 * (price - self.min) / width - 1.0).clamp(-1.0, 1.0)
    }
}

/// Episode geometry needed to scale inventory, time and volume.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureScaler {
    pub mode: FeatureMode,
    pub q0: u32,
    pub n_steps: usize,
}

impl FeatureScaler {
    pub fn inventory(&self, q: u32) -> f64 {
        2.0 * f64::from(q) / f64::from(self.q0) - 1.0
    }

    pub fn time(&self, t: usize) -> f64 {
        if self.n_steps <= 1 {
            0.0
        } else {
            2.0 * t as f64 / (self.n_steps - 1) as f64 - 1.0
        }
    }

    pub fn volume(&self, v: u32) -> f64 {
        2.0 * f64::from(v) / f64::from(self.q0) - 1.0
    }

    /// State features without the action, written into `out`.
    pub fn state_prefix(&self, q: u32, t: usize, price_feature: f64, out: &mut Vec<f64>) {
        out.clear();
        out.push(self.inventory(q));
        out.push(self.time(t));
        if self.mode.uses_price() {
            out.push(price_feature);
        }
    }
}

/// Full `(q, t[, S], v)` feature vector.
pub fn normalize_features(
    scaler: &FeatureScaler,
    q: u32,
    t: usize,
    price: Option<f64>,
    v: u32,
    bounds: &PriceBounds,
) -> Result<Vec<f64>> {
    if q > scaler.q0 || v > q {
        return Err(invalid(format!(
            "infeasible state/action q={q}, v={v}, q0={}",
            scaler.q0
        )));
    }
    if t >= scaler.n_steps {
        return Err(invalid(format!("step {t} outside horizon {}", scaler.n_steps)));
    }
    let price_feature = match (scaler.mode, price) {
        (FeatureMode::Qts, Some(s)) => bounds.normalize(s),
        (FeatureMode::Qts, None) => return Err(invalid("price feature required in QTS mode")),
        (FeatureMode::Qt, _) => 0.0,
    };
    let mut out = Vec::with_capacity(scaler.mode.input_dim());
    scaler.state_prefix(q, t, price_feature, &mut out);
    out.push(scaler.volume(v));
    Ok(out)
}
