//! Cumulative return, annualized return, Sharpe ratio and maximum drawdown
//! over an equity curve.
//!
//! Years are counted as `(trading days - 1) / 252`. The Sharpe ratio uses
//! simple daily returns, the sample standard deviation, a daily risk-free
//! rate of `(1 + rf_annual)^(1/252) - 1`, and is annualized by `sqrt(252)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const TRADING_DAYS_PER_YEAR: f64 = 252.0;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("need at least {needed} equity points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("starting equity must be positive, got {0}")]
    NonPositiveStart(f64),
    #[error("equity must stay positive, got {value} at index {index}")]
    NonPositiveEquity { index: usize, value: f64 },
    #[error("daily returns have zero volatility; Sharpe ratio is undefined")]
    ZeroVolatility,
}

pub type Result<T, E = MetricsError> = std::result::Result<T, E>;

fn require(values: &[f64], needed: usize) -> Result<()> {
    if values.len() < needed {
        return Err(MetricsError::TooFewPoints {
            needed,
            got: values.len(),
        });
    }
    if values[0] <= 0.0 {
        return Err(MetricsError::NonPositiveStart(values[0]));
    }
    Ok(())
}

/// `(V_end - V_start) / V_start * 100`.
pub fn cumulative_return(values: &[f64]) -> Result<f64> {
    require(values, 2)?;
    let (start, end) = (values[0], values[values.len() - 1]);
    Ok((end - start) / start * 100.0)
}

pub fn years_spanned(points: usize, trading_days_per_year: f64) -> f64 {
    points.saturating_sub(1) as f64 / trading_days_per_year
}

/// `((V_end / V_start)^(1/N) - 1) * 100` with `N` in years of trading days.
pub fn annualized_return(values: &[f64], trading_days_per_year: f64) -> Result<f64> {
    require(values, 2)?;
    let n_years = years_spanned(values.len(), trading_days_per_year);
    let ratio = values[values.len() - 1] / values[0];
    Ok((ratio.powf(1.0 / n_years) - 1.0) * 100.0)
}

pub fn daily_returns(values: &[f64]) -> Vec<f64> {
    values.windows(2).map(|w| w[1] / w[0] - 1.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sharpe {
    pub raw: f64,
    pub annualized: f64,
}

pub fn sharpe_ratio(values: &[f64], rf_annual: f64) -> Result<Sharpe> {
    require(values, 3)?;
    if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| **v <= 0.0) {
        return Err(MetricsError::NonPositiveEquity { index, value });
    }
    let returns = daily_returns(values);
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    // Relative threshold: a constant-return series leaves only rounding noise.
    if sd == 0.0 || sd <= 1e-12 * mean.abs() {
        return Err(MetricsError::ZeroVolatility);
    }
    let rf_daily = (1.0 + rf_annual).powf(1.0 / TRADING_DAYS_PER_YEAR) - 1.0;
    let raw = (mean - rf_daily) / sd;
    Ok(Sharpe {
        raw,
        annualized: raw * TRADING_DAYS_PER_YEAR.sqrt(),
    })
}

/// Largest running-peak-to-value decline, in percent.
pub fn max_drawdown(values: &[f64]) -> f64 {
    let mut peak = f64::MIN;
    let mut worst: f64 = 0.0;
    for &v in values {
        peak = peak.max(v);
        if peak > 0.0 {
            worst = worst.max((peak - v) / peak);
        }
    }
    worst * 100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub cumulative_return_pct: f64,
    pub annualized_return_pct: f64,
    /// `None` when the Sharpe ratio is undefined for the curve (too short,
    /// zero return volatility, or non-positive equity).
    pub sharpe_ratio: Option<f64>,
    pub sharpe_annualized: Option<f64>,
    pub max_drawdown_pct: f64,
    pub n_years: f64,
    pub risk_free_rate_annual: f64,
}

impl MetricsReport {
    pub fn compute(values: &[f64], rf_annual: f64) -> Result<Self> {
        let sharpe = sharpe_ratio(values, rf_annual).ok();
        Ok(Self {
            cumulative_return_pct: cumulative_return(values)?,
            annualized_return_pct: annualized_return(values, TRADING_DAYS_PER_YEAR)?,
            sharpe_ratio: sharpe.map(|s| s.raw),
            sharpe_annualized: sharpe.map(|s| s.annualized),
            max_drawdown_pct: max_drawdown(values),
            n_years: years_spanned(values.len(), TRADING_DAYS_PER_YEAR),
            risk_free_rate_annual: rf_annual,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cumulative_examples() {
        assert_eq!(cumulative_return(&[100000.0, 126000.0]).unwrap(), 26.0);
        assert_eq!(cumulative_return(&[5.0, 5.0, 5.0]).unwrap(), 0.0);
        assert_eq!(cumulative_return(&[100000.0, 80000.0]).unwrap(), -20.0);
        assert_eq!(
            cumulative_return(&[1.0]),
            Err(MetricsError::TooFewPoints { needed: 2, got: 1 })
        );
    }

    #[test]
    fn annualized_examples() {
        let mut curve = vec![1.0; 505];
        curve[504] = 1.21;
        assert!((annualized_return(&curve, 252.0).unwrap() - 10.0).abs() < 1e-9);
        assert_eq!(annualized_return(&[3.0, 3.0, 3.0], 252.0).unwrap(), 0.0);
        assert_eq!(
            annualized_return(&[0.0, 1.0], 252.0),
            Err(MetricsError::NonPositiveStart(0.0))
        );
    }

    #[test]
    fn sharpe_examples() {
        let curve = [100.0, 101.0, 99.99, 100.9899, 99.980_001];
        let s = sharpe_ratio(&curve, 0.0).unwrap();
        assert!(s.raw.abs() < 1e-9, "{s:?}");
        let growth: Vec<f64> = (0..10).map(|i| 100.0 * 1.01f64.powi(i)).collect();
        assert_eq!(
            sharpe_ratio(&growth, 0.0),
            Err(MetricsError::ZeroVolatility)
        );
        assert_eq!(
            sharpe_ratio(&[1.0, 1.0, 1.0], 0.0),
            Err(MetricsError::ZeroVolatility)
        );
    }

    #[test]
    fn drawdown_examples() {
        assert_eq!(max_drawdown(&[100.0, 120.0, 90.0, 110.0]), 25.0);
        assert_eq!(max_drawdown(&[1.0, 2.0, 3.0]), 0.0);
        assert_eq!(max_drawdown(&[7.0]), 0.0);
    }

    #[test]
    fn report_tolerates_flat_curve() {
        let r = MetricsReport::compute(&[10.0; 4], 0.0).unwrap();
        assert_eq!(r.sharpe_ratio, None);
        assert_eq!(r.max_drawdown_pct, 0.0);
        assert!((r.n_years - 3.0 / 252.0).abs() < 1e-15);
        let json = serde_json::to_value(&r).unwrap();
        for key in [
            "cumulative_return_pct",
            "annualized_return_pct",
            "sharpe_ratio",
            "sharpe_annualized",
            "max_drawdown_pct",
            "n_years",
            "risk_free_rate_annual",
        ] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }
}
