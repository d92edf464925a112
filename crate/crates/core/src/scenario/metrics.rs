//! Calibration metrics: normalized mean bias error and the coefficient of
//! variation of the RMSE, with the usual ±10 % / 30 % acceptance limits.

use std::fmt;

use crate::error::{Error, Result};

pub const NMBE_LIMIT: f64 = 10.0;
pub const CVRMSE_LIMIT: f64 = 30.0;

fn check(measured: &[f64], simulated: &[f64], p: usize) -> Result<f64> {
    if measured.len() != simulated.len() {
        return Err(Error::Metrics(format!(
            "series lengths differ ({} vs {})",
            measured.len(),
            simulated.len()
        )));
    }
    let n = measured.len();
    if n < 2 || n <= p {
        return Err(Error::Metrics(format!("need at least 2 samples and more than p = {p}, got {n}")));
    }
    let mean = measured.iter().sum::<f64>() / n as f64;
    if mean == 0.0 {
        return Err(Error::Metrics("measured series has zero mean".into()));
    }
    // Celsius series may average below zero; normalizing by |mean| keeps
    // CVRMSE non-negative and the NMBE sign meaning "measured above".
    Ok(mean.abs())
}

/// `100·Σ(m − s) / ((n − p)·|mean(m)|)`, in percent.
pub fn nmbe(measured: &[f64], simulated: &[f64], p: usize) -> Result<f64> {
    let mean = check(measured, simulated, p)?;
    let bias: f64 = measured.iter().zip(simulated).map(|(m, s)| m - s).sum();
    Ok(100.0 * bias / ((measured.len() - p) as f64 * mean))
}

/// `100·√(Σ(m − s)² / (n − p)) / |mean(m)|`, in percent.
pub fn cvrmse(measured: &[f64], simulated: &[f64], p: usize) -> Result<f64> {
    let mean = check(measured, simulated, p)?;
    let sq: f64 = measured.iter().zip(simulated).map(|(m, s)| (m - s).powi(2)).sum();
    Ok(100.0 * (sq / (measured.len() - p) as f64).sqrt() / mean)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Validated,
    NotValidated,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Validated => "validated",
            Verdict::NotValidated => "not-validated",
        })
    }
}

/// Limits are inclusive.
pub fn verdict(nmbe: f64, cvrmse: f64) -> Verdict {
    if nmbe.abs() <= NMBE_LIMIT && cvrmse <= CVRMSE_LIMIT {
        Verdict::Validated
    } else {
        Verdict::NotValidated
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub column: String,
    pub nmbe: f64,
    pub cvrmse: f64,
    pub n: usize,
    pub verdict: Verdict,
}

impl MetricsReport {
    pub fn compute(column: &str, measured: &[f64], simulated: &[f64], p: usize) -> Result<Self> {
        let nmbe = nmbe(measured, simulated, p)?;
        let cvrmse = cvrmse(measured, simulated, p)?;
        Ok(Self {
            column: column.to_string(),
            nmbe,
            cvrmse,
            n: measured.len(),
            verdict: verdict(nmbe, cvrmse),
        })
    }
}

/// Plain-text table of several reports.
pub fn render_reports(reports: &[MetricsReport]) -> String {
    let width = reports.iter().map(|r| r.column.len()).max().unwrap_or(0).max(6);
    let mut out = format!(
        "{:<width$}  {:>9}  {:>9}  {:>8}  verdict\n",
        "column", "NMBE %", "CVRMSE %", "n"
    );
    for r in reports {
        out.push_str(&format!(
            "{:<width$}  {:>9.2}  {:>9.2}  {:>8}  {}\n",
            r.column, r.nmbe, r.cvrmse, r.n, r.verdict
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn negative_mean_mirrors_positive() {
        let (m, s) = ([1.0, 2.0, 3.0], [2.0, 3.0, 4.0]);
        let (nm, ns) = ([-1.0, -2.0, -3.0], [-2.0, -3.0, -4.0]);
        assert_relative_eq!(cvrmse(&nm, &ns, 0).unwrap(), cvrmse(&m, &s, 0).unwrap());
        assert_relative_eq!(nmbe(&nm, &ns, 0).unwrap(), -nmbe(&m, &s, 0).unwrap());
        assert_eq!(verdict(nmbe(&nm, &ns, 0).unwrap(), cvrmse(&nm, &ns, 0).unwrap()), Verdict::NotValidated);
    }
    use proptest::prelude::*;

    #[test]
    fn hand_examples() {
        let m = [1.0, 2.0, 3.0];
        let s = [2.0, 3.0, 4.0];
        assert_relative_eq!(nmbe(&m, &s, 0).unwrap(), -50.0);
        assert_relative_eq!(cvrmse(&m, &s, 0).unwrap(), 50.0);
        assert_eq!(nmbe(&m, &m, 0).unwrap(), 0.0);
        assert_eq!(cvrmse(&m, &m, 0).unwrap(), 0.0);
        // p = 1 shrinks the denominator to n - 1
        assert_relative_eq!(nmbe(&m, &s, 1).unwrap(), 100.0 * -3.0 / (2.0 * 2.0));
    }

    #[test]
    fn constant_shift_changes_only_the_mean() {
        let m = [1.0, 2.0, 3.0];
        let s = [2.0, 3.0, 4.0];
        let c = 7.0;
        let mc: Vec<f64> = m.iter().map(|v| v + c).collect();
        let sc: Vec<f64> = s.iter().map(|v| v + c).collect();
        // independent evaluation: bias −3 over n = 3, mean 9
        assert_relative_eq!(nmbe(&mc, &sc, 0).unwrap(), 100.0 * -3.0 / (3.0 * 9.0), max_relative = 1e-12);
        assert_relative_eq!(cvrmse(&mc, &sc, 0).unwrap(), 100.0 / 9.0, max_relative = 1e-12);
    }

    #[test]
    fn errors() {
        assert!(nmbe(&[1.0, -1.0], &[0.0, 0.0], 0).is_err());
        assert!(nmbe(&[1.0], &[1.0], 0).is_err());
        assert!(cvrmse(&[1.0, 2.0], &[1.0], 0).is_err());
    }

    #[test]
    fn verdict_limits() {
        for (n, c) in [(3.93, 16.33), (5.00, 16.78), (4.54, 14.57)] {
            assert_eq!(verdict(n, c), Verdict::Validated);
        }
        assert_eq!(verdict(10.1, 5.0), Verdict::NotValidated);
        assert_eq!(verdict(-10.0, 30.0), Verdict::Validated);
        assert_eq!(verdict(0.0, 30.01), Verdict::NotValidated);
    }

    proptest! {
        #[test]
        fn cvrmse_bounds_nmbe(pairs in proptest::collection::vec((1.0f64..50.0, 0.0f64..60.0), 2..100)) {
            let (m, s): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let a = nmbe(&m, &s, 0).unwrap();
            let b = cvrmse(&m, &s, 0).unwrap();
            prop_assert!(b + 1e-9 >= a.abs());
        }
    }
}
