use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Degrees of freedom of the reference distribution.
    pub df: f64,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Welch's unequal-variance t-test, two-sided.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::EmptyInput(
            "welch_t_test needs at least two values per sample",
        ));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (sa, sb) = (va / a.len() as f64, vb / b.len() as f64);
    let se2 = sa + sb;
    if se2 == 0.0 {
        let df = (a.len() + b.len() - 2) as f64;
        return Ok(if ma == mb {
            TestResult {
                statistic: 0.0,
                p_value: 1.0,
                df,
            }
        } else {
            TestResult {
                statistic: if ma > mb {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                },
                p_value: 0.0,
                df,
            }
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (a.len() as f64 - 1.0) + sb * sb / (b.len() as f64 - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::config(e.to_string()))?;
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(TestResult {
        statistic: t,
        p_value: p,
        df,
    })
}

/// Mood's median test with Yates' continuity correction.
///
/// Values equal to the grand median count as "below".
pub fn median_test(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.is_empty() || b.is_empty() || a.len() + b.len() < 4 {
        return Err(Error::EmptyInput(
            "median_test needs two non-empty samples, at least four values",
        ));
    }
    let mut all: Vec<f64> = a.iter().chain(b).copied().collect();
    all.sort_by(f64::total_cmp);
    let n = all.len();
    let median = if n % 2 == 1 {
        all[n / 2]
    } else {
        (all[n / 2 - 1] + all[n / 2]) / 2.0
    };
    let above = |x: &[f64]| x.iter().filter(|&&v| v > median).count() as f64;
    let (aa, ba) = (above(a), above(b));
    let table = [[aa, ba], [a.len() as f64 - aa, b.len() as f64 - ba]];
    let row = [aa + ba, table[1][0] + table[1][1]];
    let col = [a.len() as f64, b.len() as f64];
    let total = n as f64;
    if row[0] == 0.0 || row[1] == 0.0 {
        return Ok(TestResult {
            statistic: 0.0,
            p_value: 1.0,
            df: 1.0,
        });
    }
    let mut chi2 = 0.0;
    for (i, r) in row.iter().enumerate() {
        for (j, c) in col.iter().enumerate() {
            let expected = r * c / total;
            let diff = (table[i][j] - expected).abs();
            let corrected = diff - diff.min(0.5);
            chi2 += corrected * corrected / expected;
        }
    }
    let dist = ChiSquared::new(1.0).map_err(|e| Error::config(e.to_string()))?;
    Ok(TestResult {
        statistic: chi2,
        p_value: dist.sf(chi2),
        df: 1.0,
    })
}
