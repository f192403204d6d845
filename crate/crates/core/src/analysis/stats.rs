use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use statrs::function::factorial::ln_binomial;

use super::AnalysisError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    #[default]
    TwoSided,
    Greater,
    Less,
}

/// Combines the two tail probabilities of an observed statistic.
pub(crate) fn sided(upper: f64, lower: f64, alt: Alternative) -> f64 {
    match alt {
        Alternative::Greater => upper,
        Alternative::Less => lower,
        Alternative::TwoSided => (2.0 * upper.min(lower)).min(1.0),
    }
}

/// Exact binomial tail test. `Greater` gives P[X ≥ k].
pub fn binomial_test(k: u64, n: u64, p0: f64, alt: Alternative) -> Result<f64, AnalysisError> {
    if k > n {
        return Err(AnalysisError::Domain(format!("{k} successes out of {n} trials")));
    }
    if !(0.0..=1.0).contains(&p0) {
        return Err(AnalysisError::Domain(format!("chance rate {p0} outside [0, 1]")));
    }
    let pmf = |i: u64| -> f64 {
        if p0 == 0.0 {
            return f64::from(u8::from(i == 0));
        }
        if p0 == 1.0 {
            return f64::from(u8::from(i == n));
        }
        (ln_binomial(n, i) + i as f64 * p0.ln() + (n - i) as f64 * (1.0 - p0).ln()).exp()
    };
    let upper: f64 = (k..=n).map(pmf).sum::<f64>().min(1.0);
    let lower: f64 = (0..=k).map(pmf).sum::<f64>().min(1.0);
    Ok(sided(upper, lower, alt))
}

pub fn angular_transform(x: f64) -> Result<f64, AnalysisError> {
    if !(0.0..=1.0).contains(&x) {
        return Err(AnalysisError::Domain(format!("angular transform of {x}")));
    }
    Ok(x.sqrt().asin())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sum_sq_dev(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum()
}

fn t_p(t: f64, df: f64, alt: Alternative) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).expect("df is positive");
    sided(dist.sf(t), dist.cdf(t), alt)
}

fn need(x: &[f64], what: &str) -> Result<(), AnalysisError> {
    if x.len() < 2 {
        return Err(AnalysisError::Degenerate(format!("{what} needs at least 2 values, got {}", x.len())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(AnalysisError::Domain(format!("{what} has non-finite values")));
    }
    Ok(())
}

pub fn t_test_one_sample(values: &[f64], mu0: f64, alt: Alternative) -> Result<TTest, AnalysisError> {
    need(values, "one-sample t-test")?;
    let n = values.len() as f64;
    let var = sum_sq_dev(values) / (n - 1.0);
    let diff = mean(values) - mu0;
    if var == 0.0 {
        if diff == 0.0 {
            // every value equals mu0: no evidence either way
            return Ok(TTest { t: 0.0, df: n - 1.0, p: sided(0.5, 0.5, alt) });
        }
        return Err(AnalysisError::Degenerate("zero variance".into()));
    }
    let t = diff / (var / n).sqrt();
    Ok(TTest { t, df: n - 1.0, p: t_p(t, n - 1.0, alt) })
}

/// Pooled-variance two-sample t-test with df = n_a + n_b − 2.
pub fn t_test_two_sample(a: &[f64], b: &[f64], alt: Alternative) -> Result<TTest, AnalysisError> {
    need(a, "two-sample t-test")?;
    need(b, "two-sample t-test")?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let df = na + nb - 2.0;
    let pooled = (sum_sq_dev(a) + sum_sq_dev(b)) / df;
    let diff = mean(a) - mean(b);
    if pooled == 0.0 {
        if diff == 0.0 {
            return Ok(TTest { t: 0.0, df, p: sided(0.5, 0.5, alt) });
        }
        return Err(AnalysisError::Degenerate("zero pooled variance".into()));
    }
    let t = diff / (pooled * (1.0 / na + 1.0 / nb)).sqrt();
    Ok(TTest { t, df, p: t_p(t, df, alt) })
}

pub fn t_test_paired(a: &[f64], b: &[f64], alt: Alternative) -> Result<TTest, AnalysisError> {
    if a.len() != b.len() {
        return Err(AnalysisError::Domain(format!("paired samples of {} and {}", a.len(), b.len())));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    t_test_one_sample(&d, 0.0, alt)
}

pub fn normal_p(z: f64, alt: Alternative) -> f64 {
    let n = Normal::standard();
    sided(n.sf(z), n.cdf(z), alt)
}
