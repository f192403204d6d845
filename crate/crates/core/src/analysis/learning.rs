//! Block-wise learning curves: Receiver vs Sender regression weights and
//! correlations, linear trends over blocks, and the slope-difference Z test.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::stats::{normal_p, Alternative};
use super::AnalysisError;
use crate::game::Decision;
use crate::protocol::{RoundRecord, SessionLog};

pub const BLOCK_LEN: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VectorRole {
    Receiver,
    GoodSender,
    BadSender,
}

/// Trials left out of the analysis, per triad (position in the log list).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusionMask {
    pub trials: BTreeMap<usize, BTreeSet<usize>>,
}

impl ExclusionMask {
    pub fn excludes(&self, triad: usize, trial: usize) -> bool {
        self.trials.get(&triad).is_some_and(|s| s.contains(&trial))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionVector {
    pub role: VectorRole,
    pub block: usize,
    pub entries: Vec<u8>,
}

impl DecisionVector {
    pub fn as_f64(&self) -> Vec<f64> {
        self.entries.iter().map(|&e| f64::from(e)).collect()
    }
}

/// Ids of the good and bad Sender of a log.
pub fn sender_ids(log: &SessionLog) -> Result<(u8, u8), AnalysisError> {
    let h = log
        .header()
        .ok_or_else(|| AnalysisError::Log("log has no header".into()))?;
    let bad = h.plan.victim;
    let good = if bad == 1 { 2 } else { 1 };
    Ok((good, bad))
}

/// The decision a role contributed in one round: the Receiver's own decision,
/// or the Sender's decision as conveyed to the Receiver.
pub fn role_decision(r: &RoundRecord, role: VectorRole, ids: (u8, u8)) -> Result<Decision, AnalysisError> {
    let id = match role {
        VectorRole::Receiver => return Ok(r.receiver_decision),
        VectorRole::GoodSender => ids.0,
        VectorRole::BadSender => ids.1,
    };
    r.sender(id).map(|s| s.conveyed).ok_or_else(|| {
        AnalysisError::Log(format!("trial {} round {} lacks sender {id}", r.trial_index, r.round))
    })
}

/// Round-1 decisions of `role` in block `block` (1-based), triad-major.
pub fn block_vectors(
    logs: &[SessionLog],
    block: usize,
    role: VectorRole,
    mask: &ExclusionMask,
) -> Result<DecisionVector, AnalysisError> {
    if block == 0 {
        return Err(AnalysisError::Domain("blocks are numbered from 1".into()));
    }
    let trials = (block - 1) * BLOCK_LEN..block * BLOCK_LEN;
    let mut entries = Vec::with_capacity(logs.len() * BLOCK_LEN);
    for (triad, log) in logs.iter().enumerate() {
        let ids = sender_ids(log)?;
        for t in trials.clone() {
            if mask.excludes(triad, t) {
                continue;
            }
            let r = log
                .rounds()
                .find(|r| r.trial_index == t && r.round == 1)
                .ok_or_else(|| AnalysisError::Log(format!("triad {triad} is missing trial {t}")))?;
            entries.push(role_decision(r, role, ids)?.as_bit());
        }
    }
    Ok(DecisionVector { role, block, entries })
}

/// Least-squares weight of R on S without intercept, (SᵀS)⁻¹SᵀR.
pub fn regression_beta(s: &[f64], r: &[f64]) -> Result<f64, AnalysisError> {
    if s.len() != r.len() {
        return Err(AnalysisError::Domain(format!("vectors of {} and {}", s.len(), r.len())));
    }
    let sts: f64 = s.iter().map(|x| x * x).sum();
    if sts == 0.0 {
        return Err(AnalysisError::Degenerate("regressor is all zero".into()));
    }
    Ok(s.iter().zip(r).map(|(a, b)| a * b).sum::<f64>() / sts)
}

pub fn pearson_r(s: &[f64], r: &[f64]) -> Result<f64, AnalysisError> {
    if s.len() != r.len() || s.is_empty() {
        return Err(AnalysisError::Domain(format!("vectors of {} and {}", s.len(), r.len())));
    }
    let n = s.len() as f64;
    let (ms, mr) = (s.iter().sum::<f64>() / n, r.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in s.iter().zip(r) {
        sxy += (a - ms) * (b - mr);
        sxx += (a - ms).powi(2);
        syy += (b - mr).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(AnalysisError::Degenerate("zero variance".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub n_points: usize,
}

/// OLS line through (x, y); needs at least three points.
pub fn trend_fit(points: &[(f64, f64)]) -> Result<TrendFit, AnalysisError> {
    let n = points.len();
    if n < 3 {
        return Err(AnalysisError::Degenerate(format!("trend over {n} points")));
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(AnalysisError::Degenerate("all points share one x".into()));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    Ok(TrendFit {
        slope,
        intercept,
        slope_se: (sse / (nf - 2.0) / sxx).sqrt(),
        n_points: n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeDifference {
    pub z: f64,
    /// Two-sided normal p.
    pub p: f64,
}

/// Z = (β_g − β_b) / √(SE_g² + SE_b²).
pub fn paternoster_z(g: &TrendFit, b: &TrendFit) -> Result<SlopeDifference, AnalysisError> {
    let se = (g.slope_se.powi(2) + b.slope_se.powi(2)).sqrt();
    if se == 0.0 || !se.is_finite() {
        return Err(AnalysisError::Degenerate("combined slope error is zero".into()));
    }
    let z = (g.slope - b.slope) / se;
    Ok(SlopeDifference {
        z,
        p: normal_p(z, Alternative::TwoSided),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_and_r_examples() {
        let s = [1.0, 1.0, 0.0, 1.0];
        let r = [1.0, 0.0, 0.0, 1.0];
        assert!((regression_beta(&s, &r).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(regression_beta(&s, &s).unwrap(), 1.0);
        assert_eq!(regression_beta(&s, &[0.0; 4]).unwrap(), 0.0);
        assert!(regression_beta(&[0.0; 4], &r).is_err());
        assert!((pearson_r(&s, &r).unwrap() - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((pearson_r(&r, &r).unwrap() - 1.0).abs() < 1e-15);
        let inv: Vec<f64> = r.iter().map(|x| 1.0 - x).collect();
        assert!((pearson_r(&inv, &r).unwrap() + 1.0).abs() < 1e-15);
        assert!(pearson_r(&[1.0; 4], &r).is_err());
    }

    #[test]
    fn slope_difference_examples() {
        let g = TrendFit { slope: 1.0, intercept: 0.0, slope_se: 0.1, n_points: 4 };
        let b = TrendFit { slope: 0.0, intercept: 0.0, slope_se: 0.1, n_points: 4 };
        let z = paternoster_z(&g, &b).unwrap().z;
        assert!((z - 1.0 / 0.02f64.sqrt()).abs() < 1e-12);
        assert_eq!(paternoster_z(&b, &g).unwrap().z, -z);
        let pts = [(1.0, 0.2), (2.0, 0.5), (3.0, 0.4), (4.0, 0.9)];
        let f = trend_fit(&pts).unwrap();
        assert_eq!(paternoster_z(&f, &f).unwrap().z, 0.0);
    }

    #[test]
    fn exact_line_has_zero_error() {
        let f = trend_fit(&[(1.0, 1.0), (2.0, 3.0), (3.0, 5.0), (4.0, 7.0)]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-15);
        assert!((f.intercept + 1.0).abs() < 1e-15);
        assert!(f.slope_se.abs() < 1e-12);
        assert!(trend_fit(&[(1.0, 1.0), (2.0, 2.0)]).is_err());
    }
}
