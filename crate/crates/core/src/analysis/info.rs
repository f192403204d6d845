use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::game::Decision;

/// 2×2 table of Receiver × Sender decisions, indexed by decision bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct JointCounts {
    pub n: [[u64; 2]; 2],
}

impl JointCounts {
    pub fn from_pairs<I: IntoIterator<Item = (Decision, Decision)>>(pairs: I) -> Self {
        let mut n = [[0u64; 2]; 2];
        for (r, s) in pairs {
            n[r.as_bit() as usize][s.as_bit() as usize] += 1;
        }
        Self { n }
    }

    pub fn total(&self) -> u64 {
        self.n.iter().flatten().sum()
    }

    pub fn transposed(&self) -> Self {
        let n = self.n;
        Self {
            n: [[n[0][0], n[1][0]], [n[0][1], n[1][1]]],
        }
    }
}

/// Plug-in mutual information in bits; zero cells contribute nothing.
pub fn mutual_information(c: &JointCounts) -> Result<f64, AnalysisError> {
    let total = c.total();
    if total == 0 {
        return Err(AnalysisError::Degenerate("empty contingency table".into()));
    }
    let t = total as f64;
    let row = [c.n[0][0] + c.n[0][1], c.n[1][0] + c.n[1][1]];
    let col = [c.n[0][0] + c.n[1][0], c.n[0][1] + c.n[1][1]];
    let mut mi = 0.0;
    for r in 0..2 {
        for s in 0..2 {
            let n = c.n[r][s];
            if n == 0 {
                continue;
            }
            // p(r,s) / (p(r) p(s)) = n·N / (row·col)
            let ratio = (n as f64 * t) / (row[r] as f64 * col[s] as f64);
            mi += n as f64 / t * ratio.log2();
        }
    }
    Ok(mi.max(0.0))
}

/// Bias of the plug-in estimate, −N_R / (2 N_S ln 2).
pub fn mi_bias(n_responses: u64, n_samples: u64) -> Result<f64, AnalysisError> {
    if n_samples == 0 {
        return Err(AnalysisError::Degenerate("bias with zero samples".into()));
    }
    Ok(-(n_responses as f64) / (2.0 * n_samples as f64 * std::f64::consts::LN_2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub tpr: f64,
    pub fpr: f64,
    pub auc: f64,
}

impl RocPoint {
    /// Area under the two-segment curve (0,0) → (fpr,tpr) → (1,1), i.e. (tpr + 1 − fpr)/2.
    pub fn new(tpr: f64, fpr: f64) -> Self {
        Self {
            tpr,
            fpr,
            auc: 0.5 + (tpr - fpr) / 2.0,
        }
    }
}

/// Single ROC point of binary `outputs` against `truth` (Rotate is positive).
pub fn roc_auc(outputs: &[Decision], truth: &[Decision]) -> Result<RocPoint, AnalysisError> {
    if outputs.len() != truth.len() {
        return Err(AnalysisError::Domain(format!(
            "{} outputs against {} labels",
            outputs.len(),
            truth.len()
        )));
    }
    let (mut tp, mut pos, mut fp, mut neg) = (0u32, 0u32, 0u32, 0u32);
    for (&o, &t) in outputs.iter().zip(truth) {
        let hit = o == Decision::Rotate;
        if t == Decision::Rotate {
            pos += 1;
            tp += u32::from(hit);
        } else {
            neg += 1;
            fp += u32::from(hit);
        }
    }
    if pos == 0 || neg == 0 {
        return Err(AnalysisError::Degenerate("ground truth has a single class".into()));
    }
    Ok(RocPoint::new(
        f64::from(tp) / f64::from(pos),
        f64::from(fp) / f64::from(neg),
    ))
}
