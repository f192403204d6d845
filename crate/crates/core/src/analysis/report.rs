use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::info::{mi_bias, mutual_information, roc_auc, JointCounts, RocPoint};
use super::learning::{
    block_vectors, paternoster_z, pearson_r, regression_beta, role_decision, sender_ids,
    trend_fit, ExclusionMask, SlopeDifference, TrendFit, VectorRole, BLOCK_LEN,
};
use super::stats::{
    angular_transform, binomial_test, t_test_one_sample, t_test_paired, t_test_two_sample,
    Alternative, TTest,
};
use super::wilcoxon::{wilcoxon_rank_sum, wilcoxon_signed_rank, RankTest};
use super::AnalysisError;
use crate::game::Decision;
use crate::protocol::SessionLog;

pub const REPORT_SCHEMA: &str = "brainnet.analysis-report";
pub const REPORT_VERSION: u32 = 1;

/// Cleared trials over completed trials.
pub fn accuracy(log: &SessionLog) -> Result<f64, AnalysisError> {
    let (k, n) = trial_counts(log, 0, &ExclusionMask::default());
    if n == 0 {
        return Err(AnalysisError::Empty);
    }
    Ok(k as f64 / n as f64)
}

fn trial_counts(log: &SessionLog, triad: usize, mask: &ExclusionMask) -> (u64, u64) {
    log.trials()
        .filter(|t| !mask.excludes(triad, t.trial_index))
        .fold((0, 0), |(k, n), t| (k + u64::from(t.outcome), n + 1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriadRow {
    pub triad: usize,
    pub session_id: String,
    pub bad_sender: u8,
    pub correct: u64,
    pub trials: u64,
    pub accuracy: f64,
    pub binomial_p: f64,
    pub roc_overall: Option<RocPoint>,
    pub roc_good: Option<RocPoint>,
    pub roc_bad: Option<RocPoint>,
    pub mi_good: Option<f64>,
    pub mi_bad: Option<f64>,
    /// Decisions entering each MI table.
    pub mi_samples: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracySummary {
    pub mean: f64,
    pub correct: u64,
    pub trials: u64,
    /// One-sided P[X ≥ correct] under chance 0.5 for the pooled trials.
    pub binomial_p: f64,
}

/// A group of values tested against a chance level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChanceTests {
    pub mean: Option<f64>,
    pub chance: f64,
    pub t_angular: Option<TTest>,
    pub signed_rank: Option<RankTest>,
}

/// Two groups compared; paired and pooled t on angular values plus rank-sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupComparison {
    pub t_angular_paired: Option<TTest>,
    pub t_angular_pooled: Option<TTest>,
    pub rank_sum: Option<RankTest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AucSummary {
    pub overall: ChanceTests,
    pub good_vs_overall: GroupComparison,
    pub overall_vs_bad: GroupComparison,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiSummary {
    pub bias: Option<f64>,
    pub good: ChanceTests,
    pub bad: ChanceTests,
    pub good_vs_bad: GroupComparison,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockRow {
    pub block: usize,
    pub length: usize,
    pub beta_good: Option<f64>,
    pub beta_bad: Option<f64>,
    pub r_good: Option<f64>,
    pub r_bad: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendComparison {
    pub good: Option<TrendFit>,
    pub bad: Option<TrendFit>,
    pub difference: Option<SlopeDifference>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningSummary {
    pub blocks: Vec<BlockRow>,
    pub beta: TrendComparison,
    pub correlation: TrendComparison,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema: String,
    pub version: u32,
    pub triads: Vec<TriadRow>,
    pub accuracy: AccuracySummary,
    pub auc: AucSummary,
    pub mi: MiSummary,
    pub learning: LearningSummary,
    /// Measurements that could not be computed, with the reason.
    pub notes: Vec<String>,
}

struct Notes(Vec<String>);

impl Notes {
    fn keep<T>(&mut self, what: &str, r: Result<T, AnalysisError>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.0.push(format!("{what}: {e}"));
                None
            }
        }
    }
}

fn angular_all(values: &[f64]) -> Result<Vec<f64>, AnalysisError> {
    values.iter().map(|&v| angular_transform(v)).collect()
}

fn chance_tests(values: &[f64], chance: f64, label: &str, notes: &mut Notes) -> ChanceTests {
    let mean = (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64);
    let t = angular_all(values).and_then(|a| {
        t_test_one_sample(&a, angular_transform(chance)?, Alternative::Greater)
    });
    ChanceTests {
        mean,
        chance,
        t_angular: notes.keep(&format!("{label} t-test"), t),
        signed_rank: notes.keep(
            &format!("{label} signed-rank test"),
            wilcoxon_signed_rank(values, chance, Alternative::Greater),
        ),
    }
}

fn compare(a: &[f64], b: &[f64], label: &str, notes: &mut Notes) -> GroupComparison {
    let (aa, ab) = match (angular_all(a), angular_all(b)) {
        (Ok(x), Ok(y)) => (x, y),
        (Err(e), _) | (_, Err(e)) => {
            notes.0.push(format!("{label}: {e}"));
            (Vec::new(), Vec::new())
        }
    };
    GroupComparison {
        t_angular_paired: notes.keep(
            &format!("{label} paired t-test"),
            t_test_paired(&aa, &ab, Alternative::TwoSided),
        ),
        t_angular_pooled: notes.keep(
            &format!("{label} pooled t-test"),
            t_test_two_sample(&aa, &ab, Alternative::TwoSided),
        ),
        rank_sum: notes.keep(
            &format!("{label} rank-sum test"),
            wilcoxon_rank_sum(a, b, Alternative::TwoSided),
        ),
    }
}

fn trend(
    series: &[(usize, Option<f64>)],
    label: &str,
    notes: &mut Notes,
) -> Option<TrendFit> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter_map(|&(b, v)| v.map(|v| (b as f64, v)))
        .collect();
    notes.keep(label, trend_fit(&pts))
}

fn compare_trends(
    good: &[(usize, Option<f64>)],
    bad: &[(usize, Option<f64>)],
    label: &str,
    notes: &mut Notes,
) -> TrendComparison {
    let g = trend(good, &format!("{label} trend, good sender"), notes);
    let b = trend(bad, &format!("{label} trend, bad sender"), notes);
    let difference = match (&g, &b) {
        (Some(g), Some(b)) => notes.keep(&format!("{label} slope difference"), paternoster_z(g, b)),
        _ => None,
    };
    TrendComparison { good: g, bad: b, difference }
}

fn flat<T: Copy>(v: &[Option<T>]) -> Vec<T> {
    v.iter().flatten().copied().collect()
}

/// Full analysis of a set of triad sessions.
pub fn report(logs: &[SessionLog], mask: &ExclusionMask) -> Result<AnalysisReport, AnalysisError> {
    if logs.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let mut notes = Notes(Vec::new());
    let mut triads = Vec::with_capacity(logs.len());
    for (i, log) in logs.iter().enumerate() {
        let header = log
            .header()
            .ok_or_else(|| AnalysisError::Log(format!("triad {}: log has no header", i + 1)))?;
        if !log.is_complete() {
            return Err(AnalysisError::Log(format!(
                "triad {} ({}): session incomplete",
                i + 1,
                header.session_id
            )));
        }
        let ids = sender_ids(log)?;
        let (k, n) = trial_counts(log, i, mask);
        if n == 0 {
            return Err(AnalysisError::Log(format!("triad {}: every trial excluded", i + 1)));
        }
        let rounds: Vec<_> = log.rounds().filter(|r| !mask.excludes(i, r.trial_index)).collect();
        let truth: Vec<Decision> = rounds.iter().map(|r| r.correct_action).collect();
        let of = |role| -> Result<Vec<Decision>, AnalysisError> {
            rounds.iter().map(|r| role_decision(r, role, ids)).collect()
        };
        let recv = of(VectorRole::Receiver)?;
        let good = of(VectorRole::GoodSender)?;
        let bad = of(VectorRole::BadSender)?;
        let tag = format!("triad {}", i + 1);
        let mi = |s: &[Decision]| {
            mutual_information(&JointCounts::from_pairs(recv.iter().copied().zip(s.iter().copied())))
        };
        triads.push(TriadRow {
            triad: i + 1,
            session_id: header.session_id.clone(),
            bad_sender: ids.1,
            correct: k,
            trials: n,
            accuracy: k as f64 / n as f64,
            binomial_p: binomial_test(k, n, 0.5, Alternative::Greater)?,
            roc_overall: notes.keep(&format!("{tag} overall ROC"), roc_auc(&recv, &truth)),
            roc_good: notes.keep(&format!("{tag} good sender ROC"), roc_auc(&good, &truth)),
            roc_bad: notes.keep(&format!("{tag} bad sender ROC"), roc_auc(&bad, &truth)),
            mi_good: notes.keep(&format!("{tag} good sender MI"), mi(&good)),
            mi_bad: notes.keep(&format!("{tag} bad sender MI"), mi(&bad)),
            mi_samples: recv.len() as u64,
        });
    }

    let correct: u64 = triads.iter().map(|t| t.correct).sum();
    let trials: u64 = triads.iter().map(|t| t.trials).sum();
    let accuracy = AccuracySummary {
        mean: triads.iter().map(|t| t.accuracy).sum::<f64>() / triads.len() as f64,
        correct,
        trials,
        binomial_p: binomial_test(correct, trials, 0.5, Alternative::Greater)?,
    };

    let auc_of = |f: fn(&TriadRow) -> Option<RocPoint>| -> Vec<Option<f64>> {
        triads.iter().map(|t| f(t).map(|p| p.auc)).collect()
    };
    let (auc_all, auc_good, auc_bad) = (
        auc_of(|t| t.roc_overall),
        auc_of(|t| t.roc_good),
        auc_of(|t| t.roc_bad),
    );
    // comparisons only pair triads where both sides exist
    let paired = |a: &[Option<f64>], b: &[Option<f64>]| -> (Vec<f64>, Vec<f64>) {
        a.iter()
            .zip(b)
            .filter_map(|(x, y)| Some(((*x)?, (*y)?)))
            .unzip()
    };
    let auc = {
        let (g, o) = paired(&auc_good, &auc_all);
        let (o2, b) = paired(&auc_all, &auc_bad);
        AucSummary {
            overall: chance_tests(&flat(&auc_all), 0.5, "AUC vs chance", &mut notes),
            good_vs_overall: compare(&g, &o, "AUC good sender vs overall", &mut notes),
            overall_vs_bad: compare(&o2, &b, "AUC overall vs bad sender", &mut notes),
        }
    };

    let mi_good: Vec<Option<f64>> = triads.iter().map(|t| t.mi_good).collect();
    let mi_bad: Vec<Option<f64>> = triads.iter().map(|t| t.mi_bad).collect();
    let mi = {
        let (g, b) = paired(&mi_good, &mi_bad);
        let samples = triads.iter().map(|t| t.mi_samples).min().unwrap_or(0);
        MiSummary {
            bias: notes.keep("MI bias", mi_bias(2, samples)),
            good: chance_tests(&flat(&mi_good), 0.0, "MI good sender vs chance", &mut notes),
            bad: chance_tests(&flat(&mi_bad), 0.0, "MI bad sender vs chance", &mut notes),
            good_vs_bad: compare(&g, &b, "MI good vs bad sender", &mut notes),
        }
    };

    let n_blocks = logs
        .iter()
        .filter_map(|l| l.header().map(|h| h.schedule.len() / BLOCK_LEN))
        .min()
        .unwrap_or(0);
    let mut blocks = Vec::with_capacity(n_blocks);
    for block in 1..=n_blocks {
        let r = block_vectors(logs, block, VectorRole::Receiver, mask)?.as_f64();
        let g = block_vectors(logs, block, VectorRole::GoodSender, mask)?.as_f64();
        let b = block_vectors(logs, block, VectorRole::BadSender, mask)?.as_f64();
        let tag = format!("block {block}");
        blocks.push(BlockRow {
            block,
            length: r.len(),
            beta_good: notes.keep(&format!("{tag} beta, good sender"), regression_beta(&g, &r)),
            beta_bad: notes.keep(&format!("{tag} beta, bad sender"), regression_beta(&b, &r)),
            r_good: notes.keep(&format!("{tag} correlation, good sender"), pearson_r(&g, &r)),
            r_bad: notes.keep(&format!("{tag} correlation, bad sender"), pearson_r(&b, &r)),
        });
    }
    let series = |f: fn(&BlockRow) -> Option<f64>| -> Vec<(usize, Option<f64>)> {
        blocks.iter().map(|b| (b.block, f(b))).collect()
    };
    let learning = LearningSummary {
        beta: compare_trends(&series(|b| b.beta_good), &series(|b| b.beta_bad), "beta", &mut notes),
        correlation: compare_trends(
            &series(|b| b.r_good),
            &series(|b| b.r_bad),
            "correlation",
            &mut notes,
        ),
        blocks,
    };

    Ok(AnalysisReport {
        schema: REPORT_SCHEMA.to_owned(),
        version: REPORT_VERSION,
        triads,
        accuracy,
        auc,
        mi,
        learning,
        notes: notes.0,
    })
}

/// One row per measurement: `triad,measure,group,block,value`. Blank cells
/// mean "not applicable"; measurements that failed are left out.
pub fn report_table(r: &AnalysisReport) -> String {
    let mut out = String::from("triad,measure,group,block,value\n");
    let mut row = |triad: Option<usize>, measure: &str, group: &str, block: Option<usize>, v: Option<f64>| {
        if let Some(v) = v {
            let t = triad.map(|t| t.to_string()).unwrap_or_default();
            let b = block.map(|b| b.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{t},{measure},{group},{b},{v}");
        }
    };
    for t in &r.triads {
        let s = Some(t.triad);
        row(s, "accuracy", "receiver", None, Some(t.accuracy));
        for (group, roc) in [("overall", t.roc_overall), ("good", t.roc_good), ("bad", t.roc_bad)] {
            row(s, "auc", group, None, roc.map(|p| p.auc));
            row(s, "tpr", group, None, roc.map(|p| p.tpr));
            row(s, "fpr", group, None, roc.map(|p| p.fpr));
        }
        row(s, "mi", "good", None, t.mi_good);
        row(s, "mi", "bad", None, t.mi_bad);
    }
    for b in &r.learning.blocks {
        let k = Some(b.block);
        row(None, "beta", "good", k, b.beta_good);
        row(None, "beta", "bad", k, b.beta_bad);
        row(None, "correlation", "good", k, b.r_good);
        row(None, "correlation", "bad", k, b.r_bad);
    }
    for (m, t) in [("beta", &r.learning.beta), ("correlation", &r.learning.correlation)] {
        row(None, &format!("{m}_slope"), "good", None, t.good.map(|f| f.slope));
        row(None, &format!("{m}_slope"), "bad", None, t.bad.map(|f| f.slope));
        row(None, &format!("{m}_slope_z"), "good_minus_bad", None, t.difference.map(|d| d.z));
    }
    out
}
