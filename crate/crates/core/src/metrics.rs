//! Performance and group-fairness metrics, and the scalar fitness that
//! combines them.
//!
//! Group 0 of the protected attribute is the unprivileged group and every
//! fairness metric compares model predictions, not ground-truth labels,
//! across the two groups.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on disparate impact.
pub const DI_CAP: f64 = 10.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: f64,
    pub fp: f64,
    pub tn: f64,
    #[serde(rename = "fn")]
    pub fn_: f64,
}

impl ConfusionCounts {
    pub fn from_predictions(preds: &[u8], labels: &[u8]) -> Self {
        let mut c = Self::default();
        for (&p, &y) in preds.iter().zip(labels) {
            match (p, y) {
                (1, 1) => c.tp += 1.0,
                (1, _) => c.fp += 1.0,
                (_, 1) => c.fn_ += 1.0,
                _ => c.tn += 1.0,
            }
        }
        c
    }

    pub fn total(&self) -> f64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Precision and recall, each defined as 0 when its denominator is 0.
pub fn precision_recall(c: &ConfusionCounts) -> (f64, f64) {
    let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
    (ratio(c.tp, c.tp + c.fp), ratio(c.tp, c.tp + c.fn_))
}

/// Area under the precision-recall curve, `sum (R_{i+1} - R_i) P_{i+1}`
/// over distinct descending score thresholds starting from recall 0.
/// Tied scores enter the curve together.
pub fn pr_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    check_lengths(scores.len(), labels.len())?;
    let positives = labels.iter().filter(|&&y| y == 1).count();
    if positives == 0 {
        return Err(Error::UndefinedMetric("PR-AUC needs at least one positive label".into()));
    }
    if let Some(s) = scores.iter().find(|s| s.is_nan()) {
        return Err(Error::Numeric(format!("score {s}")));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]));

    let (mut tp, mut fp) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut area = 0.0;
    let mut pos = 0;
    while pos < order.len() {
        let t = scores[order[pos]];
        while pos < order.len() && scores[order[pos]] == t {
            if labels[order[pos]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            pos += 1;
        }
        let recall = tp as f64 / positives as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(area)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupFairness {
    pub spd: f64,
    pub eod: f64,
    pub di: f64,
}

/// Statistical parity difference, equal opportunity difference and
/// disparate impact of `preds` between unprivileged (`a = 0`) and
/// privileged (`a = 1`) rows.
pub fn group_fairness(preds: &[u8], labels: &[u8], a: &[u8]) -> Result<GroupFairness> {
    check_lengths(preds.len(), labels.len())?;
    check_lengths(preds.len(), a.len())?;
    // [group][favorable predictions, rows, true positives, positives]
    let mut tally = [[0usize; 4]; 2];
    for ((&p, &y), &g) in preds.iter().zip(labels).zip(a) {
        let t = &mut tally[usize::from(g)];
        t[0] += usize::from(p);
        t[1] += 1;
        t[2] += usize::from(p == 1 && y == 1);
        t[3] += usize::from(y);
    }
    for (g, t) in tally.iter().enumerate() {
        if t[1] == 0 {
            return Err(Error::DegenerateGroup(format!("no rows with protected value {g}")));
        }
        if t[3] == 0 {
            return Err(Error::DegenerateGroup(format!("no positive labels with protected value {g}")));
        }
    }
    let rate = |g: usize| tally[g][0] as f64 / tally[g][1] as f64;
    let tpr = |g: usize| tally[g][2] as f64 / tally[g][3] as f64;
    let (r0, r1) = (rate(0), rate(1));
    Ok(GroupFairness {
        spd: r0 - r1,
        eod: tpr(0) - tpr(1),
        di: disparate_impact(r0, r1),
    })
}

pub fn disparate_impact(unprivileged_rate: f64, privileged_rate: f64) -> f64 {
    if privileged_rate == 0.0 {
        if unprivileged_rate == 0.0 { 1.0 } else { DI_CAP }
    } else {
        (unprivileged_rate / privileged_rate).min(DI_CAP)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FsMode {
    /// `|spd| + |eod| + min(1, |1 - di|)`: every term is 0 when unbiased.
    #[default]
    Deviation,
    /// `|spd| + |eod| + |di|`.
    Literal,
}

impl fmt::Display for FsMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FsMode::Deviation => "deviation",
            FsMode::Literal => "literal",
        })
    }
}

impl std::str::FromStr for FsMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "deviation" => Ok(FsMode::Deviation),
            "literal" => Ok(FsMode::Literal),
            other => Err(Error::InvalidConfig(format!("unknown fs mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitnessWeights {
    pub w_perf: f64,
    pub w_fair: f64,
    pub fs_mode: FsMode,
}

impl Default for FitnessWeights {
    fn default() -> Self {
        Self {
            w_perf: 0.5,
            w_fair: 0.5,
            fs_mode: FsMode::Deviation,
        }
    }
}

impl FitnessWeights {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.w_perf) || !ok(self.w_fair) || self.w_perf + self.w_fair <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "fitness weights must be non-negative with a positive sum, got {} and {}",
                self.w_perf, self.w_fair
            )));
        }
        Ok(())
    }
}

pub fn fairness_score(spd: f64, eod: f64, di: f64, mode: FsMode) -> f64 {
    let di_term = match mode {
        FsMode::Deviation => (1.0 - di).abs().min(1.0),
        FsMode::Literal => di.abs(),
    };
    spd.abs() + eod.abs() + di_term
}

/// `w_perf * ps - w_fair * fs`.
pub fn fitness(ps: f64, fs: f64, fw: &FitnessWeights) -> f64 {
    fw.w_perf * ps - fw.w_fair * fs
}

/// Metrics of one evaluation fold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub precision: f64,
    pub recall: f64,
    pub pr_auc: f64,
    pub spd: f64,
    pub eod: f64,
    pub di: f64,
}

impl FoldMetrics {
    /// Label metrics use `score >= threshold`.
    pub fn compute(scores: &[f64], labels: &[u8], a: &[u8], threshold: f64) -> Result<Self> {
        let preds = crate::models::threshold_scores(scores, threshold);
        let (precision, recall) = precision_recall(&ConfusionCounts::from_predictions(&preds, labels));
        let GroupFairness { spd, eod, di } = group_fairness(&preds, labels, a)?;
        Ok(Self {
            precision,
            recall,
            pr_auc: pr_auc(scores, labels)?,
            spd,
            eod,
            di,
        })
    }
}

/// Fold-averaged metrics with the fitness derived from them.
///
/// Each reported metric is the unweighted mean of its per-fold values;
/// `fs` and `fitness` are then computed from those means under `weights`.
/// A disqualified report carries an `error`, null metrics and a fitness
/// of negative infinity (serialized as `null`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(with = "nullable")]
    pub precision: f64,
    #[serde(with = "nullable")]
    pub recall: f64,
    #[serde(with = "nullable")]
    pub pr_auc: f64,
    #[serde(with = "nullable")]
    pub spd: f64,
    #[serde(with = "nullable")]
    pub eod: f64,
    #[serde(with = "nullable")]
    pub di: f64,
    #[serde(with = "nullable")]
    pub ps: f64,
    #[serde(with = "nullable")]
    pub fs: f64,
    #[serde(with = "fitness_value")]
    pub fitness: f64,
    pub weights: FitnessWeights,
    pub folds: Vec<FoldMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl EvalReport {
    pub fn from_folds(folds: Vec<FoldMetrics>, weights: FitnessWeights) -> Result<Self> {
        if folds.is_empty() {
            return Err(Error::InvalidConfig("no folds to aggregate".into()));
        }
        let mean = |f: fn(&FoldMetrics) -> f64| folds.iter().map(f).sum::<f64>() / folds.len() as f64;
        let precision = mean(|m| m.precision);
        let recall = mean(|m| m.recall);
        let pr_auc = mean(|m| m.pr_auc);
        let spd = mean(|m| m.spd);
        let eod = mean(|m| m.eod);
        let di = mean(|m| m.di);
        let ps = pr_auc;
        let fs = fairness_score(spd, eod, di, weights.fs_mode);
        Ok(Self {
            precision,
            recall,
            pr_auc,
            spd,
            eod,
            di,
            ps,
            fs,
            fitness: fitness(ps, fs, &weights),
            weights,
            folds,
            error: None,
        })
    }

    pub fn disqualified(error: impl Into<String>, weights: FitnessWeights) -> Self {
        Self {
            precision: f64::NAN,
            recall: f64::NAN,
            pr_auc: f64::NAN,
            spd: f64::NAN,
            eod: f64::NAN,
            di: f64::NAN,
            ps: f64::NAN,
            fs: f64::NAN,
            fitness: f64::NEG_INFINITY,
            weights,
            folds: Vec::new(),
            error: Some(error.into()),
        }
    }

    pub fn is_disqualified(&self) -> bool {
        self.error.is_some()
    }

    /// The same folds scored under different fitness weights.
    pub fn reweighted(&self, weights: FitnessWeights) -> Self {
        if self.is_disqualified() {
            let mut r = self.clone();
            r.weights = weights;
            return r;
        }
        Self::from_folds(self.folds.clone(), weights).expect("report has folds")
    }
}

mod nullable {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() { s.serialize_f64(*v) } else { s.serialize_none() }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

mod fitness_value {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        super::nullable::serialize(v, s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
    }
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::InvalidSample(format!("length mismatch: {a} vs {b}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precision_recall_cases() {
        let c = |tp, fp, fn_| ConfusionCounts { tp, fp, tn: 0.0, fn_ };
        assert_eq!(precision_recall(&c(3.0, 1.0, 1.0)), (0.75, 0.75));
        assert_eq!(precision_recall(&c(0.0, 0.0, 5.0)), (0.0, 0.0));
        assert_eq!(precision_recall(&c(5.0, 0.0, 0.0)), (1.0, 1.0));
    }

    #[test]
    fn pr_auc_cases() {
        let v = pr_auc(&[0.9, 0.8, 0.7, 0.6], &[1, 1, 0, 1]).unwrap();
        assert!((v - 11.0 / 12.0).abs() < 1e-12, "{v}");
        assert_eq!(pr_auc(&[0.9, 0.8, 0.3, 0.1], &[1, 1, 0, 0]).unwrap(), 1.0);
        assert_eq!(pr_auc(&[0.1, 0.5, 0.5], &[1, 1, 1]).unwrap(), 1.0);
        assert!(matches!(pr_auc(&[0.1, 0.2], &[0, 0]), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn pr_auc_groups_ties() {
        // one threshold: recall 1 at precision 1/2
        assert_eq!(pr_auc(&[0.5, 0.5], &[1, 0]).unwrap(), 0.5);
        assert_eq!(pr_auc(&[0.5, 0.5], &[0, 1]).unwrap(), 0.5);
    }

    #[test]
    fn group_fairness_cases() {
        // A=0: 4 rows, 1 favorable; A=1: 6 rows, 3 favorable
        let a = [0, 0, 0, 0, 1, 1, 1, 1, 1, 1];
        let preds = [1, 0, 0, 0, 1, 1, 1, 0, 0, 0];
        let labels = [1, 1, 0, 0, 1, 1, 0, 1, 1, 0];
        let g = group_fairness(&preds, &labels, &a).unwrap();
        assert_eq!(g.spd, -0.25);
        assert_eq!(g.di, 0.5);
        // TPR: A=0 1/2, A=1 2/4
        assert_eq!(g.eod, 0.0);

        let fair = group_fairness(&[1, 0, 1, 0], &[1, 0, 1, 0], &[0, 0, 1, 1]).unwrap();
        assert_eq!((fair.spd, fair.eod, fair.di), (0.0, 0.0, 1.0));

        let eod = group_fairness(&[1, 1, 1, 0], &[1, 1, 1, 1], &[0, 0, 1, 1]).unwrap();
        assert_eq!(eod.eod, 0.5);

        assert!(matches!(group_fairness(&[1, 0], &[1, 0], &[1, 1]), Err(Error::DegenerateGroup(_))));
    }

    #[test]
    fn disparate_impact_edges() {
        assert_eq!(disparate_impact(0.0, 0.0), 1.0);
        assert_eq!(disparate_impact(0.2, 0.0), DI_CAP);
        assert_eq!(disparate_impact(0.9, 0.05), DI_CAP);
        assert_eq!(disparate_impact(0.25, 0.5), 0.5);
    }

    #[test]
    fn fitness_golden_values() {
        let fw = FitnessWeights::default();
        let a = fitness(0.88, 0.10, &fw);
        let b = fitness(0.90, 0.45, &fw);
        assert_eq!(a, 0.39);
        assert_eq!(b, 0.225);
        assert!(a > b);
        assert_eq!(fairness_score(0.0, 0.0, 1.0, FsMode::Deviation), 0.0);
        assert_eq!(fairness_score(0.0, 0.0, 1.0, FsMode::Literal), 1.0);
        assert_eq!(fairness_score(-0.1, 0.2, 4.0, FsMode::Deviation), 1.3);
    }

    #[test]
    fn report_is_recomputable_and_serializes() {
        let folds = vec![
            FoldMetrics { precision: 0.8, recall: 0.6, pr_auc: 0.9, spd: -0.2, eod: 0.1, di: 0.7 },
            FoldMetrics { precision: 0.6, recall: 0.8, pr_auc: 0.7, spd: 0.0, eod: -0.3, di: 0.9 },
        ];
        let r = EvalReport::from_folds(folds, FitnessWeights::default()).unwrap();
        assert!((r.ps - 0.8).abs() < 1e-12);
        assert!((r.spd + 0.1).abs() < 1e-12);
        assert_eq!(r.fs, fairness_score(r.spd, r.eod, r.di, FsMode::Deviation));
        assert_eq!(r.fitness, fitness(r.ps, r.fs, &r.weights));
        let back: EvalReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);

        let d = EvalReport::disqualified("boom", FitnessWeights::default());
        let json = serde_json::to_string(&d).unwrap();
        assert!(json.contains("\"fitness\":null"));
        let back: EvalReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.fitness, f64::NEG_INFINITY);
        assert_eq!(back.error.as_deref(), Some("boom"));
    }

    #[test]
    fn fs_mode_parses() {
        assert_eq!("literal".parse::<FsMode>().unwrap(), FsMode::Literal);
        assert!("other".parse::<FsMode>().is_err());
        assert_eq!(serde_json::to_string(&FsMode::Deviation).unwrap(), "\"deviation\"");
    }
}
