//! Closed-form training and evaluation arithmetic: the warm-up learning-rate
//! schedule, weighted cross-entropy pieces, and multi-class
//! precision/recall/F1 reporting with micro, macro, and support-weighted
//! aggregates.
//!
//! Only the arithmetic lives here. Optimizer state, early stopping, and the
//! training loop itself are out of scope; the constants they would consume
//! are recorded as [`ADAM_WEIGHT_DECAY`] and [`EARLY_STOPPING_PATIENCE`] so
//! configurations stay reproducible.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CprGroup;

/// Weight-decay coefficient used with Adam in the reference configuration.
pub const ADAM_WEIGHT_DECAY: f64 = 0.01;

/// Early-stopping patience (validation checks without improvement) in the
/// reference configuration.
pub const EARLY_STOPPING_PATIENCE: u32 = 6;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("schedule step must be at least 1, got {got}")]
    InvalidStep { got: u64 },
    #[error("lr_factor must be positive and warm_up at least 1")]
    InvalidSchedule,
    #[error("{what}: length mismatch, {lhs} vs {rhs}")]
    LengthMismatch { what: &'static str, lhs: usize, rhs: usize },
    #[error("invalid probability distribution: {reason}")]
    InvalidDistribution { reason: String },
    #[error("at least one report is required")]
    EmptyInput,
    #[error("predictions line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
}

/// Noam-style warm-up schedule parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleParams {
    pub lr_factor: f64,
    pub warm_up: u64,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        ScheduleParams { lr_factor: 0.0005, warm_up: 1000 }
    }
}

impl ScheduleParams {
    pub fn validate(&self) -> Result<(), EvalError> {
        if !(self.lr_factor > 0.0 && self.lr_factor.is_finite()) || self.warm_up < 1 {
            return Err(EvalError::InvalidSchedule);
        }
        Ok(())
    }
}

/// `lr = lr_factor * min(step^-0.5, step * warm_up^-1.5)`.
///
/// The ramp branch is computed as `warm_up^-0.5 * (step / warm_up)`, which
/// is algebraically `step * warm_up^-1.5` but evaluates to exactly
/// `warm_up^-0.5` at `step == warm_up`, making the two branches meet
/// bit-for-bit at the boundary.
pub fn lr_schedule(step: u64, params: &ScheduleParams) -> Result<f64, EvalError> {
    params.validate()?;
    if step < 1 {
        return Err(EvalError::InvalidStep { got: step });
    }
    let decay = (step as f64).powf(-0.5);
    let ramp = (params.warm_up as f64).powf(-0.5) * (step as f64 / params.warm_up as f64);
    Ok(params.lr_factor * decay.min(ramp))
}

/// `sum(w_i * l_i)`, accumulated left to right. Weights are expected to be
/// non-negative; they are not rescaled here.
pub fn weighted_loss(losses: &[f64], weights: &[f64]) -> Result<f64, EvalError> {
    if losses.len() != weights.len() {
        return Err(EvalError::LengthMismatch {
            what: "weighted_loss",
            lhs: losses.len(),
            rhs: weights.len(),
        });
    }
    Ok(losses.iter().zip(weights).map(|(l, w)| w * l).sum())
}

/// Cross-entropy of a gold class under a predicted distribution:
/// `-ln(max(p_gold, 1e-12))`. The distribution must be non-negative and sum
/// to 1 within 1e-9.
pub fn cross_entropy(probabilities: &[f64], gold_index: usize) -> Result<f64, EvalError> {
    if let Some(p) = probabilities.iter().find(|p| !(**p >= 0.0)) {
        return Err(EvalError::InvalidDistribution { reason: format!("negative or NaN probability {p}") });
    }
    let sum: f64 = probabilities.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(EvalError::InvalidDistribution { reason: format!("probabilities sum to {sum}") });
    }
    let Some(&p_gold) = probabilities.get(gold_index) else {
        return Err(EvalError::InvalidDistribution {
            reason: format!("gold index {gold_index} outside {} classes", probabilities.len()),
        });
    };
    Ok(-p_gold.max(1e-12).ln())
}

/// One-vs-rest counts for a single class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClassCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// Gold instances of this class.
    pub support: usize,
}

/// Per-class confusion counts over a single-label prediction set.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub per_class: BTreeMap<CprGroup, ClassCounts>,
    pub total: usize,
}

/// Tallies one-vs-rest counts. Classes appearing in neither sequence carry
/// no entry.
pub fn confusion(gold: &[CprGroup], pred: &[CprGroup]) -> Result<ConfusionCounts, EvalError> {
    if gold.len() != pred.len() {
        return Err(EvalError::LengthMismatch { what: "confusion", lhs: gold.len(), rhs: pred.len() });
    }
    let mut counts = ConfusionCounts { total: gold.len(), ..ConfusionCounts::default() };
    for (&g, &p) in gold.iter().zip(pred) {
        let g_entry = counts.per_class.entry(g).or_default();
        g_entry.support += 1;
        if g == p {
            g_entry.tp += 1;
        } else {
            g_entry.fn_ += 1;
            counts.per_class.entry(p).or_default().fp += 1;
        }
    }
    Ok(counts)
}

/// Precision/recall/F1 for one class. Any 0/0 ratio is defined as 0.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Spread of the aggregate scores across repeated runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStatistics {
    pub runs: usize,
    pub micro_f1_std: f64,
    pub macro_f1_std: f64,
    pub weighted_f1_std: f64,
    pub per_class_f1_std: BTreeMap<CprGroup, f64>,
}

/// Full evaluation report. `run_stats` is present only on reports produced
/// by [`aggregate_runs`], where the score fields hold per-run means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_class: BTreeMap<CprGroup, ClassScores>,
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub run_stats: Option<RunStatistics>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Scores a confusion table.
///
/// Per class: `P = tp/(tp+fp)`, `R = tp/(tp+fn)`, `F1 = 2PR/(P+R)`, each 0
/// when its denominator is 0. Macro-F1 averages classes with support > 0
/// (classes predicted but never gold would otherwise drag the mean with
/// undefined recall). Weighted-F1 is the support-weighted mean. Micro-F1 is
/// `2*TP / (2*TP + FP + FN)` over pooled counts, which for single-label
/// predictions equals accuracy.
pub fn scores(counts: &ConfusionCounts) -> EvalReport {
    let mut per_class = BTreeMap::new();
    let (mut tp_sum, mut fp_sum, mut fn_sum) = (0usize, 0usize, 0usize);
    let (mut macro_sum, mut macro_n) = (0.0f64, 0usize);
    let mut weighted_sum = 0.0f64;

    for (&class, c) in &counts.per_class {
        let precision = ratio(c.tp, c.tp + c.fp);
        let recall = ratio(c.tp, c.tp + c.fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        per_class.insert(class, ClassScores { precision, recall, f1, support: c.support });
        tp_sum += c.tp;
        fp_sum += c.fp;
        fn_sum += c.fn_;
        if c.support > 0 {
            macro_sum += f1;
            macro_n += 1;
            weighted_sum += c.support as f64 / counts.total as f64 * f1;
        }
    }

    let micro_den = 2 * tp_sum + fp_sum + fn_sum;
    EvalReport {
        per_class,
        micro_f1: if micro_den == 0 { 0.0 } else { 2.0 * tp_sum as f64 / micro_den as f64 },
        macro_f1: if macro_n == 0 { 0.0 } else { macro_sum / macro_n as f64 },
        weighted_f1: weighted_sum,
        run_stats: None,
    }
}

/// Convenience: confusion + scores in one call.
pub fn evaluate(gold: &[CprGroup], pred: &[CprGroup]) -> Result<EvalReport, EvalError> {
    Ok(scores(&confusion(gold, pred)?))
}

/// Which standard-deviation divisor [`aggregate_runs`] uses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceMode {
    /// Divisor n.
    #[default]
    Population,
    /// Divisor n-1 (0 for a single run).
    Sample,
}

fn std_dev(values: &[f64], mode: VarianceMode) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    let divisor = match mode {
        VarianceMode::Population => n,
        VarianceMode::Sample if values.len() > 1 => n - 1.0,
        VarianceMode::Sample => return 0.0,
    };
    (ss / divisor).sqrt()
}

/// Element-wise mean across repeated runs, with standard deviations of the
/// aggregate and per-class F1 scores in `run_stats`.
///
/// Runs are expected to share the same class set and supports (repeated
/// evaluations of one dataset); a class missing from some run contributes 0
/// to that run's entry for it, and mean supports are rounded to nearest.
pub fn aggregate_runs(
    reports: &[EvalReport],
    mode: VarianceMode,
) -> Result<EvalReport, EvalError> {
    if reports.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let n = reports.len() as f64;
    let collect = |f: fn(&EvalReport) -> f64| -> Vec<f64> { reports.iter().map(f).collect() };
    let mean = |f: fn(&EvalReport) -> f64| -> f64 { collect(f).iter().sum::<f64>() / n };

    let classes: std::collections::BTreeSet<CprGroup> =
        reports.iter().flat_map(|r| r.per_class.keys().copied()).collect();
    let mut per_class = BTreeMap::new();
    let mut per_class_f1_std = BTreeMap::new();
    for class in classes {
        let column = |f: fn(&ClassScores) -> f64| -> Vec<f64> {
            reports.iter().map(|r| r.per_class.get(&class).map(f).unwrap_or(0.0)).collect()
        };
        let mean_of = |f: fn(&ClassScores) -> f64| column(f).iter().sum::<f64>() / n;
        per_class.insert(
            class,
            ClassScores {
                precision: mean_of(|s| s.precision),
                recall: mean_of(|s| s.recall),
                f1: mean_of(|s| s.f1),
                support: mean_of(|s| s.support as f64).round() as usize,
            },
        );
        per_class_f1_std.insert(class, std_dev(&column(|s| s.f1), mode));
    }

    Ok(EvalReport {
        per_class,
        micro_f1: mean(|r| r.micro_f1),
        macro_f1: mean(|r| r.macro_f1),
        weighted_f1: mean(|r| r.weighted_f1),
        run_stats: Some(RunStatistics {
            runs: reports.len(),
            micro_f1_std: std_dev(&collect(|r| r.micro_f1), mode),
            macro_f1_std: std_dev(&collect(|r| r.macro_f1), mode),
            weighted_f1_std: std_dev(&collect(|r| r.weighted_f1), mode),
            per_class_f1_std,
        }),
    })
}

/// Renders a report as an aligned text table: one row per class, aggregate
/// footer, and a standard-deviation column when run statistics are present.
pub fn emit_report_table(report: &EvalReport) -> String {
    let mut out = String::new();
    let stats = report.run_stats.as_ref();
    let _ = writeln!(
        out,
        "{:<10} {:>9} {:>9} {:>9} {:>9}{}",
        "class",
        "precision",
        "recall",
        "f1",
        "support",
        if stats.is_some() { "    f1 std" } else { "" }
    );
    for (class, s) in &report.per_class {
        let std_col = stats
            .map(|st| format!("    {:.4}", st.per_class_f1_std.get(class).copied().unwrap_or(0.0)))
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{:<10} {:>9.4} {:>9.4} {:>9.4} {:>9}{std_col}",
            class.to_string(),
            s.precision,
            s.recall,
            s.f1,
            s.support
        );
    }
    let footer = [
        ("micro F1", report.micro_f1, stats.map(|s| s.micro_f1_std)),
        ("macro F1", report.macro_f1, stats.map(|s| s.macro_f1_std)),
        ("weighted F1", report.weighted_f1, stats.map(|s| s.weighted_f1_std)),
    ];
    for (name, value, std) in footer {
        let std_col = std.map(|v| format!("  (std {v:.4})")).unwrap_or_default();
        let _ = writeln!(out, "{name:<12} {value:.4}{std_col}");
    }
    if let Some(st) = stats {
        let _ = writeln!(out, "runs: {}", st.runs);
    }
    out
}

/// Parses a two-column prediction TSV: `instance_id TAB label`.
pub fn parse_label_tsv(content: &str) -> Result<Vec<(String, CprGroup)>, EvalError> {
    let mut rows = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let (id, label) = line.split_once('\t').ok_or_else(|| EvalError::MalformedRow {
            line: idx + 1,
            reason: "expected `instance_id TAB label`".into(),
        })?;
        let label: CprGroup = label
            .parse()
            .map_err(|e: String| EvalError::MalformedRow { line: idx + 1, reason: e })?;
        rows.push((id.to_string(), label));
    }
    Ok(rows)
}

/// Parses a combined prediction TSV: `instance_id TAB gold TAB pred`.
pub fn parse_predictions_tsv(
    content: &str,
) -> Result<Vec<(String, CprGroup, CprGroup)>, EvalError> {
    let mut rows = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split('\t').collect();
        let [id, gold, pred] = parts.as_slice() else {
            return Err(EvalError::MalformedRow {
                line: idx + 1,
                reason: "expected `instance_id TAB gold TAB pred`".into(),
            });
        };
        let parse = |s: &str| -> Result<CprGroup, EvalError> {
            s.parse().map_err(|e: String| EvalError::MalformedRow { line: idx + 1, reason: e })
        };
        rows.push((id.to_string(), parse(gold)?, parse(pred)?));
    }
    Ok(rows)
}

/// Emits the combined `instance_id TAB gold TAB pred` format.
pub fn emit_predictions_tsv(rows: &[(String, CprGroup, CprGroup)]) -> String {
    let mut out = String::new();
    for (id, gold, pred) in rows {
        let _ = writeln!(out, "{id}\t{gold}\t{pred}");
    }
    out
}

/// Joins separate gold and prediction files on instance id. Both must hold
/// exactly the same ids; gold-file order wins.
pub fn join_predictions(
    gold: &[(String, CprGroup)],
    pred: &[(String, CprGroup)],
) -> Result<Vec<(String, CprGroup, CprGroup)>, EvalError> {
    if gold.len() != pred.len() {
        return Err(EvalError::LengthMismatch {
            what: "gold vs pred rows",
            lhs: gold.len(),
            rhs: pred.len(),
        });
    }
    let by_id: std::collections::HashMap<&str, CprGroup> =
        pred.iter().map(|(id, label)| (id.as_str(), *label)).collect();
    if by_id.len() != pred.len() {
        return Err(EvalError::MalformedRow { line: 0, reason: "duplicate prediction ids".into() });
    }
    gold.iter()
        .map(|(id, g)| {
            by_id.get(id.as_str()).map(|p| (id.clone(), *g, *p)).ok_or_else(|| {
                EvalError::MalformedRow { line: 0, reason: format!("no prediction for id `{id}`") }
            })
        })
        .collect()
}
