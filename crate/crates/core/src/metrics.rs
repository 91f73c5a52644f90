//! Kendall's τ, Perfect Match Ratio and corpus-level reports.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::order::Ordering;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("kendall tau needs at least 2 items, got {0}")]
    TooShort(usize),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("no stories to score")]
    Empty,
}

/// Counts inversions of `seq` by merge sort.
fn count_inversions(seq: &mut [usize]) -> u64 {
    let n = seq.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut inv = count_inversions(&mut seq[..mid]) + count_inversions(&mut seq[mid..]);
    let mut merged = Vec::with_capacity(n);
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if seq[i] <= seq[j] {
            merged.push(seq[i]);
            i += 1;
        } else {
            merged.push(seq[j]);
            inv += (mid - i) as u64;
            j += 1;
        }
    }
    merged.extend_from_slice(&seq[i..mid]);
    merged.extend_from_slice(&seq[j..]);
    seq.copy_from_slice(&merged);
    inv
}

/// Number of sentence pairs ordered differently by `pred` and `gold`.
pub fn inversions(pred: &Ordering, gold: &Ordering) -> Result<u64, MetricError> {
    if pred.len() != gold.len() {
        return Err(MetricError::LengthMismatch(pred.len(), gold.len()));
    }
    // gold ranks read in predicted order: every descent is a disagreement
    let mut seq: Vec<usize> = pred
        .sequence()
        .into_iter()
        .map(|p| gold.ranks()[p])
        .collect();
    Ok(count_inversions(&mut seq))
}

/// τ = 1 − 2·inversions / (n(n−1)/2).
pub fn kendall_tau(pred: &Ordering, gold: &Ordering) -> Result<f64, MetricError> {
    let n = gold.len();
    if pred.len() != n {
        return Err(MetricError::LengthMismatch(pred.len(), n));
    }
    if n < 2 {
        return Err(MetricError::TooShort(n));
    }
    let inv = inversions(pred, gold)? as f64;
    let pairs = (n * (n - 1) / 2) as f64;
    Ok(1.0 - 2.0 * inv / pairs)
}

/// Fraction of stories whose predicted order matches gold exactly.
pub fn pmr(preds: &[Ordering], golds: &[Ordering]) -> Result<f64, MetricError> {
    if preds.len() != golds.len() {
        return Err(MetricError::LengthMismatch(preds.len(), golds.len()));
    }
    if preds.is_empty() {
        return Err(MetricError::Empty);
    }
    let exact = preds
        .iter()
        .zip(golds)
        .filter(|(p, g)| p.same_order(g))
        .count();
    Ok(exact as f64 / preds.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoryRecord {
    pub id: String,
    pub tau: f64,
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub label: String,
    pub mean_tau: f64,
    pub pmr: f64,
    pub n_stories: usize,
    pub records: Vec<StoryRecord>,
}

impl EvalReport {
    /// Aggregates per-story predictions. Records keep input order.
    pub fn from_predictions(
        label: impl Into<String>,
        items: &[(String, Ordering, Ordering)],
    ) -> Result<Self, MetricError> {
        if items.is_empty() {
            return Err(MetricError::Empty);
        }
        let mut records = Vec::with_capacity(items.len());
        for (id, pred, gold) in items {
            records.push(StoryRecord {
                id: id.clone(),
                tau: kendall_tau(pred, gold)?,
                exact: pred.same_order(gold),
            });
        }
        let n = records.len();
        let mean_tau = records.iter().map(|r| r.tau).sum::<f64>() / n as f64;
        let exact = records.iter().filter(|r| r.exact).count();
        Ok(Self {
            label: label.into(),
            mean_tau,
            pmr: exact as f64 / n as f64,
            n_stories: n,
            records,
        })
    }

    /// One JSON object per story, then a summary object.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        let summary = serde_json::json!({
            "summary": self.label,
            "n_stories": self.n_stories,
            "tau": self.mean_tau,
            "pmr": self.pmr,
        });
        out.push_str(&summary.to_string());
        out.push('\n');
        out
    }

    pub fn to_table(&self) -> String {
        render_table(std::slice::from_ref(self))
    }
}

/// Renders reports as rows of a `method | τ | PMR | stories` table.
pub fn render_table(reports: &[EvalReport]) -> String {
    let width = reports
        .iter()
        .map(|r| r.label.chars().count())
        .chain(std::iter::once(6))
        .max()
        .unwrap_or(6);
    let mut out = String::new();
    let _ = writeln!(out, "| {:<width$} | {:>7} | {:>7} | {:>7} |", "method", "tau", "pmr", "stories");
    let _ = writeln!(out, "|{}|{}|{}|{}|", "-".repeat(width + 2), "-".repeat(9), "-".repeat(9), "-".repeat(9));
    for r in reports {
        let _ = writeln!(
            out,
            "| {:<width$} | {:>7.4} | {:>7.4} | {:>7} |",
            r.label, r.mean_tau, r.pmr, r.n_stories
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn o(seq: &[usize]) -> Ordering {
        Ordering::from_sequence(seq).unwrap()
    }

    #[test]
    fn tau_examples() {
        let gold = o(&[0, 1, 2, 3, 4]);
        assert_eq!(kendall_tau(&gold, &gold).unwrap(), 1.0);
        assert_eq!(kendall_tau(&o(&[4, 3, 2, 1, 0]), &gold).unwrap(), -1.0);
        assert!((kendall_tau(&o(&[1, 0, 2, 3, 4]), &gold).unwrap() - 0.8).abs() < 1e-15);
        assert_eq!(inversions(&o(&[4, 3, 2, 1, 0]), &gold).unwrap(), 10);
    }

    #[test]
    fn tau_errors() {
        assert_eq!(
            kendall_tau(&o(&[0]), &o(&[0])),
            Err(MetricError::TooShort(1))
        );
        assert!(kendall_tau(&o(&[0, 1]), &o(&[0, 1, 2])).is_err());
    }

    #[test]
    fn pmr_examples() {
        let a = o(&[0, 1, 2]);
        let b = o(&[2, 1, 0]);
        assert_eq!(pmr(&[a.clone(), a.clone()], &[a.clone(), a.clone()]).unwrap(), 1.0);
        assert_eq!(pmr(&[b.clone(), b.clone()], &[a.clone(), a.clone()]).unwrap(), 0.0);
        assert_eq!(
            pmr(
                &[a.clone(), b.clone(), a.clone(), b.clone()],
                &[a.clone(), a.clone(), a.clone(), a.clone()]
            )
            .unwrap(),
            0.5
        );
        assert_eq!(pmr(&[], &[]), Err(MetricError::Empty));
    }

    #[test]
    fn report_aggregates() {
        let g = o(&[0, 1, 2, 3, 4]);
        let items = vec![
            ("a".to_string(), g.clone(), g.clone()),
            ("b".to_string(), o(&[1, 0, 2, 3, 4]), g.clone()),
        ];
        let r = EvalReport::from_predictions("pg2", &items).unwrap();
        assert_eq!(r.n_stories, 2);
        assert_eq!(r.pmr, 0.5);
        assert!((r.mean_tau - 0.9).abs() < 1e-12);
        let jsonl = r.to_jsonl();
        assert_eq!(jsonl.lines().count(), 3);
        assert!(jsonl.lines().last().unwrap().contains("\"summary\":\"pg2\""));
        let table = r.to_table();
        assert!(table.contains("| pg2"));
        assert!(table.contains("0.9000"));
        assert!(table.contains("0.5000"));
    }
}
