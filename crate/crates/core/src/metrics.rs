//! Sensitivity, precision and F-score with Crackle as the positive class.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no evaluated cycles")]
    EmptyEvaluation,
}

/// Confusion counts; positive class = Crackle.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn add(&mut self, other: &ConfusionCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }

    /// Tally one (prediction, label) pair, true = Crackle.
    pub fn record(&mut self, predicted_positive: bool, actually_positive: bool) {
        match (predicted_positive, actually_positive) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }
}

/// Se / P+ / F for one evaluation, plus plain accuracy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub se: f64,
    pub p_plus: f64,
    pub f_score: f64,
    pub accuracy: f64,
}

/// se = tp/(tp+fn), p+ = tp/(tp+fp), f = harmonic mean. 0/0 cases follow
/// the stated conventions (metric = 0).
pub fn compute_metrics(counts: &ConfusionCounts) -> Result<MetricsReport, MetricsError> {
    if counts.total() == 0 {
        return Err(MetricsError::EmptyEvaluation);
    }
    let se = if counts.tp + counts.fn_ == 0 {
        0.0
    } else {
        counts.tp as f64 / (counts.tp + counts.fn_) as f64
    };
    let p_plus = if counts.tp + counts.fp == 0 {
        0.0
    } else {
        counts.tp as f64 / (counts.tp + counts.fp) as f64
    };
    let f_score = f_from(se, p_plus);
    let accuracy = (counts.tp + counts.tn) as f64 / counts.total() as f64;
    Ok(MetricsReport { se, p_plus, f_score, accuracy })
}

/// F-score from sensitivity and precision: 2 se p / (se + p), 0 when both
/// vanish.
pub fn f_from(se: f64, p_plus: f64) -> f64 {
    if se + p_plus > 0.0 {
        2.0 * se * p_plus / (se + p_plus)
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direct_formula() {
        let counts = ConfusionCounts { tp: 3, fn_: 1, fp: 1, tn: 5 };
        let m = compute_metrics(&counts).unwrap();
        assert_eq!(m.se, 0.75);
        assert_eq!(m.p_plus, 0.75);
        assert_eq!(m.f_score, 0.75);
        assert_eq!(m.accuracy, 0.8);
    }

    #[test]
    fn zero_conventions() {
        let no_positives = ConfusionCounts { tp: 0, fn_: 0, fp: 0, tn: 5 };
        let m = compute_metrics(&no_positives).unwrap();
        assert_eq!((m.se, m.p_plus, m.f_score), (0.0, 0.0, 0.0));
        assert_eq!(
            compute_metrics(&ConfusionCounts::default()),
            Err(MetricsError::EmptyEvaluation)
        );
    }

    #[test]
    fn published_best_row_is_consistent() {
        assert!((f_from(0.8532, 0.8411) - 0.8471).abs() < 5e-4);
        assert!((f_from(0.8526, 0.6675) - 0.7487).abs() < 5e-4);
    }

    #[test]
    fn matches_bruteforce_recount() {
        let mut state = 7u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            state >> 33
        };
        for _ in 0..1000 {
            let n = (next() % 50 + 1) as usize;
            let pairs: Vec<(bool, bool)> =
                (0..n).map(|_| (next() % 2 == 0, next() % 3 == 0)).collect();
            let mut counts = ConfusionCounts::default();
            for &(p, a) in &pairs {
                counts.record(p, a);
            }
            // brute-force recount
            let tp = pairs.iter().filter(|(p, a)| *p && *a).count() as u64;
            let fp = pairs.iter().filter(|(p, a)| *p && !*a).count() as u64;
            let fn_ = pairs.iter().filter(|(p, a)| !*p && *a).count() as u64;
            let tn = pairs.iter().filter(|(p, a)| !*p && !*a).count() as u64;
            assert_eq!(counts, ConfusionCounts { tp, fp, tn, fn_ });
            let m = compute_metrics(&counts).unwrap();
            let se = if tp + fn_ > 0 { tp as f64 / (tp + fn_) as f64 } else { 0.0 };
            let pp = if tp + fp > 0 { tp as f64 / (tp + fp) as f64 } else { 0.0 };
            assert_eq!(m.se, se);
            assert_eq!(m.p_plus, pp);
        }
    }
}
