use serde::Serialize;

use super::MetricsError;

/// Per-class precision, recall, F1, and support (count of true
/// instances). The 0/0 cases use the 0 convention, so a class that is
/// never predicted and never occurs scores 0 across the board.
#[derive(Debug, Clone, Serialize)]
pub struct ClassStats {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub macro_f1: f64,
    pub micro_f1: f64,
    pub weighted_f1: f64,
    pub per_class: Vec<ClassStats>,
    /// `confusion[truth][pred]` counts.
    pub confusion: Vec<Vec<usize>>,
    pub n_examples: usize,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn f1_of(p: f64, r: f64) -> f64 {
    ratio(2.0 * p * r, p + r)
}

/// Computes per-class stats from the confusion matrix, macro (unweighted
/// mean over all `n_classes`), weighted (support-weighted mean), and
/// micro (from globally pooled TP/FP/FN, which equals accuracy for
/// single-label multi-class predictions).
pub fn f1_scores(
    preds: &[usize],
    truths: &[usize],
    n_classes: usize,
) -> Result<MetricsReport, MetricsError> {
    if preds.len() != truths.len() {
        return Err(MetricsError::LengthMismatch {
            preds: preds.len(),
            truths: truths.len(),
        });
    }
    for &label in preds.iter().chain(truths) {
        if label >= n_classes {
            return Err(MetricsError::LabelOutOfRange {
                label,
                classes: n_classes,
            });
        }
    }

    let mut confusion = vec![vec![0usize; n_classes]; n_classes];
    for (&p, &t) in preds.iter().zip(truths) {
        confusion[t][p] += 1;
    }

    let mut per_class = Vec::with_capacity(n_classes);
    let mut tp_total = 0usize;
    let mut fp_total = 0usize;
    let mut fn_total = 0usize;
    for c in 0..n_classes {
        let tp = confusion[c][c];
        let support: usize = confusion[c].iter().sum(); // tp + fn
        let predicted: usize = (0..n_classes).map(|t| confusion[t][c]).sum(); // tp + fp
        let precision = ratio(tp as f64, predicted as f64);
        let recall = ratio(tp as f64, support as f64);
        per_class.push(ClassStats {
            precision,
            recall,
            f1: f1_of(precision, recall),
            support,
        });
        tp_total += tp;
        fp_total += predicted - tp;
        fn_total += support - tp;
    }

    let n = preds.len();
    let macro_f1 = per_class.iter().map(|c| c.f1).sum::<f64>() / n_classes as f64;
    let weighted_f1 = ratio(
        per_class
            .iter()
            .map(|c| c.f1 * c.support as f64)
            .sum::<f64>(),
        n as f64,
    );
    let micro_p = ratio(tp_total as f64, (tp_total + fp_total) as f64);
    let micro_r = ratio(tp_total as f64, (tp_total + fn_total) as f64);
    let micro_f1 = f1_of(micro_p, micro_r);

    Ok(MetricsReport {
        macro_f1,
        micro_f1,
        weighted_f1,
        per_class,
        confusion,
        n_examples: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions_score_one() {
        let labels = [0usize, 1, 2, 1, 0];
        let r = f1_scores(&labels, &labels, 3).unwrap();
        assert_eq!(r.macro_f1, 1.0);
        assert_eq!(r.micro_f1, 1.0);
        assert_eq!(r.weighted_f1, 1.0);
    }

    #[test]
    fn hand_case_matches() {
        let truths = [0usize, 0, 1, 1, 2, 2];
        let preds = [0usize, 1, 1, 1, 2, 0];
        let r = f1_scores(&preds, &truths, 3).unwrap();
        let f1s: Vec<f64> = r.per_class.iter().map(|c| c.f1).collect();
        assert!((f1s[0] - 0.5).abs() < 1e-12);
        assert!((f1s[1] - 0.8).abs() < 1e-12);
        assert!((f1s[2] - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.macro_f1 - (0.5 + 0.8 + 2.0 / 3.0) / 3.0).abs() < 1e-12);
        assert!((r.macro_f1 - 0.6556).abs() < 1e-4);
        assert!((r.micro_f1 - 4.0 / 6.0).abs() < 1e-12);
        // Equal supports make the weighted mean equal the macro mean.
        assert!((r.weighted_f1 - r.macro_f1).abs() < 1e-12);
    }

    #[test]
    fn row_sums_count_examples() {
        let truths = [0usize, 2, 2, 1];
        let preds = [1usize, 2, 0, 1];
        let r = f1_scores(&preds, &truths, 3).unwrap();
        let total: usize = r.confusion.iter().map(|row| row.iter().sum::<usize>()).sum();
        assert_eq!(total, r.n_examples);
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(matches!(
            f1_scores(&[0], &[0, 1], 2).unwrap_err(),
            MetricsError::LengthMismatch { .. }
        ));
    }

    #[test]
    fn out_of_range_label_rejected() {
        assert!(matches!(
            f1_scores(&[3], &[0], 3).unwrap_err(),
            MetricsError::LabelOutOfRange { label: 3, .. }
        ));
    }
}
