//! Confusion-fraction analysis: for a pair of models, `r(i, j)` is the
//! fraction of group `i`'s instances among all instances predicted as
//! group `j`, so every non-empty column sums to 1. Differences of these
//! matrices show where one model's predictions moved relative to the
//! other's, and aggregating the diagonal and same-category blocks
//! quantifies corrections toward the truth or at least its category.

use crate::data::LabelHierarchy;

use super::f1::MetricsReport;
use super::MetricsError;

/// Column-normalized confusion matrix. Columns with no predictions carry
/// NaN sentinels and are listed in `empty_columns`.
#[derive(Debug, Clone)]
pub struct ConfusionFraction {
    /// `matrix[i][j]` = fraction of truth-`i` instances among predictions
    /// of class `j`.
    pub matrix: Vec<Vec<f64>>,
    pub empty_columns: Vec<usize>,
}

pub fn confusion_fraction(
    preds: &[usize],
    truths: &[usize],
    n_classes: usize,
) -> Result<ConfusionFraction, MetricsError> {
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
    let mut counts = vec![vec![0usize; n_classes]; n_classes];
    for (&p, &t) in preds.iter().zip(truths) {
        counts[t][p] += 1;
    }
    let col_sums: Vec<usize> = (0..n_classes)
        .map(|j| (0..n_classes).map(|i| counts[i][j]).sum())
        .collect();

    let mut matrix = vec![vec![0.0f64; n_classes]; n_classes];
    let mut empty_columns = Vec::new();
    for j in 0..n_classes {
        if col_sums[j] == 0 {
            empty_columns.push(j);
            for row in matrix.iter_mut() {
                row[j] = f64::NAN;
            }
        } else {
            for (i, row) in matrix.iter_mut().enumerate() {
                row[j] = counts[i][j] as f64 / col_sums[j] as f64;
            }
        }
    }
    Ok(ConfusionFraction {
        matrix,
        empty_columns,
    })
}

/// Elementwise `a - b` of two confusion-fraction matrices plus mass
/// aggregation. Columns empty in either input contribute zero and are
/// listed in `skipped_columns`. `same_category_gain` includes the
/// diagonal (the dashed squares of a block-structured heatmap).
#[derive(Debug, Clone)]
pub struct HeatmapDiff {
    pub matrix: Vec<Vec<f64>>,
    pub diagonal_gain: f64,
    pub same_category_gain: f64,
    pub other_category_gain: f64,
    pub skipped_columns: Vec<usize>,
}

pub fn heatmap_diff(
    a: &ConfusionFraction,
    b: &ConfusionFraction,
    hier: &LabelHierarchy,
) -> Result<HeatmapDiff, MetricsError> {
    let n = a.matrix.len();
    if b.matrix.len() != n
        || a.matrix.iter().any(|r| r.len() != n)
        || b.matrix.iter().any(|r| r.len() != n)
    {
        return Err(MetricsError::ShapeMismatch {
            a_rows: a.matrix.len(),
            a_cols: a.matrix.first().map_or(0, |r| r.len()),
            b_rows: b.matrix.len(),
            b_cols: b.matrix.first().map_or(0, |r| r.len()),
        });
    }

    let mut skipped: Vec<usize> = a
        .empty_columns
        .iter()
        .chain(&b.empty_columns)
        .copied()
        .collect();
    skipped.sort_unstable();
    skipped.dedup();

    let mut matrix = vec![vec![0.0f64; n]; n];
    let mut diagonal_gain = 0.0;
    let mut same_category_gain = 0.0;
    let mut other_category_gain = 0.0;
    for j in 0..n {
        if skipped.binary_search(&j).is_ok() {
            continue;
        }
        for i in 0..n {
            let d = a.matrix[i][j] - b.matrix[i][j];
            matrix[i][j] = d;
            if i == j {
                diagonal_gain += d;
            }
            if hier.siblings(i, j) {
                same_category_gain += d;
            } else {
                other_category_gain += d;
            }
        }
    }
    Ok(HeatmapDiff {
        matrix,
        diagonal_gain,
        same_category_gain,
        other_category_gain,
        skipped_columns: skipped,
    })
}

/// Groups with their training support and test F1, sorted by descending
/// support; equal supports keep group-index order.
pub fn per_group_f1_vs_support(
    report: &MetricsReport,
    train_counts: &[usize],
) -> Vec<(usize, usize, f64)> {
    let mut rows: Vec<(usize, usize, f64)> = report
        .per_class
        .iter()
        .enumerate()
        .map(|(g, stats)| (g, train_counts.get(g).copied().unwrap_or(0), stats.f1))
        .collect();
    rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::f1::f1_scores;

    fn flat_hier(n: usize) -> LabelHierarchy {
        // Two categories, even/odd split keeps sibling structure simple.
        LabelHierarchy::new(
            vec!["even".into(), "odd".into()],
            (0..n).map(|g| (format!("g{g}"), g % 2)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn perfect_predictions_give_identity() {
        let labels = [0usize, 1, 2, 0, 1, 2];
        let cf = confusion_fraction(&labels, &labels, 3).unwrap();
        assert!(cf.empty_columns.is_empty());
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_eq!(cf.matrix[i][j], expected);
            }
        }
    }

    #[test]
    fn degenerate_predictor_column_is_prior() {
        let truths = [0usize, 0, 0, 1, 2, 2];
        let preds = [0usize; 6];
        let cf = confusion_fraction(&preds, &truths, 3).unwrap();
        assert_eq!(cf.empty_columns, vec![1, 2]);
        assert!((cf.matrix[0][0] - 0.5).abs() < 1e-12);
        assert!((cf.matrix[1][0] - 1.0 / 6.0).abs() < 1e-12);
        assert!((cf.matrix[2][0] - 1.0 / 3.0).abs() < 1e-12);
        assert!(cf.matrix[0][1].is_nan());
    }

    #[test]
    fn hand_case_two_examples() {
        let truths = [0usize, 1];
        let preds = [1usize, 1];
        let cf = confusion_fraction(&preds, &truths, 2).unwrap();
        assert!((cf.matrix[0][1] - 0.5).abs() < 1e-12);
        assert!((cf.matrix[1][1] - 0.5).abs() < 1e-12);
        assert_eq!(cf.empty_columns, vec![0]);
    }

    #[test]
    fn nonempty_columns_sum_to_one() {
        let truths = [0usize, 0, 1, 1, 2, 3, 3, 2, 1, 0];
        let preds = [0usize, 1, 1, 2, 2, 3, 0, 2, 1, 3];
        let cf = confusion_fraction(&preds, &truths, 4).unwrap();
        for j in 0..4 {
            if cf.empty_columns.contains(&j) {
                continue;
            }
            let sum: f64 = (0..4).map(|i| cf.matrix[i][j]).sum();
            assert!((sum - 1.0).abs() < 1e-12, "column {j} sums to {sum}");
        }
    }

    #[test]
    fn identical_inputs_diff_to_zero() {
        let truths = [0usize, 1, 2, 3];
        let preds = [0usize, 1, 1, 3];
        let cf = confusion_fraction(&preds, &truths, 4).unwrap();
        let diff = heatmap_diff(&cf, &cf, &flat_hier(4)).unwrap();
        assert_eq!(diff.diagonal_gain, 0.0);
        assert_eq!(diff.same_category_gain, 0.0);
        assert_eq!(diff.other_category_gain, 0.0);
    }

    #[test]
    fn sibling_correction_raises_block_mass() {
        // Truth is group 0 (category "even"). Model B mislabels one
        // instance as group 1 (odd); model A corrects it to group 2,
        // still wrong but the truth's sibling.
        let truths = [0usize, 0, 2, 3, 1];
        let preds_b = [0usize, 1, 2, 3, 1];
        let preds_a = [0usize, 2, 2, 3, 1];
        let hier = flat_hier(4);
        let ca = confusion_fraction(&preds_a, &truths, 4).unwrap();
        let cb = confusion_fraction(&preds_b, &truths, 4).unwrap();
        let diff = heatmap_diff(&ca, &cb, &hier).unwrap();
        assert!(
            diff.same_category_gain > 0.0,
            "same-category mass should grow, got {}",
            diff.same_category_gain
        );
    }

    #[test]
    fn perfect_minus_random_gains_on_diagonal() {
        let truths = [0usize, 0, 1, 1, 2, 2, 3, 3];
        let random = [1usize, 2, 3, 0, 1, 3, 0, 2];
        let hier = flat_hier(4);
        let cp = confusion_fraction(&truths, &truths, 4).unwrap();
        let cr = confusion_fraction(&random, &truths, 4).unwrap();
        let diff = heatmap_diff(&cp, &cr, &hier).unwrap();
        assert!(diff.diagonal_gain > 0.0, "{}", diff.diagonal_gain);
    }

    #[test]
    fn support_sort_is_stable_on_ties() {
        let truths = [0usize, 0, 1, 1, 2, 2];
        let preds = [0usize, 0, 1, 0, 2, 2];
        let report = f1_scores(&preds, &truths, 3).unwrap();
        let rows = per_group_f1_vs_support(&report, &[10, 10, 30]);
        assert_eq!(rows[0].0, 2);
        assert_eq!(rows[1].0, 0);
        assert_eq!(rows[2].0, 1);
    }

    #[test]
    fn skewed_support_with_biased_predictor() {
        // Group 0 has 10x the support; the predictor collapses everything
        // onto it, so the minority class F1 is lower.
        let mut truths = vec![0usize; 20];
        truths.extend([1usize, 1]);
        let preds = vec![0usize; 22];
        let report = f1_scores(&preds, &truths, 2).unwrap();
        let rows = per_group_f1_vs_support(&report, &[20, 2]);
        assert!(rows[0].2 > rows[1].2);
        assert_eq!(report.per_class[1].f1, 0.0);
    }
}
