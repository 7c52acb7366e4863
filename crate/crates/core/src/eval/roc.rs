use super::EvalError;

/// ROC points `(fpr, tpr)` from `(0, 0)` to `(1, 1)`, one per distinct score
/// taken as a threshold in descending order. Tied scores move both rates in
/// a single step.
pub fn roc_curve(scores: &[f64], is_positive: &[bool]) -> Result<Vec<(f64, f64)>, EvalError> {
    if scores.len() != is_positive.len() {
        return Err(EvalError::Length(scores.len(), is_positive.len()));
    }
    if let Some(&bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(EvalError::NonFiniteScore(bad));
    }
    let pos = is_positive.iter().filter(|&&p| p).count() as u64;
    let neg = is_positive.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if is_positive[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    Ok(points)
}

/// Trapezoidal area under a point list sorted by FPR.
pub fn auc(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}
