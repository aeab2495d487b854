//! Evaluation metrics: AUC (Mann-Whitney, ties half-credited) and Logloss.

use crate::error::{Error, Result};

/// Per-task evaluation summary.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct TaskMetrics {
    pub auc: f64,
    pub logloss: f64,
    pub n: usize,
}

const PROB_CLAMP: f64 = 1e-12;

/// Area under the ROC curve through the rank formula:
/// AUC = (R⁺ − P(P+1)/2) / (P·N) with midranks for ties.
pub fn auc(labels: &[u8], scores: &[f64]) -> Result<f64> {
    check_binary(labels)?;
    if labels.len() != scores.len() {
        return Err(Error::InvalidInput("auc: labels/scores length mismatch".into()));
    }
    let pos = labels.iter().filter(|&&y| y == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric(
            "auc needs both classes present".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // midrank over the tie block [i, j)
        let midrank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            if labels[idx] == 1 {
                rank_sum_pos += midrank;
            }
        }
        i = j;
    }
    let p = pos as f64;
    let n = neg as f64;
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n))
}

/// Brute-force pairwise AUC: (wins + 0.5·ties) / (P·N).
pub fn auc_pairwise(labels: &[u8], scores: &[f64]) -> Result<f64> {
    check_binary(labels)?;
    let pos: Vec<f64> = labels
        .iter()
        .zip(scores)
        .filter(|(&y, _)| y == 1)
        .map(|(_, &s)| s)
        .collect();
    let neg: Vec<f64> = labels
        .iter()
        .zip(scores)
        .filter(|(&y, _)| y == 0)
        .map(|(_, &s)| s)
        .collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::UndefinedMetric(
            "auc needs both classes present".into(),
        ));
    }
    let mut credit = 0.0;
    for &p in &pos {
        for &n in &neg {
            if p > n {
                credit += 1.0;
            } else if p == n {
                credit += 0.5;
            }
        }
    }
    Ok(credit / (pos.len() as f64 * neg.len() as f64))
}

/// Self-test: the rank formula and the pairwise count agree to 1e-12.
pub fn auc_rank_equivalence_check(labels: &[u8], scores: &[f64]) -> bool {
    match (auc(labels, scores), auc_pairwise(labels, scores)) {
        (Ok(a), Ok(b)) => (a - b).abs() <= 1e-12,
        _ => false,
    }
}

/// Mean negative log-likelihood; probabilities clamped 1e-12 from {0,1}.
pub fn logloss(labels: &[u8], probs: &[f64]) -> Result<f64> {
    check_binary(labels)?;
    if labels.len() != probs.len() {
        return Err(Error::InvalidInput("logloss: labels/probs length mismatch".into()));
    }
    if labels.is_empty() {
        return Err(Error::InvalidInput("logloss: empty input".into()));
    }
    let sum: f64 = labels
        .iter()
        .zip(probs)
        .map(|(&y, &p)| {
            let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            if y == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    Ok(sum / labels.len() as f64)
}

fn check_binary(labels: &[u8]) -> Result<()> {
    if labels.iter().any(|&y| y > 1) {
        return Err(Error::Value("labels must be 0 or 1".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    #[test]
    fn auc_perfect_and_inverted() {
        assert_eq!(auc(&[1, 0], &[0.9, 0.1]).unwrap(), 1.0);
        assert_eq!(auc(&[1, 0], &[0.1, 0.9]).unwrap(), 0.0);
    }

    #[test]
    fn auc_ties_half_credit() {
        assert_eq!(auc(&[1, 0], &[0.5, 0.5]).unwrap(), 0.5);
    }

    #[test]
    fn auc_single_class_undefined() {
        assert!(matches!(
            auc(&[1, 1], &[0.2, 0.4]),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn auc_matches_pairwise_on_random_instances() {
        let mut rng = Rng::new(13);
        for _ in 0..50 {
            let n = 5 + rng.below(200);
            let labels: Vec<u8> = (0..n).map(|_| (rng.uniform() < 0.4) as u8).collect();
            if labels.iter().all(|&y| y == 0) || labels.iter().all(|&y| y == 1) {
                continue;
            }
            // quantize some scores to force ties
            let scores: Vec<f64> = (0..n).map(|_| (rng.uniform() * 8.0).floor() / 8.0).collect();
            assert!(auc_rank_equivalence_check(&labels, &scores));
        }
    }

    #[test]
    fn auc_monotone_transform_invariance() {
        let labels = [1, 0, 1, 0, 1, 0, 0];
        let scores = [0.9, 0.3, 0.7, 0.6, 0.2, 0.1, 0.5];
        let a = auc(&labels, &scores).unwrap();
        let transformed: Vec<f64> = scores.iter().map(|s| (3.0 * s + 1.0).exp()).collect();
        let b = auc(&labels, &transformed).unwrap();
        assert!((a - b).abs() <= 1e-15);
    }

    #[test]
    fn auc_complement_under_negation() {
        let labels = [1, 0, 1, 0, 0, 1];
        let scores = [0.91, 0.35, 0.77, 0.62, 0.13, 0.28];
        let a = auc(&labels, &scores).unwrap();
        let negated: Vec<f64> = scores.iter().map(|s| -s).collect();
        let b = auc(&labels, &negated).unwrap();
        assert!((a + b - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn logloss_half_is_ln2() {
        let l = logloss(&[1], &[0.5]).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() <= 1e-12);
    }

    #[test]
    fn logloss_confident_correct_vanishes() {
        let l = logloss(&[0], &[1e-15]).unwrap();
        assert!(l < 1e-11);
    }

    #[test]
    fn logloss_worked_value() {
        let l = logloss(&[1, 0], &[0.8, 0.2]).unwrap();
        assert!((l - (-0.8f64.ln())).abs() <= 1e-12);
        assert!((l - 0.22314).abs() <= 1e-5);
    }

    #[test]
    fn logloss_minimized_at_base_rate() {
        // constant predictor: 1-D grid over p, minimum at the empirical rate
        let labels = [1, 1, 1, 0, 0, 0, 0, 0, 0, 0];
        let base = 0.3;
        let at_base = logloss(&labels, &vec![base; 10]).unwrap();
        for i in 1..100 {
            let p = i as f64 / 100.0;
            let l = logloss(&labels, &vec![p; 10]).unwrap();
            assert!(l + 1e-12 >= at_base);
        }
    }
}
