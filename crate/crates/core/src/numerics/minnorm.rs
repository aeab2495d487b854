use super::matrix::{axpy, dot, Matrix};
use crate::error::{Error, Result};

/// Nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexWeights(Vec<f64>);

impl SimplexWeights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.iter().any(|&x| x < 0.0 || !x.is_finite()) {
            return Err(Error::InvalidInput(
                "simplex weights must be finite and nonnegative".into(),
            ));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "simplex weights must sum to 1, got {sum}"
            )));
        }
        Ok(Self(w))
    }

    pub fn uniform(k: usize) -> Self {
        Self(vec![1.0 / k as f64; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Closed-form min-norm point of the segment between two gradients.
///
/// γ minimizes ‖γ g1 + (1−γ) g2‖² over [0,1].
pub fn min_norm_point_2(g1: &[f64], g2: &[f64]) -> Result<(SimplexWeights, Vec<f64>)> {
    if g1.len() != g2.len() {
        return Err(Error::InvalidInput(
            "min_norm_point_2: dimension mismatch".into(),
        ));
    }
    let diff: Vec<f64> = g1.iter().zip(g2).map(|(a, b)| a - b).collect();
    let denom = dot(&diff, &diff);
    if denom == 0.0 {
        return Ok((SimplexWeights::uniform(2), g1.to_vec()));
    }
    let gamma = ((dot(g2, g2) - dot(g1, g2)) / denom).clamp(0.0, 1.0);
    let d: Vec<f64> = g1
        .iter()
        .zip(g2)
        .map(|(a, b)| gamma * a + (1.0 - gamma) * b)
        .collect();
    Ok((SimplexWeights::new(vec![gamma, 1.0 - gamma])?, d))
}

/// Frank-Wolfe with exact line search for min ½‖Σ wᵢ gᵢ‖² over the simplex.
///
/// Starts from uniform weights; each iteration moves toward the vertex that
/// minimizes the linearized objective, stepping to the exact minimizer of the
/// 1-D quadratic along the segment.
pub fn frank_wolfe_min_norm(
    grads: &Matrix,
    iters: usize,
) -> Result<(SimplexWeights, Vec<f64>)> {
    let k = grads.rows();
    if k == 0 {
        return Err(Error::InvalidInput("frank_wolfe_min_norm: K must be >= 1".into()));
    }
    if iters == 0 {
        return Err(Error::InvalidInput("frank_wolfe_min_norm: iters must be >= 1".into()));
    }
    grads.check_finite("frank_wolfe_min_norm")?;
    if k == 1 {
        return Ok((SimplexWeights::new(vec![1.0])?, grads.row(0).to_vec()));
    }

    let mut w = vec![1.0 / k as f64; k];
    let mut d = grads.rows_combination(&w);
    for _ in 0..iters {
        // pairwise step: shift mass from the worst active vertex to the best
        let scores: Vec<f64> = (0..k).map(|i| dot(grads.row(i), &d)).collect();
        let toward = (0..k)
            .min_by(|&a, &b| scores[a].total_cmp(&scores[b]))
            .unwrap();
        let away = (0..k)
            .filter(|&i| w[i] > 0.0)
            .max_by(|&a, &b| scores[a].total_cmp(&scores[b]))
            .unwrap();
        // FW gap certifies optimality over the whole simplex
        if dot(&d, &d) - scores[toward] <= 1e-14 {
            break;
        }
        let v: Vec<f64> = grads
            .row(toward)
            .iter()
            .zip(grads.row(away))
            .map(|(s, a)| s - a)
            .collect();
        let vv = dot(&v, &v);
        if vv <= 1e-30 {
            break;
        }
        let t = (-dot(&d, &v) / vv).clamp(0.0, w[away]);
        if t == 0.0 {
            break;
        }
        w[toward] += t;
        w[away] -= t;
        axpy(t, &v, &mut d);
    }
    Ok((SimplexWeights::new(w)?, d))
}

/// Euclidean projection onto the probability simplex, sort-and-threshold.
pub fn project_to_simplex(v: &[f64]) -> SimplexWeights {
    let n = v.len();
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut tau = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        cum += x;
        let t = (cum - 1.0) / (i + 1) as f64;
        if x - t > 0.0 {
            tau = t;
        }
    }
    let w: Vec<f64> = v.iter().map(|&x| (x - tau).max(0.0)).collect();
    // renormalize away the last-ulp drift so the invariant holds exactly
    let sum: f64 = w.iter().sum();
    let w = if sum > 0.0 {
        w.into_iter().map(|x| x / sum).collect()
    } else {
        vec![1.0 / n as f64; n]
    };
    SimplexWeights::new(w).expect("projection output is feasible")
}
