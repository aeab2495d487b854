//! Synthetic multi-task datasets with a task-correlation knob, CSV
//! ingestion, and deterministic splits.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

/// Dense features with K binary labels per example.
#[derive(Debug, Clone)]
pub struct MultiTaskDataset {
    pub features: Matrix,
    /// N×K labels in {0,1}.
    pub labels: Vec<Vec<u8>>,
    pub meta: String,
}

impl MultiTaskDataset {
    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    pub fn num_tasks(&self) -> usize {
        self.labels.first().map_or(0, |row| row.len())
    }

    /// Column of labels for one task.
    pub fn task_labels(&self, task: usize) -> Vec<u8> {
        self.labels.iter().map(|row| row[task]).collect()
    }
}

/// Generator parameters for the synthetic benchmark data.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub num_features: usize,
    pub num_tasks: usize,
    /// Cosine between task 1's direction and every other task direction.
    pub correlation: f64,
    /// Amplitude of the sinusoidal nonlinearity in the label logit.
    #[serde(default = "default_alpha")]
    pub nonlinearity: f64,
    pub seed: u64,
}

fn default_alpha() -> f64 {
    0.5
}

/// Sample a dataset: task directions u_1..u_K with cos(u_1, u_k) = ρ,
/// standard-normal features, labels Bernoulli(σ(uᵀx + α·sin(3uᵀx))).
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<MultiTaskDataset> {
    let (n, f, k) = (spec.n, spec.num_features, spec.num_tasks);
    if n < 1 || f < 2 {
        return Err(Error::InvalidInput("need n >= 1 and F >= 2".into()));
    }
    if !(-1.0..=1.0).contains(&spec.correlation) {
        return Err(Error::InvalidInput(format!(
            "correlation {} outside [-1,1]: target Gram matrix is not PSD",
            spec.correlation
        )));
    }
    if k > f {
        return Err(Error::InvalidInput(format!(
            "cannot place {k} directions with orthonormal residuals in {f} dimensions"
        )));
    }
    let mut rng = Rng::new(spec.seed);

    // u_1 uniform on the sphere; u_k = ρ·u_1 + √(1−ρ²)·r_k with the r_k
    // orthonormal and orthogonal to u_1
    let u1 = normalize(rng.normal_vec(f));
    let mut residuals: Vec<Vec<f64>> = Vec::new();
    while residuals.len() + 1 < k {
        let mut v = rng.normal_vec(f);
        project_out(&mut v, &u1);
        for r in &residuals {
            project_out(&mut v, r);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            residuals.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    let rho = spec.correlation;
    let ortho = (1.0 - rho * rho).max(0.0).sqrt();
    let mut directions = vec![u1.clone()];
    for r in &residuals {
        let u: Vec<f64> = u1.iter().zip(r).map(|(a, b)| rho * a + ortho * b).collect();
        directions.push(u);
    }

    let mut features = Matrix::zeros(n, f);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let x = rng.normal_vec(f);
        features.row_mut(i).copy_from_slice(&x);
        // one uniform per example, shared across tasks: identical directions
        // then yield identical labels
        let draw = rng.uniform();
        let mut row = Vec::with_capacity(k);
        for u in &directions {
            let z: f64 = u.iter().zip(&x).map(|(a, b)| a * b).sum();
            let logit = z + spec.nonlinearity * (3.0 * z).sin();
            let p = 1.0 / (1.0 + (-logit).exp());
            row.push((draw < p) as u8);
        }
        labels.push(row);
    }
    Ok(MultiTaskDataset {
        features,
        labels,
        meta: format!(
            "synthetic n={n} F={f} K={k} rho={rho} alpha={} seed={}",
            spec.nonlinearity, spec.seed
        ),
    })
}

fn normalize(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn project_out(v: &mut [f64], unit: &[f64]) {
    let c: f64 = v.iter().zip(unit).map(|(a, b)| a * b).sum();
    for (x, &u) in v.iter_mut().zip(unit) {
        *x -= c * u;
    }
}

/// Load a dataset from CSV with header `f0..f{F-1},y0..y{K-1}`.
pub fn load_csv(path: &Path, num_features: usize, num_tasks: usize) -> Result<MultiTaskDataset> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Schema("empty file: missing header".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    let mut expected: Vec<String> = (0..num_features).map(|i| format!("f{i}")).collect();
    expected.extend((0..num_tasks).map(|i| format!("y{i}")));
    for (i, name) in expected.iter().enumerate() {
        if cols.get(i).map(|c| c.trim()) != Some(name.as_str()) {
            return Err(Error::Schema(format!("missing or misplaced column '{name}'")));
        }
    }
    if cols.len() != expected.len() {
        return Err(Error::Schema(format!(
            "expected {} columns, found {}",
            expected.len(),
            cols.len()
        )));
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<Vec<u8>> = Vec::new();
    for (row_idx, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != expected.len() {
            return Err(Error::Schema(format!(
                "row {row_idx}: expected {} cells, found {}",
                expected.len(),
                cells.len()
            )));
        }
        let mut feat = Vec::with_capacity(num_features);
        for c in &cells[..num_features] {
            let v: f64 = c.trim().parse().map_err(|_| {
                Error::Value(format!("row {row_idx}: non-numeric feature '{c}'"))
            })?;
            if !v.is_finite() {
                return Err(Error::Value(format!("row {row_idx}: non-finite feature")));
            }
            feat.push(v);
        }
        let mut lab = Vec::with_capacity(num_tasks);
        for c in &cells[num_features..] {
            let v: f64 = c.trim().parse().map_err(|_| {
                Error::Value(format!("row {row_idx}: non-numeric label '{c}'"))
            })?;
            if v == 0.0 {
                lab.push(0);
            } else if v == 1.0 {
                lab.push(1);
            } else {
                return Err(Error::Value(format!(
                    "row {row_idx}: label {v} is not binary"
                )));
            }
        }
        rows.push(feat);
        labels.push(lab);
    }
    if rows.is_empty() {
        return Err(Error::InvalidInput("dataset has no rows".into()));
    }
    Ok(MultiTaskDataset {
        features: Matrix::from_rows(&rows),
        labels,
        meta: path.display().to_string(),
    })
}

/// Write a dataset in the same CSV schema `load_csv` reads.
pub fn write_csv(ds: &MultiTaskDataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    let header: Vec<String> = (0..ds.num_features())
        .map(|i| format!("f{i}"))
        .chain((0..ds.num_tasks()).map(|i| format!("y{i}")))
        .collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..ds.len() {
        let mut cells: Vec<String> = ds
            .features
            .row(i)
            .iter()
            .map(|v| format!("{v:?}"))
            .collect();
        cells.extend(ds.labels[i].iter().map(|y| y.to_string()));
        let _ = writeln!(out, "{}", cells.join(","));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Seeded permutation split into train and test.
pub fn split(
    ds: &MultiTaskDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(MultiTaskDataset, MultiTaskDataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidInput(format!(
            "test_fraction {test_fraction} must lie in (0,1)"
        )));
    }
    let n = ds.len();
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
    let perm = Rng::new(seed).permutation(n);
    let take = |idx: &[usize]| MultiTaskDataset {
        features: Matrix::from_rows(
            &idx.iter().map(|&i| ds.features.row(i).to_vec()).collect::<Vec<_>>(),
        ),
        labels: idx.iter().map(|&i| ds.labels[i].clone()).collect(),
        meta: ds.meta.clone(),
    };
    let test = take(&perm[..n_test]);
    let train = take(&perm[n_test..]);
    Ok((train, test))
}
