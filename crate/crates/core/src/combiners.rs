//! Gradient combiners: turn K per-task gradients into one update vector.
//!
//! The orthogonal-decomposition combiner splits each task gradient on a basis
//! of the span of all per-group gradients, keeps only the coordinates where
//! the tasks' signs agree, and sums the surviving parts. Plain sum, MGDA,
//! PCGrad and CAGrad are implemented for comparison.

use crate::decomposition::{build_basis, project, reconstruct, BasisMethod, OrthogonalBasis};
use crate::error::{Error, Result};
use crate::numerics::{
    frank_wolfe_min_norm, jacobi_symmetric_eigen, min_norm_point_2, project_to_simplex, Matrix,
    Rng,
};

/// Per-task, per-example gradients of the shared parameters.
///
/// Rows carry the raw (un-weighted) per-example gradients; `task_weights`
/// scale only the final combination, not the subspace construction.
#[derive(Debug, Clone)]
pub struct GradientBundle {
    per_example: Vec<Matrix>,
    task_weights: Vec<f64>,
}

impl GradientBundle {
    pub fn new(per_example: Vec<Matrix>, task_weights: Vec<f64>) -> Result<Self> {
        if per_example.is_empty() {
            return Err(Error::InvalidInput("bundle needs at least one task".into()));
        }
        if task_weights.len() != per_example.len() {
            return Err(Error::InvalidInput("one weight per task required".into()));
        }
        if task_weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(Error::InvalidInput("task weights must be finite and >= 0".into()));
        }
        let (m, d) = (per_example[0].rows(), per_example[0].cols());
        if m == 0 {
            return Err(Error::InvalidInput("bundle needs at least one example".into()));
        }
        for g in &per_example {
            if g.rows() != m || g.cols() != d {
                return Err(Error::InvalidInput("task gradient shapes differ".into()));
            }
            g.check_finite("GradientBundle")?;
        }
        Ok(Self { per_example, task_weights })
    }

    pub fn uniform(per_example: Vec<Matrix>) -> Result<Self> {
        let k = per_example.len();
        Self::new(per_example, vec![1.0; k])
    }

    pub fn tasks(&self) -> usize {
        self.per_example.len()
    }

    pub fn examples(&self) -> usize {
        self.per_example[0].rows()
    }

    pub fn dim(&self) -> usize {
        self.per_example[0].cols()
    }

    pub fn task_weights(&self) -> &[f64] {
        &self.task_weights
    }

    pub fn per_example(&self, task: usize) -> &Matrix {
        &self.per_example[task]
    }

    /// Batch-mean gradient of each task, stacked K×D.
    pub fn task_means(&self) -> Matrix {
        let mut out = Matrix::zeros(self.tasks(), self.dim());
        let inv_m = 1.0 / self.examples() as f64;
        for (i, g) in self.per_example.iter().enumerate() {
            let row = out.row_mut(i);
            for j in 0..g.rows() {
                for (o, &v) in row.iter_mut().zip(g.row(j)) {
                    *o += v * inv_m;
                }
            }
        }
        out
    }
}

/// Average-pooled gradients: G rows per task, each the mean of a disjoint
/// chunk of the per-example rows. The chunking permutation is shared across
/// tasks so group g covers the same examples everywhere.
#[derive(Debug, Clone)]
pub struct GroupedBundle {
    per_group: Vec<Matrix>,
    group_sizes: Vec<usize>,
    task_weights: Vec<f64>,
}

impl GroupedBundle {
    pub fn tasks(&self) -> usize {
        self.per_group.len()
    }

    pub fn groups(&self) -> usize {
        self.group_sizes.len()
    }

    pub fn dim(&self) -> usize {
        self.per_group[0].cols()
    }

    pub fn task_weights(&self) -> &[f64] {
        &self.task_weights
    }

    pub fn per_group(&self, task: usize) -> &Matrix {
        &self.per_group[task]
    }

    pub fn group_sizes(&self) -> &[usize] {
        &self.group_sizes
    }

    /// Group-size-weighted mean, equal to the original per-example batch mean.
    pub fn task_mean(&self, task: usize) -> Vec<f64> {
        let total: usize = self.group_sizes.iter().sum();
        let mut out = vec![0.0; self.dim()];
        let g = &self.per_group[task];
        for (j, &sz) in self.group_sizes.iter().enumerate() {
            let w = sz as f64 / total as f64;
            for (o, &v) in out.iter_mut().zip(g.row(j)) {
                *o += w * v;
            }
        }
        out
    }

    /// All K·G group rows stacked task-major, group-minor.
    pub fn stacked(&self) -> Matrix {
        let mut rows = Vec::with_capacity(self.tasks() * self.groups());
        for g in &self.per_group {
            for j in 0..g.rows() {
                rows.push(g.row(j).to_vec());
            }
        }
        Matrix::from_rows(&rows)
    }
}

/// Pool per-example gradients into `groups` chunks along a single random
/// permutation of example indices shared across tasks.
pub fn group_gradients(bundle: &GradientBundle, groups: usize, rng: &mut Rng) -> Result<GroupedBundle> {
    let perm = rng.permutation(bundle.examples());
    group_gradients_with_permutation(bundle, groups, &perm)
}

/// Deterministic variant taking an explicit permutation of example indices.
pub fn group_gradients_with_permutation(
    bundle: &GradientBundle,
    groups: usize,
    perm: &[usize],
) -> Result<GroupedBundle> {
    let m = bundle.examples();
    if groups < 1 || groups > m {
        return Err(Error::InvalidInput(format!(
            "group count {groups} must lie in 1..={m}"
        )));
    }
    if perm.len() != m {
        return Err(Error::InvalidInput("permutation length must equal example count".into()));
    }
    // chunk sizes as equal as possible: the first m % G chunks get one extra
    let base = m / groups;
    let extra = m % groups;
    let mut group_sizes = Vec::with_capacity(groups);
    let mut bounds = Vec::with_capacity(groups + 1);
    bounds.push(0usize);
    for g in 0..groups {
        let sz = base + usize::from(g < extra);
        group_sizes.push(sz);
        bounds.push(bounds[g] + sz);
    }

    let d = bundle.dim();
    let mut per_group = Vec::with_capacity(bundle.tasks());
    for t in 0..bundle.tasks() {
        let src = bundle.per_example(t);
        let mut pooled = Matrix::zeros(groups, d);
        for g in 0..groups {
            let chunk = &perm[bounds[g]..bounds[g + 1]];
            let inv = 1.0 / chunk.len() as f64;
            let row = pooled.row_mut(g);
            for &idx in chunk {
                for (o, &v) in row.iter_mut().zip(src.row(idx)) {
                    *o += v * inv;
                }
            }
        }
        per_group.push(pooled);
    }
    Ok(GroupedBundle {
        per_group,
        group_sizes,
        task_weights: bundle.task_weights().to_vec(),
    })
}

/// Which coordinates count as shared across tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskRule {
    /// Shared iff no two tasks have strictly opposite signs (zeros agree with
    /// everything). Matches the pairwise sign-agreement definition.
    AllAgree,
    /// Shared iff the product of all coordinates is >= 0. Coincides with
    /// `AllAgree` for K <= 2 but calls e.g. (+,-,-) shared for K = 3.
    LiteralProduct,
}

impl MaskRule {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "all-agree" => Ok(MaskRule::AllAgree),
            "literal-product" => Ok(MaskRule::LiteralProduct),
            other => Err(Error::Config(format!("unknown mask rule '{other}'"))),
        }
    }
}

/// Per-coordinate agreement mask over the K×r coordinate matrix.
pub fn shared_mask(coords: &Matrix, rule: MaskRule) -> Vec<bool> {
    let (k, r) = (coords.rows(), coords.cols());
    (0..r)
        .map(|u| match rule {
            MaskRule::AllAgree => {
                let mut has_pos = false;
                let mut has_neg = false;
                for i in 0..k {
                    let v = coords.get(i, u);
                    has_pos |= v > 0.0;
                    has_neg |= v < 0.0;
                }
                !(has_pos && has_neg)
            }
            MaskRule::LiteralProduct => {
                let prod: f64 = (0..k).map(|i| coords.get(i, u)).product();
                prod >= 0.0
            }
        })
        .collect()
}

/// Full record of one orthogonal-decomposition step.
#[derive(Debug, Clone)]
pub struct GdodDecomposition {
    pub basis: OrthogonalBasis,
    /// K×r projection coordinates, one row per task mean.
    pub coords: Matrix,
    pub shared_mask: Vec<bool>,
    /// K×D shared components.
    pub shared: Matrix,
    /// K×D conflict components.
    pub conflict: Matrix,
    pub update: Vec<f64>,
    /// Shared energy over total projected energy, in [0,1].
    pub shared_mass_fraction: f64,
}

impl GdodDecomposition {
    pub fn subspace_rank(&self) -> usize {
        self.basis.rank()
    }
}

/// The orthogonal-decomposition combiner.
///
/// Stacks all group rows, builds the basis, projects each task mean, keeps
/// the sign-agreeing coordinates, and sums the weighted shared parts.
pub fn gdod_combine(
    bundle: &GroupedBundle,
    method: &BasisMethod,
    rule: MaskRule,
    rng: &mut Rng,
) -> Result<GdodDecomposition> {
    let basis = build_basis(&bundle.stacked(), method, rng)?;
    let (k, d, r) = (bundle.tasks(), bundle.dim(), basis.rank());

    let mut coords = Matrix::zeros(k, r);
    for i in 0..k {
        let p = project(&basis, &bundle.task_mean(i))?;
        coords.row_mut(i).copy_from_slice(&p);
    }
    let mask = shared_mask(&coords, rule);

    let mut shared = Matrix::zeros(k, d);
    let mut conflict = Matrix::zeros(k, d);
    let mut update = vec![0.0; d];
    let mut shared_energy = 0.0;
    let mut total_energy = 0.0;
    for i in 0..k {
        let p = coords.row(i);
        let p_sh: Vec<f64> = p
            .iter()
            .zip(&mask)
            .map(|(&v, &m)| if m { v } else { 0.0 })
            .collect();
        let p_con: Vec<f64> = p
            .iter()
            .zip(&mask)
            .map(|(&v, &m)| if m { 0.0 } else { v })
            .collect();
        shared_energy += p_sh.iter().map(|v| v * v).sum::<f64>();
        total_energy += p.iter().map(|v| v * v).sum::<f64>();
        shared.row_mut(i).copy_from_slice(&reconstruct(&basis, &p_sh)?);
        conflict.row_mut(i).copy_from_slice(&reconstruct(&basis, &p_con)?);
        let w = bundle.task_weights()[i];
        for (u, &s) in update.iter_mut().zip(shared.row(i)) {
            *u += w * s;
        }
    }
    Ok(GdodDecomposition {
        basis,
        coords,
        shared_mask: mask,
        shared,
        conflict,
        update,
        shared_mass_fraction: shared_energy / total_energy.max(1e-30),
    })
}

/// Majority-sign weighted variant for larger task counts.
///
/// Per coordinate, tasks split by sign into sets of sizes a and b; the
/// majority set keeps weight |a−b|/K, the minority is zeroed.
pub fn weighted_gdod_combine(
    bundle: &GroupedBundle,
    method: &BasisMethod,
    rng: &mut Rng,
) -> Result<GdodDecomposition> {
    let basis = build_basis(&bundle.stacked(), method, rng)?;
    let (k, d, r) = (bundle.tasks(), bundle.dim(), basis.rank());

    let mut coords = Matrix::zeros(k, r);
    for i in 0..k {
        let p = project(&basis, &bundle.task_mean(i))?;
        coords.row_mut(i).copy_from_slice(&p);
    }

    // weight(i,u): |a−b|/K on the majority-sign set, 0 on the minority
    let mut weights = Matrix::zeros(k, r);
    let mut mask = vec![false; r];
    for u in 0..r {
        let a = (0..k).filter(|&i| coords.get(i, u) >= 0.0).count();
        let b = k - a;
        let pos_major = a >= b;
        let w = (a.max(b) - a.min(b)) as f64 / k as f64;
        mask[u] = w > 0.0;
        for i in 0..k {
            let in_major = (coords.get(i, u) >= 0.0) == pos_major;
            weights.set(i, u, if in_major { w } else { 0.0 });
        }
    }

    let mut shared = Matrix::zeros(k, d);
    let mut conflict = Matrix::zeros(k, d);
    let mut update = vec![0.0; d];
    let mut shared_energy = 0.0;
    let mut total_energy = 0.0;
    for i in 0..k {
        let p = coords.row(i).to_vec();
        let p_sh: Vec<f64> = (0..r).map(|u| weights.get(i, u) * p[u]).collect();
        shared_energy += p_sh.iter().map(|v| v * v).sum::<f64>();
        total_energy += p.iter().map(|v| v * v).sum::<f64>();
        let g_sh = reconstruct(&basis, &p_sh)?;
        let full = reconstruct(&basis, &p)?;
        for j in 0..d {
            shared.set(i, j, g_sh[j]);
            conflict.set(i, j, full[j] - g_sh[j]);
        }
        let w = bundle.task_weights()[i];
        for (uj, &s) in update.iter_mut().zip(shared.row(i)) {
            *uj += w * s;
        }
    }
    Ok(GdodDecomposition {
        basis,
        coords,
        shared_mask: mask,
        shared,
        conflict,
        update,
        shared_mass_fraction: shared_energy / total_energy.max(1e-30),
    })
}

/// PCGrad: each task gradient drops its projection onto every conflicting
/// other-task gradient, visited in a fresh random order per task.
pub fn pcgrad_combine(means: &Matrix, task_weights: &[f64], rng: &mut Rng) -> Vec<f64> {
    let (k, d) = (means.rows(), means.cols());
    let mut out = vec![0.0; d];
    for i in 0..k {
        let mut gi = means.row(i).to_vec();
        let mut others: Vec<usize> = (0..k).filter(|&j| j != i).collect();
        rng.shuffle(&mut others);
        for j in others {
            let gj = means.row(j);
            let gj_norm2: f64 = gj.iter().map(|v| v * v).sum();
            if gj_norm2 == 0.0 {
                continue;
            }
            let dot_ij: f64 = gi.iter().zip(gj).map(|(a, b)| a * b).sum();
            if dot_ij < 0.0 {
                let c = dot_ij / gj_norm2;
                for (a, &b) in gi.iter_mut().zip(gj) {
                    *a -= c * b;
                }
            }
        }
        let w = task_weights[i];
        for (o, &v) in out.iter_mut().zip(&gi) {
            *o += w * v;
        }
    }
    out
}

/// MGDA: min-norm point of the convex hull of the (weight-scaled) gradients.
pub fn mgda_combine(means: &Matrix, task_weights: &[f64]) -> Result<Vec<f64>> {
    let k = means.rows();
    let scaled = scale_rows(means, task_weights);
    match k {
        0 => Err(Error::InvalidInput("mgda_combine: K must be >= 1".into())),
        1 => Ok(scaled.row(0).to_vec()),
        2 => Ok(min_norm_point_2(scaled.row(0), scaled.row(1))?.1),
        _ => Ok(frank_wolfe_min_norm(&scaled, 2000)?.1),
    }
}

/// CAGrad: maximize the worst task improvement within a ball of radius
/// c·‖g₀‖ around the mean gradient g₀, solved through the simplex dual.
pub fn cagrad_combine(means: &Matrix, task_weights: &[f64], c: f64) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&c) {
        return Err(Error::InvalidInput(format!(
            "cagrad_combine: c must lie in [0,1), got {c}"
        )));
    }
    let k = means.rows();
    if k == 0 {
        return Err(Error::InvalidInput("cagrad_combine: K must be >= 1".into()));
    }
    let scaled = scale_rows(means, task_weights);
    let d_dim = scaled.cols();
    let mut g0 = vec![0.0; d_dim];
    for i in 0..k {
        for (o, &v) in g0.iter_mut().zip(scaled.row(i)) {
            *o += v / k as f64;
        }
    }
    let g0_norm = g0.iter().map(|v| v * v).sum::<f64>().sqrt();
    if c == 0.0 || g0_norm == 0.0 {
        return Ok(g0);
    }

    // dual: min over the simplex of F(w) = g_w·g0 + c‖g0‖·‖g_w‖
    let gram = scaled.gram();
    // Gershgorin bound on λ_max(GGᵀ) sets the PGD step
    let lmax = (0..k)
        .map(|i| (0..k).map(|j| gram.get(i, j).abs()).sum::<f64>())
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let step = 1.0 / (lmax * (1.0 + c));

    let mut w = vec![1.0 / k as f64; k];
    for _ in 0..50 {
        let gw = scaled.rows_combination(&w);
        let gw_norm = gw.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut grad = vec![0.0; k];
        for i in 0..k {
            let gi = scaled.row(i);
            let gi_dot_g0: f64 = gi.iter().zip(&g0).map(|(a, b)| a * b).sum();
            let gi_dot_gw: f64 = gi.iter().zip(&gw).map(|(a, b)| a * b).sum();
            grad[i] = gi_dot_g0 + c * g0_norm * gi_dot_gw / gw_norm.max(1e-12);
        }
        let trial: Vec<f64> = w.iter().zip(&grad).map(|(wi, gi)| wi - step * gi).collect();
        w = project_to_simplex(&trial).as_slice().to_vec();
    }

    let gw = scaled.rows_combination(&w);
    let gw_norm = gw.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut d = g0;
    if gw_norm > 0.0 {
        let lambda = c * g0_norm / gw_norm;
        for (di, &gi) in d.iter_mut().zip(&gw) {
            *di += lambda * gi;
        }
    }
    Ok(d)
}

/// Plain weighted sum of task means.
pub fn sum_combine(means: &Matrix, task_weights: &[f64]) -> Vec<f64> {
    scale_rows(means, task_weights)
        .rows_combination(&vec![1.0; means.rows()])
}

/// Harness-facing combiner selection with its numeric knobs.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CombinerConfig {
    /// "gdod" | "wgdod" | "pcgrad" | "mgda" | "cagrad" | "sum"
    pub name: String,
    /// "svd" | "qr" | "random" | "randdec"
    #[serde(default = "default_basis")]
    pub basis_method: String,
    /// "all-agree" | "literal-product"
    #[serde(default = "default_mask")]
    pub mask_rule: String,
    #[serde(default = "default_groups")]
    pub groups: usize,
    #[serde(default = "default_cagrad_c")]
    pub cagrad_c: f64,
}

fn default_basis() -> String {
    "svd".into()
}

fn default_mask() -> String {
    "all-agree".into()
}

fn default_groups() -> usize {
    16
}

fn default_cagrad_c() -> f64 {
    0.5
}

impl CombinerConfig {
    pub fn named(name: &str) -> Self {
        Self {
            name: name.into(),
            basis_method: default_basis(),
            mask_rule: default_mask(),
            groups: default_groups(),
            cagrad_c: default_cagrad_c(),
        }
    }

    pub fn sum() -> Self {
        Self::named("sum")
    }

    pub fn gdod() -> Self {
        Self::named("gdod")
    }
}

/// Update vector plus the decomposition diagnostics, when the combiner has
/// them.
#[derive(Debug, Clone)]
pub struct CombineOutcome {
    pub update: Vec<f64>,
    pub shared_mass_fraction: Option<f64>,
    pub subspace_rank: Option<usize>,
}

/// Dispatch a bundle through the configured combiner. The group count is
/// clamped to the batch size so short tail batches still work.
pub fn combine(
    cfg: &CombinerConfig,
    bundle: &GradientBundle,
    rng: &mut Rng,
) -> Result<CombineOutcome> {
    let decompose = |rng: &mut Rng, weighted: bool| -> Result<CombineOutcome> {
        let groups = cfg.groups.min(bundle.examples()).max(1);
        let grouped = group_gradients(bundle, groups, rng)?;
        let rows = grouped.tasks() * grouped.groups();
        let method = BasisMethod::from_name(&cfg.basis_method, rows, grouped.dim())?;
        let dec = if weighted {
            weighted_gdod_combine(&grouped, &method, rng)?
        } else {
            gdod_combine(&grouped, &method, MaskRule::from_name(&cfg.mask_rule)?, rng)?
        };
        Ok(CombineOutcome {
            update: dec.update.clone(),
            shared_mass_fraction: Some(dec.shared_mass_fraction),
            subspace_rank: Some(dec.subspace_rank()),
        })
    };
    match cfg.name.as_str() {
        "gdod" => decompose(rng, false),
        "wgdod" => decompose(rng, true),
        "pcgrad" => Ok(CombineOutcome {
            update: pcgrad_combine(&bundle.task_means(), bundle.task_weights(), rng),
            shared_mass_fraction: None,
            subspace_rank: None,
        }),
        "mgda" => Ok(CombineOutcome {
            update: mgda_combine(&bundle.task_means(), bundle.task_weights())?,
            shared_mass_fraction: None,
            subspace_rank: None,
        }),
        "cagrad" => Ok(CombineOutcome {
            update: cagrad_combine(&bundle.task_means(), bundle.task_weights(), cfg.cagrad_c)?,
            shared_mass_fraction: None,
            subspace_rank: None,
        }),
        "sum" => Ok(CombineOutcome {
            update: sum_combine(&bundle.task_means(), bundle.task_weights()),
            shared_mass_fraction: None,
            subspace_rank: None,
        }),
        other => Err(Error::Config(format!("unknown combiner '{other}'"))),
    }
}

fn scale_rows(means: &Matrix, weights: &[f64]) -> Matrix {
    assert_eq!(means.rows(), weights.len());
    let mut out = means.clone();
    for i in 0..out.rows() {
        let w = weights[i];
        for v in out.row_mut(i) {
            *v *= w;
        }
    }
    out
}

/// Estimate of λ_max(A₁+A₂) style spectral bounds used by descent checks.
pub fn spectral_max(sym: &Matrix) -> f64 {
    let (vals, _) = jacobi_symmetric_eigen(sym);
    vals.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_vec_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    fn bundle_from_means(means: &[Vec<f64>]) -> GroupedBundle {
        let per_example: Vec<Matrix> =
            means.iter().map(|m| Matrix::from_rows(&[m.clone()])).collect();
        let bundle = GradientBundle::uniform(per_example).unwrap();
        group_gradients_with_permutation(&bundle, 1, &[0]).unwrap()
    }

    #[test]
    fn grouping_identity_when_g_equals_m() {
        let g = Matrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0], vec![4.0]]);
        let b = GradientBundle::uniform(vec![g.clone()]).unwrap();
        let grouped = group_gradients_with_permutation(&b, 4, &[0, 1, 2, 3]).unwrap();
        assert_eq!(grouped.per_group(0), &g);
    }

    #[test]
    fn grouping_full_pool_is_batch_mean() {
        let g = Matrix::from_rows(&[vec![1.0, 0.0], vec![3.0, 0.0], vec![0.0, 2.0], vec![0.0, 6.0]]);
        let b = GradientBundle::uniform(vec![g]).unwrap();
        let grouped = group_gradients_with_permutation(&b, 1, &[0, 1, 2, 3]).unwrap();
        assert_vec_close(grouped.per_group(0).row(0), &[1.0, 2.0], 1e-12);
        assert_vec_close(&grouped.task_mean(0), &[1.0, 2.0], 1e-12);
    }

    #[test]
    fn grouping_two_chunks_identity_perm() {
        let g = Matrix::from_rows(&[vec![1.0, 0.0], vec![3.0, 0.0], vec![0.0, 2.0], vec![0.0, 6.0]]);
        let b = GradientBundle::uniform(vec![g]).unwrap();
        let grouped = group_gradients_with_permutation(&b, 2, &[0, 1, 2, 3]).unwrap();
        assert_vec_close(grouped.per_group(0).row(0), &[2.0, 0.0], 1e-12);
        assert_vec_close(grouped.per_group(0).row(1), &[0.0, 4.0], 1e-12);
    }

    #[test]
    fn grouping_rejects_too_many_groups() {
        let g = Matrix::from_rows(&[vec![1.0], vec![2.0]]);
        let b = GradientBundle::uniform(vec![g]).unwrap();
        assert!(group_gradients(&b, 3, &mut Rng::new(0)).is_err());
    }

    #[test]
    fn mask_two_tasks() {
        let p = Matrix::from_rows(&[vec![1.0, 1.0], vec![2.0, -3.0]]);
        for rule in [MaskRule::AllAgree, MaskRule::LiteralProduct] {
            assert_eq!(shared_mask(&p, rule), vec![true, false]);
        }
    }

    #[test]
    fn mask_rules_diverge_for_k3() {
        // signs (+,-,-): product positive but the pair (1,2) disagrees
        let p = Matrix::from_rows(&[vec![1.0], vec![-1.0], vec![-2.0]]);
        assert_eq!(shared_mask(&p, MaskRule::AllAgree), vec![false]);
        assert_eq!(shared_mask(&p, MaskRule::LiteralProduct), vec![true]);
    }

    #[test]
    fn mask_zeros_agree() {
        let p = Matrix::from_rows(&[vec![0.0], vec![2.0]]);
        assert_eq!(shared_mask(&p, MaskRule::AllAgree), vec![true]);
        assert_eq!(shared_mask(&p, MaskRule::LiteralProduct), vec![true]);
    }

    #[test]
    fn gdod_collinear_same_direction_passes_through() {
        let bundle = bundle_from_means(&[vec![1.0, 0.0], vec![2.0, 0.0]]);
        let dec =
            gdod_combine(&bundle, &BasisMethod::Svd, MaskRule::AllAgree, &mut Rng::new(0))
                .unwrap();
        assert_vec_close(&dec.update, &[3.0, 0.0], 1e-8);
        assert!((dec.shared_mass_fraction - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn gdod_opposing_collinear_cancels() {
        let bundle = bundle_from_means(&[vec![1.0, 0.0], vec![-2.0, 0.0]]);
        let dec =
            gdod_combine(&bundle, &BasisMethod::Svd, MaskRule::AllAgree, &mut Rng::new(0))
                .unwrap();
        assert_vec_close(&dec.update, &[0.0, 0.0], 1e-10);
        assert!(dec.shared_mass_fraction <= 1e-12);
    }

    #[test]
    fn gdod_worked_example_vs_eigen_oracle() {
        // independent oracle: closed-form eigendecomposition of MᵀM for
        // M = [[2,0],[1,1]] gives λ = 3±√5, v₁ ∝ (1, λ₁−5)
        let l1 = 3.0 + 5.0f64.sqrt();
        let mut v1 = vec![1.0, l1 - 5.0];
        let n = (v1[0] * v1[0] + v1[1] * v1[1]).sqrt();
        v1[0] /= n;
        v1[1] /= n;
        let p1 = 2.0 * v1[0];
        let p2 = v1[0] + v1[1];
        let g1_sh = [p1 * v1[0], p1 * v1[1]];
        let g2_sh = [p2 * v1[0], p2 * v1[1]];
        let expected_update = [g1_sh[0] + g2_sh[0], g1_sh[1] + g2_sh[1]];

        let bundle = bundle_from_means(&[vec![2.0, 0.0], vec![1.0, 1.0]]);
        let dec =
            gdod_combine(&bundle, &BasisMethod::Svd, MaskRule::AllAgree, &mut Rng::new(0))
                .unwrap();
        assert_vec_close(dec.shared.row(0), &g1_sh, 1e-3);
        assert_vec_close(dec.shared.row(1), &g2_sh, 1e-3);
        assert_vec_close(&dec.update, &expected_update, 1e-3);
        // frozen values from the oracle above
        assert_vec_close(&dec.update, &[3.065, 0.724], 2e-3);
    }

    #[test]
    fn gdod_cross_orthogonality() {
        let mut rng = Rng::new(99);
        for _ in 0..20 {
            let k = 2 + rng.below(3);
            let per_example: Vec<Matrix> = (0..k)
                .map(|_| Matrix::from_rows(&(0..4).map(|_| rng.normal_vec(6)).collect::<Vec<_>>()))
                .collect();
            let bundle = GradientBundle::uniform(per_example).unwrap();
            let grouped = group_gradients(&bundle, 2, &mut rng).unwrap();
            let dec =
                gdod_combine(&grouped, &BasisMethod::Svd, MaskRule::AllAgree, &mut rng).unwrap();
            for i in 0..k {
                for j in 0..k {
                    let con = dec.conflict.row(i);
                    let sh = dec.shared.row(j);
                    let dot: f64 = con.iter().zip(sh).map(|(a, b)| a * b).sum();
                    let nc: f64 = con.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let ns: f64 = sh.iter().map(|v| v * v).sum::<f64>().sqrt();
                    assert!(dot.abs() <= 1e-8 * (1.0 + nc * ns));
                }
            }
        }
    }

    #[test]
    fn wgdod_three_task_weighting() {
        // coordinate with signs (+,+,-): majority weight (2−1)/3 = 1/3
        let bundle = bundle_from_means(&[
            vec![1.0, 0.0],
            vec![2.0, 0.0],
            vec![-1.0, 0.0],
        ]);
        let dec = weighted_gdod_combine(&bundle, &BasisMethod::Svd, &mut Rng::new(0)).unwrap();
        // per-task shared parts: (1/3)·g₁ and (1/3)·g₂ on that coordinate, 0 for task 3
        assert_vec_close(dec.shared.row(0), &[1.0 / 3.0, 0.0], 1e-8);
        assert_vec_close(dec.shared.row(1), &[2.0 / 3.0, 0.0], 1e-8);
        assert_vec_close(dec.shared.row(2), &[0.0, 0.0], 1e-8);
        assert_vec_close(&dec.update, &[1.0, 0.0], 1e-8);
    }

    #[test]
    fn wgdod_k2_disagreement_zeroes_coordinate() {
        let bundle = bundle_from_means(&[vec![1.0, 0.0], vec![-3.0, 0.0]]);
        let dec = weighted_gdod_combine(&bundle, &BasisMethod::Svd, &mut Rng::new(0)).unwrap();
        assert_vec_close(&dec.update, &[0.0, 0.0], 1e-10);
    }

    #[test]
    fn wgdod_k2_agreement_matches_gdod() {
        let bundle = bundle_from_means(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let w = weighted_gdod_combine(&bundle, &BasisMethod::Svd, &mut Rng::new(0)).unwrap();
        let g = gdod_combine(&bundle, &BasisMethod::Svd, MaskRule::AllAgree, &mut Rng::new(0))
            .unwrap();
        // agreement coordinates get weight (2−0)/2 = 1, so the updates match there
        for u in 0..g.shared_mask.len() {
            if g.shared_mask[u] {
                // compare coordinate contributions through the same basis
                for i in 0..2 {
                    assert!((w.coords.get(i, u) - g.coords.get(i, u)).abs() <= 1e-10);
                }
            }
        }
        assert_vec_close(&w.update, &g.update, 1e-8);
    }

    #[test]
    fn pcgrad_orthogonalizes_conflicting_pair() {
        // Eq.-6 projections: g1 against g2 gives (0.5,0.5); g2 against g1 gives (0,1)
        let means = Matrix::from_rows(&[vec![1.0, 0.0], vec![-1.0, 1.0]]);
        let out = pcgrad_combine(&means, &[1.0, 1.0], &mut Rng::new(1));
        assert_vec_close(&out, &[0.5, 1.5], 1e-12);
    }

    #[test]
    fn pcgrad_no_conflict_is_plain_sum() {
        let means = Matrix::from_rows(&[vec![1.0, 1.0], vec![2.0, 0.0]]);
        let out = pcgrad_combine(&means, &[1.0, 1.0], &mut Rng::new(1));
        assert_vec_close(&out, &[3.0, 1.0], 1e-12);
    }

    #[test]
    fn pcgrad_antiparallel_cancels() {
        let means = Matrix::from_rows(&[vec![2.0, 1.0], vec![-2.0, -1.0]]);
        let out = pcgrad_combine(&means, &[1.0, 1.0], &mut Rng::new(1));
        assert_vec_close(&out, &[0.0, 0.0], 1e-12);
    }

    #[test]
    fn pcgrad_postcondition_k2() {
        let mut rng = Rng::new(55);
        for _ in 0..50 {
            let g1 = rng.normal_vec(4);
            let g2 = rng.normal_vec(4);
            let means = Matrix::from_rows(&[g1.clone(), g2.clone()]);
            // recompute the projected gradients directly to check each side
            let d12: f64 = g1.iter().zip(&g2).map(|(a, b)| a * b).sum();
            let mut g1p = g1.clone();
            if d12 < 0.0 {
                let n2: f64 = g2.iter().map(|v| v * v).sum();
                for (a, &b) in g1p.iter_mut().zip(&g2) {
                    *a -= d12 / n2 * b;
                }
            }
            let chk: f64 = g1p.iter().zip(&g2).map(|(a, b)| a * b).sum();
            assert!(chk >= -1e-8);
            // and the combiner output is finite and deterministic
            let o1 = pcgrad_combine(&means, &[1.0, 1.0], &mut Rng::new(3));
            let o2 = pcgrad_combine(&means, &[1.0, 1.0], &mut Rng::new(3));
            assert_eq!(o1, o2);
        }
    }

    #[test]
    fn mgda_orthogonal_pair() {
        let means = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let d = mgda_combine(&means, &[1.0, 1.0]).unwrap();
        assert_vec_close(&d, &[0.5, 0.5], 1e-10);
    }

    #[test]
    fn mgda_identical_gradients() {
        let means = Matrix::from_rows(&[vec![3.0, 4.0], vec![3.0, 4.0]]);
        let d = mgda_combine(&means, &[1.0, 1.0]).unwrap();
        assert_vec_close(&d, &[3.0, 4.0], 1e-10);
    }

    #[test]
    fn mgda_opposite_gradients_vanish() {
        let means = Matrix::from_rows(&[vec![1.0, 2.0], vec![-1.0, -2.0]]);
        let d = mgda_combine(&means, &[1.0, 1.0]).unwrap();
        assert!(d.iter().map(|v| v * v).sum::<f64>().sqrt() <= 1e-6);
    }

    #[test]
    fn cagrad_zero_c_returns_mean() {
        let means = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let d = cagrad_combine(&means, &[1.0, 1.0], 0.0).unwrap();
        assert_vec_close(&d, &[0.5, 0.5], 1e-12);
    }

    #[test]
    fn cagrad_no_conflict_keeps_direction() {
        // identical gradients: the optimum sits on the ball boundary along g₀,
        // d = (1+c)·g₀
        let means = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        let d = cagrad_combine(&means, &[1.0, 1.0], 0.4).unwrap();
        assert_vec_close(&d, &[1.4, 1.4], 1e-6);
    }

    #[test]
    fn cagrad_rejects_bad_c() {
        let means = Matrix::identity(2);
        assert!(cagrad_combine(&means, &[1.0, 1.0], 1.0).is_err());
        assert!(cagrad_combine(&means, &[1.0, 1.0], -0.1).is_err());
    }

    #[test]
    fn cagrad_matches_grid_oracle() {
        // dense polar grid over the feasible disc maximizing min_i ⟨g_i, d⟩
        let means = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let c = 0.5;
        let d = cagrad_combine(&means, &[1.0, 1.0], c).unwrap();
        let obj = |x: f64, y: f64| x.min(y);
        let g0 = [0.5f64, 0.5f64];
        let radius = c * (g0[0] * g0[0] + g0[1] * g0[1]).sqrt();
        let mut best = f64::NEG_INFINITY;
        for ri in 0..=200 {
            let rr = radius * ri as f64 / 200.0;
            for ti in 0..2000 {
                let th = 2.0 * std::f64::consts::PI * ti as f64 / 2000.0;
                let x = g0[0] + rr * th.cos();
                let y = g0[1] + rr * th.sin();
                best = best.max(obj(x, y));
            }
        }
        assert!((obj(d[0], d[1]) - best).abs() <= 1e-3);
    }

    #[test]
    fn sum_combine_cases() {
        let means = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_vec_close(&sum_combine(&means, &[1.0, 1.0]), &[1.0, 1.0], 1e-15);
        assert_vec_close(&sum_combine(&means, &[0.0, 1.0]), &[0.0, 1.0], 1e-15);
        let means = Matrix::from_rows(&[vec![10.0, 0.0], vec![0.0, 10.0]]);
        assert_vec_close(&sum_combine(&means, &[0.3, 0.7]), &[3.0, 7.0], 1e-12);
    }

    #[test]
    fn gdod_scale_covariance() {
        let mut rng = Rng::new(7);
        let per_example: Vec<Matrix> = (0..2)
            .map(|_| Matrix::from_rows(&(0..4).map(|_| rng.normal_vec(5)).collect::<Vec<_>>()))
            .collect();
        let bundle = GradientBundle::uniform(per_example.clone()).unwrap();
        let grouped = group_gradients_with_permutation(&bundle, 2, &[0, 1, 2, 3]).unwrap();
        let dec1 =
            gdod_combine(&grouped, &BasisMethod::Svd, MaskRule::AllAgree, &mut Rng::new(0))
                .unwrap();

        let lambda = 3.5;
        let scaled: Vec<Matrix> = per_example
            .iter()
            .map(|m| {
                let mut s = m.clone();
                for i in 0..s.rows() {
                    for v in s.row_mut(i) {
                        *v *= lambda;
                    }
                }
                s
            })
            .collect();
        let bundle2 = GradientBundle::uniform(scaled).unwrap();
        let grouped2 = group_gradients_with_permutation(&bundle2, 2, &[0, 1, 2, 3]).unwrap();
        let dec2 =
            gdod_combine(&grouped2, &BasisMethod::Svd, MaskRule::AllAgree, &mut Rng::new(0))
                .unwrap();
        let expected: Vec<f64> = dec1.update.iter().map(|v| v * lambda).collect();
        assert_vec_close(&dec2.update, &expected, 1e-8);
    }
}
