//! Structural causal model generator.
//!
//! Per object: `y_true` cycles through the classes (balanced), `o = (o_c, o_s)`
//! with `o_c = M·onehot(y_true) + ε`, `o_s = ε'`, both shifted by a small mean
//! that depends on the object's home domain. Per (object, domain):
//! `x_c = o_c + jitter·η`, `x_a = A_d·o_s + shift·s_d + σ_xa·ε_xa (+ spurious
//! offset)`, where the domain offsets `s_d` are evenly spaced (unit spacing)
//! along one random axis, so held-out domains at either end are extremes of
//! a direction the training domains already vary along,
//! `x = W·[x_c; x_a] + σ_x·ε_x` (optionally through `tanh`), and the observed
//! label flips with probability `label_noise` (once per object, so every
//! observation of an object carries the same label).
//!
//! `A_d` only reads the non-class block of `o`, so `x_a` carries no label
//! information unless the spurious offset is switched on. That offset mimics a
//! translation applied to class-0 images only: in the training domains class-0
//! samples are shifted along one fixed direction, by a magnitude that differs
//! per domain, and held-out domains are never shifted.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::dataset::{Domain, MultiDomainDataset};
use crate::linalg::{squared_distance, Matrix};
use crate::rng::{stream, stream_rng, Rng};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScmConfig {
    pub num_domains: usize,
    pub num_classes: usize,
    /// Objects per class; every object is observed once in every domain.
    pub objects_per_class: usize,
    pub dim_xc: usize,
    pub dim_xa: usize,
    pub dim_x: usize,
    pub sigma_o: f64,
    pub sigma_xa: f64,
    pub sigma_x: f64,
    pub label_noise: f64,
    /// Scale of the fixed per-domain offset on `x_a` (drives δ_a).
    pub domain_shift_scale: f64,
    /// Per-observation noise on `x_c` (drives δ_c); 0 makes `x_c` a
    /// deterministic function of the object.
    pub object_jitter: f64,
    /// Strength of the home-domain mean shift on the object noise.
    pub object_domain_shift: f64,
    /// Probability that a class-0 training-domain sample receives an offset
    /// on `x_a` (the other classes never do, so the offset marks class 0).
    pub spurious_corr: f64,
    /// Magnitude of that offset; it is further scaled per training domain.
    pub spurious_strength: f64,
    /// Domains that never receive the spurious offset.
    pub test_domains: Vec<usize>,
    /// Apply `tanh` to the mixed features before the observation noise.
    pub nonlinear: bool,
    pub seed: u64,
}

impl Default for ScmConfig {
    fn default() -> Self {
        Self {
            num_domains: 4,
            num_classes: 2,
            objects_per_class: 100,
            dim_xc: 4,
            dim_xa: 4,
            dim_x: 16,
            sigma_o: 0.5,
            sigma_xa: 0.1,
            sigma_x: 0.05,
            label_noise: 0.0,
            domain_shift_scale: 8.0,
            object_jitter: 0.0,
            object_domain_shift: 0.2,
            spurious_corr: 0.0,
            spurious_strength: 3.0,
            test_domains: vec![3],
            nonlinear: false,
            seed: 0,
        }
    }
}

impl ScmConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("scm: {m}")));
        if self.num_domains < 1 || self.num_classes < 1 || self.objects_per_class < 1 {
            return bad("num_domains, num_classes and objects_per_class must be ≥ 1");
        }
        if self.dim_xc < 1 || self.dim_xa < 1 || self.dim_x < 1 {
            return bad("all dimensions must be ≥ 1");
        }
        for (name, v) in [
            ("sigma_o", self.sigma_o),
            ("sigma_xa", self.sigma_xa),
            ("sigma_x", self.sigma_x),
            ("label_noise", self.label_noise),
            ("object_jitter", self.object_jitter),
            ("object_domain_shift", self.object_domain_shift),
            ("spurious_strength", self.spurious_strength),
            ("domain_shift_scale", self.domain_shift_scale),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(&format!("{name} must be a finite value ≥ 0"));
            }
        }
        if !(0.0..=1.0).contains(&self.label_noise) {
            return bad("label_noise must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.spurious_corr) {
            return bad("spurious_corr must lie in [0, 1]");
        }
        if let Some(d) = self.test_domains.iter().find(|&&d| d >= self.num_domains) {
            return bad(&format!("test domain {d} out of range"));
        }
        Ok(())
    }

    pub fn domain_name(d: usize) -> String {
        format!("d{d}")
    }
}

fn normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn gaussian_vec(rng: &mut Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * normal(rng)).collect()
}

fn gaussian_matrix(rng: &mut Rng, rows: usize, cols: usize) -> Matrix {
    let s = 1.0 / (cols as f64).sqrt();
    Matrix::from_vec(rows, cols, gaussian_vec(rng, rows * cols, s))
}

/// `count` unit vectors in `dim` dimensions: axis-aligned when they fit,
/// random otherwise.
fn directions(rng: &mut Rng, count: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|i| {
            if count <= dim {
                let mut v = vec![0.0; dim];
                v[i] = 1.0;
                v
            } else {
                random_unit(rng, dim)
            }
        })
        .collect()
}

fn random_unit(rng: &mut Rng, dim: usize) -> Vec<f64> {
    let v = gaussian_vec(rng, dim, 1.0);
    let n = crate::linalg::norm(&v).max(1e-12);
    v.into_iter().map(|x| x / n).collect()
}

/// `1 + count` random unit vectors; orthonormal (Gram–Schmidt) when they fit
/// in `dim`, so the first one never aligns with the rest.
fn orthonormal_set(rng: &mut Rng, count: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(count + 1);
    for _ in 0..=count {
        let mut v = random_unit(rng, dim);
        if out.len() < dim {
            for b in &out {
                let p = crate::linalg::dot(&v, b);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
            }
            let n = crate::linalg::norm(&v).max(1e-12);
            v.iter_mut().for_each(|x| *x /= n);
        }
        out.push(v);
    }
    out
}

fn mat_vec(m: &Matrix, v: &[f64]) -> Vec<f64> {
    (0..m.rows())
        .map(|r| crate::linalg::dot(m.row(r), v))
        .collect()
}

pub fn generate_scm(cfg: &ScmConfig) -> Result<MultiDomainDataset> {
    cfg.validate()?;
    let mut rng = stream_rng(cfg.seed, stream::SCM);
    let k = cfg.num_domains;
    let c = cfg.num_classes;

    // structural parameters
    let class_means = directions(&mut rng, c, cfg.dim_xc);
    let style_maps: Vec<Matrix> = (0..k)
        .map(|_| gaussian_matrix(&mut rng, cfg.dim_xa, cfg.dim_xa))
        .collect();
    // domains sit at evenly spaced points on one line through the origin;
    // the spurious offset direction is orthogonal to that line
    let axes = orthonormal_set(&mut rng, 1, cfg.dim_xa);
    let (shift_axis, spurious_dir) = (&axes[0], &axes[1]);
    let centre = (k as f64 - 1.0) / 2.0;
    let domain_offsets: Vec<Vec<f64>> = (0..k)
        .map(|d| shift_axis.iter().map(|a| (d as f64 - centre) * a).collect())
        .collect();
    let home_shift: Vec<(Vec<f64>, Vec<f64>)> = (0..k)
        .map(|_| {
            (
                gaussian_vec(&mut rng, cfg.dim_xc, cfg.object_domain_shift),
                gaussian_vec(&mut rng, cfg.dim_xa, cfg.object_domain_shift),
            )
        })
        .collect();
    let mixer = gaussian_matrix(&mut rng, cfg.dim_x, cfg.dim_xc + cfg.dim_xa);
    // training domains get distinct offset magnitudes, like per-source translations
    let mut train_rank = 0usize;
    let spurious_scale: Vec<Option<f64>> = (0..k)
        .map(|d| {
            if cfg.test_domains.contains(&d) {
                None
            } else {
                train_rank += 1;
                Some(cfg.spurious_strength * train_rank as f64)
            }
        })
        .collect();

    // objects
    struct Object {
        label: usize,
        causal: Vec<f64>,
        style: Vec<f64>,
    }
    let n_obj = c * cfg.objects_per_class;
    let objects: Vec<Object> = (0..n_obj)
        .map(|i| {
            let y_true = i % c;
            let home = i % k;
            let causal = class_means[y_true]
                .iter()
                .zip(&home_shift[home].0)
                .map(|(m, h)| m + h + cfg.sigma_o * normal(&mut rng))
                .collect();
            let style = home_shift[home]
                .1
                .iter()
                .map(|h| h + cfg.sigma_o * normal(&mut rng))
                .collect();
            let mut label = y_true;
            if c > 1 && cfg.label_noise > 0.0 && rng.gen::<f64>() < cfg.label_noise {
                let other = rng.gen_range(0..c - 1);
                label = if other >= y_true { other + 1 } else { other };
            }
            Object {
                label,
                causal,
                style,
            }
        })
        .collect();

    let mut domains = Vec::with_capacity(k);
    for d in 0..k {
        let mut x = Matrix::zeros(n_obj, cfg.dim_x);
        let mut xc = Matrix::zeros(n_obj, cfg.dim_xc);
        let mut xa_table = Matrix::zeros(n_obj, cfg.dim_xa);
        let mut labels = Vec::with_capacity(n_obj);
        for (i, obj) in objects.iter().enumerate() {
            let xc_row: Vec<f64> = obj
                .causal
                .iter()
                .map(|v| v + cfg.object_jitter * normal(&mut rng))
                .collect();
            let y = obj.label;
            let mut xa = mat_vec(&style_maps[d], &obj.style);
            for (j, v) in xa.iter_mut().enumerate() {
                *v +=
                    cfg.domain_shift_scale * domain_offsets[d][j] + cfg.sigma_xa * normal(&mut rng);
            }
            if let (Some(scale), 0) = (spurious_scale[d], y) {
                if cfg.spurious_corr > 0.0 && rng.gen::<f64>() < cfg.spurious_corr {
                    for (v, u) in xa.iter_mut().zip(spurious_dir) {
                        *v += scale * u;
                    }
                }
            }
            let mut z = xc_row.clone();
            z.extend_from_slice(&xa);
            let mixed = mat_vec(&mixer, &z);
            for (j, m) in mixed.into_iter().enumerate() {
                let m = if cfg.nonlinear { m.tanh() } else { m };
                x[(i, j)] = m + cfg.sigma_x * normal(&mut rng);
            }
            xc.row_mut(i).copy_from_slice(&xc_row);
            xa_table.row_mut(i).copy_from_slice(&xa);
            labels.push(y);
        }
        domains.push(Domain {
            name: ScmConfig::domain_name(d),
            x,
            labels,
            object_ids: (0..n_obj as i64).collect(),
            xc: Some(xc),
            xa: Some(xa_table),
        });
    }
    let mut ds = MultiDomainDataset::new(domains, c)?;
    ds.generator = serde_json::json!({ "kind": "scm", "config": cfg });
    Ok(ds)
}

/// Separation of causal and domain-dependent features over same-class pairs
/// drawn from different domains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Separation {
    /// Largest `x_c` distance (δ_c).
    pub delta_c: f64,
    /// Smallest `x_a` distance (δ_a).
    pub delta_a: f64,
}

fn ground_truth(d: &Domain) -> Result<(&Matrix, &Matrix)> {
    match (&d.xc, &d.xa) {
        (Some(c), Some(a)) => Ok((c, a)),
        _ => Err(Error::Mismatch(format!(
            "domain `{}` lacks ground-truth features",
            d.name
        ))),
    }
}

/// Brute-force [`Separation`] over every same-class, cross-domain pair of
/// the stored ground-truth features.
pub fn separation(ds: &MultiDomainDataset) -> Result<Separation> {
    let mut delta_c = 0.0f64;
    let mut delta_a = f64::INFINITY;
    for (i, di) in ds.domains.iter().enumerate() {
        let (ci, ai) = ground_truth(di)?;
        for dj in &ds.domains[i + 1..] {
            let (cj, aj) = ground_truth(dj)?;
            for p in 0..di.len() {
                for q in 0..dj.len() {
                    if di.labels[p] != dj.labels[q] {
                        continue;
                    }
                    delta_c = delta_c.max(squared_distance(ci.row(p), cj.row(q)).sqrt());
                    delta_a = delta_a.min(squared_distance(ai.row(p), aj.row(q)).sqrt());
                }
            }
        }
    }
    if delta_a.is_infinite() {
        return Err(Error::EmptySplit("no same-class cross-domain pairs".into()));
    }
    Ok(Separation { delta_c, delta_a })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_shared_objects() {
        let cfg = ScmConfig {
            num_domains: 2,
            num_classes: 2,
            objects_per_class: 5,
            test_domains: vec![1],
            ..Default::default()
        };
        let ds = generate_scm(&cfg).unwrap();
        assert_eq!(ds.num_domains(), 2);
        for d in &ds.domains {
            assert_eq!(d.len(), 10);
            let ids: std::collections::BTreeSet<_> = d.object_ids.iter().copied().collect();
            assert_eq!(ids.len(), 10);
        }
        assert_eq!(ds.domains[0].object_ids, ds.domains[1].object_ids);
    }

    #[test]
    fn zero_jitter_gives_identical_causal_features() {
        let ds = generate_scm(&ScmConfig::default()).unwrap();
        let base = ds.domains[0].xc.as_ref().unwrap();
        for d in &ds.domains[1..] {
            let xc = d.xc.as_ref().unwrap();
            for i in 0..d.len() {
                assert_eq!(squared_distance(base.row(i), xc.row(i)), 0.0);
            }
        }
    }

    #[test]
    fn deterministic_in_seed() {
        let a = generate_scm(&ScmConfig::default()).unwrap();
        let b = generate_scm(&ScmConfig::default()).unwrap();
        assert_eq!(a, b);
        let c = generate_scm(&ScmConfig {
            seed: 1,
            ..Default::default()
        })
        .unwrap();
        assert_ne!(a.domains[0].x, c.domains[0].x);
    }

    #[test]
    fn label_noise_flips_roughly_the_requested_share() {
        let ds = generate_scm(&ScmConfig {
            label_noise: 0.2,
            objects_per_class: 500,
            ..Default::default()
        })
        .unwrap();
        let d = &ds.domains[0];
        let flipped = (0..d.len()).filter(|&i| d.labels[i] != i % 2).count();
        let share = flipped as f64 / d.len() as f64;
        assert!((share - 0.2).abs() < 0.04, "share {share}");
    }

    #[test]
    fn default_config_separates_causal_from_domain_features() {
        let s = separation(&generate_scm(&ScmConfig::default()).unwrap()).unwrap();
        assert!(s.delta_c < s.delta_a, "{s:?}");
    }

    #[test]
    fn invalid_configs_rejected() {
        for cfg in [
            ScmConfig {
                dim_xa: 0,
                ..Default::default()
            },
            ScmConfig {
                spurious_corr: 1.5,
                ..Default::default()
            },
            ScmConfig {
                sigma_o: -1.0,
                ..Default::default()
            },
            ScmConfig {
                test_domains: vec![9],
                ..Default::default()
            },
        ] {
            assert!(generate_scm(&cfg).is_err());
        }
    }
}
