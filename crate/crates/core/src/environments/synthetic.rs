//! RBF score surfaces over a continuous user space, and a GMM population
//! discretized onto k-means anchors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};
use crate::game::{ScoreMatrix, UserPopulation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbfKernel {
    pub center: Vec<f64>,
    pub amplitude: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbfModelSpec {
    pub bias: f64,
    pub kernels: Vec<RbfKernel>,
}

impl RbfModelSpec {
    fn validate(&self, dim: usize) -> Result<()> {
        if self.kernels.is_empty() {
            return Err(GameError::InvalidParameter("RBF model without kernels".into()));
        }
        for k in &self.kernels {
            if !(k.width > 0.0) || !k.width.is_finite() {
                return Err(GameError::InvalidParameter(format!(
                    "kernel width must be positive, got {}",
                    k.width
                )));
            }
            if k.center.len() != dim {
                return Err(GameError::InvalidInput(format!(
                    "kernel center has dimension {}, types have {dim}",
                    k.center.len()
                )));
            }
        }
        Ok(())
    }

    /// Bias plus all kernels, clamped to `[0, 1]`.
    pub fn evaluate(&self, point: &[f64]) -> f64 {
        let raw = self.bias
            + self
                .kernels
                .iter()
                .map(|k| k.amplitude * (-squared_distance(point, &k.center) / (2.0 * k.width * k.width)).exp())
                .sum::<f64>();
        raw.clamp(0.0, 1.0)
    }
}

/// Score matrix with `S_j(θ_k)` = model `j` evaluated at type coordinate `k`.
pub fn rbf_scores(models: &[RbfModelSpec], types: &[Vec<f64>]) -> Result<ScoreMatrix<f64>> {
    let dim = types
        .first()
        .map(Vec::len)
        .ok_or_else(|| GameError::InvalidInput("no type coordinates".into()))?;
    if types.iter().any(|t| t.len() != dim) {
        return Err(GameError::InvalidInput("type coordinates differ in dimension".into()));
    }
    for m in models {
        m.validate(dim)?;
    }
    let rows = models
        .iter()
        .map(|m| types.iter().map(|t| m.evaluate(t)).collect())
        .collect();
    ScoreMatrix::from_rows(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
}

fn default_samples() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmPopulationSpec {
    pub components: Vec<GmmComponent>,
    pub k_types: usize,
    #[serde(default)]
    pub shift_dx: f64,
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub n_samples: usize,
}

const KMEANS_ITERATIONS: usize = 20;

/// Draws `n_samples` points from the shifted mixture, fits `k_types` anchors
/// with seeded k-means++ and 20 Lloyd iterations, and weights each anchor by
/// the share of draws nearest to it. Returns the population (types `u1..uK`)
/// and the anchor coordinates.
///
/// The draw noise does not depend on `shift_dx`, so shifting moves every
/// anchor by `(dx, 0, ..)` for a fixed seed.
pub fn gmm_population(spec: &GmmPopulationSpec) -> Result<(UserPopulation<f64>, Vec<Vec<f64>>)> {
    let factors = validate_gmm(spec)?;
    let dim = spec.components[0].mean.len();
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);

    let cumulative: Vec<f64> = spec
        .components
        .iter()
        .scan(0.0, |acc, c| {
            *acc += c.weight;
            Some(*acc)
        })
        .collect();
    let mut samples = Vec::with_capacity(spec.n_samples);
    for _ in 0..spec.n_samples {
        let u: f64 = rng.random::<f64>() * cumulative[cumulative.len() - 1];
        let q = cumulative.iter().position(|&c| u < c).unwrap_or(cumulative.len() - 1);
        let z: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let comp = &spec.components[q];
        let point: Vec<f64> = (0..dim)
            .map(|r| {
                let noise: f64 = (0..=r).map(|c| factors[q][r][c] * z[c]).sum();
                let shift = if r == 0 { spec.shift_dx } else { 0.0 };
                comp.mean[r] + shift + noise
            })
            .collect();
        samples.push(point);
    }

    let anchors = kmeans(&samples, spec.k_types, &mut rng);
    let mut counts = vec![0usize; anchors.len()];
    for s in &samples {
        counts[nearest(s, &anchors)] += 1;
    }
    let total = samples.len() as f64;
    let weights = counts.iter().map(|&c| c as f64 / total).collect();
    let labels = (1..=anchors.len()).map(|k| format!("u{k}")).collect();
    Ok((UserPopulation::new(labels, weights)?, anchors))
}

fn validate_gmm(spec: &GmmPopulationSpec) -> Result<Vec<Vec<Vec<f64>>>> {
    if spec.components.is_empty() {
        return Err(GameError::InvalidParameter("GMM without components".into()));
    }
    if spec.k_types == 0 {
        return Err(GameError::InvalidParameter("k_types must be at least 1".into()));
    }
    if spec.n_samples < spec.k_types {
        return Err(GameError::InvalidParameter(format!(
            "{} samples cannot support {} types",
            spec.n_samples, spec.k_types
        )));
    }
    if !spec.shift_dx.is_finite() {
        return Err(GameError::InvalidParameter("shift_dx must be finite".into()));
    }
    let dim = spec.components[0].mean.len();
    if dim == 0 {
        return Err(GameError::InvalidParameter("zero-dimensional GMM".into()));
    }
    if spec.components.iter().any(|c| !(c.weight >= 0.0)) {
        return Err(GameError::InvalidParameter("negative component weight".into()));
    }
    let sum: f64 = spec.components.iter().map(|c| c.weight).sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(GameError::InvalidParameter(format!(
            "component weights sum to {sum}"
        )));
    }
    spec.components
        .iter()
        .map(|c| {
            if c.mean.len() != dim || c.covariance.len() != dim || c.covariance.iter().any(|r| r.len() != dim) {
                return Err(GameError::InvalidParameter("component dimensions disagree".into()));
            }
            cholesky(&c.covariance)
        })
        .collect()
}

/// Lower-triangular `L` with `L Lᵀ = a`; fails unless `a` is symmetric
/// positive definite.
fn cholesky(a: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = a.len();
    for i in 0..n {
        for j in 0..i {
            if (a[i][j] - a[j][i]).abs() > 1e-12 {
                return Err(GameError::InvalidParameter("covariance is not symmetric".into()));
            }
        }
    }
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let dot: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - dot;
                if !(d > 1e-300) {
                    return Err(GameError::InvalidParameter(
                        "covariance is not positive definite".into(),
                    ));
                }
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - dot) / l[j][j];
            }
        }
    }
    Ok(l)
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], anchors: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (k, a) in anchors.iter().enumerate() {
        let d = squared_distance(point, a);
        if d < best_d {
            best = k;
            best_d = d;
        }
    }
    best
}

fn kmeans(samples: &[Vec<f64>], k: usize, rng: &mut ChaCha20Rng) -> Vec<Vec<f64>> {
    let mut anchors = vec![samples[rng.random_range(0..samples.len())].clone()];
    let mut d2: Vec<f64> = samples.iter().map(|s| squared_distance(s, &anchors[0])).collect();
    while anchors.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            d2.iter()
                .position(|&d| {
                    acc += d;
                    acc > target
                })
                .unwrap_or(samples.len() - 1)
        } else {
            rng.random_range(0..samples.len())
        };
        let anchor = samples[pick].clone();
        for (d, s) in d2.iter_mut().zip(samples) {
            *d = d.min(squared_distance(s, &anchor));
        }
        anchors.push(anchor);
    }

    let dim = samples[0].len();
    for _ in 0..KMEANS_ITERATIONS {
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for s in samples {
            let c = nearest(s, &anchors);
            counts[c] += 1;
            for (acc, x) in sums[c].iter_mut().zip(s) {
                *acc += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                anchors[c] = sums[c].iter().map(|x| x / counts[c] as f64).collect();
            }
        }
    }
    anchors
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kernel(center: Vec<f64>, amplitude: f64, width: f64) -> RbfKernel {
        RbfKernel {
            center,
            amplitude,
            width,
        }
    }

    fn two_blobs(dx: f64, seed: u64) -> GmmPopulationSpec {
        let cov = vec![vec![0.25, 0.0], vec![0.0, 0.25]];
        GmmPopulationSpec {
            components: vec![
                GmmComponent {
                    weight: 0.6,
                    mean: vec![0.0, 0.0],
                    covariance: cov.clone(),
                },
                GmmComponent {
                    weight: 0.4,
                    mean: vec![3.0, 0.0],
                    covariance: cov,
                },
            ],
            k_types: 2,
            shift_dx: dx,
            seed,
            n_samples: 10_000,
        }
    }

    #[test]
    fn kernel_peak_and_tail() {
        let m = RbfModelSpec {
            bias: 0.1,
            kernels: vec![kernel(vec![0.0, 0.0], 0.5, 1.0)],
        };
        assert!((m.evaluate(&[0.0, 0.0]) - 0.6).abs() < 1e-15);
        assert!((m.evaluate(&[1e6, 0.0]) - 0.1).abs() < 1e-15);
        let model2 = RbfModelSpec {
            bias: 0.05,
            kernels: vec![kernel(vec![0.0, 0.0], 1.3, 0.35)],
        };
        assert_eq!(model2.evaluate(&[0.0, 0.0]), 1.0);
        let negative = RbfModelSpec {
            bias: -0.5,
            kernels: vec![kernel(vec![0.0], 0.1, 1.0)],
        };
        assert_eq!(negative.evaluate(&[9.0]), 0.0);
    }

    #[test]
    fn rbf_rejects_bad_widths() {
        let m = RbfModelSpec {
            bias: 0.0,
            kernels: vec![kernel(vec![0.0], 1.0, 0.0)],
        };
        assert!(rbf_scores(&[m], &[vec![0.0]]).is_err());
    }

    #[test]
    fn single_component_single_type() {
        let mut spec = two_blobs(0.0, 1);
        spec.components.truncate(1);
        spec.components[0].weight = 1.0;
        spec.k_types = 1;
        let (pop, anchors) = gmm_population(&spec).unwrap();
        assert_eq!(pop.weights(), &[1.0]);
        assert_eq!(anchors.len(), 1);
    }

    #[test]
    fn separated_blobs_recover_weights() {
        let (pop, anchors) = gmm_population(&two_blobs(0.0, 7)).unwrap();
        let (left, right) = if anchors[0][0] < anchors[1][0] { (0, 1) } else { (1, 0) };
        assert!((pop.weight(left) - 0.6).abs() < 0.02);
        assert!((pop.weight(right) - 0.4).abs() < 0.02);
    }

    #[test]
    fn reproducible_and_shift_equivariant() {
        let (a, anchors_a) = gmm_population(&two_blobs(0.0, 3)).unwrap();
        let (b, anchors_b) = gmm_population(&two_blobs(0.0, 3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(anchors_a, anchors_b);
        let (c, anchors_c) = gmm_population(&two_blobs(0.75, 3)).unwrap();
        assert_eq!(a.weights(), c.weights());
        for (p, q) in anchors_a.iter().zip(&anchors_c) {
            assert!((q[0] - p[0] - 0.75).abs() < 1e-9);
            assert!((q[1] - p[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn degenerate_covariance_is_rejected() {
        let mut spec = two_blobs(0.0, 1);
        spec.components[0].covariance = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        assert!(gmm_population(&spec).is_err());
        let mut spec = two_blobs(0.0, 1);
        spec.components[1].weight = 0.5;
        assert!(gmm_population(&spec).is_err());
    }
}
