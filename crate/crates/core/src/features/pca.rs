use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::FeatureError;

/// Linear projection onto the leading principal components of a sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `d` orthonormal rows of length `D`, by decreasing variance.
    pub basis: Vec<Vec<f64>>,
    /// Sample-covariance eigenvalue of each basis row.
    pub variances: Vec<f64>,
}

impl PcaModel {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.basis.len()
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        self.basis
            .iter()
            .map(|b| b.iter().zip(x).zip(&self.mean).map(|((b, x), m)| b * (x - m)).sum())
            .collect()
    }

    pub fn reconstruct(&self, z: &[f64]) -> Vec<f64> {
        let mut x = self.mean.clone();
        for (b, &zi) in self.basis.iter().zip(z) {
            for (xj, bj) in x.iter_mut().zip(b) {
                *xj += zi * bj;
            }
        }
        x
    }
}

/// Fits PCA to `sample` (rows are observations) keeping `d` components.
///
/// Components come from the eigendecomposition of the sample covariance
/// (divisor `n - 1`). Each basis row is sign-normalized so its first entry
/// with magnitude above 1e-12 is positive.
pub fn fit_pca(sample: &[Vec<f64>], d: usize) -> Result<PcaModel, FeatureError> {
    let n = sample.len();
    let dim = sample.first().map_or(0, Vec::len);
    if d == 0 || d > dim {
        return Err(FeatureError::BadParams(format!(
            "pca dimension {d} must lie in 1..={dim}"
        )));
    }
    if n <= d {
        return Err(FeatureError::InsufficientSample {
            needed: d + 1,
            found: n,
        });
    }
    if sample.iter().any(|r| r.len() != dim) {
        return Err(FeatureError::DimensionMismatch {
            expected: dim,
            found: sample.iter().map(Vec::len).find(|&l| l != dim).unwrap_or(0),
        });
    }

    let mut mean = vec![0.0; dim];
    for row in sample {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let centered = DMatrix::from_fn(n, dim, |i, j| sample[i][j] - mean[j]);
    let cov = (centered.transpose() * &centered) / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let mut basis = Vec::with_capacity(d);
    let mut variances = Vec::with_capacity(d);
    for &k in &order[..d] {
        let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
            if *first < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
        }
        basis.push(v);
        variances.push(eig.eigenvalues[k].max(0.0));
    }
    Ok(PcaModel {
        mean,
        basis,
        variances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sample(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
        (0..n).map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
    }

    fn max_reconstruction_error(pca: &PcaModel, sample: &[Vec<f64>]) -> f64 {
        sample
            .iter()
            .flat_map(|x| {
                let r = pca.reconstruct(&pca.project(x));
                x.iter().zip(r).map(|(a, b)| (a - b).abs()).collect::<Vec<_>>()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn exact_plane() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = [1.0, 2.0, 0.0, -1.0, 0.5];
        let v = [0.0, 1.0, 1.0, 3.0, -2.0];
        let sample: Vec<Vec<f64>> = (0..50)
            .map(|_| {
                let (a, b): (f64, f64) = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
                (0..5).map(|j| 4.0 + a * u[j] + b * v[j]).collect()
            })
            .collect();
        let pca = fit_pca(&sample, 2).unwrap();
        assert!(max_reconstruction_error(&pca, &sample) < 1e-8);
    }

    #[test]
    fn full_dimension_is_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sample = random_sample(&mut rng, 40, 6);
        let pca = fit_pca(&sample, 6).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let dot: f64 = pca.basis[i].iter().zip(&pca.basis[j]).map(|(a, b)| a * b).sum();
                assert!((dot - (i == j) as u8 as f64).abs() < 1e-6);
            }
        }
        assert!(max_reconstruction_error(&pca, &sample) < 1e-8);
    }

    #[test]
    fn sign_convention() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pca = fit_pca(&random_sample(&mut rng, 30, 4), 3).unwrap();
        for b in &pca.basis {
            assert!(*b.iter().find(|x| x.abs() > 1e-12).unwrap() > 0.0);
        }
    }

    #[test]
    fn insufficient_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert!(matches!(
            fit_pca(&random_sample(&mut rng, 3, 5), 3).unwrap_err(),
            FeatureError::InsufficientSample { .. }
        ));
        assert!(fit_pca(&random_sample(&mut rng, 30, 5), 6).is_err());
    }
}
