use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::FeatureError;

/// Lower bound applied to every component variance.
pub const VARIANCE_FLOOR: f64 = 1e-4;

// Fixed chunking keeps parallel reductions bit-stable across thread counts.
const CHUNK: usize = 512;

/// Gaussian mixture with diagonal covariances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
}

impl GmmModel {
    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    /// `log w_k + log N(x; mu_k, diag(var_k))` for every component.
    pub fn log_joint(&self, x: &[f64]) -> Vec<f64> {
        let d = x.len() as f64;
        self.weights
            .iter()
            .zip(&self.means)
            .zip(&self.variances)
            .map(|((w, mu), var)| {
                let mut q = 0.0;
                let mut log_det = 0.0;
                for ((xi, mi), vi) in x.iter().zip(mu).zip(var) {
                    let diff = xi - mi;
                    q += diff * diff / vi;
                    log_det += vi.ln();
                }
                w.ln() - 0.5 * (d * (2.0 * PI).ln() + log_det + q)
            })
            .collect()
    }

    /// Posterior component probabilities and `log p(x)`.
    pub fn posteriors(&self, x: &[f64]) -> (Vec<f64>, f64) {
        let mut lj = self.log_joint(x);
        let lse = log_sum_exp(&lj);
        lj.iter_mut().for_each(|v| *v = (*v - lse).exp());
        (lj, lse)
    }

    /// Total log-likelihood of a sample.
    pub fn log_likelihood(&self, sample: &[Vec<f64>]) -> f64 {
        sample
            .par_chunks(CHUNK)
            .map(|chunk| chunk.iter().map(|x| log_sum_exp(&self.log_joint(x))).sum::<f64>())
            .collect::<Vec<_>>()
            .into_iter()
            .sum()
    }
}

pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmOptions {
    pub max_iter: usize,
    /// Stop once the relative log-likelihood gain falls below this.
    pub tol: f64,
    pub variance_floor: f64,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions {
            max_iter: 100,
            tol: 1e-6,
            variance_floor: VARIANCE_FLOOR,
        }
    }
}

/// Fitted model plus the log-likelihood after initialization and after every
/// EM step.
#[derive(Debug, Clone)]
pub struct EmFit {
    pub model: GmmModel,
    pub log_likelihoods: Vec<f64>,
}

pub fn fit_gmm(sample: &[Vec<f64>], k: usize, seed: u64) -> Result<GmmModel, FeatureError> {
    fit_gmm_traced(sample, k, seed, &EmOptions::default()).map(|f| f.model)
}

/// EM for a diagonal GMM, initialized from k-means++ seeds with hard
/// assignment to the nearest seed.
pub fn fit_gmm_traced(
    sample: &[Vec<f64>],
    k: usize,
    seed: u64,
    opts: &EmOptions,
) -> Result<EmFit, FeatureError> {
    if k == 0 {
        return Err(FeatureError::BadParams("gmm needs at least one component".into()));
    }
    if sample.len() < 10 * k {
        return Err(FeatureError::InsufficientSample {
            needed: 10 * k,
            found: sample.len(),
        });
    }
    let dim = sample[0].len();
    if let Some(bad) = sample.iter().find(|x| x.len() != dim) {
        return Err(FeatureError::DimensionMismatch {
            expected: dim,
            found: bad.len(),
        });
    }
    if sample.iter().all(|x| x == &sample[0]) {
        return Err(FeatureError::DegenerateSample);
    }

    let seeds = kmeans_pp(sample, k, seed);
    let n = sample.len();
    let mut resp = vec![0.0; n * k];
    for (i, x) in sample.iter().enumerate() {
        let nearest = (0..k)
            .min_by(|&a, &b| sq_dist(x, &seeds[a]).total_cmp(&sq_dist(x, &seeds[b])))
            .unwrap_or(0);
        resp[i * k + nearest] = 1.0;
    }
    let global_var = weighted_moments(sample, &vec![1.0; n], 1).1;
    let mut model = m_step(sample, &resp, k, opts.variance_floor, Some((&seeds, &global_var)));

    let mut history = Vec::new();
    for iter in 0..opts.max_iter {
        let ll = e_step(&model, sample, &mut resp);
        let converged = history
            .last()
            .is_some_and(|&prev: &f64| ll - prev < opts.tol * prev.abs());
        history.push(ll);
        if converged {
            break;
        }
        model = m_step(sample, &resp, k, opts.variance_floor, None);
        if iter + 1 == opts.max_iter {
            history.push(model.log_likelihood(sample));
        }
    }
    Ok(EmFit {
        model,
        log_likelihoods: history,
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn kmeans_pp(sample: &[Vec<f64>], k: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = vec![sample[rng.gen_range(0..sample.len())].clone()];
    let mut d2: Vec<f64> = sample.iter().map(|x| sq_dist(x, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = sample.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            pick
        } else {
            rng.gen_range(0..sample.len())
        };
        let c = sample[next].clone();
        for (d, x) in d2.iter_mut().zip(sample) {
            *d = d.min(sq_dist(x, &c));
        }
        centers.push(c);
    }
    centers
}

/// Fills `resp` (row-major `n x k`) and returns the total log-likelihood.
fn e_step(model: &GmmModel, sample: &[Vec<f64>], resp: &mut [f64]) -> f64 {
    let k = model.components();
    resp.par_chunks_mut(CHUNK * k)
        .zip(sample.par_chunks(CHUNK))
        .map(|(r, xs)| {
            let mut ll = 0.0;
            for (row, x) in r.chunks_mut(k).zip(xs) {
                let (p, l) = model.posteriors(x);
                row.copy_from_slice(&p);
                ll += l;
            }
            ll
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum()
}

/// Weighted mean and (biased) variance of a sample for a single weight column.
fn weighted_moments(sample: &[Vec<f64>], w: &[f64], stride: usize) -> (Vec<f64>, Vec<f64>) {
    let dim = sample[0].len();
    let mut total = 0.0;
    let mut mean = vec![0.0; dim];
    for (i, x) in sample.iter().enumerate() {
        let g = w[i * stride];
        total += g;
        for (m, v) in mean.iter_mut().zip(x) {
            *m += g * v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= total);
    let mut var = vec![0.0; dim];
    for (i, x) in sample.iter().enumerate() {
        let g = w[i * stride];
        for ((s, v), m) in var.iter_mut().zip(x).zip(&mean) {
            *s += g * (v - m) * (v - m);
        }
    }
    var.iter_mut().for_each(|s| *s /= total);
    (mean, var)
}

fn m_step(
    sample: &[Vec<f64>],
    resp: &[f64],
    k: usize,
    floor: f64,
    init: Option<(&[Vec<f64>], &[f64])>,
) -> GmmModel {
    let n = sample.len() as f64;
    let comps: Vec<(f64, Vec<f64>, Vec<f64>)> = (0..k)
        .into_par_iter()
        .map(|c| {
            let nk: f64 = (0..sample.len()).map(|i| resp[i * k + c]).sum();
            if nk <= f64::MIN_POSITIVE {
                // A component that lost all mass keeps its seed (or collapses
                // onto the sample moments) with a negligible weight.
                let (mean, var) = match init {
                    Some((seeds, gv)) => (seeds[c].clone(), gv.to_vec()),
                    None => weighted_moments(sample, &vec![1.0; sample.len()], 1),
                };
                return (f64::MIN_POSITIVE, mean, var);
            }
            let (mean, var) = weighted_moments(sample, &resp[c..], k);
            (nk / n, mean, var)
        })
        .collect();
    let total: f64 = comps.iter().map(|c| c.0).sum();
    let mut model = GmmModel {
        weights: Vec::with_capacity(k),
        means: Vec::with_capacity(k),
        variances: Vec::with_capacity(k),
    };
    for (w, mean, var) in comps {
        model.weights.push(w / total);
        model.means.push(mean);
        model.variances.push(var.into_iter().map(|v| v.max(floor)).collect());
    }
    model
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::normal;

    #[test]
    fn single_component_is_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let sample: Vec<Vec<f64>> = (0..200)
            .map(|_| vec![normal(&mut rng) * 2.0 + 1.0, normal(&mut rng) * 0.001, 3.0])
            .collect();
        let g = fit_gmm(&sample, 1, 0).unwrap();
        let n = sample.len() as f64;
        for j in 0..3 {
            let mean = sample.iter().map(|x| x[j]).sum::<f64>() / n;
            let var = sample.iter().map(|x| (x[j] - mean).powi(2)).sum::<f64>() / n;
            assert!((g.means[0][j] - mean).abs() < 1e-9);
            assert!((g.variances[0][j] - var.max(VARIANCE_FLOOR)).abs() < 1e-9);
        }
        assert_eq!(g.weights, vec![1.0]);
    }

    #[test]
    fn separated_clusters() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let centers = [[0.0, 0.0], [5.0, 5.0]];
        let sample: Vec<Vec<f64>> = (0..400)
            .map(|i| {
                let c = centers[i % 2];
                vec![c[0] + 0.3 * normal(&mut rng), c[1] + 0.3 * normal(&mut rng)]
            })
            .collect();
        let g = fit_gmm(&sample, 2, 1).unwrap();
        for c in centers {
            let best = g
                .means
                .iter()
                .map(|m| sq_dist(m, &c).sqrt())
                .fold(f64::INFINITY, f64::min);
            assert!(best < 0.1, "no mean near {c:?}: {:?}", g.means);
        }
        for w in &g.weights {
            assert!((w - 0.5).abs() < 0.05);
        }
    }

    #[test]
    fn log_likelihood_non_decreasing() {
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let sample: Vec<Vec<f64>> = (0..150)
                .map(|_| (0..3).map(|_| normal(&mut rng) + rng.gen_range(0..3) as f64).collect())
                .collect();
            let fit = fit_gmm_traced(&sample, 4, seed, &EmOptions::default()).unwrap();
            for w in fit.log_likelihoods.windows(2) {
                assert!(w[1] >= w[0] - 1e-9, "{:?}", fit.log_likelihoods);
            }
        }
    }

    #[test]
    fn posteriors_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let sample: Vec<Vec<f64>> = (0..100).map(|_| vec![normal(&mut rng), normal(&mut rng)]).collect();
        let g = fit_gmm(&sample, 3, 2).unwrap();
        for x in &sample {
            let (p, _) = g.posteriors(x);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        assert!((g.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_degenerate_and_small_samples() {
        let same = vec![vec![1.0, 2.0]; 50];
        assert!(matches!(fit_gmm(&same, 2, 0).unwrap_err(), FeatureError::DegenerateSample));
        let few = vec![vec![1.0], vec![2.0]];
        assert!(matches!(
            fit_gmm(&few, 1, 0).unwrap_err(),
            FeatureError::InsufficientSample { needed: 10, found: 2 }
        ));
    }

    #[test]
    fn deterministic_under_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let sample: Vec<Vec<f64>> = (0..2000).map(|_| vec![normal(&mut rng), normal(&mut rng)]).collect();
        assert_eq!(fit_gmm(&sample, 5, 7).unwrap(), fit_gmm(&sample, 5, 7).unwrap());
    }
}
