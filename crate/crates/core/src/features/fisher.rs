use super::{DescriptorSet, FeatureError, FeatureVector, GmmModel, PcaModel};

/// Gradients of `sum_t log p(x_t)` with respect to each component mean and
/// each component standard deviation, mixture weights held fixed. Both blocks
/// are laid out component-major (`k * d + j`).
pub fn loglik_gradients(xs: &[Vec<f64>], gmm: &GmmModel) -> (Vec<f64>, Vec<f64>) {
    let (k, d) = (gmm.components(), gmm.dim());
    let mut d_mean = vec![0.0; k * d];
    let mut d_sigma = vec![0.0; k * d];
    for x in xs {
        let (post, _) = gmm.posteriors(x);
        for c in 0..k {
            let g = post[c];
            if g == 0.0 {
                continue;
            }
            for j in 0..d {
                let var = gmm.variances[c][j];
                let sigma = var.sqrt();
                let diff = x[j] - gmm.means[c][j];
                d_mean[c * d + j] += g * diff / var;
                d_sigma[c * d + j] += g * (diff * diff / (var * sigma) - 1.0 / sigma);
            }
        }
    }
    (d_mean, d_sigma)
}

/// Fisher vector before power and L2 normalization: mean block then
/// standard-deviation block, each gradient scaled by the diagonal Fisher
/// information and averaged over the `T` descriptors.
///
/// Mean entry: `1/(T sqrt(w_k)) sum_t g_tk (x_tj - mu_kj) / sigma_kj`.
/// Deviation entry: `1/(T sqrt(2 w_k)) sum_t g_tk ((x_tj - mu_kj)^2 / sigma_kj^2 - 1)`.
pub fn fisher_vector(xs: &[Vec<f64>], gmm: &GmmModel) -> Vec<f64> {
    let (k, d) = (gmm.components(), gmm.dim());
    let mut out = vec![0.0; 2 * k * d];
    if xs.is_empty() {
        return out;
    }
    let (mean_block, sigma_block) = out.split_at_mut(k * d);
    for x in xs {
        let (post, _) = gmm.posteriors(x);
        for c in 0..k {
            let g = post[c];
            if g == 0.0 {
                continue;
            }
            for j in 0..d {
                let z = (x[j] - gmm.means[c][j]) / gmm.variances[c][j].sqrt();
                mean_block[c * d + j] += g * z;
                sigma_block[c * d + j] += g * (z * z - 1.0);
            }
        }
    }
    let t = xs.len() as f64;
    for c in 0..k {
        let w = gmm.weights[c];
        let sm = 1.0 / (t * w.sqrt());
        let ss = 1.0 / (t * (2.0 * w).sqrt());
        for j in 0..d {
            mean_block[c * d + j] *= sm;
            sigma_block[c * d + j] *= ss;
        }
    }
    out
}

/// Signed square root followed by L2 normalization; a zero vector stays zero.
pub fn normalize(v: &mut [f64]) {
    for x in v.iter_mut() {
        *x = x.signum() * x.abs().sqrt();
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

/// Encodes a descriptor set. Zero descriptors (patches without ink) are
/// skipped, so a blank canvas encodes to the zero vector.
pub fn fisher_encode(
    ds: &DescriptorSet,
    pca: &PcaModel,
    gmm: &GmmModel,
) -> Result<FeatureVector, FeatureError> {
    if pca.output_dim() != gmm.dim() {
        return Err(FeatureError::DimensionMismatch {
            expected: gmm.dim(),
            found: pca.output_dim(),
        });
    }
    let mut projected = Vec::new();
    for d in ds.non_zero() {
        if d.len() != pca.input_dim() {
            return Err(FeatureError::DimensionMismatch {
                expected: pca.input_dim(),
                found: d.len(),
            });
        }
        projected.push(pca.project(d));
    }
    let mut v = fisher_vector(&projected, gmm);
    normalize(&mut v);
    Ok(FeatureVector(v))
}
