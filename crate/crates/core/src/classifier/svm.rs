//! Binary SVM solvers: Pegasos subgradient descent for the linear kernel and
//! SMO on the kernel dual for RBF.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn rbf(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

/// Linear decision function `w . x + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearMachine {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearMachine {
    pub fn decision(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }
}

/// Regularized hinge objective `lambda/2 |w|^2 + mean(max(0, 1 - y f(x)))`.
/// The bias is treated as one more weight on a constant feature.
pub fn hinge_objective(m: &LinearMachine, xs: &[&[f64]], ys: &[f64], lambda: f64) -> f64 {
    let reg = 0.5 * lambda * (dot(&m.weights, &m.weights) + m.bias * m.bias);
    let loss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (1.0 - y * m.decision(x)).max(0.0))
        .sum();
    reg + loss / xs.len() as f64
}

/// Pegasos with step `1 / (lambda t)` and projection onto the ball of radius
/// `1 / sqrt(lambda)`. The bias is learned as the weight of a constant 1
/// feature. Returns the machine and the objective at the end of each epoch,
/// preceded by the objective at `w = 0`.
pub fn pegasos(
    xs: &[&[f64]],
    ys: &[f64],
    lambda: f64,
    epochs: usize,
    rng: &mut ChaCha8Rng,
) -> (LinearMachine, Vec<f64>) {
    let d = xs.first().map_or(0, |x| x.len());
    // w = scale * v, with the bias stored as v[d].
    let mut v = vec![0.0; d + 1];
    let mut scale = 1.0;
    let mut v_norm2 = 0.0;
    let radius = 1.0 / lambda.sqrt();
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut t = 0usize;

    let snapshot = |v: &[f64], scale: f64| LinearMachine {
        weights: v[..d].iter().map(|x| x * scale).collect(),
        bias: v[d] * scale,
    };
    let mut trace = vec![hinge_objective(&snapshot(&v, scale), xs, ys, lambda)];

    for _ in 0..epochs {
        order.shuffle(rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let x = xs[i];
            let y = ys[i];
            let vx = dot(&v[..d], x) + v[d];
            let margin = y * scale * vx;

            scale *= 1.0 - eta * lambda;
            if scale == 0.0 {
                v.iter_mut().for_each(|e| *e = 0.0);
                v_norm2 = 0.0;
                scale = 1.0;
            }
            if margin < 1.0 {
                let a = eta * y / scale;
                // |v + a x'|^2 with x' = (x, 1); `vx` is stale after a reset.
                let vx_now = if v_norm2 == 0.0 { 0.0 } else { vx };
                let x_norm2 = dot(x, x) + 1.0;
                for (vj, xj) in v[..d].iter_mut().zip(x) {
                    *vj += a * xj;
                }
                v[d] += a;
                v_norm2 += 2.0 * a * vx_now + a * a * x_norm2;
            }
            let w_norm = scale * v_norm2.max(0.0).sqrt();
            if w_norm > radius {
                scale *= radius / w_norm;
            }
        }
        // Fold the scale back in so it never drifts toward underflow.
        v.iter_mut().for_each(|e| *e *= scale);
        v_norm2 = dot(&v, &v);
        scale = 1.0;
        trace.push(hinge_objective(&snapshot(&v, scale), xs, ys, lambda));
    }
    (snapshot(&v, scale), trace)
}

/// Dual coefficients of a trained kernel machine over the training points.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    /// Lagrange multipliers, `0 <= alpha_i <= c`.
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
}

/// Solves `min 1/2 a'Qa - 1'a` s.t. `y'a = 0`, `0 <= a <= c`, where
/// `Q_ij = y_i y_j K_ij`, by SMO with maximal-violating-pair selection.
/// `kernel(i, j)` must be symmetric.
pub fn smo<K: Fn(usize, usize) -> f64>(kernel: K, ys: &[f64], c: f64, eps: f64) -> DualSolution {
    const TAU: f64 = 1e-12;
    let n = ys.len();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let max_iter = (100 * n).max(10_000_000);
    let diag: Vec<f64> = (0..n).map(|i| kernel(i, i)).collect();
    let mut iterations = 0;

    let is_up = |a: f64, y: f64| (y > 0.0 && a < c) || (y < 0.0 && a > 0.0);
    let is_low = |a: f64, y: f64| (y > 0.0 && a > 0.0) || (y < 0.0 && a < c);

    while iterations < max_iter {
        let mut i = usize::MAX;
        let mut g_max = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut g_min = f64::INFINITY;
        for t in 0..n {
            let v = -ys[t] * grad[t];
            if is_up(alpha[t], ys[t]) && v > g_max {
                g_max = v;
                i = t;
            }
            if is_low(alpha[t], ys[t]) && v < g_min {
                g_min = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || g_max - g_min < eps {
            break;
        }
        iterations += 1;

        let k_ij = kernel(i, j);
        let (yi, yj) = (ys[i], ys[j]);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let (mut ai, mut aj) = (old_i, old_j);
        // Curvature along the pair direction: K_ii + K_jj - 2 K_ij for either label pairing.
        let quad = (diag[i] + diag[j] - 2.0 * k_ij).max(TAU);
        if yi != yj {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        alpha[i] = ai;
        alpha[j] = aj;
        let (di, dj) = (ai - old_i, aj - old_j);
        for t in 0..n {
            let q_ti = ys[t] * yi * kernel(t, i);
            let q_tj = ys[t] * yj * kernel(t, j);
            grad[t] += q_ti * di + q_tj * dj;
        }
    }

    // Offset from free multipliers, else the midpoint of the feasible interval.
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut free_sum) = (0usize, 0.0);
    for t in 0..n {
        let yg = ys[t] * grad[t];
        if alpha[t] >= c {
            if ys[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if ys[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 {
        free_sum / free as f64
    } else {
        (ub + lb) / 2.0
    };
    DualSolution {
        alpha,
        bias: -rho,
        iterations,
    }
}
