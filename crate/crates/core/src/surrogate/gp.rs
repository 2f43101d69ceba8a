//! Exact Gaussian-process regression with RBF or Matérn-5/2 kernels, a
//! learned homoskedastic noise term, and marginal-likelihood hyperparameter
//! fitting via the schedule-free optimizer. Factorization is a dense
//! lower-triangular Cholesky with an escalating jitter ladder.

use ndarray::{Array1, Array2, ArrayView2};

use super::optimizer::ScheduleFreeAdam;
use super::KernelType;
use crate::error::{Error, Result};

/// Log-parameterized kernel hyperparameters; variances, not deviations.
#[derive(Debug, Clone, Copy)]
pub struct GpHypers {
    pub log_lengthscale: f64,
    pub log_signal_var: f64,
    pub log_noise_var: f64,
}

impl GpHypers {
    pub fn lengthscale(&self) -> f64 {
        self.log_lengthscale.exp()
    }
    pub fn signal_var(&self) -> f64 {
        self.log_signal_var.exp()
    }
    pub fn noise_var(&self) -> f64 {
        self.log_noise_var.exp()
    }
}

/// r2[i, j] = squared Euclidean distance between a_i and b_j.
pub(crate) fn pairwise_sq_dists(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    let a_sq: Array1<f64> = a.rows().into_iter().map(|r| r.dot(&r)).collect();
    let b_sq: Array1<f64> = b.rows().into_iter().map(|r| r.dot(&r)).collect();
    let mut r2 = a.dot(&b.t());
    for i in 0..r2.nrows() {
        for j in 0..r2.ncols() {
            r2[[i, j]] = (a_sq[i] + b_sq[j] - 2.0 * r2[[i, j]]).max(0.0);
        }
    }
    r2
}

pub(crate) fn kernel_matrix(
    kernel: KernelType,
    r2: &Array2<f64>,
    lengthscale: f64,
    signal_var: f64,
) -> Array2<f64> {
    match kernel {
        KernelType::Rbf => {
            let inv = 1.0 / (2.0 * lengthscale * lengthscale);
            r2.mapv(|d| signal_var * (-d * inv).exp())
        }
        KernelType::Matern52 => r2.mapv(|d| {
            let a = (5.0 * d).sqrt() / lengthscale;
            signal_var * (1.0 + a + a * a / 3.0) * (-a).exp()
        }),
    }
}

/// Elementwise derivative of the kernel with respect to the squared
/// distance; finite at r = 0 for both kernels.
pub(crate) fn kernel_d_dr2(
    kernel: KernelType,
    r2: &Array2<f64>,
    lengthscale: f64,
    signal_var: f64,
) -> Array2<f64> {
    let l2 = lengthscale * lengthscale;
    match kernel {
        KernelType::Rbf => {
            let inv = 1.0 / (2.0 * l2);
            r2.mapv(|d| -signal_var * (-d * inv).exp() * inv)
        }
        KernelType::Matern52 => r2.mapv(|d| {
            let a = (5.0 * d).sqrt() / lengthscale;
            -signal_var * (1.0 + a) * (-a).exp() * 5.0 / (6.0 * l2)
        }),
    }
}

/// Elementwise derivative with respect to log lengthscale.
fn kernel_d_dlog_l(
    kernel: KernelType,
    r2: &Array2<f64>,
    lengthscale: f64,
    signal_var: f64,
) -> Array2<f64> {
    match kernel {
        KernelType::Rbf => {
            let l2 = lengthscale * lengthscale;
            let inv = 1.0 / (2.0 * l2);
            r2.mapv(|d| signal_var * (-d * inv).exp() * d / l2)
        }
        KernelType::Matern52 => r2.mapv(|d| {
            let a = (5.0 * d).sqrt() / lengthscale;
            signal_var * (a * a / 3.0) * (1.0 + a) * (-a).exp()
        }),
    }
}

/// Lower-triangular Cholesky factor; `None` on a non-positive pivot.
pub(crate) fn cholesky(a: &Array2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[[i, j]];
            for k in 0..j {
                sum -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return None;
                }
                l[[i, j]] = sum.sqrt();
            } else {
                l[[i, j]] = sum / l[[j, j]];
            }
        }
    }
    Some(l)
}

const JITTER_LADDER: [f64; 6] = [0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4];

/// Cholesky with diagonal jitter escalation; returns the factor and the
/// jitter that succeeded.
pub(crate) fn cholesky_jittered(k: &Array2<f64>) -> Result<(Array2<f64>, f64)> {
    for &jitter in &JITTER_LADDER {
        let mut work = k.clone();
        if jitter > 0.0 {
            for i in 0..work.nrows() {
                work[[i, i]] += jitter;
            }
        }
        if let Some(l) = cholesky(&work) {
            return Ok((l, jitter));
        }
    }
    Err(Error::Cholesky { max_jitter: 1e-4 })
}

/// Solve L v = b.
pub(crate) fn solve_lower(l: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = b.len();
    let mut v = Array1::zeros(n);
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[[i, k]] * v[k];
        }
        v[i] = sum / l[[i, i]];
    }
    v
}

/// Solve L^T v = b.
pub(crate) fn solve_lower_t(l: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = b.len();
    let mut v = Array1::zeros(n);
    for i in (0..n).rev() {
        let mut sum = b[i];
        for k in (i + 1)..n {
            sum -= l[[k, i]] * v[k];
        }
        v[i] = sum / l[[i, i]];
    }
    v
}

/// Solve (L L^T) v = b.
pub(crate) fn chol_solve(l: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    solve_lower_t(l, &solve_lower(l, b))
}

/// Dense inverse of L L^T from the factor.
pub(crate) fn chol_inverse(l: &Array2<f64>) -> Array2<f64> {
    let n = l.nrows();
    let mut inv = Array2::zeros((n, n));
    let mut e = Array1::zeros(n);
    for j in 0..n {
        e.fill(0.0);
        e[j] = 1.0;
        let col = chol_solve(l, &e);
        inv.column_mut(j).assign(&col);
    }
    inv
}

pub(crate) struct MlEval {
    /// Log marginal likelihood of the centered labels.
    pub lml: f64,
    /// d lml / d (log lengthscale, log signal var, log noise var).
    pub grad: [f64; 3],
    /// 0.5 (alpha alpha^T - K_y^{-1}): d lml / d K for symmetric
    /// perturbations, used for feature backprop in the deep kernel.
    pub dk: Option<Array2<f64>>,
}

/// Marginal likelihood and its gradients for a kernel built from the
/// precomputed squared-distance matrix.
pub(crate) fn eval_marginal_likelihood(
    kernel: KernelType,
    r2: &Array2<f64>,
    y_centered: &Array1<f64>,
    h: &GpHypers,
    want_dk: bool,
) -> Result<MlEval> {
    let n = y_centered.len();
    let (l, s, noise) = (h.lengthscale(), h.signal_var(), h.noise_var());
    let k = kernel_matrix(kernel, r2, l, s);
    let mut k_y = k.clone();
    for i in 0..n {
        k_y[[i, i]] += noise;
    }
    let (chol, _) = cholesky_jittered(&k_y)?;
    let alpha = chol_solve(&chol, y_centered);
    let log_det_half: f64 = (0..n).map(|i| chol[[i, i]].ln()).sum();
    let lml = -0.5 * y_centered.dot(&alpha)
        - log_det_half
        - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();

    let k_inv = chol_inverse(&chol);
    // C_ij = 0.5 (alpha_i alpha_j - Kinv_ij); d lml / d theta = sum_ij C_ij dK_ij.
    let mut c = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            c[[i, j]] = 0.5 * (alpha[i] * alpha[j] - k_inv[[i, j]]);
        }
    }
    let dk_dlog_l = kernel_d_dlog_l(kernel, r2, l, s);
    let mut g_log_l = 0.0;
    let mut g_log_s = 0.0;
    for i in 0..n {
        for j in 0..n {
            g_log_l += c[[i, j]] * dk_dlog_l[[i, j]];
            // dK / d log s = K elementwise for both kernels.
            g_log_s += c[[i, j]] * k[[i, j]];
        }
    }
    let g_log_noise: f64 = (0..n).map(|i| c[[i, i]] * noise).sum();

    Ok(MlEval {
        lml,
        grad: [g_log_l, g_log_s, g_log_noise],
        dk: want_dk.then_some(c),
    })
}

#[derive(Debug, Clone)]
pub struct GpModel {
    pub(crate) kernel: KernelType,
    pub(crate) hypers: GpHypers,
    pub(crate) x_train: Array2<f64>,
    pub(crate) y_mean: f64,
    pub(crate) alpha: Array1<f64>,
    pub(crate) chol: Array2<f64>,
    pub(crate) jitter: f64,
}

/// Median pairwise distance over positive entries; 1.0 when all rows
/// coincide.
pub(crate) fn median_heuristic(r2: &Array2<f64>) -> f64 {
    let mut dists: Vec<f64> = Vec::new();
    for i in 0..r2.nrows() {
        for j in (i + 1)..r2.ncols() {
            if r2[[i, j]] > 0.0 {
                dists.push(r2[[i, j]]);
            }
        }
    }
    if dists.is_empty() {
        return 1.0;
    }
    dists.sort_by(f64::total_cmp);
    dists[dists.len() / 2].sqrt()
}

pub(crate) fn initial_hypers(r2: &Array2<f64>, y_centered: &Array1<f64>) -> GpHypers {
    let var = y_centered.mapv(|v| v * v).sum() / y_centered.len() as f64;
    GpHypers {
        log_lengthscale: median_heuristic(r2).ln(),
        log_signal_var: var.max(1e-6).ln(),
        log_noise_var: (0.1 * var).max(1e-7).ln(),
    }
}

pub(crate) fn finalize_gp(
    kernel: KernelType,
    hypers: GpHypers,
    x_train: Array2<f64>,
    y_centered: &Array1<f64>,
    y_mean: f64,
    r2: &Array2<f64>,
) -> Result<GpModel> {
    let n = y_centered.len();
    let mut k_y = kernel_matrix(kernel, r2, hypers.lengthscale(), hypers.signal_var());
    for i in 0..n {
        k_y[[i, i]] += hypers.noise_var();
    }
    let (chol, jitter) = cholesky_jittered(&k_y)?;
    let alpha = chol_solve(&chol, y_centered);
    Ok(GpModel {
        kernel,
        hypers,
        x_train,
        y_mean,
        alpha,
        chol,
        jitter,
    })
}

/// Fit with fixed hyperparameters and a zero (or empirical) mean function;
/// the direct path used by closed-form checks.
pub fn fit_gp_fixed(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    kernel: KernelType,
    lengthscale: f64,
    signal_var: f64,
    noise_var: f64,
    center: bool,
) -> Result<GpModel> {
    if x.nrows() != y.len() || y.len() < 2 {
        return Err(Error::Size(format!(
            "gp needs >=2 rows with matching labels, got {} x {}",
            x.nrows(),
            y.len()
        )));
    }
    let y_mean = if center {
        y.iter().sum::<f64>() / y.len() as f64
    } else {
        0.0
    };
    let y_centered = Array1::from_iter(y.iter().map(|v| v - y_mean));
    let hypers = GpHypers {
        log_lengthscale: lengthscale.ln(),
        log_signal_var: signal_var.ln(),
        log_noise_var: noise_var.ln(),
    };
    let r2 = pairwise_sq_dists(x, x);
    finalize_gp(kernel, hypers, x.to_owned(), &y_centered, y_mean, &r2)
}

/// Maximize marginal likelihood over (lengthscale, signal, noise) for a
/// fixed iteration budget; labels are centered on their empirical mean.
pub fn train_gp(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    kernel: KernelType,
    learning_rate: f64,
    n_iters: usize,
) -> Result<GpModel> {
    if x.nrows() != y.len() || y.len() < 2 {
        return Err(Error::Size(format!(
            "gp needs >=2 rows with matching labels, got {} x {}",
            x.nrows(),
            y.len()
        )));
    }
    let y_mean = y.iter().sum::<f64>() / y.len() as f64;
    let y_centered = Array1::from_iter(y.iter().map(|v| v - y_mean));
    let r2 = pairwise_sq_dists(x, x);
    let init = initial_hypers(&r2, &y_centered);
    let theta0 = Array1::from(vec![
        init.log_lengthscale,
        init.log_signal_var,
        init.log_noise_var,
    ]);
    let mut opt = ScheduleFreeAdam::new(theta0, learning_rate);
    for iter in 0..n_iters {
        let theta = opt.grad_point();
        let h = GpHypers {
            log_lengthscale: theta[0],
            log_signal_var: theta[1],
            log_noise_var: theta[2],
        };
        let eval = eval_marginal_likelihood(kernel, &r2, &y_centered, &h, false).map_err(|e| {
            Error::TrainingDiverged {
                epoch: iter,
                msg: e.to_string(),
            }
        })?;
        if !eval.lml.is_finite() {
            return Err(Error::TrainingDiverged {
                epoch: iter,
                msg: "non-finite marginal likelihood".into(),
            });
        }
        let loss_grad = Array1::from(vec![-eval.grad[0], -eval.grad[1], -eval.grad[2]]);
        opt.step(&loss_grad)?;
        opt.clamp(-15.0, 15.0);
    }
    let theta = opt.params();
    let hypers = GpHypers {
        log_lengthscale: theta[0],
        log_signal_var: theta[1],
        log_noise_var: theta[2],
    };
    finalize_gp(kernel, hypers, x.to_owned(), &y_centered, y_mean, &r2)
}

impl GpModel {
    /// Posterior mean and predictive standard deviation (latent variance
    /// plus likelihood noise) at the given rows.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<(Array1<f64>, Array1<f64>)> {
        if x.ncols() != self.x_train.ncols() {
            return Err(Error::Shape {
                expected: self.x_train.ncols(),
                got: x.ncols(),
            });
        }
        let r2 = pairwise_sq_dists(x, self.x_train.view());
        let k_star = kernel_matrix(
            self.kernel,
            &r2,
            self.hypers.lengthscale(),
            self.hypers.signal_var(),
        );
        let s = self.hypers.signal_var();
        let noise = self.hypers.noise_var();
        let m = x.nrows();
        let mut mean = Array1::zeros(m);
        let mut std = Array1::zeros(m);
        for i in 0..m {
            let k_i = k_star.row(i).to_owned();
            mean[i] = self.y_mean + k_i.dot(&self.alpha);
            let v = solve_lower(&self.chol, &k_i);
            let latent = (s - v.dot(&v)).max(0.0);
            std[i] = (latent + noise).sqrt();
        }
        Ok((mean, std))
    }

    pub fn jitter_used(&self) -> f64 {
        self.jitter
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr1, arr2};
    use rand::Rng;

    #[test]
    fn cholesky_reconstructs_spd_matrix() {
        let mut rng = crate::seeds::stream("test-chol", "", &[1]);
        let n = 8;
        let b = Array2::from_shape_fn((n, n), |_| rng.random_range(-1.0..1.0));
        let mut a = b.t().dot(&b);
        for i in 0..n {
            a[[i, i]] += 1.0;
        }
        let l = cholesky(&a).unwrap();
        let rebuilt = l.dot(&l.t());
        for (p, q) in a.iter().zip(rebuilt.iter()) {
            assert!((p - q).abs() < 1e-9);
        }
        let x = Array1::from_shape_fn(n, |_| rng.random_range(-1.0..1.0));
        let b_vec = a.dot(&x);
        let solved = chol_solve(&l, &b_vec);
        for (p, q) in x.iter().zip(solved.iter()) {
            assert!((p - q).abs() < 1e-8);
        }
        let inv = chol_inverse(&l);
        let ident = a.dot(&inv);
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((ident[[i, j]] - want).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn two_point_posterior_matches_direct_inverse() {
        // Zero-mean RBF GP, lengthscale 1, signal variance 1, noise
        // variance 0.1; oracle is the explicit 2x2 matrix inverse.
        let x = arr2(&[[0.0], [1.0]]);
        let y = [1.0, 2.0];
        let model = fit_gp_fixed(x.view(), &y, KernelType::Rbf, 1.0, 1.0, 0.1, false).unwrap();
        let k01 = (-0.5f64).exp();
        let (a, b, c, d) = (1.1, k01, k01, 1.1);
        let det = a * d - b * c;
        let inv = [[d / det, -b / det], [-c / det, a / det]];
        for &t in &[-1.0, -0.3, 0.25, 0.5, 0.77, 1.5, 2.0] {
            let k0 = (-(t - 0.0f64).powi(2) / 2.0).exp();
            let k1 = (-(t - 1.0f64).powi(2) / 2.0).exp();
            let w0 = k0 * inv[0][0] + k1 * inv[1][0];
            let w1 = k0 * inv[0][1] + k1 * inv[1][1];
            let want_mean = w0 * y[0] + w1 * y[1];
            let want_var = 1.0 - (w0 * k0 + w1 * k1) + 0.1;
            let test = arr2(&[[t]]);
            let (mean, std) = model.predict(test.view()).unwrap();
            assert!((mean[0] - want_mean).abs() < 1e-9, "mean at {t}");
            assert!((std[0] - want_var.sqrt()).abs() < 1e-9, "std at {t}");
        }
    }

    #[test]
    fn near_noiseless_gp_interpolates_training_labels() {
        let x = arr2(&[[0.0], [1.3], [2.9], [4.0]]);
        let y = [0.2, 0.9, 0.1, 0.5];
        let model = fit_gp_fixed(x.view(), &y, KernelType::Rbf, 1.0, 1.0, 1e-10, false).unwrap();
        let (mean, _) = model.predict(x.view()).unwrap();
        for (m, t) in mean.iter().zip(y.iter()) {
            assert!((m - t).abs() < 1e-6);
        }
    }

    #[test]
    fn trained_gp_fits_collinear_points() {
        let x = arr2(&[[0.0], [1.0], [2.0]]);
        let y = [0.0, 1.0, 2.0];
        let model = train_gp(x.view(), &y, KernelType::Rbf, 1e-2, 100).unwrap();
        let (mean, _) = model.predict(x.view()).unwrap();
        let noise_std = model.hypers.noise_var().sqrt();
        for (m, t) in mean.iter().zip(y.iter()) {
            assert!(
                (m - t).abs() <= 3.0 * noise_std,
                "mean {m} vs label {t}, noise std {noise_std}"
            );
        }
    }

    #[test]
    fn marginal_likelihood_gradients_match_finite_differences() {
        let mut rng = crate::seeds::stream("test-gp-grad", "", &[2]);
        let x = Array2::from_shape_fn((6, 2), |_| rng.random_range(-1.0..1.0));
        let y = Array1::from_shape_fn(6, |_| rng.random_range(-1.0..1.0));
        let r2 = pairwise_sq_dists(x.view(), x.view());
        for &kernel in &[KernelType::Rbf, KernelType::Matern52] {
            let h = GpHypers {
                log_lengthscale: 0.3,
                log_signal_var: -0.2,
                log_noise_var: -2.0,
            };
            let eval = eval_marginal_likelihood(kernel, &r2, &y, &h, false).unwrap();
            let fields = [0usize, 1, 2];
            for (axis, grad) in fields.iter().zip(eval.grad.iter()) {
                let bump = |delta: f64| {
                    let mut hh = h;
                    match axis {
                        0 => hh.log_lengthscale += delta,
                        1 => hh.log_signal_var += delta,
                        _ => hh.log_noise_var += delta,
                    }
                    eval_marginal_likelihood(kernel, &r2, &y, &hh, false)
                        .unwrap()
                        .lml
                };
                let e = 1e-5;
                let numeric = (bump(e) - bump(-e)) / (2.0 * e);
                assert!(
                    (numeric - grad).abs() < 1e-4 * (1.0 + grad.abs()),
                    "{kernel:?} axis {axis}: numeric {numeric} vs analytic {grad}"
                );
            }
        }
    }

    #[test]
    fn posterior_variance_never_exceeds_prior_at_training_inputs() {
        let mut rng = crate::seeds::stream("test-gp-var", "", &[3]);
        let x = Array2::from_shape_fn((12, 3), |_| rng.random_range(-1.0..1.0));
        let y: Vec<f64> = (0..12).map(|_| rng.random_range(0.0..1.0)).collect();
        let model = train_gp(x.view(), &y, KernelType::Matern52, 1e-2, 50).unwrap();
        let (_, std) = model.predict(x.view()).unwrap();
        let prior = (model.hypers.signal_var() + model.hypers.noise_var()).sqrt();
        for s in std.iter() {
            assert!(*s <= prior + 1e-9);
        }
    }

    #[test]
    fn duplicate_rows_with_zero_noise_use_the_jitter_ladder() {
        let x = arr2(&[[1.0, 2.0], [1.0, 2.0], [3.0, 0.0]]);
        let y = [0.5, 0.5, 0.9];
        let model = fit_gp_fixed(x.view(), &y, KernelType::Rbf, 1.0, 1.0, 0.0, false).unwrap();
        assert!(model.jitter_used() > 0.0);
        let (mean, std) = model.predict(x.view()).unwrap();
        for (m, s) in mean.iter().zip(std.iter()) {
            assert!(m.is_finite() && s.is_finite());
        }
    }

    #[test]
    fn matern_kernel_values_by_hand() {
        let r2 = arr2(&[[0.0, 1.0]]);
        let k = kernel_matrix(KernelType::Matern52, &r2, 1.0, 2.0);
        assert_eq!(k[[0, 0]], 2.0);
        let a = 5.0f64.sqrt();
        let want = 2.0 * (1.0 + a + a * a / 3.0) * (-a).exp();
        assert!((k[[0, 1]] - want).abs() < 1e-12);
        assert!(k[[0, 1]] < k[[0, 0]]);
    }

    #[test]
    fn kernel_dr2_matches_finite_differences() {
        for &kernel in &[KernelType::Rbf, KernelType::Matern52] {
            for &r2v in &[0.3, 1.0, 2.7] {
                let h = 1e-6;
                let up = kernel_matrix(kernel, &arr2(&[[r2v + h]]), 0.8, 1.3)[[0, 0]];
                let down = kernel_matrix(kernel, &arr2(&[[r2v - h]]), 0.8, 1.3)[[0, 0]];
                let numeric = (up - down) / (2.0 * h);
                let analytic = kernel_d_dr2(kernel, &arr2(&[[r2v]]), 0.8, 1.3)[[0, 0]];
                assert!(
                    (numeric - analytic).abs() < 1e-5,
                    "{kernel:?} at r2={r2v}: {numeric} vs {analytic}"
                );
            }
        }
    }

    #[test]
    fn median_heuristic_handles_degenerate_pools() {
        let r2 = arr2(&[[0.0, 0.0], [0.0, 0.0]]);
        assert_eq!(median_heuristic(&r2), 1.0);
        let r2 = pairwise_sq_dists(
            arr1(&[0.0, 1.0, 3.0]).insert_axis(ndarray::Axis(1)).view(),
            arr1(&[0.0, 1.0, 3.0]).insert_axis(ndarray::Axis(1)).view(),
        );
        let m = median_heuristic(&r2);
        assert!((1.0..=3.0).contains(&m));
    }
}
