//! Deep kernel GP: an MLP maps inputs to a learned feature space and an
//! exact GP with an RBF or Matérn kernel acts on the features. Network
//! weights and kernel hyperparameters are trained jointly by maximizing
//! the marginal likelihood with the schedule-free optimizer.

use ndarray::{Array1, Array2, ArrayView2};

use super::gp::{
    eval_marginal_likelihood, finalize_gp, initial_hypers, kernel_d_dr2, pairwise_sq_dists,
    GpHypers, GpModel,
};
use super::mlp::{mlp_backward, mlp_forward, MlpParams};
use super::optimizer::ScheduleFreeAdam;
use super::KernelType;
use crate::error::{Error, Result};
use crate::seeds;

#[derive(Debug, Clone)]
pub struct DeepKernelGpModel {
    pub(crate) feature_net: MlpParams,
    pub(crate) gp: GpModel,
}

fn feature_dims(input_dim: usize, hidden: usize) -> Vec<usize> {
    vec![input_dim, hidden, hidden, hidden]
}

/// Loss (negative log marginal likelihood) and gradient over the joint
/// flat parameter vector [mlp weights | log lengthscale, log signal, log
/// noise].
fn joint_eval(
    dims: &[usize],
    kernel: KernelType,
    x: ArrayView2<'_, f64>,
    y_centered: &Array1<f64>,
    theta: &Array1<f64>,
) -> Result<(f64, Array1<f64>)> {
    let n_mlp = MlpParams::n_params(dims);
    let mlp = MlpParams::from_flat(dims, &theta.slice(ndarray::s![..n_mlp]).to_owned());
    let hypers = GpHypers {
        log_lengthscale: theta[n_mlp],
        log_signal_var: theta[n_mlp + 1],
        log_noise_var: theta[n_mlp + 2],
    };
    let cache = mlp_forward(&mlp, x, None);
    let features = &cache.output;
    let r2 = pairwise_sq_dists(features.view(), features.view());
    let eval = eval_marginal_likelihood(kernel, &r2, y_centered, &hypers, true)?;
    let c = eval.dk.expect("dk requested");
    let kd = kernel_d_dr2(kernel, &r2, hypers.lengthscale(), hypers.signal_var());
    // d lml / d phi_p = 4 sum_j (C o K')_pj (phi_p - phi_j).
    let m = &c * &kd;
    let row_sums = m.sum_axis(ndarray::Axis(1));
    let mphi = m.dot(features);
    let n = features.nrows();
    let f_dim = features.ncols();
    let mut dloss_dphi = Array2::zeros((n, f_dim));
    for p in 0..n {
        for d in 0..f_dim {
            let g_lml = 4.0 * (row_sums[p] * features[[p, d]] - mphi[[p, d]]);
            dloss_dphi[[p, d]] = -g_lml;
        }
    }
    let mlp_grads = mlp_backward(&mlp, &cache, &dloss_dphi, None).to_flat();
    let mut grad = Array1::zeros(theta.len());
    grad.slice_mut(ndarray::s![..n_mlp]).assign(&mlp_grads);
    grad[n_mlp] = -eval.grad[0];
    grad[n_mlp + 1] = -eval.grad[1];
    grad[n_mlp + 2] = -eval.grad[2];
    Ok((-eval.lml, grad))
}

pub fn train_deep_kernel_gp(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    kernel: KernelType,
    hidden: usize,
    learning_rate: f64,
    n_iters: usize,
    rng_seed: u64,
) -> Result<DeepKernelGpModel> {
    if x.nrows() != y.len() || y.len() < 2 {
        return Err(Error::Size(format!(
            "deep kernel gp needs >=2 rows with matching labels, got {} x {}",
            x.nrows(),
            y.len()
        )));
    }
    let dims = feature_dims(x.ncols(), hidden);
    let n_mlp = MlpParams::n_params(&dims);
    let mut init_rng = seeds::stream("dkgp-init", "", &[rng_seed]);
    let mlp0 = MlpParams::init(&dims, &mut init_rng);

    let y_mean = y.iter().sum::<f64>() / y.len() as f64;
    let y_centered = Array1::from_iter(y.iter().map(|v| v - y_mean));

    let features0 = mlp_forward(&mlp0, x, None).output;
    let r2_0 = pairwise_sq_dists(features0.view(), features0.view());
    let h0 = initial_hypers(&r2_0, &y_centered);

    let mut theta0 = Array1::zeros(n_mlp + 3);
    theta0
        .slice_mut(ndarray::s![..n_mlp])
        .assign(&mlp0.to_flat());
    theta0[n_mlp] = h0.log_lengthscale;
    theta0[n_mlp + 1] = h0.log_signal_var;
    theta0[n_mlp + 2] = h0.log_noise_var;
    let mut opt = ScheduleFreeAdam::new(theta0, learning_rate);

    for iter in 0..n_iters {
        let theta = opt.grad_point();
        let (loss, grad) = joint_eval(&dims, kernel, x, &y_centered, &theta).map_err(|e| {
            Error::TrainingDiverged {
                epoch: iter,
                msg: e.to_string(),
            }
        })?;
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged {
                epoch: iter,
                msg: "non-finite marginal likelihood".into(),
            });
        }
        opt.step(&grad)?;
    }

    let theta = opt.params();
    let feature_net = MlpParams::from_flat(&dims, &theta.slice(ndarray::s![..n_mlp]).to_owned());
    let hypers = GpHypers {
        log_lengthscale: theta[n_mlp],
        log_signal_var: theta[n_mlp + 1],
        log_noise_var: theta[n_mlp + 2],
    };
    let features = mlp_forward(&feature_net, x, None).output;
    let r2 = pairwise_sq_dists(features.view(), features.view());
    let gp = finalize_gp(kernel, hypers, features, &y_centered, y_mean, &r2)?;
    Ok(DeepKernelGpModel { feature_net, gp })
}

impl DeepKernelGpModel {
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<(Array1<f64>, Array1<f64>)> {
        if x.ncols() != self.feature_net.dims[0] {
            return Err(Error::Shape {
                expected: self.feature_net.dims[0],
                got: x.ncols(),
            });
        }
        let features = mlp_forward(&self.feature_net, x, None).output;
        self.gp.predict(features.view())
    }
}
