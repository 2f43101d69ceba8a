//! Feed-forward network machinery shared by the neural surrogates: a
//! two-hidden-layer MLP with manual backprop, mini-batch training on the
//! schedule-free optimizer, and the three uncertainty wrappers (MC dropout,
//! deep ensemble, mean-field variational weights).
//!
//! Prediction-time stochasticity (dropout masks, weight draws) is sampled
//! per forward pass and shared across candidate rows, so predictions are
//! equivariant under candidate reordering.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::optimizer::ScheduleFreeAdam;
use crate::error::{Error, Result};
use crate::seeds;

#[derive(Debug, Clone)]
pub(crate) struct MlpParams {
    pub dims: Vec<usize>,
    /// Per layer: weight (out x in) and bias (out).
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
}

impl MlpParams {
    /// Uniform fan-in initialization: W, b ~ U(-1/sqrt(in), 1/sqrt(in)).
    pub fn init(dims: &[usize], rng: &mut ChaCha8Rng) -> Self {
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for w in dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let weight =
                Array2::from_shape_fn((fan_out, fan_in), |_| rng.random_range(-bound..bound));
            let bias = Array1::from_shape_fn(fan_out, |_| rng.random_range(-bound..bound));
            layers.push((weight, bias));
        }
        Self {
            dims: dims.to_vec(),
            layers,
        }
    }

    pub fn n_params(dims: &[usize]) -> usize {
        dims.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
    }

    pub fn to_flat(&self) -> Array1<f64> {
        let mut flat = Vec::with_capacity(Self::n_params(&self.dims));
        for (w, b) in &self.layers {
            flat.extend(w.iter());
            flat.extend(b.iter());
        }
        Array1::from(flat)
    }

    pub fn from_flat(dims: &[usize], flat: &Array1<f64>) -> Self {
        let mut layers = Vec::with_capacity(dims.len() - 1);
        let mut at = 0;
        for w in dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let n_w = fan_out * fan_in;
            let weight = Array2::from_shape_vec(
                (fan_out, fan_in),
                flat.slice(ndarray::s![at..at + n_w]).to_vec(),
            )
            .expect("layer shape");
            at += n_w;
            let bias = flat.slice(ndarray::s![at..at + fan_out]).to_owned();
            at += fan_out;
            layers.push((weight, bias));
        }
        Self {
            dims: dims.to_vec(),
            layers,
        }
    }
}

pub(crate) struct ForwardCache {
    pub input: Array2<f64>,
    /// Pre-activations per layer.
    pub zs: Vec<Array2<f64>>,
    /// Post-activation (ReLU then mask) per hidden layer.
    pub acts: Vec<Array2<f64>>,
    pub output: Array2<f64>,
}

/// Forward pass; `masks` are multiplicative per-hidden-layer factors
/// (inverted-dropout scaled) with one row per sample or a single broadcast
/// row.
pub(crate) fn mlp_forward(
    p: &MlpParams,
    x: ArrayView2<'_, f64>,
    masks: Option<&[Array2<f64>]>,
) -> ForwardCache {
    let n_layers = p.layers.len();
    let mut zs = Vec::with_capacity(n_layers);
    let mut acts = Vec::with_capacity(n_layers - 1);
    let mut a = x.to_owned();
    for (l, (w, b)) in p.layers.iter().enumerate() {
        let mut z = a.dot(&w.t());
        z += b;
        if l + 1 < n_layers {
            let mut h = z.mapv(|v| v.max(0.0));
            if let Some(ms) = masks {
                apply_mask(&mut h, &ms[l]);
            }
            zs.push(z);
            a = h.clone();
            acts.push(h);
        } else {
            zs.push(z.clone());
            a = z;
        }
    }
    ForwardCache {
        input: x.to_owned(),
        zs,
        acts,
        output: a.clone(),
    }
}

fn apply_mask(h: &mut Array2<f64>, mask: &Array2<f64>) {
    if mask.nrows() == h.nrows() {
        *h *= mask;
    } else {
        for mut row in h.rows_mut() {
            row *= &mask.row(0);
        }
    }
}

/// Backprop from `dout` (gradient of the loss w.r.t. the network output);
/// returns parameter gradients with the same layout as the parameters.
pub(crate) fn mlp_backward(
    p: &MlpParams,
    cache: &ForwardCache,
    dout: &Array2<f64>,
    masks: Option<&[Array2<f64>]>,
) -> MlpParams {
    let n_layers = p.layers.len();
    let mut grads: Vec<(Array2<f64>, Array1<f64>)> = Vec::with_capacity(n_layers);
    let mut d = dout.clone();
    for l in (0..n_layers).rev() {
        let a_prev = if l == 0 {
            &cache.input
        } else {
            &cache.acts[l - 1]
        };
        let gw = d.t().dot(a_prev);
        let gb = d.sum_axis(Axis(0));
        grads.push((gw, gb));
        if l > 0 {
            let mut da = d.dot(&p.layers[l].0);
            if let Some(ms) = masks {
                apply_mask(&mut da, &ms[l - 1]);
            }
            let dz = &da * &cache.zs[l - 1].mapv(|z| if z > 0.0 { 1.0 } else { 0.0 });
            d = dz;
        }
    }
    grads.reverse();
    MlpParams {
        dims: p.dims.clone(),
        layers: grads,
    }
}

fn sample_dropout_masks(
    rng: &mut ChaCha8Rng,
    rows: usize,
    dims: &[usize],
    p: f64,
) -> Vec<Array2<f64>> {
    let scale = 1.0 / (1.0 - p);
    dims[1..dims.len() - 1]
        .iter()
        .map(|&h| {
            Array2::from_shape_fn(
                (rows, h),
                |_| {
                    if rng.random::<f64>() < p {
                        0.0
                    } else {
                        scale
                    }
                },
            )
        })
        .collect()
}

fn regressor_dims(input_dim: usize, hidden: usize) -> Vec<usize> {
    vec![input_dim, hidden, hidden, 1]
}

/// Mini-batch MSE training of the regressor MLP; runs exactly `epochs`
/// passes over shuffled batches. `dropout_p = 0` disables masking.
#[allow(clippy::too_many_arguments)]
pub(crate) fn train_mlp_regressor(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    hidden: usize,
    epochs: usize,
    batch_size: usize,
    lr: f64,
    dropout_p: f64,
    rng_seed: u64,
) -> Result<MlpParams> {
    let n = x.nrows();
    let dims = regressor_dims(x.ncols(), hidden);
    let mut init_rng = seeds::stream("mlp-init", "", &[rng_seed]);
    let params = MlpParams::init(&dims, &mut init_rng);
    let mut opt = ScheduleFreeAdam::new(params.to_flat(), lr);
    let mut shuffle_rng = seeds::stream("mlp-shuffle", "", &[rng_seed]);
    let mut mask_rng = seeds::stream("mlp-dropout", "", &[rng_seed]);
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(batch_size) {
            let xb = gather_rows(x, batch);
            let yb: Vec<f64> = batch.iter().map(|&i| y[i]).collect();
            let p_y = MlpParams::from_flat(&dims, &opt.grad_point());
            let masks = (dropout_p > 0.0)
                .then(|| sample_dropout_masks(&mut mask_rng, batch.len(), &dims, dropout_p));
            let cache = mlp_forward(&p_y, xb.view(), masks.as_deref());
            let b = batch.len() as f64;
            let mut dout = cache.output.clone();
            for (i, &target) in yb.iter().enumerate() {
                let r = cache.output[[i, 0]] - target;
                epoch_loss += r * r / b;
                dout[[i, 0]] = 2.0 * r / b;
            }
            let grads = mlp_backward(&p_y, &cache, &dout, masks.as_deref());
            opt.step(&grads.to_flat())?;
        }
        if !epoch_loss.is_finite() {
            return Err(Error::TrainingDiverged {
                epoch,
                msg: "non-finite batch loss".into(),
            });
        }
    }
    Ok(MlpParams::from_flat(&dims, opt.params()))
}

fn gather_rows(x: ArrayView2<'_, f64>, rows: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((rows.len(), x.ncols()));
    for (r, &i) in rows.iter().enumerate() {
        out.row_mut(r).assign(&x.row(i));
    }
    out
}

fn column_stats(outputs: &[Array1<f64>]) -> (Array1<f64>, Array1<f64>) {
    let n = outputs[0].len();
    let k = outputs.len() as f64;
    let mut mean = Array1::<f64>::zeros(n);
    for o in outputs {
        mean += o;
    }
    mean /= k;
    let mut var = Array1::<f64>::zeros(n);
    for o in outputs {
        let d = o - &mean;
        var += &d.mapv(|v| v * v);
    }
    var /= k;
    (mean, var.mapv(|v| v.max(0.0).sqrt()))
}

#[derive(Debug, Clone)]
pub struct DropoutNnModel {
    pub(crate) params: MlpParams,
    pub(crate) dropout_p: f64,
    pub(crate) mc_samples: usize,
    pub(crate) seed: u64,
}

impl DropoutNnModel {
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<(Array1<f64>, Array1<f64>)> {
        check_input_dim(&self.params, x)?;
        let dims = &self.params.dims;
        let mut outputs = Vec::with_capacity(self.mc_samples);
        for pass in 0..self.mc_samples {
            // One unit-level mask per pass, shared across rows.
            let mut rng = seeds::stream("dropout-predict", "", &[self.seed, pass as u64]);
            let masks = sample_dropout_masks(&mut rng, 1, dims, self.dropout_p);
            let cache = mlp_forward(&self.params, x, Some(&masks));
            outputs.push(cache.output.column(0).to_owned());
        }
        Ok(column_stats(&outputs))
    }
}

#[derive(Debug, Clone)]
pub struct EnsembleModel {
    pub(crate) members: Vec<MlpParams>,
}

impl EnsembleModel {
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<(Array1<f64>, Array1<f64>)> {
        check_input_dim(&self.members[0], x)?;
        let outputs: Vec<Array1<f64>> = self
            .members
            .iter()
            .map(|m| mlp_forward(m, x, None).output.column(0).to_owned())
            .collect();
        Ok(column_stats(&outputs))
    }
}

#[derive(Debug, Clone)]
pub struct BnnModel {
    pub(crate) dims: Vec<usize>,
    pub(crate) mu: Array1<f64>,
    pub(crate) rho: Array1<f64>,
    pub(crate) mc_samples: usize,
    pub(crate) seed: u64,
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl BnnModel {
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<(Array1<f64>, Array1<f64>)> {
        if x.ncols() != self.dims[0] {
            return Err(Error::Shape {
                expected: self.dims[0],
                got: x.ncols(),
            });
        }
        let sigma = self.rho.mapv(softplus);
        let mut outputs = Vec::with_capacity(self.mc_samples);
        for pass in 0..self.mc_samples {
            // One weight draw per pass, shared across rows.
            let mut rng = seeds::stream("bnn-predict", "", &[self.seed, pass as u64]);
            let eps =
                Array1::from_shape_fn(self.mu.len(), |_| rng.sample::<f64, _>(StandardNormal));
            let w = &self.mu + &(&sigma * &eps);
            let params = MlpParams::from_flat(&self.dims, &w);
            outputs.push(mlp_forward(&params, x, None).output.column(0).to_owned());
        }
        Ok(column_stats(&outputs))
    }
}

/// Mean-field variational training: one reparameterized weight draw per
/// batch, MSE data term plus the closed-form Gaussian KL against a
/// standard-normal prior scaled by kl_weight / n_train.
#[allow(clippy::too_many_arguments)]
pub(crate) fn train_bnn(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    hidden: usize,
    epochs: usize,
    batch_size: usize,
    lr: f64,
    kl_weight: f64,
    mc_samples: usize,
    rng_seed: u64,
) -> Result<BnnModel> {
    let n = x.nrows();
    let dims = regressor_dims(x.ncols(), hidden);
    let n_params = MlpParams::n_params(&dims);
    let mut init_rng = seeds::stream("bnn-init", "", &[rng_seed]);
    let mu0 = MlpParams::init(&dims, &mut init_rng).to_flat();
    // softplus(-4.6) ~ 0.01: weights start nearly deterministic.
    let rho0 = Array1::from_elem(n_params, -4.6);
    let mut theta0 = Array1::zeros(2 * n_params);
    theta0.slice_mut(ndarray::s![..n_params]).assign(&mu0);
    theta0.slice_mut(ndarray::s![n_params..]).assign(&rho0);
    let mut opt = ScheduleFreeAdam::new(theta0, lr);

    let mut shuffle_rng = seeds::stream("bnn-shuffle", "", &[rng_seed]);
    let mut eps_rng = seeds::stream("bnn-train-eps", "", &[rng_seed]);
    let kl_scale = kl_weight / n as f64;
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(batch_size) {
            let xb = gather_rows(x, batch);
            let yb: Vec<f64> = batch.iter().map(|&i| y[i]).collect();
            let theta = opt.grad_point();
            let mu = theta.slice(ndarray::s![..n_params]).to_owned();
            let rho = theta.slice(ndarray::s![n_params..]).to_owned();
            let sigma = rho.mapv(softplus);
            let eps = Array1::from_shape_fn(n_params, |_| eps_rng.sample::<f64, _>(StandardNormal));
            let w = &mu + &(&sigma * &eps);
            let params = MlpParams::from_flat(&dims, &w);
            let cache = mlp_forward(&params, xb.view(), None);
            let b = batch.len() as f64;
            let mut dout = cache.output.clone();
            for (i, &target) in yb.iter().enumerate() {
                let r = cache.output[[i, 0]] - target;
                epoch_loss += r * r / b;
                dout[[i, 0]] = 2.0 * r / b;
            }
            let grad_w = mlp_backward(&params, &cache, &dout, None).to_flat();
            let mut grad = Array1::zeros(2 * n_params);
            for i in 0..n_params {
                let gate = sigmoid(rho[i]);
                let kl_mu = kl_scale * mu[i];
                let kl_rho = kl_scale * (sigma[i] - 1.0 / sigma[i]) * gate;
                grad[i] = grad_w[i] + kl_mu;
                grad[n_params + i] = grad_w[i] * eps[i] * gate + kl_rho;
            }
            let kl: f64 = (0..n_params)
                .map(|i| {
                    0.5 * (mu[i] * mu[i] + sigma[i] * sigma[i] - 1.0 - (sigma[i] * sigma[i]).ln())
                })
                .sum();
            epoch_loss += kl_scale * kl;
            opt.step(&grad)?;
        }
        if !epoch_loss.is_finite() {
            return Err(Error::TrainingDiverged {
                epoch,
                msg: "non-finite batch loss".into(),
            });
        }
    }
    let theta = opt.params();
    Ok(BnnModel {
        dims,
        mu: theta.slice(ndarray::s![..n_params]).to_owned(),
        rho: theta.slice(ndarray::s![n_params..]).to_owned(),
        mc_samples,
        seed: rng_seed,
    })
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn train_dropout_nn(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    hidden: usize,
    epochs: usize,
    batch_size: usize,
    lr: f64,
    dropout_p: f64,
    mc_samples: usize,
    rng_seed: u64,
) -> Result<DropoutNnModel> {
    let params = train_mlp_regressor(x, y, hidden, epochs, batch_size, lr, dropout_p, rng_seed)?;
    Ok(DropoutNnModel {
        params,
        dropout_p,
        mc_samples,
        seed: rng_seed,
    })
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn train_ensemble(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    hidden: usize,
    n_members: usize,
    epochs: usize,
    batch_size: usize,
    lr: f64,
    rng_seed: u64,
) -> Result<EnsembleModel> {
    let members: Result<Vec<MlpParams>> = (0..n_members)
        .map(|m| {
            let seed = seeds::sub_seed("ensemble-member", "", &[rng_seed, m as u64]);
            train_mlp_regressor(x, y, hidden, epochs, batch_size, lr, 0.0, seed)
        })
        .collect();
    Ok(EnsembleModel { members: members? })
}

fn check_input_dim(p: &MlpParams, x: ArrayView2<'_, f64>) -> Result<()> {
    if x.ncols() != p.dims[0] {
        return Err(Error::Shape {
            expected: p.dims[0],
            got: x.ncols(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    fn toy_regression(n: usize, seed: u64) -> (Array2<f64>, Vec<f64>) {
        let mut rng = seeds::stream("mlp-test-data", "", &[seed]);
        let x = Array2::from_shape_fn((n, 2), |_| rng.random_range(-1.0..1.0));
        let y: Vec<f64> = x
            .rows()
            .into_iter()
            .map(|r| 0.5 * r[0] - 0.2 * r[1] + 0.1)
            .collect();
        (x, y)
    }

    #[test]
    fn backprop_matches_finite_differences() {
        let dims = [3, 5, 5, 1];
        let mut rng = seeds::stream("mlp-test-grad", "", &[1]);
        let params = MlpParams::init(&dims, &mut rng);
        let x = Array2::from_shape_fn((4, 3), |_| rng.random_range(-1.0..1.0));
        let y: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();

        let loss = |p: &MlpParams| -> f64 {
            let out = mlp_forward(p, x.view(), None).output;
            out.column(0)
                .iter()
                .zip(y.iter())
                .map(|(o, t)| (o - t) * (o - t))
                .sum::<f64>()
                / 4.0
        };

        let cache = mlp_forward(&params, x.view(), None);
        let mut dout = cache.output.clone();
        for i in 0..4 {
            dout[[i, 0]] = 2.0 * (cache.output[[i, 0]] - y[i]) / 4.0;
        }
        let analytic = mlp_backward(&params, &cache, &dout, None).to_flat();

        let flat = params.to_flat();
        let h = 1e-6;
        for i in 0..flat.len() {
            let mut up = flat.clone();
            up[i] += h;
            let mut down = flat.clone();
            down[i] -= h;
            let numeric = (loss(&MlpParams::from_flat(&dims, &up))
                - loss(&MlpParams::from_flat(&dims, &down)))
                / (2.0 * h);
            assert!(
                (numeric - analytic[i]).abs() < 1e-5 * (1.0 + analytic[i].abs()),
                "param {i}: numeric {numeric} vs analytic {}",
                analytic[i]
            );
        }
    }

    #[test]
    fn flat_roundtrip_preserves_parameters() {
        let dims = [4, 6, 6, 1];
        let mut rng = seeds::stream("mlp-test-flat", "", &[2]);
        let p = MlpParams::init(&dims, &mut rng);
        let q = MlpParams::from_flat(&dims, &p.to_flat());
        for ((w1, b1), (w2, b2)) in p.layers.iter().zip(q.layers.iter()) {
            assert_eq!(w1, w2);
            assert_eq!(b1, b2);
        }
    }

    #[test]
    fn regressor_fits_a_linear_map() {
        let (x, y) = toy_regression(64, 3);
        let p = train_mlp_regressor(x.view(), &y, 16, 150, 16, 1e-2, 0.0, 7).unwrap();
        let out = mlp_forward(&p, x.view(), None).output;
        let rmse = (out
            .column(0)
            .iter()
            .zip(y.iter())
            .map(|(o, t)| (o - t) * (o - t))
            .sum::<f64>()
            / y.len() as f64)
            .sqrt();
        assert!(rmse < 0.05, "rmse {rmse}");
    }

    #[test]
    fn training_is_deterministic_per_seed() {
        let (x, y) = toy_regression(32, 4);
        let a = train_mlp_regressor(x.view(), &y, 8, 30, 8, 1e-2, 0.1, 11).unwrap();
        let b = train_mlp_regressor(x.view(), &y, 8, 30, 8, 1e-2, 0.1, 11).unwrap();
        for (p, q) in a.to_flat().iter().zip(b.to_flat().iter()) {
            assert!((p - q).abs() < 1e-12);
        }
        let c = train_mlp_regressor(x.view(), &y, 8, 30, 8, 1e-2, 0.1, 12).unwrap();
        assert!(a
            .to_flat()
            .iter()
            .zip(c.to_flat().iter())
            .any(|(p, q)| p != q));
    }

    #[test]
    fn ensemble_members_are_distinct_and_collapse_gives_zero_spread() {
        let (x, y) = toy_regression(24, 5);
        let model = train_ensemble(x.view(), &y, 8, 5, 20, 8, 1e-2, 21).unwrap();
        assert_eq!(model.members.len(), 5);
        for i in 0..5 {
            for j in (i + 1)..5 {
                let a = model.members[i].to_flat();
                let b = model.members[j].to_flat();
                assert!(a.iter().zip(b.iter()).any(|(p, q)| p != q));
            }
        }
        let collapsed = EnsembleModel {
            members: vec![model.members[0].clone(); 5],
        };
        // Identical members agree up to summation rounding in the mean.
        let (_, std) = collapsed.predict(x.view()).unwrap();
        for s in std.iter() {
            assert!(*s < 1e-12, "spread {s}");
        }
    }

    #[test]
    fn dropout_predict_spread_vanishes_without_dropout() {
        let (x, y) = toy_regression(24, 6);
        let zero_p = train_dropout_nn(x.view(), &y, 8, 20, 8, 1e-2, 0.0, 30, 31).unwrap();
        let (_, std) = zero_p.predict(x.view()).unwrap();
        for s in std.iter() {
            assert!(*s < 1e-12, "spread {s}");
        }
        let with_p = train_dropout_nn(x.view(), &y, 8, 20, 8, 1e-2, 0.1, 30, 31).unwrap();
        let (_, std) = with_p.predict(x.view()).unwrap();
        assert!(std.iter().any(|s| *s > 0.0));
    }

    #[test]
    fn prediction_is_equivariant_under_row_permutation() {
        let (x, y) = toy_regression(10, 7);
        let model = train_dropout_nn(x.view(), &y, 8, 20, 8, 1e-2, 0.1, 30, 41).unwrap();
        let (mean, std) = model.predict(x.view()).unwrap();
        let perm: Vec<usize> = (0..10).rev().collect();
        let xp = gather_rows(x.view(), &perm);
        let (mean_p, std_p) = model.predict(xp.view()).unwrap();
        for (i, &src) in perm.iter().enumerate() {
            assert_eq!(mean_p[i].to_bits(), mean[src].to_bits());
            assert_eq!(std_p[i].to_bits(), std[src].to_bits());
        }
    }

    #[test]
    fn bnn_trains_and_tiny_rho_collapses_spread() {
        let (x, y) = toy_regression(32, 8);
        let model = train_bnn(x.view(), &y, 8, 60, 8, 1e-2, 1.0, 30, 51).unwrap();
        let (mean, std) = model.predict(x.view()).unwrap();
        for (m, s) in mean.iter().zip(std.iter()) {
            assert!(m.is_finite() && s.is_finite() && *s >= 0.0);
        }
        let rmse = (mean
            .iter()
            .zip(y.iter())
            .map(|(o, t)| (o - t) * (o - t))
            .sum::<f64>()
            / y.len() as f64)
            .sqrt();
        assert!(rmse < 0.3, "rmse {rmse}");

        let mut collapsed = model.clone();
        collapsed.rho.fill(-40.0);
        let (_, std) = collapsed.predict(x.view()).unwrap();
        for s in std.iter() {
            assert!(*s < 1e-12);
        }
    }

    #[test]
    fn softplus_and_sigmoid_are_stable() {
        assert!((softplus(0.0) - (2.0f64).ln()).abs() < 1e-12);
        assert!(softplus(-40.0) > 0.0 && softplus(-40.0) < 1e-15);
        assert!((softplus(40.0) - 40.0).abs() < 1e-12);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-12);
        assert!(sigmoid(-40.0) >= 0.0 && sigmoid(40.0) <= 1.0);
    }

    #[test]
    fn mask_broadcast_matches_per_row_masks() {
        let dims = [2, 4, 4, 1];
        let mut rng = seeds::stream("mlp-test-mask", "", &[9]);
        let p = MlpParams::init(&dims, &mut rng);
        let x = arr2(&[[0.5, -0.2], [0.1, 0.9], [-0.4, 0.3]]);
        let unit = vec![
            Array2::from_shape_fn(
                (1, 4),
                |_| if rng.random::<f64>() < 0.5 { 0.0 } else { 2.0 },
            ),
            Array2::from_shape_fn(
                (1, 4),
                |_| if rng.random::<f64>() < 0.5 { 0.0 } else { 2.0 },
            ),
        ];
        let expanded: Vec<Array2<f64>> = unit
            .iter()
            .map(|m| {
                let mut full = Array2::zeros((3, 4));
                for mut row in full.rows_mut() {
                    row.assign(&m.row(0));
                }
                full
            })
            .collect();
        let a = mlp_forward(&p, x.view(), Some(&unit)).output;
        let b = mlp_forward(&p, x.view(), Some(&expanded)).output;
        assert_eq!(a, b);
    }
}
