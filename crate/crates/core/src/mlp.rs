//! Small fully connected networks: tanh hidden layers, linear output, analytic
//! backpropagation, input Jacobians and an Adam optimizer.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::TrainConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs × inputs`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for (row, b) in self.weights.chunks_exact(self.inputs).zip(&self.bias) {
            out.push(b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>());
        }
    }
}

/// Multilayer perceptron with `tanh` on every layer but the last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

impl Mlp {
    /// Glorot-uniform weights, zero biases. `sizes` lists every layer width
    /// including input and output.
    pub fn new<R: Rng>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::invalid(format!("invalid layer sizes {sizes:?}")));
        }
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (i, o) = (w[0], w[1]);
                let a = (6.0 / (i + o) as f64).sqrt();
                Layer {
                    inputs: i,
                    outputs: o,
                    weights: (0..i * o).map(|_| rng.random_range(-a..a)).collect(),
                    bias: vec![0.0; o],
                }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::invalid("network has no layers"));
        }
        for (k, l) in self.layers.iter().enumerate() {
            if l.inputs == 0 || l.outputs == 0 || l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(Error::invalid(format!("layer {k} has inconsistent shapes")));
            }
            if k > 0 && self.layers[k - 1].outputs != l.inputs {
                return Err(Error::invalid(format!("layer {k} input width does not match layer {}", k - 1)));
            }
            if l.weights.iter().chain(&l.bias).any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("layer {k} has non-finite parameters")));
            }
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").outputs
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Activations of every layer, input first.
    fn trace(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (k, l) in self.layers.iter().enumerate() {
            let mut z = Vec::with_capacity(l.outputs);
            l.apply(&acts[k], &mut z);
            if k < last {
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(z);
        }
        acts
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.trace(x).pop().expect("output layer")
    }

    /// Back-propagates `grad_out` through a recorded trace, adding parameter
    /// gradients to `grads` (flattened per layer as weights then bias) when
    /// given, and returning the gradient with respect to the input.
    fn backward(&self, acts: &[Vec<f64>], grad_out: &[f64], mut grads: Option<&mut [f64]>) -> Vec<f64> {
        let mut delta = grad_out.to_vec();
        let mut offset = self.param_count();
        for (k, l) in self.layers.iter().enumerate().rev() {
            offset -= l.param_count();
            let input = &acts[k];
            if let Some(g) = grads.as_deref_mut() {
                let (gw, gb) = g[offset..offset + l.param_count()].split_at_mut(l.weights.len());
                for (o, d) in delta.iter().enumerate() {
                    gb[o] += d;
                    for (gwi, x) in gw[o * l.inputs..(o + 1) * l.inputs].iter_mut().zip(input) {
                        *gwi += d * x;
                    }
                }
            }
            let mut back = vec![0.0; l.inputs];
            for (row, d) in l.weights.chunks_exact(l.inputs).zip(&delta) {
                for (b, w) in back.iter_mut().zip(row) {
                    *b += w * d;
                }
            }
            if k > 0 {
                // Input of layer k is tanh output a; tanh' = 1 - a².
                for (b, a) in back.iter_mut().zip(input) {
                    *b *= 1.0 - a * a;
                }
            }
            delta = back;
        }
        delta
    }

    /// `Jᵀ g` at `x`: gradient of `g · f(x)` with respect to `x`.
    pub fn vjp(&self, x: &[f64], grad_out: &[f64]) -> Vec<f64> {
        let acts = self.trace(x);
        self.backward(&acts, grad_out, None)
    }

    /// Output and `J = ∂f/∂x` (row-major `outputs × inputs`).
    pub fn jacobian(&self, x: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let acts = self.trace(x);
        let out = acts.last().expect("output").clone();
        let jac = (0..self.output_dim())
            .map(|o| {
                let mut e = vec![0.0; self.output_dim()];
                e[o] = 1.0;
                self.backward(&acts, &e, None)
            })
            .collect();
        (out, jac)
    }

    /// Half mean squared error over a batch and its parameter gradient.
    pub fn loss_and_grad(&self, xs: &[&[f64]], ys: &[&[f64]], grads: &mut [f64]) -> f64 {
        grads.iter_mut().for_each(|g| *g = 0.0);
        let n = xs.len() as f64;
        let mut loss = 0.0;
        for (x, y) in xs.iter().zip(ys) {
            let acts = self.trace(x);
            let out = acts.last().expect("output");
            let err: Vec<f64> = out.iter().zip(*y).map(|(o, t)| (o - t) / n).collect();
            loss += out.iter().zip(*y).map(|(o, t)| (o - t) * (o - t)).sum::<f64>() / (2.0 * n);
            self.backward(&acts, &err, Some(grads));
        }
        loss
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// Update step for `params -= lr · m̂ / (√v̂ + eps)`; returns the step.
    pub fn direction(&mut self, grads: &[f64], lr: f64) -> Vec<f64> {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        grads
            .iter()
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
            .map(|(g, (m, v))| {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                lr * (*m / c1) / ((*v / c2).sqrt() + self.eps)
            })
            .collect()
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        for (p, d) in params.iter_mut().zip(self.direction(grads, lr)) {
            *p -= d;
        }
    }
}

/// Per-component standardization `(x − μ) / σ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Population statistics; fails on a constant component.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or_else(|| Error::invalid("cannot standardize an empty set"))?;
        let n = rows.len() as f64;
        let dim = first.len();
        if let Some(k) = (0..dim).find(|&k| rows.iter().all(|r| r[k] == first[k])) {
            return Err(Error::invalid(format!("component {k} has zero variance")));
        }
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        let std: Vec<f64> = var.iter().map(|v| v.sqrt()).collect();
        if let Some(k) = std.iter().position(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::invalid(format!("component {k} has zero variance")));
        }
        Ok(Self { mean, std })
    }

    pub fn validate(&self) -> Result<()> {
        if self.mean.len() != self.std.len() {
            return Err(Error::invalid("standardizer mean and std differ in length"));
        }
        if self.std.iter().any(|s| !(s.is_finite() && *s > 0.0)) || self.mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::invalid("standardizer needs finite means and positive deviations"));
        }
        Ok(())
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| (v - m) / s).collect()
    }

    pub fn invert(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| m + s * v).collect()
    }
}

/// Network evaluated between an input and an output standardizer:
/// `y = μ_y + σ_y ⊙ net((x − μ_x) / σ_x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Regressor {
    pub net: Mlp,
    pub input: Standardizer,
    pub output: Standardizer,
}

impl Regressor {
    pub fn validate(&self) -> Result<()> {
        self.net.validate()?;
        self.input.validate()?;
        self.output.validate()?;
        if self.input.mean.len() != self.net.input_dim() || self.output.mean.len() != self.net.output_dim() {
            return Err(Error::invalid("normalization statistics do not match the network shape"));
        }
        Ok(())
    }

    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        self.output.invert(&self.net.forward(&self.input.apply(x)))
    }

    /// Prediction and `∂y/∂x` in physical units.
    pub fn jacobian(&self, x: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let (z, jn) = self.net.jacobian(&self.input.apply(x));
        let jac = jn
            .iter()
            .zip(&self.output.std)
            .map(|(row, so)| row.iter().zip(&self.input.std).map(|(j, si)| so * j / si).collect())
            .collect();
        (self.output.invert(&z), jac)
    }

    /// Gradient of `g · y(x)` with respect to `x`.
    pub fn vjp(&self, x: &[f64], g: &[f64]) -> Vec<f64> {
        let gz: Vec<f64> = g.iter().zip(&self.output.std).map(|(g, s)| g * s).collect();
        let gx = self.net.vjp(&self.input.apply(x), &gz);
        gx.iter().zip(&self.input.std).map(|(g, s)| g / s).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: usize,
    pub train_samples: usize,
    pub validation_samples: usize,
    /// Final half-MSE in standardized output units.
    pub train_loss: f64,
    pub validation_loss: Option<f64>,
    /// Per-output RMSE on the validation set, physical units.
    pub validation_rmse: Option<Vec<f64>>,
}

/// Fits a `tanh` network with `hidden` units in each of two hidden layers.
/// A seeded shuffle holds out `validation_fraction` of the samples; minibatch
/// Adam runs with a cosine-decayed step size.
pub fn train_regressor(inputs: &[Vec<f64>], targets: &[Vec<f64>], cfg: &TrainConfig, seed: u64) -> Result<(Regressor, TrainReport)> {
    cfg.validate()?;
    if inputs.len() != targets.len() {
        return Err(Error::invalid("inputs and targets differ in length"));
    }
    if inputs.len() < 50 {
        return Err(Error::invalid(format!("need at least 50 samples to train, got {}", inputs.len())));
    }
    let (di, dout) = (inputs[0].len(), targets[0].len());
    if inputs.iter().any(|x| x.len() != di) || targets.iter().any(|y| y.len() != dout) {
        return Err(Error::invalid("ragged training rows"));
    }
    if inputs.iter().chain(targets).flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("training data contains non-finite values"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    order.shuffle(&mut rng);
    let n_val = (inputs.len() as f64 * cfg.validation_fraction).floor() as usize;
    let (val_idx, train_idx) = order.split_at(n_val);
    let train_x: Vec<Vec<f64>> = train_idx.iter().map(|&i| inputs[i].clone()).collect();
    let train_y: Vec<Vec<f64>> = train_idx.iter().map(|&i| targets[i].clone()).collect();

    let input = Standardizer::fit(&train_x)?;
    let output = Standardizer::fit(&train_y)?;
    let xs: Vec<Vec<f64>> = train_x.iter().map(|x| input.apply(x)).collect();
    let ys: Vec<Vec<f64>> = train_y.iter().map(|y| output.apply(y)).collect();

    let mut net = Mlp::new(&[di, cfg.hidden, cfg.hidden, dout], &mut rng)?;
    let mut adam = Adam::new(net.param_count());
    let mut grads = vec![0.0; net.param_count()];
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    let mut train_loss = f64::NAN;
    for epoch in 0..cfg.epochs {
        idx.shuffle(&mut rng);
        let lr = cfg.learning_rate * 0.5 * (1.0 + (std::f64::consts::PI * epoch as f64 / cfg.epochs as f64).cos());
        let mut total = 0.0;
        for batch in idx.chunks(cfg.batch_size) {
            let bx: Vec<&[f64]> = batch.iter().map(|&i| xs[i].as_slice()).collect();
            let by: Vec<&[f64]> = batch.iter().map(|&i| ys[i].as_slice()).collect();
            total += net.loss_and_grad(&bx, &by, &mut grads) * batch.len() as f64;
            for (v, d) in net.params_mut().zip(adam.direction(&grads, lr)) {
                *v -= d;
            }
        }
        train_loss = total / xs.len() as f64;
        if !train_loss.is_finite() {
            return Err(Error::Numerical(format!("training diverged at epoch {epoch}")));
        }
    }

    let model = Regressor { net, input, output };
    let (validation_loss, validation_rmse) = if val_idx.is_empty() {
        (None, None)
    } else {
        let mut sq = vec![0.0; dout];
        let mut loss = 0.0;
        for &i in val_idx {
            let pred = model.predict(&inputs[i]);
            for (k, (p, t)) in pred.iter().zip(&targets[i]).enumerate() {
                sq[k] += (p - t) * (p - t);
                loss += ((p - t) / model.output.std[k]).powi(2);
            }
        }
        let n = val_idx.len() as f64;
        (Some(loss / (2.0 * n)), Some(sq.iter().map(|s| (s / n).sqrt()).collect()))
    };
    let report = TrainReport {
        epochs: cfg.epochs,
        train_samples: xs.len(),
        validation_samples: val_idx.len(),
        train_loss,
        validation_loss,
        validation_rmse,
    };
    Ok((model, report))
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, or the absolute difference when both are tiny.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn net(seed: u64, sizes: &[usize]) -> Mlp {
        Mlp::new(sizes, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    fn fd_jacobian(f: impl Fn(&[f64]) -> Vec<f64>, x: &[f64], h: f64) -> Vec<Vec<f64>> {
        let m = f(x).len();
        let mut jac = vec![vec![0.0; x.len()]; m];
        for j in 0..x.len() {
            let (mut xp, mut xm) = (x.to_vec(), x.to_vec());
            xp[j] += h;
            xm[j] -= h;
            let (fp, fm) = (f(&xp), f(&xm));
            for i in 0..m {
                jac[i][j] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        jac
    }

    #[test]
    fn parameter_gradients_match_finite_differences() {
        let mut n = net(1, &[3, 5, 4, 2]);
        let xs = [vec![0.3, -0.2, 0.9], vec![-1.0, 0.5, 0.1]];
        let ys = [vec![0.2, -0.4], vec![1.0, 0.0]];
        let bx: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let by: Vec<&[f64]> = ys.iter().map(Vec::as_slice).collect();
        let mut g = vec![0.0; n.param_count()];
        n.loss_and_grad(&bx, &by, &mut g);
        let mut scratch = vec![0.0; n.param_count()];
        let h = 1e-6;
        for k in 0..n.param_count() {
            let orig = *n.params_mut().nth(k).unwrap();
            *n.params_mut().nth(k).unwrap() = orig + h;
            let lp = n.loss_and_grad(&bx, &by, &mut scratch);
            *n.params_mut().nth(k).unwrap() = orig - h;
            let lm = n.loss_and_grad(&bx, &by, &mut scratch);
            *n.params_mut().nth(k).unwrap() = orig;
            let fd = (lp - lm) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-8 * (1.0 + g[k].abs()), "param {k}: {fd} vs {}", g[k]);
        }
    }

    proptest! {
        #[test]
        fn input_jacobian_matches_finite_differences(seed in 0u64..1000, x in prop::array::uniform3(-2.0f64..2.0)) {
            let n = net(seed, &[3, 16, 16, 3]);
            let (_, j) = n.jacobian(&x);
            let fd = fd_jacobian(|v| n.forward(v), &x, 1e-5);
            let a: Vec<f64> = j.concat();
            let b: Vec<f64> = fd.concat();
            prop_assert!(relative_error(&a, &b) < 1e-6);
        }

        #[test]
        fn vjp_is_transposed_jacobian(seed in 0u64..1000, x in prop::array::uniform3(-2.0f64..2.0), g in prop::array::uniform3(-1.0f64..1.0)) {
            let n = net(seed, &[3, 8, 8, 3]);
            let (_, j) = n.jacobian(&x);
            let v = n.vjp(&x, &g);
            for c in 0..3 {
                let expect: f64 = (0..3).map(|r| j[r][c] * g[r]).sum();
                prop_assert!((v[c] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn regressor_jacobian_is_in_physical_units() {
        let r = Regressor {
            net: net(3, &[3, 8, 8, 3]),
            input: Standardizer {
                mean: vec![25.0, 25.0, 25.0],
                std: vec![14.0, 15.0, 13.0],
            },
            output: Standardizer {
                mean: vec![0.0, 0.001, -0.002],
                std: vec![0.01, 0.02, 0.005],
            },
        };
        let x = [10.0, 30.0, 45.0];
        let (y, j) = r.jacobian(&x);
        assert_eq!(y, r.predict(&x));
        let fd = fd_jacobian(|v| r.predict(v), &x, 1e-4);
        assert!(relative_error(&j.concat(), &fd.concat()) < 1e-6);
    }

    #[test]
    fn standardizer_rejects_constant_component() {
        let rows = vec![vec![1.0, 2.0], vec![1.0, 3.0]];
        assert!(Standardizer::fit(&rows).is_err());
        let s = Standardizer::fit(&[vec![1.0, 2.0], vec![3.0, 6.0]]).unwrap();
        assert_eq!(s.mean, vec![2.0, 4.0]);
        assert_eq!(s.std, vec![1.0, 2.0]);
        assert_eq!(s.invert(&s.apply(&[5.0, 1.0])), vec![5.0, 1.0]);
    }

    fn linear_data(n: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| rng.random_range(0.0..50.0)).collect()).collect();
        let ys = xs
            .iter()
            .map(|x| vec![4e-4 * (x[0] - x[1]), 3e-4 * (x[1] - x[2]), 1e-4 * x[0]])
            .collect();
        (xs, ys)
    }

    #[test]
    fn training_is_deterministic_and_fits_a_linear_map() {
        let (xs, ys) = linear_data(400);
        let cfg = TrainConfig {
            epochs: 300,
            hidden: 16,
            batch_size: 16,
            learning_rate: 1e-2,
            ..TrainConfig::default()
        };
        let (a, ra) = train_regressor(&xs, &ys, &cfg, 7).unwrap();
        let (b, _) = train_regressor(&xs, &ys, &cfg, 7).unwrap();
        assert_eq!(a, b);
        let rmse = ra.validation_rmse.unwrap();
        // Outputs span about ±20 mm; the planar error must stay below 0.5 mm.
        assert!(rmse[0].hypot(rmse[1]) < 5e-4, "{rmse:?}");
        assert_eq!(ra.train_samples + ra.validation_samples, 400);
    }

    #[test]
    fn training_rejects_bad_data() {
        let (xs, mut ys) = linear_data(60);
        let cfg = TrainConfig::default();
        assert!(train_regressor(&xs[..40], &ys[..40], &cfg, 0).is_err());
        let constant: Vec<Vec<f64>> = xs.iter().map(|x| vec![x[0], 1.0, x[2]]).collect();
        assert!(train_regressor(&constant, &ys, &cfg, 0).is_err());
        ys[3][1] = f64::NAN;
        assert!(train_regressor(&xs, &ys, &cfg, 0).is_err());
    }
}
