use std::borrow::Cow;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::gemm::{col2im, gemm, im2col};
use super::spec::{DomainMode, ErrorInjection, LayerSpec, NetworkSpec};
use crate::lowering::{decompose_mvm, execute_schedule, lower_conv, lower_deconv};
use crate::optics::ChipState;
use crate::rng::{self, purpose};
use crate::tensor::{FeatureMap, Kernel, Matrix};
use crate::{Error, Exec, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    /// FC: `inputs × outputs` row-major. Conv/deconv: `out × in × k × k`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub spec: NetworkSpec,
    pub params: Vec<LayerParams>,
}

/// Where the linear parts of each layer are evaluated.
#[derive(Debug, Clone, Copy)]
pub enum Backend<'a> {
    Exact,
    /// Every linear layer is lowered and executed on the chip; `seed`
    /// selects the shot-noise streams.
    Chip { chip: &'a ChipState, seed: u64, exec: Exec },
}

/// Per-layer values of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    /// Input of each layer (the network input for layer 0).
    pub inputs: Vec<Vec<f64>>,
    /// Linear outputs including bias and injected error, before the domain transform.
    pub linear: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
    pub penalty_layer: Option<usize>,
}

impl ForwardTrace {
    pub fn output(&self) -> &[f64] {
        self.outputs.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// Feature maps carrying the sparsity penalty (empty if the network has none).
    pub fn h(&self) -> &[f64] {
        self.penalty_layer.map(|i| self.outputs[i].as_slice()).unwrap_or(&[])
    }
}

impl Network {
    /// Gaussian weights with std `1/√fan_in`, zero biases.
    pub fn init(spec: NetworkSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let params = spec
            .layers
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let (nw, nb, fan_in) = l.param_sizes();
                let mut r = rng::stream(seed, purpose::INIT, i as u64);
                let std = 1.0 / (fan_in as f64).sqrt();
                let weights = (0..nw)
                    .map(|_| {
                        let n: f64 = StandardNormal.sample(&mut r);
                        n * std
                    })
                    .collect();
                LayerParams { weights, bias: vec![0.0; nb] }
            })
            .collect();
        Ok(Self { spec, params })
    }

    pub fn zeros(spec: NetworkSpec) -> Result<Self> {
        spec.validate()?;
        let params = spec
            .layers
            .iter()
            .map(|l| {
                let (nw, nb, _) = l.param_sizes();
                LayerParams { weights: vec![0.0; nw], bias: vec![0.0; nb] }
            })
            .collect();
        Ok(Self { spec, params })
    }

    /// SHA-256 over all parameters, little-endian.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        for p in &self.params {
            for v in p.weights.iter().chain(&p.bias) {
                h.update(v.to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    fn effective(&self, layer: usize, mode: DomainMode) -> (Cow<'_, [f64]>, Cow<'_, [f64]>) {
        let p = &self.params[layer];
        if mode.abs_weights() {
            (
                Cow::Owned(p.weights.iter().map(|v| v.abs()).collect()),
                Cow::Owned(p.bias.iter().map(|v| v.abs()).collect()),
            )
        } else {
            (Cow::Borrowed(&p.weights), Cow::Borrowed(&p.bias))
        }
    }

    /// Linear part of `layer` with the stored weights, no bias or domain transform.
    pub fn layer_linear(&self, layer: usize, input: &[f64], backend: Backend, example: u64) -> Result<Vec<f64>> {
        self.linear(layer, input, &self.params[layer].weights, backend, example)
    }

    /// Linear part of one layer (no bias) on the chosen backend.
    fn linear(&self, layer: usize, input: &[f64], weights: &[f64], backend: Backend, example: u64) -> Result<Vec<f64>> {
        let n = self.spec.image_size;
        let spec = &self.spec.layers[layer];
        match backend {
            Backend::Exact => Ok(linear_exact(spec, n, input, weights)),
            Backend::Chip { chip, seed, exec } => {
                let run = rng::derive_seed(rng::derive_seed(seed, purpose::TRIAL, example), purpose::TRIAL, layer as u64);
                match *spec {
                    LayerSpec::FullyConnected { inputs, outputs, .. } => {
                        let a = Matrix::from_vec(inputs, outputs, weights.to_vec())?;
                        execute_schedule(&decompose_mvm(input, &a, chip.active)?, chip, run, exec)
                    }
                    LayerSpec::Conv2D { in_channels, out_channels, kernel_size, .. } => {
                        let map = FeatureMap::from_vec(in_channels, n, n, input.to_vec())?;
                        let k = Kernel::from_vec(out_channels, in_channels, kernel_size, weights.to_vec())?;
                        execute_schedule(&lower_conv(&map, &k, chip.active)?, chip, run, exec)
                    }
                    LayerSpec::Deconv2D { in_channels, out_channels, kernel_size, .. } => {
                        let map = FeatureMap::from_vec(in_channels, n, n, input.to_vec())?;
                        let k = Kernel::from_vec(out_channels, in_channels, kernel_size, weights.to_vec())?;
                        execute_schedule(&lower_deconv(&map, &k, chip.active)?, chip, run, exec)
                    }
                }
            }
        }
    }

    pub fn forward(
        &self,
        input: &[f64],
        backend: Backend,
        mode: DomainMode,
        injection: &ErrorInjection,
        example: u64,
    ) -> Result<ForwardTrace> {
        if input.len() != self.spec.input_len() {
            return Err(Error::ShapeMismatch(format!(
                "input has {} values, network expects {}",
                input.len(),
                self.spec.input_len()
            )));
        }
        let layers = self.spec.layers.len();
        let mut trace = ForwardTrace {
            inputs: Vec::with_capacity(layers),
            linear: Vec::with_capacity(layers),
            outputs: Vec::with_capacity(layers),
            penalty_layer: self.spec.penalty_layer(),
        };
        let mut a = input.to_vec();
        for (l, spec) in self.spec.layers.iter().enumerate() {
            let (w, b) = self.effective(l, mode);
            let mut z = self.linear(l, &a, &w, backend, example)?;
            add_bias(spec, self.spec.image_size, &mut z, &b);
            let std = injection.std_for(l);
            if std > 0.0 {
                let (lo, hi) = z.iter().fold((f64::MAX, f64::MIN), |(lo, hi), &v| (lo.min(v), hi.max(v)));
                let scale = std * (hi - lo);
                let mut r = rng::stream(
                    rng::derive_seed(injection.seed, purpose::INJECTION, example),
                    purpose::INJECTION,
                    l as u64,
                );
                for v in z.iter_mut() {
                    let n: f64 = StandardNormal.sample(&mut r);
                    *v += scale * n;
                }
            }
            let act = mode.activation_for(spec);
            let out: Vec<f64> = if mode.abs_outputs() {
                z.iter().map(|v| act.apply(v.abs())).collect()
            } else {
                z.iter().map(|&v| act.apply(v)).collect()
            };
            trace.inputs.push(std::mem::replace(&mut a, out.clone()));
            trace.linear.push(z);
            trace.outputs.push(out);
        }
        Ok(trace)
    }

    /// Reconstructed image only.
    pub fn infer(&self, input: &[f64], mode: DomainMode) -> Result<Vec<f64>> {
        Ok(self.forward(input, Backend::Exact, mode, &ErrorInjection::none(), 0)?.outputs.pop().unwrap_or_default())
    }

    /// Exact inference with i.i.d. Gaussian error of relative std `sigma`
    /// on every layer's linear output.
    pub fn infer_with_injection(&self, input: &[f64], mode: DomainMode, sigma: f64, seed: u64, example: u64) -> Result<Vec<f64>> {
        let inj = ErrorInjection::uniform(&self.spec, sigma, seed);
        Ok(self.forward(input, Backend::Exact, mode, &inj, example)?.outputs.pop().unwrap_or_default())
    }

    /// Gradients of the per-example objective for a completed exact forward pass.
    pub fn backward(&self, trace: &ForwardTrace, truth: &[f64], mode: DomainMode, lambda: f64) -> Result<Vec<LayerParams>> {
        let out = trace.output();
        if out.len() != truth.len() {
            return Err(Error::ShapeMismatch(format!("output has {} pixels, truth {}", out.len(), truth.len())));
        }
        let n = self.spec.image_size;
        let px = (n * n) as f64;
        let mut grads: Vec<LayerParams> = Vec::with_capacity(self.params.len());
        let mut d_a: Vec<f64> = out.iter().zip(truth).map(|(y, t)| 2.0 * (y - t) / px).collect();
        for l in (0..self.spec.layers.len()).rev() {
            let spec = &self.spec.layers[l];
            if Some(l) == trace.penalty_layer && lambda > 0.0 {
                let h = &trace.outputs[l];
                let k_maps = h.len() as f64 / px;
                let c = lambda / (k_maps * px);
                for (d, &v) in d_a.iter_mut().zip(h) {
                    *d += c * sign(v);
                }
            }
            let act = mode.activation_for(spec);
            let z = &trace.linear[l];
            let a_out = &trace.outputs[l];
            let d_z: Vec<f64> = (0..z.len())
                .map(|i| {
                    let d = d_a[i] * act.derivative(a_out[i]);
                    if mode.abs_outputs() {
                        d * sign(z[i])
                    } else {
                        d
                    }
                })
                .collect();
            let (w, _) = self.effective(l, mode);
            let (mut gw, mut gb, d_in) = linear_backward(spec, n, &trace.inputs[l], &w, &d_z);
            if mode.abs_weights() {
                let p = &self.params[l];
                gw.iter_mut().zip(&p.weights).for_each(|(g, &v)| *g *= sign(v));
                gb.iter_mut().zip(&p.bias).for_each(|(g, &v)| *g *= sign(v));
            }
            grads.push(LayerParams { weights: gw, bias: gb });
            d_a = d_in;
        }
        grads.reverse();
        Ok(grads)
    }
}

#[inline]
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Objective for one example: mean squared pixel error plus
/// `λ/(K·N²)·Σ|h|` over the `K` penalty feature maps.
pub fn loss(output: &[f64], truth: &[f64], h: &[f64], lambda: f64) -> Result<f64> {
    if output.len() != truth.len() || output.is_empty() {
        return Err(Error::ShapeMismatch(format!("output has {} pixels, truth {}", output.len(), truth.len())));
    }
    let px = truth.len() as f64;
    let mse = output.iter().zip(truth).map(|(y, t)| (y - t).powi(2)).sum::<f64>() / px;
    if h.is_empty() || lambda == 0.0 {
        return Ok(mse);
    }
    let k = h.len() as f64 / px;
    Ok(mse + lambda / (k * px) * h.iter().map(|v| v.abs()).sum::<f64>())
}

fn add_bias(spec: &LayerSpec, n: usize, z: &mut [f64], bias: &[f64]) {
    match spec {
        LayerSpec::FullyConnected { .. } => z.iter_mut().zip(bias).for_each(|(v, b)| *v += b),
        _ => {
            let px = n * n;
            for (c, b) in bias.iter().enumerate() {
                z[c * px..(c + 1) * px].iter_mut().for_each(|v| *v += b);
            }
        }
    }
}

/// Convolution parameters as `(kernel, in, out, k, padding)`; a transposed
/// convolution runs as a convolution with the flipped kernel.
fn conv_view<'w>(spec: &LayerSpec, weights: &'w [f64]) -> (Cow<'w, [f64]>, usize, usize, usize, usize) {
    match *spec {
        LayerSpec::Conv2D { in_channels, out_channels, kernel_size: k, .. } => {
            (Cow::Borrowed(weights), in_channels, out_channels, k, (k - 1) / 2)
        }
        LayerSpec::Deconv2D { in_channels, out_channels, kernel_size: k, .. } => {
            (Cow::Owned(flip(weights, out_channels, in_channels, k)), in_channels, out_channels, k, k - 1 - (k - 1) / 2)
        }
        LayerSpec::FullyConnected { .. } => unreachable!("not a convolution"),
    }
}

fn flip(weights: &[f64], out: usize, inp: usize, k: usize) -> Vec<f64> {
    let mut f = vec![0.0; weights.len()];
    for oc in 0..out * inp {
        let base = oc * k * k;
        for ky in 0..k {
            for kx in 0..k {
                f[base + (k - 1 - ky) * k + (k - 1 - kx)] = weights[base + ky * k + kx];
            }
        }
    }
    f
}

fn linear_exact(spec: &LayerSpec, n: usize, input: &[f64], weights: &[f64]) -> Vec<f64> {
    match *spec {
        LayerSpec::FullyConnected { inputs, outputs, .. } => {
            let mut z = vec![0.0; outputs];
            gemm(1, inputs, outputs, input, false, weights, false, &mut z, 0.0);
            z
        }
        _ => {
            let (kern, cin, cout, k, pad) = conv_view(spec, weights);
            let patches = im2col(input, cin, n, k, pad);
            let px = n * n;
            let mut z = vec![0.0; cout * px];
            gemm(cout, cin * k * k, px, &kern, false, &patches, false, &mut z, 0.0);
            z
        }
    }
}

/// `(weight grad, bias grad, input grad)` for a linear layer given `∂L/∂z`.
fn linear_backward(spec: &LayerSpec, n: usize, input: &[f64], weights: &[f64], d_z: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    match *spec {
        LayerSpec::FullyConnected { inputs, outputs, .. } => {
            let mut gw = vec![0.0; inputs * outputs];
            gemm(inputs, 1, outputs, input, true, d_z, false, &mut gw, 0.0);
            let mut d_in = vec![0.0; inputs];
            gemm(1, outputs, inputs, d_z, false, weights, true, &mut d_in, 0.0);
            (gw, d_z.to_vec(), d_in)
        }
        _ => {
            let (kern, cin, cout, k, pad) = conv_view(spec, weights);
            let px = n * n;
            let kk = cin * k * k;
            let patches = im2col(input, cin, n, k, pad);
            let mut gk = vec![0.0; cout * kk];
            gemm(cout, px, kk, d_z, false, &patches, true, &mut gk, 0.0);
            let gb = (0..cout).map(|c| d_z[c * px..(c + 1) * px].iter().sum()).collect();
            let mut d_cols = vec![0.0; kk * px];
            gemm(kk, cout, px, &kern, true, d_z, false, &mut d_cols, 0.0);
            let mut d_in = vec![0.0; cin * px];
            col2im(&d_cols, cin, n, k, pad, &mut d_in);
            if matches!(spec, LayerSpec::Deconv2D { .. }) {
                gk = flip(&gk, cout, cin, k);
            }
            (gk, gb, d_in)
        }
    }
}
