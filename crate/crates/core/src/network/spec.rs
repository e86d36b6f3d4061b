use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
    None,
}

impl Activation {
    #[inline]
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Tanh => v.tanh(),
            Activation::Relu => {
                if v < 0.0 {
                    0.0
                } else {
                    v
                }
            }
            Activation::None => v,
        }
    }

    /// Derivative expressed through the activation output `a = f(v)`.
    #[inline]
    pub fn derivative(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::None => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    FullyConnected { inputs: usize, outputs: usize, activation: Activation },
    Conv2D { in_channels: usize, out_channels: usize, kernel_size: usize, activation: Activation },
    Deconv2D { in_channels: usize, out_channels: usize, kernel_size: usize, activation: Activation },
}

impl LayerSpec {
    pub fn activation(&self) -> Activation {
        match *self {
            LayerSpec::FullyConnected { activation, .. }
            | LayerSpec::Conv2D { activation, .. }
            | LayerSpec::Deconv2D { activation, .. } => activation,
        }
    }

    pub fn is_fc(&self) -> bool {
        matches!(self, LayerSpec::FullyConnected { .. })
    }

    /// `(weight count, bias count, fan-in)`.
    pub fn param_sizes(&self) -> (usize, usize, usize) {
        match *self {
            LayerSpec::FullyConnected { inputs, outputs, .. } => (inputs * outputs, outputs, inputs),
            LayerSpec::Conv2D { in_channels, out_channels, kernel_size: k, .. }
            | LayerSpec::Deconv2D { in_channels, out_channels, kernel_size: k, .. } => {
                (out_channels * in_channels * k * k, out_channels, in_channels * k * k)
            }
        }
    }
}

/// Numerical-domain variants: full real domain, absolute linear outputs,
/// ReLU instead of tanh in the FC layers, or absolute weights and outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainMode {
    #[default]
    Cbd,
    Cid,
    Ncbd,
    Inon,
}

impl DomainMode {
    pub const ALL: [DomainMode; 4] = [DomainMode::Cbd, DomainMode::Cid, DomainMode::Ncbd, DomainMode::Inon];

    pub fn abs_outputs(self) -> bool {
        matches!(self, DomainMode::Cid | DomainMode::Inon)
    }

    pub fn abs_weights(self) -> bool {
        self == DomainMode::Inon
    }

    pub fn activation_for(self, layer: &LayerSpec) -> Activation {
        if self == DomainMode::Ncbd && layer.is_fc() {
            Activation::Relu
        } else {
            layer.activation()
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DomainMode::Cbd => "cbd",
            DomainMode::Cid => "cid",
            DomainMode::Ncbd => "ncbd",
            DomainMode::Inon => "inon",
        }
    }
}

impl std::str::FromStr for DomainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cbd" => Ok(DomainMode::Cbd),
            "cid" => Ok(DomainMode::Cid),
            "ncbd" => Ok(DomainMode::Ncbd),
            "inon" => Ok(DomainMode::Inon),
            other => Err(Error::Config(format!("unknown mode '{other}'"))),
        }
    }
}

/// Layer stack of the reconstruction network; convolutions run at
/// `image_size × image_size` with same padding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub image_size: usize,
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    /// FC(tanh) → FC(tanh) → conv 5×5 (ReLU) → conv 5×5 (ReLU) → deconv 7×7.
    pub fn automap(input_len: usize, image_size: usize, hidden: usize, channels: usize) -> Self {
        let px = image_size * image_size;
        Self {
            image_size,
            layers: vec![
                LayerSpec::FullyConnected { inputs: input_len, outputs: hidden, activation: Activation::Tanh },
                LayerSpec::FullyConnected { inputs: hidden, outputs: px, activation: Activation::Tanh },
                LayerSpec::Conv2D { in_channels: 1, out_channels: channels, kernel_size: 5, activation: Activation::Relu },
                LayerSpec::Conv2D {
                    in_channels: channels,
                    out_channels: channels,
                    kernel_size: 5,
                    activation: Activation::Relu,
                },
                LayerSpec::Deconv2D { in_channels: channels, out_channels: 1, kernel_size: 7, activation: Activation::None },
            ],
        }
    }

    pub fn input_len(&self) -> usize {
        match self.layers.first() {
            Some(LayerSpec::FullyConnected { inputs, .. }) => *inputs,
            Some(LayerSpec::Conv2D { in_channels, .. }) | Some(LayerSpec::Deconv2D { in_channels, .. }) => {
                in_channels * self.image_size * self.image_size
            }
            None => 0,
        }
    }

    /// Index of the second convolution, whose output carries the sparsity penalty.
    pub fn penalty_layer(&self) -> Option<usize> {
        self.layers
            .iter()
            .enumerate()
            .filter(|(_, l)| matches!(l, LayerSpec::Conv2D { .. }))
            .nth(1)
            .map(|(i, _)| i)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Config("network has no layers".into()));
        }
        let px = self.image_size * self.image_size;
        let mut width = self.input_len();
        for (i, l) in self.layers.iter().enumerate() {
            let (inputs, outputs) = match *l {
                LayerSpec::FullyConnected { inputs, outputs, .. } => (inputs, outputs),
                LayerSpec::Conv2D { in_channels, out_channels, kernel_size, .. }
                | LayerSpec::Deconv2D { in_channels, out_channels, kernel_size, .. } => {
                    if kernel_size == 0 || kernel_size % 2 == 0 {
                        return Err(Error::Config(format!("layer {i}: kernel size must be odd")));
                    }
                    (in_channels * px, out_channels * px)
                }
            };
            if inputs != width || inputs == 0 || outputs == 0 {
                return Err(Error::Config(format!("layer {i} expects {inputs} inputs but receives {width}")));
            }
            width = outputs;
        }
        if width != px {
            return Err(Error::Config(format!("network produces {width} values for a {px}-pixel image")));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.param_sizes().0 + l.param_sizes().1).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub decay_epoch: usize,
    pub decayed_learning_rate: f64,
    pub lambda_penalty: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            decay_epoch: 170,
            decayed_learning_rate: 1e-4,
            lambda_penalty: 1e-4,
            epochs: 200,
            batch_size: 16,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Rates used for the full-size network.
    pub fn full_scale() -> Self {
        Self { learning_rate: 2e-5, decayed_learning_rate: 2e-6, epochs: 1000, decay_epoch: 850, ..Self::default() }
    }

    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        if epoch >= self.decay_epoch {
            self.decayed_learning_rate
        } else {
            self.learning_rate
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.learning_rate < 0.0 || self.decayed_learning_rate < 0.0 || self.lambda_penalty < 0.0 {
            return Err(Error::Config("rates and penalty must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.epsilon <= 0.0 {
            return Err(Error::Config("invalid Adam constants".into()));
        }
        Ok(())
    }
}

/// Additive Gaussian error on every layer's linear output, with std given
/// relative to that output's dynamic range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorInjection {
    pub per_layer_std: Vec<f64>,
    pub seed: u64,
}

impl ErrorInjection {
    pub fn none() -> Self {
        Self { per_layer_std: Vec::new(), seed: 0 }
    }

    pub fn uniform(spec: &NetworkSpec, std: f64, seed: u64) -> Self {
        Self { per_layer_std: vec![std; spec.layers.len()], seed }
    }

    /// Separate levels for fully connected and convolutional layers.
    pub fn by_kind(spec: &NetworkSpec, fc_std: f64, conv_std: f64, seed: u64) -> Self {
        Self {
            per_layer_std: spec.layers.iter().map(|l| if l.is_fc() { fc_std } else { conv_std }).collect(),
            seed,
        }
    }

    pub fn std_for(&self, layer: usize) -> f64 {
        self.per_layer_std.get(layer).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.per_layer_std.iter().all(|s| *s == 0.0)
    }
}

impl Default for ErrorInjection {
    fn default() -> Self {
        Self::none()
    }
}
