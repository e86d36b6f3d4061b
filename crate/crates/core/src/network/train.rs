use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::model::{loss, Backend, LayerParams, Network};
use super::spec::{DomainMode, ErrorInjection, TrainConfig};
use crate::rng::{self, purpose};
use crate::{Error, Exec, Result};

/// Anything that provides a network input and its ground-truth image.
pub trait Sample: Sync {
    fn input(&self) -> &[f64];
    fn truth(&self) -> &[f64];
}

impl Sample for (Vec<f64>, Vec<f64>) {
    fn input(&self) -> &[f64] {
        &self.0
    }
    fn truth(&self) -> &[f64] {
        &self.1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub mode: DomainMode,
    pub config: TrainConfig,
    pub init_checksum: String,
    pub epochs: Vec<EpochLog>,
}

impl TrainLog {
    pub fn final_val_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.val_loss)
    }

    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "epoch,train_loss,val_loss,lr")?;
        for e in &self.epochs {
            writeln!(w, "{},{:.9e},{:.9e},{:e}", e.epoch, e.train_loss, e.val_loss, e.learning_rate)?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(&mut f)?;
        f.flush()?;
        Ok(())
    }
}

/// Adam moments for every parameter tensor.
#[derive(Debug, Clone)]
pub struct Adam {
    m: Vec<LayerParams>,
    v: Vec<LayerParams>,
    step: i32,
}

impl Adam {
    pub fn new(net: &Network) -> Self {
        let zeros: Vec<LayerParams> = net
            .params
            .iter()
            .map(|p| LayerParams { weights: vec![0.0; p.weights.len()], bias: vec![0.0; p.bias.len()] })
            .collect();
        Self { m: zeros.clone(), v: zeros, step: 0 }
    }

    pub fn update(&mut self, net: &mut Network, grads: &[LayerParams], lr: f64, cfg: &TrainConfig) {
        self.step += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.step);
        let c2 = 1.0 - cfg.beta2.powi(self.step);
        for (l, g) in grads.iter().enumerate() {
            let p = &mut net.params[l];
            let (m, v) = (&mut self.m[l], &mut self.v[l]);
            for (((w, g), m), v) in
                p.weights.iter_mut().chain(p.bias.iter_mut()).zip(g.weights.iter().chain(&g.bias)).zip(
                    m.weights.iter_mut().chain(m.bias.iter_mut()),
                ).zip(v.weights.iter_mut().chain(v.bias.iter_mut()))
            {
                *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
                *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
                *w -= lr * (*m / c1) / ((*v / c2).sqrt() + cfg.epsilon);
            }
        }
    }
}

/// Mean objective and mean gradient over a set of examples. Per-example
/// gradients are reduced in index order, so the result does not depend on `exec`.
pub fn batch_gradients<S: Sample>(
    net: &Network,
    batch: &[&S],
    mode: DomainMode,
    lambda: f64,
    exec: Exec,
) -> Result<(f64, Vec<LayerParams>)> {
    let per = exec.try_map(batch.len(), |i| {
        let s = batch[i];
        let trace = net.forward(s.input(), Backend::Exact, mode, &ErrorInjection::none(), i as u64)?;
        let l = loss(trace.output(), s.truth(), trace.h(), lambda)?;
        let g = net.backward(&trace, s.truth(), mode, lambda)?;
        Ok::<_, Error>((l, g))
    })?;
    let inv = 1.0 / batch.len().max(1) as f64;
    let mut total = 0.0;
    let mut acc: Option<Vec<LayerParams>> = None;
    for (l, g) in per {
        total += l;
        match acc.as_mut() {
            None => acc = Some(g),
            Some(a) => {
                for (a, g) in a.iter_mut().zip(&g) {
                    a.weights.iter_mut().zip(&g.weights).for_each(|(a, g)| *a += g);
                    a.bias.iter_mut().zip(&g.bias).for_each(|(a, g)| *a += g);
                }
            }
        }
    }
    let mut acc = acc.unwrap_or_default();
    for a in &mut acc {
        a.weights.iter_mut().chain(a.bias.iter_mut()).for_each(|v| *v *= inv);
    }
    Ok((total * inv, acc))
}

/// Mean objective over a dataset with the exact backend.
pub fn evaluate<S: Sample>(net: &Network, data: &[S], mode: DomainMode, lambda: f64, exec: Exec) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let losses = exec.try_map(data.len(), |i| {
        let trace = net.forward(data[i].input(), Backend::Exact, mode, &ErrorInjection::none(), i as u64)?;
        loss(trace.output(), data[i].truth(), trace.h(), lambda)
    })?;
    Ok(losses.iter().sum::<f64>() / data.len() as f64)
}

/// Mini-batch Adam. The example order of each epoch comes from its own
/// shuffle stream, so the trajectory is a function of the seed alone.
pub fn train<S: Sample>(
    net: &mut Network,
    train_set: &[S],
    val_set: &[S],
    cfg: &TrainConfig,
    mode: DomainMode,
    exec: Exec,
) -> Result<TrainLog> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::Config("empty training set".into()));
    }
    let mut log = TrainLog { mode, config: cfg.clone(), init_checksum: net.checksum(), epochs: Vec::new() };
    let mut adam = Adam::new(net);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate_at(epoch);
        order.sort_unstable();
        order.shuffle(&mut rng::stream(cfg.seed, purpose::SHUFFLE, epoch as u64));
        let mut sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&S> = chunk.iter().map(|&i| &train_set[i]).collect();
            let (l, g) = batch_gradients(net, &batch, mode, cfg.lambda_penalty, exec)?;
            if !l.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, train_loss: l });
            }
            sum += l * chunk.len() as f64;
            adam.update(net, &g, lr, cfg);
        }
        let train_loss = sum / train_set.len() as f64;
        let val_loss = evaluate(net, val_set, mode, cfg.lambda_penalty, exec)?;
        if !val_loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, train_loss });
        }
        log.epochs.push(EpochLog { epoch, train_loss, val_loss, learning_rate: lr });
    }
    Ok(log)
}
