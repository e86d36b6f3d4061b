//! Binary weight files: `OCDW`, format version (u32), image size (u32),
//! layer count (u32), then per layer a kind tag (u32), activation tag (u32),
//! dimension count (u32) and dims (u64), followed by the weight and bias
//! counts (u64) each with its little-endian f64 values.

use std::io::{Read, Write};
use std::path::Path;

use super::model::{LayerParams, Network};
use super::spec::{Activation, LayerSpec, NetworkSpec};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"OCDW";
pub const VERSION: u32 = 1;

fn activation_tag(a: Activation) -> u32 {
    match a {
        Activation::None => 0,
        Activation::Tanh => 1,
        Activation::Relu => 2,
    }
}

fn activation_from_tag(t: u32) -> Result<Activation> {
    match t {
        0 => Ok(Activation::None),
        1 => Ok(Activation::Tanh),
        2 => Ok(Activation::Relu),
        _ => Err(Error::Format(format!("unknown activation tag {t}"))),
    }
}

fn layer_header(l: &LayerSpec) -> (u32, Vec<u64>) {
    match *l {
        LayerSpec::FullyConnected { inputs, outputs, .. } => (0, vec![inputs as u64, outputs as u64]),
        LayerSpec::Conv2D { in_channels, out_channels, kernel_size, .. } => {
            (1, vec![out_channels as u64, in_channels as u64, kernel_size as u64])
        }
        LayerSpec::Deconv2D { in_channels, out_channels, kernel_size, .. } => {
            (2, vec![out_channels as u64, in_channels as u64, kernel_size as u64])
        }
    }
}

pub fn to_bytes(net: &Network) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 8 * net.spec.param_count() + 64 * net.params.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(net.spec.image_size as u32).to_le_bytes());
    out.extend_from_slice(&(net.params.len() as u32).to_le_bytes());
    for (l, p) in net.spec.layers.iter().zip(&net.params) {
        let (kind, dims) = layer_header(l);
        out.extend_from_slice(&kind.to_le_bytes());
        out.extend_from_slice(&activation_tag(l.activation()).to_le_bytes());
        out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
        dims.iter().for_each(|d| out.extend_from_slice(&d.to_le_bytes()));
        for t in [&p.weights, &p.bias] {
            out.extend_from_slice(&(t.len() as u64).to_le_bytes());
            t.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
        }
    }
    out
}

struct Cursor<'a>(&'a [u8]);

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.0.len() < n {
            return Err(Error::Format("truncated weight file".into()));
        }
        let (h, t) = self.0.split_at(n);
        self.0 = t;
        Ok(h)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.u64()? as usize;
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Format("tensor too large".into()))?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<Network> {
    let mut c = Cursor(bytes);
    if c.take(4)? != MAGIC {
        return Err(Error::Format("not a weight file".into()));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported weight file version {version}")));
    }
    let image_size = c.u32()? as usize;
    let layers = c.u32()? as usize;
    let mut spec = NetworkSpec { image_size, layers: Vec::with_capacity(layers.min(64)) };
    let mut params = Vec::with_capacity(layers.min(64));
    for _ in 0..layers {
        let kind = c.u32()?;
        let activation = activation_from_tag(c.u32()?)?;
        let ndims = c.u32()? as usize;
        let dims = (0..ndims).map(|_| c.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let layer = match (kind, dims.as_slice()) {
            (0, &[inputs, outputs]) => LayerSpec::FullyConnected { inputs, outputs, activation },
            (1, &[out_channels, in_channels, kernel_size]) => {
                LayerSpec::Conv2D { in_channels, out_channels, kernel_size, activation }
            }
            (2, &[out_channels, in_channels, kernel_size]) => {
                LayerSpec::Deconv2D { in_channels, out_channels, kernel_size, activation }
            }
            _ => return Err(Error::Format(format!("bad layer header: kind {kind}, dims {dims:?}"))),
        };
        let (nw, nb, _) = layer.param_sizes();
        let weights = c.f64s()?;
        let bias = c.f64s()?;
        if weights.len() != nw || bias.len() != nb {
            return Err(Error::Format("parameter count does not match the layer shape".into()));
        }
        spec.layers.push(layer);
        params.push(LayerParams { weights, bias });
    }
    spec.validate().map_err(|e| Error::Format(e.to_string()))?;
    if !c.0.is_empty() {
        return Err(Error::Format("trailing bytes after weights".into()));
    }
    Ok(Network { spec, params })
}

pub fn save(net: &Network, path: &Path) -> Result<()> {
    std::fs::File::create(path)?.write_all(&to_bytes(net))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Network> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    from_bytes(&buf)
}
