//! On-disk datasets: `inputs.ocdt` (`[count, ...input_shape]`),
//! `truths.ocdt` (`[count, n, n]`) and `dataset.json` with the config,
//! per-example seeds, the mask and the split.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, DatasetConfig};
use super::encode::EncodedExample;
use super::mask::Mask;
use crate::io::{pgm_bytes, read_tensor, write_tensor};
use crate::{Error, Result};

#[derive(Serialize, Deserialize)]
struct Index {
    config: DatasetConfig,
    input_shape: Vec<usize>,
    phantom_seeds: Vec<u64>,
    mf_thetas: Vec<f64>,
    mask: Option<Mask>,
    train: Vec<usize>,
    val: Vec<usize>,
}

pub fn save_dataset(data: &Dataset, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let count = data.examples.len();
    let input_shape = data.examples.first().map(|e| e.input_shape.clone()).unwrap_or_default();
    let n = data.config.size;
    let inputs: Vec<f64> = data.examples.iter().flat_map(|e| e.input.iter().copied()).collect();
    let truths: Vec<f64> = data.examples.iter().flat_map(|e| e.truth.iter().copied()).collect();
    write_tensor(&dir.join("inputs.ocdt"), &[&[count][..], &input_shape].concat(), &inputs)?;
    write_tensor(&dir.join("truths.ocdt"), &[count, n, n], &truths)?;
    let index = Index {
        config: data.config.clone(),
        input_shape,
        phantom_seeds: data.phantom_seeds.clone(),
        mf_thetas: data.mf_thetas.clone(),
        mask: data.mask.clone(),
        train: data.train.clone(),
        val: data.val.clone(),
    };
    std::fs::write(dir.join("dataset.json"), serde_json::to_string_pretty(&index)?)?;
    Ok(())
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let index: Index = serde_json::from_str(&std::fs::read_to_string(dir.join("dataset.json"))?)?;
    let (ishape, inputs) = read_tensor(&dir.join("inputs.ocdt"))?;
    let (tshape, truths) = read_tensor(&dir.join("truths.ocdt"))?;
    let count = index.phantom_seeds.len();
    let n = index.config.size;
    if ishape != [&[count][..], &index.input_shape].concat() || tshape != [count, n, n] {
        return Err(Error::Format("dataset tensors do not match dataset.json".into()));
    }
    let per = inputs.len() / count.max(1);
    let examples = (0..count)
        .map(|i| EncodedExample {
            process: index.config.process,
            input_shape: index.input_shape.clone(),
            input: inputs[i * per..][..per].to_vec(),
            truth: truths[i * n * n..][..n * n].to_vec(),
            size: n,
        })
        .collect();
    Ok(Dataset {
        config: index.config,
        examples,
        phantom_seeds: index.phantom_seeds,
        mf_thetas: index.mf_thetas,
        mask: index.mask,
        train: index.train,
        val: index.val,
    })
}

/// Grayscale view of one example: the truth image on the left and the
/// encoded input on the right (Fourier inputs as stacked real/imaginary
/// planes, Radon inputs as the sinogram), each scaled to its own range.
pub fn example_pgm(example: &EncodedExample) -> Result<Vec<u8>> {
    let n = example.size;
    let (ih, iw) = match example.input_shape.as_slice() {
        [c, h, w] => (c * h, *w),
        [h, w] => (*h, *w),
        _ => return Err(Error::ShapeMismatch(format!("input shape {:?}", example.input_shape))),
    };
    let range = |v: &[f64]| {
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (lo, if hi > lo { hi - lo } else { 1.0 })
    };
    let (w, h) = (n + 1 + iw, n.max(ih));
    let mut canvas = vec![0.0; w * h];
    let (tl, ts) = range(&example.truth);
    let (il, is) = range(&example.input);
    for y in 0..n {
        for x in 0..n {
            canvas[y * w + x] = (example.truth[y * n + x] - tl) / ts;
        }
    }
    for y in 0..ih {
        for x in 0..iw {
            canvas[y * w + n + 1 + x] = (example.input[y * iw + x] - il) / is;
        }
    }
    pgm_bytes(w, h, &canvas, 0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{build_dataset, Process};
    use crate::Exec;

    #[test]
    fn datasets_round_trip() {
        for process in Process::ALL {
            let cfg = DatasetConfig { process, count: 12, size: 8, radon_angles: 5, ..Default::default() };
            let data = build_dataset(&cfg, Exec::Sequential).unwrap();
            let dir = tempfile::tempdir().unwrap();
            save_dataset(&data, dir.path()).unwrap();
            assert_eq!(load_dataset(dir.path()).unwrap(), data);
        }
    }

    #[test]
    fn mismatched_tensors_are_rejected() {
        let cfg = DatasetConfig { count: 12, size: 8, ..Default::default() };
        let data = build_dataset(&cfg, Exec::Sequential).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&data, dir.path()).unwrap();
        write_tensor(&dir.path().join("truths.ocdt"), &[11, 8, 8], &vec![0.0; 11 * 64]).unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(Error::Format(_))));
    }

    #[test]
    fn example_image_has_both_panels() {
        let cfg = DatasetConfig { process: Process::Radon, count: 12, size: 8, radon_angles: 5, ..Default::default() };
        let data = build_dataset(&cfg, Exec::Sequential).unwrap();
        let bytes = example_pgm(&data.examples[0]).unwrap();
        let rays = cfg.rays();
        let header = format!("P5\n{} {}\n255\n", 8 + 1 + rays, 8);
        assert!(bytes.starts_with(header.as_bytes()));
        assert_eq!(bytes.len(), header.len() + (9 + rays) * 8);
    }
}
