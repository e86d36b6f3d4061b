//! Synthetic phantoms and the misaligned-Fourier, variable-density
//! Poisson-disk and Radon encodings that feed the reconstruction network.

pub mod dataset;
pub mod encode;
pub mod fourier;
pub mod mask;
pub mod phantom;
pub mod radon;
pub mod store;

pub use dataset::{build_dataset, split_sizes, Dataset, DatasetConfig};
pub use encode::{mf_encode, mf_spectrum, radon_encode, vpds_encode, EncodedExample, Process};
pub use fourier::{dft2, dft2_real, idft2};
pub use mask::{Mask, SparsityReading};
pub use phantom::{phantom, Phantom};
pub use radon::radon;
pub use store::{example_pgm, load_dataset, save_dataset};
