//! Compiles matrix-vector products and (transposed) convolutions into
//! schedules of width-M dot products, and runs them on a chip.

pub mod conv;
pub mod execute;
pub mod format;
pub mod schedule;

pub use conv::{
    conv2d_direct, deconv2d_direct, im2col_patch, lower_conv, lower_conv_with, lower_deconv, to_feature_map,
    ConvGeometry, PatchMatrix,
};
pub use execute::execute_schedule;
pub use schedule::{count_mvm_steps, decompose_mvm, Schedule};
