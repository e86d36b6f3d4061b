//! Physical model of the dot-product chip: splitting, push-pull modulation,
//! combining and reference-biased detection.

pub mod chip;
pub mod combiner;
pub mod detection;
pub mod deviation;
pub mod modulator;
pub mod splitter;

pub use chip::{BranchDrive, BranchState, ChipConfig, ChipState, LinearMap, ModSlot, MONITOR_FLOOR_DB};
pub use combiner::combine;
pub use detection::{decode, photodetect, DetectionMode, DetectionModel};
pub use deviation::DeviationProfile;
pub use modulator::{
    encode_value, modulator_field, phase_for_voltages, voltages_for_phase, ComplexAmplitude, ModulatorState,
    PhaseShifterParams, TransmissionCurveFit,
};
pub use splitter::{SplitOutput, SplitterModel};
