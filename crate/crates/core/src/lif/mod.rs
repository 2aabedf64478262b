//! Leaky integrate-and-fire sampling networks with short-term plasticity.

pub mod calibration;
pub mod network;
pub mod params;
pub mod stp;
pub mod translate;

pub use calibration::{calibrate, calibrate_with, fit_logistic, refractory_fraction, Calibration, CalibrationOptions};
pub use network::{clamp, extract_states, simulate, LifNetworkConfig, LifSampler, LifSimulator, SpikeTrains, SynapseTable};
pub use params::{LifParams, ModelKind, NoiseConfig};
pub use stp::{stp_advance, stp_on_spike, stp_spike_at, StpParams, SynapseState};
pub use translate::{mean_psp_factor, synaptic_weight, translate, LifSetup};
