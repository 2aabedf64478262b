//! Sampling from Boltzmann distributions with classical Markov chains and
//! with networks of spiking neurons.

pub mod boltzmann;
pub mod datasets;
pub mod error;
pub mod evaluation;
pub mod lif;
pub mod rng;
pub mod samplers;
pub mod state;
pub mod textfmt;

pub use boltzmann::{
    distribution_from_counts, empirical_distribution, kl_divergence, BoltzmannMachine, DiscreteDistribution,
    MAX_ENUM_UNITS,
};
pub use error::{Error, Result};
pub use rng::{seeded, substream, SimRng};
pub use state::{BinaryState, Clamp, ClampMask, SampleTrace};
