//! Clock-driven spiking network simulator: Poisson-coded input, a locally
//! connected feature layer trained with STDP under winner-take-all
//! inhibition, and a decoding layer trained with reward-modulated STDP.
//!
//! Every numeric type is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the precision.

pub mod data;
pub mod encoding;
pub mod engine;
pub mod error;
pub mod neurons;
pub mod plasticity;
pub mod readout;
pub mod reward;
pub mod scalar;
pub mod topology;

pub use data::Dataset;
pub use encoding::{EncoderParams, SpikeRecord};
pub use engine::{
    checkpoint_load, checkpoint_save, decide, evaluate, run_sample, train_decoder, train_lc, Network, NetworkConfig,
    PhaseSchedule, PlasticityMode, SampleResult, TrainingStage,
};
pub use error::{Error, Result};
pub use neurons::{NeuronParams, NeuronState};
pub use plasticity::{PlasticityParams, TraceState};
pub use reward::{compute_reward, RewardMode, RewardState};
pub use scalar::Scalar;
pub use topology::{count_parameters, LcShape, ParameterCount};

pub type NetworkF32 = Network<f32>;
pub type NetworkF64 = Network<f64>;
pub type NetworkConfigF32 = NetworkConfig<f32>;
pub type NetworkConfigF64 = NetworkConfig<f64>;
pub type RewardStateF32 = RewardState<f32>;
pub type RewardStateF64 = RewardState<f64>;
