//! Network assembly, the three-phase per-sample simulation, layer-wise
//! training, group-vote decoding, checkpoints and monitor export.
//!
//! # Timing
//!
//! The network is clock driven. Within one step the input raster row is read,
//! the LC layer integrates the input and inhibition spikes emitted on the
//! previous step, then the decoder integrates the LC and decoder spikes of the
//! previous step. Every synaptic path therefore carries a one-step delay.
//! Plasticity sees the spikes emitted on the current step on both sides of a
//! connection.
//!
//! # Ownership
//!
//! Training takes `&mut Network` and runs samples strictly in order.
//! Evaluation takes `&Network`, keeps all mutable state per sample and is
//! safe to run from many threads at once.

mod checkpoint;
mod monitor;
mod sim;
mod train;

pub use checkpoint::{checkpoint_load, checkpoint_save, ArrayStore};
pub use monitor::{
    decoder_map, export_monitors, filter_grid, running_mean, write_pgm, GrayImage, MonitorOptions, SampleRecord,
};
pub(crate) use sim::infer;
pub use sim::{run_sample, run_sample_observed, PlasticityMode, SampleResult, StepView};
pub(crate) use train::check_dataset;
pub use train::{
    evaluate, sample_order, sample_rng, train_decoder, train_decoder_with, train_lc, DecoderTrainReport, EvalReport,
    LcTrainReport, Stream, LC_MONITOR_WINDOW,
};

use rand::Rng;

use crate::encoding::EncoderParams;
use crate::error::{Error, Result};
use crate::neurons::NeuronParams;
use crate::plasticity::PlasticityParams;
use crate::scalar::Scalar;
use crate::topology::{
    build_decoder_inhibition, build_lc_inhibition, DenseConnection, InhibitionMask, LcShape, LocalConnection,
};

/// Phase lengths in time steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhaseSchedule {
    pub t_adapt: usize,
    pub t_dec: usize,
    pub t_learn: usize,
}

impl Default for PhaseSchedule {
    fn default() -> Self {
        Self {
            t_adapt: 256,
            t_dec: 256,
            t_learn: 256,
        }
    }
}

impl PhaseSchedule {
    pub fn new(t_adapt: usize, t_dec: usize, t_learn: usize) -> Self {
        Self {
            t_adapt,
            t_dec,
            t_learn,
        }
    }

    pub fn total(&self) -> usize {
        self.t_adapt + self.t_dec + self.t_learn
    }

    pub fn phase_at(&self, t: usize) -> Phase {
        if t < self.t_adapt {
            Phase::Adapt
        } else if t < self.t_adapt + self.t_dec {
            Phase::Decide
        } else {
            Phase::Learn
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Adapt,
    Decide,
    Learn,
}

/// Which connection is plastic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainingStage {
    Lc,
    Decoder,
    Frozen,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LcLayer<T> {
    pub neuron: NeuronParams<T>,
    /// Adaptive threshold offsets carried from sample to sample.
    pub threshold: Vec<T>,
    pub connection: LocalConnection<T>,
    pub inhibition: InhibitionMask<T>,
    pub plasticity: PlasticityParams<T>,
}

impl<T: Scalar> LcLayer<T> {
    pub fn shape(&self) -> LcShape {
        self.connection.shape
    }

    pub fn n_neurons(&self) -> usize {
        self.connection.shape.n_neurons()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderLayer<T> {
    pub neuron: NeuronParams<T>,
    pub threshold: Vec<T>,
    pub connection: DenseConnection<T>,
    pub inhibition: InhibitionMask<T>,
    pub plasticity: PlasticityParams<T>,
    pub n_classes: usize,
}

impl<T: Scalar> DecoderLayer<T> {
    pub fn n_out(&self) -> usize {
        self.connection.n_post
    }

    pub fn group_size(&self) -> usize {
        self.n_out() / self.n_classes
    }

    /// Class group owning decoder neuron `j`.
    pub fn group_of(&self, j: usize) -> usize {
        j / self.group_size()
    }
}

/// Everything needed to build a [`Network`].
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig<T> {
    pub dt: T,
    pub encoder: EncoderParams<T>,
    pub ch_in: usize,
    pub h_in: usize,
    pub w_in: usize,
    pub ch_lc: usize,
    pub k: usize,
    pub s: usize,
    pub n_out: usize,
    pub n_classes: usize,
    pub lc_neuron: NeuronParams<T>,
    pub decoder_neuron: NeuronParams<T>,
    pub lc_plasticity: PlasticityParams<T>,
    pub decoder_plasticity: PlasticityParams<T>,
    pub lc_w_inh: T,
    pub decoder_w_inh: T,
    /// Also inhibit between neurons of the same class group.
    pub within_group_inhibition: bool,
}

impl<T: Scalar> Default for NetworkConfig<T> {
    fn default() -> Self {
        Self {
            dt: T::one(),
            encoder: EncoderParams::default(),
            ch_in: 1,
            h_in: 22,
            w_in: 22,
            ch_lc: 100,
            k: 15,
            s: 4,
            n_out: 1000,
            n_classes: 10,
            lc_neuron: NeuronParams::default(),
            decoder_neuron: NeuronParams::non_adaptive(),
            lc_plasticity: PlasticityParams::stdp_default(),
            decoder_plasticity: PlasticityParams::rstdp_default(),
            lc_w_inh: T::lit(-100.0),
            decoder_w_inh: T::lit(-100.0),
            within_group_inhibition: false,
        }
    }
}

impl<T: Scalar> NetworkConfig<T> {
    pub fn lc_shape(&self) -> Result<LcShape> {
        LcShape::new(self.ch_in, self.h_in, self.w_in, self.ch_lc, self.k, self.s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > T::zero()) {
            return Err(Error::param("dt", "must be > 0"));
        }
        self.encoder.validate(self.dt)?;
        self.lc_shape()?;
        if self.n_classes == 0 {
            return Err(Error::param("n_classes", "must be >= 1"));
        }
        if self.n_out == 0 || self.n_out % self.n_classes != 0 {
            return Err(Error::param(
                "n_out",
                format!(
                    "{} is not a positive multiple of n_classes = {}",
                    self.n_out, self.n_classes
                ),
            ));
        }
        self.lc_neuron.validate()?;
        self.decoder_neuron.validate()?;
        self.lc_plasticity.validate()?;
        self.decoder_plasticity.validate()?;
        if !(self.lc_w_inh < T::zero()) {
            return Err(Error::param("w_inh", "must be negative"));
        }
        if !(self.decoder_w_inh < T::zero()) {
            return Err(Error::param("decoder_w_inh", "must be negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    pub dt: T,
    pub encoder: EncoderParams<T>,
    pub lc: LcLayer<T>,
    pub decoder: DecoderLayer<T>,
}

impl<T: Scalar> Network<T> {
    /// Builds a network with weights drawn uniformly from `[0, 1)`. The LC
    /// connection starts plastic and the decoder frozen.
    pub fn new<R: Rng + ?Sized>(config: &NetworkConfig<T>, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let shape = config.lc_shape()?;
        let lc_conn = LocalConnection::uniform(shape, rng);
        let dec_conn = DenseConnection::uniform(shape.n_neurons(), config.n_out, rng);
        Self::from_parts(config, lc_conn, dec_conn)
    }

    /// Builds a network around explicit weights.
    pub fn from_parts(
        config: &NetworkConfig<T>,
        lc_conn: LocalConnection<T>,
        dec_conn: DenseConnection<T>,
    ) -> Result<Self> {
        config.validate()?;
        let shape = config.lc_shape()?;
        if lc_conn.shape != shape {
            return Err(Error::param("lc weights", "shape differs from the configuration"));
        }
        if dec_conn.n_pre != shape.n_neurons() || dec_conn.n_post != config.n_out {
            return Err(Error::DimensionMismatch {
                what: "decoder weights",
                expected: shape.n_neurons() * config.n_out,
                got: dec_conn.n_pre * dec_conn.n_post,
            });
        }
        let mut net = Self {
            dt: config.dt,
            encoder: config.encoder,
            lc: LcLayer {
                neuron: config.lc_neuron,
                threshold: vec![T::zero(); shape.n_neurons()],
                connection: lc_conn,
                inhibition: build_lc_inhibition(&shape, config.lc_w_inh)?,
                plasticity: config.lc_plasticity,
            },
            decoder: DecoderLayer {
                neuron: config.decoder_neuron,
                threshold: vec![T::zero(); config.n_out],
                connection: dec_conn,
                inhibition: build_decoder_inhibition(
                    config.n_out,
                    config.n_classes,
                    config.decoder_w_inh,
                    config.within_group_inhibition,
                )?,
                plasticity: config.decoder_plasticity,
                n_classes: config.n_classes,
            },
        };
        net.set_stage(TrainingStage::Lc);
        Ok(net)
    }

    pub fn n_classes(&self) -> usize {
        self.decoder.n_classes
    }

    pub fn set_stage(&mut self, stage: TrainingStage) {
        self.lc.connection.plastic = stage == TrainingStage::Lc;
        self.decoder.connection.plastic = stage == TrainingStage::Decoder;
    }

    pub fn stage(&self) -> Option<TrainingStage> {
        match (self.lc.connection.plastic, self.decoder.connection.plastic) {
            (true, false) => Some(TrainingStage::Lc),
            (false, true) => Some(TrainingStage::Decoder),
            (false, false) => Some(TrainingStage::Frozen),
            (true, true) => None,
        }
    }

    /// Number of pixels the encoder expects per image.
    pub fn input_len(&self) -> usize {
        self.lc.connection.shape.n_inputs()
    }

    /// Loosely checks that a network is usable after deserialization.
    pub fn validate(&self) -> Result<()> {
        let shape = self.lc.shape();
        if self.lc.threshold.len() != shape.n_neurons() {
            return Err(Error::DimensionMismatch {
                what: "lc threshold",
                expected: shape.n_neurons(),
                got: self.lc.threshold.len(),
            });
        }
        if self.decoder.threshold.len() != self.decoder.n_out() {
            return Err(Error::DimensionMismatch {
                what: "decoder threshold",
                expected: self.decoder.n_out(),
                got: self.decoder.threshold.len(),
            });
        }
        if self.decoder.connection.n_pre != shape.n_neurons() {
            return Err(Error::DimensionMismatch {
                what: "decoder inputs",
                expected: shape.n_neurons(),
                got: self.decoder.connection.n_pre,
            });
        }
        if self.decoder.n_classes == 0 || self.decoder.n_out() % self.decoder.n_classes != 0 {
            return Err(Error::param("n_classes", "must divide n_out"));
        }
        Ok(())
    }
}

/// Argmax of `group_counts`, ties broken uniformly at random. An rng draw is
/// consumed only when there is a tie.
pub fn decide<R: Rng + ?Sized>(group_counts: &[u32], rng: &mut R) -> usize {
    let Some(&best) = group_counts.iter().max() else {
        return 0;
    };
    let tied: Vec<usize> = group_counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c == best)
        .map(|(i, _)| i)
        .collect();
    if tied.len() == 1 {
        tied[0]
    } else {
        tied[rng.gen_range(0..tied.len())]
    }
}
