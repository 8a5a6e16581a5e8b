use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::monitor::SampleRecord;
use super::sim::{infer, run_sample, PlasticityMode};
use super::{Network, PhaseSchedule};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::reward::RewardState;
use crate::scalar::Scalar;

/// Independent random streams derived from one run seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 0,
    Order = 1,
    LcTrain = 2,
    DecoderTrain = 3,
    Eval = 4,
    Features = 5,
    Data = 6,
    Readout = 7,
}

/// Generator for sample `index` of `stream`. Each (stream, index) pair gets
/// its own ChaCha stream, so results do not depend on the order in which
/// samples are processed.
pub fn sample_rng(seed: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((stream as u64) << 48) ^ index);
    rng
}

/// `n_samples` dataset indices: concatenated shuffled passes over the data.
pub fn sample_order(n_dataset: usize, n_samples: usize, seed: u64, stream: Stream) -> Vec<usize> {
    if n_dataset == 0 {
        return Vec::new();
    }
    let mut rng = sample_rng(seed, Stream::Order, stream as u64);
    let mut order = Vec::with_capacity(n_samples);
    let mut pass: Vec<usize> = (0..n_dataset).collect();
    while order.len() < n_samples {
        pass.shuffle(&mut rng);
        let take = (n_samples - order.len()).min(n_dataset);
        order.extend_from_slice(&pass[..take]);
    }
    order
}

/// Samples per entry of [`LcTrainReport::window_change_norms`].
pub const LC_MONITOR_WINDOW: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct LcTrainReport {
    /// L2 norm of the LC weight change over each window of
    /// [`LC_MONITOR_WINDOW`] samples (the last window may be shorter).
    pub window_change_norms: Vec<f64>,
}

/// Unsupervised STDP training of the LC layer. Labels are never read.
pub fn train_lc<T: Scalar>(
    network: &mut Network<T>,
    dataset: &Dataset,
    n_samples: usize,
    schedule: &PhaseSchedule,
    seed: u64,
) -> Result<LcTrainReport> {
    let mut norms = Vec::new();
    if n_samples == 0 {
        return Ok(LcTrainReport {
            window_change_norms: norms,
        });
    }
    check_dataset(network, dataset)?;
    let order = sample_order(dataset.len(), n_samples, seed, Stream::LcTrain);
    let mut snapshot = network.lc.connection.weights.clone();
    for (it, &idx) in order.iter().enumerate() {
        let image = dataset.image_scalar::<T>(idx);
        let mut rng = sample_rng(seed, Stream::LcTrain, it as u64);
        run_sample(network, &image, schedule, &mut rng, PlasticityMode::StdpLc)?;
        if (it + 1) % LC_MONITOR_WINDOW == 0 || it + 1 == order.len() {
            let w = &network.lc.connection.weights;
            let norm = w
                .iter()
                .zip(&snapshot)
                .map(|(a, b)| (a.as_f64() - b.as_f64()).powi(2))
                .sum::<f64>()
                .sqrt();
            norms.push(norm);
            snapshot.copy_from_slice(w);
        }
    }
    Ok(LcTrainReport {
        window_change_norms: norms,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderTrainReport {
    pub records: Vec<SampleRecord>,
}

impl DecoderTrainReport {
    pub fn accuracy(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.iter().filter(|r| r.correct()).count() as f64 / self.records.len() as f64
    }
}

/// R-STDP training of the decoder with the sample label as the rewarded
/// class. `reward_state` is reset first.
pub fn train_decoder<T: Scalar>(
    network: &mut Network<T>,
    dataset: &Dataset,
    n_samples: usize,
    schedule: &PhaseSchedule,
    reward_state: &mut RewardState<T>,
    seed: u64,
) -> Result<DecoderTrainReport> {
    train_decoder_with(
        network,
        dataset,
        n_samples,
        schedule,
        reward_state,
        seed,
        |_, label| label,
        &mut |_, _| {},
    )
}

/// General decoder training. `target(iteration, label)` picks the rewarded
/// class; `hook` runs after every sample.
#[allow(clippy::too_many_arguments)]
pub fn train_decoder_with<T: Scalar>(
    network: &mut Network<T>,
    dataset: &Dataset,
    n_samples: usize,
    schedule: &PhaseSchedule,
    reward_state: &mut RewardState<T>,
    seed: u64,
    mut target: impl FnMut(usize, usize) -> usize,
    hook: &mut dyn FnMut(&SampleRecord, &Network<T>),
) -> Result<DecoderTrainReport> {
    reward_state.reset();
    let mut records = Vec::with_capacity(n_samples);
    if n_samples == 0 {
        return Ok(DecoderTrainReport { records });
    }
    check_dataset(network, dataset)?;
    let order = sample_order(dataset.len(), n_samples, seed, Stream::DecoderTrain);
    for (it, &idx) in order.iter().enumerate() {
        let image = dataset.image_scalar::<T>(idx);
        let label = dataset.label(idx);
        let tgt = target(it, label);
        let mut rng = sample_rng(seed, Stream::DecoderTrain, it as u64);
        let res = run_sample(
            network,
            &image,
            schedule,
            &mut rng,
            PlasticityMode::RstdpDecoder {
                target: tgt,
                reward: reward_state,
            },
        )?;
        let record = SampleRecord {
            iteration: it,
            sample: idx,
            target: tgt,
            decision: res.decision.expect("decision runs always decide"),
            reward: res.reward.expect("reward follows decision").as_f64(),
            modulation: res.modulation.expect("modulation follows decision").as_f64(),
        };
        hook(&record, network);
        records.push(record);
    }
    Ok(DecoderTrainReport { records })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    pub decisions: Vec<usize>,
}

/// Accuracy of the frozen network over the whole dataset. Samples are
/// simulated in parallel; sample `i` always uses the same random stream, so
/// the result does not depend on thread scheduling.
pub fn evaluate<T: Scalar>(
    network: &Network<T>,
    dataset: &Dataset,
    schedule: &PhaseSchedule,
    seed: u64,
) -> Result<EvalReport> {
    if network.lc.connection.plastic || network.decoder.connection.plastic {
        return Err(Error::PlasticityMode {
            mode: "none",
            reason: "evaluation requires every connection to be frozen",
        });
    }
    if schedule.t_dec == 0 {
        return Err(Error::param("t_dec", "must be >= 1 when a decision is required"));
    }
    check_dataset(network, dataset)?;
    let decisions = (0..dataset.len())
        .into_par_iter()
        .map(|i| {
            let image = dataset.image_scalar::<T>(i);
            let mut rng = sample_rng(seed, Stream::Eval, i as u64);
            let res = infer(network, &image, schedule, &mut rng, true)?;
            Ok(res.decision.expect("t_dec >= 1"))
        })
        .collect::<Result<Vec<usize>>>()?;
    let correct = decisions
        .iter()
        .enumerate()
        .filter(|(i, &d)| d == dataset.label(*i))
        .count();
    let accuracy = if decisions.is_empty() {
        0.0
    } else {
        correct as f64 / decisions.len() as f64
    };
    Ok(EvalReport { accuracy, decisions })
}

pub(crate) fn check_dataset<T: Scalar>(network: &Network<T>, dataset: &Dataset) -> Result<()> {
    let shape = network.lc.shape();
    if shape.ch_in != 1 || dataset.height() != shape.h_in || dataset.width() != shape.w_in {
        return Err(Error::Dataset(format!(
            "images are {}x{}, the network expects {}x{}x{}",
            dataset.height(),
            dataset.width(),
            shape.ch_in,
            shape.h_in,
            shape.w_in
        )));
    }
    if dataset.is_empty() {
        return Err(Error::Dataset("empty dataset".into()));
    }
    Ok(())
}
