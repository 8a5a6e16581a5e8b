use rand::Rng;

use super::{decide, Network, Phase, PhaseSchedule};
use crate::error::{Error, Result};
use crate::neurons::{NeuronState, StepConstants};
use crate::plasticity::{dense_update, local_update, normalize_filter, TraceDecay, TraceState};
use crate::reward::{compute_reward, RewardState};
use crate::scalar::Scalar;

/// What may change while a sample is simulated.
#[derive(Debug)]
pub enum PlasticityMode<'a, T> {
    /// Pure inference: weights and persistent thresholds are left untouched.
    None,
    /// Unsupervised STDP on the LC connection. Only `t_learn` steps are
    /// simulated and the decoder is not run.
    StdpLc,
    /// Reward-modulated STDP on the decoder. The reward compares the decision
    /// with `target`.
    RstdpDecoder {
        target: usize,
        reward: &'a mut RewardState<T>,
    },
}

impl<T> PlasticityMode<'_, T> {
    fn name(&self) -> &'static str {
        match self {
            PlasticityMode::None => "none",
            PlasticityMode::StdpLc => "stdp_lc",
            PlasticityMode::RstdpDecoder { .. } => "rstdp_decoder",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleResult<T> {
    /// Decoder spikes per class group over the decision window.
    pub group_counts: Vec<u32>,
    /// `None` when the decision window is empty or the decoder was not run.
    pub decision: Option<usize>,
    pub reward: Option<T>,
    pub modulation: Option<T>,
    /// LC spikes per neuron over the learning window.
    pub lc_activation: Vec<u32>,
}

/// Read-only view handed to observers after every simulated step.
pub struct StepView<'a, T> {
    pub t: usize,
    pub phase: Phase,
    pub network: &'a Network<T>,
    pub input_spikes: &'a [bool],
    pub lc_spikes: &'a [bool],
    pub lc_potential: &'a [T],
    pub decoder_spikes: &'a [bool],
    pub decoder_potential: &'a [T],
}

/// Simulates one sample on a network that may be trained.
pub fn run_sample<T: Scalar, R: Rng + ?Sized>(
    network: &mut Network<T>,
    image: &[T],
    schedule: &PhaseSchedule,
    rng: &mut R,
    mode: PlasticityMode<'_, T>,
) -> Result<SampleResult<T>> {
    simulate(network, image, schedule, rng, mode, true, &mut |_| {})
}

/// [`run_sample`] with a callback after every step.
pub fn run_sample_observed<T: Scalar, R: Rng + ?Sized>(
    network: &mut Network<T>,
    image: &[T],
    schedule: &PhaseSchedule,
    rng: &mut R,
    mode: PlasticityMode<'_, T>,
    observer: &mut dyn FnMut(&StepView<'_, T>),
) -> Result<SampleResult<T>> {
    simulate(network, image, schedule, rng, mode, true, observer)
}

/// Inference on a shared network.
pub(crate) fn infer<T: Scalar, R: Rng + ?Sized>(
    network: &Network<T>,
    image: &[T],
    schedule: &PhaseSchedule,
    rng: &mut R,
    run_decoder: bool,
) -> Result<SampleResult<T>> {
    simulate(
        network,
        image,
        schedule,
        rng,
        PlasticityMode::None,
        run_decoder,
        &mut |_| {},
    )
}

/// Shared or exclusive access to the network being simulated.
trait Access<T> {
    fn net(&self) -> &Network<T>;
    fn net_mut(&mut self) -> Option<&mut Network<T>>;
}

impl<T> Access<T> for &Network<T> {
    fn net(&self) -> &Network<T> {
        self
    }
    fn net_mut(&mut self) -> Option<&mut Network<T>> {
        None
    }
}

impl<T> Access<T> for &mut Network<T> {
    fn net(&self) -> &Network<T> {
        self
    }
    fn net_mut(&mut self) -> Option<&mut Network<T>> {
        Some(self)
    }
}

fn check_mode<T: Scalar>(net: &Network<T>, mode: &PlasticityMode<'_, T>, schedule: &PhaseSchedule) -> Result<()> {
    let name = mode.name();
    match mode {
        PlasticityMode::None => Ok(()),
        PlasticityMode::StdpLc => {
            if !net.lc.connection.plastic {
                return Err(Error::PlasticityMode {
                    mode: name,
                    reason: "the LC connection is frozen",
                });
            }
            if net.decoder.connection.plastic {
                return Err(Error::PlasticityMode {
                    mode: name,
                    reason: "the decoder must be frozen while the LC layer trains",
                });
            }
            Ok(())
        }
        PlasticityMode::RstdpDecoder { target, .. } => {
            if !net.decoder.connection.plastic {
                return Err(Error::PlasticityMode {
                    mode: name,
                    reason: "the decoder connection is frozen",
                });
            }
            if net.lc.connection.plastic {
                return Err(Error::PlasticityMode {
                    mode: name,
                    reason: "the LC connection must be frozen while the decoder trains",
                });
            }
            if schedule.t_dec == 0 {
                return Err(Error::param("t_dec", "must be >= 1 when a decision is required"));
            }
            if *target >= net.n_classes() {
                return Err(Error::param("target", "class index out of range"));
            }
            Ok(())
        }
    }
}

fn fired_in(row: &[bool], out: &mut Vec<usize>) {
    out.clear();
    out.extend(row.iter().enumerate().filter(|(_, &s)| s).map(|(i, _)| i));
}

fn simulate<T: Scalar, R: Rng + ?Sized, A: Access<T>>(
    mut access: A,
    image: &[T],
    schedule: &PhaseSchedule,
    rng: &mut R,
    mut mode: PlasticityMode<'_, T>,
    run_decoder: bool,
    observer: &mut dyn FnMut(&StepView<'_, T>),
) -> Result<SampleResult<T>> {
    let net = access.net();
    check_mode(net, &mode, schedule)?;
    if image.len() != net.input_len() {
        return Err(Error::DimensionMismatch {
            what: "image",
            expected: net.input_len(),
            got: image.len(),
        });
    }
    let learn_lc = matches!(mode, PlasticityMode::StdpLc);
    let learn_dec = matches!(mode, PlasticityMode::RstdpDecoder { .. });
    if (learn_lc || learn_dec) && access.net_mut().is_none() {
        return Err(Error::PlasticityMode {
            mode: mode.name(),
            reason: "training needs exclusive access to the network",
        });
    }
    let net = access.net();
    let run_decoder = run_decoder && !learn_lc;
    let (steps, offset) = if learn_lc {
        (schedule.t_learn, schedule.t_adapt + schedule.t_dec)
    } else {
        (schedule.total(), 0)
    };

    let dt = net.dt;
    let raster = net.encoder.encode(image, steps, dt, rng)?;

    let n_in = net.input_len();
    let n_lc = net.lc.n_neurons();
    let n_out = net.decoder.n_out();
    let n_classes = net.n_classes();
    let lc_k = StepConstants::new(&net.lc.neuron, dt);
    let dec_k = StepConstants::new(&net.decoder.neuron, dt);
    let lc_decay = TraceDecay::new(&net.lc.plasticity, dt);
    let dec_decay = TraceDecay::new(&net.decoder.plasticity, dt);
    let lc_scale = net.lc.neuron.resistance;
    let dec_scale = net.decoder.neuron.resistance;

    let mut lc = NeuronState::new(n_lc, &net.lc.neuron);
    lc.g.copy_from_slice(&net.lc.threshold);
    let mut dec = NeuronState::new(if run_decoder { n_out } else { 0 }, &net.decoder.neuron);
    if run_decoder {
        dec.g.copy_from_slice(&net.decoder.threshold);
    }
    let mut lc_traces = TraceState::new(if learn_lc { n_in } else { 0 }, if learn_lc { n_lc } else { 0 });
    let mut dec_traces = TraceState::new(if learn_dec { n_lc } else { 0 }, if learn_dec { n_out } else { 0 });

    let mut lc_in = vec![T::zero(); n_lc];
    let mut dec_in = vec![T::zero(); dec.len()];
    let mut lc_spikes = vec![false; n_lc];
    let mut dec_spikes = vec![false; dec.len()];
    let mut in_fired = Vec::new();
    let mut prev_in_fired: Vec<usize> = Vec::new();
    let mut lc_fired = Vec::new();
    let mut prev_lc_fired: Vec<usize> = Vec::new();
    let mut dec_fired = Vec::new();
    let mut prev_dec_fired: Vec<usize> = Vec::new();
    let mut touched = vec![false; if learn_lc { n_lc } else { 0 }];

    let mut group_counts = vec![0u32; n_classes];
    let mut lc_activation = vec![0u32; n_lc];
    let mut decision = None;
    let mut reward = None;
    let mut modulation = None;
    let decision_end = schedule.t_adapt + schedule.t_dec;

    if learn_lc {
        let net = access.net_mut().expect("checked above");
        if let Some(c) = net.lc.plasticity.c_norm {
            let w_max = net.lc.plasticity.w_max;
            for n in 0..n_lc {
                normalize_filter(net.lc.connection.filter_mut(n), c, w_max);
            }
        }
    }

    for step in 0..steps {
        let t = step + offset;
        let phase = schedule.phase_at(t);
        fired_in(raster.row(step), &mut in_fired);

        {
            let net = access.net();
            lc_in.iter_mut().for_each(|x| *x = T::zero());
            net.lc.connection.forward(&prev_in_fired, lc_scale, &mut lc_in);
            std::mem::swap(&mut prev_lc_fired, &mut lc_fired);
            net.lc.inhibition.apply(&prev_lc_fired, lc_scale, &mut lc_in);
            lc.step_into(&net.lc.neuron, &lc_k, &lc_in, &mut lc_spikes, &mut lc_fired)?;
            if phase == Phase::Learn {
                for &n in &lc_fired {
                    lc_activation[n] += 1;
                }
            }

            if run_decoder {
                dec_in.iter_mut().for_each(|x| *x = T::zero());
                // prev_lc_fired now holds the LC spikes of the previous step.
                net.decoder.connection.forward(&prev_lc_fired, dec_scale, &mut dec_in);
                std::mem::swap(&mut prev_dec_fired, &mut dec_fired);
                net.decoder.inhibition.apply(&prev_dec_fired, dec_scale, &mut dec_in);
                dec.step_into(&net.decoder.neuron, &dec_k, &dec_in, &mut dec_spikes, &mut dec_fired)?;
                if phase == Phase::Decide {
                    for &j in &dec_fired {
                        group_counts[net.decoder.group_of(j)] += 1;
                    }
                }
            }
        }

        if learn_lc {
            let net = access.net_mut().expect("checked above");
            let params = net.lc.plasticity;
            lc_traces.update_sparse(&in_fired, &lc_fired, &params, &lc_decay);
            if !in_fired.is_empty() || !lc_fired.is_empty() {
                touched.iter_mut().for_each(|x| *x = false);
                local_update(
                    &mut net.lc.connection,
                    &lc_traces,
                    &in_fired,
                    &lc_fired,
                    params.gamma,
                    &params,
                    &mut touched,
                );
                if let Some(c) = params.c_norm {
                    for (n, &hit) in touched.iter().enumerate() {
                        if hit {
                            normalize_filter(net.lc.connection.filter_mut(n), c, params.w_max);
                        }
                    }
                }
            }
        }

        if learn_dec {
            let net = access.net_mut().expect("checked above");
            let params = net.decoder.plasticity;
            dec_traces.update_sparse(&lc_fired, &dec_fired, &params, &dec_decay);
            if phase == Phase::Learn {
                let m = modulation.expect("decision precedes learning");
                if m != T::zero() {
                    dense_update(
                        &mut net.decoder.connection,
                        &dec_traces,
                        &lc_fired,
                        &dec_fired,
                        params.gamma * m,
                        &params,
                    );
                }
            }
        }

        if run_decoder && schedule.t_dec > 0 && t + 1 == decision_end {
            let d = decide(&group_counts, rng);
            decision = Some(d);
            if let PlasticityMode::RstdpDecoder { target, reward: state } = &mut mode {
                let r = compute_reward::<T>(d, *target);
                reward = Some(r);
                modulation = Some(state.modulate(r));
            }
        }

        observer(&StepView {
            t,
            phase,
            network: access.net(),
            input_spikes: raster.row(step),
            lc_spikes: &lc_spikes,
            lc_potential: &lc.u,
            decoder_spikes: &dec_spikes,
            decoder_potential: &dec.u,
        });

        std::mem::swap(&mut prev_in_fired, &mut in_fired);
    }

    if let Some(net) = access.net_mut() {
        if learn_lc {
            net.lc.threshold.copy_from_slice(&lc.g);
        }
        if learn_dec {
            net.decoder.threshold.copy_from_slice(&dec.g);
        }
    }

    Ok(SampleResult {
        group_counts,
        decision,
        reward,
        modulation,
        lc_activation,
    })
}
