//! Adaptive leaky integrate-and-fire neurons on a fixed clock.
//!
//! Membrane potentials are integrated with forward Euler,
//! `u += (dt / tau_m) * (u_rest - u) + input`, where `input` is the summed
//! delta-current drive for the step (already scaled by the membrane
//! resistance). The adaptive threshold offset `g` jumps by `g0` on every spike
//! and decays by `exp(-dt / tau_g)` each step.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeuronParams<T> {
    /// Resting potential (mV).
    pub u_rest: T,
    /// Potential after a spike (mV).
    pub u_reset: T,
    /// Baseline firing threshold (mV).
    pub u_thr0: T,
    /// Membrane time constant (ms).
    pub tau_m: T,
    /// Membrane resistance, applied as a scale on synaptic drive.
    pub resistance: T,
    /// Refractory period (ms).
    pub delta_t_ref: T,
    /// Threshold increment per spike (mV).
    pub g0: T,
    /// Threshold decay constant (ms).
    pub tau_g: T,
    pub adaptive: bool,
}

impl<T: Scalar> Default for NeuronParams<T> {
    fn default() -> Self {
        Self {
            u_rest: T::lit(-65.0),
            u_reset: T::lit(-65.0),
            u_thr0: T::lit(-52.0),
            tau_m: T::lit(20.0),
            resistance: T::one(),
            delta_t_ref: T::lit(5.0),
            g0: T::lit(0.05),
            tau_g: T::lit(1e6),
            adaptive: true,
        }
    }
}

impl<T: Scalar> NeuronParams<T> {
    pub fn non_adaptive() -> Self {
        Self {
            adaptive: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_m > T::zero()) {
            return Err(Error::param("tau_m", "must be > 0"));
        }
        if !(self.tau_g > T::zero()) {
            return Err(Error::param("tau_g", "must be > 0"));
        }
        if !(self.delta_t_ref >= T::zero()) {
            return Err(Error::param("delta_t_ref", "must be >= 0"));
        }
        if !(self.g0 >= T::zero()) {
            return Err(Error::param("g0", "must be >= 0"));
        }
        if !(self.u_reset <= self.u_thr0) {
            return Err(Error::param("u_reset", "must not exceed u_thr0"));
        }
        Ok(())
    }

    /// Refractory length in whole steps, `ceil(delta_t_ref / dt)`.
    pub fn refractory_steps(&self, dt: T) -> u32 {
        (self.delta_t_ref / dt).ceil().to_u32().unwrap_or(0)
    }
}

/// Per-step constants derived from `NeuronParams` and `dt`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct StepConstants<T> {
    leak: T,
    g_decay: T,
    refractory_steps: u32,
}

impl<T: Scalar> StepConstants<T> {
    pub(crate) fn new(params: &NeuronParams<T>, dt: T) -> Self {
        Self {
            leak: dt / params.tau_m,
            g_decay: (-dt / params.tau_g).exp(),
            refractory_steps: params.refractory_steps(dt),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeuronState<T> {
    /// Membrane potentials (mV).
    pub u: Vec<T>,
    /// Threshold offsets (mV); the effective threshold is `u_thr0 + g`.
    pub g: Vec<T>,
    /// Remaining refractory steps.
    pub refrac_remaining: Vec<u32>,
}

impl<T: Scalar> NeuronState<T> {
    pub fn new(n: usize, params: &NeuronParams<T>) -> Self {
        Self {
            u: vec![params.u_rest; n],
            g: vec![T::zero(); n],
            refrac_remaining: vec![0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn threshold(&self, params: &NeuronParams<T>, i: usize) -> T {
        params.u_thr0 + self.g[i]
    }

    /// Advances every neuron by one step and returns the spike vector.
    pub fn step(&mut self, params: &NeuronParams<T>, input: &[T], dt: T) -> Result<Vec<bool>> {
        if !(dt > T::zero()) {
            return Err(Error::param("dt", "must be > 0"));
        }
        let mut spikes = vec![false; self.len()];
        let mut fired = Vec::new();
        self.step_into(params, &StepConstants::new(params, dt), input, &mut spikes, &mut fired)?;
        Ok(spikes)
    }

    /// Allocation-free step used by the engine. `spikes` is overwritten and
    /// the indices of spiking neurons are appended to `fired` (cleared first).
    pub(crate) fn step_into(
        &mut self,
        params: &NeuronParams<T>,
        k: &StepConstants<T>,
        input: &[T],
        spikes: &mut [bool],
        fired: &mut Vec<usize>,
    ) -> Result<()> {
        let n = self.len();
        if input.len() != n {
            return Err(Error::DimensionMismatch {
                what: "neuron input",
                expected: n,
                got: input.len(),
            });
        }
        if spikes.len() != n {
            return Err(Error::DimensionMismatch {
                what: "spike buffer",
                expected: n,
                got: spikes.len(),
            });
        }
        fired.clear();
        for i in 0..n {
            let u = self.u[i];
            let relaxed = u + k.leak * (params.u_rest - u);
            let threshold = params.u_thr0 + self.g[i];
            let mut spike = false;
            if self.refrac_remaining[i] > 0 {
                self.refrac_remaining[i] -= 1;
                self.u[i] = relaxed;
            } else {
                let v = relaxed + input[i];
                if v >= threshold {
                    spike = true;
                    self.u[i] = params.u_reset;
                    self.refrac_remaining[i] = k.refractory_steps;
                } else {
                    self.u[i] = v;
                }
            }
            if params.adaptive {
                self.g[i] *= k.g_decay;
                if spike {
                    self.g[i] += params.g0;
                }
            }
            spikes[i] = spike;
            if spike {
                fired.push(i);
            }
        }
        Ok(())
    }

    /// Between-sample reset: potentials to rest and refractory counters cleared.
    /// Threshold adaptation survives unless `hard` is set.
    pub fn reset(&mut self, params: &NeuronParams<T>, hard: bool) {
        self.u.iter_mut().for_each(|u| *u = params.u_rest);
        self.refrac_remaining.iter_mut().for_each(|r| *r = 0);
        if hard {
            self.g.iter_mut().for_each(|g| *g = T::zero());
        }
    }
}
