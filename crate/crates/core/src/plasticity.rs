//! Spike traces and the STDP / reward-modulated STDP weight rules.
//!
//! The positive trace `p_plus` follows presynaptic spikes (amplitude
//! `eta_post`, decay `tau_plus`) and is harvested when the postsynaptic
//! neuron fires (LTP). The negative trace `p_minus` follows postsynaptic
//! spikes (amplitude `-eta_pre`, decay `tau_minus`) and is harvested when the
//! presynaptic neuron fires (LTD). Traces are updated before the eligibility
//! is read, so a coincident pre/post pair contributes `eta_post - eta_pre`.
//!
//! The dense functions here (`eligibility`, `apply_stdp`, `apply_rstdp`) are
//! the reference formulation. The engine uses the event-driven updates at the
//! bottom of the module, which touch only rows and columns of neurons that
//! fired.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::topology::{DenseConnection, LocalConnection};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlasticityParams<T> {
    /// LTD learning rate.
    pub eta_pre: T,
    /// LTP learning rate.
    pub eta_post: T,
    pub tau_plus: T,
    pub tau_minus: T,
    pub gamma: T,
    pub w_min: T,
    pub w_max: T,
    /// Target mean of each neuron's incoming weights (LC layer only).
    pub c_norm: Option<T>,
}

impl<T: Scalar> PlasticityParams<T> {
    /// Unsupervised STDP rates for the feature layer, with normalization.
    pub fn stdp_default() -> Self {
        Self {
            eta_pre: T::lit(1e-4),
            eta_post: T::lit(1e-2),
            tau_plus: T::lit(20.0),
            tau_minus: T::lit(20.0),
            gamma: T::one(),
            w_min: T::zero(),
            w_max: T::one(),
            c_norm: Some(T::lit(0.25)),
        }
    }

    /// R-STDP rates for the decoding layer.
    pub fn rstdp_default() -> Self {
        Self {
            eta_pre: T::lit(0.1),
            eta_post: T::lit(0.1),
            c_norm: None,
            ..Self::stdp_default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta_pre >= T::zero()) {
            return Err(Error::param("eta_pre", "must be >= 0"));
        }
        if !(self.eta_post >= T::zero()) {
            return Err(Error::param("eta_post", "must be >= 0"));
        }
        if !(self.tau_plus > T::zero()) {
            return Err(Error::param("tau_plus", "must be > 0"));
        }
        if !(self.tau_minus > T::zero()) {
            return Err(Error::param("tau_minus", "must be > 0"));
        }
        if !(self.w_min < self.w_max) {
            return Err(Error::param("w_min", "must be below w_max"));
        }
        if let Some(c) = self.c_norm {
            if !(c > self.w_min && c < self.w_max) {
                return Err(Error::param("c_norm", "must lie strictly inside (w_min, w_max)"));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn clip(&self, w: T) -> T {
        w.max(self.w_min).min(self.w_max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceState<T> {
    /// One per presynaptic neuron, `>= 0`.
    pub p_plus: Vec<T>,
    /// One per postsynaptic neuron, `<= 0`.
    pub p_minus: Vec<T>,
}

impl<T: Scalar> TraceState<T> {
    pub fn new(n_pre: usize, n_post: usize) -> Self {
        Self {
            p_plus: vec![T::zero(); n_pre],
            p_minus: vec![T::zero(); n_post],
        }
    }

    pub fn reset(&mut self) {
        self.p_plus.iter_mut().for_each(|p| *p = T::zero());
        self.p_minus.iter_mut().for_each(|p| *p = T::zero());
    }

    /// Decays both traces by one step and adds the new spikes.
    pub fn update(
        &mut self,
        pre_spikes: &[bool],
        post_spikes: &[bool],
        params: &PlasticityParams<T>,
        dt: T,
    ) -> Result<()> {
        if pre_spikes.len() != self.p_plus.len() {
            return Err(Error::DimensionMismatch {
                what: "presynaptic spikes",
                expected: self.p_plus.len(),
                got: pre_spikes.len(),
            });
        }
        if post_spikes.len() != self.p_minus.len() {
            return Err(Error::DimensionMismatch {
                what: "postsynaptic spikes",
                expected: self.p_minus.len(),
                got: post_spikes.len(),
            });
        }
        let decay = TraceDecay::new(params, dt);
        for (p, &s) in self.p_plus.iter_mut().zip(pre_spikes) {
            *p *= decay.plus;
            if s {
                *p += params.eta_post;
            }
        }
        for (p, &s) in self.p_minus.iter_mut().zip(post_spikes) {
            *p *= decay.minus;
            if s {
                *p -= params.eta_pre;
            }
        }
        Ok(())
    }

    /// Same as [`update`](Self::update) but driven by lists of spiking
    /// indices.
    pub(crate) fn update_sparse(
        &mut self,
        pre_fired: &[usize],
        post_fired: &[usize],
        params: &PlasticityParams<T>,
        decay: &TraceDecay<T>,
    ) {
        self.p_plus.iter_mut().for_each(|p| *p *= decay.plus);
        for &i in pre_fired {
            self.p_plus[i] += params.eta_post;
        }
        self.p_minus.iter_mut().for_each(|p| *p *= decay.minus);
        for &j in post_fired {
            self.p_minus[j] -= params.eta_pre;
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct TraceDecay<T> {
    plus: T,
    minus: T,
}

impl<T: Scalar> TraceDecay<T> {
    pub(crate) fn new(params: &PlasticityParams<T>, dt: T) -> Self {
        Self {
            plus: (-dt / params.tau_plus).exp(),
            minus: (-dt / params.tau_minus).exp(),
        }
    }
}

/// Dense eligibility `xi[i * n_post + j] = p_plus[i] * post[j] + p_minus[j] * pre[i]`.
pub fn eligibility<T: Scalar>(traces: &TraceState<T>, pre_spikes: &[bool], post_spikes: &[bool]) -> Vec<T> {
    let n_pre = traces.p_plus.len();
    let n_post = traces.p_minus.len();
    let mut xi = vec![T::zero(); n_pre * n_post];
    for i in 0..n_pre {
        for j in 0..n_post {
            let mut e = T::zero();
            if post_spikes[j] {
                e += traces.p_plus[i];
            }
            if pre_spikes[i] {
                e += traces.p_minus[j];
            }
            xi[i * n_post + j] = e;
        }
    }
    xi
}

/// `w <- clip(w + gamma * xi)`.
pub fn apply_stdp<T: Scalar>(weights: &mut [T], xi: &[T], params: &PlasticityParams<T>) -> Result<()> {
    check_len(weights, xi)?;
    for (w, &e) in weights.iter_mut().zip(xi) {
        *w = params.clip(*w + params.gamma * e);
    }
    Ok(())
}

/// `w <- clip(w + gamma * modulation * xi)`.
pub fn apply_rstdp<T: Scalar>(weights: &mut [T], xi: &[T], modulation: T, params: &PlasticityParams<T>) -> Result<()> {
    check_len(weights, xi)?;
    let scale = params.gamma * modulation;
    for (w, &e) in weights.iter_mut().zip(xi) {
        *w = params.clip(*w + scale * e);
    }
    Ok(())
}

fn check_len<T>(weights: &[T], xi: &[T]) -> Result<()> {
    if weights.len() != xi.len() {
        return Err(Error::DimensionMismatch {
            what: "eligibility",
            expected: weights.len(),
            got: xi.len(),
        });
    }
    Ok(())
}

/// Rescales one neuron's incoming weights so their mean is `c_norm`.
///
/// Plain multiplicative scaling, except that weights pushed above `w_max` are
/// pinned there and the remainder is redistributed over the others, so the
/// mean target and the clip bounds hold together. Returns `false` (weights
/// untouched) when the filter sums to zero.
pub fn normalize_filter<T: Scalar>(filter: &mut [T], c_norm: T, w_max: T) -> bool {
    let n = filter.len();
    if n == 0 {
        return true;
    }
    let total: T = filter.iter().copied().sum();
    if !(total > T::zero()) {
        return false;
    }
    let target = c_norm * T::lit(n as f64);
    let scale = target / total;
    let mut saturated = 0usize;
    for w in filter.iter_mut() {
        *w *= scale;
        if *w > w_max {
            saturated += 1;
        }
    }
    if saturated == 0 {
        return true;
    }
    // Water-filling: pin saturated weights, rescale the rest until stable.
    loop {
        let mut pinned = 0usize;
        let mut free_sum = T::zero();
        for w in filter.iter_mut() {
            if *w >= w_max {
                *w = w_max;
                pinned += 1;
            } else {
                free_sum += *w;
            }
        }
        let remaining = target - w_max * T::lit(pinned as f64);
        if !(free_sum > T::zero()) || !(remaining > T::zero()) {
            return true;
        }
        let scale = remaining / free_sum;
        let mut newly = 0usize;
        for w in filter.iter_mut() {
            if *w < w_max {
                *w *= scale;
                if *w >= w_max {
                    newly += 1;
                }
            }
        }
        if newly == 0 {
            return true;
        }
    }
}

/// Normalizes every LC neuron's incoming weights. Returns the number of
/// neurons left unscaled because their incoming weights were all zero.
pub fn normalize_incoming<T: Scalar>(connection: &mut LocalConnection<T>, c_norm: T, w_max: T) -> usize {
    let n = connection.shape.n_neurons();
    let mut degenerate = 0;
    for neuron in 0..n {
        if !normalize_filter(connection.filter_mut(neuron), c_norm, w_max) {
            degenerate += 1;
        }
    }
    degenerate
}

/// Event-driven modulated update of a local connection: LTP along the
/// filters of spiking LC neurons, LTD on every synapse leaving a spiking
/// input. Changed filters are flagged in `touched` and clipped.
pub(crate) fn local_update<T: Scalar>(
    conn: &mut LocalConnection<T>,
    traces: &TraceState<T>,
    pre_fired: &[usize],
    post_fired: &[usize],
    scale: T,
    params: &PlasticityParams<T>,
    touched: &mut [bool],
) {
    if pre_fired.is_empty() && post_fired.is_empty() {
        return;
    }
    for &n in post_fired {
        conn.add_to_incoming(n, &traces.p_plus, scale);
        touched[n] = true;
    }
    for &i in pre_fired {
        conn.add_to_outgoing(i, &traces.p_minus, scale);
        conn.mark_outgoing(i, touched);
    }
    for (n, &t) in touched.iter().enumerate() {
        if t {
            for w in conn.filter_mut(n) {
                *w = params.clip(*w);
            }
        }
    }
}

/// Event-driven modulated update of a dense connection. Only rows of spiking
/// presynaptic neurons and columns of spiking postsynaptic neurons change, so
/// only those are clipped.
pub(crate) fn dense_update<T: Scalar>(
    conn: &mut DenseConnection<T>,
    traces: &TraceState<T>,
    pre_fired: &[usize],
    post_fired: &[usize],
    scale: T,
    params: &PlasticityParams<T>,
) {
    if pre_fired.is_empty() && post_fired.is_empty() {
        return;
    }
    let n_post = conn.n_post;
    for &i in pre_fired {
        let row = &mut conn.weights[i * n_post..(i + 1) * n_post];
        for (w, &p) in row.iter_mut().zip(&traces.p_minus) {
            *w += scale * p;
        }
    }
    for &j in post_fired {
        for (i, &p) in traces.p_plus.iter().enumerate() {
            conn.weights[i * n_post + j] += scale * p;
        }
    }
    for &i in pre_fired {
        for w in &mut conn.weights[i * n_post..(i + 1) * n_post] {
            *w = params.clip(*w);
        }
    }
    for &j in post_fired {
        for i in 0..conn.n_pre {
            let w = &mut conn.weights[i * n_post + j];
            *w = params.clip(*w);
        }
    }
}
