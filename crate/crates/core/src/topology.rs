//! Connection blocks: locally connected filters (one independent filter per
//! channel and receptive field), dense decoding weights and static inhibitory
//! wiring.
//!
//! Index conventions used throughout the crate:
//!
//! * input pixel `(ci, y, x)` → `(ci * h_in + y) * w_in + x`
//! * LC neuron `(ch, r, c)` → `(ch * h_out + r) * w_out + c`
//! * LC weight `(ch, r, c, ci, ky, kx)` → `neuron * fan_in + (ci * k + ky) * k + kx`
//! * dense weight `(pre, post)` → `pre * n_post + post`

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `(h_out, w_out)` of a square, unpadded local connection.
pub fn lc_output_shape(h_in: usize, w_in: usize, k: usize, s: usize) -> Result<(usize, usize)> {
    if k == 0 {
        return Err(Error::param("k", "kernel size must be >= 1"));
    }
    if s == 0 {
        return Err(Error::param("s", "stride must be >= 1"));
    }
    if k > h_in || k > w_in {
        return Err(Error::param(
            "k",
            format!("kernel size {k} exceeds input extent {h_in}x{w_in}"),
        ));
    }
    Ok(((h_in - k) / s + 1, (w_in - k) / s + 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LcShape {
    pub ch_in: usize,
    pub h_in: usize,
    pub w_in: usize,
    pub ch_out: usize,
    pub k: usize,
    pub s: usize,
    pub h_out: usize,
    pub w_out: usize,
}

impl LcShape {
    pub fn new(ch_in: usize, h_in: usize, w_in: usize, ch_out: usize, k: usize, s: usize) -> Result<Self> {
        if ch_in == 0 {
            return Err(Error::param("ch_in", "must be >= 1"));
        }
        if ch_out == 0 {
            return Err(Error::param("ch_lc", "must be >= 1"));
        }
        let (h_out, w_out) = lc_output_shape(h_in, w_in, k, s)?;
        Ok(Self {
            ch_in,
            h_in,
            w_in,
            ch_out,
            k,
            s,
            h_out,
            w_out,
        })
    }

    pub fn n_inputs(&self) -> usize {
        self.ch_in * self.h_in * self.w_in
    }

    pub fn locations(&self) -> usize {
        self.h_out * self.w_out
    }

    pub fn n_neurons(&self) -> usize {
        self.ch_out * self.locations()
    }

    pub fn fan_in(&self) -> usize {
        self.ch_in * self.k * self.k
    }

    pub fn n_weights(&self) -> usize {
        self.n_neurons() * self.fan_in()
    }

    #[inline]
    pub fn neuron_index(&self, ch: usize, r: usize, c: usize) -> usize {
        (ch * self.h_out + r) * self.w_out + c
    }

    /// `(ch, r, c)` of an LC neuron.
    #[inline]
    pub fn neuron_coords(&self, n: usize) -> (usize, usize, usize) {
        let c = n % self.w_out;
        let r = (n / self.w_out) % self.h_out;
        (n / self.locations(), r, c)
    }

    #[inline]
    pub fn input_index(&self, ci: usize, y: usize, x: usize) -> usize {
        (ci * self.h_in + y) * self.w_in + x
    }

    #[inline]
    pub fn input_coords(&self, i: usize) -> (usize, usize, usize) {
        let x = i % self.w_in;
        let y = (i / self.w_in) % self.h_in;
        (i / (self.h_in * self.w_in), y, x)
    }

    /// Receptive-field rows (or columns) whose window covers coordinate `y`.
    #[inline]
    fn covering(&self, y: usize, out: usize) -> std::ops::Range<usize> {
        let lo = if y + 1 > self.k {
            (y + 1 - self.k).div_ceil(self.s)
        } else {
            0
        };
        let hi = (y / self.s + 1).min(out);
        lo..hi.max(lo)
    }

    /// Calls `f(neuron_without_channel_offset, offset_in_filter)` for every
    /// receptive field covering input `i`. The LC neuron for channel `ch` is
    /// `ch * locations + loc`.
    #[inline]
    fn for_each_cover(&self, i: usize, mut f: impl FnMut(usize, usize)) {
        let (ci, y, x) = self.input_coords(i);
        for r in self.covering(y, self.h_out) {
            let ky = y - r * self.s;
            for c in self.covering(x, self.w_out) {
                let kx = x - c * self.s;
                f(r * self.w_out + c, (ci * self.k + ky) * self.k + kx);
            }
        }
    }
}

/// Locally connected weights: every (channel, receptive field) pair owns its
/// own `ch_in × k × k` filter.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalConnection<T> {
    pub shape: LcShape,
    pub weights: Vec<T>,
    pub plastic: bool,
}

impl<T: Scalar> LocalConnection<T> {
    pub fn uniform<R: Rng + ?Sized>(shape: LcShape, rng: &mut R) -> Self {
        let weights = (0..shape.n_weights()).map(|_| T::lit(rng.gen::<f64>())).collect();
        Self {
            shape,
            weights,
            plastic: true,
        }
    }

    pub fn from_weights(shape: LcShape, weights: Vec<T>) -> Result<Self> {
        if weights.len() != shape.n_weights() {
            return Err(Error::DimensionMismatch {
                what: "local connection weights",
                expected: shape.n_weights(),
                got: weights.len(),
            });
        }
        Ok(Self {
            shape,
            weights,
            plastic: true,
        })
    }

    pub fn filter(&self, neuron: usize) -> &[T] {
        let f = self.shape.fan_in();
        &self.weights[neuron * f..(neuron + 1) * f]
    }

    pub fn filter_mut(&mut self, neuron: usize) -> &mut [T] {
        let f = self.shape.fan_in();
        &mut self.weights[neuron * f..(neuron + 1) * f]
    }

    #[allow(clippy::too_many_arguments)]
    pub fn weight(&self, ch: usize, r: usize, c: usize, ci: usize, ky: usize, kx: usize) -> T {
        let k = self.shape.k;
        self.filter(self.shape.neuron_index(ch, r, c))[(ci * k + ky) * k + kx]
    }

    /// Adds `scale * w` to `out[neuron]` for every synapse leaving each input
    /// listed in `active`.
    pub fn forward(&self, active: &[usize], scale: T, out: &mut [T]) {
        let shape = &self.shape;
        let locs = shape.locations();
        let fan = shape.fan_in();
        for &i in active {
            shape.for_each_cover(i, |loc, off| {
                for ch in 0..shape.ch_out {
                    let n = ch * locs + loc;
                    out[n] += scale * self.weights[n * fan + off];
                }
            });
        }
    }

    /// Adds `scale * per_post[n]` to every synapse leaving input `i`.
    pub(crate) fn add_to_outgoing(&mut self, i: usize, per_post: &[T], scale: T) {
        let shape = self.shape;
        let locs = shape.locations();
        let fan = shape.fan_in();
        let w = &mut self.weights;
        shape.for_each_cover(i, |loc, off| {
            for ch in 0..shape.ch_out {
                let n = ch * locs + loc;
                w[n * fan + off] += scale * per_post[n];
            }
        });
    }

    /// Adds `scale * per_pre[input]` to every synapse entering neuron `n`.
    pub(crate) fn add_to_incoming(&mut self, n: usize, per_pre: &[T], scale: T) {
        let shape = self.shape;
        let (_, r, c) = shape.neuron_coords(n);
        let k = shape.k;
        let filter = self.filter_mut(n);
        for ci in 0..shape.ch_in {
            for ky in 0..k {
                let row = shape.input_index(ci, r * shape.s + ky, c * shape.s);
                let dst = &mut filter[(ci * k + ky) * k..(ci * k + ky + 1) * k];
                for (w, &p) in dst.iter_mut().zip(&per_pre[row..row + k]) {
                    *w += scale * p;
                }
            }
        }
    }

    /// Flags every LC neuron with a synapse from input `i`.
    pub(crate) fn mark_outgoing(&self, i: usize, touched: &mut [bool]) {
        let shape = &self.shape;
        let locs = shape.locations();
        shape.for_each_cover(i, |loc, _| {
            for ch in 0..shape.ch_out {
                touched[ch * locs + loc] = true;
            }
        });
    }

    /// Input index feeding weight `off` of neuron `n`.
    pub fn presynaptic_input(&self, n: usize, off: usize) -> usize {
        let s = &self.shape;
        let (_, r, c) = s.neuron_coords(n);
        let kx = off % s.k;
        let ky = (off / s.k) % s.k;
        let ci = off / (s.k * s.k);
        s.input_index(ci, r * s.s + ky, c * s.s + kx)
    }
}

/// All-to-all weights from `n_pre` to `n_post` neurons, pre-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseConnection<T> {
    pub n_pre: usize,
    pub n_post: usize,
    pub weights: Vec<T>,
    pub plastic: bool,
}

impl<T: Scalar> DenseConnection<T> {
    pub fn uniform<R: Rng + ?Sized>(n_pre: usize, n_post: usize, rng: &mut R) -> Self {
        let weights = (0..n_pre * n_post).map(|_| T::lit(rng.gen::<f64>())).collect();
        Self {
            n_pre,
            n_post,
            weights,
            plastic: true,
        }
    }

    pub fn from_weights(n_pre: usize, n_post: usize, weights: Vec<T>) -> Result<Self> {
        if weights.len() != n_pre * n_post {
            return Err(Error::DimensionMismatch {
                what: "dense connection weights",
                expected: n_pre * n_post,
                got: weights.len(),
            });
        }
        Ok(Self {
            n_pre,
            n_post,
            weights,
            plastic: true,
        })
    }

    #[inline]
    pub fn weight(&self, pre: usize, post: usize) -> T {
        self.weights[pre * self.n_post + post]
    }

    pub fn row(&self, pre: usize) -> &[T] {
        &self.weights[pre * self.n_post..(pre + 1) * self.n_post]
    }

    pub fn forward(&self, active: &[usize], scale: T, out: &mut [T]) {
        for &i in active {
            for (o, &w) in out.iter_mut().zip(self.row(i)) {
                *o += scale * w;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InhibitionPattern {
    /// No inhibitory pairs among `n` neurons.
    Empty { n: usize },
    /// Neurons `ch * locations + loc` inhibit every other channel at the
    /// same location.
    SharedLocation { channels: usize, locations: usize },
    /// Contiguous groups of `group_size`; `between` wires every pair from
    /// different groups, `within` every distinct pair inside a group.
    Groups {
        group_size: usize,
        groups: usize,
        between: bool,
        within: bool,
    },
}

/// Static inhibitory wiring: a symmetric, self-free set of ordered pairs with
/// one shared negative weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InhibitionMask<T> {
    pub w_inh: T,
    pub pattern: InhibitionPattern,
}

fn check_w_inh<T: Scalar>(w_inh: T) -> Result<()> {
    if !(w_inh < T::zero()) {
        return Err(Error::param("w_inh", "inhibitory weight must be negative"));
    }
    Ok(())
}

/// Cross-channel inhibition between LC neurons sharing a receptive field.
pub fn build_lc_inhibition<T: Scalar>(shape: &LcShape, w_inh: T) -> Result<InhibitionMask<T>> {
    check_w_inh(w_inh)?;
    Ok(InhibitionMask {
        w_inh,
        pattern: InhibitionPattern::SharedLocation {
            channels: shape.ch_out,
            locations: shape.locations(),
        },
    })
}

/// Inhibition between decoder neurons of different class groups, optionally
/// also inside each group.
pub fn build_decoder_inhibition<T: Scalar>(
    n_out: usize,
    n_c: usize,
    w_inh: T,
    within_group: bool,
) -> Result<InhibitionMask<T>> {
    check_w_inh(w_inh)?;
    if n_c == 0 || n_out % n_c != 0 {
        return Err(Error::param(
            "n_out",
            format!("{n_out} neurons cannot be split into {n_c} equal groups"),
        ));
    }
    Ok(InhibitionMask {
        w_inh,
        pattern: InhibitionPattern::Groups {
            group_size: n_out / n_c,
            groups: n_c,
            between: true,
            within: within_group,
        },
    })
}

impl<T: Scalar> InhibitionMask<T> {
    pub fn n_neurons(&self) -> usize {
        match self.pattern {
            InhibitionPattern::Empty { n } => n,
            InhibitionPattern::SharedLocation { channels, locations } => channels * locations,
            InhibitionPattern::Groups { group_size, groups, .. } => group_size * groups,
        }
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        let n = self.n_neurons();
        if i == j || i >= n || j >= n {
            return false;
        }
        match self.pattern {
            InhibitionPattern::Empty { .. } => false,
            InhibitionPattern::SharedLocation { locations, .. } => i % locations == j % locations,
            InhibitionPattern::Groups {
                group_size,
                between,
                within,
                ..
            } => {
                if i / group_size == j / group_size {
                    within
                } else {
                    between
                }
            }
        }
    }

    /// Number of ordered pairs.
    pub fn len(&self) -> usize {
        match self.pattern {
            InhibitionPattern::Empty { .. } => 0,
            InhibitionPattern::SharedLocation { channels, locations } => {
                locations * channels * channels.saturating_sub(1)
            }
            InhibitionPattern::Groups {
                group_size,
                groups,
                between,
                within,
            } => {
                let n = group_size * groups;
                let mut total = 0;
                if between {
                    total += n * (n - group_size);
                }
                if within {
                    total += n * group_size.saturating_sub(1);
                }
                total
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every ordered `(source, target)` pair. Quadratic; intended for tests
    /// and inspection, not the simulation loop.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n_neurons();
        (0..n).flat_map(move |i| (0..n).filter(move |&j| self.contains(i, j)).map(move |j| (i, j)))
    }

    /// Adds `scale * w_inh` to `out[j]` once for every spiking `i` with
    /// `(i, j)` in the mask. `fired` lists the spiking neurons.
    pub fn apply(&self, fired: &[usize], scale: T, out: &mut [T]) {
        if fired.is_empty() {
            return;
        }
        let w = scale * self.w_inh;
        match self.pattern {
            InhibitionPattern::Empty { .. } => {}
            InhibitionPattern::SharedLocation { channels, locations } => {
                let mut per_loc = vec![0usize; locations];
                for &i in fired {
                    per_loc[i % locations] += 1;
                }
                let mut own = vec![false; channels * locations];
                for &i in fired {
                    own[i] = true;
                }
                for (j, o) in out.iter_mut().enumerate().take(channels * locations) {
                    let count = per_loc[j % locations] - own[j] as usize;
                    if count > 0 {
                        *o += w * T::lit(count as f64);
                    }
                }
            }
            InhibitionPattern::Groups {
                group_size,
                groups,
                between,
                within,
            } => {
                let mut per_group = vec![0usize; groups];
                for &i in fired {
                    per_group[i / group_size] += 1;
                }
                let total = fired.len();
                let mut own = vec![false; group_size * groups];
                for &i in fired {
                    own[i] = true;
                }
                for (j, o) in out.iter_mut().enumerate().take(group_size * groups) {
                    let g = j / group_size;
                    let mut count = 0;
                    if between {
                        count += total - per_group[g];
                    }
                    if within {
                        count += per_group[g] - own[j] as usize;
                    }
                    if count > 0 {
                        *o += w * T::lit(count as f64);
                    }
                }
            }
        }
    }
}

/// Neuron and plastic-synapse totals for an architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParameterCount {
    /// Input + LC + decoder neurons.
    pub n_neurons: usize,
    /// Plastic excitatory synapses (LC filters + dense decoder).
    pub n_synapses: usize,
}

impl ParameterCount {
    pub fn for_architecture(shape: &LcShape, n_out: usize) -> Self {
        let n_lc = shape.n_neurons();
        Self {
            n_neurons: shape.n_inputs() + n_lc + n_out,
            n_synapses: shape.n_weights() + n_lc * n_out,
        }
    }
}

pub fn count_parameters<T: Scalar>(network: &crate::engine::Network<T>) -> ParameterCount {
    ParameterCount::for_architecture(&network.lc.shape(), network.decoder.n_out())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    #[test]
    fn output_shapes() {
        assert_eq!(lc_output_shape(22, 22, 15, 4).unwrap(), (2, 2));
        assert_eq!(lc_output_shape(22, 22, 13, 3).unwrap(), (4, 4));
        assert_eq!(lc_output_shape(7, 7, 7, 3).unwrap(), (1, 1));
        assert_eq!(lc_output_shape(40, 40, 32, 4).unwrap(), (3, 3));
        assert!(lc_output_shape(22, 22, 23, 1).is_err());
        assert!(lc_output_shape(22, 22, 3, 0).is_err());
    }

    #[test]
    fn lc_inhibition_counts() {
        let one = LcShape::new(1, 5, 5, 2, 5, 1).unwrap();
        let mask = build_lc_inhibition(&one, -100.0f64).unwrap();
        assert_eq!(mask.len(), 2);
        assert_eq!(mask.pairs().count(), 2);

        let big = LcShape::new(1, 22, 22, 100, 15, 4).unwrap();
        assert_eq!(build_lc_inhibition(&big, -100.0f64).unwrap().len(), 39600);

        let single = LcShape::new(1, 22, 22, 1, 15, 4).unwrap();
        let mask = build_lc_inhibition(&single, -100.0f64).unwrap();
        assert!(mask.is_empty());
        assert_eq!(mask.pairs().count(), 0);
    }

    #[test]
    fn decoder_inhibition_counts() {
        let m = build_decoder_inhibition(4, 2, -100.0f64, false).unwrap();
        let pairs: HashSet<_> = m.pairs().collect();
        let expected: HashSet<_> = [(0, 2), (0, 3), (1, 2), (1, 3), (2, 0), (3, 0), (2, 1), (3, 1)]
            .into_iter()
            .collect();
        assert_eq!(pairs, expected);
        assert_eq!(m.len(), 8);
        assert!(build_decoder_inhibition(10, 1, -1.0f64, false).unwrap().is_empty());
        assert_eq!(build_decoder_inhibition(20, 2, -1.0f64, false).unwrap().len(), 200);
        let full = build_decoder_inhibition(20, 2, -1.0f64, true).unwrap();
        assert_eq!(full.len(), 20 * 19);
        assert_eq!(full.pairs().count(), 20 * 19);
        assert!(build_decoder_inhibition(10, 3, -1.0f64, false).is_err());
        assert!(build_decoder_inhibition(10, 2, 1.0f64, false).is_err());
    }

    #[test]
    fn parameter_counts_match_reported_architectures() {
        let s = LcShape::new(1, 22, 22, 100, 13, 3).unwrap();
        assert_eq!(ParameterCount::for_architecture(&s, 100).n_synapses, 430400);
        let s = LcShape::new(1, 22, 22, 100, 15, 4).unwrap();
        assert_eq!(ParameterCount::for_architecture(&s, 1000).n_synapses, 490000);
        assert_eq!(ParameterCount::for_architecture(&s, 1000).n_neurons, 1884);
        assert_eq!(ParameterCount::for_architecture(&s, 100).n_neurons, 984);
        assert_eq!(ParameterCount::for_architecture(&s, 100).n_synapses, 130000);
    }

    fn brute_force_lc(conn: &LocalConnection<f64>, spikes: &[bool]) -> Vec<f64> {
        let s = conn.shape;
        let mut out = vec![0.0; s.n_neurons()];
        for ch in 0..s.ch_out {
            for r in 0..s.h_out {
                for c in 0..s.w_out {
                    let mut acc = 0.0;
                    for ci in 0..s.ch_in {
                        for ky in 0..s.k {
                            for kx in 0..s.k {
                                let i = s.input_index(ci, r * s.s + ky, c * s.s + kx);
                                if spikes[i] {
                                    acc += conn.weight(ch, r, c, ci, ky, kx);
                                }
                            }
                        }
                    }
                    out[s.neuron_index(ch, r, c)] = acc;
                }
            }
        }
        out
    }

    proptest! {
        #[test]
        fn lc_forward_matches_per_field_dot_product(
            seed in any::<u64>(),
            ch_in in 1usize..3,
            ch_out in 1usize..4,
            k in 1usize..7,
            s in 1usize..4,
            density in 0.0f64..1.0,
        ) {
            let shape = LcShape::new(ch_in, 6, 6, ch_out, k, s).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let conn = LocalConnection::<f64>::uniform(shape, &mut rng);
            let spikes: Vec<bool> = (0..shape.n_inputs()).map(|_| rng.gen::<f64>() < density).collect();
            let active: Vec<usize> = (0..spikes.len()).filter(|&i| spikes[i]).collect();
            let mut out = vec![0.0; shape.n_neurons()];
            conn.forward(&active, 1.0, &mut out);
            let expected = brute_force_lc(&conn, &spikes);
            for (a, b) in out.iter().zip(&expected) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn filters_are_independent(seed in any::<u64>(), n in 0usize..16, delta in 0.01f64..1.0) {
            let shape = LcShape::new(1, 6, 6, 4, 3, 3).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut conn = LocalConnection::<f64>::uniform(shape, &mut rng);
            let before = conn.clone();
            for w in conn.filter_mut(n) {
                *w += delta;
            }
            for m in 0..shape.n_neurons() {
                if m != n {
                    prop_assert_eq!(conn.filter(m), before.filter(m));
                } else {
                    prop_assert_ne!(conn.filter(m), before.filter(m));
                }
            }
        }

        #[test]
        fn inhibition_apply_matches_pairs(
            seed in any::<u64>(),
            use_lc in any::<bool>(),
            within in any::<bool>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mask = if use_lc {
                let shape = LcShape::new(1, 8, 8, 3, 4, 2).unwrap();
                build_lc_inhibition(&shape, -7.0f64).unwrap()
            } else {
                build_decoder_inhibition(12, 3, -7.0f64, within).unwrap()
            };
            let n = mask.n_neurons();
            let fired: Vec<usize> = (0..n).filter(|_| rng.gen::<f64>() < 0.3).collect();
            let mut fast = vec![0.0; n];
            mask.apply(&fired, 1.0, &mut fast);
            let mut slow = vec![0.0; n];
            for (i, j) in mask.pairs() {
                prop_assert!(i != j);
                prop_assert!(mask.contains(j, i));
                if fired.contains(&i) {
                    slow[j] += mask.w_inh;
                }
            }
            prop_assert_eq!(mask.pairs().count(), mask.len());
            for (a, b) in fast.iter().zip(&slow) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn lc_inhibition_stays_inside_fields(ch in 1usize..5) {
            let shape = LcShape::new(1, 10, 10, ch, 4, 3).unwrap();
            let mask = build_lc_inhibition(&shape, -1.0f64).unwrap();
            for (i, j) in mask.pairs() {
                let (_, ri, ci) = shape.neuron_coords(i);
                let (_, rj, cj) = shape.neuron_coords(j);
                prop_assert_eq!((ri, ci), (rj, cj));
            }
        }
    }
}
