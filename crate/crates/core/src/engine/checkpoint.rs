//! Binary container of named `f32` arrays, and the network layout on top.
//!
//! ```text
//! magic  "BLCN"
//! u32    format version
//! u32    array count
//! per array:
//!   u32 name length, name bytes (UTF-8)
//!   u32 rank, rank × u32 dims
//!   product(dims) × f32 data
//! ```
//!
//! All integers and floats are little-endian. `f32` networks round-trip bit
//! for bit; `f64` networks are rounded to `f32` on save.

use std::fs;
use std::path::Path;

use super::{DecoderLayer, LcLayer, Network};
use crate::encoding::EncoderParams;
use crate::error::{CheckpointError, Error, Result};
use crate::neurons::NeuronParams;
use crate::plasticity::PlasticityParams;
use crate::scalar::Scalar;
use crate::topology::{
    build_decoder_inhibition, build_lc_inhibition, DenseConnection, InhibitionPattern, LcShape, LocalConnection,
};

pub const MAGIC: [u8; 4] = *b"BLCN";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ArrayStore {
    arrays: Vec<(String, Vec<usize>, Vec<f32>)>,
}

impl ArrayStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, dims: &[usize], data: Vec<f32>) {
        debug_assert_eq!(dims.iter().product::<usize>(), data.len());
        self.arrays.retain(|(n, _, _)| n != name);
        self.arrays.push((name.to_string(), dims.to_vec(), data));
    }

    pub fn insert_scalars<T: Scalar>(&mut self, name: &str, values: &[T]) {
        self.insert(name, &[values.len()], values.iter().map(|v| v.as_f32()).collect());
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.arrays.iter().map(|(n, _, _)| n.as_str())
    }

    pub fn get(&self, name: &str) -> Result<(&[usize], &[f32])> {
        self.arrays
            .iter()
            .find(|(n, _, _)| n == name)
            .map(|(_, d, v)| (d.as_slice(), v.as_slice()))
            .ok_or_else(|| CheckpointError::MissingArray(name.to_string()).into())
    }

    /// Data of `name`, checking that its shape is exactly `dims`.
    pub fn get_shaped(&self, name: &str, dims: &[usize]) -> Result<&[f32]> {
        let (found, data) = self.get(name)?;
        if found != dims {
            return Err(CheckpointError::ShapeMismatch {
                name: name.to_string(),
                expected: dims.to_vec(),
                found: found.to_vec(),
            }
            .into());
        }
        Ok(data)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.arrays.len() as u32).to_le_bytes());
        for (name, dims, data) in &self.arrays {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
            for &d in dims {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for &x in data {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic: [u8; 4] = r.take(4)?.try_into().expect("4 bytes");
        if magic != MAGIC {
            return Err(CheckpointError::BadMagic(magic).into());
        }
        let version = r.u32()?;
        if version > VERSION || version == 0 {
            return Err(CheckpointError::UnsupportedVersion {
                found: version,
                supported: VERSION,
            }
            .into());
        }
        let count = r.u32()? as usize;
        let mut store = Self::new();
        for _ in 0..count {
            let len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| CheckpointError::Malformed("array name is not UTF-8".into()))?
                .to_string();
            let rank = r.u32()? as usize;
            let mut dims = Vec::with_capacity(rank.min(16));
            for _ in 0..rank {
                dims.push(r.u32()? as usize);
            }
            let n = dims
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .ok_or_else(|| CheckpointError::Malformed(format!("array `{name}` is too large")))?;
            let raw = r.take(n.checked_mul(4).ok_or(CheckpointError::Truncated)?)?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            store.arrays.push((name, dims, data));
        }
        if r.pos != bytes.len() {
            return Err(CheckpointError::Malformed("trailing bytes".into()).into());
        }
        Ok(store)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(CheckpointError::Truncated.into());
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

fn flag<T: Scalar>(b: bool) -> T {
    if b {
        T::one()
    } else {
        T::zero()
    }
}

fn neuron_values<T: Scalar>(p: &NeuronParams<T>) -> Vec<T> {
    vec![
        p.u_rest,
        p.u_reset,
        p.u_thr0,
        p.tau_m,
        p.resistance,
        p.delta_t_ref,
        p.g0,
        p.tau_g,
        flag(p.adaptive),
    ]
}

fn neuron_from<T: Scalar>(v: &[f32]) -> NeuronParams<T> {
    let t = |i: usize| T::lit(v[i] as f64);
    NeuronParams {
        u_rest: t(0),
        u_reset: t(1),
        u_thr0: t(2),
        tau_m: t(3),
        resistance: t(4),
        delta_t_ref: t(5),
        g0: t(6),
        tau_g: t(7),
        adaptive: v[8] != 0.0,
    }
}

fn plasticity_values<T: Scalar>(p: &PlasticityParams<T>) -> Vec<T> {
    vec![
        p.eta_pre,
        p.eta_post,
        p.tau_plus,
        p.tau_minus,
        p.gamma,
        p.w_min,
        p.w_max,
        p.c_norm.unwrap_or_else(T::nan),
    ]
}

fn plasticity_from<T: Scalar>(v: &[f32]) -> PlasticityParams<T> {
    let t = |i: usize| T::lit(v[i] as f64);
    PlasticityParams {
        eta_pre: t(0),
        eta_post: t(1),
        tau_plus: t(2),
        tau_minus: t(3),
        gamma: t(4),
        w_min: t(5),
        w_max: t(6),
        c_norm: if v[7].is_nan() { None } else { Some(t(7)) },
    }
}

fn count(v: f32, name: &str) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 && v < 1e9 {
        Ok(v as usize)
    } else {
        Err(CheckpointError::Malformed(format!("`{name}` holds a non-integer size")).into())
    }
}

impl<T: Scalar> Network<T> {
    pub fn to_store(&self, store: &mut ArrayStore) {
        let s = self.lc.shape();
        store.insert_scalars("network.dt", &[self.dt]);
        store.insert_scalars::<T>(
            "network.plastic",
            &[flag(self.lc.connection.plastic), flag(self.decoder.connection.plastic)],
        );
        store.insert_scalars("encoder", &[self.encoder.f_max, self.encoder.intensity_max]);
        store.insert(
            "lc.shape",
            &[6],
            [s.ch_in, s.h_in, s.w_in, s.ch_out, s.k, s.s]
                .iter()
                .map(|&x| x as f32)
                .collect(),
        );
        store.insert_scalars("lc.neuron", &neuron_values(&self.lc.neuron));
        store.insert_scalars("lc.plasticity", &plasticity_values(&self.lc.plasticity));
        store.insert(
            "lc.weights",
            &[s.ch_out, s.h_out, s.w_out, s.ch_in, s.k, s.k],
            self.lc.connection.weights.iter().map(|w| w.as_f32()).collect(),
        );
        store.insert(
            "lc.threshold",
            &[s.ch_out, s.h_out, s.w_out],
            self.lc.threshold.iter().map(|w| w.as_f32()).collect(),
        );
        store.insert_scalars("lc.inhibition", &[self.lc.inhibition.w_inh]);

        let d = &self.decoder;
        let within = matches!(d.inhibition.pattern, InhibitionPattern::Groups { within: true, .. });
        store.insert_scalars("decoder.neuron", &neuron_values(&d.neuron));
        store.insert_scalars("decoder.plasticity", &plasticity_values(&d.plasticity));
        store.insert(
            "decoder.weights",
            &[d.connection.n_pre, d.connection.n_post],
            d.connection.weights.iter().map(|w| w.as_f32()).collect(),
        );
        store.insert(
            "decoder.threshold",
            &[d.n_out()],
            d.threshold.iter().map(|w| w.as_f32()).collect(),
        );
        store.insert(
            "decoder.inhibition",
            &[3],
            vec![d.inhibition.w_inh.as_f32(), d.n_classes as f32, within as u8 as f32],
        );
    }

    pub fn from_store(store: &ArrayStore) -> Result<Self> {
        let lit = |x: f32| T::lit(x as f64);
        let dt = lit(store.get_shaped("network.dt", &[1])?[0]);
        let plastic = store.get_shaped("network.plastic", &[2])?;
        let enc = store.get_shaped("encoder", &[2])?;
        let sv = store.get_shaped("lc.shape", &[6])?;
        let dims: Vec<usize> = sv.iter().map(|&v| count(v, "lc.shape")).collect::<Result<_>>()?;
        let shape = LcShape::new(dims[0], dims[1], dims[2], dims[3], dims[4], dims[5])
            .map_err(|e| CheckpointError::Malformed(format!("lc.shape: {e}")))?;
        let lc_neuron = neuron_from(store.get_shaped("lc.neuron", &[9])?);
        let lc_plasticity = plasticity_from(store.get_shaped("lc.plasticity", &[8])?);
        let lc_w = store.get_shaped(
            "lc.weights",
            &[shape.ch_out, shape.h_out, shape.w_out, shape.ch_in, shape.k, shape.k],
        )?;
        let lc_g = store.get_shaped("lc.threshold", &[shape.ch_out, shape.h_out, shape.w_out])?;
        let lc_inh = lit(store.get_shaped("lc.inhibition", &[1])?[0]);

        let dec_neuron = neuron_from(store.get_shaped("decoder.neuron", &[9])?);
        let dec_plasticity = plasticity_from(store.get_shaped("decoder.plasticity", &[8])?);
        let (wd, _) = store.get("decoder.weights")?;
        if wd.len() != 2 || wd[0] != shape.n_neurons() {
            return Err(CheckpointError::ShapeMismatch {
                name: "decoder.weights".into(),
                expected: vec![shape.n_neurons(), wd.get(1).copied().unwrap_or(0)],
                found: wd.to_vec(),
            }
            .into());
        }
        let n_out = wd[1];
        let dec_w = store.get_shaped("decoder.weights", &[shape.n_neurons(), n_out])?;
        let dec_g = store.get_shaped("decoder.threshold", &[n_out])?;
        let inh = store.get_shaped("decoder.inhibition", &[3])?;
        let n_classes = count(inh[1], "decoder.inhibition")?;

        let to_t = |v: &[f32]| v.iter().map(|&x| lit(x)).collect::<Vec<T>>();
        let mut lc_conn = LocalConnection::from_weights(shape, to_t(lc_w))?;
        lc_conn.plastic = plastic[0] != 0.0;
        let mut dec_conn = DenseConnection::from_weights(shape.n_neurons(), n_out, to_t(dec_w))?;
        dec_conn.plastic = plastic[1] != 0.0;

        let bad = |e: Error| -> Error { CheckpointError::Malformed(e.to_string()).into() };
        let net = Network {
            dt,
            encoder: EncoderParams {
                f_max: lit(enc[0]),
                intensity_max: lit(enc[1]),
            },
            lc: LcLayer {
                neuron: lc_neuron,
                threshold: to_t(lc_g),
                connection: lc_conn,
                inhibition: build_lc_inhibition(&shape, lc_inh).map_err(bad)?,
                plasticity: lc_plasticity,
            },
            decoder: DecoderLayer {
                neuron: dec_neuron,
                threshold: to_t(dec_g),
                connection: dec_conn,
                inhibition: build_decoder_inhibition(n_out, n_classes, lit(inh[0]), inh[2] != 0.0).map_err(bad)?,
                plasticity: dec_plasticity,
                n_classes,
            },
        };
        net.validate().map_err(bad)?;
        Ok(net)
    }
}

pub fn checkpoint_save<T: Scalar>(network: &Network<T>, path: &Path) -> Result<()> {
    let mut store = ArrayStore::new();
    network.to_store(&mut store);
    store.save(path)
}

pub fn checkpoint_load<T: Scalar>(path: &Path) -> Result<Network<T>> {
    Network::from_store(&ArrayStore::load(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::NetworkConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small() -> Network<f32> {
        let c = NetworkConfig::<f32> {
            h_in: 9,
            w_in: 9,
            ch_lc: 3,
            k: 5,
            s: 2,
            n_out: 4,
            n_classes: 2,
            within_group_inhibition: true,
            ..Default::default()
        };
        let mut net = Network::new(&c, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        net.lc.threshold[2] = 0.125;
        net
    }

    #[test]
    fn round_trip_is_exact() {
        let net = small();
        let mut store = ArrayStore::new();
        net.to_store(&mut store);
        let back = Network::<f32>::from_store(&ArrayStore::from_bytes(&store.to_bytes()).unwrap()).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn corrupted_magic() {
        let mut store = ArrayStore::new();
        small().to_store(&mut store);
        let mut b = store.to_bytes();
        b[0] = b'X';
        assert!(matches!(
            ArrayStore::from_bytes(&b),
            Err(Error::Checkpoint(CheckpointError::BadMagic(_)))
        ));
    }

    #[test]
    fn future_version() {
        let mut b = ArrayStore::new().to_bytes();
        b[4..8].copy_from_slice(&2u32.to_le_bytes());
        assert!(matches!(
            ArrayStore::from_bytes(&b),
            Err(Error::Checkpoint(CheckpointError::UnsupportedVersion { found: 2, .. }))
        ));
    }

    #[test]
    fn truncation_detected() {
        let mut store = ArrayStore::new();
        small().to_store(&mut store);
        let b = store.to_bytes();
        for cut in [3, 10, b.len() / 2, b.len() - 1] {
            assert!(ArrayStore::from_bytes(&b[..cut]).is_err(), "cut at {cut}");
        }
    }

    #[test]
    fn shape_mismatch_detected() {
        let mut store = ArrayStore::new();
        small().to_store(&mut store);
        store.insert("lc.threshold", &[2], vec![0.0, 0.0]);
        assert!(matches!(
            Network::<f32>::from_store(&store),
            Err(Error::Checkpoint(CheckpointError::ShapeMismatch { .. }))
        ));
    }
}
