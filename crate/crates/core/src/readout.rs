//! Linear baseline on LC spike counts: feature extraction from the frozen
//! feature layer and a one-vs-rest hinge-loss classifier trained by
//! averaged stochastic subgradient descent (Pegasos).

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::Dataset;
use crate::engine::{sample_rng, Network, PhaseSchedule, Stream};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// LC spike counts per neuron over `t_learn` steps, after `t_adapt` steps of
/// settling. The decoder is not simulated.
pub fn extract_features<T: Scalar, R: Rng + ?Sized>(
    network: &Network<T>,
    image: &[T],
    schedule: &PhaseSchedule,
    rng: &mut R,
) -> Result<Vec<u32>> {
    if network.lc.connection.plastic {
        return Err(Error::PlasticityMode {
            mode: "none",
            reason: "feature extraction requires a frozen LC connection",
        });
    }
    let window = PhaseSchedule::new(schedule.t_adapt, 0, schedule.t_learn);
    Ok(crate::engine::infer(network, image, &window, rng, false)?.lc_activation)
}

/// Features for every sample, in parallel. Sample `i` draws from
/// `sample_rng(seed, stream, i)`.
pub fn extract_dataset_features<T: Scalar>(
    network: &Network<T>,
    dataset: &Dataset,
    schedule: &PhaseSchedule,
    seed: u64,
    stream: Stream,
) -> Result<Vec<Vec<u32>>> {
    crate::engine::check_dataset(network, dataset)?;
    (0..dataset.len())
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, stream, i as u64);
            extract_features(network, &dataset.image_scalar::<T>(i), schedule, &mut rng)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearParams {
    /// L2 regularization strength.
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for LinearParams {
    fn default() -> Self {
        Self {
            lambda: 1e-4,
            epochs: 20,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub n_classes: usize,
    pub n_features: usize,
    /// Class-major, `n_classes × n_features`, in standardized units.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    /// Per-feature mean removed before scoring.
    pub mean: Vec<f64>,
    /// Per-feature `1 / std`, zero for constant features.
    pub scale: Vec<f64>,
    pub params: LinearParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    /// Mean regularized hinge loss over each epoch, summed over classes.
    pub epoch_loss: Vec<f64>,
}

fn standardizer(features: &[Vec<f64>], d: usize) -> (Vec<f64>, Vec<f64>) {
    let n = features.len() as f64;
    let mut mean = vec![0.0; d];
    for f in features {
        for (m, &x) in mean.iter_mut().zip(f) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; d];
    for f in features {
        for ((v, &x), &m) in var.iter_mut().zip(f).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    let scale = var
        .iter()
        .map(|&v| {
            let sd = (v / n).sqrt();
            if sd > 1e-12 {
                1.0 / sd
            } else {
                0.0
            }
        })
        .collect();
    (mean, scale)
}

/// Fits one hinge-loss classifier per class. The bias is treated as the
/// weight of a constant input and regularized with the rest.
pub fn train_linear(features: &[Vec<f64>], labels: &[usize], params: &LinearParams) -> Result<(LinearModel, TrainLog)> {
    if features.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            what: "labels",
            expected: features.len(),
            got: labels.len(),
        });
    }
    if features.is_empty() {
        return Err(Error::Dataset("no training samples".into()));
    }
    if !(params.lambda > 0.0) {
        return Err(Error::param("lambda", "must be > 0"));
    }
    let d = features[0].len();
    if let Some(bad) = features.iter().find(|f| f.len() != d) {
        return Err(Error::DimensionMismatch {
            what: "feature vector",
            expected: d,
            got: bad.len(),
        });
    }
    let n_classes = labels.iter().max().map_or(0, |&m| m + 1);
    let mut present = vec![false; n_classes];
    labels.iter().for_each(|&l| present[l] = true);
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(Error::Dataset("linear training needs at least two classes".into()));
    }

    let (mean, scale) = standardizer(features, d);
    let xs: Vec<Vec<f64>> = features
        .iter()
        .map(|f| {
            f.iter()
                .zip(&mean)
                .zip(&scale)
                .map(|((&x, &m), &s)| (x - m) * s)
                .chain(std::iter::once(1.0))
                .collect()
        })
        .collect();
    let dim = d + 1;
    let lambda = params.lambda;
    let radius = 1.0 / lambda.sqrt();

    let mut w = vec![0.0; n_classes * dim];
    let mut avg = vec![0.0; n_classes * dim];
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut epoch_loss = Vec::with_capacity(params.epochs);
    let mut t = 0usize;
    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        let mut loss = 0.0;
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let x = &xs[i];
            for c in 0..n_classes {
                let y = if labels[i] == c { 1.0 } else { -1.0 };
                let wc = &mut w[c * dim..(c + 1) * dim];
                let margin = y * dot(wc, x);
                let norm2 = dot(wc, wc);
                loss += 0.5 * lambda * norm2 + (1.0 - margin).max(0.0);
                let shrink = 1.0 - eta * lambda;
                wc.iter_mut().for_each(|v| *v *= shrink);
                if margin < 1.0 {
                    for (v, &xi) in wc.iter_mut().zip(x) {
                        *v += eta * y * xi;
                    }
                }
                let norm = dot(wc, wc).sqrt();
                if norm > radius {
                    let f = radius / norm;
                    wc.iter_mut().for_each(|v| *v *= f);
                }
                let ac = &mut avg[c * dim..(c + 1) * dim];
                let k = 1.0 / t as f64;
                for (a, &v) in ac.iter_mut().zip(wc.iter()) {
                    *a += (v - *a) * k;
                }
            }
        }
        epoch_loss.push(loss / xs.len() as f64);
    }

    let mut weights = Vec::with_capacity(n_classes * d);
    let mut bias = Vec::with_capacity(n_classes);
    for c in 0..n_classes {
        weights.extend_from_slice(&avg[c * dim..c * dim + d]);
        bias.push(avg[c * dim + d]);
    }
    Ok((
        LinearModel {
            n_classes,
            n_features: d,
            weights,
            bias,
            mean,
            scale,
            params: *params,
        },
        TrainLog { epoch_loss },
    ))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl LinearModel {
    /// Per-class scores of a raw (unstandardized) feature vector.
    pub fn scores(&self, feature: &[f64]) -> Result<Vec<f64>> {
        if feature.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                what: "feature vector",
                expected: self.n_features,
                got: feature.len(),
            });
        }
        let z: Vec<f64> = feature
            .iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((&x, &m), &s)| (x - m) * s)
            .collect();
        Ok((0..self.n_classes)
            .map(|c| dot(&self.weights[c * self.n_features..(c + 1) * self.n_features], &z) + self.bias[c])
            .collect())
    }

    pub fn to_store(&self, store: &mut crate::engine::ArrayStore) {
        let f = |v: &[f64]| v.iter().map(|&x| x as f32).collect::<Vec<f32>>();
        store.insert("svm.weights", &[self.n_classes, self.n_features], f(&self.weights));
        store.insert("svm.bias", &[self.n_classes], f(&self.bias));
        store.insert("svm.mean", &[self.n_features], f(&self.mean));
        store.insert("svm.scale", &[self.n_features], f(&self.scale));
        store.insert(
            "svm.params",
            &[4],
            vec![
                self.params.lambda as f32,
                self.params.epochs as f32,
                (self.params.seed & 0xffff) as f32,
                ((self.params.seed >> 16) & 0xffff) as f32,
            ],
        );
    }

    /// Restores a model saved by [`to_store`](Self::to_store). Values pass
    /// through `f32`.
    pub fn from_store(store: &crate::engine::ArrayStore) -> Result<Self> {
        let (dims, w) = store.get("svm.weights")?;
        if dims.len() != 2 {
            return Err(crate::error::CheckpointError::Malformed("svm.weights must be 2-D".into()).into());
        }
        let (c, d) = (dims[0], dims[1]);
        let g = |v: &[f32]| v.iter().map(|&x| x as f64).collect::<Vec<f64>>();
        let p = store.get_shaped("svm.params", &[4])?;
        Ok(Self {
            n_classes: c,
            n_features: d,
            weights: g(w),
            bias: g(store.get_shaped("svm.bias", &[c])?),
            mean: g(store.get_shaped("svm.mean", &[d])?),
            scale: g(store.get_shaped("svm.scale", &[d])?),
            params: LinearParams {
                lambda: p[0] as f64,
                epochs: p[1] as usize,
                seed: p[2] as u64 | ((p[3] as u64) << 16),
            },
        })
    }
}

/// Highest-scoring class; ties go to the lowest index.
pub fn predict(model: &LinearModel, feature: &[f64]) -> Result<usize> {
    let scores = model.scores(feature)?;
    let mut best = 0;
    for (c, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = c;
        }
    }
    Ok(best)
}

/// Fraction of `features` whose prediction equals the label.
pub fn accuracy(model: &LinearModel, features: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    let preds = features
        .par_iter()
        .map(|f| predict(model, f))
        .collect::<Result<Vec<_>>>()?;
    let hits = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / features.len().max(1) as f64)
}

pub fn counts_to_f64(counts: &[Vec<u32>]) -> Vec<Vec<f64>> {
    counts.iter().map(|c| c.iter().map(|&x| x as f64).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..n {
            let c = i % 2;
            let cx = if c == 0 { -5.0 } else { 5.0 };
            xs.push(vec![cx + rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
            ys.push(c);
        }
        (xs, ys)
    }

    fn model(weights: Vec<f64>, n_classes: usize, n_features: usize) -> LinearModel {
        LinearModel {
            n_classes,
            n_features,
            weights,
            bias: vec![0.0; n_classes],
            mean: vec![0.0; n_features],
            scale: vec![1.0; n_features],
            params: LinearParams::default(),
        }
    }

    #[test]
    fn separable_blobs() {
        let (xs, ys) = blobs(200, 1);
        let (m, log) = train_linear(&xs, &ys, &LinearParams::default()).unwrap();
        assert_eq!(accuracy(&m, &xs, &ys).unwrap(), 1.0);
        assert!(log.epoch_loss.last().unwrap() <= &log.epoch_loss[0]);
    }

    #[test]
    fn shuffled_labels_are_chance() {
        let (xs, mut ys) = blobs(400, 2);
        ys.shuffle(&mut ChaCha8Rng::seed_from_u64(9));
        let (m, _) = train_linear(&xs, &ys, &LinearParams::default()).unwrap();
        let (tx, mut ty) = blobs(2000, 3);
        ty.shuffle(&mut ChaCha8Rng::seed_from_u64(10));
        let acc = accuracy(&m, &tx, &ty).unwrap();
        // 4 sigma around 0.5 for 2000 samples.
        assert!((acc - 0.5).abs() < 4.0 * (0.25f64 / 2000.0).sqrt(), "{acc}");
    }

    #[test]
    fn single_class_rejected() {
        let xs = vec![vec![1.0], vec![2.0]];
        assert!(train_linear(&xs, &[0, 0], &LinearParams::default()).is_err());
    }

    #[test]
    fn predict_rules() {
        let m = model(vec![0.2, 0.9], 2, 1);
        assert_eq!(predict(&m, &[1.0]).unwrap(), 1);
        let zero = model(vec![0.0; 6], 3, 2);
        assert_eq!(predict(&zero, &[4.0, 5.0]).unwrap(), 0);
        let eye = model(vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0], 3, 3);
        for k in 0..3 {
            let mut x = vec![0.0; 3];
            x[k] = 1.0;
            assert_eq!(predict(&eye, &x).unwrap(), k);
        }
        assert!(predict(&eye, &[1.0]).is_err());
    }

    #[test]
    fn duplication_keeps_decision_function() {
        let (xs, ys) = blobs(100, 4);
        // Strong regularization so both runs reach the shared minimizer.
        let params = LinearParams {
            lambda: 0.05,
            epochs: 300,
            seed: 0,
        };
        let (a, _) = train_linear(&xs, &ys, &params).unwrap();
        let xs2: Vec<Vec<f64>> = xs.iter().chain(&xs).cloned().collect();
        let ys2: Vec<usize> = ys.iter().chain(&ys).copied().collect();
        let (b, _) = train_linear(&xs2, &ys2, &params).unwrap();
        let (probe, _) = blobs(50, 5);
        for p in &probe {
            let (sa, sb) = (a.scores(p).unwrap(), b.scores(p).unwrap());
            for (x, y) in sa.iter().zip(&sb) {
                assert!((x - y).abs() < 0.05 * (1.0 + x.abs()), "{x} vs {y}");
            }
        }
    }

    #[test]
    fn store_round_trip() {
        let (xs, ys) = blobs(50, 6);
        let (m, _) = train_linear(&xs, &ys, &LinearParams::default()).unwrap();
        let mut store = crate::engine::ArrayStore::new();
        m.to_store(&mut store);
        let back = LinearModel::from_store(&store).unwrap();
        assert_eq!(back.n_features, 2);
        for x in &xs {
            assert_eq!(predict(&back, x).unwrap(), predict(&m, x).unwrap());
        }
    }
}
