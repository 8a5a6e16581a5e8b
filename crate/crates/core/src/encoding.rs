//! Poisson rate coding of pixel intensities.
//!
//! Each pixel drives an independent Bernoulli process whose per-step spike
//! probability is `(p / intensity_max) * f_max * dt / 1000`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncoderParams<T> {
    /// Maximum firing rate (Hz), reached at full-scale intensity.
    pub f_max: T,
    /// Full-scale pixel value.
    pub intensity_max: T,
}

impl<T: Scalar> Default for EncoderParams<T> {
    fn default() -> Self {
        Self {
            f_max: T::lit(128.0),
            intensity_max: T::lit(255.0),
        }
    }
}

impl<T: Scalar> EncoderParams<T> {
    pub fn validate(&self, dt: T) -> Result<()> {
        if !(self.f_max > T::zero()) {
            return Err(Error::param("f_max", "must be > 0"));
        }
        if !(self.intensity_max > T::zero()) {
            return Err(Error::param("intensity_max", "must be > 0"));
        }
        let p_max = self.f_max * dt / T::lit(1000.0);
        if p_max > T::one() {
            return Err(Error::ProbabilityTooLarge(p_max.as_f64()));
        }
        Ok(())
    }

    /// Per-step spike probability for a single pixel value.
    pub fn probability(&self, pixel: T, dt: T) -> T {
        pixel / self.intensity_max * self.f_max * dt / T::lit(1000.0)
    }

    /// Per-step probabilities for a whole image, validating the range.
    pub fn probabilities(&self, pixels: &[T], dt: T) -> Result<Vec<T>> {
        self.validate(dt)?;
        pixels
            .iter()
            .enumerate()
            .map(|(index, &p)| {
                if !(p >= T::zero() && p <= self.intensity_max) {
                    return Err(Error::PixelOutOfRange {
                        index,
                        value: p.as_f64(),
                        max: self.intensity_max.as_f64(),
                    });
                }
                Ok(self.probability(p, dt))
            })
            .collect()
    }

    /// Draws a `(duration, pixels.len())` spike record.
    pub fn encode<R: Rng + ?Sized>(&self, pixels: &[T], duration: usize, dt: T, rng: &mut R) -> Result<SpikeRecord> {
        let probs = self.probabilities(pixels, dt)?;
        Ok(encode_probabilities(&probs, duration, rng))
    }
}

/// Bernoulli raster from precomputed per-step probabilities. Zero-probability
/// channels consume no random numbers.
pub fn encode_probabilities<T: Scalar, R: Rng + ?Sized>(probs: &[T], duration: usize, rng: &mut R) -> SpikeRecord {
    let width = probs.len();
    let active: Vec<(usize, f64)> = probs
        .iter()
        .enumerate()
        .filter(|(_, p)| **p > T::zero())
        .map(|(i, p)| (i, p.as_f64()))
        .collect();
    let mut record = SpikeRecord::new(duration, width);
    for t in 0..duration {
        let row = record.row_mut(t);
        for &(i, p) in &active {
            row[i] = rng.gen::<f64>() < p;
        }
    }
    record
}

/// Per-step boolean spike vectors for one neuron group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpikeRecord {
    steps: usize,
    width: usize,
    data: Vec<bool>,
}

impl SpikeRecord {
    pub fn new(steps: usize, width: usize) -> Self {
        Self {
            steps,
            width,
            data: vec![false; steps * width],
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row(&self, t: usize) -> &[bool] {
        &self.data[t * self.width..(t + 1) * self.width]
    }

    pub fn row_mut(&mut self, t: usize) -> &mut [bool] {
        &mut self.data[t * self.width..(t + 1) * self.width]
    }

    /// Total spikes per channel.
    pub fn counts(&self) -> Vec<u32> {
        let mut counts = vec![0u32; self.width];
        for t in 0..self.steps {
            for (c, &s) in counts.iter_mut().zip(self.row(t)) {
                *c += s as u32;
            }
        }
        counts
    }

    pub fn total(&self) -> usize {
        self.data.iter().filter(|&&s| s).count()
    }
}
