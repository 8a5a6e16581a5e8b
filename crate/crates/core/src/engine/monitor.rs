use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use crate::scalar::Scalar;
use crate::topology::{DenseConnection, LocalConnection};

/// One decoder-training sample as seen by the monitors.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub iteration: usize,
    /// Dataset index of the presented sample.
    pub sample: usize,
    /// Rewarded class.
    pub target: usize,
    pub decision: usize,
    pub reward: f64,
    pub modulation: f64,
}

impl SampleRecord {
    pub fn correct(&self) -> bool {
        self.decision == self.target
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonitorOptions {
    /// Moving-average window in samples.
    pub window: usize,
}

impl Default for MonitorOptions {
    fn default() -> Self {
        Self { window: 100 }
    }
}

/// Trailing simple moving average; the first `window - 1` entries average
/// over what is available.
pub fn running_mean(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (i, &v) in values.iter().enumerate() {
        sum += v;
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

/// Writes `metrics.csv` (per-sample reward, modulation, running and
/// cumulative accuracy) and `rates.csv` (windowed reward and punishment
/// rates) into `dir`.
pub fn export_monitors(records: &[SampleRecord], dir: &Path, options: &MonitorOptions) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let hits: Vec<f64> = records.iter().map(|r| r.correct() as u8 as f64).collect();
    let rewarded: Vec<f64> = records.iter().map(|r| (r.reward > 0.0) as u8 as f64).collect();
    let running = running_mean(&hits, options.window);
    let reward_rate = running_mean(&rewarded, options.window);

    let mut w = BufWriter::new(fs::File::create(dir.join("metrics.csv"))?);
    writeln!(w, "sample_index,reward,modulation,running_accuracy,cumulative_accuracy")?;
    let mut correct = 0usize;
    for (i, r) in records.iter().enumerate() {
        correct += r.correct() as usize;
        writeln!(
            w,
            "{},{},{},{},{}",
            r.iteration,
            r.reward,
            r.modulation,
            running[i],
            correct as f64 / (i + 1) as f64
        )?;
    }
    w.flush()?;

    let mut w = BufWriter::new(fs::File::create(dir.join("rates.csv"))?);
    writeln!(w, "sample_index,reward_rate,punishment_rate")?;
    for (r, &rate) in records.iter().zip(&reward_rate) {
        writeln!(w, "{},{},{}", r.iteration, rate, 1.0 - rate)?;
    }
    w.flush()
}

/// 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, fill: u8) -> Self {
        Self {
            width,
            height,
            pixels: vec![fill; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    fn set(&mut self, x: usize, y: usize, v: u8) {
        self.pixels[y * self.width + x] = v;
    }
}

fn to_gray<T: Scalar>(w: T, lo: T, hi: T) -> u8 {
    let span = (hi - lo).as_f64();
    let x = if span > 0.0 { (w - lo).as_f64() / span } else { 0.0 };
    (x.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// LC filters as a tile grid: one row group per output channel, one
/// `(ch_in * k) × k` tile per receptive field within it. With `separator`
/// set, tiles are framed by 1-pixel white lines.
pub fn filter_grid<T: Scalar>(conn: &LocalConnection<T>, w_min: T, w_max: T, separator: bool) -> GrayImage {
    let s = &conn.shape;
    let gap = separator as usize;
    let tile_h = s.ch_in * s.k;
    let tile_w = s.k;
    let locs = s.locations();
    let width = locs * (tile_w + gap) + gap;
    let height = s.ch_out * (tile_h + gap) + gap;
    let mut img = GrayImage::new(width, height, if separator { 255 } else { 0 });
    for ch in 0..s.ch_out {
        for loc in 0..locs {
            let filter = conn.filter(ch * locs + loc);
            let x0 = gap + loc * (tile_w + gap);
            let y0 = gap + ch * (tile_h + gap);
            for ci in 0..s.ch_in {
                for ky in 0..s.k {
                    for kx in 0..s.k {
                        let v = to_gray(filter[(ci * s.k + ky) * s.k + kx], w_min, w_max);
                        img.set(x0 + kx, y0 + ci * s.k + ky, v);
                    }
                }
            }
        }
    }
    img
}

/// Decoder weights as an `n_pre × n_post` image (one row per LC neuron).
pub fn decoder_map<T: Scalar>(conn: &DenseConnection<T>, w_min: T, w_max: T) -> GrayImage {
    GrayImage {
        width: conn.n_post,
        height: conn.n_pre,
        pixels: conn.weights.iter().map(|&w| to_gray(w, w_min, w_max)).collect(),
    }
}

/// Binary (P5) portable graymap.
pub fn write_pgm(path: &Path, image: &GrayImage) -> io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    write!(w, "P5\n{} {}\n255\n", image.width, image.height)?;
    w.write_all(&image.pixels)?;
    w.flush()
}
