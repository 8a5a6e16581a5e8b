//! `key = value` run configuration.

use std::fmt::Write as _;
use std::path::PathBuf;

use biolcnet::{EncoderParams, NetworkConfig, NeuronParams, PhaseSchedule, PlasticityParams, RewardMode, RewardState};

use crate::CliError;

/// Every tunable of a run. Defaults reproduce the best MNIST preset.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub data_dir: Option<PathBuf>,
    pub out_dir: PathBuf,

    pub dt: f32,
    pub u_thr0: f32,
    pub u_rest: f32,
    pub u_reset: f32,
    pub g0: f32,
    pub tau_g: f32,
    pub delta_t_ref: f32,
    pub tau_m: f32,
    pub resistance: f32,
    /// Gain on the LC-to-decoder drive; `resistance` applies to the LC layer.
    pub decoder_resistance: f32,
    pub decoder_adaptive: bool,

    pub f_max: f32,
    pub h_in: usize,
    pub w_in: usize,
    pub n_out: usize,
    pub ch_lc: usize,
    pub k: usize,
    pub s: usize,

    pub t_adapt: usize,
    pub t_dec: usize,
    pub t_learn: usize,

    pub stdp_eta_pre: f32,
    pub stdp_eta_post: f32,
    pub rstdp_eta_pre: f32,
    pub rstdp_eta_post: f32,
    pub tau_plus: f32,
    pub tau_minus: f32,
    pub gamma: f32,
    /// `None` selects static reward modulation.
    pub eta_rpe: Option<f32>,
    /// Reward modulation of the conditioning experiment; `None` is static.
    pub conditioning_eta_rpe: Option<f32>,
    pub alpha: f32,
    pub w_inh: f32,
    pub decoder_w_inh: f32,
    pub within_group_inhibition: bool,
    pub c_norm: f32,

    /// Digit classes used; empty means all ten.
    pub classes: Vec<usize>,
    pub n_lc_samples: usize,
    pub n_decoder_samples: usize,
    /// Test samples evaluated; 0 means the whole test set.
    pub n_test_samples: usize,
    pub monitor_window: usize,

    pub svm_lambda: f64,
    pub svm_epochs: usize,

    pub stimulus_class: usize,
    pub conditioning_groups: usize,
    pub conditioning_iterations: usize,
    pub swap_at: usize,
    pub first_reward_class: usize,

    pub xor_train: usize,
    pub xor_test: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            data_dir: None,
            out_dir: PathBuf::from("runs"),
            dt: 1.0,
            u_thr0: -52.0,
            u_rest: -65.0,
            u_reset: -65.0,
            g0: 0.05,
            tau_g: 1e6,
            delta_t_ref: 5.0,
            tau_m: 20.0,
            resistance: 1.0,
            decoder_resistance: 3.0,
            decoder_adaptive: false,
            f_max: 128.0,
            h_in: 22,
            w_in: 22,
            n_out: 1000,
            ch_lc: 100,
            k: 15,
            s: 4,
            t_adapt: 256,
            t_dec: 256,
            t_learn: 256,
            stdp_eta_pre: 1e-4,
            stdp_eta_post: 1e-2,
            rstdp_eta_pre: 0.1,
            rstdp_eta_post: 0.1,
            tau_plus: 20.0,
            tau_minus: 20.0,
            gamma: 1.0,
            eta_rpe: Some(0.125),
            conditioning_eta_rpe: None,
            alpha: 0.9,
            w_inh: -100.0,
            decoder_w_inh: -100.0,
            within_group_inhibition: false,
            c_norm: 0.25,
            classes: Vec::new(),
            n_lc_samples: 2000,
            n_decoder_samples: 10000,
            n_test_samples: 0,
            monitor_window: 100,
            svm_lambda: 1e-4,
            svm_epochs: 20,
            stimulus_class: 0,
            conditioning_groups: 10,
            conditioning_iterations: 600,
            swap_at: 200,
            first_reward_class: 1,
            xor_train: 10000,
            xor_test: 10000,
        }
    }
}

fn invalid(key: &str, reason: impl Into<String>) -> CliError {
    CliError::Config {
        key: key.to_string(),
        reason: reason.into(),
    }
}

fn num<V: std::str::FromStr>(key: &str, value: &str) -> Result<V, CliError> {
    value
        .parse()
        .map_err(|_| invalid(key, format!("cannot parse `{value}`")))
}

fn boolean(key: &str, value: &str) -> Result<bool, CliError> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(invalid(key, format!("expected true/false, got `{value}`"))),
    }
}

fn rpe(key: &str, value: &str) -> Result<Option<f32>, CliError> {
    if value == "static" {
        Ok(None)
    } else {
        num(key, value).map(Some)
    }
}

macro_rules! fields {
    ($m:ident) => {
        $m! {
            num: dt, u_thr0, u_rest, u_reset, g0, tau_g, delta_t_ref, tau_m, resistance, decoder_resistance, f_max,
                h_in, w_in, n_out, ch_lc, k, s, t_adapt, t_dec, t_learn,
                stdp_eta_pre, stdp_eta_post, rstdp_eta_pre, rstdp_eta_post, tau_plus, tau_minus,
                gamma, alpha, w_inh, decoder_w_inh, c_norm, n_lc_samples, n_decoder_samples,
                n_test_samples, monitor_window, svm_lambda, svm_epochs, stimulus_class,
                conditioning_groups, conditioning_iterations, swap_at, first_reward_class,
                xor_train, xor_test, seed;
            flag: decoder_adaptive, within_group_inhibition
        }
    };
}

impl RunConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let value = value.trim();
        macro_rules! setter {
            (num: $($n:ident),*; flag: $($f:ident),*) => {
                match key {
                    $(stringify!($n) => self.$n = num(key, value)?,)*
                    $(stringify!($f) => self.$f = boolean(key, value)?,)*
                    "data_dir" => self.data_dir = if value.is_empty() { None } else { Some(PathBuf::from(value)) },
                    "out_dir" => self.out_dir = PathBuf::from(value),
                    "eta_rpe" => self.eta_rpe = rpe(key, value)?,
                    "conditioning_eta_rpe" => self.conditioning_eta_rpe = rpe(key, value)?,
                    "classes" => {
                        self.classes = if value == "all" || value.is_empty() {
                            Vec::new()
                        } else {
                            value
                                .split(',')
                                .map(|c| num(key, c.trim()))
                                .collect::<Result<_, _>>()?
                        }
                    }
                    _ => return Err(invalid(key, "unknown key")),
                }
            };
        }
        fields!(setter);
        Ok(())
    }

    /// Applies a whole file of `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| invalid(line, format!("line {}: expected `key = value`", lineno + 1)))?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut c = Self::default();
        c.apply_text(text)?;
        c.validate()?;
        Ok(c)
    }

    /// Fully resolved configuration in the same format [`parse`](Self::parse) reads.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        macro_rules! writer {
            (num: $($n:ident),*; flag: $($f:ident),*) => {
                $(let _ = writeln!(out, "{} = {}", stringify!($n), self.$n);)*
                $(let _ = writeln!(out, "{} = {}", stringify!($f), self.$f);)*
            };
        }
        fields!(writer);
        let rpe_text = |e: Option<f32>| e.map_or("static".to_string(), |v| v.to_string());
        let _ = writeln!(out, "eta_rpe = {}", rpe_text(self.eta_rpe));
        let _ = writeln!(out, "conditioning_eta_rpe = {}", rpe_text(self.conditioning_eta_rpe));
        let classes: Vec<String> = self.classes.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(
            out,
            "classes = {}",
            if classes.is_empty() {
                "all".to_string()
            } else {
                classes.join(",")
            }
        );
        if let Some(d) = &self.data_dir {
            let _ = writeln!(out, "data_dir = {}", d.display());
        }
        let _ = writeln!(out, "out_dir = {}", self.out_dir.display());
        out
    }

    pub fn n_classes(&self) -> usize {
        if self.classes.is_empty() {
            10
        } else {
            self.classes.len()
        }
    }

    pub fn schedule(&self) -> PhaseSchedule {
        PhaseSchedule::new(self.t_adapt, self.t_dec, self.t_learn)
    }

    pub fn reward_state(&self) -> RewardState<f32> {
        self.reward_state_for(self.eta_rpe)
    }

    pub fn conditioning_reward_state(&self) -> RewardState<f32> {
        self.reward_state_for(self.conditioning_eta_rpe)
    }

    fn reward_state_for(&self, eta_rpe: Option<f32>) -> RewardState<f32> {
        let mode = match eta_rpe {
            None => RewardMode::Static,
            Some(eta_rpe) => RewardMode::Td {
                eta_rpe,
                alpha: self.alpha,
            },
        };
        RewardState { mode, ema_r: 0.0 }
    }

    fn neuron(&self, adaptive: bool, resistance: f32) -> NeuronParams<f32> {
        NeuronParams {
            u_rest: self.u_rest,
            u_reset: self.u_reset,
            u_thr0: self.u_thr0,
            tau_m: self.tau_m,
            resistance,
            delta_t_ref: self.delta_t_ref,
            g0: self.g0,
            tau_g: self.tau_g,
            adaptive,
        }
    }

    /// Network for `n_classes` decoder groups on `h × w` inputs.
    pub fn network_config(&self, n_classes: usize, n_out: usize, h: usize, w: usize) -> NetworkConfig<f32> {
        NetworkConfig {
            dt: self.dt,
            encoder: EncoderParams {
                f_max: self.f_max,
                intensity_max: 255.0,
            },
            ch_in: 1,
            h_in: h,
            w_in: w,
            ch_lc: self.ch_lc,
            k: self.k,
            s: self.s,
            n_out,
            n_classes,
            lc_neuron: self.neuron(true, self.resistance),
            decoder_neuron: self.neuron(self.decoder_adaptive, self.decoder_resistance),
            lc_plasticity: PlasticityParams {
                eta_pre: self.stdp_eta_pre,
                eta_post: self.stdp_eta_post,
                tau_plus: self.tau_plus,
                tau_minus: self.tau_minus,
                gamma: self.gamma,
                w_min: 0.0,
                w_max: 1.0,
                c_norm: Some(self.c_norm),
            },
            decoder_plasticity: PlasticityParams {
                eta_pre: self.rstdp_eta_pre,
                eta_post: self.rstdp_eta_post,
                tau_plus: self.tau_plus,
                tau_minus: self.tau_minus,
                gamma: self.gamma,
                w_min: 0.0,
                w_max: 1.0,
                c_norm: None,
            },
            lc_w_inh: self.w_inh,
            decoder_w_inh: self.decoder_w_inh,
            within_group_inhibition: self.within_group_inhibition,
        }
    }

    /// MNIST network for the configured class subset.
    pub fn mnist_network_config(&self) -> NetworkConfig<f32> {
        self.network_config(self.n_classes(), self.n_out, self.h_in, self.w_in)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.h_in == 0 || self.h_in > 28 {
            return Err(invalid("h_in", "must lie in 1..=28"));
        }
        if self.w_in != self.h_in {
            return Err(invalid("w_in", "inputs are square center crops; set w_in = h_in"));
        }
        if let Some(&c) = self.classes.iter().find(|&&c| c > 9) {
            return Err(invalid("classes", format!("digit {c} does not exist")));
        }
        for (i, c) in self.classes.iter().enumerate() {
            if self.classes[..i].contains(c) {
                return Err(invalid("classes", format!("digit {c} listed twice")));
            }
        }
        if self.eta_rpe.is_some_and(|e| !(e >= 0.0)) {
            return Err(invalid("eta_rpe", "must be >= 0 or `static`"));
        }
        if self.conditioning_eta_rpe.is_some_and(|e| !(e >= 0.0)) {
            return Err(invalid("conditioning_eta_rpe", "must be >= 0 or `static`"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(invalid("alpha", "must lie in [0, 1]"));
        }
        if self.t_dec == 0 {
            return Err(invalid("t_dec", "must be >= 1"));
        }
        if self.monitor_window == 0 {
            return Err(invalid("monitor_window", "must be >= 1"));
        }
        if self.stimulus_class > 9 {
            return Err(invalid("stimulus_class", "must be a digit"));
        }
        if self.first_reward_class > 1 {
            return Err(invalid("first_reward_class", "must be 0 or 1"));
        }
        if self.conditioning_groups == 0 {
            return Err(invalid("conditioning_groups", "must be >= 1"));
        }
        if !(self.svm_lambda > 0.0) {
            return Err(invalid("svm_lambda", "must be > 0"));
        }
        self.mnist_network_config().validate().map_err(|e| match e {
            biolcnet::Error::InvalidParameter { name, reason } => CliError::Config { key: name, reason },
            other => CliError::Config {
                key: "config".into(),
                reason: other.to_string(),
            },
        })
    }
}
