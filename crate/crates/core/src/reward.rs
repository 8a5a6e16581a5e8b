//! Per-sample reward and the modulation signal fed to R-STDP.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RewardMode<T> {
    /// Modulation equals the raw reward.
    Static,
    /// Modulation is the reward-prediction error
    /// `eta_rpe * (r - ema_r)`; `ema_r` then moves toward `r` with
    /// retention factor `alpha`.
    Td { eta_rpe: T, alpha: T },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardState<T> {
    pub mode: RewardMode<T>,
    /// Exponential moving average of past rewards.
    pub ema_r: T,
}

/// `+1` for a correct decision, `-1` otherwise.
pub fn compute_reward<T: Scalar>(predicted: usize, target: usize) -> T {
    if predicted == target {
        T::one()
    } else {
        -T::one()
    }
}

impl<T: Scalar> RewardState<T> {
    pub fn new(mode: RewardMode<T>) -> Result<Self> {
        if let RewardMode::Td { eta_rpe, alpha } = mode {
            if !(eta_rpe >= T::zero()) {
                return Err(Error::param("eta_rpe", "must be >= 0"));
            }
            if !(alpha >= T::zero() && alpha <= T::one()) {
                return Err(Error::param("alpha", "must lie in [0, 1]"));
            }
        }
        Ok(Self { mode, ema_r: T::zero() })
    }

    pub fn static_mode() -> Self {
        Self {
            mode: RewardMode::Static,
            ema_r: T::zero(),
        }
    }

    pub fn td(eta_rpe: T, alpha: T) -> Result<Self> {
        Self::new(RewardMode::Td { eta_rpe, alpha })
    }

    /// Modulation for reward `r` without touching the state.
    pub fn peek(&self, r: T) -> T {
        match self.mode {
            RewardMode::Static => r,
            RewardMode::Td { eta_rpe, .. } => eta_rpe * (r - self.ema_r),
        }
    }

    /// Returns the modulation for `r` and folds `r` into the moving average.
    pub fn modulate(&mut self, r: T) -> T {
        let m = self.peek(r);
        if let RewardMode::Td { alpha, .. } = self.mode {
            self.ema_r = alpha * self.ema_r + (T::one() - alpha) * r;
        }
        m
    }

    pub fn reset(&mut self) {
        self.ema_r = T::zero();
    }
}
