//! Online readout training by stochastic gradient descent.
//!
//! The readout is linear, y(n) = sum_i w_i x_i(n). Weights follow
//! `w_i <- w_i + lambda (d - y) x_i`, which is one gradient-descent step on
//! the instantaneous squared error. Every k-th update the learning rate
//! decays geometrically toward `lambda_min`; a watchdog restores it to
//! `lambda0` when the windowed SER degrades past a threshold.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::evaluator::Symbol;

/// Learning-rate schedule variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum TrainingMode {
    /// Decay to zero, then freeze the weights for the test phase.
    Full,
    /// Decay to a nonzero floor so the readout keeps tracking a moving
    /// channel.
    NonStationary,
    /// Hold lambda constant at lambda0; no schedule at all.
    Simplified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainerError {
    /// Full mode decays to zero; lambda_min must be 0.
    FullModeNeedsZeroFloor,
    /// Non-stationary mode keeps training; lambda_min must be positive.
    NonStationaryNeedsPositiveFloor,
    /// lambda_min cannot exceed lambda0.
    FloorAboveInitialRate,
    /// Decay rate gamma must lie in [0, 1).
    GammaOutOfRange,
    /// The lambda update interval k must be at least 1.
    ZeroUpdateInterval,
    /// The watchdog threshold must lie in (0, 1].
    ThresholdOutOfRange,
    /// lambda0 must be nonnegative.
    NegativeInitialRate,
}

impl core::fmt::Display for TrainerError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let msg = match self {
            TrainerError::FullModeNeedsZeroFloor => "full mode requires lambda_min = 0",
            TrainerError::NonStationaryNeedsPositiveFloor => {
                "non-stationary mode requires lambda_min > 0"
            }
            TrainerError::FloorAboveInitialRate => "lambda_min must not exceed lambda0",
            TrainerError::GammaOutOfRange => "gamma must lie in [0, 1)",
            TrainerError::ZeroUpdateInterval => "update interval k must be at least 1",
            TrainerError::ThresholdOutOfRange => "SER threshold must lie in (0, 1]",
            TrainerError::NegativeInitialRate => "lambda0 must be nonnegative",
        };
        write!(f, "{msg}")
    }
}

impl core::error::Error for TrainerError {}

/// Gradient-descent parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainerConfig {
    pub mode: TrainingMode,
    pub lambda0: f64,
    pub lambda_min: f64,
    pub gamma: f64,
    /// Lambda updates every k symbols.
    pub k: u64,
    /// Target alignment delay in symbols (pipeline latency compensation).
    pub target_delay: usize,
    /// Windowed-SER threshold above which the watchdog resets lambda.
    pub ser_threshold: f64,
}

impl TrainerConfig {
    /// The reference parameter set: lambda0 = 0.4, lambda_min = 0,
    /// gamma = 0.999, k = 10.
    pub fn reference() -> Self {
        Self {
            mode: TrainingMode::Full,
            lambda0: 0.4,
            lambda_min: 0.0,
            gamma: 0.999,
            k: 10,
            target_delay: 1,
            ser_threshold: 0.05,
        }
    }

    pub fn validate(&self) -> Result<(), TrainerError> {
        if self.lambda0 < 0.0 {
            return Err(TrainerError::NegativeInitialRate);
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(TrainerError::GammaOutOfRange);
        }
        if self.k == 0 {
            return Err(TrainerError::ZeroUpdateInterval);
        }
        if !(0.0 < self.ser_threshold && self.ser_threshold <= 1.0) {
            return Err(TrainerError::ThresholdOutOfRange);
        }
        if self.lambda_min > self.lambda0 {
            return Err(TrainerError::FloorAboveInitialRate);
        }
        match self.mode {
            TrainingMode::Full if self.lambda_min != 0.0 => {
                Err(TrainerError::FullModeNeedsZeroFloor)
            }
            TrainingMode::NonStationary if self.lambda_min <= 0.0 => {
                Err(TrainerError::NonStationaryNeedsPositiveFloor)
            }
            _ => Ok(()),
        }
    }
}

/// Readout weights live in the 25-bit hardware format spanning [-16, 16];
/// the float pipeline honours the same range.
pub const WEIGHT_LIMIT: f64 = 16.0;

/// Linear combination of states and weights.
///
/// Panics if the slice lengths differ.
#[inline]
pub fn readout(weights: &[f64], states: &[f64]) -> f64 {
    assert_eq!(weights.len(), states.len(), "weight/state length mismatch");
    let mut y = 0.0;
    for (w, x) in weights.iter().zip(states.iter()) {
        y += w * x;
    }
    y
}

/// Readout weights plus the learning-rate state.
#[derive(Debug, Clone)]
pub struct Trainer {
    cfg: TrainerConfig,
    weights: Vec<f64>,
    lambda: f64,
    steps: u64,
}

impl Trainer {
    /// Weights start at zero so the first update is purely data-driven.
    pub fn new(cfg: TrainerConfig, neurons: usize) -> Result<Self, TrainerError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            weights: vec![0.0; neurons],
            lambda: cfg.lambda0,
            steps: 0,
        })
    }

    pub fn config(&self) -> &TrainerConfig {
        &self.cfg
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn output(&self, states: &[f64]) -> f64 {
        readout(&self.weights, states)
    }

    /// One gradient step on the instantaneous squared error.
    ///
    /// Weights are confined to the hardware range [-16, 16]; a high lambda
    /// can push the transient against those rails, and training recovers
    /// once lambda decays, exactly as the saturating fixed-point pipeline
    /// behaves.
    pub fn update(&mut self, states: &[f64], target: f64, output: f64) {
        assert_eq!(states.len(), self.weights.len());
        self.steps += 1;
        if self.lambda == 0.0 {
            return;
        }
        let scale = self.lambda * (target - output);
        if !scale.is_finite() {
            return;
        }
        for (w, x) in self.weights.iter_mut().zip(states.iter()) {
            *w = (*w + scale * x).clamp(-WEIGHT_LIMIT, WEIGHT_LIMIT);
        }
    }

    /// Applies the lambda schedule; call once per symbol, after `update`.
    pub fn decay_tick(&mut self) {
        if self.cfg.mode == TrainingMode::Simplified {
            return;
        }
        if self.steps % self.cfg.k == 0 {
            self.lambda = self.cfg.lambda_min + self.cfg.gamma * (self.lambda - self.cfg.lambda_min);
        }
    }

    /// Stops training outright (end of the training phase in full mode).
    pub fn stop(&mut self) {
        self.lambda = 0.0;
    }

    /// Restores lambda to lambda0 if the windowed SER breached the
    /// threshold; returns true when a reset fired. Re-arms every window.
    pub fn watchdog(&mut self, window_ser: f64) -> bool {
        if window_ser > self.cfg.ser_threshold {
            self.lambda = self.cfg.lambda0;
            true
        } else {
            false
        }
    }
}

/// Delays the clean-symbol stream to line targets up with the pipeline
/// latency: feeding d(n) returns d(n - delay).
#[derive(Debug, Clone)]
pub struct TargetAligner {
    delay: usize,
    buf: VecDeque<Symbol>,
}

impl TargetAligner {
    pub fn new(delay: usize) -> Self {
        Self {
            delay,
            buf: VecDeque::with_capacity(delay + 1),
        }
    }

    pub fn delay(&self) -> usize {
        self.delay
    }

    /// Pushes the newest symbol; returns the delayed one once available.
    pub fn push(&mut self, symbol: Symbol) -> Option<Symbol> {
        self.buf.push_back(symbol);
        if self.buf.len() > self.delay {
            self.buf.pop_front()
        } else {
            None
        }
    }
}
