//! Nonlinear wireless channel model.
//!
//! The channel is a length-10 FIR stage (two symbols of lookahead, seven of
//! memory) followed by an instantaneous polynomial distortion and additive
//! uniform noise. Coefficients can drift or switch over time through a
//! [`ChannelSchedule`].

use alloc::vec::Vec;

use crate::evaluator::Symbol;
use crate::math;
use crate::prng::{NoiseSource, SymbolSource};

/// Taps in the FIR delay line.
pub const CHANNEL_MEMORY: usize = 10;

/// Index of the current symbol d(n) inside the delay line
/// (line\[0\] holds d(n+2), line\[9\] holds d(n-7)).
pub const CENTER_TAP: usize = 2;

/// Outputs flagged as warm-up while the delay line fills.
pub const WARMUP_OUTPUTS: u64 = 9;

/// Channel coefficients.
///
/// `p1..p3` weight the linear, quadratic and cubic terms of the memoryless
/// stage; `m` offsets every FIR tap magnitude except the centre one, which
/// stays fixed at 1 to preserve the impulse-response shape.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChannelParams {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub m: f64,
    /// Uniform noise amplitude A; the noise term is A*r with r in [-1, +1].
    pub noise_amplitude: f64,
}

impl Default for ChannelParams {
    /// The stationary reference channel.
    fn default() -> Self {
        Self {
            p1: 1.0,
            p2: 0.036,
            p3: -0.011,
            m: 0.0,
            noise_amplitude: 0.0,
        }
    }
}

impl ChannelParams {
    pub fn with_noise_amplitude(mut self, amplitude: f64) -> Self {
        assert!(amplitude >= 0.0, "noise amplitude must be nonnegative");
        self.noise_amplitude = amplitude;
        self
    }

    /// The ten FIR coefficients for d(n+2)..=d(n-7) at this `m`.
    pub fn fir_taps(&self) -> [f64; CHANNEL_MEMORY] {
        let m = self.m;
        [
            0.08 + m,
            -(0.12 + m),
            1.0,
            0.18 + m,
            -(0.10 + m),
            0.091 + m,
            -(0.05 + m),
            0.04 + m,
            0.03 + m,
            0.01 + m,
        ]
    }
}

/// FIR delay line over the last ten input symbols.
#[derive(Debug, Clone)]
pub struct FirState {
    line: [f64; CHANNEL_MEMORY],
}

impl Default for FirState {
    fn default() -> Self {
        Self::new()
    }
}

impl FirState {
    /// Empty (zero-filled) delay line; the first nine outputs are warm-up.
    pub fn new() -> Self {
        Self {
            line: [0.0; CHANNEL_MEMORY],
        }
    }

    /// Shifts the line one step and inserts `value` as the newest tap d(n+2).
    pub fn push(&mut self, value: f64) {
        for i in (1..CHANNEL_MEMORY).rev() {
            self.line[i] = self.line[i - 1];
        }
        self.line[0] = value;
    }

    /// The linear channel output q(n) for the current centre symbol.
    pub fn output(&self, params: &ChannelParams) -> f64 {
        let taps = params.fir_taps();
        let mut q = 0.0;
        for (tap, value) in taps.iter().zip(self.line.iter()) {
            q += tap * value;
        }
        q
    }
}

/// The memoryless stage: u = p1*q + p2*q^2 + p3*q^3 + noise.
#[inline]
pub fn nonlinearity(q: f64, params: &ChannelParams, noise: f64) -> f64 {
    ((params.p3 * q + params.p2) * q + params.p1) * q + noise
}

/// Which coefficient a schedule varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum VariedParam {
    P1,
    P2,
    P3,
    M,
}

impl VariedParam {
    fn apply(self, params: &mut ChannelParams, value: f64) {
        match self {
            VariedParam::P1 => params.p1 = value,
            VariedParam::P2 => params.p2 = value,
            VariedParam::P3 => params.p3 = value,
            VariedParam::M => params.m = value,
        }
    }
}

/// Time variation pattern of one channel coefficient.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Variation {
    Stationary,
    /// Linear interpolation from `start` to `end` over `duration` symbols,
    /// clamped at `end` afterwards.
    MonotonicDrift {
        param: VariedParam,
        start: f64,
        end: f64,
        duration: u64,
    },
    /// Triangle wave: `start` -> `end` over the first half period, back over
    /// the second.
    OscillatingDrift {
        param: VariedParam,
        start: f64,
        end: f64,
        period: u64,
    },
    /// Instantaneous switches every `interval` symbols, cycling through
    /// `values`.
    Switching {
        param: VariedParam,
        values: Vec<f64>,
        interval: u64,
    },
}

/// Channel coefficients plus their variation over the symbol index.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChannelSchedule {
    pub base: ChannelParams,
    pub variation: Variation,
}

impl ChannelSchedule {
    pub fn stationary(base: ChannelParams) -> Self {
        Self {
            base,
            variation: Variation::Stationary,
        }
    }

    pub fn is_stationary(&self) -> bool {
        matches!(self.variation, Variation::Stationary)
    }

    /// The varied coefficient's value at symbol index `n`, if any.
    pub fn varied_value_at(&self, n: u64) -> Option<(VariedParam, f64)> {
        match &self.variation {
            Variation::Stationary => None,
            Variation::MonotonicDrift {
                param,
                start,
                end,
                duration,
            } => {
                let frac = if *duration == 0 {
                    1.0
                } else {
                    (n as f64 / *duration as f64).min(1.0)
                };
                Some((*param, start + (end - start) * frac))
            }
            Variation::OscillatingDrift {
                param,
                start,
                end,
                period,
            } => {
                let period = (*period).max(2);
                let phase = (n % period) as f64;
                let half = period as f64 / 2.0;
                let frac = if phase <= half {
                    phase / half
                } else {
                    (period as f64 - phase) / (period as f64 - half)
                };
                Some((*param, start + (end - start) * frac))
            }
            Variation::Switching {
                param,
                values,
                interval,
            } => {
                let slot = (n / (*interval).max(1)) as usize % values.len();
                Some((*param, values[slot]))
            }
        }
    }

    /// The full parameter set in force at symbol index `n`. Pure in (self, n).
    pub fn params_at(&self, n: u64) -> ChannelParams {
        let mut params = self.base;
        if let Some((param, value)) = self.varied_value_at(n) {
            param.apply(&mut params, value);
        }
        params
    }

    /// Switch boundaries (symbol indices) up to `len`, for switching
    /// schedules; empty otherwise.
    pub fn switch_points(&self, len: u64) -> Vec<u64> {
        match &self.variation {
            Variation::Switching { interval, .. } if *interval > 0 => {
                (1..len / interval + 1).map(|i| i * interval).collect()
            }
            _ => Vec::new(),
        }
    }
}

/// One channel output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSample {
    /// The distorted, noisy sample u(n).
    pub distorted: f64,
    /// The clean centre symbol d(n) this sample corresponds to; `None` until
    /// the centre tap holds a real symbol.
    pub target: Option<Symbol>,
    /// True for the first nine outputs, while the delay line fills.
    pub warmup: bool,
}

/// The full channel: scheduled FIR + nonlinearity + noise.
///
/// The schedule runs on the channel's own output index, starting at zero for
/// the first output.
#[derive(Debug, Clone)]
pub struct NonlinearChannel {
    schedule: ChannelSchedule,
    fir: FirState,
    recent: [Option<Symbol>; CENTER_TAP + 1],
    noise: NoiseSource,
    outputs: u64,
}

impl NonlinearChannel {
    pub fn new(schedule: ChannelSchedule, noise: NoiseSource) -> Self {
        Self {
            schedule,
            fir: FirState::new(),
            recent: [None; CENTER_TAP + 1],
            noise,
            outputs: 0,
        }
    }

    pub fn schedule(&self) -> &ChannelSchedule {
        &self.schedule
    }

    /// Number of outputs produced so far (the schedule clock).
    pub fn output_index(&self) -> u64 {
        self.outputs
    }

    /// Pushes the next symbol and returns the matching distorted sample.
    pub fn step(&mut self, next: Symbol) -> ChannelSample {
        let n = self.outputs;
        let params = self.schedule.params_at(n);

        self.fir.push(next.to_f64());
        self.recent.rotate_right(1);
        self.recent[0] = Some(next);
        let target = self.recent[CENTER_TAP];

        let q = self.fir.output(&params);
        let noise = if params.noise_amplitude > 0.0 {
            self.noise.next_noise(params.noise_amplitude)
        } else {
            0.0
        };
        let distorted = nonlinearity(q, &params, noise);

        self.outputs += 1;
        ChannelSample {
            distorted,
            target,
            warmup: n < WARMUP_OUTPUTS,
        }
    }
}

/// Noise amplitude that realises `snr_db` on this channel.
///
/// Signal power P is measured as mean(u^2) over a noiseless calibration run
/// driven by `symbols`; uniform noise of amplitude A has variance A^2/3, so
/// A = sqrt(3 P / 10^(snr/10)). Infinite `snr_db` returns 0.
pub fn calibrate_noise_amplitude(
    snr_db: f64,
    params: &ChannelParams,
    calibration_length: u64,
    symbols: &mut SymbolSource,
) -> f64 {
    if snr_db == f64::INFINITY {
        return 0.0;
    }
    assert!(snr_db.is_finite(), "SNR must be finite or +inf");
    assert!(
        calibration_length >= 10_000,
        "calibration needs at least 1e4 symbols"
    );
    let clean = ChannelParams {
        noise_amplitude: 0.0,
        ..*params
    };
    let mut fir = FirState::new();
    let mut sum_sq = 0.0;
    let mut counted = 0u64;
    let mut produced = 0u64;
    while counted < calibration_length {
        fir.push(symbols.next_symbol().to_f64());
        let u = nonlinearity(fir.output(&clean), &clean, 0.0);
        produced += 1;
        if produced > WARMUP_OUTPUTS {
            sum_sq += u * u;
            counted += 1;
        }
    }
    let power = sum_sq / counted as f64;
    math::sqrt(3.0 * power / math::exp10(snr_db / 10.0))
}
