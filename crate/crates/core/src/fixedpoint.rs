//! Bit-accurate emulation of the hardware number formats.
//!
//! Quantities that live in ]-1, 1[ (learning-rate parameters, mask elements,
//! reservoir states) use an 18-bit format with 17 fractional bits ([`FixQ17`]);
//! wider quantities (readout, weights) use a 25-bit format with 4 integer and
//! 20 fractional bits ([`FixQ20`]). Every product goes through the 25x18
//! multiplier; rounding is to nearest, ties to even; overflow saturates and
//! is tallied in a [`SaturationCounter`].

use alloc::vec::Vec;

use crate::math;
use crate::trainer::{TrainerConfig, TrainerError, TrainingMode};

/// Counts silent saturation events across quantisation and arithmetic.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SaturationCounter {
    pub count: u64,
}

impl SaturationCounter {
    fn tally(&mut self) {
        self.count += 1;
    }
}

/// Round to nearest, ties to even, of `p / 2^shift` on raw integers.
#[inline]
fn rne_shift_right(p: i64, shift: u32) -> i64 {
    let floor = p >> shift;
    let rem = p - (floor << shift);
    let half = 1i64 << (shift - 1);
    if rem > half {
        floor + 1
    } else if rem < half {
        floor
    } else {
        floor + (floor & 1)
    }
}

macro_rules! fixed_format {
    ($name:ident, $frac:expr, $total:expr, $doc:expr) => {
        #[doc = $doc]
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default)]
        pub struct $name {
            raw: i32,
        }

        impl $name {
            pub const FRAC_BITS: u32 = $frac;
            pub const TOTAL_BITS: u32 = $total;
            pub const MIN_RAW: i32 = -(1 << ($total - 1));
            pub const MAX_RAW: i32 = (1 << ($total - 1)) - 1;
            pub const ZERO: Self = Self { raw: 0 };

            /// Smallest representable increment.
            pub const ULP: f64 = 1.0 / (1u64 << $frac) as f64;

            /// Rounds `v` to the grid (ties to even) and saturates at the
            /// range limits.
            pub fn quantize(v: f64, sat: &mut SaturationCounter) -> Self {
                assert!(v.is_finite(), "cannot quantise a non-finite value");
                let scaled = math::round_ties_even(v * (1u64 << $frac) as f64);
                let raw = scaled as i64;
                if raw > Self::MAX_RAW as i64 {
                    sat.tally();
                    Self { raw: Self::MAX_RAW }
                } else if raw < Self::MIN_RAW as i64 {
                    sat.tally();
                    Self { raw: Self::MIN_RAW }
                } else {
                    Self { raw: raw as i32 }
                }
            }

            pub fn from_raw(raw: i32) -> Self {
                assert!((Self::MIN_RAW..=Self::MAX_RAW).contains(&raw));
                Self { raw }
            }

            pub fn raw(self) -> i32 {
                self.raw
            }

            pub fn to_f64(self) -> f64 {
                self.raw as f64 * Self::ULP
            }

            fn saturate(raw: i64, sat: &mut SaturationCounter) -> Self {
                if raw > Self::MAX_RAW as i64 {
                    sat.tally();
                    Self { raw: Self::MAX_RAW }
                } else if raw < Self::MIN_RAW as i64 {
                    sat.tally();
                    Self { raw: Self::MIN_RAW }
                } else {
                    Self { raw: raw as i32 }
                }
            }
        }
    };
}

fixed_format!(
    FixQ17,
    17,
    18,
    "18-bit signed fixed point with 17 fractional bits; range [-1, 1 - 2^-17]."
);
fixed_format!(
    FixQ20,
    20,
    25,
    "25-bit signed fixed point with 20 fractional bits; range [-16, 16 - 2^-20]."
);

impl FixQ20 {
    pub fn saturating_add(self, rhs: Self, sat: &mut SaturationCounter) -> Self {
        Self::saturate(self.raw as i64 + rhs.raw as i64, sat)
    }

    pub fn saturating_sub(self, rhs: Self, sat: &mut SaturationCounter) -> Self {
        Self::saturate(self.raw as i64 - rhs.raw as i64, sat)
    }
}

/// The 25x18 multiplier: exact integer product, one rounding back to Q20,
/// saturation on overflow.
#[inline]
pub fn mul_25x18(a: FixQ20, b: FixQ17, sat: &mut SaturationCounter) -> FixQ20 {
    let product = a.raw as i64 * b.raw as i64; // Q37, fits in 42 bits
    FixQ20::saturate(rne_shift_right(product, FixQ17::FRAC_BITS), sat)
}

/// Q17 x Q17 product on the same multiplier (the first operand widens to
/// 25 bits), rounded once back to Q17.
#[inline]
fn mul_q17(a: FixQ17, b: FixQ17, sat: &mut SaturationCounter) -> FixQ17 {
    let product = a.raw as i64 * b.raw as i64; // Q34
    FixQ17::saturate(rne_shift_right(product, FixQ17::FRAC_BITS), sat)
}

/// Quantises observed reservoir states to Q17, optionally through a coarser
/// ADC grid of `adc_bits` (sign included) first.
pub fn quantize_states(
    states: &[f64],
    adc_bits: Option<u32>,
    out: &mut Vec<FixQ17>,
    sat: &mut SaturationCounter,
) {
    out.clear();
    for &v in states {
        let v = match adc_bits {
            Some(bits) => {
                debug_assert!(bits >= 2 && bits <= FixQ17::TOTAL_BITS);
                let scale = (1u64 << (bits - 1)) as f64;
                let stepped = math::round_ties_even(v * scale) / scale;
                stepped.clamp(-1.0, 1.0 - 1.0 / scale)
            }
            None => v,
        };
        out.push(FixQ17::quantize(v, sat));
    }
}

/// The gradient-descent trainer with every quantity held in the hardware
/// formats: weights and readout in Q20, states and learning-rate state in
/// Q17, all products through the 25x18 multiplier.
#[derive(Debug, Clone)]
pub struct FixedTrainer {
    cfg: TrainerConfig,
    weights: Vec<FixQ20>,
    lambda: FixQ17,
    lambda0: FixQ17,
    lambda_min: FixQ17,
    gamma: FixQ17,
    steps: u64,
    sat: SaturationCounter,
}

impl FixedTrainer {
    pub fn new(cfg: TrainerConfig, neurons: usize) -> Result<Self, TrainerError> {
        cfg.validate()?;
        let mut sat = SaturationCounter::default();
        let lambda0 = FixQ17::quantize(cfg.lambda0, &mut sat);
        let lambda_min = FixQ17::quantize(cfg.lambda_min, &mut sat);
        let gamma = FixQ17::quantize(cfg.gamma, &mut sat);
        Ok(Self {
            cfg,
            weights: alloc::vec![FixQ20::ZERO; neurons],
            lambda: lambda0,
            lambda0,
            lambda_min,
            gamma,
            steps: 0,
            sat,
        })
    }

    pub fn config(&self) -> &TrainerConfig {
        &self.cfg
    }

    pub fn lambda(&self) -> f64 {
        self.lambda.to_f64()
    }

    pub fn weights_f64(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w.to_f64()).collect()
    }

    pub fn saturations(&self) -> u64 {
        self.sat.count
    }

    /// Readout y = sum_i w_i x_i with saturating Q20 accumulation.
    pub fn output(&mut self, states: &[FixQ17]) -> FixQ20 {
        assert_eq!(states.len(), self.weights.len());
        let mut acc = FixQ20::ZERO;
        for (w, x) in self.weights.iter().zip(states.iter()) {
            let term = mul_25x18(*w, *x, &mut self.sat);
            acc = acc.saturating_add(term, &mut self.sat);
        }
        acc
    }

    /// One weight update, identical dataflow to the float trainer.
    pub fn update(&mut self, states: &[FixQ17], target: FixQ20, output: FixQ20) {
        assert_eq!(states.len(), self.weights.len());
        self.steps += 1;
        if self.lambda.raw() == 0 {
            return;
        }
        let error = target.saturating_sub(output, &mut self.sat);
        let scaled_error = mul_25x18(error, self.lambda, &mut self.sat);
        for (w, x) in self.weights.iter_mut().zip(states.iter()) {
            let delta = mul_25x18(scaled_error, *x, &mut self.sat);
            *w = w.saturating_add(delta, &mut self.sat);
        }
    }

    /// Fixed-point lambda schedule, once per symbol after `update`.
    pub fn decay_tick(&mut self) {
        if self.cfg.mode == TrainingMode::Simplified {
            return;
        }
        if self.steps % self.cfg.k == 0 {
            let diff = FixQ17::from_raw(self.lambda.raw() - self.lambda_min.raw());
            let scaled = mul_q17(diff, self.gamma, &mut self.sat);
            self.lambda =
                FixQ17::saturate(self.lambda_min.raw() as i64 + scaled.raw() as i64, &mut self.sat);
        }
    }

    pub fn stop(&mut self) {
        self.lambda = FixQ17::ZERO;
    }

    pub fn watchdog(&mut self, window_ser: f64) -> bool {
        if window_ser > self.cfg.ser_threshold {
            self.lambda = self.lambda0;
            true
        } else {
            false
        }
    }
}
