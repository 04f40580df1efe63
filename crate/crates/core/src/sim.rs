//! The composed equaliser pipeline.
//!
//! One run wires symbol source -> channel -> reservoir -> readout -> decision
//! and walks three phases on a shared symbol clock: washout (reservoir
//! transients, nothing counted), training, and test. The channel schedule
//! runs on the raw symbol clock from the first channel output; training and
//! evaluation run on the post-washout clock.
//!
//! Per tick, the readout sees the state vector *before* the newest channel
//! sample is absorbed, matching the one-step pipeline latency the default
//! target delay compensates.

use alloc::vec::Vec;

use crate::channel::{ChannelSchedule, NonlinearChannel, Variation};
use crate::evaluator::{decide, SerAccumulator, Symbol, WindowedSer};
use crate::fixedpoint::{self, FixQ17, FixQ20, FixedTrainer, SaturationCounter};
use crate::prng::{mix64, NoiseSource, SymbolSource};
use crate::reservoir::{Reservoir, ReservoirConfig};
use crate::trainer::{TargetAligner, Trainer, TrainerConfig, TrainerError, TrainingMode};

/// Numeric pipeline selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum PipelineKind {
    /// Double-precision readout and training.
    Float,
    /// Hardware-format readout and training (Q17/Q20, 25x18 multiplier).
    /// `adc_bits` optionally coarsens observed states first.
    Fixed { adc_bits: Option<u32> },
}

/// Seeds for the independent random streams of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimSeeds {
    pub symbols: u64,
    pub noise: u64,
    pub measurement: u64,
}

impl SimSeeds {
    /// Derives the per-stream seeds from one run seed.
    pub fn derive(run_seed: u64) -> Self {
        Self {
            symbols: mix64(run_seed ^ 0x53594d_424f4c),
            noise: mix64(run_seed ^ 0x4e4f49_5345),
            measurement: mix64(run_seed ^ 0x4d4541_53),
        }
    }
}

/// Everything a single run needs, as plain values.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub reservoir: ReservoirConfig,
    /// Channel coefficients and their time variation. `base.noise_amplitude`
    /// must already hold the calibrated value.
    pub schedule: ChannelSchedule,
    pub trainer: TrainerConfig,
    pub train_symbols: u64,
    pub test_symbols: u64,
    /// Tumbling SER window length.
    pub window: u64,
    /// Arms the lambda-reset watchdog on window completion.
    pub watchdog: bool,
    pub pipeline: PipelineKind,
    pub seeds: SimSeeds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimError {
    Trainer(TrainerError),
    /// The SER window length must be at least 1.
    ZeroWindow,
    /// A run needs at least one test symbol.
    NoTestSymbols,
    /// Fixed pipelines need beta inside the Q17 range [0, 1).
    BetaOutsideFixedRange,
}

impl From<TrainerError> for SimError {
    fn from(e: TrainerError) -> Self {
        SimError::Trainer(e)
    }
}

impl core::fmt::Display for SimError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SimError::Trainer(e) => write!(f, "trainer config: {e}"),
            SimError::ZeroWindow => write!(f, "SER window length must be at least 1"),
            SimError::NoTestSymbols => write!(f, "test length must be at least 1"),
            SimError::BetaOutsideFixedRange => {
                write!(f, "fixed pipeline requires beta in [0, 1)")
            }
        }
    }
}

impl core::error::Error for SimError {}

/// One completed SER window.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WindowRecord {
    pub index: u64,
    pub errors: u64,
    pub symbols: u64,
    pub ser: f64,
    /// Learning rate right after the window's watchdog action.
    pub lambda: f64,
    /// The scheduled coefficient's value at the window boundary, if the
    /// channel varies.
    pub varied_value: Option<f64>,
}

/// Per-segment statistics for switching channels.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SegmentRecord {
    pub index: u64,
    /// Segment bounds on the raw channel clock.
    pub start: u64,
    pub end: u64,
    /// The varied coefficient's value over this segment.
    pub value: f64,
    /// SER over the whole evaluated part of the segment.
    pub ser_full: f64,
    /// SER after skipping the first `train_symbols` of the segment
    /// (the re-training region).
    pub ser_post_retrain: f64,
    pub errors_post_retrain: u64,
    pub symbols_post_retrain: u64,
}

/// Result of one run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimOutcome {
    /// SER over everything after washout, training phase included.
    pub ser_inclusive: f64,
    pub inclusive_errors: u64,
    pub inclusive_symbols: u64,
    /// SER over the test phase only.
    pub ser_test: f64,
    pub test_errors: u64,
    pub test_symbols: u64,
    pub windows: Vec<WindowRecord>,
    /// Window indices at which the watchdog reset lambda.
    pub lambda_resets: Vec<u64>,
    pub final_lambda: f64,
    pub final_weights: Vec<f64>,
    /// Saturation events in the fixed pipeline (0 for float).
    pub saturations: u64,
    /// Present for switching schedules.
    pub segments: Vec<SegmentRecord>,
}

/// Read-only view of one evaluated pipeline tick, for observers.
pub struct TickView<'a> {
    /// Raw channel clock, 0-based.
    pub tick: u64,
    /// Post-washout index, if evaluated.
    pub eval_index: Option<u64>,
    /// True while the training phase lasts.
    pub training: bool,
    /// Observed (float) states the readout consumed this tick.
    pub states: &'a [f64],
    pub output: f64,
    pub target: Option<Symbol>,
    pub lambda: f64,
    /// The channel sample absorbed at the end of this tick.
    pub distorted: f64,
}

enum Engine {
    Float(Trainer),
    Fixed {
        trainer: FixedTrainer,
        mask_q: Vec<FixQ17>,
        beta_q: FixQ17,
        adc_bits: Option<u32>,
        states_q: Vec<FixQ17>,
        injections: Vec<f64>,
        sat: SaturationCounter,
    },
}

impl Engine {
    fn new(cfg: &SimConfig) -> Result<Self, SimError> {
        let neurons = cfg.reservoir.neurons;
        match cfg.pipeline {
            PipelineKind::Float => Ok(Engine::Float(Trainer::new(cfg.trainer, neurons)?)),
            PipelineKind::Fixed { adc_bits } => {
                if !(0.0..1.0).contains(&cfg.reservoir.beta) {
                    return Err(SimError::BetaOutsideFixedRange);
                }
                let mut sat = SaturationCounter::default();
                let mask_q = cfg
                    .reservoir
                    .mask
                    .iter()
                    .map(|&m| FixQ17::quantize(m, &mut sat))
                    .collect();
                let beta_q = FixQ17::quantize(cfg.reservoir.beta, &mut sat);
                Ok(Engine::Fixed {
                    trainer: FixedTrainer::new(cfg.trainer, neurons)?,
                    mask_q,
                    beta_q,
                    adc_bits,
                    states_q: Vec::with_capacity(neurons),
                    injections: Vec::with_capacity(neurons),
                    sat,
                })
            }
        }
    }

    /// Feeds the channel sample into the reservoir, applying the pipeline's
    /// input-masking arithmetic.
    fn drive(&mut self, reservoir: &mut Reservoir, u: f64) {
        match self {
            Engine::Float(_) => reservoir.step(u),
            Engine::Fixed {
                mask_q,
                beta_q,
                injections,
                sat,
                ..
            } => {
                let u_q = FixQ20::quantize(u, sat);
                injections.clear();
                for &m in mask_q.iter() {
                    let masked = fixedpoint::mul_25x18(u_q, m, sat);
                    let scaled = fixedpoint::mul_25x18(masked, *beta_q, sat);
                    injections.push(scaled.to_f64());
                }
                reservoir.step_injected(injections);
            }
        }
    }

    /// Readout from the observed states.
    fn output(&mut self, states: &[f64]) -> f64 {
        match self {
            Engine::Float(t) => t.output(states),
            Engine::Fixed {
                trainer,
                adc_bits,
                states_q,
                sat,
                ..
            } => {
                fixedpoint::quantize_states(states, *adc_bits, states_q, sat);
                trainer.output(states_q).to_f64()
            }
        }
    }

    /// One gradient step against `target`; `output` must come from this tick.
    fn update(&mut self, states: &[f64], target: Symbol, output: f64) {
        match self {
            Engine::Float(t) => t.update(states, target.to_f64(), output),
            Engine::Fixed {
                trainer,
                states_q,
                sat,
                ..
            } => {
                let target_q = FixQ20::quantize(target.to_f64(), sat);
                let output_q = FixQ20::quantize(output, sat);
                trainer.update(states_q, target_q, output_q);
            }
        }
    }

    fn decay_tick(&mut self) {
        match self {
            Engine::Float(t) => t.decay_tick(),
            Engine::Fixed { trainer, .. } => trainer.decay_tick(),
        }
    }

    fn stop(&mut self) {
        match self {
            Engine::Float(t) => t.stop(),
            Engine::Fixed { trainer, .. } => trainer.stop(),
        }
    }

    fn watchdog(&mut self, window_ser: f64) -> bool {
        match self {
            Engine::Float(t) => t.watchdog(window_ser),
            Engine::Fixed { trainer, .. } => trainer.watchdog(window_ser),
        }
    }

    fn lambda(&self) -> f64 {
        match self {
            Engine::Float(t) => t.lambda(),
            Engine::Fixed { trainer, .. } => trainer.lambda(),
        }
    }

    fn weights(&self) -> Vec<f64> {
        match self {
            Engine::Float(t) => t.weights().to_vec(),
            Engine::Fixed { trainer, .. } => trainer.weights_f64(),
        }
    }

    fn saturations(&self) -> u64 {
        match self {
            Engine::Float(_) => 0,
            Engine::Fixed { trainer, sat, .. } => trainer.saturations() + sat.count,
        }
    }
}

struct SegmentTracker {
    interval: u64,
    current: u64,
    full: SerAccumulator,
    post: SerAccumulator,
    retrain_skip: u64,
    records: Vec<SegmentRecord>,
}

impl SegmentTracker {
    fn new(schedule: &ChannelSchedule, retrain_skip: u64) -> Option<Self> {
        match &schedule.variation {
            Variation::Switching { interval, .. } if *interval > 0 => Some(Self {
                interval: *interval,
                current: 0,
                full: SerAccumulator::default(),
                post: SerAccumulator::default(),
                retrain_skip,
                records: Vec::new(),
            }),
            _ => None,
        }
    }

    fn record(&mut self, schedule: &ChannelSchedule, tick: u64, correct: bool) {
        let segment = tick / self.interval;
        if segment != self.current {
            self.close(schedule);
            self.current = segment;
        }
        self.full.record(correct);
        if tick % self.interval >= self.retrain_skip {
            self.post.record(correct);
        }
    }

    fn close(&mut self, schedule: &ChannelSchedule) {
        if self.full.symbols == 0 {
            return;
        }
        let start = self.current * self.interval;
        let value = schedule
            .varied_value_at(start)
            .map(|(_, v)| v)
            .unwrap_or(f64::NAN);
        self.records.push(SegmentRecord {
            index: self.current,
            start,
            end: start + self.interval,
            value,
            ser_full: self.full.ser(),
            ser_post_retrain: self.post.ser(),
            errors_post_retrain: self.post.errors,
            symbols_post_retrain: self.post.symbols,
        });
        self.full = SerAccumulator::default();
        self.post = SerAccumulator::default();
    }
}

/// Runs one experiment.
pub fn run(cfg: &SimConfig) -> Result<SimOutcome, SimError> {
    run_with(cfg, |_| {})
}

/// Runs one experiment, handing every tick to `observer`.
pub fn run_with<F: FnMut(&TickView<'_>)>(
    cfg: &SimConfig,
    mut observer: F,
) -> Result<SimOutcome, SimError> {
    if cfg.window == 0 {
        return Err(SimError::ZeroWindow);
    }
    if cfg.test_symbols == 0 {
        return Err(SimError::NoTestSymbols);
    }

    let mut symbols = SymbolSource::new(cfg.seeds.symbols);
    let mut channel = NonlinearChannel::new(
        cfg.schedule.clone(),
        NoiseSource::new(cfg.seeds.noise),
    );
    let mut reservoir = Reservoir::new(cfg.reservoir.clone(), cfg.seeds.measurement);
    let mut engine = Engine::new(cfg)?;
    let mut aligner = TargetAligner::new(cfg.trainer.target_delay);

    let washout = cfg.reservoir.washout;
    let total = washout + cfg.train_symbols + cfg.test_symbols;

    let mut inclusive = SerAccumulator::default();
    let mut test = SerAccumulator::default();
    let mut windows = WindowedSer::new(cfg.window);
    let mut window_records: Vec<WindowRecord> = Vec::new();
    let mut resets: Vec<u64> = Vec::new();
    let mut segments = SegmentTracker::new(&cfg.schedule, cfg.train_symbols);
    let mut observed: Vec<f64> = Vec::with_capacity(cfg.reservoir.neurons);
    let mut stopped = false;

    for tick in 0..total {
        let sample = channel.step(symbols.next_symbol());
        let aligned = sample.target.and_then(|d| aligner.push(d));

        let eval_index = tick.checked_sub(washout);
        let training = eval_index.map_or(false, |n| n < cfg.train_symbols);

        // Full mode freezes the weights when the training phase ends; the
        // watchdog may lift the freeze again later.
        if cfg.trainer.mode == TrainingMode::Full && !stopped {
            if let Some(n) = eval_index {
                if n >= cfg.train_symbols {
                    engine.stop();
                    stopped = true;
                }
            }
        }

        reservoir.observe_into(&mut observed);
        let y = engine.output(&observed);

        if let (Some(n), Some(target)) = (eval_index, aligned) {
            let correct = decide(y).ok() == Some(target);
            inclusive.record(correct);
            if n >= cfg.train_symbols {
                test.record(correct);
            }
            if let Some(tracker) = segments.as_mut() {
                tracker.record(&cfg.schedule, tick, correct);
            }
            if let Some(done) = windows.record(correct) {
                // The watchdog arms once the scheduled training phase is
                // over: it exists to catch degradation of a trained readout,
                // and during training lambda is near lambda0 anyway.
                let armed = cfg.watchdog && n >= cfg.train_symbols;
                if armed && engine.watchdog(done.ser) {
                    resets.push(done.index);
                }
                window_records.push(WindowRecord {
                    index: done.index,
                    errors: done.errors,
                    symbols: done.symbols,
                    ser: done.ser,
                    lambda: engine.lambda(),
                    varied_value: cfg.schedule.varied_value_at(tick).map(|(_, v)| v),
                });
            }

            engine.update(&observed, target, y);
            engine.decay_tick();
        }

        observer(&TickView {
            tick,
            eval_index,
            training,
            states: &observed,
            output: y,
            target: aligned,
            lambda: engine.lambda(),
            distorted: sample.distorted,
        });

        engine.drive(&mut reservoir, sample.distorted);
    }

    let segments = segments
        .map(|mut tracker| {
            tracker.close(&cfg.schedule);
            tracker.records
        })
        .unwrap_or_default();

    Ok(SimOutcome {
        ser_inclusive: inclusive.ser(),
        inclusive_errors: inclusive.errors,
        inclusive_symbols: inclusive.symbols,
        ser_test: test.ser(),
        test_errors: test.errors,
        test_symbols: test.symbols,
        windows: window_records,
        lambda_resets: resets,
        final_lambda: engine.lambda(),
        final_weights: engine.weights(),
        saturations: engine.saturations(),
        segments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelParams;
    use crate::prng::MaskRng;
    use alloc::vec;
    use alloc::vec::Vec;

    fn small_config(seed: u64) -> SimConfig {
        let mask = MaskRng::new(mix64(seed ^ 0xABCD)).draw_mask(30).unwrap();
        let reservoir = ReservoirConfig::new(30, 0.55, 0.2, 0.0, mask).unwrap();
        SimConfig {
            reservoir,
            schedule: ChannelSchedule::stationary(ChannelParams::default()),
            trainer: TrainerConfig::reference(),
            train_symbols: 20_000,
            test_symbols: 20_000,
            window: 5_000,
            watchdog: false,
            pipeline: PipelineKind::Float,
            seeds: SimSeeds::derive(seed),
        }
    }

    #[test]
    fn zero_input_gain_leaves_chance_level_ser() {
        let mut cfg = small_config(1);
        cfg.reservoir.beta = 0.0;
        let outcome = run(&cfg).unwrap();
        // States stay at zero, y = 0 decides to symbol 1; three of four
        // symbols mismatch.
        assert!(
            (0.70..=0.80).contains(&outcome.ser_test),
            "ser {}",
            outcome.ser_test
        );
    }

    #[test]
    fn zero_initial_rate_never_trains() {
        let mut cfg = small_config(2);
        cfg.trainer.lambda0 = 0.0;
        let outcome = run(&cfg).unwrap();
        assert!(
            (0.70..=0.80).contains(&outcome.ser_test),
            "ser {}",
            outcome.ser_test
        );
    }

    #[test]
    fn runs_are_reproducible() {
        let cfg = small_config(3);
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn different_seeds_differ() {
        let a = run(&small_config(4)).unwrap();
        let b = run(&small_config(5)).unwrap();
        assert_ne!(a.final_weights, b.final_weights);
    }

    #[test]
    fn full_mode_freezes_weights_in_test_phase() {
        let cfg = small_config(6);
        let mut lambda_in_test = Vec::new();
        let outcome = run_with(&cfg, |view| {
            if view.eval_index.map_or(false, |n| n >= cfg.train_symbols) {
                lambda_in_test.push(view.lambda);
            }
        })
        .unwrap();
        assert!(!lambda_in_test.is_empty());
        assert!(lambda_in_test.iter().all(|&l| l == 0.0));
        assert_eq!(outcome.final_lambda, 0.0);
    }

    #[test]
    fn windows_cover_train_and_test_phases() {
        let cfg = small_config(7);
        let outcome = run(&cfg).unwrap();
        // 40k evaluated symbols in 5k windows.
        assert_eq!(outcome.windows.len(), 8);
        let total_window_symbols: u64 = outcome.windows.iter().map(|w| w.symbols).sum();
        assert_eq!(total_window_symbols, 40_000);
        // Weighted window errors equal the inclusive error count.
        let total_window_errors: u64 = outcome.windows.iter().map(|w| w.errors).sum();
        assert_eq!(total_window_errors, outcome.inclusive_errors);
    }

    #[test]
    fn watchdog_fires_on_a_switching_channel() {
        let mut cfg = small_config(8);
        cfg.schedule = ChannelSchedule {
            base: ChannelParams::default(),
            variation: Variation::Switching {
                param: crate::channel::VariedParam::P1,
                values: vec![1.0, 0.6],
                interval: 30_000,
            },
        };
        cfg.train_symbols = 20_000;
        cfg.test_symbols = 40_000;
        cfg.window = 5_000;
        cfg.watchdog = true;
        let outcome = run(&cfg).unwrap();
        // The switch at tick 30k lands in eval window 5 ([25k, 30k) of the
        // eval clock, ticks [25.1k, 30.1k)); a reset must fire within one
        // window of it.
        assert!(
            outcome
                .lambda_resets
                .iter()
                .any(|&w| (5..=6).contains(&w)),
            "resets {:?}",
            outcome.lambda_resets
        );
        // Lambda climbs back to lambda0 at the reset window.
        let reset_window = outcome
            .windows
            .iter()
            .find(|w| outcome.lambda_resets.contains(&w.index))
            .unwrap();
        assert_eq!(reset_window.lambda, 0.4);
        // Segment records cover both channels.
        assert!(outcome.segments.len() >= 2);
        assert_eq!(outcome.segments[0].value, 1.0);
        assert_eq!(outcome.segments[1].value, 0.6);
    }

    #[test]
    fn rejects_degenerate_lengths() {
        let mut cfg = small_config(9);
        cfg.window = 0;
        assert_eq!(run(&cfg).unwrap_err(), SimError::ZeroWindow);
        let mut cfg = small_config(9);
        cfg.test_symbols = 0;
        assert_eq!(run(&cfg).unwrap_err(), SimError::NoTestSymbols);
    }
}
