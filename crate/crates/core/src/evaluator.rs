//! Symbol decisions and symbol-error-rate bookkeeping.

use alloc::vec::Vec;

/// One channel symbol from the alphabet {-3, -1, 1, 3}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct Symbol(i8);

impl Symbol {
    pub const ALPHABET: [Symbol; 4] = [Symbol(-3), Symbol(-1), Symbol(1), Symbol(3)];

    /// Wraps a raw level, `None` if it is not in the alphabet.
    pub fn from_level(level: i8) -> Option<Self> {
        matches!(level, -3 | -1 | 1 | 3).then_some(Symbol(level))
    }

    pub fn level(self) -> i8 {
        self.0
    }

    pub fn to_f64(self) -> f64 {
        f64::from(self.0)
    }
}

impl From<Symbol> for f64 {
    fn from(s: Symbol) -> f64 {
        s.to_f64()
    }
}

impl core::fmt::Display for Symbol {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalError {
    /// `decide` was handed a NaN or infinite readout value.
    NonFiniteOutput,
    /// SER was requested over zero counted symbols.
    EmptyRegion,
}

impl core::fmt::Display for EvalError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            EvalError::NonFiniteOutput => write!(f, "readout value is not finite"),
            EvalError::EmptyRegion => write!(f, "SER over an empty symbol region"),
        }
    }
}

impl core::error::Error for EvalError {}

/// Rounds a readout value to the nearest alphabet symbol.
///
/// Thresholds sit at -2, 0 and +2; a value exactly on a threshold rounds
/// toward the larger symbol so replays of fixed-point runs stay deterministic.
#[inline]
pub fn decide(y: f64) -> Result<Symbol, EvalError> {
    if !y.is_finite() {
        return Err(EvalError::NonFiniteOutput);
    }
    let level = if y < -2.0 {
        -3
    } else if y < 0.0 {
        -1
    } else if y < 2.0 {
        1
    } else {
        3
    };
    Ok(Symbol(level))
}

/// Fraction of mismatched symbols, skipping the first `skip` pairs.
///
/// The skip region covers washout, channel warm-up and (for test-phase SER)
/// the training period.
pub fn ser(decisions: &[Symbol], targets: &[Symbol], skip: usize) -> Result<f64, EvalError> {
    if decisions.len() != targets.len() || decisions.len() <= skip {
        return Err(EvalError::EmptyRegion);
    }
    let counted = decisions.len() - skip;
    let errors = decisions[skip..]
        .iter()
        .zip(&targets[skip..])
        .filter(|(d, t)| d != t)
        .count();
    Ok(errors as f64 / counted as f64)
}

/// Running error counter.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SerAccumulator {
    pub errors: u64,
    pub symbols: u64,
}

impl SerAccumulator {
    pub fn record(&mut self, correct: bool) {
        self.symbols += 1;
        if !correct {
            self.errors += 1;
        }
    }

    pub fn ser(&self) -> f64 {
        if self.symbols == 0 {
            0.0
        } else {
            self.errors as f64 / self.symbols as f64
        }
    }
}

/// A completed tumbling SER window.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WindowSer {
    pub index: u64,
    pub errors: u64,
    pub symbols: u64,
    pub ser: f64,
}

/// Tumbling-window SER tracker ("averaged over 10k symbols" in the traces).
///
/// Windows are disjoint; a window completes after exactly `window` symbols
/// and is reported once. The trailing partial window is available separately.
#[derive(Debug, Clone)]
pub struct WindowedSer {
    window: u64,
    current: SerAccumulator,
    completed_windows: u64,
    history: Vec<WindowSer>,
}

impl WindowedSer {
    /// `window` must be at least 1.
    pub fn new(window: u64) -> Self {
        assert!(window >= 1, "window length must be at least 1");
        Self {
            window,
            current: SerAccumulator::default(),
            completed_windows: 0,
            history: Vec::new(),
        }
    }

    /// Records one decision; returns the finished window when one completes.
    pub fn record(&mut self, correct: bool) -> Option<WindowSer> {
        self.current.record(correct);
        if self.current.symbols == self.window {
            let done = WindowSer {
                index: self.completed_windows,
                errors: self.current.errors,
                symbols: self.current.symbols,
                ser: self.current.ser(),
            };
            self.completed_windows += 1;
            self.current = SerAccumulator::default();
            self.history.push(done);
            Some(done)
        } else {
            None
        }
    }

    pub fn window_length(&self) -> u64 {
        self.window
    }

    /// All completed windows so far.
    pub fn history(&self) -> &[WindowSer] {
        &self.history
    }

    /// The unfinished trailing window, if any symbols are pending.
    pub fn partial(&self) -> Option<SerAccumulator> {
        (self.current.symbols > 0).then_some(self.current)
    }

    /// Error/symbol totals over completed windows plus the partial tail.
    /// Equals the global SER over the same region exactly.
    pub fn total(&self) -> SerAccumulator {
        let mut total = self.current;
        for w in &self.history {
            total.errors += w.errors;
            total.symbols += w.symbols;
        }
        total
    }
}
