//! Deterministic pseudorandom sources.
//!
//! Channel symbols and channel noise come from Galois linear feedback shift
//! registers, as on the reference hardware; input masks come from a
//! counter-based generator seeded on the host side. Every stream is a pure
//! function of its seed, so runs replay bit-identically.

use alloc::vec::Vec;

use crate::evaluator::Symbol;

/// Errors from constructing or driving a pseudorandom source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrngError {
    /// A Galois LFSR was seeded with the absorbing all-zeros state.
    ZeroState,
    /// Register width outside the supported 2..=64 range.
    UnsupportedWidth(u32),
    /// No primitive polynomial is tabulated for this width.
    NoPrimitivePolynomial(u32),
    /// An input mask must contain at least one element.
    EmptyMask,
}

impl core::fmt::Display for PrngError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            PrngError::ZeroState => write!(f, "GLFSR state must be nonzero"),
            PrngError::UnsupportedWidth(w) => {
                write!(f, "GLFSR width {w} outside supported range 2..=64")
            }
            PrngError::NoPrimitivePolynomial(w) => {
                write!(f, "no tabulated primitive polynomial of degree {w}")
            }
            PrngError::EmptyMask => write!(f, "input mask length must be at least 1"),
        }
    }
}

impl core::error::Error for PrngError {}

/// Galois linear feedback shift register.
///
/// The register shifts right; when the output bit (bit 0) is set, the state
/// is XORed with the taps mask. Taps encode the feedback polynomial
/// `x^w + ... + 1` with mask bit `k` standing for the `x^(k+1)` term, so bit
/// `w-1` is always set. With a primitive polynomial the output is a maximal
/// length sequence of period `2^w - 1`.
#[derive(Debug, Clone)]
pub struct Glfsr {
    state: u64,
    taps: u64,
    width: u32,
}

impl Glfsr {
    /// Builds a register from an explicit taps mask.
    ///
    /// The seed is truncated to `width` bits; a seed that truncates to zero
    /// is rejected because all-zeros is the absorbing state.
    pub fn new(width: u32, taps: u64, seed: u64) -> Result<Self, PrngError> {
        if !(2..=64).contains(&width) {
            return Err(PrngError::UnsupportedWidth(width));
        }
        let mask = width_mask(width);
        let state = seed & mask;
        if state == 0 {
            return Err(PrngError::ZeroState);
        }
        Ok(Self {
            state,
            taps: taps & mask,
            width,
        })
    }

    /// Builds a register using the tabulated primitive polynomial for `width`.
    pub fn with_primitive_poly(width: u32, seed: u64) -> Result<Self, PrngError> {
        let taps = primitive_taps(width).ok_or(PrngError::NoPrimitivePolynomial(width))?;
        Self::new(width, taps, seed)
    }

    /// Advances one Galois step and returns the output bit (0 or 1).
    #[inline]
    pub fn next_bit(&mut self) -> u64 {
        let out = self.state & 1;
        self.state >>= 1;
        if out != 0 {
            self.state ^= self.taps;
        }
        out
    }

    /// Collects `count` successive output bits, first bit in the MSB.
    #[inline]
    pub fn next_bits(&mut self, count: u32) -> u64 {
        debug_assert!(count <= 64);
        let mut word = 0;
        for _ in 0..count {
            word = (word << 1) | self.next_bit();
        }
        word
    }

    pub fn state(&self) -> u64 {
        self.state
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn taps(&self) -> u64 {
        self.taps
    }

    /// Walks the register until the state recurs and returns the cycle length.
    pub fn cycle_length(&self) -> u64 {
        let mut probe = self.clone();
        let start = probe.state;
        let mut steps = 0u64;
        loop {
            probe.next_bit();
            steps += 1;
            if probe.state == start {
                return steps;
            }
        }
    }

    fn seeded_nonzero(width: u32, seed: u64) -> Self {
        let mask = width_mask(width);
        // Reduce modulo 2^w - 1 and shift into 1..=2^w-1 so any u64 seed maps
        // to a valid state.
        let state = (seed % mask) + 1;
        Self::with_primitive_poly(width, state).expect("tabulated polynomial")
    }
}

fn width_mask(width: u32) -> u64 {
    if width == 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

/// Taps mask of a tabulated primitive polynomial of the given degree
/// (widths 2..=32), in the encoding described on [`Glfsr`].
pub fn primitive_taps(width: u32) -> Option<u64> {
    // Tap positions of maximal-length polynomials; entry w lists the exponents
    // of x^w + ... + 1 without the constant term.
    const TAPS: [&[u32]; 31] = [
        &[2, 1],
        &[3, 2],
        &[4, 3],
        &[5, 3],
        &[6, 5],
        &[7, 6],
        &[8, 6, 5, 4],
        &[9, 5],
        &[10, 7],
        &[11, 9],
        &[12, 6, 4, 1],
        &[13, 4, 3, 1],
        &[14, 5, 3, 1],
        &[15, 14],
        &[16, 15, 13, 4],
        &[17, 14],
        &[18, 11],
        &[19, 6, 2, 1],
        &[20, 17],
        &[21, 19],
        &[22, 21],
        &[23, 18],
        &[24, 23, 22, 17],
        &[25, 22],
        &[26, 6, 2, 1],
        &[27, 5, 2, 1],
        &[28, 25],
        &[29, 27],
        &[30, 6, 4, 1],
        &[31, 28],
        &[32, 22, 2, 1],
    ];
    if !(2..=32).contains(&width) {
        return None;
    }
    let exponents = TAPS[(width - 2) as usize];
    Some(
        exponents
            .iter()
            .fold(0u64, |mask, &e| mask | (1u64 << (e - 1))),
    )
}

/// Register widths of the two symbol GLFSRs. The product of their periods is
/// about 2.3e18, comfortably past the ~1e9 combined period of the reference
/// generators.
pub const SYMBOL_REGISTER_WIDTHS: (u32, u32) = (31, 30);

/// Register width of the noise GLFSR (period 131071).
pub const NOISE_REGISTER_WIDTH: u32 = 17;

/// Pseudorandom channel-symbol source built from two GLFSRs.
///
/// Each symbol consumes one bit from each register; the pair maps onto the
/// alphabet as 00 -> -3, 01 -> -1, 10 -> 1, 11 -> 3 (high bit from the wider
/// register).
#[derive(Debug, Clone)]
pub struct SymbolSource {
    hi: Glfsr,
    lo: Glfsr,
}

impl SymbolSource {
    /// Derives both register states from one seed.
    pub fn new(seed: u64) -> Self {
        let (hi_width, lo_width) = SYMBOL_REGISTER_WIDTHS;
        Self {
            hi: Glfsr::seeded_nonzero(hi_width, mix64(seed ^ 0x53594d_48)),
            lo: Glfsr::seeded_nonzero(lo_width, mix64(seed ^ 0x53594d_4c)),
        }
    }

    /// Uses caller-supplied registers.
    pub fn with_registers(hi: Glfsr, lo: Glfsr) -> Self {
        Self { hi, lo }
    }

    #[inline]
    pub fn next_symbol(&mut self) -> Symbol {
        symbol_from_bits(self.hi.next_bit(), self.lo.next_bit())
    }
}

#[inline]
fn symbol_from_bits(b1: u64, b0: u64) -> Symbol {
    let index = (b1 << 1) | b0;
    Symbol::from_level(2 * index as i8 - 3).expect("index in alphabet")
}

/// Uniform noise source over [-1, 1] built from the dedicated GLFSR.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    reg: Glfsr,
}

impl NoiseSource {
    pub fn new(seed: u64) -> Self {
        Self {
            reg: Glfsr::seeded_nonzero(NOISE_REGISTER_WIDTH, mix64(seed ^ 0x4e4f495345)),
        }
    }

    /// Returns `amplitude * r` with `r` uniform over [-1, +1].
    ///
    /// Each draw consumes one register width of bits. A window of an
    /// m-sequence is never all-zero, so the raw word lies in 1..=2^17-1 and
    /// maps affinely onto [-1, +1] with zero mean over a full period.
    ///
    /// Panics if `amplitude` is negative.
    #[inline]
    pub fn next_noise(&mut self, amplitude: f64) -> f64 {
        assert!(amplitude >= 0.0, "noise amplitude must be nonnegative");
        let width = self.reg.width();
        let word = self.reg.next_bits(width);
        let mid = 1u64 << (width - 1);
        let r = (word as f64 - mid as f64) / (mid - 1) as f64;
        amplitude * r
    }
}

/// Counter-based generator for input masks, independent of the GLFSRs.
///
/// Output `i` is the SplitMix64 finalizer applied to `seed + (i+1)*phi`, so
/// the stream is a pure function of (seed, call index).
#[derive(Debug, Clone)]
pub struct MaskRng {
    seed: u64,
    counter: u64,
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

impl MaskRng {
    pub fn new(seed: u64) -> Self {
        Self { seed, counter: 0 }
    }

    /// Next value, uniform over [-1, 1).
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        self.counter = self.counter.wrapping_add(1);
        let word = mix64(
            self.seed
                .wrapping_add(self.counter.wrapping_mul(GOLDEN_GAMMA)),
        );
        let unit = (word >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        2.0 * unit - 1.0
    }

    /// Draws an input mask of `n` elements in [-1, +1].
    pub fn draw_mask(&mut self, n: usize) -> Result<Vec<f64>, PrngError> {
        if n == 0 {
            return Err(PrngError::EmptyMask);
        }
        Ok((0..n).map(|_| self.next_f64()).collect())
    }
}

/// SplitMix64 finalizer; also used to derive per-run sub-seeds.
#[inline]
pub fn mix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeSet;
    use alloc::vec::Vec;

    // x^3 + x + 1 in the taps encoding: bits 2 (from x^3) and 0 (from x^1).
    const TAPS_X3_X_1: u64 = 0b101;

    #[test]
    fn width3_cycles_through_all_nonzero_states() {
        let mut reg = Glfsr::new(3, TAPS_X3_X_1, 0b001).unwrap();
        let mut seen = BTreeSet::new();
        for _ in 0..7 {
            seen.insert(reg.state());
            reg.next_bit();
        }
        assert_eq!(seen.len(), 7);
        assert_eq!(reg.state(), 0b001);
    }

    #[test]
    fn zero_seed_rejected() {
        assert_eq!(
            Glfsr::new(3, TAPS_X3_X_1, 0).unwrap_err(),
            PrngError::ZeroState
        );
        // Seeds that truncate to zero are rejected too.
        assert_eq!(
            Glfsr::new(3, TAPS_X3_X_1, 0b1000).unwrap_err(),
            PrngError::ZeroState
        );
    }

    #[test]
    fn width17_period_is_maximal() {
        let reg = Glfsr::with_primitive_poly(17, 1).unwrap();
        assert_eq!(reg.cycle_length(), (1 << 17) - 1);
    }

    #[test]
    fn symbol_encoding_follows_bit_pair_convention() {
        assert_eq!(symbol_from_bits(0, 0).level(), -3);
        assert_eq!(symbol_from_bits(0, 1).level(), -1);
        assert_eq!(symbol_from_bits(1, 0).level(), 1);
        assert_eq!(symbol_from_bits(1, 1).level(), 3);
    }

    #[test]
    fn symbol_frequencies_are_uniform() {
        let mut src = SymbolSource::new(0xA5A5);
        let mut counts = [0u64; 4];
        let draws = 4_000_000;
        for _ in 0..draws {
            let s = src.next_symbol();
            counts[((s.level() + 3) / 2) as usize] += 1;
        }
        for &c in &counts {
            let freq = c as f64 / draws as f64;
            assert!((0.2475..=0.2525).contains(&freq), "frequency {freq}");
        }
    }

    #[test]
    fn symbol_stream_is_deterministic() {
        let mut a = SymbolSource::new(7);
        let mut b = SymbolSource::new(7);
        for _ in 0..1_000_000 {
            assert_eq!(a.next_symbol(), b.next_symbol());
        }
    }

    #[test]
    fn zero_amplitude_noise_is_zero() {
        let mut src = NoiseSource::new(3);
        for _ in 0..100 {
            assert_eq!(src.next_noise(0.0), 0.0);
        }
    }

    #[test]
    fn unit_noise_is_centred_and_bounded() {
        let mut src = NoiseSource::new(11);
        let mut sum = 0.0;
        for _ in 0..100_000 {
            let v = src.next_noise(1.0);
            assert!((-1.0..=1.0).contains(&v));
            sum += v;
        }
        let mean = sum / 100_000.0;
        assert!(mean.abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn noise_scales_with_amplitude() {
        let mut src = NoiseSource::new(19);
        for _ in 0..1000 {
            let v = src.next_noise(2.0);
            assert!((-2.0..=2.0).contains(&v));
        }
    }

    #[test]
    #[should_panic(expected = "nonnegative")]
    fn negative_amplitude_rejected() {
        NoiseSource::new(1).next_noise(-0.5);
    }

    #[test]
    fn masks_are_bounded_and_deterministic() {
        let mut a = MaskRng::new(42);
        let mut b = MaskRng::new(42);
        let ma = a.draw_mask(50).unwrap();
        let mb = b.draw_mask(50).unwrap();
        assert_eq!(ma, mb);
        assert!(ma.iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn empty_mask_rejected() {
        assert_eq!(MaskRng::new(1).draw_mask(0).unwrap_err(), PrngError::EmptyMask);
    }

    #[test]
    fn mask_variance_matches_uniform_moment() {
        let mut rng = MaskRng::new(5);
        let values: Vec<f64> = (0..100_000).map(|_| rng.next_f64()).collect();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / values.len() as f64;
        let target = 1.0 / 3.0;
        assert!((var - target).abs() < 0.05 * target, "variance {var}");
    }
}
