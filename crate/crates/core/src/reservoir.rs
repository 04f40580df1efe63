//! Ring-topology reservoir with a sine nonlinearity.
//!
//! Each neuron couples only to its predecessor; neuron 0 closes the ring and
//! reads the last neuron's value from one extra step back, reproducing the
//! one-neuron desynchronisation delay of the physical loop:
//!
//! ```text
//! x_0(n+1) = sin(alpha * x_{N-1}(n-1) + beta * M_0 * u(n) + phi)
//! x_i(n+1) = sin(alpha * x_{i-1}(n)   + beta * M_i * u(n) + phi)
//! ```

use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::prng::MaskRng;

/// Steps discarded before training so the arbitrary initial state washes out.
pub const DEFAULT_WASHOUT: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReservoirError {
    /// At least one neuron is required.
    EmptyReservoir,
    /// Mask length must equal the neuron count.
    MaskLengthMismatch { neurons: usize, mask: usize },
    /// Feedback gain must lie in [0, 1) for fading memory.
    AlphaOutOfRange,
}

impl core::fmt::Display for ReservoirError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ReservoirError::EmptyReservoir => write!(f, "reservoir needs at least one neuron"),
            ReservoirError::MaskLengthMismatch { neurons, mask } => {
                write!(f, "mask length {mask} does not match {neurons} neurons")
            }
            ReservoirError::AlphaOutOfRange => {
                write!(f, "feedback gain alpha must lie in [0, 1)")
            }
        }
    }
}

impl core::error::Error for ReservoirError {}

/// Static reservoir parameters.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReservoirConfig {
    pub neurons: usize,
    /// Feedback gain, in [0, 1).
    pub alpha: f64,
    /// Input gain.
    pub beta: f64,
    /// Phase bias of the sine, radians.
    pub phi: f64,
    /// Per-neuron input coupling, values in [-1, +1].
    pub mask: Vec<f64>,
    /// Initial steps ignored by training and evaluation.
    pub washout: u64,
    /// Amplitude of uniform noise added to observed states (0 disables).
    pub measurement_noise: f64,
}

impl ReservoirConfig {
    pub fn new(
        neurons: usize,
        alpha: f64,
        beta: f64,
        phi: f64,
        mask: Vec<f64>,
    ) -> Result<Self, ReservoirError> {
        if neurons == 0 {
            return Err(ReservoirError::EmptyReservoir);
        }
        if mask.len() != neurons {
            return Err(ReservoirError::MaskLengthMismatch {
                neurons,
                mask: mask.len(),
            });
        }
        if !(0.0..1.0).contains(&alpha) {
            return Err(ReservoirError::AlphaOutOfRange);
        }
        Ok(Self {
            neurons,
            alpha,
            beta,
            phi,
            mask,
            washout: DEFAULT_WASHOUT,
            measurement_noise: 0.0,
        })
    }

    pub fn with_washout(mut self, washout: u64) -> Self {
        self.washout = washout;
        self
    }

    pub fn with_measurement_noise(mut self, amplitude: f64) -> Self {
        assert!(amplitude >= 0.0);
        self.measurement_noise = amplitude;
        self
    }
}

/// Running reservoir state.
#[derive(Debug, Clone)]
pub struct Reservoir {
    cfg: ReservoirConfig,
    x: Vec<f64>,
    /// x_{N-1}(n-1), the delayed feedback seen by neuron 0.
    prev_last: f64,
    observe_rng: MaskRng,
}

impl Reservoir {
    /// Starts from the zero state (a fixed point of the noise-free map when
    /// phi = 0). `observe_seed` only matters when measurement noise is on.
    pub fn new(cfg: ReservoirConfig, observe_seed: u64) -> Self {
        let x = vec![0.0; cfg.neurons];
        Self {
            cfg,
            x,
            prev_last: 0.0,
            observe_rng: MaskRng::new(observe_seed),
        }
    }

    pub fn config(&self) -> &ReservoirConfig {
        &self.cfg
    }

    pub fn states(&self) -> &[f64] {
        &self.x
    }

    /// The delayed last-neuron value x_{N-1}(n-1).
    pub fn delayed_last(&self) -> f64 {
        self.prev_last
    }

    /// Overrides the state; used by perturbation and convergence studies.
    pub fn set_state(&mut self, x: &[f64], prev_last: f64) {
        assert_eq!(x.len(), self.x.len());
        self.x.copy_from_slice(x);
        self.prev_last = prev_last;
    }

    /// Advances one step with input sample `u`.
    pub fn step(&mut self, u: f64) {
        let n = self.x.len();
        let new_prev_last = self.x[n - 1];
        let drive = self.cfg.beta * u;
        for i in (1..n).rev() {
            self.x[i] =
                math::sin(self.cfg.alpha * self.x[i - 1] + drive * self.cfg.mask[i] + self.cfg.phi);
        }
        self.x[0] =
            math::sin(self.cfg.alpha * self.prev_last + drive * self.cfg.mask[0] + self.cfg.phi);
        self.prev_last = new_prev_last;
    }

    /// Advances one step with precomputed per-neuron injections
    /// (the beta * M_i * u(n) terms), for pipelines that quantise the masked
    /// input before it reaches the loop.
    pub fn step_injected(&mut self, injected: &[f64]) {
        let n = self.x.len();
        assert_eq!(injected.len(), n);
        let new_prev_last = self.x[n - 1];
        for i in (1..n).rev() {
            self.x[i] = math::sin(self.cfg.alpha * self.x[i - 1] + injected[i] + self.cfg.phi);
        }
        self.x[0] = math::sin(self.cfg.alpha * self.prev_last + injected[0] + self.cfg.phi);
        self.prev_last = new_prev_last;
    }

    /// Copies the current states into `out`, adding measurement noise when
    /// configured. The internal dynamics are never perturbed.
    pub fn observe_into(&mut self, out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(&self.x);
        if self.cfg.measurement_noise > 0.0 {
            for value in out.iter_mut() {
                *value += self.cfg.measurement_noise * self.observe_rng.next_f64();
            }
        }
    }
}

/// Maps a feedback attenuation in amplitude decibels onto the gain alpha:
/// alpha = 10^(-att/20).
pub fn map_attenuation_db(att_db: f64) -> f64 {
    assert!(att_db >= 0.0, "attenuation must be nonnegative");
    math::exp10(-att_db / 20.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(n: usize, alpha: f64, beta: f64, phi: f64, mask: Vec<f64>) -> ReservoirConfig {
        ReservoirConfig::new(n, alpha, beta, phi, mask).unwrap()
    }

    #[test]
    fn zero_gains_give_zero_states() {
        let cfg = config(4, 0.0, 0.0, 0.0, vec![0.5; 4]);
        let mut r = Reservoir::new(cfg, 0);
        r.set_state(&[0.3, -0.2, 0.9, 0.1], 0.7);
        r.step(2.0);
        assert!(r.states().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn phase_bias_alone_saturates_the_sine() {
        let cfg = config(4, 0.0, 0.0, core::f64::consts::FRAC_PI_2, vec![0.5; 4]);
        let mut r = Reservoir::new(cfg, 0);
        r.step(0.0);
        for &v in r.states() {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn three_neuron_step_matches_scalar_oracle() {
        let cfg = config(3, 0.5, 0.2, 0.0, vec![1.0, -1.0, 0.5]);
        let mut r = Reservoir::new(cfg, 0);
        r.set_state(&[0.1, 0.2, 0.3], 0.15);
        r.step(2.0);
        let expected = [
            (0.5 * 0.15 + 0.4f64).sin(),
            (0.5 * 0.1 - 0.4f64).sin(),
            (0.5 * 0.2 + 0.2f64).sin(),
        ];
        for (got, want) in r.states().iter().zip(expected.iter()) {
            assert!((got - want).abs() < 1e-15);
        }
        // The delayed slot now holds the pre-step last neuron.
        assert_eq!(r.delayed_last(), 0.3);
    }

    #[test]
    fn init_is_zero_and_stays_zero_without_drive() {
        let cfg = config(5, 0.5, 0.2, 0.0, vec![0.3; 5]);
        assert_eq!(cfg.washout, DEFAULT_WASHOUT);
        let mut r = Reservoir::new(cfg, 0);
        assert!(r.states().iter().all(|&v| v == 0.0));
        assert_eq!(r.delayed_last(), 0.0);
        for _ in 0..DEFAULT_WASHOUT {
            r.step(0.0);
        }
        assert!(r.states().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn states_stay_bounded() {
        let cfg = config(7, 0.9, 1.5, 0.4, vec![0.9, -0.8, 0.7, -0.6, 0.5, -0.4, 0.3]);
        let mut r = Reservoir::new(cfg, 0);
        let mut rng = MaskRng::new(8);
        for _ in 0..10_000 {
            r.step(10.0 * rng.next_f64());
            assert!(r.states().iter().all(|&v| (-1.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn fading_memory_converges_from_different_states() {
        let mask: Vec<f64> = {
            let mut rng = MaskRng::new(4);
            (0..20).map(|_| rng.next_f64()).collect()
        };
        let cfg = config(20, 0.6, 0.2, 0.1, mask);
        let mut a = Reservoir::new(cfg.clone(), 0);
        let mut b = Reservoir::new(cfg, 0);
        let mut init = MaskRng::new(9);
        let xa: Vec<f64> = (0..20).map(|_| init.next_f64()).collect();
        let xb: Vec<f64> = (0..20).map(|_| init.next_f64()).collect();
        a.set_state(&xa, init.next_f64());
        b.set_state(&xb, init.next_f64());
        let mut drive = MaskRng::new(33);
        for _ in 0..1000 {
            let u = 4.0 * drive.next_f64();
            a.step(u);
            b.step(u);
        }
        let max_diff = a
            .states()
            .iter()
            .zip(b.states())
            .map(|(p, q)| (p - q).abs())
            .fold(0.0f64, f64::max);
        assert!(max_diff < 1e-6, "max state difference {max_diff}");
    }

    #[test]
    fn perturbations_travel_around_the_ring() {
        let n = 6;
        let cfg = config(n, 0.5, 0.0, 0.0, vec![0.0; n]);
        let mut r = Reservoir::new(cfg, 0);
        let mut x = vec![0.0; n];
        x[1] = 0.25;
        r.set_state(&x, 0.0);
        // The pulse moves one neuron per step until it reaches the end of
        // the line.
        for k in 1..(n - 1) {
            r.step(0.0);
            for (i, &v) in r.states().iter().enumerate() {
                if i == 1 + k {
                    assert!(v != 0.0, "step {k}: neuron {i} should carry the pulse");
                } else {
                    assert_eq!(v, 0.0, "step {k}: neuron {i}");
                }
            }
        }
        // Crossing from the last neuron to neuron 0 takes one extra step.
        r.step(0.0);
        assert!(r.states().iter().all(|&v| v == 0.0));
        r.step(0.0);
        assert!(r.states()[0] != 0.0);
        assert!(r.states()[1..].iter().all(|&v| v == 0.0));
    }

    // Generic dense-matrix stepper over the augmented state (x, delayed
    // last), used as an oracle for the ring implementation.
    struct DenseOracle {
        n: usize,
        weights: Vec<Vec<f64>>, // n rows, n+1 columns; column n is the delayed slot
        input: Vec<f64>,
        phi: f64,
        x: Vec<f64>,
        delayed: f64,
    }

    impl DenseOracle {
        fn ring(cfg: &ReservoirConfig) -> Self {
            let n = cfg.neurons;
            let mut weights = vec![vec![0.0; n + 1]; n];
            weights[0][n] = cfg.alpha;
            for i in 1..n {
                weights[i][i - 1] = cfg.alpha;
            }
            let input = cfg.mask.iter().map(|m| cfg.beta * m).collect();
            Self {
                n,
                weights,
                input,
                phi: cfg.phi,
                x: vec![0.0; n],
                delayed: 0.0,
            }
        }

        fn step(&mut self, u: f64) {
            let mut augmented = self.x.clone();
            augmented.push(self.delayed);
            let mut next = vec![0.0; self.n];
            for i in 0..self.n {
                let mut acc = self.input[i] * u + self.phi;
                for (j, &z) in augmented.iter().enumerate() {
                    acc += self.weights[i][j] * z;
                }
                next[i] = acc.sin();
            }
            self.delayed = self.x[self.n - 1];
            self.x = next;
        }
    }

    #[test]
    fn ring_matches_dense_matrix_stepper() {
        let mut mask_rng = MaskRng::new(77);
        for instance in 0..5u64 {
            let mask: Vec<f64> = (0..5).map(|_| mask_rng.next_f64()).collect();
            let cfg = config(5, 0.3 + 0.1 * instance as f64, 0.25, 0.2, mask);
            let mut ring = Reservoir::new(cfg.clone(), 0);
            let mut dense = DenseOracle::ring(&cfg);
            let mut drive = MaskRng::new(instance);
            for _ in 0..200 {
                let u = 3.0 * drive.next_f64();
                ring.step(u);
                dense.step(u);
                for (a, b) in ring.states().iter().zip(dense.x.iter()) {
                    assert!((a - b).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn attenuation_mapping_is_amplitude_decibels() {
        assert_eq!(map_attenuation_db(0.0), 1.0);
        assert!((map_attenuation_db(6.0) - 0.5012).abs() < 5e-5);
        assert!((map_attenuation_db(5.1) - 0.5559).abs() < 5e-5);
    }

    #[test]
    fn config_validation() {
        assert_eq!(
            ReservoirConfig::new(0, 0.5, 0.2, 0.0, vec![]).unwrap_err(),
            ReservoirError::EmptyReservoir
        );
        assert_eq!(
            ReservoirConfig::new(3, 0.5, 0.2, 0.0, vec![0.1; 2]).unwrap_err(),
            ReservoirError::MaskLengthMismatch { neurons: 3, mask: 2 }
        );
        assert_eq!(
            ReservoirConfig::new(3, 1.0, 0.2, 0.0, vec![0.1; 3]).unwrap_err(),
            ReservoirError::AlphaOutOfRange
        );
    }
}
