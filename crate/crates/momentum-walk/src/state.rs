//! Spinor walker states on a symmetric momentum window and the distributions
//! measured from them.
//!
//! A state holds complex amplitudes `c[n][sigma]` for integer momentum classes
//! `n in [-N, N]` (units of two-photon recoils) and a two-level internal label
//! `sigma in {0, 1}` (channel 0 = internal level |1>, channel 1 = |2>), plus a
//! conserved fractional quasimomentum `beta in [0, 1)`.

use num_complex::Complex64;

use crate::error::{Result, WalkError};

/// Norm must stay within this distance of 1 after every unitary operation.
pub const NORM_TOL: f64 = 1e-12;

/// Combined population allowed in the two outermost bins on each grid edge.
pub const LEAK_TOL: f64 = 1e-8;

/// Number of internal (coin) levels.
pub const NUM_CHANNELS: usize = 2;

/// A normalized two-channel wavefunction over integer momentum classes.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorState {
    half_width: usize,
    beta: f64,
    /// One contiguous amplitude vector per internal channel, indexed by
    /// `n + half_width`.
    channels: [Vec<Complex64>; 2],
}

impl SpinorState {
    /// Builds the directed initial state `(1/sqrt(L)) sum_{n=0}^{L-1} e^{i n phi} |n>`
    /// in internal channel 0.
    ///
    /// `L = 1` is a plane wave (no directed current); `L = 2` with `phi = pi/2`
    /// is the standard two-component superposition.
    pub fn ratchet(components: usize, phase: f64, beta: f64, half_width: usize) -> Result<Self> {
        if components == 0 {
            return Err(WalkError::InvalidParameter(
                "initial state needs at least one momentum component".into(),
            ));
        }
        if half_width < components {
            return Err(WalkError::GridTooSmall(format!(
                "half-width {half_width} cannot hold {components} initial components"
            )));
        }
        check_beta(beta)?;
        let bins = 2 * half_width + 1;
        let mut ch0 = vec![Complex64::new(0.0, 0.0); bins];
        let amp = 1.0 / (components as f64).sqrt();
        for n in 0..components {
            let angle = phase * n as f64;
            ch0[half_width + n] = Complex64::from_polar(amp, angle);
        }
        Ok(Self {
            half_width,
            beta,
            channels: [ch0, vec![Complex64::new(0.0, 0.0); bins]],
        })
    }

    /// Builds a state from raw per-channel amplitude vectors (indexed by
    /// `n + half_width`). The amplitudes must already be normalized.
    pub fn from_amplitudes(
        half_width: usize,
        beta: f64,
        channels: [Vec<Complex64>; 2],
    ) -> Result<Self> {
        let bins = 2 * half_width + 1;
        if channels[0].len() != bins || channels[1].len() != bins {
            return Err(WalkError::InvalidParameter(format!(
                "amplitude vectors must have 2*half_width+1 = {bins} entries"
            )));
        }
        check_beta(beta)?;
        let state = Self {
            half_width,
            beta,
            channels,
        };
        state.check_norm()?;
        Ok(state)
    }

    /// A single basis state `|sigma> (x) |n>`.
    pub fn basis(half_width: usize, beta: f64, n: i64, channel: usize) -> Result<Self> {
        if n.unsigned_abs() as usize > half_width {
            return Err(WalkError::GridTooSmall(format!(
                "momentum {n} outside half-width {half_width}"
            )));
        }
        check_beta(beta)?;
        let bins = 2 * half_width + 1;
        let mut channels = [
            vec![Complex64::new(0.0, 0.0); bins],
            vec![Complex64::new(0.0, 0.0); bins],
        ];
        channels[channel][(n + half_width as i64) as usize] = Complex64::new(1.0, 0.0);
        Ok(Self {
            half_width,
            beta,
            channels,
        })
    }

    /// Half-width `N` of the symmetric momentum window `[-N, N]`.
    pub fn half_width(&self) -> usize {
        self.half_width
    }

    /// Number of momentum bins, `2N + 1`.
    pub fn num_bins(&self) -> usize {
        2 * self.half_width + 1
    }

    /// Conserved quasimomentum in `[0, 1)`.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Momentum class of a storage index.
    pub fn momentum_at(&self, index: usize) -> i64 {
        index as i64 - self.half_width as i64
    }

    /// Amplitude `c[n][channel]`.
    pub fn amplitude(&self, n: i64, channel: usize) -> Complex64 {
        let idx = (n + self.half_width as i64) as usize;
        self.channels[channel][idx]
    }

    pub(crate) fn channel(&self, channel: usize) -> &[Complex64] {
        &self.channels[channel]
    }

    pub(crate) fn channel_mut(&mut self, channel: usize) -> &mut [Complex64] {
        &mut self.channels[channel]
    }

    pub(crate) fn channels_mut(&mut self) -> &mut [Vec<Complex64>; 2] {
        &mut self.channels
    }

    /// Total norm `sum |c|^2`.
    pub fn norm_sq(&self) -> f64 {
        self.channels
            .iter()
            .flat_map(|ch| ch.iter())
            .map(|a| a.norm_sqr())
            .sum()
    }

    /// Errors unless the norm is 1 within [`NORM_TOL`].
    pub fn check_norm(&self) -> Result<()> {
        let norm = self.norm_sq();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(WalkError::NormViolation {
                norm,
                tol: NORM_TOL,
            });
        }
        Ok(())
    }

    /// Errors if the two outermost bins on either edge hold more than
    /// [`LEAK_TOL`] combined population. `step` only labels the report.
    pub fn check_leakage(&self, step: usize) -> Result<()> {
        let bins = self.num_bins();
        let mut edge = 0.0;
        for ch in &self.channels {
            for idx in [0, 1, bins - 2, bins - 1] {
                edge += ch[idx].norm_sqr();
            }
        }
        if edge > LEAK_TOL {
            return Err(WalkError::GridLeakage {
                step,
                edge_population: edge,
                limit: LEAK_TOL,
            });
        }
        Ok(())
    }

    /// Measured momentum distribution, merged and per channel.
    pub fn distribution(&self) -> Distribution {
        let bins = self.num_bins();
        let mut total = vec![0.0; bins];
        let mut per_channel = [vec![0.0; bins], vec![0.0; bins]];
        for (s, ch) in self.channels.iter().enumerate() {
            for (idx, amp) in ch.iter().enumerate() {
                let p = amp.norm_sqr();
                per_channel[s][idx] = p;
                total[idx] += p;
            }
        }
        Distribution {
            half_width: self.half_width,
            total,
            per_channel: Some(per_channel),
        }
    }

    /// Mean momentum `<p> = sum (n + beta) P(n)`.
    pub fn mean_momentum(&self) -> f64 {
        let hw = self.half_width as f64;
        self.channels
            .iter()
            .flat_map(|ch| ch.iter().enumerate())
            .map(|(idx, amp)| (idx as f64 - hw + self.beta) * amp.norm_sqr())
            .sum()
    }

    /// Mean kinetic energy `E = sum (n + beta)^2 P(n) / 2` (dimensionless).
    pub fn mean_energy(&self) -> f64 {
        let hw = self.half_width as f64;
        let e2: f64 = self
            .channels
            .iter()
            .flat_map(|ch| ch.iter().enumerate())
            .map(|(idx, amp)| {
                let p = idx as f64 - hw + self.beta;
                p * p * amp.norm_sqr()
            })
            .sum();
        e2 / 2.0
    }

    /// Standard deviation of the momentum variable `n + beta`.
    pub fn std_dev(&self) -> f64 {
        let mean = self.mean_momentum();
        let e2 = 2.0 * self.mean_energy();
        (e2 - mean * mean).max(0.0).sqrt()
    }

    /// Overlap fidelity `|<a|b>|^2`; the states must share grid and
    /// quasimomentum.
    pub fn fidelity(&self, other: &Self) -> Result<f64> {
        if self.half_width != other.half_width {
            return Err(WalkError::StateMismatch(format!(
                "half-widths {} vs {}",
                self.half_width, other.half_width
            )));
        }
        if (self.beta - other.beta).abs() > NORM_TOL {
            return Err(WalkError::StateMismatch(format!(
                "quasimomenta {} vs {}",
                self.beta, other.beta
            )));
        }
        let mut overlap = Complex64::new(0.0, 0.0);
        for s in 0..NUM_CHANNELS {
            for (a, b) in self.channels[s].iter().zip(other.channels[s].iter()) {
                overlap += a.conj() * b;
            }
        }
        Ok(overlap.norm_sqr())
    }

    /// Reduced 2x2 coin density matrix as `(rho_00, rho_11, rho_01)`.
    pub fn coin_density(&self) -> (f64, f64, Complex64) {
        let p0: f64 = self.channels[0].iter().map(|a| a.norm_sqr()).sum();
        let p1: f64 = self.channels[1].iter().map(|a| a.norm_sqr()).sum();
        let coherence: Complex64 = self.channels[0]
            .iter()
            .zip(self.channels[1].iter())
            .map(|(a, b)| a * b.conj())
            .sum();
        (p0, p1, coherence)
    }

    /// Von Neumann entropy of the reduced coin density matrix, in `[0, ln 2]`.
    pub fn coin_entropy(&self) -> f64 {
        let (p0, p1, c) = self.coin_density();
        coin_entropy_from_density(p0, p1, c)
    }
}

/// Entropy of the 2x2 density matrix `[[p0, c], [c*, p1]]` via its closed-form
/// eigenvalues. Shared by pure states and ensemble-averaged mixtures.
pub fn coin_entropy_from_density(p0: f64, p1: f64, coherence: Complex64) -> f64 {
    let trace = p0 + p1;
    let half_gap = (0.25 * (p0 - p1) * (p0 - p1) + coherence.norm_sqr()).sqrt();
    let lam = [
        (0.5 * trace + half_gap).clamp(0.0, 1.0),
        (0.5 * trace - half_gap).clamp(0.0, 1.0),
    ];
    let entropy = -lam
        .iter()
        .filter(|&&l| l > 1e-15)
        .map(|&l| l * l.ln())
        .sum::<f64>();
    // A pure state yields -(0.0); adding +0.0 keeps the printed value "0",
    // not "-0".
    entropy + 0.0
}

fn check_beta(beta: f64) -> Result<()> {
    if !(0.0..1.0).contains(&beta) {
        return Err(WalkError::InvalidParameter(format!(
            "quasimomentum beta must lie in [0, 1); got {beta}"
        )));
    }
    Ok(())
}

/// A measured momentum distribution over the window `[-N, N]`, with optional
/// per-channel resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    half_width: usize,
    total: Vec<f64>,
    per_channel: Option<[Vec<f64>; 2]>,
}

impl Distribution {
    /// Builds a merged-only distribution; validates shape and positivity.
    pub fn from_total(half_width: usize, total: Vec<f64>) -> Result<Self> {
        if total.len() != 2 * half_width + 1 {
            return Err(WalkError::InvalidParameter(format!(
                "distribution needs 2*half_width+1 = {} bins, got {}",
                2 * half_width + 1,
                total.len()
            )));
        }
        if total.iter().any(|&p| p < -1e-12) {
            return Err(WalkError::InvalidParameter(
                "distribution has a negative bin".into(),
            ));
        }
        Ok(Self {
            half_width,
            total,
            per_channel: None,
        })
    }

    /// Builds a distribution with per-channel parts; the merged bins are the
    /// bin-wise sum.
    pub fn from_channels(half_width: usize, per_channel: [Vec<f64>; 2]) -> Result<Self> {
        let bins = 2 * half_width + 1;
        if per_channel[0].len() != bins || per_channel[1].len() != bins {
            return Err(WalkError::InvalidParameter(format!(
                "per-channel vectors must have {bins} entries"
            )));
        }
        let total: Vec<f64> = per_channel[0]
            .iter()
            .zip(per_channel[1].iter())
            .map(|(a, b)| a + b)
            .collect();
        let mut dist = Self::from_total(half_width, total)?;
        dist.per_channel = Some(per_channel);
        Ok(dist)
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn num_bins(&self) -> usize {
        2 * self.half_width + 1
    }

    /// Momentum class of a storage index.
    pub fn momentum_at(&self, index: usize) -> i64 {
        index as i64 - self.half_width as i64
    }

    /// Merged probabilities indexed by `n + half_width`.
    pub fn total(&self) -> &[f64] {
        &self.total
    }

    /// Per-channel probabilities, when the source resolved them.
    pub fn channel(&self, channel: usize) -> Option<&[f64]> {
        self.per_channel.as_ref().map(|pc| pc[channel].as_slice())
    }

    /// Probability of momentum class `n` (0 outside the window).
    pub fn probability(&self, n: i64) -> f64 {
        let idx = n + self.half_width as i64;
        if idx < 0 || idx as usize >= self.total.len() {
            0.0
        } else {
            self.total[idx as usize]
        }
    }

    /// Sum of all bins (1 for a complete measurement).
    pub fn total_mass(&self) -> f64 {
        self.total.iter().sum()
    }

    /// Mean of the integer momentum class `sum n P(n)`.
    pub fn mean(&self) -> f64 {
        self.total
            .iter()
            .enumerate()
            .map(|(idx, p)| (idx as f64 - self.half_width as f64) * p)
            .sum()
    }

    /// `sum n^2 P(n) / 2`.
    pub fn mean_energy(&self) -> f64 {
        self.second_moment() / 2.0
    }

    fn second_moment(&self) -> f64 {
        self.total
            .iter()
            .enumerate()
            .map(|(idx, p)| {
                let n = idx as f64 - self.half_width as f64;
                n * n * p
            })
            .sum()
    }

    /// Standard deviation of the integer momentum class.
    pub fn std_dev(&self) -> f64 {
        let mean = self.mean();
        (self.second_moment() - mean * mean).max(0.0).sqrt()
    }

    /// Population-normalized mean momentum of one channel, if resolved and
    /// populated.
    pub fn channel_mean(&self, channel: usize) -> Option<f64> {
        let pc = self.per_channel.as_ref()?;
        let mass: f64 = pc[channel].iter().sum();
        if mass <= 0.0 {
            return None;
        }
        let hw = self.half_width as f64;
        let m: f64 = pc[channel]
            .iter()
            .enumerate()
            .map(|(idx, p)| (idx as f64 - hw) * p)
            .sum();
        Some(m / mass)
    }

    /// Re-grids onto a wider window, zero-padding the new bins.
    pub fn embedded(&self, half_width: usize) -> Result<Self> {
        if half_width < self.half_width {
            return Err(WalkError::GridTooSmall(format!(
                "cannot embed half-width {} into {}",
                self.half_width, half_width
            )));
        }
        let bins = 2 * half_width + 1;
        let offset = half_width - self.half_width;
        let embed = |src: &[f64]| {
            let mut out = vec![0.0; bins];
            out[offset..offset + src.len()].copy_from_slice(src);
            out
        };
        Ok(Self {
            half_width,
            total: embed(&self.total),
            per_channel: self
                .per_channel
                .as_ref()
                .map(|pc| [embed(&pc[0]), embed(&pc[1])]),
        })
    }

    /// Relabels every bin `n -> n + q`, keeping the window; mass shifted past
    /// an edge is an error.
    pub fn shifted(&self, q: i64) -> Result<Self> {
        let bins = self.num_bins() as i64;
        let mut total = vec![0.0; self.num_bins()];
        let mut dropped = 0.0;
        for (idx, &p) in self.total.iter().enumerate() {
            let to = idx as i64 + q;
            if to < 0 || to >= bins {
                dropped += p;
            } else {
                total[to as usize] = p;
            }
        }
        if dropped > 1e-12 {
            return Err(WalkError::GridTooSmall(format!(
                "shift by {q} pushes probability {dropped:.3e} outside the window"
            )));
        }
        Ok(Self {
            half_width: self.half_width,
            total,
            per_channel: None,
        })
    }

    /// Bin-wise convex mixture `w a + (1-w) b` of two same-grid distributions.
    pub fn mixture(a: &Self, b: &Self, weight_a: f64) -> Result<Self> {
        if a.half_width != b.half_width {
            return Err(WalkError::GridMismatch(a.num_bins(), b.num_bins()));
        }
        let total = a
            .total
            .iter()
            .zip(b.total.iter())
            .map(|(x, y)| weight_a * x + (1.0 - weight_a) * y)
            .collect();
        Ok(Self {
            half_width: a.half_width,
            total,
            per_channel: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn ratchet_state_matches_two_component_form() {
        let s = SpinorState::ratchet(2, FRAC_PI_2, 0.0, 8).unwrap();
        // (|0> + i|1>)/sqrt(2) in channel 0.
        assert_abs_diff_eq!(s.amplitude(0, 0).re, 1.0 / 2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(s.amplitude(1, 0).im, 1.0 / 2f64.sqrt(), epsilon = 1e-15);
        assert_eq!(s.amplitude(0, 1), Complex64::new(0.0, 0.0));
        s.check_norm().unwrap();
        let d = s.distribution();
        assert_abs_diff_eq!(d.probability(0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(d.probability(1), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(s.mean_momentum(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn ratchet_state_rejects_bad_inputs() {
        assert!(SpinorState::ratchet(0, 0.0, 0.0, 8).is_err());
        assert!(SpinorState::ratchet(9, 0.0, 0.0, 8).is_err());
        assert!(SpinorState::ratchet(2, 0.0, 1.0, 8).is_err());
        assert!(SpinorState::ratchet(2, 0.0, -0.1, 8).is_err());
    }

    #[test]
    fn plane_wave_moments() {
        let s = SpinorState::basis(6, 0.5, 0, 0).unwrap();
        assert_abs_diff_eq!(s.mean_momentum(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(s.mean_energy(), 0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(s.std_dev(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn entropy_limits() {
        // Product state: zero entropy.
        let s = SpinorState::ratchet(2, FRAC_PI_2, 0.0, 8).unwrap();
        assert_abs_diff_eq!(s.coin_entropy(), 0.0, epsilon = 1e-12);

        // Maximally entangled (|0>|+1> + |1>|-1>)/sqrt(2): ln 2.
        let bins = 2 * 4 + 1;
        let mut ch0 = vec![Complex64::new(0.0, 0.0); bins];
        let mut ch1 = vec![Complex64::new(0.0, 0.0); bins];
        let a = Complex64::new(1.0 / 2f64.sqrt(), 0.0);
        ch0[4 + 1] = a;
        ch1[4 - 1] = a;
        let s = SpinorState::from_amplitudes(4, 0.0, [ch0, ch1]).unwrap();
        assert_abs_diff_eq!(s.coin_entropy(), 2f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn fidelity_is_symmetric_and_phase_blind() {
        let a = SpinorState::ratchet(2, FRAC_PI_2, 0.0, 8).unwrap();
        let mut b = a.clone();
        let phase = Complex64::from_polar(1.0, 0.83);
        for ch in b.channels_mut() {
            for amp in ch.iter_mut() {
                *amp *= phase;
            }
        }
        assert_abs_diff_eq!(a.fidelity(&b).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(
            a.fidelity(&b).unwrap(),
            b.fidelity(&a).unwrap(),
            epsilon = 1e-15
        );

        let c = SpinorState::basis(8, 0.0, 3, 1).unwrap();
        assert_abs_diff_eq!(a.fidelity(&c).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn fidelity_rejects_mismatched_states() {
        let a = SpinorState::ratchet(2, FRAC_PI_2, 0.0, 8).unwrap();
        let b = SpinorState::ratchet(2, FRAC_PI_2, 0.0, 9).unwrap();
        assert!(a.fidelity(&b).is_err());
        let c = SpinorState::ratchet(2, FRAC_PI_2, 0.25, 8).unwrap();
        assert!(a.fidelity(&c).is_err());
    }

    #[test]
    fn leakage_guard_trips_on_edge_population() {
        let s = SpinorState::basis(5, 0.0, 5, 0).unwrap();
        assert!(matches!(
            s.check_leakage(3),
            Err(WalkError::GridLeakage { step: 3, .. })
        ));
        let inner = SpinorState::basis(5, 0.0, 0, 0).unwrap();
        inner.check_leakage(0).unwrap();
    }

    #[test]
    fn distribution_moments_and_regrid() {
        let d = Distribution::from_total(2, vec![0.25, 0.0, 0.5, 0.0, 0.25]).unwrap();
        assert_abs_diff_eq!(d.mean(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.std_dev(), 2f64.sqrt(), epsilon = 1e-15);

        let wide = d.embedded(4).unwrap();
        assert_eq!(wide.num_bins(), 9);
        assert_abs_diff_eq!(wide.probability(-2), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(wide.std_dev(), d.std_dev(), epsilon = 1e-15);

        let shifted = wide.shifted(1).unwrap();
        assert_abs_diff_eq!(shifted.probability(-1), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(shifted.mean(), 1.0, epsilon = 1e-15);

        // Shifting mass over the edge is an error, translation invariance holds.
        assert!(d.shifted(1).is_err());
        assert_abs_diff_eq!(shifted.std_dev(), d.std_dev(), epsilon = 1e-15);
    }

    #[test]
    fn ratchet_phase_sign_flips_direction_marker() {
        // The two opposite-phase initial states are mirror images.
        let plus = SpinorState::ratchet(2, FRAC_PI_2, 0.0, 8).unwrap();
        let minus = SpinorState::ratchet(2, -FRAC_PI_2 + 2.0 * PI, 0.0, 8).unwrap();
        assert_abs_diff_eq!(
            plus.amplitude(1, 0).im,
            -minus.amplitude(1, 0).im,
            epsilon = 1e-12
        );
    }
}
