//! Free evolution between pulses: the diagonal phase `e^{-i tau (n + beta)^2 / 2}`.
//!
//! The phase is evaluated in whole turns with the integer-quadratic part
//! reduced modulo one turn *before* any trigonometry. At the resonant period
//! `tau = 4 pi` the turn coefficients are exactly 1 and `2 beta`, so the
//! `beta = 0` sector sees a bit-exact identity (and `beta = 1/2` a pure global
//! phase) instead of the ~1e-11 rounding noise that direct evaluation of
//! `cos(tau n^2 / 2)` accumulates at large `|n|`.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::Result;
use crate::state::SpinorState;

/// The resonant free-evolution period at which the integer-momentum sector is
/// stationary.
pub const RESONANT_TAU: f64 = 4.0 * PI;

/// Multiplies every amplitude by `e^{-i tau (n + beta)^2 / 2}`, with `beta`
/// taken from the state.
pub fn apply_free_evolution(state: &mut SpinorState, tau: f64) -> Result<()> {
    let two_pi = 2.0 * PI;
    let beta = state.beta();
    // tau (n + beta)^2 / 2 = 2 pi (t1 n^2 + t2 n) + tau beta^2 / 2.
    let t1 = tau / (2.0 * two_pi);
    let t2 = (tau / two_pi) * beta;
    let offset_angle = -tau * beta * beta / 2.0;
    let half_width = state.half_width() as i64;
    let bins = state.num_bins();
    let mut phases = Vec::with_capacity(bins);
    for idx in 0..bins {
        let n = (idx as i64 - half_width) as f64;
        let turns = (t1 * n * n + t2 * n).rem_euclid(1.0);
        phases.push(Complex64::from_polar(1.0, -two_pi * turns + offset_angle));
    }
    for channel in 0..2 {
        for (amp, ph) in state.channel_mut(channel).iter_mut().zip(phases.iter()) {
            *amp *= ph;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kick::{apply_kick_bessel, KickParams};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    fn spread_state(half_width: usize, beta: f64) -> SpinorState {
        let mut s = SpinorState::ratchet(2, FRAC_PI_2, beta, half_width).unwrap();
        apply_kick_bessel(&mut s, &KickParams::new(-1.45, 1.45).unwrap(), 40).unwrap();
        s
    }

    #[test]
    fn resonant_period_is_bit_exact_identity_at_beta_zero() {
        let s0 = spread_state(244, 0.0);
        let mut s = s0.clone();
        apply_free_evolution(&mut s, RESONANT_TAU).unwrap();
        for ch in 0..2 {
            for idx in 0..s.num_bins() {
                let n = s.momentum_at(idx);
                assert_eq!(s.amplitude(n, ch), s0.amplitude(n, ch), "n = {n}");
            }
        }
    }

    #[test]
    fn resonant_period_is_global_phase_at_beta_half() {
        let s0 = spread_state(100, 0.5);
        let mut s = s0.clone();
        apply_free_evolution(&mut s, RESONANT_TAU).unwrap();
        assert_abs_diff_eq!(s.fidelity(&s0).unwrap(), 1.0, epsilon = 1e-13);
        // The global phase is e^{-i pi / 2}.
        let expected = Complex64::from_polar(1.0, -FRAC_PI_2);
        for ch in 0..2 {
            for idx in 0..s.num_bins() {
                let n = s.momentum_at(idx);
                let diff = (s.amplitude(n, ch) - expected * s0.amplitude(n, ch)).norm();
                assert!(diff < 1e-13, "n = {n}, diff = {diff:.3e}");
            }
        }
    }

    #[test]
    fn half_resonant_period_is_parity_flip() {
        // tau = 2 pi multiplies odd-n amplitudes by -1 at beta = 0.
        let s0 = spread_state(100, 0.0);
        let mut s = s0.clone();
        apply_free_evolution(&mut s, 2.0 * PI).unwrap();
        for ch in 0..2 {
            for idx in 0..s.num_bins() {
                let n = s.momentum_at(idx);
                let sign = if n.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                let diff = (s.amplitude(n, ch) - sign * s0.amplitude(n, ch)).norm();
                assert!(diff < 1e-13, "n = {n}");
            }
        }
    }

    #[test]
    fn phase_matches_direct_evaluation_on_small_momenta() {
        let mut s = SpinorState::basis(8, 0.2, 3, 0).unwrap();
        apply_free_evolution(&mut s, 2.0).unwrap();
        let expected = Complex64::from_polar(1.0, -2.0 * (3.2f64 * 3.2) / 2.0);
        assert!((s.amplitude(3, 0) - expected).norm() < 1e-12);
    }

    #[test]
    fn distribution_and_energy_are_invariant() {
        let s0 = spread_state(100, 0.37);
        let mut s = s0.clone();
        apply_free_evolution(&mut s, 1.234).unwrap();
        let (d0, d1) = (s0.distribution(), s.distribution());
        for idx in 0..d0.num_bins() {
            assert_abs_diff_eq!(d0.total()[idx], d1.total()[idx], epsilon = 1e-14);
        }
        assert_abs_diff_eq!(s.mean_energy(), s0.mean_energy(), epsilon = 1e-12);
        s.check_norm().unwrap();
    }

    #[test]
    fn opposite_sign_period_inverts() {
        let s0 = spread_state(100, 0.77);
        let mut s = s0.clone();
        apply_free_evolution(&mut s, 2.6).unwrap();
        apply_free_evolution(&mut s, -2.6).unwrap();
        assert_abs_diff_eq!(s.fidelity(&s0).unwrap(), 1.0, epsilon = 1e-13);
    }

    #[test]
    fn off_resonant_beta_dephases_bins_differently() {
        // At tau = 4 pi and small beta, bin n acquires e^{-i 2 pi (2 n beta + beta^2)}:
        // a nontrivial n-dependent phase.
        let beta = 0.025;
        let mut s = spread_state(100, beta);
        let before = s.amplitude(1, 0);
        apply_free_evolution(&mut s, RESONANT_TAU).unwrap();
        let expected =
            before * Complex64::from_polar(1.0, -2.0 * PI * (2.0 * beta + beta * beta));
        assert!((s.amplitude(1, 0) - expected).norm() < 1e-12);
    }
}
